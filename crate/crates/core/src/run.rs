//! Executes a parsed configuration and writes its artifacts.
//!
//! Every run directory gets a `manifest.toml`: the resolved configuration
//! plus a `[run]` table with metadata. Stripping `[run]` and parsing the rest
//! gives back the configuration. Data files never contain wall-clock values.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use toml::{Table, Value};

use crate::bifurcation::{self, BranchClassification, K3Sign, LogCaseIntermediates};
use crate::config::{
    self, AnalyzeConfig, BifurcateConfig, Command, ConfigError, ConfigErrors, ParamSource, RunConfig, SimulateConfig,
    SteadyConfig,
};
use crate::error::Error;
use crate::linstab::{self, ModeAnalysis, Threshold};
use crate::model::ModelParams;
use crate::pde::{self, fmt_f64, Grid, Simulation, SimulationControls, Termination};
use crate::steady::{self, Branch, BranchFit, ContinuationControls};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error:\n{0}")]
    Config(ConfigErrors),
    #[error("{0}")]
    Model(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// 0 success, 2 configuration, 3 numerical failure, 4 model domain,
    /// 1 anything else (file system).
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Model(e) if e.is_domain_error() => 4,
            RunError::Model(_) => 3,
            RunError::Io(_) => 1,
        }
    }
}

impl From<ConfigErrors> for RunError {
    fn from(e: ConfigErrors) -> Self {
        RunError::Config(e)
    }
}

pub type RunResult<T> = std::result::Result<T, RunError>;

/// What a finished run hands back to the caller.
#[derive(Debug, Clone)]
pub struct Report {
    pub dir: PathBuf,
    /// Human-readable summary (also written to `summary.txt`).
    pub summary: String,
}

fn create(path: &Path) -> std::io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_text(path: &Path, text: &str) -> std::io::Result<()> {
    fs::write(path, text)
}

/// Parses a manifest back into the configuration it records.
pub fn parse_manifest(text: &str) -> Result<RunConfig, ConfigErrors> {
    let mut table: Table = text.parse().map_err(|e: toml::de::Error| {
        ConfigErrors(vec![ConfigError {
            path: String::new(),
            message: format!("not a valid TOML document: {}", e.message()),
        }])
    })?;
    table.remove("run");
    config::parse_table(&table, None)
}

/// Metadata recorded next to the configuration.
#[derive(Debug, Clone, Default)]
struct RunMeta {
    termination: String,
    wall_time_s: f64,
    extra: Table,
    error: Option<String>,
}

fn write_manifest(dir: &Path, config: &RunConfig, meta: &RunMeta) -> std::io::Result<()> {
    let mut root = config::to_table(config);
    let mut run = Table::new();
    run.insert("version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
    run.insert("termination".into(), Value::String(meta.termination.clone()));
    run.insert("wall_time_s".into(), Value::Float(meta.wall_time_s));
    for (k, v) in &meta.extra {
        run.insert(k.clone(), v.clone());
    }
    if let Some(e) = &meta.error {
        run.insert("error".into(), Value::String(e.clone()));
    }
    root.insert("run".into(), Value::Table(run));
    let text = toml::to_string(&root).expect("tables of plain values serialize");
    write_text(&dir.join("manifest.toml"), &text)
}

/// Runs `config` into `dir`, writing the manifest whether or not the run
/// succeeds.
pub fn execute(config: &RunConfig, dir: &Path) -> RunResult<Report> {
    fs::create_dir_all(dir)?;
    let start = Instant::now();
    let mut meta = RunMeta::default();
    let outcome = match &config.command {
        Command::Analyze(a) => run_analyze(config, a, dir, &mut meta),
        Command::Bifurcate(b) => run_bifurcate(config, b, dir, &mut meta),
        Command::Simulate(s) => run_simulate(config, s, dir, &mut meta),
        Command::Steady(s) => run_steady(config, s, dir, &mut meta),
    };
    meta.wall_time_s = start.elapsed().as_secs_f64();
    if let Err(e) = &outcome {
        meta.termination = "error".into();
        meta.error = Some(e.to_string());
    }
    write_manifest(dir, config, &meta)?;
    let summary = outcome?;
    write_text(&dir.join("summary.txt"), &summary)?;
    Ok(Report {
        dir: dir.to_path_buf(),
        summary,
    })
}

/// Output directory: the command line wins over the config, which wins over
/// `runs/<command>`.
pub fn output_dir(config: &RunConfig, cli: Option<&Path>) -> PathBuf {
    match (cli, &config.output.dir) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => PathBuf::from("runs").join(config.command.name()),
    }
}

// ---------------------------------------------------------------- analyze

#[derive(Debug, Clone)]
pub struct AnalyzeReport {
    pub params: ModelParams,
    pub modes: Vec<ModeAnalysis>,
    /// `None` when the sensitivity is not attractive (no finite threshold).
    pub threshold: Option<Threshold>,
    pub unstable: bool,
    pub max_growth: f64,
}

pub fn analyze(params: &ModelParams, k_max: usize) -> crate::error::Result<AnalyzeReport> {
    let modes = (1..=k_max)
        .map(|k| linstab::mode_analysis(params, k))
        .collect::<crate::error::Result<Vec<_>>>()?;
    let threshold = match linstab::chi_0(params, k_max.max(linstab::DEFAULT_K_MAX)) {
        Ok(t) => Some(t),
        Err(Error::NonAttractiveSensitivity(_)) => None,
        Err(e) => return Err(e),
    };
    let unstable = match threshold {
        Some(_) => linstab::is_unstable(params)?.unstable,
        None => false,
    };
    let max_growth = modes.iter().map(|m| m.growth_rates[0].re).fold(-1.0, f64::max);
    Ok(AnalyzeReport {
        params: params.clone(),
        modes,
        threshold,
        unstable,
        max_growth,
    })
}

pub const ANALYSIS_HEADER: &str = "k,mu_k,chi_k,trace,det,growth1_re,growth1_im,growth2_re,growth2_im";

pub fn write_analysis<W: Write>(mut out: W, modes: &[ModeAnalysis]) -> std::io::Result<()> {
    writeln!(out, "{ANALYSIS_HEADER}")?;
    for m in modes {
        let chi = m.chi_k.map(fmt_f64).unwrap_or_else(|| "inf".into());
        let [g1, g2] = m.growth_rates;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            m.k,
            fmt_f64(m.mu_k),
            chi,
            fmt_f64(m.trace),
            fmt_f64(m.det),
            fmt_f64(g1.re),
            fmt_f64(g1.im),
            fmt_f64(g2.re),
            fmt_f64(g2.im)
        )?;
    }
    Ok(())
}

fn params_line(p: &ModelParams) -> String {
    format!(
        "d1 = {}, d2 = {}, chi = {}, lambda = {}, L = {}, sensitivity = {}",
        p.d1,
        p.d2,
        p.chi,
        p.lambda,
        p.length,
        p.sensitivity.name()
    )
}

pub fn analyze_summary(r: &AnalyzeReport) -> String {
    let mut s = String::new();
    writeln!(s, "{}", params_line(&r.params)).unwrap();
    match &r.threshold {
        Some(t) => {
            writeln!(s, "chi0 = {:.10} at k* = {}", t.chi0, t.k_star).unwrap();
            if let Some(j) = t.tied_with {
                writeln!(s, "tie: mode {j} has the same threshold").unwrap();
            }
        }
        None => writeln!(s, "chi0: none (sensitivity is not attractive at the equilibrium)").unwrap(),
    }
    writeln!(s, "largest growth rate over listed modes = {:.6e}", r.max_growth).unwrap();
    writeln!(s, "verdict: {}", if r.unstable { "unstable" } else { "stable" }).unwrap();
    s
}

fn run_analyze(config: &RunConfig, a: &AnalyzeConfig, dir: &Path, meta: &mut RunMeta) -> RunResult<String> {
    let report = analyze(&config.model_params(), a.k_max)?;
    write_analysis(create(&dir.join("analysis.csv"))?, &report.modes)?;
    meta.termination = "done".into();
    meta.extra
        .insert("verdict".into(), Value::String(if report.unstable { "unstable" } else { "stable" }.into()));
    Ok(analyze_summary(&report))
}

// -------------------------------------------------------------- bifurcate

pub const BIFURCATION_HEADER: &str = "k,q_k,chi_k,k3,k3_coefficient,k3_sign,direction,stability,nondegenerate,case,delta,q_hat,q_tilde,d2_star,d2_double_star";

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn write_bifurcation<W: Write>(
    mut out: W,
    rows: &[(BranchClassification, Option<LogCaseIntermediates>)],
) -> std::io::Result<()> {
    writeln!(out, "{BIFURCATION_HEADER}")?;
    for (c, li) in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.k,
            fmt_f64(c.q_k),
            fmt_f64(c.chi_k),
            opt(c.k3),
            opt(c.k3_coefficient),
            c.k3_sign.as_str(),
            c.direction.as_str(),
            c.stability.as_str(),
            c.nondegenerate,
            c.case.map(|x| x.label()).unwrap_or(""),
            opt(li.as_ref().map(|l| l.delta)),
            opt(li.as_ref().map(|l| l.q_hat)),
            opt(li.as_ref().map(|l| l.q_tilde)),
            opt(li.as_ref().map(|l| l.d2_star)),
            opt(li.as_ref().map(|l| l.d2_double_star)),
        )?;
    }
    Ok(())
}

pub fn bifurcate_summary(params: &ModelParams, rows: &[(BranchClassification, Option<LogCaseIntermediates>)]) -> String {
    let mut s = String::new();
    writeln!(s, "{}", params_line(params)).unwrap();
    for (c, li) in rows {
        writeln!(s, "k = {}: Q_k = {:.10}, chi_k = {:.10}", c.k, c.q_k, c.chi_k).unwrap();
        match c.k3_coefficient {
            Some(k3) => writeln!(s, "  K3 = {k3:.10e} ({})", c.k3_sign.as_str()).unwrap(),
            None => writeln!(s, "  K3 undefined (resonant mode interaction)").unwrap(),
        }
        writeln!(s, "  {} and {}", c.direction.as_str(), c.stability.as_str()).unwrap();
        if !c.nondegenerate {
            writeln!(s, "  degenerate: the non-resonance condition fails").unwrap();
        } else if c.near_degenerate {
            writeln!(s, "  warning: close to a resonance").unwrap();
        }
        if c.other_modes_unstable {
            writeln!(s, "  note: another mode is already unstable at chi_k").unwrap();
        }
        if let Some(case) = c.case {
            writeln!(s, "  case ({})", case.label()).unwrap();
        }
        if let Some(l) = li {
            writeln!(
                s,
                "  Delta = {:.6e}, Q_hat = {:.10}, Q_tilde = {:.10}, d2* = {:.10}, d2** = {:.10}",
                l.delta, l.q_hat, l.q_tilde, l.d2_star, l.d2_double_star
            )
            .unwrap();
        }
    }
    s
}

fn run_bifurcate(config: &RunConfig, b: &BifurcateConfig, dir: &Path, meta: &mut RunMeta) -> RunResult<String> {
    let params = config.model_params();
    let rows = b
        .k
        .iter()
        .map(|&k| bifurcation::classify(&params, k))
        .collect::<crate::error::Result<Vec<_>>>()?;
    write_bifurcation(create(&dir.join("bifurcation.csv"))?, &rows)?;
    meta.termination = "done".into();
    Ok(bifurcate_summary(&params, &rows))
}

// --------------------------------------------------------------- simulate

/// Final state of one simulated domain.
#[derive(Debug, Clone)]
pub struct SimulationOutcome {
    pub length: f64,
    pub n_cells: usize,
    pub termination: Termination,
    pub t_final: f64,
    pub spike_count: usize,
    pub spike_positions: Vec<f64>,
    pub max_u: f64,
    pub residual_inf: f64,
}

fn length_dir_name(length: f64) -> String {
    format!("L_{length}")
}

/// The configuration of one length out of a multi-length run.
fn single_length(config: &RunConfig, sim: &SimulateConfig, length: f64) -> RunConfig {
    let mut c = config.clone();
    match &mut c.params {
        ParamSource::Model(m) => m.length = length,
        ParamSource::Raw(r) => r.length = length,
    }
    c.command = Command::Simulate(SimulateConfig {
        lengths: Vec::new(),
        ..sim.clone()
    });
    c.output.dir = None;
    c
}

/// Integrates one domain and writes its diagnostics, snapshots and final
/// profile into `dir`. Partial output is written before an error returns.
pub fn simulate_into(
    params: &ModelParams,
    sim: &SimulateConfig,
    cadence: usize,
    dir: &Path,
) -> RunResult<SimulationOutcome> {
    let n = sim.n_cells.unwrap_or_else(|| pde::default_cells(params.length));
    let grid = Grid::new(n, params.length)?;
    let initial = sim.initial.build(grid, params)?;
    let controls = SimulationControls {
        dt_max: sim.dt_max,
        cadence,
        snapshot_times: sim.snapshot_times.clone(),
        stop_when_steady: sim.stop_when_steady,
        ..SimulationControls::default()
    };
    let mut runner = Simulation::new(initial, params, controls)?;
    let result = runner.run(sim.t_end);
    pde::write_diagnostics(create(&dir.join("diagnostics.csv"))?, &runner.diagnostics)?;
    for s in &runner.snapshots {
        pde::write_profile(create(&dir.join(pde::snapshot_file_name(s.t)))?, &grid, &s.u, &s.v)?;
    }
    let termination = result?;
    let state = runner.state();
    pde::write_profile(create(&dir.join("final.csv"))?, &grid, &state.u, &state.v)?;
    let mut spikes = pde::spike_indices(&state.u);
    spikes.sort_unstable();
    Ok(SimulationOutcome {
        length: params.length,
        n_cells: n,
        termination,
        t_final: state.time,
        spike_count: spikes.len(),
        spike_positions: spikes.iter().map(|&i| grid.x(i)).collect(),
        max_u: state.u.iter().copied().fold(f64::MIN, f64::max),
        residual_inf: pde::residual_inf(state, params),
    })
}

fn outcome_lines(s: &mut String, o: &SimulationOutcome) {
    writeln!(
        s,
        "L = {}: {} at t = {:.6}, n_cells = {}, spikes = {} at x = {:?}, max u = {:.6}, residual = {:.3e}",
        o.length,
        o.termination.as_str(),
        o.t_final,
        o.n_cells,
        o.spike_count,
        o.spike_positions.iter().map(|x| (x * 1e4).round() / 1e4).collect::<Vec<_>>(),
        o.max_u,
        o.residual_inf
    )
    .unwrap();
}

fn outcome_meta(o: &SimulationOutcome) -> Table {
    let mut t = Table::new();
    t.insert("length".into(), Value::Float(o.length));
    t.insert("n_cells".into(), Value::Integer(o.n_cells as i64));
    t.insert("dx".into(), Value::Float(o.length / o.n_cells as f64));
    t.insert("t_final".into(), Value::Float(o.t_final));
    t.insert("spike_count".into(), Value::Integer(o.spike_count as i64));
    t
}

fn run_one_length(config: &RunConfig, sim: &SimulateConfig, dir: &Path) -> RunResult<(SimulationOutcome, String)> {
    let outcome = simulate_into(&config.model_params(), sim, config.output.cadence, dir)?;
    let mut s = String::new();
    outcome_lines(&mut s, &outcome);
    Ok((outcome, s))
}

fn run_simulate(config: &RunConfig, sim: &SimulateConfig, dir: &Path, meta: &mut RunMeta) -> RunResult<String> {
    let params = config.model_params();
    let mut s = String::new();
    writeln!(s, "{}", params_line(&params)).unwrap();
    if sim.lengths.is_empty() {
        let (o, line) = run_one_length(config, sim, dir)?;
        meta.termination = o.termination.as_str().into();
        meta.extra = outcome_meta(&o);
        s.push_str(&line);
        return Ok(s);
    }
    let results: Vec<(f64, RunResult<(SimulationOutcome, String)>)> = sim
        .lengths
        .par_iter()
        .map(|&len| {
            let sub = single_length(config, sim, len);
            let d = dir.join(length_dir_name(len));
            let r = fs::create_dir_all(&d).map_err(RunError::from).and_then(|_| {
                let start = Instant::now();
                let r = run_one_length(&sub, sim_of(&sub), &d);
                let mut m = RunMeta {
                    wall_time_s: start.elapsed().as_secs_f64(),
                    ..RunMeta::default()
                };
                match &r {
                    Ok((o, _)) => {
                        m.termination = o.termination.as_str().into();
                        m.extra = outcome_meta(o);
                    }
                    Err(e) => {
                        m.termination = "error".into();
                        m.error = Some(e.to_string());
                    }
                }
                write_manifest(&d, &sub, &m)?;
                r
            });
            (len, r)
        })
        .collect();

    let mut first_err = None;
    let mut counts = Vec::new();
    let mut terms = Vec::new();
    let mut table = String::from("length,n_cells,termination,t_final,spike_count,max_u\n");
    for (len, r) in results {
        match r {
            Ok((o, line)) => {
                s.push_str(&line);
                counts.push(Value::Integer(o.spike_count as i64));
                terms.push(Value::String(o.termination.as_str().into()));
                writeln!(
                    table,
                    "{},{},{},{},{},{}",
                    fmt_f64(o.length),
                    o.n_cells,
                    o.termination.as_str(),
                    fmt_f64(o.t_final),
                    o.spike_count,
                    fmt_f64(o.max_u)
                )
                .unwrap();
            }
            Err(e) => {
                writeln!(s, "L = {len}: error: {e}").unwrap();
                terms.push(Value::String("error".into()));
                writeln!(table, "{},,error,,,", fmt_f64(len)).unwrap();
                first_err.get_or_insert(e);
            }
        }
    }
    write_text(&dir.join("lengths.csv"), &table)?;
    meta.extra.insert("lengths".into(), config::to_table(config)["simulate"]["lengths"].clone());
    meta.extra.insert("terminations".into(), Value::Array(terms));
    if let Some(e) = first_err {
        return Err(e);
    }
    meta.termination = "done".into();
    meta.extra.insert("spike_counts".into(), Value::Array(counts));
    Ok(s)
}

fn sim_of(c: &RunConfig) -> &SimulateConfig {
    match &c.command {
        Command::Simulate(s) => s,
        _ => unreachable!("single_length builds a simulate command"),
    }
}

// ----------------------------------------------------------------- steady

/// Measured branch against the analytic predictions.
#[derive(Debug, Clone)]
pub struct SteadyReport {
    pub branch: Branch,
    pub fit: Option<BranchFit>,
    pub analytic_k3: Option<f64>,
    pub predicted: BranchClassification,
    /// `Some(true)` when the fitted curvature has the analytic sign.
    pub k3_sign_agreement: Option<bool>,
    /// Off-trivial points whose eigenvalue sign matches the predicted
    /// stability, out of those with a definite sign.
    pub stability_agreement: (usize, usize),
}

pub fn steady_report(params: &ModelParams, cfg: &SteadyConfig) -> crate::error::Result<SteadyReport> {
    let grid = Grid::new(cfg.n_cells, params.length)?;
    let controls = ContinuationControls {
        s0: cfg.s0,
        ..ContinuationControls::default()
    };
    let (predicted, _) = bifurcation::classify(params, cfg.k)?;
    let branch = steady::trace_branch(params, cfg.k, cfg.s_max, grid, &controls)?;
    let fit = if branch.continued {
        Some(steady::fit_branch(&branch.points)?)
    } else {
        None
    };
    let analytic_k3 = predicted.k3_coefficient;
    let k3_sign_agreement = match (fit, predicted.k3_sign) {
        (Some(f), K3Sign::Positive) => Some(f.c2 > 0.0),
        (Some(f), K3Sign::Negative) => Some(f.c2 < 0.0),
        _ => None,
    };
    let expected = match predicted.k3_sign {
        K3Sign::Positive => -1,
        K3Sign::Negative => 1,
        K3Sign::Indeterminate => 0,
    };
    let mut agree = (0, 0);
    for p in branch.points.iter().filter(|p| p.amplitude != 0.0 && p.stability.sign != 0) {
        agree.1 += 1;
        if p.stability.sign == expected {
            agree.0 += 1;
        }
    }
    Ok(SteadyReport {
        branch,
        fit,
        analytic_k3,
        predicted,
        k3_sign_agreement,
        stability_agreement: agree,
    })
}

pub fn steady_summary(params: &ModelParams, r: &SteadyReport) -> String {
    let b = &r.branch;
    let mut s = String::new();
    writeln!(s, "{}", params_line(params)).unwrap();
    writeln!(s, "mode k = {}, n_cells = {}", b.k, b.grid.n_cells()).unwrap();
    writeln!(s, "analytic chi_k = {:.10}, grid chi_k = {:.10}", b.chi_k, b.chi_k_discrete).unwrap();
    let Some(fit) = r.fit else {
        writeln!(s, "s_max = 0: trivial solution only, no continuation performed").unwrap();
        return s;
    };
    writeln!(s, "points = {}, |s| up to {:.6}", b.points.len(), fit.s_max).unwrap();
    if b.stalled {
        writeln!(s, "warning: continuation stalled before reaching s_max").unwrap();
    }
    writeln!(
        s,
        "measured bifurcation point = {:.10} (relative difference from chi_k {:.3e})",
        fit.c0,
        (fit.c0 - b.chi_k).abs() / b.chi_k
    )
    .unwrap();
    writeln!(s, "pitchfork exponent = {:.4}", fit.exponent).unwrap();
    writeln!(
        s,
        "K2 slope = {:.6e} (|K2 s| / |K3 s^2| = {:.3e})",
        fit.c1,
        fit.linear_to_quadratic()
    )
    .unwrap();
    match r.analytic_k3 {
        Some(k3) => writeln!(s, "K3 measured = {:.6e}, analytic = {:.6e}", fit.c2, k3).unwrap(),
        None => writeln!(s, "K3 measured = {:.6e}, analytic undefined", fit.c2).unwrap(),
    }
    let agreement = match r.k3_sign_agreement {
        Some(true) => "yes",
        Some(false) => "no",
        None => "n/a",
    };
    writeln!(s, "K3 sign agreement: {agreement}").unwrap();
    writeln!(
        s,
        "branch stability: predicted {}, {} of {} definite eigenvalue signs agree",
        r.predicted.stability.as_str(),
        r.stability_agreement.0,
        r.stability_agreement.1
    )
    .unwrap();
    s
}

fn run_steady(config: &RunConfig, cfg: &SteadyConfig, dir: &Path, meta: &mut RunMeta) -> RunResult<String> {
    let params = config.model_params();
    meta.extra.insert("n_cells".into(), Value::Integer(cfg.n_cells as i64));
    let report = steady_report(&params, cfg)?;
    let b = &report.branch;
    steady::write_branch(create(&dir.join("branch.csv"))?, &b.points)?;
    if cfg.write_profiles {
        let pdir = dir.join("profiles");
        fs::create_dir_all(&pdir)?;
        for (i, p) in b.points.iter().enumerate() {
            pde::write_profile(create(&pdir.join(format!("point_{i:03}.csv")))?, &b.grid, &p.u, &p.v)?;
        }
    }
    meta.termination = if !b.continued {
        "trivial"
    } else if b.stalled {
        "stalled"
    } else {
        "done"
    }
    .into();
    meta.extra.insert("points".into(), Value::Integer(b.points.len() as i64));
    Ok(steady_summary(&params, &report))
}

// ------------------------------------------------------------------ sweep

/// `key=start:stop:n`, evenly spaced and inclusive of both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Vary {
    pub key: String,
    pub values: Vec<f64>,
}

pub fn parse_vary(spec: &str) -> Result<Vary, ConfigErrors> {
    let bad = |m: &str| {
        ConfigErrors(vec![ConfigError {
            path: "--vary".into(),
            message: format!("{m} (expected key=start:stop:n, got `{spec}`)"),
        }])
    };
    let (key, range) = spec.split_once('=').ok_or_else(|| bad("missing `=`"))?;
    let parts: Vec<&str> = range.split(':').collect();
    if parts.len() != 3 || key.trim().is_empty() {
        return Err(bad("malformed range"));
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad("start is not a number"))?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad("stop is not a number"))?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad("n is not a positive integer"))?;
    if n == 0 || !start.is_finite() || !stop.is_finite() {
        return Err(bad("need finite ends and n >= 1"));
    }
    let values = if n == 1 {
        vec![start]
    } else {
        (0..n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect()
    };
    Ok(Vary {
        key: key.trim().to_string(),
        values,
    })
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub value: f64,
    pub dir: PathBuf,
    pub exit_code: i32,
    pub message: String,
}

/// Runs every value of the sweep in parallel, one directory per run. All
/// configurations are validated before any run starts.
pub fn sweep(base_text: &str, vary: &Vary, out: &Path) -> RunResult<Vec<SweepEntry>> {
    let base: Table = base_text.parse().map_err(|e: toml::de::Error| {
        RunError::Config(ConfigErrors(vec![ConfigError {
            path: String::new(),
            message: format!("not a valid TOML document: {}", e.message()),
        }]))
    })?;
    let mut configs = Vec::new();
    let mut errors = Vec::new();
    for (i, &value) in vary.values.iter().enumerate() {
        let mut t = base.clone();
        if let Err(e) = config::set_number(&mut t, &vary.key, value) {
            return Err(RunError::Config(ConfigErrors(vec![e])));
        }
        match config::parse_table(&t, None) {
            Ok(mut c) => {
                c.output.dir = None;
                configs.push((value, out.join(format!("run_{i:03}")), c));
            }
            Err(ConfigErrors(es)) => errors.extend(es.into_iter().map(|e| ConfigError {
                path: e.path,
                message: format!("{} (with {} = {value})", e.message, vary.key),
            })),
        }
    }
    if !errors.is_empty() {
        return Err(RunError::Config(ConfigErrors(errors)));
    }
    fs::create_dir_all(out)?;
    let entries: Vec<SweepEntry> = configs
        .into_par_iter()
        .map(|(value, dir, c)| match execute(&c, &dir) {
            Ok(r) => SweepEntry {
                value,
                dir,
                exit_code: 0,
                message: r.summary.lines().last().unwrap_or("").to_string(),
            },
            Err(e) => SweepEntry {
                value,
                dir,
                exit_code: e.exit_code(),
                message: e.to_string().replace('\n', "; "),
            },
        })
        .collect();
    let mut index = format!("{},dir,exit_code\n", vary.key);
    for e in &entries {
        let name = e.dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        writeln!(index, "{},{},{}", fmt_f64(e.value), name, e.exit_code).unwrap();
    }
    write_text(&out.join("sweep.csv"), &index)?;
    Ok(entries)
}
