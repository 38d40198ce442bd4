//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Built with `harness = false` so the lines show in `cargo test`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use chemomorph::bifurcation::{k3_general, nondegeneracy};
use chemomorph::config::parse_config;
use chemomorph::linstab::{chi_0, chi_k, mode_analysis, DEFAULT_K_MAX};
use chemomorph::model::{ModelParams, SensitivitySpec};
use chemomorph::pde::{
    mode_amplitude, simulate, spike_count, step, Grid, InitialData, SimulationControls, SimulationState, Termination,
};
use chemomorph::presets::{preset, PRESET_NAMES};
use chemomorph::run::execute;
use chemomorph::steady::{fit_branch, stability_estimate, trace_branch, ContinuationControls};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn log_params(d1: f64, d2: f64, chi: f64, lambda: f64, length: f64) -> ModelParams {
    ModelParams::new(d1, d2, chi, lambda, length, SensitivitySpec::Logarithmic).unwrap()
}

fn lin_params(d1: f64, d2: f64, chi: f64, lambda: f64, length: f64) -> ModelParams {
    ModelParams::new(d1, d2, chi, lambda, length, SensitivitySpec::Linear).unwrap()
}

/// Criterion 1: closed-form χ0 against bisection on the sign of min_k det J_k.
fn threshold_reproduction() -> Outcome {
    let start = Instant::now();
    let base = log_params(1.0, 1.0, 0.0, 1.0, 1.0);
    let t = chi_0(&base, DEFAULT_K_MAX).unwrap();
    let unstable = |chi: f64| {
        let p = base.with_chi(chi);
        (1..=50).any(|k| mode_analysis(&p, k).unwrap().det < 0.0)
    };
    let (mut lo, mut hi) = (0.0, 100.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if unstable(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    let bisect = 0.5 * (lo + hi);
    let rel = (t.chi0 - bisect).abs() / bisect;
    let elapsed = start.elapsed();
    outcome(
        rel <= 1e-10 && t.k_star == 1 && (t.chi0 - 13.0723).abs() < 1e-4 && elapsed.as_secs_f64() < 1.0,
        format!(
            "chi0 = {:.12}, bisection = {:.12}, rel = {rel:.1e}, k* = {}, {}",
            t.chi0,
            bisect,
            t.k_star,
            secs(elapsed)
        ),
    )
}

/// Criterion 2: decay below χ0, growth above it.
fn advection_driven_instability() -> Outcome {
    let base = log_params(1.0, 1.0, 0.0, 1.0, 1.0);
    let chi0 = chi_0(&base, DEFAULT_K_MAX).unwrap().chi0;
    let grid = Grid::new(256, 1.0).unwrap();
    let initial = InitialData::default_perturbation();

    let below = base.with_chi(0.9 * chi0);
    let start = Instant::now();
    let run = simulate(initial.build(grid, &below).unwrap(), &below, 500.0, SimulationControls::default()).unwrap();
    let t_below = start.elapsed();
    let settled_at = run.state.time;
    let dev = run
        .state
        .u
        .iter()
        .map(|u| (u - below.lambda).abs())
        .chain(run.state.v.iter().map(|v| (v - 1.0).abs()))
        .fold(0.0, f64::max);

    let above = base.with_chi(1.1 * chi0);
    let start = Instant::now();
    let run = simulate(initial.build(grid, &above).unwrap(), &above, 500.0, SimulationControls::default()).unwrap();
    let t_above = start.elapsed();
    let a0 = run.diagnostics.first().unwrap().amplitude;
    let a1 = run.diagnostics.last().unwrap().amplitude;
    let ok = dev < 1e-6 && a1 > 10.0 * a0 && t_below.as_secs_f64() < 60.0 && t_above.as_secs_f64() < 60.0;
    outcome(
        ok,
        format!(
            "0.9 chi0: sup deviation {dev:.1e} at t = {:.1} ({}); 1.1 chi0: amplitude {a0:.3} -> {a1:.3} ({})",
            settled_at,
            secs(t_below),
            secs(t_above)
        ),
    )
}

/// Criterion 3: exponential rates of seeded eigenmodes against the dispersion relation.
fn linear_growth_rates() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dt = 1e-3;
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for set in 0..5 {
        let d1 = rng.gen_range(0.2..1.0);
        let d2 = rng.gen_range(0.2..1.0);
        let lambda = rng.gen_range(0.5..2.0);
        let length = rng.gen_range(2.0..4.0);
        let factor = rng.gen_range(1.2..1.6);
        let sens = if set % 2 == 0 { SensitivitySpec::Logarithmic } else { SensitivitySpec::Linear };
        let base = ModelParams::new(d1, d2, 0.0, lambda, length, sens).unwrap();
        for k in 1..=3usize {
            let p = base.with_chi(chi_k(&base, k).unwrap() * factor);
            let m = mode_analysis(&p, k).unwrap();
            let sigma = m.growth_rates[0].re;
            // eigenvector of J_k for sigma: (j11 - sigma) a + j12 b = 0
            let (a, b) = (-m.j12 / (m.j11 - sigma), 1.0);
            let scale = 1e-4 / a.abs().max(b);
            let grid = Grid::new(512, length).unwrap();
            let wave = k as f64 * PI / length;
            let u = grid.centers().map(|x| lambda + scale * a * (wave * x).cos()).collect();
            let v = grid.centers().map(|x| 1.0 + scale * b * (wave * x).cos()).collect();
            let mut s = SimulationState::new(grid, u, v).unwrap();
            let amp = |s: &SimulationState| {
                mode_amplitude(&s.u, &grid, k)
                    .abs()
                    .max(mode_amplitude(&s.v, &grid, k).abs())
            };
            let (mut ts, mut ls) = (Vec::new(), Vec::new());
            while amp(&s) < 1e-3 {
                ts.push(s.time);
                ls.push(amp(&s).ln());
                s = step(&s, &p, dt).unwrap();
            }
            let n = ts.len() as f64;
            let mt = ts.iter().sum::<f64>() / n;
            let ml = ls.iter().sum::<f64>() / n;
            let slope = ts.iter().zip(&ls).map(|(t, l)| (t - mt) * (l - ml)).sum::<f64>()
                / ts.iter().map(|t| (t - mt).powi(2)).sum::<f64>();
            worst = worst.max((slope - sigma).abs() / sigma);
            cases += 1;
        }
    }
    outcome(
        worst < 0.05,
        format!("{cases} seeded modes, worst relative rate error {worst:.2e} (dt = {dt}, n_cells = 512)"),
    )
}

/// Criterion 4: boundary spike on (0, 1), several spikes on (0, 10).
fn figure_regimes() -> Outcome {
    let start = Instant::now();
    let p = preset("fig2").unwrap();
    let grid = Grid::default_for(p.params.length).unwrap();
    let run = simulate(p.initial.build(grid, &p.params).unwrap(), &p.params, p.t_end, SimulationControls::default())
        .unwrap();
    let u = &run.state.u;
    let argmax = (0..u.len()).max_by(|&a, &b| u[a].total_cmp(&u[b])).unwrap();
    let amplitude = run.diagnostics.last().unwrap().amplitude;
    let fig2_ok = run.termination == Termination::Steady && argmax == 0 && amplitude > p.params.lambda;

    let p3 = preset("fig3").unwrap();
    let grid3 = Grid::default_for(p3.params.length).unwrap();
    let run3 = simulate(
        p3.initial.build(grid3, &p3.params).unwrap(),
        &p3.params,
        p3.t_end,
        SimulationControls::default(),
    )
    .unwrap();
    let spikes = spike_count(&run3.state.u);
    let elapsed = start.elapsed();
    outcome(
        fig2_ok && spikes >= 2 && elapsed.as_secs_f64() < 300.0,
        format!(
            "L = 1: {} at t = {:.2}, max u in cell {argmax}, amplitude {amplitude:.3}; L = 10: {spikes} spikes; {}",
            run.termination.as_str(),
            run.state.time,
            secs(elapsed)
        ),
    )
}

/// Linear-sensitivity closed form of the normalized K3.
fn k3_linear_closed_form(p: &ModelParams, k: usize) -> f64 {
    let mu = (k as f64 * PI / p.length).powi(2);
    let q = p.d2 * mu + 1.0 + p.lambda;
    let ub = p.lambda;
    (q - 1.5 * (1.0 + p.lambda)) * (p.d1 * mu + 1.0) * q * q / (2.0 * ub)
        / (12.0 * p.d1 * p.d2 * mu * mu - 3.0 * (1.0 + p.lambda))
}

/// Logarithmic-sensitivity sign rule sgn((Q - Q̂)/(Q - Q̃)).
fn log_sign_rule(p: &ModelParams, k: usize) -> f64 {
    let mu = (k as f64 * PI / p.length).powi(2);
    let l = p.lambda;
    let q = p.d2 * mu + 1.0 + l;
    let a = (p.d1 * mu + 1.0) / 2.0;
    let b = l / 4.0 * (7.0 * p.d1 * mu + 1.0) - 3.0 * (l + 1.0) / 4.0 * (p.d1 * mu + 1.0);
    let delta = b * b + l * (l + 1.0) * (p.d1 * mu + 1.0) * (12.0 * p.d1 * mu + 3.0) / 4.0;
    let q_hat = (-b + delta.sqrt()) / (2.0 * a);
    let q_tilde = (1.0 / (4.0 * p.d1 * mu) + 1.0) * (l + 1.0);
    ((q - q_hat) / (q - q_tilde)).signum()
}

fn random_draw(rng: &mut ChaCha8Rng) -> (f64, f64, f64, f64, usize) {
    let lu = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| (rng.gen_range(lo.ln()..hi.ln())).exp();
    (
        lu(rng, 1e-2, 1e2),
        lu(rng, 1e-2, 1e2),
        lu(rng, 1e-1, 1e1),
        lu(rng, 0.5, 20.0),
        rng.gen_range(1..=5),
    )
}

/// Criterion 5: general K3 against the linear closed form and the log sign rule.
fn k3_specialization() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst, mut mismatches, mut rejected, mut draws) = (0.0f64, 0, 0, 0);
    while draws < 10_000 {
        let (d1, d2, lambda, length, k) = random_draw(&mut rng);
        let lin = lin_params(d1, d2, 0.0, lambda, length);
        let log = log_params(d1, d2, 0.0, lambda, length);
        let nd = nondegeneracy(&lin, k, None).unwrap();
        let (Ok(g_lin), Ok(g_log), true) = (k3_general(&lin, k), k3_general(&log, k), nd.nondegenerate) else {
            rejected += 1;
            continue;
        };
        draws += 1;
        let closed = k3_linear_closed_form(&lin, k);
        worst = worst.max((g_lin - closed).abs() / closed.abs());
        if g_log.signum() != log_sign_rule(&log, k) {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-12 && mismatches == 0 && elapsed.as_secs_f64() < 10.0,
        format!(
            "{draws} draws ({rejected} degenerate rejected): linear worst rel {worst:.1e}, log sign mismatches {mismatches}, {}",
            secs(elapsed)
        ),
    )
}

/// Samples strictly inside `(lo, hi)`, log-uniformly. Open ends are cut at
/// three decades below `hi` or two above `lo`.
fn sample_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let (a, b) = match (lo == 0.0, hi.is_infinite()) {
        (true, true) => (1e-3, 1e3),
        (true, false) => (1e-3 * hi, hi),
        (false, true) => (lo, 100.0 * lo),
        (false, false) => (lo, hi),
    };
    let t: f64 = rng.gen_range(0.02..0.98);
    (a.ln() + t * (b.ln() - a.ln())).exp()
}

/// Criterion 6: every sampled (d1, d2) in a declared sub-interval
/// has the declared sign.
fn region_map() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut checked, mut wrong) = (0, 0);
    for &(lambda, length, k) in &[(1.0, 1.0, 1usize), (0.5, 2.0, 2)] {
        let r = (length / (k as f64 * PI)).powi(2);
        // linear sensitivity: a = (λ+1)/2 r, b = (λ+1)/(4 d1) r²; K3 < 0 strictly between
        let d1_crit = 0.5 * r;
        for case in ["i", "ii", "iii"] {
            for _ in 0..20 {
                let d1 = match case {
                    "i" => d1_crit,
                    "ii" => sample_in(&mut rng, 0.05 * d1_crit, d1_crit),
                    _ => sample_in(&mut rng, d1_crit, 20.0 * d1_crit),
                };
                let a = (lambda + 1.0) / 2.0 * r;
                let b = (lambda + 1.0) / (4.0 * d1) * r * r;
                let (lo, hi) = (a.min(b), a.max(b));
                let pieces: Vec<(f64, f64, f64)> = if case == "i" {
                    vec![(0.0, f64::INFINITY, 1.0)]
                } else {
                    vec![(0.0, lo, 1.0), (lo, hi, -1.0), (hi, f64::INFINITY, 1.0)]
                };
                for (plo, phi, sign) in pieces {
                    let d2 = sample_in(&mut rng, plo, phi);
                    let p = lin_params(d1, d2, 0.0, lambda, length);
                    if let Ok(v) = k3_general(&p, k) {
                        checked += 1;
                        if v.signum() != sign {
                            wrong += 1;
                        }
                    }
                }
            }
        }
        // logarithmic sensitivity
        let d1_crit = (1.0 + lambda) / 2.0 * r;
        for case in ["i", "ii", "iii"] {
            for _ in 0..20 {
                let d1 = match case {
                    "i" => d1_crit,
                    "ii" => sample_in(&mut rng, 0.05 * d1_crit, d1_crit),
                    _ => sample_in(&mut rng, d1_crit, 20.0 * d1_crit),
                };
                let probe = log_params(d1, 1.0, 0.0, lambda, length);
                let li = chemomorph::bifurcation::log_intermediates(&probe, k);
                let (ds, dss) = (li.d2_star, li.d2_double_star);
                let pieces: Vec<(f64, f64, f64)> = match case {
                    "i" => vec![(0.0, f64::INFINITY, 1.0)],
                    "ii" => vec![(0.0, ds, 1.0), (ds, dss, -1.0), (dss, f64::INFINITY, 1.0)],
                    _ => vec![(0.0, dss, 1.0), (dss, ds, -1.0), (ds, f64::INFINITY, 1.0)],
                };
                for (plo, phi, sign) in pieces {
                    if plo >= phi || plo.is_nan() || phi.is_nan() {
                        wrong += 1;
                        continue;
                    }
                    let d2 = sample_in(&mut rng, plo, phi);
                    let p = log_params(d1, d2, 0.0, lambda, length);
                    if let Ok(v) = k3_general(&p, k) {
                        checked += 1;
                        if v.signum() != sign {
                            wrong += 1;
                        }
                    }
                }
            }
        }
    }
    outcome(
        wrong == 0 && checked > 0,
        format!("{checked} samples over linear and log sign rules, three cases each, two (lambda, L, k) settings; {wrong} disagree"),
    )
}

/// Criterion 7: numerical branch against the pitchfork normal form.
fn pitchfork_verification() -> Outcome {
    let start = Instant::now();
    let params = log_params(1.0, 1.0, 0.0, 1.0, 1.0);
    let grid = Grid::new(512, 1.0).unwrap();
    let branch = trace_branch(&params, 1, 0.02, grid, &ContinuationControls::default()).unwrap();
    let fit = fit_branch(&branch.points).unwrap();
    let rel = (fit.c0 - branch.chi_k).abs() / branch.chi_k;
    let ratio = fit.linear_to_quadratic();
    let elapsed = start.elapsed();
    outcome(
        rel < 0.01 && (0.45..=0.55).contains(&fit.exponent) && ratio < 1e-2 && elapsed.as_secs_f64() < 120.0,
        format!(
            "bifurcation point {:.8} vs chi_1 {:.8} (rel {rel:.1e}), exponent {:.4}, |K2 s|/|K3 s^2| = {ratio:.1e}, {}",
            fit.c0,
            branch.chi_k,
            fit.exponent,
            secs(elapsed)
        ),
    )
}

/// Criterion 8: leading eigenvalue on the small-amplitude branch, both signs of K3.
fn exchange_of_stability() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    // d2 = 1 lies above both thresholds (K3 > 0); d2 = 0.03 lies between
    // b ≈ 0.0051 and a ≈ 0.101 (K3 < 0)
    for (d2, expected) in [(1.0, -1i8), (0.03, 1)] {
        let params = lin_params(1.0, d2, 0.0, 1.0, 1.0);
        let grid = Grid::new(256, 1.0).unwrap();
        let controls = ContinuationControls {
            estimate_stability: false,
            ..ContinuationControls::default()
        };
        let branch = trace_branch(&params, 1, 0.01, grid, &controls).unwrap();
        let mut signs = Vec::new();
        let mut shown = f64::NAN;
        for p in branch.points.iter().filter(|p| (p.amplitude.abs() - 0.01).abs() < 1e-9) {
            let est = stability_estimate(p, &params).unwrap();
            signs.push(est.sign);
            shown = est.eigenvalue.unwrap_or(f64::NAN);
        }
        ok &= !signs.is_empty() && signs.iter().all(|&s| s == expected);
        parts.push(format!("d2 = {d2}: eigenvalue {shown:.3e} at |s| = 0.01"));
    }
    outcome(ok, parts.join("; "))
}

/// Criterion 9: total ligand mass against the exact relaxation law.
fn mass_law() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    let cases: Vec<(ModelParams, InitialData)> = vec![
        (preset("fig4d_a").unwrap().params, preset("fig4d_a").unwrap().initial),
        (
            preset("fig2").unwrap().params,
            InitialData {
                base_u: Some(0.4),
                ..preset("fig2").unwrap().initial
            },
        ),
        (
            lin_params(0.5, 0.2, 30.0, 2.0, 3.0),
            InitialData {
                base_u: Some(3.0),
                base_v: Some(0.5),
                u: (1.0, 2.0),
                v: (0.3, 1.0),
                scale: chemomorph::pde::WaveScale::Domain,
            },
        ),
    ];
    for (params, init) in cases {
        let grid = Grid::default_for(params.length).unwrap();
        let controls = SimulationControls {
            dt_max: 1e-3,
            cadence: 1,
            stop_when_steady: false,
            ..SimulationControls::default()
        };
        let run = simulate(init.build(grid, &params).unwrap(), &params, 10.0, controls).unwrap();
        let target = params.lambda * params.length;
        let m0 = run.diagnostics[0].mass_u;
        for d in &run.diagnostics {
            let exact = target + (m0 - target) * (-d.t).exp();
            worst = worst.max((d.mass_u - exact).abs() / target);
        }
        runs += 1;
    }
    outcome(
        worst <= 1e-3,
        format!("{runs} runs to t = 10 at dt_max = 1e-3: worst |mass_u - law| / (lambda L) = {worst:.2e}"),
    )
}

fn data_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "csv") {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// Criterion 10: byte-identical CSVs from repeated preset runs.
fn determinism() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let mut differing = Vec::new();
    let mut files = 0;
    let mut fig56 = String::new();
    for name in PRESET_NAMES {
        let config = parse_config(&format!("preset = \"{name}\"\n[simulate]\nsnapshot_times = [1.0]\n")).unwrap();
        let a = tmp.path().join(format!("{name}_a"));
        let b = tmp.path().join(format!("{name}_b"));
        execute(&config, &a).unwrap();
        execute(&config, &b).unwrap();
        let (fa, fb) = (data_files(&a), data_files(&b));
        files += fa.len();
        if fa != fb || fa.is_empty() {
            differing.push(name);
        }
        if name == "fig56" {
            fig56 = std::fs::read_to_string(a.join("lengths.csv"))
                .unwrap()
                .lines()
                .skip(1)
                .map(|l| l.split(',').nth(4).unwrap().to_string())
                .collect::<Vec<_>>()
                .join(",");
        }
    }
    outcome(
        differing.is_empty(),
        format!(
            "{} presets twice, {files} CSV files per pass, differing: {:?}; fig56 spike counts by length [{fig56}]; {}",
            PRESET_NAMES.len(),
            differing,
            secs(start.elapsed())
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("threshold reproduction", threshold_reproduction),
        ("advection-driven instability", advection_driven_instability),
        ("linear-regime growth rates", linear_growth_rates),
        ("spike regimes", figure_regimes),
        ("K3 specialization consistency", k3_specialization),
        ("sign region map", region_map),
        ("pitchfork verification", pitchfork_verification),
        ("exchange of stability", exchange_of_stability),
        ("mass-law fidelity", mass_law),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!("[{}] {:>2}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
