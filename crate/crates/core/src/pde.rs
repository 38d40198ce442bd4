//! Time integration of the full system on a uniform cell-centered grid with
//! zero-flux boundaries.
//!
//! Diffusion and the linear reaction terms are backward Euler (two
//! tridiagonal solves per step); the chemotaxis flux divergence is explicit
//! with first-order upwinding of `u` at the faces.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::solve_tridiagonal;
use crate::model::ModelParams;

/// Lower bound on `v`; reaching it is an error, never a clamp.
pub const V_FLOOR: f64 = 1e-8;
/// Tolerated negative round-off in `u`.
pub const U_NEG_TOL: f64 = -1e-12;
/// Advective CFL number.
pub const CFL: f64 = 0.4;
pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n_cells: usize,
    length: f64,
}

impl Grid {
    pub fn new(n_cells: usize, length: f64) -> Result<Self> {
        if n_cells < MIN_CELLS {
            return Err(Error::InvalidParameter {
                name: "n_cells",
                reason: format!("must be at least {MIN_CELLS} (got {n_cells})"),
            });
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidParameter {
                name: "length",
                reason: format!("must be positive and finite (got {length})"),
            });
        }
        Ok(Grid { n_cells, length })
    }

    /// `max(256, 64 L)` cells.
    pub fn default_for(length: f64) -> Result<Self> {
        Grid::new(default_cells(length), length)
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n_cells as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_cells).map(move |i| self.x(i))
    }
}

pub fn default_cells(length: f64) -> usize {
    256usize.max((64.0 * length).ceil() as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    pub grid: Grid,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub time: f64,
    pub step_count: u64,
}

impl SimulationState {
    /// Validated state at `t = 0`.
    pub fn new(grid: Grid, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let state = SimulationState {
            grid,
            u,
            v,
            time: 0.0,
            step_count: 0,
        };
        state.validate()?;
        Ok(state)
    }

    /// The homogeneous state `(λ, 1)`.
    pub fn equilibrium(grid: Grid, params: &ModelParams) -> Self {
        let n = grid.n_cells();
        SimulationState {
            grid,
            u: vec![params.lambda; n],
            v: vec![1.0; n],
            time: 0.0,
            step_count: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.grid.n_cells();
        if self.u.len() != n || self.v.len() != n {
            return Err(Error::Dimension(format!(
                "fields have {} and {} values on a {n}-cell grid",
                self.u.len(),
                self.v.len()
            )));
        }
        for (i, (&u, &v)) in self.u.iter().zip(&self.v).enumerate() {
            if !u.is_finite() {
                return Err(Error::NonFinite { field: "u", cell: i });
            }
            if !v.is_finite() {
                return Err(Error::NonFinite { field: "v", cell: i });
            }
            if u < U_NEG_TOL {
                return Err(Error::Positivity { field: "u", cell: i, value: u });
            }
            if v <= V_FLOOR {
                return Err(Error::Positivity { field: "v", cell: i, value: v });
            }
        }
        Ok(())
    }

    /// Mirror image under `x -> L - x`.
    pub fn reflected(&self) -> Self {
        let mut s = self.clone();
        s.u.reverse();
        s.v.reverse();
        s
    }
}

/// How the mode number of a cosine perturbation is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveScale {
    /// `cos(m π x / L)`
    Domain,
    /// `cos(m π x)`
    Absolute,
}

/// `base + a cos(m π x / L)` (or `cos(m π x)`) for each field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialData {
    pub base_u: Option<f64>,
    pub base_v: Option<f64>,
    pub u: (f64, f64),
    pub v: (f64, f64),
    pub scale: WaveScale,
}

impl InitialData {
    /// `(λ, 1) + (0.01, 0.01) cos(πx/L)`.
    pub fn default_perturbation() -> Self {
        InitialData {
            base_u: None,
            base_v: None,
            u: (0.01, 1.0),
            v: (0.01, 1.0),
            scale: WaveScale::Domain,
        }
    }

    /// Missing bases default to the equilibrium.
    pub fn build(&self, grid: Grid, params: &ModelParams) -> Result<SimulationState> {
        let bu = self.base_u.unwrap_or(params.lambda);
        let bv = self.base_v.unwrap_or(1.0);
        let per = match self.scale {
            WaveScale::Domain => PI / grid.length(),
            WaveScale::Absolute => PI,
        };
        let (u, v) = grid
            .centers()
            .map(|x| {
                (
                    bu + self.u.0 * (self.u.1 * per * x).cos(),
                    bv + self.v.0 * (self.v.1 * per * x).cos(),
                )
            })
            .unzip();
        SimulationState::new(grid, u, v)
    }
}

/// Advective velocity `χ Φ'(v_face) (v_{i+1} - v_i)/dx` at the interior faces.
fn face_velocities(v: &[f64], dx: f64, params: &ModelParams) -> Vec<f64> {
    v.windows(2)
        .map(|w| {
            let vf = 0.5 * (w[0] + w[1]);
            params.chi * params.sensitivity.derivative(vf) * (w[1] - w[0]) / dx
        })
        .collect()
}

/// Upwinded advective part `-a u_face` of the face flux, `n + 1` values with
/// zero boundary faces.
fn advective_flux(u: &[f64], velocities: &[f64]) -> Vec<f64> {
    let n = u.len();
    let mut f = vec![0.0; n + 1];
    for (i, &a) in velocities.iter().enumerate() {
        let uf = if a > 0.0 { u[i] } else { u[i + 1] };
        f[i + 1] = -a * uf;
    }
    f
}

/// Face fluxes `d1 u_x - χ u Φ'(v) v_x`, `n + 1` values, boundary faces zero.
pub fn chemotactic_flux(state: &SimulationState, params: &ModelParams) -> Vec<f64> {
    let dx = state.grid.dx();
    let vel = face_velocities(&state.v, dx, params);
    let mut f = advective_flux(&state.u, &vel);
    for i in 0..state.u.len() - 1 {
        f[i + 1] += params.d1 * (state.u[i + 1] - state.u[i]) / dx;
    }
    f
}

/// Largest step allowed by the advective CFL bound (infinite when `v` is flat).
pub fn dt_limit(state: &SimulationState, params: &ModelParams) -> f64 {
    let dx = state.grid.dx();
    let amax = face_velocities(&state.v, dx, params)
        .iter()
        .fold(0.0f64, |m, a| m.max(a.abs()));
    if amax == 0.0 {
        f64::INFINITY
    } else {
        CFL * dx / amax
    }
}

/// Instantaneous right-hand side `(u_t, v_t)` of the semi-discrete system.
pub fn rhs(state: &SimulationState, params: &ModelParams) -> (Vec<f64>, Vec<f64>) {
    let dx = state.grid.dx();
    let n = state.u.len();
    let f = chemotactic_flux(state, params);
    let mut du = vec![0.0; n];
    let mut dv = vec![0.0; n];
    for i in 0..n {
        du[i] = (f[i + 1] - f[i]) / dx + params.lambda - state.u[i];
        dv[i] = laplacian(&state.v, i, params.d2, dx) + 1.0 - (1.0 + params.lambda) * state.v[i] + state.u[i];
    }
    (du, dv)
}

/// Sup-norm of the instantaneous right-hand side.
pub fn residual_inf(state: &SimulationState, params: &ModelParams) -> f64 {
    let (du, dv) = rhs(state, params);
    du.iter().chain(&dv).fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `d (w_{i+1} - 2 w_i + w_{i-1}) / dx²` with reflected ghost cells.
fn laplacian(w: &[f64], i: usize, d: f64, dx: f64) -> f64 {
    let left = if i > 0 { w[i - 1] - w[i] } else { 0.0 };
    let right = if i + 1 < w.len() { w[i + 1] - w[i] } else { 0.0 };
    d * (left + right) / (dx * dx)
}

/// Solves `(c - dt d D2) w = b` in place with Neumann `D2`.
fn implicit_solve(c: f64, diffusion: f64, dt: f64, dx: f64, b: &mut [f64]) -> Result<()> {
    let n = b.len();
    let r = dt * diffusion / (dx * dx);
    let mut lower = vec![-r; n];
    let mut upper = vec![-r; n];
    let mut diag = vec![c + 2.0 * r; n];
    lower[0] = 0.0;
    upper[n - 1] = 0.0;
    diag[0] = c + r;
    diag[n - 1] = c + r;
    solve_tridiagonal(&lower, &diag, &upper, b)
}

/// One IMEX step of size `dt`.
///
/// Positivity failures come back as [`Error::Positivity`] and can be retried
/// with a smaller step; [`Error::NonFinite`] is not recoverable.
pub fn step(state: &SimulationState, params: &ModelParams, dt: f64) -> Result<SimulationState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("must be positive and finite (got {dt})"),
        });
    }
    let limit = dt_limit(state, params);
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("{dt} exceeds the advective limit {limit}"),
        });
    }
    let dx = state.grid.dx();
    let n = state.u.len();
    let vel = face_velocities(&state.v, dx, params);
    let fa = advective_flux(&state.u, &vel);

    // Solved in increment form so that exact equilibria stay exact.
    let mut du: Vec<f64> = (0..n)
        .map(|i| dt * (laplacian(&state.u, i, params.d1, dx) + params.lambda - state.u[i] + (fa[i + 1] - fa[i]) / dx))
        .collect();
    implicit_solve(1.0 + dt, params.d1, dt, dx, &mut du)?;
    let u: Vec<f64> = state.u.iter().zip(&du).map(|(a, b)| a + b).collect();

    let mut dv: Vec<f64> = (0..n)
        .map(|i| dt * (laplacian(&state.v, i, params.d2, dx) + 1.0 - (1.0 + params.lambda) * state.v[i] + u[i]))
        .collect();
    implicit_solve(1.0 + dt * (1.0 + params.lambda), params.d2, dt, dx, &mut dv)?;
    let v: Vec<f64> = state.v.iter().zip(&dv).map(|(a, b)| a + b).collect();

    let next = SimulationState {
        grid: state.grid,
        u,
        v,
        time: state.time + dt,
        step_count: state.step_count + 1,
    };
    next.validate()?;
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub t: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub min_v: f64,
    pub max_v: f64,
    pub spike_count: usize,
    pub amplitude: f64,
    pub residual_inf: f64,
}

pub const DIAGNOSTICS_HEADER: &str = "t,mass_u,mass_v,min_u,max_u,min_v,max_v,spike_count,amplitude,residual_inf";

impl Diagnostics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(self.t),
            fmt_f64(self.mass_u),
            fmt_f64(self.mass_v),
            fmt_f64(self.min_u),
            fmt_f64(self.max_u),
            fmt_f64(self.min_v),
            fmt_f64(self.max_v),
            self.spike_count,
            fmt_f64(self.amplitude),
            fmt_f64(self.residual_inf)
        )
    }
}

/// Full-precision float formatting shared by every CSV writer.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

pub fn diagnostics(state: &SimulationState, params: &ModelParams) -> Diagnostics {
    let dx = state.grid.dx();
    let (min_u, max_u) = min_max(&state.u);
    let (min_v, max_v) = min_max(&state.v);
    Diagnostics {
        t: state.time,
        mass_u: state.u.iter().sum::<f64>() * dx,
        mass_v: state.v.iter().sum::<f64>() * dx,
        min_u,
        max_u,
        min_v,
        max_v,
        spike_count: spike_count(&state.u),
        amplitude: max_u - min_u,
        residual_inf: residual_inf(state, params),
    }
}

pub const SPIKE_PROMINENCE: f64 = 0.1;
pub const SPIKE_SEPARATION: usize = 3;

/// Topographic prominence of the local maximum at `i`. A side that runs
/// into the boundary without meeting a higher value contributes its minimum;
/// a peak on the boundary itself only has one side.
fn prominence(u: &[f64], i: usize) -> f64 {
    let peak = u[i];
    let side_base = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut lo = f64::INFINITY;
        let mut any = false;
        for j in range {
            if u[j] > peak {
                break;
            }
            any = true;
            lo = lo.min(u[j]);
        }
        any.then_some(lo)
    };
    let left = side_base(&mut (0..i).rev());
    let right = side_base(&mut (i + 1..u.len()));
    let base = match (left, right) {
        (Some(l), Some(r)) => l.max(r),
        (Some(b), None) | (None, Some(b)) => b,
        (None, None) => peak,
    };
    peak - base
}

/// Indices of the spikes of `u`, tallest first.
pub fn spike_indices(u: &[f64]) -> Vec<usize> {
    let n = u.len();
    let (lo, hi) = min_max(u);
    let amplitude = hi - lo;
    if n == 0 || amplitude <= 0.0 {
        return Vec::new();
    }
    let mut candidates: Vec<usize> = (0..n)
        .filter(|&i| {
            let left_ok = i == 0 || u[i] > u[i - 1];
            let right_ok = i + 1 == n || u[i] >= u[i + 1];
            left_ok && right_ok && prominence(u, i) > SPIKE_PROMINENCE * amplitude
        })
        .collect();
    candidates.sort_by(|&a, &b| u[b].total_cmp(&u[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for c in candidates {
        if kept.iter().all(|&k| k.abs_diff(c) >= SPIKE_SEPARATION) {
            kept.push(c);
        }
    }
    kept
}

pub fn spike_count(u: &[f64]) -> usize {
    spike_indices(u).len()
}

/// Cosine coefficient `(2/L) ∫ (w - mean) cos(kπx/L) dx` by the midpoint rule.
pub fn mode_amplitude(field: &[f64], grid: &Grid, k: usize) -> f64 {
    let dx = grid.dx();
    let wave = k as f64 * PI / grid.length();
    2.0 / grid.length() * field.iter().zip(grid.centers()).map(|(w, x)| w * (wave * x).cos()).sum::<f64>() * dx
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationControls {
    /// Largest step ever taken.
    pub dt_max: f64,
    /// Record diagnostics every `cadence` accepted steps (the first and last
    /// states are always recorded).
    pub cadence: usize,
    /// Times at which snapshots are taken; steps are shortened to land on them.
    pub snapshot_times: Vec<f64>,
    pub steady_tol: f64,
    pub steady_window: usize,
    /// Stop at the first steady detection.
    pub stop_when_steady: bool,
    pub max_halvings: usize,
    pub grow_after: usize,
}

impl Default for SimulationControls {
    fn default() -> Self {
        SimulationControls {
            dt_max: 1e-2,
            cadence: 10,
            snapshot_times: Vec::new(),
            steady_tol: 1e-8,
            steady_window: 100,
            stop_when_steady: true,
            max_halvings: 40,
            grow_after: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Steady,
    EndTime,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Steady => "steady",
            Termination::EndTime => "t_end",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Output of a finished [`simulate`] call.
#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub state: SimulationState,
    pub diagnostics: Vec<Diagnostics>,
    pub snapshots: Vec<Snapshot>,
    pub termination: Termination,
    pub rejected_steps: usize,
}

/// Incremental driver behind [`simulate`]; keeps whatever was recorded if a
/// step fails, so partial output can still be written.
#[derive(Debug, Clone)]
pub struct Simulation {
    params: ModelParams,
    controls: SimulationControls,
    state: SimulationState,
    dt: f64,
    accepted_since_change: usize,
    steady_streak: usize,
    next_snapshot: usize,
    snapshot_times: Vec<f64>,
    pub diagnostics: Vec<Diagnostics>,
    pub snapshots: Vec<Snapshot>,
    pub rejected_steps: usize,
}

impl Simulation {
    pub fn new(initial: SimulationState, params: &ModelParams, controls: SimulationControls) -> Result<Self> {
        initial.validate()?;
        if !(controls.dt_max.is_finite() && controls.dt_max > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt_max",
                reason: format!("must be positive (got {})", controls.dt_max),
            });
        }
        let mut times: Vec<f64> = controls
            .snapshot_times
            .iter()
            .copied()
            .filter(|&t| t >= initial.time)
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let mut sim = Simulation {
            params: params.clone(),
            dt: controls.dt_max,
            controls,
            state: initial,
            accepted_since_change: 0,
            steady_streak: 0,
            next_snapshot: 0,
            snapshot_times: times,
            diagnostics: Vec::new(),
            snapshots: Vec::new(),
            rejected_steps: 0,
        };
        sim.record();
        sim.take_due_snapshots();
        Ok(sim)
    }

    pub fn state(&self) -> &SimulationState {
        &self.state
    }

    fn record(&mut self) {
        let d = diagnostics(&self.state, &self.params);
        if self.diagnostics.last().map(|l| l.t) != Some(d.t) {
            self.diagnostics.push(d);
        }
    }

    fn take_due_snapshots(&mut self) {
        while self.next_snapshot < self.snapshot_times.len()
            && self.snapshot_times[self.next_snapshot] <= self.state.time
        {
            self.snapshots.push(Snapshot {
                t: self.snapshot_times[self.next_snapshot],
                u: self.state.u.clone(),
                v: self.state.v.clone(),
            });
            self.next_snapshot += 1;
        }
    }

    /// One accepted step, retrying with halved `dt` on positivity failures.
    /// Returns the step size used.
    pub fn advance(&mut self, t_end: f64) -> Result<f64> {
        let mut target = t_end;
        if let Some(&ts) = self.snapshot_times.get(self.next_snapshot) {
            target = target.min(ts);
        }
        let remaining = target - self.state.time;
        let cfl = dt_limit(&self.state, &self.params);
        let mut dt_try = self.dt.min(cfl);
        let mut halvings = 0;
        loop {
            let land = dt_try >= remaining;
            let dt = if land { remaining } else { dt_try };
            match step(&self.state, &self.params, dt) {
                Ok(mut next) => {
                    if land {
                        // avoid drift from repeated additions
                        next.time = target;
                    }
                    self.state = next;
                    self.dt = self.dt.min(dt_try);
                    self.accepted_since_change += 1;
                    if self.accepted_since_change >= self.controls.grow_after && self.dt < self.controls.dt_max {
                        self.dt = (2.0 * self.dt).min(self.controls.dt_max);
                        self.accepted_since_change = 0;
                    }
                    self.take_due_snapshots();
                    return Ok(dt);
                }
                Err(Error::Positivity { .. }) if halvings < self.controls.max_halvings => {
                    halvings += 1;
                    self.rejected_steps += 1;
                    dt_try *= 0.5;
                    self.dt = dt_try;
                    self.accepted_since_change = 0;
                }
                Err(Error::Positivity { .. }) => {
                    return Err(Error::StepRetriesExhausted {
                        retries: halvings,
                        dt: dt_try,
                    })
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Integrates to `t_end` or the first steady detection.
    pub fn run(&mut self, t_end: f64) -> Result<Termination> {
        let mut since_record = 0;
        let outcome = loop {
            if self.state.time >= t_end {
                break Ok(Termination::EndTime);
            }
            if let Err(e) = self.advance(t_end) {
                break Err(e);
            }
            since_record += 1;
            let res = residual_inf(&self.state, &self.params);
            let max_u = self.state.u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if res < self.controls.steady_tol * (1.0 + max_u) {
                self.steady_streak += 1;
            } else {
                self.steady_streak = 0;
            }
            if since_record >= self.controls.cadence.max(1) {
                self.record();
                since_record = 0;
            }
            if self.controls.stop_when_steady && self.steady_streak >= self.controls.steady_window {
                break Ok(Termination::Steady);
            }
        };
        self.record();
        outcome
    }

    pub fn finish(self, termination: Termination) -> SimulationRun {
        SimulationRun {
            state: self.state,
            diagnostics: self.diagnostics,
            snapshots: self.snapshots,
            termination,
            rejected_steps: self.rejected_steps,
        }
    }
}

/// Integrates from `initial` to `t_end` (or until steady).
pub fn simulate(
    initial: SimulationState,
    params: &ModelParams,
    t_end: f64,
    controls: SimulationControls,
) -> Result<SimulationRun> {
    let mut sim = Simulation::new(initial, params, controls)?;
    let termination = sim.run(t_end)?;
    Ok(sim.finish(termination))
}

/// Writes an `x,u,v` profile.
pub fn write_profile<W: Write>(mut out: W, grid: &Grid, u: &[f64], v: &[f64]) -> std::io::Result<()> {
    writeln!(out, "x,u,v")?;
    for (i, x) in grid.centers().enumerate() {
        writeln!(out, "{},{},{}", fmt_f64(x), fmt_f64(u[i]), fmt_f64(v[i]))?;
    }
    Ok(())
}

pub fn write_diagnostics<W: Write>(mut out: W, rows: &[Diagnostics]) -> std::io::Result<()> {
    writeln!(out, "{DIAGNOSTICS_HEADER}")?;
    for d in rows {
        writeln!(out, "{}", d.csv_row())?;
    }
    Ok(())
}

/// `snap_t<time>.csv`, with the time printed in shortest round-trip form.
pub fn snapshot_file_name(t: f64) -> String {
    format!("snap_t{t}.csv")
}
