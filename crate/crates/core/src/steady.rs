//! Stationary problem: Newton on the discretized boundary-value problem,
//! pseudo-arclength continuation of the branches in `χ`, and eigenvalue
//! estimates for their stability.
//!
//! Unknowns are interleaved `(u_0, v_0, u_1, v_1, ...)` so the Jacobian is
//! banded with three sub- and super-diagonals. Face values are central
//! averages (the time stepper upwinds instead), which keeps the residual
//! smooth for Newton.

use std::f64::consts::PI;

use crate::bifurcation;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm_inf, solve_bordered, BandLu, BandMatrix};
use crate::linstab;
use crate::model::ModelParams;
use crate::pde::{fmt_f64, Grid, V_FLOOR};

const BAND: usize = 3;

#[derive(Debug, Clone)]
pub struct SteadyProblem {
    pub grid: Grid,
    pub params: ModelParams,
}

impl SteadyProblem {
    pub fn new(grid: Grid, params: ModelParams) -> Self {
        SteadyProblem { grid, params }
    }

    pub fn n_unknowns(&self) -> usize {
        2 * self.grid.n_cells()
    }

    pub fn pack(u: &[f64], v: &[f64]) -> Vec<f64> {
        u.iter().zip(v).flat_map(|(&a, &b)| [a, b]).collect()
    }

    pub fn unpack(w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        w.chunks_exact(2).map(|c| (c[0], c[1])).unzip()
    }

    pub fn trivial(&self) -> Vec<f64> {
        vec![[self.params.lambda, 1.0]; self.grid.n_cells()].concat()
    }

    fn check(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.n_unknowns() {
            return Err(Error::Dimension(format!(
                "expected {} unknowns, got {}",
                self.n_unknowns(),
                w.len()
            )));
        }
        for (i, c) in w.chunks_exact(2).enumerate() {
            if !c[0].is_finite() {
                return Err(Error::NonFinite { field: "u", cell: i });
            }
            if !c[1].is_finite() {
                return Err(Error::NonFinite { field: "v", cell: i });
            }
            if c[1] <= V_FLOOR {
                return Err(Error::Positivity { field: "v", cell: i, value: c[1] });
            }
        }
        Ok(())
    }

    /// Chemotactic part `-u_f Φ'(v_f) Δv/dx` of the flux at face `i + ½`,
    /// without the factor `χ`.
    fn advective_face(&self, w: &[f64], i: usize) -> f64 {
        let dx = self.grid.dx();
        let (u0, v0, u1, v1) = (w[2 * i], w[2 * i + 1], w[2 * i + 2], w[2 * i + 3]);
        -0.5 * (u0 + u1) * self.params.sensitivity.derivative(0.5 * (v0 + v1)) * (v1 - v0) / dx
    }

    pub fn residual(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.check(w)?;
        let p = &self.params;
        let n = self.grid.n_cells();
        let dx = self.grid.dx();
        let mut flux = vec![0.0; n + 1];
        for i in 0..n - 1 {
            flux[i + 1] = p.d1 * (w[2 * i + 2] - w[2 * i]) / dx + p.chi * self.advective_face(w, i);
        }
        let mut r = vec![0.0; 2 * n];
        for i in 0..n {
            let (u, v) = (w[2 * i], w[2 * i + 1]);
            r[2 * i] = (flux[i + 1] - flux[i]) / dx + p.lambda - u;
            let left = if i > 0 { w[2 * i - 1] - v } else { 0.0 };
            let right = if i + 1 < n { w[2 * i + 3] - v } else { 0.0 };
            r[2 * i + 1] = p.d2 * (left + right) / (dx * dx) + 1.0 - (1.0 + p.lambda) * v + u;
        }
        Ok(r)
    }

    /// `∂R/∂χ`
    pub fn chi_derivative(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.check(w)?;
        let n = self.grid.n_cells();
        let dx = self.grid.dx();
        let mut g = vec![0.0; n + 1];
        for (i, gi) in g.iter_mut().enumerate().take(n).skip(1) {
            *gi = self.advective_face(w, i - 1);
        }
        let mut out = vec![0.0; 2 * n];
        for i in 0..n {
            out[2 * i] = (g[i + 1] - g[i]) / dx;
        }
        Ok(out)
    }

    /// Analytic Jacobian `∂R/∂w`.
    pub fn jacobian(&self, w: &[f64]) -> Result<BandMatrix> {
        self.check(w)?;
        let p = &self.params;
        let n = self.grid.n_cells();
        let dx = self.grid.dx();
        let mut jac = BandMatrix::zeros(2 * n, BAND, BAND);
        for i in 0..n - 1 {
            let (u0, v0, u1, v1) = (w[2 * i], w[2 * i + 1], w[2 * i + 2], w[2 * i + 3]);
            let uf = 0.5 * (u0 + u1);
            let vf = 0.5 * (v0 + v1);
            let dv = (v1 - v0) / dx;
            let p1 = p.sensitivity.derivative(vf);
            let p2 = p.sensitivity.second_derivative(vf);
            // derivatives of the face flux with respect to u_i, v_i, u_{i+1}, v_{i+1}
            let dfdw = [
                -p.d1 / dx - 0.5 * p.chi * p1 * dv,
                -p.chi * uf * (0.5 * p2 * dv - p1 / dx),
                p.d1 / dx - 0.5 * p.chi * p1 * dv,
                -p.chi * uf * (0.5 * p2 * dv + p1 / dx),
            ];
            for (m, d) in dfdw.iter().enumerate() {
                jac.add(2 * i, 2 * i + m, d / dx);
                jac.add(2 * i + 2, 2 * i + m, -d / dx);
            }
        }
        let r = p.d2 / (dx * dx);
        for i in 0..n {
            jac.add(2 * i, 2 * i, -1.0);
            jac.add(2 * i + 1, 2 * i, 1.0);
            jac.add(2 * i + 1, 2 * i + 1, -(1.0 + p.lambda));
            if i > 0 {
                jac.add(2 * i + 1, 2 * i - 1, r);
                jac.add(2 * i + 1, 2 * i + 1, -r);
            }
            if i + 1 < n {
                jac.add(2 * i + 1, 2 * i + 3, r);
                jac.add(2 * i + 1, 2 * i + 1, -r);
            }
        }
        Ok(jac)
    }

    /// `∂s/∂w` for the mode-`k` amplitude.
    pub fn amplitude_weights(&self, k: usize) -> Vec<f64> {
        let l = self.grid.length();
        let dx = self.grid.dx();
        let wave = k as f64 * PI / l;
        self.grid
            .centers()
            .flat_map(|x| [0.0, 2.0 / l * (wave * x).cos() * dx])
            .collect()
    }

    /// Signed amplitude `s = (2/L) ∫ (v - 1) cos(kπx/L) dx` (midpoint rule).
    pub fn amplitude(&self, w: &[f64], k: usize) -> f64 {
        let weights = self.amplitude_weights(k);
        w.iter()
            .zip(&weights)
            .skip(1)
            .step_by(2)
            .map(|(x, c)| (x - 1.0) * c)
            .sum()
    }
}

/// Mode-`k` bifurcation value of the discretized problem: `χ_k` with `μ_k`
/// replaced by the eigenvalue `(2/dx · sin(kπdx/2L))²` of the discrete
/// Neumann Laplacian.
pub fn discrete_chi_k(grid: &Grid, params: &ModelParams, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::ZeroMode);
    }
    let dx = grid.dx();
    let mu = (2.0 / dx * (k as f64 * PI * dx / (2.0 * grid.length())).sin()).powi(2);
    let c = params.coupling()?;
    if c <= 0.0 {
        return Err(Error::NonAttractiveSensitivity(c));
    }
    Ok((params.d1 * mu + 1.0) * (params.d2 * mu + 1.0 + params.lambda) / (c * mu))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iter: 50,
            max_halvings: 30,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonSolution {
    pub w: Vec<f64>,
    pub iterations: usize,
    pub residual_inf: f64,
}

fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Smallest residual that double precision can certify at `w`: the
/// residual of the correctly rounded root is about `ε ‖J‖ ‖w‖`.
pub fn rounding_floor(jac: &BandMatrix, w: &[f64]) -> f64 {
    let n = jac.dim();
    let (kl, ku) = jac.bandwidths();
    let row_sum = (0..n)
        .map(|i| {
            (i.saturating_sub(kl)..=(i + ku).min(n - 1))
                .map(|j| jac.get(i, j).abs())
                .sum::<f64>()
        })
        .fold(0.0f64, f64::max);
    4.0 * f64::EPSILON * row_sum * norm_inf(w).max(1.0)
}

/// Damped Newton with backtracking on the residual 2-norm.
pub fn newton_solve(problem: &SteadyProblem, guess: &[f64], tol: f64) -> Result<NewtonSolution> {
    newton_solve_with(problem, guess, tol, NewtonOptions::default())
}

pub fn newton_solve_with(
    problem: &SteadyProblem,
    guess: &[f64],
    tol: f64,
    opts: NewtonOptions,
) -> Result<NewtonSolution> {
    let mut w = guess.to_vec();
    let mut r = problem.residual(&w)?;
    for it in 0..opts.max_iter {
        let res = norm_inf(&r);
        let jac = problem.jacobian(&w)?;
        if res < tol.max(rounding_floor(&jac, &w)) {
            return Ok(NewtonSolution {
                w,
                iterations: it,
                residual_inf: res,
            });
        }
        let lu = jac.factorize()?;
        let mut delta: Vec<f64> = r.iter().map(|x| -x).collect();
        lu.solve_in_place(&mut delta);
        let r_norm = norm2(&r);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = w.iter().zip(&delta).map(|(a, d)| a + t * d).collect();
            if let Ok(rt) = problem.residual(&trial) {
                if norm2(&rt) <= (1.0 - 1e-4 * t) * r_norm {
                    w = trial;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                iterations: it + 1,
                residual: res,
            });
        }
    }
    let res = norm_inf(&r);
    if res < tol.max(rounding_floor(&problem.jacobian(&w)?, &w)) {
        Ok(NewtonSolution {
            w,
            iterations: opts.max_iter,
            residual_inf: res,
        })
    } else {
        Err(Error::NoConvergence {
            iterations: opts.max_iter,
            residual: res,
        })
    }
}

/// Newton on `R(w, χ) = 0` together with one extra scalar equation
/// `row · w + row_chi · χ = target`. Returns the converged `(w, χ)` and the
/// final residual.
fn bordered_newton(
    problem: &mut SteadyProblem,
    mut w: Vec<f64>,
    row: &[f64],
    row_chi: f64,
    target: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, f64)> {
    let mut last = f64::INFINITY;
    for it in 0..=max_iter {
        let r = problem.residual(&w)?;
        let g = dot(row, &w) + row_chi * problem.params.chi - target;
        let res = norm_inf(&r);
        let jac = problem.jacobian(&w)?;
        let floor = rounding_floor(&jac, &w);
        if res < tol.max(floor) && g.abs() < tol.max(1e3 * f64::EPSILON * target.abs()) {
            return Ok((w, res));
        }
        if it == max_iter || !res.is_finite() || (it > 3 && res > 1e3 * last) {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: res,
            });
        }
        last = res;
        let lu = jac.clone().factorize()?;
        let col = problem.chi_derivative(&w)?;
        let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
        let (dw, dchi) = solve_bordered(&jac, &lu, &col, row, row_chi, &rhs, -g);
        w.iter_mut().zip(&dw).for_each(|(a, d)| *a += d);
        problem.params.chi += dchi;
    }
    unreachable!()
}

/// Leading-eigenvalue estimate of the linearization at a steady profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityEstimate {
    pub eigenvalue: Option<f64>,
    /// `-1` stable, `1` unstable, `0` indeterminate (no convergence, or the
    /// eigenvalue is within `margin` of zero).
    pub sign: i8,
    pub margin: f64,
    pub shift: f64,
    pub iterations: usize,
}

impl StabilityEstimate {
    pub fn indeterminate(shift: f64, iterations: usize) -> Self {
        StabilityEstimate {
            eigenvalue: None,
            sign: 0,
            margin: f64::NAN,
            shift,
            iterations,
        }
    }
}

struct Eigenpair {
    value: f64,
    vector: Vec<f64>,
    residual: f64,
    iterations: usize,
}

/// Power iteration on `(σ - J)^{-1}`: converges to the eigenvalue of `J`
/// closest to `σ`. `None` if the iteration does not settle (e.g. a complex
/// pair is closest).
fn shift_invert(jac: &BandMatrix, sigma: f64, start: &[f64], max_iter: usize) -> Option<Eigenpair> {
    let noise = eigen_noise(jac);
    let mut a = jac.clone();
    a.scale(-1.0);
    a.add_diagonal(sigma);
    let lu: BandLu = a.factorize().ok()?;
    let mut x = start.to_vec();
    let nx = norm2(&x);
    x.iter_mut().for_each(|e| *e /= nx);
    let mut prev = f64::NAN;
    let mut settled = 0;
    for it in 1..=max_iter {
        let y = lu.solve(&x);
        let theta = dot(&x, &y);
        let ny = norm2(&y);
        if theta == 0.0 || !ny.is_finite() {
            return None;
        }
        let value = sigma - 1.0 / theta;
        // keep the sign of x stable between iterations
        let sgn = if theta < 0.0 { -1.0 } else { 1.0 };
        x = y.iter().map(|e| sgn * e / ny).collect();
        if (value - prev).abs() <= 1e-12 * (1.0 + value.abs()) + noise {
            settled += 1;
        } else {
            settled = 0;
        }
        prev = value;
        if settled >= 3 {
            let jx = jac.mul_vec(&x);
            let rq = dot(&x, &jx);
            let res: Vec<f64> = jx.iter().zip(&x).map(|(a, b)| a - rq * b).collect();
            return Some(Eigenpair {
                value: rq,
                vector: x,
                residual: norm2(&res),
                iterations: it,
            });
        }
    }
    None
}

fn start_vector(n: usize) -> Vec<f64> {
    (0..n).map(|i| 1.0 + 0.5 * (1.7 * i as f64 + 0.3).sin()).collect()
}

/// Scale of the Jacobian used to judge when an eigenvalue is numerically zero.
fn jacobian_scale(jac: &BandMatrix) -> f64 {
    (0..jac.dim()).fold(0.0f64, |m, i| m.max(jac.get(i, i).abs())).max(1.0)
}

/// Rounding noise expected in an eigenvalue estimate.
fn eigen_noise(jac: &BandMatrix) -> f64 {
    100.0 * f64::EPSILON * jacobian_scale(jac)
}

/// Leading eigenvalue of the linearization at `(u, v)` for the given `χ`.
///
/// The shift is placed above the largest linear growth rate of the
/// homogeneous state at this `χ` and raised until the converged eigenvalue
/// no longer changes, so the eigenvalue closest to the shift is the
/// rightmost one.
pub fn stability_at(params: &ModelParams, u: &[f64], v: &[f64]) -> Result<StabilityEstimate> {
    let grid = Grid::new(u.len(), params.length)?;
    let problem = SteadyProblem::new(grid, params.clone());
    let w = SteadyProblem::pack(u, v);
    let jac = problem.jacobian(&w)?;
    let k_max = grid.n_cells();
    let base = if params.coupling().map(|c| c > 0.0).unwrap_or(false) {
        linstab::max_growth_rate(params, k_max.min(linstab::DEFAULT_K_MAX))?.max(0.0)
    } else {
        0.0
    };
    let noise = eigen_noise(&jac);
    let start = start_vector(w.len());
    let mut sigma = base + 1.0;
    let mut total = 0;
    let mut previous: Option<f64> = None;
    for _ in 0..6 {
        let Some(pair) = shift_invert(&jac, sigma, &start, 5000) else {
            return Ok(StabilityEstimate::indeterminate(sigma, total));
        };
        total += pair.iterations;
        if let Some(p) = previous {
            if (pair.value - p).abs() <= 1e-8 * (1.0 + p.abs()) + 10.0 * noise {
                let margin = (10.0 * pair.residual).max(10.0 * noise);
                let sign = if pair.value > margin {
                    1
                } else if pair.value < -margin {
                    -1
                } else {
                    0
                };
                return Ok(StabilityEstimate {
                    eigenvalue: Some(pair.value),
                    sign,
                    margin,
                    shift: sigma,
                    iterations: total,
                });
            }
        }
        // an eigenvalue above the shift would be reached with a larger one
        sigma = pair.value.max(sigma) + 2.0 * (sigma - pair.value).abs().max(1.0);
        previous = Some(pair.value);
    }
    Ok(StabilityEstimate::indeterminate(sigma, total))
}

/// Stability of a branch point.
pub fn stability_estimate(point: &BranchPoint, params: &ModelParams) -> Result<StabilityEstimate> {
    stability_at(&params.with_chi(point.chi), &point.u, &point.v)
}

/// Eigenvalue of the linearization closest to zero, and its eigenvector
/// (interleaved `u, v`), by inverse iteration with shift 0.
pub fn near_null_vector(problem: &SteadyProblem, w: &[f64]) -> Result<(f64, Vec<f64>)> {
    let jac = problem.jacobian(w)?;
    let scale = jacobian_scale(&jac);
    let start = start_vector(w.len());
    for shift in [0.0, 1e-12 * scale, 1e-9 * scale] {
        if let Some(pair) = shift_invert(&jac, shift, &start, 5000) {
            return Ok((pair.value, pair.vector));
        }
    }
    Err(Error::NoConvergence {
        iterations: 5000,
        residual: f64::NAN,
    })
}

#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub chi: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub amplitude: f64,
    pub stability: StabilityEstimate,
    pub arclength: f64,
    pub residual_inf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationControls {
    /// Seed amplitude; defaults to `10⁻³ λ / Q_k`.
    pub s0: Option<f64>,
    /// Largest arclength step; defaults to `s_max / 8` in amplitude units.
    pub max_step: Option<f64>,
    pub min_step: f64,
    pub growth: f64,
    pub max_points: usize,
    pub tol: f64,
    pub corrector_iterations: usize,
    pub estimate_stability: bool,
}

impl Default for ContinuationControls {
    fn default() -> Self {
        ContinuationControls {
            s0: None,
            max_step: None,
            min_step: 1e-6,
            growth: 1.3,
            max_points: 400,
            tol: 1e-10,
            corrector_iterations: 12,
            estimate_stability: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub k: usize,
    pub grid: Grid,
    pub chi_k: f64,
    pub chi_k_discrete: f64,
    /// Ordered by amplitude, from the negative side to the positive side.
    pub points: Vec<BranchPoint>,
    /// A side stopped because the step fell below `min_step`.
    pub stalled: bool,
    /// False when `s_max = 0` (only the trivial point is returned).
    pub continued: bool,
}

/// Weighted inner product `a_w·b_w / N + a_χ b_χ`.
fn wdot(a: &[f64], a_chi: f64, b: &[f64], b_chi: f64) -> f64 {
    dot(a, b) / a.len() as f64 + a_chi * b_chi
}

struct SideResult {
    points: Vec<BranchPoint>,
    stalled: bool,
}

fn make_point(
    problem: &SteadyProblem,
    w: &[f64],
    k: usize,
    arclength: f64,
    residual: f64,
    estimate: bool,
) -> Result<BranchPoint> {
    let (u, v) = SteadyProblem::unpack(w);
    let stability = if estimate {
        stability_at(&problem.params, &u, &v)?
    } else {
        StabilityEstimate::indeterminate(f64::NAN, 0)
    };
    Ok(BranchPoint {
        chi: problem.params.chi,
        amplitude: problem.amplitude(w, k),
        u,
        v,
        stability,
        arclength,
        residual_inf: residual,
    })
}

fn trace_side(
    params: &ModelParams,
    grid: Grid,
    k: usize,
    s_max: f64,
    s0: f64,
    chi_guess: f64,
    controls: &ContinuationControls,
) -> Result<SideResult> {
    let mut problem = SteadyProblem::new(grid, params.with_chi(chi_guess));
    let weights = problem.amplitude_weights(k);
    let dir = s0.signum();

    // two amplitude-constrained solves fix the initial secant
    let trivial_proj = dot(&weights, &problem.trivial());
    let mut anchors = Vec::new();
    for s in [s0, 2.0 * s0] {
        let (u, v) = bifurcation::branch_seed(params, k, s, &grid)?;
        let guess = SteadyProblem::pack(&u, &v);
        let (w, res) = bordered_newton(
            &mut problem,
            guess,
            &weights,
            0.0,
            s + trivial_proj,
            controls.tol,
            50,
        )?;
        anchors.push((w, problem.params.chi, res));
    }
    let mut points = Vec::new();
    let mut arclength = 0.0;
    let (w0, c0, r0) = anchors.remove(0);
    problem.params.chi = c0;
    points.push(make_point(&problem, &w0, k, 0.0, r0, controls.estimate_stability)?);
    let (w1, c1, r1) = anchors.remove(0);
    let dw: Vec<f64> = w1.iter().zip(&w0).map(|(a, b)| a - b).collect();
    let mut h = wdot(&dw, c1 - c0, &dw, c1 - c0).sqrt();
    arclength += h;
    problem.params.chi = c1;
    points.push(make_point(&problem, &w1, k, arclength, r1, controls.estimate_stability)?);

    let q = bifurcation::q_k(params, k)?;
    let max_step = controls
        .max_step
        .unwrap_or(s_max / 8.0 * (0.5 * (1.0 + q * q)).sqrt());
    let (mut w_prev, mut chi_prev) = (w0, c0);
    let (mut w_cur, mut chi_cur) = (w1, c1);
    let mut stalled = false;

    while points.len() < controls.max_points {
        let s_cur = dot(&weights, &w_cur) - trivial_proj;
        if dir * s_cur >= s_max * (1.0 - 1e-9) {
            break;
        }
        let mut tw: Vec<f64> = w_cur.iter().zip(&w_prev).map(|(a, b)| a - b).collect();
        let mut tc = chi_cur - chi_prev;
        let tn = wdot(&tw, tc, &tw, tc).sqrt();
        tw.iter_mut().for_each(|e| *e /= tn);
        tc /= tn;
        h = h.min(max_step);
        // do not overshoot s_max
        let ds_dh = dot(&weights, &tw);
        let mut landing = false;
        if ds_dh * dir > 0.0 {
            let room = (s_max - dir * s_cur) / (ds_dh * dir);
            if room < h {
                h = room.max(controls.min_step);
                landing = true;
            }
        }
        let accepted = loop {
            if h < controls.min_step {
                break None;
            }
            let pred: Vec<f64> = w_cur.iter().zip(&tw).map(|(a, t)| a + h * t).collect();
            let chi_pred = chi_cur + h * tc;
            problem.params.chi = chi_pred;
            // arclength condition <t, y - y_pred>_W = 0, or the amplitude
            // itself on the final step
            let (row, row_chi, target) = if landing {
                (weights.clone(), 0.0, dir * s_max + trivial_proj)
            } else {
                let row: Vec<f64> = tw.iter().map(|t| t / tw.len() as f64).collect();
                let target = dot(&row, &pred) + tc * chi_pred;
                (row, tc, target)
            };
            match bordered_newton(
                &mut problem,
                pred,
                &row,
                row_chi,
                target,
                controls.tol,
                controls.corrector_iterations,
            ) {
                Ok((w, res)) => break Some((w, problem.params.chi, res)),
                Err(_) => h *= 0.5,
            }
        };
        let Some((w_new, chi_new, res)) = accepted else {
            stalled = true;
            break;
        };
        arclength += h;
        problem.params.chi = chi_new;
        points.push(make_point(&problem, &w_new, k, arclength, res, controls.estimate_stability)?);
        w_prev = std::mem::replace(&mut w_cur, w_new);
        chi_prev = std::mem::replace(&mut chi_cur, chi_new);
        if landing {
            break;
        }
        h *= controls.growth;
    }
    Ok(SideResult { points, stalled })
}

/// Traces the mode-`k` branch on both sides of the bifurcation point up to
/// `|s| = s_max`.
pub fn trace_branch(
    params: &ModelParams,
    k: usize,
    s_max: f64,
    grid: Grid,
    controls: &ContinuationControls,
) -> Result<Branch> {
    if params.length != grid.length() {
        return Err(Error::Dimension(format!(
            "grid length {} differs from model length {}",
            grid.length(),
            params.length
        )));
    }
    let nd = bifurcation::nondegeneracy(params, k, None)?;
    if let Some(j) = nd.offending_j {
        return Err(Error::Degenerate { k, j });
    }
    let chi_k = linstab::chi_k(params, k)?;
    let chi_k_discrete = discrete_chi_k(&grid, params, k)?;
    if !(s_max.is_finite() && s_max >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "s_max",
            reason: format!("must be non-negative (got {s_max})"),
        });
    }
    if s_max == 0.0 {
        let problem = SteadyProblem::new(grid, params.with_chi(chi_k));
        let point = make_point(&problem, &problem.trivial(), k, 0.0, 0.0, controls.estimate_stability)?;
        return Ok(Branch {
            k,
            grid,
            chi_k,
            chi_k_discrete,
            points: vec![point],
            stalled: false,
            continued: false,
        });
    }
    let q = bifurcation::q_k(params, k)?;
    let s0 = controls.s0.unwrap_or(1e-3 * params.lambda / q).min(s_max / 4.0);
    let k3 = bifurcation::k3_coefficient(params, k).unwrap_or(0.0);
    let chi_guess = chi_k_discrete + k3 * s0 * s0;

    let minus = trace_side(params, grid, k, s_max, -s0, chi_guess, controls)?;
    let plus = trace_side(params, grid, k, s_max, s0, chi_guess, controls)?;
    let mut points: Vec<BranchPoint> = minus.points.into_iter().rev().collect();
    points.extend(plus.points);
    Ok(Branch {
        k,
        grid,
        chi_k,
        chi_k_discrete,
        points,
        stalled: minus.stalled || plus.stalled,
        continued: true,
    })
}

pub const BRANCH_HEADER: &str = "chi,amplitude,stability_sign,residual_inf";

pub fn write_branch<W: std::io::Write>(mut out: W, points: &[BranchPoint]) -> std::io::Result<()> {
    writeln!(out, "{BRANCH_HEADER}")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(p.chi),
            fmt_f64(p.amplitude),
            p.stability.sign,
            fmt_f64(p.residual_inf)
        )?;
    }
    Ok(())
}

/// Least-squares summary of a traced branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchFit {
    /// Measured bifurcation point.
    pub c0: f64,
    /// Linear coefficient (`K₂` estimate).
    pub c1: f64,
    /// Quadratic coefficient (`K₃` estimate).
    pub c2: f64,
    /// Exponent `p` in `|s| ∝ |χ - c0|^p`.
    pub exponent: f64,
    /// Largest `|s|` on the branch.
    pub s_max: f64,
}

impl BranchFit {
    /// `|c1 s_max| / |c2 s_max²|`
    pub fn linear_to_quadratic(&self) -> f64 {
        (self.c1 * self.s_max).abs() / (self.c2 * self.s_max * self.s_max).abs()
    }
}

/// Least-squares polynomial coefficients (lowest order first).
pub fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> Result<Vec<f64>> {
    let m = degree + 1;
    if xs.len() < m {
        return Err(Error::Dimension(format!(
            "{} points cannot determine a degree-{degree} fit",
            xs.len()
        )));
    }
    let scale = xs.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(f64::MIN_POSITIVE);
    let mut normal = BandMatrix::zeros(m, m - 1, m - 1);
    let mut rhs = vec![0.0; m];
    for (x, y) in xs.iter().zip(ys) {
        let t = x / scale;
        let powers: Vec<f64> = (0..m).map(|p| t.powi(p as i32)).collect();
        for i in 0..m {
            rhs[i] += powers[i] * y;
            for j in 0..m {
                normal.add(i, j, powers[i] * powers[j]);
            }
        }
    }
    let c = normal.factorize()?.solve(&rhs);
    Ok(c.iter().enumerate().map(|(p, ci)| ci / scale.powi(p as i32)).collect())
}

/// Fits `χ(s) = c0 + c1 s + c2 s² + c3 s³ + c4 s⁴` over the branch, then the
/// exponent of `|s|` against `|χ - c0|`.
pub fn fit_branch(points: &[BranchPoint]) -> Result<BranchFit> {
    let s: Vec<f64> = points.iter().map(|p| p.amplitude).collect();
    let chi: Vec<f64> = points.iter().map(|p| p.chi).collect();
    let degree = if points.len() >= 8 { 4 } else { 2 };
    let c = polyfit(&s, &chi, degree)?;
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for (si, ci) in s.iter().zip(&chi) {
        let d = (ci - c[0]).abs();
        if d > 1e-9 * c[0].abs().max(1.0) && *si != 0.0 {
            lx.push(d.ln());
            ly.push(si.abs().ln());
        }
    }
    let exponent = if lx.len() >= 2 { polyfit(&lx, &ly, 1)?[1] } else { f64::NAN };
    Ok(BranchFit {
        c0: c[0],
        c1: c[1],
        c2: c[2],
        exponent,
        s_max: s.iter().fold(0.0f64, |a, x| a.max(x.abs())),
    })
}
