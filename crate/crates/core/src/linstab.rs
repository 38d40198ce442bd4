//! Linear stability of the homogeneous equilibrium `(λ, 1)`.
//!
//! Perturbations proportional to `cos(kπx/L)` evolve under the 2×2 matrix
//!
//! ```text
//! J_k = [ -d1 μ_k - 1    χ ū Φ'(v̄) μ_k ]
//!       [ 1              -d2 μ_k - 1 - λ ]
//! ```
//!
//! with `μ_k = (kπ/L)²`. The trace is always negative, so mode `k` grows iff
//! `det J_k < 0`, i.e. iff `χ` exceeds the bifurcation value `χ_k`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Default upper mode index scanned by [`chi_0`].
pub const DEFAULT_K_MAX: usize = 1000;

/// Relative tolerance under which two `χ_k` are reported as tied.
const TIE_RTOL: f64 = 1e-12;

/// Per-wavenumber linearization record.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeAnalysis {
    pub k: usize,
    pub mu_k: f64,
    pub j11: f64,
    pub j12: f64,
    pub j21: f64,
    pub j22: f64,
    pub trace: f64,
    pub det: f64,
    /// Eigenvalues of `J_k`, sorted by descending real part (ties: imaginary part).
    pub growth_rates: [Complex64; 2],
    /// Critical chemoattraction for this mode; `None` when `ū Φ'(v̄) <= 0`.
    pub chi_k: Option<f64>,
}

impl ModeAnalysis {
    pub fn leading_rate(&self) -> Complex64 {
        self.growth_rates[0]
    }

    pub fn is_growing(&self) -> bool {
        self.growth_rates[0].re > 0.0
    }
}

/// Roots of `r² - trace·r + det`, computed without cancellation.
pub fn quadratic_roots(trace: f64, det: f64) -> [Complex64; 2] {
    let disc = trace * trace - 4.0 * det;
    let mut roots = if disc >= 0.0 {
        let sq = disc.sqrt();
        // q has the sign of trace so |q| is never a difference of close numbers
        let q = 0.5 * (trace + trace.signum() * sq);
        if q == 0.0 {
            [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)]
        } else {
            [Complex64::new(q, 0.0), Complex64::new(det / q, 0.0)]
        }
    } else {
        let im = 0.5 * (-disc).sqrt();
        [Complex64::new(0.5 * trace, im), Complex64::new(0.5 * trace, -im)]
    };
    roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    roots
}

/// `(d1 μ + 1)(d2 μ + 1 + λ) / μ`: the product `χ ū Φ'(v̄)` at which mode `μ`
/// is neutral.
fn neutral_coupling(params: &ModelParams, mu: f64) -> f64 {
    (params.d1 * mu + 1.0) * (params.d2 * mu + 1.0 + params.lambda) / mu
}

pub fn mode_analysis(params: &ModelParams, k: usize) -> Result<ModeAnalysis> {
    if k == 0 {
        return Err(Error::ZeroMode);
    }
    let coupling = params.coupling()?;
    let mu_k = params.mu(k);
    let j11 = -params.d1 * mu_k - 1.0;
    let j12 = params.chi * coupling * mu_k;
    let j21 = 1.0;
    let j22 = -params.d2 * mu_k - 1.0 - params.lambda;
    let trace = j11 + j22;
    let det = j11 * j22 - j12 * j21;
    let chi_k = (coupling > 0.0).then(|| neutral_coupling(params, mu_k) / coupling);
    Ok(ModeAnalysis {
        k,
        mu_k,
        j11,
        j12,
        j21,
        j22,
        trace,
        det,
        growth_rates: quadratic_roots(trace, det),
        chi_k,
    })
}

/// Bifurcation value `χ_k = (d1 μ_k + 1)(d2 μ_k + 1 + λ) / (ū Φ'(v̄) μ_k)`.
pub fn chi_k(params: &ModelParams, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::ZeroMode);
    }
    let coupling = params.coupling()?;
    if !(coupling > 0.0) {
        return Err(Error::NonAttractiveSensitivity(coupling));
    }
    Ok(neutral_coupling(params, params.mu(k)) / coupling)
}

/// Result of the threshold search over modes.
#[derive(Debug, Clone, PartialEq)]
pub struct Threshold {
    pub chi0: f64,
    pub k_star: usize,
    /// Another mode `k' > k_star` attains the same minimum.
    pub tied_with: Option<usize>,
    /// The continuous relaxation's minimizer lies below `μ_{k_max}` and
    /// `χ_{k_max} > χ0`, so the scanned minimum is the global one.
    pub globally_minimal: bool,
}

/// `χ0 = min_k χ_k` over `k = 1..=k_max`.
pub fn chi_0(params: &ModelParams, k_max: usize) -> Result<Threshold> {
    if k_max == 0 {
        return Err(Error::ZeroMode);
    }
    let mut best = (f64::INFINITY, 0usize);
    let mut tied_with = None;
    let mut last = 0.0;
    for k in 1..=k_max {
        let c = chi_k(params, k)?;
        last = c;
        if c < best.0 * (1.0 - TIE_RTOL) {
            best = (c, k);
            tied_with = None;
        } else if (c - best.0).abs() <= TIE_RTOL * best.0 && tied_with.is_none() {
            tied_with = Some(k);
        }
    }
    // χ_k as a function of μ is a d1 d2 μ + (1+λ)/μ + const, minimized at
    // μ* = sqrt((1+λ)/(d1 d2)).
    let mu_star = ((1.0 + params.lambda) / (params.d1 * params.d2)).sqrt();
    let globally_minimal = mu_star < params.mu(k_max) && last > best.0;
    Ok(Threshold {
        chi0: best.0,
        k_star: best.1,
        tied_with,
        globally_minimal,
    })
}

/// Index of the mode with the smallest neutral coupling, found from the
/// unimodality of the continuous relaxation (no scan).
pub fn most_unstable_mode(params: &ModelParams) -> usize {
    let mu_star = ((1.0 + params.lambda) / (params.d1 * params.d2)).sqrt();
    let k_cont = params.length * mu_star.sqrt() / std::f64::consts::PI;
    let lo = (k_cont.floor() as usize).max(1);
    let hi = (k_cont.ceil() as usize).max(1);
    if neutral_coupling(params, params.mu(hi)) < neutral_coupling(params, params.mu(lo)) {
        hi
    } else {
        lo
    }
}

/// Instability verdict with a witness mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Instability {
    pub unstable: bool,
    /// A mode with `det J_k < 0` when unstable.
    pub witness: Option<usize>,
}

/// True iff some mode has `det J_k < 0` (equivalently `χ > χ0` for
/// attractive sensitivities).
pub fn is_unstable(params: &ModelParams) -> Result<Instability> {
    let k = most_unstable_mode(params);
    let m = mode_analysis(params, k)?;
    let unstable = m.det < 0.0;
    Ok(Instability {
        unstable,
        witness: unstable.then_some(k),
    })
}

/// Largest real part over modes `1..=k_max` (and the constant mode, whose
/// eigenvalues are `-1` and `-1-λ`).
pub fn max_growth_rate(params: &ModelParams, k_max: usize) -> Result<f64> {
    let mut best = -1.0f64;
    for k in 1..=k_max {
        best = best.max(mode_analysis(params, k)?.growth_rates[0].re);
    }
    Ok(best)
}
