//! Local bifurcation from the homogeneous state and classification of the
//! branches `Γ_k(s)`.
//!
//! Near `(λ, 1, χ_k)` the nonconstant steady states take the form
//!
//! ```text
//! (u, v) = (λ, 1) + s (Q_k, 1) cos(kπx/L) + O(s²),    χ_k(s) = χ_k + K₂ s + K₃ s² + o(s²)
//! ```
//!
//! with `K₂ = 0` (pitchfork). The sign of `K₃` decides both the turning
//! direction and the stability of the small-amplitude branch.
//!
//! All `K₃` values reported as `k3` carry the positive prefactor
//! `ū Φ'(v̄) / (2 χ_k)`; `k3_coefficient` is `K₃` itself.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linstab;
use crate::model::ModelParams;
use crate::pde::Grid;

/// Relative tolerance for exact-equality tests (thresholds, resonances).
pub const EQ_RTOL: f64 = 1e-12;
/// Relative distance to a resonance that raises the near-degeneracy flag.
pub const NEAR_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum K3Sign {
    Positive,
    Negative,
    Indeterminate,
}

impl K3Sign {
    pub fn from_value(value: f64, scale: f64) -> Self {
        if value.abs() < 1e-10 * (1.0 + scale.abs()) {
            K3Sign::Indeterminate
        } else if value > 0.0 {
            K3Sign::Positive
        } else {
            K3Sign::Negative
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            K3Sign::Positive => "positive",
            K3Sign::Negative => "negative",
            K3Sign::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Supercritical: the branch opens towards larger `χ`.
    Right,
    /// Subcritical.
    Left,
    Undetermined,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Right => "supercritical",
            Direction::Left => "subcritical",
            Direction::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchStability {
    Stable,
    Unstable,
    Indeterminate,
}

impl BranchStability {
    pub fn as_str(self) -> &'static str {
        match self {
            BranchStability::Stable => "stable",
            BranchStability::Unstable => "unstable",
            BranchStability::Indeterminate => "indeterminate",
        }
    }
}

/// Which case of the sign theorems a parameter set falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheoremCase {
    /// `d1` exactly at the critical value: `K₃ > 0` for every `d2`.
    Critical,
    /// `d1` below the critical value.
    Below,
    /// `d1` above the critical value.
    Above,
}

impl TheoremCase {
    pub fn label(self) -> &'static str {
        match self {
            TheoremCase::Critical => "i",
            TheoremCase::Below => "ii",
            TheoremCase::Above => "iii",
        }
    }
}

/// Per-mode bifurcation record.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchClassification {
    pub k: usize,
    pub q_k: f64,
    pub chi_k: f64,
    /// Second-order coefficient; identically zero.
    pub k2: f64,
    /// `(ū Φ'(v̄) / (2 χ_k)) K₃`; `None` at a `j = 2k` resonance.
    pub k3: Option<f64>,
    /// `K₃` itself, the curvature of `χ_k(s)` at `s = 0`.
    pub k3_coefficient: Option<f64>,
    pub k3_sign: K3Sign,
    pub direction: Direction,
    pub stability: BranchStability,
    pub nondegenerate: bool,
    /// Some resonance `j` lies within `NEAR_RTOL` of the condition.
    pub near_degenerate: bool,
    pub case: Option<TheoremCase>,
    /// Another mode is already unstable at `χ_k` (`χ_k > χ0`); the verdict
    /// above then concerns only the mode-`k` direction.
    pub other_modes_unstable: bool,
}

impl BranchClassification {
    fn finish(mut self) -> Self {
        (self.direction, self.stability) = match self.k3_sign {
            K3Sign::Positive => (Direction::Right, BranchStability::Stable),
            K3Sign::Negative => (Direction::Left, BranchStability::Unstable),
            K3Sign::Indeterminate => (Direction::Undetermined, BranchStability::Indeterminate),
        };
        self
    }
}

/// Intermediate quantities of the logarithmic-sensitivity sign rule.
#[derive(Debug, Clone, PartialEq)]
pub struct LogCaseIntermediates {
    pub a_coef: f64,
    pub b_coef: f64,
    pub c_coef: f64,
    pub delta: f64,
    /// Positive root of `A Q² + B Q + C`.
    pub q_hat: f64,
    /// Pole of the sign expression (the `j = 2k` resonance).
    pub q_tilde: f64,
    /// `(Q̂ - 1 - λ)(L/kπ)²`, used for classification.
    pub d2_star: f64,
    /// The closed-form expression for the same threshold.
    pub d2_star_published: f64,
    pub d2_double_star: f64,
}

impl LogCaseIntermediates {
    /// Relative disagreement between the two `d2*` routes.
    pub fn d2_star_discrepancy(&self) -> f64 {
        (self.d2_star - self.d2_star_published).abs() / self.d2_star.abs().max(f64::MIN_POSITIVE)
    }
}

fn rel_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= EQ_RTOL * a.abs().max(b.abs())
}

/// `Q_k = d2 (kπ/L)² + 1 + λ`, the `u/v` ratio of the kernel vector.
pub fn q_k(params: &ModelParams, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::ZeroMode);
    }
    Ok(params.d2 * params.mu(k) + 1.0 + params.lambda)
}

/// First-order branch profile `(λ, 1) + s (Q_k, 1) cos(kπx/L)` on `grid`.
pub fn branch_seed(params: &ModelParams, k: usize, s: f64, grid: &Grid) -> Result<(Vec<f64>, Vec<f64>)> {
    let q = q_k(params, k)?;
    let eq = params.equilibrium();
    let wave = k as f64 * PI / params.length;
    let (u, v) = grid
        .centers()
        .map(|x| {
            let c = (wave * x).cos();
            (eq.u_bar + s * q * c, eq.v_bar + s * c)
        })
        .unzip();
    Ok((u, v))
}

/// `12 d1 d2 μ_k² - 3(1+λ)`, vanishing exactly at the `j = 2k` resonance.
fn resonance_denominator(params: &ModelParams, mu: f64) -> (f64, f64) {
    let a = 12.0 * params.d1 * params.d2 * mu * mu;
    let b = 3.0 * (1.0 + params.lambda);
    (a - b, a.max(b))
}

/// Third-order coefficient for a general sensitivity, normalized as
/// `(ū Φ'(v̄) / (2 χ_k)) K₃`.
pub fn k3_general(params: &ModelParams, k: usize) -> Result<f64> {
    Ok(k3_terms(params, k)?.0)
}

/// Returns `(value, scale)` where `scale` is the sum of magnitudes of the
/// two contributions (used by the sign tolerance).
fn k3_terms(params: &ModelParams, k: usize) -> Result<(f64, f64)> {
    let q = q_k(params, k)?;
    let mu = params.mu(k);
    let eq = params.equilibrium();
    let s = params.sensitivity.at(eq.v_bar)?;
    let ub = eq.u_bar;
    let (den, den_scale) = resonance_denominator(params, mu);
    if den.abs() <= EQ_RTOL * den_scale {
        return Err(Error::Degenerate { k, j: 2 * k });
    }
    let coupling = ub * s.d1;
    if !(coupling > 0.0) {
        return Err(Error::NonAttractiveSensitivity(coupling));
    }
    let resonant = (q / (2.0 * coupling))
        * (params.d1 * mu + 1.0)
        * (s.d1 * q + ub * s.d2)
        * (-0.5 * ub * s.d2 + s.d1 * q - 1.5 * s.d1 * (1.0 + params.lambda))
        / den;
    let local = 0.125 * (0.5 * ub * s.d3 + s.d2 * q);
    Ok((resonant - local, resonant.abs() + local.abs()))
}

/// `K₃` without the normalizing prefactor: `χ_k(s) ≈ χ_k + K₃ s²`.
pub fn k3_coefficient(params: &ModelParams, k: usize) -> Result<f64> {
    let scaled = k3_general(params, k)?;
    let chi_k = linstab::chi_k(params, k)?;
    Ok(scaled * 2.0 * chi_k / params.coupling()?)
}

/// Outcome of the non-degeneracy scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Nondegeneracy {
    pub nondegenerate: bool,
    pub offending_j: Option<usize>,
    /// A `j` within `NEAR_RTOL` of resonance (includes exact hits).
    pub near_j: Option<usize>,
    /// Largest `j` examined.
    pub j_checked: usize,
}

/// Smallest `j` bound beyond which `d1 d2 j² k² (π/L)⁴ > 1 + λ` holds
/// strictly.
pub fn sufficient_j_bound(params: &ModelParams, k: usize) -> usize {
    let ratio = ((1.0 + params.lambda) / (params.d1 * params.d2)).sqrt();
    let bound = ratio * (params.length / PI).powi(2) / k as f64;
    // one past the bound absorbs the near-miss band
    (bound * (1.0 + NEAR_RTOL)).ceil() as usize + 1
}

/// Checks `d1 d2 j² k² (π/L)⁴ ≠ 1 + λ` for all `j ≠ k` up to `j_max`
/// (default: the provably sufficient bound).
pub fn nondegeneracy(params: &ModelParams, k: usize, j_max: Option<usize>) -> Result<Nondegeneracy> {
    if k == 0 {
        return Err(Error::ZeroMode);
    }
    let j_max = j_max.unwrap_or_else(|| sufficient_j_bound(params, k));
    let target = 1.0 + params.lambda;
    let base = params.d1 * params.d2 * (k as f64).powi(2) * (PI / params.length).powi(4);
    let mut out = Nondegeneracy {
        nondegenerate: true,
        offending_j: None,
        near_j: None,
        j_checked: j_max,
    };
    for j in (1..=j_max).filter(|&j| j != k) {
        let lhs = base * (j as f64).powi(2);
        let rel = (lhs - target).abs() / target;
        if rel <= EQ_RTOL && out.offending_j.is_none() {
            out.nondegenerate = false;
            out.offending_j = Some(j);
        }
        if rel <= NEAR_RTOL && out.near_j.is_none() {
            out.near_j = Some(j);
        }
        if lhs > target * (1.0 + NEAR_RTOL) {
            break;
        }
    }
    Ok(out)
}

fn base_record(params: &ModelParams, k: usize) -> Result<BranchClassification> {
    let nd = nondegeneracy(params, k, None)?;
    let chi_k = linstab::chi_k(params, k)?;
    let threshold = linstab::chi_k(params, linstab::most_unstable_mode(params))?;
    Ok(BranchClassification {
        k,
        q_k: q_k(params, k)?,
        chi_k,
        k2: 0.0,
        k3: None,
        k3_coefficient: None,
        k3_sign: K3Sign::Indeterminate,
        direction: Direction::Undetermined,
        stability: BranchStability::Indeterminate,
        nondegenerate: nd.nondegenerate,
        near_degenerate: nd.near_j.is_some(),
        case: None,
        other_modes_unstable: chi_k > threshold * (1.0 + EQ_RTOL),
    })
}

fn attach_k3(record: &mut BranchClassification, params: &ModelParams, k: usize) -> Result<()> {
    match k3_general(params, k) {
        Ok(v) => {
            record.k3 = Some(v);
            record.k3_coefficient = Some(k3_coefficient(params, k)?);
            Ok(())
        }
        Err(Error::Degenerate { .. }) => {
            record.nondegenerate = false;
            Ok(())
        }
        Err(e) => Err(e),
    }
}

/// Linear sensitivity: `sgn K₃ = sgn((d2 - a)(d2 - b))` with
/// `a = (λ+1)/2 (L/kπ)²` and `b = (λ+1)/(4 d1) (L/kπ)⁴`.
pub fn classify_linear(params: &ModelParams, k: usize) -> Result<BranchClassification> {
    if !params.sensitivity.is_linear() {
        return Err(Error::WrongSensitivity { expected: "linear" });
    }
    let mut record = base_record(params, k)?;
    attach_k3(&mut record, params, k)?;
    let mu = params.mu(k);
    let ell = 1.0 + params.lambda;
    let (low, high) = linear_thresholds(params, k);
    let critical_d1 = 0.5 / mu;
    record.case = Some(if rel_eq(params.d1, critical_d1) {
        TheoremCase::Critical
    } else if params.d1 < critical_d1 {
        TheoremCase::Below
    } else {
        TheoremCase::Above
    });
    let d2 = params.d2;
    record.k3_sign = if record.k3.is_none() {
        K3Sign::Indeterminate
    } else if record.case == Some(TheoremCase::Critical) {
        // numerator and denominator of the sign ratio coincide
        if rel_eq(d2, ell / (2.0 * mu)) {
            K3Sign::Indeterminate
        } else {
            K3Sign::Positive
        }
    } else if rel_eq(d2, low) || rel_eq(d2, high) {
        K3Sign::Indeterminate
    } else if (d2 - low) * (d2 - high) > 0.0 {
        K3Sign::Positive
    } else {
        K3Sign::Negative
    };
    Ok(record.finish())
}

/// The two `d2` thresholds of the linear case, `((λ+1)/2 (L/kπ)², (λ+1)/(4 d1) (L/kπ)⁴)`.
pub fn linear_thresholds(params: &ModelParams, k: usize) -> (f64, f64) {
    let mu = params.mu(k);
    let ell = 1.0 + params.lambda;
    (ell / (2.0 * mu), ell / (4.0 * params.d1 * mu * mu))
}

/// Quadratic coefficients, discriminant, roots and thresholds of the
/// logarithmic sign rule.
pub fn log_intermediates(params: &ModelParams, k: usize) -> LogCaseIntermediates {
    let mu = params.mu(k);
    let x = params.d1 * mu;
    let lam = params.lambda;
    let ell = 1.0 + lam;
    let a = 0.5 * (x + 1.0);
    let b = 0.25 * lam * (7.0 * x + 1.0) - 0.75 * ell * (x + 1.0);
    let c = -lam * ell * (12.0 * x + 3.0) / 8.0;
    let delta = b * b + 0.25 * lam * ell * (x + 1.0) * (12.0 * x + 3.0);
    let sq = delta.sqrt();
    // stable form of (-B + √Δ)/(2A)
    let q_hat = if b > 0.0 { 2.0 * c / (-b - sq) } else { (-b + sq) / (2.0 * a) };
    let q_tilde = (1.0 / (4.0 * x) + 1.0) * ell;
    let d2_star = (q_hat - ell) / mu;
    let d2_star_published = (1.5 * lam / (x + 1.0) - 0.25 - 2.0 * lam + sq / (x + 1.0)) / mu;
    let d2_double_star = ell / (4.0 * params.d1 * mu * mu);
    LogCaseIntermediates {
        a_coef: a,
        b_coef: b,
        c_coef: c,
        delta,
        q_hat,
        q_tilde,
        d2_star,
        d2_star_published,
        d2_double_star,
    }
}

/// Logarithmic sensitivity: `sgn K₃ = sgn((Q_k - Q̂_k)/(Q_k - Q̃_k))`.
pub fn classify_log(params: &ModelParams, k: usize) -> Result<(BranchClassification, LogCaseIntermediates)> {
    if !params.sensitivity.is_logarithmic() {
        return Err(Error::WrongSensitivity { expected: "logarithmic" });
    }
    let mut record = base_record(params, k)?;
    attach_k3(&mut record, params, k)?;
    let inter = log_intermediates(params, k);
    let mu = params.mu(k);
    let ell = 1.0 + params.lambda;
    let critical_d1 = 0.5 * ell / mu;
    record.case = Some(if rel_eq(params.d1, critical_d1) {
        TheoremCase::Critical
    } else if params.d1 < critical_d1 {
        TheoremCase::Below
    } else {
        TheoremCase::Above
    });
    let q = record.q_k;
    record.k3_sign = if rel_eq(q, inter.q_tilde) || record.k3.is_none() {
        record.nondegenerate = false;
        K3Sign::Indeterminate
    } else if record.case == Some(TheoremCase::Critical) {
        K3Sign::Positive
    } else if rel_eq(q, inter.q_hat) {
        K3Sign::Indeterminate
    } else if (q - inter.q_hat) / (q - inter.q_tilde) > 0.0 {
        K3Sign::Positive
    } else {
        K3Sign::Negative
    };
    Ok((record.finish(), inter))
}

/// Any sensitivity: the sign is read off `k3_general` directly, with no
/// theorem case attached.
pub fn classify_general(params: &ModelParams, k: usize) -> Result<BranchClassification> {
    let mut record = base_record(params, k)?;
    match k3_terms(params, k) {
        Ok((value, scale)) => {
            record.k3 = Some(value);
            record.k3_coefficient = Some(k3_coefficient(params, k)?);
            record.k3_sign = K3Sign::from_value(value, scale);
        }
        Err(Error::Degenerate { .. }) => record.nondegenerate = false,
        Err(e) => return Err(e),
    }
    Ok(record.finish())
}

/// Dispatches on the sensitivity kind.
pub fn classify(params: &ModelParams, k: usize) -> Result<(BranchClassification, Option<LogCaseIntermediates>)> {
    if params.sensitivity.is_linear() {
        Ok((classify_linear(params, k)?, None))
    } else if params.sensitivity.is_logarithmic() {
        let (c, i) = classify_log(params, k)?;
        Ok((c, Some(i)))
    } else {
        Ok((classify_general(params, k)?, None))
    }
}
