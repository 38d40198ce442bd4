//! Model parameters, the homogeneous equilibrium and chemotactic sensitivity
//! functions.
//!
//! The reduced system evolved throughout the crate is
//!
//! ```text
//! u_t = (d1 u_x - chi u Phi(v)_x)_x + lambda - u
//! v_t = d2 v_xx + 1 - (1 + lambda) v + u
//! ```
//!
//! on `(0, L)` with zero-flux boundaries. [`RawParams`] holds the
//! coefficients of the general system with degradation `mu` and receptor
//! kinetics `alpha`, `beta`; [`nondimensionalize`] maps them to
//! [`ModelParams`].

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Step used by the finite-difference consistency checks.
pub const FD_STEP: f64 = 1e-5;

/// Absolute floor added to relative derivative tolerances.
pub const FD_ABS_FLOOR: f64 = 1e-12;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied sensitivity with its first three derivatives.
#[derive(Clone)]
pub struct CustomSensitivity {
    name: String,
    phi: [ScalarFn; 4],
}

impl CustomSensitivity {
    /// Builds a custom sensitivity, checking at `v = 1` that each supplied
    /// derivative matches a central difference of the previous one to
    /// relative tolerance `1e-6`.
    pub fn new<F0, F1, F2, F3>(name: impl Into<String>, phi: F0, d1: F1, d2: F2, d3: F3) -> Result<Self>
    where
        F0: Fn(f64) -> f64 + Send + Sync + 'static,
        F1: Fn(f64) -> f64 + Send + Sync + 'static,
        F2: Fn(f64) -> f64 + Send + Sync + 'static,
        F3: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let custom = CustomSensitivity {
            name: name.into(),
            phi: [Arc::new(phi), Arc::new(d1), Arc::new(d2), Arc::new(d3)],
        };
        custom.check_derivatives(1.0, 1e-6)?;
        Ok(custom)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    fn check_derivatives(&self, v: f64, rtol: f64) -> Result<()> {
        for order in 0..3 {
            let f = &self.phi[order];
            let numeric = (f(v + FD_STEP) - f(v - FD_STEP)) / (2.0 * FD_STEP);
            let analytic = self.phi[order + 1](v);
            if !derivative_agrees(analytic, numeric, rtol) {
                return Err(Error::InconsistentDerivative {
                    order: order as u8 + 1,
                    v,
                    analytic,
                    numeric,
                });
            }
        }
        Ok(())
    }
}

impl fmt::Debug for CustomSensitivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomSensitivity").field("name", &self.name).finish()
    }
}

/// `|analytic - numeric| <= rtol * |analytic| + FD_ABS_FLOOR`
pub fn derivative_agrees(analytic: f64, numeric: f64, rtol: f64) -> bool {
    (analytic - numeric).abs() <= rtol * analytic.abs().max(numeric.abs()) + FD_ABS_FLOOR
}

/// The sensitivity function `Phi` through which receptor gradients steer
/// the ligand flux.
#[derive(Debug, Clone)]
pub enum SensitivitySpec {
    /// `Phi(v) = v`
    Linear,
    /// `Phi(v) = ln v`, defined for `v > 0`
    Logarithmic,
    Custom(CustomSensitivity),
}

/// `(Phi, Phi', Phi'', Phi''')` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityValues {
    pub phi: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl SensitivitySpec {
    pub fn name(&self) -> &str {
        match self {
            SensitivitySpec::Linear => "linear",
            SensitivitySpec::Logarithmic => "log",
            SensitivitySpec::Custom(c) => c.name(),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, SensitivitySpec::Linear)
    }

    pub fn is_logarithmic(&self) -> bool {
        matches!(self, SensitivitySpec::Logarithmic)
    }

    /// `Phi'(v)`; hot path of the flux computations, so no domain check.
    #[inline]
    pub fn derivative(&self, v: f64) -> f64 {
        match self {
            SensitivitySpec::Linear => 1.0,
            SensitivitySpec::Logarithmic => 1.0 / v,
            SensitivitySpec::Custom(c) => c.phi[1](v),
        }
    }

    /// `Phi''(v)`, unchecked.
    #[inline]
    pub fn second_derivative(&self, v: f64) -> f64 {
        match self {
            SensitivitySpec::Linear => 0.0,
            SensitivitySpec::Logarithmic => -1.0 / (v * v),
            SensitivitySpec::Custom(c) => c.phi[2](v),
        }
    }

    /// All four values at `v > 0`.
    pub fn at(&self, v: f64) -> Result<SensitivityValues> {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::SensitivityDomain { v });
        }
        Ok(match self {
            SensitivitySpec::Linear => SensitivityValues {
                phi: v,
                d1: 1.0,
                d2: 0.0,
                d3: 0.0,
            },
            SensitivitySpec::Logarithmic => SensitivityValues {
                phi: v.ln(),
                d1: 1.0 / v,
                d2: -1.0 / (v * v),
                d3: 2.0 / (v * v * v),
            },
            SensitivitySpec::Custom(c) => SensitivityValues {
                phi: c.phi[0](v),
                d1: c.phi[1](v),
                d2: c.phi[2](v),
                d3: c.phi[3](v),
            },
        })
    }
}

/// Free-function form of [`SensitivitySpec::at`].
pub fn sensitivity_at(spec: &SensitivitySpec, v: f64) -> Result<SensitivityValues> {
    spec.at(v)
}

/// Nondimensional constants of the reduced system.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub d1: f64,
    pub d2: f64,
    /// Chemoattraction rate; negative values model chemorepulsion.
    pub chi: f64,
    pub lambda: f64,
    pub length: f64,
    pub sensitivity: SensitivitySpec,
}

fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and > 0 (got {value})"),
        })
    }
}

impl ModelParams {
    pub fn new(
        d1: f64,
        d2: f64,
        chi: f64,
        lambda: f64,
        length: f64,
        sensitivity: SensitivitySpec,
    ) -> Result<Self> {
        require_positive("d1", d1)?;
        require_positive("d2", d2)?;
        require_positive("lambda", lambda)?;
        require_positive("length", length)?;
        if !chi.is_finite() {
            return Err(Error::InvalidParameter {
                name: "chi",
                reason: format!("must be finite (got {chi})"),
            });
        }
        Ok(ModelParams {
            d1,
            d2,
            chi,
            lambda,
            length,
            sensitivity,
        })
    }

    /// Same parameters with a different chemoattraction rate.
    pub fn with_chi(&self, chi: f64) -> Self {
        ModelParams { chi, ..self.clone() }
    }

    pub fn with_length(&self, length: f64) -> Result<Self> {
        require_positive("length", length)?;
        Ok(ModelParams {
            length,
            ..self.clone()
        })
    }

    /// Neumann eigenvalue `(k pi / L)^2` of `-d^2/dx^2`.
    pub fn mu(&self, k: usize) -> f64 {
        let w = k as f64 * std::f64::consts::PI / self.length;
        w * w
    }

    pub fn equilibrium(&self) -> Equilibrium {
        equilibrium(self)
    }

    /// `ū Φ'(v̄)`, the linear chemotactic coupling at the equilibrium.
    pub fn coupling(&self) -> Result<f64> {
        let eq = self.equilibrium();
        Ok(eq.u_bar * self.sensitivity.at(eq.v_bar)?.d1)
    }
}

/// Coefficients of the general (dimensional) system.
#[derive(Debug, Clone)]
pub struct RawParams {
    pub d1: f64,
    pub d2: f64,
    pub chi: f64,
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Passed through unchanged: the transform does not rescale space.
    pub length: f64,
    pub sensitivity: SensitivitySpec,
}

impl RawParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        d1: f64,
        d2: f64,
        chi: f64,
        lambda: f64,
        mu: f64,
        alpha: f64,
        beta: f64,
        length: f64,
        sensitivity: SensitivitySpec,
    ) -> Result<Self> {
        require_positive("d1", d1)?;
        require_positive("d2", d2)?;
        require_positive("chi", chi)?;
        require_positive("lambda", lambda)?;
        require_positive("mu", mu)?;
        require_positive("alpha", alpha)?;
        require_positive("beta", beta)?;
        require_positive("length", length)?;
        Ok(RawParams {
            d1,
            d2,
            chi,
            lambda,
            mu,
            alpha,
            beta,
            length,
            sensitivity,
        })
    }
}

/// Maps the general system onto the reduced one:
/// `d1/mu`, `(mu + beta lambda)/(alpha mu) d2`, `chi (mu + beta lambda)/(alpha mu^2)`, `lambda/mu`.
pub fn nondimensionalize(raw: &RawParams) -> ModelParams {
    let scale = (raw.mu + raw.beta * raw.lambda) / (raw.alpha * raw.mu);
    ModelParams {
        d1: raw.d1 / raw.mu,
        d2: scale * raw.d2,
        chi: raw.chi * scale / raw.mu,
        lambda: raw.lambda / raw.mu,
        length: raw.length,
        sensitivity: raw.sensitivity.clone(),
    }
}

/// The homogeneous steady state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub u_bar: f64,
    pub v_bar: f64,
}

/// `(ū, v̄) = (λ, 1)`, the unique constant steady state.
pub fn equilibrium(params: &ModelParams) -> Equilibrium {
    Equilibrium {
        u_bar: params.lambda,
        v_bar: 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, v: f64) -> f64 {
        (f(v + FD_STEP) - f(v - FD_STEP)) / (2.0 * FD_STEP)
    }

    #[test]
    fn equilibrium_values() {
        let p = ModelParams::new(1.0, 1.0, 3.0, 1.0, 1.0, SensitivitySpec::Linear).unwrap();
        assert_eq!(equilibrium(&p), Equilibrium { u_bar: 1.0, v_bar: 1.0 });
        let p = ModelParams::new(0.3, 7.0, -2.0, 2.5, 4.0, SensitivitySpec::Logarithmic).unwrap();
        assert_eq!(equilibrium(&p), Equilibrium { u_bar: 2.5, v_bar: 1.0 });
    }

    #[test]
    fn invalid_params_rejected() {
        let err = ModelParams::new(-1.0, 1.0, 1.0, 1.0, 1.0, SensitivitySpec::Linear).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { name: "d1", .. }));
        assert!(ModelParams::new(1.0, 0.0, 1.0, 1.0, 1.0, SensitivitySpec::Linear).is_err());
        assert!(ModelParams::new(1.0, 1.0, 1.0, 1.0, f64::NAN, SensitivitySpec::Linear).is_err());
        // chemorepulsion is allowed
        assert!(ModelParams::new(1.0, 1.0, -5.0, 1.0, 1.0, SensitivitySpec::Linear).is_ok());
        assert!(RawParams::new(1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, SensitivitySpec::Linear).is_err());
    }

    #[test]
    fn nondimensionalize_examples() {
        let raw = RawParams::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 3.0, SensitivitySpec::Linear).unwrap();
        let p = nondimensionalize(&raw);
        assert_eq!((p.d1, p.d2, p.chi, p.lambda, p.length), (1.0, 2.0, 2.0, 1.0, 3.0));

        let raw = RawParams::new(3.0, 1.0, 1.0, 2.0, 1.0, 2.0, 1.0, 1.0, SensitivitySpec::Linear).unwrap();
        let p = nondimensionalize(&raw);
        assert_eq!((p.d1, p.d2, p.chi, p.lambda), (3.0, 1.5, 1.5, 2.0));

        // lambda -> 0+ with mu = alpha = beta = 1
        let raw = RawParams::new(1.0, 0.7, 3.0, 1e-12, 1.0, 1.0, 1.0, 1.0, SensitivitySpec::Linear).unwrap();
        let p = nondimensionalize(&raw);
        assert!((p.d2 - 0.7).abs() < 1e-11);
        assert!((p.chi - 3.0).abs() < 1e-11);
    }

    #[test]
    fn nondimensionalize_scale_consistent() {
        let raw = RawParams::new(1.3, 0.4, 2.0, 0.8, 1.7, 0.9, 1.1, 2.0, SensitivitySpec::Linear).unwrap();
        let scaled = RawParams {
            mu: raw.mu * 3.5,
            lambda: raw.lambda * 3.5,
            ..raw.clone()
        };
        let a = nondimensionalize(&raw);
        let b = nondimensionalize(&scaled);
        assert!((a.lambda - b.lambda).abs() < 1e-15);
    }

    #[test]
    fn sensitivity_examples() {
        let lin = SensitivitySpec::Linear.at(3.0).unwrap();
        assert_eq!((lin.phi, lin.d1, lin.d2, lin.d3), (3.0, 1.0, 0.0, 0.0));
        let log = SensitivitySpec::Logarithmic.at(1.0).unwrap();
        assert_eq!((log.phi, log.d1, log.d2, log.d3), (0.0, 1.0, -1.0, 2.0));

        // v = 0.5: analytic values against finite differences of the chain
        let log = SensitivitySpec::Logarithmic.at(0.5).unwrap();
        assert!((log.phi + std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!((log.d1, log.d2, log.d3), (2.0, -4.0, 16.0));
        assert!((fd(f64::ln, 0.5) - 2.0).abs() < 1e-8);
        assert!((fd(|v| 1.0 / v, 0.5) + 4.0).abs() < 1e-8);
        assert!((fd(|v| -1.0 / (v * v), 0.5) - 16.0).abs() < 1e-7);

        assert!(matches!(
            SensitivitySpec::Logarithmic.at(0.0),
            Err(Error::SensitivityDomain { .. })
        ));
        assert!(SensitivitySpec::Linear.at(-1.0).is_err());
    }

    fn check_chain(spec: &SensitivitySpec) {
        for i in 0..10 {
            // ten log-spaced points in [0.1, 10]
            let v = 0.1 * 100f64.powf(i as f64 / 9.0);
            let vals = spec.at(v).unwrap();
            let at = |w: f64| spec.at(w).unwrap();
            let d1 = fd(|w| at(w).phi, v);
            let d2 = fd(|w| at(w).d1, v);
            let d3 = fd(|w| at(w).d2, v);
            assert!(derivative_agrees(vals.d1, d1, 1e-5), "{} d1 at {v}", spec.name());
            assert!(derivative_agrees(vals.d2, d2, 1e-5), "{} d2 at {v}", spec.name());
            assert!(derivative_agrees(vals.d3, d3, 1e-5), "{} d3 at {v}", spec.name());
        }
    }

    #[test]
    fn derivative_chains_consistent() {
        check_chain(&SensitivitySpec::Linear);
        check_chain(&SensitivitySpec::Logarithmic);
        let custom = CustomSensitivity::new(
            "v/(1+v)",
            |v| v / (1.0 + v),
            |v| 1.0 / ((1.0 + v) * (1.0 + v)),
            |v| -2.0 / (1.0 + v).powi(3),
            |v| 6.0 / (1.0 + v).powi(4),
        )
        .unwrap();
        check_chain(&SensitivitySpec::Custom(custom));
    }

    #[test]
    fn custom_inconsistent_rejected() {
        let err = CustomSensitivity::new("bad", |v| v * v, |v| v, |_| 2.0, |_| 0.0).unwrap_err();
        assert!(matches!(err, Error::InconsistentDerivative { order: 1, .. }));
        let err = CustomSensitivity::new("bad3", |v| v * v * v, |v| 3.0 * v * v, |v| 6.0 * v, |_| 0.0)
            .unwrap_err();
        assert!(matches!(err, Error::InconsistentDerivative { order: 3, .. }));
    }

    #[test]
    fn equilibrium_ignores_other_params() {
        let a = ModelParams::new(1.0, 2.0, 3.0, 0.7, 4.0, SensitivitySpec::Linear).unwrap();
        let b = ModelParams::new(9.0, 0.1, -8.0, 0.7, 0.2, SensitivitySpec::Logarithmic).unwrap();
        assert_eq!(a.equilibrium(), b.equilibrium());
    }
}
