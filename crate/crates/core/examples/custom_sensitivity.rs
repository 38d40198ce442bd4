//! A receptor-saturating sensitivity Phi(v) = v / (1 + v), supplied with its
//! derivatives. Threshold and branch curvature come from the general
//! formulas; no theorem case applies.

use chemomorph::bifurcation::classify;
use chemomorph::linstab::{chi_0, DEFAULT_K_MAX};
use chemomorph::model::{CustomSensitivity, ModelParams, SensitivitySpec};

fn main() -> chemomorph::error::Result<()> {
    let saturating = CustomSensitivity::new(
        "v/(1+v)",
        |v| v / (1.0 + v),
        |v| 1.0 / (1.0 + v).powi(2),
        |v| -2.0 / (1.0 + v).powi(3),
        |v| 6.0 / (1.0 + v).powi(4),
    )?;
    let params = ModelParams::new(1.0, 1.0, 0.0, 1.0, 1.0, SensitivitySpec::Custom(saturating))?;
    let t = chi_0(&params, DEFAULT_K_MAX)?;
    println!("chi0 = {:.6} at k* = {}", t.chi0, t.k_star);
    for d2 in [0.01, 0.1, 1.0] {
        let (c, _) = classify(&ModelParams { d2, ..params.clone() }, 1)?;
        println!(
            "d2 = {d2:<4}: K3 = {:>12.5e}, {} / {}",
            c.k3_coefficient.unwrap_or(f64::NAN),
            c.direction.as_str(),
            c.stability.as_str()
        );
    }

    // a sign slip in a derivative is caught at construction
    let wrong = CustomSensitivity::new("bad", |v| v * v, |v| 2.0 * v, |_| -2.0, |_| 0.0);
    println!("inconsistent derivatives: {}", wrong.unwrap_err());
    Ok(())
}
