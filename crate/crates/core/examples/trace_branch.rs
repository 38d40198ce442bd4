//! Continuation of the k = 1 steady branch out of χ_1 and a fit of χ(s)
//! against the predicted curvature.

use chemomorph::bifurcation::k3_coefficient;
use chemomorph::model::{ModelParams, SensitivitySpec};
use chemomorph::pde::Grid;
use chemomorph::steady::{fit_branch, trace_branch, ContinuationControls};

fn main() -> chemomorph::error::Result<()> {
    let params = ModelParams::new(1.0, 1.0, 0.0, 1.0, 1.0, SensitivitySpec::Logarithmic)?;
    let grid = Grid::new(512, 1.0)?;
    let branch = trace_branch(&params, 1, 0.02, grid, &ContinuationControls::default())?;

    println!("chi_1 = {:.10}, on this grid {:.10}", branch.chi_k, branch.chi_k_discrete);
    for p in branch.points.iter().step_by(4) {
        println!(
            "s = {:>9.5}  chi = {:.10}  eigenvalue = {:>10.3e}  sign = {:>2}",
            p.amplitude,
            p.chi,
            p.stability.eigenvalue.unwrap_or(f64::NAN),
            p.stability.sign
        );
    }

    let fit = fit_branch(&branch.points)?;
    let k3 = k3_coefficient(&params, 1)?;
    println!("\nfit: chi(s) = {:.8} + {:.2e} s + {:.4} s^2 + ...", fit.c0, fit.c1, fit.c2);
    println!("predicted curvature {k3:.4}, relative difference {:.2e}", (fit.c2 - k3).abs() / k3);
    println!("|s| ~ |chi - chi_1|^{:.4}", fit.exponent);
    Ok(())
}
