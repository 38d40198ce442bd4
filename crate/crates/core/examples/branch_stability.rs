//! Linear sensitivity with fast chemical diffusion (d2 = 1) versus slow
//! (d2 = 0.03): the branch flips from forward and stable to backward and
//! unstable. The principal eigenvalue along the numerical branch confirms it.

use chemomorph::bifurcation::classify_linear;
use chemomorph::model::{ModelParams, SensitivitySpec};
use chemomorph::pde::Grid;
use chemomorph::steady::{trace_branch, ContinuationControls};

fn main() -> chemomorph::error::Result<()> {
    for d2 in [1.0, 0.03] {
        let params = ModelParams::new(1.0, d2, 0.0, 1.0, 1.0, SensitivitySpec::Linear)?;
        let c = classify_linear(&params, 1)?;
        println!("d2 = {d2}: predicted {} / {}", c.direction.as_str(), c.stability.as_str());
        let grid = Grid::new(256, 1.0)?;
        let branch = trace_branch(&params, 1, 0.01, grid, &ContinuationControls::default())?;
        for p in branch.points.iter().filter(|p| p.amplitude.abs() > 2e-3).step_by(3) {
            println!(
                "  s = {:>8.5}  chi - chi_1 = {:>11.3e}  eigenvalue = {:>10.3e}",
                p.amplitude,
                p.chi - branch.chi_k_discrete,
                p.stability.eigenvalue.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
