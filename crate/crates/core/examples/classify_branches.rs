//! Direction and stability of the bifurcating branches, and how the verdict
//! moves with d2 for both sensitivities.

use chemomorph::bifurcation::{classify, classify_linear, linear_thresholds, log_intermediates};
use chemomorph::model::{ModelParams, SensitivitySpec};

fn main() -> chemomorph::error::Result<()> {
    let lin = ModelParams::new(1.0, 1.0, 0.0, 1.0, 1.0, SensitivitySpec::Linear)?;
    let (a, b) = linear_thresholds(&lin, 1);
    println!("linear, k = 1: K3 changes sign at d2 = {a:.6} and d2 = {b:.6}");
    for d2 in [0.01, 0.03, 0.06, 0.2, 1.0] {
        let c = classify_linear(&ModelParams { d2, ..lin.clone() }, 1)?;
        println!(
            "  d2 = {d2:<5} K3 = {:>12.5e}  {} / {}",
            c.k3_coefficient.unwrap(),
            c.direction.as_str(),
            c.stability.as_str()
        );
    }

    let log = ModelParams::new(1.0, 1.0, 0.0, 1.0, 1.0, SensitivitySpec::Logarithmic)?;
    let li = log_intermediates(&log, 1);
    println!(
        "\nlog, k = 1: Delta = {:.4}, Q_hat = {:.6}, d2* = {:.6}, d2** = {:.6}",
        li.delta, li.q_hat, li.d2_star, li.d2_double_star
    );
    for d1 in [0.01, 0.05, 0.1, 1.0] {
        for d2 in [0.001, 0.01, 0.1, 1.0] {
            let p = ModelParams { d1, d2, ..log.clone() };
            let (c, _) = classify(&p, 1)?;
            let case = c.case.map(|x| x.label()).unwrap_or("-");
            print!("  d1 = {d1:<5} d2 = {d2:<6} case {case:<4} {:<10}", c.stability.as_str());
            if !c.nondegenerate {
                print!(" (degenerate)");
            }
            println!();
        }
    }

    // higher modes on a long interval
    let long = ModelParams { length: 10.0, ..log };
    for k in 1..=4 {
        let (c, _) = classify(&long, k)?;
        println!(
            "L = 10, k = {k}: chi_k = {:.4}, {}{}",
            c.chi_k,
            c.stability.as_str(),
            if c.other_modes_unstable { " (other modes already unstable)" } else { "" }
        );
    }
    Ok(())
}
