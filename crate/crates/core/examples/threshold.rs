//! Linear stability of the constant state (λ, 1): the mode table, the
//! threshold χ0 and the verdict on either side of it.

use chemomorph::linstab::{chi_0, is_unstable, mode_analysis, DEFAULT_K_MAX};
use chemomorph::model::{ModelParams, SensitivitySpec};

fn main() -> chemomorph::error::Result<()> {
    let params = ModelParams::new(1.0, 1.0, 20.0, 1.0, 1.0, SensitivitySpec::Logarithmic)?;

    println!("{:>3} {:>12} {:>14} {:>14} {:>14}", "k", "mu_k", "chi_k", "det J_k", "growth");
    for k in 1..=6 {
        let m = mode_analysis(&params, k)?;
        println!(
            "{:>3} {:>12.5} {:>14.6} {:>14.4} {:>14.6}",
            k,
            m.mu_k,
            m.chi_k.unwrap(),
            m.det,
            m.leading_rate().re
        );
    }

    let t = chi_0(&params, DEFAULT_K_MAX)?;
    println!("\nchi0 = {:.8} at k* = {}", t.chi0, t.k_star);

    for chi in [0.0, 5.0, t.chi0 * 0.999, t.chi0 * 1.001, 20.0] {
        let v = is_unstable(&params.with_chi(chi))?;
        println!("chi = {chi:>9.5}: {}", if v.unstable { "unstable" } else { "stable" });
    }

    // longer intervals pull the critical mode to larger k
    for length in [1.0, 5.0, 10.0, 20.0] {
        let p = params.with_length(length)?;
        let t = chi_0(&p, DEFAULT_K_MAX)?;
        println!("L = {length:>4}: chi0 = {:.6}, k* = {}", t.chi0, t.k_star);
    }
    Ok(())
}
