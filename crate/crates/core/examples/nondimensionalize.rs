//! From the dimensional system (degradation mu, receptor kinetics alpha,
//! beta) to the reduced parameters, and the threshold on both scales.

use chemomorph::linstab::{chi_0, DEFAULT_K_MAX};
use chemomorph::model::{nondimensionalize, RawParams, SensitivitySpec};

fn main() -> chemomorph::error::Result<()> {
    let raw = RawParams::new(0.4, 0.2, 3.0, 0.6, 0.5, 2.0, 1.5, 2.0, SensitivitySpec::Logarithmic)?;
    let p = nondimensionalize(&raw);
    println!("raw:     {raw:?}");
    println!("reduced: d1 = {:.6}, d2 = {:.6}, chi = {:.6}, lambda = {:.6}, L = {}", p.d1, p.d2, p.chi, p.lambda, p.length);

    let t = chi_0(&p, DEFAULT_K_MAX)?;
    // chi scales linearly, so the dimensional threshold is chi0 times the
    // same factor that took raw.chi to p.chi
    let factor = raw.chi / p.chi;
    println!("reduced chi0 = {:.6} (k* = {}), dimensional chi0 = {:.6}", t.chi0, t.k_star, t.chi0 * factor);
    println!("configured chi is {} the threshold", if p.chi > t.chi0 { "above" } else { "below" });
    Ok(())
}
