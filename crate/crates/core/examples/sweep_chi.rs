//! Parameter sweep over χ through the same entry point as
//! `chemomorph sweep --vary chi=10:16:7`.

use chemomorph::run::{parse_vary, sweep};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = "preset = \"fig2\"\n[analyze]\nk_max = 5\n";
    let vary = parse_vary("chi=10:16:7")?;
    let out = std::env::temp_dir().join("chemomorph_sweep_chi");
    for e in sweep(base, &vary, &out)? {
        println!("chi = {:>5.2}: exit {} {}", e.value, e.exit_code, e.message);
    }
    println!("index at {}", out.join("sweep.csv").display());
    Ok(())
}
