//! Spike count of the settled state against interval length, one run per
//! length in parallel.
//!
//!     cargo run --release --example domain_length [L ...]

use rayon::prelude::*;

use chemomorph::pde::{simulate, spike_indices, Grid, SimulationControls};
use chemomorph::presets::preset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = preset("fig56").unwrap();
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let lengths = if args.is_empty() { vec![1.0, 3.0, 5.0] } else { args };

    let rows: Vec<_> = lengths
        .par_iter()
        .map(|&length| -> chemomorph::error::Result<_> {
            let params = p.params.with_length(length)?;
            let grid = Grid::default_for(length)?;
            let run = simulate(p.initial.build(grid, &params)?, &params, p.t_end, SimulationControls::default())?;
            let mut spikes = spike_indices(&run.state.u);
            spikes.sort_unstable();
            let xs: Vec<f64> = spikes.iter().map(|&i| grid.x(i)).collect();
            Ok((length, run.termination, run.state.time, xs))
        })
        .collect::<Result<_, _>>()?;

    for (length, term, t, xs) in rows {
        println!(
            "L = {length:>5}: {} spikes ({} at t = {t:.1}) at {:?}",
            xs.len(),
            term.as_str(),
            xs.iter().map(|x| (x * 100.0).round() / 100.0).collect::<Vec<_>>()
        );
    }
    Ok(())
}
