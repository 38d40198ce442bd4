//! Small cosine perturbation of (λ, 1) above threshold on (0, 1): the
//! solution settles into a single spike at the left wall.
//!
//!     cargo run --release --example boundary_spike [out_dir]

use std::fs::File;
use std::io::BufWriter;

use chemomorph::pde::{simulate, write_diagnostics, write_profile, Grid, SimulationControls};
use chemomorph::presets::preset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = preset("fig2").unwrap();
    let grid = Grid::default_for(p.params.length)?;
    let initial = p.initial.build(grid, &p.params)?;
    let controls = SimulationControls {
        snapshot_times: vec![0.5, 1.0, 2.0, 3.0],
        ..SimulationControls::default()
    };
    let run = simulate(initial, &p.params, p.t_end, controls)?;

    let stride = (run.diagnostics.len() / 12).max(1);
    for d in run.diagnostics.iter().step_by(stride) {
        println!(
            "t = {:>7.3}  mass_u = {:.10}  max_u = {:>9.5}  spikes = {}  residual = {:.2e}",
            d.t, d.mass_u, d.max_u, d.spike_count, d.residual_inf
        );
    }
    let last = run.diagnostics.last().unwrap();
    println!(
        "{} at t = {:.3}: max u = {:.5} at x = {:.5}, {} rejected steps",
        run.termination.as_str(),
        last.t,
        last.max_u,
        grid.x(chemomorph::pde::spike_indices(&run.state.u)[0]),
        run.rejected_steps
    );

    if let Some(dir) = std::env::args().nth(1) {
        std::fs::create_dir_all(&dir)?;
        write_diagnostics(BufWriter::new(File::create(format!("{dir}/diagnostics.csv"))?), &run.diagnostics)?;
        for s in &run.snapshots {
            let name = chemomorph::pde::snapshot_file_name(s.t);
            write_profile(BufWriter::new(File::create(format!("{dir}/{name}"))?), &grid, &s.u, &s.v)?;
        }
        println!("wrote {dir}");
    }
    Ok(())
}
