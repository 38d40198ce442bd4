use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chemomorph::config::parse_config_for;
use chemomorph::run::{execute, output_dir, parse_vary, sweep, RunError};

#[derive(Parser)]
#[command(name = "chemomorph", version, about = "Pattern formation in a chemotaxis model with logistic source")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Linear stability table and threshold.
    Analyze(RunArgs),
    /// Branch direction and stability per mode.
    Bifurcate(RunArgs),
    /// Time integration of the full system.
    Simulate(RunArgs),
    /// Numerical continuation of a steady branch.
    Steady(RunArgs),
    /// Runs a configuration over a range of one numeric key, in parallel.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `key=start:stop:n`, e.g. `chi=10:20:5` or `model.d2=0.01:0.1:10`.
        #[arg(long)]
        vary: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String, RunError> {
    std::fs::read_to_string(path).map_err(RunError::Io)
}

fn single(name: &str, args: &RunArgs) -> Result<(), RunError> {
    let text = read(&args.config)?;
    let config = parse_config_for(&text, Some(name))?;
    let dir = output_dir(&config, args.out.as_deref());
    let report = execute(&config, &dir)?;
    print!("{}", report.summary);
    println!("output: {}", report.dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Cmd::Analyze(a) => single("analyze", &a),
        Cmd::Bifurcate(a) => single("bifurcate", &a),
        Cmd::Simulate(a) => single("simulate", &a),
        Cmd::Steady(a) => single("steady", &a),
        Cmd::Sweep { config, vary, out } => {
            let text = read(&config)?;
            let vary = parse_vary(&vary)?;
            let out = out.unwrap_or_else(|| PathBuf::from("runs").join(format!("sweep_{}", vary.key)));
            let entries = sweep(&text, &vary, &out)?;
            let mut worst = 0;
            for e in &entries {
                println!("{} = {}: exit {} ({}) {}", vary.key, e.value, e.exit_code, e.dir.display(), e.message);
                worst = worst.max(e.exit_code);
            }
            println!("index: {}", out.join("sweep.csv").display());
            if worst != 0 {
                std::process::exit(worst);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
