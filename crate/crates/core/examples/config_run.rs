//! Drives the library the way the command-line tool does: parse a config,
//! run it into a directory, read the manifest back.

use chemomorph::config::parse_config;
use chemomorph::run::{execute, parse_manifest};

const CONFIG: &str = r#"
preset = "fig2"

[model]
chi = 16.0

[steady]
k = 1
s_max = 0.01
n_cells = 256
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = parse_config(CONFIG)?;
    let dir = std::env::temp_dir().join("chemomorph_config_run");
    let report = execute(&config, &dir)?;
    print!("{}", report.summary);

    let manifest = std::fs::read_to_string(dir.join("manifest.toml"))?;
    assert_eq!(parse_manifest(&manifest)?, config);
    println!("manifest round-trips; files in {}", dir.display());

    // every problem in a document is reported together
    let bad = "d1 = -1\nsensitivity = \"cubic\"\n[analyze]\nk_maximum = 3\n";
    println!("\n{}", parse_config(bad).unwrap_err());
    Ok(())
}
