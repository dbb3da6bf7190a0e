//! Loading a scenario from TOML with dotted overrides, then writing the
//! run's files.
//!
//! cargo run --example scenario_file -- <scenario.toml> [key=value ...]
//! Without arguments the built-in flocking scenario is shortened to 10 s.

use std::path::Path;

use dsa::cli::run_scenario;
use dsa::scenario::FLOCKING_TOML;
use dsa::Scenario;

fn main() -> dsa::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let scenario = match args.split_first() {
        Some((path, overrides)) => Scenario::from_path(Path::new(path), overrides)?,
        None => Scenario::from_toml_str(FLOCKING_TOML, &["duration=10".into(), "cbf.m=4".into()])?,
    };
    print!("{}", scenario.to_toml_string());
    let dir = std::env::temp_dir().join("dsa-scenario-file");
    let summary = run_scenario(&scenario, Some(&dir), true)?;
    println!("\nwrote outputs to {}", dir.display());
    print!("{}", summary.to_toml_string());
    Ok(())
}
