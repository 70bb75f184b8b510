// Run two experiments from a TOML manifest and print their checks.

use active_stokes::error::Result;
use active_stokes::experiments::{run_all, Manifest, RunOptions};

const MANIFEST: &str = r#"
[[experiment]]
id = "energy_signs"

[[experiment]]
id = "fp_stationary"
name = "fp_weak"
[experiment.params]
peclets = [0.01, 0.5]
l_max = 8
"#;

pub fn run_example() -> Result<()> {
    let manifest = Manifest::parse(MANIFEST)?;
    let summary = run_all(&manifest.experiment, &RunOptions::default())?;
    for line in summary.lines() {
        println!("{line}");
    }
    for r in &summary.reports {
        print!("{}", r.csv.render());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
