//! Runs an experiment spec and prints its summary table, without writing
//! files.
//!
//! ```text
//! cargo run --release --example sweep -- fixtures/interval_sweep.toml
//! ```

use coopvision::harness::{run_experiment, summarize, Experiment, ExperimentSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/interval_sweep.toml").to_string());
    let exp = Experiment::load(ExperimentSpec::from_file(&path)?)?;
    let table = run_experiment(&exp)?;
    print!("{}", summarize(&table)?.render());
    Ok(())
}
