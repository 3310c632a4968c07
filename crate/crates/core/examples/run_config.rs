//! Run an experiment config (default: configs/single_run.toml) and print
//! the summary table. Pass a path to run another config.

use ggm_mac::harness::{run_experiment, ExperimentConfig};

fn main() -> ggm_mac::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/single_run.toml").into()
    });
    let cfg = ExperimentConfig::load(&path)?;
    let out = run_experiment(&cfg)?;
    println!("config sha256 {}", out.config_hash);
    print!("{}", out.summary_table());
    Ok(())
}
