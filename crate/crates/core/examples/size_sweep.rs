//! Pre-trains on 1, 5 and 50 anions per cation and fine-tunes density and
//! viscosity on each encoder.
//!
//! `cargo run --release --example size_sweep -- [SEED]`

use ilnrs::data::Property;
use ilnrs::pipeline::{size_sweep, sweep_summary, SweepSettings, TrainSettings};
use ilnrs::synth::{emit_datasets, OracleConfig, SamplingPlan};

fn main() -> ilnrs::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .map_or(1, |s| s.parse().expect("seed must be an integer"));
    let bench = emit_datasets(&OracleConfig::default().with_seed(seed), &SamplingPlan::default())?;
    let sweep = SweepSettings {
        fractions: vec![1, 5, 50],
        targets: vec![Property::Density, Property::LnViscosity],
        ..SweepSettings::default()
    };
    let points = size_sweep(&bench, &sweep, &TrainSettings::default().with_seed(seed))?;
    print!("{}", sweep_summary(&points));
    Ok(())
}
