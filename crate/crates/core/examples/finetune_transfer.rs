//! The central comparison: fine-tuning on top of a pre-trained density encoder
//! versus on top of a random frozen encoder of the same shape.
//!
//! `cargo run --release --example finetune_transfer -- [SEED]`

use std::sync::Arc;

use ilnrs::data::Property;
use ilnrs::model::{random_baseline, PretrainConfig};
use ilnrs::pipeline::{finetune_cv, finetune_head_grid, train_pretrain, TrainSettings};
use ilnrs::synth::{emit_datasets, OracleConfig, SamplingPlan};

fn main() -> ilnrs::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .map_or(1, |s| s.parse().expect("seed must be an integer"));
    let bench = emit_datasets(&OracleConfig::default().with_seed(seed), &SamplingPlan::default())?;
    let settings = TrainSettings::default().with_seed(seed);
    let config = PretrainConfig::new(Property::Density);
    let vocab = (bench.plan.num_cations, bench.plan.num_anions);

    let pretrained = train_pretrain(
        &bench.pretrain.filter_property(Property::Density).records,
        vocab,
        config,
        &settings,
        seed,
    )?;
    let encoder = Arc::new(pretrained.model.export_encoder());

    println!(
        "{:<16} {:>12} {:>12} {:>7}",
        "target", "transfer MAE", "random MAE", "ratio"
    );
    for target in Property::ALL {
        let grid = finetune_head_grid(target, &[50]);
        let transfer = finetune_cv(encoder.clone(), &bench.experimental, &grid, &settings)?;
        let baseline = random_baseline(grid[0], config, vocab, seed)?;
        let random = finetune_cv(baseline.encoder().clone(), &bench.experimental, &grid, &settings)?;
        let (t, r) = (transfer.best_point().mean.mae, random.best_point().mean.mae);
        println!("{:<16} {:>12.4} {:>12.4} {:>7.3}", target.tag(), t, r, t / r);
    }
    Ok(())
}
