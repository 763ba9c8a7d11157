//! Pre-trains the recommender on noise-free simulated density and scores it on
//! ILs it never saw.
//!
//! `cargo run --release --example pretrain_encoder -- [SEED]`

use std::collections::HashSet;

use ilnrs::data::{sample_pairs, ILKey, Property};
use ilnrs::model::PretrainConfig;
use ilnrs::pipeline::{train_pretrain, TrainSettings};
use ilnrs::synth::{emit_datasets, OracleConfig, SamplingPlan};

fn main() -> ilnrs::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .map_or(0, |s| s.parse().expect("seed must be an integer"));
    let bench = emit_datasets(&OracleConfig::exact(seed), &SamplingPlan::default())?;
    let train = bench.pretrain.filter_property(Property::Density);

    // Held-out ILs: a second stratified sample, minus everything trained on.
    let seen: HashSet<ILKey> = train.il_set();
    let held: Vec<ILKey> = sample_pairs(200, 60, 9, seed + 1)?
        .into_iter()
        .filter(|il| !seen.contains(il))
        .collect();
    let test = bench.simulated(&held, Property::Density)?;

    let settings = TrainSettings::default().with_seed(seed);
    let trained = train_pretrain(
        &train.records,
        (200, 60),
        PretrainConfig::new(Property::Density),
        &settings,
        seed,
    )?;
    let fit = trained.evaluate(&train.records)?;
    let held_out = trained.evaluate(&test.records)?;
    println!(
        "trained on {} ILs for {} epochs (best {})",
        train.distinct_ils().len(),
        trained.fit.epochs_run,
        trained.fit.best_epoch
    );
    println!("training ILs   MAE {:8.3} kg/m3  R2 {:.4}", fit.mae, fit.r2);
    println!(
        "held-out ILs   MAE {:8.3} kg/m3  R2 {:.4}  ({} ILs)",
        held_out.mae,
        held_out.r2,
        held.len()
    );

    let encoder = trained.model.export_encoder();
    println!("encoder output width {} (frozen)", encoder.width());
    Ok(())
}
