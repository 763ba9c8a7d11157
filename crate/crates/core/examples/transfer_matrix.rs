//! Pre-trains one encoder per simulated property and cross-validates every
//! experimental target on each of them.
//!
//! `cargo run --release --example transfer_matrix -- [SEED]`

use std::sync::Arc;

use ilnrs::data::Property;
use ilnrs::model::PretrainConfig;
use ilnrs::pipeline::{train_pretrain, transfer_matrix, transfer_summary, TrainSettings};
use ilnrs::synth::{emit_datasets, OracleConfig, SamplingPlan};

fn main() -> ilnrs::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .map_or(1, |s| s.parse().expect("seed must be an integer"));
    let bench = emit_datasets(&OracleConfig::default().with_seed(seed), &SamplingPlan::default())?;
    let settings = TrainSettings::default().with_seed(seed);
    let vocab = (bench.plan.num_cations, bench.plan.num_anions);

    let mut encoders = Vec::new();
    for source in Property::PRETRAINABLE {
        let records = bench.pretrain.filter_property(source).records;
        let trained = train_pretrain(&records, vocab, PretrainConfig::new(source), &settings, seed)?;
        encoders.push(Arc::new(trained.model.export_encoder()));
    }
    let matrix = transfer_matrix(&encoders, &bench.experimental, &[50], &settings)?;
    print!("{}", transfer_summary(&matrix));
    Ok(())
}
