//! Saves a fine-tuned model, loads it back and checks that predictions match
//! bit for bit. Then shows what a corrupted artifact does.
//!
//! `cargo run --release --example save_load`

use std::sync::Arc;

use ilnrs::data::Property;
use ilnrs::model::PretrainConfig;
use ilnrs::persist::{from_bytes, load_finetune, save_finetune, to_bytes, SavedModel};
use ilnrs::pipeline::{finetune, finetune_head_grid, train_pretrain, TrainSettings};
use ilnrs::synth::{emit_datasets, OracleConfig, SamplingPlan};

fn main() -> ilnrs::Result<()> {
    let plan = SamplingPlan {
        num_cations: 60,
        num_anions: 20,
        anions_per_cation: 8,
        experimental_ils: 60,
        ..SamplingPlan::default()
    };
    let bench = emit_datasets(&OracleConfig::default(), &plan)?;
    let settings = TrainSettings {
        max_epochs: 60,
        folds: 3,
        ..TrainSettings::default()
    };
    let density = bench.pretrain.filter_property(Property::Density).records;
    let trained = train_pretrain(&density, (60, 20), PretrainConfig::new(Property::Density), &settings, 0)?;
    let encoder = Arc::new(trained.model.export_encoder());
    let model = finetune(
        encoder,
        &bench.experimental,
        &finetune_head_grid(Property::Density, &[50]),
        &settings,
    )?
    .model;

    let dir = std::env::temp_dir().join(format!("ilnrs-save-load-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("density.ilnrs");
    let (cations, anions) = (&bench.experimental.cations, &bench.experimental.anions);
    save_finetune(&path, &model, cations, anions)?;
    let loaded = load_finetune(&path)?;
    println!(
        "{} bytes written to {}",
        std::fs::metadata(&path)?.len(),
        path.display()
    );

    let c: Vec<usize> = (0..1000).map(|i| i % 60).collect();
    let a: Vec<usize> = (0..1000).map(|i| (i * 7) % 20).collect();
    let t: Vec<f64> = (0..1000).map(|i| 280.0 + (i % 90) as f64).collect();
    let p: Vec<f64> = (0..1000).map(|i| 1.0 + (i % 50) as f64).collect();
    let before = model.predict(&c, &a, &t, &p)?;
    let after = loaded.model.predict(&c, &a, &t, &p)?;
    let same = before.iter().zip(&after).all(|(x, y)| x.to_bits() == y.to_bits());
    println!("1000 predictions bitwise identical: {same}");

    let bytes = to_bytes(&SavedModel::Finetune(model), cations, anions)?;
    println!(
        "truncated by one byte: {}",
        from_bytes(&bytes[..bytes.len() - 1]).unwrap_err()
    );
    let mut flipped = bytes.clone();
    let i = bytes.len() / 2;
    flipped[i] ^= 1;
    println!("one bit flipped:       {}", from_bytes(&flipped).unwrap_err());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
