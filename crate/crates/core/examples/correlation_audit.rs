//! Fits `sigma = k3 * mu^b * rho^c` twice: to the oracle's ground truth, and to
//! the predictions of fine-tuned density, viscosity and surface-tension models.
//!
//! `cargo run --release --example correlation_audit -- [SEED]`

use std::sync::Arc;

use ilnrs::data::{ILKey, Property};
use ilnrs::model::PretrainConfig;
use ilnrs::pipeline::{audit_models, correlation_audit, finetune, finetune_head_grid, train_pretrain, TrainSettings};
use ilnrs::synth::{emit_datasets, OracleConfig, SamplingPlan, REFERENCE_PRESSURE, REFERENCE_TEMPERATURE};

fn main() -> ilnrs::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .map_or(1, |s| s.parse().expect("seed must be an integer"));
    let bench = emit_datasets(&OracleConfig::default().with_seed(seed), &SamplingPlan::default())?;
    let oracle = &bench.oracle;
    let (t, p) = (REFERENCE_TEMPERATURE, REFERENCE_PRESSURE);
    let ils: Vec<ILKey> = (0..oracle.num_cations())
        .flat_map(|c| (0..oracle.num_anions()).map(move |a| ILKey::new(c, a)))
        .collect();

    let mut truth = (Vec::new(), Vec::new(), Vec::new());
    for &il in &ils {
        truth.0.push(oracle.true_property(il, Property::Density, t, p)?);
        truth
            .1
            .push(oracle.true_property(il, Property::LnViscosity, t, p)?.exp());
        truth.2.push(oracle.true_property(il, Property::SurfaceTension, t, p)?);
    }
    let exact = correlation_audit(&truth.0, &truth.1, &truth.2)?;
    let (k3, b, c) = oracle.surface_tension_law();
    println!("generator       k3 {k3:.6e}  b {b:.6}  c {c:.6}");
    println!(
        "ground truth    k3 {:.6e}  b {:.6}  c {:.6}  R2 {:.6}",
        exact.k3, exact.b, exact.c, exact.r2
    );

    let settings = TrainSettings::default().with_seed(seed);
    let vocab = (oracle.num_cations(), oracle.num_anions());
    let records = bench.pretrain.filter_property(Property::Density).records;
    let trained = train_pretrain(&records, vocab, PretrainConfig::new(Property::Density), &settings, seed)?;
    let encoder = Arc::new(trained.model.export_encoder());
    let model = |target| {
        finetune(
            encoder.clone(),
            &bench.experimental,
            &finetune_head_grid(target, &[50]),
            &settings,
        )
        .map(|o| o.model)
    };
    let (d, v, s) = (
        model(Property::Density)?,
        model(Property::LnViscosity)?,
        model(Property::SurfaceTension)?,
    );
    let fit = audit_models(&d, &v, &s, &ils, t, p)?;
    println!(
        "model output    k3 {:.6e}  b {:.6}  c {:.6}  R2 {:.4}  over {} ILs",
        fit.k3, fit.b, fit.c, fit.r2, fit.n
    );
    Ok(())
}
