//! Compares analytic gradients of both networks with central differences.
//!
//! `cargo run --release --example gradient_check`

use std::sync::Arc;

use ilnrs::data::Property;
use ilnrs::model::{build_finetune, build_pretrain, FinetuneConfig, PretrainConfig};
use ilnrs::nn::{gradient_check, mse_loss, GradCheckOptions, Loss, Matrix};

fn main() -> ilnrs::Result<()> {
    let c = [0, 3, 5, 1, 3, 6];
    let a = [2, 0, 1, 3, 3, 0];
    let y = Matrix::column(&[0.3, -1.2, 0.8, 0.1, -0.4, 1.5]);
    let opts = GradCheckOptions {
        samples: 400,
        ..GradCheckOptions::default()
    };

    for loss in [Loss::Mse, Loss::Huber { delta: 0.5 }] {
        let mut config = PretrainConfig::new(Property::Density).with_widths(16, 2, 8);
        config.loss = loss;
        let mut model = build_pretrain(config, (7, 4), 11)?;
        let report = gradient_check(
            &mut model,
            |m| loss.value(&m.forward(&c, &a).unwrap(), &y).unwrap(),
            |m| {
                let (pred, trace) = m.forward_train(&c, &a, None).unwrap();
                m.backward(&trace, &loss.grad(&pred, &y).unwrap()).unwrap();
            },
            opts,
        );
        println!(
            "pre-training ({loss:?}): max relative error {:.2e} over {} entries",
            report.max_relative_error, report.checked
        );
    }

    let encoder = Arc::new(build_pretrain(PretrainConfig::new(Property::Density), (7, 4), 12)?.export_encoder());
    let mut model = build_finetune(encoder, FinetuneConfig::new(Property::Density), 13)?;
    let encoded = model.encoder().encode(&c, &a)?;
    let features = model.features(
        &encoded,
        &[280.0, 300.0, 320.0, 340.0, 360.0, 300.0],
        &[1.0, 1.0, 5.0, 50.0, 1.0, 20.0],
    )?;
    let report = gradient_check(
        &mut model,
        |m| mse_loss(&m.forward_features(&features).unwrap(), &y).unwrap(),
        |m| {
            m.accumulate_gradients(&features, &y).unwrap();
        },
        opts,
    );
    println!(
        "fine-tuning head: max relative error {:.2e} over {} entries",
        report.max_relative_error, report.checked
    );
    Ok(())
}
