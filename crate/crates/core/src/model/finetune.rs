//! Fine-tuning network: the frozen encoder output concatenated with standardized
//! temperature and/or pressure, followed by a trainable head.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::blocks::{check_head_width, Head};
use super::nrs::{build_pretrain, EncoderSnapshot, PretrainConfig};
use crate::data::{Property, PropertyRecord, Scaler};
use crate::error::{Error, Result};
use crate::nn::{adam_step, mse_grad, mse_loss, validate_rate, AdamConfig, Matrix, Parameter, Parameterized};
use crate::seed;

pub const FINETUNE_HEAD_WIDTHS: [usize; 3] = [50, 100, 200];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinetuneConfig {
    pub head_width: usize,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub uses_temperature: bool,
    pub uses_pressure: bool,
    pub property: Property,
}

impl FinetuneConfig {
    pub fn new(property: Property) -> Self {
        let (uses_temperature, uses_pressure) = property.default_conditions();
        Self {
            head_width: 100,
            dropout_rate: 0.05,
            learning_rate: 0.01,
            uses_temperature,
            uses_pressure,
            property,
        }
    }

    pub fn with_head_width(mut self, head_width: usize) -> Self {
        self.head_width = head_width;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_head_width(self.head_width)?;
        validate_rate(self.dropout_rate)?;
        AdamConfig::new(self.learning_rate)?;
        if !self.property.depends_on_conditions() && (self.uses_temperature || self.uses_pressure) {
            return Err(Error::Config(format!(
                "{} is condition-free; temperature and pressure inputs must be off",
                self.property
            )));
        }
        Ok(())
    }

    pub fn condition_count(&self) -> usize {
        usize::from(self.uses_temperature) + usize::from(self.uses_pressure)
    }

    pub fn full_grid(property: Property) -> Vec<FinetuneConfig> {
        FINETUNE_HEAD_WIDTHS
            .iter()
            .map(|&w| Self::new(property).with_head_width(w))
            .collect()
    }

    pub fn label(&self) -> String {
        format!("head={}", self.head_width)
    }
}

/// Standardization statistics, all fitted on training-fold records only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinetuneScalers {
    pub target: Scaler,
    pub temperature: Scaler,
    pub pressure: Scaler,
}

impl FinetuneScalers {
    pub const IDENTITY: FinetuneScalers = FinetuneScalers {
        target: Scaler::IDENTITY,
        temperature: Scaler::IDENTITY,
        pressure: Scaler::IDENTITY,
    };

    /// Fits the target and the condition columns `config` uses; unused
    /// conditions are never read and keep the identity scaler.
    pub fn fit(records: &[PropertyRecord], config: &FinetuneConfig) -> Result<Self> {
        let col = |f: fn(&PropertyRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
        let mut scalers = Self::IDENTITY;
        scalers.target = Scaler::fit(&col(|r| r.value))?;
        if config.uses_temperature {
            scalers.temperature = Scaler::fit(&col(|r| r.temperature))?;
        }
        if config.uses_pressure {
            scalers.pressure = Scaler::fit(&col(|r| r.pressure))?;
        }
        Ok(scalers)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneModel {
    encoder: Arc<EncoderSnapshot>,
    pub head: Head,
    config: FinetuneConfig,
    pub scalers: FinetuneScalers,
}

/// Fresh head on top of `encoder`; scalers start as the identity until fitted.
pub fn build_finetune(encoder: Arc<EncoderSnapshot>, config: FinetuneConfig, seed: u64) -> Result<FinetuneModel> {
    config.validate()?;
    let input = encoder.width() + config.condition_count();
    let head = Head::new(input, config.head_width, &mut seed::rng(seed))?;
    Ok(FinetuneModel {
        encoder,
        head,
        config,
        scalers: FinetuneScalers::IDENTITY,
    })
}

/// The control model: same architecture, randomly initialized encoder that is frozen untrained.
pub fn random_baseline(
    config: FinetuneConfig,
    encoder_config: PretrainConfig,
    vocab_sizes: (usize, usize),
    seed: u64,
) -> Result<FinetuneModel> {
    let encoder = build_pretrain(encoder_config, vocab_sizes, seed::derive(seed, 0))?.export_encoder();
    build_finetune(Arc::new(encoder), config, seed::derive(seed, 1))
}

impl FinetuneModel {
    pub(crate) fn from_parts(
        encoder: Arc<EncoderSnapshot>,
        head: Head,
        config: FinetuneConfig,
        scalers: FinetuneScalers,
    ) -> Result<Self> {
        config.validate()?;
        let expected = encoder.width() + config.condition_count();
        if head.input_width() != expected {
            return Err(Error::Dimension(format!(
                "head expects {} inputs, encoder and conditions give {expected}",
                head.input_width()
            )));
        }
        Ok(Self {
            encoder,
            head,
            config,
            scalers,
        })
    }

    pub fn encoder(&self) -> &Arc<EncoderSnapshot> {
        &self.encoder
    }

    pub fn config(&self) -> &FinetuneConfig {
        &self.config
    }

    pub fn property(&self) -> Property {
        self.config.property
    }

    pub fn input_width(&self) -> usize {
        self.head.input_width()
    }

    /// Appends the standardized condition columns the config asks for to an
    /// encoder output. Unused condition slices are never read and may be empty.
    pub fn features(&self, encoded: &Matrix, temperature: &[f64], pressure: &[f64]) -> Result<Matrix> {
        let n = encoded.rows();
        let mut columns: Vec<(&[f64], &Scaler, &str)> = Vec::new();
        if self.config.uses_temperature {
            columns.push((temperature, &self.scalers.temperature, "temperature"));
        }
        if self.config.uses_pressure {
            columns.push((pressure, &self.scalers.pressure, "pressure"));
        }
        for (values, _, name) in &columns {
            if values.len() != n {
                return Err(Error::Dimension(format!(
                    "{} {name} values for {n} queries",
                    values.len()
                )));
            }
            if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("{name} {bad}")));
            }
        }
        let width = encoded.cols() + columns.len();
        let mut out = Matrix::zeros(n, width);
        for r in 0..n {
            let row = out.row_mut(r);
            row[..encoded.cols()].copy_from_slice(encoded.row(r));
            for (j, (values, scaler, _)) in columns.iter().enumerate() {
                row[encoded.cols() + j] = scaler.transform(values[r]);
            }
        }
        Ok(out)
    }

    /// Predictions in native property units (dropout off).
    pub fn predict(
        &self,
        cation_ids: &[usize],
        anion_ids: &[usize],
        temperature: &[f64],
        pressure: &[f64],
    ) -> Result<Vec<f64>> {
        let encoded = self.encoder.encode(cation_ids, anion_ids)?;
        self.predict_encoded(&encoded, temperature, pressure)
    }

    /// Same as [`predict`](Self::predict) for an already-computed encoder output.
    pub fn predict_encoded(&self, encoded: &Matrix, temperature: &[f64], pressure: &[f64]) -> Result<Vec<f64>> {
        let x = self.features(encoded, temperature, pressure)?;
        let scaled = self.head.infer(x)?;
        Ok(scaled.data().iter().map(|&z| self.scalers.target.inverse(z)).collect())
    }

    /// Head output on standardized features, in standardized target units.
    pub fn forward_features(&self, features: &Matrix) -> Result<Matrix> {
        self.head.infer(features.clone())
    }

    /// Accumulates head gradients of the batch MSE with dropout off; returns the loss.
    pub fn accumulate_gradients(&mut self, features: &Matrix, targets: &Matrix) -> Result<f64> {
        let (pred, trace) = self.head.forward(features.clone(), self.config.dropout_rate, None)?;
        let loss = mse_loss(&pred, targets)?;
        self.head.backward(&trace, &mse_grad(&pred, targets)?);
        Ok(loss)
    }

    /// One Adam step of the head on a batch of standardized features and targets.
    pub fn train_step(&mut self, features: &Matrix, targets: &Matrix, rng: &mut ChaCha8Rng) -> Result<f64> {
        let (pred, trace) = self
            .head
            .forward(features.clone(), self.config.dropout_rate, Some(rng))?;
        let loss = mse_loss(&pred, targets)?;
        self.head.backward(&trace, &mse_grad(&pred, targets)?);
        let adam = AdamConfig::new(self.config.learning_rate)?;
        self.head.visit_mut(&mut |p| adam_step(p, &adam));
        Ok(loss)
    }
}

/// Only the head is visited: the encoder is shared and frozen.
impl Parameterized for FinetuneModel {
    fn visit_params(&self, f: &mut dyn FnMut(&Parameter)) {
        self.head.visit(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        self.head.visit_mut(f);
    }
}

impl Parameterized for Head {
    fn visit_params(&self, f: &mut dyn FnMut(&Parameter)) {
        self.visit(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        self.visit_mut(f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ILKey;

    fn encoder() -> Arc<EncoderSnapshot> {
        let m = build_pretrain(PretrainConfig::new(Property::Density), (6, 4), 3).unwrap();
        Arc::new(m.export_encoder())
    }

    #[test]
    fn head_input_widths() {
        let enc = encoder();
        let d = build_finetune(enc.clone(), FinetuneConfig::new(Property::Density), 1).unwrap();
        assert_eq!(d.input_width(), 202);
        let v = build_finetune(enc.clone(), FinetuneConfig::new(Property::LnViscosity), 1).unwrap();
        assert_eq!(v.input_width(), 201);
        let mp = build_finetune(enc.clone(), FinetuneConfig::new(Property::MeltingPoint), 1).unwrap();
        assert_eq!(mp.input_width(), 200);

        let mut bad = FinetuneConfig::new(Property::MeltingPoint);
        bad.uses_temperature = true;
        assert!(build_finetune(enc.clone(), bad, 1).is_err());
        let odd = FinetuneConfig::new(Property::Density).with_head_width(75);
        assert!(build_finetune(enc.clone(), odd, 1).is_err());

        let again = build_finetune(enc, FinetuneConfig::new(Property::Density), 1).unwrap();
        assert_eq!(again, d);
    }

    #[test]
    fn zero_variance_pressure_does_not_perturb() {
        let mut m = build_finetune(encoder(), FinetuneConfig::new(Property::Density), 5).unwrap();
        let recs: Vec<PropertyRecord> = (0..5)
            .map(|i| PropertyRecord {
                il: ILKey::new(i, i % 4),
                property: Property::Density,
                temperature: 290.0 + 10.0 * i as f64,
                pressure: 1.0,
                value: 1100.0 + i as f64,
            })
            .collect();
        m.scalers = FinetuneScalers::fit(&recs, m.config()).unwrap();
        let at_1 = m.predict(&[2], &[1], &[300.0], &[1.0]).unwrap();
        let at_15 = m.predict(&[2], &[1], &[300.0], &[1.5]).unwrap();
        assert_eq!(at_1, at_15);
        assert!(m.predict(&[2], &[1], &[f64::NAN], &[1.0]).is_err());
        assert!(m.predict(&[9], &[1], &[300.0], &[1.0]).is_err());
    }

    #[test]
    fn melting_point_ignores_conditions() {
        let m = build_finetune(encoder(), FinetuneConfig::new(Property::MeltingPoint), 5).unwrap();
        let a = m.predict(&[1, 2], &[0, 3], &[], &[]).unwrap();
        let b = m.predict(&[1, 2], &[0, 3], &[f64::NAN, 1.0], &[]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn baselines_differ_by_seed() {
        let cfg = FinetuneConfig::new(Property::LnViscosity);
        let enc_cfg = PretrainConfig::new(Property::Density);
        let a = random_baseline(cfg, enc_cfg, (6, 4), 1).unwrap();
        let b = random_baseline(cfg, enc_cfg, (6, 4), 2).unwrap();
        let ea = a.encoder().encode(&[0, 1], &[2, 3]).unwrap();
        let eb = b.encoder().encode(&[0, 1], &[2, 3]).unwrap();
        assert_ne!(ea, eb);
        let mut frozen = true;
        a.encoder().visit_params(&mut |p| frozen &= p.is_frozen());
        assert!(frozen);
    }
}
