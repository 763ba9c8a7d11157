//! The pre-training recommender: per-ion embeddings, a residual branch per ion
//! role, concatenation, and a regression head predicting one property at the
//! reference temperature and pressure.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::blocks::{check_head_width, Branch, BranchTrace, Head, HeadTrace};
use crate::data::Property;
use crate::error::{Error, Result};
use crate::nn::{
    adam_step, concat_cols, embedding_backward, embedding_lookup, split_cols, validate_rate, AdamConfig, Loss, Matrix,
    Parameter, Parameterized,
};
use crate::seed;

pub const EMBEDDING_DIM: usize = 100;
pub const BRANCH_WIDTHS: [usize; 3] = [100, 200, 300];
pub const BLOCKS_PER_BRANCH: [usize; 2] = [1, 2];
pub const PRETRAIN_HEAD_WIDTHS: [usize; 4] = [50, 100, 200, 400];
const EMBEDDING_INIT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainConfig {
    pub embedding_dim: usize,
    pub branch_width: usize,
    pub blocks_per_branch: usize,
    pub head_width: usize,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub property: Property,
    pub loss: Loss,
    /// Scale targets by median and interquartile range instead of mean and
    /// standard deviation.
    pub robust_scaling: bool,
}

impl PretrainConfig {
    pub fn new(property: Property) -> Self {
        Self {
            embedding_dim: EMBEDDING_DIM,
            branch_width: 100,
            blocks_per_branch: 1,
            head_width: 50,
            dropout_rate: 0.05,
            learning_rate: 0.001,
            property,
            loss: Loss::Huber { delta: 0.5 },
            robust_scaling: true,
        }
    }

    pub fn with_widths(mut self, branch_width: usize, blocks_per_branch: usize, head_width: usize) -> Self {
        self.branch_width = branch_width;
        self.blocks_per_branch = blocks_per_branch;
        self.head_width = head_width;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim != EMBEDDING_DIM {
            return Err(Error::Config(format!(
                "embedding dimension must be {EMBEDDING_DIM}, got {}",
                self.embedding_dim
            )));
        }
        if self.branch_width == 0 {
            return Err(Error::Config("branch width must be positive".into()));
        }
        check_head_width(self.head_width)?;
        validate_rate(self.dropout_rate)?;
        AdamConfig::new(self.learning_rate)?;
        self.loss.validate()
    }

    /// The full hyperparameter grid for one property.
    pub fn full_grid(property: Property) -> Vec<PretrainConfig> {
        let mut grid = Vec::new();
        for w in BRANCH_WIDTHS {
            for b in BLOCKS_PER_BRANCH {
                for h in PRETRAIN_HEAD_WIDTHS {
                    grid.push(Self::new(property).with_widths(w, b, h));
                }
            }
        }
        grid
    }

    pub fn label(&self) -> String {
        format!(
            "branch={} blocks={} head={}",
            self.branch_width, self.blocks_per_branch, self.head_width
        )
    }
}

/// Embedding tables and the two branches: everything up to and including the
/// concatenation.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub cation_table: Parameter,
    pub anion_table: Parameter,
    pub cation_branch: Branch,
    pub anion_branch: Branch,
}

#[derive(Debug, Clone)]
pub(crate) struct EncoderTrace {
    cation_ids: Vec<usize>,
    anion_ids: Vec<usize>,
    cation: BranchTrace,
    anion: BranchTrace,
}

impl Encoder {
    fn new<R: Rng + ?Sized>(config: &PretrainConfig, vocab: (usize, usize), rng: &mut R) -> Self {
        let mut table = |rows: usize| {
            let data = (0..rows * config.embedding_dim)
                .map(|_| rng.random_range(-EMBEDDING_INIT..=EMBEDDING_INIT))
                .collect();
            Parameter::new(Matrix::from_vec(rows, config.embedding_dim, data).expect("sized"))
        };
        let cation_table = table(vocab.0);
        let anion_table = table(vocab.1);
        let cation_branch = Branch::new(config.embedding_dim, config.branch_width, config.blocks_per_branch, rng);
        let anion_branch = Branch::new(config.embedding_dim, config.branch_width, config.blocks_per_branch, rng);
        Self {
            cation_table,
            anion_table,
            cation_branch,
            anion_branch,
        }
    }

    pub fn vocab_sizes(&self) -> (usize, usize) {
        (self.cation_table.shape().0, self.anion_table.shape().0)
    }

    /// Width of the concatenated representation.
    pub fn output_width(&self) -> usize {
        self.cation_branch.width() + self.anion_branch.width()
    }

    pub(crate) fn forward(
        &self,
        cation_ids: &[usize],
        anion_ids: &[usize],
        rate: f64,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Matrix, EncoderTrace)> {
        if cation_ids.len() != anion_ids.len() {
            return Err(Error::Dimension(format!(
                "{} cation ids vs {} anion ids",
                cation_ids.len(),
                anion_ids.len()
            )));
        }
        let ec = embedding_lookup(&self.cation_table, cation_ids)?;
        let ea = embedding_lookup(&self.anion_table, anion_ids)?;
        let cation = self.cation_branch.forward(ec, rate, rng.as_deref_mut())?;
        let anion = self.anion_branch.forward(ea, rate, rng)?;
        let z = concat_cols(&[cation.output(), anion.output()])?;
        Ok((
            z,
            EncoderTrace {
                cation_ids: cation_ids.to_vec(),
                anion_ids: anion_ids.to_vec(),
                cation,
                anion,
            },
        ))
    }

    /// Dropout-free representation of each pair, `B × 2W`.
    pub fn encode(&self, cation_ids: &[usize], anion_ids: &[usize]) -> Result<Matrix> {
        Ok(self.forward(cation_ids, anion_ids, 0.0, None)?.0)
    }

    /// Branch output for every cation id, in id order.
    pub fn cation_features(&self) -> Result<Matrix> {
        self.cation_branch.infer(self.cation_table.value.clone())
    }

    pub fn anion_features(&self) -> Result<Matrix> {
        self.anion_branch.infer(self.anion_table.value.clone())
    }

    pub(crate) fn backward(&mut self, trace: &EncoderTrace, grad_out: &Matrix) -> Result<()> {
        let widths = [self.cation_branch.width(), self.anion_branch.width()];
        let parts = split_cols(grad_out, &widths)?;
        let gc = self.cation_branch.backward(&trace.cation, &parts[0]);
        let ga = self.anion_branch.backward(&trace.anion, &parts[1]);
        embedding_backward(&mut self.cation_table, &trace.cation_ids, &gc);
        embedding_backward(&mut self.anion_table, &trace.anion_ids, &ga);
        Ok(())
    }
}

impl Parameterized for Encoder {
    fn visit_params(&self, f: &mut dyn FnMut(&Parameter)) {
        f(&self.cation_table);
        f(&self.anion_table);
        self.cation_branch.visit(f);
        self.anion_branch.visit(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        f(&mut self.cation_table);
        f(&mut self.anion_table);
        self.cation_branch.visit_mut(f);
        self.anion_branch.visit_mut(f);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainModel {
    config: PretrainConfig,
    pub encoder: Encoder,
    pub head: Head,
}

#[derive(Debug, Clone)]
pub struct PretrainTrace {
    encoder: EncoderTrace,
    head: HeadTrace,
}

/// Seeded construction of a fresh recommender for vocabularies of `(cations, anions)`.
pub fn build_pretrain(config: PretrainConfig, vocab_sizes: (usize, usize), seed: u64) -> Result<PretrainModel> {
    config.validate()?;
    if vocab_sizes.0 == 0 || vocab_sizes.1 == 0 {
        return Err(Error::Config("vocabularies must be non-empty".into()));
    }
    let mut rng = seed::rng(seed);
    let encoder = Encoder::new(&config, vocab_sizes, &mut rng);
    let head = Head::new(encoder.output_width(), config.head_width, &mut rng)?;
    Ok(PretrainModel { config, encoder, head })
}

impl PretrainModel {
    pub fn config(&self) -> &PretrainConfig {
        &self.config
    }

    /// Inference on scaled targets; dropout off.
    pub fn forward(&self, cation_ids: &[usize], anion_ids: &[usize]) -> Result<Matrix> {
        let z = self.encoder.encode(cation_ids, anion_ids)?;
        self.head.infer(z)
    }

    /// Training-mode forward. Dropout is applied only when `rng` is given.
    pub fn forward_train(
        &self,
        cation_ids: &[usize],
        anion_ids: &[usize],
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Matrix, PretrainTrace)> {
        let rate = self.config.dropout_rate;
        let (z, encoder) = self.encoder.forward(cation_ids, anion_ids, rate, rng.as_deref_mut())?;
        let (y, head) = self.head.forward(z, rate, rng)?;
        Ok((y, PretrainTrace { encoder, head }))
    }

    /// Accumulates parameter gradients for `∂loss/∂output = grad_out`.
    pub fn backward(&mut self, trace: &PretrainTrace, grad_out: &Matrix) -> Result<()> {
        let gz = self.head.backward(&trace.head, grad_out);
        self.encoder.backward(&trace.encoder, &gz)
    }

    /// One optimizer step on a batch under the configured loss; returns the batch loss.
    pub fn train_step(
        &mut self,
        cation_ids: &[usize],
        anion_ids: &[usize],
        targets: &Matrix,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64> {
        let (pred, trace) = self.forward_train(cation_ids, anion_ids, Some(rng))?;
        let loss = self.config.loss.value(&pred, targets)?;
        let g = self.config.loss.grad(&pred, targets)?;
        self.backward(&trace, &g)?;
        let adam = AdamConfig::new(self.config.learning_rate)?;
        self.visit_params_mut(&mut |p| adam_step(p, &adam));
        Ok(loss)
    }

    /// Copy of the encoder with every parameter frozen.
    pub fn export_encoder(&self) -> EncoderSnapshot {
        let mut encoder = self.encoder.clone();
        encoder.freeze_all();
        EncoderSnapshot {
            encoder,
            config: self.config,
            source: self.config.property,
        }
    }
}

impl Parameterized for PretrainModel {
    fn visit_params(&self, f: &mut dyn FnMut(&Parameter)) {
        self.encoder.visit_params(f);
        self.head.visit(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        self.encoder.visit_params_mut(f);
        self.head.visit_mut(f);
    }
}

/// A frozen, read-only encoder exported from a trained recommender.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderSnapshot {
    encoder: Encoder,
    config: PretrainConfig,
    source: Property,
}

impl EncoderSnapshot {
    pub(crate) fn from_parts(mut encoder: Encoder, config: PretrainConfig, source: Property) -> Self {
        encoder.freeze_all();
        Self {
            encoder,
            config,
            source,
        }
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn config(&self) -> &PretrainConfig {
        &self.config
    }

    /// Property the encoder was pre-trained on.
    pub fn source(&self) -> Property {
        self.source
    }

    pub fn width(&self) -> usize {
        self.encoder.output_width()
    }

    pub fn vocab_sizes(&self) -> (usize, usize) {
        self.encoder.vocab_sizes()
    }

    pub fn encode(&self, cation_ids: &[usize], anion_ids: &[usize]) -> Result<Matrix> {
        self.encoder.encode(cation_ids, anion_ids)
    }

    pub fn visit_params(&self, f: &mut dyn FnMut(&Parameter)) {
        self.encoder.visit_params(f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_census() {
        let cfg = PretrainConfig::new(Property::Density).with_widths(100, 1, 50);
        let model = build_pretrain(cfg, (3, 2), 1).unwrap();
        // tables 5·100; each branch (100·100+100)+(100·100+100); head (200·50+50)+(50·25+25)+(25+1)
        let expected = 5 * 100 + 2 * (10_100 + 10_100) + (10_050 + 1_275 + 26);
        assert_eq!(model.param_count(), expected);
        let mut per_branch = [0, 0];
        model.encoder.cation_branch.visit(&mut |p| per_branch[0] += p.len());
        model.encoder.anion_branch.visit(&mut |p| per_branch[1] += p.len());
        assert_eq!(per_branch[0], per_branch[1]);
    }

    #[test]
    fn config_validation() {
        let mut cfg = PretrainConfig::new(Property::Density);
        cfg.embedding_dim = 64;
        assert!(matches!(build_pretrain(cfg, (2, 2), 0), Err(Error::Config(_))));
        let odd = PretrainConfig::new(Property::Density).with_widths(100, 1, 51);
        assert!(build_pretrain(odd, (2, 2), 0).is_err());
        assert!(build_pretrain(PretrainConfig::new(Property::Density), (0, 2), 0).is_err());
        assert_eq!(PretrainConfig::full_grid(Property::Density).len(), 24);
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let cfg = PretrainConfig::new(Property::HeatCapacity);
        let a = build_pretrain(cfg, (4, 3), 9).unwrap();
        let b = build_pretrain(cfg, (4, 3), 9).unwrap();
        assert_eq!(a, b);
        let c = build_pretrain(cfg, (4, 3), 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_network_predicts_zero() {
        let mut m = build_pretrain(PretrainConfig::new(Property::Density), (4, 3), 2).unwrap();
        m.visit_params_mut(&mut |p| p.value.fill(0.0));
        let out = m.forward(&[0, 1, 3], &[2, 0, 1]).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
        let snap = m.export_encoder();
        assert!(snap.encode(&[0, 3], &[1, 2]).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn out_of_vocabulary_ids() {
        let m = build_pretrain(PretrainConfig::new(Property::Density), (4, 3), 2).unwrap();
        assert!(matches!(
            m.forward(&[4], &[0]),
            Err(Error::OutOfVocabulary { id: 4, size: 4 })
        ));
        assert!(matches!(
            m.forward(&[0], &[3]),
            Err(Error::OutOfVocabulary { id: 3, size: 3 })
        ));
        assert!(m.forward(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn batch_equivariance_and_independence() {
        let m = build_pretrain(PretrainConfig::new(Property::Density), (10, 7), 4).unwrap();
        let cs: Vec<usize> = (0..64).map(|i| (i * 7) % 10).collect();
        let an: Vec<usize> = (0..64).map(|i| (i * 3) % 7).collect();
        let full = m.forward(&cs, &an).unwrap();
        let rev_c: Vec<usize> = cs.iter().rev().copied().collect();
        let rev_a: Vec<usize> = an.iter().rev().copied().collect();
        let rev = m.forward(&rev_c, &rev_a).unwrap();
        for i in 0..64 {
            assert_eq!(full.get(i, 0), rev.get(63 - i, 0));
            let single = m.forward(&cs[i..=i], &an[i..=i]).unwrap();
            assert!((single.get(0, 0) - full.get(i, 0)).abs() < 1e-12);
        }
    }

    #[test]
    fn snapshot_matches_concatenation_tap() {
        let mut m = build_pretrain(PretrainConfig::new(Property::Density), (5, 4), 6).unwrap();
        let snap = m.export_encoder();
        assert_eq!(snap.width(), 200);
        let (c, a) = ([0, 4, 2], [3, 1, 0]);
        let (_, trace) = m.forward_train(&c, &a, None).unwrap();
        let tap = concat_cols(&[trace.encoder.cation.output(), trace.encoder.anion.output()]).unwrap();
        assert_eq!(snap.encode(&c, &a).unwrap(), tap);

        let mut frozen = true;
        snap.visit_params(&mut |p| frozen &= p.is_frozen());
        assert!(frozen);

        let before = snap.clone();
        m.visit_params_mut(&mut |p| p.value.fill(1.0));
        assert_eq!(snap, before);
        assert_eq!(snap.encode(&c, &a).unwrap(), snap.encode(&c, &a).unwrap());
    }

    #[test]
    fn per_ion_features_agree_with_pair_encoding() {
        let m = build_pretrain(
            PretrainConfig::new(Property::Density).with_widths(100, 2, 50),
            (6, 5),
            8,
        )
        .unwrap();
        let snap = m.export_encoder();
        let cf = snap.encoder().cation_features().unwrap();
        let af = snap.encoder().anion_features().unwrap();
        let z = snap.encode(&[5, 1], &[0, 4]).unwrap();
        for (row, (c, a)) in [(5usize, 0usize), (1, 4)].into_iter().enumerate() {
            for j in 0..100 {
                assert!((z.get(row, j) - cf.get(c, j)).abs() < 1e-12);
                assert!((z.get(row, 100 + j) - af.get(a, j)).abs() < 1e-12);
            }
        }
    }
}
