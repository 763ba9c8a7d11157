use std::collections::HashSet;
use std::sync::Arc;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::finetune::{finetune_cv, finetune_head_grid};
use super::metrics::MetricReport;
use super::pretrain::train_pretrain;
use super::sorted;
use super::train::TrainSettings;
use crate::data::{ILKey, Property};
use crate::error::{Error, Result};
use crate::model::PretrainConfig;
use crate::seed;
use crate::synth::Benchmark;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    /// Anions sampled per cation, one pre-training run each.
    pub fractions: Vec<usize>,
    /// ILs kept out of every pre-training sample to score the recommender.
    pub holdout_ils: usize,
    pub source: Property,
    pub branch_width: usize,
    pub blocks_per_branch: usize,
    pub head_width: usize,
    pub finetune_head_widths: Vec<usize>,
    pub targets: Vec<Property>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            fractions: vec![1, 5, 10, 20, 35, 50],
            holdout_ils: 500,
            source: Property::Density,
            branch_width: 100,
            blocks_per_branch: 1,
            head_width: 50,
            finetune_head_widths: vec![50],
            targets: Property::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub anions_per_cation: usize,
    pub pretrain_ils: usize,
    /// Recommender scored on the held-out ILs.
    pub pretrain: MetricReport,
    /// Mean cross-validated fine-tuning metrics per target.
    pub finetune: Vec<(Property, MetricReport)>,
}

/// Pre-trains on growing stratified samples and fine-tunes every target on
/// each resulting encoder.
pub fn size_sweep(bench: &Benchmark, sweep: &SweepSettings, settings: &TrainSettings) -> Result<Vec<SweepPoint>> {
    if sweep.fractions.is_empty() {
        return Err(Error::Config("no sweep fractions".into()));
    }
    if let Some(&f) = sweep.fractions.iter().find(|&&f| f == 0 || f > bench.plan.num_anions) {
        return Err(Error::Config(format!(
            "{f} anions per cation is outside 1..={}",
            bench.plan.num_anions
        )));
    }
    let config =
        PretrainConfig::new(sweep.source).with_widths(sweep.branch_width, sweep.blocks_per_branch, sweep.head_width);
    config.validate()?;

    let measured = bench.experimental_ils();
    let pool: Vec<ILKey> = (0..bench.plan.num_cations)
        .flat_map(|c| (0..bench.plan.num_anions).map(move |a| ILKey::new(c, a)))
        .filter(|il| !measured.contains(il))
        .collect();
    if sweep.holdout_ils >= pool.len() {
        return Err(Error::Config("hold-out set would consume the whole universe".into()));
    }
    let mut rng = seed::rng(seed::derive(settings.seed, 30));
    let mut picks = sample(&mut rng, pool.len(), sweep.holdout_ils).into_vec();
    picks.sort_unstable();
    let holdout: Vec<ILKey> = picks.into_iter().map(|i| pool[i]).collect();
    let holdout_set: HashSet<ILKey> = holdout.iter().copied().collect();
    let holdout_records = bench.oracle.simulate(&holdout, sweep.source, 1)?;

    let vocab = (bench.plan.num_cations, bench.plan.num_anions);
    let mut points = Vec::with_capacity(sweep.fractions.len());
    for &fraction in &sweep.fractions {
        let pairs = bench.pretrain_pairs(fraction, &holdout_set)?;
        let records = sorted(bench.simulated(&pairs, sweep.source)?.records);
        let trained = train_pretrain(&records, vocab, config, settings, seed::derive(settings.seed, 31))?;
        let pretrain = trained.evaluate(&holdout_records)?;
        let encoder = Arc::new(trained.model.export_encoder());
        let mut finetune = Vec::new();
        for &target in &sweep.targets {
            let grid = finetune_head_grid(target, &sweep.finetune_head_widths);
            let report = finetune_cv(encoder.clone(), &bench.experimental, &grid, settings)?;
            finetune.push((target, report.best_point().mean));
        }
        points.push(SweepPoint {
            anions_per_cation: fraction,
            pretrain_ils: pairs.len(),
            pretrain,
            finetune,
        });
    }
    Ok(points)
}
