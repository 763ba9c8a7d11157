use std::collections::BTreeSet;

use rayon::prelude::*;

use super::metrics::{metrics, MetricReport};
use super::train::mean_abs_error;
use super::train::{fit, FitSummary, TrainSettings};
use super::{sorted, CvReport, GridPointReport};
use crate::data::{kfold_by_il, validation_split, Dataset, ILKey, Property, PropertyRecord, Scaler};
use crate::error::{Error, Result};
use crate::model::{build_pretrain, PretrainConfig, PretrainModel};
use crate::nn::Matrix;
use crate::seed;

/// A recommender together with the target scaling it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPretrain {
    pub model: PretrainModel,
    pub scaler: Scaler,
    pub fit: FitSummary,
}

impl TrainedPretrain {
    /// Predictions in native units.
    pub fn predict(&self, cation_ids: &[usize], anion_ids: &[usize]) -> Result<Vec<f64>> {
        let z = self.model.forward(cation_ids, anion_ids)?;
        Ok(z.data().iter().map(|&v| self.scaler.inverse(v)).collect())
    }

    pub fn evaluate(&self, records: &[PropertyRecord]) -> Result<MetricReport> {
        let (c, a): (Vec<usize>, Vec<usize>) = records.iter().map(|r| (r.il.cation, r.il.anion)).unzip();
        let pred = self.predict(&c, &a)?;
        let target: Vec<f64> = records.iter().map(|r| r.value).collect();
        let ils: BTreeSet<ILKey> = records.iter().map(|r| r.il).collect();
        Ok(metrics(&pred, &target)?.with_ils(ils.len()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainOutcome {
    pub trained: TrainedPretrain,
    pub config: PretrainConfig,
    pub report: CvReport,
}

fn check_reference_state(records: &[PropertyRecord]) -> Result<()> {
    let first = records.first().ok_or(Error::EmptyBatch)?;
    if records
        .iter()
        .any(|r| r.temperature != first.temperature || r.pressure != first.pressure)
    {
        return Err(Error::Config(
            "pre-training records must share a single temperature and pressure".into(),
        ));
    }
    Ok(())
}

fn gather(records: &[PropertyRecord], rows: &[usize], scaler: &Scaler) -> (Vec<usize>, Vec<usize>, Matrix) {
    let c = rows.iter().map(|&i| records[i].il.cation).collect();
    let a = rows.iter().map(|&i| records[i].il.anion).collect();
    let y = rows
        .iter()
        .map(|&i| scaler.transform(records[i].value))
        .collect::<Vec<_>>();
    (c, a, Matrix::column(&y))
}

/// Trains one recommender on `records` with early stopping on an IL-grouped
/// validation slice. The target scaler is fitted on the non-validation rows.
pub fn train_pretrain(
    records: &[PropertyRecord],
    vocab_sizes: (usize, usize),
    config: PretrainConfig,
    settings: &TrainSettings,
    seed: u64,
) -> Result<TrainedPretrain> {
    settings.validate()?;
    check_reference_state(records)?;
    if let Some(r) = records.iter().find(|r| r.property != config.property) {
        return Err(Error::Config(format!(
            "{} record in a {} pre-training set",
            r.property, config.property
        )));
    }
    let ils: BTreeSet<ILKey> = records.iter().map(|r| r.il).collect();
    let (_, val_ils) = validation_split(&ils, settings.validation_fraction, seed::derive(seed, 1));
    let (val_rows, train_rows): (Vec<usize>, Vec<usize>) =
        (0..records.len()).partition(|&i| val_ils.contains(&records[i].il));
    let train_values: Vec<f64> = train_rows.iter().map(|&i| records[i].value).collect();
    let scaler = if config.robust_scaling {
        Scaler::fit_robust(&train_values)?
    } else {
        Scaler::fit(&train_values)?
    };
    let (tc, ta, ty) = gather(records, &train_rows, &scaler);
    let monitor_rows = if val_rows.is_empty() { &train_rows } else { &val_rows };
    let (vc, va, vy) = gather(records, monitor_rows, &scaler);

    let mut model = build_pretrain(config, vocab_sizes, seed::derive(seed, 2))?;
    let summary = fit(
        &mut model,
        train_rows.len(),
        settings,
        seed::derive(seed, 3),
        |m, batch, rng| {
            let c: Vec<usize> = batch.iter().map(|&i| tc[i]).collect();
            let a: Vec<usize> = batch.iter().map(|&i| ta[i]).collect();
            let y = ty.select_rows(batch);
            m.train_step(&c, &a, &y, rng)
        },
        |m| mean_abs_error(&m.forward(&vc, &va)?, &vy),
    )?;
    Ok(TrainedPretrain {
        model,
        scaler,
        fit: summary,
    })
}

/// Cross-validated scores of every grid point on the same IL-grouped folds.
pub fn pretrain_grid(dataset: &Dataset, grid: &[PretrainConfig], settings: &TrainSettings) -> Result<CvReport> {
    let property = grid_property(grid)?;
    let records = sorted(dataset.filter_property(property).records);
    check_reference_state(&records)?;
    let vocab = (dataset.cations.len(), dataset.anions.len());
    let plan = kfold_by_il(&records, settings.folds, seed::derive(settings.seed, 10))?;
    let mut points = Vec::with_capacity(grid.len());
    for config in grid {
        let folds = (0..settings.folds)
            .into_par_iter()
            .map(|f| {
                let (train, test) = plan.split(&records, f);
                let train: Vec<PropertyRecord> = train.iter().map(|&i| records[i]).collect();
                let test: Vec<PropertyRecord> = test.iter().map(|&i| records[i]).collect();
                let seed = seed::derive_all(settings.seed, &[11, f as u64]);
                train_pretrain(&train, vocab, *config, settings, seed)?.evaluate(&test)
            })
            .collect::<Result<Vec<_>>>()?;
        points.push(GridPointReport {
            label: config.label(),
            mean: MetricReport::mean(&folds)?,
            folds,
        });
    }
    CvReport::from_points(points)
}

/// Grid search by cross-validated MAE, then a final fit of the best grid point
/// on every record.
pub fn pretrain(dataset: &Dataset, grid: &[PretrainConfig], settings: &TrainSettings) -> Result<PretrainOutcome> {
    let report = pretrain_grid(dataset, grid, settings)?;
    let config = grid[report.best];
    let records = sorted(dataset.filter_property(config.property).records);
    let vocab = (dataset.cations.len(), dataset.anions.len());
    let trained = train_pretrain(&records, vocab, config, settings, seed::derive(settings.seed, 12))?;
    Ok(PretrainOutcome {
        trained,
        config,
        report,
    })
}

fn grid_property(grid: &[PretrainConfig]) -> Result<Property> {
    let first = grid
        .first()
        .ok_or_else(|| Error::Config("empty hyperparameter grid".into()))?;
    if grid.iter().any(|c| c.property != first.property) {
        return Err(Error::Config("grid points target different properties".into()));
    }
    Ok(first.property)
}
