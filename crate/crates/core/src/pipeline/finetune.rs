use std::collections::BTreeSet;
use std::sync::Arc;

use rayon::prelude::*;

use super::metrics::{metrics, MetricReport};
use super::train::mean_abs_error;
use super::train::{fit, FitSummary, TrainSettings};
use super::{sorted, CvReport, GridPointReport};
use crate::data::{kfold_by_il, validation_split, Dataset, ILKey, Property, PropertyRecord};
use crate::error::{Error, Result};
use crate::model::{build_finetune, EncoderSnapshot, FinetuneConfig, FinetuneModel, FinetuneScalers};
use crate::nn::Matrix;
use crate::seed;

const ENCODE_CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneOutcome {
    pub model: FinetuneModel,
    pub fit: FitSummary,
    pub report: CvReport,
}

/// Frozen-encoder output for every record, computed once and reused across
/// folds, grid points and epochs.
pub fn encode_records(encoder: &EncoderSnapshot, records: &[PropertyRecord]) -> Result<Matrix> {
    let mut out = Matrix::zeros(records.len(), encoder.width());
    for (k, chunk) in records.chunks(ENCODE_CHUNK).enumerate() {
        let c: Vec<usize> = chunk.iter().map(|r| r.il.cation).collect();
        let a: Vec<usize> = chunk.iter().map(|r| r.il.anion).collect();
        let z = encoder.encode(&c, &a)?;
        let start = k * ENCODE_CHUNK * encoder.width();
        out.data_mut()[start..start + z.data().len()].copy_from_slice(z.data());
    }
    Ok(out)
}

/// Conditions of `rows`, read only when `config` uses them.
fn conditions(records: &[PropertyRecord], rows: &[usize], config: &FinetuneConfig) -> (Vec<f64>, Vec<f64>) {
    let t = if config.uses_temperature {
        rows.iter().map(|&i| records[i].temperature).collect()
    } else {
        Vec::new()
    };
    let p = if config.uses_pressure {
        rows.iter().map(|&i| records[i].pressure).collect()
    } else {
        Vec::new()
    };
    (t, p)
}

fn features(
    model: &FinetuneModel,
    records: &[PropertyRecord],
    encoded: &Matrix,
    rows: &[usize],
) -> Result<(Matrix, Matrix)> {
    let (t, p) = conditions(records, rows, model.config());
    let x = model.features(&encoded.select_rows(rows), &t, &p)?;
    let y: Vec<f64> = rows
        .iter()
        .map(|&i| model.scalers.target.transform(records[i].value))
        .collect();
    Ok((x, Matrix::column(&y)))
}

/// Trains a head on `rows` of pre-encoded `records`. Scalers are fitted on
/// these rows only; an IL-grouped slice of them drives early stopping.
pub fn train_finetune(
    encoder: Arc<EncoderSnapshot>,
    records: &[PropertyRecord],
    encoded: &Matrix,
    rows: &[usize],
    config: FinetuneConfig,
    settings: &TrainSettings,
    seed: u64,
) -> Result<(FinetuneModel, FitSummary)> {
    settings.validate()?;
    if rows.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if let Some(&i) = rows.iter().find(|&&i| records[i].property != config.property) {
        return Err(Error::Config(format!(
            "{} record in a {} fine-tuning set",
            records[i].property, config.property
        )));
    }
    let ils: BTreeSet<ILKey> = rows.iter().map(|&i| records[i].il).collect();
    let (_, val_ils) = validation_split(&ils, settings.validation_fraction, seed::derive(seed, 1));
    let (val_rows, fit_rows): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| val_ils.contains(&records[i].il));

    let mut model = build_finetune(encoder, config, seed::derive(seed, 2))?;
    let fold_records: Vec<PropertyRecord> = rows.iter().map(|&i| records[i]).collect();
    model.scalers = FinetuneScalers::fit(&fold_records, &config)?;
    let (x, y) = features(&model, records, encoded, &fit_rows)?;
    let monitor_rows = if val_rows.is_empty() { &fit_rows } else { &val_rows };
    let (vx, vy) = features(&model, records, encoded, monitor_rows)?;
    let summary = fit(
        &mut model,
        fit_rows.len(),
        settings,
        seed::derive(seed, 3),
        |m, batch, rng| m.train_step(&x.select_rows(batch), &y.select_rows(batch), rng),
        |m| mean_abs_error(&m.forward_features(&vx)?, &vy),
    )?;
    Ok((model, summary))
}

fn evaluate(
    model: &FinetuneModel,
    records: &[PropertyRecord],
    encoded: &Matrix,
    rows: &[usize],
) -> Result<MetricReport> {
    let (t, p) = conditions(records, rows, model.config());
    let pred = model.predict_encoded(&encoded.select_rows(rows), &t, &p)?;
    let target: Vec<f64> = rows.iter().map(|&i| records[i].value).collect();
    let ils: BTreeSet<ILKey> = rows.iter().map(|&i| records[i].il).collect();
    Ok(metrics(&pred, &target)?.with_ils(ils.len()))
}

fn grid_property(grid: &[FinetuneConfig]) -> Result<Property> {
    let first = grid
        .first()
        .ok_or_else(|| Error::Config("empty hyperparameter grid".into()))?;
    if grid.iter().any(|c| c.property != first.property) {
        return Err(Error::Config("grid points target different properties".into()));
    }
    Ok(first.property)
}

/// The default head-width grid for `property`, restricted to `widths`.
pub fn finetune_head_grid(property: Property, widths: &[usize]) -> Vec<FinetuneConfig> {
    widths
        .iter()
        .map(|&w| FinetuneConfig::new(property).with_head_width(w))
        .collect()
}

struct Prepared {
    records: Vec<PropertyRecord>,
    encoded: Matrix,
}

fn prepare(encoder: &EncoderSnapshot, dataset: &Dataset, property: Property) -> Result<Prepared> {
    let records = sorted(dataset.filter_property(property).records);
    if records.is_empty() {
        return Err(Error::Config(format!("no {property} records to fine-tune on")));
    }
    let encoded = encode_records(encoder, &records)?;
    Ok(Prepared { records, encoded })
}

fn cv(
    encoder: &Arc<EncoderSnapshot>,
    data: &Prepared,
    grid: &[FinetuneConfig],
    settings: &TrainSettings,
) -> Result<CvReport> {
    settings.validate()?;
    let property = grid_property(grid)?;
    let plan = kfold_by_il(
        &data.records,
        settings.folds,
        seed::derive_all(settings.seed, &[20, property as u64]),
    )?;
    let mut points = Vec::with_capacity(grid.len());
    for config in grid {
        let folds = (0..settings.folds)
            .into_par_iter()
            .map(|f| {
                let (train, test) = plan.split(&data.records, f);
                let seed = seed::derive_all(settings.seed, &[21, property as u64, f as u64]);
                let (model, _) = train_finetune(
                    encoder.clone(),
                    &data.records,
                    &data.encoded,
                    &train,
                    *config,
                    settings,
                    seed,
                )?;
                evaluate(&model, &data.records, &data.encoded, &test)
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

/// Cross-validated scores of every grid point; no final model is trained.
pub fn finetune_cv(
    encoder: Arc<EncoderSnapshot>,
    dataset: &Dataset,
    grid: &[FinetuneConfig],
    settings: &TrainSettings,
) -> Result<CvReport> {
    let data = prepare(&encoder, dataset, grid_property(grid)?)?;
    cv(&encoder, &data, grid, settings)
}

/// Grid search by cross-validated MAE with the encoder frozen throughout, then
/// a final head trained on every record.
pub fn finetune(
    encoder: Arc<EncoderSnapshot>,
    dataset: &Dataset,
    grid: &[FinetuneConfig],
    settings: &TrainSettings,
) -> Result<FinetuneOutcome> {
    let data = prepare(&encoder, dataset, grid_property(grid)?)?;
    let report = cv(&encoder, &data, grid, settings)?;
    let config = grid[report.best];
    let rows: Vec<usize> = (0..data.records.len()).collect();
    let seed = seed::derive_all(settings.seed, &[22, config.property as u64]);
    let (model, fit) = train_finetune(encoder, &data.records, &data.encoded, &rows, config, settings, seed)?;
    Ok(FinetuneOutcome { model, fit, report })
}
