use std::collections::BTreeSet;
use std::sync::Arc;

use serde::Serialize;

use super::finetune::{finetune_cv, finetune_head_grid};
use super::metrics::MetricReport;
use super::train::TrainSettings;
use crate::data::{Dataset, Property};
use crate::error::{Error, Result};
use crate::model::EncoderSnapshot;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferCell {
    pub source: Property,
    pub target: Property,
    /// Grid point chosen by cross-validation.
    pub label: String,
    pub folds: Vec<MetricReport>,
    pub mean: MetricReport,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferMatrix {
    pub cells: Vec<TransferCell>,
}

impl TransferMatrix {
    pub fn get(&self, source: Property, target: Property) -> Option<&TransferCell> {
        self.cells.iter().find(|c| c.source == source && c.target == target)
    }

    pub fn sources(&self) -> Vec<Property> {
        self.cells
            .iter()
            .map(|c| c.source)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn targets(&self) -> Vec<Property> {
        self.cells
            .iter()
            .map(|c| c.target)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

/// Fine-tunes every target present in `experimental` on top of every source
/// encoder. All cells of one target share the same folds.
pub fn transfer_matrix(
    encoders: &[Arc<EncoderSnapshot>],
    experimental: &Dataset,
    head_widths: &[usize],
    settings: &TrainSettings,
) -> Result<TransferMatrix> {
    let sources: BTreeSet<Property> = encoders.iter().map(|e| e.source()).collect();
    if sources.len() != encoders.len() {
        return Err(Error::Config("each source property may appear only once".into()));
    }
    let targets = experimental.properties();
    let mut cells = Vec::new();
    for encoder in encoders {
        for &target in &targets {
            let report = finetune_cv(
                encoder.clone(),
                experimental,
                &finetune_head_grid(target, head_widths),
                settings,
            )?;
            let best = report.best_point().clone();
            cells.push(TransferCell {
                source: encoder.source(),
                target,
                label: best.label,
                folds: best.folds,
                mean: best.mean,
                within: encoder.source() == target,
            });
        }
    }
    Ok(TransferMatrix { cells })
}
