//! Training and evaluation: grid search with IL-grouped cross-validation,
//! fine-tuning, the transfer matrix, the pre-training size sweep, the
//! surface-tension correlation audit and full combinatorial prediction.

mod audit;
mod finetune;
mod full_space;
mod metrics;
mod pretrain;
mod report;
mod sweep;
mod train;
mod transfer;

pub use audit::{audit_models, correlation_audit, AuditFit};
pub use finetune::{encode_records, finetune, finetune_cv, finetune_head_grid, train_finetune, FinetuneOutcome};
pub use full_space::full_space_predict;
pub use metrics::{metrics, MetricReport};
pub use pretrain::{pretrain, pretrain_grid, train_pretrain, PretrainOutcome, TrainedPretrain};
pub use report::{cv_summary, sweep_summary, transfer_summary, write_cv_csv, write_sweep_csv, write_transfer_csv};
pub use sweep::{size_sweep, SweepPoint, SweepSettings};
pub use train::{fit, FitSummary, TrainSettings};
pub use transfer::{transfer_matrix, TransferCell, TransferMatrix};

use serde::Serialize;

use crate::data::PropertyRecord;
use crate::error::{Error, Result};

/// Per-fold and mean metrics of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPointReport {
    pub label: String,
    pub folds: Vec<MetricReport>,
    pub mean: MetricReport,
}

/// Cross-validation results of a whole grid; `best` indexes `points`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub points: Vec<GridPointReport>,
    pub best: usize,
}

impl CvReport {
    /// Lowest mean MAE wins; ties go to the higher mean R², then the earlier point.
    pub(crate) fn from_points(points: Vec<GridPointReport>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("empty hyperparameter grid".into()));
        }
        let mut best = 0;
        for (i, p) in points.iter().enumerate().skip(1) {
            let b = &points[best].mean;
            if p.mean.mae < b.mae || (p.mean.mae == b.mae && p.mean.r2 > b.r2) {
                best = i;
            }
        }
        Ok(Self { points, best })
    }

    pub fn best_point(&self) -> &GridPointReport {
        &self.points[self.best]
    }
}

/// Sorts records into a fixed order so results do not depend on input row order.
pub fn canonical_order(records: &mut [PropertyRecord]) {
    records.sort_by(|a, b| {
        a.il.cmp(&b.il)
            .then(a.property.cmp(&b.property))
            .then(a.temperature.total_cmp(&b.temperature))
            .then(a.pressure.total_cmp(&b.pressure))
            .then(a.value.total_cmp(&b.value))
    });
}

pub(crate) fn sorted(records: impl IntoIterator<Item = PropertyRecord>) -> Vec<PropertyRecord> {
    let mut v: Vec<PropertyRecord> = records.into_iter().collect();
    canonical_order(&mut v);
    v
}
