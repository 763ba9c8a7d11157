//! Vocabularies, records, sampling, leakage exclusion and IL-grouped folds.

mod folds;
mod property;
mod records;
mod sampling;
mod scaler;
mod vocab;

pub use folds::{kfold_by_il, kfold_grouped, validation_split, FoldPlan, Grouping};
pub use property::Property;
pub use records::{
    load_ions, load_records, read_ions, read_records, write_ions, write_records, Dataset, ILKey, LoadOptions,
    PropertyRecord, RECORD_COLUMNS,
};
pub use sampling::{exclude_ils, sample_pairs};
pub use scaler::{fit_scaler, Scaler};
pub use vocab::{IonRole, IonVocabulary};
