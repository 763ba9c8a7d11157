//! Two-stage transfer learning for ionic-liquid property prediction.
//!
//! A neural recommender is pre-trained on dense simulated data at a fixed
//! temperature and pressure to learn one embedding per cation and anion. Its
//! encoder (everything up to the concatenation of the two ion branches) is then
//! frozen and reused under small fine-tuning heads that add temperature and
//! pressure inputs and learn from sparse experimental data.
//!
//! Modules, bottom-up:
//!
//! - [`nn`]: dense layers, dropout, embeddings, Adam and a gradient checker
//! - [`model`]: the recommender, encoder snapshots and fine-tuning heads
//! - [`data`]: vocabularies, records CSV, stratified sampling, IL-grouped folds
//! - [`synth`]: a seeded synthetic oracle that stands in for simulation and experiment
//! - [`pipeline`]: training, cross-validation, metrics, transfer matrix, size sweep, audit
//! - [`persist`]: the versioned model artifact format
//! - [`config`] and [`cli`]: run configuration files and the command-line surface
//!
//! See `examples/` for one runnable program per capability.

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod model;
pub mod nn;
pub mod persist;
pub mod pipeline;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
