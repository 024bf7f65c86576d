//! Missing-score handling for evolving multibiometric systems.
//!
//! The crate covers the whole pipeline: a score-table model, file ingest,
//! a synthetic score generator, missing-data scenarios (adding, merging and
//! retiring modalities), min-max normalization, univariate and chained
//! (iterative) imputation, simple-sum fusion, and verification (ROC) and
//! identification (CMC) evaluation, plus a seeded experiment grid runner.
//!
//! With the default `parallel` feature, data-parallel loops (KNN queries,
//! CMC ranking, synthetic generation, experiment grid cells) run on rayon.
//! Without it every loop runs sequentially and produces identical results.

pub mod error;
pub mod eval;
pub(crate) mod exec;
pub mod impute;
pub mod ingest;
pub mod model;
pub mod normalize;
pub mod runner;
pub mod scenarios;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
pub use model::{build_table, split_by_probe, ComparisonRow, DataSplit, Label, ModalitySet, RawRow, ScoreTable};
