//! Dataset ingestion, fold management, experiment configuration and the
//! train/evaluate protocol.

pub mod config;
pub mod dataset;
pub mod experiment;
pub mod folds;

pub use config::ExperimentConfig;
pub use dataset::{
    filter_bindingdb, kd_to_pkd, read_bindingdb_raw, AffinityKind, ColumnMap, Interaction,
    InteractionDataset, Ligand,
};
pub use experiment::{run_experiment, ExperimentContext, ExperimentReport};
pub use folds::{make_folds, FoldPlan};
