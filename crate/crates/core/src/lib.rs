//! Budgeted annotation experiments: passive learning, active learning,
//! semi-supervised pseudo-labeling and their hybrid, compared by classifier
//! accuracy versus the number of human-annotated samples.

pub mod data;
pub mod datagen;
pub mod error;
pub mod folds;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod orchestrator;
pub mod rng;
pub mod sets;
pub mod ssl;
pub mod strategies;

pub use data::{load_csv, load_csv_with_classes, Dataset};
pub use error::{Error, Result};
pub use folds::{make_folds, FoldSplit};
pub use metrics::accuracy;
pub use model::{ClassDistribution, Classifier, CostCounters, Hyper, LogisticRegression, ModelParams};
pub use orchestrator::{Approach, ApproachConfig, RunState, RunTrace};
pub use rng::RngStream;
pub use sets::{LabeledSet, Provenance, UnlabeledPool};
pub use ssl::{SslConfig, SslMethod};
pub use strategies::{ExpectedErrorConfig, SelectionResult, Strategy};
