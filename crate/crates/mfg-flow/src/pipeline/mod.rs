//! Sampling, dataset generation, training, and evaluation of the
//! flow-map network.
//!
//! The end-to-end pipeline: draw instances (eta, kappa) uniformly over
//! the simplex and the parameter box, label each by solving the game,
//! train a ReLU network on (t, eta, kappa) -> u(t) (or, in augmented
//! mode, (eta, kappa) -> the whole value trajectory on a fixed grid),
//! then evaluate the learned operator against fresh solver runs.

pub mod dataset;
pub mod evaluate;
pub mod generate;
pub mod sample;
pub mod sweep;
pub mod train;

pub use dataset::{Dataset, DatasetHeader, DatasetMode, SampleRecord, DATASET_SCHEMA_VERSION};
pub use evaluate::{
    evaluate_flow_map, evaluate_reconstruction, evaluate_with, predict_u_table, sample_eval_pairs,
    EvalReport, PairEval,
};
pub use generate::{generate_dataset, Generated, ReportRow, MAX_RETRIES};
pub use sample::{sample_kappa, sample_simplex, seeded_stream, STREAM_EVAL, STREAM_SPLIT, STREAM_TRAIN};
pub use sweep::{width_sweep, SweepOutput, SweepRow, SweepSummaryRow};
pub use train::{split_indices, train_flow_map, EpochStats, TrainConfig, TrainOutput};
