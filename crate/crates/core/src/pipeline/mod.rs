//! Pair sampling, training, evaluation regimes, prediction for new cells and
//! end-to-end experiments.

mod eval;
mod experiment;
mod pairs;
mod predict;
mod train;

pub use eval::{evaluate, evaluate_with, PreparedData};
pub use experiment::{
    candidate_reports, history_csv, load_csv_graph, model_reports, prepare_data, run_experiment, summary_table,
    train_models, write_bundle, DataSource, EvalSplit, ExperimentConfig, ModelShape, NamedReport, ReportBundle,
    TrainedModel,
};
pub use pairs::{sample_pairs, LabeledPair, PairMode};
pub use predict::{predict_new_node, predict_ranked, Prediction};
pub use train::{train, train_accuracy, EpochRecord, GnnTrainInputs, TrainConfig, TrainOutcome};

use thiserror::Error;

use crate::candidate::CandidateError;
use crate::data::DataError;
use crate::graph::GraphError;
use crate::metrics::MetricError;
use crate::models::ModelError;
use crate::synth::SynthError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("not enough negative pairs: need {needed}, only {available} exist")]
    NotEnoughNegatives { needed: usize, available: usize },
    #[error("no evaluation nodes given")]
    EmptyEvalSet,
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("training graph has no edges, nothing to learn")]
    DegenerateGraph,
    #[error("node index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Candidate(#[from] CandidateError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Coarse error category, mapped to process exit codes by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Invalid configuration or input data.
    Config,
    Io,
    /// A broken internal invariant.
    Internal,
}

impl PipelineError {
    pub fn class(&self) -> ErrorClass {
        use PipelineError::*;
        match self {
            Io(_) => ErrorClass::Io,
            Synth(SynthError::Io(_)) => ErrorClass::Io,
            Data(DataError::Io(_)) => ErrorClass::Io,
            Data(DataError::Csv(e)) if e.is_io_error() => ErrorClass::Io,
            Model(ModelError::IndexOutOfRange(_)) | IndexOutOfRange(_) => ErrorClass::Internal,
            Metric(MetricError::NonFiniteScore(_)) => ErrorClass::Internal,
            _ => ErrorClass::Config,
        }
    }
}

/// A pipeline error tagged with the stage that raised it.
#[derive(Debug, Error)]
#[error("{stage}: {source}")]
pub struct StageError {
    pub stage: &'static str,
    #[source]
    pub source: PipelineError,
}

impl StageError {
    pub fn class(&self) -> ErrorClass {
        self.source.class()
    }
}

pub(crate) trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T, StageError>;
}

impl<T, E: Into<PipelineError>> StageContext<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T, StageError> {
        self.map_err(|e| StageError {
            stage,
            source: e.into(),
        })
    }
}

/// Named sub-seed for one pipeline stage (splitmix64 over an FNV-1a hash of
/// the stage name).
pub fn derive_seed(seed: u64, stage: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
