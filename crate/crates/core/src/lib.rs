//! Inductive prediction of mobility relations for new cells in a mobile
//! network graph.
//!
//! The crate covers the full path from raw cell tables to ranked relation
//! proposals: graph model and node splits ([`graph`]), CSV ingestion and
//! normalization ([`data`]), the geographic candidate filter
//! ([`candidate`]), a small dense network engine ([`nn`]), the MLP and
//! SAGE-based link predictors ([`models`]), training and evaluation
//! ([`pipeline`]) and a synthetic network generator with a known relation
//! rule ([`synth`]).

// `!(x <= y)` is the NaN-rejecting form; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod candidate;
pub mod data;
pub mod features;
pub mod graph;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod pipeline;
pub mod synth;

pub use candidate::{CandidateConfig, DistanceMetric};
pub use features::FeatureMatrix;
pub use graph::{build_graph, split_nodes, CellId, NodeSplit, RanGraph, SplitRatios};
pub use metrics::{auc, EvalReport};
pub use models::{init_params, ModelDims, ModelKind, ModelParams};
