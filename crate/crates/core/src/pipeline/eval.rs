use super::pairs::{sample_pairs, PairMode};
use super::PipelineError;
use crate::data::{zscore_apply, zscore_fit, NormParams};
use crate::graph::{split_nodes, NodeSplit, RanGraph, SplitRatios};
use crate::metrics::{auc, Confusion, EvalReport};
use crate::models::{ModelParams, ModelScorer, PairScorer};
use crate::nn::Matrix;

/// A graph split into train/val/test with features normalized on train rows.
#[derive(Debug, Clone)]
pub struct PreparedData {
    /// Full graph with raw features; labels and coordinates come from here.
    pub graph: RanGraph,
    /// Normalized features, one row per node of `graph`.
    pub features: Matrix,
    pub norm: NormParams,
    pub split: NodeSplit,
    /// `graph` with every val/test node cut off from its edges: what is known
    /// about the network when those cells are about to be deployed.
    pub context: RanGraph,
}

impl PreparedData {
    pub fn new(graph: RanGraph, ratios: SplitRatios, seed: u64) -> Result<Self, PipelineError> {
        let split = split_nodes(&graph, ratios, seed)?;
        let norm = zscore_fit(graph.features(), &split.train_nodes)?;
        let features = zscore_apply(&norm, graph.features())?.into_values();
        let held_out: Vec<usize> = split.val_nodes.iter().chain(&split.test_nodes).copied().collect();
        let context = graph.isolate_nodes(&held_out);
        Ok(Self {
            graph,
            features,
            norm,
            split,
            context,
        })
    }

    /// Normalized features aligned with `split.train_graph`.
    pub fn train_features(&self) -> Matrix {
        self.features.select_rows(&self.split.train_nodes)
    }

    pub fn scorer(&self, model: &ModelParams) -> Result<ModelScorer, PipelineError> {
        Ok(ModelScorer::new(model, &self.features, &self.context)?)
    }
}

fn check_cutoff(cutoff: f64) -> Result<(), PipelineError> {
    if cutoff > 0.0 && cutoff < 1.0 {
        Ok(())
    } else {
        Err(PipelineError::BadConfig(format!("cutoff must lie in (0, 1), got {cutoff}")))
    }
}

/// Scores the pairs of `mode` with `scorer`'s symmetric score; a pair is
/// predicted related iff its score is at least `cutoff`. AUC is reported
/// whenever both classes occur.
pub fn evaluate_with<S: PairScorer>(
    scorer: &S,
    graph: &RanGraph,
    eval_nodes: &[usize],
    mode: PairMode,
    cutoff: f64,
    seed: u64,
) -> Result<EvalReport, PipelineError> {
    check_cutoff(cutoff)?;
    if scorer.num_nodes() != graph.num_nodes() {
        return Err(PipelineError::BadConfig(format!(
            "scorer covers {} nodes, graph has {}",
            scorer.num_nodes(),
            graph.num_nodes()
        )));
    }
    let pairs = sample_pairs(graph, eval_nodes, mode, seed)?;
    let mut c = Confusion::default();
    let mut scored = Vec::with_capacity(pairs.len());
    for p in &pairs {
        let s = scorer.symmetric_score(p.i, p.j);
        c.record(s >= cutoff, p.label);
        scored.push((s, p.label));
    }
    let both_classes = c.tp + c.fn_ > 0 && c.fp + c.tn > 0;
    let area = if both_classes { Some(auc(&scored)?) } else { None };
    Ok(EvalReport::from_confusion(mode.name(), Some(cutoff), c, area))
}

/// [`evaluate_with`] for a trained model scored against `data.context`.
pub fn evaluate(
    model: &ModelParams,
    data: &PreparedData,
    eval_nodes: &[usize],
    mode: PairMode,
    cutoff: f64,
    seed: u64,
) -> Result<EvalReport, PipelineError> {
    evaluate_with(&data.scorer(model)?, &data.graph, eval_nodes, mode, cutoff, seed)
}
