use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::candidate::{candidate_indices_for_point, CandidateConfig};
use crate::graph::{CellId, RanGraph};
use crate::models::{ModelError, ModelScorer};

/// Ranked relations proposed for a new cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// `(cell, probability)`, most probable first.
    pub neighbors: Vec<(CellId, f64)>,
    /// The candidate filter returned nothing, so nothing could be scored.
    pub no_candidates: bool,
}

/// Candidate filter, scoring, cutoff and budget for a new cell at `coords`.
/// `score(j)` is the probability of a relation to node `j` of `graph`.
/// Ties in probability keep the smaller node index first.
pub fn predict_ranked<F>(
    graph: &RanGraph,
    coords: (f64, f64),
    cand_cfg: &CandidateConfig,
    cutoff: f64,
    max_neighbors: Option<usize>,
    mut score: F,
) -> Result<Prediction, PipelineError>
where
    F: FnMut(usize) -> Result<f64, ModelError>,
{
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(PipelineError::BadConfig(format!("cutoff must lie in (0, 1), got {cutoff}")));
    }
    let cands = candidate_indices_for_point(graph, coords, cand_cfg)?;
    if cands.is_empty() {
        return Ok(Prediction {
            neighbors: Vec::new(),
            no_candidates: true,
        });
    }
    let mut kept = Vec::new();
    for (j, _) in cands {
        let p = score(j)?;
        if p >= cutoff {
            kept.push((j, p));
        }
    }
    kept.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    if let Some(m) = max_neighbors {
        kept.truncate(m);
    }
    Ok(Prediction {
        neighbors: kept.into_iter().map(|(j, p)| (graph.id(j).clone(), p)).collect(),
        no_candidates: false,
    })
}

/// [`predict_ranked`] with a trained model. `scorer` must have been built on
/// `graph`'s nodes (normalized features) and `new_features` normalized with
/// the same parameters.
pub fn predict_new_node(
    scorer: &ModelScorer,
    graph: &RanGraph,
    new_features: &[f64],
    coords: (f64, f64),
    cand_cfg: &CandidateConfig,
    cutoff: f64,
    max_neighbors: Option<usize>,
) -> Result<Prediction, PipelineError> {
    predict_ranked(graph, coords, cand_cfg, cutoff, max_neighbors, |j| scorer.score_new(new_features, j))
}
