use std::collections::HashSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PipelineError;
use crate::candidate::{candidate_indices, CandidateConfig};
use crate::graph::RanGraph;

/// Which (eval node, other node) pairs an evaluation looks at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairMode {
    /// Every positive plus as many uniformly drawn negatives.
    Balanced,
    /// Every pair.
    AllPairs,
    /// Only pairs whose other node is a candidate of the eval node.
    CandidateFiltered(CandidateConfig),
}

impl PairMode {
    pub fn name(&self) -> &'static str {
        match self {
            PairMode::Balanced => "balanced",
            PairMode::AllPairs => "all_pairs",
            PairMode::CandidateFiltered(_) => "candidate_filtered",
        }
    }
}

/// An anchored pair: `i` is the eval node, `j` any other node of the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabeledPair {
    pub i: usize,
    pub j: usize,
    pub label: bool,
}

pub(crate) fn check_eval_nodes(graph: &RanGraph, eval_nodes: &[usize]) -> Result<Vec<usize>, PipelineError> {
    if eval_nodes.is_empty() {
        return Err(PipelineError::EmptyEvalSet);
    }
    let mut nodes = eval_nodes.to_vec();
    nodes.sort_unstable();
    nodes.dedup();
    if let Some(&bad) = nodes.iter().find(|&&v| v >= graph.num_nodes()) {
        return Err(PipelineError::IndexOutOfRange(bad));
    }
    Ok(nodes)
}

/// Pairs anchored at each eval node, labelled by `graph`.
///
/// A pair of two eval nodes shows up once per anchor. Balanced negatives are
/// drawn uniformly without replacement from all anchored non-edges.
pub fn sample_pairs(graph: &RanGraph, eval_nodes: &[usize], mode: PairMode, seed: u64) -> Result<Vec<LabeledPair>, PipelineError> {
    let nodes = check_eval_nodes(graph, eval_nodes)?;
    let n = graph.num_nodes();
    let mut out = Vec::new();
    match mode {
        PairMode::AllPairs => {
            for &a in &nodes {
                out.extend((0..n).filter(|&o| o != a).map(|o| LabeledPair {
                    i: a,
                    j: o,
                    label: graph.has_edge(a, o),
                }));
            }
        }
        PairMode::CandidateFiltered(cfg) => {
            for &a in &nodes {
                for (o, _) in candidate_indices(graph, a, &cfg)? {
                    out.push(LabeledPair {
                        i: a,
                        j: o,
                        label: graph.has_edge(a, o),
                    });
                }
            }
        }
        PairMode::Balanced => {
            for &a in &nodes {
                out.extend(graph.neighbor_indices(a).iter().map(|&o| LabeledPair { i: a, j: o, label: true }));
            }
            let needed = out.len();
            let total = nodes.len() * n.saturating_sub(1);
            let available = total - needed;
            if needed > available {
                return Err(PipelineError::NotEnoughNegatives { needed, available });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let negatives = if available <= 4 * needed {
                let all: Vec<(usize, usize)> = nodes
                    .iter()
                    .flat_map(|&a| (0..n).filter(move |&o| o != a).map(move |o| (a, o)))
                    .filter(|&(a, o)| !graph.has_edge(a, o))
                    .collect();
                sample(&mut rng, all.len(), needed).into_iter().map(|k| all[k]).collect()
            } else {
                draw_rejection(&mut rng, needed, &nodes, n, |a, o| graph.has_edge(a, o))
            };
            out.extend(negatives.into_iter().map(|(i, j)| LabeledPair { i, j, label: false }));
        }
    }
    Ok(out)
}

/// Uniform anchored non-edges, without replacement, in draw order. Only used
/// when non-edges are plentiful so the loop terminates quickly.
fn draw_rejection(
    rng: &mut impl Rng,
    count: usize,
    anchors: &[usize],
    n: usize,
    is_edge: impl Fn(usize, usize) -> bool,
) -> Vec<(usize, usize)> {
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = anchors[rng.random_range(0..anchors.len())];
        let mut o = rng.random_range(0..n - 1);
        if o >= a {
            o += 1;
        }
        if !is_edge(a, o) && seen.insert((a, o)) {
            out.push((a, o));
        }
    }
    out
}

/// Uniform unordered non-edges `(i < j)` of `graph`, without replacement.
pub(crate) fn sample_unordered_non_edges(graph: &RanGraph, count: usize, rng: &mut impl Rng) -> Result<Vec<(usize, usize)>, PipelineError> {
    let n = graph.num_nodes();
    let total = n * n.saturating_sub(1) / 2;
    let available = total - graph.num_edges();
    if count > available {
        return Err(PipelineError::NotEnoughNegatives { needed: count, available });
    }
    if available <= 4 * count {
        let all: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| !graph.has_edge(i, j))
            .collect();
        return Ok(sample(rng, all.len(), count).into_iter().map(|k| all[k]).collect());
    }
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i == j {
            continue;
        }
        let p = (i.min(j), i.max(j));
        if !graph.has_edge(p.0, p.1) && seen.insert(p) {
            out.push(p);
        }
    }
    Ok(out)
}
