//! Immutable attributed RAN graph: cells are nodes, mobility relations are
//! undirected edges.

use std::collections::HashMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("edge ({0}, {1}) references an unknown cell")]
    UnknownEndpoint(CellId, CellId),
    #[error("self-loop on cell {0}")]
    SelfLoop(CellId),
    #[error("feature matrix has {rows} rows but the graph has {nodes} nodes")]
    FeatureRowMismatch { rows: usize, nodes: usize },
    #[error("duplicate cell id {0}")]
    DuplicateNode(CellId),
    #[error("unknown cell {0}")]
    UnknownNode(CellId),
    #[error("node index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("split ratios must be positive and sum to 1, got {0:?}")]
    BadRatios([f64; 3]),
    #[error("graph with {0} nodes is too small to split (need at least 3)")]
    GraphTooSmall(usize),
}

/// External identifier of a cell. Inside a [`RanGraph`] every cell also has a
/// dense index in `[0, N)` assigned in input order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellId(String);

impl CellId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CellId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for CellId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RanGraph {
    ids: Vec<CellId>,
    index: HashMap<CellId, usize>,
    adjacency: Vec<Vec<usize>>,
    /// Canonical edge list: `(i, j)` with `i < j`, sorted.
    edges: Vec<(usize, usize)>,
    features: FeatureMatrix,
}

/// Builds a canonical graph. Reversed and repeated edges collapse to one.
pub fn build_graph(
    nodes: Vec<CellId>,
    edges: &[(CellId, CellId)],
    features: FeatureMatrix,
) -> Result<RanGraph, GraphError> {
    let mut index = HashMap::with_capacity(nodes.len());
    for (i, id) in nodes.iter().enumerate() {
        if index.insert(id.clone(), i).is_some() {
            return Err(GraphError::DuplicateNode(id.clone()));
        }
    }
    let mut pairs = Vec::with_capacity(edges.len());
    for (a, b) in edges {
        let (Some(&i), Some(&j)) = (index.get(a), index.get(b)) else {
            return Err(GraphError::UnknownEndpoint(a.clone(), b.clone()));
        };
        pairs.push((i, j));
    }
    RanGraph::assemble(nodes, index, pairs, features)
}

impl RanGraph {
    /// Builds a graph from index pairs into `ids`.
    pub fn from_indexed(
        ids: Vec<CellId>,
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: FeatureMatrix,
    ) -> Result<Self, GraphError> {
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(GraphError::DuplicateNode(id.clone()));
            }
        }
        let n = ids.len();
        let pairs: Vec<(usize, usize)> = edges.into_iter().collect();
        if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= n || j >= n) {
            return Err(GraphError::IndexOutOfRange(i.max(j)));
        }
        Self::assemble(ids, index, pairs, features)
    }

    fn assemble(
        ids: Vec<CellId>,
        index: HashMap<CellId, usize>,
        mut pairs: Vec<(usize, usize)>,
        features: FeatureMatrix,
    ) -> Result<Self, GraphError> {
        if features.num_rows() != ids.len() {
            return Err(GraphError::FeatureRowMismatch {
                rows: features.num_rows(),
                nodes: ids.len(),
            });
        }
        for p in pairs.iter_mut() {
            if p.0 == p.1 {
                return Err(GraphError::SelfLoop(ids[p.0].clone()));
            }
            if p.0 > p.1 {
                *p = (p.1, p.0);
            }
        }
        pairs.sort_unstable();
        pairs.dedup();

        let mut adjacency = vec![Vec::new(); ids.len()];
        for &(i, j) in &pairs {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self {
            ids,
            index,
            adjacency,
            edges: pairs,
            features,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.ids.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn ids(&self) -> &[CellId] {
        &self.ids
    }

    pub fn id(&self, idx: usize) -> &CellId {
        &self.ids[idx]
    }

    pub fn index_of(&self, id: &CellId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn require_index(&self, id: &CellId) -> Result<usize, GraphError> {
        self.index_of(id).ok_or_else(|| GraphError::UnknownNode(id.clone()))
    }

    /// Canonical `(i, j)` pairs with `i < j`, sorted.
    pub fn edge_indices(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_ids(&self) -> Vec<(CellId, CellId)> {
        self.edges
            .iter()
            .map(|&(i, j)| (self.ids[i].clone(), self.ids[j].clone()))
            .collect()
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    #[inline]
    pub fn neighbor_indices(&self, idx: usize) -> &[usize] {
        &self.adjacency[idx]
    }

    #[inline]
    pub fn degree(&self, idx: usize) -> usize {
        self.adjacency[idx].len()
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    /// Neighbours of `id`, ordered by internal index.
    pub fn neighbors(&self, id: &CellId) -> Result<Vec<CellId>, GraphError> {
        let idx = self.require_index(id)?;
        Ok(self.adjacency[idx].iter().map(|&j| self.ids[j].clone()).collect())
    }

    /// Graph without the given cells and without every edge touching them.
    pub fn remove_nodes<'a, I>(&self, removed: I) -> Result<RanGraph, GraphError>
    where
        I: IntoIterator<Item = &'a CellId>,
    {
        let mut drop = vec![false; self.num_nodes()];
        for id in removed {
            drop[self.require_index(id)?] = true;
        }
        Ok(self.without_mask(&drop))
    }

    pub fn remove_node_indices(&self, removed: &[usize]) -> Result<RanGraph, GraphError> {
        let mut drop = vec![false; self.num_nodes()];
        for &i in removed {
            *drop.get_mut(i).ok_or(GraphError::IndexOutOfRange(i))? = true;
        }
        Ok(self.without_mask(&drop))
    }

    fn without_mask(&self, drop: &[bool]) -> RanGraph {
        let keep: Vec<usize> = (0..self.num_nodes()).filter(|&i| !drop[i]).collect();
        let mut remap = vec![usize::MAX; self.num_nodes()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let ids: Vec<CellId> = keep.iter().map(|&i| self.ids[i].clone()).collect();
        let index = ids.iter().cloned().enumerate().map(|(i, id)| (id, i)).collect();
        let edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .filter(|&&(i, j)| !drop[i] && !drop[j])
            .map(|&(i, j)| (remap[i], remap[j]))
            .collect();
        let mut adjacency = vec![Vec::new(); keep.len()];
        for &(i, j) in &edges {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        RanGraph {
            ids,
            index,
            adjacency,
            edges,
            features: self.features.select_rows(&keep),
        }
    }

    /// Same node set, minus every edge incident to `isolated`. Indices are
    /// unchanged, so this is the view of a network in which those cells exist
    /// but none of their relations are known yet.
    pub fn isolate_nodes(&self, isolated: &[usize]) -> RanGraph {
        let mut mask = vec![false; self.num_nodes()];
        for &i in isolated {
            mask[i] = true;
        }
        let edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .copied()
            .filter(|&(i, j)| !mask[i] && !mask[j])
            .collect();
        let mut adjacency = vec![Vec::new(); self.num_nodes()];
        for &(i, j) in &edges {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        RanGraph {
            ids: self.ids.clone(),
            index: self.index.clone(),
            adjacency,
            edges,
            features: self.features.clone(),
        }
    }
}

/// Inductive node split. Node sets hold sorted indices into the full graph;
/// `train_graph` holds only train nodes, in the same relative order, so
/// `train_graph` index `i` is full-graph index `train_nodes[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSplit {
    pub train_nodes: Vec<usize>,
    pub val_nodes: Vec<usize>,
    pub test_nodes: Vec<usize>,
    pub train_graph: RanGraph,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub const DEFAULT: SplitRatios = SplitRatios {
        train: 0.9,
        val: 0.05,
        test: 0.05,
    };

    pub fn new(train: f64, val: f64, test: f64) -> Self {
        Self { train, val, test }
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let r = [self.train, self.val, self.test];
        let ok = r.iter().all(|&x| x > 0.0 && x.is_finite()) && (r.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
        if ok {
            Ok(())
        } else {
            Err(GraphError::BadRatios(r))
        }
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Seeded shuffle split. Val and test get `floor(N * ratio)` nodes each; the
/// remainder goes to train.
pub fn split_nodes(graph: &RanGraph, ratios: SplitRatios, seed: u64) -> Result<NodeSplit, GraphError> {
    ratios.validate()?;
    let n = graph.num_nodes();
    if n < 3 {
        return Err(GraphError::GraphTooSmall(n));
    }
    let n_val = floor_share(n, ratios.val);
    let n_test = floor_share(n, ratios.test);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut val_nodes = order[..n_val].to_vec();
    let mut test_nodes = order[n_val..n_val + n_test].to_vec();
    let mut train_nodes = order[n_val + n_test..].to_vec();
    val_nodes.sort_unstable();
    test_nodes.sort_unstable();
    train_nodes.sort_unstable();

    let held_out: Vec<usize> = val_nodes.iter().chain(&test_nodes).copied().collect();
    let train_graph = graph.remove_node_indices(&held_out)?;
    Ok(NodeSplit {
        train_nodes,
        val_nodes,
        test_nodes,
        train_graph,
    })
}

fn floor_share(n: usize, ratio: f64) -> usize {
    // The epsilon absorbs representation error such as 100 * 0.29 = 28.999...
    ((n as f64) * ratio + 1e-9).floor() as usize
}
