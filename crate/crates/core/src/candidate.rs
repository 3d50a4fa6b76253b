//! Geographic candidate filter: the `K` nearest cells within `max_dist`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::graph::{CellId, RanGraph};
use crate::metrics::{Confusion, EvalReport};

pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CandidateError {
    #[error("unknown cell {0}")]
    UnknownNode(CellId),
    #[error("node index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("graph features carry no lat/lon columns")]
    NoCoordinates,
    #[error("evaluation set is empty")]
    EmptyEvalSet,
    #[error("invalid candidate config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    #[default]
    HaversineKm,
    EuclideanDegrees,
}

/// `k` is the maximum number of candidates, `max_dist` the maximum distance in
/// the unit of `metric` (kilometres by default). In JSON an infinite distance
/// is written as `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateConfig {
    pub k: usize,
    #[serde(rename = "max_dist_km", serialize_with = "ser_dist", deserialize_with = "de_dist")]
    pub max_dist: f64,
    #[serde(default)]
    pub metric: DistanceMetric,
}

fn ser_dist<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_none()
    } else {
        s.serialize_f64(*v)
    }
}

fn de_dist<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

impl CandidateConfig {
    pub fn new(k: usize, max_dist: f64) -> Self {
        Self {
            k,
            max_dist,
            metric: DistanceMetric::HaversineKm,
        }
    }

    pub fn unlimited() -> Self {
        Self::new(usize::MAX, f64::INFINITY)
    }

    pub fn validate(&self) -> Result<(), CandidateError> {
        if self.max_dist.is_nan() || self.max_dist < 0.0 {
            return Err(CandidateError::BadConfig(format!("max_dist must be >= 0, got {}", self.max_dist)));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        let m = if self.max_dist.is_infinite() {
            "inf".to_owned()
        } else {
            self.max_dist.to_string()
        };
        format!("k{}-m{}", self.k, m)
    }
}

/// Distance between two `(lat, lon)` points in degrees.
pub fn geo_distance(a: (f64, f64), b: (f64, f64), metric: DistanceMetric) -> f64 {
    // Fixed argument order keeps the result bitwise symmetric.
    let (a, b) = if (a.0, a.1) <= (b.0, b.1) { (a, b) } else { (b, a) };
    match metric {
        DistanceMetric::HaversineKm => {
            let (p1, p2) = (a.0.to_radians(), b.0.to_radians());
            let dphi = p2 - p1;
            let dlambda = (b.1 - a.1).to_radians();
            let h = (dphi / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dlambda / 2.0).sin().powi(2);
            2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
        }
        DistanceMetric::EuclideanDegrees => (b.0 - a.0).hypot(b.1 - a.1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Ranked {
    dist: f64,
    idx: usize,
}

impl Eq for Ranked {}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn coordinates(graph: &RanGraph) -> Result<Vec<(f64, f64)>, CandidateError> {
    let f = graph.features();
    if f.coord_columns().is_none() {
        return Err(CandidateError::NoCoordinates);
    }
    Ok((0..graph.num_nodes()).map(|i| f.coordinate(i).expect("flagged")).collect())
}

/// Nearest-first scan keeping a bounded max-heap of the best `k`.
fn search(points: &[(f64, f64)], query: (f64, f64), skip: Option<usize>, cfg: &CandidateConfig) -> Vec<(usize, f64)> {
    if cfg.k == 0 {
        return Vec::new();
    }
    let mut heap: BinaryHeap<Ranked> = BinaryHeap::new();
    for (idx, &p) in points.iter().enumerate() {
        if Some(idx) == skip {
            continue;
        }
        let dist = geo_distance(query, p, cfg.metric);
        if !(dist <= cfg.max_dist) {
            continue;
        }
        let item = Ranked { dist, idx };
        if heap.len() < cfg.k {
            heap.push(item);
        } else if item < *heap.peek().expect("non-empty when full") {
            heap.pop();
            heap.push(item);
        }
    }
    heap.into_sorted_vec().into_iter().map(|r| (r.idx, r.dist)).collect()
}

/// Candidate indices for an existing node, nearest first; ties by index.
pub fn candidate_indices(graph: &RanGraph, node: usize, cfg: &CandidateConfig) -> Result<Vec<(usize, f64)>, CandidateError> {
    cfg.validate()?;
    if node >= graph.num_nodes() {
        return Err(CandidateError::IndexOutOfRange(node));
    }
    let points = coordinates(graph)?;
    Ok(search(&points, points[node], Some(node), cfg))
}

pub fn candidates(graph: &RanGraph, node: &CellId, cfg: &CandidateConfig) -> Result<Vec<(CellId, f64)>, CandidateError> {
    let idx = graph
        .index_of(node)
        .ok_or_else(|| CandidateError::UnknownNode(node.clone()))?;
    Ok(to_ids(graph, candidate_indices(graph, idx, cfg)?))
}

/// Candidates for a point that is not (yet) a node of `graph`.
pub fn candidates_for_new(graph: &RanGraph, coords: (f64, f64), cfg: &CandidateConfig) -> Result<Vec<(CellId, f64)>, CandidateError> {
    Ok(to_ids(graph, candidate_indices_for_point(graph, coords, cfg)?))
}

pub fn candidate_indices_for_point(
    graph: &RanGraph,
    coords: (f64, f64),
    cfg: &CandidateConfig,
) -> Result<Vec<(usize, f64)>, CandidateError> {
    cfg.validate()?;
    if graph.num_nodes() == 0 {
        return Ok(Vec::new());
    }
    let points = coordinates(graph)?;
    Ok(search(&points, coords, None, cfg))
}

fn to_ids(graph: &RanGraph, found: Vec<(usize, f64)>) -> Vec<(CellId, f64)> {
    found.into_iter().map(|(i, d)| (graph.id(i).clone(), d)).collect()
}

/// Scores the filter as a binary predictor over every (eval node, other node)
/// pair: a pair is predicted related iff the other node is a candidate.
pub fn evaluate_candidates(graph: &RanGraph, eval_nodes: &[usize], cfg: &CandidateConfig) -> Result<EvalReport, CandidateError> {
    if eval_nodes.is_empty() {
        return Err(CandidateError::EmptyEvalSet);
    }
    cfg.validate()?;
    let points = coordinates(graph)?;
    let n = graph.num_nodes() as u64;
    let mut c = Confusion::default();
    for &a in eval_nodes {
        if a >= graph.num_nodes() {
            return Err(CandidateError::IndexOutOfRange(a));
        }
        let found = search(&points, points[a], Some(a), cfg);
        let hits = found.iter().filter(|(j, _)| graph.has_edge(a, *j)).count() as u64;
        let predicted = found.len() as u64;
        let positives = graph.degree(a) as u64;
        c.tp += hits;
        c.fp += predicted - hits;
        c.fn_ += positives - hits;
        c.tn += (n - 1) - predicted - (positives - hits);
    }
    Ok(EvalReport::from_confusion("candidate", None, c, None))
}
