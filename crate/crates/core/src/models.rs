//! The two link predictors and their exact reverse passes.
//!
//! * MLP: `σ(W3 ReLU(W2 ReLU(W1 [x_i ; x_j] + b1) + b2) + b3)` on raw node
//!   features.
//! * GNN: one mean-aggregating SAGE layer `e_v = ReLU(Ws [x_v ; mean_{u∈N(v)} x_u] + bs)`
//!   followed by the same three-layer head on `[e_i ; e_j]`.
//!
//! The head's first layer is always evaluated as `(W1_left u + W1_right v) + b1`,
//! so per-node projections can be cached for bulk scoring with bit-identical
//! results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::RanGraph;
use crate::nn::{dot, relu_in_place, sigmoid, LinearLayer, Matrix, NnError, Parameters};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("invalid dimensions: {0}")]
    BadDims(String),
    #[error("node index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("json: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlp,
    Gnn,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Gnn => "gnn",
        }
    }
}

/// Dimensions shared by both model kinds. `embedding` is ignored by the MLP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input: usize,
    pub embedding: usize,
    pub hidden: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            input: 8,
            embedding: 64,
            hidden: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpDims {
    pub input: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GnnDims {
    pub input: usize,
    pub embedding: usize,
    pub hidden: usize,
}

/// Concat-MLP: `layer1` is `hidden × 2·input`, `layer2` `hidden × hidden`,
/// `layer3` `1 × hidden`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMlp")]
pub struct MlpParams {
    pub dims: MlpDims,
    pub layer1: LinearLayer,
    pub layer2: LinearLayer,
    pub layer3: LinearLayer,
}

#[derive(Deserialize)]
struct RawMlp {
    dims: MlpDims,
    layer1: LinearLayer,
    layer2: LinearLayer,
    layer3: LinearLayer,
}

impl TryFrom<RawMlp> for MlpParams {
    type Error = ModelError;

    fn try_from(r: RawMlp) -> Result<Self, ModelError> {
        let p = MlpParams {
            dims: r.dims,
            layer1: r.layer1,
            layer2: r.layer2,
            layer3: r.layer3,
        };
        p.check_shapes()?;
        Ok(p)
    }
}

/// SAGE layer (`embedding × 2·input`) plus an MLP head over embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGnn")]
pub struct GnnParams {
    pub dims: GnnDims,
    pub sage: LinearLayer,
    pub head: MlpParams,
}

#[derive(Deserialize)]
struct RawGnn {
    dims: GnnDims,
    sage: LinearLayer,
    head: MlpParams,
}

impl TryFrom<RawGnn> for GnnParams {
    type Error = ModelError;

    fn try_from(r: RawGnn) -> Result<Self, ModelError> {
        let p = GnnParams {
            dims: r.dims,
            sage: r.sage,
            head: r.head,
        };
        p.check_shapes()?;
        Ok(p)
    }
}

/// Either trained model, as stored on disk (`"kind": "mlp" | "gnn"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelParams {
    Mlp(MlpParams),
    Gnn(GnnParams),
}

fn expect_shape(what: &str, layer: &LinearLayer, rows: usize, cols: usize) -> Result<(), ModelError> {
    if layer.weight.shape() != (rows, cols) {
        return Err(ModelError::BadDims(format!(
            "{what} is {:?}, expected ({rows}, {cols})",
            layer.weight.shape()
        )));
    }
    Ok(())
}

fn check_positive(dims: &[(&str, usize)]) -> Result<(), ModelError> {
    match dims.iter().find(|(_, v)| *v == 0) {
        Some((name, _)) => Err(ModelError::BadDims(format!("{name} must be positive"))),
        None => Ok(()),
    }
}

impl MlpParams {
    pub fn zeros(dims: MlpDims) -> Self {
        Self {
            dims,
            layer1: LinearLayer::zeros(dims.hidden, 2 * dims.input),
            layer2: LinearLayer::zeros(dims.hidden, dims.hidden),
            layer3: LinearLayer::zeros(1, dims.hidden),
        }
    }

    fn glorot(dims: MlpDims, rng: &mut ChaCha8Rng) -> Self {
        Self {
            dims,
            layer1: LinearLayer::glorot(dims.hidden, 2 * dims.input, rng),
            layer2: LinearLayer::glorot(dims.hidden, dims.hidden, rng),
            layer3: LinearLayer::glorot(1, dims.hidden, rng),
        }
    }

    pub fn check_shapes(&self) -> Result<(), ModelError> {
        let MlpDims { input, hidden } = self.dims;
        check_positive(&[("input", input), ("hidden", hidden)])?;
        expect_shape("layer1", &self.layer1, hidden, 2 * input)?;
        expect_shape("layer2", &self.layer2, hidden, hidden)?;
        expect_shape("layer3", &self.layer3, 1, hidden)
    }

    /// `W1_left · u` into `out`.
    #[inline]
    fn project_left(&self, u: &[f64], out: &mut [f64]) {
        self.layer1.weight.mul_vec_cols_into(0, u, out);
    }

    /// `W1_right · v` into `out`.
    #[inline]
    fn project_right(&self, v: &[f64], out: &mut [f64]) {
        self.layer1.weight.mul_vec_cols_into(self.dims.input, v, out);
    }

    /// Head logit from cached first-layer projections. Fills the tape when
    /// one is supplied.
    fn logit_from_projections(&self, left: &[f64], right: &[f64], tape: Option<&mut HeadTape>) -> f64 {
        let h = self.dims.hidden;
        let mut local = HeadTape::default();
        let t = match tape {
            Some(t) => t,
            None => &mut local,
        };
        t.h1_pre.resize(h, 0.0);
        for (k, z) in t.h1_pre.iter_mut().enumerate() {
            *z = (left[k] + right[k]) + self.layer1.bias[k];
        }
        t.h1.clear();
        t.h1.extend_from_slice(&t.h1_pre);
        relu_in_place(&mut t.h1);

        t.h2_pre.resize(h, 0.0);
        self.layer2.forward_into(&t.h1, &mut t.h2_pre);
        t.h2.clear();
        t.h2.extend_from_slice(&t.h2_pre);
        relu_in_place(&mut t.h2);

        t.logit = dot(self.layer3.weight.row(0), &t.h2) + self.layer3.bias[0];
        t.logit
    }

    /// Full forward pass on `(u, v)` in that concat order, recording the tape.
    fn forward_recorded(&self, u: &[f64], v: &[f64], t: &mut HeadTape) -> f64 {
        let h = self.dims.hidden;
        t.u.clear();
        t.u.extend_from_slice(u);
        t.v.clear();
        t.v.extend_from_slice(v);
        let mut left = std::mem::take(&mut t.left);
        let mut right = std::mem::take(&mut t.right);
        left.resize(h, 0.0);
        right.resize(h, 0.0);
        self.project_left(u, &mut left);
        self.project_right(v, &mut right);
        let logit = self.logit_from_projections(&left, &right, Some(t));
        t.left = left;
        t.right = right;
        t.prob = probability(logit);
        t.recorded = true;
        t.prob
    }

    fn check_inputs(&self, u: &[f64], v: &[f64]) -> Result<(), ModelError> {
        for x in [u, v] {
            if x.len() != self.dims.input {
                return Err(NnError::ShapeMismatch {
                    expected: self.dims.input,
                    found: x.len(),
                }
                .into());
            }
        }
        Ok(())
    }

    /// Probability that `(x_i, x_j)` are related; order-sensitive.
    pub fn score(&self, x_i: &[f64], x_j: &[f64]) -> Result<f64, ModelError> {
        self.check_inputs(x_i, x_j)?;
        let mut t = HeadTape::default();
        Ok(self.forward_recorded(x_i, x_j, &mut t))
    }

    /// Forward pass that records the activations needed by [`Self::backward`].
    pub fn forward(&self, x_i: &[f64], x_j: &[f64], tape: &mut Tape) -> Result<f64, ModelError> {
        self.check_inputs(x_i, x_j)?;
        tape.sage = None;
        let head = tape.head.get_or_insert_with(HeadTape::default);
        Ok(self.forward_recorded(x_i, x_j, head))
    }

    /// Adds `dL/dθ` of the BCE loss against `label` into `grads`, scaled by
    /// `weight`, and returns the unscaled loss.
    pub fn accumulate_backward(&self, tape: &Tape, label: f64, weight: f64, grads: &mut MlpParams) -> Result<f64, ModelError> {
        if tape.sage.is_some() {
            return Err(NnError::NoForwardRecorded.into());
        }
        let head = tape.head.as_ref().filter(|h| h.recorded).ok_or(NnError::NoForwardRecorded)?;
        let loss = crate::nn::bce_loss(head.prob, label)?;
        self.head_backward(head, (head.prob - label) * weight, grads, None);
        Ok(loss)
    }

    /// Gradients of the BCE loss for the recorded pair.
    pub fn backward(&self, tape: &Tape, label: f64) -> Result<MlpParams, ModelError> {
        let mut g = MlpParams::zeros(self.dims);
        self.accumulate_backward(tape, label, 1.0, &mut g)?;
        Ok(g)
    }

    /// Backpropagates `d_logit` through the head. When `d_inputs` is given,
    /// also writes `dL/du` and `dL/dv` there.
    fn head_backward(&self, t: &HeadTape, d_logit: f64, g: &mut MlpParams, d_inputs: Option<(&mut [f64], &mut [f64])>) {
        let h = self.dims.hidden;
        let n = self.dims.input;

        // layer 3
        let w3 = self.layer3.weight.row(0);
        {
            let gw3 = g.layer3.weight.row_mut(0);
            for k in 0..h {
                gw3[k] += d_logit * t.h2[k];
            }
        }
        g.layer3.bias[0] += d_logit;

        let mut d2 = vec![0.0; h];
        for k in 0..h {
            if t.h2_pre[k] > 0.0 {
                d2[k] = d_logit * w3[k];
            }
        }

        // layer 2
        let mut d1 = vec![0.0; h];
        for r in 0..h {
            let dr = d2[r];
            if dr == 0.0 {
                continue;
            }
            let grow = g.layer2.weight.row_mut(r);
            for (gw, a) in grow.iter_mut().zip(&t.h1) {
                *gw += dr * a;
            }
            g.layer2.bias[r] += dr;
            for (d, w) in d1.iter_mut().zip(self.layer2.weight.row(r)) {
                *d += dr * w;
            }
        }
        for k in 0..h {
            if t.h1_pre[k] <= 0.0 {
                d1[k] = 0.0;
            }
        }

        // layer 1 over [u ; v]
        let mut d_inputs = d_inputs;
        if let Some((du, dv)) = d_inputs.as_mut() {
            du.fill(0.0);
            dv.fill(0.0);
        }
        for r in 0..h {
            let dr = d1[r];
            if dr == 0.0 {
                continue;
            }
            let grow = g.layer1.weight.row_mut(r);
            for (gw, a) in grow[..n].iter_mut().zip(&t.u) {
                *gw += dr * a;
            }
            for (gw, a) in grow[n..].iter_mut().zip(&t.v) {
                *gw += dr * a;
            }
            g.layer1.bias[r] += dr;
            if let Some((du, dv)) = d_inputs.as_mut() {
                let wrow = self.layer1.weight.row(r);
                for (d, w) in du.iter_mut().zip(&wrow[..n]) {
                    *d += dr * w;
                }
                for (d, w) in dv.iter_mut().zip(&wrow[n..]) {
                    *d += dr * w;
                }
            }
        }
    }
}

impl GnnParams {
    pub fn zeros(dims: GnnDims) -> Self {
        Self {
            dims,
            sage: LinearLayer::zeros(dims.embedding, 2 * dims.input),
            head: MlpParams::zeros(MlpDims {
                input: dims.embedding,
                hidden: dims.hidden,
            }),
        }
    }

    pub fn check_shapes(&self) -> Result<(), ModelError> {
        let GnnDims { input, embedding, hidden } = self.dims;
        check_positive(&[("input", input), ("embedding", embedding), ("hidden", hidden)])?;
        expect_shape("sage", &self.sage, embedding, 2 * input)?;
        if self.head.dims != (MlpDims { input: embedding, hidden }) {
            return Err(ModelError::BadDims(format!("head dims {:?} disagree with {:?}", self.head.dims, self.dims)));
        }
        self.head.check_shapes()
    }

    /// `ReLU(Ws z + bs)` for a precomputed SAGE input `z = [x_v ; mean]`.
    pub fn embed_input(&self, z: &[f64]) -> Result<Vec<f64>, ModelError> {
        let mut e = self.sage.forward(z)?;
        relu_in_place(&mut e);
        Ok(e)
    }

    /// Embedding of a node with no known neighbours.
    pub fn embed_isolated(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        if x.len() != self.dims.input {
            return Err(NnError::ShapeMismatch {
                expected: self.dims.input,
                found: x.len(),
            }
            .into());
        }
        let mut z = x.to_vec();
        z.resize(2 * self.dims.input, 0.0);
        self.embed_input(&z)
    }

    /// Forward pass from SAGE inputs of both endpoints, recording the tape.
    pub fn forward(&self, z_i: &[f64], z_j: &[f64], tape: &mut Tape) -> Result<f64, ModelError> {
        let two_k = 2 * self.dims.input;
        for z in [z_i, z_j] {
            if z.len() != two_k {
                return Err(NnError::ShapeMismatch {
                    expected: two_k,
                    found: z.len(),
                }
                .into());
            }
        }
        let d = self.dims.embedding;
        let s = tape.sage.get_or_insert_with(SageTape::default);
        for (z_src, z_dst, pre, emb) in [
            (z_i, &mut s.z_u, &mut s.pre_u, &mut s.e_u),
            (z_j, &mut s.z_v, &mut s.pre_v, &mut s.e_v),
        ] {
            z_dst.clear();
            z_dst.extend_from_slice(z_src);
            pre.resize(d, 0.0);
            self.sage.forward_into(z_src, pre);
            emb.clear();
            emb.extend_from_slice(pre);
            relu_in_place(emb);
        }
        let head = tape.head.get_or_insert_with(HeadTape::default);
        let s = tape.sage.as_ref().expect("just set");
        Ok(self.head.forward_recorded(&s.e_u, &s.e_v, head))
    }

    pub fn accumulate_backward(&self, tape: &Tape, label: f64, weight: f64, grads: &mut GnnParams) -> Result<f64, ModelError> {
        let head = tape.head.as_ref().filter(|h| h.recorded).ok_or(NnError::NoForwardRecorded)?;
        let s = tape.sage.as_ref().ok_or(NnError::NoForwardRecorded)?;
        let loss = crate::nn::bce_loss(head.prob, label)?;
        let d = self.dims.embedding;
        let mut du = vec![0.0; d];
        let mut dv = vec![0.0; d];
        self.head
            .head_backward(head, (head.prob - label) * weight, &mut grads.head, Some((&mut du, &mut dv)));
        for (de, pre, z) in [(&du, &s.pre_u, &s.z_u), (&dv, &s.pre_v, &s.z_v)] {
            for r in 0..d {
                if pre[r] <= 0.0 || de[r] == 0.0 {
                    continue;
                }
                let dr = de[r];
                for (gw, a) in grads.sage.weight.row_mut(r).iter_mut().zip(z.iter()) {
                    *gw += dr * a;
                }
                grads.sage.bias[r] += dr;
            }
        }
        Ok(loss)
    }

    pub fn backward(&self, tape: &Tape, label: f64) -> Result<GnnParams, ModelError> {
        let mut g = GnnParams::zeros(self.dims);
        self.accumulate_backward(tape, label, 1.0, &mut g)?;
        Ok(g)
    }
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Mlp(_) => ModelKind::Mlp,
            ModelParams::Gnn(_) => ModelKind::Gnn,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            ModelParams::Mlp(p) => p.dims.input,
            ModelParams::Gnn(p) => p.dims.input,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("parameters serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))
    }
}

impl Parameters for MlpParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut v = self.layer1.tensors();
        v.extend(self.layer2.tensors());
        v.extend(self.layer3.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.layer1.tensors_mut();
        v.extend(self.layer2.tensors_mut());
        v.extend(self.layer3.tensors_mut());
        v
    }
}

impl Parameters for GnnParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut v = self.sage.tensors();
        v.extend(self.head.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.sage.tensors_mut();
        v.extend(self.head.tensors_mut());
        v
    }
}

/// Recorded activations of the head MLP for one ordered pair.
#[derive(Debug, Clone, Default)]
pub struct HeadTape {
    u: Vec<f64>,
    v: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
    h1_pre: Vec<f64>,
    h1: Vec<f64>,
    h2_pre: Vec<f64>,
    h2: Vec<f64>,
    logit: f64,
    prob: f64,
    recorded: bool,
}

#[derive(Debug, Clone, Default)]
struct SageTape {
    z_u: Vec<f64>,
    z_v: Vec<f64>,
    pre_u: Vec<f64>,
    pre_v: Vec<f64>,
    e_u: Vec<f64>,
    e_v: Vec<f64>,
}

/// Activation record of the latest forward pass; reusable across passes.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    head: Option<HeadTape>,
    sage: Option<SageTape>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every pre-activation of the recorded pass, for kink detection.
    pub fn pre_activations(&self) -> Vec<f64> {
        let mut out = Vec::new();
        if let Some(s) = &self.sage {
            out.extend(&s.pre_u);
            out.extend(&s.pre_v);
        }
        if let Some(h) = &self.head {
            out.extend(&h.h1_pre);
            out.extend(&h.h2_pre);
        }
        out
    }
}

/// Largest and smallest scores a model can emit. Plain `sigmoid` rounds to
/// exactly 0 or 1 for large logits; scores stay inside the open interval.
pub const MAX_SCORE: f64 = 1.0 - f64::EPSILON / 2.0;
pub const MIN_SCORE: f64 = f64::MIN_POSITIVE;

#[inline]
fn probability(logit: f64) -> f64 {
    sigmoid(logit).clamp(MIN_SCORE, MAX_SCORE)
}

/// Glorot-uniform weights and zero biases, deterministic per seed.
pub fn init_params(kind: ModelKind, dims: ModelDims, seed: u64) -> Result<ModelParams, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        ModelKind::Mlp => {
            check_positive(&[("input", dims.input), ("hidden", dims.hidden)])?;
            let d = MlpDims {
                input: dims.input,
                hidden: dims.hidden,
            };
            Ok(ModelParams::Mlp(MlpParams::glorot(d, &mut rng)))
        }
        ModelKind::Gnn => {
            check_positive(&[("input", dims.input), ("embedding", dims.embedding), ("hidden", dims.hidden)])?;
            let d = GnnDims {
                input: dims.input,
                embedding: dims.embedding,
                hidden: dims.hidden,
            };
            let sage = LinearLayer::glorot(d.embedding, 2 * d.input, &mut rng);
            let head = MlpParams::glorot(
                MlpDims {
                    input: d.embedding,
                    hidden: d.hidden,
                },
                &mut rng,
            );
            Ok(ModelParams::Gnn(GnnParams { dims: d, sage, head }))
        }
    }
}

/// `N × 2k` matrix whose row `v` is `[x_v ; mean of x over N(v)]`, with a
/// zero mean for isolated nodes.
pub fn sage_inputs(features: &Matrix, graph: &RanGraph) -> Result<Matrix, ModelError> {
    if features.rows() != graph.num_nodes() {
        return Err(NnError::ShapeMismatch {
            expected: graph.num_nodes(),
            found: features.rows(),
        }
        .into());
    }
    let k = features.cols();
    let mut out = Matrix::zeros(graph.num_nodes(), 2 * k);
    for v in 0..graph.num_nodes() {
        let row = out.row_mut(v);
        row[..k].copy_from_slice(features.row(v));
        neighbor_mean_into(features, graph.neighbor_indices(v), None, &mut row[k..]);
    }
    Ok(out)
}

/// Mean of `features` over `neighbors`, leaving out `exclude`.
pub(crate) fn neighbor_mean_into(features: &Matrix, neighbors: &[usize], exclude: Option<usize>, out: &mut [f64]) {
    out.fill(0.0);
    let mut count = 0usize;
    for &u in neighbors {
        if Some(u) == exclude {
            continue;
        }
        for (o, x) in out.iter_mut().zip(features.row(u)) {
            *o += x;
        }
        count += 1;
    }
    if count > 0 {
        let c = count as f64;
        for o in out.iter_mut() {
            *o /= c;
        }
    }
}

/// Node embeddings, one non-negative row per graph node.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings(Matrix);

impl Embeddings {
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn len(&self) -> usize {
        self.0.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.rows() == 0
    }
}

pub fn sage_embed(params: &GnnParams, features: &Matrix, graph: &RanGraph) -> Result<Embeddings, ModelError> {
    if features.cols() != params.dims.input {
        return Err(NnError::ShapeMismatch {
            expected: params.dims.input,
            found: features.cols(),
        }
        .into());
    }
    let z = sage_inputs(features, graph)?;
    let d = params.dims.embedding;
    let mut e = Matrix::zeros(z.rows(), d);
    for v in 0..z.rows() {
        let row = e.row_mut(v);
        params.sage.forward_into(z.row(v), row);
        relu_in_place(row);
    }
    Ok(Embeddings(e))
}

pub fn mlp_score(params: &MlpParams, x_i: &[f64], x_j: &[f64]) -> Result<f64, ModelError> {
    params.score(x_i, x_j)
}

pub fn gnn_score(params: &GnnParams, embeddings: &Embeddings, i: usize, j: usize) -> Result<f64, ModelError> {
    for idx in [i, j] {
        if idx >= embeddings.len() {
            return Err(ModelError::IndexOutOfRange(idx));
        }
    }
    params.head.score(embeddings.row(i), embeddings.row(j))
}

/// Anything that can score an ordered node pair with a probability.
pub trait PairScorer {
    fn num_nodes(&self) -> usize;

    /// Order-sensitive probability for `(i, j)`.
    fn score(&self, i: usize, j: usize) -> f64;

    /// `(score(i, j) + score(j, i)) / 2`; exactly symmetric.
    fn symmetric_score(&self, i: usize, j: usize) -> f64 {
        (self.score(i, j) + self.score(j, i)) / 2.0
    }
}

/// Bulk scorer for a frozen model over a fixed set of node representations
/// (raw features for the MLP, embeddings for the GNN). First-layer
/// projections are computed once per node.
#[derive(Debug, Clone)]
pub struct ModelScorer {
    model: ModelParams,
    left: Matrix,
    right: Matrix,
}

impl ModelScorer {
    /// `features` are the normalized features of every node of `context`;
    /// the GNN aggregates over `context`'s edges.
    pub fn new(model: &ModelParams, features: &Matrix, context: &RanGraph) -> Result<Self, ModelError> {
        if features.cols() != model.input_dim() {
            return Err(NnError::ShapeMismatch {
                expected: model.input_dim(),
                found: features.cols(),
            }
            .into());
        }
        let reps = match model {
            ModelParams::Mlp(_) => {
                if features.rows() != context.num_nodes() {
                    return Err(NnError::ShapeMismatch {
                        expected: context.num_nodes(),
                        found: features.rows(),
                    }
                    .into());
                }
                features.clone()
            }
            ModelParams::Gnn(p) => sage_embed(p, features, context)?.0,
        };
        let head = head_of(model);
        let h = head.dims.hidden;
        let mut left = Matrix::zeros(reps.rows(), h);
        let mut right = Matrix::zeros(reps.rows(), h);
        for v in 0..reps.rows() {
            head.project_left(reps.row(v), left.row_mut(v));
            head.project_right(reps.row(v), right.row_mut(v));
        }
        Ok(Self {
            model: model.clone(),
            left,
            right,
        })
    }

    pub fn model(&self) -> &ModelParams {
        &self.model
    }

    /// Symmetric score between a node that is not part of the context graph
    /// (no known neighbours) and context node `j`.
    pub fn score_new(&self, new_features: &[f64], j: usize) -> Result<f64, ModelError> {
        if j >= self.num_nodes() {
            return Err(ModelError::IndexOutOfRange(j));
        }
        let rep = match &self.model {
            ModelParams::Mlp(p) => {
                if new_features.len() != p.dims.input {
                    return Err(NnError::ShapeMismatch {
                        expected: p.dims.input,
                        found: new_features.len(),
                    }
                    .into());
                }
                new_features.to_vec()
            }
            ModelParams::Gnn(p) => p.embed_isolated(new_features)?,
        };
        let head = head_of(&self.model);
        let h = head.dims.hidden;
        let (mut l, mut r) = (vec![0.0; h], vec![0.0; h]);
        head.project_left(&rep, &mut l);
        head.project_right(&rep, &mut r);
        let a = probability(head.logit_from_projections(&l, self.right.row(j), None));
        let b = probability(head.logit_from_projections(self.left.row(j), &r, None));
        Ok((a + b) / 2.0)
    }
}

fn head_of(model: &ModelParams) -> &MlpParams {
    match model {
        ModelParams::Mlp(p) => p,
        ModelParams::Gnn(p) => &p.head,
    }
}

impl PairScorer for ModelScorer {
    fn num_nodes(&self) -> usize {
        self.left.rows()
    }

    fn score(&self, i: usize, j: usize) -> f64 {
        let head = head_of(&self.model);
        probability(head.logit_from_projections(self.left.row(i), self.right.row(j), None))
    }
}
