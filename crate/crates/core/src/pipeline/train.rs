use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::eval::{evaluate_with, PreparedData};
use super::pairs::{sample_pairs, sample_unordered_non_edges, LabeledPair, PairMode};
use super::{derive_seed, PipelineError};
use crate::models::{
    init_params, neighbor_mean_into, sage_inputs, GnnParams, MlpParams, ModelDims, ModelError, ModelKind, ModelParams,
    ModelScorer, Tape,
};
use crate::nn::{AdamConfig, AdamState, Matrix, Parameters};

/// How the GNN sees neighbourhoods while training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GnnTrainInputs {
    /// Each pair has an anchor endpoint that is treated like a cell about to
    /// be deployed: its neighbourhood is empty and it is left out of the other
    /// endpoint's neighbourhood. This is what scoring a new cell looks like.
    #[default]
    LeaveAnchorOut,
    /// Both endpoints aggregate over their full `train_graph` neighbourhood.
    FullTrainGraph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Ordered examples per Adam step.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Draw fresh negatives every epoch instead of once.
    pub resample_negatives: bool,
    /// Stop after this many epochs without a better validation accuracy.
    pub patience: Option<usize>,
    pub gnn_inputs: GnnTrainInputs,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 64,
            learning_rate: AdamConfig::default().lr,
            seed: 0,
            resample_negatives: true,
            patience: None,
            gnn_inputs: GnnTrainInputs::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::BadConfig(m.to_owned()));
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be a finite value >= 0");
        }
        if self.patience == Some(0) {
            return bad("patience must be positive when set");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean BCE over the epoch's examples, each taken before its own update.
    pub train_loss: f64,
    /// Balanced accuracy on the validation nodes at cutoff 0.5.
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation accuracy.
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// A training example before ordering: `anchor` and `other` are
/// `train_graph` indices.
#[derive(Debug, Clone, Copy)]
struct Example {
    anchor: usize,
    other: usize,
    label: f64,
}

trait Trainee: Parameters + Clone {
    fn zeros_like(&self) -> Self;
    fn step(&self, zi: &[f64], zj: &[f64], label: f64, weight: f64, tape: &mut Tape, grads: &mut Self) -> Result<f64, ModelError>;
    fn wrap(&self) -> ModelParams;
}

impl Trainee for MlpParams {
    fn zeros_like(&self) -> Self {
        MlpParams::zeros(self.dims)
    }

    fn step(&self, zi: &[f64], zj: &[f64], label: f64, weight: f64, tape: &mut Tape, grads: &mut Self) -> Result<f64, ModelError> {
        self.forward(zi, zj, tape)?;
        self.accumulate_backward(tape, label, weight, grads)
    }

    fn wrap(&self) -> ModelParams {
        ModelParams::Mlp(self.clone())
    }
}

impl Trainee for GnnParams {
    fn zeros_like(&self) -> Self {
        GnnParams::zeros(self.dims)
    }

    fn step(&self, zi: &[f64], zj: &[f64], label: f64, weight: f64, tape: &mut Tape, grads: &mut Self) -> Result<f64, ModelError> {
        self.forward(zi, zj, tape)?;
        self.accumulate_backward(tape, label, weight, grads)
    }

    fn wrap(&self) -> ModelParams {
        ModelParams::Gnn(self.clone())
    }
}

/// Builds the model inputs of the two endpoints of an example.
enum Inputs {
    Raw(Matrix),
    LeaveAnchorOut(Matrix),
    Precomputed(Matrix),
}

impl Inputs {
    fn fill(&self, data: &PreparedData, ex: &Example, za: &mut Vec<f64>, zo: &mut Vec<f64>) {
        za.clear();
        zo.clear();
        match self {
            Inputs::Raw(x) => {
                za.extend_from_slice(x.row(ex.anchor));
                zo.extend_from_slice(x.row(ex.other));
            }
            Inputs::Precomputed(z) => {
                za.extend_from_slice(z.row(ex.anchor));
                zo.extend_from_slice(z.row(ex.other));
            }
            Inputs::LeaveAnchorOut(x) => {
                let k = x.cols();
                za.extend_from_slice(x.row(ex.anchor));
                za.resize(2 * k, 0.0);
                zo.extend_from_slice(x.row(ex.other));
                zo.resize(2 * k, 0.0);
                let nbrs = data.split.train_graph.neighbor_indices(ex.other);
                neighbor_mean_into(x, nbrs, Some(ex.anchor), &mut zo[k..]);
            }
        }
    }
}

/// Trains one model on balanced pairs among train nodes.
///
/// Each epoch uses every `train_graph` edge once plus the same number of
/// uniformly drawn non-edges; each pair gets a random anchor endpoint and is
/// presented in both orders. Minibatches minimize mean BCE with Adam. The
/// returned parameters are those with the best balanced accuracy on the
/// validation nodes (earliest epoch wins ties); without validation nodes the
/// last epoch is returned.
pub fn train(kind: ModelKind, dims: ModelDims, data: &PreparedData, cfg: &TrainConfig) -> Result<TrainOutcome, PipelineError> {
    cfg.validate()?;
    let tg = &data.split.train_graph;
    if tg.num_nodes() < 2 {
        return Err(PipelineError::EmptyTrainSet);
    }
    if tg.num_edges() == 0 {
        return Err(PipelineError::DegenerateGraph);
    }
    if dims.input != data.features.cols() {
        return Err(PipelineError::BadConfig(format!(
            "model input dim {} but data has {} feature columns",
            dims.input,
            data.features.cols()
        )));
    }
    let x = data.train_features();
    match init_params(kind, dims, derive_seed(cfg.seed, "init"))? {
        ModelParams::Mlp(p) => fit(p, Inputs::Raw(x), data, cfg),
        ModelParams::Gnn(p) => {
            let inputs = match cfg.gnn_inputs {
                GnnTrainInputs::LeaveAnchorOut => Inputs::LeaveAnchorOut(x),
                GnnTrainInputs::FullTrainGraph => Inputs::Precomputed(sage_inputs(&x, tg)?),
            };
            fit(p, inputs, data, cfg)
        }
    }
}

fn fit<P: Trainee>(init: P, inputs: Inputs, data: &PreparedData, cfg: &TrainConfig) -> Result<TrainOutcome, PipelineError> {
    let tg = &data.split.train_graph;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "pairs"));
    let val_pairs = if data.split.val_nodes.is_empty() {
        Vec::new()
    } else {
        sample_pairs(&data.graph, &data.split.val_nodes, PairMode::Balanced, derive_seed(cfg.seed, "val-pairs"))?
    };

    let adam = AdamConfig {
        lr: cfg.learning_rate,
        ..AdamConfig::default()
    };
    let mut params = init;
    let mut state = AdamState::new(&params, adam);
    let mut grads = params.zeros_like();
    let mut tape = Tape::new();
    let (mut za, mut zo) = (Vec::new(), Vec::new());

    let positives = tg.edge_indices().to_vec();
    let mut examples = Vec::new();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, P)> = None;

    for epoch in 1..=cfg.epochs {
        if epoch == 1 || cfg.resample_negatives {
            let negatives = sample_unordered_non_edges(tg, positives.len(), &mut rng)?;
            // (example, anchor first?) in canonical order
            examples.clear();
            for (&(u, v), label) in positives.iter().map(|p| (p, 1.0)).chain(negatives.iter().map(|p| (p, 0.0))) {
                let (anchor, other) = if rng.random_bool(0.5) { (u, v) } else { (v, u) };
                let ex = Example { anchor, other, label };
                examples.push((ex, true));
                examples.push((ex, false));
            }
        }
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(&mut rng);

        let mut losses = vec![0.0; examples.len()];
        for batch in order.chunks(cfg.batch_size) {
            grads.fill_zero();
            let weight = 1.0 / batch.len() as f64;
            for &idx in batch {
                let (ex, anchor_first) = examples[idx];
                inputs.fill(data, &ex, &mut za, &mut zo);
                let (zi, zj) = if anchor_first { (&za, &zo) } else { (&zo, &za) };
                losses[idx] = params.step(zi, zj, ex.label, weight, &mut tape, &mut grads)?;
            }
            state.step(&mut params, &grads).map_err(ModelError::from)?;
        }
        let train_loss = losses.iter().sum::<f64>() / losses.len() as f64;

        let val_accuracy = if val_pairs.is_empty() {
            0.0
        } else {
            val_accuracy(&params.wrap(), data, &val_pairs)?
        };
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_accuracy,
        });
        log::debug!("epoch {epoch}: loss {train_loss:.5} val acc {val_accuracy:.4}");

        let improved = best.as_ref().is_none_or(|(acc, _, _)| val_accuracy > *acc);
        if improved {
            best = Some((val_accuracy, epoch, params.clone()));
        }
        let (_, best_epoch, _) = best.as_ref().expect("set on first epoch");
        if let Some(p) = cfg.patience {
            if epoch - best_epoch >= p {
                break;
            }
        }
    }

    let (params, best_epoch) = if val_pairs.is_empty() {
        (params, history.len())
    } else {
        let (_, e, p) = best.expect("at least one epoch");
        (p, e)
    };
    Ok(TrainOutcome {
        params: params.wrap(),
        history,
        best_epoch,
    })
}

fn val_accuracy(model: &ModelParams, data: &PreparedData, pairs: &[LabeledPair]) -> Result<f64, PipelineError> {
    let scorer = ModelScorer::new(model, &data.features, &data.context)?;
    let correct = pairs
        .iter()
        .filter(|p| (crate::models::PairScorer::symmetric_score(&scorer, p.i, p.j) >= 0.5) == p.label)
        .count();
    Ok(correct as f64 / pairs.len() as f64)
}

/// Balanced accuracy of `model` on pairs among train nodes, scored on the
/// train graph.
pub fn train_accuracy(model: &ModelParams, data: &PreparedData, seed: u64) -> Result<f64, PipelineError> {
    let x = data.train_features();
    let tg = &data.split.train_graph;
    let scorer = ModelScorer::new(model, &x, tg)?;
    let all: Vec<usize> = (0..tg.num_nodes()).collect();
    let r = evaluate_with(&scorer, tg, &all, PairMode::Balanced, 0.5, seed)?;
    Ok(r.accuracy)
}
