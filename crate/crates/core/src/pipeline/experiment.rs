use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::eval::{evaluate, PreparedData};
use super::pairs::PairMode;
use super::train::{train, EpochRecord, TrainConfig};
use super::{derive_seed, PipelineError, StageContext, StageError};
use crate::candidate::{evaluate_candidates, CandidateConfig};
use crate::data::{apply_missing_policy, parse_cells_csv, parse_edges_csv, MissingPolicy, NormParams};
use crate::graph::{build_graph, CellId, RanGraph, SplitRatios};
use crate::metrics::EvalReport;
use crate::models::{ModelDims, ModelKind, ModelParams};
use crate::synth::{generate, SynthConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// Generate a network; its seed is derived from the experiment seed.
    Synthetic(SynthConfig),
    Csv { cells: PathBuf, edges: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSplit {
    #[default]
    Val,
    Test,
}

/// Hidden sizes of both models; the input size follows the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelShape {
    pub embedding: usize,
    pub hidden: usize,
}

impl Default for ModelShape {
    fn default() -> Self {
        let d = ModelDims::default();
        Self {
            embedding: d.embedding,
            hidden: d.hidden,
        }
    }
}

fn default_cutoffs() -> Vec<f64> {
    vec![0.5]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data: DataSource,
    #[serde(default)]
    pub split: SplitRatios,
    #[serde(default)]
    pub missing_policy: MissingPolicy,
    /// Configurations of the candidate baseline, one report each.
    pub candidates: Vec<CandidateConfig>,
    /// Candidate filter used by the candidate-filtered evaluation of the models.
    pub filter: CandidateConfig,
    #[serde(default)]
    pub model: ModelShape,
    /// `seed` inside is replaced by a sub-seed of the experiment seed.
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_cutoffs")]
    pub cutoffs: Vec<f64>,
    #[serde(default)]
    pub eval_split: EvalSplit,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| PipelineError::BadConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.split.validate()?;
        self.train.validate()?;
        for c in self.candidates.iter().chain(std::iter::once(&self.filter)) {
            c.validate()?;
        }
        if self.cutoffs.is_empty() {
            return Err(PipelineError::BadConfig("cutoffs must not be empty".into()));
        }
        if let Some(c) = self.cutoffs.iter().find(|c| !(**c > 0.0 && **c < 1.0)) {
            return Err(PipelineError::BadConfig(format!("cutoff must lie in (0, 1), got {c}")));
        }
        if self.model.embedding == 0 || self.model.hidden == 0 {
            return Err(PipelineError::BadConfig("model sizes must be positive".into()));
        }
        if let DataSource::Synthetic(s) = &self.data {
            s.validate()?;
        }
        Ok(())
    }

    pub fn dims(&self, input: usize) -> ModelDims {
        ModelDims {
            input,
            embedding: self.model.embedding,
            hidden: self.model.hidden,
        }
    }

    pub fn eval_nodes<'a>(&self, data: &'a PreparedData) -> &'a [usize] {
        match self.eval_split {
            EvalSplit::Val => &data.split.val_nodes,
            EvalSplit::Test => &data.split.test_nodes,
        }
    }

    pub fn train_config(&self, kind: ModelKind) -> TrainConfig {
        TrainConfig {
            seed: derive_seed(self.seed, &format!("train-{}", kind.name())),
            ..self.train.clone()
        }
    }
}

fn open(path: &Path) -> std::io::Result<fs::File> {
    fs::File::open(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Reads cells and edges, resolves missing values and builds the graph.
/// Relations touching a dropped cell are discarded.
pub fn load_csv_graph(cells: &Path, edges: &Path, policy: MissingPolicy) -> Result<RanGraph, PipelineError> {
    let parsed = parse_cells_csv(open(cells)?)?;
    let pairs = parse_edges_csv(open(edges)?)?;
    let (features, kept) = apply_missing_policy(&parsed.features, &parsed.missing, policy)?;
    let ids: Vec<CellId> = kept.iter().map(|&r| parsed.ids[r].clone()).collect();
    let known: HashSet<&CellId> = parsed.ids.iter().collect();
    let alive: HashSet<&CellId> = ids.iter().collect();
    let mut dropped = 0usize;
    let mut kept_pairs = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        if alive.contains(&a) && alive.contains(&b) {
            kept_pairs.push((a, b));
        } else if known.contains(&a) && known.contains(&b) {
            dropped += 1;
        } else {
            // let build_graph report the unknown endpoint
            kept_pairs.push((a, b));
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} relations whose cells were removed for missing values");
    }
    Ok(build_graph(ids, &kept_pairs, features)?)
}

/// Loads or generates the graph, splits it and normalizes features.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData, StageError> {
    let graph = match &cfg.data {
        DataSource::Synthetic(s) => {
            let s = SynthConfig {
                seed: derive_seed(cfg.seed, "synth"),
                ..s.clone()
            };
            generate(&s).stage("data")?.graph
        }
        DataSource::Csv { cells, edges } => load_csv_graph(cells, edges, cfg.missing_policy).stage("data")?,
    };
    PreparedData::new(graph, cfg.split, derive_seed(cfg.seed, "split")).stage("split")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedReport {
    /// `candidate`, `mlp` or `gnn`.
    pub model: String,
    /// The candidate configuration involved, if any.
    pub candidate: Option<CandidateConfig>,
    pub report: EvalReport,
}

impl NamedReport {
    fn file_stem(&self, many_cutoffs: bool) -> String {
        let mut s = match (&self.candidate, self.report.mode.as_str()) {
            (Some(c), "candidate") => format!("candidate-{}", c.label()),
            _ => format!("{}-{}", self.model, self.report.mode),
        };
        if many_cutoffs {
            if let Some(c) = self.report.cutoff {
                write!(s, "-cut{c}").expect("string write");
            }
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub config: ExperimentConfig,
    pub norm: NormParams,
    pub reports: Vec<NamedReport>,
    pub models: Vec<TrainedModel>,
}

impl ReportBundle {
    /// First report for `model` (`candidate`, `mlp`, `gnn`) in `mode`.
    pub fn report(&self, model: &str, mode: &str) -> Option<&EvalReport> {
        self.reports
            .iter()
            .find(|r| r.model == model && r.report.mode == mode)
            .map(|r| &r.report)
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("model,mode,k,max_dist_km,cutoff,pairs,tp,fp,tn,fn,accuracy_pct,precision_pct,recall_pct,auc\n");
        for r in &self.reports {
            let (k, m) = match &r.candidate {
                Some(c) => (
                    c.k.to_string(),
                    if c.max_dist.is_infinite() { "inf".into() } else { c.max_dist.to_string() },
                ),
                None => (String::new(), String::new()),
            };
            let e = &r.report;
            let cutoff = e.cutoff.map(|c| c.to_string()).unwrap_or_default();
            let auc = e.auc.map(|a| format!("{a:.6}")).unwrap_or_default();
            writeln!(
                out,
                "{},{},{k},{m},{cutoff},{},{},{},{},{},{:.4},{:.4},{:.4},{auc}",
                r.model,
                e.mode,
                e.pairs,
                e.tp,
                e.fp,
                e.tn,
                e.fn_,
                100.0 * e.accuracy,
                100.0 * e.precision,
                100.0 * e.recall
            )
            .expect("string write");
        }
        out
    }
}

/// Candidate baseline reports, one per configured candidate setting.
pub fn candidate_reports(cfg: &ExperimentConfig, data: &PreparedData) -> Result<Vec<NamedReport>, StageError> {
    let nodes = cfg.eval_nodes(data);
    cfg.candidates
        .iter()
        .map(|c| {
            Ok(NamedReport {
                model: "candidate".into(),
                candidate: Some(*c),
                report: evaluate_candidates(&data.graph, nodes, c).stage("evaluate")?,
            })
        })
        .collect()
}

/// Evaluates a trained model in the balanced, all-pairs and candidate-filtered
/// regimes, once per cutoff.
pub fn model_reports(cfg: &ExperimentConfig, data: &PreparedData, params: &ModelParams) -> Result<Vec<NamedReport>, StageError> {
    let nodes = cfg.eval_nodes(data);
    let seed = derive_seed(cfg.seed, "eval-pairs");
    let mut out = Vec::new();
    for &cutoff in &cfg.cutoffs {
        for mode in [PairMode::Balanced, PairMode::AllPairs, PairMode::CandidateFiltered(cfg.filter)] {
            let report = evaluate(params, data, nodes, mode, cutoff, seed).stage("evaluate")?;
            out.push(NamedReport {
                model: params.kind().name().into(),
                candidate: match mode {
                    PairMode::CandidateFiltered(c) => Some(c),
                    _ => None,
                },
                report,
            });
        }
    }
    Ok(out)
}

pub fn train_models(cfg: &ExperimentConfig, data: &PreparedData) -> Result<Vec<TrainedModel>, StageError> {
    let dims = cfg.dims(data.features.cols());
    [ModelKind::Mlp, ModelKind::Gnn]
        .into_iter()
        .map(|kind| {
            let stage = match kind {
                ModelKind::Mlp => "train-mlp",
                ModelKind::Gnn => "train-gnn",
            };
            log::info!("training {}", kind.name());
            let out = train(kind, dims, data, &cfg.train_config(kind)).stage(stage)?;
            Ok(TrainedModel {
                kind,
                params: out.params,
                history: out.history,
                best_epoch: out.best_epoch,
            })
        })
        .collect()
}

/// Data, split, normalization, both models, all evaluation regimes and the
/// candidate baseline. Deterministic for a given config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ReportBundle, StageError> {
    cfg.validate().stage("config")?;
    let data = prepare_data(cfg)?;
    let models = train_models(cfg, &data)?;
    let mut reports = candidate_reports(cfg, &data)?;
    for m in &models {
        reports.extend(model_reports(cfg, &data, &m.params)?);
    }
    Ok(ReportBundle {
        config: cfg.clone(),
        norm: data.norm.clone(),
        reports,
        models,
    })
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,val_accuracy\n");
    for h in history {
        writeln!(out, "{},{},{}", h.epoch, h.train_loss, h.val_accuracy).expect("string write");
    }
    out
}

/// Writes reports, `summary.csv`, histories, parameters, normalization
/// parameters and the resolved config into `dir`.
pub fn write_bundle(bundle: &ReportBundle, dir: &Path) -> Result<(), StageError> {
    let io = |r: std::io::Result<()>| r.stage("write");
    io(fs::create_dir_all(dir.join("reports")))?;
    let many = bundle.config.cutoffs.len() > 1;
    for r in &bundle.reports {
        let text = serde_json::to_string_pretty(&r.report).expect("report serializes");
        io(fs::write(dir.join("reports").join(format!("{}.json", r.file_stem(many))), text + "\n"))?;
    }
    io(fs::write(dir.join("summary.csv"), bundle.summary_csv()))?;
    for m in &bundle.models {
        let name = m.kind.name();
        if !m.history.is_empty() {
            io(fs::write(dir.join(format!("history-{name}.csv")), history_csv(&m.history)))?;
        }
        io(fs::write(dir.join(format!("params-{name}.json")), m.params.to_json() + "\n"))?;
    }
    io(fs::write(dir.join("norm_params.json"), bundle.norm.to_json() + "\n"))?;
    io(fs::write(dir.join("experiment.json"), bundle.config.to_json() + "\n"))?;
    Ok(())
}

fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

/// Fixed-width table of all reports: accuracy, precision and recall in
/// percent, then AUC.
pub fn summary_table(reports: &[NamedReport]) -> String {
    let mut out = format!(
        "{:<10} {:<19} {:<14} {:>9} {:>8} {:>10} {:>8} {:>7}\n",
        "model", "mode", "candidates", "pairs", "ACC %", "Prec %", "Rec %", "AUC"
    );
    for r in reports {
        let e = &r.report;
        let cand = r.candidate.map(|c| c.label()).unwrap_or_else(|| "-".into());
        let auc = e.auc.map(|a| format!("{a:.4}")).unwrap_or_else(|| "-".into());
        writeln!(
            out,
            "{:<10} {:<19} {:<14} {:>9} {:>8} {:>10} {:>8} {:>7}",
            r.model,
            e.mode,
            cand,
            e.pairs,
            pct(e.accuracy),
            pct(e.precision),
            pct(e.recall),
            auc
        )
        .expect("string write");
    }
    out
}
