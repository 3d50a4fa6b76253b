use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ran_topo_core::candidate::evaluate_candidates;
use ran_topo_core::pipeline::{
    model_reports, predict_new_node, prepare_data, summary_table, train_models, write_bundle, DataSource, EvalSplit,
    ExperimentConfig, NamedReport, ReportBundle, TrainedModel,
};
use ran_topo_core::pipeline::{run_experiment, ErrorClass, PipelineError, StageError};
use ran_topo_core::synth::{export, generate, SynthConfig};
use ran_topo_core::{CandidateConfig, ModelParams};

mod failure;

use failure::Failure;

#[derive(Parser)]
#[command(name = "ran-topo", version, about = "Mobility relation prediction for new cells")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic network with known relations.
    Synth {
        /// Synthetic network config (JSON); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate the geographic candidate filter on its own.
    Candidates {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        k: usize,
        /// Maximum distance in km; unlimited when omitted.
        #[arg(long)]
        max_dist_km: Option<f64>,
        #[arg(long, value_enum)]
        eval_split: Option<SplitArg>,
        /// Also write the report as JSON into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train both models and write their parameters and histories.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate trained models in every pair regime.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        /// Parameter files, or directories written by `train`.
        #[arg(long, required = true)]
        params: Vec<PathBuf>,
        #[arg(long, value_enum)]
        eval_split: Option<SplitArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank relations for a cell that is not in the network yet.
    Predict {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        params: PathBuf,
        /// JSON object mapping every feature column to its raw value.
        #[arg(long)]
        new_cell: String,
        #[arg(long)]
        cutoff: Option<f64>,
        #[arg(long)]
        max_neighbors: Option<usize>,
        /// Overrides the candidate filter of the config.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        max_dist_km: Option<f64>,
    },
    /// Full run: data, training, every evaluation and the report bundle.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Cell table; replaces the data source of the config.
    #[arg(long, requires = "edges")]
    cells: Option<PathBuf>,
    #[arg(long, requires = "cells")]
    edges: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Val,
    Test,
}

impl From<SplitArg> for EvalSplit {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Val => EvalSplit::Val,
            SplitArg::Test => EvalSplit::Test,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RAN_TOPO_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Synth { config, out, seed } => cmd_synth(config.as_deref(), &out, seed),
        Command::Candidates {
            data,
            k,
            max_dist_km,
            eval_split,
            out,
        } => cmd_candidates(&data, k, max_dist_km, eval_split, out.as_deref()),
        Command::Train { data, out } => cmd_train(&data, &out),
        Command::Eval {
            data,
            params,
            eval_split,
            out,
        } => cmd_eval(&data, &params, eval_split, &out),
        Command::Predict {
            data,
            params,
            new_cell,
            cutoff,
            max_neighbors,
            k,
            max_dist_km,
        } => cmd_predict(&data, &params, &new_cell, cutoff, max_neighbors, k, max_dist_km),
        Command::Experiment { config, out, seed } => cmd_experiment(&config, &out, seed),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::io(format!("write: {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::io(format!("write: {}: {e}", dir.display())))
}

fn cmd_synth(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let mut cfg = match config {
        Some(p) => serde_json::from_str::<SynthConfig>(&read_text(p)?).map_err(|e| Failure::config(e.to_string()))?,
        None => SynthConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let gt = generate(&cfg).map_err(|e| Failure::stage("data", e))?;
    export(&gt, out).map_err(|e| Failure::stage("write", e))?;
    let meta = serde_json::to_string_pretty(&gt.meta()).expect("meta serializes");
    write_text(&out.join("groundtruth-meta.json"), &(meta + "\n"))?;
    println!("{} cells, {} relations written to {}", gt.graph.num_nodes(), gt.graph.num_edges(), out.display());
    Ok(())
}

/// Experiment config from `--config`, with `--cells/--edges` and `--seed`
/// applied. Without a config the defaults of a CSV experiment are used.
fn load_config(args: &DataArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(p) => serde_json::from_str::<ExperimentConfig>(&read_text(p)?).map_err(|e| Failure::config(e.to_string()))?,
        None => {
            let (Some(cells), Some(edges)) = (&args.cells, &args.edges) else {
                return Err(Failure::config("either --config or --cells and --edges is required"));
            };
            ExperimentConfig {
                seed: 0,
                data: DataSource::Csv {
                    cells: cells.clone(),
                    edges: edges.clone(),
                },
                split: Default::default(),
                missing_policy: Default::default(),
                candidates: Vec::new(),
                filter: CandidateConfig::new(30, f64::INFINITY),
                model: Default::default(),
                train: Default::default(),
                cutoffs: vec![0.5],
                eval_split: EvalSplit::Val,
            }
        }
    };
    if let (Some(cells), Some(edges)) = (&args.cells, &args.edges) {
        cfg.data = DataSource::Csv {
            cells: cells.clone(),
            edges: edges.clone(),
        };
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| Failure::stage("config", e))?;
    Ok(cfg)
}

fn print_reports(reports: &[NamedReport]) {
    print!("{}", summary_table(reports));
}

fn cmd_candidates(
    args: &DataArgs,
    k: usize,
    max_dist_km: Option<f64>,
    eval_split: Option<SplitArg>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let mut cfg = load_config(args)?;
    if let Some(s) = eval_split {
        cfg.eval_split = s.into();
    }
    let cand = CandidateConfig::new(k, max_dist_km.unwrap_or(f64::INFINITY));
    cand.validate().map_err(|e| Failure::stage("config", e))?;
    let data = prepare_data(&cfg)?;
    let report = evaluate_candidates(&data.graph, cfg.eval_nodes(&data), &cand).map_err(|e| Failure::stage("evaluate", e))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    if let Some(dir) = out {
        create_dir(dir)?;
        write_text(&dir.join(format!("candidate-{}.json", cand.label())), &json)?;
    }
    print_reports(&[NamedReport {
        model: "candidate".into(),
        candidate: Some(cand),
        report,
    }]);
    Ok(())
}

fn cmd_train(args: &DataArgs, out: &Path) -> Result<(), Failure> {
    let cfg = load_config(args)?;
    let data = prepare_data(&cfg)?;
    let models = train_models(&cfg, &data)?;
    let bundle = ReportBundle {
        config: cfg,
        norm: data.norm.clone(),
        reports: Vec::new(),
        models,
    };
    write_bundle(&bundle, out)?;
    for m in &bundle.models {
        println!("{}: best epoch {} of {}", m.kind.name(), m.best_epoch, m.history.len());
    }
    Ok(())
}

fn load_params(paths: &[PathBuf]) -> Result<Vec<ModelParams>, Failure> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let found: Vec<PathBuf> = ["params-mlp.json", "params-gnn.json"].iter().map(|n| p.join(n)).filter(|f| f.is_file()).collect();
            if found.is_empty() {
                return Err(Failure::io(format!("{}: no params-mlp.json or params-gnn.json", p.display())));
            }
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    files
        .iter()
        .map(|f| ModelParams::from_json(&read_text(f)?).map_err(|e| Failure::config(format!("{}: {e}", f.display()))))
        .collect()
}

fn cmd_eval(args: &DataArgs, params: &[PathBuf], eval_split: Option<SplitArg>, out: &Path) -> Result<(), Failure> {
    let mut cfg = load_config(args)?;
    if let Some(s) = eval_split {
        cfg.eval_split = s.into();
    }
    let models = load_params(params)?;
    let data = prepare_data(&cfg)?;
    let mut reports = ran_topo_core::pipeline::candidate_reports(&cfg, &data)?;
    for m in &models {
        reports.extend(model_reports(&cfg, &data, m)?);
    }
    let bundle = ReportBundle {
        config: cfg,
        norm: data.norm.clone(),
        reports,
        models: Vec::<TrainedModel>::new(),
    };
    write_bundle(&bundle, out)?;
    print_reports(&bundle.reports);
    Ok(())
}

/// Raw feature vector of the new cell in the column order of the network.
fn new_cell_features(json: &str, columns: &[String]) -> Result<Vec<f64>, Failure> {
    let obj: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(json).map_err(|e| Failure::config(format!("--new-cell: {e}")))?;
    if let Some(extra) = obj.keys().find(|k| !columns.contains(k)) {
        return Err(Failure::config(format!("--new-cell: unknown column {extra:?}")));
    }
    columns
        .iter()
        .map(|c| {
            obj.get(c)
                .and_then(|v| v.as_f64())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Failure::config(format!("--new-cell: column {c:?} needs a finite number")))
        })
        .collect()
}

fn cmd_predict(
    args: &DataArgs,
    params: &Path,
    new_cell: &str,
    cutoff: Option<f64>,
    max_neighbors: Option<usize>,
    k: Option<usize>,
    max_dist_km: Option<f64>,
) -> Result<(), Failure> {
    let cfg = load_config(args)?;
    let model = match load_params(&[params.to_path_buf()])?.as_slice() {
        [m] => m.clone(),
        _ => return Err(Failure::config("--params must name a single parameter file")),
    };
    let mut filter = cfg.filter;
    if let Some(k) = k {
        filter.k = k;
    }
    if let Some(m) = max_dist_km {
        filter.max_dist = m;
    }
    filter.validate().map_err(|e| Failure::stage("config", e))?;
    let cutoff = cutoff.unwrap_or(cfg.cutoffs[0]);

    let data = prepare_data(&cfg)?;
    let features = data.graph.features();
    let raw = new_cell_features(new_cell, features.columns())?;
    let coords = features
        .coord_columns()
        .map(|c| (raw[c.lat], raw[c.lon]))
        .ok_or_else(|| Failure::config("the network has no coordinate columns"))?;
    let normalized = data.norm.apply_row(&raw).map_err(|e| Failure::stage("config", e))?;
    // every existing cell and relation is known when a new cell is planned
    let scorer = ran_topo_core::models::ModelScorer::new(&model, &data.features, &data.graph)
        .map_err(|e| Failure::stage("evaluate", e))?;
    let pred = predict_new_node(&scorer, &data.graph, &normalized, coords, &filter, cutoff, max_neighbors)
        .map_err(|e| Failure::stage("evaluate", e))?;
    if pred.no_candidates {
        eprintln!("warning: the candidate filter returned no cells, nothing to score");
    }
    let list: Vec<serde_json::Value> = pred
        .neighbors
        .iter()
        .map(|(id, p)| serde_json::json!({ "cell": id.as_str(), "probability": p }))
        .collect();
    println!("{}", serde_json::to_string_pretty(&list).expect("json"));
    Ok(())
}

fn cmd_experiment(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let cfg = load_config(&DataArgs {
        config: Some(config.to_path_buf()),
        cells: None,
        edges: None,
        seed,
    })?;
    let bundle = run_experiment(&cfg)?;
    write_bundle(&bundle, out)?;
    print_reports(&bundle.reports);
    Ok(())
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        Failure::new(e.class(), e.to_string())
    }
}

impl Failure {
    fn stage(stage: &'static str, e: impl Into<PipelineError>) -> Self {
        StageError { stage, source: e.into() }.into()
    }

    fn config(msg: impl Into<String>) -> Self {
        Failure::new(ErrorClass::Config, format!("config: {}", msg.into()))
    }

    fn io(msg: impl Into<String>) -> Self {
        Failure::new(ErrorClass::Io, msg.into())
    }
}
