use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use neurograph_core::dataset::{load_cohort, save_cohort, synth_cohort, validate_cohort};
use neurograph_core::explain::{
    centrality_csv, centrality_report, coherence_edges, combine_bands, edge_betweenness, export_report,
    extract_attention, weighted_clustering, CentralityReport, EdgeMetrics, ExportFormat, NodeMetrics, WeightedEdge,
};
use neurograph_core::fsio;
use neurograph_core::graph::{parse_band_list, GraphDocument};
use neurograph_core::nn::GatModel;
use neurograph_core::pipeline::{patient_graph, prepare_samples};
use neurograph_core::rewire::rewire_patient;
use neurograph_core::train::{run_cv, CvOutcome, CvReport, Sample};
use neurograph_core::{Cohort, Error, MultiLayerGraph, PatientRecord, SeverityClass};

use crate::config::{CombineRule, PipelineConfig};
use crate::logging::Logger;
use crate::{CliError, StageExt};

#[derive(Debug, Parser)]
#[command(name = "neurograph", version, about = "Graph-attention severity regression on multi-band EEG connectivity")]
pub struct Cli {
    /// Suppress progress events on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Also log every training epoch.
    #[arg(long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort with a planted severity signal.
    Synth(SynthArgs),
    /// Check a cohort on disk and list every violation.
    Validate(ValidateArgs),
    /// Sparsify each patient's band matrices into multi-layer graphs.
    Rewire(GraphArgs),
    /// Rewire and attach positional node features.
    Encode(GraphArgs),
    /// Cross-validated training; writes a report.
    Train(TrainArgs),
    /// Full pipeline: graphs, cross-validation, checkpoints, explanations.
    Run(RunArgs),
    /// Attention graphs and centrality for one patient from a checkpoint.
    Explain(ExplainArgs),
    /// Convert a graph or centrality report to JSON, GraphML or DOT.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Pipeline config; only its `[synth]` section is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Cohort manifest.
    #[arg(long)]
    pub cohort: PathBuf,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long)]
    pub cohort: PathBuf,
    /// Restrict to these patients (repeatable); all patients by default.
    #[arg(long)]
    pub patient: Vec<String>,
    /// Directory receiving one `<patient>.json` graph per patient.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Flags that override the `[train]` section.
#[derive(Debug, Default, Args)]
pub struct TrainOverrides {
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub wd: Option<f64>,
    /// Plateau patience of the learning-rate scheduler, in epochs.
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub early_stop: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Root of every random choice in training.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl TrainOverrides {
    fn apply(&self, cfg: &mut PipelineConfig) {
        let t = &mut cfg.train;
        if let Some(v) = self.folds {
            t.folds = v;
        }
        if let Some(v) = self.seeds {
            t.seeds = v;
        }
        if let Some(v) = self.batch {
            t.batch_size = v;
        }
        if let Some(v) = self.lr {
            t.lr = v;
        }
        if let Some(v) = self.wd {
            t.weight_decay = v;
        }
        if let Some(v) = self.patience {
            t.plateau_patience = v;
        }
        if let Some(v) = self.early_stop {
            t.early_stop_patience = v;
        }
        if let Some(v) = self.max_epochs {
            t.max_epochs = v;
        }
        if let Some(v) = self.seed {
            t.seed = v;
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: TrainOverrides,
    #[arg(long, default_value = "report.json")]
    pub out: PathBuf,
    /// Directory for the best checkpoint of every fold and seed.
    #[arg(long)]
    pub checkpoints: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: TrainOverrides,
    /// Patients to explain, added to the config's list.
    #[arg(long)]
    pub explain: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long)]
    pub patient: String,
    /// Comma-separated bands, e.g. `a1,a2,b1`.
    #[arg(long)]
    pub bands: Option<String>,
    #[arg(long, value_enum, default_value = "max")]
    pub combine: CombineArg,
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Attention layer to read; the last one by default.
    #[arg(long)]
    pub layer: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum CombineArg {
    Max,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// A graph written by `rewire`/`encode` or a JSON centrality report.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub format: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Edge betweenness with length 1/weight instead of hop count.
    #[arg(long)]
    pub weighted: bool,
}

pub const REPORT_FORMAT: &str = "neurograph-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct CohortSummary {
    pub n_patients: usize,
    pub class_histogram: BTreeMap<SeverityClass, usize>,
}

impl CohortSummary {
    fn of(cohort: &Cohort) -> Self {
        let h = cohort.class_histogram();
        Self {
            n_patients: cohort.len(),
            class_histogram: SeverityClass::ALL.iter().map(|&c| (c, h[c.index()])).collect(),
        }
    }
}

/// Top-level `report.json` of `train` and `run`.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub format: String,
    pub version: u32,
    pub config: PipelineConfig,
    pub cohort: CohortSummary,
    pub cv: CvReport,
}

pub fn run_cli(cli: Cli) -> Result<(), CliError> {
    let log = Logger::new(cli.quiet, cli.verbose);
    match cli.command {
        Command::Synth(a) => cmd_synth(&a, &log),
        Command::Validate(a) => cmd_validate(&a, &log),
        Command::Rewire(a) => cmd_graphs(&a, false, &log),
        Command::Encode(a) => cmd_graphs(&a, true, &log),
        Command::Train(a) => cmd_train(&a, &log),
        Command::Run(a) => cmd_run(&a, &log),
        Command::Explain(a) => cmd_explain(&a, &log),
        Command::Export(a) => cmd_export(&a, &log),
    }
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, CliError> {
    PipelineConfig::load_or_default(path).stage("config")
}

fn validated(cfg: PipelineConfig) -> Result<PipelineConfig, CliError> {
    cfg.validate().stage("config")?;
    Ok(cfg)
}

pub fn cmd_synth(a: &SynthArgs, log: &Logger) -> Result<(), CliError> {
    let cfg = load_config(a.config.as_deref())?;
    let cohort = synth_cohort(a.n, a.seed, &cfg.synth).stage("synth")?;
    let manifest = save_cohort(&cohort, &a.out).stage("synth")?;
    let summary = CohortSummary::of(&cohort);
    log.info("synth", "written", json!({ "manifest": manifest, "patients": cohort.len() }));
    println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    Ok(())
}

pub fn cmd_validate(a: &ValidateArgs, log: &Logger) -> Result<(), CliError> {
    let violations = validate_cohort(&a.cohort);
    for v in &violations {
        println!("{v}");
    }
    log.info("validate", "checked", json!({ "violations": violations.len() }));
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invalid(violations.len()))
    }
}

fn load(path: &Path, log: &Logger) -> Result<Cohort, CliError> {
    let cohort = load_cohort(path).stage("ingest")?;
    log.info("ingest", "loaded", json!({ "patients": cohort.len() }));
    Ok(cohort)
}

fn select<'a>(cohort: &'a Cohort, ids: &[String]) -> Result<Vec<&'a PatientRecord>, CliError> {
    if ids.is_empty() {
        return Ok(cohort.patients().iter().collect());
    }
    ids.iter()
        .map(|id| {
            cohort
                .patient(id)
                .ok_or_else(|| Error::Argument(format!("patient `{id}` is not in the cohort")))
                .stage("select")
        })
        .collect()
}

pub fn cmd_graphs(a: &GraphArgs, encode: bool, log: &Logger) -> Result<(), CliError> {
    let cfg = validated(load_config(a.config.as_deref())?)?;
    let cohort = load(&a.cohort, log)?;
    let stage = if encode { "encode" } else { "rewire" };
    std::fs::create_dir_all(&a.out).map_err(|e| Error::Io { path: a.out.clone(), source: e }).stage(stage)?;
    for p in select(&cohort, &a.patient)? {
        let graph = if encode {
            patient_graph(p, cohort.areas(), &cfg.rewire, &cfg.encoding)
        } else {
            rewire_patient(p, cohort.areas(), &cfg.rewire)
        }
        .stage(stage)?;
        let path = a.out.join(format!("{}.json", p.patient_id));
        fsio::write_json(&path, &graph.to_document()).stage(stage)?;
        let retention: Vec<f64> = graph.layers().iter().map(neurograph_core::rewire::retention_fraction).collect();
        log.info(stage, "graph", json!({ "patient": p.patient_id, "nodes": graph.node_count(), "retention": retention }));
    }
    Ok(())
}

fn cross_validate(cfg: &PipelineConfig, samples: &[Sample], log: &Logger) -> Result<CvOutcome, CliError> {
    log.info(
        "train",
        "start",
        json!({ "patients": samples.len(), "folds": cfg.train.folds, "seeds": cfg.train.seeds }),
    );
    let progress = |p: neurograph_core::train::Progress<'_>| {
        log.debug("train", "epoch", json!({ "fold": p.fold, "replicate": p.replicate, "metrics": p.epoch }));
    };
    let outcome = run_cv(samples, &cfg.model, &cfg.train, &progress).stage("train")?;
    for f in &outcome.report.folds {
        log.info(
            "train",
            "run",
            json!({
                "fold": f.fold, "replicate": f.replicate, "best_epoch": f.best_epoch,
                "stopped_epoch": f.stopped_epoch, "val_mae": f.best_val_mae,
                "test_mae": f.test_mae, "baseline_mae": f.baseline_mae,
            }),
        );
    }
    let agg = &outcome.report.aggregate;
    log.info(
        "train",
        "aggregate",
        json!({ "test_mae": agg.test_mae, "baseline_mae": agg.baseline_mae, "improvement": agg.improvement_over_baseline }),
    );
    Ok(outcome)
}

fn write_checkpoints(outcome: &CvOutcome, dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e }).stage("checkpoint")?;
    for (f, model) in outcome.report.folds.iter().zip(&outcome.models) {
        let path = dir.join(checkpoint_name(f.fold, f.replicate));
        model.save(&path).stage("checkpoint")?;
    }
    Ok(())
}

pub fn checkpoint_name(fold: usize, replicate: usize) -> String {
    format!("fold{fold}_seed{replicate}.json")
}

fn train_pipeline(
    cohort_path: &Path,
    cfg: &PipelineConfig,
    log: &Logger,
) -> Result<(Cohort, CvOutcome, RunReport), CliError> {
    let cohort = load(cohort_path, log)?;
    let samples = prepare_samples(&cohort, &cfg.rewire, &cfg.encoding).stage("encode")?;
    log.info("encode", "ready", json!({ "graphs": samples.len() }));
    let outcome = cross_validate(cfg, &samples, log)?;
    let report = RunReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        config: cfg.clone(),
        cohort: CohortSummary::of(&cohort),
        cv: outcome.report.clone(),
    };
    Ok((cohort, outcome, report))
}

pub fn cmd_train(a: &TrainArgs, log: &Logger) -> Result<(), CliError> {
    let mut cfg = load_config(a.config.as_deref())?;
    a.overrides.apply(&mut cfg);
    let cfg = validated(cfg)?;
    let (_, outcome, report) = train_pipeline(&a.cohort, &cfg, log)?;
    fsio::write_json(&a.out, &report).stage("report")?;
    if let Some(dir) = &a.checkpoints {
        write_checkpoints(&outcome, dir)?;
    }
    log.info("report", "written", json!({ "path": a.out }));
    Ok(())
}

pub fn cmd_run(a: &RunArgs, log: &Logger) -> Result<(), CliError> {
    let mut cfg = load_config(a.config.as_deref())?;
    a.overrides.apply(&mut cfg);
    cfg.explain.patients.extend(a.explain.iter().cloned());
    let cfg = validated(cfg)?;
    let (cohort, outcome, report) = train_pipeline(&a.cohort, &cfg, log)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::Io { path: a.out.clone(), source: e }).stage("report")?;
    write_checkpoints(&outcome, &a.out.join("checkpoints"))?;

    for pid in &cfg.explain.patients {
        let record = cohort
            .patient(pid)
            .ok_or_else(|| Error::Argument(format!("explain patient `{pid}` is not in the cohort")))
            .stage("explain")?;
        // explain with the first replicate of the fold that held the patient out
        let run = outcome
            .report
            .folds
            .iter()
            .position(|f| f.replicate == 0 && f.predictions.iter().any(|p| &p.patient_id == pid))
            .expect("every patient is tested in exactly one fold");
        let dir = a.out.join("explain").join(pid);
        explain_patient(&outcome.models[run], record, &cohort, &cfg, &cfg.explain.bands, &cfg.explain.formats, &dir, log)?;
    }
    let path = a.out.join("report.json");
    fsio::write_json(&path, &report).stage("report")?;
    log.info("report", "written", json!({ "path": path }));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn explain_patient(
    model: &GatModel,
    record: &PatientRecord,
    cohort: &Cohort,
    cfg: &PipelineConfig,
    bands: &[neurograph_core::FrequencyBand],
    formats: &[ExportFormat],
    dir: &Path,
    log: &Logger,
) -> Result<(), CliError> {
    let graph = patient_graph(record, cohort.areas(), &cfg.rewire, &cfg.encoding).stage("explain")?;
    let extraction = extract_attention(model, &graph, cfg.explain.layer).stage("explain")?;
    let (coherence, _) = coherence_edges(&graph);
    let graph_bands = graph.bands();
    let weighted = cfg.explain.weighted_betweenness;

    let mut reports = Vec::new();
    let mut chosen_att = Vec::new();
    let mut chosen_coh = BTreeMap::new();
    for band in bands {
        let idx = graph_bands
            .iter()
            .position(|b| b == band)
            .ok_or_else(|| Error::Argument(format!("band {band} is not in the patient graph")))
            .stage("explain")?;
        let att = &extraction.bands[idx];
        reports.push(centrality_report(band.name(), att, &coherence[idx], weighted).stage("explain")?);
        chosen_att.push(att.clone());
        for &(u, v, w) in &coherence[idx] {
            let slot: &mut f64 = chosen_coh.entry((u, v)).or_insert(w);
            *slot = slot.max(w);
        }
    }
    match cfg.explain.combine {
        CombineRule::Max => {
            let combined = combine_bands(&chosen_att).stage("explain")?;
            let coh: Vec<WeightedEdge> = chosen_coh.into_iter().map(|((u, v), w)| (u, v, w)).collect();
            reports.push(centrality_report("combined", &combined, &coh, weighted).stage("explain")?);
        }
    }

    std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e }).stage("explain")?;
    for r in &reports {
        for &f in formats {
            export_report(r, f, &dir.join(format!("{}.{}", r.name, f.extension()))).stage("export")?;
        }
    }
    let table = centrality_csv(&reports).stage("export")?;
    fsio::write_atomic(&dir.join("centrality.csv"), table.as_bytes()).stage("export")?;
    log.info("explain", "written", json!({ "patient": record.patient_id, "dir": dir, "graphs": reports.len() }));
    Ok(())
}

pub fn cmd_explain(a: &ExplainArgs, log: &Logger) -> Result<(), CliError> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(b) = &a.bands {
        cfg.explain.bands = parse_band_list(b).stage("config")?;
    }
    if let Some(f) = &a.format {
        cfg.explain.formats = vec![f.parse().stage("config")?];
    }
    if a.layer.is_some() {
        cfg.explain.layer = a.layer;
    }
    match a.combine {
        CombineArg::Max => cfg.explain.combine = CombineRule::Max,
    }
    let model = GatModel::load(&a.checkpoint).stage("checkpoint")?;
    // the graph must be built the way the checkpoint was trained
    cfg.model = model.config().clone();
    let cfg = validated(cfg)?;
    let cohort = load(&a.cohort, log)?;
    let record = cohort
        .patient(&a.patient)
        .ok_or_else(|| Error::Argument(format!("patient `{}` is not in the cohort", a.patient)))
        .stage("explain")?;
    explain_patient(&model, record, &cohort, &cfg, &cfg.explain.bands, &cfg.explain.formats, &a.out, log)
}

/// Report over a rewired graph: node strength in place of attention
/// in-degree, coherence weights on edges.
fn graph_report(name: &str, graph: &MultiLayerGraph, weighted: bool) -> Result<CentralityReport, Error> {
    let doc = graph.to_document();
    let edges: Vec<WeightedEdge> = doc.edges.iter().filter(|e| e.u != e.v).map(|e| (e.u, e.v, e.weight)).collect();
    let n = graph.node_count();
    let clustering = weighted_clustering(n, &edges);
    let betweenness = edge_betweenness(n, &edges, weighted)?;
    let mut strength = vec![0.0; n];
    for &(u, v, w) in &edges {
        strength[u] += w;
        strength[v] += w;
    }
    Ok(CentralityReport {
        name: name.into(),
        nodes: doc
            .nodes
            .iter()
            .map(|nd| NodeMetrics {
                id: nd.id,
                label: format!("{}@{}", nd.label, nd.band.short()),
                in_degree: strength[nd.id],
                clustering: clustering[nd.id],
            })
            .collect(),
        edges: doc
            .edges
            .iter()
            .map(|e| EdgeMetrics {
                src: e.u,
                dst: e.v,
                attention: e.weight,
                kind: e.kind,
                betweenness: betweenness.get(&(e.u.min(e.v), e.u.max(e.v))).copied(),
            })
            .collect(),
    })
}

pub fn cmd_export(a: &ExportArgs, log: &Logger) -> Result<(), CliError> {
    let format: ExportFormat = a.format.parse().stage("config")?;
    let text = std::fs::read_to_string(&a.input).map_err(|e| Error::Io { path: a.input.clone(), source: e }).stage("export")?;
    let name = a.input.file_stem().and_then(|s| s.to_str()).unwrap_or("graph").to_string();
    let report = if let Ok(report) = serde_json::from_str::<CentralityReport>(&text) {
        report
    } else {
        let doc: GraphDocument = serde_json::from_str(&text)
            .map_err(|e| Error::Format { path: a.input.clone(), reason: format!("neither a report nor a graph: {e}") })
            .stage("export")?;
        let graph = MultiLayerGraph::from_document(&doc).stage("export")?;
        graph_report(&name, &graph, a.weighted).stage("export")?
    };
    export_report(&report, format, &a.out).stage("export")?;
    log.info("export", "written", json!({ "path": a.out, "nodes": report.nodes.len(), "edges": report.edges.len() }));
    Ok(())
}
