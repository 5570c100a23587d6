//! Command-line front end: `gen`, `features`, `embed`, `train`, `eval` and
//! `apselect`.
//!
//! Every command computes all outputs before writing any file, writes a
//! `<prefix>_config.json` copy of its resolved settings, and reports failures
//! as one line on stderr:
//!
//! ```text
//! error: category=<usage|io|schema|config|runtime> code=<exit code> message="..."
//! ```

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cellfree::{
    build_all, generate_scenario, run_ap_selection, task_batch, task_labels, task_scores,
    ApSelectConfig, ApTask, EncoderConfig, InstanceGraph, ScenarioConfig,
};
use crate::embed::{random_walks, train_skipgram, SkipGramParams, WalkParams};
use crate::error::Error;
use crate::features::{edge_scores, graph_statistics, node_statistics, KatzParams, Level};
use crate::gnn::GnnModel;
use crate::graph::Graph;
use crate::seed;
use crate::train::{classification_metrics, pr_curve_csv, train, MetricsReport, PrPoint, TrainConfig};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_SCHEMA: i32 = 4;
pub const EXIT_CONFIG: i32 = 5;
pub const EXIT_RUNTIME: i32 = 6;

#[derive(Debug)]
pub struct CliError {
    pub category: &'static str,
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(category: &'static str, code: i32, message: impl Into<String>) -> Self {
        Self {
            category,
            code,
            message: message.into(),
        }
    }

    fn io(path: &Path, err: std::io::Error) -> Self {
        Self::new("io", EXIT_IO, format!("{}: {err}", path.display()))
    }

    fn config(message: impl Into<String>) -> Self {
        Self::new("config", EXIT_CONFIG, message)
    }

    /// Error raised while interpreting an input data file.
    fn input(path: &Path, err: Error) -> Self {
        match err {
            Error::Io(e) => Self::io(path, e),
            Error::Config(m) => Self::config(m),
            e @ (Error::Schema { .. } | Error::Json(_) | Error::InvalidGraph(_) | Error::Shape { .. }) => {
                Self::new("schema", EXIT_SCHEMA, format!("{}: {e}", path.display()))
            }
            e => Self::from(e),
        }
    }

    /// The single stderr line.
    pub fn line(&self) -> String {
        let msg = self.message.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ");
        format!(
            "error: category={} code={} message=\"{msg}\"",
            self.category, self.code
        )
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(err) => Self::new("io", EXIT_IO, err.to_string()),
            Error::Schema { .. } | Error::Json(_) => Self::new("schema", EXIT_SCHEMA, e.to_string()),
            Error::Config(_) => Self::new("config", EXIT_CONFIG, e.to_string()),
            _ => Self::new("runtime", EXIT_RUNTIME, e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "cellgraph", version, about = "Graph learning toolkit and cell-free AP selection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a cell-free scenario and its per-UE instance dataset.
    Gen {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classical node, edge or graph features of a graph file.
    Features {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum)]
        level: LevelArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Biased random-walk skip-gram embeddings of a graph file.
    Embed {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a GNN on an instance dataset (node = candidate APs, edge = serving links).
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "node")]
        level: LevelArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a trained model on an instance dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full two-stage AP selection experiment with baselines.
    Apselect {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LevelArg {
    Node,
    Edge,
    Graph,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Self {
        match l {
            LevelArg::Node => Level::Node,
            LevelArg::Edge => Level::Edge,
            LevelArg::Graph => Level::Graph,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturesConfig {
    pub katz: KatzParams,
    /// Node pairs for edge-level features; defaults to the graph's edges.
    pub pairs: Option<Vec<(usize, usize)>>,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbedConfig {
    pub seed: u64,
    pub walks: WalkParams,
    pub skipgram: SkipGramParams,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainRunConfig {
    pub seed: u64,
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    /// Share of instances held out for early stopping.
    pub val_fraction: f64,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            encoder: EncoderConfig::default(),
            train: TrainConfig::default(),
            val_fraction: 0.1,
        }
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            let first = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("{}", CliError::new("usage", EXIT_USAGE, first).line());
            return EXIT_USAGE;
        }
    };
    match execute(cli.command) {
        Ok(written) => {
            for p in written {
                println!("wrote {}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.line());
            e.code
        }
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = read(path)?;
    let mut de = serde_json::Deserializer::from_str(&text);
    let parsed: Result<T, _> = serde_path_to_error::deserialize(&mut de);
    let value = parsed.map_err(|e| {
        CliError::config(format!("{}: at `{}`: {}", path.display(), e.path(), e.inner()))
    })?;
    de.end()
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    Ok(value)
}

fn read_graph(path: &Path) -> CliResult<Graph> {
    Graph::from_json(&read(path)?).map_err(|e| CliError::input(path, e))
}

pub fn read_dataset(path: &Path) -> CliResult<Vec<InstanceGraph>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let inst = InstanceGraph::from_json_line(line).map_err(|e| {
            let e = match e {
                Error::Schema { path: p, message } => Error::Schema {
                    path: format!("line {}: {p}", i + 1),
                    message,
                },
                Error::Json(m) => Error::Json(format!("line {}: {m}", i + 1)),
                other => other,
            };
            CliError::input(path, e)
        })?;
        out.push(inst);
    }
    if out.is_empty() {
        return Err(CliError::new(
            "schema",
            EXIT_SCHEMA,
            format!("{}: dataset has no instances", path.display()),
        ));
    }
    Ok(out)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Pending output files, flushed only once everything has been computed.
struct Outputs {
    prefix: PathBuf,
    files: Vec<(PathBuf, String)>,
}

impl Outputs {
    fn new(prefix: &Path) -> Self {
        Self {
            prefix: prefix.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn add(&mut self, suffix: &str, content: String) {
        self.files.push((with_suffix(&self.prefix, suffix), content));
    }

    fn config(&mut self, value: serde_json::Value) {
        let text = serde_json::to_string_pretty(&value).expect("config serializes") + "\n";
        self.add("_config.json", text);
    }

    fn flush(self) -> CliResult<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len());
        for (path, content) in self.files {
            fs::write(&path, content).map_err(|e| CliError::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

fn execute(command: Command) -> CliResult<Vec<PathBuf>> {
    match command {
        Command::Gen { config, seed, out } => cmd_gen(config.as_deref(), seed, &out),
        Command::Features {
            graph,
            level,
            config,
            out,
        } => cmd_features(&graph, level.into(), config.as_deref(), &out),
        Command::Embed {
            graph,
            config,
            seed,
            out,
        } => cmd_embed(&graph, config.as_deref(), seed, &out),
        Command::Train {
            dataset,
            level,
            config,
            seed,
            out,
        } => cmd_train(&dataset, level.into(), config.as_deref(), seed, &out),
        Command::Eval { model, dataset, out } => cmd_eval(&model, &dataset, &out),
        Command::Apselect { config, seed, out } => cmd_apselect(config.as_deref(), seed, &out),
    }
}

fn cmd_gen(config: Option<&Path>, seed: Option<u64>, out: &Path) -> CliResult<Vec<PathBuf>> {
    let mut cfg: ScenarioConfig = read_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let scenario = generate_scenario(&cfg)?;
    let (instances, degenerate) = build_all(&scenario, &cfg)?;
    let mut dataset = String::new();
    for (_, inst) in &instances {
        dataset.push_str(&inst.to_json_line());
        dataset.push('\n');
    }
    let mut o = Outputs::new(out);
    o.add(
        "_scenario.json",
        serde_json::to_string(&scenario).expect("scenario serializes") + "\n",
    );
    o.add("_dataset.jsonl", dataset);
    o.config(json!({
        "command": "gen",
        "scenario": cfg,
        "instances": instances.len(),
        "degenerate_ues": degenerate,
    }));
    o.flush()
}

fn cmd_features(graph_path: &Path, level: Level, config: Option<&Path>, out: &Path) -> CliResult<Vec<PathBuf>> {
    let cfg: FeaturesConfig = read_config(config)?;
    let g = read_graph(graph_path)?;
    let table = match level {
        Level::Node => node_statistics(&g),
        Level::Graph => graph_statistics(&g),
        Level::Edge => {
            let pairs: Vec<(usize, usize)> = match &cfg.pairs {
                Some(p) => p.clone(),
                None => g.edges().iter().map(|e| (e.src, e.dst)).collect(),
            };
            edge_scores(&g, &pairs, cfg.katz).map_err(|e| match e {
                Error::IndexOutOfRange { .. } => CliError::config(e.to_string()),
                e => CliError::from(e),
            })?
        }
    };
    let mut o = Outputs::new(out);
    o.add("_features.csv", table.to_csv());
    o.config(json!({
        "command": "features",
        "graph": graph_path,
        "level": level,
        "features": cfg,
    }));
    o.flush()
}

fn cmd_embed(graph_path: &Path, config: Option<&Path>, seed: Option<u64>, out: &Path) -> CliResult<Vec<PathBuf>> {
    let mut cfg: EmbedConfig = read_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.walks.seed = seed::derive(cfg.seed, &[0]);
    cfg.skipgram.seed = seed::derive(cfg.seed, &[1]);
    let g = read_graph(graph_path)?;
    let corpus = random_walks(&g, cfg.walks).map_err(config_if_argument)?;
    let result = train_skipgram(&corpus, cfg.skipgram).map_err(config_if_argument)?;
    let mut loss = String::from("epoch,loss\n");
    for (i, l) in result.loss_history.iter().enumerate() {
        writeln!(loss, "{},{l}", i + 1).expect("string write");
    }
    let mut o = Outputs::new(out);
    o.add("_embeddings.csv", result.embeddings.to_csv());
    o.add("_loss.csv", loss);
    o.config(json!({ "command": "embed", "graph": graph_path, "embed": cfg }));
    o.flush()
}

fn config_if_argument(e: Error) -> CliError {
    match e {
        Error::InvalidArgument(m) => CliError::config(m),
        e => CliError::from(e),
    }
}

fn task_for(level: Level) -> CliResult<ApTask> {
    match level {
        Level::Node => Ok(ApTask::Candidate),
        Level::Edge => Ok(ApTask::Serving),
        Level::Graph => Err(CliError::config(
            "instance datasets carry node and edge labels only; use --level node or edge",
        )),
    }
}

fn cmd_train(
    dataset_path: &Path,
    level: Level,
    config: Option<&Path>,
    seed: Option<u64>,
    out: &Path,
) -> CliResult<Vec<PathBuf>> {
    let mut cfg: TrainRunConfig = read_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if !(0.0..1.0).contains(&cfg.val_fraction) {
        return Err(CliError::config("val_fraction must lie in [0, 1)"));
    }
    let task = task_for(level)?;
    let mut model = cfg.encoder.build(task, seed::derive(cfg.seed, &[0]))?;
    let data = read_dataset(dataset_path)?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut seed::rng_at(cfg.seed, &[1]));
    let n_val = ((cfg.val_fraction * data.len() as f64).round() as usize).min(data.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let pick = |idx: &[usize]| -> Vec<&InstanceGraph> {
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| &data[i]).collect()
    };
    let train_batch = task_batch(&pick(train_idx), task).map_err(|e| CliError::input(dataset_path, e))?;
    let val_batch = if val_idx.is_empty() {
        None
    } else {
        Some(task_batch(&pick(val_idx), task).map_err(|e| CliError::input(dataset_path, e))?)
    };
    let history = train(&mut model, &train_batch, val_batch.as_ref(), &cfg.train)?;
    let mut o = Outputs::new(out);
    o.add("_model.json", model.to_json() + "\n");
    o.add("_history.csv", history.to_csv());
    o.config(json!({
        "command": "train",
        "dataset": dataset_path,
        "task": task,
        "train": cfg,
        "num_train": train_idx.len(),
        "num_val": val_idx.len(),
    }));
    o.flush()
}

fn metrics_rows(out: &mut String, split: &str, prefix: &str, report: &MetricsReport) {
    for (name, v) in report.named_values() {
        writeln!(out, "{split},{prefix}{name},{v}").expect("string write");
    }
}

fn cmd_eval(model_path: &Path, dataset_path: &Path, out: &Path) -> CliResult<Vec<PathBuf>> {
    let model = GnnModel::from_json(&read(model_path)?).map_err(|e| CliError::input(model_path, e))?;
    let task = model
        .metadata
        .get("task")
        .and_then(|t| ApTask::parse(t))
        .ok_or_else(|| {
            CliError::new(
                "schema",
                EXIT_SCHEMA,
                format!(
                    "{}: metadata.task must be \"candidate\" or \"serving\"",
                    model_path.display()
                ),
            )
        })?;
    let data = read_dataset(dataset_path)?;
    let refs: Vec<&InstanceGraph> = data.iter().collect();
    let scores: Vec<f64> = task_scores(&model, &refs, task)
        .map_err(|e| CliError::input(dataset_path, e))?
        .concat();
    let labels: Vec<bool> = task_labels(&refs, task).concat();
    let report = classification_metrics(&scores, &labels, 0.0)?;
    let mut metrics = String::from("split,metric,value\n");
    writeln!(metrics, "eval,num_instances,{}", data.len()).expect("string write");
    metrics_rows(&mut metrics, "eval", "", &report);
    let mut o = Outputs::new(out);
    o.add("_metrics.csv", metrics);
    o.add("_pr.csv", pr_curve_csv(&report.pr_curve));
    o.add(
        "_pr.svg",
        pr_svg(&format!("{} model", task.as_str()), &[(task.as_str(), &report.pr_curve)]),
    );
    o.config(json!({
        "command": "eval",
        "model": model_path,
        "dataset": dataset_path,
        "task": task,
        "threshold": 0.0,
    }));
    o.flush()
}

fn cmd_apselect(config: Option<&Path>, seed: Option<u64>, out: &Path) -> CliResult<Vec<PathBuf>> {
    let mut cfg: ApSelectConfig = read_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let run = run_ap_selection(&cfg)?;
    let r = &run.report;
    let mut o = Outputs::new(out);
    o.add("_metrics.csv", r.metrics_csv());
    o.add("_pr.csv", pr_curve_csv(&r.stage2.pr_curve));
    o.add("_pr_nearest.csv", pr_curve_csv(&r.nearest.pr_curve));
    o.add("_pr_shallow.csv", pr_curve_csv(&r.shallow.pr_curve));
    o.add(
        "_pr.svg",
        pr_svg(
            "AP selection, test UEs",
            &[
                ("two-stage GNN", &r.stage2.pr_curve),
                ("nearest by distance", &r.nearest.pr_curve),
                ("shallow embedding", &r.shallow.pr_curve),
            ],
        ),
    );
    o.add("_stage1_history.csv", r.stage1_history.to_csv());
    o.add("_stage2_history.csv", r.stage2_history.to_csv());
    o.add("_stage1_model.json", run.stage1_model.to_json() + "\n");
    o.add("_stage2_model.json", run.stage2_model.to_json() + "\n");
    o.config(json!({
        "command": "apselect",
        "apselect": cfg,
        "resolved_scenario": cfg.resolved_scenario(),
    }));
    o.flush()
}

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Precision (y) against recall (x) for each named curve, as standalone SVG.
pub fn pr_svg(title: &str, curves: &[(&str, &[PrPoint])]) -> String {
    let (w, h) = (480.0, 400.0);
    let (left, right, top, bottom) = (60.0, 20.0, 40.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let x = |r: f64| left + r * pw;
    let y = |p: f64| top + (1.0 - p) * ph;
    let mut s = String::new();
    let mut put = |line: String| {
        s.push_str(&line);
        s.push('\n');
    };
    put(format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">"
    ));
    put(format!("<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>"));
    put(format!(
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
        w / 2.0,
        escape(title)
    ));
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        put(format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\"/>",
            x(t),
            y(0.0),
            x(t),
            y(1.0)
        ));
        put(format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\"/>",
            x(0.0),
            y(t),
            x(1.0),
            y(t)
        ));
        put(format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{t:.1}</text>",
            x(t),
            y(0.0) + 16.0
        ));
        put(format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{t:.1}</text>",
            x(0.0) - 6.0,
            y(t) + 4.0
        ));
    }
    put(format!(
        "<rect x=\"{left}\" y=\"{top}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>"
    ));
    put(format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">Recall</text>",
        left + pw / 2.0,
        h - 12.0
    ));
    put(format!(
        "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">Precision</text>",
        top + ph / 2.0,
        top + ph / 2.0
    ));
    for (i, (name, curve)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = curve
            .iter()
            .map(|p| format!("{:.2},{:.2}", x(p.recall), y(p.precision)))
            .collect();
        put(format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
            points.join(" ")
        ));
        let ly = top + 16.0 + 16.0 * i as f64;
        put(format!(
            "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>",
            left + 10.0,
            left + 30.0
        ));
        put(format!(
            "<text x=\"{:.2}\" y=\"{:.2}\">{}</text>",
            left + 36.0,
            ly + 4.0,
            escape(name)
        ));
    }
    put("</svg>".to_string());
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_line_is_single_and_quoted() {
        let e = CliError::new("schema", EXIT_SCHEMA, "bad \"x\"\nnext");
        let line = e.line();
        assert!(!line.contains('\n'));
        assert_eq!(line, "error: category=schema code=4 message=\"bad \\\"x\\\" next\"");
    }

    #[test]
    fn error_codes_are_distinct() {
        let codes = [EXIT_USAGE, EXIT_IO, EXIT_SCHEMA, EXIT_CONFIG, EXIT_RUNTIME];
        for (i, a) in codes.iter().enumerate() {
            assert!(codes[i + 1..].iter().all(|b| a != b));
            assert_ne!(*a, 0);
        }
    }

    #[test]
    fn svg_has_axes_and_polyline() {
        let curve = [
            PrPoint { threshold: 1.0, precision: 1.0, recall: 0.5 },
            PrPoint { threshold: 0.0, precision: 0.5, recall: 1.0 },
        ];
        let svg = pr_svg("t <1>", &[("a", &curve)]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("<polyline"));
        assert!(svg.contains(">Recall<") && svg.contains(">Precision<"));
        assert!(svg.contains("t &lt;1&gt;"));
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["cellgraph", "bogus"]), EXIT_USAGE);
        assert_eq!(run(["cellgraph", "gen"]), EXIT_USAGE);
    }
}
