//! `fgs` command line: simulate, search, eval and bench.
//!
//! Exit codes: 0 success, 1 runtime or I/O error, 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::graph::{split_edge_line, MixedGraph};
use crate::metrics::{compare_patterns, format_percentages, ComparisonStats, ROW_HEADER};
use crate::score::{CovarianceSource, ScoreConfig};
use crate::search::{fgs, SearchConfig};
use crate::simulate::{simulate, SimConfig};

pub const SIMULATE_MANIFEST: &str = "simulate_manifest.json";
pub const SEARCH_MANIFEST: &str = "search_manifest.json";

#[derive(Debug, Parser)]
#[command(name = "fgs", version, about = "Fast greedy equivalence search for linear-Gaussian data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a random linear-Gaussian SEM and write its data and graphs.
    Simulate(SimulateArgs),
    /// Learn a pattern from a dataset.
    Search(SearchArgs),
    /// Compare an estimated pattern with the truth.
    Eval(EvalArgs),
    /// Simulate, search and evaluate over several problem sizes.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    vars: usize,
    /// Defaults to the number of variables.
    #[arg(long)]
    edges: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
struct SearchFlags {
    #[arg(long, default_value_t = 2.0)]
    penalty_discount: f64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,
    #[arg(long)]
    no_effect_edge_pruning: bool,
    #[arg(long)]
    max_subset_size: Option<usize>,
}

impl SearchFlags {
    fn config(&self) -> SearchConfig {
        let threads = self
            .threads
            .map(|t| t as usize)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        SearchConfig {
            score: ScoreConfig { penalty_discount: self.penalty_discount },
            effect_edge_pruning: !self.no_effect_edge_pruning,
            max_subset_size: self.max_subset_size,
            threads,
            ..SearchConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct SearchArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Defaults to the directory of the input file.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[command(flatten)]
    search: SearchFlags,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    estimated: PathBuf,
    /// True pattern or true DAG; a DAG is converted to its pattern.
    #[arg(long)]
    truth: PathBuf,
    /// Dataset whose header fixes the node set.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    vars_list: Vec<usize>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    repeats: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[command(flatten)]
    search: SearchFlags,
}

/// Everything needed to replay a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vars: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edges: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub penalty_discount: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effect_edge_pruning: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_subset_size: Option<usize>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub elapsed_ms: u64,
}

impl RunManifest {
    fn new(subcommand: &str) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
            vars: None,
            edges: None,
            samples: None,
            penalty_discount: None,
            threads: None,
            effect_edge_pruning: None,
            max_subset_size: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            elapsed_ms: 0,
        }
    }

    fn with_search(mut self, cfg: &SearchConfig) -> Self {
        self.penalty_discount = Some(cfg.score.penalty_discount);
        self.threads = Some(cfg.threads);
        self.effect_edge_pruning = Some(cfg.effect_edge_pruning);
        self.max_subset_size = cfg.max_subset_size;
        self
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(manifest).map_err(runtime)?;
    text.push('\n');
    write(path, &text)
}

/// Parses the arguments (program name first), runs the command and returns
/// the process exit code. Table output goes to `out`, diagnostics to
/// `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render();
            let _ = if code == 0 { write!(out, "{rendered}") } else { write!(err, "{rendered}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Search(a) => cmd_search(&a),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Bench(a) => cmd_bench(&a, out, err),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let (CliError::Usage(msg) | CliError::Runtime(msg)) = &e;
            let _ = writeln!(err, "error: {msg}");
            e.code()
        }
    }
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let mut cfg = SimConfig::new(a.vars, a.seed);
    cfg.edges = a.edges.unwrap_or(a.vars);
    cfg.samples = a.samples;
    if a.vars < 2 {
        return Err(CliError::Usage("--vars must be at least 2".into()));
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let (model, data) = simulate(&cfg).map_err(runtime)?;
    let pattern = model.dag.revert_to_cpdag_global().map_err(runtime)?;

    fs::create_dir_all(&a.out_dir).map_err(|e| CliError::Runtime(format!("{}: {e}", a.out_dir.display())))?;
    let outputs = [
        ("data.tsv", data.to_tsv()),
        ("true_dag.txt", model.dag.to_string()),
        ("true_pattern.txt", pattern.to_string()),
    ];
    let mut manifest = RunManifest::new("simulate");
    for (name, text) in &outputs {
        let path = a.out_dir.join(name);
        write(&path, text)?;
        manifest.outputs.push(path.display().to_string());
    }
    manifest.seed = Some(cfg.seed);
    manifest.vars = Some(cfg.vars);
    manifest.edges = Some(cfg.edges);
    manifest.samples = Some(cfg.samples);
    manifest.elapsed_ms = start.elapsed().as_millis() as u64;
    write_manifest(&a.out_dir.join(SIMULATE_MANIFEST), &manifest)
}

fn cmd_search(a: &SearchArgs) -> Result<(), CliError> {
    let data = Dataset::from_tsv(&read(&a.input)?)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", a.input.display())))?;
    let cfg = a.search.config();
    let start = Instant::now();
    let src = CovarianceSource::new(&data);
    let pattern = fgs(&src, &cfg).map_err(runtime)?;
    let elapsed = start.elapsed();

    let out_dir = match &a.out_dir {
        Some(d) => d.clone(),
        None => a.input.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    if !out_dir.as_os_str().is_empty() {
        fs::create_dir_all(&out_dir).map_err(|e| CliError::Runtime(format!("{}: {e}", out_dir.display())))?;
    }
    let pattern_path = out_dir.join("pattern.txt");
    write(&pattern_path, &pattern.to_string())?;

    let mut manifest = RunManifest::new("search").with_search(&cfg);
    manifest.vars = Some(data.num_vars());
    manifest.samples = Some(data.num_samples());
    manifest.inputs.push(a.input.display().to_string());
    manifest.outputs.push(pattern_path.display().to_string());
    manifest.elapsed_ms = elapsed.as_millis() as u64;
    write_manifest(&out_dir.join(SEARCH_MANIFEST), &manifest)
}

/// Node names in order of first appearance in an edge list.
fn edge_list_names(text: &str, path: &Path) -> Result<Vec<String>, CliError> {
    let mut names: Vec<String> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (a, _, b) = split_edge_line(line).ok_or_else(|| {
            CliError::Runtime(format!("{}: line {}: malformed edge line `{line}`", path.display(), i + 1))
        })?;
        for n in [a, b] {
            if !names.iter().any(|m| m == n) {
                names.push(n.to_string());
            }
        }
    }
    Ok(names)
}

fn read_graph(path: &Path, text: &str, names: &[String]) -> Result<MixedGraph, CliError> {
    let mut g = MixedGraph::new(names.iter().cloned()).map_err(runtime)?;
    g.read_edges(text)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    Ok(g)
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let est_text = read(&a.estimated)?;
    let truth_text = read(&a.truth)?;
    let names = match &a.data {
        Some(path) => {
            let text = read(path)?;
            let header = text.lines().next().unwrap_or_default();
            header.split('\t').map(|s| s.trim().to_string()).collect()
        }
        None => {
            let mut names = edge_list_names(&truth_text, &a.truth)?;
            for n in edge_list_names(&est_text, &a.estimated)? {
                if !names.contains(&n) {
                    names.push(n);
                }
            }
            names
        }
    };
    let estimated = read_graph(&a.estimated, &est_text, &names)?;
    let truth = read_graph(&a.truth, &truth_text, &names)?
        .revert_to_cpdag_global()
        .map_err(|e| CliError::Runtime(format!("{}: {e}", a.truth.display())))?;
    let stats = compare_patterns(&estimated, &truth).map_err(runtime)?;

    let time_ms = a
        .estimated
        .parent()
        .map(|d| d.join(SEARCH_MANIFEST))
        .and_then(|p| fs::read_to_string(p).ok())
        .and_then(|t| serde_json::from_str::<RunManifest>(&t).ok())
        .map_or(0, |m| m.elapsed_ms);
    let vars = names.len();
    writeln!(out, "vars\ttime_ms\t{}", ROW_HEADER.join("\t")).map_err(runtime)?;
    writeln!(out, "{}", crate::metrics::format_row(vars, &time_ms.to_string(), &stats)).map_err(runtime)?;
    Ok(())
}

/// One simulate-search-compare cycle, in memory.
pub fn bench_once(
    vars: usize,
    samples: usize,
    seed: u64,
    cfg: &SearchConfig,
) -> Result<(ComparisonStats, std::time::Duration), String> {
    let mut sim = SimConfig::new(vars, seed);
    sim.samples = samples;
    let (model, data) = simulate(&sim).map_err(|e| e.to_string())?;
    let truth = model.dag.revert_to_cpdag_global().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let src = CovarianceSource::new(&data);
    let estimated = fgs(&src, cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let stats = compare_patterns(&estimated, &truth).map_err(|e| e.to_string())?;
    Ok((stats, elapsed))
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    if a.vars_list.iter().any(|&v| v < 2) {
        return Err(CliError::Usage("every entry of --vars-list must be at least 2".into()));
    }
    let cfg = a.search.config();
    let wall = Instant::now();
    writeln!(out, "vars\ttime_min\t{}", ROW_HEADER.join("\t")).map_err(runtime)?;
    for &vars in &a.vars_list {
        let mut sums = [0.0; 4];
        let mut minutes = 0.0;
        for r in 0..a.repeats {
            let seed = a.seed.wrapping_add(r as u64);
            let (stats, elapsed) = bench_once(vars, a.samples, seed, &cfg).map_err(CliError::Runtime)?;
            let pct = [
                stats.adj_precision.percent(),
                stats.adj_recall.percent(),
                stats.arrow_precision.percent(),
                stats.arrow_recall.percent(),
            ];
            for (s, v) in sums.iter_mut().zip(pct) {
                *s += v;
            }
            minutes += elapsed.as_secs_f64() / 60.0;
        }
        let k = a.repeats as f64;
        let means = sums.map(|s| s / k);
        writeln!(out, "{vars}\t{:.1}\t{}", minutes / k, format_percentages(means)).map_err(runtime)?;
    }
    writeln!(err, "total wall time: {:.1} s", wall.elapsed().as_secs_f64()).map_err(runtime)?;
    Ok(())
}
