//! Command-line front end: `run`, `phylo`, `calibrate-tag`, `validate-genome`.
//!
//! Exit codes: 0 success, 1 invalid genome or failed run, 2 configuration
//! error, 3 data or file error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, TaskName};
use crate::env::mnist::{MnistSet, Split};
use crate::env::tag;
use crate::evolution::{self, metrics_csv, ExperimentResult, MnistData, Task, TaskContext};
use crate::genome::{validate, Genome};
use crate::netexec::CompiledNetwork;
use crate::phylogeny::{PhyloTree, SeriesFilter};
use crate::trainer;

pub const MNIST_ENV: &str = "FUNCNET_MNIST_DIR";

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "funcnet", version, about = "Evolve network topologies, train weights between generations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment and write its artifacts.
    Run(RunArgs),
    /// Report on the lineage log of a finished run.
    Phylo(PhyloArgs),
    /// Estimate first-collision time of two random walkers on the TAG grid.
    CalibrateTag(CalibrateArgs),
    /// Check a genome file against the structural rules.
    ValidateGenome {
        file: PathBuf,
    },
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// tag, tag-prey, tag-predator, cartpole or mnist.
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Directory with the MNIST IDX files (raw or gzipped).
    #[arg(long)]
    pub mnist_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PhyloArgs {
    /// Result directory holding `phylo.log`, or the log itself.
    pub path: PathBuf,
    #[arg(long)]
    pub dot: bool,
    #[arg(long)]
    pub counts: bool,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, default_value_t = 1000)]
    pub sims: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 12)]
    pub rows: i32,
    #[arg(long, default_value_t = 12)]
    pub cols: i32,
    /// Walks longer than this are reported as censored.
    #[arg(long, default_value_t = 10_000)]
    pub max_steps: usize,
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl ToString) -> Self {
        CliError { code: EXIT_CONFIG, message: message.to_string() }
    }

    fn data(message: impl ToString) -> Self {
        CliError { code: EXIT_DATA, message: message.to_string() }
    }
}

/// Parse arguments, run, print, and return the exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok((text, code)) => {
            let _ = out.write_all(text.as_bytes());
            code
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(command: Command) -> Result<(String, i32), CliError> {
    match command {
        Command::Run(a) => cmd_run(&a).map(|s| (s, 0)),
        Command::Phylo(a) => cmd_phylo(&a).map(|s| (s, 0)),
        Command::CalibrateTag(a) => Ok((cmd_calibrate(&a), 0)),
        Command::ValidateGenome { file } => cmd_validate(&file),
    }
}

/// Merge the config file with flag overrides.
pub fn resolve_config(a: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
            ExperimentConfig::from_toml(&text).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(t) = &a.task {
        cfg.task = TaskName::parse(t).map_err(CliError::config)?;
    }
    cfg.n = a.n.unwrap_or(cfg.n);
    cfg.generations = a.generations.unwrap_or(cfg.generations);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    if a.out.is_some() {
        cfg.out = a.out.clone();
    }
    if a.mnist_dir.is_some() {
        cfg.mnist_dir = a.mnist_dir.clone();
    }
    Ok(cfg)
}

fn load_mnist(cfg: &ExperimentConfig) -> Result<MnistData, CliError> {
    let dir = cfg
        .mnist_dir
        .clone()
        .or_else(|| std::env::var_os(MNIST_ENV).map(PathBuf::from))
        .ok_or_else(|| CliError::data(format!("mnist needs --mnist-dir or {MNIST_ENV}")))?;
    let train = MnistSet::load(&dir, Split::Train).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    let test = MnistSet::load(&dir, Split::Test).ok();
    Ok(MnistData { train, test })
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(dir.join(name), bytes).map_err(|e| CliError::data(format!("{}: {e}", dir.join(name).display())))
}

/// `generation` against the score columns of the metrics.
pub fn score_tsv(result: &ExperimentResult) -> String {
    let mut s = String::from("generation\tbest_parent\tmean\tstd\tcontrol\trandom_best\tbest_ever\n");
    for r in &result.rows {
        let _ = writeln!(
            s,
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            r.generation, r.best_parent_score, r.mean_score, r.std_score, r.control_score, r.random_best_score, r.best_ever_score
        );
    }
    s
}

/// Cumulative control batches against the loss columns.
pub fn loss_tsv(result: &ExperimentResult) -> String {
    let mut s = String::from("batches\tbest_parent_loss\tcontrol_loss\n");
    for r in &result.rows {
        let _ = writeln!(s, "{}\t{:.6}\t{:.6}", r.batches_consumed, r.best_parent_loss, r.control_loss);
    }
    s
}

fn cmd_run(a: &RunArgs) -> Result<String, CliError> {
    let cfg = resolve_config(a)?;
    let spec = cfg.to_spec().map_err(CliError::config)?;
    let out_dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from(format!("runs/{}-seed{}", spec.task.name(), spec.seed)));
    let mnist = if spec.task == Task::Mnist { Some(Arc::new(load_mnist(&cfg)?)) } else { None };
    let ctx = TaskContext::new(spec, mnist.clone()).map_err(CliError::config)?;
    fs::create_dir_all(&out_dir).map_err(|e| CliError::data(format!("{}: {e}", out_dir.display())))?;
    write(&out_dir, "config.snapshot", cfg.snapshot().as_bytes())?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::config(e.to_string()))?;
    let result = pool
        .install(|| evolution::run_experiment(&ctx))
        .map_err(|e| CliError { code: EXIT_FAILURE, message: e.to_string() })?;

    write(&out_dir, "metrics.csv", metrics_csv(&result.rows).as_bytes())?;
    write(&out_dir, "phylo.log", result.tree.to_log().as_bytes())?;
    write(&out_dir, "score_vs_generation.tsv", score_tsv(&result).as_bytes())?;
    write(&out_dir, "loss_vs_batches.tsv", loss_tsv(&result).as_bytes())?;

    let mut report = format!(
        "{} generations of {} (n = {}, seed {}){}\n",
        result.rows.len(),
        ctx.spec.task.name(),
        ctx.spec.n,
        ctx.spec.seed,
        if result.stopped_early { ", stopped early" } else { "" }
    );
    if let Some(best) = &result.best {
        write(&out_dir, "best.genome", best.genome.to_text().as_bytes())?;
        let mut net = CompiledNetwork::compile(&best.genome, &mut ChaCha8Rng::seed_from_u64(0))
            .map_err(|e| CliError { code: EXIT_FAILURE, message: e.to_string() })?;
        net.params_mut().copy_from_slice(&best.params);
        write(&out_dir, "best.params", &net.checkpoint_bytes())?;
        let _ = writeln!(
            report,
            "best: member {} of generation {}, score {:.4}, loss {:.4}",
            best.id, best.generation, best.score, best.loss
        );
        if let Some(test) = mnist.as_ref().and_then(|m| m.test.as_ref()) {
            if let Ok(acc) = trainer::evaluate_accuracy(&mut net, test) {
                let _ = writeln!(report, "best test accuracy: {acc:.4}");
            }
        }
    }
    if let Some(test) = mnist.as_ref().and_then(|m| m.test.as_ref()) {
        for c in result.final_population.members.iter().filter(|m| m.role == evolution::MemberRole::Control) {
            let mut net = CompiledNetwork::compile(&c.genome, &mut ChaCha8Rng::seed_from_u64(0))
                .map_err(|e| CliError { code: EXIT_FAILURE, message: e.to_string() })?;
            if let Some(p) = &c.persistent_params {
                net.params_mut().copy_from_slice(p);
            }
            if let Ok(acc) = trainer::evaluate_accuracy(&mut net, test) {
                let _ = writeln!(report, "control {} test accuracy: {acc:.4}", c.id);
            }
        }
    }
    let _ = writeln!(report, "results in {}", out_dir.display());
    Ok(report)
}

fn read_tree(path: &Path) -> Result<PhyloTree, CliError> {
    let log = if path.is_dir() { path.join("phylo.log") } else { path.to_path_buf() };
    let text = fs::read_to_string(&log).map_err(|e| CliError::data(format!("{}: {e}", log.display())))?;
    PhyloTree::from_log(&text).map_err(|e| CliError::data(format!("{}: {e}", log.display())))
}

/// Per-generation descendant counts, split by role.
///
/// The `roots` column sums to the number of edges in the tree.
pub fn counts_report(tree: &PhyloTree) -> String {
    let horizon = tree.last_generation().unwrap_or(0);
    let mut s = format!("# edges {}\n", tree.edge_count());
    if let Some((id, count)) = tree.dominant_lineage() {
        let _ = writeln!(s, "# dominant_lineage {id} {count}");
    }
    let series: Vec<Vec<usize>> = [SeriesFilter::Parents, SeriesFilter::Children, SeriesFilter::Random, SeriesFilter::Roots]
        .into_iter()
        .map(|f| tree.dominant_series(f, horizon))
        .collect();
    s.push_str("generation\tparents\tchildren\trandom\troots\n");
    for g in 0..=horizon as usize {
        let _ = writeln!(s, "{g}\t{}\t{}\t{}\t{}", series[0][g], series[1][g], series[2][g], series[3][g]);
    }
    s
}

fn cmd_phylo(a: &PhyloArgs) -> Result<String, CliError> {
    let tree = read_tree(&a.path)?;
    let mut s = String::new();
    if a.dot {
        s.push_str(&tree.to_dot());
    }
    if a.counts || !a.dot {
        s.push_str(&counts_report(&tree));
    }
    Ok(s)
}

fn cmd_calibrate(a: &CalibrateArgs) -> String {
    let c = tag::tag_calibrate(a.sims, a.rows, a.cols, a.max_steps, &mut ChaCha8Rng::seed_from_u64(a.seed));
    let mut s = format!(
        "runs {}\ncollided {}\ncensored {} (no collision within {} steps)\nmean_steps {:.3}\nstd_steps {:.3}\n",
        c.runs, c.collided, c.censored, a.max_steps, c.mean_steps, c.std_steps
    );
    let catch = tag::TagRewards::default().catch;
    let _ = writeln!(
        s,
        "note: the catch bonus is {catch}; a balanced reward table sets it near the mean first-collision time"
    );
    s
}

fn cmd_validate(path: &Path) -> Result<(String, i32), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let g = Genome::from_text(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let violations = validate(&g);
    if violations.is_empty() {
        Ok((
            format!(
                "valid: {} inputs, {} outputs, {} layers, {} recurrent edges\n",
                g.num_inputs,
                g.num_outputs,
                g.layers.len(),
                g.recurrent_edge_count()
            ),
            0,
        ))
    } else {
        let mut s = String::new();
        for v in &violations {
            let _ = writeln!(s, "violation: {v}");
        }
        Ok((s, EXIT_FAILURE))
    }
}
