//! Operator subcommands: `init`, `split`, `evolve`, `eval`, `score`,
//! `merge`, `report`.
//!
//! One YAML config file describes a run (repository, dataset, backend,
//! loop knobs); command-line flags override individual fields. Exit
//! codes: 0 success, 1 usage or configuration error, 2 runtime failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::agents::{
    ChatExecutor, ChatProposer, ChatSkillBuilder, EditIfExistsProposer, Executor,
    HttpChatBackend, ProgramSnapshot, Proposer, ShellExecutor, SkillBuilder,
    SkillGatedExecutor, TemplateSkillBuilder,
};
use crate::config::{BackendConfig, RunConfig};
use crate::dataset::{
    categorize, read_jsonl, stratified_split, write_jsonl, DatasetSplits, Example,
    HashCategorizer, SplitManifest,
};
use crate::evolve::{evaluate, EngineOptions, EvolutionEngine, EvolveError, Mode};
use crate::merge::{merge_unique, ProvenanceEntry, RunLibrary};
use crate::report::build_report;
use crate::scoring::{
    multi_tolerance_score, score, MultiToleranceScore, EVAL_TABLE_TAUS,
    MULTI_TOLERANCE_TAUS,
};
use crate::store::{GitStore, ProgramStore, StoreError, VersionStore, BASE_BRANCH};

/// Command failures, classified for the exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration — exit 1.
    Usage(String),
    /// The command was well-formed but execution failed — exit 2.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn evolve_error(e: EvolveError) -> CliError {
    match e {
        EvolveError::InvalidConfig(_) => usage(e),
        _ => runtime(e),
    }
}

#[derive(Parser)]
#[command(
    name = "skillforge",
    version,
    about = "Evolve reusable agent skills through failure-driven search"
)]
struct Cli {
    /// Path to the YAML run configuration.
    #[arg(
        short,
        long,
        global = true,
        default_value = "skillforge.yaml",
        value_name = "PATH"
    )]
    config: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create the program repository and the generation-0 base program.
    Init,

    /// Categorize the dataset and split it into train/validation/test.
    Split {
        /// Dataset to split; defaults to the configured examples file.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        /// Fraction of examples for the training pools.
        #[arg(long, value_name = "F")]
        train_fraction: Option<f64>,
        /// Fraction of examples for the validation set.
        #[arg(long, value_name = "F")]
        validation_fraction: Option<f64>,
        /// Shuffle seed; defaults to the configured loop seed.
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        /// Category count for the hash classifier when examples carry no
        /// category labels of their own.
        #[arg(short = 'k', long, default_value_t = 4, value_name = "N")]
        categories: usize,
        /// Output directory; defaults to `<run_dir>/splits`.
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },

    /// Run the evolution loop against the configured backend.
    Evolve {
        /// Maximum iterations (T).
        #[arg(short = 'T', long, value_name = "N")]
        iterations: Option<u64>,
        /// Frontier capacity (k).
        #[arg(short = 'k', long, value_name = "N")]
        frontier_capacity: Option<usize>,
        /// Weighted score below which an example counts as a failure.
        #[arg(long, value_name = "F")]
        failure_threshold: Option<f64>,
        /// Training examples drawn per iteration.
        #[arg(long, value_name = "N")]
        batch_size: Option<usize>,
        /// Total training passes allowed (fractional).
        #[arg(long, value_name = "F")]
        epochs_budget: Option<f64>,
        /// Mutation mode: "skill" or "prompt".
        #[arg(long, value_parser = parse_mode, value_name = "MODE")]
        mode: Option<Mode>,
        /// Iterations without a new frontier best before early stop.
        #[arg(long, value_name = "N")]
        patience: Option<u64>,
        /// Parallel execution workers.
        #[arg(long, value_name = "N")]
        workers: Option<usize>,
        /// Sampler/split seed.
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        /// Run directory override.
        #[arg(long, value_name = "DIR")]
        run_dir: Option<PathBuf>,
    },

    /// Score program branches on a dataset split across tolerance bands.
    Eval {
        /// Program branch to evaluate; repeat for a multi-row table.
        #[arg(long = "branch", required = true, value_name = "BRANCH")]
        branches: Vec<String>,
        /// Which split to evaluate on.
        #[arg(long, value_enum, default_value_t = SplitChoice::Test)]
        split: SplitChoice,
        /// Split seed; defaults to the configured loop seed.
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        /// Where to write the JSON table; defaults to
        /// `<run_dir>/eval-table.json`.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },

    /// Grade (ground truth, prediction) pairs from a JSON-lines file.
    Score {
        /// Input file; each line holds `ground_truth` and `prediction`.
        input: PathBuf,
        /// Write the JSON result here instead of stdout.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },

    /// Consolidate skills from completed runs into one program branch.
    Merge {
        /// Completed run directories (each holding summary.json + skills/).
        #[arg(required = true, value_name = "RUN_DIR")]
        run_dirs: Vec<PathBuf>,
        /// Branch label for the merged program (becomes program/<label>).
        #[arg(long, default_value = "merged", value_name = "LABEL")]
        label: String,
        /// Write the JSON provenance report here as well.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },

    /// Summarize a run directory: frontier, iterations, lineage, skills.
    Report {
        /// Run directory; defaults to the configured one.
        #[arg(long, value_name = "DIR")]
        run_dir: Option<PathBuf>,
        /// Emit the report as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum SplitChoice {
    Train,
    Validation,
    Test,
}

impl SplitChoice {
    fn as_str(self) -> &'static str {
        match self {
            SplitChoice::Train => "train",
            SplitChoice::Validation => "validation",
            SplitChoice::Test => "test",
        }
    }
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "skill" => Ok(Mode::Skill),
        "prompt" => Ok(Mode::Prompt),
        other => Err(format!("unknown mode {other:?} (expected \"skill\" or \"prompt\")")),
    }
}

/// Parse the command line, dispatch, and translate failures into exit
/// codes. The binary's `main` is a one-liner over this.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Init => cmd_init(&cli.config),
        Command::Split {
            input,
            train_fraction,
            validation_fraction,
            seed,
            categories,
            out_dir,
        } => cmd_split(
            &cli.config,
            input,
            train_fraction,
            validation_fraction,
            seed,
            categories,
            out_dir,
        ),
        Command::Evolve {
            iterations,
            frontier_capacity,
            failure_threshold,
            batch_size,
            epochs_budget,
            mode,
            patience,
            workers,
            seed,
            run_dir,
        } => {
            let mut config = RunConfig::load(&cli.config).map_err(usage)?;
            let lc = &mut config.loop_config;
            if let Some(v) = iterations {
                lc.max_iterations = v;
            }
            if let Some(v) = frontier_capacity {
                lc.frontier_capacity = v;
            }
            if let Some(v) = failure_threshold {
                lc.failure_threshold = v;
            }
            if let Some(v) = batch_size {
                lc.batch_size = v;
            }
            if let Some(v) = epochs_budget {
                lc.epochs_budget = v;
            }
            if let Some(v) = mode {
                lc.mode = v;
            }
            if let Some(v) = patience {
                lc.patience = v;
            }
            if let Some(v) = workers {
                lc.workers = v;
            }
            if let Some(v) = seed {
                lc.seed = v;
            }
            if let Some(dir) = run_dir {
                config.run_dir = dir;
            }
            cmd_evolve(config)
        }
        Command::Eval { branches, split, seed, out } => {
            let config = RunConfig::load(&cli.config).map_err(usage)?;
            cmd_eval(config, &branches, split, seed, out)
        }
        Command::Score { input, out } => cmd_score(&input, out.as_deref()),
        Command::Merge { run_dirs, label, out } => {
            let config = RunConfig::load(&cli.config).map_err(usage)?;
            cmd_merge(config, &run_dirs, &label, out.as_deref())
        }
        Command::Report { run_dir, json } => {
            let run_dir = match run_dir {
                Some(dir) => dir,
                None => RunConfig::load(&cli.config).map_err(usage)?.run_dir,
            };
            cmd_report(&run_dir, json)
        }
    }
}

// ---------------------------------------------------------------------------
// init
// ---------------------------------------------------------------------------

fn cmd_init(config_path: &Path) -> Result<(), CliError> {
    let config = RunConfig::load(config_path).map_err(usage)?;
    let repo = &config.repository;
    let store = if repo.join(".git").exists() {
        GitStore::open(repo).map_err(usage)?
    } else {
        let mut codebase = BTreeMap::new();
        codebase.insert(
            "README.md".to_owned(),
            "Program repository. Each branch under program/ is one agent \
             configuration; its skills live in .claude/skills/.\n"
                .to_owned(),
        );
        GitStore::init_repo(repo, &codebase).map_err(runtime)?
    };
    let mut programs = ProgramStore::new(store);
    let base = programs
        .init_base(&config.base.system_prompt, &config.base.allowed_tools)
        .map_err(|e| match e {
            StoreError::AlreadyInitialized(_) => usage(e),
            other => runtime(other),
        })?;
    println!("initialized {} (generation 0) in {}", base.branch, repo.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// split
// ---------------------------------------------------------------------------

/// Label every example when any lacks a category. Partially labeled
/// datasets are relabeled wholesale so every pool comes from the same
/// classifier.
fn ensure_categories(examples: Vec<Example>, k: usize) -> Vec<Example> {
    if examples.iter().all(|e| e.category.is_some()) {
        return examples;
    }
    categorize(&examples, &HashCategorizer::new(k)).examples
}

/// Read, categorize, and split the configured dataset.
fn load_splits(
    config: &RunConfig,
    seed: u64,
    categories: usize,
) -> Result<DatasetSplits, CliError> {
    let examples = read_jsonl(&config.dataset.examples).map_err(usage)?;
    let examples = ensure_categories(examples, categories);
    stratified_split(
        &examples,
        config.dataset.train_fraction,
        config.dataset.validation_fraction,
        seed,
    )
    .map_err(usage)
}

#[allow(clippy::too_many_arguments)]
fn cmd_split(
    config_path: &Path,
    input: Option<PathBuf>,
    train_fraction: Option<f64>,
    validation_fraction: Option<f64>,
    seed: Option<u64>,
    categories: usize,
    out_dir: Option<PathBuf>,
) -> Result<(), CliError> {
    let mut config = RunConfig::load(config_path).map_err(usage)?;
    if let Some(path) = input {
        config.dataset.examples = path;
    }
    if let Some(f) = train_fraction {
        config.dataset.train_fraction = f;
    }
    if let Some(f) = validation_fraction {
        config.dataset.validation_fraction = f;
    }
    config.validate().map_err(usage)?;
    let seed = seed.unwrap_or(config.loop_config.seed);
    let out_dir = out_dir.unwrap_or_else(|| config.run_dir.join("splits"));

    let examples = read_jsonl(&config.dataset.examples).map_err(usage)?;
    let total = examples.len();
    let examples = ensure_categories(examples, categories);
    let splits = stratified_split(
        &examples,
        config.dataset.train_fraction,
        config.dataset.validation_fraction,
        seed,
    )
    .map_err(usage)?;

    fs::create_dir_all(&out_dir).map_err(runtime)?;
    let train: Vec<Example> = splits.train_examples().cloned().collect();
    write_jsonl(&out_dir.join("train.jsonl"), &train).map_err(runtime)?;
    write_jsonl(&out_dir.join("validation.jsonl"), &splits.validation)
        .map_err(runtime)?;
    write_jsonl(&out_dir.join("test.jsonl"), &splits.test).map_err(runtime)?;

    let manifest = SplitManifest {
        seed,
        train_fraction: config.dataset.train_fraction,
        validation_fraction: config.dataset.validation_fraction,
        total_examples: total,
        per_category: splits.per_category_counts(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(runtime)?;
    fs::write(out_dir.join("manifest.json"), text + "\n").map_err(runtime)?;

    println!(
        "split {total} examples (seed {seed}) -> train {}, validation {}, test {}",
        train.len(),
        splits.validation.len(),
        splits.test.len()
    );
    println!("{:<24} {:>6} {:>11} {:>6}", "category", "train", "validation", "test");
    for (category, counts) in splits.per_category_counts() {
        println!(
            "{:<24} {:>6} {:>11} {:>6}",
            category, counts.train, counts.validation, counts.test
        );
    }
    println!("written to {}", out_dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// evolve
// ---------------------------------------------------------------------------

/// The three agent roles assembled from one backend config.
struct AgentStack {
    executor: Box<dyn Executor>,
    proposer: Box<dyn Proposer>,
    builder: Box<dyn SkillBuilder>,
}

/// Build the executor/proposer/builder trio for a backend. The shell
/// backend runs a local command per task but still proposes and builds
/// through the chat endpoint.
fn build_stack(backend: &BackendConfig) -> AgentStack {
    match backend {
        BackendConfig::Http { base_url, model, credential_env, answer_delimiter } => {
            let chat = || {
                Box::new(HttpChatBackend::new(
                    base_url.clone(),
                    model.clone(),
                    credential_env.clone(),
                ))
            };
            let mut executor = ChatExecutor::new(chat());
            executor.answer_delimiter = answer_delimiter.clone();
            AgentStack {
                executor: Box::new(executor),
                proposer: Box::new(ChatProposer::new(chat())),
                builder: Box::new(ChatSkillBuilder::new(chat())),
            }
        }
        BackendConfig::Shell { command, base_url, model, credential_env, timeout_seconds } => {
            let chat = || {
                Box::new(HttpChatBackend::new(
                    base_url.clone(),
                    model.clone(),
                    credential_env.clone(),
                ))
            };
            let mut executor = ShellExecutor::new(command.clone());
            if let Some(seconds) = timeout_seconds {
                executor.timeout = std::time::Duration::from_secs(*seconds);
            }
            AgentStack {
                executor: Box::new(executor),
                proposer: Box::new(ChatProposer::new(chat())),
                builder: Box::new(ChatSkillBuilder::new(chat())),
            }
        }
        BackendConfig::Mock { gate_skill, specification } => AgentStack {
            executor: Box::new(SkillGatedExecutor::new(gate_skill.clone())),
            proposer: Box::new(EditIfExistsProposer {
                skill: gate_skill.clone(),
                specification: specification.clone().unwrap_or_else(|| {
                    "Re-read the row label and unit, then recompute the value \
                     before answering."
                        .to_owned()
                }),
            }),
            builder: Box::new(TemplateSkillBuilder),
        },
    }
}

fn cmd_evolve(config: RunConfig) -> Result<(), CliError> {
    let git = GitStore::open(&config.repository).map_err(usage)?;
    let mut programs = ProgramStore::new(git);
    if !programs.raw_ref().branch_exists(BASE_BRANCH).map_err(runtime)? {
        return Err(CliError::Usage(format!(
            "{} has no {BASE_BRANCH} branch — run `init` first",
            config.repository.display()
        )));
    }

    let splits = load_splits(&config, config.loop_config.seed, 4)?;
    let stack = build_stack(&config.backend);
    let scorer = config.scorer.as_fn();
    let options = EngineOptions {
        fixed_scored_at: config.pin_scored_at.clone(),
        materialize_workdir: matches!(config.backend, BackendConfig::Shell { .. }),
        ..EngineOptions::default()
    };

    let mut engine = EvolutionEngine::new(
        &mut programs,
        splits,
        stack.executor.as_ref(),
        stack.proposer.as_ref(),
        stack.builder.as_ref(),
        &*scorer,
        config.loop_config.clone(),
        &config.run_dir,
        options,
    )
    .map_err(evolve_error)?;
    let best = engine.run().map_err(evolve_error)?;

    let summary_text = fs::read_to_string(config.run_dir.join("summary.json"))
        .map_err(runtime)?;
    let summary: crate::evolve::RunSummary =
        serde_json::from_str(&summary_text).map_err(runtime)?;
    println!(
        "evolution finished after {} iteration(s): {}",
        summary.iterations_completed, summary.stop_reason
    );
    println!(
        "best: {} (validation {:.4})",
        best.branch,
        best.score.unwrap_or(f64::NAN)
    );
    println!("artifacts in {}", config.run_dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

/// Percentage of pairs graded correct at each tolerance. Empty input
/// yields zeros.
pub fn tolerance_table(pairs: &[(String, String)], taus: &[f64]) -> Vec<f64> {
    if pairs.is_empty() {
        return vec![0.0; taus.len()];
    }
    taus.iter()
        .map(|&tau| {
            let hits = pairs
                .iter()
                .filter(|(gt, pred)| score(gt, pred, tau).binary == 1.0)
                .count();
            100.0 * hits as f64 / pairs.len() as f64
        })
        .collect()
}

/// Column header for a tolerance, e.g. 0.001 -> "0.10%".
pub fn tau_column(tau: f64) -> String {
    format!("{:.2}%", tau * 100.0)
}

#[derive(Serialize)]
struct EvalTableRow {
    branch: String,
    accuracy_percent: Vec<f64>,
    mean_weighted: f64,
}

#[derive(Serialize)]
struct EvalTableDocument {
    split: String,
    examples: usize,
    taus: Vec<f64>,
    rows: Vec<EvalTableRow>,
}

/// Render the accuracy table: one row per branch, one column per
/// tolerance.
fn render_eval_table(document: &EvalTableDocument) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "split: {} ({} example(s))\n\n",
        document.split, document.examples
    ));
    out.push_str(&format!("{:<40}", "program"));
    for &tau in &document.taus {
        out.push_str(&format!("{:>8}", tau_column(tau)));
    }
    out.push('\n');
    for row in &document.rows {
        out.push_str(&format!("{:<40}", row.branch));
        for accuracy in &row.accuracy_percent {
            out.push_str(&format!("{accuracy:>8.1}"));
        }
        out.push('\n');
    }
    out
}

fn cmd_eval(
    config: RunConfig,
    branches: &[String],
    split: SplitChoice,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let git = GitStore::open(&config.repository).map_err(usage)?;
    let programs = ProgramStore::new(git);
    for branch in branches {
        if !programs.raw_ref().branch_exists(branch).map_err(runtime)? {
            return Err(CliError::Usage(format!("branch {branch} does not exist")));
        }
    }

    let seed = seed.unwrap_or(config.loop_config.seed);
    let splits = load_splits(&config, seed, 4)?;
    let examples: Vec<Example> = match split {
        SplitChoice::Train => splits.train_examples().cloned().collect(),
        SplitChoice::Validation => splits.validation.clone(),
        SplitChoice::Test => splits.test.clone(),
    };
    if examples.is_empty() {
        return Err(CliError::Usage(format!(
            "the {} split is empty",
            split.as_str()
        )));
    }

    let stack = build_stack(&config.backend);
    let scorer = config.scorer.as_fn();
    let mut rows = Vec::with_capacity(branches.len());
    for branch in branches {
        let snapshot = ProgramSnapshot {
            config: programs.read_config(branch).map_err(runtime)?,
            skills: programs.skills(branch).map_err(runtime)?,
            workdir: match &config.backend {
                BackendConfig::Shell { .. } => {
                    let suffix = branch.rsplit('/').next().unwrap_or(branch);
                    let dest = config.run_dir.join("work").join(suffix);
                    if dest.exists() {
                        fs::remove_dir_all(&dest).map_err(runtime)?;
                    }
                    programs.materialize(branch, &dest).map_err(runtime)?;
                    Some(dest)
                }
                _ => None,
            },
        };
        let report = evaluate(
            stack.executor.as_ref(),
            &snapshot,
            &examples,
            &*scorer,
            config.loop_config.workers,
        );
        let pairs: Vec<(String, String)> = examples
            .iter()
            .zip(&report.results)
            .map(|(example, result)| {
                (example.ground_truth.clone(), result.predicted.clone())
            })
            .collect();
        rows.push(EvalTableRow {
            branch: branch.clone(),
            accuracy_percent: tolerance_table(&pairs, &EVAL_TABLE_TAUS),
            mean_weighted: report.mean,
        });
    }

    let document = EvalTableDocument {
        split: split.as_str().to_owned(),
        examples: examples.len(),
        taus: EVAL_TABLE_TAUS.to_vec(),
        rows,
    };
    print!("{}", render_eval_table(&document));

    let out = out.unwrap_or_else(|| config.run_dir.join("eval-table.json"));
    if let Some(parent) = out.parent() {
        fs::create_dir_all(parent).map_err(runtime)?;
    }
    let text = serde_json::to_string_pretty(&document).map_err(runtime)?;
    fs::write(&out, text + "\n").map_err(runtime)?;
    println!("\ntable written to {}", out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct ScoreInputRow {
    #[serde(alias = "answer")]
    ground_truth: String,
    prediction: String,
}

#[derive(Serialize)]
struct ScoredRow {
    line: usize,
    ground_truth: String,
    prediction: String,
    score: MultiToleranceScore,
}

#[derive(Serialize)]
struct RowError {
    line: usize,
    error: String,
}

#[derive(Serialize)]
struct ToleranceAccuracy {
    tau: f64,
    accuracy_percent: f64,
}

#[derive(Serialize)]
struct ScoreAggregate {
    rows_scored: usize,
    mean_weighted: f64,
    failures: usize,
    accuracy_percent: Vec<ToleranceAccuracy>,
}

#[derive(Serialize)]
struct ScoreDocument {
    rows: Vec<ScoredRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    errors: Vec<RowError>,
    aggregate: ScoreAggregate,
}

fn cmd_score(input: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let text = fs::read_to_string(input)
        .map_err(|e| usage(format!("cannot read {}: {e}", input.display())))?;

    // Unparseable rows are recorded, not fatal: grading bad data is the
    // command's job, so it always exits 0 once the input file opens.
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ScoreInputRow>(line) {
            Err(e) => errors.push(RowError { line: index + 1, error: e.to_string() }),
            Ok(row) => {
                let score = multi_tolerance_score(&row.ground_truth, &row.prediction);
                rows.push(ScoredRow {
                    line: index + 1,
                    ground_truth: row.ground_truth,
                    prediction: row.prediction,
                    score,
                });
            }
        }
    }

    let scored = rows.len();
    let accuracy_percent = MULTI_TOLERANCE_TAUS
        .iter()
        .enumerate()
        .map(|(level, &tau)| ToleranceAccuracy {
            tau,
            accuracy_percent: if scored == 0 {
                0.0
            } else {
                100.0
                    * rows
                        .iter()
                        .map(|r| r.score.per_tolerance[level].1)
                        .sum::<f64>()
                    / scored as f64
            },
        })
        .collect();
    let document = ScoreDocument {
        aggregate: ScoreAggregate {
            rows_scored: scored,
            mean_weighted: if scored == 0 {
                0.0
            } else {
                rows.iter().map(|r| r.score.weighted).sum::<f64>() / scored as f64
            },
            failures: rows.iter().filter(|r| r.score.is_failure).count(),
            accuracy_percent,
        },
        rows,
        errors,
    };

    let rendered =
        serde_json::to_string_pretty(&document).map_err(runtime)? + "\n";
    match out {
        Some(path) => fs::write(path, rendered).map_err(runtime)?,
        None => print!("{rendered}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// merge
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct MergeDocument {
    branch: String,
    skills: Vec<String>,
    provenance: Vec<ProvenanceEntry>,
}

fn cmd_merge(
    config: RunConfig,
    run_dirs: &[PathBuf],
    label: &str,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let mut libraries = Vec::with_capacity(run_dirs.len());
    for dir in run_dirs {
        libraries.push(RunLibrary::load(dir).map_err(usage)?);
    }
    let report = merge_unique(&libraries).map_err(usage)?;

    let git = GitStore::open(&config.repository).map_err(usage)?;
    let mut programs = ProgramStore::new(git);
    let merged = programs
        .create_merged(label, &report.skills)
        .map_err(|e| match e {
            StoreError::BranchExists(_) => usage(e),
            other => runtime(other),
        })?;

    print!("{}", report.render_text());
    println!(
        "created {} carrying {} skill(s) from {} run(s)",
        merged.branch,
        report.skills.len(),
        libraries.len()
    );

    if let Some(path) = out {
        let document = MergeDocument {
            branch: merged.branch.clone(),
            skills: report.skills.iter().map(|s| s.name.clone()).collect(),
            provenance: report.provenance.clone(),
        };
        let text = serde_json::to_string_pretty(&document).map_err(runtime)?;
        fs::write(path, text + "\n").map_err(runtime)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

fn cmd_report(run_dir: &Path, json: bool) -> Result<(), CliError> {
    if !run_dir.is_dir() {
        return Err(CliError::Usage(format!(
            "{} is not a directory",
            run_dir.display()
        )));
    }
    let report = build_report(run_dir);
    if json {
        let text = serde_json::to_string_pretty(&report).map_err(runtime)?;
        println!("{text}");
    } else {
        print!("{}", report.render_text());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_table_perfect_predictions_hit_every_column() {
        let pairs: Vec<(String, String)> =
            (0..10).map(|i| (format!("{}", 100 + i), format!("{}", 100 + i))).collect();
        assert_eq!(
            tolerance_table(&pairs, &EVAL_TABLE_TAUS),
            vec![100.0; 5]
        );
    }

    #[test]
    fn tolerance_table_half_percent_errors_split_the_columns() {
        // Predictions off by exactly 0.5%: misses at 0% and 0.1%, hits at
        // 1% and wider.
        let pairs: Vec<(String, String)> = (1..=10)
            .map(|i| {
                let gt = (i * 1000) as f64;
                (format!("{gt}"), format!("{}", gt * 1.005))
            })
            .collect();
        assert_eq!(
            tolerance_table(&pairs, &EVAL_TABLE_TAUS),
            vec![0.0, 0.0, 100.0, 100.0, 100.0]
        );
    }

    #[test]
    fn tolerance_table_empty_input_is_all_zero() {
        assert_eq!(tolerance_table(&[], &EVAL_TABLE_TAUS), vec![0.0; 5]);
    }

    #[test]
    fn tau_columns_render_as_percentages() {
        let headers: Vec<String> =
            EVAL_TABLE_TAUS.iter().map(|&t| tau_column(t)).collect();
        assert_eq!(headers, vec!["0.00%", "0.10%", "1.00%", "5.00%", "10.00%"]);
    }

    #[test]
    fn mode_parsing_accepts_both_modes_and_rejects_garbage() {
        assert_eq!(parse_mode("skill").unwrap(), Mode::Skill);
        assert_eq!(parse_mode("prompt").unwrap(), Mode::Prompt);
        assert!(parse_mode("genetic").is_err());
    }

    #[test]
    fn categorization_preserves_existing_labels() {
        let labeled = vec![Example {
            id: "a".into(),
            question: "q".into(),
            ground_truth: "1".into(),
            category: Some("tables".into()),
        }];
        let out = ensure_categories(labeled.clone(), 4);
        assert_eq!(out, labeled);
    }

    #[test]
    fn categorization_fills_missing_labels() {
        let examples = vec![
            Example {
                id: "a".into(),
                question: "sum the revenue column".into(),
                ground_truth: "1".into(),
                category: None,
            },
            Example {
                id: "b".into(),
                question: "what year did it open".into(),
                ground_truth: "1999".into(),
                category: Some("years".into()),
            },
        ];
        let out = ensure_categories(examples, 3);
        assert!(out.iter().all(|e| e.category.is_some()));
    }

    #[test]
    fn mock_stack_executor_is_gated_on_the_skill() {
        let stack = build_stack(&BackendConfig::Mock {
            gate_skill: "X".into(),
            specification: None,
        });
        let snapshot = ProgramSnapshot {
            config: crate::store::ProgramConfig {
                name: "base".into(),
                parent: None,
                generation: 0,
                system_prompt: "answer".into(),
                allowed_tools: vec![],
                evaluation: None,
            },
            skills: vec![],
            workdir: None,
        };
        let example = Example {
            id: "e".into(),
            question: "q".into(),
            ground_truth: "42".into(),
            category: None,
        };
        let trace = stack.executor.execute(&snapshot, &example);
        assert_eq!(trace.predicted_answer, "no idea");
    }

    #[test]
    fn eval_table_rendering_lines_up_headers_and_rows() {
        let document = EvalTableDocument {
            split: "test".into(),
            examples: 8,
            taus: EVAL_TABLE_TAUS.to_vec(),
            rows: vec![EvalTableRow {
                branch: "program/base".into(),
                accuracy_percent: vec![12.5, 12.5, 25.0, 25.0, 37.5],
                mean_weighted: 0.2,
            }],
        };
        let text = render_eval_table(&document);
        assert!(text.contains("0.00%"));
        assert!(text.contains("10.00%"));
        assert!(text.contains("program/base"));
        assert!(text.contains("12.5"));
    }
}
