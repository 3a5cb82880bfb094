//! The evolution loop driver.
//!
//! One iteration is: select a parent from the frontier, sample a training
//! batch, execute it under the parent, keep the failures, ask the
//! Proposer for one mutation, materialize it, branch a child, score the
//! child on the full validation set, admit or discard, and append the
//! outcome to the feedback history. The driver is sequential at the
//! iteration level; only per-example execution fans out to a bounded
//! worker pool, so every store, frontier, and history mutation happens on
//! this thread and mock runs are fully deterministic.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{
    find_ground_truth_leak, Executor, Failure, Proposer, ProgramSnapshot, SkillBuilder,
};
use crate::dataset::{sample_batch, DatasetSplits, Example, SamplerState};
use crate::frontier::{Admission, Frontier, FrontierError, ParentSelection};
use crate::history::{FeedbackHistory, FeedbackRecord, HistoryError, Verdict};
use crate::scoring::MultiToleranceScore;
use crate::store::{
    Evaluation, Mutation, ProgramRef, ProgramStore, StoreError, VersionStore,
    BASE_BRANCH,
};

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("invalid loop config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Frontier(#[from] FrontierError),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error("run directory io: {0}")]
    Io(#[from] std::io::Error),
}

/// What a candidate mutates: its skill library or its system prompt.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Skill,
    Prompt,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Skill => "skill",
            Mode::Prompt => "prompt",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Knobs of one evolution run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopConfig {
    /// Maximum iterations T.
    pub max_iterations: u64,
    /// Frontier capacity k.
    pub frontier_capacity: usize,
    /// Weighted-score cutoff below which an example counts as a failure.
    pub failure_threshold: f64,
    /// Examples drawn per iteration.
    pub batch_size: usize,
    /// Training budget in epochs; converted to a batch-draw budget of
    /// `round(epochs * train_size)` draws.
    pub epochs_budget: f64,
    pub mode: Mode,
    /// Consecutive iterations without a new frontier best before stopping.
    pub patience: u64,
    /// Worker threads for per-example execution.
    pub workers: usize,
    pub seed: u64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            frontier_capacity: 3,
            failure_threshold: 0.8,
            batch_size: 8,
            epochs_budget: 1.5,
            mode: Mode::Skill,
            patience: 5,
            workers: 4,
            seed: 0,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<(), EvolveError> {
        let fail = |msg: &str| Err(EvolveError::InvalidConfig(msg.to_owned()));
        if self.max_iterations < 1 {
            return fail("max_iterations must be at least 1");
        }
        if self.frontier_capacity < 1 {
            return fail("frontier_capacity must be at least 1");
        }
        if !(self.failure_threshold > 0.0 && self.failure_threshold <= 1.0) {
            return fail("failure_threshold must lie in (0, 1]");
        }
        if self.batch_size < 1 {
            return fail("batch_size must be at least 1");
        }
        if !(self.epochs_budget > 0.0) {
            return fail("epochs_budget must be positive");
        }
        if self.patience < 1 {
            return fail("patience must be at least 1");
        }
        if self.workers < 1 {
            return fail("workers must be at least 1");
        }
        Ok(())
    }
}

/// Task scorer: ground truth and prediction to a multi-tolerance score.
pub type Scorer = dyn Fn(&str, &str) -> MultiToleranceScore + Send + Sync;

/// What one iteration did. `candidate` is absent exactly when the
/// verdict is [`Verdict::Skipped`]; a rejected candidate keeps its name
/// here even though its branch was deleted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationOutcome {
    pub iteration: u64,
    pub parent: String,
    pub candidate: Option<String>,
    pub validation_score: Option<f64>,
    pub verdict: Verdict,
    /// Why the iteration was skipped, when it was.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Scored execution of one example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleResult {
    pub example_id: String,
    pub predicted: String,
    pub weighted: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub duration_seconds: f64,
}

/// Mean validation score plus the per-example breakdown that gets
/// persisted for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mean: f64,
    pub results: Vec<ExampleResult>,
}

struct Executed {
    example: Example,
    trace: crate::agents::ExecutionTrace,
    score: MultiToleranceScore,
}

/// Execute `examples` under `program` on a bounded worker pool. Results
/// come back in input order regardless of scheduling, so downstream
/// arithmetic is deterministic.
fn execute_all(
    executor: &dyn Executor,
    program: &ProgramSnapshot,
    examples: &[Example],
    scorer: &Scorer,
    workers: usize,
) -> Vec<Executed> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Executed>>> =
        examples.iter().map(|_| Mutex::new(None)).collect();
    let workers = workers.clamp(1, examples.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                if index >= examples.len() {
                    break;
                }
                let example = examples[index].clone();
                let trace = executor.execute(program, &example);
                // An execution error scores zero by contract rather than
                // letting an empty prediction reach the scorer.
                let score = if trace.error.is_some() {
                    MultiToleranceScore::zero()
                } else {
                    scorer(&example.ground_truth, &trace.predicted_answer)
                };
                *slots[index].lock().expect("result slot") =
                    Some(Executed { example, trace, score });
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("slot lock").expect("slot filled"))
        .collect()
}

/// Mean weighted score of `program` over `examples`.
///
/// Single execution errors score their example 0; `evaluate` itself does
/// not fail.
///
/// # Panics
///
/// Panics on an empty example list — evaluating nothing is a contract
/// violation, not a score of zero.
pub fn evaluate(
    executor: &dyn Executor,
    program: &ProgramSnapshot,
    examples: &[Example],
    scorer: &Scorer,
    workers: usize,
) -> EvalReport {
    assert!(!examples.is_empty(), "evaluate requires a non-empty example list");
    let executed = execute_all(executor, program, examples, scorer, workers);
    let mean = executed.iter().map(|e| e.score.weighted).sum::<f64>()
        / executed.len() as f64;
    let results = executed
        .into_iter()
        .map(|e| ExampleResult {
            example_id: e.example.id,
            predicted: e.trace.predicted_answer,
            weighted: e.score.weighted,
            error: e.trace.error,
            duration_seconds: e.trace.duration_seconds,
        })
        .collect();
    EvalReport { mean, results }
}

/// Execute `batch` under `parent` and keep the examples whose weighted
/// score falls below `threshold`.
pub fn collect_failures(
    executor: &dyn Executor,
    parent: &ProgramSnapshot,
    batch: &[Example],
    scorer: &Scorer,
    threshold: f64,
    workers: usize,
) -> Vec<Failure> {
    execute_all(executor, parent, batch, scorer, workers)
        .into_iter()
        .filter(|e| e.score.weighted < threshold)
        .map(|e| Failure { example: e.example, trace: e.trace, score: e.score })
        .collect()
}

/// Engine knobs that are implementation policy rather than loop
/// semantics.
#[derive(Debug, Clone)]
pub struct EngineOptions {
    /// Character budget for the history digest fed to the Proposer.
    pub history_budget: usize,
    /// At most this many failures reach the Proposer (largest deficits
    /// first).
    pub failure_cap: usize,
    pub selection: ParentSelection,
    /// Pin `scored_at` to a fixed value; reproducible runs set this so
    /// program metadata is byte-identical across repeats.
    pub fixed_scored_at: Option<String>,
    /// Export each program to `<run_dir>/work/<suffix>` before executing,
    /// for shell-based executors that need a checkout.
    pub materialize_workdir: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            history_budget: 4000,
            failure_cap: 8,
            selection: ParentSelection::RoundRobin,
            fixed_scored_at: None,
            materialize_workdir: false,
        }
    }
}

/// Resumable loop state, overwritten in the run directory after every
/// iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub iteration: u64,
    pub sampler: SamplerState,
    pub stall: u64,
    pub draws_budget: u64,
    pub frontier: Frontier,
}

impl Checkpoint {
    pub fn load(path: &Path) -> Result<Self, EvolveError> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| EvolveError::Io(e.into()))
    }
}

/// Final run record; also the manifest the merge tool reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub mode: String,
    pub iterations_completed: u64,
    pub stop_reason: String,
    pub best_branch: String,
    pub best_score: f64,
    pub draws_served: u64,
    pub frontier: Vec<SummaryEntry>,
    /// Skill names of the best program, exported under `skills/`.
    pub skills: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub branch: String,
    pub score: f64,
    pub generation: u32,
}

#[derive(Serialize)]
struct BaselineEvent<'a> {
    event: &'static str,
    branch: &'a str,
    validation_score: f64,
}

#[derive(Serialize)]
struct IterationEvent<'a> {
    event: &'static str,
    iteration: u64,
    parent: &'a str,
    batch_size: usize,
    failure_count: usize,
    candidate: Option<&'a str>,
    validation_score: Option<f64>,
    verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<&'a str>,
    frontier_best: f64,
    draws_served: u64,
}

/// Drives the full loop against a program store and a run directory.
pub struct EvolutionEngine<'a, S: VersionStore> {
    store: &'a mut ProgramStore<S>,
    executor: &'a dyn Executor,
    proposer: &'a dyn Proposer,
    builder: &'a dyn SkillBuilder,
    scorer: &'a Scorer,
    config: LoopConfig,
    options: EngineOptions,
    run_dir: PathBuf,
    splits: DatasetSplits,
    frontier: Frontier,
    sampler: SamplerState,
    history: FeedbackHistory,
    events: BufWriter<File>,
    draws_budget: u64,
    stall: u64,
    iterations_completed: u64,
}

impl<'a, S: VersionStore> EvolutionEngine<'a, S> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &'a mut ProgramStore<S>,
        splits: DatasetSplits,
        executor: &'a dyn Executor,
        proposer: &'a dyn Proposer,
        builder: &'a dyn SkillBuilder,
        scorer: &'a Scorer,
        config: LoopConfig,
        run_dir: impl Into<PathBuf>,
        options: EngineOptions,
    ) -> Result<Self, EvolveError> {
        config.validate()?;
        if splits.validation.is_empty() {
            return Err(EvolveError::InvalidConfig(
                "validation split is empty".to_owned(),
            ));
        }
        if splits.train_total() == 0 {
            return Err(EvolveError::InvalidConfig(
                "training split is empty".to_owned(),
            ));
        }
        let run_dir = run_dir.into();
        fs::create_dir_all(run_dir.join("eval"))?;
        let history = FeedbackHistory::open(run_dir.join("history.jsonl"))?;
        let events = BufWriter::new(File::create(run_dir.join("events.jsonl"))?);
        let draws_budget =
            (config.epochs_budget * splits.train_total() as f64).round() as u64;
        let frontier = Frontier::new(config.frontier_capacity);
        let sampler = SamplerState::new(config.seed);
        Ok(Self {
            store,
            executor,
            proposer,
            builder,
            scorer,
            config,
            options,
            run_dir,
            splits,
            frontier,
            sampler,
            history,
            events,
            draws_budget,
            stall: 0,
            iterations_completed: 0,
        })
    }

    pub fn frontier(&self) -> &Frontier {
        &self.frontier
    }

    pub fn history(&self) -> &FeedbackHistory {
        &self.history
    }

    pub fn draws_served(&self) -> u64 {
        self.sampler.draws_served
    }

    fn scored_at(&self) -> String {
        self.options.fixed_scored_at.clone().unwrap_or_else(|| {
            chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
        })
    }

    fn write_event<E: Serialize>(&mut self, event: &E) -> Result<(), EvolveError> {
        serde_json::to_writer(&mut self.events, event)
            .map_err(|e| EvolveError::Io(e.into()))?;
        self.events.write_all(b"\n")?;
        self.events.flush()?;
        Ok(())
    }

    /// Config plus reassembled skills for a branch; optionally a full
    /// checkout under the run directory for shell executors.
    fn snapshot(&mut self, branch: &str) -> Result<ProgramSnapshot, EvolveError> {
        let config = self.store.read_config(branch)?;
        let skills = self.store.skills(branch)?;
        let workdir = if self.options.materialize_workdir {
            let suffix = branch.rsplit('/').next().unwrap_or(branch);
            let dest = self.run_dir.join("work").join(suffix);
            if dest.exists() {
                fs::remove_dir_all(&dest)?;
            }
            self.store.materialize(branch, &dest)?;
            Some(dest)
        } else {
            None
        };
        Ok(ProgramSnapshot { config, skills, workdir })
    }

    /// Score a program on the full validation set and persist the
    /// per-example results under `eval/`.
    fn evaluate_program(&mut self, program: &ProgramRef) -> Result<f64, EvolveError> {
        let snapshot = self.snapshot(&program.branch)?;
        let report = evaluate(
            self.executor,
            &snapshot,
            &self.splits.validation,
            self.scorer,
            self.config.workers,
        );
        let path = self.run_dir.join("eval").join(format!("{}.jsonl", program.suffix()));
        let mut file = BufWriter::new(File::create(path)?);
        for result in &report.results {
            serde_json::to_writer(&mut file, result)
                .map_err(|e| EvolveError::Io(e.into()))?;
            file.write_all(b"\n")?;
        }
        file.flush()?;
        Ok(report.mean)
    }

    /// Evaluate the base program and seed the frontier with it.
    fn seed_baseline(&mut self) -> Result<(), EvolveError> {
        let base = self.store.load_ref(BASE_BRANCH)?;
        let score = self.evaluate_program(&base)?;
        self.store.write_evaluation(
            &base,
            &Evaluation {
                validation_score: score,
                scored_at: self.scored_at(),
                mode: self.config.mode.as_str().to_owned(),
            },
        )?;
        self.frontier.try_admit(base.clone(), score)?;
        self.store.tag_frontier(&base)?;
        self.write_event(&BaselineEvent {
            event: "baseline",
            branch: BASE_BRANCH,
            validation_score: score,
        })
    }

    /// Materialize the proposal into a store mutation. Skill mode asks
    /// the Skill-Builder; prompt mode appends the specification to the
    /// parent's system prompt as a named guidance section.
    fn build_mutation(
        &self,
        parent: &ProgramSnapshot,
        proposal: &crate::agents::Proposal,
        failures: &[Failure],
    ) -> Result<Mutation, String> {
        match self.config.mode {
            Mode::Skill => {
                let existing = parent
                    .skills
                    .iter()
                    .find(|s| s.name == proposal.target_skill_name);
                let folder = self
                    .builder
                    .build(proposal, existing)
                    .map_err(|e| format!("builder failed: {e}"))?;
                for content in folder.to_files().values() {
                    if let Some(id) = find_ground_truth_leak(content, failures) {
                        return Err(format!(
                            "skill files leak the ground truth of example {id}"
                        ));
                    }
                }
                Ok(Mutation::Skill(folder))
            }
            Mode::Prompt => Ok(Mutation::Prompt(format!(
                "{}\n\n## {}\n{}",
                parent.config.system_prompt,
                proposal.target_skill_name,
                proposal.specification.trim(),
            ))),
        }
    }

    /// One full loop iteration. Proposer and builder failures skip the
    /// iteration with a history record; store corruption propagates.
    pub fn run_iteration(&mut self, iteration: u64) -> Result<IterationOutcome, EvolveError> {
        let parent = self
            .frontier
            .select(self.options.selection, iteration - 1)?
            .clone();
        let parent_score = parent
            .score
            .expect("frontier members carry validation scores");

        let remaining = (self.draws_budget - self.sampler.draws_served) as usize;
        let batch_size = self.config.batch_size.min(remaining);
        let batch = sample_batch(&self.splits, &mut self.sampler, batch_size);
        let batch_len = batch.len();

        let parent_snapshot = self.snapshot(&parent.branch)?;
        let mut failures = collect_failures(
            self.executor,
            &parent_snapshot,
            &batch,
            self.scorer,
            self.config.failure_threshold,
            self.config.workers,
        );
        let failure_count = failures.len();

        // The happy path returns early out of this closure-like block;
        // every skip funnels into the shared epilogue below.
        let mut skip_reason: Option<String> = None;
        let mut proposal = None;
        let mut candidate: Option<ProgramRef> = None;
        let mut validation_score = None;
        let mut verdict = Verdict::Skipped;

        if failures.is_empty() {
            skip_reason = Some("no failures in batch".to_owned());
        } else {
            // Largest score deficits first, capped for the prompt budget.
            failures.sort_by(|a, b| {
                a.score
                    .weighted
                    .partial_cmp(&b.score.weighted)
                    .expect("scores are finite")
            });
            failures.truncate(self.options.failure_cap);

            let digest = self.history.render_for_proposer(self.options.history_budget);
            let inventory = parent_snapshot.skill_names();
            match self.proposer.propose(&failures, &digest, &inventory) {
                Err(e) => skip_reason = Some(format!("proposer failed: {e}")),
                Ok(p) => {
                    if let Some(id) = find_ground_truth_leak(&p.specification, &failures)
                    {
                        skip_reason = Some(format!(
                            "proposal leaks the ground truth of example {id}"
                        ));
                    } else {
                        match self.build_mutation(&parent_snapshot, &p, &failures) {
                            Err(reason) => {
                                skip_reason = Some(reason);
                                proposal = Some(p);
                            }
                            Ok(mutation) => {
                                match self.store.create_child(&parent, &mutation, iteration)
                                {
                                    Err(StoreError::EmptyMutation(why)) => {
                                        skip_reason =
                                            Some(format!("empty mutation: {why}"));
                                        proposal = Some(p);
                                    }
                                    Err(other) => return Err(other.into()),
                                    Ok(child) => {
                                        proposal = Some(p);
                                        let score = self.evaluate_program(&child)?;
                                        self.store.write_evaluation(
                                            &child,
                                            &Evaluation {
                                                validation_score: score,
                                                scored_at: self.scored_at(),
                                                mode: mutation.mode().to_owned(),
                                            },
                                        )?;
                                        validation_score = Some(score);
                                        match self
                                            .frontier
                                            .try_admit(child.clone(), score)?
                                        {
                                            Admission::Admitted { evicted } => {
                                                self.store.tag_frontier(&child)?;
                                                if let Some(out) = evicted {
                                                    self.store.untag_frontier(&out)?;
                                                }
                                                verdict = Verdict::Admitted;
                                            }
                                            Admission::Rejected => {
                                                self.store.delete_program(&child)?;
                                                verdict = Verdict::Rejected;
                                            }
                                        }
                                        candidate = Some(child);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }

        let outcome = IterationOutcome {
            iteration,
            parent: parent.branch.clone(),
            candidate: candidate.as_ref().map(|c| c.branch.clone()),
            validation_score,
            verdict,
            reason: skip_reason,
        };

        self.history.append(FeedbackRecord::new(
            iteration,
            parent.branch.clone(),
            proposal,
            validation_score,
            parent_score,
            verdict,
        ))?;

        let frontier_best = self
            .frontier
            .best()?
            .score
            .expect("frontier members carry validation scores");
        self.write_event(&IterationEvent {
            event: "iteration",
            iteration,
            parent: &outcome.parent,
            batch_size: batch_len,
            failure_count,
            candidate: outcome.candidate.as_deref(),
            validation_score: outcome.validation_score,
            verdict: outcome.verdict,
            reason: outcome.reason.as_deref(),
            frontier_best,
            draws_served: self.sampler.draws_served,
        })?;
        Ok(outcome)
    }

    fn write_checkpoint(&self, iteration: u64) -> Result<(), EvolveError> {
        let checkpoint = Checkpoint {
            iteration,
            sampler: self.sampler.clone(),
            stall: self.stall,
            draws_budget: self.draws_budget,
            frontier: self.frontier.clone(),
        };
        let text = serde_json::to_string_pretty(&checkpoint)
            .map_err(|e| EvolveError::Io(e.into()))?;
        fs::write(self.run_dir.join("checkpoint.json"), text + "\n")?;
        Ok(())
    }

    /// Run the loop to completion and return the frontier best. Artifacts
    /// land in the run directory: `history.jsonl`, `events.jsonl`,
    /// per-branch `eval/*.jsonl`, a per-iteration `checkpoint.json`, the
    /// best program's skills under `skills/`, and `summary.json`.
    pub fn run(&mut self) -> Result<ProgramRef, EvolveError> {
        self.seed_baseline()?;
        let mut stop_reason = "max iterations reached";
        for iteration in 1..=self.config.max_iterations {
            if self.sampler.draws_served >= self.draws_budget {
                stop_reason = "epoch budget exhausted";
                break;
            }
            let previous_best = self
                .frontier
                .best()?
                .score
                .expect("frontier members carry validation scores");
            self.run_iteration(iteration)?;
            self.iterations_completed = iteration;
            let new_best = self
                .frontier
                .best()?
                .score
                .expect("frontier members carry validation scores");
            self.stall = if new_best > previous_best { 0 } else { self.stall + 1 };
            self.write_checkpoint(iteration)?;
            if self.stall >= self.config.patience {
                stop_reason = "early stop: patience exhausted";
                break;
            }
        }

        let best = self.frontier.best()?.clone();
        self.export_best(&best)?;
        self.write_summary(&best, stop_reason)?;
        Ok(best)
    }

    /// Copy the best program's skill folders to `<run_dir>/skills/`.
    fn export_best(&mut self, best: &ProgramRef) -> Result<(), EvolveError> {
        let skills_dir = self.run_dir.join("skills");
        if skills_dir.exists() {
            fs::remove_dir_all(&skills_dir)?;
        }
        fs::create_dir_all(&skills_dir)?;
        for folder in self.store.skills(&best.branch)? {
            let dir = skills_dir.join(&folder.name);
            for (rel, content) in folder.to_files() {
                let path = dir.join(rel);
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent)?;
                }
                fs::write(path, content)?;
            }
        }
        Ok(())
    }

    fn write_summary(
        &mut self,
        best: &ProgramRef,
        stop_reason: &str,
    ) -> Result<(), EvolveError> {
        let run_id = self
            .run_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".to_owned());
        let summary = RunSummary {
            run_id,
            mode: self.config.mode.as_str().to_owned(),
            iterations_completed: self.iterations_completed,
            stop_reason: stop_reason.to_owned(),
            best_branch: best.branch.clone(),
            best_score: best.score.expect("best is scored"),
            draws_served: self.sampler.draws_served,
            frontier: self
                .frontier
                .entries()
                .iter()
                .map(|e| SummaryEntry {
                    branch: e.program.branch.clone(),
                    score: e.score,
                    generation: e.program.generation,
                })
                .collect(),
            skills: self
                .store
                .skills(&best.branch)?
                .iter()
                .map(|s| s.name.clone())
                .collect(),
        };
        let text = serde_json::to_string_pretty(&summary)
            .map_err(|e| EvolveError::Io(e.into()))?;
        fs::write(self.run_dir.join("summary.json"), text + "\n")?;
        Ok(())
    }
}
