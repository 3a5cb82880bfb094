//! The three agent roles and their backends.
//!
//! * **Executor** — answers one example under a program's system prompt,
//!   tool allowance, and skill library. Infallible by contract: backend
//!   failures come back as an error-marked trace that scores zero.
//! * **Proposer** — reads failures (with ground truths for diagnosis),
//!   the feedback-history digest, and the skill inventory, and proposes
//!   exactly one skill mutation.
//! * **Skill-Builder** — materializes a proposal into a concrete
//!   [`SkillFolder`]; the only role allowed to produce repository writes,
//!   and those are confined to the skills directory by construction.
//!
//! LLM-driven implementations speak a vendor-neutral chat-completion HTTP
//! contract through [`ChatBackend`]; a shell-out executor can drive a
//! local agent CLI instead. Deterministic mocks for every role make full
//! evolution runs byte-reproducible offline.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Categorizer, Example};
use crate::scoring::MultiToleranceScore;
use crate::store::{valid_skill_name, ProgramConfig, SkillFolder, StoreError};

/// Best-practices document seeding every Skill-Builder prompt.
pub const META_SKILL: &str = include_str!("meta_skill.md");

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("backend request failed after {attempts} attempt(s): {message}")]
    Backend { attempts: u32, message: String },
    #[error("credential environment variable {0} is not set")]
    MissingCredential(String),
    #[error("backend output stayed unparseable after a reformat retry: {sample}")]
    Unparseable { sample: String },
    #[error("invalid proposal: {0}")]
    InvalidProposal(String),
    #[error("output leaks the ground truth of example {example_id}")]
    GroundTruthLeakage { example_id: String },
    #[error(transparent)]
    Skill(#[from] StoreError),
}

/// One step of an execution transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub role: String,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

/// Outcome of executing one example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub example_id: String,
    /// Extracted from the final step; empty on error.
    pub predicted_answer: String,
    pub transcript: Vec<StepRecord>,
    pub duration_seconds: f64,
    pub token_usage: TokenUsage,
    /// Set when the backend failed after its retries; such traces score 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ExecutionTrace {
    /// Error-marked trace for an example whose execution failed outright.
    pub fn failed(example_id: impl Into<String>, error: impl Into<String>) -> Self {
        Self {
            example_id: example_id.into(),
            predicted_answer: String::new(),
            transcript: Vec::new(),
            duration_seconds: 0.0,
            token_usage: TokenUsage::default(),
            error: Some(error.into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalKind {
    NewSkill,
    EditSkill,
}

/// A proposed skill mutation: the Proposer's diagnosis plus a high-level
/// specification the Skill-Builder will materialize.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub kind: ProposalKind,
    pub target_skill_name: String,
    pub rationale: String,
    pub specification: String,
}

impl Proposal {
    /// Structural checks against the parent's skill inventory: edits must
    /// target an existing skill, the specification must carry content,
    /// and the target must be a usable folder name.
    pub fn validate(&self, skill_inventory: &[String]) -> Result<(), AgentError> {
        if self.specification.trim().is_empty() {
            return Err(AgentError::InvalidProposal(
                "specification is empty".to_owned(),
            ));
        }
        if !valid_skill_name(&self.target_skill_name) {
            return Err(AgentError::InvalidProposal(format!(
                "target {:?} is not a valid skill name",
                self.target_skill_name
            )));
        }
        if self.kind == ProposalKind::EditSkill
            && !skill_inventory.iter().any(|s| s == &self.target_skill_name)
        {
            return Err(AgentError::InvalidProposal(format!(
                "edit targets unknown skill {:?}",
                self.target_skill_name
            )));
        }
        Ok(())
    }
}

/// A training example the parent program got wrong.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub example: Example,
    pub trace: ExecutionTrace,
    pub score: MultiToleranceScore,
}

/// Scan `text` for verbatim ground-truth answers from the failure batch.
/// Returns the offending example id, if any. Applied to proposal
/// specifications and to every generated skill file so expected answers
/// never propagate into skills.
pub fn find_ground_truth_leak(text: &str, failures: &[Failure]) -> Option<String> {
    for failure in failures {
        let needle = failure.example.ground_truth.trim();
        if !needle.is_empty() && text.contains(needle) {
            return Some(failure.example.id.clone());
        }
    }
    None
}

/// A program as the executor sees it: config, reassembled skills, and an
/// optional materialized checkout for shell-based backends.
#[derive(Debug, Clone)]
pub struct ProgramSnapshot {
    pub config: ProgramConfig,
    pub skills: Vec<SkillFolder>,
    pub workdir: Option<PathBuf>,
}

impl ProgramSnapshot {
    pub fn skill_names(&self) -> Vec<String> {
        self.skills.iter().map(|s| s.name.clone()).collect()
    }
}

// ---------------------------------------------------------------------------
// Chat-completion backend plumbing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".to_owned(), content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: "assistant".to_owned(), content: content.into() }
    }
}

/// Vendor-neutral chat-completion request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system: String,
    pub messages: Vec<ChatMessage>,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    #[serde(default)]
    pub usage: TokenUsage,
}

/// A chat-completion endpoint. Implementations must tolerate concurrent
/// requests; the executor fans out across a worker pool.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, AgentError>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<T> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, AgentError> {
        (**self).complete(request)
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    system: &'a str,
    messages: &'a [ChatMessage],
    max_tokens: u32,
}

/// HTTP [`ChatBackend`]: POST `{model, system, messages[], max_tokens}`
/// to the base URL, expect `{content, usage}` back. Transport errors and
/// 429/5xx responses are retried with exponential backoff; the credential
/// is read from an environment variable at request time and never stored.
pub struct HttpChatBackend {
    base_url: String,
    model: String,
    credential_env: Option<String>,
    max_retries: u32,
    max_tokens: u32,
    client: reqwest::blocking::Client,
}

impl HttpChatBackend {
    pub fn new(
        base_url: impl Into<String>,
        model: impl Into<String>,
        credential_env: Option<String>,
    ) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            credential_env,
            max_retries: 3,
            max_tokens: 4096,
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(300))
                .build()
                .expect("client builds"),
        }
    }

    pub fn with_max_retries(mut self, max_retries: u32) -> Self {
        self.max_retries = max_retries.max(1);
        self
    }

    fn credential(&self) -> Result<Option<String>, AgentError> {
        match &self.credential_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| AgentError::MissingCredential(var.clone())),
        }
    }
}

impl ChatBackend for HttpChatBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, AgentError> {
        let credential = self.credential()?;
        let body = WireRequest {
            model: &self.model,
            system: &request.system,
            messages: &request.messages,
            max_tokens: request.max_tokens.min(self.max_tokens),
        };

        let mut last_error = String::new();
        for attempt in 0..self.max_retries {
            if attempt > 0 {
                // Deterministic backoff: 250ms, 500ms, 1s, ...
                std::thread::sleep(Duration::from_millis(250 << (attempt - 1)));
            }
            let mut builder = self.client.post(&self.base_url).json(&body);
            if let Some(key) = &credential {
                builder = builder.bearer_auth(key);
            }
            match builder.send() {
                Err(e) => last_error = format!("transport: {e}"),
                Ok(response) => {
                    let status = response.status();
                    if status.is_success() {
                        let parsed: ChatResponse = response.json().map_err(|e| {
                            AgentError::Backend {
                                attempts: attempt + 1,
                                message: format!("malformed response body: {e}"),
                            }
                        })?;
                        if parsed.content.is_empty() {
                            return Err(AgentError::Backend {
                                attempts: attempt + 1,
                                message: "backend returned empty content".to_owned(),
                            });
                        }
                        return Ok(parsed);
                    }
                    let retryable =
                        status.as_u16() == 429 || status.is_server_error();
                    let text = response.text().unwrap_or_default();
                    last_error = format!("status {status}: {}", text.trim());
                    if !retryable {
                        return Err(AgentError::Backend {
                            attempts: attempt + 1,
                            message: last_error,
                        });
                    }
                }
            }
        }
        Err(AgentError::Backend { attempts: self.max_retries, message: last_error })
    }
}

/// Extract a JSON object from a chat response: fenced ```json blocks
/// first, then the bare text, then the outermost brace span.
pub fn extract_json_object(text: &str) -> Option<serde_json::Value> {
    let fenced = text.split("```").nth(1).map(|block| {
        block.strip_prefix("json").unwrap_or(block).trim()
    });
    for candidate in [fenced, Some(text.trim())].into_iter().flatten() {
        if let Ok(value) = serde_json::from_str::<serde_json::Value>(candidate) {
            if value.is_object() {
                return Some(value);
            }
        }
    }
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    serde_json::from_str(&text[start..=end]).ok().filter(serde_json::Value::is_object)
}

// ---------------------------------------------------------------------------
// Executor
// ---------------------------------------------------------------------------

/// Answers one example under a program. Infallible: failures after the
/// backend's retry policy come back as error-marked traces.
///
/// Implementations must never reveal `example.ground_truth` to the agent;
/// it rides along only so mocks and scorers can reach it.
pub trait Executor: Send + Sync {
    fn execute(&self, program: &ProgramSnapshot, example: &Example) -> ExecutionTrace;
}

/// LLM-backed executor: system prompt + tool allowance + skill library in
/// the system text, question as the user message, final message as the
/// answer (optionally behind a configured delimiter).
pub struct ChatExecutor {
    backend: Box<dyn ChatBackend>,
    /// When set, the answer is the text after the last occurrence of this
    /// delimiter in the final message.
    pub answer_delimiter: Option<String>,
    pub max_tokens: u32,
}

impl ChatExecutor {
    pub fn new(backend: Box<dyn ChatBackend>) -> Self {
        Self { backend, answer_delimiter: None, max_tokens: 2048 }
    }

    fn system_text(program: &ProgramSnapshot) -> String {
        let mut text = program.config.system_prompt.clone();
        if !program.config.allowed_tools.is_empty() {
            text.push_str("\n\nAvailable tools: ");
            text.push_str(&program.config.allowed_tools.join(", "));
        }
        if !program.skills.is_empty() {
            text.push_str("\n\n# Skills\n");
            for skill in &program.skills {
                text.push_str(&format!(
                    "\n## {} — {}\n{}\n",
                    skill.name, skill.description, skill.instructions
                ));
            }
        }
        text
    }

    fn extract_answer(&self, content: &str) -> String {
        match &self.answer_delimiter {
            Some(delim) => content
                .rfind(delim.as_str())
                .map(|i| content[i + delim.len()..].trim().to_owned())
                .unwrap_or_else(|| content.trim().to_owned()),
            None => content.trim().to_owned(),
        }
    }
}

impl Executor for ChatExecutor {
    fn execute(&self, program: &ProgramSnapshot, example: &Example) -> ExecutionTrace {
        let started = Instant::now();
        let request = ChatRequest {
            system: Self::system_text(program),
            messages: vec![ChatMessage::user(&example.question)],
            max_tokens: self.max_tokens,
        };
        match self.backend.complete(&request) {
            Ok(response) => ExecutionTrace {
                example_id: example.id.clone(),
                predicted_answer: self.extract_answer(&response.content),
                transcript: vec![
                    StepRecord {
                        role: "user".to_owned(),
                        content: example.question.clone(),
                        tool_calls: Vec::new(),
                    },
                    StepRecord {
                        role: "assistant".to_owned(),
                        content: response.content,
                        tool_calls: Vec::new(),
                    },
                ],
                duration_seconds: started.elapsed().as_secs_f64(),
                token_usage: response.usage,
                error: None,
            },
            Err(e) => {
                let mut trace = ExecutionTrace::failed(&example.id, e.to_string());
                trace.duration_seconds = started.elapsed().as_secs_f64();
                trace
            }
        }
    }
}

/// Shell-out executor: runs a local agent CLI per example with
/// `{question}`, `{workdir}`, and `{skills_dir}` placeholders expanded.
/// Trimmed stdout is the predicted answer.
pub struct ShellExecutor {
    /// Command template run through `sh -c`.
    pub command: String,
    pub timeout: Duration,
    pub retries: u32,
}

impl ShellExecutor {
    pub fn new(command: impl Into<String>) -> Self {
        Self { command: command.into(), timeout: Duration::from_secs(120), retries: 0 }
    }

    fn run_once(
        &self,
        command: &str,
        started: Instant,
    ) -> Result<(String, String), String> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .stdin(Stdio::null())
            .spawn()
            .map_err(|e| format!("spawn failed: {e}"))?;
        loop {
            match child.try_wait() {
                Err(e) => return Err(format!("wait failed: {e}")),
                Ok(Some(status)) => {
                    let output =
                        child.wait_with_output().map_err(|e| e.to_string())?;
                    let stdout = String::from_utf8_lossy(&output.stdout).into_owned();
                    let stderr = String::from_utf8_lossy(&output.stderr).into_owned();
                    if status.success() {
                        return Ok((stdout, stderr));
                    }
                    return Err(format!(
                        "exit {}: {}",
                        status.code().unwrap_or(-1),
                        stderr.trim()
                    ));
                }
                Ok(None) => {
                    if started.elapsed() > self.timeout {
                        let _ = child.kill();
                        let _ = child.wait();
                        return Err("timed out".to_owned());
                    }
                    std::thread::sleep(Duration::from_millis(20));
                }
            }
        }
    }
}

impl Executor for ShellExecutor {
    fn execute(&self, program: &ProgramSnapshot, example: &Example) -> ExecutionTrace {
        let started = Instant::now();
        let workdir = program
            .workdir
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_default();
        let skills_dir = if workdir.is_empty() {
            String::new()
        } else {
            format!("{workdir}/{}", crate::store::SKILLS_DIR)
        };
        let command = self
            .command
            .replace("{question}", &shell_quote(&example.question))
            .replace("{workdir}", &workdir)
            .replace("{skills_dir}", &skills_dir);

        let mut last_error = String::new();
        for _ in 0..=self.retries {
            match self.run_once(&command, started) {
                Ok((stdout, _stderr)) => {
                    return ExecutionTrace {
                        example_id: example.id.clone(),
                        predicted_answer: stdout.trim().to_owned(),
                        transcript: vec![StepRecord {
                            role: "shell".to_owned(),
                            content: stdout,
                            tool_calls: vec![command],
                        }],
                        duration_seconds: started.elapsed().as_secs_f64(),
                        token_usage: TokenUsage::default(),
                        error: None,
                    };
                }
                Err(e) => last_error = e,
            }
        }
        let mut trace = ExecutionTrace::failed(&example.id, last_error);
        trace.duration_seconds = started.elapsed().as_secs_f64();
        trace
    }
}

/// Single-quote a string for safe interpolation into `sh -c`.
fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "'\\''"))
}

// ---------------------------------------------------------------------------
// Proposer
// ---------------------------------------------------------------------------

/// Diagnoses a failure batch and proposes exactly one skill mutation.
pub trait Proposer: Send + Sync {
    fn propose(
        &self,
        failures: &[Failure],
        history_digest: &str,
        skill_inventory: &[String],
    ) -> Result<Proposal, AgentError>;
}

#[derive(Deserialize)]
struct WireProposal {
    kind: String,
    target: String,
    #[serde(default)]
    rationale: String,
    specification: String,
}

fn parse_proposal(text: &str) -> Option<Proposal> {
    let value = extract_json_object(text)?;
    let wire: WireProposal = serde_json::from_value(value).ok()?;
    let kind = match wire.kind.as_str() {
        "new_skill" => ProposalKind::NewSkill,
        "edit_skill" => ProposalKind::EditSkill,
        _ => return None,
    };
    Some(Proposal {
        kind,
        target_skill_name: wire.target,
        rationale: wire.rationale,
        specification: wire.specification,
    })
}

/// LLM-backed proposer. The prompt carries the failure traces with ground
/// truths, the history digest, and the skill inventory; the reply must be
/// a fenced JSON object (one reformat retry before giving up).
pub struct ChatProposer {
    backend: Box<dyn ChatBackend>,
    pub max_tokens: u32,
    /// Transcript steps of each failure included in the prompt.
    pub trace_tail: usize,
}

impl ChatProposer {
    pub const SYSTEM_PROMPT: &'static str = "You improve an AI agent by \
        analyzing its failures and proposing skill mutations. Diagnose the \
        shared root cause of the failures, then propose exactly one change: \
        a new skill or an edit to an existing skill. Skills teach methods; \
        never quote an expected answer verbatim. Reply with a fenced JSON \
        object with keys: kind (\"new_skill\" or \"edit_skill\"), target \
        (skill folder name, kebab-case), rationale (root-cause diagnosis), \
        specification (what the skill must teach).";

    pub fn new(backend: Box<dyn ChatBackend>) -> Self {
        Self { backend, max_tokens: 2048, trace_tail: 2 }
    }

    fn render_context(
        &self,
        failures: &[Failure],
        history_digest: &str,
        skill_inventory: &[String],
    ) -> String {
        let mut out = String::from("# Failed examples\n");
        for failure in failures {
            out.push_str(&format!(
                "\n## {}\nQuestion: {}\nPredicted: {}\nExpected: {}\nWeighted score: {:.3}\n",
                failure.example.id,
                failure.example.question,
                failure.trace.predicted_answer,
                failure.example.ground_truth,
                failure.score.weighted,
            ));
            if let Some(error) = &failure.trace.error {
                out.push_str(&format!("Execution error: {error}\n"));
            }
            for step in failure.trace.transcript.iter().rev().take(self.trace_tail).rev()
            {
                out.push_str(&format!("[{}] {}\n", step.role, step.content));
            }
        }
        out.push_str("\n# Current skills\n");
        if skill_inventory.is_empty() {
            out.push_str("(none)\n");
        } else {
            for name in skill_inventory {
                out.push_str(&format!("- {name}\n"));
            }
        }
        out.push_str("\n# Prior proposals and outcomes\n");
        if history_digest.is_empty() {
            out.push_str("(none)\n");
        } else {
            out.push_str(history_digest);
            out.push('\n');
        }
        out.push_str("\nReply with the JSON object now.");
        out
    }
}

impl Proposer for ChatProposer {
    fn propose(
        &self,
        failures: &[Failure],
        history_digest: &str,
        skill_inventory: &[String],
    ) -> Result<Proposal, AgentError> {
        let mut messages = vec![ChatMessage::user(self.render_context(
            failures,
            history_digest,
            skill_inventory,
        ))];
        let mut last_reply = String::new();
        for attempt in 0..2 {
            let request = ChatRequest {
                system: Self::SYSTEM_PROMPT.to_owned(),
                messages: messages.clone(),
                max_tokens: self.max_tokens,
            };
            let response = self.backend.complete(&request)?;
            if let Some(proposal) = parse_proposal(&response.content) {
                proposal.validate(skill_inventory)?;
                return Ok(proposal);
            }
            last_reply = response.content.clone();
            if attempt == 0 {
                messages.push(ChatMessage::assistant(response.content));
                messages.push(ChatMessage::user(
                    "That reply could not be parsed. Reply with ONLY a fenced \
                     JSON object with keys kind, target, rationale, specification.",
                ));
            }
        }
        Err(AgentError::Unparseable {
            sample: last_reply.chars().take(200).collect(),
        })
    }
}

// ---------------------------------------------------------------------------
// Skill-Builder
// ---------------------------------------------------------------------------

/// Materializes a proposal into a concrete skill folder. `existing` is
/// the parent's current folder when the proposal is an edit.
pub trait SkillBuilder: Send + Sync {
    fn build(
        &self,
        proposal: &Proposal,
        existing: Option<&SkillFolder>,
    ) -> Result<SkillFolder, AgentError>;
}

#[derive(Deserialize)]
struct WireSkill {
    description: String,
    instructions: String,
    #[serde(default)]
    scripts: BTreeMap<String, String>,
    #[serde(default)]
    references: BTreeMap<String, String>,
}

/// LLM-backed builder, seeded with the bundled meta-skill document. The
/// reply is a fenced JSON object with keys description / instructions /
/// scripts / references; anything that would escape the skills directory
/// is rejected by folder validation.
pub struct ChatSkillBuilder {
    backend: Box<dyn ChatBackend>,
    pub max_tokens: u32,
}

impl ChatSkillBuilder {
    pub fn new(backend: Box<dyn ChatBackend>) -> Self {
        Self { backend, max_tokens: 4096 }
    }

    fn render_context(proposal: &Proposal, existing: Option<&SkillFolder>) -> String {
        let mut out = format!(
            "# Task\nMaterialize this proposal into the skill folder \
             {:?}.\n\nKind: {:?}\nRationale: {}\nSpecification: {}\n",
            proposal.target_skill_name,
            proposal.kind,
            proposal.rationale,
            proposal.specification,
        );
        if let Some(folder) = existing {
            out.push_str(&format!(
                "\n# Current folder (you are editing it)\nDescription: {}\n\
                 Instructions:\n{}\n",
                folder.description, folder.instructions
            ));
        }
        out.push_str(
            "\nReply with a fenced JSON object with keys: description \
             (trigger text), instructions (markdown), scripts (object of \
             file name to content, optional), references (object, optional). \
             File names are relative; paths outside the folder are rejected.",
        );
        out
    }
}

impl SkillBuilder for ChatSkillBuilder {
    fn build(
        &self,
        proposal: &Proposal,
        existing: Option<&SkillFolder>,
    ) -> Result<SkillFolder, AgentError> {
        let mut messages =
            vec![ChatMessage::user(Self::render_context(proposal, existing))];
        let mut last_reply = String::new();
        for attempt in 0..2 {
            let request = ChatRequest {
                system: format!(
                    "{META_SKILL}\nYou write skill folders following the \
                     practices above."
                ),
                messages: messages.clone(),
                max_tokens: self.max_tokens,
            };
            let response = self.backend.complete(&request)?;
            let parsed = extract_json_object(&response.content)
                .and_then(|v| serde_json::from_value::<WireSkill>(v).ok());
            if let Some(wire) = parsed {
                let folder = SkillFolder {
                    name: proposal.target_skill_name.clone(),
                    description: wire.description,
                    instructions: wire.instructions,
                    scripts: wire.scripts,
                    references: wire.references,
                };
                folder.validate()?;
                return Ok(folder);
            }
            last_reply = response.content.clone();
            if attempt == 0 {
                messages.push(ChatMessage::assistant(response.content));
                messages.push(ChatMessage::user(
                    "That reply could not be parsed. Reply with ONLY a fenced \
                     JSON object with keys description, instructions, scripts, \
                     references.",
                ));
            }
        }
        Err(AgentError::Unparseable {
            sample: last_reply.chars().take(200).collect(),
        })
    }
}

// ---------------------------------------------------------------------------
// Categorizer backed by a chat model
// ---------------------------------------------------------------------------

/// [`Categorizer`] asking a chat backend for one short label per example.
pub struct ChatCategorizer {
    backend: Box<dyn ChatBackend>,
}

impl ChatCategorizer {
    pub fn new(backend: Box<dyn ChatBackend>) -> Self {
        Self { backend }
    }
}

impl Categorizer for ChatCategorizer {
    fn label(&self, example: &Example) -> anyhow::Result<String> {
        let request = ChatRequest {
            system: "Classify the question into one short category label \
                     (one or two words, kebab-case). Reply with the label only."
                .to_owned(),
            messages: vec![ChatMessage::user(&example.question)],
            max_tokens: 16,
        };
        let response = self.backend.complete(&request)?;
        let label: String = response
            .content
            .lines()
            .next()
            .unwrap_or_default()
            .trim()
            .to_lowercase()
            .chars()
            .map(|c| if c.is_whitespace() { '-' } else { c })
            .filter(|c| c.is_ascii_alphanumeric() || *c == '-')
            .collect();
        anyhow::ensure!(!label.is_empty(), "classifier returned an empty label");
        Ok(label)
    }
}

// ---------------------------------------------------------------------------
// Deterministic mocks
// ---------------------------------------------------------------------------

/// Mock executor that answers correctly iff the program carries a named
/// skill — the canonical end-to-end scenario: one skill fixes everything.
pub struct SkillGatedExecutor {
    pub gate_skill: String,
}

impl SkillGatedExecutor {
    pub fn new(gate_skill: impl Into<String>) -> Self {
        Self { gate_skill: gate_skill.into() }
    }
}

impl Executor for SkillGatedExecutor {
    fn execute(&self, program: &ProgramSnapshot, example: &Example) -> ExecutionTrace {
        let has_skill = program.skills.iter().any(|s| s.name == self.gate_skill);
        let predicted = if has_skill {
            example.ground_truth.clone()
        } else {
            "no idea".to_owned()
        };
        ExecutionTrace {
            example_id: example.id.clone(),
            predicted_answer: predicted.clone(),
            transcript: vec![StepRecord {
                role: "assistant".to_owned(),
                content: predicted,
                tool_calls: Vec::new(),
            }],
            duration_seconds: 0.0,
            token_usage: TokenUsage::default(),
            error: None,
        }
    }
}

/// Mock executor replaying a fixed id → answer table (missing ids answer
/// an empty string).
pub struct ScriptedExecutor {
    pub answers: BTreeMap<String, String>,
}

impl Executor for ScriptedExecutor {
    fn execute(&self, _program: &ProgramSnapshot, example: &Example) -> ExecutionTrace {
        let predicted = self.answers.get(&example.id).cloned().unwrap_or_default();
        ExecutionTrace {
            example_id: example.id.clone(),
            predicted_answer: predicted.clone(),
            transcript: vec![StepRecord {
                role: "assistant".to_owned(),
                content: predicted,
                tool_calls: Vec::new(),
            }],
            duration_seconds: 0.0,
            token_usage: TokenUsage::default(),
            error: None,
        }
    }
}

/// Mock executor whose backend is always down; every trace is
/// error-marked.
pub struct ErrorExecutor;

impl Executor for ErrorExecutor {
    fn execute(&self, _program: &ProgramSnapshot, example: &Example) -> ExecutionTrace {
        ExecutionTrace::failed(&example.id, "backend unreachable after retries")
    }
}

/// Mock proposer replaying a fixed sequence; the final proposal repeats
/// once the script runs out.
pub struct ScriptedProposer {
    script: Vec<Proposal>,
    cursor: Mutex<usize>,
}

impl ScriptedProposer {
    pub fn new(script: Vec<Proposal>) -> Self {
        assert!(!script.is_empty(), "scripted proposer needs at least one proposal");
        Self { script, cursor: Mutex::new(0) }
    }
}

impl Proposer for ScriptedProposer {
    fn propose(
        &self,
        _failures: &[Failure],
        _history_digest: &str,
        skill_inventory: &[String],
    ) -> Result<Proposal, AgentError> {
        let mut cursor = self.cursor.lock().expect("cursor lock");
        let proposal = self.script[(*cursor).min(self.script.len() - 1)].clone();
        *cursor += 1;
        proposal.validate(skill_inventory)?;
        Ok(proposal)
    }
}

/// Mock proposer that edits a skill when the inventory already has it and
/// creates it otherwise.
pub struct EditIfExistsProposer {
    pub skill: String,
    pub specification: String,
}

impl Proposer for EditIfExistsProposer {
    fn propose(
        &self,
        _failures: &[Failure],
        _history_digest: &str,
        skill_inventory: &[String],
    ) -> Result<Proposal, AgentError> {
        let exists = skill_inventory.iter().any(|s| s == &self.skill);
        let proposal = Proposal {
            kind: if exists { ProposalKind::EditSkill } else { ProposalKind::NewSkill },
            target_skill_name: self.skill.clone(),
            rationale: "repeated failures share one root cause".to_owned(),
            specification: self.specification.clone(),
        };
        proposal.validate(skill_inventory)?;
        Ok(proposal)
    }
}

/// Deterministic builder that expands a proposal into a templated folder;
/// edits append a revision section to the existing instructions.
pub struct TemplateSkillBuilder;

impl SkillBuilder for TemplateSkillBuilder {
    fn build(
        &self,
        proposal: &Proposal,
        existing: Option<&SkillFolder>,
    ) -> Result<SkillFolder, AgentError> {
        let description = format!(
            "Use when the task matches: {}",
            proposal.specification.lines().next().unwrap_or("").trim()
        );
        let folder = match (proposal.kind, existing) {
            (ProposalKind::EditSkill, Some(current)) => {
                let mut folder = current.clone();
                folder.instructions = format!(
                    "{}\n## Revision\n{}\n",
                    current.instructions, proposal.specification
                );
                folder
            }
            _ => SkillFolder {
                name: proposal.target_skill_name.clone(),
                description,
                instructions: format!(
                    "## Why\n{}\n\n## Procedure\n{}\n",
                    proposal.rationale, proposal.specification
                ),
                scripts: BTreeMap::new(),
                references: BTreeMap::new(),
            },
        };
        folder.validate()?;
        Ok(folder)
    }
}

/// Scripted [`ChatBackend`] replaying canned replies, for prompt-format
/// tests without a network.
pub struct ScriptedChatBackend {
    replies: Vec<String>,
    cursor: Mutex<usize>,
    pub requests: Mutex<Vec<ChatRequest>>,
}

impl ScriptedChatBackend {
    pub fn new(replies: Vec<String>) -> Self {
        Self { replies, cursor: Mutex::new(0), requests: Mutex::new(Vec::new()) }
    }
}

impl ChatBackend for ScriptedChatBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, AgentError> {
        self.requests.lock().expect("request log").push(request.clone());
        let mut cursor = self.cursor.lock().expect("cursor lock");
        let reply = self
            .replies
            .get(*cursor)
            .or_else(|| self.replies.last())
            .cloned()
            .ok_or_else(|| AgentError::Backend {
                attempts: 1,
                message: "scripted backend has no replies".to_owned(),
            })?;
        *cursor += 1;
        Ok(ChatResponse { content: reply, usage: TokenUsage::default() })
    }
}
