//! Append-only feedback log.
//!
//! Every completed loop iteration — admitted, rejected, or skipped —
//! appends exactly one [`FeedbackRecord`]. The log is persisted as JSON
//! lines, flushed per append so a crash never loses a completed
//! iteration, and rendered into a budgeted digest that lets the Proposer
//! see which strategies helped and which regressed.

use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Proposal, ProposalKind};

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error("iteration {attempted} appended after iteration {last}: records must be strictly ordered")]
    OutOfOrder { last: u64, attempted: u64 },
    #[error("malformed history line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("history io: {0}")]
    Io(#[from] std::io::Error),
}

/// The loop's decision about one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Candidate entered the frontier (possibly evicting the weakest member).
    Admitted,
    /// Candidate was evaluated but did not beat the frontier minimum.
    Rejected,
    /// Iteration produced no evaluable candidate (no failures, unparseable
    /// proposal, or builder error); nothing was scored.
    Skipped,
}

impl Verdict {
    fn label(self) -> &'static str {
        match self {
            Verdict::Admitted => "admitted",
            Verdict::Rejected => "rejected",
            Verdict::Skipped => "skipped",
        }
    }
}

/// One iteration's outcome. `proposal` and the scores are absent on
/// iterations that never reached the corresponding stage; `delta` is
/// `validation_score − parent_score` whenever both were measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub iteration: u64,
    pub parent_branch: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal: Option<Proposal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_score: Option<f64>,
    pub parent_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub verdict: Verdict,
}

impl FeedbackRecord {
    /// Build a record, deriving `delta` from the scores.
    pub fn new(
        iteration: u64,
        parent_branch: impl Into<String>,
        proposal: Option<Proposal>,
        validation_score: Option<f64>,
        parent_score: f64,
        verdict: Verdict,
    ) -> Self {
        Self {
            iteration,
            parent_branch: parent_branch.into(),
            proposal,
            validation_score,
            parent_score,
            delta: validation_score.map(|v| v - parent_score),
            verdict,
        }
    }

    /// One digest line: iteration, proposal kind/target, verdict, delta.
    fn digest_line(&self) -> String {
        let mut line = format!("#{}", self.iteration);
        match &self.proposal {
            Some(proposal) => {
                let kind = match proposal.kind {
                    ProposalKind::NewSkill => "new skill",
                    ProposalKind::EditSkill => "edit skill",
                };
                let _ = write!(line, " {kind} {:?}", proposal.target_skill_name);
            }
            None => line.push_str(" no proposal"),
        }
        let _ = write!(line, " -> {}", self.verdict.label());
        if let Some(delta) = self.delta {
            let _ = write!(line, " (delta {delta:+.4})");
        }
        line
    }
}

/// Append-only, iteration-ordered feedback log with JSONL persistence.
///
/// Single writer by contract (the loop driver); readers may tail the
/// persisted file concurrently since records are whole flushed lines.
pub struct FeedbackHistory {
    records: Vec<FeedbackRecord>,
    writer: Option<BufWriter<File>>,
    path: Option<PathBuf>,
}

impl std::fmt::Debug for FeedbackHistory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FeedbackHistory")
            .field("records", &self.records.len())
            .field("path", &self.path)
            .finish()
    }
}

impl FeedbackHistory {
    /// Volatile history for tests and dry runs.
    pub fn in_memory() -> Self {
        Self { records: Vec::new(), writer: None, path: None }
    }

    /// Create or resume the JSONL log at `path`. Existing records are
    /// loaded so ordering enforcement continues across restarts.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, HistoryError> {
        let path = path.as_ref();
        let records = if path.exists() { read_records(path)? } else { Vec::new() };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            records,
            writer: Some(BufWriter::new(file)),
            path: Some(path.to_owned()),
        })
    }

    /// Read a persisted log without taking the writer role.
    pub fn load(path: impl AsRef<Path>) -> Result<Vec<FeedbackRecord>, HistoryError> {
        read_records(path.as_ref())
    }

    pub fn records(&self) -> &[FeedbackRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last_iteration(&self) -> Option<u64> {
        self.records.last().map(|r| r.iteration)
    }

    /// Append one record. The iteration must exceed the last appended
    /// iteration; the record is flushed to disk before this returns.
    pub fn append(&mut self, record: FeedbackRecord) -> Result<(), HistoryError> {
        if let Some(last) = self.last_iteration() {
            if record.iteration <= last {
                return Err(HistoryError::OutOfOrder {
                    last,
                    attempted: record.iteration,
                });
            }
        }
        if let Some(writer) = &mut self.writer {
            serde_json::to_writer(&mut *writer, &record)
                .map_err(|e| HistoryError::Io(e.into()))?;
            writer.write_all(b"\n")?;
            writer.flush()?;
        }
        self.records.push(record);
        Ok(())
    }

    /// Chronological digest of at most `budget` characters. Truncation
    /// drops oldest records first; the newest record is always present
    /// (clipped to the budget if even it alone is too long).
    pub fn render_for_proposer(&self, budget: usize) -> String {
        if self.records.is_empty() || budget == 0 {
            return String::new();
        }
        let lines: Vec<String> =
            self.records.iter().map(FeedbackRecord::digest_line).collect();

        // Walk newest → oldest, keeping whole lines while they fit.
        let mut kept = Vec::new();
        let mut used = 0usize;
        for line in lines.iter().rev() {
            let cost = line.chars().count() + usize::from(!kept.is_empty());
            if used + cost > budget && !kept.is_empty() {
                break;
            }
            used += cost;
            kept.push(line.as_str());
        }
        kept.reverse();
        let digest = kept.join("\n");
        if digest.chars().count() > budget {
            digest.chars().take(budget).collect()
        } else {
            digest
        }
    }
}

fn read_records(path: &Path) -> Result<Vec<FeedbackRecord>, HistoryError> {
    let file = File::open(path)?;
    let mut records: Vec<FeedbackRecord> = Vec::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: FeedbackRecord = serde_json::from_str(&line)
            .map_err(|source| HistoryError::Parse { line: index + 1, source })?;
        if let Some(last) = records.last() {
            if record.iteration <= last.iteration {
                return Err(HistoryError::OutOfOrder {
                    last: last.iteration,
                    attempted: record.iteration,
                });
            }
        }
        records.push(record);
    }
    Ok(records)
}
