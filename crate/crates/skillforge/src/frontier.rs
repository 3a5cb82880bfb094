//! Capacity-bounded frontier of the best programs found so far.
//!
//! Admission is strict: a candidate enters only while there is room or
//! when it outscores the current weakest member, in which case the weakest
//! is evicted. Entries keep stable admission order — evictions splice
//! without reordering survivors — which makes round-robin parent selection
//! (`entries[t mod len]`) well defined across iterations.
//!
//! Parent selection defaults to round-robin so every member is explored
//! before any is revisited; a best-first policy is available behind
//! [`ParentSelection`] for greedier searches.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::ProgramRef;

#[derive(Debug, Error, PartialEq)]
pub enum FrontierError {
    #[error("frontier is empty")]
    Empty,
    #[error("branch {0:?} is already a frontier member")]
    DuplicateBranch(String),
    #[error("score {0} is not a finite value in [0, 1]")]
    InvalidScore(f64),
}

/// Which frontier member seeds the next mutation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParentSelection {
    /// Visit members in stable entry order, one per iteration.
    #[default]
    RoundRobin,
    /// Always mutate the current best member.
    BestFirst,
}

/// One admitted program and the validation score it was admitted with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierEntry {
    pub program: ProgramRef,
    pub score: f64,
}

/// Outcome of an admission attempt.
#[derive(Debug, Clone, PartialEq)]
pub enum Admission {
    Admitted { evicted: Option<ProgramRef> },
    Rejected,
}

/// Ordered top-k set of programs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    capacity: usize,
    entries: Vec<FrontierEntry>,
}

impl Frontier {
    /// # Panics
    ///
    /// Panics if `capacity` is zero; the frontier must hold at least the
    /// base program.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "frontier capacity must be at least 1");
        Self { capacity, entries: Vec::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Members in stable admission order.
    pub fn entries(&self) -> &[FrontierEntry] {
        &self.entries
    }

    pub fn contains(&self, branch: &str) -> bool {
        self.entries.iter().any(|e| e.program.branch == branch)
    }

    /// Score of the weakest member, if any.
    pub fn min_score(&self) -> Option<f64> {
        self.entries.iter().map(|e| e.score).fold(None, |acc, s| {
            Some(acc.map_or(s, |a: f64| a.min(s)))
        })
    }

    /// Admit `candidate` if the frontier has room or the score strictly
    /// beats the weakest member; the weakest member (earliest-admitted on
    /// ties) is evicted on overflow. Rejection leaves the frontier
    /// untouched.
    pub fn try_admit(
        &mut self,
        candidate: ProgramRef,
        score: f64,
    ) -> Result<Admission, FrontierError> {
        if !score.is_finite() || !(0.0..=1.0).contains(&score) {
            return Err(FrontierError::InvalidScore(score));
        }
        if self.contains(&candidate.branch) {
            return Err(FrontierError::DuplicateBranch(candidate.branch));
        }

        let mut program = candidate;
        program.score = Some(score);
        if self.entries.len() < self.capacity {
            self.entries.push(FrontierEntry { program, score });
            return Ok(Admission::Admitted { evicted: None });
        }

        let min = self.min_score().expect("capacity >= 1 and frontier full");
        if score > min {
            let idx = self
                .entries
                .iter()
                .position(|e| e.score == min)
                .expect("minimum exists");
            let evicted = self.entries.remove(idx);
            self.entries.push(FrontierEntry { program, score });
            Ok(Admission::Admitted { evicted: Some(evicted.program) })
        } else {
            Ok(Admission::Rejected)
        }
    }

    /// The member at `t mod len` in stable entry order.
    pub fn select_parent(&self, t: u64) -> Result<&ProgramRef, FrontierError> {
        if self.entries.is_empty() {
            return Err(FrontierError::Empty);
        }
        let idx = (t % self.entries.len() as u64) as usize;
        Ok(&self.entries[idx].program)
    }

    /// Highest-scoring member; ties prefer the lower generation, then the
    /// lexicographically smaller branch name.
    pub fn best(&self) -> Result<&ProgramRef, FrontierError> {
        self.entries
            .iter()
            .max_by(|a, b| {
                a.score
                    .partial_cmp(&b.score)
                    .expect("scores are finite")
                    // On equal scores the *smaller* generation and branch
                    // must win the max, so reverse those comparisons.
                    .then(b.program.generation.cmp(&a.program.generation))
                    .then(b.program.branch.cmp(&a.program.branch))
            })
            .map(|e| &e.program)
            .ok_or(FrontierError::Empty)
    }

    /// Parent choice under the configured policy.
    pub fn select(
        &self,
        policy: ParentSelection,
        t: u64,
    ) -> Result<&ProgramRef, FrontierError> {
        match policy {
            ParentSelection::RoundRobin => self.select_parent(t),
            ParentSelection::BestFirst => self.best(),
        }
    }
}
