//! Skillforge evolves reusable agent skills by running an iterative
//! failure-analysis loop: execute tasks under the current agent program,
//! diagnose failures, propose and materialize skill mutations, and retain
//! only candidates that improve held-out validation score on a
//! capacity-bounded frontier of programs.
//!
//! The crate is organized around the loop's moving parts:
//!
//! - [`scoring`] — deterministic fuzzy answer scorer with relative
//!   tolerance bands and a weighted multi-tolerance variant.
//! - [`dataset`] — categorization, stratified three-way splitting, and
//!   without-replacement category-aware batch sampling.
//! - [`store`] — version-controlled program persistence (one branch per
//!   program, git-backed or in-memory).
//! - [`frontier`] — the capacity-bounded set of top programs with
//!   admission, eviction, and parent selection.
//! - [`agents`] — Executor / Proposer / Skill-Builder contracts, an HTTP
//!   chat backend, a shell-out executor, and deterministic mocks.
//! - [`history`] — the append-only feedback log the Proposer reads.
//! - [`evolve`] — the loop driver: batches, failure collection, candidate
//!   construction, evaluation, frontier updates, checkpointing.
//! - [`merge`] — combining unique skills across independent runs.
//! - [`cli`] — operator subcommands binding everything together.

pub mod agents;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod evolve;
pub mod frontier;
pub mod history;
pub mod merge;
pub mod report;
pub mod scoring;
pub mod store;
