//! Run reporting: reassemble a finished (or crashed) run directory into
//! a human-readable digest and a machine-readable JSON document.
//!
//! The builder is deliberately forgiving — a missing or corrupt artifact
//! becomes a warning and the rest of the report still renders, since the
//! most common reason to reach for `report` is a run that did not end
//! cleanly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::ProposalKind;
use crate::evolve::RunSummary;
use crate::history::{FeedbackHistory, Verdict};

/// One feedback-history row, flattened for tabular rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub iteration: u64,
    pub parent: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_score: Option<f64>,
    pub parent_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

/// A program and its admitted descendants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageNode {
    pub branch: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<LineageNode>,
}

/// Which iterations created or revised a skill.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillProvenance {
    pub name: String,
    /// E.g. "new skill at iteration 3 (admitted)".
    pub events: Vec<String>,
    /// Present in the best program's final library.
    pub in_best: bool,
}

/// Everything `report` knows about one run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_dir: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<RunSummary>,
    pub iterations: Vec<IterationRow>,
    /// Lineage roots (normally just the base program).
    pub lineage: Vec<LineageNode>,
    pub skills: Vec<SkillProvenance>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// The subset of an event line the report consumes.
#[derive(Deserialize)]
struct EventLine {
    event: String,
    #[serde(default)]
    branch: Option<String>,
    #[serde(default)]
    validation_score: Option<f64>,
    #[serde(default)]
    parent: Option<String>,
    #[serde(default)]
    candidate: Option<String>,
    #[serde(default)]
    verdict: Option<Verdict>,
}

/// Build a report from a run directory. Corrupt or missing artifacts
/// degrade to warnings, never to a hard failure.
pub fn build_report(run_dir: impl AsRef<Path>) -> RunReport {
    let run_dir = run_dir.as_ref();
    let mut warnings = Vec::new();

    let summary: Option<RunSummary> = {
        let path = run_dir.join("summary.json");
        if path.exists() {
            match std::fs::read_to_string(&path)
                .map_err(|e| e.to_string())
                .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
            {
                Ok(summary) => Some(summary),
                Err(e) => {
                    warnings.push(format!("summary.json is unreadable: {e}"));
                    None
                }
            }
        } else {
            warnings.push("summary.json is missing (run still in progress?)".to_owned());
            None
        }
    };

    let records = {
        let path = run_dir.join("history.jsonl");
        if path.exists() {
            match FeedbackHistory::load(&path) {
                Ok(records) => records,
                Err(e) => {
                    warnings.push(format!("history.jsonl is unreadable: {e}"));
                    Vec::new()
                }
            }
        } else {
            warnings.push("history.jsonl is missing".to_owned());
            Vec::new()
        }
    };

    let iterations: Vec<IterationRow> = records
        .iter()
        .map(|r| IterationRow {
            iteration: r.iteration,
            parent: r.parent_branch.clone(),
            kind: r.proposal.as_ref().map(|p| {
                match p.kind {
                    ProposalKind::NewSkill => "new_skill",
                    ProposalKind::EditSkill => "edit_skill",
                }
                .to_owned()
            }),
            target: r.proposal.as_ref().map(|p| p.target_skill_name.clone()),
            verdict: r.verdict,
            validation_score: r.validation_score,
            parent_score: r.parent_score,
            delta: r.delta,
        })
        .collect();

    // Lineage comes from the event log: the baseline event names the
    // root; admitted candidates attach under their parents.
    let mut lineage_events = Vec::new();
    {
        let path = run_dir.join("events.jsonl");
        if path.exists() {
            match std::fs::read_to_string(&path) {
                Err(e) => warnings.push(format!("events.jsonl is unreadable: {e}")),
                Ok(text) => {
                    for (index, line) in text.lines().enumerate() {
                        if line.trim().is_empty() {
                            continue;
                        }
                        match serde_json::from_str::<EventLine>(line) {
                            Ok(event) => lineage_events.push(event),
                            Err(e) => warnings.push(format!(
                                "events.jsonl line {} is malformed: {e}",
                                index + 1
                            )),
                        }
                    }
                }
            }
        } else {
            warnings.push("events.jsonl is missing".to_owned());
        }
    }
    let lineage = build_lineage(&lineage_events);

    // Skill provenance: which iterations touched which skill, and
    // whether that skill survived into the best program.
    let best_skills: Vec<String> =
        summary.as_ref().map(|s| s.skills.clone()).unwrap_or_default();
    let mut provenance: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for row in &iterations {
        if let (Some(kind), Some(target)) = (&row.kind, &row.target) {
            let label = match kind.as_str() {
                "new_skill" => "new skill",
                _ => "edit skill",
            };
            provenance.entry(target.clone()).or_default().push(format!(
                "{label} at iteration {} ({})",
                row.iteration,
                match row.verdict {
                    Verdict::Admitted => "admitted",
                    Verdict::Rejected => "rejected",
                    Verdict::Skipped => "skipped",
                }
            ));
        }
    }
    for name in &best_skills {
        provenance.entry(name.clone()).or_default();
    }
    let skills = provenance
        .into_iter()
        .map(|(name, events)| SkillProvenance {
            in_best: best_skills.contains(&name),
            name,
            events,
        })
        .collect();

    RunReport {
        run_dir: run_dir.display().to_string(),
        summary,
        iterations,
        lineage,
        skills,
        warnings,
    }
}

fn build_lineage(events: &[EventLine]) -> Vec<LineageNode> {
    // Collect nodes and admitted parent→child edges in event order.
    let mut scores: BTreeMap<String, Option<f64>> = BTreeMap::new();
    let mut children: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut is_child: BTreeMap<String, bool> = BTreeMap::new();

    let note = |branch: &str, order: &mut Vec<String>| {
        if !order.iter().any(|b| b == branch) {
            order.push(branch.to_owned());
        }
    };

    for event in events {
        match event.event.as_str() {
            "baseline" => {
                if let Some(branch) = &event.branch {
                    note(branch, &mut order);
                    scores.insert(branch.clone(), event.validation_score);
                    is_child.entry(branch.clone()).or_insert(false);
                }
            }
            "iteration" => {
                if event.verdict != Some(Verdict::Admitted) {
                    continue;
                }
                let (Some(parent), Some(candidate)) =
                    (&event.parent, &event.candidate)
                else {
                    continue;
                };
                note(parent, &mut order);
                note(candidate, &mut order);
                is_child.entry(parent.clone()).or_insert(false);
                is_child.insert(candidate.clone(), true);
                scores.insert(candidate.clone(), event.validation_score);
                children.entry(parent.clone()).or_default().push(candidate.clone());
            }
            _ => {}
        }
    }

    fn assemble(
        branch: &str,
        scores: &BTreeMap<String, Option<f64>>,
        children: &BTreeMap<String, Vec<String>>,
    ) -> LineageNode {
        LineageNode {
            branch: branch.to_owned(),
            score: scores.get(branch).copied().flatten(),
            children: children
                .get(branch)
                .map(|kids| {
                    kids.iter().map(|k| assemble(k, scores, children)).collect()
                })
                .unwrap_or_default(),
        }
    }

    order
        .iter()
        .filter(|b| !is_child.get(*b).copied().unwrap_or(false))
        .map(|b| assemble(b, &scores, &children))
        .collect()
}

impl RunReport {
    /// Depth of the deepest lineage chain (1 = base only).
    pub fn lineage_depth(&self) -> usize {
        fn depth(node: &LineageNode) -> usize {
            1 + node.children.iter().map(depth).max().unwrap_or(0)
        }
        self.lineage.iter().map(depth).max().unwrap_or(0)
    }

    /// Human-readable rendering: summary block, frontier, iteration
    /// table, lineage tree, skill inventory, warnings.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "run: {}", self.run_dir);

        if let Some(summary) = &self.summary {
            let _ = writeln!(
                out,
                "mode {}, {} iteration(s), stopped: {}",
                summary.mode, summary.iterations_completed, summary.stop_reason
            );
            let _ = writeln!(
                out,
                "best: {} (validation {:.4}), {} draw(s) consumed",
                summary.best_branch, summary.best_score, summary.draws_served
            );
            let _ = writeln!(out, "\nfrontier:");
            for entry in &summary.frontier {
                let _ = writeln!(
                    out,
                    "  {:<40} gen {:>2}  score {:.4}",
                    entry.branch, entry.generation, entry.score
                );
            }
        }

        if !self.iterations.is_empty() {
            let _ = writeln!(
                out,
                "\n{:>4}  {:<28} {:<10} {:<20} {:<8} {:>8}  {:>8}",
                "iter", "parent", "kind", "target", "verdict", "score", "delta"
            );
            for row in &self.iterations {
                let _ = writeln!(
                    out,
                    "{:>4}  {:<28} {:<10} {:<20} {:<8} {:>8}  {:>8}",
                    row.iteration,
                    row.parent,
                    row.kind.as_deref().unwrap_or("-"),
                    row.target.as_deref().unwrap_or("-"),
                    match row.verdict {
                        Verdict::Admitted => "admit",
                        Verdict::Rejected => "reject",
                        Verdict::Skipped => "skip",
                    },
                    row.validation_score
                        .map(|s| format!("{s:.4}"))
                        .unwrap_or_else(|| "-".to_owned()),
                    row.delta
                        .map(|d| format!("{d:+.4}"))
                        .unwrap_or_else(|| "-".to_owned()),
                );
            }
        }

        if !self.lineage.is_empty() {
            let _ = writeln!(out, "\nlineage:");
            fn render_node(out: &mut String, node: &LineageNode, depth: usize) {
                let indent = "  ".repeat(depth);
                let score = node
                    .score
                    .map(|s| format!(" ({s:.4})"))
                    .unwrap_or_default();
                let _ = writeln!(out, "{indent}{}{score}", node.branch);
                for child in &node.children {
                    render_node(out, child, depth + 1);
                }
            }
            for root in &self.lineage {
                render_node(&mut out, root, 1);
            }
        }

        if !self.skills.is_empty() {
            let _ = writeln!(out, "\nskills:");
            for skill in &self.skills {
                let marker = if skill.in_best { "*" } else { " " };
                let _ = writeln!(out, " {marker} {}", skill.name);
                for event in &skill.events {
                    let _ = writeln!(out, "      {event}");
                }
            }
            let _ = writeln!(out, "  (* = present in the best program)");
        }

        if !self.warnings.is_empty() {
            let _ = writeln!(out, "\nwarnings:");
            for warning in &self.warnings {
                let _ = writeln!(out, "  ! {warning}");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn write(dir: &Path, name: &str, content: &str) {
        std::fs::write(dir.join(name), content).unwrap();
    }

    fn baseline_line() -> &'static str {
        r#"{"event":"baseline","branch":"program/base","validation_score":0.25}"#
    }

    #[test]
    fn fresh_run_dir_with_base_only_yields_one_node_lineage() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "events.jsonl", &format!("{}\n", baseline_line()));
        write(dir.path(), "history.jsonl", "");
        let report = build_report(dir.path());
        assert_eq!(report.lineage.len(), 1);
        assert_eq!(report.lineage[0].branch, "program/base");
        assert_eq!(report.lineage_depth(), 1);
        assert!(report.iterations.is_empty());
    }

    #[test]
    fn admitted_child_yields_lineage_depth_two() {
        let dir = tempfile::tempdir().unwrap();
        let events = format!(
            "{}\n{}\n",
            baseline_line(),
            r#"{"event":"iteration","iteration":1,"parent":"program/base","batch_size":4,"failure_count":3,"candidate":"program/iter-skill-1","validation_score":1.0,"verdict":"admitted","frontier_best":1.0,"draws_served":4}"#,
        );
        write(dir.path(), "events.jsonl", &events);
        let history = r#"{"iteration":1,"parent_branch":"program/base","proposal":{"kind":"new_skill","target_skill_name":"X","rationale":"r","specification":"s"},"validation_score":1.0,"parent_score":0.25,"delta":0.75,"verdict":"admitted"}"#;
        write(dir.path(), "history.jsonl", &format!("{history}\n"));

        let report = build_report(dir.path());
        assert_eq!(report.lineage_depth(), 2);
        assert_eq!(report.lineage[0].children[0].branch, "program/iter-skill-1");
        assert_eq!(report.lineage[0].children[0].score, Some(1.0));
        assert_eq!(report.iterations.len(), 1);
        assert_eq!(report.iterations[0].delta, Some(0.75));
        assert_eq!(report.skills.len(), 1);
        assert_eq!(report.skills[0].name, "X");
        assert!(report.skills[0].events[0].contains("iteration 1"));

        let text = report.render_text();
        assert!(text.contains("lineage:"));
        assert!(text.contains("program/iter-skill-1"));
    }

    #[test]
    fn rejected_candidates_stay_out_of_the_lineage() {
        let dir = tempfile::tempdir().unwrap();
        let events = format!(
            "{}\n{}\n",
            baseline_line(),
            r#"{"event":"iteration","iteration":1,"parent":"program/base","batch_size":4,"failure_count":3,"candidate":"program/iter-skill-1","validation_score":0.1,"verdict":"rejected","frontier_best":0.25,"draws_served":4}"#,
        );
        write(dir.path(), "events.jsonl", &events);
        let report = build_report(dir.path());
        assert_eq!(report.lineage_depth(), 1);
    }

    #[test]
    fn corrupt_artifacts_become_warnings_not_failures() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "events.jsonl", "not json\n");
        write(dir.path(), "history.jsonl", "also not json\n");
        write(dir.path(), "summary.json", "{broken");
        let report = build_report(dir.path());
        assert!(report.summary.is_none());
        assert!(report.iterations.is_empty());
        assert_eq!(report.warnings.len(), 3, "{:?}", report.warnings);
        let text = report.render_text();
        assert!(text.contains("warnings:"));
    }

    #[test]
    fn missing_run_dir_contents_degrade_gracefully() {
        let report = build_report(PathBuf::from("/nonexistent/run/dir"));
        assert!(!report.warnings.is_empty());
        assert_eq!(report.lineage_depth(), 0);
    }
}
