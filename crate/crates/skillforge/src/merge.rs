//! Cross-run skill consolidation.
//!
//! Independent evolution runs discover overlapping skills. The merge
//! pass unions the libraries, collapses overlaps — same name, or
//! near-duplicate descriptions — and keeps each overlap group's version
//! from the highest-scoring run, byte-identical to its source. The
//! result can be committed as a fresh program branch and evaluated like
//! any other candidate.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolve::RunSummary;
use crate::store::{SkillFolder, StoreError};

/// Two descriptions overlap when their token Jaccard similarity reaches
/// this fraction.
pub const DESCRIPTION_OVERLAP_THRESHOLD: f64 = 0.8;

#[derive(Debug, Error)]
pub enum MergeError {
    #[error("merge requires at least one run library")]
    Empty,
    #[error("run id {0:?} appears in more than one library")]
    DuplicateRunId(String),
    #[error("run directory {0} has no summary.json")]
    MissingSummary(PathBuf),
    #[error("malformed summary at {path}: {reason}")]
    BadSummary { path: PathBuf, reason: String },
    #[error(transparent)]
    Skill(#[from] StoreError),
    #[error("merge io: {0}")]
    Io(#[from] std::io::Error),
}

/// One run's final skill library.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLibrary {
    pub run_id: String,
    pub final_score: f64,
    /// Skill name → folder; names are unique within a run by
    /// construction.
    pub skills: BTreeMap<String, SkillFolder>,
}

impl RunLibrary {
    pub fn new(
        run_id: impl Into<String>,
        final_score: f64,
        skills: Vec<SkillFolder>,
    ) -> Self {
        let skills = skills.into_iter().map(|s| (s.name.clone(), s)).collect();
        Self { run_id: run_id.into(), final_score, skills }
    }

    /// Load a completed run directory: `summary.json` supplies the run id
    /// and final score, `skills/` the exported folders.
    pub fn load(run_dir: impl AsRef<Path>) -> Result<Self, MergeError> {
        let run_dir = run_dir.as_ref();
        let summary_path = run_dir.join("summary.json");
        if !summary_path.exists() {
            return Err(MergeError::MissingSummary(run_dir.to_owned()));
        }
        let summary: RunSummary = serde_json::from_str(&fs::read_to_string(
            &summary_path,
        )?)
        .map_err(|e| MergeError::BadSummary {
            path: summary_path.clone(),
            reason: e.to_string(),
        })?;

        let mut skills = BTreeMap::new();
        let skills_dir = run_dir.join("skills");
        if skills_dir.exists() {
            let mut entries: Vec<PathBuf> = fs::read_dir(&skills_dir)?
                .map(|e| e.map(|e| e.path()))
                .collect::<Result<_, _>>()?;
            entries.sort();
            for dir in entries.into_iter().filter(|p| p.is_dir()) {
                let name = dir
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default();
                let files = read_folder_files(&dir)?;
                let folder = SkillFolder::from_files(&name, &files)?;
                skills.insert(name, folder);
            }
        }
        Ok(Self { run_id: summary.run_id, final_score: summary.best_score, skills })
    }
}

/// All files under `dir`, keyed by path relative to it.
fn read_folder_files(dir: &Path) -> Result<BTreeMap<String, String>, MergeError> {
    fn walk(
        root: &Path,
        dir: &Path,
        out: &mut BTreeMap<String, String>,
    ) -> Result<(), MergeError> {
        let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        entries.sort();
        for path in entries {
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                let rel = path
                    .strip_prefix(root)
                    .expect("walk stays under root")
                    .to_string_lossy()
                    .into_owned();
                out.insert(rel, fs::read_to_string(&path)?);
            }
        }
        Ok(())
    }
    let mut files = BTreeMap::new();
    walk(dir, dir, &mut files)?;
    Ok(files)
}

/// Lowercased alphanumeric tokens of a description.
fn tokens(text: &str) -> BTreeSet<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Jaccard similarity of description token sets, in [0, 1].
pub fn description_overlap(a: &str, b: &str) -> f64 {
    let a = tokens(a);
    let b = tokens(b);
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let intersection = a.intersection(&b).count();
    let union = a.union(&b).count();
    intersection as f64 / union as f64
}

/// A skill that made it into the merged library, with its origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub name: String,
    pub source_run: String,
    pub source_score: f64,
    /// Overlapping versions from other runs that this one displaced.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub displaced: Vec<DisplacedSkill>,
    /// True when the source run won its overlap group only by the
    /// run-id tie-break rather than by score.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub tie_break: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacedSkill {
    pub run_id: String,
    pub name: String,
    pub score: f64,
}

/// Output of [`merge_unique`]: the collapsed library plus one provenance
/// entry per retained skill.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeReport {
    /// Retained folders, sorted by name, byte-identical to their sources.
    pub skills: Vec<SkillFolder>,
    pub provenance: Vec<ProvenanceEntry>,
}

impl MergeReport {
    /// Plain-text provenance table for the CLI.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("merged skills: {}\n", self.skills.len()));
        for entry in &self.provenance {
            out.push_str(&format!(
                "  {} <- {} (score {:.4}{})\n",
                entry.name,
                entry.source_run,
                entry.source_score,
                if entry.tie_break { ", tie-break by run id" } else { "" }
            ));
            for displaced in &entry.displaced {
                out.push_str(&format!(
                    "      displaced {}/{} (score {:.4})\n",
                    displaced.run_id, displaced.name, displaced.score
                ));
            }
        }
        out
    }
}

/// Node identifier in the overlap graph: (library index, skill name).
type Node = (usize, String);

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            let root = self.find(self.parent[i]);
            self.parent[i] = root;
        }
        self.parent[i]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller root index wins so grouping is order-independent.
            let (keep, drop) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[drop] = keep;
        }
    }
}

/// Union the libraries, collapsing overlaps (same name, or description
/// similarity ≥ [`DESCRIPTION_OVERLAP_THRESHOLD`]) down to the version
/// from the highest-scoring run. Score ties break to the
/// lexicographically smallest run id and are flagged in the provenance.
///
/// Overlap edges only connect skills from *different* runs: skills that
/// coexist within one run are distinct by that run's own construction,
/// so when a group's winning run contributes several members, all of
/// them are retained.
pub fn merge_unique(libraries: &[RunLibrary]) -> Result<MergeReport, MergeError> {
    if libraries.is_empty() {
        return Err(MergeError::Empty);
    }
    let mut seen_runs = BTreeSet::new();
    for library in libraries {
        if !seen_runs.insert(&library.run_id) {
            return Err(MergeError::DuplicateRunId(library.run_id.clone()));
        }
    }

    // Flatten to indexable nodes in deterministic order.
    let nodes: Vec<Node> = libraries
        .iter()
        .enumerate()
        .flat_map(|(li, lib)| lib.skills.keys().map(move |name| (li, name.clone())))
        .collect();
    let folder = |node: &Node| -> &SkillFolder { &libraries[node.0].skills[&node.1] };

    let mut groups = UnionFind::new(nodes.len());
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            if nodes[i].0 == nodes[j].0 {
                continue; // same run: never an overlap edge
            }
            let (a, b) = (folder(&nodes[i]), folder(&nodes[j]));
            let overlap = a.name == b.name
                || description_overlap(&a.description, &b.description)
                    >= DESCRIPTION_OVERLAP_THRESHOLD;
            if overlap {
                groups.union(i, j);
            }
        }
    }

    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..nodes.len() {
        let root = groups.find(i);
        by_root.entry(root).or_default().push(i);
    }

    let mut skills = Vec::new();
    let mut provenance = Vec::new();
    for members in by_root.values() {
        // Winner: highest final_score, ties to the smallest run id.
        let winner_library = members
            .iter()
            .map(|&i| nodes[i].0)
            .max_by(|&a, &b| {
                libraries[a]
                    .final_score
                    .partial_cmp(&libraries[b].final_score)
                    .expect("scores are finite")
                    .then_with(|| libraries[b].run_id.cmp(&libraries[a].run_id))
            })
            .expect("groups are non-empty");
        let winner = &libraries[winner_library];
        let tie_break = members.iter().any(|&i| {
            nodes[i].0 != winner_library
                && libraries[nodes[i].0].final_score == winner.final_score
        });

        let mut kept: Vec<&Node> =
            members.iter().map(|&i| &nodes[i]).filter(|n| n.0 == winner_library).collect();
        kept.sort_by(|a, b| a.1.cmp(&b.1));
        let displaced: Vec<DisplacedSkill> = members
            .iter()
            .map(|&i| &nodes[i])
            .filter(|n| n.0 != winner_library)
            .map(|n| DisplacedSkill {
                run_id: libraries[n.0].run_id.clone(),
                name: n.1.clone(),
                score: libraries[n.0].final_score,
            })
            .collect();

        for (index, node) in kept.iter().enumerate() {
            skills.push(folder(node).clone());
            provenance.push(ProvenanceEntry {
                name: node.1.clone(),
                source_run: winner.run_id.clone(),
                source_score: winner.final_score,
                // Attribute the displaced versions to the group's first
                // retained member so each loser is listed exactly once.
                displaced: if index == 0 { displaced.clone() } else { Vec::new() },
                tie_break,
            });
        }
    }

    skills.sort_by(|a, b| a.name.cmp(&b.name));
    provenance.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(MergeReport { skills, provenance })
}
