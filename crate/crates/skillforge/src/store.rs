//! Version-controlled persistence of agent programs.
//!
//! Every program lives on its own branch (prefixed `program/`) and differs
//! from its parent only in its skill folders and one metadata file at
//! `.claude/program.yaml`, so performance differences between programs are
//! attributable solely to their skills and prompt. Frontier membership is
//! tracked with `frontier/` tags. The version-control backend sits behind
//! the [`VersionStore`] contract: [`GitStore`] drives the external `git`
//! binary, [`MemoryStore`] is an in-memory fake for fast engine tests.
//!
//! Store mutations are single-writer: callers serialize all writes through
//! one owner. Reads of committed branches are safe from anywhere.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Branch holding the generation-0 program.
pub const BASE_BRANCH: &str = "program/base";
/// Prefix of every program branch.
pub const PROGRAM_PREFIX: &str = "program/";
/// Prefix of every frontier-membership tag.
pub const FRONTIER_PREFIX: &str = "frontier/";
/// Program metadata file, relative to the repository root.
pub const CONFIG_PATH: &str = ".claude/program.yaml";
/// Directory holding one folder per skill, relative to the repository root.
pub const SKILLS_DIR: &str = ".claude/skills";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("branch {0:?} not found")]
    BranchNotFound(String),
    #[error("branch {0:?} already exists")]
    BranchExists(String),
    #[error("base program already initialized at {0:?}")]
    AlreadyInitialized(String),
    #[error("program {program:?} references missing parent branch {parent:?}")]
    BrokenLineage { program: String, parent: String },
    #[error("refusing to delete {branch:?}: {reason}")]
    Protected { branch: String, reason: String },
    #[error("mutation is empty: {0}")]
    EmptyMutation(String),
    #[error("repository not usable: {0}")]
    Repository(String),
    #[error("program config on {branch:?} is invalid: {reason}")]
    InvalidConfig { branch: String, reason: String },
    #[error("skill folder {name:?} is invalid: {reason}")]
    InvalidSkill { name: String, reason: String },
    #[error("git {args} failed: {stderr}")]
    Git { args: String, stderr: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Evaluation block of a program config. Key names are a bit-exact
/// on-disk contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub validation_score: f64,
    /// RFC 3339 timestamp of the scoring run.
    pub scored_at: String,
    /// Mutation mode that produced the program (`skill`, `prompt`, or
    /// `merge`).
    pub mode: String,
}

/// Contents of `.claude/program.yaml`. Key names and their order are a
/// bit-exact on-disk contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgramConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    pub generation: u32,
    pub system_prompt: String,
    pub allowed_tools: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<Evaluation>,
}

impl ProgramConfig {
    /// Generation/parent coherence: generation 0 has no parent, every
    /// other generation has exactly one.
    pub fn validate(&self) -> Result<(), String> {
        match (&self.parent, self.generation) {
            (None, 0) | (Some(_), 1..) => Ok(()),
            (None, g) => Err(format!("generation {g} requires a parent")),
            (Some(p), 0) => Err(format!("generation 0 cannot have parent {p:?}")),
        }
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("config serializes")
    }

    pub fn from_yaml(branch: &str, yaml: &str) -> Result<Self, StoreError> {
        let config: ProgramConfig =
            serde_yaml::from_str(yaml).map_err(|e| StoreError::InvalidConfig {
                branch: branch.to_owned(),
                reason: e.to_string(),
            })?;
        config.validate().map_err(|reason| StoreError::InvalidConfig {
            branch: branch.to_owned(),
            reason,
        })?;
        Ok(config)
    }
}

/// Handle to one program: its branch, last known validation score, and
/// mutation depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramRef {
    pub branch: String,
    pub score: Option<f64>,
    pub generation: u32,
}

impl ProgramRef {
    pub fn new(branch: impl Into<String>, score: Option<f64>, generation: u32) -> Self {
        let branch = branch.into();
        assert!(
            branch.starts_with(PROGRAM_PREFIX),
            "program branch must start with {PROGRAM_PREFIX:?}, got {branch:?}"
        );
        Self { branch, score, generation }
    }

    /// Branch name without the `program/` prefix; also the tag suffix.
    pub fn suffix(&self) -> &str {
        &self.branch[PROGRAM_PREFIX.len()..]
    }
}

#[derive(Serialize, Deserialize)]
struct SkillMeta {
    name: String,
    description: String,
}

/// One skill: a folder containing a `SKILL.md` instruction file plus
/// optional scripts and reference documents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillFolder {
    /// Directory name, also the front-matter name.
    pub name: String,
    /// Trigger text telling the agent when the skill applies.
    pub description: String,
    /// Markdown body of SKILL.md.
    pub instructions: String,
    /// Relative file name → content, materialized under `scripts/`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub scripts: BTreeMap<String, String>,
    /// Relative file name → content, materialized under `references/`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub references: BTreeMap<String, String>,
}

impl SkillFolder {
    pub fn new(
        name: impl Into<String>,
        description: impl Into<String>,
        instructions: impl Into<String>,
    ) -> Result<Self, StoreError> {
        let folder = Self {
            name: name.into(),
            description: description.into(),
            instructions: instructions.into(),
            scripts: BTreeMap::new(),
            references: BTreeMap::new(),
        };
        folder.validate()?;
        Ok(folder)
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        let invalid = |reason: &str| StoreError::InvalidSkill {
            name: self.name.clone(),
            reason: reason.to_owned(),
        };
        if !valid_skill_name(&self.name) {
            return Err(invalid("name must be non-empty [A-Za-z0-9_-]"));
        }
        if self.description.trim().is_empty() {
            return Err(invalid("description must be non-empty"));
        }
        for file in self.scripts.keys().chain(self.references.keys()) {
            validate_relative_path(file).map_err(|reason| invalid(&reason))?;
        }
        Ok(())
    }

    /// Render the SKILL.md content: YAML front matter with `name` and
    /// `description`, then the markdown instructions.
    pub fn skill_md(&self) -> String {
        let meta = serde_yaml::to_string(&SkillMeta {
            name: self.name.clone(),
            description: self.description.clone(),
        })
        .expect("metadata serializes");
        format!("---\n{meta}---\n\n{}", self.instructions)
    }

    /// All files of the folder, keyed by path relative to the skill
    /// directory.
    pub fn to_files(&self) -> BTreeMap<String, String> {
        let mut files = BTreeMap::new();
        files.insert("SKILL.md".to_owned(), self.skill_md());
        for (file, content) in &self.scripts {
            files.insert(format!("scripts/{file}"), content.clone());
        }
        for (file, content) in &self.references {
            files.insert(format!("references/{file}"), content.clone());
        }
        files
    }

    /// Reassemble a folder from its files (paths relative to the skill
    /// directory). Requires exactly one SKILL.md whose front-matter name
    /// matches the directory name.
    pub fn from_files(
        name: &str,
        files: &BTreeMap<String, String>,
    ) -> Result<Self, StoreError> {
        let invalid = |reason: String| StoreError::InvalidSkill {
            name: name.to_owned(),
            reason,
        };
        let skill_md = files
            .get("SKILL.md")
            .ok_or_else(|| invalid("missing SKILL.md".to_owned()))?;
        let (meta, instructions) = parse_skill_md(skill_md).map_err(&invalid)?;
        if meta.name != name {
            return Err(invalid(format!(
                "front-matter name {:?} does not match folder name",
                meta.name
            )));
        }
        let mut folder = SkillFolder {
            name: meta.name,
            description: meta.description,
            instructions,
            scripts: BTreeMap::new(),
            references: BTreeMap::new(),
        };
        for (path, content) in files {
            if path == "SKILL.md" {
                continue;
            }
            if let Some(rest) = path.strip_prefix("scripts/") {
                folder.scripts.insert(rest.to_owned(), content.clone());
            } else if let Some(rest) = path.strip_prefix("references/") {
                folder.references.insert(rest.to_owned(), content.clone());
            } else {
                return Err(invalid(format!("unexpected file {path:?}")));
            }
        }
        folder.validate()?;
        Ok(folder)
    }
}

fn parse_skill_md(content: &str) -> Result<(SkillMeta, String), String> {
    let rest = content
        .strip_prefix("---\n")
        .ok_or("SKILL.md must start with YAML front matter")?;
    let (meta_str, body) = rest
        .split_once("\n---\n")
        .ok_or("unterminated front matter")?;
    let meta: SkillMeta = serde_yaml::from_str(meta_str)
        .map_err(|e| format!("front matter: {e}"))?;
    let body = body.strip_prefix('\n').unwrap_or(body);
    Ok((meta, body.to_owned()))
}

/// Skill folder names double as directory names and tag-safe tokens.
pub fn valid_skill_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

/// Reject path components that could escape the skill directory.
fn validate_relative_path(path: &str) -> Result<(), String> {
    if path.is_empty() || path.ends_with('/') {
        return Err(format!("invalid file path {path:?}"));
    }
    for component in path.split('/') {
        if component.is_empty()
            || component == "."
            || component == ".."
            || component.contains('\\')
            || component.contains(':')
        {
            return Err(format!("invalid path component in {path:?}"));
        }
    }
    Ok(())
}

/// How a child program differs from its parent: exactly one skill folder
/// written, or the system prompt replaced.
#[derive(Debug, Clone, PartialEq)]
pub enum Mutation {
    Skill(SkillFolder),
    Prompt(String),
}

impl Mutation {
    /// Branch-name mode token.
    pub fn mode(&self) -> &'static str {
        match self {
            Mutation::Skill(_) => "skill",
            Mutation::Prompt(_) => "prompt",
        }
    }

    fn describe(&self) -> String {
        match self {
            Mutation::Skill(folder) => format!("write skill {}", folder.name),
            Mutation::Prompt(_) => "replace system prompt".to_owned(),
        }
    }
}

/// Version-control backend contract: branch and tag bookkeeping plus file
/// access at a branch head. Implementations must keep branch states
/// independent (writing to one branch never changes another).
pub trait VersionStore {
    fn branch_exists(&self, branch: &str) -> Result<bool, StoreError>;
    /// Branch names starting with `prefix`, sorted.
    fn list_branches(&self, prefix: &str) -> Result<Vec<String>, StoreError>;
    /// `from` may be a branch name or `HEAD`.
    fn create_branch_from(&mut self, new_branch: &str, from: &str) -> Result<(), StoreError>;
    fn delete_branch(&mut self, branch: &str) -> Result<(), StoreError>;
    /// Apply writes and removals to `branch` as one commit. A no-op
    /// change set is an [`StoreError::EmptyMutation`].
    fn commit_files(
        &mut self,
        branch: &str,
        writes: &BTreeMap<String, String>,
        removals: &[String],
        message: &str,
    ) -> Result<(), StoreError>;
    fn read_file(&self, branch: &str, path: &str) -> Result<Option<String>, StoreError>;
    /// Repository-relative paths of all files under `dir` at the branch
    /// head, sorted. Empty `dir` lists the whole tree.
    fn list_dir(&self, branch: &str, dir: &str) -> Result<Vec<String>, StoreError>;
    /// Paths whose content differs between the two branch heads.
    fn changed_paths(&self, a: &str, b: &str) -> Result<Vec<String>, StoreError>;
    fn create_tag(&mut self, tag: &str, branch: &str) -> Result<(), StoreError>;
    fn delete_tag(&mut self, tag: &str) -> Result<(), StoreError>;
    fn list_tags(&self, prefix: &str) -> Result<Vec<String>, StoreError>;
    /// Write a full checkout of the branch head below `dest`.
    fn export_tree(&self, branch: &str, dest: &Path) -> Result<(), StoreError>;
    /// Backend readiness for initialization (repository present, clean
    /// working tree).
    fn verify_ready(&self) -> Result<(), StoreError>;
}

/// In-memory [`VersionStore`]: branches are file maps, tags a name map.
/// Ships with a small fixed codebase on `main` so engine tests exercise
/// the codebase-immutability invariant.
#[derive(Debug, Clone, Default)]
pub struct MemoryStore {
    branches: BTreeMap<String, BTreeMap<String, String>>,
    tags: BTreeMap<String, String>,
    head: String,
}

impl MemoryStore {
    pub fn new() -> Self {
        let mut codebase = BTreeMap::new();
        codebase.insert(
            "README.md".to_owned(),
            "Fixed harness codebase; evolution must never touch this file.\n".to_owned(),
        );
        codebase.insert(
            "harness/entrypoint.sh".to_owned(),
            "#!/bin/sh\nexec agent \"$@\"\n".to_owned(),
        );
        Self::with_codebase(codebase)
    }

    pub fn with_codebase(files: BTreeMap<String, String>) -> Self {
        let mut branches = BTreeMap::new();
        branches.insert("main".to_owned(), files);
        Self { branches, tags: BTreeMap::new(), head: "main".to_owned() }
    }

    fn files(&self, branch: &str) -> Result<&BTreeMap<String, String>, StoreError> {
        let branch = if branch == "HEAD" { &self.head } else { branch };
        self.branches
            .get(branch)
            .ok_or_else(|| StoreError::BranchNotFound(branch.to_owned()))
    }
}

impl VersionStore for MemoryStore {
    fn branch_exists(&self, branch: &str) -> Result<bool, StoreError> {
        Ok(self.branches.contains_key(branch))
    }

    fn list_branches(&self, prefix: &str) -> Result<Vec<String>, StoreError> {
        Ok(self
            .branches
            .keys()
            .filter(|b| b.starts_with(prefix))
            .cloned()
            .collect())
    }

    fn create_branch_from(&mut self, new_branch: &str, from: &str) -> Result<(), StoreError> {
        if self.branches.contains_key(new_branch) {
            return Err(StoreError::BranchExists(new_branch.to_owned()));
        }
        let files = self.files(from)?.clone();
        self.branches.insert(new_branch.to_owned(), files);
        Ok(())
    }

    fn delete_branch(&mut self, branch: &str) -> Result<(), StoreError> {
        self.branches
            .remove(branch)
            .map(|_| ())
            .ok_or_else(|| StoreError::BranchNotFound(branch.to_owned()))
    }

    fn commit_files(
        &mut self,
        branch: &str,
        writes: &BTreeMap<String, String>,
        removals: &[String],
        message: &str,
    ) -> Result<(), StoreError> {
        let _ = message; // no history in the fake store
        self.files(branch)?;
        let files = self.branches.get_mut(branch).expect("checked above");
        let mut changed = false;
        for (path, content) in writes {
            changed |= files.get(path) != Some(content);
            files.insert(path.clone(), content.clone());
        }
        for path in removals {
            changed |= files.remove(path).is_some();
        }
        if !changed {
            return Err(StoreError::EmptyMutation(format!(
                "no file changes for {branch}"
            )));
        }
        Ok(())
    }

    fn read_file(&self, branch: &str, path: &str) -> Result<Option<String>, StoreError> {
        Ok(self.files(branch)?.get(path).cloned())
    }

    fn list_dir(&self, branch: &str, dir: &str) -> Result<Vec<String>, StoreError> {
        let prefix = if dir.is_empty() || dir.ends_with('/') {
            dir.to_owned()
        } else {
            format!("{dir}/")
        };
        Ok(self
            .files(branch)?
            .keys()
            .filter(|p| p.starts_with(&prefix))
            .cloned()
            .collect())
    }

    fn changed_paths(&self, a: &str, b: &str) -> Result<Vec<String>, StoreError> {
        let left = self.files(a)?;
        let right = self.files(b)?;
        let mut changed = Vec::new();
        for path in left.keys().chain(right.keys()) {
            if left.get(path) != right.get(path) && !changed.contains(path) {
                changed.push(path.clone());
            }
        }
        changed.sort();
        Ok(changed)
    }

    fn create_tag(&mut self, tag: &str, branch: &str) -> Result<(), StoreError> {
        if !self.branches.contains_key(branch) {
            return Err(StoreError::BranchNotFound(branch.to_owned()));
        }
        self.tags.insert(tag.to_owned(), branch.to_owned());
        Ok(())
    }

    fn delete_tag(&mut self, tag: &str) -> Result<(), StoreError> {
        self.tags.remove(tag);
        Ok(())
    }

    fn list_tags(&self, prefix: &str) -> Result<Vec<String>, StoreError> {
        Ok(self
            .tags
            .keys()
            .filter(|t| t.starts_with(prefix))
            .cloned()
            .collect())
    }

    fn export_tree(&self, branch: &str, dest: &Path) -> Result<(), StoreError> {
        for (path, content) in self.files(branch)? {
            let target = dest.join(path);
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(target, content)?;
        }
        Ok(())
    }

    fn verify_ready(&self) -> Result<(), StoreError> {
        Ok(())
    }
}

/// [`VersionStore`] backed by the external `git` binary operating on a
/// local repository. All commits carry a fixed author identity so runs
/// are environment-independent.
#[derive(Debug, Clone)]
pub struct GitStore {
    repo: PathBuf,
}

impl GitStore {
    /// Open an existing repository.
    pub fn open(repo: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let store = Self { repo: repo.into() };
        if !store.repo.join(".git").exists() {
            return Err(StoreError::Repository(format!(
                "{} is not a git repository",
                store.repo.display()
            )));
        }
        Ok(store)
    }

    /// Initialize a fresh repository at `path` holding `files` as the
    /// fixed codebase, committed on `main`. Intended for tests and for
    /// bootstrapping demo workspaces.
    pub fn init_repo(
        path: impl Into<PathBuf>,
        files: &BTreeMap<String, String>,
    ) -> Result<Self, StoreError> {
        let repo: PathBuf = path.into();
        fs::create_dir_all(&repo)?;
        let store = Self { repo };
        store.git(&["init", "-q", "--initial-branch=main"])?;
        for (file, content) in files {
            let target = store.repo.join(file);
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(target, content)?;
        }
        store.git(&["add", "-A"])?;
        store.commit("initial codebase")?;
        Ok(store)
    }

    pub fn repo_path(&self) -> &Path {
        &self.repo
    }

    fn git(&self, args: &[&str]) -> Result<String, StoreError> {
        let output = Command::new("git")
            .arg("-C")
            .arg(&self.repo)
            .args(args)
            .output()
            .map_err(|e| StoreError::Repository(format!("failed to run git: {e}")))?;
        if !output.status.success() {
            return Err(StoreError::Git {
                args: args.join(" "),
                stderr: String::from_utf8_lossy(&output.stderr).trim().to_owned(),
            });
        }
        Ok(String::from_utf8_lossy(&output.stdout).trim_end().to_owned())
    }

    fn commit(&self, message: &str) -> Result<(), StoreError> {
        let output = Command::new("git")
            .arg("-C")
            .arg(&self.repo)
            .args([
                "-c",
                "user.name=program-store",
                "-c",
                "user.email=program-store@localhost",
                "commit",
                "-q",
                "-m",
                message,
            ])
            .output()
            .map_err(|e| StoreError::Repository(format!("failed to run git: {e}")))?;
        if !output.status.success() {
            return Err(StoreError::Git {
                args: format!("commit -m {message:?}"),
                stderr: String::from_utf8_lossy(&output.stderr).trim().to_owned(),
            });
        }
        Ok(())
    }

    fn current_branch(&self) -> Result<Option<String>, StoreError> {
        match self.git(&["symbolic-ref", "--short", "-q", "HEAD"]) {
            Ok(name) if !name.is_empty() => Ok(Some(name)),
            _ => Ok(None),
        }
    }
}

impl VersionStore for GitStore {
    fn branch_exists(&self, branch: &str) -> Result<bool, StoreError> {
        let refname = format!("refs/heads/{branch}");
        Ok(self.git(&["show-ref", "--verify", "--quiet", &refname]).is_ok())
    }

    fn list_branches(&self, prefix: &str) -> Result<Vec<String>, StoreError> {
        let pattern = format!("refs/heads/{prefix}*");
        let out = self.git(&[
            "for-each-ref",
            "--format=%(refname:short)",
            &pattern,
        ])?;
        let mut branches: Vec<String> =
            out.lines().filter(|l| !l.is_empty()).map(str::to_owned).collect();
        branches.sort();
        Ok(branches)
    }

    fn create_branch_from(&mut self, new_branch: &str, from: &str) -> Result<(), StoreError> {
        if self.branch_exists(new_branch)? {
            return Err(StoreError::BranchExists(new_branch.to_owned()));
        }
        if from != "HEAD" && !self.branch_exists(from)? {
            return Err(StoreError::BranchNotFound(from.to_owned()));
        }
        self.git(&["branch", new_branch, from])?;
        Ok(())
    }

    fn delete_branch(&mut self, branch: &str) -> Result<(), StoreError> {
        if !self.branch_exists(branch)? {
            return Err(StoreError::BranchNotFound(branch.to_owned()));
        }
        if self.current_branch()?.as_deref() == Some(branch) {
            self.git(&["checkout", "-q", "--detach"])?;
        }
        self.git(&["branch", "-D", "-q", branch])?;
        Ok(())
    }

    fn commit_files(
        &mut self,
        branch: &str,
        writes: &BTreeMap<String, String>,
        removals: &[String],
        message: &str,
    ) -> Result<(), StoreError> {
        if !self.branch_exists(branch)? {
            return Err(StoreError::BranchNotFound(branch.to_owned()));
        }
        self.git(&["checkout", "-q", branch])?;
        for (path, content) in writes {
            let target = self.repo.join(path);
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(target, content)?;
        }
        for path in removals {
            let target = self.repo.join(path);
            if target.exists() {
                fs::remove_file(target)?;
            }
        }
        self.git(&["add", "-A"])?;
        let staged = self.git(&["status", "--porcelain"])?;
        if staged.is_empty() {
            return Err(StoreError::EmptyMutation(format!(
                "no file changes for {branch}"
            )));
        }
        self.commit(message)
    }

    fn read_file(&self, branch: &str, path: &str) -> Result<Option<String>, StoreError> {
        if !self.branch_exists(branch)? {
            return Err(StoreError::BranchNotFound(branch.to_owned()));
        }
        match self.git(&["show", &format!("{branch}:{path}")]) {
            Ok(content) => Ok(Some(content)),
            Err(StoreError::Git { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn list_dir(&self, branch: &str, dir: &str) -> Result<Vec<String>, StoreError> {
        if !self.branch_exists(branch)? {
            return Err(StoreError::BranchNotFound(branch.to_owned()));
        }
        let out = if dir.is_empty() {
            self.git(&["ls-tree", "-r", "--name-only", branch])?
        } else {
            self.git(&["ls-tree", "-r", "--name-only", branch, "--", dir])?
        };
        let mut paths: Vec<String> =
            out.lines().filter(|l| !l.is_empty()).map(str::to_owned).collect();
        paths.sort();
        Ok(paths)
    }

    fn changed_paths(&self, a: &str, b: &str) -> Result<Vec<String>, StoreError> {
        for branch in [a, b] {
            if !self.branch_exists(branch)? {
                return Err(StoreError::BranchNotFound(branch.to_owned()));
            }
        }
        let out = self.git(&["diff", "--name-only", a, b])?;
        let mut paths: Vec<String> =
            out.lines().filter(|l| !l.is_empty()).map(str::to_owned).collect();
        paths.sort();
        Ok(paths)
    }

    fn create_tag(&mut self, tag: &str, branch: &str) -> Result<(), StoreError> {
        if !self.branch_exists(branch)? {
            return Err(StoreError::BranchNotFound(branch.to_owned()));
        }
        // Move the tag if it already exists: tags record membership, and
        // retagging must be idempotent.
        self.git(&["tag", "--force", tag, branch]).map(|_| ())
    }

    fn delete_tag(&mut self, tag: &str) -> Result<(), StoreError> {
        let existing = self.list_tags(tag)?;
        if existing.iter().any(|t| t == tag) {
            self.git(&["tag", "-d", tag])?;
        }
        Ok(())
    }

    fn list_tags(&self, prefix: &str) -> Result<Vec<String>, StoreError> {
        let pattern = format!("{prefix}*");
        let out = self.git(&["tag", "-l", &pattern])?;
        let mut tags: Vec<String> =
            out.lines().filter(|l| !l.is_empty()).map(str::to_owned).collect();
        tags.sort();
        Ok(tags)
    }

    fn export_tree(&self, branch: &str, dest: &Path) -> Result<(), StoreError> {
        fs::create_dir_all(dest)?;
        for path in self.list_dir(branch, "")? {
            let content = self.read_file(branch, &path)?.unwrap_or_default();
            let target = dest.join(&path);
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(target, content)?;
        }
        Ok(())
    }

    fn verify_ready(&self) -> Result<(), StoreError> {
        self.git(&["rev-parse", "HEAD"]).map_err(|_| {
            StoreError::Repository(format!(
                "{} has no commits to branch from",
                self.repo.display()
            ))
        })?;
        let dirty = self.git(&["status", "--porcelain"])?;
        if !dirty.is_empty() {
            return Err(StoreError::Repository(format!(
                "{} has uncommitted changes",
                self.repo.display()
            )));
        }
        Ok(())
    }
}

/// Domain operations over a [`VersionStore`]: program creation, mutation,
/// protection rules, frontier tags, and lineage walking.
pub struct ProgramStore<S: VersionStore> {
    store: S,
}

impl<S: VersionStore> ProgramStore<S> {
    pub fn new(store: S) -> Self {
        Self { store }
    }

    /// Escape hatch for callers needing raw branch/tag access (exports,
    /// diff checks). Protection rules live on the typed operations only.
    pub fn raw(&mut self) -> &mut S {
        &mut self.store
    }

    pub fn raw_ref(&self) -> &S {
        &self.store
    }

    /// Create the generation-0 program on `program/base` from the current
    /// head of the repository.
    pub fn init_base(
        &mut self,
        system_prompt: &str,
        allowed_tools: &[String],
    ) -> Result<ProgramRef, StoreError> {
        self.store.verify_ready()?;
        if self.store.branch_exists(BASE_BRANCH)? {
            return Err(StoreError::AlreadyInitialized(BASE_BRANCH.to_owned()));
        }
        let config = ProgramConfig {
            name: "base".to_owned(),
            parent: None,
            generation: 0,
            system_prompt: system_prompt.to_owned(),
            allowed_tools: allowed_tools.to_vec(),
            evaluation: None,
        };
        self.store.create_branch_from(BASE_BRANCH, "HEAD")?;
        let mut writes = BTreeMap::new();
        writes.insert(CONFIG_PATH.to_owned(), config.to_yaml());
        // Git cannot track an empty directory, so the empty skill library
        // is represented by a keep-file.
        writes.insert(format!("{SKILLS_DIR}/.gitkeep"), String::new());
        self.store.commit_files(BASE_BRANCH, &writes, &[], "base: initialize program")?;
        Ok(ProgramRef::new(BASE_BRANCH, None, 0))
    }

    /// Branch a child off `parent` carrying exactly one mutation, named
    /// `program/iter-{mode}-{iteration}`.
    pub fn create_child(
        &mut self,
        parent: &ProgramRef,
        mutation: &Mutation,
        iteration: u64,
    ) -> Result<ProgramRef, StoreError> {
        if !self.store.branch_exists(&parent.branch)? {
            return Err(StoreError::BranchNotFound(parent.branch.clone()));
        }
        let parent_config = self.read_config(&parent.branch)?;
        let suffix = format!("iter-{}-{}", mutation.mode(), iteration);
        let branch = format!("{PROGRAM_PREFIX}{suffix}");
        if self.store.branch_exists(&branch)? {
            return Err(StoreError::BranchExists(branch));
        }

        let mut writes = BTreeMap::new();
        let system_prompt = match mutation {
            Mutation::Prompt(prompt) => {
                if prompt == &parent_config.system_prompt {
                    return Err(StoreError::EmptyMutation(
                        "new system prompt is identical to the parent's".to_owned(),
                    ));
                }
                prompt.clone()
            }
            Mutation::Skill(folder) => {
                folder.validate()?;
                let dir = format!("{SKILLS_DIR}/{}", folder.name);
                let mut identical = true;
                for (rel, content) in folder.to_files() {
                    let path = format!("{dir}/{rel}");
                    if self.store.read_file(&parent.branch, &path)?.as_deref()
                        != Some(content.as_str())
                    {
                        identical = false;
                    }
                    writes.insert(path, content);
                }
                if identical {
                    return Err(StoreError::EmptyMutation(format!(
                        "skill {} is byte-identical to the parent's",
                        folder.name
                    )));
                }
                parent_config.system_prompt.clone()
            }
        };

        let config = ProgramConfig {
            name: suffix.clone(),
            parent: Some(parent.branch.clone()),
            generation: parent_config.generation + 1,
            system_prompt,
            allowed_tools: parent_config.allowed_tools.clone(),
            evaluation: None,
        };
        self.store.create_branch_from(&branch, &parent.branch)?;
        writes.insert(CONFIG_PATH.to_owned(), config.to_yaml());
        let message = format!("{suffix}: {}", mutation.describe());
        self.store.commit_files(&branch, &writes, &[], &message)?;
        Ok(ProgramRef::new(branch, None, config.generation))
    }

    /// Branch a merged program off base carrying a whole skill library in
    /// one commit. Used when consolidating skills across runs.
    pub fn create_merged(
        &mut self,
        label: &str,
        skills: &[SkillFolder],
    ) -> Result<ProgramRef, StoreError> {
        let base_config = self.read_config(BASE_BRANCH)?;
        let branch = format!("{PROGRAM_PREFIX}{label}");
        if self.store.branch_exists(&branch)? {
            return Err(StoreError::BranchExists(branch));
        }
        let mut writes = BTreeMap::new();
        for folder in skills {
            folder.validate()?;
            for (rel, content) in folder.to_files() {
                writes.insert(format!("{SKILLS_DIR}/{}/{rel}", folder.name), content);
            }
        }
        let config = ProgramConfig {
            name: label.to_owned(),
            parent: Some(BASE_BRANCH.to_owned()),
            generation: 1,
            system_prompt: base_config.system_prompt.clone(),
            allowed_tools: base_config.allowed_tools.clone(),
            evaluation: None,
        };
        writes.insert(CONFIG_PATH.to_owned(), config.to_yaml());
        self.store.create_branch_from(&branch, BASE_BRANCH)?;
        let message = format!("{label}: merge {} skills", skills.len());
        self.store.commit_files(&branch, &writes, &[], &message)?;
        Ok(ProgramRef::new(branch, None, 1))
    }

    /// Record a validation score as a follow-up commit on the program's
    /// branch.
    pub fn write_evaluation(
        &mut self,
        program: &ProgramRef,
        evaluation: &Evaluation,
    ) -> Result<(), StoreError> {
        let mut config = self.read_config(&program.branch)?;
        config.evaluation = Some(evaluation.clone());
        let mut writes = BTreeMap::new();
        writes.insert(CONFIG_PATH.to_owned(), config.to_yaml());
        let message = format!(
            "{}: record validation score {:.4}",
            program.suffix(),
            evaluation.validation_score
        );
        self.store.commit_files(&program.branch, &writes, &[], &message)
    }

    /// Delete a program branch. Base and frontier members are protected.
    pub fn delete_program(&mut self, program: &ProgramRef) -> Result<(), StoreError> {
        if program.branch == BASE_BRANCH {
            return Err(StoreError::Protected {
                branch: program.branch.clone(),
                reason: "the base program is immutable".to_owned(),
            });
        }
        if self.frontier_members()?.contains(&program.branch) {
            return Err(StoreError::Protected {
                branch: program.branch.clone(),
                reason: "program is frontier-tagged".to_owned(),
            });
        }
        self.store.delete_branch(&program.branch)
    }

    /// Add the frontier membership tag. Duplicate tagging succeeds.
    pub fn tag_frontier(&mut self, program: &ProgramRef) -> Result<(), StoreError> {
        if !self.store.branch_exists(&program.branch)? {
            return Err(StoreError::BranchNotFound(program.branch.clone()));
        }
        let tag = format!("{FRONTIER_PREFIX}{}", program.suffix());
        self.store.create_tag(&tag, &program.branch)
    }

    /// Remove the frontier membership tag; the branch itself is kept so
    /// lineage stays walkable. Missing tags are ignored.
    pub fn untag_frontier(&mut self, program: &ProgramRef) -> Result<(), StoreError> {
        let tag = format!("{FRONTIER_PREFIX}{}", program.suffix());
        self.store.delete_tag(&tag)
    }

    /// Branches currently holding a frontier tag, sorted.
    pub fn frontier_members(&self) -> Result<Vec<String>, StoreError> {
        Ok(self
            .store
            .list_tags(FRONTIER_PREFIX)?
            .iter()
            .map(|tag| format!("{PROGRAM_PREFIX}{}", &tag[FRONTIER_PREFIX.len()..]))
            .collect())
    }

    /// All program branches, sorted.
    pub fn list_programs(&self) -> Result<Vec<String>, StoreError> {
        self.store.list_branches(PROGRAM_PREFIX)
    }

    pub fn read_config(&self, branch: &str) -> Result<ProgramConfig, StoreError> {
        if !self.store.branch_exists(branch)? {
            return Err(StoreError::BranchNotFound(branch.to_owned()));
        }
        let yaml = self.store.read_file(branch, CONFIG_PATH)?.ok_or_else(|| {
            StoreError::InvalidConfig {
                branch: branch.to_owned(),
                reason: format!("missing {CONFIG_PATH}"),
            }
        })?;
        ProgramConfig::from_yaml(branch, &yaml)
    }

    /// Program handle with score/generation lifted from the stored config.
    pub fn load_ref(&self, branch: &str) -> Result<ProgramRef, StoreError> {
        let config = self.read_config(branch)?;
        Ok(ProgramRef::new(
            branch,
            config.evaluation.as_ref().map(|e| e.validation_score),
            config.generation,
        ))
    }

    /// Walk parent pointers from `program` back to the base program.
    /// The result starts at `program` and ends at generation 0.
    pub fn lineage(&self, program: &ProgramRef) -> Result<Vec<ProgramRef>, StoreError> {
        let mut chain = Vec::new();
        let mut cursor = program.branch.clone();
        loop {
            if !self.store.branch_exists(&cursor)? {
                let child = chain
                    .last()
                    .map(|r: &ProgramRef| r.branch.clone())
                    .unwrap_or_else(|| program.branch.clone());
                return Err(StoreError::BrokenLineage { program: child, parent: cursor });
            }
            let config = self.read_config(&cursor)?;
            chain.push(ProgramRef::new(
                cursor.clone(),
                config.evaluation.as_ref().map(|e| e.validation_score),
                config.generation,
            ));
            match config.parent {
                Some(parent) => cursor = parent,
                None => return Ok(chain),
            }
        }
    }

    /// All skill folders of a program, reassembled from its skills
    /// directory.
    pub fn skills(&self, branch: &str) -> Result<Vec<SkillFolder>, StoreError> {
        let prefix = format!("{SKILLS_DIR}/");
        let mut grouped: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for path in self.store.list_dir(branch, SKILLS_DIR)? {
            let Some(rest) = path.strip_prefix(&prefix) else { continue };
            let Some((skill, file)) = rest.split_once('/') else { continue };
            let content = self.store.read_file(branch, &path)?.unwrap_or_default();
            grouped
                .entry(skill.to_owned())
                .or_default()
                .insert(file.to_owned(), content);
        }
        grouped
            .into_iter()
            .map(|(name, files)| SkillFolder::from_files(&name, &files))
            .collect()
    }

    /// Materialize a full working copy of the program at `dest`.
    pub fn materialize(&self, branch: &str, dest: &Path) -> Result<(), StoreError> {
        self.store.export_tree(branch, dest)
    }
}
