//! Run configuration: one YAML document wiring dataset, backend, loop
//! knobs, scorer, and artifact locations together. Command-line flags
//! override individual fields.
//!
//! Credentials never appear in the file — backends name an environment
//! variable and read it at request time.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolve::LoopConfig;
use crate::scoring::{multi_tolerance_score, score, MultiToleranceScore, ToleranceLevel};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("referenced path does not exist: {0}")]
    MissingPath(PathBuf),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Where the example corpus lives and how to split it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// JSONL corpus; each line holds `id`, `question`, `answer`, and an
    /// optional `category`.
    pub examples: PathBuf,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
}

fn default_train_fraction() -> f64 {
    0.10
}

fn default_validation_fraction() -> f64 {
    0.07
}

/// Which agent backend answers, proposes, and builds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    /// Chat-completion endpoint for all three agent roles.
    Http {
        base_url: String,
        model: String,
        /// Name of the environment variable holding the API credential.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        credential_env: Option<String>,
        /// Answer extraction delimiter for the executor, e.g. "ANSWER:".
        #[serde(default, skip_serializing_if = "Option::is_none")]
        answer_delimiter: Option<String>,
    },
    /// Shell-command executor (a local agent CLI); proposer and builder
    /// still need the chat endpoint.
    Shell {
        /// Template run through `sh -c` with `{question}`, `{workdir}`,
        /// and `{skills_dir}` placeholders.
        command: String,
        base_url: String,
        model: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        credential_env: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        timeout_seconds: Option<u64>,
    },
    /// Fully offline deterministic mocks: the executor answers correctly
    /// iff the named skill is present, the proposer proposes exactly that
    /// skill, and the builder expands it from a template.
    Mock {
        gate_skill: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        specification: Option<String>,
    },
}

/// Scorer used for evaluation and failure collection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    /// Weighted multi-tolerance fuzzy scorer (the task default).
    #[default]
    Weighted,
    /// Binary fuzzy match at zero tolerance.
    Exact,
}

impl ScorerKind {
    /// The scorer as a callable; `Exact` replicates its binary outcome
    /// across all tolerance levels so downstream weighting still works.
    pub fn as_fn(self) -> Box<crate::evolve::Scorer> {
        match self {
            ScorerKind::Weighted => Box::new(multi_tolerance_score),
            ScorerKind::Exact => Box::new(|gt: &str, pred: &str| {
                let binary = score(gt, pred, 0.0).binary;
                MultiToleranceScore {
                    weighted: binary,
                    per_tolerance: crate::scoring::MULTI_TOLERANCE_TAUS
                        .iter()
                        .map(|&tau| (ToleranceLevel::new(tau), binary))
                        .collect(),
                    is_failure: binary < crate::scoring::FAILURE_THRESHOLD,
                }
            }),
        }
    }
}

/// Base program seeded by `init`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseProgramConfig {
    pub system_prompt: String,
    pub allowed_tools: Vec<String>,
}

impl Default for BaseProgramConfig {
    fn default() -> Self {
        Self {
            system_prompt: "Answer the question precisely. Work step by step, \
                            then give only the final answer on the last line."
                .to_owned(),
            allowed_tools: vec!["read".to_owned(), "grep".to_owned(), "bash".to_owned()],
        }
    }
}

/// The full run configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Git repository holding the program branches.
    pub repository: PathBuf,
    /// Where run artifacts (history, events, eval results, summary) go.
    pub run_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub backend: BackendConfig,
    #[serde(rename = "loop", default)]
    pub loop_config: LoopConfig,
    #[serde(default)]
    pub scorer: ScorerKind,
    #[serde(default)]
    pub base: BaseProgramConfig,
    /// Fix `scored_at` metadata to this RFC 3339 value; set in
    /// reproducibility tests so repeat runs are byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pin_scored_at: Option<String>,
}

impl RunConfig {
    /// Parse and validate a YAML config. Relative paths resolve against
    /// the config file's directory. The dataset path must exist; the
    /// repository is checked per-command since `init` creates it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_owned(), source })?;
        let mut config: RunConfig = serde_yaml::from_str(&text).map_err(|e| {
            ConfigError::Parse { path: path.to_owned(), reason: e.to_string() }
        })?;

        let anchor = path.parent().unwrap_or_else(|| Path::new("."));
        config.repository = resolve(anchor, &config.repository);
        config.run_dir = resolve(anchor, &config.run_dir);
        config.dataset.examples = resolve(anchor, &config.dataset.examples);

        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.dataset.examples.exists() {
            return Err(ConfigError::MissingPath(self.dataset.examples.clone()));
        }
        let t = self.dataset.train_fraction;
        let v = self.dataset.validation_fraction;
        if !(t > 0.0 && v > 0.0 && t + v < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "split fractions must each be positive and sum below 1 \
                 (train {t}, validation {v})"
            )));
        }
        self.loop_config
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let BackendConfig::Shell { timeout_seconds: Some(0), .. } = &self.backend {
            return Err(ConfigError::Invalid(
                "shell timeout_seconds must be positive".to_owned(),
            ));
        }
        Ok(())
    }
}

fn resolve(anchor: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_owned()
    } else {
        anchor.join(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_examples(dir: &Path) -> PathBuf {
        let path = dir.join("examples.jsonl");
        std::fs::write(
            &path,
            r#"{"id": "e1", "question": "how many?", "answer": "7"}"#,
        )
        .unwrap();
        path
    }

    fn minimal_yaml() -> &'static str {
        "repository: programs\n\
         run_dir: runs/r1\n\
         dataset:\n\
         \x20 examples: examples.jsonl\n\
         backend:\n\
         \x20 kind: mock\n\
         \x20 gate_skill: X\n"
    }

    #[test]
    fn minimal_config_loads_with_defaults() {
        let dir = tempfile::tempdir().unwrap();
        write_examples(dir.path());
        let path = dir.path().join("run.yaml");
        std::fs::write(&path, minimal_yaml()).unwrap();

        let config = RunConfig::load(&path).unwrap();
        assert_eq!(config.dataset.train_fraction, 0.10);
        assert_eq!(config.dataset.validation_fraction, 0.07);
        assert_eq!(config.scorer, ScorerKind::Weighted);
        assert_eq!(config.loop_config, LoopConfig::default());
        assert_eq!(config.repository, dir.path().join("programs"));
        assert_eq!(config.run_dir, dir.path().join("runs/r1"));
        assert!(matches!(config.backend, BackendConfig::Mock { .. }));
        assert!(config.base.system_prompt.contains("final answer"));
    }

    #[test]
    fn missing_dataset_path_is_rejected_at_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.yaml");
        std::fs::write(&path, minimal_yaml()).unwrap();
        assert!(matches!(
            RunConfig::load(&path),
            Err(ConfigError::MissingPath(_))
        ));
    }

    #[test]
    fn loop_overrides_and_http_backend_parse() {
        let dir = tempfile::tempdir().unwrap();
        write_examples(dir.path());
        let yaml = "repository: programs\n\
                    run_dir: runs/r1\n\
                    dataset:\n\
                    \x20 examples: examples.jsonl\n\
                    \x20 train_fraction: 0.2\n\
                    \x20 validation_fraction: 0.1\n\
                    backend:\n\
                    \x20 kind: http\n\
                    \x20 base_url: http://localhost:9000/v1/complete\n\
                    \x20 model: answerer\n\
                    \x20 credential_env: MY_API_KEY\n\
                    loop:\n\
                    \x20 max_iterations: 4\n\
                    \x20 seed: 11\n\
                    scorer: exact\n";
        let path = dir.path().join("run.yaml");
        std::fs::write(&path, yaml).unwrap();
        let config = RunConfig::load(&path).unwrap();
        assert_eq!(config.loop_config.max_iterations, 4);
        assert_eq!(config.loop_config.seed, 11);
        // Unspecified loop fields keep their defaults.
        assert_eq!(config.loop_config.batch_size, 8);
        assert_eq!(config.scorer, ScorerKind::Exact);
        match &config.backend {
            BackendConfig::Http { credential_env, .. } => {
                assert_eq!(credential_env.as_deref(), Some("MY_API_KEY"));
            }
            other => panic!("unexpected backend {other:?}"),
        }
    }

    #[test]
    fn invalid_fractions_and_loop_knobs_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_examples(dir.path());
        let yaml = "repository: programs\n\
                    run_dir: runs/r1\n\
                    dataset:\n\
                    \x20 examples: examples.jsonl\n\
                    \x20 train_fraction: 0.6\n\
                    \x20 validation_fraction: 0.5\n\
                    backend:\n\
                    \x20 kind: mock\n\
                    \x20 gate_skill: X\n";
        let path = dir.path().join("run.yaml");
        std::fs::write(&path, yaml).unwrap();
        assert!(matches!(RunConfig::load(&path), Err(ConfigError::Invalid(_))));

        let yaml = "repository: programs\n\
                    run_dir: runs/r1\n\
                    dataset:\n\
                    \x20 examples: examples.jsonl\n\
                    backend:\n\
                    \x20 kind: mock\n\
                    \x20 gate_skill: X\n\
                    loop:\n\
                    \x20 patience: 0\n";
        std::fs::write(&path, yaml).unwrap();
        assert!(matches!(RunConfig::load(&path), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn unknown_keys_are_parse_errors() {
        let dir = tempfile::tempdir().unwrap();
        write_examples(dir.path());
        let yaml = format!("{}credential: sk-leaked\n", minimal_yaml());
        let path = dir.path().join("run.yaml");
        std::fs::write(&path, yaml).unwrap();
        // Credentials cannot even be expressed in the config document.
        assert!(matches!(RunConfig::load(&path), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn exact_scorer_replicates_binary_across_levels() {
        let scorer = ScorerKind::Exact.as_fn();
        let hit = scorer("100", "100");
        assert_eq!(hit.weighted, 1.0);
        assert!(hit.per_tolerance.iter().all(|(_, s)| *s == 1.0));
        // Within 1% but not exact: weighted scorer would give partial
        // credit, exact gives zero.
        let near = scorer("1000", "1001");
        assert_eq!(near.weighted, 0.0);
        assert!(near.is_failure);
        assert!(ScorerKind::Weighted.as_fn()("1000", "1001").weighted > 0.0);
    }

    #[test]
    fn config_round_trips_through_yaml() {
        let dir = tempfile::tempdir().unwrap();
        write_examples(dir.path());
        let path = dir.path().join("run.yaml");
        std::fs::write(&path, minimal_yaml()).unwrap();
        let config = RunConfig::load(&path).unwrap();
        let yaml = serde_yaml::to_string(&config).unwrap();
        let reparsed: RunConfig = serde_yaml::from_str(&yaml).unwrap();
        assert_eq!(reparsed, config);
    }
}
