//! Scaffolding for binary-driven tests: a disposable workspace holding a
//! config file and a small numeric dataset, plus helpers to invoke the
//! compiled CLI inside it.

use std::path::Path;
use std::process::{Command, Output};

/// Path to the compiled CLI binary under test.
pub fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_skillforge")
}

pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    /// Empty workspace with just the standard dataset.
    pub fn new() -> Self {
        let dir = tempfile::tempdir().expect("create workspace");
        std::fs::create_dir_all(dir.path().join("data")).unwrap();
        std::fs::write(dir.path().join("data/examples.jsonl"), dataset_jsonl()).unwrap();
        Self { dir }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    /// Write a mock-backed config as `<name>.yaml`. `repo` and `run_dir`
    /// are workspace-relative; the loop is small and fully deterministic:
    /// the gated skill is admitted on iteration 1 and patience stops the
    /// run on iteration 3.
    pub fn write_mock_config(&self, name: &str, repo: &str, run_dir: &str) {
        let yaml = format!(
            "repository: {repo}\n\
             run_dir: {run_dir}\n\
             dataset:\n\
            \x20 examples: data/examples.jsonl\n\
            \x20 train_fraction: 0.4\n\
            \x20 validation_fraction: 0.2\n\
             backend:\n\
            \x20 kind: mock\n\
            \x20 gate_skill: row-label-check\n\
             loop:\n\
            \x20 max_iterations: 6\n\
            \x20 frontier_capacity: 3\n\
            \x20 batch_size: 4\n\
            \x20 epochs_budget: 3.0\n\
            \x20 patience: 2\n\
            \x20 workers: 2\n\
            \x20 seed: 42\n\
             pin_scored_at: \"2024-01-01T00:00:00Z\"\n"
        );
        std::fs::write(self.path().join(format!("{name}.yaml")), yaml).unwrap();
    }

    /// Invoke the binary with the workspace as working directory.
    pub fn run(&self, args: &[&str]) -> Output {
        Command::new(binary())
            .args(args)
            .current_dir(self.path())
            .output()
            .expect("binary runs")
    }

    /// Invoke and require success, returning stdout.
    pub fn run_ok(&self, args: &[&str]) -> String {
        let output = self.run(args);
        assert!(
            output.status.success(),
            "command {:?} failed with {:?}\nstdout: {}\nstderr: {}",
            args,
            output.status.code(),
            String::from_utf8_lossy(&output.stdout),
            String::from_utf8_lossy(&output.stderr),
        );
        String::from_utf8_lossy(&output.stdout).into_owned()
    }

    pub fn read(&self, rel: &str) -> String {
        std::fs::read_to_string(self.path().join(rel))
            .unwrap_or_else(|e| panic!("read {rel}: {e}"))
    }
}

/// Twenty numeric examples split across two balanced categories.
pub fn dataset_jsonl() -> String {
    let mut out = String::new();
    for i in 0..20 {
        let category = if i % 2 == 0 { "tables" } else { "figures" };
        out.push_str(&format!(
            "{}\n",
            serde_json::json!({
                "id": format!("ex-{i:02}"),
                "question": format!("what is the value of row {i}?"),
                "answer": format!("{}", 100 + i),
                "category": category,
            })
        ));
    }
    out
}
