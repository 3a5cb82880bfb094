//! Dataset ingestion, categorization, stratified splitting, and
//! without-replacement batch sampling.
//!
//! Examples arrive as JSON lines (`id`, `question`, `answer`, optional
//! `category`). A pluggable [`Categorizer`] assigns one label per example;
//! [`HashCategorizer`] is the deterministic offline fallback. Splitting is
//! stratified per category with largest-remainder rounding and a floor of
//! one example in train and validation for every category that can afford
//! it. Training batches are served round-robin across category pools,
//! cycling through every example before any repeats.
//!
//! All randomness flows through a seed carried in [`SamplerState`] or
//! passed to [`stratified_split`]; equal seeds give byte-identical output.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Label applied when the classifier backend fails after its retries.
pub const UNCATEGORIZED: &str = "uncategorized";

/// Default number of category buckets for the hash fallback classifier.
pub const DEFAULT_CATEGORY_COUNT: usize = 8;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(
        "fractions must be positive and sum below 1 (train {train}, validation {validation})"
    )]
    InvalidFractions { train: f64, validation: f64 },
    #[error("example {id:?} has no category; categorize the dataset first")]
    Uncategorized { id: String },
    #[error("duplicate example id {id:?}")]
    DuplicateId { id: String },
    #[error("example {id:?} has an empty ground truth")]
    EmptyGroundTruth { id: String },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
    #[error("failed to read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
}

/// One supervised example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    /// Stable unique identifier.
    pub id: String,
    pub question: String,
    /// Ground-truth answer; scored fuzzily, never shown to the agents
    /// being evolved.
    #[serde(rename = "answer")]
    pub ground_truth: String,
    /// Category label; `None` until categorization has run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

/// Three disjoint parts of a dataset. Training examples stay grouped in
/// per-category pools for round-robin sampling; validation and test are
/// flat lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplits {
    pub train_pools: BTreeMap<String, Vec<Example>>,
    pub validation: Vec<Example>,
    pub test: Vec<Example>,
}

impl DatasetSplits {
    pub fn train_total(&self) -> usize {
        self.train_pools.values().map(Vec::len).sum()
    }

    /// All training examples, category-major in category order.
    pub fn train_examples(&self) -> impl Iterator<Item = &Example> {
        self.train_pools.values().flatten()
    }

    /// Per-category (train, validation, test) counts for the manifest.
    pub fn per_category_counts(&self) -> BTreeMap<String, SplitCounts> {
        let mut counts: BTreeMap<String, SplitCounts> = BTreeMap::new();
        for (cat, pool) in &self.train_pools {
            counts.entry(cat.clone()).or_default().train = pool.len();
        }
        for ex in &self.validation {
            let cat = ex.category.clone().unwrap_or_default();
            counts.entry(cat).or_default().validation += 1;
        }
        for ex in &self.test {
            let cat = ex.category.clone().unwrap_or_default();
            counts.entry(cat).or_default().test += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

/// Reproducibility record written alongside the three split files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub total_examples: usize,
    pub per_category: BTreeMap<String, SplitCounts>,
}

/// Cursor state of the without-replacement sampler. Plain data so runs
/// can checkpoint it and resume mid-epoch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerState {
    /// Seed the per-epoch pool permutations derive from.
    pub seed: u64,
    /// Completed-reshuffle counter; 0 during the first pass.
    pub epoch: u64,
    /// Next position in each category's permuted pool.
    pub cursors: BTreeMap<String, usize>,
    /// Total examples served across all epochs.
    pub draws_served: u64,
}

impl SamplerState {
    pub fn new(seed: u64) -> Self {
        Self { seed, epoch: 0, cursors: BTreeMap::new(), draws_served: 0 }
    }

    /// Progress in epochs, fractional mid-pass (e.g. 1.5 after serving a
    /// 24-example pool 36 times).
    pub fn fractional_epoch(&self, splits: &DatasetSplits) -> f64 {
        let total = splits.train_total();
        if total == 0 {
            return 0.0;
        }
        self.draws_served as f64 / total as f64
    }
}

/// Assigns exactly one category label to an example.
pub trait Categorizer {
    fn label(&self, example: &Example) -> anyhow::Result<String>;
}

/// Deterministic fallback classifier: FNV-1a hash of the question text
/// into `k` buckets, labeled `category-0` .. `category-{k-1}`.
#[derive(Debug, Clone)]
pub struct HashCategorizer {
    pub k: usize,
}

impl HashCategorizer {
    pub fn new(k: usize) -> Self {
        Self { k: k.max(1) }
    }
}

impl Categorizer for HashCategorizer {
    fn label(&self, example: &Example) -> anyhow::Result<String> {
        let bucket = fnv1a64(example.question.as_bytes()) % self.k as u64;
        Ok(format!("category-{bucket}"))
    }
}

/// Outcome of categorization: relabeled examples plus a summary of how
/// many distinct labels emerged and how many fell back to the reserved
/// label.
#[derive(Debug, Clone)]
pub struct Categorized {
    pub examples: Vec<Example>,
    pub categories: BTreeSet<String>,
    pub fallback_count: usize,
}

/// Label every example with the classifier. Backend failures (after the
/// classifier's own retry policy) degrade to the [`UNCATEGORIZED`] label
/// rather than aborting the run.
pub fn categorize(examples: &[Example], classifier: &dyn Categorizer) -> Categorized {
    let mut out = Vec::with_capacity(examples.len());
    let mut categories = BTreeSet::new();
    let mut fallback_count = 0;
    for example in examples {
        let label = match classifier.label(example) {
            Ok(label) => label,
            Err(_) => {
                fallback_count += 1;
                UNCATEGORIZED.to_owned()
            }
        };
        categories.insert(label.clone());
        out.push(Example { category: Some(label), ..example.clone() });
    }
    Categorized { examples: out, categories, fallback_count }
}

/// Split a categorized dataset three ways, stratified by category.
///
/// Overall targets are `floor(fraction * N)` for train and validation;
/// per-category shares of each target are rounded with the
/// largest-remainder method. Every category with at least two members
/// keeps at least one example in train and one in validation (raising a
/// part above its target when necessary); singleton categories go
/// entirely to train. Everything left over lands in test.
pub fn stratified_split(
    examples: &[Example],
    train_fraction: f64,
    validation_fraction: f64,
    seed: u64,
) -> Result<DatasetSplits, DatasetError> {
    if !(train_fraction > 0.0
        && validation_fraction > 0.0
        && train_fraction + validation_fraction < 1.0)
    {
        return Err(DatasetError::InvalidFractions {
            train: train_fraction,
            validation: validation_fraction,
        });
    }

    let mut by_category: BTreeMap<String, Vec<Example>> = BTreeMap::new();
    for example in examples {
        let Some(category) = &example.category else {
            return Err(DatasetError::Uncategorized { id: example.id.clone() });
        };
        by_category.entry(category.clone()).or_default().push(example.clone());
    }

    let n = examples.len();
    let sizes: BTreeMap<String, usize> =
        by_category.iter().map(|(c, v)| (c.clone(), v.len())).collect();
    let train_target = (train_fraction * n as f64).floor() as usize;
    let val_target = (validation_fraction * n as f64).floor() as usize;
    let mut train_quota = largest_remainder(train_target, &sizes, n);
    let mut val_quota = largest_remainder(val_target, &sizes, n);

    // Representation floors, then cap back so a category never promises
    // more examples than it has. n >= 2 keeps (1, 1) always feasible.
    for (category, &size) in &sizes {
        let t = train_quota.get_mut(category).expect("quota covers every category");
        let v = val_quota.get_mut(category).expect("quota covers every category");
        if size == 1 {
            *t = 1;
            *v = 0;
            continue;
        }
        *t = (*t).max(1);
        *v = (*v).max(1);
        while *t + *v > size {
            if *t > 1 && *t >= *v {
                *t -= 1;
            } else {
                *v -= 1;
            }
        }
    }

    let mut splits = DatasetSplits {
        train_pools: BTreeMap::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for (category, mut members) in by_category {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, &category));
        members.shuffle(&mut rng);
        let t = train_quota[&category];
        let v = val_quota[&category];
        let rest = members.split_off(t + v);
        let val = members.split_off(t);
        splits.train_pools.insert(category, members);
        splits.validation.extend(val);
        splits.test.extend(rest);
    }
    Ok(splits)
}

/// Draw `batch_size` training examples without replacement, round-robin
/// across category pools. When every pool is exhausted the sampler
/// reshuffles all pools and increments the epoch counter, so a batch may
/// straddle an epoch boundary.
///
/// # Panics
///
/// Panics if `batch_size` is zero or the training pools are empty; both
/// violate the sampler's contract.
pub fn sample_batch(
    splits: &DatasetSplits,
    state: &mut SamplerState,
    batch_size: usize,
) -> Vec<Example> {
    assert!(batch_size >= 1, "batch_size must be at least 1");
    assert!(splits.train_total() > 0, "training pools are empty");

    let mut batch = Vec::with_capacity(batch_size);
    while batch.len() < batch_size {
        let mut served_this_cycle = false;
        for (category, pool) in &splits.train_pools {
            if batch.len() == batch_size {
                break;
            }
            let cursor = state.cursors.entry(category.clone()).or_insert(0);
            if *cursor >= pool.len() {
                continue;
            }
            let perm = permutation(state.seed, state.epoch, category, pool.len());
            batch.push(pool[perm[*cursor]].clone());
            *cursor += 1;
            state.draws_served += 1;
            served_this_cycle = true;
        }
        if !served_this_cycle {
            // Every pool is spent: start the next epoch with fresh
            // permutations.
            state.epoch += 1;
            state.cursors.clear();
        }
    }
    batch
}

/// Read a JSON-lines dataset, validating id uniqueness and non-empty
/// ground truths. Blank lines are skipped.
pub fn read_jsonl(path: &Path) -> Result<Vec<Example>, DatasetError> {
    let display = path.display().to_string();
    let file = fs::File::open(path)
        .map_err(|source| DatasetError::Read { path: display.clone(), source })?;
    let mut examples = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line =
            line.map_err(|source| DatasetError::Read { path: display.clone(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let example: Example = serde_json::from_str(&line).map_err(|source| {
            DatasetError::Parse { path: display.clone(), line: idx + 1, source }
        })?;
        if example.ground_truth.trim().is_empty() {
            return Err(DatasetError::EmptyGroundTruth { id: example.id });
        }
        if !seen.insert(example.id.clone()) {
            return Err(DatasetError::DuplicateId { id: example.id });
        }
        examples.push(example);
    }
    Ok(examples)
}

/// Write examples as JSON lines.
pub fn write_jsonl(path: &Path, examples: &[Example]) -> Result<(), DatasetError> {
    let display = path.display().to_string();
    let mut file = fs::File::create(path)
        .map_err(|source| DatasetError::Write { path: display.clone(), source })?;
    for example in examples {
        let line = serde_json::to_string(example).expect("examples serialize");
        writeln!(file, "{line}")
            .map_err(|source| DatasetError::Write { path: display.clone(), source })?;
    }
    Ok(())
}

/// Largest-remainder apportionment of `total` slots across categories in
/// proportion to their sizes. Deterministic: ties break by larger
/// category, then category name.
fn largest_remainder(
    total: usize,
    sizes: &BTreeMap<String, usize>,
    n: usize,
) -> BTreeMap<String, usize> {
    let mut alloc = BTreeMap::new();
    if n == 0 {
        return alloc;
    }
    let mut remainders: Vec<(u128, usize, &String)> = Vec::with_capacity(sizes.len());
    let mut assigned = 0usize;
    for (category, &size) in sizes {
        let exact = total as u128 * size as u128;
        let base = (exact / n as u128) as usize;
        alloc.insert(category.clone(), base);
        assigned += base;
        remainders.push((exact % n as u128, size, category));
    }
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)).then(a.2.cmp(b.2)));
    for (_, _, category) in remainders.into_iter().take(total.saturating_sub(assigned)) {
        *alloc.get_mut(category).expect("just inserted") += 1;
    }
    alloc
}

/// Index permutation for one (seed, epoch, category) pool pass.
fn permutation(seed: u64, epoch: u64, category: &str, len: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, epoch.wrapping_add(1), category));
    let mut indices: Vec<usize> = (0..len).collect();
    indices.shuffle(&mut rng);
    indices
}

fn derive_seed(seed: u64, stream: u64, category: &str) -> u64 {
    let mut bytes = Vec::with_capacity(16 + category.len());
    bytes.extend_from_slice(&seed.to_le_bytes());
    bytes.extend_from_slice(&stream.to_le_bytes());
    bytes.extend_from_slice(category.as_bytes());
    fnv1a64(&bytes)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
