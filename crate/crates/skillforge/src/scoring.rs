//! Deterministic fuzzy answer scorer.
//!
//! Grading is binary at any single relative tolerance `tau`. Numbers are
//! pulled out of both strings with their local context, unit keywords
//! (million / billion / trillion) scale the parsed magnitude, and
//! incidental year mentions are filtered from predictions. Ground truths
//! that mix words and numbers must match on both; list answers must have
//! every constituent value recovered. Purely textual answers fall back to
//! case-insensitive substring containment after normalization.
//!
//! The training loop uses [`multi_tolerance_score`], a weighted average of
//! the binary outcome over five tolerance levels with weights
//! `w(tau) = 1/(1 + 20*tau)`; a weighted score below 0.8 flags the example
//! as a failure.
//!
//! Everything here is a pure function over immutable inputs; calls are
//! safe from any number of concurrent workers.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// The five tolerance levels of the weighted training-loop score.
pub const MULTI_TOLERANCE_TAUS: [f64; 5] = [0.0, 0.01, 0.025, 0.05, 0.10];

/// The five tolerance columns of the reporting accuracy table
/// (0.00%, 0.10%, 1.00%, 5.00%, 10.00%) — a tighter ladder than the
/// training-loop set above.
pub const EVAL_TABLE_TAUS: [f64; 5] = [0.0, 0.001, 0.01, 0.05, 0.10];

/// Weighted score below this value flags the example as a failure.
pub const FAILURE_THRESHOLD: f64 = 0.8;

/// Characters of context captured on each side of an extracted number.
const CONTEXT_WINDOW: usize = 20;

/// Words removed before deciding whether a string carries significant
/// non-numeric text, and before collecting hybrid key tokens.
const UNIT_WORDS: &[&str] = &[
    "million", "billion", "trillion", "thousand", "percent", "dollar", "usd",
];

/// A number extracted from answer text, unit-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedNumber {
    /// Parsed raw value times the unit multiplier.
    pub base_value: f64,
    /// The digits exactly as they appeared.
    pub raw_text: String,
    /// Up to 20 characters on each side of the match, plus the match.
    pub context: String,
    /// One of 1, 1e6, 1e9, 1e12.
    pub unit_multiplier: f64,
    /// Character offset of the match start.
    pub position: usize,
}

/// A tolerance and its weight in the multi-tolerance average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceLevel {
    pub tau: f64,
    pub weight: f64,
}

impl ToleranceLevel {
    /// Weight `1/(1 + 20*tau)`: 1 at tau=0, 1/3 at tau=0.10.
    pub fn new(tau: f64) -> Self {
        Self { tau, weight: 1.0 / (1.0 + 20.0 * tau) }
    }
}

/// Which matching path graded the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    Numeric,
    Textual,
    Hybrid,
    List,
}

/// Outcome of grading at a single tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResult {
    /// Exactly 0.0 or 1.0.
    pub binary: f64,
    /// Ground-truth numbers that found a distinct prediction match.
    pub matched_numbers: usize,
    pub match_kind: MatchKind,
}

/// Outcome of grading across all five tolerance levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiToleranceScore {
    /// `sum(w(tau) * s(tau)) / sum(w(tau))`, in [0, 1].
    pub weighted: f64,
    /// Binary outcome per level, ascending tau.
    pub per_tolerance: Vec<(ToleranceLevel, f64)>,
    /// True when `weighted < 0.8`.
    pub is_failure: bool,
}

impl MultiToleranceScore {
    /// All-miss score, assigned to answers that never materialized (e.g.
    /// execution errors).
    pub fn zero() -> Self {
        Self {
            weighted: 0.0,
            per_tolerance: MULTI_TOLERANCE_TAUS
                .iter()
                .map(|&tau| (ToleranceLevel::new(tau), 0.0))
                .collect(),
            is_failure: true,
        }
    }
}

fn number_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // Comma-grouped form first so it wins over a bare prefix.
    RE.get_or_init(|| {
        Regex::new(r"\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:\.\d+)?|\.\d+").expect("static regex")
    })
}

fn is_quote_char(c: char) -> bool {
    matches!(c, '"' | '\'' | '`' | '\u{201c}' | '\u{201d}' | '\u{2018}' | '\u{2019}')
}

/// Remove parenthesized spans. Text inside an unmatched `(` is dropped
/// through the end of the string.
fn strip_parentheticals(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut depth = 0usize;
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            _ if depth == 0 => out.push(c),
            _ => {}
        }
    }
    out
}

/// Text normalization for containment checks: parentheticals and quotes
/// dropped, lowercased, whitespace runs collapsed, ends trimmed.
pub fn normalize(s: &str) -> String {
    strip_parentheticals(s)
        .chars()
        .filter(|c| !is_quote_char(*c))
        .collect::<String>()
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn is_unit_word(token: &str) -> bool {
    let lower = token.to_lowercase();
    let stem = lower.strip_suffix('s').unwrap_or(&lower);
    UNIT_WORDS.contains(&lower.as_str()) || UNIT_WORDS.contains(&stem)
}

/// Alphabetic tokens of the parenthetical-stripped string, minus unit words.
fn key_tokens(s: &str) -> Vec<String> {
    strip_parentheticals(s)
        .split(|c: char| !c.is_alphabetic())
        .filter(|t| !t.is_empty() && !is_unit_word(t))
        .map(str::to_owned)
        .collect()
}

/// At least 3 alphabetic characters remain once unit words, whitespace,
/// and parentheticals are gone.
pub fn has_significant_text(s: &str) -> bool {
    key_tokens(s).iter().map(|t| t.chars().count()).sum::<usize>() >= 3
}

fn is_year_value(v: f64) -> bool {
    (1900.0..=2100.0).contains(&v)
}

fn byte_to_char_offset(text: &str, byte_idx: usize) -> usize {
    text[..byte_idx].chars().count()
}

fn unit_multiplier(following: &str) -> f64 {
    let lower = following.to_lowercase();
    for (word, mult) in [("trillion", 1e12), ("billion", 1e9), ("million", 1e6)] {
        let mut from = 0;
        while let Some(pos) = lower[from..].find(word) {
            let abs = from + pos;
            let preceded_by_alpha =
                lower[..abs].chars().next_back().is_some_and(|c| c.is_alphabetic());
            if !preceded_by_alpha {
                return mult;
            }
            from = abs + word.len();
        }
    }
    1.0
}

/// Pull every numeric token out of `text`, unit-normalized from local
/// context. When `is_ground_truth` is false, values in the 1900..=2100
/// year range are dropped unless the ground-truth hint is itself a year
/// or carries significant non-numeric text. Unparseable fragments are
/// skipped, never fatal.
pub fn extract_numbers(
    text: &str,
    is_ground_truth: bool,
    ground_truth_hint: Option<&str>,
) -> Vec<ExtractedNumber> {
    let chars: Vec<char> = text.chars().collect();
    let matches: Vec<(usize, usize, &str)> = number_regex()
        .find_iter(text)
        .map(|m| {
            (
                byte_to_char_offset(text, m.start()),
                byte_to_char_offset(text, m.end()),
                m.as_str(),
            )
        })
        .collect();

    let mut out = Vec::with_capacity(matches.len());
    for (i, &(start, end, raw)) in matches.iter().enumerate() {
        let Ok(mut value) = raw.replace(',', "").parse::<f64>() else {
            continue;
        };
        // A leading +/- counts as a sign only when it is not glued onto a
        // preceding word or number (so "2020-2023" stays two years).
        if start > 0 && (chars[start - 1] == '-' || chars[start - 1] == '+') {
            let detached = start < 2 || !(chars[start - 2].is_alphanumeric() || chars[start - 2] == '.');
            if detached && chars[start - 1] == '-' {
                value = -value;
            }
        }

        // Unit keyword is taken from the text following the number, cut at
        // the start of the next number so units never bleed backwards.
        let mut follow_end = (end + CONTEXT_WINDOW).min(chars.len());
        if let Some(&(next_start, _, _)) = matches.get(i + 1) {
            follow_end = follow_end.min(next_start);
        }
        let following: String = chars[end..follow_end].iter().collect();
        let multiplier = unit_multiplier(&following);

        let ctx_start = start.saturating_sub(CONTEXT_WINDOW);
        let ctx_end = (end + CONTEXT_WINDOW).min(chars.len());
        out.push(ExtractedNumber {
            base_value: value * multiplier,
            raw_text: raw.to_owned(),
            context: chars[ctx_start..ctx_end].iter().collect(),
            unit_multiplier: multiplier,
            position: start,
        });
    }

    if !is_ground_truth {
        let hint = ground_truth_hint.unwrap_or("");
        let keep_years = hint_is_year(hint) || has_significant_text(hint);
        if !keep_years {
            out.retain(|n| !is_year_value(n.base_value));
        }
    }
    out
}

/// Ground-truth numbers: extracted after dropping parentheticals, so
/// annotations like "(Q1)" do not add spurious values.
fn ground_truth_numbers(gt: &str) -> Vec<ExtractedNumber> {
    extract_numbers(&strip_parentheticals(gt), true, None)
}

fn hint_is_year(gt: &str) -> bool {
    let nums = ground_truth_numbers(gt);
    !nums.is_empty() && nums.iter().all(|n| is_year_value(n.base_value))
}

/// Binary relative-tolerance comparison. A zero ground truth demands an
/// exactly zero prediction at every tolerance.
pub fn score_numeric(gt_value: f64, pred_value: f64, tau: f64) -> f64 {
    let ok = if gt_value == 0.0 {
        pred_value == 0.0
    } else {
        (gt_value - pred_value).abs() / gt_value.abs() <= tau
    };
    if ok { 1.0 } else { 0.0 }
}

/// Binary textual comparison: normalized ground truth contained in the
/// normalized prediction, case-insensitively.
pub fn score_text(gt: &str, pred: &str) -> f64 {
    if normalize(pred).contains(&normalize(gt)) { 1.0 } else { 0.0 }
}

/// Greedy in-order injective assignment of ground-truth numbers to
/// distinct prediction numbers. Returns how many found a match.
fn count_matched(
    gt_nums: &[ExtractedNumber],
    pred_nums: &[ExtractedNumber],
    tau: f64,
) -> usize {
    let mut used = vec![false; pred_nums.len()];
    let mut matched = 0;
    for g in gt_nums {
        for (i, p) in pred_nums.iter().enumerate() {
            if !used[i] && score_numeric(g.base_value, p.base_value, tau) == 1.0 {
                used[i] = true;
                matched += 1;
                break;
            }
        }
    }
    matched
}

/// Grade a prediction against a ground truth at one tolerance.
///
/// Dispatch: both sides numeric goes to the numeric path (lists require
/// every constituent value recovered; ground truths that also carry
/// significant text additionally require every key token to appear in the
/// prediction). Everything else is substring containment.
pub fn score(gt: &str, pred: &str, tau: f64) -> ScoreResult {
    let gt_nums = ground_truth_numbers(gt);
    let pred_nums = extract_numbers(pred, false, Some(gt));

    if gt_nums.is_empty() || pred_nums.is_empty() {
        return ScoreResult {
            binary: score_text(gt, pred),
            matched_numbers: 0,
            match_kind: MatchKind::Textual,
        };
    }

    if has_significant_text(gt) {
        let matched = count_matched(&gt_nums, &pred_nums, tau);
        let pred_norm = normalize(pred);
        let tokens_ok = key_tokens(gt)
            .iter()
            .all(|t| pred_norm.contains(&t.to_lowercase()));
        let ok = matched == gt_nums.len() && tokens_ok;
        return ScoreResult {
            binary: if ok { 1.0 } else { 0.0 },
            matched_numbers: matched,
            match_kind: MatchKind::Hybrid,
        };
    }

    if gt_nums.len() >= 2 {
        let matched = count_matched(&gt_nums, &pred_nums, tau);
        return ScoreResult {
            binary: if matched == gt_nums.len() { 1.0 } else { 0.0 },
            matched_numbers: matched,
            match_kind: MatchKind::List,
        };
    }

    let matched = count_matched(&gt_nums, &pred_nums, tau);
    ScoreResult {
        binary: if matched == 1 { 1.0 } else { 0.0 },
        matched_numbers: matched,
        match_kind: MatchKind::Numeric,
    }
}

/// Grade across all five tolerance levels and compute the weighted score.
pub fn multi_tolerance_score(gt: &str, pred: &str) -> MultiToleranceScore {
    let mut per_tolerance = Vec::with_capacity(MULTI_TOLERANCE_TAUS.len());
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for tau in MULTI_TOLERANCE_TAUS {
        let level = ToleranceLevel::new(tau);
        let binary = score(gt, pred, tau).binary;
        numerator += level.weight * binary;
        denominator += level.weight;
        per_tolerance.push((level, binary));
    }
    let weighted = numerator / denominator;
    MultiToleranceScore {
        weighted,
        per_tolerance,
        is_failure: weighted < FAILURE_THRESHOLD,
    }
}
