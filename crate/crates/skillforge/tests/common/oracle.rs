//! Brute-force reference scorer used to freeze golden expectations.
//!
//! This is an independent implementation of the answer-matching rules,
//! written as a plain character scanner with no shared code, no regexes,
//! and no cleverness. It exists so the production scorer can be checked
//! against expectations computed by a second route. Keep it dumb; do not
//! "fix" it by importing from the crate under test.

const UNIT_WORDS: &[&str] = &[
    "million", "billion", "trillion", "thousand", "percent", "dollar", "usd",
];

/// One extracted number: final magnitude after unit multiplication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefNumber {
    pub base: f64,
}

fn is_quote(c: char) -> bool {
    matches!(c, '"' | '\'' | '`' | '\u{201c}' | '\u{201d}' | '\u{2018}' | '\u{2019}')
}

/// Drop every parenthesized span; text inside unmatched '(' is dropped to
/// the end of the string.
pub fn strip_parens(s: &str) -> String {
    let mut out = String::new();
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

/// Lowercase, drop quotes and parentheticals, collapse whitespace runs.
pub fn normalize_text(s: &str) -> String {
    let stripped = strip_parens(s);
    let no_quotes: String = stripped.chars().filter(|c| !is_quote(*c)).collect();
    no_quotes
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn alpha_tokens(s: &str) -> Vec<String> {
    let mut toks = Vec::new();
    let mut cur = String::new();
    for c in s.chars() {
        if c.is_alphabetic() {
            cur.push(c);
        } else if !cur.is_empty() {
            toks.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        toks.push(cur);
    }
    toks
}

fn is_unit_word(tok: &str) -> bool {
    let t = tok.to_lowercase();
    let stem = t.strip_suffix('s').unwrap_or(&t);
    UNIT_WORDS.contains(&t.as_str()) || UNIT_WORDS.contains(&stem)
}

/// Non-unit alphabetic tokens of the parenthetical-stripped string.
pub fn content_tokens(s: &str) -> Vec<String> {
    alpha_tokens(&strip_parens(s))
        .into_iter()
        .filter(|t| !is_unit_word(t))
        .collect()
}

/// True when at least 3 alphabetic characters remain after dropping unit
/// words, whitespace, and parentheticals.
pub fn has_significant_text(s: &str) -> bool {
    content_tokens(s).iter().map(|t| t.chars().count()).sum::<usize>() >= 3
}

/// Scan for numeric tokens: optional sign, comma-grouped thousands,
/// optional decimal part. Returns (start_char_index, len, value).
fn scan_numbers(text: &str) -> Vec<(usize, usize, f64)> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut found = Vec::new();
    let mut i = 0usize;
    while i < n {
        let starts_digit = chars[i].is_ascii_digit();
        let starts_dot = chars[i] == '.'
            && i + 1 < n
            && chars[i + 1].is_ascii_digit()
            && (i == 0 || !chars[i - 1].is_ascii_digit());
        if !(starts_digit || starts_dot) {
            i += 1;
            continue;
        }
        let start = i;
        let mut digits = String::new();
        if starts_digit {
            while i < n && chars[i].is_ascii_digit() {
                digits.push(chars[i]);
                i += 1;
            }
            // consume ",ddd" groups only when exactly three digits follow
            loop {
                let group_ok = i < n
                    && chars[i] == ','
                    && chars.get(i + 1).is_some_and(|c| c.is_ascii_digit())
                    && chars.get(i + 2).is_some_and(|c| c.is_ascii_digit())
                    && chars.get(i + 3).is_some_and(|c| c.is_ascii_digit())
                    && !chars.get(i + 4).is_some_and(|c| c.is_ascii_digit());
                if group_ok {
                    digits.push(chars[i + 1]);
                    digits.push(chars[i + 2]);
                    digits.push(chars[i + 3]);
                    i += 4;
                } else {
                    break;
                }
            }
        }
        if i < n && chars[i] == '.' && chars.get(i + 1).is_some_and(|c| c.is_ascii_digit()) {
            digits.push('.');
            i += 1;
            while i < n && chars[i].is_ascii_digit() {
                digits.push(chars[i]);
                i += 1;
            }
        }
        let mut value: f64 = digits.parse().unwrap_or(f64::NAN);
        // sign applies only when not preceded by an alphanumeric or '.'
        if start > 0 && (chars[start - 1] == '-' || chars[start - 1] == '+') {
            let before_sign_ok = start < 2
                || !(chars[start - 2].is_alphanumeric() || chars[start - 2] == '.');
            if before_sign_ok && chars[start - 1] == '-' {
                value = -value;
            }
        }
        if value.is_finite() {
            found.push((start, i - start, value));
        }
    }
    found
}

/// Extract numbers with the unit multiplier taken from the following
/// window (at most 20 characters, cut at the next number).
pub fn extract_raw(text: &str) -> Vec<RefNumber> {
    let chars: Vec<char> = text.chars().collect();
    let scanned = scan_numbers(text);
    let mut out = Vec::new();
    for (idx, &(start, len, value)) in scanned.iter().enumerate() {
        let after_start = start + len;
        let mut after_end = (after_start + 20).min(chars.len());
        if let Some(&(next_start, _, _)) = scanned.get(idx + 1) {
            after_end = after_end.min(next_start);
        }
        let window: String = chars[after_start..after_end].iter().collect();
        let window = window.to_lowercase();
        let mult = if window_has_word(&window, "trillion") {
            1e12
        } else if window_has_word(&window, "billion") {
            1e9
        } else if window_has_word(&window, "million") {
            1e6
        } else {
            1.0
        };
        out.push(RefNumber { base: value * mult });
    }
    out
}

fn window_has_word(window: &str, word: &str) -> bool {
    let mut from = 0;
    while let Some(pos) = window[from..].find(word) {
        let abs = from + pos;
        let prev_alpha = window[..abs].chars().next_back().is_some_and(|c| c.is_alphabetic());
        if !prev_alpha {
            return true;
        }
        from = abs + word.len();
    }
    false
}

fn is_year_value(v: f64) -> bool {
    (1900.0..=2100.0).contains(&v)
}

/// Numbers of the ground-truth string (parentheticals dropped first).
pub fn gt_numbers(gt: &str) -> Vec<RefNumber> {
    extract_raw(&strip_parens(gt))
}

fn hint_is_year(gt: &str) -> bool {
    let nums = gt_numbers(gt);
    !nums.is_empty() && nums.iter().all(|n| is_year_value(n.base))
}

/// Numbers of the prediction, with incidental years removed unless the
/// ground truth is itself a year or carries significant text.
pub fn pred_numbers(pred: &str, gt: &str) -> Vec<RefNumber> {
    let mut nums = extract_raw(pred);
    if !hint_is_year(gt) && !has_significant_text(gt) {
        nums.retain(|n| !is_year_value(n.base));
    }
    nums
}

fn within(gt: f64, pred: f64, tau: f64) -> bool {
    if gt == 0.0 {
        pred == 0.0
    } else {
        (gt - pred).abs() / gt.abs() <= tau
    }
}

/// Greedy in-order injective assignment: every ground-truth number must
/// claim a distinct prediction number within tau.
fn all_matched(gts: &[RefNumber], preds: &[RefNumber], tau: f64) -> bool {
    let mut used = vec![false; preds.len()];
    for g in gts {
        let mut hit = false;
        for (i, p) in preds.iter().enumerate() {
            if !used[i] && within(g.base, p.base, tau) {
                used[i] = true;
                hit = true;
                break;
            }
        }
        if !hit {
            return false;
        }
    }
    true
}

/// Binary reference score at a single tolerance.
pub fn score(gt: &str, pred: &str, tau: f64) -> u8 {
    let gns = gt_numbers(gt);
    let pns = pred_numbers(pred, gt);

    if gns.is_empty() || pns.is_empty() {
        let g = normalize_text(gt);
        let p = normalize_text(pred);
        return u8::from(p.contains(&g));
    }
    if has_significant_text(gt) {
        let numbers_ok = all_matched(&gns, &pns, tau);
        let pred_norm = normalize_text(pred);
        let tokens_ok = content_tokens(gt)
            .iter()
            .all(|t| pred_norm.contains(&t.to_lowercase()));
        return u8::from(numbers_ok && tokens_ok);
    }
    if gns.len() >= 2 {
        return u8::from(all_matched(&gns, &pns, tau));
    }
    u8::from(pns.iter().any(|p| within(gns[0].base, p.base, tau)))
}

/// The five tolerance levels of the weighted training-loop score.
pub const TAUS: [f64; 5] = [0.0, 0.01, 0.025, 0.05, 0.10];

/// Reference weighted multi-tolerance score: weights 1/(1+20*tau),
/// normalized so a perfect answer scores 1.0.
pub fn weighted(gt: &str, pred: &str) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for tau in TAUS {
        let w = 1.0 / (1.0 + 20.0 * tau);
        num += w * f64::from(score(gt, pred, tau));
        den += w;
    }
    num / den
}
