//! Golden answer-scoring pairs with frozen per-tolerance expectations.
//!
//! `EXPECTED` was computed by the reference scorer in `oracle.rs` (see the
//! `freeze_golden_table` generator) and then frozen here. The acceptance
//! suite asserts that BOTH the oracle and the production scorer reproduce
//! these exact outcomes, so a regression in either route fails loudly.

/// (ground truth, prediction) pairs exercising every matching rule:
/// unit normalization, year filtering, hybrid text+number answers,
/// multi-number lists, parenthetical stripping, quotes, signs, percents,
/// thousands separators, tolerance bands, and the zero rule.
pub const PAIRS: &[(&str, &str)] = &[
    // unit normalization
    ("3.5 million", "3,500,000"),
    ("3.5 million", "3,450,000"),
    ("2 billion", "2,000,000,000"),
    ("1.2 trillion", "1,200,000,000,000"),
    ("7 million", "7.1 million"),
    ("450", "approximately 450 million"),
    ("3.5 million", "3.5"),
    ("$5.3 billion", "5,300,000,000 dollars"),
    ("1.05 billion", "1,050,000,000"),
    ("3.5 million", "3500000.0"),
    ("3.5 million", "the total (3,500,000) rose"),
    // year filtering
    ("512", "reported in 2023, total 512"),
    ("512", "reported in 2023"),
    ("1977", "1977"),
    ("1977", "in 1977"),
    ("2050", "2,050"),
    ("515", "the 2021 figure was 515"),
    ("42", "answer: 1985"),
    ("1950.5", "1950.5"),
    ("2019, 2021", "2019 and 2021"),
    ("512, 640", "In 2020: 512; in 2021: 640"),
    // hybrid text + numbers
    ("March 1977", "It was March 1977"),
    ("March 1977", "March of 1978"),
    ("March 1977", "April 1977"),
    ("March 1977", "1977"),
    ("March 1977 (Q1)", "march 1977"),
    ("deficit of 14 million", "the deficit of 14,000,000 dollars"),
    ("growth was 200 million", "growth was 210 million"),
    ("about 512 million", "512,000,000"),
    ("Q4 2020", "the fourth quarter of 2020"),
    // lists
    ("10, 20, 30", "the values were 10 and 30"),
    ("10, 20, 30", "30, 20, 10"),
    ("5, 10", "5, 5, 10"),
    ("5, 5", "value 5"),
    ("100, 200", "99, 202"),
    ("100, 200", "100, 300"),
    // textual answers, parentheticals, quotes
    ("Paris", "The answer is paris."),
    ("Paris (FR)", "Paris"),
    ("\"Brussels\"", "brussels, belgium"),
    ("New York", "new    york"),
    ("Lisbon", "Lisboa"),
    ("United States", "the united states of america"),
    ("Euro (EUR)", "The euro."),
    ("250 (estimated)", "250"),
    // numeric tolerance bands, zero, signs, percents, separators
    ("100", "104"),
    ("100", "106"),
    ("100", "100.05"),
    ("100", "111"),
    ("0", "0"),
    ("0", "0.0001"),
    ("-42", "-42"),
    ("-42", "42"),
    ("42", "42%"),
    ("1,234.56", "1234.56"),
    ("95%", "95 percent"),
    ("4.5 percent", "4.5%"),
    ("60.6", "60.6%"),
    ("7,000", "7 thousand"),
    ("512", "error"),
    ("42", ""),
    ("8.00", "8"),
];

/// Frozen binary outcomes per pair, one entry per tolerance in
/// `oracle::TAUS` order (0.0, 0.01, 0.025, 0.05, 0.10).
pub const EXPECTED: &[[u8; 5]] = &[
    [1, 1, 1, 1, 1], // "3.5 million" vs "3,500,000"
    [0, 0, 1, 1, 1], // "3.5 million" vs "3,450,000"
    [1, 1, 1, 1, 1], // "2 billion" vs "2,000,000,000"
    [1, 1, 1, 1, 1], // "1.2 trillion" vs "1,200,000,000,000"
    [0, 0, 1, 1, 1], // "7 million" vs "7.1 million"
    [0, 0, 0, 0, 0], // "450" vs "approximately 450 million"
    [0, 0, 0, 0, 0], // "3.5 million" vs "3.5"
    [1, 1, 1, 1, 1], // "$5.3 billion" vs "5,300,000,000 dollars"
    [1, 1, 1, 1, 1], // "1.05 billion" vs "1,050,000,000"
    [1, 1, 1, 1, 1], // "3.5 million" vs "3500000.0"
    [1, 1, 1, 1, 1], // "3.5 million" vs "the total (3,500,000) rose"
    [1, 1, 1, 1, 1], // "512" vs "reported in 2023, total 512"
    [0, 0, 0, 0, 0], // "512" vs "reported in 2023"
    [1, 1, 1, 1, 1], // "1977" vs "1977"
    [1, 1, 1, 1, 1], // "1977" vs "in 1977"
    [1, 1, 1, 1, 1], // "2050" vs "2,050"
    [1, 1, 1, 1, 1], // "515" vs "the 2021 figure was 515"
    [0, 0, 0, 0, 0], // "42" vs "answer: 1985"
    [1, 1, 1, 1, 1], // "1950.5" vs "1950.5"
    [1, 1, 1, 1, 1], // "2019, 2021" vs "2019 and 2021"
    [1, 1, 1, 1, 1], // "512, 640" vs "In 2020: 512; in 2021: 640"
    [1, 1, 1, 1, 1], // "March 1977" vs "It was March 1977"
    [0, 1, 1, 1, 1], // "March 1977" vs "March of 1978"
    [0, 0, 0, 0, 0], // "March 1977" vs "April 1977"
    [0, 0, 0, 0, 0], // "March 1977" vs "1977"
    [1, 1, 1, 1, 1], // "March 1977 (Q1)" vs "march 1977"
    [1, 1, 1, 1, 1], // "deficit of 14 million" vs "the deficit of 14,000,000 dollars"
    [0, 0, 0, 1, 1], // "growth was 200 million" vs "growth was 210 million"
    [0, 0, 0, 0, 0], // "about 512 million" vs "512,000,000"
    [0, 0, 0, 0, 0], // "Q4 2020" vs "the fourth quarter of 2020"
    [0, 0, 0, 0, 0], // "10, 20, 30" vs "the values were 10 and 30"
    [1, 1, 1, 1, 1], // "10, 20, 30" vs "30, 20, 10"
    [1, 1, 1, 1, 1], // "5, 10" vs "5, 5, 10"
    [0, 0, 0, 0, 0], // "5, 5" vs "value 5"
    [0, 1, 1, 1, 1], // "100, 200" vs "99, 202"
    [0, 0, 0, 0, 0], // "100, 200" vs "100, 300"
    [1, 1, 1, 1, 1], // "Paris" vs "The answer is paris."
    [1, 1, 1, 1, 1], // "Paris (FR)" vs "Paris"
    [1, 1, 1, 1, 1], // "\"Brussels\"" vs "brussels, belgium"
    [1, 1, 1, 1, 1], // "New York" vs "new    york"
    [0, 0, 0, 0, 0], // "Lisbon" vs "Lisboa"
    [1, 1, 1, 1, 1], // "United States" vs "the united states of america"
    [1, 1, 1, 1, 1], // "Euro (EUR)" vs "The euro."
    [1, 1, 1, 1, 1], // "250 (estimated)" vs "250"
    [0, 0, 0, 1, 1], // "100" vs "104"
    [0, 0, 0, 0, 1], // "100" vs "106"
    [0, 1, 1, 1, 1], // "100" vs "100.05"
    [0, 0, 0, 0, 0], // "100" vs "111"
    [1, 1, 1, 1, 1], // "0" vs "0"
    [0, 0, 0, 0, 0], // "0" vs "0.0001"
    [1, 1, 1, 1, 1], // "-42" vs "-42"
    [0, 0, 0, 0, 0], // "-42" vs "42"
    [1, 1, 1, 1, 1], // "42" vs "42%"
    [1, 1, 1, 1, 1], // "1,234.56" vs "1234.56"
    [1, 1, 1, 1, 1], // "95%" vs "95 percent"
    [1, 1, 1, 1, 1], // "4.5 percent" vs "4.5%"
    [1, 1, 1, 1, 1], // "60.6" vs "60.6%"
    [0, 0, 0, 0, 0], // "7,000" vs "7 thousand"
    [0, 0, 0, 0, 0], // "512" vs "error"
    [0, 0, 0, 0, 0], // "42" vs ""
    [1, 1, 1, 1, 1], // "8.00" vs "8"
];
