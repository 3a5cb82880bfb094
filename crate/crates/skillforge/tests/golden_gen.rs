//! Generator for the frozen golden table. Run manually:
//!
//! ```text
//! cargo test -p skillforge --test golden_gen -- --ignored --nocapture
//! ```
//!
//! Paste the printed array into `tests/common/golden.rs::EXPECTED` after
//! hand-checking any pair that changed.

mod common;

use common::{golden, oracle};

#[test]
#[ignore = "manual generator; output is frozen in golden.rs"]
fn freeze_golden_table() {
    println!("pub const EXPECTED: &[[u8; 5]] = &[");
    for (gt, pred) in golden::PAIRS {
        let row: Vec<u8> = oracle::TAUS
            .iter()
            .map(|&tau| oracle::score(gt, pred, tau))
            .collect();
        println!(
            "    [{}, {}, {}, {}, {}], // {:?} vs {:?}",
            row[0], row[1], row[2], row[3], row[4], gt, pred
        );
    }
    println!("];");
}
