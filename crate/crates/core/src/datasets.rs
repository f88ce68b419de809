//! Bundled example data: twelve assessors ranking twenty potatoes by weight,
//! once by sight only and once after holding each potato, plus the ranking by
//! actual weight.

use crate::io::parse_rank_matrix;
use crate::rank::{ItemCatalog, Ranking};

const VISUAL: &str = include_str!("../data/potato_visual.csv");
const WEIGHING: &str = include_str!("../data/potato_weighing.csv");
const TRUE: &str = include_str!("../data/potato_true.csv");

fn complete(text: &str) -> (ItemCatalog, Vec<Ranking>) {
    let m = parse_rank_matrix(text).expect("bundled data parses");
    let rows = m.complete_rows().expect("bundled data is complete");
    (m.catalog, rows)
}

/// Rankings made by looking at the potatoes.
pub fn potato_visual() -> (ItemCatalog, Vec<Ranking>) {
    complete(VISUAL)
}

/// Rankings made after weighing each potato by hand.
pub fn potato_weighing() -> (ItemCatalog, Vec<Ranking>) {
    complete(WEIGHING)
}

/// Ranking by measured weight (1 = heaviest).
pub fn potato_true() -> Ranking {
    complete(TRUE).1.remove(0)
}

pub fn potato_visual_csv() -> &'static str {
    VISUAL
}

pub fn potato_weighing_csv() -> &'static str {
    WEIGHING
}

pub fn potato_true_csv() -> &'static str {
    TRUE
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        for (catalog, rows) in [potato_visual(), potato_weighing()] {
            assert_eq!(catalog.len(), 20);
            assert_eq!(rows.len(), 12);
        }
        assert_eq!(potato_true().len(), 20);
        assert_eq!(potato_visual().0.label(11), "L");
    }
}
