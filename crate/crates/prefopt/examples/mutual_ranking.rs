//! Mutual validation between candidate programs and candidate tests.
//!
//! Four implementations and three test suites vote for each other: a test
//! endorses every implementation it passes, an implementation endorses
//! every test that passes it. Power iteration turns the votes into scores.
//!
//! ```text
//! cargo run --example mutual_ranking
//! ```

use prefopt::config::RankMode;
use prefopt::ranker::{rank, BipartiteLinks};

fn main() {
    let candidates: Vec<String> = ["impl_a", "impl_b", "impl_c", "impl_d"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let tests: Vec<String> = ["test_basic", "test_overflow", "test_fuzz"]
        .iter()
        .map(|s| s.to_string())
        .collect();

    // Which (test, implementation) pairs agreed. impl_a passes everything,
    // impl_d passes nothing and stays isolated.
    let links: Vec<(String, String)> = [
        ("test_basic", "impl_a"),
        ("test_basic", "impl_b"),
        ("test_basic", "impl_c"),
        ("test_overflow", "impl_a"),
        ("test_overflow", "impl_b"),
        ("test_fuzz", "impl_a"),
    ]
    .iter()
    .map(|(t, c)| (t.to_string(), c.to_string()))
    .collect();

    let graph = BipartiteLinks::new(candidates, tests, &links).unwrap();

    for mode in [RankMode::Stochastic, RankMode::Literal] {
        println!("mode = {mode:?}, damping = 0.85, 10 iterations");
        let mut entries = rank(&graph, 0.85, 10, mode);
        entries.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
        for entry in &entries {
            println!("  {:<14} {:>12.8}", entry.node_id, entry.score);
        }
        println!();
    }

    // With zero damping nothing propagates: every node keeps its prior.
    let frozen = rank(&graph, 0.0, 10, RankMode::Stochastic);
    assert!(frozen.iter().all(|e| e.score == 1.0));
    println!("damping = 0 keeps every score at the 1.0 prior (fixed point)");
}
