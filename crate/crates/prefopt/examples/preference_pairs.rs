//! From evaluation records to training pairs.
//!
//! Partitions problem seeds across the three objectives, then builds the
//! pairs one problem contributes under each objective, and finally
//! subsamples them reproducibly.
//!
//! ```text
//! cargo run --example preference_pairs
//! ```

use std::collections::BTreeMap;

use prefopt::model::{EvalRecord, Finding, Severity};
use prefopt::pairs::{build_pairs, partition_seeds, subsample_pairs, Objective};

fn record(id: &str, compiled: bool, passed: bool, gas: Option<u64>, high: bool) -> EvalRecord {
    EvalRecord {
        candidate_id: id.to_string(),
        compiled,
        passed,
        gas,
        findings: if high {
            vec![Finding {
                detector: "tx-origin".to_string(),
                severity: Severity::High,
            }]
        } else {
            Vec::new()
        },
        test_passes: None,
    }
}

fn main() {
    // 1. Assign each problem seed to exactly one objective, so no prompt
    //    leaks across training splits. 50% correctness, 25% security,
    //    25% gas.
    let seeds: Vec<String> = (1..=8).map(|i| format!("problem-{i:02}")).collect();
    let partition = partition_seeds(&seeds, (0.5, 0.25, 0.25), 7).unwrap();
    println!("seed partition (seed=7):");
    for (id, category) in &partition.assignment {
        println!("  {id} -> {category:?}");
    }
    println!();

    // 2. One problem's records: a, b pass (b cheaper); c compiles but
    //    fails; d fails to compile; e passes but trips a high-severity
    //    detector.
    let records = [record("a", true, true, Some(61_000), false),
        record("b", true, true, Some(58_500), false),
        record("c", true, false, None, false),
        record("d", false, false, None, false),
        record("e", true, true, Some(64_000), true)];
    let refs: Vec<&EvalRecord> = records.iter().collect();
    let scores: BTreeMap<&str, f64> =
        [("a", 0.9), ("b", 0.8), ("c", 0.3), ("d", 0.1), ("e", 0.7)]
            .into_iter()
            .collect();

    for objective in [Objective::Correctness, Objective::Gas, Objective::Security] {
        let pairs = build_pairs(
            "problem-01",
            &refs,
            &scores,
            objective,
            1e-6,
            Severity::High,
        )
        .unwrap();
        println!("{objective:?}: {} pairs", pairs.len());
        for pair in &pairs {
            println!("  {}", pair.pair_id);
        }
    }
    println!();

    // 3. Reproducible subsampling, stratified by objective.
    let mut all = Vec::new();
    for objective in [Objective::Correctness, Objective::Gas, Objective::Security] {
        all.extend(
            build_pairs("problem-01", &refs, &scores, objective, 1e-6, Severity::High).unwrap(),
        );
    }
    let half = subsample_pairs(&all, 0.5, 13).unwrap();
    println!("subsample fraction=0.5 seed=13 keeps {} of {}:", half.len(), all.len());
    for pair in &half {
        println!("  {}", pair.pair_id);
    }
}
