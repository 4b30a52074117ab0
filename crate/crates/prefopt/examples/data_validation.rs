//! Schema and cross-reference validation for the three input files.
//!
//! Loads a deliberately inconsistent dataset, prints every violation, then
//! shows how implication enforcement repairs records coming from noisy
//! tooling.
//!
//! ```text
//! cargo run --example data_validation
//! ```

use prefopt::model::{
    enforce_implications, validate_dataset, Candidate, Category, EvalRecord, Finding, Problem,
    Severity,
};

fn main() {
    let problems = vec![Problem {
        id: "swap-router".to_string(),
        prompt: "Implement swapExactIn with slippage bounds".to_string(),
        reference_gas: None,
        category: Category::Unassigned,
    }];
    let candidates = vec![
        Candidate {
            id: "r1".to_string(),
            problem_id: "swap-router".to_string(),
            model_id: "gen-a".to_string(),
            source: "contract R1 {}".to_string(),
        },
        // Dangling problem reference.
        Candidate {
            id: "r2".to_string(),
            problem_id: "no-such-problem".to_string(),
            model_id: "gen-a".to_string(),
            source: "contract R2 {}".to_string(),
        },
    ];
    let evals = vec![
        // Passing without compiling, and carrying gas without passing.
        EvalRecord {
            candidate_id: "r1".to_string(),
            compiled: false,
            passed: true,
            gas: Some(12_345),
            findings: vec![Finding {
                detector: "unused-return".to_string(),
                severity: Severity::Low,
            }],
            test_passes: None,
        },
        // Unknown candidate.
        EvalRecord {
            candidate_id: "ghost".to_string(),
            compiled: true,
            passed: false,
            gas: None,
            findings: Vec::new(),
            test_passes: None,
        },
    ];

    let report = validate_dataset(&problems, &candidates, &evals);
    println!("violations found: {}", report.violations.len());
    print!("{report}");

    // The implication chain (passed => compiled, gas => passed,
    // not compiled => no findings) is repairable mechanically: demotion,
    // never promotion.
    let repaired = enforce_implications(&evals[0]);
    println!("\nbefore repair: {:?}", evals[0]);
    println!("after repair:  {repaired:?}");

    let clean = validate_dataset(&problems, &candidates[..1], &[repaired]);
    println!("\nafter repair and dropping the dangling references: {clean}");
}
