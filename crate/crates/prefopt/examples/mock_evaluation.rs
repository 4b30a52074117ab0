//! Hermetic evaluation with the rule-table mock backend.
//!
//! Rules declare what the compiler, test runner, gas meter, and analyzer
//! would have said; the harness turns them into implication-enforced eval
//! records and the validator confirms the result is consistent.
//!
//! ```text
//! cargo run --example mock_evaluation
//! ```

use prefopt::harness::{evaluate_all, MockBackend, MockRule};
use prefopt::model::{validate_dataset, Candidate, Category, Finding, Problem, Severity};

fn rule(candidate_id: &str, compiled: bool, passed: bool, gas: Option<u64>) -> (usize, MockRule) {
    (
        0,
        MockRule {
            candidate_id: Some(candidate_id.to_string()),
            content_sha256: None,
            compiled,
            passed,
            gas,
            findings: Vec::new(),
        },
    )
}

fn main() {
    let problems = vec![Problem {
        id: "vault-withdraw".to_string(),
        prompt: "Write withdraw() guarded against reentrancy".to_string(),
        reference_gas: Some(40_000),
        category: Category::Unassigned,
    }];
    let candidates: Vec<Candidate> = (1..=4)
        .map(|i| Candidate {
            id: format!("cand-{i}"),
            problem_id: "vault-withdraw".to_string(),
            model_id: "gen-demo".to_string(),
            source: format!("contract V{i} {{ function withdraw() external {{ }} }}"),
        })
        .collect();

    let mut rules = vec![
        rule("cand-1", true, true, Some(38_500)),
        rule("cand-2", true, true, Some(41_200)),
        rule("cand-3", true, false, None),
        rule("cand-4", false, false, None),
    ];
    // cand-2 additionally trips the reentrancy detector.
    rules[1].1.findings.push(Finding {
        detector: "reentrancy-eth".to_string(),
        severity: Severity::High,
    });

    let backend = MockBackend::from_rules(rules, "inline-rules").unwrap();
    let records = evaluate_all(&problems, &candidates, &backend).unwrap();

    println!("{:<8} {:>8} {:>6} {:>8} {:>9}", "id", "compiled", "passed", "gas", "findings");
    for r in &records {
        println!(
            "{:<8} {:>8} {:>6} {:>8} {:>9}",
            r.candidate_id,
            r.compiled,
            r.passed,
            r.gas.map_or("-".to_string(), |g| g.to_string()),
            r.findings.len()
        );
    }

    let report = validate_dataset(&problems, &candidates, &records);
    println!("\nvalidation: {report}");
}
