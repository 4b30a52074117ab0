//! Task@k from raw evaluation records.
//!
//! Ten sampled contract implementations for one problem, with uneven
//! outcomes, turned into the whole metric family:
//!
//! ```text
//! cargo run --example task_metrics
//! ```

use prefopt::config::Config;
use prefopt::metrics::{derive_counts, problem_metrics, task_at_k};
use prefopt::model::{Category, EvalRecord, Finding, Problem, Severity};

fn record(id: &str, compiled: bool, passed: bool, gas: Option<u64>, high: bool) -> EvalRecord {
    let findings = if high {
        vec![Finding {
            detector: "reentrancy-eth".to_string(),
            severity: Severity::High,
        }]
    } else {
        Vec::new()
    };
    EvalRecord {
        candidate_id: id.to_string(),
        compiled,
        passed,
        gas,
        findings,
        test_passes: None,
    }
}

fn main() {
    // The estimator itself, on the classic worked example: 5 samples,
    // 2 correct, k = 2 => 1 - C(3,2)/C(5,2) = 0.7.
    let p = task_at_k(5, 2, 2).unwrap();
    println!("task@k(n=5, c=2, k=2) = {p}");
    println!();

    let problem = Problem {
        id: "erc20-transfer".to_string(),
        prompt: "Implement transfer() with allowance checks".to_string(),
        reference_gas: Some(51_000),
        category: Category::Unassigned,
    };

    // Ten samples: 8 compile, 6 pass, 3 of those beat the reference gas,
    // and 4 compiled ones carry no high-severity findings.
    let records = vec![
        record("s01", true, true, Some(48_200), false),
        record("s02", true, true, Some(50_100), false),
        record("s03", true, true, Some(49_700), true),
        record("s04", true, true, Some(53_400), false),
        record("s05", true, true, Some(55_000), true),
        record("s06", true, true, Some(61_250), true),
        record("s07", true, false, None, false),
        record("s08", true, false, None, true),
        record("s09", false, false, None, false),
        record("s10", false, false, None, false),
    ];
    let refs: Vec<&EvalRecord> = records.iter().collect();

    let config = Config::default();
    let counts = derive_counts(&problem, &refs, &config);
    println!(
        "counts: n={} compile={} pass={} gas={} secure={}",
        counts.n, counts.c_compile, counts.c_pass, counts.c_gas, counts.c_secure
    );
    println!();

    println!("{:>3}  {:>9}  {:>9}  {:>9}  {:>9}", "k", "pass@k", "compile@k", "gas@k", "secure@k");
    let metrics = problem_metrics(&problem, &refs, &config).unwrap();
    for row in &metrics.rows {
        println!(
            "{:>3}  {:>9.6}  {:>9.6}  {:>9.6}  {:>9.6}",
            row.k,
            row.pass,
            row.compile,
            row.gas.unwrap_or(f64::NAN),
            row.secure
        );
    }
}
