//! The Task@k metric family: Pass@k, Compile@k, Gas@k, Secure@k.
//!
//! All four share one estimator: given `n` sampled candidates of which `c`
//! satisfy the property, the probability that at least one of `k` drawn
//! without replacement satisfies it is
//!
//! ```text
//! task@k = 1 - C(n-c, k) / C(n, k)
//! ```
//!
//! computed in product form, `1 - prod_{i=n-c+1..=n} (1 - k/i)`, which avoids
//! factorial overflow and is exact in the boundary cases. The estimator is
//! unbiased over random subsets of size `k`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::config::{Config, SecureScope};
use crate::harness::classify_secure;
use crate::model::{EvalRecord, Problem};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("k must be at least 1")]
    KZero,
    #[error("k={k} exceeds sample count n={n}")]
    KExceedsN { k: u32, n: u32 },
    #[error("success count c={c} exceeds sample count n={n}")]
    CExceedsN { c: u32, n: u32 },
    #[error("problem '{problem_id}': k={k} exceeds evaluated sample count n={n}")]
    KExceedsSamples {
        problem_id: String,
        k: u32,
        n: u32,
    },
}

/// Unbiased estimate of the probability that at least one of `k` samples
/// drawn without replacement from `n` candidates (of which `c` are
/// successes) is a success.
///
/// Returns exactly `1.0` when every size-`k` subset must contain a success
/// (`c > n - k`) and exactly `0.0` when `c == 0`.
pub fn task_at_k(n: u32, c: u32, k: u32) -> Result<f64, MetricsError> {
    if k == 0 {
        return Err(MetricsError::KZero);
    }
    if c > n {
        return Err(MetricsError::CExceedsN { c, n });
    }
    if k > n {
        return Err(MetricsError::KExceedsN { k, n });
    }
    if c > n - k {
        return Ok(1.0);
    }
    let kf = f64::from(k);
    let mut miss = 1.0;
    for i in (n - c + 1)..=n {
        miss *= 1.0 - kf / f64::from(i);
    }
    Ok(1.0 - miss)
}

/// Success counts for one problem's evaluated candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricCounts {
    /// Number of evaluated candidates.
    pub n: u32,
    pub c_compile: u32,
    pub c_pass: u32,
    /// Passing candidates strictly cheaper than the reference. Zero when the
    /// problem has no reference gas; see `gas_excluded`.
    pub c_gas: u32,
    pub c_secure: u32,
    /// True when the problem has no reference gas, so Gas@k is undefined for
    /// it and it must be left out of Gas@k aggregation.
    pub gas_excluded: bool,
}

/// Derives the four success counts from evaluation records.
///
/// Gas success is strict improvement: `gas < reference_gas`. Matching the
/// reference exactly is not an improvement.
pub fn derive_counts(problem: &Problem, records: &[&EvalRecord], config: &Config) -> MetricCounts {
    let n = u32::try_from(records.len()).expect("sample count fits in u32");
    let c_compile = records.iter().filter(|r| r.compiled).count() as u32;
    let c_pass = records.iter().filter(|r| r.passed).count() as u32;
    let (c_gas, gas_excluded) = match problem.reference_gas {
        None => (0, true),
        Some(reference) => (
            records
                .iter()
                .filter(|r| r.passed && r.gas.is_some_and(|g| g < reference))
                .count() as u32,
            false,
        ),
    };
    let threshold = config.severity_threshold;
    let c_secure = records
        .iter()
        .filter(|r| match config.secure_scope {
            SecureScope::Compiled => r.compiled && classify_secure(&r.findings, threshold),
            SecureScope::All => classify_secure(&r.findings, threshold),
        })
        .count() as u32;
    MetricCounts {
        n,
        c_compile,
        c_pass,
        c_gas,
        c_secure,
        gas_excluded,
    }
}

/// The four estimates at a single `k`. `gas` is `None` when the problem (or
/// the whole aggregate) is excluded from Gas@k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskAtK {
    pub k: u32,
    pub pass: f64,
    pub compile: f64,
    pub gas: Option<f64>,
    pub secure: f64,
}

/// Metrics for one problem at every requested `k`. `rows` is empty iff the
/// problem has no evaluated candidates (`no_data`).
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemMetrics {
    pub problem_id: String,
    pub counts: MetricCounts,
    pub rows: Vec<TaskAtK>,
    pub no_data: bool,
}

/// Computes per-problem metrics at each `k` in `k_values`.
///
/// A problem with zero records yields `no_data` instead of an error; a
/// problem with records but fewer than some `k` is an error naming both the
/// offending `k` and the problem.
pub fn problem_metrics(
    problem: &Problem,
    records: &[&EvalRecord],
    config: &Config,
) -> Result<ProblemMetrics, MetricsError> {
    let counts = derive_counts(problem, records, config);
    if counts.n == 0 {
        return Ok(ProblemMetrics {
            problem_id: problem.id.clone(),
            counts,
            rows: Vec::new(),
            no_data: true,
        });
    }
    let mut rows = Vec::with_capacity(config.k_values.len());
    for &k in &config.k_values {
        if k > counts.n {
            return Err(MetricsError::KExceedsSamples {
                problem_id: problem.id.clone(),
                k,
                n: counts.n,
            });
        }
        rows.push(TaskAtK {
            k,
            pass: task_at_k(counts.n, counts.c_pass, k)?,
            compile: task_at_k(counts.n, counts.c_compile, k)?,
            gas: if counts.gas_excluded {
                None
            } else {
                Some(task_at_k(counts.n, counts.c_gas, k)?)
            },
            secure: task_at_k(counts.n, counts.c_secure, k)?,
        });
    }
    Ok(ProblemMetrics {
        problem_id: problem.id.clone(),
        counts,
        rows,
        no_data: false,
    })
}

/// Unweighted mean of per-problem estimates at each `k`, in `k_values`
/// order. Problems without data contribute nothing; the Gas@k mean is over
/// non-excluded problems only and is `None` when every problem is excluded.
/// Returns an empty vector when no problem has data.
pub fn aggregate_rows(per_problem: &[ProblemMetrics], k_values: &[u32]) -> Vec<TaskAtK> {
    let with_data: Vec<&ProblemMetrics> = per_problem.iter().filter(|p| !p.no_data).collect();
    if with_data.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(k_values.len());
    for (idx, &k) in k_values.iter().enumerate() {
        let mut pass = 0.0;
        let mut compile = 0.0;
        let mut secure = 0.0;
        let mut gas_sum = 0.0;
        let mut gas_n = 0u32;
        for p in &with_data {
            let row = &p.rows[idx];
            debug_assert_eq!(row.k, k);
            pass += row.pass;
            compile += row.compile;
            secure += row.secure;
            if let Some(g) = row.gas {
                gas_sum += g;
                gas_n += 1;
            }
        }
        let count = with_data.len() as f64;
        out.push(TaskAtK {
            k,
            pass: pass / count,
            compile: compile / count,
            secure: secure / count,
            gas: (gas_n > 0).then(|| gas_sum / f64::from(gas_n)),
        });
    }
    out
}

/// Convenience map view: `problem_id -> metrics`, in ascending id order.
pub fn metrics_by_problem(per_problem: &[ProblemMetrics]) -> BTreeMap<&str, &ProblemMetrics> {
    per_problem
        .iter()
        .map(|p| (p.problem_id.as_str(), p))
        .collect()
}
