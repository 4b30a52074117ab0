//! Deterministic rendering of the human-facing artifacts: metrics.csv,
//! metrics.txt, and report.md. Everything here is pure string building over
//! already-sorted data; no timestamps, no locale, no floating output other
//! than fixed six-decimal formatting.

use crate::loss::LossSummary;
use crate::metrics::{ProblemMetrics, TaskAtK};

fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

fn gas_cell(gas: Option<f64>, empty: &str) -> String {
    gas.map_or_else(|| empty.to_string(), fmt6)
}

/// CSV with one row per (problem, k) plus aggregate rows labeled `ALL`.
/// The gas column is empty for problems excluded from Gas@k (and for the
/// aggregate when every problem is excluded).
pub fn render_metrics_csv(per_problem: &[ProblemMetrics], aggregate: &[TaskAtK]) -> String {
    let mut out = String::from("problem_id,k,pass,compile,gas,secure\n");
    let mut sorted: Vec<&ProblemMetrics> = per_problem.iter().filter(|p| !p.no_data).collect();
    sorted.sort_by(|a, b| a.problem_id.cmp(&b.problem_id));
    for p in sorted {
        for row in &p.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.problem_id,
                row.k,
                fmt6(row.pass),
                fmt6(row.compile),
                gas_cell(row.gas, ""),
                fmt6(row.secure),
            ));
        }
    }
    for row in aggregate {
        out.push_str(&format!(
            "ALL,{},{},{},{},{}\n",
            row.k,
            fmt6(row.pass),
            fmt6(row.compile),
            gas_cell(row.gas, ""),
            fmt6(row.secure),
        ));
    }
    out
}

/// Fixed-width table mirroring the CSV, with `-` for excluded gas cells,
/// one `no data` line per problem without records, and an explicit marker
/// when nothing at all was evaluated.
pub fn render_metrics_txt(per_problem: &[ProblemMetrics], aggregate: &[TaskAtK]) -> String {
    let mut sorted: Vec<&ProblemMetrics> = per_problem.iter().collect();
    sorted.sort_by(|a, b| a.problem_id.cmp(&b.problem_id));
    let idw = sorted
        .iter()
        .map(|p| p.problem_id.len())
        .chain(["problem_id".len(), "ALL".len()])
        .max()
        .unwrap_or(10);

    let mut out = format!(
        "{:<idw$}  {:>3}  {:>8}  {:>8}  {:>8}  {:>8}\n",
        "problem_id", "k", "pass", "compile", "gas", "secure"
    );
    let with_data = sorted.iter().filter(|p| !p.no_data).count();
    if with_data == 0 {
        out.push_str("no data (0 problems evaluated)\n");
        return out;
    }
    for p in &sorted {
        if p.no_data {
            out.push_str(&format!("{:<idw$}  {:>3}  no data\n", p.problem_id, "-"));
            continue;
        }
        for row in &p.rows {
            out.push_str(&format!(
                "{:<idw$}  {:>3}  {:>8}  {:>8}  {:>8}  {:>8}\n",
                p.problem_id,
                row.k,
                fmt6(row.pass),
                fmt6(row.compile),
                gas_cell(row.gas, "-"),
                fmt6(row.secure),
            ));
        }
    }
    for row in aggregate {
        out.push_str(&format!(
            "{:<idw$}  {:>3}  {:>8}  {:>8}  {:>8}  {:>8}\n",
            "ALL",
            row.k,
            fmt6(row.pass),
            fmt6(row.compile),
            gas_cell(row.gas, "-"),
            fmt6(row.secure),
        ));
    }
    out
}

/// Candidate counts before and after each evaluation filter, summed over
/// all problems.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FunnelCounts {
    pub candidates: u64,
    pub compiled: u64,
    pub passed: u64,
    pub secure: u64,
    pub cheaper_than_reference: u64,
}

/// Pair counts per objective, in the presentation order of the dataset
/// table: correctness, security, gas.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairCounts {
    pub correctness: u64,
    pub security: u64,
    pub gas: u64,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.correctness + self.security + self.gas
    }
}

/// Everything the markdown report presents.
#[derive(Debug, Clone)]
pub struct ReportData<'a> {
    pub tool_version: &'a str,
    pub problem_count: usize,
    pub funnel: FunnelCounts,
    pub pairs: PairCounts,
    pub aggregate: &'a [TaskAtK],
    /// Problems that contributed to the aggregate.
    pub problems_with_data: usize,
    pub excluded_from_gas: &'a [String],
    pub no_data_problems: &'a [String],
    pub loss: &'a LossSummary,
}

/// Renders report.md: dataset funnel, pair counts with a bolded total,
/// aggregate Task@k table, Gas@k exclusions, and the loss summary with both
/// means and sums.
pub fn render_report(d: &ReportData) -> String {
    let mut out = String::new();
    out.push_str("# Preference dataset report\n\n");
    out.push_str(&format!("Tool version: {}\n\n", d.tool_version));

    out.push_str("## Dataset funnel\n\n");
    out.push_str("| Stage | Count |\n| --- | ---: |\n");
    out.push_str(&format!("| Problems | {} |\n", d.problem_count));
    out.push_str(&format!("| Candidates evaluated | {} |\n", d.funnel.candidates));
    out.push_str(&format!("| Compiled | {} |\n", d.funnel.compiled));
    out.push_str(&format!("| Passed tests | {} |\n", d.funnel.passed));
    out.push_str(&format!("| Secure | {} |\n", d.funnel.secure));
    out.push_str(&format!(
        "| Cheaper than reference | {} |\n\n",
        d.funnel.cheaper_than_reference
    ));

    out.push_str("## Preference pairs\n\n");
    out.push_str("| Objective | Pairs |\n| --- | ---: |\n");
    out.push_str(&format!("| Correctness | {} |\n", d.pairs.correctness));
    out.push_str(&format!("| Security | {} |\n", d.pairs.security));
    out.push_str(&format!("| Gas | {} |\n", d.pairs.gas));
    out.push_str(&format!("| **Total** | **{}** |\n\n", d.pairs.total()));

    out.push_str(&format!(
        "## Task@k (aggregate over {} problem{})\n\n",
        d.problems_with_data,
        if d.problems_with_data == 1 { "" } else { "s" }
    ));
    if d.aggregate.is_empty() {
        out.push_str("no data\n\n");
    } else {
        out.push_str("| k | Pass@k | Compile@k | Gas@k | Secure@k |\n");
        out.push_str("| ---: | ---: | ---: | ---: | ---: |\n");
        for row in d.aggregate {
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} |\n",
                row.k,
                fmt6(row.pass),
                fmt6(row.compile),
                gas_cell(row.gas, "-"),
                fmt6(row.secure),
            ));
        }
        out.push('\n');
    }

    if !d.excluded_from_gas.is_empty() {
        out.push_str(&format!(
            "Problems excluded from Gas@k (no reference gas): {}\n\n",
            d.excluded_from_gas.join(", ")
        ));
    }
    if !d.no_data_problems.is_empty() {
        out.push_str(&format!(
            "Problems with no evaluated candidates: {}\n\n",
            d.no_data_problems.join(", ")
        ));
    }

    out.push_str("## Loss summary\n\n");
    out.push_str(&format!("Pairs scored: {}\n\n", d.loss.count));
    out.push_str("| Term | Mean | Sum |\n| --- | ---: | ---: |\n");
    out.push_str(&format!(
        "| DPO loss | {} | {} |\n",
        fmt6(d.loss.mean_l_dpo),
        fmt6(d.loss.sum_l_dpo)
    ));
    out.push_str(&format!(
        "| Extra reward | {} | {} |\n",
        fmt6(d.loss.mean_r_extra),
        fmt6(d.loss.sum_r_extra)
    ));
    out.push_str(&format!(
        "| Total loss | {} | {} |\n",
        fmt6(d.loss.mean_l_total),
        fmt6(d.loss.sum_l_total)
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::metrics::{problem_metrics, MetricCounts};
    use crate::model::{Category, EvalRecord, Problem};

    fn sample_metrics() -> (Vec<ProblemMetrics>, Vec<TaskAtK>) {
        let config = Config {
            k_values: vec![1, 2],
            samples_per_problem: 2,
            ..Config::default()
        };
        let problem = Problem {
            id: "p1".into(),
            prompt: "x".into(),
            reference_gas: None,
            category: Category::Unassigned,
        };
        let records = [EvalRecord {
                candidate_id: "a".into(),
                compiled: true,
                passed: true,
                gas: None,
                findings: Vec::new(),
                test_passes: None,
            },
            EvalRecord {
                candidate_id: "b".into(),
                compiled: false,
                passed: false,
                gas: None,
                findings: Vec::new(),
                test_passes: None,
            }];
        let refs: Vec<&EvalRecord> = records.iter().collect();
        let m = problem_metrics(&problem, &refs, &config).unwrap();
        let agg = crate::metrics::aggregate_rows(std::slice::from_ref(&m), &config.k_values);
        (vec![m], agg)
    }

    #[test]
    fn csv_layout_and_exclusion() {
        let (per, agg) = sample_metrics();
        let csv = render_metrics_csv(&per, &agg);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "problem_id,k,pass,compile,gas,secure");
        assert_eq!(lines[1], "p1,1,0.500000,0.500000,,0.500000");
        assert_eq!(lines[2], "p1,2,1.000000,1.000000,,1.000000");
        assert!(lines[3].starts_with("ALL,1,"));
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn txt_marks_missing_gas_and_no_data() {
        let (mut per, agg) = sample_metrics();
        per.push(ProblemMetrics {
            problem_id: "p2".into(),
            counts: MetricCounts {
                n: 0,
                c_compile: 0,
                c_pass: 0,
                c_gas: 0,
                c_secure: 0,
                gas_excluded: true,
            },
            rows: Vec::new(),
            no_data: true,
        });
        let txt = render_metrics_txt(&per, &agg);
        assert!(txt.contains('-'), "{txt}");
        assert!(txt.contains("no data"), "{txt}");
        assert!(txt.contains("ALL"), "{txt}");
    }

    #[test]
    fn txt_empty_dataset_marker() {
        let txt = render_metrics_txt(&[], &[]);
        assert!(txt.contains("no data (0 problems evaluated)"), "{txt}");
    }

    #[test]
    fn report_has_bold_total_and_loss_rows() {
        let (per, agg) = sample_metrics();
        let loss = LossSummary {
            count: 3,
            sum_l_dpo: 2.1,
            mean_l_dpo: 0.7,
            sum_r_extra: 0.3,
            mean_r_extra: 0.1,
            sum_l_total: 1.95,
            mean_l_total: 0.65,
        };
        let excluded = vec!["p1".to_string()];
        let d = ReportData {
            tool_version: "0.1.0",
            problem_count: 1,
            funnel: FunnelCounts {
                candidates: 2,
                compiled: 1,
                passed: 1,
                secure: 1,
                cheaper_than_reference: 0,
            },
            pairs: PairCounts {
                correctness: 5,
                security: 2,
                gas: 1,
            },
            aggregate: &agg,
            problems_with_data: per.len(),
            excluded_from_gas: &excluded,
            no_data_problems: &[],
            loss: &loss,
        };
        let md = render_report(&d);
        assert!(md.contains("| **Total** | **8** |"), "{md}");
        assert!(md.contains("| Correctness | 5 |"), "{md}");
        assert!(md.contains("excluded from Gas@k"), "{md}");
        assert!(md.contains("| DPO loss | 0.700000 | 2.100000 |"), "{md}");
        assert!(md.contains("| Total loss | 0.650000 | 1.950000 |"), "{md}");
        assert!(md.contains("| k | Pass@k | Compile@k | Gas@k | Secure@k |"), "{md}");
    }
}
