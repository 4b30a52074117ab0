//! Shared data model: problems, candidates, evaluation records, and the
//! dataset-level validation that every downstream stage relies on.
//!
//! All types are immutable values after construction; nothing in this module
//! mutates shared state, so instances can be handed to concurrent workers
//! freely.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Static-analysis severity level. The enum is closed: unknown severities in
/// ingested files are rejected at parse time instead of being mapped to a
/// guess.
///
/// Ordering is `Info < Low < Medium < High`, so `severity >= threshold`
/// expresses "at least as severe as".
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Low,
    Medium,
    High,
}

impl Severity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Severity::Info => "info",
            Severity::Low => "low",
            Severity::Medium => "medium",
            Severity::High => "high",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Severity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "info" => Ok(Severity::Info),
            "low" => Ok(Severity::Low),
            "medium" => Ok(Severity::Medium),
            "high" => Ok(Severity::High),
            other => Err(format!(
                "unknown severity '{other}' (expected one of: info, low, medium, high)"
            )),
        }
    }
}

/// Optimization category a problem seed is assigned to. Problems load as
/// `Unassigned`; partitioning assigns the real category later.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Correctness,
    Security,
    Gas,
    #[default]
    Unassigned,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Category::Correctness => "correctness",
            Category::Security => "security",
            Category::Gas => "gas",
            Category::Unassigned => "unassigned",
        };
        f.write_str(s)
    }
}

/// A generation task: natural-language spec plus the gas cost of the
/// reference implementation, when one exists.
///
/// `reference_gas` is an explicit `Option`, never 0: a problem without a
/// reference is excluded from Gas@k aggregation rather than scored against a
/// fake baseline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    pub id: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_gas: Option<u64>,
    #[serde(default)]
    pub category: Category,
}

/// One model-produced solution for a problem. `source` is opaque text; no
/// parsing or AST work happens anywhere in this crate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Candidate {
    pub id: String,
    pub problem_id: String,
    pub model_id: String,
    pub source: String,
}

/// A single static-analysis finding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Finding {
    pub detector: String,
    pub severity: Severity,
}

/// One unit test of a problem, for multi-test ranking graphs
/// (tests.jsonl). Single-test datasets don't need this file; the ranker
/// synthesizes one suite node per problem instead.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestCase {
    pub test_id: String,
    pub problem_id: String,
}

/// Per-candidate evaluation facts.
///
/// Invariants (checked by [`validate_dataset`], restored by
/// [`enforce_implications`]):
/// - `passed` implies `compiled`
/// - `gas` present implies `passed` (gas is measured by executing tests)
/// - not `compiled` implies `findings` empty (analysis needs compilable code)
///
/// `test_passes` is the extended schema for multi-test ranking fixtures: a
/// per-test pass bit keyed by test id. Absent for the common single-test case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRecord {
    pub candidate_id: String,
    pub compiled: bool,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas: Option<u64>,
    #[serde(default)]
    pub findings: Vec<Finding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_passes: Option<BTreeMap<String, bool>>,
}

/// Returns a copy of `record` with the implication chain restored:
/// `passed` is forced false when `compiled` is false, `gas` is cleared when
/// `passed` is false, and `findings` are cleared when `compiled` is false.
///
/// Downstream counts then satisfy `c_gas <= c_pass <= c_compile` by
/// construction.
pub fn enforce_implications(record: &EvalRecord) -> EvalRecord {
    let mut out = record.clone();
    if !out.compiled {
        out.passed = false;
        out.findings.clear();
    }
    if !out.passed {
        out.gas = None;
    }
    out
}

/// A single dataset invariant violation. Violations are data, not failures:
/// [`validate_dataset`] reports all of them instead of stopping at the first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateProblemId { problem_id: String },
    DuplicateCandidateId { candidate_id: String },
    DanglingProblemRef { candidate_id: String, problem_id: String },
    DanglingCandidateRef { candidate_id: String },
    DuplicateEvalRecord { candidate_id: String },
    PassedWithoutCompile { candidate_id: String },
    GasWithoutPass { candidate_id: String },
    FindingsWithoutCompile { candidate_id: String },
}

impl Violation {
    /// True for the three `EvalRecord` implication invariants, the ones
    /// [`enforce_implications`] repairs.
    pub fn is_implication(&self) -> bool {
        matches!(
            self,
            Violation::PassedWithoutCompile { .. }
                | Violation::GasWithoutPass { .. }
                | Violation::FindingsWithoutCompile { .. }
        )
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateProblemId { problem_id } => {
                write!(f, "duplicate problem id '{problem_id}'")
            }
            Violation::DuplicateCandidateId { candidate_id } => {
                write!(f, "duplicate candidate id '{candidate_id}'")
            }
            Violation::DanglingProblemRef {
                candidate_id,
                problem_id,
            } => write!(
                f,
                "candidate '{candidate_id}' references unknown problem '{problem_id}'"
            ),
            Violation::DanglingCandidateRef { candidate_id } => {
                write!(f, "eval record references unknown candidate '{candidate_id}'")
            }
            Violation::DuplicateEvalRecord { candidate_id } => {
                write!(f, "more than one eval record for candidate '{candidate_id}'")
            }
            Violation::PassedWithoutCompile { candidate_id } => {
                write!(f, "candidate '{candidate_id}' passed tests without compiling")
            }
            Violation::GasWithoutPass { candidate_id } => {
                write!(f, "candidate '{candidate_id}' has gas but did not pass tests")
            }
            Violation::FindingsWithoutCompile { candidate_id } => write!(
                f,
                "candidate '{candidate_id}' has findings but did not compile"
            ),
        }
    }
}

/// Everything [`validate_dataset`] found. Empty when the dataset is clean.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_implication_violations(&self) -> bool {
        self.violations.iter().any(Violation::is_implication)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("ok: no violations");
        }
        for v in &self.violations {
            writeln!(f, "violation: {v}")?;
        }
        Ok(())
    }
}

/// Checks every dataset invariant and returns the full list of violations.
/// Inputs are not mutated.
///
/// Candidate ids are required to be globally unique (not just per problem):
/// eval records and quality scores reference candidates by id alone, so a
/// reused id would make those references ambiguous.
pub fn validate_dataset(
    problems: &[Problem],
    candidates: &[Candidate],
    evals: &[EvalRecord],
) -> ValidationReport {
    let mut violations = Vec::new();

    let mut problem_ids = BTreeSet::new();
    for p in problems {
        if !problem_ids.insert(p.id.as_str()) {
            violations.push(Violation::DuplicateProblemId {
                problem_id: p.id.clone(),
            });
        }
    }

    let mut candidate_ids = BTreeSet::new();
    for c in candidates {
        if !candidate_ids.insert(c.id.as_str()) {
            violations.push(Violation::DuplicateCandidateId {
                candidate_id: c.id.clone(),
            });
        }
        if !problem_ids.contains(c.problem_id.as_str()) {
            violations.push(Violation::DanglingProblemRef {
                candidate_id: c.id.clone(),
                problem_id: c.problem_id.clone(),
            });
        }
    }

    let mut seen_evals = BTreeSet::new();
    for e in evals {
        if !candidate_ids.contains(e.candidate_id.as_str()) {
            violations.push(Violation::DanglingCandidateRef {
                candidate_id: e.candidate_id.clone(),
            });
        }
        if !seen_evals.insert(e.candidate_id.as_str()) {
            violations.push(Violation::DuplicateEvalRecord {
                candidate_id: e.candidate_id.clone(),
            });
        }
        if e.passed && !e.compiled {
            violations.push(Violation::PassedWithoutCompile {
                candidate_id: e.candidate_id.clone(),
            });
        }
        if e.gas.is_some() && !e.passed {
            violations.push(Violation::GasWithoutPass {
                candidate_id: e.candidate_id.clone(),
            });
        }
        if !e.compiled && !e.findings.is_empty() {
            violations.push(Violation::FindingsWithoutCompile {
                candidate_id: e.candidate_id.clone(),
            });
        }
    }

    ValidationReport { violations }
}

/// Groups eval records by the problem their candidate belongs to, in
/// ascending problem-id order. Records whose candidate does not resolve are
/// skipped; run [`validate_dataset`] first to surface those.
pub fn group_evals_by_problem<'a>(
    candidates: &'a [Candidate],
    evals: &'a [EvalRecord],
) -> BTreeMap<&'a str, Vec<&'a EvalRecord>> {
    let candidate_problem: BTreeMap<&str, &str> = candidates
        .iter()
        .map(|c| (c.id.as_str(), c.problem_id.as_str()))
        .collect();
    let mut grouped: BTreeMap<&str, Vec<&EvalRecord>> = BTreeMap::new();
    for e in evals {
        if let Some(problem_id) = candidate_problem.get(e.candidate_id.as_str()) {
            grouped.entry(problem_id).or_default().push(e);
        }
    }
    grouped
}
