//! Evaluation harness: turns candidates into [`EvalRecord`]s.
//!
//! Real compile/test/gas/analysis toolchains live behind the
//! [`EvaluationBackend`] trait; this crate ships two deterministic
//! implementations. `MockBackend` answers from a rule table (keyed by
//! candidate id or source hash) for hermetic tests, and `ReplayBackend`
//! answers from pre-recorded tool output. The security classification rule
//! used by metrics and pair construction also lives here.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::sha256_hex;
use crate::jsonl::{self, JsonlError};
use crate::model::{enforce_implications, Candidate, EvalRecord, Finding, Problem, Severity};

/// True iff no finding is at or above `threshold`. Monotone: adding a
/// finding can only flip the answer from true to false.
pub fn classify_secure(findings: &[Finding], threshold: Severity) -> bool {
    findings.iter().all(|f| f.severity < threshold)
}

/// Maps an external tool's severity string into the closed enum. Matching
/// is case-insensitive because analyzers commonly capitalize ("High",
/// "Informational"); anything outside the table is an error, never a guess.
pub fn map_severity(value: &str) -> Option<Severity> {
    match value.to_ascii_lowercase().as_str() {
        "high" => Some(Severity::High),
        "medium" => Some(Severity::Medium),
        "low" => Some(Severity::Low),
        "info" | "informational" | "optimization" => Some(Severity::Info),
        _ => None,
    }
}

/// One finding as an external tool reports it: severity still a raw string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawFinding {
    pub detector: String,
    pub severity: String,
}

/// One line of raw_results.jsonl: tool output for a single candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawToolResult {
    pub candidate_id: String,
    pub compiler_ok: bool,
    pub tests_passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas_used: Option<u64>,
    #[serde(default)]
    pub analysis_findings: Vec<RawFinding>,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("{path}:{line}: unknown severity '{value}' for detector '{detector}'")]
    UnknownSeverity {
        path: String,
        line: usize,
        value: String,
        detector: String,
    },
    #[error("{path}:{line}: result references unknown candidate '{candidate_id}'")]
    UnknownCandidate {
        path: String,
        line: usize,
        candidate_id: String,
    },
    #[error("{path}:{line}: {message}")]
    Rule {
        path: String,
        line: usize,
        message: String,
    },
    #[error("backend '{backend}' failed on candidate '{candidate_id}': {message}")]
    Backend {
        backend: String,
        candidate_id: String,
        message: String,
    },
    #[error("candidate '{candidate_id}' references unknown problem '{problem_id}'")]
    UnknownProblem {
        candidate_id: String,
        problem_id: String,
    },
}

fn convert_findings(
    raw: &[RawFinding],
    path: &str,
    line: usize,
) -> Result<Vec<Finding>, HarnessError> {
    raw.iter()
        .map(|f| {
            map_severity(&f.severity)
                .map(|severity| Finding {
                    detector: f.detector.clone(),
                    severity,
                })
                .ok_or_else(|| HarnessError::UnknownSeverity {
                    path: path.to_string(),
                    line,
                    value: f.severity.clone(),
                    detector: f.detector.clone(),
                })
        })
        .collect()
}

/// Reads pre-recorded tool output, maps severities, checks candidate
/// references, and returns implication-enforced records sorted by candidate
/// id. Every failure names the file and line.
pub fn ingest_results(
    path: &Path,
    candidates: &[Candidate],
) -> Result<Vec<EvalRecord>, HarnessError> {
    let display = path.display().to_string();
    let known: BTreeMap<&str, ()> = candidates.iter().map(|c| (c.id.as_str(), ())).collect();
    let raw: Vec<(usize, RawToolResult)> = jsonl::read_jsonl_numbered(path)?;
    let mut records = Vec::with_capacity(raw.len());
    for (line, r) in raw {
        if !known.contains_key(r.candidate_id.as_str()) {
            return Err(HarnessError::UnknownCandidate {
                path: display,
                line,
                candidate_id: r.candidate_id,
            });
        }
        let findings = convert_findings(&r.analysis_findings, &display, line)?;
        records.push(enforce_implications(&EvalRecord {
            candidate_id: r.candidate_id,
            compiled: r.compiler_ok,
            passed: r.tests_passed,
            gas: r.gas_used,
            findings,
            test_passes: None,
        }));
    }
    records.sort_by(|a, b| a.candidate_id.cmp(&b.candidate_id));
    Ok(records)
}

/// What a backend knows about one candidate after "running the tools".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendOutcome {
    pub compiled: bool,
    pub passed: bool,
    pub gas: Option<u64>,
    pub findings: Vec<Finding>,
}

/// A deterministic source of evaluation outcomes. Implementations must
/// return identical output for identical `(problem, candidate)` input.
pub trait EvaluationBackend {
    fn name(&self) -> &'static str;
    fn evaluate(&self, problem: &Problem, candidate: &Candidate) -> Result<BackendOutcome, String>;
}

/// One line of a mock rule file. Exactly one of `candidate_id` and
/// `content_sha256` must be present; the latter matches candidates by the
/// SHA-256 of their source text, which lets one rule cover duplicated
/// submissions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_sha256: Option<String>,
    pub compiled: bool,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas: Option<u64>,
    #[serde(default)]
    pub findings: Vec<Finding>,
}

impl MockRule {
    fn outcome(&self) -> BackendOutcome {
        BackendOutcome {
            compiled: self.compiled,
            passed: self.passed,
            gas: self.gas,
            findings: self.findings.clone(),
        }
    }
}

/// Rule-table backend for hermetic tests.
#[derive(Debug, Clone)]
pub struct MockBackend {
    by_id: BTreeMap<String, MockRule>,
    by_hash: BTreeMap<String, MockRule>,
}

impl MockBackend {
    pub fn from_rules(rules: Vec<(usize, MockRule)>, path: &str) -> Result<MockBackend, HarnessError> {
        let mut by_id = BTreeMap::new();
        let mut by_hash = BTreeMap::new();
        for (line, rule) in rules {
            let located = |message: String| HarnessError::Rule {
                path: path.to_string(),
                line,
                message,
            };
            match (&rule.candidate_id, &rule.content_sha256) {
                (Some(id), None) => {
                    if by_id.insert(id.clone(), rule.clone()).is_some() {
                        return Err(located(format!("duplicate rule for candidate '{id}'")));
                    }
                }
                (None, Some(hash)) => {
                    if by_hash.insert(hash.clone(), rule.clone()).is_some() {
                        return Err(located(format!("duplicate rule for content hash '{hash}'")));
                    }
                }
                (Some(_), Some(_)) => {
                    return Err(located(
                        "rule must set candidate_id or content_sha256, not both".to_string(),
                    ))
                }
                (None, None) => {
                    return Err(located(
                        "rule must set candidate_id or content_sha256".to_string(),
                    ))
                }
            }
        }
        Ok(MockBackend { by_id, by_hash })
    }

    pub fn from_file(path: &Path) -> Result<MockBackend, HarnessError> {
        let rules = jsonl::read_jsonl_numbered(path)?;
        MockBackend::from_rules(rules, &path.display().to_string())
    }
}

impl EvaluationBackend for MockBackend {
    fn name(&self) -> &'static str {
        "mock"
    }

    fn evaluate(&self, _problem: &Problem, candidate: &Candidate) -> Result<BackendOutcome, String> {
        if let Some(rule) = self.by_id.get(&candidate.id) {
            return Ok(rule.outcome());
        }
        let hash = sha256_hex(candidate.source.as_bytes());
        if let Some(rule) = self.by_hash.get(&hash) {
            return Ok(rule.outcome());
        }
        Err("no mock rule matches (by id or content hash)".to_string())
    }
}

/// Replays pre-recorded tool output as a backend, so a run mixing real and
/// mock stages uses one code path.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    outcomes: BTreeMap<String, BackendOutcome>,
}

impl ReplayBackend {
    pub fn from_file(path: &Path) -> Result<ReplayBackend, HarnessError> {
        let display = path.display().to_string();
        let raw: Vec<(usize, RawToolResult)> = jsonl::read_jsonl_numbered(path)?;
        let mut outcomes = BTreeMap::new();
        for (line, r) in raw {
            let findings = convert_findings(&r.analysis_findings, &display, line)?;
            let prev = outcomes.insert(
                r.candidate_id.clone(),
                BackendOutcome {
                    compiled: r.compiler_ok,
                    passed: r.tests_passed,
                    gas: r.gas_used,
                    findings,
                },
            );
            if prev.is_some() {
                return Err(HarnessError::Rule {
                    path: display,
                    line,
                    message: format!("duplicate result for candidate '{}'", r.candidate_id),
                });
            }
        }
        Ok(ReplayBackend { outcomes })
    }
}

impl EvaluationBackend for ReplayBackend {
    fn name(&self) -> &'static str {
        "replay"
    }

    fn evaluate(&self, _problem: &Problem, candidate: &Candidate) -> Result<BackendOutcome, String> {
        self.outcomes
            .get(&candidate.id)
            .cloned()
            .ok_or_else(|| "no recorded result for candidate".to_string())
    }
}

/// Evaluates every candidate through the backend and returns
/// implication-enforced records sorted by candidate id. The first backend
/// failure aborts the whole batch (callers write output atomically, so no
/// partial artifact can appear).
pub fn evaluate_all(
    problems: &[Problem],
    candidates: &[Candidate],
    backend: &dyn EvaluationBackend,
) -> Result<Vec<EvalRecord>, HarnessError> {
    let by_id: BTreeMap<&str, &Problem> = problems.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut records = Vec::with_capacity(candidates.len());
    for candidate in candidates {
        let problem =
            by_id
                .get(candidate.problem_id.as_str())
                .ok_or_else(|| HarnessError::UnknownProblem {
                    candidate_id: candidate.id.clone(),
                    problem_id: candidate.problem_id.clone(),
                })?;
        let outcome =
            backend
                .evaluate(problem, candidate)
                .map_err(|message| HarnessError::Backend {
                    backend: backend.name().to_string(),
                    candidate_id: candidate.id.clone(),
                    message,
                })?;
        records.push(enforce_implications(&EvalRecord {
            candidate_id: candidate.id.clone(),
            compiled: outcome.compiled,
            passed: outcome.passed,
            gas: outcome.gas,
            findings: outcome.findings,
            test_passes: None,
        }));
    }
    records.sort_by(|a, b| a.candidate_id.cmp(&b.candidate_id));
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::metrics::derive_counts;
    use crate::model::Category;

    fn problem(id: &str) -> Problem {
        Problem {
            id: id.into(),
            prompt: "spec".into(),
            reference_gas: Some(60_000),
            category: Category::Unassigned,
        }
    }

    fn candidate(id: &str, problem_id: &str, source: &str) -> Candidate {
        Candidate {
            id: id.into(),
            problem_id: problem_id.into(),
            model_id: "m".into(),
            source: source.into(),
        }
    }

    #[test]
    fn classify_secure_rules() {
        let high = Finding {
            detector: "reentrancy-eth".into(),
            severity: Severity::High,
        };
        let info = Finding {
            detector: "naming-convention".into(),
            severity: Severity::Info,
        };
        assert!(!classify_secure(std::slice::from_ref(&high), Severity::High));
        assert!(classify_secure(std::slice::from_ref(&info), Severity::High));
        assert!(classify_secure(&[], Severity::High));
        // Monotone: adding a finding can only remove security.
        assert!(!classify_secure(&[info, high], Severity::High));
    }

    #[test]
    fn severity_mapping_table() {
        assert_eq!(map_severity("high"), Some(Severity::High));
        assert_eq!(map_severity("High"), Some(Severity::High));
        assert_eq!(map_severity("medium"), Some(Severity::Medium));
        assert_eq!(map_severity("low"), Some(Severity::Low));
        assert_eq!(map_severity("Informational"), Some(Severity::Info));
        assert_eq!(map_severity("optimization"), Some(Severity::Info));
        assert_eq!(map_severity("info"), Some(Severity::Info));
        assert_eq!(map_severity("critical"), None);
        assert_eq!(map_severity(""), None);
    }

    #[test]
    fn ingest_maps_and_enforces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("raw_results.jsonl");
        let lines = [
            r#"{"candidate_id":"a","compiler_ok":true,"tests_passed":true,"gas_used":52000,"analysis_findings":[]}"#,
            r#"{"candidate_id":"b","compiler_ok":true,"tests_passed":false,"analysis_findings":[{"detector":"tx-origin","severity":"Informational"}]}"#,
            r#"{"candidate_id":"c","compiler_ok":false,"tests_passed":true,"analysis_findings":[]}"#,
        ];
        std::fs::write(&path, lines.join("\n")).unwrap();
        let candidates = vec![
            candidate("a", "p1", "A"),
            candidate("b", "p1", "B"),
            candidate("c", "p1", "C"),
        ];
        let records = ingest_results(&path, &candidates).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].gas, Some(52_000));
        assert_eq!(records[1].findings[0].severity, Severity::Info);
        // tests_passed without compiler_ok is implication-corrected.
        assert!(!records[2].passed);
        assert!(records[2].gas.is_none());
    }

    #[test]
    fn ingest_rejects_unknown_severity_with_location() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("raw_results.jsonl");
        let lines = [
            r#"{"candidate_id":"a","compiler_ok":true,"tests_passed":false,"analysis_findings":[]}"#,
            r#"{"candidate_id":"b","compiler_ok":true,"tests_passed":false,"analysis_findings":[{"detector":"x","severity":"critical"}]}"#,
        ];
        std::fs::write(&path, lines.join("\n")).unwrap();
        let candidates = vec![candidate("a", "p1", "A"), candidate("b", "p1", "B")];
        let err = ingest_results(&path, &candidates).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":2:"), "{msg}");
        assert!(msg.contains("critical"), "{msg}");
    }

    #[test]
    fn ingest_rejects_unknown_candidate_with_location() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("raw_results.jsonl");
        std::fs::write(
            &path,
            r#"{"candidate_id":"ghost","compiler_ok":true,"tests_passed":false}"#,
        )
        .unwrap();
        let err = ingest_results(&path, &[candidate("a", "p1", "A")]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":1:") && msg.contains("ghost"), "{msg}");
    }

    fn rule_by_id(id: &str, compiled: bool, passed: bool, gas: Option<u64>, high: bool) -> MockRule {
        MockRule {
            candidate_id: Some(id.into()),
            content_sha256: None,
            compiled,
            passed,
            gas,
            findings: if high {
                vec![Finding {
                    detector: "suicidal".into(),
                    severity: Severity::High,
                }]
            } else {
                Vec::new()
            },
        }
    }

    #[test]
    fn mock_backend_reference_example() {
        let backend = MockBackend::from_rules(
            vec![
                (1, rule_by_id("A", true, true, Some(52_000), false)),
                (2, rule_by_id("B", true, false, None, true)),
            ],
            "rules.jsonl",
        )
        .unwrap();
        let problems = vec![problem("p1")];
        let candidates = vec![candidate("A", "p1", "srcA"), candidate("B", "p1", "srcB")];
        let records = evaluate_all(&problems, &candidates, &backend).unwrap();
        let refs: Vec<&EvalRecord> = records.iter().collect();
        let counts = derive_counts(&problems[0], &refs, &Config::default());
        assert_eq!(counts.n, 2);
        assert_eq!(counts.c_compile, 2);
        assert_eq!(counts.c_pass, 1);
        assert_eq!(counts.c_secure, 1);
        assert_eq!(counts.c_gas, 1, "52000 beats the 60000 reference");
    }

    #[test]
    fn mock_backend_matches_by_content_hash() {
        let source = "contract C { function f() public {} }";
        let rule = MockRule {
            candidate_id: None,
            content_sha256: Some(sha256_hex(source.as_bytes())),
            compiled: true,
            passed: true,
            gas: Some(10),
            findings: Vec::new(),
        };
        let backend = MockBackend::from_rules(vec![(1, rule)], "rules.jsonl").unwrap();
        let records = evaluate_all(
            &[problem("p1")],
            &[candidate("X", "p1", source)],
            &backend,
        )
        .unwrap();
        assert!(records[0].passed);
    }

    #[test]
    fn mock_backend_without_rule_names_candidate() {
        let backend = MockBackend::from_rules(vec![], "rules.jsonl").unwrap();
        let err =
            evaluate_all(&[problem("p1")], &[candidate("X", "p1", "s")], &backend).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("'X'"), "{msg}");
    }

    #[test]
    fn malformed_rules_are_located_errors() {
        let both = MockRule {
            candidate_id: Some("A".into()),
            content_sha256: Some("beef".into()),
            compiled: true,
            passed: false,
            gas: None,
            findings: Vec::new(),
        };
        let err = MockBackend::from_rules(vec![(3, both)], "rules.jsonl").unwrap_err();
        assert!(err.to_string().starts_with("rules.jsonl:3:"), "{err}");

        let neither = MockRule {
            candidate_id: None,
            content_sha256: None,
            compiled: true,
            passed: false,
            gas: None,
            findings: Vec::new(),
        };
        assert!(MockBackend::from_rules(vec![(1, neither)], "r").is_err());

        let dup = rule_by_id("A", true, false, None, false);
        assert!(MockBackend::from_rules(vec![(1, dup.clone()), (2, dup)], "r").is_err());
    }

    #[test]
    fn evaluate_all_is_input_order_invariant() {
        let backend = MockBackend::from_rules(
            vec![
                (1, rule_by_id("A", true, true, None, false)),
                (2, rule_by_id("B", true, false, None, false)),
            ],
            "rules.jsonl",
        )
        .unwrap();
        let problems = vec![problem("p1")];
        let fwd = vec![candidate("A", "p1", "a"), candidate("B", "p1", "b")];
        let rev = vec![candidate("B", "p1", "b"), candidate("A", "p1", "a")];
        let r1 = evaluate_all(&problems, &fwd, &backend).unwrap();
        let r2 = evaluate_all(&problems, &rev, &backend).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1[0].candidate_id, "A");
    }

    #[test]
    fn evaluate_all_empty_is_empty() {
        let backend = MockBackend::from_rules(vec![], "r").unwrap();
        assert!(evaluate_all(&[problem("p1")], &[], &backend).unwrap().is_empty());
    }

    #[test]
    fn replay_backend_reads_recorded_results() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("raw_results.jsonl");
        std::fs::write(
            &path,
            r#"{"candidate_id":"A","compiler_ok":true,"tests_passed":true,"gas_used":42000,"analysis_findings":[{"detector":"t","severity":"Low"}]}"#,
        )
        .unwrap();
        let backend = ReplayBackend::from_file(&path).unwrap();
        let records =
            evaluate_all(&[problem("p1")], &[candidate("A", "p1", "s")], &backend).unwrap();
        assert_eq!(records[0].gas, Some(42_000));
        assert_eq!(records[0].findings[0].severity, Severity::Low);
        let err =
            evaluate_all(&[problem("p1")], &[candidate("Z", "p1", "s")], &backend).unwrap_err();
        assert!(err.to_string().contains("'Z'"), "{err}");
    }
}
