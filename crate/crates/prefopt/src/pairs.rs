//! Preference-pair construction: seed partitioning into objective
//! categories, per-objective chosen/rejected pairing, and deterministic
//! subsampling.
//!
//! Pairing is cross-product within a problem, never across problems, and the
//! output is always sorted, so construction order can never leak into the
//! artifact bytes.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::classify_secure;
use crate::model::{Category, EvalRecord, Severity};

/// Training objective a pair teaches. The variant order is the canonical
/// sort order used in pairs.jsonl.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Correctness,
    Gas,
    Security,
}

impl Objective {
    pub fn as_str(&self) -> &'static str {
        match self {
            Objective::Correctness => "correctness",
            Objective::Gas => "gas",
            Objective::Security => "security",
        }
    }

    /// The objective trained on problems of a seed category; `None` for
    /// unassigned seeds, which produce no pairs.
    pub fn from_category(category: Category) -> Option<Objective> {
        match category {
            Category::Correctness => Some(Objective::Correctness),
            Category::Gas => Some(Objective::Gas),
            Category::Security => Some(Objective::Security),
            Category::Unassigned => None,
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One chosen/rejected pair with the measurements that justify it.
///
/// Invariants by construction: `chosen != rejected`, both candidates belong
/// to `problem_id`; gas pairs have both gas values with
/// `gas_chosen < gas_rejected`; security pairs have `safe_chosen` and
/// `!safe_rejected`; correctness pairs have a passing chosen and a
/// compiling, non-passing rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferencePair {
    pub pair_id: String,
    pub problem_id: String,
    pub objective: Objective,
    pub chosen: String,
    pub rejected: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas_chosen: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas_rejected: Option<u64>,
    pub safe_chosen: bool,
    pub safe_rejected: bool,
}

impl PreferencePair {
    /// The canonical artifact order: `(problem_id, objective, chosen,
    /// rejected)`.
    pub fn sort_key(&self) -> (&str, Objective, &str, &str) {
        (
            self.problem_id.as_str(),
            self.objective,
            self.chosen.as_str(),
            self.rejected.as_str(),
        )
    }
}

/// Sorts pairs into the canonical artifact order.
pub fn sort_pairs(pairs: &mut [PreferencePair]) {
    pairs.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PairError {
    #[error("no ranking score for candidate '{candidate_id}'")]
    MissingScore { candidate_id: String },
    #[error("proportions must be nonnegative, got ({0}, {1}, {2})")]
    NegativeProportion(f64, f64, f64),
    #[error("proportions sum to {sum}, which exceeds 1")]
    ProportionSum { sum: f64 },
    #[error("fraction must be in (0, 1], got {0}")]
    FractionOutOfRange(f64),
}

fn pair_id(problem_id: &str, objective: Objective, chosen: &str, rejected: &str) -> String {
    format!("{problem_id}::{objective}::{chosen}::{rejected}")
}

/// Builds every preference pair for one problem under one objective.
///
/// `records` are this problem's implication-enforced eval records; `scores`
/// are the ranking scores consulted by the correctness filter (a score gap
/// of at most `epsilon` drops the pair — near-identical rankings carry no
/// preference signal). Gas and security pairing ignore `epsilon`.
///
/// Every pair carries the gas and safety annotations of both sides,
/// whatever the objective, so downstream loss weighting decides what
/// matters.
pub fn build_pairs(
    problem_id: &str,
    records: &[&EvalRecord],
    scores: &BTreeMap<&str, f64>,
    objective: Objective,
    epsilon: f64,
    severity_threshold: Severity,
) -> Result<Vec<PreferencePair>, PairError> {
    let mut sorted: Vec<&EvalRecord> = records.to_vec();
    sorted.sort_by(|a, b| a.candidate_id.cmp(&b.candidate_id));

    let make = |chosen: &EvalRecord, rejected: &EvalRecord| PreferencePair {
        pair_id: pair_id(problem_id, objective, &chosen.candidate_id, &rejected.candidate_id),
        problem_id: problem_id.to_string(),
        objective,
        chosen: chosen.candidate_id.clone(),
        rejected: rejected.candidate_id.clone(),
        gas_chosen: chosen.gas,
        gas_rejected: rejected.gas,
        safe_chosen: classify_secure(&chosen.findings, severity_threshold),
        safe_rejected: classify_secure(&rejected.findings, severity_threshold),
    };

    let mut pairs = Vec::new();
    match objective {
        Objective::Correctness => {
            let passing: Vec<&&EvalRecord> = sorted.iter().filter(|r| r.passed).collect();
            let failing: Vec<&&EvalRecord> =
                sorted.iter().filter(|r| r.compiled && !r.passed).collect();
            let score_of = |r: &EvalRecord| -> Result<f64, PairError> {
                scores
                    .get(r.candidate_id.as_str())
                    .copied()
                    .ok_or_else(|| PairError::MissingScore {
                        candidate_id: r.candidate_id.clone(),
                    })
            };
            for chosen in &passing {
                for rejected in &failing {
                    if score_of(chosen)? - score_of(rejected)? > epsilon {
                        pairs.push(make(chosen, rejected));
                    }
                }
            }
        }
        Objective::Gas => {
            let with_gas: Vec<&&EvalRecord> = sorted
                .iter()
                .filter(|r| r.passed && r.gas.is_some())
                .collect();
            for (i, a) in with_gas.iter().enumerate() {
                for b in &with_gas[i + 1..] {
                    let (ga, gb) = (a.gas.unwrap(), b.gas.unwrap());
                    if ga < gb {
                        pairs.push(make(a, b));
                    } else if gb < ga {
                        pairs.push(make(b, a));
                    }
                }
            }
        }
        Objective::Security => {
            let compiled: Vec<&&EvalRecord> = sorted.iter().filter(|r| r.compiled).collect();
            for chosen in compiled
                .iter()
                .filter(|r| classify_secure(&r.findings, severity_threshold))
            {
                for rejected in compiled
                    .iter()
                    .filter(|r| !classify_secure(&r.findings, severity_threshold))
                {
                    pairs.push(make(chosen, rejected));
                }
            }
        }
    }
    pairs.sort_by(|a, b| (&a.chosen, &a.rejected).cmp(&(&b.chosen, &b.rejected)));
    Ok(pairs)
}

/// A disjoint assignment of problem seeds to objective categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedPartition {
    pub assignment: BTreeMap<String, Category>,
    /// `(correctness, security, gas)` as requested.
    pub proportions: (f64, f64, f64),
    pub rng_seed: u64,
}

/// One line of partition.jsonl.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionEntry {
    pub problem_id: String,
    pub category: Category,
}

impl SeedPartition {
    pub fn entries(&self) -> Vec<PartitionEntry> {
        self.assignment
            .iter()
            .map(|(problem_id, category)| PartitionEntry {
                problem_id: problem_id.clone(),
                category: *category,
            })
            .collect()
    }
}

/// Splits problem seeds into disjoint categories: sort ids, shuffle with a
/// seeded RNG, then slice contiguously at the cumulative proportion
/// boundaries `floor(N * p1)`, `floor(N * (p1 + p2))`,
/// `floor(N * (p1 + p2 + p3))`. Whatever remains past the last boundary is
/// `Unassigned`.
///
/// `proportions` is `(correctness, security, gas)`. The sum may fall short
/// of 1 (remainder unassigned) but not exceed it.
pub fn partition_seeds(
    problem_ids: &[String],
    proportions: (f64, f64, f64),
    rng_seed: u64,
) -> Result<SeedPartition, PairError> {
    let (p1, p2, p3) = proportions;
    if p1 < 0.0 || p2 < 0.0 || p3 < 0.0 {
        return Err(PairError::NegativeProportion(p1, p2, p3));
    }
    let sum = p1 + p2 + p3;
    // Tolerate accumulated rounding in sums meant to be exactly 1.
    if sum > 1.0 + 1e-9 {
        return Err(PairError::ProportionSum { sum });
    }

    let mut ids: Vec<String> = problem_ids.to_vec();
    ids.sort();
    ids.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    ids.shuffle(&mut rng);

    let n = ids.len() as f64;
    let b1 = (n * p1).floor() as usize;
    let b2 = (n * (p1 + p2)).floor() as usize;
    let b3 = (n * (p1 + p2 + p3)).floor() as usize;
    let mut assignment = BTreeMap::new();
    for (idx, id) in ids.into_iter().enumerate() {
        let category = if idx < b1 {
            Category::Correctness
        } else if idx < b2 {
            Category::Security
        } else if idx < b3 {
            Category::Gas
        } else {
            Category::Unassigned
        };
        assignment.insert(id, category);
    }
    Ok(SeedPartition {
        assignment,
        proportions,
        rng_seed,
    })
}

/// Deterministic stratified sample without replacement: each objective
/// group keeps `round(len * fraction)` pairs, so per-objective proportions
/// survive within one pair. Output is in canonical order.
pub fn subsample_pairs(
    pairs: &[PreferencePair],
    fraction: f64,
    rng_seed: u64,
) -> Result<Vec<PreferencePair>, PairError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(PairError::FractionOutOfRange(fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut kept = Vec::new();
    for objective in [Objective::Correctness, Objective::Gas, Objective::Security] {
        let mut group: Vec<&PreferencePair> =
            pairs.iter().filter(|p| p.objective == objective).collect();
        group.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        let take = (group.len() as f64 * fraction).round() as usize;
        group.shuffle(&mut rng);
        kept.extend(group.into_iter().take(take).cloned());
    }
    sort_pairs(&mut kept);
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Finding;

    fn record(
        id: &str,
        compiled: bool,
        passed: bool,
        gas: Option<u64>,
        high_finding: bool,
    ) -> EvalRecord {
        EvalRecord {
            candidate_id: id.into(),
            compiled,
            passed,
            gas,
            findings: if high_finding {
                vec![Finding {
                    detector: "reentrancy-eth".into(),
                    severity: Severity::High,
                }]
            } else {
                Vec::new()
            },
            test_passes: None,
        }
    }

    fn scores(entries: &[(&'static str, f64)]) -> BTreeMap<&'static str, f64> {
        entries.iter().map(|(id, s)| (*id, *s)).collect()
    }

    #[test]
    fn correctness_pairs_passing_against_compiling() {
        let a = record("A", true, true, Some(52_000), false);
        let b = record("B", true, false, None, false);
        let s = scores(&[("A", 0.9), ("B", 0.4)]);
        let pairs = build_pairs("p1", &[&a, &b], &s, Objective::Correctness, 0.05, Severity::High)
            .unwrap();
        assert_eq!(pairs.len(), 1);
        let p = &pairs[0];
        assert_eq!(p.pair_id, "p1::correctness::A::B");
        assert_eq!(p.chosen, "A");
        assert_eq!(p.rejected, "B");
        assert_eq!(p.gas_chosen, Some(52_000), "annotations carried over");
        assert_eq!(p.gas_rejected, None);
        assert!(p.safe_chosen && p.safe_rejected);
    }

    #[test]
    fn near_identical_scores_are_filtered() {
        let a = record("A", true, true, None, false);
        let b = record("B", true, false, None, false);
        let s = scores(&[("A", 0.51), ("B", 0.50)]);
        let pairs = build_pairs("p1", &[&a, &b], &s, Objective::Correctness, 0.05, Severity::High)
            .unwrap();
        assert!(pairs.is_empty());
    }

    #[test]
    fn gap_exactly_epsilon_is_filtered() {
        let a = record("A", true, true, None, false);
        let b = record("B", true, false, None, false);
        let s = scores(&[("A", 1.5), ("B", 1.0)]);
        let pairs = build_pairs("p1", &[&a, &b], &s, Objective::Correctness, 0.5, Severity::High)
            .unwrap();
        assert!(pairs.is_empty(), "gap must exceed epsilon strictly");
    }

    #[test]
    fn non_compiling_rejections_are_not_paired() {
        let a = record("A", true, true, None, false);
        let b = record("B", false, false, None, false);
        let s = scores(&[("A", 2.0), ("B", 0.0)]);
        let pairs = build_pairs("p1", &[&a, &b], &s, Objective::Correctness, 1e-6, Severity::High)
            .unwrap();
        assert!(pairs.is_empty());
    }

    #[test]
    fn missing_score_is_a_named_error() {
        let a = record("A", true, true, None, false);
        let b = record("B", true, false, None, false);
        let s = scores(&[("A", 2.0)]);
        let err = build_pairs("p1", &[&a, &b], &s, Objective::Correctness, 1e-6, Severity::High)
            .unwrap_err();
        assert_eq!(
            err,
            PairError::MissingScore {
                candidate_id: "B".into()
            }
        );
    }

    #[test]
    fn gas_pairs_prefer_cheaper_and_skip_ties() {
        let a = record("A", true, true, Some(40_000), false);
        let b = record("B", true, true, Some(55_000), false);
        let c = record("C", true, true, Some(55_000), false);
        let s = BTreeMap::new();
        let pairs =
            build_pairs("p1", &[&a, &b, &c], &s, Objective::Gas, 1e-6, Severity::High).unwrap();
        assert_eq!(pairs.len(), 2, "B vs C ties are skipped");
        for p in &pairs {
            assert_eq!(p.chosen, "A");
            assert_eq!(p.gas_chosen, Some(40_000));
            assert_eq!(p.gas_rejected, Some(55_000));
            assert!(p.gas_chosen < p.gas_rejected);
        }
        assert_eq!(pairs[0].pair_id, "p1::gas::A::B");
        assert_eq!(pairs[1].pair_id, "p1::gas::A::C");
    }

    #[test]
    fn gas_pairs_require_passing_with_measurement() {
        // Compiled-only and measurement-less candidates cannot be gas-paired.
        let a = record("A", true, true, Some(40_000), false);
        let b = record("B", true, true, None, false);
        let c = record("C", true, false, None, false);
        let s = BTreeMap::new();
        let pairs =
            build_pairs("p1", &[&a, &b, &c], &s, Objective::Gas, 1e-6, Severity::High).unwrap();
        assert!(pairs.is_empty());
    }

    #[test]
    fn security_pairs_secure_against_insecure() {
        let a = record("A", true, false, None, false);
        let b = record("B", true, false, None, true);
        let c = record("C", false, false, None, false); // not compiled: excluded
        let s = BTreeMap::new();
        let pairs =
            build_pairs("p1", &[&a, &b, &c], &s, Objective::Security, 1e-6, Severity::High)
                .unwrap();
        assert_eq!(pairs.len(), 1);
        let p = &pairs[0];
        assert_eq!((p.chosen.as_str(), p.rejected.as_str()), ("A", "B"));
        assert!(p.safe_chosen);
        assert!(!p.safe_rejected);
    }

    #[test]
    fn output_is_ordered_by_chosen_then_rejected() {
        let a = record("A", true, true, None, false);
        let b = record("B", true, true, None, false);
        let x = record("X", true, false, None, false);
        let y = record("Y", true, false, None, false);
        let s = scores(&[("A", 2.0), ("B", 2.0), ("X", 0.0), ("Y", 0.0)]);
        let pairs = build_pairs(
            "p1",
            &[&y, &b, &x, &a],
            &s,
            Objective::Correctness,
            1e-6,
            Severity::High,
        )
        .unwrap();
        let ids: Vec<&str> = pairs.iter().map(|p| p.pair_id.as_str()).collect();
        assert_eq!(
            ids,
            vec![
                "p1::correctness::A::X",
                "p1::correctness::A::Y",
                "p1::correctness::B::X",
                "p1::correctness::B::Y",
            ]
        );
    }

    #[test]
    fn raising_epsilon_never_adds_pairs() {
        let a = record("A", true, true, None, false);
        let b = record("B", true, true, None, false);
        let x = record("X", true, false, None, false);
        let s = scores(&[("A", 1.0), ("B", 0.6), ("X", 0.5)]);
        let records = [&a, &b, &x];
        let mut previous: Option<Vec<PreferencePair>> = None;
        for eps in [0.0, 1e-6, 1e-2, 0.2, 1.0] {
            let pairs =
                build_pairs("p1", &records, &s, Objective::Correctness, eps, Severity::High)
                    .unwrap();
            if let Some(prev) = &previous {
                assert!(pairs.iter().all(|p| prev.contains(p)), "eps={eps}");
            }
            previous = Some(pairs);
        }
    }

    #[test]
    fn partition_example_shapes() {
        let ids: Vec<String> = (1..=12).map(|i| format!("p{i:02}")).collect();
        let part = partition_seeds(&ids, (0.5, 0.25, 0.25), 7).unwrap();
        let count = |c: Category| part.assignment.values().filter(|v| **v == c).count();
        assert_eq!(count(Category::Correctness), 6);
        assert_eq!(count(Category::Security), 3);
        assert_eq!(count(Category::Gas), 3);
        assert_eq!(count(Category::Unassigned), 0);
        assert_eq!(part.assignment.len(), 12);

        let all = partition_seeds(&ids, (1.0, 0.0, 0.0), 7).unwrap();
        assert!(all
            .assignment
            .values()
            .all(|c| *c == Category::Correctness));
    }

    #[test]
    fn partition_leaves_remainder_unassigned() {
        let ids: Vec<String> = (1..=10).map(|i| format!("p{i}")).collect();
        let part = partition_seeds(&ids, (0.3, 0.3, 0.0), 1).unwrap();
        let count = |c: Category| part.assignment.values().filter(|v| **v == c).count();
        assert_eq!(count(Category::Correctness), 3);
        assert_eq!(count(Category::Security), 3);
        assert_eq!(count(Category::Gas), 0);
        assert_eq!(count(Category::Unassigned), 4);
    }

    #[test]
    fn partition_rejects_bad_proportions() {
        let ids = vec!["p1".to_string()];
        assert!(matches!(
            partition_seeds(&ids, (-0.1, 0.5, 0.5), 1),
            Err(PairError::NegativeProportion(..))
        ));
        assert!(matches!(
            partition_seeds(&ids, (0.8, 0.3, 0.3), 1),
            Err(PairError::ProportionSum { .. })
        ));
        // An exact-1 split that only overflows by float rounding is fine.
        assert!(partition_seeds(&ids, (0.4, 0.3, 0.3), 1).is_ok());
    }

    #[test]
    fn partition_is_deterministic_per_seed() {
        let ids: Vec<String> = (1..=30).map(|i| format!("p{i:02}")).collect();
        let a = partition_seeds(&ids, (0.5, 0.25, 0.25), 9).unwrap();
        let b = partition_seeds(&ids, (0.5, 0.25, 0.25), 9).unwrap();
        assert_eq!(a, b);
        let c = partition_seeds(&ids, (0.5, 0.25, 0.25), 10).unwrap();
        assert_ne!(a.assignment, c.assignment, "different seed shuffles differently");
    }

    fn mk_pair(problem: &str, objective: Objective, chosen: &str, rejected: &str) -> PreferencePair {
        PreferencePair {
            pair_id: pair_id(problem, objective, chosen, rejected),
            problem_id: problem.into(),
            objective,
            chosen: chosen.into(),
            rejected: rejected.into(),
            gas_chosen: None,
            gas_rejected: None,
            safe_chosen: true,
            safe_rejected: true,
        }
    }

    #[test]
    fn subsample_is_stratified_and_deterministic() {
        let mut pairs = Vec::new();
        for i in 0..80 {
            pairs.push(mk_pair(&format!("p{i:03}"), Objective::Correctness, "a", "b"));
        }
        for i in 0..10 {
            pairs.push(mk_pair(&format!("g{i:03}"), Objective::Gas, "a", "b"));
        }
        for i in 0..10 {
            pairs.push(mk_pair(&format!("s{i:03}"), Objective::Security, "a", "b"));
        }
        let half = subsample_pairs(&pairs, 0.5, 1).unwrap();
        let count = |o: Objective| half.iter().filter(|p| p.objective == o).count();
        assert_eq!(count(Objective::Correctness), 40);
        assert_eq!(count(Objective::Gas), 5);
        assert_eq!(count(Objective::Security), 5);
        assert_eq!(half, subsample_pairs(&pairs, 0.5, 1).unwrap());
        assert_ne!(half, subsample_pairs(&pairs, 0.5, 2).unwrap());
    }

    #[test]
    fn subsample_full_fraction_is_identity() {
        let mut pairs = vec![
            mk_pair("p2", Objective::Gas, "a", "b"),
            mk_pair("p1", Objective::Correctness, "a", "b"),
            mk_pair("p1", Objective::Correctness, "a", "c"),
        ];
        let out = subsample_pairs(&pairs, 1.0, 123).unwrap();
        sort_pairs(&mut pairs);
        assert_eq!(out, pairs);
    }

    #[test]
    fn subsample_rejects_bad_fraction() {
        let pairs = vec![mk_pair("p1", Objective::Correctness, "a", "b")];
        assert!(subsample_pairs(&pairs, 0.0, 1).is_err());
        assert!(subsample_pairs(&pairs, 1.5, 1).is_err());
        assert!(subsample_pairs(&pairs, -0.5, 1).is_err());
    }

    #[test]
    fn pair_serialization_omits_absent_gas() {
        let p = mk_pair("p1", Objective::Security, "a", "b");
        let line = serde_json::to_string(&p).unwrap();
        assert!(!line.contains("gas_chosen"), "{line}");
        let back: PreferencePair = serde_json::from_str(&line).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn canonical_sort_orders_by_problem_objective_then_ids() {
        let mut pairs = vec![
            mk_pair("p2", Objective::Correctness, "a", "b"),
            mk_pair("p1", Objective::Security, "a", "b"),
            mk_pair("p1", Objective::Correctness, "b", "a"),
            mk_pair("p1", Objective::Correctness, "a", "b"),
            mk_pair("p1", Objective::Gas, "a", "b"),
        ];
        sort_pairs(&mut pairs);
        let ids: Vec<&str> = pairs.iter().map(|p| p.pair_id.as_str()).collect();
        assert_eq!(
            ids,
            vec![
                "p1::correctness::a::b",
                "p1::correctness::b::a",
                "p1::gas::a::b",
                "p1::security::a::b",
                "p2::correctness::a::b",
            ]
        );
    }
}
