//! Mutual-validation ranking over a bipartite code/test graph.
//!
//! Candidates and unit tests endorse each other: a link `(t, c)` means
//! candidate `c` passes test `t`. Scores start at 1.0 and are updated
//! synchronously for a fixed number of iterations:
//!
//! ```text
//! score'(x) = (1 - d) * score(x) + d * sum over linked y of w(y, x) * score(y)
//! ```
//!
//! Both sides of the graph read the same previous iterate (Jacobi update),
//! so candidate and test updates commute. There is no early-stopping and no
//! teleport term; isolated nodes decay geometrically at rate `1 - d`.
//!
//! Edge weights depend on the mode: `Literal` uses `w = 1` per link,
//! `Stochastic` uses `w(y, x) = 1 / outdegree(y)`, so each linked node
//! redistributes exactly its own score and total mass stays bounded.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RankMode;

/// Which side of the bipartite graph a score belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Code,
    Test,
}

/// One scored node, as written to scores.jsonl.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreEntry {
    pub node_id: String,
    pub kind: NodeKind,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RankError {
    #[error("duplicate candidate node '{0}'")]
    DuplicateCandidate(String),
    #[error("duplicate test node '{0}'")]
    DuplicateTest(String),
    #[error("link references unknown test '{test_id}'")]
    UnknownTest { test_id: String },
    #[error("link references unknown candidate '{candidate_id}'")]
    UnknownCandidate { candidate_id: String },
}

/// The pass relation between tests and candidates, indexed both ways.
///
/// Node ids are kept in ascending order and adjacency lists are sorted, so
/// every summation below runs in ascending id order and results are
/// reproducible bit for bit. Links form a set: repeating a `(test,
/// candidate)` pair has no effect.
#[derive(Debug, Clone)]
pub struct BipartiteLinks {
    candidates: Vec<String>,
    tests: Vec<String>,
    tests_of_candidate: Vec<Vec<usize>>,
    candidates_of_test: Vec<Vec<usize>>,
}

impl BipartiteLinks {
    /// Builds the graph from explicit node lists plus `(test_id,
    /// candidate_id)` links. Nodes without links are legal and keep
    /// decaying scores; links to unlisted nodes are errors.
    pub fn new<C, T>(
        candidate_ids: C,
        test_ids: T,
        links: &[(String, String)],
    ) -> Result<BipartiteLinks, RankError>
    where
        C: IntoIterator<Item = String>,
        T: IntoIterator<Item = String>,
    {
        let mut candidates: Vec<String> = candidate_ids.into_iter().collect();
        candidates.sort();
        if let Some(dup) = candidates.windows(2).find(|w| w[0] == w[1]) {
            return Err(RankError::DuplicateCandidate(dup[0].clone()));
        }
        let mut tests: Vec<String> = test_ids.into_iter().collect();
        tests.sort();
        if let Some(dup) = tests.windows(2).find(|w| w[0] == w[1]) {
            return Err(RankError::DuplicateTest(dup[0].clone()));
        }

        let mut tests_of_candidate = vec![Vec::new(); candidates.len()];
        let mut candidates_of_test = vec![Vec::new(); tests.len()];
        for (test_id, candidate_id) in links {
            let t = tests
                .binary_search(test_id)
                .map_err(|_| RankError::UnknownTest {
                    test_id: test_id.clone(),
                })?;
            let c = candidates
                .binary_search(candidate_id)
                .map_err(|_| RankError::UnknownCandidate {
                    candidate_id: candidate_id.clone(),
                })?;
            tests_of_candidate[c].push(t);
            candidates_of_test[t].push(c);
        }
        for adj in tests_of_candidate.iter_mut().chain(&mut candidates_of_test) {
            adj.sort_unstable();
            adj.dedup();
        }
        Ok(BipartiteLinks {
            candidates,
            tests,
            tests_of_candidate,
            candidates_of_test,
        })
    }

    pub fn candidate_ids(&self) -> &[String] {
        &self.candidates
    }

    pub fn test_ids(&self) -> &[String] {
        &self.tests
    }

    pub fn link_count(&self) -> usize {
        self.tests_of_candidate.iter().map(Vec::len).sum()
    }
}

/// Runs the mutual-validation update for exactly `iterations` rounds and
/// returns scores for candidates (ascending id), then tests (ascending id).
pub fn rank(
    links: &BipartiteLinks,
    damping: f64,
    iterations: u32,
    mode: RankMode,
) -> Vec<ScoreEntry> {
    let nc = links.candidates.len();
    let nt = links.tests.len();
    let weight = |outdegree: usize| -> f64 {
        match mode {
            RankMode::Literal => 1.0,
            RankMode::Stochastic => 1.0 / outdegree as f64,
        }
    };
    // Outdegree of a node is its link count; a node only appears in an
    // adjacency list if that count is at least one.
    let cand_w: Vec<f64> = links.tests_of_candidate.iter().map(|a| weight(a.len())).collect();
    let test_w: Vec<f64> = links.candidates_of_test.iter().map(|a| weight(a.len())).collect();

    let mut cand = vec![1.0f64; nc];
    let mut test = vec![1.0f64; nt];
    for _ in 0..iterations {
        let mut next_cand = Vec::with_capacity(nc);
        for (c, adj) in links.tests_of_candidate.iter().enumerate() {
            let mut acc = 0.0;
            for &t in adj {
                acc += test[t] * test_w[t];
            }
            next_cand.push((1.0 - damping) * cand[c] + damping * acc);
        }
        let mut next_test = Vec::with_capacity(nt);
        for (t, adj) in links.candidates_of_test.iter().enumerate() {
            let mut acc = 0.0;
            for &c in adj {
                acc += cand[c] * cand_w[c];
            }
            next_test.push((1.0 - damping) * test[t] + damping * acc);
        }
        cand = next_cand;
        test = next_test;
    }

    let mut entries = Vec::with_capacity(nc + nt);
    for (id, score) in links.candidates.iter().zip(cand) {
        entries.push(ScoreEntry {
            node_id: id.clone(),
            kind: NodeKind::Code,
            score,
        });
    }
    for (id, score) in links.tests.iter().zip(test) {
        entries.push(ScoreEntry {
            node_id: id.clone(),
            kind: NodeKind::Test,
            score,
        });
    }
    entries
}

/// Candidate scores keyed by id, for downstream pair construction.
pub fn candidate_score_map(entries: &[ScoreEntry]) -> std::collections::BTreeMap<&str, f64> {
    entries
        .iter()
        .filter(|e| e.kind == NodeKind::Code)
        .map(|e| (e.node_id.as_str(), e.score))
        .collect()
}
