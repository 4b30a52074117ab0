//! Stage orchestration over an output directory: digest-checked caching,
//! the run manifest, and the dataset operations the CLI exposes.
//!
//! Every stage follows the same protocol:
//!
//! 1. digest all declared inputs (erroring on stale or missing artifacts),
//! 2. skip the stage when inputs, parameters, configuration, and outputs all
//!    match what the manifest recorded,
//! 3. otherwise run, write outputs atomically, and update the manifest.
//!
//! Re-running a pipeline whose inputs have not changed therefore touches
//! nothing: same bytes, same manifest, byte for byte.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::config::Config;
use crate::digest::{sha256_file, sha256_hex};
use crate::fsutil::{atomic_write, DirLock};
use crate::harness::{evaluate_all, ingest_results, MockBackend, ReplayBackend};
use crate::jsonl;
use crate::loss::{compute_loss, summarize, LossInput, LossReportLine, LossSummary};
use crate::manifest::{Manifest, StageRecord};
use crate::metrics::{aggregate_rows, derive_counts, problem_metrics, ProblemMetrics};
use crate::model::{
    group_evals_by_problem, validate_dataset, Candidate, Category, EvalRecord, Problem, TestCase,
    ValidationReport,
};
use crate::pairs::{
    build_pairs, partition_seeds, sort_pairs, subsample_pairs, Objective, PartitionEntry,
    PreferencePair,
};
use crate::ranker::{candidate_score_map, rank, BipartiteLinks, ScoreEntry};
use crate::report::{
    render_metrics_csv, render_metrics_txt, render_report, FunnelCounts, PairCounts, ReportData,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Canonical artifact names inside the output directory.
pub mod artifact {
    pub const MANIFEST: &str = "manifest.json";
    pub const EVALS: &str = "evals.jsonl";
    pub const SCORES: &str = "scores.jsonl";
    pub const PARTITION: &str = "partition.jsonl";
    pub const PAIRS: &str = "pairs.jsonl";
    pub const LOSS_REPORT: &str = "loss_report.jsonl";
    pub const METRICS_CSV: &str = "metrics.csv";
    pub const METRICS_TXT: &str = "metrics.txt";
    pub const REPORT_MD: &str = "report.md";
}

/// Which stage produces a given artifact, for "run X first" hints. Both
/// `evaluate` and `ingest` can produce evals.jsonl.
fn expected_producer(name: &str) -> Option<&'static str> {
    match name {
        artifact::EVALS => Some("evaluate (or ingest)"),
        artifact::SCORES => Some("rank"),
        artifact::PARTITION => Some("partition"),
        artifact::PAIRS => Some("pairs"),
        artifact::LOSS_REPORT => Some("loss"),
        _ => None,
    }
}

/// Failures split by who must fix them: `Data` for wrong or inconsistent
/// input files (exit code 1), `Usage` for operator errors such as bad flags
/// or configuration (exit code 2).
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Usage(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Data(_) => 1,
            PipelineError::Usage(_) => 2,
        }
    }
}

fn data(e: impl fmt::Display) -> PipelineError {
    PipelineError::Data(e.to_string())
}

fn usage(e: impl fmt::Display) -> PipelineError {
    PipelineError::Usage(e.to_string())
}

fn check_clean(report: &ValidationReport) -> Result<(), PipelineError> {
    if report.is_clean() {
        Ok(())
    } else {
        Err(PipelineError::Data(format!(
            "dataset validation failed:\n{report}"
        )))
    }
}

/// Evaluation backend selector for the evaluate stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    /// Rule-table backend driven by a rules.jsonl file.
    Mock,
    /// Replays pre-recorded tool output (raw_results.jsonl).
    Replay,
}

impl BackendKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BackendKind::Mock => "mock",
            BackendKind::Replay => "replay",
        }
    }
}

impl FromStr for BackendKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mock" => Ok(BackendKind::Mock),
            "replay" => Ok(BackendKind::Replay),
            other => Err(format!("unknown backend '{other}' (expected mock or replay)")),
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn load_problems(path: &Path) -> Result<Vec<Problem>, PipelineError> {
    jsonl::read_jsonl(path).map_err(data)
}

pub fn load_candidates(path: &Path) -> Result<Vec<Candidate>, PipelineError> {
    jsonl::read_jsonl(path).map_err(data)
}

pub fn load_evals(path: &Path) -> Result<Vec<EvalRecord>, PipelineError> {
    jsonl::read_jsonl(path).map_err(data)
}

pub fn load_tests(path: &Path) -> Result<Vec<TestCase>, PipelineError> {
    jsonl::read_jsonl(path).map_err(data)
}

/// Loads and cross-checks a dataset without touching the output directory.
pub fn validate_files(
    problems: &Path,
    candidates: &Path,
    evals: Option<&Path>,
) -> Result<ValidationReport, PipelineError> {
    let problems = load_problems(problems)?;
    let candidates = load_candidates(candidates)?;
    let evals = match evals {
        Some(path) => load_evals(path)?,
        None => Vec::new(),
    };
    Ok(validate_dataset(&problems, &candidates, &evals))
}

/// Builds the code/test graph and ranks it.
///
/// With `tests` present, links come exclusively from per-test pass bits
/// (`test_passes`); records without the extended field contribute no links.
/// Without `tests`, each problem that has evaluation records gets a single
/// synthetic `"<problem_id>::suite"` test node linked to its passing
/// candidates. Every candidate is a node either way, so scores.jsonl covers
/// the full roster (unlinked nodes just decay).
pub fn rank_dataset(
    candidates: &[Candidate],
    evals: &[EvalRecord],
    tests: Option<&[TestCase]>,
    config: &Config,
) -> Result<Vec<ScoreEntry>, PipelineError> {
    let candidate_problem: BTreeMap<&str, &str> = candidates
        .iter()
        .map(|c| (c.id.as_str(), c.problem_id.as_str()))
        .collect();
    let problem_of = |candidate_id: &str| -> Result<&str, PipelineError> {
        candidate_problem
            .get(candidate_id)
            .copied()
            .ok_or_else(|| {
                PipelineError::Data(format!(
                    "eval record references unknown candidate '{candidate_id}'"
                ))
            })
    };

    let mut link_pairs: Vec<(String, String)> = Vec::new();
    let test_ids: Vec<String> = match tests {
        Some(tests) => {
            let mut test_problem: BTreeMap<&str, &str> = BTreeMap::new();
            for t in tests {
                if test_problem
                    .insert(t.test_id.as_str(), t.problem_id.as_str())
                    .is_some()
                {
                    return Err(PipelineError::Data(format!(
                        "duplicate test id '{}'",
                        t.test_id
                    )));
                }
            }
            for e in evals {
                let problem = problem_of(&e.candidate_id)?;
                let Some(test_passes) = &e.test_passes else {
                    continue;
                };
                for (test_id, &passed) in test_passes {
                    let Some(owner) = test_problem.get(test_id.as_str()) else {
                        return Err(PipelineError::Data(format!(
                            "candidate '{}' reports a result for unknown test '{test_id}'",
                            e.candidate_id
                        )));
                    };
                    if *owner != problem {
                        return Err(PipelineError::Data(format!(
                            "candidate '{}' of problem '{problem}' reports a result for \
                             test '{test_id}', which belongs to problem '{owner}'",
                            e.candidate_id
                        )));
                    }
                    if passed {
                        link_pairs.push((test_id.clone(), e.candidate_id.clone()));
                    }
                }
            }
            tests.iter().map(|t| t.test_id.clone()).collect()
        }
        None => {
            let mut suite_problems: BTreeSet<&str> = BTreeSet::new();
            for e in evals {
                let problem = problem_of(&e.candidate_id)?;
                suite_problems.insert(problem);
                if e.passed {
                    link_pairs.push((format!("{problem}::suite"), e.candidate_id.clone()));
                }
            }
            suite_problems
                .iter()
                .map(|p| format!("{p}::suite"))
                .collect()
        }
    };

    let links = BipartiteLinks::new(
        candidates.iter().map(|c| c.id.clone()),
        test_ids,
        &link_pairs,
    )
    .map_err(data)?;
    Ok(rank(&links, config.damping, config.iterations, config.rank_mode))
}

/// Builds the full preference dataset: every partitioned problem contributes
/// pairs under its assigned objective. Problems absent from the partition,
/// or assigned `Unassigned`, contribute nothing. Output is in canonical
/// order.
pub fn build_all_pairs(
    problems: &[Problem],
    candidates: &[Candidate],
    evals: &[EvalRecord],
    scores: &[ScoreEntry],
    partition: &[PartitionEntry],
    config: &Config,
) -> Result<Vec<PreferencePair>, PipelineError> {
    let known: BTreeSet<&str> = problems.iter().map(|p| p.id.as_str()).collect();
    let mut category: BTreeMap<&str, Category> = BTreeMap::new();
    for entry in partition {
        if !known.contains(entry.problem_id.as_str()) {
            return Err(PipelineError::Data(format!(
                "partition references unknown problem '{}'",
                entry.problem_id
            )));
        }
        if category
            .insert(entry.problem_id.as_str(), entry.category)
            .is_some()
        {
            return Err(PipelineError::Data(format!(
                "problem '{}' appears more than once in the partition",
                entry.problem_id
            )));
        }
    }

    let score_map = candidate_score_map(scores);
    let grouped = group_evals_by_problem(candidates, evals);
    let mut out = Vec::new();
    for (problem_id, records) in &grouped {
        let Some(cat) = category.get(problem_id) else {
            continue;
        };
        let Some(objective) = Objective::from_category(*cat) else {
            continue;
        };
        out.extend(
            build_pairs(
                problem_id,
                records,
                &score_map,
                objective,
                config.epsilon,
                config.severity_threshold,
            )
            .map_err(data)?,
        );
    }
    sort_pairs(&mut out);
    Ok(out)
}

/// Per-problem Task@k for every problem in the dataset, in ascending problem
/// id order. Problems without records come back as `no_data` rather than
/// being dropped.
pub fn compute_all_metrics(
    problems: &[Problem],
    candidates: &[Candidate],
    evals: &[EvalRecord],
    config: &Config,
) -> Result<Vec<ProblemMetrics>, PipelineError> {
    let grouped = group_evals_by_problem(candidates, evals);
    let mut sorted: Vec<&Problem> = problems.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    sorted
        .iter()
        .map(|p| {
            let records = grouped.get(p.id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
            problem_metrics(p, records, config).map_err(data)
        })
        .collect()
}

/// What happened to one stage invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StageStatus {
    /// The stage ran and wrote these artifacts.
    Ran(Vec<String>),
    /// Inputs, parameters, configuration, and outputs all match the
    /// manifest; nothing was touched.
    UpToDate(Vec<String>),
}

impl StageStatus {
    pub fn artifacts(&self) -> &[String] {
        match self {
            StageStatus::Ran(names) | StageStatus::UpToDate(names) => names,
        }
    }
}

/// A locked output directory plus the effective configuration. All stages
/// run through one of the methods below; the lock is released on drop.
#[derive(Debug)]
pub struct Pipeline {
    out_dir: PathBuf,
    config: Config,
    config_digest: String,
    manifest: Manifest,
    _lock: DirLock,
}

impl Pipeline {
    /// Creates the output directory if needed, takes its lock, and loads any
    /// existing manifest. A second process holding the lock is a data error
    /// (exit 1), not a crash.
    pub fn open(out_dir: &Path, config: Config) -> Result<Pipeline, PipelineError> {
        let lock = DirLock::acquire(out_dir).map_err(data)?;
        let manifest_path = out_dir.join(artifact::MANIFEST);
        let mut manifest = if manifest_path.exists() {
            Manifest::load(&manifest_path).map_err(|e| {
                PipelineError::Data(format!("cannot load '{}': {e}", manifest_path.display()))
            })?
        } else {
            Manifest::new(TOOL_VERSION)
        };
        // Reflect the running tool; persisted only if some stage writes.
        manifest.tool_version = TOOL_VERSION.to_string();
        let config_digest = sha256_hex(config.canonical_string().as_bytes());
        Ok(Pipeline {
            out_dir: out_dir.to_path_buf(),
            config,
            config_digest,
            manifest,
            _lock: lock,
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// Digests one input file, refusing stale artifacts: a file inside the
    /// output directory whose bytes no longer match the digest the manifest
    /// recorded for it (or which vanished entirely) means some producer must
    /// be re-run, and silently consuming it would poison everything
    /// downstream.
    fn digest_input(&self, path: &Path) -> Result<String, PipelineError> {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default();
        let in_out_dir = path.parent().is_some_and(|p| p == self.out_dir);
        let recorded = if in_out_dir {
            self.manifest.artifacts.get(name)
        } else {
            None
        };

        if !path.exists() {
            if recorded.is_some() {
                let producer = self.manifest.producer_of(name).unwrap_or("unknown");
                return Err(PipelineError::Data(format!(
                    "stale input: artifact '{name}' is recorded in the manifest (produced \
                     by stage '{producer}') but missing on disk; re-run '{producer}'"
                )));
            }
            let hint = if in_out_dir {
                expected_producer(name)
            } else {
                None
            };
            return Err(PipelineError::Data(match hint {
                Some(stage) => format!(
                    "input file not found: '{}'; run the {stage} stage first",
                    path.display()
                ),
                None => format!("input file not found: '{}'", path.display()),
            }));
        }

        let digest = sha256_file(path)
            .map_err(|e| PipelineError::Data(format!("cannot read '{}': {e}", path.display())))?;
        if let Some(expected) = recorded {
            if *expected != digest {
                let producer = self.manifest.producer_of(name).unwrap_or("unknown");
                return Err(PipelineError::Data(format!(
                    "stale input: artifact '{name}' on disk (sha256 {digest}) does not match \
                     the digest recorded by stage '{producer}' ({expected}); re-run '{producer}' \
                     or restore the file"
                )));
            }
        }
        Ok(digest)
    }

    /// The caching protocol shared by every stage. `produce` is only called
    /// on a cache miss and returns named artifact bytes; outputs are written
    /// atomically and the manifest is saved afterwards, so an interrupted
    /// stage re-runs next time.
    fn run_stage<F>(
        &mut self,
        stage: &'static str,
        inputs: &[&Path],
        params: BTreeMap<String, String>,
        produce: F,
    ) -> Result<StageStatus, PipelineError>
    where
        F: FnOnce(&Pipeline) -> Result<Vec<(&'static str, Vec<u8>)>, PipelineError>,
    {
        let mut input_digests = BTreeMap::new();
        for path in inputs {
            let digest = self.digest_input(path)?;
            input_digests.insert(path.display().to_string(), digest);
        }

        if let Some(existing) = self.manifest.stages.get(stage) {
            if existing.inputs == input_digests
                && existing.params == params
                && existing.config_sha256 == self.config_digest
                && !existing.outputs.is_empty()
            {
                let outputs_fresh = existing.outputs.iter().all(|(name, digest)| {
                    matches!(sha256_file(&self.out_dir.join(name)), Ok(d) if d == *digest)
                });
                if outputs_fresh {
                    return Ok(StageStatus::UpToDate(
                        existing.outputs.keys().cloned().collect(),
                    ));
                }
            }
        }

        let produced = produce(self)?;
        let mut outputs = BTreeMap::new();
        let mut names = Vec::with_capacity(produced.len());
        for (name, bytes) in &produced {
            let path = self.out_dir.join(name);
            atomic_write(&path, bytes).map_err(|e| {
                PipelineError::Data(format!("cannot write '{}': {e}", path.display()))
            })?;
            outputs.insert((*name).to_string(), sha256_hex(bytes));
            names.push((*name).to_string());
        }
        self.manifest.record_stage(
            stage,
            StageRecord {
                inputs: input_digests,
                outputs,
                params,
                config_sha256: self.config_digest.clone(),
            },
        );
        let manifest_path = self.out_dir.join(artifact::MANIFEST);
        self.manifest.save(&manifest_path).map_err(|e| {
            PipelineError::Data(format!("cannot write '{}': {e}", manifest_path.display()))
        })?;
        Ok(StageStatus::Ran(names))
    }

    /// Runs every candidate through the chosen backend and writes
    /// evals.jsonl. The dataset (minus evals) is validated first so duplicate
    /// ids or dangling references fail before any backend work.
    pub fn evaluate(
        &mut self,
        problems: &Path,
        candidates: &Path,
        backend: BackendKind,
        source: &Path,
    ) -> Result<StageStatus, PipelineError> {
        let params = BTreeMap::from([("backend".to_string(), backend.as_str().to_string())]);
        self.run_stage("evaluate", &[problems, candidates, source], params, |_| {
            let problems = load_problems(problems)?;
            let candidates = load_candidates(candidates)?;
            check_clean(&validate_dataset(&problems, &candidates, &[]))?;
            let records = match backend {
                BackendKind::Mock => {
                    let backend = MockBackend::from_file(source).map_err(data)?;
                    evaluate_all(&problems, &candidates, &backend)
                }
                BackendKind::Replay => {
                    let backend = ReplayBackend::from_file(source).map_err(data)?;
                    evaluate_all(&problems, &candidates, &backend)
                }
            }
            .map_err(data)?;
            Ok(vec![(artifact::EVALS, jsonl::to_jsonl_bytes(&records))])
        })
    }

    /// Converts raw tool output into evals.jsonl without a backend pass:
    /// severity mapping, candidate checks, implication enforcement.
    pub fn ingest(
        &mut self,
        results: &Path,
        candidates: &Path,
    ) -> Result<StageStatus, PipelineError> {
        self.run_stage("ingest", &[results, candidates], BTreeMap::new(), |_| {
            let candidates = load_candidates(candidates)?;
            let records = ingest_results(results, &candidates).map_err(data)?;
            Ok(vec![(artifact::EVALS, jsonl::to_jsonl_bytes(&records))])
        })
    }

    /// Ranks candidates and tests by mutual validation and writes
    /// scores.jsonl.
    pub fn rank(
        &mut self,
        candidates: &Path,
        evals: &Path,
        tests: Option<&Path>,
    ) -> Result<StageStatus, PipelineError> {
        let mut inputs: Vec<&Path> = vec![candidates, evals];
        if let Some(tests) = tests {
            inputs.push(tests);
        }
        self.run_stage("rank", &inputs, BTreeMap::new(), |p| {
            let candidates = load_candidates(candidates)?;
            let evals = load_evals(evals)?;
            let tests = tests.map(load_tests).transpose()?;
            let entries = rank_dataset(&candidates, &evals, tests.as_deref(), p.config())?;
            Ok(vec![(artifact::SCORES, jsonl::to_jsonl_bytes(&entries))])
        })
    }

    /// Splits problem seeds into objective categories and writes
    /// partition.jsonl. `proportions` is `(correctness, security, gas)`.
    pub fn partition(
        &mut self,
        problems: &Path,
        proportions: (f64, f64, f64),
        seed: u64,
    ) -> Result<StageStatus, PipelineError> {
        let params = BTreeMap::from([
            (
                "proportions".to_string(),
                format!("{},{},{}", proportions.0, proportions.1, proportions.2),
            ),
            ("seed".to_string(), seed.to_string()),
        ]);
        self.run_stage("partition", &[problems], params, |_| {
            let problems = load_problems(problems)?;
            let ids: Vec<String> = problems.iter().map(|p| p.id.clone()).collect();
            let partition = partition_seeds(&ids, proportions, seed).map_err(usage)?;
            Ok(vec![(
                artifact::PARTITION,
                jsonl::to_jsonl_bytes(&partition.entries()),
            )])
        })
    }

    /// Builds preference pairs from the evaluated dataset, ranking scores,
    /// and seed partition, optionally subsampling each objective group, and
    /// writes pairs.jsonl.
    #[allow(clippy::too_many_arguments)]
    pub fn pairs(
        &mut self,
        problems: &Path,
        candidates: &Path,
        evals: &Path,
        scores: &Path,
        partition: &Path,
        subsample: Option<(f64, u64)>,
    ) -> Result<StageStatus, PipelineError> {
        let mut params = BTreeMap::new();
        if let Some((fraction, seed)) = subsample {
            params.insert("fraction".to_string(), fraction.to_string());
            params.insert("seed".to_string(), seed.to_string());
        }
        let inputs: Vec<&Path> = vec![problems, candidates, evals, scores, partition];
        self.run_stage("pairs", &inputs, params, |p| {
            let problems = load_problems(problems)?;
            let candidates = load_candidates(candidates)?;
            let evals = load_evals(evals)?;
            let score_entries: Vec<ScoreEntry> = jsonl::read_jsonl(scores).map_err(data)?;
            let partition_entries: Vec<PartitionEntry> =
                jsonl::read_jsonl(partition).map_err(data)?;
            check_clean(&validate_dataset(&problems, &candidates, &evals))?;
            let mut built = build_all_pairs(
                &problems,
                &candidates,
                &evals,
                &score_entries,
                &partition_entries,
                p.config(),
            )?;
            if let Some((fraction, seed)) = subsample {
                built = subsample_pairs(&built, fraction, seed).map_err(usage)?;
            }
            Ok(vec![(artifact::PAIRS, jsonl::to_jsonl_bytes(&built))])
        })
    }

    /// Scores every pair in loss_inputs.jsonl and writes loss_report.jsonl:
    /// one breakdown line per pair (in pair-id order) plus a final summary
    /// line with batch sums and means.
    pub fn loss(&mut self, inputs: &Path) -> Result<StageStatus, PipelineError> {
        self.run_stage("loss", &[inputs], BTreeMap::new(), |p| {
            let rows: Vec<(usize, LossInput)> = jsonl::read_jsonl_numbered(inputs).map_err(data)?;
            let display = inputs.display();
            let mut seen = BTreeSet::new();
            for (line, input) in &rows {
                if input.gas_chosen.is_some() != input.gas_rejected.is_some() {
                    return Err(PipelineError::Data(format!(
                        "{display}:{line}: pair '{}' has gas for only one side; \
                         provide both measurements or neither",
                        input.pair_id
                    )));
                }
                if !seen.insert(input.pair_id.as_str()) {
                    return Err(PipelineError::Data(format!(
                        "{display}:{line}: duplicate pair id '{}'",
                        input.pair_id
                    )));
                }
            }
            let mut sorted: Vec<&LossInput> = rows.iter().map(|(_, input)| input).collect();
            sorted.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
            let breakdowns: Vec<_> = sorted
                .iter()
                .map(|input| compute_loss(input, p.config()))
                .collect();
            let summary = summarize(&breakdowns);
            let mut lines: Vec<LossReportLine> =
                breakdowns.into_iter().map(LossReportLine::Pair).collect();
            lines.push(LossReportLine::Summary(summary));
            Ok(vec![(artifact::LOSS_REPORT, jsonl::to_jsonl_bytes(&lines))])
        })
    }

    /// Computes Task@k per problem and in aggregate, writing metrics.csv and
    /// metrics.txt. A dataset with no evaluated candidates is not an error:
    /// the outputs say "no data".
    pub fn metrics(
        &mut self,
        problems: &Path,
        candidates: &Path,
        evals: &Path,
    ) -> Result<StageStatus, PipelineError> {
        self.run_stage(
            "metrics",
            &[problems, candidates, evals],
            BTreeMap::new(),
            |p| {
                let problems = load_problems(problems)?;
                let candidates = load_candidates(candidates)?;
                let evals = load_evals(evals)?;
                check_clean(&validate_dataset(&problems, &candidates, &evals))?;
                let per = compute_all_metrics(&problems, &candidates, &evals, p.config())?;
                let aggregate = aggregate_rows(&per, &p.config().k_values);
                Ok(vec![
                    (
                        artifact::METRICS_CSV,
                        render_metrics_csv(&per, &aggregate).into_bytes(),
                    ),
                    (
                        artifact::METRICS_TXT,
                        render_metrics_txt(&per, &aggregate).into_bytes(),
                    ),
                ])
            },
        )
    }

    /// Renders report.md from the dataset, pairs.jsonl, and
    /// loss_report.jsonl. Requires the pair and loss artifacts to exist;
    /// metrics are recomputed from evals so the report and metrics.csv can
    /// never disagree.
    pub fn report(
        &mut self,
        problems: &Path,
        candidates: &Path,
        evals: &Path,
        pairs: &Path,
        loss_report: &Path,
    ) -> Result<StageStatus, PipelineError> {
        let inputs: Vec<&Path> = vec![problems, candidates, evals, pairs, loss_report];
        self.run_stage("report", &inputs, BTreeMap::new(), |p| {
            let problems = load_problems(problems)?;
            let candidates = load_candidates(candidates)?;
            let evals = load_evals(evals)?;
            let pair_rows: Vec<PreferencePair> = jsonl::read_jsonl(pairs).map_err(data)?;
            let loss_lines: Vec<LossReportLine> = jsonl::read_jsonl(loss_report).map_err(data)?;
            check_clean(&validate_dataset(&problems, &candidates, &evals))?;

            let loss_summary: LossSummary = loss_lines
                .iter()
                .rev()
                .find_map(|line| match line {
                    LossReportLine::Summary(s) => Some(*s),
                    LossReportLine::Pair(_) => None,
                })
                .ok_or_else(|| {
                    PipelineError::Data(format!(
                        "'{}' has no summary line; re-run the loss stage",
                        loss_report.display()
                    ))
                })?;

            let per = compute_all_metrics(&problems, &candidates, &evals, p.config())?;
            let aggregate = aggregate_rows(&per, &p.config().k_values);

            let by_id: BTreeMap<&str, &Problem> =
                problems.iter().map(|p| (p.id.as_str(), p)).collect();
            let mut funnel = FunnelCounts::default();
            for (problem_id, records) in &group_evals_by_problem(&candidates, &evals) {
                let problem = by_id.get(problem_id).expect("validated dataset");
                let counts = derive_counts(problem, records, p.config());
                funnel.candidates += u64::from(counts.n);
                funnel.compiled += u64::from(counts.c_compile);
                funnel.passed += u64::from(counts.c_pass);
                funnel.secure += u64::from(counts.c_secure);
                funnel.cheaper_than_reference += u64::from(counts.c_gas);
            }

            let mut pair_counts = PairCounts::default();
            for pair in &pair_rows {
                match pair.objective {
                    Objective::Correctness => pair_counts.correctness += 1,
                    Objective::Security => pair_counts.security += 1,
                    Objective::Gas => pair_counts.gas += 1,
                }
            }

            let excluded: Vec<String> = per
                .iter()
                .filter(|m| !m.no_data && m.counts.gas_excluded)
                .map(|m| m.problem_id.clone())
                .collect();
            let no_data: Vec<String> = per
                .iter()
                .filter(|m| m.no_data)
                .map(|m| m.problem_id.clone())
                .collect();

            let report = render_report(&ReportData {
                tool_version: TOOL_VERSION,
                problem_count: problems.len(),
                funnel,
                pairs: pair_counts,
                aggregate: &aggregate,
                problems_with_data: per.len() - no_data.len(),
                excluded_from_gas: &excluded,
                no_data_problems: &no_data,
                loss: &loss_summary,
            });
            Ok(vec![(artifact::REPORT_MD, report.into_bytes())])
        })
    }
}
