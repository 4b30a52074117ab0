//! Command-line front end. All real work lives in [`crate::pipeline`]; this
//! module only parses arguments, resolves default artifact paths, and maps
//! errors to the exit-code contract:
//!
//! - 0: success
//! - 1: data error (bad or inconsistent input files, stale artifacts)
//! - 2: usage or configuration error (clap uses the same code for bad flags)

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::Config;
use crate::pipeline::{artifact, validate_files, BackendKind, Pipeline, PipelineError, StageStatus};

#[derive(Debug, Parser)]
#[command(
    name = "prefopt",
    version,
    about = "Preference-optimization toolkit for code generation:\n\
             Task@k metrics, code/test mutual-validation ranking, multi-objective\n\
             preference pairs, and a DPO loss extended with gas and security rewards."
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Configuration file (flat `key = value` lines).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Output directory holding the artifacts and run manifest.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,

    /// RNG seed for partitioning and subsampling.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    pub seed: u64,

    /// Override one configuration key (repeatable), e.g. `--set tau=0.2`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check dataset invariants and cross-references without writing anything.
    Validate {
        #[arg(long, value_name = "FILE")]
        problems: PathBuf,
        #[arg(long, value_name = "FILE")]
        candidates: PathBuf,
        #[arg(long, value_name = "FILE")]
        evals: Option<PathBuf>,
    },

    /// Run every candidate through an evaluation backend; writes evals.jsonl.
    Evaluate {
        #[arg(long, value_name = "FILE")]
        problems: PathBuf,
        #[arg(long, value_name = "FILE")]
        candidates: PathBuf,
        /// Evaluation backend: mock or replay.
        #[arg(long, env = "PREFOPT_BACKEND", default_value = "mock")]
        backend: BackendKind,
        /// Rule table for the mock backend.
        #[arg(long, value_name = "FILE")]
        rules: Option<PathBuf>,
        /// Recorded tool output for the replay backend.
        #[arg(long, value_name = "FILE")]
        results: Option<PathBuf>,
    },

    /// Convert raw tool output into canonical evaluation records; writes
    /// evals.jsonl.
    Ingest {
        #[arg(long, value_name = "FILE")]
        results: PathBuf,
        #[arg(long, value_name = "FILE")]
        candidates: PathBuf,
    },

    /// Score candidates and tests by mutual validation; writes scores.jsonl.
    Rank {
        #[arg(long, value_name = "FILE")]
        candidates: PathBuf,
        /// Evaluation records [default: <out>/evals.jsonl].
        #[arg(long, value_name = "FILE")]
        evals: Option<PathBuf>,
        /// Per-test roster enabling multi-test graphs.
        #[arg(long, value_name = "FILE")]
        tests: Option<PathBuf>,
    },

    /// Split problem seeds into objective categories; writes partition.jsonl.
    Partition {
        #[arg(long, value_name = "FILE")]
        problems: PathBuf,
        /// Comma-separated correctness,security,gas fractions.
        #[arg(long, value_name = "C,S,G", default_value = "0.8,0.1,0.1")]
        proportions: String,
    },

    /// Build preference pairs from evaluations, ranking scores, and the seed
    /// partition; writes pairs.jsonl.
    Pairs {
        #[arg(long, value_name = "FILE")]
        problems: PathBuf,
        #[arg(long, value_name = "FILE")]
        candidates: PathBuf,
        /// Evaluation records [default: <out>/evals.jsonl].
        #[arg(long, value_name = "FILE")]
        evals: Option<PathBuf>,
        /// Ranking scores [default: <out>/scores.jsonl].
        #[arg(long, value_name = "FILE")]
        scores: Option<PathBuf>,
        /// Seed partition [default: <out>/partition.jsonl].
        #[arg(long, value_name = "FILE")]
        partition: Option<PathBuf>,
        /// Keep this fraction of each objective group (stratified, seeded).
        #[arg(long, value_name = "F")]
        fraction: Option<f64>,
    },

    /// Score preference pairs with the extended DPO loss; writes
    /// loss_report.jsonl.
    Loss {
        /// Pair log-probabilities and annotations (loss_inputs.jsonl).
        #[arg(long, value_name = "FILE")]
        inputs: PathBuf,
    },

    /// Compute Task@k per problem and in aggregate; writes metrics.csv and
    /// metrics.txt.
    Metrics {
        #[arg(long, value_name = "FILE")]
        problems: PathBuf,
        #[arg(long, value_name = "FILE")]
        candidates: PathBuf,
        /// Evaluation records [default: <out>/evals.jsonl].
        #[arg(long, value_name = "FILE")]
        evals: Option<PathBuf>,
    },

    /// Render the markdown dataset report; writes report.md.
    Report {
        #[arg(long, value_name = "FILE")]
        problems: PathBuf,
        #[arg(long, value_name = "FILE")]
        candidates: PathBuf,
        /// Evaluation records [default: <out>/evals.jsonl].
        #[arg(long, value_name = "FILE")]
        evals: Option<PathBuf>,
        /// Preference pairs [default: <out>/pairs.jsonl].
        #[arg(long, value_name = "FILE")]
        pairs: Option<PathBuf>,
        /// Loss report [default: <out>/loss_report.jsonl].
        #[arg(long, value_name = "FILE")]
        loss_report: Option<PathBuf>,
    },
}

/// Defaults plus config file plus `--set` overrides, validated once at the
/// end so an override can legally fix an invalid file value.
fn effective_config(global: &GlobalArgs) -> Result<Config, PipelineError> {
    let mut config = Config::default();
    if let Some(path) = &global.config {
        let text = std::fs::read_to_string(path).map_err(|e| {
            PipelineError::Usage(format!("failed to read config '{}': {e}", path.display()))
        })?;
        config
            .apply_str(&text, &path.display().to_string())
            .map_err(|e| PipelineError::Usage(e.to_string()))?;
    }
    for kv in &global.overrides {
        let Some((key, value)) = kv.split_once('=') else {
            return Err(PipelineError::Usage(format!(
                "--set expects KEY=VALUE, got '{kv}'"
            )));
        };
        config
            .set(key.trim(), value.trim())
            .map_err(|message| PipelineError::Usage(format!("--set {kv}: {message}")))?;
    }
    config
        .validate()
        .map_err(|e| PipelineError::Usage(e.to_string()))?;
    Ok(config)
}

fn parse_proportions(s: &str) -> Result<(f64, f64, f64), PipelineError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(PipelineError::Usage(format!(
            "--proportions expects three comma-separated numbers \
             (correctness,security,gas), got '{s}'"
        )));
    }
    let mut values = [0.0f64; 3];
    for (slot, part) in values.iter_mut().zip(&parts) {
        *slot = part.parse().map_err(|e| {
            PipelineError::Usage(format!("--proportions: cannot parse '{part}': {e}"))
        })?;
    }
    Ok((values[0], values[1], values[2]))
}

fn print_status(stage: &str, status: &StageStatus) {
    let names = status.artifacts().join(", ");
    match status {
        StageStatus::Ran(_) => println!("{stage}: wrote {names}"),
        StageStatus::UpToDate(_) => println!("{stage}: up to date ({names})"),
    }
}

fn execute(cli: Cli) -> Result<(), PipelineError> {
    let config = effective_config(&cli.global)?;
    let out = &cli.global.out;
    let seed = cli.global.seed;
    let default_in_out = |name: &str| out.join(name);

    if let Command::Validate {
        problems,
        candidates,
        evals,
    } = &cli.command
    {
        let report = validate_files(problems, candidates, evals.as_deref())?;
        if report.is_clean() {
            println!("{report}");
            return Ok(());
        }
        print!("{report}");
        return Err(PipelineError::Data(format!(
            "{} violation(s) found",
            report.violations.len()
        )));
    }

    let mut pipeline = Pipeline::open(out, config)?;
    let (stage, status) = match cli.command {
        Command::Validate { .. } => unreachable!("handled above"),
        Command::Evaluate {
            problems,
            candidates,
            backend,
            rules,
            results,
        } => {
            let source = match backend {
                BackendKind::Mock => rules.ok_or_else(|| {
                    PipelineError::Usage("--rules is required with the mock backend".to_string())
                })?,
                BackendKind::Replay => results.ok_or_else(|| {
                    PipelineError::Usage(
                        "--results is required with the replay backend".to_string(),
                    )
                })?,
            };
            (
                "evaluate",
                pipeline.evaluate(&problems, &candidates, backend, &source)?,
            )
        }
        Command::Ingest {
            results,
            candidates,
        } => ("ingest", pipeline.ingest(&results, &candidates)?),
        Command::Rank {
            candidates,
            evals,
            tests,
        } => {
            let evals = evals.unwrap_or_else(|| default_in_out(artifact::EVALS));
            ("rank", pipeline.rank(&candidates, &evals, tests.as_deref())?)
        }
        Command::Partition {
            problems,
            proportions,
        } => {
            let proportions = parse_proportions(&proportions)?;
            (
                "partition",
                pipeline.partition(&problems, proportions, seed)?,
            )
        }
        Command::Pairs {
            problems,
            candidates,
            evals,
            scores,
            partition,
            fraction,
        } => {
            let evals = evals.unwrap_or_else(|| default_in_out(artifact::EVALS));
            let scores = scores.unwrap_or_else(|| default_in_out(artifact::SCORES));
            let partition = partition.unwrap_or_else(|| default_in_out(artifact::PARTITION));
            let subsample = fraction.map(|f| (f, seed));
            (
                "pairs",
                pipeline.pairs(&problems, &candidates, &evals, &scores, &partition, subsample)?,
            )
        }
        Command::Loss { inputs } => ("loss", pipeline.loss(&inputs)?),
        Command::Metrics {
            problems,
            candidates,
            evals,
        } => {
            let evals = evals.unwrap_or_else(|| default_in_out(artifact::EVALS));
            ("metrics", pipeline.metrics(&problems, &candidates, &evals)?)
        }
        Command::Report {
            problems,
            candidates,
            evals,
            pairs,
            loss_report,
        } => {
            let evals = evals.unwrap_or_else(|| default_in_out(artifact::EVALS));
            let pairs = pairs.unwrap_or_else(|| default_in_out(artifact::PAIRS));
            let loss_report =
                loss_report.unwrap_or_else(|| default_in_out(artifact::LOSS_REPORT));
            (
                "report",
                pipeline.report(&problems, &candidates, &evals, &pairs, &loss_report)?,
            )
        }
    };
    print_status(stage, &status);
    Ok(())
}

/// Parses arguments from the process environment, runs the command, and
/// returns the exit code. Errors print to stderr.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
