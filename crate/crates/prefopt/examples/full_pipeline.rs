//! The whole pipeline, driven through the library API.
//!
//! Stages: evaluate -> rank -> partition -> pairs -> loss -> metrics ->
//! report, against the bundled demo dataset (3 problems x 10 candidates).
//! Every artifact lands in a temporary directory together with the run
//! manifest; running a stage twice is a no-op, which the example
//! demonstrates at the end.
//!
//! ```text
//! cargo run --example full_pipeline
//! ```

use std::fs;
use std::path::Path;

use prefopt::config::Config;
use prefopt::pipeline::{artifact, BackendKind, Pipeline, StageStatus};

fn describe(stage: &str, status: &StageStatus) {
    match status {
        StageStatus::Ran(outputs) => println!("{stage}: wrote {}", outputs.join(", ")),
        StageStatus::UpToDate(outputs) => println!("{stage}: up to date ({})", outputs.join(", ")),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let data = dir.path();

    // Stage the demo dataset next to the output directory.
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    for name in ["problems.jsonl", "candidates.jsonl", "rules.jsonl", "loss_inputs.jsonl"] {
        fs::copy(fixtures.join(name), data.join(name))?;
    }
    let problems = data.join("problems.jsonl");
    let candidates = data.join("candidates.jsonl");
    let rules = data.join("rules.jsonl");
    let inputs = data.join("loss_inputs.jsonl");

    let out = data.join("out");
    let mut pipeline = Pipeline::open(&out, Config::default())?;

    let status = pipeline.evaluate(&problems, &candidates, BackendKind::Mock, &rules)?;
    describe("evaluate", &status);

    let evals = out.join(artifact::EVALS);
    describe("rank", &pipeline.rank(&candidates, &evals, None)?);
    describe("partition", &pipeline.partition(&problems, (0.34, 0.33, 0.33), 42)?);

    let scores = out.join(artifact::SCORES);
    let partition = out.join(artifact::PARTITION);
    describe(
        "pairs",
        &pipeline.pairs(&problems, &candidates, &evals, &scores, &partition, None)?,
    );
    describe("loss", &pipeline.loss(&inputs)?);
    describe("metrics", &pipeline.metrics(&problems, &candidates, &evals)?);

    let pairs = out.join(artifact::PAIRS);
    let loss_report = out.join(artifact::LOSS_REPORT);
    describe(
        "report",
        &pipeline.report(&problems, &candidates, &evals, &pairs, &loss_report)?,
    );

    // A second run sees identical inputs, parameters, and outputs, so every
    // stage is skipped and no artifact byte changes.
    println!("\nsecond run:");
    describe("evaluate", &pipeline.evaluate(&problems, &candidates, BackendKind::Mock, &rules)?);
    describe("metrics", &pipeline.metrics(&problems, &candidates, &evals)?);

    println!("\n--- {} ---", artifact::REPORT_MD);
    print!("{}", fs::read_to_string(out.join(artifact::REPORT_MD))?);
    Ok(())
}
