//! Seeded experiment sweeps, summaries and verification suites for the
//! `spbfgs` optimizer.

pub mod checks;
pub mod config;
pub mod error;
pub mod experiment;
pub mod summary;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

pub use error::BenchError;
pub use experiment::{run_experiment, ExperimentOutput, ExperimentSpec};

/// Writes `summary.csv`, `runs.csv` and, when traces were kept,
/// `traces.csv` into the spec's output directory. Returns the paths written.
pub fn write_outputs(spec: &ExperimentSpec, out: &ExperimentOutput) -> Result<Vec<PathBuf>, BenchError> {
    fs::create_dir_all(&spec.out_dir)?;
    let mut written = Vec::new();
    let summary = spec.out_dir.join("summary.csv");
    summary::write_summary_csv(&out.rows, BufWriter::new(File::create(&summary)?))?;
    written.push(summary);
    let runs = spec.out_dir.join("runs.csv");
    summary::write_runs_csv(&out.results, BufWriter::new(File::create(&runs)?))?;
    written.push(runs);
    if spec.write_traces {
        let traces = spec.out_dir.join("traces.csv");
        summary::write_trace_csv(&out.results, BufWriter::new(File::create(&traces)?))?;
        written.push(traces);
    }
    Ok(written)
}
