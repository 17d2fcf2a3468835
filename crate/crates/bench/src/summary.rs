//! Per-cell statistics of the optimality gap and the CSV writers.

use std::io::Write;

use crate::error::BenchError;
use crate::experiment::RunResult;

pub const SUMMARY_HEADER: [&str; 11] = [
    "problem",
    "method",
    "eps_f",
    "eps_g",
    "n_runs",
    "mean_dopt",
    "median_dopt",
    "min_dopt",
    "max_dopt",
    "var_dopt",
    "mean_iters",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Stats {
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    /// Sample variance (denominator `n - 1`); `None` for a single sample.
    pub var: Option<f64>,
}

pub fn stats(samples: &[f64]) -> Option<Stats> {
    if samples.is_empty() {
        return None;
    }
    let n = samples.len();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
    let var = (n > 1).then(|| sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64);
    Some(Stats { mean, median, min: sorted[0], max: sorted[n - 1], var })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub problem: String,
    pub method: String,
    pub eps_f: f64,
    pub eps_g: f64,
    /// Successful runs in the cell.
    pub n_runs: usize,
    pub n_failed: usize,
    pub n_floored: usize,
    pub dopt: Option<Stats>,
    pub mean_iters: Option<f64>,
}

/// Groups results by (problem, method, cell) in order of first appearance.
/// Cells whose runs all failed yield a row with `n_runs = 0` and no stats.
pub fn summarize_cells(results: &[RunResult]) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = Vec::new();
    let mut groups: Vec<Vec<&RunResult>> = Vec::new();
    for r in results {
        let pos = rows.iter().position(|row| {
            row.problem == r.problem && row.method == r.method && (row.eps_f, row.eps_g) == r.cell_eps
        });
        match pos {
            Some(i) => groups[i].push(r),
            None => {
                rows.push(SummaryRow {
                    problem: r.problem.clone(),
                    method: r.method.clone(),
                    eps_f: r.cell_eps.0,
                    eps_g: r.cell_eps.1,
                    n_runs: 0,
                    n_failed: 0,
                    n_floored: 0,
                    dopt: None,
                    mean_iters: None,
                });
                groups.push(vec![r]);
            }
        }
    }
    for (row, group) in rows.iter_mut().zip(groups) {
        let ok: Vec<&RunResult> = group.iter().copied().filter(|r| r.succeeded()).collect();
        row.n_runs = ok.len();
        row.n_failed = group.len() - ok.len();
        row.n_floored = ok.iter().filter(|r| r.floored).count();
        let d: Vec<f64> = ok.iter().map(|r| r.dopt).collect();
        row.dopt = stats(&d);
        row.mean_iters =
            (!ok.is_empty()).then(|| ok.iter().map(|r| r.iterations as f64).sum::<f64>() / ok.len() as f64);
    }
    rows
}

/// Like [`summarize_cells`] but requires at least one successful run per cell.
pub fn summarize(results: &[RunResult]) -> Result<Vec<SummaryRow>, BenchError> {
    let rows = summarize_cells(results);
    if let Some(r) = rows.iter().find(|r| r.n_runs == 0) {
        return Err(BenchError::EmptyCell {
            problem: r.problem.clone(),
            method: r.method.clone(),
            eps_f: r.eps_f,
            eps_g: r.eps_g,
        });
    }
    Ok(rows)
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        let s = r.dopt.as_ref();
        w.write_record([
            r.problem.clone(),
            r.method.clone(),
            num(r.eps_f),
            num(r.eps_g),
            r.n_runs.to_string(),
            opt(s.map(|s| s.mean)),
            opt(s.map(|s| s.median)),
            opt(s.map(|s| s.min)),
            opt(s.map(|s| s.max)),
            opt(s.and_then(|s| s.var)),
            opt(r.mean_iters),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const RUNS_HEADER: [&str; 19] = [
    "problem",
    "method",
    "cell_eps_f",
    "cell_eps_g",
    "replicate",
    "seed",
    "eps_f",
    "eps_g",
    "status",
    "phi_best",
    "phi_final",
    "dopt",
    "dopt_floored",
    "iterations",
    "f_evals",
    "g_evals",
    "curvature_failures",
    "null_steps",
    "error",
];

pub fn write_runs_csv<W: Write>(results: &[RunResult], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RUNS_HEADER)?;
    for r in results {
        w.write_record([
            r.problem.clone(),
            r.method.clone(),
            num(r.cell_eps.0),
            num(r.cell_eps.1),
            r.replicate.to_string(),
            r.seed.to_string(),
            num(r.eps_f),
            num(r.eps_g),
            if r.succeeded() { "ok" } else { "failed" }.to_string(),
            num(r.phi_best),
            num(r.phi_final),
            num(r.dopt),
            r.floored.to_string(),
            r.iterations.to_string(),
            r.f_evals.to_string(),
            r.g_evals.to_string(),
            r.curvature_failures.to_string(),
            r.null_steps.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const TRACE_HEADER: [&str; 20] = [
    "problem",
    "method",
    "cell_eps_f",
    "cell_eps_g",
    "replicate",
    "k",
    "evals",
    "f",
    "phi",
    "phi_best",
    "grad_norm",
    "alpha",
    "beta",
    "sty",
    "curvature_failed",
    "updated",
    "f_carried",
    "h_pd",
    "scaled_cond",
    "x",
];

/// Long format: one row per iteration per run.
pub fn write_trace_csv<W: Write>(results: &[RunResult], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in results {
        let Some(trace) = &r.trace else { continue };
        for rec in trace {
            let x: Vec<String> = rec.x.iter().map(|v| num(*v)).collect();
            w.write_record([
                r.problem.clone(),
                r.method.clone(),
                num(r.cell_eps.0),
                num(r.cell_eps.1),
                r.replicate.to_string(),
                rec.k.to_string(),
                rec.evals.to_string(),
                num(rec.f),
                num(rec.phi),
                num(rec.phi_best),
                num(rec.grad_norm),
                opt(rec.alpha),
                rec.beta.map(|b| b.to_string()).unwrap_or_default(),
                opt(rec.sty),
                rec.curvature_failed.to_string(),
                rec.updated.to_string(),
                opt(rec.f_carried),
                rec.h_positive_definite.map(|b| b.to_string()).unwrap_or_default(),
                opt(rec.scaled_cond),
                x.join(" "),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
