//! Sweeps over problems, methods, noise cells and replicates.

use std::path::PathBuf;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use spbfgs::linalg::norm2;
use spbfgs::optimizer::IterationRecord;
use spbfgs::penalty::{BetaSchedule, PenaltyPolicy, Recovery, SkipRule};
use spbfgs::{
    minimize, minimize_baseline_bfgs, Budget, FkSource, LineSearchConfig, NoiseSpec, Problem, RunConfig,
};

use crate::error::BenchError;
use crate::summary::{summarize_cells, SummaryRow};

/// Smallest representable optimality gap; smaller gaps are recorded as
/// `log10 = -300` and flagged.
pub const DOPT_FLOOR: f64 = -300.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    /// Cells give `eps_f` and `eps_g` directly.
    Absolute,
    /// Cells are multipliers of `|phi(x0)|` and `||grad phi(x0)||`.
    Relative,
}

/// Source of the line-search relaxation `eps_A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRelaxation {
    /// `eps_A` equals the cell's function-noise bound.
    FunctionNoise,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    /// BFGS baseline with the given skip rule.
    Bfgs {
        skip_rule: SkipRule,
    },
    /// `beta = (scale / eps_g) ||s|| + offset`, resolved per noise cell.
    NoiseScaled {
        scale: f64,
        offset: f64,
        recovery: Recovery,
        skip_rule: SkipRule,
    },
    Fixed(PenaltyPolicy),
}

impl PolicySpec {
    pub fn resolve(&self, eps_g: f64) -> PenaltyPolicy {
        match *self {
            PolicySpec::Bfgs { skip_rule } => PenaltyPolicy { skip_rule, ..PenaltyPolicy::bfgs() },
            PolicySpec::NoiseScaled { scale, offset, recovery, skip_rule } => PenaltyPolicy {
                schedule: if eps_g > 0.0 {
                    BetaSchedule::LinearInStep { slope: scale / eps_g, offset }
                } else {
                    BetaSchedule::ConstantInfinity
                },
                recovery,
                skip_rule,
            },
            PolicySpec::Fixed(p) => p,
        }
    }

    fn is_baseline(&self) -> bool {
        matches!(self, PolicySpec::Bfgs { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub label: String,
    pub policy: PolicySpec,
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub name: String,
    pub problems: Vec<Problem>,
    pub methods: Vec<MethodSpec>,
    /// `(eps_f, eps_g)` pairs, absolute or relative per `noise_mode`.
    pub cells: Vec<(f64, f64)>,
    pub noise_mode: NoiseMode,
    pub replicates: usize,
    pub master_seed: u64,
    pub budget: Budget,
    pub line_search: LineSearchConfig,
    pub relaxation: StepRelaxation,
    pub fk_source: FkSource,
    pub hessian_diagnostics: bool,
    /// Worker threads; 0 picks the number of CPUs.
    pub workers: usize,
    pub out_dir: PathBuf,
    pub write_traces: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Invalid(m));
        if self.replicates == 0 {
            return bad("replicates must be >= 1".into());
        }
        if self.problems.is_empty() || self.methods.is_empty() || self.cells.is_empty() {
            return bad("need at least one problem, method and noise cell".into());
        }
        if let Some((f, g)) =
            self.cells.iter().find(|(f, g)| !(*f >= 0.0 && *g >= 0.0 && f.is_finite() && g.is_finite()))
        {
            return bad(format!("noise cell {f}:{g} must be finite and >= 0"));
        }
        if matches!(self.budget, Budget::FunctionEvals(0) | Budget::Iterations(0)) {
            return bad("budget must be > 0".into());
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].iter().any(|o| o.label == m.label) {
                return bad(format!("duplicate method label {}", m.label));
            }
            m.policy.resolve(1.0).validate()?;
        }
        for p in &self.problems {
            if p.phi_star().is_none() {
                return bad(format!("problem {} has no known optimal value", p.name()));
            }
        }
        self.line_search.validate()?;
        Ok(())
    }

    /// Effective `(eps_f, eps_g)` for a problem, computed from the true
    /// `phi(x0)` and `grad phi(x0)` before any noisy evaluation.
    pub fn effective_noise(&self, problem: &Problem, cell: (f64, f64)) -> (f64, f64) {
        match self.noise_mode {
            NoiseMode::Absolute => cell,
            NoiseMode::Relative => {
                let x0 = problem.x0();
                (cell.0 * problem.value(x0).abs(), cell.1 * norm2(&problem.gradient(x0)))
            }
        }
    }
}

/// Seed for one replicate, derived from every coordinate of the run so that
/// results do not depend on execution order.
pub fn derive_seed(master: u64, problem: &str, method: &str, cell: usize, replicate: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(problem.as_bytes());
    h.update([0u8]);
    h.update(method.as_bytes());
    h.update([0u8]);
    h.update((cell as u64).to_le_bytes());
    h.update((replicate as u64).to_le_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub problem: String,
    pub method: String,
    pub cell: usize,
    pub replicate: usize,
    /// Cell values as configured.
    pub cell_eps: (f64, f64),
    /// Noise bounds actually used.
    pub eps_f: f64,
    pub eps_g: f64,
    pub seed: u64,
    pub phi_star: f64,
    pub phi_best: f64,
    pub phi_final: f64,
    pub dopt: f64,
    pub floored: bool,
    pub iterations: usize,
    pub f_evals: usize,
    pub g_evals: usize,
    pub curvature_failures: usize,
    pub null_steps: usize,
    pub error: Option<String>,
    pub trace: Option<Vec<IterationRecord>>,
}

impl RunResult {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

/// `log10(phi_best - phi*)`, floored at [`DOPT_FLOOR`].
pub fn delta_opt(phi_best: f64, phi_star: f64) -> (f64, bool) {
    let gap = phi_best - phi_star;
    if gap <= 1e-300 {
        (DOPT_FLOOR, true)
    } else {
        (gap.log10(), false)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub results: Vec<RunResult>,
    pub rows: Vec<SummaryRow>,
}

impl ExperimentOutput {
    pub fn failed_runs(&self) -> usize {
        self.results.iter().filter(|r| !r.succeeded()).count()
    }
}

struct Job {
    problem: usize,
    method: usize,
    cell: usize,
    replicate: usize,
}

fn run_one(spec: &ExperimentSpec, job: &Job) -> RunResult {
    let problem = &spec.problems[job.problem];
    let method = &spec.methods[job.method];
    let cell_eps = spec.cells[job.cell];
    let (eps_f, eps_g) = spec.effective_noise(problem, cell_eps);
    let seed = derive_seed(spec.master_seed, problem.name(), &method.label, job.cell, job.replicate);
    let mut cfg = RunConfig::new(method.policy.resolve(eps_g), spec.budget, NoiseSpec { eps_f, eps_g, seed });
    cfg.ls = spec.line_search;
    cfg.ls.eps_a = match spec.relaxation {
        StepRelaxation::FunctionNoise => eps_f,
        StepRelaxation::Fixed(v) => v,
    };
    cfg.fk_source = spec.fk_source;
    cfg.record_hessian_diagnostics = spec.hessian_diagnostics;
    let phi_star = problem.phi_star().unwrap_or(f64::NAN);

    let outcome = if method.policy.is_baseline() {
        minimize_baseline_bfgs(problem, &cfg)
    } else {
        minimize(problem, &cfg)
    };
    let mut result = RunResult {
        problem: problem.name().to_string(),
        method: method.label.clone(),
        cell: job.cell,
        replicate: job.replicate,
        cell_eps,
        eps_f,
        eps_g,
        seed,
        phi_star,
        phi_best: f64::NAN,
        phi_final: f64::NAN,
        dopt: f64::NAN,
        floored: false,
        iterations: 0,
        f_evals: 0,
        g_evals: 0,
        curvature_failures: 0,
        null_steps: 0,
        error: None,
        trace: None,
    };
    match outcome {
        Err(e) => result.error = Some(e.to_string()),
        Ok(trace) => {
            let s = &trace.summary;
            result.phi_best = s.phi_best;
            result.phi_final = trace.records.last().map_or(f64::NAN, |r| r.phi);
            (result.dopt, result.floored) = delta_opt(s.phi_best, phi_star);
            result.iterations = s.iterations;
            result.f_evals = s.f_evals;
            result.g_evals = s.g_evals;
            result.curvature_failures = s.curvature_failures;
            result.null_steps = s.null_steps;
            result.error = s.failure.clone();
            if spec.write_traces {
                result.trace = Some(trace.records);
            }
        }
    }
    result
}

/// Executes every run of the sweep and aggregates the results. Runs are
/// independent; the returned order is (problem, method, cell, replicate)
/// regardless of scheduling. Failed runs are kept as failed results.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput, BenchError> {
    spec.validate()?;
    let mut jobs = Vec::new();
    for problem in 0..spec.problems.len() {
        for method in 0..spec.methods.len() {
            for cell in 0..spec.cells.len() {
                for replicate in 0..spec.replicates {
                    jobs.push(Job { problem, method, cell, replicate });
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| BenchError::Invalid(format!("cannot start worker pool: {e}")))?;
    let results: Vec<RunResult> = pool.install(|| jobs.par_iter().map(|j| run_one(spec, j)).collect());
    let rows = summarize_cells(&results);
    Ok(ExperimentOutput { results, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use spbfgs::problems::rosenbrock;

    fn spec() -> ExperimentSpec {
        ExperimentSpec {
            name: "t".into(),
            problems: vec![rosenbrock()],
            methods: vec![
                MethodSpec {
                    label: "sp".into(),
                    policy: PolicySpec::NoiseScaled {
                        scale: 1e8,
                        offset: 1e-10,
                        recovery: Recovery::Skip,
                        skip_rule: SkipRule::None,
                    },
                },
                MethodSpec {
                    label: "bfgs".into(),
                    policy: PolicySpec::Bfgs { skip_rule: SkipRule::SkipOnNonpositive },
                },
            ],
            cells: vec![(0.0, 1e-2)],
            noise_mode: NoiseMode::Absolute,
            replicates: 3,
            master_seed: 11,
            budget: Budget::FunctionEvals(300),
            line_search: LineSearchConfig::default(),
            relaxation: StepRelaxation::FunctionNoise,
            fk_source: FkSource::Carry,
            hessian_diagnostics: false,
            workers: 2,
            out_dir: PathBuf::from("unused"),
            write_traces: false,
        }
    }

    #[test]
    fn seeds_depend_on_every_coordinate() {
        let base = derive_seed(1, "A", "m", 0, 0);
        assert_ne!(base, derive_seed(2, "A", "m", 0, 0));
        assert_ne!(base, derive_seed(1, "B", "m", 0, 0));
        assert_ne!(base, derive_seed(1, "A", "n", 0, 0));
        assert_ne!(base, derive_seed(1, "A", "m", 1, 0));
        assert_ne!(base, derive_seed(1, "A", "m", 0, 1));
        assert_eq!(base, derive_seed(1, "A", "m", 0, 0));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut s = spec();
        let a = run_experiment(&s).unwrap();
        s.workers = 1;
        let b = run_experiment(&s).unwrap();
        let key = |o: &ExperimentOutput| {
            o.results.iter().map(|r| (r.seed, r.phi_best.to_bits())).collect::<Vec<_>>()
        };
        assert_eq!(key(&a), key(&b));
        assert_eq!(a.rows.len(), 2);
    }

    #[test]
    fn floor_applies_to_exact_hits() {
        assert_eq!(delta_opt(0.0, 0.0), (DOPT_FLOOR, true));
        assert_eq!(delta_opt(1e-3, 0.0), ((1e-3f64).log10(), false));
    }

    #[test]
    fn relative_noise_uses_start_point() {
        let mut s = spec();
        s.noise_mode = NoiseMode::Relative;
        let p = rosenbrock();
        let (ef, eg) = s.effective_noise(&p, (1e-4, 1e-4));
        assert!((ef - 1e-4 * 24.2).abs() < 1e-12);
        assert!((eg - 1e-4 * norm2(&p.gradient(p.x0()))).abs() < 1e-12);
    }
}
