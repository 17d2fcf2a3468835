//! The SP-BFGS minimization loop and its BFGS baseline.

use crate::diagnostics::scaled_condition_number;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, sub, DenseVector, SymMatrix};
use crate::line_search::{backtrack, LineSearchConfig};
use crate::noise::{NoiseSpec, NoisyOracle};
use crate::penalty::{
    baseline_skip_check, propose_beta, resolve_beta, BetaSchedule, PenaltyPolicy, SkipRule, UpdateAction,
};
use crate::problems::Problem;
use crate::update::{compute_penalty_scalars, spbfgs_update, Beta, CurvaturePair};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    /// Noisy function evaluations, line-search trials included.
    FunctionEvals(usize),
    Iterations(usize),
}

/// Which noisy value plays `f_k` in the sufficient-decrease test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FkSource {
    /// Reuse the value measured at the accepted trial point.
    #[default]
    Carry,
    /// Spend one evaluation per iteration to measure `f(x_k)` afresh.
    Remeasure,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub policy: PenaltyPolicy,
    pub ls: LineSearchConfig,
    pub budget: Budget,
    /// Initial inverse-Hessian approximation; `None` means the identity.
    pub h0: Option<SymMatrix>,
    pub x0: Option<DenseVector>,
    pub noise: NoiseSpec,
    pub record_hessian_diagnostics: bool,
    pub fk_source: FkSource,
}

impl RunConfig {
    pub fn new(policy: PenaltyPolicy, budget: Budget, noise: NoiseSpec) -> Self {
        RunConfig {
            policy,
            ls: LineSearchConfig::default(),
            budget,
            h0: None,
            x0: None,
            noise,
            record_hessian_diagnostics: false,
            fk_source: FkSource::Carry,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        self.policy.validate()?;
        self.ls.validate()?;
        self.noise.validate()?;
        match self.budget {
            Budget::FunctionEvals(0) | Budget::Iterations(0) => {
                return Err(Error::InvalidParameter("budget must be > 0".into()))
            }
            _ => {}
        }
        if let Some(h0) = &self.h0 {
            h0.check_dim(n)?;
            if !h0.is_positive_definite() {
                return Err(Error::InvalidParameter("H0 must be positive definite".into()));
            }
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: x0.len() });
            }
        }
        Ok(())
    }
}

/// State at the start of iteration `k`, plus what happened on the step that
/// produced it (`None` fields for `k = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub x: DenseVector,
    /// Noisy value used as `f_k`.
    pub f: f64,
    /// Fresh measurement at `x_k` when re-measuring; the carried value stays in `f_carried`.
    pub f_carried: Option<f64>,
    pub phi: f64,
    pub grad_norm: f64,
    pub phi_best: f64,
    pub alpha: Option<f64>,
    pub beta: Option<Beta>,
    pub sty: Option<f64>,
    pub curvature_failed: bool,
    pub updated: bool,
    pub evals: usize,
    pub h_positive_definite: Option<bool>,
    pub scaled_cond: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub phi_best: f64,
    pub iterations: usize,
    pub curvature_failures: usize,
    /// Accepted steps that left `x` unchanged in floating point.
    pub null_steps: usize,
    pub f_evals: usize,
    pub g_evals: usize,
    /// Reason the run was aborted, if it was.
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub problem: String,
    pub records: Vec<IterationRecord>,
    pub summary: RunSummary,
    pub final_h: SymMatrix,
}

impl RunTrace {
    pub fn failed(&self) -> bool {
        self.summary.failure.is_some()
    }

    pub fn final_x(&self) -> &[f64] {
        &self.records.last().expect("trace has an initial record").x
    }
}

struct Loop<'a> {
    problem: &'a Problem,
    cfg: &'a RunConfig,
    oracle: NoisyOracle,
    records: Vec<IterationRecord>,
    h: SymMatrix,
    failures: usize,
    null_steps: usize,
}

impl Loop<'_> {
    fn record(&mut self, mut rec: IterationRecord) {
        rec.phi_best = self.oracle.best_phi().min(rec.phi);
        rec.grad_norm = norm2(&self.problem.gradient(&rec.x));
        rec.evals = self.oracle.f_evals();
        if self.cfg.record_hessian_diagnostics {
            rec.h_positive_definite = Some(self.h.is_positive_definite());
            rec.scaled_cond =
                self.problem.hessian(&rec.x).and_then(|hess| scaled_condition_number(&self.h, &hess).ok());
        }
        self.records.push(rec);
    }

    fn remaining_evals(&self) -> Option<usize> {
        match self.cfg.budget {
            Budget::FunctionEvals(n) => Some(n.saturating_sub(self.oracle.f_evals())),
            Budget::Iterations(_) => None,
        }
    }

    fn run(&mut self, x0: DenseVector) -> Result<()> {
        let mut x = x0;
        let mut f = self.oracle.noisy_f(&x)?;
        let mut phi = self.oracle.last_phi();
        let mut g = self.oracle.noisy_g(&x)?;
        self.record(blank_record(0, x.clone(), f, phi));

        let mut k = 0;
        loop {
            if let Budget::Iterations(n) = self.cfg.budget {
                if k >= n {
                    break;
                }
            }
            if self.remaining_evals() == Some(0) {
                break;
            }
            if self.cfg.fk_source == FkSource::Remeasure && k > 0 {
                let carried = f;
                f = self.oracle.noisy_f(&x)?;
                if let Some(rec) = self.records.last_mut() {
                    rec.f = f;
                    rec.f_carried = Some(carried);
                }
                if self.remaining_evals() == Some(0) {
                    break;
                }
            }

            let p: DenseVector = self.h.matvec(&g).iter().map(|v| -v).collect();
            let gp = dot(&g, &p);
            let limit = self.remaining_evals();
            let ls = backtrack(&mut self.oracle, &x, &p, f, gp, &self.cfg.ls, limit)?;
            if ls.truncated {
                break;
            }
            k += 1;

            let Some(trial) = ls.accepted else {
                // Exhausted search: stay put, resample the gradient, no update.
                g = self.oracle.noisy_g(&x)?;
                let mut rec = blank_record(k, x.clone(), f, phi);
                rec.alpha = Some(0.0);
                self.record(rec);
                continue;
            };

            let g_new = self.oracle.noisy_g(&trial.x)?;
            if trial.x == x {
                // The step vanished in floating point; treat it like alpha = 0.
                self.null_steps += 1;
                f = trial.f;
                g = g_new;
                let mut rec = blank_record(k, x.clone(), f, phi);
                rec.alpha = Some(ls.alpha);
                self.record(rec);
                continue;
            }
            let pair = CurvaturePair::new(sub(&trial.x, &x), sub(&g_new, &g))?;
            let (beta, curvature_failed, updated) = self.update(&pair);
            if curvature_failed {
                self.failures += 1;
            }

            x = trial.x;
            f = trial.f;
            phi = trial.phi;
            g = g_new;
            let mut rec = blank_record(k, x.clone(), f, phi);
            rec.alpha = Some(ls.alpha);
            rec.beta = beta;
            rec.sty = Some(pair.sty());
            rec.curvature_failed = curvature_failed;
            rec.updated = updated;
            self.record(rec);
        }
        Ok(())
    }

    /// Chooses beta, applies recovery and updates `H`. Returns the beta
    /// actually used, whether the curvature test failed, and whether `H`
    /// changed.
    fn update(&mut self, pair: &CurvaturePair) -> (Option<Beta>, bool, bool) {
        let policy = &self.cfg.policy;
        if !baseline_skip_check(&policy.skip_rule, pair) {
            return (Some(Beta::ZERO), true, false);
        }
        let proposed = propose_beta(&policy.schedule, pair.s());
        let (beta, action) = resolve_beta(&policy.recovery, pair, proposed);
        let failed = beta != proposed || action == UpdateAction::Skipped;
        if action == UpdateAction::Skipped {
            return (Some(beta), failed, false);
        }
        // Overflowing scalars or entries are treated like a failed curvature
        // test: the update is dropped and H is kept.
        let next = compute_penalty_scalars(pair, beta).and_then(|sc| spbfgs_update(&self.h, pair, &sc));
        match next {
            Ok(h) => {
                self.h = h;
                (Some(beta), failed, true)
            }
            Err(_) => (Some(Beta::ZERO), true, false),
        }
    }
}

fn blank_record(k: usize, x: DenseVector, f: f64, phi: f64) -> IterationRecord {
    IterationRecord {
        k,
        x,
        f,
        f_carried: None,
        phi,
        grad_norm: f64::NAN,
        phi_best: phi,
        alpha: None,
        beta: None,
        sty: None,
        curvature_failed: false,
        updated: false,
        evals: 0,
        h_positive_definite: None,
        scaled_cond: None,
    }
}

/// Runs the SP-BFGS loop until the budget is spent. Configuration errors are
/// returned as `Err`; numerical failures during the run end it early and are
/// reported in `summary.failure` with the partial trace.
pub fn minimize(problem: &Problem, cfg: &RunConfig) -> Result<RunTrace> {
    let n = problem.dim();
    cfg.validate(n)?;
    let x0 = cfg.x0.clone().unwrap_or_else(|| problem.x0().to_vec());
    let h = cfg.h0.clone().unwrap_or_else(|| SymMatrix::identity(n));
    let mut lp = Loop {
        problem,
        cfg,
        oracle: NoisyOracle::new(problem.clone(), cfg.noise)?,
        records: Vec::new(),
        h,
        failures: 0,
        null_steps: 0,
    };
    let failure = lp.run(x0).err().map(|e| e.to_string());
    let phi_best = lp.oracle.best_phi();
    let iterations = lp.records.last().map_or(0, |r| r.k);
    Ok(RunTrace {
        problem: problem.name().to_string(),
        summary: RunSummary {
            phi_best,
            iterations,
            curvature_failures: lp.failures,
            null_steps: lp.null_steps,
            f_evals: lp.oracle.f_evals(),
            g_evals: lp.oracle.g_evals(),
            failure,
        },
        records: lp.records,
        final_h: lp.h,
    })
}

/// BFGS baseline: forces `beta = +inf` and keeps the configured skip rule
/// (skip on `s'y <= 0` when none is given).
pub fn minimize_baseline_bfgs(problem: &Problem, cfg: &RunConfig) -> Result<RunTrace> {
    let mut cfg = cfg.clone();
    cfg.policy.schedule = BetaSchedule::ConstantInfinity;
    if cfg.policy.skip_rule == SkipRule::None {
        cfg.policy.skip_rule = SkipRule::SkipOnNonpositive;
    }
    minimize(problem, &cfg)
}

/// Fixed-step iteration `x_{k+1} = x_k - alpha H g_k` with a constant `H` and
/// noisy gradients only. Records the true objective at every iterate.
pub fn fixed_step_descent(
    problem: &Problem,
    noise: NoiseSpec,
    h: &SymMatrix,
    alpha: f64,
    iterations: usize,
) -> Result<RunTrace> {
    h.check_dim(problem.dim())?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be > 0, got {alpha}")));
    }
    let mut oracle = NoisyOracle::new(problem.clone(), noise)?;
    let mut x = problem.x0().to_vec();
    let mut records = Vec::with_capacity(iterations + 1);
    let mut best = f64::INFINITY;
    let mut failure = None;
    for k in 0..=iterations {
        let phi = problem.value(&x);
        best = best.min(phi);
        let mut rec = blank_record(k, x.clone(), f64::NAN, phi);
        rec.grad_norm = norm2(&problem.gradient(&x));
        rec.phi_best = best;
        rec.alpha = (k > 0).then_some(alpha);
        records.push(rec);
        if k == iterations {
            break;
        }
        match oracle.noisy_g(&x) {
            Ok(g) => {
                let d = h.matvec(&g);
                x = x.iter().zip(&d).map(|(xi, di)| xi - alpha * di).collect();
            }
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        }
    }
    Ok(RunTrace {
        problem: problem.name().to_string(),
        summary: RunSummary {
            phi_best: best,
            iterations: records.len() - 1,
            curvature_failures: 0,
            null_steps: 0,
            f_evals: 0,
            g_evals: oracle.g_evals(),
            failure,
        },
        records,
        final_h: h.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::rosenbrock;

    fn quad1d() -> Problem {
        Problem::new("Q1", vec![1.0], |x| x[0] * x[0], |x| vec![2.0 * x[0]])
    }

    #[test]
    fn bfgs_solves_1d_quadratic() {
        let cfg = RunConfig::new(PenaltyPolicy::bfgs(), Budget::Iterations(10), NoiseSpec::noiseless());
        let t = minimize(&quad1d(), &cfg).unwrap();
        assert!(t.final_x()[0].abs() < 1e-8, "{:?}", t.final_x());
    }

    #[test]
    fn baseline_matches_infinite_beta_without_noise() {
        let mut pol = PenaltyPolicy::bfgs();
        pol.skip_rule = SkipRule::None;
        let cfg = RunConfig::new(pol, Budget::FunctionEvals(300), NoiseSpec::noiseless());
        let a = minimize(&rosenbrock(), &cfg).unwrap();
        let b = minimize_baseline_bfgs(&rosenbrock(), &cfg).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.summary, b.summary);
    }

    #[test]
    fn noiseless_rosenbrock_converges() {
        let cfg = RunConfig::new(PenaltyPolicy::bfgs(), Budget::FunctionEvals(2000), NoiseSpec::noiseless());
        let t = minimize_baseline_bfgs(&rosenbrock(), &cfg).unwrap();
        assert!(t.summary.phi_best < 1e-8, "{}", t.summary.phi_best);
    }

    #[test]
    fn respects_eval_budget() {
        let noise = NoiseSpec { eps_f: 1e-3, eps_g: 1e-2, seed: 3 };
        let mut cfg =
            RunConfig::new(PenaltyPolicy::noise_scaled(1e8, 1e-2), Budget::FunctionEvals(500), noise);
        cfg.record_hessian_diagnostics = true;
        let t = minimize(&rosenbrock(), &cfg).unwrap();
        assert!(!t.failed());
        assert!(t.summary.f_evals <= 500);
        assert!(t.records.windows(2).all(|w| w[0].evals <= w[1].evals));
        assert!(t.records.windows(2).all(|w| w[1].phi_best <= w[0].phi_best));
        assert!(t.records.iter().all(|r| r.h_positive_definite == Some(true)));
    }

    #[test]
    fn remeasure_spends_one_eval_per_iteration() {
        let mut cfg = RunConfig::new(PenaltyPolicy::bfgs(), Budget::Iterations(5), NoiseSpec::noiseless());
        let carry = minimize(&quad1d(), &cfg).unwrap();
        cfg.fk_source = FkSource::Remeasure;
        let fresh = minimize(&quad1d(), &cfg).unwrap();
        assert_eq!(fresh.summary.f_evals, carry.summary.f_evals + 4);
        assert_eq!(fresh.final_x(), carry.final_x());
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = RunConfig::new(PenaltyPolicy::bfgs(), Budget::Iterations(0), NoiseSpec::noiseless());
        assert!(minimize(&quad1d(), &cfg).is_err());
        cfg.budget = Budget::Iterations(3);
        cfg.x0 = Some(vec![1.0, 2.0]);
        assert!(matches!(minimize(&quad1d(), &cfg), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn fixed_step_noiseless_descends() {
        let t =
            fixed_step_descent(&quad1d(), NoiseSpec::noiseless(), &SymMatrix::identity(1), 0.25, 20).unwrap();
        assert!(t.records.windows(2).all(|w| w[1].phi < w[0].phi));
    }
}
