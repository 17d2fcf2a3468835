//! Backtracking line search with an Armijo test relaxed by the function-noise
//! bound.

use crate::error::{Error, Result};
use crate::linalg::{axpy, DenseVector};
use crate::noise::NoisyOracle;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchConfig {
    pub c1: f64,
    pub alpha0: f64,
    /// Backtracking factor in (0, 1).
    pub tau: f64,
    /// Relaxation `eps_A`; the test allows an increase of up to `2 eps_A`.
    pub eps_a: f64,
    pub max_backtracks: usize,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        LineSearchConfig { c1: 1e-4, alpha0: 1.0, tau: 0.5, eps_a: 0.0, max_backtracks: 45 }
    }
}

impl LineSearchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.c1 > 0.0 && self.c1 < 1.0) {
            return bad("c1 must lie in (0, 1)");
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return bad("alpha0 must be > 0");
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad("tau must lie in (0, 1)");
        }
        if !(self.eps_a >= 0.0 && self.eps_a.is_finite()) {
            return bad("eps_a must be >= 0");
        }
        if self.max_backtracks == 0 {
            return bad("max_backtracks must be >= 1");
        }
        Ok(())
    }
}

/// `f_trial <= f_k + c1 alpha g'p + 2 eps_A`
pub fn relaxed_armijo_ok(f_k: f64, f_trial: f64, g_dot_p: f64, alpha: f64, cfg: &LineSearchConfig) -> bool {
    f_trial <= f_k + cfg.c1 * alpha * g_dot_p + 2.0 * cfg.eps_a
}

/// Accepted trial point with its noisy and true objective values.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub x: DenseVector,
    pub f: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchResult {
    /// Accepted step, or 0 when every trial failed.
    pub alpha: f64,
    pub evals_used: usize,
    pub accepted: Option<Trial>,
    /// The evaluation limit stopped the search before a decision was reached.
    pub truncated: bool,
}

/// Tries `alpha0 tau^j` for `j = 0, 1, ..., max_backtracks - 1` and returns
/// the first step passing the relaxed Armijo test. `eval_limit` caps the
/// number of function evaluations this call may spend.
pub fn backtrack(
    oracle: &mut NoisyOracle,
    x: &[f64],
    p: &[f64],
    f_k: f64,
    g_dot_p: f64,
    cfg: &LineSearchConfig,
    eval_limit: Option<usize>,
) -> Result<LineSearchResult> {
    let mut alpha = cfg.alpha0;
    let mut evals = 0;
    for _ in 0..cfg.max_backtracks {
        if eval_limit.is_some_and(|lim| evals >= lim) {
            return Ok(LineSearchResult { alpha: 0.0, evals_used: evals, accepted: None, truncated: true });
        }
        let trial = axpy(x, alpha, p);
        let f_trial = oracle.noisy_f(&trial)?;
        evals += 1;
        if relaxed_armijo_ok(f_k, f_trial, g_dot_p, alpha, cfg) {
            return Ok(LineSearchResult {
                alpha,
                evals_used: evals,
                accepted: Some(Trial { x: trial, f: f_trial, phi: oracle.last_phi() }),
                truncated: false,
            });
        }
        alpha *= cfg.tau;
    }
    Ok(LineSearchResult { alpha: 0.0, evals_used: evals, accepted: None, truncated: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseSpec;
    use crate::problems::{rosenbrock, Problem};

    fn quad1d() -> Problem {
        Problem::new("Q1", vec![1.0], |x| x[0] * x[0], |x| vec![2.0 * x[0]])
    }

    #[test]
    fn armijo_relaxation() {
        let cfg = LineSearchConfig { eps_a: 0.5, ..Default::default() };
        assert!(relaxed_armijo_ok(1.0, 1.9, -1.0, 1.0, &cfg));
        assert!(!relaxed_armijo_ok(1.0, 2.1, -1.0, 1.0, &cfg));
    }

    #[test]
    fn full_step_accepted_on_quadratic() {
        let mut o = NoisyOracle::new(quad1d(), NoiseSpec::noiseless()).unwrap();
        let cfg = LineSearchConfig::default();
        // p = -g/2 lands on the minimizer
        let r = backtrack(&mut o, &[1.0], &[-1.0], 1.0, -2.0, &cfg, None).unwrap();
        assert_eq!(r.alpha, 1.0);
        assert_eq!(r.evals_used, 1);
        assert_eq!(r.accepted.unwrap().x, vec![0.0]);
    }

    #[test]
    fn uphill_direction_exhausts_trials() {
        let mut o = NoisyOracle::new(quad1d(), NoiseSpec::noiseless()).unwrap();
        let cfg = LineSearchConfig { max_backtracks: 7, ..Default::default() };
        let r = backtrack(&mut o, &[1.0], &[1.0], 1.0, 2.0, &cfg, None).unwrap();
        assert_eq!(r.alpha, 0.0);
        assert_eq!(r.evals_used, 7);
        assert_eq!(o.f_evals(), 7);
        assert!(r.accepted.is_none() && !r.truncated);
    }

    #[test]
    fn eval_limit_truncates() {
        let mut o = NoisyOracle::new(quad1d(), NoiseSpec::noiseless()).unwrap();
        let cfg = LineSearchConfig::default();
        let r = backtrack(&mut o, &[1.0], &[1.0], 1.0, 2.0, &cfg, Some(3)).unwrap();
        assert!(r.truncated);
        assert_eq!(r.evals_used, 3);
    }

    #[test]
    fn backtracks_along_steepest_descent() {
        let p = rosenbrock();
        let x = p.x0().to_vec();
        let g = p.gradient(&x);
        let d: Vec<f64> = g.iter().map(|v| -v).collect();
        let gp: f64 = -g.iter().map(|v| v * v).sum::<f64>();
        let mut o = NoisyOracle::new(p.clone(), NoiseSpec::noiseless()).unwrap();
        let f0 = p.value(&x);
        let r = backtrack(&mut o, &x, &d, f0, gp, &LineSearchConfig::default(), None).unwrap();
        assert!(r.alpha > 0.0 && r.alpha < 1.0);
        assert_eq!(r.evals_used, o.f_evals());
        assert!(r.accepted.unwrap().f < f0);
    }

    #[test]
    fn validation() {
        assert!(LineSearchConfig::default().validate().is_ok());
        assert!(LineSearchConfig { tau: 1.0, ..Default::default() }.validate().is_err());
        assert!(LineSearchConfig { c1: 0.0, ..Default::default() }.validate().is_err());
    }
}
