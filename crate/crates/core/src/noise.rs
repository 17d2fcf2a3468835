//! Bounded additive noise on top of a smooth problem.
//!
//! `f(x) = phi(x) + eps` with `eps ~ U[-eps_f, eps_f]`, and
//! `g(x) = grad phi(x) + e` with `e` uniform in the Euclidean ball of radius
//! `eps_g`. The oracle also tracks evaluation counts and the best true
//! objective value seen, which is what experiments report.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, norm2, DenseVector};
use crate::problems::Problem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub eps_f: f64,
    pub eps_g: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        NoiseSpec { eps_f: 0.0, eps_g: 0.0, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_f >= 0.0 && self.eps_f.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps_f must be >= 0, got {}", self.eps_f)));
        }
        if !(self.eps_g >= 0.0 && self.eps_g.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps_g must be >= 0, got {}", self.eps_g)));
        }
        Ok(())
    }
}

/// Uniform sample from the ball `{e : ||e|| <= radius}` in R^n: a normalized
/// Gaussian direction scaled by `radius * U^(1/n)`.
pub fn sample_ball<R: Rng + ?Sized>(rng: &mut R, n: usize, radius: f64) -> DenseVector {
    if radius == 0.0 || n == 0 {
        return vec![0.0; n];
    }
    let mut dir: Vec<f64> = loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if norm2(&v) > 0.0 {
            break v;
        }
    };
    let len = norm2(&dir);
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / n as f64);
    for d in dir.iter_mut() {
        *d *= r / len;
    }
    dir
}

/// Seeded noisy oracle over a [`Problem`].
pub struct NoisyOracle {
    problem: Problem,
    spec: NoiseSpec,
    rng: ChaCha8Rng,
    f_evals: usize,
    g_evals: usize,
    last_phi: f64,
    best_phi: f64,
}

impl NoisyOracle {
    pub fn new(problem: Problem, spec: NoiseSpec) -> Result<Self> {
        spec.validate()?;
        Ok(NoisyOracle {
            problem,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            spec,
            f_evals: 0,
            g_evals: 0,
            last_phi: f64::NAN,
            best_phi: f64::INFINITY,
        })
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    /// Noisy objective value. Every call counts toward the evaluation budget.
    pub fn noisy_f(&mut self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let phi = self.problem.value(x);
        self.f_evals += 1;
        if !phi.is_finite() {
            return Err(Error::NonFinite("objective value"));
        }
        self.last_phi = phi;
        self.best_phi = self.best_phi.min(phi);
        let eps = if self.spec.eps_f > 0.0 {
            self.rng.random_range(-self.spec.eps_f..=self.spec.eps_f)
        } else {
            0.0
        };
        debug_assert!(eps.abs() <= self.spec.eps_f);
        Ok(phi + eps)
    }

    /// Noisy gradient.
    pub fn noisy_g(&mut self, x: &[f64]) -> Result<DenseVector> {
        self.check_dim(x)?;
        let mut g = self.problem.gradient(x);
        self.g_evals += 1;
        if !all_finite(&g) {
            return Err(Error::NonFinite("gradient"));
        }
        let e = sample_ball(&mut self.rng, g.len(), self.spec.eps_g);
        debug_assert!(norm2(&e) <= self.spec.eps_g * (1.0 + 1e-12));
        for (gi, ei) in g.iter_mut().zip(&e) {
            *gi += ei;
        }
        Ok(g)
    }

    pub fn f_evals(&self) -> usize {
        self.f_evals
    }

    pub fn g_evals(&self) -> usize {
        self.g_evals
    }

    /// True objective value at the most recent `noisy_f` point.
    pub fn last_phi(&self) -> f64 {
        self.last_phi
    }

    /// Smallest true objective value over all `noisy_f` calls.
    pub fn best_phi(&self) -> f64 {
        self.best_phi
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.problem.dim() {
            return Err(Error::DimensionMismatch { expected: self.problem.dim(), got: x.len() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{quadratic_ill, rosenbrock};

    #[test]
    fn noiseless_oracle_is_exact() {
        let mut o = NoisyOracle::new(rosenbrock(), NoiseSpec::noiseless()).unwrap();
        assert_eq!(o.noisy_f(&[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(o.noisy_g(&[1.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!((o.f_evals(), o.g_evals()), (1, 1));
    }

    #[test]
    fn noise_respects_bounds() {
        let spec = NoiseSpec { eps_f: 0.3, eps_g: 0.7, seed: 5 };
        let p = quadratic_ill();
        let mut o = NoisyOracle::new(p.clone(), spec).unwrap();
        let x = [1.0, -2.0, 0.5, 3.0];
        let phi = p.value(&x);
        let grad = p.gradient(&x);
        for _ in 0..10_000 {
            assert!((o.noisy_f(&x).unwrap() - phi).abs() <= 0.3);
            let g = o.noisy_g(&x).unwrap();
            let d: Vec<f64> = g.iter().zip(&grad).map(|(a, b)| a - b).collect();
            assert!(norm2(&d) <= 0.7 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let spec = NoiseSpec { eps_f: 1.0, eps_g: 1.0, seed: 9 };
        let mut a = NoisyOracle::new(rosenbrock(), spec).unwrap();
        let mut b = NoisyOracle::new(rosenbrock(), spec).unwrap();
        for _ in 0..10 {
            assert_eq!(a.noisy_f(&[0.3, 0.2]).unwrap(), b.noisy_f(&[0.3, 0.2]).unwrap());
            assert_eq!(a.noisy_g(&[0.3, 0.2]).unwrap(), b.noisy_g(&[0.3, 0.2]).unwrap());
        }
    }

    #[test]
    fn tracks_best_true_value() {
        let spec = NoiseSpec { eps_f: 5.0, eps_g: 0.0, seed: 1 };
        let mut o = NoisyOracle::new(rosenbrock(), spec).unwrap();
        o.noisy_f(&[0.0, 0.0]).unwrap();
        o.noisy_f(&[1.0, 1.0]).unwrap();
        o.noisy_f(&[2.0, 0.0]).unwrap();
        assert_eq!(o.best_phi(), 0.0);
        assert_eq!(o.last_phi(), rosenbrock().value(&[2.0, 0.0]));
    }

    #[test]
    fn rejects_wrong_dimension_and_bad_spec() {
        let mut o = NoisyOracle::new(rosenbrock(), NoiseSpec::noiseless()).unwrap();
        assert!(matches!(o.noisy_f(&[1.0]), Err(Error::DimensionMismatch { .. })));
        let bad = NoiseSpec { eps_f: -1.0, eps_g: 0.0, seed: 0 };
        assert!(NoisyOracle::new(rosenbrock(), bad).is_err());
    }
}
