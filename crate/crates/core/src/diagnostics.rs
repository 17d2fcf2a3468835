//! Checks of the theoretical guarantees: trace bounds on the updated
//! matrices, the noise-dominated region around the minimizer, the Q-linear
//! envelope of fixed-step runs, and the scaled condition number.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{norm2, SymMatrix};
use crate::optimizer::RunTrace;
use crate::problems::Problem;
use crate::update::{Beta, CurvaturePair, PenaltyScalars};

/// Constants of the convergence analysis: `m I <= hess <= M I`,
/// `psi I <= H <= Psi I`, and the gradient-noise bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryParams {
    pub m: f64,
    pub big_m: f64,
    pub psi: f64,
    pub big_psi: f64,
    pub eps_g_bar: f64,
}

impl TheoryParams {
    /// Bounds taken from the problem's convexity metadata.
    pub fn for_problem(problem: &Problem, psi: f64, big_psi: f64, eps_g_bar: f64) -> Result<Self> {
        let (m, big_m) = problem.convexity().ok_or(Error::MissingMetadata("strong convexity bounds"))?;
        let p = TheoryParams { m, big_m, psi, big_psi, eps_g_bar };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.m > 0.0
            && self.m <= self.big_m
            && self.psi > 0.0
            && self.psi <= self.big_psi
            && self.eps_g_bar >= 0.0
            && self.big_m.is_finite()
            && self.big_psi.is_finite()
            && self.eps_g_bar.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("inconsistent theory parameters {self:?}")))
        }
    }

    /// Largest admissible fixed step, `psi / (Psi^2 M)`.
    pub fn max_step(&self) -> f64 {
        self.psi / (self.big_psi * self.big_psi * self.big_m)
    }
}

/// `(1 + gamma ||y|| ||s||)^2 Tr(H) + gamma ||s||^2`
pub fn trace_bound_h(h: &SymMatrix, pair: &CurvaturePair, scalars: &PenaltyScalars) -> f64 {
    let ns = norm2(pair.s());
    let ny = norm2(pair.y());
    let g = scalars.gamma;
    (1.0 + g * ny * ns).powi(2) * h.trace() + g * ns * ns
}

/// `(1 + beta ||y|| ||s||) Tr(B) + gamma ||y||^2`; infinite when `beta` is.
pub fn trace_bound_b(b: &SymMatrix, pair: &CurvaturePair, scalars: &PenaltyScalars) -> f64 {
    let ns = norm2(pair.s());
    let ny = norm2(pair.y());
    match scalars.beta {
        Beta::Infinite => f64::INFINITY,
        Beta::Finite(beta) => {
            let lin = beta * ny * ns;
            let trace_part = if lin == 0.0 { b.trace() } else { (1.0 + lin) * b.trace() };
            trace_part + scalars.gamma * ny * ny
        }
    }
}

/// `phi* + (Psi eps_g / psi)^2 / (2 m)`
pub fn noise_region_level(problem: &Problem, params: &TheoryParams) -> Result<f64> {
    let phi_star = problem.phi_star().ok_or(Error::MissingMetadata("phi_star"))?;
    params.validate()?;
    let r = params.big_psi * params.eps_g_bar / params.psi;
    Ok(phi_star + r * r / (2.0 * params.m))
}

/// Whether `x` lies in the region where gradient noise may dominate.
pub fn in_noise_region(problem: &Problem, x: &[f64], params: &TheoryParams) -> Result<bool> {
    let level = noise_region_level(problem, params)?;
    Ok(problem.value(x) <= level)
}

/// Outcome of checking the Q-linear envelope along a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    pub checked: usize,
    pub excluded: usize,
    /// Steps `k` (from `x_k` to `x_{k+1}`) that broke the inequality.
    pub violations: Vec<usize>,
    /// Largest `(phi_{k+1} - c) / (phi_k - c)` over checked steps.
    pub worst_ratio: f64,
    pub rate: f64,
}

impl EnvelopeReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `phi_{k+1} - c <= (1 - alpha psi m)(phi_k - c)` with
/// `c = phi* + (Psi eps_g / psi)^2 / (2 m)` for every step whose starting
/// point is outside the noise region. Intended for fixed-step runs.
pub fn qlinear_envelope(
    trace: &RunTrace,
    problem: &Problem,
    params: &TheoryParams,
    alpha: f64,
) -> Result<EnvelopeReport> {
    let c = noise_region_level(problem, params)?;
    let limit = params.max_step();
    if !(alpha > 0.0 && alpha <= limit * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter(format!("step {alpha} outside (0, {limit}]")));
    }
    let rate = 1.0 - alpha * params.psi * params.m;
    let mut report = EnvelopeReport {
        checked: 0,
        excluded: 0,
        violations: Vec::new(),
        worst_ratio: f64::NEG_INFINITY,
        rate,
    };
    for w in trace.records.windows(2) {
        let (now, next) = (&w[0], &w[1]);
        if now.phi <= c {
            report.excluded += 1;
            continue;
        }
        report.checked += 1;
        let gap = now.phi - c;
        let next_gap = next.phi - c;
        report.worst_ratio = report.worst_ratio.max(next_gap / gap);
        // Roundoff in phi near large values gets a relative allowance.
        let slack = 1e-12 * now.phi.abs().max(next.phi.abs());
        if next_gap > rate * gap + slack {
            report.violations.push(now.k);
        }
    }
    Ok(report)
}

pub fn qlinear_envelope_ok(
    trace: &RunTrace,
    problem: &Problem,
    params: &TheoryParams,
    alpha: f64,
) -> Result<bool> {
    qlinear_envelope(trace, problem, params, alpha).map(|r| r.ok())
}

/// `cond_2(H hess)`: ratio of the extreme singular values of the product.
pub fn scaled_condition_number(h: &SymMatrix, hess: &SymMatrix) -> Result<f64> {
    h.check_dim(hess.dim())?;
    let prod: DMatrix<f64> = h.to_dmatrix() * hess.to_dmatrix();
    let sv = prod.singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0) || !(min > max * f64::EPSILON) {
        return Err(Error::SingularInput("H * hess is numerically singular"));
    }
    Ok(max / min)
}
