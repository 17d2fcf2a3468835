//! Closed-form BFGS and SP-BFGS inverse-Hessian updates.
//!
//! The inverse-Hessian approximation `H` is updated from a curvature pair
//! `(s, y)` and a penalty parameter `beta` that prices violations of the
//! secant condition `H' y = s`. `beta = +inf` gives classic BFGS and
//! `beta = 0` leaves `H` untouched.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, dot, DenseVector, SymMatrix};

/// Default relative tolerance on the inverse-update denominator.
pub const DEFAULT_DENOM_TOL: f64 = 1e-12;

/// Penalty parameter on `[0, +inf]`. Infinity is an explicit variant so the
/// BFGS limit is reproduced without forming `1 / beta` from a huge float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beta {
    Finite(f64),
    Infinite,
}

impl Beta {
    pub const ZERO: Beta = Beta::Finite(0.0);

    /// Wraps a raw value. `f64::INFINITY` maps to [`Beta::Infinite`].
    pub fn new(value: f64) -> Result<Beta> {
        if value == f64::INFINITY {
            Ok(Beta::Infinite)
        } else if value.is_finite() && value >= 0.0 {
            Ok(Beta::Finite(value))
        } else {
            Err(Error::InvalidParameter(format!("beta must lie in [0, +inf], got {value}")))
        }
    }

    pub fn is_zero(self) -> bool {
        matches!(self, Beta::Finite(b) if b == 0.0)
    }

    pub fn value(self) -> f64 {
        match self {
            Beta::Finite(b) => b,
            Beta::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Beta::Finite(b) => write!(f, "{b:e}"),
            Beta::Infinite => f.write_str("inf"),
        }
    }
}

/// Displacement `s = x_{k+1} - x_k`, gradient difference `y = g_{k+1} - g_k`
/// and their inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvaturePair {
    s: DenseVector,
    y: DenseVector,
    sty: f64,
}

impl CurvaturePair {
    pub fn new(s: DenseVector, y: DenseVector) -> Result<Self> {
        if s.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: s.len(), got: y.len() });
        }
        if !all_finite(&s) || !all_finite(&y) {
            return Err(Error::NonFinite("curvature pair"));
        }
        let sty = dot(&s, &y);
        if !sty.is_finite() {
            return Err(Error::NonFinite("s'y"));
        }
        Ok(CurvaturePair { s, y, sty })
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn sty(&self) -> f64 {
        self.sty
    }

    pub fn dim(&self) -> usize {
        self.s.len()
    }

    /// `rho = 1 / s'y`
    pub fn rho(&self) -> f64 {
        1.0 / self.sty
    }
}

/// `gamma = 1/(s'y + 1/beta)` and `omega = 1/(s'y + 2/beta)` for one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyScalars {
    pub beta: Beta,
    pub gamma: f64,
    pub omega: f64,
}

pub fn compute_penalty_scalars(pair: &CurvaturePair, beta: Beta) -> Result<PenaltyScalars> {
    let sty = pair.sty();
    let (gamma, omega) = match beta {
        Beta::Infinite => {
            if sty == 0.0 {
                return Err(Error::NonFinite("rho = 1/s'y with s'y = 0"));
            }
            let rho = 1.0 / sty;
            (rho, rho)
        }
        Beta::Finite(0.0) => (0.0, 0.0),
        Beta::Finite(b) => {
            let inv = 1.0 / b;
            let d1 = sty + inv;
            let d2 = sty + 2.0 * inv;
            if d1 == 0.0 || d2 == 0.0 {
                return Err(Error::NonFinite("zero gamma/omega denominator"));
            }
            (1.0 / d1, 1.0 / d2)
        }
    };
    if !gamma.is_finite() || !omega.is_finite() {
        return Err(Error::NonFinite("gamma/omega"));
    }
    Ok(PenaltyScalars { beta, gamma, omega })
}

/// SP-BFGS curvature condition `s'y > -1/beta`.
pub fn spbfgs_curvature_ok(pair: &CurvaturePair, beta: Beta) -> bool {
    match beta {
        Beta::Infinite => pair.sty() > 0.0,
        Beta::Finite(0.0) => true,
        Beta::Finite(b) => pair.sty() > -1.0 / b,
    }
}

fn curvature_violation(pair: &CurvaturePair, beta: Beta) -> Error {
    Error::CurvatureViolation { sty: pair.sty(), beta: beta.to_string() }
}

/// Classic BFGS inverse update
/// `H' = (I - rho s y') H (I - rho y s') + rho s s'`,
/// evaluated in its product form.
pub fn bfgs_update(h: &SymMatrix, pair: &CurvaturePair) -> Result<SymMatrix> {
    let n = h.dim();
    h.check_dim(pair.dim())?;
    if !(pair.sty() > 0.0) {
        return Err(curvature_violation(pair, Beta::Infinite));
    }
    let rho = pair.rho();
    let (s, y) = (pair.s(), pair.y());
    // Left factor: M = (I - rho s y') H, using (y' H)_j = (H y)_j.
    let hy = h.matvec(y);
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = h.get(i, j) - rho * s[i] * hy[j];
        }
    }
    // Right factor: M (I - rho y s') = M - rho (M y) s'.
    let my: Vec<f64> = (0..n).map(|i| dot(&m[i * n..(i + 1) * n], y)).collect();
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] += rho * (s[i] * s[j] - my[i] * s[j]);
        }
    }
    SymMatrix::from_row_major(n, m)
}

/// SP-BFGS update after checking `s'y > -1/beta`.
pub fn spbfgs_update(h: &SymMatrix, pair: &CurvaturePair, scalars: &PenaltyScalars) -> Result<SymMatrix> {
    if !spbfgs_curvature_ok(pair, scalars.beta) {
        return Err(curvature_violation(pair, scalars.beta));
    }
    spbfgs_update_unchecked(h, pair, scalars)
}

/// SP-BFGS update formula without the curvature check. The result is
/// indefinite whenever the curvature condition fails; exposed for tests of
/// exactly that property.
///
/// Expanding the factored form gives
/// `H' = H - omega (s u' + u s') + gamma (1 + omega y'u) s s'` with `u = H y`.
pub fn spbfgs_update_unchecked(
    h: &SymMatrix,
    pair: &CurvaturePair,
    scalars: &PenaltyScalars,
) -> Result<SymMatrix> {
    h.check_dim(pair.dim())?;
    if scalars.beta.is_zero() {
        return Ok(h.clone());
    }
    let n = h.dim();
    let (s, y) = (pair.s(), pair.y());
    let PenaltyScalars { gamma, omega, .. } = *scalars;
    let u = h.matvec(y);
    let yhy = dot(y, &u);
    let ss_coef = gamma * (1.0 + omega * yhy);
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = h.get(i, j) - omega * (s[i] * u[j] + u[i] * s[j]) + ss_coef * s[i] * s[j];
        }
    }
    SymMatrix::from_row_major(n, out)
}

/// Classic BFGS update of the Hessian approximation
/// `B' = B - B s s' B / (s' B s) + y y' / (s'y)`.
pub fn bfgs_inverse_update(b: &SymMatrix, pair: &CurvaturePair) -> Result<SymMatrix> {
    b.check_dim(pair.dim())?;
    if !(pair.sty() > 0.0) {
        return Err(curvature_violation(pair, Beta::Infinite));
    }
    let n = b.dim();
    let (s, y) = (pair.s(), pair.y());
    let bs = b.matvec(s);
    let sbs = dot(s, &bs);
    if !(sbs > 0.0) {
        return Err(Error::SingularDenominator(sbs));
    }
    let rho = pair.rho();
    SymMatrix::from_fn(n, |i, j| b.get(i, j) - bs[i] * bs[j] / sbs + rho * y[i] * y[j])
}

/// SP-BFGS update written for `B = H^{-1}`.
///
/// `H` is needed as well because the update depends on `y' H y`, which is not
/// available from `B` alone without an inversion. `denom_tol` is relative to
/// the magnitude of the two terms forming the denominator.
pub fn spbfgs_inverse_update(
    b: &SymMatrix,
    h: &SymMatrix,
    pair: &CurvaturePair,
    scalars: &PenaltyScalars,
    denom_tol: f64,
) -> Result<SymMatrix> {
    b.check_dim(pair.dim())?;
    h.check_dim(pair.dim())?;
    if scalars.beta.is_zero() {
        return Ok(b.clone());
    }
    if !spbfgs_curvature_ok(pair, scalars.beta) {
        return Err(curvature_violation(pair, scalars.beta));
    }
    let n = b.dim();
    let (s, y) = (pair.s(), pair.y());
    let PenaltyScalars { gamma, omega, beta } = *scalars;
    let yhy = h.quad_form(y);
    let gamma_over_omega = match beta {
        Beta::Infinite => 1.0,
        Beta::Finite(_) => gamma / omega,
    };
    let a = (omega - gamma) * yhy - gamma_over_omega;
    let c = 1.0 - omega * pair.sty();
    let bs = b.matvec(s);
    let sbs = dot(s, &bs);
    let t1 = a * omega * sbs;
    let t2 = c * c;
    let denom = t1 - t2;
    if !(denom.abs() > denom_tol * (t1.abs() + t2)) {
        return Err(Error::SingularDenominator(denom));
    }
    let scale = omega / denom;
    SymMatrix::from_fn(n, |i, j| {
        let num = a * bs[i] * bs[j] + c * (bs[i] * y[j] + y[i] * bs[j]) + omega * sbs * y[i] * y[j];
        b.get(i, j) - scale * num
    })
}
