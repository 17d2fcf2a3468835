//! Smooth test problems with analytic gradients.
//!
//! The suite mirrors a handful of classical unconstrained test functions
//! (Rosenbrock and relatives, Beale, Powell singular, helix, Box 3-D, ...)
//! plus an ill-conditioned 4-D quadratic. Names are matched
//! case-insensitively; variable-dimension problems accept a `NAME:n` suffix.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::instances::gaussian_vector;
use crate::linalg::{dot, DenseVector, SymMatrix};

pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&[f64]) -> DenseVector + Send + Sync>;
pub type HessianFn = Arc<dyn Fn(&[f64]) -> SymMatrix + Send + Sync>;

/// A smooth objective with its gradient and metadata. Cheap to clone and
/// safe to evaluate from several threads.
#[derive(Clone)]
pub struct Problem {
    name: String,
    x0: DenseVector,
    phi_star: Option<f64>,
    minimizer: Option<DenseVector>,
    convexity: Option<(f64, f64)>,
    value: ValueFn,
    gradient: GradientFn,
    hessian: Option<HessianFn>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("phi_star", &self.phi_star)
            .finish()
    }
}

impl Problem {
    pub fn new(
        name: impl Into<String>,
        x0: DenseVector,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> DenseVector + Send + Sync + 'static,
    ) -> Self {
        Problem {
            name: name.into(),
            x0,
            phi_star: None,
            minimizer: None,
            convexity: None,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: None,
        }
    }

    pub fn with_phi_star(mut self, phi_star: f64) -> Self {
        self.phi_star = Some(phi_star);
        self
    }

    pub fn with_minimizer(mut self, x: DenseVector) -> Self {
        self.minimizer = Some(x);
        self
    }

    /// Strong-convexity bounds `m I <= hess <= M I`.
    pub fn with_convexity(mut self, m: f64, big_m: f64) -> Self {
        self.convexity = Some((m, big_m));
        self
    }

    pub fn with_hessian(mut self, hess: impl Fn(&[f64]) -> SymMatrix + Send + Sync + 'static) -> Self {
        self.hessian = Some(Arc::new(hess));
        self
    }

    pub fn with_start(mut self, x0: DenseVector) -> Result<Self> {
        if x0.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x0.len() });
        }
        self.x0 = x0;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn phi_star(&self) -> Option<f64> {
        self.phi_star
    }

    pub fn minimizer(&self) -> Option<&[f64]> {
        self.minimizer.as_deref()
    }

    pub fn convexity(&self) -> Option<(f64, f64)> {
        self.convexity
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> DenseVector {
        (self.gradient)(x)
    }

    pub fn hessian(&self, x: &[f64]) -> Option<SymMatrix> {
        self.hessian.as_ref().map(|h| h(x))
    }

    pub fn has_hessian(&self) -> bool {
        self.hessian.is_some()
    }
}

/// Central differences, one coordinate at a time.
pub fn finite_diff_grad(problem: &Problem, x: &[f64], h: f64) -> DenseVector {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = xp[i];
            xp[i] = orig + h;
            let fp = problem.value(&xp);
            xp[i] = orig - h;
            let fm = problem.value(&xp);
            xp[i] = orig;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Seed of the Householder vectors that fix the quadratic's eigenbasis.
const QUADRATIC_BASIS_SEED: u64 = 0x5EED_0004;

/// Spectrum of the ill-conditioned quadratic.
pub const QUADRATIC_SPECTRUM: [f64; 4] = [1e-2, 1.0, 1e2, 1e4];

/// Orthogonal basis for [`quadratic_ill`]: the product of four Householder
/// reflections built from a fixed seeded stream.
pub fn quadratic_basis() -> Vec<Vec<f64>> {
    let n = QUADRATIC_SPECTRUM.len();
    let mut rng = ChaCha8Rng::seed_from_u64(QUADRATIC_BASIS_SEED);
    let mut q: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _ in 0..n {
        let v = gaussian_vector(&mut rng, n);
        let vv = dot(&v, &v);
        // Q <- Q (I - 2 v v' / v'v)
        for row in q.iter_mut() {
            let c = 2.0 * dot(row, &v) / vv;
            for (r, vi) in row.iter_mut().zip(&v) {
                *r -= c * vi;
            }
        }
    }
    q
}

/// `phi(x) = x' T x / 2` on R^4 with `T = Q diag(1e-2, 1, 1e2, 1e4) Q'`,
/// started from `1e5 (1, 1, 1, 1)`.
pub fn quadratic_ill() -> Problem {
    let q = quadratic_basis();
    let n = QUADRATIC_SPECTRUM.len();
    let t = SymMatrix::from_fn(n, |i, j| (0..n).map(|k| q[i][k] * QUADRATIC_SPECTRUM[k] * q[j][k]).sum())
        .expect("finite by construction");
    let (tv, tg, th) = (t.clone(), t.clone(), t);
    Problem::new("QUADILL", vec![1e5; n], move |x| 0.5 * tv.quad_form(x), move |x| tg.matvec(x))
        .with_hessian(move |_| th.clone())
        .with_phi_star(0.0)
        .with_minimizer(vec![0.0; n])
        .with_convexity(QUADRATIC_SPECTRUM[0], QUADRATIC_SPECTRUM[n - 1])
}

/// `(1 - x1)^2 + 100 (x2 - x1^2)^2`
pub fn rosenbrock() -> Problem {
    Problem::new(
        "ROSENBR",
        vec![-1.2, 1.0],
        |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
        |x| {
            let r = x[1] - x[0] * x[0];
            vec![-2.0 * (1.0 - x[0]) - 400.0 * x[0] * r, 200.0 * r]
        },
    )
    .with_hessian(|x| {
        let a = 2.0 - 400.0 * (x[1] - x[0] * x[0]) + 800.0 * x[0] * x[0];
        let b = -400.0 * x[0];
        SymMatrix::from_rows(&[vec![a, b], vec![b, 200.0]]).expect("finite input")
    })
    .with_phi_star(0.0)
    .with_minimizer(vec![1.0, 1.0])
}

/// Separable Rosenbrock in an even dimension `n`.
pub fn srosenbr(n: usize) -> Result<Problem> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::BadDimension { problem: "SROSENBR", n });
    }
    let x0 = (0..n).map(|i| if i % 2 == 0 { -1.2 } else { 1.0 }).collect();
    Ok(Problem::new(
        "SROSENBR",
        x0,
        |x| x.chunks_exact(2).map(|p| 100.0 * (p[1] - p[0] * p[0]).powi(2) + (p[0] - 1.0).powi(2)).sum(),
        |x| {
            let mut g = vec![0.0; x.len()];
            for (i, p) in x.chunks_exact(2).enumerate() {
                let r = p[1] - p[0] * p[0];
                g[2 * i] = -400.0 * p[0] * r + 2.0 * (p[0] - 1.0);
                g[2 * i + 1] = 200.0 * r;
            }
            g
        },
    )
    .with_phi_star(0.0)
    .with_minimizer(vec![1.0; n]))
}

pub fn beale() -> Problem {
    const C: [f64; 3] = [1.5, 2.25, 2.625];
    Problem::new(
        "BEALE",
        vec![1.0, 1.0],
        |x| (1..=3).map(|i| (C[i - 1] - x[0] * (1.0 - x[1].powi(i as i32))).powi(2)).sum(),
        |x| {
            let mut g = vec![0.0; 2];
            for i in 1..=3 {
                let k = i as i32;
                let r = C[i - 1] - x[0] * (1.0 - x[1].powi(k));
                g[0] += 2.0 * r * -(1.0 - x[1].powi(k));
                g[1] += 2.0 * r * (k as f64) * x[0] * x[1].powi(k - 1);
            }
            g
        },
    )
    .with_phi_star(0.0)
    .with_minimizer(vec![3.0, 0.5])
}

/// `(x1 - 1)^2 + 100 (x2 - x1^3)^2`
pub fn cube() -> Problem {
    Problem::new(
        "CUBE",
        vec![-1.2, 1.0],
        |x| (x[0] - 1.0).powi(2) + 100.0 * (x[1] - x[0].powi(3)).powi(2),
        |x| {
            let r = x[1] - x[0].powi(3);
            vec![2.0 * (x[0] - 1.0) - 600.0 * x[0] * x[0] * r, 200.0 * r]
        },
    )
    .with_phi_star(0.0)
    .with_minimizer(vec![1.0, 1.0])
}

/// Powell singular function, blocks of four.
pub fn powellsg(n: usize) -> Result<Problem> {
    if n == 0 || !n.is_multiple_of(4) {
        return Err(Error::BadDimension { problem: "POWELLSG", n });
    }
    let x0 = (0..n).map(|i| [3.0, -1.0, 0.0, 1.0][i % 4]).collect();
    Ok(Problem::new(
        "POWELLSG",
        x0,
        |x| {
            x.chunks_exact(4)
                .map(|b| {
                    (b[0] + 10.0 * b[1]).powi(2)
                        + 5.0 * (b[2] - b[3]).powi(2)
                        + (b[1] - 2.0 * b[2]).powi(4)
                        + 10.0 * (b[0] - b[3]).powi(4)
                })
                .sum()
        },
        |x| {
            let mut g = vec![0.0; x.len()];
            for (i, b) in x.chunks_exact(4).enumerate() {
                let t1 = b[0] + 10.0 * b[1];
                let t2 = b[2] - b[3];
                let t3 = b[1] - 2.0 * b[2];
                let t4 = b[0] - b[3];
                g[4 * i] = 2.0 * t1 + 40.0 * t4.powi(3);
                g[4 * i + 1] = 20.0 * t1 + 4.0 * t3.powi(3);
                g[4 * i + 2] = 10.0 * t2 - 8.0 * t3.powi(3);
                g[4 * i + 3] = -10.0 * t2 - 40.0 * t4.powi(3);
            }
            g
        },
    )
    .with_phi_star(0.0)
    .with_minimizer(vec![0.0; n]))
}

/// Angle in turns used by the helical valley, with the classical branch
/// choice (`+1/2` for `x1 < 0`).
fn helix_theta(x1: f64, x2: f64) -> f64 {
    if x1 > 0.0 {
        (x2 / x1).atan() / (2.0 * PI)
    } else if x1 < 0.0 {
        (x2 / x1).atan() / (2.0 * PI) + 0.5
    } else if x2 >= 0.0 {
        0.25
    } else {
        -0.25
    }
}

/// Helical valley: `100 [(x3 - 10 theta)^2 + (r - 1)^2] + x3^2`.
pub fn helix() -> Problem {
    Problem::new(
        "HELIX",
        vec![-1.0, 0.0, 0.0],
        |x| {
            let theta = helix_theta(x[0], x[1]);
            let r = x[0].hypot(x[1]);
            100.0 * ((x[2] - 10.0 * theta).powi(2) + (r - 1.0).powi(2)) + x[2] * x[2]
        },
        |x| {
            let theta = helix_theta(x[0], x[1]);
            let r2 = x[0] * x[0] + x[1] * x[1];
            let r = r2.sqrt();
            let a = x[2] - 10.0 * theta;
            let dtheta = [-x[1] / (2.0 * PI * r2), x[0] / (2.0 * PI * r2)];
            let dr = [x[0] / r, x[1] / r];
            vec![
                200.0 * (a * -10.0 * dtheta[0] + (r - 1.0) * dr[0]),
                200.0 * (a * -10.0 * dtheta[1] + (r - 1.0) * dr[1]),
                200.0 * a + 2.0 * x[2],
            ]
        },
    )
    .with_phi_star(0.0)
    .with_minimizer(vec![1.0, 0.0, 0.0])
}

/// Box three-dimensional function with ten residuals at `t_i = 0.1 i`.
pub fn box3() -> Problem {
    fn residual(x: &[f64], t: f64) -> f64 {
        (-t * x[0]).exp() - (-t * x[1]).exp() - x[2] * ((-t).exp() - (-10.0 * t).exp())
    }
    Problem::new(
        "BOX3",
        vec![0.0, 10.0, 20.0],
        |x| (1..=10).map(|i| residual(x, 0.1 * i as f64).powi(2)).sum(),
        |x| {
            let mut g = vec![0.0; 3];
            for i in 1..=10 {
                let t = 0.1 * i as f64;
                let r = residual(x, t);
                g[0] += 2.0 * r * (-t * (-t * x[0]).exp());
                g[1] += 2.0 * r * (t * (-t * x[1]).exp());
                g[2] += 2.0 * r * -((-t).exp() - (-10.0 * t).exp());
            }
            g
        },
    )
    .with_phi_star(0.0)
    .with_minimizer(vec![1.0, 10.0, 1.0])
}

/// Generalized Rosenbrock `1 + sum_{i>=2} 100 (x_i - x_{i-1}^2)^2 + (x_i - 1)^2`,
/// started from `x_i = i / (n + 1)`.
pub fn genrose(n: usize) -> Result<Problem> {
    if n < 2 {
        return Err(Error::BadDimension { problem: "GENROSE", n });
    }
    let x0 = (1..=n).map(|i| i as f64 / (n + 1) as f64).collect();
    Ok(Problem::new(
        "GENROSE",
        x0,
        |x| {
            1.0 + x
                .windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (w[1] - 1.0).powi(2))
                .sum::<f64>()
        },
        |x| {
            let mut g = vec![0.0; x.len()];
            for i in 1..x.len() {
                let r = x[i] - x[i - 1] * x[i - 1];
                g[i] += 200.0 * r + 2.0 * (x[i] - 1.0);
                g[i - 1] += -400.0 * x[i - 1] * r;
            }
            g
        },
    )
    .with_phi_star(1.0)
    .with_minimizer(vec![1.0; n]))
}

/// Nonseparable extended Rosenbrock
/// `(x1 - 1)^2 + sum_{i>=2} 100 (x_i - x_{i-1}^2)^2`, started at `-1`.
pub fn extrosnb(n: usize) -> Result<Problem> {
    if n < 2 {
        return Err(Error::BadDimension { problem: "EXTROSNB", n });
    }
    Ok(Problem::new(
        "EXTROSNB",
        vec![-1.0; n],
        |x| (x[0] - 1.0).powi(2) + x.windows(2).map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2)).sum::<f64>(),
        |x| {
            let mut g = vec![0.0; x.len()];
            g[0] = 2.0 * (x[0] - 1.0);
            for i in 1..x.len() {
                let r = x[i] - x[i - 1] * x[i - 1];
                g[i] += 200.0 * r;
                g[i - 1] += -400.0 * x[i - 1] * r;
            }
            g
        },
    )
    .with_phi_star(0.0)
    .with_minimizer(vec![1.0; n]))
}

/// `1e4 (x2 - sin x1)^2 + x1^2 / 4`
pub fn sineval() -> Problem {
    Problem::new(
        "SINEVAL",
        vec![4.712389, -1.0],
        |x| 1e4 * (x[1] - x[0].sin()).powi(2) + 0.25 * x[0] * x[0],
        |x| {
            let r = x[1] - x[0].sin();
            vec![-2e4 * r * x[0].cos() + 0.5 * x[0], 2e4 * r]
        },
    )
    .with_phi_star(0.0)
    .with_minimizer(vec![0.0, 0.0])
}

/// Spiral valley `r^2 (3/2 - sin(r - theta) / 2) / (1 + r^2)`.
pub fn snail() -> Problem {
    const A: f64 = 1.5;
    const B: f64 = 0.5;
    Problem::new(
        "SNAIL",
        vec![10.0, 10.0],
        |x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            let r = r2.sqrt();
            let theta = x[1].atan2(x[0]);
            r2 / (1.0 + r2) * (A - B * (r - theta).sin())
        },
        |x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            if r2 == 0.0 {
                return vec![0.0, 0.0];
            }
            let r = r2.sqrt();
            let theta = x[1].atan2(x[0]);
            let v = A - B * (r - theta).sin();
            let c = B * (r - theta).cos();
            let ratio = r2 / (1.0 + r2);
            let dratio = |xi: f64| 2.0 * xi / (1.0 + r2).powi(2);
            let dr = [x[0] / r, x[1] / r];
            let dtheta = [-x[1] / r2, x[0] / r2];
            (0..2).map(|i| dratio(x[i]) * v - ratio * c * (dr[i] - dtheta[i])).collect()
        },
    )
    .with_phi_star(0.0)
    .with_minimizer(vec![0.0, 0.0])
}

/// Names accepted by [`by_name`], with default dimensions.
pub const BUILTIN_NAMES: [&str; 12] = [
    "QUADILL", "ROSENBR", "SROSENBR", "BEALE", "CUBE", "POWELLSG", "HELIX", "BOX3", "GENROSE", "EXTROSNB",
    "SINEVAL", "SNAIL",
];

/// The suite used for aggregate comparisons: every built-in except the
/// quadratic, which has its own gradient-noise-only protocol.
pub fn benchmark_suite() -> Vec<Problem> {
    BUILTIN_NAMES[1..].iter().map(|n| by_name(n).expect("builtin")).collect()
}

/// Looks up a built-in problem. `SROSENBR:20` selects a dimension for the
/// variable-size families (defaults: SROSENBR 10, POWELLSG 4, GENROSE 5,
/// EXTROSNB 10).
pub fn by_name(spec: &str) -> Result<Problem> {
    let (name, dim) = match spec.split_once(':') {
        Some((n, d)) => {
            let d: usize = d
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad dimension in problem spec {spec:?}")))?;
            (n.trim().to_ascii_uppercase(), Some(d))
        }
        None => (spec.trim().to_ascii_uppercase(), None),
    };
    let fixed = |p: Problem, pname: &'static str| match dim {
        Some(d) if d != p.dim() => Err(Error::BadDimension { problem: pname, n: d }),
        _ => Ok(p),
    };
    match name.as_str() {
        "QUADILL" => fixed(quadratic_ill(), "QUADILL"),
        "ROSENBR" => fixed(rosenbrock(), "ROSENBR"),
        "SROSENBR" => srosenbr(dim.unwrap_or(10)),
        "BEALE" => fixed(beale(), "BEALE"),
        "CUBE" => fixed(cube(), "CUBE"),
        "POWELLSG" => powellsg(dim.unwrap_or(4)),
        "HELIX" => fixed(helix(), "HELIX"),
        "BOX3" => fixed(box3(), "BOX3"),
        "GENROSE" => genrose(dim.unwrap_or(5)),
        "EXTROSNB" => extrosnb(dim.unwrap_or(10)),
        "SINEVAL" => fixed(sineval(), "SINEVAL"),
        "SNAIL" => fixed(snail(), "SNAIL"),
        _ => Err(Error::InvalidParameter(format!("unknown problem {spec:?}"))),
    }
}
