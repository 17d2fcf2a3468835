//! Seeded random instances for verification suites and tests.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{dot, norm2, DenseVector, SymMatrix};
use crate::update::CurvaturePair;

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DenseVector {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Random orthogonal matrix from the QR factorization of a Gaussian matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// `Q diag(lambda) Q'` with eigenvalues drawn log-uniformly from `[lo, hi]`.
pub fn random_spd_spectrum<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> SymMatrix {
    let q = random_orthogonal(rng, n);
    let (llo, lhi) = (lo.ln(), hi.ln());
    let lambda: Vec<f64> = (0..n).map(|_| rng.random_range(llo..=lhi).exp()).collect();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lambda));
    let m = &q * d * q.transpose();
    SymMatrix::from_dmatrix(&m).expect("finite by construction")
}

/// Well-conditioned SPD matrix with spectrum in `[0.2, 5]`.
pub fn random_spd<R: Rng + ?Sized>(rng: &mut R, n: usize) -> SymMatrix {
    random_spd_spectrum(rng, n, 0.2, 5.0)
}

/// Random curvature pair. `sign = Some(true)` forces `s'y > 0`,
/// `Some(false)` forces `s'y < 0`. The angle between `s` and `y` is kept away
/// from 90 degrees so `|s'y|` is not vanishingly small.
pub fn random_pair<R: Rng + ?Sized>(rng: &mut R, n: usize, sign: Option<bool>) -> CurvaturePair {
    loop {
        let s = gaussian_vector(rng, n);
        let mut y = gaussian_vector(rng, n);
        let sty = dot(&s, &y);
        if sty.abs() < 0.1 * norm2(&s) * norm2(&y) {
            continue;
        }
        if let Some(positive) = sign {
            if (sty > 0.0) != positive {
                y.iter_mut().for_each(|v| *v = -*v);
            }
        }
        return CurvaturePair::new(s, y).expect("finite by construction");
    }
}
