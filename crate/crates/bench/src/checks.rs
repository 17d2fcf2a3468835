//! Verification suites: the closed-form update against the brute-force
//! nearness solver, limit identities, positive definiteness, trace bounds,
//! the inverse form, and the fixed-step envelope.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spbfgs::diagnostics::{qlinear_envelope, trace_bound_b, trace_bound_h, TheoryParams};
use spbfgs::instances::{random_pair, random_spd};
use spbfgs::linalg::SymMatrix;
use spbfgs::noise::{sample_ball, NoiseSpec};
use spbfgs::optimizer::fixed_step_descent;
use spbfgs::oracle::{make_weight_matrix, oracle_penalized_qp};
use spbfgs::problems::quadratic_ill;
use spbfgs::update::{
    bfgs_update, compute_penalty_scalars, spbfgs_curvature_ok, spbfgs_inverse_update, spbfgs_update,
    spbfgs_update_unchecked, Beta, DEFAULT_DENOM_TOL,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        CheckOutcome { name, passed, detail }
    }
}

const DIMS: [usize; 4] = [2, 3, 4, 6];
const BETAS: [f64; 4] = [0.1, 1.0, 10.0, 1000.0];

/// Closed form against the penalized QP for two weight matrices per instance.
pub fn oracle_equivalence(seed: u64, instances: usize) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut errors = 0;
    for i in 0..instances {
        let n = DIMS[i % DIMS.len()];
        let beta = BETAS[(i / DIMS.len()) % BETAS.len()];
        let h = random_spd(&mut rng, n);
        let p = random_pair(&mut rng, n, Some(true));
        let closed =
            compute_penalty_scalars(&p, Beta::Finite(beta)).and_then(|sc| spbfgs_update(&h, &p, &sc));
        for c in [rng.random_range(0.2..1.0), rng.random_range(2.0..5.0)] {
            let brute = make_weight_matrix(&p, c).and_then(|w| oracle_penalized_qp(&h, &p, beta, &w));
            match (&closed, brute) {
                (Ok(a), Ok(b)) => worst = worst.max(a.max_abs_diff(&b)),
                _ => errors += 1,
            }
        }
    }
    CheckOutcome::new(
        "oracle equivalence",
        errors == 0 && worst <= 1e-8,
        format!("{instances} instances x 2 weights, max entry error {worst:.2e}, solver errors {errors}"),
    )
}

/// `beta = inf` against BFGS and `beta = 0` against the identity map.
pub fn limit_identities(seed: u64, instances: usize) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut zero_exact = true;
    for i in 0..instances {
        let n = DIMS[i % DIMS.len()];
        let h = random_spd(&mut rng, n);
        let p = random_pair(&mut rng, n, Some(true));
        let inf = compute_penalty_scalars(&p, Beta::Infinite).expect("s'y > 0");
        let a = spbfgs_update(&h, &p, &inf).expect("valid");
        let b = bfgs_update(&h, &p).expect("valid");
        worst = worst.max(a.max_abs_diff(&b));
        let zero = compute_penalty_scalars(&p, Beta::ZERO).expect("beta = 0");
        zero_exact &= spbfgs_update(&h, &p, &zero).expect("valid") == h;
    }
    CheckOutcome::new(
        "limit identities",
        worst <= 1e-12 && zero_exact,
        format!("max |SP(inf) - BFGS| = {worst:.2e}, beta = 0 exact: {zero_exact}"),
    )
}

/// The update is positive definite exactly when `s'y > -1/beta`.
pub fn pd_iff_curvature(seed: u64, instances: usize) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut agree, mut pass, mut fail) = (0, 0, 0);
    for i in 0..instances {
        let n = DIMS[i % DIMS.len()];
        let h = random_spd(&mut rng, n);
        let p = random_pair(&mut rng, n, Some(i % 2 == 0));
        let sty = p.sty();
        // Positive s'y passes for any beta; for negative s'y pick beta on
        // either side of -1/s'y with a clear margin.
        let beta = match i % 4 {
            0 | 2 => Beta::Finite(10f64.powf(rng.random_range(-3.0..3.0))),
            1 => Beta::Finite(rng.random_range(0.05..0.8) / sty.abs()),
            _ => {
                if rng.random_bool(0.2) {
                    Beta::Infinite
                } else {
                    Beta::Finite(rng.random_range(1.25..20.0) / sty.abs())
                }
            }
        };
        let ok = spbfgs_curvature_ok(&p, beta);
        if ok {
            pass += 1;
        } else {
            fail += 1;
        }
        let pd = compute_penalty_scalars(&p, beta)
            .and_then(|sc| spbfgs_update_unchecked(&h, &p, &sc))
            .map(|m| m.is_positive_definite())
            .unwrap_or(false);
        if pd == ok {
            agree += 1;
        }
    }
    CheckOutcome::new(
        "positive definite iff curvature condition",
        agree == instances && pass > 0 && fail > 0,
        format!("{agree}/{instances} agree ({pass} satisfy the condition, {fail} violate it)"),
    )
}

/// `y'H'y` as a convex combination of `s'y` and `y'Hy`, and the trace
/// bounds on `H'` and `B'`.
pub fn curvature_identity_and_trace_bounds(seed: u64, instances: usize) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut ident, mut th, mut tb) = (0, 0, 0);
    let mut worst_ident: f64 = 0.0;
    for i in 0..instances {
        let n = DIMS[i % DIMS.len()];
        let h = random_spd(&mut rng, n);
        let b = h.inverse_spd().expect("spd");
        let p = random_pair(&mut rng, n, Some(true));
        let beta = 10f64.powf(rng.random_range(-3.0..4.0));
        let sc = compute_penalty_scalars(&p, Beta::Finite(beta)).expect("s'y > 0");
        let hn = spbfgs_update(&h, &p, &sc).expect("valid");
        let t = beta * p.sty();
        let yhy = h.quad_form(p.y());
        let expected = t / (1.0 + t) * p.sty() + yhy / (1.0 + t);
        let err = (hn.quad_form(p.y()) - expected).abs() / (1.0 + expected.abs());
        worst_ident = worst_ident.max(err);
        if err <= 1e-10 {
            ident += 1;
        }
        let bound_h = trace_bound_h(&h, &p, &sc);
        if hn.trace() <= bound_h + 1e-10 * bound_h.abs() {
            th += 1;
        }
        if let Ok(bn) = spbfgs_inverse_update(&b, &h, &p, &sc, DEFAULT_DENOM_TOL) {
            let bound_b = trace_bound_b(&b, &p, &sc);
            if bn.trace() <= bound_b + 1e-10 * bound_b.abs() {
                tb += 1;
            }
        }
    }
    CheckOutcome::new(
        "curvature identity and trace bounds",
        ident == instances && th == instances && tb == instances,
        format!("identity {ident}/{instances} (worst rel {worst_ident:.1e}), Tr(H') bound {th}/{instances}, Tr(B') bound {tb}/{instances}"),
    )
}

/// `B' H' = I` for the inverse and direct forms of the update.
pub fn inverse_consistency(seed: u64, instances: usize) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut errors = 0;
    for i in 0..instances {
        let n = DIMS[i % DIMS.len()];
        let h = random_spd(&mut rng, n);
        let b = h.inverse_spd().expect("spd");
        let p = random_pair(&mut rng, n, Some(true));
        let beta = BETAS[i % BETAS.len()];
        let sc = compute_penalty_scalars(&p, Beta::Finite(beta)).expect("s'y > 0");
        let hn = spbfgs_update(&h, &p, &sc).expect("valid");
        match spbfgs_inverse_update(&b, &h, &p, &sc, DEFAULT_DENOM_TOL) {
            Ok(bn) => {
                let prod = bn.to_dmatrix() * hn.to_dmatrix();
                let id = SymMatrix::identity(n).to_dmatrix();
                worst = worst.max((prod - id).amax());
            }
            Err(_) => errors += 1,
        }
    }
    CheckOutcome::new(
        "inverse form consistency",
        errors == 0 && worst <= 1e-8,
        format!("max |B'H' - I| = {worst:.2e} over {instances} instances, failures {errors}"),
    )
}

/// Fixed-step runs on the ill-conditioned quadratic with `H = I` and the
/// largest admissible step satisfy the Q-linear envelope outside the noise
/// region.
pub fn fixed_step_envelope(seeds: u64, iterations: usize) -> CheckOutcome {
    let p = quadratic_ill();
    let params = TheoryParams::for_problem(&p, 1.0, 1.0, 1.0).expect("metadata");
    let alpha = params.max_step();
    let h = SymMatrix::identity(p.dim());
    let (mut ok_runs, mut checked, mut worst) = (0, 0, f64::NEG_INFINITY);
    for seed in 0..seeds {
        let noise = NoiseSpec { eps_f: 0.0, eps_g: 1.0, seed };
        let report = fixed_step_descent(&p, noise, &h, alpha, iterations)
            .and_then(|t| qlinear_envelope(&t, &p, &params, alpha));
        if let Ok(r) = report {
            checked += r.checked;
            worst = worst.max(r.worst_ratio);
            if r.ok() {
                ok_runs += 1;
            }
        }
    }
    CheckOutcome::new(
        "fixed-step Q-linear envelope",
        ok_runs == seeds && checked > 0,
        format!(
            "{ok_runs}/{seeds} runs, {checked} steps checked, worst ratio {worst:.9} vs rate {:.9}",
            1.0 - alpha * params.psi * params.m
        ),
    )
}

/// Every gradient perturbation lies in the ball.
pub fn noise_bounds(seed: u64, draws: usize) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for i in 0..draws {
        let n = 1 + i % 8;
        let e = sample_ball(&mut rng, n, 1.0);
        worst = worst.max(e.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    CheckOutcome::new("noise bounds", worst <= 1.0, format!("max ||e|| = {worst:.6} over {draws} draws"))
}

pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    vec![
        oracle_equivalence(seed, 100),
        limit_identities(seed + 1, 100),
        pd_iff_curvature(seed + 2, 2000),
        curvature_identity_and_trace_bounds(seed + 3, 1000),
        inverse_consistency(seed + 4, 100),
        fixed_step_envelope(30, 2000),
        noise_bounds(seed + 5, 100_000),
    ]
}
