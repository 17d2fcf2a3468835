use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spbfgs::diagnostics::{in_noise_region, qlinear_envelope, qlinear_envelope_ok, TheoryParams};
use spbfgs::linalg::{dot, norm2, SymMatrix};
use spbfgs::line_search::{backtrack, LineSearchConfig};
use spbfgs::noise::{sample_ball, NoiseSpec, NoisyOracle};
use spbfgs::optimizer::fixed_step_descent;
use spbfgs::problems::{by_name, finite_diff_grad, quadratic_ill, rosenbrock, BUILTIN_NAMES};

#[test]
fn function_noise_has_uniform_moments() {
    let p = rosenbrock();
    let x = [0.3, -0.4];
    let phi = p.value(&x);
    let mut o = NoisyOracle::new(p, NoiseSpec { eps_f: 1.0, eps_g: 0.0, seed: 1 }).unwrap();
    let n = 100_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let f = o.noisy_f(&x).unwrap();
        assert!((f - phi).abs() <= 1.0);
        sum += f - phi;
    }
    let sigma = (1.0f64 / 3.0).sqrt();
    assert!((sum / n as f64).abs() <= 3.0 * sigma / (n as f64).sqrt());
    assert_eq!(o.f_evals(), n);
}

#[test]
fn ball_radius_mean_in_2d() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 100_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let e = sample_ball(&mut rng, 2, 1.0);
        let r = norm2(&e);
        assert!(r <= 1.0);
        sum += r;
    }
    // E||e|| = n / (n + 1) for the unit n-ball
    assert!((sum / n as f64 - 2.0 / 3.0).abs() < 0.01);
}

#[test]
fn one_dimensional_ball_is_uniform_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut xs: Vec<f64> = (0..100_000).map(|_| sample_ball(&mut rng, 1, 1.0)[0]).collect();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let ks = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = (x + 1.0) / 2.0;
            (cdf - i as f64 / n).abs().max((cdf - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 0.01, "KS = {ks}");
}

#[test]
fn ball_sampling_is_replayable() {
    let mut a = ChaCha8Rng::seed_from_u64(4);
    let mut b = a.clone();
    assert_eq!(sample_ball(&mut a, 5, 2.0), sample_ball(&mut b, 5, 2.0));
    assert_eq!(sample_ball(&mut a, 3, 0.0), vec![0.0; 3]);
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for name in BUILTIN_NAMES {
        let p = by_name(name).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> =
                p.x0().iter().map(|v| v + rng.random_range(-1.0..1.0) * (1.0 + 0.1 * v.abs())).collect();
            let g = p.gradient(&x);
            let fd = finite_diff_grad(&p, &x, 1e-6 * (1.0 + norm2(&x)));
            let scale = 1.0 + norm2(&g);
            for (a, b) in g.iter().zip(&fd) {
                assert!((a - b).abs() <= 1e-5 * scale, "{name} at {x:?}: {g:?} vs {fd:?}");
            }
        }
    }
}

#[test]
fn phi_star_is_a_lower_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for name in BUILTIN_NAMES {
        let p = by_name(name).unwrap();
        let ps = p.phi_star().unwrap();
        for _ in 0..1000 {
            let x: Vec<f64> = p.x0().iter().map(|v| v + rng.random_range(-3.0..3.0)).collect();
            assert!(p.value(&x) >= ps - 1e-12, "{name}");
        }
    }
}

#[test]
fn backtrack_counts_match_oracle_and_replay() {
    let p = rosenbrock();
    let spec = NoiseSpec { eps_f: 1e-2, eps_g: 1e-1, seed: 8 };
    let cfg = LineSearchConfig { eps_a: 1e-2, ..Default::default() };
    let run = || {
        let mut o = NoisyOracle::new(p.clone(), spec).unwrap();
        let x = p.x0().to_vec();
        let f = o.noisy_f(&x).unwrap();
        let g = o.noisy_g(&x).unwrap();
        let d: Vec<f64> = g.iter().map(|v| -v).collect();
        let before = o.f_evals();
        let r = backtrack(&mut o, &x, &d, f, dot(&g, &d), &cfg, None).unwrap();
        assert_eq!(r.evals_used, o.f_evals() - before);
        (r.alpha, r.evals_used)
    };
    assert_eq!(run(), run());
}

#[test]
fn backtrack_finds_a_step_outside_noise_region() {
    let p = quadratic_ill();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut o = NoisyOracle::new(p.clone(), NoiseSpec { eps_f: 0.0, eps_g: 1.0, seed: 9 }).unwrap();
    let cfg = LineSearchConfig { max_backtracks: 75, ..Default::default() };
    for _ in 0..200 {
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-100.0..100.0)).collect();
        if p.value(&x) <= 50.0 {
            continue;
        }
        let f = o.noisy_f(&x).unwrap();
        let g = o.noisy_g(&x).unwrap();
        let d: Vec<f64> = g.iter().map(|v| -v).collect();
        let r = backtrack(&mut o, &x, &d, f, dot(&g, &d), &cfg, None).unwrap();
        assert!(r.alpha > 0.0);
    }
}

#[test]
fn outside_noise_region_noisy_gradient_is_a_descent_direction() {
    let p = quadratic_ill();
    let params = TheoryParams::for_problem(&p, 1.0, 1.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut o = NoisyOracle::new(p.clone(), NoiseSpec { eps_f: 0.0, eps_g: 1.0, seed: 10 }).unwrap();
    let mut checked = 0;
    while checked < 10_000 {
        // Mix scales so draws land near the region boundary as well as far out.
        let scale = 10f64.powf(rng.random_range(-1.0..3.0));
        let x: Vec<f64> = (0..4).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        if in_noise_region(&p, &x, &params).unwrap() {
            continue;
        }
        let g = o.noisy_g(&x).unwrap();
        assert!(dot(&p.gradient(&x), &g) > 0.0);
        checked += 1;
    }
}

#[test]
fn fixed_step_envelope_on_noiseless_quadratic() {
    let p = quadratic_ill();
    let params = TheoryParams::for_problem(&p, 1.0, 1.0, 0.0).unwrap();
    let alpha = params.max_step();
    let t = fixed_step_descent(&p, NoiseSpec::noiseless(), &SymMatrix::identity(4), alpha, 500).unwrap();
    let report = qlinear_envelope(&t, &p, &params, alpha).unwrap();
    assert!(report.ok(), "{report:?}");
    assert_eq!(report.checked, 500);
}

#[test]
fn fixed_step_envelope_with_gradient_noise() {
    let p = quadratic_ill();
    let params = TheoryParams::for_problem(&p, 1.0, 1.0, 1.0).unwrap();
    let alpha = params.max_step();
    for seed in 0..5 {
        let noise = NoiseSpec { eps_f: 0.0, eps_g: 1.0, seed };
        let t = fixed_step_descent(&p, noise, &SymMatrix::identity(4), alpha, 2000).unwrap();
        assert!(qlinear_envelope_ok(&t, &p, &params, alpha).unwrap());
    }
    assert!(qlinear_envelope(
        &fixed_step_descent(&p, NoiseSpec::noiseless(), &SymMatrix::identity(4), alpha, 1).unwrap(),
        &p,
        &params,
        2.0 * alpha
    )
    .is_err());
}
