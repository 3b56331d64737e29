use dppm::dlc::{
    find_dlc_direction, outer_step, primal_recover, DlcSubproblem, DualPoint, DualQuadratic, Linearization,
};
use dppm::{detect_convex_segment, figure1_objective, sinewell_objective, DlcConfig, Objective};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dual value computed straight from the vectors, without the coefficient form.
fn direct_value(lin: &Linearization, mu: f64, l1: f64, l2: f64) -> f64 {
    let s: Vec<f64> =
        (0..lin.grad_g0.len()).map(|i| lin.grad_g0[i] + l1 * lin.grad_g1[i] + l2 * lin.grad_g2[i]).collect();
    l1 * lin.g1 + l2 * lin.g2 - dot(&s, &s) / (2.0 * mu)
}

/// Maximum of `d` over the grid `{0, h, ..., hi}^2`. Along each row `d` is a
/// concave parabola in `l1`, so only the grid points around its vertex and
/// the row ends can be the row maximum.
fn grid_max(lin: &Linearization, mu: f64, hi: f64, h: f64) -> f64 {
    let steps = (hi / h).round() as i64;
    let g11 = dot(&lin.grad_g1, &lin.grad_g1);
    let mut best = f64::NEG_INFINITY;
    for j in 0..=steps {
        let l2 = j as f64 * h;
        let s: Vec<f64> = (0..lin.grad_g0.len()).map(|i| lin.grad_g0[i] + l2 * lin.grad_g2[i]).collect();
        // d(l1) = const + l1 (g1 - s'grad_g1 / mu) - l1^2 g11 / (2 mu)
        let slope = lin.g1 - dot(&s, &lin.grad_g1) / mu;
        let mut idx = vec![0, steps];
        if g11 > 0.0 {
            let vertex = slope * mu / g11 / h;
            if vertex.is_finite() {
                let v = vertex.floor() as i64;
                idx.extend([v - 1, v, v + 1, v + 2]);
            }
        }
        for i in idx.into_iter().filter(|i| (0..=steps).contains(i)) {
            best = best.max(direct_value(lin, mu, i as f64 * h, l2));
        }
    }
    best
}

fn random_linearization(rng: &mut ChaCha8Rng, n: usize) -> (Linearization, f64) {
    let lin = Linearization {
        g1: rng.random_range(-5.0..5.0),
        g2: rng.random_range(-5.0..5.0),
        grad_g0: gaussian(rng, n),
        grad_g1: gaussian(rng, n),
        grad_g2: gaussian(rng, n),
    };
    (lin, rng.random_range(0.5..20.0))
}

#[test]
fn active_set_beats_dense_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let (lin, mu) = random_linearization(&mut rng, 5);
        let q = DualQuadratic::from_linearization(&lin, mu);
        let lam = q.maximize().expect("full-rank gram matrix");
        assert!(lam.lambda1 >= 0.0 && lam.lambda2 >= 0.0);
        let d = direct_value(&lin, mu, lam.lambda1, lam.lambda2);
        assert!((d - q.value(lam)).abs() <= 1e-9 * (1.0 + d.abs()));
        let g = grid_max(&lin, mu, 50.0, 1e-2);
        worst = worst.max(g - d);
        assert!(d >= g - 1e-4, "active set {d} below grid {g}");
    }
    assert!(worst <= 1e-4);
}

#[test]
fn constructed_interior_maximizer_round_trips() {
    // G = [[2, 0.5], [0.5, 1]], mu = 1, b = 0: maximizer solves G l = c
    let lin = Linearization {
        g1: 2.0 * 1.0 + 0.5 * 2.0,
        g2: 0.5 * 1.0 + 1.0 * 2.0,
        grad_g0: vec![0.0, 0.0],
        grad_g1: vec![2.0f64.sqrt(), 0.0],
        grad_g2: vec![0.5 / 2.0f64.sqrt(), (1.0 - 0.125f64).sqrt()],
    };
    let lam = DualQuadratic::from_linearization(&lin, 1.0).maximize().unwrap();
    assert!((lam.lambda1 - 1.0).abs() < 1e-12 && (lam.lambda2 - 2.0).abs() < 1e-12);
}

#[test]
fn primal_recovery_satisfies_stationarity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f = sinewell_objective();
    for _ in 0..50 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let p0 = gaussian(&mut rng, 3);
        let sub = DlcSubproblem::new(&f, &x, 1e-3, 1000.0, p0.clone()).unwrap();
        let lin = sub.linearize(&f);
        let Ok(lam) = DualQuadratic::from_linearization(&lin, sub.mu).maximize() else {
            continue;
        };
        let p = primal_recover(lam, &sub, &lin);
        for i in 0..3 {
            let r =
                lin.grad_g0[i] + sub.mu * (p[i] - p0[i]) + lam.lambda1 * lin.grad_g1[i] + lam.lambda2 * lin.grad_g2[i];
            assert!(r.abs() <= 1e-10 * (1.0 + sub.mu * p0[i].abs()), "row {i}: {r}");
        }
    }
}

#[test]
fn complementary_slackness_of_each_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let f = sinewell_objective();
    for _ in 0..200 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let p0 = gaussian(&mut rng, 3);
        let sub = DlcSubproblem::new(&f, &x, 1e-3, 1000.0, p0).unwrap();
        let Ok((lam, p, lin)) = outer_step(&sub, &f) else {
            continue;
        };
        let step: Vec<f64> = p.iter().zip(&sub.p0).map(|(a, b)| a - b).collect();
        let lin1 = lin.g1 + dot(&lin.grad_g1, &step);
        let lin2 = lin.g2 + dot(&lin.grad_g2, &step);
        assert!((lam.lambda1 * lin1).abs() <= 1e-6 * (1.0 + lin.g1.abs()));
        assert!((lam.lambda2 * lin2).abs() <= 1e-6 * (1.0 + lin.g2.abs()));
        // linearized feasibility
        assert!(lin1 <= 1e-8 * (1.0 + lin.g1.abs()) && lin2 <= 1e-8 * (1.0 + lin.g2.abs()));
    }
}

#[test]
fn converged_direction_is_a_fixed_point() {
    let f = figure1_objective();
    let cfg = DlcConfig { delta: Some(1e-6), ..DlcConfig::default() };
    let r = find_dlc_direction(&f, &[0.0], &cfg).unwrap();
    assert!(r.converged);
    let sub = DlcSubproblem::new(&f, &[0.0], 1e-6, cfg.mu, r.p.clone()).unwrap();
    let (_, p, _) = outer_step(&sub, &f).unwrap();
    assert!((p[0] - r.p[0]).abs() <= 1e-8);
}

#[test]
fn converged_directions_satisfy_local_convexity() {
    let f = figure1_objective();
    let cfg = DlcConfig { delta: Some(1e-6), ..DlcConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    for _ in 0..20 {
        let x = [rng.random_range(-1.0..1.0)];
        let Ok(r) = find_dlc_direction(&f, &x, &cfg) else { continue };
        if !r.converged {
            continue;
        }
        let Ok(v) = detect_convex_segment(&f, &x, &r.direction, 2) else { continue };
        let fx = f.eval(&x);
        let slope = f.grad(&x)[0] * r.direction[0];
        for i in 0..100 {
            let w = v * i as f64 / 99.0;
            let fw = f.eval(&[x[0] + w * r.direction[0]]);
            assert!(fw >= fx + w * slope - 1e-8);
        }
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn concave_anchor_is_rejected() {
    let f = Objective::new(2, |x| -0.5 * dot(x, x), |x| x.iter().map(|v| -v).collect());
    let cfg = DlcConfig { delta: Some(1e-6), ..DlcConfig::default() };
    let r = find_dlc_direction(&f, &[1.0, 0.5], &cfg).unwrap();
    assert!(!r.converged);
    assert!(r.magnitude < 10.0 * (2.0f64 * 1e-6).sqrt());
    let g = f.grad(&[1.0, 0.5]);
    assert!(dot(&g, &r.direction) < 0.0);
}

#[test]
fn zero_multipliers_are_positive_zero() {
    let lam = DualPoint::new(-0.0, -1e-300);
    assert!(lam.lambda1.is_sign_positive() && lam.lambda2.is_sign_positive());
}
