use dppm::{
    detect_convex_segment, figure1_objective, golden_section_min, prox_step, quadratic_objective, select_t,
    sinewell_objective, Objective, ProxConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn along(x: &[f64], w: f64, p: &[f64]) -> Vec<f64> {
    x.iter().zip(p).map(|(a, b)| a + w * b).collect()
}

fn rosenbrock() -> Objective {
    Objective::new(
        2,
        |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
        |x| vec![-2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]), 200.0 * (x[1] - x[0] * x[0])],
    )
}

struct Case {
    obj: Objective,
    x: Vec<f64>,
    p: Vec<f64>,
    v: f64,
}

/// Seeded (objective, point, descent direction) triples whose segment probe
/// succeeds.
fn cases(count: usize, seed: u64) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objectives =
        [sinewell_objective(), figure1_objective(), rosenbrock(), quadratic_objective(&[1.0, 4.0, 9.0, 0.5]).unwrap()];
    let mut out = Vec::new();
    while out.len() < count {
        let obj = objectives[rng.random_range(0..objectives.len())].clone();
        let n = obj.dim();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let g = obj.grad(&x);
        let q: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let gn = dot(&g, &g).sqrt();
        if gn == 0.0 {
            continue;
        }
        let mix = rng.random_range(0.0..1.0);
        let raw: Vec<f64> = g.iter().zip(&q).map(|(gi, qi)| -gi / gn + mix * qi).collect();
        let s = dot(&raw, &raw).sqrt();
        let p: Vec<f64> = raw.iter().map(|r| r / s).collect();
        if dot(&p, &g) >= 0.0 {
            continue;
        }
        if let Ok(v) = detect_convex_segment(&obj, &x, &p, 2) {
            out.push(Case { obj, x, p, v });
        }
    }
    out
}

#[test]
fn golden_section_matches_grid_argmin() {
    for case in cases(200, 1) {
        let Case { obj, x, p, v } = case;
        let gdot = dot(&p, &obj.grad(&x));
        let t = select_t(v, gdot).unwrap();
        let fx = obj.eval(&x);
        let phi = |w: f64| w * w / (2.0 * t) + (obj.eval(&along(&x, w, &p)) - fx);
        let h = v * 1e-5;
        let steps = 100_000;
        let (mut best, mut arg) = (f64::INFINITY, 0.0);
        for i in 0..=steps {
            let w = i as f64 * h;
            let val = phi(w);
            if val < best {
                best = val;
                arg = w;
            }
        }
        let w_gs = golden_section_min(phi, 0.0, v, 1e-10 * v).unwrap();
        assert!((w_gs - arg).abs() <= 2.0 * h, "golden {w_gs} grid {arg} v {v}");
        let step = prox_step(&obj, &x, &p, &ProxConfig::default()).unwrap();
        assert!((step.w_star - arg).abs() <= 2.0 * h, "prox {} grid {arg}", step.w_star);
    }
}

#[test]
fn step_invariants() {
    for case in cases(200, 2) {
        let Case { obj, x, p, v } = case;
        let step = prox_step(&obj, &x, &p, &ProxConfig::default()).unwrap();
        assert_eq!(step.v, v);
        let gdot = step.gdot;
        if step.interior {
            assert!(step.residual.abs() <= 1e-6 * (1.0 + gdot.abs()), "residual {}", step.residual);
        }
        // the derivative along the segment increases
        let slopes: Vec<f64> = (0..50).map(|i| dot(&p, &obj.grad(&along(&x, v * i as f64 / 49.0, &p)))).collect();
        assert!(slopes.windows(2).all(|s| s[1] >= s[0] - 1e-10));
        let fx = obj.eval(&x);
        assert!(step.phi_next <= fx - step.t * step.gdot_next * step.gdot_next + 1e-10);
        assert!(step.w_star <= step.t * gdot.abs());
        assert!(step.t * gdot.abs() <= v + 1e-12);
        assert!(step.w_star > 0.0);
    }
}
