use fracthin::iterlemmas::oracle::*;
use fracthin::iterlemmas::*;
use fracthin::{Error, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DRAWS: usize = 100;

fn uniform(a: f64, b: f64, m: usize) -> Vec<f64> {
    (0..m).map(|i| a + (b - a) * i as f64 / (m - 1) as f64).collect()
}

#[test]
fn extinction_distance_matches_bisection() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..DRAWS {
        let c = rng.random_range(0.1..10.0);
        let a = rng.random_range(0.5..3.0);
        let b = rng.random_range(1.2..3.0);
        let f0 = rng.random_range(0.1..10.0);
        let closed = extinction_distance(c, a, b, f0);
        let brute = extinction_distance_by_iteration(c, a, b, f0, 300);
        assert!((closed / brute - 1.0).abs() < 1e-9, "C {c} a {a} b {b} f0 {f0}: {closed} vs {brute}");
    }
    assert_eq!(extinction_distance_by_iteration(1.0, 1.0, 2.0, 1.0, 300).round(), 4.0);
}

#[test]
fn saturated_dyadic_sample_is_accepted() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..DRAWS {
        let c = rng.random_range(0.1..10.0);
        let a = rng.random_range(0.5..3.0);
        let b = rng.random_range(1.2..2.0);
        let f0 = rng.random_range(0.1..10.0);
        let x0 = rng.random_range(0.0..2.0);
        let d = extinction_distance(c, a, b, f0);
        // The equality trajectory is unstable (errors grow like b^k), so keep it short.
        let steps = 16;
        let logs = dyadic_log_sequence(c, a, b, f0, d, steps);
        let mut x: Vec<f64> = (0..=steps).map(|k| x0 + d * (1.0 - 0.5f64.powi(k as i32))).collect();
        let mut f: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
        for (k, l) in logs.iter().enumerate() {
            let closed = f0.ln() - k as f64 * a / (b - 1.0) * 2f64.ln();
            assert!((l - closed).abs() <= 1e-8 * closed.abs().max(1.0));
        }
        for k in 1..=steps {
            let bound = c * (x[k] - x[k - 1]).powf(-a) * f[k - 1].powf(b);
            assert!((f[k] - bound).abs() <= 1e-10 * bound);
        }
        x.extend([x0 + d, x0 + 1.5 * d]);
        f.extend([0.0, 0.0]);
        let sample = DecayFunction::new(x, f).unwrap();
        let p = stampacchia_extinction(&sample, c, a, b).unwrap();
        assert!((p.extinction_point().unwrap() - (x0 + d)).abs() <= 1e-12 * (x0 + d));
    }
}

#[test]
fn exponential_envelope_dominates_maximal_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..DRAWS {
        let c = rng.random_range(0.1..10.0);
        let a = rng.random_range(0.5..3.0);
        let f0 = rng.random_range(0.1..10.0);
        let x0 = rng.random_range(0.0..2.0);
        let h = (std::f64::consts::E * c).powf(1.0 / a);
        let x = uniform(x0, x0 + 10.0 * h, 300);
        let f = maximal_sample(&x, f0, |xi, fi, y| c * (y - xi).powf(-a) * fi);
        let sample = DecayFunction::new(x, f).unwrap();
        let p = stampacchia_extinction(&sample, c, a, 1.0).unwrap();
        let Prediction::Exponential { zeta, .. } = p else { panic!("{p:?}") };
        assert!((zeta - 1.0 / h).abs() < 1e-12 / h);
    }
}

#[test]
fn algebraic_envelope_dominates_maximal_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..DRAWS {
        let c = rng.random_range(0.1..10.0);
        let a = rng.random_range(0.5..3.0);
        let b = rng.random_range(0.2..0.8);
        let f0 = rng.random_range(0.1..10.0);
        let x0 = rng.random_range(0.5..2.0);
        let x = uniform(x0, x0 + 50.0, 300);
        let f = maximal_sample(&x, f0, |xi, fi, y| c * (y - xi).powf(-a) * fi.powf(b));
        let sample = DecayFunction::new(x, f).unwrap();
        let p = stampacchia_extinction(&sample, c, a, b).unwrap();
        assert!(matches!(p, Prediction::Algebraic { mu, .. } if (mu - a / (1.0 - b)).abs() < 1e-12));
    }
}

#[test]
fn inhomogeneous_gate_implies_saturated_extinction() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut gated = 0;
    for _ in 0..DRAWS {
        let c0 = rng.random_range(0.01..1.0);
        let a = rng.random_range(0.5..3.0);
        let b = rng.random_range(1.2..3.0);
        let f0 = rng.random_range(0.01..1.0);
        let g = (2f64.powf(b * (a + b - 1.0) / (b - 1.0)) * c0).powf(1.0 / (b - 1.0));
        let s = rng.random_range(0.0..0.9) / g;
        let q = a / (b - 1.0);
        let r_star = (g * f0 / (1.0 - g * s)).powf(1.0 / q);
        let r = r_star * rng.random_range(0.5..2.0);
        let gate = inhomogeneous_gate(f0, c0, a, b, s, r);
        if (r / r_star - 1.0).abs() > 1e-9 {
            assert_eq!(gate, r > r_star);
        }
        if gate {
            gated += 1;
            assert!(inhomogeneous_vanishes(f0, c0, a, b, s, r), "c0 {c0} a {a} b {b} S {s} R {r}");
        }
    }
    assert!(gated >= 20, "{gated}");
}

#[test]
fn inhomogeneous_without_source_reduces_to_classical_gate() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..DRAWS {
        let c0 = rng.random_range(0.01..1.0);
        let a = rng.random_range(0.5..3.0);
        let b = rng.random_range(1.2..3.0);
        let f0 = rng.random_range(0.01..1.0);
        // S = 0: the gate is d(R) >= ... with the classical distance at C = 2^b c0.
        let d = extinction_distance(2f64.powf(b) * c0, a, b, f0);
        assert!(inhomogeneous_gate(f0, c0, a, b, 0.0, d * (1.0 + 1e-9)));
        assert!(!inhomogeneous_gate(f0, c0, a, b, 0.0, d * (1.0 - 1e-9)));
    }
}

#[test]
fn geometric_iteration_vanishes_before_d() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..DRAWS {
        let f0: f64 = rng.random_range(0.1..10.0);
        let nu = rng.random_range(1.2..3.0);
        let q = rng.random_range(0.05..0.95);
        let eps = q * f0.powf(1.0 - nu);
        let d = geometric_distance(f0, eps, nu);
        let logs = geometric_log_sequence(f0, eps, nu, 128);
        let x: Vec<f64> = (0..=128).map(|k| k as f64 * d / 64.0).collect();
        let f: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
        for (xi, l) in x.iter().zip(&logs) {
            if *xi >= d {
                assert!(*l < f64::MIN_POSITIVE.ln() - 40.0, "ln f = {l} at {xi} >= {d}");
            }
        }
        let sample = DecayFunction::new(x, f).unwrap();
        assert!((geometric_extinction(&sample, eps, nu).unwrap() - d).abs() <= 1e-12 * d);
    }
}

#[test]
fn geometric_rejects_eps_out_of_range() {
    let f = DecayFunction::new(vec![0.0, 1.0], vec![2.0, 0.0]).unwrap();
    // f(0)^{1-nu} = 1/2 for nu = 2.
    assert!(matches!(geometric_extinction(&f, 0.5, 2.0), Err(Error::InvalidArgument(_))));
    assert!(geometric_extinction(&f, 0.0, 2.0).is_err());
    assert!(geometric_extinction(&f, 0.25, 2.0).is_ok());
}

#[test]
fn gn_constants_have_no_violations_on_fresh_fields() {
    let g = Grid::line(1.0, 64).unwrap();
    for (b, s) in [(1.0, 0.5), (0.5, 0.25), (1.5, 0.75)] {
        let k = gn_empirical_constant(s, b, &g, 1000, 3).unwrap();
        assert_eq!(k.violations, 0, "b {b} s {s}");
        assert!(k.c2 >= 1.0 - 1e-12, "unit box: |Omega|^(1/2-1/b) = 1, got {}", k.c2);
        assert!((k.theta - gn_theta(b, s, 1)).abs() < 1e-15);
    }
}
