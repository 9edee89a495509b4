use std::sync::Arc;

use approx::assert_relative_eq;
use fracthin::iterlemmas::{self, DecayFunction};
use fracthin::model::{c_alpha, f_kernel};
use fracthin::solver::{self, Mobility, OutputSchedule, RunSpec, SolverConfig};
use fracthin::spectral::{analyze, frac_laplacian, seminorm_sq, synthesize};
use fracthin::{Grid, ModelParams, SpectralField};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid_strategy() -> impl Strategy<Value = Arc<Grid>> {
    prop_oneof![
        (8usize..=96, 0.5f64..4.0).prop_map(|(n, l)| Grid::line(l, n).unwrap()),
        (8usize..=24, 8usize..=24, 0.5f64..2.0)
            .prop_map(|(a, b, l)| Grid::new(2, &[l, 1.0], &[a, b]).unwrap()),
    ]
}

fn field(g: &Arc<Grid>, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let band = g.sizes().iter().copied().min().unwrap() / 2;
    SpectralField::random_band_limited(g, band, 1.5, &mut rng)
}

proptest! {
    #[test]
    fn transform_round_trip(g in grid_strategy(), seed in any::<u64>()) {
        let u = field(&g, seed);
        let back = analyze(&synthesize(u.coeffs(), &g).unwrap(), &g).unwrap();
        let err = back.iter().zip(u.coeffs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-12 * u.l2_norm().max(1.0), "{err}");
    }

    #[test]
    fn fractional_laplacian_is_symmetric(g in grid_strategy(), seed in any::<u64>(), s in 0.05f64..1.0) {
        let u = field(&g, seed);
        let v = field(&g, seed ^ 0x5555);
        let a = frac_laplacian(&u, s).unwrap().inner(&v);
        let b = u.inner(&frac_laplacian(&v, s).unwrap());
        prop_assert!((a - b).abs() <= 1e-11 * (a.abs() + b.abs()).max(1e-12));
    }

    #[test]
    fn fractional_laplacian_has_zero_mean_and_ignores_constants(
        g in grid_strategy(), seed in any::<u64>(), s in 0.05f64..1.0, c in -5.0f64..5.0,
    ) {
        let u = field(&g, seed);
        let lu = frac_laplacian(&u, s).unwrap();
        let shifted = frac_laplacian(&u.map_values(|v| v + c), s).unwrap();
        prop_assert!(lu.mean().abs() <= 1e-12 * lu.l2_norm().max(1.0));
        prop_assert!(shifted.relative_l2_distance(&lu) <= 1e-10);
    }

    #[test]
    fn powers_compose(g in grid_strategy(), seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let u = field(&g, seed);
        let ab = frac_laplacian(&frac_laplacian(&u, a).unwrap(), b).unwrap();
        let direct = frac_laplacian(&u, a + b).unwrap();
        prop_assert!(ab.relative_l2_distance(&direct) <= 1e-11);
    }

    #[test]
    fn seminorm_is_pairing_and_satisfies_poincare(g in grid_strategy(), seed in any::<u64>(), s in 0.05f64..1.0) {
        let u = field(&g, seed);
        let e = seminorm_sq(&u, s);
        let pairing = u.inner(&frac_laplacian(&u, s).unwrap());
        prop_assert!((e - pairing).abs() <= 1e-11 * e.max(1e-300));
        let m = u.mean();
        let fluct = u.map_values(|v| v - m).l2_norm().powi(2);
        prop_assert!(e >= g.lambda_min().powf(s) * fluct * (1.0 - 1e-10));
    }

    #[test]
    fn mobility_is_monotone_and_bounded(
        n in 0.3f64..3.0, beta in 3.0f64..8.0, eps in 0.0f64..0.1, delta in 0.0f64..0.1,
        gamma in 0.0f64..0.1, z in 1e-6f64..10.0, dz in 1e-6f64..1.0,
    ) {
        let p = ModelParams { n, beta, eps, delta, gamma, ..ModelParams::default() };
        let (a, b) = (p.mobility(z), p.mobility(z + dz));
        prop_assert!(a <= b);
        prop_assert!(a >= gamma && a <= z.powf(n) + gamma);
        prop_assert!(p.mobility_deriv(z) >= 0.0);
    }

    #[test]
    fn regularized_entropy_derivative_matches_difference(
        n in 0.5f64..2.0, alpha in -0.3f64..1.0, eps in 0.0f64..0.01, delta in 0.0f64..0.01, z in 0.2f64..5.0,
    ) {
        let p = ModelParams { n, alpha, beta: 4.0, eps, delta, ..ModelParams::default() };
        let h = 1e-5 * z;
        let fd = (p.entropy_alpha_reg(z + h) - p.entropy_alpha_reg(z - h)) / (2.0 * h);
        let d = p.entropy_alpha_reg_deriv(z);
        prop_assert!((fd - d).abs() <= 1e-6 * d.abs().max(1.0), "{fd} vs {d}");
        // Convexity of G_alpha.
        prop_assert!(p.entropy_alpha_deriv(z) <= p.entropy_alpha_deriv(z * 1.01));
    }

    #[test]
    fn f_kernel_is_homogeneous(alpha in prop_oneof![-0.9f64..-0.01, 0.01f64..1.0], r in 0.0f64..5.0, w in 0.0f64..5.0, l in 0.1f64..10.0) {
        let f = f_kernel(r, w, alpha).unwrap();
        let g = f_kernel(l * r, l * w, alpha).unwrap();
        let scale = l.powf(alpha + 2.0);
        let size = r.max(w).powf(alpha + 2.0) * scale;
        prop_assert!((g - scale * f).abs() <= 1e-9 * size.max(1e-300));
    }

    #[test]
    fn extinction_distance_scales(
        c in 0.1f64..10.0, a in 0.5f64..3.0, b in 1.1f64..3.0, f0 in 0.1f64..10.0, l in 1.01f64..5.0,
    ) {
        let d = iterlemmas::extinction_distance(c, a, b, f0);
        let dc = iterlemmas::extinction_distance(l * c, a, b, f0);
        let df = iterlemmas::extinction_distance(c, a, b, l * f0);
        prop_assert!(dc > d && df > d);
        prop_assert!((dc / d - l.powf(1.0 / a)).abs() <= 1e-12 * dc / d);
        prop_assert!((df / d - l.powf((b - 1.0) / a)).abs() <= 1e-12 * df / d);
    }

    #[test]
    fn decay_function_rejects_growth(x in 0.0f64..1.0, f in 0.0f64..1.0, bump in 1e-9f64..1.0) {
        prop_assert!(DecayFunction::new(vec![x, x + 1.0], vec![f, f + bump]).is_err());
        prop_assert!(DecayFunction::new(vec![x, x + 1.0], vec![f + bump, f]).is_ok());
        prop_assert!(DecayFunction::new(vec![x, x], vec![f, f]).is_err());
    }
}

#[test]
fn f_kernel_is_dominated_by_its_constant() {
    for alpha in [-0.5, 0.5, 1.0] {
        let c = c_alpha(alpha).unwrap();
        let mut runner = proptest::test_runner::TestRunner::default();
        runner
            .run(&(0.0f64..5.0, 0.0f64..5.0), |(r, w)| {
                let f = f_kernel(r, w, alpha).unwrap();
                let bound = c * (w - r).abs().powf(alpha + 2.0);
                prop_assert!(f.abs() <= bound * (1.0 + 1e-8) + 1e-14 * r.max(w).powf(alpha + 2.0));
                Ok(())
            })
            .unwrap();
    }
}

fn short_spec(params: ModelParams, center: Vec<f64>) -> RunSpec {
    RunSpec {
        params,
        mobility: Mobility::Regularized,
        solver: SolverConfig { t_end: 2e-5, dt0: 2e-6, ..SolverConfig::default() },
        schedule: OutputSchedule::uniform(2e-5, 1e-5, 2e-5),
        center,
        support_threshold: 1e-7,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mass_is_conserved(g in grid_strategy(), seed in any::<u64>(), n in 0.5f64..2.0, s in 0.2f64..0.9) {
        let params = ModelParams { d: g.dim(), n, s, ..ModelParams::default() };
        let u0 = field(&g, seed).map_values(|v| 1.0 + 0.3 * v.tanh());
        let tr = solver::run(&u0, &short_spec(params, g.center())).unwrap();
        let (m0, m1) = (tr.records[0].mass, tr.records.last().unwrap().mass);
        prop_assert!(((m1 - m0) / m0).abs() <= 1e-12);
        prop_assert!(tr.records.windows(2).all(|w| w[1].energy_hs <= w[0].energy_hs * (1.0 + 1e-12)));
    }

    #[test]
    fn constants_are_steady(g in grid_strategy(), level in 0.01f64..10.0, n in 0.5f64..2.0) {
        let params = ModelParams { d: g.dim(), n, ..ModelParams::default() };
        let u0 = SpectralField::constant(&g, level);
        let tr = solver::run(&u0, &short_spec(params, g.center())).unwrap();
        let last = tr.final_snapshot().unwrap();
        prop_assert!(last.values.iter().all(|v| (v - level).abs() <= 1e-13 * level));
    }
}

#[test]
fn eigenmode_decays_at_its_eigenvalue() {
    // u_t = -div(grad (-Delta)^s u) acts on phi_k as multiplication by -lambda_k^{1+s}.
    let g = Grid::new(2, &[2.0, 1.0], &[32, 16]).unwrap();
    let s = 0.3;
    let params = ModelParams { d: 2, s, eps: 0.0, delta: 0.0, ..ModelParams::default() };
    let dt = 1e-4;
    let spec = RunSpec {
        params,
        mobility: Mobility::Constant(1.0),
        solver: SolverConfig {
            dt0: dt,
            dt_max: Some(dt),
            t_end: 1e-2,
            stabilizer: Some(1.0),
            adaptive: false,
            u_min: None,
            ..SolverConfig::default()
        },
        schedule: OutputSchedule::uniform(1e-2, 1e-2, 1e-2),
        center: g.center(),
        support_threshold: 1e-7,
    };
    let u0 = SpectralField::eigenmode(&g, &[3, 1]).unwrap();
    let tr = solver::run(&u0, &spec).unwrap();
    let lam = g.eigenvalue(&[3, 1]);
    let factor = (1.0 + dt * lam.powf(1.0 + s)).powi(-100);
    let end = SpectralField::from_values(&g, tr.final_snapshot().unwrap().values.clone()).unwrap();
    assert_relative_eq!(end.coeffs()[g.flatten(&[3, 1])], factor * u0.coeffs()[g.flatten(&[3, 1])], max_relative = 1e-10);
    let exact = (-lam.powf(1.0 + s) * 1e-2).exp();
    assert_relative_eq!(factor, exact, max_relative = 0.05);
}
