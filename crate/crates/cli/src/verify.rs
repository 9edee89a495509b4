//! Self-tests behind the `verify-*` subcommands.

use fracthin::chainrule::{self, Phi};
use fracthin::iterlemmas::{self, oracle};
use fracthin::spectral::{self, frac_laplacian_semigroup};
use fracthin::{Grid, QuadratureSpec, Result, SpectralField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value <= tolerance`.
    pub fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, pass: value <= tolerance }
    }

    /// Passes when `value >= tolerance`.
    pub fn above(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, pass: value >= tolerance }
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

fn nodal_inner(a: &SpectralField, b: &SpectralField) -> f64 {
    a.grid().cell_volume() * a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum::<f64>()
}

pub fn spectral_checks(n: usize, seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Grid::line(1.0, n)?;
    let mut out = Vec::new();

    let mut eig: f64 = 0.0;
    for k in [1, 3, n / 2] {
        let phi = SpectralField::eigenmode(&g, &[k])?;
        let lam = g.eigenvalue(&[k]);
        let l = spectral::frac_laplacian(&phi, 0.5)?;
        let expect = phi.map_values(|v| lam.sqrt() * v);
        eig = eig.max(l.relative_l2_distance(&expect));
    }
    out.push(Check::below("eigen-action", eig, 1e-12));

    let u = SpectralField::random_band_limited(&g, n / 4, 2.0, &mut rng);
    let v = SpectralField::random_band_limited(&g, n / 4, 2.0, &mut rng);
    out.push(Check::below("parseval", (u.l2_norm() - u.l2_norm_nodal()).abs() / u.l2_norm(), 1e-12));

    let ab = spectral::frac_laplacian(&spectral::frac_laplacian(&u, 0.3)?, 0.45)?;
    let direct = spectral::frac_laplacian(&u, 0.75)?;
    out.push(Check::below("composition", ab.relative_l2_distance(&direct), 1e-11));

    let lu = spectral::frac_laplacian(&u, 0.5)?;
    let lv = spectral::frac_laplacian(&v, 0.5)?;
    let (x, y) = (nodal_inner(&lu, &v), nodal_inner(&u, &lv));
    out.push(Check::below("integration-by-parts", (x - y).abs() / x.abs().max(y.abs()), 1e-10));

    for s in [0.25, 0.5, 0.75] {
        let quad = QuadratureSpec::default().refined();
        let a = frac_laplacian_semigroup(&u, s, &quad)?;
        let b = spectral::frac_laplacian(&u, s)?;
        out.push(Check::below(format!("semigroup-oracle-s{s}"), a.relative_l2_distance(&b), 1e-6));
    }
    Ok(out)
}

pub fn chainrule_checks() -> Result<Vec<Check>> {
    let quad = QuadratureSpec::default();
    let bump = |x: f64| 1.0 + (-(x - 0.45f64).powi(2) / 0.02).exp();
    let sizes = [32, 64, 128, 256];
    let mut out = Vec::new();
    for (mu, phi, tag) in [(0.5, Phi::Power(2.0), "i"), (1.5, Phi::Power(1.5), "j")] {
        let r = chainrule::convergence_study(1.0, &sizes, bump, &phi, mu, &quad)?;
        out.push(Check::above(format!("order-{tag}-mu{mu}"), r.order, 1.0));
        out.push(Check::below(format!("residual-{tag}-mu{mu}-n256"), *r.residuals.last().unwrap(), 1e-3));
    }
    let coarse = Grid::line(1.0, 64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut violations = 0;
    for _ in 0..100 {
        let (a, c, w) = (rng.random_range(0.2..3.0), rng.random_range(0.2..0.8), rng.random_range(0.005..0.05));
        let u = SpectralField::from_fn(&coarse, |x| 0.5 + a * (-(x[0] - c).powi(2) / w).exp());
        violations += chainrule::verify_chain_rule(&u, &Phi::Power(2.0), 0.5, &quad)?.sign_violations;
    }
    out.push(Check::below("convex-positivity-violations", violations as f64, 0.0));
    let g = Grid::line(1.0, 256)?;
    let v = SpectralField::from_fn(&g, |x| bump(x[0]));
    let sq = chainrule::verify_square_identities(&v, 1.4, &quad)?;
    out.push(Check::below("square-pointwise-mu1.4", sq.pointwise.relative, 1e-3));
    out.push(Check::below("integral-lap-v2", sq.integral_of_lap_v2.abs(), 1e-10));
    Ok(out)
}

pub fn lemma_checks(draws: usize, seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![
        Check::below("case-i-example-d4", (iterlemmas::extinction_distance(1.0, 1.0, 2.0, 1.0) - 4.0).abs(), 1e-14),
        Check::below("case-ii-zeta", (iterlemmas::exponential_rate(1.0, 1.0) - (-1f64).exp()).abs(), 1e-15),
        Check::below("geometric-example-d2", (iterlemmas::geometric_distance(1.0, 0.5, 2.0) - 2.0).abs(), 1e-15),
        Check::below("gn-theta-example", (iterlemmas::gn_theta(1.0, 0.5, 1) - 0.25).abs(), 1e-15),
    ];
    let mut worst: f64 = 0.0;
    let mut gate_misses = 0usize;
    for _ in 0..draws {
        let c = rng.random_range(0.1..10.0);
        let a = rng.random_range(0.5..3.0);
        let b = rng.random_range(1.2..3.0);
        let f0 = rng.random_range(0.1..10.0);
        let closed = iterlemmas::extinction_distance(c, a, b, f0);
        let brute = oracle::extinction_distance_by_iteration(c, a, b, f0, 300);
        worst = worst.max((closed / brute - 1.0).abs());
        let s = rng.random_range(0.0..1.0);
        let r = closed * rng.random_range(0.5..4.0);
        if iterlemmas::inhomogeneous_gate(f0, c, a, b, s, r)
            && !oracle::inhomogeneous_vanishes(f0, c, a, b, s, r)
        {
            gate_misses += 1;
        }
    }
    out.push(Check::below("case-i-vs-iteration", worst, 1e-9));
    out.push(Check::below("inhomogeneous-gate-vs-iteration", gate_misses as f64, 0.0));
    let g = Grid::line(1.0, 64)?;
    let gn = iterlemmas::gn_empirical_constant(0.5, 1.0, &g, 1000, seed)?;
    out.push(Check::below("gn-violations", gn.violations as f64, 0.0));
    Ok(out)
}
