//! Iteration lemmas behind the support estimates, run on sampled functions:
//! Stampacchia-type extinction predictors and empirical
//! Gagliardo-Nirenberg constants.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{self, Grid, SpectralField};

/// Largest sample accepted by the pairwise hypothesis checks.
pub const MAX_SAMPLES: usize = 2048;

/// Relative slack allowed when comparing a sample against a bound.
pub const HYPOTHESIS_RTOL: f64 = 1e-10;

/// Nonnegative, nonincreasing function sampled on increasing nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFunction {
    x: Vec<f64>,
    f: Vec<f64>,
}

impl DecayFunction {
    pub fn new(x: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        if x.is_empty() || x.len() != f.len() {
            return Err(Error::arg(format!(
                "need matching non-empty nodes and values, got {} and {}",
                x.len(),
                f.len()
            )));
        }
        if x.len() > MAX_SAMPLES {
            return Err(Error::arg(format!("at most {MAX_SAMPLES} samples, got {}", x.len())));
        }
        if x.iter().any(|v| !v.is_finite()) || x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::arg("nodes must be finite and strictly increasing"));
        }
        if let Some(i) = f.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::arg(format!("value {} at x = {} is not a finite nonnegative number", f[i], x[i])));
        }
        if let Some(i) = f.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::arg(format!(
                "values increase between x = {} and x = {}",
                x[i],
                x[i + 1]
            )));
        }
        Ok(Self { x, f })
    }

    pub fn from_fn(x: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let v = x.iter().map(|&t| f(t)).collect();
        Self::new(x, v)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.f
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x0(&self) -> f64 {
        self.x[0]
    }

    pub fn f0(&self) -> f64 {
        self.f[0]
    }

    /// Checks `f(y) <= bound(x, f(x), y)` on every sampled pair `x < y`.
    fn check_pairs(&self, bound: impl Fn(f64, f64, f64) -> f64 + Sync) -> Result<()> {
        let m = self.len();
        let hit = (0..m).into_par_iter().find_map_first(|i| {
            (i + 1..m).find_map(|j| {
                let b = bound(self.x[i], self.f[i], self.x[j]);
                (self.f[j] > b * (1.0 + HYPOTHESIS_RTOL)).then_some((i, j, b))
            })
        });
        match hit {
            None => Ok(()),
            Some((i, j, b)) => Err(Error::HypothesisViolated {
                x: self.x[i],
                y: self.x[j],
                detail: format!("f(y) = {:e} exceeds the bound {:e}", self.f[j], b),
            }),
        }
    }
}

/// What the classical lemma predicts for `f` beyond its first node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Prediction {
    /// `f = 0` on `[x0 + d, inf)`.
    Extinction { x0: f64, f0: f64, d: f64 },
    /// `f(y) <= e^{1 - zeta (y - x0)} f(x0)`.
    Exponential { x0: f64, f0: f64, zeta: f64 },
    /// `f(y) <= constant * y^{-mu}`.
    Algebraic { mu: f64, constant: f64 },
}

impl Prediction {
    /// Upper envelope at `y >= x0`.
    pub fn envelope(&self, y: f64) -> f64 {
        match *self {
            Prediction::Extinction { x0, f0, d } => {
                if y >= x0 + d {
                    0.0
                } else {
                    f0
                }
            }
            Prediction::Exponential { x0, f0, zeta } => (1.0 - zeta * (y - x0)).exp() * f0,
            Prediction::Algebraic { mu, constant } => constant * y.powf(-mu),
        }
    }

    /// Extinction point, when there is one.
    pub fn extinction_point(&self) -> Option<f64> {
        match *self {
            Prediction::Extinction { x0, d, .. } => Some(x0 + d),
            _ => None,
        }
    }
}

/// `d` with `d^a = C f0^{b-1} 2^{ab/(b-1)}`, for `b > 1`.
pub fn extinction_distance(c: f64, a: f64, b: f64, f0: f64) -> f64 {
    (c * f0.powf(b - 1.0) * 2f64.powf(a * b / (b - 1.0))).powf(1.0 / a)
}

/// `(e C)^{-1/a}`.
pub fn exponential_rate(c: f64, a: f64) -> f64 {
    (std::f64::consts::E * c).powf(-1.0 / a)
}

/// Exponent and constant of the algebraic envelope, for `b < 1` and `x0 > 0`.
pub fn algebraic_envelope(c: f64, a: f64, b: f64, x0: f64, f0: f64) -> (f64, f64) {
    let mu = a / (1.0 - b);
    let k = 2f64.powf(mu / (1.0 - b)) * (c.powf(1.0 / (1.0 - b)) + (2.0 * x0).powf(mu) * f0);
    (mu, k)
}

/// Classical Stampacchia lemma on a sample.
///
/// The hypothesis `f(y) <= C (y - x)^{-a} f(x)^b` is checked on every pair
/// of nodes. The returned envelope is then compared with the sample; a
/// sample it fails to dominate cannot come from a function satisfying the
/// hypothesis between the nodes, and is rejected as well.
pub fn stampacchia_extinction(f: &DecayFunction, c: f64, a: f64, b: f64) -> Result<Prediction> {
    for (name, v) in [("C", c), ("a", a), ("b", b)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::arg(format!("{name} must be positive, got {v}")));
        }
    }
    let (x0, f0) = (f.x0(), f.f0());
    let pred = if b > 1.0 {
        Prediction::Extinction { x0, f0, d: extinction_distance(c, a, b, f0) }
    } else if b == 1.0 {
        Prediction::Exponential { x0, f0, zeta: exponential_rate(c, a) }
    } else {
        if !(x0 > 0.0) {
            return Err(Error::arg(format!("the algebraic case needs x0 > 0, got {x0}")));
        }
        let (mu, constant) = algebraic_envelope(c, a, b, x0, f0);
        Prediction::Algebraic { mu, constant }
    };
    f.check_pairs(|x, fx, y| c * (y - x).powf(-a) * fx.powf(b))?;
    dominates(f, |y| pred.envelope(y))?;
    Ok(pred)
}

fn dominates(f: &DecayFunction, env: impl Fn(f64) -> f64) -> Result<()> {
    for (&y, &v) in f.x.iter().zip(&f.f) {
        let e = env(y);
        if v > e * (1.0 + HYPOTHESIS_RTOL) {
            return Err(Error::HypothesisViolated {
                x: f.x0(),
                y,
                detail: format!(
                    "f(y) = {v:e} above the predicted envelope {e:e}; \
                     no function through these samples satisfies the hypothesis"
                ),
            });
        }
    }
    Ok(())
}

/// `R^{a/(b-1)} >= (2^{b(a+b-1)/(b-1)} c0)^{1/(b-1)} (f(0) + S R^{a/(b-1)})`.
pub fn inhomogeneous_gate(f0: f64, c0: f64, a: f64, b: f64, s_tilde: f64, r: f64) -> bool {
    let q = a / (b - 1.0);
    let lhs = r.powf(q);
    let k = (2f64.powf(b * (a + b - 1.0) / (b - 1.0)) * c0).powf(1.0 / (b - 1.0));
    lhs >= k * (f0 + s_tilde * lhs)
}

/// Inhomogeneous Stampacchia lemma on a sample spanning `[0, R]`.
///
/// Returns whether the gate holds, in which case `f(R) = 0` is predicted and
/// checked against the last sample.
pub fn stampacchia_inhomogeneous(
    f: &DecayFunction,
    c0: f64,
    a: f64,
    b: f64,
    s_tilde: f64,
) -> Result<bool> {
    if !(b > 1.0) {
        return Err(Error::arg(format!("b must exceed 1, got {b}")));
    }
    if !(c0 > 0.0 && a > 0.0 && s_tilde >= 0.0) {
        return Err(Error::arg("need c0 > 0, a > 0 and S >= 0"));
    }
    if f.x0() != 0.0 {
        return Err(Error::arg(format!("sample must start at 0, got {}", f.x0())));
    }
    let r = *f.x.last().expect("non-empty");
    let q = a / (b - 1.0);
    f.check_pairs(|eta, fe, xi| {
        c0 * (xi - eta).powf(-a) * (fe + s_tilde * (r - eta).powf(q)).powf(b)
    })?;
    let gate = inhomogeneous_gate(f.f0(), c0, a, b, s_tilde, r);
    let fr = *f.f.last().expect("non-empty");
    if gate && fr > 0.0 {
        return Err(Error::HypothesisViolated {
            x: 0.0,
            y: r,
            detail: format!("gate holds but f(R) = {fr:e}"),
        });
    }
    Ok(gate)
}

/// `f(0) / (1 - eps f(0)^{nu-1})`.
pub fn geometric_distance(f0: f64, eps: f64, nu: f64) -> f64 {
    f0 / (1.0 - eps * f0.powf(nu - 1.0))
}

/// Extinction under `f(s + delta) <= eps f(s)^nu`, for a sample starting at 0.
pub fn geometric_extinction(f: &DecayFunction, eps: f64, nu: f64) -> Result<f64> {
    if !(nu > 1.0) {
        return Err(Error::arg(format!("nu must exceed 1, got {nu}")));
    }
    if f.x0() != 0.0 {
        return Err(Error::arg(format!("sample must start at 0, got {}", f.x0())));
    }
    let f0 = f.f0();
    let upper = f0.powf(1.0 - nu);
    if !(eps > 0.0 && eps < upper) {
        return Err(Error::arg(format!("eps must lie in (0, {upper:e}), got {eps}")));
    }
    f.check_pairs(|_, fx, _| eps * fx.powf(nu))?;
    let d = geometric_distance(f0, eps, nu);
    dominates(f, |y| if y >= d { 0.0 } else { f0 })?;
    Ok(d)
}

/// `(1/b - 1/2) / (1/b + (s+1)/N - 1/2)`.
pub fn gn_theta(b: f64, s: f64, dim: usize) -> f64 {
    let ib = 1.0 / b;
    (ib - 0.5) / (ib + (s + 1.0) / dim as f64 - 0.5)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GnConstants {
    pub theta: f64,
    pub c1: f64,
    pub c2: f64,
    pub samples: usize,
    /// Samples violating the inequality at `(c1, c2)`, by direct scan.
    pub violations: usize,
}

/// Number of `C2` values on the frontier grid.
pub const GN_FRONTIER: usize = 401;

#[derive(Debug, Clone, Copy)]
struct GnSample {
    l2: f64,
    lb: f64,
    /// `|(-Delta)^{(s+1)/2} w|^theta |w|_b^{1-theta}`.
    mixed: f64,
}

/// Empirical constants for
/// `|w|_2 <= C1 |(-Delta)^{(s+1)/2} w|^theta |w|_b^{1-theta} + C2 |w|_b`
/// over `samples` random fields (the constant field included). `C2` runs over
/// a uniform grid up to the smallest value that works alone; for each the
/// least `C1` is taken and the pair with the smallest sum is returned.
pub fn gn_empirical_constant(
    s: f64,
    b: f64,
    grid: &Arc<Grid>,
    samples: usize,
    seed: u64,
) -> Result<GnConstants> {
    if !(b > 0.0 && b < 2.0) {
        return Err(Error::arg(format!("b must lie in (0,2), got {b}")));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::arg(format!("s must lie in (0,1), got {s}")));
    }
    if samples == 0 {
        return Err(Error::arg("need at least one sample"));
    }
    let theta = gn_theta(b, s, grid.dim());
    let fields = random_fields(grid, samples, seed);
    let data: Vec<GnSample> = fields
        .iter()
        .map(|w| {
            let lb = w.lp_norm(b);
            let top = spectral::seminorm(w, s + 1.0);
            GnSample { l2: w.l2_norm(), lb, mixed: top.powf(theta) * lb.powf(1.0 - theta) }
        })
        .collect();
    let c2_max = data.iter().map(|d| d.l2 / d.lb).fold(0.0, f64::max);
    // Samples with a vanishing mixed term bound C2 from below on their own.
    let c2_min = data.iter().filter(|d| d.mixed == 0.0).map(|d| d.l2 / d.lb).fold(0.0, f64::max);
    let mut best = (c2_max, 0.0);
    for k in 0..GN_FRONTIER {
        let c2 = c2_min + (c2_max - c2_min) * k as f64 / (GN_FRONTIER - 1) as f64;
        let c1 = data
            .iter()
            .filter(|d| d.mixed > 0.0)
            .map(|d| ((d.l2 - c2 * d.lb) / d.mixed).max(0.0))
            .fold(0.0, f64::max);
        if c1 + c2 < best.0 + best.1 {
            best = (c2, c1);
        }
    }
    let (c2, c1) = (best.0 * (1.0 + 1e-12), best.1 * (1.0 + 1e-12));
    let violations = data.iter().filter(|d| d.l2 > c1 * d.mixed + c2 * d.lb).count();
    Ok(GnConstants { theta, c1, c2, samples: data.len(), violations })
}

/// The constant field, then band-limited fields of random bandwidth,
/// smoothness and mean.
fn random_fields(grid: &Arc<Grid>, samples: usize, seed: u64) -> Vec<SpectralField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_band = grid.sizes().iter().copied().min().unwrap_or(1);
    let mut out = vec![SpectralField::constant(grid, 1.0)];
    while out.len() < samples {
        let band = rng.random_range(1..=max_band.max(1)).max(2);
        let decay = rng.random_range(0.5..4.0);
        let mut w = SpectralField::random_band_limited(grid, band, decay, &mut rng);
        if rng.random_bool(0.5) {
            let mut c = w.coeffs().to_vec();
            c[0] = 0.0;
            w = SpectralField::from_coeffs(grid, c).expect("length matches grid");
        }
        if w.l2_norm() > 0.0 {
            out.push(w);
        }
    }
    out
}

/// Brute-force counterparts of the closed-form predictors, built by
/// iterating the hypotheses with equality.
pub mod oracle {
    /// Largest sample on `x` with value `f0` at `x[0]` such that
    /// `f(x_j) <= bound(x_i, f(x_i), x_j)` for all `i < j`, nonincreasing.
    pub fn maximal_sample(x: &[f64], f0: f64, bound: impl Fn(f64, f64, f64) -> f64) -> Vec<f64> {
        let mut f = Vec::with_capacity(x.len());
        for j in 0..x.len() {
            if j == 0 {
                f.push(f0);
                continue;
            }
            let mut v = f[j - 1];
            for i in 0..j {
                v = v.min(bound(x[i], f[i], x[j]));
            }
            f.push(v.max(0.0));
        }
        f
    }

    /// `ln f` along `x_k = x0 + d (1 - 2^-k)` with
    /// `f(x_{k+1}) = C (x_{k+1} - x_k)^{-a} f(x_k)^b`.
    pub fn dyadic_log_sequence(c: f64, a: f64, b: f64, f0: f64, d: f64, steps: usize) -> Vec<f64> {
        let mut l = vec![f0.ln()];
        for k in 0..steps {
            let gap = d * 0.5f64.powi(k as i32 + 1);
            let prev = l[k];
            l.push(c.ln() - a * gap.ln() + b * prev);
        }
        l
    }

    /// Smallest `d` for which the dyadic sequence stays nonincreasing over
    /// `steps` steps, by bisection in `ln d`.
    pub fn extinction_distance_by_iteration(c: f64, a: f64, b: f64, f0: f64, steps: usize) -> f64 {
        let ok = |d: f64| {
            dyadic_log_sequence(c, a, b, f0, d, steps).windows(2).all(|w| w[1] <= w[0])
        };
        let (mut lo, mut hi) = (1e-300f64.ln(), 1e300f64.ln());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ok(mid.exp()) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi.exp()
    }

    /// Whether the saturated inhomogeneous recursion on `x_k = R (1 - 2^-k)`
    /// drives `f` to zero. With `Z_k = f(x_k) / (R 2^-k)^{a/(b-1)}` it reads
    /// `Z_{k+1} = c0 2^{a + a/(b-1)} (Z_k + S)^b`; `f(x_k) -> 0` iff `Z`
    /// stays bounded.
    pub fn inhomogeneous_vanishes(f0: f64, c0: f64, a: f64, b: f64, s_tilde: f64, r: f64) -> bool {
        let q = a / (b - 1.0);
        let k = c0 * 2f64.powf(a + q);
        let mut z = f0 / r.powf(q);
        for _ in 0..100_000 {
            z = k * (z + s_tilde).powf(b);
            if !(z <= 1e200) {
                return false;
            }
        }
        true
    }

    /// `f_{k+1} = eps f_k^nu` on `x_k = k h`, as `ln f`.
    pub fn geometric_log_sequence(f0: f64, eps: f64, nu: f64, steps: usize) -> Vec<f64> {
        let mut l = vec![f0.ln()];
        for k in 0..steps {
            let prev = l[k];
            l.push(eps.ln() + nu * prev);
        }
        l
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nodes(a: f64, b: f64, m: usize) -> Vec<f64> {
        (0..m).map(|i| a + (b - a) * i as f64 / (m - 1) as f64).collect()
    }

    #[test]
    fn decay_function_validation() {
        assert!(DecayFunction::new(vec![0.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(DecayFunction::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(DecayFunction::new(vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
        assert!(DecayFunction::new(vec![], vec![]).is_err());
        assert!(DecayFunction::new(nodes(0.0, 1.0, MAX_SAMPLES + 1), vec![0.0; MAX_SAMPLES + 1])
            .is_err());
        assert!(DecayFunction::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_ok());
    }

    #[test]
    fn case_one_distance() {
        assert!((extinction_distance(1.0, 1.0, 2.0, 1.0) - 4.0).abs() < 1e-14);
        let f = DecayFunction::new(vec![0.0, 1.0, 4.0, 5.0], vec![1.0, 0.5, 0.0, 0.0]).unwrap();
        let p = stampacchia_extinction(&f, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(p.extinction_point(), Some(4.0));
    }

    #[test]
    fn case_two_rate() {
        assert!((exponential_rate(1.0, 1.0) - (-1f64).exp()).abs() < 1e-15);
        // Equality along steps of length (eC)^{1/a}: f drops by e per step.
        let (c, a) = (0.7, 1.2);
        let h = (std::f64::consts::E * c).powf(1.0 / a);
        let x: Vec<f64> = (0..30).map(|k| 0.5 + k as f64 * h).collect();
        let f = DecayFunction::from_fn(x, |y| 2.0 * (-(y - 0.5) / h).exp()).unwrap();
        let p = stampacchia_extinction(&f, c, a, 1.0).unwrap();
        for (&y, &v) in f.nodes().iter().zip(f.values()) {
            assert!((p.envelope(y) / v - std::f64::consts::E).abs() < 1e-9);
        }
    }

    #[test]
    fn violated_hypothesis_names_a_pair() {
        let f = DecayFunction::new(vec![0.0, 10.0], vec![1.0, 1.0]).unwrap();
        match stampacchia_extinction(&f, 1.0, 1.0, 2.0) {
            Err(Error::HypothesisViolated { x, y, .. }) => assert_eq!((x, y), (0.0, 10.0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nonvanishing_sample_past_extinction_is_rejected() {
        // Pairwise hypothesis holds, yet the lemma forces zero beyond x0 + d = 4.
        let f = DecayFunction::new(vec![0.0, 2.0, 8.0], vec![1.0, 0.3, 0.01]).unwrap();
        assert!(matches!(
            stampacchia_extinction(&f, 1.0, 1.0, 2.0),
            Err(Error::HypothesisViolated { y, .. }) if y == 8.0
        ));
    }

    #[test]
    fn algebraic_case_requires_positive_origin() {
        let f = DecayFunction::new(vec![0.0, 1.0], vec![1.0, 0.5]).unwrap();
        assert!(stampacchia_extinction(&f, 1.0, 1.0, 0.5).is_err());
        let g = DecayFunction::from_fn(nodes(1.0, 50.0, 200), |y| y.powi(-2)).unwrap();
        let p = stampacchia_extinction(&g, 4.0, 1.0, 0.5).unwrap();
        assert!(matches!(p, Prediction::Algebraic { mu, .. } if (mu - 2.0).abs() < 1e-15));
    }

    #[test]
    fn inhomogeneous_reduces_to_classical_gate() {
        // S = 0: R^a >= 2^{b(a+b-1)/(b-1)} c0 f0^{b-1}.
        let (c0, a, b, f0): (f64, f64, f64, f64) = (0.3, 1.5, 2.5, 0.7);
        let r_star = (2f64.powf(b * (a + b - 1.0) / (b - 1.0)) * c0).powf(1.0 / a)
            * f0.powf((b - 1.0) / a);
        assert!(inhomogeneous_gate(f0, c0, a, b, 0.0, r_star * 1.001));
        assert!(!inhomogeneous_gate(f0, c0, a, b, 0.0, r_star * 0.999));
    }

    #[test]
    fn inhomogeneous_gate_false_makes_no_claim() {
        let f = DecayFunction::new(vec![0.0, 0.5, 1.0], vec![1.0, 0.9, 0.8]).unwrap();
        assert!(!stampacchia_inhomogeneous(&f, 100.0, 1.0, 2.0, 0.0).unwrap());
        assert!(stampacchia_inhomogeneous(&f, 1.0, 1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn geometric_example_and_limit() {
        assert!((geometric_distance(1.0, 0.5, 2.0) - 2.0).abs() < 1e-15);
        assert!((geometric_distance(3.0, 1e-12, 2.0) - 3.0).abs() < 1e-10);
        let f = DecayFunction::new(vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 0.5, 0.0, 0.0]).unwrap();
        assert!((geometric_extinction(&f, 0.5, 2.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(geometric_extinction(&f, 1.5, 2.0).is_err());
        assert!(geometric_extinction(&f, 0.5, 1.0).is_err());
    }

    #[test]
    fn theta_example() {
        assert!((gn_theta(1.0, 0.5, 1) - 0.25).abs() < 1e-15);
        assert_eq!(gn_theta(2.0, 0.5, 1), 0.0);
    }

    #[test]
    fn gn_constants_cover_constant_field() {
        let g = Grid::line(2.0, 64).unwrap();
        let b = 1.0;
        let k = gn_empirical_constant(0.5, b, &g, 200, 7).unwrap();
        assert_eq!(k.violations, 0);
        assert!(k.c2 >= 2f64.powf(0.5 - 1.0 / b) * (1.0 - 1e-12), "{k:?}");
        assert!(k.c1 > 0.0 && k.c1.is_finite());
    }
}
