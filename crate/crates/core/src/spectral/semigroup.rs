//! Fractional powers through the heat semigroup,
//! `lambda^mu = (1 / Gamma(-mu)) int_0^inf g(t lambda) t^{-1-mu} dt`, with
//! `g(x) = e^{-x} - 1` for `mu` in (0,1) and `g(x) = e^{-x} - 1 + x` for
//! `mu` in (1,2).
//!
//! The integral is taken in `tau = ln t` with the trapezoid rule on
//! `[ln t_min, ln t_max]`. Above `t_max` the exponential is dropped and the
//! remaining power integrals are added in closed form. Near `t_max` the
//! integrand is a pure power of `t`, whose trapezoid error is summed exactly
//! from the Euler-Maclaurin series and removed. Below `t_min` the
//! integrand is `O(lambda t^{1-mu})` (resp. `O(lambda^2 t^{2-mu})`) and
//! `t_min` is picked so that the omitted piece is below `tail_tol` relative
//! to `lambda_max^mu`.

use rayon::prelude::*;

use super::field::SpectralField;
use super::gamma::gamma_signed;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Trapezoid intervals in `ln t`; even and at least 16.
    pub panels: usize,
    /// Relative size of the neglected pieces at both ends.
    pub tail_tol: f64,
    /// Reject when the step-doubling error estimate exceeds this.
    pub reject_above: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { panels: 1024, tail_tol: 1e-14, reject_above: 1e-6 }
    }
}

impl QuadratureSpec {
    pub fn with_panels(panels: usize) -> Self {
        Self { panels, ..Self::default() }
    }

    /// Same spec with twice the panels.
    pub fn refined(&self) -> Self {
        Self { panels: 2 * self.panels, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.panels < 16 || !self.panels.is_multiple_of(2) {
            return Err(Error::arg(format!(
                "quadrature needs an even panel count >= 16, got {}",
                self.panels
            )));
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1e-2) {
            return Err(Error::arg(format!("tail tolerance {} out of (0, 1e-2)", self.tail_tol)));
        }
        if !(self.reject_above > 0.0) {
            return Err(Error::arg("rejection threshold must be positive"));
        }
        Ok(())
    }
}

/// Nodes and weights for `int_0^inf f(t) t^{-1-mu} dt`, plus the weights of
/// the rule with doubled step (on the even nodes) for error estimation.
#[derive(Debug, Clone)]
pub struct SemigroupRule {
    mu: f64,
    gamma: f64,
    t: Vec<f64>,
    w: Vec<f64>,
    w_coarse: Vec<f64>,
    t_min: f64,
    t_max: f64,
    step: f64,
}

impl SemigroupRule {
    /// Rule resolving eigenvalues in `[lambda_min, lambda_max]`.
    pub fn new(mu: f64, lambda_min: f64, lambda_max: f64, spec: &QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        if !(mu > 0.0 && mu < 2.0 && mu != 1.0) {
            return Err(Error::arg(format!("order must lie in (0,1) or (1,2), got {mu}")));
        }
        if !(lambda_min > 0.0 && lambda_max >= lambda_min && lambda_max.is_finite()) {
            return Err(Error::arg(format!(
                "eigenvalue range [{lambda_min}, {lambda_max}] is not positive"
            )));
        }
        let gamma = gamma_signed(-mu);
        // Leading small-t term: lambda t^{1-mu} / (1-mu) or lambda^2 t^{2-mu} / (2 (2-mu)).
        let t_min = if mu < 1.0 {
            (spec.tail_tol * (1.0 - mu) * gamma.abs()).powf(1.0 / (1.0 - mu)) / lambda_max
        } else {
            (2.0 * spec.tail_tol * (2.0 - mu) * gamma.abs()).powf(1.0 / (2.0 - mu)) / lambda_max
        };
        let t_max = (1.0 / spec.tail_tol).ln() / lambda_min;
        let (a, b) = (t_min.ln(), t_max.ln());
        let m = spec.panels;
        let h = (b - a) / m as f64;
        let mut t = Vec::with_capacity(m + 1);
        let mut w = Vec::with_capacity(m + 1);
        let mut w_coarse = Vec::with_capacity(m + 1);
        for j in 0..=m {
            let tau = a + j as f64 * h;
            let tj = tau.exp();
            let end = j == 0 || j == m;
            let scale = (-mu * tau).exp();
            t.push(tj);
            w.push(if end { 0.5 } else { 1.0 } * h * scale);
            w_coarse.push(if j % 2 == 1 {
                0.0
            } else if end {
                h * scale
            } else {
                2.0 * h * scale
            });
        }
        Ok(Self { mu, gamma, t, w, w_coarse, t_min, t_max, step: h })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `Gamma(-mu)`, signed.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn nodes(&self) -> &[f64] {
        &self.t
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// Integrand kernel `g(x)` for this order.
    pub fn kernel(&self, x: f64) -> f64 {
        if self.mu < 1.0 {
            (-x).exp_m1()
        } else if x < 1e-3 {
            x * x * (0.5 - x * (1.0 / 6.0 - x / 24.0))
        } else {
            (-x).exp_m1() + x
        }
    }

    /// Closed-form integral of the non-exponential part of `g` above `t_max`,
    /// minus the trapezoid error that the same part incurs at the right end
    /// of a rule with step `h` in `ln t`.
    pub fn tail(&self, lambda: f64, h: f64) -> f64 {
        if lambda == 0.0 {
            return 0.0;
        }
        let mu = self.mu;
        // Right-end Euler-Maclaurin sum for t^{-a}: t^{-a} (x/2 coth(x/2) - 1) / a, x = a h.
        let em = |a: f64| {
            let x = a * h;
            0.5 * x / (0.5 * x).tanh() - 1.0
        };
        let tm = self.t_max;
        let mut out = -tm.powf(-mu) / mu * (1.0 + em(mu));
        if mu > 1.0 {
            out += lambda * tm.powf(1.0 - mu) / (mu - 1.0) * (1.0 + em(mu - 1.0));
        }
        out
    }

    /// `int_0^inf g(t lambda) t^{-1-mu} dt` on the fine and on the coarse rule.
    pub fn integral(&self, lambda: f64) -> (f64, f64) {
        if lambda == 0.0 {
            return (0.0, 0.0);
        }
        let mut fine = 0.0;
        let mut coarse = 0.0;
        for ((&t, &w), &wc) in self.t.iter().zip(&self.w).zip(&self.w_coarse) {
            let g = self.kernel(lambda * t);
            fine += w * g;
            coarse += wc * g;
        }
        (fine + self.tail(lambda, self.step), coarse + self.tail(lambda, 2.0 * self.step))
    }

    /// Quadrature value of `lambda^mu`.
    pub fn power(&self, lambda: f64) -> f64 {
        self.integral(lambda).0 / self.gamma
    }
}

/// `eta^mu` through the semigroup integral, checked against its own
/// step-doubling estimate.
pub fn semigroup_power(eta: f64, mu: f64, spec: &QuadratureSpec) -> Result<f64> {
    if eta == 0.0 {
        return Ok(0.0);
    }
    let rule = SemigroupRule::new(mu, eta, eta, spec)?;
    let (fine, coarse) = rule.integral(eta);
    let estimate = ((fine - coarse) / fine).abs();
    if estimate > spec.reject_above {
        return Err(Error::QuadratureTooCoarse { estimate, tolerance: spec.reject_above });
    }
    Ok(fine / rule.gamma())
}

/// `(-Delta)^s u` from the semigroup integral; returns the field and the
/// relative L2 step-doubling estimate.
pub fn frac_laplacian_semigroup_with_estimate(
    u: &SpectralField,
    s: f64,
    quad: &QuadratureSpec,
) -> Result<(SpectralField, f64)> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::arg(format!("s must lie in (0,1), got {s}")));
    }
    let grid = u.grid();
    let rule = SemigroupRule::new(s, grid.lambda_min(), grid.lambda_max(), quad)?;
    let pairs: Vec<(f64, f64)> =
        grid.eigenvalues().par_iter().map(|&lam| rule.integral(lam)).collect();
    let g = rule.gamma();
    let mut out = Vec::with_capacity(pairs.len());
    let (mut diff2, mut norm2) = (0.0, 0.0);
    for (&(fine, coarse), &c) in pairs.iter().zip(u.coeffs()) {
        let v = fine * c / g;
        out.push(v);
        norm2 += v * v;
        diff2 += ((fine - coarse) * c / g).powi(2);
    }
    let estimate = if norm2 > 0.0 { (diff2 / norm2).sqrt() } else { diff2.sqrt() };
    if estimate > quad.reject_above {
        return Err(Error::QuadratureTooCoarse { estimate, tolerance: quad.reject_above });
    }
    Ok((SpectralField::from_coeffs(grid, out)?, estimate))
}

/// `(-Delta)^s u` from the semigroup integral.
pub fn frac_laplacian_semigroup(
    u: &SpectralField,
    s: f64,
    quad: &QuadratureSpec,
) -> Result<SpectralField> {
    frac_laplacian_semigroup_with_estimate(u, s, quad).map(|(f, _)| f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{frac_laplacian, Grid};
    use std::f64::consts::PI;

    #[test]
    fn scalar_identity_first_eigenvalue_half_power() {
        let eta = PI * PI;
        let v = semigroup_power(eta, 0.5, &QuadratureSpec::default()).unwrap();
        assert!((v - PI).abs() < 1e-10 * PI, "{v}");
    }

    #[test]
    fn scalar_identity_both_branches() {
        for &mu in &[0.25, 0.5, 0.75, 1.25, 1.5, 1.75] {
            for &eta in &[1.0, 25.0, 289.0, 1e4] {
                let v = semigroup_power(eta, mu, &QuadratureSpec::default()).unwrap();
                let exact = f64::powf(eta, mu);
                assert!((v - exact).abs() < 1e-9 * exact, "mu {mu} eta {eta}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn coarse_rule_is_flagged() {
        let spec = QuadratureSpec { panels: 16, ..QuadratureSpec::default() };
        assert!(matches!(
            semigroup_power(3.0, 0.5, &spec),
            Err(Error::QuadratureTooCoarse { .. })
        ));
    }

    #[test]
    fn bad_arguments_are_rejected() {
        let spec = QuadratureSpec::default();
        assert!(SemigroupRule::new(1.0, 1.0, 2.0, &spec).is_err());
        assert!(QuadratureSpec::with_panels(8).validate().is_err());
        let g = Grid::line(1.0, 16).unwrap();
        let u = SpectralField::constant(&g, 1.0);
        assert!(frac_laplacian_semigroup(&u, 1.2, &spec).is_err());
    }

    #[test]
    fn first_mode_matches_multiplier() {
        let g = Grid::line(1.0, 32).unwrap();
        let u = SpectralField::eigenmode(&g, &[1]).unwrap();
        let a = frac_laplacian_semigroup(&u, 0.5, &QuadratureSpec::default()).unwrap();
        let b = frac_laplacian(&u, 0.5).unwrap();
        assert!(a.relative_l2_distance(&b) < 1e-10);
        let c = SpectralField::constant(&g, 3.0);
        let z = frac_laplacian_semigroup(&c, 0.5, &QuadratureSpec::default()).unwrap();
        assert!(z.l2_norm() < 1e-13);
    }
}
