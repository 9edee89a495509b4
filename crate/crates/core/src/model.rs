//! Constitutive functions of the regularized thin film model.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the regularized problem
/// `u_t = div(m_{eps,delta,gamma}(u) grad (-Delta)^s u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub n: f64,
    pub s: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eps: f64,
    pub delta: f64,
    pub gamma: f64,
}

/// An admissible-range predicate that failed for a parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RangeCheck {
    /// `n` in `(2(s+1)/(4(s+1)-d), (d+2(1-s))/(d-2s)_+ + 1/2)`.
    ExistenceMobilityExponent,
    /// `n` in `(2(s+1)/(4(s+1)-d), 2)`.
    PropagationMobilityExponent,
    /// `alpha` in `(-1 + d/(4(s+1)-d), 1]`.
    EntropyIndex,
    /// `s` in `((d-2)_+/2, 1)`.
    FractionalOrder,
}

impl RangeCheck {
    pub fn name(&self) -> &'static str {
        match self {
            RangeCheck::ExistenceMobilityExponent => "existence-range-n",
            RangeCheck::PropagationMobilityExponent => "propagation-range-n",
            RangeCheck::EntropyIndex => "entropy-range-alpha",
            RangeCheck::FractionalOrder => "range-s",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Warning {
    pub check: RangeCheck,
    pub message: String,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.check.name(), self.message)
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { d: 1, n: 1.0, s: 0.5, alpha: 0.0, beta: 3.0, eps: 1e-4, delta: 1e-4, gamma: 0.0 }
    }
}

impl ModelParams {
    /// Checks the hard constraints; admissible ranges are reported by
    /// [`ModelParams::warnings`] instead.
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.d) {
            return Err(Error::arg(format!("dimension {} unsupported", self.d)));
        }
        if !(self.n.is_finite() && self.n >= 0.0) {
            return Err(Error::arg(format!("mobility exponent n = {} must be >= 0", self.n)));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::arg(format!("s = {} must lie in (0,1)", self.s)));
        }
        if !(self.alpha > -1.0 && self.alpha.is_finite()) {
            return Err(Error::arg(format!("alpha = {} must exceed -1", self.alpha)));
        }
        let lower = self.n.max(self.alpha + 2.0);
        if !(self.beta > lower && self.beta.is_finite()) {
            return Err(Error::arg(format!(
                "beta = {} must exceed max(n, alpha + 2) = {lower}",
                self.beta
            )));
        }
        for (name, v) in [("eps", self.eps), ("delta", self.delta), ("gamma", self.gamma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::arg(format!("{name} = {v} must be >= 0")));
            }
        }
        Ok(())
    }

    /// Entropy anchor: 0 if `alpha > n - 1`, else 1.
    pub fn anchor(&self) -> f64 {
        if self.alpha > self.n - 1.0 {
            0.0
        } else {
            1.0
        }
    }

    /// Dual exponent `4d / (2d - n (d - 2s)_+)`.
    pub fn q(&self) -> f64 {
        let d = self.d as f64;
        4.0 * d / (2.0 * d - self.n * (d - 2.0 * self.s).max(0.0))
    }

    fn lower_n(&self) -> f64 {
        let d = self.d as f64;
        2.0 * (self.s + 1.0) / (4.0 * (self.s + 1.0) - d)
    }

    /// Upper end of the existence range for `n` (infinite when `d <= 2s`).
    pub fn existence_upper_n(&self) -> f64 {
        let d = self.d as f64;
        let gap = (d - 2.0 * self.s).max(0.0);
        if gap == 0.0 {
            f64::INFINITY
        } else {
            (d + 2.0 * (1.0 - self.s)) / gap + 0.5
        }
    }

    pub fn in_existence_range(&self) -> bool {
        self.n > self.lower_n() && self.n < self.existence_upper_n()
    }

    pub fn in_propagation_range(&self) -> bool {
        self.n > self.lower_n() && self.n < 2.0
    }

    pub fn alpha_in_range(&self) -> bool {
        let d = self.d as f64;
        self.alpha > -1.0 + d / (4.0 * (self.s + 1.0) - d) && self.alpha <= 1.0
    }

    pub fn s_in_range(&self) -> bool {
        let d = self.d as f64;
        self.s > (d - 2.0).max(0.0) / 2.0 && self.s < 1.0
    }

    /// Every failed range predicate, each naming what was checked.
    pub fn warnings(&self) -> Vec<Warning> {
        let d = self.d as f64;
        let mut out = Vec::new();
        if !self.in_existence_range() {
            out.push(Warning {
                check: RangeCheck::ExistenceMobilityExponent,
                message: format!(
                    "n = {} outside the existence range ({:.6}, {:.6})",
                    self.n,
                    self.lower_n(),
                    self.existence_upper_n()
                ),
            });
        }
        if !self.in_propagation_range() {
            out.push(Warning {
                check: RangeCheck::PropagationMobilityExponent,
                message: format!(
                    "n = {} outside the finite-propagation range ({:.6}, 2)",
                    self.n,
                    self.lower_n()
                ),
            });
        }
        if !self.alpha_in_range() {
            out.push(Warning {
                check: RangeCheck::EntropyIndex,
                message: format!(
                    "alpha = {} outside the entropy range ({:.6}, 1]",
                    self.alpha,
                    -1.0 + d / (4.0 * (self.s + 1.0) - d)
                ),
            });
        }
        if !self.s_in_range() {
            out.push(Warning {
                check: RangeCheck::FractionalOrder,
                message: format!("s = {} outside ({}, 1)", self.s, (d - 2.0).max(0.0) / 2.0),
            });
        }
        out
    }

    /// Support growth exponent `1 / (n d + 2(s+1))`.
    pub fn propagation_exponent(&self) -> f64 {
        1.0 / (self.n * self.d as f64 + 2.0 * (self.s + 1.0))
    }

    /// Critical edge exponent `2(s+1)/n` for the waiting-time condition.
    pub fn critical_edge_exponent(&self) -> f64 {
        2.0 * (self.s + 1.0) / self.n
    }

    /// Lift exponent `theta_1 = 1 / (2 (beta - alpha - 2))`.
    pub fn lift_theta1(&self) -> f64 {
        0.5 / (self.beta - self.alpha - 2.0)
    }

    /// Positivity lift `eps^theta_1 + delta` added to the initial datum.
    pub fn lift(&self) -> f64 {
        let e = if self.eps > 0.0 { self.eps.powf(self.lift_theta1()) } else { 0.0 };
        e + self.delta
    }

    /// Default support threshold `max(1e-7, 10 (lift + gamma))`.
    pub fn support_threshold(&self) -> f64 {
        (10.0 * (self.lift() + self.gamma)).max(1e-7)
    }

    /// `m_{eps,delta}(z)` without the `gamma` floor, in the overflow-free form
    /// `z^n / (1 + eps z^{n-beta} + delta z^n)`.
    pub fn mobility_ed(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        let zn = z.powf(self.n);
        zn / (1.0 + self.eps_term(z) + self.delta * zn)
    }

    fn eps_term(&self, z: f64) -> f64 {
        if self.eps > 0.0 {
            self.eps * z.powf(self.n - self.beta)
        } else {
            0.0
        }
    }

    /// `m_{eps,delta,gamma}(z)`; equals `gamma` for `z <= 0`.
    pub fn mobility(&self, z: f64) -> f64 {
        self.mobility_ed(z) + self.gamma
    }

    /// Derivative of the smooth branch; 0 for `z <= 0`.
    pub fn mobility_deriv(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        let e = self.eps_term(z);
        let zn = z.powf(self.n);
        let denom = 1.0 + e + self.delta * zn;
        let r = 1.0 / denom;
        let er = if e.is_finite() { e * r } else { 1.0 };
        z.powf(self.n - 1.0) * (self.n * r + self.beta * er) * r
    }

    /// `G_alpha(z)`; `+inf` where the closed form diverges, NaN for `z < 0`.
    pub fn entropy_alpha(&self, z: f64) -> f64 {
        if z < 0.0 {
            return f64::NAN;
        }
        let a = self.anchor();
        let e = self.alpha - self.n + 2.0;
        if (e - 1.0).abs() < 1e-14 {
            // alpha = n - 1, A = 1
            if z == 0.0 {
                return a;
            }
            z * z.ln() - z * (a.ln() + 1.0) + a
        } else if e.abs() < 1e-14 {
            // alpha = n - 2, A = 1
            if z == 0.0 {
                return f64::INFINITY;
            }
            (a / z).ln() + z / a - 1.0
        } else {
            if z == 0.0 && e < 0.0 {
                return f64::INFINITY;
            }
            let head = (z.powf(e) - a.powf(e)) / ((e - 1.0) * e);
            if a == 0.0 {
                head
            } else {
                head - a.powf(e - 1.0) * (z - a) / (e - 1.0)
            }
        }
    }

    /// `G_alpha'(z)` for `z > 0`.
    pub fn entropy_alpha_deriv(&self, z: f64) -> f64 {
        let a = self.anchor();
        let e = self.alpha - self.n + 2.0;
        if (e - 1.0).abs() < 1e-14 {
            z.ln() - a.ln()
        } else if e.abs() < 1e-14 {
            -1.0 / z + 1.0 / a
        } else if a == 0.0 {
            z.powf(e - 1.0) / (e - 1.0)
        } else {
            (z.powf(e - 1.0) - a.powf(e - 1.0)) / (e - 1.0)
        }
    }

    /// Regularized entropy `G_alpha + eps z^{alpha-beta+2}/(...) + delta z^{alpha+2}/(...)`.
    pub fn entropy_alpha_reg(&self, z: f64) -> f64 {
        if z < 0.0 {
            return f64::NAN;
        }
        if z == 0.0 && self.eps > 0.0 {
            return f64::INFINITY;
        }
        let al = self.alpha;
        let eb = al - self.beta + 2.0;
        let mut g = self.entropy_alpha(z);
        if self.eps > 0.0 {
            g += self.eps * z.powf(eb) / (eb * (eb - 1.0));
        }
        if self.delta > 0.0 {
            g += self.delta * z.powf(al + 2.0) / ((al + 2.0) * (al + 1.0));
        }
        g
    }

    pub fn entropy_alpha_reg_deriv(&self, z: f64) -> f64 {
        let al = self.alpha;
        let eb = al - self.beta + 1.0;
        let mut g = self.entropy_alpha_deriv(z);
        if self.eps > 0.0 {
            g += self.eps * z.powf(eb) / eb;
        }
        if self.delta > 0.0 {
            g += self.delta * z.powf(al + 1.0) / (al + 1.0);
        }
        g
    }
}

/// Classical entropy with `G'' = u^{-n}`, `G(1) = G'(1) = 0`; `+inf` for
/// `u < 0` and wherever the closed form diverges at `u = 0`.
pub fn entropy_classical(u: f64, n: f64) -> f64 {
    if u < 0.0 || u.is_nan() {
        return f64::INFINITY;
    }
    if (n - 1.0).abs() < 1e-14 {
        if u == 0.0 {
            return 1.0;
        }
        u * u.ln() - u + 1.0
    } else if (n - 2.0).abs() < 1e-14 {
        if u == 0.0 {
            return f64::INFINITY;
        }
        (1.0 / u).ln() + u - 1.0
    } else {
        if u == 0.0 {
            return if n < 2.0 { 1.0 / (2.0 - n) } else { f64::INFINITY };
        }
        u.powf(2.0 - n) / ((n - 2.0) * (n - 1.0)) + u / (n - 1.0) + 1.0 / (2.0 - n)
    }
}

/// `G_alpha(z)`, rejecting `z < 0`.
pub fn entropy_alpha(z: f64, p: &ModelParams) -> Result<f64> {
    if z < 0.0 {
        return Err(Error::arg(format!("entropy argument must be >= 0, got {z}")));
    }
    Ok(p.entropy_alpha(z))
}

/// Regularized alpha-entropy; `+inf` for `z <= 0` when `eps > 0`.
pub fn entropy_alpha_reg(z: f64, p: &ModelParams) -> f64 {
    if z <= 0.0 && p.eps > 0.0 {
        return f64::INFINITY;
    }
    p.entropy_alpha_reg(z)
}

/// `Phi(nu) = F(1, 1 + nu)` with the affine and quadratic parts cancelled
/// analytically.
fn phi_stable(nu: f64, alpha: f64) -> f64 {
    let l = nu.ln_1p();
    let e1 = ((alpha + 2.0) * l).exp_m1();
    let e2 = (0.5 * (alpha + 2.0) * l).exp_m1();
    e1 - 4.0 * (alpha + 1.0) / alpha * e2 + (alpha + 2.0).powi(2) / alpha * nu
}

fn check_kernel_alpha(alpha: f64) -> Result<()> {
    if alpha == 0.0 {
        return Err(Error::arg(
            "F kernel closed form divides by alpha; use the alpha -> 0 series limit instead",
        ));
    }
    if !(alpha > -1.0 && alpha <= 1.0) {
        return Err(Error::arg(format!("alpha = {alpha} outside (-1, 1]")));
    }
    Ok(())
}

/// `F(r, w) = w^{a+2} - (a+1) r^{a+2} - 4(a+1)/a (rw)^{(a+2)/2} + (a+2)^2/a r^{a+1} w`.
///
/// Evaluated as `r^{a+2} Phi(w/r - 1)` for `r > 0`, which avoids the
/// cancellation near the diagonal.
pub fn f_kernel(r: f64, w: f64, alpha: f64) -> Result<f64> {
    check_kernel_alpha(alpha)?;
    if r < 0.0 || w < 0.0 {
        return Err(Error::arg("F kernel needs r, w >= 0"));
    }
    if r == 0.0 {
        return Ok(w.powf(alpha + 2.0));
    }
    Ok(r.powf(alpha + 2.0) * phi_stable(w / r - 1.0, alpha))
}

fn c_ratio(nu: f64, alpha: f64) -> f64 {
    (phi_stable(nu, alpha) / nu.abs().powf(alpha + 2.0)).abs()
}

/// `C(alpha) = sup_{nu >= -1} |Phi(nu)| / |nu|^{alpha+2}`.
///
/// Graded grid on `[-1, -floor] U [floor, 1e3]`, doubled until the sup moves
/// by less than 1e-4, then polished by golden-section search, and compared
/// with the analytic values at `nu = -1`, `nu -> 0` and `nu -> inf`.
pub fn c_alpha(alpha: f64) -> Result<f64> {
    check_kernel_alpha(alpha)?;
    let floor = (1e3 * f64::EPSILON).powf(1.0 / (alpha + 1.0)).max(1e-6);
    let nu_max = 1e3;
    let scan = |points: usize| -> (f64, f64) {
        let half = points / 2;
        let mut best = (0.0, f64::NAN);
        let (lf, ln) = (floor.ln(), 0.0f64);
        let (rf, rn) = (floor.ln(), f64::ln(nu_max));
        for j in 0..half {
            let t = j as f64 / (half - 1) as f64;
            for nu in [-(lf + t * (ln - lf)).exp(), (rf + t * (rn - rf)).exp()] {
                let v = c_ratio(nu, alpha);
                if v > best.0 {
                    best = (v, nu);
                }
            }
        }
        best
    };
    let mut points = 10_000;
    let mut best = scan(points);
    loop {
        points *= 2;
        let next = scan(points);
        let change = (next.0 - best.0).abs() / next.0;
        best = next;
        if change < 1e-4 || points > 1 << 22 {
            break;
        }
    }
    // Polish on a bracket of neighbouring grid spacings, in log|nu|.
    let sign = best.1.signum();
    let x0 = best.1.abs().ln();
    let width = 4.0 * (nu_max.ln() - floor.ln()) / points as f64;
    let (mut a, mut b) = (x0 - width, (x0 + width).min(if sign < 0.0 { 0.0 } else { nu_max.ln() }));
    let f = |x: f64| c_ratio(sign * x.exp(), alpha);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let polished = f(0.5 * (a + b)).max(best.0);
    let at_zero = if alpha == 1.0 { 1.5 } else { 0.0 };
    Ok(polished.max(alpha + 1.0).max(1.0).max(at_zero))
}
