//! Gamma function off the positive axis with explicit sign.

use statrs::function::gamma::ln_gamma;

/// `Gamma(x)` for real `x` that is not a nonpositive integer.
///
/// Uses `ln_gamma` on the positive axis and the downward recurrence
/// `Gamma(x) = Gamma(x + m) / (x (x + 1) ... (x + m - 1))`, so the sign of the
/// result comes out of the product rather than from an absolute value.
pub fn gamma_signed(x: f64) -> f64 {
    if x > 0.0 {
        return ln_gamma(x).exp();
    }
    if x == x.floor() {
        return f64::NAN;
    }
    let m = (-x).floor() as usize + 1;
    let mut denom = 1.0;
    for j in 0..m {
        denom *= x + j as f64;
    }
    ln_gamma(x + m as f64).exp() / denom
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn negative_half() {
        // Gamma(-1/2) = -2 sqrt(pi)
        assert!((gamma_signed(-0.5) + 2.0 * PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn signs_on_the_two_branches() {
        for s in [0.1, 0.25, 0.5, 0.75, 0.9] {
            assert!(gamma_signed(-s) < 0.0, "s = {s}");
            assert!(gamma_signed(-1.0 - s) > 0.0, "s = {s}");
        }
    }

    #[test]
    fn matches_reflection_formula() {
        for x in [-0.3, -0.75, -1.4, -1.9, -2.5] {
            let refl = PI / ((PI * x).sin() * statrs::function::gamma::gamma(1.0 - x));
            assert!((gamma_signed(x) - refl).abs() < 1e-12 * refl.abs(), "x = {x}");
        }
    }

    #[test]
    fn poles_are_nan() {
        assert!(gamma_signed(0.0).is_nan());
        assert!(gamma_signed(-2.0).is_nan());
    }
}
