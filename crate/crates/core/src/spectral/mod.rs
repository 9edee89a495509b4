//! Neumann cosine eigenbasis on boxes and the operators diagonal in it.

mod field;
mod gamma;
mod grid;
mod semigroup;
mod transform;

pub use field::SpectralField;
pub use gamma::gamma_signed;
pub use grid::{Grid, MIN_NODES};
pub use semigroup::{
    frac_laplacian_semigroup, frac_laplacian_semigroup_with_estimate, semigroup_power,
    QuadratureSpec, SemigroupRule,
};
pub use transform::{AxisTransform, Parity};

use std::sync::Arc;

use crate::error::{Error, Result};

/// Nodal values to orthonormal cosine coefficients.
pub fn analyze(values: &[f64], grid: &Arc<Grid>) -> Result<Vec<f64>> {
    grid.check_len(values.len())?;
    let mut c = values.to_vec();
    grid.transform(&mut c, &grid.cos_parities(), true);
    Ok(c)
}

/// Orthonormal cosine coefficients to nodal values.
pub fn synthesize(coeffs: &[f64], grid: &Arc<Grid>) -> Result<Vec<f64>> {
    grid.check_len(coeffs.len())?;
    let mut v = coeffs.to_vec();
    grid.transform(&mut v, &grid.cos_parities(), false);
    Ok(v)
}

/// `(-Delta)^r u` by the spectral multiplier `lambda_k^r` (with `0^0 = 1`).
pub fn frac_laplacian(u: &SpectralField, r: f64) -> Result<SpectralField> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::arg(format!("fractional power must be finite and >= 0, got {r}")));
    }
    Ok(u.map_spectrum(|lam, c| lam.powf(r) * c))
}

/// Homogeneous seminorm `(sum_k lambda_k^r c_k^2)^{1/2}`.
pub fn seminorm(u: &SpectralField, r: f64) -> f64 {
    seminorm_sq(u, r).sqrt()
}

pub fn seminorm_sq(u: &SpectralField, r: f64) -> f64 {
    u.grid()
        .eigenvalues()
        .iter()
        .zip(u.coeffs())
        .map(|(&lam, &c)| lam.powf(r) * c * c)
        .sum()
}

/// `e^{t Delta} u`.
pub fn heat_semigroup(u: &SpectralField, t: f64) -> Result<SpectralField> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::arg(format!("semigroup time must be positive, got {t}")));
    }
    Ok(u.map_spectrum(|lam, c| (-lam * t).exp() * c))
}

/// Nodal values of each component of `grad u`, differentiated spectrally.
///
/// Component `a` is a sine series along axis `a`, so it vanishes on the
/// faces normal to that axis.
pub fn gradient(u: &SpectralField) -> Vec<Vec<f64>> {
    let grid = u.grid();
    (0..grid.dim()).map(|axis| derivative(grid, u.coeffs(), axis)).collect()
}

fn derivative(grid: &Arc<Grid>, coeffs: &[f64], axis: usize) -> Vec<f64> {
    let mut d: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .map(|(flat, &c)| -grid.wavenumber(axis, grid.multi_index(flat)[axis]) * c)
        .collect();
    grid.transform(&mut d, &grid.flux_parities(axis), false);
    d
}

/// Spectral divergence of a vector field given by nodal components.
///
/// Each component is projected onto sine modes along its own axis, so the
/// zero-flux condition is built in and the result has zero mean exactly.
/// With `dealias`, cosine modes with `k_a >= 2 N_a / 3` on any axis are
/// dropped.
pub fn divergence(grid: &Arc<Grid>, flux: &[Vec<f64>], dealias: bool) -> Result<SpectralField> {
    if flux.len() != grid.dim() {
        return Err(Error::SizeMismatch { expected: grid.dim(), got: flux.len() });
    }
    let mut out = vec![0.0; grid.len()];
    let mut buf = Vec::new();
    for (axis, comp) in flux.iter().enumerate() {
        grid.check_len(comp.len())?;
        buf.clear();
        buf.extend_from_slice(comp);
        grid.transform(&mut buf, &grid.flux_parities(axis), true);
        for (flat, (o, &sigma)) in out.iter_mut().zip(&buf).enumerate() {
            let k = grid.multi_index(flat)[axis];
            if k > 0 {
                *o += grid.wavenumber(axis, k) * sigma;
            }
        }
    }
    if dealias {
        truncate_two_thirds(grid, &mut out);
    }
    SpectralField::from_coeffs(grid, out)
}

/// Zeroes coefficients beyond the 2/3 cutoff along any axis.
pub fn truncate_two_thirds(grid: &Grid, coeffs: &mut [f64]) {
    let cut: Vec<usize> = grid.sizes().iter().map(|&n| (2 * n).div_ceil(3)).collect();
    for (flat, c) in coeffs.iter_mut().enumerate() {
        if grid.multi_index(flat).iter().zip(&cut).any(|(k, m)| k >= m) {
            *c = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn phi(g: &Arc<Grid>, k: usize) -> SpectralField {
        SpectralField::eigenmode(g, &[k]).unwrap()
    }

    #[test]
    fn half_power_of_third_mode() {
        let g = Grid::line(PI, 64).unwrap();
        let p = frac_laplacian(&phi(&g, 3), 0.5).unwrap();
        let expect = phi(&g, 3).map_spectrum(|_, c| 3.0 * c);
        assert!(p.relative_l2_distance(&expect) < 1e-12);
    }

    #[test]
    fn constants_are_annihilated_and_zero_power_is_identity() {
        let g = Grid::line(2.0, 32).unwrap();
        let one = SpectralField::constant(&g, 1.3);
        assert!(frac_laplacian(&one, 0.3).unwrap().l2_norm() < 1e-13);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = SpectralField::random_band_limited(&g, 20, 1.0, &mut rng);
        assert_eq!(frac_laplacian(&u, 0.0).unwrap().coeffs(), u.coeffs());
        assert!(frac_laplacian(&u, -0.1).is_err());
    }

    #[test]
    fn seminorm_of_third_mode() {
        let g = Grid::line(PI, 64).unwrap();
        assert!((seminorm(&phi(&g, 3), 2.0) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn heat_semigroup_on_first_mode() {
        let g = Grid::line(PI, 32).unwrap();
        let v = heat_semigroup(&phi(&g, 1), 1.0).unwrap();
        assert!((v.coeffs()[1] - (-1.0f64).exp()).abs() < 1e-15);
        let c = SpectralField::constant(&g, 2.0);
        let vc = heat_semigroup(&c, 5.0).unwrap();
        assert!(vc.values().iter().all(|v| (v - 2.0).abs() < 1e-13));
        assert!(heat_semigroup(&c, 0.0).is_err());
    }

    #[test]
    fn gradient_of_cosine_is_minus_sine() {
        let g = Grid::line(PI, 32).unwrap();
        let u = SpectralField::from_fn(&g, |x| (2.0 * x[0]).cos());
        let du = &gradient(&u)[0];
        for (j, d) in du.iter().enumerate() {
            let x = g.coordinate(0, j);
            assert!((d + 2.0 * (2.0 * x).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_of_gradient_is_minus_laplacian() {
        let g = Grid::new(2, &[1.0, 1.5], &[16, 20]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = SpectralField::random_band_limited(&g, 10, 0.0, &mut rng);
        let lap = divergence(&g, &gradient(&u), false).unwrap();
        let expect = frac_laplacian(&u, 1.0).unwrap().map_spectrum(|_, c| -c);
        assert!(lap.relative_l2_distance(&expect) < 1e-12);
        assert!(lap.coeffs()[0].abs() < 1e-14);
    }

    #[test]
    fn two_thirds_cutoff_keeps_low_modes() {
        let g = Grid::line(1.0, 12).unwrap();
        let mut c = vec![1.0; 12];
        truncate_two_thirds(&g, &mut c);
        assert_eq!(c.iter().filter(|&&v| v != 0.0).count(), 8);
    }
}
