use std::cell::OnceCell;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use super::grid::Grid;
use crate::error::{Error, Result};

/// A scalar field held as nodal samples and Neumann-cosine coefficients.
///
/// Either representation is materialized lazily from the other on first
/// access. The lazy caches make the type `!Sync`: a field may be moved
/// between threads but not transformed by two of them at once.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: Arc<Grid>,
    values: OnceCell<Vec<f64>>,
    coeffs: OnceCell<Vec<f64>>,
}

impl SpectralField {
    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        Ok(Self { grid: grid.clone(), values: OnceCell::from(values), coeffs: OnceCell::new() })
    }

    pub fn from_coeffs(grid: &Arc<Grid>, coeffs: Vec<f64>) -> Result<Self> {
        grid.check_len(coeffs.len())?;
        Ok(Self { grid: grid.clone(), values: OnceCell::new(), coeffs: OnceCell::from(coeffs) })
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values: Vec<f64> = (0..grid.len()).map(|i| f(&grid.node(i))).collect();
        Self { grid: grid.clone(), values: OnceCell::from(values), coeffs: OnceCell::new() }
    }

    pub fn constant(grid: &Arc<Grid>, value: f64) -> Self {
        Self::from_values(grid, vec![value; grid.len()]).expect("length matches grid")
    }

    /// The orthonormal eigenfunction with multi-index `k`.
    pub fn eigenmode(grid: &Arc<Grid>, k: &[usize]) -> Result<Self> {
        if k.len() != grid.dim() || k.iter().zip(grid.sizes()).any(|(k, n)| k >= n) {
            return Err(Error::arg(format!("mode {k:?} not resolved on grid {:?}", grid.sizes())));
        }
        let mut c = vec![0.0; grid.len()];
        c[grid.flatten(k)] = 1.0;
        Self::from_coeffs(grid, c)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        self.values.get_or_init(|| {
            let mut v = self.coeffs.get().expect("one representation is always set").clone();
            self.grid.transform(&mut v, &self.grid.cos_parities(), false);
            v
        })
    }

    pub fn coeffs(&self) -> &[f64] {
        self.coeffs.get_or_init(|| {
            let mut c = self.values.get().expect("one representation is always set").clone();
            self.grid.transform(&mut c, &self.grid.cos_parities(), true);
            c
        })
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values();
        self.values.into_inner().expect("materialized above")
    }

    /// New field with coefficients `f(lambda_k, c_k)`.
    pub fn map_spectrum(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let coeffs: Vec<f64> =
            self.grid.eigenvalues().iter().zip(self.coeffs()).map(|(&l, &c)| f(l, c)).collect();
        Self { grid: self.grid.clone(), values: OnceCell::new(), coeffs: OnceCell::from(coeffs) }
    }

    /// New field with nodal values `f(u_j)`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = self.values().iter().map(|&v| f(v)).collect();
        Self { grid: self.grid.clone(), values: OnceCell::from(values), coeffs: OnceCell::new() }
    }

    /// Midpoint-rule integral over the box.
    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.values().iter().sum::<f64>()
    }

    pub fn mean(&self) -> f64 {
        self.integral() / self.grid.volume()
    }

    /// L2 norm from the coefficients (Parseval).
    pub fn l2_norm(&self) -> f64 {
        self.coeffs().iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// L2 norm from nodal quadrature.
    pub fn l2_norm_nodal(&self) -> f64 {
        (self.grid.cell_volume() * self.values().iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// `(\int |u|^p)^{1/p}` by the midpoint rule; a quasi-norm for `p < 1`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let s: f64 = self.values().iter().map(|v| v.abs().powf(p)).sum();
        (self.grid.cell_volume() * s).powf(1.0 / p)
    }

    /// L2 inner product computed in coefficient space.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        self.coeffs().iter().zip(other.coeffs()).map(|(a, b)| a * b).sum()
    }

    pub fn min(&self) -> f64 {
        self.values().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pointwise combination `a * self + b * other`, in coefficient space.
    pub fn axpby(&self, a: f64, other: &SpectralField, b: f64) -> Self {
        let coeffs: Vec<f64> =
            self.coeffs().iter().zip(other.coeffs()).map(|(x, y)| a * x + b * y).collect();
        Self { grid: self.grid.clone(), values: OnceCell::new(), coeffs: OnceCell::from(coeffs) }
    }

    /// Relative L2 distance `|self - other| / |other|` (absolute if `other = 0`).
    pub fn relative_l2_distance(&self, other: &SpectralField) -> f64 {
        let diff = self.axpby(1.0, other, -1.0).l2_norm();
        let scale = other.l2_norm();
        if scale > 0.0 {
            diff / scale
        } else {
            diff
        }
    }

    /// Random field whose coefficients vanish outside the index box
    /// `k_i < bandwidth`, with Gaussian amplitudes decaying like
    /// `(1 + lambda_k)^{-decay/2}`.
    pub fn random_band_limited<R: Rng + ?Sized>(
        grid: &Arc<Grid>,
        bandwidth: usize,
        decay: f64,
        rng: &mut R,
    ) -> Self {
        let coeffs: Vec<f64> = (0..grid.len())
            .map(|flat| {
                if grid.multi_index(flat).iter().any(|&k| k >= bandwidth) {
                    0.0
                } else {
                    let lam = grid.eigenvalues()[flat];
                    rng.sample::<f64, _>(StandardNormal) * (1.0 + lam).powf(-0.5 * decay)
                }
            })
            .collect();
        Self::from_coeffs(grid, coeffs).expect("length matches grid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn constant_field_has_single_coefficient() {
        let g = Grid::line(PI, 32).unwrap();
        let u = SpectralField::constant(&g, 1.0 / PI.sqrt());
        assert!((u.coeffs()[0] - 1.0).abs() < 1e-14);
        assert!(u.coeffs()[1..].iter().all(|c| c.abs() < 1e-14));
    }

    #[test]
    fn sampled_eigenfunction_analyzes_to_unit_vector() {
        let g = Grid::line(PI, 64).unwrap();
        let u = SpectralField::from_fn(&g, |x| (2.0 / PI).sqrt() * (3.0 * x[0]).cos());
        for (k, c) in u.coeffs().iter().enumerate() {
            let expect = if k == 3 { 1.0 } else { 0.0 };
            assert!((c - expect).abs() < 1e-12, "k = {k}: {c}");
        }
    }

    #[test]
    fn round_trip_on_band_limited_2d_field() {
        let g = Grid::new(2, &[1.0, 2.5], &[16, 24]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = SpectralField::random_band_limited(&g, 10, 1.0, &mut rng);
        let back = SpectralField::from_values(&g, u.values().to_vec()).unwrap();
        let err: f64 = back.coeffs().iter().zip(u.coeffs()).map(|(a, b)| (a - b).abs()).sum();
        assert!(err < 1e-12 * u.l2_norm() * g.len() as f64);
    }

    #[test]
    fn parseval_matches_nodal_norm() {
        let g = Grid::new(2, &[1.0, 1.0], &[12, 12]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = SpectralField::random_band_limited(&g, 12, 0.0, &mut rng);
        assert!((u.l2_norm() - u.l2_norm_nodal()).abs() < 1e-12 * u.l2_norm());
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let g = Grid::line(1.0, 16).unwrap();
        assert!(matches!(
            SpectralField::from_values(&g, vec![0.0; 15]),
            Err(Error::SizeMismatch { expected: 16, got: 15 })
        ));
    }
}
