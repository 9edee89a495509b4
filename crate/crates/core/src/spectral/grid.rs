use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;

use super::transform::{for_each_line, AxisTransform, Parity};
use crate::error::{Error, Result};

/// Minimum number of nodes per axis.
pub const MIN_NODES: usize = 8;

/// Midpoint discretization of the box `(0, L_0) x ... x (0, L_{d-1})` with
/// homogeneous Neumann conditions.
///
/// Fields are stored row-major: the last axis is contiguous. The Neumann
/// eigenpairs are closed-form: `lambda_k = sum_i (k_i pi / L_i)^2` with
/// tensor-product cosine eigenfunctions, L2-normalized on the box.
#[derive(Debug, Clone)]
pub struct Grid {
    lengths: Vec<f64>,
    sizes: Vec<usize>,
    axes: Vec<AxisTransform>,
    eigenvalues: Vec<f64>,
}

impl Grid {
    /// Builds a grid of dimension 1 or 2.
    pub fn new(dim: usize, lengths: &[f64], sizes: &[usize]) -> Result<Arc<Self>> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "dimension {dim} unsupported; only 1 and 2 are available"
            )));
        }
        if lengths.len() != dim || sizes.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} lengths and sizes, got {} and {}",
                lengths.len(),
                sizes.len()
            )));
        }
        if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidGrid(format!("axis length must be positive, got {l}")));
        }
        if let Some(n) = sizes.iter().find(|n| **n < MIN_NODES) {
            return Err(Error::InvalidGrid(format!(
                "axis needs at least {MIN_NODES} nodes, got {n}"
            )));
        }
        let axes: Vec<_> =
            lengths.iter().zip(sizes).map(|(&l, &n)| AxisTransform::new(n, l)).collect();
        let total: usize = sizes.iter().product();
        let mut eigenvalues = vec![0.0; total];
        for (flat, lam) in eigenvalues.iter_mut().enumerate() {
            let idx = unflatten(flat, sizes);
            *lam = idx
                .iter()
                .zip(lengths)
                .map(|(&k, &l)| (k as f64 * PI / l).powi(2))
                .sum();
        }
        Ok(Arc::new(Self { lengths: lengths.to_vec(), sizes: sizes.to_vec(), axes, eigenvalues }))
    }

    /// One-dimensional convenience constructor.
    pub fn line(length: f64, n: usize) -> Result<Arc<Self>> {
        Self::new(1, &[length], &[n])
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Total number of nodes (and of modes).
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.sizes[axis] as f64
    }

    /// Smallest spacing over all axes.
    pub fn min_spacing(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    /// Measure of the box.
    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Quadrature weight of a single node.
    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.len() as f64
    }

    /// Neumann eigenvalues in storage order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvalue of a multi-index.
    pub fn eigenvalue(&self, index: &[usize]) -> f64 {
        self.eigenvalues[self.flatten(index)]
    }

    /// Smallest positive eigenvalue.
    pub fn lambda_min(&self) -> f64 {
        self.lengths.iter().map(|l| (PI / l).powi(2)).fold(f64::INFINITY, f64::min)
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(0.0, f64::max)
    }

    /// Node coordinate along one axis.
    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        (i as f64 + 0.5) * self.spacing(axis)
    }

    /// Coordinates of a flat node index.
    pub fn node(&self, flat: usize) -> Vec<f64> {
        unflatten(flat, &self.sizes)
            .into_iter()
            .enumerate()
            .map(|(a, i)| self.coordinate(a, i))
            .collect()
    }

    /// Multi-index of a flat storage index.
    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        unflatten(flat, &self.sizes)
    }

    pub fn flatten(&self, index: &[usize]) -> usize {
        index.iter().zip(&self.sizes).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Box center.
    pub fn center(&self) -> Vec<f64> {
        self.lengths.iter().map(|l| 0.5 * l).collect()
    }

    /// Wavenumber `k pi / L` of mode index `k` along `axis`.
    pub fn wavenumber(&self, axis: usize, k: usize) -> f64 {
        self.axes[axis].wavenumber(k)
    }

    /// Pointwise value of the orthonormal eigenfunction with multi-index `k`.
    pub fn eigenfunction(&self, k: &[usize], x: &[f64]) -> f64 {
        k.iter()
            .zip(x)
            .zip(&self.axes)
            .map(|((&k, &x), ax)| ax.mode_weight(Parity::Cos, k) * (ax.wavenumber(k) * x).cos())
            .product()
    }

    /// Applies the per-axis transform (analysis or synthesis) with the given
    /// parities, in place.
    pub(crate) fn transform(&self, data: &mut [f64], parities: &[Parity], forward: bool) {
        debug_assert_eq!(data.len(), self.len());
        let mut buf: Vec<Complex64> = Vec::new();
        for (axis, (ax, &parity)) in self.axes.iter().zip(parities).enumerate() {
            for_each_line(data, &self.sizes, axis, |line| {
                if forward {
                    ax.analyze(parity, line, &mut buf)
                } else {
                    ax.synthesize(parity, line, &mut buf)
                }
            });
        }
    }

    pub(crate) fn cos_parities(&self) -> Vec<Parity> {
        vec![Parity::Cos; self.dim()]
    }

    /// Parities of the `axis` component of a vector field.
    pub(crate) fn flux_parities(&self, axis: usize) -> Vec<Parity> {
        (0..self.dim()).map(|a| if a == axis { Parity::Sin } else { Parity::Cos }).collect()
    }

    pub(crate) fn check_len(&self, got: usize) -> Result<()> {
        if got != self.len() {
            return Err(Error::SizeMismatch { expected: self.len(), got });
        }
        Ok(())
    }
}

fn unflatten(mut flat: usize, sizes: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; sizes.len()];
    for (a, &n) in sizes.iter().enumerate().rev() {
        idx[a] = flat % n;
        flat /= n;
    }
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumann_eigenvalues_on_pi_interval_are_squares() {
        let g = Grid::line(PI, 64).unwrap();
        for k in 0..64 {
            assert!((g.eigenvalue(&[k]) - (k * k) as f64).abs() < 1e-9 * (1 + k * k) as f64);
        }
    }

    #[test]
    fn unit_interval_first_eigenvalue() {
        let g = Grid::line(1.0, 8).unwrap();
        assert!((g.eigenvalue(&[1]) - PI * PI).abs() < 1e-12);
    }

    #[test]
    fn square_mixed_mode() {
        let g = Grid::new(2, &[PI, PI], &[16, 16]).unwrap();
        assert!((g.eigenvalue(&[1, 1]) - 2.0).abs() < 1e-12);
        assert_eq!(g.eigenvalue(&[0, 0]), 0.0);
        assert!(g.eigenvalues().iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(Grid::new(3, &[1.0; 3], &[8; 3]), Err(Error::InvalidGrid(_))));
        assert!(Grid::line(0.0, 16).is_err());
        assert!(Grid::line(-1.0, 16).is_err());
        assert!(Grid::line(1.0, 4).is_err());
    }

    #[test]
    fn flat_index_round_trip() {
        let g = Grid::new(2, &[1.0, 2.0], &[8, 12]).unwrap();
        for flat in 0..g.len() {
            assert_eq!(g.flatten(&g.multi_index(flat)), flat);
        }
    }
}
