//! Fixtures shared by the benchmarks.

use fracthin::{Grid, SpectralField};

/// Smooth positive bump on the unit line or square.
pub fn bump(dim: usize, n: usize) -> SpectralField {
    let g = Grid::new(dim, &vec![1.0; dim], &vec![n; dim]).expect("bench grid");
    SpectralField::from_fn(&g, |x| {
        1.0 + x.iter().map(|&c| (-(c - 0.45) * (c - 0.45) / 0.02).exp()).product::<f64>()
    })
}
