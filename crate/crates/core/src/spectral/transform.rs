//! Orthonormal cosine and sine transforms on midpoint nodes.
//!
//! Nodes sit at `x_j = (j + 1/2) h`, `h = L / N`. The cosine modes
//! `sqrt(1/L)` and `sqrt(2/L) cos(k pi x / L)` (k = 1..N-1) are exactly
//! orthonormal under the midpoint rule, as are the sine modes
//! `sqrt(2/L) sin(k pi x / L)` for k = 1..N-1. Both directions go through a
//! single complex FFT of length `2N` on the mirrored sequence.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Parity of the basis along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    /// Neumann cosine modes (scalar fields).
    Cos,
    /// Sine modes vanishing on the boundary (normal flux components).
    Sin,
}

/// Precomputed plans and twiddles for one axis.
#[derive(Clone)]
pub struct AxisTransform {
    n: usize,
    length: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `exp(-i pi k / 2N)` for k = 0..N-1.
    twiddle: Vec<Complex64>,
}

impl fmt::Debug for AxisTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AxisTransform")
            .field("n", &self.n)
            .field("length", &self.length)
            .finish()
    }
}

impl AxisTransform {
    pub fn new(n: usize, length: f64) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(2 * n);
        let inverse = planner.plan_fft_inverse(2 * n);
        let twiddle = (0..n)
            .map(|k| Complex64::from_polar(1.0, -PI * k as f64 / (2.0 * n as f64)))
            .collect();
        Self { n, length, forward, inverse, twiddle }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Amplitude of the orthonormal mode `k` of the given parity.
    pub fn mode_weight(&self, parity: Parity, k: usize) -> f64 {
        match (parity, k) {
            (Parity::Cos, 0) => (1.0 / self.length).sqrt(),
            (Parity::Sin, 0) => 0.0,
            _ => (2.0 / self.length).sqrt(),
        }
    }

    /// Wavenumber `k pi / L`.
    pub fn wavenumber(&self, k: usize) -> f64 {
        k as f64 * PI / self.length
    }

    /// Nodal values to orthonormal coefficients, in place.
    pub fn analyze(&self, parity: Parity, data: &mut [f64], buf: &mut Vec<Complex64>) {
        let n = self.n;
        debug_assert_eq!(data.len(), n);
        buf.clear();
        buf.extend(data.iter().map(|&v| Complex64::new(v, 0.0)));
        let sign = match parity {
            Parity::Cos => 1.0,
            Parity::Sin => -1.0,
        };
        buf.extend(data.iter().rev().map(|&v| Complex64::new(sign * v, 0.0)));
        self.forward.process(buf);
        let h = self.spacing();
        for k in 0..n {
            let z = self.twiddle[k] * buf[k];
            data[k] = match parity {
                Parity::Cos => 0.5 * z.re * h * self.mode_weight(parity, k),
                Parity::Sin => -0.5 * z.im * h * self.mode_weight(parity, k),
            };
        }
    }

    /// Orthonormal coefficients to nodal values, in place. For sine parity
    /// the entry at index 0 is ignored.
    pub fn synthesize(&self, parity: Parity, data: &mut [f64], buf: &mut Vec<Complex64>) {
        let n = self.n;
        debug_assert_eq!(data.len(), n);
        buf.clear();
        buf.extend(
            (0..n).map(|k| self.twiddle[k].conj() * (data[k] * self.mode_weight(parity, k))),
        );
        buf.resize(2 * n, Complex64::new(0.0, 0.0));
        self.inverse.process(buf);
        for (j, v) in data.iter_mut().enumerate() {
            *v = match parity {
                Parity::Cos => buf[j].re,
                Parity::Sin => buf[j].im,
            };
        }
    }
}

/// Applies `f` to every 1-D line of a row-major array along `axis`.
pub(crate) fn for_each_line<F>(data: &mut [f64], sizes: &[usize], axis: usize, mut f: F)
where
    F: FnMut(&mut [f64]),
{
    let n = sizes[axis];
    let inner: usize = sizes[axis + 1..].iter().product();
    let outer: usize = sizes[..axis].iter().product();
    if inner == 1 {
        for line in data.chunks_exact_mut(n) {
            f(line);
        }
        return;
    }
    let mut line = vec![0.0; n];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * n * inner + i;
            for (j, v) in line.iter_mut().enumerate() {
                *v = data[base + j * inner];
            }
            f(&mut line);
            for (j, v) in line.iter().enumerate() {
                data[base + j * inner] = *v;
            }
        }
    }
}
