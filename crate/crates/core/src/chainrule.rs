//! Nonlocal chain rule `(-Delta)^mu phi(u) = phi'(u) (-Delta)^mu u - I_mu[u]`,
//! checked by assembling `I_mu` (and its `mu in (1,2)` analogue `J_mu`) from
//! the heat kernel.
//!
//! The kernel is the truncated eigen-expansion
//! `K(x,y,t) = sum_k e^{-lambda_k t} phi_k(x) phi_k(y)`. Below `t_safe` it
//! oscillates, so the `t`-integral is taken on `[t_safe, inf)` only, and the
//! piece on `(0, t_safe)` is replaced by its two-term small-`t` expansion
//! `A(t) ~ t phi''(u)|grad u|^2 + t^2/2 (Delta^2 phi(u) - phi'(u) Delta^2 u)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{self, gamma_signed, Grid, QuadratureSpec, SpectralField};

/// Tolerance on the clipped kernel mass that defines `t_safe`.
pub const KERNEL_MASS_TOL: f64 = 1e-8;
/// Largest grid (per axis) accepted by the two-dimensional verification.
pub const MAX_NODES_2D: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Phi {
    /// `a v + b`.
    Linear(f64, f64),
    /// `v^p`; needs `u > 0` unless `p` is a nonnegative integer.
    Power(f64),
}

impl Phi {
    pub fn value(&self, v: f64) -> f64 {
        match *self {
            Phi::Linear(a, b) => a * v + b,
            Phi::Power(p) => v.powf(p),
        }
    }

    pub fn d1(&self, v: f64) -> f64 {
        match *self {
            Phi::Linear(a, _) => a,
            Phi::Power(p) => p * v.powf(p - 1.0),
        }
    }

    pub fn d2(&self, v: f64) -> f64 {
        match *self {
            Phi::Linear(..) => 0.0,
            Phi::Power(p) if p == 1.0 || p == 0.0 => 0.0,
            Phi::Power(p) => p * (p - 1.0) * v.powf(p - 2.0),
        }
    }

    pub fn is_convex_on(&self, lo: f64) -> bool {
        match *self {
            Phi::Linear(..) => true,
            Phi::Power(p) if lo > 0.0 => p >= 1.0 || p <= 0.0,
            Phi::Power(p) => p > 0.0 && p.fract() == 0.0 && (p as i64) % 2 == 0,
        }
    }

    fn check(&self, u: &SpectralField) -> Result<()> {
        if let Phi::Power(p) = *self {
            let integer = p.fract() == 0.0 && p >= 0.0;
            if !integer && u.min() <= 0.0 {
                return Err(Error::arg(format!("v^{p} needs u > 0, min u = {}", u.min())));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Phi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phi::Linear(a, b) => write!(f, "{a}*v+{b}"),
            Phi::Power(p) => write!(f, "v^{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderReport {
    pub mu: f64,
    pub phi: String,
    /// Nodal residual of the identity under test.
    pub residual: Vec<f64>,
    pub max_abs: f64,
    pub mean_abs: f64,
    /// `max_abs / max |LHS|`.
    pub relative: f64,
    /// Nodes where `I_mu < -tol` although `phi` is convex (branch `mu < 1`).
    pub sign_violations: usize,
    pub positive_count: usize,
    pub negative_count: usize,
    /// Step-doubling estimate of the `t`-quadrature, relative.
    pub quadrature_estimate: f64,
    /// Lipschitz bound on the replaced `(0, t_safe)` piece.
    pub head_bound: f64,
    pub t_safe: f64,
}

/// Convex-case positivity tolerance used for `sign_violations`.
pub const POSITIVITY_TOL: f64 = 1e-6;

/// Row `y -> K(x_i, y, t)` of the truncated heat kernel.
pub fn kernel_row(grid: &Arc<Grid>, i: usize, t: f64) -> Result<Vec<f64>> {
    if i >= grid.len() {
        return Err(Error::arg(format!("node {i} out of range")));
    }
    let mut delta = vec![0.0; grid.len()];
    delta[i] = 1.0 / grid.cell_volume();
    let phi_at_x = spectral::analyze(&delta, grid)?;
    let damped: Vec<f64> =
        phi_at_x.iter().zip(grid.eigenvalues()).map(|(p, l)| p * (-l * t).exp()).collect();
    spectral::synthesize(&damped, grid)
}

fn clipped_mass_defect(grid: &Arc<Grid>, t: f64) -> f64 {
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let row = kernel_row(grid, i, t).expect("index in range");
            let m: f64 = grid.cell_volume() * row.iter().map(|k| k.max(0.0)).sum::<f64>();
            (m - 1.0).abs()
        })
        .reduce(|| 0.0, f64::max)
}

/// Smallest `t` (to 0.1% in `ln t`) for which every clipped kernel row has
/// mass within `KERNEL_MASS_TOL` of one.
pub fn t_safe(grid: &Arc<Grid>) -> f64 {
    let h2 = grid.min_spacing().powi(2);
    let (mut lo, mut hi) = ((1e-3 * h2).ln(), (1e2 * h2).ln());
    while clipped_mass_defect(grid, hi.exp()) > KERNEL_MASS_TOL {
        hi += 2.0;
    }
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if clipped_mass_defect(grid, mid.exp()) > KERNEL_MASS_TOL {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi.exp()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Golub-Welsch).
fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::zeros(order, order);
    for k in 1..order {
        let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|k| (eig.eigenvalues[k], 2.0 * eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

const GL_ORDER: usize = 8;

/// `W(lambda) = int_{t_lo}^inf (e^{-lambda t} - 1) t^{-1-mu} dt` for each
/// eigenvalue, on `panels` and on `panels / 2` Gauss-Legendre panels in `ln t`.
fn cut_weights(lams: &[f64], mu: f64, t_lo: f64, spec: &QuadratureSpec) -> Result<Vec<(f64, f64)>> {
    spec.validate()?;
    let lam_min = lams.iter().copied().filter(|&l| l > 0.0).fold(f64::INFINITY, f64::min);
    if !lam_min.is_finite() {
        return Ok(vec![(0.0, 0.0); lams.len()]);
    }
    let t_hi = ((1.0 / spec.tail_tol).ln() / lam_min).max(t_lo * 2.0);
    let tail = -t_hi.powf(-mu) / mu;
    let (gx, gw) = gauss_legendre(GL_ORDER);
    let rule = |panels: usize| -> Vec<(f64, f64)> {
        let (a, b) = (t_lo.ln(), t_hi.ln());
        let h = (b - a) / panels as f64;
        let mut out = Vec::with_capacity(panels * GL_ORDER);
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (x, w) in gx.iter().zip(&gw) {
                let tau = mid + 0.5 * h * x;
                out.push((tau.exp(), 0.5 * h * w * (-mu * tau).exp()));
            }
        }
        out
    };
    let fine = rule(spec.panels / 8);
    let coarse = rule(spec.panels / 16);
    let eval = |nodes: &[(f64, f64)], lam: f64| -> f64 {
        nodes.iter().map(|&(t, w)| w * (-lam * t).exp_m1()).sum::<f64>() + tail
    };
    Ok(lams
        .par_iter()
        .map(|&lam| if lam == 0.0 { (0.0, 0.0) } else { (eval(&fine, lam), eval(&coarse, lam)) })
        .collect())
}

/// Everything the assembled remainder needs on one grid.
struct Assembly {
    /// `-Gamma(-mu) I` (resp. `J`) before the head term: `sum_k P_ik W_k`.
    body: Vec<f64>,
    body_coarse: Vec<f64>,
    /// `phi''(u) |grad u|^2`.
    c1: Vec<f64>,
    /// `Delta^2 phi(u) - phi'(u) Delta^2 u`.
    c2: Vec<f64>,
    t_safe: f64,
    lip2: f64,
    phi2_max: f64,
}

fn assemble(u: &SpectralField, phi: &Phi, mu: f64, quad: &QuadratureSpec) -> Result<Assembly> {
    phi.check(u)?;
    let grid = u.grid().clone();
    if grid.dim() == 2 && grid.sizes().iter().any(|&n| n > MAX_NODES_2D) {
        return Err(Error::arg(format!(
            "two-dimensional verification limited to {MAX_NODES_2D} nodes per axis"
        )));
    }
    let ts = t_safe(&grid);
    let w = cut_weights(grid.eigenvalues(), mu, ts, quad)?;
    let wf: Vec<f64> = w.iter().map(|p| p.0).collect();
    let wc: Vec<f64> = w.iter().map(|p| p.1).collect();
    let uv = u.values().to_vec();
    let rows: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let (ui, d1) = (uv[i], phi.d1(uv[i]));
            let fi = phi.value(ui);
            let taylor: Vec<f64> =
                uv.iter().map(|&uj| phi.value(uj) - fi - d1 * (uj - ui)).collect();
            let c = spectral::analyze(&taylor, &grid)?;
            let row = |wt: &[f64]| -> Result<f64> {
                let cw: Vec<f64> = c.iter().zip(wt).map(|(a, b)| a * b).collect();
                Ok(spectral::synthesize(&cw, &grid)?[i])
            };
            Ok((row(&wf)?, row(&wc)?))
        })
        .collect::<Result<_>>()?;
    let grads = spectral::gradient(u);
    let grad2: Vec<f64> =
        (0..grid.len()).map(|i| grads.iter().map(|g| g[i] * g[i]).sum()).collect();
    let c1: Vec<f64> = uv.iter().zip(&grad2).map(|(&v, g)| phi.d2(v) * g).collect();
    let fu = u.map_values(|v| phi.value(v));
    let bil_f = spectral::frac_laplacian(&fu, 2.0)?;
    let bil_u = spectral::frac_laplacian(u, 2.0)?;
    let c2: Vec<f64> = (0..grid.len())
        .map(|i| bil_f.values()[i] - phi.d1(uv[i]) * bil_u.values()[i])
        .collect();
    let lip2 = grad2.iter().copied().fold(0.0, f64::max);
    let phi2_max = uv.iter().map(|&v| phi.d2(v).abs()).fold(0.0, f64::max);
    Ok(Assembly {
        body: rows.iter().map(|r| r.0).collect(),
        body_coarse: rows.iter().map(|r| r.1).collect(),
        c1,
        c2,
        t_safe: ts,
        lip2,
        phi2_max,
    })
}

struct Remainder {
    field: SpectralField,
    estimate: f64,
    head_bound: f64,
    t_safe: f64,
}

fn remainder(u: &SpectralField, phi: &Phi, mu: f64, quad: &QuadratureSpec) -> Result<Remainder> {
    let a = assemble(u, phi, mu, quad)?;
    let g = gamma_signed(-mu);
    let ts = a.t_safe;
    let d = u.grid().dim() as f64;
    let n = a.body.len();
    let (values, coarse): (Vec<f64>, Vec<f64>) = if mu < 1.0 {
        let head = |i: usize| {
            a.c1[i] * ts.powf(1.0 - mu) / (1.0 - mu) + 0.5 * a.c2[i] * ts.powf(2.0 - mu) / (2.0 - mu)
        };
        (0..n).map(|i| (-(a.body[i] + head(i)) / g, -(a.body_coarse[i] + head(i)) / g)).unzip()
    } else {
        // The linear part of A(t) is removed on (t_safe, inf) in closed form.
        let lin = ts.powf(1.0 - mu) / (mu - 1.0);
        let head = |i: usize| 0.5 * a.c2[i] * ts.powf(2.0 - mu) / (2.0 - mu);
        (0..n)
            .map(|i| {
                let shared = head(i) - a.c1[i] * lin;
                (-(a.body[i] + shared) / g, -(a.body_coarse[i] + shared) / g)
            })
            .unzip()
    };
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    let diff = values.iter().zip(&coarse).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let estimate = if norm > 0.0 { diff / norm } else { diff };
    if estimate > quad.reject_above {
        return Err(Error::QuadratureTooCoarse { estimate, tolerance: quad.reject_above });
    }
    // |T(x,y)| <= sup|phi''| Lip^2 |x-y|^2 / 2 and int K |x-y|^2 dy ~ 2 d t.
    let head_bound = a.phi2_max * a.lip2 * d * ts.powf(1.0 - mu).min(ts.powf(2.0 - mu))
        / ((1.0 - mu).abs().min(2.0 - mu) * g.abs());
    Ok(Remainder {
        field: SpectralField::from_values(u.grid(), values)?,
        estimate,
        head_bound,
        t_safe: ts,
    })
}

/// `I_mu[u]` for `mu in (0,1)`.
pub fn remainder_i(
    u: &SpectralField,
    phi: &Phi,
    mu: f64,
    quad: &QuadratureSpec,
) -> Result<SpectralField> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::arg(format!("I_mu needs mu in (0,1), got {mu}")));
    }
    Ok(remainder(u, phi, mu, quad)?.field)
}

/// `J_mu[u]` for `mu in (1,2)`, in the combined form
/// `-(1/Gamma(-mu)) int (A(t) - t phi''(u)|grad u|^2) t^{-1-mu} dt`.
pub fn remainder_j(
    u: &SpectralField,
    phi: &Phi,
    mu: f64,
    quad: &QuadratureSpec,
) -> Result<SpectralField> {
    if !(mu > 1.0 && mu < 2.0) {
        return Err(Error::arg(format!("J_mu needs mu in (1,2), got {mu}")));
    }
    Ok(remainder(u, phi, mu, quad)?.field)
}

fn report(
    mu: f64,
    phi: &Phi,
    lhs: &[f64],
    rhs: &[f64],
    rem: &[f64],
    check_sign: bool,
    estimate: f64,
    head_bound: f64,
    t_safe: f64,
) -> RemainderReport {
    let residual: Vec<f64> = lhs.iter().zip(rhs).map(|(a, b)| a - b).collect();
    let max_abs = residual.iter().map(|r| r.abs()).fold(0.0, f64::max);
    let mean_abs = residual.iter().map(|r| r.abs()).sum::<f64>() / residual.len() as f64;
    let scale = lhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
    RemainderReport {
        mu,
        phi: phi.to_string(),
        max_abs,
        mean_abs,
        relative: if scale > 0.0 { max_abs / scale } else { max_abs },
        sign_violations: if check_sign {
            rem.iter().filter(|&&v| v < -POSITIVITY_TOL).count()
        } else {
            0
        },
        positive_count: rem.iter().filter(|&&v| v > 0.0).count(),
        negative_count: rem.iter().filter(|&&v| v < 0.0).count(),
        residual,
        quadrature_estimate: estimate,
        head_bound,
        t_safe,
    }
}

/// Residual of the chain rule on every node. `mu = 1` is the local identity
/// `-Delta phi(u) = phi'(u)(-Delta u) - phi''(u)|grad u|^2`.
pub fn verify_chain_rule(
    u: &SpectralField,
    phi: &Phi,
    mu: f64,
    quad: &QuadratureSpec,
) -> Result<RemainderReport> {
    if !(mu > 0.0 && mu < 2.0) {
        return Err(Error::arg(format!("mu must lie in (0,2), got {mu}")));
    }
    phi.check(u)?;
    let fu = u.map_values(|v| phi.value(v));
    let lhs = spectral::frac_laplacian(&fu, mu)?;
    let lu = spectral::frac_laplacian(u, mu)?;
    let uv = u.values();
    let (rem, est, hb, ts) = if mu == 1.0 {
        let grads = spectral::gradient(u);
        let r: Vec<f64> = (0..uv.len())
            .map(|i| phi.d2(uv[i]) * grads.iter().map(|g| g[i] * g[i]).sum::<f64>())
            .collect();
        (r, 0.0, 0.0, 0.0)
    } else {
        let r = remainder(u, phi, mu, quad)?;
        (r.field.values().to_vec(), r.estimate, r.head_bound, r.t_safe)
    };
    let rhs: Vec<f64> =
        (0..uv.len()).map(|i| phi.d1(uv[i]) * lu.values()[i] - rem[i]).collect();
    let convex = mu < 1.0 && phi.is_convex_on(u.min());
    Ok(report(mu, phi, lhs.values(), &rhs, &rem, convex, est, hb, ts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareIdentityReport {
    /// `(-Delta)^mu v^2 = 2 v (-Delta)^mu v - J_mu[v]` on every node.
    pub pointwise: RemainderReport,
    /// `|v|^2_{H^mu} - (1/2) int J_mu[v]`, relative to `|v|^2_{H^mu}` (absolute if zero).
    pub integrated_residual: f64,
    /// `int (-Delta)^mu v^2`, which vanishes under zero-flux conditions.
    pub integral_of_lap_v2: f64,
}

pub fn verify_square_identities(
    v: &SpectralField,
    mu: f64,
    quad: &QuadratureSpec,
) -> Result<SquareIdentityReport> {
    if !(mu > 1.0 && mu < 2.0) {
        return Err(Error::arg(format!("square identities need mu in (1,2), got {mu}")));
    }
    let phi = Phi::Power(2.0);
    let pointwise = verify_chain_rule(v, &phi, mu, quad)?;
    let r = remainder(v, &phi, mu, quad)?;
    let half_int_j = 0.5 * r.field.integral();
    let energy = spectral::seminorm_sq(v, mu);
    let diff = (energy - half_int_j).abs();
    let lap_v2 = spectral::frac_laplacian(&v.map_values(|x| x * x), mu)?;
    Ok(SquareIdentityReport {
        pointwise,
        integrated_residual: if energy > 0.0 { diff / energy } else { diff },
        integral_of_lap_v2: lap_v2.integral(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub sizes: Vec<usize>,
    pub residuals: Vec<f64>,
    /// Least-squares slope of `-ln residual` against `ln N`.
    pub order: f64,
}

/// Chain-rule residual (relative) on 1-D grids of the given sizes, with the
/// quadrature refined alongside the grid.
pub fn convergence_study(
    length: f64,
    sizes: &[usize],
    u: impl Fn(f64) -> f64 + Sync,
    phi: &Phi,
    mu: f64,
    quad: &QuadratureSpec,
) -> Result<ConvergenceReport> {
    let mut residuals = Vec::with_capacity(sizes.len());
    let mut q = *quad;
    for &n in sizes {
        let g = Grid::line(length, n)?;
        let field = SpectralField::from_fn(&g, |x| u(x[0]));
        residuals.push(verify_chain_rule(&field, phi, mu, &q)?.relative);
        q = q.refined();
    }
    let pts: Vec<(f64, f64)> = sizes
        .iter()
        .zip(&residuals)
        .map(|(&n, &r)| ((n as f64).ln(), -r.max(f64::MIN_POSITIVE).ln()))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(ConvergenceReport { sizes: sizes.to_vec(), residuals, order: sxy / sxx })
}
