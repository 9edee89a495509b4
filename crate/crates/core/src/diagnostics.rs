//! Measured functionals along a trajectory: energy, entropies, support
//! radii, propagation fits, waiting times and annulus integrals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::solver::Trajectory;
use crate::spectral::{self, Grid, SpectralField};

/// Time integrals carried along by the solver (right-endpoint rule).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Accumulators {
    /// `int int m(u) |grad p|^2`.
    pub dissipation: f64,
    /// `int |(-Delta)^{(1+s)/2} u^{(alpha+2)/2}|^2 dt`.
    pub entropy_dissipation: f64,
    /// `int int u^{alpha+2}`.
    pub power: f64,
}

impl Accumulators {
    pub fn add_step(&mut self, dt: f64, dissipation: f64, u: &SpectralField, params: &ModelParams) {
        self.dissipation += dt * dissipation;
        self.entropy_dissipation += dt * higher_seminorm(u, params);
        self.power += dt * power_integral(u, params.alpha);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagRecord {
    pub t: f64,
    pub mass: f64,
    pub energy_hs: f64,
    pub entropy_alpha: f64,
    pub dissipation_cum: f64,
    pub seminorm_hs1: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub support_radius: f64,
    pub entropy_dissipation_cum: f64,
    pub power_cum: f64,
}

/// `|(-Delta)^{(1+s)/2} u_+^{(alpha+2)/2}|^2`.
pub fn higher_seminorm(u: &SpectralField, params: &ModelParams) -> f64 {
    let e = 0.5 * (params.alpha + 2.0);
    let w = u.map_values(|v| v.max(0.0).powf(e));
    spectral::seminorm_sq(&w, 1.0 + params.s)
}

fn power_integral(u: &SpectralField, alpha: f64) -> f64 {
    let q = alpha + 2.0;
    u.grid().cell_volume() * u.values().iter().map(|v| v.max(0.0).powf(q)).sum::<f64>()
}

/// `int G^{eps,delta}_alpha(u)`; `+inf` if `u` touches zero with `eps > 0`.
pub fn entropy(u: &SpectralField, params: &ModelParams) -> f64 {
    let h = u.grid().cell_volume();
    h * u.values().iter().map(|&v| crate::model::entropy_alpha_reg(v, params)).sum::<f64>()
}

/// Pseudo-flux `g = m(u)^{1/2} grad p` on `{u > 0}`, zero elsewhere.
pub fn pseudo_flux(u: &SpectralField, params: &ModelParams) -> Vec<Vec<f64>> {
    let p = u.map_spectrum(|lam, c| lam.powf(params.s) * c);
    let sq: Vec<f64> = u
        .values()
        .iter()
        .map(|&z| if z > 0.0 { params.mobility(z).sqrt() } else { 0.0 })
        .collect();
    spectral::gradient(&p)
        .into_iter()
        .map(|g| g.iter().zip(&sq).map(|(a, b)| a * b).collect())
        .collect()
}

pub fn record(
    u: &SpectralField,
    params: &ModelParams,
    acc: &Accumulators,
    t: f64,
    center: &[f64],
    threshold: f64,
) -> DiagRecord {
    DiagRecord {
        t,
        mass: u.integral(),
        energy_hs: spectral::seminorm_sq(u, params.s),
        entropy_alpha: entropy(u, params),
        dissipation_cum: acc.dissipation,
        seminorm_hs1: higher_seminorm(u, params),
        min_u: u.min(),
        max_u: u.max(),
        support_radius: support_radius(u, threshold, center),
        entropy_dissipation_cum: acc.entropy_dissipation,
        power_cum: acc.power,
    }
}

/// `max_t (E(t) + 2 int D - E(0)) / E(0)`; absolute when `E(0) = 0`.
pub fn energy_inequality_residual(records: &[DiagRecord]) -> f64 {
    let Some(first) = records.first() else { return 0.0 };
    let e0 = first.energy_hs;
    let scale = if e0 > 0.0 { e0 } else { 1.0 };
    records
        .iter()
        .map(|r| (r.energy_hs + 2.0 * r.dissipation_cum - e0) / scale)
        .fold(0.0, f64::max)
}

/// Smallest `C >= 0` with
/// `S(t) + 4/(alpha+2)^2 int |...|^2 <= S(0) + C int int u^{alpha+2}` at every record.
pub fn entropy_inequality_residual(records: &[DiagRecord], params: &ModelParams) -> f64 {
    let Some(first) = records.first() else { return 0.0 };
    let c = 4.0 / (params.alpha + 2.0).powi(2);
    let mut out: f64 = 0.0;
    for r in records {
        let excess = r.entropy_alpha + c * r.entropy_dissipation_cum - first.entropy_alpha;
        if excess > 0.0 {
            out = out.max(if r.power_cum > 0.0 { excess / r.power_cum } else { f64::INFINITY });
        }
    }
    out
}

/// Largest sup-norm distance from `center` of a node where `u >= threshold`;
/// 0 if there is none.
pub fn support_radius(u: &SpectralField, threshold: f64, center: &[f64]) -> f64 {
    let grid = u.grid();
    u.values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= threshold)
        .map(|(i, _)| sup_distance(&grid.node(i), center))
        .fold(0.0, f64::max)
}

fn sup_distance(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportTrace {
    pub points: Vec<(f64, f64)>,
    pub threshold: f64,
    pub r0: f64,
}

impl SupportTrace {
    pub fn from_records(records: &[DiagRecord], threshold: f64, r0: f64) -> Self {
        Self { points: records.iter().map(|r| (r.t, r.support_radius)).collect(), threshold, r0 }
    }

    /// Running maximum of the radii.
    pub fn monotone(&self) -> Self {
        let mut m = f64::NEG_INFINITY;
        let points = self
            .points
            .iter()
            .map(|&(t, d)| {
                m = m.max(d);
                (t, m)
            })
            .collect();
        Self { points, ..self.clone() }
    }

    pub fn is_monotone(&self) -> bool {
        self.points.windows(2).all(|w| w[1].1 >= w[0].1)
    }
}

/// Admissible radii for the propagation fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    /// Discard points with `d - r0` at or below this.
    pub min_growth: f64,
    /// Discard points with `d` at or above this.
    pub max_radius: f64,
}

impl FitWindow {
    /// Three cells of growth up to 0.8 of the smallest half-width about `center`.
    pub fn for_grid(grid: &Grid, center: &[f64]) -> Self {
        let half = (0..grid.dim())
            .map(|a| center[a].min(grid.lengths()[a] - center[a]))
            .fold(f64::INFINITY, f64::min);
        Self { min_growth: 3.0 * grid.min_spacing(), max_radius: 0.8 * half }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub exponent: f64,
    /// `exp` of the intercept, the constant in `d - r0 = C0 t^exponent`.
    pub c0: f64,
    pub target: f64,
    pub relative_error: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PropagationFit {
    Fitted(ExponentFit),
    /// Too few points in the window; the support did not grow enough.
    WaitingOnly { points: usize },
}

pub const MIN_FIT_POINTS: usize = 10;

/// Least squares for `log(d - r0)` against `log t` over the window.
pub fn fit_propagation_exponent(
    trace: &SupportTrace,
    params: &ModelParams,
    window: &FitWindow,
) -> PropagationFit {
    let pts: Vec<(f64, f64)> = trace
        .points
        .iter()
        .filter(|&&(t, d)| t > 0.0 && d - trace.r0 > window.min_growth && d < window.max_radius)
        .map(|&(t, d)| (t.ln(), (d - trace.r0).ln()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return PropagationFit::WaitingOnly { points: pts.len() };
    }
    let (slope, intercept) = least_squares(&pts);
    let target = params.propagation_exponent();
    PropagationFit::Fitted(ExponentFit {
        exponent: slope,
        c0: intercept.exp(),
        target,
        relative_error: (slope - target).abs() / target,
        points: pts.len(),
    })
}

fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Last trace time before the radius first exceeds `r0 + tol_cells * h`;
/// the final time if it never does.
pub fn detect_waiting_time(trace: &SupportTrace, r0: f64, tol_cells: f64, h: f64) -> f64 {
    let limit = r0 + tol_cells * h;
    let mut last = 0.0;
    for &(t, d) in &trace.points {
        if d > limit {
            return last;
        }
        last = t;
    }
    last
}

/// `int_0^T int_{|x - c|_inf > S} u_+^{alpha+2}`, trapezoid rule over the snapshots.
pub fn annulus_entropy(traj: &Trajectory, center: &[f64], radius: f64) -> f64 {
    let grid = &traj.grid;
    let q = traj.params.alpha + 2.0;
    let outside: Vec<bool> =
        (0..grid.len()).map(|i| sup_distance(&grid.node(i), center) > radius).collect();
    let slice = |vals: &[f64]| -> f64 {
        grid.cell_volume()
            * vals
                .iter()
                .zip(&outside)
                .filter(|(_, &o)| o)
                .map(|(v, _)| v.max(0.0).powf(q))
                .sum::<f64>()
    };
    traj.snapshots
        .windows(2)
        .map(|w| 0.5 * (w[1].t - w[0].t) * (slice(&w[0].values) + slice(&w[1].values)))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WtpScan {
    /// `(delta, scaled annulus average)` for every non-empty annulus.
    pub values: Vec<(f64, f64)>,
    pub sup: f64,
    /// `sup^{-n/(alpha-n+2)}`, the shape of the waiting-time lower bound.
    pub predicted_t0_shape: f64,
}

pub const WTP_LADDER: usize = 8;

/// `sup_j delta_j^{-gamma (alpha-n+2)} avg_{r0-delta_j < |x-c|_inf <= r0} G_alpha(u0)`
/// over `delta_j = r0 2^{-j}`, `j = 1..8`.
pub fn wtp_condition_scan(
    u0: &SpectralField,
    r0: f64,
    gamma_exp: f64,
    params: &ModelParams,
    center: &[f64],
) -> Result<WtpScan> {
    let critical = params.critical_edge_exponent();
    if gamma_exp < critical * (1.0 - 1e-12) {
        return Err(Error::arg(format!(
            "edge exponent {gamma_exp} below the critical value {critical}"
        )));
    }
    let e = params.alpha - params.n + 2.0;
    if !(r0 > 0.0) {
        return Err(Error::arg("r0 must be positive"));
    }
    let grid = u0.grid();
    let dist: Vec<f64> = (0..grid.len()).map(|i| sup_distance(&grid.node(i), center)).collect();
    let mut values = Vec::new();
    for j in 1..=WTP_LADDER {
        let delta = r0 * 0.5f64.powi(j as i32);
        let (mut sum, mut count) = (0.0, 0usize);
        for (v, d) in u0.values().iter().zip(&dist) {
            if *d > r0 - delta && *d <= r0 {
                sum += params.entropy_alpha(v.max(0.0));
                count += 1;
            }
        }
        if count == 0 {
            continue;
        }
        values.push((delta, delta.powf(-gamma_exp * e) * sum / count as f64));
    }
    let sup = values.iter().map(|v| v.1).fold(0.0, f64::max);
    Ok(WtpScan { values, sup, predicted_t0_shape: sup.powf(-params.n / e) })
}
