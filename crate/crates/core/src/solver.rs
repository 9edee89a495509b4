//! Time integration of `u_t = div(m(u) grad p)`, `p = (-Delta)^s u`, with
//! zero flux on the box faces.
//!
//! The state lives in cosine coefficients. The stiff part `(-Delta)^{s+1}` is
//! diagonal there, so the stabilized IMEX step
//! `(1 + dt M (-Delta)^{s+1}) u' = u + dt (rhs(u) + M (-Delta)^{s+1} u)`
//! is a pointwise division. A damped Newton step for the fully implicit
//! scheme is available as a cross-check on small grids.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, Accumulators, DiagRecord};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::spectral::{self, Grid, SpectralField};

/// Largest system the Newton stepper will assemble densely.
pub const NEWTON_MAX_UNKNOWNS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stepper {
    Imex,
    Newton,
}

/// Mobility used in the flux.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Mobility {
    /// `m_{eps,delta,gamma}` from the model parameters.
    Regularized,
    /// `m = c` everywhere; linear fractional heat flow when `c = 1`.
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt0: f64,
    pub t_end: f64,
    pub stepper: Stepper,
    /// Fixed splitting constant; `None` uses `1.1 max m(u)`, refreshed every step.
    pub stabilizer: Option<f64>,
    /// Reject steps that break the discrete energy inequality. Independently of
    /// this, the step grows by 1.2 after 10 clean steps up to `dt_max`; set
    /// `dt_max = dt0` for a fixed step.
    pub adaptive: bool,
    /// Admissible growth of `E + 2 int D` over the whole run, relative to `E(0)`.
    pub dissipation_tol: f64,
    /// 2/3 truncation of the flux divergence; `None` turns it on for `n >= 2`.
    pub dealias: Option<bool>,
    /// Steps whose minimum drops below this are retried with a smaller step.
    /// `None` disables the check.
    pub u_min: Option<f64>,
    pub dt_max: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt0: 1e-4,
            t_end: 0.1,
            stepper: Stepper::Imex,
            stabilizer: None,
            adaptive: true,
            dissipation_tol: 1e-5,
            dealias: None,
            u_min: Some(0.0),
            dt_max: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt0 > 0.0 && self.dt0.is_finite()) {
            return Err(Error::arg(format!("dt0 = {} must be positive", self.dt0)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::arg(format!("t_end = {} must be positive", self.t_end)));
        }
        if let Some(m) = self.stabilizer {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::arg(format!("stabilizer = {m} must be positive")));
            }
        }
        if !(self.dissipation_tol > 0.0) {
            return Err(Error::arg("dissipation tolerance must be positive"));
        }
        if let Some(u) = self.u_min {
            if u < 0.0 {
                return Err(Error::arg(format!("positivity floor {u} must be >= 0")));
            }
        }
        if let Some(m) = self.dt_max {
            if !(m > 0.0) {
                return Err(Error::arg("dt_max must be positive"));
            }
        }
        Ok(())
    }
}

/// `p = (-Delta)^s u`.
pub fn compute_pressure(u: &SpectralField, s: f64) -> Result<SpectralField> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::arg(format!("s must lie in (0,1), got {s}")));
    }
    spectral::frac_laplacian(u, s)
}

/// One evaluation of the flux divergence at a state.
#[derive(Debug, Clone)]
struct Evaluation {
    rhs: Vec<f64>,
    /// `int m(u) |grad p|^2`.
    dissipation: f64,
    max_m: f64,
    energy: f64,
}

/// The operator `u -> div(m(u) grad (-Delta)^s u)` on a fixed grid.
#[derive(Debug, Clone)]
pub struct Operator {
    grid: Arc<Grid>,
    params: ModelParams,
    mobility: Mobility,
    dealias: bool,
    lam_s: Vec<f64>,
    lam_s1: Vec<f64>,
}

impl Operator {
    pub fn new(grid: &Arc<Grid>, params: ModelParams, mobility: Mobility, dealias: bool) -> Self {
        let lam_s = grid.eigenvalues().iter().map(|l| l.powf(params.s)).collect();
        let lam_s1 = grid.eigenvalues().iter().map(|l| l.powf(params.s + 1.0)).collect();
        Self { grid: grid.clone(), params, mobility, dealias, lam_s, lam_s1 }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn mobility(&self, z: f64) -> f64 {
        match self.mobility {
            Mobility::Regularized => self.params.mobility(z),
            Mobility::Constant(c) => c,
        }
    }

    fn mobility_deriv(&self, z: f64) -> f64 {
        match self.mobility {
            Mobility::Regularized => self.params.mobility_deriv(z),
            Mobility::Constant(_) => 0.0,
        }
    }

    fn pressure_gradient(&self, coeffs: &[f64]) -> Vec<Vec<f64>> {
        let p: Vec<f64> = coeffs.iter().zip(&self.lam_s).map(|(c, l)| c * l).collect();
        let p = SpectralField::from_coeffs(&self.grid, p).expect("length matches grid");
        spectral::gradient(&p)
    }

    fn evaluate(&self, u: &SpectralField) -> Result<Evaluation> {
        let grad_p = self.pressure_gradient(u.coeffs());
        let m: Vec<f64> = u.values().iter().map(|&z| self.mobility(z)).collect();
        let max_m = m.iter().copied().fold(0.0, f64::max);
        let mut dissipation = 0.0;
        let flux: Vec<Vec<f64>> = grad_p
            .iter()
            .map(|g| {
                g.iter()
                    .zip(&m)
                    .map(|(gi, mi)| {
                        dissipation += mi * gi * gi;
                        mi * gi
                    })
                    .collect()
            })
            .collect();
        dissipation *= self.grid.cell_volume();
        let div = spectral::divergence(&self.grid, &flux, self.dealias)?;
        let rhs = div.coeffs().to_vec();
        if !(rhs.iter().all(|v| v.is_finite()) && dissipation.is_finite()) {
            return Err(Error::NonFinite("flux divergence"));
        }
        let energy = energy_of(u.coeffs(), &self.lam_s);
        Ok(Evaluation { rhs, dissipation, max_m, energy })
    }

    /// `div(m(u) grad (-Delta)^s u)`.
    pub fn rhs(&self, u: &SpectralField) -> Result<SpectralField> {
        let ev = self.evaluate(u)?;
        SpectralField::from_coeffs(&self.grid, ev.rhs)
    }

    /// `int m(u) |grad p|^2`.
    pub fn dissipation(&self, u: &SpectralField) -> Result<f64> {
        Ok(self.evaluate(u)?.dissipation)
    }

    fn imex(&self, c: &[f64], rhs: &[f64], dt: f64, mbar: f64) -> Vec<f64> {
        c.iter()
            .zip(rhs)
            .zip(&self.lam_s1)
            .map(|((&ck, &rk), &l)| (ck + dt * (rk + mbar * l * ck)) / (1.0 + dt * mbar * l))
            .collect()
    }

    /// Jacobian of the coefficient map `c -> rhs(c)`.
    fn jacobian(&self, u: &SpectralField) -> Result<DMatrix<f64>> {
        let len = self.grid.len();
        let grad_p = self.pressure_gradient(u.coeffs());
        let m: Vec<f64> = u.values().iter().map(|&z| self.mobility(z)).collect();
        let dm: Vec<f64> = u.values().iter().map(|&z| self.mobility_deriv(z)).collect();
        let mut jac = DMatrix::zeros(len, len);
        for k in 0..len {
            let mut e = vec![0.0; len];
            e[k] = 1.0;
            let v = SpectralField::from_coeffs(&self.grid, e)?;
            let grad_pv = self.pressure_gradient(v.coeffs());
            let vv = v.values();
            let flux: Vec<Vec<f64>> = (0..self.grid.dim())
                .map(|a| {
                    (0..len)
                        .map(|j| dm[j] * vv[j] * grad_p[a][j] + m[j] * grad_pv[a][j])
                        .collect()
                })
                .collect();
            let col = spectral::divergence(&self.grid, &flux, self.dealias)?;
            jac.set_column(k, &DVector::from_column_slice(col.coeffs()));
        }
        Ok(jac)
    }

    /// Damped Newton solve of `c' - c - dt rhs(c') = 0`.
    fn newton(&self, c: &[f64], dt: f64) -> Result<Vec<f64>> {
        let len = self.grid.len();
        if len > NEWTON_MAX_UNKNOWNS {
            return Err(Error::arg(format!(
                "Newton stepper limited to {NEWTON_MAX_UNKNOWNS} unknowns, grid has {len}"
            )));
        }
        let residual = |x: &[f64]| -> Result<Vec<f64>> {
            let f = SpectralField::from_coeffs(&self.grid, x.to_vec())?;
            let r = self.evaluate(&f)?.rhs;
            Ok((0..len).map(|k| x[k] - c[k] - dt * r[k]).collect())
        };
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = norm(c).max(f64::MIN_POSITIVE);
        let mut x = c.to_vec();
        let mut g = residual(&x)?;
        for _ in 0..30 {
            let gn = norm(&g);
            if gn <= 1e-13 * scale {
                return Ok(x);
            }
            let u = SpectralField::from_coeffs(&self.grid, x.clone())?;
            let mut jac = self.jacobian(&u)?;
            jac *= -dt;
            for k in 0..len {
                jac[(k, k)] += 1.0;
            }
            let delta = jac
                .lu()
                .solve(&DVector::from_iterator(len, g.iter().map(|v| -v)))
                .ok_or_else(|| Error::arg("singular Newton matrix"))?;
            let mut damp = 1.0;
            loop {
                let trial: Vec<f64> = (0..len).map(|k| x[k] + damp * delta[k]).collect();
                if let Ok(gt) = residual(&trial) {
                    if norm(&gt) < gn || damp < 1e-3 {
                        x = trial;
                        g = gt;
                        break;
                    }
                }
                damp *= 0.5;
                if damp < 1e-3 {
                    return Err(Error::NonFinite("Newton line search"));
                }
            }
        }
        if norm(&g) <= 1e-10 * scale {
            Ok(x)
        } else {
            Err(Error::arg("Newton iteration did not converge"))
        }
    }
}

fn energy_of(coeffs: &[f64], lam_s: &[f64]) -> f64 {
    coeffs.iter().zip(lam_s).map(|(c, l)| l * c * c).sum()
}

/// A point of the discrete trajectory.
#[derive(Debug, Clone)]
pub struct State {
    pub t: f64,
    pub u: SpectralField,
    pub step: usize,
    pub p: SpectralField,
}

impl State {
    pub fn new(u: SpectralField, s: f64) -> Result<Self> {
        let p = compute_pressure(&u, s)?;
        Ok(Self { t: 0.0, u, step: 0, p })
    }
}

/// Times at which diagnostics and snapshots are emitted.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputSchedule {
    pub diag_times: Vec<f64>,
    pub snapshot_times: Vec<f64>,
}

impl OutputSchedule {
    /// Evenly spaced outputs every `diag_every` and `snapshot_every`,
    /// starting at 0 and always including `t_end`.
    pub fn uniform(t_end: f64, diag_every: f64, snapshot_every: f64) -> Self {
        Self { diag_times: ladder(t_end, diag_every), snapshot_times: ladder(t_end, snapshot_every) }
    }

    /// Adds `count` log-spaced diagnostic times in `[t_end * 1e-6, t_end]`.
    pub fn with_log_diagnostics(mut self, t_end: f64, count: usize) -> Self {
        if count > 1 {
            let (a, b) = ((t_end * 1e-6).ln(), t_end.ln());
            for j in 0..count {
                self.diag_times.push((a + (b - a) * j as f64 / (count - 1) as f64).exp());
            }
        }
        self.normalize();
        self
    }

    fn normalize(&mut self) {
        for v in [&mut self.diag_times, &mut self.snapshot_times] {
            v.sort_by(f64::total_cmp);
            v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1e-300));
        }
    }

    fn merged(&self) -> Vec<f64> {
        let mut all: Vec<f64> =
            self.diag_times.iter().chain(&self.snapshot_times).copied().filter(|&t| t > 0.0).collect();
        all.sort_by(f64::total_cmp);
        all.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
        all
    }
}

fn ladder(t_end: f64, every: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    if every > 0.0 {
        let count = (t_end / every * (1.0 + 1e-12)).floor() as usize;
        out.extend((1..=count).map(|j| j as f64 * every).filter(|&t| t < t_end * (1.0 - 1e-12)));
    }
    out.push(t_end);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunStats {
    pub accepted: usize,
    pub rejected: usize,
    pub min_dt: f64,
    pub max_dt: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Arc<Grid>,
    pub params: ModelParams,
    pub records: Vec<DiagRecord>,
    pub snapshots: Vec<Snapshot>,
    pub stats: RunStats,
}

impl Trajectory {
    pub fn final_snapshot(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }
}

/// A run that stopped early, with everything emitted before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Trajectory,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} records kept)", self.error, self.partial.records.len())
    }
}

impl std::error::Error for RunFailure {}

/// Everything except the initial datum that determines a run.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub params: ModelParams,
    pub mobility: Mobility,
    pub solver: SolverConfig,
    pub schedule: OutputSchedule,
    /// Center of the sup-norm balls used for the support radius.
    pub center: Vec<f64>,
    pub support_threshold: f64,
}

impl RunSpec {
    fn dealias(&self) -> bool {
        self.solver.dealias.unwrap_or(self.params.n >= 2.0)
    }

    pub fn operator(&self, grid: &Arc<Grid>) -> Operator {
        Operator::new(grid, self.params, self.mobility, self.dealias())
    }
}

/// One fixed step of the configured stepper, without adaptivity.
pub fn step(state: &State, dt: f64, spec: &RunSpec) -> Result<State> {
    let op = spec.operator(state.u.grid());
    let ev = op.evaluate(&state.u)?;
    let c = match spec.solver.stepper {
        Stepper::Imex => {
            let mbar = spec.solver.stabilizer.unwrap_or(1.1 * ev.max_m);
            op.imex(state.u.coeffs(), &ev.rhs, dt, mbar)
        }
        Stepper::Newton => op.newton(state.u.coeffs(), dt)?,
    };
    let u = SpectralField::from_coeffs(state.u.grid(), c)?;
    let p = compute_pressure(&u, spec.params.s)?;
    Ok(State { t: state.t + dt, u, step: state.step + 1, p })
}

/// Integrates from `u0` (already lifted) to `t_end`.
pub fn run(u0: &SpectralField, spec: &RunSpec) -> std::result::Result<Trajectory, RunFailure> {
    let grid = u0.grid().clone();
    let mut traj = Trajectory {
        grid: grid.clone(),
        params: spec.params,
        records: Vec::new(),
        snapshots: Vec::new(),
        stats: RunStats { min_dt: f64::INFINITY, ..RunStats::default() },
    };
    if let Err(error) = spec.solver.validate().and_then(|_| spec.params.validate()) {
        return Err(RunFailure { error, partial: traj });
    }
    match integrate(u0, spec, &mut traj) {
        Ok(()) => Ok(traj),
        Err(error) => Err(RunFailure { error, partial: traj }),
    }
}

fn integrate(u0: &SpectralField, spec: &RunSpec, traj: &mut Trajectory) -> Result<()> {
    let cfg = &spec.solver;
    let op = spec.operator(u0.grid());
    let grid = op.grid().clone();
    let is_at = |times: &[f64], t: f64| times.iter().any(|&x| (x - t).abs() <= 1e-12 * t.max(1e-300));
    let mut u = SpectralField::from_coeffs(&grid, u0.coeffs().to_vec())?;
    let mut ev = op.evaluate(&u)?;
    let e0 = ev.energy;
    let mut acc = Accumulators::default();
    let emit = |traj: &mut Trajectory, t: f64, u: &SpectralField, acc: &Accumulators| {
        if t == 0.0 || is_at(&spec.schedule.diag_times, t) {
            traj.records.push(diagnostics::record(
                u,
                &spec.params,
                acc,
                t,
                &spec.center,
                spec.support_threshold,
            ));
        }
        if t == 0.0 || is_at(&spec.schedule.snapshot_times, t) {
            traj.snapshots.push(Snapshot { t, values: u.values().to_vec() });
        }
    };
    emit(traj, 0.0, &u, &acc);
    let stops = {
        let mut s = spec.schedule.merged();
        s.retain(|&t| t < cfg.t_end);
        s.push(cfg.t_end);
        s
    };
    let mut t = 0.0;
    let mut dt = cfg.dt0;
    let mut clean = 0usize;
    let mut step_no = 0usize;
    for &stop in &stops {
        while t < stop {
            let remaining = stop - t;
            let mut h = dt.min(cfg.dt_max.unwrap_or(f64::INFINITY));
            let lands = remaining <= h * (1.0 + 1e-6);
            if lands {
                h = remaining;
            }
            let attempt = (|| -> Result<(Vec<f64>, Evaluation, SpectralField)> {
                let c = match cfg.stepper {
                    Stepper::Imex => {
                        let mbar = cfg.stabilizer.unwrap_or(1.1 * ev.max_m);
                        op.imex(u.coeffs(), &ev.rhs, h, mbar)
                    }
                    Stepper::Newton => op.newton(u.coeffs(), h)?,
                };
                let un = SpectralField::from_coeffs(&grid, c.clone())?;
                let evn = op.evaluate(&un)?;
                Ok((c, evn, un))
            })();
            let reject_reason = match &attempt {
                Err(e) => Some(e.to_string()),
                Ok((_, evn, un)) => {
                    let violation = evn.energy + 2.0 * h * evn.dissipation - ev.energy;
                    let allowed = cfg.dissipation_tol * e0 * h / cfg.t_end + 1e-13 * ev.energy;
                    if cfg.adaptive && violation > allowed {
                        Some(format!("energy violation {violation:e} > {allowed:e}"))
                    } else if let Some(floor) = cfg.u_min.filter(|&f| un.min() < f) {
                        Some(format!("positivity: min u = {:e} < {floor:e}", un.min()))
                    } else {
                        None
                    }
                }
            };
            if let Some(reason) = reject_reason {
                log::debug!("t = {t:e}: rejected step {h:e}: {reason}");
                traj.stats.rejected += 1;
                clean = 0;
                dt = 0.5 * h;
                if dt < 1e-12 * cfg.dt0 {
                    return Err(Error::SolverAbort { t, step: step_no, reason });
                }
                continue;
            }
            let (_, evn, un) = attempt.expect("accepted step");
            step_no += 1;
            traj.stats.accepted += 1;
            traj.stats.min_dt = traj.stats.min_dt.min(h);
            traj.stats.max_dt = traj.stats.max_dt.max(h);
            acc.add_step(h, evn.dissipation, &un, &spec.params);
            t = if lands { stop } else { t + h };
            u = un;
            ev = evn;
            if !lands {
                clean += 1;
                if clean >= 10 {
                    clean = 0;
                    dt *= 1.2;
                }
            }
        }
        emit(traj, stop, &u, &acc);
    }
    Ok(())
}
