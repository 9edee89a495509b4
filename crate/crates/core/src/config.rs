//! Experiment configuration: a line-oriented `section.key = value` format,
//! initial-datum families and the runs built from them.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, Warning};
use crate::solver::{self, Mobility, OutputSchedule, RunFailure, RunSpec, SolverConfig, Stepper, Trajectory};
use crate::spectral::{Grid, SpectralField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridBlock {
    pub dim: usize,
    pub lengths: Vec<f64>,
    pub sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitFamily {
    /// `a ((r0^2 - |x - c|^2)_+)^2`.
    Bump,
    /// `a ((r0 - |x - c|)_+)^gamma'`.
    PowerEdge,
    /// `a phi_k` for the multi-index `k`.
    Eigenmode(Vec<usize>),
    /// Nodal values in flat grid order.
    Table(Vec<f64>),
}

impl InitFamily {
    pub fn name(&self) -> &'static str {
        match self {
            InitFamily::Bump => "bump",
            InitFamily::PowerEdge => "power-edge",
            InitFamily::Eigenmode(_) => "eigenmode",
            InitFamily::Table(_) => "custom-table",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitBlock {
    pub family: InitFamily,
    /// Defaults to the center of the box.
    pub center: Option<Vec<f64>>,
    pub r0: f64,
    pub amplitude: f64,
    pub edge_exponent: f64,
    /// Constant added before the lift.
    pub offset: f64,
    /// Add the positivity lift `eps^theta_1 + delta`.
    pub lift: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputBlock {
    pub snapshot_every: f64,
    pub diag_every: f64,
    /// Extra log-spaced diagnostic times.
    pub diag_log_count: usize,
    /// `None` uses the model default.
    pub support_threshold: Option<f64>,
    pub dir: String,
    pub run_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub grid: GridBlock,
    pub model: ModelParams,
    pub mobility: Mobility,
    pub init: InitBlock,
    pub solver: SolverConfig,
    pub output: OutputBlock,
    pub seed: u64,
}

/// A validated config with the range warnings for its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub config: ExperimentConfig,
    pub warnings: Vec<Warning>,
}

const KEYS: &[&str] = &[
    "grid.dim",
    "grid.lengths",
    "grid.sizes",
    "model.n",
    "model.s",
    "model.alpha",
    "model.beta",
    "model.eps",
    "model.delta",
    "model.gamma",
    "model.mobility",
    "init.family",
    "init.center",
    "init.r0",
    "init.amplitude",
    "init.edge_exponent",
    "init.mode",
    "init.table",
    "init.offset",
    "init.lift",
    "solver.dt0",
    "solver.t_end",
    "solver.stepper",
    "solver.stabilizer",
    "solver.adaptive",
    "solver.dissipation_tol",
    "solver.dealias",
    "solver.u_min",
    "solver.dt_max",
    "output.snapshot_every",
    "output.diag_every",
    "output.diag_log_count",
    "output.support_threshold",
    "output.dir",
    "output.run_id",
    "seed",
];

struct Entries {
    map: BTreeMap<String, (usize, String)>,
    last_line: usize,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut last_line = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            last_line = line;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(Error::config(line, format!("expected `key = value`, got `{content}`")));
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::config(line, format!("unknown key `{k}`")));
            }
            if v.is_empty() {
                return Err(Error::config(line, format!("empty value for `{k}`")));
            }
            if let Some((first, _)) = map.insert(k.to_string(), (line, v.to_string())) {
                return Err(Error::config(line, format!("`{k}` already set on line {first}")));
            }
        }
        Ok(Self { map, last_line })
    }

    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn required(&self, key: &str) -> Result<(usize, &str)> {
        self.raw(key).ok_or_else(|| {
            Error::config(self.last_line, format!("missing required key `{key}`"))
        })
    }

    fn get<T>(&self, key: &str, default: T, parse: impl Fn(&str) -> Option<T>) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some((line, v)) => convert(line, key, v, parse),
        }
    }

    fn line_of(&self, key: &str) -> usize {
        self.raw(key).map(|(l, _)| l).unwrap_or(self.last_line)
    }
}

fn convert<T>(line: usize, key: &str, v: &str, parse: impl Fn(&str) -> Option<T>) -> Result<T> {
    parse(v).ok_or_else(|| Error::config(line, format!("cannot read `{v}` as the value of `{key}`")))
}

fn float(v: &str) -> Option<f64> {
    v.parse::<f64>().ok().filter(|x| x.is_finite())
}

fn uint(v: &str) -> Option<usize> {
    v.parse().ok()
}

fn boolean(v: &str) -> Option<bool> {
    match v {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

fn list<T>(parse: impl Fn(&str) -> Option<T>) -> impl Fn(&str) -> Option<Vec<T>> {
    move |v: &str| v.split(',').map(|p| parse(p.trim())).collect()
}

/// `auto`/`none` map to `None`.
fn optional<T>(word: &'static str, parse: impl Fn(&str) -> Option<T>) -> impl Fn(&str) -> Option<Option<T>> {
    move |v: &str| if v == word { Some(None) } else { parse(v).map(Some) }
}

fn filesystem_safe(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

/// Parses and validates a config; warnings are attached, never clamped.
pub fn parse_config(text: &str) -> Result<ParsedConfig> {
    let e = Entries::parse(text)?;
    let (sl, sv) = e.required("grid.sizes")?;
    let sizes = convert(sl, "grid.sizes", sv, list(uint))?;
    let dim = e.get("grid.dim", sizes.len(), uint)?;
    if dim != sizes.len() {
        return Err(Error::config(
            e.line_of("grid.dim"),
            format!("grid.dim = {dim} but {} sizes given", sizes.len()),
        ));
    }
    let lengths = e.get("grid.lengths", vec![1.0; dim], list(float))?;
    if lengths.len() != dim {
        return Err(Error::config(e.line_of("grid.lengths"), format!("expected {dim} lengths")));
    }
    Grid::new(dim, &lengths, &sizes).map_err(|err| Error::config(sl, err.to_string()))?;
    let grid = GridBlock { dim, lengths, sizes };

    let d = ModelParams::default();
    let model = ModelParams {
        d: dim,
        n: e.get("model.n", d.n, float)?,
        s: e.get("model.s", d.s, float)?,
        alpha: e.get("model.alpha", d.alpha, float)?,
        beta: e.get("model.beta", d.beta, float)?,
        eps: e.get("model.eps", d.eps, float)?,
        delta: e.get("model.delta", d.delta, float)?,
        gamma: e.get("model.gamma", d.gamma, float)?,
    };
    model.validate().map_err(|err| Error::config(e.line_of("model.n"), err.to_string()))?;
    let mobility = e.get("model.mobility", Mobility::Regularized, |v| {
        if v == "regularized" {
            Some(Mobility::Regularized)
        } else {
            float(v).map(Mobility::Constant)
        }
    })?;

    let (fl, fv) = e.required("init.family")?;
    let family = match fv {
        "bump" => InitFamily::Bump,
        "power-edge" => InitFamily::PowerEdge,
        "eigenmode" => {
            let (l, v) = e.required("init.mode")?;
            InitFamily::Eigenmode(convert(l, "init.mode", v, list(uint))?)
        }
        "custom-table" => {
            let (l, v) = e.required("init.table")?;
            InitFamily::Table(convert(l, "init.table", v, list(float))?)
        }
        other => return Err(Error::config(fl, format!("unknown initial family `{other}`"))),
    };
    let init = InitBlock {
        family,
        center: e.get("init.center", None, |v| list(float)(v).map(Some))?,
        r0: e.get("init.r0", 0.25, float)?,
        amplitude: e.get("init.amplitude", 1.0, float)?,
        edge_exponent: e.get("init.edge_exponent", model.critical_edge_exponent(), float)?,
        offset: e.get("init.offset", 0.0, float)?,
        lift: e.get("init.lift", true, boolean)?,
    };

    let sd = SolverConfig::default();
    let (tl, tv) = e.required("solver.t_end")?;
    let solver = SolverConfig {
        dt0: e.get("solver.dt0", sd.dt0, float)?,
        t_end: convert(tl, "solver.t_end", tv, float)?,
        stepper: e.get("solver.stepper", sd.stepper, |v| match v {
            "imex" => Some(Stepper::Imex),
            "newton" => Some(Stepper::Newton),
            _ => None,
        })?,
        stabilizer: e.get("solver.stabilizer", sd.stabilizer, optional("auto", float))?,
        adaptive: e.get("solver.adaptive", sd.adaptive, boolean)?,
        dissipation_tol: e.get("solver.dissipation_tol", sd.dissipation_tol, float)?,
        dealias: e.get("solver.dealias", sd.dealias, optional("auto", boolean))?,
        u_min: e.get("solver.u_min", sd.u_min, optional("none", float))?,
        dt_max: e.get("solver.dt_max", sd.dt_max, optional("none", float))?,
    };
    solver.validate().map_err(|err| Error::config(tl, err.to_string()))?;

    let output = OutputBlock {
        snapshot_every: e.get("output.snapshot_every", solver.t_end / 10.0, float)?,
        diag_every: e.get("output.diag_every", solver.t_end / 100.0, float)?,
        diag_log_count: e.get("output.diag_log_count", 0, uint)?,
        support_threshold: e.get("output.support_threshold", None, optional("auto", float))?,
        dir: e.get("output.dir", "out".to_string(), |v| Some(v.to_string()))?,
        run_id: e.get("output.run_id", "run".to_string(), |v| Some(v.to_string()))?,
    };
    let seed = e.get("seed", 0u64, |v| v.parse().ok())?;

    let config = ExperimentConfig { grid, model, mobility, init, solver, output, seed };
    config.check().map_err(|(key, msg)| Error::config(e.line_of(key), msg))?;
    let warnings = config.model.warnings();
    Ok(ParsedConfig { config, warnings })
}

impl ExperimentConfig {
    /// Cross-field checks, reporting the offending key.
    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        let dim = self.grid.dim;
        let len: usize = self.grid.sizes.iter().product();
        if let Some(c) = &self.init.center {
            if c.len() != dim {
                return Err(("init.center", format!("expected {dim} coordinates")));
            }
        }
        match &self.init.family {
            InitFamily::Bump | InitFamily::PowerEdge => {
                if !(self.init.r0 > 0.0) {
                    return Err(("init.r0", "r0 must be positive".into()));
                }
                if !(self.init.edge_exponent > 0.0) {
                    return Err(("init.edge_exponent", "edge exponent must be positive".into()));
                }
            }
            InitFamily::Eigenmode(k) => {
                if k.len() != dim || k.iter().zip(&self.grid.sizes).any(|(a, b)| a >= b) {
                    return Err(("init.mode", format!("mode {k:?} not on the grid")));
                }
            }
            InitFamily::Table(t) => {
                if t.len() != len {
                    return Err(("init.table", format!("expected {len} values, got {}", t.len())));
                }
            }
        }
        for (key, v) in
            [("output.snapshot_every", self.output.snapshot_every), ("output.diag_every", self.output.diag_every)]
        {
            if !(v > 0.0) {
                return Err((key, format!("cadence {v} must be positive")));
            }
        }
        if !filesystem_safe(&self.output.run_id) {
            return Err(("output.run_id", format!("run id `{}` is not filesystem-safe", self.output.run_id)));
        }
        if let Mobility::Constant(c) = self.mobility {
            if !(c > 0.0) {
                return Err(("model.mobility", "constant mobility must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        Grid::new(self.grid.dim, &self.grid.lengths, &self.grid.sizes)
    }

    pub fn center(&self) -> Vec<f64> {
        self.init
            .center
            .clone()
            .unwrap_or_else(|| self.grid.lengths.iter().map(|l| 0.5 * l).collect())
    }

    /// The initial datum, lifted when configured.
    pub fn initial_datum(&self, grid: &Arc<Grid>) -> Result<SpectralField> {
        let c = self.center();
        let a = self.init.amplitude;
        let r0 = self.init.r0;
        let dist = |x: &[f64]| x.iter().zip(&c).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
        let base = match &self.init.family {
            InitFamily::Bump => {
                SpectralField::from_fn(grid, |x| a * (r0 * r0 - dist(x)).max(0.0).powi(2))
            }
            InitFamily::PowerEdge => {
                let g = self.init.edge_exponent;
                SpectralField::from_fn(grid, |x| a * (r0 - dist(x).sqrt()).max(0.0).powf(g))
            }
            InitFamily::Eigenmode(k) => {
                let m = SpectralField::eigenmode(grid, k)?;
                m.map_values(|v| a * v)
            }
            InitFamily::Table(t) => SpectralField::from_values(grid, t.clone())?,
        };
        let shift = self.init.offset + if self.init.lift { self.model.lift() } else { 0.0 };
        Ok(if shift != 0.0 { base.map_values(|v| v + shift) } else { base })
    }

    pub fn schedule(&self) -> OutputSchedule {
        let t = self.solver.t_end;
        OutputSchedule::uniform(t, self.output.diag_every, self.output.snapshot_every)
            .with_log_diagnostics(t, self.output.diag_log_count)
    }

    pub fn run_spec(&self) -> RunSpec {
        RunSpec {
            params: self.model,
            mobility: self.mobility,
            solver: self.solver.clone(),
            schedule: self.schedule(),
            center: self.center(),
            support_threshold: self.output.support_threshold.unwrap_or(self.model.support_threshold()),
        }
    }

    /// Canonical text; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let f = |v: f64| format!("{v:?}");
        let fl = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let ul = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let opt = |v: Option<f64>, word: &str| v.map(f).unwrap_or_else(|| word.to_string());
        let m = &self.model;
        let so = &self.solver;
        let o = &self.output;
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("grid.dim", self.grid.dim.to_string());
        put("grid.lengths", fl(&self.grid.lengths));
        put("grid.sizes", ul(&self.grid.sizes));
        put("model.n", f(m.n));
        put("model.s", f(m.s));
        put("model.alpha", f(m.alpha));
        put("model.beta", f(m.beta));
        put("model.eps", f(m.eps));
        put("model.delta", f(m.delta));
        put("model.gamma", f(m.gamma));
        put(
            "model.mobility",
            match self.mobility {
                Mobility::Regularized => "regularized".into(),
                Mobility::Constant(c) => f(c),
            },
        );
        put("init.family", self.init.family.name().into());
        match &self.init.family {
            InitFamily::Eigenmode(k) => put("init.mode", ul(k)),
            InitFamily::Table(t) => put("init.table", fl(t)),
            _ => {}
        }
        if let Some(c) = &self.init.center {
            put("init.center", fl(c));
        }
        put("init.r0", f(self.init.r0));
        put("init.amplitude", f(self.init.amplitude));
        put("init.edge_exponent", f(self.init.edge_exponent));
        put("init.offset", f(self.init.offset));
        put("init.lift", self.init.lift.to_string());
        put("solver.dt0", f(so.dt0));
        put("solver.t_end", f(so.t_end));
        put(
            "solver.stepper",
            match so.stepper {
                Stepper::Imex => "imex".into(),
                Stepper::Newton => "newton".into(),
            },
        );
        put("solver.stabilizer", opt(so.stabilizer, "auto"));
        put("solver.adaptive", so.adaptive.to_string());
        put("solver.dissipation_tol", f(so.dissipation_tol));
        put("solver.dealias", so.dealias.map(|b| b.to_string()).unwrap_or_else(|| "auto".into()));
        put("solver.u_min", opt(so.u_min, "none"));
        put("solver.dt_max", opt(so.dt_max, "none"));
        put("output.snapshot_every", f(o.snapshot_every));
        put("output.diag_every", f(o.diag_every));
        put("output.diag_log_count", o.diag_log_count.to_string());
        put("output.support_threshold", opt(o.support_threshold, "auto"));
        put("output.dir", o.dir.clone());
        put("output.run_id", o.run_id.clone());
        put("seed", self.seed.to_string());
        s
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Builds the grid and initial datum and integrates.
pub fn run_experiment(cfg: &ExperimentConfig) -> std::result::Result<Trajectory, RunFailure> {
    let spec = cfg.run_spec();
    let setup = cfg.grid().and_then(|g| cfg.initial_datum(&g));
    match setup {
        Ok(u0) => solver::run(&u0, &spec),
        Err(error) => Err(RunFailure {
            error,
            partial: Trajectory {
                grid: Grid::line(1.0, crate::spectral::MIN_NODES).expect("minimal grid"),
                params: cfg.model,
                records: Vec::new(),
                snapshots: Vec::new(),
                stats: Default::default(),
            },
        }),
    }
}

/// Which regularization parameters a ladder refines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LadderKind {
    /// `gamma = 10^-k`, with `eps` and `delta` as configured.
    Gamma,
    /// `eps = delta = 10^-k`, with `gamma = 0`.
    EpsDelta,
}

/// Configs for rungs `k = 1..=rungs`; run ids get a `-<kind>-k` suffix.
pub fn ladder_rungs(cfg: &ExperimentConfig, kind: LadderKind, rungs: usize) -> Vec<ExperimentConfig> {
    (1..=rungs)
        .map(|k| {
            let v = 10f64.powi(-(k as i32));
            let mut c = cfg.clone();
            let tag = match kind {
                LadderKind::Gamma => {
                    c.model.gamma = v;
                    "gamma"
                }
                LadderKind::EpsDelta => {
                    c.model.eps = v;
                    c.model.delta = v;
                    c.model.gamma = 0.0;
                    "epsdelta"
                }
            };
            c.output.run_id = format!("{}-{tag}-{k}", cfg.output.run_id);
            c
        })
        .collect()
}

/// `max_t |u_a(t) - u_b(t)|_{L^2}` over shared snapshot times.
pub fn trajectory_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.snapshots.len() != b.snapshots.len() || a.grid.len() != b.grid.len() {
        return Err(Error::arg("trajectories have different snapshot layouts"));
    }
    let h = a.grid.cell_volume();
    let mut out: f64 = 0.0;
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        if (sa.t - sb.t).abs() > 1e-12 * sa.t.abs().max(1.0) {
            return Err(Error::arg(format!("snapshot times {} and {} differ", sa.t, sb.t)));
        }
        let d2: f64 = sa.values.iter().zip(&sb.values).map(|(x, y)| (x - y).powi(2)).sum();
        out = out.max((h * d2).sqrt());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub kind: LadderKind,
    /// Parameter value of each rung.
    pub values: Vec<f64>,
    /// Distance between rungs `k` and `k + 1`.
    pub differences: Vec<f64>,
    pub decreasing: bool,
}

/// Runs every rung concurrently and tabulates successive differences.
pub fn run_ladder(
    cfg: &ExperimentConfig,
    kind: LadderKind,
    rungs: usize,
) -> std::result::Result<(LadderReport, Vec<Trajectory>), RunFailure> {
    let cfgs = ladder_rungs(cfg, kind, rungs);
    let trajs: Vec<Trajectory> =
        cfgs.par_iter().map(run_experiment).collect::<std::result::Result<_, _>>()?;
    let mut differences = Vec::new();
    for w in trajs.windows(2) {
        let d = trajectory_distance(&w[0], &w[1]).map_err(|error| RunFailure {
            error,
            partial: w[1].clone(),
        })?;
        differences.push(d);
    }
    let decreasing = differences.windows(2).all(|w| w[1] < w[0]);
    let values = (1..=rungs).map(|k| 10f64.powi(-(k as i32))).collect();
    Ok((LadderReport { kind, values, differences, decreasing }, trajs))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "grid.sizes = 64\ninit.family = bump\nsolver.t_end = 0.01\n";

    #[test]
    fn minimal_config_fills_defaults() {
        let p = parse_config(MINIMAL).unwrap();
        assert!(p.warnings.is_empty(), "{:?}", p.warnings);
        let c = &p.config;
        assert_eq!(c.grid.lengths, vec![1.0]);
        assert_eq!(c.model, ModelParams::default());
        assert_eq!(c.mobility, Mobility::Regularized);
        assert_eq!(c.solver.dt0, SolverConfig::default().dt0);
        assert_eq!(c.center(), vec![0.5]);
    }

    #[test]
    fn large_n_warns() {
        let p = parse_config(&format!("{MINIMAL}model.n = 5\nmodel.beta = 6\n")).unwrap();
        // d = 2s makes the existence range unbounded above; only the propagation range fails.
        let names: Vec<&str> = p.warnings.iter().map(|w| w.check.name()).collect();
        assert_eq!(names, vec!["propagation-range-n"]);
        let q = parse_config("grid.sizes = 8, 8
model.n = 5
model.beta = 6
init.family = bump
solver.t_end = 1
")
            .unwrap();
        assert!(q.warnings.iter().any(|w| w.check.name() == "existence-range-n"), "{:?}", q.warnings);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let line_of = |text: &str| match parse_config(text) {
            Err(Error::Config { line, .. }) => line,
            other => panic!("{other:?}"),
        };
        assert_eq!(line_of("grid.sizes = 64\nthis is not a pair\n"), 2);
        assert_eq!(line_of("# c\ngrid.sizes = 64\ngrid.colour = 3\n"), 3);
        assert_eq!(line_of("grid.sizes = 64\ninit.family = bump\nsolver.t_end = soon\n"), 3);
        assert_eq!(line_of("grid.sizes = 64\ninit.family = bump\n"), 2);
        assert_eq!(line_of(&format!("{MINIMAL}output.run_id = ../x\n")), 4);
        assert_eq!(line_of(&format!("{MINIMAL}grid.sizes = 32\n")), 4);
    }

    #[test]
    fn text_round_trip() {
        let text = "grid.sizes = 16, 8\ngrid.lengths = 2, 1\ninit.family = eigenmode\n\
                    init.mode = 1, 0\nmodel.mobility = 1\nsolver.t_end = 1e-3\nsolver.u_min = none\n\
                    output.support_threshold = 1e-3\nseed = 9\n";
        let a = parse_config(text).unwrap().config;
        let b = parse_config(&a.to_text()).unwrap().config;
        assert_eq!(a, b);
        assert_eq!(b.mobility, Mobility::Constant(1.0));
        assert_eq!(b.solver.u_min, None);
    }

    #[test]
    fn families_build() {
        let c = parse_config(&format!("{MINIMAL}init.amplitude = 256\ninit.lift = false\n"))
            .unwrap()
            .config;
        let g = c.grid().unwrap();
        let u = c.initial_datum(&g).unwrap();
        assert!((u.max() - 1.0).abs() < 3e-3);
        assert_eq!(u.min(), 0.0);
        let lifted = parse_config(MINIMAL).unwrap().config.initial_datum(&g).unwrap();
        assert!((lifted.min() - ModelParams::default().lift()).abs() < 1e-15);
        let table: Vec<String> = (0..64).map(|i| format!("{}", 1.0 + i as f64)).collect();
        let t = parse_config(&format!(
            "grid.sizes = 64\ninit.family = custom-table\ninit.table = {}\ninit.lift = false\nsolver.t_end = 1\n",
            table.join(",")
        ))
        .unwrap()
        .config;
        assert_eq!(t.initial_datum(&g).unwrap().values()[3], 4.0);
    }

    #[test]
    fn ladder_assigns_parameters() {
        let c = parse_config(MINIMAL).unwrap().config;
        let r = ladder_rungs(&c, LadderKind::EpsDelta, 3);
        assert_eq!(r.len(), 3);
        assert_eq!(r[2].model.eps, 1e-3);
        assert_eq!(r[2].model.delta, 1e-3);
        assert_eq!(r[1].output.run_id, "run-epsdelta-2");
        let g = ladder_rungs(&c, LadderKind::Gamma, 2);
        assert_eq!(g[1].model.gamma, 1e-2);
        assert_eq!(g[1].model.eps, c.model.eps);
    }
}
