//! Command-line surface of the simulator: experiment runs, parameter
//! ladders, support-growth and waiting-time studies, and self-checks.

pub mod output;
pub mod verify;

use std::ffi::OsString;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use fracthin::config::{self, ExperimentConfig, LadderKind, ParsedConfig};
use fracthin::diagnostics::{self, FitWindow, PropagationFit, SupportTrace};
use fracthin::solver::{RunFailure, RunStats, Trajectory};
use log::info;
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{Table, DIAGNOSTICS_HEADER};
use crate::verify::Check;

#[derive(Debug, Parser)]
#[command(name = "fracthin", version, about = "Nonlocal thin film simulator")]
pub struct Cli {
    /// Output root; overrides `output.dir` from the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one config and write its run directory.
    Run { config: PathBuf },
    /// Regularization ladder with successive trajectory differences.
    Sweep {
        config: PathBuf,
        #[arg(long, default_value_t = 4)]
        rungs: usize,
        #[arg(long, value_enum, default_value_t = Ladder::Both)]
        ladder: Ladder,
    },
    /// Run, then fit the support growth exponent.
    Fsp { config: PathBuf },
    /// Run, then detect the waiting time and scan the edge condition.
    Wtp {
        config: PathBuf,
        /// Growth in cells that counts as the front moving.
        #[arg(long, default_value_t = 1.0)]
        tol_cells: f64,
    },
    VerifySpectral {
        #[arg(long, default_value_t = 128)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    VerifyChainrule,
    VerifyLemmas {
        #[arg(long, default_value_t = 100)]
        draws: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Summarize an existing run directory.
    Report { dir: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Ladder {
    Gamma,
    EpsDelta,
    Both,
}

#[derive(Debug)]
pub enum Failure {
    Io(String),
    Config(String),
    Solver(String),
    Verification(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Verification(_) => 4,
        }
    }

    pub fn to_json(&self) -> Value {
        let (kind, message) = match self {
            Failure::Io(m) => ("io", m),
            Failure::Config(m) => ("config", m),
            Failure::Solver(m) => ("solver", m),
            Failure::Verification(m) => ("verification", m),
        };
        json!({ "error": kind, "code": self.code(), "message": message })
    }
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

/// Parses `argv` and runs the subcommand; returns the exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let f = Failure::Config(e.to_string());
            eprintln!("{}", f.to_json());
            return f.code();
        }
    };
    match execute(&cli) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
            0
        }
        Err(f) => {
            eprintln!("{}", f.to_json());
            f.code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<Value, Failure> {
    match &cli.command {
        Command::Run { config } => {
            let p = load(config)?;
            let dir = run_dir(cli, &p.config, &p.config.output.run_id);
            run_and_write(&p, &dir, |traj, base| Ok((base, traj_tables(traj))))
        }
        Command::Fsp { config } => {
            let p = load(config)?;
            let dir = run_dir(cli, &p.config, &p.config.output.run_id);
            let cfg = p.config.clone();
            run_and_write(&p, &dir, |traj, mut base| {
                let thr = cfg.run_spec().support_threshold;
                let trace = SupportTrace::from_records(&traj.records, thr, cfg.init.r0).monotone();
                let window = FitWindow::for_grid(&traj.grid, &cfg.center());
                let fit = diagnostics::fit_propagation_exponent(&trace, &cfg.model, &window);
                let within = match &fit {
                    PropagationFit::Fitted(f) => f.relative_error <= 0.2,
                    PropagationFit::WaitingOnly { .. } => false,
                };
                base["fit"] = json!(fit);
                base["target_exponent"] = json!(cfg.model.propagation_exponent());
                base["exponent_within_20_percent"] = json!(within);
                Ok((base, vec![output::trace_csv(&trace).map_err(io_err(Path::new("trace.csv")))?]))
            })
        }
        Command::Wtp { config, tol_cells } => {
            let p = load(config)?;
            let dir = run_dir(cli, &p.config, &p.config.output.run_id);
            let cfg = p.config.clone();
            let tol = *tol_cells;
            run_and_write(&p, &dir, |traj, mut base| {
                let thr = cfg.run_spec().support_threshold;
                let trace = SupportTrace::from_records(&traj.records, thr, cfg.init.r0).monotone();
                let h = traj.grid.min_spacing();
                let t0 = diagnostics::detect_waiting_time(&trace, cfg.init.r0, tol, h);
                let cadence = cfg.output.diag_every;
                base["waiting_time"] = json!(t0);
                base["cadence"] = json!(cadence);
                base["waiting_time_positive"] = json!(t0 >= cadence);
                let u0 = cfg
                    .grid()
                    .and_then(|g| cfg.initial_datum(&g))
                    .map_err(|e| Failure::Config(e.to_string()))?;
                base["condition_scan"] = match diagnostics::wtp_condition_scan(
                    &u0,
                    cfg.init.r0,
                    cfg.init.edge_exponent,
                    &cfg.model,
                    &cfg.center(),
                ) {
                    Ok(scan) => json!(scan),
                    Err(e) => json!({ "skipped": e.to_string() }),
                };
                Ok((base, vec![output::trace_csv(&trace).map_err(io_err(Path::new("trace.csv")))?]))
            })
        }
        Command::Sweep { config, rungs, ladder } => sweep(cli, config, *rungs, *ladder),
        Command::VerifySpectral { n, seed } => {
            checks(verify::spectral_checks(*n, *seed).map_err(|e| Failure::Verification(e.to_string()))?)
        }
        Command::VerifyChainrule => {
            checks(verify::chainrule_checks().map_err(|e| Failure::Verification(e.to_string()))?)
        }
        Command::VerifyLemmas { draws, seed } => {
            checks(verify::lemma_checks(*draws, *seed).map_err(|e| Failure::Verification(e.to_string()))?)
        }
        Command::Report { dir } => report(dir),
    }
}

fn checks(list: Vec<Check>) -> Result<Value, Failure> {
    for c in &list {
        info!("{} {}: {:e} (tolerance {:e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
    }
    if verify::all_pass(&list) {
        Ok(json!({ "pass": true, "checks": list }))
    } else {
        let failed: Vec<&str> = list.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        println!("{}", serde_json::to_string_pretty(&json!({ "pass": false, "checks": list })).unwrap_or_default());
        Err(Failure::Verification(format!("failed checks: {}", failed.join(", "))))
    }
}

pub fn load(path: &Path) -> Result<ParsedConfig, Failure> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let p = config::parse_config(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    for w in &p.warnings {
        log::warn!("{w}");
    }
    Ok(p)
}

fn run_dir(cli: &Cli, cfg: &ExperimentConfig, run_id: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir)).join(run_id)
}

#[derive(Serialize)]
struct RunSummary<'a> {
    run_id: &'a str,
    warnings: Vec<String>,
    t_final: f64,
    stats: RunStats,
    mass_drift: f64,
    energy_residual: f64,
    entropy_constant: f64,
    partial: bool,
    error: Option<String>,
}

fn summary(p: &ParsedConfig, traj: &Trajectory, error: Option<String>) -> Value {
    let r = &traj.records;
    let mass_drift = match (r.first(), r.last()) {
        (Some(a), Some(b)) if a.mass != 0.0 => (b.mass - a.mass).abs() / a.mass.abs(),
        _ => 0.0,
    };
    json!(RunSummary {
        run_id: &p.config.output.run_id,
        warnings: p.warnings.iter().map(|w| w.to_string()).collect(),
        t_final: r.last().map(|x| x.t).unwrap_or(0.0),
        stats: traj.stats,
        mass_drift,
        energy_residual: diagnostics::energy_inequality_residual(r),
        entropy_constant: diagnostics::entropy_inequality_residual(r, &traj.params),
        partial: error.is_some(),
        error,
    })
}

fn traj_tables(_traj: &Trajectory) -> Vec<Table> {
    Vec::new()
}

/// Runs `p`, lets `post` extend the report, and writes the run directory.
/// A solver abort still writes the partial trajectory before failing.
fn run_and_write(
    p: &ParsedConfig,
    dir: &Path,
    post: impl FnOnce(&Trajectory, Value) -> Result<(Value, Vec<Table>), Failure>,
) -> Result<Value, Failure> {
    info!("running {} into {}", p.config.output.run_id, dir.display());
    let cfg_table = Table::text("config.txt", &p.config.to_text());
    match config::run_experiment(&p.config) {
        Ok(traj) => {
            let base = summary(p, &traj, None);
            let (report, mut extra) = post(&traj, base)?;
            extra.push(cfg_table);
            let m = output::write_outputs(&traj, &report, extra, dir, &p.config.output.run_id, false)
                .map_err(io_err(dir))?;
            Ok(json!({ "dir": dir, "report": report, "manifest": m }))
        }
        Err(RunFailure { error, partial }) => {
            let report = summary(p, &partial, Some(error.to_string()));
            output::write_outputs(&partial, &report, vec![cfg_table], dir, &p.config.output.run_id, true)
                .map_err(io_err(dir))?;
            Err(match error {
                fracthin::Error::SolverAbort { .. } | fracthin::Error::NonFinite(_) => {
                    Failure::Solver(error.to_string())
                }
                other => Failure::Config(other.to_string()),
            })
        }
    }
}

fn sweep(cli: &Cli, path: &Path, rungs: usize, ladder: Ladder) -> Result<Value, Failure> {
    if rungs < 2 {
        return Err(Failure::Config("a ladder needs at least 2 rungs".into()));
    }
    let p = load(path)?;
    let kinds = match ladder {
        Ladder::Gamma => vec![LadderKind::Gamma],
        Ladder::EpsDelta => vec![LadderKind::EpsDelta],
        Ladder::Both => vec![LadderKind::Gamma, LadderKind::EpsDelta],
    };
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for kind in kinds {
        info!("ladder {kind:?} with {rungs} rungs");
        let (rep, trajs) = config::run_ladder(&p.config, kind, rungs)
            .map_err(|f| Failure::Solver(f.to_string()))?;
        for (c, t) in config::ladder_rungs(&p.config, kind, rungs).iter().zip(&trajs) {
            let parsed = ParsedConfig { config: c.clone(), warnings: c.model.warnings() };
            let dir = run_dir(cli, c, &c.output.run_id);
            output::write_outputs(t, &summary(&parsed, t, None), vec![Table::text("config.txt", &c.to_text())], &dir, &c.output.run_id, false)
                .map_err(io_err(&dir))?;
        }
        for (k, v) in rep.values.iter().enumerate() {
            let diff = rep.differences.get(k).map(|d| d.to_string()).unwrap_or_default();
            rows.push(vec![format!("{kind:?}"), (k + 1).to_string(), v.to_string(), diff]);
        }
        reports.push(rep);
    }
    let id = format!("{}-sweep", p.config.output.run_id);
    let dir = run_dir(cli, &p.config, &id);
    let report = json!({ "ladders": reports });
    let table = output::csv_table("sweep.csv", &["ladder", "rung", "value", "difference_to_next"], rows.into_iter())
        .map_err(io_err(&dir))?;
    let m = output::write_tables(&dir, &id, vec![table, Table::json("report.json", &report).map_err(io_err(&dir))?])
        .map_err(io_err(&dir))?;
    Ok(json!({ "dir": dir, "report": report, "manifest": m }))
}

fn report(dir: &Path) -> Result<Value, Failure> {
    let path = dir.join("diagnostics.csv");
    let mut rdr = csv::Reader::from_path(&path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != DIAGNOSTICS_HEADER {
        return Err(Failure::Io(format!("{}: unexpected header {header:?}", path.display())));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        let row: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        rows.push(row.map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?);
    }
    let (Some(first), Some(last)) = (rows.first(), rows.last()) else {
        return Ok(json!({ "rows": 0 }));
    };
    let e0 = first[2];
    let energy_residual = rows
        .iter()
        .map(|r| (r[2] + 2.0 * r[4] - e0) / if e0 > 0.0 { e0 } else { 1.0 })
        .fold(0.0, f64::max);
    let summary = json!({
        "rows": rows.len(),
        "t_final": last[0],
        "mass_drift": if first[1] != 0.0 { (last[1] - first[1]).abs() / first[1].abs() } else { 0.0 },
        "energy_nonincreasing": rows.windows(2).all(|w| w[1][2] <= w[0][2] * (1.0 + 1e-12)),
        "energy_residual": energy_residual,
        "min_u": rows.iter().map(|r| r[6]).fold(f64::INFINITY, f64::min),
        "final_support_radius": last[8],
    });
    let md = format!(
        "# Run summary\n\n| quantity | value |\n|---|---|\n| records | {} |\n| final time | {} |\n| mass drift | {:e} |\n| energy residual | {:e} |\n| final support radius | {} |\n",
        rows.len(),
        last[0],
        summary["mass_drift"].as_f64().unwrap_or(0.0),
        energy_residual,
        last[8]
    );
    fs::write(dir.join("summary.md"), md).map_err(io_err(dir))?;
    Ok(summary)
}
