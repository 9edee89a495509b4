//! Run directories: CSV tables, JSON report and a hashed manifest.

use std::fs;
use std::io;
use std::path::Path;

use fracthin::diagnostics::SupportTrace;
use fracthin::solver::Trajectory;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DIAGNOSTICS_HEADER: [&str; 9] = [
    "t",
    "mass",
    "energy_hs",
    "entropy_alpha",
    "dissipation_cum",
    "seminorm_hs1",
    "min_u",
    "max_u",
    "support_radius",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
    /// Data rows, header excluded; 0 for non-tabular files.
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    /// The run stopped early; the tables hold what was produced before.
    pub partial: bool,
    pub snapshot_count: usize,
    pub record_count: usize,
    pub artifacts: Vec<Artifact>,
}

/// A file to be written into a run directory.
pub struct Table {
    pub name: String,
    pub bytes: Vec<u8>,
    pub rows: usize,
}

impl Table {
    pub fn json(name: &str, value: &impl Serialize) -> io::Result<Self> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
        bytes.push(b'\n');
        Ok(Self { name: name.into(), bytes, rows: 0 })
    }

    pub fn text(name: &str, text: &str) -> Self {
        Self { name: name.into(), bytes: text.as_bytes().to_vec(), rows: 0 }
    }
}

pub fn csv_table(name: &str, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> io::Result<Table> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    let mut count = 0;
    for r in rows {
        w.write_record(&r)?;
        count += 1;
    }
    let bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
    Ok(Table { name: name.into(), bytes, rows: count })
}

pub fn snapshots_csv(traj: &Trajectory) -> io::Result<Table> {
    let grid = &traj.grid;
    let mut header = vec!["t", "x_index"];
    if grid.dim() == 2 {
        header.push("y_index");
    }
    header.push("u");
    let rows = traj.snapshots.iter().flat_map(|s| {
        s.values.iter().enumerate().map(move |(flat, v)| {
            let mut r = vec![s.t.to_string()];
            r.extend(grid.multi_index(flat).iter().map(|i| i.to_string()));
            r.push(v.to_string());
            r
        })
    });
    csv_table("snapshots.csv", &header, rows)
}

pub fn diagnostics_csv(traj: &Trajectory) -> io::Result<Table> {
    let rows = traj.records.iter().map(|r| {
        [r.t, r.mass, r.energy_hs, r.entropy_alpha, r.dissipation_cum, r.seminorm_hs1, r.min_u, r.max_u, r.support_radius]
            .iter()
            .map(f64::to_string)
            .collect()
    });
    csv_table("diagnostics.csv", &DIAGNOSTICS_HEADER, rows)
}

pub fn trace_csv(trace: &SupportTrace) -> io::Result<Table> {
    let rows = trace.points.iter().map(|(t, d)| vec![t.to_string(), d.to_string()]);
    csv_table("trace.csv", &["t", "support_radius"], rows)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes the trajectory tables, `report.json`, any extra tables and
/// finally `manifest.json` listing all of them with their hashes.
pub fn write_outputs(
    traj: &Trajectory,
    report: &impl Serialize,
    extra: Vec<Table>,
    dir: &Path,
    run_id: &str,
    partial: bool,
) -> io::Result<Manifest> {
    let mut tables = vec![snapshots_csv(traj)?, diagnostics_csv(traj)?, Table::json("report.json", report)?];
    tables.extend(extra);
    let mut m = write_tables(dir, run_id, tables)?;
    m.partial = partial;
    m.snapshot_count = traj.snapshots.len();
    m.record_count = traj.records.len();
    let t = Table::json("manifest.json", &m)?;
    fs::write(dir.join(&t.name), &t.bytes)?;
    Ok(m)
}

/// Writes `tables` into `dir` with a manifest of their hashes.
pub fn write_tables(dir: &Path, run_id: &str, tables: Vec<Table>) -> io::Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut artifacts = Vec::with_capacity(tables.len());
    for t in &tables {
        fs::write(dir.join(&t.name), &t.bytes)?;
        artifacts.push(Artifact {
            file: t.name.clone(),
            sha256: sha256_hex(&t.bytes),
            bytes: t.bytes.len(),
            rows: t.rows,
        });
    }
    let manifest = Manifest {
        run_id: run_id.to_string(),
        partial: false,
        snapshot_count: 0,
        record_count: 0,
        artifacts,
    };
    let m = Table::json("manifest.json", &manifest)?;
    fs::write(dir.join(&m.name), &m.bytes)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fracthin::solver::{RunStats, Snapshot};
    use fracthin::{Grid, ModelParams};

    fn traj(snaps: usize) -> Trajectory {
        let g = Grid::new(2, &[1.0, 1.0], &[8, 8]).unwrap();
        Trajectory {
            grid: g.clone(),
            params: ModelParams { d: 2, ..ModelParams::default() },
            records: vec![],
            snapshots: (0..snaps).map(|j| Snapshot { t: j as f64, values: vec![1.5; 64] }).collect(),
            stats: RunStats::default(),
        }
    }

    #[test]
    fn snapshot_table_layout() {
        let t = snapshots_csv(&traj(2)).unwrap();
        assert_eq!(t.rows, 128);
        let text = String::from_utf8(t.bytes).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,x_index,y_index,u"));
        assert_eq!(lines.next(), Some("0,0,0,1.5"));
        assert_eq!(lines.nth(8), Some("0,1,1,1.5"));
    }

    #[test]
    fn empty_trajectory_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_outputs(&traj(0), &serde_json::json!({}), vec![], dir.path(), "empty", false)
            .unwrap();
        assert_eq!(m.snapshot_count, 0);
        assert_eq!(m.artifacts[0].rows, 0);
        assert!(dir.path().join("manifest.json").exists());
        let text = fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
        assert_eq!(text.trim(), DIAGNOSTICS_HEADER.join(","));
    }

    #[test]
    fn hash_is_of_file_contents() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_outputs(&traj(1), &serde_json::json!({"a": 1}), vec![], dir.path(), "h", false)
            .unwrap();
        for a in &m.artifacts {
            let bytes = fs::read(dir.path().join(&a.file)).unwrap();
            assert_eq!(sha256_hex(&bytes), a.sha256);
        }
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
