//! Deviation statistics between two run directories.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use wavesim_core::analysis::crossing_count;
use wavesim_core::trajectories::{Provenance, TrajectoryEnsemble};
use wavesim_core::Error;

use crate::output::DENSITY_FILE;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldDeviation {
    pub max_density: f64,
    pub max_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDeviation {
    pub family_a: String,
    pub family_b: String,
    pub max_deviation: f64,
    /// `max_deviation` over the largest displacement `|x(t) - x(0)|` of either family.
    pub relative_to_path: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyCrossings {
    pub run: String,
    pub family: String,
    pub crossings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub density: Option<FieldDeviation>,
    pub trajectories: Vec<PairDeviation>,
    pub crossings: Vec<FamilyCrossings>,
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(d) = &self.density {
            writeln!(f, "density max_abs_deviation {:e}", d.max_density)?;
            writeln!(f, "q max_abs_deviation {:e}", d.max_q)?;
        }
        for p in &self.trajectories {
            writeln!(
                f,
                "trajectories {} vs {} max_deviation {:e} relative_to_path {:e}",
                p.family_a, p.family_b, p.max_deviation, p.relative_to_path
            )?;
        }
        for c in &self.crossings {
            writeln!(f, "crossings {}:{} {}", c.run, c.family, c.crossings)?;
        }
        Ok(())
    }
}

type Rows = Vec<Vec<f64>>;

fn read_table(path: &Path) -> anyhow::Result<(Vec<String>, Rows)> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    let header = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn mismatch(msg: String) -> anyhow::Error {
    Error::Mismatch(msg).into()
}

fn same_axis(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn compare_density(a: &Path, b: &Path) -> anyhow::Result<Option<FieldDeviation>> {
    let (pa, pb) = (a.join(DENSITY_FILE), b.join(DENSITY_FILE));
    match (pa.exists(), pb.exists()) {
        (false, false) => return Ok(None),
        (true, true) => {}
        _ => return Err(mismatch("only one run has a density field".into())),
    }
    let (_, ra) = read_table(&pa)?;
    let (_, rb) = read_table(&pb)?;
    if ra.len() != rb.len() {
        return Err(mismatch(format!(
            "density sample counts differ ({} vs {})",
            ra.len(),
            rb.len()
        )));
    }
    let mut dev = FieldDeviation {
        max_density: 0.0,
        max_q: 0.0,
    };
    for (x, y) in ra.iter().zip(&rb) {
        if !(same_axis(x[0], y[0]) && same_axis(x[1], y[1])) {
            return Err(mismatch(format!(
                "density axes differ at (t, x) = ({}, {}) vs ({}, {})",
                x[0], x[1], y[0], y[1]
            )));
        }
        dev.max_density = dev.max_density.max((x[2] - y[2]).abs());
        dev.max_q = dev.max_q.max((x[3] - y[3]).abs());
    }
    Ok(Some(dev))
}

/// Trajectory files in `dir`, sorted by family name.
pub fn trajectory_files(dir: &Path) -> anyhow::Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in
        std::fs::read_dir(dir).map_err(|e| anyhow::anyhow!("cannot list {}: {e}", dir.display()))?
    {
        let path = entry?.path();
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default();
        if let Some(family) = name
            .strip_prefix("trajectories_")
            .and_then(|n| n.strip_suffix(".csv"))
        {
            out.push((family.to_string(), path.clone()));
        }
    }
    out.sort();
    Ok(out)
}

pub fn read_ensemble(family: &str, path: &Path) -> anyhow::Result<TrajectoryEnsemble> {
    let provenance: Provenance = family.parse()?;
    let (header, rows) = read_table(path)?;
    if header.first().map(String::as_str) != Some("t") {
        return Err(Error::Config(format!("{}: first column must be t", path.display())).into());
    }
    let n = header.len() - 1;
    Ok(TrajectoryEnsemble {
        provenance,
        times: rows.iter().map(|r| r[0]).collect(),
        positions: rows.iter().map(|r| r[1..].to_vec()).collect(),
        velocities: None,
        clamped: vec![false; n],
    })
}

fn max_displacement(e: &TrajectoryEnsemble) -> f64 {
    let Some(first) = e.positions.first() else {
        return 0.0;
    };
    e.positions
        .iter()
        .flat_map(|row| row.iter().zip(first).map(|(x, x0)| (x - x0).abs()))
        .fold(0.0, f64::max)
}

pub fn compare(a: &Path, b: &Path) -> anyhow::Result<Report> {
    let density = compare_density(a, b)?;
    let load = |dir: &Path| -> anyhow::Result<Vec<TrajectoryEnsemble>> {
        trajectory_files(dir)?
            .iter()
            .map(|(family, path)| read_ensemble(family, path))
            .collect()
    };
    let (ea, eb) = (load(a)?, load(b)?);
    if ea.is_empty() || eb.is_empty() {
        return Err(mismatch(
            "both runs need at least one trajectory file".into(),
        ));
    }
    let reference = &ea[0];
    for e in ea.iter().chain(&eb) {
        let times_match = e.times.len() == reference.times.len()
            && e.times
                .iter()
                .zip(&reference.times)
                .all(|(s, t)| same_axis(*s, *t));
        if !times_match {
            return Err(mismatch(format!(
                "trajectory time axes differ ({} has {} samples, {} has {})",
                reference.provenance,
                reference.n_times(),
                e.provenance,
                e.n_times()
            )));
        }
        if e.n_traj() != reference.n_traj() {
            return Err(mismatch(format!(
                "trajectory counts differ ({} vs {})",
                reference.n_traj(),
                e.n_traj()
            )));
        }
    }

    let mut trajectories = Vec::new();
    for x in &ea {
        for y in &eb {
            let max_deviation = x
                .positions
                .iter()
                .zip(&y.positions)
                .flat_map(|(p, q)| p.iter().zip(q).map(|(u, v)| (u - v).abs()))
                .fold(0.0, f64::max);
            let path = max_displacement(x).max(max_displacement(y));
            trajectories.push(PairDeviation {
                family_a: x.provenance.to_string(),
                family_b: y.provenance.to_string(),
                max_deviation,
                relative_to_path: match (path > 0.0, max_deviation > 0.0) {
                    (true, _) => max_deviation / path,
                    (false, false) => 0.0,
                    (false, true) => f64::INFINITY,
                },
            });
        }
    }
    let crossings = [("a", &ea), ("b", &eb)]
        .into_iter()
        .flat_map(|(run, es)| {
            es.iter().map(move |e| FamilyCrossings {
                run: run.to_string(),
                family: e.provenance.to_string(),
                crossings: crossing_count(e),
            })
        })
        .collect();
    Ok(Report {
        density,
        trajectories,
        crossings,
    })
}
