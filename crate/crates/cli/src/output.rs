//! CSV files and the run manifest.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wavesim_core::analysis::DiagnosticsRecord;
use wavesim_core::dynamics::Snapshot;
use wavesim_core::trajectories::TrajectoryEnsemble;
use wavesim_core::ScenarioConfig;

/// Largest number of x samples per snapshot in a default `density.csv`.
pub const MAX_DENSITY_COLUMNS: usize = 512;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DENSITY_FILE: &str = "density.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trajectory_file_name(provenance: &str) -> String {
    format!("trajectories_{provenance}.csv")
}

/// Hashes everything written through it.
struct HashingWriter<W> {
    inner: W,
    hasher: Sha256,
    bytes: u64,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        self.bytes += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

fn write_csv(
    dir: &Path,
    name: &str,
    body: impl FnOnce(&mut csv::Writer<&mut HashingWriter<BufWriter<File>>>) -> csv::Result<()>,
) -> anyhow::Result<FileEntry> {
    let path = dir.join(name);
    let file = File::create(&path)
        .map_err(|e| anyhow::anyhow!("cannot create {}: {e}", path.display()))?;
    let mut hw = HashingWriter {
        inner: BufWriter::new(file),
        hasher: Sha256::new(),
        bytes: 0,
    };
    {
        let mut w = csv::Writer::from_writer(&mut hw);
        body(&mut w)?;
        w.flush()?;
    }
    hw.flush()?;
    Ok(FileEntry {
        name: name.to_string(),
        bytes: hw.bytes,
        sha256: format!("{:x}", hw.hasher.finalize()),
    })
}

/// Long-format density: one row per (snapshot, sampled x).
pub fn write_density(dir: &Path, snapshots: &[Snapshot], full: bool) -> anyhow::Result<FileEntry> {
    write_csv(dir, DENSITY_FILE, |w| {
        w.write_record(["t", "x", "density", "q"])?;
        for snap in snapshots {
            let g = snap.field.grid;
            let stride = if full {
                1
            } else {
                g.n_points().div_ceil(MAX_DENSITY_COLUMNS)
            };
            let t = fmt_f64(snap.time());
            for k in (0..g.n_points()).step_by(stride) {
                w.write_record([
                    t.as_str(),
                    &fmt_f64(g.x(k)),
                    &fmt_f64(snap.field.amplitudes[k].norm_sqr()),
                    &fmt_f64(snap.q.values[k]),
                ])?;
            }
        }
        Ok(())
    })
}

pub fn write_trajectories(dir: &Path, ensemble: &TrajectoryEnsemble) -> anyhow::Result<FileEntry> {
    write_csv(
        dir,
        &trajectory_file_name(ensemble.provenance.as_str()),
        |w| {
            let header: Vec<String> = std::iter::once("t".to_string())
                .chain((1..=ensemble.n_traj()).map(|i| format!("x{i}")))
                .collect();
            w.write_record(&header)?;
            for (t, row) in ensemble.times.iter().zip(&ensemble.positions) {
                let record: Vec<String> = std::iter::once(*t)
                    .chain(row.iter().copied())
                    .map(fmt_f64)
                    .collect();
                w.write_record(&record)?;
            }
            Ok(())
        },
    )
}

pub fn write_diagnostics(dir: &Path, records: &[DiagnosticsRecord]) -> anyhow::Result<FileEntry> {
    write_csv(dir, DIAGNOSTICS_FILE, |w| {
        w.write_record([
            "t",
            "norm",
            "mean_x",
            "width",
            "e_classical",
            "e_quantum",
            "transmission_fraction",
            "rosen_diagnostic",
            "crossing_count",
        ])?;
        for r in records {
            w.write_record([
                fmt_f64(r.time),
                fmt_f64(r.norm),
                fmt_f64(r.mean_x),
                fmt_f64(r.width),
                fmt_f64(r.e_classical),
                fmt_f64(r.e_quantum),
                r.transmission_fraction.map(fmt_f64).unwrap_or_default(),
                fmt_f64(r.rosen_diagnostic),
                r.crossing_count_to_date.to_string(),
            ])?;
        }
        Ok(())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: ScenarioConfig,
    pub full_density: bool,
    pub wall_time_seconds: f64,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> anyhow::Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> anyhow::Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut hasher = Sha256::new();
    io::copy(&mut File::open(path)?, &mut hasher)?;
    Ok(format!("{:x}", hasher.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0, -2.5] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
        }
    }

    #[test]
    fn hashing_writer_matches_file_digest() {
        let dir = tempfile::tempdir().unwrap();
        let entry = write_csv(dir.path(), "a.csv", |w| {
            w.write_record(["t", "x1"])?;
            w.write_record(["0", "1"])
        })
        .unwrap();
        let path = dir.path().join("a.csv");
        assert_eq!(entry.sha256, sha256_file(&path).unwrap());
        assert_eq!(entry.bytes, std::fs::metadata(&path).unwrap().len());
        assert_eq!(std::fs::read_to_string(path).unwrap(), "t,x1\n0,1\n");
    }
}
