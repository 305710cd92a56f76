use std::path::Path;
use std::time::Instant;

use log::info;
use wavesim_core::{simulate, ScenarioConfig, SimulationOptions};

use crate::output::{self, FileEntry, Manifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub full_density: bool,
}

/// Simulates `config` and writes every output file plus the manifest into `out`.
pub fn run(config: &ScenarioConfig, out: &Path, options: RunOptions) -> anyhow::Result<Manifest> {
    config.validate()?;
    let started = Instant::now();
    info!(
        "running {} ({} engine, {} steps, {} trajectories)",
        config.name,
        config.engine,
        config.n_steps(),
        config.n_traj
    );
    let result = simulate(config, SimulationOptions::default())?;

    std::fs::create_dir_all(out)
        .map_err(|e| anyhow::anyhow!("cannot create {}: {e}", out.display()))?;
    let mut files: Vec<FileEntry> = Vec::new();
    if !result.snapshots.is_empty() {
        files.push(output::write_density(
            out,
            &result.snapshots,
            options.full_density,
        )?);
    }
    for ensemble in result.ensembles() {
        files.push(output::write_trajectories(out, ensemble)?);
    }
    if !result.diagnostics.is_empty() {
        files.push(output::write_diagnostics(out, &result.diagnostics)?);
    }

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        full_density: options.full_density,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        files,
    };
    manifest.write(out)?;
    info!(
        "wrote {} files to {} in {:.2} s",
        manifest.files.len() + 1,
        out.display(),
        manifest.wall_time_seconds
    );
    Ok(manifest)
}
