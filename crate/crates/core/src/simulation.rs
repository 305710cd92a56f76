//! End-to-end execution of a scenario: field, trajectories and diagnostics.

use crate::analysis::{CrossingTracker, Diagnostics, DiagnosticsRecord};
use crate::dynamics::{propagate_with_stride, EngineMode, FieldParams, Snapshot};
use crate::error::{Error, Result};
use crate::scenario::ScenarioConfig;
use crate::trajectories::{
    newtonian_ensemble, seed_positions, GuidedEnsemble, Provenance, TrajectoryEnsemble,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationOptions {
    /// Integrate trajectories guided by the propagated field.
    pub guided: bool,
    /// Integrate Newtonian trajectories from the same seeds.
    pub newtonian: bool,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            guided: true,
            newtonian: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub config: ScenarioConfig,
    pub seeds: Vec<f64>,
    /// Recorded field snapshots; empty for Newton-only scenarios.
    pub snapshots: Vec<Snapshot>,
    pub guided: Option<TrajectoryEnsemble>,
    pub newtonian: Option<TrajectoryEnsemble>,
    pub diagnostics: Vec<DiagnosticsRecord>,
}

impl SimulationRun {
    pub fn ensembles(&self) -> impl Iterator<Item = &TrajectoryEnsemble> {
        self.guided.iter().chain(self.newtonian.iter())
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time()).collect()
    }
}

/// Runs a scenario.
///
/// Trajectories are advanced on every propagation step, while snapshots,
/// positions and diagnostics are kept only on the configured schedule.
pub fn simulate(config: &ScenarioConfig, options: SimulationOptions) -> Result<SimulationRun> {
    config.validate()?;
    if let Some(seeds) = &config.seeds {
        let newtonian = newtonian_ensemble(config, seeds, config.initial_velocity())?;
        return Ok(SimulationRun {
            config: config.clone(),
            seeds: seeds.clone(),
            snapshots: Vec::new(),
            guided: None,
            newtonian: Some(newtonian),
            diagnostics: Vec::new(),
        });
    }

    let schedule = config.snapshot_steps();
    let params = FieldParams::from_config(config);
    let provenance = Provenance::guided_by(EngineMode::from_config(config));
    let diagnostics = Diagnostics::new(config)?;
    let mut stream = propagate_with_stride(config, 1)?;

    let first = stream
        .next()
        .ok_or_else(|| Error::Config("empty propagation".into()))??;
    let seeds = seed_positions(&first.field, config.n_traj)?;
    let mut guide = options
        .guided
        .then(|| GuidedEnsemble::new(first.field.grid, seeds.clone(), provenance, params));
    let mut tracker = CrossingTracker::new();
    let mut snapshots = Vec::with_capacity(schedule.len());
    let mut records = Vec::with_capacity(schedule.len());
    let mut next_record = 0;

    let mut handle = |snap: Snapshot, guide: &mut Option<GuidedEnsemble>| -> Result<()> {
        if let Some(g) = guide.as_mut() {
            g.advance_to(&snap.field)?;
        }
        if schedule.get(next_record) == Some(&snap.step) {
            next_record += 1;
            if let Some(g) = guide.as_mut() {
                g.record();
                tracker.push(g.positions());
            }
            records.push(diagnostics.record(&snap, tracker.count()));
            snapshots.push(snap);
        }
        Ok(())
    };
    handle(first, &mut guide)?;
    for snap in stream {
        handle(snap?, &mut guide)?;
    }

    let newtonian = if options.newtonian {
        Some(newtonian_ensemble(
            config,
            &seeds,
            config.initial_velocity(),
        )?)
    } else {
        None
    };
    Ok(SimulationRun {
        config: config.clone(),
        seeds,
        snapshots,
        guided: guide.map(GuidedEnsemble::finish),
        newtonian,
        diagnostics: records,
    })
}
