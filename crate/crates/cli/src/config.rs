//! TOML scenario files.
//!
//! A file either starts from a shipped preset (`preset = "barrier_low"`) and
//! overrides some of its values, or describes a scenario from scratch, in
//! which case every required key must be present.

use std::path::Path;

use serde::Deserialize;
use wavesim_core::scenario::{GridSpec, InitialStateSpec, PacketKind, PotentialSpec};
use wavesim_core::{preset, EngineKind, Error, Result, ScenarioConfig};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<String>,
    pub name: Option<String>,
    #[serde(default)]
    pub grid: GridSection,
    pub potential: Option<PotentialSpec>,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub engine: EngineSection,
    #[serde(default)]
    pub physics: PhysicsSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub trajectories: TrajectorySection,
    #[serde(default)]
    pub numerics: NumericsSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_points: Option<usize>,
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub kind: Option<PacketKind>,
    pub sigma: Option<f64>,
    pub x0: Option<f64>,
    pub k0: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    pub kind: Option<EngineKind>,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub hbar: Option<f64>,
    pub mass: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub snapshot_stride: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    pub count: Option<usize>,
    pub seeds: Option<Vec<f64>>,
    pub v0: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    pub smoothing_window: Option<usize>,
    pub density_floor: Option<f64>,
}

pub fn load(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse(text: &str) -> Result<ScenarioConfig> {
    let file: ConfigFile =
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    file.resolve()
}

fn required<T>(value: Option<T>, base: Option<T>, key: &str) -> Result<T> {
    value
        .or(base)
        .ok_or_else(|| Error::Config(format!("missing {key} (and no preset to inherit it from)")))
}

impl ConfigFile {
    /// Overlays the file onto its preset, or builds the scenario from the file alone.
    pub fn resolve(self) -> Result<ScenarioConfig> {
        let base = self.preset.as_deref().map(preset).transpose()?;
        let b = base.as_ref();

        let grid = GridSpec {
            n_points: required(
                self.grid.n_points,
                b.map(|c| c.grid.n_points),
                "[grid] n_points",
            )?,
            x_min: required(self.grid.x_min, b.map(|c| c.grid.x_min), "[grid] x_min")?,
            x_max: required(self.grid.x_max, b.map(|c| c.grid.x_max), "[grid] x_max")?,
        };
        let potential = self
            .potential
            .or(b.map(|c| c.potential))
            .unwrap_or(PotentialSpec::Free);
        let bi = b.map(|c| c.initial);
        let initial = InitialStateSpec {
            kind: self
                .initial
                .kind
                .or(bi.map(|i| i.kind))
                .unwrap_or(PacketKind::Gaussian),
            sigma: required(self.initial.sigma, bi.map(|i| i.sigma), "[initial] sigma")?,
            x0: required(self.initial.x0, bi.map(|i| i.x0), "[initial] x0")?,
            k0: required(self.initial.k0, bi.map(|i| i.k0), "[initial] k0")?,
        };
        let engine = self
            .engine
            .kind
            .or(b.map(|c| c.engine))
            .unwrap_or(EngineKind::Quantum);
        let n_traj = match (&self.trajectories.seeds, self.trajectories.count) {
            (Some(seeds), _) => seeds.len(),
            (None, n) => n.or(b.map(|c| c.n_traj)).unwrap_or(21),
        };

        Ok(ScenarioConfig {
            name: self
                .name
                .or(b.map(|c| c.name.clone()))
                .unwrap_or_else(|| "custom".to_string()),
            grid,
            potential,
            initial,
            engine,
            epsilon: self.engine.epsilon.or(b.map(|c| c.epsilon)).unwrap_or(1.0),
            hbar: self.physics.hbar.or(b.map(|c| c.hbar)).unwrap_or(1.0),
            mass: self.physics.mass.or(b.map(|c| c.mass)).unwrap_or(1.0),
            dt: self.time.dt.or(b.map(|c| c.dt)).unwrap_or(1e-3),
            t_final: required(self.time.t_final, b.map(|c| c.t_final), "[time] t_final")?,
            snapshot_stride: self
                .time
                .snapshot_stride
                .or(b.map(|c| c.snapshot_stride))
                .unwrap_or(20),
            n_traj,
            smoothing_window: self
                .numerics
                .smoothing_window
                .or(b.map(|c| c.smoothing_window))
                .unwrap_or(5),
            density_floor: self
                .numerics
                .density_floor
                .or(b.map(|c| c.density_floor))
                .unwrap_or(1e-6),
            seeds: self.trajectories.seeds.or(b.and_then(|c| c.seeds.clone())),
            v0: self.trajectories.v0.or(b.and_then(|c| c.v0)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_file_equals_preset() {
        for name in wavesim_core::PRESET_NAMES {
            let cfg = parse(&format!("preset = \"{name}\"")).unwrap();
            assert_eq!(cfg, preset(name).unwrap());
        }
    }

    #[test]
    fn overrides_apply_on_top_of_preset() {
        let cfg = parse(
            r#"
            preset = "barrier_low"
            [engine]
            kind = "epsilon"
            epsilon = 0.25
            [time]
            t_final = 1.0
            [numerics]
            smoothing_window = 3
            "#,
        )
        .unwrap();
        assert_eq!(cfg.engine, EngineKind::Epsilon);
        assert_eq!(cfg.epsilon, 0.25);
        assert_eq!(cfg.t_final, 1.0);
        assert_eq!(cfg.smoothing_window, 3);
        assert_eq!(cfg.grid, preset("barrier_low").unwrap().grid);
    }

    #[test]
    fn standalone_file() {
        let cfg = parse(
            r#"
            name = "slow_barrier"
            [grid]
            n_points = 1024
            x_min = -30.0
            x_max = 30.0
            [potential]
            kind = "gaussian_barrier"
            height = 1.0
            center = 0.0
            width = 0.5
            [initial]
            sigma = 1.5
            x0 = -8.0
            k0 = 1.0
            [time]
            t_final = 2.0
            "#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(
            cfg.potential,
            PotentialSpec::GaussianBarrier {
                height: 1.0,
                center: 0.0,
                width: 0.5
            }
        );
        assert_eq!(cfg.initial.kind, PacketKind::Gaussian);
        assert_eq!(cfg.n_traj, 21);
    }

    #[test]
    fn explicit_seeds_set_the_count() {
        let cfg = parse("preset = \"free_fall\"\n[trajectories]\nseeds = [1.0, 2.0]\n").unwrap();
        assert_eq!(cfg.n_traj, 2);
        assert_eq!(cfg.seeds, Some(vec![1.0, 2.0]));
    }

    #[test]
    fn missing_keys_and_typos_are_config_errors() {
        let missing = parse("[grid]\nn_points = 64\nx_min = 0.0\nx_max = 1.0\n").unwrap_err();
        assert!(missing.to_string().contains("[initial] sigma"));
        let typo = parse("preset = \"free_gauss\"\n[time]\ndtt = 0.1\n").unwrap_err();
        assert!(matches!(typo, Error::Config(m) if m.contains("dtt")));
        assert!(matches!(parse("preset = \"nope\""), Err(Error::Config(_))));
    }
}
