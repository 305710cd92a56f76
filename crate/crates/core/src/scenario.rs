//! Potentials, initial wave packets and the shipped scenario presets.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, WaveField};

/// Static external potential `U(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    Free,
    /// `U = m g x`.
    Linear {
        g: f64,
        mass: f64,
    },
    /// `U = V_b exp(-(x - x_b)^2 / 2 sigma_b^2)`.
    GaussianBarrier {
        height: f64,
        center: f64,
        width: f64,
    },
    /// `U = m omega^2 x^2 / 2`.
    Harmonic {
        omega: f64,
        mass: f64,
    },
}

impl PotentialSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match *self {
            PotentialSpec::Free => Ok(()),
            PotentialSpec::Linear { g, mass } => {
                if !finite(&[g, mass]) {
                    return Err(Error::config("linear potential parameters must be finite"));
                }
                Ok(())
            }
            PotentialSpec::GaussianBarrier {
                height,
                center,
                width,
            } => {
                if !finite(&[height, center, width]) {
                    return Err(Error::config("barrier parameters must be finite"));
                }
                if width <= 0.0 {
                    return Err(Error::config(format!(
                        "barrier width must be positive, got {width}"
                    )));
                }
                Ok(())
            }
            PotentialSpec::Harmonic { omega, mass } => {
                if !finite(&[omega, mass]) {
                    return Err(Error::config("harmonic parameters must be finite"));
                }
                if omega <= 0.0 {
                    return Err(Error::config(format!(
                        "harmonic frequency must be positive, got {omega}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            PotentialSpec::Free => 0.0,
            PotentialSpec::Linear { g, mass } => mass * g * x,
            PotentialSpec::GaussianBarrier {
                height,
                center,
                width,
            } => {
                let u = (x - center) / width;
                height * (-0.5 * u * u).exp()
            }
            PotentialSpec::Harmonic { omega, mass } => 0.5 * mass * omega * omega * x * x,
        }
    }

    /// `-dU/dx`, analytically.
    pub fn force(&self, x: f64) -> f64 {
        match *self {
            PotentialSpec::Free => 0.0,
            PotentialSpec::Linear { g, mass } => -mass * g,
            PotentialSpec::GaussianBarrier {
                height,
                center,
                width,
            } => {
                let u = (x - center) / width;
                height * u / width * (-0.5 * u * u).exp()
            }
            PotentialSpec::Harmonic { omega, mass } => -mass * omega * omega * x,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PotentialSpec::Free => "free",
            PotentialSpec::Linear { .. } => "linear",
            PotentialSpec::GaussianBarrier { .. } => "gaussian_barrier",
            PotentialSpec::Harmonic { .. } => "harmonic",
        }
    }
}

/// Samples the potential on every grid point.
pub fn evaluate_potential(spec: &PotentialSpec, grid: &Grid) -> Vec<f64> {
    (0..grid.n_points())
        .map(|k| spec.value(grid.x(k)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketKind {
    /// One packet centered at `x0` with wavenumber `k0`.
    Gaussian,
    /// Packets at `-x0` and `+x0` moving towards each other with `+k0` and `-k0`.
    TwoGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialStateSpec {
    pub kind: PacketKind,
    pub sigma: f64,
    pub x0: f64,
    pub k0: f64,
}

impl InitialStateSpec {
    pub fn gaussian(sigma: f64, x0: f64, k0: f64) -> Self {
        InitialStateSpec {
            kind: PacketKind::Gaussian,
            sigma,
            x0,
            k0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::config(format!(
                "packet width must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.x0.is_finite() && self.k0.is_finite()) {
            return Err(Error::config("packet center and wavenumber must be finite"));
        }
        Ok(())
    }
}

/// `(sigma sqrt(pi))^{-1/2} exp(-(x - x0)^2 / 2 sigma^2) exp(i k0 x)`.
pub fn gaussian_packet(x: f64, sigma: f64, x0: f64, k0: f64) -> Complex64 {
    let pre = 1.0 / (sigma * PI.sqrt()).sqrt();
    let u = (x - x0) / sigma;
    Complex64::from_polar(pre * (-0.5 * u * u).exp(), k0 * x)
}

/// Samples the initial wave function on the grid.
///
/// A packet whose `6 sigma` envelope reaches the domain edge is accepted
/// with a warning. The two-packet state is renormalized to unit norm.
pub fn build_initial_state(spec: &InitialStateSpec, grid: &Grid) -> Result<WaveField> {
    spec.validate()?;
    let center = 0.5 * (grid.x_min() + grid.x_max());
    let half = 0.5 * grid.length();
    let reach = (spec.x0 - center).abs().max((-spec.x0 - center).abs()) + 6.0 * spec.sigma;
    if reach >= half {
        log::warn!(
            "initial packet (x0 = {}, sigma = {}) extends past the domain {}",
            spec.x0,
            spec.sigma,
            grid
        );
    }
    let InitialStateSpec { sigma, x0, k0, .. } = *spec;
    let mut field = match spec.kind {
        PacketKind::Gaussian => WaveField::from_fn(*grid, |x| gaussian_packet(x, sigma, x0, k0)),
        PacketKind::TwoGaussian => WaveField::from_fn(*grid, |x| {
            gaussian_packet(x, sigma, -x0, k0) + gaussian_packet(x, sigma, x0, -k0)
        }),
    };
    if spec.kind == PacketKind::TwoGaussian {
        field.normalize();
    }
    Ok(field)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Quantum,
    Classical,
    Epsilon,
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineKind::Quantum => "quantum",
            EngineKind::Classical => "classical",
            EngineKind::Epsilon => "epsilon",
        })
    }
}

impl FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantum" => Ok(EngineKind::Quantum),
            "classical" => Ok(EngineKind::Classical),
            "epsilon" => Ok(EngineKind::Epsilon),
            other => Err(Error::config(format!(
                "unknown engine '{other}' (expected quantum, classical or epsilon)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_points: usize,
    pub x_min: f64,
    pub x_max: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.n_points, self.x_min, self.x_max)
    }
}

/// Upper bound on `dt * max|U| / hbar` for field scenarios.
pub const MAX_POTENTIAL_PHASE_PER_STEP: f64 = 0.1;

/// Full description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub grid: GridSpec,
    pub potential: PotentialSpec,
    pub initial: InitialStateSpec,
    pub engine: EngineKind,
    /// Degree of quantumness, only read when `engine` is `epsilon`.
    pub epsilon: f64,
    pub hbar: f64,
    pub mass: f64,
    pub dt: f64,
    pub t_final: f64,
    pub snapshot_stride: usize,
    pub n_traj: usize,
    pub smoothing_window: usize,
    /// Relative floor on the smoothed modulus (and on `|psi|` for velocities).
    pub density_floor: f64,
    /// Fixed starting positions. When set the scenario has no wave field and
    /// only Newtonian trajectories are produced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<f64>>,
    /// Initial Newtonian velocity; defaults to `hbar k0 / m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid.build()?;
        self.potential.validate()?;
        self.initial.validate()?;
        let positive = [
            ("hbar", self.hbar),
            ("mass", self.mass),
            ("dt", self.dt),
            ("t_final", self.t_final),
            ("density_floor", self.density_floor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::config(format!(
                "epsilon must lie in [0, 1], got {}",
                self.epsilon
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::config("snapshot_stride must be at least 1"));
        }
        if self.n_traj == 0 {
            return Err(Error::config("trajectory count must be at least 1"));
        }
        if self.smoothing_window == 0 || self.smoothing_window.is_multiple_of(2) {
            return Err(Error::config(format!(
                "smoothing_window must be odd and positive, got {}",
                self.smoothing_window
            )));
        }
        if self.smoothing_window >= grid.n_points() {
            return Err(Error::config(
                "smoothing_window must be smaller than the grid",
            ));
        }
        if self.t_final < self.dt {
            return Err(Error::config("t_final must be at least one time step"));
        }
        if let Some(seeds) = &self.seeds {
            if seeds.is_empty() || seeds.iter().any(|s| !s.is_finite()) {
                return Err(Error::config(
                    "explicit seeds must be a non-empty list of finite positions",
                ));
            }
        }
        if let Some(v0) = self.v0 {
            if !v0.is_finite() {
                return Err(Error::config("v0 must be finite"));
            }
        }
        if self.has_field() {
            let umax = evaluate_potential(&self.potential, &grid)
                .iter()
                .fold(0.0f64, |m, u| m.max(u.abs()));
            let phase = self.dt * umax / self.hbar;
            if phase >= MAX_POTENTIAL_PHASE_PER_STEP {
                return Err(Error::config(format!(
                    "dt * max|U| / hbar = {phase:.3} exceeds {MAX_POTENTIAL_PHASE_PER_STEP}; reduce dt or the domain"
                )));
            }
        }
        Ok(())
    }

    /// Whether a wave field is propagated for this scenario.
    pub fn has_field(&self) -> bool {
        self.seeds.is_none()
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round().max(1.0) as usize
    }

    /// Step indices at which snapshots are taken: 0, every stride, and the last step.
    pub fn snapshot_steps(&self) -> Vec<usize> {
        let n = self.n_steps();
        let mut steps: Vec<usize> = (0..=n).step_by(self.snapshot_stride).collect();
        if *steps.last().unwrap() != n {
            steps.push(n);
        }
        steps
    }

    pub fn initial_velocity(&self) -> f64 {
        self.v0.unwrap_or(self.hbar * self.initial.k0 / self.mass)
    }

    pub fn with_engine(mut self, engine: EngineKind, epsilon: Option<f64>) -> Self {
        self.engine = engine;
        if let Some(e) = epsilon {
            self.epsilon = e;
        }
        self
    }
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 7] = [
    "free_gauss",
    "interference",
    "barrier_low",
    "barrier_high",
    "harmonic_displaced",
    "harmonic_narrow",
    "free_fall",
];

const DEFAULT_N_TRAJ: usize = 21;

fn natural_units(
    name: &str,
    grid: GridSpec,
    potential: PotentialSpec,
    initial: InitialStateSpec,
    t_final: f64,
) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        grid,
        potential,
        initial,
        engine: EngineKind::Quantum,
        epsilon: 1.0,
        hbar: 1.0,
        mass: 1.0,
        dt: 1e-3,
        t_final,
        snapshot_stride: 20,
        n_traj: DEFAULT_N_TRAJ,
        smoothing_window: 5,
        density_floor: 1e-6,
        seeds: None,
        v0: None,
    }
}

/// Returns one of the shipped scenarios.
///
/// | preset | grid | run time | smoothing window |
/// |---|---|---|---|
/// | `free_gauss` | 2048 on [-20, 20) | 4 | 1 |
/// | `interference` | 2048 on [-20, 20) | 2.5 | 5 |
/// | `barrier_low` | 2048 on [-25, 25) | 5.2 | 1 |
/// | `barrier_high` | 2048 on [-25, 25) | 5.2 | 3 |
/// | `harmonic_displaced`, `harmonic_narrow` | 2048 on [-10, 10) | 6.3 | 5 |
/// | `free_fall` | Newtonian only, SI units, dt = 1e-4 | 8 | n/a |
///
/// Run times let the quantum packets finish their motion while keeping the
/// probability that wraps around the periodic boundary below about 1e-6.
/// The harmonic domain is narrower so that `dt * max U` stays small and the
/// narrowest packets of a narrowing study remain resolved.
///
/// Packets that never fold over themselves keep a smooth modulus, and the
/// unsmoothed quantum potential keeps their classical width exactly. The
/// colliding, reflecting and focusing scenarios need some averaging; the
/// reflected packet uses 3 points because a wider average leaves enough
/// quantum potential behind to leak probability over the barrier.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let wide = GridSpec {
        n_points: 2048,
        x_min: -20.0,
        x_max: 20.0,
    };
    let barrier_grid = GridSpec {
        n_points: 2048,
        x_min: -25.0,
        x_max: 25.0,
    };
    let trap_grid = GridSpec {
        n_points: 2048,
        x_min: -10.0,
        x_max: 10.0,
    };
    let trap = PotentialSpec::Harmonic {
        omega: 1.0,
        mass: 1.0,
    };
    let mut cfg = match name {
        "free_gauss" => natural_units(
            name,
            wide,
            PotentialSpec::Free,
            InitialStateSpec::gaussian(1.0, -7.0, 2.0),
            4.0,
        ),
        "interference" => natural_units(
            name,
            wide,
            PotentialSpec::Free,
            InitialStateSpec {
                kind: PacketKind::TwoGaussian,
                sigma: 1.0,
                x0: 3.0,
                k0: 3.0,
            },
            2.5,
        ),
        "barrier_low" | "barrier_high" => natural_units(
            name,
            barrier_grid,
            PotentialSpec::GaussianBarrier {
                height: if name == "barrier_low" { 2.0 } else { 4.0 },
                center: 0.0,
                width: 1.0,
            },
            InitialStateSpec::gaussian(1.0, -6.0, 2.5),
            5.2,
        ),
        "harmonic_displaced" => natural_units(
            name,
            trap_grid,
            trap,
            InitialStateSpec::gaussian(1.0, -2.0, 0.0),
            6.3,
        ),
        "harmonic_narrow" => natural_units(
            name,
            trap_grid,
            trap,
            InitialStateSpec::gaussian(0.5, 0.0, 0.0),
            6.3,
        ),
        "free_fall" => {
            let mut cfg = natural_units(
                name,
                GridSpec {
                    n_points: 1024,
                    x_min: -50.0,
                    x_max: 150.0,
                },
                PotentialSpec::Linear { g: 9.81, mass: 1.0 },
                InitialStateSpec::gaussian(1.0, 0.0, 0.0),
                8.0,
            );
            cfg.dt = 1e-4;
            cfg.snapshot_stride = 100;
            cfg.seeds = Some(vec![-20.0, -10.0, 0.0, 10.0, 20.0]);
            cfg.n_traj = 5;
            cfg.v0 = Some(40.0);
            cfg
        }
        other => {
            return Err(Error::config(format!(
                "unknown preset '{other}'; valid presets: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    match name {
        "free_gauss" | "barrier_low" => cfg.smoothing_window = 1,
        "barrier_high" => cfg.smoothing_window = 3,
        _ => {}
    }
    Ok(cfg)
}
