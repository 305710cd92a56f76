//! Quantum potential and split-step propagation.
//!
//! One engine advances three equations that differ only in how much of the
//! quantum potential `Q` is subtracted from the external potential:
//!
//! | mode | effective potential |
//! |---|---|
//! | quantum | `U` |
//! | classical | `U - Q` |
//! | epsilon(e) | `U - (1 - e) Q` |
//!
//! Each step is Strang-split: half a kinetic step in Fourier space, a full
//! potential phase in position space (with `Q` evaluated on the field after
//! the first half step), then the second kinetic half step.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Spectral, WaveField};
use crate::scenario::{build_initial_state, evaluate_potential, EngineKind, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EngineMode {
    Quantum,
    Classical,
    Epsilon(f64),
}

impl EngineMode {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        match config.engine {
            EngineKind::Quantum => EngineMode::Quantum,
            EngineKind::Classical => EngineMode::Classical,
            EngineKind::Epsilon => EngineMode::Epsilon(config.epsilon),
        }
    }

    /// Weight `1 - epsilon` of the subtracted quantum potential.
    pub fn q_weight(&self) -> f64 {
        match *self {
            EngineMode::Quantum => 0.0,
            EngineMode::Classical => 1.0,
            EngineMode::Epsilon(e) => 1.0 - e,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EngineMode::Epsilon(e) if !(0.0..=1.0).contains(&e) => Err(Error::Config(format!(
                "epsilon must lie in [0, 1], got {e}"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for EngineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineMode::Quantum => f.write_str("quantum"),
            EngineMode::Classical => f.write_str("classical"),
            EngineMode::Epsilon(e) => write!(f, "epsilon({e})"),
        }
    }
}

/// Physical constants and regularization shared by the engine and the guides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldParams {
    pub hbar: f64,
    pub mass: f64,
    pub smoothing_window: usize,
    pub density_floor: f64,
}

impl FieldParams {
    pub fn natural() -> Self {
        FieldParams {
            hbar: 1.0,
            mass: 1.0,
            smoothing_window: 5,
            density_floor: 1e-6,
        }
    }

    pub fn from_config(config: &ScenarioConfig) -> Self {
        FieldParams {
            hbar: config.hbar,
            mass: config.mass,
            smoothing_window: config.smoothing_window,
            density_floor: config.density_floor,
        }
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.smoothing_window = window;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumPotentialField {
    pub grid: Grid,
    pub values: Vec<f64>,
    /// The moving-averaged modulus the potential was computed from.
    pub smoothed_modulus: Vec<f64>,
    pub smoothing_window: usize,
    pub density_floor: f64,
}

/// Centered moving average with periodic wrap. A window of 1 copies the input.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let n = values.len();
    if window <= 1 || n == 0 {
        return values.to_vec();
    }
    let half = window / 2;
    let inv = 1.0 / window as f64;
    (0..n)
        .map(|k| {
            let mut acc = 0.0;
            for j in 0..window {
                acc += values[(k + n + j - half) % n];
            }
            acc * inv
        })
        .collect()
}

/// Fourth-order central second difference with periodic wrap.
pub fn second_difference(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    let c = 1.0 / (12.0 * dx * dx);
    (0..n)
        .map(|k| {
            let at = |o: isize| values[((k as isize + o).rem_euclid(n as isize)) as usize];
            c * (-at(-2) + 16.0 * at(-1) - 30.0 * at(0) + 16.0 * at(1) - at(2))
        })
        .collect()
}

/// `Q = -(hbar^2 / 2m) R'' / R` from the smoothed modulus of `field`.
///
/// The divisor is clamped below at `density_floor * max(R)` so `Q` stays
/// finite at nodes and in the far tails.
pub fn quantum_potential(field: &WaveField, params: &FieldParams) -> QuantumPotentialField {
    let modulus: Vec<f64> = field.amplitudes.iter().map(|a| a.norm()).collect();
    quantum_potential_from_modulus(&field.grid, &modulus, params)
}

pub fn quantum_potential_from_modulus(
    grid: &Grid,
    modulus: &[f64],
    params: &FieldParams,
) -> QuantumPotentialField {
    from_smoothed(
        grid,
        moving_average(modulus, params.smoothing_window),
        params,
    )
}

/// Like [`quantum_potential_from_modulus`], but the smoothed modulus is also
/// stripped of Fourier modes with `|k| > k_cut` before differentiating.
pub fn quantum_potential_band_limited(
    spectral: &Spectral,
    modulus: &[f64],
    params: &FieldParams,
    k_cut: f64,
) -> QuantumPotentialField {
    let mut smoothed = moving_average(modulus, params.smoothing_window);
    band_limit(&mut smoothed, spectral, k_cut);
    from_smoothed(spectral.grid(), smoothed, params)
}

fn from_smoothed(grid: &Grid, smoothed: Vec<f64>, params: &FieldParams) -> QuantumPotentialField {
    let curvature = second_difference(&smoothed, grid.dx());
    let rmax = smoothed.iter().fold(0.0f64, |m, &r| m.max(r));
    let floor = (params.density_floor * rmax).max(f64::MIN_POSITIVE);
    let pre = -params.hbar * params.hbar / (2.0 * params.mass);
    let values = curvature
        .iter()
        .zip(&smoothed)
        .map(|(&d2, &r)| pre * d2 / r.max(floor))
        .collect();
    QuantumPotentialField {
        grid: *grid,
        values,
        smoothed_modulus: smoothed,
        smoothing_window: params.smoothing_window,
        density_floor: params.density_floor,
    }
}

/// Removes the Fourier modes of a real periodic sequence with `|k| > k_cut`.
pub fn band_limit(values: &mut [f64], spectral: &Spectral, k_cut: f64) {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    spectral.forward(&mut buf);
    for (b, k) in buf.iter_mut().zip(spectral.wavenumbers()) {
        if k.abs() > k_cut {
            *b = Complex64::new(0.0, 0.0);
        }
    }
    spectral.inverse(&mut buf);
    for (v, b) in values.iter_mut().zip(&buf) {
        *v = b.re;
    }
}

/// Largest wavenumber the subtracted quantum potential may respond to.
///
/// Over one Strang step a perturbation of wavenumber `k` is rotated by
/// `theta = hbar k^2 dt / 2m` between modulus and phase, while the potential
/// step shears it by up to `theta`. The combined map has trace
/// `2 cos(theta) + theta sin(theta)` and grows without bound once
/// `theta > pi`, so the feedback is cut off at `theta = pi / 2`.
pub fn stability_cutoff(dt: f64, params: &FieldParams) -> f64 {
    (PI * params.mass / (params.hbar * dt)).sqrt()
}

/// Largest `|dQ/dx|` over the region where the smoothed modulus exceeds ten
/// times the floor. Zero means `Q` is flat across the supported region.
pub fn rosen_gradient_diagnostic(q: &QuantumPotentialField) -> f64 {
    let n = q.values.len();
    let rmax = q.smoothed_modulus.iter().fold(0.0f64, |m, &r| m.max(r));
    let threshold = 10.0 * q.density_floor * rmax;
    let dx = q.grid.dx();
    (0..n)
        .filter(|&k| q.smoothed_modulus[k] > threshold)
        .map(|k| {
            let next = q.values[(k + 1) % n];
            let prev = q.values[(k + n - 1) % n];
            ((next - prev) / (2.0 * dx)).abs()
        })
        .fold(0.0, f64::max)
}

/// Reusable split-step propagator for one grid, potential and mode.
#[derive(Debug, Clone)]
pub struct SplitStepper {
    spectral: Spectral,
    half_kinetic: Vec<Complex64>,
    potential: Vec<f64>,
    mode: EngineMode,
    dt: f64,
    params: FieldParams,
    steps_taken: usize,
    q_cutoff: f64,
    scratch: Vec<f64>,
}

impl SplitStepper {
    pub fn new(
        grid: Grid,
        potential: Vec<f64>,
        mode: EngineMode,
        dt: f64,
        params: FieldParams,
    ) -> Result<Self> {
        mode.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        if potential.len() != grid.n_points() {
            return Err(Error::Mismatch(format!(
                "potential has {} samples but the grid has {} points",
                potential.len(),
                grid.n_points()
            )));
        }
        let spectral = Spectral::new(grid);
        let half_kinetic = spectral
            .wavenumbers()
            .iter()
            .map(|&k| Complex64::from_polar(1.0, -params.hbar * k * k * dt / (4.0 * params.mass)))
            .collect();
        Ok(SplitStepper {
            spectral,
            half_kinetic,
            potential,
            mode,
            dt,
            params,
            steps_taken: 0,
            q_cutoff: stability_cutoff(dt, &params),
            scratch: Vec::new(),
        })
    }

    pub fn mode(&self) -> EngineMode {
        self.mode
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// Quantum potential exactly as the potential step sees it.
    pub fn quantum_potential(&self, field: &WaveField) -> QuantumPotentialField {
        let modulus: Vec<f64> = field.amplitudes.iter().map(|a| a.norm()).collect();
        quantum_potential_band_limited(&self.spectral, &modulus, &self.params, self.q_cutoff)
    }

    fn kinetic_half(&self, amps: &mut [Complex64]) {
        self.spectral.forward(amps);
        for (a, p) in amps.iter_mut().zip(&self.half_kinetic) {
            *a *= p;
        }
        self.spectral.inverse(amps);
    }

    /// Advances `field` by one time step in place.
    pub fn step_in_place(&mut self, field: &mut WaveField) -> Result<()> {
        self.kinetic_half(&mut field.amplitudes);
        let weight = self.mode.q_weight();
        let inv_hbar_dt = self.dt / self.params.hbar;
        if weight == 0.0 {
            for (a, &u) in field.amplitudes.iter_mut().zip(&self.potential) {
                *a *= Complex64::from_polar(1.0, -u * inv_hbar_dt);
            }
        } else {
            self.scratch.clear();
            self.scratch
                .extend(field.amplitudes.iter().map(|a| a.norm()));
            let q = quantum_potential_band_limited(
                &self.spectral,
                &self.scratch,
                &self.params,
                self.q_cutoff,
            );
            for ((a, &u), &qv) in field
                .amplitudes
                .iter_mut()
                .zip(&self.potential)
                .zip(&q.values)
            {
                *a *= Complex64::from_polar(1.0, -(u - weight * qv) * inv_hbar_dt);
            }
        }
        self.kinetic_half(&mut field.amplitudes);
        self.steps_taken += 1;
        field.time += self.dt;
        if !field.is_finite() {
            return Err(Error::Diverged {
                step: self.steps_taken,
                time: field.time,
                mode: self.mode.to_string(),
            });
        }
        Ok(())
    }

    pub fn step(&mut self, field: &WaveField) -> Result<WaveField> {
        let mut out = field.clone();
        self.step_in_place(&mut out)?;
        Ok(out)
    }
}

/// One Strang step of `field` under `potential`.
pub fn split_step(
    field: &WaveField,
    potential: &[f64],
    mode: EngineMode,
    dt: f64,
    params: &FieldParams,
) -> Result<WaveField> {
    SplitStepper::new(field.grid, potential.to_vec(), mode, dt, *params)?.step(field)
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub field: WaveField,
    pub q: QuantumPotentialField,
}

impl Snapshot {
    pub fn time(&self) -> f64 {
        self.field.time
    }
}

/// Lazily propagated snapshot stream for a scenario.
#[derive(Debug)]
pub struct Propagation {
    stepper: SplitStepper,
    field: WaveField,
    step: usize,
    n_steps: usize,
    stride: usize,
    started: bool,
    failed: bool,
    scenario: String,
}

impl Propagation {
    pub fn potential(&self) -> &[f64] {
        &self.stepper.potential
    }

    pub fn spectral(&self) -> &Spectral {
        self.stepper.spectral()
    }

    pub fn mode(&self) -> EngineMode {
        self.stepper.mode
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            step: self.step,
            field: self.field.clone(),
            q: self.stepper.quantum_potential(&self.field),
        }
    }
}

impl Iterator for Propagation {
    type Item = Result<Snapshot>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(Ok(self.snapshot()));
        }
        if self.step >= self.n_steps {
            return None;
        }
        let target = ((self.step / self.stride + 1) * self.stride).min(self.n_steps);
        while self.step < target {
            if let Err(e) = self.stepper.step_in_place(&mut self.field) {
                self.failed = true;
                log::error!("scenario '{}': {}", self.scenario, e);
                return Some(Err(e));
            }
            self.step += 1;
            self.field.time = self.step as f64 * self.stepper.dt;
        }
        Some(Ok(self.snapshot()))
    }
}

/// Snapshot stream of a scenario at its configured stride.
pub fn propagate(config: &ScenarioConfig) -> Result<Propagation> {
    propagate_with_stride(config, config.snapshot_stride)
}

/// Snapshot stream with an explicit stride; the final step is always emitted.
pub fn propagate_with_stride(config: &ScenarioConfig, stride: usize) -> Result<Propagation> {
    config.validate()?;
    if !config.has_field() {
        return Err(Error::Config(format!(
            "scenario '{}' has no wave field to propagate",
            config.name
        )));
    }
    let grid = config.grid.build()?;
    let field = build_initial_state(&config.initial, &grid)?;
    let potential = evaluate_potential(&config.potential, &grid);
    let params = FieldParams::from_config(config);
    let stepper = SplitStepper::new(
        grid,
        potential,
        EngineMode::from_config(config),
        config.dt,
        params,
    )?;
    Ok(Propagation {
        stepper,
        field,
        step: 0,
        n_steps: config.n_steps(),
        stride: stride.max(1),
        started: false,
        failed: false,
        scenario: config.name.clone(),
    })
}
