//! Field-guided (Bohmian and CSE) and Newtonian trajectory ensembles.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::distribution::DensityCdf;
use crate::dynamics::{EngineMode, FieldParams, Snapshot};
use crate::error::{Error, Result};
use crate::grid::{Grid, Spectral, WaveField};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Bohmian,
    Cse,
    Newtonian,
}

impl Provenance {
    /// Family guided by a field propagated in `mode`. Only the exact quantum
    /// equation yields Bohmian trajectories.
    pub fn guided_by(mode: EngineMode) -> Self {
        if mode.q_weight() == 0.0 {
            Provenance::Bohmian
        } else {
            Provenance::Cse
        }
    }

    pub fn is_field_guided(&self) -> bool {
        !matches!(self, Provenance::Newtonian)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Bohmian => "bohmian",
            Provenance::Cse => "cse",
            Provenance::Newtonian => "newtonian",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bohmian" => Ok(Provenance::Bohmian),
            "cse" => Ok(Provenance::Cse),
            "newtonian" => Ok(Provenance::Newtonian),
            other => Err(Error::Config(format!(
                "unknown trajectory family '{other}'"
            ))),
        }
    }
}

/// Positions of `N_E` particles sampled on a shared clock.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub provenance: Provenance,
    pub times: Vec<f64>,
    /// `positions[s][i]` is particle `i` at `times[s]`.
    pub positions: Vec<Vec<f64>>,
    /// Newtonian velocities at every recorded time.
    pub velocities: Option<Vec<Vec<f64>>>,
    /// Particles that left the grid and were clamped to its edge.
    pub clamped: Vec<bool>,
}

impl TrajectoryEnsemble {
    pub fn n_traj(&self) -> usize {
        self.positions.first().map_or(0, |p| p.len())
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn trajectory(&self, i: usize) -> Vec<f64> {
        self.positions.iter().map(|row| row[i]).collect()
    }

    pub fn initial_velocities(&self) -> Option<&[f64]> {
        self.velocities
            .as_ref()
            .and_then(|v| v.first())
            .map(|v| v.as_slice())
    }

    pub fn time_index(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    /// Whether times increase strictly and all positions are finite.
    pub fn is_well_formed(&self) -> bool {
        self.times.windows(2).all(|w| w[1] > w[0])
            && self.positions.len() == self.times.len()
            && self
                .positions
                .iter()
                .all(|row| row.iter().all(|x| x.is_finite()))
    }
}

/// Guiding velocity `v = (hbar/m) Im(psi' conj(psi)) / |psi|^2` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl VelocityField {
    /// Linear interpolation with periodic wrap between the last and first points.
    pub fn at(&self, x: f64) -> f64 {
        let n = self.values.len();
        let u = self.grid.fractional_index(x);
        let k = u.floor();
        let s = u - k;
        let i = (k as i64).rem_euclid(n as i64) as usize;
        let j = (i + 1) % n;
        self.values[i] * (1.0 - s) + self.values[j] * s
    }

    /// Local slope `dv/dx` of the interpolant around `x`.
    pub fn slope_at(&self, x: f64) -> f64 {
        let n = self.values.len();
        let k = self.grid.fractional_index(x).floor() as i64;
        let i = k.rem_euclid(n as i64) as usize;
        (self.values[(i + 1) % n] - self.values[i]) / self.grid.dx()
    }
}

/// Velocity of the probability current, regularized where `|psi|` is below
/// `density_floor * max|psi|`.
pub fn velocity_field(
    field: &WaveField,
    spectral: &Spectral,
    params: &FieldParams,
) -> VelocityField {
    // real and imaginary parts are differentiated separately so a real field
    // gets exactly zero velocity
    let part = |f: fn(&Complex64) -> f64| {
        let values: Vec<Complex64> = field
            .amplitudes
            .iter()
            .map(|a| Complex64::new(f(a), 0.0))
            .collect();
        spectral
            .derivative(&values)
            .into_iter()
            .map(|d| d.re)
            .collect::<Vec<f64>>()
    };
    let d_re = part(|a| a.re);
    let d_im = part(|a| a.im);
    let max_density = field
        .amplitudes
        .iter()
        .fold(0.0f64, |m, a| m.max(a.norm_sqr()));
    let floor = (params.density_floor * params.density_floor * max_density).max(f64::MIN_POSITIVE);
    let scale = params.hbar / params.mass;
    let values = field
        .amplitudes
        .iter()
        .zip(d_re.iter().zip(&d_im))
        .map(|(a, (dr, di))| scale * (di * a.re - dr * a.im) / a.norm_sqr().max(floor))
        .collect();
    VelocityField {
        grid: field.grid,
        values,
        time: field.time,
    }
}

/// Largest speed where `|psi| > density_floor * max|psi|`.
fn max_speed_at(positions: &[f64], fields: [&VelocityField; 2]) -> f64 {
    positions
        .iter()
        .flat_map(|&x| fields.map(|v| v.at(x).abs()))
        .fold(0.0, f64::max)
}

/// Tolerance on the initial norm accepted by [`seed_positions`].
pub const SEED_NORM_TOLERANCE: f64 = 1e-6;

/// Places `n` particles at the `(i - 1/2)/n` quantiles of `|psi|^2`, so
/// consecutive particles enclose probability `1/n`.
pub fn seed_positions(field: &WaveField, n: usize) -> Result<Vec<f64>> {
    let norm = field.norm();
    if (norm - 1.0).abs() > SEED_NORM_TOLERANCE {
        return Err(Error::Unnormalized(norm));
    }
    if n == 0 {
        return Err(Error::Config("need at least one trajectory".into()));
    }
    let cdf = DensityCdf::new(&field.grid, &field.density()).ok_or(Error::Unnormalized(norm))?;
    Ok((1..=n)
        .map(|i| cdf.quantile((i as f64 - 0.5) / n as f64))
        .collect())
}

/// Largest fraction of a grid cell a particle may move in one RK4 sub-step.
const MAX_CELL_FRACTION: f64 = 0.5;
/// Bound on `h |dv/dx|` per RK4 sub-step.
const MAX_STRAIN_PER_SUBSTEP: f64 = 0.25;
const MAX_SUBSTEPS: usize = 4096;
/// A snapshot interval may carry a particle at most this many cells.
pub const MAX_CELLS_PER_SNAPSHOT: f64 = 5.0;

/// Incremental integrator for `dX/dt = v(X, t)` driven by successive fields.
///
/// Between two fields the velocity is interpolated linearly in time; each
/// particle is advanced with classical RK4 using enough sub-steps to keep
/// its displacement and local strain per sub-step small.
#[derive(Debug)]
pub struct GuidedEnsemble {
    provenance: Provenance,
    spectral: Spectral,
    params: FieldParams,
    positions: Vec<f64>,
    previous: Option<VelocityField>,
    times: Vec<f64>,
    history: Vec<Vec<f64>>,
    clamped: Vec<bool>,
}

impl GuidedEnsemble {
    pub fn new(grid: Grid, seeds: Vec<f64>, provenance: Provenance, params: FieldParams) -> Self {
        let n = seeds.len();
        GuidedEnsemble {
            provenance,
            spectral: Spectral::new(grid),
            params,
            positions: seeds,
            previous: None,
            times: Vec::new(),
            history: Vec::new(),
            clamped: vec![false; n],
        }
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn time(&self) -> Option<f64> {
        self.previous.as_ref().map(|v| v.time)
    }

    /// Moves the particles up to the time of `field`. The first call only
    /// anchors the clock.
    pub fn advance_to(&mut self, field: &WaveField) -> Result<()> {
        let next = velocity_field(field, &self.spectral, &self.params);
        let Some(prev) = self.previous.take() else {
            self.previous = Some(next);
            return Ok(());
        };
        let h = next.time - prev.time;
        if h.is_nan() || h <= 0.0 {
            return Err(Error::Config(format!(
                "fields must advance in time ({} -> {})",
                prev.time, next.time
            )));
        }
        let grid = field.grid;
        let dx = grid.dx();
        let vmax = max_speed_at(&self.positions, [&prev, &next]);
        if vmax * h >= MAX_CELLS_PER_SNAPSHOT * dx {
            return Err(Error::Config(format!(
                "snapshot interval {h} too coarse: max|v| dt = {:.3} exceeds {MAX_CELLS_PER_SNAPSHOT} cells",
                vmax * h / dx
            )));
        }
        let (lo, hi) = (grid.x_min(), grid.x(grid.n_points() - 1));
        for (x, flag) in self.positions.iter_mut().zip(self.clamped.iter_mut()) {
            *x = integrate_particle(*x, &prev, &next, h, dx);
            if *x < lo || *x > hi {
                if !*flag {
                    log::warn!("trajectory left the grid at t = {}; clamping", next.time);
                }
                *flag = true;
                *x = x.clamp(lo, hi);
            }
        }
        self.previous = Some(next);
        Ok(())
    }

    /// Stores the current positions under the current time.
    pub fn record(&mut self) {
        if let Some(t) = self.time() {
            self.times.push(t);
            self.history.push(self.positions.clone());
        }
    }

    pub fn finish(self) -> TrajectoryEnsemble {
        TrajectoryEnsemble {
            provenance: self.provenance,
            times: self.times,
            positions: self.history,
            velocities: None,
            clamped: self.clamped,
        }
    }
}

fn integrate_particle(x0: f64, prev: &VelocityField, next: &VelocityField, h: f64, dx: f64) -> f64 {
    let vel = |x: f64, s: f64| (1.0 - s) * prev.at(x) + s * next.at(x);
    let speed = prev.at(x0).abs().max(next.at(x0).abs());
    let strain = prev.slope_at(x0).abs().max(next.slope_at(x0).abs());
    let n_sub = ((speed * h / (MAX_CELL_FRACTION * dx)).max(strain * h / MAX_STRAIN_PER_SUBSTEP))
        .ceil()
        .clamp(1.0, MAX_SUBSTEPS as f64) as usize;
    let hs = h / n_sub as f64;
    let ds = 1.0 / n_sub as f64;
    let mut x = x0;
    for j in 0..n_sub {
        let s = j as f64 * ds;
        let k1 = vel(x, s);
        let k2 = vel(x + 0.5 * hs * k1, s + 0.5 * ds);
        let k3 = vel(x + 0.5 * hs * k2, s + 0.5 * ds);
        let k4 = vel(x + hs * k3, s + ds);
        x += hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    x
}

/// Integrates particles through a snapshot stream, recording at every snapshot.
pub fn advance_ensemble<I>(
    snapshots: I,
    seeds: &[f64],
    provenance: Provenance,
    params: &FieldParams,
) -> Result<TrajectoryEnsemble>
where
    I: IntoIterator<Item = Result<Snapshot>>,
{
    let mut ensemble: Option<GuidedEnsemble> = None;
    for snap in snapshots {
        let snap = snap?;
        let e = ensemble.get_or_insert_with(|| {
            GuidedEnsemble::new(snap.field.grid, seeds.to_vec(), provenance, *params)
        });
        e.advance_to(&snap.field)?;
        e.record();
    }
    ensemble
        .map(GuidedEnsemble::finish)
        .ok_or_else(|| Error::Config("empty snapshot stream".into()))
}

/// Velocity-Verlet integration of `m X'' = -U'(X)` for every seed, all
/// starting with velocity `v0`, recorded on the scenario's snapshot schedule.
pub fn newtonian_ensemble(
    config: &ScenarioConfig,
    seeds: &[f64],
    v0: f64,
) -> Result<TrajectoryEnsemble> {
    config.potential.validate()?;
    if !(config.dt > 0.0 && config.mass > 0.0) {
        return Err(Error::Config("dt and mass must be positive".into()));
    }
    let dt = config.dt;
    let inv_m = 1.0 / config.mass;
    let pot = config.potential;
    let schedule = config.snapshot_steps();
    let mut x = seeds.to_vec();
    let mut v = vec![v0; seeds.len()];
    let mut a: Vec<f64> = x.iter().map(|&xi| pot.force(xi) * inv_m).collect();

    let mut times = Vec::with_capacity(schedule.len());
    let mut positions = Vec::with_capacity(schedule.len());
    let mut velocities = Vec::with_capacity(schedule.len());
    let mut step = 0;
    for &target in &schedule {
        while step < target {
            for i in 0..x.len() {
                v[i] += 0.5 * dt * a[i];
                x[i] += dt * v[i];
                a[i] = pot.force(x[i]) * inv_m;
                v[i] += 0.5 * dt * a[i];
            }
            step += 1;
        }
        if x.iter().chain(&v).any(|q| !q.is_finite()) {
            return Err(Error::Diverged {
                step,
                time: step as f64 * dt,
                mode: "newtonian".into(),
            });
        }
        times.push(step as f64 * dt);
        positions.push(x.clone());
        velocities.push(v.clone());
    }
    Ok(TrajectoryEnsemble {
        provenance: Provenance::Newtonian,
        times,
        positions,
        velocities: Some(velocities),
        clamped: vec![false; seeds.len()],
    })
}

/// `X0 + v0 t - g t^2 / 2`.
pub fn free_fall_analytic(x0: f64, v0: f64, g: f64, t: f64) -> f64 {
    x0 + v0 * t - 0.5 * g * t * t
}

/// Mechanical energy `m v^2 / 2 + U(x)` of one Newtonian particle.
pub fn newtonian_energy(config: &ScenarioConfig, x: f64, v: f64) -> f64 {
    0.5 * config.mass * v * v + config.potential.value(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{build_initial_state, preset, InitialStateSpec};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn plane_wave_velocity() {
        let g = Grid::new(128, 0.0, 2.0 * PI).unwrap();
        let f = WaveField::from_fn(g, |x| Complex64::from_polar(1.0, 2.0 * x));
        let v = velocity_field(&f, &Spectral::new(g), &FieldParams::natural());
        assert!(v.values.iter().all(|&s| (s - 2.0).abs() < 1e-10));
    }

    #[test]
    fn real_field_has_no_velocity() {
        let g = Grid::new(512, -10.0, 10.0).unwrap();
        let f = WaveField::from_fn(g, |x| Complex64::new((-0.5 * x * x).exp(), 0.0));
        let v = velocity_field(&f, &Spectral::new(g), &FieldParams::natural());
        assert!(v.values.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn packet_velocity_is_group_velocity_under_envelope() {
        let g = Grid::new(2048, -20.0, 20.0).unwrap();
        let f = build_initial_state(&InitialStateSpec::gaussian(1.0, -7.0, 2.0), &g).unwrap();
        let v = velocity_field(&f, &Spectral::new(g), &FieldParams::natural());
        for k in 0..g.n_points() {
            if (g.x(k) + 7.0).abs() < 4.0 {
                assert!((v.values[k] - 2.0).abs() < 1e-9, "x = {}", g.x(k));
            }
        }
    }

    #[test]
    fn uniform_density_midpoint_quantiles() {
        let g = Grid::new(4096, -1.0, 2.0).unwrap();
        let height =
            1.0 / ((0..4096).filter(|&k| (0.0..=1.0).contains(&g.x(k))).count() as f64 * g.dx());
        let mut f = WaveField::from_fn(g, |x| {
            Complex64::new(
                if (0.0..=1.0).contains(&x) {
                    height.sqrt()
                } else {
                    0.0
                },
                0.0,
            )
        });
        f.normalize();
        let seeds = seed_positions(&f, 4).unwrap();
        for (s, e) in seeds.iter().zip([0.125, 0.375, 0.625, 0.875]) {
            assert!((s - e).abs() < 2.0 * g.dx(), "{s} vs {e}");
        }
    }

    #[test]
    fn odd_count_median_at_center() {
        let g = Grid::new(1024, -10.0, 10.0).unwrap();
        let f = build_initial_state(&InitialStateSpec::gaussian(0.8, 0.0, 0.0), &g).unwrap();
        let seeds = seed_positions(&f, 21).unwrap();
        assert!(seeds[10].abs() < 1e-12);
        // off-node centers are recovered up to the interpolation error
        let f = build_initial_state(&InitialStateSpec::gaussian(0.8, 1.5, 0.0), &g).unwrap();
        let seeds = seed_positions(&f, 21).unwrap();
        assert!((seeds[10] - 1.5).abs() < 1e-4);
    }

    #[test]
    fn unnormalized_field_is_rejected() {
        let g = Grid::new(256, -10.0, 10.0).unwrap();
        let mut f = build_initial_state(&InitialStateSpec::gaussian(1.0, 0.0, 0.0), &g).unwrap();
        f.scale(1.1);
        assert!(matches!(seed_positions(&f, 5), Err(Error::Unnormalized(_))));
    }

    #[test]
    fn free_fall_closed_form() {
        assert_eq!(free_fall_analytic(0.0, 40.0, 9.81, 0.0), 0.0);
        assert_relative_eq!(
            free_fall_analytic(0.0, 40.0, 9.81, 4.0),
            81.52,
            epsilon = 1e-12
        );
        assert_eq!(free_fall_analytic(0.0, 40.0, 0.0, 2.0), 80.0);
    }

    #[test]
    fn verlet_free_fall() {
        let mut cfg = preset("free_fall").unwrap();
        cfg.t_final = 4.0;
        let ens = newtonian_ensemble(&cfg, &[0.0], 40.0).unwrap();
        assert_relative_eq!(*ens.times.last().unwrap(), 4.0, epsilon = 1e-12);
        assert!((ens.positions.last().unwrap()[0] - 81.52).abs() < 1e-9);
    }

    #[test]
    fn harmonic_particles_reach_origin_together() {
        let mut cfg = preset("harmonic_displaced").unwrap();
        cfg.t_final = PI / 2.0;
        cfg.snapshot_stride = 1;
        cfg.dt = PI / 2.0 / 10_000.0;
        let ens = newtonian_ensemble(&cfg, &[-3.0, -2.0, -1.0], 0.0).unwrap();
        for x in ens.positions.last().unwrap() {
            assert!(x.abs() < 1e-7, "{x}");
        }
    }

    #[test]
    fn constant_velocity_guidance() {
        let g = Grid::new(256, -10.0, 10.0).unwrap();
        let mut e = GuidedEnsemble::new(g, vec![0.0], Provenance::Bohmian, FieldParams::natural());
        let k0 = 2.0 * PI * 8.0 / 20.0;
        let mut f = WaveField::from_fn(g, |x| Complex64::from_polar(1.0, k0 * x));
        for s in 0..=100 {
            f.time = s as f64 * 0.01;
            e.advance_to(&f).unwrap();
        }
        assert_relative_eq!(e.positions()[0], k0, epsilon = 1e-9);
    }

    #[test]
    fn coarse_snapshots_are_rejected() {
        let g = Grid::new(256, -10.0, 10.0).unwrap();
        let mut e = GuidedEnsemble::new(g, vec![0.0], Provenance::Bohmian, FieldParams::natural());
        let k0 = 2.0 * PI * 8.0 / 20.0;
        let mut f = WaveField::from_fn(g, |x| Complex64::from_polar(1.0, k0 * x));
        e.advance_to(&f).unwrap();
        f.time = 1.0;
        assert!(matches!(e.advance_to(&f), Err(Error::Config(_))));
    }

    #[test]
    fn provenance_by_mode() {
        assert_eq!(
            Provenance::guided_by(EngineMode::Quantum),
            Provenance::Bohmian
        );
        assert_eq!(
            Provenance::guided_by(EngineMode::Epsilon(1.0)),
            Provenance::Bohmian
        );
        assert_eq!(
            Provenance::guided_by(EngineMode::Epsilon(0.5)),
            Provenance::Cse
        );
        assert_eq!(
            Provenance::guided_by(EngineMode::Classical),
            Provenance::Cse
        );
        assert_eq!("cse".parse::<Provenance>().unwrap(), Provenance::Cse);
    }
}
