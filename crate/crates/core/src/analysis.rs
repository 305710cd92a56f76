//! Diagnostics computed from snapshots and trajectory ensembles.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::distribution::DensityCdf;
use crate::dynamics::{propagate, rosen_gradient_diagnostic, FieldParams, Snapshot};
use crate::error::{Error, Result};
use crate::grid::{Spectral, WaveField};
use crate::scenario::{EngineKind, PacketKind, PotentialSpec, ScenarioConfig};
use crate::trajectories::{newtonian_ensemble, velocity_field, TrajectoryEnsemble};

/// `<x>` of `|psi|^2`, normalized by the field's norm.
pub fn mean_position(field: &WaveField) -> f64 {
    let g = field.grid;
    let (mut m0, mut m1) = (0.0, 0.0);
    for (k, a) in field.amplitudes.iter().enumerate() {
        let p = a.norm_sqr();
        m0 += p;
        m1 += p * g.x(k);
    }
    m1 / m0
}

/// Standard deviation of `|psi|^2`.
pub fn width(field: &WaveField) -> f64 {
    let g = field.grid;
    let mean = mean_position(field);
    let (mut m0, mut m2) = (0.0, 0.0);
    for (k, a) in field.amplitudes.iter().enumerate() {
        let p = a.norm_sqr();
        let d = g.x(k) - mean;
        m0 += p;
        m2 += p * d * d;
    }
    (m2 / m0).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketEnergy {
    /// `-(hbar^2/2m) <psi|psi''>`, evaluated in momentum space.
    pub kinetic: f64,
    /// Kinetic plus `<psi|U|psi>`.
    pub total: f64,
}

pub fn packet_energy(
    field: &WaveField,
    potential: &[f64],
    spectral: &Spectral,
    params: &FieldParams,
) -> PacketEnergy {
    let g = field.grid;
    let dk = g.dk();
    let spectrum = spectral.momentum_amplitudes(field);
    let k2: f64 = spectrum
        .iter()
        .zip(spectral.wavenumbers())
        .map(|(a, k)| a.norm_sqr() * k * k)
        .sum::<f64>()
        * dk
        / (2.0 * PI);
    let kinetic = params.hbar * params.hbar / (2.0 * params.mass) * k2;
    let pot: f64 = field
        .amplitudes
        .iter()
        .zip(potential)
        .map(|(a, u)| a.norm_sqr() * u)
        .sum::<f64>()
        * g.dx();
    PacketEnergy {
        kinetic,
        total: kinetic + pot,
    }
}

/// `hbar^2 k0^2 / 2m`, the energy of a point particle moving with the packet.
pub fn classical_point_energy(k0: f64, hbar: f64, mass: f64) -> f64 {
    hbar * hbar * k0 * k0 / (2.0 * mass)
}

/// Ensemble energy `int |psi|^2 (m v^2 / 2 + U) dx` with `v` the guiding velocity.
///
/// This drops the `(hbar^2/2m) int R'^2` part of the quantum kinetic energy.
pub fn classical_energy(
    field: &WaveField,
    potential: &[f64],
    spectral: &Spectral,
    params: &FieldParams,
) -> f64 {
    let v = velocity_field(field, spectral, params);
    field
        .amplitudes
        .iter()
        .zip(&v.values)
        .zip(potential)
        .map(|((a, v), u)| a.norm_sqr() * (0.5 * params.mass * v * v + u))
        .sum::<f64>()
        * field.grid.dx()
}

/// Cut position beyond which probability counts as transmitted.
pub fn transmission_cut(barrier: &PotentialSpec) -> Result<f64> {
    match *barrier {
        PotentialSpec::GaussianBarrier { center, width, .. } => Ok(center + 3.0 * width),
        other => Err(Error::Config(format!(
            "transmission needs a gaussian_barrier potential, got {}",
            other.name()
        ))),
    }
}

/// Fraction of the norm located beyond `x_b + 3 sigma_b`.
pub fn transmission_fraction(field: &WaveField, barrier: &PotentialSpec) -> Result<f64> {
    let cut = transmission_cut(barrier)?;
    let g = field.grid;
    let (mut total, mut beyond) = (0.0, 0.0);
    for (k, a) in field.amplitudes.iter().enumerate() {
        let p = a.norm_sqr();
        total += p;
        if g.x(k) > cut {
            beyond += p;
        }
    }
    Ok(if total > 0.0 {
        (beyond / total).clamp(0.0, 1.0)
    } else {
        0.0
    })
}

/// Counts adjacent-pair order inversions as rows of positions arrive.
///
/// Pairs are taken in the order of the first row. A pair that touches
/// exactly keeps its previous orientation until it separates again.
#[derive(Debug, Clone, Default)]
pub struct CrossingTracker {
    order: Vec<usize>,
    orientation: Vec<f64>,
    count: usize,
}

impl CrossingTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: &[f64]) -> usize {
        if self.order.is_empty() {
            self.order = (0..row.len()).collect();
            self.order.sort_by(|&a, &b| row[a].total_cmp(&row[b]));
            self.orientation = vec![1.0; row.len().saturating_sub(1)];
            return self.count;
        }
        for (p, w) in self.order.windows(2).enumerate() {
            let gap = row[w[1]] - row[w[0]];
            if gap != 0.0 && gap.signum() != self.orientation[p] {
                self.orientation[p] = gap.signum();
                self.count += 1;
            }
        }
        self.count
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

/// Number of adjacent-pair order inversions summed over consecutive snapshots.
pub fn crossing_count(ensemble: &TrajectoryEnsemble) -> usize {
    let mut tracker = CrossingTracker::new();
    for row in &ensemble.positions {
        tracker.push(row);
    }
    tracker.count()
}

/// Whether every snapshot keeps the initial ordering of the particles.
pub fn preserves_order(ensemble: &TrajectoryEnsemble, margin: f64) -> bool {
    let Some(first) = ensemble.positions.first() else {
        return true;
    };
    let mut order: Vec<usize> = (0..first.len()).collect();
    order.sort_by(|&a, &b| first[a].total_cmp(&first[b]));
    ensemble
        .positions
        .iter()
        .all(|row| order.windows(2).all(|w| row[w[1]] - row[w[0]] >= -margin))
}

/// Kolmogorov–Smirnov distance between sample positions and `|psi|^2`.
pub fn ks_distance(positions: &[f64], field: &WaveField) -> f64 {
    let Some(cdf) = DensityCdf::new(&field.grid, &field.density()) else {
        return 1.0;
    };
    let mut sorted = positions.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf.cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// KS distance between the ensemble and the field snapshot recorded at `t`.
pub fn equivariance_distance(
    ensemble: &TrajectoryEnsemble,
    snapshots: &[Snapshot],
    t: f64,
) -> Result<f64> {
    let idx = ensemble.time_index(t).ok_or(Error::UnknownTime(t))?;
    let tol = 1e-9 * t.abs().max(1.0);
    let snap = snapshots
        .iter()
        .find(|s| (s.time() - t).abs() <= tol)
        .ok_or(Error::UnknownTime(t))?;
    Ok(ks_distance(&ensemble.positions[idx], &snap.field))
}

/// Per-snapshot summary written alongside the density and trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub norm: f64,
    pub mean_x: f64,
    pub width: f64,
    pub e_classical: f64,
    pub e_quantum: f64,
    /// Only defined for barrier scenarios.
    pub transmission_fraction: Option<f64>,
    pub rosen_diagnostic: f64,
    pub crossing_count_to_date: usize,
}

/// Computes [`DiagnosticsRecord`]s for one scenario.
#[derive(Debug)]
pub struct Diagnostics {
    spectral: Spectral,
    potential: Vec<f64>,
    params: FieldParams,
    barrier: Option<PotentialSpec>,
}

impl Diagnostics {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        let grid = config.grid.build()?;
        let barrier = matches!(config.potential, PotentialSpec::GaussianBarrier { .. })
            .then_some(config.potential);
        Ok(Diagnostics {
            spectral: Spectral::new(grid),
            potential: crate::scenario::evaluate_potential(&config.potential, &grid),
            params: FieldParams::from_config(config),
            barrier,
        })
    }

    pub fn record(&self, snapshot: &Snapshot, crossings: usize) -> DiagnosticsRecord {
        let f = &snapshot.field;
        let energy = packet_energy(f, &self.potential, &self.spectral, &self.params);
        let norm = f.norm();
        DiagnosticsRecord {
            time: f.time,
            norm,
            mean_x: mean_position(f),
            width: width(f),
            e_classical: classical_energy(f, &self.potential, &self.spectral, &self.params) / norm,
            e_quantum: energy.total / norm,
            transmission_fraction: self
                .barrier
                .as_ref()
                .map(|b| transmission_fraction(f, b).unwrap_or(0.0)),
            rosen_diagnostic: rosen_gradient_diagnostic(&snapshot.q),
            crossing_count_to_date: crossings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrowingRow {
    pub n_particles: usize,
    pub sigma_cm: f64,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrowingStudyResult {
    pub rows: Vec<NarrowingRow>,
}

/// Minimum grid points per packet width accepted by [`narrowing_study`].
pub const MIN_POINTS_PER_SIGMA: f64 = 8.0;

/// Runs the classical equation with the packet width shrunk to
/// `sigma / sqrt(N)` for each `N` and records the largest distance between
/// the packet mean and a Newtonian particle started at `x0` with `hbar k0 / m`.
pub fn narrowing_study(base: &ScenarioConfig, counts: &[usize]) -> Result<NarrowingStudyResult> {
    if base.engine != EngineKind::Classical {
        return Err(Error::Config(
            "narrowing study needs a classical-engine scenario".into(),
        ));
    }
    if base.initial.kind != PacketKind::Gaussian {
        return Err(Error::Config(
            "narrowing study needs a single gaussian packet".into(),
        ));
    }
    let dx = base.grid.build()?.dx();
    let mut counts = counts.to_vec();
    counts.sort_unstable();
    if let Some(&n) = counts.iter().find(|&&n| n == 0) {
        return Err(Error::Config(format!(
            "particle count must be positive, got {n}"
        )));
    }
    if let Some(&nmax) = counts.last() {
        let narrowest = base.initial.sigma / (nmax as f64).sqrt();
        if narrowest / dx < MIN_POINTS_PER_SIGMA {
            return Err(Error::Config(format!(
                "grid too coarse for sigma_cm = {narrowest:.4}: {:.1} points per width, need {MIN_POINTS_PER_SIGMA}; use a finer grid",
                narrowest / dx
            )));
        }
    }
    let mut rows = Vec::with_capacity(counts.len());
    for n in counts {
        let mut cfg = base.clone();
        cfg.initial.sigma = base.initial.sigma / (n as f64).sqrt();
        let newton = newtonian_ensemble(&cfg, &[cfg.initial.x0], cfg.initial_velocity())?;
        let mut max_dev: f64 = 0.0;
        for (snap, row) in propagate(&cfg)?.zip(&newton.positions) {
            let snap = snap?;
            max_dev = max_dev.max((mean_position(&snap.field) - row[0]).abs());
        }
        rows.push(NarrowingRow {
            n_particles: n,
            sigma_cm: cfg.initial.sigma,
            max_deviation: max_dev,
        });
    }
    Ok(NarrowingStudyResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::scenario::{build_initial_state, preset, InitialStateSpec};
    use crate::trajectories::Provenance;
    use approx::assert_relative_eq;

    fn gaussian(sigma: f64, x0: f64, k0: f64) -> WaveField {
        let g = Grid::new(2048, -20.0, 20.0).unwrap();
        build_initial_state(&InitialStateSpec::gaussian(sigma, x0, k0), &g).unwrap()
    }

    fn energy(f: &WaveField) -> PacketEnergy {
        let zeros = vec![0.0; f.grid.n_points()];
        packet_energy(f, &zeros, &Spectral::new(f.grid), &FieldParams::natural())
    }

    #[test]
    fn gaussian_kinetic_energies() {
        assert_relative_eq!(
            energy(&gaussian(1.0, -6.0, 2.5)).kinetic,
            3.375,
            epsilon = 1e-10
        );
        assert_relative_eq!(
            energy(&gaussian(1.0, 0.0, 0.0)).kinetic,
            0.25,
            epsilon = 1e-10
        );
        // wide packets approach the point-particle value
        let wide = Grid::new(8192, -200.0, 200.0).unwrap();
        let f = build_initial_state(&InitialStateSpec::gaussian(20.0, 0.0, 2.5), &wide).unwrap();
        let e = packet_energy(
            &f,
            &vec![0.0; 8192],
            &Spectral::new(wide),
            &FieldParams::natural(),
        );
        assert!((e.kinetic - 3.125).abs() < 1e-3);
    }

    #[test]
    fn point_energies() {
        assert_eq!(classical_point_energy(2.5, 1.0, 1.0), 3.125);
        assert_eq!(classical_point_energy(0.0, 1.0, 1.0), 0.0);
        assert_eq!(classical_point_energy(2.0, 1.0, 1.0), 2.0);
    }

    #[test]
    fn classical_energy_of_moving_packet() {
        let f = gaussian(1.0, -6.0, 2.5);
        let zeros = vec![0.0; 2048];
        let e = classical_energy(&f, &zeros, &Spectral::new(f.grid), &FieldParams::natural());
        assert_relative_eq!(e, 3.125, epsilon = 1e-8);
    }

    #[test]
    fn mean_and_width() {
        let f = gaussian(1.0, -7.0, 2.0);
        assert_relative_eq!(mean_position(&f), -7.0, epsilon = 1e-10);
        assert_relative_eq!(width(&f), 1.0 / 2f64.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn transmission_requires_barrier() {
        let f = gaussian(1.0, 0.0, 0.0);
        assert!(transmission_fraction(&f, &PotentialSpec::Free).is_err());
        let barrier = PotentialSpec::GaussianBarrier {
            height: 2.0,
            center: -10.0,
            width: 1.0,
        };
        assert!(transmission_fraction(&f, &barrier).unwrap() > 0.999999);
    }

    fn ensemble(rows: Vec<Vec<f64>>) -> TrajectoryEnsemble {
        let n = rows[0].len();
        TrajectoryEnsemble {
            provenance: Provenance::Newtonian,
            times: (0..rows.len()).map(|t| t as f64).collect(),
            positions: rows,
            velocities: None,
            clamped: vec![false; n],
        }
    }

    #[test]
    fn crossing_counts() {
        assert_eq!(crossing_count(&ensemble(vec![vec![0.0], vec![5.0]])), 0);
        let swap = ensemble(vec![vec![-1.0, 1.0], vec![-0.5, 0.5], vec![0.5, -0.5]]);
        assert_eq!(crossing_count(&swap), 1);
        assert!(!preserves_order(&swap, 0.0));
        // touching without passing is not a crossing
        let touch = ensemble(vec![vec![-1.0, 1.0], vec![0.0, 0.0], vec![-1.0, 1.0]]);
        assert_eq!(crossing_count(&touch), 0);
        // passing through a tie is
        let through = ensemble(vec![
            vec![-1.0, 1.0],
            vec![0.0, 0.0],
            vec![1.0, -1.0],
            vec![-1.0, 1.0],
        ]);
        assert_eq!(crossing_count(&through), 2);
    }

    #[test]
    fn ks_of_exact_quantiles() {
        let f = gaussian(1.0, 0.0, 0.0);
        let seeds = crate::trajectories::seed_positions(&f, 100).unwrap();
        let d = ks_distance(&seeds, &f);
        assert!((d - 0.005).abs() < 1e-9, "{d}");
    }

    #[test]
    fn narrowing_rejects_coarse_grid_and_wrong_engine() {
        let base = preset("free_gauss").unwrap();
        assert!(narrowing_study(&base, &[1]).is_err());
        let classical = base.with_engine(EngineKind::Classical, None);
        let err = narrowing_study(&classical, &[1, 1000])
            .unwrap_err()
            .to_string();
        assert!(err.contains("finer grid"), "{err}");
    }

    #[test]
    fn narrowing_widths() {
        let mut base = preset("free_gauss")
            .unwrap()
            .with_engine(EngineKind::Classical, None);
        base.t_final = 0.02;
        base.grid.n_points = 4096;
        let res = narrowing_study(&base, &[100, 1]).unwrap();
        assert_eq!(res.rows[0].n_particles, 1);
        assert_eq!(res.rows[0].sigma_cm, 1.0);
        assert_eq!(res.rows[1].sigma_cm, 0.1);
    }
}
