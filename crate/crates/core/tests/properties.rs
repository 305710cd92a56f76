use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use wavesim_core::analysis::{
    classical_energy, crossing_count, packet_energy, preserves_order, transmission_fraction,
};
use wavesim_core::distribution::DensityCdf;
use wavesim_core::dynamics::{quantum_potential, split_step, EngineMode, FieldParams};
use wavesim_core::scenario::{
    build_initial_state, evaluate_potential, InitialStateSpec, PotentialSpec,
};
use wavesim_core::trajectories::{Provenance, TrajectoryEnsemble};
use wavesim_core::{Grid, Spectral, WaveField};

fn grid(n_log2: u32) -> Grid {
    Grid::new(1 << n_log2, -10.0, 10.0).unwrap()
}

fn random_field(g: Grid, values: &[(f64, f64)]) -> WaveField {
    let amps = values
        .iter()
        .map(|&(re, im)| Complex64::new(re, im))
        .collect();
    WaveField::new(g, amps, 0.0).unwrap()
}

fn field_strategy() -> impl Strategy<Value = WaveField> {
    (3u32..9).prop_flat_map(|p| {
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1usize << p)
            .prop_map(move |v| random_field(grid(p), &v))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn polar_round_trip(field in field_strategy(), hbar in 0.1..3.0f64) {
        let (r, s) = field.modulus_phase(hbar);
        let rebuilt = WaveField::from_polar(field.grid, &r, &s, hbar).unwrap();
        for (a, b) in field.amplitudes.iter().zip(&rebuilt.amplitudes) {
            prop_assert!((a - b).norm() <= 1e-14 * a.norm().max(1.0));
        }
    }

    #[test]
    fn spectral_round_trip(field in field_strategy()) {
        let sp = Spectral::new(field.grid);
        let mut buf = field.amplitudes.clone();
        sp.forward(&mut buf);
        sp.inverse(&mut buf);
        let scale = field.amplitudes.iter().map(|a| a.norm()).fold(0.0, f64::max);
        for (a, b) in field.amplitudes.iter().zip(&buf) {
            prop_assert!((a - b).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn parseval(field in field_strategy()) {
        let sp = Spectral::new(field.grid);
        let n = field.norm();
        prop_assert!((sp.momentum_norm(&field) - n).abs() <= 1e-10 * n.max(1.0));
    }

    #[test]
    fn quantum_potential_is_scale_invariant(
        sigma in 0.5..2.0f64,
        x0 in -2.0..2.0f64,
        k0 in -3.0..3.0f64,
        c in 1e-3..1e3f64,
        window in prop::sample::select(vec![1usize, 3, 5, 7]),
    ) {
        let g = Grid::new(512, -15.0, 15.0).unwrap();
        let f = build_initial_state(&InitialStateSpec::gaussian(sigma, x0, k0), &g).unwrap();
        let mut scaled = f.clone();
        scaled.scale(c);
        let params = FieldParams::natural().with_window(window);
        let q = quantum_potential(&f, &params);
        let qs = quantum_potential(&scaled, &params);
        let qmax = q.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (a, b) in q.values.iter().zip(&qs.values) {
            prop_assert!((a - b).abs() <= 1e-9 * qmax);
        }
    }

    #[test]
    fn potential_sampling_is_pure(height in 0.1..5.0f64, center in -3.0..3.0f64, width in 0.2..2.0f64) {
        let g = grid(9);
        let spec = PotentialSpec::GaussianBarrier { height, center, width };
        prop_assert_eq!(evaluate_potential(&spec, &g), evaluate_potential(&spec, &g));
    }

    #[test]
    fn classical_step_preserves_norm(field in field_strategy(), dt in 1e-4..1e-2f64) {
        let u = vec![0.0; field.grid.n_points()];
        let out = split_step(&field, &u, EngineMode::Classical, dt, &FieldParams::natural()).unwrap();
        prop_assert!((out.norm() - field.norm()).abs() <= 1e-13 * field.norm().max(1.0));
    }

    #[test]
    fn transmission_fraction_is_a_probability(field in field_strategy(), center in -5.0..5.0f64) {
        let barrier = PotentialSpec::GaussianBarrier { height: 1.0, center, width: 0.5 };
        let t = transmission_fraction(&field, &barrier).unwrap();
        prop_assert!((0.0..=1.0).contains(&t));
    }

    #[test]
    fn cdf_quantile_inverts(field in field_strategy(), p in 0.001..0.999f64) {
        let cdf = DensityCdf::new(&field.grid, &field.density()).unwrap();
        let x = cdf.quantile(p);
        prop_assert!((cdf.cdf(x) - p).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quantum_minus_classical_energy(sigma in 0.7..2.0f64, k0 in -3.0..3.0f64, x0 in -3.0..3.0f64) {
        let g = Grid::new(2048, -20.0, 20.0).unwrap();
        let f = build_initial_state(&InitialStateSpec::gaussian(sigma, x0, k0), &g).unwrap();
        let sp = Spectral::new(g);
        let zeros = vec![0.0; g.n_points()];
        let params = FieldParams::natural();
        let eq = packet_energy(&f, &zeros, &sp, &params).total;
        let ecl = classical_energy(&f, &zeros, &sp, &params);
        prop_assert!((eq - ecl - 1.0 / (4.0 * sigma * sigma)).abs() < 1e-6);
    }

    #[test]
    fn crossings_match_order_preservation(
        rows in prop::collection::vec(prop::collection::vec(-3i32..3, 4), 1..6),
    ) {
        let positions: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|&v| v as f64).collect())
            .collect();
        let ens = TrajectoryEnsemble {
            provenance: Provenance::Newtonian,
            times: (0..positions.len()).map(|t| t as f64).collect(),
            positions,
            velocities: None,
            clamped: vec![false; 4],
        };
        prop_assert_eq!(crossing_count(&ens) == 0, preserves_order(&ens, 0.0));
    }

    #[test]
    fn plane_wave_is_a_momentum_eigenstate(j in -20i32..20, dt in 1e-4..1e-2f64) {
        let g = grid(8);
        let k = j as f64 * g.dk();
        let f = WaveField::from_fn(g, |x| Complex64::from_polar(1.0 / g.length().sqrt(), k * x));
        let u = vec![0.0; g.n_points()];
        let out = split_step(&f, &u, EngineMode::Quantum, dt, &FieldParams::natural()).unwrap();
        let phase = Complex64::from_polar(1.0, -k * k * dt / 2.0);
        for (a, b) in f.amplitudes.iter().zip(&out.amplitudes) {
            prop_assert!((a * phase - b).norm() < 1e-12);
        }
    }
}

#[test]
fn wavenumber_spacing_and_extent() {
    for p in 3..12 {
        let g = Grid::new(1 << p, -3.0, 5.0).unwrap();
        let ks = g.wavenumbers();
        assert!((g.dk() - 2.0 * PI / g.length()).abs() < 1e-14);
        let kmax = ks.iter().map(|k| k.abs()).fold(0.0, f64::max);
        assert!((kmax - PI / g.dx()).abs() < 1e-9);
    }
}
