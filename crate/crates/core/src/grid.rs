//! Spatial discretization and the complex field container.
//!
//! The mesh is uniform and periodic: point `k` sits at `x_min + k * dx` and
//! the domain length is `n_points * dx`. Wavenumbers follow the usual DFT
//! layout, non-negative frequencies first and then the negative ones.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest mesh accepted by [`Grid::new`].
pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n_points: usize,
    x_min: f64,
    dx: f64,
}

impl Grid {
    /// Builds a grid of `n_points` cells covering `[x_min, x_max)`.
    pub fn new(n_points: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if !n_points.is_power_of_two() {
            return Err(Error::config(format!(
                "grid size must be a power of two, got {n_points}"
            )));
        }
        if n_points < MIN_POINTS {
            return Err(Error::config(format!(
                "grid needs at least {MIN_POINTS} points, got {n_points}"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::config(format!(
                "degenerate domain [{x_min}, {x_max}]"
            )));
        }
        Ok(Grid {
            n_points,
            x_min,
            dx: (x_max - x_min) / n_points as f64,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    /// Right end of the periodic domain (not itself a grid point).
    pub fn x_max(&self) -> f64 {
        self.x_min + self.length()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn length(&self) -> f64 {
        self.n_points as f64 * self.dx
    }

    #[inline]
    pub fn x(&self, k: usize) -> f64 {
        self.x_min + k as f64 * self.dx
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.x(k)).collect()
    }

    pub fn dk(&self) -> f64 {
        2.0 * PI / self.length()
    }

    /// Wavenumbers in DFT order. The Nyquist entry is reported as `-pi/dx`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points as i64;
        let dk = self.dk();
        (0..n)
            .map(|j| {
                if j < n / 2 {
                    j as f64 * dk
                } else {
                    (j - n) as f64 * dk
                }
            })
            .collect()
    }

    /// Fractional grid coordinate of `x`, unwrapped.
    #[inline]
    pub fn fractional_index(&self, x: f64) -> f64 {
        (x - self.x_min) / self.dx
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x(self.n_points - 1)
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} points on [{}, {}) (dx = {})",
            self.n_points,
            self.x_min,
            self.x_max(),
            self.dx
        )
    }
}

/// Complex amplitudes on a grid at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub grid: Grid,
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
}

impl WaveField {
    pub fn new(grid: Grid, amplitudes: Vec<Complex64>, time: f64) -> Result<Self> {
        if amplitudes.len() != grid.n_points() {
            return Err(Error::Mismatch(format!(
                "field has {} amplitudes but the grid has {} points",
                amplitudes.len(),
                grid.n_points()
            )));
        }
        Ok(WaveField {
            grid,
            amplitudes,
            time,
        })
    }

    pub fn zeros(grid: Grid) -> Self {
        WaveField {
            grid,
            amplitudes: vec![Complex64::new(0.0, 0.0); grid.n_points()],
            time: 0.0,
        }
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Complex64) -> Self {
        let amplitudes = (0..grid.n_points()).map(|k| f(grid.x(k))).collect();
        WaveField {
            grid,
            amplitudes,
            time: 0.0,
        }
    }

    /// Rebuilds a field from modulus and phase, `psi = R exp(i S / hbar)`.
    pub fn from_polar(grid: Grid, modulus: &[f64], phase: &[f64], hbar: f64) -> Result<Self> {
        if modulus.len() != phase.len() {
            return Err(Error::Mismatch("modulus and phase lengths differ".into()));
        }
        let amplitudes = modulus
            .iter()
            .zip(phase)
            .map(|(&r, &s)| Complex64::from_polar(r, s / hbar))
            .collect();
        WaveField::new(grid, amplitudes, 0.0)
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `sum |psi_k|^2 dx`.
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn scale(&mut self, factor: f64) {
        for a in &mut self.amplitudes {
            *a *= factor;
        }
    }

    /// Rescales to unit norm and returns the norm found before rescaling.
    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            self.scale(1.0 / n.sqrt());
        }
        n
    }

    /// Polar decomposition `(R, S)` with `S = hbar * arg(psi)` in `(-pi hbar, pi hbar]`.
    ///
    /// No unwrapping is done. Nodes report `S = 0`.
    pub fn modulus_phase(&self, hbar: f64) -> (Vec<f64>, Vec<f64>) {
        self.amplitudes
            .iter()
            .map(|a| {
                let r = a.norm();
                if r == 0.0 {
                    (0.0, 0.0)
                } else {
                    let mut arg = a.arg();
                    if arg <= -PI {
                        arg = PI;
                    }
                    (r, hbar * arg)
                }
            })
            .unzip()
    }

    pub fn is_finite(&self) -> bool {
        self.amplitudes
            .iter()
            .all(|a| a.re.is_finite() && a.im.is_finite())
    }

    /// Largest pointwise amplitude difference to another field on the same grid.
    pub fn max_deviation(&self, other: &WaveField) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Forward and inverse DFT on a fixed grid, plus the derived spectral operators.
///
/// `forward` is unnormalized and `inverse` divides by `n`, so the pair is the
/// identity. Multiplying the forward transform by `dx` gives samples of the
/// continuum Fourier transform at the grid wavenumbers.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    wavenumbers: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral")
            .field("grid", &self.grid)
            .finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.n_points();
        Spectral {
            grid,
            wavenumbers: grid.wavenumbers(),
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.fwd.process(data);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.inv.process(data);
        let scale = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// Spectral first derivative.
    pub fn derivative(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut buf = values.to_vec();
        self.forward(&mut buf);
        let n = buf.len();
        for (j, (c, &k)) in buf.iter_mut().zip(&self.wavenumbers).enumerate() {
            // the Nyquist mode has no sign, so its odd derivative is dropped
            if j == n / 2 {
                *c = Complex64::new(0.0, 0.0);
            } else {
                *c *= Complex64::new(0.0, k);
            }
        }
        self.inverse(&mut buf);
        buf
    }

    /// Samples of the continuum transform, `dx * DFT(psi)`.
    pub fn momentum_amplitudes(&self, field: &WaveField) -> Vec<Complex64> {
        let mut buf = field.amplitudes.clone();
        self.forward(&mut buf);
        let dx = self.grid.dx();
        for v in &mut buf {
            *v *= dx;
        }
        buf
    }

    /// `sum |psi_hat_j|^2 dk / 2pi`, equal to the position-space norm.
    pub fn momentum_norm(&self, field: &WaveField) -> f64 {
        let dk = self.grid.dk();
        self.momentum_amplitudes(field)
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            * dk
            / (2.0 * PI)
    }
}
