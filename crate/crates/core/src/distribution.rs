//! Cumulative distribution of a sampled density.
//!
//! The density is treated as piecewise linear between grid points, so the
//! cumulative function is a trapezoid sum and is inverted by solving the
//! quadratic on each cell.

use crate::grid::Grid;

#[derive(Debug, Clone)]
pub struct DensityCdf {
    x0: f64,
    dx: f64,
    density: Vec<f64>,
    /// Cumulative probability at each grid point, ending at exactly 1.
    cumulative: Vec<f64>,
}

impl DensityCdf {
    /// Builds the normalized CDF. Returns `None` for a density with no mass.
    pub fn new(grid: &Grid, density: &[f64]) -> Option<Self> {
        let dx = grid.dx();
        let mut cumulative = Vec::with_capacity(density.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in density.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * dx;
            cumulative.push(acc);
        }
        if acc.is_nan() || acc <= 0.0 {
            return None;
        }
        let density = density.iter().map(|d| d / acc).collect();
        for c in &mut cumulative {
            *c /= acc;
        }
        Some(DensityCdf {
            x0: grid.x_min(),
            dx,
            density,
            cumulative,
        })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let u = (x - self.x0) / self.dx;
        if u <= 0.0 {
            return 0.0;
        }
        let k = u.floor() as usize;
        if k + 1 >= self.density.len() {
            return 1.0;
        }
        let s = (u - k as f64) * self.dx;
        let (a, b) = (self.density[k], self.density[k + 1]);
        let slope = (b - a) / self.dx;
        (self.cumulative[k] + a * s + 0.5 * slope * s * s).min(1.0)
    }

    /// Inverse CDF for `p` in `[0, 1]`.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        // first cell whose right edge reaches p
        let k = self
            .cumulative
            .partition_point(|&c| c < p)
            .clamp(1, self.cumulative.len() - 1)
            - 1;
        let target = p - self.cumulative[k];
        let (a, b) = (self.density[k], self.density[k + 1]);
        let slope = (b - a) / self.dx;
        let s = if slope.abs() * self.dx < 1e-12 * (a + b).max(f64::MIN_POSITIVE) {
            if a > 0.0 {
                target / a
            } else {
                0.0
            }
        } else {
            // a s + slope s^2 / 2 = target, root with the numerically stable form
            let disc = (a * a + 2.0 * slope * target).max(0.0);
            let denom = a + disc.sqrt();
            if denom > 0.0 {
                2.0 * target / denom
            } else {
                0.0
            }
        };
        self.x0 + (k as f64 * self.dx + s.clamp(0.0, self.dx))
    }
}
