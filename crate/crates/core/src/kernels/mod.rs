//! Backstepping kernels.
//!
//! [`triangle`] holds the Volterra kernels `K^ij`, `L^ij` on `0 <= y <= x <= 1`;
//! [`rectangle`] holds the affine-Volterra kernels `(alpha1, alpha2)` and
//! `(beta1, beta2)` on the unit square together with the gains `p` and `mu`.
//! Both solvers turn the kernel PDEs into integral equations along
//! characteristics and sum the successive-approximation series.

pub mod rectangle;
pub mod triangle;

mod series;

pub use rectangle::{
    alpha_problem, audit_series_bound, beta_problem, characteristics, gain_traces, pde_residual,
    region_of, solve_by_iteration, solve_general, solve_general_visit, BoundAudit,
    BoundConstants, Branch, Characteristic, Coefficient, F1Region, F2Region, GainKind, GainTrace,
    GeneralKernelProblem, IterationStart, RectKernelPair, Region, SolveOptions, Which,
};
pub use series::{SeriesReport, SeriesTerm};
pub use triangle::{
    nominal_control, residual_k, residual_l, solve_k, solve_l, solve_l_goursat, KernelFieldTriangle, TriangleKernelSet,
    TriangleKernels,
};

use crate::plant::Grid1D;

/// Samples of a scalar on the full `n x n` lattice of the unit square,
/// stored with `x` as the slow index.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareField {
    grid: Grid1D,
    values: Vec<f64>,
}

impl SquareField {
    pub fn zeros(grid: Grid1D) -> Self {
        Self {
            values: vec![0.0; grid.n() * grid.n()],
            grid,
        }
    }

    pub(crate) fn from_values(grid: Grid1D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n() * grid.n());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix * self.grid.n() + iy
    }

    #[inline]
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[ix * self.grid.n() + iy]
    }

    #[inline]
    pub fn set(&mut self, ix: usize, iy: usize, v: f64) {
        let n = self.grid.n();
        self.values[ix * n + iy] = v;
    }

    /// Bilinear interpolation; arguments are clamped to the square.
    #[inline]
    pub fn at(&self, x: f64, y: f64) -> f64 {
        bilinear(&self.values, &self.grid, x, y)
    }

    /// `F(x, y_j)` for a fixed `x`, interpolated linearly in `x`.
    pub fn column_at(&self, x: f64) -> Vec<f64> {
        let (i, t) = self.grid.locate(x);
        (0..self.grid.n())
            .map(|j| self.get(i, j) * (1.0 - t) + self.get(i + 1, j) * t)
            .collect()
    }

    /// `F(x_i, 1)` for every `i`.
    pub fn top_trace(&self) -> Vec<f64> {
        let n = self.grid.n();
        (0..n).map(|i| self.get(i, n - 1)).collect()
    }

    /// `F(1, y_j)` for every `j`.
    pub fn right_trace(&self) -> Vec<f64> {
        let n = self.grid.n();
        (0..n).map(|j| self.get(n - 1, j)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[inline]
pub(crate) fn bilinear(values: &[f64], grid: &Grid1D, x: f64, y: f64) -> f64 {
    let n = grid.n();
    let (i, a) = grid.locate(x);
    let (j, b) = grid.locate(y);
    let k = i * n + j;
    let f00 = values[k];
    let f01 = values[k + 1];
    let f10 = values[k + n];
    let f11 = values[k + n + 1];
    (1.0 - a) * ((1.0 - b) * f00 + b * f01) + a * ((1.0 - b) * f10 + b * f11)
}

/// Linear interpolation of grid samples, clamped to `[0, 1]`.
#[inline]
pub fn lerp_samples(values: &[f64], grid: &Grid1D, x: f64) -> f64 {
    let (i, t) = grid.locate(x);
    values[i] * (1.0 - t) + values[i + 1] * t
}

/// Composite trapezoid of samples with uniform spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

/// Discrete residual statistics of a kernel PDE on a lattice.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ResidualStats {
    /// Area-weighted mean of `|r|` over the nodes that were checked.
    pub mean_abs: f64,
    pub max_abs: f64,
    pub checked: usize,
}

impl ResidualStats {
    pub(crate) fn from_samples(samples: impl IntoIterator<Item = f64>) -> Self {
        let mut sum = 0.0;
        let mut max = 0.0f64;
        let mut count = 0usize;
        for r in samples {
            sum += r.abs();
            max = max.max(r.abs());
            count += 1;
        }
        Self {
            mean_abs: if count > 0 { sum / count as f64 } else { 0.0 },
            max_abs: max,
            checked: count,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_reproduces_bilinear_functions() {
        let g = Grid1D::new(11).unwrap();
        let mut f = SquareField::zeros(g);
        for i in 0..g.n() {
            for j in 0..g.n() {
                let (x, y) = (g.x(i), g.x(j));
                f.set(i, j, 1.0 + 2.0 * x - y + 3.0 * x * y);
            }
        }
        for &(x, y) in &[(0.33, 0.71), (0.0, 1.0), (1.0, 0.05), (0.999, 0.999)] {
            let exact = 1.0 + 2.0 * x - y + 3.0 * x * y;
            assert!((f.at(x, y) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn trapezoid_of_constant() {
        assert!((trapezoid(&[1.0; 101], 0.01) - 1.0).abs() < 1e-14);
        assert_eq!(trapezoid(&[2.0], 0.5), 0.0);
    }
}
