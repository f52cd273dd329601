//! Physical model description: coefficient profiles, the shared spatial grid
//! and the travel-time maps `phi_i(x) = int_0^x 1/eps_i`.
//!
//! Every solver in the crate samples profiles on a [`Grid1D`] and walks
//! characteristics through [`TravelMap`]s, so the discrete boundary indices of
//! the kernel solvers and of the simulator line up.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Uniform grid on `[0, 1]` with `n` nodes (both endpoints included).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    n: usize,
    h: f64,
}

impl Grid1D {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("grid.n", format!("need at least 2 nodes, got {n}")));
        }
        Ok(Self {
            n,
            h: 1.0 / (n - 1) as f64,
        })
    }

    /// Grid whose spacing is (the nearest uniform spacing to) `h`.
    pub fn with_spacing(h: f64) -> Result<Self> {
        if !(h > 0.0 && h <= 1.0) {
            return Err(Error::invalid("grid.h", format!("spacing must lie in (0, 1], got {h}")));
        }
        Self::new((1.0 / h).round() as usize + 1)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            1.0
        } else {
            i as f64 * self.h
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Cell index and local coordinate in `[0, 1]` of `x`, clamped to the grid.
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let t = (x.clamp(0.0, 1.0)) / self.h;
        let i = (t.floor() as usize).min(self.n - 2);
        (i, (t - i as f64).clamp(0.0, 1.0))
    }

    pub fn same_as(&self, other: &Grid1D) -> bool {
        self.n == other.n
    }
}

/// A coefficient profile on `[0, 1]`.
#[derive(Clone)]
pub enum Profile {
    Constant(f64),
    /// Tabulated `(x, value)` pairs, linearly interpolated and clamped at the ends.
    Table { xs: Vec<f64>, ys: Vec<f64> },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Profile::Table { xs, ys } => f.debug_struct("Table").field("xs", xs).field("ys", ys).finish(),
            Profile::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl From<f64> for Profile {
    fn from(c: f64) -> Self {
        Profile::Constant(c)
    }
}

impl Profile {
    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Profile::Custom(Arc::new(f))
    }

    pub fn table(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.is_empty() {
            return Err(Error::invalid(
                "profile",
                format!("table needs matching non-empty columns ({} vs {})", xs.len(), ys.len()),
            ));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("profile", "table abscissae must be strictly increasing"));
        }
        Ok(Profile::Table { xs, ys })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Constant(c) => *c,
            Profile::Table { xs, ys } => interp_table(xs, ys, x),
            Profile::Custom(f) => f(x),
        }
    }

    pub fn sample(&self, grid: &Grid1D) -> Vec<f64> {
        (0..grid.n()).map(|i| self.eval(grid.x(i))).collect()
    }

    /// Derivative sampled on the grid: central differences inside, one-sided
    /// at the two ends.
    pub fn derivative_on(&self, grid: &Grid1D) -> Vec<f64> {
        if let Profile::Constant(_) = self {
            return vec![0.0; grid.n()];
        }
        finite_difference(&self.sample(grid), grid.h())
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Profile::Constant(_))
    }
}

/// Central differences inside, first-order one-sided differences at the ends.
pub fn finite_difference(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (values[1] - values[0]) / h
            } else if i + 1 == n {
                (values[n - 1] - values[n - 2]) / h
            } else {
                (values[i + 1] - values[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

fn interp_table(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let k = xs.partition_point(|&xi| xi <= x);
    let (x0, x1) = (xs[k - 1], xs[k]);
    let t = (x - x0) / (x1 - x0);
    ys[k - 1] * (1.0 - t) + ys[k] * t
}

/// Physical parameters of the delayed 2x2 hyperbolic plant.
#[derive(Debug, Clone)]
pub struct PlantParams {
    pub eps1: Profile,
    pub eps2: Profile,
    pub c1: Profile,
    pub c2: Profile,
    pub q: f64,
    /// True input delay.
    pub tau: f64,
    /// Delay value the controller is built with.
    pub tau_bar: f64,
}

impl PlantParams {
    /// `eps1 = eps2 = c1 = c2 = q = 1`, `tau = tau_bar = 3`.
    pub fn reference() -> Self {
        Self::constant(1.0, 1.0, 1.0, 1.0, 1.0, 3.0)
    }

    pub fn constant(eps1: f64, eps2: f64, c1: f64, c2: f64, q: f64, tau: f64) -> Self {
        Self {
            eps1: eps1.into(),
            eps2: eps2.into(),
            c1: c1.into(),
            c2: c2.into(),
            q,
            tau,
            tau_bar: tau,
        }
    }

    pub fn with_tau_bar(mut self, tau_bar: f64) -> Self {
        self.tau_bar = tau_bar;
        self
    }

    pub fn delta_tau(&self) -> f64 {
        self.tau_bar - self.tau
    }

    /// Checks every invariant on the samples of `grid`.
    pub fn validate(&self, grid: &Grid1D) -> Result<()> {
        for (name, prof) in [("eps1", &self.eps1), ("eps2", &self.eps2)] {
            for i in 0..grid.n() {
                let x = grid.x(i);
                let v = prof.eval(x);
                if !v.is_finite() {
                    return Err(Error::invalid(name, format!("non-finite value at x = {x}")));
                }
                if v <= 0.0 {
                    return Err(Error::NonPositiveSpeed { field: name, x, value: v });
                }
            }
        }
        for (name, prof) in [("c1", &self.c1), ("c2", &self.c2)] {
            if let Some(x) = grid.nodes().into_iter().find(|&x| !prof.eval(x).is_finite()) {
                return Err(Error::invalid(name, format!("non-finite value at x = {x}")));
            }
        }
        if !self.q.is_finite() {
            return Err(Error::invalid("q", "must be finite"));
        }
        for (name, v) in [("tau", self.tau), ("tau_bar", self.tau_bar)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Time after which the exactly compensated closed loop sits at zero:
    /// `tau + phi1(1) + phi2(1)`.
    pub fn t_final(&self, grid: &Grid1D) -> Result<f64> {
        let phi1 = TravelMap::build(&self.eps1, grid)?;
        let phi2 = TravelMap::build(&self.eps2, grid)?;
        if !(self.tau > 0.0) {
            return Err(Error::invalid("tau", "must be positive"));
        }
        Ok(self.tau + phi1.total() + phi2.total())
    }
}

/// Monotone travel-time map `phi(x) = int_0^x 1/eps` and its inverse.
#[derive(Debug, Clone)]
pub struct TravelMap {
    grid: Grid1D,
    phi: Vec<f64>,
    /// `1/eps` at the nodes, used for the slope of the inverse beyond the table.
    slowness: Vec<f64>,
}

impl TravelMap {
    /// Cumulative trapezoid of `1/eps` on `grid`.
    pub fn build(eps: &Profile, grid: &Grid1D) -> Result<Self> {
        let samples = eps.sample(grid);
        Self::from_samples(&samples, grid)
    }

    pub fn from_samples(eps: &[f64], grid: &Grid1D) -> Result<Self> {
        if eps.len() != grid.n() {
            return Err(Error::GridMismatch(format!(
                "speed profile has {} samples, grid has {}",
                eps.len(),
                grid.n()
            )));
        }
        for (i, &e) in eps.iter().enumerate() {
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::NonPositiveSpeed {
                    field: "eps",
                    x: grid.x(i),
                    value: e,
                });
            }
        }
        let slowness: Vec<f64> = eps.iter().map(|e| 1.0 / e).collect();
        let mut phi = Vec::with_capacity(grid.n());
        phi.push(0.0);
        for i in 1..grid.n() {
            let dx = grid.x(i) - grid.x(i - 1);
            let prev = phi[i - 1];
            phi.push(prev + 0.5 * dx * (slowness[i - 1] + slowness[i]));
        }
        Ok(Self {
            grid: *grid,
            phi,
            slowness,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.phi
    }

    /// `phi(1)`, the total travel time across the domain.
    #[inline]
    pub fn total(&self) -> f64 {
        self.phi[self.phi.len() - 1]
    }

    /// Largest `1/eps` sample.
    pub fn max_slowness(&self) -> f64 {
        self.slowness.iter().copied().fold(0.0, f64::max)
    }

    #[inline]
    pub fn phi(&self, x: f64) -> f64 {
        let (i, t) = self.grid.locate(x);
        self.phi[i] * (1.0 - t) + self.phi[i + 1] * t
    }

    /// Piecewise-linear inverse; arguments are clamped to `[0, phi(1)]`.
    #[inline]
    pub fn inverse(&self, s: f64) -> f64 {
        let total = self.total();
        if s <= 0.0 {
            return 0.0;
        }
        if s >= total {
            return 1.0;
        }
        let k = self.phi.partition_point(|&p| p <= s);
        let (p0, p1) = (self.phi[k - 1], self.phi[k]);
        let (x0, x1) = (self.grid.x(k - 1), self.grid.x(k));
        x0 + (x1 - x0) * (s - p0) / (p1 - p0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_speed_is_identity() {
        let g = Grid1D::new(11).unwrap();
        let m = TravelMap::build(&Profile::Constant(1.0), &g).unwrap();
        for i in 0..g.n() {
            assert!((m.samples()[i] - g.x(i)).abs() < 1e-15);
        }
        assert!((m.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn double_speed_halves_travel_time() {
        let g = Grid1D::new(101).unwrap();
        let m = TravelMap::build(&Profile::Constant(2.0), &g).unwrap();
        assert!((m.phi(0.7) - 0.35).abs() < 1e-14);
        assert!((m.inverse(0.25) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn affine_speed_against_refined_quadrature() {
        let eps = Profile::custom(|x| 1.0 + x);
        let coarse = TravelMap::build(&eps, &Grid1D::new(101).unwrap()).unwrap();
        let fine = TravelMap::build(&eps, &Grid1D::new(10001).unwrap()).unwrap();
        assert!((coarse.total() - fine.total()).abs() <= 1e-4);
        assert!((fine.total() - std::f64::consts::LN_2).abs() < 1e-8);
    }

    #[test]
    fn rejects_non_positive_speed() {
        let g = Grid1D::new(5).unwrap();
        let err = TravelMap::build(&Profile::custom(|x| 0.5 - x), &g).unwrap_err();
        assert!(matches!(err, Error::NonPositiveSpeed { .. }));
    }

    #[test]
    fn t_final_examples() {
        let g = Grid1D::new(101).unwrap();
        let p = PlantParams::reference();
        assert!((p.t_final(&g).unwrap() - 5.0).abs() < 1e-12);
        let p = PlantParams::constant(2.0, 1.0, 0.0, 0.0, 1.0, 1.0);
        assert!((p.t_final(&g).unwrap() - 2.5).abs() < 1e-12);
        let p = PlantParams::constant(1.0, 1.0, 0.0, 0.0, 1.0, 1e-9);
        assert!((p.t_final(&g).unwrap() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn validation_names_the_field() {
        let g = Grid1D::new(11).unwrap();
        let mut p = PlantParams::reference();
        p.eps2 = Profile::Constant(-1.0);
        match p.validate(&g) {
            Err(Error::NonPositiveSpeed { field, .. }) => assert_eq!(field, "eps2"),
            other => panic!("unexpected {other:?}"),
        }
        let p = PlantParams::reference().with_tau_bar(0.0);
        assert!(matches!(p.validate(&g), Err(Error::InvalidParameter { field, .. }) if field == "tau_bar"));
    }

    #[test]
    fn table_profile_interpolates() {
        let p = Profile::table(vec![0.0, 0.5, 1.0], vec![1.0, 2.0, 4.0]).unwrap();
        assert_eq!(p.eval(0.25), 1.5);
        assert_eq!(p.eval(0.75), 3.0);
        assert_eq!(p.eval(2.0), 4.0);
        assert!(Profile::table(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn derivative_of_linear_profile() {
        let g = Grid1D::new(21).unwrap();
        let d = Profile::custom(|x| 3.0 * x + 1.0).derivative_on(&g);
        assert!(d.iter().all(|v| (v - 3.0).abs() < 1e-10));
    }
}
