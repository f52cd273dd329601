//! Volterra kernels on the triangle `0 <= y <= x <= 1`.
//!
//! The direct kernels solve the Goursat system
//!
//! ```text
//! eps1(x) K11_x + eps1(y) K11_y = -eps1'(y) K11 - c2(y) K12
//! eps1(x) K12_x - eps2(y) K12_y =  eps2'(y) K12 - c1(y) K11
//! eps2(x) K21_x - eps1(y) K21_y =  eps1'(y) K21 + c2(y) K22
//! eps2(x) K22_x + eps2(y) K22_y = -eps2'(y) K22 + c1(y) K21
//! K12(x,x) = c1/(eps1+eps2),   K21(x,x) = -c2/(eps1+eps2)
//! eps2(0) K12(x,0) = q eps1(0) K11(x,0),   eps2(0) K22(x,0) = q eps1(0) K21(x,0)
//! ```
//!
//! Off-diagonal kernels are carried from the diagonal, diagonal kernels from
//! the bottom edge. Inverse kernels either come from the operator identity
//! `L = K + K o L` ([`solve_l`]) or from their own Goursat system
//! ([`solve_l_goursat`]), which differs only in the couplings (`c1(x)`, `c2(x)`
//! instead of `c1(y)`, `c2(y)`, with the signs of the inverse map).

use rayon::prelude::*;

use super::series::{sum_series, SeriesReport};
use super::{trapezoid, ResidualStats};
use crate::error::{Error, Result};
use crate::plant::{Grid1D, PlantParams, TravelMap};

const SERIES_TOL: f64 = 1e-10;
const MAX_TERMS: usize = 200;

/// Scalar samples on the triangular lattice `{(x_i, y_j) : j <= i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFieldTriangle {
    grid: Grid1D,
    values: Vec<f64>,
}

#[inline]
fn tri_index(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

impl KernelFieldTriangle {
    pub fn zeros(grid: Grid1D) -> Self {
        let n = grid.n();
        Self {
            grid,
            values: vec![0.0; n * (n + 1) / 2],
        }
    }

    fn from_values(grid: Grid1D, values: Vec<f64>) -> Self {
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at lattice node `(x_i, y_j)`; `j > i` lies outside the triangle.
    pub fn get(&self, i: usize, j: usize) -> Result<f64> {
        if j > i || i >= self.grid.n() {
            return Err(Error::OutOfDomain {
                x: self.grid.x(i.min(self.grid.n() - 1)),
                y: self.grid.x(j.min(self.grid.n() - 1)),
            });
        }
        Ok(self.values[tri_index(i, j)])
    }

    #[inline]
    pub(crate) fn node(&self, i: usize, j: usize) -> f64 {
        debug_assert!(j <= i);
        self.values[tri_index(i, j)]
    }

    /// Piecewise-linear interpolation on the two sub-triangles of each cell.
    /// Points with `y > x` are projected onto the diagonal.
    #[inline]
    pub fn at(&self, x: f64, y: f64) -> f64 {
        interp_triangle(&self.values, &self.grid, x, y)
    }

    /// `K(1, y_j)` for every `j`.
    pub fn trace_x1(&self) -> Vec<f64> {
        let n = self.grid.n();
        (0..n).map(|j| self.node(n - 1, j)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_identically_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// `(x_i, y_j, value)` triples in lattice order.
    pub fn triples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let n = self.grid.n();
        (0..n).flat_map(move |i| (0..=i).map(move |j| (self.grid.x(i), self.grid.x(j), self.node(i, j))))
    }
}

#[inline]
fn interp_triangle(values: &[f64], grid: &Grid1D, x: f64, y: f64) -> f64 {
    let (i, a) = grid.locate(x);
    let (mut j, mut b) = grid.locate(y.min(x));
    if j > i {
        j = i;
        b = a;
    }
    if j == i && b > a {
        b = a;
    }
    if b <= a {
        (1.0 - a) * values[tri_index(i, j)]
            + (a - b) * values[tri_index(i + 1, j)]
            + b * values[tri_index(i + 1, j + 1)]
    } else {
        (1.0 - b) * values[tri_index(i, j)]
            + (b - a) * values[tri_index(i, j + 1)]
            + a * values[tri_index(i + 1, j + 1)]
    }
}

/// The four kernels `[11, 12, 21, 22]` of one Volterra map.
#[derive(Debug, Clone)]
pub struct TriangleKernels {
    pub k11: KernelFieldTriangle,
    pub k12: KernelFieldTriangle,
    pub k21: KernelFieldTriangle,
    pub k22: KernelFieldTriangle,
    pub report: SeriesReport,
}

impl TriangleKernels {
    pub fn grid(&self) -> &Grid1D {
        self.k11.grid()
    }

    pub fn fields(&self) -> [&KernelFieldTriangle; 4] {
        [&self.k11, &self.k12, &self.k21, &self.k22]
    }

    fn from_packed(grid: Grid1D, packed: Vec<f64>, report: SeriesReport) -> Self {
        let m = packed.len() / 4;
        let part = |k: usize| KernelFieldTriangle::from_values(grid, packed[k * m..(k + 1) * m].to_vec());
        Self {
            k11: part(0),
            k12: part(1),
            k21: part(2),
            k22: part(3),
            report,
        }
    }

    fn packed(&self) -> Vec<f64> {
        self.fields().iter().flat_map(|f| f.values.iter().copied()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.fields().iter().map(|f| f.max_abs()).fold(0.0, f64::max)
    }

    /// Applies `(I - K) state` i.e. `w_i = u_i - int_0^x K_i1 u1 + K_i2 u2`
    /// when `sign = -1`, and `u_i = w_i + int_0^x L_i1 w1 + L_i2 w2` when `sign = +1`.
    pub fn apply_volterra(&self, a: &[f64], b: &[f64], sign: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let grid = self.grid();
        let n = grid.n();
        if a.len() != n || b.len() != n {
            return Err(Error::GridMismatch(format!(
                "state has {}/{} samples, kernels have {n}",
                a.len(),
                b.len()
            )));
        }
        let h = grid.h();
        let mut out1 = a.to_vec();
        let mut out2 = b.to_vec();
        let mut buf = Vec::with_capacity(n);
        for i in 1..n {
            for (row, out) in [(0usize, &mut out1), (1usize, &mut out2)] {
                let (fa, fb) = if row == 0 { (&self.k11, &self.k12) } else { (&self.k21, &self.k22) };
                buf.clear();
                buf.extend((0..=i).map(|j| fa.node(i, j) * a[j] + fb.node(i, j) * b[j]));
                out[i] += sign * trapezoid(&buf, h);
            }
        }
        Ok((out1, out2))
    }
}

/// Direct and inverse kernels sharing one grid.
#[derive(Debug, Clone)]
pub struct TriangleKernelSet {
    pub k: TriangleKernels,
    pub l: TriangleKernels,
}

// ---------------------------------------------------------------------------
// Goursat system
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum LineCoef {
    OfX(Vec<f64>),
    OfY(Vec<f64>),
}

impl LineCoef {
    #[inline]
    fn eval(&self, grid: &Grid1D, x: f64, y: f64) -> f64 {
        match self {
            LineCoef::OfX(v) => super::lerp_samples(v, grid, x),
            LineCoef::OfY(v) => super::lerp_samples(v, grid, y),
        }
    }

    #[inline]
    fn node(&self, i: usize, j: usize) -> f64 {
        match self {
            LineCoef::OfX(v) => v[i],
            LineCoef::OfY(v) => v[j],
        }
    }
}

/// `eps_row(x) dK/dx + sigma eps_col(y) dK/dy = sum coef * K_m`, kernel index
/// `k = 2 row + col`, `sigma = +1` on the diagonal kernels.
struct GoursatSystem<'a> {
    grid: Grid1D,
    maps: [&'a TravelMap; 2],
    speeds: [Vec<f64>; 2],
    couplings: [Vec<(usize, LineCoef)>; 4],
    /// Value on `y = x` for the off-diagonal kernels.
    diag: [Option<Vec<f64>>; 4],
    /// `K_k(x, 0) = factor * K_m(x, 0)` for the diagonal kernels.
    bottom: [Option<(usize, f64)>; 4],
}

#[derive(Debug, Clone, Copy)]
struct NodePlan {
    x: f64,
    y: f64,
    /// Backward characteristic length.
    len: f64,
    steps: usize,
    /// Constant contribution (diagonal data).
    base: f64,
    /// Abscissa where a diagonal kernel's characteristic meets `y = 0`.
    bottom_x: f64,
}

impl<'a> GoursatSystem<'a> {
    fn row_col(k: usize) -> (usize, usize) {
        (k / 2, k % 2)
    }

    fn sigma(k: usize) -> f64 {
        let (r, c) = Self::row_col(k);
        if r == c {
            1.0
        } else {
            -1.0
        }
    }

    fn step_length(&self) -> f64 {
        let vmax = self.speeds.iter().flatten().copied().fold(0.0, f64::max);
        self.grid.h() / vmax
    }

    #[inline]
    fn position(&self, k: usize, x: f64, y: f64, r: f64) -> (f64, f64) {
        let (row, col) = Self::row_col(k);
        let xr = self.maps[row].inverse(self.maps[row].phi(x) - r);
        let yr = self.maps[col].inverse(self.maps[col].phi(y) - Self::sigma(k) * r);
        (xr, yr.min(xr))
    }

    fn plan(&self, k: usize, i: usize, j: usize) -> NodePlan {
        let (row, col) = Self::row_col(k);
        let (x, y) = (self.grid.x(i), self.grid.x(j));
        let (len, base, bottom_x) = if Self::sigma(k) > 0.0 {
            // phi(x) - phi(y) is conserved; the curve reaches y = 0.
            let len = self.maps[col].phi(y);
            let bx = self.maps[row].inverse(self.maps[row].phi(x) - len);
            (len, 0.0, bx)
        } else if i == j {
            (0.0, self.diag[k].as_ref().map_or(0.0, |d| d[i]), x)
        } else {
            let (fx, fy) = (self.maps[row], self.maps[col]);
            let (px, py) = (fx.phi(x), fy.phi(y));
            let gap = |r: f64| fx.inverse(px - r) - fy.inverse(py + r);
            let (mut lo, mut hi) = (0.0, px.min(fy.total() - py));
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if gap(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let r = 0.5 * (lo + hi);
            let xi = fx.inverse(px - r);
            let base = self.diag[k]
                .as_ref()
                .map_or(0.0, |d| super::lerp_samples(d, &self.grid, xi));
            (r, base, xi)
        };
        let steps = if len > 0.0 {
            (len / self.step_length()).ceil().max(1.0) as usize
        } else {
            0
        };
        NodePlan {
            x,
            y,
            len,
            steps,
            base,
            bottom_x,
        }
    }

    fn plans(&self) -> Vec<(usize, NodePlan)> {
        let n = self.grid.n();
        let mut out = Vec::with_capacity(4 * n * (n + 1) / 2);
        for k in 0..4 {
            for i in 0..n {
                for j in 0..=i {
                    out.push((k, self.plan(k, i, j)));
                }
            }
        }
        out
    }

    /// Linear part of the integral equation at one node.
    fn linear(&self, k: usize, plan: &NodePlan, current: &[f64]) -> f64 {
        let m = current.len() / 4;
        let field = |idx: usize| &current[idx * m..(idx + 1) * m];
        let mut acc = 0.0;
        if plan.steps > 0 && !self.couplings[k].is_empty() {
            let dr = plan.len / plan.steps as f64;
            for s in 0..=plan.steps {
                let w = if s == 0 || s == plan.steps { 0.5 * dr } else { dr };
                let (xr, yr) = self.position(k, plan.x, plan.y, s as f64 * dr);
                for (src, coef) in &self.couplings[k] {
                    let c = coef.eval(&self.grid, xr, yr);
                    if c != 0.0 {
                        acc += w * c * interp_triangle(field(*src), &self.grid, xr, yr);
                    }
                }
            }
        }
        if let Some((src, factor)) = self.bottom[k] {
            if factor != 0.0 {
                acc += factor * interp_triangle(field(src), &self.grid, plan.bottom_x, 0.0);
            }
        }
        acc
    }

    fn solve(&self) -> Result<TriangleKernels> {
        let plans = self.plans();
        let base: Vec<f64> = plans.iter().map(|(_, p)| p.base).collect();
        let apply = |cur: &[f64], out: &mut [f64]| {
            out.par_iter_mut()
                .zip(plans.par_iter())
                .for_each(|(o, (k, p))| *o = self.linear(*k, p, cur));
        };
        let (packed, report) = sum_series(base, apply, SERIES_TOL, MAX_TERMS, |_| {})?;
        Ok(TriangleKernels::from_packed(self.grid, packed, report))
    }

    /// First-order upwind residual of every kernel PDE at the interior nodes.
    fn residual(&self, kernels: &TriangleKernels) -> [ResidualStats; 4] {
        let n = self.grid.n();
        let h = self.grid.h();
        let packed = kernels.packed();
        let m = packed.len() / 4;
        let at = |k: usize, i: usize, j: usize| packed[k * m + tri_index(i, j)];
        let mut out = [ResidualStats::default(); 4];
        for (k, slot) in out.iter_mut().enumerate() {
            let (row, col) = Self::row_col(k);
            let sigma = Self::sigma(k);
            let mut samples = Vec::new();
            for i in 1..n {
                for j in 0..=i {
                    let ok = if sigma > 0.0 { j >= 1 && j < i } else { j + 2 <= i };
                    if !ok {
                        continue;
                    }
                    let dx = (at(k, i, j) - at(k, i - 1, j)) / h;
                    let dy = if sigma > 0.0 {
                        (at(k, i, j) - at(k, i, j - 1)) / h
                    } else {
                        (at(k, i, j + 1) - at(k, i, j)) / h
                    };
                    let lhs = self.speeds[row][i] * dx + sigma * self.speeds[col][j] * dy;
                    let rhs: f64 = self.couplings[k]
                        .iter()
                        .map(|(src, coef)| coef.node(i, j) * at(*src, i, j))
                        .sum();
                    samples.push(lhs - rhs);
                }
            }
            *slot = ResidualStats::from_samples(samples);
        }
        out
    }
}

struct Coefficients {
    maps: [TravelMap; 2],
    speeds: [Vec<f64>; 2],
    deps: [Vec<f64>; 2],
    c1: Vec<f64>,
    c2: Vec<f64>,
    diag12: Vec<f64>,
    diag21: Vec<f64>,
    /// `K11(x,0) = f11 K12(x,0)`, `K22(x,0) = f22 K21(x,0)`.
    f11: f64,
    f22: f64,
}

impl Coefficients {
    fn new(params: &PlantParams, grid: &Grid1D) -> Result<Self> {
        params.validate(grid)?;
        let e1 = params.eps1.sample(grid);
        let e2 = params.eps2.sample(grid);
        let c1 = params.c1.sample(grid);
        let c2 = params.c2.sample(grid);
        let diag12 = (0..grid.n()).map(|i| c1[i] / (e1[i] + e2[i])).collect();
        let diag21 = (0..grid.n()).map(|i| -c2[i] / (e1[i] + e2[i])).collect();
        let ratio = params.q * e1[0] / e2[0];
        Ok(Self {
            maps: [TravelMap::from_samples(&e1, grid)?, TravelMap::from_samples(&e2, grid)?],
            deps: [params.eps1.derivative_on(grid), params.eps2.derivative_on(grid)],
            speeds: [e1, e2],
            c1,
            c2,
            diag12,
            diag21,
            f11: if ratio == 0.0 { 0.0 } else { 1.0 / ratio },
            f22: ratio,
        })
    }

    fn direct(&self, grid: Grid1D) -> GoursatSystem<'_> {
        let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
        GoursatSystem {
            grid,
            maps: [&self.maps[0], &self.maps[1]],
            speeds: self.speeds.clone(),
            couplings: [
                vec![(0, LineCoef::OfY(neg(&self.deps[0]))), (1, LineCoef::OfY(neg(&self.c2)))],
                vec![(1, LineCoef::OfY(self.deps[1].clone())), (0, LineCoef::OfY(neg(&self.c1)))],
                vec![(2, LineCoef::OfY(self.deps[0].clone())), (3, LineCoef::OfY(self.c2.clone()))],
                vec![(3, LineCoef::OfY(neg(&self.deps[1]))), (2, LineCoef::OfY(self.c1.clone()))],
            ],
            diag: [None, Some(self.diag12.clone()), Some(self.diag21.clone()), None],
            bottom: [Some((1, self.f11)), None, None, Some((2, self.f22))],
        }
    }

    fn inverse(&self, grid: Grid1D) -> GoursatSystem<'_> {
        let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
        GoursatSystem {
            grid,
            maps: [&self.maps[0], &self.maps[1]],
            speeds: self.speeds.clone(),
            couplings: [
                vec![(0, LineCoef::OfY(neg(&self.deps[0]))), (2, LineCoef::OfX(self.c1.clone()))],
                vec![(1, LineCoef::OfY(self.deps[1].clone())), (3, LineCoef::OfX(self.c1.clone()))],
                vec![(2, LineCoef::OfY(self.deps[0].clone())), (0, LineCoef::OfX(neg(&self.c2)))],
                vec![(3, LineCoef::OfY(neg(&self.deps[1]))), (1, LineCoef::OfX(neg(&self.c2)))],
            ],
            diag: [None, Some(self.diag12.clone()), Some(self.diag21.clone()), None],
            bottom: [Some((1, self.f11)), None, None, Some((2, self.f22))],
        }
    }
}

/// Solves the direct kernels `K^ij` by successive approximation along
/// characteristics.
pub fn solve_k(params: &PlantParams, grid: &Grid1D) -> Result<TriangleKernels> {
    let coefs = Coefficients::new(params, grid)?;
    coefs.direct(*grid).solve()
}

/// Inverse kernels from the operator identity `L = K + K o L`, summed as a
/// Neumann series on the lattice.
pub fn solve_l(grid: &Grid1D, k: &TriangleKernels) -> Result<TriangleKernels> {
    if !k.grid().same_as(grid) {
        return Err(Error::GridMismatch("direct kernels live on another grid".into()));
    }
    let n = grid.n();
    let h = grid.h();
    let m = n * (n + 1) / 2;
    let kp = k.packed();
    let kv = |a: usize, i: usize, j: usize| kp[a * m + tri_index(i, j)];
    let base = kp.clone();
    let index: Vec<(usize, usize, usize)> = (0..4)
        .flat_map(|a| (0..n).flat_map(move |i| (0..=i).map(move |j| (a, i, j))))
        .collect();
    let apply = |cur: &[f64], out: &mut [f64]| {
        out.par_iter_mut().zip(index.par_iter()).for_each(|(o, &(a, i, j))| {
            let (row, col) = (a / 2, a % 2);
            let mut acc = 0.0;
            if i > j {
                for mid in 0..2 {
                    let kk = 2 * row + mid;
                    let ll = 2 * mid + col;
                    let mut s = 0.0;
                    for xi in j..=i {
                        let w = if xi == j || xi == i { 0.5 } else { 1.0 };
                        s += w * kv(kk, i, xi) * cur[ll * m + tri_index(xi, j)];
                    }
                    acc += h * s;
                }
            }
            *o = acc;
        });
    };
    let (packed, report) = sum_series(base, apply, SERIES_TOL, MAX_TERMS, |_| {})?;
    Ok(TriangleKernels::from_packed(*grid, packed, report))
}

/// Inverse kernels from their own Goursat system.
pub fn solve_l_goursat(params: &PlantParams, grid: &Grid1D) -> Result<TriangleKernels> {
    let coefs = Coefficients::new(params, grid)?;
    coefs.inverse(*grid).solve()
}

/// Upwind residual of the direct kernel PDEs (`[K11, K12, K21, K22]`).
pub fn residual_k(params: &PlantParams, k: &TriangleKernels) -> Result<[ResidualStats; 4]> {
    let coefs = Coefficients::new(params, k.grid())?;
    Ok(coefs.direct(*k.grid()).residual(k))
}

/// Upwind residual of the inverse kernel PDEs.
pub fn residual_l(params: &PlantParams, l: &TriangleKernels) -> Result<[ResidualStats; 4]> {
    let coefs = Coefficients::new(params, l.grid())?;
    Ok(coefs.inverse(*l.grid()).residual(l))
}

impl TriangleKernelSet {
    pub fn solve(params: &PlantParams, grid: &Grid1D) -> Result<Self> {
        let k = solve_k(params, grid)?;
        let l = solve_l(grid, &k)?;
        Ok(Self { k, l })
    }
}

/// Delay-ignorant feedback `U = int K21(1,y) u1 + int K22(1,y) u2`.
pub fn nominal_control(k21_trace: &[f64], k22_trace: &[f64], u1: &[f64], u2: &[f64], grid: &Grid1D) -> Result<f64> {
    let n = grid.n();
    if [k21_trace.len(), k22_trace.len(), u1.len(), u2.len()].iter().any(|&l| l != n) {
        return Err(Error::GridMismatch(format!("nominal control expects {n} samples per trace")));
    }
    let integrand: Vec<f64> = (0..n).map(|j| k21_trace[j] * u1[j] + k22_trace[j] * u2[j]).collect();
    Ok(trapezoid(&integrand, grid.h()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid1D {
        Grid1D::new(n).unwrap()
    }

    #[test]
    fn uncoupled_plant_gives_exact_zero_kernels() {
        let g = grid(31);
        let p = PlantParams::constant(1.0, 2.0, 0.0, 0.0, 0.7, 1.0);
        let set = TriangleKernelSet::solve(&p, &g).unwrap();
        for f in set.k.fields().into_iter().chain(set.l.fields()) {
            assert!(f.is_identically_zero());
        }
    }

    #[test]
    fn boundary_data_is_imposed() {
        let g = grid(41);
        let p = PlantParams::constant(1.0, 1.5, 0.8, -0.6, 0.5, 1.0);
        let k = solve_k(&p, &g).unwrap();
        for i in 0..g.n() {
            assert!((k.k12.node(i, i) - 0.8 / 2.5).abs() < 1e-14);
            assert!((k.k21.node(i, i) + (-0.6) / 2.5).abs() < 1e-14);
            assert!((1.5 * k.k12.node(i, 0) - 0.5 * k.k11.node(i, 0)).abs() < 1e-8);
            assert!((1.5 * k.k22.node(i, 0) - 0.5 * k.k21.node(i, 0)).abs() < 1e-8);
        }
    }

    #[test]
    fn out_of_triangle_access_is_an_error() {
        let f = KernelFieldTriangle::zeros(grid(5));
        assert!(f.get(2, 3).is_err());
        assert!(f.get(3, 2).is_ok());
    }

    #[test]
    fn triangle_interpolation_is_exact_for_affine_data() {
        let g = grid(9);
        let mut vals = vec![0.0; 45];
        for i in 0..9 {
            for j in 0..=i {
                vals[tri_index(i, j)] = 2.0 * g.x(i) - 3.0 * g.x(j) + 0.5;
            }
        }
        let f = KernelFieldTriangle::from_values(g, vals);
        for &(x, y) in &[(0.3, 0.1), (0.55, 0.55), (1.0, 0.99), (0.71, 0.2)] {
            assert!((f.at(x, y) - (2.0 * x - 3.0 * y + 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn nominal_control_quadrature() {
        let g = grid(101);
        let ones = vec![1.0; 101];
        let zeros = vec![0.0; 101];
        assert_eq!(nominal_control(&ones, &ones, &zeros, &zeros, &g).unwrap(), 0.0);
        assert_eq!(nominal_control(&zeros, &zeros, &ones, &ones, &g).unwrap(), 0.0);
        assert!((nominal_control(&ones, &ones, &ones, &ones, &g).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(
            nominal_control(&ones[..50], &ones, &ones, &ones, &g),
            Err(Error::GridMismatch(_))
        ));
    }
}
