//! Coupled kernels with two boundary conditions each, on the unit square.
//!
//! The general problem is
//!
//! ```text
//! (1/tau) F1_x - eps1(y) F1_y = g1 + C11 F1 + C12 F2
//! (1/tau) F2_x + eps2(y) F2_y = g2 + C21 F1 + C22 F2
//! F1(x,1) = 0,  F1(0,y) = h1(y),  F2(x,0) = q1(x) F1(x,0),  F2(0,y) = h2(y)
//! ```
//!
//! Every node is reached by exactly one backward characteristic per
//! equation. `F1` either comes down from the top edge or across from the
//! left edge; `F2` comes up from the bottom edge (where it inherits
//! `q1 F1`, itself written through `F1`'s own integral equation at the foot
//! point) or from the left edge. The resulting integral equations are affine
//! in `F`, and `F = sum_n F^n` with `F^{n+1}` the linear part applied to `F^n`.
//!
//! The alpha kernels (controller side) and beta kernels (inverse map) are two
//! instances of this problem.

use rayon::prelude::*;

use super::series::{fixed_point, sum_series, SeriesReport, SeriesTerm};
use super::{bilinear, lerp_samples, ResidualStats, SquareField};
use crate::error::{Error, Result};
use crate::plant::{finite_difference, Grid1D, PlantParams, TravelMap};

/// A coefficient function on the unit square.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    Zero,
    /// Depends on `x` only, sampled on the kernel grid.
    OfX(Vec<f64>),
    /// Depends on `y` only, sampled on the kernel grid.
    OfY(Vec<f64>),
    Field(SquareField),
}

impl Coefficient {
    #[inline]
    pub fn eval(&self, grid: &Grid1D, x: f64, y: f64) -> f64 {
        match self {
            Coefficient::Zero => 0.0,
            Coefficient::OfX(v) => lerp_samples(v, grid, x),
            Coefficient::OfY(v) => lerp_samples(v, grid, y),
            Coefficient::Field(f) => f.at(x, y),
        }
    }

    #[inline]
    fn node(&self, i: usize, j: usize) -> f64 {
        match self {
            Coefficient::Zero => 0.0,
            Coefficient::OfX(v) => v[i],
            Coefficient::OfY(v) => v[j],
            Coefficient::Field(f) => f.get(i, j),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Coefficient::Zero => true,
            Coefficient::OfX(v) | Coefficient::OfY(v) => v.iter().all(|&c| c == 0.0),
            Coefficient::Field(f) => f.values().iter().all(|&c| c == 0.0),
        }
    }

    fn of_y_or_zero(v: Vec<f64>) -> Self {
        if v.iter().all(|&c| c == 0.0) {
            Coefficient::Zero
        } else {
            Coefficient::OfY(v)
        }
    }

    /// `max(|C|, |dC/dx|)` over the lattice.
    fn bound(&self, grid: &Grid1D) -> f64 {
        let amax = |v: &[f64]| v.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        match self {
            Coefficient::Zero => 0.0,
            Coefficient::OfY(v) => amax(v),
            Coefficient::OfX(v) => amax(v).max(amax(&finite_difference(v, grid.h()))),
            Coefficient::Field(f) => {
                let n = grid.n();
                let mut m = f.max_abs();
                for j in 0..n {
                    let col: Vec<f64> = (0..n).map(|i| f.get(i, j)).collect();
                    m = m.max(amax(&finite_difference(&col, grid.h())));
                }
                m
            }
        }
    }

    fn check(&self, grid: &Grid1D, name: &str) -> Result<()> {
        let ok = match self {
            Coefficient::Zero => true,
            Coefficient::OfX(v) | Coefficient::OfY(v) => {
                if v.len() != grid.n() {
                    return Err(Error::GridMismatch(format!("coefficient {name} has {} samples", v.len())));
                }
                v.iter().all(|c| c.is_finite())
            }
            Coefficient::Field(f) => {
                if !f.grid().same_as(grid) {
                    return Err(Error::GridMismatch(format!("coefficient {name} lives on another grid")));
                }
                f.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(name, "non-finite sample"))
        }
    }
}

/// Data of one instance of the general two-boundary kernel problem.
#[derive(Debug, Clone)]
pub struct GeneralKernelProblem {
    pub tau: f64,
    pub eps1: Vec<f64>,
    pub eps2: Vec<f64>,
    pub phi1: TravelMap,
    pub phi2: TravelMap,
    /// `couplings[i][k]` multiplies `F_{k+1}` in equation `i+1`.
    pub couplings: [[Coefficient; 2]; 2],
    pub sources: [Coefficient; 2],
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub q1: Vec<f64>,
}

impl GeneralKernelProblem {
    /// Problem with the given speeds and delay and all other data zero.
    pub fn homogeneous(eps1: Vec<f64>, eps2: Vec<f64>, grid: &Grid1D, tau: f64) -> Result<Self> {
        let phi1 = TravelMap::from_samples(&eps1, grid)?;
        let phi2 = TravelMap::from_samples(&eps2, grid)?;
        let n = grid.n();
        Ok(Self {
            tau,
            eps1,
            eps2,
            phi1,
            phi2,
            couplings: [
                [Coefficient::Zero, Coefficient::Zero],
                [Coefficient::Zero, Coefficient::Zero],
            ],
            sources: [Coefficient::Zero, Coefficient::Zero],
            h1: vec![0.0; n],
            h2: vec![0.0; n],
            q1: vec![0.0; n],
        })
    }

    pub fn grid(&self) -> &Grid1D {
        self.phi1.grid()
    }

    pub fn validate(&self) -> Result<()> {
        let grid = *self.grid();
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::invalid("tau", format!("must be positive, got {}", self.tau)));
        }
        if !self.phi2.grid().same_as(&grid) {
            return Err(Error::GridMismatch("travel maps on different grids".into()));
        }
        for (name, v) in [
            ("h1", &self.h1),
            ("h2", &self.h2),
            ("q1", &self.q1),
            ("eps1", &self.eps1),
            ("eps2", &self.eps2),
        ] {
            if v.len() != grid.n() {
                return Err(Error::GridMismatch(format!("{name} has {} samples, grid has {}", v.len(), grid.n())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(name, "non-finite sample"));
            }
        }
        for (i, row) in self.couplings.iter().enumerate() {
            for (k, c) in row.iter().enumerate() {
                c.check(&grid, &format!("C{}{}", i + 1, k + 1))?;
            }
        }
        self.sources[0].check(&grid, "g1")?;
        self.sources[1].check(&grid, "g2")?;
        Ok(())
    }
}

/// Controller-side problem: `alpha` with delay `tau_eff`.
///
/// `C11 = eps1'`, `C12 = c2`, `C21 = c1`, `C22 = -eps2'`, `h = (K21(1,.), K22(1,.))`,
/// `q1 = q eps1(0)/eps2(0)`.
pub fn alpha_problem(
    params: &PlantParams,
    grid: &Grid1D,
    tau_eff: f64,
    k21_trace: &[f64],
    k22_trace: &[f64],
) -> Result<GeneralKernelProblem> {
    params.validate(grid)?;
    check_trace(k21_trace, grid, "K21(1,.)")?;
    check_trace(k22_trace, grid, "K22(1,.)")?;
    let mut pb = GeneralKernelProblem::homogeneous(params.eps1.sample(grid), params.eps2.sample(grid), grid, tau_eff)?;
    let neg = |v: Vec<f64>| v.into_iter().map(|x| -x).collect::<Vec<_>>();
    pb.couplings = [
        [
            Coefficient::of_y_or_zero(params.eps1.derivative_on(grid)),
            Coefficient::of_y_or_zero(params.c2.sample(grid)),
        ],
        [
            Coefficient::of_y_or_zero(params.c1.sample(grid)),
            Coefficient::of_y_or_zero(neg(params.eps2.derivative_on(grid))),
        ],
    ];
    pb.h1 = k21_trace.to_vec();
    pb.h2 = k22_trace.to_vec();
    pb.q1 = vec![params.q * pb.eps1[0] / pb.eps2[0]; grid.n()];
    pb.validate()?;
    Ok(pb)
}

/// Inverse-map problem: `beta` with delay `tau_eff`.
///
/// Same principal part and reflection as [`alpha_problem`], no cross
/// coupling, boundary data `(L21(1,.), L22(1,.))`.
pub fn beta_problem(
    params: &PlantParams,
    grid: &Grid1D,
    tau_eff: f64,
    l21_trace: &[f64],
    l22_trace: &[f64],
) -> Result<GeneralKernelProblem> {
    params.validate(grid)?;
    check_trace(l21_trace, grid, "L21(1,.)")?;
    check_trace(l22_trace, grid, "L22(1,.)")?;
    let mut pb = GeneralKernelProblem::homogeneous(params.eps1.sample(grid), params.eps2.sample(grid), grid, tau_eff)?;
    let neg = |v: Vec<f64>| v.into_iter().map(|x| -x).collect::<Vec<_>>();
    pb.couplings = [
        [Coefficient::of_y_or_zero(params.eps1.derivative_on(grid)), Coefficient::Zero],
        [Coefficient::Zero, Coefficient::of_y_or_zero(neg(params.eps2.derivative_on(grid)))],
    ];
    pb.h1 = l21_trace.to_vec();
    pb.h2 = l22_trace.to_vec();
    pb.q1 = vec![params.q * pb.eps1[0] / pb.eps2[0]; grid.n()];
    pb.validate()?;
    Ok(pb)
}

fn check_trace(v: &[f64], grid: &Grid1D, name: &str) -> Result<()> {
    if v.len() != grid.n() {
        return Err(Error::GridMismatch(format!("{name} has {} samples, grid has {}", v.len(), grid.n())));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Characteristics and regions
// ---------------------------------------------------------------------------

/// The four backward characteristic families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// `F1` traced back to the top edge `y = 1`.
    F1ToTop,
    /// `F1` traced back to the left edge `x = 0`.
    F1ToLeft,
    /// `F2` traced back to the bottom edge `y = 0`.
    F2ToBottom,
    /// `F2` traced back to the left edge `x = 0`.
    F2ToLeft,
}

/// Sampled characteristic, parametrised from its boundary foot (`s = 0`) to
/// the node (`s = terminal`).
#[derive(Debug, Clone, PartialEq)]
pub struct Characteristic {
    pub s: Vec<f64>,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub terminal: f64,
}

#[derive(Debug, Clone, Copy)]
struct Geometry<'a> {
    tau: f64,
    phi1: &'a TravelMap,
    phi2: &'a TravelMap,
}

impl<'a> Geometry<'a> {
    fn of(p: &'a GeneralKernelProblem) -> Self {
        Self {
            tau: p.tau,
            phi1: &p.phi1,
            phi2: &p.phi2,
        }
    }

    #[inline]
    fn terminal(&self, branch: Branch, x: f64, y: f64) -> f64 {
        match branch {
            Branch::F1ToTop => self.phi1.total() - self.phi1.phi(y),
            Branch::F2ToBottom => self.phi2.phi(y),
            Branch::F1ToLeft | Branch::F2ToLeft => self.tau * x,
        }
    }

    /// Point at parameter `s`; `py` is `phi_i(y)` for the branch's speed.
    #[inline]
    fn position(&self, branch: Branch, x: f64, py: f64, s: f64) -> (f64, f64) {
        let tau = self.tau;
        match branch {
            Branch::F1ToTop => {
                let s11 = self.phi1.total() - py;
                (x + (s - s11) / tau, self.phi1.inverse(self.phi1.total() - s))
            }
            Branch::F1ToLeft => (s / tau, self.phi1.inverse(tau * x + py - s)),
            Branch::F2ToBottom => (x + (s - py) / tau, self.phi2.inverse(s)),
            Branch::F2ToLeft => (s / tau, self.phi2.inverse(py - tau * x + s)),
        }
    }

    fn phi_y(&self, branch: Branch, y: f64) -> f64 {
        match branch {
            Branch::F1ToTop | Branch::F1ToLeft => self.phi1.phi(y),
            Branch::F2ToBottom | Branch::F2ToLeft => self.phi2.phi(y),
        }
    }

    fn f1_region(&self, x: f64, y: f64) -> F1Region {
        if self.phi1.total() - self.phi1.phi(y) <= self.tau * x {
            F1Region::Top
        } else {
            F1Region::Left
        }
    }

    fn f2_region(&self, x: f64, y: f64) -> F2Region {
        let s21 = self.phi2.phi(y);
        if s21 <= self.tau * x {
            let foot = x - s21 / self.tau;
            match self.f1_region(foot, 0.0) {
                F1Region::Top => F2Region::BottomFromTop,
                F1Region::Left => F2Region::BottomFromLeft,
            }
        } else {
            F2Region::Left
        }
    }
}

/// Samples the backward characteristic of `branch` through `(x, y)`.
pub fn characteristics(problem: &GeneralKernelProblem, x: f64, y: f64, branch: Branch) -> Result<Characteristic> {
    if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
        return Err(Error::OutOfDomain { x, y });
    }
    let geo = Geometry::of(problem);
    let terminal = geo.terminal(branch, x, y);
    let py = geo.phi_y(branch, y);
    let steps = step_count(problem, terminal);
    let ds = if steps > 0 { terminal / steps as f64 } else { 0.0 };
    let mut c = Characteristic {
        s: Vec::with_capacity(steps + 1),
        xs: Vec::with_capacity(steps + 1),
        ys: Vec::with_capacity(steps + 1),
        terminal,
    };
    for k in 0..=steps {
        let s = k as f64 * ds;
        let (px, pyy) = geo.position(branch, x, py, s);
        c.s.push(s);
        c.xs.push(px);
        c.ys.push(pyy);
    }
    Ok(c)
}

/// Sub-domain of `F1`: which edge its backward characteristic reaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum F1Region {
    /// Reaches `y = 1` first (ties included).
    Top,
    /// Reaches `x = 0` first.
    Left,
}

/// Sub-domain of `F2`. For the bottom case the tag also records the region
/// of `F1` at the foot point `(x - phi2(y)/tau, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum F2Region {
    BottomFromTop,
    BottomFromLeft,
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    F1(F1Region),
    F2(F2Region),
}

/// Which kernel a region query refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    F1,
    F2,
}

pub fn region_of(problem: &GeneralKernelProblem, x: f64, y: f64, which: Which) -> Region {
    let geo = Geometry::of(problem);
    match which {
        Which::F1 => Region::F1(geo.f1_region(x, y)),
        Which::F2 => Region::F2(geo.f2_region(x, y)),
    }
}

fn step_count(problem: &GeneralKernelProblem, len: f64) -> usize {
    if len <= 0.0 {
        return 0;
    }
    let vmax = problem
        .eps1
        .iter()
        .chain(&problem.eps2)
        .copied()
        .fold(0.0, f64::max);
    let ds = problem.grid().h() * problem.tau.min(1.0 / vmax);
    (len / ds).ceil().max(1.0) as usize
}

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Path {
    branch: Branch,
    x: f64,
    py: f64,
    len: f64,
    steps: usize,
}

#[derive(Debug, Clone, Copy)]
struct NodePlan {
    eq: usize,
    path: Path,
    /// Boundary datum at the foot of `path` (zero on the top edge).
    boundary: f64,
    /// Bottom-edge reflection: `q1(foot)` times `F1`'s equation at `(foot, 0)`.
    reflect: Option<(f64, Path, f64)>,
}

struct Solver<'a> {
    pb: &'a GeneralKernelProblem,
    geo: Geometry<'a>,
    grid: Grid1D,
    /// Region codes of every node, for `F1` and `F2`.
    tags: [Vec<u8>; 2],
}

impl F1Region {
    fn code(self) -> u8 {
        self as u8
    }
}

impl F2Region {
    fn code(self) -> u8 {
        self as u8
    }
}

impl<'a> Solver<'a> {
    fn new(pb: &'a GeneralKernelProblem) -> Self {
        let geo = Geometry::of(pb);
        let grid = *pb.grid();
        let n = grid.n();
        let mut tags = [Vec::with_capacity(n * n), Vec::with_capacity(n * n)];
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (grid.x(i), grid.x(j));
                tags[0].push(geo.f1_region(x, y).code());
                tags[1].push(geo.f2_region(x, y).code());
            }
        }
        Self { pb, geo, grid, tags }
    }

    #[inline]
    fn tags_at(&self, x: f64, y: f64) -> [u8; 2] {
        [self.geo.f1_region(x, y).code(), self.geo.f2_region(x, y).code()]
    }

    /// Interpolates `F_{eq+1}` at `(x, y)` as seen from region `want`: only
    /// cell corners of that region are used, so jumps across region
    /// interfaces are not smeared into neighbouring cells.
    #[inline]
    fn sample_in(&self, eq: usize, values: &[f64], x: f64, y: f64, want: u8) -> f64 {
        let n = self.grid.n();
        let (i, a) = self.grid.locate(x);
        let (j, b) = self.grid.locate(y);
        let k = i * n + j;
        let idx = [k, k + 1, k + n, k + n + 1];
        let tags = &self.tags[eq];
        if idx.iter().all(|&c| tags[c] == want) {
            return bilinear(values, &self.grid, x, y);
        }
        // Corner offsets (da, db) in cell units.
        const OFF: [(f64, f64); 4] = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)];
        let same: Vec<usize> = (0..4).filter(|&c| tags[idx[c]] == want).collect();
        match same.len() {
            0 | 4 => bilinear(values, &self.grid, x, y),
            3 => {
                // Affine through the three corners; the pivot is the one
                // opposite the missing corner.
                let missing = (0..4).find(|c| !same.contains(c)).unwrap_or(0);
                let p = 3 - missing;
                let (pa, pb) = OFF[p];
                let fp = values[idx[p]];
                let qa = p ^ 2;
                let qb = p ^ 1;
                let sa = (values[idx[qa]] - fp) / (OFF[qa].0 - pa);
                let sb = (values[idx[qb]] - fp) / (OFF[qb].1 - pb);
                fp + (a - pa) * sa + (b - pb) * sb
            }
            2 => {
                let (p, q) = (same[0], same[1]);
                let (da, db) = (OFF[q].0 - OFF[p].0, OFF[q].1 - OFF[p].1);
                let t = (((a - OFF[p].0) * da + (b - OFF[p].1) * db) / (da * da + db * db)).clamp(0.0, 1.0);
                values[idx[p]] + t * (values[idx[q]] - values[idx[p]])
            }
            _ => values[idx[same[0]]],
        }
    }

    fn path(&self, branch: Branch, x: f64, y: f64) -> Path {
        let len = self.geo.terminal(branch, x, y);
        Path {
            branch,
            x,
            py: self.geo.phi_y(branch, y),
            len,
            steps: step_count(self.pb, len),
        }
    }

    /// `F1`'s path and boundary datum at `(x, y)`.
    fn f1_parts(&self, x: f64, y: f64) -> (Path, f64) {
        match self.geo.f1_region(x, y) {
            F1Region::Top => (self.path(Branch::F1ToTop, x, y), 0.0),
            F1Region::Left => {
                let path = self.path(Branch::F1ToLeft, x, y);
                let (_, y0) = self.geo.position(Branch::F1ToLeft, x, path.py, 0.0);
                (path, lerp_samples(&self.pb.h1, &self.grid, y0))
            }
        }
    }

    fn plan(&self, eq: usize, x: f64, y: f64) -> NodePlan {
        if eq == 0 {
            let (path, boundary) = self.f1_parts(x, y);
            return NodePlan {
                eq,
                path,
                boundary,
                reflect: None,
            };
        }
        match self.geo.f2_region(x, y) {
            F2Region::Left => {
                let path = self.path(Branch::F2ToLeft, x, y);
                let (_, y0) = self.geo.position(Branch::F2ToLeft, x, path.py, 0.0);
                NodePlan {
                    eq,
                    path,
                    boundary: lerp_samples(&self.pb.h2, &self.grid, y0),
                    reflect: None,
                }
            }
            _ => {
                let path = self.path(Branch::F2ToBottom, x, y);
                let foot = (x - path.py / self.geo.tau).max(0.0);
                let (f1_path, f1_boundary) = self.f1_parts(foot, 0.0);
                let q = lerp_samples(&self.pb.q1, &self.grid, foot);
                NodePlan {
                    eq,
                    path,
                    boundary: 0.0,
                    reflect: Some((q, f1_path, f1_boundary)),
                }
            }
        }
    }

    /// `(int g, int sum_k C_k F_k)` along `path` for equation `eq`.
    fn integrate(&self, eq: usize, path: &Path, field: Option<(&[f64], &[f64])>, want_source: bool) -> (f64, f64) {
        if path.steps == 0 {
            return (0.0, 0.0);
        }
        let src = &self.pb.sources[eq];
        let use_src = want_source && !matches!(src, Coefficient::Zero);
        let lin = match field {
            Some((f1, f2)) => self.integrate_linear(eq, path, f1, f2),
            None => 0.0,
        };
        if !use_src {
            return (0.0, lin);
        }
        let ds = path.len / path.steps as f64;
        let mut gs = 0.0;
        for k in 0..=path.steps {
            let w = if k == 0 || k == path.steps { 0.5 * ds } else { ds };
            let (px, py) = self.geo.position(path.branch, path.x, path.py, k as f64 * ds);
            gs += w * src.eval(&self.grid, px, py);
        }
        (gs, lin)
    }

    /// `int sum_k C_k F_k ds` along `path`. Steps that cross a region
    /// interface are split at the crossing and each piece uses one-sided
    /// values, so the quadrature error stays smooth across the lattice.
    fn integrate_linear(&self, eq: usize, path: &Path, f1: &[f64], f2: &[f64]) -> f64 {
        let [ca, cb] = &self.pb.couplings[eq];
        let (use_a, use_b) = (!matches!(ca, Coefficient::Zero), !matches!(cb, Coefficient::Zero));
        if !(use_a || use_b) {
            return 0.0;
        }
        let relevant = |t: [u8; 2]| [if use_a { t[0] } else { 0 }, if use_b { t[1] } else { 0 }];
        let integrand = |px: f64, py: f64, t: [u8; 2]| {
            let mut v = 0.0;
            if use_a {
                v += ca.eval(&self.grid, px, py) * self.sample_in(0, f1, px, py, t[0]);
            }
            if use_b {
                v += cb.eval(&self.grid, px, py) * self.sample_in(1, f2, px, py, t[1]);
            }
            v
        };
        let at = |s: f64| self.geo.position(path.branch, path.x, path.py, s);
        let ds = path.len / path.steps as f64;
        let (x0, y0) = at(0.0);
        let mut s0 = 0.0;
        let mut t0 = relevant(self.tags_at(x0, y0));
        let mut f0 = integrand(x0, y0, t0);
        let mut acc = 0.0;
        for k in 1..=path.steps {
            let s1 = if k == path.steps { path.len } else { k as f64 * ds };
            let (x1, y1) = at(s1);
            let t1 = relevant(self.tags_at(x1, y1));
            // At most a few interfaces per step; peel them off one at a time.
            let mut guard = 0;
            while t0 != t1 && guard < 4 {
                guard += 1;
                let (mut lo, mut hi) = (s0, s1);
                for _ in 0..48 {
                    let mid = 0.5 * (lo + hi);
                    let (mx, my) = at(mid);
                    if relevant(self.tags_at(mx, my)) == t0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let (lx, ly) = at(lo);
                acc += 0.5 * (lo - s0) * (f0 + integrand(lx, ly, t0));
                let (hx, hy) = at(hi);
                s0 = hi;
                t0 = relevant(self.tags_at(hx, hy));
                f0 = integrand(hx, hy, t0);
            }
            let f1v = integrand(x1, y1, t0);
            acc += 0.5 * (s1 - s0) * (f0 + f1v);
            f0 = if t0 == t1 { f1v } else { integrand(x1, y1, t1) };
            s0 = s1;
            t0 = t1;
        }
        acc
    }

    /// Constant part (`G`, `H`, `psi`) of a node's integral equation.
    fn constant(&self, plan: &NodePlan) -> f64 {
        let (g, _) = self.integrate(plan.eq, &plan.path, None, true);
        let mut v = plan.boundary + g;
        if let Some((q, f1_path, f1_boundary)) = &plan.reflect {
            let (g1, _) = self.integrate(0, f1_path, None, true);
            v += q * (f1_boundary + g1);
        }
        v
    }

    /// Linear part (`I`, `Q`) of a node's integral equation.
    fn linear(&self, plan: &NodePlan, f1: &[f64], f2: &[f64]) -> f64 {
        let (_, mut v) = self.integrate(plan.eq, &plan.path, Some((f1, f2)), false);
        if let Some((q, f1_path, _)) = &plan.reflect {
            if *q != 0.0 {
                let (_, l1) = self.integrate(0, f1_path, Some((f1, f2)), false);
                v += q * l1;
            }
        }
        v
    }

    fn plans(&self) -> Vec<NodePlan> {
        let n = self.grid.n();
        (0..2)
            .flat_map(|eq| (0..n).flat_map(move |i| (0..n).map(move |j| (eq, i, j))))
            .map(|(eq, i, j)| self.plan(eq, self.grid.x(i), self.grid.x(j)))
            .collect()
    }
}

/// Tolerances of the successive-approximation series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Stop once the sup-norm of a term falls below this.
    pub tol: f64,
    pub max_terms: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_terms: 200,
        }
    }
}

/// Solved `(F1, F2)` with per-node region tags.
#[derive(Debug, Clone)]
pub struct RectKernelPair {
    pub f1: SquareField,
    pub f2: SquareField,
    pub f1_regions: Vec<F1Region>,
    pub f2_regions: Vec<F2Region>,
    pub report: SeriesReport,
}

impl RectKernelPair {
    pub fn grid(&self) -> &Grid1D {
        self.f1.grid()
    }
}

/// Prepared operator: the constant part `b` and the linear map `A` of
/// `F = b + A F`, with `F = [F1; F2]` flattened.
struct Prepared<'a> {
    solver: Solver<'a>,
    plans: Vec<NodePlan>,
    base: Vec<f64>,
}

impl<'a> Prepared<'a> {
    fn new(pb: &'a GeneralKernelProblem) -> Result<Self> {
        pb.validate()?;
        let solver = Solver::new(pb);
        let plans = solver.plans();
        let base = plans.par_iter().map(|p| solver.constant(p)).collect();
        Ok(Self { solver, plans, base })
    }

    fn apply(&self, cur: &[f64], out: &mut [f64]) {
        let m = cur.len() / 2;
        let (f1, f2) = cur.split_at(m);
        out.par_iter_mut()
            .zip(self.plans.par_iter())
            .for_each(|(o, p)| *o = self.solver.linear(p, f1, f2));
    }

    fn finish(&self, packed: Vec<f64>, report: SeriesReport) -> RectKernelPair {
        let grid = self.solver.grid;
        let n = grid.n();
        let m = n * n;
        let mut f1 = SquareField::from_values(grid, packed[..m].to_vec());
        let mut f2 = SquareField::from_values(grid, packed[m..].to_vec());
        // Boundary conditions hold by construction; pin them to the exact data.
        for i in 0..n {
            f1.set(i, n - 1, 0.0);
        }
        for j in 0..n - 1 {
            f1.set(0, j, self.solver.pb.h1[j]);
        }
        for j in 1..n {
            f2.set(0, j, self.solver.pb.h2[j]);
        }
        for i in 0..n {
            f2.set(i, 0, self.solver.pb.q1[i] * f1.get(i, 0));
        }
        let geo = self.solver.geo;
        let mut f1_regions = Vec::with_capacity(m);
        let mut f2_regions = Vec::with_capacity(m);
        for i in 0..n {
            for j in 0..n {
                f1_regions.push(geo.f1_region(grid.x(i), grid.x(j)));
                f2_regions.push(geo.f2_region(grid.x(i), grid.x(j)));
            }
        }
        RectKernelPair {
            f1,
            f2,
            f1_regions,
            f2_regions,
            report,
        }
    }
}

/// Solves the general problem by summing the successive-approximation series.
pub fn solve_general(problem: &GeneralKernelProblem, options: SolveOptions) -> Result<RectKernelPair> {
    solve_general_visit(problem, options, |_| {})
}

/// As [`solve_general`], handing every series term to `visit`.
pub fn solve_general_visit<V>(problem: &GeneralKernelProblem, options: SolveOptions, visit: V) -> Result<RectKernelPair>
where
    V: FnMut(SeriesTerm<'_>),
{
    let prep = Prepared::new(problem)?;
    let (packed, report) = sum_series(
        prep.base.clone(),
        |c, o| prep.apply(c, o),
        options.tol,
        options.max_terms,
        visit,
    )?;
    Ok(prep.finish(packed, report))
}

/// Starting iterate for [`solve_by_iteration`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterationStart {
    Zero,
    /// The series' first term `F^0`.
    FirstTerm,
}

/// Solves `F = b + A F` by plain fixed-point iteration; returns the solution
/// and the number of sweeps.
pub fn solve_by_iteration(
    problem: &GeneralKernelProblem,
    start: IterationStart,
    tol: f64,
    max_iter: usize,
) -> Result<(RectKernelPair, usize)> {
    let prep = Prepared::new(problem)?;
    let init = match start {
        IterationStart::Zero => vec![0.0; prep.base.len()],
        IterationStart::FirstTerm => prep.base.clone(),
    };
    let (packed, iters) = fixed_point(&prep.base, init, |c, o| prep.apply(c, o), tol, max_iter)?;
    let report = SeriesReport {
        term_norms: Vec::new(),
        converged: true,
    };
    Ok((prep.finish(packed, report), iters))
}

// ---------------------------------------------------------------------------
// Convergence bound
// ---------------------------------------------------------------------------

/// Constants of the factorial bound `|F^n(x,y)| <= M0 (Cbar Meps x)^n / n!`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub m0: f64,
    pub c_bar: f64,
    pub m_eps: f64,
    pub q_bar: f64,
}

impl BoundConstants {
    pub fn of(problem: &GeneralKernelProblem, first_term_norm: f64) -> Self {
        let grid = problem.grid();
        let cb = |i: usize, k: usize| problem.couplings[i][k].bound(grid);
        let row = |i: usize| cb(i, 0) + cb(i, 1);
        let amax = |v: &[f64]| v.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let q_bar = amax(&problem.q1).max(amax(&finite_difference(&problem.q1, grid.h())));
        let f0 = first_term_norm;
        let m0 = f0
            .max(2.0 * row(0).max(row(1)) * f0)
            .max((2.0 * q_bar * row(0) + row(1)) * f0);
        let m_eps = problem
            .tau
            .max(problem.phi1.max_slowness())
            .max(problem.phi2.max_slowness());
        let c_bar = (3.0 * q_bar * row(0) + 2.0 * row(1)).max(3.0 * row(0).max(row(1)));
        Self { m0, c_bar, m_eps, q_bar }
    }

    /// Pointwise bound on the `n`-th term at abscissa `x`.
    pub fn term_bound(&self, n: usize, x: f64) -> f64 {
        let r = self.c_bar * self.m_eps * x;
        (1..=n).fold(self.m0, |b, k| b * r / k as f64)
    }

    /// Bound on the full series at abscissa `x`.
    pub fn solution_bound(&self, x: f64) -> f64 {
        self.m0 * (self.c_bar * self.m_eps * x).exp()
    }
}

/// Result of checking every series term against the factorial bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundAudit {
    pub constants: BoundConstants,
    pub terms: usize,
    /// Largest `|F^n(x,y)| / bound_n(x)` seen (nodes where the bound vanishes
    /// count only if the term is not zero there).
    pub worst_ratio: f64,
    pub violations: usize,
    pub solution_within_bound: bool,
}

impl BoundAudit {
    pub fn holds(&self) -> bool {
        self.violations == 0 && self.solution_within_bound
    }
}

/// Solves the problem while checking each term of the series pointwise
/// against `M0 (Cbar Meps x)^n / n!`.
pub fn audit_series_bound(problem: &GeneralKernelProblem, options: SolveOptions) -> Result<(RectKernelPair, BoundAudit)> {
    let grid = *problem.grid();
    let n = grid.n();
    let mut constants = None;
    let mut worst = 0.0f64;
    let mut violations = 0usize;
    let pair = solve_general_visit(problem, options, |term| {
        let c = *constants.get_or_insert_with(|| BoundConstants::of(problem, super::series::sup_norm(term.values)));
        for (idx, v) in term.values.iter().enumerate() {
            let i = (idx % (n * n)) / n;
            let bound = c.term_bound(term.index, grid.x(i));
            let ratio = if bound > 0.0 {
                v.abs() / bound
            } else if *v == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(ratio);
            if v.abs() > bound * (1.0 + 1e-9) + 1e-14 {
                violations += 1;
            }
        }
    })?;
    let constants = constants.expect("series has at least one term");
    let solution_within_bound = (0..n).all(|i| {
        let b = constants.solution_bound(grid.x(i)) * (1.0 + 1e-9) + 1e-14;
        (0..n).all(|j| pair.f1.get(i, j).abs() <= b && pair.f2.get(i, j).abs() <= b)
    });
    Ok((
        pair.clone(),
        BoundAudit {
            constants,
            terms: pair.report.terms(),
            worst_ratio: worst,
            violations,
            solution_within_bound,
        },
    ))
}

// ---------------------------------------------------------------------------
// Residual and gains
// ---------------------------------------------------------------------------

/// First-order upwind residual of both kernel PDEs, skipping stencils that
/// straddle a region interface (where the solution may jump).
pub fn pde_residual(problem: &GeneralKernelProblem, pair: &RectKernelPair) -> [ResidualStats; 2] {
    let grid = *problem.grid();
    let n = grid.n();
    let h = grid.h();
    let tau = problem.tau;
    let idx = |i: usize, j: usize| i * n + j;
    let rhs = |eq: usize, i: usize, j: usize| {
        problem.sources[eq].node(i, j)
            + problem.couplings[eq][0].node(i, j) * pair.f1.get(i, j)
            + problem.couplings[eq][1].node(i, j) * pair.f2.get(i, j)
    };
    let mut r1 = Vec::new();
    for i in 1..n {
        for j in 0..n - 1 {
            let tag = pair.f1_regions[idx(i, j)];
            if pair.f1_regions[idx(i - 1, j)] != tag || pair.f1_regions[idx(i, j + 1)] != tag {
                continue;
            }
            let f = &pair.f1;
            let r = (f.get(i, j) - f.get(i - 1, j)) / (tau * h)
                - problem.eps1[j] * (f.get(i, j + 1) - f.get(i, j)) / h
                - rhs(0, i, j);
            r1.push(r);
        }
    }
    let mut r2 = Vec::new();
    for i in 1..n {
        for j in 1..n {
            let tag = pair.f2_regions[idx(i, j)];
            if pair.f2_regions[idx(i - 1, j)] != tag || pair.f2_regions[idx(i, j - 1)] != tag {
                continue;
            }
            let f = &pair.f2;
            let r = (f.get(i, j) - f.get(i - 1, j)) / (tau * h) + problem.eps2[j] * (f.get(i, j) - f.get(i, j - 1)) / h
                - rhs(1, i, j);
            r2.push(r);
        }
    }
    [ResidualStats::from_samples(r1), ResidualStats::from_samples(r2)]
}

/// Which gain a [`GainTrace`] carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainKind {
    /// `p(x) = tau eps2(1) alpha2(x, 1)`.
    P,
    /// `mu(x) = tau eps2(1) beta2(x, 1)`.
    Mu,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainTrace {
    pub kind: GainKind,
    pub grid: Grid1D,
    pub values: Vec<f64>,
}

impl GainTrace {
    pub fn zeros(kind: GainKind, grid: Grid1D) -> Self {
        Self {
            kind,
            values: vec![0.0; grid.n()],
            grid,
        }
    }

    #[inline]
    pub fn at(&self, x: f64) -> f64 {
        lerp_samples(&self.values, &self.grid, x)
    }
}

/// `tau eps2(1) F2(x, 1)` on the grid.
pub fn gain_traces(pair: &RectKernelPair, problem: &GeneralKernelProblem, kind: GainKind) -> GainTrace {
    let scale = problem.tau * problem.eps2[problem.eps2.len() - 1];
    GainTrace {
        kind,
        grid: *pair.grid(),
        values: pair.f2.top_trace().into_iter().map(|v| scale * v).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_problem(n: usize, tau: f64) -> GeneralKernelProblem {
        let g = Grid1D::new(n).unwrap();
        GeneralKernelProblem::homogeneous(vec![1.0; n], vec![1.0; n], &g, tau).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let mut pb = unit_problem(21, 3.0);
        pb.q1 = vec![0.8; 21];
        pb.couplings[0][1] = Coefficient::OfY(vec![1.0; 21]);
        pb.couplings[1][0] = Coefficient::OfY(vec![1.0; 21]);
        let pair = solve_general(&pb, SolveOptions::default()).unwrap();
        assert_eq!(pair.f1.max_abs(), 0.0);
        assert_eq!(pair.f2.max_abs(), 0.0);
    }

    #[test]
    fn pure_transport_of_left_data() {
        // No coupling: F1 is h1 carried along (1/tau, -1), F2 = h2 along (1/tau, +1).
        let n = 41;
        let g = Grid1D::new(n).unwrap();
        let mut pb = unit_problem(n, 2.0);
        pb.h1 = g.nodes().iter().map(|y| (1.0 - y) * y).collect();
        pb.h2 = g.nodes().iter().map(|y| 1.0 + y).collect();
        pb.q1 = vec![1.0; n];
        let pair = solve_general(&pb, SolveOptions::default()).unwrap();
        let (x, y) = (g.x(10), g.x(8));
        // F1 left region: foot at y0 = tau x + y.
        let y0: f64 = 2.0 * x + y;
        assert!(y0 < 1.0);
        assert!((pair.f1.get(10, 8) - (1.0 - y0) * y0).abs() < 1e-12);
        // F2 at (x, y) with y > tau x reads h2(y - tau x).
        let (x, y) = (g.x(4), g.x(30));
        let y0 = y - 2.0 * x;
        assert!((pair.f2.get(4, 30) - (1.0 + y0)).abs() < 1e-12);
    }

    #[test]
    fn region_examples() {
        let pb = unit_problem(11, 3.0);
        assert_eq!(region_of(&pb, 1.0, 1.0, Which::F1), Region::F1(F1Region::Top));
        assert_eq!(region_of(&pb, 0.0, 0.5, Which::F2), Region::F2(F2Region::Left));
        assert_eq!(region_of(&pb, 0.1, 0.5, Which::F1), Region::F1(F1Region::Left));
    }

    #[test]
    fn characteristic_examples() {
        let pb = unit_problem(101, 3.0);
        let c = characteristics(&pb, 1.0, 0.0, Branch::F1ToTop).unwrap();
        assert!((c.terminal - 1.0).abs() < 1e-14);
        let c = characteristics(&pb, 0.4, 0.3, Branch::F1ToLeft).unwrap();
        assert!((c.terminal - 1.2).abs() < 1e-14);
        assert_eq!(c.xs[0], 0.0);
        let c = characteristics(&pb, 0.5, 0.5, Branch::F2ToBottom).unwrap();
        assert!((c.xs[0] - 1.0 / 3.0).abs() < 1e-14);
        assert_eq!(c.ys[0], 0.0);
        assert!((c.xs.last().unwrap() - 0.5).abs() < 1e-14);
        assert!((c.ys.last().unwrap() - 0.5).abs() < 1e-14);
        assert!(characteristics(&pb, 1.2, 0.5, Branch::F2ToLeft).is_err());
    }

    #[test]
    fn gain_formula() {
        let n = 11;
        let g = Grid1D::new(n).unwrap();
        let pb = unit_problem(n, 3.0);
        let mut f2 = SquareField::zeros(g);
        f2.set(5, n - 1, 0.2);
        let pair = RectKernelPair {
            f1: SquareField::zeros(g),
            f2,
            f1_regions: vec![],
            f2_regions: vec![],
            report: SeriesReport {
                term_norms: vec![],
                converged: true,
            },
        };
        let p = gain_traces(&pair, &pb, GainKind::P);
        assert!((p.values[5] - 0.6).abs() < 1e-15);
        assert_eq!(p.values[4], 0.0);
    }
}
