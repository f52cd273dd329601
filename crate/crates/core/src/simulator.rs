//! Closed-loop simulation of the plant plus actuator transport, the explicit
//! solution of the target system, and the state transformations between the
//! two.
//!
//! The actuator state `v` lives on its own uniform grid whose spacing matches
//! the time step (`tau / dt` cells), so its transport is an exact shift when
//! `tau` is a multiple of `dt`.

use crate::controller::{control_from_actuator_state, control_from_history, history_steps, ControllerGains, InputHistory};
use crate::error::{Error, Result};
use crate::kernels::{lerp_samples, trapezoid, GainTrace, RectKernelPair, TriangleKernels};
use crate::plant::{Grid1D, PlantParams, TravelMap};

/// Which feedback closes the loop.
#[derive(Debug, Clone)]
pub enum ControllerKind {
    OpenLoop,
    /// Delay-ignorant law `int K21(1,y) u1 + int K22(1,y) u2`, still applied
    /// through the actuator delay.
    Nominal { k21: Vec<f64>, k22: Vec<f64> },
    /// Compensated law evaluated from the input history with the
    /// controller's delay estimate.
    Compensated(ControllerGains),
}

impl ControllerKind {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerKind::OpenLoop => "open_loop",
            ControllerKind::Nominal { .. } => "nominal",
            ControllerKind::Compensated(_) => "compensated",
        }
    }
}

/// Plant state `(u1, u2)` on the spatial grid plus actuator state `v` on
/// its own grid (`v[0]` enters the plant, `v[last]` is the newest input).
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub v: Vec<f64>,
}

impl SimState {
    pub fn l2(&self, grid: &Grid1D) -> f64 {
        l2_norm(&self.u1, &self.u2, grid)
    }

    pub fn sup(&self) -> f64 {
        self.u1.iter().chain(&self.u2).fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `sqrt(int u1^2 + u2^2 dx)`.
pub fn l2_norm(u1: &[f64], u2: &[f64], grid: &Grid1D) -> f64 {
    let f: Vec<f64> = u1.iter().zip(u2).map(|(a, b)| a * a + b * b).collect();
    trapezoid(&f, grid.h()).sqrt()
}

/// Time integration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Store a full snapshot every this many steps (0 keeps only the first
    /// and last states).
    pub snapshot_every: usize,
}

impl SimConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            snapshot_every: 0,
        }
    }

    pub fn with_snapshots(mut self, every: usize) -> Self {
        self.snapshot_every = every;
        self
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMeta {
    pub grid_n: usize,
    pub v_cells: usize,
    pub dt: f64,
    pub steps: usize,
    pub tau: f64,
    pub tau_bar: f64,
    /// `tau_bar / dt` rounded to the history length actually used.
    pub history_steps: usize,
    pub controller: &'static str,
}

/// Time series of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrajectory {
    /// Time of every step, starting at 0.
    pub times: Vec<f64>,
    pub l2: Vec<f64>,
    pub sup: Vec<f64>,
    /// Control `U(t)` as written into the actuator.
    pub control: Vec<f64>,
    /// Same law evaluated from the actuator state (compensated runs only,
    /// NaN otherwise).
    pub control_dual: Vec<f64>,
    pub snapshots: Vec<SimState>,
    pub final_state: SimState,
    pub meta: RunMeta,
}

impl SimTrajectory {
    /// Index of the step closest to `t`.
    pub fn index_at(&self, t: f64) -> usize {
        let dt = self.meta.dt;
        ((t / dt).round() as usize).min(self.times.len() - 1)
    }

    pub fn l2_at(&self, t: f64) -> f64 {
        self.l2[self.index_at(t)]
    }

    pub fn sup_at(&self, t: f64) -> f64 {
        self.sup[self.index_at(t)]
    }

    pub fn max_l2(&self) -> f64 {
        self.l2.iter().copied().fold(0.0, f64::max)
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&SimState> {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }
}

/// Initial data on the simulation grid. `v` defaults to zero (the actuator
/// was idle before `t = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct InitialCondition {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub v: Option<Vec<f64>>,
}

impl InitialCondition {
    pub fn from_fn(grid: &Grid1D, f1: impl Fn(f64) -> f64, f2: impl Fn(f64) -> f64) -> Self {
        Self {
            u1: grid.nodes().into_iter().map(&f1).collect(),
            u2: grid.nodes().into_iter().map(&f2).collect(),
            v: None,
        }
    }

    /// `u1 = u2 = sin(2 pi x)`.
    pub fn sin2pi(grid: &Grid1D) -> Self {
        let f = |x: f64| (2.0 * std::f64::consts::PI * x).sin();
        Self::from_fn(grid, f, f)
    }

    pub fn zero(grid: &Grid1D) -> Self {
        Self::from_fn(grid, |_| 0.0, |_| 0.0)
    }
}

/// Explicit upwind integrator of the closed loop.
#[derive(Debug, Clone)]
pub struct Simulator {
    grid: Grid1D,
    eps1: Vec<f64>,
    eps2: Vec<f64>,
    c1: Vec<f64>,
    c2: Vec<f64>,
    q: f64,
    tau: f64,
    dt: f64,
    v_cells: usize,
    controller: ControllerKind,
    history: InputHistory,
    state: SimState,
    steps_taken: usize,
    scratch: (Vec<f64>, Vec<f64>, Vec<f64>),
}

impl Simulator {
    pub fn new(
        params: &PlantParams,
        grid: &Grid1D,
        init: &InitialCondition,
        controller: ControllerKind,
        dt: f64,
    ) -> Result<Self> {
        params.validate(grid)?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        let eps1 = params.eps1.sample(grid);
        let eps2 = params.eps2.sample(grid);
        let vmax = eps1.iter().chain(&eps2).copied().fold(0.0, f64::max);
        if dt * vmax > grid.h() * (1.0 + 1e-9) {
            return Err(Error::CflViolation(format!(
                "dt * max speed = {} exceeds h = {}",
                dt * vmax,
                grid.h()
            )));
        }
        let v_cells = (params.tau / dt + 1e-9).floor() as usize;
        if v_cells == 0 {
            return Err(Error::CflViolation(format!(
                "dt = {dt} exceeds the actuator delay tau = {}",
                params.tau
            )));
        }
        let n = grid.n();
        if init.u1.len() != n || init.u2.len() != n {
            return Err(Error::GridMismatch(format!(
                "initial state has {}/{} samples, grid has {n}",
                init.u1.len(),
                init.u2.len()
            )));
        }
        match &controller {
            ControllerKind::Nominal { k21, k22 } if k21.len() != n || k22.len() != n => {
                return Err(Error::GridMismatch("nominal gains are not on the simulation grid".into()));
            }
            ControllerKind::Compensated(g) if !g.grid().same_as(grid) => {
                return Err(Error::GridMismatch("controller gains are not on the simulation grid".into()));
            }
            _ => {}
        }
        let v = match &init.v {
            Some(v0) => resample(v0, v_cells + 1),
            None => vec![0.0; v_cells + 1],
        };
        let span = match &controller {
            ControllerKind::Compensated(g) => g.tau_bar(),
            _ => 0.0,
        };
        // Past inputs are read off the actuator profile, v(y, 0) = U(-tau (1 - y)),
        // and are zero further back.
        let vgrid = Grid1D::new(v_cells + 1)?;
        let tau = params.tau;
        let history = InputHistory::from_past(dt, span, |s| {
            let y = 1.0 + s / tau;
            if y >= -1e-12 {
                lerp_samples(&v, &vgrid, y.max(0.0))
            } else {
                0.0
            }
        })?;
        let state = SimState {
            t: 0.0,
            u1: init.u1.clone(),
            u2: init.u2.clone(),
            v,
        };
        Ok(Self {
            grid: *grid,
            eps1,
            eps2,
            c1: params.c1.sample(grid),
            c2: params.c2.sample(grid),
            q: params.q,
            tau: params.tau,
            dt,
            v_cells,
            controller,
            history,
            scratch: (vec![0.0; n], vec![0.0; n], vec![0.0; v_cells + 1]),
            state,
            steps_taken: 0,
        })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn v_cells(&self) -> usize {
        self.v_cells
    }

    fn control(&self) -> Result<f64> {
        let s = &self.state;
        match &self.controller {
            ControllerKind::OpenLoop => Ok(0.0),
            ControllerKind::Nominal { k21, k22 } => {
                let f: Vec<f64> = (0..self.grid.n()).map(|j| k21[j] * s.u1[j] + k22[j] * s.u2[j]).collect();
                Ok(trapezoid(&f, self.grid.h()))
            }
            ControllerKind::Compensated(g) => control_from_history(g, &s.u1, &s.u2, &self.history),
        }
    }

    /// The compensated law evaluated from the actuator state.
    pub fn control_dual(&self) -> Result<f64> {
        match &self.controller {
            ControllerKind::Compensated(g) => control_from_actuator_state(g, &self.state.u1, &self.state.u2, &self.state.v),
            _ => Ok(f64::NAN),
        }
    }

    /// Advances one time step and returns the control written into the
    /// actuator.
    pub fn step(&mut self) -> Result<f64> {
        let n = self.grid.n();
        let lam = self.dt / self.grid.h();
        let dt = self.dt;
        let (nu1, nu2, nv) = &mut self.scratch;
        let s = &self.state;
        // u1 travels towards x = 1, u2 and v towards x = 0.
        for i in 1..n {
            nu1[i] = s.u1[i] - lam * self.eps1[i] * (s.u1[i] - s.u1[i - 1]) + dt * self.c1[i] * s.u2[i];
        }
        for i in 0..n - 1 {
            nu2[i] = s.u2[i] + lam * self.eps2[i] * (s.u2[i + 1] - s.u2[i]) + dt * self.c2[i] * s.u1[i];
        }
        let lv = dt * self.v_cells as f64 / self.tau;
        for m in 0..self.v_cells {
            nv[m] = s.v[m] + lv * (s.v[m + 1] - s.v[m]);
        }
        nv[self.v_cells] = s.v[self.v_cells];
        nu2[n - 1] = nv[0];
        nu1[0] = self.q * nu2[0];
        std::mem::swap(&mut self.state.u1, nu1);
        std::mem::swap(&mut self.state.u2, nu2);
        std::mem::swap(&mut self.state.v, nv);
        self.steps_taken += 1;
        self.state.t = self.steps_taken as f64 * dt;
        if !self.state.u1.iter().chain(&self.state.u2).all(|x| x.is_finite()) {
            return Err(Error::NonFiniteState { t: self.state.t });
        }
        let u = self.control()?;
        if !u.is_finite() {
            return Err(Error::NonFiniteState { t: self.state.t });
        }
        self.state.v[self.v_cells] = u;
        self.history.push(u);
        Ok(u)
    }
}

fn resample(v: &[f64], m: usize) -> Vec<f64> {
    if v.len() == m {
        return v.to_vec();
    }
    let g = Grid1D::new(v.len().max(2)).expect("at least two samples");
    let vv = if v.len() < 2 { vec![v.first().copied().unwrap_or(0.0); 2] } else { v.to_vec() };
    (0..m)
        .map(|k| lerp_samples(&vv, &g, k as f64 / (m - 1) as f64))
        .collect()
}

/// Runs the closed loop from `init` up to `config.t_end`.
pub fn simulate(
    params: &PlantParams,
    grid: &Grid1D,
    init: &InitialCondition,
    controller: ControllerKind,
    config: SimConfig,
) -> Result<SimTrajectory> {
    if !(config.t_end.is_finite() && config.t_end > 0.0) {
        return Err(Error::invalid("t_end", format!("must be positive, got {}", config.t_end)));
    }
    let tau_bar = match &controller {
        ControllerKind::Compensated(g) => g.tau_bar(),
        _ => params.tau,
    };
    let name = controller.name();
    let mut sim = Simulator::new(params, grid, init, controller, config.dt)?;
    let steps = config.steps();
    let mut traj = SimTrajectory {
        times: Vec::with_capacity(steps + 1),
        l2: Vec::with_capacity(steps + 1),
        sup: Vec::with_capacity(steps + 1),
        control: Vec::with_capacity(steps + 1),
        control_dual: Vec::with_capacity(steps + 1),
        snapshots: vec![sim.state().clone()],
        final_state: sim.state().clone(),
        meta: RunMeta {
            grid_n: grid.n(),
            v_cells: sim.v_cells(),
            dt: config.dt,
            steps,
            tau: params.tau,
            tau_bar,
            history_steps: history_steps(tau_bar, config.dt),
            controller: name,
        },
    };
    let record = |traj: &mut SimTrajectory, sim: &Simulator, u: f64| -> Result<()> {
        let s = sim.state();
        traj.times.push(s.t);
        traj.l2.push(s.l2(grid));
        traj.sup.push(s.sup());
        traj.control.push(u);
        traj.control_dual.push(sim.control_dual()?);
        Ok(())
    };
    let u0 = sim.state().v[sim.v_cells()];
    record(&mut traj, &sim, u0)?;
    for k in 1..=steps {
        let u = sim.step()?;
        record(&mut traj, &sim, u)?;
        if config.snapshot_every > 0 && k % config.snapshot_every == 0 {
            traj.snapshots.push(sim.state().clone());
        }
    }
    if traj.snapshots.last().map(|s| s.t) != Some(sim.state().t) {
        traj.snapshots.push(sim.state().clone());
    }
    traj.final_state = sim.state().clone();
    Ok(traj)
}

// ---------------------------------------------------------------------------
// Target system and transformations
// ---------------------------------------------------------------------------

/// State of the target cascade: `w1`, `w2` and `z`, all on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetState {
    pub t: f64,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub z: Vec<f64>,
}

/// Explicit solution of the target cascade at time `t`, starting from
/// `init` (sampled on `grid`, read with linear interpolation).
pub fn target_explicit(init: &TargetState, params: &PlantParams, grid: &Grid1D, t: f64) -> Result<TargetState> {
    params.validate(grid)?;
    let n = grid.n();
    if init.w1.len() != n || init.w2.len() != n || init.z.len() != n {
        return Err(Error::GridMismatch("initial target state is not on the grid".into()));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid("t", format!("must be non-negative, got {t}")));
    }
    let tau = params.tau;
    let phi1 = TravelMap::build(&params.eps1, grid)?;
    let phi2 = TravelMap::build(&params.eps2, grid)?;
    let p2 = phi2.total();
    let z_at = |x: f64, t: f64| {
        if t <= tau * (1.0 - x) {
            lerp_samples(&init.z, grid, x + t / tau)
        } else {
            0.0
        }
    };
    let w2_at = |x: f64, t: f64| {
        let px = phi2.phi(x);
        if t <= p2 - px {
            lerp_samples(&init.w2, grid, phi2.inverse(t + px))
        } else {
            z_at(0.0, t + px - p2)
        }
    };
    let w1_at = |x: f64, t: f64| {
        let px = phi1.phi(x);
        if t <= px {
            lerp_samples(&init.w1, grid, phi1.inverse(px - t))
        } else {
            params.q * w2_at(0.0, t - px)
        }
    };
    let xs = grid.nodes();
    Ok(TargetState {
        t: init.t + t,
        w1: xs.iter().map(|&x| w1_at(x, t)).collect(),
        w2: xs.iter().map(|&x| w2_at(x, t)).collect(),
        z: xs.iter().map(|&x| z_at(x, t)).collect(),
    })
}

/// Everything needed to map `(u1, u2, v)` to `(w1, w2, z)` and back.
#[derive(Debug, Clone, Copy)]
pub struct TransformKernels<'a> {
    pub k: &'a TriangleKernels,
    pub l: &'a TriangleKernels,
    pub alpha: &'a RectKernelPair,
    pub p: &'a GainTrace,
    pub beta: &'a RectKernelPair,
    pub mu: &'a GainTrace,
}

impl TransformKernels<'_> {
    fn grid(&self) -> Result<Grid1D> {
        let g = *self.k.grid();
        let all = [
            self.l.grid(),
            self.alpha.grid(),
            &self.p.grid,
            self.beta.grid(),
            &self.mu.grid,
        ];
        if all.iter().any(|o| !o.same_as(&g)) {
            return Err(Error::GridMismatch("transform kernels live on different grids".into()));
        }
        Ok(g)
    }
}

/// `int_0^{x_i} k(x_i - y) f(y) dy` on the grid, plus `sign` times that
/// added to `f`.
fn volterra_convolution(f: &[f64], kernel: &[f64], h: f64, sign: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = f.to_vec();
    let mut buf = Vec::with_capacity(n);
    for i in 1..n {
        buf.clear();
        buf.extend((0..=i).map(|j| kernel[i - j] * f[j]));
        out[i] += sign * trapezoid(&buf, h);
    }
    out
}

/// `int_0^1 F(x_i, y) g(y) dy` for every `x_i`.
fn full_integral(field: &crate::kernels::SquareField, g: &[f64], h: f64, i: usize) -> f64 {
    let n = g.len();
    let f: Vec<f64> = (0..n).map(|j| field.get(i, j) * g[j]).collect();
    trapezoid(&f, h)
}

/// `(u1, u2, v) -> (w1, w2, z)`; `v` may be on any uniform grid and is
/// resampled onto the kernel grid.
pub fn transform_forward(state: &SimState, kernels: &TransformKernels<'_>) -> Result<TargetState> {
    let grid = kernels.grid()?;
    let n = grid.n();
    let h = grid.h();
    let (w1, w2) = kernels.k.apply_volterra(&state.u1, &state.u2, -1.0)?;
    let v = resample(&state.v, n);
    let mut z = volterra_convolution(&v, &kernels.p.values, h, -1.0);
    for (i, zi) in z.iter_mut().enumerate() {
        *zi -= full_integral(&kernels.alpha.f1, &state.u1, h, i) + full_integral(&kernels.alpha.f2, &state.u2, h, i);
    }
    Ok(TargetState {
        t: state.t,
        w1,
        w2,
        z,
    })
}

/// `(w1, w2, z) -> (u1, u2, v)`, with `v` on the kernel grid.
pub fn transform_inverse(target: &TargetState, kernels: &TransformKernels<'_>) -> Result<SimState> {
    let grid = kernels.grid()?;
    let n = grid.n();
    let h = grid.h();
    if target.z.len() != n {
        return Err(Error::GridMismatch("z is not on the kernel grid".into()));
    }
    let (u1, u2) = kernels.l.apply_volterra(&target.w1, &target.w2, 1.0)?;
    let mut v = volterra_convolution(&target.z, &kernels.mu.values, h, 1.0);
    for (i, vi) in v.iter_mut().enumerate() {
        *vi += full_integral(&kernels.beta.f1, &target.w1, h, i) + full_integral(&kernels.beta.f2, &target.w2, h, i);
    }
    Ok(SimState { t: target.t, u1, u2, v })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium_is_invariant() {
        let g = Grid1D::new(51).unwrap();
        let p = PlantParams::reference();
        let tr = simulate(&p, &g, &InitialCondition::zero(&g), ControllerKind::OpenLoop, SimConfig::new(0.02, 2.0)).unwrap();
        assert!(tr.l2.iter().all(|&v| v == 0.0));
        assert!(tr.control.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cfl_is_enforced() {
        let g = Grid1D::new(51).unwrap();
        let p = PlantParams::constant(2.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        let err = Simulator::new(&p, &g, &InitialCondition::zero(&g), ControllerKind::OpenLoop, 0.02).unwrap_err();
        assert!(matches!(err, Error::CflViolation(_)));
    }

    #[test]
    fn pure_transport_of_u2() {
        // c = 0, q = 0, U = 0: u2 leaves through x = 0 at speed 1.
        let g = Grid1D::new(101).unwrap();
        let p = PlantParams::constant(1.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        let init = InitialCondition::from_fn(&g, |_| 0.0, |x| (2.0 * std::f64::consts::PI * x).sin());
        let tr = simulate(&p, &g, &init, ControllerKind::OpenLoop, SimConfig::new(0.01, 0.3)).unwrap();
        let s = &tr.final_state;
        for (i, x) in g.nodes().into_iter().enumerate() {
            let exact = if x + 0.3 <= 1.0 { (2.0 * std::f64::consts::PI * (x + 0.3)).sin() } else { 0.0 };
            assert!((s.u2[i] - exact).abs() < 1e-9, "x = {x}");
            assert_eq!(s.u1[i], 0.0);
        }
    }

    #[test]
    fn boundary_conditions_hold_after_each_step() {
        let g = Grid1D::new(41).unwrap();
        let p = PlantParams::constant(1.0, 1.0, 1.0, 1.0, 0.5, 1.0);
        let init = InitialCondition::sin2pi(&g);
        let mut sim = Simulator::new(&p, &g, &init, ControllerKind::OpenLoop, 0.025).unwrap();
        for _ in 0..50 {
            sim.step().unwrap();
            let s = sim.state();
            assert_eq!(s.u1[0], 0.5 * s.u2[0]);
            assert_eq!(s.u2[40], s.v[0]);
        }
    }

    #[test]
    fn target_solution_at_zero_and_after_horizon() {
        let g = Grid1D::new(21).unwrap();
        let p = PlantParams::constant(1.0, 1.0, 1.0, 1.0, 1.0, 3.0);
        let f = |x: f64| (2.0 * std::f64::consts::PI * x).sin();
        let init = TargetState {
            t: 0.0,
            w1: g.nodes().into_iter().map(f).collect(),
            w2: g.nodes().into_iter().map(f).collect(),
            z: g.nodes().into_iter().map(|x| x * (1.0 - x)).collect(),
        };
        let same = target_explicit(&init, &p, &g, 0.0).unwrap();
        for (a, b) in [(&same.w1, &init.w1), (&same.w2, &init.w2), (&same.z, &init.z)] {
            assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15));
        }
        let late = target_explicit(&init, &p, &g, 5.0 + 1e-9).unwrap();
        assert!(late.w1.iter().chain(&late.w2).chain(&late.z).all(|&v| v == 0.0));
    }

    #[test]
    fn target_w2_shift_example() {
        let g = Grid1D::new(101).unwrap();
        let p = PlantParams::constant(1.0, 1.0, 0.0, 0.0, 1.0, 3.0);
        let f = |x: f64| (2.0 * std::f64::consts::PI * x).sin();
        let init = TargetState {
            t: 0.0,
            w1: vec![0.0; 101],
            w2: g.nodes().into_iter().map(f).collect(),
            z: vec![0.0; 101],
        };
        let s = target_explicit(&init, &p, &g, 0.25).unwrap();
        for (i, x) in g.nodes().into_iter().enumerate() {
            let exact = if x <= 0.75 { f(x + 0.25) } else { 0.0 };
            assert!((s.w2[i] - exact).abs() < 1e-12);
        }
    }
}
