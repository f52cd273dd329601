//! End-to-end kernel construction for one plant.

use std::time::{Duration, Instant};

use crate::controller::ControllerGains;
use crate::error::Result;
use crate::kernels::{
    alpha_problem, beta_problem, gain_traces, pde_residual, solve_general, GainKind, GainTrace, GeneralKernelProblem,
    RectKernelPair, ResidualStats, SolveOptions, TriangleKernelSet,
};
use crate::plant::{Grid1D, PlantParams};
use crate::simulator::TransformKernels;

/// A solved rectangle problem with its gain.
#[derive(Debug, Clone)]
pub struct RectSolution {
    pub problem: GeneralKernelProblem,
    pub pair: RectKernelPair,
    pub gain: GainTrace,
}

impl RectSolution {
    /// `alpha` with delay `tau_eff`, fed by `K21(1,.)`, `K22(1,.)`.
    pub fn alpha(params: &PlantParams, grid: &Grid1D, tau_eff: f64, set: &TriangleKernelSet, opts: SolveOptions) -> Result<Self> {
        let problem = alpha_problem(params, grid, tau_eff, &set.k.k21.trace_x1(), &set.k.k22.trace_x1())?;
        let pair = solve_general(&problem, opts)?;
        let gain = gain_traces(&pair, &problem, GainKind::P);
        Ok(Self { problem, pair, gain })
    }

    /// `beta` with delay `tau_eff`, fed by `L21(1,.)`, `L22(1,.)`.
    pub fn beta(params: &PlantParams, grid: &Grid1D, tau_eff: f64, set: &TriangleKernelSet, opts: SolveOptions) -> Result<Self> {
        let problem = beta_problem(params, grid, tau_eff, &set.l.k21.trace_x1(), &set.l.k22.trace_x1())?;
        let pair = solve_general(&problem, opts)?;
        let gain = gain_traces(&pair, &problem, GainKind::Mu);
        Ok(Self { problem, pair, gain })
    }

    pub fn residual(&self) -> [ResidualStats; 2] {
        pde_residual(&self.problem, &self.pair)
    }
}

/// Every kernel the controller, simulator and robustness analysis need.
#[derive(Debug, Clone)]
pub struct KernelBundle {
    pub params: PlantParams,
    pub grid: Grid1D,
    pub triangle: TriangleKernelSet,
    /// Controller side, built with `tau_bar`.
    pub alpha: RectSolution,
    /// Inverse map with the true delay.
    pub beta: RectSolution,
    /// Inverse map with `tau_bar` (shares `beta` when the delays agree).
    pub beta_bar: RectSolution,
    pub timings: Vec<(&'static str, Duration)>,
}

impl KernelBundle {
    pub fn build(params: &PlantParams, grid: &Grid1D, opts: SolveOptions) -> Result<Self> {
        params.validate(grid)?;
        let clock = Instant::now();
        let triangle = TriangleKernelSet::solve(params, grid)?;
        let elapsed = clock.elapsed();
        let mut bundle = Self::from_triangle(params, grid, triangle, opts)?;
        bundle.timings.insert(0, ("triangle", elapsed));
        Ok(bundle)
    }

    /// Builds the delay-dependent kernels on top of already solved triangle
    /// kernels (which do not depend on the delay).
    pub fn from_triangle(params: &PlantParams, grid: &Grid1D, triangle: TriangleKernelSet, opts: SolveOptions) -> Result<Self> {
        params.validate(grid)?;
        if !triangle.k.grid().same_as(grid) {
            return Err(crate::Error::GridMismatch("triangle kernels are on another grid".into()));
        }
        let mut timings = Vec::new();
        let mut clock = Instant::now();
        let mut lap = |name: &'static str, timings: &mut Vec<(&'static str, Duration)>| {
            timings.push((name, clock.elapsed()));
            clock = Instant::now();
        };
        let alpha = RectSolution::alpha(params, grid, params.tau_bar, &triangle, opts)?;
        lap("alpha", &mut timings);
        let beta = RectSolution::beta(params, grid, params.tau, &triangle, opts)?;
        let beta_bar = if params.tau_bar == params.tau {
            beta.clone()
        } else {
            RectSolution::beta(params, grid, params.tau_bar, &triangle, opts)?
        };
        lap("beta", &mut timings);
        Ok(Self {
            params: params.clone(),
            grid: *grid,
            triangle,
            alpha,
            beta,
            beta_bar,
            timings,
        })
    }

    pub fn controller_gains(&self) -> Result<ControllerGains> {
        ControllerGains::from_alpha(&self.alpha.pair, self.alpha.gain.clone(), self.params.tau_bar)
    }

    /// `(K21(1,.), K22(1,.))` for the delay-ignorant law.
    pub fn nominal_traces(&self) -> (Vec<f64>, Vec<f64>) {
        (self.triangle.k.k21.trace_x1(), self.triangle.k.k22.trace_x1())
    }

    /// Kernels of the state transformation. The `z` part uses the
    /// controller-side `alpha`, so it is the true transformation only when
    /// `tau_bar == tau`.
    pub fn transform_kernels(&self) -> TransformKernels<'_> {
        TransformKernels {
            k: &self.triangle.k,
            l: &self.triangle.l,
            alpha: &self.alpha.pair,
            p: &self.alpha.gain,
            beta: &self.beta.pair,
            mu: &self.beta.gain,
        }
    }
}
