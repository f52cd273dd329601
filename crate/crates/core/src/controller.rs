//! Delay-compensated boundary feedback.
//!
//! The law is evaluated either from the actuator transport state `v`
//!
//! ```text
//! U(t) = int p(1-y) v(y,t) dy + int a1(y) u1(y,t) dy + int a2(y) u2(y,t) dy
//! ```
//!
//! or, substituting `v(y,t) = U(t - tau_bar (1-y))`, from the input history
//!
//! ```text
//! U(t) = int a1 u1 + int a2 u2 + (1/tau_bar) int_{t-tau_bar}^t p((t-s)/tau_bar) U(s) ds
//! ```

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::kernels::{lerp_samples, trapezoid, GainKind, GainTrace, RectKernelPair};
use crate::plant::Grid1D;

/// Gains of the compensated law: `a1 = alpha1(1,.)`, `a2 = alpha2(1,.)` and
/// the history weight `p`, all built with the controller's delay `tau_bar`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGains {
    grid: Grid1D,
    a1: Vec<f64>,
    a2: Vec<f64>,
    p: GainTrace,
    tau_bar: f64,
}

impl ControllerGains {
    pub fn new(a1: Vec<f64>, a2: Vec<f64>, p: GainTrace, tau_bar: f64) -> Result<Self> {
        let grid = p.grid;
        if a1.len() != grid.n() || a2.len() != grid.n() || p.values.len() != grid.n() {
            return Err(Error::GridMismatch(format!(
                "gain traces have {}/{}/{} samples, grid has {}",
                a1.len(),
                a2.len(),
                p.values.len(),
                grid.n()
            )));
        }
        if p.kind != GainKind::P {
            return Err(Error::invalid("p", "expected the controller gain trace"));
        }
        if !(tau_bar.is_finite() && tau_bar > 0.0) {
            return Err(Error::invalid("tau_bar", format!("must be positive, got {tau_bar}")));
        }
        if a1.iter().chain(&a2).chain(&p.values).any(|v| !v.is_finite()) {
            return Err(Error::invalid("gains", "non-finite sample"));
        }
        Ok(Self {
            grid,
            a1,
            a2,
            p,
            tau_bar,
        })
    }

    /// Gains read off a solved alpha pair: `alpha_i(1, .)` and `p`.
    pub fn from_alpha(pair: &RectKernelPair, p: GainTrace, tau_bar: f64) -> Result<Self> {
        Self::new(pair.f1.right_trace(), pair.f2.right_trace(), p, tau_bar)
    }

    pub fn zeros(grid: Grid1D, tau_bar: f64) -> Result<Self> {
        Self::new(
            vec![0.0; grid.n()],
            vec![0.0; grid.n()],
            GainTrace::zeros(GainKind::P, grid),
            tau_bar,
        )
    }

    /// The same gains interpolated onto another grid.
    pub fn resample(&self, grid: &Grid1D) -> Result<Self> {
        if grid.same_as(&self.grid) {
            return Ok(self.clone());
        }
        let on = |v: &[f64]| -> Vec<f64> { grid.nodes().iter().map(|&x| lerp_samples(v, &self.grid, x)).collect() };
        let p = GainTrace {
            kind: GainKind::P,
            grid: *grid,
            values: on(&self.p.values),
        };
        Self::new(on(&self.a1), on(&self.a2), p, self.tau_bar)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn a1(&self) -> &[f64] {
        &self.a1
    }

    pub fn a2(&self) -> &[f64] {
        &self.a2
    }

    pub fn p(&self) -> &GainTrace {
        &self.p
    }

    pub fn tau_bar(&self) -> f64 {
        self.tau_bar
    }

    /// `int a1 u1 + int a2 u2`.
    pub fn state_feedback(&self, u1: &[f64], u2: &[f64]) -> Result<f64> {
        let n = self.grid.n();
        if u1.len() != n || u2.len() != n {
            return Err(Error::GridMismatch(format!(
                "state has {}/{} samples, gains have {n}",
                u1.len(),
                u2.len()
            )));
        }
        let f: Vec<f64> = (0..n).map(|j| self.a1[j] * u1[j] + self.a2[j] * u2[j]).collect();
        Ok(trapezoid(&f, self.grid.h()))
    }
}

/// Past control values on a uniform time grid, newest first.
///
/// Starts out all zero: the actuator has been idle before `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputHistory {
    dt: f64,
    /// `samples[k] = U(t_last - k dt)`.
    samples: VecDeque<f64>,
    capacity: usize,
    t_last: f64,
}

impl InputHistory {
    /// History able to span `span` seconds at period `dt`, all zero, with the
    /// newest sample at `t = 0`.
    pub fn zeros(dt: f64, span: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        if !(span.is_finite() && span >= 0.0) {
            return Err(Error::invalid("span", format!("must be non-negative, got {span}")));
        }
        let capacity = (span / dt).round() as usize + 2;
        Ok(Self {
            dt,
            samples: std::iter::repeat_n(0.0, capacity).collect(),
            capacity,
            t_last: 0.0,
        })
    }

    /// History whose sample at time `s <= 0` is `past(s)`, newest at `t = 0`.
    pub fn from_past(dt: f64, span: f64, past: impl Fn(f64) -> f64) -> Result<Self> {
        let mut h = Self::zeros(dt, span)?;
        for (k, slot) in h.samples.iter_mut().enumerate() {
            *slot = past(-(k as f64) * dt);
        }
        Ok(h)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_last(&self) -> f64 {
        self.t_last
    }

    /// Seconds of history stored behind the newest sample.
    pub fn span(&self) -> f64 {
        (self.samples.len().saturating_sub(1)) as f64 * self.dt
    }

    pub fn push(&mut self, u: f64) {
        self.samples.push_front(u);
        self.samples.truncate(self.capacity);
        self.t_last += self.dt;
    }

    /// `U(t_last - k dt)`.
    pub fn lag(&self, k: usize) -> Option<f64> {
        self.samples.get(k).copied()
    }

    pub fn latest(&self) -> f64 {
        self.samples.front().copied().unwrap_or(0.0)
    }
}

/// Number of history steps covering `tau_bar` at period `dt` (rounded).
pub fn history_steps(tau_bar: f64, dt: f64) -> usize {
    ((tau_bar / dt).round() as usize).max(1)
}

/// Compensated control from the input history.
///
/// The new value `U(t)` cannot enter its own integral, so the `s = t`
/// endpoint is taken from the newest stored sample (one step old).
pub fn control_from_history(gains: &ControllerGains, u1: &[f64], u2: &[f64], history: &InputHistory) -> Result<f64> {
    let state = gains.state_feedback(u1, u2)?;
    let m = history_steps(gains.tau_bar, history.dt);
    if history.samples.len() < m {
        return Err(Error::InsufficientHistory {
            available: history.span(),
            required: m as f64 * history.dt,
        });
    }
    // sigma_k = k / m, U(t - k dt) = samples[k - 1] for k >= 1.
    let mut acc = 0.0;
    for k in 0..=m {
        let w = if k == 0 || k == m { 0.5 } else { 1.0 };
        let u = history.samples[k.saturating_sub(1)];
        acc += w * gains.p.at(k as f64 / m as f64) * u;
    }
    Ok(state + acc / m as f64)
}

/// Compensated control from the actuator transport state `v` sampled
/// uniformly on `[0, 1]` (any number of nodes).
pub fn control_from_actuator_state(gains: &ControllerGains, u1: &[f64], u2: &[f64], v: &[f64]) -> Result<f64> {
    let state = gains.state_feedback(u1, u2)?;
    if v.len() < 2 {
        return Err(Error::GridMismatch("actuator state needs at least two samples".into()));
    }
    let hv = 1.0 / (v.len() - 1) as f64;
    let f: Vec<f64> = v
        .iter()
        .enumerate()
        .map(|(m, &vm)| gains.p.at(1.0 - m as f64 * hv) * vm)
        .collect();
    Ok(state + trapezoid(&f, hv))
}
