//! Robustness to a delay mismatch `tau_bar != tau`.
//!
//! With the controller built for `tau_bar`, the boundary value `z(1,t)` of
//! the target system obeys a neutral delay equation whose characteristic
//! function is `P(s) = 1 - sum_i H_i(s)`:
//!
//! ```text
//! H1 = int mu(y) e^{-tau y s} (e^{-dtau y s} - 1)
//! H2 = int (mu_bar - mu)(y) e^{-tau_bar y s}
//! H3 = int q b1(y) e^{-(phi1(y) + phi2(1) + tau) s} (e^{-dtau s} - 1)
//! H4 = int q (b1_bar - b1)(y) e^{-(phi1(y) + phi2(1) + tau_bar) s}
//! H5 = int b2(y) e^{-(phi2(1) - phi2(y) + tau) s} (e^{-dtau s} - 1)
//! H6 = int (b2_bar - b2)(y) e^{-(phi2(1) - phi2(y) + tau_bar) s}
//! ```
//!
//! where `b_i = beta_i(1, .)`. Right-half-plane zeros are counted with the
//! argument principle on a rectangle `[0, sigma_max] x [-omega_max, omega_max]`.
//! Zeros outside the window are not seen.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{GainTrace, SolveOptions, TriangleKernelSet};
use crate::pipeline::{KernelBundle, RectSolution};
use crate::plant::{Grid1D, PlantParams, TravelMap};

/// Anything with a characteristic function to scan.
pub trait CharacteristicFunction: Sync {
    fn eval(&self, s: Complex64) -> Complex64;

    /// `sum_i |H_i(s)|`, when the function is built from such terms.
    fn h_abs_sum(&self, _s: Complex64) -> Option<f64> {
        None
    }
}

/// A characteristic function given by a closure, for calibration.
pub struct FnCharacteristic<F>(pub F);

impl<F: Fn(Complex64) -> Complex64 + Sync> CharacteristicFunction for FnCharacteristic<F> {
    fn eval(&self, s: Complex64) -> Complex64 {
        (self.0)(s)
    }
}

/// Kernel traces entering `P(s)`, with trapezoid weights folded in.
#[derive(Debug, Clone)]
pub struct MismatchData {
    grid: Grid1D,
    pub tau: f64,
    pub tau_bar: f64,
    pub q: f64,
    pub mu: Vec<f64>,
    pub mu_bar: Vec<f64>,
    pub beta1: Vec<f64>,
    pub beta1_bar: Vec<f64>,
    pub beta2: Vec<f64>,
    pub beta2_bar: Vec<f64>,
    /// `phi1(y) + phi2(1)` on the grid.
    lag1: Vec<f64>,
    /// `phi2(1) - phi2(y)` on the grid.
    lag2: Vec<f64>,
    weights: Vec<f64>,
}

impl MismatchData {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        tau: f64,
        tau_bar: f64,
        q: f64,
        mu: &GainTrace,
        mu_bar: &GainTrace,
        beta1: Vec<f64>,
        beta1_bar: Vec<f64>,
        beta2: Vec<f64>,
        beta2_bar: Vec<f64>,
        phi1: &TravelMap,
        phi2: &TravelMap,
    ) -> Result<Self> {
        let grid = mu.grid;
        let n = grid.n();
        let ok = [&mu_bar.values, &beta1, &beta1_bar, &beta2, &beta2_bar]
            .iter()
            .all(|v| v.len() == n)
            && mu.values.len() == n
            && phi1.grid().same_as(&grid)
            && phi2.grid().same_as(&grid);
        if !ok {
            return Err(Error::GridMismatch("mismatch data must share one grid".into()));
        }
        for (name, v) in [("tau", tau), ("tau_bar", tau_bar)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        let h = grid.h();
        let mut weights = vec![h; n];
        weights[0] = 0.5 * h;
        weights[n - 1] = 0.5 * h;
        let p2 = phi2.total();
        let nodes = grid.nodes();
        Ok(Self {
            grid,
            tau,
            tau_bar,
            q,
            mu: mu.values.clone(),
            mu_bar: mu_bar.values.clone(),
            beta1,
            beta1_bar,
            beta2,
            beta2_bar,
            lag1: nodes.iter().map(|&y| phi1.phi(y) + p2).collect(),
            lag2: nodes.iter().map(|&y| p2 - phi2.phi(y)).collect(),
            weights,
        })
    }

    pub fn from_bundle(bundle: &KernelBundle) -> Result<Self> {
        Self::from_parts(&bundle.params, &bundle.beta, &bundle.beta_bar)
    }

    fn from_parts(params: &PlantParams, beta: &RectSolution, beta_bar: &RectSolution) -> Result<Self> {
        Self::new(
            params.tau,
            params.tau_bar,
            params.q,
            &beta.gain,
            &beta_bar.gain,
            beta.pair.f1.right_trace(),
            beta_bar.pair.f1.right_trace(),
            beta.pair.f2.right_trace(),
            beta_bar.pair.f2.right_trace(),
            &beta.problem.phi1,
            &beta.problem.phi2,
        )
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn delta_tau(&self) -> f64 {
        self.tau_bar - self.tau
    }

    /// All six terms at `s`.
    pub fn h_all(&self, s: Complex64) -> [Complex64; 6] {
        let zero = Complex64::new(0.0, 0.0);
        let mut acc = [zero; 6];
        let dt = self.delta_tau();
        for j in 0..self.grid.n() {
            let y = self.grid.x(j);
            let w = self.weights[j];
            let e_true = (-self.tau * y * s).exp();
            let e_bar = (-self.tau_bar * y * s).exp();
            acc[0] += w * self.mu[j] * (e_bar - e_true);
            acc[1] += w * (self.mu_bar[j] - self.mu[j]) * e_bar;
            let l1 = (-self.lag1[j] * s).exp();
            acc[2] += w * self.q * self.beta1[j] * l1;
            acc[3] += w * self.q * (self.beta1_bar[j] - self.beta1[j]) * l1;
            let l2 = (-self.lag2[j] * s).exp();
            acc[4] += w * self.beta2[j] * l2;
            acc[5] += w * (self.beta2_bar[j] - self.beta2[j]) * l2;
        }
        let shift = (-self.tau * s).exp();
        let shift_bar = (-self.tau_bar * s).exp();
        let mismatch = (-dt * s).exp() - 1.0;
        [
            acc[0],
            acc[1],
            acc[2] * shift * mismatch,
            acc[3] * shift_bar,
            acc[4] * shift * mismatch,
            acc[5] * shift_bar,
        ]
    }

    /// `H_i(s)` for `i` in `1..=6`.
    pub fn eval_h(&self, i: usize, s: Complex64) -> Result<Complex64> {
        if !(1..=6).contains(&i) {
            return Err(Error::invalid("i", format!("term index must be 1..=6, got {i}")));
        }
        Ok(self.h_all(s)[i - 1])
    }
}

impl CharacteristicFunction for MismatchData {
    fn eval(&self, s: Complex64) -> Complex64 {
        1.0 - self.h_all(s).iter().sum::<Complex64>()
    }

    fn h_abs_sum(&self, s: Complex64) -> Option<f64> {
        Some(self.h_all(s).iter().map(|h| h.norm()).sum())
    }
}

/// Mode condition of the mismatched loop derived without going through
/// the target-system identities:
///
/// ```text
/// P(s) = 1 - (e^{-tau s} - e^{-tau_bar s}) A(s)
/// ```
///
/// where `A` is the transfer from the boundary signal `w2(1, .)` to the
/// state part `int a1 u1 + int a2 u2` of the control law. It follows from
/// reading the `tau_bar` controller as a predictor of the delay-free law
/// `tau_bar` seconds ahead.
#[derive(Debug, Clone)]
pub struct LoopCharacteristic {
    pub tau: f64,
    pub tau_bar: f64,
    /// Weights on `w1(y) = q W e^{-lag1(y) s}`, quadrature folded in.
    g1: Vec<f64>,
    /// Weights on `w2(y) = W e^{-lag2(y) s}`, quadrature folded in.
    g2: Vec<f64>,
    lag1: Vec<f64>,
    lag2: Vec<f64>,
}

impl LoopCharacteristic {
    pub fn from_bundle(bundle: &KernelBundle) -> Result<Self> {
        let gains = bundle.controller_gains()?;
        let l = &bundle.triangle.l;
        let grid = *l.grid();
        if !gains.grid().same_as(&grid) {
            return Err(Error::GridMismatch("controller gains and inverse kernels differ in grid".into()));
        }
        let n = grid.n();
        let h = grid.h();
        let (a1, a2) = (gains.a1(), gains.a2());
        let outer = |i: usize| if i == 0 || i == n - 1 { 0.5 * h } else { h };
        // Exact adjoint of `trapezoid(a . (I + L) w)`.
        let mut g1: Vec<f64> = (0..n).map(|j| outer(j) * a1[j]).collect();
        let mut g2: Vec<f64> = (0..n).map(|j| outer(j) * a2[j]).collect();
        for i in 1..n {
            let wi = outer(i);
            for j in 0..=i {
                let inner = if j == 0 || j == i { 0.5 * h } else { h };
                let w = wi * inner;
                g1[j] += w * (a1[i] * l.k11.get(i, j)? + a2[i] * l.k21.get(i, j)?);
                g2[j] += w * (a1[i] * l.k12.get(i, j)? + a2[i] * l.k22.get(i, j)?);
            }
        }
        let q = bundle.params.q;
        for v in &mut g1 {
            *v *= q;
        }
        let phi1 = TravelMap::build(&bundle.params.eps1, &grid)?;
        let phi2 = TravelMap::build(&bundle.params.eps2, &grid)?;
        let p2 = phi2.total();
        let nodes = grid.nodes();
        Ok(Self {
            tau: bundle.params.tau,
            tau_bar: bundle.params.tau_bar,
            g1,
            g2,
            lag1: nodes.iter().map(|&y| phi1.phi(y) + p2).collect(),
            lag2: nodes.iter().map(|&y| p2 - phi2.phi(y)).collect(),
        })
    }

    /// Transfer from `w2(1, .)` to the state feedback.
    pub fn feedback_transfer(&self, s: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..self.g1.len() {
            acc += self.g1[j] * (-self.lag1[j] * s).exp() + self.g2[j] * (-self.lag2[j] * s).exp();
        }
        acc
    }
}

impl CharacteristicFunction for LoopCharacteristic {
    fn eval(&self, s: Complex64) -> Complex64 {
        if self.tau == self.tau_bar {
            return Complex64::new(1.0, 0.0);
        }
        let d = (-self.tau * s).exp() - (-self.tau_bar * s).exp();
        1.0 - d * self.feedback_transfer(s)
    }
}

/// Scan rectangle in the closed right half plane.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScanWindow {
    pub sigma_max: f64,
    pub omega_max: f64,
    /// Samples along the imaginary direction.
    pub n_im: usize,
    /// Samples along the real direction.
    pub n_re: usize,
    /// Smallest `|P|` tolerated on the contour.
    pub threshold: f64,
}

impl Default for ScanWindow {
    fn default() -> Self {
        Self {
            sigma_max: 2.0,
            omega_max: 40.0,
            n_im: 2000,
            n_re: 200,
            threshold: 1e-6,
        }
    }
}

impl ScanWindow {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_max.is_finite() && self.sigma_max > 0.0) {
            return Err(Error::invalid("sigma_max", "must be positive"));
        }
        if !(self.omega_max.is_finite() && self.omega_max > 0.0) {
            return Err(Error::invalid("omega_max", "must be positive"));
        }
        if self.n_im < 4 {
            return Err(Error::invalid("n_im", "need at least 4 samples"));
        }
        if self.n_re < 2 {
            return Err(Error::invalid("n_re", "need at least 2 samples"));
        }
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            return Err(Error::invalid("threshold", "must be non-negative"));
        }
        Ok(())
    }

    pub fn re_nodes(&self) -> Vec<f64> {
        linspace(0.0, self.sigma_max, self.n_re)
    }

    pub fn im_nodes(&self) -> Vec<f64> {
        linspace(-self.omega_max, self.omega_max, self.n_im)
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Unstable,
}

/// Result of the contour count alone.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourCount {
    pub zero_count: usize,
    /// Accumulated phase over the full contour divided by `2 pi`.
    pub winding: f64,
    pub min_abs: f64,
    pub samples: usize,
}

/// Sampled `|P|` over the window plus the contour verdict.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub window: ScanWindow,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    /// `abs_p[k * n_re + j] = |P(re[j] + i im[k])|`.
    pub abs_p: Vec<f64>,
    /// Minimum of `1 - sum |H_i|` over the grid, when available.
    pub min_small_gain: Option<f64>,
    /// Maximum of `sum |H_i|` on the imaginary axis, when available.
    pub max_h_sum_on_axis: Option<f64>,
    pub contour: ContourCount,
    pub verdict: Verdict,
}

impl StabilityReport {
    pub fn zero_count(&self) -> usize {
        self.contour.zero_count
    }

    /// Grid point with the smallest `|P|`.
    pub fn argmin(&self) -> Complex64 {
        let (k, _) = self
            .abs_p
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bk, bv), (k, &v)| if v < bv { (k, v) } else { (bk, bv) });
        Complex64::new(self.re[k % self.re.len()], self.im[k / self.re.len()])
    }

    pub fn min_abs(&self) -> f64 {
        self.abs_p.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_deviation_from_one(&self, f: &impl CharacteristicFunction) -> f64 {
        let mut worst: f64 = 0.0;
        for &im in &self.im {
            for &re in &self.re {
                worst = worst.max((f.eval(Complex64::new(re, im)) - 1.0).norm());
            }
        }
        worst
    }
}

fn unwrap_step(a: Complex64, b: Complex64) -> f64 {
    (b / a).arg()
}

/// Phase change of `f` along the segment `s0 -> s1`, bisecting where a
/// single step turns by more than `pi/2`.
fn phase_along(
    f: &impl CharacteristicFunction,
    s0: Complex64,
    s1: Complex64,
    steps: usize,
    threshold: f64,
    stats: &mut (f64, usize),
) -> Result<f64> {
    let pts: Vec<Complex64> = (0..=steps).map(|k| s0 + (s1 - s0) * (k as f64 / steps as f64)).collect();
    let vals: Vec<Complex64> = pts.par_iter().map(|&s| f.eval(s)).collect();
    let mut total = 0.0;
    for k in 0..steps {
        total += refine(f, pts[k], pts[k + 1], vals[k], vals[k + 1], 0, threshold, stats)?;
    }
    for v in &vals {
        stats.0 = stats.0.min(v.norm());
    }
    stats.1 += vals.len();
    if stats.0 <= threshold {
        return Err(Error::InconclusiveContour {
            min_abs: stats.0,
            threshold,
        });
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn refine(
    f: &impl CharacteristicFunction,
    a: Complex64,
    b: Complex64,
    fa: Complex64,
    fb: Complex64,
    depth: usize,
    threshold: f64,
    stats: &mut (f64, usize),
) -> Result<f64> {
    let d = unwrap_step(fa, fb);
    if d.abs() <= PI / 2.0 || depth >= 24 {
        return Ok(d);
    }
    let m = (a + b) * 0.5;
    let fm = f.eval(m);
    stats.0 = stats.0.min(fm.norm());
    stats.1 += 1;
    if fm.norm() <= threshold {
        return Err(Error::InconclusiveContour {
            min_abs: fm.norm(),
            threshold,
        });
    }
    Ok(refine(f, a, m, fa, fm, depth + 1, threshold, stats)? + refine(f, m, b, fm, fb, depth + 1, threshold, stats)?)
}

/// Zeros of `f` inside the window, by the argument principle.
///
/// Real data give `f(conj s) = conj f(s)`, so only the upper half of the
/// contour is walked and the phase is doubled.
pub fn count_zeros(f: &impl CharacteristicFunction, window: &ScanWindow) -> Result<ContourCount> {
    window.validate()?;
    let (sig, om) = (window.sigma_max, window.omega_max);
    let half = window.n_im / 2;
    let c = |re, im| Complex64::new(re, im);
    let mut stats = (f64::INFINITY, 0usize);
    let mut phase = 0.0;
    phase += phase_along(f, c(sig, 0.0), c(sig, om), half, window.threshold, &mut stats)?;
    phase += phase_along(f, c(sig, om), c(0.0, om), window.n_re, window.threshold, &mut stats)?;
    phase += phase_along(f, c(0.0, om), c(0.0, 0.0), half, window.threshold, &mut stats)?;
    let winding = 2.0 * phase / (2.0 * PI);
    let rounded = winding.round();
    Ok(ContourCount {
        zero_count: rounded.max(0.0) as usize,
        winding,
        min_abs: stats.0,
        samples: stats.1,
    })
}

/// Samples `|P|` over the window and counts zeros inside it.
pub fn scan_p(f: &impl CharacteristicFunction, window: &ScanWindow) -> Result<StabilityReport> {
    window.validate()?;
    let contour = count_zeros(f, window)?;
    let re = window.re_nodes();
    let im = window.im_nodes();
    let nr = re.len();
    let ni = im.len();
    // Rows with im >= 0 are computed, the rest mirrored.
    let rows: Vec<(Vec<f64>, f64)> = (0..ni)
        .into_par_iter()
        .map(|k| {
            let mirror = ni - 1 - k;
            let row_im = if im[k] >= 0.0 { im[k] } else { -im[mirror] };
            let mut abs = Vec::with_capacity(nr);
            let mut gain = f64::INFINITY;
            for &r in &re {
                let s = Complex64::new(r, row_im);
                abs.push(f.eval(s).norm());
                if let Some(hs) = f.h_abs_sum(s) {
                    gain = gain.min(1.0 - hs);
                }
            }
            (abs, gain)
        })
        .collect();
    let abs_p: Vec<f64> = rows.iter().flat_map(|(a, _)| a.iter().copied()).collect();
    let min_small_gain = if f.h_abs_sum(Complex64::new(0.0, 0.0)).is_some() {
        Some(rows.iter().map(|(_, g)| *g).fold(f64::INFINITY, f64::min))
    } else {
        None
    };
    let max_h_sum_on_axis = if f.h_abs_sum(Complex64::new(0.0, 0.0)).is_some() {
        Some(
            im.iter()
                .map(|&w| f.h_abs_sum(Complex64::new(0.0, w)).unwrap_or(0.0))
                .fold(0.0, f64::max),
        )
    } else {
        None
    };
    let verdict = if contour.zero_count == 0 && contour.min_abs > window.threshold {
        Verdict::Stable
    } else {
        Verdict::Unstable
    };
    Ok(StabilityReport {
        window: *window,
        re,
        im,
        abs_p,
        min_small_gain,
        max_h_sum_on_axis,
        contour,
        verdict,
    })
}

/// Which characteristic function decides stability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharacteristicForm {
    /// `1 - sum H_i` built from the inverse kernels.
    Displayed,
    /// `1 - (e^{-tau s} - e^{-tau_bar s}) A(s)` built from the gains.
    #[default]
    Loop,
}

impl CharacteristicForm {
    pub fn name(&self) -> &'static str {
        match self {
            CharacteristicForm::Displayed => "displayed",
            CharacteristicForm::Loop => "loop",
        }
    }
}

/// Zero count of the chosen characteristic function of `bundle`.
pub fn count_zeros_for(bundle: &KernelBundle, form: CharacteristicForm, window: &ScanWindow) -> Result<ContourCount> {
    match form {
        CharacteristicForm::Displayed => count_zeros(&MismatchData::from_bundle(bundle)?, window),
        CharacteristicForm::Loop => count_zeros(&LoopCharacteristic::from_bundle(bundle)?, window),
    }
}

/// Full scan of the chosen characteristic function of `bundle`.
pub fn scan_p_for(bundle: &KernelBundle, form: CharacteristicForm, window: &ScanWindow) -> Result<StabilityReport> {
    match form {
        CharacteristicForm::Displayed => scan_p(&MismatchData::from_bundle(bundle)?, window),
        CharacteristicForm::Loop => scan_p(&LoopCharacteristic::from_bundle(bundle)?, window),
    }
}

/// Outcome of a margin search.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginResult {
    /// Largest mismatch found stable (the lower end of the range when
    /// nothing larger is).
    pub margin: f64,
    /// Every candidate tried, with its contour verdict.
    pub evaluations: Vec<(f64, bool)>,
}

/// Largest `dtau` in `range` with a stable contour verdict, by bisection.
///
/// The `tau_bar` side kernels are rebuilt for every candidate; the
/// triangle kernels do not depend on the delay and are solved once.
/// Candidates whose contour is inconclusive count as unstable.
pub fn margin_search(
    params: &PlantParams,
    grid: &Grid1D,
    range: (f64, f64),
    window: &ScanWindow,
    iterations: usize,
    form: CharacteristicForm,
    opts: SolveOptions,
) -> Result<MarginResult> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi >= lo) {
        return Err(Error::invalid("range", format!("need 0 <= lo <= hi, got [{lo}, {hi}]")));
    }
    window.validate()?;
    let mut evaluations = Vec::new();
    if hi == 0.0 {
        evaluations.push((0.0, true));
        return Ok(MarginResult { margin: 0.0, evaluations });
    }
    let base = params.clone().with_tau_bar(params.tau);
    let set = TriangleKernelSet::solve(&base, grid)?;
    let mut stable_at = |dtau: f64| -> Result<bool> {
        let p = base.clone().with_tau_bar(base.tau + dtau);
        let bundle = KernelBundle::from_triangle(&p, grid, set.clone(), opts)?;
        let ok = match count_zeros_for(&bundle, form, window) {
            Ok(c) => c.zero_count == 0,
            Err(Error::InconclusiveContour { .. }) => false,
            Err(e) => return Err(e),
        };
        evaluations.push((dtau, ok));
        Ok(ok)
    };
    if stable_at(hi)? {
        return Ok(MarginResult { margin: hi, evaluations });
    }
    if !stable_at(lo)? {
        return Ok(MarginResult { margin: lo, evaluations });
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..iterations {
        let m = 0.5 * (a + b);
        if stable_at(m)? {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(MarginResult { margin: a, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::GainKind;

    fn flat_data(tau: f64, tau_bar: f64, level: f64) -> MismatchData {
        let g = Grid1D::new(21).unwrap();
        let trace = GainTrace {
            kind: GainKind::Mu,
            grid: g,
            values: vec![level; 21],
        };
        let phi = TravelMap::from_samples(&[1.0; 21], &g).unwrap();
        let v = vec![level; 21];
        MismatchData::new(tau, tau_bar, 1.0, &trace, &trace, v.clone(), v.clone(), v.clone(), v, &phi, &phi).unwrap()
    }

    #[test]
    fn exact_delay_gives_unit_p() {
        let d = flat_data(3.0, 3.0, 0.7);
        for s in [Complex64::new(0.0, 0.0), Complex64::new(0.5, 13.0), Complex64::new(2.0, -40.0)] {
            assert_eq!(d.eval(s), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn first_term_vanishes_at_zero() {
        let d = flat_data(3.0, 3.2, 0.7);
        assert_eq!(d.eval_h(1, Complex64::new(0.0, 0.0)).unwrap(), Complex64::new(0.0, 0.0));
        assert!(d.eval_h(0, Complex64::new(0.0, 0.0)).is_err());
        assert!(d.eval_h(7, Complex64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn calibration_root_is_counted() {
        let f = FnCharacteristic(|s: Complex64| 1.0 - 2.0 * (-s).exp());
        let w = ScanWindow {
            omega_max: 3.0,
            n_im: 200,
            n_re: 40,
            ..ScanWindow::default()
        };
        let r = scan_p(&f, &w).unwrap();
        assert_eq!(r.zero_count(), 1);
        assert_eq!(r.verdict, Verdict::Unstable);
        let z = r.argmin();
        assert!((z.re - 2f64.ln()).abs() <= 2.0 / 39.0);
        assert!(z.im.abs() <= 6.0 / 199.0);
    }

    #[test]
    fn zero_free_function_is_stable() {
        let f = FnCharacteristic(|s: Complex64| 1.0 - 0.5 * (-s).exp());
        let r = scan_p(&f, &ScanWindow { n_im: 100, n_re: 20, ..ScanWindow::default() }).unwrap();
        assert_eq!(r.zero_count(), 0);
        assert_eq!(r.verdict, Verdict::Stable);
    }

    #[test]
    fn root_on_contour_is_inconclusive() {
        // 1 - e^{-s} vanishes at s = 0, a contour point.
        let f = FnCharacteristic(|s: Complex64| 1.0 - (-s).exp());
        assert!(matches!(
            count_zeros(&f, &ScanWindow { n_im: 100, n_re: 20, ..ScanWindow::default() }),
            Err(Error::InconclusiveContour { .. })
        ));
    }

    #[test]
    fn empty_range_gives_zero_margin() {
        let g = Grid1D::new(11).unwrap();
        let r = margin_search(
            &PlantParams::reference(),
            &g,
            (0.0, 0.0),
            &ScanWindow::default(),
            4,
            CharacteristicForm::Loop,
            SolveOptions::default(),
        )
        .unwrap();
        assert_eq!(r.margin, 0.0);
    }
}
