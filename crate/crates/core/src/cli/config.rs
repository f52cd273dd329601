//! Experiment configuration, read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::{Grid1D, PlantParams, Profile};
use crate::robustness::{CharacteristicForm, ScanWindow};

/// A coefficient: a constant or a table of `(x, value)` samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Constant(f64),
    Table { x: Vec<f64>, y: Vec<f64> },
}

impl ProfileSpec {
    fn to_profile(&self, field: &'static str) -> Result<Profile> {
        match self {
            ProfileSpec::Constant(v) => Ok(Profile::from(*v)),
            ProfileSpec::Table { x, y } => {
                Profile::table(x.clone(), y.clone()).map_err(|e| Error::invalid(field, e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub eps1: ProfileSpec,
    pub eps2: ProfileSpec,
    pub c1: ProfileSpec,
    pub c2: ProfileSpec,
    pub q: f64,
    pub tau: f64,
    /// Defaults to `tau`.
    #[serde(default)]
    pub tau_bar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub kernel_n: usize,
    pub sim_n: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerChoice {
    Compensated,
    Nominal,
    OpenLoop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    Preset(String),
    Table { x: Vec<f64>, u1: Vec<f64>, u2: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub controller: ControllerChoice,
    pub t_end: f64,
    pub initial: InitialSpec,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
}

fn default_snapshot_every() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustSection {
    #[serde(default)]
    pub form: CharacteristicForm,
    #[serde(flatten)]
    pub window: ScanWindowSpec,
    /// `[lo, hi]` for the margin sweep.
    #[serde(default = "default_sweep")]
    pub sweep: [f64; 2],
    #[serde(default = "default_iterations")]
    pub iterations: usize,
}

fn default_sweep() -> [f64; 2] {
    [0.0, 1.0]
}

fn default_iterations() -> usize {
    7
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanWindowSpec {
    #[serde(default = "d_sigma")]
    pub sigma_max: f64,
    #[serde(default = "d_omega")]
    pub omega_max: f64,
    #[serde(default = "d_nim")]
    pub n_im: usize,
    #[serde(default = "d_nre")]
    pub n_re: usize,
    #[serde(default = "d_threshold")]
    pub threshold: f64,
}

fn d_sigma() -> f64 {
    ScanWindow::default().sigma_max
}
fn d_omega() -> f64 {
    ScanWindow::default().omega_max
}
fn d_nim() -> usize {
    ScanWindow::default().n_im
}
fn d_nre() -> usize {
    ScanWindow::default().n_re
}
fn d_threshold() -> f64 {
    ScanWindow::default().threshold
}

impl From<ScanWindowSpec> for ScanWindow {
    fn from(s: ScanWindowSpec) -> Self {
        ScanWindow {
            sigma_max: s.sigma_max,
            omega_max: s.omega_max,
            n_im: s.n_im,
            n_re: s.n_re,
            threshold: s.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantSection,
    pub grid: GridSection,
    pub simulation: SimulationSection,
    pub robust: RobustSection,
    pub output: OutputSection,
}

/// The reference experiment: unit coefficients, `tau = 3`, `h = 0.01`.
pub const REFERENCE_CONFIG: &str = r#"
[plant]
eps1 = 1.0
eps2 = 1.0
c1 = 1.0
c2 = 1.0
q = 1.0
tau = 3.0

[grid]
kernel_n = 101
sim_n = 101
dt = 0.01

[simulation]
controller = "compensated"
t_end = 8.0
initial = "sin2pi"
snapshot_every = 10

[robust]
form = "loop"
sigma_max = 2.0
omega_max = 40.0
n_im = 2000
n_re = 200
threshold = 1e-6
sweep = [0.0, 1.0]
iterations = 7

[output]
dir = "out"
"#;

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::from_toml(REFERENCE_CONFIG).expect("built-in config is valid")
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::invalid("config", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid("config", format!("cannot read {}: {e}", path.display())))?;
        Ok((Self::from_toml(&text)?, text))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn params(&self) -> Result<PlantParams> {
        let p = &self.plant;
        Ok(PlantParams {
            eps1: p.eps1.to_profile("plant.eps1")?,
            eps2: p.eps2.to_profile("plant.eps2")?,
            c1: p.c1.to_profile("plant.c1")?,
            c2: p.c2.to_profile("plant.c2")?,
            q: p.q,
            tau: p.tau,
            tau_bar: p.tau_bar.unwrap_or(p.tau),
        })
    }

    pub fn kernel_grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.grid.kernel_n).map_err(|e| Error::invalid("grid.kernel_n", e.to_string()))
    }

    pub fn sim_grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.grid.sim_n).map_err(|e| Error::invalid("grid.sim_n", e.to_string()))
    }

    pub fn window(&self) -> ScanWindow {
        self.robust.window.into()
    }

    /// Uses `n` nodes for both grids and scales `dt` with the spacing.
    pub fn override_grid(&mut self, n: usize) -> Result<()> {
        let ratio = self.grid.dt * (self.grid.sim_n.max(2) - 1) as f64;
        self.grid.kernel_n = n;
        self.grid.sim_n = n;
        self.grid.dt = ratio / (n.max(2) - 1) as f64;
        self.validate()
    }

    /// Checks every field against the module preconditions, naming the
    /// offending field.
    pub fn validate(&self) -> Result<()> {
        let params = self.params()?;
        let kg = self.kernel_grid()?;
        let sg = self.sim_grid()?;
        for (name, prof) in [("plant.eps1", &params.eps1), ("plant.eps2", &params.eps2)] {
            if prof.sample(&kg).iter().chain(&prof.sample(&sg)).any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::invalid(name, "transport speed must be positive and finite"));
            }
        }
        for (name, prof) in [("plant.c1", &params.c1), ("plant.c2", &params.c2)] {
            if prof.sample(&kg).iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(name, "coupling must be finite"));
            }
        }
        if !params.q.is_finite() {
            return Err(Error::invalid("plant.q", "must be finite"));
        }
        if !(params.tau.is_finite() && params.tau > 0.0) {
            return Err(Error::invalid("plant.tau", "must be positive"));
        }
        if !(params.tau_bar.is_finite() && params.tau_bar > 0.0) {
            return Err(Error::invalid("plant.tau_bar", "must be positive"));
        }
        params.validate(&kg)?;
        let g = &self.grid;
        if !(g.dt.is_finite() && g.dt > 0.0) {
            return Err(Error::invalid("grid.dt", "must be positive"));
        }
        let vmax = params
            .eps1
            .sample(&sg)
            .into_iter()
            .chain(params.eps2.sample(&sg))
            .fold(0.0, f64::max);
        if g.dt * vmax > sg.h() * (1.0 + 1e-9) {
            return Err(Error::CflViolation(format!(
                "grid.dt * max speed = {} exceeds the spacing {}",
                g.dt * vmax,
                sg.h()
            )));
        }
        if g.dt > params.tau {
            return Err(Error::CflViolation("grid.dt exceeds the actuator delay".into()));
        }
        let s = &self.simulation;
        if !(s.t_end.is_finite() && s.t_end > 0.0) {
            return Err(Error::invalid("simulation.t_end", "must be positive"));
        }
        match &s.initial {
            InitialSpec::Preset(name) if name != "sin2pi" && name != "zero" => {
                return Err(Error::invalid(
                    "simulation.initial",
                    format!("unknown preset {name:?} (expected \"sin2pi\" or \"zero\")"),
                ));
            }
            InitialSpec::Table { x, u1, u2 } => {
                Profile::table(x.clone(), u1.clone()).map_err(|e| Error::invalid("simulation.initial.u1", e.to_string()))?;
                Profile::table(x.clone(), u2.clone()).map_err(|e| Error::invalid("simulation.initial.u2", e.to_string()))?;
            }
            _ => {}
        }
        self.window().validate().map_err(|e| match e {
            Error::InvalidParameter { field, reason } => Error::invalid(robust_field(&field), reason),
            other => other,
        })?;
        let [lo, hi] = self.robust.sweep;
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi >= lo) {
            return Err(Error::invalid("robust.sweep", "need 0 <= lo <= hi"));
        }
        if self.output.dir.is_empty() {
            return Err(Error::invalid("output.dir", "must not be empty"));
        }
        Ok(())
    }
}

fn robust_field(field: &str) -> &'static str {
    match field {
        "sigma_max" => "robust.sigma_max",
        "omega_max" => "robust.omega_max",
        "threshold" => "robust.threshold",
        "n_im" => "robust.n_im",
        _ => "robust.n_re",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn built_in_config_round_trips() {
        let cfg = ExperimentConfig::default();
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.params().unwrap().tau_bar, 3.0);
    }

    #[test]
    fn negative_speed_names_the_field() {
        let text = REFERENCE_CONFIG.replace("eps2 = 1.0", "eps2 = -1.0");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("plant.eps2"), "{err}");
    }

    #[test]
    fn tabulated_profiles_are_accepted() {
        let text = REFERENCE_CONFIG
            .replace("eps1 = 1.0", "eps1 = { x = [0.0, 1.0], y = [1.0, 2.0] }")
            .replace("dt = 0.01", "dt = 0.005");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert!((cfg.params().unwrap().eps1.eval(0.5) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn cfl_is_checked_at_load() {
        let text = REFERENCE_CONFIG.replace("dt = 0.01", "dt = 0.02");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::CflViolation(_))));
    }

    #[test]
    fn grid_override_keeps_the_courant_number() {
        let mut cfg = ExperimentConfig::default();
        cfg.override_grid(51).unwrap();
        assert_eq!(cfg.grid.kernel_n, 51);
        assert!((cfg.grid.dt - 0.02).abs() < 1e-15);
    }
}
