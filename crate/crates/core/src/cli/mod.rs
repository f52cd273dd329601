//! Batch front end: kernels, simulation, robustness scan and margin sweep.

pub mod config;
pub mod svg;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernels::{lerp_samples, residual_k, residual_l, ResidualStats, SquareField, TriangleKernels};
use crate::pipeline::KernelBundle;
use crate::plant::{Grid1D, Profile};
use crate::robustness::{
    margin_search, scan_p_for, CharacteristicForm, StabilityReport, Verdict,
};
use crate::simulator::{simulate, ControllerKind, InitialCondition, SimConfig, SimTrajectory};

pub use config::{ControllerChoice, ExperimentConfig, InitialSpec, REFERENCE_CONFIG};

#[derive(Debug, Parser)]
#[command(name = "hypdelay", version, about = "Delay-compensated backstepping for 2x2 hyperbolic PDEs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (TOML). The built-in reference experiment when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Nodes for both the kernel and the simulation grid; `dt` is scaled along.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve every kernel and write fields, gains and residuals.
    Kernels,
    /// Run the closed loop and write trajectories and charts.
    Simulate,
    /// Scan the characteristic function for the configured mismatch.
    Robust,
    /// Search the largest stable delay mismatch.
    Sweep,
    /// Print the built-in reference config.
    Config,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Kernels => "kernels",
            Command::Simulate => "simulate",
            Command::Robust => "robust",
            Command::Sweep => "sweep",
            Command::Config => "config",
        }
    }
}

/// Sidecar describing one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_sha256: String,
    pub version: String,
    pub files: Vec<String>,
    pub timings_s: Vec<(String, f64)>,
    pub diagnostics: Value,
}

/// Files written so far, relative to the output directory.
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::invalid("output", format!("{}: {e}", path.display()))
}

/// CSV text with shortest round-trip numbers.
pub struct Csv(String);

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv(header.join(",") + "\n")
    }

    pub fn row(&mut self, values: &[f64]) {
        for (k, v) in values.iter().enumerate() {
            if k > 0 {
                self.0.push(',');
            }
            let _ = write!(self.0, "{v}");
        }
        self.0.push('\n');
    }

    pub fn finish(self) -> String {
        self.0
    }
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(cfg.to_toml().as_bytes()))
}

/// Resolves the effective config from the flags.
pub fn effective_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?.0,
        None => ExperimentConfig::default(),
    };
    if let Some(n) = cli.grid {
        cfg.override_grid(n)?;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    Ok(cfg)
}

/// Sizes the global thread pool from `HYPDELAY_THREADS`, if set.
pub fn init_threads() {
    if let Some(n) = std::env::var("HYPDELAY_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Runs one command and returns its manifest.
pub fn run(cli: &Cli) -> Result<RunManifest> {
    if cli.command == Command::Config {
        print!("{}", REFERENCE_CONFIG.trim_start());
        return Ok(RunManifest {
            command: "config".into(),
            config_sha256: config_hash(&ExperimentConfig::default()),
            version: env!("CARGO_PKG_VERSION").into(),
            files: Vec::new(),
            timings_s: Vec::new(),
            diagnostics: Value::Null,
        });
    }
    let cfg = effective_config(cli)?;
    run_config(cli.command, &cfg)
}

pub fn run_config(command: Command, cfg: &ExperimentConfig) -> Result<RunManifest> {
    let mut art = Artifacts::new(Path::new(&cfg.output.dir))?;
    art.write("config.toml", &cfg.to_toml())?;
    let mut timings = Vec::new();
    let start = Instant::now();
    let diagnostics = match command {
        Command::Kernels => cmd_kernels(cfg, &mut art, &mut timings)?,
        Command::Simulate => cmd_simulate(cfg, &mut art, &mut timings)?,
        Command::Robust => cmd_robust(cfg, &mut art, &mut timings)?,
        Command::Sweep => cmd_sweep(cfg, &mut art, &mut timings)?,
        Command::Config => Value::Null,
    };
    timings.push(("total".to_string(), start.elapsed().as_secs_f64()));
    let mut files = art.files().to_vec();
    files.push("manifest.json".into());
    let manifest = RunManifest {
        command: command.name().into(),
        config_sha256: config_hash(cfg),
        version: env!("CARGO_PKG_VERSION").into(),
        files,
        timings_s: timings,
        diagnostics,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let path = Path::new(&cfg.output.dir).join("manifest.json");
    std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
    Ok(manifest)
}

fn build_bundle(cfg: &ExperimentConfig, timings: &mut Vec<(String, f64)>) -> Result<KernelBundle> {
    let params = cfg.params()?;
    let grid = cfg.kernel_grid()?;
    let bundle = KernelBundle::build(&params, &grid, Default::default())?;
    for (name, d) in &bundle.timings {
        timings.push((format!("kernels.{name}"), d.as_secs_f64()));
    }
    Ok(bundle)
}

fn stats_json(stats: &[ResidualStats]) -> Value {
    Value::Array(
        stats
            .iter()
            .map(|s| json!({"mean_abs": s.mean_abs, "max_abs": s.max_abs, "checked": s.checked}))
            .collect(),
    )
}

fn triangle_csv(k: &TriangleKernels) -> String {
    let mut csv = Csv::new(&["x", "y", "f11", "f12", "f21", "f22"]);
    let fields = k.fields();
    let iters: Vec<Vec<(f64, f64, f64)>> = fields.iter().map(|f| f.triples().collect()).collect();
    for idx in 0..iters[0].len() {
        let (x, y, a) = iters[0][idx];
        csv.row(&[x, y, a, iters[1][idx].2, iters[2][idx].2, iters[3][idx].2]);
    }
    csv.finish()
}

fn square_csv(f1: &SquareField, f2: &SquareField) -> String {
    let mut csv = Csv::new(&["x", "y", "f1", "f2"]);
    let g = f1.grid();
    for ix in 0..g.n() {
        for iy in 0..g.n() {
            csv.row(&[g.x(ix), g.x(iy), f1.get(ix, iy), f2.get(ix, iy)]);
        }
    }
    csv.finish()
}

fn cmd_kernels(cfg: &ExperimentConfig, art: &mut Artifacts, timings: &mut Vec<(String, f64)>) -> Result<Value> {
    let bundle = build_bundle(cfg, timings)?;
    let params = &bundle.params;
    let g = bundle.grid;
    art.write("kernels_k.csv", &triangle_csv(&bundle.triangle.k))?;
    art.write("kernels_l.csv", &triangle_csv(&bundle.triangle.l))?;
    art.write("kernels_alpha.csv", &square_csv(&bundle.alpha.pair.f1, &bundle.alpha.pair.f2))?;
    art.write("kernels_beta.csv", &square_csv(&bundle.beta.pair.f1, &bundle.beta.pair.f2))?;
    let a1 = bundle.alpha.pair.f1.right_trace();
    let a2 = bundle.alpha.pair.f2.right_trace();
    let (k21, k22) = bundle.nominal_traces();
    let xs = g.nodes();
    let mut csv = Csv::new(&["x", "p", "mu", "alpha1_at_1", "alpha2_at_1", "k21_at_1", "k22_at_1"]);
    for j in 0..g.n() {
        csv.row(&[
            xs[j],
            bundle.alpha.gain.values[j],
            bundle.beta.gain.values[j],
            a1[j],
            a2[j],
            k21[j],
            k22[j],
        ]);
    }
    art.write("gains.csv", &csv.finish())?;
    art.write(
        "gains.svg",
        &svg::line_chart(
            "Controller gains",
            "x",
            "value",
            &[
                svg::Series { label: "p", x: &xs, y: &bundle.alpha.gain.values },
                svg::Series { label: "alpha1(1,.)", x: &xs, y: &a1 },
                svg::Series { label: "alpha2(1,.)", x: &xs, y: &a2 },
                svg::Series { label: "mu", x: &xs, y: &bundle.beta.gain.values },
            ],
            false,
        ),
    )?;
    let clock = Instant::now();
    let diag = json!({
        "grid_n": g.n(),
        "series_terms": {
            "k": bundle.triangle.k.report.terms(),
            "l": bundle.triangle.l.report.terms(),
            "alpha": bundle.alpha.pair.report.terms(),
            "beta": bundle.beta.pair.report.terms(),
        },
        "residuals": {
            "k": stats_json(&residual_k(params, &bundle.triangle.k)?),
            "l": stats_json(&residual_l(params, &bundle.triangle.l)?),
            "alpha": stats_json(&bundle.alpha.residual()),
            "beta": stats_json(&bundle.beta.residual()),
        },
    });
    timings.push(("residuals".into(), clock.elapsed().as_secs_f64()));
    Ok(diag)
}

fn initial_condition(cfg: &ExperimentConfig, grid: &Grid1D) -> Result<InitialCondition> {
    Ok(match &cfg.simulation.initial {
        InitialSpec::Preset(name) if name == "zero" => InitialCondition::zero(grid),
        InitialSpec::Preset(_) => InitialCondition::sin2pi(grid),
        InitialSpec::Table { x, u1, u2 } => {
            let p1 = Profile::table(x.clone(), u1.clone())?;
            let p2 = Profile::table(x.clone(), u2.clone())?;
            InitialCondition::from_fn(grid, |s| p1.eval(s), |s| p2.eval(s))
        }
    })
}

/// Runs the configured closed loop.
pub fn run_simulation(cfg: &ExperimentConfig, bundle: &KernelBundle) -> Result<SimTrajectory> {
    let params = cfg.params()?;
    let grid = cfg.sim_grid()?;
    let controller = match cfg.simulation.controller {
        ControllerChoice::OpenLoop => ControllerKind::OpenLoop,
        ControllerChoice::Nominal => {
            let (k21, k22) = bundle.nominal_traces();
            let on = |v: &[f64]| grid.nodes().iter().map(|&x| lerp_samples(v, &bundle.grid, x)).collect();
            ControllerKind::Nominal { k21: on(&k21), k22: on(&k22) }
        }
        ControllerChoice::Compensated => ControllerKind::Compensated(bundle.controller_gains()?.resample(&grid)?),
    };
    let init = initial_condition(cfg, &grid)?;
    let sc = SimConfig::new(cfg.grid.dt, cfg.simulation.t_end).with_snapshots(cfg.simulation.snapshot_every);
    simulate(&params, &grid, &init, controller, sc)
}

fn cmd_simulate(cfg: &ExperimentConfig, art: &mut Artifacts, timings: &mut Vec<(String, f64)>) -> Result<Value> {
    let bundle = build_bundle(cfg, timings)?;
    let clock = Instant::now();
    let traj = run_simulation(cfg, &bundle)?;
    timings.push(("simulate".into(), clock.elapsed().as_secs_f64()));
    let grid = cfg.sim_grid()?;
    let xs = grid.nodes();
    let mut csv = Csv::new(&["t", "x", "u1", "u2", "v"]);
    for s in &traj.snapshots {
        let vg = Grid1D::new(s.v.len())?;
        for (i, &x) in xs.iter().enumerate() {
            csv.row(&[s.t, x, s.u1[i], s.u2[i], lerp_samples(&s.v, &vg, x)]);
        }
    }
    art.write("trajectory.csv", &csv.finish())?;
    let mut csv = Csv::new(&["t", "l2", "sup", "u", "u_dual"]);
    for k in 0..traj.times.len() {
        csv.row(&[traj.times[k], traj.l2[k], traj.sup[k], traj.control[k], traj.control_dual[k]]);
    }
    art.write("summary.csv", &csv.finish())?;
    art.write(
        "l2.svg",
        &svg::line_chart("L2 norm of (u1, u2)", "t", "L2", &[svg::Series { label: "L2", x: &traj.times, y: &traj.l2 }], true),
    )?;
    art.write(
        "control.svg",
        &svg::line_chart("Control effort", "t", "U", &[svg::Series { label: "U", x: &traj.times, y: &traj.control }], false),
    )?;
    let picks: Vec<usize> = {
        let n = traj.snapshots.len();
        let mut v = vec![0, n / 4, n / 2, n - 1];
        v.dedup();
        v
    };
    let labels: Vec<String> = picks.iter().map(|&k| format!("u1 t={:.2}", traj.snapshots[k].t)).collect();
    let series: Vec<svg::Series<'_>> = picks
        .iter()
        .zip(&labels)
        .map(|(&k, l)| svg::Series { label: l, x: &xs, y: &traj.snapshots[k].u1 })
        .collect();
    art.write("snapshots.svg", &svg::line_chart("State snapshots", "x", "u1", &series, false))?;
    let params = cfg.params()?;
    let t_final = params.t_final(&grid)?;
    Ok(json!({
        "controller": traj.meta.controller,
        "steps": traj.meta.steps,
        "dt": traj.meta.dt,
        "v_cells": traj.meta.v_cells,
        "tau": traj.meta.tau,
        "tau_bar": traj.meta.tau_bar,
        "history_steps": traj.meta.history_steps,
        "history_rounding": traj.meta.tau_bar / traj.meta.dt - traj.meta.history_steps as f64,
        "t_final": t_final,
        "l2_initial": traj.l2[0],
        "l2_final": *traj.l2.last().unwrap_or(&0.0),
        "l2_max": traj.max_l2(),
    }))
}

fn report_json(r: &StabilityReport, form: CharacteristicForm) -> Value {
    json!({
        "form": form.name(),
        "verdict": r.verdict,
        "zero_count": r.zero_count(),
        "winding": r.contour.winding,
        "min_abs_on_contour": r.contour.min_abs,
        "min_abs_on_grid": r.min_abs(),
        "min_small_gain": r.min_small_gain,
        "max_h_sum_on_axis": r.max_h_sum_on_axis,
        "contour_samples": r.contour.samples,
    })
}

fn cmd_robust(cfg: &ExperimentConfig, art: &mut Artifacts, timings: &mut Vec<(String, f64)>) -> Result<Value> {
    let bundle = build_bundle(cfg, timings)?;
    let window = cfg.window();
    let form = cfg.robust.form;
    let clock = Instant::now();
    let report = match scan_p_for(&bundle, form, &window) {
        Ok(r) => r,
        Err(Error::InconclusiveContour { min_abs, threshold }) => {
            eprintln!(
                "warning: |P| = {min_abs:e} on the scan contour (threshold {threshold:e}); \
                 move the window edges or raise the resolution"
            );
            return Ok(json!({"form": form.name(), "verdict": "inconclusive", "min_abs_on_contour": min_abs}));
        }
        Err(e) => return Err(e),
    };
    timings.push(("scan".into(), clock.elapsed().as_secs_f64()));
    let mut csv = Csv::new(&["s_re", "s_im", "abs_p"]);
    let nr = report.re.len();
    for (k, &im) in report.im.iter().enumerate() {
        for (j, &re) in report.re.iter().enumerate() {
            csv.row(&[re, im, report.abs_p[k * nr + j]]);
        }
    }
    art.write("robust_scan.csv", &csv.finish())?;
    // Heatmap rows are the real parts so the long imaginary axis runs across.
    let (row_step, col_step) = ((nr / 60).max(1), (report.im.len() / 200).max(1));
    let rows: Vec<usize> = (0..nr).step_by(row_step).collect();
    let cols: Vec<usize> = (0..report.im.len()).step_by(col_step).collect();
    let mut cells = Vec::with_capacity(rows.len() * cols.len());
    for &j in &rows {
        for &k in &cols {
            cells.push(report.abs_p[k * nr + j].max(1e-300).log10());
        }
    }
    art.write(
        "robust_heatmap.svg",
        &svg::heatmap(
            &format!("log10 |P(s)|, dtau = {}", bundle.params.delta_tau()),
            "Im s",
            "Re s",
            (-window.omega_max, window.omega_max),
            (0.0, window.sigma_max),
            cols.len(),
            &cells,
        ),
    )?;
    let mut diag = report_json(&report, form);
    diag["delta_tau"] = json!(bundle.params.delta_tau());
    println!(
        "verdict: {} (form {}, zeros {}, min |P| on contour {:.3e})",
        match report.verdict {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
        },
        form.name(),
        report.zero_count(),
        report.contour.min_abs
    );
    Ok(diag)
}

fn cmd_sweep(cfg: &ExperimentConfig, art: &mut Artifacts, timings: &mut Vec<(String, f64)>) -> Result<Value> {
    let params = cfg.params()?;
    let grid = cfg.kernel_grid()?;
    let [lo, hi] = cfg.robust.sweep;
    let clock = Instant::now();
    let result = margin_search(
        &params,
        &grid,
        (lo, hi),
        &cfg.window(),
        cfg.robust.iterations,
        cfg.robust.form,
        Default::default(),
    )?;
    timings.push(("margin_search".into(), clock.elapsed().as_secs_f64()));
    let mut csv = Csv::new(&["delta_tau", "stable"]);
    for &(d, ok) in &result.evaluations {
        csv.row(&[d, if ok { 1.0 } else { 0.0 }]);
    }
    art.write("sweep.csv", &csv.finish())?;
    println!("margin: {} (form {})", result.margin, cfg.robust.form.name());
    Ok(json!({"form": cfg.robust.form.name(), "range": [lo, hi], "margin": result.margin, "candidates": result.evaluations.len()}))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_shortest_round_trip() {
        let mut c = Csv::new(&["a", "b"]);
        c.row(&[0.1, 1.0 / 3.0]);
        assert_eq!(c.finish(), "a,b\n0.1,0.3333333333333333\n");
    }

    #[test]
    fn hash_depends_on_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.plant.q = 0.5;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a), config_hash(&ExperimentConfig::default()));
    }
}
