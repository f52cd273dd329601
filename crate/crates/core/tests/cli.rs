use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[plant]
eps1 = 1.0
eps2 = 1.0
c1 = 1.0
c2 = 1.0
q = 1.0
tau = 3.0
tau_bar = 3.2

[grid]
kernel_n = 21
sim_n = 21
dt = 0.05

[simulation]
controller = "compensated"
t_end = 2.0
initial = "sin2pi"
snapshot_every = 10

[robust]
form = "loop"
sigma_max = 2.0
omega_max = 40.0
n_im = 200
n_re = 20
threshold = 1e-6
sweep = [0.0, 1.0]
iterations = 3

[output]
dir = "unused"
"#;

fn hypdelay(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("config.in.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_hypdelay"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn listed(dir: &Path) -> Vec<String> {
    let text = fs::read_to_string(dir.join("out/manifest.json")).unwrap();
    let m: serde_json::Value = serde_json::from_str(&text).unwrap();
    m["files"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect()
}

#[test]
fn simulate_output_is_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    ok(&hypdelay(a.path(), SMALL, &["simulate"]));
    ok(&hypdelay(b.path(), SMALL, &["simulate"]));
    for name in ["trajectory.csv", "summary.csv"] {
        let x = fs::read(a.path().join("out").join(name)).unwrap();
        let y = fs::read(b.path().join("out").join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs");
    }
}

#[test]
fn manifest_lists_exactly_the_written_files() {
    for cmd in ["kernels", "simulate", "robust", "sweep"] {
        let d = tempfile::tempdir().unwrap();
        ok(&hypdelay(d.path(), SMALL, &[cmd]));
        let files: BTreeSet<String> = listed(d.path()).into_iter().collect();
        let on_disk: BTreeSet<String> = fs::read_dir(d.path().join("out"))
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert_eq!(files, on_disk, "{cmd}");
    }
}

#[test]
fn uncoupled_plant_writes_zero_kernels() {
    let d = tempfile::tempdir().unwrap();
    let cfg = SMALL.replace("c1 = 1.0", "c1 = 0.0").replace("c2 = 1.0", "c2 = 0.0");
    ok(&hypdelay(d.path(), &cfg, &["kernels"]));
    for name in ["kernels_k.csv", "kernels_l.csv", "kernels_alpha.csv", "kernels_beta.csv"] {
        let text = fs::read_to_string(d.path().join("out").join(name)).unwrap();
        let mut rows = text.lines();
        let header: Vec<&str> = rows.next().unwrap().split(',').collect();
        let mut count = 0;
        for row in rows {
            for (col, v) in header.iter().zip(row.split(',')) {
                if *col != "x" && *col != "y" {
                    assert_eq!(v.parse::<f64>().unwrap(), 0.0, "{name} {col}");
                }
            }
            count += 1;
        }
        assert!(count > 0);
    }
}

#[test]
fn robust_reports_a_verdict() {
    let d = tempfile::tempdir().unwrap();
    let out = hypdelay(d.path(), SMALL, &["robust"]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("stable"));
    let scan = fs::read_to_string(d.path().join("out/robust_scan.csv")).unwrap();
    assert_eq!(scan.lines().count(), 1 + 200 * 20);
}

#[test]
fn bad_configs_name_the_field() {
    let cases = [
        ("eps2 = 1.0", "eps2 = -1.0", "plant.eps2"),
        ("dt = 0.05", "dt = 0.5", "grid.dt"),
        ("initial = \"sin2pi\"", "initial = \"square\"", "simulation.initial"),
        ("n_re = 20", "n_re = 0", "robust.n_re"),
        ("n_im = 200", "n_im = 1", "robust.n_im"),
        ("t_end = 2.0", "t_end = -2.0", "simulation.t_end"),
    ];
    for (from, to, field) in cases {
        let d = tempfile::tempdir().unwrap();
        let out = hypdelay(d.path(), &SMALL.replace(from, to), &["simulate"]);
        assert_eq!(out.status.code(), Some(1), "{to}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(field), "{to}: {err}");
    }
}

#[test]
fn config_command_prints_a_loadable_config() {
    let out = Command::new(env!("CARGO_BIN_EXE_hypdelay")).arg("config").output().unwrap();
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    hypdelay::cli::ExperimentConfig::from_toml(&text).unwrap();
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            hypdelay::cli::ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 4);
}
