use std::sync::LazyLock;

use hypdelay::kernels::SolveOptions;
use hypdelay::pipeline::KernelBundle;
use hypdelay::plant::{Grid1D, PlantParams};
use hypdelay::simulator::{
    simulate, transform_forward, ControllerKind, InitialCondition, SimConfig, SimTrajectory,
};

const N: usize = 51;
const DT: f64 = 0.02;

static REFERENCE: LazyLock<KernelBundle> = LazyLock::new(|| {
    let g = Grid1D::new(N).unwrap();
    KernelBundle::build(&PlantParams::reference(), &g, SolveOptions::default()).unwrap()
});

fn run(kind: ControllerKind, t_end: f64) -> SimTrajectory {
    let g = Grid1D::new(N).unwrap();
    simulate(
        &PlantParams::reference(),
        &g,
        &InitialCondition::sin2pi(&g),
        kind,
        SimConfig::new(DT, t_end).with_snapshots(5),
    )
    .unwrap()
}

fn boundary_defect(tr: &SimTrajectory, from: f64) -> f64 {
    let k = REFERENCE.transform_kernels();
    tr.snapshots
        .iter()
        .filter(|s| s.t > from)
        .map(|s| transform_forward(s, &k).unwrap().z.last().unwrap().abs())
        .fold(0.0, f64::max)
}

#[test]
fn exact_compensation_settles_in_finite_time() {
    let g = Grid1D::new(N).unwrap();
    let h = g.h();
    let t_f = PlantParams::reference().t_final(&g).unwrap();
    let tr = run(ControllerKind::Compensated(REFERENCE.controller_gains().unwrap()), t_f + 1.0);
    assert!(tr.sup_at(t_f + 0.1) <= 50.0 * h, "sup {}", tr.sup_at(t_f + 0.1));
}

#[test]
fn both_control_forms_agree_along_a_run() {
    let h = Grid1D::new(N).unwrap().h();
    let tr = run(ControllerKind::Compensated(REFERENCE.controller_gains().unwrap()), 8.0);
    // U(0) is the idle actuator, not the law evaluated on the initial state.
    let gap = tr.control[1..]
        .iter()
        .zip(&tr.control_dual[1..])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(gap <= 5.0 * h, "{gap}");
}

#[test]
fn target_boundary_is_held_only_with_compensation() {
    let h = Grid1D::new(N).unwrap().h();
    let comp = run(ControllerKind::Compensated(REFERENCE.controller_gains().unwrap()), 8.0);
    let (k21, k22) = REFERENCE.nominal_traces();
    let nominal = run(ControllerKind::Nominal { k21, k22 }, 8.0);
    let held = boundary_defect(&comp, 0.0);
    let lost = boundary_defect(&nominal, 0.0);
    assert!(held <= 5.0 * h, "{held}");
    assert!(lost > 10.0 * held, "{lost} vs {held}");
}

#[test]
fn nominal_feedback_does_not_converge() {
    let (k21, k22) = REFERENCE.nominal_traces();
    let tr = run(ControllerKind::Nominal { k21, k22 }, 15.0);
    assert!(tr.l2_at(15.0) >= 0.1 * tr.max_l2());
}

#[test]
fn run_metadata_records_the_history_length() {
    let tr = run(ControllerKind::Compensated(REFERENCE.controller_gains().unwrap()), 0.2);
    assert_eq!(tr.meta.history_steps, 150);
    assert_eq!(tr.meta.controller, "compensated");
    assert_eq!(tr.times.len(), 11);
    assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    assert!(tr.l2.iter().all(|&v| v >= 0.0));
}

#[test]
fn blow_up_is_reported() {
    // A huge reflection makes the open loop explode within the horizon.
    let g = Grid1D::new(21).unwrap();
    let p = PlantParams::constant(1.0, 1.0, 40.0, 40.0, 50.0, 1.0);
    let err = simulate(&p, &g, &InitialCondition::sin2pi(&g), ControllerKind::OpenLoop, SimConfig::new(0.05, 400.0)).unwrap_err();
    assert!(matches!(err, hypdelay::Error::NonFiniteState { .. }), "{err}");
}
