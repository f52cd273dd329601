use hypdelay::kernels::{trapezoid, SolveOptions};
use hypdelay::pipeline::KernelBundle;
use hypdelay::plant::{Grid1D, PlantParams};
use hypdelay::robustness::{
    count_zeros, margin_search, scan_p_for, CharacteristicForm, CharacteristicFunction, FnCharacteristic,
    LoopCharacteristic, MismatchData, ScanWindow, Verdict,
};
use hypdelay::simulator::{simulate, ControllerKind, InitialCondition, SimConfig};
use num_complex::Complex64;

const N: usize = 51;

fn coarse() -> ScanWindow {
    ScanWindow {
        n_im: 800,
        n_re: 60,
        ..ScanWindow::default()
    }
}

fn bundle(dtau: f64) -> KernelBundle {
    let g = Grid1D::new(N).unwrap();
    KernelBundle::build(&PlantParams::reference().with_tau_bar(3.0 + dtau), &g, SolveOptions::default()).unwrap()
}

/// `L2(4 t_F) / L2(t_F)` of the mismatched closed loop.
fn growth(b: &KernelBundle) -> f64 {
    let g = b.grid;
    let t_f = b.params.t_final(&g).unwrap();
    let tr = simulate(
        &b.params,
        &g,
        &InitialCondition::sin2pi(&g),
        ControllerKind::Compensated(b.controller_gains().unwrap()),
        SimConfig::new(0.02, 4.0 * t_f),
    )
    .unwrap();
    tr.l2_at(4.0 * t_f) / tr.l2_at(t_f)
}

/// Zeros with real part above `shift`.
fn zeros_right_of(b: &KernelBundle, shift: f64) -> usize {
    let l = LoopCharacteristic::from_bundle(b).unwrap();
    let shifted = FnCharacteristic(move |s: Complex64| l.eval(s + shift));
    count_zeros(&shifted, &coarse()).unwrap().zero_count
}

#[test]
fn scan_verdicts_match_the_time_domain() {
    for dtau in [0.2, 0.5] {
        let b = bundle(dtau);
        let r = scan_p_for(&b, CharacteristicForm::Loop, &coarse()).unwrap();
        let ratio = growth(&b);
        match r.verdict {
            Verdict::Stable => assert!(ratio < 1.0, "dtau {dtau}: stable verdict but L2 ratio {ratio}"),
            Verdict::Unstable => {
                if zeros_right_of(&b, 0.1) > 0 {
                    assert!(ratio > 1.0, "dtau {dtau}: zero right of 0.1 but L2 ratio {ratio}");
                }
            }
        }
        // The pair is chosen to exercise both branches.
        assert_eq!(r.verdict == Verdict::Stable, dtau < 0.25, "dtau {dtau}");
    }
}

/// The kernel-based form of the characteristic function misses this
/// instability: it keeps |P| close to 1 although the loop grows.
#[test]
fn displayed_kernel_form_misses_a_half_second_mismatch() {
    let b = bundle(0.5);
    let displayed = scan_p_for(&b, CharacteristicForm::Displayed, &coarse()).unwrap();
    assert_eq!(displayed.verdict, Verdict::Stable);
    assert!(growth(&b) > 1.0);
}

#[test]
fn small_gain_holds_on_the_axis_for_a_small_mismatch() {
    let b = bundle(0.2);
    let r = scan_p_for(&b, CharacteristicForm::Displayed, &coarse()).unwrap();
    assert!(r.max_h_sum_on_axis.unwrap() < 1.0);
    assert!(r.min_small_gain.unwrap() > 0.0);
    assert_eq!(r.verdict, Verdict::Stable);
}

#[test]
fn terms_at_the_origin() {
    let b = bundle(0.2);
    let d = MismatchData::from_bundle(&b).unwrap();
    let zero = Complex64::new(0.0, 0.0);
    assert_eq!(d.eval_h(1, zero).unwrap(), zero);
    let dmu: Vec<f64> = d.mu_bar.iter().zip(&d.mu).map(|(a, b)| a - b).collect();
    let h2 = d.eval_h(2, zero).unwrap();
    assert!((h2.re - trapezoid(&dmu, b.grid.h())).abs() < 1e-12 && h2.im == 0.0);
}

#[test]
fn exact_delay_leaves_p_at_one() {
    let b = bundle(0.0);
    let probe = scan_p_for(&b, CharacteristicForm::Loop, &ScanWindow { n_im: 100, n_re: 10, ..ScanWindow::default() }).unwrap();
    assert_eq!(probe.max_abs_deviation_from_one(&MismatchData::from_bundle(&b).unwrap()), 0.0);
    assert_eq!(probe.max_abs_deviation_from_one(&LoopCharacteristic::from_bundle(&b).unwrap()), 0.0);
    assert_eq!(probe.verdict, Verdict::Stable);
}

#[test]
fn margin_lies_between_the_probed_mismatches() {
    let g = Grid1D::new(N).unwrap();
    let m = margin_search(&PlantParams::reference(), &g, (0.0, 1.0), &coarse(), 5, CharacteristicForm::Loop, SolveOptions::default())
        .unwrap();
    assert!((0.2..0.5).contains(&m.margin), "{}", m.margin);
    assert_eq!(m.evaluations.len(), 7);
}
