use std::sync::LazyLock;

use hypdelay::controller::{control_from_history, ControllerGains, InputHistory};
use hypdelay::kernels::{
    characteristics, region_of, Branch, F1Region, F2Region, GainKind, GainTrace, GeneralKernelProblem,
    Region, SolveOptions, Which,
};
use hypdelay::pipeline::KernelBundle;
use hypdelay::plant::{Grid1D, PlantParams, Profile, TravelMap};
use hypdelay::robustness::{CharacteristicFunction, LoopCharacteristic, MismatchData};
use hypdelay::simulator::{simulate, ControllerKind, InitialCondition, SimConfig};
use num_complex::Complex64;
use proptest::prelude::*;

fn affine(a: f64, b: f64) -> Profile {
    Profile::custom(move |x| a + b * x)
}

fn speed() -> impl Strategy<Value = (f64, f64)> {
    (0.5f64..2.0, -0.4f64..1.0)
}

/// Small mismatched bundle shared by the symmetry properties.
static BUNDLE: LazyLock<KernelBundle> = LazyLock::new(|| {
    let g = Grid1D::new(21).unwrap();
    KernelBundle::build(&PlantParams::reference().with_tau_bar(3.4), &g, SolveOptions::default()).unwrap()
});

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn travel_map_inverse_is_within_two_cells((a, b) in speed(), n in 11usize..120) {
        let g = Grid1D::new(n).unwrap();
        let m = TravelMap::build(&affine(a, b), &g).unwrap();
        for x in g.nodes() {
            prop_assert!((m.inverse(m.phi(x)) - x).abs() <= 2.0 * g.h());
        }
    }

    #[test]
    fn faster_speed_means_shorter_travel((a, b) in speed(), bump in 0.0f64..1.0, n in 11usize..80) {
        let g = Grid1D::new(n).unwrap();
        let slow = TravelMap::build(&affine(a, b), &g).unwrap();
        let fast = TravelMap::build(&affine(a + bump, b), &g).unwrap();
        for x in g.nodes() {
            prop_assert!(fast.phi(x) <= slow.phi(x) + 1e-14);
        }
    }

    #[test]
    fn settling_time_is_monotone(
        (a, b) in speed(),
        bump in 0.0f64..1.0,
        tau in 0.5f64..5.0,
        dtau in 0.0f64..2.0,
    ) {
        let g = Grid1D::new(41).unwrap();
        let mut p = PlantParams::constant(1.0, 1.0, 1.0, 1.0, 1.0, tau);
        p.eps1 = affine(a, b);
        let base = p.t_final(&g).unwrap();
        let mut faster = p.clone();
        faster.eps1 = affine(a + bump, b);
        faster.eps2 = affine(1.0 + bump, 0.0);
        prop_assert!(faster.t_final(&g).unwrap() <= base + 1e-14);
        let mut longer = p.clone();
        longer.tau = tau + dtau;
        prop_assert!(longer.t_final(&g).unwrap() >= base);
    }

    #[test]
    fn characteristics_stay_behind_their_node(
        x in 0.0f64..=1.0,
        y in 0.0f64..=1.0,
        (a1, b1) in speed(),
        (a2, b2) in speed(),
        tau in 0.5f64..4.0,
    ) {
        let g = Grid1D::new(41).unwrap();
        let pb = GeneralKernelProblem::homogeneous(affine(a1, b1).sample(&g), affine(a2, b2).sample(&g), &g, tau).unwrap();
        let f1 = match region_of(&pb, x, y, Which::F1) {
            Region::F1(F1Region::Top) => Branch::F1ToTop,
            _ => Branch::F1ToLeft,
        };
        let f2 = match region_of(&pb, x, y, Which::F2) {
            Region::F2(F2Region::Left) => Branch::F2ToLeft,
            _ => Branch::F2ToBottom,
        };
        let slack = 1e-9;
        for branch in [f1, f2] {
            let c = characteristics(&pb, x, y, branch).unwrap();
            let up = matches!(branch, Branch::F1ToTop | Branch::F1ToLeft);
            for (&cx, &cy) in c.xs.iter().zip(&c.ys) {
                prop_assert!((-slack..=1.0 + slack).contains(&cx) && (-slack..=1.0 + slack).contains(&cy));
                prop_assert!(cx <= x + slack);
                if up {
                    prop_assert!(cy >= y - slack);
                } else {
                    prop_assert!(cy <= y + slack);
                }
            }
            let (ex, ey) = (*c.xs.last().unwrap(), *c.ys.last().unwrap());
            prop_assert!((ex - x).abs() < 1e-9 && (ey - y).abs() < 2.0 * g.h());
            let m_eps = tau.max(pb.phi1.max_slowness()).max(pb.phi2.max_slowness());
            // x runs linearly in s with slope 1/tau, so the integral is exact.
            let x0 = c.xs[0];
            for (&s, &cx) in c.s.iter().zip(&c.xs) {
                prop_assert!((cx - x0 - s / tau).abs() < 1e-9);
            }
            for k in 1..=3 {
                let integral = tau * (ex.powi(k + 1) - x0.powi(k + 1)) / (k + 1) as f64;
                prop_assert!(integral <= m_eps * x.powi(k + 1) / (k + 1) as f64 * (1.0 + 1e-12) + 1e-15);
            }
        }
    }

    #[test]
    fn control_is_linear(
        a1 in proptest::collection::vec(-3.0f64..3.0, 11),
        a2 in proptest::collection::vec(-3.0f64..3.0, 11),
        p in proptest::collection::vec(-3.0f64..3.0, 11),
        past in proptest::collection::vec(-1.0f64..1.0, 40),
        lambda in -5.0f64..5.0,
    ) {
        let g = Grid1D::new(11).unwrap();
        let trace = GainTrace { kind: GainKind::P, grid: g, values: p };
        let gains = ControllerGains::new(a1, a2, trace, 0.3).unwrap();
        let u1: Vec<f64> = g.nodes().iter().map(|x| (3.0 * x).sin()).collect();
        let u2: Vec<f64> = g.nodes().iter().map(|x| x * x - 0.3).collect();
        let mut h = InputHistory::zeros(0.01, 0.4).unwrap();
        let mut hs = h.clone();
        for &u in &past {
            h.push(u);
            hs.push(lambda * u);
        }
        let scale = |v: &[f64]| v.iter().map(|x| lambda * x).collect::<Vec<_>>();
        let base = control_from_history(&gains, &u1, &u2, &h).unwrap();
        let scaled = control_from_history(&gains, &scale(&u1), &scale(&u2), &hs).unwrap();
        prop_assert!((scaled - lambda * base).abs() <= 1e-12 * (1.0 + base.abs() * lambda.abs()));
    }

    #[test]
    fn characteristic_functions_are_conjugate_symmetric(re in 0.0f64..2.0, im in -40.0f64..40.0) {
        let s = Complex64::new(re, im);
        let d = MismatchData::from_bundle(&BUNDLE).unwrap();
        let l = LoopCharacteristic::from_bundle(&BUNDLE).unwrap();
        for v in [(d.eval(s), d.eval(s.conj())), (l.eval(s), l.eval(s.conj()))] {
            prop_assert!((v.0.conj() - v.1).norm() <= 1e-12 * (1.0 + v.0.norm()));
        }
    }

    #[test]
    fn equilibrium_stays_at_rest(tau_bar in 2.5f64..3.5, steps in 1usize..200) {
        let g = Grid1D::new(21).unwrap();
        let p = PlantParams::reference().with_tau_bar(tau_bar);
        let gains = BUNDLE.controller_gains().unwrap();
        let dt = 0.05;
        let tr = simulate(&p, &g, &InitialCondition::zero(&g), ControllerKind::Compensated(gains), SimConfig::new(dt, steps as f64 * dt)).unwrap();
        prop_assert!(tr.l2.iter().chain(&tr.control).all(|&v| v == 0.0));
    }
}
