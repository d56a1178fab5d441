mod common;

use ctrlgraph::lti::{equilibrium_for_output, solve_dare, EquilibriumSolution};
use ctrlgraph::scaling::max_scale_closed_form;
use ctrlgraph::synthesis::{
    synthesize_controller, synthesize_pi_set_fixed_gain, verify_synthesis, VerifyOptions,
};
use ctrlgraph::{Equilibrium, Error, LtiSystem, Matrix, Polytope, Scenario, SynthesisResult, Vector};
use proptest::prelude::*;
use rand::Rng;

fn log_det(m: &Matrix) -> f64 {
    m.clone().cholesky().unwrap().l().diagonal().map(f64::ln).sum() * 2.0
}

struct Instance {
    sys: LtiSystem,
    eq: Equilibrium,
    y_k: Polytope,
    u_set: Polytope,
}

/// Random instance with an output box and input box centred on the
/// equilibrium, so that reflecting the equilibrium keeps it feasible.
fn symmetric_instance(rng: &mut rand_chacha::ChaCha8Rng, nx: usize) -> Instance {
    loop {
        let nu = rng.random_range(1..=nx.min(2));
        let sys = common::random_system(rng, nx, nu);
        let y = common::gaussian(rng, nu, 1).column(0) * 0.3;
        let Ok(EquilibriumSolution::Unique(eq)) = equilibrium_for_output(&sys, &y) else {
            continue;
        };
        let half_y: Vec<f64> = (0..nu).map(|_| rng.random_range(1.0..3.0)).collect();
        let half_u: Vec<f64> = eq.u.iter().map(|u| u.abs() + rng.random_range(0.5..3.0)).collect();
        let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
        return Instance {
            y_k: Polytope::from_box(&neg(&half_y), &half_y).unwrap(),
            u_set: Polytope::from_box(&neg(&half_u), &half_u).unwrap(),
            sys,
            eq,
        };
    }
}

/// Joint synthesis, with closed loops pushed onto the unit circle counted as
/// rejections. Open-loop unstable plants whose input rows bind reach that
/// point at the volume optimum.
fn joint(inst: &Instance, eq: &Equilibrium, y_k: &Polytope) -> Option<SynthesisResult> {
    match synthesize_controller(&inst.sys, eq, y_k, &inst.u_set) {
        Ok(r) => Some(r),
        Err(Error::NotStable(_)) => None,
        Err(e) => panic!("{e}"),
    }
}

fn reflected(eq: &Equilibrium) -> Equilibrium {
    Equilibrium {
        x: -&eq.x,
        u: -&eq.u,
        y: -&eq.y,
        unique: eq.unique,
    }
}

fn spacecraft_equilibrium(sys: &LtiSystem, y: [f64; 2]) -> Equilibrium {
    equilibrium_for_output(sys, &Vector::from_row_slice(&y))
        .unwrap()
        .particular()
        .clone()
}

const SPACECRAFT_SAMPLES: [([f64; 2], usize); 6] = [
    ([0.0, 0.0], 0),
    ([100.0, 100.0], 2),
    ([450.0, 650.0], 3),
    ([-300.0, 1000.0], 0),
    ([600.0, 200.0], 1),
    ([200.0, -100.0], 2),
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn accepted_results_verify(seed in any::<u64>(), nx in 1usize..5) {
        let mut rng = common::rng(seed);
        let inst = symmetric_instance(&mut rng, nx);
        let res = joint(&inst, &inst.eq, &inst.y_k);
        prop_assume!(res.is_some());
        let res = res.unwrap();
        let report = verify_synthesis(
            &inst.sys, &res.gain, &res.p, 1.0, &inst.eq, &inst.y_k, &inst.u_set,
            &VerifyOptions { seed, ..Default::default() },
        ).unwrap();
        prop_assert!(report.worst_margin() >= -1e-7, "{:?}", report);
        prop_assert_eq!(report.falsifications, 0);
        prop_assert!(report.spectral_radius < 1.0);
    }

    #[test]
    fn lyapunov_function_decreases_inside(seed in any::<u64>(), nx in 1usize..5) {
        let mut rng = common::rng(seed);
        let inst = symmetric_instance(&mut rng, nx);
        let res = joint(&inst, &inst.eq, &inst.y_k);
        prop_assume!(res.is_some());
        let res = res.unwrap();
        let v = |x: &Vector| (x - &inst.eq.x).dot(&(&res.p * (x - &inst.eq.x)));
        let p_is = ctrlgraph::linalg::sym_inv_sqrt(&res.p).unwrap();
        for _ in 0..100 {
            let r: f64 = rng.random_range(0.0..1.0);
            let x = &inst.eq.x + &p_is * common::unit(&mut rng, nx) * r.sqrt();
            let u = &res.gain * (&x - &inst.eq.x) + &inst.eq.u;
            prop_assert!(inst.u_set.contains_with_slack(&u, 1e-8));
            prop_assert!(inst.y_k.contains_with_slack(&inst.sys.output(&x), 1e-8));
            let next = inst.sys.step(&x, &u);
            prop_assert!(v(&next) <= v(&x) * (1.0 + 1e-9) + 1e-12);
        }
    }

    #[test]
    fn reflection_gives_the_same_set(seed in any::<u64>(), nx in 1usize..4) {
        let mut rng = common::rng(seed);
        let inst = symmetric_instance(&mut rng, nx);
        let (a, b) = (joint(&inst, &inst.eq, &inst.y_k), joint(&inst, &reflected(&inst.eq), &inst.y_k));
        prop_assume!(a.is_some() && b.is_some());
        let (a, b) = (a.unwrap(), b.unwrap());
        let scale = a.log_det_x.abs().max(1.0);
        prop_assert!((a.log_det_x - b.log_det_x).abs() <= 1e-6 * scale,
            "{} vs {}", a.log_det_x, b.log_det_x);
    }

    #[test]
    fn larger_output_box_gives_larger_set(seed in any::<u64>(), nx in 1usize..4, by in 0.05f64..1.0) {
        let mut rng = common::rng(seed);
        let inst = symmetric_instance(&mut rng, nx);
        let wide = Polytope::new(inst.y_k.h().clone(), inst.y_k.k().add_scalar(by)).unwrap();
        let (a, b) = (joint(&inst, &inst.eq, &inst.y_k), joint(&inst, &inst.eq, &wide));
        prop_assume!(a.is_some() && b.is_some());
        let (a, b) = (a.unwrap(), b.unwrap());
        prop_assert!(b.log_det_x >= a.log_det_x - 1e-6 * a.log_det_x.abs().max(1.0));
    }

    #[test]
    fn fixing_the_optimal_gain_keeps_the_optimum(seed in any::<u64>(), nx in 1usize..4) {
        let mut rng = common::rng(seed);
        let inst = symmetric_instance(&mut rng, nx);
        let joint = joint(&inst, &inst.eq, &inst.y_k);
        prop_assume!(joint.is_some());
        let joint = joint.unwrap();
        let fixed = synthesize_pi_set_fixed_gain(&inst.sys, &joint.gain, &inst.eq, &inst.y_k, &inst.u_set).unwrap();
        let scale = joint.log_det_x.abs().max(1.0);
        prop_assert!((joint.log_det_x - fixed.log_det_x).abs() <= 1e-6 * scale,
            "joint {} fixed {}", joint.log_det_x, fixed.log_det_x);
    }
}

#[test]
fn spacecraft_sdp_sets_dominate_scaled_riccati_sets() {
    let scn = Scenario::spacecraft();
    let sys = &scn.system;
    let lqr = solve_dare(sys, &scn.cost).unwrap();
    let n = sys.n_x() as f64;
    for (y, k) in SPACECRAFT_SAMPLES {
        let eq = spacecraft_equilibrium(sys, y);
        let y_k = &scn.output_set.components()[k];
        let rho =
            max_scale_closed_form(&lqr.f, &lqr.p, sys.c(), &eq.u, &eq.y, y_k, &scn.input_set).unwrap();
        let scaled = -log_det(&lqr.p) + 2.0 * n * rho.ln();
        let tol = 1e-6 * scaled.abs();

        let joint = synthesize_controller(sys, &eq, y_k, &scn.input_set).unwrap();
        assert!(joint.log_det_x >= scaled - tol, "{y:?}: {} < {scaled}", joint.log_det_x);
        let fixed = synthesize_pi_set_fixed_gain(sys, &lqr.f, &eq, y_k, &scn.input_set).unwrap();
        assert!(fixed.log_det_x >= scaled - tol, "{y:?}: {} < {scaled}", fixed.log_det_x);
        assert!(joint.log_det_x >= fixed.log_det_x - tol);

        for (gain, p) in [(&joint.gain, &joint.p), (&lqr.f, &fixed.p)] {
            let report =
                verify_synthesis(sys, gain, p, 1.0, &eq, y_k, &scn.input_set, &VerifyOptions::default())
                    .unwrap();
            assert!(report.passed(1e-7), "{y:?}: {report:?}");
        }
    }
}

#[test]
fn inflated_set_fails_verification() {
    let scn = Scenario::spacecraft();
    let sys = &scn.system;
    let eq = spacecraft_equilibrium(sys, [100.0, 100.0]);
    let y_k = &scn.output_set.components()[2];
    let res = synthesize_controller(sys, &eq, y_k, &scn.input_set).unwrap();
    let opts = VerifyOptions::default();
    let ok = verify_synthesis(sys, &res.gain, &res.p, 1.0, &eq, y_k, &scn.input_set, &opts).unwrap();
    let big = verify_synthesis(sys, &res.gain, &(&res.p / 1.05), 1.0, &eq, y_k, &scn.input_set, &opts)
        .unwrap();
    assert!(ok.worst_margin() >= -1e-7);
    assert!(big.worst_input_margin().min(big.worst_output_margin()) < 0.0);
}
