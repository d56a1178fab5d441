mod common;

use ctrlgraph::lti::{simulate, solve_dare};
use ctrlgraph::scaling::{best_component_scale, max_scale_closed_form, max_scale_lp, FixedGainScaler};
use ctrlgraph::{Error, Polytope, Scenario, Vector};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn widen(poly: &Polytope, by: f64) -> Polytope {
    Polytope::new(poly.h().clone(), poly.k().add_scalar(by)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_matches_lp(seed in any::<u64>(), nx in 1usize..7) {
        let mut rng = common::rng(seed);
        let inst = common::scaling_instance(&mut rng, nx);
        let cf = max_scale_closed_form(
            &inst.gain, &inst.p, inst.sys.c(), &inst.u_bar, &inst.y_bar, &inst.y_k, &inst.u_set,
        ).unwrap();
        let (lp, _, u) = max_scale_lp(&inst.sys, &inst.gain, &inst.p, &inst.y_bar, &inst.y_k, &inst.u_set).unwrap();
        prop_assert!(cf > 0.0);
        prop_assert!(rel(cf, lp) < 1e-8, "closed form {} vs LP {}", cf, lp);
        prop_assert!((u - &inst.u_bar).norm() < 1e-8 * (1.0 + inst.u_bar.norm()));
    }

    #[test]
    fn scale_grows_with_the_constraint_sets(seed in any::<u64>(), nx in 1usize..6, by in 0.01f64..2.0) {
        let mut rng = common::rng(seed);
        let inst = common::scaling_instance(&mut rng, nx);
        let scale = |y_k: &Polytope, u_set: &Polytope| {
            max_scale_closed_form(&inst.gain, &inst.p, inst.sys.c(), &inst.u_bar, &inst.y_bar, y_k, u_set).unwrap()
        };
        let base = scale(&inst.y_k, &inst.u_set);
        prop_assert!(scale(&widen(&inst.y_k, by), &inst.u_set) >= base);
        prop_assert!(scale(&inst.y_k, &widen(&inst.u_set, by)) >= base);
        prop_assert!(scale(&widen(&inst.y_k, by), &widen(&inst.u_set, by)) > base);
    }

    #[test]
    fn scaled_set_is_invariant_and_admissible(seed in any::<u64>(), nx in 1usize..6) {
        let mut rng = common::rng(seed);
        let inst = common::scaling_instance(&mut rng, nx);
        let rho = max_scale_closed_form(
            &inst.gain, &inst.p, inst.sys.c(), &inst.u_bar, &inst.y_bar, &inst.y_k, &inst.u_set,
        ).unwrap();
        let x_bar = {
            let (_, x, _) = max_scale_lp(&inst.sys, &inst.gain, &inst.p, &inst.y_bar, &inst.y_k, &inst.u_set).unwrap();
            x
        };
        let p_is = ctrlgraph::linalg::sym_inv_sqrt(&inst.p).unwrap();
        let v = |x: &Vector| (x - &x_bar).dot(&(&inst.p * (x - &x_bar)));
        for _ in 0..20 {
            let x0 = &x_bar + &p_is * common::unit(&mut rng, nx) * rho;
            let traj = simulate(&inst.sys, &x0, |x| &inst.gain * (x - &x_bar) + &inst.u_bar, 100);
            let tol = 1e-8 * (1.0 + rho * rho);
            for w in traj.states.windows(2) {
                prop_assert!(v(&w[1]) <= v(&w[0]) + tol);
            }
            for u in &traj.inputs {
                prop_assert!(inst.u_set.contains_with_slack(u, 1e-8));
            }
            for y in &traj.outputs {
                prop_assert!(inst.y_k.contains_with_slack(y, 1e-8));
            }
        }
    }

    #[test]
    fn interior_samples_get_positive_scale(seed in any::<u64>(), nx in 1usize..6) {
        let mut rng = common::rng(seed);
        let inst = common::scaling_instance(&mut rng, nx);
        let scaler = FixedGainScaler::new(
            &inst.sys,
            &inst.gain,
            &inst.p,
            &ctrlgraph::UnionOfPolytopes::new(vec![inst.y_k.clone()]).unwrap(),
            &inst.u_set,
        ).unwrap();
        let rho = scaler.scale(&inst.u_bar, &inst.y_bar, 0).unwrap();
        prop_assert!(rho > 0.0);
        let cf = max_scale_closed_form(
            &inst.gain, &inst.p, inst.sys.c(), &inst.u_bar, &inst.y_bar, &inst.y_k, &inst.u_set,
        ).unwrap();
        prop_assert!(rel(rho, cf) < 1e-12);
    }
}

#[test]
fn spacecraft_closed_form_matches_lp() {
    let scn = Scenario::spacecraft();
    let lqr = solve_dare(&scn.system, &scn.cost).unwrap();
    for y in [[100.0, 100.0], [0.0, 0.0], [450.0, 650.0], [-200.0, 900.0]] {
        let y = Vector::from_row_slice(&y);
        let sets = best_component_scale(&scn.system, &lqr.f, &lqr.p, &y, &scn.output_set, &scn.input_set)
            .unwrap();
        assert!(!sets.is_empty());
        for s in &sets {
            let y_k = &scn.output_set.components()[s.component];
            let (lp, x, _) = max_scale_lp(&scn.system, &lqr.f, &lqr.p, &y, y_k, &scn.input_set).unwrap();
            assert!(rel(s.rho, lp) < 1e-8, "{y}: {} vs {lp}", s.rho);
            assert!((x - &s.x_bar).norm() < 1e-6);
        }
    }
}

#[test]
fn spacecraft_origin_lies_in_two_components() {
    let scn = Scenario::spacecraft();
    let lqr = solve_dare(&scn.system, &scn.cost).unwrap();
    let sets = best_component_scale(
        &scn.system,
        &lqr.f,
        &lqr.p,
        &Vector::zeros(2),
        &scn.output_set,
        &scn.input_set,
    )
    .unwrap();
    assert_eq!(sets.iter().map(|s| s.component).collect::<Vec<_>>(), vec![0, 2]);
    for s in &sets {
        let y_k = &scn.output_set.components()[s.component];
        let (lp, _, _) = max_scale_lp(&scn.system, &lqr.f, &lqr.p, &s.y_bar, y_k, &scn.input_set).unwrap();
        assert!(rel(s.rho, lp) < 1e-8);
    }

    let debris = Vector::from_vec(vec![300.0, 400.0]);
    let r = best_component_scale(&scn.system, &lqr.f, &lqr.p, &debris, &scn.output_set, &scn.input_set);
    assert!(matches!(r, Err(Error::OutsideFreeSpace)));
}
