mod common;

use ctrlgraph::graph::{
    build_free_space_graph, existence_check, sample_grid, shortest_path, with_endpoints,
};
use ctrlgraph::pipeline::{run_pipeline, PipelineOptions, Stage};
use ctrlgraph::{DesignMethod, Error, Polytope, Scenario, Vector};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn search_matches_enumeration(seed in any::<u64>(), n in 1usize..9, density in 0.1f64..0.6) {
        let mut rng = common::rng(seed);
        let g = common::random_digraph(&mut rng, n, density);
        let starts: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.3)).collect();
        let goals: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.3)).collect();
        prop_assume!(!starts.is_empty() && !goals.is_empty());
        let expected = common::brute_force_shortest(&g, &starts, &goals);
        match shortest_path(&g, &starts, &goals) {
            Ok(path) => {
                prop_assert_eq!(Some(path.cost), expected);
                prop_assert!(starts.contains(&path.nodes[0]));
                prop_assert!(goals.contains(path.nodes.last().unwrap()));
                let sum: f64 = path.nodes.windows(2).map(|w| g.weight(w[0], w[1]).unwrap()).sum();
                prop_assert_eq!(sum, path.cost);
            }
            Err(e) => {
                prop_assert!(matches!(e, Error::A3Violated));
                prop_assert_eq!(expected, None);
            }
        }
    }
}

#[test]
fn corridor_edges_follow_the_membership_rule() {
    for method in DesignMethod::ALL {
        let mut scn = common::corridor();
        scn.method = method;
        let opts = PipelineOptions {
            until: Stage::Edges,
            ..Default::default()
        };
        let g = run_pipeline(&scn, &opts).unwrap().graph.unwrap();
        assert!(g.n_edges() > 0);
        let mut count = 0;
        for i in &g.nodes {
            for j in &g.nodes {
                if i.id == j.id {
                    assert!(g.edges.weight(i.id, j.id).is_none());
                    continue;
                }
                let d = &i.x_bar - &j.x_bar;
                let inside = d.dot(&(&j.p * &d)) < j.rho * j.rho * (1.0 - 1e-9);
                match g.edges.weight(i.id, j.id) {
                    Some(w) => {
                        assert!(inside, "{method}: stored edge {} -> {}", i.id, j.id);
                        assert_eq!(w, d.dot(&(&j.cost_to_go * &d)));
                        count += 1;
                    }
                    None => assert!(!inside, "{method}: missing edge {} -> {}", i.id, j.id),
                }
            }
        }
        assert_eq!(count, g.n_edges());
    }
}

#[test]
fn spacecraft_free_space_is_connected() {
    let scn = Scenario::spacecraft();
    let g = build_free_space_graph(&scn.output_set).unwrap();
    assert_eq!(g.n_nodes(), 4);
    assert!(g.is_connected());
    assert!(existence_check(&g, &scn.output_set, &scn.y0, &scn.yf).unwrap());
}

#[test]
fn spacecraft_grid_avoids_the_debris() {
    let scn = Scenario::spacecraft();
    let debris = Scenario::spacecraft_debris();
    let samples = sample_grid(&scn.output_set, &[100.0, 100.0]).unwrap();
    assert!(!samples.is_empty());
    for s in &samples {
        assert!(debris.interior_margin(&s.y) <= 0.0, "{} in debris", s.y);
        let expected: Vec<usize> = scn
            .output_set
            .components()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.slack(&s.y).min() > 1e-9)
            .map(|(k, _)| k)
            .collect();
        assert_eq!(s.components, expected, "{}", s.y);
    }
    let with = with_endpoints(&scn.output_set, &[&scn.y0, &scn.yf], samples).unwrap();
    assert_eq!(with[0].y, scn.y0);
    assert_eq!(with[1].y, scn.yf);
}

#[test]
fn disjoint_boxes_have_no_path() {
    let a = Polytope::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
    let b = Polytope::from_box(&[2.0, 0.0], &[3.0, 1.0]).unwrap();
    let y = ctrlgraph::UnionOfPolytopes::new(vec![a, b]).unwrap();
    let g = build_free_space_graph(&y).unwrap();
    assert!(g.edges().is_empty());
    let y0 = Vector::from_vec(vec![0.5, 0.5]);
    let yf = Vector::from_vec(vec![2.5, 0.5]);
    assert!(!existence_check(&g, &y, &y0, &yf).unwrap());
    assert!(existence_check(&g, &y, &y0, &y0).unwrap());
}
