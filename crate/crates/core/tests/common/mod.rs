#![allow(dead_code)]

use ctrlgraph::{LtiSystem, Matrix, Polytope, Scenario, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

pub fn unit(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    loop {
        let v = Vector::from_fn(n, |_, _| rng.sample(StandardNormal));
        let norm = v.norm();
        if norm > 1e-6 {
            return v / norm;
        }
    }
}

/// Random matrix rescaled to spectral radius `radius`.
pub fn with_spectral_radius(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Matrix {
    let m = gaussian(rng, n, n);
    let r = ctrlgraph::linalg::spectral_radius(&m);
    m * (radius / r)
}

pub fn random_pd(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let m = gaussian(rng, n, n);
    &m * m.transpose() + Matrix::identity(n, n) * 0.1
}

/// Controllable system with `n_y = n_u` (unique equilibria when `A - I`
/// is far from singular) and `C = [I 0]`.
pub fn random_system(rng: &mut ChaCha8Rng, nx: usize, nu: usize) -> LtiSystem {
    loop {
        let radius = rng.random_range(0.3..1.1);
        let a = with_spectral_radius(rng, nx, radius);
        let b = gaussian(rng, nx, nu);
        let c = Matrix::identity(nu, nx);
        if let Ok(sys) = LtiSystem::new(a, b, c) {
            return sys;
        }
    }
}

/// Axis-aligned box `[-lo_i, hi_i]` with positive half-widths, so the
/// origin is interior.
pub fn random_box(rng: &mut ChaCha8Rng, n: usize) -> Polytope {
    let lo: Vec<f64> = (0..n).map(|_| -rng.random_range(0.5..3.0)).collect();
    let hi: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
    Polytope::from_box(&lo, &hi).unwrap()
}

/// Bounded polytope: a box with extra random cuts that keep the origin
/// strictly inside.
pub fn random_polytope(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> Polytope {
    let b = random_box(rng, n);
    let mut h = b.h().clone();
    let mut k = b.k().clone();
    for _ in 0..extra {
        let row = unit(rng, n);
        let off = rng.random_range(0.2..2.0);
        let last = h.nrows();
        h = h.insert_row(last, 0.0);
        h.row_mut(last).copy_from(&row.transpose());
        k = k.insert_row(last, off);
    }
    Polytope::new(h, k).unwrap()
}

/// Double integrator with a one-dimensional output corridor made of two
/// overlapping intervals.
pub const CORRIDOR_TOML: &str = r#"
name = "corridor"
method = "fixed-gain-lqr"
seed = 7

[system]
model = "discrete"
a = [[1.0, 0.1], [0.0, 1.0]]
b = [[0.005], [0.1]]
c = [[1.0, 0.0]]

[input_set]
h = [[1.0], [-1.0]]
k = [1.0, 1.0]

[[output_set]]
h = [[1.0], [-1.0]]
k = [1.0, 10.0]

[[output_set]]
h = [[1.0], [-1.0]]
k = [10.0, 1.0]

[task]
y0 = [8.0]
yf = [-8.0]

[grid]
spacing = [0.5]

[cost]
q = [[1.0, 0.0], [0.0, 1.0]]
r = [[1.0]]

[termination]
output_tol = 0.05
max_steps = 3000
"#;

pub fn corridor() -> Scenario {
    Scenario::from_toml(CORRIDOR_TOML).unwrap()
}

/// Same system with the two intervals pulled apart.
pub fn split_corridor() -> Scenario {
    let text = CORRIDOR_TOML
        .replace("k = [1.0, 10.0]", "k = [-1.0, 10.0]")
        .replace("k = [10.0, 1.0]", "k = [10.0, -1.0]");
    Scenario::from_toml(&text).unwrap()
}

/// Fixed-gain scaling instance with a unique equilibrium: LQR gain and
/// Riccati matrix, a random output box around `ȳ` and an input box around
/// `ū`.
pub struct ScalingInstance {
    pub sys: LtiSystem,
    pub gain: Matrix,
    pub p: Matrix,
    pub y_bar: Vector,
    pub u_bar: Vector,
    pub y_k: Polytope,
    pub u_set: Polytope,
}

pub fn scaling_instance(rng: &mut ChaCha8Rng, nx: usize) -> ScalingInstance {
    use ctrlgraph::lti::{equilibrium_for_output, solve_dare_matrices, EquilibriumSolution};
    loop {
        let nu = rng.random_range(1..=nx.min(3));
        let sys = random_system(rng, nx, nu);
        let y_bar = gaussian(rng, nu, 1).column(0).into_owned();
        let Ok(EquilibriumSolution::Unique(eq)) = equilibrium_for_output(&sys, &y_bar) else {
            continue;
        };
        let Ok(lqr) = solve_dare_matrices(
            sys.a(),
            sys.b(),
            &random_pd(rng, nx),
            &random_pd(rng, nu),
        ) else {
            continue;
        };
        let around = |rng: &mut ChaCha8Rng, c: &Vector| {
            let lo: Vec<f64> = c.iter().map(|v| v - rng.random_range(0.2..3.0)).collect();
            let hi: Vec<f64> = c.iter().map(|v| v + rng.random_range(0.2..3.0)).collect();
            Polytope::from_box(&lo, &hi).unwrap()
        };
        let y_k = around(rng, &y_bar);
        let u_set = around(rng, &eq.u);
        return ScalingInstance {
            sys,
            gain: lqr.f,
            p: lqr.p,
            y_bar,
            u_bar: eq.u,
            y_k,
            u_set,
        };
    }
}

/// Random digraph with small integer weights, so path sums are exact.
pub fn random_digraph(rng: &mut ChaCha8Rng, n: usize, density: f64) -> ctrlgraph::graph::WeightedDigraph {
    let mut g = ctrlgraph::graph::WeightedDigraph::new(n);
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(density) {
                g.add_edge(i, j, rng.random_range(0..10) as f64);
            }
        }
    }
    g
}

/// Cheapest simple path from any start to any goal by exhaustive
/// enumeration.
pub fn brute_force_shortest(
    g: &ctrlgraph::graph::WeightedDigraph,
    starts: &[usize],
    goals: &[usize],
) -> Option<f64> {
    fn walk(
        g: &ctrlgraph::graph::WeightedDigraph,
        at: usize,
        cost: f64,
        seen: &mut Vec<bool>,
        goals: &[usize],
        best: &mut Option<f64>,
    ) {
        if goals.contains(&at) && best.is_none_or(|b| cost < b) {
            *best = Some(cost);
        }
        for &(next, w) in g.out_edges(at) {
            if !seen[next] {
                seen[next] = true;
                walk(g, next, cost + w, seen, goals, best);
                seen[next] = false;
            }
        }
    }
    let mut best = None;
    for &s in starts {
        let mut seen = vec![false; g.n_nodes()];
        seen[s] = true;
        walk(g, s, 0.0, &mut seen, goals, &mut best);
    }
    best
}
