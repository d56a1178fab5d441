//! Controller graph: one local controller per (sample, component) pair, an
//! edge `i → j` whenever controller `j`'s invariant set contains the
//! equilibrium of controller `i`, and shortest-path search over it.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{intersection_interior_nonempty, Ellipsoid, Polytope, UnionOfPolytopes, EPS_INTERIOR};
use crate::linalg::{self, Matrix, Vector};
use crate::lti::{self, CostModel, Equilibrium, EquilibriumSolution, LtiSystem};
use crate::scaling::{max_scale_lp, FixedGainScaler};
use crate::scenario::DesignMethod;
use crate::synthesis::{self, SynthesisOptions, VerificationReport, VerifyOptions};

/// Relative margin for `x̄_i ∈ int O_j`.
pub const EPS_EDGE: f64 = 1e-9;

/// `u = F (x - x̄) + ū`, valid on `{(x - x̄)ᵀ P (x - x̄) <= ρ²}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalController {
    pub id: usize,
    /// Index into the sample list the controller was built from.
    pub sample: usize,
    /// Output component `Y_k` the set was fitted into.
    pub component: usize,
    pub gain: Matrix,
    pub p: Matrix,
    pub rho: f64,
    pub x_bar: Vector,
    pub u_bar: Vector,
    pub y_bar: Vector,
    /// Cost-to-go matrix used for incoming edge weights.
    pub cost_to_go: Matrix,
}

impl LocalController {
    /// Lyapunov value `(x - x̄)ᵀ P (x - x̄)`.
    pub fn value(&self, x: &Vector) -> f64 {
        quad_form(&self.p, x, &self.x_bar)
    }

    /// Closed membership in the invariant set.
    pub fn contains(&self, x: &Vector) -> bool {
        self.value(x) <= self.rho * self.rho
    }

    pub fn contains_interior(&self, x: &Vector, eps: f64) -> bool {
        self.value(x) < self.rho * self.rho * (1.0 - eps)
    }

    pub fn control(&self, x: &Vector) -> Vector {
        &self.gain * (x - &self.x_bar) + &self.u_bar
    }

    pub fn ellipsoid(&self) -> Result<Ellipsoid> {
        Ellipsoid::new(self.x_bar.clone(), self.p.clone(), self.rho * self.rho)
    }

    pub fn equilibrium(&self) -> Equilibrium {
        Equilibrium {
            x: self.x_bar.clone(),
            u: self.u_bar.clone(),
            y: self.y_bar.clone(),
            unique: true,
        }
    }
}

/// `(x - c)ᵀ M (x - c)` without temporaries.
fn quad_form(m: &Matrix, x: &Vector, c: &Vector) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for a in 0..n {
        let da = x[a] - c[a];
        let mut row = 0.0;
        for b in 0..n {
            row += m[(a, b)] * (x[b] - c[b]);
        }
        acc += da * row;
    }
    acc
}

/// Graph whose nodes are the components of `Y`, adjacent when their
/// intersection has non-empty interior.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FreeSpaceGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl FreeSpaceGraph {
    pub fn n_nodes(&self) -> usize {
        self.n
    }

    /// Unordered pairs `(i, j)` with `i < j`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter_map(move |&(a, b)| {
            if a == i {
                Some(b)
            } else if b == i {
                Some(a)
            } else {
                None
            }
        })
    }

    /// Components reachable from any of `from`.
    pub fn reachable(&self, from: &[usize]) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        let mut queue: VecDeque<usize> = from.iter().copied().collect();
        for &s in from {
            seen[s] = true;
        }
        while let Some(i) = queue.pop_front() {
            for j in self.neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen
    }

    pub fn is_connected(&self) -> bool {
        self.n == 0 || self.reachable(&[0]).iter().all(|&s| s)
    }
}

pub fn build_free_space_graph(y: &UnionOfPolytopes) -> Result<FreeSpaceGraph> {
    let comps = y.components();
    let mut edges = Vec::new();
    for i in 0..comps.len() {
        for j in i + 1..comps.len() {
            if intersection_interior_nonempty(&comps[i], &comps[j])? {
                edges.push((i, j));
            }
        }
    }
    Ok(FreeSpaceGraph {
        n: comps.len(),
        edges,
    })
}

/// Whether some component containing `y0` is connected to some component
/// containing `yf`.
pub fn existence_check(
    g: &FreeSpaceGraph,
    y: &UnionOfPolytopes,
    y0: &Vector,
    yf: &Vector,
) -> Result<bool> {
    let start = y.containing_components(y0, EPS_INTERIOR);
    let goal = y.containing_components(yf, EPS_INTERIOR);
    if start.is_empty() || goal.is_empty() {
        return Err(Error::OutsideFreeSpace);
    }
    let seen = g.reachable(&start);
    Ok(goal.iter().any(|&k| seen[k]))
}

/// A grid point in the free space, tagged with every component that strictly
/// contains it.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub y: Vector,
    pub components: Vec<usize>,
}

/// Axis-aligned grid over the bounding box of `Y`, keeping points strictly
/// inside at least one component.
pub fn sample_grid(y: &UnionOfPolytopes, spacing: &[f64]) -> Result<Vec<Sample>> {
    let n = y.dim();
    if spacing.len() != n {
        return Err(Error::Dimension(format!(
            "grid spacing has {} entries, expected {n}",
            spacing.len()
        )));
    }
    if spacing.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidArgument("grid spacing must be positive".into()));
    }
    let (lo, hi) = y.bounding_box()?;
    let counts: Vec<usize> = (0..n)
        .map(|d| ((hi[d] - lo[d]) / spacing[d] + 1e-9).floor() as usize + 1)
        .collect();
    let mut samples = Vec::new();
    let mut idx = vec![0usize; n];
    'outer: loop {
        let point = Vector::from_fn(n, |d, _| lo[d] + idx[d] as f64 * spacing[d]);
        let components = y.containing_components(&point, EPS_INTERIOR);
        if !components.is_empty() {
            samples.push(Sample {
                y: point,
                components,
            });
        }
        // Odometer increment, last coordinate fastest.
        for d in (0..n).rev() {
            idx[d] += 1;
            if idx[d] < counts[d] {
                continue 'outer;
            }
            idx[d] = 0;
        }
        break;
    }
    if samples.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(samples)
}

/// Puts samples at the given points in front of `samples`, dropping grid
/// points that coincide with them.
pub fn with_endpoints(
    y: &UnionOfPolytopes,
    points: &[&Vector],
    samples: Vec<Sample>,
) -> Result<Vec<Sample>> {
    let mut out: Vec<Sample> = Vec::with_capacity(samples.len() + points.len());
    for p in points {
        if out.iter().any(|s| (&s.y - *p).amax() <= 1e-12 * (1.0 + p.amax())) {
            continue;
        }
        let components = y.containing_components(p, EPS_INTERIOR);
        if components.is_empty() {
            return Err(Error::OutsideFreeSpace);
        }
        out.push(Sample {
            y: (*p).clone(),
            components,
        });
    }
    let n_fixed = out.len();
    for s in samples {
        if !out[..n_fixed]
            .iter()
            .any(|e| (&e.y - &s.y).amax() <= 1e-12 * (1.0 + s.y.amax()))
        {
            out.push(s);
        }
    }
    Ok(out)
}

/// A synthesis attempt that did not yield a node.
#[derive(Debug)]
pub struct Rejection {
    pub sample: usize,
    pub component: usize,
    pub error: Error,
}

/// Directed weighted graph in adjacency-list form.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightedDigraph {
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl WeightedDigraph {
    pub fn new(n: usize) -> Self {
        Self {
            adjacency: vec![Vec::new(); n],
        }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, weight: f64) {
        self.adjacency[from].push((to, weight));
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn n_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn out_edges(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, out)| out.iter().map(move |&(j, w)| (i, j, w)))
    }

    pub fn weight(&self, from: usize, to: usize) -> Option<f64> {
        self.adjacency[from]
            .iter()
            .find(|(j, _)| *j == to)
            .map(|(_, w)| *w)
    }
}

/// A minimum-weight node sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub nodes: Vec<usize>,
    pub cost: f64,
}

#[derive(PartialEq)]
struct HeapEntry {
    cost: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on (cost, node).
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Label-setting search from any start node to the nearest goal node.
///
/// Ties in cost are broken towards the smaller node id, both when labels are
/// settled and when predecessors are recorded.
pub fn shortest_path(g: &WeightedDigraph, starts: &[usize], goals: &[usize]) -> Result<Path> {
    if starts.is_empty() {
        return Err(Error::A2Violated);
    }
    if goals.is_empty() {
        return Err(Error::A1Violated);
    }
    let n = g.n_nodes();
    let mut is_goal = vec![false; n];
    for &j in goals {
        is_goal[j] = true;
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    for &s in starts {
        dist[s] = 0.0;
        heap.push(HeapEntry { cost: 0.0, node: s });
    }
    while let Some(HeapEntry { cost, node }) = heap.pop() {
        if done[node] {
            continue;
        }
        done[node] = true;
        if is_goal[node] {
            let mut nodes = vec![node];
            let mut cur = node;
            while let Some(p) = pred[cur] {
                nodes.push(p);
                cur = p;
            }
            nodes.reverse();
            return Ok(Path { nodes, cost });
        }
        for &(next, w) in g.out_edges(node) {
            if done[next] {
                continue;
            }
            let c = cost + w;
            let better = c < dist[next]
                || (c == dist[next] && pred[next].is_some_and(|p| node < p));
            if better {
                dist[next] = c;
                pred[next] = Some(node);
                heap.push(HeapEntry { cost: c, node: next });
            }
        }
    }
    Err(Error::A3Violated)
}

/// Local controllers plus the switching graph between them.
#[derive(Clone, Debug)]
pub struct ControllerGraph {
    pub method: DesignMethod,
    pub nodes: Vec<LocalController>,
    pub edges: WeightedDigraph,
}

impl ControllerGraph {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.n_edges()
    }

    /// Nodes whose invariant set contains `x`.
    pub fn nodes_containing(&self, x: &Vector) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|n| n.contains(x))
            .map(|n| n.id)
            .collect()
    }

    /// Nodes whose equilibrium output is `y`.
    pub fn nodes_at_output(&self, y: &Vector) -> Vec<usize> {
        let tol = 1e-9 * (1.0 + y.norm());
        self.nodes
            .iter()
            .filter(|n| (&n.y_bar - y).norm() <= tol)
            .map(|n| n.id)
            .collect()
    }

    /// Shortest path from the nodes containing `x0` to the nodes that hold
    /// the output `yf` at equilibrium.
    pub fn plan(&self, x0: &Vector, yf: &Vector) -> Result<Path> {
        shortest_path(&self.edges, &self.nodes_containing(x0), &self.nodes_at_output(yf))
    }

    /// Re-checks every node against its constraint sets.
    pub fn verify_nodes(
        &self,
        sys: &LtiSystem,
        y: &UnionOfPolytopes,
        u_set: &Polytope,
        opts: &VerifyOptions,
    ) -> Result<Vec<VerificationReport>> {
        self.nodes
            .par_iter()
            .map(|n| {
                let o = VerifyOptions {
                    seed: opts.seed.wrapping_add(n.id as u64),
                    ..*opts
                };
                synthesis::verify_synthesis(
                    sys,
                    &n.gain,
                    &n.p,
                    n.rho,
                    &n.equilibrium(),
                    &y.components()[n.component],
                    u_set,
                    &o,
                )
            })
            .collect()
    }

    /// Plain-text adjacency listing: a header line, one `node` line per
    /// controller (`id sample component rho ȳ...`), then one `edge` line per
    /// edge (`from to weight`).
    pub fn write_adjacency(&self, w: &mut impl Write) -> io::Result<()> {
        writeln!(
            w,
            "# controller graph method={} nodes={} edges={}",
            self.method,
            self.n_nodes(),
            self.n_edges()
        )?;
        for n in &self.nodes {
            write!(w, "node {} {} {} {:e}", n.id, n.sample, n.component, n.rho)?;
            for v in n.y_bar.iter() {
                write!(w, " {v:e}")?;
            }
            writeln!(w)?;
        }
        for (i, j, wt) in self.edges.edges() {
            writeln!(w, "edge {i} {j} {wt:e}")?;
        }
        Ok(())
    }

    /// Graphviz DOT with node positions at the equilibrium outputs.
    pub fn write_dot(&self, w: &mut impl Write) -> io::Result<()> {
        writeln!(w, "digraph controllers {{")?;
        for n in &self.nodes {
            let pos = n.y_bar.iter().take(2).map(|v| v.to_string()).collect::<Vec<_>>();
            writeln!(
                w,
                "  {} [label=\"{}\", component={}, pos=\"{}!\"];",
                n.id,
                n.id,
                n.component,
                pos.join(",")
            )?;
        }
        for (i, j, wt) in self.edges.edges() {
            writeln!(w, "  {i} -> {j} [weight={wt:e}];")?;
        }
        writeln!(w, "}}")
    }
}

/// Inputs shared by every node of one graph.
pub struct PlanningProblem<'a> {
    pub system: &'a LtiSystem,
    pub cost: &'a CostModel,
    pub input_set: &'a Polytope,
    pub output_set: &'a UnionOfPolytopes,
}

/// Result of [`build_graph`]: the graph and the attempts that were skipped.
#[derive(Debug)]
pub struct GraphBuild {
    pub graph: ControllerGraph,
    pub rejected: Vec<Rejection>,
}

fn node_equilibrium(
    prob: &PlanningProblem<'_>,
    y: &Vector,
    component: usize,
    scaler: Option<(&Matrix, &Matrix)>,
) -> Result<Equilibrium> {
    let eq = match lti::equilibrium_for_output(prob.system, y)? {
        EquilibriumSolution::Unique(e) => e,
        EquilibriumSolution::Family(_) => match scaler {
            // The LP picks the equilibrium in the family that admits the
            // largest level.
            Some((gain, p)) => {
                let y_k = &prob.output_set.components()[component];
                let (_, x, u) = max_scale_lp(prob.system, gain, p, y, y_k, prob.input_set)?;
                Equilibrium {
                    x,
                    u,
                    y: y.clone(),
                    unique: false,
                }
            }
            None => {
                return Err(Error::InvalidArgument(
                    "semidefinite design needs a unique equilibrium".into(),
                ))
            }
        },
    };
    if !prob.input_set.strictly_contains(&eq.u, EPS_INTERIOR) {
        return Err(Error::NoInteriorEquilibrium);
    }
    Ok(eq)
}

fn design_node(
    prob: &PlanningProblem<'_>,
    method: DesignMethod,
    lqr: &lti::LqrDesign,
    scaler: &FixedGainScaler,
    y: &Vector,
    component: usize,
) -> Result<(Equilibrium, Matrix, Matrix, f64, Matrix)> {
    match method {
        DesignMethod::FixedGainLqr => {
            let eq = node_equilibrium(prob, y, component, Some((&lqr.f, &lqr.p)))?;
            let rho = scaler.scale(&eq.u, y, component)?;
            if !(rho > 0.0) {
                return Err(Error::InfeasibleSample("zero scale".into()));
            }
            Ok((eq, lqr.f.clone(), lqr.p.clone(), rho, lqr.p.clone()))
        }
        DesignMethod::Sdp => {
            let eq = node_equilibrium(prob, y, component, None)?;
            let opts = SynthesisOptions {
                warm_gain: Some(lqr.f.clone()),
                ..Default::default()
            };
            let y_k = &prob.output_set.components()[component];
            let res = synthesis::synthesize_controller_with(prob.system, &eq, y_k, prob.input_set, &opts)?;
            let acl = prob.system.closed_loop(&res.gain);
            let w = prob.cost.q() + res.gain.transpose() * prob.cost.r() * &res.gain;
            let s = lti::solve_discrete_lyapunov(&acl, &w)?;
            Ok((eq, res.gain, res.p, 1.0, s))
        }
        DesignMethod::SdpFixedGain => {
            let eq = node_equilibrium(prob, y, component, None)?;
            let y_k = &prob.output_set.components()[component];
            let res = synthesis::synthesize_pi_set_fixed_gain(prob.system, &lqr.f, &eq, y_k, prob.input_set)?;
            Ok((eq, lqr.f.clone(), res.p, 1.0, lqr.p.clone()))
        }
    }
}

/// Designs one controller per (sample, component) pair and connects them.
pub fn build_graph(
    prob: &PlanningProblem<'_>,
    samples: &[Sample],
    method: DesignMethod,
) -> Result<GraphBuild> {
    let (nodes, rejected) = synthesize_nodes(prob, samples, method)?;
    let edges = connect(&nodes);
    Ok(GraphBuild {
        graph: ControllerGraph {
            method,
            nodes,
            edges,
        },
        rejected,
    })
}

/// Node synthesis stage of [`build_graph`].
pub fn synthesize_nodes(
    prob: &PlanningProblem<'_>,
    samples: &[Sample],
    method: DesignMethod,
) -> Result<(Vec<LocalController>, Vec<Rejection>)> {
    let lqr = lti::solve_dare(prob.system, prob.cost)?;
    let scaler = FixedGainScaler::new(prob.system, &lqr.f, &lqr.p, prob.output_set, prob.input_set)?;
    let tasks: Vec<(usize, usize)> = samples
        .iter()
        .enumerate()
        .flat_map(|(i, s)| s.components.iter().map(move |&k| (i, k)))
        .collect();
    let results: Vec<_> = tasks
        .par_iter()
        .map(|&(i, k)| design_node(prob, method, &lqr, &scaler, &samples[i].y, k))
        .collect();
    let mut nodes = Vec::new();
    let mut rejected = Vec::new();
    for (&(i, k), r) in tasks.iter().zip(results) {
        match r {
            Ok((eq, gain, p, rho, s)) => nodes.push(LocalController {
                id: nodes.len(),
                sample: i,
                component: k,
                gain,
                p,
                rho,
                x_bar: eq.x,
                u_bar: eq.u,
                y_bar: eq.y,
                cost_to_go: s,
            }),
            Err(error) => {
                log::debug!("sample {i} component {k} skipped: {error}");
                rejected.push(Rejection {
                    sample: i,
                    component: k,
                    error,
                });
            }
        }
    }
    if nodes.is_empty() {
        return Err(Error::EmptyGraph);
    }
    if !rejected.is_empty() {
        log::info!("{} of {} syntheses skipped", rejected.len(), tasks.len());
    }
    Ok((nodes, rejected))
}

/// Edge stage of [`build_graph`]: `i → j` iff
/// `(x̄_i - x̄_j)ᵀ P_j (x̄_i - x̄_j) < ρ_j² (1 - ε)`, weighted by
/// `(x̄_i - x̄_j)ᵀ S_j (x̄_i - x̄_j)`.
pub fn connect(nodes: &[LocalController]) -> WeightedDigraph {
    // Nodes sorted by the first state coordinate; a node can only reach
    // equilibria within the bounding radius of its set.
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&a, &b| nodes[a].x_bar[0].total_cmp(&nodes[b].x_bar[0]).then(a.cmp(&b)));
    let keys: Vec<f64> = order.iter().map(|&i| nodes[i].x_bar[0]).collect();
    let incoming: Vec<Vec<(usize, f64)>> = nodes
        .par_iter()
        .map(|nj| {
            let radius = nj.rho * (1.0 / linalg::min_eigenvalue(&nj.p)).sqrt() * (1.0 + 1e-9);
            let x0 = nj.x_bar[0];
            let lo = keys.partition_point(|&k| k < x0 - radius);
            let hi = keys.partition_point(|&k| k <= x0 + radius);
            let level = nj.rho * nj.rho * (1.0 - EPS_EDGE);
            let mut found: Vec<(usize, f64)> = order[lo..hi]
                .iter()
                .filter(|&&i| i != nj.id)
                .filter(|&&i| quad_form(&nj.p, &nodes[i].x_bar, &nj.x_bar) < level)
                .map(|&i| (i, quad_form(&nj.cost_to_go, &nodes[i].x_bar, &nj.x_bar)))
                .collect();
            found.sort_by_key(|&(i, _)| i);
            found
        })
        .collect();
    let mut g = WeightedDigraph::new(nodes.len());
    for (j, inc) in incoming.into_iter().enumerate() {
        for (i, w) in inc {
            g.add_edge(i, j, w);
        }
    }
    for out in &mut g.adjacency {
        out.sort_by_key(|&(j, _)| j);
    }
    g
}
