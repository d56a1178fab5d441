//! Plain-text artifacts: projected set geometry, trajectory tables and a
//! JSON run summary.
//!
//! Floats are written in Rust's shortest round-trip exponent form, so files
//! are byte-identical across runs with identical inputs.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::graph::ControllerGraph;
use crate::linalg::{self, Matrix};
use crate::pipeline::{Artifacts, StageTimings};
use crate::planner::PlanResult;
use crate::scenario::Scenario;

/// Projected invariant sets `C O_i`, one line per node:
///
/// ```text
/// node <id> <component> <center: n_y values> <shape: n_y² values, row-major>
/// ```
///
/// where the set is `{ y : (y - center)ᵀ shape⁻¹ (y - center) <= 1 }` and
/// `shape = ρ² C P⁻¹ Cᵀ`. Edges follow as `edge <from> <to>` lines. An empty
/// graph produces an empty file.
pub fn write_sets(graph: &ControllerGraph, c: &Matrix, w: &mut impl Write) -> io::Result<()> {
    if graph.nodes.is_empty() {
        log::warn!("controller graph is empty; set file left empty");
        return Ok(());
    }
    writeln!(w, "# node id component center[{0}] shape[{0}x{0}]", c.nrows())?;
    for n in &graph.nodes {
        let p_inv = linalg::sym_inverse(&n.p).map_err(io::Error::other)?;
        let shape = linalg::symmetrize(&(c * p_inv * c.transpose() * (n.rho * n.rho)));
        write!(w, "node {} {}", n.id, n.component)?;
        for v in (c * &n.x_bar).iter() {
            write!(w, " {v:e}")?;
        }
        for r in 0..shape.nrows() {
            for v in shape.row(r).iter() {
                write!(w, " {v:e}")?;
            }
        }
        writeln!(w)?;
    }
    for (i, j, _) in graph.edges.edges() {
        writeln!(w, "edge {i} {j}")?;
    }
    Ok(())
}

/// CSV with columns `t, x1.., u1.., y1.., node_id, feasible_u, feasible_y`.
/// `node_id` is empty for unswitched runs.
pub fn write_trajectory_csv(plan: &PlanResult, w: &mut impl Write) -> io::Result<()> {
    let traj = &plan.trajectory;
    let (nx, nu, ny) = match (traj.states.first(), traj.inputs.first(), traj.outputs.first()) {
        (Some(x), Some(u), Some(y)) => (x.len(), u.len(), y.len()),
        _ => (0, 0, 0),
    };
    let mut header = vec!["t".to_string()];
    header.extend((1..=nx).map(|i| format!("x{i}")));
    header.extend((1..=nu).map(|i| format!("u{i}")));
    header.extend((1..=ny).map(|i| format!("y{i}")));
    header.extend(["node_id", "feasible_u", "feasible_y"].map(String::from));
    writeln!(w, "{}", header.join(","))?;
    for t in 0..traj.states.len() {
        write!(w, "{t}")?;
        for v in traj.states[t].iter().chain(&traj.inputs[t]).chain(&traj.outputs[t]) {
            write!(w, ",{v:e}")?;
        }
        match plan.active[t] {
            Some(id) => write!(w, ",{id}")?,
            None => write!(w, ",")?,
        }
        writeln!(w, ",{},{}", plan.feasible_u[t], plan.feasible_y[t])?;
    }
    Ok(())
}

/// Chosen path, one line per node: `<id> <sample> <component> <ȳ...>`.
pub fn write_path(nodes: &[usize], graph: &ControllerGraph, cost: f64, w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "# path nodes={} weight={cost:e}", nodes.len())?;
    for &i in nodes {
        let n = &graph.nodes[i];
        write!(w, "{} {} {}", n.id, n.sample, n.component)?;
        for v in n.y_bar.iter() {
            write!(w, " {v:e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn plan_json(plan: &PlanResult) -> Value {
    json!({
        "termination": plan.termination,
        "steps": plan.steps(),
        "cost": plan.cost,
        "switches": plan.switch_times.len(),
        "switch_times": plan.switch_times,
        "input_violations": plan.input_violations(),
        "output_violations": plan.output_violations(),
        "final_output": plan.trajectory.outputs.last().map(|y| y.as_slice().to_vec()),
    })
}

/// Run summary without timings.
pub fn summary_json(scn: &Scenario, a: &Artifacts) -> Value {
    let mut v = json!({
        "scenario": scn.name,
        "method": scn.method,
        "grid_spacing": scn.grid_spacing,
        "seed": scn.seed,
        "skip_ahead": scn.skip_ahead,
        "nodes_per": "sample-component",
        "y0": scn.y0.as_slice(),
        "yf": scn.yf.as_slice(),
        "x0": scn.x0.as_slice(),
    });
    let obj = v.as_object_mut().expect("object");
    if let Some(fs) = &a.free_space {
        obj.insert(
            "free_space".into(),
            json!({
                "components": fs.n_nodes(),
                "edges": fs.edges(),
                "connected": fs.is_connected(),
            }),
        );
    }
    if let Some(e) = a.existence {
        obj.insert("existence".into(), json!(e));
    }
    if !a.samples.is_empty() {
        obj.insert("samples".into(), json!(a.samples.len()));
    }
    if let Some(g) = &a.graph {
        obj.insert(
            "graph".into(),
            json!({
                "nodes": g.n_nodes(),
                "edges": g.n_edges(),
                "rejected": a.rejected.len(),
            }),
        );
    }
    if !a.verification.is_empty() {
        let failed = a.verification.iter().filter(|r| !r.passed(1e-7)).count();
        let worst = a
            .verification
            .iter()
            .map(|r| r.worst_margin())
            .fold(f64::INFINITY, f64::min);
        let falsified: usize = a.verification.iter().map(|r| r.falsifications).sum();
        obj.insert(
            "verification".into(),
            json!({ "nodes": a.verification.len(), "failed": failed, "worst_margin": worst, "falsifications": falsified }),
        );
    }
    if let Some(p) = &a.path {
        obj.insert("path".into(), json!({ "nodes": p.nodes, "weight": p.cost }));
    }
    if let Some(p) = &a.plan {
        obj.insert("plan".into(), plan_json(p));
    }
    if let Some(b) = &a.baseline {
        obj.insert("baseline".into(), plan_json(b));
    }
    v
}

pub fn timings_json(t: &StageTimings) -> Value {
    let stages: serde_json::Map<String, Value> = t
        .entries()
        .iter()
        .map(|(s, d)| (s.to_string(), json!(d.as_secs_f64())))
        .collect();
    json!({
        "stages": stages,
        "graph_build": t.graph_build().as_secs_f64(),
        "total": t.total().as_secs_f64(),
    })
}

fn create(dir: &Path, name: &str, written: &mut Vec<PathBuf>) -> io::Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path)?;
    written.push(path);
    Ok(BufWriter::new(f))
}

/// Writes every artifact present in `a` into `dir`:
/// `summary.json`, `timings.json`, `graph.txt`, `graph.dot`, `sets.txt`,
/// `path.txt`, `trajectory.csv` and `baseline.csv`.
pub fn write_bundle(scn: &Scenario, a: &Artifacts, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    {
        let mut w = create(dir, "summary.json", &mut written)?;
        serde_json::to_writer_pretty(&mut w, &summary_json(scn, a))?;
        writeln!(w)?;
        w.flush()?;
    }
    {
        let mut w = create(dir, "timings.json", &mut written)?;
        serde_json::to_writer_pretty(&mut w, &timings_json(&a.timings))?;
        writeln!(w)?;
        w.flush()?;
    }
    if let Some(g) = &a.graph {
        let mut w = create(dir, "graph.txt", &mut written)?;
        g.write_adjacency(&mut w)?;
        w.flush()?;
        let mut w = create(dir, "graph.dot", &mut written)?;
        g.write_dot(&mut w)?;
        w.flush()?;
        let mut w = create(dir, "sets.txt", &mut written)?;
        write_sets(g, scn.system.c(), &mut w)?;
        w.flush()?;
        if let Some(p) = &a.path {
            let mut w = create(dir, "path.txt", &mut written)?;
            write_path(&p.nodes, g, p.cost, &mut w)?;
            w.flush()?;
        }
    }
    if let Some(p) = &a.plan {
        let mut w = create(dir, "trajectory.csv", &mut written)?;
        write_trajectory_csv(p, &mut w)?;
        w.flush()?;
    }
    if let Some(b) = &a.baseline {
        let mut w = create(dir, "baseline.csv", &mut written)?;
        write_trajectory_csv(b, &mut w)?;
        w.flush()?;
    }
    Ok(written)
}
