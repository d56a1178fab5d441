use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ctrlgraph::export;
use ctrlgraph::pipeline::{run_pipeline, Artifacts, PipelineOptions, Stage};
use ctrlgraph::{DesignMethod, Error, Scenario};

mod exit;

use exit::{exit_code, EXIT_IO};

/// Plan constraint-satisfying trajectories over a graph of local controllers.
#[derive(Parser)]
#[command(name = "ctrlgraph", version)]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that the free space connects y0 to yf.
    Check(Common),
    /// Synthesize the controller graph and write it out.
    Build(Common),
    /// Build the graph and search it for a controller path.
    Plan(Common),
    /// Build, search, execute and compare with an unswitched LQR run.
    Run(Common),
    /// Write projected sets and/or the executed trajectory only.
    Export {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = ExportWhat::All)]
        what: ExportWhat,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportWhat {
    Sets,
    Trajectory,
    All,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML). Defaults to the bundled spacecraft scenario.
    #[arg(long)]
    scenario: Option<PathBuf>,

    /// Override the scenario's design method.
    #[arg(long, value_parser = parse_method)]
    method: Option<DesignMethod>,

    /// Override the grid spacing: one value for every output coordinate or a
    /// comma-separated list.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,

    /// Override the scenario's random seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Directory for artifacts.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,

    /// Let the planner jump to the farthest path node containing the state.
    #[arg(long)]
    skip_ahead: bool,

    /// Re-verify every node after the graph is built.
    #[arg(long)]
    verify: bool,
}

fn parse_method(s: &str) -> Result<DesignMethod, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Common {
    fn scenario(&self) -> Result<Scenario, Error> {
        let mut scn = match &self.scenario {
            Some(p) => Scenario::load(p)?,
            None => Scenario::spacecraft(),
        };
        if let Some(m) = self.method {
            scn.method = m;
        }
        if let Some(g) = &self.grid {
            scn.grid_spacing = match g.as_slice() {
                [h] => vec![*h; scn.system.n_y()],
                list => list.to_vec(),
            };
        }
        if let Some(s) = self.seed {
            scn.seed = s;
        }
        if self.skip_ahead {
            scn.skip_ahead = true;
        }
        Ok(scn)
    }
}

fn print_summary(scn: &Scenario, a: &Artifacts) {
    if let Some(ok) = a.existence {
        println!("existence: {ok}");
    }
    if let Some(g) = &a.graph {
        println!(
            "graph: method={} samples={} nodes={} edges={} rejected={}",
            scn.method,
            a.samples.len(),
            g.n_nodes(),
            g.n_edges(),
            a.rejected.len()
        );
    }
    if !a.verification.is_empty() {
        let failed = a.verification.iter().filter(|r| !r.passed(1e-7)).count();
        println!("verification: {} nodes, {failed} failed", a.verification.len());
    }
    if let Some(p) = &a.path {
        println!("path: {} nodes, weight {:e}", p.nodes.len(), p.cost);
    }
    if let Some(p) = &a.plan {
        println!(
            "plan: {} after {} steps, J = {:e}, violations u={} y={}",
            p.termination,
            p.steps(),
            p.cost,
            p.input_violations(),
            p.output_violations()
        );
    }
    if let Some(b) = &a.baseline {
        println!(
            "baseline LQR: {} after {} steps, J = {:e}, violations u={} y={}",
            b.termination,
            b.steps(),
            b.cost,
            b.input_violations(),
            b.output_violations()
        );
    }
    let t = &a.timings;
    println!(
        "timings: graph build {:.3} s, total {:.3} s",
        t.graph_build().as_secs_f64(),
        t.total().as_secs_f64()
    );
}

fn write_selected(scn: &Scenario, a: &Artifacts, dir: &Path, what: ExportWhat) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    if matches!(what, ExportWhat::Sets | ExportWhat::All) {
        if let Some(g) = &a.graph {
            let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("sets.txt"))?);
            export::write_sets(g, scn.system.c(), &mut w)?;
            std::io::Write::flush(&mut w)?;
        }
    }
    if matches!(what, ExportWhat::Trajectory | ExportWhat::All) {
        if let Some(p) = &a.plan {
            let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("trajectory.csv"))?);
            export::write_trajectory_csv(p, &mut w)?;
            std::io::Write::flush(&mut w)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), ExitCode> {
    let (common, until, what) = match &cli.command {
        Command::Check(c) => (c, Stage::Check, None),
        Command::Build(c) => (c, Stage::Edges, None),
        Command::Plan(c) => (c, Stage::Search, None),
        Command::Run(c) => (c, Stage::Baseline, None),
        Command::Export { common, what } => {
            let until = match what {
                ExportWhat::Sets => Stage::Edges,
                _ => Stage::Execute,
            };
            (common, until, Some(*what))
        }
    };
    let scn = common.scenario().map_err(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })?;
    let opts = PipelineOptions {
        until: if common.verify && until < Stage::Verify { Stage::Verify } else { until },
        verify: common.verify,
        ..Default::default()
    };
    let (artifacts, failure) = match run_pipeline(&scn, &opts) {
        Ok(a) => (a, None),
        Err(f) => {
            let stage = f.stage;
            (*f.artifacts, Some((stage, f.error)))
        }
    };
    print_summary(&scn, &artifacts);
    let written = match what {
        Some(w) => write_selected(&scn, &artifacts, &common.out_dir, w),
        None => export::write_bundle(&scn, &artifacts, &common.out_dir).map(|_| ()),
    };
    if let Err(e) = written {
        eprintln!("error: writing artifacts to {}: {e}", common.out_dir.display());
        return Err(ExitCode::from(EXIT_IO));
    }
    match failure {
        None => Ok(()),
        Some((stage, e)) => {
            eprintln!("error: {stage} stage failed: {e}");
            Err(exit_code(&e))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
