use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use clsc_core::baseline::{compare, render_table, BaselineError, Flows, LinearBaselineParams};
use clsc_core::formulation::{
    build_circular_model, solution_from_values, Criterion, EpsilonBounds, FormulationError,
    ObjectiveTriple, Solution,
};
use clsc_core::instance::{
    generate_synthetic, load_instance, save_instance, GenerateError, Instance, InstanceError,
    RangeConfig,
};
use clsc_core::pareto::{
    epsilon_sweep, export_front, filter_nondominated, FrontFormat, ParetoError, ParetoPoint,
    PayoffTable, SkippedCell,
};
use clsc_core::solver::{solve_milp, MilpStatus, SolveOptions, SolverError};

#[derive(Debug, Parser)]
#[command(name = "clsc", version, about = "Closed-loop mask supply-chain network design")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded synthetic instance
    Generate {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        hospitals: usize,
        #[arg(long)]
        sites: usize,
        #[arg(long, default_value_t = 1)]
        disposal: usize,
        /// JSON file overriding the default sampling ranges
        #[arg(long)]
        ranges: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write hospital_site.csv and site_site.csv into a directory
    Distances {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Maximize one objective, optionally under lower bounds on Z2 and Z3
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        objective: Criterion,
        #[arg(long, allow_hyphen_values = true)]
        eps2: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        eps3: Option<f64>,
        #[command(flatten)]
        limits: Limits,
        #[arg(long)]
        out: PathBuf,
    },
    /// Payoff table, epsilon-constraint sweep and non-dominated front
    Pareto {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 4)]
        n2: usize,
        #[arg(long, default_value_t = 4)]
        n3: usize,
        #[command(flatten)]
        limits: Limits,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a circular point with the linear-economy baseline
    Compare {
        #[arg(long)]
        instance: PathBuf,
        /// A single point, or a front file together with --index
        #[arg(long)]
        point: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long, default_value_t = 20)]
        jobs_low: u32,
        #[arg(long, default_value_t = 30)]
        jobs_high: u32,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct Limits {
    /// Wall-clock limit per MILP solve, in seconds
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    node_limit: Option<usize>,
    #[arg(long, default_value_t = 1e-6)]
    gap: f64,
}

impl Limits {
    fn options(&self) -> SolveOptions {
        let mut o = SolveOptions {
            relative_gap: self.gap,
            time_limit_seconds: self.time_limit,
            ..SolveOptions::default()
        };
        if let Some(n) = self.node_limit {
            o.node_limit = n;
        }
        o
    }
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Instance { path: PathBuf, source: InstanceError },
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("{0}")]
    Args(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Limit(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Pareto(ParetoError),
    #[error(transparent)]
    Baseline(BaselineError),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Args(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Limit(_) => 4,
            _ => 1,
        }
    }
}

impl From<ParetoError> for CliError {
    fn from(e: ParetoError) -> Self {
        match e {
            ParetoError::Infeasible(_) => CliError::Infeasible(e.to_string()),
            ParetoError::Limit { .. } => CliError::Limit(e.to_string()),
            ParetoError::Grid { .. } => CliError::Args(e.to_string()),
            other => CliError::Pareto(other),
        }
    }
}

impl From<GenerateError> for CliError {
    fn from(e: GenerateError) -> Self {
        CliError::Args(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_instance(path: &Path) -> Result<Instance, CliError> {
    let f = File::open(path).map_err(io_err(path))?;
    load_instance(BufReader::new(f)).map_err(|source| CliError::Instance {
        path: path.to_path_buf(),
        source,
    })
}

fn distances(inst: &Instance, path: &Path) -> Result<clsc_core::instance::Distances, CliError> {
    inst.distances().map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes through a buffer and flushes, so write errors surface here.
fn write_file(path: &Path, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), CliError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    })
}

fn csv_io(e: csv::Error) -> io::Error {
    io::Error::new(io::ErrorKind::Other, e)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn flows(sol: &Solution) -> Flows {
    let collected = sol.total_collected();
    let reprocessed = sol.total_reprocessed();
    Flows {
        collected,
        reprocessed,
        disposed: sol.total_disposed(),
    }
}

#[derive(Debug, Serialize)]
struct SolveReport {
    objective: Criterion,
    eps2: Option<f64>,
    eps3: Option<f64>,
    status: MilpStatus,
    nodes_explored: usize,
    objective_value: Option<f64>,
    best_bound: f64,
    triple: Option<ObjectiveTriple>,
    open_collection: Vec<String>,
    open_reprocessing: Vec<String>,
    flows: Option<Flows>,
    solution: Option<Solution>,
}

#[derive(Debug, Serialize)]
struct SweepSummary<'a> {
    payoff: &'a PayoffTable,
    feasible_cells: usize,
    front_size: usize,
    skipped: &'a [SkippedCell],
}

fn cmd_generate(
    seed: u64,
    hospitals: usize,
    sites: usize,
    disposal: usize,
    ranges: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let ranges = match ranges {
        Some(p) => {
            let f = File::open(p).map_err(io_err(p))?;
            serde_json::from_reader(BufReader::new(f)).map_err(|e| CliError::Input {
                path: p.to_path_buf(),
                message: e.to_string(),
            })?
        }
        None => RangeConfig::default(),
    };
    let inst = generate_synthetic(seed, hospitals, sites, disposal, &ranges)?;
    write_file(out, |w| save_instance(&inst, w))
}

fn cmd_distances(instance: &Path, out: &Path) -> Result<(), CliError> {
    let inst = read_instance(instance)?;
    let d = distances(&inst, instance)?;
    ensure_dir(out)?;
    write_file(&out.join("hospital_site.csv"), |w| d.hospital_site.write_csv(w).map_err(csv_io))?;
    write_file(&out.join("site_site.csv"), |w| d.site_site.write_csv(w).map_err(csv_io))
}

fn cmd_solve(
    instance: &Path,
    objective: Criterion,
    eps: EpsilonBounds,
    opts: &SolveOptions,
    out: &Path,
) -> Result<(), CliError> {
    let inst = read_instance(instance)?;
    let dist = distances(&inst, instance)?;
    let (model, layout) = build_circular_model(&inst, &dist, objective, eps).map_err(|e| match e {
        FormulationError::Epsilon(m) => CliError::Args(m),
        other => other.into(),
    })?;
    let res = solve_milp(&model, opts)?;
    let solution = match &res.incumbent {
        Some(x) => Some(solution_from_values(&inst, &dist, &layout, x)?),
        None => None,
    };
    let report = SolveReport {
        objective,
        eps2: eps.eps2,
        eps3: eps.eps3,
        status: res.status,
        nodes_explored: res.nodes_explored,
        objective_value: res.objective,
        best_bound: res.best_bound,
        triple: solution.as_ref().map(|s| s.triple),
        open_collection: solution.as_ref().map(|s| s.open_collection_ids(&inst)).unwrap_or_default(),
        open_reprocessing: solution.as_ref().map(|s| s.open_reprocessing_ids(&inst)).unwrap_or_default(),
        flows: solution.as_ref().map(flows),
        solution,
    };
    write_json(out, &report)?;
    match res.status {
        MilpStatus::Optimal if res.incumbent.is_some() => Ok(()),
        MilpStatus::Optimal | MilpStatus::Infeasible => {
            Err(CliError::Infeasible(format!("maximizing {objective} is infeasible")))
        }
        status => Err(CliError::Limit(format!("maximizing {objective} stopped at {status:?}"))),
    }
}

fn cmd_pareto(instance: &Path, n2: usize, n3: usize, opts: &SolveOptions, out: &Path) -> Result<(), CliError> {
    let inst = read_instance(instance)?;
    let dist = distances(&inst, instance)?;
    let sweep = epsilon_sweep(&inst, &dist, n2, n3, opts)?;
    if sweep.points.is_empty() {
        return Err(CliError::Infeasible("every grid cell is infeasible or hit a limit".into()));
    }
    let front = filter_nondominated(&sweep.points);
    ensure_dir(out)?;
    let export = |name: &str, pts: &[ParetoPoint], fmt: FrontFormat| {
        write_file(&out.join(name), |w| {
            export_front(pts, w, fmt).map_err(|e| match e {
                ParetoError::Io(e) => e,
                other => io::Error::new(io::ErrorKind::Other, other),
            })
        })
    };
    export("front.csv", &front, FrontFormat::Csv)?;
    export("front.json", &front, FrontFormat::Json)?;
    export("sweep.csv", &sweep.points, FrontFormat::Csv)?;
    write_json(
        &out.join("summary.json"),
        &SweepSummary {
            payoff: &sweep.payoff,
            feasible_cells: sweep.points.len(),
            front_size: front.len(),
            skipped: &sweep.skipped,
        },
    )?;
    println!(
        "{} of {} cells feasible, {} non-dominated",
        sweep.points.len(),
        n2 * n3,
        front.len()
    );
    Ok(())
}

fn read_point(path: &Path, index: usize) -> Result<ParetoPoint, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |message: String| CliError::Input {
        path: path.to_path_buf(),
        message,
    };
    match serde_json::from_str::<ParetoPoint>(&text) {
        Ok(p) => Ok(p),
        Err(_) => {
            let mut front: Vec<ParetoPoint> = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
            if index >= front.len() {
                return Err(CliError::Args(format!(
                    "--index {index} is out of range for a front of {} points",
                    front.len()
                )));
            }
            Ok(front.swap_remove(index))
        }
    }
}

fn cmd_compare(instance: &Path, point: &Path, index: usize, lin: LinearBaselineParams, out: &Path) -> Result<(), CliError> {
    let inst = read_instance(instance)?;
    let dist = distances(&inst, instance)?;
    let p = read_point(point, index)?;
    let report = compare(&inst, &dist, &p, lin).map_err(|e| match e {
        BaselineError::JobRange { .. } => CliError::Args(e.to_string()),
        BaselineError::Formulation(FormulationError::DimensionMismatch { .. }) => CliError::Input {
            path: point.to_path_buf(),
            message: e.to_string(),
        },
        other => CliError::Baseline(other),
    })?;
    ensure_dir(out)?;
    let table = render_table(&report);
    write_file(&out.join("report.txt"), |w| w.write_all(table.as_bytes()))?;
    write_json(&out.join("report.json"), &report)?;
    print!("{table}");
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate {
            seed,
            hospitals,
            sites,
            disposal,
            ranges,
            out,
        } => cmd_generate(seed, hospitals, sites, disposal, ranges.as_deref(), &out),
        Command::Distances { instance, out } => cmd_distances(&instance, &out),
        Command::Solve {
            instance,
            objective,
            eps2,
            eps3,
            limits,
            out,
        } => cmd_solve(&instance, objective, EpsilonBounds { eps2, eps3 }, &limits.options(), &out),
        Command::Pareto {
            instance,
            n2,
            n3,
            limits,
            out,
        } => cmd_pareto(&instance, n2, n3, &limits.options(), &out),
        Command::Compare {
            instance,
            point,
            index,
            jobs_low,
            jobs_high,
            out,
        } => cmd_compare(&instance, &point, index, LinearBaselineParams { jobs_low, jobs_high }, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
