//! ε-constraint sweeps: Z₁ is maximized while Z₂ and Z₃ are held above grid
//! bounds spanning the payoff table.

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::{
    build_circular_model, solution_from_values, Criterion, EpsilonBounds, FormulationError,
    ObjectiveTriple, Solution,
};
use crate::instance::{Distances, Instance};
use crate::solver::{solve_milp, MilpStatus, SolveOptions, SolverError};

#[derive(Debug, Error)]
pub enum ParetoError {
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error("solving {criterion}: {source}")]
    Solver {
        criterion: Criterion,
        #[source]
        source: SolverError,
    },
    #[error("maximizing {0} alone is infeasible")]
    Infeasible(Criterion),
    #[error("maximizing {criterion} alone stopped at a limit ({status:?})")]
    Limit {
        criterion: Criterion,
        status: MilpStatus,
    },
    #[error("grid counts must be at least 1 (got {n2} x {n3})")]
    Grid { n2: usize, n3: usize },
    #[error("cannot export an empty front")]
    EmptyFront,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Row `i` holds the objectives reached when criterion `i` is maximized alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffTable {
    pub rows: [ObjectiveTriple; 3],
}

impl PayoffTable {
    pub fn row(&self, c: Criterion) -> &ObjectiveTriple {
        &self.rows[c.index()]
    }

    /// `(min, max)` of one objective over the three rows.
    pub fn range(&self, c: Criterion) -> (f64, f64) {
        self.rows.iter().map(|r| r.get(c)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub eps2: f64,
    pub eps3: f64,
    pub triple: ObjectiveTriple,
    pub open_collection: Vec<String>,
    pub open_reprocessing: Vec<String>,
    pub solution: Solution,
}

/// Why a grid cell produced no point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellOutcome {
    Infeasible,
    Limit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub eps2: f64,
    pub eps3: f64,
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub payoff: PayoffTable,
    /// sorted by `(eps2, eps3)`
    pub points: Vec<ParetoPoint>,
    pub skipped: Vec<SkippedCell>,
}

enum Solved {
    Point(Solution),
    Skipped(CellOutcome),
}

fn solve_one(
    inst: &Instance,
    dist: &Distances,
    criterion: Criterion,
    eps: EpsilonBounds,
    opts: &SolveOptions,
) -> Result<Solved, ParetoError> {
    let (model, layout) = build_circular_model(inst, dist, criterion, eps)?;
    let res = solve_milp(&model, opts).map_err(|source| ParetoError::Solver { criterion, source })?;
    match (res.status, res.incumbent) {
        (MilpStatus::Optimal, Some(x)) => Ok(Solved::Point(solution_from_values(inst, dist, &layout, &x)?)),
        (MilpStatus::Infeasible, _) | (MilpStatus::Optimal, None) => Ok(Solved::Skipped(CellOutcome::Infeasible)),
        _ => Ok(Solved::Skipped(CellOutcome::Limit)),
    }
}

/// Maximizes each objective alone and evaluates all three on each optimum.
pub fn payoff_table(inst: &Instance, dist: &Distances, opts: &SolveOptions) -> Result<PayoffTable, ParetoError> {
    let mut rows = [ObjectiveTriple::default(); 3];
    for c in Criterion::ALL {
        let res = {
            let (model, layout) = build_circular_model(inst, dist, c, EpsilonBounds::default())?;
            let r = solve_milp(&model, opts).map_err(|source| ParetoError::Solver { criterion: c, source })?;
            (r, layout)
        };
        let (r, layout) = res;
        match (r.status, r.incumbent) {
            (MilpStatus::Optimal, Some(x)) => {
                rows[c.index()] = solution_from_values(inst, dist, &layout, &x)?.triple;
            }
            (MilpStatus::Infeasible, _) | (MilpStatus::Optimal, None) => return Err(ParetoError::Infeasible(c)),
            (status, _) => return Err(ParetoError::Limit { criterion: c, status }),
        }
    }
    Ok(PayoffTable { rows })
}

/// `n` evenly spaced values from `lo` to `hi` inclusive; `n = 1` gives `lo`.
pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|t| {
                if t == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * t as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Runs the payoff table and then one Z₁ solve per `(eps2, eps3)` cell.
pub fn epsilon_sweep(
    inst: &Instance,
    dist: &Distances,
    n2: usize,
    n3: usize,
    opts: &SolveOptions,
) -> Result<Sweep, ParetoError> {
    if n2 == 0 || n3 == 0 {
        return Err(ParetoError::Grid { n2, n3 });
    }
    let payoff = payoff_table(inst, dist, opts)?;
    let (lo2, hi2) = payoff.range(Criterion::Environment);
    let (lo3, hi3) = payoff.range(Criterion::Jobs);

    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for &eps2 in &grid(lo2, hi2, n2) {
        for &eps3 in &grid(lo3, hi3, n3) {
            let eps = EpsilonBounds {
                eps2: Some(eps2),
                eps3: Some(eps3),
            };
            match solve_one(inst, dist, Criterion::Profit, eps, opts)? {
                Solved::Point(solution) => points.push(ParetoPoint {
                    eps2,
                    eps3,
                    triple: solution.triple,
                    open_collection: solution.open_collection_ids(inst),
                    open_reprocessing: solution.open_reprocessing_ids(inst),
                    solution,
                }),
                Solved::Skipped(outcome) => skipped.push(SkippedCell { eps2, eps3, outcome }),
            }
        }
    }
    let key = |a: f64, b: f64| (a, b);
    points.sort_by(|p, q| key(p.eps2, p.eps3).partial_cmp(&key(q.eps2, q.eps3)).unwrap());
    skipped.sort_by(|p, q| key(p.eps2, p.eps3).partial_cmp(&key(q.eps2, q.eps3)).unwrap());
    Ok(Sweep {
        payoff,
        points,
        skipped,
    })
}

/// `a` is at least as good as `b` everywhere and strictly better somewhere.
pub fn dominates(a: &ObjectiveTriple, b: &ObjectiveTriple) -> bool {
    let (a, b) = (a.as_array(), b.as_array());
    a.iter().zip(&b).all(|(x, y)| x >= y) && a.iter().zip(&b).any(|(x, y)| x > y)
}

/// Indices of triples not strictly dominated by any other, in input order.
pub fn nondominated_indices(triples: &[ObjectiveTriple]) -> Vec<usize> {
    (0..triples.len())
        .filter(|&i| !triples.iter().any(|t| dominates(t, &triples[i])))
        .collect()
}

pub fn filter_nondominated(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let triples: Vec<ObjectiveTriple> = points.iter().map(|p| p.triple).collect();
    nondominated_indices(&triples)
        .into_iter()
        .map(|i| points[i].clone())
        .collect()
}

pub const FRONT_CSV_HEADER: [&str; 7] = ["eps2", "eps3", "z1", "z2", "z3", "open_collection", "open_reprocessing"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontFormat {
    Csv,
    /// JSON array of points including full solutions
    Json,
}

fn sorted_ids(ids: &[String]) -> String {
    let mut v = ids.to_vec();
    v.sort();
    v.join(";")
}

pub fn export_front<W: io::Write>(points: &[ParetoPoint], out: W, format: FrontFormat) -> Result<(), ParetoError> {
    if points.is_empty() {
        return Err(ParetoError::EmptyFront);
    }
    match format {
        FrontFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(FRONT_CSV_HEADER)?;
            for p in points {
                w.write_record([
                    format!("{:.6}", p.eps2),
                    format!("{:.6}", p.eps3),
                    format!("{:.6}", p.triple.z1),
                    format!("{:.6}", p.triple.z2),
                    format!("{:.6}", p.triple.z3),
                    sorted_ids(&p.open_collection),
                    sorted_ids(&p.open_reprocessing),
                ])?;
            }
            w.flush()?;
        }
        FrontFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, points)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn load_front<R: io::Read>(input: R) -> Result<Vec<ParetoPoint>, ParetoError> {
    Ok(serde_json::from_reader(input)?)
}
