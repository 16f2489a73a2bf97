//! Take-make-dispose baseline and the circular-versus-linear report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::{check_feasibility, evaluate_solution, FeasibilityViolation, FormulationError, ObjectiveTriple};
use crate::instance::{Distances, Instance};
use crate::pareto::ParetoPoint;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error("circular point is infeasible: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Infeasible(Vec<FeasibilityViolation>),
    #[error("linear job range {low}-{high} is inverted")]
    JobRange { low: u32, high: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearBaselineParams {
    pub jobs_low: u32,
    pub jobs_high: u32,
}

impl Default for LinearBaselineParams {
    fn default() -> Self {
        Self {
            jobs_low: 20,
            jobs_high: 30,
        }
    }
}

/// Every used mask is disposed of at the cheapest disposal site; no revenue.
pub fn linear_profit(inst: &Instance) -> f64 {
    let cd = inst.disposal_sites.iter().map(|d| d.unit_cost).fold(f64::INFINITY, f64::min);
    let u = inst.total_usage();
    if u == 0.0 {
        0.0
    } else {
        -(u * cd)
    }
}

/// Footprint of disposing every used mask at the lowest-emission site.
pub fn linear_emissions(inst: &Instance) -> f64 {
    let ed = inst.disposal_sites.iter().map(|d| d.unit_emission).fold(f64::INFINITY, f64::min);
    let u = inst.total_usage();
    if u == 0.0 {
        0.0
    } else {
        -(u * ed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearResult {
    pub z1: f64,
    pub z2: f64,
    pub z3_low: u32,
    pub z3_high: u32,
}

/// Circular minus linear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    pub z1: f64,
    pub z2: f64,
    pub z3_low: f64,
    pub z3_high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flows {
    pub collected: f64,
    pub reprocessed: f64,
    pub disposed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub circular: ObjectiveTriple,
    pub linear: LinearResult,
    pub deltas: Deltas,
    pub flows: Flows,
}

/// Re-evaluates `point` and sets it against the linear baseline. Points that
/// fail the feasibility audit at `1e-6` are rejected.
pub fn compare(
    inst: &Instance,
    dist: &Distances,
    point: &ParetoPoint,
    lin: LinearBaselineParams,
) -> Result<ComparisonReport, BaselineError> {
    if lin.jobs_low > lin.jobs_high {
        return Err(BaselineError::JobRange {
            low: lin.jobs_low,
            high: lin.jobs_high,
        });
    }
    let sol = &point.solution;
    let violations = check_feasibility(inst, dist, sol, 1e-6)?;
    if !violations.is_empty() {
        return Err(BaselineError::Infeasible(violations));
    }
    let circular = evaluate_solution(inst, dist, sol)?;
    let linear = LinearResult {
        z1: linear_profit(inst),
        z2: linear_emissions(inst),
        z3_low: lin.jobs_low,
        z3_high: lin.jobs_high,
    };
    let collected = sol.total_collected();
    let reprocessed = sol.total_reprocessed();
    Ok(ComparisonReport {
        circular,
        linear,
        deltas: Deltas {
            z1: circular.z1 - linear.z1,
            z2: circular.z2 - linear.z2,
            z3_low: circular.z3 - linear.z3_low as f64,
            z3_high: circular.z3 - linear.z3_high as f64,
        },
        flows: Flows {
            collected,
            reprocessed,
            disposed: collected - reprocessed,
        },
    })
}

pub const TABLE_HEADER: [&str; 4] = ["Model Type", "Z1 (CAD)", "Z2 (kg CO2)", "Z3 (No. of jobs)"];

/// Plain-text table with one row per economy model.
pub fn render_table(r: &ComparisonReport) -> String {
    let rows = [
        [
            "Circular Economy".to_string(),
            format!("{:.2}", r.circular.z1),
            format!("{:.2}", r.circular.z2),
            format!("{}", r.circular.z3.round()),
        ],
        [
            "Linear Economy".to_string(),
            format!("{:.2}", r.linear.z1),
            format!("{:.2}", r.linear.z2),
            format!("{}-{}", r.linear.z3_low, r.linear.z3_high),
        ],
    ];
    let mut width = TABLE_HEADER.map(|h| h.chars().count());
    for row in &rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[String]| {
        let padded: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", padded.join(" | ").trim_end());
    };
    line(&mut out, &TABLE_HEADER.map(String::from));
    let rule: Vec<String> = width.iter().map(|w| "-".repeat(*w)).collect();
    let _ = writeln!(out, "{}", rule.join("-+-"));
    for row in &rows {
        line(&mut out, row);
    }
    out
}
