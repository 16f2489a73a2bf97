//! Brute-force reference solver: every binary assignment, each completed by
//! an LP over the continuous columns. Used as ground truth in tests.

use super::branch::{MilpResult, MilpStatus};
use super::problem::{MilpProblem, ObjectiveSense};
use super::simplex::{solve_lp_bounded, LpStatus};
use super::{ProblemError, SolverError};
use crate::scalar::Scalar;

pub const MAX_ORACLE_BINARIES: usize = 22;

pub fn enumerate_oracle<T: Scalar>(p: &MilpProblem<T>) -> Result<MilpResult<T>, SolverError> {
    p.validate()?;
    if p.n_vars() == 0 {
        return Err(ProblemError::Empty.into());
    }
    let bins = p.binary_columns();
    if bins.len() > MAX_ORACLE_BINARIES {
        return Err(SolverError::TooManyBinaries {
            got: bins.len(),
            max: MAX_ORACLE_BINARIES,
        });
    }
    let sign = match p.objective.sense {
        ObjectiveSense::Maximize => T::one(),
        ObjectiveSense::Minimize => -T::one(),
    };

    // Rows whose columns are all binary are decided by the assignment alone.
    let is_bin: Vec<bool> = p.variables.iter().map(|v| v.integer).collect();
    let binary_rows: Vec<usize> = p
        .constraints
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.terms.is_empty() && c.terms.iter().all(|&(j, _)| is_bin[j]))
        .map(|(i, _)| i)
        .collect();
    let tol = T::feas_tol();

    let mut lower: Vec<T> = p.variables.iter().map(|v| v.lower).collect();
    let mut upper: Vec<T> = p.variables.iter().map(|v| v.upper).collect();
    let mut point = vec![T::zero(); p.n_vars()];
    let mut best: Option<(Vec<T>, T)> = None;
    let mut solved = 0usize;

    for mask in 0u64..(1u64 << bins.len()) {
        let mut in_bounds = true;
        for (b, &j) in bins.iter().enumerate() {
            let v = if mask >> b & 1 == 1 { T::one() } else { T::zero() };
            let v_ok = v >= p.variables[j].lower && v <= p.variables[j].upper;
            in_bounds &= v_ok;
            lower[j] = v;
            upper[j] = v;
            point[j] = v;
        }
        if !in_bounds {
            continue;
        }
        let decided_infeasible = binary_rows.iter().any(|&i| {
            let c = &p.constraints[i];
            c.violation(&point) > tol * c.scale().max(c.rhs.abs()).max(T::one())
        });
        if decided_infeasible {
            continue;
        }
        let lp = solve_lp_bounded(p, &lower, &upper)?;
        solved += 1;
        match lp.status {
            LpStatus::Infeasible => {}
            LpStatus::Unbounded => return Err(SolverError::Unbounded),
            LpStatus::Optimal => {
                let val = sign * lp.objective;
                if best.as_ref().map_or(true, |(_, b)| val > *b) {
                    best = Some((lp.values, val));
                }
            }
        }
    }

    Ok(match best {
        Some((x, _)) => {
            let obj = p.objective_value(&x);
            MilpResult {
                status: MilpStatus::Optimal,
                incumbent: Some(x),
                objective: Some(obj),
                best_bound: obj,
                nodes_explored: solved,
                trace: Vec::new(),
            }
        }
        None => MilpResult {
            status: MilpStatus::Infeasible,
            incumbent: None,
            objective: None,
            best_bound: -sign * T::infinity(),
            nodes_explored: solved,
            trace: Vec::new(),
        },
    })
}
