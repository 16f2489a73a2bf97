//! Best-bound branch-and-bound over binary columns.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::problem::{MilpProblem, ObjectiveSense};
use super::simplex::{solve_lp_bounded, LpStatus};
use super::{ProblemError, SolverError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchingRule {
    /// Fractional part closest to one half; ties go to the lowest column.
    /// Applied within the highest priority class that has a fractional column.
    MostFractional,
    /// Lowest-index fractional column of the highest priority class.
    FirstFractional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeSelection {
    /// Highest LP bound first (for maximization); ties in insertion order.
    BestBound,
    /// Most recently created node first.
    DepthFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub integrality_tol: f64,
    pub relative_gap: f64,
    pub node_limit: usize,
    pub time_limit_seconds: Option<f64>,
    pub branching: BranchingRule,
    pub node_selection: NodeSelection,
    /// Record `(nodes, best_bound, incumbent)` after every node.
    pub record_trace: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            integrality_tol: 1e-6,
            relative_gap: 1e-6,
            node_limit: 1_000_000,
            time_limit_seconds: None,
            branching: BranchingRule::MostFractional,
            node_selection: NodeSelection::BestBound,
            record_trace: false,
        }
    }
}

impl SolveOptions {
    fn check(&self) -> Result<(), SolverError> {
        if !(self.integrality_tol > 0.0 && self.integrality_tol < 0.5) {
            return Err(SolverError::Options(format!(
                "integrality_tol must be in (0, 0.5), got {}",
                self.integrality_tol
            )));
        }
        if !(self.relative_gap >= 0.0 && self.relative_gap.is_finite()) {
            return Err(SolverError::Options(format!(
                "relative_gap must be non-negative, got {}",
                self.relative_gap
            )));
        }
        if let Some(t) = self.time_limit_seconds {
            if !(t > 0.0) {
                return Err(SolverError::Options(format!("time limit must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    /// Stopped by the time limit with a gap still open.
    GapLimit,
    NodeLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTrace {
    pub nodes: usize,
    pub best_bound: f64,
    pub incumbent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpResult<T> {
    pub status: MilpStatus,
    pub incumbent: Option<Vec<T>>,
    /// Objective of the incumbent in the problem's sense.
    pub objective: Option<T>,
    /// Proven bound on the optimum in the problem's sense.
    pub best_bound: T,
    pub nodes_explored: usize,
    pub trace: Vec<BoundTrace>,
}

impl<T: Scalar> MilpResult<T> {
    /// `(best_bound − objective) / max(1, |objective|)`, oriented so that it is
    /// non-negative for both senses.
    pub fn relative_gap(&self, sense: ObjectiveSense) -> Option<f64> {
        let obj = self.objective?.as_f64();
        let bound = self.best_bound.as_f64();
        let diff = match sense {
            ObjectiveSense::Maximize => bound - obj,
            ObjectiveSense::Minimize => obj - bound,
        };
        Some(diff / obj.abs().max(1.0))
    }
}

struct Node<T> {
    /// LP bound of the parent, in maximization space
    bound: f64,
    seq: u64,
    /// `(column, lower, upper)` overrides, applied in order
    fixings: Vec<(usize, T, T)>,
}

struct Keyed<T> {
    key: f64,
    seq: u64,
    node: Node<T>,
}

impl<T> PartialEq for Keyed<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T> Eq for Keyed<T> {}
impl<T> PartialOrd for Keyed<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Keyed<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap: larger key first, then smaller sequence number first
        self.key
            .total_cmp(&other.key)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Whether every feasible objective value is an integer: continuous columns
/// carry no objective weight and all other coefficients are integral.
fn objective_is_integral<T: Scalar>(p: &MilpProblem<T>) -> bool {
    let c0 = p.objective.constant.as_f64();
    c0 == c0.trunc()
        && p.objective.terms.iter().all(|&(j, c)| {
            let c = c.as_f64();
            c == 0.0 || (p.variables[j].integer && c == c.trunc())
        })
}

fn gap_closed(bound: f64, incumbent: f64, rel: f64) -> bool {
    (bound - incumbent) / incumbent.abs().max(1.0) <= rel
}

/// Solves `p` to within `opts.relative_gap` by LP-based branch-and-bound.
pub fn solve_milp<T: Scalar>(
    p: &MilpProblem<T>,
    opts: &SolveOptions,
) -> Result<MilpResult<T>, SolverError> {
    p.validate()?;
    opts.check()?;
    if p.n_vars() == 0 {
        return Err(ProblemError::Empty.into());
    }

    let start = Instant::now();
    let sign = match p.objective.sense {
        ObjectiveSense::Maximize => 1.0,
        ObjectiveSense::Minimize => -1.0,
    };
    let integral_obj = objective_is_integral(p);
    let int_tol = opts.integrality_tol;
    let base_lower: Vec<T> = p.variables.iter().map(|v| v.lower).collect();
    let base_upper: Vec<T> = p.variables.iter().map(|v| v.upper).collect();

    let mut heap: BinaryHeap<Keyed<T>> = BinaryHeap::new();
    let mut seq = 0u64;
    let push = |heap: &mut BinaryHeap<Keyed<T>>, node: Node<T>| {
        let key = match opts.node_selection {
            NodeSelection::BestBound => node.bound,
            NodeSelection::DepthFirst => node.seq as f64,
        };
        heap.push(Keyed {
            key,
            seq: node.seq,
            node,
        });
    };
    push(
        &mut heap,
        Node {
            bound: f64::INFINITY,
            seq,
            fixings: Vec::new(),
        },
    );

    let mut incumbent: Option<(Vec<T>, f64)> = None;
    let mut nodes = 0usize;
    let mut best_bound = f64::INFINITY;
    // largest LP bound among nodes discarded because of the gap tolerance
    let mut pruned_bound = f64::NEG_INFINITY;
    let mut trace = Vec::new();
    let mut status = None;
    let mut lower = base_lower.clone();
    let mut upper = base_upper.clone();

    while let Some(Keyed { node, .. }) = heap.pop() {
        let open_bound = match opts.node_selection {
            NodeSelection::BestBound => node.bound,
            NodeSelection::DepthFirst => heap
                .iter()
                .map(|k| k.node.bound)
                .fold(node.bound, f64::max),
        };
        let inc_obj = incumbent.as_ref().map(|(_, o)| *o);
        let global = open_bound
            .max(pruned_bound)
            .max(inc_obj.unwrap_or(f64::NEG_INFINITY));
        best_bound = best_bound.min(global);

        if let Some(inc) = inc_obj {
            if opts.node_selection == NodeSelection::BestBound
                && gap_closed(open_bound, inc, opts.relative_gap)
            {
                pruned_bound = pruned_bound.max(open_bound);
                heap.clear();
                break;
            }
            if gap_closed(node.bound, inc, opts.relative_gap) {
                pruned_bound = pruned_bound.max(node.bound);
                continue;
            }
        }
        if nodes >= opts.node_limit {
            heap.push(Keyed { key: 0.0, seq: node.seq, node });
            status = Some(MilpStatus::NodeLimit);
            break;
        }
        if let Some(limit) = opts.time_limit_seconds {
            if start.elapsed().as_secs_f64() > limit {
                heap.push(Keyed { key: 0.0, seq: node.seq, node });
                status = Some(MilpStatus::GapLimit);
                break;
            }
        }

        lower.copy_from_slice(&base_lower);
        upper.copy_from_slice(&base_upper);
        for &(j, l, u) in &node.fixings {
            lower[j] = l;
            upper[j] = u;
        }
        let lp = solve_lp_bounded(p, &lower, &upper)?;
        nodes += 1;

        match lp.status {
            LpStatus::Infeasible => {}
            LpStatus::Unbounded => return Err(SolverError::Unbounded),
            LpStatus::Optimal => {
                let mut bound = sign * lp.objective.as_f64();
                if integral_obj {
                    bound = (bound + 1e-6).floor();
                }
                let bound = bound.min(node.bound);
                let dominated = incumbent
                    .as_ref()
                    .is_some_and(|(_, inc)| gap_closed(bound, *inc, opts.relative_gap));
                if dominated {
                    pruned_bound = pruned_bound.max(bound);
                } else {
                    match pick_branch(p, &lp.values, int_tol, opts.branching) {
                        None => {
                            let x = snap_integers(p, lp.values);
                            let obj = sign * p.objective_value(&x).as_f64();
                            if incumbent.as_ref().map_or(true, |(_, o)| obj > *o) {
                                incumbent = Some((x, obj));
                            }
                        }
                        Some((j, v)) => {
                            let v = v.as_f64();
                            for (l, u) in [
                                (lower[j], T::lit(v.floor())),
                                (T::lit(v.ceil()), upper[j]),
                            ] {
                                seq += 1;
                                let mut fixings = node.fixings.clone();
                                fixings.push((j, l, u));
                                push(
                                    &mut heap,
                                    Node {
                                        bound,
                                        seq,
                                        fixings,
                                    },
                                );
                            }
                        }
                    }
                }
            }
        }

        if opts.record_trace {
            let open = heap
                .iter()
                .map(|k| k.node.bound)
                .fold(pruned_bound, f64::max);
            let inc = incumbent.as_ref().map(|(_, o)| *o);
            let floor = inc.unwrap_or(f64::NEG_INFINITY);
            best_bound = best_bound.min(open.max(floor)).max(floor);
            trace.push(BoundTrace {
                nodes,
                best_bound: sign * best_bound,
                incumbent: inc.map(|o| sign * o),
            });
        }
    }

    let open = heap
        .iter()
        .map(|k| k.node.bound)
        .fold(pruned_bound, f64::max);
    let inc_obj = incumbent.as_ref().map(|(_, o)| *o);
    let floor = inc_obj.unwrap_or(f64::NEG_INFINITY);
    best_bound = best_bound.min(open.max(floor)).max(floor);

    let status = match (status, &incumbent) {
        (Some(s), _) => s,
        (None, Some(_)) => MilpStatus::Optimal,
        (None, None) => MilpStatus::Infeasible,
    };
    let (incumbent, objective) = match incumbent {
        Some((x, _)) => {
            let obj = p.objective_value(&x);
            (Some(x), Some(obj))
        }
        None => (None, None),
    };
    Ok(MilpResult {
        status,
        incumbent,
        objective,
        best_bound: T::lit(sign * best_bound),
        nodes_explored: nodes,
        trace,
    })
}

fn pick_branch<T: Scalar>(
    p: &MilpProblem<T>,
    x: &[T],
    tol: f64,
    rule: BranchingRule,
) -> Option<(usize, T)> {
    let mut best: Option<(usize, u8, f64)> = None;
    for (j, v) in p.variables.iter().enumerate() {
        if !v.integer {
            continue;
        }
        let val = x[j].as_f64();
        let frac = val - val.floor();
        let dist = frac.min(1.0 - frac);
        if dist <= tol {
            continue;
        }
        let better = match (best, rule) {
            (None, _) => true,
            (Some((_, bp, _)), BranchingRule::FirstFractional) => v.priority > bp,
            (Some((_, bp, bd)), BranchingRule::MostFractional) => {
                v.priority > bp || (v.priority == bp && dist > bd)
            }
        };
        if better {
            best = Some((j, v.priority, dist));
        }
    }
    best.map(|(j, _, _)| (j, x[j]))
}

pub(crate) fn snap_integers<T: Scalar>(p: &MilpProblem<T>, mut x: Vec<T>) -> Vec<T> {
    for (j, v) in p.variables.iter().enumerate() {
        if v.integer {
            x[j] = x[j].round();
        }
    }
    x
}
