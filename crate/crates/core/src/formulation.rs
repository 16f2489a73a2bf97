//! The tri-objective location/allocation MILP.
//!
//! Facility binaries: `open_collection[j]`, `open_reprocessing[k]`; arc
//! binaries: hospital→collection and collection→reprocessing assignments.
//! Products of an assignment binary with a mask quantity are linearized with
//! per-arc flow columns tied to the binary by a big-M row; unit operating
//! costs then apply to the aggregate quantity at each facility.
//!
//! Transport cost and emission are charged once per opened arc (`CT·D·y`),
//! not per mask shipped.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{validate, Distances, Instance, Violation};
use crate::solver::{MilpProblem, ObjectiveSense, RowSense};

/// Which objective a single-objective solve maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    /// Z₁: revenue from reprocessed masks minus fixed and variable costs (CAD).
    Profit,
    /// Z₂: CO₂ avoided by reprocessing minus CO₂ emitted (kg).
    Environment,
    /// Z₃: jobs created at opened facilities.
    Jobs,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::Profit, Criterion::Environment, Criterion::Jobs];

    pub fn index(self) -> usize {
        match self {
            Criterion::Profit => 0,
            Criterion::Environment => 1,
            Criterion::Jobs => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Criterion::Profit => "z1",
            Criterion::Environment => "z2",
            Criterion::Jobs => "z3",
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "z1" | "profit" => Ok(Criterion::Profit),
            "z2" | "environment" | "env" => Ok(Criterion::Environment),
            "z3" | "jobs" => Ok(Criterion::Jobs),
            other => Err(format!("unknown objective {other:?} (expected z1, z2 or z3)")),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTriple {
    pub z1: f64,
    pub z2: f64,
    pub z3: f64,
}

impl ObjectiveTriple {
    pub fn get(&self, c: Criterion) -> f64 {
        match c {
            Criterion::Profit => self.z1,
            Criterion::Environment => self.z2,
            Criterion::Jobs => self.z3,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.z1, self.z2, self.z3]
    }
}

/// Lower bounds on Z₂ and Z₃ added as extra rows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EpsilonBounds {
    pub eps2: Option<f64>,
    pub eps3: Option<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormulationError {
    #[error("invalid instance: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("{what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: String,
        got: String,
    },
    #[error("bad epsilon bound: {0}")]
    Epsilon(String),
}

fn mismatch(what: impl Into<String>, expected: impl fmt::Display, got: impl fmt::Display) -> FormulationError {
    FormulationError::DimensionMismatch {
        what: what.into(),
        expected: expected.to_string(),
        got: got.to_string(),
    }
}

/// Column positions of every model entity. Blocks are laid out in the order
/// open_collection, open_reprocessing, hospital_assignment,
/// collection_assignment, hospital_flow, collection_flow, collected,
/// reprocessed, disposed; two-index blocks are row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableLayout {
    pub n_hospitals: usize,
    pub n_sites: usize,
    pub n_disposal: usize,
}

impl VariableLayout {
    pub fn new(n_hospitals: usize, n_sites: usize, n_disposal: usize) -> Self {
        Self {
            n_hospitals,
            n_sites,
            n_disposal,
        }
    }

    pub fn for_instance(inst: &Instance) -> Self {
        Self::new(inst.hospitals.len(), inst.sites.len(), inst.disposal_sites.len())
    }

    fn hs(&self) -> usize {
        self.n_hospitals * self.n_sites
    }

    fn ss(&self) -> usize {
        self.n_sites * self.n_sites
    }

    pub fn open_collection(&self, j: usize) -> usize {
        j
    }

    pub fn open_reprocessing(&self, k: usize) -> usize {
        self.n_sites + k
    }

    pub fn hospital_assignment(&self, i: usize, j: usize) -> usize {
        2 * self.n_sites + i * self.n_sites + j
    }

    pub fn collection_assignment(&self, j: usize, k: usize) -> usize {
        2 * self.n_sites + self.hs() + j * self.n_sites + k
    }

    pub fn hospital_flow(&self, i: usize, j: usize) -> usize {
        2 * self.n_sites + self.hs() + self.ss() + i * self.n_sites + j
    }

    pub fn collection_flow(&self, j: usize, k: usize) -> usize {
        2 * self.n_sites + 2 * self.hs() + self.ss() + j * self.n_sites + k
    }

    pub fn collected(&self, j: usize) -> usize {
        2 * self.n_sites + 2 * self.hs() + 2 * self.ss() + j
    }

    pub fn reprocessed(&self, k: usize) -> usize {
        3 * self.n_sites + 2 * self.hs() + 2 * self.ss() + k
    }

    pub fn disposed(&self, m: usize) -> usize {
        4 * self.n_sites + 2 * self.hs() + 2 * self.ss() + m
    }

    pub fn n_vars(&self) -> usize {
        4 * self.n_sites + 2 * self.hs() + 2 * self.ss() + self.n_disposal
    }

    pub fn n_binaries(&self) -> usize {
        2 * self.n_sites + self.hs() + self.ss()
    }

    /// Splits a column vector into named blocks. The objective triple is
    /// left at zero.
    pub fn decode(&self, values: &[f64]) -> Result<Solution, FormulationError> {
        if values.len() != self.n_vars() {
            return Err(mismatch("solution vector length", self.n_vars(), values.len()));
        }
        let (h, s, m) = (self.n_hospitals, self.n_sites, self.n_disposal);
        let grid = |rows: usize, at: &dyn Fn(usize, usize) -> usize| -> Vec<Vec<f64>> {
            (0..rows).map(|a| (0..s).map(|b| values[at(a, b)]).collect()).collect()
        };
        Ok(Solution {
            open_collection: (0..s).map(|j| values[self.open_collection(j)]).collect(),
            open_reprocessing: (0..s).map(|k| values[self.open_reprocessing(k)]).collect(),
            hospital_assignment: grid(h, &|i, j| self.hospital_assignment(i, j)),
            collection_assignment: grid(s, &|j, k| self.collection_assignment(j, k)),
            hospital_flow: grid(h, &|i, j| self.hospital_flow(i, j)),
            collection_flow: grid(s, &|j, k| self.collection_flow(j, k)),
            collected: (0..s).map(|j| values[self.collected(j)]).collect(),
            reprocessed: (0..s).map(|k| values[self.reprocessed(k)]).collect(),
            disposed: (0..m).map(|d| values[self.disposed(d)]).collect(),
            triple: ObjectiveTriple::default(),
        })
    }

    pub fn encode(&self, sol: &Solution) -> Result<Vec<f64>, FormulationError> {
        sol.check_dims(self)?;
        let mut v = vec![0.0; self.n_vars()];
        for j in 0..self.n_sites {
            v[self.open_collection(j)] = sol.open_collection[j];
            v[self.open_reprocessing(j)] = sol.open_reprocessing[j];
            v[self.collected(j)] = sol.collected[j];
            v[self.reprocessed(j)] = sol.reprocessed[j];
            for k in 0..self.n_sites {
                v[self.collection_assignment(j, k)] = sol.collection_assignment[j][k];
                v[self.collection_flow(j, k)] = sol.collection_flow[j][k];
            }
        }
        for i in 0..self.n_hospitals {
            for j in 0..self.n_sites {
                v[self.hospital_assignment(i, j)] = sol.hospital_assignment[i][j];
                v[self.hospital_flow(i, j)] = sol.hospital_flow[i][j];
            }
        }
        for m in 0..self.n_disposal {
            v[self.disposed(m)] = sol.disposed[m];
        }
        Ok(v)
    }
}

/// Values of every decision, grouped by role, plus the evaluated objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub open_collection: Vec<f64>,
    pub open_reprocessing: Vec<f64>,
    /// `[hospital][site]`
    pub hospital_assignment: Vec<Vec<f64>>,
    /// `[collection site][reprocessing site]`
    pub collection_assignment: Vec<Vec<f64>>,
    pub hospital_flow: Vec<Vec<f64>>,
    pub collection_flow: Vec<Vec<f64>>,
    pub collected: Vec<f64>,
    pub reprocessed: Vec<f64>,
    pub disposed: Vec<f64>,
    pub triple: ObjectiveTriple,
}

impl Solution {
    /// All-zero solution shaped to `layout`.
    pub fn zeros(layout: &VariableLayout) -> Self {
        layout
            .decode(&vec![0.0; layout.n_vars()])
            .expect("layout-sized vector")
    }

    fn check_dims(&self, layout: &VariableLayout) -> Result<(), FormulationError> {
        let (h, s, m) = (layout.n_hospitals, layout.n_sites, layout.n_disposal);
        let vecs: [(&str, usize, usize); 5] = [
            ("open_collection", self.open_collection.len(), s),
            ("open_reprocessing", self.open_reprocessing.len(), s),
            ("collected", self.collected.len(), s),
            ("reprocessed", self.reprocessed.len(), s),
            ("disposed", self.disposed.len(), m),
        ];
        for (name, got, want) in vecs {
            if got != want {
                return Err(mismatch(name, want, got));
            }
        }
        let grids: [(&str, &Vec<Vec<f64>>, usize); 4] = [
            ("hospital_assignment", &self.hospital_assignment, h),
            ("collection_assignment", &self.collection_assignment, s),
            ("hospital_flow", &self.hospital_flow, h),
            ("collection_flow", &self.collection_flow, s),
        ];
        for (name, g, rows) in grids {
            if g.len() != rows || g.iter().any(|r| r.len() != s) {
                return Err(mismatch(name, format!("{rows}x{s}"), format!("{}x?", g.len())));
            }
        }
        Ok(())
    }

    pub fn total_collected(&self) -> f64 {
        self.collected.iter().sum()
    }

    pub fn total_reprocessed(&self) -> f64 {
        self.reprocessed.iter().sum()
    }

    pub fn total_disposed(&self) -> f64 {
        self.disposed.iter().sum()
    }

    pub fn open_collection_ids(&self, inst: &Instance) -> Vec<String> {
        open_ids(&self.open_collection, inst)
    }

    pub fn open_reprocessing_ids(&self, inst: &Instance) -> Vec<String> {
        open_ids(&self.open_reprocessing, inst)
    }
}

fn open_ids(flags: &[f64], inst: &Instance) -> Vec<String> {
    let mut ids: Vec<String> = flags
        .iter()
        .zip(&inst.sites)
        .filter(|(v, _)| **v > 0.5)
        .map(|(_, s)| s.id.clone())
        .collect();
    ids.sort();
    ids
}

fn check_distances(inst: &Instance, dist: &Distances) -> Result<(), FormulationError> {
    let (h, s) = (inst.hospitals.len(), inst.sites.len());
    let hs = &dist.hospital_site.km;
    if hs.len() != h || hs.iter().any(|r| r.len() != s) {
        return Err(mismatch("hospital→site distances", format!("{h}x{s}"), format!("{}x?", hs.len())));
    }
    let ss = &dist.site_site.km;
    if ss.len() != s || ss.iter().any(|r| r.len() != s) {
        return Err(mismatch("site→site distances", format!("{s}x{s}"), format!("{}x?", ss.len())));
    }
    Ok(())
}

/// Big-M for collection→reprocessing flows: everything that can reach reprocessing.
pub fn reprocessing_flow_bound(inst: &Instance) -> f64 {
    inst.params.beta * inst.params.alpha * inst.total_usage()
}

/// Sparse coefficient row of one objective over `layout`. Zero entries are
/// omitted; a column appears at most once.
pub fn criterion_terms(
    inst: &Instance,
    dist: &Distances,
    layout: &VariableLayout,
    criterion: Criterion,
) -> Vec<(usize, f64)> {
    let p = &inst.params;
    let (h, s) = (layout.n_hospitals, layout.n_sites);
    let mut t = Vec::new();
    let mut push = |col: usize, c: f64| {
        if c != 0.0 {
            t.push((col, c));
        }
    };
    match criterion {
        Criterion::Profit => {
            for (j, site) in inst.sites.iter().enumerate() {
                push(layout.open_collection(j), -site.fixed_cost_collection);
            }
            for (k, site) in inst.sites.iter().enumerate() {
                push(layout.open_reprocessing(k), -site.fixed_cost_reprocessing);
            }
            for i in 0..h {
                for j in 0..s {
                    push(
                        layout.hospital_assignment(i, j),
                        -p.transport_cost_per_km * dist.hospital_site.km[i][j],
                    );
                }
            }
            for j in 0..s {
                for k in 0..s {
                    push(
                        layout.collection_assignment(j, k),
                        -p.transport_cost_per_km * dist.site_site.km[j][k],
                    );
                }
            }
            for (j, site) in inst.sites.iter().enumerate() {
                push(layout.collected(j), -site.unit_cost_collection);
            }
            for (k, site) in inst.sites.iter().enumerate() {
                push(layout.reprocessed(k), p.price - site.unit_cost_reprocessing);
            }
            for (m, d) in inst.disposal_sites.iter().enumerate() {
                push(layout.disposed(m), -d.unit_cost);
            }
        }
        Criterion::Environment => {
            for (j, site) in inst.sites.iter().enumerate() {
                push(layout.open_collection(j), -site.fixed_emission_collection);
            }
            for (k, site) in inst.sites.iter().enumerate() {
                push(layout.open_reprocessing(k), -site.fixed_emission_reprocessing);
            }
            for i in 0..h {
                for j in 0..s {
                    push(
                        layout.hospital_assignment(i, j),
                        -p.truck_emission_per_km * dist.hospital_site.km[i][j],
                    );
                }
            }
            for j in 0..s {
                for k in 0..s {
                    push(
                        layout.collection_assignment(j, k),
                        -p.truck_emission_per_km * dist.site_site.km[j][k],
                    );
                }
            }
            for (j, site) in inst.sites.iter().enumerate() {
                push(layout.collected(j), -site.unit_emission_collection);
            }
            for (k, site) in inst.sites.iter().enumerate() {
                push(
                    layout.reprocessed(k),
                    p.production_emission - site.unit_emission_reprocessing,
                );
            }
            for (m, d) in inst.disposal_sites.iter().enumerate() {
                push(layout.disposed(m), -d.unit_emission);
            }
        }
        Criterion::Jobs => {
            for (j, site) in inst.sites.iter().enumerate() {
                push(layout.open_collection(j), site.jobs_collection as f64);
            }
            for (k, site) in inst.sites.iter().enumerate() {
                push(layout.open_reprocessing(k), site.jobs_reprocessing as f64);
            }
        }
    }
    t
}

/// Builds the linearized model maximizing `criterion`, optionally with
/// `Z₂ ≥ eps2` and `Z₃ ≥ eps3` rows.
pub fn build_circular_model(
    inst: &Instance,
    dist: &Distances,
    criterion: Criterion,
    eps: EpsilonBounds,
) -> Result<(MilpProblem<f64>, VariableLayout), FormulationError> {
    let violations = validate(inst);
    if !violations.is_empty() {
        return Err(FormulationError::Invalid(violations));
    }
    check_distances(inst, dist)?;
    if let Some(e) = eps.eps2 {
        if !e.is_finite() {
            return Err(FormulationError::Epsilon(format!("eps2 must be finite kg CO2, got {e}")));
        }
    }
    if let Some(e) = eps.eps3 {
        if !e.is_finite() || e < 0.0 {
            return Err(FormulationError::Epsilon(format!(
                "eps3 must be a finite, non-negative job count, got {e}"
            )));
        }
    }

    let layout = VariableLayout::for_instance(inst);
    let (h, s, nd) = (layout.n_hospitals, layout.n_sites, layout.n_disposal);
    let p = &inst.params;
    let mut m = MilpProblem::new(ObjectiveSense::Maximize);

    // facility decisions are branched on before arc assignments
    for j in 0..s {
        let c = m.add_binary(format!("open_col_{}", inst.sites[j].id));
        m.variables[c].priority = 1;
    }
    for k in 0..s {
        let c = m.add_binary(format!("open_rep_{}", inst.sites[k].id));
        m.variables[c].priority = 1;
    }
    for i in 0..h {
        for j in 0..s {
            m.add_binary(format!("assign_{}_{}", inst.hospitals[i].id, inst.sites[j].id));
        }
    }
    for j in 0..s {
        for k in 0..s {
            m.add_binary(format!("route_{}_{}", inst.sites[j].id, inst.sites[k].id));
        }
    }
    // implied upper bounds keep every continuous column on a known range
    let collectable = p.alpha * inst.total_usage();
    let big_m = reprocessing_flow_bound(inst);
    for i in 0..h {
        let supply = p.alpha * inst.hospitals[i].usage;
        for j in 0..s {
            m.add_continuous(format!("flow_{}_{}", inst.hospitals[i].id, inst.sites[j].id), 0.0, supply);
        }
    }
    for j in 0..s {
        for k in 0..s {
            m.add_continuous(format!("ship_{}_{}", inst.sites[j].id, inst.sites[k].id), 0.0, big_m);
        }
    }
    for j in 0..s {
        m.add_continuous(format!("collected_{}", inst.sites[j].id), 0.0, collectable);
    }
    for k in 0..s {
        m.add_continuous(format!("reprocessed_{}", inst.sites[k].id), 0.0, big_m);
    }
    for d in 0..nd {
        m.add_continuous(format!("disposed_{}", inst.disposal_sites[d].id), 0.0, collectable);
    }
    debug_assert_eq!(m.n_vars(), layout.n_vars());

    let l = &layout;
    // assignment only to open facilities
    for i in 0..h {
        for j in 0..s {
            m.add_constraint(
                format!("link_assign_{i}_{j}"),
                vec![(l.hospital_assignment(i, j), 1.0), (l.open_collection(j), -1.0)],
                RowSense::Le,
                0.0,
            );
        }
    }
    for j in 0..s {
        for k in 0..s {
            m.add_constraint(
                format!("link_route_{j}_{k}"),
                vec![(l.collection_assignment(j, k), 1.0), (l.open_reprocessing(k), -1.0)],
                RowSense::Le,
                0.0,
            );
        }
    }
    for i in 0..h {
        m.add_constraint(
            format!("cover_{i}"),
            (0..s).map(|j| (l.hospital_assignment(i, j), 1.0)).collect(),
            RowSense::Ge,
            1.0,
        );
    }
    for j in 0..s {
        let mut row: Vec<(usize, f64)> = (0..s).map(|k| (l.collection_assignment(j, k), 1.0)).collect();
        row.push((l.open_collection(j), -1.0));
        m.add_constraint(format!("serve_{j}"), row, RowSense::Ge, 0.0);
    }
    let mut budget: Vec<(usize, f64)> = Vec::new();
    for (j, site) in inst.sites.iter().enumerate() {
        budget.push((l.open_collection(j), site.fixed_cost_collection));
    }
    for (k, site) in inst.sites.iter().enumerate() {
        budget.push((l.open_reprocessing(k), site.fixed_cost_reprocessing));
    }
    m.add_constraint("budget", budget, RowSense::Le, p.budget);

    // collection of alpha·usage, split over assigned centres
    for (i, hosp) in inst.hospitals.iter().enumerate() {
        let supply = p.alpha * hosp.usage;
        m.add_constraint(
            format!("supply_{i}"),
            (0..s).map(|j| (l.hospital_flow(i, j), 1.0)).collect(),
            RowSense::Eq,
            supply,
        );
        for j in 0..s {
            m.add_constraint(
                format!("flow_link_{i}_{j}"),
                vec![(l.hospital_flow(i, j), 1.0), (l.hospital_assignment(i, j), -supply)],
                RowSense::Le,
                0.0,
            );
        }
    }
    for j in 0..s {
        let mut row = vec![(l.collected(j), 1.0)];
        row.extend((0..h).map(|i| (l.hospital_flow(i, j), -1.0)));
        m.add_constraint(format!("collect_{j}"), row, RowSense::Eq, 0.0);
    }

    // beta share of each centre's masks goes to its reprocessing centres
    for j in 0..s {
        let mut row: Vec<(usize, f64)> = (0..s).map(|k| (l.collection_flow(j, k), 1.0)).collect();
        row.push((l.collected(j), -p.beta));
        m.add_constraint(format!("split_{j}"), row, RowSense::Eq, 0.0);
        for k in 0..s {
            m.add_constraint(
                format!("ship_link_{j}_{k}"),
                vec![(l.collection_flow(j, k), 1.0), (l.collection_assignment(j, k), -big_m)],
                RowSense::Le,
                0.0,
            );
        }
    }
    for k in 0..s {
        let mut row = vec![(l.reprocessed(k), 1.0)];
        row.extend((0..s).map(|j| (l.collection_flow(j, k), -1.0)));
        m.add_constraint(format!("reprocess_{k}"), row, RowSense::Eq, 0.0);
    }

    // remainder goes to disposal
    let mut row: Vec<(usize, f64)> = (0..nd).map(|d| (l.disposed(d), 1.0)).collect();
    row.extend((0..s).map(|j| (l.collected(j), -1.0)));
    row.extend((0..s).map(|k| (l.reprocessed(k), 1.0)));
    m.add_constraint("dispose", row, RowSense::Eq, 0.0);

    if let Some(e) = eps.eps2 {
        m.add_constraint("eps_z2", criterion_terms(inst, dist, l, Criterion::Environment), RowSense::Ge, e);
    }
    if let Some(e) = eps.eps3 {
        m.add_constraint("eps_z3", criterion_terms(inst, dist, l, Criterion::Jobs), RowSense::Ge, e);
    }

    m.set_objective(ObjectiveSense::Maximize, criterion_terms(inst, dist, l, criterion), 0.0);
    Ok((m, layout))
}

/// Recomputes (Z₁, Z₂, Z₃) term by term from the instance data. Feasibility
/// is not checked.
pub fn evaluate_solution(
    inst: &Instance,
    dist: &Distances,
    sol: &Solution,
) -> Result<ObjectiveTriple, FormulationError> {
    let layout = VariableLayout::for_instance(inst);
    sol.check_dims(&layout)?;
    check_distances(inst, dist)?;
    let p = &inst.params;

    let mut fixed_cost = 0.0;
    let mut fixed_emission = 0.0;
    let mut jobs = 0.0;
    let mut operating_cost = 0.0;
    let mut operating_emission = 0.0;
    for (j, site) in inst.sites.iter().enumerate() {
        let (x, w) = (sol.open_collection[j], sol.open_reprocessing[j]);
        fixed_cost += site.fixed_cost_collection * x + site.fixed_cost_reprocessing * w;
        fixed_emission += site.fixed_emission_collection * x + site.fixed_emission_reprocessing * w;
        jobs += site.jobs_collection as f64 * x + site.jobs_reprocessing as f64 * w;
        operating_cost += site.unit_cost_collection * sol.collected[j]
            + site.unit_cost_reprocessing * sol.reprocessed[j];
        operating_emission += site.unit_emission_collection * sol.collected[j]
            + site.unit_emission_reprocessing * sol.reprocessed[j];
    }

    let mut arc_km = 0.0;
    for (i, row) in sol.hospital_assignment.iter().enumerate() {
        for (j, y) in row.iter().enumerate() {
            arc_km += dist.hospital_site.km[i][j] * y;
        }
    }
    for (j, row) in sol.collection_assignment.iter().enumerate() {
        for (k, z) in row.iter().enumerate() {
            arc_km += dist.site_site.km[j][k] * z;
        }
    }

    let mut disposal_cost = 0.0;
    let mut disposal_emission = 0.0;
    for (d, site) in sol.disposed.iter().zip(&inst.disposal_sites) {
        disposal_cost += site.unit_cost * d;
        disposal_emission += site.unit_emission * d;
    }

    let reprocessed = sol.total_reprocessed();
    let revenue = p.price * reprocessed;
    let variable_cost = p.transport_cost_per_km * arc_km + operating_cost + disposal_cost;
    let recovery = p.production_emission * reprocessed;
    let footprint = p.truck_emission_per_km * arc_km + fixed_emission + operating_emission + disposal_emission;

    Ok(ObjectiveTriple {
        z1: revenue - fixed_cost - variable_cost,
        z2: recovery - footprint,
        z3: jobs,
    })
}

/// Decodes a solver vector and attaches its evaluated objectives.
pub fn solution_from_values(
    inst: &Instance,
    dist: &Distances,
    layout: &VariableLayout,
    values: &[f64],
) -> Result<Solution, FormulationError> {
    let mut sol = layout.decode(values)?;
    sol.triple = evaluate_solution(inst, dist, &sol)?;
    Ok(sol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintFamily {
    /// Assignment and opening decisions must be 0 or 1.
    Integrality,
    /// Flows and quantities must be non-negative.
    NonNegativity,
    /// A hospital may only use an open collection centre.
    HospitalLink,
    /// A collection centre may only ship to an open reprocessing centre.
    RouteLink,
    /// Every hospital uses at least one collection centre.
    HospitalCoverage,
    /// Every open collection centre ships to at least one reprocessing centre.
    CollectionRouting,
    Budget,
    /// Flows out of a hospital total alpha times its usage.
    CollectionSupply,
    /// Hospital flow only on assigned arcs, at most alpha times usage.
    HospitalFlowLink,
    /// Masks at a collection centre equal its inflow.
    CollectionBalance,
    /// Outflow to reprocessing equals beta times the centre's masks.
    ReprocessingSplit,
    /// Reprocessing shipments only on assigned routes.
    RouteFlowLink,
    /// Masks at a reprocessing centre equal its inflow.
    ReprocessingBalance,
    /// Disposed masks equal collected minus reprocessed.
    Disposal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityViolation {
    pub family: ConstraintFamily,
    pub indices: Vec<usize>,
    /// Amount by which the constraint is violated, in its own units.
    pub residual: f64,
}

impl fmt::Display for FeasibilityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}{:?}: residual {}", self.family, self.indices, self.residual)
    }
}

/// Aggregate flow conservation of a solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowAudit {
    pub collected: f64,
    pub reprocessed: f64,
    pub disposed: f64,
    /// `collected − reprocessed − disposed`
    pub residual: f64,
}

pub fn flow_audit(sol: &Solution) -> FlowAudit {
    let (c, r, d) = (sol.total_collected(), sol.total_reprocessed(), sol.total_disposed());
    FlowAudit {
        collected: c,
        reprocessed: r,
        disposed: d,
        residual: c - r - d,
    }
}

struct Audit {
    tol: f64,
    out: Vec<FeasibilityViolation>,
}

impl Audit {
    /// `residual` is the violation amount (> 0 means violated); `scale` the
    /// largest term magnitude in the row.
    fn record(&mut self, family: ConstraintFamily, indices: Vec<usize>, residual: f64, scale: f64) {
        if residual > self.tol * scale.max(1.0) {
            self.out.push(FeasibilityViolation {
                family,
                indices,
                residual,
            });
        }
    }

    fn le(&mut self, family: ConstraintFamily, indices: Vec<usize>, lhs: f64, rhs: f64, scale: f64) {
        self.record(family, indices, lhs - rhs, scale.max(rhs.abs()));
    }

    fn eq(&mut self, family: ConstraintFamily, indices: Vec<usize>, lhs: f64, rhs: f64, scale: f64) {
        self.record(family, indices, (lhs - rhs).abs(), scale.max(rhs.abs()));
    }
}

/// Every constraint violated by more than `tol` (relative to the row's
/// largest term, floored at one).
pub fn check_feasibility(
    inst: &Instance,
    dist: &Distances,
    sol: &Solution,
    tol: f64,
) -> Result<Vec<FeasibilityViolation>, FormulationError> {
    use ConstraintFamily::*;
    let layout = VariableLayout::for_instance(inst);
    sol.check_dims(&layout)?;
    check_distances(inst, dist)?;
    let (h, s) = (layout.n_hospitals, layout.n_sites);
    let p = &inst.params;
    let mut a = Audit { tol, out: Vec::new() };

    let binary = |v: f64| (v - v.round()).abs().max(if (0.0..=1.0).contains(&v.round()) { 0.0 } else { 1.0 });
    for j in 0..s {
        a.record(Integrality, vec![0, j], binary(sol.open_collection[j]), 1.0);
        a.record(Integrality, vec![1, j], binary(sol.open_reprocessing[j]), 1.0);
    }
    for i in 0..h {
        for j in 0..s {
            a.record(Integrality, vec![2, i, j], binary(sol.hospital_assignment[i][j]), 1.0);
            a.record(NonNegativity, vec![0, i, j], -sol.hospital_flow[i][j], 1.0);
        }
    }
    for j in 0..s {
        for k in 0..s {
            a.record(Integrality, vec![3, j, k], binary(sol.collection_assignment[j][k]), 1.0);
            a.record(NonNegativity, vec![1, j, k], -sol.collection_flow[j][k], 1.0);
        }
        a.record(NonNegativity, vec![2, j], -sol.collected[j], 1.0);
        a.record(NonNegativity, vec![3, j], -sol.reprocessed[j], 1.0);
    }
    for (m, d) in sol.disposed.iter().enumerate() {
        a.record(NonNegativity, vec![4, m], -d, 1.0);
    }

    for i in 0..h {
        for j in 0..s {
            a.le(HospitalLink, vec![i, j], sol.hospital_assignment[i][j], sol.open_collection[j], 1.0);
        }
        a.record(HospitalCoverage, vec![i], 1.0 - sol.hospital_assignment[i].iter().sum::<f64>(), 1.0);
    }
    for j in 0..s {
        for k in 0..s {
            a.le(RouteLink, vec![j, k], sol.collection_assignment[j][k], sol.open_reprocessing[k], 1.0);
        }
        let routed: f64 = sol.collection_assignment[j].iter().sum();
        a.record(CollectionRouting, vec![j], sol.open_collection[j] - routed, 1.0);
    }

    let mut spend = 0.0;
    let mut spend_scale: f64 = 0.0;
    for (j, site) in inst.sites.iter().enumerate() {
        let c = site.fixed_cost_collection * sol.open_collection[j];
        let r = site.fixed_cost_reprocessing * sol.open_reprocessing[j];
        spend += c + r;
        spend_scale = spend_scale.max(c.abs()).max(r.abs());
    }
    a.le(Budget, vec![], spend, p.budget, spend_scale);

    for (i, hosp) in inst.hospitals.iter().enumerate() {
        let supply = p.alpha * hosp.usage;
        let out: f64 = sol.hospital_flow[i].iter().sum();
        let scale = sol.hospital_flow[i].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        a.eq(CollectionSupply, vec![i], out, supply, scale);
        for j in 0..s {
            let cap = supply * sol.hospital_assignment[i][j];
            a.le(HospitalFlowLink, vec![i, j], sol.hospital_flow[i][j], cap, sol.hospital_flow[i][j].abs());
        }
    }
    let big_m = reprocessing_flow_bound(inst);
    for j in 0..s {
        let inflow: f64 = (0..h).map(|i| sol.hospital_flow[i][j]).sum();
        let scale = (0..h).fold(sol.collected[j].abs(), |m, i| m.max(sol.hospital_flow[i][j].abs()));
        a.eq(CollectionBalance, vec![j], sol.collected[j], inflow, scale);

        let out: f64 = sol.collection_flow[j].iter().sum();
        let share = p.beta * sol.collected[j];
        let scale = sol.collection_flow[j].iter().fold(share.abs(), |m, v| m.max(v.abs()));
        a.eq(ReprocessingSplit, vec![j], out, share, scale);
        for k in 0..s {
            let cap = big_m * sol.collection_assignment[j][k];
            let g = sol.collection_flow[j][k];
            a.le(RouteFlowLink, vec![j, k], g, cap, g.abs());
        }
    }
    for k in 0..s {
        let inflow: f64 = (0..s).map(|j| sol.collection_flow[j][k]).sum();
        let scale = (0..s).fold(sol.reprocessed[k].abs(), |m, j| m.max(sol.collection_flow[j][k].abs()));
        a.eq(ReprocessingBalance, vec![k], sol.reprocessed[k], inflow, scale);
    }

    let audit = flow_audit(sol);
    let scale = audit.collected.abs().max(audit.reprocessed.abs()).max(audit.disposed.abs());
    a.eq(Disposal, vec![], audit.disposed, audit.collected - audit.reprocessed, scale);

    Ok(a.out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::load_instance;
    use crate::solver::{enumerate_oracle, solve_milp, MilpStatus, SolveOptions};

    // one hospital, one site in both roles, one disposal site; distances fixed
    const PAIR: &str = r#"{
      "hospitals": [{"id": "H1", "name": "General", "lat": 48.43, "lon": -123.33, "usage": 125}],
      "sites": [{"id": "S1", "lat": 48.43, "lon": -123.36,
                 "fixed_cost_collection": 10, "fixed_cost_reprocessing": 20,
                 "unit_cost_collection": 0.05, "unit_cost_reprocessing": 0.1,
                 "fixed_emission_collection": 1, "fixed_emission_reprocessing": 2,
                 "unit_emission_collection": 0.001, "unit_emission_reprocessing": 0.002,
                 "jobs_collection": 2, "jobs_reprocessing": 5}],
      "disposal_sites": [{"id": "D1", "unit_cost": 0.1, "unit_emission": 0.007}],
      "params": {"price": 0.5, "production_emission": 0.05, "transport_cost_per_km": 2,
                 "truck_emission_per_km": 0.2, "budget": 100, "alpha": 0.8, "beta": 0.95},
      "distance_override": {"hospital_site": [[12.0]], "site_site": [[3.0]]}
    }"#;

    fn pair() -> (Instance, Distances) {
        let inst = load_instance(PAIR.as_bytes()).unwrap();
        let d = inst.distances().unwrap();
        (inst, d)
    }

    fn pair_solution() -> Solution {
        let mut s = Solution::zeros(&VariableLayout::new(1, 1, 1));
        s.open_collection = vec![1.0];
        s.open_reprocessing = vec![1.0];
        s.hospital_assignment = vec![vec![1.0]];
        s.collection_assignment = vec![vec![1.0]];
        s.hospital_flow = vec![vec![100.0]];
        s.collection_flow = vec![vec![95.0]];
        s.collected = vec![100.0];
        s.reprocessed = vec![95.0];
        s.disposed = vec![5.0];
        s
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn layout_round_trips() {
        let l = VariableLayout::new(3, 4, 2);
        let values: Vec<f64> = (0..l.n_vars()).map(|v| v as f64).collect();
        let sol = l.decode(&values).unwrap();
        assert_eq!(sol.hospital_flow[2][3], l.hospital_flow(2, 3) as f64);
        assert_eq!(sol.collection_assignment[1][0], l.collection_assignment(1, 0) as f64);
        assert_eq!(l.encode(&sol).unwrap(), values);
        assert_eq!(l.disposed(1), l.n_vars() - 1);
        assert!(l.decode(&values[1..]).is_err());
    }

    #[test]
    fn single_pair_model_shape() {
        let (inst, d) = pair();
        let (m, l) = build_circular_model(&inst, &d, Criterion::Profit, EpsilonBounds::default()).unwrap();
        assert_eq!(m.binary_columns().len(), 4);
        assert_eq!(m.n_vars() - 4, 5);
        assert_eq!(m.constraints.len(), 12);
        assert_eq!(l.n_binaries(), 4);

        let eps = EpsilonBounds { eps2: Some(-10.0), eps3: Some(2.0) };
        let (m, _) = build_circular_model(&inst, &d, Criterion::Jobs, eps).unwrap();
        assert_eq!(m.constraints.len(), 14);
    }

    #[test]
    fn hand_computed_pair() {
        let (inst, d) = pair();
        let t = evaluate_solution(&inst, &d, &pair_solution()).unwrap();
        // revenue 47.5, fixed 30, transport 2·12 + 2·3, operations 5 + 9.5, disposal 0.5
        assert!(close(t.z1, -27.5), "{t:?}");
        // avoided 4.75; trucks 2.4 + 0.6, sites 1 + 2 + 0.1 + 0.19, disposal 0.035
        assert!(close(t.z2, -1.575), "{t:?}");
        assert_eq!(t.z3, 7.0);
        assert!(check_feasibility(&inst, &d, &pair_solution(), 1e-6).unwrap().is_empty());
    }

    #[test]
    fn zero_solution_scores_zero() {
        let (inst, d) = pair();
        let t = evaluate_solution(&inst, &d, &Solution::zeros(&VariableLayout::new(1, 1, 1))).unwrap();
        assert_eq!(t, ObjectiveTriple::default());
    }

    #[test]
    fn model_objective_matches_evaluator() {
        let (inst, d) = pair();
        let sol = pair_solution();
        for c in Criterion::ALL {
            let (m, l) = build_circular_model(&inst, &d, c, EpsilonBounds::default()).unwrap();
            let v = m.objective_value(&l.encode(&sol).unwrap());
            let t = evaluate_solution(&inst, &d, &sol).unwrap();
            assert!(close(v, t.get(c)), "{c}: {v} vs {}", t.get(c));
        }
    }

    #[test]
    fn assignment_to_closed_centre_is_flagged() {
        let (inst, d) = pair();
        let mut s = pair_solution();
        s.open_collection = vec![0.0];
        let v = check_feasibility(&inst, &d, &s, 1e-6).unwrap();
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].family, ConstraintFamily::HospitalLink);
        assert_eq!(v[0].indices, vec![0, 0]);
    }

    #[test]
    fn budget_overrun_residual() {
        let (mut inst, d) = pair();
        inst.params.budget = 29.0;
        let v = check_feasibility(&inst, &d, &pair_solution(), 1e-6).unwrap();
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].family, ConstraintFamily::Budget);
        assert!(close(v[0].residual, 1.0));
    }

    #[test]
    fn aggregate_flow_balance() {
        let mut s = Solution::zeros(&VariableLayout::new(1, 2, 1));
        s.collected = vec![4_000_000.0, 3_275_317.0];
        s.reprocessed = vec![6_911_551.0, 0.0];
        s.disposed = vec![363_766.0];
        let a = flow_audit(&s);
        assert_eq!(a.residual, 0.0);
        assert_eq!(a.collected, 7_275_317.0);
    }

    #[test]
    fn broken_balance_is_reported() {
        let (inst, d) = pair();
        let mut s = pair_solution();
        s.disposed = vec![7.0];
        let v = check_feasibility(&inst, &d, &s, 1e-6).unwrap();
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].family, ConstraintFamily::Disposal);
        assert!(close(v[0].residual, 2.0));
    }

    #[test]
    fn fractional_binary_is_flagged() {
        let (inst, d) = pair();
        let mut s = pair_solution();
        s.open_reprocessing = vec![1.5];
        let v = check_feasibility(&inst, &d, &s, 1e-6).unwrap();
        assert!(v.iter().any(|v| v.family == ConstraintFamily::Integrality && v.indices == vec![1, 0]));
    }

    #[test]
    fn epsilon_and_dimension_errors() {
        let (inst, d) = pair();
        let bad = EpsilonBounds { eps2: Some(f64::NAN), eps3: None };
        assert!(matches!(
            build_circular_model(&inst, &d, Criterion::Profit, bad),
            Err(FormulationError::Epsilon(_))
        ));
        let bad = EpsilonBounds { eps2: None, eps3: Some(-1.0) };
        assert!(build_circular_model(&inst, &d, Criterion::Profit, bad).is_err());

        let mut short = d.clone();
        short.site_site.km = vec![];
        assert!(matches!(
            build_circular_model(&inst, &short, Criterion::Profit, EpsilonBounds::default()),
            Err(FormulationError::DimensionMismatch { .. })
        ));
        let mut s = pair_solution();
        s.disposed.push(0.0);
        assert!(evaluate_solution(&inst, &d, &s).is_err());
    }

    #[test]
    fn invalid_instance_is_rejected() {
        let (mut inst, d) = pair();
        inst.params.beta = 2.0;
        assert!(matches!(
            build_circular_model(&inst, &d, Criterion::Profit, EpsilonBounds::default()),
            Err(FormulationError::Invalid(_))
        ));
    }

    #[test]
    fn budget_below_every_facility_is_infeasible() {
        let (mut inst, d) = pair();
        inst.params.budget = 5.0;
        let (m, _) = build_circular_model(&inst, &d, Criterion::Profit, EpsilonBounds::default()).unwrap();
        assert_eq!(solve_milp(&m, &SolveOptions::default()).unwrap().status, MilpStatus::Infeasible);
    }

    #[test]
    fn no_collection_means_no_flow() {
        let inst = crate::instance::generate_synthetic(3, 2, 2, 1, &Default::default()).unwrap();
        let mut inst = inst;
        inst.params.alpha = 0.0;
        let d = inst.distances().unwrap();
        let (m, l) = build_circular_model(&inst, &d, Criterion::Profit, EpsilonBounds::default()).unwrap();
        let r = solve_milp(&m, &SolveOptions::default()).unwrap();
        let sol = solution_from_values(&inst, &d, &l, r.incumbent.as_ref().unwrap()).unwrap();
        assert_eq!(sol.total_collected(), 0.0);
        assert_eq!(sol.total_reprocessed(), 0.0);
        assert_eq!(sol.total_disposed(), 0.0);

        // cheapest configuration by brute force: hospital i uses centre
        // hosp[i], each used centre j ships to route[j]
        let ct = inst.params.transport_cost_per_km;
        let mut best = f64::INFINITY;
        for hosp in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            for route in [[0, 0], [0, 1], [1, 0], [1, 1]] {
                let mut open_c = [false; 2];
                let mut open_r = [false; 2];
                let mut cost = 0.0;
                for (i, &j) in hosp.iter().enumerate() {
                    open_c[j] = true;
                    cost += ct * d.hospital_site.km[i][j];
                }
                for j in 0..2 {
                    if open_c[j] {
                        open_r[route[j]] = true;
                        cost += ct * d.site_site.km[j][route[j]];
                    }
                }
                let mut fixed = 0.0;
                for j in 0..2 {
                    if open_c[j] {
                        fixed += inst.sites[j].fixed_cost_collection;
                    }
                    if open_r[j] {
                        fixed += inst.sites[j].fixed_cost_reprocessing;
                    }
                }
                if fixed <= inst.params.budget {
                    best = best.min(cost + fixed);
                }
            }
        }
        assert!(close(r.objective.unwrap(), -best), "{:?} vs {}", r.objective, -best);
        let o = enumerate_oracle(&m).unwrap();
        assert!(close(o.objective.unwrap(), -best));
    }
}
