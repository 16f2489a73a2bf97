//! Two-phase bounded primal simplex on a dense tableau.
//!
//! The tableau is stored row-major and fully dense, but pivots only touch
//! rows with a nonzero in the entering column and columns with a nonzero in
//! the pivot row, which keeps the network-like models built by this crate
//! cheap to pivot. Rows and columns are equilibrated by powers of two before
//! the solve so that the unscaled solution is recovered exactly.
//!
//! Pricing is Dantzig's rule with lowest-index tie-breaking; after a run of
//! degenerate pivots the engine falls back to Bland's rule until the
//! objective moves again. Everything is deterministic.

use serde::{Deserialize, Serialize};

use super::problem::{MilpProblem, ObjectiveSense, RowSense};
use super::SolverError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpResult<T> {
    pub status: LpStatus,
    /// Primal values (empty unless `Optimal`).
    pub values: Vec<T>,
    /// Objective in the problem's own sense, including the constant term.
    pub objective: T,
    pub iterations: usize,
}

impl<T: Scalar> LpResult<T> {
    fn without_solution(status: LpStatus, iterations: usize) -> Self {
        Self {
            status,
            values: Vec::new(),
            objective: T::nan(),
            iterations,
        }
    }
}

/// Solves the LP relaxation of `p` (integrality flags are ignored).
pub fn solve_lp<T: Scalar>(p: &MilpProblem<T>) -> Result<LpResult<T>, SolverError> {
    p.validate()?;
    let lower: Vec<T> = p.variables.iter().map(|v| v.lower).collect();
    let upper: Vec<T> = p.variables.iter().map(|v| v.upper).collect();
    solve_lp_bounded(p, &lower, &upper)
}

/// Solves the LP relaxation with per-column bounds overriding the problem's.
/// The problem must already be validated.
pub(crate) fn solve_lp_bounded<T: Scalar>(
    p: &MilpProblem<T>,
    lower: &[T],
    upper: &[T],
) -> Result<LpResult<T>, SolverError> {
    let ftol = T::feas_tol();
    for (l, u) in lower.iter().zip(upper) {
        if *l > *u + ftol {
            return Ok(LpResult::without_solution(LpStatus::Infeasible, 0));
        }
    }

    let model = match StandardForm::build(p, lower, upper) {
        Some(m) => m,
        None => return Ok(LpResult::without_solution(LpStatus::Infeasible, 0)),
    };
    let mut tab = Tableau::new(&model);
    let iter_cap = 50 * (tab.m + tab.ncols) + 1000;

    // phase 1
    if tab.n_art > 0 {
        tab.init_phase1();
        match tab.run(iter_cap)? {
            RunOutcome::Optimal => {}
            RunOutcome::Unbounded => {
                return Err(SolverError::Numerical("phase 1 reported unbounded".into()))
            }
        }
        let infeas = tab.artificial_infeasibility();
        let rhs_scale = model.rhs.iter().fold(T::one(), |m, v| m.max(v.abs()));
        if infeas > ftol * rhs_scale {
            return Ok(LpResult::without_solution(LpStatus::Infeasible, tab.iterations));
        }
        tab.drive_out_artificials();
    }

    // phase 2
    tab.init_phase2();
    match tab.run(iter_cap)? {
        RunOutcome::Optimal => {}
        RunOutcome::Unbounded => {
            return Ok(LpResult::without_solution(LpStatus::Unbounded, tab.iterations))
        }
    }

    let internal = tab.primal_values();
    let limit = T::lit(1e-6).max(ftol * T::lit(10.0));
    if let Some((worst, row)) = model.worst_residual(&internal) {
        if worst > limit {
            return Err(SolverError::Numerical(format!(
                "scaled residual {} on row {} after {} pivots",
                worst.as_f64(),
                p.constraints[row].name,
                tab.iterations
            )));
        }
    }
    let values = model.recover(&internal, lower, upper);
    let objective = p.objective_value(&values);

    Ok(LpResult {
        status: LpStatus::Optimal,
        values,
        objective,
        iterations: tab.iterations,
    })
}

#[derive(Debug, Clone, Copy)]
enum ColMap<T> {
    Fixed(T),
    /// x = lb + scale·u
    Shift { col: usize, lb: T },
    /// x = ub − scale·u
    Flip { col: usize, ub: T },
    /// x = scale⁺·u⁺ − scale⁻·u⁻
    Split { pos: usize, neg: usize },
}

/// Equilibrated `max c·u s.t. rows, 0 ≤ u ≤ ub`.
struct StandardForm<T> {
    n: usize,
    maps: Vec<ColMap<T>>,
    col_scale: Vec<T>,
    ub: Vec<T>,
    cost: Vec<T>,
    rows: Vec<Vec<(usize, T)>>,
    senses: Vec<RowSense>,
    rhs: Vec<T>,
    /// index of each kept row in the original problem
    origin: Vec<usize>,
}

impl<T: Scalar> StandardForm<T> {
    /// Returns `None` when a row without free columns is violated.
    fn build(p: &MilpProblem<T>, lower: &[T], upper: &[T]) -> Option<Self> {
        let ftol = T::feas_tol();
        let mut maps = Vec::with_capacity(p.n_vars());
        let mut ub = Vec::new();
        let mut n = 0usize;
        for (&l, &u) in lower.iter().zip(upper) {
            let map = if l.is_finite() && u.is_finite() && u - l <= T::zero() {
                ColMap::Fixed(l)
            } else if l.is_finite() {
                ub.push(u - l);
                n += 1;
                ColMap::Shift { col: n - 1, lb: l }
            } else if u.is_finite() {
                ub.push(T::infinity());
                n += 1;
                ColMap::Flip { col: n - 1, ub: u }
            } else {
                ub.push(T::infinity());
                ub.push(T::infinity());
                n += 2;
                ColMap::Split { pos: n - 2, neg: n - 1 }
            };
            maps.push(map);
        }

        let sign = match p.objective.sense {
            ObjectiveSense::Maximize => T::one(),
            ObjectiveSense::Minimize => -T::one(),
        };
        let mut cost = vec![T::zero(); n];
        for &(j, c) in &p.objective.terms {
            match maps[j] {
                ColMap::Fixed(_) => {}
                ColMap::Shift { col, .. } => cost[col] = cost[col] + sign * c,
                ColMap::Flip { col, .. } => cost[col] = cost[col] - sign * c,
                ColMap::Split { pos, neg } => {
                    cost[pos] = cost[pos] + sign * c;
                    cost[neg] = cost[neg] - sign * c;
                }
            }
        }

        let mut rows = Vec::with_capacity(p.constraints.len());
        let mut senses = Vec::with_capacity(p.constraints.len());
        let mut rhs = Vec::with_capacity(p.constraints.len());
        let mut dense = vec![T::zero(); n];
        let mut seen = vec![false; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut origin = Vec::with_capacity(p.constraints.len());
        for (ci, c) in p.constraints.iter().enumerate() {
            let mut b = c.rhs;
            let mut scale = c.rhs.abs();
            let mut add = |col: usize, a: T| {
                if !seen[col] {
                    seen[col] = true;
                    touched.push(col);
                }
                dense[col] = dense[col] + a;
            };
            for &(j, a) in &c.terms {
                scale = scale.max(a.abs());
                match maps[j] {
                    ColMap::Fixed(v) => b = b - a * v,
                    ColMap::Shift { col, lb } => {
                        b = b - a * lb;
                        add(col, a);
                    }
                    ColMap::Flip { col, ub } => {
                        b = b - a * ub;
                        add(col, -a);
                    }
                    ColMap::Split { pos, neg } => {
                        add(pos, a);
                        add(neg, -a);
                    }
                }
            }
            touched.sort_unstable();
            let mut row = Vec::with_capacity(touched.len());
            for &col in &touched {
                let v = dense[col];
                dense[col] = T::zero();
                seen[col] = false;
                if v != T::zero() {
                    row.push((col, v));
                }
            }
            touched.clear();
            if row.is_empty() {
                let tol = ftol * scale.max(T::one());
                let ok = match c.sense {
                    RowSense::Le => b >= -tol,
                    RowSense::Ge => b <= tol,
                    RowSense::Eq => b.abs() <= tol,
                };
                if !ok {
                    return None;
                }
                continue;
            }
            rows.push(row);
            senses.push(c.sense);
            rhs.push(b);
            origin.push(ci);
        }

        let mut sf = StandardForm {
            n,
            maps,
            col_scale: vec![T::one(); n],
            ub,
            cost,
            rows,
            senses,
            rhs,
            origin,
        };
        sf.equilibrate();
        Some(sf)
    }

    fn equilibrate(&mut self) {
        let two = T::lit(2.0);
        let pow2 = |v: T| -> T { two.powi(-(v.log2().round().to_i32().unwrap_or(0))) };

        // columns with a finite range are measured in units of that range;
        // geometric passes then pull the max/min ratios of rows and of the
        // remaining columns together
        let ranged: Vec<bool> = self.ub.iter().map(|u| u.is_finite() && *u > T::zero()).collect();
        let mut factor: Vec<T> = self
            .ub
            .iter()
            .zip(&ranged)
            .map(|(&u, &r)| if r { T::one() / pow2(u) } else { T::one() })
            .collect();
        self.apply_column_factors(&factor);

        let mut rmax = vec![T::zero(); self.rows.len()];
        let mut rmin = vec![T::infinity(); self.rows.len()];
        let mut cmax = vec![T::zero(); self.n];
        let mut cmin = vec![T::infinity(); self.n];
        for _ in 0..5 {
            rmax.iter_mut().for_each(|v| *v = T::zero());
            rmin.iter_mut().for_each(|v| *v = T::infinity());
            for (i, row) in self.rows.iter().enumerate() {
                for &(_, a) in row {
                    rmax[i] = rmax[i].max(a.abs());
                    rmin[i] = rmin[i].min(a.abs());
                }
            }
            for (i, row) in self.rows.iter_mut().enumerate() {
                let target = (rmax[i] * rmin[i]).sqrt();
                if target > T::zero() && target.is_finite() {
                    let s = pow2(target);
                    for e in row.iter_mut() {
                        e.1 = e.1 * s;
                    }
                    self.rhs[i] = self.rhs[i] * s;
                }
            }

            cmax.iter_mut().for_each(|v| *v = T::zero());
            cmin.iter_mut().for_each(|v| *v = T::infinity());
            for row in &self.rows {
                for &(j, a) in row {
                    cmax[j] = cmax[j].max(a.abs());
                    cmin[j] = cmin[j].min(a.abs());
                }
            }
            for j in 0..self.n {
                let target = (cmax[j] * cmin[j]).sqrt();
                factor[j] = if !ranged[j] && target > T::zero() && target.is_finite() {
                    pow2(target)
                } else {
                    T::one()
                };
            }
            self.apply_column_factors(&factor);
        }

        for (i, row) in self.rows.iter_mut().enumerate() {
            let mx = row.iter().fold(T::zero(), |m, &(_, a)| m.max(a.abs()));
            if mx > T::zero() {
                let s = pow2(mx);
                for e in row.iter_mut() {
                    e.1 = e.1 * s;
                }
                self.rhs[i] = self.rhs[i] * s;
            }
        }

        let cm = self.cost.iter().fold(T::zero(), |m, c| m.max(c.abs()));
        if cm > T::zero() {
            let s = pow2(cm);
            for c in self.cost.iter_mut() {
                *c = *c * s;
            }
        }
    }

    /// Substitutes `t = s·u` in every column: `ub_u = ub_t / s`, `c_u = c_t · s`.
    fn apply_column_factors(&mut self, factor: &[T]) {
        for j in 0..self.n {
            self.col_scale[j] = self.col_scale[j] * factor[j];
            self.ub[j] = self.ub[j] / factor[j];
            self.cost[j] = self.cost[j] * factor[j];
        }
        for row in self.rows.iter_mut() {
            for e in row.iter_mut() {
                e.1 = e.1 * factor[e.0];
            }
        }
    }

    /// Worst row residual of `u` (structural columns only), relative to the
    /// largest of one, `|rhs|` and `|a_j·u_j|`, with the original row index.
    fn worst_residual(&self, u: &[T]) -> Option<(T, usize)> {
        let mut worst: Option<(T, usize)> = None;
        for (i, row) in self.rows.iter().enumerate() {
            let mut act = T::zero();
            let mut mag = self.rhs[i].abs().max(T::one());
            for &(j, a) in row {
                let t = a * u[j];
                act = act + t;
                mag = mag.max(t.abs());
            }
            let r = act - self.rhs[i];
            let v = match self.senses[i] {
                RowSense::Le => r.max(T::zero()),
                RowSense::Ge => (-r).max(T::zero()),
                RowSense::Eq => r.abs(),
            } / mag;
            if worst.map_or(true, |(w, _)| v > w) {
                worst = Some((v, self.origin[i]));
            }
        }
        worst
    }

    fn recover(&self, u: &[T], lower: &[T], upper: &[T]) -> Vec<T> {
        self.maps
            .iter()
            .enumerate()
            .map(|(j, m)| {
                let x = match *m {
                    ColMap::Fixed(v) => v,
                    ColMap::Shift { col, lb } => lb + u[col] * self.col_scale[col],
                    ColMap::Flip { col, ub } => ub - u[col] * self.col_scale[col],
                    ColMap::Split { pos, neg } => {
                        u[pos] * self.col_scale[pos] - u[neg] * self.col_scale[neg]
                    }
                };
                x.max(lower[j]).min(upper[j])
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColState {
    Basic(usize),
    Lower,
    Upper,
}

enum RunOutcome {
    Optimal,
    Unbounded,
}

struct Tableau<T> {
    m: usize,
    ncols: usize,
    /// first artificial column; artificials occupy `art_start..ncols`
    art_start: usize,
    n_art: usize,
    a: Vec<T>,
    xb: Vec<T>,
    /// B⁻¹b, carried through every pivot so `xb` can be rebuilt exactly
    beta: Vec<T>,
    basis: Vec<usize>,
    state: Vec<ColState>,
    ub: Vec<T>,
    cost: Vec<T>,
    d: Vec<T>,
    iterations: usize,
    piv_tol: T,
    zero_tol: T,
    ftol: T,
    dtol: T,
    // scratch
    col_nz: Vec<(usize, T)>,
    row_nz: Vec<(usize, T)>,
}

enum Step<T> {
    Flip,
    Pivot { row: usize, to_upper: bool, theta: T },
}

impl<T: Scalar> Tableau<T> {
    fn new(sf: &StandardForm<T>) -> Self {
        let m = sf.rows.len();
        let n = sf.n;
        // one slack/surplus per inequality row, one artificial per row that
        // cannot start with its slack basic
        let mut n_slack = 0;
        let mut needs_art = vec![false; m];
        let mut row_sign = vec![T::one(); m];
        for i in 0..m {
            let (sense, b) = (sf.senses[i], sf.rhs[i]);
            match sense {
                RowSense::Le => {
                    n_slack += 1;
                    if b < T::zero() {
                        needs_art[i] = true;
                        row_sign[i] = -T::one();
                    }
                }
                RowSense::Ge => {
                    n_slack += 1;
                    if b > T::zero() {
                        needs_art[i] = true;
                    } else {
                        row_sign[i] = -T::one();
                    }
                }
                RowSense::Eq => {
                    needs_art[i] = true;
                    if b < T::zero() {
                        row_sign[i] = -T::one();
                    }
                }
            }
        }
        let n_art = needs_art.iter().filter(|&&x| x).count();
        let art_start = n + n_slack;
        let ncols = art_start + n_art;

        let mut a = vec![T::zero(); m * ncols];
        let mut xb = vec![T::zero(); m];
        let mut basis = vec![0usize; m];
        let mut state = vec![ColState::Lower; ncols];
        let mut ub = vec![T::infinity(); ncols];
        ub[..n].copy_from_slice(&sf.ub);
        let mut cost = vec![T::zero(); ncols];
        cost[..n].copy_from_slice(&sf.cost);

        let mut slack = n;
        let mut art = art_start;
        for i in 0..m {
            let s = row_sign[i];
            let row = &mut a[i * ncols..(i + 1) * ncols];
            for &(j, v) in &sf.rows[i] {
                row[j] = s * v;
            }
            xb[i] = s * sf.rhs[i];
            // slack coefficient in the original orientation: +1 for ≤, −1 for ≥
            match sf.senses[i] {
                RowSense::Le => {
                    row[slack] = s;
                    if !needs_art[i] {
                        basis[i] = slack;
                        state[slack] = ColState::Basic(i);
                    }
                    slack += 1;
                }
                RowSense::Ge => {
                    row[slack] = -s;
                    if !needs_art[i] {
                        basis[i] = slack;
                        state[slack] = ColState::Basic(i);
                    }
                    slack += 1;
                }
                RowSense::Eq => {}
            }
            if needs_art[i] {
                row[art] = T::one();
                basis[i] = art;
                state[art] = ColState::Basic(i);
                art += 1;
            }
        }

        let ftol = T::feas_tol();
        Tableau {
            m,
            ncols,
            art_start,
            n_art,
            a,
            beta: xb.clone(),
            xb,
            basis,
            state,
            ub,
            cost,
            d: vec![T::zero(); ncols],
            iterations: 0,
            piv_tol: ftol,
            zero_tol: T::zero_tol(),
            ftol,
            dtol: ftol,
            col_nz: Vec::new(),
            row_nz: Vec::new(),
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.a[i * self.ncols + j]
    }

    fn set_reduced_costs(&mut self, cost: &[T]) {
        self.d.copy_from_slice(cost);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb == T::zero() {
                continue;
            }
            let row = &self.a[i * self.ncols..(i + 1) * self.ncols];
            for (dj, &aij) in self.d.iter_mut().zip(row) {
                if aij != T::zero() {
                    *dj = *dj - cb * aij;
                }
            }
        }
        for i in 0..self.m {
            self.d[self.basis[i]] = T::zero();
        }
    }

    fn init_phase1(&mut self) {
        let mut c = vec![T::zero(); self.ncols];
        for v in &mut c[self.art_start..] {
            *v = -T::one();
        }
        self.set_reduced_costs(&c);
    }

    fn init_phase2(&mut self) {
        let mut c = self.cost.clone();
        for v in &mut c[self.art_start..] {
            *v = T::zero();
        }
        self.set_reduced_costs(&c);
    }

    fn artificial_infeasibility(&self) -> T {
        (0..self.m)
            .filter(|&i| self.basis[i] >= self.art_start)
            .fold(T::zero(), |s, i| s + self.xb[i].abs())
    }

    /// Pivots basic artificials out where possible and freezes all
    /// artificial columns at zero.
    fn drive_out_artificials(&mut self) {
        for i in 0..self.m {
            if self.basis[i] < self.art_start {
                continue;
            }
            let mut best: Option<(usize, T)> = None;
            for j in 0..self.art_start {
                if matches!(self.state[j], ColState::Basic(_)) {
                    continue;
                }
                let v = self.at(i, j).abs();
                if v > self.piv_tol && best.map_or(true, |(_, bv)| v > bv) {
                    best = Some((j, v));
                }
            }
            if let Some((q, _)) = best {
                self.collect_column(q);
                let value = match self.state[q] {
                    ColState::Upper => self.ub[q],
                    _ => T::zero(),
                };
                let leaving = self.basis[i];
                self.state[leaving] = ColState::Lower;
                self.basis[i] = q;
                self.state[q] = ColState::Basic(i);
                self.xb[i] = value;
                self.pivot(i, q);
            }
        }
        for j in self.art_start..self.ncols {
            self.ub[j] = T::zero();
        }
        for i in 0..self.m {
            if self.basis[i] >= self.art_start {
                self.xb[i] = T::zero();
            }
        }
    }

    /// Structural and slack values; basics within the feasibility tolerance
    /// of a bound are put on it.
    fn primal_values(&self) -> Vec<T> {
        (0..self.art_start)
            .map(|j| match self.state[j] {
                ColState::Basic(i) => {
                    let v = self.xb[i];
                    if v <= self.ftol {
                        T::zero()
                    } else if self.ub[j] - v <= self.ftol {
                        self.ub[j]
                    } else {
                        v
                    }
                }
                ColState::Lower => T::zero(),
                ColState::Upper => self.ub[j],
            })
            .collect()
    }

    fn choose_entering(&self, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, T)> = None;
        for j in 0..self.ncols {
            let dj = self.d[j];
            let score = match self.state[j] {
                ColState::Lower if dj > self.dtol && self.ub[j] > T::zero() => dj,
                ColState::Upper if dj < -self.dtol => -dj,
                _ => continue,
            };
            if bland {
                return Some(j);
            }
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        best.map(|(j, _)| j)
    }

    fn collect_column(&mut self, q: usize) {
        self.col_nz.clear();
        for i in 0..self.m {
            let v = self.a[i * self.ncols + q];
            if v != T::zero() {
                self.col_nz.push((i, v));
            }
        }
    }

    /// Ratio test for entering column `q` (its nonzeros already in `col_nz`).
    fn ratio_test(&self, q: usize, bland: bool) -> Option<Step<T>> {
        let dir = if self.state[q] == ColState::Upper { -T::one() } else { T::one() };

        // entries tiny next to the rest of the column are treated as zero
        let colmax = self.col_nz.iter().fold(T::one(), |m, &(_, a)| m.max(a.abs()));
        let piv_tol = self.piv_tol * colmax;

        // pass 1: Harris bound with relaxed feasibility
        let mut theta_max = T::infinity();
        for &(i, alpha) in &self.col_nz {
            if alpha.abs() <= piv_tol {
                continue;
            }
            let rate = -dir * alpha;
            let b = self.basis[i];
            let lim = if rate < T::zero() {
                (self.xb[i] + self.ftol) / -rate
            } else if self.ub[b].is_finite() {
                (self.ub[b] - self.xb[i] + self.ftol) / rate
            } else {
                continue;
            };
            if lim < theta_max {
                theta_max = lim;
            }
        }

        let flip_len = self.ub[q];
        if theta_max.is_infinite() {
            return if flip_len.is_finite() { Some(Step::Flip) } else { None };
        }

        // pass 2: among rows within the Harris bound pick the largest pivot
        let mut chosen: Option<(usize, T, T, bool)> = None; // (row, |alpha|, theta, to_upper)
        for &(i, alpha) in &self.col_nz {
            if alpha.abs() <= piv_tol {
                continue;
            }
            let rate = -dir * alpha;
            let b = self.basis[i];
            let (lim, to_upper) = if rate < T::zero() {
                (self.xb[i] / -rate, false)
            } else if self.ub[b].is_finite() {
                ((self.ub[b] - self.xb[i]) / rate, true)
            } else {
                continue;
            };
            if lim > theta_max {
                continue;
            }
            let better = match chosen {
                None => true,
                Some((ci, ca, _, _)) => {
                    // every row inside the Harris window counts as tied
                    if bland {
                        b < self.basis[ci]
                    } else {
                        alpha.abs() > ca
                    }
                }
            };
            if better {
                chosen = Some((i, alpha.abs(), lim, to_upper));
            }
        }
        let (row, _, theta, to_upper) = chosen?;
        let theta = theta.max(T::zero());
        if flip_len.is_finite() && flip_len <= theta {
            return Some(Step::Flip);
        }
        Some(Step::Pivot { row, to_upper, theta })
    }

    fn run(&mut self, iter_cap: usize) -> Result<RunOutcome, SolverError> {
        let mut degenerate_run = 0usize;
        let mut perturbed = false;
        let mut perturbations = 0usize;
        loop {
            if self.iterations >= iter_cap {
                return Err(SolverError::Numerical(format!(
                    "simplex iteration cap {iter_cap} reached"
                )));
            }
            if degenerate_run > 50 && !perturbed && perturbations < 3 {
                self.perturb(perturbations);
                perturbed = true;
                perturbations += 1;
                degenerate_run = 0;
            }
            let bland = degenerate_run > 50;
            let Some(q) = self.choose_entering(bland) else {
                if perturbed {
                    self.recompute_xb();
                    perturbed = false;
                    degenerate_run = 0;
                    self.dual_cleanup(iter_cap)?;
                    continue;
                }
                return Ok(RunOutcome::Optimal);
            };
            self.collect_column(q);
            let Some(step) = self.ratio_test(q, bland) else {
                return Ok(RunOutcome::Unbounded);
            };
            self.iterations += 1;
            let dir = if self.state[q] == ColState::Upper { -T::one() } else { T::one() };
            match step {
                Step::Flip => {
                    let theta = self.ub[q];
                    for k in 0..self.col_nz.len() {
                        let (i, alpha) = self.col_nz[k];
                        self.xb[i] = self.xb[i] - dir * alpha * theta;
                    }
                    self.state[q] = if dir > T::zero() { ColState::Upper } else { ColState::Lower };
                    degenerate_run = 0;
                }
                Step::Pivot { row, to_upper, theta } => {
                    if theta * self.d[q].abs() <= self.zero_tol {
                        degenerate_run += 1;
                    } else {
                        degenerate_run = 0;
                    }
                    for k in 0..self.col_nz.len() {
                        let (i, alpha) = self.col_nz[k];
                        self.xb[i] = self.xb[i] - dir * alpha * theta;
                    }
                    let entering_value = if dir > T::zero() { theta } else { self.ub[q] - theta };
                    let leaving = self.basis[row];
                    self.state[leaving] = if to_upper { ColState::Upper } else { ColState::Lower };
                    self.basis[row] = q;
                    self.state[q] = ColState::Basic(row);
                    self.xb[row] = entering_value;
                    self.pivot(row, q);
                }
            }
        }
    }

    /// Basic values from B⁻¹b and the nonbasic columns resting at their upper bound.
    fn recompute_xb(&mut self) {
        self.xb.copy_from_slice(&self.beta);
        for j in 0..self.ncols {
            if self.state[j] != ColState::Upper || self.ub[j] == T::zero() {
                continue;
            }
            let u = self.ub[j];
            for i in 0..self.m {
                let a = self.a[i * self.ncols + j];
                if a != T::zero() {
                    self.xb[i] = self.xb[i] - a * u;
                }
            }
        }
    }

    /// Moves basic structurals and slacks sitting on a bound slightly inside
    /// it. The shifts are deterministic and differ from row to row.
    fn perturb(&mut self, round: usize) {
        let base = T::lit(1e-7 * (1 << (2 * round)) as f64);
        for i in 0..self.m {
            let b = self.basis[i];
            if b >= self.art_start {
                continue;
            }
            let h = (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 40;
            let mut e = base * (T::one() + T::lit(h as f64 / (1u64 << 24) as f64));
            let u = self.ub[b];
            if u.is_finite() {
                e = e.min(u * T::lit(0.25));
            }
            if self.xb[i] <= e {
                self.xb[i] = self.xb[i] + e;
            } else if u.is_finite() && u - self.xb[i] <= e {
                self.xb[i] = self.xb[i] - e;
            }
        }
    }

    /// Dual simplex passes restoring primal feasibility of a dual-feasible
    /// basis, used once perturbations are removed.
    fn dual_cleanup(&mut self, iter_cap: usize) -> Result<(), SolverError> {
        loop {
            if self.iterations >= iter_cap {
                return Err(SolverError::Numerical(format!(
                    "simplex iteration cap {iter_cap} reached in cleanup"
                )));
            }
            // most violated basic value
            let mut leave: Option<(usize, T, bool)> = None;
            for i in 0..self.m {
                let b = self.basis[i];
                let (viol, to_upper) = if self.xb[i] < -self.ftol {
                    (-self.xb[i], false)
                } else if self.ub[b].is_finite() && self.xb[i] > self.ub[b] + self.ftol {
                    (self.xb[i] - self.ub[b], true)
                } else {
                    continue;
                };
                if leave.map_or(true, |(_, v, _)| viol > v) {
                    leave = Some((i, viol, to_upper));
                }
            }
            let Some((r, _, to_upper)) = leave else {
                return Ok(());
            };
            let target = if to_upper { self.ub[self.basis[r]] } else { T::zero() };
            let need = target - self.xb[r];

            // entering column: keeps reduced costs sign-feasible for the longest step
            let row = &self.a[r * self.ncols..(r + 1) * self.ncols];
            let rowmax = row.iter().fold(T::one(), |m, a| m.max(a.abs()));
            let tol = self.piv_tol * rowmax;
            let mut enter: Option<(usize, T, T)> = None;
            for (j, &a) in row.iter().enumerate() {
                if a.abs() <= tol || self.ub[j] == T::zero() {
                    continue;
                }
                let dir = match self.state[j] {
                    ColState::Lower => T::one(),
                    ColState::Upper => -T::one(),
                    ColState::Basic(_) => continue,
                };
                // moving x_j by dir changes xb_r by −a·dir
                if (-a * dir) * need <= T::zero() {
                    continue;
                }
                let ratio = self.d[j].abs() / a.abs();
                let better = match enter {
                    None => true,
                    Some((_, br, ba)) => ratio < br || (ratio == br && a.abs() > ba),
                };
                if better {
                    enter = Some((j, ratio, a.abs()));
                }
            }
            let Some((q, _, _)) = enter else {
                return Err(SolverError::Numerical(format!(
                    "row {r} stays infeasible after perturbation is removed"
                )));
            };
            self.iterations += 1;
            self.collect_column(q);
            let alpha_rq = self.at(r, q);
            let delta = -need / alpha_rq;
            for k in 0..self.col_nz.len() {
                let (i, alpha) = self.col_nz[k];
                self.xb[i] = self.xb[i] - alpha * delta;
            }
            let start = if self.state[q] == ColState::Upper { self.ub[q] } else { T::zero() };
            let leaving = self.basis[r];
            self.state[leaving] = if to_upper { ColState::Upper } else { ColState::Lower };
            self.basis[r] = q;
            self.state[q] = ColState::Basic(r);
            self.xb[r] = start + delta;
            self.pivot(r, q);
        }
    }

    /// Gauss-Jordan pivot on `(r, q)`; `col_nz` must hold column `q`.
    fn pivot(&mut self, r: usize, q: usize) {
        let nc = self.ncols;
        let inv = T::one() / self.a[r * nc + q];
        let br = self.beta[r] * inv;
        for &(i, alpha) in &self.col_nz {
            if i != r {
                self.beta[i] = self.beta[i] - alpha * br;
            }
        }
        self.beta[r] = br;
        self.row_nz.clear();
        {
            let row = &mut self.a[r * nc..(r + 1) * nc];
            for (j, v) in row.iter_mut().enumerate() {
                if *v != T::zero() {
                    let w = *v * inv;
                    if w.abs() < self.zero_tol {
                        *v = T::zero();
                    } else {
                        *v = w;
                        self.row_nz.push((j, w));
                    }
                }
            }
            row[q] = T::one();
        }
        for k in 0..self.col_nz.len() {
            let (i, _) = self.col_nz[k];
            if i == r {
                continue;
            }
            let row = &mut self.a[i * nc..(i + 1) * nc];
            let f = row[q];
            if f == T::zero() {
                continue;
            }
            for &(j, w) in &self.row_nz {
                let v = row[j] - f * w;
                row[j] = if v.abs() < self.zero_tol { T::zero() } else { v };
            }
            row[q] = T::zero();
        }
        let f = self.d[q];
        if f != T::zero() {
            for &(j, w) in &self.row_nz {
                self.d[j] = self.d[j] - f * w;
            }
        }
        self.d[q] = T::zero();
    }
}
