//! Two-phase revised simplex with a dense basis inverse and periodic
//! refactorization.
//!
//! The incentive-compatibility programs built in this crate have far more
//! constraints than variables (every ordered type pair contributes a row), so
//! `simplex_solve` pivots on the dual when the row/column ratio is lopsided:
//! the dual basis is square in the number of primal variables, and the primal
//! solution is read off the simplex multipliers at optimality.

use crate::error::{Error, Result};

/// Inequality sense of a constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// What a row encodes; used by reporting and tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowLabel {
    Ic,
    Ir,
    UnitDemand,
    Other,
}

/// One sparse constraint row `sum coeffs . x  (sense)  rhs`.
#[derive(Debug, Clone)]
pub struct RowSpec {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub label: RowLabel,
}

/// A general-form maximization LP with per-variable bounds.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub n_vars: usize,
    /// Objective coefficients (maximization).
    pub objective: Vec<f64>,
    pub rows: Vec<RowSpec>,
    /// `(lo, hi)` per variable; infinities mark free directions.
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            objective: vec![0.0; n_vars],
            rows: Vec::new(),
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); n_vars],
        }
    }

    pub fn rows_with_label(&self, label: RowLabel) -> usize {
        self.rows.iter().filter(|r| r.label == label).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimplexStatus {
    Optimal,
    Unbounded,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub status: SimplexStatus,
    pub objective: f64,
    pub primal: Vec<f64>,
    pub iterations: usize,
}

const REDUCED_COST_TOL: f64 = 1e-9;
const FEASIBILITY_TOL: f64 = 1e-8;
const PIVOT_TOL: f64 = 1e-8;
const RATIO_SLACK: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
const BLAND_AFTER_DEGENERATE: usize = 50;
const MAX_PIVOTS: usize = 1_000_000;

/// Solves the LP, choosing the primal or dual pivoting side automatically.
pub fn simplex_solve(lp: &LinearProgram) -> Result<SimplexResult> {
    validate_lp(lp)?;
    let bound_rows = lp
        .bounds
        .iter()
        .map(|(lo, hi)| (lo.is_finite() as usize) + (hi.is_finite() as usize))
        .sum::<usize>();
    let total_rows = lp.rows.len() + bound_rows;
    if total_rows >= 2 * lp.n_vars && total_rows > 256 {
        solve_via_dual(lp)
    } else {
        solve_primal(lp)
    }
}

fn validate_lp(lp: &LinearProgram) -> Result<()> {
    if lp.objective.len() != lp.n_vars || lp.bounds.len() != lp.n_vars {
        return Err(Error::Solver("objective/bounds length mismatch".into()));
    }
    for (r, row) in lp.rows.iter().enumerate() {
        for &(j, v) in &row.coeffs {
            if j >= lp.n_vars {
                return Err(Error::Solver(format!("row {r} references variable {j}")));
            }
            if !v.is_finite() {
                return Err(Error::Solver(format!("row {r} has non-finite coefficient")));
            }
        }
        if !row.rhs.is_finite() {
            return Err(Error::Solver(format!("row {r} has non-finite rhs")));
        }
    }
    Ok(())
}

/// The primal LP flattened to `max c.x, A x <= b, x free`: every finite bound
/// becomes a row. This is the form whose dual is a pure standard-form LP.
struct Flattened {
    /// One sparse column per ROW of the flattened primal.
    cols: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
}

fn flatten(lp: &LinearProgram) -> Flattened {
    let mut cols = Vec::new();
    let mut rhs = Vec::new();
    for row in &lp.rows {
        match row.sense {
            Sense::Le => {
                cols.push(row.coeffs.clone());
                rhs.push(row.rhs);
            }
            Sense::Ge => {
                cols.push(row.coeffs.iter().map(|&(j, v)| (j, -v)).collect());
                rhs.push(-row.rhs);
            }
            Sense::Eq => {
                cols.push(row.coeffs.clone());
                rhs.push(row.rhs);
                cols.push(row.coeffs.iter().map(|&(j, v)| (j, -v)).collect());
                rhs.push(-row.rhs);
            }
        }
    }
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        if hi.is_finite() {
            cols.push(vec![(j, 1.0)]);
            rhs.push(hi);
        }
        if lo.is_finite() {
            cols.push(vec![(j, -1.0)]);
            rhs.push(-lo);
        }
    }
    Flattened { cols, rhs }
}

/// Dual route: `min b.y  s.t.  A' y = c, y >= 0`. At optimality the simplex
/// multipliers of the dual are an optimal primal point.
fn solve_via_dual(lp: &LinearProgram) -> Result<SimplexResult> {
    let flat = flatten(lp);
    let core = StandardForm {
        n_rows: lp.n_vars,
        columns: flat.cols,
        costs: flat.rhs.clone(),
        rhs: lp.objective.clone(),
    };
    let outcome = solve_standard_form(core)?;
    match outcome.status {
        SimplexStatus::Optimal => {
            let primal = outcome.multipliers;
            let objective = lp
                .objective
                .iter()
                .zip(&primal)
                .map(|(c, x)| c * x)
                .sum::<f64>();
            let dual_objective: f64 = flat
                .rhs
                .iter()
                .zip(&outcome.solution)
                .map(|(b, y)| b * y)
                .sum();
            let scale = 1.0 + objective.abs().max(dual_objective.abs());
            if (objective - dual_objective).abs() > 1e-5 * scale {
                return Err(Error::Solver(format!(
                    "duality gap {:.3e} between recovered point ({objective}) and dual optimum ({dual_objective})",
                    objective - dual_objective
                )));
            }
            Ok(SimplexResult {
                status: SimplexStatus::Optimal,
                objective,
                primal,
                iterations: outcome.iterations,
            })
        }
        // An unbounded dual certifies primal infeasibility.
        SimplexStatus::Unbounded => Ok(SimplexResult {
            status: SimplexStatus::Infeasible,
            objective: f64::NAN,
            primal: vec![0.0; lp.n_vars],
            iterations: outcome.iterations,
        }),
        // An infeasible dual means the primal is unbounded or infeasible;
        // settle it on the primal side (only reachable for small programs).
        SimplexStatus::Infeasible => solve_primal(lp),
        SimplexStatus::IterationLimit => Ok(SimplexResult {
            status: SimplexStatus::IterationLimit,
            objective: f64::NAN,
            primal: vec![0.0; lp.n_vars],
            iterations: outcome.iterations,
        }),
    }
}

/// Primal route through the standard form: shift/split variables onto
/// `x >= 0` and add slacks.
fn solve_primal(lp: &LinearProgram) -> Result<SimplexResult> {
    #[derive(Clone, Copy)]
    enum VarMap {
        /// `x = lo + z_k`
        Shifted { k: usize, lo: f64 },
        /// `x = hi - z_k`
        Flipped { k: usize, hi: f64 },
        /// `x = z_plus - z_minus`
        Split { plus: usize, minus: usize },
    }

    let mut map = Vec::with_capacity(lp.n_vars);
    let mut n_std = 0usize;
    let mut upper_rows: Vec<(usize, f64)> = Vec::new();
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        if lo.is_finite() {
            map.push(VarMap::Shifted { k: n_std, lo });
            if hi.is_finite() {
                upper_rows.push((j, hi - lo));
            }
            n_std += 1;
        } else if hi.is_finite() {
            map.push(VarMap::Flipped { k: n_std, hi });
            n_std += 1;
        } else {
            map.push(VarMap::Split {
                plus: n_std,
                minus: n_std + 1,
            });
            n_std += 2;
        }
    }

    // Substituted coefficient and constant offset of variable j.
    let subst = |j: usize, v: f64, coeffs: &mut Vec<(usize, f64)>, constant: &mut f64| match map[j]
    {
        VarMap::Shifted { k, lo } => {
            coeffs.push((k, v));
            *constant += v * lo;
        }
        VarMap::Flipped { k, hi } => {
            coeffs.push((k, -v));
            *constant += v * hi;
        }
        VarMap::Split { plus, minus } => {
            coeffs.push((plus, v));
            coeffs.push((minus, -v));
        }
    };

    type StdRow = (Vec<(usize, f64)>, Sense, f64);
    let mut rows: Vec<StdRow> = Vec::new();
    for row in &lp.rows {
        let mut coeffs = Vec::with_capacity(row.coeffs.len() + 2);
        let mut constant = 0.0;
        for &(j, v) in &row.coeffs {
            subst(j, v, &mut coeffs, &mut constant);
        }
        rows.push((coeffs, row.sense, row.rhs - constant));
    }
    for &(j, width) in &upper_rows {
        let k = match map[j] {
            VarMap::Shifted { k, .. } => k,
            _ => unreachable!(),
        };
        rows.push((vec![(k, 1.0)], Sense::Le, width));
    }

    // Standard form: append slack/surplus variables to make equalities. The
    // constant offset from shifted variables drops out of the argmax and the
    // objective is recomputed from the recovered point at the end.
    let m = rows.len();
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_std];
    let mut costs = vec![0.0; n_std];
    for (j, &c) in lp.objective.iter().enumerate() {
        let mut coeffs = Vec::new();
        let mut constant = 0.0;
        subst(j, c, &mut coeffs, &mut constant);
        for (k, v) in coeffs {
            costs[k] -= v; // core minimizes
        }
    }
    for (i, (coeffs, sense, _)) in rows.iter().enumerate() {
        for &(k, v) in coeffs {
            columns[k].push((i, v));
        }
        match sense {
            Sense::Le => {
                columns.push(vec![(i, 1.0)]);
                costs.push(0.0);
            }
            Sense::Ge => {
                columns.push(vec![(i, -1.0)]);
                costs.push(0.0);
            }
            Sense::Eq => {}
        }
    }
    let rhs: Vec<f64> = rows.iter().map(|(_, _, b)| *b).collect();

    let core = StandardForm {
        n_rows: m,
        columns,
        costs,
        rhs,
    };
    let outcome = solve_standard_form(core)?;
    let status = outcome.status;
    if status != SimplexStatus::Optimal {
        return Ok(SimplexResult {
            status,
            objective: f64::NAN,
            primal: vec![0.0; lp.n_vars],
            iterations: outcome.iterations,
        });
    }
    let z = &outcome.solution;
    let primal: Vec<f64> = map
        .iter()
        .map(|m| match *m {
            VarMap::Shifted { k, lo } => lo + z[k],
            VarMap::Flipped { k, hi } => hi - z[k],
            VarMap::Split { plus, minus } => z[plus] - z[minus],
        })
        .collect();
    let objective = lp
        .objective
        .iter()
        .zip(&primal)
        .map(|(c, x)| c * x)
        .sum::<f64>();
    Ok(SimplexResult {
        status,
        objective,
        primal,
        iterations: outcome.iterations,
    })
}

/// `min costs.z  s.t.  columns z = rhs, z >= 0`.
struct StandardForm {
    n_rows: usize,
    columns: Vec<Vec<(usize, f64)>>,
    costs: Vec<f64>,
    rhs: Vec<f64>,
}

struct CoreOutcome {
    status: SimplexStatus,
    /// Values of the structural variables (artificials excluded).
    solution: Vec<f64>,
    /// Simplex multipliers of the final basis under the phase-2 costs.
    multipliers: Vec<f64>,
    iterations: usize,
}

/// Compressed sparse column storage; one contiguous arena for all columns.
struct ColumnStore {
    ptr: Vec<usize>,
    idx: Vec<u32>,
    val: Vec<f64>,
}

impl ColumnStore {
    fn from_columns(columns: &[Vec<(usize, f64)>]) -> Self {
        let nnz = columns.iter().map(Vec::len).sum();
        let mut ptr = Vec::with_capacity(columns.len() + 1);
        let mut idx = Vec::with_capacity(nnz);
        let mut val = Vec::with_capacity(nnz);
        ptr.push(0);
        for col in columns {
            for &(i, v) in col {
                idx.push(i as u32);
                val.push(v);
            }
            ptr.push(idx.len());
        }
        Self { ptr, idx, val }
    }

    #[inline]
    fn range(&self, j: usize) -> std::ops::Range<usize> {
        self.ptr[j]..self.ptr[j + 1]
    }

    fn len(&self) -> usize {
        self.ptr.len() - 1
    }
}

struct Tableau {
    m: usize,
    /// Structural columns then `m` artificial unit columns.
    columns: ColumnStore,
    costs: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    /// Dense row-major inverse of the basis matrix.
    binv: Vec<f64>,
    xb: Vec<f64>,
    pivots_since_refactor: usize,
}

impl Tableau {
    fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.columns
            .range(j)
            .map(move |k| (self.columns.idx[k] as usize, self.columns.val[k]))
    }

    fn n_cols(&self) -> usize {
        self.columns.len()
    }

    fn refactorize(&mut self) -> Result<()> {
        let m = self.m;
        // Gauss-Jordan on [B | I].
        let mut aug = vec![0.0; m * 2 * m];
        for (r, &j) in self.basis.iter().enumerate() {
            for (i, v) in self.column(j) {
                aug[i * 2 * m + r] = v;
            }
        }
        for i in 0..m {
            aug[i * 2 * m + m + i] = 1.0;
        }
        for col in 0..m {
            // Partial pivoting.
            let mut piv = col;
            let mut best = aug[col * 2 * m + col].abs();
            for r in col + 1..m {
                let v = aug[r * 2 * m + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-12 {
                return Err(Error::Solver(
                    "singular basis during refactorization".into(),
                ));
            }
            if piv != col {
                for k in 0..2 * m {
                    aug.swap(col * 2 * m + k, piv * 2 * m + k);
                }
            }
            let d = aug[col * 2 * m + col];
            for k in 0..2 * m {
                aug[col * 2 * m + k] /= d;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let factor = aug[r * 2 * m + col];
                if factor != 0.0 {
                    for k in 0..2 * m {
                        aug[r * 2 * m + k] -= factor * aug[col * 2 * m + k];
                    }
                }
            }
        }
        for i in 0..m {
            for k in 0..m {
                self.binv[i * m + k] = aug[i * 2 * m + m + k];
            }
        }
        // Refresh basic values from scratch; tolerate roundoff-level
        // negativity but refuse a basis that has genuinely lost feasibility.
        for i in 0..m {
            let mut acc = 0.0;
            for k in 0..m {
                acc += self.binv[i * m + k] * self.rhs[k];
            }
            if acc < -1e-6 {
                return Err(Error::Solver(format!(
                    "basic value {acc:.3e} infeasible at refactorization"
                )));
            }
            self.xb[i] = acc.max(0.0);
        }
        self.pivots_since_refactor = 0;
        Ok(())
    }

    fn multipliers(&self, costs: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut pi = vec![0.0; m];
        for (r, &j) in self.basis.iter().enumerate() {
            let c = costs[j];
            if c != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (p, &b) in pi.iter_mut().zip(row) {
                    *p += c * b;
                }
            }
        }
        pi
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        for (i, v) in self.column(j) {
            for (r, slot) in w.iter_mut().enumerate() {
                *slot += self.binv[r * m + i] * v;
            }
        }
        w
    }

    fn pivot(&mut self, entering: usize, leaving_row: usize, w: &[f64]) {
        let m = self.m;
        let wr = w[leaving_row];
        let theta = self.xb[leaving_row] / wr;
        for (i, (value, &step)) in self.xb.iter_mut().zip(w).enumerate() {
            if i != leaving_row {
                *value -= theta * step;
                if *value < 0.0 && *value > -FEASIBILITY_TOL {
                    *value = 0.0;
                }
            }
        }
        self.xb[leaving_row] = theta;
        // Row operations keep binv the exact inverse of the new basis.
        let row_r: Vec<f64> = self.binv[leaving_row * m..(leaving_row + 1) * m]
            .iter()
            .map(|v| v / wr)
            .collect();
        for (i, row) in self.binv.chunks_exact_mut(m).enumerate() {
            if i == leaving_row {
                continue;
            }
            let factor = w[i];
            if factor != 0.0 {
                for (cell, &rv) in row.iter_mut().zip(&row_r) {
                    *cell -= factor * rv;
                }
            }
        }
        self.binv[(leaving_row * m)..(leaving_row * m + m)].copy_from_slice(&row_r);
        self.in_basis[self.basis[leaving_row]] = false;
        self.in_basis[entering] = true;
        self.basis[leaving_row] = entering;
        self.pivots_since_refactor += 1;
    }
}

fn solve_standard_form(core: StandardForm) -> Result<CoreOutcome> {
    let m = core.n_rows;
    let n_structural = core.columns.len();

    // Normalize right-hand sides to be nonnegative by flipping rows.
    let mut sign = vec![1.0f64; m];
    let mut rhs = core.rhs.clone();
    for i in 0..m {
        if rhs[i] < 0.0 {
            sign[i] = -1.0;
            rhs[i] = -rhs[i];
        }
    }

    // Degeneracy guard for the large IC systems: jitter the right-hand side
    // by a deterministic sub-tolerance amount so ratio-test ties vanish, and
    // restore the true values once the optimal basis is known (reduced costs
    // do not depend on the right-hand side, so optimality is unaffected).
    let rhs_true = rhs.clone();
    let perturbed = m > 64;
    if perturbed {
        let scale = rhs.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
        for (i, v) in rhs.iter_mut().enumerate() {
            let jitter =
                ((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 40) as f64 / (1u64 << 24) as f64;
            *v += 1e-9 * scale * (0.5 + jitter);
        }
    }
    let mut columns: Vec<Vec<(usize, f64)>> = core
        .columns
        .iter()
        .map(|col| col.iter().map(|&(i, v)| (i, v * sign[i])).collect())
        .collect();
    // Artificial unit columns form the phase-1 basis.
    for i in 0..m {
        columns.push(vec![(i, 1.0)]);
    }

    let mut phase1_costs = vec![0.0; n_structural];
    phase1_costs.resize(n_structural + m, 1.0);
    let mut phase2_costs = core.costs.clone();
    phase2_costs.resize(n_structural + m, 0.0);

    let n_total = n_structural + m;
    let mut in_basis = vec![false; n_total];
    for flag in in_basis.iter_mut().skip(n_structural) {
        *flag = true;
    }
    let store = ColumnStore::from_columns(&columns);
    columns.clear();
    let mut tab = Tableau {
        m,
        columns: store,
        costs: phase1_costs,
        rhs,
        basis: (n_structural..n_structural + m).collect(),
        in_basis,
        binv: {
            let mut id = vec![0.0; m * m];
            for i in 0..m {
                id[i * m + i] = 1.0;
            }
            id
        },
        xb: Vec::new(),
        pivots_since_refactor: 0,
    };
    tab.xb = tab.rhs.clone();

    let artificial_start = n_structural;
    let mut iterations = 0usize;

    // Phase 1: drive the artificial infeasibility to zero.
    let status = run_phase(&mut tab, artificial_start, &mut iterations)?;
    if status == SimplexStatus::IterationLimit {
        return Ok(CoreOutcome {
            status,
            solution: vec![0.0; n_structural],
            multipliers: vec![0.0; m],
            iterations,
        });
    }
    if status == SimplexStatus::Unbounded {
        return Err(Error::Solver("phase 1 reported unbounded".into()));
    }
    let infeasibility: f64 = tab
        .basis
        .iter()
        .zip(&tab.xb)
        .filter(|(&j, _)| j >= artificial_start)
        .map(|(_, &v)| v)
        .sum();
    if infeasibility > 1e-7 {
        return Ok(CoreOutcome {
            status: SimplexStatus::Infeasible,
            solution: vec![0.0; n_structural],
            multipliers: vec![0.0; m],
            iterations,
        });
    }

    // Phase 2 on the real costs; artificials stay priced out.
    tab.costs = phase2_costs;
    let status = run_phase(&mut tab, artificial_start, &mut iterations)?;

    if perturbed && status == SimplexStatus::Optimal {
        // Evaluate the optimal basis on the unperturbed right-hand side; the
        // refactorization itself verifies feasibility survived.
        tab.rhs = rhs_true;
        tab.refactorize()?;
    }

    let mut solution = vec![0.0; n_structural];
    for (r, &j) in tab.basis.iter().enumerate() {
        if j < n_structural {
            solution[j] = tab.xb[r].max(0.0);
        }
    }
    let mut multipliers = tab.multipliers(&tab.costs);
    for i in 0..m {
        multipliers[i] *= sign[i];
    }
    Ok(CoreOutcome {
        status,
        solution,
        multipliers,
        iterations,
    })
}

fn run_phase(
    tab: &mut Tableau,
    artificial_start: usize,
    iterations: &mut usize,
) -> Result<SimplexStatus> {
    let mut consecutive_degenerate = 0usize;
    loop {
        if *iterations >= MAX_PIVOTS {
            return Ok(SimplexStatus::IterationLimit);
        }
        if tab.pivots_since_refactor >= REFACTOR_EVERY {
            tab.refactorize()?;
        }
        let pi = tab.multipliers(&tab.costs);
        let bland = consecutive_degenerate >= BLAND_AFTER_DEGENERATE;

        // Pricing: Dantzig by default, Bland once degeneracy stalls.
        // Artificial columns start basic and are never allowed back in.
        let mut entering: Option<usize> = None;
        let mut best = -REDUCED_COST_TOL;
        let idx = &tab.columns.idx;
        let val = &tab.columns.val;
        for j in 0..artificial_start.min(tab.n_cols()) {
            if tab.in_basis[j] {
                continue;
            }
            let mut d = tab.costs[j];
            for k in tab.columns.range(j) {
                d -= pi[idx[k] as usize] * val[k];
            }
            if bland {
                if d < -REDUCED_COST_TOL {
                    entering = Some(j);
                    break;
                }
            } else if d < best {
                best = d;
                entering = Some(j);
            }
        }
        let Some(entering) = entering else {
            return Ok(SimplexStatus::Optimal);
        };

        let w = tab.ftran(entering);

        // Harris-style two-pass ratio test: find the tolerance-relaxed bound
        // first, then pick the numerically strongest pivot among the rows
        // that stay within it. Artificials are preferred out of the basis.
        let mut theta_bound = f64::INFINITY;
        for (&step, &value) in w.iter().zip(&tab.xb) {
            if step > PIVOT_TOL {
                theta_bound = theta_bound.min((value + RATIO_SLACK) / step);
            }
        }
        if theta_bound.is_infinite() {
            return Ok(SimplexStatus::Unbounded);
        }
        let mut leaving: Option<usize> = None;
        let mut best_pivot = 0.0;
        let mut min_ratio = f64::INFINITY;
        for (r, (&step, &value)) in w.iter().zip(&tab.xb).enumerate() {
            if step > PIVOT_TOL {
                let ratio = value / step;
                min_ratio = min_ratio.min(ratio);
                if ratio <= theta_bound {
                    let candidate_is_artificial = tab.basis[r] >= artificial_start;
                    let better = match leaving {
                        None => true,
                        Some(cur) => {
                            let cur_is_artificial = tab.basis[cur] >= artificial_start;
                            if candidate_is_artificial != cur_is_artificial {
                                candidate_is_artificial
                            } else if bland {
                                tab.basis[r] < tab.basis[cur]
                            } else {
                                step > best_pivot
                            }
                        }
                    };
                    if better {
                        best_pivot = step;
                        leaving = Some(r);
                    }
                }
            }
        }
        let leaving = leaving.expect("a finite ratio bound implies an eligible row");

        if min_ratio <= FEASIBILITY_TOL {
            consecutive_degenerate += 1;
        } else {
            consecutive_degenerate = 0;
        }
        tab.pivot(entering, leaving, &w);
        *iterations += 1;
    }
}
