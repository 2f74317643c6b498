//! Two-phase dense tableau simplex.
//!
//! Small and self-contained on purpose: the solver sees at most a few
//! thousand columns (certification and join programs are far smaller) and a
//! handful of rows, so a dense tableau with Bland fallback is both simple
//! and fast enough. Final values and duals are re-derived from the original
//! data through the optimal basis, so accumulated pivot drift never reaches
//! the caller.

use super::{solve_dense, DenseMatrix, NumericsError};

/// Primal feasibility tolerance.
const FEAS_TOL: f64 = 1e-9;
/// Reduced-cost tolerance for optimality.
const COST_TOL: f64 = 1e-9;
/// Smallest pivot magnitude eligible for the ratio test.
const PIVOT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    LessEq,
    GreaterEq,
    Equal,
}

/// Per-variable box bounds; `None` means unbounded on that side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarBounds {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl VarBounds {
    pub const NONNEGATIVE: VarBounds = VarBounds {
        lower: Some(0.0),
        upper: None,
    };
    pub const FREE: VarBounds = VarBounds {
        lower: None,
        upper: None,
    };
}

#[derive(Debug, Clone)]
pub struct LpProblem {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: DenseMatrix,
    pub relations: Vec<Relation>,
    pub rhs: Vec<f64>,
    pub bounds: Vec<VarBounds>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solver outcome. `x`, `objective_value` and `row_duals` are present only
/// for `Optimal`. `row_duals[i]` is the shadow price of constraint row i in
/// the sign convention of the original problem (rate of change of the
/// optimal objective per unit of rhs_i); it is `None` when the final basis
/// resisted the dual back-solve.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Option<Vec<f64>>,
    pub objective_value: Option<f64>,
    pub row_duals: Option<Vec<f64>>,
}

impl LpSolution {
    fn status_only(status: LpStatus) -> Self {
        LpSolution {
            status,
            x: None,
            objective_value: None,
            row_duals: None,
        }
    }
}

/// How a transformed nonnegative column maps back to an original variable.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    Shift { col: usize, offset: f64 },
    Flip { col: usize, offset: f64 },
    Split { pos_col: usize, neg_col: usize },
}

/// Solves with the default pivot cap of 50 times rows plus columns of the
/// standardized program.
pub fn simplex_solve(lp: &LpProblem) -> Result<LpSolution, NumericsError> {
    solve_inner(lp, None)
}

/// Solves with an explicit pivot cap.
pub fn simplex_solve_capped(lp: &LpProblem, cap: usize) -> Result<LpSolution, NumericsError> {
    solve_inner(lp, Some(cap))
}

struct Standardized {
    a: DenseMatrix,
    b: Vec<f64>,
    cost: Vec<f64>,
    n_real: usize,
    n_total: usize,
    basis: Vec<usize>,
    var_maps: Vec<VarMap>,
    row_flip: Vec<f64>,
    orig_rows: usize,
    sense_sgn: f64,
}

fn solve_inner(lp: &LpProblem, cap: Option<usize>) -> Result<LpSolution, NumericsError> {
    let std = match standardize(lp) {
        Some(s) => s,
        None => return Ok(LpSolution::status_only(LpStatus::Infeasible)),
    };
    let m = std.a.rows();
    let n = std.n_total;
    let cap = cap.unwrap_or(50 * (m + n));
    let bland_after = 2 * (m + n);

    let mut t = Tableau {
        a: std.a.clone(),
        b: std.b.clone(),
        basis: std.basis.clone(),
        red: vec![0.0; n],
        n_real: std.n_real,
        pivots: 0,
        cap,
        bland_after,
    };

    // phase 1: minimize the artificial total
    let phase1_cost: Vec<f64> = (0..n).map(|j| if j >= std.n_real { 1.0 } else { 0.0 }).collect();
    t.set_costs(&phase1_cost);
    t.run(true)?;
    let b_scale = std.b.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
    if t.objective(&phase1_cost) > FEAS_TOL * (1.0 + b_scale) {
        return Ok(LpSolution::status_only(LpStatus::Infeasible));
    }
    t.drive_out_artificials()?;

    // phase 2: the real costs
    t.set_costs(&std.cost);
    if !t.run(false)? {
        return Ok(LpSolution::status_only(LpStatus::Unbounded));
    }

    Ok(extract(lp, &std, &t))
}

/// Rewrites the problem over nonnegative columns with nonnegative rhs.
/// Returns None when a variable's box is empty.
fn standardize(lp: &LpProblem) -> Option<Standardized> {
    let orig_rows = lp.constraints.rows();
    let n_vars = lp.objective.len();
    assert_eq!(lp.constraints.cols(), n_vars, "objective/matrix width mismatch");
    assert_eq!(lp.rhs.len(), orig_rows, "rhs length mismatch");
    assert_eq!(lp.relations.len(), orig_rows, "relations length mismatch");
    assert_eq!(lp.bounds.len(), n_vars, "bounds length mismatch");
    let sense_sgn = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };

    // transformed structural columns plus pending two-sided bound rows
    let mut var_maps = Vec::with_capacity(n_vars);
    let mut col_cost: Vec<f64> = Vec::new();
    let mut col_sign: Vec<f64> = Vec::new(); // factor applied to the source column
    let mut col_src: Vec<usize> = Vec::new();
    let mut offsets: Vec<(usize, f64)> = Vec::new(); // (source var, offset) for rhs
    let mut bound_rows: Vec<(usize, f64)> = Vec::new(); // (column, upper value)

    for (j, bnd) in lp.bounds.iter().enumerate() {
        match (bnd.lower, bnd.upper) {
            (Some(l), Some(u)) => {
                if l > u {
                    return None;
                }
                let col = col_cost.len();
                var_maps.push(VarMap::Shift { col, offset: l });
                col_cost.push(sense_sgn * lp.objective[j]);
                col_sign.push(1.0);
                col_src.push(j);
                offsets.push((j, l));
                bound_rows.push((col, u - l));
            }
            (Some(l), None) => {
                let col = col_cost.len();
                var_maps.push(VarMap::Shift { col, offset: l });
                col_cost.push(sense_sgn * lp.objective[j]);
                col_sign.push(1.0);
                col_src.push(j);
                if l != 0.0 {
                    offsets.push((j, l));
                }
            }
            (None, Some(u)) => {
                let col = col_cost.len();
                var_maps.push(VarMap::Flip { col, offset: u });
                col_cost.push(-sense_sgn * lp.objective[j]);
                col_sign.push(-1.0);
                col_src.push(j);
                offsets.push((j, u));
            }
            (None, None) => {
                let pos = col_cost.len();
                var_maps.push(VarMap::Split {
                    pos_col: pos,
                    neg_col: pos + 1,
                });
                col_cost.push(sense_sgn * lp.objective[j]);
                col_cost.push(-sense_sgn * lp.objective[j]);
                col_sign.push(1.0);
                col_sign.push(-1.0);
                col_src.push(j);
                col_src.push(j);
            }
        }
    }

    let n_struct = col_cost.len();
    let m = orig_rows + bound_rows.len();

    // structural part and shifted rhs, then row flips to make rhs >= 0
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rhs: Vec<f64> = Vec::with_capacity(m);
    let mut rels: Vec<Relation> = Vec::with_capacity(m);
    let mut row_flip = vec![1.0_f64; m];

    for i in 0..orig_rows {
        let src = lp.constraints.row(i);
        let mut row: Vec<f64> = (0..n_struct).map(|c| col_sign[c] * src[col_src[c]]).collect();
        let mut b = lp.rhs[i];
        for (j, off) in &offsets {
            b -= src[*j] * off;
        }
        let mut rel = lp.relations[i];
        if b < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
            b = -b;
            rel = match rel {
                Relation::LessEq => Relation::GreaterEq,
                Relation::GreaterEq => Relation::LessEq,
                Relation::Equal => Relation::Equal,
            };
            row_flip[i] = -1.0;
        }
        rows.push(row);
        rhs.push(b);
        rels.push(rel);
    }
    for (col, ub) in &bound_rows {
        let mut row = vec![0.0; n_struct];
        row[*col] = 1.0;
        rows.push(row);
        rhs.push(*ub);
        rels.push(Relation::LessEq);
    }

    // slack and surplus columns, then artificials; basis starts as the
    // identity formed by slacks and artificials
    let n_slack = rels
        .iter()
        .filter(|r| !matches!(r, Relation::Equal))
        .count();
    let n_artificial = rels
        .iter()
        .filter(|r| !matches!(r, Relation::LessEq))
        .count();
    let n_real = n_struct + n_slack;
    let n_total = n_real + n_artificial;

    let mut a = DenseMatrix::zeros(m, n_total);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            a[(i, j)] = *v;
        }
    }
    let mut basis = vec![usize::MAX; m];
    let mut next_slack = n_struct;
    let mut next_artificial = n_real;
    for (i, rel) in rels.iter().enumerate() {
        match rel {
            Relation::LessEq => {
                a[(i, next_slack)] = 1.0;
                basis[i] = next_slack;
                next_slack += 1;
            }
            Relation::GreaterEq => {
                a[(i, next_slack)] = -1.0;
                next_slack += 1;
                a[(i, next_artificial)] = 1.0;
                basis[i] = next_artificial;
                next_artificial += 1;
            }
            Relation::Equal => {
                a[(i, next_artificial)] = 1.0;
                basis[i] = next_artificial;
                next_artificial += 1;
            }
        }
    }

    let mut cost = vec![0.0; n_total];
    cost[..n_struct].copy_from_slice(&col_cost);

    Some(Standardized {
        a,
        b: rhs,
        cost,
        n_real,
        n_total,
        basis,
        var_maps,
        row_flip,
        orig_rows,
        sense_sgn,
    })
}

struct Tableau {
    a: DenseMatrix,
    b: Vec<f64>,
    basis: Vec<usize>,
    red: Vec<f64>,
    n_real: usize,
    pivots: usize,
    cap: usize,
    bland_after: usize,
}

impl Tableau {
    /// Recomputes reduced costs c_j - c_B . (B^-1 A)_j for the given costs.
    fn set_costs(&mut self, cost: &[f64]) {
        let m = self.a.rows();
        let cb: Vec<f64> = self.basis.iter().map(|&j| cost[j]).collect();
        for j in 0..self.a.cols() {
            let z: f64 = (0..m).map(|r| cb[r] * self.a[(r, j)]).sum();
            self.red[j] = cost[j] - z;
        }
        for &bj in &self.basis {
            self.red[bj] = 0.0;
        }
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        self.basis
            .iter()
            .zip(&self.b)
            .map(|(&j, v)| cost[j] * v)
            .sum()
    }

    /// Runs to optimality for the current costs. Returns false on an
    /// unbounded ray (only meaningful in phase 2).
    fn run(&mut self, phase_one: bool) -> Result<bool, NumericsError> {
        loop {
            if self.pivots >= self.cap {
                return Err(NumericsError::IterationLimit { limit: self.cap });
            }
            let bland = self.pivots >= self.bland_after;
            let Some(pc) = self.price(bland) else {
                return Ok(true);
            };
            let Some(pr) = self.ratio_test(pc) else {
                // phase 1 is bounded below by zero, so a ray here is noise;
                // stop and let the feasibility check decide
                return Ok(phase_one);
            };
            self.pivot(pr, pc);
        }
    }

    /// Entering column: most negative reduced cost, or lowest index under
    /// Bland's rule. Artificial columns never re-enter.
    fn price(&self, bland: bool) -> Option<usize> {
        let mut best: Option<usize> = None;
        for j in 0..self.n_real {
            if self.red[j] < -COST_TOL {
                if bland {
                    return Some(j);
                }
                if best.map_or(true, |b| self.red[j] < self.red[b]) {
                    best = Some(j);
                }
            }
        }
        best
    }

    /// Leaving row: minimum ratio, ties broken toward the lowest basic
    /// variable index.
    fn ratio_test(&self, pc: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.a.rows() {
            let d = self.a[(r, pc)];
            if d <= PIVOT_TOL {
                continue;
            }
            let ratio = self.b[r] / d;
            match best {
                None => best = Some((r, ratio)),
                Some((br, bratio)) => {
                    let tie = 1e-12 * (1.0 + bratio.abs());
                    if ratio < bratio - tie {
                        best = Some((r, ratio));
                    } else if (ratio - bratio).abs() <= tie && self.basis[r] < self.basis[br] {
                        best = Some((r, ratio));
                    }
                }
            }
        }
        best.map(|(r, _)| r)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let m = self.a.rows();
        let n = self.a.cols();
        let piv = self.a[(pr, pc)];
        for j in 0..n {
            self.a[(pr, j)] /= piv;
        }
        self.b[pr] /= piv;
        self.a[(pr, pc)] = 1.0;
        for r in 0..m {
            if r == pr {
                continue;
            }
            let f = self.a[(r, pc)];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                self.a[(r, j)] -= f * self.a[(pr, j)];
            }
            self.b[r] -= f * self.b[pr];
            self.a[(r, pc)] = 0.0;
        }
        let f = self.red[pc];
        if f != 0.0 {
            for j in 0..n {
                self.red[j] -= f * self.a[(pr, j)];
            }
            self.red[pc] = 0.0;
        }
        self.basis[pr] = pc;
        self.pivots += 1;
    }

    /// Replaces basic artificials with real columns where possible; a row
    /// offering no real pivot is redundant and its artificial stays parked
    /// at zero (such a row can never change again).
    fn drive_out_artificials(&mut self) -> Result<(), NumericsError> {
        for r in 0..self.a.rows() {
            if self.basis[r] < self.n_real {
                continue;
            }
            if self.pivots >= self.cap {
                return Err(NumericsError::IterationLimit { limit: self.cap });
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n_real {
                let v = self.a[(r, j)].abs();
                if v > PIVOT_TOL && best.map_or(true, |(_, bv)| v > bv) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                self.pivot(r, j);
            }
        }
        Ok(())
    }
}

/// Re-derives the final point, objective and duals from the original data
/// through the optimal basis.
fn extract(lp: &LpProblem, std: &Standardized, t: &Tableau) -> LpSolution {
    let m = std.a.rows();

    let mut bmat = DenseMatrix::zeros(m, m);
    for (r, &bc) in t.basis.iter().enumerate() {
        for i in 0..m {
            bmat[(i, r)] = std.a[(i, bc)];
        }
    }
    let xb = solve_dense(&bmat, &std.b).unwrap_or_else(|_| t.b.clone());

    let b_scale = std.b.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
    let clamp = FEAS_TOL * (1.0 + b_scale);
    let mut x_std = vec![0.0; std.n_total];
    for (r, &bc) in t.basis.iter().enumerate() {
        let v = xb[r];
        x_std[bc] = if v < 0.0 && v >= -clamp { 0.0 } else { v };
    }

    let mut x = vec![0.0; lp.objective.len()];
    for (j, map) in std.var_maps.iter().enumerate() {
        x[j] = match *map {
            VarMap::Shift { col, offset } => offset + x_std[col],
            VarMap::Flip { col, offset } => offset - x_std[col],
            VarMap::Split { pos_col, neg_col } => x_std[pos_col] - x_std[neg_col],
        };
    }
    let objective_value: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();

    let mut btrans = DenseMatrix::zeros(m, m);
    for (r, &bc) in t.basis.iter().enumerate() {
        for i in 0..m {
            btrans[(r, i)] = std.a[(i, bc)];
        }
    }
    let cb: Vec<f64> = t.basis.iter().map(|&j| std.cost[j]).collect();
    let row_duals = solve_dense(&btrans, &cb).ok().map(|y| {
        (0..std.orig_rows)
            .map(|i| std.sense_sgn * std.row_flip[i] * y[i])
            .collect()
    });

    LpSolution {
        status: LpStatus::Optimal,
        x: Some(x),
        objective_value: Some(objective_value),
        row_duals,
    }
}
