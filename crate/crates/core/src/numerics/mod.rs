//! Dense linear algebra sized for the small systems of the exchange
//! iteration, plus a two-phase simplex solver for the join and certification
//! linear programs.

mod simplex;

pub use simplex::{
    simplex_solve, simplex_solve_capped, LpProblem, LpSolution, LpStatus, Relation, Sense,
    VarBounds,
};

use std::ops::{Index, IndexMut};

use thiserror::Error;

/// Relative pivot threshold below which elimination declares a matrix
/// singular.
pub const SINGULAR_PIVOT_REL: f64 = 1e-12;

/// Relative pivot threshold for numerical rank decisions.
pub const RANK_PIVOT_REL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("singular matrix: column {column} pivot {pivot:.3e} under threshold {threshold:.3e}")]
    SingularMatrix {
        column: usize,
        pivot: f64,
        threshold: f64,
    },
    #[error("dependence space has dimension {nullity} (rank {rank}); expected a single dependence")]
    NullSpaceDimension { rank: usize, nullity: usize },
    #[error("simplex stopped at the pivot cap of {limit}")]
    IterationLimit { limit: usize },
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        DenseMatrix {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    /// Builds from explicit rows; panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty(), "matrix needs at least one row");
        let cols = rows[0].len();
        assert!(cols > 0, "matrix needs at least one column");
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            entries.extend_from_slice(r);
        }
        DenseMatrix {
            rows: rows.len(),
            cols,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "vector length mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.entries.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.entries[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.entries[i * self.cols + j]
    }
}

/// Solves M x = b by row-pivoted Gaussian elimination.
///
/// A pivot is rejected, and the matrix declared singular, when its magnitude
/// falls to `SINGULAR_PIVOT_REL` times the largest magnitude the column held
/// in the initial matrix.
pub fn solve_dense(m: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, NumericsError> {
    assert_eq!(m.rows(), m.cols(), "system matrix must be square");
    assert_eq!(b.len(), m.rows(), "right-hand side length mismatch");
    let n = m.rows();
    let mut a = m.clone();
    let mut x = b.to_vec();

    let mut col_scale = vec![0.0_f64; n];
    for i in 0..n {
        for (j, scale) in col_scale.iter_mut().enumerate() {
            *scale = scale.max(a[(i, j)].abs());
        }
    }

    for col in 0..n {
        let mut piv_row = col;
        let mut piv_abs = a[(col, col)].abs();
        for r in col + 1..n {
            let v = a[(r, col)].abs();
            if v > piv_abs {
                piv_abs = v;
                piv_row = r;
            }
        }
        let threshold = SINGULAR_PIVOT_REL * col_scale[col];
        if piv_abs <= threshold {
            return Err(NumericsError::SingularMatrix {
                column: col,
                pivot: piv_abs,
                threshold,
            });
        }
        a.swap_rows(col, piv_row);
        x.swap(col, piv_row);
        let pivot = a[(col, col)];
        for r in col + 1..n {
            let factor = a[(r, col)] / pivot;
            if factor == 0.0 {
                continue;
            }
            a[(r, col)] = 0.0;
            for j in col + 1..n {
                a[(r, j)] -= factor * a[(col, j)];
            }
            x[r] -= factor * x[col];
        }
    }

    for col in (0..n).rev() {
        let mut acc = x[col];
        for j in col + 1..n {
            acc -= a[(col, j)] * x[j];
        }
        x[col] = acc / a[(col, col)];
    }
    Ok(x)
}

/// Affine dependence of p+2 points in R^p: the nonzero lambda with
/// sum(lambda) = 0 and sum(lambda_i * point_i) = 0.
///
/// The output is oriented so its first significant component is positive and
/// scaled so the positive part sums to 1; the sign pattern is the partition
/// of the points into two sets with intersecting convex hulls.
pub fn affine_dependence(points: &[Vec<f64>]) -> Result<Vec<f64>, NumericsError> {
    let m = points.len();
    assert!(m >= 2, "need at least two points");
    let p = points[0].len();
    assert!(
        points.iter().all(|q| q.len() == p),
        "points must share a dimension"
    );
    assert_eq!(m, p + 2, "need exactly p+2 points in R^p");

    // stacked (p+1) x (p+2) system: coordinate rows, then the all-ones row
    let rows = p + 1;
    let cols = m;
    let mut a = DenseMatrix::zeros(rows, cols);
    for (j, q) in points.iter().enumerate() {
        for (i, c) in q.iter().enumerate() {
            a[(i, j)] = *c;
        }
        a[(p, j)] = 1.0;
    }

    let mut scale = 0.0_f64;
    for i in 0..rows {
        for j in 0..cols {
            scale = scale.max(a[(i, j)].abs());
        }
    }
    let threshold = RANK_PIVOT_REL * scale;

    // Gauss-Jordan with row pivoting, tracking pivot columns
    let mut pivot_cols: Vec<(usize, usize)> = Vec::new(); // (pivot row, column)
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let mut piv_row = rank;
        let mut piv_abs = a[(rank, col)].abs();
        for r in rank + 1..rows {
            let v = a[(r, col)].abs();
            if v > piv_abs {
                piv_abs = v;
                piv_row = r;
            }
        }
        if piv_abs <= threshold {
            continue;
        }
        a.swap_rows(rank, piv_row);
        let pivot = a[(rank, col)];
        for j in 0..cols {
            a[(rank, j)] /= pivot;
        }
        for r in 0..rows {
            if r == rank {
                continue;
            }
            let factor = a[(r, col)];
            if factor == 0.0 {
                continue;
            }
            for j in 0..cols {
                a[(r, j)] -= factor * a[(rank, j)];
            }
        }
        pivot_cols.push((rank, col));
        rank += 1;
    }

    if rank < rows {
        return Err(NumericsError::NullSpaceDimension {
            rank,
            nullity: cols - rank,
        });
    }

    let free_col = (0..cols)
        .find(|c| pivot_cols.iter().all(|(_, pc)| pc != c))
        .expect("rank p+1 leaves one free column");
    let mut lambda = vec![0.0; cols];
    lambda[free_col] = 1.0;
    for (row, col) in &pivot_cols {
        lambda[*col] = -a[(*row, free_col)];
    }

    normalize_dependence(&mut lambda);
    Ok(lambda)
}

/// Orient so the first significant component is positive, then scale the
/// positive part to sum to 1. A dependence always carries both signs, so the
/// positive sum is nonzero.
fn normalize_dependence(lambda: &mut [f64]) {
    let largest = lambda.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let lead = lambda
        .iter()
        .find(|v| v.abs() > 1e-9 * largest)
        .copied()
        .unwrap_or(1.0);
    let orient = if lead < 0.0 { -1.0 } else { 1.0 };
    let positive_sum: f64 = lambda
        .iter()
        .map(|v| orient * v)
        .filter(|v| *v > 0.0)
        .sum();
    for v in lambda.iter_mut() {
        *v = orient * *v / positive_sum;
    }
}

/// True iff the difference vectors point_i - point_0 have full numerical
/// rank. Zero or one point is vacuously independent.
pub fn affine_independent(points: &[Vec<f64>]) -> bool {
    if points.len() <= 1 {
        return true;
    }
    let p = points[0].len();
    assert!(
        points.iter().all(|q| q.len() == p),
        "points must share a dimension"
    );
    let k = points.len() - 1;
    if k > p {
        return false;
    }
    let mut a = DenseMatrix::zeros(k, p);
    for i in 0..k {
        for j in 0..p {
            a[(i, j)] = points[i + 1][j] - points[0][j];
        }
    }
    let mut scale = 0.0_f64;
    for i in 0..k {
        for j in 0..p {
            scale = scale.max(a[(i, j)].abs());
        }
    }
    if scale == 0.0 {
        return false;
    }
    let threshold = RANK_PIVOT_REL * scale;

    // row echelon; count pivots
    let mut rank = 0;
    for col in 0..p {
        if rank == k {
            break;
        }
        let mut piv_row = rank;
        let mut piv_abs = a[(rank, col)].abs();
        for r in rank + 1..k {
            let v = a[(r, col)].abs();
            if v > piv_abs {
                piv_abs = v;
                piv_row = r;
            }
        }
        if piv_abs <= threshold {
            continue;
        }
        a.swap_rows(rank, piv_row);
        for r in rank + 1..k {
            let factor = a[(r, col)] / a[(rank, col)];
            if factor == 0.0 {
                continue;
            }
            for j in col..p {
                a[(r, j)] -= factor * a[(rank, j)];
            }
        }
        rank += 1;
    }
    rank == k
}
