//! Reference solution of the discrete minimax problem as a linear program,
//! kept independent of the exchange machinery so the two can check each
//! other.
//!
//! The grid form (minimize sigma subject to two inequalities per point) has
//! 2m rows, too many for a dense tableau. Solved instead in its dual form,
//! which has n+2 rows and 2m columns: maximize sum f_k (u_k - v_k) subject
//! to sum (u_k - v_k) (1, g(x_k)) = 0, sum (u_k + v_k) = 1, u, v >= 0.
//! The shadow prices of those rows are exactly the model coefficients and
//! the deviation.

use thiserror::Error;

use crate::numerics::{
    simplex_solve, DenseMatrix, LpProblem, LpStatus, NumericsError, Relation, Sense, VarBounds,
};
use crate::problem::{evaluate_model, BasisFamily, CoefficientVector, DiscreteDomain};

/// Largest grid the dense formulation accepts (2m primal constraints).
pub const MAX_ORACLE_POINTS: usize = 10_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("grid of {points} points exceeds the oracle cap of {max}")]
    TooLarge { points: usize, max: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("reference program ended {status:?}; it is feasible and bounded by construction")]
    Unsolved { status: LpStatus },
    #[error("reference program returned no shadow prices to recover coefficients from")]
    NoDuals,
    #[error(
        "recovered coefficients deviate by {max_abs:.12} but the program reports {sigma:.12}"
    )]
    Verification { max_abs: f64, sigma: f64 },
}

/// Best uniform deviation and witnessing coefficients over the grid.
pub fn lp_minimax(
    domain: &DiscreteDomain,
    family: &BasisFamily,
) -> Result<(CoefficientVector, f64), OracleError> {
    assert_eq!(domain.dim(), family.dim(), "domain/family dimension mismatch");
    let m = domain.len();
    if m > MAX_ORACLE_POINTS {
        return Err(OracleError::TooLarge {
            points: m,
            max: MAX_ORACLE_POINTS,
        });
    }
    let n = family.len();
    let rows = n + 2;
    let cols = 2 * m;

    let mut constraints = DenseMatrix::zeros(rows, cols);
    let mut objective = vec![0.0; cols];
    for k in 0..m {
        let lifted = family.lift_with_one(domain.point(k));
        for (j, v) in lifted.iter().enumerate() {
            constraints[(j, k)] = *v;
            constraints[(j, m + k)] = -v;
        }
        constraints[(n + 1, k)] = 1.0;
        constraints[(n + 1, m + k)] = 1.0;
        objective[k] = domain.value(k);
        objective[m + k] = -domain.value(k);
    }
    let mut rhs = vec![0.0; rows];
    rhs[n + 1] = 1.0;

    let lp = LpProblem {
        sense: Sense::Maximize,
        objective,
        constraints,
        relations: vec![Relation::Equal; rows],
        rhs,
        bounds: vec![VarBounds::NONNEGATIVE; cols],
    };
    let sol = simplex_solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(OracleError::Unsolved { status: sol.status });
    }
    let sigma = sol.objective_value.expect("optimal solutions carry a value");
    let duals = sol.row_duals.ok_or(OracleError::NoDuals)?;
    let coefficients = CoefficientVector::new(duals[..n + 1].to_vec());

    let mut max_abs = 0.0_f64;
    for k in 0..m {
        let r = domain.value(k) - evaluate_model(&coefficients, family, domain.point(k));
        max_abs = max_abs.max(r.abs());
    }
    if (max_abs - sigma).abs() > 1e-7 * (1.0 + sigma.abs()) {
        return Err(OracleError::Verification { max_abs, sigma });
    }
    Ok((coefficients, sigma.max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::BasisFn;
    use std::sync::Arc;

    fn family_x() -> BasisFamily {
        BasisFamily::new(
            1,
            vec![Arc::new(|x: &[f64]| x[0]) as Arc<BasisFn>],
            vec!["x".into()],
        )
        .unwrap()
    }

    #[test]
    fn exact_fit_has_zero_deviation() {
        let points = [0.0, 0.5, 1.0];
        let values: Vec<f64> = points.iter().map(|x| 3.0 - 2.0 * x).collect();
        let dom = DiscreteDomain::new(1, points.to_vec(), values).unwrap();
        let (a, sigma) = lp_minimax(&dom, &family_x()).unwrap();
        assert!(sigma.abs() < 1e-9);
        assert!((a.a[0] - 3.0).abs() < 1e-9);
        assert!((a.a[1] + 2.0).abs() < 1e-9);
    }

    #[test]
    fn square_against_a_line() {
        let dom = DiscreteDomain::new(1, vec![-1.0, 0.0, 1.0], vec![1.0, 0.0, 1.0]).unwrap();
        let (a, sigma) = lp_minimax(&dom, &family_x()).unwrap();
        assert!((sigma - 0.5).abs() < 1e-9);
        assert!((a.a[0] - 0.5).abs() < 1e-9);
        assert!(a.a[1].abs() < 1e-9);
    }

    #[test]
    fn exponential_slope_is_the_average_growth() {
        let points: Vec<f64> = (0..1001).map(|i| -1.0 + 2.0 * i as f64 / 1000.0).collect();
        let values: Vec<f64> = points.iter().map(|x| x.exp()).collect();
        let dom = DiscreteDomain::new(1, points, values).unwrap();
        let (a, sigma) = lp_minimax(&dom, &family_x()).unwrap();
        // the two endpoints stay extreme, forcing the slope through them
        let expect = (1.0_f64.exp() - (-1.0_f64).exp()) / 2.0;
        assert!((a.a[1] - expect).abs() < 1e-6, "slope {}", a.a[1]);
        assert!(sigma > 0.2 && sigma < 0.3, "sigma {sigma}");
    }

    #[test]
    fn oversized_grid_is_refused() {
        let m = MAX_ORACLE_POINTS + 1;
        let points: Vec<f64> = (0..m).map(|i| i as f64).collect();
        let values = vec![0.0; m];
        let dom = DiscreteDomain::new(1, points, values).unwrap();
        let err = lp_minimax(&dom, &family_x()).unwrap_err();
        assert!(matches!(err, OracleError::TooLarge { .. }));
    }
}
