//! Convex geometry in the lifted space: Radon partitions of n+2 points,
//! relative-interior join weights for an entering point, and the
//! hull-intersection test behind the optimality certificate.
//!
//! All of it happens in the g-part of the lifted vectors. The leading 1 every
//! lifted point shares adds nothing to affine relations, so hull intersection
//! in the full lifted space and in the g-space agree.

use thiserror::Error;

use crate::numerics::{
    affine_dependence, simplex_solve, DenseMatrix, LpProblem, LpSolution, LpStatus, NumericsError,
    Relation, Sense, VarBounds,
};
use crate::problem::{BasisFamily, DiscreteDomain};

/// Dependence coefficients at or below this magnitude disqualify a
/// configuration from carrying a strict Radon partition.
pub const WEIGHT_DEGENERACY_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error(
        "singular configuration: dependence coefficient {value:.3e} at position {position} \
         is within {WEIGHT_DEGENERACY_TOL:.0e} of zero"
    )]
    SingularConfiguration { position: usize, value: f64 },
    #[error("singular configuration: dependence space has rank {rank} and dimension {nullity}")]
    DegenerateDependence { rank: usize, nullity: usize },
    #[error(
        "hulls admit no common point with entering participation \
         (best minimum weight {min_weight:.3e}, entering weight {entering_weight:.3e})"
    )]
    EmptyIntersection {
        min_weight: f64,
        entering_weight: f64,
    },
    #[error("intersection witness residual {residual:.3e} exceeds {tol:.3e}")]
    WitnessResidual { residual: f64, tol: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// A domain point mapped through the basis family: vector = (g1(x), ..., gn(x)).
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedPoint {
    pub source_index: usize,
    pub vector: Vec<f64>,
}

pub fn lift_point(family: &BasisFamily, domain: &DiscreteDomain, index: usize) -> LiftedPoint {
    LiftedPoint {
        source_index: index,
        vector: family.lift(domain.point(index)),
    }
}

pub fn lift_indices(
    family: &BasisFamily,
    domain: &DiscreteDomain,
    indices: &[usize],
) -> Vec<LiftedPoint> {
    indices
        .iter()
        .map(|&k| lift_point(family, domain, k))
        .collect()
}

/// Radon partition of n+2 points: two sides whose convex hulls share the
/// Radon point. Sides are sorted by source index, weights aligned with
/// them, each side's weights summing to 1. `radon_partition` itself fills
/// every weight strictly positive; degenerate-basis callers may carry
/// members at weight zero.
#[derive(Debug, Clone)]
pub struct RadonDecomposition {
    pub positive_indices: Vec<usize>,
    pub negative_indices: Vec<usize>,
    pub weights_pos: Vec<f64>,
    pub weights_neg: Vec<f64>,
    pub radon_point: Vec<f64>,
}

impl RadonDecomposition {
    /// Weight attached to a source index, with the side it sits on
    /// (+1 positive, -1 negative).
    pub fn weight_of(&self, source_index: usize) -> Option<(f64, i8)> {
        if let Some(p) = self.positive_indices.iter().position(|&i| i == source_index) {
            return Some((self.weights_pos[p], 1));
        }
        self.negative_indices
            .iter()
            .position(|&i| i == source_index)
            .map(|p| (self.weights_neg[p], -1))
    }
}

pub fn radon_partition(lifted: &[LiftedPoint]) -> Result<RadonDecomposition, GeometryError> {
    assert!(lifted.len() >= 2, "need at least two lifted points");
    let n = lifted[0].vector.len();
    assert_eq!(lifted.len(), n + 2, "need exactly n+2 points in g-space");

    let vectors: Vec<Vec<f64>> = lifted.iter().map(|p| p.vector.clone()).collect();
    let lambda = match affine_dependence(&vectors) {
        Ok(l) => l,
        Err(NumericsError::NullSpaceDimension { rank, nullity }) => {
            return Err(GeometryError::DegenerateDependence { rank, nullity })
        }
        Err(other) => return Err(GeometryError::Numerics(other)),
    };
    for (i, &v) in lambda.iter().enumerate() {
        if v.abs() < WEIGHT_DEGENERACY_TOL {
            return Err(GeometryError::SingularConfiguration { position: i, value: v });
        }
    }

    let mut pos: Vec<(usize, f64, usize)> = Vec::new(); // (source, weight, input slot)
    let mut neg: Vec<(usize, f64, usize)> = Vec::new();
    for (i, (&l, p)) in lambda.iter().zip(lifted).enumerate() {
        if l > 0.0 {
            pos.push((p.source_index, l, i));
        } else {
            neg.push((p.source_index, -l, i));
        }
    }
    pos.sort_by_key(|e| e.0);
    neg.sort_by_key(|e| e.0);

    let point_from = |side: &[(usize, f64, usize)]| -> Vec<f64> {
        let mut acc = vec![0.0; n];
        for &(_, w, slot) in side {
            for (a, v) in acc.iter_mut().zip(&lifted[slot].vector) {
                *a += w * v;
            }
        }
        acc
    };
    let p_pos = point_from(&pos);
    let p_neg = point_from(&neg);
    let scale = lifted
        .iter()
        .flat_map(|p| p.vector.iter())
        .fold(0.0_f64, |s, v| s.max(v.abs()));
    let tol = 1e-9 * (1.0 + scale);
    let residual = p_pos
        .iter()
        .zip(&p_neg)
        .fold(0.0_f64, |s, (a, b)| s.max((a - b).abs()));
    if residual > tol {
        return Err(GeometryError::WitnessResidual { residual, tol });
    }

    Ok(RadonDecomposition {
        positive_indices: pos.iter().map(|e| e.0).collect(),
        negative_indices: neg.iter().map(|e| e.0).collect(),
        weights_pos: pos.iter().map(|e| e.1).collect(),
        weights_neg: neg.iter().map(|e| e.1).collect(),
        radon_point: p_pos,
    })
}

/// Convex weights placing one point in both hulls after a new point joins
/// one side. `retained_weights` follows the order of `same_side`,
/// `opposite_weights` the order of `other_side`.
#[derive(Debug, Clone)]
pub struct JoinWeights {
    pub entering_weight: f64,
    pub retained_weights: Vec<f64>,
    pub opposite_weights: Vec<f64>,
    pub min_weight: f64,
}

/// Finds convex weights for conv(same_side + entering) and conv(other_side)
/// meeting at one point, maximizing the smallest weight so the witness sits
/// in both relative interiors whenever that is possible.
///
/// Exchange steps pass n+3 points in total (the n+2 basis points plus the
/// entering one); any counts are accepted. Fails with `EmptyIntersection`
/// when no common point gives the entering point real participation.
pub fn interior_join_weights(
    entering: &LiftedPoint,
    same_side: &[LiftedPoint],
    other_side: &[LiftedPoint],
) -> Result<JoinWeights, GeometryError> {
    let n = entering.vector.len();
    assert!(!other_side.is_empty(), "opposite side is empty");
    for p in same_side.iter().chain(other_side) {
        assert_eq!(p.vector.len(), n, "mixed lifted dimensions");
    }
    let k = same_side.len();
    let l = other_side.len();

    // columns: alpha, alpha~_1..k, beta~_1..l, t
    let cols = 1 + k + l + 1;
    let t_col = cols - 1;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rels: Vec<Relation> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();

    for c in 0..n {
        let mut row = vec![0.0; cols];
        row[0] = entering.vector[c];
        for (i, p) in same_side.iter().enumerate() {
            row[1 + i] = p.vector[c];
        }
        for (j, q) in other_side.iter().enumerate() {
            row[1 + k + j] = -q.vector[c];
        }
        rows.push(row);
        rels.push(Relation::Equal);
        rhs.push(0.0);
    }
    let mut sum_pos = vec![0.0; cols];
    for slot in sum_pos.iter_mut().take(1 + k) {
        *slot = 1.0;
    }
    rows.push(sum_pos);
    rels.push(Relation::Equal);
    rhs.push(1.0);
    let mut sum_neg = vec![0.0; cols];
    for slot in sum_neg.iter_mut().skip(1 + k).take(l) {
        *slot = 1.0;
    }
    rows.push(sum_neg);
    rels.push(Relation::Equal);
    rhs.push(1.0);
    // every weight dominates t
    for w in 0..1 + k + l {
        let mut row = vec![0.0; cols];
        row[w] = 1.0;
        row[t_col] = -1.0;
        rows.push(row);
        rels.push(Relation::GreaterEq);
        rhs.push(0.0);
    }

    let mut objective = vec![0.0; cols];
    objective[t_col] = 1.0;
    let mut bounds = vec![VarBounds::NONNEGATIVE; cols];
    bounds[t_col] = VarBounds::FREE;

    let lp = LpProblem {
        sense: Sense::Maximize,
        objective,
        constraints: DenseMatrix::from_rows(&rows),
        relations: rels,
        rhs,
        bounds,
    };
    let sol = simplex_solve(&lp)?;
    let x = match (sol.status, sol.x) {
        (LpStatus::Optimal, Some(x)) => x,
        _ => {
            return Err(GeometryError::EmptyIntersection {
                min_weight: f64::NEG_INFINITY,
                entering_weight: f64::NEG_INFINITY,
            })
        }
    };
    let min_weight = x[t_col];
    let entering_weight = x[0];
    if min_weight <= WEIGHT_DEGENERACY_TOL && entering_weight <= WEIGHT_DEGENERACY_TOL {
        return Err(GeometryError::EmptyIntersection {
            min_weight,
            entering_weight,
        });
    }

    let retained_weights: Vec<f64> = x[1..1 + k].to_vec();
    let opposite_weights: Vec<f64> = x[1 + k..1 + k + l].to_vec();

    let mut p_pos = entering.vector.iter().map(|v| entering_weight * v).collect::<Vec<_>>();
    for (w, p) in retained_weights.iter().zip(same_side) {
        for (a, v) in p_pos.iter_mut().zip(&p.vector) {
            *a += w * v;
        }
    }
    let mut p_neg = vec![0.0; n];
    for (w, q) in opposite_weights.iter().zip(other_side) {
        for (a, v) in p_neg.iter_mut().zip(&q.vector) {
            *a += w * v;
        }
    }
    let scale = entering
        .vector
        .iter()
        .chain(same_side.iter().flat_map(|p| p.vector.iter()))
        .chain(other_side.iter().flat_map(|p| p.vector.iter()))
        .fold(0.0_f64, |s, v| s.max(v.abs()));
    let tol = 1e-9 * (1.0 + scale);
    let residual = p_pos
        .iter()
        .zip(&p_neg)
        .fold(0.0_f64, |s, (a, b)| s.max((a - b).abs()));
    if residual > tol {
        return Err(GeometryError::WitnessResidual { residual, tol });
    }

    Ok(JoinWeights {
        entering_weight,
        retained_weights,
        opposite_weights,
        min_weight,
    })
}

/// Convex weights putting one point in both hulls, with the witness point
/// and its reproduction residual.
#[derive(Debug, Clone)]
pub struct HullCertificate {
    pub weights_plus: Vec<f64>,
    pub weights_minus: Vec<f64>,
    pub common_point: Vec<f64>,
    pub residual: f64,
}

/// Why no certificate was produced: the measured gap between the hulls, or
/// an abnormal solver status.
#[derive(Debug, Clone)]
pub struct HullRefusal {
    pub status: LpStatus,
    pub gap: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum HullIntersection {
    Certificate(HullCertificate),
    Refusal(HullRefusal),
}

/// Tests whether the convex hulls of the two lifted sets intersect, by
/// minimizing the max-norm gap between one point of each hull. A gap within
/// `tol` yields a certificate; otherwise the refusal reports the gap.
pub fn hulls_intersect(
    g_plus: &[LiftedPoint],
    g_minus: &[LiftedPoint],
    tol: f64,
) -> Result<HullIntersection, GeometryError> {
    assert!(!g_plus.is_empty() && !g_minus.is_empty(), "empty side");
    let n = g_plus[0].vector.len();
    let p = g_plus.len();
    let q = g_minus.len();

    // columns: u_1..p, v_1..q, eps
    let cols = p + q + 1;
    let eps_col = cols - 1;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rels: Vec<Relation> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for c in 0..n {
        let mut diff = vec![0.0; cols];
        for (i, gp) in g_plus.iter().enumerate() {
            diff[i] = gp.vector[c];
        }
        for (j, gm) in g_minus.iter().enumerate() {
            diff[p + j] = -gm.vector[c];
        }
        let mut upper = diff.clone();
        upper[eps_col] = -1.0;
        rows.push(upper);
        rels.push(Relation::LessEq);
        rhs.push(0.0);
        let mut lower = diff;
        lower[eps_col] = 1.0;
        rows.push(lower);
        rels.push(Relation::GreaterEq);
        rhs.push(0.0);
    }
    let mut sum_u = vec![0.0; cols];
    for slot in sum_u.iter_mut().take(p) {
        *slot = 1.0;
    }
    rows.push(sum_u);
    rels.push(Relation::Equal);
    rhs.push(1.0);
    let mut sum_v = vec![0.0; cols];
    for slot in sum_v.iter_mut().skip(p).take(q) {
        *slot = 1.0;
    }
    rows.push(sum_v);
    rels.push(Relation::Equal);
    rhs.push(1.0);

    let mut objective = vec![0.0; cols];
    objective[eps_col] = 1.0;

    let lp = LpProblem {
        sense: Sense::Minimize,
        objective,
        constraints: DenseMatrix::from_rows(&rows),
        relations: rels,
        rhs,
        bounds: vec![VarBounds::NONNEGATIVE; cols],
    };
    let sol: LpSolution = simplex_solve(&lp)?;
    let x = match (sol.status, sol.x) {
        (LpStatus::Optimal, Some(x)) => x,
        (status, _) => {
            return Ok(HullIntersection::Refusal(HullRefusal { status, gap: None }))
        }
    };
    let gap = x[eps_col];

    let mut pu = vec![0.0; n];
    for (w, gp) in x[..p].iter().zip(g_plus) {
        for (a, v) in pu.iter_mut().zip(&gp.vector) {
            *a += w * v;
        }
    }
    let mut pv = vec![0.0; n];
    for (w, gm) in x[p..p + q].iter().zip(g_minus) {
        for (a, v) in pv.iter_mut().zip(&gm.vector) {
            *a += w * v;
        }
    }
    let residual = pu
        .iter()
        .zip(&pv)
        .fold(0.0_f64, |s, (a, b)| s.max((a - b).abs()));

    if gap > tol || residual > tol {
        return Ok(HullIntersection::Refusal(HullRefusal {
            status: LpStatus::Infeasible,
            gap: Some(gap.max(residual)),
        }));
    }

    let common_point: Vec<f64> = pu.iter().zip(&pv).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(HullIntersection::Certificate(HullCertificate {
        weights_plus: x[..p].to_vec(),
        weights_minus: x[p..p + q].to_vec(),
        common_point,
        residual,
    }))
}
