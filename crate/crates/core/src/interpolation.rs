//! The equal-deviation system: for a signed set of n+2 grid points, the
//! unique coefficients and deviation making the residual exactly +sigma on
//! one side and -sigma on the other.

use thiserror::Error;

use crate::geometry::{
    lift_indices, radon_partition, GeometryError, LiftedPoint, RadonDecomposition,
    WEIGHT_DEGENERACY_TOL,
};
use crate::numerics::{affine_dependence, affine_independent, solve_dense, DenseMatrix, NumericsError};
use crate::problem::{BasisFamily, CoefficientVector, DiscreteDomain};

/// |sigma| at or below this is treated as an exact-fit degeneracy.
pub const DEGENERATE_SIGMA_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum InterpolationError {
    #[error("basis index {index} out of range for a domain of {len} points")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("index {index} appears on both sides of the basis")]
    OverlappingSides { index: usize },
    #[error("each side of a signed basis needs at least one point")]
    EmptySide,
    #[error("basis has {points} points where the family needs {expected}")]
    WrongSize { points: usize, expected: usize },
    #[error(
        "equal-deviation system is singular: column {column} pivot {pivot:.3e} \
         under threshold {threshold:.3e}"
    )]
    SingularSystem {
        column: usize,
        pivot: f64,
        threshold: f64,
    },
    #[error("lifted points admit no strict two-sided split")]
    DegenerateGeometry(#[from] GeometryError),
    #[error("the basis split disagrees with the Radon partition of its lifted points")]
    PartitionMismatch,
    #[error("lifted points excluding index {omitted} are affinely dependent")]
    DependentSubset { omitted: usize },
    #[error("equal-deviation residual {residual:.3e} exceeds {tol:.3e} after solving")]
    VerificationFailure { residual: f64, tol: f64 },
}

/// n+2 domain indices split into a +sigma side and a -sigma side. Both
/// sides are kept sorted, nonempty and disjoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedBasis {
    pos: Vec<usize>,
    neg: Vec<usize>,
}

impl SignedBasis {
    pub fn new(
        pos: Vec<usize>,
        neg: Vec<usize>,
        domain_len: usize,
    ) -> Result<Self, InterpolationError> {
        if pos.is_empty() || neg.is_empty() {
            return Err(InterpolationError::EmptySide);
        }
        let mut pos = pos;
        let mut neg = neg;
        pos.sort_unstable();
        neg.sort_unstable();
        for &i in pos.iter().chain(&neg) {
            if i >= domain_len {
                return Err(InterpolationError::IndexOutOfRange {
                    index: i,
                    len: domain_len,
                });
            }
        }
        for w in pos.windows(2).chain(neg.windows(2)) {
            if w[0] == w[1] {
                return Err(InterpolationError::OverlappingSides { index: w[0] });
            }
        }
        if let Some(&i) = pos.iter().find(|i| neg.binary_search(i).is_ok()) {
            return Err(InterpolationError::OverlappingSides { index: i });
        }
        Ok(SignedBasis { pos, neg })
    }

    pub fn pos(&self) -> &[usize] {
        &self.pos
    }

    pub fn neg(&self) -> &[usize] {
        &self.neg
    }

    pub fn len(&self) -> usize {
        self.pos.len() + self.neg.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, index: usize) -> bool {
        self.pos.binary_search(&index).is_ok() || self.neg.binary_search(&index).is_ok()
    }

    /// Positive side first, each side ascending.
    pub fn all_indices(&self) -> Vec<usize> {
        let mut all = self.pos.clone();
        all.extend_from_slice(&self.neg);
        all
    }

    /// The same basis with the deviation signs exchanged.
    pub fn swapped(&self) -> SignedBasis {
        SignedBasis {
            pos: self.neg.clone(),
            neg: self.pos.clone(),
        }
    }
}

/// Solved equal-deviation state for one signed basis. After normalization
/// sigma is nonnegative; `degenerate_zero` marks an exact fit where the
/// deviation carries no sign information.
#[derive(Debug, Clone)]
pub struct Interpolant {
    pub coefficients: CoefficientVector,
    pub sigma: f64,
    pub basis: SignedBasis,
    pub degenerate_zero: bool,
}

/// Assembles the (n+2)x(n+2) system: row k = (1, g1(xk), ..., gn(xk), sk)
/// with s = +1 on positive-side rows and -1 on negative-side rows, positive
/// rows first, each side in ascending index order. The right-hand side holds
/// the sampled values.
pub fn build_system(
    basis: &SignedBasis,
    family: &BasisFamily,
    domain: &DiscreteDomain,
) -> (DenseMatrix, Vec<f64>) {
    let n = family.len();
    let m = basis.len();
    let mut mat = DenseMatrix::zeros(m, n + 2);
    let mut rhs = Vec::with_capacity(m);
    for (r, (&k, sign)) in basis
        .pos
        .iter()
        .map(|k| (k, 1.0))
        .chain(basis.neg.iter().map(|k| (k, -1.0)))
        .enumerate()
    {
        let lifted = family.lift_with_one(domain.point(k));
        for (c, v) in lifted.iter().enumerate() {
            mat[(r, c)] = *v;
        }
        mat[(r, n + 1)] = sign;
        rhs.push(domain.value(k));
    }
    (mat, rhs)
}

/// Checks the basis is usable and returns its Radon decomposition oriented
/// so the positive side is the basis positive side.
///
/// In general position the lifted points must split exactly as the basis
/// claims and every leave-one-out subset of the lifted-with-leading-1
/// vectors must be affinely independent. On regular grids the dependence
/// routinely has exact zero coefficients; such a basis is still accepted
/// when the nonzero coefficients respect the claimed sides, with the
/// zero-coefficient members carried at weight zero. The equal-deviation
/// matrix stays invertible in that case because the dependence has a
/// nonzero signed sum against the side pattern, so only the split
/// structure weakens, not solvability.
pub fn verify_non_singular(
    basis: &SignedBasis,
    family: &BasisFamily,
    domain: &DiscreteDomain,
) -> Result<RadonDecomposition, InterpolationError> {
    let n = family.len();
    if basis.len() != n + 2 {
        return Err(InterpolationError::WrongSize {
            points: basis.len(),
            expected: n + 2,
        });
    }
    for &i in basis.pos.iter().chain(&basis.neg) {
        if i >= domain.len() {
            return Err(InterpolationError::IndexOutOfRange {
                index: i,
                len: domain.len(),
            });
        }
    }

    let all = basis.all_indices();
    let lifted = lift_indices(family, domain, &all);
    let decomp = match radon_partition(&lifted) {
        Ok(d) => d,
        Err(GeometryError::SingularConfiguration { .. }) => {
            return weak_split(basis, &all, &lifted)
        }
        Err(e) => return Err(e.into()),
    };
    let matches = decomp.positive_indices == basis.pos && decomp.negative_indices == basis.neg;
    let swapped = decomp.positive_indices == basis.neg && decomp.negative_indices == basis.pos;
    if !matches && !swapped {
        return Err(InterpolationError::PartitionMismatch);
    }
    let oriented = if matches {
        decomp
    } else {
        RadonDecomposition {
            positive_indices: decomp.negative_indices,
            negative_indices: decomp.positive_indices,
            weights_pos: decomp.weights_neg,
            weights_neg: decomp.weights_pos,
            radon_point: decomp.radon_point,
        }
    };

    let full: Vec<Vec<f64>> = all
        .iter()
        .map(|&k| family.lift_with_one(domain.point(k)))
        .collect();
    for omit in 0..full.len() {
        let subset: Vec<Vec<f64>> = full
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != omit)
            .map(|(_, v)| v.clone())
            .collect();
        if !affine_independent(&subset) {
            return Err(InterpolationError::DependentSubset { omitted: all[omit] });
        }
    }

    Ok(oriented)
}

/// Accepts a degenerate split: members whose dependence coefficient
/// vanishes sit in neither hull and ride along at weight zero, everyone
/// else must land on the side the basis claims, up to one global flip.
/// `all` and `lifted` follow the basis ordering, positive side first.
fn weak_split(
    basis: &SignedBasis,
    all: &[usize],
    lifted: &[LiftedPoint],
) -> Result<RadonDecomposition, InterpolationError> {
    let vectors: Vec<Vec<f64>> = lifted.iter().map(|p| p.vector.clone()).collect();
    let lambda = affine_dependence(&vectors).map_err(|e| match e {
        NumericsError::NullSpaceDimension { rank, nullity } => {
            InterpolationError::DegenerateGeometry(GeometryError::DegenerateDependence {
                rank,
                nullity,
            })
        }
        other => InterpolationError::DegenerateGeometry(GeometryError::Numerics(other)),
    })?;

    let mut agrees: Option<bool> = None;
    for (&l, &k) in lambda.iter().zip(all) {
        if l.abs() < WEIGHT_DEGENERACY_TOL {
            continue;
        }
        let on_pos = basis.pos.binary_search(&k).is_ok();
        let here = (l > 0.0) == on_pos;
        match agrees {
            None => agrees = Some(here),
            Some(a) if a != here => return Err(InterpolationError::PartitionMismatch),
            _ => {}
        }
    }
    let sgn = match agrees {
        Some(true) => 1.0,
        Some(false) => -1.0,
        None => return Err(InterpolationError::PartitionMismatch),
    };

    let weight_for = |k: usize| -> f64 {
        let slot = all.iter().position(|&a| a == k).expect("basis member");
        let w = sgn * lambda[slot];
        if w.abs() < WEIGHT_DEGENERACY_TOL {
            0.0
        } else {
            w
        }
    };
    let mut weights_pos: Vec<f64> = basis.pos.iter().map(|&k| weight_for(k)).collect();
    let mut weights_neg: Vec<f64> = basis.neg.iter().map(|&k| -weight_for(k)).collect();
    let pos_sum: f64 = weights_pos.iter().sum();
    let neg_sum: f64 = weights_neg.iter().sum();
    if pos_sum <= WEIGHT_DEGENERACY_TOL || neg_sum <= WEIGHT_DEGENERACY_TOL {
        return Err(InterpolationError::PartitionMismatch);
    }
    for w in weights_pos.iter_mut() {
        *w /= pos_sum;
    }
    for w in weights_neg.iter_mut() {
        *w /= neg_sum;
    }

    let width = lifted[0].vector.len();
    let side_point = |members: &[usize], weights: &[f64]| -> Vec<f64> {
        let mut acc = vec![0.0; width];
        for (&k, &w) in members.iter().zip(weights) {
            let slot = all.iter().position(|&a| a == k).expect("basis member");
            for (a, v) in acc.iter_mut().zip(&lifted[slot].vector) {
                *a += w * v;
            }
        }
        acc
    };
    let p_pos = side_point(&basis.pos, &weights_pos);
    let p_neg = side_point(&basis.neg, &weights_neg);
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
        return Err(InterpolationError::DegenerateGeometry(
            GeometryError::WitnessResidual { residual, tol },
        ));
    }

    Ok(RadonDecomposition {
        positive_indices: basis.pos.clone(),
        negative_indices: basis.neg.clone(),
        weights_pos,
        weights_neg,
        radon_point: p_pos,
    })
}

/// Solves the equal-deviation system for a non-singular basis and
/// normalizes the deviation sign. The residual at every basis point is
/// checked against 1e-9 * (1 + |sigma|) before the result is released.
pub fn chebyshev_interpolant(
    basis: &SignedBasis,
    family: &BasisFamily,
    domain: &DiscreteDomain,
) -> Result<Interpolant, InterpolationError> {
    verify_non_singular(basis, family, domain)?;
    let (mat, rhs) = build_system(basis, family, domain);
    let x = solve_dense(&mat, &rhs).map_err(|e| match e {
        NumericsError::SingularMatrix {
            column,
            pivot,
            threshold,
        } => InterpolationError::SingularSystem {
            column,
            pivot,
            threshold,
        },
        other => InterpolationError::DegenerateGeometry(GeometryError::Numerics(other)),
    })?;
    let n = family.len();
    let coefficients = CoefficientVector::new(x[..n + 1].to_vec());
    let sigma = x[n + 1];
    let interp = normalize_sign(Interpolant {
        coefficients,
        sigma,
        basis: basis.clone(),
        degenerate_zero: false,
    });

    let tol = 1e-9 * (1.0 + interp.sigma.abs());
    let mut worst = 0.0_f64;
    for (&k, s) in interp
        .basis
        .pos
        .iter()
        .map(|k| (k, 1.0))
        .chain(interp.basis.neg.iter().map(|k| (k, -1.0)))
    {
        let fitted = crate::problem::evaluate_model(&interp.coefficients, family, domain.point(k));
        let dev = domain.value(k) - fitted - s * interp.sigma;
        worst = worst.max(dev.abs());
    }
    if worst > tol {
        return Err(InterpolationError::VerificationFailure {
            residual: worst,
            tol,
        });
    }
    Ok(interp)
}

/// Makes the deviation nonnegative: a negative sigma swaps the sides, a
/// zero sigma (within `DEGENERATE_SIGMA_TOL`) keeps the split and sets the
/// degenerate flag.
pub fn normalize_sign(raw: Interpolant) -> Interpolant {
    if raw.sigma.abs() <= DEGENERATE_SIGMA_TOL {
        return Interpolant {
            sigma: raw.sigma.abs(),
            degenerate_zero: true,
            ..raw
        };
    }
    if raw.sigma < 0.0 {
        return Interpolant {
            sigma: -raw.sigma,
            basis: raw.basis.swapped(),
            coefficients: raw.coefficients,
            degenerate_zero: false,
        };
    }
    raw
}
