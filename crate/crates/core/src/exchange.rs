//! One exchange step: a grid point whose deviation beats the current basis
//! deviation enters the basis on the side of its residual sign, and the
//! gamma ratio rule picks the point that leaves.

use thiserror::Error;

use crate::geometry::{
    interior_join_weights, lift_indices, lift_point, GeometryError, JoinWeights,
    WEIGHT_DEGENERACY_TOL,
};
use crate::interpolation::{
    chebyshev_interpolant, verify_non_singular, Interpolant, InterpolationError, SignedBasis,
};
use crate::problem::{BasisFamily, DeviationProfile, DiscreteDomain};

/// Relative margin by which the deviation must grow for a step to count as
/// progress.
pub const PROGRESS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Positive,
    Negative,
}

#[derive(Debug, Error)]
pub enum ExchangeError {
    #[error("entering point carries weight {weight:.3e}; the step cannot make progress")]
    DegenerateExchange { weight: f64 },
    #[error(
        "deviation failed to grow: {new_sigma:.17} after {old_sigma:.17} \
         (near-singular configuration)"
    )]
    NoProgress { old_sigma: f64, new_sigma: f64 },
    /// The gamma rule built this basis but it failed the non-singularity
    /// check (a ratio tie zeroes a retained weight); recovery can swap its
    /// offending point while keeping the entering one.
    #[error("exchanged basis is singular: {source}")]
    SingularNewBasis {
        basis: SignedBasis,
        source: InterpolationError,
    },
    #[error(transparent)]
    Interpolation(#[from] InterpolationError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Everything one step inspected and decided: who entered with which sign,
/// who left from which side, and the ratio list whose minimum is gamma.
#[derive(Debug, Clone)]
pub struct ExchangeRecord {
    pub entering_index: usize,
    pub entering_sign: i8,
    pub leaving_index: usize,
    pub leaving_side: Side,
    pub gamma: f64,
    pub old_sigma: f64,
    /// (domain index, new weight / old weight), entering side first.
    pub ratios: Vec<(usize, f64)>,
}

/// Picks the point to bring into the basis: the lowest-index point of
/// maximal absolute deviation, provided that deviation exceeds
/// sigma * (1 + tol) + tol. `None` means the basis already covers the grid
/// and iteration can stop.
pub fn select_entering(profile: &DeviationProfile, sigma: f64, tol: f64) -> Option<(usize, i8)> {
    debug_assert!(sigma >= 0.0, "deviation must be normalized");
    if profile.max_abs <= sigma * (1.0 + tol) + tol {
        return None;
    }
    let k = profile.argmax_index;
    let sign = if profile.residuals[k] >= 0.0 { 1 } else { -1 };
    Some((k, sign))
}

/// Applies the gamma rule: gamma is the smallest ratio of new to old weight
/// over the old basis points, and its argmin leaves (lowest domain index on
/// exact ties). Ratios are listed entering side first, each side in the
/// order the weights were given.
pub fn select_leaving(
    old_same: &[(usize, f64)],
    old_opposite: &[(usize, f64)],
    joined: &JoinWeights,
    entering_index: usize,
    entering_sign: i8,
    old_sigma: f64,
) -> Result<ExchangeRecord, ExchangeError> {
    if joined.entering_weight <= WEIGHT_DEGENERACY_TOL {
        return Err(ExchangeError::DegenerateExchange {
            weight: joined.entering_weight,
        });
    }
    assert_eq!(old_same.len(), joined.retained_weights.len());
    assert_eq!(old_opposite.len(), joined.opposite_weights.len());

    let mut ratios: Vec<(usize, f64)> = Vec::with_capacity(old_same.len() + old_opposite.len());
    for (&(idx, old_w), &new_w) in old_same
        .iter()
        .zip(&joined.retained_weights)
        .chain(old_opposite.iter().zip(&joined.opposite_weights))
    {
        // a zero-weight member of a degenerate basis leaves for free when
        // its new weight also vanishes, and is pinned in place otherwise
        let ratio = if old_w > WEIGHT_DEGENERACY_TOL {
            new_w / old_w
        } else if new_w > WEIGHT_DEGENERACY_TOL {
            f64::INFINITY
        } else {
            0.0
        };
        ratios.push((idx, ratio));
    }

    let same_count = old_same.len();
    let mut best = 0;
    for (i, &(idx, r)) in ratios.iter().enumerate().skip(1) {
        let (bidx, br) = ratios[best];
        if r < br || (r == br && idx < bidx) {
            best = i;
        }
    }
    let (leaving_index, gamma) = ratios[best];
    let entering_side = if entering_sign >= 0 {
        Side::Positive
    } else {
        Side::Negative
    };
    let leaving_side = if best < same_count {
        entering_side
    } else {
        match entering_side {
            Side::Positive => Side::Negative,
            Side::Negative => Side::Positive,
        }
    };

    Ok(ExchangeRecord {
        entering_index,
        entering_sign,
        leaving_index,
        leaving_side,
        gamma,
        old_sigma,
        ratios,
    })
}

/// Performs one full exchange for the point of largest deviation in
/// `profile`, which must exceed the interpolant's deviation (the caller
/// decides that via `select_entering`). Returns the re-solved interpolant
/// for the new basis and the step record.
pub fn exchange_step(
    interp: &Interpolant,
    profile: &DeviationProfile,
    family: &BasisFamily,
    domain: &DiscreteDomain,
) -> Result<(Interpolant, ExchangeRecord), ExchangeError> {
    let entering_index = profile.argmax_index;
    assert!(
        profile.max_abs > interp.sigma,
        "no point deviates beyond the basis"
    );
    assert!(
        !interp.basis.contains(entering_index),
        "entering point already sits in the basis"
    );
    let entering_sign: i8 = if profile.residuals[entering_index] >= 0.0 {
        1
    } else {
        -1
    };

    let decomp = verify_non_singular(&interp.basis, family, domain)?;

    let (same_indices, same_weights, opp_indices, opp_weights) = if entering_sign >= 0 {
        (
            interp.basis.pos(),
            &decomp.weights_pos,
            interp.basis.neg(),
            &decomp.weights_neg,
        )
    } else {
        (
            interp.basis.neg(),
            &decomp.weights_neg,
            interp.basis.pos(),
            &decomp.weights_pos,
        )
    };

    let entering_lifted = lift_point(family, domain, entering_index);
    let same_lifted = lift_indices(family, domain, same_indices);
    let opp_lifted = lift_indices(family, domain, opp_indices);
    let joined = interior_join_weights(&entering_lifted, &same_lifted, &opp_lifted)?;

    let old_same: Vec<(usize, f64)> = same_indices
        .iter()
        .copied()
        .zip(same_weights.iter().copied())
        .collect();
    let old_opp: Vec<(usize, f64)> = opp_indices
        .iter()
        .copied()
        .zip(opp_weights.iter().copied())
        .collect();
    let record = select_leaving(
        &old_same,
        &old_opp,
        &joined,
        entering_index,
        entering_sign,
        interp.sigma,
    )?;

    let keep = |side: &[usize]| -> Vec<usize> {
        side.iter()
            .copied()
            .filter(|&i| i != record.leaving_index)
            .collect()
    };
    let (mut new_pos, mut new_neg) = (keep(interp.basis.pos()), keep(interp.basis.neg()));
    if entering_sign >= 0 {
        new_pos.push(entering_index);
    } else {
        new_neg.push(entering_index);
    }
    let new_basis = SignedBasis::new(new_pos, new_neg, domain.len())?;
    let new_interp = match chebyshev_interpolant(&new_basis, family, domain) {
        Ok(i) => i,
        Err(source) => {
            return Err(ExchangeError::SingularNewBasis {
                basis: new_basis,
                source,
            })
        }
    };

    let margin = PROGRESS_TOL * (1.0 + interp.sigma.abs());
    if new_interp.sigma - interp.sigma <= margin {
        return Err(ExchangeError::NoProgress {
            old_sigma: interp.sigma,
            new_sigma: new_interp.sigma,
        });
    }
    Ok((new_interp, record))
}
