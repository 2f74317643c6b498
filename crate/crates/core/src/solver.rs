//! The full iteration: choose a starting basis, solve the equal-deviation
//! system, look for a point deviating further, exchange, repeat; once no
//! point beats the basis deviation, certify optimality by intersecting the
//! lifted extreme-point hulls.

use std::collections::HashSet;
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exchange::{
    exchange_step, select_entering, ExchangeError, ExchangeRecord, Side, PROGRESS_TOL,
};
use crate::geometry::{
    hulls_intersect, lift_indices, radon_partition, HullIntersection, LiftedPoint,
    WEIGHT_DEGENERACY_TOL,
};
use crate::interpolation::{chebyshev_interpolant, verify_non_singular, Interpolant, SignedBasis};
use crate::numerics::{affine_dependence, LpStatus};
use crate::problem::{
    deviation_profile, extreme_sets, BasisFamily, CoefficientVector, DeviationProfile,
    DiscreteDomain, Problem,
};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("domain holds {available} points but the family needs {needed}")]
    InsufficientPoints { needed: usize, available: usize },
    #[error("no workable basis after {attempts} attempts: {detail}")]
    SingularBasis { attempts: usize, detail: String },
}

/// What to do when a basis turns out singular mid-run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularityPolicy {
    Fail,
    PerturbRetry,
}

/// `retry_count` budgets every perturb-retry flavor separately: swap
/// attempts when a basis fails verification, and jittered-grid restarts
/// when the walk stalls on a level set. `seed` drives all of those draws,
/// so equal seeds give byte-identical runs.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub max_iterations: usize,
    pub termination_tol: f64,
    pub singularity_policy: SingularityPolicy,
    pub retry_count: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iterations: 2000,
            termination_tol: 1e-9,
            singularity_policy: SingularityPolicy::PerturbRetry,
            retry_count: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    OptimalCertified,
    IterationLimit,
    SingularBasis,
}

/// One accepted exchange: the step record plus the deviation and basis it
/// produced.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub exchange: ExchangeRecord,
    pub sigma: f64,
    pub basis: SignedBasis,
}

/// Convex weights over the lifted extreme sets witnessing that no
/// coefficient change can reduce the maximal deviation.
#[derive(Debug, Clone)]
pub struct OptimalityCertificate {
    pub e_plus_indices: Vec<usize>,
    pub e_minus_indices: Vec<usize>,
    pub weights_plus: Vec<f64>,
    pub weights_minus: Vec<f64>,
    pub common_point: Vec<f64>,
    pub residual: f64,
}

/// Why certification was refused.
#[derive(Debug, Clone)]
pub enum RefusalReason {
    EmptyExtremeSet { side: Side },
    Separated { status: LpStatus, gap: Option<f64> },
    LpFailure { detail: String },
}

impl fmt::Display for RefusalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RefusalReason::EmptyExtremeSet { side } => {
                let name = match side {
                    Side::Positive => "positive",
                    Side::Negative => "negative",
                };
                write!(f, "the {name} extreme set is empty")
            }
            RefusalReason::Separated { status, gap } => match gap {
                Some(g) => write!(f, "extreme hulls are separated (gap {g:.3e}, {status:?})"),
                None => write!(f, "extreme hulls are separated ({status:?})"),
            },
            RefusalReason::LpFailure { detail } => {
                write!(f, "hull intersection test failed: {detail}")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum CertifyOutcome {
    Certified(OptimalityCertificate),
    Refused(RefusalReason),
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub coefficients: CoefficientVector,
    pub sigma: f64,
    pub status: SolveStatus,
    pub iterations: Vec<IterationRecord>,
    pub certificate: Option<OptimalityCertificate>,
    pub final_basis: SignedBasis,
    /// Human-readable reason when status is not optimal-certified.
    pub detail: Option<String>,
}

/// Certificate tolerance used after termination at `termination_tol`.
pub fn default_certify_tol(termination_tol: f64) -> f64 {
    (2.0 * termination_tol).max(1e-8)
}

/// Picks n+2 starting points: n+1 by greedy volume on the
/// lifted-with-leading-1 vectors, the last maximizing the smallest
/// dependence coefficient, split by the Radon partition. Under the
/// perturb-retry policy a failed non-singularity check triggers seeded
/// random swaps.
pub fn initial_basis(
    domain: &DiscreteDomain,
    family: &BasisFamily,
    opts: &SolveOptions,
) -> Result<SignedBasis, SolverError> {
    let n = family.len();
    let needed = n + 2;
    if domain.len() < needed {
        return Err(SolverError::InsufficientPoints {
            needed,
            available: domain.len(),
        });
    }

    let mut chosen = greedy_volume_points(domain, family, n + 1);
    chosen.push(pick_extending_point(domain, family, &chosen));
    chosen.sort_unstable();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut attempts = 0;
    let mut last_err: String;
    loop {
        attempts += 1;
        match basis_from_set(domain, family, &chosen) {
            Ok(basis) => return Ok(basis),
            Err(detail) => last_err = detail,
        }
        if opts.singularity_policy == SingularityPolicy::Fail || attempts > opts.retry_count {
            return Err(SolverError::SingularBasis {
                attempts,
                detail: last_err,
            });
        }
        // swap a random member for a random outside point
        let victim = rng.gen_range(0..chosen.len());
        let outside: Vec<usize> = (0..domain.len())
            .filter(|k| !chosen.contains(k))
            .collect();
        let replacement = outside[rng.gen_range(0..outside.len())];
        chosen[victim] = replacement;
        chosen.sort_unstable();
    }
}

/// Splits a candidate point set by its Radon partition and runs the full
/// non-singularity check. Errors are reported as strings for retry logic.
fn basis_from_set(
    domain: &DiscreteDomain,
    family: &BasisFamily,
    set: &[usize],
) -> Result<SignedBasis, String> {
    let lifted: Vec<LiftedPoint> = set
        .iter()
        .map(|&k| LiftedPoint {
            source_index: k,
            vector: family.lift(domain.point(k)),
        })
        .collect();
    let (pos, neg) = match radon_partition(&lifted) {
        Ok(d) => (d.positive_indices, d.negative_indices),
        Err(crate::geometry::GeometryError::SingularConfiguration { .. }) => {
            // zero-coefficient members carry no side information and any
            // side keeps the system solvable; they ride on the positive one
            let vectors: Vec<Vec<f64>> = lifted.iter().map(|p| p.vector.clone()).collect();
            let lambda = affine_dependence(&vectors).map_err(|e| e.to_string())?;
            let mut pos = Vec::new();
            let mut neg = Vec::new();
            for (&l, &k) in lambda.iter().zip(set) {
                if l < -crate::geometry::WEIGHT_DEGENERACY_TOL {
                    neg.push(k);
                } else {
                    pos.push(k);
                }
            }
            (pos, neg)
        }
        Err(e) => return Err(e.to_string()),
    };
    let basis = SignedBasis::new(pos, neg, domain.len()).map_err(|e| e.to_string())?;
    verify_non_singular(&basis, family, domain).map_err(|e| e.to_string())?;
    Ok(basis)
}

/// Greedy pivoted selection: repeatedly takes the point whose
/// lifted-with-leading-1 vector has the largest norm outside the span of
/// the points already taken.
fn greedy_volume_points(domain: &DiscreteDomain, family: &BasisFamily, count: usize) -> Vec<usize> {
    let m = domain.len();
    let mut rows: Vec<Vec<f64>> = (0..m)
        .map(|k| family.lift_with_one(domain.point(k)))
        .collect();
    let mut chosen: Vec<usize> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut best: Option<(usize, f64)> = None;
        for (k, row) in rows.iter().enumerate() {
            if chosen.contains(&k) {
                continue;
            }
            let norm2: f64 = row.iter().map(|v| v * v).sum();
            if best.map_or(true, |(_, b)| norm2 > b) {
                best = Some((k, norm2));
            }
        }
        let (pick, norm2) = best.expect("domain has enough points");
        chosen.push(pick);
        if norm2 <= f64::MIN_POSITIVE {
            // family is rank-deficient on this grid; later checks will say so
            continue;
        }
        let dir: Vec<f64> = {
            let norm = norm2.sqrt();
            rows[pick].iter().map(|v| v / norm).collect()
        };
        for row in rows.iter_mut() {
            let proj: f64 = row.iter().zip(&dir).map(|(a, b)| a * b).sum();
            for (v, d) in row.iter_mut().zip(&dir) {
                *v -= proj * d;
            }
        }
    }
    chosen
}

/// Chooses the extra point making the dependence of the g-space vectors as
/// balanced as possible: argmax over candidates of min |dependence
/// coefficient|.
fn pick_extending_point(domain: &DiscreteDomain, family: &BasisFamily, chosen: &[usize]) -> usize {
    let base: Vec<Vec<f64>> = chosen
        .iter()
        .map(|&k| family.lift(domain.point(k)))
        .collect();
    let mut best: Option<(usize, f64)> = None;
    let mut fallback = None;
    for k in 0..domain.len() {
        if chosen.contains(&k) {
            continue;
        }
        if fallback.is_none() {
            fallback = Some(k);
        }
        let mut points = base.clone();
        points.push(family.lift(domain.point(k)));
        let Ok(lambda) = affine_dependence(&points) else {
            continue;
        };
        let score = lambda.iter().fold(f64::INFINITY, |s, v| s.min(v.abs()));
        if best.map_or(true, |(_, b)| score > b) {
            best = Some((k, score));
        }
    }
    best.map(|(k, _)| k)
        .or(fallback)
        .expect("domain has more points than the basis")
}

/// Runs the exchange iteration to optimality, the iteration cap, or an
/// unrecoverable singular state.
///
/// An error is returned only when no interpolant was ever produced; once
/// any basis has solved, failures surface as a result with status
/// `SingularBasis` carrying the last good state.
pub fn solve_minimax(problem: &Problem, opts: &SolveOptions) -> Result<SolveResult, SolverError> {
    solve_loop(problem, opts, true)
}

/// `allow_restart` gates the jittered-grid restart so a restart's own
/// sub-solve can never recurse into another one.
fn solve_loop(
    problem: &Problem,
    opts: &SolveOptions,
    allow_restart: bool,
) -> Result<SolveResult, SolverError> {
    let domain = problem.domain();
    let family = problem.family();
    let mut basis = initial_basis(domain, family, opts)?;
    let mut incidents = 0;
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut current: Option<Interpolant> = None;
    let mut steps = 0;
    // stream 1 keeps recovery draws off the initial-basis sequence
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(1);
    // every basis ever held; recovery must leave this set or the walk can
    // cycle through the same singular exchanges forever
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    seen.insert(basis_signature(&basis));
    // steps since the deviation high-water mark last rose; recoveries drop
    // the level and re-climb, so only beating the mark counts as progress.
    // A long streak means the walk is orbiting a level set of
    // equal-deviation bases and one-point moves have stopped ascending
    let mut stalled = 0usize;
    let mut best_sigma = -f64::MAX;
    let stall_limit = 2 * (family.len() + 2) + 4;
    let mut restarts = 0;

    loop {
        let interp = match &current {
            Some(i) => i.clone(),
            None => match chebyshev_interpolant(&basis, family, domain) {
                Ok(i) => {
                    current = Some(i.clone());
                    i
                }
                Err(e) => {
                    if opts.singularity_policy == SingularityPolicy::Fail
                        || steps >= opts.max_iterations
                    {
                        return finish_singular(current, iterations, e.to_string(), incidents);
                    }
                    match recover_basis(problem, &basis, None, opts, &mut rng, &seen) {
                        Ok(next) => {
                            seen.insert(basis_signature(&next));
                            basis = next;
                            iterations.clear();
                            current = None;
                            incidents += 1;
                            steps += 1;
                            continue;
                        }
                        Err(detail) => {
                            return finish_singular(
                                current,
                                iterations,
                                format!("{e}; recovery failed: {detail}"),
                                incidents + 1,
                            )
                        }
                    }
                }
            },
        };

        if interp.sigma > best_sigma + PROGRESS_TOL * (1.0 + interp.sigma.abs()) {
            best_sigma = interp.sigma;
            stalled = 0;
        } else {
            stalled += 1;
        }

        let profile = deviation_profile(&interp.coefficients, problem);
        if select_entering(&profile, interp.sigma, opts.termination_tol).is_none() {
            // no point left to bring in; certify what we have
            let tol = default_certify_tol(opts.termination_tol);
            return Ok(match certify_optimality(&interp.coefficients, problem, tol) {
                CertifyOutcome::Certified(cert) => SolveResult {
                    coefficients: interp.coefficients.clone(),
                    sigma: interp.sigma,
                    status: SolveStatus::OptimalCertified,
                    iterations,
                    certificate: Some(cert),
                    final_basis: interp.basis.clone(),
                    detail: None,
                },
                CertifyOutcome::Refused(reason) => SolveResult {
                    coefficients: interp.coefficients.clone(),
                    sigma: interp.sigma,
                    status: SolveStatus::SingularBasis,
                    iterations,
                    certificate: None,
                    final_basis: interp.basis.clone(),
                    detail: Some(format!("terminated but not certified: {reason}")),
                },
            });
        }

        if steps >= opts.max_iterations {
            return Ok(SolveResult {
                coefficients: interp.coefficients.clone(),
                sigma: interp.sigma,
                status: SolveStatus::IterationLimit,
                iterations,
                certificate: None,
                final_basis: interp.basis.clone(),
                detail: Some(format!(
                    "stopped after {} exchanges with max deviation {:.6e} beyond sigma {:.6e}",
                    steps, profile.max_abs, interp.sigma
                )),
            });
        }

        match exchange_step(&interp, &profile, family, domain) {
            Ok((next, record)) => {
                iterations.push(IterationRecord {
                    exchange: record,
                    sigma: next.sigma,
                    basis: next.basis.clone(),
                });
                basis = next.basis.clone();
                seen.insert(basis_signature(&basis));
                current = Some(next);
                steps += 1;
            }
            Err(e) => {
                if opts.singularity_policy == SingularityPolicy::Fail {
                    return finish_singular(current, iterations, e.to_string(), incidents);
                }
                // after a long lateral streak one-point moves are exhausted;
                // reseat the basis on the highest-deviation points of the
                // current residual and take it only if it strictly ascends
                if stalled >= stall_limit {
                    if let Some(next) = profile_rebuild(problem, &profile, interp.sigma, &seen) {
                        seen.insert(basis_signature(&next.basis));
                        basis = next.basis.clone();
                        current = Some(next);
                        steps += 1;
                        stalled = 0;
                        continue;
                    }
                    // the level set cannot be beaten point by point; jitter
                    // the grid into general position, solve that, and carry
                    // the winning membership back as a fresh start
                    if allow_restart && restarts < opts.retry_count {
                        restarts += 1;
                        if let Some(fresh) = perturbed_restart(problem, opts, &mut rng, &seen) {
                            seen.insert(basis_signature(&fresh));
                            basis = fresh;
                            iterations.clear();
                            current = None;
                            incidents += 1;
                            steps += 1;
                            stalled = 0;
                            continue;
                        }
                    }
                }
                // the prescribed step failed; any one-point eviction that
                // admits the entering point and holds the deviation level
                // keeps the walk moving along the degenerate plateau. Not
                // recorded as an iteration: logged deviations stay strictly
                // increasing while these moves may be lateral.
                if let Some(next) =
                    forced_exchange(problem, &basis, profile.argmax_index, interp.sigma, &seen)
                {
                    seen.insert(basis_signature(&next.basis));
                    basis = next.basis.clone();
                    current = Some(next);
                    steps += 1;
                    continue;
                }
                // a basis built by the gamma rule keeps the entering point;
                // recovering from it preserves the progress direction
                let failed = match &e {
                    ExchangeError::SingularNewBasis { basis: b, .. } => b.clone(),
                    _ => basis.clone(),
                };
                let hint = Some(profile.argmax_index);
                match recover_basis(problem, &failed, hint, opts, &mut rng, &seen) {
                    Ok(next) => {
                        seen.insert(basis_signature(&next));
                        basis = next;
                        iterations.clear();
                        current = None;
                        incidents += 1;
                        steps += 1;
                    }
                    Err(detail) => {
                        return finish_singular(
                            current,
                            iterations,
                            format!("{e}; recovery failed: {detail}"),
                            incidents + 1,
                        )
                    }
                }
            }
        }
    }
}

/// Side assignment is irrelevant for cycle detection, only membership is.
fn basis_signature(basis: &SignedBasis) -> Vec<usize> {
    let mut sig = basis.all_indices();
    sig.sort_unstable();
    sig
}

/// Degenerate-step fallback: tries every one-point eviction that admits the
/// entering point, sides each membership by its own lifted geometry, and
/// returns the solved basis of largest deviation among the unseen ones that
/// hold the current level. `None` means no eviction works and the caller
/// must rebuild.
fn forced_exchange(
    problem: &Problem,
    basis: &SignedBasis,
    entering: usize,
    old_sigma: f64,
    seen: &HashSet<Vec<usize>>,
) -> Option<Interpolant> {
    let domain = problem.domain();
    let family = problem.family();
    let margin = PROGRESS_TOL * (1.0 + old_sigma.abs());
    let all = basis.all_indices();
    let mut best: Option<Interpolant> = None;
    for &leaver in &all {
        let mut set: Vec<usize> = all.iter().copied().filter(|&k| k != leaver).collect();
        set.push(entering);
        set.sort_unstable();
        if seen.contains(&set) {
            continue;
        }
        let Ok(candidate) = basis_from_set(domain, family, &set) else {
            continue;
        };
        let Ok(solved) = chebyshev_interpolant(&candidate, family, domain) else {
            continue;
        };
        if solved.sigma < old_sigma - margin {
            continue;
        }
        if best.as_ref().map_or(true, |cur| solved.sigma > cur.sigma) {
            best = Some(solved);
        }
    }
    best
}

/// Level-set escape: reseats the whole basis on points where the current
/// residual exceeds the stalled level, split by residual sign. A common
/// point of the two lifted hulls is a signed dependence whose
/// equal-deviation level is a weighted average of |residual| over its
/// support, so a basis built on that support lands strictly above the old
/// level. The support is padded to n+2 with the largest remaining
/// residuals, and the result is adopted only after the solved deviation
/// confirms the ascent. `None` leaves the caller on its one-point rules.
fn profile_rebuild(
    problem: &Problem,
    profile: &DeviationProfile,
    old_sigma: f64,
    seen: &HashSet<Vec<usize>>,
) -> Option<Interpolant> {
    let domain = problem.domain();
    let family = problem.family();
    let need = family.len() + 2;
    let margin = PROGRESS_TOL * (1.0 + old_sigma.abs());
    let side_cap = 4 * need;

    let level = old_sigma + margin;
    let mut plus: Vec<usize> = Vec::new();
    let mut minus: Vec<usize> = Vec::new();
    for (k, &r) in profile.residuals.iter().enumerate() {
        if r > level {
            plus.push(k);
        } else if r < -level {
            minus.push(k);
        }
    }
    if plus.is_empty() || minus.is_empty() {
        return None;
    }
    plus.sort_by(|&a, &b| profile.residuals[b].total_cmp(&profile.residuals[a]));
    minus.sort_by(|&a, &b| profile.residuals[a].total_cmp(&profile.residuals[b]));
    plus.truncate(side_cap);
    minus.truncate(side_cap);

    let g_plus = lift_indices(family, domain, &plus);
    let g_minus = lift_indices(family, domain, &minus);
    let cert = match hulls_intersect(&g_plus, &g_minus, 1e-9) {
        Ok(HullIntersection::Certificate(c)) => c,
        _ => return None,
    };

    let mut support: Vec<(f64, usize)> = Vec::new();
    for (&w, &k) in cert.weights_plus.iter().zip(&plus) {
        if w > WEIGHT_DEGENERACY_TOL {
            support.push((w, k));
        }
    }
    for (&w, &k) in cert.weights_minus.iter().zip(&minus) {
        if w > WEIGHT_DEGENERACY_TOL {
            support.push((w, k));
        }
    }
    // a vertex solution carries at most n+2 active weights; trimming the
    // smallest ones covers the degenerate excess
    support.sort_by(|a, b| b.0.total_cmp(&a.0));
    support.truncate(need);
    let core: Vec<usize> = support.iter().map(|&(_, k)| k).collect();

    let try_set = |set: &[usize]| -> Option<Interpolant> {
        if seen.contains(&set.to_vec()) {
            return None;
        }
        let candidate = basis_from_set(domain, family, set).ok()?;
        let solved = chebyshev_interpolant(&candidate, family, domain).ok()?;
        (solved.sigma > old_sigma + margin).then_some(solved)
    };

    let pad = need - core.len();
    if pad == 0 {
        let mut set = core;
        set.sort_unstable();
        let r = try_set(&set);
        return r;
    }

    // padding can land on a dependent point; the last slot walks the
    // remaining points in residual order until a candidate verifies
    let mut order: Vec<usize> = (0..domain.len()).filter(|k| !core.contains(k)).collect();
    order.sort_by(|&a, &b| profile.residuals[b].abs().total_cmp(&profile.residuals[a].abs()));
    if order.len() < pad {
        return None;
    }
    let fixed = &order[..pad - 1];
    for last in &order[pad - 1..] {
        let mut set = core.clone();
        set.extend_from_slice(fixed);
        set.push(*last);
        set.sort_unstable();
        if let Some(solved) = try_set(&set) {
            return Some(solved);
        }
    }
    None
}

/// Degeneracy restart: jitters every grid coordinate by a small fraction of
/// its axis span, solves the jittered problem under a bounded budget, and
/// maps the final membership back to the true grid. Grids in general
/// position keep every exchange strictly ascending, so the sub-solve walks
/// straight to a near-optimal membership that the degenerate walk could not
/// reach point by point. Function values stay as sampled.
fn perturbed_restart(
    problem: &Problem,
    opts: &SolveOptions,
    rng: &mut ChaCha8Rng,
    seen: &HashSet<Vec<usize>>,
) -> Option<SignedBasis> {
    let domain = problem.domain();
    let family = problem.family();
    let dim = domain.dim();
    let m = domain.len();

    let mut spans = vec![0.0_f64; dim];
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for k in 0..m {
        for (c, &x) in domain.point(k).iter().enumerate() {
            lo[c] = lo[c].min(x);
            hi[c] = hi[c].max(x);
        }
    }
    for c in 0..dim {
        spans[c] = (hi[c] - lo[c]).max(1.0);
    }

    for _ in 0..3 {
        let mut coords = Vec::with_capacity(m * dim);
        for k in 0..m {
            for (c, &x) in domain.point(k).iter().enumerate() {
                coords.push(x + spans[c] * 1e-5 * (rng.gen::<f64>() - 0.5));
            }
        }
        let Ok(jittered) = DiscreteDomain::new(dim, coords, domain.values().to_vec()) else {
            continue;
        };
        let Ok(sub) = Problem::new(jittered, family.clone()) else {
            continue;
        };
        let sub_opts = SolveOptions {
            max_iterations: 300,
            seed: rng.gen(),
            ..opts.clone()
        };
        let Ok(result) = solve_loop(&sub, &sub_opts, false) else {
            continue;
        };
        // indices survive the jitter unchanged, and so do the sides: the
        // sub-solve's split is the one that makes the true equal-deviation
        // system reproduce its near-optimal coefficients. Rederiving sides
        // here would park degenerate members arbitrarily and wreck that.
        let mut set = result.final_basis.all_indices();
        set.sort_unstable();
        if seen.contains(&set) {
            continue;
        }
        let Ok(basis) = SignedBasis::new(
            result.final_basis.pos().to_vec(),
            result.final_basis.neg().to_vec(),
            domain.len(),
        ) else {
            continue;
        };
        if verify_non_singular(&basis, family, domain).is_ok() {
            return Some(basis);
        }
        // inconsistent sides on the true grid; fall back to a fresh split
        if let Ok(basis) = basis_from_set(domain, family, &set) {
            return Some(basis);
        }
    }
    None
}

/// Rebuilds a workable basis from a singular one by swapping one member for
/// an outside point. The first attempt is deterministic: the point most
/// involved in the degenerate affine dependence leaves (a zero dependence
/// coefficient marks the one point NOT involved, so the flagged point
/// itself always stays) and the outside point adding the most lifted
/// volume enters. On a regular grid that exact swap often lands in a
/// mirror-image degeneracy, so later attempts draw the leaver and the
/// entry from the caller's generator. `keep_hint` names a point the caller
/// wants retained, typically the one whose deviation drove the last
/// exchange; it is never dropped. Candidate sets in `seen` are skipped
/// outright: handing back a basis the walk already held would let the same
/// singular exchange replay forever. Every swap is re-verified; each
/// verification consumes one unit of the retry budget.
fn recover_basis(
    problem: &Problem,
    failed: &SignedBasis,
    keep_hint: Option<usize>,
    opts: &SolveOptions,
    rng: &mut ChaCha8Rng,
    seen: &HashSet<Vec<usize>>,
) -> Result<SignedBasis, String> {
    let domain = problem.domain();
    let family = problem.family();
    let all = failed.all_indices();
    if opts.retry_count == 0 {
        return Err("retry budget is zero".into());
    }
    if domain.len() <= all.len() {
        return Err("no outside points available".into());
    }

    let lifted: Vec<LiftedPoint> = all
        .iter()
        .map(|&k| LiftedPoint {
            source_index: k,
            vector: family.lift(domain.point(k)),
        })
        .collect();
    let mut drops: Vec<usize> = match radon_partition(&lifted) {
        Ok(decomp) => {
            let mut weighted: Vec<(f64, usize)> = all
                .iter()
                .map(|&k| (decomp.weight_of(k).map_or(f64::INFINITY, |(w, _)| w), k))
                .collect();
            weighted.sort_by(|a, b| a.0.total_cmp(&b.0));
            weighted.into_iter().map(|(_, k)| k).collect()
        }
        Err(crate::geometry::GeometryError::SingularConfiguration { .. }) => {
            // dropping a point with a near-zero coefficient leaves the
            // dependence intact, so only involved points are candidates
            let vectors: Vec<Vec<f64>> = lifted.iter().map(|p| p.vector.clone()).collect();
            match affine_dependence(&vectors) {
                Ok(lambda) => {
                    let peak = lambda.iter().fold(0.0f64, |m, l| m.max(l.abs()));
                    let mut involved: Vec<(f64, usize)> = lambda
                        .iter()
                        .map(|l| l.abs())
                        .zip(all.iter().copied())
                        .filter(|&(w, _)| w > 1e-9 * peak)
                        .collect();
                    involved.sort_by(|a, b| b.0.total_cmp(&a.0));
                    involved.into_iter().map(|(_, k)| k).collect()
                }
                Err(_) => all.clone(),
            }
        }
        Err(_) => all.clone(),
    };
    if let Some(hint) = keep_hint {
        drops.retain(|&k| k != hint);
    }
    if drops.is_empty() {
        drops.extend(all.iter().copied().filter(|&k| Some(k) != keep_hint));
    }

    let mut budget = opts.retry_count;
    let mut last_err = String::from("no replacement candidates");

    let kept: Vec<usize> = all.iter().copied().filter(|&k| k != drops[0]).collect();
    if let Some(&best) = volume_ranked_outsiders(domain, family, &all, &kept).first() {
        let mut set = kept;
        set.push(best);
        set.sort_unstable();
        if !seen.contains(&set) {
            match basis_from_set(domain, family, &set) {
                Ok(b) => return Ok(b),
                Err(detail) => last_err = detail,
            }
            budget -= 1;
        }
    }

    let mut draws = 0;
    while budget > 0 {
        draws += 1;
        if draws > 64 * opts.retry_count {
            return Err("random swaps kept landing on already-visited bases".into());
        }
        let drop_index = drops[rng.gen_range(0..drops.len())];
        let replacement = loop {
            let k = rng.gen_range(0..domain.len());
            if !all.contains(&k) {
                break k;
            }
        };
        let mut set: Vec<usize> = all.iter().copied().filter(|&k| k != drop_index).collect();
        set.push(replacement);
        set.sort_unstable();
        if seen.contains(&set) {
            continue;
        }
        match basis_from_set(domain, family, &set) {
            Ok(b) => return Ok(b),
            Err(detail) => last_err = detail,
        }
        budget -= 1;
    }
    Err(last_err)
}

/// Outside points ordered by how much lifted volume they add to the kept
/// rows: descending norm of the lifted-with-leading-1 vector's component
/// orthogonal to the kept span.
fn volume_ranked_outsiders(
    domain: &DiscreteDomain,
    family: &BasisFamily,
    excluded: &[usize],
    kept: &[usize],
) -> Vec<usize> {
    let kept_rows: Vec<Vec<f64>> = kept
        .iter()
        .map(|&k| family.lift_with_one(domain.point(k)))
        .collect();
    let q = orthonormalize(&kept_rows);
    let mut scored: Vec<(f64, usize)> = Vec::new();
    for k in 0..domain.len() {
        if excluded.contains(&k) {
            continue;
        }
        let mut row = family.lift_with_one(domain.point(k));
        for dir in &q {
            let proj: f64 = row.iter().zip(dir).map(|(a, b)| a * b).sum();
            for (v, d) in row.iter_mut().zip(dir) {
                *v -= proj * d;
            }
        }
        let norm2: f64 = row.iter().map(|v| v * v).sum();
        scored.push((norm2, k));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.into_iter().map(|(_, k)| k).collect()
}

fn orthonormalize(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for row in rows {
        let mut v = row.clone();
        for dir in &q {
            let proj: f64 = v.iter().zip(dir).map(|(a, b)| a * b).sum();
            for (x, d) in v.iter_mut().zip(dir) {
                *x -= proj * d;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-300 {
            for x in v.iter_mut() {
                *x /= norm;
            }
            q.push(v);
        }
    }
    q
}

fn finish_singular(
    current: Option<Interpolant>,
    iterations: Vec<IterationRecord>,
    detail: String,
    recoveries: usize,
) -> Result<SolveResult, SolverError> {
    match current {
        Some(interp) => Ok(SolveResult {
            coefficients: interp.coefficients.clone(),
            sigma: interp.sigma,
            status: SolveStatus::SingularBasis,
            iterations,
            certificate: None,
            final_basis: interp.basis,
            detail: Some(detail),
        }),
        None => Err(SolverError::SingularBasis {
            attempts: recoveries + 1,
            detail,
        }),
    }
}

/// Tests the optimality of a coefficient vector: the residual extreme sets
/// are lifted and their convex hulls intersected. `tol` is both the hull
/// gap tolerance and, scaled by (1 + max deviation), the cut that decides
/// which points count as extreme.
pub fn certify_optimality(
    coefficients: &CoefficientVector,
    problem: &Problem,
    tol: f64,
) -> CertifyOutcome {
    let profile = deviation_profile(coefficients, problem);
    let ext_tol = tol * (1.0 + profile.max_abs);
    let (e_plus, e_minus) = extreme_sets(&profile, ext_tol);
    if e_plus.is_empty() {
        return CertifyOutcome::Refused(RefusalReason::EmptyExtremeSet {
            side: Side::Positive,
        });
    }
    if e_minus.is_empty() {
        return CertifyOutcome::Refused(RefusalReason::EmptyExtremeSet {
            side: Side::Negative,
        });
    }
    let g_plus = lift_indices(problem.family(), problem.domain(), &e_plus);
    let g_minus = lift_indices(problem.family(), problem.domain(), &e_minus);
    match crate::geometry::hulls_intersect(&g_plus, &g_minus, tol) {
        Ok(HullIntersection::Certificate(c)) => {
            CertifyOutcome::Certified(OptimalityCertificate {
                e_plus_indices: e_plus,
                e_minus_indices: e_minus,
                weights_plus: c.weights_plus,
                weights_minus: c.weights_minus,
                common_point: c.common_point,
                residual: c.residual,
            })
        }
        Ok(HullIntersection::Refusal(r)) => CertifyOutcome::Refused(RefusalReason::Separated {
            status: r.status,
            gap: r.gap,
        }),
        Err(e) => CertifyOutcome::Refused(RefusalReason::LpFailure {
            detail: e.to_string(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases;
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

    fn grid_1d(points: &[f64], f: impl Fn(f64) -> f64) -> DiscreteDomain {
        let values: Vec<f64> = points.iter().map(|&x| f(x)).collect();
        DiscreteDomain::new(1, points.to_vec(), values).unwrap()
    }

    #[test]
    fn initial_basis_needs_enough_points() {
        let dom = grid_1d(&[0.0, 1.0], |x| x);
        let err = initial_basis(&dom, &family_x(), &SolveOptions::default()).unwrap_err();
        assert!(matches!(
            err,
            SolverError::InsufficientPoints {
                needed: 3,
                available: 2
            }
        ));
    }

    #[test]
    fn initial_basis_on_dense_grid() {
        let points: Vec<f64> = (0..1001).map(|i| -1.0 + 2.0 * i as f64 / 1000.0).collect();
        let dom = grid_1d(&points, |x| x.exp());
        let fam = bases::monomials(1, 5).unwrap();
        let basis = initial_basis(&dom, &fam, &SolveOptions::default()).unwrap();
        assert_eq!(basis.len(), 7);
        let all = basis.all_indices();
        let mut dedup = all.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), 7);
        verify_non_singular(&basis, &fam, &dom).unwrap();
    }

    #[test]
    fn initial_basis_on_corner_grid() {
        let coords = vec![-1.0, -1.0, -1.0, 1.0, 1.0, -1.0, 1.0, 1.0];
        let values = vec![1.0, -1.0, -1.0, 1.0];
        let dom = DiscreteDomain::new(2, coords, values).unwrap();
        let fam = bases::monomials(2, 1).unwrap();
        let basis = initial_basis(&dom, &fam, &SolveOptions::default()).unwrap();
        let mut all = basis.all_indices();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);
        // diagonal corners share a side
        let same_side = basis.pos().contains(&0) == basis.pos().contains(&3);
        assert!(same_side);
    }

    #[test]
    fn solves_the_square() {
        let dom = grid_1d(&[-1.0, -0.5, 0.0, 0.5, 1.0], |x| x * x);
        let problem = Problem::new(dom, family_x()).unwrap();
        let result = solve_minimax(&problem, &SolveOptions::default()).unwrap();
        assert_eq!(result.status, SolveStatus::OptimalCertified);
        assert!((result.sigma - 0.5).abs() < 1e-9);
        assert!((result.coefficients.a[0] - 0.5).abs() < 1e-9);
        assert!(result.coefficients.a[1].abs() < 1e-9);
        assert!(result.certificate.is_some());
        let mut last = f64::NEG_INFINITY;
        for it in &result.iterations {
            assert!(it.sigma > last);
            last = it.sigma;
        }
    }

    #[test]
    fn solves_on_a_fine_grid() {
        let points: Vec<f64> = (0..201).map(|i| -1.0 + i as f64 / 100.0).collect();
        let dom = grid_1d(&points, |x| x * x);
        let problem = Problem::new(dom, family_x()).unwrap();
        let result = solve_minimax(&problem, &SolveOptions::default()).unwrap();
        assert_eq!(result.status, SolveStatus::OptimalCertified);
        assert!((result.sigma - 0.5).abs() < 1e-9);
        assert!((result.coefficients.a[0] - 0.5).abs() < 1e-9);
        assert!(result.coefficients.a[1].abs() < 1e-9);
    }

    #[test]
    fn certificate_for_best_constant() {
        let dom = grid_1d(&[-1.0, 0.0, 1.0], |x| x * x);
        let problem = Problem::new(dom, family_x()).unwrap();
        let coeffs = CoefficientVector::new(vec![0.5, 0.0]);
        match certify_optimality(&coeffs, &problem, 1e-8) {
            CertifyOutcome::Certified(cert) => {
                assert_eq!(cert.e_plus_indices, vec![0, 2]);
                assert_eq!(cert.e_minus_indices, vec![1]);
                assert!(cert.residual <= 1e-8);
                assert!(cert.common_point[0].abs() < 1e-8);
            }
            CertifyOutcome::Refused(r) => panic!("expected certificate, got {r}"),
        }
    }

    #[test]
    fn refuses_one_sided_residuals() {
        let dom = grid_1d(&[-1.0, 0.0, 1.0], |x| x * x);
        let problem = Problem::new(dom, family_x()).unwrap();
        let coeffs = CoefficientVector::new(vec![-1.0, 0.0]);
        match certify_optimality(&coeffs, &problem, 1e-8) {
            CertifyOutcome::Certified(c) => panic!("expected refusal, got {c:?}"),
            CertifyOutcome::Refused(RefusalReason::EmptyExtremeSet { side }) => {
                assert_eq!(side, Side::Negative);
            }
            CertifyOutcome::Refused(r) => panic!("unexpected refusal {r}"),
        }
    }

    #[test]
    fn refuses_suboptimal_point() {
        let dom = grid_1d(&[-1.0, -0.5, 0.0, 0.5, 1.0], |x| x * x);
        let problem = Problem::new(dom, family_x()).unwrap();
        // deviations are two-sided but lopsided: extreme hulls cannot meet
        let coeffs = CoefficientVector::new(vec![0.3, 0.2]);
        match certify_optimality(&coeffs, &problem, 1e-8) {
            CertifyOutcome::Certified(c) => panic!("expected refusal, got {c:?}"),
            CertifyOutcome::Refused(_) => {}
        }
    }
}
