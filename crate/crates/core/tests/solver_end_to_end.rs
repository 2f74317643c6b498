//! Full-pipeline checks: the exchange construction against fresh Radon
//! decompositions, golden problems, reference-route agreement, and the
//! growth of the deviation across iterations.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vpx_core::bases::monomials;
use vpx_core::exchange::{exchange_step, select_entering};
use vpx_core::geometry::{interior_join_weights, lift_indices, lift_point};
use vpx_core::interpolation::{chebyshev_interpolant, verify_non_singular};
use vpx_core::oracle::lp_minimax;
use vpx_core::solver::initial_basis;
use vpx_core::{
    deviation_profile, evaluate_model, solve_minimax, CoefficientVector, DiscreteDomain, Problem,
    SolveOptions, SolveStatus,
};

fn grid_1d(count: usize, f: impl Fn(f64) -> f64) -> DiscreteDomain {
    let points: Vec<f64> = (0..count)
        .map(|i| -1.0 + 2.0 * i as f64 / (count - 1) as f64)
        .collect();
    let values: Vec<f64> = points.iter().map(|&x| f(x)).collect();
    DiscreteDomain::new(1, points, values).unwrap()
}

fn random_1d_problem(rng: &mut ChaCha8Rng, count: usize, degree: u32) -> Problem {
    let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let freq = rng.gen_range(1.0..4.0);
    let noise_scale = 0.05;
    let points: Vec<f64> = (0..count)
        .map(|i| -1.0 + 2.0 * i as f64 / (count - 1) as f64)
        .collect();
    let values: Vec<f64> = points
        .iter()
        .map(|&x| {
            c[0] * (c[1] * x).exp() + c[2] * (freq * x).sin() + c[3] * x * x * x
                + rng.gen_range(-noise_scale..noise_scale)
        })
        .collect();
    let domain = DiscreteDomain::new(1, points, values).unwrap();
    Problem::new(domain, monomials(1, degree).unwrap()).unwrap()
}

// the step-two construction predicts the new basis weights in closed form:
// retained same-side (a~ - g*a)/(1-g), entering a/(1-g), opposite
// (b~ - g*b)/(1-g); a fresh Radon decomposition must reproduce them
#[test]
fn exchange_weights_match_fresh_radon_decomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e2e_0001);
    let mut steps_checked = 0usize;
    for pi in 0..50 {
        let problem = random_1d_problem(&mut rng, 40 + pi, 2);
        let opts = SolveOptions::default();
        let Ok(basis) = initial_basis(problem.domain(), problem.family(), &opts) else {
            continue;
        };
        let Ok(mut interp) = chebyshev_interpolant(&basis, problem.family(), problem.domain())
        else {
            continue;
        };
        for _ in 0..5 {
            let profile = deviation_profile(&interp.coefficients, &problem);
            let Some((entering_index, entering_sign)) =
                select_entering(&profile, interp.sigma, opts.termination_tol)
            else {
                break;
            };
            let decomp =
                verify_non_singular(&interp.basis, problem.family(), problem.domain()).unwrap();
            let (same_idx, same_w, opp_idx, opp_w) = if entering_sign >= 0 {
                (
                    interp.basis.pos().to_vec(),
                    decomp.weights_pos.clone(),
                    interp.basis.neg().to_vec(),
                    decomp.weights_neg.clone(),
                )
            } else {
                (
                    interp.basis.neg().to_vec(),
                    decomp.weights_neg.clone(),
                    interp.basis.pos().to_vec(),
                    decomp.weights_pos.clone(),
                )
            };
            let entering = lift_point(problem.family(), problem.domain(), entering_index);
            let same_lifted = lift_indices(problem.family(), problem.domain(), &same_idx);
            let opp_lifted = lift_indices(problem.family(), problem.domain(), &opp_idx);
            let Ok(joined) = interior_join_weights(&entering, &same_lifted, &opp_lifted) else {
                break;
            };

            let Ok((next, record)) =
                exchange_step(&interp, &profile, problem.family(), problem.domain())
            else {
                break;
            };
            let gamma = record.gamma;
            assert!(gamma < 1.0, "gamma must stay below one, got {gamma}");

            // predicted new weights keyed by domain index
            let mut predicted: Vec<(usize, f64)> = Vec::new();
            predicted.push((entering_index, joined.entering_weight / (1.0 - gamma)));
            for ((idx, old), new) in same_idx
                .iter()
                .zip(&same_w)
                .zip(&joined.retained_weights)
            {
                predicted.push((*idx, (new - gamma * old) / (1.0 - gamma)));
            }
            for ((idx, old), new) in opp_idx.iter().zip(&opp_w).zip(&joined.opposite_weights) {
                predicted.push((*idx, (new - gamma * old) / (1.0 - gamma)));
            }

            let fresh =
                verify_non_singular(&next.basis, problem.family(), problem.domain()).unwrap();
            let lookup = |idx: usize| -> Option<f64> {
                fresh
                    .positive_indices
                    .iter()
                    .position(|i| *i == idx)
                    .map(|p| fresh.weights_pos[p])
                    .or_else(|| {
                        fresh
                            .negative_indices
                            .iter()
                            .position(|i| *i == idx)
                            .map(|p| fresh.weights_neg[p])
                    })
            };
            for (idx, want) in predicted {
                if idx == record.leaving_index {
                    assert!(want.abs() <= 1e-8, "evicted weight should vanish: {want}");
                    assert!(lookup(idx).is_none(), "evicted point still in the basis");
                    continue;
                }
                let got = lookup(idx).expect("retained point lost from the basis");
                assert!(
                    (got - want).abs() <= 1e-8 * (1.0 + want.abs()),
                    "weight mismatch at {idx}: fresh {got} vs constructed {want}"
                );
            }
            steps_checked += 1;
            interp = next;
        }
    }
    assert!(steps_checked >= 50, "only {steps_checked} steps exercised");
}

#[test]
fn bilinear_target_on_the_square_grid() {
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for i in 0..21 {
        for j in 0..21 {
            let x = -1.0 + 0.1 * i as f64;
            let y = -1.0 + 0.1 * j as f64;
            coords.push(x);
            coords.push(y);
            values.push(x * y);
        }
    }
    let domain = DiscreteDomain::new(2, coords, values).unwrap();
    let problem = Problem::new(domain, monomials(2, 1).unwrap()).unwrap();
    let result = solve_minimax(&problem, &SolveOptions::default()).unwrap();
    assert_eq!(result.status, SolveStatus::OptimalCertified);
    assert!((result.sigma - 1.0).abs() <= 1e-9, "sigma {}", result.sigma);
    for a in &result.coefficients.a {
        assert!(a.abs() <= 1e-8, "coefficients {:?}", result.coefficients.a);
    }
}

#[test]
fn exponential_degree_five_matches_the_reference_route() {
    let domain = grid_1d(1001, |x| x.exp());
    let problem = Problem::new(domain, monomials(1, 5).unwrap()).unwrap();
    let result = solve_minimax(&problem, &SolveOptions::default()).unwrap();
    assert_eq!(result.status, SolveStatus::OptimalCertified);
    let (_, sigma_lp) = lp_minimax(problem.domain(), problem.family()).unwrap();
    assert!(
        (result.sigma - sigma_lp).abs() <= 1e-8,
        "exchange {} vs reference {}",
        result.sigma,
        sigma_lp
    );
}

#[test]
fn deviation_grows_strictly_across_iterations() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e2e_0002);
    let mut iterations_seen = 0usize;
    for pi in 0..50 {
        let problem = random_1d_problem(&mut rng, 60 + 2 * pi, 1 + (pi as u32 % 3));
        let result = solve_minimax(&problem, &SolveOptions::default()).unwrap();
        let mut last = None;
        for it in &result.iterations {
            assert!(
                it.sigma > it.exchange.old_sigma,
                "step did not grow: {} -> {}",
                it.exchange.old_sigma,
                it.sigma
            );
            if let Some(prev) = last {
                assert_eq!(it.exchange.old_sigma, prev, "iteration log out of order");
            }
            last = Some(it.sigma);
            iterations_seen += 1;
        }
    }
    assert!(iterations_seen >= 100, "corpus too easy: {iterations_seen}");
}

#[test]
fn univariate_bases_alternate_in_sign() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e2e_0003);
    for pi in 0..20 {
        let problem = random_1d_problem(&mut rng, 80, 1 + (pi as u32 % 3));
        let result = solve_minimax(&problem, &SolveOptions::default()).unwrap();
        if result.status != SolveStatus::OptimalCertified {
            continue;
        }
        let basis = &result.final_basis;
        let mut members: Vec<(f64, i8)> = basis
            .pos()
            .iter()
            .map(|&i| (problem.domain().point(i)[0], 1i8))
            .chain(basis.neg().iter().map(|&i| (problem.domain().point(i)[0], -1i8)))
            .collect();
        members.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for w in members.windows(2) {
            assert_ne!(w[0].1, w[1].1, "adjacent basis points share a sign");
        }
    }
}

#[test]
fn perturbing_certified_coefficients_cannot_win() {
    let domain = grid_1d(201, |x| (3.0 * x).sin() + 0.2 * x);
    let problem = Problem::new(domain, monomials(1, 3).unwrap()).unwrap();
    let result = solve_minimax(&problem, &SolveOptions::default()).unwrap();
    assert_eq!(result.status, SolveStatus::OptimalCertified);
    let base = deviation_profile(&result.coefficients, &problem).max_abs;

    let mut rng = ChaCha8Rng::seed_from_u64(0x5e2e_0004);
    for _ in 0..50 {
        let perturbed: Vec<f64> = result
            .coefficients
            .a
            .iter()
            .map(|a| a + rng.gen_range(-1e-4..1e-4))
            .collect();
        let moved = deviation_profile(&CoefficientVector::new(perturbed), &problem).max_abs;
        assert!(
            moved >= base - 1e-6,
            "perturbation beat the certificate: {moved} < {base}"
        );
    }
}

#[test]
fn certified_runs_have_supporting_extreme_sets() {
    let domain = grid_1d(301, |x| (x * x - 0.3).abs());
    let problem = Problem::new(domain, monomials(1, 2).unwrap()).unwrap();
    let result = solve_minimax(&problem, &SolveOptions::default()).unwrap();
    assert_eq!(result.status, SolveStatus::OptimalCertified);
    let cert = result.certificate.as_ref().unwrap();
    assert!(cert.residual <= 1e-8);
    assert!(!cert.e_plus_indices.is_empty() && !cert.e_minus_indices.is_empty());
    let wp: f64 = cert.weights_plus.iter().sum();
    let wm: f64 = cert.weights_minus.iter().sum();
    assert!((wp - 1.0).abs() <= 1e-8 && (wm - 1.0).abs() <= 1e-8);
    // model value at certified points actually sits sigma away from f
    for &i in &cert.e_plus_indices {
        let r = problem.domain().value(i)
            - evaluate_model(&result.coefficients, problem.family(), problem.domain().point(i));
        assert!((r - result.sigma).abs() <= 1e-7 * (1.0 + result.sigma));
    }
}
