//! Randomized geometry checks: Radon partitions land in both sub-hulls,
//! join weights reproduce planted intersections, self-intersection always
//! certifies.

use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vpx_core::geometry::{
    hulls_intersect, interior_join_weights, radon_partition, HullIntersection, LiftedPoint,
};

fn lifted(vectors: &[Vec<f64>]) -> Vec<LiftedPoint> {
    vectors
        .iter()
        .enumerate()
        .map(|(i, v)| LiftedPoint {
            source_index: i,
            vector: v.clone(),
        })
        .collect()
}

// the acceptance suite repeats this at full volume; here it guards the
// geometry module on its own
#[test]
fn radon_point_lies_in_both_sub_hulls() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e0_4001);
    let mut done = 0usize;
    let mut attempts = 0usize;
    while done < 1000 {
        attempts += 1;
        assert!(attempts < 1100, "too many degenerate draws");
        let n = rng.gen_range(1..=8);
        let vectors: Vec<Vec<f64>> = (0..n + 2)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let points = lifted(&vectors);
        let d = match radon_partition(&points) {
            Ok(d) => d,
            Err(_) => continue,
        };
        assert_eq!(d.positive_indices.len() + d.negative_indices.len(), n + 2);
        for w in d.weights_pos.iter().chain(&d.weights_neg) {
            assert!(*w > 1e-10, "interior witness needs positive weights");
        }
        let pick = |idx: &[usize]| -> Vec<LiftedPoint> {
            idx.iter().map(|i| points[*i].clone()).collect()
        };
        match hulls_intersect(&pick(&d.positive_indices), &pick(&d.negative_indices), 1e-9)
            .unwrap()
        {
            HullIntersection::Certificate(c) => {
                assert!(c.residual <= 1e-9, "residual {}", c.residual);
                for (a, b) in c.common_point.iter().zip(&d.radon_point) {
                    assert!((a - b).abs() <= 1e-7, "witness moved: {a} vs {b}");
                }
            }
            HullIntersection::Refusal(r) => {
                panic!("sides of a Radon partition must intersect: {r:?}")
            }
        }
        done += 1;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    // plant an intersection, then demand the solver finds one at least as
    // interior as the planted witness
    #[test]
    fn join_weights_recover_planted_intersections(
        n in 1usize..=5,
        flat in prop::collection::vec(-1.0f64..1.0, 7 * 5),
        raw_weights in prop::collection::vec(0.05f64..1.0, 8),
    ) {
        let k = n / 2 + 1; // retained same-side points
        let l = n + 2 - k; // opposite side, so 1 + k + l = n + 3
        let same: Vec<LiftedPoint> = (0..k)
            .map(|i| LiftedPoint { source_index: 1 + i, vector: flat[i * n..(i + 1) * n].to_vec() })
            .collect();
        let other: Vec<LiftedPoint> = (0..l)
            .map(|j| LiftedPoint {
                source_index: 1 + k + j,
                vector: flat[(k + j) * n..(k + j + 1) * n].to_vec(),
            })
            .collect();

        let pos_norm: f64 = raw_weights[..1 + k].iter().sum();
        let alpha = raw_weights[0] / pos_norm;
        let alphas: Vec<f64> = raw_weights[1..1 + k].iter().map(|w| w / pos_norm).collect();
        let beta_sum: f64 = raw_weights[1 + k..1 + k + l].iter().sum();
        let betas: Vec<f64> = raw_weights[1 + k..1 + k + l].iter().map(|w| w / beta_sum).collect();

        // entering = (sum beta q - sum alpha~ p) / alpha pins the witness
        let mut entering = vec![0.0; n];
        for c in 0..n {
            let neg: f64 = betas.iter().zip(&other).map(|(b, q)| b * q.vector[c]).sum();
            let pos: f64 = alphas.iter().zip(&same).map(|(a, p)| a * p.vector[c]).sum();
            entering[c] = (neg - pos) / alpha;
        }
        let entering = LiftedPoint { source_index: 0, vector: entering };

        let jw = interior_join_weights(&entering, &same, &other).unwrap();
        let planted_min = alpha
            .min(alphas.iter().fold(f64::INFINITY, |a, w| a.min(*w)))
            .min(betas.iter().fold(f64::INFINITY, |a, w| a.min(*w)));
        prop_assert!(jw.min_weight >= planted_min - 1e-9,
            "solver found {} but {planted_min} was planted", jw.min_weight);

        let total_pos: f64 = jw.entering_weight + jw.retained_weights.iter().sum::<f64>();
        let total_neg: f64 = jw.opposite_weights.iter().sum();
        prop_assert!((total_pos - 1.0).abs() <= 1e-9);
        prop_assert!((total_neg - 1.0).abs() <= 1e-9);
        let scale = entering
            .vector
            .iter()
            .fold(1.0f64, |a, v| a.max(v.abs()));
        for c in 0..n {
            let pos: f64 = jw.entering_weight * entering.vector[c]
                + jw.retained_weights.iter().zip(&same).map(|(w, p)| w * p.vector[c]).sum::<f64>();
            let neg: f64 = jw.opposite_weights.iter().zip(&other).map(|(w, q)| w * q.vector[c]).sum();
            prop_assert!((pos - neg).abs() <= 1e-9 * scale,
                "weighted sums disagree: {pos} vs {neg}");
        }
    }

    #[test]
    fn self_intersection_always_certifies(
        n in 1usize..=6,
        count in 1usize..=6,
        flat in prop::collection::vec(-1.0f64..1.0, 6 * 6),
    ) {
        let vectors: Vec<Vec<f64>> = (0..count)
            .map(|i| flat[i * n..(i + 1) * n].to_vec())
            .collect();
        let x = lifted(&vectors);
        match hulls_intersect(&x, &x, 1e-9).unwrap() {
            HullIntersection::Certificate(c) => prop_assert!(c.residual <= 1e-9),
            HullIntersection::Refusal(r) => {
                return Err(TestCaseError::fail(format!("identical hulls refused: {r:?}")));
            }
        }
    }
}
