mod common;

use common::brute_force_viterbi;
use proptest::prelude::*;
use radiomap::coarse::{decode_segments, segmentation_score};
use radiomap::sim::labels_from_segments;

fn brute_force(loglik: &[Vec<f64>], means: &[f64], max_dur: usize) -> (f64, Vec<usize>, Vec<usize>) {
    brute_force_viterbi(loglik, means, max_dur).unwrap()
}

fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (1usize..=3, 1usize..=9).prop_flat_map(|(k, t)| {
        (
            prop::collection::vec(prop::collection::vec(-10.0f64..0.0, k), t),
            prop::collection::vec(1.0f64..6.0, k),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_exhaustive_search((loglik, means) in instance()) {
        let t = loglik.len();
        let seg = decode_segments(&loglik, &means, t).unwrap();
        let (score, r, n) = brute_force(&loglik, &means, t);
        prop_assert!((seg.score - score).abs() <= 1e-9 * score.abs().max(1.0));
        prop_assert_eq!(&seg.regions, &r);
        prop_assert_eq!(&seg.durations, &n);
        prop_assert_eq!(seg.labels, labels_from_segments(&r, &n).unwrap());
    }

    #[test]
    fn respects_duration_cap((loglik, means) in instance(), cap in 1usize..4) {
        let t = loglik.len();
        // a cap too small to cover the sequence with the available regions has no path
        match decode_segments(&loglik, &means, cap) {
            Ok(seg) => {
                prop_assert!(seg.durations.iter().all(|&d| d <= cap));
                let (score, r, _) = brute_force(&loglik, &means, cap);
                prop_assert!((seg.score - score).abs() <= 1e-9 * score.abs().max(1.0));
                prop_assert_eq!(seg.regions, r);
            }
            Err(_) => prop_assert!(cap * means.len() < t),
        }
    }

    #[test]
    fn reported_score_is_exact((loglik, means) in instance()) {
        let seg = decode_segments(&loglik, &means, loglik.len()).unwrap();
        let s = segmentation_score(&loglik, &means, &seg.regions, &seg.durations);
        prop_assert!((seg.score - s).abs() <= 1e-9 * s.abs().max(1.0));
    }
}

#[test]
fn strong_evidence_gives_planted_segmentation() {
    let truth = [1, 1, 1, 2, 2, 4, 4, 4, 4];
    let loglik: Vec<Vec<f64>> = truth
        .iter()
        .map(|&k| (1..=4).map(|j| if j == k { 0.0 } else { -50.0 }).collect())
        .collect();
    let seg = decode_segments(&loglik, &[3.0, 2.0, 2.0, 4.0], 9).unwrap();
    assert_eq!(seg.labels, truth);
    assert_eq!(seg.regions, vec![1, 2, 4]);
}
