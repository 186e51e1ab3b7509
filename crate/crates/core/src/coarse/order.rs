//! Self-supervised order-verification data: chronologically ordered segment
//! crops (label 1) paired with shuffled copies of the same crops (label 0).

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;

use super::embedder::OrderSample;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderDatasetOptions {
    /// Positive/negative pairs to draw.
    pub pairs: usize,
    /// Consecutive segments per sample (at least 2).
    pub segments_per_sample: usize,
    /// Longest crop taken from one segment.
    pub crop_len: usize,
}

impl Default for OrderDatasetOptions {
    fn default() -> Self {
        OrderDatasetOptions {
            pairs: 32,
            segments_per_sample: 3,
            crop_len: 6,
        }
    }
}

/// Builds a balanced order-verification set.
///
/// `users[m]` lists the decoded segments of user `m` in chronological order; each
/// segment is a slice of per-slot feature vectors. Returns an empty set when no
/// user has two segments.
pub fn build_order_dataset<R: Rng + ?Sized>(
    users: &[Vec<&[Vec<f64>]>],
    opts: &OrderDatasetOptions,
    rng: &mut R,
) -> Vec<OrderSample> {
    let eligible: Vec<usize> = (0..users.len()).filter(|&m| users[m].len() >= 2).collect();
    if eligible.is_empty() {
        warn!("order dataset: no sequence has two segments, nothing to verify");
        return Vec::new();
    }
    let per = opts.segments_per_sample.max(2);
    let mut out = Vec::with_capacity(2 * opts.pairs);
    for _ in 0..opts.pairs {
        let segs = &users[eligible[rng.random_range(0..eligible.len())]];
        let m = per.min(segs.len());
        let first = rng.random_range(0..=segs.len() - m);
        let crops: Vec<&[Vec<f64>]> = segs[first..first + m]
            .iter()
            .map(|s| {
                let c = opts.crop_len.max(1).min(s.len());
                let off = rng.random_range(0..=s.len() - c);
                &s[off..off + c]
            })
            .collect();
        let identity: Vec<usize> = (0..m).collect();
        let mut perm = identity.clone();
        while perm == identity {
            perm.shuffle(rng);
        }
        out.push(OrderSample {
            sequence: crops.concat(),
            label: 1.0,
        });
        out.push(OrderSample {
            sequence: perm.iter().flat_map(|&i| crops[i].iter().cloned()).collect(),
            label: 0.0,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn seg(v: f64, n: usize) -> Vec<Vec<f64>> {
        vec![vec![v]; n]
    }

    #[test]
    fn two_segments_give_the_swap() {
        let (a, b) = (seg(1.0, 4), seg(2.0, 4));
        let users = vec![vec![a.as_slice(), b.as_slice()]];
        let opts = OrderDatasetOptions { pairs: 10, segments_per_sample: 3, crop_len: 2 };
        let data = build_order_dataset(&users, &opts, &mut seeded(1));
        assert_eq!(data.len(), 20);
        for pair in data.chunks(2) {
            assert_eq!(pair[0].sequence, vec![vec![1.0], vec![1.0], vec![2.0], vec![2.0]]);
            assert_eq!(pair[1].sequence, vec![vec![2.0], vec![2.0], vec![1.0], vec![1.0]]);
        }
    }

    #[test]
    fn balanced_and_never_identity() {
        let segs: Vec<Vec<Vec<f64>>> = (0..5).map(|k| seg(k as f64, 3)).collect();
        let users = vec![segs.iter().map(|s| s.as_slice()).collect::<Vec<_>>()];
        let opts = OrderDatasetOptions { pairs: 100, segments_per_sample: 3, crop_len: 1 };
        let data = build_order_dataset(&users, &opts, &mut seeded(2));
        assert_eq!(data.iter().filter(|s| s.label == 1.0).count(), 100);
        assert_eq!(data.iter().filter(|s| s.label == 0.0).count(), 100);
        for pair in data.chunks(2) {
            assert_ne!(pair[0].sequence, pair[1].sequence);
            let mut a: Vec<f64> = pair[0].sequence.iter().map(|r| r[0]).collect();
            let mut b: Vec<f64> = pair[1].sequence.iter().map(|r| r[0]).collect();
            assert!(a.windows(2).all(|w| w[0] < w[1]));
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn single_segment_yields_nothing() {
        let a = seg(1.0, 5);
        let users = vec![vec![a.as_slice()]];
        assert!(build_order_dataset(&users, &OrderDatasetOptions::default(), &mut seeded(0)).is_empty());
    }
}
