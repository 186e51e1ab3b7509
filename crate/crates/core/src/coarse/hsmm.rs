//! Segment-level (explicit-duration) Viterbi decoding over strictly increasing
//! region sequences.
//!
//! The score of a segmentation `(r, n)` is
//! `sum_k [log Poisson(n_k; mean_{r_k}) + sum_{t in segment k} loglik[t][r_k]]
//!  + sum_k log prior(r_k -> r_{k+1})`.

use std::cmp::Ordering;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// `log Poisson(n; mean)` evaluated through the log-gamma function.
pub fn residence_log_pmf(n: usize, mean: f64) -> f64 {
    let n_f = n as f64;
    n_f * mean.ln() - mean - ln_gamma(n_f + 1.0)
}

/// Unnormalized log prior of moving from region `from` to region `to` (1-based
/// positions in the reference order). Backward or self transitions are impossible;
/// skipping regions is penalized by their expected residence.
pub fn transition_log_prior(from: usize, to: usize, residence_means: &[f64]) -> f64 {
    if to <= from {
        return f64::NEG_INFINITY;
    }
    let span: f64 = residence_means[from - 1..to].iter().sum();
    ((residence_means[from - 1] + residence_means[to - 1]) / span).ln()
}

/// Decoded segmentation of one sequence. Regions are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub regions: Vec<usize>,
    pub durations: Vec<usize>,
    pub labels: Vec<usize>,
    pub score: f64,
}

/// Total order used to pick among equal-scoring paths: higher score, then fewer
/// segments, then lexicographically smaller region sequence.
pub fn compare_paths(a: (f64, &[usize]), b: (f64, &[usize])) -> Ordering {
    a.0.partial_cmp(&b.0)
        .unwrap_or(Ordering::Equal)
        .then_with(|| b.1.len().cmp(&a.1.len()))
        .then_with(|| b.1.cmp(a.1))
}

/// Exact segment score of `(regions, durations)` under a per-slot log-likelihood
/// table `loglik[t][k - 1]`.
pub fn segmentation_score(
    loglik: &[Vec<f64>],
    residence_means: &[f64],
    regions: &[usize],
    durations: &[usize],
) -> f64 {
    let mut t = 0;
    let mut score = 0.0;
    for (i, (&k, &n)) in regions.iter().zip(durations).enumerate() {
        score += residence_log_pmf(n, residence_means[k - 1]);
        score += loglik[t..t + n].iter().map(|row| row[k - 1]).sum::<f64>();
        if i > 0 {
            score += transition_log_prior(regions[i - 1], k, residence_means);
        }
        t += n;
    }
    score
}

#[derive(Clone, Copy)]
struct Cell {
    score: f64,
    segs: u32,
    /// (start slot, predecessor region index) of the last segment.
    back: (u32, u32),
}

const NONE: u32 = u32::MAX;

impl Cell {
    const EMPTY: Cell = Cell {
        score: f64::NEG_INFINITY,
        segs: 0,
        back: (NONE, NONE),
    };
}

/// Region sequence of the path stored in `end[t][k]`.
fn path_end(end: &[Vec<Cell>], mut t: usize, mut k: usize) -> Vec<usize> {
    let mut r = Vec::new();
    loop {
        r.push(k + 1);
        let (start, prev) = end[t][k].back;
        if prev == NONE {
            break;
        }
        t = start as usize;
        k = prev as usize;
    }
    r.reverse();
    r
}

/// Region sequence of a candidate final segment in region `k` with back pointer `c.back`.
fn path_of(end: &[Vec<Cell>], c: &Cell, k: usize) -> Vec<usize> {
    let (start, prev) = c.back;
    let mut r = if prev == NONE {
        Vec::new()
    } else {
        path_end(end, start as usize, prev as usize)
    };
    r.push(k + 1);
    r
}

/// Exact explicit-duration Viterbi over strictly increasing region sequences with
/// durations in `1..=max_dur`.
///
/// `loglik[t][k - 1]` is the observation log-likelihood of slot `t` under region
/// `k`. Runs in `O(T K max_dur + T K^2)`.
pub fn decode_segments(
    loglik: &[Vec<f64>],
    residence_means: &[f64],
    max_dur: usize,
) -> Result<Segmentation> {
    let t_len = loglik.len();
    if t_len == 0 {
        return Err(Error::InvalidArgument("cannot decode an empty sequence".into()));
    }
    if max_dur == 0 {
        return Err(Error::InvalidArgument("max_dur must be at least 1".into()));
    }
    let k_len = residence_means.len();
    if loglik.iter().any(|row| row.len() != k_len) {
        return Err(Error::InvalidArgument(format!(
            "log-likelihood rows must have {k_len} entries"
        )));
    }
    let max_dur = max_dur.min(t_len);

    // cum[k][t] = sum of loglik[0..t][k]
    let mut cum = vec![vec![0.0; t_len + 1]; k_len];
    for (k, c) in cum.iter_mut().enumerate() {
        for t in 0..t_len {
            c[t + 1] = c[t] + loglik[t][k];
        }
    }
    let dur: Vec<Vec<f64>> = residence_means
        .iter()
        .map(|&m| {
            (0..=max_dur)
                .map(|d| if d == 0 { f64::NEG_INFINITY } else { residence_log_pmf(d, m) })
                .collect()
        })
        .collect();
    let trans: Vec<Vec<f64>> = (1..=k_len)
        .map(|a| (1..=k_len).map(|b| transition_log_prior(a, b, residence_means)).collect())
        .collect();

    let mut end = vec![vec![Cell::EMPTY; k_len]; t_len + 1];
    let mut pred = vec![vec![Cell::EMPTY; k_len]; t_len + 1];
    // pred_scores[k][s] mirrors pred[s][k].score for a contiguous inner loop.
    let mut pred_scores = vec![vec![f64::NEG_INFINITY; t_len + 1]; k_len];

    for t in 1..=t_len {
        for k in 0..k_len {
            let mut best = Cell::EMPTY;
            let cum_k = &cum[k];
            let dur_k = &dur[k];
            let pred_k = &pred_scores[k];
            for d in 1..=max_dur.min(t) {
                let s = t - d;
                let seg = dur_k[d] + cum_k[t] - cum_k[s];
                let (score, segs, back) = if s == 0 {
                    (seg, 1, (0, NONE))
                } else {
                    let p = pred_k[s];
                    if p == f64::NEG_INFINITY {
                        continue;
                    }
                    (p + seg, pred[s][k].segs + 1, (s as u32, pred[s][k].back.1))
                };
                if score == f64::NEG_INFINITY || score.is_nan() {
                    continue;
                }
                let cand = Cell { score, segs, back };
                if better(&cand, &best, || path_of(&end, &cand, k), || path_of(&end, &best, k)) {
                    best = cand;
                }
            }
            end[t][k] = best;
        }
        if t < t_len {
            for k in 1..k_len {
                let mut best = Cell::EMPTY;
                for kp in 0..k {
                    let e = end[t][kp];
                    if e.score == f64::NEG_INFINITY {
                        continue;
                    }
                    let cand = Cell {
                        score: e.score + trans[kp][k],
                        segs: e.segs,
                        back: (t as u32, kp as u32),
                    };
                    if better(
                        &cand,
                        &best,
                        || path_end(&end, t, cand.back.1 as usize),
                        || path_end(&end, t, best.back.1 as usize),
                    ) {
                        best = cand;
                    }
                }
                pred[t][k] = best;
                pred_scores[k][t] = best.score;
            }
        }
    }

    let mut best_k = None;
    for k in 0..k_len {
        let c = end[t_len][k];
        if c.score == f64::NEG_INFINITY {
            continue;
        }
        let take = match best_k {
            None => true,
            Some(bk) => {
                better(
                    &c,
                    &end[t_len][bk],
                    || path_end(&end, t_len, k),
                    || path_end(&end, t_len, bk),
                )
            }
        };
        if take {
            best_k = Some(k);
        }
    }
    let best_k = best_k.ok_or_else(|| {
        Error::Numerical("no finite-scoring segmentation exists".into())
    })?;

    // backtrack
    let mut regions = Vec::new();
    let mut durations = Vec::new();
    let (mut t, mut k) = (t_len, best_k);
    loop {
        let c = end[t][k];
        let (start, prev) = c.back;
        regions.push(k + 1);
        durations.push(t - start as usize);
        if prev == NONE {
            break;
        }
        t = start as usize;
        k = prev as usize;
    }
    regions.reverse();
    durations.reverse();
    let labels = regions
        .iter()
        .zip(&durations)
        .flat_map(|(&r, &n)| std::iter::repeat_n(r, n))
        .collect();
    Ok(Segmentation {
        regions,
        durations,
        labels,
        score: end[t_len][best_k].score,
    })
}

/// `cand` beats `best` under [`compare_paths`]. The path closures reconstruct
/// region sequences and only run on exact ties of score and segment count.
fn better(
    cand: &Cell,
    best: &Cell,
    cand_path: impl FnOnce() -> Vec<usize>,
    best_path: impl FnOnce() -> Vec<usize>,
) -> bool {
    if best.score == f64::NEG_INFINITY {
        return cand.score > f64::NEG_INFINITY;
    }
    if cand.score != best.score {
        return cand.score > best.score;
    }
    if cand.segs != best.segs {
        return cand.segs < best.segs;
    }
    cand_path() < best_path()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_log_pmf_values() {
        assert!((residence_log_pmf(1, 1.0) + 1.0).abs() < 1e-12);
        let expect = (4.0 * (-2.0f64).exp() / 2.0).ln();
        assert!((residence_log_pmf(2, 2.0) - expect).abs() < 1e-12);
        assert!((residence_log_pmf(2, 2.0) + 1.3069).abs() < 1e-4);
        assert!(residence_log_pmf(200, 200.0).is_finite());
        assert!(residence_log_pmf(100_000, 3.0).is_finite());
    }

    #[test]
    fn transition_prior_cases() {
        let m = [5.0; 6];
        assert_eq!(transition_log_prior(3, 2, &m), f64::NEG_INFINITY);
        assert_eq!(transition_log_prior(3, 3, &m), f64::NEG_INFINITY);
        assert_eq!(transition_log_prior(2, 3, &m), 0.0);
        assert!((transition_log_prior(1, 3, &m) - (2.0f64 / 3.0).ln()).abs() < 1e-12);
        let uneven = [1.0, 7.5, 2.0, 30.0];
        for k in 1..4 {
            assert_eq!(transition_log_prior(k, k + 1, &uneven), 0.0);
        }
    }

    #[test]
    fn single_region_takes_whole_sequence() {
        let ll: Vec<Vec<f64>> = (0..7).map(|t| vec![-(t as f64)]).collect();
        let seg = decode_segments(&ll, &[4.0], 7).unwrap();
        assert_eq!(seg.regions, vec![1]);
        assert_eq!(seg.durations, vec![7]);
        let expect = -21.0 + residence_log_pmf(7, 4.0);
        assert!((seg.score - expect).abs() < 1e-12);
    }

    #[test]
    fn separated_blocks_are_recovered() {
        // slots 0..4 favor region 1, 4..7 region 3
        let ll: Vec<Vec<f64>> = (0..7)
            .map(|t| if t < 4 { vec![0.0, -50.0, -50.0] } else { vec![-50.0, -50.0, 0.0] })
            .collect();
        let seg = decode_segments(&ll, &[4.0, 4.0, 3.0], 7).unwrap();
        assert_eq!(seg.regions, vec![1, 3]);
        assert_eq!(seg.durations, vec![4, 3]);
        let s = segmentation_score(&ll, &[4.0, 4.0, 3.0], &[1, 3], &[4, 3]);
        assert!((s - seg.score).abs() < 1e-12);
    }

    #[test]
    fn ties_prefer_fewer_segments_then_lexicographic() {
        // every single-slot candidate scores the same; the lowest region wins
        let ll = vec![vec![0.0, 0.0, 0.0]];
        let seg = decode_segments(&ll, &[1.0, 1.0, 1.0], 1).unwrap();
        assert_eq!(seg.regions, vec![1]);
    }

    #[test]
    fn rejects_empty_and_zero_cap() {
        assert!(decode_segments(&[], &[1.0], 3).is_err());
        assert!(decode_segments(&[vec![0.0]], &[1.0], 0).is_err());
    }

    #[test]
    fn duration_cap_forces_more_segments() {
        let ll: Vec<Vec<f64>> = (0..6).map(|_| vec![0.0, -1.0]).collect();
        let seg = decode_segments(&ll, &[3.0, 3.0], 3).unwrap();
        assert!(seg.durations.iter().all(|&d| d <= 3));
        assert_eq!(seg.durations.iter().sum::<usize>(), 6);
        assert_eq!(seg.regions, vec![1, 2]);
    }
}
