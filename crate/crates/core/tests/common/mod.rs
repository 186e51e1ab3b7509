//! Brute-force references shared by the integration tests.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BTreeSet;

use radiomap::assignment::assignment_cost;
use radiomap::coarse::hsmm::compare_paths;
use radiomap::coarse::segmentation_score;

pub fn permutations(xs: &[usize]) -> Vec<Vec<usize>> {
    if xs.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for i in 0..xs.len() {
        let mut rest = xs.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

pub fn exhaustive_assignment(cost: &[Vec<f64>]) -> f64 {
    let cols: Vec<usize> = (0..cost.len()).collect();
    permutations(&cols)
        .iter()
        .map(|p| assignment_cost(cost, p))
        .fold(f64::INFINITY, f64::min)
}

/// Every ordered segmentation: strictly increasing regions with durations summing to `t`.
pub fn all_segmentations(t: usize, k: usize, max_dur: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    fn compositions(t: usize, parts: usize, max_dur: usize) -> Vec<Vec<usize>> {
        if parts == 0 {
            return if t == 0 { vec![vec![]] } else { vec![] };
        }
        let mut out = Vec::new();
        for first in 1..=max_dur.min(t) {
            for mut rest in compositions(t - first, parts - 1, max_dur) {
                rest.insert(0, first);
                out.push(rest);
            }
        }
        out
    }
    let mut out = Vec::new();
    for mask in 1u32..(1 << k) {
        let regions: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).map(|i| i + 1).collect();
        for durations in compositions(t, regions.len(), max_dur) {
            out.push((regions.clone(), durations));
        }
    }
    out
}

/// Best segmentation by enumeration, with the decoder's tie-breaking order.
pub fn brute_force_viterbi(
    loglik: &[Vec<f64>],
    means: &[f64],
    max_dur: usize,
) -> Option<(f64, Vec<usize>, Vec<usize>)> {
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    for (r, n) in all_segmentations(loglik.len(), means.len(), max_dur) {
        let s = segmentation_score(loglik, means, &r, &n);
        let better = match &best {
            None => true,
            Some((bs, br, _)) => compare_paths((s, &r), (*bs, br)) == Ordering::Greater,
        };
        if better {
            best = Some((s, r, n));
        }
    }
    best
}

fn distinct(xs: &[usize]) -> Vec<usize> {
    xs.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
}

/// Best accuracy over every injective relabeling of predicted ids onto true ids.
pub fn acc_oracle(pred: &[usize], truth: &[usize]) -> f64 {
    let (p, mut t) = (distinct(pred), distinct(truth));
    let mut fresh = usize::MAX;
    while t.len() < p.len() {
        t.push(fresh);
        fresh -= 1;
    }
    let mut best = 0usize;
    for perm in permutations(&t) {
        let hits = pred
            .iter()
            .zip(truth)
            .filter(|(a, b)| perm[p.iter().position(|x| x == *a).unwrap()] == **b)
            .count();
        best = best.max(hits);
    }
    best as f64 / pred.len() as f64
}

pub fn nmi_oracle(pred: &[usize], truth: &[usize]) -> f64 {
    let n = pred.len() as f64;
    let prob = |f: &dyn Fn(usize) -> bool| (0..pred.len()).filter(|&i| f(i)).count() as f64 / n;
    let (p, t) = (distinct(pred), distinct(truth));
    let h = |ids: &[usize], xs: &[usize]| -> f64 {
        ids.iter()
            .map(|&a| prob(&|i| xs[i] == a))
            .map(|q| -q * q.ln())
            .sum()
    };
    let mut mi = 0.0;
    for &a in &p {
        for &b in &t {
            let pab = prob(&|i| pred[i] == a && truth[i] == b);
            if pab > 0.0 {
                mi += pab * (pab / (prob(&|i| pred[i] == a) * prob(&|i| truth[i] == b))).ln();
            }
        }
    }
    let (hp, ht) = (h(&p, pred), h(&t, truth));
    if hp + ht == 0.0 {
        1.0
    } else {
        2.0 * mi / (hp + ht)
    }
}

/// Pair counts: (same in both, same only in pred, same only in truth, different in both).
pub fn pair_counts(pred: &[usize], truth: &[usize]) -> (f64, f64, f64, f64) {
    let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..pred.len() {
        for j in i + 1..pred.len() {
            match (pred[i] == pred[j], truth[i] == truth[j]) {
                (true, true) => a += 1.0,
                (true, false) => b += 1.0,
                (false, true) => c += 1.0,
                (false, false) => d += 1.0,
            }
        }
    }
    (a, b, c, d)
}

/// (precision, f1, ari) from pair counts.
pub fn pairwise_oracle(pred: &[usize], truth: &[usize]) -> (f64, f64, f64) {
    let (a, b, c, d) = pair_counts(pred, truth);
    let precision = if a + b == 0.0 { 1.0 } else { a / (a + b) };
    let recall = if a + c == 0.0 { 1.0 } else { a / (a + c) };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let denom = (a + b) * (b + d) + (a + c) * (c + d);
    let ari = if denom == 0.0 { 1.0 } else { 2.0 * (a * d - b * c) / denom };
    (precision, f1, ari)
}

/// Edit distance straight from the recursive definition.
pub fn lev_oracle<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            let sub = lev_oracle(ra, rb) + usize::from(x != y);
            sub.min(lev_oracle(ra, b) + 1).min(lev_oracle(a, rb) + 1)
        }
    }
}

pub fn topo_oracle(inferred: &[Vec<usize>], truth: &[Vec<usize>]) -> f64 {
    let total: f64 = inferred
        .iter()
        .zip(truth)
        .map(|(a, b)| {
            let m = a.len().max(b.len());
            if m == 0 {
                100.0
            } else {
                100.0 * (1.0 - lev_oracle(a, b) as f64 / m as f64)
            }
        })
        .sum();
    total / inferred.len() as f64
}
