//! Evaluation metrics: clustering agreement, topology accuracy, RSS
//! reconstruction error and localization error.
//!
//! Conventions: NMI is normalized by the arithmetic mean of the two entropies;
//! precision, recall and F1 are pairwise (over unordered sample pairs); ARI uses
//! the usual expected-index correction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assignment::hungarian;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::sim::RSS_FLOOR;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringMetrics {
    pub acc: f64,
    pub nmi: f64,
    pub f1: f64,
    pub ari: f64,
    pub precision: f64,
    /// Percent of samples whose predicted label differs from the true one, with
    /// no relabeling.
    pub e_cla: f64,
}

struct Contingency {
    table: Vec<Vec<f64>>,
    rows: Vec<f64>,
    cols: Vec<f64>,
    n: f64,
}

fn contingency(pred: &[usize], truth: &[usize]) -> Contingency {
    let index = |xs: &[usize]| {
        let mut m = BTreeMap::new();
        for &x in xs {
            let next = m.len();
            m.entry(x).or_insert(next);
        }
        m
    };
    let (pi, ti) = (index(pred), index(truth));
    let mut table = vec![vec![0.0; ti.len()]; pi.len()];
    for (p, t) in pred.iter().zip(truth) {
        table[pi[p]][ti[t]] += 1.0;
    }
    let rows = table.iter().map(|r| r.iter().sum()).collect();
    let cols = (0..ti.len()).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    Contingency {
        table,
        rows,
        cols,
        n: pred.len() as f64,
    }
}

fn entropy(counts: &[f64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * p.ln()
        })
        .sum()
}

fn pairs(c: f64) -> f64 {
    c * (c - 1.0) / 2.0
}

/// Fraction of samples on the diagonal under the best one-to-one label matching.
pub fn matched_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let c = contingency(pred, truth);
    Ok(best_match(&c) / c.n)
}

fn best_match(c: &Contingency) -> f64 {
    let (r, k) = (c.rows.len(), c.cols.len());
    let size = r.max(k);
    let cost: Vec<Vec<f64>> = (0..size)
        .map(|i| {
            (0..size)
                .map(|j| if i < r && j < k { -c.table[i][j] } else { 0.0 })
                .collect()
        })
        .collect();
    hungarian(&cost)
        .iter()
        .enumerate()
        .filter(|&(i, &j)| i < r && j < k)
        .map(|(i, &j)| c.table[i][j])
        .sum()
}

fn check_lengths(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::InvalidArgument(format!(
            "label sequences differ in length: {} vs {}",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument("label sequences are empty".into()));
    }
    Ok(())
}

pub fn clustering_metrics(pred: &[usize], truth: &[usize]) -> Result<ClusteringMetrics> {
    check_lengths(pred, truth)?;
    let c = contingency(pred, truth);
    let n = c.n;
    let acc = best_match(&c) / n;

    let (hp, ht) = (entropy(&c.rows, n), entropy(&c.cols, n));
    let mut mi = 0.0;
    for (i, row) in c.table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0.0 {
                mi += nij / n * (n * nij / (c.rows[i] * c.cols[j])).ln();
            }
        }
    }
    let nmi = if hp + ht == 0.0 { 1.0 } else { mi / ((hp + ht) / 2.0) };

    let same_both: f64 = c.table.iter().flatten().map(|&x| pairs(x)).sum();
    let same_pred: f64 = c.rows.iter().map(|&x| pairs(x)).sum();
    let same_truth: f64 = c.cols.iter().map(|&x| pairs(x)).sum();
    let ratio = |a: f64, b: f64| if b == 0.0 { 1.0 } else { a / b };
    let precision = ratio(same_both, same_pred);
    let recall = ratio(same_both, same_truth);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let expected = same_pred * same_truth / pairs(n).max(f64::MIN_POSITIVE);
    let max_index = (same_pred + same_truth) / 2.0;
    let ari = if max_index == expected {
        1.0
    } else {
        (same_both - expected) / (max_index - expected)
    };

    let wrong = pred.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(ClusteringMetrics {
        acc,
        nmi,
        f1,
        ari,
        precision,
        e_cla: wrong as f64 / n * 100.0,
    })
}

/// Unit-cost edit distance.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Mean over users of `100 (1 - Lev(inferred, true) / max(len))`.
pub fn topo_acc(inferred: &[Vec<usize>], truth: &[Vec<usize>]) -> Result<f64> {
    if inferred.len() != truth.len() || inferred.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "need matching non-empty order lists, got {} and {}",
            inferred.len(),
            truth.len()
        )));
    }
    let total: f64 = inferred
        .iter()
        .zip(truth)
        .map(|(a, b)| {
            let m = a.len().max(b.len());
            if m == 0 {
                100.0
            } else {
                (1.0 - levenshtein(a, b) as f64 / m as f64) * 100.0
            }
        })
        .sum();
    Ok(total / inferred.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RssErrors {
    pub rmse: f64,
    pub mae: f64,
    /// RMSE as a percentage of the measured dynamic range.
    pub nrmse: f64,
    /// Pairs kept after dropping sub-floor measurements.
    pub count: usize,
}

/// Errors of `(estimated, measured)` pairs, ignoring measurements below the floor.
pub fn rss_error_metrics(pairs: &[(f64, f64)]) -> Result<RssErrors> {
    let kept: Vec<(f64, f64)> = pairs.iter().copied().filter(|&(_, e)| e >= RSS_FLOOR).collect();
    if kept.is_empty() {
        return Err(Error::UndefinedMetric(
            "every measured value lies below the floor".into(),
        ));
    }
    let n = kept.len() as f64;
    let sq: f64 = kept.iter().map(|(a, b)| (a - b) * (a - b)).sum();
    let abs: f64 = kept.iter().map(|(a, b)| (a - b).abs()).sum();
    let rmse = (sq / n).sqrt();
    let lo = kept.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = kept.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let nrmse = if hi > lo {
        rmse / (hi - lo) * 100.0
    } else if rmse == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(RssErrors {
        rmse,
        mae: abs / n,
        nrmse,
        count: kept.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub e_loc: f64,
    /// `(error, fraction)` with errors ascending and fractions `i / N`.
    pub cdf: Vec<(f64, f64)>,
}

pub fn localization_report(estimates: &[Point], truths: &[Point]) -> Result<LocalizationReport> {
    if estimates.len() != truths.len() || estimates.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "need matching non-empty point lists, got {} and {}",
            estimates.len(),
            truths.len()
        )));
    }
    let mut errors: Vec<f64> = estimates.iter().zip(truths).map(|(a, b)| a.dist(*b)).collect();
    let e_loc = errors.iter().sum::<f64>() / errors.len() as f64;
    errors.sort_by(f64::total_cmp);
    let n = errors.len() as f64;
    let cdf = errors
        .into_iter()
        .enumerate()
        .map(|(i, e)| (e, (i + 1) as f64 / n))
        .collect();
    Ok(LocalizationReport { e_loc, cdf })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_labelings() {
        let l = [1, 1, 2, 2, 3, 3, 3];
        let m = clustering_metrics(&l, &l).unwrap();
        assert_eq!((m.acc, m.ari, m.e_cla), (1.0, 1.0, 0.0));
        assert!((m.nmi - 1.0).abs() < 1e-12);
        assert!((m.f1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn renamed_labels() {
        let t = [1, 1, 2, 2, 3, 3];
        let p = [2, 2, 3, 3, 1, 1];
        let m = clustering_metrics(&p, &t).unwrap();
        assert_eq!(m.acc, 1.0);
        assert_eq!(m.e_cla, 100.0);
        assert!((m.nmi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch() {
        assert!(clustering_metrics(&[1, 2], &[1]).is_err());
    }

    #[test]
    fn topo_examples() {
        assert_eq!(topo_acc(&[vec![1, 2, 3]], &[vec![1, 2, 3]]).unwrap(), 100.0);
        assert_eq!(topo_acc(&[vec![1, 3, 4]], &[vec![1, 2, 3, 4]]).unwrap(), 75.0);
        assert_eq!(topo_acc(&[vec![]], &[vec![1, 2, 3]]).unwrap(), 0.0);
        assert_eq!(levenshtein(b"kitten", b"sitting"), 3);
    }

    #[test]
    fn rss_errors() {
        let same = rss_error_metrics(&[(-50.0, -50.0), (-70.0, -70.0)]).unwrap();
        assert_eq!((same.rmse, same.mae, same.nrmse), (0.0, 0.0, 0.0));
        let off = rss_error_metrics(&[(-47.0, -50.0), (-67.0, -70.0), (-150.0, -141.0)]).unwrap();
        assert!((off.rmse - 3.0).abs() < 1e-12 && (off.mae - 3.0).abs() < 1e-12);
        assert_eq!(off.count, 2);
        assert!((off.nrmse - 15.0).abs() < 1e-12);
        assert!(matches!(rss_error_metrics(&[(0.0, -141.0)]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn localization() {
        let t = [Point::new(0.0, 0.0), Point::new(1.0, 1.0)];
        let e = [Point::new(1.0, 0.0), Point::new(1.0, 4.0)];
        let r = localization_report(&e, &t).unwrap();
        assert_eq!(r.e_loc, 2.0);
        assert_eq!(r.cdf, vec![(1.0, 0.5), (3.0, 1.0)]);
        let z = localization_report(&t, &t).unwrap();
        assert_eq!(z.e_loc, 0.0);
    }
}
