//! K-means with k-means++ seeding, used to bootstrap the coarse stage.

use log::debug;
use rand::Rng;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centers: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub max_iter: usize,
    /// Stop once no center moves farther than this (Euclidean).
    pub tol: f64,
    pub restarts: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            max_iter: 300,
            tol: 1e-4,
            restarts: 4,
        }
    }
}

fn plus_plus<R: Rng + ?Sized>(points: &[&[f64]], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.random_range(0..points.len())].to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            rng.random_range(0..points.len())
        };
        centers.push(points[idx].to_vec());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &centers[centers.len() - 1]));
        }
    }
    centers
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = dist2(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn lloyd<R: Rng + ?Sized>(points: &[&[f64]], k: usize, opts: &KMeansOptions, rng: &mut R) -> KMeans {
    let dim = points[0].len();
    let mut centers = plus_plus(points, k, rng);
    let mut labels = vec![0; points.len()];
    let mut iterations = 0;
    for it in 0..opts.max_iter.max(1) {
        iterations = it + 1;
        let mut dists = vec![0.0; points.len()];
        for (i, p) in points.iter().enumerate() {
            let (j, d) = nearest(p, &centers);
            labels[i] = j;
            dists[i] = d;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p.iter()) {
                *s += v;
            }
        }
        let mut taken = vec![false; points.len()];
        for j in 0..k {
            if counts[j] == 0 {
                // re-seed from the point farthest from its center
                let far = (0..points.len())
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .unwrap_or(0);
                taken[far] = true;
                debug!("k-means: cluster {j} empty, re-seeding from point {far}");
                counts[j] = 1;
                sums[j] = points[far].to_vec();
                dists[far] = 0.0;
            }
        }
        let mut shift: f64 = 0.0;
        for j in 0..k {
            let new: Vec<f64> = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            shift = shift.max(dist2(&new, &centers[j]).sqrt());
            centers[j] = new;
        }
        if shift <= opts.tol {
            break;
        }
    }
    let mut inertia = 0.0;
    for (i, p) in points.iter().enumerate() {
        let (j, d) = nearest(p, &centers);
        labels[i] = j;
        inertia += d;
    }
    KMeans {
        centers,
        labels,
        inertia,
        iterations,
    }
}

/// Best-of-`restarts` Lloyd iterations. Labels are 0-based cluster indices.
///
/// # Panics
/// If `points` is empty or `k` is zero.
pub fn kmeans<R: Rng + ?Sized>(points: &[&[f64]], k: usize, opts: &KMeansOptions, rng: &mut R) -> KMeans {
    assert!(!points.is_empty() && k > 0, "kmeans needs points and k >= 1");
    let mut best: Option<KMeans> = None;
    for _ in 0..opts.restarts.max(1) {
        let run = lloyd(points, k, opts, rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    best.unwrap()
}
