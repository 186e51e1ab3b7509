//! Mapping virtual (discovered) regions onto physical floor-plan regions.

use crate::assignment::hungarian;
use crate::env::Environment;
use crate::geometry::Point;

/// Signal-weighted AP centroid of one RSS vector, weights `10^(y/10)` (mW).
pub fn signal_anchor(rss: &[f64], env: &Environment) -> Point {
    let peak = rss.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    for (y, ap) in rss.iter().zip(env.aps()) {
        // relative to the peak so weights never underflow
        let w = 10f64.powf((y - peak) / 10.0);
        sx += w * ap.position.x;
        sy += w * ap.position.y;
        sw += w;
    }
    Point::new(sx / sw, sy / sw)
}

/// Mean anchor of each virtual cluster; `None` for clusters with no samples.
pub fn cluster_centroids<'a>(
    samples: impl IntoIterator<Item = (&'a [f64], usize)>,
    num_clusters: usize,
    env: &Environment,
) -> Vec<Option<Point>> {
    let mut sums = vec![(0.0, 0.0, 0usize); num_clusters];
    for (rss, k) in samples {
        let a = signal_anchor(rss, env);
        let s = &mut sums[k - 1];
        s.0 += a.x;
        s.1 += a.y;
        s.2 += 1;
    }
    sums.into_iter()
        .map(|(x, y, n)| (n > 0).then(|| Point::new(x / n as f64, y / n as f64)))
        .collect()
}

/// One-to-one map from virtual cluster `k` (index `k - 1`) to a physical region id
/// minimizing the total squared centroid distance. Empty clusters cost nothing
/// anywhere and take whatever region is left.
pub fn match_virtual_to_physical(centroids: &[Option<Point>], region_refs: &[Point]) -> Vec<usize> {
    let cost: Vec<Vec<f64>> = centroids
        .iter()
        .map(|c| {
            region_refs
                .iter()
                .map(|v| c.map_or(0.0, |c| c.dist2(*v)))
                .collect()
        })
        .collect();
    hungarian(&cost).into_iter().map(|j| j + 1).collect()
}
