//! Reference-point radio map and KNN fingerprint localization.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::env::{Environment, RpGrid, RpPoint};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::propagation::{log_distance, PropagationModel};
use crate::sim::RSS_FLOOR;

/// Neighbors used by inverse-distance interpolation.
pub const IDW_NEIGHBORS: usize = 4;
pub const IDW_POWER: f64 = 2.0;
/// Minimum number of dimensions a query must share with a fingerprint.
pub const MIN_SHARED_DIMS: usize = 3;

/// Origin of one fingerprint entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    /// Mean of the samples snapped to the reference point.
    Measured,
    /// Path-loss model prediction.
    Model,
    /// Inverse-distance interpolation from measured reference points (or the
    /// floor when there are none).
    Interpolated,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Measured => "measured",
            Provenance::Model => "model",
            Provenance::Interpolated => "interpolated",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "measured" => Ok(Provenance::Measured),
            "model" => Ok(Provenance::Model),
            "interpolated" => Ok(Provenance::Interpolated),
            other => Err(Error::parse("provenance", format!("unknown tag {other:?}"))),
        }
    }
}

/// A located RSS observation used to build the map.
#[derive(Debug, Clone, Copy)]
pub struct MapSample<'a> {
    pub pos: Point,
    pub region: usize,
    pub rss: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadioMap {
    pub points: Vec<RpPoint>,
    pub fingerprints: Vec<Vec<f64>>,
    pub provenance: Vec<Vec<Provenance>>,
    /// Samples snapped to each reference point.
    pub support: Vec<usize>,
}

impl RadioMap {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.fingerprints.first().map_or(0, Vec::len)
    }

    /// Reference point nearest to `p` within region `k` (any region if `k` has none).
    pub fn nearest_point(&self, p: Point, k: Option<usize>) -> Option<usize> {
        let pick = |filter: &dyn Fn(&RpPoint) -> bool| {
            self.points
                .iter()
                .enumerate()
                .filter(|(_, r)| filter(r))
                .min_by(|a, b| a.1.pos.dist2(p).total_cmp(&b.1.pos.dist2(p)).then(a.0.cmp(&b.0)))
                .map(|(i, _)| i)
        };
        k.and_then(|k| pick(&|r: &RpPoint| r.region == k)).or_else(|| pick(&|_| true))
    }
}

/// Builds the map: snapped samples are averaged per reference point; the rest
/// is filled from the path-loss model where it is valid and by inverse-distance
/// weighting of measured points elsewhere.
pub fn build_radio_map(
    grid: &RpGrid,
    samples: &[MapSample],
    params: &PropagationModel,
    env: &Environment,
) -> RadioMap {
    let dim = env.num_aps();
    let n = grid.len();
    let radius = grid.spacing() / std::f64::consts::SQRT_2;
    let mut sums = vec![vec![0.0; dim]; n];
    let mut support = vec![0usize; n];
    for s in samples {
        if let Some(i) = grid.snap(s.region, s.pos, radius) {
            for (acc, v) in sums[i].iter_mut().zip(s.rss) {
                *acc += v;
            }
            support[i] += 1;
        }
    }
    let covered: Vec<usize> = (0..n).filter(|&i| support[i] > 0).collect();
    let points = grid.points().to_vec();
    let mut fingerprints = Vec::with_capacity(n);
    let mut provenance = Vec::with_capacity(n);
    for i in 0..n {
        if support[i] > 0 {
            fingerprints.push(sums[i].iter().map(|s| s / support[i] as f64).collect());
            provenance.push(vec![Provenance::Measured; dim]);
            continue;
        }
        let rp = points[i];
        let mut neighbors: Option<Vec<(f64, usize)>> = None;
        let mut fp = Vec::with_capacity(dim);
        let mut pv = Vec::with_capacity(dim);
        for ap in env.aps() {
            let model = if ap.valid_regions.contains(&rp.region) {
                params.get(rp.region, ap.id)
            } else {
                None
            };
            if let Some(p) = model {
                fp.push(p.mean_at(log_distance(ap.position, rp.pos)));
                pv.push(Provenance::Model);
                continue;
            }
            let nb = neighbors.get_or_insert_with(|| nearest_covered(&points, &covered, rp.pos));
            fp.push(idw(nb, &sums, &support, ap.id - 1));
            pv.push(Provenance::Interpolated);
        }
        fingerprints.push(fp);
        provenance.push(pv);
    }
    RadioMap {
        points,
        fingerprints,
        provenance,
        support,
    }
}

fn nearest_covered(points: &[RpPoint], covered: &[usize], p: Point) -> Vec<(f64, usize)> {
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(IDW_NEIGHBORS + 1);
    for &j in covered {
        let d = points[j].pos.dist2(p);
        if best.len() == IDW_NEIGHBORS && d >= best[IDW_NEIGHBORS - 1].0 {
            continue;
        }
        let at = best.partition_point(|&(bd, _)| bd <= d);
        best.insert(at, (d, j));
        best.truncate(IDW_NEIGHBORS);
    }
    best
}

fn idw(neighbors: &[(f64, usize)], sums: &[Vec<f64>], support: &[usize], q: usize) -> f64 {
    if neighbors.is_empty() {
        return RSS_FLOOR;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for &(d2, j) in neighbors {
        let w = 1.0 / d2.sqrt().powf(IDW_POWER).max(1e-12);
        num += w * sums[j][q] / support[j] as f64;
        den += w;
    }
    num / den
}

/// Unweighted mean position of the `k` fingerprints nearest to `query`.
///
/// Distances use only dimensions where both the query and the fingerprint lie
/// above the floor; fingerprints sharing fewer than three such dimensions are
/// skipped. Ties are broken by reference-point order.
pub fn knn_localize(query: &[f64], map: &RadioMap, k: usize) -> Result<Point> {
    if k == 0 {
        return Err(Error::InvalidArgument("KNN needs k >= 1".into()));
    }
    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(map.len());
    for (i, fp) in map.fingerprints.iter().enumerate() {
        let mut shared = 0;
        let mut d2 = 0.0;
        for (a, b) in query.iter().zip(fp) {
            if *a > RSS_FLOOR && *b > RSS_FLOOR {
                shared += 1;
                d2 += (a - b) * (a - b);
            }
        }
        if shared >= MIN_SHARED_DIMS {
            scored.push((d2.sqrt(), i));
        }
    }
    if scored.is_empty() {
        return Err(Error::Localization(format!(
            "query shares fewer than {MIN_SHARED_DIMS} audible APs with every reference point"
        )));
    }
    let take = k.min(scored.len());
    scored.select_nth_unstable_by(take - 1, |a, b| {
        a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
    });
    let mut chosen = scored[..take].to_vec();
    chosen.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut acc = Point::default();
    for &(_, i) in &chosen {
        acc = acc + map.points[i].pos;
    }
    Ok(acc * (1.0 / take as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{build_rp_grid, VisibilityRule};
    use crate::geometry::Polygon;
    use crate::propagation::PathLoss;

    fn one_room() -> Environment {
        Environment::new(
            vec![Polygon::rectangle(0.0, 0.0, 2.0, 2.0)],
            vec![Point::new(0.0, 0.0), Point::new(2.0, 0.0), Point::new(1.0, 2.0)],
            vec![],
            0.5,
            VisibilityRule::Centroid,
        )
        .unwrap()
    }

    #[test]
    fn measured_means_and_model_fill() {
        let env = one_room();
        let grid = build_rp_grid(&env);
        let mut pm = PropagationModel::new();
        for q in 1..=3 {
            pm.insert(1, q, PathLoss { alpha: -20.0, beta: -30.0, sigma2: 1.0 });
        }
        let a = [-50.0, -60.0, -70.0];
        let b = [-60.0, -70.0, -80.0];
        let s = [
            MapSample { pos: Point::new(1.0, 1.0), region: 1, rss: &a },
            MapSample { pos: Point::new(1.05, 0.98), region: 1, rss: &b },
        ];
        let map = build_radio_map(&grid, &s, &pm, &env);
        let i = map.nearest_point(Point::new(1.0, 1.0), Some(1)).unwrap();
        assert_eq!(map.fingerprints[i], vec![-55.0, -65.0, -75.0]);
        assert_eq!(map.support[i], 2);
        assert_eq!(map.support.iter().filter(|&&c| c > 0).count(), 1);
        let j = map.nearest_point(Point::new(2.0, 2.0), Some(1)).unwrap();
        assert_eq!(map.provenance[j], vec![Provenance::Model; 3]);
        let d = Point::new(2.0, 2.0).dist(Point::new(0.0, 0.0));
        assert!((map.fingerprints[j][0] - (-30.0 - 20.0 * d.log10())).abs() < 1e-12);
    }

    #[test]
    fn knn_exact_match() {
        let env = one_room();
        let grid = build_rp_grid(&env);
        let mut pm = PropagationModel::new();
        for q in 1..=3 {
            pm.insert(1, q, PathLoss { alpha: -22.0, beta: -31.0, sigma2: 1.0 });
        }
        let map = build_radio_map(&grid, &[], &pm, &env);
        let i = 7;
        let est = knn_localize(&map.fingerprints[i], &map, 1).unwrap();
        assert_eq!(est, map.points[i].pos);
        assert!(knn_localize(&[-150.0, -150.0, -150.0], &map, 5).is_err());
    }

    #[test]
    fn provenance_round_trip() {
        for p in [Provenance::Measured, Provenance::Model, Provenance::Interpolated] {
            assert_eq!(p.as_str().parse::<Provenance>().unwrap(), p);
        }
    }
}
