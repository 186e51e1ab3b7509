use proptest::prelude::*;
use radiomap::env::{build_rp_grid, RpPoint};
use radiomap::radiomap::{build_radio_map, knn_localize, MapSample, Provenance, RadioMap};
use radiomap::rng::seeded;
use radiomap::sim::world::{sample_propagation, CorridorLayout, PropagationPrior};
use radiomap::sim::{generate_rss, simulate_trajectory, MobilityConfig, RSS_FLOOR};
use radiomap::{Error, Point};

fn toy_map(fps: Vec<Vec<f64>>) -> RadioMap {
    let n = fps.len();
    let dim = fps[0].len();
    RadioMap {
        points: (0..n)
            .map(|i| RpPoint {
                pos: Point::new(i as f64, (i * i) as f64 * 0.5),
                region: 1,
            })
            .collect(),
        fingerprints: fps,
        provenance: vec![vec![Provenance::Measured; dim]; n],
        support: vec![1; n],
    }
}

/// Mean position of the k nearest fingerprints by full Euclidean distance.
fn knn_oracle(query: &[f64], map: &RadioMap, k: usize) -> Point {
    let mut d: Vec<(f64, usize)> = map
        .fingerprints
        .iter()
        .enumerate()
        .map(|(i, f)| (f.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(), i))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (mut x, mut y) = (0.0, 0.0);
    for &(_, i) in &d[..k] {
        x += map.points[i].pos.x;
        y += map.points[i].pos.y;
    }
    Point::new(x / k as f64, y / k as f64)
}

#[test]
fn six_point_map() {
    let map = toy_map(vec![
        vec![-40.0, -60.0, -70.0],
        vec![-45.0, -58.0, -72.0],
        vec![-50.0, -55.0, -65.0],
        vec![-60.0, -50.0, -60.0],
        vec![-70.0, -45.0, -55.0],
        vec![-80.0, -40.0, -50.0],
    ]);
    let query = [-52.0, -54.0, -63.0];
    // squared distances: 229, 146, 9, 89, 469, 1149 -> nearest five are 2, 3, 1, 0, 4
    let got = knn_localize(&query, &map, 5).unwrap();
    let want = Point::new((2.0 + 3.0 + 1.0 + 0.0 + 4.0) / 5.0, (2.0 + 4.5 + 0.5 + 0.0 + 8.0) / 5.0);
    assert!((got.x - want.x).abs() < 1e-12 && (got.y - want.y).abs() < 1e-12);
    assert_eq!(knn_localize(&map.fingerprints[4].clone(), &map, 1).unwrap(), map.points[4].pos);
}

#[test]
fn too_few_audible_aps() {
    let map = toy_map(vec![vec![-40.0, -60.0, RSS_FLOOR], vec![-45.0, -58.0, -72.0]]);
    let err = knn_localize(&[-50.0, RSS_FLOOR, -60.0], &map, 1).unwrap_err();
    assert!(matches!(err, Error::Localization(_)));
}

proptest! {
    #[test]
    fn matches_oracle_and_stays_in_hull(
        fps in prop::collection::vec(prop::collection::vec(-100.0f64..-30.0, 4), 2..12),
        query in prop::collection::vec(-100.0f64..-30.0, 4),
        k in 1usize..6,
    ) {
        let map = toy_map(fps);
        let k = k.min(map.len());
        let got = knn_localize(&query, &map, k).unwrap();
        let want = knn_oracle(&query, &map, k);
        prop_assert!((got.x - want.x).abs() < 1e-9 && (got.y - want.y).abs() < 1e-9);
        let (lo, hi) = map.points.iter().fold((f64::MAX, f64::MIN), |(l, h), p| (l.min(p.pos.x), h.max(p.pos.x)));
        prop_assert!(got.x >= lo - 1e-12 && got.x <= hi + 1e-12);
    }
}

#[test]
fn noiseless_ground_truth_map() {
    let env = CorridorLayout { regions: 3, ..CorridorLayout::default() }.build(&mut seeded(0)).unwrap();
    let prior = PropagationPrior { sigma: 0.0, ..PropagationPrior::default() };
    let params = sample_propagation(&env, &prior, &mut seeded(1));
    let mobility = MobilityConfig::default().with_uniform_residence(3, 40.0);
    let mut rng = seeded(2);
    let traj = simulate_trajectory(1, &env, &mobility, &mut rng).unwrap();
    let seq = generate_rss(&traj, &env, &params, &mut rng).unwrap();
    let samples: Vec<MapSample> = traj
        .points
        .iter()
        .zip(&traj.labels)
        .zip(&seq.observations)
        .map(|((&pos, &region), rss)| MapSample { pos, region, rss })
        .collect();
    let grid = build_rp_grid(&env);
    let map = build_radio_map(&grid, &samples, &params, &env);

    assert_eq!(map.len(), grid.len());
    assert!(map.fingerprints.iter().all(|f| f.len() == env.num_aps()));
    let measured = (0..map.len()).filter(|&i| map.provenance[i][0] == Provenance::Measured).count();
    assert_eq!(measured, map.support.iter().filter(|&&s| s > 0).count());
    assert!(measured > 0);
    for i in 0..map.len() {
        let tags = &map.provenance[i];
        if map.support[i] > 0 {
            assert!(tags.iter().all(|&p| p == Provenance::Measured));
        } else {
            assert!(tags.iter().all(|&p| p != Provenance::Measured));
        }
    }
    for i in (0..map.len()).filter(|&i| map.support[i] > 0).take(25) {
        let est = knn_localize(&map.fingerprints[i], &map, 1).unwrap();
        assert_eq!(est, map.points[i].pos, "RP {i}");
    }
}
