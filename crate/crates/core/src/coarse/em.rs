//! Generalized EM for region inference.

use log::{debug, info, warn};

use super::hsmm::{decode_segments, segmentation_score, Segmentation};
use super::kmeans::{kmeans, KMeansOptions};
use super::matching::{cluster_centroids, match_virtual_to_physical};
use super::order::build_order_dataset;
use super::subspace::{fit_subspace, SubspaceModel};
use super::{CoarseConfig, CoarseModel, CoarseResult, EmIteration, Embedder, FeatureScaler};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::sim::{segments_from_labels, RssSequence};

/// K-means on per-slot feature vectors, with clusters renumbered `1..=k` by their
/// mean normalized temporal position (`t / (T - 1)`) across all sequences.
///
/// Returns the k-means index behind each renumbered cluster and the per-slot
/// labels of every sequence.
pub fn kmeans_init<R: rand::Rng + ?Sized>(
    sequences: &[Vec<Vec<f64>>],
    k: usize,
    opts: &KMeansOptions,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<Vec<usize>>)> {
    let points: Vec<&[f64]> = sequences.iter().flatten().map(Vec::as_slice).collect();
    if k == 0 || points.len() < k {
        return Err(Error::InvalidArgument(format!(
            "k-means needs at least {k} samples, got {}",
            points.len()
        )));
    }
    let km = kmeans(&points, k, opts, rng);
    let mut pos = vec![(0.0, 0usize); k];
    let mut i = 0;
    for seq in sequences {
        let denom = (seq.len().max(2) - 1) as f64;
        for t in 0..seq.len() {
            let c = km.labels[i];
            pos[c].0 += t as f64 / denom;
            pos[c].1 += 1;
            i += 1;
        }
    }
    let mean_pos = |c: usize| {
        if pos[c].1 == 0 {
            f64::INFINITY
        } else {
            pos[c].0 / pos[c].1 as f64
        }
    };
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| mean_pos(a).total_cmp(&mean_pos(b)).then(a.cmp(&b)));
    let mut rank = vec![0; k];
    for (r, &c) in order.iter().enumerate() {
        rank[c] = r + 1;
    }
    let mut labels = Vec::with_capacity(sequences.len());
    let mut i = 0;
    for seq in sequences {
        labels.push(km.labels[i..i + seq.len()].iter().map(|&c| rank[c]).collect());
        i += seq.len();
    }
    Ok((order, labels))
}

/// Mean decoded duration of each region over all segmentations; regions that
/// never appear keep their previous mean.
pub fn update_residence_means(segs: &[Segmentation], previous: &[f64]) -> Vec<f64> {
    let mut sum = vec![0.0; previous.len()];
    let mut count = vec![0usize; previous.len()];
    for s in segs {
        for (&r, &n) in s.regions.iter().zip(&s.durations) {
            sum[r - 1] += n as f64;
            count[r - 1] += 1;
        }
    }
    previous
        .iter()
        .enumerate()
        .map(|(k, &p)| if count[k] == 0 { p } else { sum[k] / count[k] as f64 })
        .collect()
}

fn fit_all(
    embedded: &[Vec<Vec<f64>>],
    labels: &[Vec<usize>],
    k: usize,
    rank: usize,
    fallback_var: f64,
) -> Vec<SubspaceModel> {
    let dim = embedded.iter().flatten().next().map_or(0, Vec::len);
    let mut members: Vec<Vec<&[f64]>> = vec![Vec::new(); k];
    for (seq, lab) in embedded.iter().zip(labels) {
        for (y, &l) in seq.iter().zip(lab) {
            members[l - 1].push(y);
        }
    }
    members
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let s = fit_subspace(m, rank, dim, fallback_var);
            if s.degenerate {
                warn!("virtual region {} has {} samples; subspace is degenerate", i + 1, m.len());
            }
            s
        })
        .collect()
}

fn global_variance(embedded: &[Vec<Vec<f64>>]) -> f64 {
    let rows: Vec<&Vec<f64>> = embedded.iter().flatten().collect();
    let dim = rows.first().map_or(0, |r| r.len());
    if rows.is_empty() || dim == 0 {
        return 1.0;
    }
    let sc = FeatureScaler::fit(rows.iter().copied(), dim);
    sc.scale.iter().map(|s| s * s).sum::<f64>() / dim as f64
}

/// Score of labels that already form a strictly increasing run sequence,
/// otherwise `-inf`.
fn labeling_score(loglik: &[Vec<f64>], means: &[f64], labels: &[usize], max_dur: usize) -> f64 {
    let (r, n) = segments_from_labels(labels);
    if r.windows(2).any(|w| w[1] <= w[0]) || n.iter().any(|&d| d > max_dur) {
        return f64::NEG_INFINITY;
    }
    segmentation_score(loglik, means, &r, &n)
}

/// Runs the coarse stage over all sequences and maps the result to physical
/// regions of `env`. The number of regions is that of `env`.
pub fn em_region_inference(
    sequences: &[RssSequence],
    env: &Environment,
    config: &CoarseConfig,
    seed: u64,
) -> Result<CoarseResult> {
    config.validate()?;
    if sequences.is_empty() {
        return Err(Error::InvalidArgument("region inference needs at least one sequence".into()));
    }
    let k = env.num_regions();
    let dim = env.num_aps();
    if let Some(s) = sequences.iter().find(|s| s.is_empty() || s.dim() != dim) {
        return Err(Error::InvalidArgument(format!(
            "sequence of user {} must be non-empty with {dim} APs per slot",
            s.user
        )));
    }

    let scaler = FeatureScaler::fit(sequences.iter().flat_map(|s| &s.observations), dim);
    let feats: Vec<Vec<Vec<f64>>> = sequences
        .iter()
        .map(|s| s.observations.iter().map(|r| scaler.apply(r)).collect())
        .collect();

    let mut embedder = Embedder::init(dim, config.hidden, config.readout_scale, &mut substream(seed, 0));
    let km_opts = KMeansOptions {
        max_iter: config.kmeans_max_iter,
        tol: config.kmeans_tol,
        restarts: config.kmeans_restarts,
    };
    let (reference_order, mut labels) = kmeans_init(&feats, k, &km_opts, &mut substream(seed, 1))?;
    let mut order_rng = substream(seed, 2);

    let mut embedded: Vec<Vec<Vec<f64>>> = feats.iter().map(|f| embedder.embed(f)).collect();
    let fallback = global_variance(&embedded);
    let mut means = vec![0.0; k];
    for l in labels.iter().flatten() {
        means[l - 1] += 1.0;
    }
    means.iter_mut().for_each(|m| *m = (*m / sequences.len() as f64).max(1.0));

    let mut model = CoarseModel {
        scaler,
        embedder: embedder.clone(),
        subspaces: fit_all(&embedded, &labels, k, config.subspace_dim, fallback),
        residence_means: means,
        reference_order,
        physical: Vec::new(),
    };

    let mut prev_obj: f64 = embedded
        .iter()
        .zip(&labels)
        .map(|(e, l)| {
            let md = model.max_dur(config.max_dur_factor, e.len());
            labeling_score(&model.loglik_table(e), &model.residence_means, l, md)
        })
        .sum();
    let mut trace = Vec::new();
    let mut segs: Vec<Segmentation> = Vec::new();
    let mut converged = false;
    let mut pending_loss = None;

    for iteration in 1..=config.max_iter {
        segs = embedded
            .iter()
            .map(|e| {
                decode_segments(
                    &model.loglik_table(e),
                    &model.residence_means,
                    model.max_dur(config.max_dur_factor, e.len()),
                )
            })
            .collect::<Result<_>>()?;
        let obj: f64 = segs.iter().map(|s| s.score).sum();
        if !obj.is_finite() {
            return Err(Error::Numerical(format!(
                "coarse objective became non-finite at iteration {iteration}"
            )));
        }
        let rel = if prev_obj.is_finite() {
            (obj - prev_obj).abs() / prev_obj.abs().max(f64::MIN_POSITIVE)
        } else {
            f64::INFINITY
        };
        trace.push(EmIteration {
            iteration,
            objective: obj,
            relative_change: rel,
            verifier_loss: pending_loss.take(),
        });
        debug!("EM iteration {iteration}: objective {obj:.3}, relative change {rel:.3e}");
        if rel < config.tolerance {
            converged = true;
            break;
        }
        if iteration == config.max_iter {
            break;
        }

        // M-step
        labels = segs.iter().map(|s| s.labels.clone()).collect();
        let grouped: Vec<Vec<&[Vec<f64>]>> = feats
            .iter()
            .zip(&segs)
            .map(|(f, s)| {
                let mut start = 0;
                s.durations
                    .iter()
                    .map(|&n| {
                        let seg = &f[start..start + n];
                        start += n;
                        seg
                    })
                    .collect()
            })
            .collect();
        let data = build_order_dataset(&grouped, &config.order_options(), &mut order_rng);
        if !data.is_empty() && config.verifier_epochs > 0 {
            pending_loss = Some(embedder.train_order_verifier(
                &data,
                config.learning_rate,
                config.verifier_epochs,
                config.clip_norm,
            )?);
        }
        let empirical = update_residence_means(&segs, &model.residence_means);
        for (m, e) in model.residence_means.iter_mut().zip(empirical) {
            *m += config.residence_damping * (e - *m);
        }
        embedded = feats.iter().map(|f| embedder.embed(f)).collect();
        model.embedder = embedder.clone();
        model.subspaces = fit_all(&embedded, &labels, k, config.subspace_dim, fallback);
        prev_obj = obj;
    }
    if !converged {
        warn!("coarse EM stopped after {} iterations without converging", trace.len());
    }
    info!("coarse EM finished after {} iterations", trace.len());

    let centroids = cluster_centroids(
        sequences
            .iter()
            .zip(&segs)
            .flat_map(|(s, g)| s.observations.iter().map(Vec::as_slice).zip(g.labels.iter().copied())),
        k,
        env,
    );
    let refs: Vec<_> = env.regions().iter().map(|r| r.centroid()).collect();
    model.physical = match_virtual_to_physical(&centroids, &refs);

    let labels = segs
        .iter()
        .map(|s| s.labels.iter().map(|&l| model.physical[l - 1]).collect())
        .collect();
    let visit_orders = segs
        .iter()
        .map(|s| s.regions.iter().map(|&r| model.physical[r - 1]).collect())
        .collect();
    Ok(CoarseResult {
        model,
        segmentations: segs,
        labels,
        visit_orders,
        trace,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn residence_update() {
        let seg = |regions: Vec<usize>, durations: Vec<usize>| Segmentation {
            labels: Vec::new(),
            regions,
            durations,
            score: 0.0,
        };
        let segs = [seg(vec![1, 2], vec![3, 4]), seg(vec![2, 3], vec![6, 9])];
        assert_eq!(update_residence_means(&segs, &[7.0, 1.0, 1.0, 2.5]), vec![3.0, 5.0, 9.0, 2.5]);
    }

    #[test]
    fn transcript_follows_time() {
        // three blobs visited early, middle, late; shuffled feature values
        let centers = [[5.0, 0.0], [-5.0, 5.0], [0.0, -5.0]];
        let seqs: Vec<Vec<Vec<f64>>> = (0..3)
            .map(|m| {
                (0..30)
                    .map(|t| {
                        let c = centers[t / 10];
                        vec![c[0] + 0.01 * (t + m) as f64, c[1]]
                    })
                    .collect()
            })
            .collect();
        let (_, labels) = kmeans_init(&seqs, 3, &KMeansOptions::default(), &mut seeded(4)).unwrap();
        for l in &labels {
            let want: Vec<usize> = (0..30).map(|t| t / 10 + 1).collect();
            assert_eq!(l, &want);
        }
        let (_, one) = kmeans_init(&seqs, 1, &KMeansOptions::default(), &mut seeded(4)).unwrap();
        assert!(one.iter().flatten().all(|&l| l == 1));
    }
}
