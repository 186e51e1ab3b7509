//! Alternating optimization of trajectories and path-loss parameters.

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use super::ga::{ga_search, GaConfig};
use super::objective::TrajectoryProblem;
use super::{check_identifiability, fit_propagation};
use crate::coarse::signal_anchor;
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::propagation::{log_distance, PathLoss, PropagationModel};
use crate::rng::seeded;
use crate::sim::{MobilityConfig, RssSequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FineConfig {
    /// Total point displacement (m) below which the alternation stops.
    pub tolerance: f64,
    pub max_outer: usize,
    /// Slots per GA window.
    pub window: usize,
    /// Slots shared by consecutive windows.
    pub overlap: usize,
    /// Shadowing standard deviation (dB) assumed during the first GA pass.
    pub provisional_sigma: f64,
    /// Consecutive objective drops that trigger a rollback.
    pub divergence_patience: usize,
    pub init_alpha: f64,
    pub init_beta: f64,
    /// Fit path-loss parameters to the initial trajectories before the first GA pass.
    pub prefit: bool,
    pub ga: GaConfig,
}

impl Default for FineConfig {
    fn default() -> Self {
        FineConfig {
            tolerance: 1e-3,
            max_outer: 200,
            window: 12,
            overlap: 3,
            provisional_sigma: 8.0,
            divergence_patience: 5,
            init_alpha: -20.0,
            init_beta: 0.0,
            prefit: true,
            ga: GaConfig::default(),
        }
    }
}

impl FineConfig {
    pub fn validate(&self) -> Result<()> {
        self.ga.validate()?;
        let bad = |m: String| Err(Error::Config(format!("fine: {m}")));
        if self.window == 0 || self.overlap >= self.window {
            return bad(format!(
                "need window >= 1 and overlap < window, got {} and {}",
                self.window, self.overlap
            ));
        }
        if !(self.tolerance >= 0.0) || self.max_outer == 0 {
            return bad("tolerance must be >= 0 and max_outer >= 1".into());
        }
        if !(self.provisional_sigma > 0.0) {
            return bad("provisional_sigma must be positive".into());
        }
        if self.divergence_patience == 0 {
            return bad("divergence_patience must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineIteration {
    pub iteration: usize,
    pub objective: f64,
    /// Sum of point displacements since the previous iteration (m).
    pub displacement: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FineResult {
    pub trajectories: Vec<Vec<Point>>,
    pub params: PropagationModel,
    pub trace: Vec<FineIteration>,
    pub converged: bool,
    /// The divergence guard fired and the best earlier state was restored.
    pub diverged: bool,
    /// Labeled regions that fail the identifiability check.
    pub degraded_regions: Vec<usize>,
    /// GA generations (over all runs) whose best fitness decreased.
    pub ga_regressions: usize,
}

/// Per-slot signal-weighted anchors, moved into the labeled region when needed.
pub fn initial_trajectory(rss: &[Vec<f64>], labels: &[usize], env: &Environment) -> Vec<Point> {
    rss.iter()
        .zip(labels)
        .map(|(y, &k)| env.region(k).polygon.project(signal_anchor(y, env)))
        .collect()
}

/// Least-squares refit of every valid (region, AP) pair from the current
/// trajectories. Pairs without samples keep their `previous` value.
pub fn fit_all_propagation(
    trajectories: &[Vec<Point>],
    labels: &[Vec<usize>],
    sequences: &[RssSequence],
    env: &Environment,
    previous: &PropagationModel,
) -> Result<PropagationModel> {
    let mut out = previous.clone();
    for ap in env.aps() {
        for &k in &ap.valid_regions {
            let mut samples = Vec::new();
            for ((traj, lab), seq) in trajectories.iter().zip(labels).zip(sequences) {
                for ((&x, &l), y) in traj.iter().zip(lab).zip(&seq.observations) {
                    if l == k {
                        samples.push((log_distance(ap.position, x), y[ap.id - 1]));
                    }
                }
            }
            if samples.is_empty() {
                continue;
            }
            let f = fit_propagation(&samples)?;
            if f.rank_deficient {
                debug!("region {k}, AP {}: distances carry no slope, using fallback", ap.id);
            }
            out.insert(
                k,
                ap.id,
                PathLoss {
                    alpha: f.alpha,
                    beta: f.beta,
                    sigma2: f.sigma2,
                },
            );
        }
    }
    Ok(out)
}

fn windows(len: usize, size: usize, overlap: usize) -> Vec<(usize, usize)> {
    if len <= size {
        return vec![(0, len)];
    }
    let step = size - overlap;
    let mut out = Vec::new();
    let mut s = 0;
    while s + size < len {
        out.push((s, s + size));
        s += step;
    }
    out.push((len - size, len));
    out
}

/// Shortens within-region steps that reach the speed limit (stitching can create
/// them) and keeps every point in its region.
fn repair(points: &mut [Point], labels: &[usize], env: &Environment, max_step: f64) {
    for t in 1..points.len() {
        if labels[t] != labels[t - 1] {
            continue;
        }
        let d = points[t].dist(points[t - 1]);
        if d >= max_step {
            let p = points[t - 1].lerp(points[t], 0.999 * max_step / d);
            points[t] = env.region(labels[t]).polygon.project(p);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn search_user<R: rand::Rng + ?Sized>(
    current: &[Point],
    labels: &[usize],
    rss: &[Vec<f64>],
    params: &PropagationModel,
    sigma2: Option<f64>,
    env: &Environment,
    mobility: &MobilityConfig,
    config: &FineConfig,
    rng: &mut R,
) -> Result<(Vec<Point>, usize)> {
    let t_len = current.len();
    let mut sum = vec![Point::new(0.0, 0.0); t_len];
    let mut count = vec![0usize; t_len];
    let mut regressions = 0;
    for (a, b) in windows(t_len, config.window, config.overlap) {
        let problem = TrajectoryProblem::new(&labels[a..b], &rss[a..b], params, env, mobility, sigma2)?;
        let out = ga_search(&problem, &current[a..b], &config.ga, mobility, rng)?;
        regressions += out.regressions();
        for (i, p) in out.best.into_iter().enumerate() {
            sum[a + i] = sum[a + i] + p;
            count[a + i] += 1;
        }
    }
    let mut pts: Vec<Point> = sum
        .into_iter()
        .zip(&count)
        .zip(labels)
        .map(|((s, &c), &k)| env.region(k).polygon.project(s * (1.0 / c as f64)))
        .collect();
    repair(&mut pts, labels, env, mobility.max_step());
    Ok((pts, regressions))
}

fn objective(
    trajectories: &[Vec<Point>],
    labels: &[Vec<usize>],
    sequences: &[RssSequence],
    params: &PropagationModel,
    env: &Environment,
    mobility: &MobilityConfig,
) -> Result<f64> {
    let mut total = 0.0;
    for ((x, l), s) in trajectories.iter().zip(labels).zip(sequences) {
        total += TrajectoryProblem::new(l, &s.observations, params, env, mobility, None)?.score(x);
    }
    Ok(total)
}

/// Recovers per-slot coordinates for every sequence given its region labels.
pub fn alternate_location_inference(
    sequences: &[RssSequence],
    labels: &[Vec<usize>],
    env: &Environment,
    mobility: &MobilityConfig,
    config: &FineConfig,
    seed: u64,
) -> Result<FineResult> {
    config.validate()?;
    mobility.validate()?;
    if sequences.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} sequences but {} label sequences",
            sequences.len(),
            labels.len()
        )));
    }
    for (s, l) in sequences.iter().zip(labels) {
        if s.len() != l.len() {
            return Err(Error::InvalidArgument(format!(
                "user {}: {} slots but {} labels",
                s.user,
                s.len(),
                l.len()
            )));
        }
        if let Some(&k) = l.iter().find(|&&k| k == 0 || k > env.num_regions()) {
            return Err(Error::InvalidArgument(format!("user {}: unknown region {k}", s.user)));
        }
    }

    let mut used: Vec<usize> = labels.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    let mut degraded_regions = Vec::new();
    for &k in &used {
        let id = check_identifiability(k, env);
        if !id.is_ok() {
            warn!("{}", id.describe(k));
            degraded_regions.push(k);
        }
    }

    let mut params = PropagationModel::new();
    for ap in env.aps() {
        for &k in &ap.valid_regions {
            let init = PathLoss {
                alpha: config.init_alpha,
                beta: config.init_beta,
                sigma2: 0.0,
            };
            params.insert(k, ap.id, init);
        }
    }
    let mut trajs: Vec<Vec<Point>> = sequences
        .iter()
        .zip(labels)
        .map(|(s, l)| initial_trajectory(&s.observations, l, env))
        .collect();
    if sequences.iter().all(|s| s.is_empty()) {
        return Ok(FineResult {
            trajectories: trajs,
            params,
            trace: Vec::new(),
            converged: true,
            diverged: false,
            degraded_regions,
            ga_regressions: 0,
        });
    }
    if config.prefit {
        params = fit_all_propagation(&trajs, labels, sequences, env, &params)?;
    }

    let provisional = config.provisional_sigma * config.provisional_sigma;
    let mut rng = seeded(seed);
    let mut trace: Vec<FineIteration> = Vec::new();
    let mut best: Option<(f64, Vec<Vec<Point>>, PropagationModel)> = None;
    let mut drops = 0;
    let (mut converged, mut diverged) = (false, false);
    let mut ga_regressions = 0;

    for iteration in 1..=config.max_outer {
        let sigma2 = (iteration == 1).then_some(provisional);
        let mut next = Vec::with_capacity(trajs.len());
        for ((x, l), s) in trajs.iter().zip(labels).zip(sequences) {
            if x.is_empty() {
                next.push(Vec::new());
                continue;
            }
            let (pts, reg) = search_user(x, l, &s.observations, &params, sigma2, env, mobility, config, &mut rng)?;
            ga_regressions += reg;
            next.push(pts);
        }
        let displacement: f64 = trajs
            .iter()
            .zip(&next)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| p.dist(*q)))
            .sum();
        trajs = next;
        params = fit_all_propagation(&trajs, labels, sequences, env, &params)?;
        let obj = objective(&trajs, labels, sequences, &params, env, mobility)?;
        debug!("fine iteration {iteration}: objective {obj:.3}, displacement {displacement:.4} m");
        if let Some(prev) = trace.last() {
            if obj < prev.objective {
                drops += 1;
            } else {
                drops = 0;
            }
        }
        trace.push(FineIteration {
            iteration,
            objective: obj,
            displacement,
        });
        if best.as_ref().is_none_or(|b| obj > b.0) {
            best = Some((obj, trajs.clone(), params.clone()));
        }
        if drops >= config.divergence_patience {
            warn!(
                "fine objective fell for {drops} consecutive iterations; restoring the best state"
            );
            let (_, t, p) = best.take().expect("best state recorded");
            trajs = t;
            params = p;
            diverged = true;
            break;
        }
        if displacement < config.tolerance {
            converged = true;
            break;
        }
    }
    info!("fine stage finished after {} iterations", trace.len());
    Ok(FineResult {
        trajectories: trajs,
        params,
        trace,
        converged,
        diverged,
        degraded_regions,
        ga_regressions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_layout() {
        assert_eq!(windows(150, 200, 50), vec![(0, 150)]);
        assert_eq!(windows(200, 200, 50), vec![(0, 200)]);
        assert_eq!(windows(400, 200, 50), vec![(0, 200), (150, 350), (200, 400)]);
        let w = windows(2000, 200, 50);
        assert_eq!(w.last(), Some(&(1800, 2000)));
        assert!(w.windows(2).all(|p| p[1].0 < p[0].1));
    }
}
