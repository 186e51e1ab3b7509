//! Trajectory score: per-slot RSS log-likelihood over the valid APs of the slot's
//! region plus the walking-speed log prior between consecutive slots.

use std::f64::consts::{LN_10, PI};

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon};
use crate::propagation::{PropagationModel, MIN_DISTANCE};
use crate::sim::MobilityConfig;

/// Smallest shadowing variance (dB²) used inside the likelihood.
pub const SIGMA2_FLOOR: f64 = 1e-2;

#[derive(Debug, Clone, Copy)]
struct Term {
    ap: Point,
    alpha: f64,
    beta: f64,
    inv_two_var: f64,
    log_norm: f64,
    y: f64,
}

/// Precomputed scoring data for one trajectory (or a window of one).
#[derive(Debug, Clone)]
pub struct TrajectoryProblem<'a> {
    env: &'a Environment,
    labels: Vec<usize>,
    offsets: Vec<usize>,
    terms: Vec<Term>,
    mean_speed: f64,
    speed_std: f64,
    slot_interval: f64,
    max_step: f64,
    speed_log_norm: f64,
}

impl<'a> TrajectoryProblem<'a> {
    /// `sigma2` replaces every fitted variance when given.
    pub fn new(
        labels: &[usize],
        rss: &[Vec<f64>],
        params: &PropagationModel,
        env: &'a Environment,
        mobility: &MobilityConfig,
        sigma2: Option<f64>,
    ) -> Result<Self> {
        if labels.len() != rss.len() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} RSS rows",
                labels.len(),
                rss.len()
            )));
        }
        let mut offsets = Vec::with_capacity(labels.len() + 1);
        let mut terms = Vec::new();
        offsets.push(0);
        for (&k, row) in labels.iter().zip(rss) {
            if k == 0 || k > env.num_regions() {
                return Err(Error::InvalidArgument(format!("unknown region label {k}")));
            }
            for q in env.valid_aps(k) {
                let p = params.get(k, q).ok_or_else(|| {
                    Error::Config(format!("no propagation parameters for region {k}, AP {q}"))
                })?;
                let var = sigma2.unwrap_or(p.sigma2).max(SIGMA2_FLOOR);
                terms.push(Term {
                    ap: env.ap(q).position,
                    alpha: p.alpha,
                    beta: p.beta,
                    inv_two_var: 0.5 / var,
                    log_norm: -0.5 * (2.0 * PI * var).ln(),
                    y: row[q - 1],
                });
            }
            offsets.push(terms.len());
        }
        let sd = mobility.speed_std;
        Ok(TrajectoryProblem {
            env,
            labels: labels.to_vec(),
            offsets,
            terms,
            mean_speed: mobility.mean_speed,
            speed_std: sd,
            slot_interval: mobility.slot_interval,
            max_step: mobility.max_step(),
            speed_log_norm: -0.5 * (2.0 * PI * sd * sd).ln(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn env(&self) -> &Environment {
        self.env
    }

    pub fn polygon(&self, t: usize) -> &Polygon {
        &self.env.region(self.labels[t]).polygon
    }

    pub fn max_step(&self) -> f64 {
        self.max_step
    }

    /// RSS log-likelihood of slot `t` at `p` (no containment check).
    pub fn slot_loglik(&self, t: usize, p: Point) -> f64 {
        let min2 = MIN_DISTANCE * MIN_DISTANCE;
        self.terms[self.offsets[t]..self.offsets[t + 1]]
            .iter()
            .map(|term| {
                let d2 = term.ap.dist2(p).max(min2);
                let mean = term.beta + term.alpha * (0.5 * d2.ln() / LN_10);
                let r = term.y - mean;
                term.log_norm - r * r * term.inv_two_var
            })
            .sum()
    }

    /// Log prior of moving `prev -> cur` into slot `t`. Steps that change region
    /// are unconstrained.
    pub fn step_logprior(&self, t: usize, prev: Point, cur: Point) -> f64 {
        if self.labels[t] != self.labels[t - 1] {
            return 0.0;
        }
        let d = prev.dist(cur);
        if d >= self.max_step {
            return f64::NEG_INFINITY;
        }
        let z = (d / self.slot_interval - self.mean_speed) / self.speed_std;
        self.speed_log_norm - 0.5 * z * z
    }

    /// Full score of `points`; `-inf` when a point leaves its region or a step is
    /// too long.
    pub fn score(&self, points: &[Point]) -> f64 {
        assert_eq!(points.len(), self.len(), "trajectory length mismatch");
        let mut total = 0.0;
        for (t, &p) in points.iter().enumerate() {
            if !self.polygon(t).contains(p) {
                return f64::NEG_INFINITY;
            }
            total += self.slot_loglik(t, p);
            if t > 0 {
                total += self.step_logprior(t, points[t - 1], p);
            }
        }
        total
    }
}

/// Log posterior (up to a constant) of a candidate trajectory.
pub fn trajectory_log_posterior(
    points: &[Point],
    labels: &[usize],
    rss: &[Vec<f64>],
    params: &PropagationModel,
    env: &Environment,
    mobility: &MobilityConfig,
) -> Result<f64> {
    if points.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} points for {} labels",
            points.len(),
            labels.len()
        )));
    }
    Ok(TrajectoryProblem::new(labels, rss, params, env, mobility, None)?.score(points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::VisibilityRule;
    use crate::propagation::PathLoss;

    fn setup() -> (Environment, PropagationModel) {
        let env = Environment::new(
            vec![Polygon::rectangle(0.0, 0.0, 10.0, 10.0)],
            vec![Point::new(0.5, 0.5), Point::new(9.0, 1.0), Point::new(5.0, 9.0)],
            vec![],
            0.5,
            VisibilityRule::Centroid,
        )
        .unwrap();
        let mut pm = PropagationModel::new();
        pm.insert(1, 1, PathLoss { alpha: -20.0, beta: -30.0, sigma2: 4.0 });
        pm.insert(1, 2, PathLoss { alpha: -25.0, beta: -35.0, sigma2: 1.0 });
        pm.insert(1, 3, PathLoss { alpha: -22.0, beta: -33.0, sigma2: 9.0 });
        (env, pm)
    }

    #[test]
    fn zero_residual_gives_peak() {
        let (env, mut pm) = setup();
        let env1 = Environment::new(
            env.regions().iter().map(|r| r.polygon.clone()).collect(),
            vec![Point::new(0.5, 0.5)],
            vec![],
            0.5,
            VisibilityRule::Centroid,
        )
        .unwrap();
        pm.insert(1, 1, PathLoss { alpha: -20.0, beta: -30.0, sigma2: 4.0 });
        let x = Point::new(6.5, 8.5);
        let y = -30.0 - 20.0 * x.dist(Point::new(0.5, 0.5)).log10();
        let s = trajectory_log_posterior(&[x], &[1], &[vec![y]], &pm, &env1, &MobilityConfig::default()).unwrap();
        assert!((s + 0.5 * (2.0 * PI * 4.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn long_step_is_impossible() {
        let (env, pm) = setup();
        let mob = MobilityConfig::default();
        let a = Point::new(2.0, 2.0);
        let b = Point::new(2.0 + mob.max_step() + 1e-6, 2.0);
        let rss = vec![vec![-60.0; 3]; 2];
        let s = trajectory_log_posterior(&[a, b], &[1, 1], &rss, &pm, &env, &mob).unwrap();
        assert_eq!(s, f64::NEG_INFINITY);
        let outside = trajectory_log_posterior(&[Point::new(11.0, 2.0)], &[1], &rss[..1], &pm, &env, &mob).unwrap();
        assert_eq!(outside, f64::NEG_INFINITY);
    }

    #[test]
    fn hand_summed_terms() {
        let (env, pm) = setup();
        let mob = MobilityConfig::default();
        let xs = [Point::new(3.0, 4.0), Point::new(4.0, 4.5)];
        let rss = vec![vec![-52.0, -61.0, -58.5], vec![-50.0, -63.0, -57.0]];
        let mut expect = 0.0;
        for (t, x) in xs.iter().enumerate() {
            for q in 1..=3 {
                let p = pm.get(1, q).unwrap();
                let d = env.ap(q).position.dist(*x);
                let mu = p.beta + p.alpha * d.log10();
                let r = rss[t][q - 1] - mu;
                expect += -0.5 * (2.0 * PI * p.sigma2).ln() - r * r / (2.0 * p.sigma2);
            }
        }
        let v = xs[0].dist(xs[1]) / mob.slot_interval;
        let sd = mob.speed_std;
        expect += -0.5 * (2.0 * PI * sd * sd).ln() - (v - mob.mean_speed).powi(2) / (2.0 * sd * sd);
        let s = trajectory_log_posterior(&xs, &[1, 1], &rss, &pm, &env, &mob).unwrap();
        assert!((s - expect).abs() < 1e-10, "{s} vs {expect}");
    }
}
