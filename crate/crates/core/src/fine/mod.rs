//! Fine stage: coordinates inside the inferred regions.
//!
//! Alternates between a closed-form least-squares refit of every valid
//! (region, AP) path-loss pair ([`fit_propagation`]) and a region-constrained
//! genetic search over whole trajectories ([`ga`]) scored by the RSS likelihood
//! plus the Gaussian walking-speed prior ([`objective`]).

pub mod alternate;
pub mod ga;
pub mod objective;


use crate::env::Environment;
use crate::error::{Error, Result};

pub use alternate::{
    alternate_location_inference, fit_all_propagation, initial_trajectory, FineConfig, FineIteration,
    FineResult,
};
pub use ga::{ga_search, GaConfig, GaOutcome};
pub use objective::{trajectory_log_posterior, TrajectoryProblem, SIGMA2_FLOOR};

/// Smallest perpendicular spread (m) for a set of APs to count as non-collinear.
pub const COLLINEAR_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Identifiability {
    Ok,
    TooFewAps { count: usize },
    Collinear { spread: f64 },
}

impl Identifiability {
    pub fn is_ok(&self) -> bool {
        matches!(self, Identifiability::Ok)
    }

    pub fn describe(&self, region: usize) -> String {
        match self {
            Identifiability::Ok => format!("region {region}: identifiable"),
            Identifiability::TooFewAps { count } => format!(
                "region {region}: only {count} valid AP(s), at least three non-collinear APs are needed"
            ),
            Identifiability::Collinear { spread } => format!(
                "region {region}: valid APs are collinear (max offset {spread:.3} m), positions suffer flip ambiguities across the AP axis"
            ),
        }
    }
}

/// Whether coordinates in region `k` can be pinned down by its valid APs.
pub fn check_identifiability(k: usize, env: &Environment) -> Identifiability {
    let pts: Vec<_> = env.valid_aps(k).into_iter().map(|q| env.ap(q).position).collect();
    if pts.len() < 3 {
        return Identifiability::TooFewAps { count: pts.len() };
    }
    // widest pair defines the candidate line
    let (mut a, mut b, mut far) = (pts[0], pts[0], 0.0);
    for (i, &p) in pts.iter().enumerate() {
        for &q in &pts[i + 1..] {
            let d = p.dist2(q);
            if d > far {
                (a, b, far) = (p, q, d);
            }
        }
    }
    let spread = if far == 0.0 {
        0.0
    } else {
        let dir = (b - a) * (1.0 / far.sqrt());
        pts.iter()
            .map(|&p| (p - a).cross(dir).abs())
            .fold(0.0, f64::max)
    };
    if spread > COLLINEAR_TOLERANCE {
        Identifiability::Ok
    } else {
        Identifiability::Collinear { spread }
    }
}

/// Least-squares path-loss fit of one (region, AP) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsFit {
    pub alpha: f64,
    pub beta: f64,
    pub sigma2: f64,
    /// All log-distances coincided; `alpha` is the fallback slope.
    pub rank_deficient: bool,
}

/// Slope used when the distances carry no slope information.
pub const FALLBACK_ALPHA: f64 = -20.0;

/// Ordinary least squares of `y` on `[log10 d, 1]` over `(log10 d, y)` samples,
/// with the variance estimate taken as the mean squared residual.
pub fn fit_propagation(samples: &[(f64, f64)]) -> Result<LsFit> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples to fit".into()));
    }
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx) * (s.0 - mx)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    // centered normal equations; equivalent to (B^T B)^-1 B^T r
    let rank_deficient = sxx <= 1e-12 * n;
    let alpha = if rank_deficient { FALLBACK_ALPHA } else { sxy / sxx };
    let beta = my - alpha * mx;
    let sigma2 = samples
        .iter()
        .map(|&(x, y)| {
            let r = y - beta - alpha * x;
            r * r
        })
        .sum::<f64>()
        / n;
    Ok(LsFit {
        alpha,
        beta,
        sigma2,
        rank_deficient,
    })
}
