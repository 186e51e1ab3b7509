//! Synthetic office layouts and ground-truth propagation parameters.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Environment, VisibilityRule, DEFAULT_RP_SPACING};
use crate::error::Result;
use crate::geometry::{Point, Polygon, Segment};
use crate::propagation::{PathLoss, PropagationModel};

/// A straight corridor of equal rectangular rooms with full-height walls every
/// `zone_size` rooms and a fixed, slightly jittered AP pattern in each room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorridorLayout {
    pub regions: usize,
    pub room_width: f64,
    pub room_depth: f64,
    pub aps_per_region: usize,
    pub zone_size: usize,
    pub ap_jitter: f64,
}

impl Default for CorridorLayout {
    /// Nine rooms of 8 m x 10.67 m (about 768 m² in total) with three APs each.
    fn default() -> Self {
        CorridorLayout {
            regions: 9,
            room_width: 8.0,
            room_depth: 768.0 / 72.0,
            aps_per_region: 3,
            zone_size: 3,
            ap_jitter: 0.5,
        }
    }
}

const AP_PATTERN: [(f64, f64); 6] = [
    (0.25, 0.22),
    (0.78, 0.48),
    (0.30, 0.80),
    (0.70, 0.15),
    (0.50, 0.55),
    (0.80, 0.85),
];

impl CorridorLayout {
    pub fn build<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Environment> {
        let (w, d) = (self.room_width, self.room_depth);
        let regions = (0..self.regions)
            .map(|i| {
                let x0 = i as f64 * w;
                Polygon::rectangle(x0, 0.0, x0 + w, d)
            })
            .collect();
        let mut aps = Vec::new();
        for i in 0..self.regions {
            let x0 = i as f64 * w;
            for j in 0..self.aps_per_region {
                let (fx, fy) = AP_PATTERN[j % AP_PATTERN.len()];
                let jx = (rng.random::<f64>() - 0.5) * 2.0 * self.ap_jitter;
                let jy = (rng.random::<f64>() - 0.5) * 2.0 * self.ap_jitter;
                let x = (x0 + fx * w + jx).clamp(x0 + 0.1, x0 + w - 0.1);
                let y = (fy * d + jy).clamp(0.1, d - 0.1);
                aps.push(Point::new(x, y));
            }
        }
        let mut walls = Vec::new();
        if self.zone_size > 0 {
            for i in (self.zone_size..self.regions).step_by(self.zone_size) {
                let x = i as f64 * w;
                walls.push(Segment::new(Point::new(x, 0.0), Point::new(x, d)));
            }
        }
        Environment::new(regions, aps, walls, DEFAULT_RP_SPACING, VisibilityRule::Centroid)
    }
}

/// Sampling ranges for ground-truth path-loss parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagationPrior {
    /// Range of alpha inside the AP's host region.
    pub host_alpha: [f64; 2],
    pub host_beta: [f64; 2],
    /// Range of alpha in the other valid regions.
    pub neighbor_alpha: [f64; 2],
    pub neighbor_beta: [f64; 2],
    /// Shadowing standard deviation in dB.
    pub sigma: f64,
}

impl Default for PropagationPrior {
    fn default() -> Self {
        PropagationPrior {
            host_alpha: [-25.0, -18.0],
            host_beta: [-38.0, -30.0],
            neighbor_alpha: [-30.0, -22.0],
            neighbor_beta: [-44.0, -34.0],
            sigma: 2.0,
        }
    }
}

fn uniform<R: Rng + ?Sized>(range: [f64; 2], rng: &mut R) -> f64 {
    range[0] + (range[1] - range[0]) * rng.random::<f64>()
}

/// Draws parameters for every valid (region, AP) pair, in (AP, region) order.
pub fn sample_propagation<R: Rng + ?Sized>(
    env: &Environment,
    prior: &PropagationPrior,
    rng: &mut R,
) -> PropagationModel {
    let mut model = PropagationModel::new();
    for ap in env.aps() {
        for &k in &ap.valid_regions {
            let (a, b) = if k == ap.host_region {
                (prior.host_alpha, prior.host_beta)
            } else {
                (prior.neighbor_alpha, prior.neighbor_beta)
            };
            let alpha = uniform(a, rng);
            let beta = uniform(b, rng);
            model.insert(
                k,
                ap.id,
                PathLoss {
                    alpha,
                    beta,
                    sigma2: prior.sigma * prior.sigma,
                },
            );
        }
    }
    model
}
