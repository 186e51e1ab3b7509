//! Region-specific log-distance path-loss parameters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Distances below this are clamped before taking the logarithm.
pub const MIN_DISTANCE: f64 = 0.01;

pub fn log_distance(a: Point, b: Point) -> f64 {
    a.dist(b).max(MIN_DISTANCE).log10()
}

/// `y = beta + alpha * log10(d) + N(0, sigma2)` for one (region, AP) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLoss {
    /// dB per decade of distance.
    pub alpha: f64,
    /// dBm at 1 m.
    pub beta: f64,
    /// Shadowing variance in dB².
    pub sigma2: f64,
}

impl PathLoss {
    pub fn mean_at(&self, log10_d: f64) -> f64 {
        self.beta + self.alpha * log10_d
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PropagationModel {
    entries: BTreeMap<(usize, usize), PathLoss>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    region: usize,
    ap: usize,
    alpha: f64,
    beta: f64,
    sigma2: f64,
}

impl PropagationModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, region: usize, ap: usize, p: PathLoss) {
        self.entries.insert((region, ap), p);
    }

    pub fn get(&self, region: usize, ap: usize) -> Option<&PathLoss> {
        self.entries.get(&(region, ap))
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &PathLoss)> {
        self.entries.iter().map(|(&k, v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Noise-free RSS prediction for AP `ap` (at `ap_pos`) seen from `x` in `region`.
    pub fn predict(&self, region: usize, ap: usize, ap_pos: Point, x: Point) -> Option<f64> {
        self.get(region, ap)
            .map(|p| p.mean_at(log_distance(ap_pos, x)))
    }

    pub fn to_json(&self) -> Result<String> {
        let list: Vec<Entry> = self
            .entries
            .iter()
            .map(|(&(region, ap), p)| Entry {
                region,
                ap,
                alpha: p.alpha,
                beta: p.beta,
                sigma2: p.sigma2,
            })
            .collect();
        Ok(serde_json::to_string_pretty(&list)? + "\n")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let list: Vec<Entry> = serde_json::from_str(s)?;
        let mut m = PropagationModel::new();
        for e in list {
            if e.sigma2 < 0.0 {
                return Err(Error::parse(
                    "propagation model",
                    format!("negative variance for ({}, {})", e.region, e.ap),
                ));
            }
            m.insert(
                e.region,
                e.ap,
                PathLoss {
                    alpha: e.alpha,
                    beta: e.beta,
                    sigma2: e.sigma2,
                },
            );
        }
        Ok(m)
    }
}
