//! Probabilistic-PCA emission models: `y = U theta + mu + eps` with
//! `theta ~ N(0, diag(sigma))`, `eps ~ N(0, s2 I)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Floor on the isotropic noise variance.
pub const NOISE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceModel {
    pub mean: Vec<f64>,
    /// Orthonormal principal directions, one `D`-vector per column.
    pub basis: Vec<Vec<f64>>,
    /// Variance of each principal coefficient (diagonal of Sigma).
    pub coef_var: Vec<f64>,
    pub noise_var: f64,
    /// Set when the cluster was too small for a proper fit.
    pub degenerate: bool,
    #[serde(skip)]
    cache: Option<Cache>,
}

#[derive(Debug, Clone, PartialEq)]
struct Cache {
    log_norm: f64,
    /// sigma_i / (sigma_i + s2) for each direction.
    shrink: Vec<f64>,
}

impl SubspaceModel {
    pub fn new(
        mean: Vec<f64>,
        basis: Vec<Vec<f64>>,
        coef_var: Vec<f64>,
        noise_var: f64,
        degenerate: bool,
    ) -> Self {
        let mut m = SubspaceModel {
            mean,
            basis,
            coef_var,
            noise_var,
            degenerate,
            cache: None,
        };
        m.refresh();
        m
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Recomputes cached normalizers; call after editing fields directly.
    pub fn refresh(&mut self) {
        let d = self.dim() as f64;
        let s2 = self.noise_var;
        let logdet = (d - self.rank() as f64) * s2.ln()
            + self.coef_var.iter().map(|&v| (v + s2).ln()).sum::<f64>();
        self.cache = Some(Cache {
            log_norm: -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + logdet),
            shrink: self.coef_var.iter().map(|&v| v / (v + s2)).collect(),
        });
    }

    /// Dense covariance `U Sigma U^T + s2 I`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut c = DMatrix::identity(d, d) * self.noise_var;
        for (u, &v) in self.basis.iter().zip(&self.coef_var) {
            let u = DVector::from_column_slice(u);
            c += &u * u.transpose() * v;
        }
        c
    }

    /// Gaussian log-density of `y`, evaluated through the rank-`d` structure of the
    /// covariance (Woodbury identity) without forming a `D x D` inverse.
    pub fn log_density(&self, y: &[f64]) -> f64 {
        let cache = match &self.cache {
            Some(c) => c,
            None => {
                let mut m = self.clone();
                m.refresh();
                return m.log_density(y);
            }
        };
        let mut norm2 = 0.0;
        for (a, b) in y.iter().zip(&self.mean) {
            let z = a - b;
            norm2 += z * z;
        }
        let mut proj = 0.0;
        for (u, &w) in self.basis.iter().zip(&cache.shrink) {
            let mut c = 0.0;
            for ((a, b), ui) in y.iter().zip(&self.mean).zip(u) {
                c += (a - b) * ui;
            }
            proj += w * c * c;
        }
        cache.log_norm - 0.5 * (norm2 - proj) / self.noise_var
    }
}

/// Maximum-likelihood PPCA fit of `points` with `rank` principal directions.
///
/// Clusters with at most `rank` points cannot support the fit; they get canonical
/// axes, zero coefficient variance, noise `fallback_var` and the degenerate flag.
pub fn fit_subspace(points: &[&[f64]], rank: usize, dim: usize, fallback_var: f64) -> SubspaceModel {
    let n = points.len();
    let rank = rank.min(dim);
    let mut mean = vec![0.0; dim];
    for p in points {
        for (m, v) in mean.iter_mut().zip(p.iter()) {
            *m += v;
        }
    }
    if n > 0 {
        mean.iter_mut().for_each(|m| *m /= n as f64);
    }
    if n <= rank {
        let basis = (0..rank)
            .map(|i| {
                let mut e = vec![0.0; dim];
                e[i] = 1.0;
                e
            })
            .collect();
        return SubspaceModel::new(
            mean,
            basis,
            vec![0.0; rank],
            fallback_var.max(NOISE_FLOOR),
            true,
        );
    }

    let mut scatter = DMatrix::<f64>::zeros(dim, dim);
    let mut z = DVector::<f64>::zeros(dim);
    for p in points {
        for i in 0..dim {
            z[i] = p[i] - mean[i];
        }
        scatter.syger(1.0, &z, &z, 1.0);
    }
    scatter /= n as f64;
    // syger only writes the lower triangle
    scatter.fill_upper_triangle_with_lower_triangle();

    let eig = SymmetricEigen::new(scatter);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let trailing = &values[rank..];
    let noise_var = if trailing.is_empty() {
        NOISE_FLOOR
    } else {
        (trailing.iter().sum::<f64>() / trailing.len() as f64).max(NOISE_FLOOR)
    };
    let basis = order[..rank]
        .iter()
        .map(|&i| {
            let mut u: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            // sign convention: largest-magnitude component positive
            let (mut best, mut idx) = (0.0, 0);
            for (j, v) in u.iter().enumerate() {
                if v.abs() > best {
                    best = v.abs();
                    idx = j;
                }
            }
            if u[idx] < 0.0 {
                u.iter_mut().for_each(|v| *v = -*v);
            }
            u
        })
        .collect();
    let coef_var = values[..rank]
        .iter()
        .map(|&v| (v - noise_var).max(0.0))
        .collect();
    SubspaceModel::new(mean, basis, coef_var, noise_var, false)
}
