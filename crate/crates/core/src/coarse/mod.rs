//! Coarse stage: region labels for unlabeled RSS sequences.
//!
//! A generalized EM loop alternates explicit-duration Viterbi decoding
//! ([`hsmm`]) against low-rank Gaussian emission models ([`subspace`]) fitted on
//! recurrent embeddings ([`embedder`]) with parameter refits. Discovered regions
//! are numbered by their mean temporal position and finally matched to physical
//! regions by signal-weighted location anchors ([`matching`]).

pub mod em;
pub mod embedder;
pub mod hsmm;
pub mod kmeans;
pub mod matching;
pub mod order;
pub mod subspace;

use serde::{Deserialize, Serialize};

pub use em::{em_region_inference, kmeans_init, update_residence_means};
pub use embedder::{binary_cross_entropy, Embedder, OrderSample};
pub use hsmm::{decode_segments, residence_log_pmf, segmentation_score, transition_log_prior, Segmentation};
pub use matching::{match_virtual_to_physical, signal_anchor};
pub use order::{build_order_dataset, OrderDatasetOptions};
pub use subspace::{fit_subspace, SubspaceModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoarseConfig {
    /// Subspace rank `d_k` of every region.
    pub subspace_dim: usize,
    /// Relative objective change that ends EM.
    pub tolerance: f64,
    pub max_iter: usize,
    pub hidden: usize,
    /// Scale of the recurrent context term in the embedding read-out.
    pub readout_scale: f64,
    /// Gradient step of the order verifier.
    pub learning_rate: f64,
    pub clip_norm: f64,
    /// Gradient steps per EM iteration.
    pub verifier_epochs: usize,
    pub order_pairs: usize,
    pub segments_per_sample: usize,
    pub crop_len: usize,
    /// Weight of the new empirical residence mean in each update.
    pub residence_damping: f64,
    /// Duration cap is `ceil(max_dur_factor * max_k mean_k)`.
    pub max_dur_factor: f64,
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
}

impl Default for CoarseConfig {
    fn default() -> Self {
        CoarseConfig {
            subspace_dim: 2,
            tolerance: 1e-3,
            max_iter: 100,
            hidden: 32,
            readout_scale: 0.1,
            learning_rate: 0.1,
            clip_norm: 5.0,
            verifier_epochs: 2,
            order_pairs: 32,
            segments_per_sample: 3,
            crop_len: 6,
            residence_damping: 0.5,
            max_dur_factor: 4.0,
            kmeans_restarts: 10,
            kmeans_max_iter: 300,
            kmeans_tol: 1e-4,
        }
    }
}

impl CoarseConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let bad = |m: &str| Err(crate::Error::Config(format!("coarse: {m}")));
        if self.subspace_dim == 0 {
            return bad("subspace_dim must be >= 1");
        }
        if !(self.tolerance > 0.0) || self.max_iter == 0 {
            return bad("tolerance must be positive and max_iter >= 1");
        }
        if self.hidden == 0 {
            return bad("hidden must be >= 1");
        }
        if !(self.learning_rate >= 0.0) || !(self.clip_norm > 0.0) {
            return bad("learning_rate must be >= 0 and clip_norm > 0");
        }
        if !(0.0..=1.0).contains(&self.residence_damping) {
            return bad("residence_damping must lie in [0, 1]");
        }
        if !(self.max_dur_factor >= 1.0) {
            return bad("max_dur_factor must be >= 1");
        }
        Ok(())
    }

    pub fn order_options(&self) -> OrderDatasetOptions {
        OrderDatasetOptions {
            pairs: self.order_pairs,
            segments_per_sample: self.segments_per_sample,
            crop_len: self.crop_len,
        }
    }
}

/// Per-AP standardization of raw dBm readings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a Vec<f64>>, dim: usize) -> Self {
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        let mut n = 0usize;
        for r in rows {
            for j in 0..dim {
                sum[j] += r[j];
                sq[j] += r[j] * r[j];
            }
            n += 1;
        }
        let n = n.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let scale = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| (s / n - m * m).max(0.0).sqrt().max(1e-3))
            .collect();
        FeatureScaler { mean, scale }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// Everything learned by the coarse stage. Region indices inside the model are
/// virtual (reference-order) positions `1..=K`; `physical[k - 1]` is the matched
/// floor-plan region of virtual region `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseModel {
    pub scaler: FeatureScaler,
    pub embedder: Embedder,
    pub subspaces: Vec<SubspaceModel>,
    pub residence_means: Vec<f64>,
    /// Initial k-means cluster index behind each virtual region.
    pub reference_order: Vec<usize>,
    pub physical: Vec<usize>,
}

impl CoarseModel {
    pub fn num_regions(&self) -> usize {
        self.residence_means.len()
    }

    pub fn max_dur(&self, factor: f64, t_len: usize) -> usize {
        let m = self.residence_means.iter().copied().fold(1.0, f64::max);
        ((factor * m).ceil() as usize).clamp(1, t_len.max(1))
    }

    /// `T x K` emission log-likelihoods of an embedded sequence.
    pub fn loglik_table(&self, embedded: &[Vec<f64>]) -> Vec<Vec<f64>> {
        embedded
            .iter()
            .map(|y| self.subspaces.iter().map(|s| s.log_density(y)).collect())
            .collect()
    }

    pub fn features(&self, observations: &[Vec<f64>]) -> Vec<Vec<f64>> {
        observations.iter().map(|r| self.scaler.apply(r)).collect()
    }

    /// Decodes a raw dBm sequence into virtual-region segments.
    pub fn decode(&self, observations: &[Vec<f64>], max_dur_factor: f64) -> crate::Result<Segmentation> {
        let emb = self.embedder.embed(&self.features(observations));
        decode_segments(
            &self.loglik_table(&emb),
            &self.residence_means,
            self.max_dur(max_dur_factor, observations.len()),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmIteration {
    pub iteration: usize,
    pub objective: f64,
    pub relative_change: f64,
    pub verifier_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoarseResult {
    pub model: CoarseModel,
    /// Final decoding of each sequence, in virtual region indices.
    pub segmentations: Vec<Segmentation>,
    /// Per-slot physical region labels.
    pub labels: Vec<Vec<usize>>,
    /// Physical visit order of each sequence.
    pub visit_orders: Vec<Vec<usize>>,
    pub trace: Vec<EmIteration>,
    pub converged: bool,
}
