//! Survey-free indoor radio map reconstruction.
//!
//! Unlabeled RSS sequences are first segmented into floor-plan regions by a
//! duration-aware HMM whose emissions are low-rank Gaussian subspace models
//! (module [`coarse`]); coordinates inside each region are then recovered by
//! alternating closed-form path-loss fitting with a region-constrained genetic
//! trajectory search (module [`fine`]). The recovered `(location, RSS)` pairs feed
//! a reference-point radio map that supports KNN localization ([`radiomap`]).
//! A generative simulator ([`sim`]) provides ground truth for verification.

pub mod assignment;
pub mod coarse;
pub mod env;
pub mod error;
pub mod fine;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod propagation;
pub mod radiomap;
pub mod rng;
pub mod sim;

pub use env::{build_rp_grid, compute_valid_regions, Environment, RpGrid, VisibilityRule};
pub use error::{Error, Result};
pub use geometry::{Point, Polygon, Segment};
pub use propagation::{PathLoss, PropagationModel};
