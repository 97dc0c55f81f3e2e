//! Random maxout features.
//!
//! A random maxout unit is `h(x) = max_j <w_j, x>` over `q` Gaussian
//! projections; `m` independent units scaled by `1/sqrt(m)` form the feature
//! map `Φ`. The expected inner product of the map is a linear kernel weighted
//! by the collision probability `κ_q` of the per-unit argmax, which makes
//! linear models trained on `Φ(x)` behave as locally linear estimators.
//!
//! Modules:
//! - [`bank`], [`features`], [`hash`]: projection banks, the feature map and
//!   the q-ary LSH codes built from the same projections.
//! - [`kernel`]: moments of Gaussian maxima, series coefficients of `κ_q`,
//!   Monte-Carlo and closed-form collision probabilities.
//! - [`linear`]: ridge regression and SGD multinomial logistic regression
//!   in feature space.
//! - [`embedding`]: PCA in feature space and pairwise-distance curves.
//! - [`data`]: IDX / delimited-text loaders, synthetic datasets and the
//!   dataset container.
//! - [`experiment`]: end-to-end pipelines used by the CLI and the
//!   acceptance suite.

pub mod bank;
pub mod data;
pub mod embedding;
pub mod error;
pub mod experiment;
pub mod features;
pub mod hash;
pub mod kernel;
pub mod linear;
pub mod stats;

mod binio;

pub use bank::ProjectionBank;
pub use error::{Error, Result};
pub use features::{featurize, featurize_batch, FeatureMatrix, FeatureVector};
pub use hash::{hamming_distance, hash_code, HashCode};
pub use kernel::KernelModel;
pub use linear::LinearModel;
