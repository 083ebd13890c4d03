//! Clustering by projections onto convex sets, with K-Means, K-Means++ and
//! fuzzy C-means baselines, a benchmark harness and a dense autoencoder for
//! producing embeddings.

pub mod autoencoder;
pub mod bench;
pub mod clustering;
pub mod data;
pub mod error;
pub mod metrics;
pub mod pocs;
pub mod point;

pub use clustering::{ClusterConfig, ClusterModel, FuzzyModel, Init};
pub use data::EmbeddingDataset;
pub use error::{Error, ErrorKind, Result};
pub use point::Point;
