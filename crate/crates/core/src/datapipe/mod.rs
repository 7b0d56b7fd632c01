//! Tabular data: normalization, k-means partitioning with elbow-based
//! selection of `k`, and splitting rows into per-cluster datasets.

mod dataset;
mod kmeans;

pub use dataset::Dataset;
pub use kmeans::{
    kmeans, partition, select_k_elbow, ClusteringResult, Partition, DEFAULT_ELBOW_THRESHOLD,
    DEFAULT_K_MAX, MAX_ITERATIONS, RESTARTS,
};
