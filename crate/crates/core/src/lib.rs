//! Clustering-based representation of population-based optimizer search
//! trajectories.
//!
//! The workflow for one problem: run (or ingest) trajectories, merge every
//! candidate solution, min-max scale, cluster with k-means, and describe
//! each trajectory by how many of its solutions fall in each cluster at each
//! iteration. Those count vectors are compared with cosine similarity to
//! measure an algorithm's stability across seeds and the similarity between
//! algorithms.

pub mod algorithms;
pub mod clustering;
pub mod error;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod problems;
pub mod representation;
pub mod seed;
pub mod trajectory;
pub mod viz;

pub use algorithms::{run, AlgorithmConfig, AlgorithmId, RunRecord};
pub use clustering::{ClusterModel, KSelection, Scaler};
pub use error::{Error, ErrorKind, Result};
pub use metrics::{SimilarityMatrix, StabilityReport, StabilityTable};
pub use problems::{FunctionId, ProblemInstance};
pub use representation::{build_representation, TrajectoryRepresentation};
pub use trajectory::{merge, MergedSolutionSet, Trajectory};
pub use pipeline::{run_experiment, ExperimentConfig, ExperimentResult};
