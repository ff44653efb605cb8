//! Graph-filter based resampling of 3D point clouds.
//!
//! A cloud is turned into an ε-neighborhood graph, graph filters extract
//! per-point features (contours, smooth shape, raw geometry), and the
//! features define sampling distributions that minimize the expected
//! reconstruction error of a randomized subsample.

pub mod apps;
pub mod cli;
pub mod cloud;
pub mod eigen;
pub mod error;
pub mod features;
pub mod filterbank;
pub mod filters;
pub mod graph;
pub mod io;
pub mod kdtree;
pub mod resampling;
pub mod shapes;
pub mod sparse;

pub use cloud::{apply_transform, recenter, scale_normalize, spectral_norm, PointCloud, RigidTransform};
pub use error::{Error, Result};
pub use graph::{
    build_graph, shift_operator, truncated_eigenbasis, IsolatedPolicy, ShiftKind, ShiftOperator, SparseGraph,
};
pub use io::{load_cloud, save_cloud, CloudFormat};
pub use shapes::{make_shape, ShapeKind, ShapeParams};
