//! Per-point feature extractors that drive resampling: high-pass local
//! variation, the pairwise-difference (Laplacian) variation it improves on,
//! and a difference-of-normals baseline.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::error::{bad_params, Error, Result};
use crate::filters::haar_highpass;
use crate::graph::{ShiftOperator, SparseGraph};
use crate::kdtree::KdTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Raw,
    LocalVariation,
    PairwiseVariation,
    DifferenceOfNormals,
}

impl FeatureKind {
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Raw => "raw",
            FeatureKind::LocalVariation => "local-variation",
            FeatureKind::PairwiseVariation => "pairwise-variation",
            FeatureKind::DifferenceOfNormals => "don",
        }
    }
}

/// Features `f(X)`: an `N x K` matrix, or an `N x 1` column of non-negative
/// scores for the variation kinds.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    kind: FeatureKind,
    values: DMatrix<f64>,
}

impl FeatureVector {
    pub fn raw(values: DMatrix<f64>) -> Self {
        Self {
            kind: FeatureKind::Raw,
            values,
        }
    }

    fn scores(kind: FeatureKind, scores: Vec<f64>) -> Self {
        let n = scores.len();
        Self {
            kind,
            values: DMatrix::from_vec(n, 1, scores),
        }
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// `‖f_i‖₂` for every row.
    pub fn row_norms(&self) -> Vec<f64> {
        self.values.row_iter().map(|r| r.norm()).collect()
    }

    /// First column as a plain vector; the score for the variation kinds.
    pub fn column(&self) -> Vec<f64> {
        self.values.column(0).iter().copied().collect()
    }

    /// `index,score` lines for plotting.
    pub fn scores_csv(&self) -> String {
        let mut out = String::from("index,score\n");
        for (i, r) in self.values.row_iter().enumerate() {
            let v = if r.ncols() == 1 { r[0] } else { r.norm() };
            out.push_str(&format!("{i},{v:.16e}\n"));
        }
        out
    }
}

fn signal(cloud: &PointCloud, include_attrs: bool) -> DMatrix<f64> {
    if include_attrs {
        cloud.matrix()
    } else {
        cloud.coords().clone()
    }
}

/// `(I - A)·X` on a transition shift: each point minus the convex
/// combination of its neighbors.
pub fn highpass_response(shift: &ShiftOperator, cloud: &PointCloud, include_attrs: bool) -> Result<DMatrix<f64>> {
    let filter = haar_highpass(shift)?;
    filter.apply(&signal(cloud, include_attrs))
}

/// Local variation `f_i = ‖x_i - Σ_j A_ij x_j‖²` (squared norm of the
/// Haar high-pass response) on a transition shift.
pub fn local_variation(shift: &ShiftOperator, cloud: &PointCloud, include_attrs: bool) -> Result<FeatureVector> {
    let response = highpass_response(shift, cloud, include_attrs)?;
    let scores = response.row_iter().map(|r| r.norm_squared()).collect();
    Ok(FeatureVector::scores(FeatureKind::LocalVariation, scores))
}

/// `f_i = Σ_j W_ij ‖x_i - x_j‖²` over coordinates.
pub fn pairwise_variation(graph: &SparseGraph, cloud: &PointCloud) -> Result<FeatureVector> {
    if graph.len() != cloud.len() {
        return Err(Error::DimensionMismatch {
            expected: graph.len(),
            actual: cloud.len(),
        });
    }
    let scores = (0..cloud.len())
        .map(|i| {
            let xi = cloud.point(i);
            graph
                .neighbors(i)
                .map(|(j, w)| w * (xi - cloud.point(j)).norm_squared())
                .sum()
        })
        .collect();
    Ok(FeatureVector::scores(FeatureKind::PairwiseVariation, scores))
}

fn pca_normal(points: &[[f64; 3]], neighborhood: &[(usize, f64)]) -> Vector3<f64> {
    let k = neighborhood.len() as f64;
    let mean = neighborhood
        .iter()
        .fold(Vector3::zeros(), |acc, &(j, _)| acc + Vector3::from(points[j]))
        / k;
    let cov = neighborhood.iter().fold(Matrix3::zeros(), |acc, &(j, _)| {
        let d = Vector3::from(points[j]) - mean;
        acc + d * d.transpose()
    }) / k;
    let eig = SymmetricEigen::new(cov);
    let smallest = eig.eigenvalues.imin();
    eig.eigenvectors.column(smallest).normalize()
}

/// Difference of normals: `‖n_small - n_large‖ / 2` with PCA normals from
/// neighborhoods of radius `r_small` and `r_large`, sign-aligned so
/// `n_small·n_large ≥ 0`. Scores lie in `[0, √2/2]`.
pub fn don_scores(cloud: &PointCloud, r_small: f64, r_large: f64) -> Result<FeatureVector> {
    if !(r_small > 0.0 && r_small < r_large && r_large.is_finite()) {
        return Err(bad_params(format!(
            "need 0 < r_small < r_large, got r_small = {r_small}, r_large = {r_large}"
        )));
    }
    let points = cloud.points();
    let tree = KdTree::new(&points);
    let scores: Vec<Result<f64>> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let small = tree.within_radius(p, r_small);
            let found = small.len() - 1;
            if found < 3 {
                return Err(Error::InsufficientNeighbors {
                    index: i,
                    found,
                    radius: r_small,
                });
            }
            let large = tree.within_radius(p, r_large);
            let mut ns = pca_normal(&points, &small);
            let nl = pca_normal(&points, &large);
            if ns.dot(&nl) < 0.0 {
                ns = -ns;
            }
            Ok((ns - nl).norm() / 2.0)
        })
        .collect();
    let scores = scores.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(FeatureVector::scores(FeatureKind::DifferenceOfNormals, scores))
}
