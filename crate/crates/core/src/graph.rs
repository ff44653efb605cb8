//! ε-neighborhood graphs over point coordinates and the graph shift
//! operators derived from them.
//!
//! Edge weights are `W_ij = exp(-‖x_i - x_j‖² / σ²)` for distinct points
//! within distance `τ`; only coordinates are used, never attributes.

use std::fmt::Write as _;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::eigen::{power_magnitude, top_eigenpairs};
use crate::error::{bad_params, Error, Result};
use crate::kdtree::KdTree;
use crate::sparse::CsrMatrix;

/// Neighbor rank used for the automatic `σ`.
pub const AUTO_SIGMA_K: usize = 10;
/// Subsample size used for the automatic `σ`.
pub const AUTO_SIGMA_SAMPLES: usize = 1000;

const LAMBDA_TOL: f64 = 1e-9;
const LAMBDA_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseGraph {
    weights: CsrMatrix,
    degrees: Vec<f64>,
    sigma: f64,
    tau: f64,
}

impl SparseGraph {
    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    pub fn weights(&self) -> &CsrMatrix {
        &self.weights
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn edge_count(&self) -> usize {
        self.weights.nnz() / 2
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights.row(i)
    }

    /// Edge list `i,j,w` with `i < j`, one line per undirected edge.
    pub fn edge_list_csv(&self) -> String {
        let mut out = String::from("i,j,w\n");
        for i in 0..self.len() {
            for (j, w) in self.weights.row(i).filter(|&(j, _)| j > i) {
                let _ = writeln!(out, "{i},{j},{w:.16e}");
            }
        }
        out
    }
}

pub fn build_graph(cloud: &PointCloud, sigma: f64, tau: f64) -> Result<SparseGraph> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(bad_params(format!("sigma must be positive, got {sigma}")));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(bad_params(format!("tau must be positive, got {tau}")));
    }
    let points = cloud.points();
    let tree = KdTree::new(&points);
    let inv_s2 = 1.0 / (sigma * sigma);
    let rows: Vec<Vec<(usize, f64)>> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            tree.within_radius(p, tau)
                .into_iter()
                .filter(|&(j, _)| j != i)
                .map(|(j, d2)| (j, (-d2 * inv_s2).exp()))
                .filter(|&(_, w)| w > 0.0)
                .collect()
        })
        .collect();
    let weights = CsrMatrix::from_rows(points.len(), rows);
    let degrees = weights.row_sums();
    Ok(SparseGraph {
        weights,
        degrees,
        sigma,
        tau,
    })
}

/// Default `σ`: mean distance to the 10-th nearest neighbor over an evenly
/// strided subsample of at most 1000 points. Default `τ = 2σ`.
pub fn auto_sigma(cloud: &PointCloud) -> Result<f64> {
    auto_sigma_k(cloud, AUTO_SIGMA_K)
}

/// [`auto_sigma`] with a custom neighbor rank `k`.
pub fn auto_sigma_k(cloud: &PointCloud, k: usize) -> Result<f64> {
    let n = cloud.len();
    if n < 2 || k == 0 {
        return Err(bad_params("automatic sigma needs at least two points and k >= 1"));
    }
    let k = k.min(n - 1);
    let points = cloud.points();
    let tree = KdTree::new(&points);
    let samples = AUTO_SIGMA_SAMPLES.min(n);
    let dists: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let i = s * n / samples;
            tree.nearest_k(&points[i], k + 1)
                .last()
                .map_or(0.0, |&(_, d2)| d2.sqrt())
        })
        .collect();
    let sigma = dists.iter().sum::<f64>() / samples as f64;
    if sigma > 0.0 && sigma.is_finite() {
        Ok(sigma)
    } else {
        Err(bad_params("automatic sigma is zero (all points coincide)"))
    }
}

/// `(σ, τ)` with the optional overrides applied.
pub fn graph_params(cloud: &PointCloud, sigma: Option<f64>, tau: Option<f64>) -> Result<(f64, f64)> {
    let sigma = match sigma {
        Some(s) => s,
        None => auto_sigma(cloud)?,
    };
    Ok((sigma, tau.unwrap_or(2.0 * sigma)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftKind {
    Adjacency,
    /// `D⁻¹W`
    Transition,
    /// `D^{-1/2} W D^{-1/2}`
    NormalizedAdjacency,
    /// `D - W`
    Laplacian,
}

impl ShiftKind {
    pub fn name(self) -> &'static str {
        match self {
            ShiftKind::Adjacency => "adjacency",
            ShiftKind::Transition => "transition",
            ShiftKind::NormalizedAdjacency => "normalized-adjacency",
            ShiftKind::Laplacian => "laplacian",
        }
    }
}

/// What to do with degree-zero nodes when forming `D⁻¹W` or
/// `D^{-1/2} W D^{-1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IsolatedPolicy {
    /// Give the node a unit self-loop: it predicts itself.
    #[default]
    SelfLoop,
    Strict,
}

#[derive(Debug)]
pub struct ShiftOperator {
    kind: ShiftKind,
    matrix: CsrMatrix,
    /// Degrees after the isolated-node policy was applied.
    degrees: Vec<f64>,
    /// `(D + self loops)`-weighted adjacency, kept for the symmetric form.
    weights: CsrMatrix,
    lambda_max: OnceLock<f64>,
}

impl Clone for ShiftOperator {
    fn clone(&self) -> Self {
        let lambda_max = OnceLock::new();
        if let Some(&v) = self.lambda_max.get() {
            let _ = lambda_max.set(v);
        }
        Self {
            kind: self.kind,
            matrix: self.matrix.clone(),
            degrees: self.degrees.clone(),
            weights: self.weights.clone(),
            lambda_max,
        }
    }
}

pub fn shift_operator(graph: &SparseGraph, kind: ShiftKind, policy: IsolatedPolicy) -> Result<ShiftOperator> {
    let n = graph.len();
    let needs_degree = matches!(kind, ShiftKind::Transition | ShiftKind::NormalizedAdjacency);
    let mut weights = graph.weights.clone();
    let mut degrees = graph.degrees.clone();
    if needs_degree {
        let isolated: Vec<usize> = (0..n).filter(|&i| degrees[i] <= 0.0).collect();
        if let Some(&first) = isolated.first() {
            if policy == IsolatedPolicy::Strict {
                return Err(Error::IsolatedNode(first));
            }
            let mut loops = vec![0.0; n];
            for &i in &isolated {
                loops[i] = 1.0;
                degrees[i] = 1.0;
            }
            weights = weights.add_diagonal(&loops);
        }
    }
    let matrix = match kind {
        ShiftKind::Adjacency => weights.clone(),
        ShiftKind::Transition => {
            let inv: Vec<f64> = degrees.iter().map(|d| 1.0 / d).collect();
            weights.scale(&inv, &vec![1.0; n])
        }
        ShiftKind::NormalizedAdjacency => {
            let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
            weights.scale(&inv_sqrt, &inv_sqrt)
        }
        ShiftKind::Laplacian => weights.map_values(|v| -v).add_diagonal(&degrees),
    };
    Ok(ShiftOperator {
        kind,
        matrix,
        degrees,
        weights,
        lambda_max: OnceLock::new(),
    })
}

impl ShiftOperator {
    /// Wraps an arbitrary symmetric sparse matrix as an adjacency-kind shift.
    pub fn from_symmetric(matrix: CsrMatrix) -> Result<Self> {
        if matrix.asymmetry() > 1e-12 {
            return Err(bad_params("matrix is not symmetric"));
        }
        let degrees = matrix.row_sums();
        Ok(Self {
            kind: ShiftKind::Adjacency,
            weights: matrix.clone(),
            matrix,
            degrees,
            lambda_max: OnceLock::new(),
        })
    }

    pub fn kind(&self) -> ShiftKind {
        self.kind
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// `max |λ_i|`. Exactly 1 for transition and normalized adjacency
    /// operators; power iteration otherwise. Cached after the first call.
    pub fn lambda_max(&self) -> Result<f64> {
        if let Some(&v) = self.lambda_max.get() {
            return Ok(v);
        }
        let v = match self.kind {
            ShiftKind::Transition | ShiftKind::NormalizedAdjacency => 1.0,
            _ => power_magnitude(
                |x, y| self.matrix.matvec_into(x, y),
                self.len(),
                LAMBDA_TOL,
                LAMBDA_MAX_ITER,
            )?,
        };
        Ok(*self.lambda_max.get_or_init(|| v))
    }

    /// The symmetric matrix whose spectrum equals this operator's: the
    /// operator itself, or `D^{-1/2} W D^{-1/2}` for the transition kind.
    pub fn symmetric_form(&self) -> CsrMatrix {
        match self.kind {
            ShiftKind::Transition => {
                let inv_sqrt: Vec<f64> = self.degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
                self.weights.scale(&inv_sqrt, &inv_sqrt)
            }
            _ => self.matrix.clone(),
        }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.matrix.mul_dense(x)
    }
}

/// Leading eigenpairs of a shift operator.
#[derive(Debug, Clone)]
pub struct Eigenbasis {
    /// Descending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors of the symmetric form, one per column.
    pub vectors: DMatrix<f64>,
    /// For transition operators: right eigenvectors of `D⁻¹W`, i.e.
    /// `D^{-1/2}·vectors` with unit-norm columns (not mutually orthogonal).
    pub transition_vectors: Option<DMatrix<f64>>,
}

impl Eigenbasis {
    pub fn bandwidth(&self) -> usize {
        self.values.len()
    }

    /// Graph Fourier coefficients `Vᵀ·signal` in the orthonormal basis.
    pub fn forward(&self, signal: &DMatrix<f64>) -> DMatrix<f64> {
        self.vectors.transpose() * signal
    }

    pub fn inverse(&self, coeffs: &DMatrix<f64>) -> DMatrix<f64> {
        &self.vectors * coeffs
    }
}

/// The `b` leading eigenpairs (largest eigenvalue first).
pub fn truncated_eigenbasis(op: &ShiftOperator, b: usize) -> Result<Eigenbasis> {
    let n = op.len();
    if b == 0 || b > n {
        return Err(Error::BandwidthTooLarge { bandwidth: b, n });
    }
    let sym = op.symmetric_form();
    let (values, vectors) = top_eigenpairs(|x, y| sym.matvec_into(x, y), n, b)?;
    let transition_vectors = (op.kind == ShiftKind::Transition).then(|| {
        let mut v = vectors.clone();
        for (i, mut row) in v.row_iter_mut().enumerate() {
            row /= op.degrees[i].sqrt();
        }
        for mut col in v.column_iter_mut() {
            let norm = col.norm();
            if norm > 0.0 {
                col /= norm;
            }
        }
        v
    });
    Ok(Eigenbasis {
        values,
        vectors,
        transition_vectors,
    })
}

/// Smallest-eigenvalue counterpart used for Laplacian low-pass work:
/// eigenpairs of `-op`, negated back, so values come out ascending.
pub(crate) fn bottom_eigenbasis(op: &ShiftOperator, b: usize) -> Result<Eigenbasis> {
    let n = op.len();
    if b == 0 || b > n {
        return Err(Error::BandwidthTooLarge { bandwidth: b, n });
    }
    let sym = op.symmetric_form();
    let (values, vectors) = top_eigenpairs(
        |x, y| {
            sym.matvec_into(x, y);
            y.iter_mut().for_each(|v| *v = -*v);
        },
        n,
        b,
    )?;
    Ok(Eigenbasis {
        values: values.into_iter().map(|v| -v).collect(),
        vectors,
        transition_vectors: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud::from_coords(DMatrix::from_fn(n, 3, |_, _| rng.random_range(0.0..1.0))).unwrap()
    }

    fn two_points(d: f64) -> PointCloud {
        PointCloud::from_points(&[[0.0, 0.0, 0.0], [d, 0.0, 0.0]]).unwrap()
    }

    #[test]
    fn single_edge_weight() {
        let g = build_graph(&two_points(0.5), 0.5, 0.6).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!((g.weights().get(0, 1) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((g.weights().get(0, 1) - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn far_points_have_no_edges() {
        let g = build_graph(&two_points(2.0), 0.5, 1.0).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.degrees(), &[0.0, 0.0]);
    }

    #[test]
    fn bad_params_rejected() {
        let c = two_points(1.0);
        assert!(matches!(build_graph(&c, 0.0, 1.0), Err(Error::BadParams(_))));
        assert!(matches!(build_graph(&c, 1.0, -1.0), Err(Error::BadParams(_))));
    }

    #[test]
    fn graph_invariants_on_random_cloud() {
        let cloud = random_cloud(200, 3);
        let g = build_graph(&cloud, 0.1, 0.2).unwrap();
        assert!(g.weights().asymmetry() <= 1e-12);
        for i in 0..g.len() {
            assert_eq!(g.weights().get(i, i), 0.0);
            for (j, w) in g.neighbors(i) {
                assert!(w > 0.0 && w <= 1.0);
                assert!((cloud.point(i) - cloud.point(j)).norm() <= 0.2);
            }
        }
    }

    #[test]
    fn permutation_equivariance() {
        let cloud = random_cloud(80, 4);
        let perm: Vec<usize> = (0..80).map(|i| (i * 37) % 80).collect();
        let permuted = cloud.select(&perm).unwrap();
        let g = build_graph(&cloud, 0.15, 0.3).unwrap();
        let gp = build_graph(&permuted, 0.15, 0.3).unwrap();
        for a in 0..80 {
            for b in 0..80 {
                assert_eq!(gp.weights().get(a, b), g.weights().get(perm[a], perm[b]));
            }
        }
    }

    #[test]
    fn transition_of_single_edge() {
        let g = build_graph(&two_points(1.0), 1.0, 2.0).unwrap();
        let t = shift_operator(&g, ShiftKind::Transition, IsolatedPolicy::Strict).unwrap();
        assert_eq!(
            t.matrix().to_dense(),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])
        );
        assert_eq!(t.lambda_max().unwrap(), 1.0);
    }

    #[test]
    fn path_laplacian_rows_sum_to_zero() {
        let cloud = PointCloud::from_points(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]).unwrap();
        let g = build_graph(&cloud, 1.0, 1.5).unwrap();
        let l = shift_operator(&g, ShiftKind::Laplacian, IsolatedPolicy::Strict).unwrap();
        assert_eq!(l.matrix().row_sums(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn transition_rows_sum_to_one() {
        let cloud = random_cloud(150, 5);
        let g = build_graph(&cloud, 0.1, 0.15).unwrap();
        let t = shift_operator(&g, ShiftKind::Transition, IsolatedPolicy::SelfLoop).unwrap();
        for s in t.matrix().row_sums() {
            assert!((s - 1.0).abs() <= 1e-12);
        }
        let ones = vec![1.0; 150];
        for v in t.matrix().matvec(&ones) {
            assert!((v - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn isolated_policy() {
        let g = build_graph(&two_points(5.0), 1.0, 1.0).unwrap();
        assert!(matches!(
            shift_operator(&g, ShiftKind::Transition, IsolatedPolicy::Strict),
            Err(Error::IsolatedNode(0))
        ));
        let t = shift_operator(&g, ShiftKind::Transition, IsolatedPolicy::SelfLoop).unwrap();
        assert_eq!(t.matrix().to_dense(), DMatrix::identity(2, 2));
        // adjacency never needs the policy
        assert!(shift_operator(&g, ShiftKind::Adjacency, IsolatedPolicy::Strict).is_ok());
    }

    #[test]
    fn lambda_max_adjacency_two_nodes() {
        let g = build_graph(&two_points(1.0), 2.0, 2.0).unwrap();
        let a = shift_operator(&g, ShiftKind::Adjacency, IsolatedPolicy::Strict).unwrap();
        let w = (-0.25f64).exp();
        assert!((a.lambda_max().unwrap() - w).abs() < 1e-12);
    }

    #[test]
    fn lambda_max_random_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut trip = Vec::new();
        for i in 0..30 {
            for j in i..30 {
                let v: f64 = rng.random_range(-1.0..1.0);
                trip.push((i, j, v));
                if i != j {
                    trip.push((j, i, v));
                }
            }
        }
        let m = CsrMatrix::from_triplets(30, 30, trip);
        let op = ShiftOperator::from_symmetric(m.clone()).unwrap();
        let oracle = SymmetricEigen::new(m.to_dense()).eigenvalues.amax();
        assert!((op.lambda_max().unwrap() - oracle).abs() < 1e-7);
    }

    #[test]
    fn normalized_lambda_max_is_one() {
        let cloud = random_cloud(60, 6);
        let g = build_graph(&cloud, 0.2, 0.4).unwrap();
        let a = shift_operator(&g, ShiftKind::NormalizedAdjacency, IsolatedPolicy::SelfLoop).unwrap();
        let oracle = SymmetricEigen::new(a.matrix().to_dense()).eigenvalues.amax();
        assert!((oracle - 1.0).abs() < 1e-9);
        assert_eq!(a.lambda_max().unwrap(), 1.0);
    }

    #[test]
    fn k3_top_eigenpair() {
        let s = 1.0 / 3f64.sqrt();
        let m = CsrMatrix::from_triplets(
            3,
            3,
            vec![
                (0, 1, 1.0),
                (1, 0, 1.0),
                (0, 2, 1.0),
                (2, 0, 1.0),
                (1, 2, 1.0),
                (2, 1, 1.0),
            ],
        );
        let op = ShiftOperator::from_symmetric(m).unwrap();
        let basis = truncated_eigenbasis(&op, 1).unwrap();
        assert!((basis.values[0] - 2.0).abs() < 1e-12);
        for i in 0..3 {
            assert!((basis.vectors[(i, 0)] - s).abs() < 1e-12);
        }
    }

    #[test]
    fn full_basis_reconstructs_and_inverts() {
        let cloud = random_cloud(20, 7);
        let g = build_graph(&cloud, 0.3, 0.6).unwrap();
        let a = shift_operator(&g, ShiftKind::NormalizedAdjacency, IsolatedPolicy::SelfLoop).unwrap();
        let basis = truncated_eigenbasis(&a, 20).unwrap();
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(basis.values.clone()));
        let recon = &basis.vectors * lam * basis.vectors.transpose();
        assert!((recon - a.matrix().to_dense()).amax() < 1e-8);
        assert!(basis.values.windows(2).all(|w| w[0] >= w[1]));
        let gram = basis.vectors.transpose() * &basis.vectors;
        assert!((gram - DMatrix::identity(20, 20)).amax() < 1e-8);
        let signal = cloud.coords().clone();
        let back = basis.inverse(&basis.forward(&signal));
        assert!((back - signal).amax() < 1e-8);
    }

    #[test]
    fn transition_leading_eigenvector_is_constant() {
        let cloud = random_cloud(40, 9);
        let g = build_graph(&cloud, 0.5, 2.0).unwrap();
        let t = shift_operator(&g, ShiftKind::Transition, IsolatedPolicy::SelfLoop).unwrap();
        let basis = truncated_eigenbasis(&t, 3).unwrap();
        assert!((basis.values[0] - 1.0).abs() < 1e-10);
        let v = basis.transition_vectors.as_ref().unwrap();
        let c = 1.0 / 40f64.sqrt();
        for i in 0..40 {
            assert!((v[(i, 0)] - c).abs() < 1e-8);
        }
        // right eigenvectors of D⁻¹W
        let av = t.apply(v);
        for k in 0..3 {
            for i in 0..40 {
                assert!((av[(i, k)] - basis.values[k] * v[(i, k)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn auto_sigma_is_scale_covariant() {
        let cloud = random_cloud(300, 10);
        let s1 = auto_sigma(&cloud).unwrap();
        let scaled = PointCloud::from_coords(cloud.coords() * 3.0).unwrap();
        let s3 = auto_sigma(&scaled).unwrap();
        assert!((s3 - 3.0 * s1).abs() < 1e-12);
        let (sigma, tau) = graph_params(&cloud, None, None).unwrap();
        assert_eq!(tau, 2.0 * sigma);
    }

    #[test]
    fn edge_list_lists_each_edge_once() {
        let cloud = PointCloud::from_points(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]).unwrap();
        let g = build_graph(&cloud, 1.0, 1.5).unwrap();
        let text = g.edge_list_csv();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().starts_with("0,1,"));
    }
}
