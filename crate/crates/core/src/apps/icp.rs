use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::cloud::{apply_transform, PointCloud, RigidTransform};
use crate::error::{bad_params, Result};
use crate::kdtree::KdTree;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpOptions {
    pub max_iter: usize,
    /// Stop once the correspondence RMSE changes by less than this.
    pub tol: f64,
}

impl Default for IcpOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationReport {
    /// `√(Σ_i min_j ‖x̂_i - x_j‖²)` of the registered cloud against the reference.
    pub rmse: f64,
    /// `‖â - a‖₂`, when a ground truth is known.
    pub shift_error: Option<f64>,
    /// `‖R̂ - R‖_F`, when a ground truth is known.
    pub rotation_error: Option<f64>,
    pub iterations: usize,
    pub recovered: RigidTransform,
    /// False when `max_iter` was reached first; the metrics are still valid.
    pub converged: bool,
    /// Correspondence RMSE (root mean square) at the start of each iteration.
    pub rmse_history: Vec<f64>,
}

/// Least-squares rigid map `p ↦ p·R + a` from `source[i]` to `target[i]`.
pub fn kabsch(source: &[Vector3<f64>], target: &[Vector3<f64>]) -> RigidTransform {
    let n = source.len() as f64;
    let ps = source.iter().sum::<Vector3<f64>>() / n;
    let qs = target.iter().sum::<Vector3<f64>>() / n;
    let h = source
        .iter()
        .zip(target)
        .fold(Matrix3::zeros(), |acc, (p, q)| acc + (p - ps) * (q - qs).transpose());
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    let d = (u * vt).determinant().signum();
    let rotation = u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * vt;
    RigidTransform {
        rotation,
        shift: qs - rotation.transpose() * ps,
    }
}

fn nearest_all(tree: &KdTree, points: &[Vector3<f64>]) -> Vec<(usize, f64)> {
    points
        .par_iter()
        .map(|p| tree.nearest(&[p.x, p.y, p.z]).expect("non-empty target"))
        .collect()
}

fn vectors(cloud: &PointCloud) -> Vec<Vector3<f64>> {
    (0..cloud.len()).map(|i| cloud.point(i)).collect()
}

/// `√(Σ_i min_j ‖registered_i - reference_j‖²)`.
pub fn cloud_rmse(registered: &PointCloud, reference: &PointCloud) -> f64 {
    let tree = KdTree::new(&reference.points());
    nearest_all(&tree, &vectors(registered))
        .iter()
        .map(|(_, d2)| d2)
        .sum::<f64>()
        .sqrt()
}

/// RMSE of `registered` against `reference` plus the transform errors.
pub fn registration_metrics(
    recovered: &RigidTransform,
    truth: &RigidTransform,
    registered: &PointCloud,
    reference: &PointCloud,
) -> RegistrationReport {
    RegistrationReport {
        rmse: cloud_rmse(registered, reference),
        shift_error: Some((recovered.shift - truth.shift).norm()),
        rotation_error: Some((recovered.rotation - truth.rotation).norm()),
        iterations: 0,
        recovered: *recovered,
        converged: true,
        rmse_history: Vec::new(),
    }
}

/// Point-to-point ICP mapping `source` onto `target`, starting from the identity.
pub fn icp_register(
    source: &PointCloud,
    target: &PointCloud,
    options: IcpOptions,
    truth: Option<&RigidTransform>,
) -> Result<RegistrationReport> {
    if source.len() < 3 || target.len() < 3 {
        return Err(bad_params("registration needs at least 3 points in each cloud"));
    }
    if options.max_iter == 0 {
        return Err(bad_params("registration needs at least one iteration"));
    }
    let tree = KdTree::new(&target.points());
    let src = vectors(source);
    let tgt = vectors(target);
    let mut current = RigidTransform::identity();
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iter {
        let moved: Vec<Vector3<f64>> = src.iter().map(|p| current.apply_point(p)).collect();
        let matches = nearest_all(&tree, &moved);
        let rmse = (matches.iter().map(|(_, d2)| d2).sum::<f64>() / src.len() as f64).sqrt();
        if let Some(&prev) = history.last() {
            if prev - rmse < options.tol {
                history.push(rmse);
                converged = true;
                break;
            }
        }
        history.push(rmse);
        let matched: Vec<Vector3<f64>> = matches.iter().map(|&(j, _)| tgt[j]).collect();
        current = kabsch(&src, &matched);
        iterations += 1;
    }
    let registered = apply_transform(source, &current)?;
    Ok(RegistrationReport {
        rmse: cloud_rmse(&registered, target),
        shift_error: truth.map(|t| (current.shift - t.shift).norm()),
        rotation_error: truth.map(|t| (current.rotation - t.rotation).norm()),
        iterations,
        recovered: current,
        converged,
        rmse_history: history,
    })
}
