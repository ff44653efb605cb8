use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, SymmetricEigen, Vector3, Vector4};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

const GN_MAX_ITER: usize = 50;
const GN_TOL: f64 = 1e-10;
const COPLANAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereFit {
    pub center: Vector3<f64>,
    pub radius: f64,
    /// Root mean square of `‖x_i - c‖ - r`.
    pub rms_residual: f64,
}

impl SphereFit {
    /// Relative radius error `|r̂ - r| / r`.
    pub fn radius_error(&self, truth: f64) -> f64 {
        ((self.radius - truth) / truth).abs()
    }
}

fn check_spread(cloud: &PointCloud) -> Result<()> {
    if cloud.len() < 4 {
        return Err(Error::DegenerateConfiguration(format!(
            "sphere fit needs at least 4 points, got {}",
            cloud.len()
        )));
    }
    let mean = cloud.centroid();
    let cov = (0..cloud.len()).fold(Matrix3::zeros(), |acc, i| {
        let d = cloud.point(i) - mean;
        acc + d * d.transpose()
    });
    let eig = SymmetricEigen::new(cov).eigenvalues;
    if eig.min() <= COPLANAR_TOL * eig.max().max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateConfiguration(
            "points are coplanar or collinear".into(),
        ));
    }
    Ok(())
}

/// Linear fit of `‖x‖² = 2c·x + (r² - ‖c‖²)`.
fn algebraic_fit(cloud: &PointCloud) -> Result<(Vector3<f64>, f64)> {
    let n = cloud.len();
    let shift = cloud.centroid();
    let mut a = DMatrix::zeros(n, 4);
    let mut b = DVector::zeros(n);
    for i in 0..n {
        let p = cloud.point(i) - shift;
        a[(i, 0)] = 2.0 * p.x;
        a[(i, 1)] = 2.0 * p.y;
        a[(i, 2)] = 2.0 * p.z;
        a[(i, 3)] = 1.0;
        b[i] = p.norm_squared();
    }
    let theta = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::DegenerateConfiguration(e.to_string()))?;
    let c = Vector3::new(theta[0], theta[1], theta[2]);
    let r2 = theta[3] + c.norm_squared();
    if r2 <= 0.0 {
        return Err(Error::DegenerateConfiguration(
            "algebraic fit gave a negative squared radius".into(),
        ));
    }
    Ok((c + shift, r2.sqrt()))
}

/// Algebraic least squares followed by Gauss-Newton refinement of
/// `Σ(‖x_i - c‖ - r)²`.
pub fn fit_sphere(cloud: &PointCloud) -> Result<SphereFit> {
    check_spread(cloud)?;
    let (mut center, mut radius) = algebraic_fit(cloud)?;
    for _ in 0..GN_MAX_ITER {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for i in 0..cloud.len() {
            let d = cloud.point(i) - center;
            let dist = d.norm();
            if dist == 0.0 {
                continue;
            }
            let u = d / dist;
            let j = Vector4::new(-u.x, -u.y, -u.z, -1.0);
            let res = dist - radius;
            jtj += j * j.transpose();
            jtr += j * res;
        }
        let Some(step) = jtj.lu().solve(&(-jtr)) else {
            break;
        };
        center += step.fixed_rows::<3>(0);
        radius += step[3];
        if step.norm() <= GN_TOL * (1.0 + center.norm() + radius.abs()) {
            break;
        }
    }
    radius = radius.abs();
    let ss: f64 = (0..cloud.len())
        .map(|i| ((cloud.point(i) - center).norm() - radius).powi(2))
        .sum();
    Ok(SphereFit {
        center,
        radius,
        rms_residual: (ss / cloud.len() as f64).sqrt(),
    })
}
