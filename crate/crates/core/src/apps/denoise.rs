use crate::cloud::PointCloud;
use crate::error::{bad_params, Error, Result};
use crate::graph::ShiftOperator;

/// Repeated Haar low-pass smoothing `X ← (X + A·X/|λ_max|)/2` of the
/// coordinates; attributes are left untouched.
pub fn denoise_lowpass(cloud: &PointCloud, shift: &ShiftOperator, passes: usize) -> Result<PointCloud> {
    if passes == 0 {
        return Err(bad_params("denoising needs at least one pass"));
    }
    if shift.len() != cloud.len() {
        return Err(Error::DimensionMismatch {
            expected: shift.len(),
            actual: cloud.len(),
        });
    }
    let lambda = shift.lambda_max()?.abs();
    let scale = if lambda > 0.0 { 1.0 / lambda } else { 0.0 };
    let mut x = cloud.coords().clone();
    for _ in 0..passes {
        x = (&x + shift.apply(&x) * scale) * 0.5;
    }
    cloud.with_coords(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, shift_operator, IsolatedPolicy, ShiftKind};
    use crate::shapes::{make_shape, ShapeKind, ShapeParams};
    use nalgebra::DMatrix;

    fn transition(cloud: &PointCloud, sigma: f64, tau: f64) -> ShiftOperator {
        let g = build_graph(cloud, sigma, tau).unwrap();
        shift_operator(&g, ShiftKind::Transition, IsolatedPolicy::SelfLoop).unwrap()
    }

    #[test]
    fn constant_cloud_is_a_fixed_point() {
        let cloud = PointCloud::from_coords(DMatrix::from_fn(5, 3, |_, k| k as f64 + 0.5)).unwrap();
        let out = denoise_lowpass(&cloud, &transition(&cloud, 1.0, 1.0), 3).unwrap();
        assert!((out.coords() - cloud.coords()).amax() < 1e-15);
    }

    #[test]
    fn smoothing_reduces_radial_noise() {
        let params = ShapeParams {
            noise_sigma: 0.05,
            seed: 3,
            ..ShapeParams::default()
        };
        let noisy = make_shape(ShapeKind::Sphere, 2000, &params).unwrap();
        let dev = |c: &PointCloud| {
            let radii: Vec<f64> = (0..c.len()).map(|i| c.point(i).norm()).collect();
            let mean = radii.iter().sum::<f64>() / radii.len() as f64;
            radii.iter().map(|r| (r - mean).abs()).sum::<f64>() / radii.len() as f64
        };
        let out = denoise_lowpass(&noisy, &transition(&noisy, 0.1, 0.2), 1).unwrap();
        assert!(dev(&out) < dev(&noisy));
    }

    #[test]
    fn zero_passes_is_rejected() {
        let cloud = make_shape(ShapeKind::Line, 3, &ShapeParams::default()).unwrap();
        assert!(matches!(
            denoise_lowpass(&cloud, &transition(&cloud, 1.0, 1.5), 0),
            Err(Error::BadParams(_))
        ));
    }
}
