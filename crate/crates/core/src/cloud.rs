//! Point-cloud container, rigid transforms and normalization.
//!
//! A cloud is an `N x K` attribute matrix split into an `N x 3` coordinate
//! block and an `N x (K - 3)` block of extra attributes (color, intensity,
//! texture labels). Every operation returns a new cloud.

use nalgebra::{DMatrix, Matrix3, RowVector3, Unit, Vector3};

use crate::error::{Error, Result};

/// Tolerance on `RᵀR = I` and `det R = 1` accepted by [`apply_transform`].
pub const ROTATION_TOLERANCE: f64 = 1e-6;

const SPECTRAL_REL_TOL: f64 = 1e-10;
const SPECTRAL_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    coords: DMatrix<f64>,
    attrs: DMatrix<f64>,
}

impl PointCloud {
    /// Builds a cloud from an `N x 3` coordinate block and an `N x m`
    /// attribute block (`m` may be zero).
    pub fn new(coords: DMatrix<f64>, attrs: DMatrix<f64>) -> Result<Self> {
        if coords.nrows() == 0 {
            return Err(Error::EmptyCloud);
        }
        if coords.ncols() != 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                actual: coords.ncols(),
            });
        }
        if attrs.nrows() != coords.nrows() {
            return Err(Error::DimensionMismatch {
                expected: coords.nrows(),
                actual: attrs.nrows(),
            });
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("coordinates"));
        }
        if attrs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("attributes"));
        }
        Ok(Self { coords, attrs })
    }

    pub fn from_coords(coords: DMatrix<f64>) -> Result<Self> {
        let n = coords.nrows();
        Self::new(coords, DMatrix::zeros(n, 0))
    }

    pub fn from_points(points: &[[f64; 3]]) -> Result<Self> {
        let coords = DMatrix::from_fn(points.len(), 3, |i, j| points[i][j]);
        Self::from_coords(coords)
    }

    pub fn len(&self) -> usize {
        self.coords.nrows()
    }

    /// Always false; a cloud holds at least one point.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn attrs(&self) -> &DMatrix<f64> {
        &self.attrs
    }

    pub fn attr_dim(&self) -> usize {
        self.attrs.ncols()
    }

    /// Total column count `K = 3 + attr_dim`.
    pub fn width(&self) -> usize {
        3 + self.attrs.ncols()
    }

    pub fn point(&self, i: usize) -> Vector3<f64> {
        Vector3::new(self.coords[(i, 0)], self.coords[(i, 1)], self.coords[(i, 2)])
    }

    pub fn points(&self) -> Vec<[f64; 3]> {
        (0..self.len())
            .map(|i| [self.coords[(i, 0)], self.coords[(i, 1)], self.coords[(i, 2)]])
            .collect()
    }

    /// The full `N x K` matrix `[coords | attrs]`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let k = self.width();
        DMatrix::from_fn(n, k, |i, j| {
            if j < 3 {
                self.coords[(i, j)]
            } else {
                self.attrs[(i, j - 3)]
            }
        })
    }

    /// Same attributes, new coordinates.
    pub fn with_coords(&self, coords: DMatrix<f64>) -> Result<Self> {
        Self::new(coords, self.attrs.clone())
    }

    pub fn with_attrs(&self, attrs: DMatrix<f64>) -> Result<Self> {
        Self::new(self.coords.clone(), attrs)
    }

    /// Rows `indices` in the given order (repetitions allowed).
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let coords = self.coords.select_rows(indices.iter());
        let attrs = self.attrs.select_rows(indices.iter());
        Self::new(coords, attrs)
    }

    pub fn centroid(&self) -> Vector3<f64> {
        let mean = self.coords.row_mean();
        Vector3::new(mean[0], mean[1], mean[2])
    }
}

/// Rigid motion acting on row vectors: `p ↦ p·R + a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub shift: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, shift: Vector3<f64>) -> Result<Self> {
        let t = Self { rotation, shift };
        t.validate()?;
        Ok(t)
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            shift: Vector3::zeros(),
        }
    }

    pub fn translation(shift: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            shift,
        }
    }

    /// Rotation by `angle` radians about `axis` (right-handed, active), then
    /// a shift. With the row-vector convention the stored matrix is the
    /// transpose of the usual column-vector rotation.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, shift: Vector3<f64>) -> Self {
        let rot = nalgebra::Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
        Self {
            rotation: rot.matrix().transpose(),
            shift,
        }
    }

    /// Largest deviation of `RᵀR` from identity, combined with `|det R - 1|`.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.rotation.transpose() * self.rotation - Matrix3::identity();
        let det = (self.rotation.determinant() - 1.0).abs();
        gram.amax().max(det)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rotation.iter().chain(self.shift.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("transform"));
        }
        let err = self.orthonormality_error();
        if err > ROTATION_TOLERANCE {
            return Err(Error::InvalidRotation(err));
        }
        Ok(())
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            shift: -(rt.transpose() * self.shift),
        }
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * next.rotation,
            shift: next.rotation.transpose() * self.shift + next.shift,
        }
    }

    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * p + self.shift
    }
}

/// Subtracts the coordinate centroid; attributes are untouched.
pub fn recenter(cloud: &PointCloud) -> PointCloud {
    let mean = cloud.coords.row_mean();
    let mut coords = cloud.coords.clone();
    for mut row in coords.row_iter_mut() {
        row -= &mean;
    }
    PointCloud {
        coords,
        attrs: cloud.attrs.clone(),
    }
}

/// Rescales coordinates uniformly so their spectral norm equals `c`.
pub fn scale_normalize(cloud: &PointCloud, c: f64) -> Result<PointCloud> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::BadParams(format!(
            "normalization target must be positive, got {c}"
        )));
    }
    let norm = spectral_norm(&cloud.coords)?;
    if norm == 0.0 {
        return Err(Error::DegenerateCloud);
    }
    Ok(PointCloud {
        coords: &cloud.coords * (c / norm),
        attrs: cloud.attrs.clone(),
    })
}

/// Largest singular value of `m`.
///
/// Power iteration on the Gram matrix `MᵀM`; the Gram matrix is squared a
/// few times first so nearly tied leading singular values (common for
/// round objects) still converge inside the iteration budget.
pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    if m.ncols() == 0 || m.nrows() == 0 {
        return Ok(0.0);
    }
    let gram = m.transpose() * m;
    let scale = gram.amax();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let gram = gram / scale;

    let mut accel = gram.clone();
    for _ in 0..3 {
        accel = &accel * &accel;
        let s = accel.amax();
        if s == 0.0 || !s.is_finite() {
            accel = gram.clone();
            break;
        }
        accel /= s;
    }

    // start from the heaviest Gram column, nudged off any symmetry
    let best_col = (0..gram.ncols())
        .max_by(|&a, &b| gram.column(a).norm().total_cmp(&gram.column(b).norm()))
        .unwrap_or(0);
    let mut x = gram.column(best_col).clone_owned();
    for (i, v) in x.iter_mut().enumerate() {
        *v += 1e-3 * (1.0 + i as f64);
    }
    x.normalize_mut();

    let mut rho = x.dot(&(&gram * &x));
    for _ in 0..SPECTRAL_MAX_ITER {
        let mut y = &accel * &x;
        let ny = y.norm();
        if ny == 0.0 {
            return Ok(0.0);
        }
        y /= ny;
        let next = y.dot(&(&gram * &y));
        x = y;
        if (next - rho).abs() <= SPECTRAL_REL_TOL * next.abs() {
            return Ok((next.max(0.0) * scale).sqrt());
        }
        rho = next;
    }
    Err(Error::ConvergenceFailure(
        "spectral norm power iteration",
        SPECTRAL_MAX_ITER,
    ))
}

/// Applies `coords ← coords·R + 1·aᵀ`.
pub fn apply_transform(cloud: &PointCloud, t: &RigidTransform) -> Result<PointCloud> {
    t.validate()?;
    let shift = RowVector3::new(t.shift[0], t.shift[1], t.shift[2]);
    let rot = DMatrix::from_column_slice(3, 3, t.rotation.as_slice());
    let mut coords = &cloud.coords * rot;
    for mut row in coords.row_iter_mut() {
        row += &shift;
    }
    Ok(PointCloud {
        coords,
        attrs: cloud.attrs.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn recenter_two_points() {
        let cloud = PointCloud::from_points(&[[1.0, 1.0, 1.0], [3.0, 1.0, 1.0]]).unwrap();
        let c = recenter(&cloud);
        assert_eq!(c.points(), vec![[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
    }

    #[test]
    fn recenter_random_has_zero_mean_and_is_idempotent() {
        let cloud = PointCloud::from_coords(random_matrix(100, 3, 1) * 10.0).unwrap();
        let once = recenter(&cloud);
        for j in 0..3 {
            assert!(once.coords().column(j).mean().abs() < 1e-12);
        }
        let twice = recenter(&once);
        assert!((once.coords() - twice.coords()).amax() < 1e-12);
    }

    #[test]
    fn recenter_keeps_attrs() {
        let coords = random_matrix(10, 3, 2);
        let attrs = random_matrix(10, 2, 3);
        let cloud = PointCloud::new(coords, attrs.clone()).unwrap();
        assert_eq!(recenter(&cloud).attrs(), &attrs);
    }

    #[test]
    fn spectral_norm_simple_cases() {
        let m = DMatrix::from_row_slice(2, 3, &[2.0, 0.0, 0.0, 0.0, 3.0, 0.0]);
        assert!((spectral_norm(&m).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(spectral_norm(&DMatrix::zeros(4, 3)).unwrap(), 0.0);
    }

    #[test]
    fn spectral_norm_matches_svd() {
        for seed in 0..10 {
            let m = random_matrix(50, 3, seed);
            let svd = m.clone().svd(false, false);
            let oracle = svd.singular_values.max();
            let got = spectral_norm(&m).unwrap();
            assert!((got - oracle).abs() < 1e-8, "seed {seed}: {got} vs {oracle}");
        }
    }

    #[test]
    fn spectral_norm_tied_singular_values() {
        // rows of a scaled orthogonal frame: all three singular values equal
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 2.0]);
        assert!((spectral_norm(&m).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scale_normalize_halves_identity_rows() {
        let cloud = PointCloud::from_points(&[[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]]).unwrap();
        let out = scale_normalize(&cloud, 1.0).unwrap();
        assert!((out.coords() - cloud.coords() * 0.5).amax() < 1e-12);
    }

    #[test]
    fn scale_normalize_hits_target() {
        let cloud = PointCloud::from_coords(random_matrix(40, 3, 7)).unwrap();
        let out = scale_normalize(&cloud, 5.0).unwrap();
        let oracle = out.coords().clone().svd(false, false).singular_values.max();
        assert!((oracle - 5.0).abs() < 1e-6);
        let again = scale_normalize(&out, 5.0).unwrap();
        assert!((again.coords() - out.coords()).amax() < 1e-9);
    }

    #[test]
    fn scale_normalize_rejects_zero_cloud() {
        let cloud = PointCloud::from_coords(DMatrix::zeros(3, 3)).unwrap();
        assert!(matches!(scale_normalize(&cloud, 1.0), Err(Error::DegenerateCloud)));
    }

    #[test]
    fn transform_examples() {
        let origin = PointCloud::from_points(&[[0.0, 0.0, 0.0]]).unwrap();
        let t = RigidTransform::translation(Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(apply_transform(&origin, &t).unwrap().points(), vec![[1.0, 0.0, 0.0]]);

        let x = PointCloud::from_points(&[[1.0, 0.0, 0.0]]).unwrap();
        let rz = RigidTransform::from_axis_angle(Vector3::z(), std::f64::consts::FRAC_PI_2, Vector3::zeros());
        let p = apply_transform(&x, &rz).unwrap().point(0);
        assert!((p - Vector3::new(0.0, 1.0, 0.0)).amax() < 1e-12);
        assert!((rz.apply_point(&Vector3::x()) - p).amax() < 1e-15);
    }

    #[test]
    fn transform_round_trip_and_distances() {
        let cloud = PointCloud::from_coords(random_matrix(30, 3, 11)).unwrap();
        let t = RigidTransform::from_axis_angle(Vector3::new(0.3, -1.0, 0.7), 1.1, Vector3::new(0.5, -2.0, 3.0));
        let moved = apply_transform(&cloud, &t).unwrap();
        let back = apply_transform(&moved, &t.inverse()).unwrap();
        assert!((back.coords() - cloud.coords()).amax() < 1e-9);
        for i in 0..cloud.len() {
            for j in 0..cloud.len() {
                let d0 = (cloud.point(i) - cloud.point(j)).norm();
                let d1 = (moved.point(i) - moved.point(j)).norm();
                assert!((d0 - d1).abs() < 1e-9);
            }
        }
        let composed = t.then(&t.inverse());
        assert!((composed.rotation - Matrix3::identity()).amax() < 1e-12);
        assert!(composed.shift.amax() < 1e-12);
    }

    #[test]
    fn transform_rejects_non_rotation() {
        let cloud = PointCloud::from_points(&[[0.0, 0.0, 0.0]]).unwrap();
        let t = RigidTransform {
            rotation: Matrix3::identity() * 1.1,
            shift: Vector3::zeros(),
        };
        assert!(matches!(apply_transform(&cloud, &t), Err(Error::InvalidRotation(_))));
        let reflection = RigidTransform {
            rotation: Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0)),
            shift: Vector3::zeros(),
        };
        assert!(reflection.validate().is_err());
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(matches!(
            PointCloud::from_coords(DMatrix::zeros(0, 3)),
            Err(Error::EmptyCloud)
        ));
        assert!(PointCloud::from_coords(DMatrix::zeros(2, 2)).is_err());
        let mut m = DMatrix::zeros(2, 3);
        m[(1, 1)] = f64::NAN;
        assert!(matches!(PointCloud::from_coords(m), Err(Error::NonFinite(_))));
    }
}
