//! Independent dense oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix3, SymmetricEigen, UnitQuaternion, Vector3, Vector4};
use pcresample::{PointCloud, ShiftKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> PointCloud {
    let coords = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-extent..extent));
    PointCloud::from_coords(coords).unwrap()
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let q = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
    UnitQuaternion::from_quaternion(nalgebra::Quaternion::from(q))
        .to_rotation_matrix()
        .into_inner()
}

/// Rows `p ↦ R p + t`.
pub fn rigid_motion(cloud: &PointCloud, r: &Matrix3<f64>, t: &Vector3<f64>) -> PointCloud {
    let mut coords = cloud.coords().clone();
    for i in 0..cloud.len() {
        let p = r * cloud.point(i) + t;
        for k in 0..3 {
            coords[(i, k)] = p[k];
        }
    }
    cloud.with_coords(coords).unwrap()
}

/// O(N²) ε-graph weights, same squared-distance arithmetic as the library.
pub fn brute_force_weights(cloud: &PointCloud, sigma: f64, tau: f64) -> DMatrix<f64> {
    let pts = cloud.points();
    let n = pts.len();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dx = pts[i][0] - pts[j][0];
            let dy = pts[i][1] - pts[j][1];
            let dz = pts[i][2] - pts[j][2];
            let d2 = dx * dx + dy * dy + dz * dz;
            if d2 <= tau * tau {
                let v = (-d2 * (1.0 / (sigma * sigma))).exp();
                if v > 0.0 {
                    w[(i, j)] = v;
                }
            }
        }
    }
    w
}

/// Dense shift with unit self loops on isolated nodes for degree-based kinds.
pub fn dense_shift(w: &DMatrix<f64>, kind: ShiftKind) -> DMatrix<f64> {
    let n = w.nrows();
    let mut w = w.clone();
    let mut d: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
    if matches!(kind, ShiftKind::Transition | ShiftKind::NormalizedAdjacency) {
        for i in 0..n {
            if d[i] == 0.0 {
                w[(i, i)] = 1.0;
                d[i] = 1.0;
            }
        }
    }
    match kind {
        ShiftKind::Adjacency => w,
        ShiftKind::Transition => DMatrix::from_fn(n, n, |i, j| w[(i, j)] / d[i]),
        ShiftKind::NormalizedAdjacency => DMatrix::from_fn(n, n, |i, j| w[(i, j)] / (d[i] * d[j]).sqrt()),
        ShiftKind::Laplacian => DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)) - w,
    }
}

/// Symmetric matrix with the same spectrum as a dense shift.
pub fn dense_symmetric(w: &DMatrix<f64>, kind: ShiftKind) -> DMatrix<f64> {
    match kind {
        ShiftKind::Transition => dense_shift(w, ShiftKind::NormalizedAdjacency),
        k => dense_shift(w, k),
    }
}

pub fn spectral_radius(sym: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(sym.clone())
        .eigenvalues
        .iter()
        .fold(0.0, |m: f64, v| m.max(v.abs()))
}

/// `Σ h_ℓ (sA)^ℓ X` with explicit matrix powers.
pub fn dense_polynomial(a: &DMatrix<f64>, h: &[f64], scale: f64, x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let sa = a * scale;
    let mut power = DMatrix::<f64>::identity(n, n);
    let mut out = DMatrix::zeros(n, x.ncols());
    for &c in h {
        out += &power * x * c;
        power = &power * &sa;
    }
    out
}

/// Eigenvectors of `sym` for the `b` largest (or smallest) eigenvalues, and
/// the gap to the next eigenvalue.
pub fn dense_band(sym: &DMatrix<f64>, b: usize, largest: bool) -> (DMatrix<f64>, f64) {
    let eig = SymmetricEigen::new(sym.clone());
    let mut order: Vec<usize> = (0..sym.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    if largest {
        order.reverse();
    }
    let v = DMatrix::from_fn(sym.nrows(), b, |i, k| eig.eigenvectors[(i, order[k])]);
    let gap = if b < order.len() {
        (eig.eigenvalues[order[b - 1]] - eig.eigenvalues[order[b]]).abs()
    } else {
        f64::INFINITY
    };
    (v, gap)
}

pub fn normalize(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Minimizes `objective` over the probability simplex by cyclic pairwise
/// golden-section search: each step moves mass between two coordinates.
pub fn simplex_minimize(n: usize, objective: impl Fn(&[f64]) -> f64, sweeps: usize) -> Vec<f64> {
    let mut p = vec![1.0 / n as f64; n];
    for _ in 0..sweeps {
        let before = p.clone();
        for i in 0..n {
            for j in i + 1..n {
                let mass = p[i] + p[j];
                let eval = |t: f64, p: &mut Vec<f64>| {
                    p[i] = t;
                    p[j] = mass - t;
                    objective(p)
                };
                let (mut lo, mut hi) = (0.0, mass);
                let mut x1 = hi - INV_PHI * (hi - lo);
                let mut x2 = lo + INV_PHI * (hi - lo);
                let mut f1 = eval(x1, &mut p);
                let mut f2 = eval(x2, &mut p);
                while hi - lo > 1e-15 * mass.max(1e-300) && hi - lo > 1e-300 {
                    if f1 < f2 {
                        hi = x2;
                        x2 = x1;
                        f2 = f1;
                        x1 = hi - INV_PHI * (hi - lo);
                        f1 = eval(x1, &mut p);
                    } else {
                        lo = x1;
                        x1 = x2;
                        f1 = f2;
                        x2 = lo + INV_PHI * (hi - lo);
                        f2 = eval(x2, &mut p);
                    }
                }
                let t = 0.5 * (lo + hi);
                p[i] = t;
                p[j] = mass - t;
            }
        }
        if max_abs_diff(&before, &p) < 1e-13 {
            break;
        }
    }
    p
}
