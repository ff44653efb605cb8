//! Synthetic fixtures: lines, polygons, circles, cube surfaces, hinges and
//! spheres, sampled on regular lattices (or uniformly at random for the
//! sphere) so contour behavior can be checked against known geometry.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::cloud::PointCloud;
use crate::error::{bad_params, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    /// `n` equispaced collinear points along +x.
    Line,
    /// Closed regular polygon with `params.sides` corners and `n` points in
    /// total (`n` must be a multiple of `sides`).
    Polygon,
    /// `n` points at equal angles on a circle in the xy-plane.
    Circle,
    /// Lattice on the surface of a cube, `n` points per edge.
    CubeFaces,
    /// Two square panels joined at a fold, `n` points per panel side.
    Hinge,
    /// `n` points drawn uniformly on a sphere surface.
    Sphere,
}

impl std::str::FromStr for ShapeKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "line" => ShapeKind::Line,
            "polygon" => ShapeKind::Polygon,
            "circle" => ShapeKind::Circle,
            "cube-faces" | "cube" => ShapeKind::CubeFaces,
            "hinge" => ShapeKind::Hinge,
            "sphere" => ShapeKind::Sphere,
            other => return Err(bad_params(format!("unknown shape {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeParams {
    /// Lattice step for line, polygon, cube and hinge.
    pub spacing: f64,
    /// Circle and sphere radius.
    pub radius: f64,
    pub center: Vector3<f64>,
    pub sides: usize,
    /// Angle between the two hinge panels, radians (π is flat).
    pub fold_angle: f64,
    /// Hinge only: add a binary texture attribute, 1 on the half of each
    /// panel with the larger fold-axis coordinate.
    pub texture: bool,
    /// Standard deviation of i.i.d. Gaussian noise added to each coordinate.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for ShapeParams {
    fn default() -> Self {
        Self {
            spacing: 1.0,
            radius: 1.0,
            center: Vector3::zeros(),
            sides: 4,
            fold_angle: 2.0 * PI / 3.0,
            texture: false,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

pub fn make_shape(kind: ShapeKind, n: usize, params: &ShapeParams) -> Result<PointCloud> {
    if !(params.spacing > 0.0 && params.spacing.is_finite()) {
        return Err(bad_params("spacing must be positive"));
    }
    if !(params.radius > 0.0 && params.radius.is_finite()) {
        return Err(bad_params("radius must be positive"));
    }
    if !(params.noise_sigma >= 0.0 && params.noise_sigma.is_finite()) {
        return Err(bad_params("noise sigma must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let s = params.spacing;

    let mut attrs: Option<Vec<f64>> = None;
    let points: Vec<Vector3<f64>> = match kind {
        ShapeKind::Line => {
            require(n >= 3, "line needs at least 3 points")?;
            (0..n).map(|i| Vector3::new(i as f64 * s, 0.0, 0.0)).collect()
        }
        ShapeKind::Polygon => {
            let k = params.sides;
            require(k >= 3, "polygon needs at least 3 sides")?;
            require(
                n.is_multiple_of(k) && n / k >= 2,
                "polygon point count must be a multiple of sides, at least 2 per side",
            )?;
            let per_side = n / k;
            let side = s * per_side as f64;
            let circumradius = side / (2.0 * (PI / k as f64).sin());
            let corner = |c: usize| {
                let t = 2.0 * PI * c as f64 / k as f64;
                Vector3::new(circumradius * t.cos(), circumradius * t.sin(), 0.0)
            };
            (0..k)
                .flat_map(|c| {
                    let a = corner(c);
                    let b = corner((c + 1) % k);
                    (0..per_side).map(move |t| a + (b - a) * (t as f64 / per_side as f64))
                })
                .collect()
        }
        ShapeKind::Circle => {
            require(n >= 4, "circle needs at least 4 points")?;
            (0..n)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / n as f64;
                    Vector3::new(params.radius * t.cos(), params.radius * t.sin(), 0.0)
                })
                .collect()
        }
        ShapeKind::CubeFaces => {
            require(n >= 3, "cube needs at least 3 points per edge")?;
            let last = n - 1;
            let half = last as f64 * s / 2.0;
            let mut pts = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let on_surface = [i, j, k].iter().any(|&v| v == 0 || v == last);
                        if on_surface {
                            pts.push(Vector3::new(
                                i as f64 * s - half,
                                j as f64 * s - half,
                                k as f64 * s - half,
                            ));
                        }
                    }
                }
            }
            pts
        }
        ShapeKind::Hinge => {
            require(n >= 3, "hinge needs at least 3 points per panel side")?;
            let phi = params.fold_angle;
            require(phi > 0.0 && phi <= PI, "fold angle must lie in (0, π]")?;
            let dir_b = Vector3::new(phi.cos(), 0.0, phi.sin());
            let mut pts = Vec::new();
            let mut tex = Vec::new();
            for (panel, start) in [(Vector3::x(), 0usize), (dir_b, 1usize)] {
                for u in start..n {
                    for y in 0..n {
                        pts.push(panel * (u as f64 * s) + Vector3::y() * (y as f64 * s));
                        tex.push(if y >= n / 2 { 1.0 } else { 0.0 });
                    }
                }
            }
            if params.texture {
                attrs = Some(tex);
            }
            pts
        }
        ShapeKind::Sphere => {
            require(n >= 4, "sphere needs at least 4 points")?;
            (0..n)
                .map(|_| loop {
                    let v = Vector3::new(
                        StandardNormal.sample(&mut rng),
                        StandardNormal.sample(&mut rng),
                        StandardNormal.sample(&mut rng),
                    );
                    let norm: f64 = v.norm();
                    if norm > 1e-12 {
                        break v * (params.radius / norm);
                    }
                })
                .collect()
        }
    };

    let noise = if params.noise_sigma > 0.0 {
        Some(Normal::new(0.0, params.noise_sigma).map_err(|e| bad_params(e.to_string()))?)
    } else {
        None
    };
    let m = points.len();
    let mut coords = DMatrix::from_fn(m, 3, |i, j| points[i][j] + params.center[j]);
    if let Some(noise) = noise {
        for v in coords.iter_mut() {
            *v += noise.sample(&mut rng);
        }
    }
    let attrs = match attrs {
        Some(values) => DMatrix::from_column_slice(m, 1, &values),
        None => DMatrix::zeros(m, 0),
    };
    PointCloud::new(coords, attrs)
}

fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(bad_params(msg))
    }
}

/// Contour points of the [`ShapeKind::Hinge`] lattice with `n` points per
/// side: the fold line plus the outer border of both panels, in the same
/// order `make_shape` emits points.
pub fn hinge_contour_mask(n: usize) -> Vec<bool> {
    let mut mask = Vec::new();
    for start in [0usize, 1] {
        for u in start..n {
            for y in 0..n {
                mask.push(u == 0 || u == n - 1 || y == 0 || y == n - 1);
            }
        }
    }
    mask
}

/// Indices of hinge points on the fold line.
pub fn hinge_fold_mask(n: usize) -> Vec<bool> {
    let mut mask = Vec::new();
    for start in [0usize, 1] {
        for u in start..n {
            for _ in 0..n {
                mask.push(u == 0);
            }
        }
    }
    mask
}

/// For a [`ShapeKind::CubeFaces`] lattice: true for points on a cube edge
/// (two or more coordinates at an extreme), in emission order.
pub fn cube_edge_mask(n: usize) -> Vec<bool> {
    let last = n - 1;
    let mut mask = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let extremes = [i, j, k].iter().filter(|&&v| v == 0 || v == last).count();
                if extremes >= 1 {
                    mask.push(extremes >= 2);
                }
            }
        }
    }
    mask
}

/// For a [`ShapeKind::CubeFaces`] lattice: true for the eight corners.
pub fn cube_corner_mask(n: usize) -> Vec<bool> {
    let last = n - 1;
    let mut mask = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let extremes = [i, j, k].iter().filter(|&&v| v == 0 || v == last).count();
                if extremes >= 1 {
                    mask.push(extremes == 3);
                }
            }
        }
    }
    mask
}
