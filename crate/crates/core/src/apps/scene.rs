use std::collections::BTreeSet;

use nalgebra::DMatrix;

use crate::cloud::PointCloud;
use crate::error::{bad_params, Result};

/// Axis-aligned box resting on the desk, in lattice units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeBox {
    pub x0: i64,
    pub y0: i64,
    pub width: i64,
    pub depth: i64,
    pub height: i64,
}

/// Synthetic desk: a rectangular top with boxes on it, all sampled on one
/// integer lattice so overlapping views share exact points.
#[derive(Debug, Clone, PartialEq)]
pub struct DeskScene {
    pub spacing: f64,
    pub width: i64,
    pub depth: i64,
    pub boxes: Vec<LatticeBox>,
}

impl Default for DeskScene {
    fn default() -> Self {
        Self {
            spacing: 0.02,
            width: 60,
            depth: 40,
            boxes: vec![
                LatticeBox {
                    x0: 3,
                    y0: 4,
                    width: 10,
                    depth: 8,
                    height: 8,
                },
                LatticeBox {
                    x0: 17,
                    y0: 3,
                    width: 7,
                    depth: 12,
                    height: 14,
                },
                LatticeBox {
                    x0: 29,
                    y0: 6,
                    width: 12,
                    depth: 6,
                    height: 5,
                },
                LatticeBox {
                    x0: 45,
                    y0: 4,
                    width: 9,
                    depth: 9,
                    height: 10,
                },
                LatticeBox {
                    x0: 5,
                    y0: 22,
                    width: 6,
                    depth: 12,
                    height: 18,
                },
                LatticeBox {
                    x0: 16,
                    y0: 25,
                    width: 11,
                    depth: 8,
                    height: 6,
                },
                LatticeBox {
                    x0: 32,
                    y0: 20,
                    width: 6,
                    depth: 6,
                    height: 12,
                },
                LatticeBox {
                    x0: 42,
                    y0: 24,
                    width: 12,
                    depth: 10,
                    height: 4,
                },
            ],
        }
    }
}

impl DeskScene {
    fn lattice(&self) -> Result<BTreeSet<[i64; 3]>> {
        if self.width < 2 || self.depth < 2 || !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(bad_params(
                "desk scene needs a positive spacing and at least 2x2 lattice",
            ));
        }
        let covered = |x: i64, y: i64| {
            self.boxes
                .iter()
                .any(|b| x > b.x0 && x < b.x0 + b.width && y > b.y0 && y < b.y0 + b.depth)
        };
        let mut points = BTreeSet::new();
        for x in 0..=self.width {
            for y in 0..=self.depth {
                if !covered(x, y) {
                    points.insert([x, y, 0]);
                }
            }
        }
        for b in &self.boxes {
            let (x1, y1, h) = (b.x0 + b.width, b.y0 + b.depth, b.height);
            for x in b.x0..=x1 {
                for y in b.y0..=y1 {
                    points.insert([x, y, h]);
                }
                for z in 0..=h {
                    points.insert([x, b.y0, z]);
                    points.insert([x, y1, z]);
                }
            }
            for y in b.y0..=y1 {
                for z in 0..=h {
                    points.insert([b.x0, y, z]);
                    points.insert([x1, y, z]);
                }
            }
        }
        Ok(points)
    }

    pub fn cloud(&self) -> Result<PointCloud> {
        self.view(0.0, 1.0)
    }

    /// Points with `x` between fractions `from` and `to` of the desk width.
    pub fn view(&self, from: f64, to: f64) -> Result<PointCloud> {
        let lo = from * self.width as f64;
        let hi = to * self.width as f64;
        let pts: Vec<[i64; 3]> = self
            .lattice()?
            .into_iter()
            .filter(|p| (p[0] as f64) >= lo && (p[0] as f64) <= hi)
            .collect();
        if pts.is_empty() {
            return Err(bad_params("view is empty"));
        }
        let coords = DMatrix::from_fn(pts.len(), 3, |i, k| pts[i][k] as f64 * self.spacing);
        PointCloud::from_coords(coords)
    }
}
