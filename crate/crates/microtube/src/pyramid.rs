//! SSD-style anchor-box pyramid: P square grids of decreasing resolution,
//! each cell carrying a fixed set of anchor shapes.
//!
//! The default configuration reproduces the SSD300 layout: grids
//! {38, 19, 10, 5, 3, 1}, shape counts {4, 6, 6, 6, 4, 4}, 8732 anchors
//! total. Anchors are not clipped to the image; clipping is a post-step
//! callers can apply.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Geometry of the anchor pyramid. Every field is data so alternative
/// layouts stay testable; levels are indexed 0 (finest grid) to P-1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PyramidConfig {
    /// Side length of each square grid, strictly decreasing.
    pub grid_sizes: Vec<usize>,
    /// Number of anchor shapes per cell at each level.
    pub shapes_per_cell: Vec<usize>,
    /// Anchor scale (fraction of image side) at each level.
    pub scales: Vec<f64>,
    /// Aspect ratios per level, excluding the extra square anchor.
    pub aspect_ratios: Vec<Vec<f64>>,
    /// Add the geometric-mean square anchor (scale sqrt(s_p * s_{p+1})).
    pub extra_square: bool,
    /// Successor scale used by the extra square anchor at the last level.
    pub extra_scale: f64,
}

impl Default for PyramidConfig {
    fn default() -> Self {
        let r4 = vec![1.0, 2.0, 0.5];
        let r6 = vec![1.0, 2.0, 0.5, 3.0, 1.0 / 3.0];
        PyramidConfig {
            grid_sizes: vec![38, 19, 10, 5, 3, 1],
            shapes_per_cell: vec![4, 6, 6, 6, 4, 4],
            scales: vec![0.10, 0.20, 0.375, 0.55, 0.725, 0.90],
            aspect_ratios: vec![r4.clone(), r6.clone(), r6.clone(), r6, r4.clone(), r4],
            extra_square: true,
            extra_scale: 1.05,
        }
    }
}

impl PyramidConfig {
    pub fn levels(&self) -> usize {
        self.grid_sizes.len()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.grid_sizes.len();
        if p == 0 {
            return Err(Error::InvalidConfig {
                reason: "pyramid must have at least one level".into(),
            });
        }
        if self.shapes_per_cell.len() != p
            || self.scales.len() != p
            || self.aspect_ratios.len() != p
        {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "length mismatch: {} grids, {} shape counts, {} scales, {} ratio lists",
                    p,
                    self.shapes_per_cell.len(),
                    self.scales.len(),
                    self.aspect_ratios.len()
                ),
            });
        }
        if self.grid_sizes.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidConfig {
                reason: "grid sizes must be strictly decreasing".into(),
            });
        }
        if self.grid_sizes.contains(&0) {
            return Err(Error::InvalidConfig {
                reason: "grid sizes must be positive".into(),
            });
        }
        let extra = usize::from(self.extra_square);
        for (lvl, (ratios, &r)) in self
            .aspect_ratios
            .iter()
            .zip(&self.shapes_per_cell)
            .enumerate()
        {
            if ratios.len() + extra != r {
                return Err(Error::InvalidConfig {
                    reason: format!(
                        "level {lvl}: {} ratios (+{extra} extra square) != {r} shapes per cell",
                        ratios.len()
                    ),
                });
            }
            if ratios.iter().any(|&a| !(a.is_finite() && a > 0.0)) {
                return Err(Error::InvalidConfig {
                    reason: format!("level {lvl}: aspect ratios must be positive"),
                });
            }
        }
        if self
            .scales
            .iter()
            .chain(std::iter::once(&self.extra_scale))
            .any(|&s| !(s.is_finite() && s > 0.0))
        {
            return Err(Error::InvalidConfig {
                reason: "scales must be positive".into(),
            });
        }
        Ok(())
    }

    /// Stable fingerprint of the geometry; stamped into every derived
    /// artifact so matrices, binaries and proposals cannot be mixed across
    /// layouts.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().fold(String::new(), |mut s, b| {
            use std::fmt::Write;
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// Anchors of one pyramid level, cell-major: `boxes[cell * shapes + shape]`.
#[derive(Debug, Clone)]
pub struct LevelAnchors {
    pub grid: usize,
    pub shapes: usize,
    boxes: Vec<BBox>,
}

impl LevelAnchors {
    pub fn cells(&self) -> usize {
        self.grid * self.grid
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn anchor(&self, cell: usize, shape: usize) -> &BBox {
        &self.boxes[cell * self.shapes + shape]
    }

    /// Iterates `(cell, shape, box)` in cell-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &BBox)> {
        self.boxes
            .iter()
            .enumerate()
            .map(move |(i, b)| (i / self.shapes, i % self.shapes, b))
    }
}

/// The full anchor pyramid plus the config fingerprint it was built from.
#[derive(Debug, Clone)]
pub struct AnchorSet {
    config: PyramidConfig,
    config_hash: String,
    levels: Vec<LevelAnchors>,
}

impl AnchorSet {
    pub fn config(&self) -> &PyramidConfig {
        &self.config
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn levels(&self) -> &[LevelAnchors] {
        &self.levels
    }

    pub fn level(&self, p: usize) -> Result<&LevelAnchors> {
        self.levels.get(p).ok_or(Error::LevelOutOfRange {
            level: p,
            levels: self.levels.len(),
        })
    }

    pub fn total(&self) -> usize {
        self.levels.iter().map(|l| l.len()).sum()
    }

    /// Row-major cell index of a point at level `p`. Interior boundary
    /// points belong to the lower-index cell; `x = 1.0` falls in the last
    /// column without a special case.
    pub fn cell_of(&self, p: usize, x: f64, y: f64) -> Result<usize> {
        let grid = self.level(p)?.grid;
        cell_index(grid, x, y)
    }
}

/// See [`AnchorSet::cell_of`].
pub fn cell_index(grid: usize, x: f64, y: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
        return Err(Error::PointOutOfRange { x, y });
    }
    let g = grid as f64;
    let col = (((x * g).ceil() as isize) - 1).clamp(0, grid as isize - 1) as usize;
    let row = (((y * g).ceil() as isize) - 1).clamp(0, grid as isize - 1) as usize;
    Ok(row * grid + col)
}

pub fn cell_row_col(grid: usize, cell: usize) -> (usize, usize) {
    (cell / grid, cell % grid)
}

pub fn row_col_cell(grid: usize, row: usize, col: usize) -> usize {
    row * grid + col
}

/// Builds the deterministic anchor geometry for `config`.
///
/// Shape order within a cell: first ratio in the list at the level scale,
/// then (when enabled) the geometric-mean square, then the remaining ratios.
pub fn build_pyramid(config: &PyramidConfig) -> Result<AnchorSet> {
    config.validate()?;
    let p_total = config.levels();
    let mut levels = Vec::with_capacity(p_total);
    for p in 0..p_total {
        let grid = config.grid_sizes[p];
        let scale = config.scales[p];
        let next_scale = if p + 1 < p_total {
            config.scales[p + 1]
        } else {
            config.extra_scale
        };

        // (w, h) per shape, fixed across cells.
        let mut shapes: Vec<(f64, f64)> = Vec::with_capacity(config.shapes_per_cell[p]);
        let ratios = &config.aspect_ratios[p];
        let push_ratio = |shapes: &mut Vec<(f64, f64)>, a: f64| {
            let root = a.sqrt();
            shapes.push((scale * root, scale / root));
        };
        if let Some(&first) = ratios.first() {
            push_ratio(&mut shapes, first);
        }
        if config.extra_square {
            let s = (scale * next_scale).sqrt();
            shapes.push((s, s));
        }
        for &a in ratios.iter().skip(1) {
            push_ratio(&mut shapes, a);
        }

        let mut boxes = Vec::with_capacity(grid * grid * shapes.len());
        for row in 0..grid {
            for col in 0..grid {
                let cx = (col as f64 + 0.5) / grid as f64;
                let cy = (row as f64 + 0.5) / grid as f64;
                for &(w, h) in &shapes {
                    boxes.push(BBox::from_center(cx, cy, w, h)?);
                }
            }
        }
        levels.push(LevelAnchors {
            grid,
            shapes: shapes.len(),
            boxes,
        });
    }
    Ok(AnchorSet {
        config_hash: config.hash(),
        config: config.clone(),
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn default_pyramid_counts() {
        let set = build_pyramid(&PyramidConfig::default()).unwrap();
        let per_level: Vec<usize> = set.levels().iter().map(|l| l.len()).collect();
        assert_eq!(per_level, vec![5776, 2166, 600, 150, 36, 4]);
        assert_eq!(set.total(), 8732);
    }

    #[test]
    fn three_by_three_level_has_36_anchors() {
        let set = build_pyramid(&PyramidConfig::default()).unwrap();
        assert_eq!(set.level(4).unwrap().len(), 3 * 3 * 4);
    }

    #[test]
    fn single_level_single_square() {
        let config = PyramidConfig {
            grid_sizes: vec![1],
            shapes_per_cell: vec![1],
            scales: vec![0.4],
            aspect_ratios: vec![vec![1.0]],
            extra_square: false,
            extra_scale: 1.0,
        };
        let set = build_pyramid(&config).unwrap();
        assert_eq!(set.total(), 1);
        let b = set.level(0).unwrap().anchor(0, 0);
        assert_abs_diff_eq!(b.x_min, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(b.y_min, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(b.x_max, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(b.y_max, 0.7, epsilon = 1e-12);
    }

    #[test]
    fn build_is_deterministic() {
        let a = build_pyramid(&PyramidConfig::default()).unwrap();
        let b = build_pyramid(&PyramidConfig::default()).unwrap();
        for (la, lb) in a.levels().iter().zip(b.levels()) {
            for ((_, _, ba), (_, _, bb)) in la.iter().zip(lb.iter()) {
                assert_eq!(
                    ba.as_array().map(f64::to_bits),
                    bb.as_array().map(f64::to_bits)
                );
            }
        }
        assert_eq!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn reciprocal_ratios_have_equal_area() {
        let set = build_pyramid(&PyramidConfig::default()).unwrap();
        // level 1 shape order: 1, extra, 2, 1/2, 3, 1/3
        let lvl = set.level(1).unwrap();
        let a2 = lvl.anchor(0, 2).area();
        let a_half = lvl.anchor(0, 3).area();
        assert_abs_diff_eq!(a2, a_half, epsilon = 1e-12);
        let a3 = lvl.anchor(0, 4).area();
        let a_third = lvl.anchor(0, 5).area();
        assert_abs_diff_eq!(a3, a_third, epsilon = 1e-12);
        // ratio-1 anchors are squares
        let sq = lvl.anchor(0, 0);
        assert_abs_diff_eq!(sq.width(), sq.height(), epsilon = 1e-12);
    }

    #[test]
    fn anchor_centers_inside_their_cells() {
        let set = build_pyramid(&PyramidConfig::default()).unwrap();
        for (p, lvl) in set.levels().iter().enumerate() {
            for (cell, _, b) in lvl.iter() {
                let (cx, cy) = b.center();
                assert_eq!(set.cell_of(p, cx, cy).unwrap(), cell);
            }
        }
    }

    #[test]
    fn cell_of_examples() {
        assert_eq!(cell_index(1, 0.5, 0.5).unwrap(), 0);
        assert_eq!(cell_index(3, 0.99, 0.99).unwrap(), 8);
        // floor(0.34 * 3) = 1, row 0
        assert_eq!(cell_index(3, 0.34, 0.0).unwrap(), 1);
        // outer boundary maps into the last cell
        assert_eq!(cell_index(3, 1.0, 1.0).unwrap(), 8);
        // interior boundary belongs to the lower-index cell
        assert_eq!(cell_index(2, 0.5, 0.0).unwrap(), 0);
        assert!(cell_index(3, 1.2, 0.5).is_err());
        assert!(cell_index(3, 0.5, -0.1).is_err());
    }

    #[test]
    fn config_validation_errors() {
        let mut c = PyramidConfig::default();
        c.scales.pop();
        assert!(matches!(
            build_pyramid(&c),
            Err(Error::InvalidConfig { .. })
        ));

        let c = PyramidConfig {
            grid_sizes: vec![38, 38, 10, 5, 3, 1],
            ..PyramidConfig::default()
        };
        assert!(build_pyramid(&c).is_err());

        let mut c = PyramidConfig::default();
        c.shapes_per_cell[0] = 5;
        assert!(build_pyramid(&c).is_err());
    }

    #[test]
    fn hash_changes_with_geometry() {
        let a = PyramidConfig::default().hash();
        let mut other = PyramidConfig::default();
        other.scales[0] = 0.11;
        assert_ne!(a, other.hash());
        assert_eq!(a.len(), 16);
    }
}
