//! Per-level transition machinery over anchor-grid cell pairs: count
//! estimation from ground-truth micro-tubes, row normalization, threshold
//! sampling, and the test-time support augmentations.
//!
//! Matrices are kept as sparse triplets. Estimated matrices are extremely
//! sparse in practice, and the finest default grid alone would need
//! 1444 x 1444 dense entries.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{iou, MicroTube};
use crate::pyramid::{cell_row_col, row_col_cell, AnchorSet};

/// One sparse square level matrix over cell pairs; `grid` is the side of the
/// underlying feature grid, so the matrix is (grid^2) x (grid^2).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseLevel<V> {
    pub grid: usize,
    pub entries: BTreeMap<(u32, u32), V>,
}

impl<V> SparseLevel<V> {
    pub fn cells(&self) -> usize {
        self.grid * self.grid
    }
}

/// Raw transition counts: entry (i, j) is the number of ground-truth
/// micro-tubes whose best anchor pair was (cell i, cell j) at that level.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionCounts {
    pyramid_hash: String,
    levels: Vec<SparseLevel<u64>>,
}

/// Row-stochastic transition probabilities; rows never observed stay all
/// zero so that thresholding yields no proposals from unobserved cells.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pyramid_hash: String,
    levels: Vec<SparseLevel<f64>>,
}

/// Support of one level of a thresholded transition matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelSupport {
    pub grid: usize,
    pub pairs: BTreeSet<(u32, u32)>,
}

impl LevelSupport {
    pub fn cells(&self) -> usize {
        self.grid * self.grid
    }
}

/// Thresholded (binary) transitions, per level, plus the threshold used.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryTransitions {
    pyramid_hash: String,
    tau: f64,
    levels: Vec<LevelSupport>,
}

impl TransitionCounts {
    pub fn new_empty(anchors: &AnchorSet) -> Self {
        TransitionCounts {
            pyramid_hash: anchors.config_hash().to_string(),
            levels: anchors
                .levels()
                .iter()
                .map(|l| SparseLevel {
                    grid: l.grid,
                    entries: BTreeMap::new(),
                })
                .collect(),
        }
    }

    pub fn from_levels(pyramid_hash: String, levels: Vec<SparseLevel<u64>>) -> Self {
        TransitionCounts {
            pyramid_hash,
            levels,
        }
    }

    pub fn pyramid_hash(&self) -> &str {
        &self.pyramid_hash
    }

    pub fn levels(&self) -> &[SparseLevel<u64>] {
        &self.levels
    }

    pub fn increment(&mut self, level: usize, i: u32, j: u32) {
        *self.levels[level].entries.entry((i, j)).or_insert(0) += 1;
    }

    pub fn total(&self) -> u64 {
        self.levels
            .iter()
            .map(|l| l.entries.values().sum::<u64>())
            .sum()
    }

    /// Elementwise addition; partial counts from sharded estimation merge
    /// into exactly the sequential result.
    pub fn merge(&mut self, other: &TransitionCounts) -> Result<()> {
        if self.pyramid_hash != other.pyramid_hash {
            return Err(Error::ConfigHashMismatch {
                expected: self.pyramid_hash.clone(),
                actual: other.pyramid_hash.clone(),
            });
        }
        if self.levels.len() != other.levels.len() {
            return Err(Error::ShapeMismatch {
                reason: format!(
                    "{} levels vs {} levels",
                    self.levels.len(),
                    other.levels.len()
                ),
            });
        }
        for (a, b) in self.levels.iter_mut().zip(&other.levels) {
            if a.grid != b.grid {
                return Err(Error::ShapeMismatch {
                    reason: format!("grid {} vs {}", a.grid, b.grid),
                });
            }
            for (&k, &v) in &b.entries {
                *a.entries.entry(k).or_insert(0) += v;
            }
        }
        Ok(())
    }
}

impl TransitionMatrix {
    pub fn from_levels(pyramid_hash: String, levels: Vec<SparseLevel<f64>>) -> Self {
        TransitionMatrix {
            pyramid_hash,
            levels,
        }
    }

    pub fn pyramid_hash(&self) -> &str {
        &self.pyramid_hash
    }

    pub fn levels(&self) -> &[SparseLevel<f64>] {
        &self.levels
    }

    /// Sum of each nonzero row, keyed by (level, row); for stochasticity
    /// checks.
    pub fn row_sums(&self) -> BTreeMap<(usize, u32), f64> {
        let mut sums = BTreeMap::new();
        for (p, lvl) in self.levels.iter().enumerate() {
            for (&(i, _), &v) in &lvl.entries {
                *sums.entry((p, i)).or_insert(0.0) += v;
            }
        }
        sums
    }
}

impl BinaryTransitions {
    pub fn new_empty(anchors: &AnchorSet, tau: f64) -> Self {
        BinaryTransitions {
            pyramid_hash: anchors.config_hash().to_string(),
            tau,
            levels: anchors
                .levels()
                .iter()
                .map(|l| LevelSupport {
                    grid: l.grid,
                    pairs: BTreeSet::new(),
                })
                .collect(),
        }
    }

    /// Diagonal-only support: the anchor-cuboid hypothesis space.
    pub fn diagonal(anchors: &AnchorSet) -> Self {
        augment_diagonal(&Self::new_empty(anchors, 1.0))
    }

    pub fn from_levels(pyramid_hash: String, tau: f64, levels: Vec<LevelSupport>) -> Self {
        BinaryTransitions {
            pyramid_hash,
            tau,
            levels,
        }
    }

    pub fn pyramid_hash(&self) -> &str {
        &self.pyramid_hash
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn levels(&self) -> &[LevelSupport] {
        &self.levels
    }

    pub fn contains(&self, level: usize, i: u32, j: u32) -> bool {
        self.levels[level].pairs.contains(&(i, j))
    }

    /// Per-level pair counts and their sum M, the proposal cell-region
    /// budget.
    pub fn cardinality(&self) -> (Vec<usize>, usize) {
        let per: Vec<usize> = self.levels.iter().map(|l| l.pairs.len()).collect();
        let total = per.iter().sum();
        (per, total)
    }

    pub fn off_diagonal_count(&self) -> usize {
        self.levels
            .iter()
            .map(|l| l.pairs.iter().filter(|(i, j)| i != j).count())
            .sum()
    }

    pub fn is_diagonal_only(&self) -> bool {
        self.off_diagonal_count() == 0
    }

    fn map_levels(&self, f: impl Fn(&LevelSupport) -> BTreeSet<(u32, u32)>) -> BinaryTransitions {
        BinaryTransitions {
            pyramid_hash: self.pyramid_hash.clone(),
            tau: self.tau,
            levels: self
                .levels
                .iter()
                .map(|l| LevelSupport {
                    grid: l.grid,
                    pairs: f(l),
                })
                .collect(),
        }
    }
}

/// Best-matching anchor cells for one ground-truth micro-tube at one level:
/// `i` maximizes IoU against the start box (max over the cell's shapes),
/// `j` likewise for the end box, score is the mean of the two best IoUs.
/// Ties break to the lowest cell index, then lowest shape index.
pub fn best_anchor_pair(
    g: &MicroTube,
    anchors: &AnchorSet,
    level: usize,
) -> Result<(u32, u32, f64)> {
    let lvl = anchors.level(level)?;
    let mut best_start = (0u32, f64::NEG_INFINITY);
    let mut best_end = (0u32, f64::NEG_INFINITY);
    for (cell, _, anchor) in lvl.iter() {
        let s = iou(&g.box_start, anchor);
        if s > best_start.1 {
            best_start = (cell as u32, s);
        }
        let e = iou(&g.box_end, anchor);
        if e > best_end.1 {
            best_end = (cell as u32, e);
        }
    }
    Ok((best_start.0, best_end.0, (best_start.1 + best_end.1) / 2.0))
}

/// Best pair across all levels; the winning level is the lowest index on
/// ties (finest grid).
fn best_level_pair(g: &MicroTube, anchors: &AnchorSet) -> (usize, u32, u32) {
    let mut best = (0usize, 0u32, 0u32, f64::NEG_INFINITY);
    for p in 0..anchors.levels().len() {
        let (i, j, score) = best_anchor_pair(g, anchors, p).expect("level in range");
        if score > best.3 {
            best = (p, i, j, score);
        }
    }
    (best.0, best.1, best.2)
}

/// Accumulates transition counts over a ground-truth collection. Each
/// micro-tube contributes exactly one increment at exactly one level, so
/// sharding over workers and merging by addition reproduces the sequential
/// result bit-exactly.
pub fn estimate(gts: &[MicroTube], anchors: &AnchorSet) -> Result<TransitionCounts> {
    if gts.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let counts = gts
        .par_iter()
        .fold(
            || TransitionCounts::new_empty(anchors),
            |mut acc, g| {
                let (p, i, j) = best_level_pair(g, anchors);
                acc.increment(p, i, j);
                acc
            },
        )
        .reduce(
            || TransitionCounts::new_empty(anchors),
            |mut a, b| {
                a.merge(&b).expect("shards share geometry");
                a
            },
        );
    Ok(counts)
}

/// Row-normalizes counts into a stochastic matrix; all-zero rows stay zero.
pub fn normalize(counts: &TransitionCounts) -> TransitionMatrix {
    let levels = counts
        .levels
        .iter()
        .map(|lvl| {
            let mut row_sums: BTreeMap<u32, u64> = BTreeMap::new();
            for (&(i, _), &v) in &lvl.entries {
                *row_sums.entry(i).or_insert(0) += v;
            }
            SparseLevel {
                grid: lvl.grid,
                entries: lvl
                    .entries
                    .iter()
                    .filter(|&(_, &v)| v > 0)
                    .map(|(&(i, j), &v)| ((i, j), v as f64 / row_sums[&i] as f64))
                    .collect(),
            }
        })
        .collect();
    TransitionMatrix {
        pyramid_hash: counts.pyramid_hash.clone(),
        levels,
    }
}

/// Keeps every pair with probability >= tau. tau must lie in (0, 1].
pub fn threshold(matrix: &TransitionMatrix, tau: f64) -> Result<BinaryTransitions> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidThreshold { tau });
    }
    Ok(BinaryTransitions {
        pyramid_hash: matrix.pyramid_hash.clone(),
        tau,
        levels: matrix
            .levels
            .iter()
            .map(|lvl| LevelSupport {
                grid: lvl.grid,
                pairs: lvl
                    .entries
                    .iter()
                    .filter(|&(_, &v)| v >= tau)
                    .map(|(&k, _)| k)
                    .collect(),
            })
            .collect(),
    })
}

/// Adds every (i, i) pair: evaluates anchor cuboids that were missing from
/// the training support.
pub fn augment_diagonal(b: &BinaryTransitions) -> BinaryTransitions {
    b.map_levels(|lvl| {
        let mut pairs = lvl.pairs.clone();
        for i in 0..lvl.cells() as u32 {
            pairs.insert((i, i));
        }
        pairs
    })
}

/// Adds transitions from each cell to its in-bounds 8-neighborhood.
pub fn augment_neighbors(b: &BinaryTransitions) -> BinaryTransitions {
    b.map_levels(|lvl| {
        let mut pairs = lvl.pairs.clone();
        let grid = lvl.grid as isize;
        for cell in 0..lvl.cells() {
            let (r, c) = cell_row_col(lvl.grid, cell);
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (nr, nc) = (r as isize + dr, c as isize + dc);
                    if (0..grid).contains(&nr) && (0..grid).contains(&nc) {
                        pairs.insert((
                            cell as u32,
                            row_col_cell(lvl.grid, nr as usize, nc as usize) as u32,
                        ));
                    }
                }
            }
        }
        pairs
    })
}

/// Replays every observed cell displacement from every grid cell: collects
/// the (row, col) deltas present in the support and adds (i, i + d) wherever
/// the translated target stays in bounds. Out-of-bounds placements are
/// dropped, not clamped.
pub fn augment_relative_offsets(b: &BinaryTransitions) -> BinaryTransitions {
    b.map_levels(|lvl| {
        let grid = lvl.grid as isize;
        let offsets: BTreeSet<(isize, isize)> = lvl
            .pairs
            .iter()
            .map(|&(i, j)| {
                let (ri, ci) = cell_row_col(lvl.grid, i as usize);
                let (rj, cj) = cell_row_col(lvl.grid, j as usize);
                (rj as isize - ri as isize, cj as isize - ci as isize)
            })
            .collect();
        let mut pairs = lvl.pairs.clone();
        for &(dr, dc) in &offsets {
            for r in 0..grid {
                for c in 0..grid {
                    let (tr, tc) = (r + dr, c + dc);
                    if (0..grid).contains(&tr) && (0..grid).contains(&tc) {
                        pairs.insert((
                            row_col_cell(lvl.grid, r as usize, c as usize) as u32,
                            row_col_cell(lvl.grid, tr as usize, tc as usize) as u32,
                        ));
                    }
                }
            }
        }
        pairs
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use crate::pyramid::{build_pyramid, PyramidConfig};
    use approx::assert_abs_diff_eq;

    fn single_level_3x3() -> AnchorSet {
        // cell-sized square anchors on a 3x3 grid
        build_pyramid(&PyramidConfig {
            grid_sizes: vec![3],
            shapes_per_cell: vec![1],
            scales: vec![1.0 / 3.0],
            aspect_ratios: vec![vec![1.0]],
            extra_square: false,
            extra_scale: 1.0,
        })
        .unwrap()
    }

    fn mt(start: BBox, end: BBox) -> MicroTube {
        MicroTube::new(0, 1, start, end).unwrap()
    }

    /// Test-side exhaustive argmax, independent of best_anchor_pair.
    fn oracle_best_cell(b: &BBox, anchors: &AnchorSet, level: usize) -> (u32, f64) {
        let lvl = anchors.level(level).unwrap();
        let mut best = (0u32, f64::NEG_INFINITY);
        for cell in 0..lvl.cells() {
            for shape in 0..lvl.shapes {
                let v = iou(b, lvl.anchor(cell, shape));
                if v > best.1 {
                    best = (cell as u32, v);
                }
            }
        }
        best
    }

    #[test]
    fn identity_anchor_pair() {
        let anchors = build_pyramid(&PyramidConfig::default()).unwrap();
        let a = *anchors.level(4).unwrap().anchor(4, 0);
        let (i, j, score) = best_anchor_pair(&mt(a, a), &anchors, 4).unwrap();
        assert_eq!((i, j), (4, 4));
        assert_abs_diff_eq!(score, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn one_cell_shift_matches_oracle() {
        let anchors = single_level_3x3();
        let start = *anchors.level(0).unwrap().anchor(4, 0);
        let end = start.translate(1.0 / 3.0, 0.0);
        let g = mt(start, end);
        let (i, j, score) = best_anchor_pair(&g, &anchors, 0).unwrap();
        assert_eq!((i, j), (4, 5));
        let (oi, os) = oracle_best_cell(&g.box_start, &anchors, 0);
        let (oj, oe) = oracle_best_cell(&g.box_end, &anchors, 0);
        assert_eq!((i, j), (oi, oj));
        assert_abs_diff_eq!(score, (os + oe) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn reflected_input_gives_reflected_pair() {
        let anchors = single_level_3x3();
        let start = *anchors.level(0).unwrap().anchor(4, 0);
        let end = start.translate(1.0 / 3.0, 0.0);
        let (i, j, _) = best_anchor_pair(&mt(start, end), &anchors, 0).unwrap();
        assert_eq!((i, j), (4, 5));

        let reflect = |b: &BBox| BBox::new(1.0 - b.x_max, b.y_min, 1.0 - b.x_min, b.y_max).unwrap();
        let (ri, rj, _) =
            best_anchor_pair(&mt(reflect(&start), reflect(&end)), &anchors, 0).unwrap();
        assert_eq!((ri, rj), (4, 3));
    }

    #[test]
    fn estimate_single_static_tube() {
        let anchors = build_pyramid(&PyramidConfig::default()).unwrap();
        let a = *anchors.level(4).unwrap().anchor(4, 0);
        let counts = estimate(&[mt(a, a)], &anchors).unwrap();
        assert_eq!(counts.total(), 1);
        for (p, lvl) in counts.levels().iter().enumerate() {
            if p == 4 {
                assert_eq!(lvl.entries.get(&(4, 4)), Some(&1));
                assert_eq!(lvl.entries.len(), 1);
            } else {
                assert!(lvl.entries.is_empty());
            }
        }
    }

    #[test]
    fn estimate_is_additive_under_duplication() {
        let anchors = single_level_3x3();
        let a = *anchors.level(0).unwrap().anchor(1, 0);
        let b = *anchors.level(0).unwrap().anchor(7, 0);
        let gts = vec![mt(a, a), mt(a, b)];
        let once = estimate(&gts, &anchors).unwrap();
        let thrice: Vec<MicroTube> = gts.iter().cycle().take(6).copied().collect();
        let tripled = estimate(&thrice, &anchors).unwrap();
        for (l1, l3) in once.levels().iter().zip(tripled.levels()) {
            for (k, v) in &l1.entries {
                assert_eq!(l3.entries[k], v * 3);
            }
            assert_eq!(l1.entries.len(), l3.entries.len());
        }
    }

    #[test]
    fn estimate_rejects_empty_input() {
        let anchors = single_level_3x3();
        assert!(matches!(
            estimate(&[], &anchors),
            Err(Error::EmptyGroundTruth)
        ));
    }

    #[test]
    fn estimate_is_permutation_invariant_and_mergeable() {
        let anchors = single_level_3x3();
        let lvl = anchors.level(0).unwrap();
        let gts: Vec<MicroTube> = (0..9)
            .map(|c| {
                let a = *lvl.anchor(c, 0);
                let b = *lvl.anchor((c + 1) % 9, 0);
                mt(a, b)
            })
            .collect();
        let forward = estimate(&gts, &anchors).unwrap();
        // one increment per micro-tube, across all levels combined
        assert_eq!(forward.total(), gts.len() as u64);
        let mut reversed = gts.clone();
        reversed.reverse();
        assert_eq!(forward, estimate(&reversed, &anchors).unwrap());

        let mut sharded = estimate(&gts[..4], &anchors).unwrap();
        sharded
            .merge(&estimate(&gts[4..], &anchors).unwrap())
            .unwrap();
        assert_eq!(forward, sharded);
    }

    #[test]
    fn normalize_rows() {
        let anchors = single_level_3x3();
        let mut counts = TransitionCounts::new_empty(&anchors);
        counts.increment(0, 0, 0);
        counts.increment(0, 0, 0);
        counts.increment(0, 0, 1);
        counts.increment(0, 0, 2);
        counts.increment(0, 5, 7);
        let m = normalize(&counts);
        let lvl = &m.levels()[0];
        assert_abs_diff_eq!(lvl.entries[&(0, 0)], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(lvl.entries[&(0, 1)], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(lvl.entries[&(0, 2)], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(lvl.entries[&(5, 7)], 1.0, epsilon = 1e-12);
        // all-zero rows stay absent
        assert!(!lvl.entries.keys().any(|&(i, _)| i == 3));
        for (_, sum) in m.row_sums() {
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn threshold_examples() {
        let anchors = single_level_3x3();
        let mut counts = TransitionCounts::new_empty(&anchors);
        // row 0 probabilities 0.7, 0.2, 0.1
        for _ in 0..7 {
            counts.increment(0, 0, 0);
        }
        for _ in 0..2 {
            counts.increment(0, 0, 1);
        }
        counts.increment(0, 0, 2);
        let m = normalize(&counts);
        let b = threshold(&m, 0.10).unwrap();
        assert_eq!(b.levels()[0].pairs.len(), 3);

        // tau = 1.0 keeps nothing from a 0.5/0.5 row
        let mut counts = TransitionCounts::new_empty(&anchors);
        counts.increment(0, 1, 0);
        counts.increment(0, 1, 2);
        let b = threshold(&normalize(&counts), 1.0).unwrap();
        assert!(b.levels()[0].pairs.is_empty());

        assert!(threshold(&m, 0.0).is_err());
        assert!(threshold(&m, 1.5).is_err());
    }

    #[test]
    fn tau_above_largest_off_diagonal_leaves_diagonal_support() {
        let anchors = single_level_3x3();
        let lvl = anchors.level(0).unwrap();
        // drifting data: each cell mostly stays put, sometimes hops right
        let mut gts = Vec::new();
        for c in 0..9usize {
            let here = *lvl.anchor(c, 0);
            for _ in 0..3 {
                gts.push(mt(here, here));
            }
            if c % 3 < 2 {
                gts.push(mt(here, *lvl.anchor(c + 1, 0)));
            }
        }
        let matrix = normalize(&estimate(&gts, &anchors).unwrap());
        let max_off_diag = matrix.levels()[0]
            .entries
            .iter()
            .filter(|(&(i, j), _)| i != j)
            .map(|(_, &v)| v)
            .fold(0.0f64, f64::max);
        assert!(max_off_diag > 0.0);
        let binary = threshold(&matrix, max_off_diag + 1e-9).unwrap();
        assert!(binary.is_diagonal_only());
        assert!(binary.cardinality().1 > 0);
    }

    #[test]
    fn threshold_support_subset_of_matrix() {
        let anchors = single_level_3x3();
        let lvl = anchors.level(0).unwrap();
        let gts: Vec<MicroTube> = (0..9)
            .map(|c| mt(*lvl.anchor(c, 0), *lvl.anchor((c * 2 + 1) % 9, 0)))
            .collect();
        let m = normalize(&estimate(&gts, &anchors).unwrap());
        let b = threshold(&m, 0.1).unwrap();
        for (ml, bl) in m.levels().iter().zip(b.levels()) {
            for pair in &bl.pairs {
                assert!(ml.entries.contains_key(pair));
            }
        }
    }

    #[test]
    fn augment_diagonal_examples() {
        let anchors = single_level_3x3();
        let mut b = BinaryTransitions::new_empty(&anchors, 0.1);
        b.levels[0].pairs.insert((0, 1));
        let d = augment_diagonal(&b);
        assert_eq!(d.cardinality().1, 10);
        assert_eq!(augment_diagonal(&d), d);
        let from_empty = augment_diagonal(&BinaryTransitions::new_empty(&anchors, 0.1));
        assert_eq!(from_empty.cardinality().1, 9);
    }

    #[test]
    fn augment_neighbors_examples() {
        let anchors = single_level_3x3();
        let empty = BinaryTransitions::new_empty(&anchors, 0.1);
        let n = augment_neighbors(&empty);
        // 4 corners x 3 + 4 edges x 5 + 1 center x 8
        assert_eq!(n.cardinality().1, 40);
        assert_eq!(augment_neighbors(&n), n);

        let one_by_one = build_pyramid(&PyramidConfig {
            grid_sizes: vec![1],
            shapes_per_cell: vec![1],
            scales: vec![0.5],
            aspect_ratios: vec![vec![1.0]],
            extra_square: false,
            extra_scale: 1.0,
        })
        .unwrap();
        let n1 = augment_neighbors(&BinaryTransitions::new_empty(&one_by_one, 0.1));
        assert_eq!(n1.cardinality().1, 0);

        let mut with_diag = BinaryTransitions::new_empty(&anchors, 0.1);
        with_diag.levels[0].pairs.insert((4, 4));
        assert_eq!(augment_neighbors(&with_diag).cardinality().1, 41);
    }

    #[test]
    fn augment_relative_offsets_examples() {
        let anchors = single_level_3x3();
        let mut b = BinaryTransitions::new_empty(&anchors, 0.1);
        b.levels[0].pairs.insert((4, 4));
        b.levels[0].pairs.insert((4, 5));
        let out = augment_relative_offsets(&b);
        // offsets {0, +1 col}: 9 diagonal placements + 6 right shifts
        assert_eq!(out.cardinality().1, 15);

        let diag = augment_diagonal(&BinaryTransitions::new_empty(&anchors, 0.1));
        assert_eq!(augment_relative_offsets(&diag), diag);

        let mut corner = BinaryTransitions::new_empty(&anchors, 0.1);
        corner.levels[0].pairs.insert((0, 8));
        let out = augment_relative_offsets(&corner);
        assert_eq!(out.levels()[0].pairs, [(0, 8)].into_iter().collect());
    }

    #[test]
    fn offsets_output_closed_under_translation() {
        let anchors = single_level_3x3();
        let mut b = BinaryTransitions::new_empty(&anchors, 0.1);
        b.levels[0].pairs.insert((0, 1));
        b.levels[0].pairs.insert((3, 7));
        let out = augment_relative_offsets(&b);
        let lvl = &out.levels()[0];
        let grid = lvl.grid as isize;
        for &(i, j) in &lvl.pairs {
            let (ri, ci) = cell_row_col(lvl.grid, i as usize);
            let (rj, cj) = cell_row_col(lvl.grid, j as usize);
            let (dr, dc) = (rj as isize - ri as isize, cj as isize - ci as isize);
            for k in 0..lvl.cells() {
                let (r, c) = cell_row_col(lvl.grid, k);
                let (tr, tc) = (r as isize + dr, c as isize + dc);
                if (0..grid).contains(&tr) && (0..grid).contains(&tc) {
                    let target = row_col_cell(lvl.grid, tr as usize, tc as usize) as u32;
                    assert!(
                        lvl.pairs.contains(&(k as u32, target)),
                        "missing translated pair ({k}, {target})"
                    );
                }
            }
        }
    }

    #[test]
    fn augmentations_are_supersets() {
        let anchors = single_level_3x3();
        let mut b = BinaryTransitions::new_empty(&anchors, 0.1);
        b.levels[0].pairs.insert((2, 6));
        for aug in [
            augment_diagonal,
            augment_neighbors,
            augment_relative_offsets,
        ] {
            let out = aug(&b);
            assert!(b.levels()[0].pairs.is_subset(&out.levels()[0].pairs));
            assert_eq!(aug(&out), out, "augmentation must be idempotent");
        }
    }

    #[test]
    fn cardinality_of_default_diagonal() {
        let anchors = build_pyramid(&PyramidConfig::default()).unwrap();
        let diag = BinaryTransitions::diagonal(&anchors);
        let (per, total) = diag.cardinality();
        assert_eq!(per, vec![1444, 361, 100, 25, 9, 1]);
        assert_eq!(total, 1940);
        let (_, empty_total) = BinaryTransitions::new_empty(&anchors, 0.1).cardinality();
        assert_eq!(empty_total, 0);
    }
}
