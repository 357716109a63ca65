//! File formats shared by the CLI stages and external producers:
//! annotation JSON, versioned transition-matrix JSON, proposal / detection /
//! path JSON-lines, and the metrics report. Writers are byte-deterministic
//! for fixed inputs, and every derived artifact carries the pyramid config
//! hash so geometries cannot be mixed.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, MicroTube};
use crate::linking::{ActionPath, ScoredMicroTube};
use crate::synth::VideoAnnotation;
use crate::transition::{
    BinaryTransitions, LevelSupport, SparseLevel, TransitionCounts, TransitionMatrix,
};

pub const FORMAT_VERSION: u32 = 1;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn schema_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Schema {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| schema_err(path, e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| schema_err(path, format!("line {}: {e}", lineno + 1)))?;
        out.push(item);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = std::io::BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item)?;
        writeln!(writer, "{line}").map_err(|e| io_err(path, e))?;
    }
    writer.flush().map_err(|e| io_err(path, e))
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    toml::from_str(&text).map_err(|e| schema_err(path, e.to_string()))
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string_pretty(value)?;
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Dataset annotation document: the ingestion boundary for real datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationFile {
    pub dataset: String,
    /// Pixel canvas, absent for unit-square synthetic data.
    pub image_size: Option<[u32; 2]>,
    pub videos: Vec<VideoAnnotation>,
}

impl AnnotationFile {
    pub fn validate(&self) -> Result<()> {
        for v in &self.videos {
            v.validate()?;
        }
        Ok(())
    }

    /// Densified ground-truth tubes, one (video id, tube) pair each.
    pub fn gt_paths(&self) -> Vec<(String, ActionPath)> {
        self.videos
            .iter()
            .flat_map(|v| v.dense_paths().into_iter().map(move |p| (v.id.clone(), p)))
            .collect()
    }
}

fn isqrt_exact(path: &Path, rows: usize, cols: usize) -> Result<usize> {
    if rows != cols {
        return Err(schema_err(path, format!("level not square: {rows}x{cols}")));
    }
    let grid = (rows as f64).sqrt().round() as usize;
    if grid * grid != rows {
        return Err(schema_err(
            path,
            format!("level size {rows} is not a perfect square"),
        ));
    }
    Ok(grid)
}

/// One level of a transition document; `p` is the 0-based level index and
/// rows = cols = grid^2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionLevelRecord {
    pub p: usize,
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(u32, u32, f64)>,
}

/// Versioned transition-matrix document holding either raw counts
/// (`normalized: false`) or row-stochastic probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrixFile {
    pub format_version: u32,
    pub pyramid_config_hash: String,
    pub delta: u32,
    pub normalized: bool,
    pub levels: Vec<TransitionLevelRecord>,
}

impl TransitionMatrixFile {
    pub fn from_counts(counts: &TransitionCounts, delta: u32) -> Self {
        TransitionMatrixFile {
            format_version: FORMAT_VERSION,
            pyramid_config_hash: counts.pyramid_hash().to_string(),
            delta,
            normalized: false,
            levels: counts
                .levels()
                .iter()
                .enumerate()
                .map(|(p, lvl)| TransitionLevelRecord {
                    p,
                    rows: lvl.cells(),
                    cols: lvl.cells(),
                    entries: lvl
                        .entries
                        .iter()
                        .map(|(&(i, j), &v)| (i, j, v as f64))
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn from_matrix(matrix: &TransitionMatrix, delta: u32) -> Self {
        TransitionMatrixFile {
            format_version: FORMAT_VERSION,
            pyramid_config_hash: matrix.pyramid_hash().to_string(),
            delta,
            normalized: true,
            levels: matrix
                .levels()
                .iter()
                .enumerate()
                .map(|(p, lvl)| TransitionLevelRecord {
                    p,
                    rows: lvl.cells(),
                    cols: lvl.cells(),
                    entries: lvl.entries.iter().map(|(&(i, j), &v)| (i, j, v)).collect(),
                })
                .collect(),
        }
    }

    fn validate_levels(&self, path: &Path) -> Result<Vec<usize>> {
        if self.format_version != FORMAT_VERSION {
            return Err(schema_err(
                path,
                format!("unsupported format_version {}", self.format_version),
            ));
        }
        let mut grids = Vec::with_capacity(self.levels.len());
        for (idx, lvl) in self.levels.iter().enumerate() {
            if lvl.p != idx {
                return Err(schema_err(
                    path,
                    format!("level index {} out of order (expected {idx})", lvl.p),
                ));
            }
            let grid = isqrt_exact(path, lvl.rows, lvl.cols)?;
            for &(i, j, v) in &lvl.entries {
                if i as usize >= lvl.rows || j as usize >= lvl.cols {
                    return Err(schema_err(path, format!("entry ({i}, {j}) out of bounds")));
                }
                if !v.is_finite() || v < 0.0 {
                    return Err(schema_err(path, format!("entry ({i}, {j}) has value {v}")));
                }
            }
            grids.push(grid);
        }
        Ok(grids)
    }

    /// Raw counts; requires `normalized: false` and integral values.
    pub fn to_counts(&self, path: &Path) -> Result<TransitionCounts> {
        let grids = self.validate_levels(path)?;
        if self.normalized {
            return Err(schema_err(path, "expected counts, found normalized matrix"));
        }
        let levels = self
            .levels
            .iter()
            .zip(grids)
            .map(|(lvl, grid)| {
                let mut entries = BTreeMap::new();
                for &(i, j, v) in &lvl.entries {
                    if v.fract() != 0.0 {
                        return Err(schema_err(
                            path,
                            format!("count entry ({i}, {j}) = {v} is not an integer"),
                        ));
                    }
                    entries.insert((i, j), v as u64);
                }
                Ok(SparseLevel { grid, entries })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TransitionCounts::from_levels(
            self.pyramid_config_hash.clone(),
            levels,
        ))
    }

    /// Row-stochastic matrix; counts documents are normalized on the fly.
    pub fn to_matrix(&self, path: &Path) -> Result<TransitionMatrix> {
        if !self.normalized {
            return Ok(crate::transition::normalize(&self.to_counts(path)?));
        }
        let grids = self.validate_levels(path)?;
        let levels = self
            .levels
            .iter()
            .zip(grids)
            .map(|(lvl, grid)| SparseLevel {
                grid,
                entries: lvl.entries.iter().map(|&(i, j, v)| ((i, j), v)).collect(),
            })
            .collect();
        Ok(TransitionMatrix::from_levels(
            self.pyramid_config_hash.clone(),
            levels,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryLevelRecord {
    pub p: usize,
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(u32, u32)>,
}

/// Thresholded transitions document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryTransitionsFile {
    pub format_version: u32,
    pub pyramid_config_hash: String,
    pub delta: u32,
    pub tau: f64,
    pub levels: Vec<BinaryLevelRecord>,
}

impl BinaryTransitionsFile {
    pub fn from_binary(binary: &BinaryTransitions, delta: u32) -> Self {
        BinaryTransitionsFile {
            format_version: FORMAT_VERSION,
            pyramid_config_hash: binary.pyramid_hash().to_string(),
            delta,
            tau: binary.tau(),
            levels: binary
                .levels()
                .iter()
                .enumerate()
                .map(|(p, lvl)| BinaryLevelRecord {
                    p,
                    rows: lvl.cells(),
                    cols: lvl.cells(),
                    entries: lvl.pairs.iter().copied().collect(),
                })
                .collect(),
        }
    }

    pub fn to_binary(&self, path: &Path) -> Result<BinaryTransitions> {
        if self.format_version != FORMAT_VERSION {
            return Err(schema_err(
                path,
                format!("unsupported format_version {}", self.format_version),
            ));
        }
        let mut levels = Vec::with_capacity(self.levels.len());
        for (idx, lvl) in self.levels.iter().enumerate() {
            if lvl.p != idx {
                return Err(schema_err(
                    path,
                    format!("level index {} out of order (expected {idx})", lvl.p),
                ));
            }
            let grid = isqrt_exact(path, lvl.rows, lvl.cols)?;
            for &(i, j) in &lvl.entries {
                if i as usize >= lvl.rows || j as usize >= lvl.cols {
                    return Err(schema_err(path, format!("entry ({i}, {j}) out of bounds")));
                }
            }
            levels.push(LevelSupport {
                grid,
                pairs: lvl.entries.iter().copied().collect(),
            });
        }
        Ok(BinaryTransitions::from_levels(
            self.pyramid_config_hash.clone(),
            self.tau,
            levels,
        ))
    }
}

/// One detection micro-tube line in a detections JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub video_id: String,
    pub frame_start: u32,
    pub delta: u32,
    pub boxes: [BBox; 2],
    pub scores: Vec<f64>,
}

impl DetectionRecord {
    pub fn from_scored(video_id: &str, det: &ScoredMicroTube) -> Self {
        DetectionRecord {
            video_id: video_id.to_string(),
            frame_start: det.tube.frame_start,
            delta: det.tube.delta,
            boxes: [det.tube.box_start, det.tube.box_end],
            scores: det.scores.clone(),
        }
    }

    pub fn into_scored(self) -> Result<(String, ScoredMicroTube)> {
        let tube = MicroTube::new(self.frame_start, self.delta, self.boxes[0], self.boxes[1])?;
        if self.scores.len() < 2 {
            return Err(Error::InvalidParameter {
                reason: format!(
                    "detection in {} needs background plus at least one class score",
                    self.video_id
                ),
            });
        }
        if self.scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::InvalidParameter {
                reason: format!("detection in {} has scores outside [0, 1]", self.video_id),
            });
        }
        Ok((
            self.video_id,
            ScoredMicroTube {
                tube,
                scores: self.scores,
                stream: None,
            },
        ))
    }
}

/// One action path line in a paths JSONL file. `frame_scores` carries the
/// per-frame class scores the trim stage consumes; `t_end` is inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub video_id: String,
    pub class: usize,
    pub t_start: u32,
    pub t_end: u32,
    pub boxes: Vec<BBox>,
    pub frame_scores: Vec<f64>,
    #[serde(default)]
    pub step_scores: Vec<f64>,
    pub score: f64,
}

impl PathRecord {
    pub fn from_path(video_id: &str, path: &ActionPath) -> Self {
        PathRecord {
            video_id: video_id.to_string(),
            class: path.class,
            t_start: path.frame_start,
            t_end: path.frame_end(),
            boxes: path.boxes.clone(),
            frame_scores: path.frame_scores.clone(),
            step_scores: path.step_scores.clone(),
            score: path.score,
        }
    }

    pub fn into_path(self, path: &Path) -> Result<(String, ActionPath)> {
        let expected = (self.t_end as i64 - self.t_start as i64 + 1).max(0) as usize;
        if self.boxes.is_empty() || self.boxes.len() != expected {
            return Err(schema_err(
                path,
                format!(
                    "path in {}: {} boxes for frames [{}, {}]",
                    self.video_id,
                    self.boxes.len(),
                    self.t_start,
                    self.t_end
                ),
            ));
        }
        if self.frame_scores.len() != self.boxes.len() {
            return Err(schema_err(
                path,
                format!(
                    "path in {}: {} frame scores for {} frames",
                    self.video_id,
                    self.frame_scores.len(),
                    self.boxes.len()
                ),
            ));
        }
        if self.frame_scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(schema_err(
                path,
                format!("path in {}: frame scores outside [0, 1]", self.video_id),
            ));
        }
        Ok((
            self.video_id,
            ActionPath {
                class: self.class,
                frame_start: self.t_start,
                boxes: self.boxes,
                frame_scores: self.frame_scores,
                step_scores: self.step_scores,
                score: self.score,
            },
        ))
    }
}

/// Metrics report: per-class APs at the first requested threshold, mAP per
/// threshold, optional avg-mAP, and tube classification accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub per_class_ap: BTreeMap<String, f64>,
    pub map_by_delta: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub avg_map: Option<f64>,
    pub accuracy: f64,
}

impl ReportFile {
    /// Human-readable companion to the JSON document.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str("class    AP\n");
        for (class, ap) in &self.per_class_ap {
            out.push_str(&format!("{class:<8} {ap:.4}\n"));
        }
        out.push_str("\ndelta    mAP\n");
        for (delta, map) in &self.map_by_delta {
            out.push_str(&format!("{delta:<8} {map:.4}\n"));
        }
        if let Some(avg) = self.avg_map {
            out.push_str(&format!("\navg-mAP  {avg:.4}\n"));
        }
        out.push_str(&format!("accuracy {:.4}\n", self.accuracy));
        out
    }
}

/// Canonical string key for a threshold ("0.50", "0.55", ...).
pub fn delta_key(delta: f64) -> String {
    format!("{delta:.2}")
}
