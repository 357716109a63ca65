//! Composing scored detection micro-tubes into per-class action paths:
//! pre-linking NMS, greedy online association across boundary frames,
//! per-frame interpolation, dynamic-programming temporal trimming, and
//! mean fusion of two detection streams.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, microtube_overlap, BBox, MicroTube};

/// A detected micro-tube with a (C+1)-score vector; index 0 is background.
/// Scores are assumed softmax-normalized by the producer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredMicroTube {
    pub tube: MicroTube,
    pub scores: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream: Option<String>,
}

impl ScoredMicroTube {
    pub fn num_classes(&self) -> usize {
        self.scores.len().saturating_sub(1)
    }

    /// Confidence for action class `class` (0-based, excluding background).
    pub fn class_score(&self, class: usize) -> f64 {
        self.scores[class + 1]
    }
}

/// A linked action tube: contiguous per-frame boxes with one class and an
/// aggregate score (mean of the micro-tube step scores).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionPath {
    pub class: usize,
    pub frame_start: u32,
    pub boxes: Vec<BBox>,
    /// Per-frame class scores, broadcast from the step scores.
    pub frame_scores: Vec<f64>,
    /// One score per linked micro-tube step.
    #[serde(default)]
    pub step_scores: Vec<f64>,
    pub score: f64,
}

impl ActionPath {
    pub fn frame_end(&self) -> u32 {
        self.frame_start + self.boxes.len() as u32 - 1
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Box at an absolute frame index, when covered.
    pub fn box_at(&self, frame: u32) -> Option<&BBox> {
        if frame < self.frame_start {
            return None;
        }
        self.boxes.get((frame - self.frame_start) as usize)
    }
}

/// Linker constants. The association objective is
/// `class_score + iou_weight * iou(last box, candidate first box)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub iou_weight: f64,
    pub score_floor: f64,
    pub max_misses: usize,
    pub nms_threshold: f64,
    pub top_n: usize,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams {
            iou_weight: 1.0,
            score_floor: 0.0,
            max_misses: 3,
            nms_threshold: 0.45,
            top_n: 10,
        }
    }
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_weight >= 0.0 && self.iou_weight.is_finite()) {
            return Err(Error::InvalidParameter {
                reason: "iou_weight must be >= 0".into(),
            });
        }
        if self.max_misses < 1 {
            return Err(Error::InvalidParameter {
                reason: "max_misses must be >= 1".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.nms_threshold) {
            return Err(Error::InvalidParameter {
                reason: "nms_threshold must be in [0, 1]".into(),
            });
        }
        if self.top_n < 1 {
            return Err(Error::InvalidParameter {
                reason: "top_n must be >= 1".into(),
            });
        }
        Ok(())
    }
}

/// Greedy non-maximum suppression over micro-tubes by descending class
/// score; a candidate is suppressed when its overlap with any survivor
/// exceeds `thresh`. Deterministic: score ties keep input order.
pub fn nms_microtubes(dets: &[ScoredMicroTube], class: usize, thresh: f64) -> Vec<ScoredMicroTube> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .class_score(class)
            .partial_cmp(&dets[a].class_score(class))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut kept: Vec<ScoredMicroTube> = Vec::new();
    for idx in order {
        let cand = &dets[idx];
        if kept
            .iter()
            .all(|k| microtube_overlap(&k.tube, &cand.tube) <= thresh)
        {
            kept.push(cand.clone());
        }
    }
    kept
}

/// Per-frame boxes of a micro-tube: coordinate-wise linear interpolation
/// over frames `t .. t+delta` inclusive.
pub fn interpolate(mt: &MicroTube) -> Vec<BBox> {
    let delta = mt.delta as usize;
    (0..=delta)
        .map(|k| lerp_box(&mt.box_start, &mt.box_end, k as f64 / delta as f64))
        .collect()
}

fn lerp_box(a: &BBox, b: &BBox, t: f64) -> BBox {
    BBox {
        x_min: a.x_min + (b.x_min - a.x_min) * t,
        y_min: a.y_min + (b.y_min - a.y_min) * t,
        x_max: a.x_max + (b.x_max - a.x_max) * t,
        y_max: a.y_max + (b.y_max - a.y_max) * t,
    }
}

fn mean_box(a: &BBox, b: &BBox) -> BBox {
    lerp_box(a, b, 0.5)
}

struct PathBuilder {
    created: usize,
    boxes: Vec<BBox>,
    frame_scores: Vec<f64>,
    step_scores: Vec<f64>,
    frame_start: u32,
    misses: usize,
    closed: bool,
}

impl PathBuilder {
    fn seed(created: usize, det: &ScoredMicroTube, score: f64) -> Self {
        let boxes = interpolate(&det.tube);
        let frame_scores = vec![score; boxes.len()];
        PathBuilder {
            created,
            boxes,
            frame_scores,
            step_scores: vec![score],
            frame_start: det.tube.frame_start,
            misses: 0,
            closed: false,
        }
    }

    fn frame_end(&self) -> u32 {
        self.frame_start + self.boxes.len() as u32 - 1
    }

    fn last_box(&self) -> &BBox {
        self.boxes.last().expect("paths are never empty")
    }

    fn aggregate(&self) -> f64 {
        self.step_scores.iter().sum::<f64>() / self.step_scores.len() as f64
    }

    /// Appends a matched micro-tube. A candidate starting exactly at the
    /// path's last frame shares that boundary frame (box and score
    /// averaged); a later start bridges the gap by linear interpolation.
    fn extend(&mut self, det: &ScoredMicroTube, score: f64) {
        let end = self.frame_end();
        let start = det.tube.frame_start;
        let interp = interpolate(&det.tube);
        if start == end {
            let merged = mean_box(self.last_box(), &det.tube.box_start);
            *self.boxes.last_mut().unwrap() = merged;
            let last_score = self.frame_scores.last_mut().unwrap();
            *last_score = (*last_score + score) / 2.0;
            self.boxes.extend_from_slice(&interp[1..]);
            self.frame_scores
                .extend(std::iter::repeat_n(score, interp.len() - 1));
        } else {
            debug_assert!(start > end);
            let gap = (start - end) as usize;
            let from = *self.last_box();
            let from_score = *self.frame_scores.last().unwrap();
            for k in 1..gap {
                let t = k as f64 / gap as f64;
                self.boxes.push(lerp_box(&from, &det.tube.box_start, t));
                self.frame_scores
                    .push(from_score + (score - from_score) * t);
            }
            self.boxes.extend_from_slice(&interp);
            self.frame_scores
                .extend(std::iter::repeat_n(score, interp.len()));
        }
        self.step_scores.push(score);
        self.misses = 0;
    }

    fn finish(self, class: usize) -> ActionPath {
        let score = self.aggregate();
        ActionPath {
            class,
            frame_start: self.frame_start,
            boxes: self.boxes,
            frame_scores: self.frame_scores,
            step_scores: self.step_scores,
            score,
        }
    }
}

/// Groups detections by start frame (ascending), preserving input order
/// within each group.
pub fn group_by_start(dets: &[ScoredMicroTube]) -> Vec<(u32, Vec<ScoredMicroTube>)> {
    let mut groups: std::collections::BTreeMap<u32, Vec<ScoredMicroTube>> =
        std::collections::BTreeMap::new();
    for d in dets {
        groups
            .entry(d.tube.frame_start)
            .or_default()
            .push(d.clone());
    }
    groups.into_iter().collect()
}

/// Splits start-frame groups into maximal chains in which every micro-tube
/// of a group ends exactly where the next group starts, the alignment
/// [`link`] requires. Temporal holes and stride changes open a new chain.
pub fn split_into_chains(
    groups: Vec<(u32, Vec<ScoredMicroTube>)>,
) -> Vec<Vec<(u32, Vec<ScoredMicroTube>)>> {
    let mut chains = Vec::new();
    let mut current: Vec<(u32, Vec<ScoredMicroTube>)> = Vec::new();
    for group in groups {
        if let Some(last) = current.last() {
            let chained =
                !last.1.is_empty() && last.1.iter().all(|d| d.tube.frame_end() == group.0);
            if !chained {
                chains.push(std::mem::take(&mut current));
            }
        }
        current.push(group);
    }
    if !current.is_empty() {
        chains.push(current);
    }
    chains
}

/// Builds action paths for one class out of detection groups sorted by
/// start frame. Greedy association: at each step, active paths in
/// descending aggregate-score order claim the unclaimed candidate
/// maximizing `score + iou_weight * iou(last box, candidate start)` among
/// candidates with positive boundary IoU; leftover candidates seed new
/// paths; a path unmatched for `max_misses` consecutive steps closes.
pub fn link(
    groups: &[(u32, Vec<ScoredMicroTube>)],
    params: &LinkParams,
    class: usize,
) -> Result<Vec<ActionPath>> {
    params.validate()?;
    for w in groups.windows(2) {
        if w[0].0 >= w[1].0 {
            return Err(Error::GroupMisaligned {
                reason: format!("group starts {} and {} not increasing", w[0].0, w[1].0),
            });
        }
        for det in &w[0].1 {
            if det.tube.frame_end() != w[1].0 {
                return Err(Error::GroupMisaligned {
                    reason: format!(
                        "micro-tube over [{}, {}] does not end at next group start {}",
                        det.tube.frame_start,
                        det.tube.frame_end(),
                        w[1].0
                    ),
                });
            }
        }
    }
    for (start, dets) in groups {
        if let Some(d) = dets.iter().find(|d| d.tube.frame_start != *start) {
            return Err(Error::GroupMisaligned {
                reason: format!(
                    "micro-tube starting at {} filed under group {}",
                    d.tube.frame_start, start
                ),
            });
        }
    }

    let mut paths: Vec<PathBuilder> = Vec::new();
    let mut created = 0usize;

    for (_, dets) in groups {
        let mut candidates = nms_microtubes(dets, class, params.nms_threshold);
        candidates.truncate(params.top_n);
        candidates.retain(|c| c.class_score(class) >= params.score_floor);
        let mut claimed = vec![false; candidates.len()];

        let mut order: Vec<usize> = (0..paths.len()).filter(|&i| !paths[i].closed).collect();
        order.sort_by(|&a, &b| {
            paths[b]
                .aggregate()
                .partial_cmp(&paths[a].aggregate())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(paths[a].created.cmp(&paths[b].created))
        });

        for pi in order {
            let mut best: Option<(usize, f64, f64)> = None;
            for (ci, cand) in candidates.iter().enumerate() {
                if claimed[ci] {
                    continue;
                }
                let boundary = iou(paths[pi].last_box(), &cand.tube.box_start);
                if boundary <= 0.0 {
                    continue;
                }
                let value = cand.class_score(class) + params.iou_weight * boundary;
                if best.is_none_or(|(_, b, _)| value > b) {
                    best = Some((ci, value, cand.class_score(class)));
                }
            }
            match best {
                Some((ci, _, score)) => {
                    claimed[ci] = true;
                    let cand = candidates[ci].clone();
                    paths[pi].extend(&cand, score);
                }
                None => {
                    paths[pi].misses += 1;
                    if paths[pi].misses >= params.max_misses {
                        paths[pi].closed = true;
                    }
                }
            }
        }

        for (ci, cand) in candidates.iter().enumerate() {
            if !claimed[ci] {
                paths.push(PathBuilder::seed(created, cand, cand.class_score(class)));
                created += 1;
            }
        }
    }

    let mut out: Vec<ActionPath> = paths.into_iter().map(|p| p.finish(class)).collect();
    out.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.frame_start.cmp(&b.frame_start))
    });
    Ok(out)
}

/// Exact maximizer of `sum_t f(l_t, t) - alpha * switches` over binary
/// label sequences, where `f(action, t) = s(t)` and
/// `f(background, t) = 1 - s(t)`. Returns the maximal action-labeled runs
/// as inclusive index ranges. Among co-optimal labelings the
/// background-first (lexicographically smallest) one is chosen, so ties
/// break toward background.
pub fn trim(scores: &[f64], alpha: f64) -> Result<Vec<(usize, usize)>> {
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter {
            reason: format!("alpha={alpha} must be >= 0"),
        });
    }
    let n = scores.len();
    let f = |label: usize, t: usize| -> f64 {
        if label == 1 {
            scores[t]
        } else {
            1.0 - scores[t]
        }
    };

    // suffix[t][l]: best achievable value over frames t.. with label l at t
    let mut suffix = vec![[0.0f64; 2]; n];
    suffix[n - 1] = [f(0, n - 1), f(1, n - 1)];
    for t in (0..n - 1).rev() {
        for l in 0..2 {
            let keep = suffix[t + 1][l];
            let switch = suffix[t + 1][1 - l] - alpha;
            suffix[t][l] = f(l, t) + keep.max(switch);
        }
    }

    let mut labels = vec![0usize; n];
    labels[0] = if suffix[0][0] >= suffix[0][1] { 0 } else { 1 };
    for t in 1..n {
        let prev = labels[t - 1];
        let value = |l: usize| suffix[t][l] - if l == prev { 0.0 } else { alpha };
        labels[t] = if value(0) >= value(1) { 0 } else { 1 };
    }

    let mut segments = Vec::new();
    let mut run_start: Option<usize> = None;
    for (t, &l) in labels.iter().enumerate() {
        match (l, run_start) {
            (1, None) => run_start = Some(t),
            (0, Some(s)) => {
                segments.push((s, t - 1));
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = run_start {
        segments.push((s, n - 1));
    }
    Ok(segments)
}

/// Applies [`trim`] to a path's per-frame scores and slices it into one
/// path per retained segment; each slice's aggregate becomes the mean of
/// its frame scores.
pub fn trim_path(path: &ActionPath, alpha: f64) -> Result<Vec<ActionPath>> {
    let segments = trim(&path.frame_scores, alpha)?;
    Ok(segments
        .into_iter()
        .map(|(s, e)| {
            let boxes = path.boxes[s..=e].to_vec();
            let frame_scores = path.frame_scores[s..=e].to_vec();
            let score = frame_scores.iter().sum::<f64>() / frame_scores.len() as f64;
            ActionPath {
                class: path.class,
                frame_start: path.frame_start + s as u32,
                boxes,
                frame_scores,
                step_scores: Vec::new(),
                score,
            }
        })
        .collect())
}

/// Mean fusion of two detection streams that enumerate the same proposal
/// set in the same order: scores and regressed coordinates are averaged
/// per index.
pub fn fuse_streams(a: &[ScoredMicroTube], b: &[ScoredMicroTube]) -> Result<Vec<ScoredMicroTube>> {
    if a.len() != b.len() {
        return Err(Error::FusionMismatch {
            reason: format!("{} vs {} detections", a.len(), b.len()),
        });
    }
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(idx, (x, y))| {
            if x.tube.frame_start != y.tube.frame_start || x.tube.delta != y.tube.delta {
                return Err(Error::FusionMismatch {
                    reason: format!("index {idx}: frame placement differs"),
                });
            }
            if x.scores.len() != y.scores.len() {
                return Err(Error::FusionMismatch {
                    reason: format!("index {idx}: score lengths differ"),
                });
            }
            Ok(ScoredMicroTube {
                tube: MicroTube {
                    frame_start: x.tube.frame_start,
                    delta: x.tube.delta,
                    box_start: mean_box(&x.tube.box_start, &y.tube.box_start),
                    box_end: mean_box(&x.tube.box_end, &y.tube.box_end),
                },
                scores: x
                    .scores
                    .iter()
                    .zip(&y.scores)
                    .map(|(p, q)| (p + q) / 2.0)
                    .collect(),
                stream: None,
            })
        })
        .collect()
}
