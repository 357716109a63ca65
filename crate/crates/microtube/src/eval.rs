//! Tube-level evaluation: spatiotemporal IoU, per-class video AP/mAP,
//! averaged mAP over the 0.50..0.95 threshold ladder, and tube-based video
//! classification accuracy.

use std::collections::{BTreeMap, BTreeSet};

use crate::linking::ActionPath;

/// The ten thresholds behind avg-mAP: 0.50, 0.55, ..., 0.95.
pub fn avg_map_deltas() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

/// Spatiotemporal IoU of two per-frame tubes: temporal IoU of the frame
/// ranges times the mean per-frame spatial IoU over the shared frames;
/// zero when the ranges do not intersect.
pub fn tube_st_iou(a: &ActionPath, b: &ActionPath) -> f64 {
    let start = a.frame_start.max(b.frame_start);
    let end = a.frame_end().min(b.frame_end());
    if start > end {
        return 0.0;
    }
    let inter = (end - start + 1) as f64;
    let union = (a.len() + b.len()) as f64 - inter;
    let mut spatial = 0.0;
    for f in start..=end {
        spatial += crate::geometry::iou(a.box_at(f).unwrap(), b.box_at(f).unwrap());
    }
    (inter / union) * (spatial / inter)
}

/// Per-class AP and their mean at one spatiotemporal IoU threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct MapReport {
    pub per_class_ap: BTreeMap<usize, f64>,
    pub map: f64,
}

/// Detections are (video id, tube) pairs ranked by aggregate score
/// (ties: lower video id, then input order) and greedily matched to
/// unmatched ground-truth tubes of the same class in the same video at
/// `delta`. AP uses all-point precision-recall interpolation; the mean
/// runs over classes with at least one ground-truth instance.
pub fn video_map(
    dets: &[(String, ActionPath)],
    gts: &[(String, ActionPath)],
    delta: f64,
) -> MapReport {
    let classes: BTreeSet<usize> = gts.iter().map(|(_, t)| t.class).collect();
    let mut per_class_ap = BTreeMap::new();

    for &class in &classes {
        let gt_idx: Vec<usize> = (0..gts.len())
            .filter(|&i| gts[i].1.class == class)
            .collect();
        let mut order: Vec<usize> = (0..dets.len())
            .filter(|&i| dets[i].1.class == class)
            .collect();
        order.sort_by(|&a, &b| {
            dets[b]
                .1
                .score
                .partial_cmp(&dets[a].1.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| dets[a].0.cmp(&dets[b].0))
                .then(a.cmp(&b))
        });

        let mut matched = vec![false; gt_idx.len()];
        let mut hits: Vec<bool> = Vec::with_capacity(order.len());
        for &di in &order {
            let (video, det) = &dets[di];
            let mut best: Option<(usize, f64)> = None;
            for (slot, &gi) in gt_idx.iter().enumerate() {
                if matched[slot] || &gts[gi].0 != video {
                    continue;
                }
                let ov = tube_st_iou(det, &gts[gi].1);
                if best.is_none_or(|(_, b)| ov > b) {
                    best = Some((slot, ov));
                }
            }
            match best {
                Some((slot, ov)) if ov >= delta => {
                    matched[slot] = true;
                    hits.push(true);
                }
                _ => hits.push(false),
            }
        }
        per_class_ap.insert(class, average_precision(&hits, gt_idx.len()));
    }

    let map = if per_class_ap.is_empty() {
        0.0
    } else {
        per_class_ap.values().sum::<f64>() / per_class_ap.len() as f64
    };
    MapReport { per_class_ap, map }
}

/// All-point interpolated AP from a ranked hit sequence.
fn average_precision(hits: &[bool], num_gt: usize) -> f64 {
    if num_gt == 0 {
        return 0.0;
    }
    let mut tp = 0usize;
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(hits.len());
    for (rank, &hit) in hits.iter().enumerate() {
        if hit {
            tp += 1;
        }
        let precision = tp as f64 / (rank + 1) as f64;
        let recall = tp as f64 / num_gt as f64;
        points.push((recall, precision));
    }
    // precision envelope from the right, integrated over recall steps
    let mut envelope = vec![0.0f64; points.len()];
    let mut running = 0.0f64;
    for (slot, &(_, precision)) in points.iter().enumerate().rev() {
        running = running.max(precision);
        envelope[slot] = running;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (slot, &(recall, _)) in points.iter().enumerate() {
        if recall > prev_recall {
            ap += (recall - prev_recall) * envelope[slot];
            prev_recall = recall;
        }
    }
    ap
}

/// Mean of [`video_map`] over the ten avg-mAP thresholds.
pub fn avg_map(dets: &[(String, ActionPath)], gts: &[(String, ActionPath)]) -> f64 {
    let deltas = avg_map_deltas();
    let total: f64 = deltas.iter().map(|&d| video_map(dets, gts, d).map).sum();
    total / deltas.len() as f64
}

/// Fraction of annotated videos whose top-scoring detection tube carries
/// one of that video's ground-truth classes. Videos with no detection
/// count as misses.
pub fn classification_accuracy(dets: &[(String, ActionPath)], gts: &[(String, ActionPath)]) -> f64 {
    let videos: BTreeSet<&String> = gts.iter().map(|(v, _)| v).collect();
    if videos.is_empty() {
        return 0.0;
    }
    let mut correct = 0usize;
    for video in &videos {
        let gt_classes: BTreeSet<usize> = gts
            .iter()
            .filter(|(v, _)| v == *video)
            .map(|(_, t)| t.class)
            .collect();
        let top = dets.iter().filter(|(v, _)| v == *video).max_by(|a, b| {
            a.1.score
                .partial_cmp(&b.1.score)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        if let Some((_, tube)) = top {
            if gt_classes.contains(&tube.class) {
                correct += 1;
            }
        }
    }
    correct as f64 / videos.len() as f64
}

/// Clips detection tubes to the temporal span of the ground truth in their
/// video (the trimmed evaluation protocol); detections falling entirely
/// outside are dropped.
pub fn clip_to_gt_extent(
    dets: &[(String, ActionPath)],
    gts: &[(String, ActionPath)],
) -> Vec<(String, ActionPath)> {
    let mut spans: BTreeMap<&String, (u32, u32)> = BTreeMap::new();
    for (video, tube) in gts {
        let entry = spans
            .entry(video)
            .or_insert((tube.frame_start, tube.frame_end()));
        entry.0 = entry.0.min(tube.frame_start);
        entry.1 = entry.1.max(tube.frame_end());
    }
    let mut out = Vec::new();
    for (video, tube) in dets {
        let Some(&(lo, hi)) = spans.get(video) else {
            continue;
        };
        let start = tube.frame_start.max(lo);
        let end = tube.frame_end().min(hi);
        if start > end {
            continue;
        }
        let s = (start - tube.frame_start) as usize;
        let e = (end - tube.frame_start) as usize;
        let frame_scores = if tube.frame_scores.len() == tube.len() {
            tube.frame_scores[s..=e].to_vec()
        } else {
            tube.frame_scores.clone()
        };
        out.push((
            video.clone(),
            ActionPath {
                class: tube.class,
                frame_start: start,
                boxes: tube.boxes[s..=e].to_vec(),
                frame_scores,
                step_scores: Vec::new(),
                score: tube.score,
            },
        ));
    }
    out
}
