//! Anchor micro-tube proposal enumeration from binary transitions, SSD-style
//! regression-target encode/decode, and proposal/ground-truth matching.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox, MicroTube};
use crate::pyramid::AnchorSet;
use crate::transition::BinaryTransitions;

/// SSD box-encoding variances; fixed so targets are testable.
pub const CENTER_VARIANCE: f64 = 0.1;
pub const SIZE_VARIANCE: f64 = 0.2;

/// One anchor micro-tube hypothesis: the same anchor shape placed at the
/// start cell and the end cell of a transition pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorMicroTube {
    pub level: usize,
    #[serde(rename = "cell_i")]
    pub cell_start: u32,
    #[serde(rename = "cell_j")]
    pub cell_end: u32,
    pub shape: usize,
    pub box_start: BBox,
    pub box_end: BBox,
}

impl AnchorMicroTube {
    /// Anchor cuboids keep the same spatial bounds in both frames.
    pub fn is_cuboid(&self) -> bool {
        self.cell_start == self.cell_end
    }

    /// Mean of the two endpoint-frame IoUs against a ground-truth
    /// micro-tube.
    pub fn overlap_with(&self, g: &MicroTube) -> f64 {
        (iou(&g.box_start, &self.box_start) + iou(&g.box_end, &self.box_end)) / 2.0
    }
}

/// Regression offsets for the two endpoint frames (center / log-size form).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionTarget {
    pub start: [f64; 4],
    pub end: [f64; 4],
}

/// Enumerates every proposal implied by the binary transitions: one per
/// (level, pair, shape), in exactly that order. The transitions and the
/// anchor set must come from the same pyramid config.
pub fn enumerate_proposals(
    transitions: &BinaryTransitions,
    anchors: &AnchorSet,
) -> Result<Vec<AnchorMicroTube>> {
    if transitions.pyramid_hash() != anchors.config_hash() {
        return Err(Error::ConfigHashMismatch {
            expected: anchors.config_hash().to_string(),
            actual: transitions.pyramid_hash().to_string(),
        });
    }
    let mut out = Vec::new();
    for (p, support) in transitions.levels().iter().enumerate() {
        let lvl = anchors.level(p)?;
        for &(i, j) in &support.pairs {
            for shape in 0..lvl.shapes {
                out.push(AnchorMicroTube {
                    level: p,
                    cell_start: i,
                    cell_end: j,
                    shape,
                    box_start: *lvl.anchor(i as usize, shape),
                    box_end: *lvl.anchor(j as usize, shape),
                });
            }
        }
    }
    Ok(out)
}

fn encode_box(g: &BBox, a: &BBox) -> Result<[f64; 4]> {
    if a.area() <= 0.0 || g.area() <= 0.0 {
        return Err(Error::DegenerateEncode {
            reason: "zero-area anchor or ground-truth box".into(),
        });
    }
    let (gcx, gcy) = g.center();
    let (acx, acy) = a.center();
    Ok([
        ((gcx - acx) / a.width()) / CENTER_VARIANCE,
        ((gcy - acy) / a.height()) / CENTER_VARIANCE,
        (g.width() / a.width()).ln() / SIZE_VARIANCE,
        (g.height() / a.height()).ln() / SIZE_VARIANCE,
    ])
}

fn decode_box(t: &[f64; 4], a: &BBox) -> BBox {
    let (acx, acy) = a.center();
    let cx = acx + t[0] * CENTER_VARIANCE * a.width();
    let cy = acy + t[1] * CENTER_VARIANCE * a.height();
    let w = a.width() * (t[2] * SIZE_VARIANCE).exp();
    let h = a.height() * (t[3] * SIZE_VARIANCE).exp();
    BBox {
        x_min: cx - w / 2.0,
        y_min: cy - h / 2.0,
        x_max: cx + w / 2.0,
        y_max: cy + h / 2.0,
    }
}

/// Center/size offsets of a ground-truth micro-tube relative to an anchor
/// micro-tube, one 4-vector per endpoint frame.
pub fn encode(g: &MicroTube, a: &AnchorMicroTube) -> Result<RegressionTarget> {
    Ok(RegressionTarget {
        start: encode_box(&g.box_start, &a.box_start)?,
        end: encode_box(&g.box_end, &a.box_end)?,
    })
}

/// Inverse of [`encode`]; output boxes are clipped to the unit square. The
/// anchor carries no temporal placement, so the caller supplies it.
pub fn decode(
    a: &AnchorMicroTube,
    t: &RegressionTarget,
    frame_start: u32,
    delta: u32,
) -> Result<MicroTube> {
    MicroTube::new(
        frame_start,
        delta,
        decode_box(&t.start, &a.box_start).clip_unit(),
        decode_box(&t.end, &a.box_end).clip_unit(),
    )
}

/// One matched (ground truth, proposal) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub gt: usize,
    pub proposal: usize,
    pub overlap: f64,
}

/// SSD-style positive matching: every ground truth claims its best-overlap
/// proposal unconditionally, then every remaining proposal with overlap
/// >= `iou_min` joins its best ground truth. A proposal serves at most one
/// > ground truth; conflicts resolve to the higher overlap, then the lower
/// > ground-truth index.
pub fn match_positives(
    gts: &[MicroTube],
    proposals: &[AnchorMicroTube],
    iou_min: f64,
) -> Result<Vec<Assignment>> {
    if !(iou_min > 0.0 && iou_min < 1.0) {
        return Err(Error::InvalidParameter {
            reason: format!("iou_min={iou_min} outside (0, 1)"),
        });
    }
    let mut assigned: Vec<Option<Assignment>> = vec![None; proposals.len()];

    for (gi, g) in gts.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (pi, p) in proposals.iter().enumerate() {
            let ov = p.overlap_with(g);
            if best.is_none_or(|(_, b)| ov > b) {
                best = Some((pi, ov));
            }
        }
        if let Some((pi, ov)) = best {
            let replace = match &assigned[pi] {
                None => true,
                Some(prev) => ov > prev.overlap,
            };
            if replace {
                assigned[pi] = Some(Assignment {
                    gt: gi,
                    proposal: pi,
                    overlap: ov,
                });
            }
        }
    }

    for (pi, p) in proposals.iter().enumerate() {
        if assigned[pi].is_some() {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in gts.iter().enumerate() {
            let ov = p.overlap_with(g);
            if best.is_none_or(|(_, b)| ov > b) {
                best = Some((gi, ov));
            }
        }
        if let Some((gi, ov)) = best {
            if ov >= iou_min {
                assigned[pi] = Some(Assignment {
                    gt: gi,
                    proposal: pi,
                    overlap: ov,
                });
            }
        }
    }

    Ok(assigned.into_iter().flatten().collect())
}

/// Per-ground-truth maximum proposal overlap.
pub fn best_overlaps(gts: &[MicroTube], proposals: &[AnchorMicroTube]) -> Vec<f64> {
    gts.iter()
        .map(|g| {
            proposals
                .iter()
                .map(|p| p.overlap_with(g))
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Fraction of ground-truth micro-tubes whose best proposal overlap reaches
/// `delta`. Empty inputs yield 0.
pub fn proposal_recall(gts: &[MicroTube], proposals: &[AnchorMicroTube], delta: f64) -> f64 {
    if gts.is_empty() {
        return 0.0;
    }
    let hits = best_overlaps(gts, proposals)
        .into_iter()
        .filter(|&v| v >= delta)
        .count();
    hits as f64 / gts.len() as f64
}
