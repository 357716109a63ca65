//! Synthetic ground truth and oracle detections: controlled box
//! trajectories stand in for real videos, and a seeded detection simulator
//! stands in for the CNN, so the geometric behaviour of the pipeline can be
//! verified end to end at desk scale.
//!
//! Everything here is a deterministic function of (spec, seed). Per-video
//! randomness comes from a stream seeded by (seed, video id), so videos can
//! be generated in parallel or serially with identical results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, MicroTube};
use crate::linking::{ActionPath, ScoredMicroTube};
use crate::proposals::enumerate_proposals;
use crate::pyramid::AnchorSet;
use crate::transition::BinaryTransitions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    Static,
    LinearDrift,
    RandomWalk,
}

/// Recipe for one synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionSpec {
    pub kind: MotionKind,
    /// Center speed as a fraction of image size per frame.
    pub velocity: f64,
    /// Drift direction in radians; random per instance when absent.
    #[serde(default)]
    pub direction: Option<f64>,
    /// Box widths and heights are sampled uniformly from this range.
    pub size_range: (f64, f64),
    pub class_id: usize,
    /// Instance duration in frames, sampled uniformly (inclusive).
    pub duration_range: (u32, u32),
    pub frames_per_video: u32,
    /// Frame gap used when extracting micro-tubes from this dataset.
    pub delta: u32,
    /// Annotate every m-th frame of an instance (1 = dense).
    pub annotate_every: u32,
    pub instances_per_video: u32,
}

impl Default for MotionSpec {
    fn default() -> Self {
        MotionSpec {
            kind: MotionKind::Static,
            velocity: 0.0,
            direction: None,
            size_range: (0.15, 0.3),
            class_id: 0,
            duration_range: (20, 30),
            frames_per_video: 40,
            delta: 1,
            annotate_every: 1,
            instances_per_video: 1,
        }
    }
}

impl MotionSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.size_range;
        if !(lo > 0.0 && hi < 1.0 && lo <= hi) {
            return Err(Error::InvalidParameter {
                reason: format!("size_range ({lo}, {hi}) must satisfy 0 < lo <= hi < 1"),
            });
        }
        if !(self.velocity >= 0.0 && self.velocity.is_finite()) {
            return Err(Error::InvalidParameter {
                reason: "velocity must be >= 0".into(),
            });
        }
        if self.duration_range.0 == 0 || self.duration_range.0 > self.duration_range.1 {
            return Err(Error::InvalidParameter {
                reason: "duration_range must be a nonempty positive range".into(),
            });
        }
        if self.frames_per_video == 0 || self.delta == 0 || self.annotate_every == 0 {
            return Err(Error::InvalidParameter {
                reason: "frames_per_video, delta and annotate_every must be >= 1".into(),
            });
        }
        if self.instances_per_video == 0 {
            return Err(Error::InvalidParameter {
                reason: "instances_per_video must be >= 1".into(),
            });
        }
        Ok(())
    }
}

/// One annotated tube: sparse (frame, box) keyframes, strictly increasing
/// in frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeAnnotation {
    pub class: usize,
    pub keyframes: Vec<(u32, BBox)>,
}

/// Ground truth for a single video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoAnnotation {
    pub id: String,
    pub n_frames: u32,
    pub tubes: Vec<TubeAnnotation>,
}

impl VideoAnnotation {
    pub fn validate(&self) -> Result<()> {
        for tube in &self.tubes {
            if tube.keyframes.is_empty() {
                return Err(Error::InvalidParameter {
                    reason: format!("video {}: tube with no keyframes", self.id),
                });
            }
            if tube.keyframes.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(Error::InvalidParameter {
                    reason: format!("video {}: keyframe frames not strictly increasing", self.id),
                });
            }
        }
        Ok(())
    }

    /// Densifies each tube into per-frame boxes by linear interpolation
    /// between consecutive keyframes; used as the evaluation ground truth.
    pub fn dense_paths(&self) -> Vec<ActionPath> {
        self.tubes
            .iter()
            .map(|tube| {
                let first = tube.keyframes[0].0;
                let last = tube.keyframes.last().unwrap().0;
                let mut boxes = Vec::with_capacity((last - first + 1) as usize);
                for w in tube.keyframes.windows(2) {
                    let (f0, b0) = w[0];
                    let (f1, b1) = w[1];
                    let span = (f1 - f0) as f64;
                    for f in f0..f1 {
                        let t = (f - f0) as f64 / span;
                        boxes.push(BBox {
                            x_min: b0.x_min + (b1.x_min - b0.x_min) * t,
                            y_min: b0.y_min + (b1.y_min - b0.y_min) * t,
                            x_max: b0.x_max + (b1.x_max - b0.x_max) * t,
                            y_max: b0.y_max + (b1.y_max - b0.y_max) * t,
                        });
                    }
                }
                boxes.push(tube.keyframes.last().unwrap().1);
                let n = boxes.len();
                ActionPath {
                    class: tube.class,
                    frame_start: first,
                    boxes,
                    frame_scores: vec![1.0; n],
                    step_scores: Vec::new(),
                    score: 1.0,
                }
            })
            .collect()
    }
}

/// Splitmix-style combine of the dataset seed with a video id.
pub fn stream_seed(seed: u64, video_id: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for b in video_id.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    let mut z = seed ^ h.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn clamp_center(c: f64, half: f64) -> f64 {
    c.clamp(half, 1.0 - half)
}

/// Generates `n_videos` annotated videos following `spec`, deterministic in
/// `seed`. Static instances keep their box; drifting instances move their
/// center at the given velocity along a per-instance direction, clamped so
/// boxes stay inside the unit square.
pub fn generate_dataset(
    spec: &MotionSpec,
    n_videos: usize,
    seed: u64,
) -> Result<Vec<VideoAnnotation>> {
    spec.validate()?;
    (0..n_videos)
        .into_par_iter()
        .map(|v| generate_video(spec, v, seed))
        .collect()
}

fn generate_video(spec: &MotionSpec, v: usize, seed: u64) -> Result<VideoAnnotation> {
    let id = format!("video_{v:04}");
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, &id));
    let mut tubes = Vec::with_capacity(spec.instances_per_video as usize);
    for _ in 0..spec.instances_per_video {
        let w = rng.gen_range(spec.size_range.0..=spec.size_range.1);
        let h = rng.gen_range(spec.size_range.0..=spec.size_range.1);
        let duration = rng
            .gen_range(spec.duration_range.0..=spec.duration_range.1)
            .min(spec.frames_per_video);
        let start = rng.gen_range(0..=spec.frames_per_video - duration);
        let angle = spec
            .direction
            .unwrap_or_else(|| rng.gen_range(0.0..std::f64::consts::TAU));
        let cx0 = rng.gen_range(w / 2.0..=1.0 - w / 2.0);
        let cy0 = rng.gen_range(h / 2.0..=1.0 - h / 2.0);

        let mut keyframes = Vec::new();
        let (mut cx, mut cy) = (cx0, cy0);
        let mut f = start;
        while f < start + duration {
            let (px, py) = match spec.kind {
                MotionKind::Static => (cx0, cy0),
                MotionKind::LinearDrift => {
                    let d = spec.velocity * (f - start) as f64;
                    (cx0 + d * angle.cos(), cy0 + d * angle.sin())
                }
                MotionKind::RandomWalk => {
                    if f > start {
                        let step_angle = rng.gen_range(0.0..std::f64::consts::TAU);
                        let step = spec.velocity * spec.annotate_every as f64;
                        cx += step * step_angle.cos();
                        cy += step * step_angle.sin();
                    }
                    (cx, cy)
                }
            };
            let (px, py) = (clamp_center(px, w / 2.0), clamp_center(py, h / 2.0));
            keyframes.push((f, BBox::from_center(px, py, w, h)?));
            f += spec.annotate_every;
        }
        tubes.push(TubeAnnotation {
            class: spec.class_id,
            keyframes,
        });
    }
    Ok(VideoAnnotation {
        id,
        n_frames: spec.frames_per_video,
        tubes,
    })
}

/// All pairs of annotated frames exactly `delta` apart, per tube. A tube
/// with a single annotated frame yields one degenerate micro-tube with the
/// box duplicated across the gap.
pub fn extract_microtubes(ann: &VideoAnnotation, delta: u32) -> Result<Vec<MicroTube>> {
    ann.validate()?;
    let mut out = Vec::new();
    for tube in &ann.tubes {
        if tube.keyframes.len() == 1 {
            let (f, b) = tube.keyframes[0];
            out.push(MicroTube::new(f, delta, b, b)?);
            continue;
        }
        let by_frame: std::collections::BTreeMap<u32, BBox> =
            tube.keyframes.iter().copied().collect();
        for (&f, &b) in &by_frame {
            if let Some(&b2) = by_frame.get(&(f + delta)) {
                out.push(MicroTube::new(f, delta, b, b2)?);
            }
        }
    }
    Ok(out)
}

/// Micro-tubes on the video-global frame lattice {0, delta, 2*delta, ...};
/// this is how a frame-pair detector walks a test video, so the resulting
/// detection groups chain up for the linker. Single-keyframe tubes are
/// skipped here (they never sit on the lattice reliably).
pub fn lattice_microtubes(ann: &VideoAnnotation, delta: u32) -> Result<Vec<MicroTube>> {
    ann.validate()?;
    let mut out = Vec::new();
    for tube in &ann.tubes {
        let by_frame: std::collections::BTreeMap<u32, BBox> =
            tube.keyframes.iter().copied().collect();
        let mut t = 0u32;
        while t + delta <= ann.n_frames {
            if let (Some(&b0), Some(&b1)) = (by_frame.get(&t), by_frame.get(&(t + delta))) {
                out.push(MicroTube::new(t, delta, b0, b1)?);
            }
            t += delta;
        }
    }
    Ok(out)
}

/// Translates every box of every video by a per-video uniformly sampled
/// (left, top) pad, left in {0..=max_pad_x} and top in {0..=max_pad_y};
/// the remainder pads the opposite edges. Returns the transformed
/// annotations and the grown canvas size. Geometry only; pixels are out of
/// scope.
pub fn transform_annotations(
    anns: &[VideoAnnotation],
    max_pad_x: u32,
    max_pad_y: u32,
    image_w: u32,
    image_h: u32,
    seed: u64,
) -> Result<(Vec<VideoAnnotation>, (u32, u32))> {
    let mut out = Vec::with_capacity(anns.len());
    for ann in anns {
        ann.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, &ann.id));
        let left = rng.gen_range(0..=max_pad_x) as f64;
        let top = rng.gen_range(0..=max_pad_y) as f64;
        out.push(VideoAnnotation {
            id: ann.id.clone(),
            n_frames: ann.n_frames,
            tubes: ann
                .tubes
                .iter()
                .map(|t| TubeAnnotation {
                    class: t.class,
                    keyframes: t
                        .keyframes
                        .iter()
                        .map(|&(f, b)| (f, b.translate(left, top)))
                        .collect(),
                })
                .collect(),
        });
    }
    Ok((out, (image_w + max_pad_x, image_h + max_pad_y)))
}

/// Oracle detector noise model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionNoise {
    /// Per-coordinate Gaussian jitter applied to emitted boxes.
    pub jitter_sigma: f64,
    /// Confidence assigned to the true class; 0 disables ground-truth
    /// emissions entirely (distractors only).
    pub true_class_score: f64,
    /// Poisson mean of distractor detections per ground-truth micro-tube.
    pub distractor_rate: f64,
}

impl DetectionNoise {
    pub fn validate(&self) -> Result<()> {
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(Error::InvalidParameter {
                reason: "jitter_sigma must be >= 0".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.true_class_score) {
            return Err(Error::InvalidParameter {
                reason: "true_class_score must be in [0, 1]".into(),
            });
        }
        if !(self.distractor_rate >= 0.0 && self.distractor_rate.is_finite()) {
            return Err(Error::InvalidParameter {
                reason: "distractor_rate must be >= 0".into(),
            });
        }
        Ok(())
    }
}

fn jitter_box(b: &BBox, sigma: f64, rng: &mut ChaCha8Rng) -> BBox {
    if sigma == 0.0 {
        return *b;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    let mut draw = |v: f64| v + normal.sample(rng);
    let (x0, x1) = (draw(b.x_min), draw(b.x_max));
    let (y0, y1) = (draw(b.y_min), draw(b.y_max));
    BBox {
        x_min: x0.min(x1),
        y_min: y0.min(y1),
        x_max: x0.max(x1),
        y_max: y0.max(y1),
    }
    .clip_unit()
}

/// Replaces the detection network: for every ground-truth micro-tube on the
/// test lattice, emits a jittered copy scored `true_class_score` for its
/// class (background gets the remainder), plus Poisson-many distractors
/// drawn from the transition-derived proposal set with background-dominant
/// scores. Output is sorted by video id; deterministic in `seed`.
pub fn simulate_detections(
    anns: &[VideoAnnotation],
    anchors: &AnchorSet,
    transitions: &BinaryTransitions,
    noise: &DetectionNoise,
    delta: u32,
    num_classes: usize,
    seed: u64,
) -> Result<Vec<(String, Vec<ScoredMicroTube>)>> {
    noise.validate()?;
    if num_classes == 0 {
        return Err(Error::InvalidParameter {
            reason: "num_classes must be >= 1".into(),
        });
    }
    let proposals = enumerate_proposals(transitions, anchors)?;
    let mut order: Vec<&VideoAnnotation> = anns.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));

    order
        .par_iter()
        .map(|ann| {
            let dets = simulate_video(ann, &proposals, noise, delta, num_classes, seed)?;
            Ok((ann.id.clone(), dets))
        })
        .collect()
}

fn simulate_video(
    ann: &VideoAnnotation,
    proposals: &[crate::proposals::AnchorMicroTube],
    noise: &DetectionNoise,
    delta: u32,
    num_classes: usize,
    seed: u64,
) -> Result<Vec<ScoredMicroTube>> {
    for tube in &ann.tubes {
        if tube.class >= num_classes {
            return Err(Error::InvalidParameter {
                reason: format!(
                    "video {}: class {} out of range for {num_classes} classes",
                    ann.id, tube.class
                ),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, &ann.id));
    let mut dets: Vec<ScoredMicroTube> = Vec::new();
    // classes share the lattice; walk tubes in annotation order
    for tube in &ann.tubes {
        let single = VideoAnnotation {
            id: ann.id.clone(),
            n_frames: ann.n_frames,
            tubes: vec![tube.clone()],
        };
        for gt in lattice_microtubes(&single, delta)? {
            if noise.true_class_score > 0.0 {
                let mut scores = vec![0.0; num_classes + 1];
                scores[0] = 1.0 - noise.true_class_score;
                scores[tube.class + 1] = noise.true_class_score;
                dets.push(ScoredMicroTube {
                    tube: MicroTube::new(
                        gt.frame_start,
                        gt.delta,
                        jitter_box(&gt.box_start, noise.jitter_sigma, &mut rng),
                        jitter_box(&gt.box_end, noise.jitter_sigma, &mut rng),
                    )?,
                    scores,
                    stream: None,
                });
            }
            if noise.distractor_rate > 0.0 && !proposals.is_empty() {
                let poisson = Poisson::new(noise.distractor_rate).expect("rate validated");
                let k = poisson.sample(&mut rng) as usize;
                for _ in 0..k {
                    let pick = &proposals[rng.gen_range(0..proposals.len())];
                    let background = rng.gen_range(0.55..0.9);
                    let mut scores = vec![(1.0 - background) / num_classes as f64; num_classes + 1];
                    scores[0] = background;
                    dets.push(ScoredMicroTube {
                        tube: MicroTube::new(
                            gt.frame_start,
                            gt.delta,
                            pick.box_start.clip_unit(),
                            pick.box_end.clip_unit(),
                        )?,
                        scores,
                        stream: None,
                    });
                }
            }
        }
    }
    Ok(dets)
}
