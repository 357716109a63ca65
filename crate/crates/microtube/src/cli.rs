//! Batch pipeline front-end: estimate -> threshold/augment -> propose ->
//! synth/ingest -> link -> trim -> eval, plus two-stream fusion.
//!
//! Every stage reads and writes the documented JSON formats, validates the
//! pyramid config hash where geometry flows between artifacts, and is
//! byte-reproducible for fixed inputs and seeds. Stochastic stages take a
//! mandatory `--seed`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{avg_map, avg_map_deltas, classification_accuracy, clip_to_gt_extent, video_map};
use crate::formats::{
    self, delta_key, AnnotationFile, BinaryTransitionsFile, DetectionRecord, PathRecord,
    ReportFile, TransitionMatrixFile,
};
use crate::linking::{
    fuse_streams, group_by_start, link, split_into_chains, trim_path, ActionPath, LinkParams,
    ScoredMicroTube,
};
use crate::proposals::enumerate_proposals;
use crate::pyramid::{build_pyramid, AnchorSet, PyramidConfig};
use crate::synth::{
    generate_dataset, simulate_detections, transform_annotations, DetectionNoise, MotionKind,
    MotionSpec,
};
use crate::transition::{self, estimate, normalize, BinaryTransitions};

#[derive(Debug, Parser)]
#[command(
    name = "microtube",
    version,
    about = "Anchor micro-tube action detection pipeline"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate per-level transition matrices from annotated micro-tubes
    Estimate(EstimateArgs),
    /// Threshold a transition matrix into binary transitions, optionally augmented
    Threshold(ThresholdArgs),
    /// Enumerate anchor micro-tube proposals from binary transitions
    Propose(ProposeArgs),
    /// Synthetic data: generate, transform, or simulate detections
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Link detection micro-tubes into action paths
    Link(LinkArgs),
    /// Temporally trim action paths by dynamic programming
    Trim(TrimArgs),
    /// Score action paths against ground truth (video-mAP)
    Eval(EvalArgs),
    /// Mean-fuse two detection streams over the same proposal order
    Fuse(FuseArgs),
}

fn load_pyramid(config: &Path) -> Result<AnchorSet> {
    let config: PyramidConfig = formats::read_toml(config)?;
    build_pyramid(&config)
}

fn check_hash(expected: &str, actual: &str) -> Result<()> {
    if expected != actual {
        return Err(Error::ConfigHashMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        });
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Ground-truth annotation file
    #[arg(long)]
    pub annotations: PathBuf,
    /// Frame gap between micro-tube endpoints
    #[arg(long)]
    pub delta: u32,
    /// Pyramid geometry (TOML)
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Write raw counts instead of the normalized matrix
    #[arg(long)]
    pub counts: bool,
}

pub fn run_estimate(args: &EstimateArgs) -> Result<()> {
    let anns: AnnotationFile = formats::read_json(&args.annotations)?;
    anns.validate()?;
    let anchors = load_pyramid(&args.config)?;
    let mut gts = Vec::new();
    for video in &anns.videos {
        gts.extend(crate::synth::extract_microtubes(video, args.delta)?);
    }
    let counts = estimate(&gts, &anchors)?;
    let file = if args.counts {
        TransitionMatrixFile::from_counts(&counts, args.delta)
    } else {
        TransitionMatrixFile::from_matrix(&normalize(&counts), args.delta)
    };
    formats::write_json(&args.out, &file)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AugmentKind {
    Diagonal,
    Neighbors,
    Offsets,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    /// Transition matrix document (counts or normalized)
    #[arg(long)]
    pub matrix: PathBuf,
    /// Probability threshold in (0, 1]
    #[arg(long, default_value_t = 0.10)]
    pub tau: f64,
    /// Support augmentations, applied in order
    #[arg(long = "augment", value_enum)]
    pub augment: Vec<AugmentKind>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_threshold(args: &ThresholdArgs) -> Result<()> {
    let file: TransitionMatrixFile = formats::read_json(&args.matrix)?;
    let matrix = file.to_matrix(&args.matrix)?;
    let mut binary = transition::threshold(&matrix, args.tau)?;
    for aug in &args.augment {
        binary = match aug {
            AugmentKind::Diagonal => transition::augment_diagonal(&binary),
            AugmentKind::Neighbors => transition::augment_neighbors(&binary),
            AugmentKind::Offsets => transition::augment_relative_offsets(&binary),
        };
    }
    formats::write_json(
        &args.out,
        &BinaryTransitionsFile::from_binary(&binary, file.delta),
    )
}

#[derive(Debug, Args)]
pub struct ProposeArgs {
    /// Binary transitions document
    #[arg(long)]
    pub bin: PathBuf,
    /// Pyramid geometry (TOML); must match the document's config hash
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_propose(args: &ProposeArgs) -> Result<()> {
    let file: BinaryTransitionsFile = formats::read_json(&args.bin)?;
    let anchors = load_pyramid(&args.config)?;
    check_hash(&file.pyramid_config_hash, anchors.config_hash())?;
    let binary = file.to_binary(&args.bin)?;
    let proposals = enumerate_proposals(&binary, &anchors)?;
    formats::write_jsonl(&args.out, &proposals)
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Generate a synthetic annotated dataset
    Gen(SynthGenArgs),
    /// Randomly pad (translate) annotations, per video
    Transform(SynthTransformArgs),
    /// Simulate oracle detections over an annotated dataset
    Detect(SynthDetectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MotionKindArg {
    Static,
    LinearDrift,
    RandomWalk,
}

impl From<MotionKindArg> for MotionKind {
    fn from(value: MotionKindArg) -> Self {
        match value {
            MotionKindArg::Static => MotionKind::Static,
            MotionKindArg::LinearDrift => MotionKind::LinearDrift,
            MotionKindArg::RandomWalk => MotionKind::RandomWalk,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthGenArgs {
    #[arg(long, value_enum, default_value = "static")]
    pub kind: MotionKindArg,
    /// Center speed, image fraction per frame
    #[arg(long, default_value_t = 0.0)]
    pub velocity: f64,
    /// Drift direction in radians (random per instance when omitted)
    #[arg(long)]
    pub direction: Option<f64>,
    #[arg(long, default_value_t = 0.15)]
    pub size_min: f64,
    #[arg(long, default_value_t = 0.3)]
    pub size_max: f64,
    #[arg(long, default_value_t = 0)]
    pub class: usize,
    #[arg(long, default_value_t = 20)]
    pub duration_min: u32,
    #[arg(long, default_value_t = 30)]
    pub duration_max: u32,
    #[arg(long, default_value_t = 40)]
    pub frames: u32,
    /// Annotate every m-th frame of an instance
    #[arg(long, default_value_t = 1)]
    pub annotate_every: u32,
    #[arg(long, default_value_t = 1)]
    pub instances: u32,
    #[arg(long)]
    pub videos: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "synthetic")]
    pub dataset: String,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_synth_gen(args: &SynthGenArgs) -> Result<()> {
    let spec = MotionSpec {
        kind: args.kind.into(),
        velocity: args.velocity,
        direction: args.direction,
        size_range: (args.size_min, args.size_max),
        class_id: args.class,
        duration_range: (args.duration_min, args.duration_max),
        frames_per_video: args.frames,
        delta: 1,
        annotate_every: args.annotate_every,
        instances_per_video: args.instances,
    };
    let videos = generate_dataset(&spec, args.videos, args.seed)?;
    formats::write_json(
        &args.out,
        &AnnotationFile {
            dataset: args.dataset.clone(),
            image_size: None,
            videos,
        },
    )
}

#[derive(Debug, Args)]
pub struct SynthTransformArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub max_pad_x: u32,
    #[arg(long, default_value_t = 20)]
    pub max_pad_y: u32,
    #[arg(long, default_value_t = 320)]
    pub image_w: u32,
    #[arg(long, default_value_t = 240)]
    pub image_h: u32,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_synth_transform(args: &SynthTransformArgs) -> Result<()> {
    let anns: AnnotationFile = formats::read_json(&args.annotations)?;
    anns.validate()?;
    let (videos, canvas) = transform_annotations(
        &anns.videos,
        args.max_pad_x,
        args.max_pad_y,
        args.image_w,
        args.image_h,
        args.seed,
    )?;
    formats::write_json(
        &args.out,
        &AnnotationFile {
            dataset: anns.dataset,
            image_size: Some([canvas.0, canvas.1]),
            videos,
        },
    )
}

#[derive(Debug, Args)]
pub struct SynthDetectArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    /// Binary transitions the simulated detector proposes from
    #[arg(long)]
    pub bin: PathBuf,
    #[arg(long)]
    pub delta: u32,
    /// Per-coordinate Gaussian jitter
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    /// Score emitted for the true class (0 disables ground-truth emissions)
    #[arg(long, default_value_t = 1.0)]
    pub true_score: f64,
    /// Poisson mean of distractors per ground-truth micro-tube
    #[arg(long, default_value_t = 0.0)]
    pub distractor_rate: f64,
    /// Number of action classes C (scores have C+1 entries)
    #[arg(long)]
    pub classes: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_synth_detect(args: &SynthDetectArgs) -> Result<()> {
    let anns: AnnotationFile = formats::read_json(&args.annotations)?;
    anns.validate()?;
    let anchors = load_pyramid(&args.config)?;
    let bin_file: BinaryTransitionsFile = formats::read_json(&args.bin)?;
    check_hash(&bin_file.pyramid_config_hash, anchors.config_hash())?;
    let transitions = bin_file.to_binary(&args.bin)?;
    let noise = DetectionNoise {
        jitter_sigma: args.sigma,
        true_class_score: args.true_score,
        distractor_rate: args.distractor_rate,
    };
    let dets = simulate_detections(
        &anns.videos,
        &anchors,
        &transitions,
        &noise,
        args.delta,
        args.classes,
        args.seed,
    )?;
    let mut records = Vec::new();
    for (video, list) in &dets {
        for det in list {
            records.push(DetectionRecord::from_scored(video, det));
        }
    }
    formats::write_jsonl(&args.out, &records)
}

#[derive(Debug, Args)]
pub struct LinkArgs {
    /// Detections JSONL
    #[arg(long)]
    pub dets: PathBuf,
    /// Linker parameters (TOML); defaults apply when omitted
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn load_detections(path: &Path) -> Result<(BTreeMap<String, Vec<ScoredMicroTube>>, usize)> {
    let records: Vec<DetectionRecord> = formats::read_jsonl(path)?;
    let mut by_video: BTreeMap<String, Vec<ScoredMicroTube>> = BTreeMap::new();
    let mut score_len: Option<usize> = None;
    for record in records {
        let (video, det) = record.into_scored()?;
        match score_len {
            None => score_len = Some(det.scores.len()),
            Some(n) if n != det.scores.len() => {
                return Err(Error::Schema {
                    path: path.display().to_string(),
                    reason: format!(
                        "inconsistent score vector lengths ({n} vs {})",
                        det.scores.len()
                    ),
                })
            }
            _ => {}
        }
        by_video.entry(video).or_default().push(det);
    }
    let classes = score_len.map_or(0, |n| n - 1);
    Ok((by_video, classes))
}

pub fn run_link(args: &LinkArgs) -> Result<()> {
    let params: LinkParams = match &args.params {
        Some(path) => formats::read_toml(path)?,
        None => LinkParams::default(),
    };
    params.validate()?;
    let (by_video, classes) = load_detections(&args.dets)?;
    // videos link independently; output stays in canonical video order
    let per_video: Vec<Vec<PathRecord>> = by_video
        .par_iter()
        .map(|(video, dets)| {
            let chains = split_into_chains(group_by_start(dets));
            let mut records = Vec::new();
            for class in 0..classes {
                for chain in &chains {
                    for path in link(chain, &params, class)? {
                        records.push(PathRecord::from_path(video, &path));
                    }
                }
            }
            Ok(records)
        })
        .collect::<Result<_>>()?;
    formats::write_jsonl(&args.out, &per_video.concat())
}

#[derive(Debug, Args)]
pub struct TrimArgs {
    #[arg(long)]
    pub paths: PathBuf,
    /// Label-switching cost
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_trim(args: &TrimArgs) -> Result<()> {
    let records: Vec<PathRecord> = formats::read_jsonl(&args.paths)?;
    let mut out = Vec::new();
    for record in records {
        let (video, path) = record.into_path(&args.paths)?;
        for segment in trim_path(&path, args.alpha)? {
            out.push(PathRecord::from_path(&video, &segment));
        }
    }
    formats::write_jsonl(&args.out, &out)
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub paths: PathBuf,
    /// Ground-truth annotation file
    #[arg(long)]
    pub gt: PathBuf,
    /// Spatiotemporal IoU thresholds, comma separated
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pub deltas: Vec<f64>,
    /// Also report avg-mAP over 0.50..0.95
    #[arg(long)]
    pub avg: bool,
    /// Clip detections to the ground-truth temporal extent before scoring
    #[arg(long)]
    pub trimmed_protocol: bool,
    #[arg(long)]
    pub report: PathBuf,
}

pub fn run_eval(args: &EvalArgs) -> Result<()> {
    if args.deltas.is_empty() {
        return Err(Error::InvalidParameter {
            reason: "at least one evaluation delta is required".into(),
        });
    }
    for &d in &args.deltas {
        if !(d > 0.0 && d < 1.0) {
            return Err(Error::InvalidParameter {
                reason: format!("evaluation delta {d} outside (0, 1)"),
            });
        }
    }
    let records: Vec<PathRecord> = formats::read_jsonl(&args.paths)?;
    let mut dets: Vec<(String, ActionPath)> = Vec::with_capacity(records.len());
    for record in records {
        dets.push(record.into_path(&args.paths)?);
    }
    let gt_file: AnnotationFile = formats::read_json(&args.gt)?;
    gt_file.validate()?;
    let gts = gt_file.gt_paths();
    let dets = if args.trimmed_protocol {
        clip_to_gt_extent(&dets, &gts)
    } else {
        dets
    };

    let mut map_by_delta = BTreeMap::new();
    let mut per_class_ap = BTreeMap::new();
    for (idx, &d) in args.deltas.iter().enumerate() {
        let report = video_map(&dets, &gts, d);
        if idx == 0 {
            per_class_ap = report
                .per_class_ap
                .iter()
                .map(|(c, ap)| (c.to_string(), *ap))
                .collect();
        }
        map_by_delta.insert(delta_key(d), report.map);
    }
    let avg = if args.avg {
        for d in avg_map_deltas() {
            map_by_delta
                .entry(delta_key(d))
                .or_insert_with(|| video_map(&dets, &gts, d).map);
        }
        Some(avg_map(&dets, &gts))
    } else {
        None
    };
    let report = ReportFile {
        per_class_ap,
        map_by_delta,
        avg_map: avg,
        accuracy: classification_accuracy(&dets, &gts),
    };
    formats::write_json(&args.report, &report)?;
    print!("{}", report.render_table());
    Ok(())
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_fuse(args: &FuseArgs) -> Result<()> {
    let ra: Vec<DetectionRecord> = formats::read_jsonl(&args.a)?;
    let rb: Vec<DetectionRecord> = formats::read_jsonl(&args.b)?;
    if ra.len() != rb.len() {
        return Err(Error::FusionMismatch {
            reason: format!("{} vs {} records", ra.len(), rb.len()),
        });
    }
    let mut videos = Vec::with_capacity(ra.len());
    let mut stream_a = Vec::with_capacity(ra.len());
    let mut stream_b = Vec::with_capacity(rb.len());
    for (idx, (a, b)) in ra.into_iter().zip(rb).enumerate() {
        if a.video_id != b.video_id {
            return Err(Error::FusionMismatch {
                reason: format!("index {idx}: video {} vs {}", a.video_id, b.video_id),
            });
        }
        let (video, da) = a.into_scored()?;
        let (_, db) = b.into_scored()?;
        videos.push(video);
        stream_a.push(da);
        stream_b.push(db);
    }
    let fused = fuse_streams(&stream_a, &stream_b)?;
    let records: Vec<DetectionRecord> = videos
        .iter()
        .zip(&fused)
        .map(|(video, det)| DetectionRecord::from_scored(video, det))
        .collect();
    formats::write_jsonl(&args.out, &records)
}

/// Dispatches a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Estimate(args) => run_estimate(args),
        Command::Threshold(args) => run_threshold(args),
        Command::Propose(args) => run_propose(args),
        Command::Synth(SynthCommand::Gen(args)) => run_synth_gen(args),
        Command::Synth(SynthCommand::Transform(args)) => run_synth_transform(args),
        Command::Synth(SynthCommand::Detect(args)) => run_synth_detect(args),
        Command::Link(args) => run_link(args),
        Command::Trim(args) => run_trim(args),
        Command::Eval(args) => run_eval(args),
        Command::Fuse(args) => run_fuse(args),
    }
}

/// Entry point for the binary: parse, run, report machine-readable errors
/// on stderr with a nonzero exit code.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let payload = serde_json::json!({
                "error": { "kind": e.kind(), "message": e.to_string() }
            });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}

/// Default SSD300-style pyramid config, written out for `--config` flags.
pub fn write_default_pyramid_config(path: &Path) -> Result<()> {
    formats::write_toml(path, &PyramidConfig::default())
}

/// Diagonal-only binary transitions for a config: the anchor-cuboid
/// baseline, usable as `--bin` input without an estimation pass.
pub fn write_cuboid_transitions(config: &Path, delta: u32, out: &Path) -> Result<()> {
    let anchors = load_pyramid(config)?;
    let binary = BinaryTransitions::diagonal(&anchors);
    formats::write_json(out, &BinaryTransitionsFile::from_binary(&binary, delta))
}
