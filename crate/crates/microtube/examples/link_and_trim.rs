//! Link noisy detection micro-tubes into action paths and trim them
//! temporally with the dynamic-programming segmenter.
//!
//! Run with: cargo run --example link_and_trim

use microtube::linking::{group_by_start, link, split_into_chains, trim, trim_path, LinkParams};
use microtube::pyramid::{build_pyramid, PyramidConfig};
use microtube::synth::{
    generate_dataset, simulate_detections, DetectionNoise, MotionKind, MotionSpec,
};
use microtube::transition::BinaryTransitions;

fn main() {
    let anchors = build_pyramid(&PyramidConfig::default()).unwrap();
    let spec = MotionSpec {
        kind: MotionKind::LinearDrift,
        velocity: 0.01,
        size_range: (0.3, 0.4),
        duration_range: (24, 24),
        frames_per_video: 30,
        ..MotionSpec::default()
    };
    let videos = generate_dataset(&spec, 1, 11).unwrap();
    let noise = DetectionNoise {
        jitter_sigma: 0.01,
        true_class_score: 0.85,
        distractor_rate: 1.0,
    };
    let dets = simulate_detections(
        &videos,
        &anchors,
        &BinaryTransitions::diagonal(&anchors),
        &noise,
        1,
        1,
        5,
    )
    .unwrap();
    let (video, list) = &dets[0];
    println!(
        "{video}: {} detection micro-tubes (with distractors)",
        list.len()
    );

    let params = LinkParams::default();
    let mut paths = Vec::new();
    for chain in split_into_chains(group_by_start(list)) {
        paths.extend(link(&chain, &params, 0).unwrap());
    }
    println!("linked into {} paths:", paths.len());
    for (i, p) in paths.iter().enumerate() {
        println!(
            "  path {i}: frames [{:>2}, {:>2}], steps {:>2}, score {:.3}",
            p.frame_start,
            p.frame_end(),
            p.step_scores.len(),
            p.score
        );
    }

    // trim the strongest path; its uniform high scores survive intact
    let best = &paths[0];
    let kept = trim_path(best, 0.5).unwrap();
    println!(
        "\ntrimmed best path at alpha 0.5 -> {} segment(s)",
        kept.len()
    );
    for s in &kept {
        println!(
            "  frames [{}, {}], score {:.3}",
            s.frame_start,
            s.frame_end(),
            s.score
        );
    }

    // a synthetic score dip shows the segmenter cutting background out
    let wavy: Vec<f64> = (0..20)
        .map(|t| if (8..13).contains(&t) { 0.1 } else { 0.9 })
        .collect();
    println!("\nscore sequence with a dip at frames 8..=12:");
    for alpha in [0.0, 0.5, 3.0] {
        println!(
            "  alpha {alpha:>3}: segments {:?}",
            trim(&wavy, alpha).unwrap()
        );
    }
}
