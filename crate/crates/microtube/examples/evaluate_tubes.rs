//! Score linked tubes with video-mAP across thresholds, avg-mAP, and
//! tube-based classification accuracy.
//!
//! Run with: cargo run --example evaluate_tubes

use microtube::eval::{avg_map, avg_map_deltas, classification_accuracy, video_map};
use microtube::linking::{group_by_start, link, split_into_chains, LinkParams};
use microtube::pyramid::{build_pyramid, PyramidConfig};
use microtube::synth::{
    extract_microtubes, generate_dataset, simulate_detections, DetectionNoise, MotionKind,
    MotionSpec,
};
use microtube::transition::{estimate, normalize, threshold};

fn main() {
    let anchors = build_pyramid(&PyramidConfig::default()).unwrap();

    // two classes with different motion statistics
    let mut videos = Vec::new();
    for (class, velocity) in [(0usize, 0.0), (1usize, 0.012)] {
        let spec = MotionSpec {
            kind: if velocity == 0.0 {
                MotionKind::Static
            } else {
                MotionKind::LinearDrift
            },
            velocity,
            size_range: (0.35, 0.5),
            class_id: class,
            duration_range: (16, 22),
            frames_per_video: 26,
            ..MotionSpec::default()
        };
        let mut batch = generate_dataset(&spec, 8, 100 + class as u64).unwrap();
        for v in &mut batch {
            v.id = format!("c{class}_{}", v.id);
        }
        videos.extend(batch);
    }

    let gts: Vec<_> = videos
        .iter()
        .flat_map(|v| extract_microtubes(v, 1).unwrap())
        .collect();
    let learned = threshold(&normalize(&estimate(&gts, &anchors).unwrap()), 0.10).unwrap();
    let noise = DetectionNoise {
        jitter_sigma: 0.008,
        true_class_score: 0.9,
        distractor_rate: 0.3,
    };
    let dets = simulate_detections(&videos, &anchors, &learned, &noise, 1, 2, 21).unwrap();

    let mut det_paths = Vec::new();
    for (video, list) in &dets {
        for chain in split_into_chains(group_by_start(list)) {
            for class in 0..2 {
                for path in link(&chain, &LinkParams::default(), class).unwrap() {
                    det_paths.push((video.clone(), path));
                }
            }
        }
    }
    let gt_paths: Vec<_> = videos
        .iter()
        .flat_map(|v| v.dense_paths().into_iter().map(|p| (v.id.clone(), p)))
        .collect();

    println!(
        "{:>6} {:>8} {:>10} {:>10}",
        "delta", "mAP", "AP class0", "AP class1"
    );
    for delta in avg_map_deltas() {
        let r = video_map(&det_paths, &gt_paths, delta);
        println!(
            "{:>6.2} {:>8.4} {:>10.4} {:>10.4}",
            delta, r.map, r.per_class_ap[&0], r.per_class_ap[&1]
        );
    }
    println!("\navg-mAP:  {:.4}", avg_map(&det_paths, &gt_paths));
    println!(
        "accuracy: {:.4}",
        classification_accuracy(&det_paths, &gt_paths)
    );
}
