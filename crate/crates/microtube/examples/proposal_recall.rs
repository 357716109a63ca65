//! Anchor cuboids vs transition-derived anchor micro-tubes on dynamic
//! data: the learned support tracks moving actors, the cuboid baseline
//! cannot.
//!
//! Run with: cargo run --example proposal_recall

use microtube::proposals::{best_overlaps, enumerate_proposals, proposal_recall};
use microtube::pyramid::{build_pyramid, PyramidConfig};
use microtube::synth::{extract_microtubes, generate_dataset, MotionKind, MotionSpec};
use microtube::transition::{estimate, normalize, threshold, BinaryTransitions};

fn main() {
    let anchors = build_pyramid(&PyramidConfig::default()).unwrap();
    let spec = MotionSpec {
        kind: MotionKind::LinearDrift,
        velocity: 0.02,
        duration_range: (24, 32),
        frames_per_video: 36,
        ..MotionSpec::default()
    };
    let videos = generate_dataset(&spec, 100, 47).unwrap();
    let delta = 10;
    let gts: Vec<_> = videos
        .iter()
        .flat_map(|v| extract_microtubes(v, delta).unwrap())
        .collect();
    println!(
        "{} ground-truth micro-tubes, drift 0.02/frame, delta {delta} (displacement 0.2)\n",
        gts.len()
    );

    let learned = threshold(&normalize(&estimate(&gts, &anchors).unwrap()), 0.10).unwrap();
    let transition_props = enumerate_proposals(&learned, &anchors).unwrap();
    let cuboid_props =
        enumerate_proposals(&BinaryTransitions::diagonal(&anchors), &anchors).unwrap();
    println!(
        "proposals: {} transition-derived vs {} cuboids",
        transition_props.len(),
        cuboid_props.len()
    );

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!(
        "mean best overlap: transitions {:.4} vs cuboids {:.4}\n",
        mean(&best_overlaps(&gts, &transition_props)),
        mean(&best_overlaps(&gts, &cuboid_props))
    );

    println!("{:>6} {:>13} {:>9}", "delta", "transitions", "cuboids");
    for thresh in [0.3, 0.4, 0.5, 0.6, 0.7] {
        println!(
            "{:>6.2} {:>13.4} {:>9.4}",
            thresh,
            proposal_recall(&gts, &transition_props, thresh),
            proposal_recall(&gts, &cuboid_props, thresh)
        );
    }
}
