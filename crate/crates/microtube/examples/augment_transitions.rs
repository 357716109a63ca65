//! Test-time support augmentation: diagonal, 8-neighborhood, and
//! relative-offset replay, starting from a learned sparse support.
//!
//! Run with: cargo run --example augment_transitions

use microtube::pyramid::{build_pyramid, PyramidConfig};
use microtube::synth::{extract_microtubes, generate_dataset, MotionKind, MotionSpec};
use microtube::transition::{
    augment_diagonal, augment_neighbors, augment_relative_offsets, estimate, normalize, threshold,
};

fn main() {
    let anchors = build_pyramid(&PyramidConfig::default()).unwrap();
    let spec = MotionSpec {
        kind: MotionKind::LinearDrift,
        velocity: 0.01,
        duration_range: (20, 28),
        frames_per_video: 30,
        ..MotionSpec::default()
    };
    let videos = generate_dataset(&spec, 40, 3).unwrap();
    let gts: Vec<_> = videos
        .iter()
        .flat_map(|v| extract_microtubes(v, 5).unwrap())
        .collect();
    let learned = threshold(&normalize(&estimate(&gts, &anchors).unwrap()), 0.10).unwrap();

    let report = |name: &str, b: &microtube::BinaryTransitions| {
        let (per_level, total) = b.cardinality();
        println!(
            "{name:<18} M = {total:>6}   off-diagonal = {:>6}   per level {per_level:?}",
            b.off_diagonal_count()
        );
    };

    report("learned (tau=0.1)", &learned);
    report("+ diagonal", &augment_diagonal(&learned));
    report("+ neighbors", &augment_neighbors(&learned));
    let offsets = augment_relative_offsets(&learned);
    report("+ rel. offsets", &offsets);

    // the offset augmentation is closed under translation: replaying it
    // again adds nothing
    assert_eq!(augment_relative_offsets(&offsets), offsets);
    println!("\nrelative-offset augmentation is idempotent (translation closure)");
}
