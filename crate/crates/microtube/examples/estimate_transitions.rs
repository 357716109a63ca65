//! Estimate transition matrices from a drifting synthetic dataset and watch
//! off-diagonal mass appear as the frame gap grows.
//!
//! Run with: cargo run --example estimate_transitions

use microtube::pyramid::{build_pyramid, PyramidConfig};
use microtube::synth::{extract_microtubes, generate_dataset, MotionKind, MotionSpec};
use microtube::transition::{estimate, normalize, threshold};

fn main() {
    let anchors = build_pyramid(&PyramidConfig::default()).unwrap();
    let spec = MotionSpec {
        kind: MotionKind::LinearDrift,
        velocity: 0.004,
        direction: Some(0.0),
        duration_range: (40, 48),
        frames_per_video: 50,
        ..MotionSpec::default()
    };
    let videos = generate_dataset(&spec, 60, 7).unwrap();
    println!(
        "dataset: {} videos, rightward drift at 0.004 image/frame\n",
        videos.len()
    );

    println!(
        "{:>5} {:>12} {:>10} {:>14} {:>12}",
        "delta", "micro-tubes", "entries", "off-diagonal", "support M"
    );
    for delta in [1u32, 5, 10, 20] {
        let gts: Vec<_> = videos
            .iter()
            .flat_map(|v| extract_microtubes(v, delta).unwrap())
            .collect();
        let counts = estimate(&gts, &anchors).unwrap();
        let matrix = normalize(&counts);
        let entries: usize = matrix.levels().iter().map(|l| l.entries.len()).sum();
        let binary = threshold(&matrix, 0.10).unwrap();
        let (_, support) = binary.cardinality();
        println!(
            "{:>5} {:>12} {:>10} {:>14} {:>12}",
            delta,
            gts.len(),
            entries,
            binary.off_diagonal_count(),
            support
        );
    }

    println!("\nrows stay stochastic: every nonzero row sums to 1 (checked on delta=10)");
    let gts: Vec<_> = videos
        .iter()
        .flat_map(|v| extract_microtubes(v, 10).unwrap())
        .collect();
    let matrix = normalize(&estimate(&gts, &anchors).unwrap());
    let worst = matrix
        .row_sums()
        .values()
        .map(|s| (s - 1.0).abs())
        .fold(0.0, f64::max);
    println!("max row-sum deviation: {worst:.2e}");
}
