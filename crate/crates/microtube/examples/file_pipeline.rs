//! The whole batch pipeline through the documented file formats, exactly
//! as the `microtube` binary runs it: gen -> estimate -> threshold ->
//! propose -> detect -> link -> trim -> eval.
//!
//! Run with: cargo run --example file_pipeline

use microtube::cli::{
    run_estimate, run_eval, run_link, run_propose, run_synth_detect, run_synth_gen, run_threshold,
    run_trim, write_default_pyramid_config, AugmentKind, EstimateArgs, EvalArgs, LinkArgs,
    MotionKindArg, ProposeArgs, SynthDetectArgs, SynthGenArgs, ThresholdArgs, TrimArgs,
};
use microtube::formats::{read_json, ReportFile};

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);

    write_default_pyramid_config(&p("pyramid.toml")).unwrap();

    run_synth_gen(&SynthGenArgs {
        kind: MotionKindArg::LinearDrift,
        velocity: 0.01,
        direction: None,
        size_min: 0.3,
        size_max: 0.45,
        class: 0,
        duration_min: 14,
        duration_max: 20,
        frames: 24,
        annotate_every: 1,
        instances: 1,
        videos: 10,
        seed: 42,
        dataset: "demo".into(),
        out: p("anns.json"),
    })
    .unwrap();

    run_estimate(&EstimateArgs {
        annotations: p("anns.json"),
        delta: 2,
        config: p("pyramid.toml"),
        out: p("matrix.json"),
        counts: false,
    })
    .unwrap();

    run_threshold(&ThresholdArgs {
        matrix: p("matrix.json"),
        tau: 0.10,
        augment: vec![AugmentKind::Diagonal],
        out: p("bin.json"),
    })
    .unwrap();

    run_propose(&ProposeArgs {
        bin: p("bin.json"),
        config: p("pyramid.toml"),
        out: p("proposals.jsonl"),
    })
    .unwrap();

    run_synth_detect(&SynthDetectArgs {
        annotations: p("anns.json"),
        config: p("pyramid.toml"),
        bin: p("bin.json"),
        delta: 2,
        sigma: 0.005,
        true_score: 0.92,
        distractor_rate: 0.5,
        classes: 1,
        seed: 9,
        out: p("dets.jsonl"),
    })
    .unwrap();

    run_link(&LinkArgs {
        dets: p("dets.jsonl"),
        params: None,
        out: p("paths.jsonl"),
    })
    .unwrap();

    run_trim(&TrimArgs {
        paths: p("paths.jsonl"),
        alpha: 0.5,
        out: p("trimmed.jsonl"),
    })
    .unwrap();

    run_eval(&EvalArgs {
        paths: p("trimmed.jsonl"),
        gt: p("anns.json"),
        deltas: vec![0.2, 0.5, 0.75],
        avg: true,
        trimmed_protocol: false,
        report: p("report.json"),
    })
    .unwrap();

    for name in [
        "anns.json",
        "matrix.json",
        "bin.json",
        "proposals.jsonl",
        "dets.jsonl",
        "paths.jsonl",
        "trimmed.jsonl",
        "report.json",
    ] {
        let bytes = std::fs::metadata(p(name)).unwrap().len();
        println!("{name:<16} {bytes:>9} bytes");
    }

    let report: ReportFile = read_json(&p("report.json")).unwrap();
    println!(
        "\navg-mAP {:?}, accuracy {}",
        report.avg_map, report.accuracy
    );
}
