//! Anchor micro-tube machinery for spatiotemporal action detection, with a
//! synthetic oracle in place of the detection network.
//!
//! A micro-tube is a pair of boxes `delta` frames apart. The toolkit
//! estimates per-pyramid-level transition matrices between anchor-grid
//! cells from ground-truth micro-tubes, thresholds them into a sparse set
//! of anchor micro-tube proposals (optionally augmented for translation
//! invariance at test time), links scored detections into action paths,
//! trims paths temporally by dynamic programming, and scores everything
//! with video-mAP.
//!
//! The `examples/` directory carries one runnable program per capability;
//! the `microtube` binary wires the same stages into a batch pipeline over
//! the documented file formats.
//!
//! ```
//! use microtube::pyramid::{build_pyramid, PyramidConfig};
//! use microtube::synth::{generate_dataset, extract_microtubes, MotionSpec};
//! use microtube::transition::{estimate, normalize, threshold};
//!
//! let anchors = build_pyramid(&PyramidConfig::default()).unwrap();
//! let videos = generate_dataset(&MotionSpec::default(), 10, 7).unwrap();
//! let gts: Vec<_> = videos
//!     .iter()
//!     .flat_map(|v| extract_microtubes(v, 1).unwrap())
//!     .collect();
//! let matrix = normalize(&estimate(&gts, &anchors).unwrap());
//! let binary = threshold(&matrix, 0.10).unwrap();
//! assert!(binary.is_diagonal_only()); // static data stays on the diagonal
//! ```

pub mod cli;
pub mod error;
pub mod eval;
pub mod formats;
pub mod geometry;
pub mod linking;
pub mod proposals;
pub mod pyramid;
pub mod synth;
pub mod transition;

pub use error::{Error, Result};
pub use geometry::{iou, microtube_overlap, BBox, MicroTube};
pub use linking::{ActionPath, LinkParams, ScoredMicroTube};
pub use proposals::AnchorMicroTube;
pub use pyramid::{build_pyramid, AnchorSet, PyramidConfig};
pub use synth::{MotionKind, MotionSpec, VideoAnnotation};
pub use transition::{BinaryTransitions, TransitionCounts, TransitionMatrix};
