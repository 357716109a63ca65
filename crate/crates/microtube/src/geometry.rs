//! Axis-aligned boxes and micro-tubes: IoU, micro-tube overlap, translation,
//! clamping.
//!
//! Coordinates are unit-agnostic: normalized [0,1] image coordinates and pixel
//! coordinates go through the same arithmetic. All functions here are pure and
//! safe to call concurrently.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Axis-aligned rectangle stored as `[x_min, y_min, x_max, y_max]`.
///
/// Zero-area boxes are legal; their IoU against anything is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

// Boxes travel through every file format as plain [x1, y1, x2, y2] arrays.
impl Serialize for BBox {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.as_array().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let a = <[f64; 4]>::deserialize(deserializer)?;
        BBox::from_array(a).map_err(serde::de::Error::custom)
    }
}

impl BBox {
    /// Builds a box, rejecting inverted or non-finite coordinates.
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = BBox {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        if ![x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidBox {
                reason: format!("non-finite coordinate in [{x_min}, {y_min}, {x_max}, {y_max}]"),
            });
        }
        if x_min > x_max || y_min > y_max {
            return Err(Error::InvalidBox {
                reason: format!("inverted extents in [{x_min}, {y_min}, {x_max}, {y_max}]"),
            });
        }
        Ok(b)
    }

    /// Box from center, width and height.
    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        BBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
        )
    }

    /// Shifts every coordinate by `(dx, dy)`.
    pub fn translate(&self, dx: f64, dy: f64) -> BBox {
        BBox {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
        }
    }

    /// Clips the box to the unit square. Extents may collapse to zero area.
    pub fn clip_unit(&self) -> BBox {
        let x_min = self.x_min.clamp(0.0, 1.0);
        let y_min = self.y_min.clamp(0.0, 1.0);
        BBox {
            x_min,
            y_min,
            x_max: self.x_max.clamp(x_min, 1.0),
            y_max: self.y_max.clamp(y_min, 1.0),
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    pub fn from_array(a: [f64; 4]) -> Result<Self> {
        BBox::new(a[0], a[1], a[2], a[3])
    }
}

/// Intersection-over-union of two boxes.
///
/// Total on valid boxes: returns 0 when the union has zero area.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let iy = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// A pair of temporally linked boxes `delta` frames apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicroTube {
    pub frame_start: u32,
    pub delta: u32,
    pub box_start: BBox,
    pub box_end: BBox,
}

impl MicroTube {
    /// Builds a micro-tube; `delta` must be >= 1. Single-frame annotations are
    /// represented by duplicating the box across a positive gap, never by
    /// `delta = 0`.
    pub fn new(frame_start: u32, delta: u32, box_start: BBox, box_end: BBox) -> Result<Self> {
        if delta == 0 {
            return Err(Error::InvalidMicroTube {
                reason: "delta must be >= 1".to_string(),
            });
        }
        Ok(MicroTube {
            frame_start,
            delta,
            box_start,
            box_end,
        })
    }

    pub fn frame_end(&self) -> u32 {
        self.frame_start + self.delta
    }
}

/// Spatio-temporal overlap of two micro-tubes: the arithmetic mean of the two
/// endpoint-frame IoUs. Only the endpoint boxes are compared, so the deltas of
/// the operands may differ.
pub fn microtube_overlap(a: &MicroTube, b: &MicroTube) -> f64 {
    (iou(&a.box_start, &b.box_start) + iou(&a.box_end, &b.box_end)) / 2.0
}
