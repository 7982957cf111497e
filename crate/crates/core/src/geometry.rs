//! Axis-aligned boxes in continuous pixel coordinates and keep-ratio resize
//! arithmetic.
//!
//! Boxes are stored in corner form `(x_min, y_min, x_max, y_max)` with x
//! growing to the right and y growing downwards. COCO's `[x, y, w, h]` only
//! exists at the file boundary (see [`crate::coco`]).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl fmt::Debug for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "BBox({}, {}, {}, {})",
            self.x_min, self.y_min, self.x_max, self.y_max
        )
    }
}

impl BBox {
    /// Builds a box from corners. Zero-area boxes are allowed, negative
    /// extents and non-finite coordinates are not.
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        if ![x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidBox(format!(
                "non-finite coordinate in ({x_min}, {y_min}, {x_max}, {y_max})"
            )));
        }
        if x_max < x_min || y_max < y_min {
            return Err(Error::InvalidBox(format!(
                "negative extent in ({x_min}, {y_min}, {x_max}, {y_max})"
            )));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// Builds a box from COCO `[x, y, width, height]`.
    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if w < 0.0 || h < 0.0 {
            return Err(Error::InvalidBox(format!(
                "negative extent in xywh ({x}, {y}, {w}, {h})"
            )));
        }
        Self::new(x, y, x + w, y + h)
    }

    pub fn to_xywh(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.width(), self.height()]
    }

    /// Full-frame rectangle of an image.
    pub fn frame(size: ImageSize) -> Self {
        Self {
            x_min: 0.0,
            y_min: 0.0,
            x_max: size.width as f64,
            y_max: size.height as f64,
        }
    }

    #[inline]
    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    #[inline]
    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    #[inline]
    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    #[inline]
    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    #[inline]
    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Width over height. Infinite or NaN for boxes with zero height.
    pub fn aspect_ratio(&self) -> f64 {
        self.width() / self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    /// Overlap rectangle of two boxes, `None` when their interiors are
    /// disjoint. Boxes touching along an edge do not overlap.
    pub fn intersect(&self, other: &BBox) -> Option<BBox> {
        let x_min = self.x_min.max(other.x_min);
        let y_min = self.y_min.max(other.y_min);
        let x_max = self.x_max.min(other.x_max);
        let y_max = self.y_max.min(other.y_max);
        if x_max > x_min && y_max > y_min {
            Some(BBox {
                x_min,
                y_min,
                x_max,
                y_max,
            })
        } else {
            None
        }
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        iou(self, other)
    }

    /// True when `other` lies entirely inside `self` (edges may coincide).
    pub fn contains(&self, other: &BBox) -> bool {
        other.x_min >= self.x_min
            && other.y_min >= self.y_min
            && other.x_max <= self.x_max
            && other.y_max <= self.y_max
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Result<BBox> {
        BBox::new(
            self.x_min + dx,
            self.y_min + dy,
            self.x_max + dx,
            self.y_max + dy,
        )
    }

    /// Scales about the origin. `s` must be non-negative.
    pub fn scale(&self, s: f64) -> Result<BBox> {
        if s.is_nan() || s < 0.0 {
            return Err(Error::InvalidBox(format!("scale factor {s} is negative")));
        }
        BBox::new(
            self.x_min * s,
            self.y_min * s,
            self.x_max * s,
            self.y_max * s,
        )
    }

    /// Clamps the box into `[0, w] x [0, h]`. A box lying entirely outside
    /// collapses to a zero-area box on the border.
    pub fn clamp_to(&self, size: ImageSize) -> BBox {
        let w = size.width as f64;
        let h = size.height as f64;
        let x_min = self.x_min.clamp(0.0, w);
        let y_min = self.y_min.clamp(0.0, h);
        BBox {
            x_min,
            y_min,
            x_max: self.x_max.clamp(x_min, w),
            y_max: self.y_max.clamp(y_min, h),
        }
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

/// Intersection over union; 0 when the union is empty.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

impl ImageSize {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "image size {width}x{height} must be positive"
            )));
        }
        Ok(Self { width, height })
    }

    pub fn area(&self) -> f64 {
        self.width as f64 * self.height as f64
    }

    pub fn long_side(&self) -> u32 {
        self.width.max(self.height)
    }

    pub fn short_side(&self) -> u32 {
        self.width.min(self.height)
    }
}

impl fmt::Display for ImageSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// Target of a keep-ratio resize: the long image side is bounded by
/// `long_side`, the short one by `short_side`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResizeSpec {
    pub long_side: u32,
    pub short_side: u32,
}

impl ResizeSpec {
    pub fn new(long_side: u32, short_side: u32) -> Result<Self> {
        if short_side == 0 || long_side < short_side {
            return Err(Error::InvalidArgument(format!(
                "resize spec needs long >= short >= 1, got {long_side}x{short_side}"
            )));
        }
        Ok(Self {
            long_side,
            short_side,
        })
    }
}

impl fmt::Display for ResizeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.long_side, self.short_side)
    }
}

/// Parses `AxB`; the larger number becomes the long side, so `1088x816` and
/// `816x1088` are the same spec.
impl FromStr for ResizeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("resize spec `{s}` is not of the form AxB"));
        let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        let a: u32 = a.trim().parse().map_err(|_| bad())?;
        let b: u32 = b.trim().parse().map_err(|_| bad())?;
        ResizeSpec::new(a.max(b), a.min(b))
    }
}

/// Exact rational scale factor `num / den` produced by a keep-ratio resize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResizeScale {
    pub num: u64,
    pub den: u64,
}

impl ResizeScale {
    pub fn factor(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `factor()^2`, correctly rounded from the exact rational.
    pub fn area_factor(&self) -> f64 {
        (self.num * self.num) as f64 / (self.den * self.den) as f64
    }

    pub fn resized_size(&self, src: ImageSize) -> ImageSize {
        ImageSize {
            width: round_scaled(src.width, *self).max(1),
            height: round_scaled(src.height, *self).max(1),
        }
    }
}

/// `round(len * num / den)` with halves rounded away from zero, in exact
/// integer arithmetic. The only rounding rule used for resized dimensions.
pub fn round_scaled(len: u32, scale: ResizeScale) -> u32 {
    let n = 2 * len as u64 * scale.num + scale.den;
    (n / (2 * scale.den)) as u32
}

/// Scale of a keep-ratio resize as an exact fraction: the smaller of
/// `long_side / max(w, h)` and `short_side / min(w, h)`. Upscaling (> 1) is
/// allowed.
pub fn keep_ratio_scale_exact(src: ImageSize, spec: ResizeSpec) -> ResizeScale {
    let long = ResizeScale {
        num: spec.long_side as u64,
        den: src.long_side() as u64,
    };
    let short = ResizeScale {
        num: spec.short_side as u64,
        den: src.short_side() as u64,
    };
    // a/b <= c/d  <=>  a*d <= c*b
    if long.num * short.den <= short.num * long.den {
        long
    } else {
        short
    }
}

pub fn keep_ratio_scale(src: ImageSize, spec: ResizeSpec) -> f64 {
    keep_ratio_scale_exact(src, spec).factor()
}
