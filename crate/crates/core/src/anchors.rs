//! Dense anchor grids and how well they cover ground truth.
//!
//! Each pyramid level owns one stride; anchors are centered at
//! `((i + 0.5) * stride, (j + 0.5) * stride)` with base size
//! `stride * scale`. For aspect ratio `r` (height over width) the anchor is
//! `w = base / sqrt(r)`, `h = base * sqrt(r)`, so its area stays `base^2`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coco::Dataset;
use crate::error::{Error, Result};
use crate::geometry::{keep_ratio_scale_exact, BBox, ImageSize, ResizeSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorScheme {
    pub strides: Vec<u32>,
    pub scale: f64,
    pub aspect_ratios: Vec<f64>,
}

impl Default for AnchorScheme {
    fn default() -> Self {
        Self {
            strides: vec![4, 8, 16, 32, 64],
            scale: 8.0,
            aspect_ratios: vec![0.5, 1.0, 2.0],
        }
    }
}

impl AnchorScheme {
    pub fn new(strides: Vec<u32>, scale: f64, aspect_ratios: Vec<f64>) -> Result<Self> {
        let s = Self {
            strides,
            scale,
            aspect_ratios,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.strides.is_empty() || self.strides[0] == 0 {
            return Err(Error::InvalidArgument(
                "anchor strides must be non-empty and positive".into(),
            ));
        }
        if self.strides.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!(
                "anchor strides {:?} are not strictly increasing",
                self.strides
            )));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "anchor scale {} must be positive",
                self.scale
            )));
        }
        if self.aspect_ratios.is_empty()
            || self.aspect_ratios.iter().any(|r| !(*r > 0.0 && r.is_finite()))
        {
            return Err(Error::InvalidArgument(format!(
                "aspect ratios {:?} must be non-empty and positive",
                self.aspect_ratios
            )));
        }
        Ok(())
    }

    pub fn base_size(&self, stride: u32) -> f64 {
        stride as f64 * self.scale
    }

    /// `(width, height)` of the anchors of one level, one per aspect ratio.
    pub fn shapes(&self, stride: u32) -> Vec<(f64, f64)> {
        let base = self.base_size(stride);
        self.aspect_ratios
            .iter()
            .map(|r| {
                let k = r.sqrt();
                (base / k, base * k)
            })
            .collect()
    }
}

/// Anchor area of every level, `(stride * scale)^2`.
pub fn anchor_areas(scheme: &AnchorScheme) -> Vec<f64> {
    scheme
        .strides
        .iter()
        .map(|&s| {
            let base = scheme.base_size(s);
            base * base
        })
        .collect()
}

/// One pyramid level of anchors over an image, generated on demand.
#[derive(Debug, Clone)]
pub struct AnchorLevel {
    pub level: usize,
    pub stride: u32,
    pub cols: u32,
    pub rows: u32,
    shapes: Vec<(f64, f64)>,
}

impl AnchorLevel {
    pub fn count(&self) -> u64 {
        self.cols as u64 * self.rows as u64 * self.shapes.len() as u64
    }

    fn center(&self, i: u32) -> f64 {
        (i as f64 + 0.5) * self.stride as f64
    }

    /// Anchors in row-major center order, all ratios per center.
    pub fn anchors(&self) -> impl Iterator<Item = BBox> + '_ {
        (0..self.rows).flat_map(move |j| {
            (0..self.cols).flat_map(move |i| {
                let (cx, cy) = (self.center(i), self.center(j));
                self.shapes.iter().map(move |&(w, h)| {
                    BBox::new(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h)
                        .expect("anchor extents are positive")
                })
            })
        })
    }

    /// Largest overlap length along one axis between `[lo, hi]` and an
    /// anchor of extent `len` centered on this level's grid (`n` centers).
    ///
    /// The overlap is a trapezoid in the center position, flat on the
    /// interval where one segment contains the other, so the best grid
    /// center is one of the neighbours of that interval's ends.
    fn best_axis_overlap(&self, lo: f64, hi: f64, len: f64, n: u32) -> f64 {
        let s = self.stride as f64;
        let (a, b) = (lo + 0.5 * len, hi - 0.5 * len);
        let (flat_lo, flat_hi) = (a.min(b), a.max(b));
        let overlap = |i: i64| {
            let c = (i as f64 + 0.5) * s;
            ((c + 0.5 * len).min(hi) - (c - 0.5 * len).max(lo)).max(0.0)
        };
        let last = n as i64 - 1;
        let ia = (flat_lo / s - 0.5).floor() as i64;
        let ib = (flat_hi / s - 0.5).floor() as i64;
        [ia, ia + 1, ib, ib + 1]
            .into_iter()
            .map(|i| overlap(i.clamp(0, last)))
            .fold(0.0, f64::max)
    }

    /// Exact best IoU between `gt` and any anchor of this level.
    pub fn max_iou(&self, gt: &BBox) -> f64 {
        let ga = gt.area();
        if ga <= 0.0 {
            return 0.0;
        }
        self.shapes
            .iter()
            .map(|&(w, h)| {
                let ix = self.best_axis_overlap(gt.x_min(), gt.x_max(), w, self.cols);
                let iy = self.best_axis_overlap(gt.y_min(), gt.y_max(), h, self.rows);
                let inter = ix * iy;
                if inter <= 0.0 {
                    0.0
                } else {
                    inter / (ga + w * h - inter)
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Anchor levels for an image. Each level yields
/// `ceil(W / stride) * ceil(H / stride) * ratios` anchors.
pub fn generate_anchors(size: ImageSize, scheme: &AnchorScheme) -> Vec<AnchorLevel> {
    scheme
        .strides
        .iter()
        .enumerate()
        .map(|(level, &stride)| AnchorLevel {
            level,
            stride,
            cols: size.width.div_ceil(stride),
            rows: size.height.div_ceil(stride),
            shapes: scheme.shapes(stride),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtCoverage {
    pub annotation_id: u64,
    pub max_iou: f64,
    pub best_level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageAt {
    pub iou: f64,
    /// `None` when there is no ground truth to cover.
    pub fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub scheme: AnchorScheme,
    pub resize: Option<ResizeSpec>,
    pub anchor_areas: Vec<f64>,
    pub num_gt: usize,
    /// Set when the dataset has no ground truth and the fractions are
    /// meaningless.
    pub vacuous: bool,
    pub mean_max_iou: Option<f64>,
    pub coverage: Vec<CoverageAt>,
    /// Anchors per level, summed over images.
    pub level_anchor_counts: Vec<u64>,
    /// Number of boxes whose best anchor lives on each level.
    pub best_level_histogram: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_gt: Vec<GtCoverage>,
}

impl CoverageReport {
    /// Fraction of boxes whose best anchor reaches `tau`.
    pub fn coverage_at(&self, tau: f64) -> Option<f64> {
        if self.per_gt.is_empty() {
            return None;
        }
        let hit = self.per_gt.iter().filter(|g| g.max_iou >= tau).count();
        Some(hit as f64 / self.per_gt.len() as f64)
    }
}

pub const REPORTED_IOUS: [f64; 2] = [0.5, 0.7];

/// Best anchor IoU of every ground-truth box. With `resize`, each image and
/// its boxes are first rescaled by that image's keep-ratio factor.
pub fn coverage(d: &Dataset, scheme: &AnchorScheme, resize: Option<ResizeSpec>) -> Result<CoverageReport> {
    scheme.validate()?;
    let by_image = d.annotations_by_image();
    let levels = scheme.strides.len();

    let per_image: Vec<(Vec<u64>, Vec<GtCoverage>)> = d
        .images
        .par_iter()
        .map(|im| {
            let (size, factor) = match resize {
                Some(spec) => {
                    let s = keep_ratio_scale_exact(im.size, spec);
                    (s.resized_size(im.size), s.factor())
                }
                None => (im.size, 1.0),
            };
            let grid = generate_anchors(size, scheme);
            let counts = grid.iter().map(AnchorLevel::count).collect();
            let gts = by_image
                .get(&im.id)
                .map(|anns| {
                    anns.iter()
                        .map(|a| {
                            let b = if factor == 1.0 {
                                a.bbox
                            } else {
                                a.bbox.scale(factor).expect("positive scale keeps box valid")
                            };
                            let (best_level, max_iou) = grid.iter().map(|l| l.max_iou(&b)).enumerate().fold(
                                (0, 0.0),
                                |best, (lvl, v)| if v > best.1 { (lvl, v) } else { best },
                            );
                            GtCoverage {
                                annotation_id: a.id,
                                max_iou,
                                best_level,
                            }
                        })
                        .collect()
                })
                .unwrap_or_default();
            (counts, gts)
        })
        .collect();

    let mut level_anchor_counts = vec![0u64; levels];
    let mut per_gt = Vec::with_capacity(d.annotations.len());
    for (counts, gts) in per_image {
        for (acc, c) in level_anchor_counts.iter_mut().zip(counts) {
            *acc += c;
        }
        per_gt.extend(gts);
    }
    let mut best_level_histogram = vec![0u64; levels];
    for g in &per_gt {
        best_level_histogram[g.best_level] += 1;
    }

    let mut report = CoverageReport {
        scheme: scheme.clone(),
        resize,
        anchor_areas: anchor_areas(scheme),
        num_gt: per_gt.len(),
        vacuous: per_gt.is_empty(),
        mean_max_iou: None,
        coverage: Vec::new(),
        level_anchor_counts,
        best_level_histogram,
        per_gt,
    };
    if !report.vacuous {
        report.mean_max_iou =
            Some(report.per_gt.iter().map(|g| g.max_iou).sum::<f64>() / report.num_gt as f64);
    }
    report.coverage = REPORTED_IOUS
        .iter()
        .map(|&iou| CoverageAt {
            iou,
            fraction: report.coverage_at(iou),
        })
        .collect();
    Ok(report)
}
