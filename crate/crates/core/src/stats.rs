//! Dataset geometry statistics: quantile-clipped histograms, COCO size
//! buckets before and after keep-ratio resizing, and image size census.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::coco::Dataset;
use crate::error::{Error, Result};
use crate::geometry::{keep_ratio_scale_exact, ImageSize, ResizeSpec};

/// COCO "small" upper bound, 32² px.
pub const SMALL_MAX_AREA: f64 = 32.0 * 32.0;
/// COCO "medium" upper bound, 96² px.
pub const MEDIUM_MAX_AREA: f64 = 96.0 * 96.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    AspectRatio,
    Area,
    Width,
    Height,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::AspectRatio => "aspect_ratio",
            Metric::Area => "area",
            Metric::Width => "width",
            Metric::Height => "height",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "aspect_ratio" => Ok(Metric::AspectRatio),
            "area" => Ok(Metric::Area),
            "width" => Ok(Metric::Width),
            "height" => Ok(Metric::Height),
            _ => Err(Error::InvalidArgument(format!("unknown metric `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub metric: Metric,
    pub bins: usize,
    pub q_low: f64,
    pub q_high: f64,
}

impl HistogramSpec {
    pub fn new(metric: Metric) -> Self {
        Self {
            metric,
            bins: 50,
            q_low: 0.01,
            q_high: 0.99,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 {
            return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
        }
        if !(0.0 <= self.q_low && self.q_low < self.q_high && self.q_high <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "clip quantiles ({}, {}) must satisfy 0 <= low < high <= 1",
                self.q_low, self.q_high
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub metric: Metric,
    pub clip_low: f64,
    pub clip_high: f64,
    /// `counts.len() + 1` edges; the last bin includes its upper edge.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Values inside the clip range (the histogram total).
    pub total: u64,
    /// Values excluded by the quantile clip.
    pub clipped: u64,
    /// Boxes without a finite value for the metric (zero-height boxes for
    /// the aspect ratio).
    pub skipped: u64,
}

impl Histogram {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_start,bin_end,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", self.edges[i], self.edges[i + 1], c);
        }
        s
    }
}

/// Sample quantile by linear interpolation between order statistics:
/// `h = (n - 1) p`, `q = x[floor h] + (h - floor h) (x[floor h + 1] - x[floor h])`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn metric_values(d: &Dataset, metric: Metric) -> Vec<f64> {
    d.annotations
        .iter()
        .map(|a| match metric {
            Metric::AspectRatio => a.bbox.aspect_ratio(),
            Metric::Area => a.bbox.area(),
            Metric::Width => a.bbox.width(),
            Metric::Height => a.bbox.height(),
        })
        .collect()
}

/// Equal-width histogram of one box metric over the range between two
/// sample quantiles. Values outside the range are left out entirely.
pub fn histogram(d: &Dataset, spec: &HistogramSpec) -> Result<Histogram> {
    spec.validate()?;
    let raw = metric_values(d, spec.metric);
    let mut values: Vec<f64> = raw.iter().copied().filter(|v| v.is_finite()).collect();
    let skipped = (raw.len() - values.len()) as u64;
    if values.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no boxes with a finite {} to histogram",
            spec.metric.name()
        )));
    }
    values.sort_by(f64::total_cmp);
    let lo = quantile_sorted(&values, spec.q_low);
    let hi = quantile_sorted(&values, spec.q_high);
    let kept: Vec<f64> = values.iter().copied().filter(|v| *v >= lo && *v <= hi).collect();
    let clipped = (values.len() - kept.len()) as u64;

    let (edges, counts) = if hi > lo {
        let bins = spec.bins;
        let width = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..bins).map(|i| lo + i as f64 * width).collect();
        edges.push(hi);
        let mut counts = vec![0u64; bins];
        for v in &kept {
            let i = (((v - lo) / width).floor() as usize).min(bins - 1);
            counts[i] += 1;
        }
        (edges, counts)
    } else {
        (vec![lo, hi], vec![kept.len() as u64])
    };

    Ok(Histogram {
        metric: spec.metric,
        clip_low: lo,
        clip_high: hi,
        edges,
        counts,
        total: kept.len() as u64,
        clipped,
        skipped,
    })
}

/// How box areas are rescaled before bucketing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum AreaScaling {
    None,
    /// Each image's own keep-ratio factor for the given target.
    PerImage { resize: ResizeSpec },
    /// One linear factor for every image.
    Fixed { scale: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketCounts {
    pub small: u64,
    pub medium: u64,
    pub large: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BucketShares {
    pub small: f64,
    pub medium: f64,
    pub large: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeBucketReport {
    pub scaling: AreaScaling,
    pub total: u64,
    pub counts: BucketCounts,
    /// Percentages; all zero for an empty dataset.
    pub percent: BucketShares,
}

pub fn bucket_of(area: f64) -> usize {
    if area < SMALL_MAX_AREA {
        0
    } else if area < MEDIUM_MAX_AREA {
        1
    } else {
        2
    }
}

/// COCO size-bucket distribution of the ground-truth areas after optional
/// rescaling.
pub fn size_buckets_scaled(d: &Dataset, scaling: AreaScaling) -> Result<SizeBucketReport> {
    let factors: HashMap<u64, f64> = match scaling {
        AreaScaling::None => HashMap::new(),
        AreaScaling::Fixed { scale } => {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "fixed scale {scale} must be positive"
                )));
            }
            HashMap::new()
        }
        AreaScaling::PerImage { resize } => d
            .images
            .iter()
            .map(|im| (im.id, keep_ratio_scale_exact(im.size, resize).area_factor()))
            .collect(),
    };
    let mut counts = [0u64; 3];
    for a in &d.annotations {
        let factor = match scaling {
            AreaScaling::None => 1.0,
            AreaScaling::Fixed { scale } => scale * scale,
            AreaScaling::PerImage { .. } => *factors.get(&a.image_id).ok_or_else(|| {
                Error::DanglingReference {
                    kind: "image",
                    id: a.image_id,
                    referrer: format!("annotation {}", a.id),
                }
            })?,
        };
        counts[bucket_of(a.area * factor)] += 1;
    }
    let total: u64 = counts.iter().sum();
    let pct = |c: u64| {
        if total == 0 {
            0.0
        } else {
            100.0 * c as f64 / total as f64
        }
    };
    Ok(SizeBucketReport {
        scaling,
        total,
        counts: BucketCounts {
            small: counts[0],
            medium: counts[1],
            large: counts[2],
        },
        percent: BucketShares {
            small: pct(counts[0]),
            medium: pct(counts[1]),
            large: pct(counts[2]),
        },
    })
}

pub fn size_buckets(d: &Dataset, resize: Option<ResizeSpec>) -> Result<SizeBucketReport> {
    size_buckets_scaled(
        d,
        match resize {
            Some(resize) => AreaScaling::PerImage { resize },
            None => AreaScaling::None,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeCount {
    pub width: u32,
    pub height: u32,
    pub count: u64,
}

/// Image resolutions with their frequency, most frequent first (ties by
/// width then height).
pub fn image_size_census(d: &Dataset) -> Vec<SizeCount> {
    let mut counts: HashMap<ImageSize, u64> = HashMap::new();
    for im in &d.images {
        *counts.entry(im.size).or_default() += 1;
    }
    let mut out: Vec<SizeCount> = counts
        .into_iter()
        .map(|(s, count)| SizeCount {
            width: s.width,
            height: s.height,
            count,
        })
        .collect();
    out.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then(a.width.cmp(&b.width))
            .then(a.height.cmp(&b.height))
    });
    out
}
