//! Greedy NMS and Soft-NMS (linear and Gaussian decay).
//!
//! Candidates are visited by descending effective score. Ties are broken by
//! larger area, then larger `x_min`, then larger `y_min`, then earlier input
//! position, so results never depend on the input permutation.
//!
//! Soft-NMS follows the classic formulation: after every selection the
//! remaining scores are decayed and the next pick is the current maximum.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coco::Detection;
use crate::error::{Error, Result};
use crate::geometry::{iou, ImageSize};
use crate::tiler::{backproject_detections, TileManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuppressionMethod {
    HardNms,
    SoftNmsLinear,
    SoftNmsGaussian,
}

impl std::str::FromStr for SuppressionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "hard-nms" | "nms" | "hard" => Ok(Self::HardNms),
            "soft-nms-linear" | "linear" => Ok(Self::SoftNmsLinear),
            "soft-nms-gaussian" | "gaussian" => Ok(Self::SoftNmsGaussian),
            _ => Err(Error::InvalidArgument(format!(
                "unknown suppression method `{s}`"
            ))),
        }
    }
}

/// Score used to rank candidates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scoring {
    /// Detector confidence.
    #[default]
    Confidence,
    /// Box area divided by the area basis; replaces the confidence in the
    /// output.
    NormalizedArea,
}

impl std::str::FromStr for Scoring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "confidence" => Ok(Self::Confidence),
            "normalized-area" => Ok(Self::NormalizedArea),
            _ => Err(Error::InvalidArgument(format!("unknown scoring `{s}`"))),
        }
    }
}

/// Denominator of the normalized-area score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AreaBasis {
    #[default]
    Image,
    MaxBox,
}

impl std::str::FromStr for AreaBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "image" => Ok(Self::Image),
            "max-box" => Ok(Self::MaxBox),
            _ => Err(Error::InvalidArgument(format!("unknown area basis `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuppressionConfig {
    pub method: SuppressionMethod,
    pub iou_threshold: f64,
    /// Gaussian decay parameter.
    pub sigma: f64,
    /// Soft-NMS drops candidates whose decayed score falls below this.
    pub score_floor: f64,
    pub scoring: Scoring,
    pub area_basis: AreaBasis,
    pub max_output: Option<usize>,
}

impl Default for SuppressionConfig {
    fn default() -> Self {
        Self {
            method: SuppressionMethod::HardNms,
            iou_threshold: 0.5,
            sigma: 0.5,
            score_floor: 1e-3,
            scoring: Scoring::Confidence,
            area_basis: AreaBasis::Image,
            max_output: None,
        }
    }
}

impl SuppressionConfig {
    pub fn hard(iou_threshold: f64) -> Self {
        Self {
            iou_threshold,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.iou_threshold) {
            return Err(Error::InvalidArgument(format!(
                "iou threshold {} outside [0, 1]",
                self.iou_threshold
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma {} must be positive",
                self.sigma
            )));
        }
        if !(0.0..1.0).contains(&self.score_floor) {
            return Err(Error::InvalidArgument(format!(
                "score floor {} outside [0, 1)",
                self.score_floor
            )));
        }
        Ok(())
    }

    /// Multiplicative decay applied to a candidate overlapping a selected
    /// box with the given IoU.
    pub fn decay(&self, overlap: f64) -> f64 {
        match self.method {
            SuppressionMethod::HardNms => {
                if overlap > self.iou_threshold {
                    0.0
                } else {
                    1.0
                }
            }
            SuppressionMethod::SoftNmsLinear => {
                if overlap > self.iou_threshold {
                    1.0 - overlap
                } else {
                    1.0
                }
            }
            SuppressionMethod::SoftNmsGaussian => (-(overlap * overlap) / self.sigma).exp(),
        }
    }
}

#[derive(Clone)]
struct Candidate {
    det: Detection,
    score: f64,
    index: usize,
}

/// `Less` when `a` should be visited before `b`.
fn visit_order(a: &Candidate, b: &Candidate) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| b.det.bbox.area().total_cmp(&a.det.bbox.area()))
        .then_with(|| b.det.bbox.x_min().total_cmp(&a.det.bbox.x_min()))
        .then_with(|| b.det.bbox.y_min().total_cmp(&a.det.bbox.y_min()))
        .then_with(|| a.index.cmp(&b.index))
}

fn effective_scores(
    dets: &[Detection],
    cfg: &SuppressionConfig,
    image_area: Option<f64>,
) -> Result<Vec<f64>> {
    match cfg.scoring {
        Scoring::Confidence => Ok(dets.iter().map(|d| d.score).collect()),
        Scoring::NormalizedArea => {
            let basis = match cfg.area_basis {
                AreaBasis::Image => image_area.ok_or_else(|| {
                    Error::InvalidArgument("normalized-area scoring needs the image area".into())
                })?,
                AreaBasis::MaxBox => dets.iter().map(|d| d.bbox.area()).fold(0.0, f64::max),
            };
            if basis.is_nan() || basis <= 0.0 {
                return Ok(vec![0.0; dets.len()]);
            }
            Ok(dets
                .iter()
                .map(|d| (d.bbox.area() / basis).min(1.0))
                .collect())
        }
    }
}

/// Suppresses duplicates among the detections of one image. Categories are
/// handled independently and never suppress each other; the output lists
/// categories in ascending id order, each in selection order.
pub fn suppress(
    dets: &[Detection],
    cfg: &SuppressionConfig,
    image_area: Option<f64>,
) -> Result<Vec<Detection>> {
    cfg.validate()?;
    let Some(first) = dets.first() else {
        return Ok(Vec::new());
    };
    if let Some(other) = dets.iter().find(|d| d.image_id != first.image_id) {
        return Err(Error::MixedImages {
            first: first.image_id,
            other: other.image_id,
        });
    }

    let mut by_category: BTreeMap<u64, Vec<Detection>> = BTreeMap::new();
    for d in dets {
        by_category.entry(d.category_id).or_default().push(d.clone());
    }
    let mut out = Vec::with_capacity(dets.len());
    for group in by_category.values() {
        let scores = effective_scores(group, cfg, image_area)?;
        let candidates = group
            .iter()
            .zip(scores)
            .enumerate()
            .map(|(index, (det, score))| Candidate {
                det: det.clone(),
                score,
                index,
            })
            .collect();
        let kept = match cfg.method {
            SuppressionMethod::HardNms => hard_nms(candidates, cfg),
            _ => soft_nms(candidates, cfg),
        };
        out.extend(kept);
    }
    Ok(out)
}

fn hard_nms(mut cands: Vec<Candidate>, cfg: &SuppressionConfig) -> Vec<Detection> {
    cands.sort_by(visit_order);
    let cap = cfg.max_output.unwrap_or(usize::MAX);
    let mut removed = vec![false; cands.len()];
    let mut kept = Vec::new();
    for i in 0..cands.len() {
        if removed[i] {
            continue;
        }
        if kept.len() == cap {
            break;
        }
        let anchor = cands[i].det.bbox;
        for j in i + 1..cands.len() {
            if !removed[j] && iou(&anchor, &cands[j].det.bbox) > cfg.iou_threshold {
                removed[j] = true;
            }
        }
        kept.push(Detection {
            score: cands[i].score,
            ..cands[i].det.clone()
        });
    }
    kept
}

fn soft_nms(mut pool: Vec<Candidate>, cfg: &SuppressionConfig) -> Vec<Detection> {
    let cap = cfg.max_output.unwrap_or(usize::MAX);
    pool.retain(|c| c.score >= cfg.score_floor);
    let mut kept = Vec::new();
    while !pool.is_empty() && kept.len() < cap {
        let best = (1..pool.len()).fold(0, |best, i| {
            if visit_order(&pool[i], &pool[best]) == Ordering::Less {
                i
            } else {
                best
            }
        });
        let chosen = pool.swap_remove(best);
        for c in pool.iter_mut() {
            c.score *= cfg.decay(iou(&chosen.det.bbox, &c.det.bbox));
        }
        pool.retain(|c| c.score >= cfg.score_floor);
        kept.push(Detection {
            score: chosen.score,
            ..chosen.det
        });
    }
    kept
}

/// Groups frame-level detections by image, suppresses each image
/// independently and concatenates the results in ascending image id order.
pub fn merge_frames(
    dets: Vec<Detection>,
    frame_sizes: &HashMap<u64, ImageSize>,
    cfg: &SuppressionConfig,
) -> Result<Vec<Detection>> {
    let mut by_frame: BTreeMap<u64, Vec<Detection>> = BTreeMap::new();
    for d in dets {
        by_frame.entry(d.image_id).or_default().push(d);
    }
    let groups: Vec<(u64, Vec<Detection>)> = by_frame.into_iter().collect();
    let merged: Vec<Vec<Detection>> = groups
        .par_iter()
        .map(|(id, group)| {
            let area = frame_sizes.get(id).map(ImageSize::area);
            suppress(group, cfg, area)
        })
        .collect::<Result<_>>()?;
    Ok(merged.into_iter().flatten().collect())
}

/// Tile-combine merging: back-projects tile detections through `manifest`
/// and suppresses duplicates per frame.
pub fn merge_tiled(
    tile_dets: &[Detection],
    manifest: &TileManifest,
    cfg: &SuppressionConfig,
) -> Result<Vec<Detection>> {
    let frame_dets = backproject_detections(tile_dets, manifest)?;
    merge_frames(frame_dets, &manifest.frame_sizes(), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;

    fn det(x0: f64, y0: f64, x1: f64, y1: f64, score: f64) -> Detection {
        Detection {
            image_id: 1,
            category_id: 1,
            bbox: BBox::new(x0, y0, x1, y1).unwrap(),
            score,
        }
    }

    #[test]
    fn hard_nms_drops_the_weaker_duplicate() {
        // IoU = 80 / 100 = 0.8
        let a = det(0., 0., 10., 10., 0.9);
        let b = det(0., 0., 10., 8., 0.8);
        let out = suppress(&[b, a.clone()], &SuppressionConfig::hard(0.5), None).unwrap();
        assert_eq!(out, vec![a]);
    }

    #[test]
    fn disjoint_boxes_survive_every_method() {
        let a = det(0., 0., 10., 10., 0.9);
        let b = det(20., 20., 30., 30., 0.8);
        for method in [
            SuppressionMethod::HardNms,
            SuppressionMethod::SoftNmsLinear,
            SuppressionMethod::SoftNmsGaussian,
        ] {
            let cfg = SuppressionConfig {
                method,
                ..SuppressionConfig::default()
            };
            let out = suppress(&[a.clone(), b.clone()], &cfg, None).unwrap();
            assert_eq!(out, vec![a.clone(), b.clone()], "{method:?}");
        }
    }

    #[test]
    fn linear_decay() {
        // IoU = 75 / 100
        let a = det(0., 0., 10., 10., 0.9);
        let b = det(0., 0., 10., 7.5, 0.8);
        let cfg = SuppressionConfig {
            method: SuppressionMethod::SoftNmsLinear,
            ..SuppressionConfig::default()
        };
        let out = suppress(&[a, b], &cfg, None).unwrap();
        assert_eq!(out.len(), 2);
        assert!((out[1].score - 0.2).abs() < 1e-12);
    }

    #[test]
    fn gaussian_decay_factor() {
        let cfg = SuppressionConfig {
            method: SuppressionMethod::SoftNmsGaussian,
            sigma: 0.5,
            ..SuppressionConfig::default()
        };
        assert!((cfg.decay(0.6) - 0.486_752_255_959_972).abs() < 1e-12);
        assert_eq!(cfg.decay(0.0), 1.0);
    }

    #[test]
    fn mixed_images_are_rejected() {
        let a = det(0., 0., 1., 1., 0.5);
        let b = Detection { image_id: 2, ..a.clone() };
        assert!(matches!(
            suppress(&[a, b], &SuppressionConfig::default(), None),
            Err(Error::MixedImages { first: 1, other: 2 })
        ));
    }

    #[test]
    fn normalized_area_needs_image_area() {
        let cfg = SuppressionConfig {
            scoring: Scoring::NormalizedArea,
            ..SuppressionConfig::default()
        };
        let a = det(0., 0., 10., 10., 0.1);
        assert!(suppress(std::slice::from_ref(&a), &cfg, None).is_err());
        let out = suppress(&[a], &cfg, Some(1000.0)).unwrap();
        assert_eq!(out[0].score, 0.1);
    }

    #[test]
    fn normalized_area_prefers_larger_boxes() {
        let cfg = SuppressionConfig {
            scoring: Scoring::NormalizedArea,
            area_basis: AreaBasis::MaxBox,
            ..SuppressionConfig::default()
        };
        let small = det(0., 0., 10., 9., 0.99);
        let big = det(0., 0., 10., 10., 0.1);
        let out = suppress(&[small, big.clone()], &cfg, None).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].bbox, big.bbox);
        assert_eq!(out[0].score, 1.0);
    }

    #[test]
    fn categories_do_not_suppress_each_other() {
        let a = det(0., 0., 10., 10., 0.9);
        let b = Detection { category_id: 2, score: 0.8, ..a.clone() };
        let out = suppress(&[b, a], &SuppressionConfig::default(), None).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].category_id, 1);
    }

    #[test]
    fn max_output_caps_results() {
        let dets: Vec<_> = (0..5)
            .map(|i| det(20. * i as f64, 0., 20. * i as f64 + 10., 10., 0.5))
            .collect();
        for method in [SuppressionMethod::HardNms, SuppressionMethod::SoftNmsGaussian] {
            let cfg = SuppressionConfig {
                method,
                max_output: Some(3),
                ..SuppressionConfig::default()
            };
            assert_eq!(suppress(&dets, &cfg, None).unwrap().len(), 3);
        }
    }

    #[test]
    fn ties_prefer_larger_boxes() {
        let small = det(0., 0., 10., 9., 1.0);
        let big = det(0., 0., 10., 10., 1.0);
        let out = suppress(&[small, big.clone()], &SuppressionConfig::default(), None).unwrap();
        assert_eq!(out, vec![big]);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let bad = SuppressionConfig { sigma: 0.0, ..SuppressionConfig::default() };
        assert!(suppress(&[], &bad, None).is_err());
        let bad = SuppressionConfig { iou_threshold: 1.5, ..SuppressionConfig::default() };
        assert!(bad.validate().is_err());
    }
}
