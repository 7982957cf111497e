//! COCO-protocol bounding-box evaluation.
//!
//! Per image and category, detections are sorted by descending score
//! (stable), truncated to the largest `max_dets`, and greedily matched: each
//! detection takes the unmatched ground truth with the highest IoU at or
//! above the threshold, preferring non-ignored ground truth. Crowd boxes act
//! as ignore regions that may absorb any number of detections. Precision is
//! made monotone from the right and sampled on a fixed recall grid; AP is
//! the mean of the samples. Metrics undefined for lack of ground truth are
//! reported as 0 with a warning.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coco::{self, Dataset, Detection, GroundTruthAnnotation};
use crate::error::{Error, Result};
use crate::geometry::BBox;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl AreaRange {
    fn new(name: &str, min: f64, max: f64) -> Self {
        Self {
            name: name.to_owned(),
            min,
            max,
        }
    }

    fn contains(&self, area: f64) -> bool {
        area >= self.min && area <= self.max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub iou_thresholds: Vec<f64>,
    pub recall_points: usize,
    pub max_dets: Vec<usize>,
    /// The first range is the one used for the headline metrics.
    pub area_ranges: Vec<AreaRange>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_thresholds: (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect(),
            recall_points: 101,
            max_dets: vec![1, 10, 300],
            area_ranges: vec![
                AreaRange::new("all", 0.0, 1e10),
                AreaRange::new("small", 0.0, 32.0 * 32.0),
                AreaRange::new("medium", 32.0 * 32.0, 96.0 * 96.0),
                AreaRange::new("large", 96.0 * 96.0, 1e10),
            ],
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.iou_thresholds;
        if t.is_empty() || t.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) || t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!(
                "IoU thresholds {t:?} must be strictly increasing within (0, 1]"
            )));
        }
        let m = &self.max_dets;
        if m.is_empty() || m[0] == 0 || m.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!(
                "max dets {m:?} must be strictly increasing positive integers"
            )));
        }
        if self.recall_points < 2 {
            return Err(Error::InvalidArgument("need at least two recall points".into()));
        }
        if self.area_ranges.is_empty() {
            return Err(Error::InvalidArgument("need at least one area range".into()));
        }
        Ok(())
    }

    /// Recall sample points `i / (n - 1)`.
    pub fn recall_grid(&self) -> Vec<f64> {
        let n = self.recall_points - 1;
        (0..=n).map(|i| i as f64 / n as f64).collect()
    }

    fn threshold_index(&self, iou: f64) -> Option<usize> {
        self.iou_thresholds.iter().position(|t| (t - iou).abs() < 1e-12)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallAt {
    pub max_dets: usize,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaMetrics {
    pub area: String,
    pub ap: f64,
    pub ar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub iou: f64,
    /// Interpolated precision on the recall grid, averaged over categories.
    pub precision: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub map: f64,
    pub ap50: Option<f64>,
    pub ap75: Option<f64>,
    pub ar: Vec<RecallAt>,
    /// AP and AR per area range at the largest `max_dets`.
    pub by_area: Vec<AreaMetrics>,
    pub pr_curves: Vec<PrCurve>,
    pub num_images: usize,
    pub num_gt: usize,
    pub num_dets: usize,
    pub warnings: Vec<String>,
}

impl EvalResult {
    pub fn ar_at(&self, max_dets: usize) -> Option<f64> {
        self.ar.iter().find(|r| r.max_dets == max_dets).map(|r| r.recall)
    }

    /// AR at the largest `max_dets`.
    pub fn ar_max(&self) -> f64 {
        self.ar.last().map(|r| r.recall).unwrap_or(0.0)
    }
}

impl fmt::Display for EvalResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
        let last = self.ar.last().map(|r| r.max_dets).unwrap_or(0);
        let ar_head = format!("AR^{last}");
        writeln!(f, "{:>8}  {:>8}  {:>8}  {:>8}", "mAP", "AP@0.5", "AP@0.75", ar_head)?;
        writeln!(
            f,
            "{:>8.3}  {:>8}  {:>8}  {:>8.3}",
            self.map,
            opt(self.ap50),
            opt(self.ap75),
            self.ar_max()
        )?;
        writeln!(f)?;
        for a in &self.by_area {
            writeln!(f, "  AP  area={:<7} maxDets={:<4} {:.3}", a.area, last, a.ap)?;
        }
        for r in &self.ar {
            writeln!(f, "  AR  area={:<7} maxDets={:<4} {:.3}", "all", r.max_dets, r.recall)?;
        }
        for a in self.by_area.iter().skip(1) {
            writeln!(f, "  AR  area={:<7} maxDets={:<4} {:.3}", a.area, last, a.ar)?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

/// IoU of a detection against ground truth; for crowd ground truth the
/// denominator is the detection area alone.
pub fn match_iou(det: &BBox, gt: &BBox, crowd: bool) -> f64 {
    let inter = det.intersection_area(gt);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = if crowd {
        det.area()
    } else {
        det.area() + gt.area() - inter
    };
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Matching outcome of one image, one category and one area range.
struct ImageEval {
    scores: Vec<f64>,
    /// `[threshold][detection]`
    matched: Vec<Vec<bool>>,
    ignored: Vec<Vec<bool>>,
    gt_count: usize,
}

fn evaluate_image(
    gts: &[&GroundTruthAnnotation],
    dets: &[&Detection],
    range: &AreaRange,
    cfg: &EvalConfig,
    max_det: usize,
) -> ImageEval {
    // non-ignored ground truth first, stable
    let mut gt_order: Vec<(&GroundTruthAnnotation, bool)> = gts
        .iter()
        .map(|g| (*g, g.iscrowd || !range.contains(g.area)))
        .collect();
    gt_order.sort_by_key(|(_, ignore)| *ignore);

    let mut dt_order: Vec<&Detection> = dets.to_vec();
    dt_order.sort_by(|a, b| b.score.total_cmp(&a.score));
    dt_order.truncate(max_det);

    let ious: Vec<Vec<f64>> = dt_order
        .iter()
        .map(|d| {
            gt_order
                .iter()
                .map(|(g, _)| match_iou(&d.bbox, &g.bbox, g.iscrowd))
                .collect()
        })
        .collect();

    let nt = cfg.iou_thresholds.len();
    let nd = dt_order.len();
    let mut matched = vec![vec![false; nd]; nt];
    let mut ignored = vec![vec![false; nd]; nt];
    for (ti, &t) in cfg.iou_thresholds.iter().enumerate() {
        let mut gt_taken = vec![false; gt_order.len()];
        for di in 0..nd {
            let mut best = t.min(1.0 - 1e-10);
            let mut m: Option<usize> = None;
            for (gi, (g, g_ignore)) in gt_order.iter().enumerate() {
                if gt_taken[gi] && !g.iscrowd {
                    continue;
                }
                // once a real match exists, ignored ground truth cannot replace it
                if let Some(mi) = m {
                    if !gt_order[mi].1 && *g_ignore {
                        break;
                    }
                }
                if ious[di][gi] < best {
                    continue;
                }
                best = ious[di][gi];
                m = Some(gi);
            }
            if let Some(mi) = m {
                matched[ti][di] = true;
                ignored[ti][di] = gt_order[mi].1;
                gt_taken[mi] = true;
            }
        }
        for di in 0..nd {
            if !matched[ti][di] && !range.contains(dt_order[di].bbox.area()) {
                ignored[ti][di] = true;
            }
        }
    }

    ImageEval {
        scores: dt_order.iter().map(|d| d.score).collect(),
        matched,
        ignored,
        gt_count: gt_order.iter().filter(|(_, ig)| !ig).count(),
    }
}

/// Interpolated precision on the recall grid and the final recall for one
/// ranked list. `None` when there is no ground truth.
fn precision_recall(
    ranked: &[(f64, bool, bool)],
    gt_count: usize,
    grid: &[f64],
) -> Option<(Vec<f64>, f64)> {
    if gt_count == 0 {
        return None;
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut rc = Vec::with_capacity(ranked.len());
    let mut pr = Vec::with_capacity(ranked.len());
    for &(_, is_match, is_ignored) in ranked {
        if !is_ignored {
            if is_match {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        rc.push(tp as f64 / gt_count as f64);
        pr.push(if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        });
    }
    let recall = rc.last().copied().unwrap_or(0.0);
    for i in (1..pr.len()).rev() {
        if pr[i] > pr[i - 1] {
            pr[i - 1] = pr[i];
        }
    }
    let q = grid
        .iter()
        .map(|&r| {
            let idx = rc.partition_point(|&v| v < r);
            pr.get(idx).copied().unwrap_or(0.0)
        })
        .collect();
    Some((q, recall))
}

fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Evaluates detections against ground truth. Every detection must refer to
/// an image of `gt`; detections of categories absent from `gt` are ignored
/// with a warning.
pub fn evaluate(gt: &Dataset, dets: &[Detection], cfg: &EvalConfig) -> Result<EvalResult> {
    cfg.validate()?;
    let image_ids: BTreeSet<u64> = gt.images.iter().map(|im| im.id).collect();
    let cat_ids: BTreeSet<u64> = gt.categories.iter().map(|c| c.id).collect();
    let mut warnings = Vec::new();

    let mut dets_by: HashMap<(u64, u64), Vec<&Detection>> = HashMap::new();
    let mut foreign = 0usize;
    for (i, d) in dets.iter().enumerate() {
        if !image_ids.contains(&d.image_id) {
            return Err(Error::DanglingReference {
                kind: "image",
                id: d.image_id,
                referrer: format!("detection #{i}"),
            });
        }
        if !cat_ids.contains(&d.category_id) {
            foreign += 1;
            continue;
        }
        dets_by.entry((d.image_id, d.category_id)).or_default().push(d);
    }
    if foreign > 0 {
        warnings.push(format!(
            "{foreign} detection(s) of unknown categories were ignored"
        ));
    }
    let mut gts_by: HashMap<(u64, u64), Vec<&GroundTruthAnnotation>> = HashMap::new();
    for a in &gt.annotations {
        gts_by.entry((a.image_id, a.category_id)).or_default().push(a);
    }

    let images: Vec<u64> = image_ids.iter().copied().collect();
    let cats: Vec<u64> = cat_ids.iter().copied().collect();
    let max_det = *cfg.max_dets.last().expect("validated");
    let nt = cfg.iou_thresholds.len();
    let grid = cfg.recall_grid();

    // per_image[i][k][a]
    let per_image: Vec<Vec<Vec<Option<ImageEval>>>> = images
        .par_iter()
        .map(|&img| {
            cats.iter()
                .map(|&cat| {
                    let g = gts_by.get(&(img, cat)).map(Vec::as_slice).unwrap_or(&[]);
                    let d = dets_by.get(&(img, cat)).map(Vec::as_slice).unwrap_or(&[]);
                    cfg.area_ranges
                        .iter()
                        .map(|range| {
                            if g.is_empty() && d.is_empty() {
                                None
                            } else {
                                Some(evaluate_image(g, d, range, cfg, max_det))
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    // precision[k][a][m] -> Option<[t][r]>, recall[k][a][m] -> Option<[t]>
    type Cell = Option<(Vec<Vec<f64>>, Vec<f64>)>;
    let cells: Vec<Vec<Vec<Cell>>> = (0..cats.len())
        .into_par_iter()
        .map(|k| {
            (0..cfg.area_ranges.len())
                .map(|a| {
                    cfg.max_dets
                        .iter()
                        .map(|&m| {
                            let evals: Vec<&ImageEval> = per_image
                                .iter()
                                .filter_map(|per_cat| per_cat[k][a].as_ref())
                                .collect();
                            let gt_count: usize = evals.iter().map(|e| e.gt_count).sum();
                            if gt_count == 0 {
                                return None;
                            }
                            let mut precision = Vec::with_capacity(nt);
                            let mut recall = Vec::with_capacity(nt);
                            for t in 0..nt {
                                let mut ranked: Vec<(f64, bool, bool)> = evals
                                    .iter()
                                    .flat_map(|e| {
                                        let n = e.scores.len().min(m);
                                        (0..n).map(move |d| {
                                            (e.scores[d], e.matched[t][d], e.ignored[t][d])
                                        })
                                    })
                                    .collect();
                                ranked.sort_by(|x, y| y.0.total_cmp(&x.0));
                                let (q, r) = precision_recall(&ranked, gt_count, &grid)
                                    .expect("gt_count > 0");
                                precision.push(q);
                                recall.push(r);
                            }
                            Some((precision, recall))
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let last_m = cfg.max_dets.len() - 1;
    let ap = |a: usize, t_sel: Option<usize>| {
        let mut values = Vec::new();
        for per_a in &cells {
            if let Some((p, _)) = &per_a[a][last_m] {
                for (t, row) in p.iter().enumerate() {
                    if t_sel.is_none_or(|s| s == t) {
                        values.extend(row.iter().map(|v| Some(*v)));
                    }
                }
            }
        }
        mean_defined(values)
    };
    let ar = |a: usize, m: usize| {
        mean_defined(
            cells
                .iter()
                .filter_map(|per_a| per_a[a][m].as_ref())
                .flat_map(|(_, r)| r.iter().map(|v| Some(*v))),
        )
    };
    let mut defined = |v: Option<f64>, what: &str| {
        v.unwrap_or_else(|| {
            warnings.push(format!("{what} is undefined (no ground truth); reported as 0"));
            0.0
        })
    };

    let map = defined(ap(0, None), "mAP");
    let ap50 = cfg.threshold_index(0.5).map(|t| defined(ap(0, Some(t)), "AP@0.5"));
    let ap75 = cfg.threshold_index(0.75).map(|t| defined(ap(0, Some(t)), "AP@0.75"));
    let ar_list: Vec<RecallAt> = cfg
        .max_dets
        .iter()
        .enumerate()
        .map(|(mi, &m)| RecallAt {
            max_dets: m,
            recall: ar(0, mi).unwrap_or(0.0),
        })
        .collect();
    let by_area: Vec<AreaMetrics> = cfg
        .area_ranges
        .iter()
        .enumerate()
        .map(|(a, range)| AreaMetrics {
            area: range.name.clone(),
            ap: ap(a, None).unwrap_or(0.0),
            ar: ar(a, last_m).unwrap_or(0.0),
        })
        .collect();
    let pr_curves = cfg
        .iou_thresholds
        .iter()
        .enumerate()
        .map(|(t, &iou)| PrCurve {
            iou,
            precision: (0..grid.len())
                .map(|r| {
                    mean_defined(
                        cells
                            .iter()
                            .map(|per_a| per_a[0][last_m].as_ref().map(|(p, _)| p[t][r])),
                    )
                    .unwrap_or(0.0)
                })
                .collect(),
        })
        .collect();

    Ok(EvalResult {
        map,
        ap50,
        ap75,
        ar: ar_list,
        by_area,
        pr_curves,
        num_images: images.len(),
        num_gt: gt.annotations.len(),
        num_dets: dets.len(),
        warnings,
    })
}

/// Loads a ground-truth file and a detection file and evaluates them.
pub fn evaluate_files(
    gt_path: impl AsRef<std::path::Path>,
    det_path: impl AsRef<std::path::Path>,
    cfg: &EvalConfig,
) -> Result<EvalResult> {
    let gt = coco::load_dataset(gt_path, coco::LoadPolicy::default())?;
    let dets = coco::load_detections(det_path, &gt)?;
    evaluate(&gt, &dets, cfg)
}
