//! Reference implementations used as test oracles. They are written
//! independently of the library code paths they check and favour clarity
//! over speed.
#![allow(dead_code)]

use std::collections::BTreeSet;

use densepack_core::coco::{Category, Dataset, Detection, GroundTruthAnnotation, ImageRecord};
use densepack_core::geometry::ImageSize;
use densepack_core::geometry::BBox;
use densepack_core::suppression::{SuppressionConfig, SuppressionMethod};
use rand::Rng;

// ---------------------------------------------------------------------------
// IoU by counting unit cells (integer-aligned boxes only)

pub fn cell_iou(a: &BBox, b: &BBox) -> f64 {
    let cells = |x: &BBox| {
        let mut s = BTreeSet::new();
        for i in x.x_min() as i64..x.x_max() as i64 {
            for j in x.y_min() as i64..x.y_max() as i64 {
                s.insert((i, j));
            }
        }
        s
    };
    let (ca, cb) = (cells(a), cells(b));
    let inter = ca.intersection(&cb).count();
    let union = ca.union(&cb).count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Plain-formula IoU for the oracles below.
pub fn plain_iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x_max().min(b.x_max()) - a.x_min().max(b.x_min())).max(0.0);
    let ih = (a.y_max().min(b.y_max()) - a.y_min().max(b.y_min())).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if inter <= 0.0 || union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

// ---------------------------------------------------------------------------
// suppression: re-sort the whole pool after every step

#[derive(Clone)]
struct Item {
    det: Detection,
    score: f64,
    idx: usize,
}

fn rank(pool: &mut [Item]) {
    pool.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then(b.det.bbox.area().partial_cmp(&a.det.bbox.area()).unwrap())
            .then(b.det.bbox.x_min().partial_cmp(&a.det.bbox.x_min()).unwrap())
            .then(b.det.bbox.y_min().partial_cmp(&a.det.bbox.y_min()).unwrap())
            .then(a.idx.cmp(&b.idx))
    });
}

/// Confidence-scored suppression of one image and category.
pub fn oracle_suppress(dets: &[Detection], cfg: &SuppressionConfig) -> Vec<Detection> {
    let soft = cfg.method != SuppressionMethod::HardNms;
    let mut pool: Vec<Item> = dets
        .iter()
        .enumerate()
        .map(|(idx, d)| Item {
            det: d.clone(),
            score: d.score,
            idx,
        })
        .filter(|it| !soft || it.score >= cfg.score_floor)
        .collect();
    let cap = cfg.max_output.unwrap_or(usize::MAX);
    let mut out = Vec::new();
    while !pool.is_empty() && out.len() < cap {
        rank(&mut pool);
        let top = pool.remove(0);
        let mut next = Vec::new();
        for mut it in pool {
            let o = plain_iou(&top.det.bbox, &it.det.bbox);
            match cfg.method {
                SuppressionMethod::HardNms => {
                    if o > cfg.iou_threshold {
                        continue;
                    }
                }
                SuppressionMethod::SoftNmsLinear => {
                    if o > cfg.iou_threshold {
                        it.score *= 1.0 - o;
                    }
                }
                SuppressionMethod::SoftNmsGaussian => {
                    it.score *= (-o * o / cfg.sigma).exp();
                }
            }
            if soft && it.score < cfg.score_floor {
                continue;
            }
            next.push(it);
        }
        pool = next;
        let mut d = top.det;
        d.score = top.score;
        out.push(d);
    }
    out
}

// ---------------------------------------------------------------------------
// naive COCO protocol (area range "all")

#[derive(Debug, Clone, PartialEq)]
pub struct OracleMetrics {
    pub map: f64,
    pub ap50: f64,
    pub ap75: f64,
    pub ar: Vec<(usize, f64)>,
}

#[derive(Clone, Copy, PartialEq)]
enum Outcome {
    Tp,
    Fp,
    Ignored,
}

fn thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

/// Ranked outcomes and positive count for one category, threshold and
/// per-image detection cap.
fn ranked_outcomes(
    gt: &Dataset,
    dets: &[Detection],
    cat: u64,
    thr: f64,
    max_det: usize,
) -> (Vec<(f64, Outcome)>, usize) {
    let image_ids: BTreeSet<u64> = gt.images.iter().map(|i| i.id).collect();
    let need = thr.min(1.0 - 1e-10);
    let mut all = Vec::new();
    let mut npos = 0;
    for img in image_ids {
        let gts: Vec<_> = gt
            .annotations
            .iter()
            .filter(|a| a.image_id == img && a.category_id == cat)
            .collect();
        npos += gts.iter().filter(|g| !g.iscrowd).count();
        let mut ds: Vec<&Detection> = dets
            .iter()
            .filter(|d| d.image_id == img && d.category_id == cat)
            .collect();
        ds.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
        ds.truncate(max_det);
        let mut used = vec![false; gts.len()];
        for d in ds {
            // best unused regular box, later boxes winning ties
            let mut best: Option<(usize, f64)> = None;
            for (gi, g) in gts.iter().enumerate() {
                if g.iscrowd || used[gi] {
                    continue;
                }
                let o = plain_iou(&d.bbox, &g.bbox);
                if o >= best.map_or(need, |b| b.1) {
                    best = Some((gi, o));
                }
            }
            if let Some((gi, _)) = best {
                used[gi] = true;
                all.push((d.score, Outcome::Tp));
                continue;
            }
            let absorbed = gts.iter().any(|g| {
                if !g.iscrowd {
                    return false;
                }
                let iw = (d.bbox.x_max().min(g.bbox.x_max()) - d.bbox.x_min().max(g.bbox.x_min())).max(0.0);
                let ih = (d.bbox.y_max().min(g.bbox.y_max()) - d.bbox.y_min().max(g.bbox.y_min())).max(0.0);
                let da = d.bbox.area();
                da > 0.0 && iw * ih / da >= need
            });
            all.push((d.score, if absorbed { Outcome::Ignored } else { Outcome::Fp }));
        }
    }
    all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    (all, npos)
}

/// AP as the mean over recall points of the best precision reached at any
/// rank whose recall is at least that point; plus final recall.
fn ap_and_recall(ranked: &[(f64, Outcome)], npos: usize) -> Option<(f64, f64)> {
    if npos == 0 {
        return None;
    }
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    for (_, o) in ranked {
        match o {
            Outcome::Tp => tp += 1,
            Outcome::Fp => fp += 1,
            Outcome::Ignored => continue,
        }
        points.push((tp as f64 / npos as f64, tp as f64 / (tp + fp) as f64));
    }
    let mut sum = 0.0;
    for i in 0..=100 {
        let r = i as f64 / 100.0;
        let best = points
            .iter()
            .filter(|(rc, _)| *rc >= r)
            .map(|(_, p)| *p)
            .fold(0.0, f64::max);
        sum += best;
    }
    Some((sum / 101.0, tp as f64 / npos as f64))
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn oracle_evaluate(gt: &Dataset, dets: &[Detection], max_dets: &[usize]) -> OracleMetrics {
    let cats: BTreeSet<u64> = gt.categories.iter().map(|c| c.id).collect();
    let ths = thresholds();
    let top = *max_dets.last().unwrap();
    let (mut all_ap, mut ap50, mut ap75) = (Vec::new(), Vec::new(), Vec::new());
    let mut ar: Vec<Vec<f64>> = vec![Vec::new(); max_dets.len()];
    for &c in &cats {
        for &t in &ths {
            let (ranked, npos) = ranked_outcomes(gt, dets, c, t, top);
            if let Some((ap, _)) = ap_and_recall(&ranked, npos) {
                all_ap.push(ap);
                if t == 0.5 {
                    ap50.push(ap);
                }
                if t == 0.75 {
                    ap75.push(ap);
                }
            }
            for (mi, &m) in max_dets.iter().enumerate() {
                let (ranked, npos) = ranked_outcomes(gt, dets, c, t, m);
                if let Some((_, r)) = ap_and_recall(&ranked, npos) {
                    ar[mi].push(r);
                }
            }
        }
    }
    OracleMetrics {
        map: mean(&all_ap),
        ap50: mean(&ap50),
        ap75: mean(&ap75),
        ar: max_dets
            .iter()
            .zip(&ar)
            .map(|(&m, v)| (m, mean(v)))
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// anchors: every anchor of every level, materialized

pub fn brute_force_max_iou(
    width: u32,
    height: u32,
    strides: &[u32],
    scale: f64,
    ratios: &[f64],
    gt: &BBox,
) -> f64 {
    let mut best: f64 = 0.0;
    for &s in strides {
        let base = s as f64 * scale;
        let nx = width.div_ceil(s);
        let ny = height.div_ceil(s);
        for j in 0..ny {
            for i in 0..nx {
                let cx = s as f64 * (i as f64 + 0.5);
                let cy = s as f64 * (j as f64 + 0.5);
                for &r in ratios {
                    let w = base / r.sqrt();
                    let h = base * r.sqrt();
                    let a = BBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0).unwrap();
                    best = best.max(plain_iou(&a, gt));
                }
            }
        }
    }
    best
}

// ---------------------------------------------------------------------------
// random instances

/// Small random scene: clustered integer boxes so that overlaps are common.
pub fn random_boxes<R: Rng>(rng: &mut R, n: usize, extent: f64) -> Vec<BBox> {
    let centers: Vec<(f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(0.0..extent), rng.gen_range(0.0..extent)))
        .collect();
    (0..n)
        .map(|_| {
            let (cx, cy) = centers[rng.gen_range(0..centers.len())];
            let x = (cx + rng.gen_range(-8.0..8.0)).round().max(0.0);
            let y = (cy + rng.gen_range(-8.0..8.0)).round().max(0.0);
            let w = rng.gen_range(4.0..24.0f64).round();
            let h = rng.gen_range(4.0..24.0f64).round();
            BBox::from_xywh(x, y, w, h).unwrap()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// tiling round trip

pub struct RoundTrip {
    pub frames: usize,
    pub kept_gt: usize,
    pub dropped_gt: usize,
    pub merged: Vec<Detection>,
    pub restricted: Dataset,
}

/// Projects the ground truth of `d` onto a 2x2 grid with 0.2 overlap and
/// residual 0.2, re-emits every tile box as a score-1 detection,
/// back-projects, merges with hard NMS at 0.5, and restricts the frame
/// ground truth to boxes that survived in at least one tile.
pub fn tiling_round_trip(d: &Dataset) -> RoundTrip {
    use densepack_core::suppression::merge_tiled;
    use densepack_core::synth::perfect_detections;
    use densepack_core::tiler::{plan_dataset, project_annotations, ResidualPolicy, TileGrid};

    let plans = plan_dataset(d, &TileGrid::default()).unwrap();
    let (tiles, manifest) = project_annotations(d, &plans, &ResidualPolicy::default()).unwrap();
    let tile_dets = perfect_detections(&tiles, 1.0);
    let merged = merge_tiled(&tile_dets, &manifest, &SuppressionConfig::hard(0.5)).unwrap();

    // surviving boxes, recomputed here from the tile rectangles
    let mut restricted = d.clone();
    restricted.annotations.retain(|a| {
        plans
            .iter()
            .find(|p| p.image_id == a.image_id)
            .unwrap()
            .tiles
            .iter()
            .any(|t| {
                let r = BBox::new(
                    t.offset_x as f64,
                    t.offset_y as f64,
                    (t.offset_x + t.width) as f64,
                    (t.offset_y + t.height) as f64,
                )
                .unwrap();
                let iw = (a.bbox.x_max().min(r.x_max()) - a.bbox.x_min().max(r.x_min())).max(0.0);
                let ih = (a.bbox.y_max().min(r.y_max()) - a.bbox.y_min().max(r.y_min())).max(0.0);
                iw * ih / a.bbox.area() >= 0.2
            })
    });
    RoundTrip {
        frames: d.images.len(),
        kept_gt: restricted.annotations.len(),
        dropped_gt: d.annotations.len() - restricted.annotations.len(),
        merged,
        restricted,
    }
}

/// Random scene: up to three images with at most eight boxes each, a second
/// category now and then, occasional crowd boxes, jittered detections with
/// coarse scores (ties), misses and spurious boxes.
pub fn random_scene<R: Rng>(rng: &mut R) -> (Dataset, Vec<Detection>) {
    let n_images = rng.gen_range(1..=3);
    let n_cats = rng.gen_range(1..=2);
    let mut d = Dataset {
        images: Vec::new(),
        annotations: Vec::new(),
        categories: (1..=n_cats)
            .map(|id| Category { id, name: format!("c{id}"), supercategory: None })
            .collect(),
        info: None,
        licenses: None,
    };
    let mut dets = Vec::new();
    for img in 1..=n_images {
        d.images.push(ImageRecord {
            id: img,
            file_name: format!("{img}.jpg"),
            size: ImageSize { width: 100, height: 100 },
        });
        let n = rng.gen_range(0..=8);
        for bbox in random_boxes(rng, n, 70.0) {
            let category_id = rng.gen_range(1..=n_cats);
            d.annotations.push(GroundTruthAnnotation {
                id: d.annotations.len() as u64 + 1,
                image_id: img,
                category_id,
                bbox,
                area: bbox.area(),
                iscrowd: rng.gen_bool(0.08),
            });
            if rng.gen_bool(0.8) {
                let j = |r: &mut R| r.gen_range(-3..=3) as f64;
                let (dx, dy, dw, dh) = (j(rng), j(rng), j(rng), j(rng));
                let b = BBox::from_xywh(
                    bbox.x_min() + dx,
                    bbox.y_min() + dy,
                    (bbox.width() + dw).max(1.0),
                    (bbox.height() + dh).max(1.0),
                )
                .unwrap();
                dets.push(Detection {
                    image_id: img,
                    category_id,
                    bbox: b,
                    score: rng.gen_range(1..=10) as f64 / 10.0,
                });
            }
        }
        let extra = rng.gen_range(0..=3);
        for bbox in random_boxes(rng, extra, 70.0) {
            dets.push(Detection {
                image_id: img,
                category_id: rng.gen_range(1..=n_cats),
                bbox,
                score: rng.gen_range(1..=10) as f64 / 10.0,
            });
        }
    }
    (d, dets)
}

