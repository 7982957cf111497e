use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use densepack_core::anchors::{coverage, AnchorScheme};
use densepack_core::coco::{self, Dataset, LoadPolicy};
use densepack_core::eval::{evaluate, EvalConfig, EvalResult};
use densepack_core::geometry::{ImageSize, ResizeSpec};
use densepack_core::stats::{
    histogram, image_size_census, size_buckets_scaled, AreaScaling, Histogram, HistogramSpec, Metric, SizeBucketReport,
    SizeCount,
};
use densepack_core::suppression::{merge_frames, merge_tiled, Scoring, AreaBasis, SuppressionConfig, SuppressionMethod};
use densepack_core::tiler::{
    build_manifest, crop_tiles, plan_dataset, project_annotations, restrict_to_tiled, OverlapBasis, ResidualPolicy,
    TileGrid, TileManifest,
};
use serde::Serialize;

use crate::args::{
    AnchorsArgs, EvalArgs, EvalFlags, MergeArgs, PipelineArgs, StatsArgs, SuppressionArgs, TileArgs, TilingArgs,
    ValidateArgs,
};
use crate::error::{CliError, CliResult};

// ---------------------------------------------------------------------------
// helpers

fn parse_list<T: FromStr>(s: &str, what: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad {what} `{p}` in `{s}`")))
        })
        .collect()
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("report serializes");
    b.push(b'\n');
    b
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> CliResult<()> {
    Ok(coco::write_atomic(path, &json_bytes(v))?)
}

/// Prints `v` as JSON or `text` as is.
fn emit<T: Serialize>(json: bool, v: &T, text: &str) {
    if json {
        print!("{}", String::from_utf8(json_bytes(v)).expect("JSON is UTF-8"));
    } else {
        print!("{text}");
    }
}

fn load_gt(path: &Path) -> CliResult<Dataset> {
    Ok(coco::load_dataset(path, LoadPolicy::default())?)
}

fn parse_resize(s: Option<&str>) -> CliResult<Option<ResizeSpec>> {
    Ok(s.map(str::parse).transpose()?)
}

fn tiling(a: &TilingArgs) -> CliResult<(TileGrid, ResidualPolicy)> {
    let mut grid = TileGrid::new(a.rows, a.cols, a.overlap)?;
    grid.basis = a.overlap_basis.parse::<OverlapBasis>()?;
    Ok((grid, ResidualPolicy::new(a.min_residual)?))
}

fn suppression(a: &SuppressionArgs) -> CliResult<SuppressionConfig> {
    let cfg = SuppressionConfig {
        method: a.method.parse::<SuppressionMethod>()?,
        iou_threshold: a.iou_thr,
        sigma: a.sigma,
        score_floor: a.score_floor,
        scoring: a.scoring.parse::<Scoring>()?,
        area_basis: a.area_basis.parse::<AreaBasis>()?,
        max_output: a.max_output,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn iou_thresholds(s: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let bad = || CliError::Usage(format!("bad threshold range `{s}`"));
            let start: f64 = start.trim().parse().map_err(|_| bad())?;
            let stop: f64 = stop.trim().parse().map_err(|_| bad())?;
            let step: f64 = step.trim().parse().map_err(|_| bad())?;
            if step.is_nan() || step <= 0.0 || stop < start {
                return Err(bad());
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            // round to 1e-10 so that 0.5 + 9 * 0.05 prints as 0.95
            Ok((0..=n)
                .map(|i| ((start + i as f64 * step) * 1e10).round() / 1e10)
                .collect())
        }
        [_] => parse_list(s, "IoU threshold"),
        _ => Err(CliError::Usage(format!("bad threshold list `{s}`"))),
    }
}

fn eval_config(a: &EvalFlags) -> CliResult<EvalConfig> {
    let mut cfg = EvalConfig {
        max_dets: parse_list(&a.max_dets, "max dets")?,
        ..EvalConfig::default()
    };
    if let Some(t) = &a.iou_thrs {
        cfg.iou_thresholds = iou_thresholds(t)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn warn_all(r: &EvalResult) {
    for w in &r.warnings {
        log::warn!("{w}");
    }
}

// ---------------------------------------------------------------------------
// stats

enum ScaleMode {
    PerImage,
    Fixed(f64),
}

fn scale_mode(s: &str) -> CliResult<ScaleMode> {
    if s == "per-image" || s == "per_image" {
        return Ok(ScaleMode::PerImage);
    }
    if let Some(v) = s.strip_prefix("fixed:") {
        let f: f64 = v
            .parse()
            .map_err(|_| CliError::Usage(format!("bad fixed scale `{v}`")))?;
        if !(f > 0.0 && f.is_finite()) {
            return Err(CliError::Usage(format!("fixed scale {f} must be positive")));
        }
        return Ok(ScaleMode::Fixed(f));
    }
    Err(CliError::Usage(format!("scale mode `{s}` is not per-image or fixed:<s>")))
}

#[derive(Serialize)]
struct StatsReport {
    num_images: usize,
    num_annotations: usize,
    histogram: Histogram,
    size_buckets: SizeBucketReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    resized_size_buckets: Option<SizeBucketReport>,
    census: Vec<SizeCount>,
}

fn bucket_line(out: &mut String, label: &str, r: &SizeBucketReport) {
    let _ = writeln!(
        out,
        "{label:<10} small {:>7} ({:6.2}%)  medium {:>7} ({:6.2}%)  large {:>7} ({:6.2}%)",
        r.counts.small, r.percent.small, r.counts.medium, r.percent.medium, r.counts.large, r.percent.large
    );
}

pub fn stats(a: &StatsArgs, json: bool) -> CliResult<()> {
    let clip: Vec<f64> = parse_list(&a.clip, "clip quantile")?;
    let [q_low, q_high] = clip[..] else {
        return Err(CliError::Usage(format!("--clip takes two quantiles, got `{}`", a.clip)));
    };
    let spec = HistogramSpec {
        metric: a.metric.parse::<Metric>()?,
        bins: a.bins,
        q_low,
        q_high,
    };
    spec.validate()?;
    let resize = parse_resize(a.resize.as_deref())?;
    let scaling = match scale_mode(&a.scale_mode)? {
        ScaleMode::PerImage => resize.map(|resize| AreaScaling::PerImage { resize }),
        ScaleMode::Fixed(scale) => Some(AreaScaling::Fixed { scale }),
    };

    let d = load_gt(&a.gt)?;
    let report = StatsReport {
        num_images: d.images.len(),
        num_annotations: d.annotations.len(),
        histogram: histogram(&d, &spec)?,
        size_buckets: size_buckets_scaled(&d, AreaScaling::None)?,
        resized_size_buckets: scaling.map(|s| size_buckets_scaled(&d, s)).transpose()?,
        census: image_size_census(&d),
    };
    if let Some(p) = &a.csv {
        coco::write_atomic(p, report.histogram.to_csv().as_bytes())?;
    }
    if let Some(p) = &a.out {
        write_json(p, &report)?;
    }

    let h = &report.histogram;
    let mut t = String::new();
    let _ = writeln!(t, "{} images, {} boxes", report.num_images, report.num_annotations);
    let _ = writeln!(
        t,
        "{}: clip [{}, {}], {} in range, {} clipped, {} skipped",
        h.metric.name(),
        h.clip_low,
        h.clip_high,
        h.total,
        h.clipped,
        h.skipped
    );
    let peak = h.counts.iter().copied().max().unwrap_or(0).max(1);
    for (i, c) in h.counts.iter().enumerate() {
        let bar = "#".repeat((40 * c / peak) as usize);
        let _ = writeln!(t, "  [{:>12.4}, {:>12.4}) {:>7} {bar}", h.edges[i], h.edges[i + 1], c);
    }
    bucket_line(&mut t, "original", &report.size_buckets);
    if let Some(r) = &report.resized_size_buckets {
        bucket_line(&mut t, "resized", r);
    }
    for c in &report.census {
        let _ = writeln!(t, "{:>5}x{:<5} {}", c.width, c.height, c.count);
    }
    emit(json, &report, &t);
    Ok(())
}

// ---------------------------------------------------------------------------
// tile

#[derive(Serialize)]
struct TileSummary {
    frames: usize,
    tiles: usize,
    frame_annotations: usize,
    tile_annotations: usize,
    /// Frame boxes that survive in no tile.
    dropped_annotations: usize,
    annotations_file: PathBuf,
    manifest_file: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    images_dir: Option<PathBuf>,
}

pub fn tile(a: &TileArgs, json: bool) -> CliResult<()> {
    let (grid, policy) = tiling(&a.tiling)?;
    let image_root = match (a.crop_images, &a.image_root) {
        (true, None) => {
            return Err(CliError::Usage(format!(
                "--crop-images needs --image-root or {}",
                crate::args::DATA_ROOT_ENV
            )))
        }
        (true, Some(r)) => Some(r.clone()),
        (false, _) => None,
    };

    let d = load_gt(&a.gt)?;
    let plans = plan_dataset(&d, &grid)?;
    let (tiles, manifest) = project_annotations(&d, &plans, &policy)?;
    let kept = restrict_to_tiled(&d, &manifest, &policy).annotations.len();

    let annotations_file = a.out_dir.join("tiles.json");
    let manifest_file = a.out_dir.join("manifest.json");
    coco::save_dataset(&tiles, &annotations_file)?;
    manifest.save(&manifest_file)?;
    let images_dir = match image_root {
        Some(root) => {
            let dir = a.out_dir.join("images");
            crop_tiles(&root, &d, &manifest, &dir)?;
            Some(dir)
        }
        None => None,
    };

    let s = TileSummary {
        frames: d.images.len(),
        tiles: tiles.images.len(),
        frame_annotations: d.annotations.len(),
        tile_annotations: tiles.annotations.len(),
        dropped_annotations: d.annotations.len() - kept,
        annotations_file,
        manifest_file,
        images_dir,
    };
    let mut t = format!(
        "{} frames -> {} tiles; {} boxes -> {} tile boxes ({} lost in every tile)\n",
        s.frames, s.tiles, s.frame_annotations, s.tile_annotations, s.dropped_annotations
    );
    let _ = writeln!(t, "wrote {} and {}", s.annotations_file.display(), s.manifest_file.display());
    if let Some(d) = &s.images_dir {
        let _ = writeln!(t, "cropped tiles under {}", d.display());
    }
    emit(json, &s, &t);
    Ok(())
}

// ---------------------------------------------------------------------------
// merge

#[derive(Serialize)]
struct MergeSummary {
    config: SuppressionConfig,
    input_detections: usize,
    output_detections: usize,
    frames: usize,
    out: PathBuf,
}

pub fn merge(a: &MergeArgs, json: bool) -> CliResult<()> {
    let cfg = suppression(&a.suppression)?;
    if cfg.scoring == Scoring::NormalizedArea
        && cfg.area_basis == AreaBasis::Image
        && a.manifest.is_none()
        && a.gt.is_none()
    {
        return Err(CliError::Usage(
            "normalized-area scoring over the image needs --manifest or --gt for image sizes".into(),
        ));
    }

    let dets = coco::parse_detections(&a.dets)?;
    let input = dets.len();
    let merged = match &a.manifest {
        Some(m) => merge_tiled(&dets, &TileManifest::load(m)?, &cfg)?,
        None => {
            let sizes: HashMap<u64, ImageSize> = match &a.gt {
                Some(gt) => {
                    let gt = load_gt(gt)?;
                    coco::check_detections(&dets, &gt)?;
                    gt.images.iter().map(|im| (im.id, im.size)).collect()
                }
                None => HashMap::new(),
            };
            merge_frames(dets, &sizes, &cfg)?
        }
    };
    coco::save_detections(&merged, &a.out)?;

    let mut frames: Vec<u64> = merged.iter().map(|d| d.image_id).collect();
    frames.dedup();
    let s = MergeSummary {
        config: cfg,
        input_detections: input,
        output_detections: merged.len(),
        frames: frames.len(),
        out: a.out.clone(),
    };
    let t = format!(
        "{} detections -> {} over {} frames ({:?}, IoU {})\nwrote {}\n",
        s.input_detections,
        s.output_detections,
        s.frames,
        cfg.method,
        cfg.iou_threshold,
        s.out.display()
    );
    emit(json, &s, &t);
    Ok(())
}

// ---------------------------------------------------------------------------
// anchors

pub fn anchors(a: &AnchorsArgs, json: bool) -> CliResult<()> {
    let scheme = AnchorScheme::new(
        parse_list(&a.strides, "stride")?,
        a.scale,
        parse_list(&a.ratios, "aspect ratio")?,
    )?;
    let resize = parse_resize(a.resize.as_deref())?;

    let d = load_gt(&a.gt)?;
    let mut r = coverage(&d, &scheme, resize)?;
    if !a.per_gt {
        r.per_gt.clear();
    }
    if let Some(p) = &a.out {
        write_json(p, &r)?;
    }

    let mut t = String::new();
    let _ = writeln!(t, "{:>5}  {:>6}  {:>6}  {:>10}  {:>12}  {:>8}", "level", "stride", "base", "area", "anchors", "best");
    for (i, &s) in scheme.strides.iter().enumerate() {
        let _ = writeln!(
            t,
            "{:>5}  {:>6}  {:>6}  {:>10}  {:>12}  {:>8}",
            i,
            s,
            scheme.base_size(s),
            r.anchor_areas[i],
            r.level_anchor_counts[i],
            r.best_level_histogram[i]
        );
    }
    if r.vacuous {
        let _ = writeln!(t, "no ground truth: coverage undefined");
    } else {
        let _ = writeln!(t, "{} boxes, mean best IoU {:.4}", r.num_gt, r.mean_max_iou.unwrap_or(0.0));
        for c in &r.coverage {
            let _ = writeln!(t, "coverage@{}: {:.4}", c.iou, c.fraction.unwrap_or(0.0));
        }
    }
    emit(json, &r, &t);
    Ok(())
}

// ---------------------------------------------------------------------------
// eval

pub fn eval(a: &EvalArgs, json: bool) -> CliResult<()> {
    let cfg = eval_config(&a.eval)?;
    let gt = load_gt(&a.gt)?;
    let dets = coco::load_detections(&a.dets, &gt)?;
    let r = evaluate(&gt, &dets, &cfg)?;
    warn_all(&r);
    if let Some(p) = &a.out {
        write_json(p, &r)?;
    }
    emit(json, &r, &r.to_string());
    Ok(())
}

// ---------------------------------------------------------------------------
// validate

pub fn validate(a: &ValidateArgs, json: bool) -> CliResult<()> {
    let d = coco::parse_dataset(&a.gt)?;
    let report = coco::validate_dataset(&d, a.image_root.as_deref());
    match (&a.out, a.exclude) {
        (Some(out), true) => coco::save_dataset(&coco::exclude_findings(&d, &report), out)?,
        (Some(out), false) => write_json(out, &report)?,
        (None, _) => {}
    }
    emit(json, &report, &report.to_string());
    if a.strict && !report.is_clean() {
        return Err(CliError::Failed(format!("{} problems found", report.findings.len())));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// pipeline

#[derive(Serialize)]
struct PipelineReport {
    frames: usize,
    tiles: usize,
    tile_detections: usize,
    merged_detections: usize,
    gt_boxes: usize,
    scored_gt_boxes: usize,
    eval: EvalResult,
}

pub fn pipeline(a: &PipelineArgs, json: bool) -> CliResult<()> {
    let (grid, policy) = tiling(&a.tiling)?;
    let cfg = suppression(&a.suppression)?;
    let ecfg = eval_config(&a.eval)?;

    let gt = load_gt(&a.gt)?;
    let manifest = match &a.manifest {
        Some(p) => TileManifest::load(p)?,
        None => build_manifest(&gt, &plan_dataset(&gt, &grid)?)?,
    };
    let tile_dets = coco::parse_detections(&a.tile_dets)?;
    let merged = merge_tiled(&tile_dets, &manifest, &cfg)?;
    coco::check_detections(&merged, &gt)?;
    let scored = if a.restrict_gt {
        restrict_to_tiled(&gt, &manifest, &policy)
    } else {
        gt.clone()
    };
    let r = evaluate(&scored, &merged, &ecfg)?;
    warn_all(&r);

    if a.manifest.is_none() {
        manifest.save(a.out_dir.join("manifest.json"))?;
    }
    coco::save_detections(&merged, a.out_dir.join("merged.json"))?;
    write_json(&a.out_dir.join("eval.json"), &r)?;

    let report = PipelineReport {
        frames: gt.images.len(),
        tiles: manifest.entries.len(),
        tile_detections: tile_dets.len(),
        merged_detections: merged.len(),
        gt_boxes: gt.annotations.len(),
        scored_gt_boxes: scored.annotations.len(),
        eval: r,
    };
    let t = format!(
        "{} frames, {} tiles: {} tile detections merged into {}; scoring {} of {} boxes\n\n{}",
        report.frames,
        report.tiles,
        report.tile_detections,
        report.merged_detections,
        report.scored_gt_boxes,
        report.gt_boxes,
        report.eval
    );
    emit(json, &report, &t);
    Ok(())
}
