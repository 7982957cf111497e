//! Overlapping tile grids: planning, ground-truth projection onto tiles,
//! pixel cropping and back-projection of tile detections to the frame.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coco::{self, Dataset, Detection, GroundTruthAnnotation, ImageRecord};
use crate::error::{Error, Result};
use crate::geometry::{BBox, ImageSize};

/// What the overlap fraction is measured against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapBasis {
    /// Consecutive tiles share `overlap * tile_extent` pixels.
    #[default]
    Tile,
    /// Consecutive tiles share `overlap * image_extent` pixels.
    Image,
}

impl std::str::FromStr for OverlapBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tile" => Ok(Self::Tile),
            "image" => Ok(Self::Image),
            _ => Err(Error::InvalidArgument(format!(
                "overlap basis `{s}` is not one of tile, image"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TileGrid {
    pub rows: u32,
    pub cols: u32,
    pub overlap: f64,
    pub basis: OverlapBasis,
}

impl Default for TileGrid {
    fn default() -> Self {
        Self {
            rows: 2,
            cols: 2,
            overlap: 0.2,
            basis: OverlapBasis::Tile,
        }
    }
}

impl TileGrid {
    pub fn new(rows: u32, cols: u32, overlap: f64) -> Result<Self> {
        let grid = Self {
            rows,
            cols,
            overlap,
            basis: OverlapBasis::Tile,
        };
        grid.check()?;
        Ok(grid)
    }

    fn check(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "tile grid {}x{} needs at least one row and column",
                self.rows, self.cols
            )));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::InvalidArgument(format!(
                "overlap {} outside [0, 1)",
                self.overlap
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileSpec {
    /// Row-major index within the plan.
    pub tile_id: u32,
    pub row: u32,
    pub col: u32,
    pub offset_x: u32,
    pub offset_y: u32,
    pub width: u32,
    pub height: u32,
}

impl TileSpec {
    /// Tile rectangle in frame coordinates.
    pub fn rect(&self) -> BBox {
        BBox::new(
            self.offset_x as f64,
            self.offset_y as f64,
            (self.offset_x + self.width) as f64,
            (self.offset_y + self.height) as f64,
        )
        .expect("tile rect is well formed")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TilePlan {
    pub image_id: u64,
    pub image_size: ImageSize,
    pub grid: TileGrid,
    pub tiles: Vec<TileSpec>,
}

/// Rounds up, except that values within float noise of an integer snap to
/// it (2448 / 1.8 is 1360, not 1361).
fn ceil_tolerant(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Tile extent and origins along one axis.
fn split_axis(len: u32, n: u32, overlap: f64, basis: OverlapBasis) -> Result<(u32, Vec<u32>)> {
    if n == 1 {
        return Ok((len, vec![0]));
    }
    let lenf = len as f64;
    let nf = n as f64;
    let extent = match basis {
        OverlapBasis::Tile => lenf / (nf - (nf - 1.0) * overlap),
        OverlapBasis::Image => lenf * (1.0 + (nf - 1.0) * overlap) / nf,
    };
    let extent = ceil_tolerant(extent) as u32;
    if extent >= len {
        return Err(Error::InvalidArgument(format!(
            "{n} tiles with overlap {overlap} over {len} px would each span the whole axis"
        )));
    }
    let span = (len - extent) as u64;
    let last = (n - 1) as u64;
    let origins = (0..n as u64).map(|i| (i * span / last) as u32).collect();
    Ok((extent, origins))
}

/// Plans an evenly spaced grid whose first and last tiles are flush with the
/// frame edges. Tile extents are solved from full coverage, e.g. for 2x2 and
/// overlap 0.2 on the tile basis, `t = ceil(W / 1.8)`.
pub fn plan_tiles(image_id: u64, size: ImageSize, grid: &TileGrid) -> Result<TilePlan> {
    grid.check()?;
    let (tw, xs) = split_axis(size.width, grid.cols, grid.overlap, grid.basis)?;
    let (th, ys) = split_axis(size.height, grid.rows, grid.overlap, grid.basis)?;
    let mut tiles = Vec::with_capacity(xs.len() * ys.len());
    for (row, &oy) in ys.iter().enumerate() {
        for (col, &ox) in xs.iter().enumerate() {
            tiles.push(TileSpec {
                tile_id: tiles.len() as u32,
                row: row as u32,
                col: col as u32,
                offset_x: ox,
                offset_y: oy,
                width: tw,
                height: th,
            });
        }
    }
    Ok(TilePlan {
        image_id,
        image_size: size,
        grid: *grid,
        tiles,
    })
}

pub fn plan_dataset(d: &Dataset, grid: &TileGrid) -> Result<Vec<TilePlan>> {
    d.images
        .iter()
        .map(|im| plan_tiles(im.id, im.size, grid))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualPolicy {
    /// A clipped box survives in a tile when its area there is at least this
    /// fraction of its full-frame area.
    pub min_residual_fraction: f64,
}

impl Default for ResidualPolicy {
    fn default() -> Self {
        Self {
            min_residual_fraction: 0.2,
        }
    }
}

impl ResidualPolicy {
    pub fn new(min_residual_fraction: f64) -> Result<Self> {
        if !(min_residual_fraction > 0.0 && min_residual_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "minimum residual fraction {min_residual_fraction} outside (0, 1]"
            )));
        }
        Ok(Self {
            min_residual_fraction,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileManifestEntry {
    pub tile_image_id: u64,
    pub tile_file: String,
    pub frame_image_id: u64,
    pub offset_x: u32,
    pub offset_y: u32,
    pub tile_w: u32,
    pub tile_h: u32,
}

impl TileManifestEntry {
    /// Tile rectangle in frame coordinates.
    pub fn rect(&self) -> BBox {
        BBox::new(
            self.offset_x as f64,
            self.offset_y as f64,
            (self.offset_x + self.tile_w) as f64,
            (self.offset_y + self.tile_h) as f64,
        )
        .expect("tile rect is well formed")
    }
}

/// Tile-to-frame provenance, serialized as a plain JSON array.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TileManifest {
    pub entries: Vec<TileManifestEntry>,
}

impl TileManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|source| Error::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn to_vec(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("manifest serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        coco::write_atomic(path.as_ref(), &self.to_vec())
    }

    pub fn by_tile(&self) -> HashMap<u64, &TileManifestEntry> {
        self.entries.iter().map(|e| (e.tile_image_id, e)).collect()
    }

    /// Frame sizes implied by the tiles (tiles cover their frame exactly).
    pub fn frame_sizes(&self) -> HashMap<u64, ImageSize> {
        let mut out: HashMap<u64, ImageSize> = HashMap::new();
        for e in &self.entries {
            let s = out.entry(e.frame_image_id).or_insert(ImageSize {
                width: 0,
                height: 0,
            });
            s.width = s.width.max(e.offset_x + e.tile_w);
            s.height = s.height.max(e.offset_y + e.tile_h);
        }
        out
    }
}

/// `{stem}_r{row}c{col}{ext}`, keeping any directory prefix of the frame file.
pub fn tile_file_name(frame_file: &str, row: u32, col: u32) -> String {
    let p = Path::new(frame_file);
    let stem = p
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = p
        .extension()
        .map(|e| format!(".{}", e.to_string_lossy()))
        .unwrap_or_default();
    let name = format!("{stem}_r{row}c{col}{ext}");
    match p.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => dir.join(name).to_string_lossy().into_owned(),
        _ => name,
    }
}

fn plans_by_image(plans: &[TilePlan]) -> HashMap<u64, &TilePlan> {
    plans.iter().map(|p| (p.image_id, p)).collect()
}

/// Manifest for the tiles of every image in `d`, numbering tile images from
/// 1 in frame order then row-major tile order.
pub fn build_manifest(d: &Dataset, plans: &[TilePlan]) -> Result<TileManifest> {
    let by_image = plans_by_image(plans);
    let mut entries = Vec::new();
    for im in &d.images {
        let plan = by_image.get(&im.id).ok_or(Error::MissingPlan(im.id))?;
        for t in &plan.tiles {
            entries.push(TileManifestEntry {
                tile_image_id: entries.len() as u64 + 1,
                tile_file: tile_file_name(&im.file_name, t.row, t.col),
                frame_image_id: im.id,
                offset_x: t.offset_x,
                offset_y: t.offset_y,
                tile_w: t.width,
                tile_h: t.height,
            });
        }
    }
    Ok(TileManifest { entries })
}

/// Clips `bbox` to `rect` and returns the piece in tile-local coordinates
/// with its residual fraction, if the piece is large enough to keep.
pub fn clip_to_tile(
    bbox: &BBox,
    rect: &BBox,
    policy: &ResidualPolicy,
) -> Option<(BBox, f64)> {
    let full = bbox.area();
    if full <= 0.0 {
        return None;
    }
    let piece = bbox.intersect(rect)?;
    let residual = piece.area() / full;
    if residual < policy.min_residual_fraction {
        return None;
    }
    let local = piece.translate(-rect.x_min(), -rect.y_min()).ok()?;
    Some((local, residual))
}

/// Re-projects the ground truth of `d` onto tiles. Every box is clipped to
/// every tile and kept where the clipped area is at least the policy
/// fraction of its original area; a box may therefore appear in several
/// overlapping tiles. Image and annotation ids are renumbered from 1.
pub fn project_annotations(
    d: &Dataset,
    plans: &[TilePlan],
    policy: &ResidualPolicy,
) -> Result<(Dataset, TileManifest)> {
    let manifest = build_manifest(d, plans)?;
    let by_frame = d.annotations_by_image();

    let per_tile: Vec<Vec<GroundTruthAnnotation>> = manifest
        .entries
        .par_iter()
        .map(|e| {
            let rect = e.rect();
            by_frame
                .get(&e.frame_image_id)
                .map(|anns| {
                    anns.iter()
                        .filter_map(|a| {
                            let (local, residual) = clip_to_tile(&a.bbox, &rect, policy)?;
                            Some(GroundTruthAnnotation {
                                id: 0,
                                image_id: e.tile_image_id,
                                category_id: a.category_id,
                                bbox: local,
                                area: if residual == 1.0 { a.area } else { a.area * residual },
                                iscrowd: a.iscrowd,
                            })
                        })
                        .collect()
                })
                .unwrap_or_default()
        })
        .collect();

    let mut annotations: Vec<GroundTruthAnnotation> = per_tile.into_iter().flatten().collect();
    for (i, a) in annotations.iter_mut().enumerate() {
        a.id = i as u64 + 1;
    }
    let images = manifest
        .entries
        .iter()
        .map(|e| ImageRecord {
            id: e.tile_image_id,
            file_name: e.tile_file.clone(),
            size: ImageSize {
                width: e.tile_w,
                height: e.tile_h,
            },
        })
        .collect();

    Ok((
        Dataset {
            images,
            annotations,
            categories: d.categories.clone(),
            info: d.info.clone(),
            licenses: d.licenses.clone(),
        },
        manifest,
    ))
}

/// Copy of `d` keeping only the annotations that survive the residual
/// filter in at least one tile of `manifest`.
pub fn restrict_to_tiled(d: &Dataset, manifest: &TileManifest, policy: &ResidualPolicy) -> Dataset {
    let mut rects: HashMap<u64, Vec<BBox>> = HashMap::new();
    for e in &manifest.entries {
        rects.entry(e.frame_image_id).or_default().push(e.rect());
    }
    let mut out = d.clone();
    out.annotations.retain(|a| {
        rects
            .get(&a.image_id)
            .is_some_and(|rs| rs.iter().any(|r| clip_to_tile(&a.bbox, r, policy).is_some()))
    });
    out
}

/// Translates tile detections back to their frames. Scores are untouched
/// and duplicates are kept.
pub fn backproject_detections(
    dets: &[Detection],
    manifest: &TileManifest,
) -> Result<Vec<Detection>> {
    let tiles = manifest.by_tile();
    dets.iter()
        .map(|d| {
            let e = tiles.get(&d.image_id).ok_or(Error::UnknownTile(d.image_id))?;
            Ok(Detection {
                image_id: e.frame_image_id,
                category_id: d.category_id,
                bbox: d.bbox.translate(e.offset_x as f64, e.offset_y as f64)?,
                score: d.score,
            })
        })
        .collect()
}

/// Cuts every tile of `manifest` out of its frame image and writes it under
/// `out_root`. Crops are pixel-exact; the output format follows the tile
/// file extension.
pub fn crop_tiles(
    image_root: &Path,
    frames: &Dataset,
    manifest: &TileManifest,
    out_root: &Path,
) -> Result<()> {
    let mut tiles_of: HashMap<u64, Vec<&TileManifestEntry>> = HashMap::new();
    for e in &manifest.entries {
        tiles_of.entry(e.frame_image_id).or_default().push(e);
    }
    frames
        .images
        .par_iter()
        .filter(|im| tiles_of.contains_key(&im.id))
        .try_for_each(|im| {
            let src: PathBuf = image_root.join(&im.file_name);
            let img = image::open(&src).map_err(|e| Error::Image {
                path: src.clone(),
                message: e.to_string(),
            })?;
            for e in &tiles_of[&im.id] {
                if e.offset_x + e.tile_w > img.width() || e.offset_y + e.tile_h > img.height() {
                    return Err(Error::Validation(format!(
                        "tile {} exceeds decoded image {} ({}x{})",
                        e.tile_image_id,
                        src.display(),
                        img.width(),
                        img.height()
                    )));
                }
                let crop = img.crop_imm(e.offset_x, e.offset_y, e.tile_w, e.tile_h);
                let dst = out_root.join(&e.tile_file);
                let format = image::ImageFormat::from_path(&dst).map_err(|err| Error::Image {
                    path: dst.clone(),
                    message: err.to_string(),
                })?;
                let mut buf = std::io::Cursor::new(Vec::new());
                crop.write_to(&mut buf, format).map_err(|err| Error::Image {
                    path: dst.clone(),
                    message: err.to_string(),
                })?;
                coco::write_atomic(&dst, buf.get_ref())?;
            }
            Ok(())
        })
}
