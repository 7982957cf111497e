//! Seeded synthetic scenes for fixtures, tests and benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coco::{Category, Dataset, Detection, GroundTruthAnnotation, ImageRecord};
use crate::geometry::{BBox, ImageSize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub images: usize,
    /// Exact number of boxes placed in every image.
    pub boxes_per_image: usize,
    /// Frame sizes drawn uniformly for each image.
    pub sizes: Vec<ImageSize>,
    /// Box width range in pixels; heights follow from an aspect ratio in
    /// `[0.5, 2]`.
    pub min_side: u32,
    pub max_side: u32,
    pub file_ext: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            images: 10,
            boxes_per_image: 20,
            sizes: vec![
                ImageSize { width: 2448, height: 3264 },
                ImageSize { width: 1920, height: 2560 },
                ImageSize { width: 2336, height: 4160 },
            ],
            min_side: 40,
            max_side: 240,
            file_ext: "jpg".into(),
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Integer-aligned box of random size placed uniformly inside `size`.
pub fn random_box<R: Rng>(rng: &mut R, size: ImageSize, min_side: u32, max_side: u32) -> BBox {
    let w = rng.gen_range(min_side..=max_side).min(size.width);
    let aspect: f64 = rng.gen_range(0.5..=2.0);
    let h = ((w as f64 * aspect).round() as u32).clamp(1, size.height);
    let x = rng.gen_range(0..=size.width - w);
    let y = rng.gen_range(0..=size.height - h);
    BBox::from_xywh(x as f64, y as f64, w as f64, h as f64).expect("positive extents")
}

/// Single-category dataset with ids numbered from 1.
pub fn synthetic_dataset(cfg: &SynthConfig) -> Dataset {
    let mut rng = rng(cfg.seed);
    let mut images = Vec::with_capacity(cfg.images);
    let mut annotations = Vec::with_capacity(cfg.images * cfg.boxes_per_image);
    for i in 0..cfg.images {
        let size = *cfg.sizes.choose(&mut rng).expect("at least one size");
        let id = i as u64 + 1;
        images.push(ImageRecord {
            id,
            file_name: format!("synth_{id:04}.{}", cfg.file_ext),
            size,
        });
        for _ in 0..cfg.boxes_per_image {
            let bbox = random_box(&mut rng, size, cfg.min_side, cfg.max_side);
            annotations.push(GroundTruthAnnotation {
                id: annotations.len() as u64 + 1,
                image_id: id,
                category_id: 1,
                bbox,
                area: bbox.area(),
                iscrowd: false,
            });
        }
    }
    Dataset {
        images,
        annotations,
        categories: vec![Category {
            id: 1,
            name: "object".into(),
            supercategory: None,
        }],
        info: None,
        licenses: None,
    }
}

/// Every ground-truth box as a detection with the given score.
pub fn perfect_detections(d: &Dataset, score: f64) -> Vec<Detection> {
    d.annotations
        .iter()
        .map(|a| Detection {
            image_id: a.image_id,
            category_id: a.category_id,
            bbox: a.bbox,
            score,
        })
        .collect()
}
