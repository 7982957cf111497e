//! Regenerates the JSON fixtures under `tests/fixtures`.
//!
//! ```text
//! cargo run -p densepack-core --example make_fixtures
//! ```

use std::path::PathBuf;

use densepack_core::coco::{self, Detection};
use densepack_core::geometry::{BBox, ImageSize};
use densepack_core::synth::{self, SynthConfig};
use densepack_core::tiler::{plan_dataset, project_annotations, ResidualPolicy, TileGrid};
use rand::Rng;

fn main() -> densepack_core::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    std::fs::create_dir_all(&dir).expect("create fixture dir");

    // ten frames, twenty boxes each
    let synth10 = synth::synthetic_dataset(&SynthConfig::default());
    coco::save_dataset(&synth10, dir.join("synth_10.json"))?;

    let plans = plan_dataset(&synth10, &TileGrid::default())?;
    let (tiles, manifest) = project_annotations(&synth10, &plans, &ResidualPolicy::default())?;
    manifest.save(dir.join("synth_10_manifest.json"))?;
    coco::save_detections(&synth::perfect_detections(&tiles, 1.0), dir.join("synth_10_tile_dets.json"))?;

    // small evaluation pair with misses, jitter and spurious boxes
    let gt = synth::synthetic_dataset(&SynthConfig {
        seed: 42,
        images: 4,
        boxes_per_image: 15,
        sizes: vec![ImageSize { width: 640, height: 480 }],
        min_side: 16,
        max_side: 120,
        file_ext: "png".into(),
    });
    let mut rng = synth::rng(43);
    let mut dets = Vec::new();
    for a in &gt.annotations {
        if rng.gen_bool(0.15) {
            continue;
        }
        let j = rng.gen_range(-0.15..0.15) * a.bbox.width();
        let bbox = BBox::from_xywh(a.bbox.x_min() + j, a.bbox.y_min(), a.bbox.width(), a.bbox.height() - j.abs())
            .expect("jittered box stays positive");
        dets.push(Detection {
            image_id: a.image_id,
            category_id: 1,
            bbox,
            score: (rng.gen_range(0.3..1.0f64) * 1000.0).round() / 1000.0,
        });
    }
    for im in &gt.images {
        for _ in 0..5 {
            dets.push(Detection {
                image_id: im.id,
                category_id: 1,
                bbox: synth::random_box(&mut rng, im.size, 16, 120),
                score: (rng.gen_range(0.0..0.6f64) * 1000.0).round() / 1000.0,
            });
        }
    }
    coco::save_dataset(&gt, dir.join("eval_gt.json"))?;
    coco::save_detections(&dets, dir.join("eval_dets.json"))?;
    Ok(())
}
