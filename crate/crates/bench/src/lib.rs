//! Seeded workloads shared by the benchmarks.

use densepack_core::synth::{self, SynthConfig};
use densepack_core::{Dataset, Detection, ImageSize};
use rand::Rng;

/// Dense shelf-like frames: many small boxes on full-resolution images.
pub fn dense_dataset(images: usize, boxes_per_image: usize) -> Dataset {
    synth::synthetic_dataset(&SynthConfig {
        seed: 17,
        images,
        boxes_per_image,
        ..SynthConfig::default()
    })
}

/// Ground truth turned into scored detections, each box jittered by a few
/// pixels and duplicated once so that suppression has work to do.
pub fn noisy_detections(d: &Dataset, seed: u64) -> Vec<Detection> {
    let mut rng = synth::rng(seed);
    let mut out = Vec::with_capacity(2 * d.annotations.len());
    for det in synth::perfect_detections(d, 1.0) {
        for _ in 0..2 {
            let j = rng.gen_range(-4.0..4.0);
            let bbox = det.bbox.translate(j, -j).unwrap_or(det.bbox);
            out.push(Detection { bbox, score: rng.gen_range(0.05..1.0), ..det.clone() });
        }
    }
    out
}

/// A single frame's worth of detections for per-frame suppression.
pub fn frame_detections(n: usize, seed: u64) -> Vec<Detection> {
    let mut rng = synth::rng(seed);
    let size = ImageSize { width: 2448, height: 3264 };
    (0..n)
        .map(|_| Detection {
            image_id: 1,
            category_id: 1,
            bbox: synth::random_box(&mut rng, size, 40, 240),
            score: rng.gen_range(0.0..1.0),
        })
        .collect()
}
