//! Non-neural tooling for dense object detection datasets.
//!
//! The crate covers the parts of a detection workflow that do not need a
//! trained model: box geometry and keep-ratio resize arithmetic, COCO-format
//! I/O and validation, overlapping tile planning with annotation
//! re-projection, NMS / Soft-NMS merging, anchor-grid coverage analysis,
//! dataset geometry statistics and COCO-protocol evaluation.

pub mod anchors;
pub mod coco;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod stats;
pub mod suppression;
pub mod synth;
pub mod tiler;

pub use anchors::{AnchorScheme, CoverageReport};
pub use coco::{Category, Dataset, Detection, GroundTruthAnnotation, ImageRecord};
pub use error::{Error, Result};
pub use eval::{EvalConfig, EvalResult};
pub use geometry::{BBox, ImageSize, ResizeScale, ResizeSpec};
pub use suppression::{SuppressionConfig, SuppressionMethod};
pub use tiler::{TileManifest, TilePlan, TileSpec};
