use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Environment variable naming the default image directory.
pub const DATA_ROOT_ENV: &str = "DENSEPACK_DATA_ROOT";

#[derive(Debug, Parser)]
#[command(name = "densepack", version, about = "Dense-scene detection dataset tooling")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, display_order = 900)]
    pub threads: Option<usize>,

    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true, display_order = 900)]
    pub json: bool,

    /// Flat TOML file of flag defaults; explicit flags win.
    #[arg(long, global = true, display_order = 900, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// More diagnostics on stderr (repeatable).
    #[arg(short, long, global = true, display_order = 900, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Box geometry histograms, size buckets and resolution census.
    Stats(StatsArgs),
    /// Split frames into overlapping tiles and project annotations.
    Tile(TileArgs),
    /// Deduplicate detections with NMS or Soft-NMS.
    Merge(MergeArgs),
    /// Anchor coverage of the ground truth.
    Anchors(AnchorsArgs),
    /// COCO-style evaluation of a detection file.
    Eval(EvalArgs),
    /// Check annotations and images for problems.
    Validate(ValidateArgs),
    /// Tile plan, merge of per-tile detections and evaluation in one go.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Ground-truth annotation file.
    #[arg(long)]
    pub gt: PathBuf,
    /// aspect_ratio, area, width or height.
    #[arg(long, default_value = "area")]
    pub metric: String,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    /// Lower and upper clip quantiles.
    #[arg(long, default_value = "0.01,0.99")]
    pub clip: String,
    /// Keep-ratio target such as 1088x816 for the resized size buckets.
    #[arg(long)]
    pub resize: Option<String>,
    /// per-image, or fixed:<s> for one linear factor on every image.
    #[arg(long, default_value = "per-image")]
    pub scale_mode: String,
    /// Also write the histogram as CSV.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// Write the JSON report here.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TilingArgs {
    #[arg(long, default_value_t = 2)]
    pub rows: u32,
    #[arg(long, default_value_t = 2)]
    pub cols: u32,
    #[arg(long, default_value_t = 0.2)]
    pub overlap: f64,
    /// Minimum fraction of a box's area that must remain inside a tile.
    #[arg(long, default_value_t = 0.2)]
    pub min_residual: f64,
    /// Whether the overlap is a fraction of the tile or of the image.
    #[arg(long, default_value = "tile")]
    pub overlap_basis: String,
}

#[derive(Debug, Args)]
pub struct TileArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[command(flatten)]
    pub tiling: TilingArgs,
    /// Directory for the tile annotations, manifest and crops.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Also cut the frame images into tile images.
    #[arg(long)]
    pub crop_images: bool,
    /// Directory holding the frame images.
    #[arg(long, env = DATA_ROOT_ENV, value_name = "DIR")]
    pub image_root: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SuppressionArgs {
    /// hard-nms, soft-nms-linear or soft-nms-gaussian.
    #[arg(long, default_value = "hard-nms")]
    pub method: String,
    #[arg(long, default_value_t = 0.5)]
    pub iou_thr: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub score_floor: f64,
    /// confidence or normalized-area.
    #[arg(long, default_value = "confidence")]
    pub scoring: String,
    /// image or max-box; denominator of the normalized-area score.
    #[arg(long, default_value = "image")]
    pub area_basis: String,
    /// Keep at most this many boxes per image and category.
    #[arg(long)]
    pub max_output: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    /// Detection file; tile coordinates when --manifest is given.
    #[arg(long)]
    pub dets: PathBuf,
    /// Tile manifest for back-projecting tile detections.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Frame annotations, used for image sizes without a manifest.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[command(flatten)]
    pub suppression: SuppressionArgs,
    /// Merged detection file.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnchorsArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, default_value = "4,8,16,32,64")]
    pub strides: String,
    #[arg(long, default_value_t = 8.0)]
    pub scale: f64,
    #[arg(long, default_value = "0.5,1,2")]
    pub ratios: String,
    /// Keep-ratio target applied to every image first.
    #[arg(long)]
    pub resize: Option<String>,
    /// Include every box's best IoU in the report.
    #[arg(long)]
    pub per_gt: bool,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalFlags {
    #[arg(long, default_value = "1,10,300")]
    pub max_dets: String,
    /// Comma list or start:stop:step (default 0.5:0.95:0.05).
    #[arg(long)]
    pub iou_thrs: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub dets: PathBuf,
    #[command(flatten)]
    pub eval: EvalFlags,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub gt: PathBuf,
    /// Decode every image under this directory.
    #[arg(long, env = DATA_ROOT_ENV, value_name = "DIR")]
    pub image_root: Option<PathBuf>,
    /// Write a cleaned copy without the reported problems to --out.
    #[arg(long, requires = "out")]
    pub exclude: bool,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Exit with status 1 when anything is reported.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Frame ground truth.
    #[arg(long)]
    pub gt: PathBuf,
    /// Detections on tiles, numbered as `tile` numbers them.
    #[arg(long)]
    pub tile_dets: PathBuf,
    /// Use this manifest instead of re-planning the tiles.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub tiling: TilingArgs,
    #[command(flatten)]
    pub suppression: SuppressionArgs,
    #[command(flatten)]
    pub eval: EvalFlags,
    /// Score only ground truth that survives the residual filter in some
    /// tile.
    #[arg(long)]
    pub restrict_gt: bool,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}
