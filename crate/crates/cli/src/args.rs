use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hybridseg_core::{GuidanceSource, MaskChannels};

#[derive(Debug, Parser)]
#[command(
    name = "hybridseg",
    version,
    about = "Guidance-driven SLIC lesion segmentation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Refine a low-resolution guidance mask against the full-resolution image.
    Segment(SegmentArgs),
    /// Draw SLIC boundaries over an image and dump the label raster.
    Superpixels(SuperpixelArgs),
    /// Score predicted masks against ground truth, one JSON line per image.
    Evaluate(EvaluateArgs),
    /// Time each pipeline stage on a seeded synthetic image.
    Bench(BenchArgs),
    /// Write seeded synthetic scenes with ground truth and degraded guidance.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Selection {
    Single,
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChannelPolicy {
    Reject,
    Collapse,
}

impl From<ChannelPolicy> for MaskChannels {
    fn from(p: ChannelPolicy) -> Self {
        match p {
            ChannelPolicy::Reject => MaskChannels::Reject,
            ChannelPolicy::Collapse => MaskChannels::Collapse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Provenance {
    ExternalMask,
    Synthetic,
}

impl From<Provenance> for GuidanceSource {
    fn from(p: Provenance) -> Self {
        match p {
            Provenance::ExternalMask => GuidanceSource::ExternalMask,
            Provenance::Synthetic => GuidanceSource::Synthetic,
        }
    }
}

/// SLIC knobs shared by several commands.
#[derive(Debug, Clone, Args)]
pub struct SlicFlags {
    /// Requested superpixel count; derived from the guidance when omitted.
    #[arg(long)]
    pub n_segments: Option<usize>,
    #[arg(long)]
    pub compactness: Option<f64>,
    /// Gaussian pre-smoothing; 0 disables it.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = hybridseg_core::slic::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    pub image: PathBuf,
    pub guidance: PathBuf,
    pub out_mask: PathBuf,
    #[command(flatten)]
    pub slic: SlicFlags,
    /// Lesion-ratio calibration constant.
    #[arg(long, default_value_t = 1.0)]
    pub calibration: f64,
    #[arg(long, value_enum, default_value_t = Selection::Single)]
    pub selection: Selection,
    /// Minimum guidance coverage for `--selection threshold`.
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, value_enum, default_value_t = ChannelPolicy::Reject)]
    pub mask_channels: ChannelPolicy,
    #[arg(long, value_enum, default_value_t = Provenance::ExternalMask)]
    pub guidance_source: Provenance,
    /// Report sidecar path; defaults to OUT_MASK with a `.report.txt` extension.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SuperpixelArgs {
    pub image: PathBuf,
    pub out_overlay: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub n_segments: usize,
    #[arg(long, default_value_t = hybridseg_core::slic::DEFAULT_COMPACTNESS)]
    pub compactness: f64,
    #[arg(long, default_value_t = hybridseg_core::slic::DEFAULT_SIGMA)]
    pub sigma: f64,
    #[arg(long, default_value_t = hybridseg_core::slic::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// 16-bit PGM label raster; defaults to OUT_OVERLAY with a `.labels.pgm` extension.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub pred_dir: PathBuf,
    pub gt_dir: PathBuf,
    pub out_jsonl: PathBuf,
    /// Aggregate summary; defaults to OUT_JSONL with a `.summary.json` extension.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    pub good: f64,
    #[arg(long, default_value_t = 0.5)]
    pub moderate: f64,
    #[arg(long, value_enum, default_value_t = ChannelPolicy::Reject)]
    pub mask_channels: ChannelPolicy,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 1024)]
    pub size: usize,
    #[arg(long)]
    pub n_segments: Option<usize>,
    #[arg(long, default_value_t = hybridseg_core::slic::DEFAULT_MAX_ITER)]
    pub iters: usize,
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 512)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of scenes; scene `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Guidance downsampling factor.
    #[arg(long, default_value_t = 4)]
    pub degrade: usize,
    /// Guidance erosion radius in guidance pixels.
    #[arg(long, default_value_t = 1)]
    pub erode: usize,
    /// Circular lesions instead of ellipses.
    #[arg(long)]
    pub disk: bool,
}
