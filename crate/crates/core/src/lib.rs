//! Lesion mask refinement with guidance-driven SLIC superpixels.
//!
//! A coarse, low-resolution lesion mask (the *guidance*) picks the SLIC
//! segment count from its frame-to-lesion area ratio. SLIC then runs on the
//! full-resolution image and the superpixel with the highest guidance
//! coverage becomes the refined mask.
//!
//! ```no_run
//! use hybridseg_core::{hybrid_segment, load_image, load_mask, MaskChannels, RefineConfig};
//!
//! let image = load_image("fundus.png")?;
//! let guidance = load_mask("guidance_128.png", MaskChannels::Reject)?;
//! let out = hybrid_segment(&image, &guidance, &RefineConfig::default())?;
//! println!("{}", out.report.to_key_value());
//! # Ok::<(), hybridseg_core::Error>(())
//! ```

pub mod color;
pub mod error;
pub mod guidance;
pub mod metrics;
pub mod raster;
pub mod refine;
pub mod slic;
pub mod synthetic;

pub use color::{srgb_to_lab, LabImage};
pub use error::{Error, Result};
pub use guidance::{
    degrade_ground_truth, derive_params, image_to_lesion_ratio, GuidanceParams, GuidanceSource,
    RatioConfig, SlicOverrides, NO_LESION_SEGMENTS,
};
pub use metrics::{
    confusion, dice, evaluate, hausdorff, iou, kruskal_wallis, volumetric_similarity,
    BandThresholds, ConfusionCounts, KruskalWallis, MetricsReport, QualityBand,
};
pub use raster::{
    connected_components, load_image, load_mask, normalize, resize_mask_nearest, save_mask,
    BinaryMask, ComponentLabeling, Connectivity, MaskChannels, NormalizedImage, RgbImage,
};
pub use refine::{hybrid_segment, RefineConfig, RunReport, Segmentation, SelectionMode};
pub use slic::{slic, ClusterCenter, SlicConfig, SuperpixelLabeling};
