//! SLIC parameters derived from a low-resolution lesion mask.
//!
//! The segment count comes from the frame-to-lesion area ratio: a lesion
//! occupying 1/50 of the frame asks for about 50 superpixels, so one
//! superpixel is roughly lesion sized.

use crate::error::{Error, Result};
use crate::raster::{connected_components, BinaryMask, Connectivity};
use crate::slic::{DEFAULT_COMPACTNESS, DEFAULT_SIGMA};

/// Segment count used when the guidance mask has no foreground.
pub const NO_LESION_SEGMENTS: usize = 700;

#[derive(Debug, Clone, PartialEq)]
pub struct RatioConfig {
    /// Multiplier applied to the raw area ratio.
    pub calibration: f64,
    pub ns_min: usize,
    pub ns_max: usize,
    pub rounding_quantum: usize,
}

impl Default for RatioConfig {
    fn default() -> Self {
        Self {
            calibration: 1.0,
            ns_min: 5,
            ns_max: NO_LESION_SEGMENTS,
            rounding_quantum: 5,
        }
    }
}

impl RatioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.calibration > 0.0 && self.calibration.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "calibration must be > 0, got {}",
                self.calibration
            )));
        }
        if self.rounding_quantum == 0 {
            return Err(Error::InvalidConfig(
                "rounding quantum must be at least 1".into(),
            ));
        }
        if self.ns_min == 0 || self.ns_min > self.ns_max {
            return Err(Error::InvalidConfig(format!(
                "segment bounds must satisfy 1 <= min <= max, got [{}, {}]",
                self.ns_min, self.ns_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuidanceSource {
    ExternalMask,
    Synthetic,
}

impl GuidanceSource {
    pub fn as_str(self) -> &'static str {
        match self {
            GuidanceSource::ExternalMask => "external-mask",
            GuidanceSource::Synthetic => "synthetic",
        }
    }
}

/// Explicit values that take precedence over derived ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SlicOverrides {
    pub n_segments: Option<usize>,
    pub compactness: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceParams {
    pub n_segments: usize,
    pub compactness: f64,
    pub sigma: f64,
    pub source: GuidanceSource,
}

/// `(A_total / A_lesion) · C` where `A_lesion` is the largest 8-connected
/// foreground component. `None` for an empty mask.
pub fn lesion_ratio(mask: &BinaryMask, calibration: f64) -> Option<f64> {
    let (_, lesion) = connected_components(mask, Connectivity::Eight).largest()?;
    let total = (mask.width() * mask.height()) as f64;
    Some(total / lesion as f64 * calibration)
}

/// Segment count: the lesion ratio rounded to the nearest multiple of the
/// quantum and clamped to `[ns_min, ns_max]`, or 700 for an empty mask.
pub fn image_to_lesion_ratio(mask: &BinaryMask, cfg: &RatioConfig) -> usize {
    let Some(ratio) = lesion_ratio(mask, cfg.calibration) else {
        return NO_LESION_SEGMENTS;
    };
    let q = cfg.rounding_quantum as f64;
    let rounded = (ratio / q).round() * q;
    (rounded as usize).clamp(cfg.ns_min, cfg.ns_max)
}

pub fn derive_params(
    guidance: &BinaryMask,
    cfg: &RatioConfig,
    overrides: &SlicOverrides,
    source: GuidanceSource,
) -> GuidanceParams {
    GuidanceParams {
        n_segments: overrides
            .n_segments
            .unwrap_or_else(|| image_to_lesion_ratio(guidance, cfg)),
        compactness: overrides.compactness.unwrap_or(DEFAULT_COMPACTNESS),
        sigma: overrides.sigma.unwrap_or(DEFAULT_SIGMA),
        source,
    }
}

/// Stand-in for a low-resolution model prediction: block-majority
/// downsampling by `factor` followed by erosion with a `(2·erode_px + 1)`
/// square. Partial edge blocks vote over the pixels they contain; pixels
/// outside the frame count as background during erosion.
pub fn degrade_ground_truth(gt: &BinaryMask, factor: usize, erode_px: usize) -> Result<BinaryMask> {
    if factor == 0 {
        return Err(Error::ZeroFactor);
    }
    let (w, h) = gt.dims();
    let (ow, oh) = (w.div_ceil(factor), h.div_ceil(factor));
    let mut small = Vec::with_capacity(ow * oh);
    for by in 0..oh {
        for bx in 0..ow {
            let (x0, y0) = (bx * factor, by * factor);
            let (x1, y1) = ((x0 + factor).min(w), (y0 + factor).min(h));
            let mut ones = 0;
            for y in y0..y1 {
                ones += gt.data()[y * w + x0..y * w + x1]
                    .iter()
                    .filter(|&&v| v == 1)
                    .count();
            }
            let n = (x1 - x0) * (y1 - y0);
            small.push(u8::from(2 * ones > n));
        }
    }
    let small = BinaryMask::new(ow, oh, small)?;
    Ok(erode_square(&small, erode_px))
}

fn erode_square(mask: &BinaryMask, radius: usize) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = mask.dims();
    let src = mask.data();
    // square structuring element: a row-wise then column-wise min filter
    let mut rows = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let lo = x.checked_sub(radius);
            let hi = x + radius;
            rows[y * w + x] = match lo {
                Some(lo) if hi < w => *src[y * w + lo..=y * w + hi].iter().min().unwrap(),
                _ => 0,
            };
        }
    }
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        let Some(lo) = y.checked_sub(radius) else {
            continue;
        };
        if y + radius >= h {
            continue;
        }
        for x in 0..w {
            out[y * w + x] = (lo..=y + radius).map(|yy| rows[yy * w + x]).min().unwrap();
        }
    }
    BinaryMask::new(w, h, out).expect("erosion keeps values binary")
}
