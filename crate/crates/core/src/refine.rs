//! Guidance-driven superpixel selection and the end-to-end hybrid pipeline.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::color::srgb_to_lab;
use crate::error::{Error, Result};
use crate::guidance::{derive_params, GuidanceSource, RatioConfig, SlicOverrides};
use crate::raster::{normalize, resize_mask_nearest, BinaryMask, RgbImage};
use crate::slic::{
    cluster, gaussian_smooth, SlicConfig, SuperpixelLabeling, DEFAULT_MAX_ITER,
    DEFAULT_MIN_REGION_FACTOR, DEFAULT_RESIDUAL_PER_SEGMENT,
};

/// Fraction of each superpixel covered by the guidance mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelScores {
    pub ratios: Vec<f64>,
    pub best_label: u32,
    pub best_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionMode {
    /// Keep only the highest-scoring superpixel.
    SingleBest,
    /// Keep every superpixel scoring at least `tau`.
    Threshold { tau: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineConfig {
    pub selection: SelectionMode,
    pub ratio: RatioConfig,
    pub overrides: SlicOverrides,
    pub max_iter: usize,
    /// `None` uses `1e-3 · n_segments`.
    pub residual_tol: Option<f64>,
    pub min_region_factor: f64,
    pub guidance_source: GuidanceSource,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            selection: SelectionMode::SingleBest,
            ratio: RatioConfig::default(),
            overrides: SlicOverrides::default(),
            max_iter: DEFAULT_MAX_ITER,
            residual_tol: None,
            min_region_factor: DEFAULT_MIN_REGION_FACTOR,
            guidance_source: GuidanceSource::ExternalMask,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        self.ratio.validate()?;
        if let SelectionMode::Threshold { tau } = self.selection {
            if !(tau > 0.0 && tau <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "tau must be in (0, 1], got {tau}"
                )));
            }
        }
        if self.overrides.n_segments == Some(0) {
            return Err(Error::ZeroSegments);
        }
        if let Some(m) = self.overrides.compactness {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "compactness must be > 0, got {m}"
                )));
            }
        }
        if let Some(s) = self.overrides.sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::NegativeSigma(s));
            }
        }
        Ok(())
    }
}

/// `R_i = |s_i ∩ guidance| / |s_i|` for every superpixel.
pub fn score_superpixels(
    labeling: &SuperpixelLabeling,
    guidance: &BinaryMask,
) -> Result<SuperpixelScores> {
    if (labeling.width, labeling.height) != guidance.dims() {
        return Err(Error::DimensionMismatch {
            left: (labeling.width, labeling.height),
            right: guidance.dims(),
        });
    }
    let n = labeling.label_count();
    let mut hits = vec![0usize; n];
    let mut sizes = vec![0usize; n];
    for (&l, &g) in labeling.labels.iter().zip(guidance.data()) {
        sizes[l as usize] += 1;
        hits[l as usize] += g as usize;
    }
    let ratios: Vec<f64> = hits
        .iter()
        .zip(&sizes)
        .map(|(&h, &s)| if s == 0 { 0.0 } else { h as f64 / s as f64 })
        .collect();
    let mut best_label = 0u32;
    for (i, &r) in ratios.iter().enumerate() {
        if r > ratios[best_label as usize] {
            best_label = i as u32;
        }
    }
    let best_ratio = ratios.get(best_label as usize).copied().unwrap_or(0.0);
    Ok(SuperpixelScores {
        ratios,
        best_label,
        best_ratio,
    })
}

/// Highest-scoring label (lowest id on ties).
pub fn select_best(scores: &SuperpixelScores) -> Result<u32> {
    if scores.ratios.is_empty() || scores.best_ratio <= 0.0 {
        return Err(Error::NoGuidanceSignal);
    }
    Ok(scores.best_label)
}

/// Every label with `R_i >= tau`; falls back to the best label when none
/// reaches `tau`.
pub fn select_threshold(scores: &SuperpixelScores, tau: f64) -> Result<Vec<u32>> {
    let best = select_best(scores)?;
    let picked: Vec<u32> = scores
        .ratios
        .iter()
        .enumerate()
        .filter(|(_, &r)| r >= tau)
        .map(|(i, _)| i as u32)
        .collect();
    Ok(if picked.is_empty() {
        vec![best]
    } else {
        picked
    })
}

/// Mask with 1 exactly on the pixels whose label is in `selected`.
pub fn synthesize_mask(labeling: &SuperpixelLabeling, selected: &[u32]) -> Result<BinaryMask> {
    let n = labeling.label_count();
    let mut keep = vec![false; n];
    for &l in selected {
        *keep.get_mut(l as usize).ok_or(Error::UnknownLabel(l))? = true;
    }
    let data = labeling
        .labels
        .iter()
        .map(|&l| u8::from(keep[l as usize]))
        .collect();
    BinaryMask::new(labeling.width, labeling.height, data)
}

/// Parameters, counts and per-stage wall-clock of one hybrid run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub ns: usize,
    pub sigma: f64,
    pub compactness: f64,
    pub iterations: usize,
    pub best_r: f64,
    pub superpixels: usize,
    pub selected: usize,
    pub guidance_source: GuidanceSource,
    pub timings: StageTimings,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub convert: Duration,
    pub smooth: Duration,
    pub slic: Duration,
    pub score: Duration,
    pub total: Duration,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

impl RunReport {
    /// Flat `key=value` lines. Wall-clock entries are the `ms_*` keys; every
    /// other line is a deterministic function of the inputs.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "ns={}", self.ns);
        let _ = writeln!(s, "sigma={}", self.sigma);
        let _ = writeln!(s, "compactness={}", self.compactness);
        let _ = writeln!(s, "iterations={}", self.iterations);
        let _ = writeln!(s, "best_r={}", self.best_r);
        let _ = writeln!(s, "superpixels={}", self.superpixels);
        let _ = writeln!(s, "selected={}", self.selected);
        let _ = writeln!(s, "guidance={}", self.guidance_source.as_str());
        let _ = writeln!(s, "ms_convert={:.3}", ms(self.timings.convert));
        let _ = writeln!(s, "ms_smooth={:.3}", ms(self.timings.smooth));
        let _ = writeln!(s, "ms_slic={:.3}", ms(self.timings.slic));
        let _ = writeln!(s, "ms_score={:.3}", ms(self.timings.score));
        let _ = writeln!(s, "ms_total={:.3}", ms(self.timings.total));
        s
    }
}

#[derive(Debug, Clone)]
pub struct Segmentation {
    pub mask: BinaryMask,
    pub report: RunReport,
    pub superpixels: SuperpixelLabeling,
}

/// Full pipeline: normalize, convert to CIELAB, derive SLIC parameters from
/// the guidance mask, smooth, cluster, upscale the guidance to the image,
/// score superpixels and emit the selected ones as a mask.
pub fn hybrid_segment(
    image: &RgbImage,
    guidance: &BinaryMask,
    cfg: &RefineConfig,
) -> Result<Segmentation> {
    cfg.validate()?;
    let start = Instant::now();
    let mut timings = StageTimings::default();

    // an empty guidance mask scores zero everywhere; fail before the expensive part
    if guidance.is_empty() {
        return Err(Error::NoGuidanceSignal);
    }

    let t = Instant::now();
    let lab = srgb_to_lab(&normalize(image));
    timings.convert = t.elapsed();

    let params = derive_params(guidance, &cfg.ratio, &cfg.overrides, cfg.guidance_source);
    let n_pixels = image.width() * image.height();
    let slic_cfg = SlicConfig {
        n_segments: params.n_segments.min(n_pixels),
        compactness: params.compactness,
        sigma: params.sigma,
        max_iter: cfg.max_iter,
        residual_tol: cfg
            .residual_tol
            .unwrap_or(DEFAULT_RESIDUAL_PER_SEGMENT * params.n_segments as f64),
        min_region_factor: cfg.min_region_factor,
    };
    slic_cfg.validate(n_pixels)?;

    let t = Instant::now();
    let smoothed = gaussian_smooth(&lab, slic_cfg.sigma)?;
    drop(lab);
    timings.smooth = t.elapsed();

    let t = Instant::now();
    let superpixels = cluster(&smoothed, &slic_cfg)?;
    drop(smoothed);
    timings.slic = t.elapsed();

    let t = Instant::now();
    let resized = resize_mask_nearest(guidance, image.width(), image.height())?;
    let scores = score_superpixels(&superpixels, &resized)?;
    let selected = match cfg.selection {
        SelectionMode::SingleBest => vec![select_best(&scores)?],
        SelectionMode::Threshold { tau } => select_threshold(&scores, tau)?,
    };
    let mask = synthesize_mask(&superpixels, &selected)?;
    timings.score = t.elapsed();
    timings.total = start.elapsed();

    let report = RunReport {
        ns: slic_cfg.n_segments,
        sigma: slic_cfg.sigma,
        compactness: slic_cfg.compactness,
        iterations: superpixels.iterations_run,
        best_r: scores.best_ratio,
        superpixels: superpixels.label_count(),
        selected: selected.len(),
        guidance_source: cfg.guidance_source,
        timings,
    };
    Ok(Segmentation {
        mask,
        report,
        superpixels,
    })
}
