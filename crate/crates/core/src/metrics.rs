//! Overlap, confusion-rate and distance metrics for binary masks, plus the
//! Kruskal–Wallis H test used to compare quality groups.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::raster::BinaryMask;

fn overlap(a: &BinaryMask, b: &BinaryMask) -> Result<(usize, usize, usize)> {
    a.ensure_same_dims(b)?;
    let mut inter = 0;
    let (mut na, mut nb) = (0, 0);
    for (&x, &y) in a.data().iter().zip(b.data()) {
        inter += (x & y) as usize;
        na += x as usize;
        nb += y as usize;
    }
    Ok((inter, na, nb))
}

/// Jaccard index. Two empty masks agree perfectly (1.0).
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let (inter, na, nb) = overlap(a, b)?;
    let union = na + nb - inter;
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

/// Dice coefficient. Two empty masks agree perfectly (1.0).
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let (inter, na, nb) = overlap(a, b)?;
    Ok(if na + nb == 0 {
        1.0
    } else {
        2.0 * inter as f64 / (na + nb) as f64
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// `tp / (tp + fp)`; `None` when nothing was predicted.
    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    /// `tp / (tp + fn)`; `None` when the ground truth is empty.
    pub fn sensitivity(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `tn / (tn + fp)`; `None` when the ground truth covers the frame.
    pub fn specificity(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }
}

pub fn confusion(pred: &BinaryMask, gt: &BinaryMask) -> Result<ConfusionCounts> {
    pred.ensure_same_dims(gt)?;
    let mut c = ConfusionCounts {
        tp: 0,
        fp: 0,
        fn_: 0,
        tn: 0,
    };
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        match (p, g) {
            (1, 1) => c.tp += 1,
            (1, _) => c.fp += 1,
            (_, 1) => c.fn_ += 1,
            _ => c.tn += 1,
        }
    }
    Ok(c)
}

/// `1 − ||A| − |B|| / (|A| + |B|)`.
pub fn volumetric_similarity(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let (_, na, nb) = overlap(a, b)?;
    if na + nb == 0 {
        return Err(Error::BothEmpty);
    }
    Ok(1.0 - na.abs_diff(nb) as f64 / (na + nb) as f64)
}

/// Exact squared Euclidean distance from every pixel to the nearest
/// foreground pixel of `mask` (separable lower-envelope transform).
fn squared_distance_to(mask: &BinaryMask) -> Vec<f64> {
    let (w, h) = mask.dims();
    let mut grid: Vec<f64> = mask
        .data()
        .iter()
        .map(|&v| if v == 1 { 0.0 } else { f64::INFINITY })
        .collect();
    let n = w.max(h);
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];

    for x in 0..w {
        for y in 0..h {
            f[y] = grid[y * w + x];
        }
        lower_envelope(&f[..h], &mut d[..h], &mut v, &mut z);
        for y in 0..h {
            grid[y * w + x] = d[y];
        }
    }
    for y in 0..h {
        f[..w].copy_from_slice(&grid[y * w..(y + 1) * w]);
        lower_envelope(&f[..w], &mut d[..w], &mut v, &mut z);
        grid[y * w..(y + 1) * w].copy_from_slice(&d[..w]);
    }
    grid
}

/// 1-D transform `d[q] = min_p (q − p)² + f[p]`.
fn lower_envelope(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let Some(first) = f.iter().position(|x| x.is_finite()) else {
        d.iter_mut().for_each(|x| *x = f64::INFINITY);
        return;
    };
    let mut k = 0;
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        let intersect =
            |p: usize| ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
        let mut s = intersect(v[k]);
        // z[0] is -inf, so this stops at k = 0
        while s <= z[k] {
            k -= 1;
            s = intersect(v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        *out = dq * dq + f[p];
    }
}

/// Largest distance from a foreground pixel of `from` to the nearest
/// foreground pixel of `to`.
pub fn directed_hausdorff(from: &BinaryMask, to: &BinaryMask) -> Result<f64> {
    from.ensure_same_dims(to)?;
    if from.is_empty() || to.is_empty() {
        return Err(Error::EmptyMask);
    }
    let dist = squared_distance_to(to);
    let worst = from
        .data()
        .iter()
        .zip(&dist)
        .filter(|(&v, _)| v == 1)
        .map(|(_, &d)| d)
        .fold(0.0f64, f64::max);
    Ok(worst.sqrt())
}

/// Symmetric Hausdorff distance in pixels over the full foreground sets.
pub fn hausdorff(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    Ok(directed_hausdorff(a, b)?.max(directed_hausdorff(b, a)?))
}

/// Per-image evaluation; rates that are 0/0 are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub iou: f64,
    pub dice: f64,
    pub precision: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    #[serde(rename = "vs")]
    pub volumetric_similarity: Option<f64>,
    pub hausdorff_px: Option<f64>,
}

pub fn evaluate(pred: &BinaryMask, gt: &BinaryMask) -> Result<MetricsReport> {
    let c = confusion(pred, gt)?;
    let vs = match volumetric_similarity(pred, gt) {
        Ok(v) => Some(v),
        Err(Error::BothEmpty) => None,
        Err(e) => return Err(e),
    };
    let hd = match hausdorff(pred, gt) {
        Ok(v) => Some(v),
        Err(Error::EmptyMask) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricsReport {
        iou: iou(pred, gt)?,
        dice: dice(pred, gt)?,
        precision: c.precision(),
        sensitivity: c.sensitivity(),
        specificity: c.specificity(),
        volumetric_similarity: vs,
        hausdorff_px: hd,
    })
}

/// Quality bands over Dice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum QualityBand {
    Good,
    Moderate,
    Poor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandThresholds {
    /// Dice at or above this is `Good`.
    pub good: f64,
    /// Dice at or above this (and below `good`) is `Moderate`.
    pub moderate: f64,
}

impl Default for BandThresholds {
    fn default() -> Self {
        Self {
            good: 0.8,
            moderate: 0.5,
        }
    }
}

impl BandThresholds {
    pub fn classify(&self, dice: f64) -> QualityBand {
        if dice >= self.good {
            QualityBand::Good
        } else if dice >= self.moderate {
            QualityBand::Moderate
        } else {
            QualityBand::Poor
        }
    }
}

/// Mean with a two-sided 95% Student-t confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCi {
    pub n: usize,
    pub mean: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

pub fn mean_ci95(values: &[f64]) -> Option<MeanCi> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Some(MeanCi {
            n,
            mean,
            ci_low: None,
            ci_high: None,
        });
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("n >= 2 gives positive degrees of freedom")
        .inverse_cdf(0.975);
    let half = t * (var / n as f64).sqrt();
    Some(MeanCi {
        n,
        mean,
        ci_low: Some(mean - half),
        ci_high: Some(mean + half),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KruskalWallis {
    pub h: f64,
    pub p: f64,
    pub df: usize,
}

/// Kruskal–Wallis H with tie correction; p from the chi-square upper tail
/// with `groups − 1` degrees of freedom. All-tied data gives H = 0, p = 1.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<KruskalWallis> {
    if groups.len() < 2 {
        return Err(Error::TooFewGroups(groups.len()));
    }
    if let Some(i) = groups.iter().position(|g| g.is_empty()) {
        return Err(Error::EmptyGroup(i));
    }
    let mut pooled: Vec<(f64, usize)> = groups
        .iter()
        .enumerate()
        .flat_map(|(g, vals)| vals.iter().map(move |&v| (v, g)))
        .collect();
    let n = pooled.len();
    if n < 3 {
        return Err(Error::TooFewObservations(n));
    }
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut rank_sums = vec![0.0; groups.len()];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j share their average
        let avg = (i + 1 + j) as f64 / 2.0;
        for &(_, g) in &pooled[i..j] {
            rank_sums[g] += avg;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }

    let nf = n as f64;
    let df = groups.len() - 1;
    let correction = 1.0 - tie_term / (nf * nf * nf - nf);
    if correction <= 0.0 {
        return Ok(KruskalWallis { h: 0.0, p: 1.0, df });
    }
    let grand = (nf + 1.0) / 2.0;
    let spread: f64 = groups
        .iter()
        .zip(&rank_sums)
        .map(|(g, &r)| {
            let k = g.len() as f64;
            let dev = r / k - grand;
            k * dev * dev
        })
        .sum();
    let h = 12.0 / (nf * (nf + 1.0)) * spread / correction;
    let p = ChiSquared::new(df as f64).expect("df >= 1").sf(h);
    Ok(KruskalWallis { h, p, df })
}
