//! SLIC superpixels: grid seeding, gradient perturbation, windowed k-means in
//! the joint CIELAB + image plane space, and connectivity enforcement.
//!
//! Every tie resolves to the lowest center id or the raster-first pixel, so a
//! run is a pure function of its inputs.

use std::collections::{BTreeMap, HashMap};

use crate::color::LabImage;
use crate::error::{Error, Result};
use crate::raster::{flood_regions, Connectivity, RgbImage};

pub const DEFAULT_COMPACTNESS: f64 = 10.0;
pub const DEFAULT_SIGMA: f64 = 1.75;
pub const DEFAULT_MAX_ITER: usize = 10;
pub const DEFAULT_MIN_REGION_FACTOR: f64 = 0.25;
/// Convergence threshold per requested segment.
pub const DEFAULT_RESIDUAL_PER_SEGMENT: f64 = 1e-3;

/// Grid cells narrower than this skip perturbation: a 3x3 move could land
/// on a neighboring seed.
const MIN_PERTURB_STEP: f64 = 3.0;

/// A cluster center `[l, a, b, x, y]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterCenter {
    pub l: f64,
    pub a: f64,
    pub b: f64,
    pub x: f64,
    pub y: f64,
}

impl ClusterCenter {
    fn at(img: &LabImage, x: usize, y: usize) -> Self {
        let [l, a, b] = img.pixel(x, y);
        Self {
            l,
            a,
            b,
            x: x as f64,
            y: y as f64,
        }
    }

    fn l1_distance(&self, other: &ClusterCenter) -> f64 {
        (self.l - other.l).abs()
            + (self.a - other.a).abs()
            + (self.b - other.b).abs()
            + (self.x - other.x).abs()
            + (self.y - other.y).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlicConfig {
    pub n_segments: usize,
    pub compactness: f64,
    pub sigma: f64,
    pub max_iter: usize,
    pub residual_tol: f64,
    pub min_region_factor: f64,
}

impl SlicConfig {
    /// Defaults for `n_segments` requested superpixels.
    pub fn new(n_segments: usize) -> Self {
        Self {
            n_segments,
            compactness: DEFAULT_COMPACTNESS,
            sigma: DEFAULT_SIGMA,
            max_iter: DEFAULT_MAX_ITER,
            residual_tol: DEFAULT_RESIDUAL_PER_SEGMENT * n_segments as f64,
            min_region_factor: DEFAULT_MIN_REGION_FACTOR,
        }
    }

    pub fn validate(&self, n_pixels: usize) -> Result<()> {
        if self.n_segments == 0 {
            return Err(Error::ZeroSegments);
        }
        if self.n_segments > n_pixels {
            return Err(Error::TooManySegments {
                segments: self.n_segments,
                pixels: n_pixels,
            });
        }
        if !(self.compactness > 0.0 && self.compactness.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "compactness must be > 0, got {}",
                self.compactness
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::NegativeSigma(self.sigma));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if self.residual_tol.is_nan() || self.residual_tol < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "residual_tol must be >= 0, got {}",
                self.residual_tol
            )));
        }
        if !(self.min_region_factor > 0.0 && self.min_region_factor <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "min_region_factor must be in (0, 1], got {}",
                self.min_region_factor
            )));
        }
        Ok(())
    }
}

/// Final superpixel labeling; labels are dense `0..label_count()` in raster
/// order of first appearance, and `centers[i]` belongs to label `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelLabeling {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub centers: Vec<ClusterCenter>,
    pub initial_centers: usize,
    pub iterations_run: usize,
    pub final_residual: f64,
}

impl SuperpixelLabeling {
    pub fn label_count(&self) -> usize {
        self.centers.len()
    }

    /// Pixel count per label.
    pub fn areas(&self) -> Vec<usize> {
        let mut areas = vec![0usize; self.label_count()];
        for &l in &self.labels {
            areas[l as usize] += 1;
        }
        areas
    }

    /// Number of 4-adjacent pixel pairs carrying different labels.
    pub fn boundary_length(&self) -> usize {
        boundary_length(self.width, self.height, &self.labels)
    }

    /// 16-bit binary PGM (P5, big-endian samples) of the label raster.
    pub fn to_pgm16(&self) -> Result<Vec<u8>> {
        if self.label_count() > usize::from(u16::MAX) + 1 {
            return Err(Error::InvalidConfig(format!(
                "{} labels do not fit a 16-bit raster",
                self.label_count()
            )));
        }
        let mut out = format!("P5\n{} {}\n65535\n", self.width, self.height).into_bytes();
        out.reserve(self.labels.len() * 2);
        for &l in &self.labels {
            out.extend_from_slice(&(l as u16).to_be_bytes());
        }
        Ok(out)
    }

    /// Copies `img` and paints superpixel boundaries in `color`. A pixel is
    /// on a boundary when its right or lower neighbor has another label.
    pub fn overlay(&self, img: &RgbImage, color: [u8; 3]) -> Result<RgbImage> {
        if (img.width(), img.height()) != (self.width, self.height) {
            return Err(Error::DimensionMismatch {
                left: (img.width(), img.height()),
                right: (self.width, self.height),
            });
        }
        let mut out = img.clone();
        let w = self.width;
        for y in 0..self.height {
            for x in 0..w {
                let l = self.labels[y * w + x];
                let right = x + 1 < w && self.labels[y * w + x + 1] != l;
                let down = y + 1 < self.height && self.labels[(y + 1) * w + x] != l;
                if right || down {
                    out.set_pixel(x, y, color);
                }
            }
        }
        Ok(out)
    }
}

pub(crate) fn boundary_length(width: usize, height: usize, labels: &[u32]) -> usize {
    let mut n = 0;
    for y in 0..height {
        for x in 0..width {
            let l = labels[y * width + x];
            if x + 1 < width && labels[y * width + x + 1] != l {
                n += 1;
            }
            if y + 1 < height && labels[(y + 1) * width + x] != l {
                n += 1;
            }
        }
    }
    n
}

/// Normalized 1-D Gaussian taps over `[-ceil(3σ), ceil(3σ)]`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let denom = 2.0 * sigma * sigma;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / denom).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable Gaussian blur of each channel with replicated borders.
pub fn gaussian_smooth(img: &LabImage, sigma: f64) -> Result<LabImage> {
    if sigma.is_nan() || sigma < 0.0 {
        return Err(Error::NegativeSigma(sigma));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let (w, h) = (img.width(), img.height());
    let src = img.data();

    let mut tmp = vec![0.0; src.len()];
    for y in 0..h {
        let row = &src[y * w * 3..(y + 1) * w * 3];
        let out = &mut tmp[y * w * 3..(y + 1) * w * 3];
        for x in 0..w {
            let mut acc = [0.0; 3];
            for (k, &wt) in kernel.iter().enumerate() {
                let sx = (x as isize + k as isize - radius).clamp(0, w as isize - 1) as usize;
                acc[0] += wt * row[sx * 3];
                acc[1] += wt * row[sx * 3 + 1];
                acc[2] += wt * row[sx * 3 + 2];
            }
            out[x * 3..x * 3 + 3].copy_from_slice(&acc);
        }
    }

    let mut result = img.clone();
    let dst = result.data_mut();
    let stride = w * 3;
    for y in 0..h {
        let out = &mut dst[y * stride..(y + 1) * stride];
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, &wt) in kernel.iter().enumerate() {
            let sy = (y as isize + k as isize - radius).clamp(0, h as isize - 1) as usize;
            let row = &tmp[sy * stride..(sy + 1) * stride];
            for (o, &s) in out.iter_mut().zip(row) {
                *o += wt * s;
            }
        }
    }
    Ok(result)
}

/// Grid interval `S = sqrt(N / K)`.
pub fn grid_interval(n_pixels: usize, n_segments: usize) -> Result<f64> {
    if n_segments == 0 {
        return Err(Error::ZeroSegments);
    }
    if n_pixels < n_segments {
        return Err(Error::TooManySegments {
            segments: n_segments,
            pixels: n_pixels,
        });
    }
    Ok((n_pixels as f64 / n_segments as f64).sqrt())
}

/// Seed grid: `columns x rows` cells of size `step_x x step_y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridLayout {
    pub columns: usize,
    pub rows: usize,
    pub step_x: f64,
    pub step_y: f64,
}

impl GridLayout {
    /// Picks the grid whose seed count is closest to `k` (in log ratio) while
    /// keeping cells close to square. Counts within `[0.75k, 1.3k]` always
    /// win over counts outside it. Ties keep the first candidate found
    /// scanning rows, then columns, upward.
    pub fn for_image(width: usize, height: usize, k: usize) -> Result<Self> {
        grid_interval(width * height, k)?;
        let mut best: Option<(bool, f64, usize, usize)> = None;
        for rows in 1..=height.min(k) {
            let ideal = k as f64 / rows as f64;
            let lo = (ideal.floor() as usize).clamp(1, width);
            let hi = (ideal.ceil() as usize).clamp(1, width);
            for columns in [lo, hi] {
                let count = (columns * rows) as f64;
                let aspect = (width as f64 / columns as f64) / (height as f64 / rows as f64);
                let cost = (count / k as f64).ln().abs() + 0.5 * aspect.ln().abs();
                let in_range = count >= 0.75 * k as f64 && count <= 1.3 * k as f64;
                let better = match best {
                    None => true,
                    Some((r, c, _, _)) => (in_range && !r) || (in_range == r && cost < c),
                };
                if better {
                    best = Some((in_range, cost, columns, rows));
                }
            }
        }
        let (_, _, columns, rows) = best.expect("k >= 1 and height >= 1");
        Ok(Self {
            columns,
            rows,
            step_x: width as f64 / columns as f64,
            step_y: height as f64 / rows as f64,
        })
    }

    pub fn len(&self) -> usize {
        self.columns * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Seed pixel of cell `(i, j)`: the pixel containing the cell midpoint.
    pub fn seed(&self, i: usize, j: usize) -> (usize, usize) {
        (
            (self.step_x * (i as f64 + 0.5)).floor() as usize,
            (self.step_y * (j as f64 + 0.5)).floor() as usize,
        )
    }

    fn allows_perturbation(&self) -> bool {
        self.step_x >= MIN_PERTURB_STEP && self.step_y >= MIN_PERTURB_STEP
    }
}

/// Seeds one center per grid cell, in raster order of cells.
pub fn init_centers(img: &LabImage, k: usize) -> Result<Vec<ClusterCenter>> {
    let layout = GridLayout::for_image(img.width(), img.height(), k)?;
    Ok(seed_centers(img, &layout))
}

fn seed_centers(img: &LabImage, layout: &GridLayout) -> Vec<ClusterCenter> {
    let mut centers = Vec::with_capacity(layout.len());
    for j in 0..layout.rows {
        for i in 0..layout.columns {
            let (x, y) = layout.seed(i, j);
            centers.push(ClusterCenter::at(img, x, y));
        }
    }
    centers
}

/// Squared-difference gradient `‖I(x+1,y) − I(x−1,y)‖² + ‖I(x,y+1) − I(x,y−1)‖²`.
pub fn gradient_magnitude(img: &LabImage, x: usize, y: usize) -> Result<f64> {
    if x == 0 || y == 0 || x + 1 >= img.width() || y + 1 >= img.height() {
        return Err(Error::BorderPixel { x, y });
    }
    Ok(gradient_unchecked(img, x, y))
}

#[inline]
fn gradient_unchecked(img: &LabImage, x: usize, y: usize) -> f64 {
    let sq = |p: [f64; 3], q: [f64; 3]| {
        let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
        d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
    };
    sq(img.pixel(x + 1, y), img.pixel(x - 1, y)) + sq(img.pixel(x, y + 1), img.pixel(x, y - 1))
}

/// Moves each center to the lowest-gradient interior pixel of its 3x3
/// neighborhood. A center already at a minimum stays put; other ties go to
/// the raster-first pixel.
pub fn perturb_centers(img: &LabImage, centers: &[ClusterCenter]) -> Vec<ClusterCenter> {
    let (w, h) = (img.width() as isize, img.height() as isize);
    centers
        .iter()
        .map(|c| {
            let (cx, cy) = (c.x.round() as isize, c.y.round() as isize);
            let interior = |x: isize, y: isize| x >= 1 && y >= 1 && x <= w - 2 && y <= h - 2;
            let mut best: Option<(f64, isize, isize)> = None;
            if interior(cx, cy) {
                best = Some((gradient_unchecked(img, cx as usize, cy as usize), cx, cy));
            }
            for y in cy - 1..=cy + 1 {
                for x in cx - 1..=cx + 1 {
                    if !interior(x, y) {
                        continue;
                    }
                    let g = gradient_unchecked(img, x as usize, y as usize);
                    if best.map_or(true, |(bg, _, _)| g < bg) {
                        best = Some((g, x, y));
                    }
                }
            }
            match best {
                Some((_, x, y)) => ClusterCenter::at(img, x as usize, y as usize),
                None => *c,
            }
        })
        .collect()
}

#[inline]
fn joint_distance(px: [f64; 3], x: f64, y: f64, c: &ClusterCenter, spatial_weight: f64) -> f64 {
    let dl = c.l - px[0];
    let da = c.a - px[1];
    let db = c.b - px[2];
    let dx = c.x - x;
    let dy = c.y - y;
    let d_lab = (dl * dl + da * da + db * db).sqrt();
    let d_xy = (dx * dx + dy * dy).sqrt();
    d_lab + spatial_weight * d_xy
}

/// Pixel span `[ceil(c - s), floor(c + s)]` clipped to `[0, len)`.
#[inline]
fn window(c: f64, s: f64, len: usize) -> Option<(usize, usize)> {
    let lo = (c - s).ceil().max(0.0);
    let hi = (c + s).floor().min(len as f64 - 1.0);
    (lo <= hi).then_some((lo as usize, hi as usize))
}

/// Assigns every pixel to the center minimizing `d_lab + (m / S)·d_xy` among
/// centers whose `2S x 2S` window covers it. Uncovered pixels fall back to
/// the globally nearest center. Ties go to the lowest center id.
pub fn assign_pixels(
    img: &LabImage,
    centers: &[ClusterCenter],
    m: f64,
    s: f64,
) -> Result<Vec<u32>> {
    if centers.is_empty() {
        return Err(Error::NoCenters);
    }
    if !(s > 0.0 && m > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "need S > 0 and m > 0, got S = {s}, m = {m}"
        )));
    }
    let (w, h) = (img.width(), img.height());
    let spatial_weight = m / s;
    let data = img.data();
    let mut labels = vec![u32::MAX; w * h];
    let mut dist = vec![f64::INFINITY; w * h];

    for (k, c) in centers.iter().enumerate() {
        let (Some((x0, x1)), Some((y0, y1))) = (window(c.x, s, w), window(c.y, s, h)) else {
            continue;
        };
        for y in y0..=y1 {
            let row = y * w;
            for x in x0..=x1 {
                let i = row + x;
                let px = [data[i * 3], data[i * 3 + 1], data[i * 3 + 2]];
                let d = joint_distance(px, x as f64, y as f64, c, spatial_weight);
                if d < dist[i] {
                    dist[i] = d;
                    labels[i] = k as u32;
                }
            }
        }
    }

    for (i, label) in labels.iter_mut().enumerate() {
        if *label != u32::MAX {
            continue;
        }
        let px = [data[i * 3], data[i * 3 + 1], data[i * 3 + 2]];
        let (x, y) = ((i % w) as f64, (i / w) as f64);
        let mut best = f64::INFINITY;
        for (k, c) in centers.iter().enumerate() {
            let d = joint_distance(px, x, y, c, spatial_weight);
            if d < best {
                best = d;
                *label = k as u32;
            }
        }
    }
    Ok(labels)
}

/// Recomputes each center as the mean `[l, a, b, x, y]` of its pixels and
/// returns the L1 residual against `old`. Centers with no pixels keep their
/// previous value.
pub fn update_centers(
    img: &LabImage,
    labels: &[u32],
    old: &[ClusterCenter],
) -> (Vec<ClusterCenter>, f64) {
    let w = img.width();
    let mut sums = vec![[0.0f64; 5]; old.len()];
    let mut counts = vec![0usize; old.len()];
    for (i, (&label, px)) in labels.iter().zip(img.data().chunks_exact(3)).enumerate() {
        let k = label as usize;
        let s = &mut sums[k];
        s[0] += px[0];
        s[1] += px[1];
        s[2] += px[2];
        s[3] += (i % w) as f64;
        s[4] += (i / w) as f64;
        counts[k] += 1;
    }
    let mut residual = 0.0;
    let centers = old
        .iter()
        .zip(sums.iter().zip(&counts))
        .map(|(prev, (s, &n))| {
            if n == 0 {
                return *prev;
            }
            let n = n as f64;
            let c = ClusterCenter {
                l: s[0] / n,
                a: s[1] / n,
                b: s[2] / n,
                x: s[3] / n,
                y: s[4] / n,
            };
            residual += c.l1_distance(prev);
            c
        })
        .collect();
    (centers, residual)
}

/// Removes stray fragments so every label is one 4-connected region.
///
/// Each label keeps its largest region (lowest region id on ties) if that
/// region has at least `min_region_factor·S²` pixels. Every other region is
/// absorbed into the already-resolved neighboring label it shares the most
/// edges with (lowest label on ties), sweeping regions in raster order until
/// all are resolved.
pub fn enforce_connectivity(
    width: usize,
    height: usize,
    labels: &[u32],
    s: f64,
    min_region_factor: f64,
) -> Vec<u32> {
    let (regions, areas) = flood_regions(
        width,
        height,
        Connectivity::Four,
        |_| true,
        |p, q| labels[p] == labels[q],
    );
    let n_regions = areas.len();
    let min_area = min_region_factor * s * s;

    let mut region_label = vec![0u32; n_regions];
    let mut seen = vec![false; n_regions];
    for (i, &r) in regions.iter().enumerate() {
        let r = r as usize - 1;
        if !seen[r] {
            seen[r] = true;
            region_label[r] = labels[i];
        }
    }

    let mut primary: HashMap<u32, usize> = HashMap::new();
    for r in 0..n_regions {
        primary
            .entry(region_label[r])
            .and_modify(|p| {
                if areas[r] > areas[*p] {
                    *p = r;
                }
            })
            .or_insert(r);
    }

    let mut resolved: Vec<Option<u32>> = (0..n_regions)
        .map(|r| {
            (primary[&region_label[r]] == r && areas[r] as f64 >= min_area)
                .then_some(region_label[r])
        })
        .collect();
    if resolved.iter().all(Option::is_none) {
        let mut largest = 0;
        for r in 1..n_regions {
            if areas[r] > areas[largest] {
                largest = r;
            }
        }
        resolved[largest] = Some(region_label[largest]);
    }

    let mut shared: Vec<HashMap<usize, usize>> = vec![HashMap::new(); n_regions];
    let mut touch = |a: u32, b: u32| {
        if a != b {
            let (a, b) = (a as usize - 1, b as usize - 1);
            *shared[a].entry(b).or_insert(0) += 1;
            *shared[b].entry(a).or_insert(0) += 1;
        }
    };
    for y in 0..height {
        for x in 0..width {
            let r = regions[y * width + x];
            if x + 1 < width {
                touch(r, regions[y * width + x + 1]);
            }
            if y + 1 < height {
                touch(r, regions[(y + 1) * width + x]);
            }
        }
    }

    let mut pending: Vec<usize> = (0..n_regions).filter(|&r| resolved[r].is_none()).collect();
    while !pending.is_empty() {
        let before = pending.len();
        pending.retain(|&r| {
            let mut by_label: BTreeMap<u32, usize> = BTreeMap::new();
            for (&q, &edges) in &shared[r] {
                if let Some(l) = resolved[q] {
                    *by_label.entry(l).or_insert(0) += edges;
                }
            }
            // BTreeMap iterates labels ascending, so strict > keeps the lowest on ties.
            let mut pick: Option<(u32, usize)> = None;
            for (&l, &edges) in &by_label {
                if pick.map_or(true, |(_, e)| edges > e) {
                    pick = Some((l, edges));
                }
            }
            match pick {
                Some((l, _)) => {
                    resolved[r] = Some(l);
                    false
                }
                None => true,
            }
        });
        assert!(
            pending.len() < before,
            "region adjacency graph is connected"
        );
    }

    regions
        .iter()
        .map(|&r| resolved[r as usize - 1].expect("all regions resolved"))
        .collect()
}

/// Renumbers labels densely in raster order of first appearance and reorders
/// `centers` to match.
fn relabel_dense(labels: &mut [u32], centers: &[ClusterCenter]) -> Vec<ClusterCenter> {
    let mut map = vec![u32::MAX; centers.len()];
    let mut dense = Vec::new();
    for l in labels.iter_mut() {
        let slot = &mut map[*l as usize];
        if *slot == u32::MAX {
            *slot = dense.len() as u32;
            dense.push(centers[*l as usize]);
        }
        *l = *slot;
    }
    dense
}

/// Smooths with `cfg.sigma`, then clusters.
pub fn slic(img: &LabImage, cfg: &SlicConfig) -> Result<SuperpixelLabeling> {
    cfg.validate(img.len())?;
    let smoothed = gaussian_smooth(img, cfg.sigma)?;
    cluster(&smoothed, cfg)
}

/// SLIC on an already smoothed image; `cfg.sigma` is ignored.
pub fn cluster(img: &LabImage, cfg: &SlicConfig) -> Result<SuperpixelLabeling> {
    cfg.validate(img.len())?;
    let (w, h) = (img.width(), img.height());
    let s = grid_interval(w * h, cfg.n_segments)?;
    let layout = GridLayout::for_image(w, h, cfg.n_segments)?;
    let mut centers = seed_centers(img, &layout);
    if layout.allows_perturbation() {
        centers = perturb_centers(img, &centers);
    }
    let initial_centers = centers.len();

    let mut labels = Vec::new();
    let mut iterations_run = 0;
    let mut final_residual = f64::INFINITY;
    for _ in 0..cfg.max_iter {
        labels = assign_pixels(img, &centers, cfg.compactness, s)?;
        let (next, residual) = update_centers(img, &labels, &centers);
        centers = next;
        iterations_run += 1;
        final_residual = residual;
        if residual < cfg.residual_tol {
            break;
        }
    }

    let mut labels = enforce_connectivity(w, h, &labels, s, cfg.min_region_factor);
    let centers = relabel_dense(&mut labels, &centers);
    Ok(SuperpixelLabeling {
        width: w,
        height: h,
        labels,
        centers,
        initial_centers,
        iterations_run,
        final_residual,
    })
}
