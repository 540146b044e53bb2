//! Raster types shared by every stage: 8-bit RGB input, its unit-range
//! normalization, binary masks and connected-component labelings.

use std::io::Cursor;
use std::path::Path;

use image::{ColorType, DynamicImage, ImageEncoder, ImageReader};

use crate::error::{Error, Result};

/// Smallest accepted width/height. SLIC's gradient needs a one-pixel interior.
pub const MIN_DIMENSION: usize = 3;

/// Row-major interleaved 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width < MIN_DIMENSION || height < MIN_DIMENSION {
            return Err(Error::TooSmall { width, height });
        }
        check_len(width, height, 3, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Solid image filled with one color.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(width * height * 3)
            .collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }
}

/// RGB samples rescaled to `[0, 1)` by dividing by 256.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl NormalizedImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Row-major mask with values in `{0, 1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroDimension);
        }
        check_len(width, height, 1, data.len())?;
        if let Some((i, &v)) = data.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(Error::NonBinary(v, i));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0; width * height])
    }

    pub fn ones(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![1; width * height])
    }

    /// Builds a mask by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(u8::from(f(x, y)));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] == 1
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.data[y * self.width + x] = u8::from(on);
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// Coordinates of every set pixel in raster order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(move |(i, _)| (i % w, i / w))
    }

    pub fn ensure_same_dims(&self, other: &BinaryMask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;

    fn try_from(n: u8) -> Result<Self> {
        match n {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(Error::InvalidConfig(format!(
                "connectivity must be 4 or 8, got {other}"
            ))),
        }
    }
}

/// Connected components of a mask's foreground. Id 0 is background; ids
/// `1..=count` are assigned in raster order of each component's first pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    areas: Vec<usize>,
}

impl ComponentLabeling {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn count(&self) -> usize {
        self.areas.len()
    }

    /// Pixel count of component `id` (1-based). Returns 0 for unknown ids.
    pub fn area(&self, id: u32) -> usize {
        match id {
            0 => 0,
            id => self.areas.get(id as usize - 1).copied().unwrap_or(0),
        }
    }

    /// Areas indexed by `id - 1`.
    pub fn areas(&self) -> &[usize] {
        &self.areas
    }

    /// Largest component as `(id, area)`; ties resolve to the lowest id.
    pub fn largest(&self) -> Option<(u32, usize)> {
        let mut best: Option<(u32, usize)> = None;
        for (i, &a) in self.areas.iter().enumerate() {
            if best.map_or(true, |(_, b)| a > b) {
                best = Some((i as u32 + 1, a));
            }
        }
        best
    }
}

fn check_len(width: usize, height: usize, channels: usize, actual: usize) -> Result<()> {
    let expected = width * height * channels;
    if expected != actual {
        return Err(Error::BufferLength {
            width,
            height,
            expected,
            actual,
        });
    }
    Ok(())
}

fn decode(path: &Path) -> Result<DynamicImage> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let decode_err = |reason: String| Error::Decode {
        path: path.to_path_buf(),
        reason,
    };
    ImageReader::open(path)?
        .with_guessed_format()?
        .decode()
        .map_err(|e| decode_err(e.to_string()))
}

/// Loads an 8-bit PNG or PPM/PGM as RGB. Grayscale is replicated into all
/// three channels and alpha is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let img = decode(path)?;
    let rgb = match img.color() {
        ColorType::L8 | ColorType::La8 | ColorType::Rgb8 | ColorType::Rgba8 => img.to_rgb8(),
        other => {
            return Err(Error::Decode {
                path: path.to_path_buf(),
                reason: format!("unsupported pixel format {other:?}, expected 8-bit"),
            })
        }
    };
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    RgbImage::new(w, h, rgb.into_raw())
}

/// How `load_mask` treats files with more than one channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskChannels {
    /// Multi-channel files are a decode error.
    #[default]
    Reject,
    /// Multi-channel files are reduced to luminance before thresholding.
    Collapse,
}

/// Loads a single-channel 8-bit mask. Samples `>= 128` become 1. Files whose
/// maximum sample is 1 are taken as already-binary 0/1 rasters.
pub fn load_mask(path: impl AsRef<Path>, channels: MaskChannels) -> Result<BinaryMask> {
    let path = path.as_ref();
    let img = decode(path)?;
    let gray = match (img.color(), channels) {
        (ColorType::L8, _) => img.into_luma8(),
        (ColorType::La8 | ColorType::Rgb8 | ColorType::Rgba8, MaskChannels::Collapse) => {
            img.to_luma8()
        }
        (other, _) => {
            return Err(Error::Decode {
                path: path.to_path_buf(),
                reason: format!("mask must be single-channel 8-bit, found {other:?}"),
            })
        }
    };
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    Ok(binarize(w, h, gray.into_raw()))
}

fn binarize(width: usize, height: usize, mut samples: Vec<u8>) -> BinaryMask {
    let raw01 = samples.iter().all(|&v| v <= 1);
    if !raw01 {
        for v in samples.iter_mut() {
            *v = u8::from(*v >= 128);
        }
    }
    BinaryMask {
        width,
        height,
        data: samples,
    }
}

/// Encodes a mask as a single-channel PNG with foreground 255.
pub fn encode_mask_png(mask: &BinaryMask) -> Result<Vec<u8>> {
    let samples: Vec<u8> = mask.data.iter().map(|&v| v * 255).collect();
    encode_png(
        &samples,
        mask.width,
        mask.height,
        image::ExtendedColorType::L8,
    )
}

pub fn encode_rgb_png(img: &RgbImage) -> Result<Vec<u8>> {
    encode_png(
        &img.data,
        img.width,
        img.height,
        image::ExtendedColorType::Rgb8,
    )
}

fn encode_png(
    samples: &[u8],
    width: usize,
    height: usize,
    color: image::ExtendedColorType,
) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(samples, width as u32, height as u32, color)
        .map_err(|e| Error::Encode {
            path: Default::default(),
            reason: e.to_string(),
        })?;
    Ok(out.into_inner())
}

pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_mask_png(mask)?)?;
    Ok(())
}

pub fn save_rgb(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_rgb_png(img)?)?;
    Ok(())
}

/// Divides every sample by 256.
pub fn normalize(img: &RgbImage) -> NormalizedImage {
    NormalizedImage {
        width: img.width,
        height: img.height,
        data: img.data.iter().map(|&v| f64::from(v) / 256.0).collect(),
    }
}

/// Nearest-neighbor resize. Output pixel `(x, y)` samples source pixel
/// `(floor(x * w / tw), floor(y * h / th))`.
pub fn resize_mask_nearest(
    mask: &BinaryMask,
    target_w: usize,
    target_h: usize,
) -> Result<BinaryMask> {
    if target_w == 0 || target_h == 0 {
        return Err(Error::ZeroDimension);
    }
    if (target_w, target_h) == mask.dims() {
        return Ok(mask.clone());
    }
    let xs: Vec<usize> = (0..target_w).map(|x| x * mask.width / target_w).collect();
    let mut data = Vec::with_capacity(target_w * target_h);
    for y in 0..target_h {
        let row = (y * mask.height / target_h) * mask.width;
        data.extend(xs.iter().map(|&sx| mask.data[row + sx]));
    }
    Ok(BinaryMask {
        width: target_w,
        height: target_h,
        data,
    })
}

pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> ComponentLabeling {
    let (labels, areas) = flood_regions(
        mask.width,
        mask.height,
        connectivity,
        |i| mask.data[i] == 1,
        |_, _| true,
    );
    ComponentLabeling {
        width: mask.width,
        height: mask.height,
        labels,
        areas,
    }
}

/// Flood-fills the pixels for which `include` holds into regions of pixels
/// joined by `same`. Region ids start at 1 in raster order of first pixel;
/// excluded pixels get 0. Returns the id raster and areas indexed by `id - 1`.
pub(crate) fn flood_regions(
    width: usize,
    height: usize,
    connectivity: Connectivity,
    include: impl Fn(usize) -> bool,
    same: impl Fn(usize, usize) -> bool,
) -> (Vec<u32>, Vec<usize>) {
    let n = width * height;
    let mut ids = vec![0u32; n];
    let mut areas = Vec::new();
    let mut stack = Vec::new();
    let offsets: &[(isize, isize)] = match connectivity {
        Connectivity::Four => &[(0, -1), (-1, 0), (1, 0), (0, 1)],
        Connectivity::Eight => &[
            (-1, -1),
            (0, -1),
            (1, -1),
            (-1, 0),
            (1, 0),
            (-1, 1),
            (0, 1),
            (1, 1),
        ],
    };
    for seed in 0..n {
        if ids[seed] != 0 || !include(seed) {
            continue;
        }
        let id = areas.len() as u32 + 1;
        let mut area = 0usize;
        ids[seed] = id;
        stack.push(seed);
        while let Some(p) = stack.pop() {
            area += 1;
            let (px, py) = ((p % width) as isize, (p / width) as isize);
            for &(dx, dy) in offsets {
                let (qx, qy) = (px + dx, py + dy);
                if qx < 0 || qy < 0 || qx >= width as isize || qy >= height as isize {
                    continue;
                }
                let q = qy as usize * width + qx as usize;
                if ids[q] == 0 && include(q) && same(p, q) {
                    ids[q] = id;
                    stack.push(q);
                }
            }
        }
        areas.push(area);
    }
    (ids, areas)
}
