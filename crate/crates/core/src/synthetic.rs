//! Seeded synthetic lesion scenes: a uniform elliptical lesion, darker than
//! a fundus-colored background, with per-pixel Gaussian texture noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::raster::{BinaryMask, RgbImage};

#[derive(Debug, Clone, PartialEq)]
pub struct SceneParams {
    pub size: usize,
    /// Semi-axis range as a fraction of `size`.
    pub axis_range: (f64, f64),
    /// Lesion color = background × factor, drawn from this range.
    pub darkening: (f64, f64),
    /// Standard deviation of the per-channel noise, in 8-bit levels.
    pub noise_sigma: f64,
    /// Equal semi-axes when set.
    pub circular: bool,
}

impl SceneParams {
    pub fn ellipse(size: usize) -> Self {
        Self {
            size,
            axis_range: (0.07, 0.16),
            darkening: (0.5, 0.65),
            noise_sigma: 4.0,
            circular: false,
        }
    }

    pub fn disk(size: usize) -> Self {
        Self {
            circular: true,
            ..Self::ellipse(size)
        }
    }
}

#[derive(Debug, Clone)]
pub struct LesionScene {
    pub image: RgbImage,
    pub ground_truth: BinaryMask,
    pub background: [u8; 3],
    pub lesion: [u8; 3],
}

/// Generates a scene; identical `(params, seed)` give identical scenes.
pub fn lesion_scene(params: &SceneParams, seed: u64) -> LesionScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = params.size as f64;

    let background = [
        rng.random_range(175..=205u8),
        rng.random_range(85..=110u8),
        rng.random_range(40..=60u8),
    ];
    let k = rng.random_range(params.darkening.0..=params.darkening.1);
    let lesion = background.map(|c| (f64::from(c) * k).round() as u8);

    let cx = rng.random_range(0.3..=0.7) * size;
    let cy = rng.random_range(0.3..=0.7) * size;
    let (lo, hi) = params.axis_range;
    let ax = rng.random_range(lo..=hi) * size;
    let ay = if params.circular {
        ax
    } else {
        rng.random_range(lo..=hi) * size
    };
    let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
    let (sin, cos) = theta.sin_cos();

    let inside = |x: usize, y: usize| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        let u = dx * cos + dy * sin;
        let v = -dx * sin + dy * cos;
        (u / ax).powi(2) + (v / ay).powi(2) <= 1.0
    };
    let ground_truth = BinaryMask::from_fn(params.size, params.size, inside).expect("size >= 1");

    let noise = Normal::new(0.0, params.noise_sigma).expect("finite sigma");
    let mut data = Vec::with_capacity(params.size * params.size * 3);
    for &g in ground_truth.data() {
        let base = if g == 1 { lesion } else { background };
        for c in base {
            let v = f64::from(c) + noise.sample(&mut rng);
            data.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    let image = RgbImage::new(params.size, params.size, data).expect("size >= 3");
    LesionScene {
        image,
        ground_truth,
        background,
        lesion,
    }
}
