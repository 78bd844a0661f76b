//! Seeded synthetic scenes with known structure, used by the examples and the
//! test suites in place of the (unbundled) benchmark rasters.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::hsi::HyperspectralImage;

/// `bands` bands over `pixels` pixels where band `b` takes `levels[b]` distinct,
/// evenly spaced values drawn uniformly per pixel. Level counts are `2, 3, …`
/// assigned to bands in a seeded random order, so entropies are distinct and the
/// high-entropy bands are scattered across the index range.
pub fn distinct_level_scene(bands: usize, pixels: usize, seed: u64) -> Result<HyperspectralImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut levels: Vec<usize> = (0..bands).map(|b| 2 + b).collect();
    levels.shuffle(&mut rng);
    let rows = levels
        .iter()
        .map(|&m| {
            (0..pixels)
                .map(|_| {
                    let level = rng.gen_range(0..m);
                    level as f64 / (m - 1) as f64
                })
                .collect()
        })
        .collect();
    HyperspectralImage::from_bands(rows)
}

/// Bands driven by a handful of latent spectra plus noise. Bands sharing a
/// latent factor are strongly correlated; `noise` controls how strongly.
pub fn correlated_scene(
    bands: usize,
    pixels: usize,
    factors: usize,
    noise: f64,
    seed: u64,
) -> Result<HyperspectralImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let latent: Vec<Vec<f64>> = (0..factors)
        .map(|_| (0..pixels).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let rows = (0..bands)
        .map(|_| {
            let f = rng.gen_range(0..factors);
            let g = rng.gen_range(0..factors);
            let mix: f64 = rng.gen_range(0.0..1.0);
            let gain: f64 = rng.gen_range(0.5..2.0);
            (0..pixels)
                .map(|p| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    gain * (mix * latent[f][p] + (1.0 - mix) * latent[g][p]) + noise * e
                })
                .collect()
        })
        .collect();
    HyperspectralImage::from_bands(rows)
}

/// A labelled scene of `classes` classes, `per_class` pixels each. Band
/// `discriminative` alone separates the classes (class `c` sits near `10 c`);
/// every other band is class-independent noise.
pub fn labelled_scene(
    bands: usize,
    classes: usize,
    per_class: usize,
    discriminative: usize,
    seed: u64,
) -> Result<HyperspectralImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixels = classes * per_class;
    let labels: Vec<u32> = (0..pixels).map(|p| (p / per_class) as u32 + 1).collect();
    let rows = (0..bands)
        .map(|b| {
            labels
                .iter()
                .map(|&c| {
                    let jitter: f64 = rng.gen_range(-1.0..1.0);
                    if b == discriminative {
                        10.0 * c as f64 + jitter
                    } else {
                        rng.gen_range(0.0..50.0)
                    }
                })
                .collect()
        })
        .collect();
    HyperspectralImage::from_bands(rows)?.with_labels(labels)
}
