//! Per-band entropies, the inter-band Pearson matrix, and the two subset
//! scores built on them (mean information entropy and mean correlation).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hsi::{quantize_band_with, BinRange, HyperspectralImage, QuantizedBand, DEFAULT_BIN_COUNT};

/// How the entropy sum runs over a quantized band.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyMode {
    /// Shannon entropy of the empirical distribution of distinct codes.
    #[default]
    Distinct,
    /// Literal per-pixel sum: each pixel contributes `-p log2 p` of its own code,
    /// so a code seen `c` times is counted `c` times.
    PerPixel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsConfig {
    pub bin_count: usize,
    pub bin_range: BinRange,
    pub entropy_mode: EntropyMode,
    /// Store `|r|` instead of signed coefficients.
    pub absolute_correlation: bool,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            bin_count: DEFAULT_BIN_COUNT,
            bin_range: BinRange::PerBand,
            entropy_mode: EntropyMode::Distinct,
            absolute_correlation: false,
        }
    }
}

/// Shannon entropy (bits) of a quantized band.
pub fn band_entropy(q: &QuantizedBand) -> f64 {
    band_entropy_with(q, EntropyMode::Distinct)
}

pub fn band_entropy_with(q: &QuantizedBand, mode: EntropyMode) -> f64 {
    let mut counts = vec![0usize; q.bin_count];
    for &c in &q.codes {
        counts[c as usize] += 1;
    }
    // Summing over sorted counts makes the result a function of the count
    // multiset alone, so bands with the same histogram shape get bit-identical
    // entropies (and tie exactly in rankings).
    counts.retain(|&c| c > 0);
    counts.sort_unstable();
    let n = q.codes.len() as f64;
    let mut h = 0.0;
    for &c in &counts {
        let p = c as f64 / n;
        let weight = match mode {
            EntropyMode::Distinct => 1.0,
            EntropyMode::PerPixel => c as f64,
        };
        h -= weight * p * p.log2();
    }
    // -0.0 for a single outcome
    h.max(0.0)
}

struct Centered {
    deviations: Vec<f64>,
    sigma: f64,
}

fn center(band: &[f64]) -> Centered {
    let n = band.len() as f64;
    let mean = band.iter().sum::<f64>() / n;
    let deviations: Vec<f64> = band.iter().map(|v| v - mean).collect();
    let constant = band.iter().all(|&v| v == band[0]);
    let sigma = if constant {
        0.0
    } else {
        (deviations.iter().map(|d| d * d).sum::<f64>() / n).sqrt()
    };
    Centered { deviations, sigma }
}

fn pearson_centered(a: &Centered, b: &Centered) -> f64 {
    let n = a.deviations.len() as f64;
    let cov = a.deviations.iter().zip(&b.deviations).map(|(x, y)| x * y).sum::<f64>() / n;
    (cov / (a.sigma * b.sigma)).clamp(-1.0, 1.0)
}

/// Population-moment Pearson coefficient between bands `i` and `j` of the raw image.
pub fn pearson(image: &HyperspectralImage, i: usize, j: usize) -> Result<f64> {
    for b in [i, j] {
        if b >= image.bands() {
            return Err(Error::IndexOutOfRange {
                index: b,
                len: image.bands(),
            });
        }
    }
    let a = center(image.band(i));
    let b = center(image.band(j));
    if a.sigma == 0.0 {
        return Err(Error::ConstantBand(i));
    }
    if b.sigma == 0.0 {
        return Err(Error::ConstantBand(j));
    }
    Ok(pearson_centered(&a, &b))
}

/// Cached per-band entropies and the full `L × L` correlation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandStats {
    entropies: Vec<f64>,
    correlation: Vec<f64>,
    bin_count: usize,
    config: StatsConfig,
}

impl BandStats {
    pub fn compute(image: &HyperspectralImage, config: StatsConfig) -> Result<Self> {
        let bands = image.bands();
        let entropies = (0..bands)
            .map(|b| {
                quantize_band_with(image, b, config.bin_count, config.bin_range)
                    .map(|q| band_entropy_with(&q, config.entropy_mode))
            })
            .collect::<Result<Vec<f64>>>()?;
        let centered: Vec<Centered> = (0..bands).map(|b| center(image.band(b))).collect();
        let mut correlation = vec![0.0; bands * bands];
        for i in 0..bands {
            for j in i..bands {
                // Constant bands correlate with nothing, themselves included.
                let r = if centered[i].sigma == 0.0 || centered[j].sigma == 0.0 {
                    0.0
                } else if i == j {
                    1.0
                } else {
                    pearson_centered(&centered[i], &centered[j])
                };
                let r = if config.absolute_correlation { r.abs() } else { r };
                correlation[i * bands + j] = r;
                correlation[j * bands + i] = r;
            }
        }
        Ok(Self {
            entropies,
            correlation,
            bin_count: config.bin_count,
            config,
        })
    }

    /// Builds stats directly from entropies and a row-major correlation matrix.
    /// Used for synthetic instances where no image exists.
    pub fn from_parts(entropies: Vec<f64>, correlation: Vec<f64>, bin_count: usize) -> Result<Self> {
        let bands = entropies.len();
        if bands == 0 {
            return Err(Error::EmptySubset);
        }
        if correlation.len() != bands * bands {
            return Err(Error::ShapeMismatch {
                expected: bands * bands,
                found: correlation.len(),
            });
        }
        Ok(Self {
            entropies,
            correlation,
            bin_count,
            config: StatsConfig {
                bin_count,
                ..StatsConfig::default()
            },
        })
    }

    /// Replaces the recorded configuration (kept for provenance only).
    pub fn with_config(mut self, config: StatsConfig) -> Self {
        self.bin_count = config.bin_count;
        self.config = config;
        self
    }

    /// Row-major `L × L` correlation matrix.
    pub fn correlation_matrix(&self) -> &[f64] {
        &self.correlation
    }

    pub fn bands(&self) -> usize {
        self.entropies.len()
    }

    pub fn entropies(&self) -> &[f64] {
        &self.entropies
    }

    pub fn entropy(&self, band: usize) -> f64 {
        self.entropies[band]
    }

    pub fn correlation(&self, i: usize, j: usize) -> f64 {
        self.correlation[i * self.bands() + j]
    }

    pub fn correlation_row(&self, i: usize) -> &[f64] {
        let l = self.bands();
        &self.correlation[i * l..(i + 1) * l]
    }

    pub fn bin_count(&self) -> usize {
        self.bin_count
    }

    pub fn config(&self) -> &StatsConfig {
        &self.config
    }

    fn check_subset(&self, subset: &[usize]) -> Result<()> {
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        match subset.iter().find(|&&b| b >= self.bands()) {
            Some(&b) => Err(Error::IndexOutOfRange {
                index: b,
                len: self.bands(),
            }),
            None => Ok(()),
        }
    }

    /// Mean information entropy (bits) of a band subset. Bands are summed in
    /// ascending index order, so the value does not depend on how the subset
    /// is listed.
    pub fn mean_information_entropy(&self, subset: &[usize]) -> Result<f64> {
        self.check_subset(subset)?;
        let sorted = sorted(subset);
        Ok(sorted.iter().map(|&b| self.entropies[b]).sum::<f64>() / subset.len() as f64)
    }

    /// Mean of all `|B|²` entries of the correlation submatrix, diagonal
    /// included; order-independent like [`Self::mean_information_entropy`].
    pub fn mean_correlation(&self, subset: &[usize]) -> Result<f64> {
        self.check_subset(subset)?;
        let sorted = sorted(subset);
        let mut total = 0.0;
        for &i in &sorted {
            let row = self.correlation_row(i);
            for &j in &sorted {
                total += row[j];
            }
        }
        Ok(total / (subset.len() * subset.len()) as f64)
    }

    /// Entropy-scheme reward for growing `prev` into `next`. From the empty
    /// set the reward is the new band's own entropy.
    pub fn entropy_reward(&self, prev: &[usize], next: &[usize]) -> Result<f64> {
        let added = successor_band(prev, next)?;
        self.check_subset(next)?;
        if prev.is_empty() {
            return Ok(self.entropies[added]);
        }
        Ok(self.mean_information_entropy(next)? - self.mean_information_entropy(prev)?)
    }

    /// Correlation-scheme reward `Corr(prev) - Corr(next)`; zero from the empty set.
    pub fn corr_reward(&self, prev: &[usize], next: &[usize]) -> Result<f64> {
        successor_band(prev, next)?;
        self.check_subset(next)?;
        if prev.is_empty() {
            return Ok(0.0);
        }
        Ok(self.mean_correlation(prev)? - self.mean_correlation(next)?)
    }

    pub fn summary(&self) -> StatsSummary {
        let l = self.bands();
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for i in 0..l {
            for j in (0..l).filter(|&j| j != i) {
                let r = self.correlation(i, j);
                min = min.min(r);
                max = max.max(r);
                sum += r;
            }
        }
        let pairs = l * (l - 1);
        let (min, max, mean_offdiag) = if pairs == 0 {
            (0.0, 0.0, 0.0)
        } else {
            (min, max, sum / pairs as f64)
        };
        StatsSummary {
            entropies: self.entropies.clone(),
            bin_count: self.bin_count,
            correlation_summary: CorrelationSummary { min, max, mean_offdiag },
        }
    }
}

fn sorted(subset: &[usize]) -> Vec<usize> {
    let mut v = subset.to_vec();
    v.sort_unstable();
    v
}

/// Returns the single band `next` adds to `prev`.
fn successor_band(prev: &[usize], next: &[usize]) -> Result<usize> {
    if next.len() != prev.len() + 1 {
        return Err(Error::NotSuccessor);
    }
    let prev_set: BTreeSet<usize> = prev.iter().copied().collect();
    let next_set: BTreeSet<usize> = next.iter().copied().collect();
    if prev_set.len() != prev.len() || next_set.len() != next.len() || !prev_set.is_subset(&next_set) {
        return Err(Error::NotSuccessor);
    }
    Ok(*next_set.difference(&prev_set).next().expect("one extra band"))
}

/// JSON dump of [`BandStats`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub entropies: Vec<f64>,
    pub bin_count: usize,
    pub correlation_summary: CorrelationSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub min: f64,
    pub max: f64,
    pub mean_offdiag: f64,
}
