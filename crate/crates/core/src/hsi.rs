//! Hyperspectral rasters: loading, validation, band removal and quantization.
//!
//! Radiance is held band-sequential: row `b` of the `L × N` matrix is the
//! vector of band `b` over all `N` pixels.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// On-disk layouts understood by [`load_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageFormat {
    /// Plain-text ENVI header plus a raw BSQ payload.
    EnviBsq,
    /// One band per row, pixels comma separated.
    Csv,
}

impl ImageFormat {
    /// Picks a format from the file extension (`.hdr`/`.raw` → ENVI, anything else → CSV).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("hdr") | Some("raw") => ImageFormat::EnviBsq,
            _ => ImageFormat::Csv,
        }
    }
}

/// Maps band positions of a (possibly reduced) image back to the numbering of
/// the file it was loaded from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandRemap {
    original: Vec<usize>,
}

impl BandRemap {
    pub fn identity(bands: usize) -> Self {
        Self {
            original: (0..bands).collect(),
        }
    }

    pub fn to_original(&self, band: usize) -> Option<usize> {
        self.original.get(band).copied()
    }

    pub fn map_all(&self, bands: &[usize]) -> Vec<usize> {
        bands.iter().map(|&b| self.original[b]).collect()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.original
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperspectralImage {
    bands: usize,
    pixels: usize,
    values: Vec<f64>,
    wavelengths: Option<Vec<f64>>,
    labels: Option<Vec<u32>>,
    remap: BandRemap,
}

impl HyperspectralImage {
    /// Builds an image from band-major values (`values.len() == bands * pixels`).
    pub fn new(bands: usize, pixels: usize, values: Vec<f64>) -> Result<Self> {
        if bands == 0 || pixels == 0 {
            return Err(Error::MalformedHeader(format!(
                "image needs at least one band and one pixel, got {bands}x{pixels}"
            )));
        }
        if values.len() != bands * pixels {
            return Err(Error::SizeMismatch {
                expected: bands * pixels,
                found: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                band: pos / pixels,
                pixel: pos % pixels,
            });
        }
        Ok(Self {
            bands,
            pixels,
            values,
            wavelengths: None,
            labels: None,
            remap: BandRemap::identity(bands),
        })
    }

    /// Builds an image from a list of band vectors of equal length.
    pub fn from_bands(rows: Vec<Vec<f64>>) -> Result<Self> {
        let bands = rows.len();
        let pixels = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != pixels) {
            return Err(Error::SizeMismatch {
                expected: pixels,
                found: bad.len(),
            });
        }
        Self::new(bands, pixels, rows.concat())
    }

    pub fn with_labels(mut self, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != self.pixels {
            return Err(Error::SizeMismatch {
                expected: self.pixels,
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_wavelengths(mut self, wavelengths: Vec<f64>) -> Result<Self> {
        if wavelengths.len() != self.bands {
            return Err(Error::SizeMismatch {
                expected: self.bands,
                found: wavelengths.len(),
            });
        }
        self.wavelengths = Some(wavelengths);
        Ok(self)
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixels(&self) -> usize {
        self.pixels
    }

    /// Radiance of band `b` over all pixels.
    pub fn band(&self, b: usize) -> &[f64] {
        &self.values[b * self.pixels..(b + 1) * self.pixels]
    }

    pub fn value(&self, band: usize, pixel: usize) -> f64 {
        self.values[band * self.pixels + pixel]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn wavelengths(&self) -> Option<&[f64]> {
        self.wavelengths.as_deref()
    }

    pub fn remap(&self) -> &BandRemap {
        &self.remap
    }

    /// Pixel count per class id, background (0) excluded.
    pub fn class_counts(&self) -> BTreeMap<u32, usize> {
        let mut counts = BTreeMap::new();
        for &c in self.labels.iter().flatten().filter(|&&c| c != 0) {
            *counts.entry(c).or_insert(0) += 1;
        }
        counts
    }

    /// Feature vector of one pixel restricted to `subset`.
    pub fn pixel_features(&self, pixel: usize, subset: &[usize]) -> Vec<f64> {
        subset.iter().map(|&b| self.value(b, pixel)).collect()
    }

    /// Drops the given bands, keeping the survivors in order. The remap table of
    /// the result still reports band numbers of the original file.
    pub fn remove_bands(&self, drop: &BTreeSet<usize>) -> Result<Self> {
        if let Some(&bad) = drop.iter().find(|&&b| b >= self.bands) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: self.bands,
            });
        }
        if drop.len() >= self.bands {
            return Err(Error::EmptyResult);
        }
        let keep: Vec<usize> = (0..self.bands).filter(|b| !drop.contains(b)).collect();
        let mut values = Vec::with_capacity(keep.len() * self.pixels);
        for &b in &keep {
            values.extend_from_slice(self.band(b));
        }
        Ok(Self {
            bands: keep.len(),
            pixels: self.pixels,
            values,
            wavelengths: self.wavelengths.as_ref().map(|w| keep.iter().map(|&b| w[b]).collect()),
            labels: self.labels.clone(),
            remap: BandRemap {
                original: self.remap.map_all(&keep),
            },
        })
    }

    /// Writes the CSV layout read by [`load_image`]; labels, when present, go to
    /// the companion `<stem>.labels.csv`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for b in 0..self.bands {
            let row: Vec<String> = self.band(b).iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))?;
        if let Some(labels) = &self.labels {
            let lp = companion_labels_path(path);
            let row: Vec<String> = labels.iter().map(|v| v.to_string()).collect();
            fs::write(&lp, row.join(",") + "\n").map_err(|e| Error::io(&lp, e))?;
        }
        Ok(())
    }

    /// Writes an ENVI header (`.hdr`) and BSQ float32 payload (`.raw`) for a
    /// `lines × samples` frame.
    pub fn write_envi(&self, path: &Path, lines: usize, samples: usize, dtype: EnviDtype) -> Result<()> {
        if lines * samples != self.pixels {
            return Err(Error::SizeMismatch {
                expected: self.pixels,
                found: lines * samples,
            });
        }
        let (hdr, raw) = envi_paths(path);
        let mut header = format!(
            "ENVI\nsamples = {samples}\nlines = {lines}\nbands = {}\nheader offset = 0\ndata type = {}\ninterleave = bsq\nbyte order = 0\n",
            self.bands,
            dtype.code()
        );
        if let Some(w) = &self.wavelengths {
            let list: Vec<String> = w.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(header, "wavelength = {{ {} }}", list.join(", "));
        }
        fs::write(&hdr, header).map_err(|e| Error::io(&hdr, e))?;
        let mut payload = Vec::with_capacity(self.values.len() * dtype.width());
        for &v in &self.values {
            match dtype {
                EnviDtype::Float32 => payload.extend_from_slice(&(v as f32).to_le_bytes()),
                EnviDtype::Uint16 => payload.extend_from_slice(&(v.round().clamp(0.0, 65535.0) as u16).to_le_bytes()),
            }
        }
        fs::write(&raw, payload).map_err(|e| Error::io(&raw, e))
    }
}

/// Sample types accepted in ENVI payloads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnviDtype {
    Float32,
    Uint16,
}

impl EnviDtype {
    fn from_code(code: u32) -> Result<Self> {
        match code {
            4 => Ok(EnviDtype::Float32),
            12 => Ok(EnviDtype::Uint16),
            other => Err(Error::UnsupportedDtype(format!("ENVI data type {other}"))),
        }
    }

    fn code(self) -> u32 {
        match self {
            EnviDtype::Float32 => 4,
            EnviDtype::Uint16 => 12,
        }
    }

    fn width(self) -> usize {
        match self {
            EnviDtype::Float32 => 4,
            EnviDtype::Uint16 => 2,
        }
    }
}

/// `<stem>.labels.csv` next to an image file.
pub fn companion_labels_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
    path.with_file_name(format!("{stem}.labels.csv"))
}

fn envi_paths(path: &Path) -> (PathBuf, PathBuf) {
    (path.with_extension("hdr"), path.with_extension("raw"))
}

/// Loads an image and, when `<stem>.labels.csv` exists beside it, its labels.
pub fn load_image(path: &Path, format: ImageFormat) -> Result<HyperspectralImage> {
    let image = match format {
        ImageFormat::Csv => load_csv(path)?,
        ImageFormat::EnviBsq => load_envi(path)?,
    };
    let labels_path = companion_labels_path(path);
    if labels_path.exists() {
        let labels = load_labels(&labels_path)?;
        image.with_labels(labels)
    } else {
        Ok(image)
    }
}

/// Reads a comma/whitespace separated list of non-negative class ids.
pub fn load_labels(path: &Path) -> Result<Vec<u32>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<u32>()
                .map_err(|_| Error::MalformedHeader(format!("bad class id {t:?} in {}", path.display())))
        })
        .collect()
}

fn load_csv(path: &Path) -> Result<HyperspectralImage> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let b = rows.len();
        let row = line
            .split(',')
            .enumerate()
            .map(|(p, t)| {
                let v: f64 = t
                    .trim()
                    .parse()
                    .map_err(|_| Error::MalformedHeader(format!("bad number {t:?} at band {b}, pixel {p}")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFiniteValue { band: b, pixel: p })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::MalformedHeader(format!("{} holds no bands", path.display())));
    }
    HyperspectralImage::from_bands(rows)
}

#[derive(Debug, Default)]
struct EnviHeader {
    samples: Option<usize>,
    lines: Option<usize>,
    bands: Option<usize>,
    data_type: Option<u32>,
    interleave: Option<String>,
    byte_order: Option<u32>,
    header_offset: usize,
    wavelengths: Option<Vec<f64>>,
}

fn parse_envi_header(text: &str) -> Result<EnviHeader> {
    let mut lines = text.lines();
    match lines.next().map(str::trim) {
        Some("ENVI") => {}
        _ => return Err(Error::MalformedHeader("missing ENVI magic line".into())),
    }
    // Values in braces may span several lines; join them first.
    let mut entries = Vec::new();
    let mut pending: Option<String> = None;
    for line in lines {
        if let Some(acc) = pending.as_mut() {
            acc.push(' ');
            acc.push_str(line.trim());
            if line.contains('}') {
                entries.push(pending.take().unwrap());
            }
            continue;
        }
        let line = line.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        if line.contains('{') && !line.contains('}') {
            pending = Some(line.to_string());
        } else {
            entries.push(line.to_string());
        }
    }
    if pending.is_some() {
        return Err(Error::MalformedHeader("unterminated brace list".into()));
    }

    let mut hdr = EnviHeader::default();
    for entry in entries {
        let (key, value) = entry
            .split_once('=')
            .ok_or_else(|| Error::MalformedHeader(format!("expected key = value, got {entry:?}")))?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        let int = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::MalformedHeader(format!("{key}: expected integer, got {v:?}")))
        };
        match key.as_str() {
            "samples" => hdr.samples = Some(int(value)?),
            "lines" => hdr.lines = Some(int(value)?),
            "bands" => hdr.bands = Some(int(value)?),
            "data type" => hdr.data_type = Some(int(value)? as u32),
            "byte order" => hdr.byte_order = Some(int(value)? as u32),
            "header offset" => hdr.header_offset = int(value)?,
            "interleave" => hdr.interleave = Some(value.to_ascii_lowercase()),
            "wavelength" => {
                let inner = value.trim_start_matches('{').trim_end_matches('}');
                let list = inner
                    .split(',')
                    .map(|t| t.trim())
                    .filter(|t| !t.is_empty())
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| Error::MalformedHeader(format!("bad wavelength {t:?}")))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                hdr.wavelengths = Some(list);
            }
            _ => {}
        }
    }
    Ok(hdr)
}

fn load_envi(path: &Path) -> Result<HyperspectralImage> {
    let (hdr_path, raw_path) = envi_paths(path);
    let text = fs::read_to_string(&hdr_path).map_err(|e| Error::io(&hdr_path, e))?;
    let hdr = parse_envi_header(&text)?;
    let missing = |k: &str| Error::MalformedHeader(format!("missing key {k:?}"));
    let samples = hdr.samples.ok_or_else(|| missing("samples"))?;
    let lines = hdr.lines.ok_or_else(|| missing("lines"))?;
    let bands = hdr.bands.ok_or_else(|| missing("bands"))?;
    let dtype = EnviDtype::from_code(hdr.data_type.ok_or_else(|| missing("data type"))?)?;
    match hdr.interleave.as_deref() {
        Some("bsq") | None => {}
        Some(other) => return Err(Error::UnsupportedDtype(format!("interleave {other}"))),
    }
    if hdr.byte_order.unwrap_or(0) != 0 {
        return Err(Error::UnsupportedDtype("big-endian byte order".into()));
    }
    let pixels = samples * lines;
    let payload = fs::read(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
    let payload = payload.get(hdr.header_offset..).unwrap_or(&[]);
    let width = dtype.width();
    let expected = bands * pixels;
    if payload.len() != expected * width {
        return Err(Error::SizeMismatch {
            expected,
            found: payload.len() / width,
        });
    }
    let values: Vec<f64> = payload
        .chunks_exact(width)
        .map(|c| match dtype {
            EnviDtype::Float32 => f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64,
            EnviDtype::Uint16 => u16::from_le_bytes([c[0], c[1]]) as f64,
        })
        .collect();
    let image = HyperspectralImage::new(bands, pixels, values)?;
    match hdr.wavelengths {
        Some(w) => image.with_wavelengths(w),
        None => Ok(image),
    }
}

/// Which value range the quantizer maps onto `[0, bin_count)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinRange {
    /// Min–max of each band on its own.
    #[default]
    PerBand,
    /// Min–max of the whole image, so raw radiance levels are compared across bands.
    Global,
}

/// Discrete codes of one band, ready for empirical probabilities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedBand {
    pub band_index: usize,
    pub bin_count: usize,
    pub codes: Vec<u32>,
}

pub const DEFAULT_BIN_COUNT: usize = 256;

/// Per-band min–max quantization into `bin_count` equal-width bins.
pub fn quantize_band(image: &HyperspectralImage, band: usize, bin_count: usize) -> Result<QuantizedBand> {
    quantize_band_with(image, band, bin_count, BinRange::PerBand)
}

pub fn quantize_band_with(
    image: &HyperspectralImage,
    band: usize,
    bin_count: usize,
    range: BinRange,
) -> Result<QuantizedBand> {
    if band >= image.bands() {
        return Err(Error::IndexOutOfRange {
            index: band,
            len: image.bands(),
        });
    }
    if bin_count == 0 {
        return Err(Error::Config("bin_count must be positive".into()));
    }
    let values = match range {
        BinRange::PerBand => image.band(band),
        BinRange::Global => image.values(),
    };
    let (lo, hi) = min_max(values);
    Ok(QuantizedBand {
        band_index: band,
        bin_count,
        codes: image
            .band(band)
            .iter()
            .map(|&v| quantize_value(v, lo, hi, bin_count))
            .collect(),
    })
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    })
}

fn quantize_value(v: f64, lo: f64, hi: f64, bin_count: usize) -> u32 {
    if hi <= lo {
        return 0;
    }
    let scaled = ((v - lo) / (hi - lo) * bin_count as f64).floor();
    (scaled.max(0.0) as usize).min(bin_count - 1) as u32
}
