//! Output artifacts: run manifests, selection reports, comparison tables and
//! the JSON-lines training log.
//!
//! Every artifact carries a [`RunManifest`]. Manifests hold no wall-clock time
//! unless `SOURCE_DATE_EPOCH` is set, so two runs with the same inputs and
//! settings write byte-identical reports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::{EpisodeRecord, TrainConfig};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::eval::{EvalOptions, EvalReport, SplitSpec};
use crate::stats::{BandStats, StatsConfig};

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of_file(path: &Path) -> Result<Self> {
        Ok(Self {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        })
    }
}

/// Everything needed to reproduce an artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub inputs: Vec<InputDigest>,
    /// Original band numbers removed before any statistic was computed.
    pub dropped_bands: Vec<usize>,
    pub stats: StatsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env: Option<EnvConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalOptions>,
    /// Seconds since the epoch, taken from `SOURCE_DATE_EPOCH` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created: Option<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, stats: StatsConfig) -> Self {
        Self {
            tool: TOOL_NAME.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            seed,
            inputs: Vec::new(),
            dropped_bands: Vec::new(),
            stats,
            env: None,
            train: None,
            split: None,
            eval: None,
            created: std::env::var("SOURCE_DATE_EPOCH").ok().filter(|s| !s.is_empty()),
        }
    }
}

/// Lower-case hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// One selector's answer for one `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub selector: String,
    pub k: usize,
    /// Selected bands in selection order, numbered as in the source file.
    pub bands_original_numbering: Vec<usize>,
    pub mie: f64,
    pub mean_corr: f64,
    pub manifest: RunManifest,
}

impl SelectionReport {
    /// Scores `subset` (indices into `stats`) and maps it to original numbering
    /// through `band_numbers`.
    pub fn new(
        selector: &str,
        subset: &[usize],
        stats: &BandStats,
        band_numbers: &[usize],
        manifest: RunManifest,
    ) -> Result<Self> {
        let bands_original_numbering = subset
            .iter()
            .map(|&b| {
                band_numbers.get(b).copied().ok_or(Error::IndexOutOfRange {
                    index: b,
                    len: band_numbers.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            selector: selector.to_string(),
            k: subset.len(),
            bands_original_numbering,
            mie: stats.mean_information_entropy(subset)?,
            mean_corr: stats.mean_correlation(subset)?,
            manifest,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// One row of the comparison table. Classification columns are empty when the
/// image carries no labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub selector: String,
    pub k: usize,
    pub bands_original_numbering: Vec<usize>,
    pub mie: f64,
    pub mean_corr: f64,
    pub oa_mean: Option<f64>,
    pub oa_std: Option<f64>,
    pub aa_mean: Option<f64>,
    pub aa_std: Option<f64>,
    pub kappa_mean: Option<f64>,
    pub kappa_std: Option<f64>,
}

impl ComparisonRow {
    pub fn new(selection: &SelectionReport, eval: Option<&EvalReport>) -> Self {
        Self {
            selector: selection.selector.clone(),
            k: selection.k,
            bands_original_numbering: selection.bands_original_numbering.clone(),
            mie: selection.mie,
            mean_corr: selection.mean_corr,
            oa_mean: eval.map(|e| e.oa_mean),
            oa_std: eval.map(|e| e.oa_std),
            aa_mean: eval.map(|e| e.aa_mean),
            aa_std: eval.map(|e| e.aa_std),
            kappa_mean: eval.map(|e| e.kappa_mean),
            kappa_std: eval.map(|e| e.kappa_std),
        }
    }
}

pub const COMPARISON_CSV_HEADER: &str = "selector,k,mie,mean_corr,oa_mean,oa_std,aa_mean,aa_std,kappa_mean,kappa_std";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub k_values: Vec<usize>,
    pub selectors: Vec<String>,
    pub rows: Vec<ComparisonRow>,
    pub manifest: RunManifest,
}

impl ComparisonReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// One line per (selector, k), in row order.
    pub fn to_csv(&self) -> String {
        let cell = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        let mut out = String::from(COMPARISON_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.selector,
                r.k,
                r.mie,
                r.mean_corr,
                cell(r.oa_mean),
                cell(r.oa_std),
                cell(r.aa_mean),
                cell(r.aa_std),
                cell(r.kappa_mean),
                cell(r.kappa_std)
            );
        }
        out
    }
}

/// Serializes one training-log record as a single JSON line (with newline).
pub fn training_log_line(record: &EpisodeRecord) -> Result<String> {
    Ok(serde_json::to_string(record)? + "\n")
}

/// Writes `contents` to `path`, mapping failures to [`Error::Io`].
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats() -> BandStats {
        BandStats::from_parts(
            vec![1.0, 2.0, 3.0],
            vec![1.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 1.0],
            256,
        )
        .unwrap()
    }

    fn manifest() -> RunManifest {
        RunManifest {
            created: None,
            ..RunManifest::new("select", 7, StatsConfig::default())
        }
    }

    #[test]
    fn selection_report_scores_and_renumbers() {
        let r = SelectionReport::new("greedy", &[2, 0], &stats(), &[10, 11, 14], manifest()).unwrap();
        assert_eq!(r.bands_original_numbering, vec![14, 10]);
        assert_eq!(r.mie, 2.0);
        // (1 + 1 + 0 + 0) / 4
        assert_eq!(r.mean_corr, 0.5);
        let back: SelectionReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert!(SelectionReport::new("x", &[3], &stats(), &[0, 1, 2], manifest()).is_err());
    }

    #[test]
    fn csv_has_header_and_blank_eval_cells() {
        let sel = SelectionReport::new("random", &[1], &stats(), &[0, 1, 2], manifest()).unwrap();
        let report = ComparisonReport {
            k_values: vec![1],
            selectors: vec!["random".into()],
            rows: vec![ComparisonRow::new(&sel, None)],
            manifest: manifest(),
        };
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], COMPARISON_CSV_HEADER);
        assert_eq!(lines[1], "random,1,2,1,,,,,,");
    }

    #[test]
    fn digest_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc.txt");
        fs::write(&p, "abc").unwrap();
        assert_eq!(
            sha256_file(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
