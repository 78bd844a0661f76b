//! Checkpoint files for trained policies.
//!
//! Two encodings carry the same content: a little-endian binary container
//! (bit-exact round trip) and pretty-printed JSON. [`Checkpoint::save`] and
//! [`Checkpoint::load`] choose by extension: `.json` is JSON, anything else binary.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{TrainConfig, TrainedPolicy};
use crate::env::RewardScheme;
use crate::error::{Error, Result};
use crate::hsi::BinRange;
use crate::qnet::{Nadam, QNetworkParams};
use crate::stats::{BandStats, EntropyMode, StatsConfig};

const MAGIC: &[u8; 8] = b"BANDSQN\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub k: usize,
    pub reward_scheme: RewardScheme,
    pub config: TrainConfig,
    pub epsilon: f64,
    pub returns: Vec<f64>,
    pub elapsed_secs: f64,
    /// Original band number of each network input.
    pub band_numbers: Vec<usize>,
    pub params: QNetworkParams,
    pub optimizer: Nadam,
    /// Statistics the policy was trained on, so selections can be scored
    /// without reloading the image.
    pub stats: BandStats,
    /// SHA-256 (hex) of the training image file, empty when unknown.
    pub image_sha256: String,
}

impl Checkpoint {
    pub fn from_policy(
        policy: &TrainedPolicy,
        band_numbers: Vec<usize>,
        stats: BandStats,
        image_sha256: String,
    ) -> Result<Self> {
        for found in [band_numbers.len(), stats.bands()] {
            if found != policy.bands() {
                return Err(Error::ShapeMismatch {
                    expected: policy.bands(),
                    found,
                });
            }
        }
        Ok(Self {
            format_version: FORMAT_VERSION,
            k: policy.k,
            reward_scheme: policy.reward_scheme,
            config: policy.config,
            epsilon: policy.epsilon,
            returns: policy.returns.clone(),
            elapsed_secs: policy.elapsed_secs,
            band_numbers,
            params: policy.params.clone(),
            optimizer: policy.optimizer.clone(),
            stats,
            image_sha256,
        })
    }

    pub fn policy(&self) -> TrainedPolicy {
        TrainedPolicy {
            params: self.params.clone(),
            optimizer: self.optimizer.clone(),
            k: self.k,
            reward_scheme: self.reward_scheme,
            config: self.config,
            epsilon: self.epsilon,
            returns: self.returns.clone(),
            elapsed_secs: self.elapsed_secs,
        }
    }

    pub fn episodes(&self) -> usize {
        self.returns.len()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = if is_json(path) {
            serde_json::to_vec_pretty(self)?
        } else {
            self.to_bytes()
        };
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = if is_json(path) {
            serde_json::from_slice(&bytes)?
        } else {
            Self::from_bytes(&bytes)?
        };
        if ckpt.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {}",
                ckpt.format_version
            )));
        }
        if ckpt.band_numbers.len() != ckpt.params.bands()
            || ckpt.stats.bands() != ckpt.params.bands()
            || ckpt.optimizer.first_moment().len() != ckpt.params.len()
        {
            return Err(Error::Checkpoint("tensor shapes disagree with band count".into()));
        }
        Ok(ckpt)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.raw(MAGIC);
        w.u32(self.format_version);
        w.u64(self.params.bands() as u64);
        w.u64(self.k as u64);
        w.u8(match self.reward_scheme {
            RewardScheme::Entropy => 0,
            RewardScheme::Correlation => 1,
        });
        let c = &self.config;
        w.u64(c.seed);
        w.f64(c.gamma);
        w.u64(c.batch_size as u64);
        w.u64(c.replay_capacity as u64);
        w.f64(c.epsilon_start);
        w.f64(c.epsilon_end);
        w.f64(c.epsilon_decay_factor);
        w.f64(c.learning_rate);
        w.f64(c.beta1);
        w.f64(c.beta2);
        w.u64(c.max_episodes as u64);
        w.u64(c.plateau_window.map_or(0, |p| p as u64));
        w.f64(c.plateau_tolerance);
        w.u64(c.updates_per_episode as u64);
        w.f64(self.epsilon);
        w.f64(self.elapsed_secs);
        w.f64s(&self.returns);
        w.u64(self.band_numbers.len() as u64);
        for &b in &self.band_numbers {
            w.u64(b as u64);
        }
        w.f64s(self.params.as_slice());
        let o = &self.optimizer;
        w.f64(o.learning_rate);
        w.f64(o.beta1);
        w.f64(o.beta2);
        w.f64(o.epsilon);
        w.u64(o.step_count());
        w.f64s(o.first_moment());
        w.f64s(o.second_moment());
        let sc = self.stats.config();
        w.u64(sc.bin_count as u64);
        w.u8(match sc.bin_range {
            BinRange::PerBand => 0,
            BinRange::Global => 1,
        });
        w.u8(match sc.entropy_mode {
            EntropyMode::Distinct => 0,
            EntropyMode::PerPixel => 1,
        });
        w.u8(sc.absolute_correlation as u8);
        w.f64s(self.stats.entropies());
        w.f64s(self.stats.correlation_matrix());
        w.u64(self.image_sha256.len() as u64);
        w.raw(self.image_sha256.as_bytes());
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let format_version = r.u32()?;
        if format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {format_version}")));
        }
        let bands = r.usize()?;
        let k = r.usize()?;
        let reward_scheme = match r.u8()? {
            0 => RewardScheme::Entropy,
            1 => RewardScheme::Correlation,
            other => return Err(Error::Checkpoint(format!("bad reward scheme tag {other}"))),
        };
        let config = TrainConfig {
            seed: r.u64()?,
            gamma: r.f64()?,
            batch_size: r.usize()?,
            replay_capacity: r.usize()?,
            epsilon_start: r.f64()?,
            epsilon_end: r.f64()?,
            epsilon_decay_factor: r.f64()?,
            learning_rate: r.f64()?,
            beta1: r.f64()?,
            beta2: r.f64()?,
            max_episodes: r.usize()?,
            plateau_window: match r.usize()? {
                0 => None,
                w => Some(w),
            },
            plateau_tolerance: r.f64()?,
            updates_per_episode: r.usize()?,
        };
        let epsilon = r.f64()?;
        let elapsed_secs = r.f64()?;
        let returns = r.f64s()?;
        let n = r.usize()?;
        let band_numbers = (0..n).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        let params = QNetworkParams::from_flat(bands, r.f64s()?)?;
        let (lr, b1, b2, eps) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
        let step = r.u64()?;
        let optimizer = Nadam::from_parts(lr, b1, b2, eps, step, r.f64s()?, r.f64s()?)?;
        let bin_count = r.usize()?;
        let bin_range = match r.u8()? {
            0 => BinRange::PerBand,
            1 => BinRange::Global,
            other => return Err(Error::Checkpoint(format!("bad bin range tag {other}"))),
        };
        let entropy_mode = match r.u8()? {
            0 => EntropyMode::Distinct,
            1 => EntropyMode::PerPixel,
            other => return Err(Error::Checkpoint(format!("bad entropy mode tag {other}"))),
        };
        let absolute_correlation = match r.u8()? {
            0 => false,
            1 => true,
            other => return Err(Error::Checkpoint(format!("bad flag {other}"))),
        };
        let stats = BandStats::from_parts(r.f64s()?, r.f64s()?, bin_count)?.with_config(StatsConfig {
            bin_count,
            bin_range,
            entropy_mode,
            absolute_correlation,
        });
        let n = r.usize()?;
        let image_sha256 = String::from_utf8(r.take(n)?.to_vec())
            .map_err(|_| Error::Checkpoint("image digest is not UTF-8".into()))?;
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self {
            format_version,
            k,
            reward_scheme,
            config,
            epsilon,
            returns,
            elapsed_secs,
            band_numbers,
            params,
            optimizer,
            stats,
            image_sha256,
        })
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()) == Some("json")
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn raw(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.raw(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.raw(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.raw(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for &x in v {
            self.f64(x);
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Checkpoint("length overflow".into()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.usize()?;
        if n > (self.bytes.len() - self.pos) / 8 {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        (0..n).map(|_| self.f64()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_checkpoint() -> Checkpoint {
        let params = QNetworkParams::init(5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut optimizer = Nadam::with_defaults(params.len());
        let mut p = params.clone();
        let grads: Vec<f64> = (0..p.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        optimizer.update(p.as_mut_slice(), &grads).unwrap();
        let policy = TrainedPolicy {
            params: p,
            optimizer,
            k: 3,
            reward_scheme: RewardScheme::Correlation,
            config: TrainConfig {
                seed: 42,
                plateau_window: None,
                ..TrainConfig::default()
            },
            epsilon: 0.0123,
            returns: vec![0.1, -0.25, 1.0 / 3.0],
            elapsed_secs: 0.5,
        };
        let mut corr = vec![0.25; 25];
        for i in 0..5 {
            corr[i * 5 + i] = 1.0;
        }
        let stats = BandStats::from_parts(vec![1.0, 2.5, 0.0, 3.0, 0.7], corr, 64).unwrap();
        Checkpoint::from_policy(&policy, vec![0, 2, 3, 7, 9], stats, "ab12".into()).unwrap()
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let c = sample_checkpoint();
        let bytes = c.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = sample_checkpoint();
        let p = dir.path().join("policy.json");
        c.save(&p).unwrap();
        let back = Checkpoint::load(&p).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample_checkpoint().to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::Checkpoint(_))));
        let mut extra = bytes;
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
    }
}
