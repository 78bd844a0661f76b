//! Hyperspectral band selection as a sequential decision problem.
//!
//! An agent grows a band subset one band at a time; a deep Q-network learns
//! which band to add next from entropy- or correlation-based rewards. Around
//! it sit the data plumbing ([`hsi`]), cached statistics ([`stats`]), the
//! environment ([`env`]), reference selectors and exact oracles
//! ([`baselines`]) and a k-NN classification harness ([`eval`]).

pub mod agent;
pub mod baselines;
pub mod checkpoint;
pub mod cli;
pub mod env;
pub mod error;
pub mod eval;
pub mod hsi;
pub mod qnet;
pub mod report;
pub mod stats;
pub mod synthetic;

pub use agent::{train, train_with, EpisodeRecord, Experience, ReplayMemory, TrainConfig, TrainedPolicy, Trainer};
pub use baselines::{exhaustive_best, greedy_select, random_subset, rank_by_entropy, Objective};
pub use env::{BandEnv, EnvConfig, RewardScheme, SelectionState};
pub use error::{Error, Result};
pub use eval::{knn_classify, metrics, repeated_eval, stratified_split, EvalReport, Metrics, SplitSpec};
pub use hsi::{load_image, quantize_band, HyperspectralImage, ImageFormat, QuantizedBand};
pub use qnet::{Nadam, QNetworkParams};
pub use stats::{band_entropy, pearson, BandStats, StatsConfig};
