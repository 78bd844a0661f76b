//! The `bandsel` command line: `info`, `train`, `select` and `compare`.
//!
//! [`run`] executes a parsed [`Cli`] and writes human-readable output to the
//! given sink; [`main_with_args`] adds argument parsing and maps errors to exit
//! codes (0 success, 2 configuration/validation, 3 data, 4 training divergence).

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{train_with, TrainConfig};
use crate::baselines::{
    exhaustive_best_with_budget, greedy_select, random_subset, rank_by_entropy, Objective, ObjectiveKind,
    DEFAULT_EXHAUSTIVE_BUDGET,
};
use crate::checkpoint::Checkpoint;
use crate::env::{EnvConfig, RewardScheme};
use crate::error::{Error, Result};
use crate::eval::{repeated_eval, EvalOptions, SplitSpec};
use crate::hsi::{load_image, BinRange, HyperspectralImage, ImageFormat, DEFAULT_BIN_COUNT};
use crate::report::{
    sha256_file, training_log_line, write_text, ComparisonReport, ComparisonRow, InputDigest, RunManifest,
    SelectionReport,
};
use crate::stats::{BandStats, EntropyMode, StatsConfig};

#[derive(Debug, Parser)]
#[command(
    name = "bandsel",
    version,
    about = "Hyperspectral band selection with a deep Q-network agent"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print band count, pixel count, entropy range and class histogram.
    Info(InfoArgs),
    /// Train a Q-network policy and write a checkpoint plus a JSON-lines log.
    Train(TrainArgs),
    /// Run a trained policy greedily and write a selection report.
    Select(SelectArgs),
    /// Run several selectors for one or more K and tabulate scores and accuracy.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    /// `.hdr`/`.raw` are ENVI, everything else CSV.
    Auto,
    Csv,
    Envi,
}

/// Image input plus the statistics knobs.
#[derive(Debug, Args)]
pub struct ImageArgs {
    /// Image file (CSV, or an ENVI `.hdr`/`.raw` pair). Labels are read from
    /// `<stem>.labels.csv` next to it when present.
    pub image: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    pub format: FormatArg,
    /// Zero-based bands to drop before anything else, e.g. `103-107,149-162,219`.
    #[arg(long, value_name = "LIST")]
    pub drop_bands: Option<String>,
    /// Quantization bins for entropies.
    #[arg(long, default_value_t = DEFAULT_BIN_COUNT)]
    pub bins: usize,
    /// Quantize every band over the whole image's value range instead of its own.
    #[arg(long)]
    pub global_range: bool,
    /// Count a code once per pixel in the entropy sum instead of once per distinct code.
    #[arg(long)]
    pub per_pixel_entropy: bool,
    /// Use |r| for inter-band correlations.
    #[arg(long)]
    pub abs_corr: bool,
}

impl ImageArgs {
    fn stats_config(&self) -> Result<StatsConfig> {
        if self.bins == 0 {
            return Err(Error::Config("--bins must be positive".into()));
        }
        Ok(StatsConfig {
            bin_count: self.bins,
            bin_range: if self.global_range {
                BinRange::Global
            } else {
                BinRange::PerBand
            },
            entropy_mode: if self.per_pixel_entropy {
                EntropyMode::PerPixel
            } else {
                EntropyMode::Distinct
            },
            absolute_correlation: self.abs_corr,
        })
    }

    fn dropped(&self) -> Result<BTreeSet<usize>> {
        self.drop_bands.as_deref().map_or(Ok(BTreeSet::new()), parse_band_list)
    }

    /// Loads the image, applies band removal and computes statistics.
    fn load(&self) -> Result<Loaded> {
        let format = match self.format {
            FormatArg::Auto => ImageFormat::from_path(&self.image),
            FormatArg::Csv => ImageFormat::Csv,
            FormatArg::Envi => ImageFormat::EnviBsq,
        };
        let config = self.stats_config()?;
        let dropped = self.dropped()?;
        let mut image = load_image(&self.image, format)?;
        if !dropped.is_empty() {
            image = image.remove_bands(&dropped)?;
        }
        let stats = BandStats::compute(&image, config)?;
        let mut inputs = vec![InputDigest::of_file(&self.image)?];
        if format == ImageFormat::EnviBsq {
            let raw = self.image.with_extension("raw");
            let hdr = self.image.with_extension("hdr");
            let other = if self.image == hdr { raw } else { hdr };
            inputs.push(InputDigest::of_file(&other)?);
        }
        let labels = crate::hsi::companion_labels_path(&self.image);
        if image.labels().is_some() {
            inputs.push(InputDigest::of_file(&labels)?);
        }
        Ok(Loaded {
            image,
            stats,
            config,
            dropped: dropped.into_iter().collect(),
            inputs,
        })
    }
}

struct Loaded {
    image: HyperspectralImage,
    stats: BandStats,
    config: StatsConfig,
    dropped: Vec<usize>,
    inputs: Vec<InputDigest>,
}

impl Loaded {
    fn manifest(&self, command: &str, seed: u64) -> RunManifest {
        RunManifest {
            inputs: self.inputs.clone(),
            dropped_bands: self.dropped.clone(),
            ..RunManifest::new(command, seed, self.config)
        }
    }
}

/// Parses `3,5-7` into `{3, 5, 6, 7}`.
pub fn parse_band_list(s: &str) -> Result<BTreeSet<usize>> {
    let bad = |t: &str| Error::Config(format!("bad band list item {t:?} (expected N or A-B)"));
    let mut out = BTreeSet::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match item.split_once('-') {
            Some((a, b)) => {
                let a: usize = a.trim().parse().map_err(|_| bad(item))?;
                let b: usize = b.trim().parse().map_err(|_| bad(item))?;
                if a > b {
                    return Err(bad(item));
                }
                out.extend(a..=b);
            }
            None => {
                out.insert(item.parse().map_err(|_| bad(item))?);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    #[command(flatten)]
    pub image: ImageArgs,
    /// Also write per-band entropies and a correlation summary as JSON.
    #[arg(long, value_name = "PATH")]
    pub stats_json: Option<PathBuf>,
}

/// Training hyperparameters; anything left out keeps the library default.
#[derive(Debug, Args)]
pub struct TrainOptions {
    #[arg(long, default_value = "entropy")]
    pub reward: RewardScheme,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Maximum number of episodes.
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub replay_capacity: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epsilon_end: Option<f64>,
    #[arg(long)]
    pub epsilon_decay: Option<f64>,
    #[arg(long)]
    pub updates_per_episode: Option<usize>,
    /// Enable the plateau early stop with this window.
    #[arg(long)]
    pub plateau_window: Option<usize>,
    #[arg(long)]
    pub plateau_tolerance: Option<f64>,
}

impl TrainOptions {
    pub fn config(&self) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            gamma: self.gamma.unwrap_or(d.gamma),
            max_episodes: self.episodes.unwrap_or(d.max_episodes),
            seed: self.seed,
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            replay_capacity: self.replay_capacity.unwrap_or(d.replay_capacity),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            epsilon_end: self.epsilon_end.unwrap_or(d.epsilon_end),
            epsilon_decay_factor: self.epsilon_decay.unwrap_or(d.epsilon_decay_factor),
            updates_per_episode: self.updates_per_episode.unwrap_or(d.updates_per_episode),
            plateau_window: self.plateau_window.or(d.plateau_window),
            plateau_tolerance: self.plateau_tolerance.unwrap_or(d.plateau_tolerance),
            ..d
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub image: ImageArgs,
    /// Bands per episode.
    #[arg(long)]
    pub k: usize,
    #[command(flatten)]
    pub train: TrainOptions,
    /// Checkpoint path; `.json` writes JSON, anything else the binary format.
    #[arg(long)]
    pub out: PathBuf,
    /// Training log path (default `<out>.log.jsonl`).
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Worker threads. Training itself is sequential, so this only bounds
    /// resource use.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    pub checkpoint: PathBuf,
    /// Bands to select (default: the K the policy was trained with).
    #[arg(long)]
    pub k: Option<usize>,
    /// Report path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Selector {
    Drl,
    EntropyRank,
    Greedy,
    Random,
    Exhaustive,
}

impl Selector {
    pub const ALL: [Selector; 5] = [
        Selector::Drl,
        Selector::EntropyRank,
        Selector::Greedy,
        Selector::Random,
        Selector::Exhaustive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Selector::Drl => "drl",
            Selector::EntropyRank => "entropy_rank",
            Selector::Greedy => "greedy",
            Selector::Random => "random",
            Selector::Exhaustive => "exhaustive",
        }
    }
}

impl FromStr for Selector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Selector::ALL.into_iter().find(|sel| sel.name() == s).ok_or_else(|| {
            let valid: Vec<&str> = Selector::ALL.iter().map(|s| s.name()).collect();
            Error::Config(format!("unknown selector {s:?}; valid selectors: {}", valid.join(", ")))
        })
    }
}

/// Parses a comma-separated selector list, keeping order and dropping repeats.
pub fn parse_selectors(s: &str) -> Result<Vec<Selector>> {
    let mut out = Vec::new();
    for name in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let sel: Selector = name.parse()?;
        if !out.contains(&sel) {
            out.push(sel);
        }
    }
    if out.is_empty() {
        return Err(Error::Config("no selectors given".into()));
    }
    Ok(out)
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub image: ImageArgs,
    /// One or more subset sizes, e.g. `5,10,15`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub k: Vec<usize>,
    #[arg(long, default_value = "drl,entropy_rank,greedy,random,exhaustive")]
    pub selectors: String,
    /// Classification runs per selection (labelled images only).
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[command(flatten)]
    pub train: TrainOptions,
    /// Fraction of each class used for k-NN training.
    #[arg(long, default_value_t = 0.1)]
    pub train_ratio: f64,
    #[arg(long, default_value_t = 3)]
    pub neighbors: usize,
    /// z-score features with training-set moments before k-NN.
    #[arg(long)]
    pub standardize: bool,
    /// Largest number of subsets the exhaustive selector may visit.
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_BUDGET)]
    pub exhaustive_budget: u128,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    /// CSV path; printed to stdout when omitted.
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    /// Worker threads for the classification runs.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

/// Parses `args` (including the program name), runs the command and returns the
/// process exit code. Output goes to `out`, diagnostics to stderr.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Info(a) => cmd_info(&a, out),
        Command::Train(a) => cmd_train(&a, out),
        Command::Select(a) => cmd_select(&a, out),
        Command::Compare(a) => cmd_compare(&a, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io(Path::new("<stdout>"), e))
}

fn check_threads(threads: usize) -> Result<()> {
    if threads == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    Ok(())
}

fn check_k(k: usize, bands: usize) -> Result<()> {
    if k == 0 || k > bands {
        return Err(Error::Config(format!("k must lie in 1..={bands}, got {k}")));
    }
    Ok(())
}

pub fn cmd_info(args: &InfoArgs, out: &mut dyn Write) -> Result<()> {
    let loaded = args.image.load()?;
    let (image, stats) = (&loaded.image, &loaded.stats);
    let mut text = format!("bands={} pixels={}\n", image.bands(), image.pixels());
    let lo = stats.entropies().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = stats.entropies().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    text.push_str(&format!("entropy_min={lo} entropy_max={hi}\n"));
    match image.labels() {
        Some(_) => {
            let counts = image.class_counts();
            text.push_str(&format!("classes={}\n", counts.len()));
            for (class, n) in counts {
                text.push_str(&format!("class {class}: {n}\n"));
            }
        }
        None => text.push_str("labels=none\n"),
    }
    emit(out, &text)?;
    if let Some(path) = &args.stats_json {
        write_text(path, &(serde_json::to_string_pretty(&stats.summary())? + "\n"))?;
    }
    Ok(())
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    check_threads(args.threads)?;
    let cfg = args.train.config();
    cfg.validate()?;
    let loaded = args.image.load()?;
    check_k(args.k, loaded.image.bands())?;
    let env = EnvConfig {
        k: args.k,
        reward_scheme: args.train.reward,
    };

    let log_path = args.log.clone().unwrap_or_else(|| with_suffix(&args.out, ".log.jsonl"));
    let file = File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut log = BufWriter::new(file);
    let mut log_err: Option<Error> = None;
    let policy = train_with(&loaded.stats, env, cfg, |record| {
        if log_err.is_none() {
            let line = training_log_line(record)
                .and_then(|l| log.write_all(l.as_bytes()).map_err(|e| Error::io(&log_path, e)));
            log_err = line.err();
        }
    });
    // keep whatever was logged even when training diverged
    log.flush().map_err(|e| Error::io(&log_path, e))?;
    let policy = policy?;
    if let Some(e) = log_err {
        return Err(e);
    }

    let image_sha256 = loaded.inputs[0].sha256.clone();
    let band_numbers = loaded.image.remap().as_slice().to_vec();
    let ckpt = Checkpoint::from_policy(&policy, band_numbers, loaded.stats.clone(), image_sha256)?;
    ckpt.save(&args.out)?;

    let manifest = RunManifest {
        env: Some(env),
        train: Some(cfg),
        ..loaded.manifest("train", cfg.seed)
    };
    let manifest_path = with_suffix(&args.out, ".manifest.json");
    write_text(&manifest_path, &(serde_json::to_string_pretty(&manifest)? + "\n"))?;

    let greedy = policy.select_bands(args.k)?;
    emit(
        out,
        &format!(
            "episodes={} final_epsilon={} greedy_bands={:?}\ncheckpoint={}\nlog={}\n",
            policy.episodes(),
            policy.epsilon,
            loaded.image.remap().map_all(&greedy),
            args.out.display(),
            log_path.display()
        ),
    )
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn cmd_select(args: &SelectArgs, out: &mut dyn Write) -> Result<()> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let k = args.k.unwrap_or(ckpt.k);
    check_k(k, ckpt.params.bands())?;
    let subset = ckpt.policy().select_bands(k)?;
    let mut inputs = vec![InputDigest {
        path: args.checkpoint.display().to_string(),
        sha256: sha256_file(&args.checkpoint)?,
    }];
    if !ckpt.image_sha256.is_empty() {
        inputs.push(InputDigest {
            path: "training image".into(),
            sha256: ckpt.image_sha256.clone(),
        });
    }
    let manifest = RunManifest {
        inputs,
        env: Some(EnvConfig {
            k,
            reward_scheme: ckpt.reward_scheme,
        }),
        train: Some(ckpt.config),
        ..RunManifest::new("select", ckpt.config.seed, *ckpt.stats.config())
    };
    let report = SelectionReport::new("drl", &subset, &ckpt.stats, &ckpt.band_numbers, manifest)?;
    let json = report.to_json()?;
    match &args.out {
        Some(path) => {
            write_text(path, &json)?;
            emit(out, &format!("bands={:?}\n", report.bands_original_numbering))
        }
        None => emit(out, &json),
    }
}

pub fn cmd_compare(args: &CompareArgs, out: &mut dyn Write) -> Result<()> {
    check_threads(args.threads)?;
    let selectors = parse_selectors(&args.selectors)?;
    let cfg = args.train.config();
    cfg.validate()?;
    if args.runs == 0 {
        return Err(Error::Config("--runs must be positive".into()));
    }
    let split = SplitSpec {
        per_class_ratio: args.train_ratio,
        seed: args.train.seed,
        ..SplitSpec::default()
    };
    let eval_options = EvalOptions {
        neighbors: args.neighbors,
        standardize: args.standardize,
        threads: args.threads,
    };
    let loaded = args.image.load()?;
    for &k in &args.k {
        check_k(k, loaded.image.bands())?;
    }
    let stats = &loaded.stats;
    let scheme = args.train.reward;
    let objective = Objective {
        kind: ObjectiveKind::for_scheme(scheme),
        stats,
    };
    let band_numbers = loaded.image.remap().as_slice();
    let labelled = loaded.image.labels().is_some();

    let mut rows = Vec::new();
    for &k in &args.k {
        let env = EnvConfig {
            k,
            reward_scheme: scheme,
        };
        for &sel in &selectors {
            let subset = match sel {
                Selector::Drl => crate::agent::train(stats, env, cfg)?.select_bands(k)?,
                Selector::EntropyRank => rank_by_entropy(stats, k)?,
                Selector::Greedy => greedy_select(objective, k)?,
                Selector::Random => {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(k as u64));
                    random_subset(stats.bands(), k, &mut rng)?
                }
                Selector::Exhaustive => {
                    exhaustive_best_with_budget(objective, k, args.exhaustive_budget)
                        .map_err(|e| match e {
                            Error::BudgetExceeded { candidates, budget } => Error::Config(format!(
                                "exhaustive search at k = {k} needs {candidates} subsets (budget {budget}); \
                                 drop it from --selectors or raise --exhaustive-budget"
                            )),
                            other => other,
                        })?
                        .0
                }
            };
            let selection = SelectionReport::new(
                sel.name(),
                &subset,
                stats,
                band_numbers,
                loaded.manifest("compare", cfg.seed),
            )?;
            let eval = if labelled {
                Some(repeated_eval(&loaded.image, &subset, &split, args.runs, &eval_options)?)
            } else {
                None
            };
            rows.push(ComparisonRow::new(&selection, eval.as_ref()));
        }
    }

    let report = ComparisonReport {
        k_values: args.k.clone(),
        selectors: selectors.iter().map(|s| s.name().to_string()).collect(),
        rows,
        manifest: RunManifest {
            train: Some(cfg),
            split: labelled.then_some(split),
            eval: labelled.then_some(eval_options),
            ..loaded.manifest("compare", cfg.seed)
        },
    };
    if let Some(path) = &args.out_json {
        write_text(path, &report.to_json()?)?;
    }
    let csv = report.to_csv();
    match &args.out_csv {
        Some(path) => write_text(path, &csv),
        None => emit(out, &csv),
    }
}
