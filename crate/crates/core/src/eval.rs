//! Classification-based validation of a band subset: stratified sampling,
//! k-NN prediction, OA/AA/Kappa, and repeated trials.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hsi::HyperspectralImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub per_class_ratio: f64,
    pub min_per_class: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            per_class_ratio: 0.1,
            min_per_class: 1,
            seed: 0,
        }
    }
}

impl SplitSpec {
    fn validate(&self) -> Result<()> {
        if !(self.per_class_ratio > 0.0 && self.per_class_ratio <= 1.0) {
            return Err(Error::Config(format!(
                "per_class_ratio must lie in (0, 1], got {}",
                self.per_class_ratio
            )));
        }
        if self.min_per_class == 0 {
            return Err(Error::Config("min_per_class must be positive".into()));
        }
        Ok(())
    }

    /// Training samples drawn from a class of `n` pixels.
    pub fn train_count(&self, n: usize) -> usize {
        let by_ratio = (self.per_class_ratio * n as f64).round() as usize;
        by_ratio.max(self.min_per_class).min(n)
    }
}

/// Per-class random split of labelled pixels (label 0 is background and skipped).
/// Returns ascending `(train, test)` pixel indices.
pub fn stratified_split(labels: &[u32], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let classes: Vec<u32> = class_members(labels).into_keys().collect();
    if classes.is_empty() {
        return Err(Error::EmptyClass(0));
    }
    stratified_split_for(labels, &classes, spec)
}

/// Like [`stratified_split`] but every class in `classes` must be present.
pub fn stratified_split_for(labels: &[u32], classes: &[u32], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    spec.validate()?;
    let members = class_members(labels);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for &c in classes {
        let pixels = members.get(&c).filter(|p| !p.is_empty()).ok_or(Error::EmptyClass(c))?;
        let n_train = spec.train_count(pixels.len());
        let mut picked = vec![false; pixels.len()];
        for i in sample(&mut rng, pixels.len(), n_train) {
            picked[i] = true;
        }
        for (&p, &is_train) in pixels.iter().zip(&picked) {
            if is_train {
                train.push(p);
            } else {
                test.push(p);
            }
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

fn class_members(labels: &[u32]) -> BTreeMap<u32, Vec<usize>> {
    let mut members: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (p, &c) in labels.iter().enumerate().filter(|(_, &c)| c != 0) {
        members.entry(c).or_default().push(p);
    }
    members
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-nearest-neighbour prediction with Euclidean distance. Distance ties go
/// to the lower training index; vote ties to the smaller class id.
pub fn knn_classify(train: &[Vec<f64>], train_labels: &[u32], test: &[Vec<f64>], k: usize) -> Result<Vec<u32>> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if train.len() != train_labels.len() {
        return Err(Error::SizeMismatch {
            expected: train.len(),
            found: train_labels.len(),
        });
    }
    if k == 0 || k > train.len() {
        return Err(Error::Config(format!("k must lie in [1, {}], got {k}", train.len())));
    }
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(train.len());
    Ok(test
        .iter()
        .map(|x| {
            order.clear();
            order.extend(train.iter().enumerate().map(|(i, t)| (squared_distance(x, t), i)));
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < order.len() {
                order.select_nth_unstable_by(k - 1, cmp);
            }
            let mut votes: BTreeMap<u32, usize> = BTreeMap::new();
            for &(_, i) in &order[..k] {
                *votes.entry(train_labels[i]).or_insert(0) += 1;
            }
            // BTreeMap iterates ascending, so the first maximum is the smallest id.
            let mut best = (0u32, 0usize);
            for (c, n) in votes {
                if n > best.1 {
                    best = (c, n);
                }
            }
            best.0
        })
        .collect())
}

/// Rows are true classes, columns predictions, both in `classes` order.
pub fn confusion_matrix(truth: &[u32], predicted: &[u32], classes: &[u32]) -> Vec<Vec<usize>> {
    let index: BTreeMap<u32, usize> = classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut m = vec![vec![0usize; classes.len()]; classes.len()];
    for (t, p) in truth.iter().zip(predicted) {
        if let (Some(&ti), Some(&pi)) = (index.get(t), index.get(p)) {
            m[ti][pi] += 1;
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
}

/// Overall accuracy, average per-class accuracy and Cohen's kappa.
///
/// Classes with an empty row are left out of AA. When chance agreement is 1
/// kappa is undefined; it is reported as 1 for perfect agreement and 0 otherwise.
pub fn metrics(confusion: &[Vec<usize>]) -> Result<Metrics> {
    let c = confusion.len();
    if let Some(row) = confusion.iter().find(|r| r.len() != c) {
        return Err(Error::ShapeMismatch {
            expected: c,
            found: row.len(),
        });
    }
    let total: usize = confusion.iter().flatten().sum();
    if total == 0 {
        return Err(Error::EmptyConfusion);
    }
    let diag: usize = (0..c).map(|i| confusion[i][i]).sum();
    let oa = diag as f64 / total as f64;

    let rows: Vec<usize> = confusion.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<usize> = (0..c).map(|j| confusion.iter().map(|r| r[j]).sum()).collect();
    let per_class: Vec<f64> = (0..c)
        .filter(|&i| rows[i] > 0)
        .map(|i| confusion[i][i] as f64 / rows[i] as f64)
        .collect();
    let aa = per_class.iter().sum::<f64>() / per_class.len() as f64;

    // kappa = (n·diag − Σ row·col) / (n² − Σ row·col), in exact integers
    let n = total as u128;
    let chance: u128 = rows.iter().zip(&cols).map(|(&r, &k)| r as u128 * k as u128).sum();
    let kappa = if chance >= n * n {
        if diag as u128 == n {
            1.0
        } else {
            0.0
        }
    } else {
        (n as f64 * diag as f64 - chance as f64) / ((n * n - chance) as f64)
    };
    Ok(Metrics { oa, aa, kappa })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub neighbors: usize,
    /// z-score each band with training-set moments before measuring distance.
    pub standardize: bool,
    /// Worker threads for independent runs; results do not depend on it.
    pub threads: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            neighbors: 3,
            standardize: false,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
    pub confusion: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub runs: usize,
    pub classes: Vec<u32>,
    pub oa_mean: f64,
    pub oa_std: f64,
    pub aa_mean: f64,
    pub aa_std: f64,
    pub kappa_mean: f64,
    pub kappa_std: f64,
    pub per_run: Vec<RunResult>,
}

impl EvalReport {
    /// `run,seed,oa,aa,kappa` rows, one per run.
    pub fn per_run_csv(&self) -> String {
        let mut out = String::from("run,seed,oa,aa,kappa\n");
        for (i, r) in self.per_run.iter().enumerate() {
            out.push_str(&format!("{i},{},{},{},{}\n", r.seed, r.oa, r.aa, r.kappa));
        }
        out
    }
}

/// Sample mean and standard deviation (n − 1 denominator, 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn standardize(train: &mut [Vec<f64>], test: &mut [Vec<f64>]) {
    let dims = train.first().map_or(0, Vec::len);
    let n = train.len() as f64;
    for d in 0..dims {
        let mean = train.iter().map(|x| x[d]).sum::<f64>() / n;
        let sd = (train.iter().map(|x| (x[d] - mean).powi(2)).sum::<f64>() / n).sqrt();
        let sd = if sd > 0.0 { sd } else { 1.0 };
        for x in train.iter_mut().chain(test.iter_mut()) {
            x[d] = (x[d] - mean) / sd;
        }
    }
}

/// `runs` independent split/classify/score rounds; run `r` uses seed `spec.seed + r`.
pub fn repeated_eval(
    image: &HyperspectralImage,
    subset: &[usize],
    spec: &SplitSpec,
    runs: usize,
    options: &EvalOptions,
) -> Result<EvalReport> {
    if runs == 0 {
        return Err(Error::Config("runs must be positive".into()));
    }
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    if let Some(&b) = subset.iter().find(|&&b| b >= image.bands()) {
        return Err(Error::IndexOutOfRange {
            index: b,
            len: image.bands(),
        });
    }
    let labels = image
        .labels()
        .ok_or_else(|| Error::Config("image has no labels".into()))?;
    let classes: Vec<u32> = image.class_counts().into_keys().collect();

    let run = |r: usize| -> Result<RunResult> {
        let seed = spec.seed.wrapping_add(r as u64);
        let (train_idx, test_idx) = stratified_split_for(labels, &classes, &SplitSpec { seed, ..*spec })?;
        let mut train: Vec<Vec<f64>> = train_idx.iter().map(|&p| image.pixel_features(p, subset)).collect();
        let mut test: Vec<Vec<f64>> = test_idx.iter().map(|&p| image.pixel_features(p, subset)).collect();
        if options.standardize {
            standardize(&mut train, &mut test);
        }
        let train_y: Vec<u32> = train_idx.iter().map(|&p| labels[p]).collect();
        let truth: Vec<u32> = test_idx.iter().map(|&p| labels[p]).collect();
        let k = options.neighbors.min(train.len());
        let predicted = knn_classify(&train, &train_y, &test, k)?;
        let confusion = confusion_matrix(&truth, &predicted, &classes);
        let m = metrics(&confusion)?;
        Ok(RunResult {
            seed,
            train_size: train_idx.len(),
            test_size: test_idx.len(),
            oa: m.oa,
            aa: m.aa,
            kappa: m.kappa,
            confusion,
        })
    };
    let threads = options.threads.clamp(1, runs);
    let per_run: Vec<RunResult> = if threads == 1 {
        (0..runs).map(run).collect::<Result<_>>()?
    } else {
        // run r goes to worker r % threads; results are reassembled by index
        let run = &run;
        let mut slots: Vec<Option<Result<RunResult>>> = (0..runs).map(|_| None).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|t| scope.spawn(move || (t..runs).step_by(threads).map(|r| (r, run(r))).collect::<Vec<_>>()))
                .collect();
            for h in handles {
                for (r, res) in h.join().expect("evaluation worker panicked") {
                    slots[r] = Some(res);
                }
            }
        });
        slots
            .into_iter()
            .map(|s| s.expect("every run assigned"))
            .collect::<Result<_>>()?
    };
    let pick = |f: fn(&RunResult) -> f64| mean_std(&per_run.iter().map(f).collect::<Vec<_>>());
    let (oa_mean, oa_std) = pick(|r| r.oa);
    let (aa_mean, aa_std) = pick(|r| r.aa);
    let (kappa_mean, kappa_std) = pick(|r| r.kappa);
    Ok(EvalReport {
        runs,
        classes,
        oa_mean,
        oa_std,
        aa_mean,
        aa_std,
        kappa_mean,
        kappa_std,
        per_run,
    })
}
