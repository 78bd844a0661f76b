//! Reference selectors (entropy ranking, random, sequential forward greedy)
//! and the exhaustive oracle.
//!
//! Every selector breaks ties toward the lower band index.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{BandEnv, EnvConfig, RewardScheme, SelectionState};
use crate::error::{Error, Result};
use crate::stats::BandStats;

/// Default cap on the number of subsets [`exhaustive_best`] will visit.
pub const DEFAULT_EXHAUSTIVE_BUDGET: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    MaxMie,
    MinCorr,
}

impl ObjectiveKind {
    pub fn for_scheme(scheme: RewardScheme) -> Self {
        match scheme {
            RewardScheme::Entropy => ObjectiveKind::MaxMie,
            RewardScheme::Correlation => ObjectiveKind::MinCorr,
        }
    }

    pub fn scheme(self) -> RewardScheme {
        match self {
            ObjectiveKind::MaxMie => RewardScheme::Entropy,
            ObjectiveKind::MinCorr => RewardScheme::Correlation,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    pub kind: ObjectiveKind,
    pub stats: &'a BandStats,
}

impl<'a> Objective<'a> {
    pub fn max_mie(stats: &'a BandStats) -> Self {
        Self {
            kind: ObjectiveKind::MaxMie,
            stats,
        }
    }

    pub fn min_corr(stats: &'a BandStats) -> Self {
        Self {
            kind: ObjectiveKind::MinCorr,
            stats,
        }
    }

    pub fn score(&self, subset: &[usize]) -> Result<f64> {
        match self.kind {
            ObjectiveKind::MaxMie => self.stats.mean_information_entropy(subset),
            ObjectiveKind::MinCorr => self.stats.mean_correlation(subset),
        }
    }

    /// Whether score `a` is strictly better than `b`.
    pub fn improves(&self, a: f64, b: f64) -> bool {
        match self.kind {
            ObjectiveKind::MaxMie => a > b,
            ObjectiveKind::MinCorr => a < b,
        }
    }

    /// Whether `a` is at least as good as `b`, up to `tol`.
    pub fn at_least_as_good(&self, a: f64, b: f64, tol: f64) -> bool {
        match self.kind {
            ObjectiveKind::MaxMie => a >= b - tol,
            ObjectiveKind::MinCorr => a <= b + tol,
        }
    }
}

fn check_k(stats: &BandStats, k: usize) -> Result<()> {
    if k > stats.bands() {
        return Err(Error::Config(format!("k = {k} exceeds {} bands", stats.bands())));
    }
    Ok(())
}

/// The `k` highest-entropy bands, most informative first.
pub fn rank_by_entropy(stats: &BandStats, k: usize) -> Result<Vec<usize>> {
    check_k(stats, k)?;
    let mut order: Vec<usize> = (0..stats.bands()).collect();
    // stable: equal entropies keep ascending index order
    order.sort_by(|&a, &b| stats.entropy(b).total_cmp(&stats.entropy(a)));
    order.truncate(k);
    Ok(order)
}

/// A uniformly random `k`-subset of `0..bands`, ascending.
pub fn random_subset<R: Rng + ?Sized>(bands: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if k > bands {
        return Err(Error::Config(format!("k = {k} exceeds {bands} bands")));
    }
    let mut subset = sample(rng, bands, k).into_vec();
    subset.sort_unstable();
    Ok(subset)
}

/// Sequential forward selection: each step adds the band with the largest
/// reward under the objective's scheme (same first-step conventions as the
/// environment).
pub fn greedy_select(objective: Objective<'_>, k: usize) -> Result<Vec<usize>> {
    check_k(objective.stats, k)?;
    if k == 0 {
        return Ok(Vec::new());
    }
    let env = BandEnv::new(
        objective.stats,
        EnvConfig {
            k,
            reward_scheme: objective.kind.scheme(),
        },
    )?;
    let mut state: SelectionState = env.reset();
    while !env.is_terminal(&state) {
        let mut best: Option<(f64, SelectionState)> = None;
        for a in state.legal_actions() {
            let step = env.step(&state, a)?;
            if best.as_ref().is_none_or(|(r, _)| step.reward > *r) {
                best = Some((step.reward, step.state));
            }
        }
        state = best.ok_or(Error::NoLegalAction)?.1;
    }
    Ok(state.selected().to_vec())
}

/// `n choose k` as u128, saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Exact optimum over all `k`-subsets in lexicographic order; the first
/// optimal subset met wins ties.
pub fn exhaustive_best(objective: Objective<'_>, k: usize) -> Result<(Vec<usize>, f64)> {
    exhaustive_best_with_budget(objective, k, DEFAULT_EXHAUSTIVE_BUDGET)
}

pub fn exhaustive_best_with_budget(objective: Objective<'_>, k: usize, budget: u128) -> Result<(Vec<usize>, f64)> {
    let n = objective.stats.bands();
    check_k(objective.stats, k)?;
    if k == 0 {
        return Err(Error::EmptySubset);
    }
    let candidates = binomial(n, k);
    if candidates > budget {
        return Err(Error::BudgetExceeded { candidates, budget });
    }
    let mut combo: Vec<usize> = (0..k).collect();
    let mut best = (combo.clone(), objective.score(&combo)?);
    while next_combination(&mut combo, n) {
        let s = objective.score(&combo)?;
        if objective.improves(s, best.1) {
            best = (combo.clone(), s);
        }
    }
    Ok(best)
}

/// Advances `combo` to the next k-combination of `0..n` in lexicographic order.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
