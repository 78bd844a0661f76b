//! The band-selection MDP: a multi-hot state, legal-action masking, the
//! deterministic "add one band" transition and the two reward schemes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::BandStats;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardScheme {
    /// Change in mean information entropy.
    #[default]
    Entropy,
    /// Drop in mean correlation.
    Correlation,
}

impl std::str::FromStr for RewardScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entropy" => Ok(RewardScheme::Entropy),
            "corr" | "correlation" => Ok(RewardScheme::Correlation),
            other => Err(Error::Config(format!(
                "unknown reward scheme {other:?} (expected entropy or corr)"
            ))),
        }
    }
}

/// Multi-hot state plus the selection order. Carries running sums so that a
/// step costs O(|B|).
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionState {
    bits: Vec<bool>,
    selected: Vec<usize>,
    entropy_total: f64,
    corr_total: f64,
}

impl SelectionState {
    pub fn empty(bands: usize) -> Self {
        Self {
            bits: vec![false; bands],
            selected: Vec::new(),
            entropy_total: 0.0,
            corr_total: 0.0,
        }
    }

    /// Rebuilds a state from an ordered selection.
    pub fn from_selected(stats: &BandStats, selected: &[usize]) -> Result<Self> {
        let mut state = Self::empty(stats.bands());
        for &b in selected {
            if b >= stats.bands() || state.bits[b] {
                return Err(Error::IllegalAction(b));
            }
            state = state.with_band(stats, b);
        }
        Ok(state)
    }

    fn with_band(&self, stats: &BandStats, band: usize) -> Self {
        let row = stats.correlation_row(band);
        let cross: f64 = self.selected.iter().map(|&j| row[j]).sum();
        let mut next = self.clone();
        next.bits[band] = true;
        next.selected.push(band);
        next.entropy_total += stats.entropy(band);
        next.corr_total += 2.0 * cross + row[band];
        next
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn contains(&self, band: usize) -> bool {
        self.bits.get(band).copied().unwrap_or(false)
    }

    /// Network input: 1.0 for chosen bands, 0.0 elsewhere.
    pub fn to_input(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    /// Indices still available, ascending.
    pub fn legal_actions(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| !b)
            .map(|(i, _)| i)
            .collect()
    }

    fn mie(&self) -> f64 {
        self.entropy_total / self.selected.len() as f64
    }

    fn corr(&self) -> f64 {
        let n = self.selected.len() as f64;
        self.corr_total / (n * n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub k: usize,
    pub reward_scheme: RewardScheme,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: SelectionState,
    pub reward: f64,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub subset: Vec<usize>,
    pub rewards: Vec<f64>,
}

impl EpisodeOutcome {
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Environment over cached band statistics; episodes last exactly `k` steps.
#[derive(Debug, Clone, Copy)]
pub struct BandEnv<'a> {
    stats: &'a BandStats,
    config: EnvConfig,
}

impl<'a> BandEnv<'a> {
    pub fn new(stats: &'a BandStats, config: EnvConfig) -> Result<Self> {
        if config.k == 0 || config.k > stats.bands() {
            return Err(Error::Config(format!(
                "k must lie in [1, {}], got {}",
                stats.bands(),
                config.k
            )));
        }
        Ok(Self { stats, config })
    }

    pub fn stats(&self) -> &'a BandStats {
        self.stats
    }

    pub fn config(&self) -> EnvConfig {
        self.config
    }

    pub fn bands(&self) -> usize {
        self.stats.bands()
    }

    pub fn reset(&self) -> SelectionState {
        SelectionState::empty(self.bands())
    }

    pub fn legal_actions(&self, state: &SelectionState) -> Vec<usize> {
        state.legal_actions()
    }

    pub fn is_terminal(&self, state: &SelectionState) -> bool {
        state.len() >= self.config.k
    }

    /// Adds `action` to the selection. The input state is left untouched.
    pub fn step(&self, state: &SelectionState, action: usize) -> Result<StepResult> {
        if self.is_terminal(state) {
            return Err(Error::EpisodeFinished);
        }
        if action >= self.bands() || state.contains(action) {
            return Err(Error::IllegalAction(action));
        }
        let next = state.with_band(self.stats, action);
        let reward = match (self.config.reward_scheme, state.is_empty()) {
            (RewardScheme::Entropy, true) => self.stats.entropy(action),
            (RewardScheme::Entropy, false) => next.mie() - state.mie(),
            (RewardScheme::Correlation, true) => 0.0,
            (RewardScheme::Correlation, false) => state.corr() - next.corr(),
        };
        let terminal = self.is_terminal(&next);
        Ok(StepResult {
            state: next,
            reward,
            terminal,
        })
    }

    /// Rolls one full episode from the empty state with `policy`.
    pub fn run_episode<P>(&self, mut policy: P) -> Result<EpisodeOutcome>
    where
        P: FnMut(&SelectionState) -> usize,
    {
        let mut state = self.reset();
        let mut rewards = Vec::with_capacity(self.config.k);
        while !self.is_terminal(&state) {
            let action = policy(&state);
            let step = self.step(&state, action)?;
            rewards.push(step.reward);
            state = step.state;
        }
        Ok(EpisodeOutcome {
            subset: state.selected,
            rewards,
        })
    }

    /// Objective value of a finished subset under this environment's scheme.
    pub fn score(&self, subset: &[usize]) -> Result<f64> {
        match self.config.reward_scheme {
            RewardScheme::Entropy => self.stats.mean_information_entropy(subset),
            RewardScheme::Correlation => self.stats.mean_correlation(subset),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn stats(entropies: Vec<f64>) -> BandStats {
        let l = entropies.len();
        let mut corr = vec![0.3; l * l];
        for i in 0..l {
            corr[i * l + i] = 1.0;
        }
        BandStats::from_parts(entropies, corr, 256).unwrap()
    }

    #[test]
    fn reset_is_all_zero() {
        let s = stats(vec![1.0; 5]);
        let env = BandEnv::new(
            &s,
            EnvConfig {
                k: 2,
                reward_scheme: RewardScheme::Entropy,
            },
        )
        .unwrap();
        let st = env.reset();
        assert_eq!(st.bits(), &[false; 5]);
        assert!(st.is_empty());
        assert_eq!(env.reset(), st);
    }

    #[test]
    fn legal_actions_are_the_complement() {
        let s = stats(vec![1.0; 4]);
        let env = BandEnv::new(
            &s,
            EnvConfig {
                k: 4,
                reward_scheme: RewardScheme::Entropy,
            },
        )
        .unwrap();
        assert_eq!(env.legal_actions(&env.reset()), vec![0, 1, 2, 3]);
        let st = SelectionState::from_selected(&s, &[1, 3]).unwrap();
        assert_eq!(env.legal_actions(&st), vec![0, 2]);
        let full = env.run_episode(|st| st.legal_actions()[0]).unwrap();
        let st = SelectionState::from_selected(&s, &full.subset).unwrap();
        assert!(env.legal_actions(&st).is_empty());
    }

    #[test]
    fn step_sets_one_bit() {
        let s = stats(vec![5.1, 1.0, 2.0, 3.0, 4.0, 0.5]);
        let env = BandEnv::new(
            &s,
            EnvConfig {
                k: 3,
                reward_scheme: RewardScheme::Entropy,
            },
        )
        .unwrap();
        let st = SelectionState::from_selected(&s, &[2]).unwrap();
        let out = env.step(&st, 5).unwrap();
        let set: Vec<usize> = out
            .state
            .bits()
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(set, vec![2, 5]);
        assert_eq!(st.selected(), &[2]);
        assert!(!out.terminal);

        let first = env.step(&env.reset(), 0).unwrap();
        assert_eq!(first.reward, 5.1);
        assert!(matches!(env.step(&st, 2), Err(Error::IllegalAction(2))));
        assert!(matches!(env.step(&st, 6), Err(Error::IllegalAction(6))));
        let done = SelectionState::from_selected(&s, &[0, 1, 2]).unwrap();
        assert!(matches!(env.step(&done, 3), Err(Error::EpisodeFinished)));
    }

    #[test]
    fn running_sums_match_direct_evaluation() {
        let s = stats(vec![5.1, 1.0, 2.0, 3.0, 4.0, 0.5]);
        for scheme in [RewardScheme::Entropy, RewardScheme::Correlation] {
            let env = BandEnv::new(
                &s,
                EnvConfig {
                    k: 6,
                    reward_scheme: scheme,
                },
            )
            .unwrap();
            let mut st = env.reset();
            for a in [3, 0, 5, 1, 4, 2] {
                let out = env.step(&st, a).unwrap();
                let direct = match scheme {
                    RewardScheme::Entropy => s.entropy_reward(st.selected(), out.state.selected()),
                    RewardScheme::Correlation => s.corr_reward(st.selected(), out.state.selected()),
                }
                .unwrap();
                assert_relative_eq!(out.reward, direct, epsilon = 1e-12);
                st = out.state;
            }
        }
    }

    #[test]
    fn episodes() {
        let s = stats(vec![5.1, 1.0, 2.0, 3.0]);
        let env = BandEnv::new(
            &s,
            EnvConfig {
                k: 4,
                reward_scheme: RewardScheme::Entropy,
            },
        )
        .unwrap();
        let ep = env.run_episode(|st| *st.legal_actions().last().unwrap()).unwrap();
        assert_eq!(ep.subset, vec![3, 2, 1, 0]);
        assert_eq!(ep.rewards.len(), 4);
        assert_relative_eq!(
            ep.total_reward(),
            s.mean_information_entropy(&ep.subset).unwrap(),
            epsilon = 1e-12
        );

        let env1 = BandEnv::new(
            &s,
            EnvConfig {
                k: 1,
                reward_scheme: RewardScheme::Entropy,
            },
        )
        .unwrap();
        let ep = env1.run_episode(|_| 3).unwrap();
        assert_eq!(ep.rewards, vec![3.0]);

        let err = env.run_episode(|_| 0).unwrap_err();
        assert!(matches!(err, Error::IllegalAction(0)));
        assert!(BandEnv::new(
            &s,
            EnvConfig {
                k: 5,
                reward_scheme: RewardScheme::Entropy
            }
        )
        .is_err());
    }
}
