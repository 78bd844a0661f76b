//! Deep Q-learning over the band-selection environment: replay memory,
//! ε-greedy behaviour, bootstrapped targets and minibatch Nadam updates.

use std::collections::VecDeque;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{BandEnv, EnvConfig, RewardScheme};
use crate::error::{Error, Result};
use crate::qnet::{Nadam, QNetworkParams};
use crate::stats::BandStats;

/// One `(s, a, r, s')` transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Vec<bool>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<bool>,
    pub terminal: bool,
}

fn as_input(bits: &[bool]) -> Vec<f64> {
    bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

/// Fixed-capacity FIFO of experiences.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    buffer: VecDeque<Experience>,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            buffer: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, exp: Experience) {
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(exp);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.buffer.iter()
    }

    /// `size` distinct experiences drawn uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, size: usize) -> Vec<&Experience> {
        let size = size.min(self.buffer.len());
        sample(rng, self.buffer.len(), size)
            .into_iter()
            .map(|i| &self.buffer[i])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub gamma: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_factor: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub max_episodes: usize,
    /// Early stop once ε has reached its floor and the mean return of the last
    /// `plateau_window` episodes moves less than `plateau_tolerance` from the
    /// window before it. Off by default: with ε at its floor a greedy policy
    /// that has stopped changing yields near-constant returns whether or not
    /// it is optimal.
    pub plateau_window: Option<usize>,
    pub plateau_tolerance: f64,
    /// Minibatch updates after each episode.
    pub updates_per_episode: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            batch_size: 100,
            replay_capacity: 50_000,
            epsilon_start: 1.0,
            epsilon_end: 0.01,
            epsilon_decay_factor: 0.95,
            learning_rate: Nadam::DEFAULT_LEARNING_RATE,
            beta1: Nadam::DEFAULT_BETA1,
            beta2: Nadam::DEFAULT_BETA2,
            max_episodes: 2000,
            plateau_window: None,
            plateau_tolerance: 1e-4,
            updates_per_episode: 16,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.epsilon_end)
            || !(0.0..=1.0).contains(&self.epsilon_start)
            || self.epsilon_end > self.epsilon_start
        {
            return bad(format!(
                "need 0 <= epsilon_end <= epsilon_start <= 1, got {} and {}",
                self.epsilon_end, self.epsilon_start
            ));
        }
        if !(self.epsilon_decay_factor > 0.0 && self.epsilon_decay_factor <= 1.0) {
            return bad(format!(
                "epsilon_decay_factor must lie in (0, 1], got {}",
                self.epsilon_decay_factor
            ));
        }
        if self.batch_size == 0 || self.replay_capacity == 0 || self.max_episodes == 0 {
            return bad("batch_size, replay_capacity and max_episodes must be positive".into());
        }
        if self.plateau_window == Some(0) {
            return bad("plateau_window must be positive".into());
        }
        // written so that NaN fails too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        let bad_rate = !(self.learning_rate > 0.0);
        if bad_rate || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("learning_rate must be positive and betas must lie in [0, 1)".into());
        }
        Ok(())
    }

    /// ε used in episode `episode` (0-based): multiplicative decay floored at `epsilon_end`.
    pub fn epsilon_at(&self, episode: usize) -> f64 {
        let mut eps = self.epsilon_start;
        for _ in 0..episode {
            eps = next_epsilon(eps, self);
            if eps == self.epsilon_end {
                break;
            }
        }
        eps
    }
}

fn next_epsilon(eps: f64, cfg: &TrainConfig) -> f64 {
    (eps * cfg.epsilon_decay_factor).max(cfg.epsilon_end)
}

/// ε-greedy choice among `legal`. Exploitation is the masked argmax with ties
/// going to the lowest index.
pub fn select_action<R: Rng + ?Sized>(q_values: &[f64], legal: &[usize], epsilon: f64, rng: &mut R) -> Result<usize> {
    if legal.is_empty() {
        return Err(Error::NoLegalAction);
    }
    if rng.gen::<f64>() < epsilon {
        return Ok(legal[rng.gen_range(0..legal.len())]);
    }
    masked_argmax(q_values, legal).ok_or(Error::NoLegalAction)
}

/// Highest-valued index in `legal`; the first one wins ties. `legal` must be ascending
/// for the tie rule to mean "lowest index".
pub fn masked_argmax(q_values: &[f64], legal: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &a in legal {
        let q = q_values[a];
        match best {
            Some((_, bq)) if q <= bq => {}
            _ => best = Some((a, q)),
        }
    }
    best.map(|(a, _)| a)
}

fn masked_max(q_values: &[f64], selected: &[bool]) -> Option<f64> {
    q_values
        .iter()
        .zip(selected)
        .filter(|(_, &s)| !s)
        .map(|(&q, _)| q)
        .fold(None, |acc, q| Some(acc.map_or(q, |m: f64| m.max(q))))
}

/// Bootstrapped targets `r + γ max Q(s', a')` over actions still legal in
/// `s'`; terminal transitions keep just `r`.
pub fn compute_targets(batch: &[&Experience], params: &QNetworkParams, gamma: f64) -> Result<Vec<f64>> {
    batch
        .iter()
        .map(|exp| {
            if exp.terminal {
                return Ok(exp.reward);
            }
            let q_next = params.q_values(&as_input(&exp.next_state))?;
            Ok(match masked_max(&q_next, &exp.next_state) {
                Some(m) => exp.reward + gamma * m,
                None => exp.reward,
            })
        })
        .collect()
}

/// One semi-gradient step on the batch's mean squared error. Returns the loss
/// measured before the update.
pub fn minibatch_update(
    params: &mut QNetworkParams,
    optimizer: &mut Nadam,
    batch: &[&Experience],
    gamma: f64,
) -> Result<f64> {
    let targets = compute_targets(batch, params, gamma)?;
    let mut grads = QNetworkParams::zeros(params.bands());
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut upstream = vec![0.0; params.bands()];
    for (exp, &y) in batch.iter().zip(&targets) {
        let (q, cache) = params.forward(&as_input(&exp.state))?;
        let err = q[exp.action] - y;
        loss += err * err * scale;
        upstream[exp.action] = err * scale;
        params.backward_into(&cache, &upstream, &mut grads)?;
        upstream[exp.action] = 0.0;
    }
    optimizer.update(params.as_mut_slice(), grads.as_slice())?;
    Ok(loss)
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub epsilon: f64,
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub loss: Option<f64>,
    pub selected_bands: Vec<usize>,
}

/// Step-by-step driver for training; [`train`] runs it to completion.
pub struct Trainer<'a> {
    env: BandEnv<'a>,
    cfg: TrainConfig,
    params: QNetworkParams,
    optimizer: Nadam,
    replay: ReplayMemory,
    rng: ChaCha8Rng,
    epsilon: f64,
    returns: Vec<f64>,
    started: Instant,
}

impl<'a> Trainer<'a> {
    pub fn new(stats: &'a BandStats, env: EnvConfig, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let env = BandEnv::new(stats, env)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let params = QNetworkParams::init(stats.bands(), &mut rng)?;
        let optimizer = Nadam::new(params.len(), cfg.learning_rate, cfg.beta1, cfg.beta2);
        Ok(Self {
            env,
            cfg,
            params,
            optimizer,
            replay: ReplayMemory::new(cfg.replay_capacity),
            rng,
            epsilon: cfg.epsilon_start,
            returns: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn params(&self) -> &QNetworkParams {
        &self.params
    }

    pub fn optimizer(&self) -> &Nadam {
        &self.optimizer
    }

    pub fn replay(&self) -> &ReplayMemory {
        &self.replay
    }

    /// ε for the next episode.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn episodes(&self) -> usize {
        self.returns.len()
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    /// Plays one ε-greedy episode, stores its transitions, then runs the
    /// configured number of minibatch updates.
    pub fn run_episode(&mut self) -> Result<EpisodeRecord> {
        let episode = self.returns.len();
        let epsilon = self.epsilon;
        let mut state = self.env.reset();
        let mut total = 0.0;
        while !self.env.is_terminal(&state) {
            let q = self.params.q_values(&state.to_input())?;
            let legal = state.legal_actions();
            let action = select_action(&q, &legal, epsilon, &mut self.rng)?;
            let step = self.env.step(&state, action)?;
            self.replay.push(Experience {
                state: state.bits().to_vec(),
                action,
                reward: step.reward,
                next_state: step.state.bits().to_vec(),
                terminal: step.terminal,
            });
            total += step.reward;
            state = step.state;
        }

        let mut loss = None;
        for _ in 0..self.cfg.updates_per_episode {
            if self.replay.len() < self.cfg.batch_size {
                break;
            }
            let batch = self.replay.sample(&mut self.rng, self.cfg.batch_size);
            let l = minibatch_update(&mut self.params, &mut self.optimizer, &batch, self.cfg.gamma).map_err(
                |e| match e {
                    Error::NonFiniteGradient => Error::DivergedLoss(episode),
                    other => other,
                },
            )?;
            if !l.is_finite() || !self.params.is_finite() {
                return Err(Error::DivergedLoss(episode));
            }
            loss = Some(l);
        }

        self.epsilon = next_epsilon(self.epsilon, &self.cfg);
        self.returns.push(total);
        Ok(EpisodeRecord {
            episode,
            epsilon,
            episode_return: total,
            loss,
            selected_bands: state.selected().to_vec(),
        })
    }

    /// True once the configured episode budget is spent or returns have plateaued.
    pub fn should_stop(&self) -> bool {
        if self.returns.len() >= self.cfg.max_episodes {
            return true;
        }
        let Some(w) = self.cfg.plateau_window else {
            return false;
        };
        if self.epsilon > self.cfg.epsilon_end || self.returns.len() < 2 * w {
            return false;
        }
        let n = self.returns.len();
        let recent = self.returns[n - w..].iter().sum::<f64>() / w as f64;
        let before = self.returns[n - 2 * w..n - w].iter().sum::<f64>() / w as f64;
        (recent - before).abs() < self.cfg.plateau_tolerance
    }

    pub fn finish(self) -> TrainedPolicy {
        TrainedPolicy {
            params: self.params,
            optimizer: self.optimizer,
            k: self.env.config().k,
            reward_scheme: self.env.config().reward_scheme,
            config: self.cfg,
            epsilon: self.epsilon,
            returns: self.returns,
            elapsed_secs: self.started.elapsed().as_secs_f64(),
        }
    }
}

/// Result of training: the network plus what is needed to resume or report.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPolicy {
    pub params: QNetworkParams,
    pub optimizer: Nadam,
    pub k: usize,
    pub reward_scheme: RewardScheme,
    pub config: TrainConfig,
    pub epsilon: f64,
    pub returns: Vec<f64>,
    pub elapsed_secs: f64,
}

impl TrainedPolicy {
    pub fn episodes(&self) -> usize {
        self.returns.len()
    }

    pub fn bands(&self) -> usize {
        self.params.bands()
    }

    /// Greedy masked-argmax rollout of `k` steps from the empty state.
    pub fn select_bands(&self, k: usize) -> Result<Vec<usize>> {
        let bands = self.params.bands();
        if k > bands {
            return Err(Error::Config(format!(
                "k = {k} exceeds the {bands} bands of the policy"
            )));
        }
        let mut bits = vec![false; bands];
        let mut chosen = Vec::with_capacity(k);
        for _ in 0..k {
            let q = self.params.q_values(&as_input(&bits))?;
            let legal: Vec<usize> = (0..bands).filter(|&b| !bits[b]).collect();
            let a = masked_argmax(&q, &legal).ok_or(Error::NoLegalAction)?;
            bits[a] = true;
            chosen.push(a);
        }
        Ok(chosen)
    }
}

/// Runs training until [`Trainer::should_stop`].
pub fn train(stats: &BandStats, env: EnvConfig, cfg: TrainConfig) -> Result<TrainedPolicy> {
    train_with(stats, env, cfg, |_| {})
}

/// [`train`] with a callback per finished episode (used for logging).
pub fn train_with<F>(stats: &BandStats, env: EnvConfig, cfg: TrainConfig, mut on_episode: F) -> Result<TrainedPolicy>
where
    F: FnMut(&EpisodeRecord),
{
    let mut trainer = Trainer::new(stats, env, cfg)?;
    while !trainer.should_stop() {
        let record = trainer.run_episode()?;
        on_episode(&record);
    }
    Ok(trainer.finish())
}
