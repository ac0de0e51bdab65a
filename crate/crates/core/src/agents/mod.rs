//! Decision makers over [`TradingEnv`]: a constant baseline, DQN, and PPO,
//! plus the seeded training loop shared by all three.

mod dqn;
mod ppo;
mod replay;

use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use dqn::{dqn_update, huber, td_target, DqnAgent, DqnConfig};
pub use ppo::{
    gae_advantages, ppo_loss, ppo_sample_grad, PpoAgent, PpoBatch, PpoCoefficients, PpoConfig, PpoLoss, PpoUpdateStats,
    Rollout,
};
pub use replay::{ReplayBuffer, Transition};

use crate::env::{SurefireAction, TradeRecord, TradingEnv, FIRST_CURSOR};
use crate::gaf::GafState;
use crate::nn::Network;
use crate::{Error, Result};

/// Maps an observation to an action index.
pub trait Policy {
    fn act(&self, state: &GafState) -> Result<usize>;
}

/// Always plays the same action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstantPolicy {
    action: SurefireAction,
    index: usize,
}

pub fn constant_policy(fixed: SurefireAction) -> Result<ConstantPolicy> {
    Ok(ConstantPolicy { action: fixed, index: fixed.index()? })
}

impl ConstantPolicy {
    pub fn action(&self) -> SurefireAction {
        self.action
    }
}

impl Policy for ConstantPolicy {
    fn act(&self, _state: &GafState) -> Result<usize> {
        Ok(self.index)
    }
}

/// Picks the highest output (Q-value or logit) of a network.
#[derive(Debug, Clone, Copy)]
pub struct GreedyPolicy<'a>(pub &'a Network);

impl Policy for GreedyPolicy<'_> {
    fn act(&self, state: &GafState) -> Result<usize> {
        let out = self.0.forward(&Network::input_from_state(state))?;
        Ok(argmax(&out.logits))
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// With probability `epsilon` a uniform random action, otherwise the argmax.
pub fn epsilon_greedy<R: Rng + ?Sized>(q_values: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        rng.gen_range(0..q_values.len())
    } else {
        argmax(q_values)
    }
}

/// Linear anneal from `start` to `end` over the first `fraction` of
/// `episodes`, then flat at exactly `end`.
pub fn epsilon_schedule(episode: usize, episodes: usize, start: f64, end: f64, fraction: f64) -> f64 {
    let span = episodes as f64 * fraction;
    let e = episode as f64;
    if span <= 0.0 || e >= span {
        end
    } else {
        start + (end - start) * (e / span)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub total_reward: f64,
    pub trades: Vec<TradeRecord>,
}

/// Plays one episode from the first full window with a fixed policy.
pub fn run_episode(env: &mut TradingEnv, policy: &dyn Policy) -> Result<EpisodeSummary> {
    let mut obs = env.reset(FIRST_CURSOR)?;
    let mut total_reward = 0.0;
    while !env.is_done() {
        let action = SurefireAction::from_index(policy.act(&obs)?)?;
        let step = env.step(action)?;
        total_reward += step.reward;
        obs = step.observation;
    }
    Ok(EpisodeSummary { total_reward, trades: env.trade_log().to_vec() })
}

#[derive(Debug, Clone, PartialEq)]
pub enum AgentKind {
    Constant(SurefireAction),
    Dqn,
    Ppo,
}

impl AgentKind {
    /// Leading letter of the model code.
    pub fn code_letter(&self) -> char {
        match self {
            AgentKind::Constant(_) => 'C',
            AgentKind::Dqn => 'D',
            AgentKind::Ppo => 'P',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub episodes: usize,
    pub seed: u64,
    pub dqn: DqnConfig,
    pub ppo: PpoConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { episodes: 1300, seed: 0, dqn: DqnConfig::default(), ppo: PpoConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedAgent {
    Constant(ConstantPolicy),
    Dqn(Network),
    Ppo(Network),
}

impl TrainedAgent {
    pub fn network(&self) -> Option<&Network> {
        match self {
            TrainedAgent::Constant(_) => None,
            TrainedAgent::Dqn(n) | TrainedAgent::Ppo(n) => Some(n),
        }
    }
}

impl Policy for TrainedAgent {
    fn act(&self, state: &GafState) -> Result<usize> {
        match self {
            TrainedAgent::Constant(c) => c.act(state),
            TrainedAgent::Dqn(n) | TrainedAgent::Ppo(n) => GreedyPolicy(n).act(state),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    pub episodes: usize,
    /// Undiscounted-by-time sum of step rewards (pips x fill discount) per episode.
    pub history: Vec<f64>,
    pub agent: TrainedAgent,
    pub seed: u64,
}

pub fn train(env: &mut TradingEnv, kind: &AgentKind, config: &TrainConfig) -> Result<TrainRun> {
    train_with(env, kind, config, |_, _| {})
}

/// [`train`] with a callback after each episode `(episode, cumulative_reward)`.
pub fn train_with<F>(
    env: &mut TradingEnv,
    kind: &AgentKind,
    config: &TrainConfig,
    mut on_episode: F,
) -> Result<TrainRun>
where
    F: FnMut(usize, f64),
{
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = Vec::with_capacity(config.episodes);
    let agent = match kind {
        AgentKind::Constant(action) => {
            let policy = constant_policy(*action)?;
            for ep in 0..config.episodes {
                let total = run_episode(env, &policy)?.total_reward;
                history.push(total);
                on_episode(ep, total);
            }
            TrainedAgent::Constant(policy)
        }
        AgentKind::Dqn => {
            let mut agent = DqnAgent::new(config.dqn.clone(), config.seed)?;
            for ep in 0..config.episodes {
                let eps = epsilon_schedule(
                    ep,
                    config.episodes,
                    config.dqn.epsilon_start,
                    config.dqn.epsilon_end,
                    config.dqn.anneal_fraction,
                );
                let total = agent.run_episode(env, eps, &mut rng)?;
                history.push(total);
                on_episode(ep, total);
            }
            TrainedAgent::Dqn(agent.into_online())
        }
        AgentKind::Ppo => {
            let mut agent = PpoAgent::new(config.ppo.clone(), config.seed)?;
            for ep in 0..config.episodes {
                let rollout = agent.collect(env, &mut rng)?;
                let total = rollout.total_reward;
                agent.update(&rollout, &mut rng)?;
                history.push(total);
                on_episode(ep, total);
            }
            TrainedAgent::Ppo(agent.into_network())
        }
    };
    Ok(TrainRun { episodes: config.episodes, history, agent, seed: config.seed })
}

pub(crate) fn shared(state: GafState) -> Arc<GafState> {
    Arc::new(state)
}

pub(crate) fn check_finite(value: f64, what: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(what))
    }
}
