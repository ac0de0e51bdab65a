//! Deep Q-learning with experience replay and a periodically synced target network.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{check_finite, epsilon_greedy, shared, ReplayBuffer, Transition};
use crate::env::{SurefireAction, TradingEnv, FIRST_CURSOR};
use crate::nn::{Adam, AdamConfig, Architecture, Network, OutputGrad};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DqnConfig {
    pub gamma: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Online-to-target copy period, in updates.
    pub sync_period: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Share of the episodes over which epsilon anneals.
    pub anneal_fraction: f64,
    pub huber_delta: f64,
    /// Rewards are multiplied by this before they reach the network.
    pub reward_scale: f64,
    pub adam: AdamConfig,
    pub architecture: Architecture,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            gamma: 0.9,
            batch_size: 32,
            buffer_capacity: 10_000,
            sync_period: 100,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            anneal_fraction: 0.5,
            huber_delta: 1.0,
            reward_scale: 0.01,
            adam: AdamConfig::default(),
            architecture: Architecture::default_for(false),
        }
    }
}

pub fn td_target(reward: f64, terminal: bool, gamma: f64, max_next_q: f64) -> f64 {
    if terminal {
        reward
    } else {
        reward + gamma * max_next_q
    }
}

/// Huber loss and its derivative at `x`.
pub fn huber(x: f64, delta: f64) -> (f64, f64) {
    if x.abs() <= delta {
        (0.5 * x * x, x)
    } else {
        (delta * (x.abs() - 0.5 * delta), delta * x.signum())
    }
}

/// One gradient step of the online network towards the TD targets. Returns
/// the mean Huber loss of the batch before the step.
pub fn dqn_update(
    batch: &[&Transition],
    online: &mut Network,
    target: &Network,
    adam: &mut Adam,
    gamma: f64,
    huber_delta: f64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = batch.len() as f64;
    let mut grads = online.zero_grads();
    let mut loss = 0.0;
    let mut traces = Vec::with_capacity(batch.len());
    let mut d_outs = Vec::with_capacity(batch.len());
    for t in batch {
        let max_next = if t.terminal {
            0.0
        } else {
            let q = target.forward(&Network::input_from_state(&t.next_state))?.logits;
            q.into_iter().fold(f64::NEG_INFINITY, f64::max)
        };
        let y = td_target(t.reward, t.terminal, gamma, max_next);
        let trace = online.forward_trace(&Network::input_from_state(&t.state))?;
        let q = *trace.output.logits.get(t.action).ok_or(Error::ActionIndex(t.action))?;
        let (l, dl) = huber(q - y, huber_delta);
        loss += l;
        let mut d_logits = vec![0.0; trace.output.logits.len()];
        d_logits[t.action] = dl / n;
        traces.push(trace);
        d_outs.push(OutputGrad { logits: d_logits, value: 0.0 });
    }
    online.backward_batch(&traces, &d_outs, &mut grads)?;
    let loss = check_finite(loss / n, "DQN loss")?;
    adam.step(online.params_mut(), &grads)?;
    Ok(loss)
}

#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub config: DqnConfig,
    online: Network,
    target: Network,
    adam: Adam,
    buffer: ReplayBuffer,
    updates: u64,
}

impl DqnAgent {
    pub fn new(config: DqnConfig, seed: u64) -> Result<Self> {
        if config.batch_size == 0 || config.sync_period == 0 {
            return Err(Error::InvalidConfig("DQN batch size and sync period must be positive".into()));
        }
        let online = Network::new(config.architecture.clone(), seed)?;
        let adam = Adam::new(config.adam, online.params());
        Ok(DqnAgent {
            target: online.clone(),
            buffer: ReplayBuffer::new(config.buffer_capacity),
            online,
            adam,
            updates: 0,
            config,
        })
    }

    pub fn online(&self) -> &Network {
        &self.online
    }

    pub fn target(&self) -> &Network {
        &self.target
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn into_online(self) -> Network {
        self.online
    }

    pub fn remember(&mut self, t: Transition) {
        self.buffer.push(t);
    }

    /// One replay update once the buffer holds a full batch; syncs the
    /// target network every `sync_period` updates.
    pub fn learn<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<f64>> {
        if self.buffer.len() < self.config.batch_size {
            return Ok(None);
        }
        let batch = self.buffer.sample(self.config.batch_size, rng);
        let loss = dqn_update(
            &batch,
            &mut self.online,
            &self.target,
            &mut self.adam,
            self.config.gamma,
            self.config.huber_delta,
        )?;
        self.updates += 1;
        if self.updates.is_multiple_of(self.config.sync_period) {
            self.target.copy_from(&self.online)?;
        }
        Ok(Some(loss))
    }

    /// Plays one exploring episode, learning after every step. Returns the
    /// episode's summed (unscaled) reward.
    pub fn run_episode<R: Rng + ?Sized>(&mut self, env: &mut TradingEnv, epsilon: f64, rng: &mut R) -> Result<f64> {
        let mut obs = shared(env.reset(FIRST_CURSOR)?);
        let mut total = 0.0;
        while !env.is_done() {
            let q = self.online.forward(&Network::input_from_state(&obs))?.logits;
            let action = epsilon_greedy(&q, epsilon, rng);
            let step = env.step(SurefireAction::from_index(action)?)?;
            total += step.reward;
            let next = shared(step.observation);
            self.remember(Transition {
                state: obs,
                action,
                reward: check_finite(step.reward * self.config.reward_scale, "reward")?,
                next_state: next.clone(),
                terminal: step.done,
            });
            self.learn(rng)?;
            obs = next;
        }
        Ok(total)
    }
}
