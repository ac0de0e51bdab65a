//! Proximal policy optimization with a clipped probability-ratio surrogate,
//! a shared-trunk value head, and generalized advantage estimation.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{check_finite, shared};
use crate::env::{SurefireAction, TradingEnv, FIRST_CURSOR};
use crate::gaf::GafState;
use crate::nn::{log_softmax, softmax, Adam, AdamConfig, Architecture, Network, OutputGrad};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoCoefficients {
    pub value: f64,
    pub entropy: f64,
}

impl Default for PpoCoefficients {
    fn default() -> Self {
        PpoCoefficients { value: 0.5, entropy: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub coefficients: PpoCoefficients,
    pub reward_scale: f64,
    /// Standardize advantages over each rollout before the update. Off by
    /// default: once the policy is nearly deterministic the rollout spread is
    /// mostly value error, and rescaling it to unit variance destabilizes
    /// the policy.
    pub normalize_advantages: bool,
    pub adam: AdamConfig,
    pub architecture: Architecture,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.9,
            gae_lambda: 0.95,
            clip: 0.2,
            epochs: 4,
            minibatch_size: 32,
            coefficients: PpoCoefficients::default(),
            reward_scale: 0.01,
            normalize_advantages: false,
            adam: AdamConfig::default(),
            architecture: Architecture::default_for(true),
        }
    }
}

/// `A_t = sum_l (gamma lambda)^l delta_{t+l}` with
/// `delta_t = r_t + gamma V(s_{t+1}) - V(s_t)` and a zero value after the
/// last step. Returns `(advantages, returns = advantages + values)`.
pub fn gae_advantages(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if rewards.len() != values.len() {
        return Err(Error::LengthMismatch { left: rewards.len(), right: values.len() });
    }
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { 0.0 };
        let delta = rewards[t] + gamma * next_value - values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Per-sample inputs to [`ppo_loss`].
#[derive(Debug, Clone, Copy)]
pub struct PpoBatch<'a> {
    pub old_log_probs: &'a [f64],
    pub new_log_probs: &'a [f64],
    pub advantages: &'a [f64],
    pub values: &'a [f64],
    pub returns: &'a [f64],
    /// Entropy of the current policy at each state.
    pub entropies: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoLoss {
    /// Minimized objective: `-policy + c_v * value - c_e * entropy`.
    pub total: f64,
    /// Mean clipped surrogate `min(r A, clip(r) A)`.
    pub policy: f64,
    /// Mean squared value error.
    pub value: f64,
    pub entropy: f64,
}

fn clipped_term(ratio: f64, advantage: f64, clip: f64) -> (f64, bool) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * advantage;
    if unclipped <= clipped {
        (unclipped, true)
    } else {
        (clipped, false)
    }
}

pub fn ppo_loss(batch: &PpoBatch<'_>, clip: f64, coefs: PpoCoefficients) -> Result<PpoLoss> {
    let n = batch.old_log_probs.len();
    for len in [
        batch.new_log_probs.len(),
        batch.advantages.len(),
        batch.values.len(),
        batch.returns.len(),
        batch.entropies.len(),
    ] {
        if len != n {
            return Err(Error::LengthMismatch { left: n, right: len });
        }
    }
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    if clip <= 0.0 {
        return Err(Error::InvalidConfig("clip range must be positive".into()));
    }
    let mut policy = 0.0;
    for i in 0..n {
        let ratio = check_finite(libm::exp(batch.new_log_probs[i] - batch.old_log_probs[i]), "probability ratio")?;
        policy += clipped_term(ratio, batch.advantages[i], clip).0;
    }
    let nf = n as f64;
    let policy = policy / nf;
    let value = batch.values.iter().zip(batch.returns).map(|(v, r)| (v - r) * (v - r)).sum::<f64>() / nf;
    let entropy = batch.entropies.iter().sum::<f64>() / nf;
    let total = -policy + coefs.value * value - coefs.entropy * entropy;
    Ok(PpoLoss { total: check_finite(total, "PPO loss")?, policy, value, entropy })
}

/// One sample's share (`1 / batch_len`) of the [`ppo_loss`] total and its
/// gradient with respect to the logits and value output. Also returns the
/// probability ratio.
#[allow(clippy::too_many_arguments)]
pub fn ppo_sample_grad(
    logits: &[f64],
    value: f64,
    action: usize,
    old_log_prob: f64,
    advantage: f64,
    ret: f64,
    clip: f64,
    coefs: PpoCoefficients,
    batch_len: usize,
) -> Result<(f64, OutputGrad, f64)> {
    let log_probs = log_softmax(logits);
    let probs = softmax(logits);
    let new_log_prob = *log_probs.get(action).ok_or(Error::ActionIndex(action))?;
    let ratio = check_finite(libm::exp(new_log_prob - old_log_prob), "probability ratio")?;
    let entropy: f64 = -probs.iter().zip(&log_probs).map(|(p, l)| p * l).sum::<f64>();
    let (surrogate, active) = clipped_term(ratio, advantage, clip);
    let scale = 1.0 / batch_len as f64;
    let loss = scale * (-surrogate + coefs.value * (value - ret) * (value - ret) - coefs.entropy * entropy);

    // d(-surrogate)/d log pi(a) is -r A on the unclipped branch, zero otherwise.
    let d_logp = if active { -ratio * advantage } else { 0.0 };
    let d_logits = probs
        .iter()
        .zip(&log_probs)
        .enumerate()
        .map(|(j, (&p, &lp))| {
            let onehot = if j == action { 1.0 } else { 0.0 };
            // dH/dz_j = -p_j (log p_j + H)
            let d_entropy = -p * (lp + entropy);
            scale * (d_logp * (onehot - p) - coefs.entropy * d_entropy)
        })
        .collect();
    let d_value = scale * coefs.value * 2.0 * (value - ret);
    Ok((loss, OutputGrad { logits: d_logits, value: d_value }, ratio))
}

/// One episode of on-policy experience.
#[derive(Debug, Clone, Default)]
pub struct Rollout {
    pub states: Vec<Arc<GafState>>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    /// Scaled rewards as seen by the learner.
    pub rewards: Vec<f64>,
    /// Unscaled episode reward.
    pub total_reward: f64,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoUpdateStats {
    pub minibatches: usize,
    /// Loss terms of the very first minibatch, evaluated before any step.
    pub first_minibatch: PpoLoss,
    pub first_minibatch_mean_advantage: f64,
    pub first_minibatch_max_ratio_deviation: f64,
}

#[derive(Debug, Clone)]
pub struct PpoAgent {
    pub config: PpoConfig,
    net: Network,
    adam: Adam,
}

impl PpoAgent {
    pub fn new(config: PpoConfig, seed: u64) -> Result<Self> {
        if !config.architecture.value_head {
            return Err(Error::InvalidConfig("PPO needs a value head".into()));
        }
        if config.epochs == 0 || config.minibatch_size == 0 || config.clip <= 0.0 {
            return Err(Error::InvalidConfig("PPO epochs, minibatch size and clip must be positive".into()));
        }
        let net = Network::new(config.architecture.clone(), seed)?;
        let adam = Adam::new(config.adam, net.params());
        Ok(PpoAgent { config, net, adam })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn into_network(self) -> Network {
        self.net
    }

    /// Samples one episode from the current policy.
    pub fn collect<R: Rng + ?Sized>(&self, env: &mut TradingEnv, rng: &mut R) -> Result<Rollout> {
        let mut rollout = Rollout::default();
        let mut obs = shared(env.reset(FIRST_CURSOR)?);
        while !env.is_done() {
            let out = self.net.forward(&Network::input_from_state(&obs))?;
            let probs = softmax(&out.logits);
            let u: f64 = rng.gen();
            let mut action = probs.len() - 1;
            let mut acc = 0.0;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    action = i;
                    break;
                }
            }
            let step = env.step(SurefireAction::from_index(action)?)?;
            rollout.states.push(obs);
            rollout.actions.push(action);
            rollout.log_probs.push(log_softmax(&out.logits)[action]);
            rollout.values.push(out.value.unwrap_or(0.0));
            rollout.rewards.push(check_finite(step.reward * self.config.reward_scale, "reward")?);
            rollout.total_reward += step.reward;
            obs = shared(step.observation);
        }
        Ok(rollout)
    }

    /// Several epochs of shuffled minibatch steps on one rollout.
    pub fn update<R: Rng + ?Sized>(&mut self, rollout: &Rollout, rng: &mut R) -> Result<PpoUpdateStats> {
        if rollout.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let cfg = &self.config;
        let (mut adv, returns) = gae_advantages(&rollout.rewards, &rollout.values, cfg.gamma, cfg.gae_lambda)?;
        if cfg.normalize_advantages && adv.len() > 1 {
            let n = adv.len() as f64;
            let mean = adv.iter().sum::<f64>() / n;
            let std = libm::sqrt(adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n);
            adv.iter_mut().for_each(|a| *a = (*a - mean) / (std + 1e-8));
        }
        let mut order: Vec<usize> = (0..rollout.len()).collect();
        let mut stats = None;
        let mut minibatches = 0;
        for _ in 0..cfg.epochs {
            order.shuffle(rng);
            for chunk in order.chunks(cfg.minibatch_size) {
                let mut grads = self.net.zero_grads();
                let mut record = stats.is_none().then(|| MinibatchRecord::with_capacity(chunk.len()));
                let mut traces = Vec::with_capacity(chunk.len());
                let mut d_outs = Vec::with_capacity(chunk.len());
                for &i in chunk {
                    let trace = self.net.forward_trace(&Network::input_from_state(&rollout.states[i]))?;
                    let value = trace.output.value.ok_or(Error::NonFinite("missing value head"))?;
                    let (_, d_out, ratio) = ppo_sample_grad(
                        &trace.output.logits,
                        value,
                        rollout.actions[i],
                        rollout.log_probs[i],
                        adv[i],
                        returns[i],
                        cfg.clip,
                        cfg.coefficients,
                        chunk.len(),
                    )?;
                    if let Some(r) = record.as_mut() {
                        r.push(
                            &trace.output.logits,
                            rollout.actions[i],
                            rollout.log_probs[i],
                            adv[i],
                            value,
                            returns[i],
                            ratio,
                        );
                    }
                    traces.push(trace);
                    d_outs.push(d_out);
                }
                self.net.backward_batch(&traces, &d_outs, &mut grads)?;
                if let Some(r) = record {
                    stats = Some(r.finish(cfg.clip, cfg.coefficients)?);
                }
                self.adam.step(self.net.params_mut(), &grads)?;
                minibatches += 1;
            }
        }
        let (first_minibatch, mean_adv, dev) = stats.ok_or(Error::EmptyBatch)?;
        Ok(PpoUpdateStats {
            minibatches,
            first_minibatch,
            first_minibatch_mean_advantage: mean_adv,
            first_minibatch_max_ratio_deviation: dev,
        })
    }
}

struct MinibatchRecord {
    old: Vec<f64>,
    new: Vec<f64>,
    adv: Vec<f64>,
    values: Vec<f64>,
    returns: Vec<f64>,
    entropies: Vec<f64>,
    max_dev: f64,
}

impl MinibatchRecord {
    fn with_capacity(n: usize) -> Self {
        MinibatchRecord {
            old: Vec::with_capacity(n),
            new: Vec::with_capacity(n),
            adv: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            returns: Vec::with_capacity(n),
            entropies: Vec::with_capacity(n),
            max_dev: 0.0,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn push(&mut self, logits: &[f64], action: usize, old: f64, adv: f64, value: f64, ret: f64, ratio: f64) {
        let lp = log_softmax(logits);
        let entropy = -softmax(logits).iter().zip(&lp).map(|(p, l)| p * l).sum::<f64>();
        self.old.push(old);
        self.new.push(lp[action]);
        self.adv.push(adv);
        self.values.push(value);
        self.returns.push(ret);
        self.entropies.push(entropy);
        self.max_dev = self.max_dev.max((ratio - 1.0).abs());
    }

    fn finish(self, clip: f64, coefs: PpoCoefficients) -> Result<(PpoLoss, f64, f64)> {
        let batch = PpoBatch {
            old_log_probs: &self.old,
            new_log_probs: &self.new,
            advantages: &self.adv,
            values: &self.values,
            returns: &self.returns,
            entropies: &self.entropies,
        };
        let loss = ppo_loss(&batch, clip, coefs)?;
        let mean_adv = self.adv.iter().sum::<f64>() / self.adv.len() as f64;
        Ok((loss, mean_adv, self.max_dev))
    }
}
