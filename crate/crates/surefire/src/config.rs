//! Run configuration: a flat JSON object, every key optional, with command-line
//! flags layered on top.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use surefire_core::agents::{AgentKind, DqnConfig, PpoCoefficients, PpoConfig, TrainConfig};
use surefire_core::env::SurefireAction;
use surefire_core::gaf::Rescaling;
use surefire_core::market::GapPolicy;
use surefire_core::metrics::DEFAULT_INITIAL_EQUITY;
use surefire_core::nn::{AdamConfig, Architecture, ConvSpec};
use surefire_core::{CandleSeries, Side};

use crate::error::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AgentName {
    Constant,
    Dqn,
    Ppo,
}

/// How GAF rescaling bounds are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RescalingMode {
    /// Each window and channel maps its own range onto [-1, 1].
    PerWindow,
    /// Bounds measured over the training range, reused for evaluation.
    TrainRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    /// Pair label such as `EUR/USD`; inferred from the data file name when absent.
    pub currency: Option<String>,
    pub train_start: NaiveDate,
    pub train_end: NaiveDate,
    pub eval_start: NaiveDate,
    pub eval_end: NaiveDate,
    pub agent: AgentName,
    pub constant_max_additional: u32,
    pub constant_direction: Side,
    pub constant_take_profit: i64,
    pub episodes: usize,
    pub seed: Option<u64>,
    /// Output directory. Not part of the config hash.
    pub out: Option<PathBuf>,
    pub allow_gaps: bool,
    pub base_units: u64,
    pub initial_equity: i64,
    pub rescaling: RescalingMode,

    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub gamma: f64,
    pub reward_scale: f64,
    pub conv_kernel: usize,
    pub conv_filters: Vec<usize>,
    pub hidden_units: Vec<usize>,

    pub dqn_batch_size: usize,
    pub dqn_buffer_capacity: usize,
    pub dqn_sync_period: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_anneal_fraction: f64,
    pub huber_delta: f64,

    pub ppo_gae_lambda: f64,
    pub ppo_clip: f64,
    pub ppo_epochs: usize,
    pub ppo_minibatch_size: usize,
    pub ppo_value_coef: f64,
    pub ppo_entropy_coef: f64,
    pub ppo_normalize_advantages: bool,
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date")
}

impl Default for RunConfig {
    fn default() -> Self {
        let dqn = DqnConfig::default();
        let ppo = PpoConfig::default();
        let arch = Architecture::default_for(false);
        RunConfig {
            data: None,
            currency: None,
            train_start: date(2018, 8, 1),
            train_end: date(2018, 11, 30),
            eval_start: date(2018, 12, 1),
            eval_end: date(2018, 12, 31),
            agent: AgentName::Dqn,
            constant_max_additional: 3,
            constant_direction: Side::Buy,
            constant_take_profit: 20,
            episodes: 1300,
            seed: None,
            out: None,
            allow_gaps: false,
            base_units: 1,
            initial_equity: DEFAULT_INITIAL_EQUITY,
            rescaling: RescalingMode::PerWindow,
            lr: dqn.adam.lr,
            adam_beta1: dqn.adam.beta1,
            adam_beta2: dqn.adam.beta2,
            adam_eps: dqn.adam.eps,
            gamma: dqn.gamma,
            reward_scale: dqn.reward_scale,
            conv_kernel: arch.convs[0].kernel,
            conv_filters: arch.convs.iter().map(|c| c.filters).collect(),
            hidden_units: arch.hidden.clone(),
            dqn_batch_size: dqn.batch_size,
            dqn_buffer_capacity: dqn.buffer_capacity,
            dqn_sync_period: dqn.sync_period,
            epsilon_start: dqn.epsilon_start,
            epsilon_end: dqn.epsilon_end,
            epsilon_anneal_fraction: dqn.anneal_fraction,
            huber_delta: dqn.huber_delta,
            ppo_gae_lambda: ppo.gae_lambda,
            ppo_clip: ppo.clip,
            ppo_epochs: ppo.epochs,
            ppo_minibatch_size: ppo.minibatch_size,
            ppo_value_coef: ppo.coefficients.value,
            ppo_entropy_coef: ppo.coefficients.entropy,
            ppo_normalize_advantages: ppo.normalize_advantages,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub data: Option<PathBuf>,
    pub currency: Option<String>,
    pub seed: Option<u64>,
    pub agent: Option<AgentName>,
    pub episodes: Option<usize>,
    pub out: Option<PathBuf>,
    pub allow_gaps: bool,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(AppError::io(path))?;
        Self::from_json(&text).map_err(|e| AppError::Usage(format!("{}: {e}", path.display())))
    }

    /// File (or defaults) plus overrides, validated.
    pub fn resolve(path: Option<&Path>, overrides: Overrides) -> Result<Self, AppError> {
        let mut config = match path {
            Some(p) => Self::load(p)?,
            None => RunConfig::default(),
        };
        config.apply(overrides);
        config.validate()?;
        Ok(config)
    }

    pub fn apply(&mut self, o: Overrides) {
        if o.data.is_some() {
            self.data = o.data;
        }
        if o.currency.is_some() {
            self.currency = o.currency;
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if let Some(agent) = o.agent {
            self.agent = agent;
        }
        if let Some(episodes) = o.episodes {
            self.episodes = episodes;
        }
        if o.out.is_some() {
            self.out = o.out;
        }
        self.allow_gaps |= o.allow_gaps;
    }

    pub fn validate(&self) -> Result<(), AppError> {
        let bad = |msg: String| Err(AppError::Usage(msg));
        if self.train_start > self.train_end {
            return bad(format!("train range {}..{} is empty", self.train_start, self.train_end));
        }
        if self.eval_start > self.eval_end {
            return bad(format!("eval range {}..{} is empty", self.eval_start, self.eval_end));
        }
        if self.eval_start <= self.train_end {
            return bad(format!(
                "eval range must start after the train range ends ({} <= {})",
                self.eval_start, self.train_end
            ));
        }
        if self.base_units == 0 {
            return bad("base_units must be positive".into());
        }
        if self.initial_equity <= 0 {
            return bad("initial_equity must be positive".into());
        }
        self.constant_action()?;
        self.architecture(false).validate().map_err(|e| AppError::Usage(e.to_string()))?;
        Ok(())
    }

    pub fn seed(&self) -> Result<u64, AppError> {
        self.seed.ok_or_else(|| AppError::Usage("a seed is required (--seed or \"seed\" in the config)".into()))
    }

    pub fn data_path(&self) -> Result<&Path, AppError> {
        self.data.as_deref().ok_or_else(|| AppError::Usage("no data file (--data or \"data\" in the config)".into()))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn gap_policy(&self) -> GapPolicy {
        if self.allow_gaps {
            GapPolicy::Allow
        } else {
            GapPolicy::Reject
        }
    }

    pub fn constant_action(&self) -> Result<SurefireAction, AppError> {
        SurefireAction::new(self.constant_max_additional, self.constant_direction, self.constant_take_profit)
            .map_err(|e| AppError::Usage(e.to_string()))
    }

    pub fn agent_kind(&self) -> Result<AgentKind, AppError> {
        Ok(match self.agent {
            AgentName::Constant => AgentKind::Constant(self.constant_action()?),
            AgentName::Dqn => AgentKind::Dqn,
            AgentName::Ppo => AgentKind::Ppo,
        })
    }

    pub fn architecture(&self, value_head: bool) -> Architecture {
        let mut arch = Architecture::default_for(value_head);
        arch.convs = self.conv_filters.iter().map(|&filters| ConvSpec { kernel: self.conv_kernel, filters }).collect();
        arch.hidden = self.hidden_units.clone();
        arch
    }

    /// Architecture of the network the configured agent trains, if any.
    pub fn agent_architecture(&self) -> Option<Architecture> {
        match self.agent {
            AgentName::Constant => None,
            AgentName::Dqn => Some(self.architecture(false)),
            AgentName::Ppo => Some(self.architecture(true)),
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig, AppError> {
        let adam = AdamConfig { lr: self.lr, beta1: self.adam_beta1, beta2: self.adam_beta2, eps: self.adam_eps };
        Ok(TrainConfig {
            episodes: self.episodes,
            seed: self.seed()?,
            dqn: DqnConfig {
                gamma: self.gamma,
                batch_size: self.dqn_batch_size,
                buffer_capacity: self.dqn_buffer_capacity,
                sync_period: self.dqn_sync_period,
                epsilon_start: self.epsilon_start,
                epsilon_end: self.epsilon_end,
                anneal_fraction: self.epsilon_anneal_fraction,
                huber_delta: self.huber_delta,
                reward_scale: self.reward_scale,
                adam,
                architecture: self.architecture(false),
            },
            ppo: PpoConfig {
                gamma: self.gamma,
                gae_lambda: self.ppo_gae_lambda,
                clip: self.ppo_clip,
                epochs: self.ppo_epochs,
                minibatch_size: self.ppo_minibatch_size,
                coefficients: PpoCoefficients { value: self.ppo_value_coef, entropy: self.ppo_entropy_coef },
                reward_scale: self.reward_scale,
                normalize_advantages: self.ppo_normalize_advantages,
                adam,
                architecture: self.architecture(true),
            },
        })
    }

    /// Unix-second half-open bounds `[start 00:00, end + 1 day 00:00)`.
    pub fn train_bounds(&self) -> (i64, i64) {
        day_bounds(self.train_start, self.train_end)
    }

    pub fn eval_bounds(&self) -> (i64, i64) {
        day_bounds(self.eval_start, self.eval_end)
    }

    pub fn rescaling_for(&self, train: &CandleSeries) -> Rescaling {
        match self.rescaling {
            RescalingMode::PerWindow => Rescaling::PerWindow,
            RescalingMode::TrainRange => Rescaling::fixed_from(train.candles()),
        }
    }

    /// SHA-256 of the canonical (sorted-key) JSON of everything except `out`.
    pub fn hash(&self) -> [u8; 32] {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let serde_json::Value::Object(map) = &mut value {
            map.remove("out");
        }
        Sha256::digest(value.to_string().as_bytes()).into()
    }

    pub fn hash_hex(&self) -> String {
        hex::encode(self.hash())
    }

    /// Explicit label, else a major pair named by the data file's first six
    /// letters (`EURUSD_H4.csv` -> `EUR/USD`).
    pub fn currency_label(&self) -> Result<String, AppError> {
        if let Some(c) = &self.currency {
            return Ok(c.clone());
        }
        self.data
            .as_deref()
            .and_then(currency_from_path)
            .ok_or_else(|| AppError::Usage("cannot infer the currency pair; pass --currency".into()))
    }
}

fn day_bounds(start: NaiveDate, end: NaiveDate) -> (i64, i64) {
    let midnight = |d: NaiveDate| d.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc().timestamp();
    (midnight(start), midnight(end) + 86_400)
}

const CURRENCIES: [&str; 8] = ["AUD", "CAD", "CHF", "EUR", "GBP", "JPY", "NZD", "USD"];

pub fn currency_from_path(path: &Path) -> Option<String> {
    let stem = path.file_stem()?.to_str()?.to_ascii_uppercase();
    let letters: String = stem.chars().filter(|c| *c != '/').take(6).collect();
    let (base, quote) = (letters.get(..3)?, letters.get(3..6)?);
    (CURRENCIES.contains(&base) && CURRENCIES.contains(&quote)).then(|| format!("{base}/{quote}"))
}
