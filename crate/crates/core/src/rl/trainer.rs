use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use crate::rl::equivalence::{EquivalenceClasses, EquivalenceRule, LossMask};
use crate::rl::qtable::{boltzmann_select, q_update, QTable, TemperatureSchedule};

/// Outcome of one environment step.
#[derive(Debug, Clone)]
pub struct Step {
    pub next: usize,
    /// Expected reward of the pair under the model.
    pub expected_reward: f64,
    /// Distortion reduction actually achieved in this draw.
    pub realized_reward: f64,
    pub mask: LossMask,
}

/// Source of sampled transitions for the learners.
pub trait Environment {
    /// Takes valid slot `slot` in state `state`.
    fn step(&mut self, mdp: &TabularMdp, state: usize, slot: usize) -> Result<Step>;
    fn rng_state(&self) -> RngState;
    fn restore_rng(&mut self, state: &RngState) -> Result<()>;
}

/// Serializable position of a ChaCha8 generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    /// Hex-encoded 32-byte key.
    pub key: String,
    pub stream: u64,
    /// Word position, decimal because it exceeds 64 bits.
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng, stream: u64) -> Self {
        RngState {
            key: hex::encode(rng.get_seed()),
            stream,
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng> {
        let bytes = hex::decode(&self.key).map_err(|e| Error::domain(format!("bad rng key: {e}")))?;
        let key: [u8; 32] = bytes
            .try_into()
            .map_err(|_| Error::domain("rng key must be 32 bytes"))?;
        let pos: u128 = self
            .word_pos
            .parse()
            .map_err(|e| Error::domain(format!("bad rng position: {e}")))?;
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Algorithm {
    QLearning,
    /// Virtual batch update every `update_period` episodes.
    QLearningVe { update_period: u64 },
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::QLearning => "qlearn",
            Algorithm::QLearningVe { .. } => "qlearn-ve",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub episodes: u64,
    pub gamma: f64,
    pub schedule: TemperatureSchedule,
    pub seed: u64,
    /// Learn from the sampled distortion reduction instead of the
    /// expected reward of the pair.
    #[serde(default)]
    pub realized_reward: bool,
    /// Episodes between learning-curve points; 0 disables the curve.
    #[serde(default)]
    pub curve_every: u64,
    #[serde(default)]
    pub equivalence: EquivalenceRule,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::domain("episode count must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::domain("discount must lie in [0, 1]"));
        }
        if let Algorithm::QLearningVe { update_period: 0 } = self.algorithm {
            return Err(Error::domain("update period must be at least 1"));
        }
        TemperatureSchedule::new(self.schedule.max, self.schedule.min, self.schedule.phi)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: u64,
    /// Mean reward signal over the episodes since the previous point.
    pub window_reward: f64,
    /// Mean reward signal since the start.
    pub running_reward: f64,
    pub temperature: f64,
}

/// Everything needed to resume training bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub fingerprint: String,
    pub config: TrainConfig,
    pub episode: u64,
    pub temperature: f64,
    pub state: usize,
    pub table: QTable,
    pub selection_rng: RngState,
    pub env_rng: RngState,
    pub curve: Vec<CurvePoint>,
    pub reward_sum: f64,
    pub window_sum: f64,
    pub virtual_updates: u64,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub table: QTable,
    /// Greedy action index per state.
    pub policy: Vec<usize>,
    pub curve: Vec<CurvePoint>,
    pub virtual_updates: u64,
}

/// Tabular Q-learning along one continuous trajectory from the empty
/// state, optionally with virtual-experience batches.
pub struct Trainer<'a, E: Environment> {
    mdp: &'a TabularMdp,
    env: E,
    config: TrainConfig,
    classes: Option<EquivalenceClasses>,
    table: QTable,
    rng: ChaCha8Rng,
    episode: u64,
    temperature: f64,
    state: usize,
    curve: Vec<CurvePoint>,
    reward_sum: f64,
    window_sum: f64,
    virtual_updates: u64,
}

impl<'a, E: Environment> Trainer<'a, E> {
    pub const SELECTION_STREAM: u64 = 0;

    pub fn new(mdp: &'a TabularMdp, config: TrainConfig, env: E) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(Self::SELECTION_STREAM);
        let classes = match config.algorithm {
            Algorithm::QLearning => None,
            Algorithm::QLearningVe { .. } => Some(EquivalenceClasses::with_rule(mdp, config.equivalence)),
        };
        Ok(Trainer {
            table: QTable::zeros(mdp),
            temperature: config.schedule.max,
            state: mdp.states.empty_index(),
            mdp,
            env,
            config,
            classes,
            rng,
            episode: 0,
            curve: Vec::new(),
            reward_sum: 0.0,
            window_sum: 0.0,
            virtual_updates: 0,
        })
    }

    pub fn resume(mdp: &'a TabularMdp, mut env: E, ck: Checkpoint) -> Result<Self> {
        if ck.fingerprint != mdp.fingerprint() {
            return Err(Error::FingerprintMismatch {
                expected: mdp.fingerprint().to_string(),
                found: ck.fingerprint,
            });
        }
        if ck.state >= mdp.states.len()
            || ck.table.values.len() != mdp.states.len()
            || (0..mdp.states.len()).any(|s| ck.table.values[s].len() != mdp.valid_actions(s).len())
        {
            return Err(Error::domain("checkpoint does not fit the scenario's state-action space"));
        }
        env.restore_rng(&ck.env_rng)?;
        let mut t = Trainer::new(mdp, ck.config, env)?;
        t.rng = ck.selection_rng.restore()?;
        t.table = ck.table;
        t.episode = ck.episode;
        t.temperature = ck.temperature;
        t.state = ck.state;
        t.curve = ck.curve;
        t.reward_sum = ck.reward_sum;
        t.window_sum = ck.window_sum;
        t.virtual_updates = ck.virtual_updates;
        Ok(t)
    }

    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }

    pub fn is_done(&self) -> bool {
        self.episode >= self.config.episodes
    }

    /// Runs one episode of the learning loop: decay the temperature, pick a
    /// slot, step the environment, update, and every `U` episodes replay
    /// the observation on all equivalent pairs.
    pub fn step(&mut self) -> Result<()> {
        let n = self.episode + 1;
        let s = self.state;
        self.temperature = self.config.schedule.next(self.temperature);
        let slot = boltzmann_select(self.table.row(s), self.temperature, &mut self.rng)?;
        let out = self.env.step(self.mdp, s, slot)?;
        let r = if self.config.realized_reward {
            out.realized_reward
        } else {
            out.expected_reward
        };
        q_update(&mut self.table, s, slot, r, out.next, self.config.gamma);
        if let (Algorithm::QLearningVe { update_period }, Some(classes)) = (self.config.algorithm, &self.classes) {
            if n % update_period == 0 {
                for (s2, slot2) in classes.equivalent_pairs(self.mdp, s, slot, &out.mask) {
                    let r2 = match self.config.equivalence {
                        EquivalenceRule::SameTransition if (s2, slot2) != (s, slot) => self.mdp.reward(s2, slot2),
                        _ => r,
                    };
                    q_update(&mut self.table, s2, slot2, r2, out.next, self.config.gamma);
                    self.virtual_updates += 1;
                }
            }
        }
        self.reward_sum += r;
        self.window_sum += r;
        self.episode = n;
        self.state = out.next;
        let every = self.config.curve_every;
        if every > 0 && (n % every == 0 || n == self.config.episodes) {
            let since = n - self.curve.last().map_or(0, |p| p.episode);
            self.curve.push(CurvePoint {
                episode: n,
                window_reward: self.window_sum / since as f64,
                running_reward: self.reward_sum / n as f64,
                temperature: self.temperature,
            });
            self.window_sum = 0.0;
        }
        Ok(())
    }

    /// Runs at most `count` further episodes, stopping at the configured total.
    pub fn run_for(&mut self, count: u64) -> Result<()> {
        for _ in 0..count {
            if self.is_done() {
                break;
            }
            self.step()?;
        }
        Ok(())
    }

    pub fn run(mut self) -> Result<TrainingOutcome> {
        while !self.is_done() {
            self.step()?;
        }
        Ok(self.finish())
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            fingerprint: self.mdp.fingerprint().to_string(),
            config: self.config.clone(),
            episode: self.episode,
            temperature: self.temperature,
            state: self.state,
            table: self.table.clone(),
            selection_rng: RngState::capture(&self.rng, Self::SELECTION_STREAM),
            env_rng: self.env.rng_state(),
            curve: self.curve.clone(),
            reward_sum: self.reward_sum,
            window_sum: self.window_sum,
            virtual_updates: self.virtual_updates,
        }
    }

    pub fn finish(self) -> TrainingOutcome {
        TrainingOutcome {
            policy: self.table.greedy_policy(self.mdp),
            table: self.table,
            curve: self.curve,
            virtual_updates: self.virtual_updates,
        }
    }
}
