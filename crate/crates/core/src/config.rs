//! Scenario files: one TOML document per delivery scenario.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::codec::GenerationSpec;
use crate::error::{Error, Result};
use crate::galois::Field;
use crate::mdp::{LinkModel, ScenarioModel};
use crate::rl::{interpolate_phi, Algorithm, EquivalenceRule, TemperatureSchedule, TrainConfig};
use crate::sim::SimConfig;
use crate::subspace::ProbabilityMode;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationSection {
    pub alpha: Vec<u32>,
    pub delta: Vec<f64>,
    pub playback_delay: u32,
    pub duration: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    pub rate: f64,
    pub loss: f64,
    #[serde(default)]
    pub delay: f64,
}

fn default_q() -> u64 {
    256
}

fn default_horizon() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanningSection {
    pub gamma: f64,
    /// Decision period in slots.
    pub period: u32,
    #[serde(default = "default_q")]
    pub q: u64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub mode: ProbabilityMode,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    1e-9
}

/// Episode budget and decay for one learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSection {
    pub episodes: u64,
    /// Decay factor; interpolated from `phi_anchors` when absent.
    pub phi: Option<f64>,
    pub update_period: Option<u64>,
}

fn default_theta_max() -> f64 {
    75.0
}

fn default_theta_min() -> f64 {
    0.5
}

fn default_seeds() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    #[serde(default = "default_theta_max")]
    pub theta_max: f64,
    #[serde(default = "default_theta_min")]
    pub theta_min: f64,
    /// Independent training seeds per learner.
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub realized_reward: bool,
    #[serde(default)]
    pub curve_every: u64,
    #[serde(default)]
    pub equivalence: EquivalenceRule,
    /// Known `(episodes, phi)` pairs used when a learner has no `phi`.
    #[serde(default)]
    pub phi_anchors: Vec<(u64, f64)>,
    pub qlearn: Option<LearnerSection>,
    #[serde(rename = "qlearn-ve")]
    pub qlearn_ve: Option<LearnerSection>,
}

fn default_runs() -> usize {
    100
}

fn default_generations() -> usize {
    100
}

fn default_payload() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_generations")]
    pub generations: usize,
    #[serde(default = "default_payload")]
    pub payload_len: usize,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            runs: default_runs(),
            generations: default_generations(),
            payload_len: default_payload(),
            seed: 0,
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub generation: GenerationSection,
    pub links: Vec<LinkSection>,
    pub planning: PlanningSection,
    pub training: Option<TrainingSection>,
    #[serde(default)]
    pub simulation: SimulationSection,
}

fn is_integral(x: f64) -> bool {
    (x - x.round()).abs() <= 1e-9
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let path = e.span().map_or_else(String::new, |s| {
                // report the offending line so the key is easy to find
                let line = text[..s.start].matches('\n').count() + 1;
                format!("line {line}")
            });
            Error::config(path, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every field, reporting the first problem with its path.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let g = &self.generation;
        if g.alpha.is_empty() {
            return Err(Error::config("generation.alpha", "at least one layer is required"));
        }
        if let Some(i) = g.alpha.iter().position(|&a| a == 0) {
            return Err(Error::config(format!("generation.alpha[{i}]"), "layers need at least one packet"));
        }
        if g.delta.len() != g.alpha.len() {
            return Err(Error::config(
                "generation.delta",
                format!("expected {} values, one per layer", g.alpha.len()),
            ));
        }
        if let Some(i) = g.delta.iter().position(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::config(format!("generation.delta[{i}]"), "must be finite and nonnegative"));
        }
        if g.duration == 0 {
            return Err(Error::config("generation.duration", "must be positive"));
        }
        let p = &self.planning;
        if p.period != g.duration {
            return Err(Error::config(
                "planning.period",
                format!("decision period must equal generation.duration = {}", g.duration),
            ));
        }
        if g.playback_delay < p.period {
            return Err(Error::config("generation.playback_delay", "must cover one decision period"));
        }
        if !(1..=2).contains(&p.horizon) {
            return Err(Error::config("planning.horizon", "must be 1 or 2"));
        }
        if p.horizon == 2 && !(2 * g.duration <= g.playback_delay && g.playback_delay < 3 * g.duration) {
            return Err(Error::config(
                "generation.playback_delay",
                format!(
                    "with two requestable generations it must lie in [{}, {})",
                    2 * g.duration,
                    3 * g.duration
                ),
            ));
        }
        if !(0.0..=1.0).contains(&p.gamma) {
            return Err(Error::config("planning.gamma", "must lie in [0, 1]"));
        }
        if Field::new(p.q).is_err() {
            return Err(Error::config("planning.q", "need a prime or 2^m with m <= 16"));
        }
        if !(p.threshold > 0.0) {
            return Err(Error::config("planning.threshold", "must be positive"));
        }
        if self.links.is_empty() {
            return Err(Error::config("links", "at least one server link is required"));
        }
        for (k, l) in self.links.iter().enumerate() {
            if !(0.0..1.0).contains(&l.loss) {
                return Err(Error::config(format!("links[{k}].loss"), "must lie in [0, 1)"));
            }
            if !l.rate.is_finite() || l.rate < 0.0 {
                return Err(Error::config(format!("links[{k}].rate"), "must be nonnegative"));
            }
            if !is_integral(l.rate * p.period as f64) {
                return Err(Error::config(
                    format!("links[{k}].rate"),
                    format!("rate x period = {} is not an integer packet budget", l.rate * p.period as f64),
                ));
            }
            if !l.delay.is_finite() || l.delay < 0.0 {
                return Err(Error::config(format!("links[{k}].delay"), "must be nonnegative"));
            }
        }
        if let Some(t) = &self.training {
            if !(t.theta_min > 0.0 && t.theta_max >= t.theta_min) {
                return Err(Error::config("training.theta_min", "temperatures must satisfy 0 < min <= max"));
            }
            if t.seeds == 0 {
                return Err(Error::config("training.seeds", "must be at least 1"));
            }
            for (i, &(n, phi)) in t.phi_anchors.iter().enumerate() {
                if n == 0 || !(phi > 0.0 && phi < 1.0) {
                    return Err(Error::config(
                        format!("training.phi_anchors[{i}]"),
                        "needs a positive episode count and decay in (0, 1)",
                    ));
                }
            }
            for (key, section, ve) in [("qlearn", &t.qlearn, false), ("qlearn-ve", &t.qlearn_ve, true)] {
                let Some(s) = section else { continue };
                let path = format!("training.{key}");
                if s.episodes == 0 {
                    return Err(Error::config(format!("{path}.episodes"), "must be at least 1"));
                }
                match s.phi {
                    Some(phi) if !(phi > 0.0 && phi <= 1.0) => {
                        return Err(Error::config(format!("{path}.phi"), "must lie in (0, 1]"));
                    }
                    None if t.phi_anchors.is_empty() => {
                        return Err(Error::config(
                            format!("{path}.phi"),
                            "missing, and no training.phi_anchors to interpolate from",
                        ));
                    }
                    _ => {}
                }
                match (ve, s.update_period) {
                    (true, None) => {
                        return Err(Error::config(format!("{path}.update_period"), "required for qlearn-ve"));
                    }
                    (true, Some(0)) => {
                        return Err(Error::config(format!("{path}.update_period"), "must be at least 1"));
                    }
                    (false, Some(_)) => {
                        return Err(Error::config(
                            format!("{path}.update_period"),
                            "only meaningful for qlearn-ve",
                        ));
                    }
                    _ => {}
                }
            }
        }
        if self.simulation.runs == 0 {
            return Err(Error::config("simulation.runs", "must be at least 1"));
        }
        if self.simulation.generations == 0 {
            return Err(Error::config("simulation.generations", "must be at least 1"));
        }
        self.model().validate().map_err(|e| Error::config("", e.to_string()))?;
        Ok(())
    }

    pub fn model(&self) -> ScenarioModel {
        let g = &self.generation;
        ScenarioModel {
            spec: GenerationSpec {
                alpha: g.alpha.clone(),
                delta: g.delta.clone(),
                playback_delay: g.playback_delay,
                duration: g.duration,
            },
            links: self
                .links
                .iter()
                .map(|l| LinkModel {
                    rate: l.rate,
                    loss: l.loss,
                    delay: l.delay,
                })
                .collect(),
            period: self.planning.period,
            gamma: self.planning.gamma,
            q: self.planning.q,
            horizon: self.planning.horizon,
            mode: self.planning.mode,
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            generations: self.simulation.generations,
            payload_len: self.simulation.payload_len,
        }
    }

    pub fn training(&self) -> Result<&TrainingSection> {
        self.training
            .as_ref()
            .ok_or_else(|| Error::config("training", "section is required for learning"))
    }

    /// Training setup for `algorithm` ("qlearn" or "qlearn-ve"), optionally
    /// overriding the configured episode count.
    pub fn train_config(&self, algorithm: &str, seed: u64, episodes: Option<u64>) -> Result<TrainConfig> {
        let t = self.training()?;
        let (section, path) = match algorithm {
            "qlearn" => (&t.qlearn, "training.qlearn"),
            "qlearn-ve" => (&t.qlearn_ve, "training.qlearn-ve"),
            other => return Err(Error::config("algorithm", format!("unknown learner {other:?}"))),
        };
        let s = section
            .as_ref()
            .ok_or_else(|| Error::config(path, "section is required for this learner"))?;
        let n = episodes.unwrap_or(s.episodes);
        if n == 0 {
            return Err(Error::config(format!("{path}.episodes"), "must be at least 1"));
        }
        // an explicit phi belongs to the configured episode count
        let phi = match s.phi {
            Some(phi) if n == s.episodes => phi,
            Some(phi) if t.phi_anchors.is_empty() => interpolate_phi(&[(s.episodes, phi)], n)?,
            _ => interpolate_phi(&t.phi_anchors, n)?,
        };
        let algorithm = match s.update_period {
            Some(u) => Algorithm::QLearningVe { update_period: u },
            None => Algorithm::QLearning,
        };
        Ok(TrainConfig {
            algorithm,
            episodes: n,
            gamma: self.planning.gamma,
            schedule: TemperatureSchedule::new(t.theta_max, t.theta_min, phi)?,
            seed,
            realized_reward: t.realized_reward,
            curve_every: t.curve_every,
            equivalence: t.equivalence,
        })
    }
}

/// The scenarios shipped with the library, as `(file stem, TOML text)`.
pub fn bundled() -> [(&'static str, &'static str); 6] {
    [
        ("two-layer-5", include_str!("../scenarios/two-layer-5.toml")),
        ("two-layer-10", include_str!("../scenarios/two-layer-10.toml")),
        ("three-layer-dg5", include_str!("../scenarios/three-layer-dg5.toml")),
        ("three-layer-dg7", include_str!("../scenarios/three-layer-dg7.toml")),
        ("two-server-symmetric", include_str!("../scenarios/two-server-symmetric.toml")),
        ("two-server-asymmetric", include_str!("../scenarios/two-server-asymmetric.toml")),
    ]
}

pub fn bundled_scenario(name: &str) -> Result<ScenarioConfig> {
    let (_, text) = bundled()
        .into_iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::config("name", format!("no bundled scenario {name:?}")))?;
    ScenarioConfig::parse(text)
}
