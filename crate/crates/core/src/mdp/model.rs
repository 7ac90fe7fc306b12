use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codec::GenerationSpec;
use crate::error::{Error, Result};
use crate::scalar::decimal_to_ratio;
use crate::subspace::{ProbabilityMode, SubspaceLaws};

/// A server-to-receiver link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    /// Packets per slot.
    pub rate: f64,
    /// Per-packet loss probability.
    pub loss: f64,
    /// Deterministic propagation delay in slots.
    #[serde(default)]
    pub delay: f64,
}

impl LinkModel {
    pub fn new(rate: f64, loss: f64) -> Self {
        LinkModel {
            rate,
            loss,
            delay: 0.0,
        }
    }

    /// Loss probability as an exact rational of its decimal form.
    pub fn loss_ratio(&self) -> BigRational {
        decimal_to_ratio(self.loss)
    }
}

/// Everything the planner needs to know about a delivery scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioModel {
    pub spec: GenerationSpec,
    pub links: Vec<LinkModel>,
    /// Decision period in slots.
    pub period: u32,
    pub gamma: f64,
    /// Field order used for coding.
    pub q: u64,
    /// Number of consecutive generations requestable at a decision epoch.
    pub horizon: usize,
    #[serde(default)]
    pub mode: ProbabilityMode,
}

impl ScenarioModel {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.links.is_empty() {
            return Err(Error::domain("at least one server link is required"));
        }
        if self.period == 0 {
            return Err(Error::domain("decision period must be positive"));
        }
        for (k, link) in self.links.iter().enumerate() {
            if !(0.0..1.0).contains(&link.loss) {
                return Err(Error::domain(format!("link {k}: loss must lie in [0, 1)")));
            }
            if !link.rate.is_finite() || link.rate < 0.0 {
                return Err(Error::domain(format!("link {k}: rate must be nonnegative")));
            }
            if !link.delay.is_finite() || link.delay < 0.0 {
                return Err(Error::domain(format!("link {k}: delay must be nonnegative")));
            }
            let budget = link.rate * self.period as f64;
            if (budget - budget.round()).abs() > 1e-9 {
                return Err(Error::domain(format!(
                    "link {k}: rate x period = {budget} is not an integer packet budget"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::domain("discount must lie in [0, 1]"));
        }
        crate::galois::Field::new(self.q)?;
        if !(1..=2).contains(&self.horizon) {
            return Err(Error::domain("horizon must be 1 or 2 generations"));
        }
        let (d0, dg) = (self.spec.playback_delay, self.spec.duration);
        if self.period != dg {
            return Err(Error::domain(format!(
                "decision period {} must equal the generation duration {dg}",
                self.period
            )));
        }
        if d0 < self.period {
            return Err(Error::domain("playback delay must cover one decision period"));
        }
        // Generation n+1 must be on the server when generation n becomes
        // urgent, and generation n+2 must not be.
        if self.horizon == 2 && !(2 * dg <= d0 && d0 < 3 * dg) {
            return Err(Error::domain(format!(
                "with two requestable generations the playback delay must lie in [{}, {})",
                2 * dg,
                3 * dg
            )));
        }
        Ok(())
    }

    pub fn layers(&self) -> usize {
        self.spec.layers()
    }

    pub fn beta(&self) -> Vec<u32> {
        self.spec.beta()
    }

    /// Per-server packet budget per decision period.
    pub fn budgets(&self) -> Vec<u32> {
        self.links
            .iter()
            .map(|l| (l.rate * self.period as f64).round() as u32)
            .collect()
    }

    /// Packet types per server: every class of every requestable generation.
    pub fn types_per_server(&self) -> usize {
        self.horizon * self.layers()
    }

    /// How many leading positions of a server's packet sequence arrive before
    /// the end of the decision period.
    pub fn timely_positions(&self, server: usize) -> u32 {
        let link = &self.links[server];
        let budget = self.budgets()[server];
        if link.rate <= 0.0 {
            return 0;
        }
        (1..=budget)
            .take_while(|&j| j as f64 / link.rate + link.delay <= self.period as f64 + 1e-9)
            .count() as u32
    }

    pub fn laws(&self) -> SubspaceLaws {
        SubspaceLaws::new(self.q, self.mode)
    }

    /// Slot of the first decision epoch, at which generation 0 is urgent.
    pub fn first_decision(&self) -> u64 {
        (self.spec.playback_delay - self.period) as u64
    }

    /// Hash identifying the scenario dynamics. The discount and probability
    /// mode are excluded so that policies planned under different settings
    /// can be compared on the same scenario.
    pub fn fingerprint(&self) -> String {
        #[derive(Serialize)]
        struct Canonical<'a> {
            alpha: &'a [u32],
            delta: &'a [f64],
            playback_delay: u32,
            duration: u32,
            links: &'a [LinkModel],
            period: u32,
            q: u64,
            horizon: usize,
        }
        let c = Canonical {
            alpha: &self.spec.alpha,
            delta: &self.spec.delta,
            playback_delay: self.spec.playback_delay,
            duration: self.spec.duration,
            links: &self.links,
            period: self.period,
            q: self.q,
            horizon: self.horizon,
        };
        let bytes = serde_json::to_vec(&c).expect("plain data serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::two_layer;
    use super::*;

    #[test]
    fn budgets_and_validation() {
        let m = two_layer(0.05);
        m.validate().unwrap();
        assert_eq!(m.budgets(), vec![5]);
        assert_eq!(m.first_decision(), 5);
        assert_eq!(m.timely_positions(0), 5);

        let mut bad = m.clone();
        bad.links[0].rate = 0.9;
        assert!(bad.validate().is_err());
        let mut bad = m.clone();
        bad.links[0].loss = 1.0;
        assert!(bad.validate().is_err());
        let mut bad = m.clone();
        bad.horizon = 3;
        assert!(bad.validate().is_err());
        let mut bad = m.clone();
        bad.spec.playback_delay = 15;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn delay_cuts_late_positions() {
        let mut m = two_layer(0.0);
        m.links[0].delay = 1.5;
        // arrivals at j + 1.5 <= 5 for j = 1, 2, 3
        assert_eq!(m.timely_positions(0), 3);
    }

    #[test]
    fn fingerprint_ignores_discount_only() {
        let a = two_layer(0.05);
        let mut b = a.clone();
        b.gamma = 0.0;
        b.mode = ProbabilityMode::InfiniteQ;
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), two_layer(0.1).fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }
}
