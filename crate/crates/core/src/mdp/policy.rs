use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::spaces::RequestVector;
use crate::mdp::table::TabularMdp;
use crate::subspace::RankVector;

/// One row of an exported policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    /// Innovative packets per layer (`u_l = r_l - r_{l-1}`).
    pub state: Vec<u32>,
    pub action: RequestVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

/// A deterministic state-to-action map bound to one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub fingerprint: String,
    pub scheme: String,
    pub gamma: f64,
    pub entries: Vec<PolicyEntry>,
}

impl Policy {
    /// `actions[s]` is the action index chosen in state index `s`.
    pub fn from_actions(
        mdp: &TabularMdp,
        scheme: &str,
        gamma: f64,
        actions: &[usize],
        values: Option<&[f64]>,
    ) -> Result<Policy> {
        if actions.len() != mdp.states.len() {
            return Err(Error::DimensionMismatch {
                expected: mdp.states.len(),
                found: actions.len(),
            });
        }
        let mut entries = Vec::with_capacity(actions.len());
        for (s, &a) in actions.iter().enumerate() {
            if mdp.slot_of(s, a).is_none() {
                return Err(Error::domain(format!("action {a} is not admissible in state {s}")));
            }
            entries.push(PolicyEntry {
                state: mdp.states.state(s).layer_counts(),
                action: mdp.actions.action(a).clone(),
                value: values.map(|v| v[s]),
            });
        }
        Ok(Policy {
            fingerprint: mdp.fingerprint().to_string(),
            scheme: scheme.to_string(),
            gamma,
            entries,
        })
    }

    /// Maps the policy onto the indices of `mdp`, checking that it was made
    /// for the same scenario and is total and admissible.
    pub fn resolve(&self, mdp: &TabularMdp) -> Result<Vec<usize>> {
        if self.fingerprint != mdp.fingerprint() {
            return Err(Error::FingerprintMismatch {
                expected: mdp.fingerprint().to_string(),
                found: self.fingerprint.clone(),
            });
        }
        let mut out = vec![usize::MAX; mdp.states.len()];
        for e in &self.entries {
            let rv = RankVector::from_layer_counts(&e.state);
            let s = mdp.states.index_of(&rv)?;
            let a = mdp
                .actions
                .index_of(&e.action)
                .ok_or_else(|| Error::domain(format!("unknown action {}", e.action)))?;
            if mdp.slot_of(s, a).is_none() {
                return Err(Error::domain(format!("action {} is not admissible in {:?}", e.action, e.state)));
            }
            out[s] = a;
        }
        if let Some(s) = out.iter().position(|&a| a == usize::MAX) {
            return Err(Error::domain(format!(
                "policy has no action for state {:?}",
                mdp.states.state(s).layer_counts()
            )));
        }
        Ok(out)
    }

    pub fn lookup(&self, state: &RankVector) -> Result<&RequestVector> {
        let counts = state.layer_counts();
        self.entries
            .iter()
            .find(|e| e.state == counts)
            .map(|e| &e.action)
            .ok_or_else(|| Error::UnknownState(state.0.clone()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Policy> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::model::fixtures::two_layer;
    use crate::mdp::value_iteration;

    #[test]
    fn export_round_trip_and_guards() {
        let m = two_layer(0.05);
        let t = TabularMdp::build::<f64>(&m).unwrap();
        let vi = value_iteration(&t, 0.9, 1e-9).unwrap();
        let p = Policy::from_actions(&t, "model-mdp", 0.9, &vi.policy, Some(&vi.values)).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        let back: Policy = serde_json::from_str(&text).unwrap();
        assert_eq!(back.resolve(&t).unwrap(), vi.policy);

        let full = RankVector(vec![3, 5]);
        let a = back.lookup(&full).unwrap();
        assert_eq!(a.urgent(0, 2), &[0, 0]);
        assert!(back.lookup(&RankVector(vec![9, 9])).is_err());

        let other = TabularMdp::build::<f64>(&two_layer(0.1)).unwrap();
        assert!(matches!(back.resolve(&other), Err(Error::FingerprintMismatch { .. })));

        let mut partial = back.clone();
        partial.entries.pop();
        assert!(partial.resolve(&t).is_err());
    }
}
