use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mdp::{RequestVector, TabularMdp};

/// Which positions of each server's packet sequence got through during one
/// decision period. Applied positionally to whatever a request asks for,
/// so every candidate request sees the same channel realization.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LossMask {
    pub delivered: Vec<Vec<bool>>,
}

impl LossMask {
    pub fn sample<R: Rng + ?Sized>(budgets: &[u32], losses: &[f64], rng: &mut R) -> Self {
        LossMask {
            delivered: budgets
                .iter()
                .zip(losses)
                .map(|(&n, &e)| (0..n).map(|_| rng.gen::<f64>() >= e).collect())
                .collect(),
        }
    }

    pub fn all_delivered(budgets: &[u32]) -> Self {
        LossMask {
            delivered: budgets.iter().map(|&n| vec![true; n as usize]).collect(),
        }
    }
}

/// Per-class arrivals for the generations after the urgent one.
pub fn masked_future_arrivals(action: &RequestVector, mask: &LossMask, layers: usize) -> Vec<u32> {
    let mut z = vec![0; layers];
    for k in 0..action.servers() {
        for (pos, ty) in action.sequence(k, layers).iter().enumerate() {
            if ty.offset > 0 && mask.delivered[k][pos] {
                z[ty.class as usize - 1] += 1;
            }
        }
    }
    z
}

/// Per-class arrivals for the urgent generation; positions at or beyond
/// `timely[k]` on server `k` miss the deadline.
pub fn masked_urgent_arrivals(action: &RequestVector, mask: &LossMask, layers: usize, timely: &[u32]) -> Vec<u32> {
    let mut z = vec![0; layers];
    for k in 0..action.servers() {
        for (pos, ty) in action.sequence(k, layers).iter().enumerate() {
            if ty.offset == 0 && mask.delivered[k][pos] && (pos as u32) < timely[k] {
                z[ty.class as usize - 1] += 1;
            }
        }
    }
    z
}

/// Which pairs count as statistically equivalent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquivalenceRule {
    /// Same next-state law and exactly the same expected reward.
    #[default]
    SameReward,
    /// Same next-state law; each pair learns from its own expected reward.
    SameTransition,
}

/// Partition of all admissible pairs by next-state law and, under
/// [`EquivalenceRule::SameReward`], expected reward.
///
/// Both keys are exact identities from the tabulated model, so the
/// partition depends on the model only.
#[derive(Debug, Clone)]
pub struct EquivalenceClasses {
    class_of: Vec<Vec<u32>>,
    members: Vec<Vec<(usize, usize)>>,
    future_positions: Vec<Vec<(usize, usize, usize)>>,
    layers: usize,
}

impl EquivalenceClasses {
    pub fn build(mdp: &TabularMdp) -> Self {
        Self::with_rule(mdp, EquivalenceRule::SameReward)
    }

    pub fn with_rule(mdp: &TabularMdp, rule: EquivalenceRule) -> Self {
        let layers = mdp.states.beta().len();
        let mut ids: HashMap<(u32, u32), u32> = HashMap::new();
        let mut members: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut class_of = Vec::with_capacity(mdp.states.len());
        for s in 0..mdp.states.len() {
            let mut row = Vec::with_capacity(mdp.valid_actions(s).len());
            for (slot, &a) in mdp.valid_actions(s).iter().enumerate() {
                let reward = match rule {
                    EquivalenceRule::SameReward => mdp.reward_id(s, slot),
                    EquivalenceRule::SameTransition => 0,
                };
                let key = (mdp.transition_id(a), reward);
                let next = members.len() as u32;
                let id = *ids.entry(key).or_insert(next);
                if id == next {
                    members.push(Vec::new());
                }
                members[id as usize].push((s, slot));
                row.push(id);
            }
            class_of.push(row);
        }
        let future_positions = mdp
            .actions
            .actions()
            .iter()
            .map(|a| {
                let mut v = Vec::new();
                for k in 0..a.servers() {
                    for (pos, ty) in a.sequence(k, layers).iter().enumerate() {
                        if ty.offset > 0 {
                            v.push((k, pos, ty.class as usize - 1));
                        }
                    }
                }
                v
            })
            .collect();
        EquivalenceClasses {
            class_of,
            members,
            future_positions,
            layers,
        }
    }

    pub fn class_count(&self) -> usize {
        self.members.len()
    }

    pub fn class_of(&self, s: usize, slot: usize) -> u32 {
        self.class_of[s][slot]
    }

    pub fn members(&self, class: u32) -> &[(usize, usize)] {
        &self.members[class as usize]
    }

    fn future_under(&self, action: usize, mask: &LossMask) -> Vec<u32> {
        let mut z = vec![0; self.layers];
        for &(k, pos, c) in &self.future_positions[action] {
            if mask.delivered[k][pos] {
                z[c] += 1;
            }
        }
        z
    }

    /// Pairs equivalent to `(s, slot)` that, under the observed loss mask,
    /// would hand the next generation the same arrivals. Always contains
    /// `(s, slot)` itself.
    pub fn equivalent_pairs(&self, mdp: &TabularMdp, s: usize, slot: usize, mask: &LossMask) -> Vec<(usize, usize)> {
        let observed = self.future_under(mdp.valid_actions(s)[slot], mask);
        self.members(self.class_of(s, slot))
            .iter()
            .copied()
            .filter(|&(s2, slot2)| self.future_under(mdp.valid_actions(s2)[slot2], mask) == observed)
            .collect()
    }

    /// Reference implementation scanning every pair and comparing the
    /// tabulated laws and rewards directly.
    pub fn naive_equivalent_pairs(mdp: &TabularMdp, s: usize, slot: usize, mask: &LossMask) -> Vec<(usize, usize)> {
        let layers = mdp.states.beta().len();
        let a = mdp.valid_actions(s)[slot];
        let law = mdp.transition(mdp.transition_id(a));
        let reward = mdp.reward(s, slot);
        let observed = masked_future_arrivals(mdp.actions.action(a), mask, layers);
        let mut out = Vec::new();
        for s2 in 0..mdp.states.len() {
            for (slot2, &a2) in mdp.valid_actions(s2).iter().enumerate() {
                if mdp.reward(s2, slot2) == reward
                    && mdp.transition(mdp.transition_id(a2)) == law
                    && masked_future_arrivals(mdp.actions.action(a2), mask, layers) == observed
                {
                    out.push((s2, slot2));
                }
            }
        }
        out
    }
}
