use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mdp::laws::RewardModel;
use crate::mdp::model::ScenarioModel;
use crate::mdp::spaces::{ActionSpace, StateSpace};
use crate::scalar::Probability;

/// A `(state, action)` pair addressed by state index and position in that
/// state's valid-action list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActionChoice {
    pub state: usize,
    pub slot: usize,
}

/// Fully tabulated rolling MDP.
///
/// Rewards and transitions are computed with the probability scalar chosen
/// at build time; equality of rewards and transition laws is decided on
/// that scalar's exact key, so pairs with identical dynamics share ids.
#[derive(Debug, Clone)]
pub struct TabularMdp {
    pub states: StateSpace,
    pub actions: ActionSpace,
    valid: Vec<Vec<usize>>,
    rewards: Vec<Vec<f64>>,
    reward_ids: Vec<Vec<u32>>,
    reward_values: Vec<f64>,
    action_transition: Vec<u32>,
    transitions: Vec<Vec<(usize, f64)>>,
    fingerprint: String,
    reward_bound: f64,
}

impl TabularMdp {
    pub fn build<P: Probability>(model: &ScenarioModel) -> Result<Self> {
        model.validate()?;
        let beta = model.beta();
        let states = StateSpace::enumerate(&beta);
        let actions = ActionSpace::enumerate(model);
        let mut rm = RewardModel::<P>::new(model);
        let layers = model.layers();

        let mut transition_keys: HashMap<Vec<(usize, P::Key)>, u32> = HashMap::new();
        let mut by_future: HashMap<Vec<Vec<u32>>, u32> = HashMap::new();
        let mut transitions = Vec::new();
        let mut action_transition = Vec::with_capacity(actions.len());
        for a in actions.actions() {
            let future = a.future(layers);
            if let Some(&id) = by_future.get(&future) {
                action_transition.push(id);
                continue;
            }
            let pmf = rm.next_state_pmf(a)?;
            let mut sparse = Vec::with_capacity(pmf.len());
            let mut key = Vec::with_capacity(pmf.len());
            for (s, p) in pmf {
                let i = states.index_of(&s)?;
                key.push((i, p.key()));
                sparse.push((i, p.to_f64()));
            }
            let next_id = transitions.len() as u32;
            let id = *transition_keys.entry(key).or_insert(next_id);
            if id == next_id {
                transitions.push(sparse);
            }
            by_future.insert(future, id);
            action_transition.push(id);
        }

        let mut reward_keys: HashMap<P::Key, u32> = HashMap::new();
        let mut reward_values = Vec::new();
        let mut valid = Vec::with_capacity(states.len());
        let mut rewards = Vec::with_capacity(states.len());
        let mut reward_ids = Vec::with_capacity(states.len());
        let mut by_urgent: HashMap<(usize, Vec<Vec<u32>>), u32> = HashMap::new();
        for (si, s) in states.states().iter().enumerate() {
            let va = actions.valid_for(s, &beta);
            let mut rs = Vec::with_capacity(va.len());
            let mut ids = Vec::with_capacity(va.len());
            for &ai in &va {
                let a = actions.action(ai);
                let urgent: Vec<Vec<u32>> = (0..a.servers()).map(|k| a.urgent(k, layers).to_vec()).collect();
                let id = match by_urgent.get(&(si, urgent.clone())) {
                    Some(&id) => id,
                    None => {
                        let r = rm.reward(s, a)?;
                        let v = r.to_f64();
                        if !v.is_finite() {
                            return Err(Error::NonFinite(format!("reward of {s:?} under {a}")));
                        }
                        let next_id = reward_values.len() as u32;
                        let id = *reward_keys.entry(r.key()).or_insert(next_id);
                        if id == next_id {
                            reward_values.push(v);
                        }
                        by_urgent.insert((si, urgent), id);
                        id
                    }
                };
                ids.push(id);
                rs.push(reward_values[id as usize]);
            }
            valid.push(va);
            rewards.push(rs);
            reward_ids.push(ids);
        }
        Ok(TabularMdp {
            states,
            actions,
            valid,
            rewards,
            reward_ids,
            reward_values,
            action_transition,
            transitions,
            fingerprint: model.fingerprint(),
            reward_bound: model.spec.cumulative_delta()[layers],
        })
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Largest achievable per-step reward.
    pub fn reward_bound(&self) -> f64 {
        self.reward_bound
    }

    pub fn valid_actions(&self, s: usize) -> &[usize] {
        &self.valid[s]
    }

    /// Position of action `a` in the valid list of state `s`.
    pub fn slot_of(&self, s: usize, a: usize) -> Option<usize> {
        self.valid[s].binary_search(&a).ok()
    }

    pub fn rewards(&self, s: usize) -> &[f64] {
        &self.rewards[s]
    }

    pub fn reward(&self, s: usize, slot: usize) -> f64 {
        self.rewards[s][slot]
    }

    /// Identity of the exact reward value of a pair.
    pub fn reward_id(&self, s: usize, slot: usize) -> u32 {
        self.reward_ids[s][slot]
    }

    pub fn reward_value(&self, id: u32) -> f64 {
        self.reward_values[id as usize]
    }

    pub fn distinct_rewards(&self) -> usize {
        self.reward_values.len()
    }

    /// Identity of the exact next-state law of an action.
    pub fn transition_id(&self, a: usize) -> u32 {
        self.action_transition[a]
    }

    pub fn transition(&self, id: u32) -> &[(usize, f64)] {
        &self.transitions[id as usize]
    }

    pub fn distinct_transitions(&self) -> usize {
        self.transitions.len()
    }

    pub fn pair_count(&self) -> usize {
        self.valid.iter().map(Vec::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::model::fixtures::two_layer;
    use num_rational::BigRational;

    #[test]
    fn two_layer_table_shape() {
        let m = two_layer(0.05);
        let t = TabularMdp::build::<BigRational>(&m).unwrap();
        assert_eq!(t.states.len(), 18);
        assert_eq!(t.actions.len(), 56);
        for tid in 0..t.distinct_transitions() as u32 {
            let total: f64 = t.transition(tid).iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        let full = t.states.index_of(&crate::RankVector(vec![3, 5])).unwrap();
        assert!(t.rewards(full).iter().all(|&r| r == 20.0));
        let f = TabularMdp::build::<f64>(&m).unwrap();
        for s in 0..18 {
            for (a, b) in t.rewards(s).iter().zip(f.rewards(s)) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
