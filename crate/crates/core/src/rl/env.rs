use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::mdp::{ScenarioModel, TabularMdp};
use crate::rl::equivalence::{masked_future_arrivals, masked_urgent_arrivals, LossMask};
use crate::rl::trainer::{Environment, RngState, Step};
use crate::subspace::{RankVector, SubspaceLaws};

/// Samples episodes from the rank-level model of the scenario: Bernoulli
/// losses per transmitted position, then the subspace laws for the ranks
/// of the next urgent generation.
#[derive(Debug, Clone)]
pub struct TrainingEnv {
    model: ScenarioModel,
    laws: SubspaceLaws,
    beta: Vec<u32>,
    budgets: Vec<u32>,
    losses: Vec<f64>,
    timely: Vec<u32>,
    cumulative_delta: Vec<f64>,
    next_cdf: HashMap<Vec<u32>, Vec<(RankVector, f64)>>,
    decode_cdf: HashMap<(RankVector, Vec<u32>), Vec<f64>>,
    rng: ChaCha8Rng,
    stream: u64,
}

impl TrainingEnv {
    pub const STREAM: u64 = 1;

    pub fn new(model: &ScenarioModel, seed: u64) -> Result<Self> {
        model.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(Self::STREAM);
        Ok(TrainingEnv {
            laws: model.laws(),
            beta: model.beta(),
            budgets: model.budgets(),
            losses: model.links.iter().map(|l| l.loss).collect(),
            timely: (0..model.links.len()).map(|k| model.timely_positions(k)).collect(),
            cumulative_delta: model.spec.cumulative_delta(),
            model: model.clone(),
            next_cdf: HashMap::new(),
            decode_cdf: HashMap::new(),
            rng,
            stream: Self::STREAM,
        })
    }

    pub fn model(&self) -> &ScenarioModel {
        &self.model
    }

    fn sample_next(&mut self, z: Vec<u32>) -> Result<RankVector> {
        if !self.next_cdf.contains_key(&z) {
            let empty = RankVector::empty(self.beta.len());
            let pmf = self.laws.rank_transition_pmf::<num_rational::BigRational>(&empty, &z, &self.beta)?;
            let mut acc = 0.0;
            let cdf = pmf
                .into_iter()
                .map(|(s, p)| {
                    acc += crate::scalar::ratio_to_f64(&p);
                    (s, acc)
                })
                .collect();
            self.next_cdf.insert(z.clone(), cdf);
        }
        let cdf = &self.next_cdf[&z];
        let u = self.rng.gen::<f64>() * cdf.last().map_or(1.0, |c| c.1);
        let i = cdf.partition_point(|c| c.1 <= u).min(cdf.len() - 1);
        Ok(cdf[i].0.clone())
    }

    fn sample_decoded(&mut self, state: &RankVector, z: Vec<u32>) -> Result<usize> {
        let key = (state.clone(), z);
        if !self.decode_cdf.contains_key(&key) {
            let pmf = self
                .laws
                .decode_layers_pmf::<num_rational::BigRational>(state, &key.1, &self.beta)?;
            let mut acc = 0.0;
            let cdf = pmf
                .iter()
                .map(|p| {
                    acc += crate::scalar::ratio_to_f64(p);
                    acc
                })
                .collect();
            self.decode_cdf.insert(key.clone(), cdf);
        }
        let cdf = &self.decode_cdf[&key];
        let u = self.rng.gen::<f64>() * cdf.last().copied().unwrap_or(1.0);
        Ok(cdf.partition_point(|&c| c <= u).min(cdf.len() - 1))
    }
}

impl Environment for TrainingEnv {
    fn step(&mut self, mdp: &TabularMdp, state: usize, slot: usize) -> Result<Step> {
        let layers = self.beta.len();
        let a = mdp.valid_actions(state)[slot];
        let action = mdp.actions.action(a).clone();
        let mask = LossMask::sample(&self.budgets, &self.losses, &mut self.rng);
        let urgent = masked_urgent_arrivals(&action, &mask, layers, &self.timely);
        let future = masked_future_arrivals(&action, &mask, layers);
        let current = mdp.states.state(state).clone();
        let decoded = self.sample_decoded(&current, urgent)?;
        let next = self.sample_next(future)?;
        Ok(Step {
            next: mdp.states.index_of(&next)?,
            expected_reward: mdp.reward(state, slot),
            realized_reward: self.cumulative_delta[decoded],
            mask,
        })
    }

    fn rng_state(&self) -> RngState {
        RngState::capture(&self.rng, self.stream)
    }

    fn restore_rng(&mut self, state: &RngState) -> Result<()> {
        self.rng = state.restore()?;
        self.stream = state.stream;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::model::fixtures::two_layer;
    use num_rational::BigRational;

    #[test]
    fn sampled_next_state_matches_model_law() {
        let m = two_layer(0.2);
        let t = TabularMdp::build::<BigRational>(&m).unwrap();
        let mut env = TrainingEnv::new(&m, 4).unwrap();
        let s = t.states.empty_index();
        // request (1,1) urgent and (2,1) future
        let a = t
            .valid_actions(s)
            .iter()
            .position(|&a| t.actions.action(a).counts[0] == vec![1, 1, 2, 1])
            .unwrap();
        let law = t.transition(t.transition_id(t.valid_actions(s)[a])).to_vec();
        let n = 100_000;
        let mut hits = vec![0usize; t.states.len()];
        for _ in 0..n {
            hits[env.step(&t, s, a).unwrap().next] += 1;
        }
        for (s2, p) in law {
            let se = (p * (1.0 - p) / n as f64).sqrt().max(1e-4);
            assert!((hits[s2] as f64 / n as f64 - p).abs() < 4.0 * se, "state {s2}");
        }
    }

    #[test]
    fn realized_reward_mean_matches_expected() {
        let m = two_layer(0.3);
        let t = TabularMdp::build::<BigRational>(&m).unwrap();
        let mut env = TrainingEnv::new(&m, 5).unwrap();
        let s = t.states.empty_index();
        let slot = 0;
        let n = 100_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let r = env.step(&t, s, slot).unwrap().realized_reward;
            sum += r;
            sq += r * r;
        }
        let mean = sum / n as f64;
        let sd = (sq / n as f64 - mean * mean).sqrt();
        assert!((mean - t.reward(s, slot)).abs() < 3.0 * sd / (n as f64).sqrt());
    }

    #[test]
    fn rng_state_round_trip() {
        let m = two_layer(0.1);
        let t = TabularMdp::build::<f64>(&m).unwrap();
        let mut env = TrainingEnv::new(&m, 6).unwrap();
        for _ in 0..17 {
            env.step(&t, 0, 0).unwrap();
        }
        let saved = env.rng_state();
        let a: Vec<usize> = (0..20).map(|_| env.step(&t, 0, 0).unwrap().next).collect();
        env.restore_rng(&saved).unwrap();
        let b: Vec<usize> = (0..20).map(|_| env.step(&t, 0, 0).unwrap().next).collect();
        assert_eq!(a, b);
    }
}
