use std::collections::{BTreeMap, HashMap};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::One;

use crate::error::Result;
use crate::mdp::model::ScenarioModel;
use crate::mdp::spaces::RequestVector;
use crate::scalar::{decimal_to_ratio, Probability};
use crate::subspace::{RankVector, SubspaceLaws};

fn binomial_coefficient(n: u32, k: u32) -> BigUint {
    (1..=k).fold(BigUint::one(), |acc, i| acc * (n - k + i) / i)
}

/// Exact per-packet loss law of every link.
#[derive(Debug, Clone)]
pub struct ArrivalLaw<P> {
    survive: Vec<P>,
    lose: Vec<P>,
    timely: Vec<u32>,
    layers: usize,
}

impl<P: Probability> ArrivalLaw<P> {
    pub fn new(model: &ScenarioModel) -> Self {
        let loss: Vec<BigRational> = model.links.iter().map(|l| l.loss_ratio()).collect();
        ArrivalLaw {
            survive: loss.iter().map(|e| P::from_rational(&(BigRational::one() - e))).collect(),
            lose: loss.iter().map(P::from_rational).collect(),
            timely: (0..model.links.len()).map(|k| model.timely_positions(k)).collect(),
            layers: model.layers(),
        }
    }

    /// `Pr(k of n packets on server `server` arrive)`.
    pub fn binomial(&self, server: usize, n: u32, k: u32) -> P {
        let mut p = P::from_ratio(&binomial_coefficient(n, k), &BigUint::one());
        for _ in 0..k {
            p = p * self.survive[server].clone();
        }
        for _ in 0..n - k {
            p = p * self.lose[server].clone();
        }
        p
    }

    /// Urgent requests of server `k` that can arrive before the deadline.
    /// Late positions of the canonical sequence are cut, highest class first.
    pub fn timely_urgent(&self, a: &RequestVector, k: usize) -> Vec<u32> {
        let mut room = self.timely[k];
        a.urgent(k, self.layers)
            .iter()
            .map(|&v| {
                let take = v.min(room);
                room -= take;
                take
            })
            .collect()
    }

    /// Law of per-class arrival totals, summed over servers, when server `k`
    /// sends `per_server[k][c]` packets of class `c + 1`.
    pub fn aggregate(&self, per_server: &[Vec<u32>]) -> Vec<(Vec<u32>, P)> {
        let mut acc: BTreeMap<Vec<u32>, P> = BTreeMap::new();
        acc.insert(vec![0; self.layers], P::one());
        for (k, counts) in per_server.iter().enumerate() {
            for (c, &n) in counts.iter().enumerate() {
                if n == 0 {
                    continue;
                }
                let mut next: BTreeMap<Vec<u32>, P> = BTreeMap::new();
                for (z, pz) in &acc {
                    for got in 0..=n {
                        let mut z2 = z.clone();
                        z2[c] += got;
                        let w = pz.clone() * self.binomial(k, n, got);
                        let slot = next.entry(z2).or_insert_with(P::zero);
                        *slot = slot.clone() + w;
                    }
                }
                acc = next;
            }
        }
        acc.into_iter().collect()
    }
}

/// Law of the arrived counts per server and packet type. Urgent packets that
/// would arrive after the deadline count as lost.
pub fn arrival_pmf<P: Probability>(action: &RequestVector, model: &ScenarioModel) -> Vec<(Vec<Vec<u32>>, P)> {
    let law = ArrivalLaw::<P>::new(model);
    let layers = model.layers();
    let mut acc: Vec<(Vec<Vec<u32>>, P)> = vec![(Vec::new(), P::one())];
    for k in 0..action.servers() {
        let mut effective = action.counts[k].clone();
        effective[..layers].copy_from_slice(&law.timely_urgent(action, k));
        let mut per: Vec<(Vec<u32>, P)> = vec![(Vec::new(), P::one())];
        for &n in &effective {
            let mut next = Vec::new();
            for (v, p) in &per {
                for got in 0..=n {
                    let mut v2 = v.clone();
                    v2.push(got);
                    next.push((v2, p.clone() * law.binomial(k, n, got)));
                }
            }
            per = next;
        }
        let mut next = Vec::new();
        for (outer, po) in &acc {
            for (v, pv) in &per {
                let mut o = outer.clone();
                o.push(v.clone());
                next.push((o, po.clone() * pv.clone()));
            }
        }
        acc = next;
    }
    acc
}

/// Memoizing evaluator of expected rewards and next-state laws.
#[derive(Debug)]
pub struct RewardModel<P: Probability> {
    laws: SubspaceLaws,
    beta: Vec<u32>,
    layers: usize,
    cumulative: Vec<P>,
    arrivals: ArrivalLaw<P>,
    gains: HashMap<(RankVector, Vec<u32>), P>,
    aggregates: HashMap<Vec<Vec<u32>>, Vec<(Vec<u32>, P)>>,
}

impl<P: Probability> RewardModel<P> {
    pub fn new(model: &ScenarioModel) -> Self {
        let mut cumulative = vec![P::zero()];
        let mut acc = BigRational::from_integer(0.into());
        for &d in &model.spec.delta {
            acc += decimal_to_ratio(d);
            cumulative.push(P::from_rational(&acc));
        }
        RewardModel {
            laws: model.laws(),
            beta: model.beta(),
            layers: model.layers(),
            cumulative,
            arrivals: ArrivalLaw::new(model),
            gains: HashMap::new(),
            aggregates: HashMap::new(),
        }
    }

    /// Cumulative distortion reduction of the first `l` layers.
    pub fn cumulative_delta(&self, l: usize) -> P {
        self.cumulative[l].clone()
    }

    fn aggregate(&mut self, per_server: Vec<Vec<u32>>) -> Vec<(Vec<u32>, P)> {
        if let Some(v) = self.aggregates.get(&per_server) {
            return v.clone();
        }
        let v = self.arrivals.aggregate(&per_server);
        self.aggregates.insert(per_server, v.clone());
        v
    }

    /// Expected distortion reduction of the urgent generation given the
    /// arrived per-class counts.
    pub fn gain(&mut self, state: &RankVector, arrivals: &[u32]) -> Result<P> {
        let key = (state.clone(), arrivals.to_vec());
        if let Some(g) = self.gains.get(&key) {
            return Ok(g.clone());
        }
        let pmf = self.laws.decode_layers_pmf::<P>(state, arrivals, &self.beta)?;
        let g = pmf
            .iter()
            .zip(&self.cumulative)
            .fold(P::zero(), |acc, (p, d)| acc + p.clone() * d.clone());
        self.gains.insert(key, g.clone());
        Ok(g)
    }

    /// Expected reward of an action: the expected distortion reduction of
    /// the urgent generation at its deadline.
    pub fn reward(&mut self, state: &RankVector, action: &RequestVector) -> Result<P> {
        state.validate(&self.beta)?;
        if state.decodable_layers(&self.beta) == self.layers {
            return Ok(self.cumulative[self.layers].clone());
        }
        let urgent: Vec<Vec<u32>> = (0..action.servers())
            .map(|k| self.arrivals.timely_urgent(action, k))
            .collect();
        let mut total = P::zero();
        for (z, pz) in self.aggregate(urgent) {
            total = total + pz * self.gain(state, &z)?;
        }
        Ok(total)
    }

    /// Law of the next state. The next urgent generation starts empty and
    /// only receives the packets requested for it in this interval.
    pub fn next_state_pmf(&mut self, action: &RequestVector) -> Result<Vec<(RankVector, P)>> {
        let empty = RankVector::empty(self.layers);
        let future: Vec<Vec<u32>> = action
            .future(self.layers)
            .into_iter()
            .map(|c| {
                let mut c = c;
                c.resize(self.layers, 0);
                c
            })
            .collect();
        let mut acc: BTreeMap<RankVector, P> = BTreeMap::new();
        for (z, pz) in self.aggregate(future) {
            for (s, ps) in self.laws.rank_transition_pmf::<P>(&empty, &z, &self.beta)? {
                let slot = acc.entry(s).or_insert_with(P::zero);
                *slot = slot.clone() + pz.clone() * ps;
            }
        }
        Ok(acc.into_iter().filter(|(_, p)| !p.is_zero()).collect())
    }
}

/// Expected reward `J(state, action)`.
pub fn expected_reward<P: Probability>(state: &RankVector, action: &RequestVector, model: &ScenarioModel) -> Result<P> {
    RewardModel::<P>::new(model).reward(state, action)
}

/// Law of the next state given the current state and action. In the rolling
/// scenario it does not depend on the current state, which is only checked.
pub fn transition_pmf<P: Probability>(
    state: &RankVector,
    action: &RequestVector,
    model: &ScenarioModel,
) -> Result<Vec<(RankVector, P)>> {
    state.validate(&model.beta())?;
    RewardModel::<P>::new(model).next_state_pmf(action)
}
