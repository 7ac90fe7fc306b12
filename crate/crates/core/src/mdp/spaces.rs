use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::model::ScenarioModel;
use crate::subspace::RankVector;

/// All rank vectors of the urgent generation.
#[derive(Debug, Clone)]
pub struct StateSpace {
    beta: Vec<u32>,
    states: Vec<RankVector>,
    index: HashMap<RankVector, usize>,
}

impl StateSpace {
    /// Enumerates `0 <= r_1 <= ... <= r_L` with `r_l <= beta_l`, in
    /// lexicographic order of the ranks.
    pub fn enumerate(beta: &[u32]) -> Self {
        fn rec(beta: &[u32], prefix: &mut Vec<u32>, out: &mut Vec<RankVector>) {
            let l = prefix.len();
            if l == beta.len() {
                out.push(RankVector(prefix.clone()));
                return;
            }
            let lo = prefix.last().copied().unwrap_or(0);
            for r in lo..=beta[l] {
                prefix.push(r);
                rec(beta, prefix, out);
                prefix.pop();
            }
        }
        let mut states = Vec::new();
        rec(beta, &mut Vec::new(), &mut states);
        let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        StateSpace {
            beta: beta.to_vec(),
            states,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn beta(&self) -> &[u32] {
        &self.beta
    }

    pub fn state(&self, i: usize) -> &RankVector {
        &self.states[i]
    }

    pub fn states(&self) -> &[RankVector] {
        &self.states
    }

    pub fn index_of(&self, s: &RankVector) -> Result<usize> {
        self.index
            .get(s)
            .copied()
            .ok_or_else(|| Error::UnknownState(s.0.clone()))
    }

    pub fn empty_index(&self) -> usize {
        self.index[&RankVector::empty(self.beta.len())]
    }
}

/// A requestable packet type at a decision epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PacketType {
    /// Generation offset from the urgent one.
    pub offset: usize,
    /// Class, 1-based.
    pub class: u32,
}

/// Per-server counts of requested packets by type. Type `t` of a server is
/// generation offset `t / L`, class `t % L + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RequestVector {
    pub counts: Vec<Vec<u32>>,
}

impl RequestVector {
    pub fn servers(&self) -> usize {
        self.counts.len()
    }

    /// Requests for generation `offset` from server `k`.
    pub fn generation(&self, k: usize, offset: usize, layers: usize) -> &[u32] {
        let c = &self.counts[k];
        let start = (offset * layers).min(c.len());
        let end = ((offset + 1) * layers).min(c.len());
        &c[start..end]
    }

    pub fn urgent(&self, k: usize, layers: usize) -> &[u32] {
        self.generation(k, 0, layers)
    }

    /// Per-server requests for generations after the urgent one.
    pub fn future(&self, layers: usize) -> Vec<Vec<u32>> {
        self.counts
            .iter()
            .map(|c| c[layers.min(c.len())..].to_vec())
            .collect()
    }

    /// Packets of server `k` in transmission order: urgent generation first,
    /// ascending class within each generation.
    pub fn sequence(&self, k: usize, layers: usize) -> Vec<PacketType> {
        let mut out = Vec::new();
        for (t, &n) in self.counts[k].iter().enumerate() {
            let ty = PacketType {
                offset: t / layers,
                class: (t % layers) as u32 + 1,
            };
            out.extend(std::iter::repeat(ty).take(n as usize));
        }
        out
    }

    pub fn total(&self, k: usize) -> u32 {
        self.counts[k].iter().sum()
    }
}

impl fmt::Display for RequestVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, c) in self.counts.iter().enumerate() {
            if k > 0 {
                write!(f, "|")?;
            }
            let parts: Vec<String> = c.iter().map(u32::to_string).collect();
            write!(f, "({})", parts.join(","))?;
        }
        Ok(())
    }
}

/// Ways to place `n` identical packets into `m` typed slots, in descending
/// lexicographic order (the first slot gets as many as possible first).
pub fn compositions(n: u32, m: usize) -> Vec<Vec<u32>> {
    fn rec(n: u32, m: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == m {
            prefix.push(n);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=n).rev() {
            prefix.push(first);
            rec(n - first, m, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if m == 0 {
        if n == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(n, m, &mut Vec::new(), &mut out);
    out
}

/// Every request vector that uses each server's budget exactly.
#[derive(Debug, Clone)]
pub struct ActionSpace {
    layers: usize,
    actions: Vec<RequestVector>,
    index: HashMap<RequestVector, usize>,
}

impl ActionSpace {
    /// Cartesian product of per-server compositions, first server major.
    pub fn enumerate(model: &ScenarioModel) -> Self {
        let m = model.types_per_server();
        let per_server: Vec<Vec<Vec<u32>>> = model.budgets().iter().map(|&n| compositions(n, m)).collect();
        let mut actions = vec![RequestVector { counts: Vec::new() }];
        for options in &per_server {
            let mut next = Vec::with_capacity(actions.len() * options.len());
            for a in &actions {
                for o in options {
                    let mut counts = a.counts.clone();
                    counts.push(o.clone());
                    next.push(RequestVector { counts });
                }
            }
            actions = next;
        }
        let index = actions.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        ActionSpace {
            layers: model.layers(),
            actions,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn action(&self, i: usize) -> &RequestVector {
        &self.actions[i]
    }

    pub fn actions(&self) -> &[RequestVector] {
        &self.actions
    }

    pub fn index_of(&self, a: &RequestVector) -> Option<usize> {
        self.index.get(a).copied()
    }

    /// An action is admissible in a state unless it requests a class of the
    /// urgent generation that is already decodable.
    pub fn is_valid(&self, a: &RequestVector, state: &RankVector, beta: &[u32]) -> bool {
        let decoded = state.decodable_layers(beta);
        (0..a.servers()).all(|k| a.urgent(k, self.layers)[..decoded].iter().all(|&v| v == 0))
    }

    /// Indices of admissible actions, ascending.
    pub fn valid_for(&self, state: &RankVector, beta: &[u32]) -> Vec<usize> {
        (0..self.actions.len())
            .filter(|&i| self.is_valid(&self.actions[i], state, beta))
            .collect()
    }
}
