use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

/// Q-values and visit counts for every admissible pair, row `s` aligned
/// with [`TabularMdp::valid_actions`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub values: Vec<Vec<f64>>,
    pub visits: Vec<Vec<u64>>,
}

impl QTable {
    pub fn zeros(mdp: &TabularMdp) -> Self {
        let values = (0..mdp.states.len())
            .map(|s| vec![0.0; mdp.valid_actions(s).len()])
            .collect::<Vec<_>>();
        let visits = values.iter().map(|r| vec![0; r.len()]).collect();
        QTable { values, visits }
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s]
    }

    pub fn max(&self, s: usize) -> f64 {
        self.values[s].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy slot per state, ties to the lowest slot.
    pub fn greedy_slots(&self) -> Vec<usize> {
        self.values.iter().map(|r| crate::mdp::argmax(r)).collect()
    }

    /// Greedy action index per state.
    pub fn greedy_policy(&self, mdp: &TabularMdp) -> Vec<usize> {
        self.greedy_slots()
            .iter()
            .enumerate()
            .map(|(s, &slot)| mdp.valid_actions(s)[slot])
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}

/// Boltzmann temperature decaying geometrically towards a floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSchedule {
    pub max: f64,
    pub min: f64,
    pub phi: f64,
}

impl TemperatureSchedule {
    pub fn new(max: f64, min: f64, phi: f64) -> Result<Self> {
        if !(min > 0.0 && max >= min) {
            return Err(Error::domain("temperatures must satisfy 0 < min <= max"));
        }
        if !(phi > 0.0 && phi <= 1.0) {
            return Err(Error::domain("decay must lie in (0, 1]"));
        }
        Ok(TemperatureSchedule { max, min, phi })
    }

    /// One decay step from `prev`.
    pub fn next(&self, prev: f64) -> f64 {
        self.min + self.phi * (prev - self.min)
    }

    /// Temperature after `n` steps from the maximum.
    pub fn at(&self, n: u64) -> f64 {
        self.min + self.phi.powf(n as f64) * (self.max - self.min)
    }
}

/// Softmax probabilities of a row at temperature `theta`.
pub fn boltzmann_probabilities(row: &[f64], theta: f64) -> Result<Vec<f64>> {
    if !(theta > 0.0) {
        return Err(Error::domain("temperature must be positive"));
    }
    if row.is_empty() {
        return Err(Error::domain("no actions to choose from"));
    }
    if row.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Q-value".into()));
    }
    let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = row.iter().map(|&v| ((v - top) / theta).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

/// Draws an index with probability proportional to `exp(row[i] / theta)`.
pub fn boltzmann_select<R: Rng + ?Sized>(row: &[f64], theta: f64, rng: &mut R) -> Result<usize> {
    if !(theta > 0.0) {
        return Err(Error::domain("temperature must be positive"));
    }
    if row.is_empty() {
        return Err(Error::domain("no actions to choose from"));
    }
    let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::NonFinite("Q-value".into()));
    }
    let weight = |v: f64| ((v - top) / theta).exp();
    let total: f64 = row.iter().map(|&v| weight(v)).sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, &v) in row.iter().enumerate() {
        u -= weight(v);
        if u < 0.0 {
            return Ok(i);
        }
    }
    Ok(row.len() - 1)
}

/// One temporal-difference update: bumps the visit count, then moves
/// `Q(s, slot)` towards `reward + gamma * max Q(next, .)` with rate
/// `1 / (1 + visits)`.
pub fn q_update(table: &mut QTable, s: usize, slot: usize, reward: f64, next: usize, gamma: f64) {
    let target = reward + gamma * table.max(next);
    table.visits[s][slot] += 1;
    let lambda = 1.0 / (1.0 + table.visits[s][slot] as f64);
    let q = &mut table.values[s][slot];
    *q = (1.0 - lambda) * *q + lambda * target;
}

/// Decay factor for a run of `episodes` steps, interpolated from known
/// `(episodes, phi)` anchors linearly in `ln(-ln phi)` against
/// `ln(episodes)`. A single anchor keeps `episodes * ln phi` fixed.
pub fn interpolate_phi(anchors: &[(u64, f64)], episodes: u64) -> Result<f64> {
    if anchors.is_empty() {
        return Err(Error::domain("no decay anchors"));
    }
    if anchors.iter().any(|&(n, p)| n == 0 || !(p > 0.0 && p < 1.0)) {
        return Err(Error::domain("anchors need positive episode counts and decay in (0, 1)"));
    }
    let mut pts: Vec<(f64, f64)> = anchors
        .iter()
        .map(|&(n, p)| ((n as f64).ln(), (-p.ln()).ln()))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| a.0 == b.0);
    if let Some(&(_, y)) = pts.iter().find(|p| p.0 == (episodes as f64).ln()) {
        return Ok((-y.exp()).exp());
    }
    let x = (episodes.max(1) as f64).ln();
    let y = if pts.len() == 1 {
        pts[0].1 - (x - pts[0].0)
    } else {
        let i = pts.partition_point(|p| p.0 < x).clamp(1, pts.len() - 1);
        let (a, b) = (pts[i - 1], pts[i]);
        a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
    };
    Ok((-y.exp()).exp())
}
