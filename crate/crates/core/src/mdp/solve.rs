use num_traits::Float;

use crate::error::{Error, Result};
use crate::mdp::table::TabularMdp;

const MAX_SWEEPS: usize = 1_000_000;

/// Output of [`value_iteration`].
#[derive(Debug, Clone)]
pub struct ValueIteration<F> {
    pub values: Vec<F>,
    /// Greedy action index per state.
    pub policy: Vec<usize>,
    pub iterations: usize,
    /// Sup-norm of successive value differences, one per sweep.
    pub residuals: Vec<F>,
}

fn cast<F: Float>(x: f64) -> F {
    F::from(x).expect("f64 converts to any float")
}

fn expected_next<F: Float>(mdp: &TabularMdp, values: &[F]) -> Vec<F> {
    (0..mdp.distinct_transitions() as u32)
        .map(|t| {
            mdp.transition(t)
                .iter()
                .fold(F::zero(), |acc, &(s, p)| acc + cast::<F>(p) * values[s])
        })
        .collect()
}

/// Q-values of every valid pair under `values`, laid out like
/// [`TabularMdp::rewards`].
pub fn q_values<F: Float>(mdp: &TabularMdp, values: &[F], gamma: F) -> Vec<Vec<F>> {
    let ev = expected_next(mdp, values);
    (0..mdp.states.len())
        .map(|s| {
            mdp.valid_actions(s)
                .iter()
                .zip(mdp.rewards(s))
                .map(|(&a, &r)| cast::<F>(r) + gamma * ev[mdp.transition_id(a) as usize])
                .collect()
        })
        .collect()
}

/// First index of the maximum; NaN-free input assumed.
pub(crate) fn argmax<F: Float>(row: &[F]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Solves the Bellman optimality equation by successive approximation,
/// stopping once the sup-norm change drops below `threshold`. Ties in the
/// greedy policy go to the lowest action index.
pub fn value_iteration<F: Float>(mdp: &TabularMdp, gamma: F, threshold: F) -> Result<ValueIteration<F>> {
    if !(threshold > F::zero()) {
        return Err(Error::domain("threshold must be positive"));
    }
    if !(gamma >= F::zero() && gamma <= F::one()) {
        return Err(Error::domain("discount must lie in [0, 1]"));
    }
    for s in 0..mdp.states.len() {
        if mdp.rewards(s).iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite(format!("reward in state {s}")));
        }
        if mdp.valid_actions(s).is_empty() {
            return Err(Error::domain(format!("state {s} has no admissible action")));
        }
    }
    let mut values = vec![F::zero(); mdp.states.len()];
    let mut residuals = Vec::new();
    loop {
        let q = q_values(mdp, &values, gamma);
        let next: Vec<F> = q
            .iter()
            .map(|row| row.iter().fold(F::neg_infinity(), |m, &v| m.max(v)))
            .collect();
        let diff = next
            .iter()
            .zip(&values)
            .fold(F::zero(), |m, (&a, &b)| m.max((a - b).abs()));
        if !diff.is_finite() {
            return Err(Error::NonFinite("value iteration diverged".into()));
        }
        values = next;
        residuals.push(diff);
        if diff < threshold {
            break;
        }
        if residuals.len() >= MAX_SWEEPS {
            return Err(Error::domain("value iteration did not converge"));
        }
    }
    let q = q_values(mdp, &values, gamma);
    let policy = q
        .iter()
        .enumerate()
        .map(|(s, row)| mdp.valid_actions(s)[argmax(row)])
        .collect();
    Ok(ValueIteration {
        iterations: residuals.len(),
        values,
        policy,
        residuals,
    })
}

/// Exact expected reward at each of `generations` consecutive decision
/// epochs, starting from the empty state. `choose(s)` gives the action
/// distribution used in state `s` as `(action index, probability)`.
pub fn evaluate_policy(
    mdp: &TabularMdp,
    choose: impl Fn(usize) -> Vec<(usize, f64)>,
    generations: usize,
) -> Result<Vec<f64>> {
    let n = mdp.states.len();
    let choices: Vec<Vec<(usize, f64)>> = (0..n).map(&choose).collect();
    let mut dist = vec![0.0; n];
    dist[mdp.states.empty_index()] = 1.0;
    let mut out = Vec::with_capacity(generations);
    for _ in 0..generations {
        let mut gain = 0.0;
        let mut next = vec![0.0; n];
        for s in 0..n {
            if dist[s] == 0.0 {
                continue;
            }
            for &(a, pa) in &choices[s] {
                let slot = mdp
                    .slot_of(s, a)
                    .ok_or_else(|| Error::domain(format!("action {a} is not admissible in state {s}")))?;
                let w = dist[s] * pa;
                gain += w * mdp.reward(s, slot);
                for &(s2, p) in mdp.transition(mdp.transition_id(a)) {
                    next[s2] += w * p;
                }
            }
        }
        out.push(gain);
        dist = next;
    }
    Ok(out)
}
