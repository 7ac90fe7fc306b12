//! Dimension laws for spans and unions of random subspaces over GF(q),
//! and the rank-vector transition chain built on top of them.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Mutex, OnceLock};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Probability;

/// How packet innovation probabilities are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbabilityMode {
    /// Exact finite-field laws for the configured q.
    #[default]
    Exact,
    /// Every packet is innovative while there is room (the q -> infinity limit).
    InfiniteQ,
}

fn big_pow(q: u64, e: u64) -> BigUint {
    num_traits::pow(BigUint::from(q), e as usize)
}

type Memo = Mutex<HashMap<(u64, u32, u32), BigUint>>;

fn binom_memo() -> &'static Memo {
    static MEMO: OnceLock<Memo> = OnceLock::new();
    MEMO.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Number of `b`-dimensional subspaces of an `a`-dimensional space over GF(q).
pub fn gaussian_binomial(a: u32, b: u32, q: u64) -> BigUint {
    if b > a {
        return BigUint::zero();
    }
    let b = b.min(a - b);
    if b == 0 {
        return BigUint::one();
    }
    if let Some(v) = binom_memo().lock().unwrap().get(&(q, a, b)) {
        return v.clone();
    }
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    for i in 0..b {
        num *= big_pow(q, (a - i) as u64) - 1u32;
        den *= big_pow(q, (i + 1) as u64) - 1u32;
    }
    let v = num / den;
    binom_memo().lock().unwrap().insert((q, a, b), v.clone());
    v
}

/// A probability mass function over subspace dimensions `0..=ambient`.
#[derive(Debug, Clone, PartialEq)]
pub struct DimPmf<P> {
    masses: Vec<P>,
}

impl<P: Probability> DimPmf<P> {
    pub fn point(dim: u32, ambient: u32) -> Self {
        let mut masses = vec![P::zero(); ambient as usize + 1];
        masses[dim as usize] = P::one();
        DimPmf { masses }
    }

    pub fn from_masses(masses: Vec<P>) -> Self {
        DimPmf { masses }
    }

    pub fn ambient(&self) -> u32 {
        self.masses.len() as u32 - 1
    }

    pub fn mass(&self, dim: u32) -> P {
        self.masses
            .get(dim as usize)
            .cloned()
            .unwrap_or_else(P::zero)
    }

    pub fn masses(&self) -> &[P] {
        &self.masses
    }

    /// Dimensions with nonzero mass, paired with their mass.
    pub fn support(&self) -> impl Iterator<Item = (u32, &P)> {
        self.masses
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_zero())
            .map(|(d, p)| (d as u32, p))
    }

    pub fn total(&self) -> P {
        self.masses.iter().cloned().fold(P::zero(), |a, b| a + b)
    }

    /// Re-expresses the pmf in a larger ambient dimension.
    pub fn padded(mut self, ambient: u32) -> Self {
        if ambient as usize + 1 > self.masses.len() {
            self.masses.resize(ambient as usize + 1, P::zero());
        }
        self
    }
}

type RatioMemo = Mutex<HashMap<(u8, u64, u32, u32, u32), Vec<BigRational>>>;

fn ratio_memo() -> &'static RatioMemo {
    static MEMO: OnceLock<RatioMemo> = OnceLock::new();
    MEMO.get_or_init(|| Mutex::new(HashMap::new()))
}

fn memoized(key: (u8, u64, u32, u32, u32), f: impl FnOnce() -> Vec<BigRational>) -> Vec<BigRational> {
    if let Some(v) = ratio_memo().lock().unwrap().get(&key) {
        return v.clone();
    }
    let v = f();
    ratio_memo().lock().unwrap().insert(key, v.clone());
    v
}

fn ratio(n: BigInt, d: BigUint) -> BigRational {
    BigRational::new(n, BigInt::from(d))
}

/// Exact masses of the dimension spanned by `n` uniform draws from a
/// `k`-dimensional space, via the inclusion-exclusion closed form.
fn span_masses_exact(n: u32, k: u32, q: u64) -> Vec<BigRational> {
    memoized((0, q, n, k, 0), || {
        let denom = big_pow(q, n as u64 * k as u64);
        (0..=k)
            .map(|r| {
                if r > n {
                    return BigRational::zero();
                }
                let mut sum = BigInt::zero();
                for i in 0..=r {
                    let j = (r - i) as u64;
                    let e = n as u64 * i as u64 + j * j.saturating_sub(1) / 2;
                    let term = BigInt::from(gaussian_binomial(r, i, q) * big_pow(q, e));
                    if (r - i) % 2 == 0 {
                        sum += term;
                    } else {
                        sum -= term;
                    }
                }
                let numer = BigInt::from(gaussian_binomial(k, r, q)) * sum;
                ratio(numer, denom.clone())
            })
            .collect()
    })
}

fn union_masses_exact(y: u32, m: u32, k: u32, q: u64) -> Vec<BigRational> {
    memoized((1, q, y, m, k), || {
        let denom = gaussian_binomial(k, m, q);
        (0..=k)
            .map(|s| {
                if s < y.max(m) || s > k.min(y + m) {
                    return BigRational::zero();
                }
                let e = (s - y) as u64 * (s - m) as u64;
                let numer = big_pow(q, e)
                    * gaussian_binomial(k - y, s - y, q)
                    * gaussian_binomial(y, y + m - s, q);
                ratio(BigInt::from(numer), denom.clone())
            })
            .collect()
    })
}

/// Probability laws for random subspaces over GF(q).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubspaceLaws {
    pub q: u64,
    pub mode: ProbabilityMode,
}

impl SubspaceLaws {
    pub fn new(q: u64, mode: ProbabilityMode) -> Self {
        SubspaceLaws { q, mode }
    }

    pub fn exact(q: u64) -> Self {
        Self::new(q, ProbabilityMode::Exact)
    }

    /// Law of the dimension spanned by `n` i.i.d. uniform vectors drawn
    /// from a `k`-dimensional space.
    pub fn span_dim_pmf<P: Probability>(&self, n: u32, k: u32) -> DimPmf<P> {
        match self.mode {
            ProbabilityMode::InfiniteQ => DimPmf::point(n.min(k), k),
            ProbabilityMode::Exact => DimPmf::from_masses(
                span_masses_exact(n, k, self.q)
                    .iter()
                    .map(P::from_rational)
                    .collect(),
            ),
        }
    }

    /// Law of `dim(U + W)` for a fixed `y`-dimensional `U` and a uniformly
    /// random `m`-dimensional `W` inside a `k`-dimensional space.
    pub fn union_dim_step<P: Probability>(&self, y: u32, m: u32, k: u32) -> Result<DimPmf<P>> {
        if y > k || m > k {
            return Err(Error::domain(format!(
                "subspace dimensions ({y}, {m}) exceed ambient dimension {k}"
            )));
        }
        Ok(match self.mode {
            ProbabilityMode::InfiniteQ => DimPmf::point(k.min(y + m), k),
            ProbabilityMode::Exact => DimPmf::from_masses(
                union_masses_exact(y, m, k, self.q)
                    .iter()
                    .map(P::from_rational)
                    .collect(),
            ),
        })
    }

    /// Law of the dimension reached after adding `n` uniform draws from a
    /// `k`-dimensional space to a fixed `t`-dimensional subspace of it.
    pub fn extend_by_draws<P: Probability>(&self, t: u32, n: u32, k: u32) -> Result<DimPmf<P>> {
        if n == 0 || t == k {
            return Ok(DimPmf::point(t, k));
        }
        let span = self.span_dim_pmf::<P>(n, k);
        let mut out = vec![P::zero(); k as usize + 1];
        for (d, pd) in span.support() {
            let step = self.union_dim_step::<P>(t, d, k)?;
            for (s, ps) in step.support() {
                out[s as usize] = out[s as usize].clone() + pd.clone() * ps.clone();
            }
        }
        Ok(DimPmf::from_masses(out))
    }

    /// Law of `dim(S_1 + ... + S_R)` where `S_i` is spanned by `N_i` uniform
    /// draws from an independent uniformly random `m_i`-dimensional subspace
    /// of a `k`-dimensional space.
    pub fn union_dim_pmf_many<P: Probability>(&self, draws: &[(u32, u32)], k: u32) -> Result<DimPmf<P>> {
        let mut acc = DimPmf::<P>::point(0, k);
        for &(n, m) in draws {
            if m > k {
                return Err(Error::domain(format!(
                    "subspace dimension {m} exceeds ambient dimension {k}"
                )));
            }
            let span = self.span_dim_pmf::<P>(n, m);
            let mut next = vec![P::zero(); k as usize + 1];
            for (y, py) in acc.support() {
                for (d, pd) in span.support() {
                    let step = self.union_dim_step::<P>(y, d, k)?;
                    let w = py.clone() * pd.clone();
                    for (s, ps) in step.support() {
                        next[s as usize] = next[s as usize].clone() + w.clone() * ps.clone();
                    }
                }
            }
            acc = DimPmf::from_masses(next);
        }
        Ok(acc)
    }

    /// Joint law of the next rank vector after `arrivals[l]` fresh class-`l`
    /// packets reach a buffer with ranks `buffer`.
    ///
    /// Classes are processed in ascending order. At level `l` the prior
    /// cumulative subspace is merged with the buffer's level-`l` subspace,
    /// then extended by the new class-`l` draws from the first `beta[l]`
    /// source dimensions.
    pub fn rank_transition_pmf<P: Probability>(
        &self,
        buffer: &RankVector,
        arrivals: &[u32],
        beta: &[u32],
    ) -> Result<Vec<(RankVector, P)>> {
        buffer.validate(beta)?;
        if arrivals.len() != beta.len() {
            return Err(Error::DimensionMismatch {
                expected: beta.len(),
                found: arrivals.len(),
            });
        }
        let r = buffer.ranks();
        let mut paths: BTreeMap<Vec<u32>, P> = BTreeMap::new();
        paths.insert(Vec::new(), P::one());
        for l in 0..beta.len() {
            let r_prev = if l == 0 { 0 } else { r[l - 1] };
            let mut next: BTreeMap<Vec<u32>, P> = BTreeMap::new();
            for (path, pm) in &paths {
                let s_prev = path.last().copied().unwrap_or(0);
                let merged = self.union_dim_step::<P>(s_prev - r_prev, r[l] - r_prev, beta[l] - r_prev)?;
                for (t, pt) in merged.support() {
                    let grown = self.extend_by_draws::<P>(t + r_prev, arrivals[l], beta[l])?;
                    for (s, ps) in grown.support() {
                        let mut key = path.clone();
                        key.push(s);
                        let w = pm.clone() * pt.clone() * ps.clone();
                        let slot = next.entry(key).or_insert_with(P::zero);
                        *slot = slot.clone() + w;
                    }
                }
            }
            paths = next;
        }
        Ok(paths.into_iter().map(|(k, p)| (RankVector(k), p)).collect())
    }

    /// Law of the number of decodable layers after the arrivals: mass at
    /// `l` is the probability that layers `1..=l` decode and no higher
    /// layer does.
    ///
    /// Runs the same chain as [`Self::rank_transition_pmf`] but only tracks
    /// the previous cumulative rank and the highest full level so far.
    pub fn decode_layers_pmf<P: Probability>(
        &self,
        buffer: &RankVector,
        arrivals: &[u32],
        beta: &[u32],
    ) -> Result<Vec<P>> {
        buffer.validate(beta)?;
        if arrivals.len() != beta.len() {
            return Err(Error::DimensionMismatch {
                expected: beta.len(),
                found: arrivals.len(),
            });
        }
        let r = buffer.ranks();
        let mut frontier: BTreeMap<(u32, usize), P> = BTreeMap::new();
        frontier.insert((0, 0), P::one());
        for l in 0..beta.len() {
            let r_prev = if l == 0 { 0 } else { r[l - 1] };
            let mut next: BTreeMap<(u32, usize), P> = BTreeMap::new();
            for (&(s_prev, full), pm) in &frontier {
                let merged = self.union_dim_step::<P>(s_prev - r_prev, r[l] - r_prev, beta[l] - r_prev)?;
                for (t, pt) in merged.support() {
                    let grown = self.extend_by_draws::<P>(t + r_prev, arrivals[l], beta[l])?;
                    for (s, ps) in grown.support() {
                        let full = if s == beta[l] { l + 1 } else { full };
                        let w = pm.clone() * pt.clone() * ps.clone();
                        let slot = next.entry((s, full)).or_insert_with(P::zero);
                        *slot = slot.clone() + w;
                    }
                }
            }
            frontier = next;
        }
        let mut out = vec![P::zero(); beta.len() + 1];
        for ((_, full), p) in frontier {
            out[full] = out[full].clone() + p;
        }
        Ok(out)
    }

    /// Marginal of [`Self::rank_transition_pmf`] over decodable layers.
    pub fn decode_layers_from_joint<P: Probability>(
        &self,
        buffer: &RankVector,
        arrivals: &[u32],
        beta: &[u32],
    ) -> Result<Vec<P>> {
        let joint = self.rank_transition_pmf::<P>(buffer, arrivals, beta)?;
        let mut out = vec![P::zero(); beta.len() + 1];
        for (rv, p) in joint {
            let l = rv.decodable_layers(beta);
            out[l] = out[l].clone() + p;
        }
        Ok(out)
    }
}

/// Cumulative ranks `(r_1, ..., r_L)` of the nested class submatrices of a
/// generation's decoding matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RankVector(pub Vec<u32>);

impl RankVector {
    pub fn empty(layers: usize) -> Self {
        RankVector(vec![0; layers])
    }

    pub fn full(beta: &[u32]) -> Self {
        RankVector(beta.to_vec())
    }

    pub fn ranks(&self) -> &[u32] {
        &self.0
    }

    pub fn validate(&self, beta: &[u32]) -> Result<()> {
        let bad = |reason: &str| Error::InvalidRankVector {
            ranks: self.0.clone(),
            reason: reason.to_string(),
        };
        if self.0.len() != beta.len() {
            return Err(bad("length differs from the layer count"));
        }
        if self.0.windows(2).any(|w| w[0] > w[1]) {
            return Err(bad("cumulative ranks must be nondecreasing"));
        }
        if self.0.iter().zip(beta).any(|(r, b)| r > b) {
            return Err(bad("rank exceeds the cumulative layer size"));
        }
        Ok(())
    }

    /// Largest `l` with `r_l = beta_l`, or 0.
    pub fn decodable_layers(&self, beta: &[u32]) -> usize {
        (0..beta.len())
            .rev()
            .find(|&l| self.0[l] == beta[l])
            .map_or(0, |l| l + 1)
    }

    /// Per-class increments `u_l = r_l - r_{l-1}`.
    pub fn layer_counts(&self) -> Vec<u32> {
        let mut prev = 0;
        self.0
            .iter()
            .map(|&r| {
                let u = r - prev;
                prev = r;
                u
            })
            .collect()
    }

    pub fn from_layer_counts(counts: &[u32]) -> Self {
        let mut acc = 0;
        RankVector(
            counts
                .iter()
                .map(|&u| {
                    acc += u;
                    acc
                })
                .collect(),
        )
    }
}
