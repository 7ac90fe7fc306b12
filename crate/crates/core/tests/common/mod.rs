//! Independent oracles shared by the integration tests and the acceptance
//! harness. None of these reuse the library's field or rank code.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Table-driven GF(2) or GF(4), written out by hand.
#[derive(Debug, Clone, Copy)]
pub struct SmallField {
    pub q: u8,
}

const GF4_MUL: [[u8; 4]; 4] = [[0, 0, 0, 0], [0, 1, 2, 3], [0, 2, 3, 1], [0, 3, 1, 2]];
const GF4_INV: [u8; 4] = [0, 1, 3, 2];

impl SmallField {
    pub fn new(q: u8) -> Self {
        assert!(q == 2 || q == 4, "oracle field must be GF(2) or GF(4)");
        SmallField { q }
    }

    pub fn add(self, a: u8, b: u8) -> u8 {
        a ^ b
    }

    pub fn mul(self, a: u8, b: u8) -> u8 {
        if self.q == 2 {
            a & b
        } else {
            GF4_MUL[a as usize][b as usize]
        }
    }

    pub fn inv(self, a: u8) -> u8 {
        assert!(a != 0);
        if self.q == 2 {
            1
        } else {
            GF4_INV[a as usize]
        }
    }

    /// Every vector of length `k`, in lexicographic order.
    pub fn vectors(self, k: usize) -> Vec<Vec<u8>> {
        let mut out = vec![Vec::new()];
        for _ in 0..k {
            out = out
                .into_iter()
                .flat_map(|v| {
                    (0..self.q).map(move |x| {
                        let mut w = v.clone();
                        w.push(x);
                        w
                    })
                })
                .collect();
        }
        out
    }

    /// Reduced row echelon basis of the span; a canonical subspace key.
    pub fn span(self, rows: &[Vec<u8>], k: usize) -> Vec<Vec<u8>> {
        let mut m: Vec<Vec<u8>> = rows.to_vec();
        let mut r = 0;
        for c in 0..k {
            let Some(p) = (r..m.len()).find(|&i| m[i][c] != 0) else {
                continue;
            };
            m.swap(r, p);
            let inv = self.inv(m[r][c]);
            for x in m[r].iter_mut() {
                *x = self.mul(*x, inv);
            }
            for i in 0..m.len() {
                if i != r && m[i][c] != 0 {
                    let f = m[i][c];
                    for j in 0..k {
                        let t = self.mul(f, m[r][j]);
                        m[i][j] = self.add(m[i][j], t);
                    }
                }
            }
            r += 1;
        }
        m.truncate(r);
        m
    }

    pub fn rank(self, rows: &[Vec<u8>], k: usize) -> usize {
        self.span(rows, k).len()
    }

    /// All elements of the subspace with the given basis.
    pub fn elements(self, basis: &[Vec<u8>], k: usize) -> Vec<Vec<u8>> {
        self.vectors(basis.len())
            .into_iter()
            .map(|c| {
                let mut v = vec![0; k];
                for (ci, b) in c.iter().zip(basis) {
                    for j in 0..k {
                        let t = self.mul(*ci, b[j]);
                        v[j] = self.add(v[j], t);
                    }
                }
                v
            })
            .collect()
    }

    /// Every `m`-dimensional subspace of `GF(q)^k`.
    pub fn subspaces(self, m: usize, k: usize) -> Vec<Vec<Vec<u8>>> {
        let mut set = BTreeSet::new();
        for tuple in tuples(&self.vectors(k), m) {
            let s = self.span(&tuple, k);
            if s.len() == m {
                set.insert(s);
            }
        }
        set.into_iter().collect()
    }
}

/// Every ordered `n`-tuple drawn from `items`.
pub fn tuples<T: Clone>(items: &[T], n: usize) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|t| {
                items.iter().map(move |x| {
                    let mut u = t.clone();
                    u.push(x.clone());
                    u
                })
            })
            .collect();
    }
    out
}

pub fn ratio(n: usize, d: usize) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn histogram(counts: &[usize], total: usize) -> Vec<BigRational> {
    counts.iter().map(|&c| ratio(c, total)).collect()
}

/// Exact law of the span dimension of `n` uniform vectors in `GF(q)^k`.
pub fn brute_span(f: SmallField, n: usize, k: usize) -> Vec<BigRational> {
    let all = tuples(&f.vectors(k), n);
    let mut counts = vec![0; k + 1];
    for t in &all {
        counts[f.rank(t, k)] += 1;
    }
    histogram(&counts, all.len())
}

fn unit(k: usize, i: usize) -> Vec<u8> {
    let mut v = vec![0; k];
    v[i] = 1;
    v
}

/// Exact law of `dim(U + W)` for `U` spanned by the first `y` unit vectors
/// and `W` uniform over `m`-dimensional subspaces.
pub fn brute_union_step(f: SmallField, y: usize, m: usize, k: usize) -> Vec<BigRational> {
    let u: Vec<Vec<u8>> = (0..y).map(|i| unit(k, i)).collect();
    let ws = f.subspaces(m, k);
    let mut counts = vec![0; k + 1];
    for w in &ws {
        let mut rows = u.clone();
        rows.extend(w.iter().cloned());
        counts[f.rank(&rows, k)] += 1;
    }
    histogram(&counts, ws.len())
}

pub type SubspaceLaw = BTreeMap<Vec<Vec<u8>>, BigRational>;

/// Law of the subspace spanned by `n` uniform draws from a uniformly random
/// `m`-dimensional subspace.
pub fn spanned_within_random(f: SmallField, n: usize, m: usize, k: usize) -> SubspaceLaw {
    let ws = f.subspaces(m, k);
    let mut law = SubspaceLaw::new();
    for w in &ws {
        let elems = f.elements(w, k);
        let draws = tuples(&elems, n);
        let weight = ratio(1, ws.len() * draws.len());
        for d in &draws {
            let e = law.entry(f.span(d, k)).or_insert_with(BigRational::zero);
            *e += weight.clone();
        }
    }
    law
}

/// Exact law of `dim(S_1 + ... + S_R)` for independent `S_i`, each spanned by
/// `N_i` uniform draws from a uniformly random `m_i`-dimensional subspace.
pub fn brute_union_many(f: SmallField, draws: &[(usize, usize)], k: usize) -> Vec<BigRational> {
    let parts: Vec<SubspaceLaw> = draws.iter().map(|&(n, m)| spanned_within_random(f, n, m, k)).collect();
    union_of_laws(f, &parts, k)
}

/// Dimension law of the sum of independent random subspaces.
pub fn union_of_laws(f: SmallField, parts: &[SubspaceLaw], k: usize) -> Vec<BigRational> {
    let mut acc = SubspaceLaw::new();
    acc.insert(Vec::new(), BigRational::one());
    for part in parts {
        let mut next = SubspaceLaw::new();
        for (a, pa) in &acc {
            for (s, ps) in part {
                let mut rows = a.clone();
                rows.extend(s.iter().cloned());
                let e = next.entry(f.span(&rows, k)).or_insert_with(BigRational::zero);
                *e += pa.clone() * ps.clone();
            }
        }
        acc = next;
    }
    let mut out = vec![BigRational::zero(); k + 1];
    for (s, p) in acc {
        out[s.len()] += p;
    }
    out
}

/// Cumulative ranks of a nested PRLC buffer holding `packets`, where each
/// packet is `(class, coefficient vector)` with 1-based classes.
pub fn nested_ranks(f: SmallField, packets: &[(usize, Vec<u8>)], beta: &[usize]) -> Vec<u32> {
    let k = *beta.last().unwrap();
    (1..=beta.len())
        .map(|l| {
            let rows: Vec<Vec<u8>> = packets.iter().filter(|p| p.0 <= l).map(|p| p.1.clone()).collect();
            f.rank(&rows, k) as u32
        })
        .collect()
}

/// Every assignment of fresh packets for the per-class counts, each class-l
/// packet ranging over the vectors supported on the first `beta[l]` symbols.
pub fn packet_draws(f: SmallField, beta: &[usize], arrivals: &[usize]) -> Vec<Vec<(usize, Vec<u8>)>> {
    let k = *beta.last().unwrap();
    let mut out: Vec<Vec<(usize, Vec<u8>)>> = vec![Vec::new()];
    for (l, &z) in arrivals.iter().enumerate() {
        let support: Vec<(usize, Vec<u8>)> = f
            .vectors(beta[l])
            .into_iter()
            .map(|mut v| {
                v.resize(k, 0);
                (l + 1, v)
            })
            .collect();
        for _ in 0..z {
            out = out
                .into_iter()
                .flat_map(|t| {
                    support.iter().map(move |p| {
                        let mut u = t.clone();
                        u.push(p.clone());
                        u
                    })
                })
                .collect();
        }
    }
    out
}

/// Exact joint law of the rank vector reached from an empty buffer.
pub fn brute_rank_transition_from_empty(
    f: SmallField,
    beta: &[usize],
    arrivals: &[usize],
) -> BTreeMap<Vec<u32>, BigRational> {
    let draws = packet_draws(f, beta, arrivals);
    let mut law = BTreeMap::new();
    let w = ratio(1, draws.len());
    for d in &draws {
        let e = law.entry(nested_ranks(f, d, beta)).or_insert_with(BigRational::zero);
        *e += w.clone();
    }
    law
}

/// Largest per-atom deviation in standard errors between observed counts and
/// an expected pmf, with the standard error taken from the expected mass.
/// An atom with zero expected mass and a nonzero count yields infinity.
pub fn worst_z(counts: &[u64], trials: u64, expected: &[f64]) -> f64 {
    let n = trials as f64;
    let len = counts.len().max(expected.len());
    (0..len)
        .map(|i| {
            let c = counts.get(i).copied().unwrap_or(0) as f64;
            let p = expected.get(i).copied().unwrap_or(0.0);
            let se = (p * (1.0 - p) / n).sqrt();
            let dev = (c / n - p).abs();
            if se == 0.0 {
                if dev == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                dev / se
            }
        })
        .fold(0.0, f64::max)
}

/// Plain mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
