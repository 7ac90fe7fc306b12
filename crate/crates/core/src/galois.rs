//! Finite-field arithmetic and dense linear algebra over GF(q).
//!
//! Prime fields use modular arithmetic. Binary extension fields GF(2^m),
//! 2 <= m <= 16, use exp/log tables over a fixed primitive polynomial.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};

/// Field element. Every supported field has at most 2^16 elements.
pub type Elem = u16;

/// Primitive polynomials for GF(2^m), indexed by m (bit i is the x^i coefficient).
const PRIMITIVE_POLYS: [u32; 17] = [
    0, 0x3, 0x7, 0xB, 0x13, 0x25, 0x43, 0x89, 0x11D, 0x211, 0x409, 0x805, 0x1053, 0x201B, 0x4443,
    0x8003, 0x1100B,
];

#[derive(Debug)]
enum Repr {
    Prime,
    Binary { exp: Vec<Elem>, log: Vec<u32> },
}

#[derive(Debug)]
struct FieldInner {
    order: u32,
    repr: Repr,
}

/// A finite field GF(q). Cheap to clone; the tables are shared.
#[derive(Clone)]
pub struct Field {
    inner: Arc<FieldInner>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF({})", self.inner.order)
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.inner.order == other.inner.order
    }
}

impl Eq for Field {}

/// Operations accepted by [`Field::apply`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldOp {
    Add,
    Sub,
    Mul,
    Div,
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl Field {
    pub fn new(order: u64) -> Result<Field> {
        if order < 2 || order > 1 << 16 {
            return Err(Error::UnsupportedField(order));
        }
        if is_prime(order) {
            return Ok(Field {
                inner: Arc::new(FieldInner {
                    order: order as u32,
                    repr: Repr::Prime,
                }),
            });
        }
        if !order.is_power_of_two() {
            return Err(Error::UnsupportedField(order));
        }
        let m = order.trailing_zeros() as usize;
        let poly = PRIMITIVE_POLYS[m];
        let n = order as usize;
        let mut exp = vec![0 as Elem; 2 * (n - 1)];
        let mut log = vec![0u32; n];
        let mut x: u32 = 1;
        for (i, slot) in exp.iter_mut().take(n - 1).enumerate() {
            *slot = x as Elem;
            if i > 0 && x == 1 {
                return Err(Error::domain(format!("polynomial {poly:#x} is not primitive")));
            }
            log[x as usize] = i as u32;
            x <<= 1;
            if x & (1 << m) != 0 {
                x ^= poly;
            }
        }
        for i in n - 1..2 * (n - 1) {
            exp[i] = exp[i - (n - 1)];
        }
        Ok(Field {
            inner: Arc::new(FieldInner {
                order: order as u32,
                repr: Repr::Binary { exp, log },
            }),
        })
    }

    pub fn order(&self) -> u32 {
        self.inner.order
    }

    /// Validates a raw value as a field element.
    pub fn elem(&self, v: u32) -> Result<Elem> {
        if v < self.inner.order {
            Ok(v as Elem)
        } else {
            Err(Error::NotAnElement {
                value: v,
                order: self.inner.order,
            })
        }
    }

    /// Checked entry point for the add/sub/mul/div family.
    pub fn apply(&self, op: FieldOp, a: u32, b: u32) -> Result<Elem> {
        let a = self.elem(a)?;
        let b = self.elem(b)?;
        match op {
            FieldOp::Add => Ok(self.add(a, b)),
            FieldOp::Sub => Ok(self.sub(a, b)),
            FieldOp::Mul => Ok(self.mul(a, b)),
            FieldOp::Div => self.div(a, b),
        }
    }

    #[inline]
    pub fn add(&self, a: Elem, b: Elem) -> Elem {
        debug_assert!((a as u32) < self.inner.order && (b as u32) < self.inner.order);
        match self.inner.repr {
            Repr::Prime => ((a as u32 + b as u32) % self.inner.order) as Elem,
            Repr::Binary { .. } => a ^ b,
        }
    }

    #[inline]
    pub fn neg(&self, a: Elem) -> Elem {
        match self.inner.repr {
            Repr::Prime if a != 0 => (self.inner.order - a as u32) as Elem,
            _ => a,
        }
    }

    #[inline]
    pub fn sub(&self, a: Elem, b: Elem) -> Elem {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        debug_assert!((a as u32) < self.inner.order && (b as u32) < self.inner.order);
        match &self.inner.repr {
            Repr::Prime => ((a as u32 * b as u32) % self.inner.order) as Elem,
            Repr::Binary { exp, log } => {
                if a == 0 || b == 0 {
                    0
                } else {
                    exp[(log[a as usize] + log[b as usize]) as usize]
                }
            }
        }
    }

    pub fn inv(&self, a: Elem) -> Result<Elem> {
        if a == 0 {
            return Err(Error::ZeroInverse);
        }
        self.elem(a as u32)?;
        Ok(match &self.inner.repr {
            Repr::Prime => {
                // Fermat: a^(p-2)
                let p = self.inner.order as u64;
                let mut base = a as u64;
                let mut e = p - 2;
                let mut acc = 1u64;
                while e > 0 {
                    if e & 1 == 1 {
                        acc = acc * base % p;
                    }
                    base = base * base % p;
                    e >>= 1;
                }
                acc as Elem
            }
            Repr::Binary { exp, log } => {
                let n = self.inner.order - 1;
                exp[((n - log[a as usize]) % n) as usize]
            }
        })
    }

    pub fn div(&self, a: Elem, b: Elem) -> Result<Elem> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> Elem {
        rng.gen_range(0..self.inner.order) as Elem
    }

    /// `acc += c * x`, elementwise.
    pub fn axpy(&self, acc: &mut [Elem], c: Elem, x: &[Elem]) {
        debug_assert_eq!(acc.len(), x.len());
        if c == 0 {
            return;
        }
        for (a, &v) in acc.iter_mut().zip(x) {
            *a = self.add(*a, self.mul(c, v));
        }
    }

    pub fn scale(&self, x: &mut [Elem], c: Elem) {
        for v in x.iter_mut() {
            *v = self.mul(*v, c);
        }
    }
}

/// Dense row-major matrix over a [`Field`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldMatrix {
    field: Field,
    rows: usize,
    cols: usize,
    data: Vec<Elem>,
}

impl FieldMatrix {
    pub fn zeros(field: &Field, rows: usize, cols: usize) -> Self {
        FieldMatrix {
            field: field.clone(),
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(field: &Field, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn from_rows(field: &Field, cols: usize, rows: &[Vec<Elem>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            for &v in row {
                field.elem(v as u32)?;
            }
            data.extend_from_slice(row);
        }
        Ok(FieldMatrix {
            field: field.clone(),
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn random<R: Rng + ?Sized>(field: &Field, rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| field.random(rng)).collect();
        FieldMatrix {
            field: field.clone(),
            rows,
            cols,
            data,
        }
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Elem] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> Elem {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Elem) {
        self.data[i * self.cols + j] = v;
    }

    pub fn push_row(&mut self, row: &[Elem]) -> Result<()> {
        if row.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    pub fn mul(&self, other: &FieldMatrix) -> Result<FieldMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = FieldMatrix::zeros(&self.field, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let c = self.get(i, k);
                let (start, end) = (i * other.cols, (i + 1) * other.cols);
                self.field.axpy(&mut out.data[start..end], c, other.row(k));
            }
        }
        Ok(out)
    }

    /// Brings the matrix to reduced row-echelon form in place and returns
    /// the pivot column of each nonzero row.
    pub fn reduce(&mut self) -> Vec<usize> {
        let f = self.field.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| self.get(i, c) != 0) else {
                continue;
            };
            if p != r {
                for j in 0..self.cols {
                    self.data.swap(p * self.cols + j, r * self.cols + j);
                }
            }
            let inv = f.inv(self.get(r, c)).expect("pivot is nonzero");
            let cols = self.cols;
            f.scale(&mut self.data[r * cols..(r + 1) * cols], inv);
            let pivot_row = self.row(r).to_vec();
            for i in 0..self.rows {
                if i != r {
                    let factor = self.get(i, c);
                    if factor != 0 {
                        let neg = f.neg(factor);
                        f.axpy(&mut self.data[i * cols..(i + 1) * cols], neg, &pivot_row);
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        self.clone().reduce().len()
    }

    /// Solves `self * X = rhs` for square full-rank `self`.
    pub fn solve_full_rank(&self, rhs: &FieldMatrix) -> Result<FieldMatrix> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: self.cols,
            });
        }
        if rhs.rows != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: rhs.rows,
            });
        }
        let n = self.rows;
        let width = n + rhs.cols;
        let mut aug = FieldMatrix::zeros(&self.field, n, width);
        for i in 0..n {
            aug.data[i * width..i * width + n].copy_from_slice(self.row(i));
            aug.data[i * width + n..(i + 1) * width].copy_from_slice(rhs.row(i));
        }
        let pivots = aug.reduce();
        let rank = pivots.iter().take_while(|&&c| c < n).count();
        if rank < n {
            return Err(Error::RankDeficient { rank, needed: n });
        }
        let mut out = FieldMatrix::zeros(&self.field, n, rhs.cols);
        for i in 0..n {
            out.data[i * rhs.cols..(i + 1) * rhs.cols].copy_from_slice(&aug.row(i)[n..]);
        }
        Ok(out)
    }

    /// Incremental RREF insertion. `self` must already be in reduced form
    /// with linearly independent rows (as produced by repeated insertion
    /// into an empty matrix). Returns whether `v` was innovative.
    pub fn rref_insert(&mut self, v: &[Elem]) -> Result<bool> {
        let mut basis = EchelonBasis::from_reduced(self.clone());
        let innovative = basis.insert(v)?;
        *self = basis.into_matrix();
        Ok(innovative)
    }
}

/// A row space kept in reduced row-echelon form, supporting cheap
/// incremental innovation checks.
#[derive(Clone, Debug)]
pub struct EchelonBasis {
    field: Field,
    cols: usize,
    rows: Vec<Vec<Elem>>,
    pivots: Vec<usize>,
}

impl EchelonBasis {
    pub fn new(field: &Field, cols: usize) -> Self {
        EchelonBasis {
            field: field.clone(),
            cols,
            rows: Vec::new(),
            pivots: Vec::new(),
        }
    }

    fn from_reduced(mut m: FieldMatrix) -> Self {
        let pivots = m.reduce();
        let rows = (0..pivots.len()).map(|i| m.row(i).to_vec()).collect();
        EchelonBasis {
            field: m.field.clone(),
            cols: m.cols,
            rows,
            pivots,
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    /// Reduces `v` against the basis; the residual is zero iff `v` lies in
    /// the span.
    pub fn residual(&self, v: &[Elem]) -> Vec<Elem> {
        let mut w = v.to_vec();
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            let c = w[p];
            if c != 0 {
                self.field.axpy(&mut w, self.field.neg(c), row);
            }
        }
        w
    }

    pub fn contains(&self, v: &[Elem]) -> bool {
        self.residual(v).iter().all(|&x| x == 0)
    }

    pub fn insert(&mut self, v: &[Elem]) -> Result<bool> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: v.len(),
            });
        }
        let mut w = self.residual(v);
        let Some(p) = w.iter().position(|&x| x != 0) else {
            return Ok(false);
        };
        let inv = self.field.inv(w[p])?;
        self.field.scale(&mut w, inv);
        for row in self.rows.iter_mut() {
            let c = row[p];
            if c != 0 {
                self.field.axpy(row, self.field.neg(c), &w);
            }
        }
        let at = self.pivots.partition_point(|&q| q < p);
        self.pivots.insert(at, p);
        self.rows.insert(at, w);
        Ok(true)
    }

    pub fn into_matrix(self) -> FieldMatrix {
        let mut m = FieldMatrix::zeros(&self.field, 0, self.cols);
        for r in &self.rows {
            m.push_row(r).expect("row width matches");
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fields() -> Vec<Field> {
        [2u64, 3, 4, 5, 7, 8, 11, 13, 16]
            .iter()
            .map(|&q| Field::new(q).unwrap())
            .collect()
    }

    #[test]
    fn axioms_hold_exhaustively_for_small_fields() {
        for f in fields() {
            let q = f.order() as Elem;
            for a in 0..q {
                assert_eq!(f.add(a, 0), a);
                assert_eq!(f.mul(a, 1), a);
                assert_eq!(f.add(a, f.neg(a)), 0);
                if a != 0 {
                    assert_eq!(f.mul(a, f.inv(a).unwrap()), 1, "{f:?} a={a}");
                }
                for b in 0..q {
                    assert_eq!(f.add(a, b), f.add(b, a));
                    assert_eq!(f.mul(a, b), f.mul(b, a));
                    for c in 0..q {
                        assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
                        assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
                        assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                    }
                }
            }
        }
    }

    #[test]
    fn all_binary_tables_are_primitive() {
        for m in 2..=16u32 {
            let f = Field::new(1u64 << m).unwrap();
            let a = 2 as Elem;
            assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
        }
    }

    #[test]
    fn gf256_identity_and_gf2_characteristic() {
        let f = Field::new(256).unwrap();
        for a in 0..256u32 {
            assert_eq!(f.apply(FieldOp::Mul, a, 1).unwrap(), a as Elem);
        }
        let g2 = Field::new(2).unwrap();
        assert_eq!(g2.apply(FieldOp::Add, 1, 1).unwrap(), 0);
    }

    #[test]
    fn gf5_inverse_of_three() {
        let f = Field::new(5).unwrap();
        // exhaustive search oracle
        let found = (1..5u16).find(|&b| (3 * b) % 5 == 1).unwrap();
        assert_eq!(found, 2);
        assert_eq!(f.inv(3).unwrap(), found);
    }

    #[test]
    fn domain_errors() {
        let f = Field::new(5).unwrap();
        assert!(matches!(f.inv(0), Err(Error::ZeroInverse)));
        assert!(matches!(f.apply(FieldOp::Div, 1, 0), Err(Error::ZeroInverse)));
        assert!(matches!(
            f.apply(FieldOp::Add, 5, 1),
            Err(Error::NotAnElement { value: 5, order: 5 })
        ));
        assert!(matches!(Field::new(6), Err(Error::UnsupportedField(6))));
        assert!(matches!(Field::new(9), Err(Error::UnsupportedField(9))));
        assert!(Field::new(1).is_err());
    }

    /// Enumerates the span of the rows of a GF(2) matrix by brute force.
    fn gf2_span_size(rows: &[Vec<Elem>]) -> usize {
        let cols = rows[0].len();
        let mut seen = std::collections::HashSet::new();
        for mask in 0u32..(1 << rows.len()) {
            let mut v = vec![0u16; cols];
            for (i, r) in rows.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    for j in 0..cols {
                        v[j] ^= r[j];
                    }
                }
            }
            seen.insert(v);
        }
        seen.len()
    }

    #[test]
    fn rank_examples() {
        let f2 = Field::new(2).unwrap();
        let rows = vec![vec![1, 0, 1], vec![0, 1, 1], vec![1, 1, 0]];
        let span = gf2_span_size(&rows);
        assert_eq!(span, 4); // 2^2
        let m = FieldMatrix::from_rows(&f2, 3, &rows).unwrap();
        assert_eq!(m.rank(), 2);
        for f in fields() {
            assert_eq!(FieldMatrix::identity(&f, 4).rank(), 4);
            assert_eq!(FieldMatrix::zeros(&f, 3, 5).rank(), 0);
        }
        assert_eq!(FieldMatrix::zeros(&f2, 0, 0).rank(), 0);
    }

    #[test]
    fn rref_insert_basics() {
        let f = Field::new(256).unwrap();
        let mut m = FieldMatrix::zeros(&f, 0, 4);
        assert!(!m.rref_insert(&[0, 0, 0, 0]).unwrap());
        assert_eq!(m.rows(), 0);
        assert!(m.rref_insert(&[0, 7, 0, 1]).unwrap());
        assert_eq!(m.rank(), 1);
        assert!(!m.rref_insert(&[0, f.mul(7, 9), 0, 9]).unwrap());
        assert!(matches!(m.rref_insert(&[1, 2]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn incremental_rank_matches_batch_over_random_gf2() {
        let f = Field::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let rows = rng.gen_range(0..8);
            let cols = rng.gen_range(1..7);
            let stack = FieldMatrix::random(&f, rows, cols, &mut rng);
            let mut basis = EchelonBasis::new(&f, cols);
            let mut innovative = 0;
            for i in 0..rows {
                if basis.insert(stack.row(i)).unwrap() {
                    innovative += 1;
                }
            }
            assert_eq!(basis.rank(), stack.rank());
            assert_eq!(innovative, stack.rank());
        }
    }

    #[test]
    fn solve_examples() {
        let f = Field::new(256).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rhs = FieldMatrix::random(&f, 3, 5, &mut rng);
        assert_eq!(FieldMatrix::identity(&f, 3).solve_full_rank(&rhs).unwrap(), rhs);

        let sources = FieldMatrix::random(&f, 3, 16, &mut rng);
        let coeffs = loop {
            let c = FieldMatrix::random(&f, 3, 3, &mut rng);
            if c.rank() == 3 {
                break c;
            }
        };
        let coded = coeffs.mul(&sources).unwrap();
        assert_eq!(coeffs.solve_full_rank(&coded).unwrap(), sources);

        let f2 = Field::new(2).unwrap();
        let singular = FieldMatrix::from_rows(&f2, 2, &[vec![1, 1], vec![1, 1]]).unwrap();
        let b = FieldMatrix::identity(&f2, 2);
        assert!(matches!(
            singular.solve_full_rank(&b),
            Err(Error::RankDeficient { rank: 1, needed: 2 })
        ));
    }
}
