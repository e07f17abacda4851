//! Exact elimination: sparse echelon over any field, dense Bareiss over Z, and prime-field ranks.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::scalar::Q;
use crate::sparse::{SparseMat, SparseVec};

pub trait Field: Clone + PartialEq + std::fmt::Debug {
    fn nil() -> Self;
    fn unit() -> Self;
    fn is_nil(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn inv(&self) -> Self;
}

impl Field for Q {
    fn nil() -> Self {
        Zero::zero()
    }
    fn unit() -> Self {
        One::one()
    }
    fn is_nil(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn inv(&self) -> Self {
        self.recip()
    }
}

/// Prime with `P ≡ 1 (mod 4)`, so -1 has a square root.
pub const P: u64 = 2_013_265_921;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub struct Fp(pub u64);

impl Fp {
    pub fn new(x: i64) -> Fp {
        Fp(x.rem_euclid(P as i64) as u64)
    }
    pub fn pow(self, mut e: u64) -> Fp {
        let (mut b, mut r) = (self, Fp(1));
        while e > 0 {
            if e & 1 == 1 {
                r = r.mul(&b);
            }
            b = b.mul(&b);
            e >>= 1;
        }
        r
    }
    /// A fixed square root of -1.
    pub fn sqrt_minus_one() -> Fp {
        let g = (2..).map(Fp).find(|g| g.pow((P - 1) / 2) == Fp(P - 1)).unwrap();
        g.pow((P - 1) / 4)
    }
    /// Image of a rational whose denominator is a unit mod P.
    pub fn from_q(x: &Q) -> Option<Fp> {
        let p = BigInt::from(P);
        let n = x.numer().mod_floor(&p);
        let d = x.denom().mod_floor(&p);
        if d.is_zero() {
            return None;
        }
        let n = Fp(n.try_into().unwrap());
        let d = Fp(d.try_into().unwrap());
        Some(n.mul(&d.inv()))
    }
}

impl Field for Fp {
    fn nil() -> Self {
        Fp(0)
    }
    fn unit() -> Self {
        Fp(1)
    }
    fn is_nil(&self) -> bool {
        self.0 == 0
    }
    fn add(&self, o: &Self) -> Self {
        Fp((self.0 + o.0) % P)
    }
    fn sub(&self, o: &Self) -> Self {
        Fp((self.0 + P - o.0) % P)
    }
    fn mul(&self, o: &Self) -> Self {
        Fp(((self.0 as u128 * o.0 as u128) % P as u128) as u64)
    }
    fn inv(&self) -> Self {
        assert!(self.0 != 0, "inverse of zero mod p");
        self.pow(P - 2)
    }
}

fn axpy_f<F: Field>(a: &[(usize, F)], s: &F, b: &[(usize, F)]) -> Vec<(usize, F)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
            out.push(a[i].clone());
            i += 1;
        } else if i == a.len() || b[j].0 < a[i].0 {
            out.push((b[j].0, s.mul(&b[j].1)));
            j += 1;
        } else {
            let v = a[i].1.add(&s.mul(&b[j].1));
            if !v.is_nil() {
                out.push((a[i].0, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

/// Incremental row echelon form keyed by leading column.
/// Pivot rows are normalized to leading coefficient one.
#[derive(Clone, Debug)]
pub struct Echelon<F: Field> {
    ncols: usize,
    pivots: HashMap<usize, Vec<(usize, F)>>,
}

impl<F: Field> Echelon<F> {
    pub fn new(ncols: usize) -> Self {
        Echelon { ncols, pivots: HashMap::new() }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn pivot_cols(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.pivots.keys().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn reduce(&self, mut row: Vec<(usize, F)>) -> Vec<(usize, F)> {
        loop {
            let Some((c, v)) = row.first().cloned() else { return row };
            match self.pivots.get(&c) {
                Some(p) => {
                    let s = F::nil().sub(&v);
                    row = axpy_f(&row, &s, p);
                }
                None => return row,
            }
        }
    }

    /// Eliminates every pivot column, not only the leading one.
    pub fn reduce_full(&self, mut row: Vec<(usize, F)>) -> Vec<(usize, F)> {
        let mut from = 0;
        while let Some(k) = row[from..].iter().position(|(c, _)| self.pivots.contains_key(c)) {
            let (c, v) = row[from + k].clone();
            row = axpy_f(&row, &F::nil().sub(&v), &self.pivots[&c]);
            from += k;
        }
        row
    }

    /// Returns the new pivot column if the row was independent.
    pub fn insert(&mut self, row: Vec<(usize, F)>) -> Option<usize> {
        debug_assert!(row.last().map_or(true, |e| e.0 < self.ncols));
        let row = self.reduce(row);
        let (c, v) = row.first().cloned()?;
        let inv = v.inv();
        let row = row.into_iter().map(|(j, x)| (j, x.mul(&inv))).collect();
        self.pivots.insert(c, row);
        Some(c)
    }

    /// Back substitution with unknowns in columns `< nvars`; column `nvars + r` is right-hand side r.
    /// Free unknowns are set to zero.
    fn back_substitute(&self, nvars: usize, rhs: usize) -> Vec<F> {
        let mut x = vec![F::nil(); nvars];
        let mut cols: Vec<usize> = self.pivots.keys().copied().filter(|&c| c < nvars).collect();
        cols.sort_unstable_by(|a, b| b.cmp(a));
        for c in cols {
            let row = &self.pivots[&c];
            let mut acc = F::nil();
            for (j, a) in &row[1..] {
                if *j < nvars {
                    if !x[*j].is_nil() {
                        acc = acc.sub(&a.mul(&x[*j]));
                    }
                } else if *j == nvars + rhs {
                    acc = acc.add(a);
                }
            }
            x[c] = acc;
        }
        x
    }
}

pub fn rows_as<F: Field>(m: &SparseMat, conv: impl Fn(&Q) -> F) -> Vec<Vec<(usize, F)>> {
    m.rows().iter().map(|r| r.iter().map(|(j, v)| (*j, conv(v))).collect()).collect()
}

pub fn rank(m: &SparseMat) -> usize {
    // Eliminating along the shorter side keeps the pivot table small.
    let m = if m.ncols() > m.nrows() { m.transpose() } else { m.clone() };
    let mut e = Echelon::<Q>::new(m.ncols());
    for r in m.rows() {
        e.insert(r.clone());
    }
    e.rank()
}

pub fn rank_rows<F: Field>(ncols: usize, rows: impl IntoIterator<Item = Vec<(usize, F)>>) -> usize {
    let mut e = Echelon::<F>::new(ncols);
    for r in rows {
        e.insert(r);
    }
    e.rank()
}

/// Solves `A x = b`, one solution per column of `b`, or `None` if any system is inconsistent.
pub fn solve_many(a: &SparseMat, b: &SparseMat) -> Option<Vec<Vec<Q>>> {
    assert_eq!(a.nrows(), b.nrows(), "solve: row mismatch");
    let n = a.ncols();
    let mut e = Echelon::<Q>::new(n + b.ncols());
    for (ra, rb) in a.rows().iter().zip(b.rows()) {
        let mut row = ra.clone();
        row.extend(rb.iter().map(|(j, v)| (n + j, v.clone())));
        if let Some(c) = e.insert(row) {
            if c >= n {
                return None;
            }
        }
    }
    Some((0..b.ncols()).map(|r| e.back_substitute(n, r)).collect())
}

pub fn solve(a: &SparseMat, b: &[Q]) -> Option<Vec<Q>> {
    let col = SparseMat::from_rows(1, b.iter().map(|v| if v.is_zero() { vec![] } else { vec![(0, v.clone())] }).collect());
    solve_many(a, &col).map(|mut v| v.pop().unwrap())
}

/// Basis of the right kernel, one sparse vector per free column.
pub fn kernel(a: &SparseMat) -> Vec<SparseVec> {
    let n = a.ncols();
    let mut e = Echelon::<Q>::new(n);
    for r in a.rows() {
        e.insert(r.clone());
    }
    let mut piv: Vec<usize> = e.pivots.keys().copied().collect();
    piv.sort_unstable_by(|a, b| b.cmp(a));
    let free: Vec<usize> = (0..n).filter(|c| !e.pivots.contains_key(c)).collect();
    free.iter()
        .map(|&f| {
            let mut x: HashMap<usize, Q> = HashMap::new();
            x.insert(f, Q::one());
            for &c in &piv {
                if c > f {
                    continue;
                }
                let row = &e.pivots[&c];
                let mut acc = Q::zero();
                for (j, v) in &row[1..] {
                    if let Some(xj) = x.get(j) {
                        acc -= v * xj;
                    }
                }
                if !acc.is_zero() {
                    x.insert(c, acc);
                }
            }
            let mut v: SparseVec = x.into_iter().collect();
            v.sort_by_key(|e| e.0);
            v
        })
        .collect()
}

/// Rank via fraction-free Bareiss elimination on a dense integer copy.
/// Each row is scaled by the lcm of its denominators first.
pub fn rank_bareiss(m: &SparseMat) -> usize {
    let (nr, nc) = m.shape();
    let mut a: Vec<Vec<BigInt>> = m
        .rows()
        .iter()
        .map(|r| {
            let l = r.iter().fold(BigInt::one(), |l, (_, v)| l.lcm(v.denom()));
            let mut row = vec![BigInt::zero(); nc];
            for (j, v) in r {
                row[*j] = v.numer() * (&l / v.denom());
            }
            row
        })
        .collect();
    let mut prev = BigInt::one();
    let mut rank = 0;
    for c in 0..nc {
        if rank == nr {
            break;
        }
        let Some(p) = (rank..nr).find(|&i| !a[i][c].is_zero()) else { continue };
        a.swap(rank, p);
        for i in rank + 1..nr {
            for j in c + 1..nc {
                let v = &a[rank][c] * &a[i][j] - &a[i][c] * &a[rank][j];
                a[i][j] = v / &prev;
            }
            a[i][c] = BigInt::zero();
        }
        prev = a[rank][c].clone();
        rank += 1;
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{q, qf};

    #[test]
    fn rank_small() {
        let a = SparseMat::from_i64(&[&[1, 2, 3], &[2, 4, 6], &[0, 1, 1]]);
        assert_eq!(rank(&a), 2);
        assert_eq!(rank_bareiss(&a), 2);
        assert_eq!(rank(&SparseMat::zeros(3, 0)), 0);
        assert_eq!(rank_bareiss(&SparseMat::zeros(0, 4)), 0);
    }

    #[test]
    fn solve_and_kernel() {
        let a = SparseMat::from_i64(&[&[1, 2, 3], &[0, 1, 1]]);
        let b = vec![q(6), q(2)];
        let x = solve(&a, &b).unwrap();
        assert_eq!(a.mul_vec(&x), b);
        let k = kernel(&a);
        assert_eq!(k.len(), 1);
        let kd = crate::sparse::to_dense(&k[0], 3);
        assert!(a.mul_vec(&kd).iter().all(|v| v.is_zero()));
        let bad = SparseMat::from_i64(&[&[1, 1], &[1, 1]]);
        assert!(solve(&bad, &[q(1), q(2)]).is_none());
    }

    #[test]
    fn bareiss_with_fractions() {
        let a = SparseMat::from_dense(&[vec![qf(1, 2), qf(1, 3)], vec![qf(3, 2), q(1)]], 2);
        assert_eq!(rank_bareiss(&a), 1);
        assert_eq!(rank(&a), 1);
    }

    #[test]
    fn fp_sqrt_minus_one() {
        let i = Fp::sqrt_minus_one();
        assert_eq!(i.mul(&i), Fp(P - 1));
        assert_eq!(Fp::from_q(&qf(1, 2)).unwrap().mul(&Fp(2)), Fp(1));
    }
}
