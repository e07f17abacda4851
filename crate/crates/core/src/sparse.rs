//! Row-compressed sparse matrices over Q.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::{One, Zero};

use crate::scalar::{fmt_q, parse_q, Q};

/// Rows hold `(col, value)` pairs sorted by column with no stored zeros.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SparseMat {
    nrows: usize,
    ncols: usize,
    rows: Vec<Vec<(usize, Q)>>,
}

pub type SparseVec = Vec<(usize, Q)>;

/// `a + s·b` for sorted sparse vectors.
pub fn axpy(a: &[(usize, Q)], s: &Q, b: &[(usize, Q)]) -> SparseVec {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
            out.push(a[i].clone());
            i += 1;
        } else if i == a.len() || b[j].0 < a[i].0 {
            out.push((b[j].0, s * &b[j].1));
            j += 1;
        } else {
            let v = &a[i].1 + s * &b[j].1;
            if !v.is_zero() {
                out.push((a[i].0, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

pub fn to_sparse(v: &[Q]) -> SparseVec {
    v.iter().enumerate().filter(|(_, x)| !x.is_zero()).map(|(i, x)| (i, x.clone())).collect()
}

pub fn to_dense(v: &[(usize, Q)], n: usize) -> Vec<Q> {
    let mut out = vec![Q::zero(); n];
    for (i, x) in v {
        out[*i] = x.clone();
    }
    out
}

impl SparseMat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMat { nrows, ncols, rows: vec![Vec::new(); nrows] }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![Q::one(); n])
    }

    pub fn diag(d: &[Q]) -> Self {
        let rows = d
            .iter()
            .enumerate()
            .map(|(i, x)| if x.is_zero() { vec![] } else { vec![(i, x.clone())] })
            .collect();
        SparseMat { nrows: d.len(), ncols: d.len(), rows }
    }

    /// Duplicate entries are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, entries: impl IntoIterator<Item = (usize, usize, Q)>) -> Self {
        let mut acc: Vec<BTreeMap<usize, Q>> = vec![BTreeMap::new(); nrows];
        for (i, j, v) in entries {
            assert!(i < nrows && j < ncols, "entry ({i},{j}) outside {nrows}x{ncols}");
            *acc[i].entry(j).or_insert_with(Q::zero) += v;
        }
        let rows = acc
            .into_iter()
            .map(|r| r.into_iter().filter(|(_, v)| !v.is_zero()).collect())
            .collect();
        SparseMat { nrows, ncols, rows }
    }

    /// Rows must be sorted and zero-free; checked in debug builds.
    pub fn from_rows(ncols: usize, rows: Vec<SparseVec>) -> Self {
        debug_assert!(rows.iter().all(|r| r.windows(2).all(|w| w[0].0 < w[1].0)
            && r.iter().all(|(j, v)| *j < ncols && !v.is_zero())));
        SparseMat { nrows: rows.len(), ncols, rows }
    }

    pub fn from_dense(d: &[Vec<Q>], ncols: usize) -> Self {
        Self::from_rows(ncols, d.iter().map(|r| to_sparse(r)).collect())
    }

    pub fn from_i64(d: &[&[i64]]) -> Self {
        let ncols = d.first().map_or(0, |r| r.len());
        let rows: Vec<Vec<Q>> = d.iter().map(|r| r.iter().map(|&x| crate::scalar::q(x)).collect()).collect();
        Self::from_dense(&rows, ncols)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }
    pub fn ncols(&self) -> usize {
        self.ncols
    }
    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }
    pub fn row(&self, i: usize) -> &[(usize, Q)] {
        &self.rows[i]
    }
    pub fn rows(&self) -> &[SparseVec] {
        &self.rows
    }
    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(|r| r.is_empty())
    }

    pub fn get(&self, i: usize, j: usize) -> Q {
        match self.rows[i].binary_search_by_key(&j, |e| e.0) {
            Ok(k) => self.rows[i][k].1.clone(),
            Err(_) => Q::zero(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &Q)> {
        self.rows.iter().enumerate().flat_map(|(i, r)| r.iter().map(move |(j, v)| (i, *j, v)))
    }

    pub fn first_nonzero(&self) -> Option<(usize, usize, Q)> {
        self.iter().next().map(|(i, j, v)| (i, j, v.clone()))
    }

    pub fn to_dense(&self) -> Vec<Vec<Q>> {
        self.rows.iter().map(|r| to_dense(r, self.ncols)).collect()
    }

    pub fn transpose(&self) -> SparseMat {
        let mut rows: Vec<SparseVec> = vec![Vec::new(); self.ncols];
        for (i, j, v) in self.iter() {
            rows[j].push((i, v.clone()));
        }
        SparseMat { nrows: self.ncols, ncols: self.nrows, rows }
    }

    pub fn scale(&self, s: &Q) -> SparseMat {
        if s.is_zero() {
            return SparseMat::zeros(self.nrows, self.ncols);
        }
        let rows = self.rows.iter().map(|r| r.iter().map(|(j, v)| (*j, v * s)).collect()).collect();
        SparseMat { nrows: self.nrows, ncols: self.ncols, rows }
    }

    pub fn neg(&self) -> SparseMat {
        let rows = self.rows.iter().map(|r| r.iter().map(|(j, v)| (*j, -v.clone())).collect()).collect();
        SparseMat { nrows: self.nrows, ncols: self.ncols, rows }
    }

    /// `self + s·other`.
    pub fn add_scaled(&self, s: &Q, other: &SparseMat) -> SparseMat {
        assert_eq!(self.shape(), other.shape(), "add: shape mismatch");
        let rows = self.rows.iter().zip(&other.rows).map(|(a, b)| axpy(a, s, b)).collect();
        SparseMat { nrows: self.nrows, ncols: self.ncols, rows }
    }

    pub fn add(&self, other: &SparseMat) -> SparseMat {
        self.add_scaled(&Q::one(), other)
    }

    pub fn sub(&self, other: &SparseMat) -> SparseMat {
        self.add_scaled(&-Q::one(), other)
    }

    pub fn mul(&self, other: &SparseMat) -> SparseMat {
        assert_eq!(self.ncols, other.nrows, "mul: inner dimension mismatch");
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut acc: BTreeMap<usize, Q> = BTreeMap::new();
                for (k, a) in r {
                    for (j, b) in &other.rows[*k] {
                        *acc.entry(*j).or_insert_with(Q::zero) += a * b;
                    }
                }
                acc.into_iter().filter(|(_, v)| !v.is_zero()).collect()
            })
            .collect();
        SparseMat { nrows: self.nrows, ncols: other.ncols, rows }
    }

    pub fn mul_vec(&self, v: &[Q]) -> Vec<Q> {
        assert_eq!(self.ncols, v.len(), "mul_vec: dimension mismatch");
        self.rows
            .iter()
            .map(|r| r.iter().fold(Q::zero(), |acc, (j, a)| if v[*j].is_zero() { acc } else { acc + a * &v[*j] }))
            .collect()
    }

    /// Row vector times matrix.
    pub fn vec_mul(&self, v: &[Q]) -> Vec<Q> {
        assert_eq!(self.nrows, v.len(), "vec_mul: dimension mismatch");
        let mut out = vec![Q::zero(); self.ncols];
        for (i, r) in self.rows.iter().enumerate() {
            if v[i].is_zero() {
                continue;
            }
            for (j, a) in r {
                out[*j] += a * &v[i];
            }
        }
        out
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> SparseMat {
        let mut colmap = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            colmap[c] = k;
        }
        let out = rows
            .iter()
            .map(|&i| {
                let mut r: SparseVec = self.rows[i]
                    .iter()
                    .filter(|(j, _)| colmap[*j] != usize::MAX)
                    .map(|(j, v)| (colmap[*j], v.clone()))
                    .collect();
                r.sort_by_key(|e| e.0);
                r
            })
            .collect();
        SparseMat { nrows: rows.len(), ncols: cols.len(), rows: out }
    }

    pub fn kron(a: &SparseMat, b: &SparseMat) -> SparseMat {
        let mut rows = Vec::with_capacity(a.nrows * b.nrows);
        for ra in &a.rows {
            for rb in &b.rows {
                let mut r = Vec::with_capacity(ra.len() * rb.len());
                for (ja, va) in ra {
                    for (jb, vb) in rb {
                        r.push((ja * b.ncols + jb, va * vb));
                    }
                }
                rows.push(r);
            }
        }
        SparseMat { nrows: a.nrows * b.nrows, ncols: a.ncols * b.ncols, rows }
    }

    pub fn hstack(parts: &[&SparseMat]) -> SparseMat {
        let nrows = parts.first().map_or(0, |p| p.nrows);
        let mut rows: Vec<SparseVec> = vec![Vec::new(); nrows];
        let mut off = 0;
        for p in parts {
            assert_eq!(p.nrows, nrows, "hstack: row mismatch");
            for (i, r) in p.rows.iter().enumerate() {
                rows[i].extend(r.iter().map(|(j, v)| (j + off, v.clone())));
            }
            off += p.ncols;
        }
        SparseMat { nrows, ncols: off, rows }
    }

    pub fn vstack(parts: &[&SparseMat]) -> SparseMat {
        let ncols = parts.first().map_or(0, |p| p.ncols);
        let mut rows = Vec::new();
        for p in parts {
            assert_eq!(p.ncols, ncols, "vstack: column mismatch");
            rows.extend(p.rows.iter().cloned());
        }
        SparseMat { nrows: rows.len(), ncols, rows }
    }

    /// Block matrix from `(row_offset, col_offset, block)` placements.
    pub fn assemble(nrows: usize, ncols: usize, blocks: &[(usize, usize, &SparseMat)]) -> SparseMat {
        let mut entries = Vec::new();
        for (ro, co, b) in blocks {
            entries.extend(b.iter().map(|(i, j, v)| (ro + i, co + j, v.clone())));
        }
        SparseMat::from_triplets(nrows, ncols, entries)
    }

    pub fn column(&self, j: usize) -> SparseVec {
        self.rows.iter().enumerate().filter_map(|(i, _)| {
            let v = self.get(i, j);
            (!v.is_zero()).then_some((i, v))
        }).collect()
    }

    /// One `row col num/den` line per entry (zero-based indices).
    pub fn dump(&self, prefix: &str) -> String {
        let mut s = String::new();
        for (i, j, v) in self.iter() {
            let _ = writeln!(s, "{prefix}{i} {j} {}", fmt_q(v));
        }
        s
    }

    pub fn parse_entries(nrows: usize, ncols: usize, lines: &[&str]) -> Result<SparseMat, String> {
        let mut entries = Vec::new();
        for l in lines {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 3 {
                return Err(format!("bad entry line {l:?}"));
            }
            let i: usize = f[0].parse().map_err(|_| format!("bad row in {l:?}"))?;
            let j: usize = f[1].parse().map_err(|_| format!("bad col in {l:?}"))?;
            let v = parse_q(f[2]).ok_or_else(|| format!("bad value in {l:?}"))?;
            if i >= nrows || j >= ncols {
                return Err(format!("entry ({i},{j}) outside {nrows}x{ncols}"));
            }
            entries.push((i, j, v));
        }
        Ok(SparseMat::from_triplets(nrows, ncols, entries))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::q;

    #[test]
    fn mul_and_transpose() {
        let a = SparseMat::from_i64(&[&[1, 2, 0], &[0, -1, 3]]);
        let b = SparseMat::from_i64(&[&[1, 0], &[0, 1], &[2, 2]]);
        assert_eq!(a.mul(&b), SparseMat::from_i64(&[&[1, 2], &[6, 5]]));
        assert_eq!(a.transpose().transpose(), a);
        assert_eq!(a.mul_vec(&[q(1), q(1), q(1)]), vec![q(3), q(2)]);
        assert_eq!(a.vec_mul(&[q(1), q(1)]), vec![q(1), q(1), q(3)]);
    }

    #[test]
    fn kron_matches_definition() {
        let a = SparseMat::from_i64(&[&[1, 2], &[0, 3]]);
        let b = SparseMat::from_i64(&[&[0, 1], &[4, 0]]);
        let k = SparseMat::kron(&a, &b);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(k.get(i, j), a.get(i / 2, j / 2) * b.get(i % 2, j % 2));
            }
        }
    }

    #[test]
    fn submatrix_and_dump() {
        let a = SparseMat::from_i64(&[&[1, 2, 0], &[0, -1, 3]]);
        let s = a.submatrix(&[1], &[2, 1]);
        assert_eq!(s, SparseMat::from_i64(&[&[3, -1]]));
        let text = a.dump("");
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(SparseMat::parse_entries(2, 3, &lines).unwrap(), a);
    }
}
