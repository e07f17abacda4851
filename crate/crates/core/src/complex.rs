//! Bounded chain complexes over Q, chain maps, mapping complexes and homology.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::scalar::{fmt_q, parse_q, sign, Q};
use crate::sparse::{SparseMat, SparseVec};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ComplexError {
    #[error("shape mismatch at degree {degree}: expected {expected:?}, found {found:?}")]
    ShapeMismatch { degree: i32, expected: (usize, usize), found: (usize, usize) },
    #[error("d({degree_minus_one})·d({degree}) has entry ({row},{col}) = {value}", degree_minus_one = degree - 1)]
    NotAComplex { degree: i32, row: usize, col: usize, value: String },
    #[error("chain map square fails at degree {degree}: entry ({row},{col}) = {value}")]
    NotAChainMap { degree: i32, row: usize, col: usize, value: String },
    #[error("{unknowns} unknowns exceed the cap of {cap}")]
    DimensionOverflow { unknowns: usize, cap: usize },
    #[error("incompatible operands: {0}")]
    Incompatible(String),
    #[error("parse error: {0}")]
    Parse(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ChainComplex {
    dims: BTreeMap<i32, usize>,
    diffs: BTreeMap<i32, SparseMat>,
    labels: BTreeMap<i32, Vec<String>>,
}

/// Validates shapes and `d∘d = 0`.
pub fn make_complex(dims: BTreeMap<i32, usize>, diffs: BTreeMap<i32, SparseMat>) -> Result<ChainComplex, ComplexError> {
    let dim = |n: i32| dims.get(&n).copied().unwrap_or(0);
    for (&n, m) in &diffs {
        let expected = (dim(n - 1), dim(n));
        if m.shape() != expected {
            return Err(ComplexError::ShapeMismatch { degree: n, expected, found: m.shape() });
        }
    }
    for (&n, m) in &diffs {
        if let Some(below) = diffs.get(&(n - 1)) {
            if let Some((row, col, v)) = below.mul(m).first_nonzero() {
                return Err(ComplexError::NotAComplex { degree: n, row, col, value: v.to_string() });
            }
        }
    }
    let diffs = diffs.into_iter().filter(|(_, m)| !m.is_zero()).collect();
    Ok(ChainComplex { dims, diffs, labels: BTreeMap::new() })
}

impl ChainComplex {
    pub fn zero() -> Self {
        ChainComplex::default()
    }

    /// The ground field in degree `k`.
    pub fn ground(k: i32) -> Self {
        ChainComplex { dims: BTreeMap::from([(k, 1)]), ..Default::default() }
    }

    pub fn unit() -> Self {
        Self::ground(0)
    }

    pub fn with_labels(mut self, labels: BTreeMap<i32, Vec<String>>) -> Self {
        self.labels = labels;
        self
    }

    pub fn labels(&self, n: i32) -> Option<&[String]> {
        self.labels.get(&n).map(|v| v.as_slice())
    }

    pub fn degrees(&self) -> Vec<i32> {
        self.dims.keys().copied().collect()
    }

    /// Degrees carrying a nonzero space.
    pub fn support(&self) -> Vec<i32> {
        self.dims.iter().filter(|(_, &d)| d > 0).map(|(&n, _)| n).collect()
    }

    pub fn dims(&self) -> &BTreeMap<i32, usize> {
        &self.dims
    }

    pub fn dim(&self, n: i32) -> usize {
        self.dims.get(&n).copied().unwrap_or(0)
    }

    pub fn total_dim(&self) -> usize {
        self.dims.values().sum()
    }

    /// `d_n : C_n → C_{n-1}`.
    pub fn diff(&self, n: i32) -> SparseMat {
        self.diffs.get(&n).cloned().unwrap_or_else(|| SparseMat::zeros(self.dim(n - 1), self.dim(n)))
    }

    pub fn diff_ref(&self, n: i32) -> Option<&SparseMat> {
        self.diffs.get(&n)
    }

    pub fn min_degree(&self) -> Option<i32> {
        self.support().first().copied()
    }

    pub fn max_degree(&self) -> Option<i32> {
        self.support().last().copied()
    }

    /// Checks `d∘d = 0` again; used on complexes assembled without validation.
    pub fn validate(&self) -> Result<(), ComplexError> {
        make_complex(self.dims.clone(), self.diffs.clone()).map(|_| ())
    }

    pub(crate) fn from_parts_unchecked(dims: BTreeMap<i32, usize>, diffs: BTreeMap<i32, SparseMat>) -> Self {
        let diffs = diffs.into_iter().filter(|(_, m)| !m.is_zero()).collect();
        ChainComplex { dims, diffs, labels: BTreeMap::new() }
    }
}

/// `C[p]_n = C_{n-p}` with differential `(-1)^p d`.
pub fn shift(c: &ChainComplex, p: i32) -> ChainComplex {
    let s = sign(p as i64);
    let dims = c.dims.iter().map(|(&n, &d)| (n + p, d)).collect();
    let diffs = c.diffs.iter().map(|(&n, m)| (n + p, m.scale(&s))).collect();
    let labels = c.labels.iter().map(|(&n, l)| (n + p, l.clone())).collect();
    ChainComplex { dims, diffs, labels }
}

/// Block placement in a degree of a direct sum or tensor product.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectSum {
    pub complex: ChainComplex,
    /// `offsets[k][n]` is where summand k starts in degree n.
    pub offsets: Vec<BTreeMap<i32, usize>>,
}

pub fn direct_sum(parts: &[&ChainComplex]) -> DirectSum {
    let mut degs: Vec<i32> = parts.iter().flat_map(|p| p.degrees()).collect();
    degs.sort_unstable();
    degs.dedup();
    let mut offsets = vec![BTreeMap::new(); parts.len()];
    let mut dims = BTreeMap::new();
    for &n in &degs {
        let mut off = 0;
        for (k, p) in parts.iter().enumerate() {
            offsets[k].insert(n, off);
            off += p.dim(n);
        }
        dims.insert(n, off);
    }
    let mut diffs = BTreeMap::new();
    for &n in &degs {
        let rows = dims.get(&(n - 1)).copied().unwrap_or(0);
        let blocks: Vec<(usize, usize, SparseMat)> = parts
            .iter()
            .enumerate()
            .map(|(k, p)| (offsets[k].get(&(n - 1)).copied().unwrap_or(0), offsets[k][&n], p.diff(n)))
            .collect();
        let refs: Vec<(usize, usize, &SparseMat)> = blocks.iter().map(|(a, b, m)| (*a, *b, m)).collect();
        diffs.insert(n, SparseMat::assemble(rows, dims[&n], &refs));
    }
    DirectSum { complex: ChainComplex::from_parts_unchecked(dims, diffs), offsets }
}

/// Basis of `(V⊗W)_n` ordered by `m` ascending, then `(i, j)` row-major with `i ∈ V_m`, `j ∈ W_{n-m}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorLayout {
    /// Per degree: `(m, offset, dim V_m, dim W_{n-m})`.
    pub blocks: BTreeMap<i32, Vec<(i32, usize, usize, usize)>>,
}

impl TensorLayout {
    pub fn index(&self, n: i32, m: i32, i: usize, j: usize) -> Option<usize> {
        let b = self.blocks.get(&n)?.iter().find(|b| b.0 == m)?;
        (i < b.2 && j < b.3).then(|| b.1 + i * b.3 + j)
    }

    /// Inverse of [`TensorLayout::index`].
    pub fn locate(&self, n: i32, idx: usize) -> Option<(i32, usize, usize)> {
        let b = self.blocks.get(&n)?.iter().find(|b| idx >= b.1 && idx < b.1 + b.2 * b.3)?;
        let r = idx - b.1;
        Some((b.0, r / b.3, r % b.3))
    }
}

#[derive(Clone, Debug)]
pub struct Tensor {
    pub complex: ChainComplex,
    pub layout: TensorLayout,
}

fn tensor_layout(v: &ChainComplex, w: &ChainComplex) -> (BTreeMap<i32, usize>, TensorLayout) {
    let (vs, ws) = (v.support(), w.support());
    let mut dims = BTreeMap::new();
    let mut blocks: BTreeMap<i32, Vec<(i32, usize, usize, usize)>> = BTreeMap::new();
    if let (Some(&vl), Some(&vh), Some(&wl), Some(&wh)) = (vs.first(), vs.last(), ws.first(), ws.last()) {
        for n in vl + wl..=vh + wh {
            let mut off = 0;
            let mut bl = Vec::new();
            for &m in &vs {
                let (a, b) = (v.dim(m), w.dim(n - m));
                if a * b > 0 {
                    bl.push((m, off, a, b));
                    off += a * b;
                }
            }
            dims.insert(n, off);
            blocks.insert(n, bl);
        }
    }
    (dims, TensorLayout { blocks })
}

/// Koszul differential `d(v⊗w) = dv⊗w + (-1)^m v⊗dw`.
pub fn tensor(v: &ChainComplex, w: &ChainComplex) -> Tensor {
    let (dims, layout) = tensor_layout(v, w);
    let mut diffs = BTreeMap::new();
    for (&n, bl) in &layout.blocks {
        let rows = dims.get(&(n - 1)).copied().unwrap_or(0);
        let mut entries = Vec::new();
        for &(m, off, a, b) in bl {
            let dv = v.diff(m);
            let dw = w.diff(n - m);
            if let Some(&(_, o2, _, b2)) = layout.blocks.get(&(n - 1)).and_then(|x| x.iter().find(|x| x.0 == m - 1)) {
                for (r, c, x) in dv.iter() {
                    for j in 0..b {
                        entries.push((o2 + r * b2 + j, off + c * b + j, x.clone()));
                    }
                }
            }
            if let Some(&(_, o2, _, b2)) = layout.blocks.get(&(n - 1)).and_then(|x| x.iter().find(|x| x.0 == m)) {
                let s = sign(m as i64);
                for (r, c, x) in dw.iter() {
                    for i in 0..a {
                        entries.push((o2 + i * b2 + r, off + i * b + c, &s * x));
                    }
                }
            }
        }
        diffs.insert(n, SparseMat::from_triplets(rows, dims[&n], entries));
    }
    Tensor { complex: ChainComplex::from_parts_unchecked(dims, diffs), layout }
}

/// `γ(v⊗w) = (-1)^{|v||w|} w⊗v` as a chain map `V⊗W → W⊗V`.
pub fn braiding(v: &ChainComplex, w: &ChainComplex) -> ChainMap {
    let vw = tensor(v, w);
    let wv = tensor(w, v);
    let mut comps = BTreeMap::new();
    for (&n, bl) in &vw.layout.blocks {
        let mut entries = Vec::new();
        for &(m, off, a, b) in bl {
            let s = sign(m as i64 * (n - m) as i64);
            for i in 0..a {
                for j in 0..b {
                    let tgt = wv.layout.index(n, n - m, j, i).expect("braiding block");
                    entries.push((tgt, off + i * b + j, s.clone()));
                }
            }
        }
        comps.insert(n, SparseMat::from_triplets(wv.complex.dim(n), vw.complex.dim(n), entries));
    }
    ChainMap::new_unchecked(Arc::new(vw.complex), Arc::new(wv.complex), comps)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainMap {
    pub source: Arc<ChainComplex>,
    pub target: Arc<ChainComplex>,
    components: BTreeMap<i32, SparseMat>,
}

fn check_component_shapes(
    source: &ChainComplex,
    target: &ChainComplex,
    k: i32,
    comps: &BTreeMap<i32, SparseMat>,
) -> Result<(), ComplexError> {
    for (&m, c) in comps {
        let expected = (target.dim(m + k), source.dim(m));
        if c.shape() != expected {
            return Err(ComplexError::ShapeMismatch { degree: m, expected, found: c.shape() });
        }
    }
    Ok(())
}

impl ChainMap {
    pub fn new(
        source: Arc<ChainComplex>,
        target: Arc<ChainComplex>,
        components: BTreeMap<i32, SparseMat>,
    ) -> Result<Self, ComplexError> {
        let f = Self::new_unchecked(source, target, components);
        check_component_shapes(&f.source, &f.target, 0, &f.components)?;
        f.check()?;
        Ok(f)
    }

    pub fn new_unchecked(source: Arc<ChainComplex>, target: Arc<ChainComplex>, components: BTreeMap<i32, SparseMat>) -> Self {
        let components = components.into_iter().filter(|(_, m)| !m.is_zero()).collect();
        ChainMap { source, target, components }
    }

    pub fn identity(c: Arc<ChainComplex>) -> Self {
        let comps = c.support().into_iter().map(|n| (n, SparseMat::identity(c.dim(n)))).collect();
        ChainMap { source: c.clone(), target: c, components: comps }
    }

    pub fn zero(source: Arc<ChainComplex>, target: Arc<ChainComplex>) -> Self {
        ChainMap { source, target, components: BTreeMap::new() }
    }

    pub fn component(&self, n: i32) -> SparseMat {
        self.components
            .get(&n)
            .cloned()
            .unwrap_or_else(|| SparseMat::zeros(self.target.dim(n), self.source.dim(n)))
    }

    pub fn components(&self) -> &BTreeMap<i32, SparseMat> {
        &self.components
    }

    /// `d_T f_n = f_{n-1} d_S` for every degree.
    pub fn check(&self) -> Result<(), ComplexError> {
        let mut degs: Vec<i32> = self.source.support();
        degs.extend(self.target.support().iter().map(|n| n + 1));
        degs.sort_unstable();
        degs.dedup();
        for n in degs {
            let lhs = self.target.diff(n).mul(&self.component(n));
            let rhs = self.component(n - 1).mul(&self.source.diff(n));
            if let Some((row, col, v)) = lhs.sub(&rhs).first_nonzero() {
                return Err(ComplexError::NotAChainMap { degree: n, row, col, value: v.to_string() });
            }
        }
        Ok(())
    }

    /// `self ∘ g`.
    pub fn compose(&self, g: &ChainMap) -> ChainMap {
        let comps = g
            .components
            .iter()
            .map(|(&n, m)| (n, self.component(n).mul(m)))
            .collect();
        ChainMap::new_unchecked(g.source.clone(), self.target.clone(), comps)
    }

    pub fn as_chain(&self) -> MapChain {
        MapChain::new_unchecked(self.source.clone(), self.target.clone(), 0, self.components.clone())
    }
}

/// A degree-k element of `hom(V, W)`: components `L_m : V_m → W_{m+k}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MapChain {
    pub source: Arc<ChainComplex>,
    pub target: Arc<ChainComplex>,
    pub degree: i32,
    components: BTreeMap<i32, SparseMat>,
}

impl MapChain {
    pub fn new(
        source: Arc<ChainComplex>,
        target: Arc<ChainComplex>,
        degree: i32,
        components: BTreeMap<i32, SparseMat>,
    ) -> Result<Self, ComplexError> {
        check_component_shapes(&source, &target, degree, &components)?;
        Ok(Self::new_unchecked(source, target, degree, components))
    }

    pub fn new_unchecked(
        source: Arc<ChainComplex>,
        target: Arc<ChainComplex>,
        degree: i32,
        components: BTreeMap<i32, SparseMat>,
    ) -> Self {
        let components = components.into_iter().filter(|(_, m)| !m.is_zero()).collect();
        MapChain { source, target, degree, components }
    }

    pub fn zero(source: Arc<ChainComplex>, target: Arc<ChainComplex>, degree: i32) -> Self {
        MapChain { source, target, degree, components: BTreeMap::new() }
    }

    pub fn identity(c: Arc<ChainComplex>) -> Self {
        ChainMap::identity(c).as_chain()
    }

    pub fn component(&self, m: i32) -> SparseMat {
        self.components
            .get(&m)
            .cloned()
            .unwrap_or_else(|| SparseMat::zeros(self.target.dim(m + self.degree), self.source.dim(m)))
    }

    pub fn components(&self) -> &BTreeMap<i32, SparseMat> {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components.is_empty()
    }

    /// First nonzero entry as `(m, row, col, value)`.
    pub fn first_nonzero(&self) -> Option<(i32, usize, usize, Q)> {
        self.components
            .iter()
            .find_map(|(&m, c)| c.first_nonzero().map(|(i, j, v)| (m, i, j, v)))
    }

    fn same_space(&self, o: &MapChain) {
        assert!(
            self.degree == o.degree && self.source == o.source && self.target == o.target,
            "map chains live in different hom spaces"
        );
    }

    pub fn add_scaled(&self, s: &Q, o: &MapChain) -> MapChain {
        self.same_space(o);
        let mut comps = self.components.clone();
        for (&m, c) in &o.components {
            let cur = self.component(m);
            comps.insert(m, cur.add_scaled(s, c));
        }
        MapChain::new_unchecked(self.source.clone(), self.target.clone(), self.degree, comps)
    }

    pub fn add(&self, o: &MapChain) -> MapChain {
        self.add_scaled(&Q::one(), o)
    }

    pub fn sub(&self, o: &MapChain) -> MapChain {
        self.add_scaled(&-Q::one(), o)
    }

    pub fn scale(&self, s: &Q) -> MapChain {
        let comps = self.components.iter().map(|(&m, c)| (m, c.scale(s))).collect();
        MapChain::new_unchecked(self.source.clone(), self.target.clone(), self.degree, comps)
    }

    /// `(∂L)_m = d L_m − (−1)^k L_{m−1} d`.
    pub fn boundary(&self) -> MapChain {
        let k = self.degree;
        let s = sign(k as i64);
        let mut degs: Vec<i32> = self.source.support();
        degs.dedup();
        let comps = degs
            .into_iter()
            .map(|m| {
                let a = self.target.diff(m + k).mul(&self.component(m));
                let b = self.component(m - 1).mul(&self.source.diff(m));
                (m, a.add_scaled(&-&s, &b))
            })
            .collect();
        MapChain::new_unchecked(self.source.clone(), self.target.clone(), k - 1, comps)
    }

    /// `self ∘ g`, of degree `|self| + |g|`.
    pub fn compose(&self, g: &MapChain) -> MapChain {
        let comps = g
            .components
            .iter()
            .map(|(&m, c)| (m, self.component(m + g.degree).mul(c)))
            .collect();
        MapChain::new_unchecked(g.source.clone(), self.target.clone(), self.degree + g.degree, comps)
    }

    /// The identification `hom(V,W)[p] ≅ hom(V, W[p])`: same components, degree raised by `p`.
    pub fn into_shifted_target(&self, p: i32) -> MapChain {
        let t = Arc::new(shift(&self.target, p));
        MapChain::new_unchecked(self.source.clone(), t, self.degree + p, self.components.clone())
    }

    /// Inverse of [`MapChain::into_shifted_target`] given the unshifted target.
    pub fn from_shifted_target(&self, unshifted: Arc<ChainComplex>, p: i32) -> MapChain {
        MapChain::new_unchecked(self.source.clone(), unshifted, self.degree - p, self.components.clone())
    }

    pub fn to_chain_map(&self) -> Result<ChainMap, ComplexError> {
        if self.degree != 0 {
            return Err(ComplexError::Incompatible(format!("degree {} chain is not a chain map", self.degree)));
        }
        ChainMap::new(self.source.clone(), self.target.clone(), self.components.clone())
    }
}

/// Block structure of `hom(V,W)_n`: `(m, offset, dim W_{m+n}, dim V_m)`, entries row-major.
pub fn hom_layout(v: &ChainComplex, w: &ChainComplex, n: i32) -> Vec<(i32, usize, usize, usize)> {
    let mut off = 0;
    let mut out = Vec::new();
    for m in v.support() {
        let (r, c) = (w.dim(m + n), v.dim(m));
        if r * c > 0 {
            out.push((m, off, r, c));
            off += r * c;
        }
    }
    out
}

pub fn hom_dim(v: &ChainComplex, w: &ChainComplex, n: i32) -> usize {
    hom_layout(v, w, n).iter().map(|b| b.2 * b.3).sum()
}

pub fn hom_degree_range(v: &ChainComplex, w: &ChainComplex) -> Option<(i32, i32)> {
    Some((w.min_degree()? - v.max_degree()?, w.max_degree()? - v.min_degree()?))
}

pub fn chain_to_vec(l: &MapChain) -> Vec<Q> {
    let lay = hom_layout(&l.source, &l.target, l.degree);
    let mut out = vec![Q::zero(); lay.iter().map(|b| b.2 * b.3).sum()];
    for &(m, off, _, c) in &lay {
        if let Some(comp) = l.components.get(&m) {
            for (i, j, x) in comp.iter() {
                out[off + i * c + j] = x.clone();
            }
        }
    }
    out
}

pub fn vec_to_chain(v: Arc<ChainComplex>, w: Arc<ChainComplex>, n: i32, x: &[Q]) -> MapChain {
    let lay = hom_layout(&v, &w, n);
    let comps = lay
        .iter()
        .map(|&(m, off, r, c)| {
            let entries = (0..r * c)
                .filter(|k| !x[off + k].is_zero())
                .map(|k| (k / c, k % c, x[off + k].clone()));
            (m, SparseMat::from_triplets(r, c, entries))
        })
        .collect();
    MapChain::new_unchecked(v, w, n, comps)
}

/// The matrix of `∂ : hom(V,W)_n → hom(V,W)_{n-1}` in the [`hom_layout`] bases.
pub fn hom_boundary_matrix(v: &ChainComplex, w: &ChainComplex, n: i32) -> SparseMat {
    let src = hom_layout(v, w, n);
    let tgt = hom_layout(v, w, n - 1);
    let rows = tgt.iter().map(|b| b.2 * b.3).sum();
    let cols = src.iter().map(|b| b.2 * b.3).sum();
    let s = sign(n as i64);
    let mut blocks: Vec<(usize, usize, SparseMat)> = Vec::new();
    for &(m, toff, tr, _) in &tgt {
        // d_W L_m with L_m in the source block of the same m.
        if let Some(&(_, soff, _, sc)) = src.iter().find(|b| b.0 == m) {
            let a = w.diff(m + n);
            blocks.push((toff, soff, SparseMat::kron(&a, &SparseMat::identity(sc))));
        }
        // −(−1)^n L_{m−1} d_V.
        if let Some(&(_, soff, sr, _)) = src.iter().find(|b| b.0 == m - 1) {
            let b = v.diff(m).transpose();
            debug_assert_eq!(sr, tr);
            blocks.push((toff, soff, SparseMat::kron(&SparseMat::identity(sr), &b).scale(&-&s)));
        }
    }
    let refs: Vec<(usize, usize, &SparseMat)> = blocks.iter().map(|(a, b, m)| (*a, *b, m)).collect();
    SparseMat::assemble(rows, cols, &refs)
}

/// The full mapping complex `hom(V, W)`.
pub fn mapping_complex(v: &ChainComplex, w: &ChainComplex) -> ChainComplex {
    let Some((lo, hi)) = hom_degree_range(v, w) else { return ChainComplex::zero() };
    let dims: BTreeMap<i32, usize> = (lo..=hi).map(|n| (n, hom_dim(v, w, n))).collect();
    let diffs = (lo + 1..=hi).map(|n| (n, hom_boundary_matrix(v, w, n))).collect();
    ChainComplex::from_parts_unchecked(dims, diffs)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomologyReport {
    pub ranks: BTreeMap<i32, usize>,
    #[serde(skip)]
    pub cycle_bases: Option<BTreeMap<i32, Vec<SparseVec>>>,
}

impl HomologyReport {
    pub fn rank(&self, n: i32) -> usize {
        self.ranks.get(&n).copied().unwrap_or(0)
    }
}

pub fn diff_ranks(c: &ChainComplex, rank: impl Fn(&SparseMat) -> usize) -> BTreeMap<i32, usize> {
    c.diffs.iter().map(|(&n, m)| (n, rank(m))).collect()
}

fn ranks_from(c: &ChainComplex, dr: &BTreeMap<i32, usize>) -> BTreeMap<i32, usize> {
    c.degrees()
        .into_iter()
        .map(|n| {
            let r = dr.get(&n).copied().unwrap_or(0) + dr.get(&(n + 1)).copied().unwrap_or(0);
            (n, c.dim(n) - r)
        })
        .collect()
}

/// `rank H_n = dim C_n − rank d_n − rank d_{n+1}` by sparse exact elimination.
pub fn homology_ranks(c: &ChainComplex) -> HomologyReport {
    HomologyReport { ranks: ranks_from(c, &diff_ranks(c, linalg::rank)), cycle_bases: None }
}

/// Same ranks computed by dense fraction-free Bareiss elimination.
pub fn homology_ranks_bareiss(c: &ChainComplex) -> HomologyReport {
    HomologyReport { ranks: ranks_from(c, &diff_ranks(c, linalg::rank_bareiss)), cycle_bases: None }
}

pub fn homology_with_cycles(c: &ChainComplex) -> HomologyReport {
    let mut rep = homology_ranks(c);
    let bases = c.degrees().into_iter().map(|n| (n, cycles(c, n))).collect();
    rep.cycle_bases = Some(bases);
    rep
}

pub fn cycles(c: &ChainComplex, n: i32) -> Vec<SparseVec> {
    match c.diffs.get(&n) {
        Some(d) => linalg::kernel(d),
        None => (0..c.dim(n)).map(|i| vec![(i, Q::one())]).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InducedRank {
    pub source_rank: usize,
    pub target_rank: usize,
    pub induced_rank: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuasiIsoReport {
    pub is_quasi_iso: bool,
    pub degrees: BTreeMap<i32, InducedRank>,
}

fn sparse_mat_vec(m: &SparseMat, v: &[(usize, Q)]) -> SparseVec {
    let mut acc: BTreeMap<usize, Q> = BTreeMap::new();
    let t = m.transpose();
    for (j, x) in v {
        for (i, a) in t.row(*j) {
            *acc.entry(*i).or_insert_with(Q::zero) += a * x;
        }
    }
    acc.into_iter().filter(|(_, v)| !v.is_zero()).collect()
}

/// Rank of the induced map on `H_n`: `rank[B_T | f Z_S] − rank B_T`.
pub fn induced_rank(f: &ChainMap, n: i32) -> usize {
    let z = cycles(&f.source, n);
    let fnm = f.component(n);
    let bt: Vec<SparseVec> = f.target.diff(n + 1).transpose().rows().to_vec();
    let rb = linalg::rank_rows(f.target.dim(n), bt.clone());
    let mut all = bt;
    all.extend(z.iter().map(|v| sparse_mat_vec(&fnm, v)));
    linalg::rank_rows(f.target.dim(n), all) - rb
}

pub fn is_quasi_iso(f: &ChainMap) -> QuasiIsoReport {
    let hs = homology_ranks(&f.source);
    let ht = homology_ranks(&f.target);
    let mut degs: Vec<i32> = f.source.degrees();
    degs.extend(f.target.degrees());
    degs.sort_unstable();
    degs.dedup();
    let mut ok = true;
    let mut out = BTreeMap::new();
    for n in degs {
        let (s, t) = (hs.rank(n), ht.rank(n));
        let r = if s == 0 || t == 0 { 0 } else { induced_rank(f, n) };
        ok &= s == t && r == s;
        out.insert(n, InducedRank { source_rank: s, target_rank: t, induced_rank: r });
    }
    QuasiIsoReport { is_quasi_iso: ok, degrees: out }
}

/// Some `λ` of degree `k+1` with `∂λ = target`, or `None` if `target` is not a boundary.
pub fn solve_boundary(target: &MapChain, cap: usize) -> Result<Option<MapChain>, ComplexError> {
    let (v, w, k) = (&target.source, &target.target, target.degree);
    let unknowns = hom_dim(v, w, k + 1);
    if unknowns > cap {
        return Err(ComplexError::DimensionOverflow { unknowns, cap });
    }
    let a = hom_boundary_matrix(v, w, k + 1);
    let b = chain_to_vec(target);
    Ok(linalg::solve(&a, &b).map(|x| vec_to_chain(v.clone(), w.clone(), k + 1, &x)))
}

/// A degree-1 `λ` with `∂λ = f − g`.
pub fn find_homotopy(f: &ChainMap, g: &ChainMap, cap: usize) -> Result<Option<MapChain>, ComplexError> {
    if f.source != g.source || f.target != g.target {
        return Err(ComplexError::Incompatible("homotopy between maps with different ends".into()));
    }
    solve_boundary(&f.as_chain().sub(&g.as_chain()), cap)
}

#[derive(Serialize, Deserialize)]
struct ComplexDoc {
    degrees: Vec<i32>,
    dims: BTreeMap<i32, usize>,
    diffs: BTreeMap<i32, Vec<(usize, usize, String)>>,
}

impl ChainComplex {
    pub fn to_json(&self) -> serde_json::Value {
        let doc = ComplexDoc {
            degrees: self.degrees(),
            dims: self.dims.clone(),
            diffs: self
                .diffs
                .iter()
                .map(|(&n, m)| (n, m.iter().map(|(i, j, v)| (i, j, fmt_q(v))).collect()))
                .collect(),
        };
        serde_json::to_value(doc).expect("complex serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<ChainComplex, ComplexError> {
        let doc: ComplexDoc = serde_json::from_value(v.clone()).map_err(|e| ComplexError::Parse(e.to_string()))?;
        let mut dims: BTreeMap<i32, usize> = doc.degrees.iter().map(|&n| (n, 0)).collect();
        dims.extend(doc.dims);
        let dim = |n: i32| dims.get(&n).copied().unwrap_or(0);
        let mut diffs = BTreeMap::new();
        for (n, es) in doc.diffs {
            let mut entries = Vec::new();
            for (i, j, s) in es {
                let x = parse_q(&s).ok_or_else(|| ComplexError::Parse(format!("bad rational {s:?}")))?;
                if i >= dim(n - 1) || j >= dim(n) {
                    return Err(ComplexError::ShapeMismatch { degree: n, expected: (dim(n - 1), dim(n)), found: (i + 1, j + 1) });
                }
                entries.push((i, j, x));
            }
            diffs.insert(n, SparseMat::from_triplets(dim(n - 1), dim(n), entries));
        }
        make_complex(dims, diffs)
    }

    /// Text dump, one `degree row col num/den` line per differential entry.
    pub fn dump_diffs(&self) -> String {
        self.diffs.iter().map(|(n, m)| m.dump(&format!("{n} "))).collect()
    }

    pub fn parse_diffs(dims: BTreeMap<i32, usize>, text: &str) -> Result<ChainComplex, ComplexError> {
        let dim = |n: i32| dims.get(&n).copied().unwrap_or(0);
        let mut per: BTreeMap<i32, Vec<&str>> = BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (n, rest) = line.split_once(char::is_whitespace).ok_or_else(|| ComplexError::Parse(line.into()))?;
            let n: i32 = n.parse().map_err(|_| ComplexError::Parse(line.into()))?;
            per.entry(n).or_default().push(rest);
        }
        let mut diffs = BTreeMap::new();
        for (n, lines) in per {
            let m = SparseMat::parse_entries(dim(n - 1), dim(n), &lines).map_err(ComplexError::Parse)?;
            diffs.insert(n, m);
        }
        make_complex(dims, diffs)
    }
}

pub mod random {
    //! Random complexes with prescribed homology, for property tests.

    use super::*;
    use rand::Rng;

    /// Dense unimodular-by-construction change of basis and its inverse.
    fn random_basis_change<R: Rng>(rng: &mut R, n: usize) -> (SparseMat, SparseMat) {
        let mut a: Vec<Vec<Q>> = (0..n).map(|i| (0..n).map(|j| if i == j { Q::one() } else { Q::zero() }).collect()).collect();
        let mut inv = a.clone();
        if n < 2 {
            return (SparseMat::from_dense(&a, n), SparseMat::from_dense(&inv, n));
        }
        for _ in 0..2 * n {
            let i = rng.gen_range(0..n);
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let c = crate::scalar::q(rng.gen_range(-2..=2));
            // row_j += c row_i on a; inverse gets column_i -= c column_j.
            for k in 0..n {
                let t = &a[i][k] * &c;
                a[j][k] += t;
            }
            for row in inv.iter_mut() {
                let t = &row[j] * &c;
                row[i] -= t;
            }
        }
        (SparseMat::from_dense(&a, n), SparseMat::from_dense(&inv, n))
    }

    /// A random complex on degrees `lo..=hi` with `dim ≤ max_dim`.
    /// Returns it together with its homology ranks by construction.
    pub fn random_complex<R: Rng>(rng: &mut R, lo: i32, hi: i32, max_dim: usize) -> (ChainComplex, BTreeMap<i32, usize>) {
        let dims: BTreeMap<i32, usize> = (lo..=hi).map(|n| (n, rng.gen_range(0..=max_dim))).collect();
        // rank of d_n, chosen from the top degree down.
        let mut rk: BTreeMap<i32, usize> = BTreeMap::new();
        for n in (lo + 1..=hi).rev() {
            let avail_src = dims[&n] - rk.get(&(n + 1)).copied().unwrap_or(0);
            let r = rng.gen_range(0..=avail_src.min(dims[&(n - 1)]));
            rk.insert(n, r);
        }
        let r = |n: i32| rk.get(&n).copied().unwrap_or(0);
        let homology = dims.iter().map(|(&n, &d)| (n, d - r(n) - r(n + 1))).collect();
        // Basis of degree n: [targets of d_{n+1} | sources of d_n | free].
        let changes: BTreeMap<i32, (SparseMat, SparseMat)> =
            dims.iter().map(|(&n, &d)| (n, random_basis_change(rng, d))).collect();
        let mut diffs = BTreeMap::new();
        for n in lo + 1..=hi {
            let e = SparseMat::from_triplets(
                dims[&(n - 1)],
                dims[&n],
                (0..r(n)).map(|k| (k, r(n + 1) + k, Q::one())),
            );
            let d = changes[&(n - 1)].0.mul(&e).mul(&changes[&n].1);
            diffs.insert(n, d);
        }
        (make_complex(dims, diffs).expect("random complex is valid"), homology)
    }

    pub fn random_sparse<R: Rng>(rng: &mut R, r: usize, c: usize, density: f64) -> SparseMat {
        let mut entries = Vec::new();
        for i in 0..r {
            for j in 0..c {
                if rng.gen_bool(density) {
                    entries.push((i, j, crate::scalar::qf(rng.gen_range(-3..=3), rng.gen_range(1..=2))));
                }
            }
        }
        SparseMat::from_triplets(r, c, entries)
    }

    pub fn random_map_chain<R: Rng>(rng: &mut R, v: Arc<ChainComplex>, w: Arc<ChainComplex>, k: i32) -> MapChain {
        let comps = v
            .support()
            .into_iter()
            .map(|m| (m, random_sparse(rng, w.dim(m + k), v.dim(m), 0.5)))
            .collect();
        MapChain::new_unchecked(v, w, k, comps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d_complex() -> ChainComplex {
        make_complex(BTreeMap::from([(0, 1), (-1, 1)]), BTreeMap::from([(0, SparseMat::from_i64(&[&[1]]))])).unwrap()
    }

    #[test]
    fn not_a_complex() {
        let one = SparseMat::from_i64(&[&[1]]);
        let e = make_complex(BTreeMap::from([(1, 1), (0, 1), (-1, 1)]), BTreeMap::from([(1, one.clone()), (0, one)]));
        assert!(matches!(e, Err(ComplexError::NotAComplex { degree: 1, row: 0, col: 0, .. })));
    }

    #[test]
    fn shift_of_d() {
        let s = shift(&d_complex(), 1);
        assert_eq!(s.dims(), &BTreeMap::from([(1, 1), (0, 1)]));
        assert_eq!(s.diff(1), SparseMat::from_i64(&[&[-1]]));
        assert_eq!(shift(&s, -1), d_complex());
    }

    #[test]
    fn tensor_d_d() {
        let t = tensor(&d_complex(), &d_complex());
        assert_eq!(t.complex.dims(), &BTreeMap::from([(-2, 1), (-1, 2), (0, 1)]));
        t.complex.validate().unwrap();
        let g = braiding(&d_complex(), &d_complex());
        g.check().unwrap();
        assert_eq!(g.compose(&g), ChainMap::identity(g.source.clone()));
    }

    #[test]
    fn hom_of_d() {
        let h = mapping_complex(&d_complex(), &d_complex());
        assert_eq!(h.dims(), &BTreeMap::from([(-1, 1), (0, 2), (1, 1)]));
        h.validate().unwrap();
        assert!(homology_ranks(&h).ranks.values().all(|&r| r == 0));
    }

    #[test]
    fn homology_small() {
        let c = make_complex(BTreeMap::from([(0, 2), (-1, 1)]), BTreeMap::from([(0, SparseMat::from_i64(&[&[1, 0]]))])).unwrap();
        let h = homology_ranks(&c);
        assert_eq!((h.rank(0), h.rank(-1)), (1, 0));
    }

    #[test]
    fn homotopies_on_d() {
        let d = Arc::new(d_complex());
        let id = ChainMap::identity(d.clone());
        let zero = ChainMap::zero(d.clone(), d.clone());
        let l = find_homotopy(&id, &zero, 100).unwrap().unwrap();
        assert_eq!(l.boundary(), id.as_chain());
        let u = Arc::new(ChainComplex::unit());
        let r = find_homotopy(&ChainMap::identity(u.clone()), &ChainMap::zero(u.clone(), u), 100).unwrap();
        assert!(r.is_none());
        assert!(matches!(find_homotopy(&id, &zero, 0), Err(ComplexError::DimensionOverflow { .. })));
    }

    #[test]
    fn quasi_iso_cases() {
        let d = Arc::new(d_complex());
        assert!(is_quasi_iso(&ChainMap::identity(d.clone())).is_quasi_iso);
        let z = Arc::new(ChainComplex::zero());
        assert!(is_quasi_iso(&ChainMap::zero(d.clone(), z)).is_quasi_iso);
        let one = || BTreeMap::from([(0, SparseMat::from_i64(&[&[1]]))]);
        assert!(ChainMap::new(Arc::new(ChainComplex::ground(0)), d.clone(), one()).is_err());
        let bottom = BTreeMap::from([(-1, SparseMat::from_i64(&[&[1]]))]);
        let inc = ChainMap::new(Arc::new(ChainComplex::ground(-1)), d.clone(), bottom).unwrap();
        let rep = is_quasi_iso(&inc);
        assert!(!rep.is_quasi_iso);
        assert_eq!(rep.degrees[&-1].source_rank, 1);
        let proj = ChainMap::new(d, Arc::new(ChainComplex::ground(0)), one()).unwrap();
        assert!(!is_quasi_iso(&proj).is_quasi_iso);
    }

    #[test]
    fn json_and_dump_roundtrip() {
        let d = d_complex();
        assert_eq!(ChainComplex::from_json(&d.to_json()).unwrap(), d);
        let txt = d.dump_diffs();
        assert_eq!(txt.trim(), "0 0 0 1/1");
        assert_eq!(ChainComplex::parse_diffs(d.dims().clone(), &txt).unwrap(), d);
    }
}
