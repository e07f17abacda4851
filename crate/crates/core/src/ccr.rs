//! CCR differential graded ∗-algebras by normal-order rewriting, the Heisenberg dg-Lie algebra,
//! the zig-zag object relating two homotopic Poisson structures, and word-length filtration
//! stage certificates.
//!
//! Generators are the basis of the generator complex, ordered by homological degree ascending
//! and then by basis index. A normal word is weakly increasing with no repeated odd letter.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_traits::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::{direct_sum, is_quasi_iso, make_complex, ChainComplex, ChainMap, QuasiIsoReport};
use crate::linalg::{self, Echelon, Field, Fp};
use crate::report::Check;
use crate::scalar::{qf, Gauss, Q};
use crate::sparse::SparseMat;
use crate::theory::BilinearForm;

pub type Word = Vec<u32>;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CcrError {
    #[error("pairing is not graded antisymmetric: {0}")]
    NotAntisymmetric(String),
    #[error("pairing is not a chain map: {0}")]
    NotAChainMap(String),
    #[error("word of length {len} exceeds the cap {cap}")]
    CapExceeded { len: usize, cap: usize },
    #[error("malformed element text: {0}")]
    Parse(String),
    #[error("stage certificate does not apply: {0}")]
    Certificate(String),
}

/// Rule for `(ab)*` on products.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InvolutionRule {
    /// `(ab)* = (−1)^{|a||b|} b* a*`.
    Koszul,
    /// `(ab)* = b* a*`.
    Plain,
}

/// Which out-of-order pair the rewriter resolves first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Leftmost,
    Rightmost,
}

/// Finite combination of words with Gaussian-rational coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Element {
    terms: BTreeMap<Word, Gauss>,
}

impl Element {
    pub fn zero() -> Element {
        Element::default()
    }
    pub fn one() -> Element {
        Element::scalar(Gauss::one())
    }
    pub fn scalar(c: Gauss) -> Element {
        Element::term(Vec::new(), c)
    }
    pub fn term(w: Word, c: Gauss) -> Element {
        let mut e = Element::zero();
        e.add_term(w, &c);
        e
    }
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn terms(&self) -> &BTreeMap<Word, Gauss> {
        &self.terms
    }
    pub fn coeff(&self, w: &[u32]) -> Gauss {
        self.terms.get(w).cloned().unwrap_or_else(Gauss::zero)
    }
    pub fn max_len(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }
    pub fn add_term(&mut self, w: Word, c: &Gauss) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(w) {
            Entry::Vacant(v) => {
                v.insert(c.clone());
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }
    pub fn add_scaled(&mut self, c: &Gauss, o: &Element) {
        for (w, v) in &o.terms {
            self.add_term(w.clone(), &(c * v));
        }
    }
    pub fn add(&self, o: &Element) -> Element {
        let mut r = self.clone();
        r.add_scaled(&Gauss::one(), o);
        r
    }
    pub fn sub(&self, o: &Element) -> Element {
        let mut r = self.clone();
        r.add_scaled(&-Gauss::one(), o);
        r
    }
    pub fn scale(&self, c: &Gauss) -> Element {
        let mut r = Element::zero();
        r.add_scaled(c, self);
        r
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (w, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            let ws: Vec<String> = w.iter().map(|g| format!("g{g}")).collect();
            write!(f, "{c} * [{}]", ws.join(" "))?;
        }
        Ok(())
    }
}

impl FromStr for Element {
    type Err = CcrError;
    fn from_str(s: &str) -> Result<Element, CcrError> {
        let mut e = Element::zero();
        let s = s.trim();
        if s == "0" {
            return Ok(e);
        }
        for line in s.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let bad = || CcrError::Parse(line.to_string());
            let (c, w) = line.split_once(" * ").ok_or_else(bad)?;
            let c: Gauss = c.trim().parse().map_err(|_| bad())?;
            let w = w.trim().strip_prefix('[').and_then(|w| w.strip_suffix(']')).ok_or_else(bad)?;
            let word = w
                .split_whitespace()
                .map(|g| g.strip_prefix('g').and_then(|n| n.parse().ok()).ok_or_else(bad))
                .collect::<Result<Word, _>>()?;
            e.add_term(word, &c);
        }
        Ok(e)
    }
}

/// Free-algebra combination, not yet normal ordered.
pub type Raw = Vec<(Word, Gauss)>;

#[derive(Clone, Debug)]
pub struct DgStarAlgebra {
    pub generators: Arc<ChainComplex>,
    pub tau: BilinearForm,
    pub rule: InvolutionRule,
    /// Maximum word length an operation may produce before normal ordering.
    pub cap: usize,
    deg: Vec<i32>,
    offsets: BTreeMap<i32, u32>,
    dgen: Vec<Vec<(u32, Q)>>,
    tau_rows: Vec<HashMap<u32, Q>>,
}

/// Builds `CCR(V, τ)` after checking that `τ` is a graded antisymmetric chain map.
pub fn ccr_algebra(v: Arc<ChainComplex>, tau: BilinearForm, cap: usize) -> Result<DgStarAlgebra, CcrError> {
    if let Some((m, i, j, x)) = tau.add_braided(&v).first_nonzero() {
        return Err(CcrError::NotAntisymmetric(format!("τ + τγ block {m} entry ({i},{j}) = {x}")));
    }
    if let Some((m, i, j, x)) = tau.compose_d(&v).first_nonzero() {
        return Err(CcrError::NotAChainMap(format!("τ∘d block {m} entry ({i},{j}) = {x}")));
    }
    Ok(DgStarAlgebra::new_unchecked(v, tau, InvolutionRule::Koszul, cap))
}

impl DgStarAlgebra {
    pub fn new_unchecked(v: Arc<ChainComplex>, tau: BilinearForm, rule: InvolutionRule, cap: usize) -> Self {
        let mut offsets = BTreeMap::new();
        let mut deg = Vec::new();
        for n in v.degrees() {
            offsets.insert(n, deg.len() as u32);
            deg.extend(std::iter::repeat(n).take(v.dim(n)));
        }
        let mut dgen = vec![Vec::new(); deg.len()];
        for n in v.degrees() {
            if let (Some(d), Some(&lo)) = (v.diff_ref(n), offsets.get(&(n - 1))) {
                for (i, j, x) in d.iter() {
                    dgen[(offsets[&n] as usize) + j].push((lo + i as u32, x.clone()));
                }
            }
        }
        let mut tau_rows = vec![HashMap::new(); deg.len()];
        for (&m, b) in &tau.blocks {
            let (Some(&ra), Some(&rb)) = (offsets.get(&m), offsets.get(&(tau.degree - m))) else { continue };
            for (i, j, x) in b.iter() {
                tau_rows[(ra as usize) + i].insert(rb + j as u32, x.clone());
            }
        }
        DgStarAlgebra { generators: v, tau, rule, cap, deg, offsets, dgen, tau_rows }
    }

    pub fn with_rule(&self, rule: InvolutionRule) -> Self {
        DgStarAlgebra { rule, ..self.clone() }
    }

    pub fn num_generators(&self) -> usize {
        self.deg.len()
    }

    /// Generator index of basis vector `i` in degree `n`.
    pub fn generator(&self, n: i32, i: usize) -> u32 {
        self.offsets[&n] + i as u32
    }

    pub fn generator_degree(&self, g: u32) -> i32 {
        self.deg[g as usize]
    }

    pub fn gen_differential(&self, g: u32) -> &[(u32, Q)] {
        &self.dgen[g as usize]
    }

    pub fn tau_of(&self, a: u32, b: u32) -> Q {
        self.tau_rows[a as usize].get(&b).cloned().unwrap_or_else(Q::zero)
    }

    pub fn word_degree(&self, w: &[u32]) -> i32 {
        w.iter().map(|&g| self.deg[g as usize]).sum()
    }

    fn odd(&self, g: u32) -> bool {
        self.deg[g as usize] % 2 != 0
    }

    pub fn is_normal(&self, w: &[u32]) -> bool {
        w.windows(2).all(|p| p[0] < p[1] || (p[0] == p[1] && !self.odd(p[0])))
    }

    pub fn gen(&self, g: u32) -> Element {
        Element::term(vec![g], Gauss::one())
    }

    /// Normal form of one free word.
    pub fn normal_word(&self, w: &[u32], strat: Strategy) -> Result<Element, CcrError> {
        if w.len() > self.cap {
            return Err(CcrError::CapExceeded { len: w.len(), cap: self.cap });
        }
        let mut out = Element::zero();
        let mut stack: Vec<(Word, Gauss)> = vec![(w.to_vec(), Gauss::one())];
        while let Some((w, c)) = stack.pop() {
            let bad = |k: usize| w[k] > w[k + 1] || (w[k] == w[k + 1] && self.odd(w[k]));
            let pos = match strat {
                Strategy::Leftmost => (0..w.len().saturating_sub(1)).find(|&k| bad(k)),
                Strategy::Rightmost => (0..w.len().saturating_sub(1)).rev().find(|&k| bad(k)),
            };
            let Some(k) = pos else {
                out.add_term(w, &c);
                continue;
            };
            let (b, a) = (w[k], w[k + 1]);
            let rest: Word = w[..k].iter().chain(&w[k + 2..]).copied().collect();
            let t = self.tau_of(b, a);
            if a == b {
                // a a = ½ iτ(a, a)
                if !t.is_zero() {
                    stack.push((rest, &c * &Gauss::imag(t * qf(1, 2))));
                }
                continue;
            }
            let s = self.deg[a as usize] as i64 * self.deg[b as usize] as i64;
            let mut swapped = w.clone();
            swapped.swap(k, k + 1);
            stack.push((swapped, if s % 2 == 0 { c.clone() } else { -c.clone() }));
            if !t.is_zero() {
                stack.push((rest, &c * &Gauss::imag(t)));
            }
        }
        Ok(out)
    }

    pub fn normalize(&self, raw: &[(Word, Gauss)], strat: Strategy) -> Result<Element, CcrError> {
        let mut out = Element::zero();
        for (w, c) in raw {
            out.add_scaled(c, &self.normal_word(w, strat)?);
        }
        Ok(out)
    }

    pub fn multiply(&self, a: &Element, b: &Element) -> Result<Element, CcrError> {
        let mut out = Element::zero();
        for (u, x) in &a.terms {
            for (v, y) in &b.terms {
                let w: Word = u.iter().chain(v).copied().collect();
                out.add_scaled(&(x * y), &self.normal_word(&w, Strategy::Leftmost)?);
            }
        }
        Ok(out)
    }

    /// Graded Leibniz extension of the generator differential to a free word.
    pub fn raw_differential(&self, w: &[u32]) -> Raw {
        let mut out = Vec::new();
        let mut acc = 0i64;
        for k in 0..w.len() {
            let s = if acc % 2 == 0 { Gauss::one() } else { -Gauss::one() };
            for (h, x) in &self.dgen[w[k] as usize] {
                let mut nw = w.to_vec();
                nw[k] = *h;
                out.push((nw, s.scale(x)));
            }
            acc += self.deg[w[k] as usize] as i64;
        }
        out
    }

    pub fn differential(&self, a: &Element) -> Result<Element, CcrError> {
        let mut out = Element::zero();
        for (w, c) in &a.terms {
            for (nw, s) in self.raw_differential(w) {
                out.add_scaled(&(c * &s), &self.normal_word(&nw, Strategy::Leftmost)?);
            }
        }
        Ok(out)
    }

    /// Reversal of a free word with the sign of the configured rule.
    pub fn raw_involution(&self, w: &[u32], c: &Gauss) -> (Word, Gauss) {
        let mut rev = w.to_vec();
        rev.reverse();
        let c = c.conj();
        match self.rule {
            InvolutionRule::Plain => (rev, c),
            InvolutionRule::Koszul => {
                let mut s = 0i64;
                for i in 0..w.len() {
                    for j in i + 1..w.len() {
                        s += self.deg[w[i] as usize] as i64 * self.deg[w[j] as usize] as i64;
                    }
                }
                (rev, if s % 2 == 0 { c } else { -c })
            }
        }
    }

    pub fn involution(&self, a: &Element) -> Result<Element, CcrError> {
        let raw: Raw = a.terms.iter().map(|(w, c)| self.raw_involution(w, c)).collect();
        self.normalize(&raw, Strategy::Leftmost)
    }

    /// Splits an element into homogeneous parts by total degree.
    pub fn homogeneous_parts(&self, a: &Element) -> BTreeMap<i32, Element> {
        let mut out: BTreeMap<i32, Element> = BTreeMap::new();
        for (w, c) in &a.terms {
            out.entry(self.word_degree(w)).or_default().add_term(w.clone(), c);
        }
        out
    }

    /// `ab − (−1)^{|a||b|} ba`, extended bilinearly over homogeneous parts.
    pub fn graded_commutator(&self, a: &Element, b: &Element) -> Result<Element, CcrError> {
        let mut out = Element::zero();
        let pb = self.homogeneous_parts(b);
        for (p, ap) in self.homogeneous_parts(a) {
            for (q, bq) in &pb {
                let s = if (p as i64 * *q as i64) % 2 == 0 { Gauss::one() } else { -Gauss::one() };
                out.add_scaled(&Gauss::one(), &self.multiply(&ap, bq)?);
                out.add_scaled(&-s, &self.multiply(bq, &ap)?);
            }
        }
        Ok(out)
    }

    /// `v₁v₂ − (−1)^{|v₁||v₂|} v₂v₁ − iτ(v₁,v₂)` in the free algebra.
    pub fn relation(&self, a: u32, b: u32) -> Raw {
        let s = self.deg[a as usize] as i64 * self.deg[b as usize] as i64;
        let sg = if s % 2 == 0 { -Gauss::one() } else { Gauss::one() };
        vec![(vec![a, b], Gauss::one()), (vec![b, a], sg), (Vec::new(), -Gauss::imag(self.tau_of(a, b)))]
    }

    /// Normal form of `r*` for the relation `r`; zero iff the ideal is ∗-stable on this pair.
    pub fn involuted_relation(&self, a: u32, b: u32) -> Result<Element, CcrError> {
        let raw: Raw = self.relation(a, b).iter().map(|(w, c)| self.raw_involution(w, c)).collect();
        self.normalize(&raw, Strategy::Leftmost)
    }

    /// Normal form of `d r` for the relation `r`.
    pub fn differentiated_relation(&self, a: u32, b: u32) -> Result<Element, CcrError> {
        let raw: Raw = self
            .relation(a, b)
            .iter()
            .flat_map(|(w, c)| self.raw_differential(w).into_iter().map(move |(nw, s)| (nw, c * &s)))
            .collect();
        self.normalize(&raw, Strategy::Leftmost)
    }

    /// Random normal-ordered element with up to `terms` words of length at most `len`.
    pub fn random_element<R: Rng>(&self, rng: &mut R, terms: usize, len: usize) -> Element {
        let mut e = Element::zero();
        let n = self.num_generators() as u32;
        if n == 0 {
            return Element::scalar(Gauss::real(Q::from_integer(rng.gen_range(-3..=3).into())));
        }
        for _ in 0..terms {
            let l = rng.gen_range(0..=len);
            let w: Word = (0..l).map(|_| rng.gen_range(0..n)).collect();
            let c = Gauss::new(q_small(rng), q_small(rng));
            if let Ok(x) = self.normal_word(&w, Strategy::Leftmost) {
                e.add_scaled(&c, &x);
            }
        }
        e
    }

    /// Random free word of exactly `len` letters.
    pub fn random_word<R: Rng>(&self, rng: &mut R, len: usize) -> Word {
        let n = self.num_generators() as u32;
        (0..len).map(|_| rng.gen_range(0..n)).collect()
    }

    /// All normal words of length at most `k`, grouped by degree.
    pub fn normal_words(&self, k: usize) -> BTreeMap<i32, Vec<Word>> {
        let mut out: BTreeMap<i32, Vec<Word>> = BTreeMap::new();
        let n = self.num_generators() as u32;
        let mut stack: Vec<Word> = vec![Vec::new()];
        while let Some(w) = stack.pop() {
            out.entry(self.word_degree(&w)).or_default().push(w.clone());
            if w.len() == k {
                continue;
            }
            let start = match w.last() {
                None => 0,
                Some(&l) if self.odd(l) => l + 1,
                Some(&l) => l,
            };
            for g in start..n {
                let mut nw = w.clone();
                nw.push(g);
                stack.push(nw);
            }
        }
        for ws in out.values_mut() {
            ws.sort();
        }
        out
    }
}

fn q_small<R: Rng>(rng: &mut R) -> Q {
    qf(rng.gen_range(-3..=3), rng.gen_range(1..=2))
}

/// Algebra morphism induced by a linear map on generators.
#[derive(Clone, Debug)]
pub struct AlgebraMorphism {
    pub images: Vec<Vec<(u32, Q)>>,
}

impl AlgebraMorphism {
    /// From a chain map between the generator complexes of `src` and `tgt`.
    pub fn from_chain_map(src: &DgStarAlgebra, tgt: &DgStarAlgebra, f: &ChainMap) -> AlgebraMorphism {
        let mut images = vec![Vec::new(); src.num_generators()];
        for (&n, m) in f.components() {
            let (Some(&so), Some(&to)) = (src.offsets.get(&n), tgt.offsets.get(&n)) else { continue };
            for (i, j, x) in m.iter() {
                images[(so as usize) + j].push((to + i as u32, x.clone()));
            }
        }
        AlgebraMorphism { images }
    }

    pub fn apply(&self, tgt: &DgStarAlgebra, a: &Element) -> Result<Element, CcrError> {
        let mut out = Element::zero();
        for (w, c) in &a.terms {
            let mut raw: Raw = vec![(Vec::new(), c.clone())];
            for &g in w {
                raw = raw
                    .iter()
                    .flat_map(|(u, x)| {
                        self.images[g as usize].iter().map(move |(h, y)| {
                            let mut nu = u.clone();
                            nu.push(*h);
                            (nu, x.scale(y))
                        })
                    })
                    .collect();
            }
            out.add_scaled(&Gauss::one(), &tgt.normalize(&raw, Strategy::Leftmost)?);
        }
        Ok(out)
    }

    /// `τ_T(f a, f b) = τ_S(a, b)` on every generator pair.
    pub fn preserves_tau(&self, src: &DgStarAlgebra, tgt: &DgStarAlgebra) -> Check {
        let n = src.num_generators() as u32;
        for a in 0..n {
            for b in 0..n {
                let mut lhs = Q::zero();
                for (x, p) in &self.images[a as usize] {
                    for (y, q) in &self.images[b as usize] {
                        lhs += tgt.tau_of(*x, *y) * p * q;
                    }
                }
                if lhs != src.tau_of(a, b) {
                    return Check::fail("morphism_preserves_tau", format!("generators ({a},{b}): {lhs} vs {}", src.tau_of(a, b)));
                }
            }
        }
        Check::pass("morphism_preserves_tau")
    }
}

/// `V_ℂ ⊕ ℂ` with bracket `[v₁⊕c₁, v₂⊕c₂] = 0 ⊕ iτ(v₁, v₂)`.
#[derive(Clone, Debug)]
pub struct HeisenbergLie {
    pub v: Arc<ChainComplex>,
    pub tau: BilinearForm,
    /// Underlying complex with the central summand last in degree 0.
    pub complex: Arc<ChainComplex>,
}

pub fn heisenberg(v: Arc<ChainComplex>, tau: BilinearForm) -> Result<HeisenbergLie, CcrError> {
    if let Some((m, i, j, x)) = tau.compose_d(&v).first_nonzero() {
        return Err(CcrError::NotAChainMap(format!("τ∘d block {m} entry ({i},{j}) = {x}")));
    }
    let complex = Arc::new(direct_sum(&[&v, &ChainComplex::ground(0)]).complex);
    Ok(HeisenbergLie { v, tau, complex })
}

/// Element of a graded vector space, one coefficient vector per degree.
pub type GradedVec = BTreeMap<i32, Vec<Gauss>>;

impl HeisenbergLie {
    pub fn unit(&self) -> GradedVec {
        let mut e = zero_vec(&self.complex);
        e.get_mut(&0).unwrap()[self.v.dim(0)] = Gauss::one();
        e
    }

    pub fn bracket(&self, a: &GradedVec, b: &GradedVec) -> GradedVec {
        let mut out = zero_vec(&self.complex);
        let c = eval_form(&self.tau, a, b);
        out.get_mut(&0).unwrap()[self.v.dim(0)] = &Gauss::i() * &c;
        out
    }

    /// Bracket is a chain map: `τ ∘ d = 0` on all of `V ⊗ V`.
    pub fn bracket_chain_map(&self) -> Check {
        match self.tau.compose_d(&self.v).first_nonzero() {
            None => Check::pass("heisenberg_bracket_chain_map"),
            Some((m, i, j, x)) => Check::fail("heisenberg_bracket_chain_map", format!("block {m} ({i},{j}) = {x}")),
        }
    }
}

pub fn zero_vec(c: &ChainComplex) -> GradedVec {
    c.degrees().into_iter().map(|n| (n, vec![Gauss::zero(); c.dim(n)])).collect()
}

/// `β(a, b)` with `a, b` read on their leading `V` coordinates.
pub fn eval_form(beta: &BilinearForm, a: &GradedVec, b: &GradedVec) -> Gauss {
    let mut s = Gauss::zero();
    for (&m, blk) in &beta.blocks {
        let (Some(x), Some(y)) = (a.get(&m), b.get(&(beta.degree - m))) else { continue };
        for (i, j, v) in blk.iter() {
            if i < x.len() && j < y.len() {
                s += &(&x[i] * &y[j]).scale(v);
            }
        }
    }
    s
}

/// `H = V_ℂ ⊕ D ⊕ ℂ` with `D = (x ↦ y)` and quotient maps onto `𝔥eis(V, τ + s∂ρ)`.
#[derive(Clone, Debug)]
pub struct ZigZagObject {
    pub v: Arc<ChainComplex>,
    pub tau: BilinearForm,
    pub rho: BilinearForm,
    pub d_rho: BilinearForm,
    pub complex: Arc<ChainComplex>,
    /// `π_0` and `π_1`.
    pub pi: [ChainMap; 2],
    pub targets: [HeisenbergLie; 2],
}

/// The acyclic two-term complex `x ↦ y`, `x` in degree 0.
pub fn acyclic_d() -> ChainComplex {
    make_complex(BTreeMap::from([(0, 1), (-1, 1)]), BTreeMap::from([(0, SparseMat::from_i64(&[&[1]]))])).unwrap()
}

pub fn zigzag_object(v: Arc<ChainComplex>, tau: BilinearForm, rho: BilinearForm) -> Result<ZigZagObject, CcrError> {
    let d = acyclic_d();
    let ds = direct_sum(&[&v, &d, &ChainComplex::ground(0)]);
    let complex = Arc::new(ds.complex);
    let d_rho = rho.compose_d(&v);
    let mut pis = Vec::new();
    let mut targets = Vec::new();
    for s in 0..2i64 {
        let ts = add_forms(&tau, &d_rho.scale(&Q::from_integer(s.into())));
        let heis = heisenberg(v.clone(), ts)?;
        let mut comps = BTreeMap::new();
        for n in complex.degrees() {
            let rows = heis.complex.dim(n);
            let mut entries: Vec<(usize, usize, Q)> = (0..v.dim(n)).map(|i| (i, i, Q::one())).collect();
            if n == 0 {
                let (xo, co) = (ds.offsets[1][&0], ds.offsets[2][&0]);
                let central = v.dim(0);
                entries.push((central, xo, Q::from_integer(s.into())));
                entries.push((central, co, Q::one()));
            }
            comps.insert(n, SparseMat::from_triplets(rows, complex.dim(n), entries));
        }
        pis.push(ChainMap::new_unchecked(complex.clone(), heis.complex.clone(), comps));
        targets.push(heis);
    }
    let [p0, p1]: [ChainMap; 2] = pis.try_into().unwrap();
    let [t0, t1]: [HeisenbergLie; 2] = targets.try_into().unwrap();
    Ok(ZigZagObject { v, tau, rho, d_rho, complex, pi: [p0, p1], targets: [t0, t1] })
}

/// Random sparse degree `−1` form on `v`, graded antisymmetrized.
pub fn random_rho<R: Rng>(v: &ChainComplex, rng: &mut R, density: f64) -> BilinearForm {
    let mut blocks = BTreeMap::new();
    for m in v.degrees() {
        let n = -1 - m;
        if v.dim(n) > 0 {
            blocks.insert(m, crate::complex::random::random_sparse(rng, v.dim(m), v.dim(n), density));
        }
    }
    let raw = BilinearForm { degree: -1, blocks };
    raw.sub(&raw.braided(v)).scale(&qf(1, 2))
}

fn add_forms(a: &BilinearForm, b: &BilinearForm) -> BilinearForm {
    a.sub(&b.scale(&-Q::one()))
}

impl ZigZagObject {
    fn x_index(&self) -> usize {
        self.v.dim(0)
    }
    fn y_index(&self) -> usize {
        self.v.dim(-1)
    }
    fn c_index(&self) -> usize {
        self.v.dim(0) + 1
    }

    /// Bracket on `H`: components `(x, y, central)` of `[a, b]`, each divided by `i`.
    pub fn bracket(&self, a: &GradedVec, b: &GradedVec) -> (Gauss, Gauss, Gauss) {
        (eval_form(&self.d_rho, a, b), eval_form(&self.rho, a, b), eval_form(&self.tau, a, b))
    }

    /// Replaces one entry of `π_s` in degree `n`.
    pub fn corrupted(&self, s: usize, n: i32, row: usize, col: usize, value: Q) -> ZigZagObject {
        let mut z = self.clone();
        let mut comps = z.pi[s].components().clone();
        let m = comps.get(&n).cloned().unwrap();
        let entries = m.iter().filter(|(i, j, _)| (*i, *j) != (row, col)).map(|(i, j, v)| (i, j, v.clone()));
        let entries: Vec<_> = entries.chain(std::iter::once((row, col, value))).collect();
        comps.insert(n, SparseMat::from_triplets(m.nrows(), m.ncols(), entries));
        z.pi[s] = ChainMap::new_unchecked(z.pi[s].source.clone(), z.pi[s].target.clone(), comps);
        z
    }

    /// `π_s [e_a, e_b] = [π_s e_a, π_s e_b]` for every pair of basis vectors of `H`.
    /// Both sides are compared as sparse tables over total basis indices; the factor `i` cancels.
    pub fn bracket_check(&self, s: usize) -> Check {
        let name = format!("pi{s}_bracket");
        let pi = &self.pi[s];
        let h = &self.complex;
        let heis = &self.targets[s];
        let tot = |c: &ChainComplex| -> (BTreeMap<i32, usize>, Vec<(i32, usize)>) {
            let mut off = BTreeMap::new();
            let mut basis = Vec::new();
            for n in c.degrees() {
                off.insert(n, basis.len());
                basis.extend((0..c.dim(n)).map(|i| (n, i)));
            }
            (off, basis)
        };
        let (hoff, hbasis) = tot(h);
        let (toff, _) = tot(&heis.complex);
        let table = |beta: &BilinearForm, off: &BTreeMap<i32, usize>| -> HashMap<(usize, usize), Q> {
            let mut t = HashMap::new();
            for (&m, blk) in &beta.blocks {
                let (Some(&ra), Some(&rb)) = (off.get(&m), off.get(&(beta.degree - m))) else { continue };
                for (i, j, x) in blk.iter() {
                    t.insert((ra + i, rb + j), x.clone());
                }
            }
            t
        };
        // π as total-index columns and rows.
        let mut cols: HashMap<usize, Vec<(usize, Q)>> = HashMap::new();
        let mut rows: HashMap<usize, Vec<(usize, Q)>> = HashMap::new();
        for n in h.degrees() {
            let (Some(&co), Some(&ro)) = (hoff.get(&n), toff.get(&n)) else { continue };
            for (r, c, x) in pi.component(n).iter() {
                cols.entry(co + c).or_default().push((ro + r, x.clone()));
                rows.entry(ro + r).or_default().push((co + c, x.clone()));
            }
        }
        let central = toff[&0] + self.v.dim(0);
        let summands = [
            (table(&self.d_rho, &hoff), hoff[&0] + self.x_index()),
            (table(&self.rho, &hoff), hoff[&-1] + self.y_index()),
            (table(&self.tau, &hoff), hoff[&0] + self.c_index()),
        ];
        let mut lhs: HashMap<(usize, usize), BTreeMap<usize, Q>> = HashMap::new();
        for (t, col) in &summands {
            let Some(img) = cols.get(col) else { continue };
            for (&k, x) in t {
                let e = lhs.entry(k).or_default();
                for (r, p) in img {
                    *e.entry(*r).or_insert_with(Q::zero) += x * p;
                }
            }
        }
        let mut rhs: HashMap<(usize, usize), Q> = HashMap::new();
        for ((r, rr), x) in table(&heis.tau, &toff) {
            let (Some(ra), Some(rb)) = (rows.get(&r), rows.get(&rr)) else { continue };
            for (a, p) in ra {
                for (b, q) in rb {
                    *rhs.entry((*a, *b)).or_insert_with(Q::zero) += p * &x * q;
                }
            }
        }
        let mut keys: Vec<(usize, usize)> = lhs.keys().chain(rhs.keys()).copied().collect();
        keys.sort_unstable();
        keys.dedup();
        for k in keys {
            let mut want: BTreeMap<usize, Q> = BTreeMap::new();
            if let Some(x) = rhs.get(&k).filter(|x| !x.is_zero()) {
                want.insert(central, x.clone());
            }
            let mut got = lhs.remove(&k).unwrap_or_default();
            got.retain(|_, x| !x.is_zero());
            if got != want {
                return Check::fail(name, format!("basis pair {:?}, {:?}", hbasis[k.0], hbasis[k.1]));
            }
        }
        Check::pass(name)
    }

    pub fn quasi_iso(&self, s: usize) -> QuasiIsoReport {
        is_quasi_iso(&self.pi[s])
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZigZagReport {
    pub checks: Vec<Check>,
}

pub fn verify_zigzag(z: &ZigZagObject) -> ZigZagReport {
    let mut checks = Vec::new();
    for s in 0..2 {
        checks.push(match z.pi[s].check() {
            Ok(()) => Check::pass(format!("pi{s}_chain_map")),
            Err(e) => Check::fail(format!("pi{s}_chain_map"), e.to_string()),
        });
        checks.push(z.bracket_check(s));
        let q = z.quasi_iso(s);
        checks.push(Check::from_bool(format!("pi{s}_quasi_iso"), q.is_quasi_iso, || format!("{:?}", q.degrees)));
        checks.push(z.targets[s].bracket_chain_map());
    }
    ZigZagReport { checks }
}

/// Exact homology data of a word-length filtration stage, certified through ranks mod p.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: usize,
    pub source_dims: BTreeMap<i32, usize>,
    /// `rank_p d_n: C_n → C_{n−1}`.
    pub ranks_mod_p: BTreeMap<i32, usize>,
    pub target_dim: usize,
    pub surjective: bool,
    pub quasi_iso: bool,
}

fn gauss_to_fp(c: &Gauss, i: Fp) -> Option<Fp> {
    Some(Fp::from_q(&c.re)?.add(&Fp::from_q(&c.im)?.mul(&i)))
}

/// Certifies that `f` induces a quasi-isomorphism on stage `k` of the word-length filtration.
///
/// Applies when the source generators sit in degrees `≥ 0` and the target is concentrated in
/// degree 0 with zero differential. Degree-0 words are then cycles and `H(target stage)` is the
/// whole stage. Ranks mod p bound the rational ranks from below, and
/// `rank d_1 ≤ dim C_0 − dim T` (from surjectivity) together with `rank d_n + rank d_{n+1} ≤ dim C_n`
/// bound them from above; equality pins every rank.
pub fn filtration_stage_certificate(
    src: &DgStarAlgebra,
    tgt: &DgStarAlgebra,
    f: &AlgebraMorphism,
    k: usize,
) -> Result<StageReport, CcrError> {
    if src.deg.iter().any(|&d| d < 0) {
        return Err(CcrError::Certificate("source has generators in negative degree".into()));
    }
    if tgt.deg.iter().any(|&d| d != 0) {
        return Err(CcrError::Certificate("target is not concentrated in degree 0".into()));
    }
    let src = DgStarAlgebra { cap: src.cap.max(k), ..src.clone() };
    let tgt = DgStarAlgebra { cap: tgt.cap.max(k), ..tgt.clone() };
    let words = src.normal_words(k);
    let index: BTreeMap<i32, HashMap<&Word, usize>> =
        words.iter().map(|(&n, ws)| (n, ws.iter().enumerate().map(|(i, w)| (w, i)).collect())).collect();
    let iroot = Fp::sqrt_minus_one();
    let mut ranks = BTreeMap::new();
    for (&n, ws) in &words {
        if n == 0 {
            continue;
        }
        let Some(lower) = index.get(&(n - 1)) else { continue };
        let mut ech = Echelon::<Fp>::new(lower.len());
        for w in ws {
            let dw = src.differential(&Element::term(w.clone(), Gauss::one()))?;
            let mut row = Vec::with_capacity(dw.terms.len());
            for (u, c) in &dw.terms {
                let col = lower[u];
                let v = gauss_to_fp(c, iroot).ok_or_else(|| CcrError::Certificate(format!("coefficient {c} not reducible mod p")))?;
                if !v.is_nil() {
                    row.push((col, v));
                }
            }
            row.sort_by_key(|e| e.0);
            ech.insert(row);
        }
        ranks.insert(n, ech.rank());
    }

    // Surjectivity: each target generator has a source generator mapping exactly onto it.
    let mut pre = HashMap::new();
    for (g, img) in f.images.iter().enumerate() {
        if let [(h, c)] = img.as_slice() {
            if c.is_one() {
                pre.entry(*h).or_insert(g as u32);
            }
        }
    }
    let twords = tgt.normal_words(k);
    let tlist = twords.get(&0).cloned().unwrap_or_default();
    let target_dim = tlist.len();
    let surjective = if (0..tgt.num_generators() as u32).all(|h| pre.contains_key(&h)) {
        let tindex: HashMap<&Word, usize> = tlist.iter().enumerate().map(|(i, w)| (w, i)).collect();
        let mut rows = Vec::new();
        for t in &tlist {
            let sw: Word = t.iter().map(|h| pre[h]).collect();
            let elem = src.normal_word(&sw, Strategy::Leftmost)?;
            let img = f.apply(&tgt, &elem)?;
            rows.push(img.terms.iter().map(|(w, c)| (tindex[w], c.clone())).collect::<Vec<_>>());
        }
        gauss_rank(target_dim, &rows) == target_dim
    } else {
        false
    };

    let dims: BTreeMap<i32, usize> = words.iter().map(|(&n, ws)| (n, ws.len())).collect();
    let r = |n: i32| ranks.get(&n).copied().unwrap_or(0);
    let mut ok = surjective && dims.get(&0).copied().unwrap_or(0) >= target_dim && r(1) + target_dim == dims[&0];
    for (&n, &dn) in &dims {
        if n >= 1 {
            ok &= r(n) + r(n + 1) == dn;
        }
    }
    Ok(StageReport { stage: k, source_dims: dims, ranks_mod_p: ranks, target_dim, surjective, quasi_iso: ok })
}

/// Rank over `Q(i)` through the realification `[[A, −B], [B, A]]`.
pub fn gauss_rank(ncols: usize, rows: &[Vec<(usize, Gauss)>]) -> usize {
    let mut trip = Vec::new();
    for (r, row) in rows.iter().enumerate() {
        for (c, x) in row {
            trip.push((r, *c, x.re.clone()));
            trip.push((r, ncols + c, -x.im.clone()));
            trip.push((rows.len() + r, *c, x.im.clone()));
            trip.push((rows.len() + r, ncols + c, x.re.clone()));
        }
    }
    let m = SparseMat::from_triplets(2 * rows.len(), 2 * ncols, trip);
    linalg::rank(&m) / 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::q;

    /// Two even generators with τ = [[0, 1], [−1, 0]] and one odd pair (degrees 1, −1).
    fn toy() -> DgStarAlgebra {
        let v = Arc::new(ChainComplex::from_parts_unchecked(
            BTreeMap::from([(-1, 1), (0, 2), (1, 1)]),
            BTreeMap::new(),
        ));
        let tau = BilinearForm {
            degree: 0,
            blocks: BTreeMap::from([
                (0, SparseMat::from_i64(&[&[0, 1], &[-1, 0]])),
                (1, SparseMat::from_i64(&[&[2]])),
                (-1, SparseMat::from_i64(&[&[2]])),
            ]),
        };
        ccr_algebra(v, tau, 8).unwrap()
    }

    #[test]
    fn heisenberg_relation_and_odd_pair() {
        let a = toy();
        let (p, x) = (a.generator(0, 0), a.generator(0, 1));
        let c = a.graded_commutator(&a.gen(p), &a.gen(x)).unwrap();
        assert_eq!(c, Element::scalar(Gauss::i()));
        let (chi, al) = (a.generator(-1, 0), a.generator(1, 0));
        let ac = a.multiply(&a.gen(al), &a.gen(chi)).unwrap().add(&a.multiply(&a.gen(chi), &a.gen(al)).unwrap());
        assert_eq!(ac, Element::scalar(Gauss::imag(q(2))));
        assert!(a.multiply(&a.gen(chi), &a.gen(chi)).unwrap().is_zero());
    }

    #[test]
    fn plain_rule_breaks_odd_ideal() {
        let a = toy();
        let (chi, al) = (a.generator(-1, 0), a.generator(1, 0));
        assert!(a.involuted_relation(chi, al).unwrap().is_zero());
        assert!(!a.with_rule(InvolutionRule::Plain).involuted_relation(chi, al).unwrap().is_zero());
    }

    #[test]
    fn text_roundtrip() {
        let a = toy();
        let e = a.multiply(&a.gen(1), &a.gen(0)).unwrap().add(&Element::scalar(Gauss::new(qf(1, 2), q(-3))));
        let s = e.to_string();
        assert_eq!(s.parse::<Element>().unwrap(), e);
        assert_eq!("0".parse::<Element>().unwrap(), Element::zero());
        assert!("3 [g1]".parse::<Element>().is_err());
    }

    #[test]
    fn cap_is_enforced() {
        let a = DgStarAlgebra { cap: 2, ..toy() };
        assert!(matches!(a.normal_word(&[1, 2, 0], Strategy::Leftmost), Err(CcrError::CapExceeded { len: 3, cap: 2 })));
    }

    #[test]
    fn not_antisymmetric_rejected() {
        let v = Arc::new(ChainComplex::from_parts_unchecked(BTreeMap::from([(0, 2)]), BTreeMap::new()));
        let tau = BilinearForm { degree: 0, blocks: BTreeMap::from([(0, SparseMat::from_i64(&[&[1, 0], &[0, 0]]))]) };
        assert!(matches!(ccr_algebra(v, tau, 4), Err(CcrError::NotAntisymmetric(_))));
    }
}
