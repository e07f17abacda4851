//! Field, solution and observable complexes for Klein-Gordon and linear Yang-Mills, their
//! retarded/advanced trivializations, and the shifted and unshifted Poisson structures.
//!
//! Every windowed complex is a sub-quotient of a full-lattice complex under the level
//! filtration. Degree `n` keeps the cells with level in `[lo_n, hi_n]` and its differential is
//! the corresponding block of the full operator.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::{
    braiding, find_homotopy, make_complex, shift, solve_boundary, tensor, ChainComplex, ChainMap, ComplexError,
    MapChain, Tensor,
};
use crate::green::{green_operator, GreenError, Orientation};
use crate::lattice::{Form, Lattice};
use crate::report::Check;
use crate::scalar::{qf, sign, Q};
use crate::sparse::SparseMat;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TheoryError {
    #[error("invariant violated: {what} ({witness})")]
    InvariantViolation { what: String, witness: String },
    #[error(transparent)]
    Green(#[from] GreenError),
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error("trivializations are not compatible: {0}")]
    IncompatiblePair(String),
    #[error("no homotopy exists between the given structures")]
    Absent,
    #[error("perturbation has the wrong shape: {0}")]
    ShapeMismatch(String),
    #[error("window for degree {degree} is empty or inverted: [{lo}, {hi}]")]
    EmptyWindow { degree: i32, lo: i64, hi: i64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    KG,
    YM,
}

/// Level margins per observable degree: compact windows are
/// `[base + off_n, max − base − off_n]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Margins {
    pub base: i64,
    pub offsets: BTreeMap<i32, i64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WindowKind {
    Compact,
    PastCompact,
    FutureCompact,
    /// Quotient on both sides, holding `Sol[1]`.
    Solution,
}

impl Margins {
    pub fn default_for(kind: Kind) -> Margins {
        match kind {
            Kind::KG => Margins { base: 2, offsets: BTreeMap::from([(0, 0), (1, 2)]) },
            Kind::YM => Margins { base: 6, offsets: BTreeMap::from([(-1, 0), (0, 1), (1, 3), (2, 4)]) },
        }
    }

    pub fn window(&self, kind: WindowKind, n: i32, max_level: i64) -> (i64, i64) {
        let a = self.base;
        let o = self.offsets[&n];
        match kind {
            WindowKind::Compact => (a + o, max_level - a - o),
            WindowKind::PastCompact => (a + o, max_level - a + o),
            WindowKind::FutureCompact => (a - o, max_level - a - o),
            WindowKind::Solution => (a - o, max_level - a + o),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FieldTheorySpec {
    pub kind: Kind,
    pub lattice: Arc<Lattice>,
    pub mass: Q,
    pub margins: Margins,
    pub f0: Form,
    pub f1: Option<Form>,
    /// `Q : F1 → F0`.
    pub q: SparseMat,
    /// `P : F0 → F0`.
    pub p: SparseMat,
    /// `Q* : F0 → F1`.
    pub qstar: SparseMat,
    /// Operator whose Green's operators build the trivializations.
    pub green_form: Form,
}

#[derive(Serialize, Deserialize)]
struct SpecDoc {
    kind: Kind,
    nt: usize,
    nx: usize,
    #[serde(with = "crate::scalar::serde_q")]
    mass: Q,
    margins: Margins,
}

pub fn make_theory(kind: Kind, lattice: Arc<Lattice>, mass: Q) -> Result<FieldTheorySpec, TheoryError> {
    make_theory_with_margins(kind, lattice, mass, Margins::default_for(kind))
}

pub fn make_theory_with_margins(
    kind: Kind,
    lattice: Arc<Lattice>,
    mass: Q,
    margins: Margins,
) -> Result<FieldTheorySpec, TheoryError> {
    let lat = &lattice;
    let spec = match kind {
        Kind::KG => {
            let n = lat.num_vertices();
            FieldTheorySpec {
                kind,
                p: lat.wave_operator(Form::Zero, &mass),
                q: SparseMat::zeros(n, 0),
                qstar: SparseMat::zeros(0, n),
                lattice: lattice.clone(),
                mass,
                margins,
                f0: Form::Zero,
                f1: None,
                green_form: Form::Zero,
            }
        }
        Kind::YM => FieldTheorySpec {
            kind,
            p: lat.delta(Form::Two).mul(lat.d(Form::One)),
            q: lat.d(Form::Zero).clone(),
            qstar: lat.delta(Form::One).clone(),
            lattice: lattice.clone(),
            mass: Q::zero(),
            margins,
            f0: Form::One,
            f1: Some(Form::Zero),
            green_form: Form::One,
        },
    };
    spec.validate()?;
    Ok(spec)
}

impl FieldTheorySpec {
    fn validate(&self) -> Result<(), TheoryError> {
        let bad = |what: &str, m: &SparseMat| {
            m.first_nonzero().map(|(i, j, v)| TheoryError::InvariantViolation {
                what: what.into(),
                witness: format!("entry ({i},{j}) = {v}"),
            })
        };
        if let Some(e) = bad("P Q = 0", &self.p.mul(&self.q)) {
            return Err(e);
        }
        if let Some(e) = bad("Q* P = 0", &self.qstar.mul(&self.p)) {
            return Err(e);
        }
        let h = SparseMat::diag(self.lattice.metric(self.f0));
        let hp = h.mul(&self.p);
        if let Some(e) = bad("P self-adjoint", &hp.sub(&hp.transpose())) {
            return Err(e);
        }
        if let Some(f1) = self.f1 {
            let h1 = SparseMat::diag(self.lattice.metric(f1));
            if let Some(e) = bad("Q* adjoint to Q", &h1.mul(&self.qstar).sub(&h.mul(&self.q).transpose())) {
                return Err(e);
            }
        }
        let mx = self.lattice.max_level();
        for &n in self.margins.offsets.keys() {
            for kind in [WindowKind::Compact, WindowKind::PastCompact, WindowKind::FutureCompact, WindowKind::Solution] {
                let (lo, hi) = self.margins.window(kind, n, mx);
                if lo < 0 || hi > mx || lo > hi {
                    return Err(TheoryError::EmptyWindow { degree: n, lo, hi });
                }
            }
        }
        Ok(())
    }

    /// Form of the observable space in each degree.
    pub fn observable_forms(&self) -> BTreeMap<i32, Form> {
        match self.kind {
            Kind::KG => BTreeMap::from([(1, Form::Zero), (0, Form::Zero)]),
            Kind::YM => BTreeMap::from([(2, Form::Zero), (1, Form::One), (0, Form::One), (-1, Form::Zero)]),
        }
    }

    /// Full-lattice differentials `−Q, P, −Q*` of the observable complex.
    pub fn observable_ops(&self) -> BTreeMap<i32, SparseMat> {
        match self.kind {
            Kind::KG => BTreeMap::from([(1, self.p.clone())]),
            Kind::YM => BTreeMap::from([(2, self.q.neg()), (1, self.p.clone()), (0, self.qstar.neg())]),
        }
    }

    /// Forms and differentials `Q, P, Q*` of the solution complex.
    pub fn solution_shape(&self) -> (BTreeMap<i32, Form>, BTreeMap<i32, SparseMat>) {
        match self.kind {
            Kind::KG => (BTreeMap::from([(0, Form::Zero), (-1, Form::Zero)]), BTreeMap::from([(0, self.p.clone())])),
            Kind::YM => (
                BTreeMap::from([(1, Form::Zero), (0, Form::One), (-1, Form::One), (-2, Form::Zero)]),
                BTreeMap::from([(1, self.q.clone()), (0, self.p.clone()), (-1, self.qstar.clone())]),
            ),
        }
    }

    /// Quadratic action `½⟨s, P s⟩`.
    pub fn action(&self, s: &[Q]) -> Q {
        self.lattice.pairing(self.f0, s, &self.p.mul_vec(s)) / Q::from_integer(2.into())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(SpecDoc {
            kind: self.kind,
            nt: self.lattice.nt,
            nx: self.lattice.nx,
            mass: self.mass.clone(),
            margins: self.margins.clone(),
        })
        .expect("spec serializes")
    }
}

/// A complex whose degree-`n` basis is a set of lattice cells of one form.
#[derive(Clone, Debug)]
pub struct WindowedComplex {
    pub complex: Arc<ChainComplex>,
    pub forms: BTreeMap<i32, Form>,
    pub windows: BTreeMap<i32, (i64, i64)>,
    pub cells: BTreeMap<i32, Vec<usize>>,
}

impl WindowedComplex {
    pub fn build(
        lat: &Lattice,
        forms: &BTreeMap<i32, Form>,
        ops: &BTreeMap<i32, SparseMat>,
        windows: BTreeMap<i32, (i64, i64)>,
    ) -> Result<WindowedComplex, TheoryError> {
        let cells: BTreeMap<i32, Vec<usize>> = forms
            .iter()
            .map(|(&n, &f)| {
                let (lo, hi) = windows[&n];
                (n, lat.cells_in_levels(f, lo, hi))
            })
            .collect();
        Self::from_cells(forms, ops, windows, cells)
    }

    pub fn from_cells(
        forms: &BTreeMap<i32, Form>,
        ops: &BTreeMap<i32, SparseMat>,
        windows: BTreeMap<i32, (i64, i64)>,
        cells: BTreeMap<i32, Vec<usize>>,
    ) -> Result<WindowedComplex, TheoryError> {
        let dims = cells.iter().map(|(&n, c)| (n, c.len())).collect();
        let diffs = ops
            .iter()
            .filter(|(n, _)| cells.contains_key(n) && cells.contains_key(&(*n - 1)))
            .map(|(&n, m)| (n, m.submatrix(&cells[&(n - 1)], &cells[&n])))
            .collect();
        let complex = make_complex(dims, diffs)?;
        Ok(WindowedComplex { complex: Arc::new(complex), forms: forms.clone(), windows, cells })
    }

    pub fn dim(&self, n: i32) -> usize {
        self.complex.dim(n)
    }

    /// Position of a lattice cell in the degree-`n` basis.
    pub fn index_of(&self, n: i32, cell: usize) -> Option<usize> {
        self.cells.get(&n)?.binary_search(&cell).ok()
    }

    /// Embeds a degree-`n` vector as a full-lattice cochain.
    pub fn to_lattice(&self, lat: &Lattice, n: i32, v: &[Q]) -> Vec<Q> {
        let mut out = vec![Q::zero(); lat.num_cells(self.forms[&n])];
        for (k, &c) in self.cells[&n].iter().enumerate() {
            out[c] = v[k].clone();
        }
        out
    }
}

/// Blocks of full-lattice operators between two windowed complexes, as a degree-`k` chain.
pub fn restrict_chain(
    src: &WindowedComplex,
    tgt: &WindowedComplex,
    k: i32,
    full: &BTreeMap<i32, SparseMat>,
) -> MapChain {
    let comps = full
        .iter()
        .filter(|(m, _)| src.cells.contains_key(m) && tgt.cells.contains_key(&(**m + k)))
        .map(|(&m, op)| (m, op.submatrix(&tgt.cells[&(m + k)], &src.cells[&m])))
        .collect();
    MapChain::new_unchecked(src.complex.clone(), tgt.complex.clone(), k, comps)
}

/// Identity on shared cells, times a sign per degree.
pub fn window_map(src: &WindowedComplex, tgt: &WindowedComplex, signs: &BTreeMap<i32, i64>) -> ChainMap {
    let comps = src
        .cells
        .iter()
        .filter(|(n, _)| tgt.cells.contains_key(n))
        .map(|(&n, cells)| {
            let s = sign(signs.get(&n).copied().unwrap_or(0));
            let entries = cells
                .iter()
                .enumerate()
                .filter_map(|(i, &c)| tgt.index_of(n, c).map(|r| (r, i, s.clone())));
            (n, SparseMat::from_triplets(tgt.dim(n), src.dim(n), entries))
        })
        .collect();
    ChainMap::new_unchecked(src.complex.clone(), tgt.complex.clone(), comps)
}

#[derive(Clone, Debug)]
pub struct SolutionComplex {
    /// Unwindowed full-lattice complex `F1 → F0 → F0 → F1` in degrees `1, 0, −1, −2`.
    pub full: Arc<ChainComplex>,
    /// Windowed model used by the observables, degree `m` carrying the window of observable degree `m + 1`.
    pub windowed: WindowedComplex,
}

pub fn solution_complex(spec: &FieldTheorySpec) -> Result<SolutionComplex, TheoryError> {
    let lat = &spec.lattice;
    let (forms, ops) = spec.solution_shape();
    let dims = forms.iter().map(|(&n, &f)| (n, lat.num_cells(f))).collect();
    let full = Arc::new(make_complex(dims, ops.clone())?);
    let mx = lat.max_level();
    let windows = forms.keys().map(|&m| (m, spec.margins.window(WindowKind::Solution, m + 1, mx))).collect();
    let windowed = WindowedComplex::build(lat, &forms, &ops, windows)?;
    Ok(SolutionComplex { full, windowed })
}

#[derive(Clone, Debug)]
pub struct ObservablesComplex {
    pub spec: Arc<FieldTheorySpec>,
    pub l: WindowedComplex,
    pub l_pc: WindowedComplex,
    pub l_fc: WindowedComplex,
    pub sol: SolutionComplex,
    /// `Sol[1]` on the windowed solution cells, same cells per degree as `l`.
    pub sol1: WindowedComplex,
    pub iota_pc: ChainMap,
    pub iota_fc: ChainMap,
    pub j: ChainMap,
    pub j_pc: ChainMap,
    pub j_fc: ChainMap,
    /// `pair[m]`: H-weighted pairing between `L_m` and `Sol_{−m}` (rows `L_m`).
    pub pair: BTreeMap<i32, SparseMat>,
}

/// Signs of `j : L → Sol[1]` per degree, as exponents of −1.
fn j_signs(kind: Kind) -> BTreeMap<i32, i64> {
    match kind {
        Kind::KG => BTreeMap::from([(1, 1), (0, 0)]),
        Kind::YM => BTreeMap::from([(2, 1), (1, 1), (0, 0), (-1, 0)]),
    }
}

pub fn observables_complex(spec: Arc<FieldTheorySpec>) -> Result<ObservablesComplex, TheoryError> {
    let lat = spec.lattice.clone();
    let mx = lat.max_level();
    let forms = spec.observable_forms();
    let ops = spec.observable_ops();
    let win = |k: WindowKind| forms.keys().map(|&n| (n, spec.margins.window(k, n, mx))).collect::<BTreeMap<_, _>>();
    let l = WindowedComplex::build(&lat, &forms, &ops, win(WindowKind::Compact))?;
    let l_pc = WindowedComplex::build(&lat, &forms, &ops, win(WindowKind::PastCompact))?;
    let l_fc = WindowedComplex::build(&lat, &forms, &ops, win(WindowKind::FutureCompact))?;
    let sol = solution_complex(&spec)?;
    let sol1_ops: BTreeMap<i32, SparseMat> = spec.solution_shape().1.into_iter().map(|(m, op)| (m + 1, op.neg())).collect();
    let sol1_cells: BTreeMap<i32, Vec<usize>> = sol.windowed.cells.iter().map(|(&m, c)| (m + 1, c.clone())).collect();
    let sol1_windows = sol.windowed.windows.iter().map(|(&m, w)| (m + 1, *w)).collect();
    let sol1 = WindowedComplex::from_cells(&forms, &sol1_ops, sol1_windows, sol1_cells)?;
    debug_assert_eq!(*sol1.complex, shift(&sol.windowed.complex, 1));

    let plain = BTreeMap::new();
    let js = j_signs(spec.kind);
    let iota_pc = window_map(&l, &l_pc, &plain);
    let iota_fc = window_map(&l, &l_fc, &plain);
    let j = window_map(&l, &sol1, &js);
    let j_pc = window_map(&l_pc, &sol1, &js);
    let j_fc = window_map(&l_fc, &sol1, &js);
    for (name, f) in [("iota_pc", &iota_pc), ("iota_fc", &iota_fc), ("j", &j), ("j_pc", &j_pc), ("j_fc", &j_fc)] {
        f.check().map_err(|e| TheoryError::InvariantViolation { what: format!("{name} is a chain map"), witness: e.to_string() })?;
    }

    let pair = forms
        .iter()
        .filter_map(|(&m, &f)| {
            let sc = sol.windowed.cells.get(&(-m))?;
            let h = lat.metric(f);
            let entries = l.cells[&m]
                .iter()
                .enumerate()
                .filter_map(|(i, &c)| sc.binary_search(&c).ok().map(|k| (i, k, h[c].clone())));
            Some((m, SparseMat::from_triplets(l.dim(m), sc.len(), entries)))
        })
        .collect();
    Ok(ObservablesComplex { spec, l, l_pc, l_fc, sol, sol1, iota_pc, iota_fc, j, j_pc, j_fc, pair })
}

impl ObservablesComplex {
    pub fn lattice(&self) -> &Lattice {
        &self.spec.lattice
    }

    pub fn degrees(&self) -> Vec<i32> {
        self.l.complex.degrees()
    }

    pub fn pc_or_fc(&self, o: Orientation) -> &WindowedComplex {
        match o {
            Orientation::Retarded => &self.l_pc,
            Orientation::Advanced => &self.l_fc,
        }
    }

    pub fn iota(&self, o: Orientation) -> &ChainMap {
        match o {
            Orientation::Retarded => &self.iota_pc,
            Orientation::Advanced => &self.iota_fc,
        }
    }

    pub fn j_of(&self, o: Orientation) -> &ChainMap {
        match o {
            Orientation::Retarded => &self.j_pc,
            Orientation::Advanced => &self.j_fc,
        }
    }

    /// `(L ⊗ L)` with its basis layout.
    pub fn tensor_square(&self) -> Tensor {
        tensor(&self.l.complex, &self.l.complex)
    }

    /// Evaluation `⟨a, s⟩` for `a ∈ L` and `s ∈ Sol` as a functional on `L ⊗ Sol`, tested for the
    /// chain-map property on every basis pair.
    pub fn pairing_is_chain_map(&self) -> Check {
        let l = &self.l.complex;
        let s = &self.sol.windowed.complex;
        // ⟨d a, s⟩ + (−1)^m ⟨a, d s⟩ = 0 for a ∈ L_m, s ∈ Sol_{1−m}.
        for m in l.support() {
            let (Some(p_lo), Some(p_hi)) = (self.pair.get(&(m - 1)), self.pair.get(&m)) else { continue };
            let lhs = l.diff(m).transpose().mul(p_lo);
            let rhs = p_hi.mul(&s.diff(1 - m)).scale(&sign(m as i64));
            if let Some((i, k, v)) = lhs.add(&rhs).first_nonzero() {
                return Check::fail("pairing_chain_map", format!("degree {m}: ({i},{k}) = {v}"));
            }
        }
        Check::pass("pairing_chain_map")
    }
}

/// Degree-one chain on `L_pc` (retarded) or `L_fc` (advanced).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trivialization {
    pub orientation: Orientation,
    pub chain: MapChain,
}

/// `Λ₀ = G` for KG; `Λ₋₁ = −G d, Λ₀ = G, Λ₁ = −δ G` for YM.
pub fn standard_trivialization(obs: &ObservablesComplex, o: Orientation) -> Result<Trivialization, TheoryError> {
    let spec = &obs.spec;
    let lat = &spec.lattice;
    let g = green_operator(lat, spec.green_form, &spec.mass, o)?;
    let g = g.matrix().clone();
    let full: BTreeMap<i32, SparseMat> = match spec.kind {
        Kind::KG => BTreeMap::from([(0, g)]),
        Kind::YM => BTreeMap::from([
            (-1, g.mul(lat.d(Form::Zero)).neg()),
            (0, g.clone()),
            (1, lat.delta(Form::One).mul(&g).neg()),
        ]),
    };
    let w = obs.pc_or_fc(o);
    Ok(Trivialization { orientation: o, chain: restrict_chain(w, w, 1, &full) })
}

/// Per-degree components of `∂Λ − id`, one check per degree.
pub fn contracting_checks(obs: &ObservablesComplex, t: &Trivialization) -> Vec<Check> {
    let w = obs.pc_or_fc(t.orientation);
    let diff = t.chain.boundary().sub(&MapChain::identity(w.complex.clone()));
    let tag = match t.orientation {
        Orientation::Retarded => "retarded",
        Orientation::Advanced => "advanced",
    };
    w.complex
        .support()
        .into_iter()
        .map(|m| {
            let name = format!("contracting_{tag}_degree_{m}");
            match diff.component(m).first_nonzero() {
                None => Check::pass(name),
                Some((i, j, v)) => Check::fail(name, format!("entry ({i},{j}) = {v}")),
            }
        })
        .collect()
}

/// `Λ = j_pc Λ⁺ ι − j_fc Λ⁻ ι` in `hom(L, Sol[1])_1`.
pub fn causal_lambda(obs: &ObservablesComplex, plus: &Trivialization, minus: &Trivialization) -> MapChain {
    let a = obs.j_pc.as_chain().compose(&plus.chain).compose(&obs.iota_pc.as_chain());
    let b = obs.j_fc.as_chain().compose(&minus.chain).compose(&obs.iota_fc.as_chain());
    a.sub(&b)
}

/// `τ_m = pair_m · Λ_{−m}`: the matrix of `τ(a, b)` for `a ∈ L_m`, `b ∈ L_{−m}`.
fn tau_blocks(obs: &ObservablesComplex, lambda: &MapChain) -> BTreeMap<i32, SparseMat> {
    obs.pair
        .iter()
        .filter(|(m, _)| obs.l.complex.dim(-**m) > 0)
        .map(|(&m, p)| (m, p.mul(&lambda.component(-m))))
        .collect()
}

/// Bilinear form on `L` given by blocks `B_m` for `a ∈ L_m`, `b ∈ L_{k−m}`, as a functional on `(L⊗L)_k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BilinearForm {
    /// Total degree of the argument pairs.
    pub degree: i32,
    pub blocks: BTreeMap<i32, SparseMat>,
}

impl BilinearForm {
    pub fn block(&self, m: i32, l: &ChainComplex) -> SparseMat {
        self.blocks.get(&m).cloned().unwrap_or_else(|| SparseMat::zeros(l.dim(m), l.dim(self.degree - m)))
    }

    pub fn eval(&self, m: i32, i: usize, j: usize) -> Q {
        self.blocks.get(&m).map_or(Q::zero(), |b| b.get(i, j))
    }

    /// As a `1 × dim (L⊗L)_k` row.
    pub fn row(&self, t: &Tensor) -> SparseMat {
        let n = t.complex.dim(self.degree);
        let mut entries = Vec::new();
        if let Some(bl) = t.layout.blocks.get(&self.degree) {
            for &(m, off, _, b) in bl {
                if let Some(blk) = self.blocks.get(&m) {
                    entries.extend(blk.iter().map(|(i, j, v)| (0, off + i * b + j, v.clone())));
                }
            }
        }
        SparseMat::from_triplets(1, n, entries)
    }

    pub fn from_row(degree: i32, t: &Tensor, row: &SparseMat) -> BilinearForm {
        let mut blocks = BTreeMap::new();
        if let Some(bl) = t.layout.blocks.get(&degree) {
            for &(m, off, a, b) in bl {
                let entries = row.row(0).iter().filter(|(c, _)| *c >= off && *c < off + a * b).map(|(c, v)| {
                    let r = c - off;
                    (r / b, r % b, v.clone())
                });
                let blk = SparseMat::from_triplets(a, b, entries);
                if !blk.is_zero() {
                    blocks.insert(m, blk);
                }
            }
        }
        BilinearForm { degree, blocks }
    }

    /// As a chain `L⊗L → target` of degree `target_degree − k`, with `target` the ground field
    /// in degree `target_degree`.
    pub fn as_chain(&self, t: &Tensor, target_degree: i32) -> MapChain {
        let src = Arc::new(t.complex.clone());
        let tgt = Arc::new(ChainComplex::ground(target_degree));
        let row = self.row(t);
        let comps = BTreeMap::from([(self.degree, row)]);
        MapChain::new_unchecked(src, tgt, target_degree - self.degree, comps)
    }

    /// `b(a, b) ↦ (−1)^{|a||b|} b(b, a)` pulled back along the braiding.
    pub fn braided(&self, l: &ChainComplex) -> BilinearForm {
        let blocks = l
            .support()
            .into_iter()
            .filter(|m| l.dim(self.degree - m) > 0)
            .map(|m| {
                let other = self.block(self.degree - m, l).transpose();
                (m, other.scale(&sign(m as i64 * (self.degree - m) as i64)))
            })
            .filter(|(_, b)| !b.is_zero())
            .collect();
        BilinearForm { degree: self.degree, blocks }
    }

    pub fn sub(&self, o: &BilinearForm) -> BilinearForm {
        let mut blocks = self.blocks.clone();
        for (&m, b) in &o.blocks {
            let cur = blocks.get(&m).cloned().unwrap_or_else(|| SparseMat::zeros(b.nrows(), b.ncols()));
            blocks.insert(m, cur.sub(b));
        }
        blocks.retain(|_, b| !b.is_zero());
        BilinearForm { degree: self.degree, blocks }
    }

    pub fn scale(&self, s: &Q) -> BilinearForm {
        let blocks = self.blocks.iter().map(|(&m, b)| (m, b.scale(s))).filter(|(_, b)| !b.is_zero()).collect();
        BilinearForm { degree: self.degree, blocks }
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.values().all(|b| b.is_zero())
    }

    /// `β(d a, b) + (−1)^{|a|} β(a, d b)`, a form of degree `k + 1`.
    pub fn compose_d(&self, l: &ChainComplex) -> BilinearForm {
        let k = self.degree + 1;
        let blocks = l
            .support()
            .into_iter()
            .filter(|m| l.dim(k - m) > 0)
            .map(|m| {
                let a = l.diff(m).transpose().mul(&self.block(m - 1, l));
                let b = self.block(m, l).mul(&l.diff(k - m)).scale(&sign(m as i64));
                (m, a.add(&b))
            })
            .filter(|(_, b)| !b.is_zero())
            .collect();
        BilinearForm { degree: k, blocks }
    }

    pub fn first_nonzero(&self) -> Option<(i32, usize, usize, Q)> {
        self.blocks.iter().find_map(|(&m, b)| b.first_nonzero().map(|(i, j, v)| (m, i, j, v)))
    }
}

fn zero_form_check(name: &str, f: &BilinearForm) -> Check {
    match f.first_nonzero() {
        None => Check::pass(name),
        Some((m, i, j, v)) => Check::fail(name, format!("block {m} entry ({i},{j}) = {v}")),
    }
}

/// `Υ(a, b) = (−1)^{|a|} ⟨a, j b⟩`, nonzero only for `|a| + |b| = 1`.
pub fn shifted_poisson(obs: &ObservablesComplex) -> BilinearForm {
    let blocks = obs
        .pair
        .iter()
        .filter(|(m, _)| obs.l.complex.dim(1 - **m) > 0)
        .map(|(&m, p)| (m, p.mul(&obs.j.component(1 - m)).scale(&sign(m as i64))))
        .filter(|(_, b)| !b.is_zero())
        .collect();
    BilinearForm { degree: 1, blocks }
}

/// `⟨a, K b⟩` for a chain `K ∈ hom(L, Sol[1])_1`, nonzero for `|a| + |b| = 0`.
pub fn pair_with(obs: &ObservablesComplex, k: &MapChain) -> BilinearForm {
    BilinearForm { degree: 0, blocks: tau_blocks(obs, k) }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrivializationReport {
    pub checks: Vec<Check>,
}

impl TrivializationReport {
    pub fn all_passed(&self) -> bool {
        crate::report::all_passed(&self.checks)
    }
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn verify_trivialization(obs: &ObservablesComplex, plus: &Trivialization, minus: &Trivialization) -> TrivializationReport {
    let mut checks = Vec::new();
    checks.extend(contracting_checks(obs, plus));
    checks.extend(contracting_checks(obs, minus));

    let lambda = causal_lambda(obs, plus, minus);
    checks.push(Check::zero_chain("lambda_closed", &lambda.boundary()));

    let tau = pair_with(obs, &lambda);
    checks.push(zero_form_check("skew_adjoint", &tau.sub(&tau.braided(&obs.l.complex).scale(&-Q::one()))));

    let j = obs.j.as_chain();
    for t in [plus, minus] {
        let k = obs.j_of(t.orientation).as_chain().compose(&t.chain).compose(&obs.iota(t.orientation).as_chain());
        let name = match t.orientation {
            Orientation::Retarded => "j_trivialized_pc",
            Orientation::Advanced => "j_trivialized_fc",
        };
        checks.push(Check::zero_chain(name, &k.boundary().sub(&j)));
        if t.orientation == Orientation::Retarded {
            // Υ = ∂Y with Y(a, b) = ⟨a, K b⟩; on L⊗L, ∂Y = Y∘d.
            let ups = shifted_poisson(obs);
            let y = pair_with(obs, &k);
            checks.push(zero_form_check("upsilon_trivialized", &y.compose_d(&obs.l.complex).sub(&ups)));
        }
    }
    checks.push(Check::zero_chain("j_chain_map", &j.boundary()));
    let ups = shifted_poisson(obs);
    checks.push(zero_form_check("upsilon_chain_map", &ups.compose_d(&obs.l.complex)));
    checks.push(obs.pairing_is_chain_map());
    TrivializationReport { checks }
}

/// `Λ̃ = Λ + ∂λ` for a degree-two chain `λ` on the same pc/fc complex.
pub fn perturb_trivialization(t: &Trivialization, lambda: &MapChain) -> Result<Trivialization, TheoryError> {
    if lambda.degree != 2 || lambda.source != t.chain.source || lambda.target != t.chain.target {
        return Err(TheoryError::ShapeMismatch(format!(
            "expected a degree-2 chain on the {:?} complex, got degree {}",
            t.orientation, lambda.degree
        )));
    }
    Ok(Trivialization { orientation: t.orientation, chain: t.chain.add(&lambda.boundary()) })
}

/// A random `λ⁺` for YM whose perturbed pair stays compatible with `λ⁻ = 0`:
/// `λ₋₁` is supported on cells inside every window and `λ₀ = H₀⁻¹ λ₋₁ᵀ H₁`.
pub fn compatible_perturbation(obs: &ObservablesComplex, seed: u64, density: f64) -> Result<MapChain, TheoryError> {
    let spec = &obs.spec;
    if spec.kind != Kind::YM {
        let z = MapChain::zero(obs.l_pc.complex.clone(), obs.l_pc.complex.clone(), 2);
        return Ok(z);
    }
    let lat = &spec.lattice;
    let mx = lat.max_level();
    let inner = |n1: i32, n2: i32, f: Form| {
        let (lo1, hi1) = spec.margins.window(WindowKind::Compact, n1, mx);
        let (lo2, hi2) = spec.margins.window(WindowKind::Compact, n2, mx);
        lat.cells_in_levels(f, lo1.max(lo2), hi1.min(hi2))
    };
    let rows = inner(1, 0, Form::One);
    let cols = inner(2, -1, Form::Zero);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for &r in &rows {
        for &c in &cols {
            if rng.gen_bool(density) {
                entries.push((r, c, qf(rng.gen_range(-3..=3), rng.gen_range(1..=2))));
            }
        }
    }
    let m = SparseMat::from_triplets(lat.num_edges(), lat.num_vertices(), entries);
    let h0inv: Vec<Q> = lat.metric(Form::Zero).iter().map(|x| x.recip()).collect();
    let m0 = SparseMat::diag(&h0inv).mul(&m.transpose()).mul(&SparseMat::diag(lat.metric(Form::One)));
    let full = BTreeMap::from([(-1, m), (0, m0)]);
    Ok(restrict_chain(&obs.l_pc, &obs.l_pc, 2, &full))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnshiftedPoisson {
    pub lambda: MapChain,
    pub tau: BilinearForm,
    /// False when built with the compatibility check bypassed.
    pub verified: bool,
}

pub fn unshifted_poisson(
    obs: &ObservablesComplex,
    plus: &Trivialization,
    minus: &Trivialization,
    bypass_check: bool,
) -> Result<UnshiftedPoisson, TheoryError> {
    let lambda = causal_lambda(obs, plus, minus);
    let tau = pair_with(obs, &lambda);
    if !bypass_check {
        let asym = tau.sub(&tau.braided(&obs.l.complex).scale(&-Q::one()));
        if let Some((m, i, j, v)) = asym.first_nonzero() {
            return Err(TheoryError::IncompatiblePair(format!("τ + τγ has block {m} entry ({i},{j}) = {v}")));
        }
    }
    Ok(UnshiftedPoisson { lambda, tau, verified: !bypass_check })
}

/// Antisymmetric `ρ` of degree one with `τ̃ − τ = ρ ∘ d`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rho {
    pub form: BilinearForm,
}

pub fn homotopy_between_taus(
    obs: &ObservablesComplex,
    tau: &BilinearForm,
    tau_tilde: &BilinearForm,
    cap: usize,
) -> Result<Rho, TheoryError> {
    let t = obs.tensor_square();
    let src = Arc::new(t.complex.clone());
    let unit = Arc::new(ChainComplex::unit());
    let as_map = |b: &BilinearForm| {
        let comps = BTreeMap::from([(0, b.row(&t))]);
        ChainMap::new_unchecked(src.clone(), unit.clone(), comps)
    };
    let rho = find_homotopy(&as_map(tau_tilde), &as_map(tau), cap)?.ok_or(TheoryError::Absent)?;
    let raw = BilinearForm::from_row(-1, &t, &rho.component(-1));
    let anti = raw.sub(&raw.braided(&obs.l.complex)).scale(&qf(1, 2));
    Ok(Rho { form: anti })
}

impl Rho {
    pub fn checks(&self, obs: &ObservablesComplex, tau: &BilinearForm, tau_tilde: &BilinearForm) -> Vec<Check> {
        let l = &obs.l.complex;
        let d = self.form.compose_d(l).sub(&tau_tilde.sub(tau));
        let anti = self.form.add_braided(l);
        vec![zero_form_check("rho_boundary", &d), zero_form_check("rho_antisymmetric", &anti)]
    }
}

impl BilinearForm {
    /// `β + βγ`, zero iff β is graded antisymmetric.
    pub fn add_braided(&self, l: &ChainComplex) -> BilinearForm {
        self.sub(&self.braided(l).scale(&-Q::one()))
    }
}

/// Recovers `λ` with `∂λ = Λ̃ − Λ` on the pc/fc complex.
pub fn recover_perturbation(t: &Trivialization, t_tilde: &Trivialization, cap: usize) -> Result<MapChain, TheoryError> {
    let diff = t_tilde.chain.sub(&t.chain);
    solve_boundary(&diff, cap)?.ok_or(TheoryError::Absent)
}

/// Space of degree-two chains on the pc/fc complex; zero means trivializations are unique.
pub fn degree_two_chain_dim(obs: &ObservablesComplex, o: Orientation) -> usize {
    let w = &obs.pc_or_fc(o).complex;
    crate::complex::hom_dim(w, w, 2)
}

/// The braiding on `L ⊗ L`, exposed for antisymmetry checks on functionals.
pub fn tensor_braiding(obs: &ObservablesComplex) -> ChainMap {
    braiding(&obs.l.complex, &obs.l.complex)
}

/// `τ` of the standard retarded/advanced pair, checked for compatibility.
pub fn standard_tau(obs: &ObservablesComplex) -> Result<BilinearForm, TheoryError> {
    let plus = standard_trivialization(obs, Orientation::Retarded)?;
    let minus = standard_trivialization(obs, Orientation::Advanced)?;
    Ok(unshifted_poisson(obs, &plus, &minus, false)?.tau)
}

/// `H₀(L)` as a complex in degree 0 with the induced pairing, and the projection `L → H₀(L)`.
#[derive(Clone, Debug)]
pub struct HomologyModel {
    pub complex: Arc<ChainComplex>,
    pub tau: BilinearForm,
    pub map: ChainMap,
    /// Basis vectors of `L₀` spanning a complement of the boundaries.
    pub representatives: Vec<usize>,
}

/// Projects `L₀` onto a coordinate complement of `im d₁`; the complement vectors map to the
/// basis of `H₀` exactly.
pub fn degree_zero_homology_model(l: &Arc<ChainComplex>, tau: &BilinearForm) -> HomologyModel {
    let n0 = l.dim(0);
    let mut ech = crate::linalg::Echelon::<Q>::new(n0);
    for r in l.diff(1).transpose().rows() {
        ech.insert(r.clone());
    }
    let pivots: std::collections::BTreeSet<usize> = ech.pivot_cols().into_iter().collect();
    let reps: Vec<usize> = (0..n0).filter(|c| !pivots.contains(c)).collect();
    let pos: BTreeMap<usize, usize> = reps.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let mut entries = Vec::new();
    for j in 0..n0 {
        for (c, v) in ech.reduce_full(vec![(j, Q::one())]) {
            entries.push((pos[&c], j, v));
        }
    }
    let f0 = SparseMat::from_triplets(reps.len(), n0, entries);
    let h = Arc::new(make_complex(BTreeMap::from([(0, reps.len())]), BTreeMap::new()).expect("single degree"));
    let t0 = tau.block(0, l).submatrix(&reps, &reps);
    let map = ChainMap::new_unchecked(l.clone(), h.clone(), BTreeMap::from([(0, f0)]));
    HomologyModel { complex: h, tau: BilinearForm { degree: 0, blocks: BTreeMap::from([(0, t0)]) }, map, representatives: reps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::homology_ranks;
    use crate::lattice::build_cylinder;
    use crate::scalar::q;

    fn obs(kind: Kind, nt: usize, nx: usize, mass: i64) -> ObservablesComplex {
        let lat = Arc::new(build_cylinder(nt, nx, q(1), q(1)).unwrap());
        observables_complex(Arc::new(make_theory(kind, lat, q(mass)).unwrap())).unwrap()
    }

    #[test]
    fn kg_small_pipeline() {
        let o = obs(Kind::KG, 10, 3, 1);
        let h = homology_ranks(&o.l.complex);
        assert_eq!((h.rank(0), h.rank(1)), (6, 0));
        let p = standard_trivialization(&o, Orientation::Retarded).unwrap();
        let m = standard_trivialization(&o, Orientation::Advanced).unwrap();
        let rep = verify_trivialization(&o, &p, &m);
        for c in &rep.checks {
            assert!(c.passed, "{c:?}");
        }
        assert_eq!(degree_two_chain_dim(&o, Orientation::Retarded), 0);
    }

    #[test]
    fn ym_small_pipeline() {
        let o = obs(Kind::YM, 12, 3, 0);
        let h = homology_ranks(&o.l.complex);
        assert_eq!((h.rank(2), h.rank(1), h.rank(-1)), (0, 1, 1));
        let p = standard_trivialization(&o, Orientation::Retarded).unwrap();
        let m = standard_trivialization(&o, Orientation::Advanced).unwrap();
        let rep = verify_trivialization(&o, &p, &m);
        for c in &rep.checks {
            assert!(c.passed, "{c:?}");
        }
    }
}
