//! Retarded and advanced Green's operators by time-ordered block substitution.

use std::collections::BTreeSet;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{Direction, Form, Lattice};
use crate::linalg;
use crate::scalar::{fmt_q, qf, Q};
use crate::sparse::{axpy, SparseMat, SparseVec};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GreenError {
    #[error("time block at level {level} is not invertible ({rows}x{cols})")]
    SingularBlock { level: i64, rows: usize, cols: usize },
    #[error("operator couples level {level} to level {reached}, beyond the two-level stencil")]
    WideStencil { level: i64, reached: i64 },
    #[error("input cell {cell} at level {level} lies outside the domain window [{lo}, {hi}]")]
    SupportViolation { cell: usize, level: i64, lo: i64, hi: i64 },
    #[error("input has length {found}, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    Retarded,
    Advanced,
}

impl Orientation {
    pub fn direction(self) -> Direction {
        match self {
            Orientation::Retarded => Direction::Future,
            Orientation::Advanced => Direction::Past,
        }
    }
    pub fn opposite(self) -> Orientation {
        match self {
            Orientation::Retarded => Orientation::Advanced,
            Orientation::Advanced => Orientation::Retarded,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GreenOperator {
    pub orientation: Orientation,
    pub form: Form,
    pub mass: Q,
    /// Inputs must be supported on levels `domain.0..=domain.1`.
    pub domain: (i64, i64),
    matrix: SparseMat,
}

impl GreenOperator {
    pub fn matrix(&self) -> &SparseMat {
        &self.matrix
    }

    pub fn apply(&self, lat: &Lattice, v: &[Q]) -> Result<Vec<Q>, GreenError> {
        if v.len() != self.matrix.ncols() {
            return Err(GreenError::LengthMismatch { expected: self.matrix.ncols(), found: v.len() });
        }
        let (lo, hi) = self.domain;
        if let Some((cell, _)) = v.iter().enumerate().find(|(c, x)| {
            let l = lat.level(self.form, *c);
            !x.is_zero() && !(lo..=hi).contains(&l)
        }) {
            return Err(GreenError::SupportViolation { cell, level: lat.level(self.form, cell), lo, hi });
        }
        Ok(self.matrix.mul_vec(v))
    }

    /// Test hook: replace one entry of the stored matrix.
    pub fn corrupted(&self, row: usize, col: usize, value: Q) -> GreenOperator {
        let mut entries: Vec<(usize, usize, Q)> = self.matrix.iter().map(|(i, j, v)| (i, j, v.clone())).collect();
        entries.retain(|e| (e.0, e.1) != (row, col));
        entries.push((row, col, value));
        let matrix = SparseMat::from_triplets(self.matrix.nrows(), self.matrix.ncols(), entries);
        GreenOperator { matrix, ..self.clone() }
    }
}

/// Input cells allowed for both orientations: levels `[2, max − 2]`.
pub fn domain_window(lat: &Lattice) -> (i64, i64) {
    (2, lat.max_level() - 2)
}

/// Solves `P u = φ` level by level. Retarded: rows at level `L` fix the unknowns at `L + 2`,
/// starting from zero on levels 0 and 1. Advanced runs the mirror image.
pub fn green_from_operator(
    lat: &Lattice,
    form: Form,
    p: &SparseMat,
    orientation: Orientation,
) -> Result<SparseMat, GreenError> {
    let n = lat.num_cells(form);
    let mx = lat.max_level();
    let mut g: Vec<Option<SparseVec>> = vec![None; n];
    for c in 0..n {
        let l = lat.level(form, c);
        let seeded = match orientation {
            Orientation::Retarded => l <= 1,
            Orientation::Advanced => l >= mx - 1,
        };
        if seeded {
            g[c] = Some(Vec::new());
        }
    }
    let steps: Vec<i64> = match orientation {
        Orientation::Retarded => (0..=mx - 2).collect(),
        Orientation::Advanced => (2..=mx).rev().collect(),
    };
    for l in steps {
        let target = match orientation {
            Orientation::Retarded => l + 2,
            Orientation::Advanced => l - 2,
        };
        let rows = lat.cells_at_level(form, l);
        let cols = lat.cells_at_level(form, target);
        if rows.is_empty() && cols.is_empty() {
            continue;
        }
        if rows.len() != cols.len() {
            return Err(GreenError::SingularBlock { level: l, rows: rows.len(), cols: cols.len() });
        }
        let block = p.submatrix(rows, cols);
        let binv = linalg::solve_many(&block, &SparseMat::identity(rows.len()))
            .ok_or(GreenError::SingularBlock { level: l, rows: rows.len(), cols: cols.len() })?;
        let col_set: BTreeSet<usize> = cols.iter().copied().collect();
        let mut rhs: Vec<SparseVec> = Vec::with_capacity(rows.len());
        for &r in rows {
            let mut acc: SparseVec = vec![(r, Q::from_integer(1.into()))];
            for (c, a) in p.row(r) {
                if col_set.contains(c) {
                    continue;
                }
                match &g[*c] {
                    Some(gc) => acc = axpy(&acc, &-a, gc),
                    None => return Err(GreenError::WideStencil { level: l, reached: lat.level(form, *c) }),
                }
            }
            rhs.push(acc);
        }
        // binv[r] is column r of B^{-1}.
        for (k, &c) in cols.iter().enumerate() {
            let mut acc: SparseVec = Vec::new();
            for (r, rh) in rhs.iter().enumerate() {
                let coef = &binv[r][k];
                if !coef.is_zero() {
                    acc = axpy(&acc, coef, rh);
                }
            }
            g[c] = Some(acc);
        }
    }
    let rows = g.into_iter().map(|r| r.unwrap_or_default()).collect();
    Ok(SparseMat::from_rows(n, rows))
}

pub fn green_operator(lat: &Lattice, form: Form, mass: &Q, orientation: Orientation) -> Result<GreenOperator, GreenError> {
    let p = lat.wave_operator(form, mass);
    let matrix = green_from_operator(lat, form, &p, orientation)?;
    Ok(GreenOperator { orientation, form, mass: mass.clone(), domain: domain_window(lat), matrix })
}

/// `G = G⁺ − G⁻`.
pub fn causal_propagator(lat: &Lattice, form: Form, mass: &Q) -> Result<SparseMat, GreenError> {
    let gp = green_operator(lat, form, mass, Orientation::Retarded)?;
    let gm = green_operator(lat, form, mass, Orientation::Advanced)?;
    Ok(gp.matrix.sub(&gm.matrix))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub row: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub input_index: usize,
    pub witness_entry: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxiomResult {
    pub axiom: String,
    pub basis_size: usize,
    pub failures: Vec<Failure>,
}

impl AxiomResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreenReport {
    pub entries: Vec<AxiomResult>,
}

impl GreenReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed())
    }
    pub fn entry(&self, axiom: &str) -> Option<&AxiomResult> {
        self.entries.iter().find(|e| e.axiom == axiom)
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub random_samples: usize,
    pub seed: u64,
    /// Failures recorded per axiom before stopping.
    pub max_failures: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { random_samples: 8, seed: 7, max_failures: 5 }
    }
}

fn column_mismatch(m: &SparseMat, expected: &SparseMat, col: usize, rows: &[usize]) -> Option<Witness> {
    rows.iter().find_map(|&r| {
        let (a, b) = (m.get(r, col), expected.get(r, col));
        (a != b).then(|| Witness { row: r, expected: fmt_q(&b), found: fmt_q(&a) })
    })
}

fn check_columns(axiom: &str, m: &SparseMat, expected: &SparseMat, cols: &[usize], rows: &[usize], cap: usize) -> AxiomResult {
    let failures = cols
        .iter()
        .filter_map(|&c| column_mismatch(m, expected, c, rows).map(|w| Failure { input_index: c, witness_entry: Some(w) }))
        .take(cap)
        .collect();
    AxiomResult { axiom: axiom.into(), basis_size: cols.len(), failures }
}

fn random_window_cochain(rng: &mut ChaCha8Rng, n: usize, window: &[usize]) -> Vec<Q> {
    let mut v = vec![Q::zero(); n];
    for &c in window {
        if rng.gen_bool(0.3) {
            v[c] = qf(rng.gen_range(-4..=4), rng.gen_range(1..=3));
        }
    }
    v
}

fn orient_tag(o: Orientation) -> &'static str {
    match o {
        Orientation::Retarded => "retarded",
        Orientation::Advanced => "advanced",
    }
}

/// Axioms (i)–(iii) for both orientations, the adjoint relation, skew-adjointness and
/// annihilation properties of the causal propagator, and exactness by rank counting.
pub fn verify_green_axioms(lat: &Lattice, gp: &GreenOperator, gm: &GreenOperator, opts: &VerifyOptions) -> GreenReport {
    let form = gp.form;
    let p = lat.wave_operator(form, &gp.mass);
    let n = lat.num_cells(form);
    let (lo, hi) = domain_window(lat);
    let w = lat.cells_in_levels(form, lo, hi);
    let all: Vec<usize> = (0..n).collect();
    let id = SparseMat::identity(n);
    let cap = opts.max_failures;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut entries = Vec::new();

    for g in [gp, gm] {
        let tag = orient_tag(g.orientation);
        let gpm = g.matrix.mul(&p);
        entries.push(check_columns(&format!("left_inverse_{tag}"), &gpm, &id, &w, &all, cap));
        let pg = p.mul(&g.matrix);
        entries.push(check_columns(&format!("right_inverse_{tag}"), &pg, &id, &w, &w, cap));

        let mut failures = Vec::new();
        let mut inputs: Vec<Vec<Q>> = w.iter().map(|&c| { let mut v = vec![Q::zero(); n]; v[c] = Q::from_integer(1.into()); v }).collect();
        inputs.extend((0..opts.random_samples).map(|_| random_window_cochain(&mut rng, n, &w)));
        for (k, v) in inputs.iter().enumerate() {
            let out = g.matrix.mul_vec(v);
            let cone = lat.causal_cone(&lat.support_vertices(form, v), g.orientation.direction());
            if let Some(c) = out.iter().enumerate().find(|(c, x)| {
                !x.is_zero() && lat.cell_vertices(form, *c).iter().any(|vx| !cone.contains(vx))
            }) {
                if failures.len() < cap {
                    failures.push(Failure {
                        input_index: k,
                        witness_entry: Some(Witness { row: c.0, expected: "0/1".into(), found: fmt_q(c.1) }),
                    });
                }
            }
            if k >= w.len() {
                let back = g.matrix.mul_vec(&p.mul_vec(v));
                if &back != v && failures.len() < cap {
                    let r = (0..n).find(|&r| back[r] != v[r]).unwrap();
                    failures.push(Failure {
                        input_index: k,
                        witness_entry: Some(Witness { row: r, expected: fmt_q(&v[r]), found: fmt_q(&back[r]) }),
                    });
                }
            }
        }
        entries.push(AxiomResult { axiom: format!("support_{tag}"), basis_size: inputs.len(), failures });
    }

    // ⟨φ, G⁺ψ⟩ = ⟨G⁻φ, ψ⟩ on the window: H_i G⁺_ij = H_j G⁻_ji.
    let h = lat.metric(form);
    let hg = SparseMat::diag(h).mul(&gp.matrix);
    let gh = gm.matrix.transpose().mul(&SparseMat::diag(h));
    entries.push(check_columns("adjoint_retarded_advanced", &hg, &gh, &w, &w, cap));

    let g = gp.matrix.sub(&gm.matrix);
    let hgc = SparseMat::diag(h).mul(&g);
    entries.push(check_columns("skew_adjoint_causal_propagator", &hgc, &hgc.transpose().neg(), &w, &w, cap));
    let zero = SparseMat::zeros(n, n);
    entries.push(check_columns("causal_propagator_gp_zero", &g.mul(&p), &zero, &w, &all, cap));
    entries.push(check_columns("causal_propagator_pg_zero", &p.mul(&g), &zero, &w, &w, cap));

    entries.push(exactness(lat, form, &p, &g));
    GreenReport { entries }
}

/// Rank-counting check that `ker G = im P` on compact cochains and `ker P = im G`.
fn exactness(lat: &Lattice, form: Form, p: &SparseMat, g: &SparseMat) -> AxiomResult {
    let (lo, hi) = domain_window(lat);
    let wc = lat.cells_in_levels(form, lo + 2, hi - 2);
    let inner = lat.cells_in_levels(form, lo + 4, hi - 4);
    let rows_w = lat.cells_in_levels(form, lo, hi);
    let all: Vec<usize> = (0..lat.num_cells(form)).collect();
    let mut failures = Vec::new();
    let g_wc = g.submatrix(&all, &wc);
    let nullity = wc.len() - linalg::rank(&g_wc);
    let gp_inner = g.mul(&p.submatrix(&all, &inner));
    if !gp_inner.is_zero() {
        let (r, c, v) = gp_inner.first_nonzero().unwrap();
        failures.push(Failure { input_index: inner[c], witness_entry: Some(Witness { row: r, expected: "0/1".into(), found: fmt_q(&v) }) });
    }
    if nullity != inner.len() {
        failures.push(Failure {
            input_index: 0,
            witness_entry: Some(Witness { row: 0, expected: format!("nullity {}", inner.len()), found: format!("nullity {nullity}") }),
        });
    }
    let pw = p.submatrix(&rows_w, &all);
    let ker_p = all.len() - linalg::rank(&pw);
    let rank_g = wc.len() - nullity;
    if ker_p != rank_g {
        failures.push(Failure {
            input_index: 0,
            witness_entry: Some(Witness { row: 0, expected: format!("dim ker P = {ker_p}"), found: format!("rank G = {rank_g}") }),
        });
    }
    AxiomResult { axiom: "exact_sequence".into(), basis_size: wc.len(), failures }
}

/// `d G_p = G_{p+1} d` and `δ G_{p+1} = G_p δ` on window inputs, compared on window outputs.
pub fn verify_commutation(lat: &Lattice, lower: &GreenOperator, upper: &GreenOperator, opts: &VerifyOptions) -> Vec<AxiomResult> {
    let (lo, hi) = domain_window(lat);
    let (fl, fu) = (lower.form, upper.form);
    let d = lat.d(fl);
    let delta = lat.delta(fu);
    let wl = lat.cells_in_levels(fl, lo, hi);
    let wu = lat.cells_in_levels(fu, lo, hi);
    let tag = orient_tag(lower.orientation);
    let dg = d.mul(lower.matrix());
    let gd = upper.matrix().mul(d);
    let dg2 = delta.mul(upper.matrix());
    let gd2 = lower.matrix().mul(delta);
    vec![
        check_columns(&format!("d_commutes_{tag}"), &dg, &gd, &wl, &wu, opts.max_failures),
        check_columns(&format!("codifferential_commutes_{tag}"), &dg2, &gd2, &wu, &wl, opts.max_failures),
    ]
}

impl GreenReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.entries).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_cylinder;
    use crate::scalar::q;

    #[test]
    fn zero_input() {
        let lat = build_cylinder(8, 3, q(1), q(1)).unwrap();
        let g = green_operator(&lat, Form::Zero, &q(0), Orientation::Retarded).unwrap();
        let z = vec![Q::zero(); lat.num_vertices()];
        assert_eq!(g.apply(&lat, &z).unwrap(), z);
        let mut bad = z.clone();
        bad[0] = q(1);
        assert!(matches!(g.apply(&lat, &bad), Err(GreenError::SupportViolation { cell: 0, .. })));
    }

    #[test]
    fn small_axioms() {
        let lat = build_cylinder(8, 3, q(1), q(1)).unwrap();
        for (form, m) in [(Form::Zero, q(0)), (Form::Zero, q(1)), (Form::One, q(0))] {
            let gp = green_operator(&lat, form, &m, Orientation::Retarded).unwrap();
            let gm = green_operator(&lat, form, &m, Orientation::Advanced).unwrap();
            let rep = verify_green_axioms(&lat, &gp, &gm, &VerifyOptions::default());
            for e in &rep.entries {
                assert!(e.passed(), "{form:?} {m}: {e:?}");
            }
        }
    }
}
