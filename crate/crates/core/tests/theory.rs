use std::sync::Arc;

use dgqft::complex::homology_ranks;
use dgqft::green::{causal_propagator, Orientation};
use dgqft::lattice::{build_cylinder, Form};
use dgqft::scalar::q;
use dgqft::theory::*;
use dgqft::{MapChain, SparseMat, Q};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn obs(kind: Kind, nt: usize, nx: usize, mass: i64) -> ObservablesComplex {
    let lat = Arc::new(build_cylinder(nt, nx, q(1), q(1)).unwrap());
    observables_complex(Arc::new(make_theory(kind, lat, q(mass)).unwrap())).unwrap()
}

fn pair(o: &ObservablesComplex) -> (Trivialization, Trivialization) {
    (
        standard_trivialization(o, Orientation::Retarded).unwrap(),
        standard_trivialization(o, Orientation::Advanced).unwrap(),
    )
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Q> {
    (0..n).map(|_| q(rng.gen_range(-4..=4))).collect()
}

#[test]
fn kg_homology_counts_cauchy_data() {
    for mass in [0, 1] {
        let o = obs(Kind::KG, 12, 4, mass);
        let h = homology_ranks(&o.l.complex);
        assert_eq!(h.rank(0), 8);
        assert_eq!(h.rank(1), 0);
    }
}

#[test]
fn ym_homology_ranks() {
    let o = obs(Kind::YM, 12, 4, 0);
    let h = homology_ranks(&o.l.complex);
    assert_eq!([h.rank(2), h.rank(1), h.rank(-1)], [0, 1, 1]);
}

#[test]
fn solution_complex_shapes() {
    let o = obs(Kind::KG, 12, 4, 1);
    assert_eq!(o.sol.full.support(), vec![-1, 0]);
    let y = obs(Kind::YM, 12, 4, 0);
    let lat = y.lattice();
    let dims: Vec<usize> = [1, 0, -1, -2].iter().map(|&n| y.sol.full.dim(n)).collect();
    assert_eq!(dims, vec![lat.num_vertices(), lat.num_edges(), lat.num_edges(), lat.num_vertices()]);
}

#[test]
fn spec_json_fields() {
    let o = obs(Kind::YM, 12, 4, 0);
    let v = o.spec.to_json();
    for k in ["kind", "nt", "nx", "mass", "margins"] {
        assert!(v.get(k).is_some(), "{k}");
    }
}

#[test]
fn standard_pairs_verify_at_12_4() {
    for (kind, mass) in [(Kind::KG, 1), (Kind::YM, 0)] {
        let o = obs(kind, 12, 4, mass);
        let (p, m) = pair(&o);
        let rep = verify_trivialization(&o, &p, &m);
        for c in &rep.checks {
            assert!(c.passed, "{kind:?} {c:?}");
        }
    }
}

#[test]
fn falsified_pair_fails_skew_adjointness() {
    let o = obs(Kind::YM, 12, 4, 0);
    let (p, m) = pair(&o);
    let zero = Trivialization { orientation: m.orientation, chain: MapChain::zero(m.chain.source.clone(), m.chain.target.clone(), 1) };
    let rep = verify_trivialization(&o, &p, &zero);
    let c = rep.check("skew_adjoint").unwrap();
    assert!(!c.passed && c.witness.is_some());
    assert!(matches!(unshifted_poisson(&o, &p, &zero, false), Err(TheoryError::IncompatiblePair(_))));
    assert!(!unshifted_poisson(&o, &p, &zero, true).unwrap().verified);
}

#[test]
fn kg_tau_closed_form_and_descends() {
    let o = obs(Kind::KG, 12, 4, 1);
    let lat = o.lattice();
    let (p, m) = pair(&o);
    let tau = unshifted_poisson(&o, &p, &m, false).unwrap().tau;
    let g = causal_propagator(lat, Form::Zero, &q(1)).unwrap();
    let h = lat.metric(Form::Zero);
    let cells = &o.l.cells[&0];
    for (i, &a) in cells.iter().enumerate() {
        for (k, &b) in cells.iter().enumerate() {
            assert_eq!(tau.eval(0, i, k), -h[a].clone() * g.get(a, b), "({a},{b})");
        }
    }
    // τ(φ, P ψ) = 0 for ψ ∈ L_1.
    let t0 = tau.block(0, &o.l.complex);
    let pd = t0.mul(&o.l.complex.diff(1));
    assert!(pd.is_zero());
}

#[test]
fn ym_tau_closed_forms_and_symmetry() {
    let o = obs(Kind::YM, 12, 4, 0);
    let lat = o.lattice();
    let (p, m) = pair(&o);
    let tau = unshifted_poisson(&o, &p, &m, false).unwrap().tau;
    let l = &o.l.complex;
    let g = causal_propagator(lat, Form::One, &Q::zero()).unwrap();
    let h1 = SparseMat::diag(lat.metric(Form::One));
    let c0 = &o.l.cells[&0];
    let c1 = &o.l.cells[&1];
    let cm = &o.l.cells[&-1];
    let expect00 = h1.mul(&g).neg().submatrix(c0, c0);
    assert_eq!(tau.block(0, l), expect00);
    let expect1m = h1.mul(&g).mul(lat.d(Form::Zero)).neg().submatrix(c1, cm);
    assert_eq!(tau.block(1, l), expect1m);
    // even pair antisymmetric, odd pair symmetric
    assert_eq!(tau.block(0, l).transpose(), tau.block(0, l).neg());
    assert_eq!(tau.block(1, l).transpose(), tau.block(-1, l));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = rand_vec(&mut rng, c0.len());
    let b = rand_vec(&mut rng, c0.len());
    let t = tau.block(0, l);
    assert_eq!(dot(&a, &t.mul_vec(&b)), -dot(&b, &t.mul_vec(&a)));
}

fn dot(a: &[Q], b: &[Q]) -> Q {
    a.iter().zip(b).map(|(x, y)| x * y).fold(Q::zero(), |s, v| s + v)
}

#[test]
fn upsilon_kg_formula() {
    let o = obs(Kind::KG, 12, 4, 1);
    let ups = shifted_poisson(&o);
    let h = o.lattice().metric(Form::Zero);
    let l = &o.l.complex;
    let b1 = ups.block(1, l);
    let b0 = ups.block(0, l);
    for (i, &c) in o.l.cells[&1].iter().enumerate() {
        for (k, &e) in o.l.cells[&0].iter().enumerate() {
            let want = if c == e { -h[c].clone() } else { Q::zero() };
            assert_eq!(b1.get(i, k), want);
            assert_eq!(b0.get(k, i), want);
        }
    }
    assert!(ups.compose_d(l).is_zero());
}

#[test]
fn tau_vanishes_on_causally_disjoint_cells() {
    let o = obs(Kind::KG, 12, 6, 1);
    let lat = o.lattice();
    let (p, m) = pair(&o);
    let tau = unshifted_poisson(&o, &p, &m, false).unwrap().tau;
    let cells = &o.l.cells[&0];
    let mut disjoint = 0;
    for (i, &a) in cells.iter().enumerate() {
        let sa = lat.cell_vertices(Form::Zero, a).into_iter().collect();
        for (k, &b) in cells.iter().enumerate() {
            let sb = lat.cell_vertices(Form::Zero, b).into_iter().collect();
            if dgqft::lattice::causally_disjoint_sets(lat, &sa, &sb, Default::default()) {
                disjoint += 1;
                assert!(tau.eval(0, i, k).is_zero());
            }
        }
    }
    assert!(disjoint > 0);
}

#[test]
fn kg_trivialization_is_unique() {
    let o = obs(Kind::KG, 12, 4, 1);
    assert_eq!(degree_two_chain_dim(&o, Orientation::Retarded), 0);
    assert_eq!(degree_two_chain_dim(&o, Orientation::Advanced), 0);
    let (p, m) = pair(&o);
    let tau = unshifted_poisson(&o, &p, &m, false).unwrap().tau;
    let rho = homotopy_between_taus(&o, &tau, &tau, 100_000).unwrap();
    assert!(rho.form.is_zero());
}

#[test]
fn perturbation_shape_and_zero() {
    let o = obs(Kind::YM, 12, 4, 0);
    let (p, _) = pair(&o);
    let z = MapChain::zero(p.chain.source.clone(), p.chain.target.clone(), 2);
    assert_eq!(perturb_trivialization(&p, &z).unwrap(), p);
    let bad = MapChain::zero(p.chain.source.clone(), p.chain.target.clone(), 1);
    assert!(matches!(perturb_trivialization(&p, &bad), Err(TheoryError::ShapeMismatch(_))));
}

#[test]
fn ym_perturbed_pair_rho_and_lambda_recovery() {
    let o = obs(Kind::YM, 12, 4, 0);
    let (p, m) = pair(&o);
    let lam = compatible_perturbation(&o, 11, 0.05).unwrap();
    assert!(!lam.is_zero());
    let pt = perturb_trivialization(&p, &lam).unwrap();
    for c in contracting_checks(&o, &pt) {
        assert!(c.passed, "{c:?}");
    }
    let rep = verify_trivialization(&o, &pt, &m);
    assert!(rep.all_passed(), "{:?}", rep.checks.iter().find(|c| !c.passed));
    let tau = unshifted_poisson(&o, &p, &m, false).unwrap().tau;
    let tau_t = unshifted_poisson(&o, &pt, &m, false).unwrap().tau;
    assert_ne!(tau, tau_t);
    let rho = homotopy_between_taus(&o, &tau, &tau_t, 100_000).unwrap();
    for c in rho.checks(&o, &tau, &tau_t) {
        assert!(c.passed, "{c:?}");
    }
    let rec = recover_perturbation(&p, &pt, 100_000).unwrap();
    assert_eq!(rec.boundary(), pt.chain.sub(&p.chain));
}

