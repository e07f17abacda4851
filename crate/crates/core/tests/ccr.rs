use std::collections::BTreeMap;
use std::sync::Arc;

use dgqft::ccr::*;
use dgqft::complex::is_quasi_iso;
use dgqft::lattice::build_cylinder;
use dgqft::scalar::q;
use dgqft::theory::*;
use dgqft::Gauss;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn obs(kind: Kind, nt: usize, nx: usize, mass: i64) -> ObservablesComplex {
    let lat = Arc::new(build_cylinder(nt, nx, q(1), q(1)).unwrap());
    observables_complex(Arc::new(make_theory(kind, lat, q(mass)).unwrap())).unwrap()
}

fn algebra(o: &ObservablesComplex) -> DgStarAlgebra {
    ccr_algebra(o.l.complex.clone(), standard_tau(o).unwrap(), 12).unwrap()
}

#[test]
fn kg_commutator_matches_tau() {
    let o = obs(Kind::KG, 12, 4, 1);
    let a = algebra(&o);
    let n = o.l.dim(0);
    for i in (0..n).step_by(3) {
        for j in (0..n).step_by(5) {
            let (gi, gj) = (a.generator(0, i), a.generator(0, j));
            let c = a.graded_commutator(&a.gen(gi), &a.gen(gj)).unwrap();
            assert_eq!(c, Element::scalar(Gauss::imag(a.tau.eval(0, i, j))));
        }
    }
}

#[test]
fn ym_commutators_and_odd_anticommutators() {
    let o = obs(Kind::YM, 12, 4, 0);
    let a = algebra(&o);
    let mut nonzero = 0;
    for i in 0..o.l.dim(0) {
        for j in 0..o.l.dim(0) {
            let (gi, gj) = (a.generator(0, i), a.generator(0, j));
            let c = a.graded_commutator(&a.gen(gi), &a.gen(gj)).unwrap();
            let t = a.tau.eval(0, i, j);
            nonzero += usize::from(!t.is_zero());
            assert_eq!(c, Element::scalar(Gauss::imag(t)));
        }
    }
    assert!(nonzero > 0);
    // α (degree 1), χ (degree −1): αχ + χα = iτ(α, χ)
    for i in 0..o.l.dim(1) {
        for j in 0..o.l.dim(-1) {
            let (al, chi) = (a.gen(a.generator(1, i)), a.gen(a.generator(-1, j)));
            let s = a.multiply(&al, &chi).unwrap().add(&a.multiply(&chi, &al).unwrap());
            assert_eq!(s, Element::scalar(Gauss::imag(a.tau.eval(1, i, j))));
        }
    }
    let chi = a.gen(a.generator(-1, 0));
    assert!(a.multiply(&chi, &chi).unwrap().is_zero());
}

#[test]
fn ym_ideal_stability() {
    let o = obs(Kind::YM, 12, 4, 0);
    let a = algebra(&o);
    let plain = a.with_rule(InvolutionRule::Plain);
    let mut plain_failures = 0;
    for i in 0..o.l.dim(1) {
        for j in 0..o.l.dim(-1) {
            let (al, chi) = (a.generator(1, i), a.generator(-1, j));
            assert!(a.involuted_relation(al, chi).unwrap().is_zero());
            assert!(a.differentiated_relation(al, chi).unwrap().is_zero());
            plain_failures += usize::from(!plain.involuted_relation(al, chi).unwrap().is_zero());
        }
    }
    assert!(plain_failures > 0);
}

#[test]
fn rewriting_laws_on_random_inputs() {
    let o = obs(Kind::YM, 12, 4, 0);
    let a = algebra(&o);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let l = rng.gen_range(0..=6);
        let w = a.random_word(&mut rng, l);
        assert_eq!(a.normal_word(&w, Strategy::Leftmost).unwrap(), a.normal_word(&w, Strategy::Rightmost).unwrap());
    }
    for _ in 0..30 {
        let x = a.random_element(&mut rng, 2, 2);
        let y = a.random_element(&mut rng, 2, 2);
        let z = a.random_element(&mut rng, 2, 2);
        let l = a.multiply(&a.multiply(&x, &y).unwrap(), &z).unwrap();
        let r = a.multiply(&x, &a.multiply(&y, &z).unwrap()).unwrap();
        assert_eq!(l, r);
        assert!(a.differential(&a.differential(&x).unwrap()).unwrap().is_zero());
        // Leibniz on homogeneous parts
        for (p, xp) in a.homogeneous_parts(&x) {
            let lhs = a.differential(&a.multiply(&xp, &y).unwrap()).unwrap();
            let s = if p % 2 == 0 { Gauss::one() } else { -Gauss::one() };
            let rhs = a
                .multiply(&a.differential(&xp).unwrap(), &y)
                .unwrap()
                .add(&a.multiply(&xp, &a.differential(&y).unwrap()).unwrap().scale(&s));
            assert_eq!(lhs, rhs);
        }
        // involution: antilinear, involutive, reverses products with the Koszul sign
        assert_eq!(a.involution(&a.involution(&x).unwrap()).unwrap(), x);
        assert_eq!(a.involution(&x.scale(&Gauss::i())).unwrap(), a.involution(&x).unwrap().scale(&-Gauss::i()));
        for (p, xp) in a.homogeneous_parts(&x) {
            for (qd, yq) in a.homogeneous_parts(&y) {
                let lhs = a.involution(&a.multiply(&xp, &yq).unwrap()).unwrap();
                let s = if (p * qd) % 2 == 0 { Gauss::one() } else { -Gauss::one() };
                let rhs = a.multiply(&a.involution(&yq).unwrap(), &a.involution(&xp).unwrap()).unwrap().scale(&s);
                assert_eq!(lhs, rhs);
            }
        }
    }
}

#[test]
fn unit_laws_and_abelian_case() {
    let o = obs(Kind::KG, 12, 4, 0);
    let a = algebra(&o);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = a.random_element(&mut rng, 3, 3);
    assert_eq!(a.multiply(&Element::one(), &x).unwrap(), x);
    assert_eq!(a.multiply(&x, &Element::one()).unwrap(), x);
    let zero_tau = BilinearForm { degree: 0, blocks: BTreeMap::new() };
    let ab = ccr_algebra(o.l.complex.clone(), zero_tau.clone(), 8).unwrap();
    let (g1, g2) = (ab.generator(0, 1), ab.generator(0, 4));
    assert_eq!(ab.multiply(&ab.gen(g2), &ab.gen(g1)).unwrap(), Element::term(vec![g1, g2], Gauss::one()));
    let heis = heisenberg(o.l.complex.clone(), zero_tau).unwrap();
    let mut v = zero_vec(&heis.complex);
    v.get_mut(&0).unwrap()[0] = Gauss::one();
    assert_eq!(heis.bracket(&v, &v), zero_vec(&heis.complex));
}

#[test]
fn heisenberg_bracket_and_unit() {
    let o = obs(Kind::KG, 12, 4, 1);
    let tau = standard_tau(&o).unwrap();
    let heis = heisenberg(o.l.complex.clone(), tau.clone()).unwrap();
    assert!(heis.bracket_chain_map().passed);
    let mut a = zero_vec(&heis.complex);
    let mut b = zero_vec(&heis.complex);
    a.get_mut(&0).unwrap()[2] = Gauss::one();
    b.get_mut(&0).unwrap()[9] = Gauss::one();
    let br = heis.bracket(&a, &b);
    assert_eq!(br[&0][o.l.dim(0)], Gauss::imag(tau.eval(0, 2, 9)));
    assert_eq!(heis.bracket(&heis.unit(), &a), zero_vec(&heis.complex));
}

#[test]
fn morphism_from_projection_to_homology() {
    let o = obs(Kind::KG, 8, 3, 1);
    let tau = standard_tau(&o).unwrap();
    let model = degree_zero_homology_model(&o.l.complex, &tau);
    assert!(model.map.check().is_ok());
    assert!(is_quasi_iso(&model.map).is_quasi_iso);
    let src = ccr_algebra(o.l.complex.clone(), tau, 8).unwrap();
    let tgt = ccr_algebra(model.complex.clone(), model.tau.clone(), 8).unwrap();
    let f = AlgebraMorphism::from_chain_map(&src, &tgt, &model.map);
    assert!(f.preserves_tau(&src, &tgt).passed);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let x = src.random_element(&mut rng, 2, 2);
        let y = src.random_element(&mut rng, 2, 2);
        let lhs = f.apply(&tgt, &src.multiply(&x, &y).unwrap()).unwrap();
        let rhs = tgt.multiply(&f.apply(&tgt, &x).unwrap(), &f.apply(&tgt, &y).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
        assert_eq!(f.apply(&tgt, &src.differential(&x).unwrap()).unwrap(), Element::zero());
        assert_eq!(
            f.apply(&tgt, &src.involution(&x).unwrap()).unwrap(),
            tgt.involution(&f.apply(&tgt, &x).unwrap()).unwrap()
        );
    }
    assert_eq!(f.apply(&tgt, &Element::one()).unwrap(), Element::one());
}

#[test]
fn stage_certificates_small() {
    let o = obs(Kind::KG, 8, 3, 1);
    let tau = standard_tau(&o).unwrap();
    let model = degree_zero_homology_model(&o.l.complex, &tau);
    let src = ccr_algebra(o.l.complex.clone(), tau, 8).unwrap();
    let tgt = ccr_algebra(model.complex.clone(), model.tau.clone(), 8).unwrap();
    let f = AlgebraMorphism::from_chain_map(&src, &tgt, &model.map);
    for k in 0..=2 {
        let r = filtration_stage_certificate(&src, &tgt, &f, k).unwrap();
        assert!(r.quasi_iso, "{r:?}");
    }
    // a map killing one homology class is not surjective
    let mut broken = f.clone();
    let rep = model.representatives[0];
    broken.images[src.generator(0, rep) as usize].clear();
    let r = filtration_stage_certificate(&src, &tgt, &broken, 1).unwrap();
    assert!(!r.quasi_iso);
}

#[test]
fn zigzag_suites() {
    for (kind, mass) in [(Kind::KG, 1), (Kind::YM, 0)] {
        let o = obs(kind, 12, 4, mass);
        let tau = standard_tau(&o).unwrap();
        let zero = BilinearForm { degree: -1, blocks: BTreeMap::new() };
        let z = zigzag_object(o.l.complex.clone(), tau.clone(), zero).unwrap();
        let rep = verify_zigzag(&z);
        assert!(rep.checks.iter().all(|c| c.passed), "{kind:?} {:?}", rep.checks);
    }
}

#[test]
fn zigzag_with_random_rho_and_corruption() {
    let o = obs(Kind::YM, 12, 4, 0);
    let tau = standard_tau(&o).unwrap();
    let l = &o.l.complex;
    let rho = random_rho(l, &mut ChaCha8Rng::seed_from_u64(4), 0.05);
    assert!(!rho.is_zero());
    let z = zigzag_object(l.clone(), tau.clone(), rho).unwrap();
    assert!(!z.d_rho.is_zero());
    let rep = verify_zigzag(&z);
    assert!(rep.checks.iter().all(|c| c.passed), "{:?}", rep.checks);
    // π_s(x) = s·1
    let x_col = l.dim(0);
    for s in 0..2 {
        assert_eq!(z.pi[s].component(0).get(l.dim(0), x_col), q(s as i64));
    }
    let bad = z.corrupted(1, 0, l.dim(0), x_col, q(0));
    let rep = verify_zigzag(&bad);
    let c = rep.checks.iter().find(|c| c.name == "pi1_bracket").unwrap();
    assert!(!c.passed && c.witness.is_some());
}
