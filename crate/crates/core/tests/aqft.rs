use std::sync::Arc;

use dgqft::aqft::*;
use dgqft::ccr::Element;
use dgqft::green::causal_propagator;
use dgqft::lattice::{build_cylinder, ConeModel, Form, Region};
use dgqft::scalar::q;
use dgqft::theory::*;
use dgqft::{Gauss, SparseMat, Q};
use num_traits::Zero;

fn obs(kind: Kind, nt: usize, nx: usize, mass: i64) -> Arc<ObservablesComplex> {
    let lat = Arc::new(build_cylinder(nt, nx, q(1), q(1)).unwrap());
    Arc::new(observables_complex(Arc::new(make_theory(kind, lat, q(mass)).unwrap())).unwrap())
}

fn slab(t0: usize, t1: usize) -> Region {
    Region::TimeSlab { t0, t1 }
}

fn diamond(t: usize, x: usize, radius: usize) -> Region {
    Region::Diamond { apex: (t, x), radius }
}

#[test]
fn poset_shapes() {
    let o = obs(Kind::KG, 12, 6, 1);
    let only = build_region_poset(&o, &[slab(0, 11)]).unwrap();
    assert_eq!(only.regions.len(), 1);
    assert_eq!(only.inclusions, vec![(0, 0)]);

    let p = build_region_poset(&o, &[diamond(6, 0, 1), diamond(6, 3, 1)]).unwrap();
    assert_eq!(p.regions.len(), 3);
    assert_eq!(p.inclusions.iter().filter(|(i, j)| i != j).count(), 2);
    assert_eq!(p.disjoint, vec![(0, 1)]);
    assert!(p.cauchy.is_empty());

    let n = build_region_poset(&o, &[slab(4, 7), slab(3, 8)]).unwrap();
    assert_eq!(n.cauchy, vec![(0, 1), (0, 2), (1, 2)]);

    assert!(matches!(build_region_poset(&o, &[slab(0, 0)]), Err(AqftError::RegionTooSmall(_))));
}

#[test]
fn functor_components_and_naturality() {
    for (kind, mass) in [(Kind::KG, 1), (Kind::YM, 0)] {
        let o = obs(kind, 12, 6, mass);
        let p = build_region_poset(&o, &default_regions(o.lattice())).unwrap();
        let f = observables_functor(o.clone(), p).unwrap();
        let top = f.poset.terminal();
        assert_eq!(f.complexes[top].as_ref(), o.l.complex.as_ref());
        assert_eq!(f.taus[top], f.tau);
        for c in f.functoriality_checks() {
            assert!(c.passed, "{kind:?} {c:?}");
        }
        assert!(f.tau_naturality().passed);
    }
}

#[test]
fn slab_tau_matches_the_slab_theory() {
    for (kind, mass, nt, slabs) in [(Kind::KG, 1, 12, [(2, 9), (0, 8)]), (Kind::YM, 0, 16, [(2, 13), (0, 12)])] {
        let o = obs(kind, nt, 4, mass);
        let regs: Vec<Region> = slabs.iter().map(|&(a, b)| slab(a, b)).collect();
        let f = observables_functor(o.clone(), build_region_poset(&o, &regs).unwrap()).unwrap();
        for r in &regs {
            let c = f.slab_naturality(r).unwrap();
            assert!(c.passed, "{kind:?} {c:?}");
        }
    }
}

#[test]
fn einstein_causality_and_shrunken_cone() {
    for (kind, mass) in [(Kind::KG, 1), (Kind::YM, 0)] {
        let o = obs(kind, 12, 6, mass);
        let p = build_region_poset(&o, &default_regions(o.lattice())).unwrap();
        let f = observables_functor(o, p).unwrap();
        assert!(check_classical_causality(&f, ConeModel::default()).passed());
        let q = quantize_functor(f, 4).unwrap();
        let rep = check_einstein_causality(&q, ConeModel::default()).unwrap();
        assert!(rep.passed(), "{kind:?}");
        assert!(rep.count("pass") >= 12);
        assert!(rep.count("skipped") > 0);
        let bad = check_einstein_causality(&q, ConeModel { spatial_reach: 0 }).unwrap();
        let fail = bad.records.iter().find(|r| r.status == "fail").expect("violation");
        assert!(fail.witness.is_some());
        assert!(!check_classical_causality(&q.classical, ConeModel { spatial_reach: 0 }).passed());
    }
}

#[test]
fn time_slice_on_cauchy_slabs() {
    for (kind, mass) in [(Kind::KG, 1), (Kind::YM, 0)] {
        let o = obs(kind, 12, 6, mass);
        let p = build_region_poset(&o, &[slab(4, 7), slab(2, 9), diamond(7, 0, 2)]).unwrap();
        let f = observables_functor(o, p).unwrap();
        let rep = check_time_slice(&f).unwrap();
        assert_eq!(rep.count("pass"), 3, "{kind:?} {rep:?}");
        assert_eq!(rep.count("fail"), 0);
        let info = rep.records.iter().find(|r| r.region_pair.0.starts_with("diamond")).unwrap();
        assert_eq!(info.status, "informational");
        let h = dgqft::homology_ranks(&f.complexes[0]);
        match kind {
            Kind::KG => assert_eq!(h.rank(0), 12),
            Kind::YM => assert_eq!([h.rank(2), h.rank(1), h.rank(-1)], [0, 1, 1]),
        }
    }
    let o = obs(Kind::KG, 12, 6, 1);
    let f = observables_functor(o.clone(), build_region_poset(&o, &[diamond(7, 0, 2)]).unwrap()).unwrap();
    assert!(matches!(check_time_slice(&f), Err(AqftError::NoCauchyInclusion)));
}

#[test]
fn kg_algebra_time_slice_on_low_stages() {
    let o = obs(Kind::KG, 12, 3, 1);
    let p = build_region_poset(&o, &[slab(4, 7)]).unwrap();
    let q = quantize_functor(observables_functor(o, p).unwrap(), 4).unwrap();
    let c = algebra_time_slice(&q, 0, 1, 2).unwrap();
    assert!(c.passed, "{c:?}");
}

#[test]
fn quantized_functor_laws_and_ym_commutators() {
    let o = obs(Kind::YM, 12, 6, 0);
    let p = build_region_poset(&o, &[slab(3, 8), slab(4, 7), diamond(7, 1, 2), diamond(7, 1, 1)]).unwrap();
    let f = observables_functor(o.clone(), p).unwrap();
    assert!(matches!(quantize_functor(f.clone(), 1), Err(AqftError::Ccr(_))));
    let q = quantize_functor(f, 4).unwrap();
    for c in q.functoriality_checks(5, 4).unwrap() {
        assert!(c.passed, "{c:?}");
    }
    // Terminal algebra: [a₁, a₂] = −i ⟨a₁, G a₂⟩ and [α, χ] = −i ⟨α, G dχ⟩.
    let lat = o.lattice();
    let alg = &q.algebras[q.classical.poset.terminal()];
    let h1 = SparseMat::diag(lat.metric(Form::One));
    let g = causal_propagator(lat, Form::One, &Q::zero()).unwrap();
    let hg = h1.mul(&g);
    let hgd = hg.mul(lat.d(Form::Zero));
    let cells = |n: i32| &o.l.cells[&n];
    let mut nonzero = 0;
    for (i, &a) in cells(0).iter().enumerate() {
        for (k, &b) in cells(0).iter().enumerate() {
            let c = alg.graded_commutator(&alg.gen(alg.generator(0, i)), &alg.gen(alg.generator(0, k))).unwrap();
            let want = -hg.get(a, b);
            nonzero += usize::from(!want.is_zero());
            assert_eq!(c, Element::scalar(Gauss::imag(want)));
        }
    }
    for (i, &a) in cells(1).iter().enumerate() {
        for (k, &b) in cells(-1).iter().enumerate() {
            let c = alg.graded_commutator(&alg.gen(alg.generator(1, i)), &alg.gen(alg.generator(-1, k))).unwrap();
            assert_eq!(c, Element::scalar(Gauss::imag(-hgd.get(a, b))));
        }
    }
    assert!(nonzero > 0);
}

#[test]
fn report_json_shape() {
    let o = obs(Kind::KG, 12, 6, 1);
    let f = observables_functor(o.clone(), build_region_poset(&o, &[slab(4, 7)]).unwrap()).unwrap();
    let rep = check_time_slice(&f).unwrap();
    let v = serde_json::to_value(&rep.records[0]).unwrap();
    for k in ["axiom", "region_pair", "status"] {
        assert!(v.get(k).is_some(), "{k}");
    }
    assert!(v.get("witness").is_none());
}
