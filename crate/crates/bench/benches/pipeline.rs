use criterion::{criterion_group, criterion_main, Criterion};
use dgqft::aqft::{build_region_poset, check_einstein_causality, default_regions, observables_functor, quantize_functor};
use dgqft::ccr::{ccr_algebra, Strategy};
use dgqft::green::{green_operator, Orientation};
use dgqft::homology_ranks;
use dgqft::lattice::{ConeModel, Form};
use dgqft::scalar::q;
use dgqft::theory::{standard_tau, standard_trivialization, Kind};
use dgqft_bench::observables;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pipeline(c: &mut Criterion) {
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);

    let kg = observables(Kind::KG, 12, 4, 1);
    let ym = observables(Kind::YM, 12, 4, 0);
    g.bench_function("green_scalar_12x4", |b| {
        b.iter(|| green_operator(kg.lattice(), Form::Zero, &q(1), Orientation::Retarded).unwrap())
    });
    g.bench_function("observables_ym_12x4", |b| b.iter(|| observables(Kind::YM, 12, 4, 0)));
    g.bench_function("homology_ym_12x4", |b| b.iter(|| homology_ranks(&ym.l.complex)));
    g.bench_function("trivialization_ym_12x4", |b| {
        b.iter(|| standard_trivialization(&ym, Orientation::Retarded).unwrap())
    });
    g.bench_function("tau_ym_12x4", |b| b.iter(|| standard_tau(&ym).unwrap()));

    let alg = ccr_algebra(ym.l.complex.clone(), standard_tau(&ym).unwrap(), 8).unwrap();
    g.bench_function("normal_order_words_len6", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        b.iter(|| {
            let w = alg.random_word(&mut rng, 6);
            alg.normal_word(&w, Strategy::Leftmost).unwrap()
        })
    });

    let ym6 = observables(Kind::YM, 12, 6, 0);
    g.bench_function("einstein_causality_ym_12x6", |b| {
        b.iter(|| {
            let p = build_region_poset(&ym6, &default_regions(ym6.lattice())).unwrap();
            let qf = quantize_functor(observables_functor(ym6.clone(), p).unwrap(), 4).unwrap();
            check_einstein_causality(&qf, ConeModel::default()).unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, pipeline);
criterion_main!(benches);
