//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use dgqft::lattice::build_cylinder;
use dgqft::scalar::q;
use dgqft::theory::{make_theory, observables_complex, Kind, ObservablesComplex};

pub fn observables(kind: Kind, nt: usize, nx: usize, mass: i64) -> Arc<ObservablesComplex> {
    let lat = Arc::new(build_cylinder(nt, nx, q(1), q(1)).expect("lattice"));
    Arc::new(observables_complex(Arc::new(make_theory(kind, lat, q(mass)).expect("theory"))).expect("observables"))
}
