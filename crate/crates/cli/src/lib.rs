//! Verification suites behind the `dgqft` command line.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use dgqft::aqft::{
    build_region_poset, check_einstein_causality, check_time_slice, default_regions, observables_functor,
    quantize_functor, AxiomRecord,
};
use dgqft::ccr::{ccr_algebra, random_rho, verify_zigzag, zigzag_object, DgStarAlgebra, Element, Strategy};
use dgqft::complex::homology_ranks_bareiss;
use dgqft::green::{green_operator, verify_commutation, verify_green_axioms, AxiomResult, Orientation, VerifyOptions};
use dgqft::lattice::{build_cylinder, ConeModel, Form, Lattice};
use dgqft::report::{Check, SCHEMA_VERSION};
use dgqft::scalar::parse_q;
use dgqft::theory::*;
use dgqft::{homology_ranks, Gauss, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    VerifyKg,
    VerifyYm,
    Homology,
    Zigzag,
    Report,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Theory {
    Kg,
    Ym,
}

impl Theory {
    fn kind(self) -> Kind {
        match self {
            Theory::Kg => Kind::KG,
            Theory::Ym => Kind::YM,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub nt: usize,
    pub nx: usize,
    pub dt: String,
    pub dx: String,
    pub mass: String,
    pub theory: Theory,
    pub cap: usize,
    pub seed: u64,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            nt: 12,
            nx: 4,
            dt: "1".into(),
            dx: "1".into(),
            mass: "1".into(),
            theory: Theory::Kg,
            cap: 6,
            seed: 0,
            out: None,
        }
    }
}

/// Keys a config file may set; present keys override the command-line values.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    nt: Option<usize>,
    nx: Option<usize>,
    dt: Option<Scalar>,
    dx: Option<Scalar>,
    mass: Option<Scalar>,
    theory: Option<Theory>,
    cap: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Scalar {
    Int(i64),
    Text(String),
}

impl Scalar {
    fn text(self) -> String {
        match self {
            Scalar::Int(n) => n.to_string(),
            Scalar::Text(s) => s,
        }
    }
}

impl RunConfig {
    pub fn apply_file(mut self, path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let f: FileConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        macro_rules! take {
            ($($k:ident),*) => { $(if let Some(v) = f.$k { self.$k = v; })* };
        }
        take!(nt, nx, theory, cap, seed);
        if let Some(v) = f.dt {
            self.dt = v.text();
        }
        if let Some(v) = f.dx {
            self.dx = v.text();
        }
        if let Some(v) = f.mass {
            self.mass = v.text();
        }
        if f.out.is_some() {
            self.out = f.out;
        }
        Ok(self)
    }

    /// Theories a command builds.
    pub fn kinds(&self, command: Command) -> Vec<Kind> {
        match command {
            Command::VerifyKg => vec![Kind::KG],
            Command::VerifyYm => vec![Kind::YM],
            Command::Homology | Command::Zigzag => vec![self.theory.kind()],
            Command::Report => vec![Kind::KG, Kind::YM],
        }
    }

    pub fn validate(&self, command: Command) -> anyhow::Result<Lattice> {
        let dt = rational("dt", &self.dt)?;
        let dx = rational("dx", &self.dx)?;
        rational("mass", &self.mass)?;
        if self.cap < 2 {
            bail!("cap must be at least 2, got {}", self.cap);
        }
        let lat = build_cylinder(self.nt, self.nx, dt, dx)?;
        for kind in self.kinds(command) {
            make_theory(kind, Arc::new(lat.clone()), Q::from_integer(0.into()))?;
        }
        Ok(lat)
    }

    fn mass_q(&self) -> Q {
        rational("mass", &self.mass).expect("validated")
    }
}

fn rational(key: &str, s: &str) -> anyhow::Result<Q> {
    parse_q(s.trim()).ok_or_else(|| anyhow!("{key}: not a rational number: {s:?}"))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suite {
    pub name: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl Suite {
    fn new(name: impl Into<String>, checks: Vec<Check>) -> Suite {
        Suite { name: name.into(), passed: checks.iter().all(|c| c.passed), checks }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomologyRow {
    pub theory: Theory,
    pub degree: i32,
    pub dim: usize,
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: Command,
    pub config: RunConfig,
    pub passed: bool,
    pub suites: Vec<Suite>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub axioms: Vec<AxiomRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub homology: Vec<HomologyRow>,
}

#[derive(Default)]
struct Parts {
    suites: Vec<Suite>,
    axioms: Vec<AxiomRecord>,
    homology: Vec<HomologyRow>,
}

impl Parts {
    fn extend(&mut self, o: Parts) {
        self.suites.extend(o.suites);
        self.axioms.extend(o.axioms);
        self.homology.extend(o.homology);
    }
    fn prefixed(mut self, p: &str) -> Parts {
        for s in &mut self.suites {
            s.name = format!("{p}/{}", s.name);
        }
        self
    }
}

pub fn run(command: Command, cfg: &RunConfig) -> anyhow::Result<Report> {
    let lat = Arc::new(cfg.validate(command)?);
    let parts = match command {
        Command::VerifyKg => pipeline(&lat, cfg, Kind::KG)?,
        Command::VerifyYm => pipeline(&lat, cfg, Kind::YM)?,
        Command::Homology => homology(&lat, cfg, cfg.theory.kind())?,
        Command::Zigzag => zigzag(&lat, cfg, cfg.theory.kind())?,
        Command::Report => aggregate(&lat, cfg)?,
    };
    let passed = parts.suites.iter().all(|s| s.passed);
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        command,
        config: cfg.clone(),
        passed,
        suites: parts.suites,
        axioms: parts.axioms,
        homology: parts.homology,
    })
}

/// Independent suites run concurrently; results are joined in a fixed order.
fn aggregate(lat: &Arc<Lattice>, cfg: &RunConfig) -> anyhow::Result<Parts> {
    type Job<'a> = (&'static str, Box<dyn Fn() -> anyhow::Result<Parts> + Send + Sync + 'a>);
    let jobs: Vec<Job> = vec![
        ("kg", Box::new(|| pipeline(lat, cfg, Kind::KG))),
        ("ym", Box::new(|| pipeline(lat, cfg, Kind::YM))),
        ("kg", Box::new(|| homology(lat, cfg, Kind::KG))),
        ("ym", Box::new(|| homology(lat, cfg, Kind::YM))),
        ("kg", Box::new(|| zigzag(lat, cfg, Kind::KG))),
        ("ym", Box::new(|| zigzag(lat, cfg, Kind::YM))),
    ];
    let results: Vec<anyhow::Result<Parts>> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs.iter().map(|(_, job)| s.spawn(move || job())).collect();
        handles.into_iter().map(|h| h.join().expect("suite thread panicked")).collect()
    });
    let mut out = Parts::default();
    for ((p, _), r) in jobs.iter().zip(results) {
        out.extend(r?.prefixed(p));
    }
    Ok(out)
}

fn theory_mass(kind: Kind, cfg: &RunConfig) -> Q {
    match kind {
        Kind::KG => cfg.mass_q(),
        Kind::YM => Q::from_integer(0.into()),
    }
}

fn observables(lat: &Arc<Lattice>, cfg: &RunConfig, kind: Kind) -> anyhow::Result<Arc<ObservablesComplex>> {
    let spec = make_theory(kind, lat.clone(), theory_mass(kind, cfg))?;
    Ok(Arc::new(observables_complex(Arc::new(spec))?))
}

fn green_check(r: &AxiomResult) -> Check {
    match r.failures.first() {
        None => Check::pass(r.axiom.clone()),
        Some(f) => Check::fail(r.axiom.clone(), format!("{} failing inputs, first {f:?}", r.failures.len())),
    }
}

fn green_suite(lat: &Lattice, cfg: &RunConfig, kind: Kind, form: Form) -> anyhow::Result<Suite> {
    let mass = theory_mass(kind, cfg);
    let opts = VerifyOptions { seed: cfg.seed, ..VerifyOptions::default() };
    let gp = green_operator(lat, form, &mass, Orientation::Retarded)?;
    let gm = green_operator(lat, form, &mass, Orientation::Advanced)?;
    let mut checks: Vec<Check> = verify_green_axioms(lat, &gp, &gm, &opts).entries.iter().map(green_check).collect();
    if kind == Kind::YM {
        for o in [Orientation::Retarded, Orientation::Advanced] {
            let g0 = green_operator(lat, Form::Zero, &mass, o)?;
            let g1 = green_operator(lat, Form::One, &mass, o)?;
            checks.extend(verify_commutation(lat, &g0, &g1, &opts).iter().map(green_check));
        }
    }
    Ok(Suite::new("green", checks))
}

/// Green axioms, trivializations, compatibility and `τ`, CCR consistency and AQFT axioms.
fn pipeline(lat: &Arc<Lattice>, cfg: &RunConfig, kind: Kind) -> anyhow::Result<Parts> {
    let o = observables(lat, cfg, kind)?;
    let mut parts = Parts::default();
    parts.suites.push(green_suite(lat, cfg, kind, o.spec.green_form)?);

    let plus = standard_trivialization(&o, Orientation::Retarded)?;
    let minus = standard_trivialization(&o, Orientation::Advanced)?;
    let mut checks = contracting_checks(&o, &plus);
    checks.extend(contracting_checks(&o, &minus));
    checks.extend(verify_trivialization(&o, &plus, &minus).checks);
    parts.suites.push(Suite::new("trivializations", checks));

    let mut checks = Vec::new();
    let tau = match unshifted_poisson(&o, &plus, &minus, false) {
        Ok(p) => {
            checks.push(Check::pass("tau_compatible"));
            p.tau
        }
        Err(e) => {
            checks.push(Check::fail("tau_compatible", e.to_string()));
            parts.suites.push(Suite::new("poisson", checks));
            return Ok(parts);
        }
    };
    match kind {
        Kind::KG => {
            let dims = [Orientation::Retarded, Orientation::Advanced].map(|o2| degree_two_chain_dim(&o, o2));
            checks.push(Check::from_bool("trivialization_unique", dims == [0, 0], || format!("{dims:?}")));
        }
        Kind::YM => {
            let lam = compatible_perturbation(&o, cfg.seed, 0.05)?;
            let pt = perturb_trivialization(&plus, &lam)?;
            let rep = verify_trivialization(&o, &pt, &minus);
            checks.push(Check::from_bool("perturbed_pair_compatible", rep.all_passed(), || {
                format!("{:?}", rep.checks.iter().find(|c| !c.passed))
            }));
            let tau_t = unshifted_poisson(&o, &pt, &minus, true)?.tau;
            let rho = homotopy_between_taus(&o, &tau, &tau_t, 100_000)?;
            checks.extend(rho.checks(&o, &tau, &tau_t));
        }
    }
    parts.suites.push(Suite::new("poisson", checks));

    let alg = ccr_algebra(o.l.complex.clone(), tau, cfg.cap)?;
    parts.suites.push(Suite::new("ccr", ccr_checks(&alg, cfg)?));

    let regions: Vec<_> = default_regions(lat).into_iter().filter(|r| build_region_poset(&o, &[r.clone()]).is_ok()).collect();
    let poset = build_region_poset(&o, &regions)?;
    let functor = observables_functor(o.clone(), poset)?;
    let mut checks = functor.functoriality_checks();
    checks.push(functor.tau_naturality());
    let ts = check_time_slice(&functor)?;
    let q = quantize_functor(functor, cfg.cap)?;
    checks.extend(q.functoriality_checks(cfg.seed, 3)?);
    let ec = check_einstein_causality(&q, ConeModel::default())?;
    checks.push(Check::from_bool("einstein_causality", ec.passed(), || format!("{} failing pairs", ec.count("fail"))));
    checks.push(Check::from_bool("time_slice", ts.passed(), || format!("{} failing inclusions", ts.count("fail"))));
    parts.suites.push(Suite::new("aqft", checks));
    parts.axioms.extend(ec.records.into_iter().filter(|r| r.status != "skipped"));
    parts.axioms.extend(ts.records);
    Ok(parts)
}

/// Seeded samples of the commutation relations and algebra laws.
fn ccr_checks(a: &DgStarAlgebra, cfg: &RunConfig) -> anyhow::Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = a.num_generators() as u32;
    let mut out = Vec::new();

    let mut bad = None;
    for _ in 0..200 {
        let (x, y) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let c = a.graded_commutator(&a.gen(x), &a.gen(y))?;
        if c != Element::scalar(Gauss::imag(a.tau_of(x, y))) {
            bad.get_or_insert(format!("generators ({x}, {y}): {c}"));
        }
    }
    out.push(check("commutator_matches_tau", bad));

    let mut bad = None;
    for _ in 0..100 {
        let len = rng.gen_range(0..=cfg.cap);
        let w = a.random_word(&mut rng, len);
        if a.normal_word(&w, Strategy::Leftmost)? != a.normal_word(&w, Strategy::Rightmost)? {
            bad.get_or_insert(format!("word {w:?}"));
        }
    }
    out.push(check("rewriting_confluent", bad));

    let (mut assoc, mut dd, mut star) = (None, None, None);
    for _ in 0..30 {
        let [x, y, z] = [(); 3].map(|_| a.random_element(&mut rng, 2, 2));
        if a.multiply(&a.multiply(&x, &y)?, &z)? != a.multiply(&x, &a.multiply(&y, &z)?)? {
            assoc.get_or_insert(format!("{x} | {y} | {z}"));
        }
        if !a.differential(&a.differential(&x)?)?.is_zero() {
            dd.get_or_insert(x.to_string());
        }
        if a.involution(&a.involution(&x)?)? != x {
            star.get_or_insert(x.to_string());
        }
    }
    out.push(check("associative", assoc));
    out.push(check("differential_squares_to_zero", dd));
    out.push(check("involution_involutive", star));

    let mut bad = None;
    for _ in 0..100 {
        let (x, y) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if !a.involuted_relation(x, y)?.is_zero() || !a.differentiated_relation(x, y)?.is_zero() {
            bad.get_or_insert(format!("relation ({x}, {y})"));
        }
    }
    out.push(check("ideal_stable", bad));
    Ok(out)
}

fn check(name: &str, witness: Option<String>) -> Check {
    match witness {
        None => Check::pass(name),
        Some(w) => Check::fail(name, w),
    }
}

fn homology(lat: &Arc<Lattice>, cfg: &RunConfig, kind: Kind) -> anyhow::Result<Parts> {
    let o = observables(lat, cfg, kind)?;
    let l = &o.l.complex;
    let (a, b) = (homology_ranks(l), homology_ranks_bareiss(l));
    let theory = if kind == Kind::KG { Theory::Kg } else { Theory::Ym };
    let rows: Vec<HomologyRow> = l
        .degrees()
        .into_iter()
        .rev()
        .map(|n| HomologyRow { theory, degree: n, dim: l.dim(n), rank: a.rank(n) })
        .collect();
    let mut checks = vec![Check::from_bool("rank_methods_agree", rows.iter().all(|r| b.rank(r.degree) == r.rank), || {
        format!("{:?}", rows.iter().map(|r| (r.degree, r.rank, b.rank(r.degree))).collect::<Vec<_>>())
    })];
    checks.push(match kind {
        Kind::KG => {
            let got = (a.rank(0), a.rank(1));
            Check::from_bool("cauchy_data_count", got == (2 * lat.nx, 0), || format!("(H0, H1) = {got:?}"))
        }
        Kind::YM => {
            let got = [a.rank(2), a.rank(1), a.rank(-1)];
            Check::from_bool("cylinder_ranks", got == [0, 1, 1], || format!("(H2, H1, H-1) = {got:?}"))
        }
    });
    Ok(Parts { suites: vec![Suite::new("homology", checks)], homology: rows, ..Parts::default() })
}

fn zigzag(lat: &Arc<Lattice>, cfg: &RunConfig, kind: Kind) -> anyhow::Result<Parts> {
    let o = observables(lat, cfg, kind)?;
    let tau = standard_tau(&o)?;
    let l = o.l.complex.clone();
    let zero = BilinearForm { degree: -1, blocks: Default::default() };
    let random = random_rho(&l, &mut ChaCha8Rng::seed_from_u64(cfg.seed), 0.05);
    let mut parts = Parts::default();
    for (name, rho) in [("zigzag_rho_zero", zero), ("zigzag_rho_random", random)] {
        let z = zigzag_object(l.clone(), tau.clone(), rho)?;
        parts.suites.push(Suite::new(name, verify_zigzag(&z).checks));
    }
    Ok(parts)
}

/// One line per suite.
pub fn summary(r: &Report) -> String {
    let mut out = String::new();
    for s in &r.suites {
        let status = if s.passed { "PASS" } else { "FAIL" };
        out.push_str(&format!("{status} {} ({} checks)\n", s.name, s.checks.len()));
        for c in s.checks.iter().filter(|c| !c.passed) {
            out.push_str(&format!("    {} : {}\n", c.name, c.witness.as_deref().unwrap_or("")));
        }
    }
    for h in &r.homology {
        out.push_str(&format!("H[{:?}] degree {:>2}: dim {:>4} rank {}\n", h.theory, h.degree, h.dim, h.rank));
    }
    out.push_str(if r.passed { "all suites passed\n" } else { "verification failed\n" });
    out
}

pub fn to_json(r: &Report) -> String {
    serde_json::to_string_pretty(r).expect("report serializes") + "\n"
}
