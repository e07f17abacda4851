//! Periodic-space Lorentzian cylinder as a cochain complex with metric pairings and causal cones.
//!
//! Cells are indexed row-major, `t` outer and `x` inner. Edges list all time-edges first,
//! then all space-edges. Each cell carries a half-slice level: vertices and space-edges sit at
//! `2t`, time-edges and faces at `2t + 1`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::{make_complex, ChainComplex};
use crate::scalar::{fmt_q, parse_q, q, Q};
use crate::sparse::SparseMat;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LatticeError {
    #[error("lattice needs nt >= 8 and nx >= 3, got nt={nt} nx={nx}")]
    BadDims { nt: usize, nx: usize },
    #[error("dt = {dt} and dx = {dx} must be equal")]
    UnsupportedAnisotropy { dt: String, dx: String },
    #[error("spacings must be positive")]
    NonPositiveSpacing,
    #[error("region {region} is not causally convex: path from {from:?} to {to:?} leaves it at {outside:?}")]
    NotCausallyConvex { region: String, from: Vertex, to: Vertex, outside: Vertex },
    #[error("bad lattice config: {0}")]
    BadConfig(String),
}

pub type Vertex = (usize, usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Form {
    Zero,
    One,
    Two,
}

impl Form {
    pub fn degree(self) -> usize {
        self as usize
    }
    pub fn from_degree(p: usize) -> Option<Form> {
        [Form::Zero, Form::One, Form::Two].get(p).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Future,
    Past,
}

/// Light-cone model: how many spatial sites a causal step may move per time step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeModel {
    pub spatial_reach: usize,
}

impl Default for ConeModel {
    fn default() -> Self {
        ConeModel { spatial_reach: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice {
    pub nt: usize,
    pub nx: usize,
    pub dt: Q,
    pub dx: Q,
    d0: SparseMat,
    d1: SparseMat,
    h: [Vec<Q>; 3],
    delta1: SparseMat,
    delta2: SparseMat,
    boxes: [SparseMat; 3],
    levels: [Vec<i64>; 3],
    by_level: [BTreeMap<i64, Vec<usize>>; 3],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub nt: usize,
    pub nx: usize,
    #[serde(with = "crate::scalar::serde_q")]
    pub dt: Q,
    #[serde(with = "crate::scalar::serde_q")]
    pub dx: Q,
}

impl LatticeConfig {
    /// `nt=`, `nx=`, `dt=`, `dx=` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<LatticeConfig, LatticeError> {
        let mut kv = HashMap::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| LatticeError::BadConfig(format!("no '=' in {line:?}")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| kv.get(k).ok_or_else(|| LatticeError::BadConfig(format!("missing {k}")));
        let int = |k: &str| get(k)?.parse::<usize>().map_err(|_| LatticeError::BadConfig(format!("bad {k}")));
        let rat = |k: &str| parse_q(get(k)?).ok_or_else(|| LatticeError::BadConfig(format!("bad {k}")));
        Ok(LatticeConfig { nt: int("nt")?, nx: int("nx")?, dt: rat("dt")?, dx: rat("dx")? })
    }

    pub fn render(&self) -> String {
        format!("nt={}\nnx={}\ndt={}\ndx={}\n", self.nt, self.nx, fmt_q(&self.dt), fmt_q(&self.dx))
    }
}

pub fn build_cylinder(nt: usize, nx: usize, dt: Q, dx: Q) -> Result<Lattice, LatticeError> {
    if nt < 8 || nx < 3 {
        return Err(LatticeError::BadDims { nt, nx });
    }
    if !dt.is_positive() || !dx.is_positive() {
        return Err(LatticeError::NonPositiveSpacing);
    }
    if dt != dx {
        return Err(LatticeError::UnsupportedAnisotropy { dt: dt.to_string(), dx: dx.to_string() });
    }
    Ok(Lattice::assemble(nt, nx, dt, dx))
}

impl Lattice {
    fn assemble(nt: usize, nx: usize, dt: Q, dx: Q) -> Lattice {
        let nv = nt * nx;
        let te = (nt - 1) * nx;
        let ne = te + nt * nx;
        let nf = (nt - 1) * nx;
        let v = |t: usize, x: usize| t * nx + (x % nx);
        let tedge = |t: usize, x: usize| t * nx + (x % nx);
        let sedge = |t: usize, x: usize| te + t * nx + (x % nx);

        let mut e0 = Vec::new();
        for t in 0..nt - 1 {
            for x in 0..nx {
                e0.push((tedge(t, x), v(t + 1, x), q(1)));
                e0.push((tedge(t, x), v(t, x), q(-1)));
            }
        }
        for t in 0..nt {
            for x in 0..nx {
                e0.push((sedge(t, x), v(t, x + 1), q(1)));
                e0.push((sedge(t, x), v(t, x), q(-1)));
            }
        }
        let d0 = SparseMat::from_triplets(ne, nv, e0);
        let mut e1 = Vec::new();
        for t in 0..nt - 1 {
            for x in 0..nx {
                let f = t * nx + x;
                e1.push((f, sedge(t + 1, x), q(1)));
                e1.push((f, sedge(t, x), q(-1)));
                e1.push((f, tedge(t, x + 1), q(-1)));
                e1.push((f, tedge(t, x), q(1)));
            }
        }
        let d1 = SparseMat::from_triplets(nf, ne, e1);

        // Signature (+,-): time-edges positive, space-edges negative, volume negative.
        let h0 = vec![&dt * &dx; nv];
        let mut h1 = vec![&dx / &dt; te];
        h1.extend(vec![-(&dt / &dx); nt * nx]);
        let h2 = vec![-(Q::one() / (&dt * &dx)); nf];

        let adj = |d: &SparseMat, hl: &[Q], hu: &[Q]| {
            let inv: Vec<Q> = hl.iter().map(|x| x.recip()).collect();
            SparseMat::diag(&inv).mul(&d.transpose()).mul(&SparseMat::diag(hu))
        };
        let delta1 = adj(&d0, &h0, &h1);
        let delta2 = adj(&d1, &h1, &h2);
        let box0 = delta1.mul(&d0);
        let box1 = delta2.mul(&d1).add(&d0.mul(&delta1));
        let box2 = d1.mul(&delta2);

        let lv0: Vec<i64> = (0..nv).map(|i| 2 * (i / nx) as i64).collect();
        let lv1: Vec<i64> = (0..ne)
            .map(|i| if i < te { 2 * (i / nx) as i64 + 1 } else { 2 * ((i - te) / nx) as i64 })
            .collect();
        let lv2: Vec<i64> = (0..nf).map(|i| 2 * (i / nx) as i64 + 1).collect();
        let group = |lv: &[i64]| {
            let mut m: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
            for (i, &l) in lv.iter().enumerate() {
                m.entry(l).or_default().push(i);
            }
            m
        };
        let by_level = [group(&lv0), group(&lv1), group(&lv2)];
        Lattice {
            nt,
            nx,
            dt,
            dx,
            d0,
            d1,
            h: [h0, h1, h2],
            delta1,
            delta2,
            boxes: [box0, box1, box2],
            levels: [lv0, lv1, lv2],
            by_level,
        }
    }

    pub fn config(&self) -> LatticeConfig {
        LatticeConfig { nt: self.nt, nx: self.nx, dt: self.dt.clone(), dx: self.dx.clone() }
    }

    pub fn num_vertices(&self) -> usize {
        self.nt * self.nx
    }
    pub fn num_time_edges(&self) -> usize {
        (self.nt - 1) * self.nx
    }
    pub fn num_space_edges(&self) -> usize {
        self.nt * self.nx
    }
    pub fn num_edges(&self) -> usize {
        self.num_time_edges() + self.num_space_edges()
    }
    pub fn num_faces(&self) -> usize {
        (self.nt - 1) * self.nx
    }
    pub fn num_cells(&self, f: Form) -> usize {
        match f {
            Form::Zero => self.num_vertices(),
            Form::One => self.num_edges(),
            Form::Two => self.num_faces(),
        }
    }

    pub fn vertex(&self, t: usize, x: usize) -> usize {
        t * self.nx + x % self.nx
    }
    pub fn time_edge(&self, t: usize, x: usize) -> usize {
        t * self.nx + x % self.nx
    }
    pub fn space_edge(&self, t: usize, x: usize) -> usize {
        self.num_time_edges() + t * self.nx + x % self.nx
    }
    pub fn face(&self, t: usize, x: usize) -> usize {
        t * self.nx + x % self.nx
    }

    /// `d_p : Ω^p → Ω^{p+1}` for `p ∈ {0, 1}`.
    pub fn d(&self, p: Form) -> &SparseMat {
        match p {
            Form::Zero => &self.d0,
            Form::One => &self.d1,
            Form::Two => panic!("no coboundary out of 2-forms"),
        }
    }

    /// `δ_p = H_{p-1}^{-1} d^T H_p : Ω^p → Ω^{p-1}` for `p ∈ {1, 2}`.
    pub fn delta(&self, p: Form) -> &SparseMat {
        match p {
            Form::One => &self.delta1,
            Form::Two => &self.delta2,
            Form::Zero => panic!("no codifferential out of 0-forms"),
        }
    }

    pub fn box_op(&self, p: Form) -> &SparseMat {
        &self.boxes[p.degree()]
    }

    /// `□_p − m²`.
    pub fn wave_operator(&self, p: Form, mass: &Q) -> SparseMat {
        let n = self.num_cells(p);
        self.box_op(p).sub(&SparseMat::identity(n).scale(&(mass * mass)))
    }

    pub fn metric(&self, p: Form) -> &[Q] {
        &self.h[p.degree()]
    }

    pub fn pairing(&self, p: Form, a: &[Q], b: &[Q]) -> Q {
        self.h[p.degree()]
            .iter()
            .zip(a.iter().zip(b))
            .filter(|(_, (x, y))| !x.is_zero() && !y.is_zero())
            .fold(Q::zero(), |acc, (h, (x, y))| acc + h * x * y)
    }

    pub fn level(&self, p: Form, cell: usize) -> i64 {
        self.levels[p.degree()][cell]
    }

    pub fn levels(&self, p: Form) -> &[i64] {
        &self.levels[p.degree()]
    }

    pub fn max_level(&self) -> i64 {
        2 * (self.nt as i64 - 1)
    }

    pub fn cells_at_level(&self, p: Form, l: i64) -> &[usize] {
        self.by_level[p.degree()].get(&l).map_or(&[], |v| v.as_slice())
    }

    /// Cells with level in `lo..=hi`, ascending by index.
    pub fn cells_in_levels(&self, p: Form, lo: i64, hi: i64) -> Vec<usize> {
        (0..self.num_cells(p)).filter(|&c| (lo..=hi).contains(&self.level(p, c))).collect()
    }

    pub fn cell_vertices(&self, p: Form, c: usize) -> Vec<Vertex> {
        let nx = self.nx;
        match p {
            Form::Zero => vec![(c / nx, c % nx)],
            Form::One if c < self.num_time_edges() => {
                let (t, x) = (c / nx, c % nx);
                vec![(t, x), (t + 1, x)]
            }
            Form::One => {
                let c = c - self.num_time_edges();
                let (t, x) = (c / nx, c % nx);
                vec![(t, x), (t, (x + 1) % nx)]
            }
            Form::Two => {
                let (t, x) = (c / nx, c % nx);
                vec![(t, x), (t, (x + 1) % nx), (t + 1, x), (t + 1, (x + 1) % nx)]
            }
        }
    }

    /// Vertices touched by the nonzero entries of a cochain.
    pub fn support_vertices(&self, p: Form, v: &[Q]) -> BTreeSet<Vertex> {
        v.iter()
            .enumerate()
            .filter(|(_, x)| !x.is_zero())
            .flat_map(|(c, _)| self.cell_vertices(p, c))
            .collect()
    }

    /// Slice interval `[t_min, t_max]` of a cochain's support.
    pub fn slice_support(&self, p: Form, v: &[Q]) -> Option<(usize, usize)> {
        let s = self.support_vertices(p, v);
        Some((s.iter().map(|v| v.0).min()?, s.iter().map(|v| v.0).max()?))
    }

    pub fn all_vertices(&self) -> BTreeSet<Vertex> {
        (0..self.nt).flat_map(|t| (0..self.nx).map(move |x| (t, x))).collect()
    }

    /// The de Rham complex `Ω⁰ → Ω¹ → Ω²` placed in homological degrees `0, −1, −2`.
    pub fn de_rham_complex(&self) -> ChainComplex {
        let dims = BTreeMap::from([(0, self.num_vertices()), (-1, self.num_edges()), (-2, self.num_faces())]);
        let diffs = BTreeMap::from([(0, self.d0.clone()), (-1, self.d1.clone())]);
        make_complex(dims, diffs).expect("d1 d0 = 0")
    }

    /// Subcomplex of cochains supported away from the first and last slices.
    pub fn relative_de_rham_complex(&self) -> ChainComplex {
        let interior = |p: Form| -> Vec<usize> {
            (0..self.num_cells(p))
                .filter(|&c| self.cell_vertices(p, c).iter().any(|v| v.0 != 0 && v.0 != self.nt - 1))
                .collect()
        };
        let (c0, c1, c2) = (interior(Form::Zero), interior(Form::One), interior(Form::Two));
        let dims = BTreeMap::from([(0, c0.len()), (-1, c1.len()), (-2, c2.len())]);
        let diffs = BTreeMap::from([(0, self.d0.submatrix(&c1, &c0)), (-1, self.d1.submatrix(&c2, &c1))]);
        make_complex(dims, diffs).expect("relative complex")
    }

    pub fn causal_cone(&self, set: &BTreeSet<Vertex>, dir: Direction) -> BTreeSet<Vertex> {
        self.causal_cone_with(set, dir, ConeModel::default(), None)
    }

    /// `J^±(S)` with `steps` time steps at most (unbounded if `None`).
    pub fn causal_cone_with(
        &self,
        set: &BTreeSet<Vertex>,
        dir: Direction,
        cone: ConeModel,
        steps: Option<usize>,
    ) -> BTreeSet<Vertex> {
        let mut out = set.clone();
        let mut frontier: BTreeSet<Vertex> = set.clone();
        let nx = self.nx as i64;
        let r = cone.spatial_reach as i64;
        let mut k = 0;
        while !frontier.is_empty() && steps.map_or(true, |s| k < s) {
            let mut next = BTreeSet::new();
            for &(t, x) in &frontier {
                let t2 = match dir {
                    Direction::Future if t + 1 < self.nt => t + 1,
                    Direction::Past if t > 0 => t - 1,
                    _ => continue,
                };
                for dx in -r..=r {
                    let x2 = ((x as i64 + dx).rem_euclid(nx)) as usize;
                    if out.insert((t2, x2)) {
                        next.insert((t2, x2));
                    }
                }
            }
            frontier = next;
            k += 1;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    /// All vertices on slices `t0..=t1`.
    TimeSlab { t0: usize, t1: usize },
    /// `J⁻(apex) ∩ J⁺(apex − 2·radius slices)`.
    Diamond { apex: Vertex, radius: usize },
}

impl Region {
    pub fn name(&self) -> String {
        match self {
            Region::TimeSlab { t0, t1 } => format!("slab[{t0},{t1}]"),
            Region::Diamond { apex, radius } => format!("diamond[t={},x={},r={}]", apex.0, apex.1, radius),
        }
    }

    pub fn vertices(&self, lat: &Lattice) -> BTreeSet<Vertex> {
        match *self {
            Region::TimeSlab { t0, t1 } => {
                (t0..=t1.min(lat.nt - 1)).flat_map(|t| (0..lat.nx).map(move |x| (t, x))).collect()
            }
            Region::Diamond { apex, radius } => {
                if apex.0 < 2 * radius || apex.0 >= lat.nt {
                    return BTreeSet::new();
                }
                let top = lat.causal_cone(&BTreeSet::from([apex]), Direction::Past);
                let bottom = lat.causal_cone(&BTreeSet::from([(apex.0 - 2 * radius, apex.1)]), Direction::Future);
                top.intersection(&bottom).copied().collect()
            }
        }
    }

    /// Cells of form `p` all of whose vertices lie in the region.
    pub fn cells(&self, lat: &Lattice, p: Form) -> Vec<usize> {
        let vs = self.vertices(lat);
        (0..lat.num_cells(p)).filter(|&c| lat.cell_vertices(p, c).iter().all(|v| vs.contains(v))).collect()
    }
}

/// Finds a causal path between two region vertices that leaves the region.
pub fn convexity_witness(lat: &Lattice, verts: &BTreeSet<Vertex>) -> Option<(Vertex, Vertex, Vertex)> {
    for &u in verts {
        let fut = lat.causal_cone(&BTreeSet::from([u]), Direction::Future);
        for &w in verts.iter().filter(|w| w.0 > u.0 && fut.contains(w)) {
            let past = lat.causal_cone(&BTreeSet::from([w]), Direction::Past);
            if let Some(&out) = fut.intersection(&past).find(|p| !verts.contains(p)) {
                return Some((u, w, out));
            }
        }
    }
    None
}

pub fn causally_convex(lat: &Lattice, r: &Region) -> bool {
    convexity_witness(lat, &r.vertices(lat)).is_none()
}

pub fn causally_disjoint_sets(lat: &Lattice, a: &BTreeSet<Vertex>, b: &BTreeSet<Vertex>, cone: ConeModel) -> bool {
    let fut = lat.causal_cone_with(a, Direction::Future, cone, None);
    let past = lat.causal_cone_with(a, Direction::Past, cone, None);
    b.iter().all(|v| !fut.contains(v) && !past.contains(v))
}

pub fn causally_disjoint(lat: &Lattice, r1: &Region, r2: &Region) -> bool {
    causally_disjoint_sets(lat, &r1.vertices(lat), &r2.vertices(lat), ConeModel::default())
}

pub fn contains_cauchy_slice(lat: &Lattice, r: &Region) -> bool {
    let vs = r.vertices(lat);
    (0..lat.nt).any(|t| (0..lat.nx).all(|x| vs.contains(&(t, x))))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionPredicates {
    pub causally_convex: bool,
    pub causally_disjoint: bool,
    pub contains_cauchy_slice: bool,
}

/// Convexity and Cauchy flags refer to `r1`.
pub fn region_predicates(lat: &Lattice, r1: &Region, r2: &Region) -> RegionPredicates {
    RegionPredicates {
        causally_convex: causally_convex(lat, r1),
        causally_disjoint: causally_disjoint(lat, r1, r2),
        contains_cauchy_slice: contains_cauchy_slice(lat, r1),
    }
}

/// Restriction to a region and extension by zero, per form degree.
#[derive(Clone, Debug)]
pub struct RegionMaps {
    pub cells: [Vec<usize>; 3],
    pub restrict: [SparseMat; 3],
    pub extend: [SparseMat; 3],
}

pub fn region_maps(lat: &Lattice, r: &Region) -> Result<RegionMaps, LatticeError> {
    if let Some((from, to, outside)) = convexity_witness(lat, &r.vertices(lat)) {
        return Err(LatticeError::NotCausallyConvex { region: r.name(), from, to, outside });
    }
    let cells = [r.cells(lat, Form::Zero), r.cells(lat, Form::One), r.cells(lat, Form::Two)];
    let restrict = [0, 1, 2].map(|p| {
        let n = lat.num_cells(Form::from_degree(p).unwrap());
        SparseMat::from_triplets(cells[p].len(), n, cells[p].iter().enumerate().map(|(i, &c)| (i, c, Q::one())))
    });
    let extend = [0, 1, 2].map(|p| restrict[p].transpose());
    Ok(RegionMaps { cells, restrict, extend })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::homology_ranks;

    fn lat(nt: usize, nx: usize) -> Lattice {
        build_cylinder(nt, nx, q(1), q(1)).unwrap()
    }

    #[test]
    fn counts_and_d_squared() {
        let l = lat(8, 4);
        assert_eq!((l.num_vertices(), l.num_time_edges(), l.num_space_edges(), l.num_faces()), (32, 28, 32, 28));
        assert!(l.d(Form::One).mul(l.d(Form::Zero)).is_zero());
        assert!(l.delta(Form::One).mul(l.delta(Form::Two)).is_zero());
    }

    #[test]
    fn errors() {
        assert_eq!(build_cylinder(7, 4, q(1), q(1)), Err(LatticeError::BadDims { nt: 7, nx: 4 }));
        assert!(matches!(build_cylinder(8, 4, q(1), q(2)), Err(LatticeError::UnsupportedAnisotropy { .. })));
    }

    #[test]
    fn box0_stencil() {
        let l = lat(8, 4);
        let b = l.box_op(Form::Zero);
        let v = l.vertex(3, 1);
        assert!(b.get(v, v).is_zero());
        assert_eq!(b.get(v, l.vertex(4, 1)), q(-1));
        assert_eq!(b.get(v, l.vertex(2, 1)), q(-1));
        assert_eq!(b.get(v, l.vertex(3, 2)), q(1));
        assert_eq!(b.get(v, l.vertex(3, 0)), q(1));
        assert_eq!(b.row(v).len(), 4);
    }

    #[test]
    fn signature_pattern() {
        let l = lat(8, 4);
        let h = l.metric(Form::One);
        assert!(h[..l.num_time_edges()].iter().all(|x| x.is_positive()));
        assert!(h[l.num_time_edges()..].iter().all(|x| x.is_negative()));
    }

    #[test]
    fn cylinder_cohomology() {
        let l = lat(8, 3);
        let h = homology_ranks(&l.de_rham_complex());
        assert_eq!((h.rank(0), h.rank(-1), h.rank(-2)), (1, 1, 0));
        let r = homology_ranks(&l.relative_de_rham_complex());
        assert_eq!((r.rank(0), r.rank(-1), r.rank(-2)), (0, 1, 1));
    }

    #[test]
    fn cones() {
        let l = lat(10, 9);
        let j = l.causal_cone_with(&BTreeSet::from([(2, 4)]), Direction::Future, ConeModel::default(), Some(2));
        assert_eq!(j.len(), 9);
        assert!(l.causal_cone(&BTreeSet::new(), Direction::Future).is_empty());
        let slice: BTreeSet<Vertex> = (0..9).map(|x| (4, x)).collect();
        let fut = l.causal_cone(&slice, Direction::Future);
        assert_eq!(fut.len(), 6 * 9);
    }

    #[test]
    fn diamonds_and_slabs() {
        let l = lat(12, 6);
        let a = Region::Diamond { apex: (6, 0), radius: 1 };
        let b = Region::Diamond { apex: (6, 3), radius: 1 };
        assert_eq!(a.vertices(&l).len(), 5);
        assert!(causally_disjoint(&l, &a, &b));
        assert!(!causally_disjoint(&l, &a, &a));
        assert!(causally_convex(&l, &a));
        assert!(contains_cauchy_slice(&l, &Region::TimeSlab { t0: 3, t1: 3 }));
        assert!(!contains_cauchy_slice(&l, &a));
    }
}
