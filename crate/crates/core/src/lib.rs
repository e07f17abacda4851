//! Homotopical quantization of linear field theories on finite Lorentzian lattice cylinders,
//! with every identity checked in exact rational arithmetic.

pub mod complex;
pub mod green;
pub mod lattice;
pub mod report;
pub mod theory;
pub mod ccr;
pub mod aqft;
pub mod linalg;
pub mod scalar;
pub mod sparse;

pub use complex::{
    braiding, find_homotopy, homology_ranks, is_quasi_iso, make_complex, mapping_complex, shift, solve_boundary,
    tensor, ChainComplex, ChainMap, ComplexError, HomologyReport, MapChain,
};
pub use scalar::{Gauss, Q};
pub use sparse::SparseMat;
