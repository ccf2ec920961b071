//! Multilinear Fourier multipliers at desk scale: lattice column splitting,
//! wavelet and bump atom families, a periodic evaluation engine, rough and
//! Hörmander-type kernels, and operator-norm scaling measurements.

pub mod error;
pub mod grid;
pub mod harness;
pub mod kernels;
pub mod lattice;
pub mod engine;
pub mod lp;
pub mod norm;
pub mod wavelet;

pub use error::{Error, Result};
pub use grid::{GridFunction, Spectrum, TorusGrid};
pub use lattice::{ColumnSplit, LatticePoint, LatticeSet};
pub use num_complex::Complex64;
