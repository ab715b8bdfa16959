//! Discrete laboratory for multiscale Fourier multiplier operators on
//! periodic grids: dyadic martingale decompositions, atomic and
//! Calderón–Zygmund decompositions, frequency-localized operator pieces,
//! multiplier-norm estimation and sparse forms.
//!
//! Everything lives on the periodic grid `Z_N^d` with `N = 2^J` and
//! `d ∈ {1, 2}`. Norms use counting measure throughout; `|Q|` is the number
//! of grid points in a cube.

pub mod atomic;
pub mod calderon;
pub mod csvio;
pub mod cube;
pub mod cz;
pub mod dyadic;
pub mod error;
pub mod experiments;
pub mod fft;
pub mod grid;
pub mod norms;
pub mod operators;
pub mod profiles;
pub mod sparse;
pub mod symbols;

pub use cube::{DyadicCube, DyadicLattice, PointSet};
pub use error::{Error, Result};
pub use grid::GridFunction;

