//! Weighted tiling problems: rule sets, exact solvers for square grids and
//! one-dimensional lines, Turing-machine compilation, variant fixtures, and a
//! clock Hamiltonian toolkit.

pub mod clock;
pub mod grid;
pub mod io;
pub mod line;
pub mod tiling;
pub mod tm;
pub mod variants;
