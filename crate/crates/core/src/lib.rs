//! Simulation core for qubits carried by the two lowest normal modes of
//! dual-mode slab waveguides.
//!
//! * [`field`]: transverse grids, sampled fields and overlap integrals.
//! * [`mode_solver`]: guided TE modes of layered slabs, effective index reduction.
//! * [`cmt`]: coupled-mode equations, directional-coupler transfer and separator design.
//! * [`gates`]: ideal 2×2 / 4×4 transfer-matrix algebra and fidelities.
//! * [`devices`]: piecewise-z refractive-index layouts.
//! * [`bpm`]: Crank-Nicolson beam propagation, linear and Kerr/XPM, with calibration.
//! * [`analysis`]: modal measurement and gate estimation from propagated fields.

pub mod analysis;
pub mod bpm;
pub mod cmt;
pub mod devices;
pub mod error;
pub mod field;
pub mod gates;
pub mod mode_solver;

pub use error::{Error, Result};
pub use field::{normalize, overlap, power, ComplexField, TransverseGrid, C64};
