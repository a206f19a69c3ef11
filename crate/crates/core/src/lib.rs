//! Periodic steady-state analysis of m-port circuits of maximal monotone
//! elements.
//!
//! A circuit is compiled into the monotone+skew inclusion
//!
//! ```text
//! 0 in (R(i); G(v)) + (0 M^T; -M 0)(i; v) - (B_R; B_G) u
//! y = -(B_R^T B_G^T)(i; v) + D u
//! ```
//!
//! where `R` and `G` collect the element impedances and admittances and the
//! matrices describe the lossless box of wires and ideal transformers. The
//! inclusion is solved over one period of sampled trajectories with the
//! Condat–Vũ primal-dual iteration.
//!
//! Modules follow the pipeline: [`netlist`] parses a circuit and derives the
//! interconnection, [`structure`] and [`elements`] hold the two halves of the
//! inclusion, [`solver`] runs the iteration, and [`timestep`] is an
//! independent backward-Euler march used to cross-check results.

pub mod circulant;
pub mod document;
pub mod elements;
pub mod error;
pub mod netlist;
pub mod signal;
pub mod solver;
pub mod structure;
pub mod timestep;
pub mod trajectory;

pub use elements::{DiagonalOperator, ElementLaw, Form, PwlCurve};
pub use error::{Error, ParseError, Result};
pub use signal::{Grid, PeriodicSignal, SignalBundle, Waveform};
pub use solver::{condat_vu_solve, Problem, SolverConfig, SolverResult};
pub use structure::{HybridMatrix, Interconnection};
