//! Dark solitons of the one-dimensional easy-plane Landau-Lifshitz equation:
//! closed-form profiles, three equivalent time integrators, modulation,
//! linearized-operator spectra and stability diagnostics.

// NaN must fail the `!(x > 0)` style guards, and index loops mirror the
// nodal formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod modulation;
pub mod soliton;
pub mod spectral;
pub mod transforms;

pub use error::{Error, Result};
pub use grid::{Grid, HydroPair, Window};
