//! Linearized operators at the soliton and their spectra.

mod coercivity;
mod eigen;
mod forms;
mod hc;
mod tc;

use nalgebra::{DMatrix, DVector};

use crate::grid::{Grid, HydroPair};

pub use coercivity::*;
pub use eigen::*;
pub use forms::*;
pub use hc::*;
pub use tc::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Hc,
    Tc,
    WeightedForm,
}

/// Dense symmetric operator in block layout `[v-block; w-block]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub matrix: DMatrix<f64>,
    pub kind: OperatorKind,
    pub speed: f64,
    pub grid: Grid,
}

impl OperatorMatrix {
    /// `‖A - Aᵀ‖_max / ‖A‖_max`.
    pub fn symmetry_defect(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax() / self.matrix.amax()
    }

    pub fn apply(&self, u: &HydroPair) -> HydroPair {
        let x = DVector::from_vec(u.to_block());
        HydroPair::from_block((&self.matrix * x).as_slice())
    }

    /// Eigenvalues in increasing order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut values: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(f64::total_cmp);
        values
    }
}
