//! The Hessian `H_c` of `E - cP` at the soliton.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::grid::{Grid, HydroPair};
use crate::soliton::Profile;

use super::{OperatorKind, OperatorMatrix};

/// Sampled coefficients of `H_c`:
///
/// ```text
/// H_c(u) = ( -∂x(a ∂x u1) + potential u1 + coupling u2,
///            coupling u1 + lower u2 )
/// ```
///
/// with `a = 1/(1 - v_c²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HcCoefficients {
    pub speed: f64,
    pub stiffness: Vec<f64>,
    pub stiffness_xx: Vec<f64>,
    pub potential: Vec<f64>,
    pub coupling: Vec<f64>,
    pub lower: Vec<f64>,
}

impl HcCoefficients {
    pub fn new(c: f64, g: &Grid) -> Result<Self> {
        let p = Profile::new(c)?;
        let n = g.len();
        let mut stiffness = Vec::with_capacity(n);
        let mut potential = Vec::with_capacity(n);
        let mut coupling = Vec::with_capacity(n);
        let mut lower = Vec::with_capacity(n);
        for &x in g.nodes() {
            let v = p.v(x);
            let v2 = v * v;
            let a = 1.0 / (1.0 - v2);
            stiffness.push(a);
            // Schur part L_c plus the coupling term eliminated from it
            let lc = (1.0 - c * c - (5.0 + c * c) * v2 + 2.0 * v2 * v2) * a * a;
            potential.push(lc + c * c * (1.0 + v2).powi(2) * a * a * a);
            coupling.push(-c * (1.0 + v2) * a);
            lower.push(1.0 - v2);
        }
        // a - 1 decays, so its spectral second derivative is accurate
        let shifted: Vec<f64> = stiffness.iter().map(|a| a - 1.0).collect();
        let stiffness_xx = g.diff(&shifted, 2);
        Ok(Self {
            speed: c,
            stiffness,
            stiffness_xx,
            potential,
            coupling,
            lower,
        })
    }

    /// Matrix-free application with FFT derivatives.
    pub fn apply(&self, u: &HydroPair, g: &Grid) -> HydroPair {
        let n = g.len();
        let au: Vec<f64> = (0..n).map(|j| self.stiffness[j] * u.v[j]).collect();
        let d2_au = g.diff(&au, 2);
        let d2_u = g.diff(&u.v, 2);
        let mut first = Vec::with_capacity(n);
        let mut second = Vec::with_capacity(n);
        for j in 0..n {
            let div = -0.5 * (d2_au[j] + self.stiffness[j] * d2_u[j] - self.stiffness_xx[j] * u.v[j]);
            first.push(div + self.potential[j] * u.v[j] + self.coupling[j] * u.w[j]);
            second.push(self.coupling[j] * u.v[j] + self.lower[j] * u.w[j]);
        }
        HydroPair { v: first, w: second }
    }

    /// Dense `2n × 2n` matrix in block layout `[v; w]`.
    pub fn assemble(&self, g: &Grid) -> DMatrix<f64> {
        let n = g.len();
        let d2 = g.second_derivative_matrix();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = -0.5 * d2[(i, j)] * (self.stiffness[j] + self.stiffness[i]);
            }
            m[(i, i)] += 0.5 * self.stiffness_xx[i] + self.potential[i];
            m[(i, n + i)] = self.coupling[i];
            m[(n + i, i)] = self.coupling[i];
            m[(n + i, n + i)] = self.lower[i];
        }
        m
    }
}

pub fn assemble_hc(c: f64, g: &Grid) -> Result<OperatorMatrix> {
    let coeffs = HcCoefficients::new(c, g)?;
    Ok(OperatorMatrix {
        matrix: coeffs.assemble(g),
        kind: OperatorKind::Hc,
        speed: c,
        grid: g.clone(),
    })
}

/// `H_c(u)` evaluated matrix-free.
pub fn apply_hc(c: f64, u: &HydroPair, g: &Grid) -> Result<HydroPair> {
    g.check_pair(u)?;
    Ok(HcCoefficients::new(c, g)?.apply(u, g))
}
