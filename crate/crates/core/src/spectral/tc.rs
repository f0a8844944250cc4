//! The operator `T_c` of the quadratic form `K_c` and its essential edge.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::Result;
use crate::grid::{Grid, HydroPair};
use crate::soliton::Profile;

use super::{OperatorKind, OperatorMatrix};

/// Sampled coefficients of
///
/// ```text
/// T_c(w) = ( -∂x(s ∂x w1) + potential w1 + coupling w2,
///            coupling w1 + lower w2 )
/// ```
///
/// with `s = leading · v_c²/μ_c` and `lower = μ_c/v_c²`.
#[derive(Debug, Clone, PartialEq)]
pub struct TcCoefficients {
    pub speed: f64,
    pub stiffness: Vec<f64>,
    pub stiffness_xx: Vec<f64>,
    pub potential: Vec<f64>,
    pub coupling: Vec<f64>,
    pub lower: Vec<f64>,
}

impl TcCoefficients {
    /// Operator of `K_c`: unit leading coefficient.
    pub fn new(c: f64, g: &Grid) -> Result<Self> {
        Self::with_leading(c, g, 1.0)
    }

    /// Same potential and coupling with the divergence term scaled by
    /// `leading`; `leading = 3` is the form printed alongside `τ_c`.
    pub fn with_leading(c: f64, g: &Grid, leading: f64) -> Result<Self> {
        let p = Profile::new(c)?;
        let n = g.len();
        let mut stiffness = Vec::with_capacity(n);
        let mut potential = Vec::with_capacity(n);
        let mut coupling = Vec::with_capacity(n);
        let mut lower = Vec::with_capacity(n);
        for &x in g.nodes() {
            let v2 = p.v(x).powi(2);
            let ratio = p.mu_over_v2(x);
            let slope2 = p.log_slope(x).powi(2);
            let d = 1.0 - v2;
            let q = 2.0 * c * c - 1.0 + v2;
            stiffness.push(leading / ratio);
            potential.push(
                v2 * (8.0 * slope2 - 2.0 * d) / (ratio * ratio)
                    + 4.0 * slope2 / ratio
                    + c * c * q * q / (ratio * d * d),
            );
            coupling.push(-c * q / d);
            lower.push(ratio);
        }
        let far = stiffness[0];
        let shifted: Vec<f64> = stiffness.iter().map(|s| s - far).collect();
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

    pub fn apply(&self, u: &HydroPair, g: &Grid) -> HydroPair {
        let n = g.len();
        let su: Vec<f64> = (0..n).map(|j| self.stiffness[j] * u.v[j]).collect();
        let d2_su = g.diff(&su, 2);
        let d2_u = g.diff(&u.v, 2);
        let mut first = Vec::with_capacity(n);
        let mut second = Vec::with_capacity(n);
        for j in 0..n {
            let div = -0.5 * (d2_su[j] + self.stiffness[j] * d2_u[j] - self.stiffness_xx[j] * u.v[j]);
            first.push(div + self.potential[j] * u.v[j] + self.coupling[j] * u.w[j]);
            second.push(self.coupling[j] * u.v[j] + self.lower[j] * u.w[j]);
        }
        HydroPair { v: first, w: second }
    }

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

pub fn assemble_tc(c: f64, g: &Grid) -> Result<OperatorMatrix> {
    Ok(OperatorMatrix {
        matrix: TcCoefficients::new(c, g)?.assemble(g),
        kind: OperatorKind::Tc,
        speed: c,
        grid: g.clone(),
    })
}

/// Kernel element of `T_c`: the image `v_c Q_c` rewritten in the variables
/// of `K_c`, `(v², -c v² λ/(μ(1 - v²)))` with `λ = 4(∂x v)² - μ`.
pub fn tc_kernel(c: f64, g: &Grid) -> Result<HydroPair> {
    let p = Profile::new(c)?;
    Ok(HydroPair {
        v: g.map(|x| p.v(x).powi(2)),
        w: g.map(|x| {
            let v2 = p.v(x).powi(2);
            -c * v2 * (1.0 - 2.0 * c * c - v2) / (p.mu_over_v2(x) * (1.0 - v2))
        }),
    })
}

/// Kernel element as printed: `(v², 2c v² (∂x v)²/(μ(1 - v²)))`.
pub fn tc_kernel_printed(c: f64, g: &Grid) -> Result<HydroPair> {
    let p = Profile::new(c)?;
    Ok(HydroPair {
        v: g.map(|x| p.v(x).powi(2)),
        w: g.map(|x| {
            let v2 = p.v(x).powi(2);
            2.0 * c * v2 * p.log_slope(x).powi(2) / (p.mu_over_v2(x) * (1.0 - v2))
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssentialEdge {
    pub tau1: f64,
    pub tau2: f64,
    pub tau: f64,
}

/// Closed-form bottom `τ_c = τ₁ - ½ sqrt(τ₂)` of the essential spectrum.
pub fn essential_edge(c: f64) -> Result<EssentialEdge> {
    crate::soliton::check_speed(c)?;
    let c2 = c * c;
    let q = 2.0 * c2 - 1.0;
    let a = 4.0 * (1.0 - c2) + c2 * q * q;
    let b = 3.0 - 2.0 * c2;
    let tau1 = a / (2.0 * b) + b / 2.0;
    let tau2 = (a / b - b).powi(2) + 4.0 * c2 * q * q;
    Ok(EssentialEdge {
        tau1,
        tau2,
        tau: tau1 - 0.5 * tau2.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeEstimate {
    pub speed: f64,
    pub half_length: f64,
    /// Eigenvalue closest to zero (the kernel).
    pub kernel_value: f64,
    /// Smallest eigenvalue once the kernel is excluded.
    pub smallest_nonkernel: f64,
    /// Smallest eigenvalue whose eigenvector keeps at least a quarter of its
    /// mass in `|x| > L/2`.
    pub extended_edge: f64,
    /// Number of eigenvalues strictly between the kernel and `τ_c`.
    pub below_edge: usize,
    pub tau: f64,
}

impl EdgeEstimate {
    pub fn relative_error(&self) -> f64 {
        (self.smallest_nonkernel - self.tau).abs() / self.tau
    }
}

/// Dense eigen-decomposition of `T_c`, locating the edge of the continuum.
pub fn essential_edge_numeric(c: f64, g: &Grid) -> Result<EdgeEstimate> {
    let tau = essential_edge(c)?.tau;
    let eig = SymmetricEigen::new(TcCoefficients::new(c, g)?.assemble(g));
    let n = g.len();
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let kernel_pos = order
        .iter()
        .enumerate()
        .min_by(|a, b| eig.eigenvalues[*a.1].abs().total_cmp(&eig.eigenvalues[*b.1].abs()))
        .map(|(pos, _)| pos)
        .unwrap_or(0);
    let kernel_value = eig.eigenvalues[order[kernel_pos]];
    let rest: Vec<usize> = order
        .iter()
        .enumerate()
        .filter(|(pos, _)| *pos != kernel_pos)
        .map(|(_, &i)| i)
        .collect();
    let smallest_nonkernel = eig.eigenvalues[rest[0]];
    let half = g.half_length() / 2.0;
    let outer_mass = |i: usize| -> f64 {
        let col = eig.eigenvectors.column(i);
        g.nodes()
            .iter()
            .enumerate()
            .filter(|(_, x)| x.abs() > half)
            .map(|(j, _)| col[j] * col[j] + col[n + j] * col[n + j])
            .sum::<f64>()
    };
    let extended_edge = rest
        .iter()
        .find(|&&i| outer_mass(i) >= 0.25)
        .map(|&i| eig.eigenvalues[i])
        .unwrap_or(f64::NAN);
    let below_edge = rest.iter().filter(|&&i| eig.eigenvalues[i] < tau).count();
    Ok(EdgeEstimate {
        speed: c,
        half_length: g.half_length(),
        kernel_value,
        smallest_nonkernel,
        extended_edge,
        below_edge,
        tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_at_equal_split() {
        let e = essential_edge(std::f64::consts::FRAC_1_SQRT_2).unwrap();
        assert!((e.tau1 - 1.5).abs() < 1e-12);
        assert!((e.tau2 - 1.0).abs() < 1e-12);
        assert!((e.tau - 1.0).abs() < 1e-12);
    }

    #[test]
    fn edge_is_positive() {
        for c in [0.3, 0.5, 0.8, 0.95, -0.5] {
            assert!(essential_edge(c).unwrap().tau > 0.0);
        }
    }

    #[test]
    fn kernel_of_corrected_operator() {
        for c in [0.5, 0.8] {
            let g = Grid::for_speed(c).unwrap();
            let t = TcCoefficients::new(c, &g).unwrap();
            let k = tc_kernel(c, &g).unwrap();
            let r = t.apply(&k, &g);
            assert!(r.max_norm() < 1e-6 * k.max_norm(), "c={c} {}", r.max_norm());
            let printed = t.apply(&tc_kernel_printed(c, &g).unwrap(), &g);
            assert!(printed.max_norm() > 1e-3);
        }
    }

    #[test]
    fn dense_assembly_is_symmetric_and_matches() {
        let g = Grid::new(20.0, 128).unwrap();
        let op = assemble_tc(0.6, &g).unwrap();
        assert!(op.symmetry_defect() <= 1e-12);
        let u = HydroPair {
            v: g.map(|x| (-x * x / 4.0).exp()),
            w: g.map(|x| x * (-x * x / 3.0).exp()),
        };
        let free = TcCoefficients::new(0.6, &g).unwrap().apply(&u, &g);
        assert!(op.apply(&u).sub(&free).max_norm() < 1e-10);
    }
}
