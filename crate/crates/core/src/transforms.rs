//! Maps between the spin field, the hydrodynamic pair and the Schrödinger
//! variable.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid, HydroPair};

/// Sampled map into the unit sphere.
///
/// The in-plane component `m1 + i m2` tends to unit constants at both ends of
/// the line with different phases, so it is not periodic on the grid. It is
/// stored together with `twist`, the total phase gained across the box, and
/// differentiated in the Bloch basis `e^{i twist x / 2L} × periodic`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinField {
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub m3: Vec<f64>,
    pub twist: f64,
}

impl SpinField {
    pub fn from_parts(m1: Vec<f64>, m2: Vec<f64>, m3: Vec<f64>, twist: f64) -> Self {
        Self { m1, m2, m3, twist }
    }

    /// Uniform field `(cos φ, sin φ, 0)`.
    pub fn uniform(n: usize, phase: f64) -> Self {
        Self::from_parts(vec![phase.cos(); n], vec![phase.sin(); n], vec![0.0; n], 0.0)
    }

    pub fn len(&self) -> usize {
        self.m3.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m3.is_empty()
    }

    pub fn planar(&self) -> Vec<Complex64> {
        self.m1
            .iter()
            .zip(&self.m2)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect()
    }

    /// Largest deviation of `|m|` from 1.
    pub fn unit_deviation(&self) -> f64 {
        (0..self.len())
            .map(|j| {
                (self.m1[j] * self.m1[j] + self.m2[j] * self.m2[j] + self.m3[j] * self.m3[j])
                    .sqrt()
                    - 1.0
            })
            .fold(0.0_f64, |m, d| m.max(d.abs()))
    }

    pub fn renormalize(&mut self) {
        for j in 0..self.len() {
            let r = (self.m1[j] * self.m1[j] + self.m2[j] * self.m2[j] + self.m3[j] * self.m3[j])
                .sqrt();
            self.m1[j] /= r;
            self.m2[j] /= r;
            self.m3[j] /= r;
        }
    }

    /// Rotation by `angle` about the third axis.
    pub fn rotated(&self, angle: f64) -> SpinField {
        let (s, c) = angle.sin_cos();
        SpinField {
            m1: (0..self.len()).map(|j| c * self.m1[j] - s * self.m2[j]).collect(),
            m2: (0..self.len()).map(|j| s * self.m1[j] + c * self.m2[j]).collect(),
            m3: self.m3.clone(),
            twist: self.twist,
        }
    }

    fn bloch_rate(&self, g: &Grid) -> f64 {
        self.twist / (2.0 * g.half_length())
    }

    /// Periodic part `e^{-i α x} m̌`.
    fn periodic_part(&self, g: &Grid) -> Vec<Complex64> {
        let alpha = self.bloch_rate(g);
        g.nodes()
            .iter()
            .zip(self.m1.iter().zip(&self.m2))
            .map(|(&x, (&a, &b))| Complex64::new(a, b) * Complex64::from_polar(1.0, -alpha * x))
            .collect()
    }

    fn with_twist_restored(&self, g: &Grid, periodic: &[Complex64]) -> Vec<Complex64> {
        let alpha = self.bloch_rate(g);
        g.nodes()
            .iter()
            .zip(periodic)
            .map(|(&x, &z)| z * Complex64::from_polar(1.0, alpha * x))
            .collect()
    }

    /// Derivative of `m̌` of the given order in the twisted basis.
    pub fn planar_derivative_complex(&self, g: &Grid, order: u32) -> Vec<Complex64> {
        let alpha = self.bloch_rate(g);
        let nyquist = g.len() / 2;
        let periodic = self.periodic_part(g);
        let d = g.apply_symbol_complex(&periodic, |m, xi| {
            if m == nyquist && order % 2 == 1 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, xi + alpha).powu(order)
            }
        });
        self.with_twist_restored(g, &d)
    }

    /// `(∂^order m1, ∂^order m2)`.
    pub fn planar_derivative(&self, g: &Grid, order: u32) -> (Vec<f64>, Vec<f64>) {
        let d = self.planar_derivative_complex(g, order);
        (d.iter().map(|z| z.re).collect(), d.iter().map(|z| z.im).collect())
    }

    /// Samples of `x -> m̌(x + b)`.
    pub fn planar_shift(&self, g: &Grid, b: f64) -> Vec<Complex64> {
        let alpha = self.bloch_rate(g);
        let nyquist = g.len() / 2;
        let periodic = self.periodic_part(g);
        let shifted = g.apply_symbol_complex(&periodic, |m, xi| {
            if m == nyquist {
                Complex64::new((xi * b).cos(), 0.0)
            } else {
                Complex64::from_polar(1.0, xi * b)
            }
        });
        g.nodes()
            .iter()
            .zip(shifted)
            .map(|(&x, z)| z * Complex64::from_polar(1.0, alpha * (x + b)))
            .collect()
    }
}

/// Schrödinger variable together with the `v` it is coupled to.
///
/// `Ψ` is quasi-periodic on the box: `Ψ(x + 2L) = e^{i twist} Ψ(x)` with
/// `twist = -∫ v w` over one period.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiState {
    pub psi: Vec<Complex64>,
    pub v: Vec<f64>,
    pub twist: f64,
}

impl PsiState {
    pub fn bloch_rate(&self, g: &Grid) -> f64 {
        self.twist / (2.0 * g.half_length())
    }
}

pub fn spin_to_hydro(m: &SpinField, g: &Grid) -> Result<HydroPair> {
    g.check_len(m.len())?;
    for j in 0..m.len() {
        let modulus = m.m1[j].hypot(m.m2[j]);
        if !(modulus > 1e-12) {
            return Err(Error::VanishingPlanar { node: j, modulus });
        }
    }
    let (d1, d2) = m.planar_derivative(g, 1);
    let w = (0..m.len())
        .map(|j| (m.m1[j] * d2[j] - m.m2[j] * d1[j]) / (m.m1[j].powi(2) + m.m2[j].powi(2)))
        .collect();
    Ok(HydroPair {
        v: m.m3.clone(),
        w,
    })
}

/// Rebuilds the spin field with in-plane phase `φ(0) + ∫_0^x w`.
pub fn hydro_to_spin(p: &HydroPair, phase_at_origin: f64, g: &Grid) -> Result<SpinField> {
    g.check_pair(p)?;
    p.check_ceiling(1.0)?;
    let cum = g.cumulative(&p.w);
    let j0 = g.nearest_node(0.0);
    let origin = cum[j0];
    let twist = g.integrate(&p.w);
    let n = g.len();
    let (mut m1, mut m2) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for j in 0..n {
        let rho = (1.0 - p.v[j] * p.v[j]).sqrt();
        let phi = phase_at_origin + cum[j] - origin;
        m1.push(rho * phi.cos());
        m2.push(rho * phi.sin());
    }
    Ok(SpinField::from_parts(m1, m2, p.v.clone(), twist))
}

/// `θ(x) = -∫_{-L}^{x} v w`.
pub fn phase_integral(p: &HydroPair, g: &Grid) -> Vec<f64> {
    let vw: Vec<f64> = p.v.iter().zip(&p.w).map(|(a, b)| -a * b).collect();
    g.cumulative(&vw)
}

pub fn hydro_to_psi(p: &HydroPair, g: &Grid) -> Result<PsiState> {
    g.check_pair(p)?;
    p.check_ceiling(1.0)?;
    let dv = g.diff(&p.v, 1);
    let theta = phase_integral(p, g);
    let psi = (0..g.len())
        .map(|j| {
            let root = (1.0 - p.v[j] * p.v[j]).sqrt();
            Complex64::new(dv[j] / root, root * p.w[j]) * Complex64::from_polar(0.5, theta[j])
        })
        .collect();
    Ok(PsiState {
        psi,
        v: p.v.clone(),
        twist: -g.dot(&p.v, &p.w),
    })
}

/// `F(v, Ψ)(x) = ∫_{-L}^{x} v Ψ`.
pub fn f_integral(v: &[f64], psi: &[Complex64], g: &Grid) -> Result<Vec<Complex64>> {
    g.check_len(v.len())?;
    g.check_len(psi.len())?;
    Ok(f_integral_unchecked(v, psi, g))
}

pub(crate) fn f_integral_unchecked(v: &[f64], psi: &[Complex64], g: &Grid) -> Vec<Complex64> {
    let prod: Vec<Complex64> = v.iter().zip(psi).map(|(&a, &z)| z * a).collect();
    g.cumulative_complex(&prod)
}

/// `1 - 2F(v, Ψ)` as the unique antiderivative of `-2vΨ` carrying the same
/// twist as `Ψ`. On data that vanish at the box edge this agrees with the
/// left-edge quadrature of [`f_integral`]; unlike it, it stays consistent
/// once radiation crosses the periodic seam. Falls back to the left-edge
/// quadrature when the twist is a multiple of `2π`.
pub fn seam_factor(psi: &[Complex64], v: &[f64], twist: f64, g: &Grid) -> Vec<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    if (0.5 * twist).sin().abs() < 1e-8 {
        return f_integral_unchecked(v, psi, g)
            .into_iter()
            .map(|f| one - 2.0 * f)
            .collect();
    }
    let alpha = twist / (2.0 * g.half_length());
    let periodic: Vec<Complex64> = g
        .nodes()
        .iter()
        .zip(v.iter().zip(psi))
        .map(|(&x, (&a, &z))| z * a * Complex64::from_polar(1.0, -alpha * x))
        .collect();
    let anti = g.apply_symbol_complex(&periodic, |_, xi| Complex64::new(0.0, -1.0 / (xi + alpha)));
    g.nodes()
        .iter()
        .zip(anti)
        .map(|(&x, z)| -2.0 * z * Complex64::from_polar(1.0, alpha * x))
        .collect()
}

/// `Ψ (1 - 2F(v, Ψ̄))`; its real part is `½∂x v` and its imaginary part
/// `½(1 - v²) w` on consistent states.
pub fn psi_carrier(s: &PsiState, g: &Grid) -> Vec<Complex64> {
    // F(v, Ψ̄) = conj F(v, Ψ) for real v
    seam_factor(&s.psi, &s.v, s.twist, g)
        .into_iter()
        .zip(&s.psi)
        .map(|(h, &z)| z * h.conj())
        .collect()
}

/// `w = 2 Im(Ψ(1 - 2F(v, Ψ̄))) / (1 - v²)`.
pub fn psi_to_w(s: &PsiState, g: &Grid) -> Result<Vec<f64>> {
    g.check_len(s.v.len())?;
    g.check_len(s.psi.len())?;
    let max_v = s.v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if !(max_v < 1.0) {
        return Err(Error::VCeiling {
            max_v,
            ceiling: 1.0,
        });
    }
    Ok(psi_carrier(s, g)
        .iter()
        .zip(&s.v)
        .map(|(z, v)| 2.0 * z.im / (1.0 - v * v))
        .collect())
}

pub fn psi_to_hydro(s: &PsiState, g: &Grid) -> Result<HydroPair> {
    Ok(HydroPair {
        v: s.v.clone(),
        w: psi_to_w(s, g)?,
    })
}

/// Max-norm of `∂x v - 2 Re(Ψ(1 - 2F(v, Ψ̄)))`.
pub fn constraint_residual(s: &PsiState, g: &Grid) -> f64 {
    let dv = g.diff(&s.v, 1);
    psi_carrier(s, g)
        .iter()
        .zip(dv)
        .map(|(z, d)| (d - 2.0 * z.re).abs())
        .fold(0.0, f64::max)
}
