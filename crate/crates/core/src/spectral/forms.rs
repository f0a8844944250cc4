//! The matrix `M_c` and the quadratic forms `G_c` and `K_c`.

use crate::error::Result;
use crate::grid::{Grid, HydroPair};
use crate::soliton::Profile;

use super::hc::HcCoefficients;

/// Denominator of the `(1,1)` entry of `M_c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McReading {
    /// `(1 - v_c²)²`, the reading that makes `M_c Q_c` a swapped derivative.
    Squared,
    /// `(1 - v_c)²` as typeset.
    Literal,
}

/// Nodewise symmetric matrix `[[diag, off], [off, 0]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct McField {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl McField {
    pub fn apply(&self, u: &HydroPair) -> HydroPair {
        let n = u.len();
        HydroPair {
            v: (0..n).map(|j| self.diag[j] * u.v[j] + self.off[j] * u.w[j]).collect(),
            w: (0..n).map(|j| self.off[j] * u.v[j]).collect(),
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.diag
            .iter()
            .chain(&self.off)
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// `⟨M u, u⟩`.
    pub fn form(&self, u: &HydroPair, g: &Grid) -> f64 {
        g.pair_dot(&self.apply(u), u)
    }
}

pub fn matrix_mc(c: f64, g: &Grid, reading: McReading) -> Result<McField> {
    let p = Profile::new(c)?;
    let mut diag = Vec::with_capacity(g.len());
    let mut off = Vec::with_capacity(g.len());
    for &x in g.nodes() {
        let v = p.v(x);
        let den = match reading {
            McReading::Squared => (1.0 - v * v).powi(2),
            McReading::Literal => (1.0 - v).powi(2),
        };
        diag.push(-2.0 * c * v * p.v_x(x) / den);
        off.push(-p.log_slope(x));
    }
    Ok(McField { diag, off })
}

/// Least-squares factor `f` with `M_c Q_c ≈ f S ∂x Q_c`, and the nodewise
/// residual of that fit.
pub fn mc_swap_factor(c: f64, g: &Grid, reading: McReading) -> Result<(f64, f64)> {
    let m = matrix_mc(c, g, reading)?;
    let q = crate::soliton::soliton_hydro(c, 0.0, g)?;
    let target = crate::soliton::soliton_dx(c, 0.0, g)?.swap();
    let mq = m.apply(&q);
    let factor = g.pair_dot(&mq, &target) / g.pair_dot(&target, &target);
    Ok((factor, mq.axpy(-factor, &target).max_norm()))
}

/// The evaluations of `G_c(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcValues {
    /// `2⟨S M_c u, H_c(-2 ∂x u)⟩`.
    pub path_a: f64,
    /// Sum of squares with weights 2 and 6.
    pub path_b: f64,
    /// Sum of squares with the typeset weights 2 and 3.
    pub path_b_printed: f64,
    /// `6 K₁ + 2 K₂` evaluated on `(v_c u₁, v_c u₂)`.
    pub path_k: f64,
    /// `K₁ + K₂` as typeset.
    pub path_k_printed: f64,
}

impl GcValues {
    pub fn ab_relative(&self) -> f64 {
        (self.path_a - self.path_b).abs() / self.path_a.abs().max(self.path_b.abs())
    }

    pub fn bk_relative(&self) -> f64 {
        (self.path_k - self.path_b).abs() / self.path_k.abs().max(self.path_b.abs())
    }
}

/// The two squares of the sum-of-squares form, sampled nodewise, with their
/// weights `μ` and `v⁴/μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GcSquares {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub first_weight: Vec<f64>,
    pub second_weight: Vec<f64>,
}

pub fn gc_squares(c: f64, u: &HydroPair, g: &Grid) -> Result<GcSquares> {
    g.check_pair(u)?;
    let p = Profile::new(c)?;
    let du = g.diff(&u.v, 1);
    let n = g.len();
    let mut out = GcSquares {
        first: Vec::with_capacity(n),
        second: Vec::with_capacity(n),
        first_weight: Vec::with_capacity(n),
        second_weight: Vec::with_capacity(n),
    };
    for (j, &x) in g.nodes().iter().enumerate() {
        let v2 = p.v(x).powi(2);
        let ratio = p.mu_over_v2(x);
        let slope = p.log_slope(x);
        // v v_x / μ = (v_x / v) / (μ / v²)
        let first = u.w[j] - c / ratio * u.v[j] - 2.0 * c * slope / (ratio * (1.0 - v2)) * du[j];
        out.first.push(first);
        out.second.push(du[j] - slope * u.v[j]);
        out.first_weight.push(v2 * ratio);
        out.second_weight.push(v2 / ratio);
    }
    Ok(out)
}

fn weighted_square_sum(g: &Grid, weight: &[f64], f: &[f64]) -> f64 {
    g.integrate(&weight.iter().zip(f).map(|(w, x)| w * x * x).collect::<Vec<_>>())
}

/// `K₁` and `K₂` at `V = (v_c u₁, v_c u₂)`.
pub fn kc_terms(c: f64, u: &HydroPair, g: &Grid) -> Result<(f64, f64)> {
    g.check_pair(u)?;
    let p = Profile::new(c)?;
    let big_v = HydroPair {
        v: g.nodes().iter().zip(&u.v).map(|(&x, a)| p.v(x) * a).collect(),
        w: g.nodes().iter().zip(&u.w).map(|(&x, a)| p.v(x) * a).collect(),
    };
    let dv1 = g.diff(&big_v.v, 1);
    let mut k1 = Vec::with_capacity(g.len());
    let mut k2 = Vec::with_capacity(g.len());
    for (j, &x) in g.nodes().iter().enumerate() {
        let v2 = p.v(x).powi(2);
        let ratio = p.mu_over_v2(x);
        let slope = p.log_slope(x);
        let lambda_ratio = 1.0 - 2.0 * c * c - v2;
        let r1 = dv1[j] - 2.0 * slope * big_v.v[j];
        let r2 = big_v.w[j] + c * lambda_ratio / (ratio * (1.0 - v2)) * big_v.v[j]
            - 2.0 * c * slope / (ratio * (1.0 - v2)) * dv1[j];
        k1.push(r1 * r1 / ratio);
        k2.push(ratio * r2 * r2);
    }
    Ok((g.integrate(&k1), g.integrate(&k2)))
}

pub fn form_gc(c: f64, u: &HydroPair, g: &Grid) -> Result<GcValues> {
    g.check_pair(u)?;
    let sq = gc_squares(c, u, g)?;
    let a = weighted_square_sum(g, &sq.first_weight, &sq.first);
    let b = weighted_square_sum(g, &sq.second_weight, &sq.second);
    let m = matrix_mc(c, g, McReading::Squared)?;
    let smu = m.apply(u).swap();
    let du = HydroPair {
        v: g.diff(&u.v, 1),
        w: g.diff(&u.w, 1),
    };
    let h = HcCoefficients::new(c, g)?.apply(&du.scale(-2.0), g);
    let (k1, k2) = kc_terms(c, u, g)?;
    Ok(GcValues {
        path_a: 2.0 * g.pair_dot(&smu, &h),
        path_b: 2.0 * a + 6.0 * b,
        path_b_printed: 2.0 * a + 3.0 * b,
        path_k: 6.0 * k1 + 2.0 * k2,
        path_k_printed: k1 + k2,
    })
}
