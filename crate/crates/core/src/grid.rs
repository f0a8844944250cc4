//! Uniform periodic grid and the discrete calculus built on it.
//!
//! Derivatives, antiderivatives and sub-grid shifts are Fourier multipliers.
//! Odd-order multipliers drop the Nyquist mode; even orders keep it, which
//! makes the FFT route agree with the closed-form differentiation matrices.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Sampled pair `(v, w)`: `v` is the out-of-plane magnetization and `w` the
/// derivative of the in-plane phase.
#[derive(Debug, Clone, PartialEq)]
pub struct HydroPair {
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

impl HydroPair {
    pub fn new(v: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if v.len() != w.len() {
            return Err(Error::LengthMismatch {
                expected: v.len(),
                found: w.len(),
            });
        }
        Ok(Self { v, w })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            v: vec![0.0; n],
            w: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn max_abs_v(&self) -> f64 {
        self.v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Errors unless `max |v| < ceiling`.
    pub fn check_ceiling(&self, ceiling: f64) -> Result<()> {
        let max_v = self.max_abs_v();
        if max_v < ceiling && max_v.is_finite() {
            Ok(())
        } else {
            Err(Error::VCeiling { max_v, ceiling })
        }
    }

    pub fn add(&self, other: &HydroPair) -> HydroPair {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &HydroPair) -> HydroPair {
        self.axpy(-1.0, other)
    }

    /// `self + alpha * other`
    pub fn axpy(&self, alpha: f64, other: &HydroPair) -> HydroPair {
        HydroPair {
            v: zip_map(&self.v, &other.v, |a, b| a + alpha * b),
            w: zip_map(&self.w, &other.w, |a, b| a + alpha * b),
        }
    }

    pub fn scale(&self, alpha: f64) -> HydroPair {
        HydroPair {
            v: self.v.iter().map(|a| alpha * a).collect(),
            w: self.w.iter().map(|a| alpha * a).collect(),
        }
    }

    /// Component swap `(v, w) -> (w, v)`.
    pub fn swap(&self) -> HydroPair {
        HydroPair {
            v: self.w.clone(),
            w: self.v.clone(),
        }
    }

    /// Block layout `[v; w]`.
    pub fn to_block(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.len());
        out.extend_from_slice(&self.v);
        out.extend_from_slice(&self.w);
        out
    }

    pub fn from_block(block: &[f64]) -> HydroPair {
        let n = block.len() / 2;
        HydroPair {
            v: block[..n].to_vec(),
            w: block[n..].to_vec(),
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.v
            .iter()
            .chain(self.w.iter())
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

pub(crate) fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

/// Half-open interval `[lo, hi)` of positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    /// `[center - radius, center + radius)`
    pub fn ball(center: f64, radius: f64) -> Self {
        Self::new(center - radius, center + radius)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x < self.hi
    }
}

/// Uniform periodic grid on `[-L, L)` with `n` nodes `x_j = -L + j h`.
#[derive(Clone)]
pub struct Grid {
    half_length: f64,
    n: usize,
    spacing: f64,
    nodes: Vec<f64>,
    wavenumbers: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("half_length", &self.half_length)
            .field("n", &self.n)
            .field("spacing", &self.spacing)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.half_length == other.half_length
    }
}

impl Grid {
    pub fn new(half_length: f64, n: usize) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half length must be positive, got {half_length}"
            )));
        }
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "point count must be even and at least 4, got {n}"
            )));
        }
        let spacing = 2.0 * half_length / n as f64;
        let nodes = (0..n).map(|j| -half_length + j as f64 * spacing).collect();
        let base = PI / half_length;
        let wavenumbers = (0..n)
            .map(|m| {
                let m = m as i64;
                let signed = if m <= n as i64 / 2 { m } else { m - n as i64 };
                base * signed as f64
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        Ok(Self {
            half_length,
            n,
            spacing,
            nodes,
            wavenumbers,
            fft,
            ifft,
        })
    }

    /// Grid sized for the soliton of speed `c`.
    ///
    /// The tail needs `L` of about `22 / sqrt(1 - c^2)`; the spacing must
    /// resolve the complex singularities of `w_c`, which sit at distance
    /// `asin|c| / sqrt(1 - c^2)` from the real axis.
    pub fn for_speed(c: f64) -> Result<Self> {
        Self::for_speed_resolved(c, 6.5)
    }

    /// As [`Grid::for_speed`] with at least `points_per_pole` nodes across
    /// the distance to the nearest singularity.
    pub fn for_speed_resolved(c: f64, points_per_pole: f64) -> Result<Self> {
        crate::soliton::check_speed(c)?;
        if !(points_per_pole > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "points per pole must be positive, got {points_per_pole}"
            )));
        }
        let k = (1.0 - c * c).sqrt();
        let half_length = (22.0 / k).clamp(24.0, 80.0);
        let pole = (c.abs().asin() / k).min(0.5 * PI / k);
        let max_spacing = pole / points_per_pole;
        let mut n = 512;
        while 2.0 * half_length / (n as f64) > max_spacing && n < 8192 {
            n *= 2;
        }
        Self::new(half_length, n)
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Index of the node closest to `x` (ties go to the lower index).
    pub fn nearest_node(&self, x: f64) -> usize {
        let j = ((x + self.half_length) / self.spacing).round();
        (j.max(0.0) as usize).min(self.n - 1)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len == self.n {
            Ok(())
        } else {
            Err(Error::LengthMismatch {
                expected: self.n,
                found: len,
            })
        }
    }

    fn check_field(&self, f: &[f64]) -> Result<()> {
        self.check_len(f.len())?;
        match f.iter().position(|x| !x.is_finite()) {
            Some(j) => Err(Error::NonFinite(j)),
            None => Ok(()),
        }
    }

    fn check_complex_field(&self, f: &[Complex64]) -> Result<()> {
        self.check_len(f.len())?;
        match f.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            Some(j) => Err(Error::NonFinite(j)),
            None => Ok(()),
        }
    }

    pub fn check_pair(&self, p: &HydroPair) -> Result<()> {
        self.check_field(&p.v)?;
        self.check_field(&p.w)
    }

    fn forward(&self, data: &mut [Complex64]) {
        self.fft.process(data);
    }

    fn inverse(&self, data: &mut [Complex64]) {
        self.ifft.process(data);
        let scale = 1.0 / self.n as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    /// Applies the Fourier multiplier `symbol(mode index, wavenumber)`.
    pub fn apply_symbol_complex(
        &self,
        f: &[Complex64],
        symbol: impl Fn(usize, f64) -> Complex64,
    ) -> Vec<Complex64> {
        let mut buf = f.to_vec();
        self.forward(&mut buf);
        for (m, z) in buf.iter_mut().enumerate() {
            *z *= symbol(m, self.wavenumbers[m]);
        }
        self.inverse(&mut buf);
        buf
    }

    /// Real version of [`Grid::apply_symbol_complex`]; the imaginary part of
    /// the result is discarded, so the symbol should be Hermitian.
    pub fn apply_symbol(&self, f: &[f64], symbol: impl Fn(usize, f64) -> Complex64) -> Vec<f64> {
        let buf: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.apply_symbol_complex(&buf, symbol)
            .into_iter()
            .map(|z| z.re)
            .collect()
    }

    fn derivative_symbol(&self, order: u32) -> impl Fn(usize, f64) -> Complex64 {
        let nyquist = self.n / 2;
        move |m, xi| {
            if m == nyquist && order % 2 == 1 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, xi).powu(order)
            }
        }
    }

    /// Spectral derivative without input validation.
    pub fn diff(&self, f: &[f64], order: u32) -> Vec<f64> {
        self.apply_symbol(f, self.derivative_symbol(order))
    }

    pub fn diff_complex(&self, f: &[Complex64], order: u32) -> Vec<Complex64> {
        self.apply_symbol_complex(f, self.derivative_symbol(order))
    }

    /// Spectral derivative of order 1, 2 or 3.
    pub fn derivative(&self, f: &[f64], order: u32) -> Result<Vec<f64>> {
        if !(1..=3).contains(&order) {
            return Err(Error::DerivativeOrder(order));
        }
        self.check_field(f)?;
        Ok(self.diff(f, order))
    }

    pub fn derivative_complex(&self, f: &[Complex64], order: u32) -> Result<Vec<Complex64>> {
        if !(1..=3).contains(&order) {
            return Err(Error::DerivativeOrder(order));
        }
        self.check_complex_field(f)?;
        Ok(self.diff_complex(f, order))
    }

    /// `h * sum f_j`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.spacing * f.iter().sum::<f64>()
    }

    pub fn integrate_complex(&self, f: &[Complex64]) -> Complex64 {
        f.iter().sum::<Complex64>() * self.spacing
    }

    /// L2 inner product of two real fields.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.spacing * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }

    /// L2 x L2 inner product of two pairs.
    pub fn pair_dot(&self, a: &HydroPair, b: &HydroPair) -> f64 {
        self.dot(&a.v, &b.v) + self.dot(&a.w, &b.w)
    }

    /// Antiderivative vanishing at the left edge: `F(x) = ∫_{-L}^{x} f`.
    ///
    /// Mean part integrated exactly, zero-mean part through the inverse
    /// derivative symbol.
    pub fn cumulative_complex(&self, f: &[Complex64]) -> Vec<Complex64> {
        let mut buf = f.to_vec();
        self.forward(&mut buf);
        let mean = buf[0] / self.n as f64;
        let nyquist = self.n / 2;
        for (m, z) in buf.iter_mut().enumerate() {
            if m == 0 || m == nyquist {
                *z = Complex64::new(0.0, 0.0);
            } else {
                *z /= Complex64::new(0.0, self.wavenumbers[m]);
            }
        }
        self.inverse(&mut buf);
        let g0 = buf[0];
        buf.iter()
            .zip(&self.nodes)
            .map(|(&g, &x)| mean * (x + self.half_length) + g - g0)
            .collect()
    }

    pub fn cumulative(&self, f: &[f64]) -> Vec<f64> {
        let buf: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.cumulative_complex(&buf).into_iter().map(|z| z.re).collect()
    }

    /// Samples of `x -> f(x + a)` by trigonometric interpolation.
    pub fn shift(&self, f: &[f64], a: f64) -> Vec<f64> {
        let nyquist = self.n / 2;
        self.apply_symbol(f, move |m, xi| {
            if m == nyquist {
                Complex64::new((xi * a).cos(), 0.0)
            } else {
                Complex64::from_polar(1.0, xi * a)
            }
        })
    }

    pub fn shift_pair(&self, p: &HydroPair, a: f64) -> HydroPair {
        HydroPair {
            v: self.shift(&p.v, a),
            w: self.shift(&p.w, a),
        }
    }

    /// `∫_Ω ((∂x v)^2 + v^2 + w^2)`, square-rooted. `None` means the whole grid.
    pub fn norm_x(&self, p: &HydroPair, window: Option<Window>) -> Result<f64> {
        self.check_pair(p)?;
        let dv = self.diff(&p.v, 1);
        let density: Vec<f64> = (0..self.n)
            .map(|j| dv[j] * dv[j] + p.v[j] * p.v[j] + p.w[j] * p.w[j])
            .collect();
        self.window_integral(&density, window).map(f64::sqrt)
    }

    /// Integral of `f` over the nodes inside `window`.
    pub fn window_integral(&self, f: &[f64], window: Option<Window>) -> Result<f64> {
        match window {
            None => Ok(self.integrate(f)),
            Some(win) => {
                let mut any = false;
                let mut sum = 0.0;
                for (x, val) in self.nodes.iter().zip(f) {
                    if win.contains(*x) {
                        any = true;
                        sum += val;
                    }
                }
                if !any {
                    return Err(Error::EmptyWindow {
                        lo: win.lo,
                        hi: win.hi,
                    });
                }
                Ok(sum * self.spacing)
            }
        }
    }

    /// `∫ f(x + a) e^{rate |x|} dx`.
    pub fn weighted_integral(&self, f: &[f64], rate: f64, center: f64) -> Result<f64> {
        self.check_field(f)?;
        self.check_weight(rate)?;
        let shifted = if center == 0.0 {
            f.to_vec()
        } else {
            self.shift(f, center)
        };
        if rate == 0.0 {
            return Ok(self.integrate(&shifted));
        }
        let sum = shifted
            .iter()
            .zip(&self.nodes)
            .map(|(v, x)| v * (rate * x.abs()).exp())
            .sum::<f64>();
        // Euler-Maclaurin correction for the kink of the weight at the origin
        let kink = rate * self.spacing * self.spacing / 6.0 * shifted[self.nearest_node(0.0)];
        Ok(self.spacing * sum + kink)
    }

    pub fn check_weight(&self, rate: f64) -> Result<()> {
        let exponent = rate * self.half_length;
        if !exponent.is_finite() || exponent > 600.0 {
            return Err(Error::WeightOverflow(exponent));
        }
        Ok(())
    }

    /// Dense first-derivative matrix (Nyquist mode annihilated).
    pub fn first_derivative_matrix(&self) -> DMatrix<f64> {
        let n = self.n;
        let step = 2.0 * PI / n as f64;
        let scale = PI / self.half_length;
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                let d = i as i64 - j as i64;
                let sign = if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                0.5 * sign / (0.5 * d as f64 * step).tan() * scale
            }
        })
    }

    /// Dense second-derivative matrix (Nyquist mode kept).
    pub fn second_derivative_matrix(&self) -> DMatrix<f64> {
        let n = self.n;
        let step = 2.0 * PI / n as f64;
        let scale = (PI / self.half_length).powi(2);
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                (-PI * PI / (3.0 * step * step) - 1.0 / 6.0) * scale
            } else {
                let d = i as i64 - j as i64;
                let sign = if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let s = (0.5 * d as f64 * step).sin();
                -sign / (2.0 * s * s) * scale
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(PI, 64).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(1.0, 7).is_err());
        assert!(Grid::new(-1.0, 8).is_err());
        assert!(Grid::new(0.0, 8).is_err());
    }

    #[test]
    fn nodes_and_spacing() {
        let g = Grid::new(10.0, 100).unwrap();
        assert_eq!(g.nodes()[0], -10.0);
        assert!((g.spacing() - 0.2).abs() < 1e-15);
        assert!(g.nodes().windows(2).all(|p| p[1] > p[0]));
        assert_eq!(g.nearest_node(0.0), 50);
        assert_eq!(g.nearest_node(-100.0), 0);
        assert_eq!(g.nearest_node(100.0), 99);
    }

    #[test]
    fn derivative_of_sine_is_exact() {
        let g = grid();
        for k in 1..5 {
            let f = g.map(|x| (k as f64 * x).sin());
            let df = g.derivative(&f, 1).unwrap();
            for (d, x) in df.iter().zip(g.nodes()) {
                assert!((d - k as f64 * (k as f64 * x).cos()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = grid();
        let f = vec![3.5; g.len()];
        for order in 1..=3 {
            let df = g.derivative(&f, order).unwrap();
            assert!(df.iter().all(|d| d.abs() < 1e-12));
        }
    }

    #[test]
    fn derivative_rejects_bad_input() {
        let g = grid();
        let mut f = vec![0.0; g.len()];
        assert_eq!(g.derivative(&f, 0), Err(Error::DerivativeOrder(0)));
        assert_eq!(g.derivative(&f, 4), Err(Error::DerivativeOrder(4)));
        f[3] = f64::NAN;
        assert_eq!(g.derivative(&f, 1), Err(Error::NonFinite(3)));
        assert!(matches!(
            g.derivative(&f[..10], 1),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn integrate_constant() {
        let g = Grid::new(7.5, 30).unwrap();
        assert_eq!(g.integrate(&vec![1.0; 30]), 15.0);
    }

    #[test]
    fn cumulative_of_band_limited_field() {
        let g = grid();
        // ∫_{-π}^{x} (1 + cos 2y) dy = x + π + sin(2x)/2
        let f = g.map(|x| 1.0 + (2.0 * x).cos());
        let cum = g.cumulative(&f);
        for (c, x) in cum.iter().zip(g.nodes()) {
            assert!((c - (x + PI + 0.5 * (2.0 * x).sin())).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_matches_translation() {
        let g = grid();
        let f = g.map(|x| (3.0 * x).cos() + (x).sin());
        let s = g.shift(&f, 0.3);
        for (v, x) in s.iter().zip(g.nodes()) {
            let exact = (3.0 * (x + 0.3)).cos() + (x + 0.3).sin();
            assert!((v - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn matrices_match_fft_route() {
        let g = Grid::new(5.0, 32).unwrap();
        let d1 = g.first_derivative_matrix();
        let d2 = g.second_derivative_matrix();
        for j in 0..g.len() {
            let mut e = vec![0.0; g.len()];
            e[j] = 1.0;
            let c1 = g.diff(&e, 1);
            let c2 = g.diff(&e, 2);
            for i in 0..g.len() {
                assert!((d1[(i, j)] - c1[i]).abs() < 1e-11);
                assert!((d2[(i, j)] - c2[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn window_errors_when_empty() {
        let g = grid();
        let f = vec![1.0; g.len()];
        assert!(matches!(
            g.window_integral(&f, Some(Window::new(0.01, 0.02))),
            Err(Error::EmptyWindow { .. })
        ));
    }

    #[test]
    fn weight_guard() {
        let g = Grid::new(100.0, 64).unwrap();
        let f = vec![0.0; 64];
        assert!(matches!(
            g.weighted_integral(&f, 7.0, 0.0),
            Err(Error::WeightOverflow(_))
        ));
        assert_eq!(g.weighted_integral(&f, 1.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn zero_rate_weight_is_plain_integral_of_shift() {
        let g = Grid::new(20.0, 256).unwrap();
        let f = g.map(|x| (-x * x).exp());
        let shifted = g.shift(&f, 1.5);
        assert_eq!(
            g.weighted_integral(&f, 0.0, 1.5).unwrap(),
            g.integrate(&shifted)
        );
    }
}
