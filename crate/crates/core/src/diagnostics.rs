//! Windowed momentum, the monotonicity audit, weighted decay integrals and
//! the in-plane phase of a spin field.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid, HydroPair};
use crate::modulation::ModulationSeries;
use crate::transforms::SpinField;

/// `Φ(x) = ½(1 + tanh(ν x))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    pub rate: f64,
}

impl Cutoff {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidArgument(format!("cutoff rate must be positive, got {rate}")));
        }
        Ok(Self { rate })
    }

    /// Default rate `sqrt(1 - c²)/8`.
    pub fn for_speed(c: f64) -> Result<Self> {
        crate::soliton::check_speed(c)?;
        Self::new((1.0 - c * c).sqrt() / 8.0)
    }

    pub fn phi(&self, x: f64) -> f64 {
        0.5 * (1.0 + (self.rate * x).tanh())
    }

    pub fn phi_x(&self, x: f64) -> f64 {
        let s = 1.0 / (self.rate * x).cosh();
        0.5 * self.rate * s * s
    }

    pub fn phi_xxx(&self, x: f64) -> f64 {
        let t = (self.rate * x).tanh();
        let s2 = 1.0 - t * t;
        self.rate.powi(3) * s2 * (3.0 * t * t - 1.0)
    }
}

/// Samples of `Φ`, `Φ'`, `Φ'''` at `x - offset` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffProfile {
    pub cutoff: Cutoff,
    pub offset: f64,
    pub phi: Vec<f64>,
    pub phi_x: Vec<f64>,
    pub phi_xxx: Vec<f64>,
}

impl CutoffProfile {
    pub fn sample(cutoff: Cutoff, offset: f64, g: &Grid) -> Self {
        Self {
            cutoff,
            offset,
            phi: g.map(|x| cutoff.phi(x - offset)),
            phi_x: g.map(|x| cutoff.phi_x(x - offset)),
            phi_xxx: g.map(|x| cutoff.phi_xxx(x - offset)),
        }
    }

    /// `min (4ν²Φ' - |Φ'''|)` over the samples; non-negative when the
    /// third-derivative bound holds.
    pub fn bound_margin(&self) -> f64 {
        let nu2 = self.cutoff.rate * self.cutoff.rate;
        self.phi_x
            .iter()
            .zip(&self.phi_xxx)
            .map(|(d1, d3)| 4.0 * nu2 * d1 - d3.abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_monotone(&self) -> bool {
        self.phi.windows(2).all(|w| w[1] >= w[0])
    }
}

/// `I_R = ½ ∫ (v w)(x + a) Φ(x - R) dx`.
pub fn momentum_window(p: &HydroPair, a: f64, r: f64, cutoff: Cutoff, g: &Grid) -> Result<f64> {
    g.check_pair(p)?;
    let q = g.shift_pair(p, a);
    Ok(0.5
        * g.integrate(
            &g.nodes()
                .iter()
                .enumerate()
                .map(|(j, &x)| q.v[j] * q.w[j] * cutoff.phi(x - r))
                .collect::<Vec<_>>(),
        ))
}

/// Terms of the time derivative of `I_{R+σt}` along the hydrodynamic flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowRate {
    /// `∫ v w Φ'`.
    pub transport: f64,
    /// `∫ [v² + w² - 3v²w² + (3 - v²)(∂x v)²/(1 - v²)²] Φ'`.
    pub flux: f64,
    /// `∫ ln(1 - v²) Φ'''`.
    pub curvature: f64,
    /// `∫ [(∂x v)² + v² + w²] Φ'`.
    pub quadratic: f64,
}

impl WindowRate {
    /// `-½(a' + σ)·transport + ¼·flux + ¼·curvature`.
    pub fn derivative(&self, drift: f64) -> f64 {
        -0.5 * drift * self.transport + 0.25 * self.flux + 0.25 * self.curvature
    }

    /// The same expression with unit prefactors, as typeset.
    pub fn derivative_printed(&self, drift: f64) -> f64 {
        -drift * self.transport + self.flux + self.curvature
    }
}

pub fn window_rate(p: &HydroPair, a: f64, r: f64, cutoff: Cutoff, g: &Grid) -> Result<WindowRate> {
    g.check_pair(p)?;
    p.check_ceiling(1.0)?;
    let q = g.shift_pair(p, a);
    let dv = g.diff(&q.v, 1);
    let mut transport = 0.0;
    let mut flux = 0.0;
    let mut curvature = 0.0;
    let mut quadratic = 0.0;
    for (j, &x) in g.nodes().iter().enumerate() {
        let (v, w, vx) = (q.v[j], q.w[j], dv[j]);
        let d = 1.0 - v * v;
        let d1 = cutoff.phi_x(x - r);
        transport += v * w * d1;
        flux += (v * v + w * w - 3.0 * v * v * w * w + (3.0 - v * v) * vx * vx / (d * d)) * d1;
        curvature += d.ln() * cutoff.phi_xxx(x - r);
        quadratic += (vx * vx + v * v + w * w) * d1;
    }
    let h = g.spacing();
    Ok(WindowRate {
        transport: transport * h,
        flux: flux * h,
        curvature: curvature * h,
        quadratic: quadratic * h,
    })
}

/// Fourth-order finite differences on a uniform time grid (second order at
/// the two nodes next to each end, first order at the ends).
pub fn uniform_derivative(dt: f64, y: &[f64]) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|i| {
            if n < 2 {
                0.0
            } else if i >= 2 && i + 2 < n {
                (-y[i + 2] + 8.0 * y[i + 1] - 8.0 * y[i - 1] + y[i - 2]) / (12.0 * dt)
            } else if i >= 1 && i + 1 < n {
                (y[i + 1] - y[i - 1]) / (2.0 * dt)
            } else if i == 0 {
                (y[1] - y[0]) / dt
            } else {
                (y[n - 1] - y[n - 2]) / dt
            }
        })
        .collect()
}

/// Audit of one `(R, σ)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityCell {
    pub r: f64,
    pub sigma: f64,
    pub times: Vec<f64>,
    pub window: Vec<f64>,
    /// Finite-difference derivative of `window`.
    pub rate: Vec<f64>,
    /// Derivative identity with the corrected prefactors.
    pub identity: Vec<f64>,
    /// Derivative identity with the typeset prefactors.
    pub identity_printed: Vec<f64>,
    /// `(1 - c²)/8 ∫ [(∂x v)² + v² + w²] Φ'`.
    pub lower_term: Vec<f64>,
    /// Smallest `B ≥ 0` with `rate ≥ lower_term - B e^{-2ν|R + σt|}` on the
    /// interior frames.
    pub fitted_b: f64,
    /// Smallest `B ≥ 0` with `I(t1) ≥ I(t0) - B e^{-2ν|R|}` for all `t0 ≤ t1`.
    pub fitted_b_two_time: f64,
    /// `max |rate - identity| / max |identity|` over interior frames.
    pub identity_error: f64,
    pub identity_error_printed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub speed: f64,
    pub cutoff: Cutoff,
    pub cells: Vec<MonotonicityCell>,
}

impl MonotonicityReport {
    pub fn max_identity_error(&self) -> f64 {
        self.cells.iter().map(|c| c.identity_error).fold(0.0, f64::max)
    }

    /// Largest variation of `I_R` over time across cells.
    pub fn max_window_variation(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| {
                let lo = c.window.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = c.window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                hi - lo
            })
            .fold(0.0, f64::max)
    }
}

/// Evaluates `I_{R+σt}`, its derivative identity and the two monotonicity
/// inequalities along a tracked trajectory. Snapshots must be equally spaced
/// in time and every frame must carry a modulation state.
pub fn monotonicity_audit(
    snapshots: &[(f64, HydroPair)],
    series: &ModulationSeries,
    r_grid: &[f64],
    sigma_grid: &[f64],
    cutoff: Cutoff,
    g: &Grid,
) -> Result<MonotonicityReport> {
    if snapshots.len() != series.frames.len() || snapshots.len() < 5 {
        return Err(Error::InvalidArgument(
            "audit needs at least five snapshots, each with a modulation frame".into(),
        ));
    }
    let mut positions = Vec::with_capacity(snapshots.len());
    let mut speeds = Vec::with_capacity(snapshots.len());
    for frame in &series.frames {
        let s = frame.state.as_ref().ok_or_else(|| {
            Error::InvalidArgument(format!("frame at t = {} has no modulation state", frame.time))
        })?;
        positions.push(s.position);
        speeds.push(s.speed);
    }
    let times: Vec<f64> = snapshots.iter().map(|(t, _)| *t).collect();
    let dt = times[1] - times[0];
    if times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1.0)) {
        return Err(Error::InvalidArgument("audit needs equally spaced snapshots".into()));
    }
    let drift = uniform_derivative(dt, &positions);
    let speed = speeds.iter().sum::<f64>() / speeds.len() as f64;
    let nu = cutoff.rate;
    let mut cells = Vec::new();
    for &r in r_grid {
        for &sigma in sigma_grid {
            let mut window = Vec::with_capacity(times.len());
            let mut identity = Vec::with_capacity(times.len());
            let mut identity_printed = Vec::with_capacity(times.len());
            let mut lower_term = Vec::with_capacity(times.len());
            for (i, (t, p)) in snapshots.iter().enumerate() {
                let offset = r + sigma * t;
                window.push(momentum_window(p, positions[i], offset, cutoff, g)?);
                let wr = window_rate(p, positions[i], offset, cutoff, g)?;
                identity.push(wr.derivative(drift[i] + sigma));
                identity_printed.push(wr.derivative_printed(drift[i] + sigma));
                lower_term.push((1.0 - speeds[i] * speeds[i]) / 8.0 * wr.quadratic);
            }
            let rate = uniform_derivative(dt, &window);
            // the one-sided end differences are excluded from fits
            let interior = 2..times.len().saturating_sub(2);
            let scale = identity[interior.clone()]
                .iter()
                .fold(0.0_f64, |m, x| m.max(x.abs()))
                .max(f64::MIN_POSITIVE);
            let err = |id: &[f64]| {
                interior
                    .clone()
                    .map(|i| (rate[i] - id[i]).abs())
                    .fold(0.0, f64::max)
                    / scale
            };
            let fitted_b = interior
                .clone()
                .map(|i| (lower_term[i] - rate[i]) * (2.0 * nu * (r + sigma * times[i]).abs()).exp())
                .fold(0.0, f64::max);
            let mut drop: f64 = 0.0;
            let mut running_max = f64::NEG_INFINITY;
            for &val in &window {
                running_max = running_max.max(val);
                drop = drop.max(running_max - val);
            }
            cells.push(MonotonicityCell {
                r,
                sigma,
                times: times.clone(),
                identity_error: err(&identity),
                identity_error_printed: err(&identity_printed),
                fitted_b,
                fitted_b_two_time: drop * (2.0 * nu * r.abs()).exp(),
                window,
                rate,
                identity,
                identity_printed,
                lower_term,
            });
        }
    }
    Ok(MonotonicityReport {
        speed,
        cutoff,
        cells,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayScan {
    pub rate: f64,
    /// `∫ (∂x^k v)²(x + a) e^{2ν|x|}` for `k = 0..=k_max`.
    pub v: Vec<f64>,
    /// Same for `w`.
    pub w: Vec<f64>,
}

/// Weighted integrals of the derivatives of `(v, w)` about the position `a`,
/// with weight `e^{2ν|x|}`.
pub fn decay_scan(p: &HydroPair, a: f64, nu: f64, k_max: u32, g: &Grid) -> Result<DecayScan> {
    g.check_pair(p)?;
    if !(nu >= 0.0 && nu.is_finite()) {
        return Err(Error::InvalidArgument(format!("decay rate must be non-negative, got {nu}")));
    }
    g.check_weight(2.0 * nu)?;
    let q = g.shift_pair(p, a);
    let mut out = DecayScan {
        rate: nu,
        v: Vec::new(),
        w: Vec::new(),
    };
    for k in 0..=k_max {
        for (field, dest) in [(&q.v, &mut out.v), (&q.w, &mut out.w)] {
            let d = if k == 0 { field.clone() } else { g.diff(field, k) };
            let sq: Vec<f64> = d.iter().map(|x| x * x).collect();
            dest.push(g.weighted_integral(&sq, 2.0 * nu, 0.0)?);
        }
    }
    Ok(out)
}

/// Smooth even bump `exp(1 - 1/(1 - (x/r)²))` supported on `|x| < r`.
pub fn bump_window(g: &Grid, radius: f64) -> Vec<f64> {
    g.map(|x| {
        let s = x / radius;
        if s.abs() < 1.0 {
            (1.0 - 1.0 / (1.0 - s * s)).exp()
        } else {
            0.0
        }
    })
}

/// Default phase window: the bump of total width 8.
pub fn default_phase_window(g: &Grid) -> Vec<f64> {
    bump_window(g, 4.0)
}

/// Angle `θ ∈ [0, 2π)` with `Im(e^{-iθ} ∫ m̌(x + b) χ(x) dx) = 0` and positive
/// real part.
pub fn phase_extract(m: &SpinField, b: f64, window: &[f64], g: &Grid) -> Result<f64> {
    g.check_len(m.len())?;
    g.check_len(window.len())?;
    let shifted = m.planar_shift(g, b);
    let integral: Complex64 = shifted
        .iter()
        .zip(window)
        .map(|(z, w)| z * *w)
        .sum::<Complex64>()
        * g.spacing();
    let modulus = integral.norm();
    if !(modulus > 1e-12) {
        return Err(Error::PhaseUndefined(modulus));
    }
    Ok(integral.arg().rem_euclid(2.0 * std::f64::consts::PI))
}
