//! Closed-form dark solitons and the conserved functionals.

use crate::error::{Error, Result};
use crate::grid::{Grid, HydroPair};
use crate::transforms::SpinField;

pub fn check_speed(c: f64) -> Result<()> {
    if c.is_finite() && c != 0.0 && c.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidSpeed(c))
    }
}

/// Speed, position and in-plane rotation of a soliton.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonParams {
    pub speed: f64,
    pub position: f64,
    pub phase: f64,
}

impl SolitonParams {
    pub fn new(speed: f64, position: f64, phase: f64) -> Result<Self> {
        check_speed(speed)?;
        Ok(Self {
            speed,
            position,
            phase,
        })
    }
}

/// Pointwise closed forms for the profile of speed `c`, evaluated at the
/// co-moving coordinate `y = x - a`.
#[derive(Debug, Clone, Copy)]
pub struct Profile {
    pub c: f64,
    pub k: f64,
}

impl Profile {
    pub fn new(c: f64) -> Result<Self> {
        check_speed(c)?;
        Ok(Self {
            c,
            k: (1.0 - c * c).sqrt(),
        })
    }

    fn sech_tanh(&self, y: f64) -> (f64, f64) {
        let u = self.k * y;
        (1.0 / u.cosh(), u.tanh())
    }

    pub fn v(&self, y: f64) -> f64 {
        self.k * self.sech_tanh(y).0
    }

    pub fn w(&self, y: f64) -> f64 {
        let v = self.v(y);
        self.c * v / (1.0 - v * v)
    }

    pub fn v_x(&self, y: f64) -> f64 {
        let (s, t) = self.sech_tanh(y);
        -self.k * self.k * s * t
    }

    pub fn v_xx(&self, y: f64) -> f64 {
        let v = self.v(y);
        self.k * self.k * v - 2.0 * v * v * v
    }

    pub fn w_x(&self, y: f64) -> f64 {
        let v = self.v(y);
        let d = 1.0 - v * v;
        self.c * self.v_x(y) * (1.0 + v * v) / (d * d)
    }

    /// `∂x v / v`, evaluated without dividing small numbers.
    pub fn log_slope(&self, y: f64) -> f64 {
        -self.k * (self.k * y).tanh()
    }

    /// `μ / v²` where `μ = 2(∂x v)² + v²(1 - v²)`.
    pub fn mu_over_v2(&self, y: f64) -> f64 {
        let t = (self.k * y).tanh();
        self.c * self.c + 3.0 * self.k * self.k * t * t
    }

    pub fn mu(&self, y: f64) -> f64 {
        let v = self.v(y);
        v * v * self.mu_over_v2(y)
    }

    /// `∂c v` at fixed `y`.
    pub fn v_c(&self, y: f64) -> f64 {
        let (s, t) = self.sech_tanh(y);
        -self.c / self.k * (s - self.k * y * s * t)
    }

    /// `∂c w` at fixed `y`.
    pub fn w_c(&self, y: f64) -> f64 {
        let v = self.v(y);
        let d = 1.0 - v * v;
        v / d + self.c * self.v_c(y) * (1.0 + v * v) / (d * d)
    }
}

pub fn soliton_hydro(c: f64, a: f64, g: &Grid) -> Result<HydroPair> {
    let p = Profile::new(c)?;
    Ok(HydroPair {
        v: g.map(|x| p.v(x - a)),
        w: g.map(|x| p.w(x - a)),
    })
}

/// `∂x Q_c` in closed form.
pub fn soliton_dx(c: f64, a: f64, g: &Grid) -> Result<HydroPair> {
    let p = Profile::new(c)?;
    Ok(HydroPair {
        v: g.map(|x| p.v_x(x - a)),
        w: g.map(|x| p.w_x(x - a)),
    })
}

/// `∂c Q_c` in closed form.
pub fn soliton_dc(c: f64, a: f64, g: &Grid) -> Result<HydroPair> {
    let p = Profile::new(c)?;
    Ok(HydroPair {
        v: g.map(|x| p.v_c(x - a)),
        w: g.map(|x| p.w_c(x - a)),
    })
}

pub fn soliton_spin(params: SolitonParams, g: &Grid) -> Result<SpinField> {
    let p = Profile::new(params.speed)?;
    let (sin_phi, cos_phi) = params.phase.sin_cos();
    let n = g.len();
    let (mut m1, mut m2, mut m3) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for &x in g.nodes() {
        let u = p.k * (x - params.position);
        let s = 1.0 / u.cosh();
        let a = p.c * s;
        let b = u.tanh();
        m1.push(cos_phi * a - sin_phi * b);
        m2.push(sin_phi * a + cos_phi * b);
        m3.push(p.k * s);
    }
    // in-plane phase runs from -π/2 to π/2 (reversed for c < 0)
    let twist = std::f64::consts::PI * params.speed.signum();
    Ok(SpinField::from_parts(m1, m2, m3, twist))
}

/// Max-norm residuals of the three profile identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeResiduals {
    /// `∂xx v = (1 - c² - 2v²) v`
    pub second_order: f64,
    /// `(∂x v)² = (1 - c² - v²) v²`
    pub first_integral: f64,
    /// `∂x(∂x v / v) = -v²`, on nodes where `v ≥ 1e-4 max v`
    pub log_derivative: f64,
}

impl OdeResiduals {
    pub fn max(&self) -> f64 {
        self.second_order.max(self.first_integral).max(self.log_derivative)
    }
}

pub fn ode_residuals(c: f64, g: &Grid) -> Result<OdeResiduals> {
    let q = soliton_hydro(c, 0.0, g)?;
    let v = &q.v;
    let dv = g.diff(v, 1);
    let d2v = g.diff(v, 2);
    let k2 = 1.0 - c * c;
    let vmax = v.iter().cloned().fold(0.0, f64::max);
    let mut res = OdeResiduals {
        second_order: 0.0,
        first_integral: 0.0,
        log_derivative: 0.0,
    };
    for j in 0..g.len() {
        let vj = v[j];
        res.second_order = res
            .second_order
            .max((d2v[j] - (k2 - 2.0 * vj * vj) * vj).abs());
        res.first_integral = res
            .first_integral
            .max((dv[j] * dv[j] - (k2 - vj * vj) * vj * vj).abs());
        if vj >= 1e-4 * vmax {
            let quotient = (vj * d2v[j] - dv[j] * dv[j]) / (vj * vj);
            res.log_derivative = res.log_derivative.max((quotient + vj * vj).abs());
        }
    }
    Ok(res)
}

/// `μ_c = 2(∂x v_c)² + v_c²(1 - v_c²)`.
pub fn mu_profile(c: f64, g: &Grid) -> Result<Vec<f64>> {
    let p = Profile::new(c)?;
    Ok(g.map(|x| {
        let v = p.v(x);
        let vx = p.v_x(x);
        2.0 * vx * vx + v * v * (1.0 - v * v)
    }))
}

/// Hydrodynamic energy `½∫((∂x v)²/(1-v²) + (1-v²)w² + v²)`.
pub fn energy(p: &HydroPair, g: &Grid) -> Result<f64> {
    g.check_pair(p)?;
    p.check_ceiling(1.0)?;
    Ok(g.integrate(&energy_density(p, g)))
}

pub fn energy_density(p: &HydroPair, g: &Grid) -> Vec<f64> {
    let dv = g.diff(&p.v, 1);
    (0..g.len())
        .map(|j| {
            let v = p.v[j];
            let d = 1.0 - v * v;
            0.5 * (dv[j] * dv[j] / d + d * p.w[j] * p.w[j] + v * v)
        })
        .collect()
}

/// `P = ∫ v w`.
pub fn momentum(p: &HydroPair, g: &Grid) -> Result<f64> {
    g.check_pair(p)?;
    Ok(g.dot(&p.v, &p.w))
}

/// `½∫(|∂x m|² + m3²)`.
pub fn spin_energy(m: &SpinField, g: &Grid) -> Result<f64> {
    g.check_len(m.len())?;
    let (d1, d2) = m.planar_derivative(g, 1);
    let d3 = g.diff(&m.m3, 1);
    let density: Vec<f64> = (0..g.len())
        .map(|j| 0.5 * (d1[j] * d1[j] + d2[j] * d2[j] + d3[j] * d3[j] + m.m3[j] * m.m3[j]))
        .collect();
    Ok(g.integrate(&density))
}

/// Group velocity `(1 + 2k²)/sqrt(1 + k²)` of the linear waves.
pub fn group_velocity(k: f64) -> f64 {
    (1.0 + 2.0 * k * k) / (1.0 + k * k).sqrt()
}

/// `|f̌(0) - ǧ(0)| + ‖f' - g'‖ + ‖f3 - g3‖`, pointwise term at the node nearest 0.
pub fn energy_distance(f: &SpinField, h: &SpinField, g: &Grid) -> Result<f64> {
    g.check_len(f.len())?;
    g.check_len(h.len())?;
    let j0 = g.nearest_node(0.0);
    let pointwise = ((f.m1[j0] - h.m1[j0]).powi(2) + (f.m2[j0] - h.m2[j0]).powi(2)).sqrt();
    let (f1, f2) = f.planar_derivative(g, 1);
    let (h1, h2) = h.planar_derivative(g, 1);
    let f3 = g.diff(&f.m3, 1);
    let h3 = g.diff(&h.m3, 1);
    let grad: f64 = (0..g.len())
        .map(|j| (f1[j] - h1[j]).powi(2) + (f2[j] - h2[j]).powi(2) + (f3[j] - h3[j]).powi(2))
        .sum::<f64>()
        * g.spacing();
    let third: f64 = g.integrate(
        &f.m3
            .iter()
            .zip(&h.m3)
            .map(|(a, b)| (a - b) * (a - b))
            .collect::<Vec<_>>(),
    );
    Ok(pointwise + grad.sqrt() + third.sqrt())
}

/// First variations `(δE/δv, δE/δw)` of the hydrodynamic energy.
pub fn energy_gradient(p: &HydroPair, g: &Grid) -> Result<HydroPair> {
    p.check_ceiling(1.0)?;
    let dv = g.diff(&p.v, 1);
    let flux: Vec<f64> = (0..g.len()).map(|j| dv[j] / (1.0 - p.v[j] * p.v[j])).collect();
    let dflux = g.diff(&flux, 1);
    let mut gv = Vec::with_capacity(g.len());
    let mut gw = Vec::with_capacity(g.len());
    for j in 0..g.len() {
        let v = p.v[j];
        let d = 1.0 - v * v;
        gv.push(-dflux[j] + v * dv[j] * dv[j] / (d * d) - v * p.w[j] * p.w[j] + v);
        gw.push(d * p.w[j]);
    }
    Ok(HydroPair { v: gv, w: gw })
}

/// First variation of the momentum, `(w, v)`.
pub fn momentum_gradient(p: &HydroPair) -> HydroPair {
    p.swap()
}
