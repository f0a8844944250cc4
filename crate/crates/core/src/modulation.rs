//! Modulation parameters `(c, a)` of a state near a soliton, and the
//! functionals built on the co-moving residual.

use crate::error::{Error, Result};
use crate::grid::{Grid, HydroPair};
use crate::soliton::{check_speed, soliton_dc, soliton_dx, soliton_hydro};
use crate::spectral::{chi_matrix_free, matrix_mc, EigenResult, HcCoefficients, McReading};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationOptions {
    /// Orthogonality tolerance relative to `‖ε‖_{L²}`.
    pub tol_orth: f64,
    pub max_iterations: usize,
    /// Largest admissible `‖p - Q_guess‖_X`.
    pub radius: f64,
    /// Admissible `|c|` range; Newton steps leaving it are halved.
    pub min_speed: f64,
    pub max_speed: f64,
    /// Step in `c` for the central difference of `χ_c`.
    pub chi_step: f64,
}

impl Default for ModulationOptions {
    fn default() -> Self {
        Self {
            tol_orth: 1e-10,
            max_iterations: 25,
            radius: 0.3,
            min_speed: 0.05,
            max_speed: 0.99,
            chi_step: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulationState {
    pub speed: f64,
    pub position: f64,
    /// Residual in the co-moving frame, `ε(x) = p(x + a) - Q_c(x)`.
    pub residual: HydroPair,
    /// `(⟨ε, ∂x Q_c⟩, ⟨ε, χ_c⟩)`.
    pub orthogonality: [f64; 2],
    pub iterations: usize,
    pub chi: EigenResult,
}

/// Newton solver for the two orthogonality conditions. Keeps the last `χ_c`
/// to warm-start the next eigen-solve.
#[derive(Debug, Clone)]
pub struct Modulator {
    grid: Grid,
    options: ModulationOptions,
    chi: Option<EigenResult>,
}

impl Modulator {
    pub fn new(grid: &Grid, options: ModulationOptions) -> Self {
        Self {
            grid: grid.clone(),
            options,
            chi: None,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn chi(&mut self, c: f64) -> Result<EigenResult> {
        let start = self.chi.as_ref().map(|r| r.chi.clone());
        let r = chi_matrix_free(c, &self.grid, start.as_ref())?;
        self.chi = Some(r.clone());
        Ok(r)
    }

    fn admissible(&self, c0: f64, c: f64) -> bool {
        c.signum() == c0.signum() && c.abs() > self.options.min_speed && c.abs() < self.options.max_speed
    }

    pub fn decompose(&mut self, p: &HydroPair, guess: (f64, f64)) -> Result<ModulationState> {
        let g = self.grid.clone();
        g.check_pair(p)?;
        let (mut c, mut a) = guess;
        check_speed(c)?;
        let distance = g.norm_x(&p.sub(&soliton_hydro(c, a, &g)?), None)?;
        if distance > self.options.radius {
            return Err(Error::InvalidArgument(format!(
                "state is at X-distance {distance:.3e} from the guess, beyond {}",
                self.options.radius
            )));
        }
        let mut last_reason = String::from("iteration limit reached");
        for it in 0..=self.options.max_iterations {
            let q = soliton_hydro(c, 0.0, &g)?;
            let eps = g.shift_pair(p, a).sub(&q);
            let dq = soliton_dx(c, 0.0, &g)?;
            let chi = self.chi(c)?;
            let f = [g.pair_dot(&eps, &dq), g.pair_dot(&eps, &chi.chi)];
            let eps_norm = g.pair_dot(&eps, &eps).sqrt();
            // the floor sits just above the roundoff of the inner products
            let tol = self.options.tol_orth * eps_norm + 1e-13 * g.pair_dot(&dq, &dq).sqrt();
            if f[0].abs() <= tol && f[1].abs() <= tol {
                return Ok(ModulationState {
                    speed: c,
                    position: a,
                    residual: eps,
                    orthogonality: f,
                    iterations: it,
                    chi,
                });
            }
            if it == self.options.max_iterations {
                break;
            }
            let dc_q = soliton_dc(c, 0.0, &g)?;
            let dx_dc_q = HydroPair {
                v: g.diff(&dc_q.v, 1),
                w: g.diff(&dc_q.w, 1),
            };
            let dxx_q = HydroPair {
                v: g.diff(&dq.v, 1),
                w: g.diff(&dq.w, 1),
            };
            let dx_chi = HydroPair {
                v: g.diff(&chi.chi.v, 1),
                w: g.diff(&chi.chi.w, 1),
            };
            let step = self.options.chi_step;
            let chi_plus = chi_matrix_free(c + step, &g, Some(&chi.chi))?;
            let chi_minus = chi_matrix_free(c - step, &g, Some(&chi.chi))?;
            let dc_chi = chi_plus.chi.sub(&chi_minus.chi).scale(0.5 / step);
            let j11 = g.pair_dot(&dx_dc_q, &eps) - g.pair_dot(&dq, &dc_q);
            let j12 = g.pair_dot(&dq, &dq) - g.pair_dot(&dxx_q, &eps);
            let j21 = g.pair_dot(&dc_chi, &eps) - g.pair_dot(&chi.chi, &dc_q);
            let j22 = g.pair_dot(&chi.chi, &dq) - g.pair_dot(&dx_chi, &eps);
            let det = j11 * j22 - j12 * j21;
            if !(det.abs() > 1e-300 && det.is_finite()) {
                last_reason = format!("singular Jacobian (det = {det:e})");
                break;
            }
            let mut dc = -(j22 * f[0] - j12 * f[1]) / det;
            let mut da = -(-j21 * f[0] + j11 * f[1]) / det;
            let mut halvings = 0;
            while !self.admissible(c, c + dc) {
                dc *= 0.5;
                da *= 0.5;
                halvings += 1;
                if halvings > 30 {
                    return Err(Error::Newton {
                        iterations: it + 1,
                        reason: format!("speed left ({}, {})", self.options.min_speed, self.options.max_speed),
                    });
                }
            }
            c += dc;
            a += da;
            if !(c.is_finite() && a.is_finite()) {
                last_reason = "non-finite iterate".into();
                break;
            }
        }
        Err(Error::Newton {
            iterations: self.options.max_iterations,
            reason: last_reason,
        })
    }
}

/// One-shot decomposition with default options.
pub fn decompose(p: &HydroPair, guess: (f64, f64), g: &Grid) -> Result<ModulationState> {
    Modulator::new(g, ModulationOptions::default()).decompose(p, guess)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackFrame {
    pub time: f64,
    /// `None` when the decomposition of this frame failed.
    pub state: Option<ModulationState>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulationSeries {
    pub frames: Vec<TrackFrame>,
    /// Finite-difference `c'(t)` and `a'(t)` on the successful frames.
    pub speed_rate: Vec<f64>,
    pub position_rate: Vec<f64>,
}

impl ModulationSeries {
    pub fn successful(&self) -> impl Iterator<Item = (f64, &ModulationState)> {
        self.frames.iter().filter_map(|f| f.state.as_ref().map(|s| (f.time, s)))
    }

    /// `sup_t (|c'| + |a' - c|)`.
    pub fn modulation_rate(&self) -> f64 {
        self.successful()
            .zip(self.speed_rate.iter().zip(&self.position_rate))
            .map(|((_, s), (dc, da))| dc.abs() + (da - s.speed).abs())
            .fold(0.0, f64::max)
    }
}

/// Central differences on a non-uniform time grid (one-sided at the ends).
pub fn time_derivative(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            let (lo, hi) = if i == 0 {
                (0, 1)
            } else if i == n - 1 {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            (y[hi] - y[lo]) / (t[hi] - t[lo])
        })
        .collect()
}

/// Decomposes every snapshot, warm-starting each frame from the previous
/// successful one. Failed frames are marked and skipped.
pub fn track(
    snapshots: &[(f64, HydroPair)],
    guess: (f64, f64),
    g: &Grid,
    options: ModulationOptions,
) -> ModulationSeries {
    let mut modulator = Modulator::new(g, options);
    let mut current = guess;
    let mut frames = Vec::with_capacity(snapshots.len());
    let mut last_time: Option<f64> = None;
    for (time, pair) in snapshots {
        // extrapolate the position with the current speed
        let predicted = match last_time {
            Some(t0) => (current.0, current.1 + current.0 * (time - t0)),
            None => current,
        };
        match modulator.decompose(pair, predicted) {
            Ok(state) => {
                current = (state.speed, state.position);
                last_time = Some(*time);
                frames.push(TrackFrame {
                    time: *time,
                    state: Some(state),
                    failure: None,
                });
            }
            Err(e) => frames.push(TrackFrame {
                time: *time,
                state: None,
                failure: Some(e.to_string()),
            }),
        }
    }
    let (times, speeds, positions): (Vec<f64>, Vec<f64>, Vec<f64>) = frames
        .iter()
        .filter_map(|f| f.state.as_ref().map(|s| (f.time, s.speed, s.position)))
        .fold((vec![], vec![], vec![]), |(mut t, mut c, mut a), (ti, ci, ai)| {
            t.push(ti);
            c.push(ci);
            a.push(ai);
            (t, c, a)
        });
    ModulationSeries {
        speed_rate: time_derivative(&times, &speeds),
        position_rate: time_derivative(&times, &positions),
        frames,
    }
}

/// `u* = S H_c(ε)`.
pub fn u_star(eps: &HydroPair, c: f64, g: &Grid) -> Result<HydroPair> {
    g.check_pair(eps)?;
    Ok(HcCoefficients::new(c, g)?.apply(eps, g).swap())
}

/// `∫ x u₁ u₂`.
pub fn virial_i(u: &HydroPair, g: &Grid) -> Result<f64> {
    g.check_pair(u)?;
    Ok(g.integrate(
        &g.nodes()
            .iter()
            .zip(u.v.iter().zip(&u.w))
            .map(|(x, (a, b))| x * a * b)
            .collect::<Vec<_>>(),
    ))
}

/// `⟨M_c u, u⟩`.
pub fn virial_j(u: &HydroPair, c: f64, g: &Grid) -> Result<f64> {
    g.check_pair(u)?;
    Ok(matrix_mc(c, g, McReading::Squared)?.form(u, g))
}

/// Weights of the combined functional `⟨N u, u⟩ = I(u) + A B e^{2R} J(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirialWeights {
    pub a: f64,
    pub b: f64,
    pub r: f64,
}

impl Default for VirialWeights {
    fn default() -> Self {
        Self { a: 1.0, b: 1.0, r: 1.0 }
    }
}

pub fn virial_n(u: &HydroPair, c: f64, weights: VirialWeights, g: &Grid) -> Result<f64> {
    Ok(virial_i(u, g)? + weights.a * weights.b * (2.0 * weights.r).exp() * virial_j(u, c, g)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VirialSeries {
    pub times: Vec<f64>,
    pub i: Vec<f64>,
    pub j: Vec<f64>,
    pub n: Vec<f64>,
    pub n_rate: Vec<f64>,
    /// `‖u*‖²_X` per frame.
    pub u_norm2: Vec<f64>,
    /// Largest `A` with `d/dt ⟨N u*, u*⟩ ≥ A ‖u*‖²_X` on every frame.
    pub fitted_a: f64,
}

/// Virial functionals of `u*` along a tracked trajectory.
pub fn virial_series(series: &ModulationSeries, weights: VirialWeights, g: &Grid) -> Result<VirialSeries> {
    let mut out = VirialSeries {
        times: vec![],
        i: vec![],
        j: vec![],
        n: vec![],
        n_rate: vec![],
        u_norm2: vec![],
        fitted_a: f64::NAN,
    };
    for (t, s) in series.successful() {
        let u = u_star(&s.residual, s.speed, g)?;
        let i = virial_i(&u, g)?;
        let j = virial_j(&u, s.speed, g)?;
        out.times.push(t);
        out.i.push(i);
        out.j.push(j);
        out.n.push(i + weights.a * weights.b * (2.0 * weights.r).exp() * j);
        out.u_norm2.push(g.norm_x(&u, None)?.powi(2));
    }
    out.n_rate = time_derivative(&out.times, &out.n);
    out.fitted_a = out
        .n_rate
        .iter()
        .zip(&out.u_norm2)
        .filter(|(_, n2)| **n2 > 0.0)
        .map(|(r, n2)| r / n2)
        .fold(f64::INFINITY, f64::min);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::negative_eigenpair;

    #[test]
    fn exact_soliton_is_recovered() {
        let c = 0.8;
        // wide enough that the periodic wrap of the tail is below 1e-12
        let g = Grid::new(55.0, 1024).unwrap();
        let p = soliton_hydro(c, 1.5, &g).unwrap();
        let s = decompose(&p, (0.75, 1.3), &g).unwrap();
        assert!((s.speed - c).abs() < 1e-10, "{}", s.speed);
        assert!((s.position - 1.5).abs() < 1e-10, "{}", s.position);
        let r = g.norm_x(&s.residual, None).unwrap();
        assert!(r < 1e-10, "{r:e}");
    }

    #[test]
    fn translation_equivariance() {
        let c = -0.6;
        let g = Grid::for_speed(c).unwrap();
        let p = soliton_hydro(c, 0.0, &g).unwrap();
        let mut bumped = p.clone();
        for (j, x) in g.nodes().iter().enumerate() {
            bumped.v[j] += 0.01 * (-(x - 0.5) * (x - 0.5)).exp();
        }
        let s0 = decompose(&bumped, (c, 0.0), &g).unwrap();
        let delta = 2.25;
        let moved = g.shift_pair(&bumped, -delta);
        let s1 = decompose(&moved, (c, delta), &g).unwrap();
        assert!((s1.position - s0.position - delta).abs() < 1e-9);
        assert!((s1.speed - s0.speed).abs() < 1e-10);
        assert!(s1.orthogonality.iter().all(|r| r.abs() <= 1e-10 * g.pair_dot(&s1.residual, &s1.residual).sqrt() + 1e-15));
    }

    #[test]
    fn far_guess_is_rejected() {
        let g = Grid::for_speed(0.6).unwrap();
        let p = soliton_hydro(0.6, 0.0, &g).unwrap();
        assert!(matches!(decompose(&p, (0.6, 8.0), &g), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn u_star_of_translation_mode_vanishes() {
        let c = 0.6;
        let g = Grid::new(40.0, 1024).unwrap();
        let dq = soliton_dx(c, 0.0, &g).unwrap();
        let m = u_star(&dq, c, &g).unwrap().max_norm();
        assert!(m < 1e-8, "{m:e}");
    }

    #[test]
    fn u_star_orthogonal_to_swapped_chi() {
        let c = 0.6;
        let g = Grid::for_speed(c).unwrap();
        let chi = negative_eigenpair(c, &g).unwrap();
        let mut eps = HydroPair {
            v: g.map(|x| (-(x - 0.3) * (x - 0.3)).exp()),
            w: g.map(|x| x * (-x * x / 2.0).exp()),
        };
        let along = g.pair_dot(&eps, &chi.chi);
        eps = eps.axpy(-along, &chi.chi);
        let u = u_star(&eps, c, &g).unwrap();
        let scale = g.pair_dot(&u, &u).sqrt();
        assert!(g.pair_dot(&u, &chi.chi.swap()).abs() <= 1e-8 * scale);
    }

    #[test]
    fn virial_functionals_basic() {
        let g = Grid::new(20.0, 128).unwrap();
        let zero = HydroPair::zeros(128);
        assert_eq!(virial_i(&zero, &g).unwrap(), 0.0);
        assert_eq!(virial_j(&zero, 0.5, &g).unwrap(), 0.0);
        assert_eq!(virial_n(&zero, 0.5, VirialWeights::default(), &g).unwrap(), 0.0);
        let u = HydroPair {
            v: g.map(|x| (-x * x).exp()),
            w: vec![0.0; 128],
        };
        assert_eq!(virial_i(&u, &g).unwrap(), 0.0);
        // quadratic: scaling by 2 multiplies by 4
        let u = HydroPair {
            v: g.map(|x| (-(x - 1.0) * (x - 1.0)).exp()),
            w: g.map(|x| (-x * x).exp()),
        };
        let n1 = virial_n(&u, 0.5, VirialWeights::default(), &g).unwrap();
        let n2 = virial_n(&u.scale(2.0), 0.5, VirialWeights::default(), &g).unwrap();
        assert!((n2 - 4.0 * n1).abs() < 1e-12 * n1.abs().max(1.0));
    }

    #[test]
    fn time_derivative_of_line() {
        let t = [0.0, 0.5, 1.5, 2.0];
        let y: Vec<f64> = t.iter().map(|x| 3.0 * x - 1.0).collect();
        for d in time_derivative(&t, &y) {
            assert!((d - 3.0).abs() < 1e-12);
        }
    }
}
