//! The negative eigenpair of `H_c` and a matrix-free LOBPCG solver.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid, HydroPair};
use crate::soliton::Profile;

use super::hc::HcCoefficients;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub speed: f64,
    /// Magnitude of the negative eigenvalue.
    pub lambda: f64,
    /// Unit `L² × L²` eigenvector with `ζ(0) > 0`.
    pub chi: HydroPair,
    /// Eigenvalue closest to zero among the rest (the translation mode).
    pub kernel_estimate: f64,
    /// Distance from the negative eigenvalue to the next one.
    pub gap: f64,
    /// Smallest eigenvalue above the kernel.
    pub next_positive: f64,
    /// Largest eigenvalue magnitude; tolerances are relative to it.
    pub scale: f64,
}

/// Rescales to unit discrete `L²` norm and fixes the sign by `ζ(0) > 0`.
pub fn normalize_chi(chi: &mut HydroPair, g: &Grid) {
    let norm = g.pair_dot(chi, chi).sqrt();
    let sign = if chi.v[g.nearest_node(0.0)] < 0.0 { -1.0 } else { 1.0 };
    *chi = chi.scale(sign / norm);
}

/// Dense eigen-decomposition of the assembled `H_c`.
pub fn negative_eigenpair(c: f64, g: &Grid) -> Result<EigenResult> {
    let coeffs = HcCoefficients::new(c, g)?;
    let eig = SymmetricEigen::new(coeffs.assemble(g));
    let n = g.len();
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let scale = values.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let negatives = values.iter().filter(|&&x| x < -1e-8 * scale).count();
    if negatives != 1 {
        return Err(Error::Spectral(format!(
            "expected one negative eigenvalue of H_c at c = {c}, found {negatives}"
        )));
    }
    let col = eig.eigenvectors.column(order[0]);
    let mut chi = HydroPair {
        v: col.rows(0, n).iter().copied().collect(),
        w: col.rows(n, n).iter().copied().collect(),
    };
    normalize_chi(&mut chi, g);
    let kernel_estimate = values[1];
    Ok(EigenResult {
        speed: c,
        lambda: -values[0],
        chi,
        kernel_estimate,
        gap: values[1] - values[0],
        next_positive: values[2],
        scale,
    })
}

/// Residual of the algebraic second row `c(1+v²)/(1-v²) ζ = (1 - v² + λ) ξ`.
pub fn second_row_residual(r: &EigenResult, g: &Grid) -> Result<f64> {
    let p = Profile::new(r.speed)?;
    Ok(g
        .nodes()
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let v2 = p.v(x).powi(2);
            let lhs = r.speed * (1.0 + v2) / (1.0 - v2) * r.chi.v[j];
            let rhs = (1.0 - v2 + r.lambda) * r.chi.w[j];
            (lhs - rhs).abs()
        })
        .fold(0.0, f64::max))
}

/// Largest deviation of `χ` from `(ζ, ξ)(-x) = (ζ, ξ)(x)`.
pub fn reflection_residual(chi: &HydroPair, g: &Grid) -> f64 {
    let n = g.len();
    // node j maps to n - j; node 0 (x = -L) maps to itself by periodicity
    (1..n)
        .map(|j| (chi.v[j] - chi.v[n - j]).abs().max((chi.w[j] - chi.w[n - j]).abs()))
        .fold(0.0, f64::max)
}

/// Options for [`lobpcg`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LobpcgOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LobpcgOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LobpcgOutcome {
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Smallest eigenpair of a symmetric operator by single-vector LOBPCG.
///
/// `project` maps onto the admissible subspace (identity when unconstrained)
/// and is applied to the start vector and every new search direction.
pub fn lobpcg(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precondition: impl Fn(&[f64]) -> Vec<f64>,
    project: impl Fn(&[f64]) -> Vec<f64>,
    start: &[f64],
    options: LobpcgOptions,
) -> Result<LobpcgOutcome> {
    let mut x = project(start);
    let nx = norm(&x);
    if !(nx > 0.0 && nx.is_finite()) {
        return Err(Error::InvalidArgument("LOBPCG start vector vanishes".into()));
    }
    x.iter_mut().for_each(|e| *e /= nx);
    let mut ax = apply(&x);
    let mut rho = dot(&x, &ax);
    let mut p: Option<Vec<f64>> = None;
    let mut residual = f64::INFINITY;
    for it in 0..options.max_iterations {
        let r: Vec<f64> = ax.iter().zip(&x).map(|(a, b)| a - rho * b).collect();
        residual = norm(&r);
        if residual <= options.tolerance * rho.abs().max(1.0) {
            return Ok(LobpcgOutcome {
                value: rho,
                vector: x,
                iterations: it,
                residual,
            });
        }
        let w = project(&precondition(&r));
        // orthonormal basis of span{x, w, p}
        let mut basis: Vec<Vec<f64>> = vec![x.clone()];
        for cand in std::iter::once(w).chain(p.clone()) {
            let mut v = cand;
            for _ in 0..2 {
                for b in &basis {
                    let d = dot(&v, b);
                    v.iter_mut().zip(b).for_each(|(e, bb)| *e -= d * bb);
                }
            }
            let nv = norm(&v);
            if nv > 1e-12 {
                v.iter_mut().for_each(|e| *e /= nv);
                basis.push(v);
            }
        }
        let images: Vec<Vec<f64>> = basis.iter().map(|b| apply(b)).collect();
        let m = basis.len();
        let gram = DMatrix::from_fn(m, m, |i, j| 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i])));
        let eig = SymmetricEigen::new(gram);
        let imin = eig.eigenvalues.imin();
        let y = eig.eigenvectors.column(imin);
        let len = x.len();
        let mut new_x = vec![0.0; len];
        let mut new_ax = vec![0.0; len];
        let mut new_p = vec![0.0; len];
        for k in 0..m {
            for i in 0..len {
                new_x[i] += y[k] * basis[k][i];
                new_ax[i] += y[k] * images[k][i];
                if k > 0 {
                    new_p[i] += y[k] * basis[k][i];
                }
            }
        }
        let nn = norm(&new_x);
        new_x.iter_mut().for_each(|e| *e /= nn);
        new_ax.iter_mut().for_each(|e| *e /= nn);
        x = new_x;
        ax = new_ax;
        rho = dot(&x, &ax);
        p = if norm(&new_p) > 0.0 { Some(new_p) } else { None };
        // refresh A x occasionally to stop drift from the recurrence
        if it % 20 == 19 {
            ax = apply(&x);
            rho = dot(&x, &ax);
        }
    }
    Err(Error::Spectral(format!(
        "LOBPCG did not converge in {} iterations (residual {residual:e})",
        options.max_iterations
    )))
}

/// Matrix-free negative eigenpair of `H_c`, warm-started from `start` (or
/// from a profile-shaped guess).
pub fn chi_matrix_free(c: f64, g: &Grid, start: Option<&HydroPair>) -> Result<EigenResult> {
    let coeffs = HcCoefficients::new(c, g)?;
    let n = g.len();
    let guess = match start {
        Some(s) => {
            g.check_pair(s)?;
            s.to_block()
        }
        None => {
            let p = Profile::new(c)?;
            let mut b = g.map(|x| p.v(x));
            b.extend(g.map(|x| {
                let v2 = p.v(x).powi(2);
                c * (1.0 + v2) / (1.0 - v2) * p.v(x) / (1.0 - v2 + 0.5)
            }));
            b
        }
    };
    let apply = |b: &[f64]| coeffs.apply(&HydroPair::from_block(b), g).to_block();
    let precondition = |b: &[f64]| {
        let buf: Vec<Complex64> = b[..n].iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let mut out: Vec<f64> = g
            .apply_symbol_complex(&buf, |_, xi| Complex64::new(1.0 / (1.0 + xi * xi), 0.0))
            .into_iter()
            .map(|z| z.re)
            .collect();
        out.extend(b[n..].iter().zip(&coeffs.lower).map(|(x, l)| x / l));
        out
    };
    let outcome = lobpcg(apply, precondition, |b| b.to_vec(), &guess, LobpcgOptions::default())?;
    if outcome.value >= 0.0 {
        return Err(Error::Spectral(format!(
            "matrix-free iteration found no negative eigenvalue at c = {c}"
        )));
    }
    let mut chi = HydroPair::from_block(&outcome.vector);
    normalize_chi(&mut chi, g);
    Ok(EigenResult {
        speed: c,
        lambda: -outcome.value,
        chi,
        kernel_estimate: f64::NAN,
        gap: f64::NAN,
        next_positive: f64::NAN,
        scale: f64::NAN,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    /// Fitted exponential rate of `|χ|` on the tail window.
    pub rate: f64,
    /// `sqrt(1 - c²)`.
    pub lower_bound: f64,
    /// `b_c = sqrt((1 - c² + 2λ + λ²)/(1 + λ))`.
    pub b_c: f64,
    /// `min(2 sqrt(1 - c²), b_c)`.
    pub predicted: f64,
    /// Tail window actually used, `[lo, hi]` in `|x|`.
    pub window: (f64, f64),
}

impl DecayFit {
    pub fn margin(&self) -> f64 {
        self.rate - self.lower_bound
    }

    pub fn relative_error(&self) -> f64 {
        (self.rate - self.predicted).abs() / self.predicted
    }
}

/// Log-linear fit of `|χ|` against `|x|` on `|x| ∈ [L/4, L/2]`, shrunk when
/// the tail reaches the floating-point floor.
pub fn chi_decay(r: &EigenResult, g: &Grid) -> Result<DecayFit> {
    let k = (1.0 - r.speed * r.speed).sqrt();
    let lam = r.lambda;
    let b_c = ((k * k + 2.0 * lam + lam * lam) / (1.0 + lam)).sqrt();
    let modulus: Vec<f64> = (0..g.len()).map(|j| r.chi.v[j].hypot(r.chi.w[j])).collect();
    let peak = modulus.iter().fold(0.0_f64, |m, x| m.max(*x));
    let lo = g.half_length() / 4.0;
    let mut hi = g.half_length() / 2.0;
    loop {
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for (x, m) in g.nodes().iter().zip(&modulus) {
            if x.abs() >= lo && x.abs() <= hi {
                xs.push(x.abs());
                ys.push(m.ln());
            }
        }
        let floor_hit = xs
            .iter()
            .zip(&ys)
            .any(|(_, y)| *y < (1e-12 * peak).ln());
        if floor_hit && hi - lo > 2.0 {
            hi -= 0.5;
            continue;
        }
        if xs.len() < 4 {
            return Err(Error::Spectral("tail window for the decay fit is empty".into()));
        }
        let rate = -crate::dynamics::fitted_slope(&xs, &ys);
        return Ok(DecayFit {
            rate,
            lower_bound: k,
            b_c,
            predicted: (2.0 * k).min(b_c),
            window: (lo, hi),
        });
    }
}
