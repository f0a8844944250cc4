//! Constrained coercivity constants of `H_c` and of the weighted form `G_c`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::grid::{Grid, HydroPair};
use crate::soliton::{soliton_dx, Profile};

use super::eigen::{lobpcg, negative_eigenpair, EigenResult, LobpcgOptions};
use super::hc::HcCoefficients;

#[derive(Debug, Clone, PartialEq)]
pub struct Coercivity {
    pub speed: f64,
    /// Smallest constrained Rayleigh quotient from the projected pencil.
    pub value: f64,
    /// Best value over the random restarts of the iterative minimization,
    /// when run.
    pub cross_check: Option<f64>,
    /// Largest `|⟨u, constraint⟩|` of the normalized minimizer.
    pub constraint_residual: f64,
}

fn orthonormalize(vectors: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for mut v in vectors {
        for _ in 0..2 {
            for b in &basis {
                let d = v.dot(b);
                v -= b * d;
            }
        }
        let nv = v.norm();
        if nv > 1e-12 {
            basis.push(v / nv);
        }
    }
    basis
}

/// Smallest eigenpair of `m` restricted to the orthogonal complement of
/// `constraints`.
fn projected_minimum(m: &DMatrix<f64>, constraints: &[DVector<f64>]) -> (f64, DVector<f64>) {
    let dim = m.nrows();
    let mut p = DMatrix::zeros(dim, dim);
    for q in constraints {
        p += q * q.transpose();
    }
    let complement = DMatrix::identity(dim, dim) - &p;
    // the constrained directions are pushed far above the spectrum
    let lift = 10.0 * m.amax() * dim as f64;
    let reduced = &complement * m * &complement + p * lift;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let eig = SymmetricEigen::new(reduced);
    let i = eig.eigenvalues.imin();
    (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned())
}

fn project_out(x: &[f64], constraints: &[DVector<f64>]) -> Vec<f64> {
    let mut y = DVector::from_column_slice(x);
    for q in constraints {
        let d = y.dot(q);
        y -= q * d;
    }
    y.as_slice().to_vec()
}

/// `Λ_c = min ⟨H_c ε, ε⟩ / ‖ε‖²_{H¹×L²}` over `ε ⟂ ∂x Q_c, χ_c`.
///
/// The pencil is reduced with `N^{-1/2} = diag((1 + ξ²)^{-1/2}, 1)`. With
/// `restarts > 0` the minimum is recomputed by matrix-free LOBPCG from
/// seeded random starts.
pub fn coercivity_hc(c: f64, g: &Grid, restarts: usize, seed: u64) -> Result<Coercivity> {
    let eig = negative_eigenpair(c, g)?;
    coercivity_hc_with(c, g, &eig, restarts, seed)
}

pub fn coercivity_hc_with(
    c: f64,
    g: &Grid,
    eig: &EigenResult,
    restarts: usize,
    seed: u64,
) -> Result<Coercivity> {
    let n = g.len();
    let coeffs = HcCoefficients::new(c, g)?;
    let h = coeffs.assemble(g);
    let half_inverse = |f: &[f64]| -> Vec<f64> {
        g.apply_symbol(f, |_, xi| Complex64::new((1.0 + xi * xi).powf(-0.5), 0.0))
    };
    let mut r = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        for (i, val) in half_inverse(&e).into_iter().enumerate() {
            r[(i, j)] = val;
        }
    }
    let r = (&r + r.transpose()) * 0.5;
    let mut scaling = DMatrix::identity(2 * n, 2 * n);
    scaling.view_mut((0, 0), (n, n)).copy_from(&r);
    let m = &scaling * h * &scaling;
    let m = (&m + m.transpose()) * 0.5;
    let dq = soliton_dx(c, 0.0, g)?;
    let raw = [dq.to_block(), eig.chi.to_block()];
    let constraints = orthonormalize(
        raw.iter()
            .map(|q| &scaling * DVector::from_column_slice(q))
            .collect(),
    );
    let (value, z) = projected_minimum(&m, &constraints);
    let eps = &scaling * z;
    let eps_pair = HydroPair::from_block(eps.as_slice());
    let norm = g.norm_x(&eps_pair, None)?;
    let constraint_residual = raw
        .iter()
        .map(|q| g.pair_dot(&eps_pair, &HydroPair::from_block(q)).abs() / norm)
        .fold(0.0, f64::max);

    let cross_check = if restarts == 0 {
        None
    } else {
        let scale_block = |x: &[f64]| -> Vec<f64> {
            let mut out = half_inverse(&x[..n]);
            out.extend_from_slice(&x[n..]);
            out
        };
        let apply = |x: &[f64]| -> Vec<f64> {
            let y = project_out(x, &constraints);
            let hy = coeffs.apply(&HydroPair::from_block(&scale_block(&y)), g).to_block();
            project_out(&scale_block(&hy), &constraints)
        };
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut best = f64::INFINITY;
        for _ in 0..restarts {
            let start: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let out = lobpcg(
                apply,
                |x: &[f64]| x.to_vec(),
                |x: &[f64]| project_out(x, &constraints),
                &start,
                LobpcgOptions {
                    tolerance: 1e-7,
                    max_iterations: 20_000,
                },
            )?;
            best = best.min(out.value);
        }
        Some(best)
    };
    if !(value > 0.0) {
        return Err(Error::Spectral(format!(
            "H_c coercivity constant is not positive at c = {c}: {value:e}"
        )));
    }
    Ok(Coercivity {
        speed: c,
        value,
        cross_check,
        constraint_residual,
    })
}

/// Dense matrices of the weighted problem on the sub-window `|x| ≤ half_width`
/// in the variable `z = u / cosh x`.
struct WeightedPencil {
    form: DMatrix<f64>,
    norm: DMatrix<f64>,
    cosh: Vec<f64>,
    first: usize,
    m: usize,
}

fn weighted_pencil(c: f64, g: &Grid, half_width: f64) -> Result<WeightedPencil> {
    let h = g.spacing();
    let half_nodes = ((half_width / h).round() as usize).min(g.len() / 2);
    if half_nodes < 4 {
        return Err(Error::InvalidArgument(format!(
            "weighted window {half_width} holds too few nodes"
        )));
    }
    let m = 2 * half_nodes;
    let first = g.len() / 2 - half_nodes;
    let sub = Grid::new(half_nodes as f64 * h, m)?;
    let d = sub.first_derivative_matrix();
    let p = Profile::new(c)?;
    let xs = sub.nodes().to_vec();
    let cosh: Vec<f64> = xs.iter().map(|x| x.cosh()).collect();
    let sinh: Vec<f64> = xs.iter().map(|x| x.sinh()).collect();
    // derivative of u1 = cosh z1 as a row operator on z1
    let mut du1 = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            du1[(i, j)] = cosh[i] * d[(i, j)];
        }
        du1[(i, i)] += sinh[i];
    }
    let mut first_sq = DMatrix::zeros(m, 2 * m);
    let mut second_sq = DMatrix::zeros(m, 2 * m);
    let mut w_first = Vec::with_capacity(m);
    let mut w_second = Vec::with_capacity(m);
    for i in 0..m {
        let x = xs[i];
        let v2 = p.v(x).powi(2);
        let ratio = p.mu_over_v2(x);
        let slope = p.log_slope(x);
        let beta = 2.0 * c * slope / (ratio * (1.0 - v2));
        for j in 0..m {
            first_sq[(i, j)] = -beta * du1[(i, j)];
            second_sq[(i, j)] = du1[(i, j)];
        }
        first_sq[(i, i)] -= c / ratio * cosh[i];
        first_sq[(i, m + i)] += cosh[i];
        second_sq[(i, i)] -= slope * cosh[i];
        w_first.push(2.0 * v2 * ratio * h);
        w_second.push(6.0 * v2 / ratio * h);
    }
    let weighted_gram = |a: &DMatrix<f64>, w: &[f64]| -> DMatrix<f64> {
        let mut wa = a.clone();
        for (i, wi) in w.iter().enumerate() {
            wa.row_mut(i).scale_mut(*wi);
        }
        a.transpose() * wa
    };
    let form = weighted_gram(&first_sq, &w_first) + weighted_gram(&second_sq, &w_second);
    let weight: Vec<f64> = xs.iter().map(|x| (-2.0 * x.abs()).exp() * h).collect();
    let mut grad = DMatrix::zeros(m, 2 * m);
    grad.view_mut((0, 0), (m, m)).copy_from(&du1);
    let mut norm = weighted_gram(&grad, &weight);
    for i in 0..m {
        let mass = cosh[i] * cosh[i] * weight[i];
        norm[(i, i)] += mass;
        norm[(m + i, m + i)] += mass;
    }
    Ok(WeightedPencil {
        form: (&form + form.transpose()) * 0.5,
        norm: (&norm + norm.transpose()) * 0.5,
        cosh,
        first,
        m,
    })
}

/// Default half-width of the window for the weighted problem: wide enough
/// that `Q_c / cosh x` reaches round-off at its edge.
pub fn weighted_window(c: f64) -> f64 {
    let k = (1.0 - c * c).sqrt();
    28.0 / (1.0 + k)
}

/// `Λ_c^G = min G_c(u) / ∫(u1'² + u1² + u2²) e^{-2|x|}` over `u ⟂ S χ_c`
/// (or over all `u` when `constrained` is false), for `u` supported in the
/// window of [`weighted_window`].
pub fn coercivity_gc(c: f64, g: &Grid, chi: &EigenResult, constrained: bool) -> Result<Coercivity> {
    let pencil = weighted_pencil(c, g, weighted_window(c).min(g.half_length()))?;
    let m = pencil.m;
    let chol = pencil
        .norm
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Spectral("weighted norm matrix is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Spectral("singular weighted norm factor".into()))?;
    let reduced = &l_inv * &pencil.form * l_inv.transpose();
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    // ⟨u, Sχ⟩ = h Σ cosh (z1 ξ + z2 ζ)
    let mut q = DVector::zeros(2 * m);
    for i in 0..m {
        let j = pencil.first + i;
        q[i] = pencil.cosh[i] * chi.chi.w[j];
        q[m + i] = pencil.cosh[i] * chi.chi.v[j];
    }
    let constraints = if constrained {
        orthonormalize(vec![&l_inv * &q])
    } else {
        Vec::new()
    };
    let (value, y) = projected_minimum(&reduced, &constraints);
    let z = l_inv.transpose() * y;
    let constraint_residual = if constrained {
        (q.dot(&z) / (z.dot(&(&pencil.norm * &z))).sqrt()).abs()
    } else {
        0.0
    };
    if constrained && !(value > 0.0) {
        return Err(Error::Spectral(format!(
            "G_c coercivity constant is not positive at c = {c}: {value:e}"
        )));
    }
    Ok(Coercivity {
        speed: c,
        value,
        cross_check: None,
        constraint_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hc_constant_is_positive_and_cross_checked() {
        let c = 0.6;
        let g = Grid::for_speed(c).unwrap();
        let res = coercivity_hc(c, &g, 2, 7).unwrap();
        assert!(res.value > 0.0);
        assert!(res.constraint_residual < 1e-8, "{res:?}");
        let cross = res.cross_check.unwrap();
        assert!((cross - res.value).abs() <= 1e-5 * res.value.max(1e-3), "{res:?}");
    }

    #[test]
    fn gc_constant_positive_and_vanishes_without_constraint() {
        let c = 0.6;
        let g = Grid::for_speed(c).unwrap();
        let chi = negative_eigenpair(c, &g).unwrap();
        let on = coercivity_gc(c, &g, &chi, true).unwrap();
        assert!(on.value > 0.0, "{on:?}");
        let off = coercivity_gc(c, &g, &chi, false).unwrap();
        assert!(off.value.abs() < 1e-6, "{off:?}");
    }
}
