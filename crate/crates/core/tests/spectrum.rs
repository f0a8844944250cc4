use proptest::prelude::*;
use soliton_core::soliton::soliton_dx;
use soliton_core::spectral::{apply_hc, form_gc, negative_eigenpair};
use soliton_core::{Grid, HydroPair};

fn pair(g: &Grid, coeffs: &[(f64, f64, f64); 4]) -> HydroPair {
    let f = |(a, c, w): (f64, f64, f64), x: f64| a * (-((x - c) / w).powi(2)).exp();
    HydroPair {
        v: g.map(|x| f(coeffs[0], x) + f(coeffs[1], x)),
        w: g.map(|x| f(coeffs[2], x) + f(coeffs[3], x)),
    }
}

fn bump() -> impl Strategy<Value = (f64, f64, f64)> {
    (-1.0f64..1.0, -3.0f64..3.0, 0.7f64..2.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn hc_is_symmetric_and_gc_nonnegative(
        c in 0.4f64..0.85,
        a in [bump(), bump(), bump(), bump()],
        b in [bump(), bump(), bump(), bump()],
    ) {
        let g = Grid::new(30.0, 512).unwrap();
        let (u, v) = (pair(&g, &a), pair(&g, &b));
        let uhv = g.pair_dot(&u, &apply_hc(c, &v, &g).unwrap());
        let vhu = g.pair_dot(&v, &apply_hc(c, &u, &g).unwrap());
        prop_assert!((uhv - vhu).abs() <= 1e-9 * (uhv.abs() + vhu.abs() + 1.0));
        let gc = form_gc(c, &u, &g).unwrap();
        prop_assert!(gc.path_a >= -1e-12 && gc.path_b >= 0.0);
        prop_assert!(gc.ab_relative() < 1e-7);
    }

    #[test]
    fn negative_direction_is_orthogonal_to_the_kernel(c in 0.4f64..0.85) {
        let g = Grid::for_speed(c).unwrap();
        let e = negative_eigenpair(c, &g).unwrap();
        let dq = soliton_dx(c, 0.0, &g).unwrap();
        let overlap = g.pair_dot(&e.chi, &dq).abs() / g.pair_dot(&dq, &dq).sqrt();
        prop_assert!(overlap < 1e-8, "{}", overlap);
        prop_assert!(e.lambda > 0.0);
        let r = apply_hc(c, &e.chi, &g).unwrap().axpy(e.lambda, &e.chi);
        prop_assert!(g.pair_dot(&r, &r).sqrt() < 1e-6 * e.lambda);
    }
}
