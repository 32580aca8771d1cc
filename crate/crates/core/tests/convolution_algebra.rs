use proptest::prelude::*;

use nh_renewal::convolution::{convolve_increments, density_convolve, nfold_convolution, stieltjes_convolve};
use nh_renewal::grid::increments_from_df;
use nh_renewal::{MatrixKind, QuadratureRule, TimeGrid, TwoTimeMatrix};

fn close(a: &TwoTimeMatrix, b: &TwoTimeMatrix, rel: f64) -> bool {
    a.values().all(|(s, t, x)| {
        let y = b.get(s, t);
        (x - y).abs() <= rel * x.abs().max(y.abs()).max(1.0)
    })
}

/// Upper triangle of `n` points filled from `seeds`, cycling.
fn matrix_from(n: usize, kind: MatrixKind, seeds: &[f64]) -> TwoTimeMatrix {
    let grid = TimeGrid::new(0.0, 0.5, n).unwrap();
    let mut i = 0;
    TwoTimeMatrix::from_fn(grid, kind, |_, _| {
        i += 1;
        seeds[i % seeds.len()]
    })
}

/// Distribution with rows cumulating positive weights scaled to `mass`.
fn df_from(n: usize, seeds: &[f64], mass: f64) -> TwoTimeMatrix {
    let grid = TimeGrid::new(0.0, 0.5, n).unwrap();
    let rows = (0..n)
        .map(|s| {
            let w: Vec<f64> = (1..n - s).map(|j| seeds[(s * 7 + j) % seeds.len()]).collect();
            let total: f64 = w.iter().sum();
            let mut acc = 0.0;
            std::iter::once(0.0)
                .chain(w.iter().map(|x| {
                    acc += x * mass / total;
                    acc.min(mass)
                }))
                .collect()
        })
        .collect();
    TwoTimeMatrix::from_rows(grid, MatrixKind::Distribution, rows).unwrap()
}

fn seeds() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, 8..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stieltjes_associativity(n in 2usize..14, a in seeds(), b in seeds(), c in seeds()) {
        let g = matrix_from(n, MatrixKind::Generic, &a);
        let v1 = increments_from_df(&df_from(n, &b, 0.9)).unwrap();
        let v2 = increments_from_df(&df_from(n, &c, 0.7)).unwrap();
        let left = convolve_increments(&convolve_increments(&g, &v1).unwrap(), &v2).unwrap();
        let right = convolve_increments(&g, &convolve_increments(&v1, &v2).unwrap()).unwrap();
        prop_assert!(close(&left, &right, 1e-12));
    }

    #[test]
    fn stieltjes_distributes_over_sums(n in 2usize..14, a in seeds(), b in seeds(), c in seeds()) {
        let g1 = matrix_from(n, MatrixKind::Generic, &a);
        let g2 = matrix_from(n, MatrixKind::Generic, &b);
        let df = df_from(n, &c, 1.0);
        let left = stieltjes_convolve(&g1.add(&g2).unwrap(), &df).unwrap();
        let right = stieltjes_convolve(&g1, &df).unwrap().add(&stieltjes_convolve(&g2, &df).unwrap()).unwrap();
        prop_assert!(close(&left, &right, 1e-12));
    }

    #[test]
    fn increments_are_linear(n in 2usize..14, a in seeds(), b in seeds(), c in seeds(), k in -3.0f64..3.0) {
        let g = matrix_from(n, MatrixKind::Generic, &a);
        let v1 = increments_from_df(&df_from(n, &b, 0.5)).unwrap();
        let v2 = increments_from_df(&df_from(n, &c, 0.5)).unwrap();
        let left = convolve_increments(&g, &v1.scale(k).add(&v2).unwrap()).unwrap();
        let right = convolve_increments(&g, &v1).unwrap().scale(k).add(&convolve_increments(&g, &v2).unwrap()).unwrap();
        prop_assert!(close(&left, &right, 1e-12));
    }

    #[test]
    fn density_form_is_bilinear(n in 2usize..14, a in seeds(), b in seeds(), c in seeds(), k in -3.0f64..3.0, r in 0usize..4) {
        let rule = QuadratureRule::ALL[r];
        let f = matrix_from(n, MatrixKind::Density, &a);
        let g1 = matrix_from(n, MatrixKind::Density, &b);
        let g2 = matrix_from(n, MatrixKind::Density, &c);
        let combo = g1.scale(k).add(&g2).unwrap();
        let left = density_convolve(&f, &combo, rule).unwrap();
        let right = density_convolve(&f, &g1, rule).unwrap().scale(k).add(&density_convolve(&f, &g2, rule).unwrap()).unwrap();
        prop_assert!(close(&left, &right, 1e-12));
        let left = density_convolve(&combo, &f, rule).unwrap();
        let right = density_convolve(&g1, &f, rule).unwrap().scale(k).add(&density_convolve(&g2, &f, rule).unwrap()).unwrap();
        prop_assert!(close(&left, &right, 1e-12));
    }

    #[test]
    fn homogeneous_inputs_reduce_to_one_variable(n in 2usize..20, a in seeds(), b in seeds(), r in 0usize..4) {
        let rule = QuadratureRule::ALL[r];
        let grid = TimeGrid::new(0.0, 0.25, n).unwrap();
        let phi = |lag: usize| a[lag % a.len()];
        let gamma = |lag: usize| b[lag % b.len()];
        let f = TwoTimeMatrix::from_fn(grid, MatrixKind::Density, |s, t| phi(t - s));
        let g = TwoTimeMatrix::from_fn(grid, MatrixKind::Density, |s, t| gamma(t - s));
        let out = density_convolve(&f, &g, rule).unwrap();
        for (s, t, val) in out.values() {
            let m = t - s;
            let one_var: f64 = rule
                .weights(m, grid.step())
                .iter()
                .enumerate()
                .map(|(j, w)| w * gamma(j) * phi(m - j))
                .sum();
            prop_assert!((val - one_var).abs() <= 1e-12 * one_var.abs().max(1.0));
        }
    }

    #[test]
    fn nfold_chain_is_monotone(n in 2usize..12, a in seeds()) {
        let df = df_from(n, &a, 1.0);
        let mut prev = df.clone();
        for k in 2..=n {
            let next = nfold_convolution(&df, k).unwrap();
            for (s, t, x) in next.values() {
                prop_assert!(x <= prev.get(s, t) + 1e-15);
            }
            prev = next;
        }
    }
}

#[test]
fn density_convolution_is_not_commutative() {
    let grid = TimeGrid::covering(0.0, 1.0, 0.001).unwrap();
    let f = TwoTimeMatrix::from_fn(grid, MatrixKind::Density, |s, t| {
        (3.0 * grid.time_of(s) + 4.0 * grid.time_of(t)).exp()
    });
    let g = TwoTimeMatrix::from_fn(grid, MatrixKind::Density, |s, t| {
        (-4.0 * grid.time_of(s) + 2.0 * grid.time_of(t)).exp()
    });
    let last = grid.last_index();
    let fg = density_convolve(&f, &g, QuadratureRule::Trapezoid).unwrap().get(0, last);
    let gf = density_convolve(&g, &f, QuadratureRule::Trapezoid).unwrap().get(0, last);
    assert!((fg - gf).abs() > 0.1);
}
