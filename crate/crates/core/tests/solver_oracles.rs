use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nh_renewal::convolution::nfold_convolution;
use nh_renewal::simulator::random_distribution;
use nh_renewal::solver::{
    counting_pmf, homogeneous_lift, solve_discrete, solve_quadrature, solve_series, solve_with_method,
    SolverMethod, DEFAULT_PMF_TOL, DEFAULT_SERIES_TOL,
};
use nh_renewal::{MatrixKind, QuadratureRule, TimeGrid, TwoTimeMatrix};

fn random_df(n: usize, min_mass: f64, seed: u64) -> TwoTimeMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_distribution(TimeGrid::unit(n).unwrap(), min_mass, &mut rng)
}

/// `H = sum_n F^(n)` by explicit repeated convolution, independent of the series solver.
fn brute_force_series(df: &TwoTimeMatrix) -> TwoTimeMatrix {
    let n = df.n_points();
    let mut total = TwoTimeMatrix::zeros(*df.grid(), MatrixKind::Generic);
    for k in 1..=n {
        total = total.add(&nfold_convolution(df, k).unwrap()).unwrap();
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn discrete_matches_series(n in 2usize..16, seed in any::<u64>(), proper in any::<bool>()) {
        let df = random_df(n, if proper { 1.0 } else { 0.3 }, seed);
        let exact = solve_discrete(&df).unwrap();
        let series = solve_series(&df, DEFAULT_SERIES_TOL).unwrap();
        prop_assert!(exact.max_abs_diff(&series.renewal).unwrap() <= 1e-10);
        // F^(n) vanishes beyond n = T on a unit grid, so the finite sum is exact
        prop_assert!(exact.max_abs_diff(&brute_force_series(&df)).unwrap() <= 1e-10);
    }

    #[test]
    fn rect_right_at_unit_step_is_exact(n in 2usize..31, seed in any::<u64>()) {
        let df = random_df(n, 0.2, seed);
        let quad = solve_with_method(&df, SolverMethod::quadrature(QuadratureRule::RectRight, 1.0).unwrap()).unwrap();
        prop_assert!(quad.max_abs_diff(&solve_discrete(&df).unwrap()).unwrap() <= 1e-12);
    }

    #[test]
    fn renewal_function_is_monotone_with_zero_diagonal(n in 2usize..20, seed in any::<u64>()) {
        let h = solve_discrete(&random_df(n, 0.5, seed)).unwrap();
        for s in 0..n {
            prop_assert_eq!(h.get(s, s), 0.0);
            for t in s + 1..n {
                prop_assert!(h.get(s, t) >= h.get(s, t - 1));
            }
        }
    }

    #[test]
    fn homogeneous_lift_depends_on_lag_only(weights in prop::collection::vec(0.0f64..1.0, 1..25), n in 2usize..30) {
        let total: f64 = weights.iter().sum::<f64>().max(1e-9);
        let mut acc = 0.0;
        let f1: Vec<f64> = std::iter::once(0.0)
            .chain(weights.iter().map(|w| { acc += w / total; acc.min(1.0) }))
            .collect();
        let h = solve_discrete(&homogeneous_lift(&f1, TimeGrid::unit(n).unwrap()).unwrap()).unwrap();
        for (s, t, val) in h.values() {
            prop_assert!((val - h.get(0, t - s)).abs() <= 1e-12);
        }
    }

    #[test]
    fn counting_mean_equals_renewal_function(n in 2usize..14, seed in any::<u64>()) {
        let df = random_df(n, 0.6, seed);
        let h = solve_discrete(&df).unwrap();
        for s in 0..n {
            for t in s..n {
                let pmf = counting_pmf(&df, s, t, DEFAULT_PMF_TOL).unwrap();
                prop_assert!((pmf.mean() - h.get(s, t)).abs() <= 1e-8);
                prop_assert!((pmf.total() - 1.0).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn poisson_rules_converge_under_refinement() {
    let estimate = |rule, h: f64| {
        let grid = TimeGrid::covering(0.0, 2.0, h).unwrap();
        let df = TwoTimeMatrix::from_fn(grid, MatrixKind::Distribution, |s, t| {
            1.0 - (-(grid.time_of(t) - grid.time_of(s))).exp()
        });
        let f = TwoTimeMatrix::from_fn(grid, MatrixKind::Density, |s, t| {
            (-(grid.time_of(t) - grid.time_of(s))).exp()
        });
        let h_hat = solve_quadrature(&f, &df, SolverMethod::quadrature(rule, h).unwrap()).unwrap();
        (h_hat.get(0, grid.last_index()) - 2.0).abs()
    };
    for (rule, min_ratio) in [
        (QuadratureRule::Trapezoid, 3.5),
        (QuadratureRule::Simpson, 7.0),
    ] {
        let ratio = estimate(rule, 0.02) / estimate(rule, 0.01);
        assert!(ratio >= min_ratio, "{rule}: ratio {ratio}");
    }
    for rule in [QuadratureRule::RectLeft, QuadratureRule::RectRight] {
        let ratio = estimate(rule, 0.02) / estimate(rule, 0.01);
        assert!(ratio >= 1.8, "{rule}: ratio {ratio}");
    }
}
