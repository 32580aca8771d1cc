//! Built-in golden checks run by `nh-renewal selftest`.

use std::fmt;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::empirical::{
    build_duration_histogram, ingest_readers, no_claim_table, AgeLabel, CleaningConfig, Transition,
    DEFAULT_CAP_AGE,
};
use crate::error::Result;
use crate::fixtures::{
    duration_table_records, no_claim_records, records_to_csv, Fixtures, Printed, Reproduction,
    PRINTED_TOL,
};
use crate::grid::{increments_from_df, MatrixKind, TimeGrid, TwoTimeMatrix};
use crate::quadrature::QuadratureRule;
use crate::simulator::{estimate_renewal_function, random_distribution, SimConfig};
use crate::solver::{
    counting_pmf, homogeneous_lift, solve_discrete, solve_quadrature, solve_series, SolverMethod,
    DEFAULT_PMF_TOL, DEFAULT_SERIES_TOL,
};

#[derive(Debug, Clone)]
pub struct SelftestOptions {
    /// Directory with `table3.tsv` and `table4.tsv`; the embedded copies otherwise.
    pub fixtures_dir: Option<PathBuf>,
    pub oracle_matrices: usize,
    pub oracle_paths: u64,
    pub seed: u64,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        Self {
            fixtures_dir: None,
            oracle_matrices: 5,
            oracle_paths: 20_000,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub tolerance: String,
    pub detail: String,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status}\t{}\t{}", self.name, self.detail)
    }
}

fn outcome(name: &'static str, tolerance: impl Into<String>, res: Result<(bool, String)>) -> CheckOutcome {
    let (passed, detail) = res.unwrap_or_else(|e| (false, format!("error: {e}")));
    CheckOutcome {
        name,
        passed,
        tolerance: tolerance.into(),
        detail,
    }
}

pub fn run_selftest(opts: &SelftestOptions) -> Vec<CheckOutcome> {
    let fixtures = match &opts.fixtures_dir {
        Some(dir) => Fixtures::from_dir(dir),
        None => Fixtures::embedded(),
    };
    let (t3, t4) = match &fixtures {
        Ok(f) => (check_duration_table(f), check_no_claim_table(f)),
        Err(e) => (
            Err(crate::Error::InvalidArgument(format!("fixtures: {e}"))),
            Err(crate::Error::InvalidArgument(format!("fixtures: {e}"))),
        ),
    };
    let tol = format!("|computed - printed| <= {PRINTED_TOL:e}, or equal at printed precision");
    vec![
        outcome("table3-arithmetic", tol.clone(), t3),
        outcome("table4-arithmetic", tol, t4),
        outcome("poisson-lambda-t", "H(0,5) in [4.9, 5.1], h = 0.01", check_poisson()),
        outcome(
            "geometric-pt",
            "|H(0,t) - 0.25t| <= 1e-12; |pmf - Binomial(8, 0.25)| <= 1e-10",
            check_geometric(),
        ),
        outcome(
            "discrete-continuous",
            "|rect-right(h=1) - exact| <= 1e-12",
            check_equivalence(opts.seed, 10),
        ),
        outcome(
            "oracle-triangle",
            "|exact - series| <= 1e-10; |MC - exact| <= 3 SE",
            check_oracle_triangle(opts),
        ),
    ]
}

fn compare(p: &Printed, computed: f64, worst: &mut f64, rounded: &mut usize, bad: &mut Vec<String>, what: String) {
    *worst = worst.max((computed - p.value).abs());
    match p.check(computed) {
        Reproduction::WithinTolerance => {}
        Reproduction::AtPrintedPrecision => *rounded += 1,
        Reproduction::Mismatch => bad.push(format!("{what}: computed {computed} vs printed {}", p.text)),
    }
}

fn summarize(checked: usize, worst: f64, rounded: usize, bad: Vec<String>) -> (bool, String) {
    if bad.is_empty() {
        (
            true,
            format!("{checked} values reproduced, max diff {worst:.3e}, {rounded} only at printed precision"),
        )
    } else {
        (false, format!("{} mismatches: {}", bad.len(), bad.join("; ")))
    }
}

fn ingest_records(records: &[crate::empirical::PolicyRecord]) -> Result<Vec<crate::empirical::PolicyRecord>> {
    let (policies, claims) = records_to_csv(records);
    let ingested = ingest_readers(
        policies.as_bytes(),
        Path::new("policies.csv"),
        claims.as_bytes(),
        Path::new("claims.csv"),
        &CleaningConfig::default(),
    )?;
    Ok(ingested.records)
}

/// Duration counts and probabilities recomputed through ingestion.
pub fn check_duration_table(f: &Fixtures) -> Result<(bool, String)> {
    let table = &f.durations;
    let records = ingest_records(&duration_table_records(table))?;
    let left = build_duration_histogram(&records, Transition::FirstToSecond);
    let right = build_duration_histogram(&records, Transition::SecondToThird);
    let (mut worst, mut rounded, mut bad, mut checked) = (0.0, 0, Vec::new(), 0);
    if left.total() != table.total_first_second || right.total() != table.total_second_third {
        bad.push(format!(
            "totals {}/{} vs printed {}/{}",
            left.total(),
            right.total(),
            table.total_first_second,
            table.total_second_third
        ));
    }
    for row in &table.rows {
        if left.count(row.years) != row.first_second || right.count(row.years) != row.second_third {
            bad.push(format!("year {}: counts differ", row.years));
        }
        let p1 = left.count(row.years) as f64 / table.total_first_second as f64;
        let p2 = right.count(row.years) as f64 / table.total_second_third as f64;
        compare(&row.prob_first_second, p1, &mut worst, &mut rounded, &mut bad, format!("year {} 1-2", row.years));
        compare(&row.prob_second_third, p2, &mut worst, &mut rounded, &mut bad, format!("year {} 2-3", row.years));
        checked += 2;
    }
    Ok(summarize(checked, worst, rounded, bad))
}

/// No-claim probabilities recomputed through ingestion.
pub fn check_no_claim_table(f: &Fixtures) -> Result<(bool, String)> {
    let table = &f.no_claims;
    let records = ingest_records(&no_claim_records(table))?;
    let rows = no_claim_table(&records, DEFAULT_CAP_AGE);
    let (mut worst, mut rounded, mut bad, mut checked) = (0.0, 0, Vec::new(), 0);
    let expected = table.rows.iter().chain(std::iter::once(&table.total));
    for want in expected {
        let Some(got) = rows.iter().find(|r| r.label == want.label) else {
            bad.push(format!("row {} missing", want.label));
            continue;
        };
        if got.total != want.total || got.no_claim != want.no_claim {
            bad.push(format!(
                "row {}: counts {}/{} vs printed {}/{}",
                want.label, got.no_claim, got.total, want.no_claim, want.total
            ));
        }
        compare(&want.prob_no_claim, got.prob_no_claim, &mut worst, &mut rounded, &mut bad, format!("row {} no-claim", want.label));
        compare(&want.prob_claim, got.prob_claim, &mut worst, &mut rounded, &mut bad, format!("row {} claim", want.label));
        checked += 2;
    }
    if rows.len() != table.rows.len() + 1 || rows.last().map(|r| r.label) != Some(AgeLabel::Total) {
        bad.push(format!("{} rows computed, {} printed", rows.len(), table.rows.len() + 1));
    }
    Ok(summarize(checked, worst, rounded, bad))
}

/// Exponential(1) lifted to two times with its exact density, on `[0, horizon]`.
pub fn poisson_problem(horizon: f64, h: f64) -> Result<(TwoTimeMatrix, TwoTimeMatrix)> {
    let grid = TimeGrid::covering(0.0, horizon, h)?;
    let df = TwoTimeMatrix::from_fn(grid, MatrixKind::Distribution, |s, t| {
        1.0 - (-(grid.time_of(t) - grid.time_of(s))).exp()
    });
    let density = TwoTimeMatrix::from_fn(grid, MatrixKind::Density, |s, t| {
        (-(grid.time_of(t) - grid.time_of(s))).exp()
    });
    Ok((df, density))
}

/// `H(0, horizon)` for the Poisson problem under one quadrature rule.
pub fn poisson_estimate(rule: QuadratureRule, horizon: f64, h: f64) -> Result<f64> {
    let (df, density) = poisson_problem(horizon, h)?;
    let last = df.grid().last_index();
    let col = crate::solver::solve_quadrature_column(&density, &df, SolverMethod::quadrature(rule, h)?, last)?;
    Ok(col[0])
}

fn check_poisson() -> Result<(bool, String)> {
    let mut parts = Vec::new();
    let mut ok = true;
    for rule in QuadratureRule::ALL {
        let est = poisson_estimate(rule, 5.0, 0.01)?;
        ok &= (4.9..=5.1).contains(&est);
        parts.push(format!("{}={est:.6}", rule.name()));
    }
    Ok((ok, parts.join(" ")))
}

/// Geometric waiting times with success probability `p`, lifted on `0..=t_max`.
pub fn geometric_df(p: f64, t_max: usize) -> Result<TwoTimeMatrix> {
    let f1: Vec<f64> = (0..=t_max).map(|k| 1.0 - (1.0 - p).powi(k as i32)).collect();
    homogeneous_lift(&f1, TimeGrid::unit(t_max + 1)?)
}

fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut choose = 1.0;
    for k in 0..=n {
        if k > 0 {
            choose *= (n - k + 1) as f64 / k as f64;
        }
        out.push(choose * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32));
    }
    out
}

fn check_geometric() -> Result<(bool, String)> {
    let df = geometric_df(0.25, 40)?;
    let h = solve_discrete(&df)?;
    let mean_err = (0..=40)
        .map(|t| (h.get(0, t) - 0.25 * t as f64).abs())
        .fold(0.0, f64::max);
    let pmf = counting_pmf(&df, 0, 8, DEFAULT_PMF_TOL)?;
    let binom = binomial_pmf(8, 0.25);
    let pmf_err = (0..binom.len().max(pmf.probs.len()))
        .map(|n| (pmf.probs.get(n).copied().unwrap_or(0.0) - binom.get(n).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max);
    Ok((
        mean_err <= 1e-12 && pmf_err <= 1e-10,
        format!("mean err {mean_err:.3e}, pmf err {pmf_err:.3e}"),
    ))
}

/// Maximum cellwise gap between rect-right at h = 1 on `df`'s increments and
/// the exact discrete solution.
pub fn equivalence_gap(df: &TwoTimeMatrix) -> Result<f64> {
    let v = increments_from_df(df)?.with_kind(MatrixKind::Density);
    let method = SolverMethod::quadrature(QuadratureRule::RectRight, df.grid().step())?;
    let quad = solve_quadrature(&v, df, method)?;
    quad.max_abs_diff(&solve_discrete(df)?)
}

fn check_equivalence(seed: u64, count: usize) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for i in 0..count {
        let n = 2 + i % 30;
        let df = random_distribution(TimeGrid::unit(n)?, 0.5, &mut rng);
        worst = worst.max(equivalence_gap(&df)?);
    }
    Ok((worst <= 1e-12, format!("{count} matrices, max gap {worst:.3e}")))
}

/// Exact, series and Monte Carlo agreement on one matrix: the series gap and the
/// number of horizon points where the simulated mean misses by more than 3 SE.
pub fn oracle_triangle(df: &TwoTimeMatrix, n_paths: u64, seed: u64) -> Result<(f64, usize, usize)> {
    let exact = solve_discrete(df)?;
    let series = solve_series(df, DEFAULT_SERIES_TOL)?;
    let gap = exact.max_abs_diff(&series.renewal)?;
    let cfg = SimConfig {
        n_paths,
        seed,
        start_idx: 0,
        horizon_idx: df.grid().last_index(),
    };
    let est = estimate_renewal_function(df, &cfg)?;
    let mut misses = 0;
    for t in 0..=cfg.horizon_idx {
        let (mean, se) = est.at(t);
        let err = (mean - exact.get(0, t)).abs();
        if err > 3.0 * se && err > 1e-12 {
            misses += 1;
        }
    }
    Ok((gap, misses, cfg.horizon_idx + 1))
}

fn check_oracle_triangle(opts: &SelftestOptions) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (mut gap, mut misses, mut points) = (0.0f64, 0, 0);
    for i in 0..opts.oracle_matrices {
        let df = random_distribution(TimeGrid::unit(16)?, 0.5, &mut rng);
        let (g, m, p) = oracle_triangle(&df, opts.oracle_paths, opts.seed + i as u64)?;
        gap = gap.max(g);
        misses += m;
        points += p;
    }
    Ok((
        gap <= 1e-10 && misses == 0,
        format!(
            "{} matrices, {} paths: series gap {gap:.3e}, {misses}/{points} points beyond 3 SE",
            opts.oracle_matrices, opts.oracle_paths
        ),
    ))
}
