//! Renewal equation solvers.
//!
//! `H(s, t) = F(s, t) + sum_{x = s+1}^{t} v(s, x) H(x, t)` is a unit upper
//! triangular system, so each column `H(., t)` is obtained by back-substitution
//! from `s = t - 1` down to `0` without any division. The quadrature variants
//! discretize `H(s, t) = F(s, t) + integral_s^t f(s, tau) H(tau, t) dtau` the same
//! way, solving the implicit `tau = s` term algebraically.
//!
//! Columns are independent and are solved in parallel; each column is summed in
//! a fixed order, so results do not depend on thread scheduling.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::convolution::convolve_increments;
use crate::error::{Error, Result};
use crate::grid::{increments_from_df, MatrixKind, TimeGrid, TwoTimeMatrix};
use crate::quadrature::QuadratureRule;

pub const DEFAULT_SERIES_TOL: f64 = 1e-12;
pub const DEFAULT_PMF_TOL: f64 = 1e-10;
const SINGULAR_PIVOT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverMethod {
    /// Back-substitution on the grid's native step.
    ExactDiscrete,
    Quadrature { rule: QuadratureRule, step_h: f64 },
}

impl SolverMethod {
    pub fn quadrature(rule: QuadratureRule, step_h: f64) -> Result<Self> {
        if !(step_h > 0.0) || !step_h.is_finite() {
            return Err(Error::InvalidMethod {
                method: rule.name().into(),
                reason: format!("step must be positive, got {step_h}"),
            });
        }
        Ok(SolverMethod::Quadrature { rule, step_h })
    }

    pub fn name(&self) -> &'static str {
        match self {
            SolverMethod::ExactDiscrete => "exact",
            SolverMethod::Quadrature { rule, .. } => rule.name(),
        }
    }
}

impl fmt::Display for SolverMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverMethod::ExactDiscrete => f.write_str("exact"),
            SolverMethod::Quadrature { rule, step_h } => write!(f, "{rule}(h={step_h})"),
        }
    }
}

/// Method tag without a step, as selected on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodTag {
    Exact,
    Rule(QuadratureRule),
}

impl MethodTag {
    pub fn with_step(self, step_h: f64) -> Result<SolverMethod> {
        match self {
            MethodTag::Exact => Ok(SolverMethod::ExactDiscrete),
            MethodTag::Rule(rule) => SolverMethod::quadrature(rule, step_h),
        }
    }
}

impl FromStr for MethodTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" | "exact-discrete" => Ok(MethodTag::Exact),
            other => other.parse().map(MethodTag::Rule),
        }
    }
}

fn solve_by_columns(
    grid: TimeGrid,
    column: impl Fn(usize) -> Result<Vec<f64>> + Sync + Send,
) -> Result<TwoTimeMatrix> {
    let columns = (0..grid.n_points())
        .into_par_iter()
        .map(column)
        .collect::<Result<Vec<_>>>()?;
    TwoTimeMatrix::from_columns(grid, MatrixKind::Renewal, columns)
}

/// Discrete-time renewal function by back-substitution.
pub fn solve_discrete(df: &TwoTimeMatrix) -> Result<TwoTimeMatrix> {
    let v = increments_from_df(df)?;
    solve_by_columns(*df.grid(), |t| Ok(discrete_column(df, &v, t)))
}

/// `H(0..=t, t)` for one column of the discrete system.
pub fn discrete_column(df: &TwoTimeMatrix, v: &TwoTimeMatrix, t: usize) -> Vec<f64> {
    let mut col = vec![0.0; t + 1];
    for s in (0..t).rev() {
        let vrow = v.row(s);
        let mut acc = df.get(s, t);
        for x in s + 1..t {
            acc += col[x] * vrow[x - s];
        }
        col[s] = acc;
    }
    col
}

#[derive(Debug, Clone)]
pub struct SeriesSolution {
    pub renewal: TwoTimeMatrix,
    /// Index of the last convolution power whose maximum reached `tol` (at least 1).
    pub terms: usize,
}

/// Renewal function as the partial sum of convolution powers `sum_n F^(n)`.
///
/// Stops once `max F^(n) < tol`. Every renewal takes at least one grid step, so
/// `F^(n)` vanishes identically for `n >= n_points` and the loop terminates long
/// before its `10 * n_points` cap on valid input.
pub fn solve_series(df: &TwoTimeMatrix, tol: f64) -> Result<SeriesSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("series tolerance must be positive, got {tol}")));
    }
    let v = increments_from_df(df)?;
    let max_terms = 10 * df.n_points();
    let mut term = df.clone();
    let mut sum = df.clone();
    let mut last_significant = 0;
    for n in 1..=max_terms {
        if term.max_abs() < tol {
            return Ok(SeriesSolution {
                renewal: sum.with_kind(MatrixKind::Renewal),
                terms: last_significant.max(1),
            });
        }
        last_significant = n;
        term = convolve_increments(&term, &v)?;
        sum = sum.add(&term)?;
    }
    Err(Error::SeriesNotConverged { tol, max_terms })
}

/// Quadrature discretization of the continuous renewal equation.
///
/// `density` must be the density of `df` on the same grid and the method's step
/// must equal the grid step.
pub fn solve_quadrature(
    density: &TwoTimeMatrix,
    df: &TwoTimeMatrix,
    method: SolverMethod,
) -> Result<TwoTimeMatrix> {
    let rule = check_quadrature(density, df, method)?;
    solve_by_columns(*df.grid(), |k| quadrature_column_unchecked(density, df, rule, k))
}

/// One column `H(0..=k, k)` of [`solve_quadrature`]; O(k^2) work.
pub fn solve_quadrature_column(
    density: &TwoTimeMatrix,
    df: &TwoTimeMatrix,
    method: SolverMethod,
    k: usize,
) -> Result<Vec<f64>> {
    let rule = check_quadrature(density, df, method)?;
    if k >= df.n_points() {
        return Err(Error::OutOfRange {
            index: k,
            n_points: df.n_points(),
        });
    }
    quadrature_column_unchecked(density, df, rule, k)
}

fn check_quadrature(
    density: &TwoTimeMatrix,
    df: &TwoTimeMatrix,
    method: SolverMethod,
) -> Result<QuadratureRule> {
    density.grid().ensure_same(df.grid())?;
    match method {
        SolverMethod::ExactDiscrete => Err(Error::InvalidMethod {
            method: "exact".into(),
            reason: "use solve_discrete for the exact method".into(),
        }),
        SolverMethod::Quadrature { rule, step_h } => {
            let h = df.grid().step();
            if (step_h - h).abs() > 1e-12 * h {
                return Err(Error::InvalidMethod {
                    method: rule.name().into(),
                    reason: format!("step {step_h} differs from grid step {h}"),
                });
            }
            Ok(rule)
        }
    }
}

fn quadrature_column_unchecked(
    density: &TwoTimeMatrix,
    df: &TwoTimeMatrix,
    rule: QuadratureRule,
    k: usize,
) -> Result<Vec<f64>> {
    let h = df.grid().step();
    let mut col = vec![0.0; k + 1];
    for u in (0..k).rev() {
        let m = k - u;
        let frow = density.row(u);
        let mut acc = df.get(u, k);
        // tau = k carries H(k, k) = 0
        for tau in u + 1..k {
            acc += rule.weight(tau - u, m, h) * frow[tau - u] * col[tau];
        }
        let pivot = 1.0 - rule.weight(0, m, h) * frow[0];
        if pivot.abs() < SINGULAR_PIVOT {
            return Err(Error::SingularDiagonal { u, k, pivot });
        }
        col[u] = acc / pivot;
    }
    Ok(col)
}

/// Distribution of `N(t) - N(s)`, truncated where `F^(n)(s, t)` drops below tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct CountingPmf {
    pub s_idx: usize,
    pub t_idx: usize,
    /// `probs[n] = P[N(t) - N(s) = n]` for `n = 0..=n_max`.
    pub probs: Vec<f64>,
    pub n_max: usize,
    /// `F^(n_max + 1)(s, t)`, the mass of all counts beyond `n_max`.
    pub truncation_mass: f64,
}

impl CountingPmf {
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum::<f64>() + self.truncation_mass
    }
}

/// `P[N(t) - N(s) = n] = F^(n)(s, t) - F^(n+1)(s, t)`.
///
/// Only column `t` of each convolution power is needed, which keeps the cost at
/// O((t - s)^2) per power.
pub fn counting_pmf(df: &TwoTimeMatrix, s_idx: usize, t_idx: usize, tol: f64) -> Result<CountingPmf> {
    let n = df.n_points();
    if t_idx >= n {
        return Err(Error::OutOfRange {
            index: t_idx,
            n_points: n,
        });
    }
    if s_idx > t_idx {
        return Err(Error::LowerTriangle { s: s_idx, t: t_idx });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("pmf tolerance must be positive, got {tol}")));
    }
    let v = increments_from_df(df)?;
    // power[x - s_idx] = F^(n)(x, t) for x in s_idx..=t_idx
    let mut power: Vec<f64> = (s_idx..=t_idx).map(|x| df.get(x, t_idx)).collect();
    let mut at_cell = vec![power[0]];
    // each power needs one more step of lag, so at most t - s + 1 nonzero powers
    let cap = t_idx - s_idx + 2;
    while *at_cell.last().unwrap() >= tol && at_cell.len() <= cap {
        let next: Vec<f64> = (s_idx..=t_idx)
            .map(|x| {
                let vrow = v.row(x);
                let mut acc = 0.0;
                for y in x + 1..=t_idx {
                    acc += power[y - s_idx] * vrow[y - x];
                }
                acc
            })
            .collect();
        power = next;
        at_cell.push(power[0]);
    }
    let mut probs = Vec::with_capacity(at_cell.len());
    probs.push(1.0 - at_cell[0]);
    for w in at_cell.windows(2) {
        probs.push(w[0] - w[1]);
    }
    let truncation_mass = *at_cell.last().unwrap();
    Ok(CountingPmf {
        s_idx,
        t_idx,
        n_max: probs.len() - 1,
        probs,
        truncation_mass,
    })
}

/// Lifts a one-variable distribution `F1(lag)` to `F(s, t) = F1(t - s)`.
///
/// Lags beyond the end of `f1` keep its last value.
pub fn homogeneous_lift(f1: &[f64], grid: TimeGrid) -> Result<TwoTimeMatrix> {
    let Some(&first) = f1.first() else {
        return Err(Error::InvalidArgument("empty distribution vector".into()));
    };
    if first != 0.0 {
        return Err(Error::Invariant {
            s: 0,
            t: 0,
            reason: format!("F(0) must be 0, got {first}"),
        });
    }
    for (i, w) in f1.windows(2).enumerate() {
        if w[1] < w[0] {
            return Err(Error::NegativeIncrement {
                s: 0,
                t: i + 1,
                value: w[1] - w[0],
            });
        }
    }
    if let Some(i) = f1.iter().position(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::Invariant {
            s: 0,
            t: i,
            reason: format!("value {} outside [0, 1]", f1[i]),
        });
    }
    let last = f1.len() - 1;
    Ok(TwoTimeMatrix::from_fn(grid, MatrixKind::Distribution, |s, t| {
        f1[(t - s).min(last)]
    }))
}

/// Solves with whichever method is asked for, deriving the density from `df` by
/// backward differences when a quadrature rule is selected.
///
/// A quadrature step that is an integer multiple of the grid step restricts `df`
/// to the coarser grid first.
pub fn solve_with_method(df: &TwoTimeMatrix, method: SolverMethod) -> Result<TwoTimeMatrix> {
    match method {
        SolverMethod::ExactDiscrete => solve_discrete(df),
        SolverMethod::Quadrature { rule, step_h } => {
            let h = df.grid().step();
            let ratio = step_h / h;
            let factor = ratio.round();
            if factor < 1.0 || (ratio - factor).abs() > 1e-9 * factor {
                return Err(Error::InvalidMethod {
                    method: rule.name().into(),
                    reason: format!("step {step_h} is not a multiple of the grid step {h}"),
                });
            }
            let coarse = if factor as usize == 1 {
                df.clone()
            } else {
                df.coarsen(factor as usize)?
            };
            let density = crate::grid::density_from_df(&coarse)?;
            let method = SolverMethod::quadrature(rule, coarse.grid().step())?;
            solve_quadrature(&density, &coarse, method)
        }
    }
}
