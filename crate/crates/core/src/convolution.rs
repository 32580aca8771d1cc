//! Non-homogeneous time convolutions on a grid.
//!
//! Two discretizations live here:
//!
//! * the Stieltjes form `(G * F)(s, t) = sum_{x = s+1}^{t} G(x, t) v(s, x)`, where `v`
//!   are the backward increments of the distribution `F`;
//! * the density form `(f * g)(s, t) = integral_s^t g(s, tau) f(tau, t) dtau`, evaluated
//!   with a quadrature rule. Note the slots: `g` takes `(s, tau)`, `f` takes `(tau, t)`.
//!
//! Neither operation commutes.

use crate::error::{Error, Result};
use crate::grid::{increments_from_df, MatrixKind, TwoTimeMatrix};
use crate::quadrature::QuadratureRule;

/// Stieltjes convolution of `g` against the distribution `df`.
pub fn stieltjes_convolve(g: &TwoTimeMatrix, df: &TwoTimeMatrix) -> Result<TwoTimeMatrix> {
    g.grid().ensure_same(df.grid())?;
    let v = increments_from_df(df)?;
    convolve_increments(g, &v)
}

/// `sum_{x = s+1}^{t} g(x, t) v(s, x)` for an arbitrary increment matrix `v`.
///
/// Linear in both arguments. The result is tagged as a distribution when `g` is
/// one and `v` came from a distribution, otherwise generic.
pub fn convolve_increments(g: &TwoTimeMatrix, v: &TwoTimeMatrix) -> Result<TwoTimeMatrix> {
    g.grid().ensure_same(v.grid())?;
    let kind = if g.kind() == MatrixKind::Distribution && v.kind() == MatrixKind::Increment {
        MatrixKind::Distribution
    } else {
        MatrixKind::Generic
    };
    Ok(TwoTimeMatrix::from_fn(*g.grid(), kind, |s, t| {
        let vrow = v.row(s);
        let mut acc = 0.0;
        for x in s + 1..=t {
            acc += g.get(x, t) * vrow[x - s];
        }
        acc
    }))
}

/// Density-form convolution `(f * g)(s, t)` under `rule`.
pub fn density_convolve(
    f: &TwoTimeMatrix,
    g: &TwoTimeMatrix,
    rule: QuadratureRule,
) -> Result<TwoTimeMatrix> {
    f.grid().ensure_same(g.grid())?;
    let h = f.grid().step();
    Ok(TwoTimeMatrix::from_fn(*f.grid(), MatrixKind::Generic, |s, t| {
        let m = t - s;
        let grow = g.row(s);
        let mut acc = 0.0;
        for j in 0..=m {
            let w = rule.weight(j, m, h);
            if w != 0.0 {
                acc += w * grow[j] * f.get(s + j, t);
            }
        }
        acc
    }))
}

/// `F^(n)`: the distribution of the n-th renewal time, `P[N(t) - N(s) >= n]`.
pub fn nfold_convolution(df: &TwoTimeMatrix, n: usize) -> Result<TwoTimeMatrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("n-fold convolution needs n >= 1".into()));
    }
    let v = increments_from_df(df)?;
    let mut out = df.clone();
    for _ in 1..n {
        out = convolve_increments(&out, &v)?;
    }
    Ok(out)
}
