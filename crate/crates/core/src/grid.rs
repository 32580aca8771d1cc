//! Uniform time grids and upper-triangular two-time storage.
//!
//! A [`TwoTimeMatrix`] holds `a(s, t)` for grid indices `s <= t`. Rows are
//! stored densely and back to back, so row `s` is the slice
//! `a(s, s), a(s, s + 1), ..., a(s, n - 1)`.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::format::fmt_sig17;

/// Slack allowed above 1 for distribution rows built by floating-point sums.
const DF_UPPER_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    origin: f64,
    step_h: f64,
    n_points: usize,
}

impl TimeGrid {
    pub fn new(origin: f64, step_h: f64, n_points: usize) -> Result<Self> {
        if !(step_h > 0.0) || !step_h.is_finite() {
            return Err(Error::InvalidGrid(format!("step must be positive, got {step_h}")));
        }
        if !origin.is_finite() {
            return Err(Error::InvalidGrid(format!("origin must be finite, got {origin}")));
        }
        if n_points < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {n_points}")));
        }
        Ok(Self {
            origin,
            step_h,
            n_points,
        })
    }

    /// Grid with unit step starting at zero, the native grid of discrete-time data.
    pub fn unit(n_points: usize) -> Result<Self> {
        Self::new(0.0, 1.0, n_points)
    }

    /// Grid covering `[origin, origin + horizon]` with step `step_h`.
    ///
    /// The horizon must be an integer multiple of the step (to 1e-9 relative).
    pub fn covering(origin: f64, horizon: f64, step_h: f64) -> Result<Self> {
        let steps = horizon / step_h;
        let rounded = steps.round();
        if rounded < 1.0 || (steps - rounded).abs() > 1e-9 * rounded.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "horizon {horizon} is not a positive multiple of step {step_h}"
            )));
        }
        Self::new(origin, step_h, rounded as usize + 1)
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn step(&self) -> f64 {
        self.step_h
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn last_index(&self) -> usize {
        self.n_points - 1
    }

    pub fn time_of(&self, index: usize) -> f64 {
        self.origin + index as f64 * self.step_h
    }

    /// Index of an on-grid time, or `None` when the time is off-grid or out of range.
    pub fn index_of(&self, time: f64) -> Option<usize> {
        let x = (time - self.origin) / self.step_h;
        let i = x.round();
        if i < 0.0 || i >= self.n_points as f64 || (x - i).abs() > 1e-9 {
            return None;
        }
        Some(i as usize)
    }

    /// True when both grids describe the same points (relative 1e-12 on the reals).
    pub fn same_as(&self, other: &TimeGrid) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        self.n_points == other.n_points
            && close(self.origin, other.origin)
            && close(self.step_h, other.step_h)
    }

    pub fn ensure_same(&self, other: &TimeGrid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }

    /// Every `factor`-th point of this grid, starting at the origin.
    pub fn coarsen(&self, factor: usize) -> Result<TimeGrid> {
        if factor == 0 {
            return Err(Error::InvalidArgument("coarsening factor must be >= 1".into()));
        }
        let last = self.last_index();
        if !last.is_multiple_of(factor) {
            return Err(Error::InvalidArgument(format!(
                "coarsening factor {factor} does not divide {last} steps"
            )));
        }
        TimeGrid::new(self.origin, self.step_h * factor as f64, last / factor + 1)
    }
}

impl fmt::Display for TimeGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "origin={} h={} n={}",
            fmt_sig17(self.origin),
            fmt_sig17(self.step_h),
            self.n_points
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatrixKind {
    Distribution,
    Increment,
    Renewal,
    Density,
    Generic,
}

impl MatrixKind {
    pub fn tag(self) -> &'static str {
        match self {
            MatrixKind::Distribution => "distribution",
            MatrixKind::Increment => "increment",
            MatrixKind::Renewal => "renewal",
            MatrixKind::Density => "density",
            MatrixKind::Generic => "generic",
        }
    }
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for MatrixKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "distribution" => MatrixKind::Distribution,
            "increment" => MatrixKind::Increment,
            "renewal" => MatrixKind::Renewal,
            "density" => MatrixKind::Density,
            "generic" => MatrixKind::Generic,
            other => return Err(Error::InvalidArgument(format!("unknown matrix kind '{other}'"))),
        })
    }
}

/// Values `a(s, t)` for `0 <= s <= t < n` on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct TwoTimeMatrix {
    grid: TimeGrid,
    kind: MatrixKind,
    values: Vec<f64>,
}

#[inline]
fn row_offset(n: usize, s: usize) -> usize {
    s * n - s * s.saturating_sub(1) / 2
}

fn triangle_len(n: usize) -> usize {
    n * (n + 1) / 2
}

impl TwoTimeMatrix {
    pub fn zeros(grid: TimeGrid, kind: MatrixKind) -> Self {
        Self {
            grid,
            kind,
            values: vec![0.0; triangle_len(grid.n_points())],
        }
    }

    /// Fills every cell `s <= t` from `f(s, t)`, row by row.
    pub fn from_fn(grid: TimeGrid, kind: MatrixKind, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let n = grid.n_points();
        let mut values = Vec::with_capacity(triangle_len(n));
        for s in 0..n {
            for t in s..n {
                values.push(f(s, t));
            }
        }
        Self { grid, kind, values }
    }

    /// Builds from rows; row `s` must hold `n - s` values starting at `a(s, s)`.
    pub fn from_rows(grid: TimeGrid, kind: MatrixKind, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = grid.n_points();
        if rows.len() != n {
            return Err(Error::InvalidArgument(format!("expected {n} rows, got {}", rows.len())));
        }
        let mut values = Vec::with_capacity(triangle_len(n));
        for (s, row) in rows.into_iter().enumerate() {
            if row.len() != n - s {
                return Err(Error::InvalidArgument(format!(
                    "row {s}: expected {} values, got {}",
                    n - s,
                    row.len()
                )));
            }
            values.extend(row);
        }
        Ok(Self { grid, kind, values })
    }

    /// Builds from columns; column `t` must hold `t + 1` values `a(0, t), ..., a(t, t)`.
    pub fn from_columns(grid: TimeGrid, kind: MatrixKind, columns: Vec<Vec<f64>>) -> Result<Self> {
        let n = grid.n_points();
        if columns.len() != n {
            return Err(Error::InvalidArgument(format!(
                "expected {n} columns, got {}",
                columns.len()
            )));
        }
        let mut out = Self::zeros(grid, kind);
        for (t, col) in columns.into_iter().enumerate() {
            if col.len() != t + 1 {
                return Err(Error::InvalidArgument(format!(
                    "column {t}: expected {} values, got {}",
                    t + 1,
                    col.len()
                )));
            }
            for (s, v) in col.into_iter().enumerate() {
                out.set(s, t, v);
            }
        }
        Ok(out)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn n_points(&self) -> usize {
        self.grid.n_points()
    }

    /// Same values under a different tag.
    pub fn with_kind(mut self, kind: MatrixKind) -> Self {
        self.kind = kind;
        self
    }

    #[inline]
    fn index(&self, s: usize, t: usize) -> usize {
        row_offset(self.grid.n_points(), s) + (t - s)
    }

    /// `a(s, t)`. Panics when `s > t` or `t` is off the grid: both are caller bugs.
    #[inline]
    pub fn get(&self, s: usize, t: usize) -> f64 {
        assert!(s <= t, "TwoTimeMatrix::get: s={s} > t={t}");
        assert!(t < self.n_points(), "TwoTimeMatrix::get: t={t} out of range");
        self.values[self.index(s, t)]
    }

    pub fn try_get(&self, s: usize, t: usize) -> Result<f64> {
        if t >= self.n_points() {
            return Err(Error::OutOfRange {
                index: t,
                n_points: self.n_points(),
            });
        }
        if s > t {
            return Err(Error::LowerTriangle { s, t });
        }
        Ok(self.values[self.index(s, t)])
    }

    #[inline]
    pub(crate) fn set(&mut self, s: usize, t: usize, value: f64) {
        debug_assert!(s <= t && t < self.n_points());
        let i = self.index(s, t);
        self.values[i] = value;
    }

    /// Row `s` as the slice `a(s, s..n)`.
    pub fn row(&self, s: usize) -> &[f64] {
        let n = self.n_points();
        assert!(s < n, "row {s} out of range");
        let start = row_offset(n, s);
        &self.values[start..start + (n - s)]
    }

    /// Column `t` as `a(0, t), ..., a(t, t)`.
    pub fn column(&self, t: usize) -> Vec<f64> {
        (0..=t).map(|s| self.get(s, t)).collect()
    }

    pub fn values(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n_points();
        (0..n).flat_map(move |s| (s..n).map(move |t| (s, t, self.get(s, t))))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &TwoTimeMatrix) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn map(&self, kind: MatrixKind, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            kind,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Cellwise `a + b`, tagged generic.
    pub fn add(&self, other: &TwoTimeMatrix) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(MatrixKind::Generic, |v| v * factor)
    }

    fn zip_with(&self, other: &TwoTimeMatrix, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            kind: MatrixKind::Generic,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Restriction to every `factor`-th grid point.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let grid = self.grid.coarsen(factor)?;
        Ok(Self::from_fn(grid, self.kind, |s, t| {
            self.get(s * factor, t * factor)
        }))
    }

    /// Checks the invariants attached to this matrix's kind.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_points();
        if let Some((s, t, v)) = self.values().find(|(_, _, v)| !v.is_finite()) {
            return Err(Error::Invariant {
                s,
                t,
                reason: format!("non-finite value {v}"),
            });
        }
        match self.kind {
            MatrixKind::Distribution => {
                for s in 0..n {
                    let row = self.row(s);
                    if row[0] != 0.0 {
                        return Err(Error::Invariant {
                            s,
                            t: s,
                            reason: format!("F(k,k) must be 0, got {}", row[0]),
                        });
                    }
                    for (j, w) in row.windows(2).enumerate() {
                        let t = s + j + 1;
                        if w[1] < w[0] {
                            return Err(Error::NegativeIncrement {
                                s,
                                t,
                                value: w[1] - w[0],
                            });
                        }
                        if w[1] > 1.0 + DF_UPPER_SLACK {
                            return Err(Error::Invariant {
                                s,
                                t,
                                reason: format!("distribution value {} exceeds 1", w[1]),
                            });
                        }
                    }
                }
            }
            MatrixKind::Increment => {
                for s in 0..n {
                    let row = self.row(s);
                    if row[0] != 0.0 {
                        return Err(Error::Invariant {
                            s,
                            t: s,
                            reason: format!("v(k,k) must be 0, got {}", row[0]),
                        });
                    }
                    if let Some((j, v)) = row.iter().enumerate().find(|(_, v)| **v < 0.0) {
                        return Err(Error::NegativeIncrement { s, t: s + j, value: *v });
                    }
                    let total: f64 = row.iter().sum();
                    if total > 1.0 + DF_UPPER_SLACK {
                        return Err(Error::Invariant {
                            s,
                            t: n - 1,
                            reason: format!("row mass {total} exceeds 1"),
                        });
                    }
                }
            }
            MatrixKind::Renewal => {
                for s in 0..n {
                    if self.get(s, s) != 0.0 {
                        return Err(Error::Invariant {
                            s,
                            t: s,
                            reason: "H(k,k) must be 0".into(),
                        });
                    }
                }
            }
            MatrixKind::Density | MatrixKind::Generic => {}
        }
        Ok(())
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# grid {} kind={}", self.grid, self.kind)?;
        let mut line = String::new();
        for s in 0..self.n_points() {
            line.clear();
            for (j, v) in self.row(s).iter().enumerate() {
                if j > 0 {
                    line.push('\t');
                }
                line.push_str(&fmt_sig17(*v));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn to_tsv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("TSV output is ASCII")
    }

    /// Parses the TSV layout written by [`TwoTimeMatrix::write_tsv`].
    ///
    /// `source` only labels error messages.
    pub fn read_tsv<R: BufRead>(input: R, source: &Path) -> Result<Self> {
        let parse_err = |line: u64, reason: String| Error::Parse {
            path: source.to_path_buf(),
            line,
            reason,
        };
        let mut lines = input.lines();
        let header = match lines.next() {
            Some(l) => l?,
            None => return Err(parse_err(1, "empty matrix file".into())),
        };
        let (grid, kind) = parse_header(&header).map_err(|r| parse_err(1, r))?;
        let n = grid.n_points();
        let mut rows = Vec::with_capacity(n);
        for (i, line) in lines.enumerate() {
            let line_no = i as u64 + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let s = rows.len();
            if s >= n {
                return Err(parse_err(line_no, format!("more than {n} rows")));
            }
            let row = line
                .split('\t')
                .map(|tok| {
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|e| parse_err(line_no, format!("bad number '{tok}': {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != n - s {
                return Err(parse_err(
                    line_no,
                    format!("row {s}: expected {} values, got {}", n - s, row.len()),
                ));
            }
            rows.push(row);
        }
        if rows.len() != n {
            return Err(parse_err(
                n as u64 + 1,
                format!("expected {n} rows, got {}", rows.len()),
            ));
        }
        Self::from_rows(grid, kind, rows)
    }

    pub fn from_tsv_str(text: &str) -> Result<Self> {
        Self::read_tsv(text.as_bytes(), Path::new("<string>"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_tsv(std::io::BufReader::new(file), path)
    }
}

fn parse_header(header: &str) -> std::result::Result<(TimeGrid, MatrixKind), String> {
    let rest = header
        .strip_prefix("# grid ")
        .ok_or_else(|| format!("expected '# grid ...' header, got '{header}'"))?;
    let (mut origin, mut h, mut n, mut kind) = (None, None, None, None);
    for field in rest.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| format!("malformed header field '{field}'"))?;
        match key {
            "origin" => origin = Some(value.parse::<f64>().map_err(|e| format!("origin: {e}"))?),
            "h" => h = Some(value.parse::<f64>().map_err(|e| format!("h: {e}"))?),
            "n" => n = Some(value.parse::<usize>().map_err(|e| format!("n: {e}"))?),
            "kind" => kind = Some(value.parse::<MatrixKind>().map_err(|e| e.to_string())?),
            other => return Err(format!("unknown header field '{other}'")),
        }
    }
    let grid = TimeGrid::new(
        origin.ok_or("header missing origin")?,
        h.ok_or("header missing h")?,
        n.ok_or("header missing n")?,
    )
    .map_err(|e| e.to_string())?;
    Ok((grid, kind.ok_or("header missing kind")?))
}

/// Backward differences `v(s, t) = F(s, t) - F(s, t - 1)` for `t > s`, `v(s, s) = 0`.
///
/// Rejects a non-monotone row with the offending location. The row sums telescope
/// back to `F(s, T)`.
pub fn increments_from_df(df: &TwoTimeMatrix) -> Result<TwoTimeMatrix> {
    let n = df.n_points();
    let mut out = TwoTimeMatrix::zeros(*df.grid(), MatrixKind::Increment);
    for s in 0..n {
        let row = df.row(s);
        for t in s + 1..n {
            let d = row[t - s] - row[t - s - 1];
            if d < 0.0 {
                return Err(Error::NegativeIncrement { s, t, value: d });
            }
            out.set(s, t, d);
        }
    }
    Ok(out)
}

/// Density by backward differences over the step, `f(s, t) = v(s, t) / h`, with
/// zero density at lag zero.
pub fn density_from_df(df: &TwoTimeMatrix) -> Result<TwoTimeMatrix> {
    let h = df.grid().step();
    Ok(increments_from_df(df)?.map(MatrixKind::Density, |v| v / h))
}
