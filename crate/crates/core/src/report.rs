//! TSV reports: duration tables, no-claim table, and the mean-claims table
//! laid out by attained age and contract age.

use crate::empirical::{DurationHistogram, NoClaimRow};
use crate::error::{Error, Result};
use crate::format::{fmt_label, fmt_sig17};
use crate::grid::TwoTimeMatrix;

/// Side-by-side waiting-time counts and probabilities for two transitions.
pub fn duration_table_tsv(
    left: &DurationHistogram,
    right: &DurationHistogram,
    left_name: &str,
    right_name: &str,
) -> String {
    let rows = left.horizon().max(right.horizon());
    let prob = |h: &DurationHistogram, i: usize| {
        let total = h.total();
        if total == 0 {
            0.0
        } else {
            h.count(i) as f64 / total as f64
        }
    };
    let mut out = format!("years\t{left_name}\t{right_name}\tprob {left_name}\tprob {right_name}\n");
    for i in 1..=rows {
        out.push_str(&format!(
            "{i}\t{}\t{}\t{}\t{}\n",
            left.count(i),
            right.count(i),
            fmt_sig17(prob(left, i)),
            fmt_sig17(prob(right, i))
        ));
    }
    let total_prob = |h: &DurationHistogram| if h.total() > 0 { 1.0 } else { 0.0 };
    out.push_str(&format!(
        "Total\t{}\t{}\t{}\t{}\n",
        left.total(),
        right.total(),
        fmt_sig17(total_prob(left)),
        fmt_sig17(total_prob(right))
    ));
    out
}

/// One homogeneous duration distribution: count, pmf and d.f. per waiting time.
pub fn duration_df_tsv(hist: &DurationHistogram, df: &[f64]) -> String {
    let mut out = String::from("years\tcount\tprob\tcdf\n");
    let total = hist.total() as f64;
    for (i, cdf) in df.iter().enumerate() {
        out.push_str(&format!(
            "{i}\t{}\t{}\t{}\n",
            hist.count(i),
            fmt_sig17(hist.count(i) as f64 / total),
            fmt_sig17(*cdf)
        ));
    }
    out
}

pub fn no_claim_tsv(rows: &[NoClaimRow]) -> String {
    let mut out = String::from("age\ttot_numb\tno_claim\tprob_no_claim\tprob_claim\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            r.label,
            r.total,
            r.no_claim,
            fmt_sig17(r.prob_no_claim),
            fmt_sig17(r.prob_claim)
        ));
    }
    out
}

/// Mean renewal counts with attained age down the rows and contract (start)
/// age across the columns. Cells above the diagonal are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanClaimsReport {
    pub ages: Vec<f64>,
    /// `cells[row][col] = H(col, row)` when `col <= row`, else 0.
    pub cells: Vec<Vec<f64>>,
}

impl MeanClaimsReport {
    pub fn from_renewal(h: &TwoTimeMatrix) -> Self {
        let n = h.n_points();
        let ages = (0..n).map(|i| h.grid().time_of(i)).collect();
        let cells = (0..n)
            .map(|row| {
                (0..n)
                    .map(|col| if col <= row { h.get(col, row) } else { 0.0 })
                    .collect()
            })
            .collect();
        Self { ages, cells }
    }

    pub fn diagonal_is_zero(&self) -> bool {
        (0..self.ages.len()).all(|i| self.cells[i][i] == 0.0)
    }

    /// Every contract-age column is nondecreasing with attained age.
    pub fn columns_nondecreasing(&self) -> bool {
        let n = self.ages.len();
        (0..n).all(|col| (col + 1..n).all(|row| self.cells[row][col] >= self.cells[row - 1][col]))
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("attained_age\\contract_age");
        for a in &self.ages {
            out.push('\t');
            out.push_str(&fmt_label(*a));
        }
        out.push('\n');
        for (row, age) in self.ages.iter().enumerate() {
            out.push_str(&fmt_label(*age));
            for v in &self.cells[row] {
                out.push('\t');
                out.push_str(&fmt_sig17(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let bad = |line: usize, reason: String| Error::Parse {
            path: "<report>".into(),
            line: line as u64,
            reason,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad(1, "empty report".into()))?;
        let ages = header
            .split('\t')
            .skip(1)
            .map(|a| a.parse::<f64>().map_err(|e| bad(1, format!("age '{a}': {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let mut cells = Vec::with_capacity(ages.len());
        for (i, line) in lines.enumerate() {
            let row = line
                .split('\t')
                .skip(1)
                .map(|v| v.parse::<f64>().map_err(|e| bad(i + 2, format!("'{v}': {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != ages.len() {
                return Err(bad(i + 2, format!("expected {} cells", ages.len())));
            }
            cells.push(row);
        }
        if cells.len() != ages.len() {
            return Err(bad(cells.len() + 1, "row count differs from column count".into()));
        }
        Ok(Self { ages, cells })
    }
}
