//! Published duration and no-claim tables, embedded as golden fixtures, plus
//! synthetic claim records that reproduce their counts.

use std::fmt::Write as _;
use std::path::Path;

use crate::empirical::{AgeLabel, PolicyRecord};
use crate::error::{Error, Result};

pub const TABLE3_TSV: &str = include_str!("../fixtures/table3.tsv");
pub const TABLE4_TSV: &str = include_str!("../fixtures/table4.tsv");

/// Absolute tolerance for reproducing a printed probability.
pub const PRINTED_TOL: f64 = 1e-6;

/// A number as printed in a table, with its number of decimals.
#[derive(Debug, Clone, PartialEq)]
pub struct Printed {
    pub text: String,
    pub value: f64,
    pub decimals: usize,
}

impl Printed {
    fn parse(text: &str) -> std::result::Result<Self, String> {
        let value = text
            .parse::<f64>()
            .map_err(|e| format!("bad number '{text}': {e}"))?;
        let decimals = text.split_once('.').map_or(0, |(_, d)| d.len());
        Ok(Self {
            text: text.to_owned(),
            value,
            decimals,
        })
    }

    /// Whether `computed` reproduces this value: within [`PRINTED_TOL`], or, for
    /// values printed with fewer than six decimals, equal after rounding to the
    /// printed precision.
    pub fn check(&self, computed: f64) -> Reproduction {
        if (computed - self.value).abs() <= PRINTED_TOL {
            Reproduction::WithinTolerance
        } else if self.decimals < 6 && format!("{computed:.*}", self.decimals) == self.text {
            Reproduction::AtPrintedPrecision
        } else {
            Reproduction::Mismatch
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reproduction {
    WithinTolerance,
    AtPrintedPrecision,
    Mismatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DurationRow {
    pub years: usize,
    pub first_second: u64,
    pub second_third: u64,
    pub prob_first_second: Printed,
    pub prob_second_third: Printed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DurationTable {
    pub rows: Vec<DurationRow>,
    pub total_first_second: u64,
    pub total_second_third: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoClaimFixtureRow {
    pub label: AgeLabel,
    pub total: u64,
    pub no_claim: u64,
    pub prob_no_claim: Printed,
    pub prob_claim: Printed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoClaimFixture {
    /// Per-age rows followed by the pooled row; the grand total is separate.
    pub rows: Vec<NoClaimFixtureRow>,
    pub total: NoClaimFixtureRow,
}

fn fixture_err(name: &str, line: usize, reason: String) -> Error {
    Error::Parse {
        path: name.into(),
        line: line as u64,
        reason,
    }
}

fn split_fields<'a>(name: &str, line_no: usize, line: &'a str, n: usize) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
    if fields.len() != n {
        return Err(fixture_err(name, line_no, format!("expected {n} fields, got {}", fields.len())));
    }
    Ok(fields)
}

fn parse_count(name: &str, line_no: usize, text: &str) -> Result<u64> {
    text.parse()
        .map_err(|e| fixture_err(name, line_no, format!("bad count '{text}': {e}")))
}

pub fn parse_duration_table(text: &str) -> Result<DurationTable> {
    const NAME: &str = "table3.tsv";
    let mut rows = Vec::new();
    let mut totals = None;
    for (i, line) in text.lines().enumerate().skip(1) {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f = split_fields(NAME, line_no, line, 5)?;
        if f[0] == "Total" {
            totals = Some((parse_count(NAME, line_no, f[1])?, parse_count(NAME, line_no, f[2])?));
            continue;
        }
        let printed = |s: &str| Printed::parse(s).map_err(|r| fixture_err(NAME, line_no, r));
        rows.push(DurationRow {
            years: parse_count(NAME, line_no, f[0])? as usize,
            first_second: parse_count(NAME, line_no, f[1])?,
            second_third: parse_count(NAME, line_no, f[2])?,
            prob_first_second: printed(f[3])?,
            prob_second_third: printed(f[4])?,
        });
    }
    let (total_first_second, total_second_third) =
        totals.ok_or_else(|| fixture_err(NAME, 0, "missing Total row".into()))?;
    Ok(DurationTable {
        rows,
        total_first_second,
        total_second_third,
    })
}

pub fn parse_no_claim_table(text: &str) -> Result<NoClaimFixture> {
    const NAME: &str = "table4.tsv";
    let mut rows = Vec::new();
    let mut total = None;
    for (i, line) in text.lines().enumerate().skip(1) {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f = split_fields(NAME, line_no, line, 5)?;
        let label = if f[0] == "total" {
            AgeLabel::Total
        } else if let Some(age) = f[0].strip_prefix('≥') {
            AgeLabel::Pooled(parse_count(NAME, line_no, age)? as u32)
        } else {
            AgeLabel::Exact(parse_count(NAME, line_no, f[0])? as u32)
        };
        let printed = |s: &str| Printed::parse(s).map_err(|r| fixture_err(NAME, line_no, r));
        let row = NoClaimFixtureRow {
            label,
            total: parse_count(NAME, line_no, f[1])?,
            no_claim: parse_count(NAME, line_no, f[2])?,
            prob_no_claim: printed(f[3])?,
            prob_claim: printed(f[4])?,
        };
        if row.no_claim > row.total {
            return Err(fixture_err(NAME, line_no, "no-claim count exceeds total".into()));
        }
        if label == AgeLabel::Total {
            total = Some(row);
        } else {
            rows.push(row);
        }
    }
    let total = total.ok_or_else(|| fixture_err(NAME, 0, "missing total row".into()))?;
    Ok(NoClaimFixture { rows, total })
}

/// Both golden tables, either embedded or loaded from a directory holding
/// `table3.tsv` and `table4.tsv`.
#[derive(Debug, Clone)]
pub struct Fixtures {
    pub durations: DurationTable,
    pub no_claims: NoClaimFixture,
}

impl Fixtures {
    pub fn embedded() -> Result<Self> {
        Ok(Self {
            durations: parse_duration_table(TABLE3_TSV)?,
            no_claims: parse_no_claim_table(TABLE4_TSV)?,
        })
    }

    pub fn from_dir(dir: &Path) -> Result<Self> {
        let durations = std::fs::read_to_string(dir.join("table3.tsv"))?;
        let no_claims = std::fs::read_to_string(dir.join("table4.tsv"))?;
        Ok(Self {
            durations: parse_duration_table(&durations)?,
            no_claims: parse_no_claim_table(&no_claims)?,
        })
    }
}

/// Records whose first-to-second and second-to-third waiting times reproduce
/// the duration table's counts. Everyone enters at 24 and first claims at 25.
pub fn duration_table_records(table: &DurationTable) -> Vec<PolicyRecord> {
    let mut records = Vec::new();
    for row in &table.rows {
        for _ in 0..row.first_second {
            records.push(PolicyRecord {
                policy_id: format!("d{}", records.len()),
                entry_age: 24,
                entry_imputed: false,
                claim_ages: vec![25, 25 + row.years as u32],
            });
        }
    }
    let mut next = 0;
    for row in &table.rows {
        for _ in 0..row.second_third {
            if let Some(r) = records.get_mut(next) {
                let second = r.claim_ages[1];
                r.claim_ages.push(second + row.years as u32);
            }
            next += 1;
        }
    }
    records
}

/// Records reproducing the no-claim counts per entry age. Pooled-row entries are
/// spread over ten ages from the cap upwards.
pub fn no_claim_records(table: &NoClaimFixture) -> Vec<PolicyRecord> {
    let mut records = Vec::new();
    for row in &table.rows {
        for i in 0..row.total {
            let entry_age = match row.label {
                AgeLabel::Exact(a) => a,
                AgeLabel::Pooled(a) => a + (i % 10) as u32,
                AgeLabel::Total => continue,
            };
            let claim_ages = if i < row.total - row.no_claim {
                vec![entry_age + 1]
            } else {
                Vec::new()
            };
            records.push(PolicyRecord {
                policy_id: format!("n{}", records.len()),
                entry_age,
                entry_imputed: false,
                claim_ages,
            });
        }
    }
    records
}

/// `policies.csv` and `claims.csv` contents for a set of records.
pub fn records_to_csv(records: &[PolicyRecord]) -> (String, String) {
    let mut policies = String::from("policy_id,entry_age\n");
    let mut claims = String::from("policy_id,claim_age\n");
    for r in records {
        if r.entry_imputed {
            let _ = writeln!(policies, "{},", r.policy_id);
        } else {
            let _ = writeln!(policies, "{},{}", r.policy_id, r.entry_age);
        }
        for age in &r.claim_ages {
            let _ = writeln!(claims, "{},{age}", r.policy_id);
        }
    }
    (policies, claims)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_tables_parse() {
        let f = Fixtures::embedded().unwrap();
        assert_eq!(f.durations.rows.len(), 37);
        assert_eq!(f.durations.total_first_second, 8228);
        assert_eq!(f.durations.total_second_third, 1578);
        let sum: u64 = f.durations.rows.iter().map(|r| r.first_second).sum();
        assert_eq!(sum, 8228);
        assert_eq!(f.no_claims.rows.len(), 43);
        assert_eq!(f.no_claims.rows.last().unwrap().label, AgeLabel::Pooled(60));
        assert_eq!(f.no_claims.total.total, 60384);
        let sum: u64 = f.no_claims.rows.iter().map(|r| r.total).sum();
        assert_eq!(sum, 60384);
    }

    #[test]
    fn printed_precision() {
        let p = Printed::parse("0.72984").unwrap();
        assert_eq!(p.decimals, 5);
        assert_eq!(p.check(181.0 / 248.0), Reproduction::AtPrintedPrecision);
        assert_eq!(p.check(0.7298404), Reproduction::WithinTolerance);
        assert_eq!(p.check(0.7299), Reproduction::Mismatch);
        let six = Printed::parse("0.849462").unwrap();
        assert_eq!(six.check(0.8494634), Reproduction::Mismatch);
    }

    #[test]
    fn synthetic_records_match_counts() {
        let f = Fixtures::embedded().unwrap();
        let d = duration_table_records(&f.durations);
        assert_eq!(d.len(), 8228);
        assert_eq!(d.iter().filter(|r| r.claim_ages.len() == 3).count(), 1578);
        let n = no_claim_records(&f.no_claims);
        assert_eq!(n.len(), 60384);
        assert_eq!(n.iter().filter(|r| r.claim_ages.is_empty()).count(), 46265);
    }

    #[test]
    fn csv_rendering() {
        let records = vec![
            PolicyRecord {
                policy_id: "a".into(),
                entry_age: 30,
                entry_imputed: false,
                claim_ages: vec![31, 35],
            },
            PolicyRecord {
                policy_id: "b".into(),
                entry_age: 24,
                entry_imputed: true,
                claim_ages: vec![],
            },
        ];
        let (p, c) = records_to_csv(&records);
        assert_eq!(p, "policy_id,entry_age\na,30\nb,\n");
        assert_eq!(c, "policy_id,claim_age\na,31\na,35\n");
    }
}
