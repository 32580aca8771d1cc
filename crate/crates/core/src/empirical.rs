//! Claim records to occurrence tables and waiting-time distributions.
//!
//! Ages are integer completed years. Grid index 0 is age 18; ages at or above
//! the cap are pooled into the cap index.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{MatrixKind, TimeGrid, TwoTimeMatrix};

pub const MIN_AGE: u32 = 18;
pub const DEFAULT_IMPUTED_ENTRY_AGE: u32 = 24;
pub const DEFAULT_CAP_AGE: u32 = 60;

/// What to do with a claim at the same integer age as the previous renewal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroDuration {
    /// Keep it and count it as a renewal after one year.
    #[default]
    BucketOne,
    Discard,
}

impl FromStr for ZeroDuration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bucket1" => Ok(ZeroDuration::BucketOne),
            "discard" => Ok(ZeroDuration::Discard),
            other => Err(Error::InvalidArgument(format!(
                "zero-duration policy must be bucket1 or discard, got '{other}'"
            ))),
        }
    }
}

impl fmt::Display for ZeroDuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ZeroDuration::BucketOne => "bucket1",
            ZeroDuration::Discard => "discard",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CleaningConfig {
    pub imputed_entry_age: u32,
    pub cap_age: u32,
    pub zero_duration: ZeroDuration,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        Self {
            imputed_entry_age: DEFAULT_IMPUTED_ENTRY_AGE,
            cap_age: DEFAULT_CAP_AGE,
            zero_duration: ZeroDuration::BucketOne,
        }
    }
}

impl CleaningConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cap_age <= MIN_AGE {
            return Err(Error::InvalidArgument(format!(
                "cap age {} must exceed {MIN_AGE}",
                self.cap_age
            )));
        }
        if self.imputed_entry_age < MIN_AGE {
            return Err(Error::InvalidArgument(format!(
                "imputed entry age {} is below {MIN_AGE}",
                self.imputed_entry_age
            )));
        }
        Ok(())
    }
}

/// One insured person after cleaning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyRecord {
    pub policy_id: String,
    pub entry_age: u32,
    pub entry_imputed: bool,
    /// Retained claim ages, ascending.
    pub claim_ages: Vec<u32>,
}

/// A claim seen as the renewal that ends a waiting period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Renewal {
    /// 1 for the first claim after entry, 2 for the second, ...
    pub ordinal: usize,
    pub from_age: u32,
    pub claim_age: u32,
    /// Waiting time in years; a same-age claim counts as 1.
    pub duration: u32,
}

impl PolicyRecord {
    pub fn renewals(&self) -> impl Iterator<Item = Renewal> + '_ {
        let mut from = self.entry_age;
        self.claim_ages.iter().enumerate().map(move |(i, &age)| {
            let r = Renewal {
                ordinal: i + 1,
                from_age: from,
                claim_age: age,
                duration: (age - from).max(1),
            };
            from = age;
            r
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub policies_read: u64,
    pub policies_rejected_underage: u64,
    pub entries_imputed: u64,
    pub claims_read: u64,
    pub claims_retained: u64,
    pub claims_discarded: u64,
    pub discarded_before_entry: u64,
    pub discarded_before_previous: u64,
    pub discarded_zero_duration: u64,
    pub discarded_rejected_policy: u64,
    pub zero_duration_bucketed: u64,
}

impl IngestReport {
    /// `claims_retained + claims_discarded == claims_read`.
    pub fn is_conserved(&self) -> bool {
        self.claims_retained + self.claims_discarded == self.claims_read
            && self.claims_discarded
                == self.discarded_before_entry
                    + self.discarded_before_previous
                    + self.discarded_zero_duration
                    + self.discarded_rejected_policy
    }
}

impl fmt::Display for IngestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fields = [
            ("policies_read", self.policies_read),
            ("policies_rejected_underage", self.policies_rejected_underage),
            ("entries_imputed", self.entries_imputed),
            ("claims_read", self.claims_read),
            ("claims_retained", self.claims_retained),
            ("claims_discarded", self.claims_discarded),
            ("discarded_before_entry", self.discarded_before_entry),
            ("discarded_before_previous", self.discarded_before_previous),
            ("discarded_zero_duration", self.discarded_zero_duration),
            ("discarded_rejected_policy", self.discarded_rejected_policy),
            ("zero_duration_bucketed", self.zero_duration_bucketed),
        ];
        for (key, value) in fields {
            writeln!(f, "{key}={value}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub records: Vec<PolicyRecord>,
    pub report: IngestReport,
}

/// Reads `policies.csv` and `claims.csv` and applies the cleaning rules.
pub fn ingest(policies_path: &Path, claims_path: &Path, cfg: &CleaningConfig) -> Result<Ingested> {
    let policies = std::fs::File::open(policies_path)?;
    let claims = std::fs::File::open(claims_path)?;
    ingest_readers(policies, policies_path, claims, claims_path, cfg)
}

struct RawPolicy {
    id: String,
    entry_age: Option<u32>,
    underage: bool,
    claims: Vec<u32>,
}

/// Same as [`ingest`] over arbitrary readers; the paths only label errors.
pub fn ingest_readers<P: Read, C: Read>(
    policies: P,
    policies_path: &Path,
    claims: C,
    claims_path: &Path,
    cfg: &CleaningConfig,
) -> Result<Ingested> {
    cfg.validate()?;
    let mut report = IngestReport::default();
    let mut raw: Vec<RawPolicy> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();

    for row in read_rows(policies, policies_path, &["policy_id", "entry_age"])? {
        let (line, fields) = row?;
        let parse_err = |reason: String| Error::Parse {
            path: policies_path.to_path_buf(),
            line,
            reason,
        };
        let id = fields[0].clone();
        if id.is_empty() {
            return Err(parse_err("empty policy_id".into()));
        }
        let entry_age = if fields[1].is_empty() {
            None
        } else {
            let age: i64 = fields[1]
                .parse()
                .map_err(|e| parse_err(format!("bad entry_age '{}': {e}", fields[1])))?;
            if age < 0 {
                return Err(parse_err(format!("negative entry_age {age}")));
            }
            Some(age as u32)
        };
        if by_id.contains_key(&id) {
            return Err(parse_err(format!("duplicate policy_id '{id}'")));
        }
        report.policies_read += 1;
        let underage = entry_age.is_some_and(|a| a < MIN_AGE);
        if underage {
            report.policies_rejected_underage += 1;
        }
        by_id.insert(id.clone(), raw.len());
        raw.push(RawPolicy {
            id,
            entry_age,
            underage,
            claims: Vec::new(),
        });
    }

    for row in read_rows(claims, claims_path, &["policy_id", "claim_age"])? {
        let (line, fields) = row?;
        let idx = *by_id.get(&fields[0]).ok_or_else(|| Error::UnknownPolicy {
            path: claims_path.to_path_buf(),
            line,
            policy_id: fields[0].clone(),
        })?;
        let age: u32 = fields[1].parse().map_err(|e| Error::Parse {
            path: claims_path.to_path_buf(),
            line,
            reason: format!("bad claim_age '{}': {e}", fields[1]),
        })?;
        report.claims_read += 1;
        raw[idx].claims.push(age);
    }

    let mut records = Vec::with_capacity(raw.len());
    for policy in raw {
        if policy.underage {
            report.discarded_rejected_policy += policy.claims.len() as u64;
            continue;
        }
        let (entry_age, entry_imputed) = match policy.entry_age {
            Some(a) => (a, false),
            None => {
                report.entries_imputed += 1;
                (cfg.imputed_entry_age, true)
            }
        };
        let mut retained = Vec::with_capacity(policy.claims.len());
        let mut previous = entry_age;
        for age in policy.claims {
            if age < entry_age {
                report.discarded_before_entry += 1;
            } else if age < previous {
                report.discarded_before_previous += 1;
            } else if age == previous {
                match cfg.zero_duration {
                    ZeroDuration::Discard => report.discarded_zero_duration += 1,
                    ZeroDuration::BucketOne => {
                        report.zero_duration_bucketed += 1;
                        retained.push(age);
                    }
                }
            } else {
                retained.push(age);
                previous = age;
            }
        }
        report.claims_retained += retained.len() as u64;
        records.push(PolicyRecord {
            policy_id: policy.id,
            entry_age,
            entry_imputed,
            claim_ages: retained,
        });
    }
    report.claims_discarded = report.discarded_before_entry
        + report.discarded_before_previous
        + report.discarded_zero_duration
        + report.discarded_rejected_policy;
    debug_assert!(report.is_conserved());
    Ok(Ingested { records, report })
}

type Row = Result<(u64, Vec<String>)>;

fn read_rows<R: Read>(input: R, path: &Path, header: &[&str]) -> Result<Vec<Row>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let found = reader.headers().map_err(|e| csv_error(e, path))?.clone();
    if found.iter().collect::<Vec<_>>() != header {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            reason: format!("expected header '{}'", header.join(",")),
        });
    }
    Ok(reader
        .into_records()
        .map(|rec| {
            let rec = rec.map_err(|e| csv_error(e, path))?;
            let line = rec.position().map_or(0, |p| p.line());
            Ok((line, rec.iter().map(str::to_owned).collect()))
        })
        .collect())
}

fn csv_error(e: csv::Error, path: &Path) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        path: path.to_path_buf(),
        line,
        reason: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transition {
    EntryToFirst,
    FirstToSecond,
    SecondToThird,
    Merged,
}

impl Transition {
    pub const ALL: [Transition; 4] = [
        Transition::EntryToFirst,
        Transition::FirstToSecond,
        Transition::SecondToThird,
        Transition::Merged,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Transition::EntryToFirst => "entry-to-first",
            Transition::FirstToSecond => "first-to-second",
            Transition::SecondToThird => "second-to-third",
            Transition::Merged => "merged",
        }
    }

    fn accepts(self, ordinal: usize) -> bool {
        match self {
            Transition::EntryToFirst => ordinal == 1,
            Transition::FirstToSecond => ordinal == 2,
            Transition::SecondToThird => ordinal == 3,
            Transition::Merged => true,
        }
    }
}

/// Number of renewals at each exact waiting time `i = 1..=T`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DurationHistogram {
    pub source: Transition,
    /// `counts[i - 1] = n(i)`.
    pub counts: Vec<u64>,
}

impl DurationHistogram {
    pub fn from_counts(source: Transition, counts: Vec<u64>) -> Self {
        Self { source, counts }
    }

    /// Longest observed waiting time `T`.
    pub fn horizon(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn count(&self, duration: usize) -> u64 {
        match duration {
            0 => 0,
            i => self.counts.get(i - 1).copied().unwrap_or(0),
        }
    }

    /// `n(i) / sum n`, the probability column of the duration table.
    pub fn probabilities(&self) -> Result<Vec<f64>> {
        let total = self.total();
        if total == 0 {
            return Err(Error::NoRenewals);
        }
        Ok(self
            .counts
            .iter()
            .map(|&c| c as f64 / total as f64)
            .collect())
    }
}

pub fn build_duration_histogram(records: &[PolicyRecord], transition: Transition) -> DurationHistogram {
    let mut counts: Vec<u64> = Vec::new();
    for r in records.iter().flat_map(PolicyRecord::renewals) {
        if !transition.accepts(r.ordinal) {
            continue;
        }
        let d = r.duration as usize;
        if counts.len() < d {
            counts.resize(d, 0);
        }
        counts[d - 1] += 1;
    }
    DurationHistogram::from_counts(transition, counts)
}

/// `F(i) = c(i) / c(T)` with `c` the cumulative counts; `F(0) = 0`.
pub fn histogram_to_df(hist: &DurationHistogram) -> Result<Vec<f64>> {
    let total = hist.total();
    if total == 0 {
        return Err(Error::NoRenewals);
    }
    let mut df = Vec::with_capacity(hist.horizon() + 1);
    df.push(0.0);
    let mut cumulative = 0u64;
    for &c in &hist.counts {
        cumulative += c;
        df.push(cumulative as f64 / total as f64);
    }
    Ok(df)
}

/// Claim counts `n(s, t)` by renewal age `s` and claim age `t`, on the age grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccurrenceTable {
    pub min_age: u32,
    pub cap_age: u32,
    /// Dense `n_ages x n_ages`, row = renewal age index.
    counts: Vec<u64>,
    /// Claims whose renewal and claim ages both pooled into the cap.
    pub dropped_at_cap: u64,
}

impl OccurrenceTable {
    pub fn zeros(cap_age: u32) -> Result<Self> {
        if cap_age <= MIN_AGE {
            return Err(Error::InvalidArgument(format!("cap age {cap_age} must exceed {MIN_AGE}")));
        }
        let n = (cap_age - MIN_AGE + 1) as usize;
        Ok(Self {
            min_age: MIN_AGE,
            cap_age,
            counts: vec![0; n * n],
            dropped_at_cap: 0,
        })
    }

    pub fn n_ages(&self) -> usize {
        (self.cap_age - self.min_age + 1) as usize
    }

    /// Grid index of an age, pooling at the cap. Ages below the minimum map to 0.
    pub fn index_of_age(&self, age: u32) -> usize {
        (age.clamp(self.min_age, self.cap_age) - self.min_age) as usize
    }

    pub fn count(&self, s: usize, t: usize) -> u64 {
        self.counts[s * self.n_ages() + t]
    }

    pub fn row_total(&self, s: usize) -> u64 {
        let n = self.n_ages();
        self.counts[s * n..(s + 1) * n].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn add(&mut self, s: usize, t: usize) {
        let n = self.n_ages();
        self.counts[s * n + t] += 1;
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new(self.min_age as f64, 1.0, self.n_ages()).expect("cap exceeds min age")
    }
}

/// Counts every retained claim at (renewal age, claim age), pooling ages at the cap.
pub fn build_occurrence_table(records: &[PolicyRecord], cap_age: u32) -> Result<OccurrenceTable> {
    let mut table = OccurrenceTable::zeros(cap_age)?;
    for r in records.iter().flat_map(PolicyRecord::renewals) {
        let s = table.index_of_age(r.from_age);
        let t = table.index_of_age(r.from_age + r.duration);
        if t <= s {
            table.dropped_at_cap += 1;
        } else {
            table.add(s, t);
        }
    }
    Ok(table)
}

#[derive(Debug, Clone)]
pub struct NonHomogeneousDf {
    pub df: TwoTimeMatrix,
    /// Rows `s < n - 1` with no observed renewals; their F rows are all zero.
    pub zero_rows: Vec<usize>,
}

/// Row-normalized cumulative occurrences: `F(s, t) = sum_{x<=t} n(s, x) / sum_x n(s, x)`.
pub fn occurrence_to_nh_df(table: &OccurrenceTable) -> NonHomogeneousDf {
    let n = table.n_ages();
    let mut zero_rows = Vec::new();
    let mut rows = Vec::with_capacity(n);
    for s in 0..n {
        let total = table.row_total(s);
        let mut row = Vec::with_capacity(n - s);
        row.push(0.0);
        if total == 0 {
            if s + 1 < n {
                zero_rows.push(s);
            }
            row.resize(n - s, 0.0);
        } else {
            let mut cumulative = 0u64;
            for t in s + 1..n {
                cumulative += table.count(s, t);
                row.push(cumulative as f64 / total as f64);
            }
        }
        rows.push(row);
    }
    let df = TwoTimeMatrix::from_rows(table.grid(), MatrixKind::Distribution, rows)
        .expect("row lengths follow the grid");
    NonHomogeneousDf { df, zero_rows }
}

/// Multiplies row `s` of a distribution by `factors[s]`, turning a proper
/// conditional d.f. into a defective one (e.g. scaled by a claim probability).
pub fn scale_rows(df: &TwoTimeMatrix, factors: &[f64]) -> Result<TwoTimeMatrix> {
    if factors.len() != df.n_points() {
        return Err(Error::InvalidArgument(format!(
            "expected {} row factors, got {}",
            df.n_points(),
            factors.len()
        )));
    }
    if let Some(f) = factors.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::InvalidArgument(format!("row factor {f} outside [0, 1]")));
    }
    Ok(TwoTimeMatrix::from_fn(*df.grid(), MatrixKind::Distribution, |s, t| {
        df.get(s, t) * factors[s]
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgeLabel {
    Exact(u32),
    /// Everything at or above this age.
    Pooled(u32),
    Total,
}

impl fmt::Display for AgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgeLabel::Exact(a) => write!(f, "{a}"),
            AgeLabel::Pooled(a) => write!(f, "≥{a}"),
            AgeLabel::Total => f.write_str("total"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoClaimRow {
    pub label: AgeLabel,
    pub total: u64,
    pub no_claim: u64,
    pub prob_no_claim: f64,
    pub prob_claim: f64,
}

impl NoClaimRow {
    fn new(label: AgeLabel, total: u64, no_claim: u64) -> Self {
        let prob_no_claim = no_claim as f64 / total as f64;
        Self {
            label,
            total,
            no_claim,
            prob_no_claim,
            prob_claim: 1.0 - prob_no_claim,
        }
    }
}

/// Share of policies without any retained claim, by entry age.
///
/// Only policies with a recorded entry age take part; imputed entries carry no
/// information about age at entry. The last rows are the pooled cap row (when
/// present) and the grand total.
pub fn no_claim_table(records: &[PolicyRecord], cap_age: u32) -> Vec<NoClaimRow> {
    let mut by_age: std::collections::BTreeMap<u32, (u64, u64)> = Default::default();
    for r in records.iter().filter(|r| !r.entry_imputed) {
        let e = by_age.entry(r.entry_age.min(cap_age)).or_default();
        e.0 += 1;
        if r.claim_ages.is_empty() {
            e.1 += 1;
        }
    }
    if by_age.is_empty() {
        return Vec::new();
    }
    let mut rows: Vec<NoClaimRow> = by_age
        .iter()
        .map(|(&age, &(total, none))| {
            let label = if age >= cap_age {
                AgeLabel::Pooled(cap_age)
            } else {
                AgeLabel::Exact(age)
            };
            NoClaimRow::new(label, total, none)
        })
        .collect();
    let (total, none) = by_age
        .values()
        .fold((0, 0), |(a, b), &(t, n)| (a + t, b + n));
    rows.push(NoClaimRow::new(AgeLabel::Total, total, none));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ingest_str(policies: &str, claims: &str, cfg: &CleaningConfig) -> Result<Ingested> {
        ingest_readers(
            policies.as_bytes(),
            Path::new("policies.csv"),
            claims.as_bytes(),
            Path::new("claims.csv"),
            cfg,
        )
    }

    fn record(entry: u32, claims: &[u32]) -> PolicyRecord {
        PolicyRecord {
            policy_id: format!("p{entry}"),
            entry_age: entry,
            entry_imputed: false,
            claim_ages: claims.to_vec(),
        }
    }

    #[test]
    fn worked_example_durations() {
        let got = ingest_str(
            "policy_id,entry_age\nA,23\n",
            "policy_id,claim_age\nA,41\nA,50\n",
            &CleaningConfig::default(),
        )
        .unwrap();
        let renewals: Vec<_> = got.records[0].renewals().collect();
        assert_eq!(renewals.len(), 2);
        assert_eq!((renewals[0].from_age, renewals[0].duration), (23, 18));
        assert_eq!((renewals[1].from_age, renewals[1].duration), (41, 9));
    }

    #[test]
    fn claim_before_entry_is_discarded() {
        let got = ingest_str(
            "policy_id,entry_age\nA,24\n",
            "policy_id,claim_age\nA,20\n",
            &CleaningConfig::default(),
        )
        .unwrap();
        assert!(got.records[0].claim_ages.is_empty());
        assert_eq!(got.report.discarded_before_entry, 1);
        assert_eq!(got.report.claims_discarded, 1);
        assert!(got.report.is_conserved());
    }

    #[test]
    fn same_age_claims_bucket_or_discard() {
        let policies = "policy_id,entry_age\nA,30\n";
        let claims = "policy_id,claim_age\nA,30\nA,30\nA,33\n";
        let got = ingest_str(policies, claims, &CleaningConfig::default()).unwrap();
        let durations: Vec<u32> = got.records[0].renewals().map(|r| r.duration).collect();
        assert_eq!(durations, vec![1, 1, 3]);
        assert_eq!(got.report.zero_duration_bucketed, 2);
        assert_eq!(got.report.claims_retained, 3);
        assert!(got.report.is_conserved());

        let cfg = CleaningConfig {
            zero_duration: ZeroDuration::Discard,
            ..Default::default()
        };
        let got = ingest_str(policies, claims, &cfg).unwrap();
        assert_eq!(got.records[0].claim_ages, vec![33]);
        assert_eq!(got.report.discarded_zero_duration, 2);
        assert_eq!(got.report.claims_retained, 1);
        assert!(got.report.is_conserved());
    }

    #[test]
    fn out_of_order_claim_is_discarded() {
        let got = ingest_str(
            "policy_id,entry_age\nA,20\n",
            "policy_id,claim_age\nA,30\nA,25\nA,31\n",
            &CleaningConfig::default(),
        )
        .unwrap();
        assert_eq!(got.records[0].claim_ages, vec![30, 31]);
        assert_eq!(got.report.discarded_before_previous, 1);
    }

    #[test]
    fn missing_entry_imputed_and_underage_rejected() {
        let got = ingest_str(
            "policy_id,entry_age\nA,\nB,17\nC,40\n",
            "policy_id,claim_age\nA,26\nB,19\nC,45\n",
            &CleaningConfig::default(),
        )
        .unwrap();
        assert_eq!(got.records.len(), 2);
        assert_eq!(got.records[0].entry_age, 24);
        assert!(got.records[0].entry_imputed);
        assert_eq!(got.report.entries_imputed, 1);
        assert_eq!(got.report.policies_rejected_underage, 1);
        assert_eq!(got.report.discarded_rejected_policy, 1);
        assert_eq!(got.report.claims_read, 3);
        assert_eq!(got.report.claims_retained, 2);
        assert!(got.report.is_conserved());
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = ingest_str(
            "policy_id,entry_age\nA,23\nB,abc\n",
            "policy_id,claim_age\n",
            &CleaningConfig::default(),
        )
        .unwrap_err();
        match err {
            Error::Parse { line, path, .. } => {
                assert_eq!(line, 3);
                assert_eq!(path, Path::new("policies.csv"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = ingest_str(
            "policy_id,entry_age\nA,23\n",
            "policy_id,claim_age\nA,30\nA\n",
            &CleaningConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn unknown_policy_rejected() {
        let err = ingest_str(
            "policy_id,entry_age\nA,23\n",
            "policy_id,claim_age\nA,30\nZ,31\n",
            &CleaningConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownPolicy { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn wrong_header_rejected() {
        let err = ingest_str("id,age\nA,23\n", "policy_id,claim_age\n", &CleaningConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn report_is_key_value() {
        let got = ingest_str(
            "policy_id,entry_age\nA,23\n",
            "policy_id,claim_age\nA,41\n",
            &CleaningConfig::default(),
        )
        .unwrap();
        let text = got.report.to_string();
        assert!(text.contains("claims_read=1\n"));
        assert!(text.lines().all(|l| l.split_once('=').is_some()));
    }

    #[test]
    fn histograms_by_transition() {
        let records = vec![record(20, &[22, 25, 26]), record(30, &[31, 34])];
        let first = build_duration_histogram(&records, Transition::EntryToFirst);
        assert_eq!(first.counts, vec![1, 1]);
        let second = build_duration_histogram(&records, Transition::FirstToSecond);
        assert_eq!(second.counts, vec![0, 0, 2]);
        let third = build_duration_histogram(&records, Transition::SecondToThird);
        assert_eq!(third.counts, vec![1]);
        let merged = build_duration_histogram(&records, Transition::Merged);
        assert_eq!(merged.total(), 5);
        assert_eq!(build_duration_histogram(&[], Transition::Merged).total(), 0);
    }

    #[test]
    fn histogram_df_is_exactly_proper() {
        let hist = DurationHistogram::from_counts(Transition::Merged, vec![3, 0, 5, 2]);
        let df = histogram_to_df(&hist).unwrap();
        assert_eq!(df, vec![0.0, 0.3, 0.3, 0.8, 1.0]);
        let single = DurationHistogram::from_counts(Transition::Merged, vec![7]);
        assert_eq!(histogram_to_df(&single).unwrap(), vec![0.0, 1.0]);
        let empty = DurationHistogram::from_counts(Transition::Merged, vec![0, 0]);
        assert!(matches!(histogram_to_df(&empty), Err(Error::NoRenewals)));
    }

    #[test]
    fn occurrence_worked_example() {
        let table = build_occurrence_table(&[record(23, &[41, 50])], 60).unwrap();
        assert_eq!(table.count(23 - 18, 41 - 18), 1);
        assert_eq!(table.count(41 - 18, 50 - 18), 1);
        assert_eq!(table.total(), 2);
    }

    #[test]
    fn occurrence_additivity_and_pooling() {
        let one = build_occurrence_table(&[record(23, &[41, 50])], 60).unwrap();
        let two = build_occurrence_table(&[record(23, &[41, 50]), record(23, &[41, 50])], 60).unwrap();
        for s in 0..one.n_ages() {
            for t in 0..one.n_ages() {
                assert_eq!(two.count(s, t), 2 * one.count(s, t));
            }
        }
        let pooled = build_occurrence_table(&[record(55, &[63, 70])], 60).unwrap();
        assert_eq!(pooled.count(55 - 18, 42), 1);
        assert_eq!(pooled.dropped_at_cap, 1);
        assert_eq!(build_occurrence_table(&[], 60).unwrap().total(), 0);
    }

    #[test]
    fn nh_df_normalizes_rows() {
        let mut records = Vec::new();
        for (age, k) in [(58, 10), (59, 30), (60, 60)] {
            for _ in 0..k {
                records.push(record(57, &[age]));
            }
        }
        let nh = occurrence_to_nh_df(&build_occurrence_table(&records, 60).unwrap());
        let row = nh.df.row(57 - 18);
        assert_eq!(row, &[0.0, 0.1, 0.4, 1.0]);
        nh.df.validate().unwrap();
        // every other row is empty
        assert_eq!(nh.zero_rows.len(), 41);
        assert!(nh.df.row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scale_rows_makes_defective() {
        let nh = occurrence_to_nh_df(&build_occurrence_table(&[record(18, &[20])], 20).unwrap());
        let scaled = scale_rows(&nh.df, &[0.25, 1.0, 1.0]).unwrap();
        assert_eq!(scaled.get(0, 2), 0.25);
        assert!(scale_rows(&nh.df, &[0.5]).is_err());
    }

    #[test]
    fn no_claim_rows() {
        let mut records = vec![record(18, &[]), record(18, &[20]), record(18, &[]), record(65, &[])];
        records.push(PolicyRecord {
            entry_imputed: true,
            ..record(24, &[])
        });
        let table = no_claim_table(&records, 60);
        assert_eq!(table.len(), 3);
        assert_eq!(table[0].label, AgeLabel::Exact(18));
        assert_eq!((table[0].total, table[0].no_claim), (3, 2));
        assert_eq!(table[1].label, AgeLabel::Pooled(60));
        assert_eq!(table[2].label, AgeLabel::Total);
        assert_eq!((table[2].total, table[2].no_claim), (4, 3));
        assert!((table[2].prob_claim - 0.25).abs() < 1e-15);
        assert!(no_claim_table(&[], 60).is_empty());
    }
}
