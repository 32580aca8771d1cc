use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use nh_renewal::empirical::{
    build_duration_histogram, build_occurrence_table, histogram_to_df, ingest, no_claim_table,
    occurrence_to_nh_df, CleaningConfig, Transition, ZeroDuration, DEFAULT_CAP_AGE,
    DEFAULT_IMPUTED_ENTRY_AGE,
};
use nh_renewal::report::{duration_df_tsv, duration_table_tsv, no_claim_tsv, MeanClaimsReport};
use nh_renewal::selftest::{run_selftest, SelftestOptions};
use nh_renewal::simulator::{estimate_renewal_function, SimConfig};
use nh_renewal::solver::{solve_with_method, MethodTag};
use nh_renewal::{MatrixKind, TwoTimeMatrix};

#[derive(Parser, Debug)]
#[command(name = "nh-renewal", version, about = "Renewal functions from claim records")]
struct Cli {
    /// TOML file with default option values; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ingest policies and claims and write the waiting-time distributions.
    BuildDf(BuildDfArgs),
    /// Solve the renewal equation for a distribution matrix.
    Solve(SolveArgs),
    /// Estimate the renewal function by Monte Carlo.
    Simulate(SimulateArgs),
    /// Render a renewal matrix as an attained-age by contract-age table.
    Report(ReportArgs),
    /// Run the built-in golden checks.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug)]
struct BuildDfArgs {
    #[arg(long)]
    policies: PathBuf,
    #[arg(long)]
    claims: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Entry age assumed when a policy has none.
    #[arg(long)]
    impute_age: Option<u32>,
    /// Ages at or above this are pooled.
    #[arg(long)]
    cap_age: Option<u32>,
    /// bucket1 or discard.
    #[arg(long)]
    zero_duration: Option<ZeroDuration>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    df: PathBuf,
    /// exact, rect-left, rect-right, trapezoid or simpson.
    #[arg(long)]
    method: Option<MethodTag>,
    /// Quadrature step; a multiple of the grid step. Defaults to the grid step.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    /// Path of the age table; defaults to `<out>` with a `.report.tsv` suffix.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    df: PathBuf,
    #[arg(long)]
    paths: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Start grid index.
    #[arg(long)]
    start: Option<usize>,
    /// Horizon grid index; defaults to the last grid point.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Renewal matrix TSV as written by `solve`.
    #[arg(long)]
    renewal: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SelftestArgs {
    /// Print the tolerance of every check.
    #[arg(long)]
    verbose: bool,
    /// Directory with table3.tsv and table4.tsv replacing the embedded fixtures.
    #[arg(long)]
    fixtures: Option<PathBuf>,
}

/// Optional defaults read from `--config`.
#[derive(Debug, Default)]
struct FileConfig {
    table: toml::Table,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let table = text
            .parse::<toml::Table>()
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(Self { table })
    }

    fn int(&self, key: &str) -> Result<Option<i64>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(v)) => Ok(Some(*v)),
            Some(other) => bail!("config key '{key}' must be an integer, got {other}"),
        }
    }

    fn uint<T: TryFrom<i64>>(&self, key: &str) -> Result<Option<T>> {
        self.int(key)?
            .map(|v| T::try_from(v).map_err(|_| anyhow::anyhow!("config key '{key}' out of range: {v}")))
            .transpose()
    }

    fn float(&self, key: &str) -> Result<Option<f64>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(toml::Value::Float(v)) => Ok(Some(*v)),
            Some(toml::Value::Integer(v)) => Ok(Some(*v as f64)),
            Some(other) => bail!("config key '{key}' must be a number, got {other}"),
        }
    }

    fn parsed<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        match self.table.get(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => s
                .parse()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("config key '{key}': {e}")),
            Some(other) => bail!("config key '{key}' must be a string, got {other}"),
        }
    }
}

/// Writes via a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn warn(msg: impl std::fmt::Display) {
    eprintln!("warning: {msg}");
}

fn cmd_build_df(args: &BuildDfArgs, file: &FileConfig) -> Result<()> {
    let cfg = CleaningConfig {
        imputed_entry_age: match args.impute_age {
            Some(v) => v,
            None => file.uint("impute_age")?.unwrap_or(DEFAULT_IMPUTED_ENTRY_AGE),
        },
        cap_age: match args.cap_age {
            Some(v) => v,
            None => file.uint("cap_age")?.unwrap_or(DEFAULT_CAP_AGE),
        },
        zero_duration: match args.zero_duration {
            Some(v) => v,
            None => file.parsed("zero_duration")?.unwrap_or_default(),
        },
    };
    let ingested = ingest(&args.policies, &args.claims, &cfg)?;
    let records = &ingested.records;
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let out = |name: &str| args.out_dir.join(name);

    write_atomic(&out("ingest_report.txt"), &ingested.report.to_string())?;
    if ingested.report.claims_retained == 0 {
        warn("no claims retained; all distributions are zero");
    }

    let occurrences = build_occurrence_table(records, cfg.cap_age)?;
    if occurrences.dropped_at_cap > 0 {
        warn(format!(
            "{} claims dropped because both ages pool at the cap",
            occurrences.dropped_at_cap
        ));
    }
    let counts = TwoTimeMatrix::from_fn(occurrences.grid(), MatrixKind::Generic, |s, t| {
        occurrences.count(s, t) as f64
    });
    write_atomic(&out("occurrences.tsv"), &counts.to_tsv_string())?;
    let nh = occurrence_to_nh_df(&occurrences);
    if !nh.zero_rows.is_empty() && ingested.report.claims_retained > 0 {
        warn(format!("{} renewal ages have no observed claims", nh.zero_rows.len()));
    }
    write_atomic(&out("nh_df.tsv"), &nh.df.to_tsv_string())?;

    for transition in Transition::ALL {
        let hist = build_duration_histogram(records, transition);
        match histogram_to_df(&hist) {
            Ok(df) => write_atomic(
                &out(&format!("duration_{}.tsv", transition.name())),
                &duration_df_tsv(&hist, &df),
            )?,
            Err(_) => warn(format!("no {} renewals; duration file skipped", transition.name())),
        }
    }
    let left = build_duration_histogram(records, Transition::FirstToSecond);
    let right = build_duration_histogram(records, Transition::SecondToThird);
    write_atomic(&out("table3.tsv"), &duration_table_tsv(&left, &right, "1-2", "2-3"))?;
    let no_claims = no_claim_table(records, cfg.cap_age);
    if no_claims.is_empty() {
        warn("no policies with a recorded entry age; no-claim table is empty");
    }
    write_atomic(&out("table4.tsv"), &no_claim_tsv(&no_claims))?;
    eprint!("{}", ingested.report);
    Ok(())
}

fn default_report_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".report.tsv");
    out.with_file_name(name)
}

fn cmd_solve(args: &SolveArgs, file: &FileConfig) -> Result<()> {
    let df = TwoTimeMatrix::load(&args.df)?;
    let tag = match args.method {
        Some(m) => m,
        None => file.parsed("method")?.unwrap_or(MethodTag::Exact),
    };
    let h = match args.h {
        Some(h) => h,
        None => file.float("h")?.unwrap_or(df.grid().step()),
    };
    let method = tag.with_step(h)?;
    let renewal = solve_with_method(&df, method)?;
    write_atomic(&args.out, &renewal.to_tsv_string())?;
    let report_path = args.report.clone().unwrap_or_else(|| default_report_path(&args.out));
    write_atomic(&report_path, &MeanClaimsReport::from_renewal(&renewal).to_tsv())?;
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs, file: &FileConfig) -> Result<()> {
    let df = TwoTimeMatrix::load(&args.df)?;
    let cfg = SimConfig {
        n_paths: match args.paths {
            Some(v) => v,
            None => file.uint("paths")?.unwrap_or(100_000),
        },
        seed: match args.seed {
            Some(v) => v,
            None => file.uint("seed")?.unwrap_or(0),
        },
        start_idx: match args.start {
            Some(v) => v,
            None => file.uint("start")?.unwrap_or(0),
        },
        horizon_idx: match args.horizon {
            Some(v) => v,
            None => file.uint("horizon")?.unwrap_or(df.grid().last_index()),
        },
    };
    let est = estimate_renewal_function(&df, &cfg)?;
    write_atomic(&args.out, &est.to_tsv_string(&df))?;
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let renewal = TwoTimeMatrix::load(&args.renewal)?;
    write_atomic(&args.out, &MeanClaimsReport::from_renewal(&renewal).to_tsv())?;
    Ok(())
}

fn cmd_selftest(args: &SelftestArgs) -> Result<bool> {
    let opts = SelftestOptions {
        fixtures_dir: args.fixtures.clone(),
        ..Default::default()
    };
    let results = run_selftest(&opts);
    for r in &results {
        println!("{r}");
        if args.verbose {
            println!("\ttolerance: {}", r.tolerance);
        }
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    Ok(failed == 0)
}

fn run(cli: Cli) -> Result<bool> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::BuildDf(a) => cmd_build_df(a, &file)?,
        Command::Solve(a) => cmd_solve(a, &file)?,
        Command::Simulate(a) => cmd_simulate(a, &file)?,
        Command::Report(a) => cmd_report(a)?,
        Command::Selftest(a) => return cmd_selftest(a),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
