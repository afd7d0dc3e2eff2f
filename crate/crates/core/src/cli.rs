//! The `pcmeta` command line.
//!
//! Exit codes: 0 success, 2 input or validation error, 3 numeric
//! non-convergence. Errors go to stderr (as JSON under `--json`); stdout only
//! carries results.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::combiners::{fisher_exact_2x2_with, CombinerSpec, TwoSidedConvention};
use crate::counterexample::{power_grid_2d, Test2D};
use crate::dataset;
use crate::error::{Error, Result};
use crate::io::{
    fmt_sig6, read_study_records, records_to_groups, records_to_pvalues, records_to_weights, write_csv_rows,
    PcCurveReport, StudyRecord,
};
use crate::numerics::ProbValue;
use crate::oracle::{mc_validity, tpm_mc_cdf, NullConfig, MIN_TPM_REPS, MIN_VALIDITY_REPS};
use crate::partial_conjunction::{pc_curve, PcMethod, SubsetRule, DEFAULT_ENUMERATION_BUDGET};
use crate::simulation::{linspace, run_power_map, SimConfig};

/// Seed used when neither `--seed` nor `PCMETA_SEED` is given.
pub const DEFAULT_SEED: u64 = 20_240_517;

#[derive(Debug, Parser)]
#[command(name = "pcmeta", version, about = "Partial-conjunction p-values and replicability analysis")]
pub struct Cli {
    /// Worker threads for simulations (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Seed for every random draw.
    #[arg(long, global = true, env = "PCMETA_SEED")]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Combine all study p-values into one.
    Combine(CombineArgs),
    /// Partial-conjunction p-values for one r or the whole curve.
    Pc(PcArgs),
    /// Two-sided Fisher exact test for each count row.
    Exact2x2(Exact2x2Args),
    /// Power map over (mu0, sigma0) from a JSON config.
    Simulate(SimulateArgs),
    /// Power of the n = r = 2 tests phi, phi' and phi~ over (mu1, mu2).
    Counterexample(CounterexampleArgs),
    /// Monte Carlo checks.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Bundled {
    Pvalues,
    Counts,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Study CSV; `-` reads stdin.
    #[arg(required_unless_present = "bundled", conflicts_with = "bundled")]
    pub input: Option<PathBuf>,

    /// Use the bundled 18-subgroup dataset instead of a file.
    #[arg(long, value_enum, num_args = 0..=1, default_missing_value = "pvalues")]
    pub bundled: Option<Bundled>,
}

impl InputArgs {
    fn records(&self) -> Result<Vec<StudyRecord>> {
        match (self.bundled, &self.input) {
            (Some(Bundled::Pvalues), _) => dataset::pvalue_records(),
            (Some(Bundled::Counts), _) => dataset::count_records(),
            (None, Some(path)) if path.as_os_str() == "-" => {
                let mut text = String::new();
                io::stdin().read_to_string(&mut text)?;
                read_study_records(text.as_bytes())
            }
            (None, Some(path)) => read_study_records(File::open(path)?),
            (None, None) => Err(Error::invalid("no input given")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Fisher,
    Simes,
    Bonferroni,
    Stouffer,
    Tpm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightsFrom {
    NSample,
}

#[derive(Debug, Args)]
pub struct CombinerArgs {
    #[arg(long, value_enum, default_value = "fisher")]
    pub method: MethodArg,

    /// Truncation threshold for `tpm`.
    #[arg(long, default_value_t = 0.05)]
    pub gamma: f64,

    /// Stouffer weights `sqrt(n_sample) / sigma`; equal weights otherwise.
    #[arg(long, value_enum)]
    pub weights_from: Option<WeightsFrom>,
}

impl CombinerArgs {
    fn spec(&self, records: &[StudyRecord]) -> Result<CombinerSpec> {
        if self.weights_from.is_some() && self.method != MethodArg::Stouffer {
            return Err(Error::invalid("--weights-from only applies to --method stouffer"));
        }
        let spec = match self.method {
            MethodArg::Fisher => CombinerSpec::Fisher,
            MethodArg::Simes => CombinerSpec::Simes,
            MethodArg::Bonferroni => CombinerSpec::Bonferroni,
            MethodArg::Tpm => CombinerSpec::tpm(self.gamma)?,
            MethodArg::Stouffer => {
                let weights = match self.weights_from {
                    Some(WeightsFrom::NSample) => records_to_weights(records)?,
                    None => vec![1.0; records.len()],
                };
                CombinerSpec::stouffer(weights)?
            }
        };
        Ok(spec)
    }
}

#[derive(Debug, Args)]
pub struct CombineArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub combiner: CombinerArgs,
    /// Emit JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct PcArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub combiner: CombinerArgs,

    /// Single order to test.
    #[arg(long, conflicts_with = "all_r", required_unless_present = "all_r")]
    pub r: Option<usize>,

    /// Every order r = 1..n.
    #[arg(long)]
    pub all_r: bool,

    /// Structured GBHPC over the `group_factor` blocks.
    #[arg(long)]
    pub groups: bool,

    /// Force exhaustive subset enumeration.
    #[arg(long)]
    pub enumerate: bool,

    /// Subset budget for enumeration.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_BUDGET)]
    pub budget: u128,

    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,

    /// Same as `--format json`.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    MinLikelihood,
    DoubledTail,
}

#[derive(Debug, Args)]
pub struct Exact2x2Args {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "min-likelihood")]
    pub convention: ConventionArg,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON config; every field is optional.
    pub config: PathBuf,
    /// Output CSV; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CounterexampleArgs {
    #[arg(long, default_value_t = 0.2)]
    pub alpha: f64,
    /// Grid points per axis over [0, mu_max].
    #[arg(long, default_value_t = 21)]
    pub grid: usize,
    #[arg(long, default_value_t = 4.0)]
    pub mu_max: f64,
    #[arg(long, default_value_t = 20_000)]
    pub reps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    /// Rejection rate of a PC p-value at the boundary of `H_0^{r/n}`.
    Validity(ValidityArgs),
    /// Truncated product distribution: closed form against simulation.
    Tpm(TpmArgs),
}

#[derive(Debug, Args)]
pub struct ValidityArgs {
    #[arg(long, value_enum, default_value = "fisher")]
    pub method: MethodArg,
    #[arg(long, default_value_t = 0.05)]
    pub gamma: f64,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub r: usize,
    /// z-mean of the `r - 1` non-null studies (two-sided p-values).
    #[arg(long, default_value_t = 6.0)]
    pub nonnull_mean: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05")]
    pub alpha: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub reps: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct TpmArgs {
    #[arg(long)]
    pub l: usize,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub w: f64,
    #[arg(long, default_value_t = MIN_TPM_REPS)]
    pub reps: usize,
    #[arg(long)]
    pub json: bool,
}

impl Cli {
    fn wants_json(&self) -> bool {
        match &self.command {
            Command::Combine(a) => a.json,
            Command::Pc(a) => a.json || a.format == Format::Json,
            Command::Exact2x2(a) => a.json,
            Command::Oracle(OracleCommand::Validity(a)) => a.json,
            Command::Oracle(OracleCommand::Tpm(a)) => a.json,
            _ => false,
        }
    }
}

/// Parses `args`, runs the command, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let mut out = BufWriter::new(io::stdout());
    let result = run(&cli, &mut out).and_then(|()| out.flush().map_err(Error::from));
    match result {
        Ok(()) => 0,
        Err(e) => {
            if cli.wants_json() {
                let body = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
                eprintln!("{body}");
            } else {
                eprintln!("error: {e}");
            }
            e.exit_code()
        }
    }
}

/// Runs a parsed command, writing results to `out`.
pub fn run<W: Write + Send>(cli: &Cli, out: &mut W) -> Result<()> {
    match cli.threads {
        Some(0) => Err(Error::invalid("--threads must be at least 1")),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
            pool.install(|| dispatch(cli, out))
        }
        None => dispatch(cli, out),
    }
}

fn dispatch<W: Write>(cli: &Cli, out: &mut W) -> Result<()> {
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    match &cli.command {
        Command::Combine(a) => cmd_combine(a, out),
        Command::Pc(a) => cmd_pc(a, out),
        Command::Exact2x2(a) => cmd_exact2x2(a, out),
        Command::Simulate(a) => cmd_simulate(a, cli.seed, out),
        Command::Counterexample(a) => cmd_counterexample(a, seed, out),
        Command::Oracle(OracleCommand::Validity(a)) => cmd_validity(a, seed, out),
        Command::Oracle(OracleCommand::Tpm(a)) => cmd_tpm(a, seed, out),
    }
}

fn write_json<W: Write, T: Serialize>(out: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn write_rows_to<W: Write, T: Serialize>(path: Option<&Path>, out: &mut W, rows: &[T]) -> Result<()> {
    match path {
        Some(p) => {
            let mut file = BufWriter::new(File::create(p)?);
            write_csv_rows(&mut file, rows)?;
            file.flush()?;
            Ok(())
        }
        None => write_csv_rows(out, rows),
    }
}

#[derive(Serialize)]
struct CombineReport {
    method: String,
    n: usize,
    p: f64,
    log_p: f64,
}

fn cmd_combine<W: Write>(a: &CombineArgs, out: &mut W) -> Result<()> {
    let records = a.input.records()?;
    let p = records_to_pvalues(&records)?;
    let spec = a.combiner.spec(&records)?;
    let value = spec.combine(&p)?;
    let report = CombineReport { method: spec.name(), n: p.len(), p: value.linear(), log_p: value.ln() };
    if a.json {
        write_json(out, &report)
    } else {
        writeln!(out, "method\tn\tp\tlog_p")?;
        writeln!(out, "{}\t{}\t{}\t{}", report.method, report.n, fmt_sig6(report.p), fmt_sig6(report.log_p))?;
        Ok(())
    }
}

fn pc_method(a: &PcArgs, records: &[StudyRecord]) -> Result<PcMethod> {
    if a.groups {
        if a.combiner.method != MethodArg::Fisher {
            return Err(Error::invalid("--groups uses Fisher within blocks; drop --method or pass fisher"));
        }
        let groups = records_to_groups(records)?;
        return Ok(if a.enumerate {
            PcMethod::Enumerate { rule: SubsetRule::Structured(groups), budget: a.budget }
        } else {
            PcMethod::StructuredGbhpc(groups)
        });
    }
    let spec = a.combiner.spec(records)?;
    // index-bound weights make Stouffer non-symmetric; only enumeration is valid
    Ok(if a.enumerate || !spec.is_symmetric() {
        PcMethod::Enumerate { rule: SubsetRule::Combiner(spec), budget: a.budget }
    } else {
        PcMethod::Bhpc(spec)
    })
}

#[derive(Serialize)]
struct SingleReport {
    method: String,
    n: usize,
    r: usize,
    p: f64,
    log_p: f64,
    alpha: f64,
    rejected: bool,
}

fn cmd_pc<W: Write>(a: &PcArgs, out: &mut W) -> Result<()> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {} outside (0, 1)", a.alpha)));
    }
    let records = a.input.records()?;
    let p = records_to_pvalues(&records)?;
    let method = pc_method(a, &records)?;
    let format = if a.json { Format::Json } else { a.format };

    if let Some(r) = a.r {
        if r == 0 || r > p.len() {
            return Err(Error::invalid(format!("r = {r} outside 1..={}", p.len())));
        }
        let value = method.p_value(&p, r)?;
        let report = SingleReport {
            method: method.describe(),
            n: p.len(),
            r,
            p: value.linear(),
            log_p: value.ln(),
            alpha: a.alpha,
            rejected: value.linear() <= a.alpha,
        };
        return match format {
            Format::Json => write_json(out, &report),
            Format::Csv => write_csv_rows(out, &[report]),
            Format::Table => {
                writeln!(out, "r\tp\tlog_p")?;
                writeln!(out, "{r}\t{}\t{}", fmt_sig6(report.p), fmt_sig6(report.log_p))?;
                Ok(())
            }
        };
    }

    let curve = pc_curve(&p, &method, a.alpha)?;
    let report = PcCurveReport::from(&curve);
    match format {
        Format::Json => write_json(out, &report),
        Format::Csv => {
            write_csv_rows(&mut *out, &report.entries)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            Ok(())
        }
        Format::Table => {
            writeln!(out, "# method: {}", report.method)?;
            writeln!(out, "r\tp\tlog_p")?;
            for e in &report.entries {
                writeln!(out, "{}\t{}\t{}", e.r, fmt_sig6(e.p), fmt_sig6(e.log_p))?;
            }
            let set = report.confidence_set.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
            writeln!(out, "# rejected r at alpha {}: {{{set}}}", report.alpha)?;
            writeln!(out, "# r_hat = {}: {}", report.r_hat, curve.interpretation())?;
            for w in &report.warnings {
                writeln!(out, "# warning: {w}")?;
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct ExactRow {
    study_id: String,
    odds_ratio: f64,
    p: f64,
    log_p: f64,
}

fn cmd_exact2x2<W: Write>(a: &Exact2x2Args, out: &mut W) -> Result<()> {
    let convention = match a.convention {
        ConventionArg::MinLikelihood => TwoSidedConvention::MinLikelihood,
        ConventionArg::DoubledTail => TwoSidedConvention::DoubledTail,
    };
    let records = match a.input.bundled {
        Some(_) => dataset::count_records()?,
        None => a.input.records()?,
    };
    let rows = records
        .iter()
        .map(|r| {
            let table = r.counts()?.ok_or_else(|| Error::invalid(format!("study {} has no counts", r.study_id)))?;
            let res = fisher_exact_2x2_with(&table, convention)?;
            Ok(ExactRow {
                study_id: r.study_id.clone(),
                odds_ratio: res.odds_ratio,
                p: res.p_two_sided.linear(),
                log_p: res.p_two_sided.ln(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if a.json {
        write_json(out, &rows)
    } else {
        write_csv_rows(out, &rows)
    }
}

fn cmd_simulate<W: Write>(a: &SimulateArgs, seed: Option<u64>, out: &mut W) -> Result<()> {
    let text = std::fs::read_to_string(&a.config)?;
    let mut cfg = SimConfig::from_json(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let grid = run_power_map(&cfg)?;
    write_rows_to(a.out.as_deref(), out, &grid.rows)
}

fn cmd_counterexample<W: Write>(a: &CounterexampleArgs, seed: u64, out: &mut W) -> Result<()> {
    if a.grid == 0 || !(a.mu_max.is_finite() && a.mu_max >= 0.0) {
        return Err(Error::invalid("--grid must be positive and --mu-max nonnegative"));
    }
    let mu = linspace(0.0, a.mu_max, a.grid);
    let rows = power_grid_2d(&Test2D::ALL, &mu, a.alpha, a.reps, seed)?;
    write_rows_to(a.out.as_deref(), out, &rows)
}

fn cmd_validity<W: Write>(a: &ValidityArgs, seed: u64, out: &mut W) -> Result<()> {
    if a.reps < MIN_VALIDITY_REPS {
        return Err(Error::invalid(format!("--reps must be at least {MIN_VALIDITY_REPS}")));
    }
    let null = NullConfig::boundary(a.n, a.r, a.nonnull_mean)?;
    let spec = match a.method {
        MethodArg::Fisher => CombinerSpec::Fisher,
        MethodArg::Simes => CombinerSpec::Simes,
        MethodArg::Bonferroni => CombinerSpec::Bonferroni,
        MethodArg::Tpm => CombinerSpec::tpm(a.gamma)?,
        MethodArg::Stouffer => CombinerSpec::stouffer(vec![1.0; a.n])?,
    };
    let method = if spec.is_symmetric() {
        PcMethod::Bhpc(spec)
    } else {
        PcMethod::Enumerate { rule: SubsetRule::Combiner(spec), budget: DEFAULT_ENUMERATION_BUDGET }
    };
    let r = a.r;
    let rates = mc_validity(|p: &[ProbValue]| method.p_value(p, r), &null, &a.alpha, a.reps, seed)?;
    if a.json {
        write_json(out, &rates)
    } else {
        write_csv_rows(out, &rates)
    }
}

#[derive(Serialize)]
struct TpmReport {
    l: usize,
    gamma: f64,
    w: f64,
    closed_form: f64,
    mc_estimate: f64,
    mc_se: f64,
    z: f64,
}

fn cmd_tpm<W: Write>(a: &TpmArgs, seed: u64, out: &mut W) -> Result<()> {
    let mc = tpm_mc_cdf(a.l, a.gamma, a.w, a.reps, seed)?;
    let exact = crate::combiners::tpm_cdf(a.l, a.gamma, ProbValue::new(a.w)?)?.linear();
    let report = TpmReport {
        l: a.l,
        gamma: a.gamma,
        w: a.w,
        closed_form: exact,
        mc_estimate: mc.estimate,
        mc_se: mc.se,
        z: mc.z_distance(exact),
    };
    if a.json {
        write_json(out, &report)
    } else {
        write_csv_rows(out, &[report])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> Result<String> {
        let cli = Cli::try_parse_from(args).map_err(|e| Error::invalid(e.to_string()))?;
        let mut buf = Vec::new();
        run(&cli, &mut buf)?;
        Ok(String::from_utf8(buf).unwrap())
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn combine_bundled() {
        let text = run_str(&["pcmeta", "combine", "--bundled", "--json"]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["n"], 18);
    }

    #[test]
    fn groups_reject_other_methods() {
        assert!(run_str(&["pcmeta", "pc", "--bundled", "--all-r", "--groups", "--method", "simes"]).is_err());
    }
}
