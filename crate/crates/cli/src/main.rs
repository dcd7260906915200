//! `lps`: runs the verification suites from `lps-core` and emits their
//! reports.
//!
//! Exit codes: 0 when every record passes, 1 when an invariant check fails
//! (the first failing record is serialized to stderr), 2 for usage or
//! configuration problems. Reports are deterministic for a fixed
//! configuration up to the single `timestamp` header field; CSV outputs
//! carry no timestamp at all.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use lps_core::littlewood_paley::KernelMatrix;
use lps_core::suites::{
    axioms_suite, bg_suite, closed_form_suite, equivalence_suite, gamma_suite, growth_suite,
    kernel_suite, nc_suite, sandwich_suite, AxiomsConfig, BgConfig, ClosedFormConfig,
    EquivalenceConfig, GammaConfig, GrowthConfig, KernelConfig, NcConfig, SandwichConfig,
    SuiteError, SuiteReport,
};

#[derive(Debug, Error)]
enum CliError {
    #[error("config file {0}: {1}")]
    Config(String, String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Suite(#[from] SuiteError),
    #[error("write failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Parser, Debug)]
#[command(
    name = "lps",
    version,
    about = "Verifies square-function and subordinated-semigroup inequalities"
)]
struct Cli {
    /// Flat key=value config file; command line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Generator seed shared by all randomized suites.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Filtration depth (atoms = 2^depth); also the kernel size for
    /// emit-kernel and the search depth for constants.
    #[arg(long, global = true)]
    depth: Option<usize>,

    /// Number of random inputs per suite.
    #[arg(long, global = true)]
    samples: Option<usize>,

    /// Comma separated exponent list, e.g. --p 2,4,8.
    #[arg(long, global = true, value_delimiter = ',')]
    p: Option<Vec<f64>>,

    /// Comma separated q list for the subordination construction.
    #[arg(long, global = true, value_delimiter = ',')]
    q: Option<Vec<f64>>,

    /// Scale of the slowest subordination time.
    #[arg(long = "m-scale", global = true)]
    m_scale: Option<f64>,

    /// Comma separated tensor factor dimensions, e.g. --factor-dims 2,2,2,2.
    #[arg(long = "factor-dims", global = true, value_delimiter = ',')]
    factor_dims: Option<Vec<usize>>,

    /// Evaluation budget for the extremal ratio search.
    #[arg(long, global = true)]
    budget: Option<u64>,

    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,

    /// Output path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Clone, Copy, Debug)]
enum Command {
    /// Pointwise sandwich bounds, kernel spectrum, closed form against
    /// quadrature.
    VerifyTheoremA,
    /// Contraction, positivity, semigroup law, selfadjointness, strong
    /// continuity.
    VerifySemigroup,
    /// Incomplete-gamma subordination data and the vector-valued
    /// g-function equivalence.
    VerifyGamma,
    /// Operator-order square function bounds on tracial matrix algebras.
    VerifyNc,
    /// Square-function L_p constants and growth of the extremal ratio.
    Constants,
    /// Print one subordination kernel with its Gershgorin summary.
    EmitKernel,
}

impl Command {
    fn parse_token(s: &str) -> Option<Command> {
        match s {
            "verify-theorem-a" => Some(Command::VerifyTheoremA),
            "verify-semigroup" => Some(Command::VerifySemigroup),
            "verify-gamma" => Some(Command::VerifyGamma),
            "verify-nc" => Some(Command::VerifyNc),
            "constants" => Some(Command::Constants),
            "emit-kernel" => Some(Command::EmitKernel),
            _ => None,
        }
    }

    fn token(self) -> &'static str {
        match self {
            Command::VerifyTheoremA => "verify-theorem-a",
            Command::VerifySemigroup => "verify-semigroup",
            Command::VerifyGamma => "verify-gamma",
            Command::VerifyNc => "verify-nc",
            Command::Constants => "constants",
            Command::EmitKernel => "emit-kernel",
        }
    }
}

/// Settings after merging the config file under the flags.
#[derive(Debug)]
struct Effective {
    command: Command,
    seed: Option<u64>,
    depth: Option<usize>,
    samples: Option<usize>,
    p_list: Option<Vec<f64>>,
    q_list: Option<Vec<f64>>,
    m_scale: Option<f64>,
    factor_dims: Option<Vec<usize>>,
    budget: Option<u64>,
    format: OutputFormat,
    out: Option<PathBuf>,
}

fn parse_list<T: std::str::FromStr>(key: &str, raw: &str) -> Result<Vec<T>, CliError> {
    raw.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<T>()
                .map_err(|_| CliError::Usage(format!("config key {key}: bad entry {tok:?}")))
        })
        .collect()
}

fn parse_scalar<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, CliError> {
    raw.trim()
        .parse::<T>()
        .map_err(|_| CliError::Usage(format!("config key {key}: bad value {raw:?}")))
}

fn load_config(path: &PathBuf) -> Result<BTreeMap<String, String>, CliError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(name.clone(), e.to_string()))?;
    let mut map = BTreeMap::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(
                name,
                format!("line {}: expected key=value", ln + 1),
            ));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn resolve(cli: Cli) -> Result<Effective, CliError> {
    let file = match &cli.config {
        Some(path) => load_config(path)?,
        None => BTreeMap::new(),
    };

    let mut command = cli.command;
    let mut seed = cli.seed;
    let mut depth = cli.depth;
    let mut samples = cli.samples;
    let mut p_list = cli.p;
    let mut q_list = cli.q;
    let mut m_scale = cli.m_scale;
    let mut factor_dims = cli.factor_dims;
    let mut budget = cli.budget;
    let mut format = cli.format;
    let mut out = cli.out;

    for (key, value) in file {
        match key.as_str() {
            "command" => {
                if command.is_none() {
                    command = Some(Command::parse_token(&value).ok_or_else(|| {
                        CliError::Usage(format!("config key command: unknown command {value:?}"))
                    })?);
                }
            }
            "seed" => {
                if seed.is_none() {
                    seed = Some(parse_scalar(&key, &value)?);
                }
            }
            "depth" => {
                if depth.is_none() {
                    depth = Some(parse_scalar(&key, &value)?);
                }
            }
            "samples" => {
                if samples.is_none() {
                    samples = Some(parse_scalar(&key, &value)?);
                }
            }
            "p_list" => {
                if p_list.is_none() {
                    p_list = Some(parse_list(&key, &value)?);
                }
            }
            "q" => {
                if q_list.is_none() {
                    q_list = Some(parse_list(&key, &value)?);
                }
            }
            "M" => {
                if m_scale.is_none() {
                    m_scale = Some(parse_scalar(&key, &value)?);
                }
            }
            "factor_dims" => {
                if factor_dims.is_none() {
                    factor_dims = Some(parse_list(&key, &value)?);
                }
            }
            "budget" => {
                if budget.is_none() {
                    budget = Some(parse_scalar(&key, &value)?);
                }
            }
            "format" => {
                if format.is_none() {
                    format = Some(match value.as_str() {
                        "json" => OutputFormat::Json,
                        "csv" => OutputFormat::Csv,
                        other => {
                            return Err(CliError::Usage(format!(
                                "config key format: expected json or csv, got {other:?}"
                            )))
                        }
                    });
                }
            }
            "output_path" => {
                if out.is_none() {
                    out = Some(PathBuf::from(value));
                }
            }
            other => {
                return Err(CliError::Usage(format!("config file: unknown key {other:?}")));
            }
        }
    }

    let command = command
        .ok_or_else(|| CliError::Usage("no command given on the command line or in the config".into()))?;
    Ok(Effective {
        command,
        seed,
        depth,
        samples,
        p_list,
        q_list,
        m_scale,
        factor_dims,
        budget,
        format: format.unwrap_or(OutputFormat::Json),
        out,
    })
}

#[derive(Serialize)]
struct RunReport {
    command: String,
    /// Seconds since the Unix epoch; the only field that varies between
    /// identical runs.
    timestamp: u64,
    seed: u64,
    pass: bool,
    suites: Vec<SuiteReport>,
}

fn now_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn csv_quote(field: &str) -> String {
    format!("\"{}\"", field.replace('"', "\"\""))
}

fn records_csv(suites: &[SuiteReport]) -> String {
    let mut out = String::from("suite,check,label,pass,worst,tolerance\n");
    for s in suites {
        for r in &s.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                s.suite,
                r.check,
                csv_quote(&r.label),
                r.pass,
                r.worst,
                r.tolerance
            );
        }
    }
    out
}

fn emit(eff: &Effective, text: &str) -> Result<(), CliError> {
    match &eff.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Applies the shared overrides to each suite's own defaults, runs the
/// suites of the selected command in order, and emits the report.
fn run(eff: &Effective) -> Result<ExitCode, CliError> {
    if matches!(eff.command, Command::EmitKernel) {
        return emit_kernel(eff);
    }

    let mut suites: Vec<SuiteReport> = Vec::new();
    let mut growth_csv: Option<String> = None;

    match eff.command {
        Command::VerifyTheoremA => {
            let mut sw = SandwichConfig::default();
            if let Some(v) = eff.seed {
                sw.seed = v;
            }
            if let Some(v) = eff.depth {
                sw.depth = v;
            }
            if let Some(v) = eff.samples {
                sw.samples = v;
            }
            suites.push(sandwich_suite(&sw)?);

            let mut ke = KernelConfig::default();
            if let Some(v) = eff.depth {
                ke.max_size = v.max(1);
            }
            suites.push(kernel_suite(&ke)?);

            let mut cf = ClosedFormConfig::default();
            if let Some(v) = eff.seed {
                cf.seed = v;
            }
            if let Some(v) = eff.depth {
                cf.max_depth = v.clamp(cf.min_depth, 14);
            }
            if let Some(v) = eff.samples {
                cf.samples = v;
            }
            suites.push(closed_form_suite(&cf)?);
        }
        Command::VerifySemigroup => {
            let mut ax = AxiomsConfig::default();
            if let Some(v) = eff.seed {
                ax.seed = v;
            }
            if let Some(v) = eff.depth {
                ax.depth = v;
            }
            if let Some(v) = eff.samples {
                ax.samples = v;
            }
            suites.push(axioms_suite(&ax)?);
        }
        Command::VerifyGamma => {
            let mut ga = GammaConfig::default();
            if let Some(v) = eff.q_list.clone() {
                ga.q_list = v;
            }
            if let Some(v) = eff.depth {
                ga.depth = v;
            }
            if let Some(v) = eff.m_scale {
                ga.m_scale = v;
            }
            suites.push(gamma_suite(&ga)?);

            let mut eq = EquivalenceConfig::default();
            if let Some(v) = eff.seed {
                eq.seed = v;
            }
            if let Some(v) = eff.samples {
                eq.samples = v;
            }
            if let Some(v) = eff.q_list.clone() {
                eq.q_list = v;
            }
            if let Some(v) = eff.depth {
                eq.max_depth = v.clamp(eq.min_depth, 12);
            }
            if let Some(v) = eff.m_scale {
                eq.m_scale = v;
            }
            suites.push(equivalence_suite(&eq)?);
        }
        Command::VerifyNc => {
            let mut nc = NcConfig::default();
            if let Some(v) = eff.seed {
                nc.seed = v;
            }
            if let Some(v) = eff.samples {
                nc.samples = v;
            }
            if let Some(v) = eff.factor_dims.clone() {
                nc.factor_dims = v;
            }
            suites.push(nc_suite(&nc)?);
        }
        Command::Constants => {
            let mut bg = BgConfig::default();
            if let Some(v) = eff.seed {
                bg.seed = v;
            }
            if let Some(v) = eff.samples {
                bg.samples = v;
            }
            if let Some(v) = eff.p_list.clone() {
                bg.p_list = v;
            }
            if let Some(v) = eff.depth {
                bg.max_depth = v.clamp(bg.min_depth, 14);
            }
            suites.push(bg_suite(&bg)?);

            let mut gr = GrowthConfig::default();
            if let Some(v) = eff.seed {
                gr.seed = v;
            }
            if let Some(v) = eff.budget {
                gr.budget = v;
            }
            if let Some(v) = eff.depth {
                gr.depth = v;
            }
            if let Some(v) = eff.p_list.clone() {
                gr.p_list = v.into_iter().filter(|&p| p >= 2.0).collect();
                if gr.p_list.is_empty() {
                    return Err(CliError::Usage(
                        "the ratio search needs at least one exponent p >= 2".into(),
                    ));
                }
            }
            let out = growth_suite(&gr)?;
            growth_csv = out.table.as_ref().map(|t| t.to_csv_string());
            suites.push(out.report);
        }
        Command::EmitKernel => unreachable!("handled above"),
    }

    let pass = suites.iter().all(|s| s.pass());
    let failing = suites
        .iter()
        .find_map(|s| s.first_failure())
        .map(serde_json::to_string)
        .transpose()?;
    let text = match eff.format {
        OutputFormat::Json => {
            let report = RunReport {
                command: eff.command.token().to_string(),
                timestamp: now_secs(),
                seed: eff.seed.unwrap_or_else(|| {
                    suites.first().map(|s| s.seed).unwrap_or(0)
                }),
                pass,
                suites,
            };
            let mut s = serde_json::to_string_pretty(&report)?;
            s.push('\n');
            s
        }
        OutputFormat::Csv => match growth_csv {
            // for the constants command the growth table is the artifact
            Some(table) => table,
            None => records_csv(&suites),
        },
    };
    emit(eff, &text)?;

    match failing {
        None => Ok(ExitCode::SUCCESS),
        Some(record) => {
            // surface the first failing record on stderr for scripting
            eprintln!("failing record: {record}");
            Ok(ExitCode::from(1))
        }
    }
}

fn emit_kernel(eff: &Effective) -> Result<ExitCode, CliError> {
    let size = eff.depth.unwrap_or(50).max(1);
    let kernel = KernelMatrix::<f64>::power16(size).map_err(SuiteError::from)?;
    let (glo, ghi) = kernel.gershgorin_bounds();
    let (emin, emax) = kernel.eigen_range().map_err(SuiteError::from)?;

    let text = match eff.format {
        OutputFormat::Json => {
            let mut rows = Vec::with_capacity(size);
            for i in 0..size {
                rows.push((0..size).map(|j| kernel.entry(i, j)).collect::<Vec<f64>>());
            }
            let value = serde_json::json!({
                "check": "kernel_spectrum",
                "size": size,
                "diagonal": 0.25,
                "gershgorin": [glo, ghi],
                "eigen_range": [emin, emax],
                "matrix": rows,
            });
            let mut s = serde_json::to_string_pretty(&value)?;
            s.push('\n');
            s
        }
        OutputFormat::Csv => {
            let mut s = String::new();
            for i in 0..size {
                let row: Vec<String> =
                    (0..size).map(|j| kernel.entry(i, j).to_string()).collect();
                let _ = writeln!(s, "{}", row.join(","));
            }
            // keep stdout pure CSV; the summary goes to stderr
            eprintln!(
                "kernel size {size}: gershgorin [{glo}, {ghi}], eigenvalues [{emin}, {emax}]"
            );
            s
        }
    };
    emit(eff, &text)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let eff = match resolve(cli) {
        Ok(eff) => eff,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&eff) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
