use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use distorted_balance::prelude::*;
use distorted_balance::scenario::ConditionCheck;
use distorted_balance::stationary::{beta_form_label, REPORT_CSV_HEADER};

use crate::config::{ConfigError, ConfigFile};

pub const EXIT_IO: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "distorted-balance", version, about = "Three-level atom in a non-equilibrium polarized field")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output path; overrides the matching [output] entry.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Txt)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the rate equations and write the trajectory CSV.
    Simulate(CommonArgs),
    /// Stationary populations, emission rate and balance class.
    Stationary(CommonArgs),
    /// Evaluate the emission condition only.
    Check(CommonArgs),
    /// Stationary reports over a parameter grid.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Worker threads for grid points (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Txt,
}

/// A failure with its process exit code and a short machine-readable kind.
#[derive(Debug)]
pub struct CliError {
    pub exit_code: u8,
    pub kind: String,
    pub message: String,
}

impl CliError {
    /// `error kind=<kind> exit=<code> message="<text>"`
    pub fn line(&self) -> String {
        format!(
            "error kind={} exit={} message=\"{}\"",
            self.kind,
            self.exit_code,
            self.message.replace('"', "'")
        )
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        let exit_code = match e.class() {
            FailureClass::Validation => EXIT_VALIDATION,
            FailureClass::Numerical => EXIT_NUMERICAL,
        };
        CliError {
            exit_code,
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Scenario(s) => s.into(),
            ConfigError::Read { .. } => CliError {
                exit_code: EXIT_VALIDATION,
                kind: "config-read".into(),
                message: e.to_string(),
            },
            ConfigError::Parse(_) => CliError {
                exit_code: EXIT_VALIDATION,
                kind: "config-parse".into(),
                message: e.to_string(),
            },
            ConfigError::Invalid(_) => CliError {
                exit_code: EXIT_VALIDATION,
                kind: "invalid-config".into(),
                message: e.to_string(),
            },
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError {
        exit_code: EXIT_IO,
        kind: "io".into(),
        message: format!("{}: {e}", path.display()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_error(path, e))
}

/// Writes `body` to `path` if given, otherwise to `stdout`.
fn emit(path: Option<&Path>, body: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let mut f = create(p)?;
            f.write_all(body.as_bytes()).map_err(|e| io_error(p, e))?;
            f.flush().map_err(|e| io_error(p, e))
        }
        None => stdout
            .write_all(body.as_bytes())
            .map_err(|e| io_error(Path::new("<stdout>"), e)),
    }
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(args) => simulate(args, stdout),
        Command::Stationary(args) => stationary(args, stdout),
        Command::Check(args) => check(args, stdout),
        Command::Sweep { common, workers } => sweep(common, *workers, stdout),
    }
}

fn simulate(args: &CommonArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = ConfigFile::load(&args.config)?;
    let scenario = cfg.scenario()?;
    let sim = scenario.simulate()?;
    let path = args
        .out
        .clone()
        .or(cfg.output.trajectory.clone())
        .unwrap_or_else(|| PathBuf::from("trajectory.csv"));
    let mut f = create(&path)?;
    sim.trajectory
        .write_csv(&mut f)
        .map_err(|e| io_error(&path, e))?;
    f.flush().map_err(|e| io_error(&path, e))?;

    let mut summary = format!("trajectory={}\n", path.display());
    summary.push_str(&sim.summary.to_key_value());
    let body = match args.format {
        Format::Txt => summary,
        Format::Csv => key_value_to_csv(&summary),
    };
    emit(None, &body, stdout)
}

fn stationary(args: &CommonArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = ConfigFile::load(&args.config)?;
    let report = cfg.scenario()?.stationary()?;
    let body = match args.format {
        Format::Txt => report.to_key_value(),
        Format::Csv => csv_block(&REPORT_CSV_HEADER, &report.csv_fields()),
    };
    let path = args.out.clone().or(cfg.output.stationary.clone());
    emit(path.as_deref(), &body, stdout)
}

fn check(args: &CommonArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = ConfigFile::load(&args.config)?;
    let c: ConditionCheck = cfg.scenario()?.check()?;
    let body = match args.format {
        Format::Txt => c.to_key_value(),
        Format::Csv => csv_block(
            &["condition_rate_form", "condition_beta_form"],
            &[c.rate_form.to_string(), beta_form_label(c.beta_form).to_string()],
        ),
    };
    emit(args.out.as_deref(), &body, stdout)
}

fn sweep(args: &CommonArgs, workers: Option<usize>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = ConfigFile::load(&args.config)?;
    let spec = cfg.sweep_spec()?;
    let table = run_sweep(&spec, workers);
    let failed = table.rows.iter().filter(|r| r.outcome.is_err()).count();
    if failed > 0 {
        log::warn!("{failed} of {} grid points failed; see the error column", table.rows.len());
    }
    let mut buf = Vec::new();
    table
        .write_csv(&mut buf)
        .map_err(|e| io_error(Path::new("<sweep>"), e))?;
    let body = String::from_utf8(buf).expect("csv output is utf-8");
    let path = args.out.clone().or(cfg.output.sweep.clone());
    emit(path.as_deref(), &body, stdout)
}

fn csv_block<S: AsRef<str>>(header: &[&str], row: &[S]) -> String {
    let row: Vec<&str> = row.iter().map(|s| s.as_ref()).collect();
    format!("{}\n{}\n", header.join(","), row.join(","))
}

fn key_value_to_csv(kv: &str) -> String {
    let (keys, values): (Vec<&str>, Vec<String>) = kv
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| {
            let v = if v.contains(',') || v.contains(' ') {
                format!("\"{v}\"")
            } else {
                v.to_string()
            };
            (k, v)
        })
        .unzip();
    csv_block(&keys, &values)
}

pub fn main_with_args(args: impl IntoIterator<Item = std::ffi::OsString>) -> u8 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match run(&cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit_code
        }
    }
}
