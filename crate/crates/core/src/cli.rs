//! Command-line front end.
//!
//! Exit codes: 0 success, 1 oracle failure or runtime error, 2 usage error or
//! invalid configuration value.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::ao_driver::Scheme;
use crate::channel_model::{generate_channels, RNG_NAME};
use crate::config::{read_config, ConfigFile, EffectiveConfig, Overrides, RatioDefault, SEED_ENV};
use crate::error::{RelayError, Result};
use crate::experiments::{emit_results, run_scheme, sweep_distance, sweep_rho, with_threads, GENERATOR};
use crate::oracles::{reports_csv, run_all};
use crate::table::render;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const SINGLE_HEADER: &str = "scheme,rate_exact,rate_highsnr,iterations,converged,lambda_f,lambda_rs_tilde";
pub const ORACLE_FILE: &str = "oracles.csv";

#[derive(Debug, Parser)]
#[command(name = "wpt-relay", version, about = "Energy-flow-assisted MIMO relay rate optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one channel realization and print rates and allocations.
    Single(CommonArgs),
    /// Average rate over the PS-ratio grid at each configured relay position.
    SweepRho(CommonArgs),
    /// Best PS ratio and its rate across relay positions.
    SweepDistance(CommonArgs),
    /// Run the oracle suite against the solvers.
    Validate(CommonArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    P3b,
    P3c,
    Noef,
    All,
}

impl SchemeArg {
    fn schemes(self) -> Vec<Scheme> {
        match self {
            SchemeArg::P3b => vec![Scheme::P3B],
            SchemeArg::P3c => vec![Scheme::P3C],
            SchemeArg::Noef => vec![Scheme::NoEF],
            SchemeArg::All => Scheme::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Configuration file (sectioned TOML).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base seed; falls back to the file, then WPT_RELAY_SEED, then 0.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// PS ratio; pins the ratio grid to this value.
    #[arg(long, value_name = "X", allow_negative_numbers = true)]
    rho: Option<f64>,
    /// d_DR / d_DS; pins the position grid to this value.
    #[arg(long, value_name = "X", allow_negative_numbers = true)]
    ratio: Option<f64>,
    /// Destination (energy flow) budget in watts.
    #[arg(long, value_name = "W", allow_negative_numbers = true)]
    pd: Option<f64>,
    /// Source budget in watts.
    #[arg(long, value_name = "W", allow_negative_numbers = true)]
    ps: Option<f64>,
    #[arg(long, value_name = "N")]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            rho: self.rho,
            ratio: self.ratio,
            p_d: self.pd,
            p_s: self.ps,
            trials: self.trials,
            schemes: self.scheme.map(SchemeArg::schemes),
            threads: self.threads,
            out: self.out.clone(),
        }
    }

    fn resolve(&self, ratio_default: RatioDefault) -> Result<EffectiveConfig> {
        let file = match &self.config {
            Some(p) => read_config(p)?,
            None => ConfigFile::default(),
        };
        let env = std::env::var(SEED_ENV).ok();
        EffectiveConfig::resolve(&file, &self.overrides(), env.as_deref(), ratio_default)
    }
}

fn config_metadata(cfg: &EffectiveConfig) -> Vec<String> {
    let mut out = vec!["config (strip the leading '#   ' to replay with --config):".to_string()];
    out.extend(cfg.to_toml().lines().map(|l| format!("  {l}")));
    out
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn run_single(cfg: &EffectiveConfig) -> Result<String> {
    let channels = generate_channels(&cfg.params, &cfg.geometry, cfg.seed)?;
    let mut rows = Vec::new();
    for &scheme in &cfg.schemes {
        let row = match run_scheme(&channels, &cfg.params, scheme) {
            Ok(res) => vec![
                scheme.to_string(),
                res.rate_exact.to_string(),
                res.rate_highsnr.to_string(),
                res.iterations.to_string(),
                res.converged.to_string(),
                join(&res.allocation.lambda_f),
                join(&res.allocation.lambda_rs_tilde),
            ],
            Err(e) => {
                log::warn!("{scheme}: {e}");
                vec![
                    scheme.to_string(),
                    "NaN".into(),
                    "NaN".into(),
                    "0".into(),
                    "false".into(),
                    String::new(),
                    String::new(),
                ]
            }
        };
        rows.push(row);
    }
    let mut meta = vec![
        format!("generator: {GENERATOR}"),
        "kind: single".to_string(),
        format!("rng: {RNG_NAME}"),
        format!("seed: {}", cfg.seed),
        "rate: bits per channel use".to_string(),
    ];
    meta.extend(config_metadata(cfg));
    Ok(render(&meta, SINGLE_HEADER, rows))
}

enum Outcome {
    Done(String),
    OracleFailure(String),
}

fn execute(command: &Command) -> Result<Outcome> {
    match command {
        Command::Single(args) => {
            let cfg = args.resolve(RatioDefault::Single)?;
            Ok(Outcome::Done(run_single(&cfg)?))
        }
        Command::SweepRho(args) | Command::SweepDistance(args) => {
            let distance = matches!(command, Command::SweepDistance(_));
            let cfg = args.resolve(if distance { RatioDefault::Distance } else { RatioDefault::Single })?;
            let sweep = cfg.sweep();
            let mut result =
                with_threads(cfg.threads, || if distance { sweep_distance(&sweep) } else { sweep_rho(&sweep) })??;
            result.metadata.extend(config_metadata(&cfg));
            let paths = emit_results(&result, &cfg.out)?;
            let mut out = result.best_rho_csv();
            for p in paths {
                let _ = writeln!(out, "# wrote {}", p.display());
            }
            Ok(Outcome::Done(out))
        }
        Command::Validate(args) => {
            let cfg = args.resolve(RatioDefault::Single)?;
            let reports = with_threads(cfg.threads, || run_all(cfg.seed))??;
            let meta =
                vec![format!("generator: {GENERATOR}"), "kind: validate".to_string(), format!("seed: {}", cfg.seed)];
            let csv = reports_csv(&meta, &reports);
            std::fs::create_dir_all(&cfg.out)?;
            std::fs::write(cfg.out.join(ORACLE_FILE), &csv)?;
            if reports.iter().all(|r| r.passed) {
                Ok(Outcome::Done(csv))
            } else {
                Ok(Outcome::OracleFailure(csv))
            }
        }
    }
}

fn is_usage_error(e: &RelayError) -> bool {
    matches!(e, RelayError::InvalidParam { .. } | RelayError::Parse(_))
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Results go to stdout, diagnostics to stderr.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(Outcome::Done(text)) => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            EXIT_OK
        }
        Ok(Outcome::OracleFailure(text)) => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            eprintln!("error: at least one oracle check failed");
            EXIT_FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            if is_usage_error(&e) {
                EXIT_USAGE
            } else {
                EXIT_FAILURE
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bad_rho_is_usage_error() {
        assert_eq!(run_cli(["wpt-relay", "single", "--rho", "1.5"]), EXIT_USAGE);
        assert_eq!(run_cli(["wpt-relay", "single", "--bogus"]), EXIT_USAGE);
        assert_eq!(run_cli(["wpt-relay", "single", "--scheme", "xyz"]), EXIT_USAGE);
        assert_eq!(run_cli(["wpt-relay"]), EXIT_USAGE);
    }

    #[test]
    fn help_exits_cleanly() {
        assert_eq!(run_cli(["wpt-relay", "--help"]), EXIT_OK);
    }

    #[test]
    fn single_is_deterministic() {
        let args = CommonArgs {
            config: None,
            seed: Some(3),
            rho: Some(0.6),
            ratio: None,
            pd: None,
            ps: None,
            trials: None,
            out: None,
            threads: None,
            scheme: Some(SchemeArg::All),
        };
        let cfg = args.resolve(RatioDefault::Single).unwrap();
        let a = run_single(&cfg).unwrap();
        assert_eq!(a, run_single(&cfg).unwrap());
        assert_eq!(a.lines().filter(|l| !l.starts_with('#')).count(), 4);
        assert!(a.contains("  rho = 0.6"));
    }
}
