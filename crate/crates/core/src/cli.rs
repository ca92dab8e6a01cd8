//! Command-line front end.
//!
//! Every command builds its full output in memory and writes it only after
//! all validation succeeded, so a failing run leaves no files behind.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{chsh_s, chsh_settings_deg, fit_fringe, pair_visibility, ChshEntry, FringeFit, FringeKind};
use crate::apparatus::{build_source, ApparatusConfig};
use crate::detection::{scan_angle, scan_delta_l_counts, simulate_settings, AnalyzerSetting};
use crate::io::{chsh_table_to_csv, read_chsh_csv, read_scan_csv, source_dump, to_pretty_json, FORMAT_VERSION};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_BAD_INPUT: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NO_CONVERGENCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "polconv",
    version,
    about = "Two-slit SPDC polarization-entanglement simulator"
)]
pub struct Cli {
    /// Apparatus configuration (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Base seed; required by the stochastic commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dump the output pair state and its cross factor as JSON.
    Prepare,
    /// Simulated coincidence counts versus path-length difference (um).
    ScanDl(ScanDlArgs),
    /// Simulated coincidence counts versus the A-side analyzer angle.
    ScanAngle(ScanAngleArgs),
    /// Sixteen-setting Bell test.
    Chsh(ChshArgs),
    /// Fit a scan CSV and report its visibility.
    Fit(FitArgs),
}

#[derive(Debug, Args)]
pub struct ScanDlArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub min: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub max: f64,
    #[arg(long)]
    pub steps: usize,
    #[arg(long, default_value_t = 45.0, allow_hyphen_values = true)]
    pub theta_a_deg: f64,
    #[arg(long, default_value_t = 45.0, allow_hyphen_values = true)]
    pub theta_b_deg: f64,
    /// Integration time per point, seconds.
    #[arg(long, default_value_t = 1.0)]
    pub duration: f64,
}

#[derive(Debug, Args)]
pub struct ScanAngleArgs {
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub min: f64,
    #[arg(long, default_value_t = 180.0, allow_hyphen_values = true)]
    pub max: f64,
    #[arg(long, default_value_t = 37)]
    pub steps: usize,
    #[arg(long, default_value_t = 45.0, allow_hyphen_values = true)]
    pub theta_b_fixed_deg: f64,
    #[arg(long, default_value_t = 1.0)]
    pub duration: f64,
}

#[derive(Debug, Args)]
pub struct ChshArgs {
    /// Integration time per setting, seconds.
    #[arg(long, default_value_t = 10.0)]
    pub duration: f64,
    /// Analyze an existing 16-row count table instead of simulating.
    #[arg(long)]
    pub counts: Option<PathBuf>,
    /// Where to write the raw count table; next to `--out` by default.
    #[arg(long)]
    pub counts_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FitKind {
    Angle,
    Dl,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub kind: FitKind,
    /// Scan CSV written by `scan-angle` or `scan-dl`.
    #[arg(long)]
    pub input: PathBuf,
    /// Destructive partner of a constructive `dl` scan.
    #[arg(long)]
    pub paired: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    BadInput(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    NoConvergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::BadInput(_) => EXIT_BAD_INPUT,
            CliError::Io(_) => EXIT_IO,
            CliError::NoConvergence(_) => EXIT_NO_CONVERGENCE,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) => CliError::Io(e.to_string()),
            Error::NonConvergence { .. } => CliError::NoConvergence(e.to_string()),
            Error::Csv(ref inner) if inner.is_io_error() => CliError::Io(e.to_string()),
            _ => CliError::BadInput(e.to_string()),
        }
    }
}

/// A file to be written once the command has succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub path: Option<PathBuf>,
    pub contents: String,
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> Result<ApparatusConfig, CliError> {
    match path {
        None => Ok(ApparatusConfig::default()),
        Some(p) => {
            let text = read_text(p)?;
            Ok(ApparatusConfig::from_json_str(&text)?)
        }
    }
}

fn require_seed(seed: Option<u64>, command: &str) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::BadInput(format!("`{command}` is stochastic and needs --seed")))
}

fn linspace(min: f64, max: f64, steps: usize) -> Result<Vec<f64>, CliError> {
    if steps < 2 {
        return Err(CliError::BadInput(format!("--steps must be at least 2, got {steps}")));
    }
    if !min.is_finite() || !max.is_finite() || max <= min {
        return Err(CliError::BadInput(format!("invalid range [{min}, {max}]")));
    }
    let step = (max - min) / (steps - 1) as f64;
    Ok((0..steps).map(|i| min + step * i as f64).collect())
}

fn default_counts_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.counts.csv"))
}

#[derive(serde::Serialize)]
struct FitReport<'a> {
    format_version: u32,
    kind: FringeKind,
    fit: &'a FringeFit,
    #[serde(skip_serializing_if = "Option::is_none")]
    paired: Option<FringeFit>,
    visibility: f64,
}

/// Runs a parsed command and returns the artifacts it would write.
pub fn execute(cli: &Cli) -> Result<Vec<Artifact>, CliError> {
    let cfg = load_config(cli.config.as_deref())?;
    let out = cli.out.clone();
    match &cli.command {
        Command::Prepare => {
            let src = build_source(&cfg)?;
            Ok(vec![Artifact {
                path: out,
                contents: to_pretty_json(&source_dump(&src))?,
            }])
        }
        Command::ScanDl(args) => {
            let seed = require_seed(cli.seed, "scan-dl")?;
            let xs = linspace(args.min, args.max, args.steps)?;
            let table = scan_delta_l_counts(
                &cfg,
                &xs,
                args.theta_a_deg.to_radians(),
                args.theta_b_deg.to_radians(),
                args.duration,
                seed,
            )?;
            Ok(vec![Artifact {
                path: out,
                contents: table.to_csv(),
            }])
        }
        Command::ScanAngle(args) => {
            let seed = require_seed(cli.seed, "scan-angle")?;
            let xs: Vec<f64> = linspace(args.min, args.max, args.steps)?
                .into_iter()
                .map(f64::to_radians)
                .collect();
            let src = build_source(&cfg)?;
            let table = scan_angle(
                &src,
                args.theta_b_fixed_deg.to_radians(),
                &xs,
                cfg.pair_rate,
                args.duration,
                seed,
            )?;
            Ok(vec![Artifact {
                path: out,
                contents: table.to_csv(),
            }])
        }
        Command::Chsh(args) => {
            let mut artifacts = Vec::new();
            let table = match &args.counts {
                Some(path) => read_chsh_csv(&read_text(path)?)?,
                None => {
                    let seed = require_seed(cli.seed, "chsh")?;
                    let src = build_source(&cfg)?;
                    let angles = chsh_settings_deg();
                    let settings: Vec<AnalyzerSetting> = angles
                        .iter()
                        .map(|&(a, b)| AnalyzerSetting::from_degrees(a, b))
                        .collect();
                    let records = simulate_settings(&src, &settings, cfg.pair_rate, args.duration, seed)?;
                    let table: Vec<ChshEntry> = angles
                        .iter()
                        .zip(&records)
                        .map(|(&(a, b), r)| ChshEntry {
                            theta_a_deg: a,
                            theta_b_deg: b,
                            coincidences: r.coincidences as f64,
                            duration_s: r.duration,
                        })
                        .collect();
                    let counts_path = args
                        .counts_out
                        .clone()
                        .or_else(|| out.as_deref().map(default_counts_path));
                    artifacts.push(Artifact {
                        path: counts_path,
                        contents: chsh_table_to_csv(&table),
                    });
                    table
                }
            };
            let result = chsh_s(&table)?;
            artifacts.insert(
                0,
                Artifact {
                    path: out,
                    contents: to_pretty_json(&result)?,
                },
            );
            Ok(artifacts)
        }
        Command::Fit(args) => {
            let scan = read_scan_csv(&read_text(&args.input)?)?;
            let expected = match args.kind {
                FitKind::Angle => FringeKind::AngleScan,
                FitKind::Dl => FringeKind::DlScan,
            };
            if scan.kind != expected {
                return Err(CliError::BadInput(format!(
                    "--kind {:?} does not match the scan file ({:?})",
                    args.kind, scan.kind
                )));
            }
            let fit = fit_fringe(&scan)?;
            let paired = match &args.paired {
                Some(path) => {
                    if expected != FringeKind::DlScan {
                        return Err(CliError::BadInput("--paired only applies to dl fits".into()));
                    }
                    let other = read_scan_csv(&read_text(path)?)?;
                    Some(fit_fringe(&other)?)
                }
                None => None,
            };
            let visibility = match &paired {
                Some(d) => pair_visibility(&fit, d),
                None => fit.visibility,
            };
            let report = FitReport {
                format_version: FORMAT_VERSION,
                kind: fit.kind,
                fit: &fit,
                paired,
                visibility,
            };
            Ok(vec![Artifact {
                path: out,
                contents: to_pretty_json(&report)?,
            }])
        }
    }
}

fn write_artifacts(artifacts: &[Artifact]) -> Result<(), CliError> {
    let paths: Vec<&PathBuf> = artifacts.iter().filter_map(|a| a.path.as_ref()).collect();
    for (i, p) in paths.iter().enumerate() {
        if paths[..i].contains(p) {
            return Err(CliError::BadInput(format!("output path {} used twice", p.display())));
        }
    }
    for a in artifacts {
        match &a.path {
            Some(p) => std::fs::write(p, &a.contents).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
            None => print!("{}", a.contents),
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_BAD_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli).and_then(|a| write_artifacts(&a)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("polconv: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("polconv").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn prepare_ideal_to_stdout_artifact() {
        let a = execute(&parse(&["prepare"])).unwrap();
        assert_eq!(a.len(), 1);
        assert!(a[0].path.is_none());
        assert!(a[0].contents.contains("\"H.Aout|V.Bout\""));
    }

    #[test]
    fn stochastic_commands_need_seed() {
        let err = execute(&parse(&["scan-dl", "--min", "-100", "--max", "100", "--steps", "5"])).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_BAD_INPUT);
        let err = execute(&parse(&["chsh"])).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_BAD_INPUT);
    }

    #[test]
    fn steps_below_two_rejected() {
        let err = execute(&parse(&[
            "--seed", "1", "scan-dl", "--min", "-1", "--max", "1", "--steps", "1",
        ]))
        .unwrap_err();
        assert_eq!(err.exit_code(), EXIT_BAD_INPUT);
        let err = execute(&parse(&[
            "--seed", "1", "scan-dl", "--min", "1", "--max", "-1", "--steps", "3",
        ]))
        .unwrap_err();
        assert_eq!(err.exit_code(), EXIT_BAD_INPUT);
    }

    #[test]
    fn chsh_counts_path_defaults_next_to_out() {
        assert_eq!(
            default_counts_path(Path::new("/tmp/run/bell.json")),
            PathBuf::from("/tmp/run/bell.counts.csv")
        );
    }

    #[test]
    fn missing_config_is_io_error() {
        let err = execute(&parse(&["--config", "/nonexistent/cfg.json", "prepare"])).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_IO);
    }

    #[test]
    fn error_mapping() {
        assert_eq!(
            CliError::from(Error::NonConvergence { iterations: 100 }).exit_code(),
            EXIT_NO_CONVERGENCE
        );
        assert_eq!(CliError::from(Error::ZeroState).exit_code(), EXIT_BAD_INPUT);
    }
}
