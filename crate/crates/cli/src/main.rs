//! `quadflight` command-line tool: run scenarios, compare controllers and
//! recompute tracking reports from saved logs.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use quadflight::metrics::{self, CHANNELS};
use quadflight::sim::{LogParseError, ScenarioLog};
use quadflight::{
    load_scenario, phase_reports, run_scenario, ConfigError, Controller, PhaseReport, Scenario,
    SimError,
};

#[derive(Parser)]
#[command(
    name = "quadflight",
    version,
    about = "Quadrotor flight simulation and tracking-error reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and report tracking errors per phase.
    Run {
        config: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
        /// Overrides the disturbance seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the hybrid and baseline controllers on the same scenario.
    Compare {
        config: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recompute reports from a saved log CSV.
    Metrics {
        log: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(clap::Args)]
struct OutputArgs {
    /// Directory for output files. Nothing is written when omitted from `metrics`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Format of the report printed to stdout.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Log {
        path: PathBuf,
        source: LogParseError,
    },
    #[error("metrics: {0}")]
    Metrics(#[from] metrics::MetricsError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 3,
            CliError::Sim(_) => 4,
            CliError::Io { .. } => 5,
            CliError::Log { .. } | CliError::Metrics(_) => 6,
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(io_error(path))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string())
}

fn render(reports: &[PhaseReport], format: Format) -> String {
    match format {
        Format::Text => metrics::format_table(reports),
        Format::Json => metrics::to_json(reports),
        Format::Csv => metrics::to_csv(reports),
    }
}

fn load(config: &Path, seed: Option<u64>) -> Result<Scenario, CliError> {
    let mut scenario = load_scenario(config)?;
    if let Some(seed) = seed {
        scenario.disturbance.seed = seed;
    }
    Ok(scenario)
}

/// Writes `<prefix>.log.csv`, `<prefix>.report.json` and `<prefix>.report.txt`.
fn write_outputs(
    dir: &Path,
    prefix: &str,
    log: &ScenarioLog,
    reports: &[PhaseReport],
) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    write_file(&dir.join(format!("{prefix}.log.csv")), &log.to_csv())?;
    write_file(
        &dir.join(format!("{prefix}.report.json")),
        &metrics::to_json(reports),
    )?;
    write_file(
        &dir.join(format!("{prefix}.report.txt")),
        &metrics::format_table(reports),
    )
}

fn simulate(scenario: &Scenario) -> Result<(ScenarioLog, Vec<PhaseReport>), CliError> {
    let log = run_scenario(scenario)?;
    let reports = phase_reports(&log)?;
    Ok((log, reports))
}

fn run(config: &Path, output: &OutputArgs, seed: Option<u64>) -> Result<String, CliError> {
    let scenario = load(config, seed)?;
    let (log, reports) = simulate(&scenario)?;
    let dir = output.out.clone().unwrap_or_else(|| PathBuf::from("."));
    write_outputs(&dir, &stem(config), &log, &reports)?;
    Ok(render(&reports, output.format))
}

fn compare(config: &Path, output: &OutputArgs, seed: Option<u64>) -> Result<String, CliError> {
    let scenario = load(config, seed)?;
    let hybrid = scenario.clone().with_controller(Controller::Hybrid);
    let baseline = scenario.with_controller(Controller::BaselinePid);
    let (hybrid, baseline) = std::thread::scope(|s| {
        let worker = s.spawn(|| simulate(&baseline));
        let hybrid = simulate(&hybrid);
        (hybrid, worker.join().expect("baseline worker panicked"))
    });
    let (hybrid_log, hybrid) = hybrid?;
    let (baseline_log, baseline) = baseline?;
    let dir = output.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let name = stem(config);
    write_outputs(&dir, &format!("{name}.hybrid"), &hybrid_log, &hybrid)?;
    write_outputs(&dir, &format!("{name}.baseline"), &baseline_log, &baseline)?;
    Ok(match output.format {
        Format::Text => comparison_table(&hybrid, &baseline),
        Format::Json => {
            let value = serde_json::json!({ "hybrid": hybrid, "baseline": baseline });
            serde_json::to_string_pretty(&value).expect("reports serialize") + "\n"
        }
        Format::Csv => comparison_csv(&hybrid, &baseline),
    })
}

fn percent(p: Option<f64>) -> String {
    p.map(|p| format!("{p:.2}%"))
        .unwrap_or_else(|| "n/a".to_string())
}

fn comparison_table(hybrid: &[PhaseReport], baseline: &[PhaseReport]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<10} {:<8} {:>14} {:>14} {:>10} {:>10}",
        "phase", "channel", "hybrid mean", "baseline mean", "hybrid %", "baseline %"
    )
    .unwrap();
    for (h, b) in hybrid.iter().zip(baseline) {
        for name in CHANNELS {
            let (Some(hm), Some(bm)) = (h.channel(name), b.channel(name)) else {
                continue;
            };
            writeln!(
                out,
                "{:<10} {:<8} {:>14.6e} {:>14.6e} {:>10} {:>10}",
                h.phase,
                name,
                hm.mean,
                bm.mean,
                percent(hm.percentage),
                percent(bm.percentage)
            )
            .unwrap();
        }
    }
    out
}

fn comparison_csv(hybrid: &[PhaseReport], baseline: &[PhaseReport]) -> String {
    let mut out = String::from("controller,");
    let mut first = true;
    for (label, reports) in [("hybrid", hybrid), ("baseline", baseline)] {
        for (i, line) in metrics::to_csv(reports).lines().enumerate() {
            match (i, first) {
                (0, true) => writeln!(out, "{line}").unwrap(),
                (0, false) => {}
                _ => writeln!(out, "{label},{line}").unwrap(),
            }
        }
        first = false;
    }
    out
}

fn recompute(log_path: &Path, output: &OutputArgs) -> Result<String, CliError> {
    let text = fs::read_to_string(log_path).map_err(io_error(log_path))?;
    let log = ScenarioLog::from_csv(&text).map_err(|source| CliError::Log {
        path: log_path.to_path_buf(),
        source,
    })?;
    let reports = phase_reports(&log)?;
    if let Some(dir) = &output.out {
        fs::create_dir_all(dir).map_err(io_error(dir))?;
        let name = stem(log_path);
        let name = name.strip_suffix(".log").unwrap_or(&name);
        write_file(
            &dir.join(format!("{name}.report.json")),
            &metrics::to_json(&reports),
        )?;
        write_file(
            &dir.join(format!("{name}.report.txt")),
            &metrics::format_table(&reports),
        )?;
    }
    Ok(render(&reports, output.format))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            config,
            output,
            seed,
        } => run(config, output, *seed),
        Command::Compare {
            config,
            output,
            seed,
        } => compare(config, output, *seed),
        Command::Metrics { log, output } => recompute(log, output),
    };
    match result {
        Ok(report) => {
            let mut stdout = std::io::stdout().lock();
            if stdout
                .write_all(report.as_bytes())
                .and_then(|_| stdout.flush())
                .is_err()
            {
                return ExitCode::from(5);
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
