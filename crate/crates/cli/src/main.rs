use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::LevelFilter;

use nsv_core::io::{parse_config, resume, run, RunConfig, RunOutcome};
use nsv_core::verify::{verify, VerifySetup};

/// Exit status when the acceptance suite ran but some criterion failed.
const CRITERIA_FAILED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "nsv-sim", version, about = "2D Navier-Stokes-Vlasov simulator")]
struct Cli {
    /// Log verbosity.
    #[arg(long, value_enum, default_value_t = LogLevel::Info, global = true)]
    log_level: LogLevel,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a configuration from its initial data.
    Run {
        config: PathBuf,
        /// Overrides `output.directory`.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Continue a run from a snapshot.
    Resume {
        snapshot: PathBuf,
        /// Final time of the continued run.
        #[arg(long)]
        until: f64,
        /// Defaults to the directory stored in the snapshot's config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run the acceptance scenarios around a configuration and write
    /// `verify_report.txt`.
    Verify {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Print the fully expanded default configuration.
    Defaults,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LogLevel {
    Off,
    Error,
    Warn,
    Info,
    Debug,
    Trace,
}

impl From<LogLevel> for LevelFilter {
    fn from(l: LogLevel) -> Self {
        match l {
            LogLevel::Off => LevelFilter::Off,
            LogLevel::Error => LevelFilter::Error,
            LogLevel::Warn => LevelFilter::Warn,
            LogLevel::Info => LevelFilter::Info,
            LogLevel::Debug => LevelFilter::Debug,
            LogLevel::Trace => LevelFilter::Trace,
        }
    }
}

fn load(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

fn summary(out: &RunOutcome) {
    println!(
        "t = {:.6} after {} windows; diagnostics in {}",
        out.state.time(),
        out.windows,
        out.csv.display()
    );
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, output_dir } => {
            let mut cfg = load(&config)?;
            if let Some(d) = &output_dir {
                cfg.output.directory = d.to_string_lossy().into_owned();
            }
            let dir = PathBuf::from(&cfg.output.directory);
            summary(&run(&cfg, &dir)?);
        }
        Command::Resume {
            snapshot,
            until,
            output_dir,
        } => {
            let out = resume(&snapshot, until, output_dir.as_deref())
                .with_context(|| format!("resuming {}", snapshot.display()))?;
            summary(&out);
        }
        Command::Verify { config, output_dir } => {
            let cfg = load(&config)?;
            let dir = output_dir.unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
            fs::create_dir_all(&dir)?;
            let report = verify(&VerifySetup::from_config(&cfg), &dir.join("verify_runs"))?;
            let text = report.render();
            let path = dir.join("verify_report.txt");
            fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
            print!("{text}");
            println!("report written to {}", path.display());
            if !report.passed() {
                return Ok(ExitCode::from(CRITERIA_FAILED));
            }
        }
        Command::Defaults => print!("{}", RunConfig::default_document()),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.log_level.into())
        .format_timestamp(None)
        .init();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
