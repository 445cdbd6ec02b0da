use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gmtbench::ingest::{parse_gistemp, DEFAULT_COLUMN};
use gmtbench::runner::{eda, run_grid, write_outputs, ExperimentConfig, SetupError};

const EXIT_CONFIG: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "gmtbench",
    version,
    about = "Forecasting benchmark for annual global temperature anomalies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Descriptive statistics, stationarity verdicts and outliers as JSON.
    Eda {
        data: PathBuf,
        #[arg(long, default_value = DEFAULT_COLUMN)]
        column: String,
        /// Isolation-forest ensemble size.
        #[arg(long, default_value_t = 100)]
        trees: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Execute the experiment grid and write results, audits and plots.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides base_seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the data column from the config.
        #[arg(long)]
        column: Option<String>,
    },
    /// Check a config file against its data without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> u8 {
    eprintln!("gmtbench: {msg}");
    code
}

fn setup_fail(e: SetupError) -> u8 {
    match e {
        SetupError::Config(_) => fail(EXIT_CONFIG, e),
        SetupError::Data(_) => fail(EXIT_DATA, e),
    }
}

fn cmd_eda(data: PathBuf, column: &str, trees: usize, seed: u64, out: &mut dyn Write) -> u8 {
    let text = match fs::read_to_string(&data) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_DATA, format!("{}: {e}", data.display())),
    };
    let report = parse_gistemp(&text, column).and_then(|s| eda(&s, trees, seed));
    match report {
        Ok(r) => {
            let _ = writeln!(
                out,
                "{}",
                serde_json::to_string_pretty(&r).expect("report serializes")
            );
            0
        }
        Err(e) => fail(EXIT_DATA, e),
    }
}

fn load_checked(
    config: &Path,
    column: Option<String>,
) -> Result<(ExperimentConfig, gmtbench::ingest::AnnualSeries), SetupError> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(c) = column {
        cfg.column = c;
    }
    cfg.validate()?;
    let series = cfg.load_series()?;
    cfg.validate_against(series.len())?;
    Ok((cfg, series))
}

fn cmd_run(
    config: PathBuf,
    out: PathBuf,
    workers: Option<usize>,
    seed: Option<u64>,
    column: Option<String>,
) -> u8 {
    let (mut cfg, series) = match load_checked(&config, column) {
        Ok(x) => x,
        Err(e) => return setup_fail(e),
    };
    if workers.is_some() {
        cfg.workers = workers;
    }
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    let grid = match run_grid(&cfg, &series) {
        Ok(g) => g,
        Err(e) => return setup_fail(e),
    };
    if let Err(e) = write_outputs(&grid, &out) {
        return fail(EXIT_DATA, e);
    }
    let failed = grid.failed();
    eprintln!(
        "gmtbench: {} runs, {} failed, outputs in {}",
        grid.results.len(),
        failed,
        out.display()
    );
    for r in grid.results.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "  {} {}: {}",
            r.model,
            r.run_key,
            r.error.as_deref().unwrap_or("")
        );
    }
    if failed > 0 {
        EXIT_PARTIAL
    } else {
        0
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> u8 {
    match cli.command {
        Command::Eda {
            data,
            column,
            trees,
            seed,
        } => cmd_eda(data, &column, trees, seed, out),
        Command::Run {
            config,
            out,
            workers,
            seed,
            column,
        } => cmd_run(config, out, workers, seed, column),
        Command::Validate { config } => match load_checked(&config, None) {
            Ok((cfg, series)) => {
                let _ = writeln!(
                    out,
                    "ok: {} cells on {} observations ({}-{})",
                    cfg.preps.len() * cfg.test_sizes.len() * cfg.roster.len(),
                    series.len(),
                    series.years()[0],
                    series.years()[series.len() - 1]
                );
                0
            }
            Err(e) => setup_fail(e),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(execute(cli, &mut std::io::stdout().lock()))
}
