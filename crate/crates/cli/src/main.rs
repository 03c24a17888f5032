//! `creditnn`: generate panels, run cases, analyse results, emit reports.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "creditnn",
    version,
    about = "Neural-network credit-rating experiment bench"
)]
struct Cli {
    /// Default directory for generated files.
    #[arg(long, global = true, env = "CREDITNN_OUT", default_value = "out")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic sector panel and its latent state.
    Synth {
        /// Generator config (TOML): full fields, or `preset = "..."` plus overrides.
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        /// energy, financial or healthcare
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        features: Option<usize>,
    },
    /// Replace a panel's features with the twenty financial ratios.
    Ratios {
        #[arg(long)]
        panel: PathBuf,
        /// TOML table mapping accounting items to panel columns.
        #[arg(long)]
        mapping: Option<PathBuf>,
        /// Output CSV (default: <out-dir>/<panel stem>_ratios.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one case on one sector panel.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Panel CSV, replacing the config's panel or synth section.
        #[arg(long)]
        panel: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Case id; also resets the architecture list to the case's defaults.
        #[arg(long)]
        case: Option<u8>,
        #[arg(long)]
        sector: Option<String>,
        /// Comma-separated architecture names.
        #[arg(long, value_delimiter = ',')]
        arch: Option<Vec<String>>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Allocations trained concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Results CSV (default: <out-dir>/results_case<N>_<sector>.csv).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Suppress per-allocation progress lines.
        #[arg(long)]
        quiet: bool,
    },
    /// Hypothesis tests over a results CSV (or a case 3/4 summary CSV for ttest).
    Stats {
        #[arg(long, required = true, num_args = 1..)]
        results: Vec<PathBuf>,
        #[arg(long, value_enum)]
        mode: StatsMode,
        /// Case analysed by anova2 and tukey.
        #[arg(long, default_value_t = 3)]
        case: u8,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Markdown report with every table section.
    Report {
        #[arg(long, num_args = 0..)]
        results: Vec<PathBuf>,
        /// Grid-search CSV written by `run` for case 1.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Output file (default: <out-dir>/report.md).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum StatsMode {
    Ttest,
    Anova2,
    Tukey,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_dir = cli.out_dir;
    let outcome = match cli.command {
        Command::Synth {
            config,
            preset,
            seed,
            features,
        } => commands::synth(
            config.as_deref(),
            preset.as_deref(),
            seed,
            features,
            &out_dir,
        ),
        Command::Ratios {
            panel,
            mapping,
            out,
        } => commands::ratios(&panel, mapping.as_deref(), out, &out_dir),
        Command::Run {
            config,
            panel,
            seed,
            case,
            sector,
            arch,
            replicates,
            epochs,
            jobs,
            out,
            quiet,
        } => commands::run(
            &config,
            commands::RunOverrides {
                panel,
                seed,
                case,
                sector,
                arch,
                replicates,
                epochs,
            },
            jobs,
            out,
            quiet,
            &out_dir,
        ),
        Command::Stats {
            results,
            mode,
            case,
            alpha,
            format,
            out,
        } => commands::stats(&results, mode, case, alpha, format, out.as_deref()),
        Command::Report { results, grid, out } => {
            commands::report(&results, grid.as_deref(), out, &out_dir)
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
