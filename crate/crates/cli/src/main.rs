//! `referee`: radar place recognition from the command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ConfigArgs;

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (RFMX 1, RFRD 1)");

#[derive(Debug, Parser)]
#[command(name = "referee", version = VERSION, about = "Free-space radar place recognition")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn a directory of polar scans into RFRD descriptors plus manifest.csv
    Describe {
        /// Scan directory (.rfmx / .png); a `scans/` subdirectory is used when present
        #[arg(long)]
        input: PathBuf,
        /// Descriptor directory to write
        #[arg(long)]
        output: PathBuf,
        /// Trajectory CSV used to fill manifest positions
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Also write each feature mask as a PGM image
        #[arg(long)]
        masks: bool,
    },
    /// Check a descriptor directory and (re)write its manifest
    Index {
        /// Descriptor directory
        #[arg(long)]
        db: PathBuf,
        /// Trajectory CSV used to fill manifest positions
        #[arg(long)]
        gt: Option<PathBuf>,
    },
    /// Nearest-place query of every descriptor in one directory against another
    Query {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        /// Trajectory for database positions (and queries unless --query-gt)
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long = "query-gt")]
        query_gt: Option<PathBuf>,
        /// CSV output file [default: stdout]
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Precision/recall evaluation against ground-truth poses
    Eval {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        /// Trajectory CSV for the database (and queries unless --query-gt)
        #[arg(long)]
        gt: PathBuf,
        #[arg(long = "query-gt")]
        query_gt: Option<PathBuf>,
        /// Directory for pr.csv, summary.json and matches.csv
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Time descriptor generation and loop search on a scan directory
    Bench {
        #[arg(long)]
        input: PathBuf,
        /// Report file [default: stdout]
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Synthetic data
    Synth {
        #[command(subcommand)]
        command: SynthCommand,
    },
}

#[derive(Debug, Subcommand)]
enum SynthCommand {
    /// Render a synthetic session: scans/NNNNNN.rfmx and trajectory.csv
    Gen(commands::SynthGenArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match config::Config::resolve(&cli.config) {
        Ok(cfg) => cfg,
        Err(errors) => {
            return commands::CliError::Config(errors).report();
        }
    };
    let result = match cli.command {
        Command::Describe {
            input,
            output,
            gt,
            masks,
        } => commands::describe(&cfg, &input, &output, gt.as_deref(), masks),
        Command::Index { db, gt } => commands::index(&db, gt.as_deref()),
        Command::Query {
            db,
            queries,
            gt,
            query_gt,
            output,
        } => commands::query(
            &cfg,
            &db,
            &queries,
            gt.as_deref(),
            query_gt.as_deref(),
            output.as_deref(),
        ),
        Command::Eval {
            db,
            queries,
            gt,
            query_gt,
            out,
        } => commands::eval(&cfg, &db, &queries, &gt, query_gt.as_deref(), &out),
        Command::Bench { input, output } => commands::bench(&cfg, &input, output.as_deref()),
        Command::Synth {
            command: SynthCommand::Gen(args),
        } => commands::synth_gen(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
