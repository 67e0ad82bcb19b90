//! `mfm`: continuation, classification, sweep, spectrum, statistics, and
//! diagram pipeline for the mean-field cortical model.

mod commands;
mod ioutil;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Usage-level failures exit with code 1, runtime failures with 3.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "mfm", version, about = "Mean-field cortical model atlas pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    #[value(name = "p_ei")]
    Pei,
    #[value(name = "p_ee")]
    Pee,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DiagramMode {
    #[value(name = "1par")]
    OnePar,
    #[value(name = "2par")]
    TwoPar,
}

/// Options shared by the compute subcommands. Precedence: flag, then config
/// file, then the `MFM_WORKERS` environment variable (workers only), then
/// built-in defaults.
#[derive(Args, Clone)]
pub struct CommonOpts {
    /// Key-value config file (`key = value`, `#` comments).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for batch work.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw plausible parameter sets and write them as CSV.
    Sample {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Classify parameter sets into families; JSONL reports plus a summary.
    Classify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-set fold/Hopf curve CSVs into this directory.
        #[arg(long)]
        emit_curves: Option<PathBuf>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Sweep a thalamic drive per set and bracket family transitions.
    Sweep {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        axis: AxisArg,
        /// Drive range `lo,hi` in 1/s.
        #[arg(long, default_value = "0,26000")]
        range: String,
        #[arg(long, default_value_t = 7)]
        samples: usize,
        /// Transition bracket width in 1/s.
        #[arg(long, default_value_t = 200.0)]
        resolution: f64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Linearized power ratios under an anesthetic-style PSP transform.
    Spectrum {
        #[arg(long = "in")]
        input: PathBuf,
        /// Transform `a,b`: amplitude scale and decay-rate scale.
        #[arg(long, default_value = "1.0,1.5")]
        transform: String,
        /// Frequency band `lo,hi` in Hz.
        #[arg(long, default_value = "1,60")]
        band: String,
        #[arg(long, default_value_t = 2001)]
        n_freq: usize,
        #[arg(long)]
        out: PathBuf,
        /// Write a 250-bin histogram of ratios over 0-4 to this CSV.
        #[arg(long)]
        fig6: Option<PathBuf>,
        /// Write per-set spectrum CSVs into this directory.
        #[arg(long)]
        spectra_dir: Option<PathBuf>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Distribution statistics split by family label.
    Stats {
        #[arg(long)]
        reports: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Bifurcation diagram data for one parameter set.
    Diagram {
        #[arg(long = "in")]
        input: PathBuf,
        /// Zero-based row index into the input CSV.
        #[arg(long)]
        set: usize,
        #[arg(long)]
        mode: DiagramMode,
        /// Fixed connectivity scale for 1par mode.
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        #[arg(long)]
        out: PathBuf,
        /// Also render a fixed-style SVG.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Skip periodic-orbit continuation in 1par mode.
        #[arg(long)]
        skip_cycles: bool,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not usage errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let result = match cli.command {
        Command::Sample {
            seed,
            count,
            out,
            common,
        } => commands::sample(seed, count, &out, &common),
        Command::Classify {
            input,
            out,
            emit_curves,
            common,
        } => commands::classify(&input, &out, emit_curves.as_deref(), &common),
        Command::Sweep {
            input,
            axis,
            range,
            samples,
            resolution,
            out,
            common,
        } => commands::sweep(&input, axis, &range, samples, resolution, &out, &common),
        Command::Spectrum {
            input,
            transform,
            band,
            n_freq,
            out,
            fig6,
            spectra_dir,
            common,
        } => commands::spectrum(
            &input,
            &transform,
            &band,
            n_freq,
            &out,
            fig6.as_deref(),
            spectra_dir.as_deref(),
            &common,
        ),
        Command::Stats {
            reports,
            params,
            out_dir,
            common,
        } => commands::stats(&reports, &params, &out_dir, &common),
        Command::Diagram {
            input,
            set,
            mode,
            k,
            out,
            svg,
            skip_cycles,
            common,
        } => commands::diagram(&input, set, mode, k, &out, svg.as_deref(), skip_cycles, &common),
    };

    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
