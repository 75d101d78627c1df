//! Batch command-line front end for the hdrkit toolkit.
//!
//! Exit codes: 0 success, 1 usage error, 2 I/O error, 3 validation or
//! degenerate-input error. Diagnostics go to stderr; data goes to the
//! output path (or stdout when the path is `-`).

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "hdrkit",
    version,
    about = "HDR imaging numerics: histogram equalization, tone mapping, \
             feature fusion and attention, reconstruction losses, and batch evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Operate on BT.601 luma.
    Luma,
    /// Operate on each RGB channel independently.
    PerChannel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OperatorArg {
    /// Logarithmic compression; writes a unit-range PFM.
    Mu,
    /// Global Reinhard display mapping; writes a PPM.
    Reinhard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FuseOpArg {
    /// Channel concatenation.
    Concat,
    /// Element-wise addition.
    Add,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    L1,
    Color,
    Weber,
    Msssim,
    Perceptual,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not positive"))
    }
}

#[derive(Subcommand)]
pub enum Command {
    /// Histogram-equalize a PPM image.
    Equalize {
        /// Input PPM (P6, maxval 255).
        input: PathBuf,
        /// Output PPM path, or `-` for stdout.
        output: PathBuf,
        /// Color handling.
        #[arg(long, value_enum, default_value_t = ModeArg::Luma)]
        mode: ModeArg,
    },
    /// Export the 256-bin intensity histogram of a PPM as CSV.
    Histogram {
        /// Input PPM (P6, maxval 255).
        input: PathBuf,
        /// Output CSV path, or `-` for stdout.
        output: PathBuf,
        /// Which planes to count.
        #[arg(long, value_enum, default_value_t = ModeArg::PerChannel)]
        mode: ModeArg,
    },
    /// Tone-map a PFM image (normalized by its global maximum first).
    Tonemap {
        /// Input PFM (color "PF").
        input: PathBuf,
        /// Output path (PFM for --operator mu, PPM for reinhard), or `-`.
        output: PathBuf,
        /// Tone-mapping operator.
        #[arg(long, value_enum, default_value_t = OperatorArg::Mu)]
        operator: OperatorArg,
        /// Compression amount of the logarithmic operator.
        #[arg(long, value_parser = positive_f64, default_value_t = 5000.0)]
        mu: f64,
    },
    /// Fuse two PPM images as feature maps and report a verifiable summary.
    Fuse {
        /// First input PPM.
        a: PathBuf,
        /// Second input PPM.
        b: PathBuf,
        /// Output JSON report path, or `-` for stdout.
        output: PathBuf,
        /// Fusion operator.
        #[arg(long, value_enum, default_value_t = FuseOpArg::Concat)]
        op: FuseOpArg,
        /// Run self-attention on the fused map (spatial size up to 64x64).
        #[arg(long)]
        attend: bool,
        /// Seed for attention parameter initialization (default: 0).
        #[arg(long)]
        seed: Option<u64>,
        /// Query/key channel reduction for attention (default: 8).
        #[arg(long)]
        reduction: Option<usize>,
        /// Optional JSON config supplying seed/reduction; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dump the resulting map as one PFM per channel under this prefix.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Composite-loss breakdown of a PFM pair, prepared like `evaluate`.
    Loss {
        /// Ground-truth PFM.
        gt: PathBuf,
        /// Reconstruction PFM.
        rec: PathBuf,
        /// Output JSON path, or `-` for stdout.
        output: PathBuf,
        /// JSON config overriding the defaults (mu=5000, k1=0.01, k2=0.03,
        /// fraction=0.02, weights alpha=0.18 beta=0.5 delta=0.82 gamma=0.8
        /// lambda=0.82, extractor=identity).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate all identically named PFM pairs of two directories.
    Evaluate {
        /// Directory of ground-truth PFM files.
        gt_dir: PathBuf,
        /// Directory of reconstructed PFM files.
        rec_dir: PathBuf,
        /// Output report path, or `-` for stdout.
        output: PathBuf,
        /// JSON config overriding the defaults (mu=5000, k1=0.01, k2=0.03,
        /// fraction=0.02, weights alpha=0.18 beta=0.5 delta=0.82 gamma=0.8
        /// lambda=0.82, extractor=identity).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Report encoding.
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
    },
    /// Finite-difference gradient check of a loss on a seeded random pair.
    Gradcheck {
        /// Loss to differentiate. l1 and color are also compared against
        /// their closed forms; the rest are report-only.
        #[arg(long, value_enum)]
        loss: LossArg,
        /// Square image side length (msssim needs at least 16).
        #[arg(long, default_value_t = 16)]
        size: usize,
        /// Seed of the random pair.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Finite-difference step.
        #[arg(long, value_parser = positive_f64, default_value_t = 1e-3)]
        epsilon: f64,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            err.print().expect("writing diagnostics");
            std::process::exit(code);
        }
    };
    if let Err(err) = commands::run(cli.command) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
