//! `sopot-fbmc`: approximate FIR prototype filters as sums of signed powers
//! of two and validate them inside an OQAM-FBMC chain.
//!
//! Subcommands: `filter` (emit the reference PHYDYAS filter), `approx`
//! (filter in → SOPOT trace + approximated filter out), `sweep-mse`,
//! `sweep-interference`, `psd`, and `ber`. Every run writes a
//! `<output>.manifest` echoing the fully resolved configuration; feeding the
//! manifest back through `--config` reproduces the run byte-identically.
//! Flags win over config-file values. `SOPOT_FBMC_THREADS` caps parallelism.

mod commands;
mod resolve;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "sopot-fbmc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. Values left unset fall back to the
/// `--config` file, then to built-in defaults.
#[derive(Args)]
struct Common {
    /// key=value config file; command-line flags take precedence
    #[arg(long)]
    config: Option<String>,
    /// primary output file; the manifest is written next to it
    #[arg(short, long)]
    output: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the unit-energy PHYDYAS prototype filter as CSV
    Filter {
        #[command(flatten)]
        common: Common,
        /// number of subcarriers M (even)
        #[arg(long)]
        subcarriers: Option<String>,
        /// overlap factor K_ov (4 is the supported PHYDYAS design)
        #[arg(long)]
        overlap: Option<String>,
    },
    /// Approximate a filter into SOPOT form (CSD, SDL, or MPGBP)
    Approx {
        #[command(flatten)]
        common: Common,
        /// input filter CSV
        #[arg(short, long)]
        input: Option<String>,
        /// csd | sdl | mpgbp
        #[arg(long)]
        method: Option<String>,
        /// CSD wordlength B
        #[arg(long)]
        wordlength: Option<String>,
        /// SPT budget as average SPT per coefficient (sdl/mpgbp)
        #[arg(long)]
        spt_per_coeff: Option<String>,
        /// SPT budget as an absolute count (sdl/mpgbp)
        #[arg(long)]
        max_spts: Option<String>,
        /// deepest allowed bit plane B_max
        #[arg(long)]
        bmax: Option<String>,
        /// also write the SOPOT trace CSV here
        #[arg(long)]
        trace: Option<String>,
    },
    /// Approximation-MSE sweep over methods and complexity levels
    SweepMse {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        input: Option<String>,
        /// comma-separated subset of csd,sdl,mpgbp
        #[arg(long)]
        methods: Option<String>,
        /// comma-separated CSD wordlengths
        #[arg(long)]
        wordlengths: Option<String>,
        /// "matched", a start:step:stop range, or a comma list of SPT/coeff
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        bmax: Option<String>,
    },
    /// MSE sweep plus the residual interference variance of each filter
    SweepInterference {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        input: Option<String>,
        /// comma-separated subset of csd,sdl,mpgbp
        #[arg(long)]
        methods: Option<String>,
        #[arg(long)]
        wordlengths: Option<String>,
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        bmax: Option<String>,
    },
    /// Out-of-band PSD with partial subcarrier loading, one labeled curve
    /// per filter
    Psd {
        #[command(flatten)]
        common: Common,
        /// comma-separated label=path filter list
        #[arg(long)]
        filters: Option<String>,
        /// QAM blocks per frame
        #[arg(long)]
        blocks: Option<String>,
        /// number of active central subcarriers (default M/2)
        #[arg(long)]
        active: Option<String>,
        #[arg(long)]
        frames: Option<String>,
        #[arg(long)]
        seed: Option<String>,
        /// Welch segment length
        #[arg(long)]
        segment: Option<String>,
        /// Welch overlap fraction in [0, 1)
        #[arg(long)]
        overlap_fraction: Option<String>,
        /// hann | hamming | rect
        #[arg(long)]
        window: Option<String>,
    },
    /// Monte Carlo BER over AWGN, one labeled curve per filter
    Ber {
        #[command(flatten)]
        common: Common,
        /// comma-separated label=path filter list
        #[arg(long)]
        filters: Option<String>,
        /// constellation order: 4 or 64
        #[arg(long)]
        order: Option<String>,
        /// Eb/N0 points in dB: start:step:stop or a comma list
        #[arg(long)]
        ebn0: Option<String>,
        #[arg(long)]
        seed: Option<String>,
        /// stop a point after at least this many bit errors
        #[arg(long)]
        min_errors: Option<String>,
        /// stop a point after this many counted bits
        #[arg(long)]
        max_bits: Option<String>,
        /// compatibility mode: hard frame cap per point
        #[arg(long)]
        frames: Option<String>,
        /// QAM blocks per frame
        #[arg(long)]
        blocks: Option<String>,
        /// which side uses the approximated filter: both | tx | rx
        #[arg(long)]
        quantize: Option<String>,
    },
}

fn init_thread_pool() {
    if let Ok(value) = std::env::var("SOPOT_FBMC_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
