//! Evaluation harness: approximation-MSE and interference sweeps, Welch PSD
//! estimation with partial subcarrier loading, and Monte Carlo BER over AWGN.
//!
//! Every experiment is deterministic given its seed; Monte Carlo frames draw
//! per-frame seeds from a counter so results are identical for any worker
//! count.

pub mod analytic;
pub mod ber;
pub mod psd;
pub mod qam;
pub mod sweep;

pub use ber::{run_ber, write_ber_csv, BerPoint, StopRule};
pub use psd::{
    estimate_psd, estimate_psd_with_window, run_psd_experiment, write_psd_csv, PsdEstimate,
    PsdExperimentOptions, WelchWindow,
};
pub use qam::{awgn_apply, qam_demodulate, qam_modulate, NoiseSpec};
pub use sweep::{
    approximate_filter, approximate_vector, approximation_mse, run_sweep, write_sweep_csv,
    FilterApproximation, Quantizer, SweepMethods, SweepOptions, SweepRow,
};

/// Floats in result CSVs carry 12 significant digits.
pub(crate) fn fmt_float(x: f64) -> String {
    format!("{x:.11e}")
}

/// SplitMix64-style seed derivation for counter-based Monte Carlo streams.
pub(crate) fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
