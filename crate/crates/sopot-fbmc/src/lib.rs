//! Multiplierless approximation of FIR prototype filters as sums of signed
//! powers of two (SOPOT), validated inside an OQAM-FBMC transceiver.
//!
//! A SOPOT representation writes each coefficient as a short sum
//! `Σ c_i · 2^(−k_i)` with `c_i ∈ {−1, +1}`, so that every multiplication in
//! the polyphase network collapses to a handful of shift-and-add operations.
//! Three approximation algorithms are provided:
//!
//! * **CSD** — per-coefficient two's-complement quantization followed by
//!   canonical signed digit (non-adjacent form) recoding,
//! * **SDL** — signed digit loading, a greedy allocator that repeatedly spends
//!   one SPT on the vector entry with the largest residual,
//! * **MPGBP** — matching pursuits with generalized bit planes, which spends
//!   `P = ⌊√N⌋` SPTs per iteration on the `P` largest residuals.
//!
//! The [`fbmc`] module implements the OQAM-FBMC waveform chain (PHYDYAS
//! prototype, OQAM staggering, polyphase synthesis/analysis, residual
//! interference variance) and [`experiments`] reproduces the evaluation
//! suite: approximation-MSE and interference sweeps, out-of-band PSD with
//! partial subcarrier loading, and Monte Carlo BER over AWGN.

pub mod error;
pub mod experiments;
pub mod fbmc;
pub mod quantizers;
pub mod sopot;

pub use error::{Error, Result};
pub use sopot::{AllocationMatrix, SopotApprox, SptTerm};
