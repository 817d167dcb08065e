//! Monte Carlo bit-error-rate measurement over AWGN.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiments::qam::{awgn_apply, qam_demodulate, qam_modulate, NoiseSpec};
use crate::experiments::{derive_seed, fmt_float};
use crate::fbmc::{
    analyze, oqam_demap, oqam_map, synthesize, FbmcConfig, PrototypeFilter, QamGrid,
};

/// Per-point stopping rule. A point finishes at the first batch boundary
/// where any bound is met.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopRule {
    pub min_errors: u64,
    pub max_bits: u64,
    /// Compatibility mode: cap the frame count regardless of error counts.
    pub max_frames: Option<u64>,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            min_errors: 100,
            max_bits: 1_000_000,
            max_frames: None,
        }
    }
}

/// One measured BER point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerPoint {
    pub ebn0_db: f64,
    pub bits_sent: u64,
    pub bit_errors: u64,
}

impl BerPoint {
    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.bits_sent as f64
    }
}

/// Frames are simulated in fixed-size batches so the sequence of simulated
/// frames (and therefore the result) does not depend on the worker count.
const FRAME_BATCH: u64 = 16;

/// Measures BER over AWGN for every Eb/N0 in `ebn0_db_list`.
///
/// Transmitter and receiver may use different filters (quantized transmitter
/// against reference receiver, say). Noise is calibrated to the transmit
/// filter's energy per information bit. The first and last `K_ov` QAM blocks
/// of each frame suffer edge truncation and are excluded from the counts.
/// Results are deterministic given `master_seed`.
pub fn run_ber(
    config: &FbmcConfig,
    tx_filter: &PrototypeFilter,
    rx_filter: &PrototypeFilter,
    order: u32,
    ebn0_db_list: &[f64],
    stop: &StopRule,
    master_seed: u64,
) -> Result<Vec<BerPoint>> {
    if config.num_active() != config.num_subcarriers() {
        return Err(Error::InvalidInput(
            "BER runs use full subcarrier loading".into(),
        ));
    }
    if config.num_blocks() <= 2 * config.overlap() {
        return Err(Error::InvalidInput(format!(
            "num_blocks must exceed 2*overlap = {} to leave interior symbols",
            2 * config.overlap()
        )));
    }
    if ebn0_db_list.is_empty() {
        return Err(Error::InvalidInput("empty Eb/N0 list".into()));
    }
    let mut points = Vec::with_capacity(ebn0_db_list.len());
    for (point_index, &ebn0_db) in ebn0_db_list.iter().enumerate() {
        // validate the noise derivation once up front
        NoiseSpec::new(ebn0_db, order, tx_filter.energy(), 0)?;
        let mut errors = 0u64;
        let mut bits = 0u64;
        let mut frames = 0u64;
        loop {
            let batch: Vec<(u64, u64)> = (frames..frames + FRAME_BATCH)
                .into_par_iter()
                .map(|frame| {
                    simulate_frame(
                        config,
                        tx_filter,
                        rx_filter,
                        order,
                        ebn0_db,
                        derive_seed(master_seed, point_index as u64, frame),
                    )
                })
                .collect::<Result<_>>()?;
            for (e, b) in batch {
                errors += e;
                bits += b;
            }
            frames += FRAME_BATCH;
            if errors >= stop.min_errors || bits >= stop.max_bits {
                break;
            }
            if let Some(max_frames) = stop.max_frames {
                if frames >= max_frames {
                    break;
                }
            }
        }
        points.push(BerPoint {
            ebn0_db,
            bits_sent: bits,
            bit_errors: errors,
        });
    }
    Ok(points)
}

/// Simulates one frame; returns `(bit_errors, bits_counted)` over the
/// interior QAM blocks.
fn simulate_frame(
    config: &FbmcConfig,
    tx_filter: &PrototypeFilter,
    rx_filter: &PrototypeFilter,
    order: u32,
    ebn0_db: f64,
    frame_seed: u64,
) -> Result<(u64, u64)> {
    let m = config.num_subcarriers();
    let blocks = config.num_blocks();
    let bits_per_symbol = (order as f64).log2() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(frame_seed);
    let bits: Vec<u8> = (0..m * blocks * bits_per_symbol)
        .map(|_| rng.gen_range(0..2u8))
        .collect();
    let symbols = qam_modulate(&bits, order)?;
    let mut grid = QamGrid::zeros(m, blocks);
    for n in 0..blocks {
        for k in 0..m {
            grid.set(k, n, symbols[n * m + k]);
        }
    }

    let clean = synthesize(&oqam_map(&grid), tx_filter, config)?;
    let noise = NoiseSpec::new(ebn0_db, order, tx_filter.energy(), frame_seed ^ 0xA55A)?;
    let noisy = awgn_apply(&clean, &noise);
    let received = oqam_demap(&analyze(&noisy, rx_filter, config)?);

    let guard = config.overlap();
    let mut interior = Vec::with_capacity(m * (blocks - 2 * guard));
    for n in guard..blocks - guard {
        for k in 0..m {
            interior.push(received.get(k, n));
        }
    }
    let decided = qam_demodulate(&interior, order)?;
    let sent = &bits[guard * m * bits_per_symbol..(blocks - guard) * m * bits_per_symbol];
    debug_assert_eq!(decided.len(), sent.len());
    let errors = decided.iter().zip(sent).filter(|(a, b)| a != b).count() as u64;
    Ok((errors, sent.len() as u64))
}

/// Writes labeled BER points as CSV: `label,ebn0_db,bits,errors,ber`.
pub fn write_ber_csv<W: Write>(w: &mut W, curves: &[(String, Vec<BerPoint>)]) -> Result<()> {
    writeln!(w, "label,ebn0_db,bits,errors,ber")?;
    for (label, points) in curves {
        for p in points {
            writeln!(
                w,
                "{label},{},{},{},{}",
                fmt_float(p.ebn0_db),
                p.bits_sent,
                p.bit_errors,
                fmt_float(p.ber())
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::analytic::qam4_ber;
    use crate::fbmc::phydyas_prototype;

    #[test]
    fn reference_chain_tracks_analytic_qam4() {
        let config = FbmcConfig::new(32, 4, 16).unwrap();
        let filter = phydyas_prototype(32, 4).unwrap();
        let stop = StopRule {
            min_errors: 200,
            max_bits: 400_000,
            max_frames: None,
        };
        let points = run_ber(&config, &filter, &filter, 4, &[5.0], &stop, 11).unwrap();
        let p = &points[0];
        let expected = qam4_ber(10f64.powf(0.5));
        let sigma = (expected * (1.0 - expected) / p.bits_sent as f64).sqrt();
        assert!(
            (p.ber() - expected).abs() <= 3.0 * sigma,
            "ber {} vs analytic {expected} (3σ = {})",
            p.ber(),
            3.0 * sigma
        );
    }

    #[test]
    fn high_ebn0_has_zero_errors() {
        let config = FbmcConfig::new(16, 4, 12).unwrap();
        let filter = phydyas_prototype(16, 4).unwrap();
        let stop = StopRule {
            min_errors: 10,
            max_bits: 20_000,
            max_frames: None,
        };
        let points = run_ber(&config, &filter, &filter, 4, &[60.0], &stop, 3).unwrap();
        assert_eq!(points[0].bit_errors, 0);
        assert!(points[0].bits_sent >= 20_000);
    }

    #[test]
    fn results_are_deterministic() {
        let config = FbmcConfig::new(16, 4, 12).unwrap();
        let filter = phydyas_prototype(16, 4).unwrap();
        let stop = StopRule {
            min_errors: 50,
            max_bits: 50_000,
            max_frames: None,
        };
        let a = run_ber(&config, &filter, &filter, 4, &[4.0, 6.0], &stop, 7).unwrap();
        let b = run_ber(&config, &filter, &filter, 4, &[4.0, 6.0], &stop, 7).unwrap();
        assert_eq!(a, b);
        // a different seed gives a different sample path
        let c = run_ber(&config, &filter, &filter, 4, &[4.0, 6.0], &stop, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn frame_cap_mode_stops_early() {
        let config = FbmcConfig::new(16, 4, 12).unwrap();
        let filter = phydyas_prototype(16, 4).unwrap();
        let stop = StopRule {
            min_errors: u64::MAX,
            max_bits: u64::MAX,
            max_frames: Some(FRAME_BATCH),
        };
        let points = run_ber(&config, &filter, &filter, 4, &[2.0], &stop, 7).unwrap();
        let bits_per_frame = 16 * (12 - 8) * 2;
        assert_eq!(points[0].bits_sent, FRAME_BATCH * bits_per_frame);
    }

    #[test]
    fn rejects_partial_loading_and_thin_frames() {
        let filter = phydyas_prototype(16, 4).unwrap();
        let masked = FbmcConfig::new(16, 4, 12)
            .unwrap()
            .with_central_band(8)
            .unwrap();
        assert!(run_ber(
            &masked,
            &filter,
            &filter,
            4,
            &[4.0],
            &StopRule::default(),
            1
        )
        .is_err());

        let thin = FbmcConfig::new(16, 4, 8).unwrap();
        assert!(run_ber(&thin, &filter, &filter, 4, &[4.0], &StopRule::default(), 1).is_err());
    }

    #[test]
    fn ber_csv_shape() {
        let points = vec![BerPoint {
            ebn0_db: 4.0,
            bits_sent: 1000,
            bit_errors: 12,
        }];
        let mut buf = Vec::new();
        write_ber_csv(&mut buf, &[("ref".into(), points)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("label,ebn0_db,bits,errors,ber\n"));
        assert!(text.contains("ref,4.00000000000e0,1000,12,1.20000000000e-2"));
    }
}
