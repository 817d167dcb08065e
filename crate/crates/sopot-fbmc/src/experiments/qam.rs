//! Gray-mapped square QAM with unit average energy, and seeded AWGN.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fbmc::FbmcSignal;

/// Per-axis amplitude levels for unit-average-energy square QAM, indexed by
/// natural level order (most negative first).
fn axis_levels(bits_per_axis: u32) -> Vec<f64> {
    let count = 1usize << bits_per_axis;
    // E[l^2] over both axes must be 1: levels are odd integers scaled by
    // sqrt(2 (4^b - 1) / 3) per axis.
    let scale = (2.0 * ((count * count - 1) as f64) / 3.0).sqrt();
    (0..count)
        .map(|i| (2.0 * i as f64 - (count as f64 - 1.0)) / scale)
        .collect()
}

fn gray(n: usize) -> usize {
    n ^ (n >> 1)
}

fn bits_per_symbol(order: u32) -> Result<u32> {
    match order {
        4 => Ok(2),
        64 => Ok(6),
        other => Err(Error::InvalidInput(format!(
            "unsupported QAM order {other}; expected 4 or 64"
        ))),
    }
}

/// Maps bits to Gray-coded square QAM symbols with unit average energy.
///
/// Each symbol consumes `log2(order)` bits: the first half select the
/// in-phase level, the second half the quadrature level. Within an axis the
/// bit group is the Gray code of the level index, so adjacent levels differ
/// in exactly one bit.
pub fn qam_modulate(bits: &[u8], order: u32) -> Result<Vec<Complex64>> {
    let q = bits_per_symbol(order)? as usize;
    if bits.len() % q != 0 {
        return Err(Error::InvalidInput(format!(
            "bit count {} not divisible by {q}",
            bits.len()
        )));
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(Error::InvalidInput("bits must be 0 or 1".into()));
    }
    let half = q / 2;
    let levels = axis_levels(half as u32);
    // level_for_gray[g] = amplitude of the level whose Gray code is g; the
    // all-zero group lands on the most positive level so bit 0 means "+"
    let mut level_for_gray = vec![0.0; levels.len()];
    for (i, &l) in levels.iter().enumerate() {
        level_for_gray[gray(levels.len() - 1 - i)] = l;
    }

    let mut symbols = Vec::with_capacity(bits.len() / q);
    for chunk in bits.chunks_exact(q) {
        let to_index = |slice: &[u8]| slice.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        let re = level_for_gray[to_index(&chunk[..half])];
        let im = level_for_gray[to_index(&chunk[half..])];
        symbols.push(Complex64::new(re, im));
    }
    Ok(symbols)
}

/// Nearest-neighbor hard decision back to bits; the inverse of
/// [`qam_modulate`] on noiseless symbols.
pub fn qam_demodulate(symbols: &[Complex64], order: u32) -> Result<Vec<u8>> {
    let q = bits_per_symbol(order)? as usize;
    let half = q / 2;
    let levels = axis_levels(half as u32);
    let count = levels.len();
    let step = levels[1] - levels[0];

    let slice_axis = |x: f64, out: &mut Vec<u8>| {
        let idx = ((x - levels[0]) / step).round();
        let idx = (idx.max(0.0) as usize).min(count - 1);
        let g = gray(count - 1 - idx);
        for b in (0..half).rev() {
            out.push(((g >> b) & 1) as u8);
        }
    };

    let mut bits = Vec::with_capacity(symbols.len() * q);
    for s in symbols {
        slice_axis(s.re, &mut bits);
        slice_axis(s.im, &mut bits);
    }
    Ok(bits)
}

/// AWGN description: an Eb/N0 operating point with its derived per-sample
/// complex noise variance and the generator seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub ebn0_db: f64,
    pub seed: u64,
    /// Total variance of the circularly-symmetric complex noise per sample.
    variance: f64,
}

impl NoiseSpec {
    /// Derives the per-sample noise variance from the target Eb/N0, the
    /// constellation order, and the transmit filter energy.
    ///
    /// With unit-average-energy QAM, each block contributes `E_g` signal
    /// energy per QAM symbol (OQAM halves the PAM energy but doubles the
    /// instants), so the transmitted energy per bit is `E_g / log2(order)`
    /// and `N_0 = E_g / (γ log2(order))`.
    pub fn new(ebn0_db: f64, order: u32, tx_filter_energy: f64, seed: u64) -> Result<Self> {
        let bits = bits_per_symbol(order)?;
        if !tx_filter_energy.is_finite() || tx_filter_energy <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "filter energy must be positive, got {tx_filter_energy}"
            )));
        }
        let gamma = 10f64.powf(ebn0_db / 10.0);
        let variance = tx_filter_energy / (gamma * f64::from(bits));
        Ok(Self {
            ebn0_db,
            seed,
            variance,
        })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// Adds circularly-symmetric complex Gaussian noise of the spec's variance.
/// Deterministic given the spec's seed; an infinite Eb/N0 (zero variance)
/// returns the signal unchanged.
pub fn awgn_apply(signal: &FbmcSignal, noise: &NoiseSpec) -> FbmcSignal {
    if noise.variance == 0.0 {
        return signal.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let sigma = (noise.variance / 2.0).sqrt();
    let samples = signal
        .samples()
        .iter()
        .map(|&s| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            s + Complex64::new(re * sigma, im * sigma)
        })
        .collect();
    FbmcSignal::new(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn qam4_points_are_unit_energy_corners() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let symbols = qam_modulate(&[0, 0, 0, 1, 1, 0, 1, 1], 4).unwrap();
        let expect = [(s, s), (s, -s), (-s, s), (-s, -s)];
        for (sym, (re, im)) in symbols.iter().zip(expect) {
            assert!((sym.re - re).abs() < 1e-15 && (sym.im - im).abs() < 1e-15);
        }
    }

    #[test]
    fn round_trip_is_lossless() {
        let mut rng = StdRng::seed_from_u64(4);
        for &order in &[4u32, 64] {
            let q = if order == 4 { 2 } else { 6 };
            let bits: Vec<u8> = (0..q * 1000).map(|_| rng.gen_range(0..2u8)).collect();
            let symbols = qam_modulate(&bits, order).unwrap();
            assert_eq!(qam_demodulate(&symbols, order).unwrap(), bits);
        }
    }

    #[test]
    fn unit_average_energy() {
        for &order in &[4u32, 64] {
            let q = if order == 4 { 2usize } else { 6 };
            let all: Vec<u8> = (0..order as usize)
                .flat_map(|v| (0..q).rev().map(move |b| ((v >> b) & 1) as u8))
                .collect();
            let symbols = qam_modulate(&all, order).unwrap();
            let energy: f64 =
                symbols.iter().map(|s| s.norm_sqr()).sum::<f64>() / symbols.len() as f64;
            assert!((energy - 1.0).abs() < 1e-12, "order {order}: {energy}");
        }
    }

    #[test]
    fn gray_adjacency_is_single_bit() {
        // every pair of constellation neighbors (adjacent in I or in Q)
        // differs in exactly one bit
        for &order in &[4u32, 64] {
            let q = if order == 4 { 2usize } else { 6 };
            let half = q / 2;
            let side = 1usize << half;
            let bits_of = |i: usize, j: usize| -> Vec<u8> {
                let mut v = Vec::with_capacity(q);
                for b in (0..half).rev() {
                    v.push(((gray(side - 1 - i) >> b) & 1) as u8);
                }
                for b in (0..half).rev() {
                    v.push(((gray(side - 1 - j) >> b) & 1) as u8);
                }
                v
            };
            for i in 0..side {
                for j in 0..side {
                    if i + 1 < side {
                        let diff: usize = bits_of(i, j)
                            .iter()
                            .zip(bits_of(i + 1, j).iter())
                            .filter(|(a, b)| a != b)
                            .count();
                        assert_eq!(diff, 1, "I-adjacency at ({i},{j}), order {order}");
                    }
                    if j + 1 < side {
                        let diff: usize = bits_of(i, j)
                            .iter()
                            .zip(bits_of(i, j + 1).iter())
                            .filter(|(a, b)| a != b)
                            .count();
                        assert_eq!(diff, 1, "Q-adjacency at ({i},{j}), order {order}");
                    }
                }
            }
        }
    }

    #[test]
    fn qam_rejects_bad_input() {
        assert!(qam_modulate(&[0, 1], 16).is_err());
        assert!(qam_modulate(&[0, 1, 1], 4).is_err());
        assert!(qam_modulate(&[0, 2], 4).is_err());
    }

    #[test]
    fn awgn_is_deterministic_and_calibrated() {
        let n = 1_000_000;
        let signal = FbmcSignal::new(vec![Complex64::new(0.0, 0.0); n]);
        let spec = NoiseSpec::new(3.0, 4, 1.0, 42).unwrap();
        let a = awgn_apply(&signal, &spec);
        let b = awgn_apply(&signal, &spec);
        assert_eq!(a.samples(), b.samples());

        let measured: f64 = a.samples().iter().map(|s| s.norm_sqr()).sum::<f64>() / n as f64;
        let rel = (measured - spec.variance()).abs() / spec.variance();
        assert!(rel < 0.01, "variance off by {rel}");
    }

    #[test]
    fn awgn_infinite_ebn0_is_identity() {
        let signal = FbmcSignal::new(vec![Complex64::new(1.0, -2.0); 16]);
        let spec = NoiseSpec::new(f64::INFINITY, 4, 1.0, 1).unwrap();
        assert_eq!(awgn_apply(&signal, &spec).samples(), signal.samples());
    }
}
