//! OQAM-FBMC waveform chain: PHYDYAS prototype construction, OQAM staggering
//! with the quarter-turn phase pattern, polyphase synthesis and analysis with
//! real-part recovery, and the residual interference variance of the chain.
//!
//! Conventions: `M` is the number of subcarriers and `K_ov` the overlap
//! factor everywhere; the prototype filter spans `L = K_ov * M` samples; the
//! symbol period is `M` samples and PAM instants advance by `M/2`.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Static parameters of an OQAM-FBMC frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FbmcConfig {
    num_subcarriers: usize,
    overlap: usize,
    num_blocks: usize,
    active_mask: Vec<bool>,
}

impl FbmcConfig {
    /// A configuration with all subcarriers active.
    pub fn new(num_subcarriers: usize, overlap: usize, num_blocks: usize) -> Result<Self> {
        if num_subcarriers < 2 || num_subcarriers % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "num_subcarriers must be even and >= 2, got {num_subcarriers}"
            )));
        }
        if overlap < 1 {
            return Err(Error::InvalidInput("overlap must be >= 1".into()));
        }
        if num_blocks < 1 {
            return Err(Error::InvalidInput("num_blocks must be >= 1".into()));
        }
        Ok(Self {
            num_subcarriers,
            overlap,
            num_blocks,
            active_mask: vec![true; num_subcarriers],
        })
    }

    /// Replaces the active-subcarrier mask. The mask length must equal `M`.
    pub fn with_active_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.num_subcarriers {
            return Err(Error::DimensionMismatch {
                expected: self.num_subcarriers,
                actual: mask.len(),
            });
        }
        self.active_mask = mask;
        Ok(self)
    }

    /// Activates only the `count` subcarriers centered on DC (wrapping around
    /// the FFT indexing), deactivating the rest.
    pub fn with_central_band(self, count: usize) -> Result<Self> {
        let m = self.num_subcarriers;
        if count == 0 || count > m {
            return Err(Error::InvalidInput(format!(
                "central band width {count} out of range for {m} subcarriers"
            )));
        }
        let mut mask = vec![false; m];
        let half = count / 2;
        for off in 0..count {
            let k = (off + m - half) % m;
            mask[k] = true;
        }
        self.with_active_mask(mask)
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn overlap(&self) -> usize {
        self.overlap
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn active_mask(&self) -> &[bool] {
        &self.active_mask
    }

    pub fn num_active(&self) -> usize {
        self.active_mask.iter().filter(|&&a| a).count()
    }

    /// Prototype filter length `L = K_ov * M`.
    pub fn filter_len(&self) -> usize {
        self.overlap * self.num_subcarriers
    }

    /// Number of PAM (half-symbol) instants, `2 * N_blk`.
    pub fn pam_instants(&self) -> usize {
        2 * self.num_blocks
    }

    /// Transmit signal length, `L + (2 N_blk - 1) * M/2`.
    pub fn signal_len(&self) -> usize {
        self.filter_len() + (self.pam_instants() - 1) * self.num_subcarriers / 2
    }
}

/// A real prototype filter together with its energy `g^T g`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeFilter {
    coefficients: Vec<f64>,
    energy: f64,
}

impl PrototypeFilter {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidInput("empty filter".into()));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite filter coefficient".into()));
        }
        let energy = coefficients.iter().map(|c| c * c).sum();
        Ok(Self {
            coefficients,
            energy,
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }
}

/// PHYDYAS frequency-sampled coefficients H_1..H_3 for overlap factor 4.
const PHYDYAS_H: [f64; 3] = [0.971_960, std::f64::consts::FRAC_1_SQRT_2, 0.235_147];

/// Builds the PHYDYAS prototype filter for `overlap = 4`:
/// `g[m] = 1 + 2 Σ_{q=1}^{3} (-1)^q H_q cos(2π q m / L)` for `m = 0..L-1`,
/// normalized to unit energy. The construction is even-symmetric,
/// `g[m] = g[L-m]` for `m = 1..L-1`, with a numerically-zero sample at `m = 0`.
pub fn phydyas_prototype(num_subcarriers: usize, overlap: usize) -> Result<PrototypeFilter> {
    if overlap != 4 {
        return Err(Error::UnsupportedConfig(format!(
            "PHYDYAS reference coefficients cover overlap 4, got {overlap}"
        )));
    }
    if num_subcarriers < 2 || num_subcarriers % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "num_subcarriers must be even and >= 2, got {num_subcarriers}"
        )));
    }
    let l = overlap * num_subcarriers;
    let mut g = vec![0.0; l];
    for (m, tap) in g.iter_mut().enumerate() {
        let mut acc = 1.0;
        for (i, h) in PHYDYAS_H.iter().enumerate() {
            let q = (i + 1) as f64;
            let sign = if (i + 1) % 2 == 1 { -1.0 } else { 1.0 };
            acc += 2.0 * sign * h * (2.0 * std::f64::consts::PI * q * m as f64 / l as f64).cos();
        }
        *tap = acc;
    }
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    for tap in &mut g {
        *tap /= norm;
    }
    PrototypeFilter::new(g)
}

/// Complex QAM symbols on an `M × N_blk` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QamGrid {
    data: Vec<Complex64>,
    num_subcarriers: usize,
    num_blocks: usize,
}

impl QamGrid {
    pub fn zeros(num_subcarriers: usize, num_blocks: usize) -> Self {
        Self {
            data: vec![Complex64::new(0.0, 0.0); num_subcarriers * num_blocks],
            num_subcarriers,
            num_blocks,
        }
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn get(&self, subcarrier: usize, block: usize) -> Complex64 {
        self.data[block * self.num_subcarriers + subcarrier]
    }

    pub fn set(&mut self, subcarrier: usize, block: usize, value: Complex64) {
        self.data[block * self.num_subcarriers + subcarrier] = value;
    }

    /// Mean symbol energy `σ_d²` over the grid.
    pub fn mean_energy(&self) -> f64 {
        self.data.iter().map(|d| d.norm_sqr()).sum::<f64>() / self.data.len() as f64
    }
}

/// Real PAM values on an `M × 2 N_blk` grid of half-symbol instants.
#[derive(Debug, Clone, PartialEq)]
pub struct PamGrid {
    data: Vec<f64>,
    num_subcarriers: usize,
    num_instants: usize,
}

impl PamGrid {
    pub fn zeros(num_subcarriers: usize, num_instants: usize) -> Self {
        Self {
            data: vec![0.0; num_subcarriers * num_instants],
            num_subcarriers,
            num_instants,
        }
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn num_instants(&self) -> usize {
        self.num_instants
    }

    pub fn get(&self, subcarrier: usize, instant: usize) -> f64 {
        self.data[instant * self.num_subcarriers + subcarrier]
    }

    pub fn set(&mut self, subcarrier: usize, instant: usize, value: f64) {
        self.data[instant * self.num_subcarriers + subcarrier] = value;
    }

    /// Mean PAM energy `σ_a²` over the grid; half the QAM energy after
    /// [`oqam_map`].
    pub fn mean_energy(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>() / self.data.len() as f64
    }

    fn column(&self, instant: usize) -> &[f64] {
        let m = self.num_subcarriers;
        &self.data[instant * m..(instant + 1) * m]
    }
}

/// Discrete-time OQAM-FBMC baseband signal.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmcSignal {
    samples: Vec<Complex64>,
}

impl FbmcSignal {
    pub fn new(samples: Vec<Complex64>) -> Self {
        Self { samples }
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// The OQAM phase factor `e^{jφ_{k,n}}` with `φ_{k,n} = (π/2)(k+n) − π k n`,
/// evaluated exactly: it always lands on a quarter turn in `{1, j, −1, −j}`.
pub fn phase_factor(subcarrier: usize, instant: usize) -> Complex64 {
    quarter_turn(
        (subcarrier as i64) + (instant as i64) - 2 * (subcarrier as i64) * (instant as i64),
    )
}

/// `e^{j (π/2) q}` for integer `q`.
fn quarter_turn(q: i64) -> Complex64 {
    match q.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// OQAM staggering: real parts on even PAM instants, imaginary parts on odd
/// ones, for every subcarrier. The quarter-turn phase of each PAM value is
/// supplied by [`phase_factor`] during synthesis.
pub fn oqam_map(grid: &QamGrid) -> PamGrid {
    let m = grid.num_subcarriers();
    let mut pam = PamGrid::zeros(m, 2 * grid.num_blocks());
    for n in 0..grid.num_blocks() {
        for k in 0..m {
            let d = grid.get(k, n);
            pam.set(k, 2 * n, d.re);
            pam.set(k, 2 * n + 1, d.im);
        }
    }
    pam
}

/// Inverse of [`oqam_map`]: `d[k,n] = a[k,2n] + j a[k,2n+1]`.
pub fn oqam_demap(pam: &PamGrid) -> QamGrid {
    let m = pam.num_subcarriers();
    debug_assert!(pam.num_instants() % 2 == 0);
    let blocks = pam.num_instants() / 2;
    let mut grid = QamGrid::zeros(m, blocks);
    for n in 0..blocks {
        for k in 0..m {
            grid.set(
                k,
                n,
                Complex64::new(pam.get(k, 2 * n), pam.get(k, 2 * n + 1)),
            );
        }
    }
    grid
}

fn check_chain_dims(pam: &PamGrid, filter: &PrototypeFilter, config: &FbmcConfig) -> Result<()> {
    if pam.num_subcarriers() != config.num_subcarriers()
        || pam.num_instants() != config.pam_instants()
    {
        return Err(Error::DimensionMismatch {
            expected: config.num_subcarriers() * config.pam_instants(),
            actual: pam.num_subcarriers() * pam.num_instants(),
        });
    }
    check_filter_dims(filter, config)
}

fn check_filter_dims(filter: &PrototypeFilter, config: &FbmcConfig) -> Result<()> {
    if filter.len() != config.filter_len() {
        return Err(Error::DimensionMismatch {
            expected: config.filter_len(),
            actual: filter.len(),
        });
    }
    Ok(())
}

fn check_signal_dims(signal: &FbmcSignal, config: &FbmcConfig) -> Result<()> {
    if signal.len() != config.signal_len() {
        return Err(Error::DimensionMismatch {
            expected: config.signal_len(),
            actual: signal.len(),
        });
    }
    Ok(())
}

/// Synthesis filter bank (fast path): per PAM instant, one unnormalized
/// inverse FFT generates the subcarrier exponentials, which the prototype
/// shapes through its polyphase (periodic-extension) structure.
///
/// Computes `s[m] = Σ_k Σ_n a_{k,n} g[m − n M/2] e^{j 2π k m / M} e^{j φ_{k,n}}`.
pub fn synthesize(
    pam: &PamGrid,
    filter: &PrototypeFilter,
    config: &FbmcConfig,
) -> Result<FbmcSignal> {
    check_chain_dims(pam, filter, config)?;
    let m = config.num_subcarriers();
    let half = m / 2;
    let g = filter.coefficients();

    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(m);

    let mut samples = vec![Complex64::new(0.0, 0.0); config.signal_len()];
    let mut spectrum = vec![Complex64::new(0.0, 0.0); m];
    for n in 0..config.pam_instants() {
        let col = pam.column(n);
        for (k, slot) in spectrum.iter_mut().enumerate() {
            // e^{j 2π k (n M/2) / M} = (−1)^{k n} realigns the block to the
            // absolute sample index
            let shift_sign = if (k * n) % 2 == 0 { 1.0 } else { -1.0 };
            *slot = phase_factor(k, n) * (col[k] * shift_sign);
        }
        ifft.process(&mut spectrum);
        let base = n * half;
        for (mp, &tap) in g.iter().enumerate() {
            samples[base + mp] += spectrum[mp % m] * tap;
        }
    }
    Ok(FbmcSignal::new(samples))
}

/// Synthesis by the literal double sum; the reference for the fast path.
pub fn synthesize_direct(
    pam: &PamGrid,
    filter: &PrototypeFilter,
    config: &FbmcConfig,
) -> Result<FbmcSignal> {
    check_chain_dims(pam, filter, config)?;
    let m = config.num_subcarriers();
    let half = m / 2;
    let g = filter.coefficients();
    let twiddle = forward_twiddles(m);

    let mut samples = vec![Complex64::new(0.0, 0.0); config.signal_len()];
    for n in 0..config.pam_instants() {
        for k in 0..m {
            let a = pam.get(k, n);
            if a == 0.0 {
                continue;
            }
            let coef = phase_factor(k, n) * a;
            let base = n * half;
            for (mp, &tap) in g.iter().enumerate() {
                let sample_index = base + mp;
                let w = twiddle[(k * sample_index) % m].conj(); // e^{+j 2π k m / M}
                samples[sample_index] += coef * tap * w;
            }
        }
    }
    Ok(FbmcSignal::new(samples))
}

/// Analysis filter bank (fast path): windows the signal by the prototype,
/// folds each instant's span modulo `M`, and evaluates every subcarrier with
/// one forward FFT. The real part of each matched-filter output is divided by
/// the filter's actual energy, so approximated (non-unit-energy) filters
/// still demodulate at unit gain.
pub fn analyze(
    signal: &FbmcSignal,
    filter: &PrototypeFilter,
    config: &FbmcConfig,
) -> Result<PamGrid> {
    check_signal_dims(signal, config)?;
    check_filter_dims(filter, config)?;
    let m = config.num_subcarriers();
    let half = m / 2;
    let g = filter.coefficients();
    let energy = filter.energy();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);

    let mut pam = PamGrid::zeros(m, config.pam_instants());
    let mut folded = vec![Complex64::new(0.0, 0.0); m];
    for n in 0..config.pam_instants() {
        let base = n * half;
        folded.fill(Complex64::new(0.0, 0.0));
        for (mp, &tap) in g.iter().enumerate() {
            folded[mp % m] += signal.samples()[base + mp] * tap;
        }
        fft.process(&mut folded);
        for (k, &bin) in folded.iter().enumerate() {
            let shift_sign = if (k * n) % 2 == 0 { 1.0 } else { -1.0 };
            let r = bin * phase_factor(k, n).conj() * shift_sign;
            pam.set(k, n, r.re / energy);
        }
    }
    Ok(pam)
}

/// Analysis by the literal inner products; the reference for the fast path.
pub fn analyze_direct(
    signal: &FbmcSignal,
    filter: &PrototypeFilter,
    config: &FbmcConfig,
) -> Result<PamGrid> {
    let grid = analyze_complex(signal, filter, config)?;
    let m = config.num_subcarriers();
    let energy = filter.energy();
    let mut pam = PamGrid::zeros(m, config.pam_instants());
    for n in 0..config.pam_instants() {
        for k in 0..m {
            pam.set(k, n, grid[n * m + k].re / energy);
        }
    }
    Ok(pam)
}

/// The raw demodulation inner products `⟨s, g_{k,n}⟩` as a complex grid in
/// instant-major order, with no energy normalization or real-part
/// extraction. This map is the adjoint of [`synthesize`].
pub fn analyze_complex(
    signal: &FbmcSignal,
    filter: &PrototypeFilter,
    config: &FbmcConfig,
) -> Result<Vec<Complex64>> {
    check_signal_dims(signal, config)?;
    check_filter_dims(filter, config)?;
    let m = config.num_subcarriers();
    let half = m / 2;
    let g = filter.coefficients();
    let twiddle = forward_twiddles(m);

    let mut out = vec![Complex64::new(0.0, 0.0); m * config.pam_instants()];
    for n in 0..config.pam_instants() {
        let base = n * half;
        for k in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for (mp, &tap) in g.iter().enumerate() {
                let sample_index = base + mp;
                let w = twiddle[(k * sample_index) % m]; // e^{−j 2π k m / M}
                acc += signal.samples()[sample_index] * tap * w;
            }
            out[n * m + k] = acc * phase_factor(k, n).conj();
        }
    }
    Ok(out)
}

/// `e^{−j 2π t / M}` for `t = 0..M`.
fn forward_twiddles(m: usize) -> Vec<Complex64> {
    (0..m)
        .map(|t| {
            let theta = -2.0 * std::f64::consts::PI * t as f64 / m as f64;
            Complex64::new(theta.cos(), theta.sin())
        })
        .collect()
}

/// Residual interference variance of the chain,
/// `σ_I² = Σ_{(k,n)≠(0,0)} |Re{Σ_m g_{0,0}[m] g*_{k,n}[m]}|²`,
/// with `k` over all `M` subcarriers and `|n| ≤ 2 K_ov − 1` (the full overlap
/// support of shifts by `M/2`). Deterministic in the filter alone.
pub fn interference_variance(filter: &PrototypeFilter, config: &FbmcConfig) -> Result<f64> {
    check_filter_dims(filter, config)?;
    let m = config.num_subcarriers();
    let l = config.filter_len() as i64;
    let half = (m / 2) as i64;
    let g = filter.coefficients();
    let twiddle = forward_twiddles(m);
    let max_shift = 2 * config.overlap() as i64 - 1;

    let mut total = 0.0;
    let mut folded = vec![0.0; m];
    for n in -max_shift..=max_shift {
        let offset = n * half;
        let lo = offset.max(0);
        let hi = (l + offset).min(l);
        // fold g[m]·g[m − n M/2] modulo M; the product is real so every
        // subcarrier shares this work
        folded.fill(0.0);
        for sample in lo..hi {
            let prod = g[sample as usize] * g[(sample - offset) as usize];
            folded[(sample as usize) % m] += prod;
        }
        for k in 0..m {
            if k == 0 && n == 0 {
                continue;
            }
            let mut acc = Complex64::new(0.0, 0.0);
            for (t, &f) in folded.iter().enumerate() {
                acc += f * twiddle[(k * t) % m];
            }
            let ph = quarter_turn(k as i64 + n - 2 * (k as i64) * n);
            let re = (acc * ph.conj()).re;
            total += re * re;
        }
    }
    Ok(total)
}

/// Writes a filter as `index,value` CSV with `#`-prefixed metadata (m, k_ov,
/// energy). Values use Rust's shortest round-trip float formatting, so the
/// file reads back bit-exactly.
pub fn write_filter_csv<W: Write>(
    w: &mut W,
    filter: &PrototypeFilter,
    num_subcarriers: usize,
    overlap: usize,
) -> Result<()> {
    writeln!(w, "# m={num_subcarriers}")?;
    writeln!(w, "# k_ov={overlap}")?;
    writeln!(w, "# energy={}", filter.energy())?;
    writeln!(w, "index,value")?;
    for (i, c) in filter.coefficients().iter().enumerate() {
        writeln!(w, "{i},{c}")?;
    }
    Ok(())
}

/// Reads a filter written by [`write_filter_csv`], returning the filter and
/// its `(num_subcarriers, overlap)` metadata.
pub fn read_filter_csv<R: BufRead>(r: R) -> Result<(PrototypeFilter, usize, usize)> {
    let mut m: Option<usize> = None;
    let mut k_ov: Option<usize> = None;
    let mut energy: Option<f64> = None;
    let mut coefficients = Vec::new();
    let mut saw_header = false;

    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let (key, value) = meta
                .trim()
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("malformed metadata line: {line}")))?;
            match key.trim() {
                "m" => m = Some(parse(value)?),
                "k_ov" => k_ov = Some(parse(value)?),
                "energy" => energy = Some(parse(value)?),
                other => return Err(Error::Parse(format!("unknown metadata key: {other}"))),
            }
            continue;
        }
        if !saw_header {
            if line != "index,value" {
                return Err(Error::Parse(format!(
                    "expected header 'index,value', got '{line}'"
                )));
            }
            saw_header = true;
            continue;
        }
        let (idx, value) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("malformed row '{line}'")))?;
        let idx: usize = parse(idx)?;
        if idx != coefficients.len() {
            return Err(Error::Parse(format!(
                "filter rows out of order: expected index {}, got {idx}",
                coefficients.len()
            )));
        }
        coefficients.push(parse::<f64>(value)?);
    }

    let m = m.ok_or_else(|| Error::Parse("missing '# m=' metadata".into()))?;
    let k_ov = k_ov.ok_or_else(|| Error::Parse("missing '# k_ov=' metadata".into()))?;
    let filter = PrototypeFilter::new(coefficients)?;
    if filter.len() != m * k_ov {
        return Err(Error::Parse(format!(
            "filter length {} does not match m*k_ov = {}",
            filter.len(),
            m * k_ov
        )));
    }
    if let Some(e) = energy {
        if (e - filter.energy()).abs() > 1e-9 * filter.energy().max(1e-30) {
            return Err(Error::Parse(format!(
                "stated energy {e} disagrees with coefficients ({})",
                filter.energy()
            )));
        }
    }
    Ok((filter, m, k_ov))
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("invalid number '{s}'")))
}
