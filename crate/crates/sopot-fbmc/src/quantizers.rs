//! The three SOPOT approximation algorithms: two's-complement quantization
//! with CSD recoding, Signed Digit Loading, and Matching Pursuits with
//! Generalized Bit Planes. All three share the nearest-power-of-two depth
//! rule of [`nearest_pow2_depth`].

use crate::error::{Error, Result};
use crate::sopot::{exp2i, pow2_ceil_exponent, SopotApprox, SptTerm};

/// A `B`-bit two's-complement fractional word.
///
/// `bits[0]` carries weight −1 and `bits[b]` carries weight `2^(-b)`, so the
/// representable range is `[-1, 1 - 2^-(B-1)]` on a grid of step `2^-(B-1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedPointWord {
    bits: Vec<u8>,
}

impl FixedPointWord {
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if bits.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "wordlength must be at least 2, got {}",
                bits.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidInput("bits must be 0 or 1".into()));
        }
        Ok(Self { bits })
    }

    pub fn wordlength(&self) -> u32 {
        self.bits.len() as u32
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// `-bits[0] + Σ_{b≥1} bits[b] · 2^(-b)`, exact.
    pub fn value(&self) -> f64 {
        self.as_scaled_integer() as f64 * exp2i(-(i64::from(self.wordlength()) - 1))
    }

    /// The word as the integer `value * 2^(B-1)`.
    fn as_scaled_integer(&self) -> i64 {
        let b = self.bits.len();
        let mut n = -i64::from(self.bits[0]) << (b - 1);
        for (j, &bit) in self.bits.iter().enumerate().skip(1) {
            n += i64::from(bit) << (b - 1 - j);
        }
        n
    }
}

/// Quantizes `v` to the nearest `B`-bit two's-complement value, ties rounding
/// to an even last bit. Values outside the representable range saturate.
pub fn quantize_fixed_point(v: f64, wordlength: u32) -> Result<FixedPointWord> {
    if wordlength < 2 {
        return Err(Error::InvalidInput(format!(
            "wordlength must be at least 2, got {wordlength}"
        )));
    }
    if !v.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite input {v}")));
    }
    let half_range = 1i64 << (wordlength - 1);
    let n = (v * half_range as f64).round_ties_even() as i64;
    let n = n.clamp(-half_range, half_range - 1);

    let b = wordlength as usize;
    let pattern = (n as u64) & ((1u64 << b) - 1);
    let bits = (0..b)
        .map(|j| ((pattern >> (b - 1 - j)) & 1) as u8)
        .collect();
    Ok(FixedPointWord { bits })
}

/// Non-adjacent-form digits of `n`, as `(bit index from LSB, digit)` pairs.
fn naf_digits(mut n: i64) -> Vec<(u32, i8)> {
    let mut digits = Vec::new();
    let mut j = 0u32;
    while n != 0 {
        if n % 2 != 0 {
            let z = 2 - (n.rem_euclid(4)) as i8;
            n -= i64::from(z);
            digits.push((j, z));
        }
        n /= 2;
        j += 1;
    }
    digits
}

/// Recodes a fixed-point word into its canonical signed digit form: the
/// unique signed-digit representation with no two adjacent nonzero digits,
/// which is also of minimal digit count. Reconstruction is exact.
pub fn csd_recode(word: &FixedPointWord) -> SopotApprox {
    let b = word.wordlength();
    let mut approx = SopotApprox::new(1, b - 1);
    for (j, z) in naf_digits(word.as_scaled_integer()) {
        approx.push_term(SptTerm::new(0, b - 1 - j, z));
    }
    approx
}

/// CSD-approximates one scalar with `|v| <= 1`: the value is shifted by a
/// power of two into `(0.5, 1]`, quantized to a `B`-bit word, CSD-recoded,
/// and the shift folded back into the term depths. Every operation is a
/// shift, so the result stays a plain SOPOT allocation.
pub fn csd_scalar(v: f64, wordlength: u32) -> Result<SopotApprox> {
    let terms = csd_element_terms(v, wordlength, 0)?;
    let depth_limit = terms.iter().map(|t| t.depth).max().unwrap_or(0);
    SopotApprox::with_terms(1, depth_limit, 0, terms)
}

/// CSD digits for element `position` of a vector; shared by [`csd_scalar`]
/// and [`csd_vector`].
fn csd_element_terms(v: f64, wordlength: u32, position: usize) -> Result<Vec<SptTerm>> {
    if wordlength < 2 {
        return Err(Error::InvalidInput(format!(
            "wordlength must be at least 2, got {wordlength}"
        )));
    }
    if !v.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite input {v}")));
    }
    if v.abs() > 1.0 {
        return Err(Error::InvalidInput(format!(
            "|{v}| > 1; scale the input first"
        )));
    }
    if v == 0.0 {
        return Ok(Vec::new());
    }

    // mantissa in (0.5, 1]
    let mut exponent = pow2_ceil_exponent(v.abs());
    let mantissa = v * exp2i(-i64::from(exponent));
    let half_range = 1i64 << (wordlength - 1);
    let mut n = (mantissa * half_range as f64).round_ties_even() as i64;
    if n == half_range {
        // +1.0 is not a two's-complement value; renormalize to 0.5 one
        // exponent up
        exponent += 1;
        n = half_range / 2;
    }

    let terms = naf_digits(n)
        .into_iter()
        .map(|(j, z)| {
            let depth = i64::from(wordlength) - 1 - i64::from(j) - i64::from(exponent);
            debug_assert!(depth >= 0);
            SptTerm::new(position, depth as u32, z)
        })
        .collect();
    Ok(terms)
}

/// Element-by-element CSD approximation of a vector with `‖v‖∞ <= 1`.
pub fn csd_vector(v: &[f64], wordlength: u32) -> Result<SopotApprox> {
    let mut terms = Vec::new();
    for (i, &x) in v.iter().enumerate() {
        terms.extend(csd_element_terms(x, wordlength, i)?);
    }
    let depth_limit = terms.iter().map(|t| t.depth).max().unwrap_or(0);
    SopotApprox::with_terms(v.len(), depth_limit, 0, terms)
}

/// Stopping budget shared by the greedy allocators: a cap on the total SPT
/// count and on the bit-plane depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantizerBudget {
    /// Maximum number of SPTs across the whole vector (`M_max`).
    pub max_spts: usize,
    /// Deepest allowed bit plane (`B_max`); a computed depth beyond this
    /// stops the allocator.
    pub max_depth: u32,
}

impl QuantizerBudget {
    /// Default depth cap: beyond 24 planes the dyadic terms fall under
    /// single-precision significance for filter work.
    pub const DEFAULT_MAX_DEPTH: u32 = 24;

    pub fn new(max_spts: usize, max_depth: u32) -> Result<Self> {
        if max_spts == 0 {
            return Err(Error::InvalidInput("max_spts must be at least 1".into()));
        }
        Ok(Self {
            max_spts,
            max_depth,
        })
    }
}

/// One greedy iteration as recorded in a [`PursuitTrace`].
#[derive(Debug, Clone, PartialEq)]
pub struct PursuitIteration {
    pub index: usize,
    /// Positions allocated this iteration (one for SDL, up to `P` for MPGBP).
    pub positions: Vec<usize>,
    pub signs: Vec<i8>,
    pub depth: u32,
    /// `‖r‖∞` after this iteration's residue update.
    pub residue_inf_norm: f64,
}

/// Iteration-by-iteration record of a greedy allocation run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PursuitTrace {
    pub iterations: Vec<PursuitIteration>,
}

/// Nearest-power-of-two bit-plane depth for a residual magnitude.
///
/// Returns the `k` with `(3/4) * 2^-k <= magnitude / P < (3/4) * 2^-(k+1)`
/// (lower bound inclusive), i.e. `k = ⌈-log2(4 * magnitude / (3P))⌉` with the
/// boundaries decided by exact dyadic comparison rather than by the rounded
/// logarithm.
pub fn nearest_pow2_depth(magnitude: f64, terms_per_step: usize) -> Result<i64> {
    if terms_per_step == 0 {
        return Err(Error::InvalidInput(
            "terms_per_step must be at least 1".into(),
        ));
    }
    if !magnitude.is_finite() || magnitude <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "depth rule needs a positive magnitude, got {magnitude}"
        )));
    }
    let p = terms_per_step as f64;
    // 3P/4 is exact for any reasonable P, and 2^-k is exact, so the bound
    // comparisons below are exact.
    let lower_at = |k: i64| 0.75 * p * exp2i(-k);
    let mut k = (-(4.0 * magnitude / (3.0 * p)).log2()).ceil() as i64;
    while magnitude < lower_at(k) {
        k += 1;
    }
    while magnitude >= lower_at(k - 1) {
        k -= 1;
    }
    Ok(k)
}

fn check_pursuit_input(v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidInput("input vector is empty".into()));
    }
    if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite value {bad}")));
    }
    let max = v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if max > 1.0 {
        return Err(Error::InvalidInput(format!(
            "‖v‖∞ = {max} > 1; scale the input first (unit_inf_scale)"
        )));
    }
    Ok(())
}

/// First index attaining the maximum absolute value.
fn argmax_abs(r: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in r.iter().enumerate().skip(1) {
        if x.abs() > r[best].abs() {
            best = i;
        }
    }
    best
}

fn inf_norm(r: &[f64]) -> f64 {
    r.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

/// Signed Digit Loading: one SPT per iteration on the entry with the largest
/// absolute residual (first index on ties), sign from the residual, depth
/// from the nearest-power-of-two rule with `P = 1`.
///
/// Stops when `max_spts` SPTs are placed, a computed depth exceeds
/// `max_depth`, or the residual is exactly zero. When the depth cap is not
/// binding the output holds exactly `max_spts` SPTs.
pub fn sdl_approximate(v: &[f64], budget: &QuantizerBudget) -> Result<(SopotApprox, PursuitTrace)> {
    check_pursuit_input(v)?;
    let mut residue = v.to_vec();
    let mut approx = SopotApprox::new(v.len(), budget.max_depth);
    let mut trace = PursuitTrace::default();

    let mut iteration = 0;
    while approx.spt_count() < budget.max_spts {
        let p = argmax_abs(&residue);
        let magnitude = residue[p].abs();
        if magnitude == 0.0 {
            break;
        }
        let k = nearest_pow2_depth(magnitude, 1)?;
        debug_assert!(k >= 0, "‖v‖∞ <= 1 keeps depths non-negative");
        if k > i64::from(budget.max_depth) {
            break;
        }
        let sign: i8 = if residue[p] > 0.0 { 1 } else { -1 };
        residue[p] -= f64::from(sign) * exp2i(-k);
        approx.push_term(SptTerm::new(p, k as u32, sign));
        trace.iterations.push(PursuitIteration {
            index: iteration,
            positions: vec![p],
            signs: vec![sign],
            depth: k as u32,
            residue_inf_norm: inf_norm(&residue),
        });
        iteration += 1;
    }
    Ok((approx, trace))
}

/// Matching Pursuits with Generalized Bit Planes: each iteration builds a
/// ternary codeword from the `P = ⌊√N⌋` largest-magnitude residual entries
/// (signs from the residual, exact zeros skipped), places all of its SPTs at
/// the depth given by the nearest-power-of-two rule, and subtracts the scaled
/// codeword from the residual.
///
/// The SPT budget is checked between iterations, so the raw count may exceed
/// `max_spts` by at most `P - 1`; when the depth cap is not binding the raw
/// count is `⌈max_spts / P⌉ · P`.
pub fn mpgbp_approximate(
    v: &[f64],
    budget: &QuantizerBudget,
) -> Result<(SopotApprox, PursuitTrace)> {
    check_pursuit_input(v)?;
    let n = v.len();
    let p = (n as f64).sqrt().floor() as usize;
    let p = p.max(1);

    let mut residue = v.to_vec();
    let mut approx = SopotApprox::new(n, budget.max_depth);
    let mut trace = PursuitTrace::default();
    let mut ranked: Vec<usize> = (0..n).collect();

    let mut iteration = 0;
    while approx.spt_count() < budget.max_spts {
        // re-seed the index order every iteration so the stable sort breaks
        // equal magnitudes index-ascending, not by the previous ranking
        for (i, slot) in ranked.iter_mut().enumerate() {
            *slot = i;
        }
        ranked.sort_by(|&a, &b| {
            residue[b]
                .abs()
                .partial_cmp(&residue[a].abs())
                .expect("residues are finite")
        });
        let top = &ranked[..p];
        let magnitude: f64 = top.iter().map(|&i| residue[i].abs()).sum();
        if magnitude == 0.0 {
            break;
        }
        let k = nearest_pow2_depth(magnitude, p)?;
        debug_assert!(k >= 0);
        if k > i64::from(budget.max_depth) {
            break;
        }
        let mut positions = Vec::with_capacity(p);
        let mut signs = Vec::with_capacity(p);
        for &i in top {
            if residue[i] == 0.0 {
                continue;
            }
            let sign: i8 = if residue[i] > 0.0 { 1 } else { -1 };
            residue[i] -= f64::from(sign) * exp2i(-k);
            approx.push_term(SptTerm::new(i, k as u32, sign));
            positions.push(i);
            signs.push(sign);
        }
        trace.iterations.push(PursuitIteration {
            index: iteration,
            positions,
            signs,
            depth: k as u32,
            residue_inf_norm: inf_norm(&residue),
        });
        iteration += 1;
    }
    Ok((approx, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn word_from_str(s: &str) -> FixedPointWord {
        // "0.0111" -> bits [0,0,1,1,1]
        let bits = s
            .chars()
            .filter(|c| *c != '.')
            .map(|c| c.to_digit(2).unwrap() as u8)
            .collect();
        FixedPointWord::from_bits(bits).unwrap()
    }

    #[test]
    fn fixed_point_examples() {
        let w = quantize_fixed_point(0.4375, 5).unwrap();
        assert_eq!(w.bits(), &[0, 0, 1, 1, 1]);
        assert_eq!(w.value(), 0.4375);

        let w = quantize_fixed_point(0.7, 3).unwrap();
        assert_eq!(w.value(), 0.75);

        let w = quantize_fixed_point(-1.2, 4).unwrap();
        assert_eq!(w.value(), -1.0);
    }

    #[test]
    fn fixed_point_ties_round_to_even() {
        // 0.3125 * 4 = 1.25 -> grid midpoints: 0.375*4 = 1.5 rounds to 2 (even)
        let w = quantize_fixed_point(0.375, 3).unwrap();
        assert_eq!(w.value(), 0.5);
        // 0.125 * 4 = 0.5 rounds to 0 (even), not 1
        let w = quantize_fixed_point(0.125, 3).unwrap();
        assert_eq!(w.value(), 0.0);
    }

    #[test]
    fn fixed_point_rejects_bad_input() {
        assert!(quantize_fixed_point(f64::NAN, 4).is_err());
        assert!(quantize_fixed_point(0.5, 1).is_err());
    }

    #[test]
    fn csd_recode_examples() {
        // 0.4375 = 1/2 - 1/16 : digits over depths 0..4 are [0,1,0,0,-1]
        let a = csd_recode(&word_from_str("0.0111"));
        let mut terms = a.terms().to_vec();
        terms.sort_by_key(|t| t.depth);
        assert_eq!(terms, vec![SptTerm::new(0, 1, 1), SptTerm::new(0, 4, -1)]);
        assert_eq!(a.reconstruct(), vec![0.4375]);

        // zero word
        let a = csd_recode(&word_from_str("0.000"));
        assert_eq!(a.spt_count(), 0);

        // 0.625 already non-adjacent: [0,1,0,1]
        let a = csd_recode(&word_from_str("0.101"));
        let mut terms = a.terms().to_vec();
        terms.sort_by_key(|t| t.depth);
        assert_eq!(terms, vec![SptTerm::new(0, 1, 1), SptTerm::new(0, 3, 1)]);
    }

    /// Brute force: minimal signed-digit weight for value n*2^-(B-1) using
    /// digits at depths 0..=B. Independent of the NAF path.
    fn brute_min_weight(n: i64, b: u32) -> u32 {
        fn rec(depth: i64, remaining: i64, unit: i64, used: u32, best: &mut u32) {
            if used >= *best {
                return;
            }
            if remaining == 0 {
                *best = (*best).min(used);
                return;
            }
            if depth < 0 {
                return;
            }
            // remaining must be reachable: |remaining| <= unit * (2^(depth+1) - 1) / 2^depth,
            // bounded by 2*unit when summing all remaining planes
            if remaining.abs() > 2 * unit {
                return;
            }
            for digit in [-1i64, 0, 1] {
                rec(
                    depth - 1,
                    remaining - digit * unit,
                    unit / 2,
                    used + digit.unsigned_abs() as u32,
                    best,
                );
            }
        }
        // scale so the deepest plane (depth B) has unit 1: value n*2^-(B-1) => n*2 in plane-B units
        let mut best = u32::MAX;
        rec(i64::from(b), n * 2, 1i64 << b, 0, &mut best);
        best
    }

    #[test]
    fn csd_exactness_and_naf_exhaustive_small() {
        for b in 2..=8u32 {
            let half = 1i64 << (b - 1);
            for n in -half..half {
                let v = n as f64 / half as f64;
                let w = quantize_fixed_point(v, b).unwrap();
                assert_eq!(w.value(), v);
                let a = csd_recode(&w);
                assert_eq!(a.reconstruct(), vec![v], "B={b} n={n}");
                // non-adjacent form
                let mut depths: Vec<u32> = a.terms().iter().map(|t| t.depth).collect();
                depths.sort_unstable();
                assert!(
                    depths.windows(2).all(|w| w[1] - w[0] >= 2),
                    "adjacent digits for B={b} n={n}"
                );
            }
        }
    }

    #[test]
    fn csd_minimality_small() {
        for b in 2..=6u32 {
            let half = 1i64 << (b - 1);
            for n in -half..half {
                let w = quantize_fixed_point(n as f64 / half as f64, b).unwrap();
                let naf_count = csd_recode(&w).spt_count() as u32;
                assert_eq!(naf_count, brute_min_weight(n, b), "B={b} n={n}");
            }
        }
    }

    #[test]
    fn csd_scalar_uses_mantissa_normalization() {
        // 0.15 normalizes to 0.6 at exponent -2; a 4-bit word still carries
        // ~3 significant digits rather than quantizing to 0.125.
        let a = csd_scalar(0.15, 4).unwrap();
        let err = (a.reconstruct()[0] - 0.15).abs();
        assert!(err <= 0.15 * f64::powi(2.0, -4), "err {err}");

        assert_eq!(csd_scalar(0.0, 4).unwrap().spt_count(), 0);
        // exact +1 and -1
        assert_eq!(csd_scalar(1.0, 4).unwrap().reconstruct(), vec![1.0]);
        assert_eq!(csd_scalar(-1.0, 4).unwrap().reconstruct(), vec![-1.0]);
        assert!(csd_scalar(1.5, 4).is_err());
    }

    #[test]
    fn csd_vector_zero_input() {
        let a = csd_vector(&[0.0, 0.0, 0.0], 6).unwrap();
        assert_eq!(a.spt_count(), 0);
        assert_eq!(a.reconstruct(), vec![0.0; 3]);
    }

    #[test]
    fn csd_density_approaches_one_third() {
        // mean nonzero fraction over random values in [-1, 1), B = 16
        let mut rng = StdRng::seed_from_u64(0x5eed);
        let b = 16u32;
        let mut total = 0usize;
        let samples = 100_000;
        for _ in 0..samples {
            let v: f64 = rng.gen_range(-1.0..1.0);
            total += csd_recode(&quantize_fixed_point(v, b).unwrap()).spt_count();
        }
        let fraction = total as f64 / samples as f64 / f64::from(b);
        let dev = (fraction - 1.0 / 3.0).abs() / (1.0 / 3.0);
        assert!(dev < 0.03, "fraction {fraction} deviates {dev:.3} from 1/3");
    }

    #[test]
    fn nearest_pow2_depth_examples() {
        assert_eq!(nearest_pow2_depth(0.7, 1).unwrap(), 1);
        // exact lower boundary (3/4) * 2^-3
        assert_eq!(nearest_pow2_depth(0.09375, 1).unwrap(), 3);
        assert_eq!(nearest_pow2_depth(1.0, 2).unwrap(), 1);
        assert!(nearest_pow2_depth(0.0, 1).is_err());
        assert!(nearest_pow2_depth(-0.5, 1).is_err());
    }

    #[test]
    fn nearest_pow2_depth_boundary_sweep() {
        // every magnitude must satisfy the bounding region exactly
        let mut rng = StdRng::seed_from_u64(77);
        for _ in 0..10_000 {
            let mag: f64 = rng.gen_range(1e-9..1.0);
            let k = nearest_pow2_depth(mag, 1).unwrap();
            let lower = 0.75 * f64::powi(2.0, -k as i32);
            assert!(lower <= mag && mag < 2.0 * lower, "mag={mag} k={k}");
        }
    }

    #[test]
    fn sdl_examples() {
        let budget = QuantizerBudget::new(4, 10).unwrap();
        let (a, _) = sdl_approximate(&[0.5, 0.0], &budget).unwrap();
        assert_eq!(a.terms(), &[SptTerm::new(0, 1, 1)]);

        let budget = QuantizerBudget::new(3, 10).unwrap();
        let (a, trace) = sdl_approximate(&[0.7], &budget).unwrap();
        let kc: Vec<(u32, i8)> = a.terms().iter().map(|t| (t.depth, t.sign)).collect();
        assert_eq!(kc, vec![(1, 1), (2, 1), (4, -1)]);
        assert!((a.reconstruct()[0] - 0.6875).abs() < 1e-15);
        assert_eq!(trace.iterations.len(), 3);

        let budget = QuantizerBudget::new(2, 10).unwrap();
        let (a, _) = sdl_approximate(&[0.7, -0.3], &budget).unwrap();
        assert_eq!(a.reconstruct(), vec![0.5, -0.25]);
    }

    #[test]
    fn sdl_rejects_bad_input() {
        let budget = QuantizerBudget::new(4, 10).unwrap();
        assert!(sdl_approximate(&[], &budget).is_err());
        assert!(sdl_approximate(&[1.25], &budget).is_err());
    }

    #[test]
    fn sdl_exact_budget_when_depth_not_binding() {
        let budget = QuantizerBudget::new(40, 60).unwrap();
        let (a, _) = sdl_approximate(&[0.7, -0.3, 0.11], &budget).unwrap();
        assert_eq!(a.spt_count(), 40);
    }

    #[test]
    fn sdl_depth_cap_stops_allocation() {
        // 0.7 -> k=1; residue 0.2 -> k=2 > 1 stops
        let budget = QuantizerBudget::new(10, 1).unwrap();
        let (a, _) = sdl_approximate(&[0.7], &budget).unwrap();
        assert_eq!(a.spt_count(), 1);
        assert_eq!(a.terms()[0].depth, 1);
    }

    #[test]
    fn mpgbp_examples() {
        let budget = QuantizerBudget::new(4, 10).unwrap();
        let (a, trace) = mpgbp_approximate(&[0.5, -0.5, 0.0, 0.0], &budget).unwrap();
        assert_eq!(trace.iterations.len(), 1);
        assert_eq!(trace.iterations[0].depth, 1);
        assert_eq!(a.terms(), &[SptTerm::new(0, 1, 1), SptTerm::new(1, 1, -1)]);
        assert_eq!(a.reconstruct(), vec![0.5, -0.5, 0.0, 0.0]);

        // P = 1 on scalars reduces to SDL
        let budget = QuantizerBudget::new(3, 10).unwrap();
        let (mp, _) = mpgbp_approximate(&[0.7], &budget).unwrap();
        let (sdl, _) = sdl_approximate(&[0.7], &budget).unwrap();
        assert_eq!(mp.terms(), sdl.terms());

        let (a, trace) = mpgbp_approximate(&[0.0, 0.0], &budget).unwrap();
        assert_eq!(a.spt_count(), 0);
        assert!(trace.iterations.is_empty());
    }

    #[test]
    fn mpgbp_budget_bound() {
        // N=9 -> P=3; budget 4 -> iterations stop once count >= 4, raw count
        // is ceil(4/3)*3 = 6 when depth is not binding
        let v = [0.9, -0.8, 0.7, 0.6, -0.5, 0.4, 0.3, -0.2, 0.1];
        let budget = QuantizerBudget::new(4, 60).unwrap();
        let (a, _) = mpgbp_approximate(&v, &budget).unwrap();
        assert_eq!(a.spt_count(), 6);
        assert!(a.spt_count() <= budget.max_spts + 3 - 1);
    }

    #[test]
    fn mpgbp_ties_break_index_ascending_every_iteration() {
        // iteration 0 spends on {2,3}; iteration 1 ranks index 1 above 0 and
        // leaves them with equal residues ±0.125; the iteration-2 tie must
        // still resolve index-ascending
        let v = [0.375, 0.625, 0.9, -0.9];
        let budget = QuantizerBudget::new(6, 10).unwrap();
        let (_, trace) = mpgbp_approximate(&v, &budget).unwrap();
        assert_eq!(trace.iterations[1].positions, vec![1, 0]);
        assert_eq!(trace.iterations[2].positions, vec![0, 1]);
    }

    #[test]
    fn traces_are_deterministic() {
        let v = [0.31, -0.7, 0.7, 0.12];
        let budget = QuantizerBudget::new(9, 20).unwrap();
        let (a1, t1) = sdl_approximate(&v, &budget).unwrap();
        let (a2, t2) = sdl_approximate(&v, &budget).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(t1, t2);
        // tie at |r| = 0.7: index 1 is picked first
        assert_eq!(t1.iterations[0].positions, vec![1]);

        let (b1, u1) = mpgbp_approximate(&v, &budget).unwrap();
        let (b2, u2) = mpgbp_approximate(&v, &budget).unwrap();
        assert_eq!(b1, b2);
        assert_eq!(u1, u2);
    }

    #[test]
    fn sdl_contraction_and_inf_monotonicity() {
        let mut rng = StdRng::seed_from_u64(0xabcd);
        for _ in 0..10_000 {
            let v: f64 = rng.gen_range(-1.0..1.0);
            if v == 0.0 {
                continue;
            }
            let k = nearest_pow2_depth(v.abs(), 1).unwrap();
            let sign = if v > 0.0 { 1.0 } else { -1.0 };
            let r_new = v - sign * f64::powi(2.0, -k as i32);
            assert!(
                r_new.abs() <= v.abs() / 3.0 * (1.0 + 1e-15),
                "v={v} k={k} r_new={r_new}"
            );
        }

        let budget = QuantizerBudget::new(64, 40).unwrap();
        let v: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, trace) = sdl_approximate(&v, &budget).unwrap();
        let mut last = inf_norm(&v);
        for it in &trace.iterations {
            assert!(it.residue_inf_norm <= last * (1.0 + 1e-15));
            last = it.residue_inf_norm;
        }
    }

    #[test]
    fn mpgbp_l2_descent() {
        let mut rng = StdRng::seed_from_u64(0x1234);
        for _ in 0..50 {
            let n = rng.gen_range(4..128);
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let budget = QuantizerBudget::new(4 * n, 40).unwrap();
            let (_, trace) = mpgbp_approximate(&v, &budget).unwrap();

            // replay the residue path and check the energy strictly drops
            let mut r = v.clone();
            let mut energy: f64 = r.iter().map(|x| x * x).sum();
            for it in &trace.iterations {
                let step = f64::powi(2.0, -(it.depth as i32));
                for (&p, &s) in it.positions.iter().zip(&it.signs) {
                    r[p] -= f64::from(s) * step;
                }
                let new_energy: f64 = r.iter().map(|x| x * x).sum();
                assert!(new_energy < energy, "energy did not drop");
                energy = new_energy;
            }
        }
    }

    proptest! {
        #[test]
        fn sdl_budget_invariant(v in proptest::collection::vec(-1.0f64..1.0, 1..24),
                                m in 1usize..64) {
            let budget = QuantizerBudget::new(m, 30).unwrap();
            let (a, _) = sdl_approximate(&v, &budget).unwrap();
            prop_assert!(a.spt_count() <= m);
            // reconstruction error bounded by the depth cap
            let vh = a.reconstruct();
            for (x, xh) in v.iter().zip(&vh) {
                prop_assert!((x - xh).abs() <= 1.0);
            }
        }

        #[test]
        fn csd_vector_error_bound(v in proptest::collection::vec(-1.0f64..1.0, 1..24),
                                  b in 2u32..10) {
            let a = csd_vector(&v, b).unwrap();
            let vh = a.reconstruct();
            for (x, xh) in v.iter().zip(&vh) {
                // mantissa in (0.5, 1] quantized with step 2^-(B-1): the
                // relative error is at most a half step over 0.5
                let tol = x.abs() * f64::powi(2.0, -(b as i32 - 1)) + 1e-300;
                prop_assert!((x - xh).abs() <= tol, "x={} xh={}", x, xh);
            }
        }
    }
}
