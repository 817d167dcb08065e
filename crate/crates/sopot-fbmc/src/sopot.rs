//! The SOPOT numeric representation: signed power-of-two terms over
//! generalized bit planes, with exact reconstruction, SPT accounting,
//! canonical merging, and power-of-two input scaling.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// One signed power of two allocated to one vector entry.
///
/// Contributes `sign * 2^(-depth)` to the entry at `position` (before the
/// owning approximation's global scale is applied).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SptTerm {
    /// Index into the target vector.
    pub position: usize,
    /// Bit-plane exponent; the term's magnitude is `2^(-depth)`.
    pub depth: u32,
    /// `+1` or `-1`; zero allocations are simply absent terms.
    pub sign: i8,
}

impl SptTerm {
    pub fn new(position: usize, depth: u32, sign: i8) -> Self {
        debug_assert!(sign == 1 || sign == -1);
        Self {
            position,
            depth,
            sign,
        }
    }

    /// Value contributed to the owning vector entry, `sign * 2^(-depth)`.
    pub fn value(&self) -> f64 {
        f64::from(self.sign) * exp2i(-i64::from(self.depth))
    }
}

/// A sparse ternary SPT allocation representing an approximated real vector.
///
/// The represented vector is `2^scale_exponent * Σ_i sign_i * 2^(-depth_i) * e(position_i)`.
/// Terms are kept in the order the producing algorithm allocated them; use
/// [`SopotApprox::merge_canonical`] to collapse duplicate cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SopotApprox {
    length: usize,
    depth_limit: u32,
    scale_exponent: i32,
    terms: Vec<SptTerm>,
}

impl SopotApprox {
    /// An empty approximation of a length-`length` vector (all zeros).
    pub fn new(length: usize, depth_limit: u32) -> Self {
        Self {
            length,
            depth_limit,
            scale_exponent: 0,
            terms: Vec::new(),
        }
    }

    /// Builds an approximation from parts, validating every term against
    /// `length` and `depth_limit`.
    pub fn with_terms(
        length: usize,
        depth_limit: u32,
        scale_exponent: i32,
        terms: Vec<SptTerm>,
    ) -> Result<Self> {
        for t in &terms {
            if t.sign != 1 && t.sign != -1 {
                return Err(Error::InvalidInput(format!(
                    "term sign must be +1 or -1, got {}",
                    t.sign
                )));
            }
            if t.position >= length {
                return Err(Error::InvalidInput(format!(
                    "term position {} out of range for length {}",
                    t.position, length
                )));
            }
            if t.depth > depth_limit {
                return Err(Error::InvalidInput(format!(
                    "term depth {} exceeds depth limit {}",
                    t.depth, depth_limit
                )));
            }
        }
        Ok(Self {
            length,
            depth_limit,
            scale_exponent,
            terms,
        })
    }

    pub(crate) fn push_term(&mut self, term: SptTerm) {
        debug_assert!(term.position < self.length && term.depth <= self.depth_limit);
        self.terms.push(term);
    }

    /// Length `N` of the represented vector.
    pub fn length(&self) -> usize {
        self.length
    }

    /// Deepest bit plane a term may occupy (`B_max`).
    pub fn depth_limit(&self) -> u32 {
        self.depth_limit
    }

    /// Global power-of-two factor applied at reconstruction.
    pub fn scale_exponent(&self) -> i32 {
        self.scale_exponent
    }

    /// Multiplies the represented value by `2^delta` by adjusting the global
    /// scale. Lossless.
    pub fn rescaled(mut self, delta: i32) -> Self {
        self.scale_exponent += delta;
        self
    }

    pub fn terms(&self) -> &[SptTerm] {
        &self.terms
    }

    /// Number of stored SPT terms (the `ℓ0` of the allocation).
    pub fn spt_count(&self) -> usize {
        self.terms.len()
    }

    /// Average SPTs per vector entry.
    pub fn spt_per_coeff(&self) -> f64 {
        if self.length == 0 {
            0.0
        } else {
            self.terms.len() as f64 / self.length as f64
        }
    }

    /// Evaluates the represented vector. Each term is a dyadic rational, so
    /// the sum is exact in binary floating point at reasonable depth limits.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.length];
        for t in &self.terms {
            v[t.position] += t.value();
        }
        let scale = exp2i(i64::from(self.scale_exponent));
        for x in &mut v {
            *x *= scale;
        }
        v
    }

    /// True when no two terms share a `(position, depth)` cell.
    pub fn is_canonical(&self) -> bool {
        let mut seen: Vec<(usize, u32)> =
            self.terms.iter().map(|t| (t.position, t.depth)).collect();
        seen.sort_unstable();
        seen.windows(2).all(|w| w[0] != w[1])
    }

    /// Collapses the term multiset so that each `(position, depth)` cell holds
    /// at most one term with sign in `{−1, +1}`, preserving the represented
    /// value exactly.
    ///
    /// Equal-cell pairs `(+1, +1)` carry to depth `k−1` and `(+1, −1)` cancel;
    /// carries cascade. A carry past depth 0 raises the global scale and
    /// re-indexes every depth by the overflow amount, so depths stay
    /// non-negative. Output terms are sorted by `(position, depth)`.
    pub fn merge_canonical(&self) -> SopotApprox {
        // Net digit sum per (position, signed depth).
        let mut cells: BTreeMap<(usize, i64), i64> = BTreeMap::new();
        for t in &self.terms {
            *cells.entry((t.position, i64::from(t.depth))).or_insert(0) += i64::from(t.sign);
        }

        // Per position, resolve digits from the deepest plane up. Leaving a
        // remainder in {−1, 0, +1} with the digit's sign keeps the value:
        // a * 2^(-k) = r * 2^(-k) + ((a - r)/2) * 2^(-(k-1)).
        let mut resolved: Vec<(usize, i64, i8)> = Vec::new();
        while let Some((&(pos, depth), _)) = cells.iter().next_back() {
            let a = cells.remove(&(pos, depth)).unwrap();
            if a == 0 {
                continue;
            }
            let r = if a % 2 == 0 { 0 } else { a.signum() };
            let carry = (a - r) / 2;
            if r != 0 {
                resolved.push((pos, depth, r as i8));
            }
            if carry != 0 {
                *cells.entry((pos, depth - 1)).or_insert(0) += carry;
            }
        }

        let min_depth = resolved.iter().map(|&(_, d, _)| d).min().unwrap_or(0);
        let shift = (-min_depth).max(0);
        let mut terms: Vec<SptTerm> = resolved
            .into_iter()
            .map(|(pos, d, s)| SptTerm::new(pos, (d + shift) as u32, s))
            .collect();
        terms.sort_unstable_by_key(|t| (t.position, t.depth));

        SopotApprox {
            length: self.length,
            depth_limit: self.depth_limit + shift as u32,
            scale_exponent: self.scale_exponent + shift as i32,
            terms,
        }
    }

    /// Dense `{−1, 0, 1}` view of a canonical approximation, with one column
    /// per bit plane `0..=depth_limit`.
    ///
    /// Errors with [`Error::NotCanonical`] if any cell holds more than one
    /// term; run [`SopotApprox::merge_canonical`] first.
    pub fn to_matrix(&self) -> Result<AllocationMatrix> {
        let num_planes = self.depth_limit as usize + 1;
        let mut entries = vec![0i8; self.length * num_planes];
        for t in &self.terms {
            let cell = &mut entries[t.position * num_planes + t.depth as usize];
            if *cell != 0 {
                return Err(Error::NotCanonical {
                    position: t.position,
                    depth: t.depth,
                });
            }
            *cell = t.sign;
        }
        Ok(AllocationMatrix {
            entries,
            num_positions: self.length,
            num_planes,
        })
    }
}

/// Dense `N × (B_max+1)` grid of ternary digits: row `m`, column `n` is
/// nonzero iff a term `(position=m, depth=n)` exists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationMatrix {
    entries: Vec<i8>,
    num_positions: usize,
    num_planes: usize,
}

impl AllocationMatrix {
    pub fn num_positions(&self) -> usize {
        self.num_positions
    }

    /// Number of bit planes, `B_max + 1`.
    pub fn num_planes(&self) -> usize {
        self.num_planes
    }

    pub fn get(&self, position: usize, plane: usize) -> i8 {
        self.entries[position * self.num_planes + plane]
    }

    /// The SOPOT basis vector `p = [2^0, 2^{-1}, ..., 2^{-B_max}]`.
    pub fn basis(&self) -> Vec<f64> {
        (0..self.num_planes).map(|n| exp2i(-(n as i64))).collect()
    }

    /// Matrix-vector product `C · p` (no global scale applied).
    pub fn product_with_basis(&self) -> Vec<f64> {
        let p = self.basis();
        (0..self.num_positions)
            .map(|m| {
                (0..self.num_planes)
                    .map(|n| f64::from(self.get(m, n)) * p[n])
                    .sum()
            })
            .collect()
    }

    /// Total digit count, `Σ_m Σ_n |C_{m,n}|`.
    pub fn digit_count(&self) -> usize {
        self.entries.iter().filter(|&&e| e != 0).count()
    }
}

/// `2^e` as an f64, exact for any in-range exponent.
pub(crate) fn exp2i(e: i64) -> f64 {
    f64::powi(2.0, e as i32)
}

/// Smallest integer `e` with `x <= 2^e`, computed exactly (`x > 0`).
pub(crate) fn pow2_ceil_exponent(x: f64) -> i32 {
    debug_assert!(x.is_finite() && x > 0.0);
    let mut e = x.log2().ceil() as i32;
    while x > exp2i(i64::from(e)) {
        e += 1;
    }
    while x <= exp2i(i64::from(e) - 1) {
        e -= 1;
    }
    e
}

/// Scales a vector down by the smallest power of two that brings its infinity
/// norm to at most 1. Inputs already satisfying the bound are returned
/// unchanged with exponent 0; the scaling never rescales upward. Power-of-two
/// division is lossless, so `scaled * 2^exponent == v` bit-exactly.
pub fn unit_inf_scale(v: &[f64]) -> Result<(Vec<f64>, i32)> {
    if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite value {bad} in input vector"
        )));
    }
    let max_abs = v.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
    if max_abs <= 1.0 {
        return Ok((v.to_vec(), 0));
    }
    let e = pow2_ceil_exponent(max_abs).max(0);
    let inv = exp2i(-i64::from(e));
    Ok((v.iter().map(|&x| x * inv).collect(), e))
}

/// Writes an approximation in the SOPOT trace format: `#`-prefixed metadata
/// (n, b_max, scale_exponent) followed by `index,depth,sign` rows, one per
/// term, in stored order.
pub fn write_trace<W: Write>(w: &mut W, approx: &SopotApprox) -> Result<()> {
    writeln!(w, "# n={}", approx.length())?;
    writeln!(w, "# b_max={}", approx.depth_limit())?;
    writeln!(w, "# scale_exponent={}", approx.scale_exponent())?;
    writeln!(w, "index,depth,sign")?;
    for t in approx.terms() {
        writeln!(w, "{},{},{}", t.position, t.depth, t.sign)?;
    }
    Ok(())
}

/// Reads a SOPOT trace written by [`write_trace`].
pub fn read_trace<R: BufRead>(r: R) -> Result<SopotApprox> {
    let mut n: Option<usize> = None;
    let mut b_max: Option<u32> = None;
    let mut scale: Option<i32> = None;
    let mut terms = Vec::new();
    let mut saw_header = false;

    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let meta = meta.trim();
            let (key, value) = meta
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("malformed metadata line: {line}")))?;
            let value = value.trim();
            match key.trim() {
                "n" => n = Some(parse_num(value)?),
                "b_max" => b_max = Some(parse_num(value)?),
                "scale_exponent" => scale = Some(parse_num(value)?),
                other => return Err(Error::Parse(format!("unknown metadata key: {other}"))),
            }
            continue;
        }
        if !saw_header {
            if line != "index,depth,sign" {
                return Err(Error::Parse(format!(
                    "expected header 'index,depth,sign', got '{line}'"
                )));
            }
            saw_header = true;
            continue;
        }
        let mut fields = line.split(',');
        let position: usize = parse_num(fields.next().unwrap_or(""))?;
        let depth: u32 = parse_num(
            fields
                .next()
                .ok_or_else(|| Error::Parse(format!("missing depth in row '{line}'")))?,
        )?;
        let sign: i8 = parse_num(
            fields
                .next()
                .ok_or_else(|| Error::Parse(format!("missing sign in row '{line}'")))?,
        )?;
        if fields.next().is_some() {
            return Err(Error::Parse(format!("too many fields in row '{line}'")));
        }
        terms.push(SptTerm {
            position,
            depth,
            sign,
        });
    }

    let n = n.ok_or_else(|| Error::Parse("missing '# n=' metadata".into()))?;
    let b_max = b_max.ok_or_else(|| Error::Parse("missing '# b_max=' metadata".into()))?;
    let scale = scale.ok_or_else(|| Error::Parse("missing '# scale_exponent=' metadata".into()))?;
    if !saw_header {
        return Err(Error::Parse("missing 'index,depth,sign' header".into()));
    }
    SopotApprox::with_terms(n, b_max, scale, terms)
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("invalid number '{s}'")))
}
