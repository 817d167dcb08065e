//! Filter approximation pipeline and the MSE / interference sweeps.

use std::io::Write;

use crate::error::{Error, Result};
use crate::experiments::fmt_float;
use crate::fbmc::{interference_variance, FbmcConfig, PrototypeFilter};
use crate::quantizers::{
    csd_vector, mpgbp_approximate, sdl_approximate, PursuitTrace, QuantizerBudget,
};
use crate::sopot::{exp2i, pow2_ceil_exponent, SopotApprox};

/// One of the three SOPOT approximation methods with its knob.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantizer {
    Csd { wordlength: u32 },
    Sdl { budget: QuantizerBudget },
    Mpgbp { budget: QuantizerBudget },
}

impl Quantizer {
    pub fn label(&self) -> &'static str {
        match self {
            Quantizer::Csd { .. } => "csd",
            Quantizer::Sdl { .. } => "sdl",
            Quantizer::Mpgbp { .. } => "mpgbp",
        }
    }
}

/// Approximates an arbitrary finite real vector: the input is scaled by a
/// power of two into unit infinity norm (upward when `‖v‖∞ < 1/2`, improving
/// the usable dynamic range), the method runs on the scaled vector, and the
/// inverse scale is recorded in the result so `reconstruct()` matches `v`'s
/// original scale.
pub fn approximate_vector(
    v: &[f64],
    quantizer: &Quantizer,
) -> Result<(SopotApprox, Option<PursuitTrace>)> {
    if v.is_empty() {
        return Err(Error::InvalidInput("input vector is empty".into()));
    }
    if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite value {bad}")));
    }
    if let Quantizer::Csd { wordlength } = quantizer {
        if *wordlength < 2 {
            return Err(Error::InvalidInput(format!(
                "wordlength must be at least 2, got {wordlength}"
            )));
        }
    }
    let max_abs = v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if max_abs == 0.0 {
        let b_max = match quantizer {
            Quantizer::Csd { wordlength } => wordlength - 1,
            Quantizer::Sdl { budget } | Quantizer::Mpgbp { budget } => budget.max_depth,
        };
        return Ok((SopotApprox::new(v.len(), b_max), None));
    }
    let exponent = pow2_ceil_exponent(max_abs);
    let scaled: Vec<f64> = v.iter().map(|&x| x * exp2i(-i64::from(exponent))).collect();

    let (approx, trace) = match quantizer {
        Quantizer::Csd { wordlength } => (csd_vector(&scaled, *wordlength)?, None),
        Quantizer::Sdl { budget } => {
            let (a, t) = sdl_approximate(&scaled, budget)?;
            (a, Some(t))
        }
        Quantizer::Mpgbp { budget } => {
            let (a, t) = mpgbp_approximate(&scaled, budget)?;
            (a, Some(t))
        }
    };
    Ok((approx.rescaled(exponent), trace))
}

/// A filter approximation: the SOPOT allocation, its reconstructed
/// coefficients, and the greedy trace when the method produces one.
#[derive(Debug, Clone)]
pub struct FilterApproximation {
    pub approx: SopotApprox,
    pub filter: PrototypeFilter,
    pub trace: Option<PursuitTrace>,
}

/// Runs a quantizer on a prototype filter. The approximated filter is not
/// re-normalized to unit energy: the receiver divides by the actual energy,
/// which is one scalar per system rather than a multiplier per tap.
pub fn approximate_filter(
    filter: &PrototypeFilter,
    quantizer: &Quantizer,
) -> Result<FilterApproximation> {
    let (approx, trace) = approximate_vector(filter.coefficients(), quantizer)?;
    let reconstructed = PrototypeFilter::new(approx.reconstruct())?;
    Ok(FilterApproximation {
        approx,
        filter: reconstructed,
        trace,
    })
}

/// Mean squared coefficient error in dB: `10 log10((1/L) Σ (g−ĝ)²)`.
/// Exact matches return the `-inf` sentinel.
pub fn approximation_mse(g: &[f64], ghat: &[f64]) -> Result<f64> {
    if g.len() != ghat.len() {
        return Err(Error::DimensionMismatch {
            expected: g.len(),
            actual: ghat.len(),
        });
    }
    if g.is_empty() {
        return Err(Error::InvalidInput("empty vectors".into()));
    }
    let mse = g
        .iter()
        .zip(ghat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / g.len() as f64;
    Ok(if mse == 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * mse.log10()
    })
}

/// One sweep result: a method at one complexity level.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// "reference", "csd", "sdl", or "mpgbp".
    pub method: String,
    /// CSD rows carry the wordlength; vector methods carry `M_max`.
    pub wordlength_or_budget: u64,
    pub spt_per_coeff_raw: f64,
    pub spt_per_coeff_merged: f64,
    pub mse_db: f64,
    /// `10 log10(σ_I²)`; present when the sweep was run with an FBMC config.
    pub interference_db: Option<f64>,
}

/// Method selection for a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepMethods {
    pub csd: bool,
    pub sdl: bool,
    pub mpgbp: bool,
}

impl Default for SweepMethods {
    fn default() -> Self {
        Self {
            csd: true,
            sdl: true,
            mpgbp: true,
        }
    }
}

impl std::str::FromStr for SweepMethods {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut methods = Self {
            csd: false,
            sdl: false,
            mpgbp: false,
        };
        for item in s.split(',') {
            match item.trim() {
                "csd" => methods.csd = true,
                "sdl" => methods.sdl = true,
                "mpgbp" => methods.mpgbp = true,
                other => {
                    return Err(Error::InvalidInput(format!(
                        "unknown method '{other}'; expected csd, sdl, or mpgbp"
                    )))
                }
            }
        }
        Ok(methods)
    }
}

impl std::fmt::Display for SweepMethods {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut names = Vec::new();
        if self.csd {
            names.push("csd");
        }
        if self.sdl {
            names.push("sdl");
        }
        if self.mpgbp {
            names.push("mpgbp");
        }
        f.write_str(&names.join(","))
    }
}

/// Sweep configuration.
#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub methods: SweepMethods,
    /// CSD wordlengths to include (one row each).
    pub wordlengths: Vec<u32>,
    /// Complexity grid in SPT/coeff for the vector methods; ignored when
    /// `matched` is set.
    pub complexity_grid: Vec<f64>,
    /// Derive the vector-method budgets from the measured CSD densities so
    /// every comparison happens at matched complexity.
    pub matched: bool,
    /// Depth cap for the vector methods.
    pub b_max: u32,
    /// Compute `σ_I²` per row against this chain configuration.
    pub interference: Option<FbmcConfig>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            methods: SweepMethods::default(),
            wordlengths: vec![3, 4, 5, 6, 7, 8],
            complexity_grid: (0..=10).map(|i| 1.0 + 0.25 * i as f64).collect(),
            matched: true,
            b_max: QuantizerBudget::DEFAULT_MAX_DEPTH,
            interference: None,
        }
    }
}

/// Runs the approximation sweep: a reference row, one CSD row per wordlength,
/// then SDL and MPGBP rows over the complexity grid (or at the CSD-matched
/// densities). Raw and post-merge SPT counts are both reported.
pub fn run_sweep(filter: &PrototypeFilter, opts: &SweepOptions) -> Result<Vec<SweepRow>> {
    let g = filter.coefficients();
    if opts.matched && !opts.methods.csd {
        return Err(Error::InvalidInput(
            "a matched-complexity grid needs the csd rows to derive budgets from".into(),
        ));
    }
    let interference_db = |f: &PrototypeFilter| -> Result<Option<f64>> {
        match &opts.interference {
            Some(config) => Ok(Some(10.0 * interference_variance(f, config)?.log10())),
            None => Ok(None),
        }
    };

    let mut rows = Vec::new();
    rows.push(SweepRow {
        method: "reference".into(),
        wordlength_or_budget: 0,
        spt_per_coeff_raw: 0.0,
        spt_per_coeff_merged: 0.0,
        mse_db: f64::NEG_INFINITY,
        interference_db: interference_db(filter)?,
    });

    let mut csd_densities = Vec::new();
    if opts.methods.csd {
        for &b in &opts.wordlengths {
            let out = approximate_filter(filter, &Quantizer::Csd { wordlength: b })?;
            csd_densities.push(out.approx.spt_per_coeff());
            rows.push(SweepRow {
                method: "csd".into(),
                wordlength_or_budget: u64::from(b),
                spt_per_coeff_raw: out.approx.spt_per_coeff(),
                spt_per_coeff_merged: out.approx.merge_canonical().spt_per_coeff(),
                mse_db: approximation_mse(g, out.filter.coefficients())?,
                interference_db: interference_db(&out.filter)?,
            });
        }
    }

    let densities: &[f64] = if opts.matched {
        &csd_densities
    } else {
        &opts.complexity_grid
    };
    for &density in densities {
        let max_spts = (density * g.len() as f64).round() as usize;
        let budget = QuantizerBudget::new(max_spts.max(1), opts.b_max)?;
        let mut quantizers = Vec::new();
        if opts.methods.sdl {
            quantizers.push(Quantizer::Sdl { budget });
        }
        if opts.methods.mpgbp {
            quantizers.push(Quantizer::Mpgbp { budget });
        }
        for quantizer in quantizers {
            let out = approximate_filter(filter, &quantizer)?;
            rows.push(SweepRow {
                method: quantizer.label().into(),
                wordlength_or_budget: max_spts as u64,
                spt_per_coeff_raw: out.approx.spt_per_coeff(),
                spt_per_coeff_merged: out.approx.merge_canonical().spt_per_coeff(),
                mse_db: approximation_mse(g, out.filter.coefficients())?,
                interference_db: interference_db(&out.filter)?,
            });
        }
    }
    Ok(rows)
}

/// Writes sweep rows as CSV with the schema
/// `method,wordlength_or_budget,spt_per_coeff_raw,spt_per_coeff_merged,mse_db,interference_db`.
pub fn write_sweep_csv<W: Write>(w: &mut W, rows: &[SweepRow]) -> Result<()> {
    writeln!(
        w,
        "method,wordlength_or_budget,spt_per_coeff_raw,spt_per_coeff_merged,mse_db,interference_db"
    )?;
    for r in rows {
        let interference = r.interference_db.map(fmt_float).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.method,
            r.wordlength_or_budget,
            fmt_float(r.spt_per_coeff_raw),
            fmt_float(r.spt_per_coeff_merged),
            fmt_float(r.mse_db),
            interference
        )?;
    }
    Ok(())
}
