//! Subcommand implementations.

use std::fs;
use std::io::BufWriter;

use sopot_fbmc::experiments::{
    approximate_filter, approximation_mse, run_ber, run_psd_experiment, run_sweep, write_ber_csv,
    write_psd_csv, write_sweep_csv, PsdEstimate, PsdExperimentOptions, Quantizer, StopRule,
    SweepMethods, SweepOptions, WelchWindow,
};
use sopot_fbmc::fbmc::{phydyas_prototype, write_filter_csv, FbmcConfig, PrototypeFilter};
use sopot_fbmc::quantizers::QuantizerBudget;
use sopot_fbmc::sopot::write_trace;
use sopot_fbmc::{Error, Result};

use crate::resolve::{
    load_filter, parse_float_list, parse_labeled_paths, parse_u32_list, Resolver,
};
use crate::Command;

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Filter {
            common,
            subcarriers,
            overlap,
        } => {
            let mut r = Resolver::new(
                "filter",
                common.config.as_deref(),
                &["subcarriers", "overlap"],
            )?;
            let m: usize = r.with_default("subcarriers", subcarriers.as_ref(), 128)?;
            let k_ov: usize = r.with_default("overlap", overlap.as_ref(), 4)?;
            let output = r.output(common.output.as_ref())?;

            let filter = phydyas_prototype(m, k_ov)?;
            write_output(&output, |w| write_filter_csv(w, &filter, m, k_ov))?;
            r.write_manifest(&output)?;
            println!(
                "wrote {}-coefficient unit-energy filter to {output}",
                filter.len()
            );
            Ok(())
        }

        Command::Approx {
            common,
            input,
            method,
            wordlength,
            spt_per_coeff,
            max_spts,
            bmax,
            trace,
        } => {
            let mut r = Resolver::new(
                "approx",
                common.config.as_deref(),
                &[
                    "input",
                    "method",
                    "wordlength",
                    "spt-per-coeff",
                    "max-spts",
                    "bmax",
                    "trace",
                ],
            )?;
            let input_path: String = r.required("input", input.as_ref())?;
            let method_name: String = r.required("method", method.as_ref())?;
            let (filter, m, k_ov) = load_filter(&input_path)?;

            let quantizer = match method_name.as_str() {
                "csd" => {
                    reject_budget_flags(&spt_per_coeff, &max_spts)?;
                    let b: u32 = r.with_default("wordlength", wordlength.as_ref(), 4)?;
                    Quantizer::Csd { wordlength: b }
                }
                "sdl" | "mpgbp" => {
                    if wordlength.is_some() {
                        return Err(Error::InvalidInput(
                            "--wordlength applies to csd only".into(),
                        ));
                    }
                    let b_max: u32 =
                        r.with_default("bmax", bmax.as_ref(), QuantizerBudget::DEFAULT_MAX_DEPTH)?;
                    let per_coeff: Option<f64> =
                        r.optional("spt-per-coeff", spt_per_coeff.as_ref())?;
                    let absolute: Option<usize> = r.optional("max-spts", max_spts.as_ref())?;
                    let max = match (per_coeff, absolute) {
                        (Some(_), Some(_)) => {
                            return Err(Error::InvalidInput(
                                "give either --spt-per-coeff or --max-spts, not both".into(),
                            ))
                        }
                        (Some(spc), None) => (spc * filter.len() as f64).round() as usize,
                        (None, Some(n)) => n,
                        (None, None) => {
                            return Err(Error::InvalidInput(
                                "sdl/mpgbp need --spt-per-coeff or --max-spts".into(),
                            ))
                        }
                    };
                    let budget = QuantizerBudget::new(max, b_max)?;
                    if method_name == "sdl" {
                        Quantizer::Sdl { budget }
                    } else {
                        Quantizer::Mpgbp { budget }
                    }
                }
                other => {
                    return Err(Error::InvalidInput(format!(
                        "unknown method '{other}'; expected csd, sdl, or mpgbp"
                    )))
                }
            };

            let trace_path: Option<String> = r.optional("trace", trace.as_ref())?;
            let output = r.output(common.output.as_ref())?;

            let out = approximate_filter(&filter, &quantizer)?;
            write_output(&output, |w| write_filter_csv(w, &out.filter, m, k_ov))?;
            if let Some(path) = &trace_path {
                write_output(path, |w| write_trace(w, &out.approx))?;
            }
            r.write_manifest(&output)?;

            let mse = approximation_mse(filter.coefficients(), out.filter.coefficients())?;
            println!(
                "{}: {} SPTs ({:.3}/coeff raw, {:.3}/coeff merged), approximation MSE {:.2} dB",
                quantizer.label(),
                out.approx.spt_count(),
                out.approx.spt_per_coeff(),
                out.approx.merge_canonical().spt_per_coeff(),
                mse
            );
            Ok(())
        }

        Command::SweepMse {
            common,
            input,
            methods,
            wordlengths,
            grid,
            bmax,
        } => run_sweep_command(common, input, methods, wordlengths, grid, bmax, false),

        Command::SweepInterference {
            common,
            input,
            methods,
            wordlengths,
            grid,
            bmax,
        } => run_sweep_command(common, input, methods, wordlengths, grid, bmax, true),

        Command::Psd {
            common,
            filters,
            blocks,
            active,
            frames,
            seed,
            segment,
            overlap_fraction,
            window,
        } => {
            let mut r = Resolver::new(
                "psd",
                common.config.as_deref(),
                &[
                    "filters",
                    "blocks",
                    "active",
                    "frames",
                    "seed",
                    "segment",
                    "overlap-fraction",
                    "window",
                ],
            )?;
            let filter_spec: String = r.required("filters", filters.as_ref())?;
            let labeled = parse_labeled_paths(&filter_spec)?;
            let loaded = load_consistent_filters(&labeled)?;
            let (m, k_ov) = (loaded.dims.0, loaded.dims.1);

            let blocks: usize = r.with_default("blocks", blocks.as_ref(), 64)?;
            let active: usize = r.with_default("active", active.as_ref(), m / 2)?;
            let num_frames: usize = r.with_default("frames", frames.as_ref(), 100)?;
            let seed: u64 = r.with_default("seed", seed.as_ref(), 0)?;
            let segment_len: usize = r.with_default("segment", segment.as_ref(), 512)?;
            let overlap: f64 =
                r.with_default("overlap-fraction", overlap_fraction.as_ref(), 0.5)?;
            let window: WelchWindow =
                r.with_default("window", window.as_ref(), WelchWindow::Hamming)?;
            let output = r.output(common.output.as_ref())?;

            let config = FbmcConfig::new(m, k_ov, blocks)?.with_central_band(active)?;
            let opts = PsdExperimentOptions {
                num_frames,
                seed,
                segment_len,
                overlap_fraction: overlap,
                window,
            };
            let mut curves: Vec<(String, PsdEstimate)> = Vec::new();
            for (label, filter) in &loaded.filters {
                curves.push((label.clone(), run_psd_experiment(&config, filter, &opts)?));
            }
            let borrowed: Vec<(String, &PsdEstimate)> =
                curves.iter().map(|(l, p)| (l.clone(), p)).collect();
            write_output(&output, |w| write_psd_csv(w, &borrowed))?;
            r.write_manifest(&output)?;
            println!(
                "wrote {} PSD curve(s) over {} bins to {output} ({} window, {} frames)",
                curves.len(),
                segment_len,
                window.name(),
                num_frames
            );
            Ok(())
        }

        Command::Ber {
            common,
            filters,
            order,
            ebn0,
            seed,
            min_errors,
            max_bits,
            frames,
            blocks,
            quantize,
        } => {
            let mut r = Resolver::new(
                "ber",
                common.config.as_deref(),
                &[
                    "filters",
                    "order",
                    "ebn0",
                    "seed",
                    "min-errors",
                    "max-bits",
                    "frames",
                    "blocks",
                    "quantize",
                ],
            )?;
            let filter_spec: String = r.required("filters", filters.as_ref())?;
            let labeled = parse_labeled_paths(&filter_spec)?;
            let loaded = load_consistent_filters(&labeled)?;
            let (m, k_ov) = loaded.dims;

            let order: u32 = r.with_default("order", order.as_ref(), 4)?;
            let ebn0_spec: String = r.with_default("ebn0", ebn0.as_ref(), "0:2:12".to_string())?;
            let ebn0_list = parse_float_list(&ebn0_spec)?;
            let seed: u64 = r.with_default("seed", seed.as_ref(), 0)?;
            let min_errors: u64 = r.with_default("min-errors", min_errors.as_ref(), 100)?;
            let max_bits: u64 = r.with_default("max-bits", max_bits.as_ref(), 1_000_000)?;
            let max_frames: Option<u64> = r.optional("frames", frames.as_ref())?;
            let blocks: usize = r.with_default("blocks", blocks.as_ref(), 64)?;
            let quantize: String =
                r.with_default("quantize", quantize.as_ref(), "both".to_string())?;
            let output = r.output(common.output.as_ref())?;

            let config = FbmcConfig::new(m, k_ov, blocks)?;
            let stop = StopRule {
                min_errors,
                max_bits,
                max_frames,
            };
            let reference = phydyas_prototype(m, k_ov)?;
            let mut curves = Vec::new();
            for (label, filter) in &loaded.filters {
                let (tx, rx): (&PrototypeFilter, &PrototypeFilter) = match quantize.as_str() {
                    "both" => (filter, filter),
                    "tx" => (filter, &reference),
                    "rx" => (&reference, filter),
                    other => {
                        return Err(Error::InvalidInput(format!(
                            "unknown quantize side '{other}'; expected both, tx, or rx"
                        )))
                    }
                };
                let points = run_ber(&config, tx, rx, order, &ebn0_list, &stop, seed)?;
                curves.push((label.clone(), points));
            }
            write_output(&output, |w| write_ber_csv(w, &curves))?;
            r.write_manifest(&output)?;
            println!(
                "wrote {} BER curve(s) x {} Eb/N0 points to {output}",
                curves.len(),
                ebn0_list.len()
            );
            Ok(())
        }
    }
}

fn run_sweep_command(
    common: crate::Common,
    input: Option<String>,
    methods: Option<String>,
    wordlengths: Option<String>,
    grid: Option<String>,
    bmax: Option<String>,
    with_interference: bool,
) -> Result<()> {
    let name: &'static str = if with_interference {
        "sweep-interference"
    } else {
        "sweep-mse"
    };
    let mut r = Resolver::new(
        name,
        common.config.as_deref(),
        &["input", "methods", "wordlengths", "grid", "bmax"],
    )?;
    let input_path: String = r.required("input", input.as_ref())?;
    let (filter, m, k_ov) = load_filter(&input_path)?;
    let methods: SweepMethods =
        r.with_default("methods", methods.as_ref(), SweepMethods::default())?;
    let wordlength_spec: String = r.with_default(
        "wordlengths",
        wordlengths.as_ref(),
        "3,4,5,6,7,8".to_string(),
    )?;
    let grid_spec: String = r.with_default("grid", grid.as_ref(), "matched".to_string())?;
    let b_max: u32 = r.with_default("bmax", bmax.as_ref(), QuantizerBudget::DEFAULT_MAX_DEPTH)?;
    let output = r.output(common.output.as_ref())?;

    let (matched, complexity_grid) = if grid_spec == "matched" {
        (true, Vec::new())
    } else {
        (false, parse_float_list(&grid_spec)?)
    };
    let opts = SweepOptions {
        methods,
        wordlengths: parse_u32_list(&wordlength_spec)?,
        complexity_grid,
        matched,
        b_max,
        interference: if with_interference {
            Some(FbmcConfig::new(m, k_ov, 1)?)
        } else {
            None
        },
    };
    let rows = run_sweep(&filter, &opts)?;
    write_output(&output, |w| write_sweep_csv(w, &rows))?;
    r.write_manifest(&output)?;
    println!("wrote {} sweep rows to {output}", rows.len());
    Ok(())
}

fn reject_budget_flags(spt_per_coeff: &Option<String>, max_spts: &Option<String>) -> Result<()> {
    if spt_per_coeff.is_some() || max_spts.is_some() {
        return Err(Error::InvalidInput(
            "csd takes --wordlength; SPT budgets apply to sdl/mpgbp".into(),
        ));
    }
    Ok(())
}

struct LoadedFilters {
    filters: Vec<(String, PrototypeFilter)>,
    dims: (usize, usize),
}

fn load_consistent_filters(labeled: &[(String, String)]) -> Result<LoadedFilters> {
    let mut filters = Vec::new();
    let mut dims: Option<(usize, usize)> = None;
    for (label, path) in labeled {
        let (filter, m, k_ov) = load_filter(path)?;
        match dims {
            None => dims = Some((m, k_ov)),
            Some(d) if d == (m, k_ov) => {}
            Some(d) => {
                return Err(Error::InvalidInput(format!(
                    "filter '{label}' has dimensions {m}x{k_ov}, expected {}x{}",
                    d.0, d.1
                )))
            }
        }
        filters.push((label.clone(), filter));
    }
    Ok(LoadedFilters {
        filters,
        dims: dims.expect("at least one filter"),
    })
}

fn write_output<F>(path: &str, write: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<fs::File>) -> Result<()>,
{
    let file = fs::File::create(path)?;
    let mut writer = BufWriter::new(file);
    write(&mut writer)?;
    Ok(())
}
