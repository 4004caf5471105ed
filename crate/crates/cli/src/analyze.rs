//! The `analyze` and `sweep` subcommands.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{ArgGroup, Args, ValueEnum};
use num_complex::Complex64 as C64;
use serde_json::{json, Value};

use kerrsim::analysis::{
    autocorr_rate, counter_error_rate, detect_jumps, extrapolate_e_high, fit_log_rates,
    latch_jump_statistics, measure_delay, AnalysisError, AutocorrConfig, CounterConfig,
    FieldHistogram, GridSpec, JumpConfig, LatchRateConfig, SweepError,
};
use kerrsim::cells::clock;
use kerrsim::sde::{par_map, DriveProgram, SimError, Waveform};

use crate::error::{Category, CliError, Result};
use crate::files::{emit, read_text};
use crate::traces::TraceTable;

/// Scalar derived from a complex trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    /// `|z|²`
    Photons,
    /// `|z|`
    Amplitude,
    Re,
    Im,
}

impl Quantity {
    fn of(self, z: C64) -> f64 {
        match self {
            Quantity::Photons => z.norm_sqr(),
            Quantity::Amplitude => z.norm(),
            Quantity::Re => z.re,
            Quantity::Im => z.im,
        }
    }
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("mode").required(true).args(["jumps", "autocorr", "hist", "delay", "counter"])))]
pub struct AnalyzeArgs {
    /// Trajectory CSV written by `simulate`.
    pub csv: PathBuf,
    /// Count jumps of a trace between two levels (needs --levels).
    #[arg(long, value_name = "TRACE")]
    pub jumps: Option<String>,
    /// Fit the decay rate of a trace's autocorrelation.
    #[arg(long, value_name = "TRACE")]
    pub autocorr: Option<String>,
    /// Histogram a trace over the complex plane.
    #[arg(long, value_name = "TRACE")]
    pub hist: Option<String>,
    /// Propagation delays from a stimulus to a response trace.
    #[arg(long, value_name = "STIMULUS,RESPONSE", value_parser = parse_name_pair)]
    pub delay: Option<(String, String)>,
    /// Decode counter outputs and count errors (needs --ehigh).
    #[arg(long)]
    pub counter: bool,

    /// Scalar taken from each complex sample. Defaults to photons for
    /// jumps and amplitude for delays and the counter.
    #[arg(long, value_enum)]
    pub quantity: Option<Quantity>,
    /// Low and high levels of the chosen quantity.
    #[arg(long, value_name = "LOW,HIGH", allow_hyphen_values = true, value_parser = parse_levels)]
    pub levels: Option<(f64, f64)>,
    /// Minimum dwell of a jump. Defaults to ten samples.
    #[arg(long)]
    pub dwell: Option<f64>,
    /// Smallest lag in the autocorrelation fit. Defaults to one sample.
    #[arg(long)]
    pub min_lag: Option<f64>,
    /// Histogram bounds. Defaults to the bounding box of the samples.
    #[arg(long, value_name = "RE0,RE1,IM0,IM1", allow_hyphen_values = true, value_parser = parse_range)]
    pub range: Option<[f64; 4]>,
    #[arg(long, default_value_t = 64)]
    pub bins: usize,
    /// Write log10 counts, NaN for empty bins.
    #[arg(long)]
    pub log: bool,
    /// Drive program supplying stimulus or clock signals that are not
    /// columns of the CSV.
    #[arg(long)]
    pub drives: Option<PathBuf>,
    /// Stimulus mid level. Defaults to halfway between its extremes.
    #[arg(long, allow_negative_numbers = true)]
    pub stimulus_mid: Option<f64>,
    /// Delays at or below this are flagged degenerate.
    #[arg(long, default_value_t = 0.0)]
    pub tolerance: f64,
    #[arg(long = "ehigh")]
    pub e_high: Option<f64>,
    /// Clock trace or drive name.
    #[arg(long, default_value = "clk")]
    pub clock: String,
    /// Period of the standard clock, used when the clock is neither a
    /// column nor a drive.
    #[arg(long, default_value_t = 10.0)]
    pub clock_period: f64,
    #[arg(long, value_name = "B0,B1,B2,B3", default_value = "b0,b1,b2,b3", value_parser = parse_bits)]
    pub bits: [String; 4],
    /// Counter samples before this time are discarded.
    #[arg(long, default_value_t = 0.0)]
    pub startup: f64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn parse_numbers<const N: usize>(s: &str) -> std::result::Result<[f64; N], String> {
    let v = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

fn parse_levels(s: &str) -> std::result::Result<(f64, f64), String> {
    parse_numbers::<2>(s).map(|[a, b]| (a, b))
}

fn parse_range(s: &str) -> std::result::Result<[f64; 4], String> {
    parse_numbers(s)
}

fn parse_name_pair(s: &str) -> std::result::Result<(String, String), String> {
    match s.split_once(',') {
        Some((a, b)) if !a.is_empty() && !b.is_empty() && !b.contains(',') => Ok((a.to_string(), b.to_string())),
        _ => Err(format!("`{s}` is not NAME,NAME")),
    }
}

fn parse_bits(s: &str) -> std::result::Result<[String; 4], String> {
    let v: Vec<String> = s.split(',').map(|x| x.trim().to_string()).collect();
    v.try_into().map_err(|_| format!("`{s}` does not name four traces"))
}

fn analysis_error(e: AnalysisError) -> CliError {
    CliError::validation(e.to_string())
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

/// A trace from the CSV, or failing that a drive evaluated on its times.
fn signal(table: &TraceTable, drives: Option<&DriveProgram>, name: &str) -> Result<Vec<C64>> {
    if let Ok(c) = table.column(name) {
        return Ok(c.to_vec());
    }
    match drives.and_then(|d| d.get(name)) {
        Some(w) => Ok(table.times.iter().map(|&t| w.value(t)).collect()),
        None => table.column(name).map(|c| c.to_vec()),
    }
}

fn extremes(x: &[f64]) -> (f64, f64) {
    x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
}

pub fn run(args: &AnalyzeArgs) -> Result<()> {
    let table = TraceTable::parse_csv(&read_text(&args.csv)?)
        .map_err(|e| CliError::validation(format!("{}: {}", args.csv.display(), e.detail)))?;
    let drives = match &args.drives {
        Some(p) => Some(DriveProgram::parse(&read_text(p)?).map_err(|e| CliError::validation(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let dt = table.spacing()?;
    let out = args.output.as_deref();

    if let Some(name) = &args.jumps {
        let q = args.quantity.unwrap_or(Quantity::Photons);
        let (lo, hi) = args.levels.ok_or_else(|| CliError::usage("--jumps needs --levels LOW,HIGH"))?;
        let series: Vec<f64> = table.column(name)?.iter().map(|&z| q.of(z)).collect();
        let cfg = JumpConfig::new(lo, hi, args.dwell.unwrap_or(10.0 * dt));
        let st = detect_jumps(&series, dt, &cfg).map_err(analysis_error)?;
        let report = json!({
            "trace": name,
            "quantity": format!("{q:?}").to_lowercase(),
            "sample_spacing": dt,
            "levels": [lo, hi],
            "thresholds": [st.lower_threshold, st.upper_threshold],
            "min_dwell": cfg.min_dwell,
            "n_up": st.n_up,
            "n_down": st.n_down,
            "time_low": st.time_low,
            "time_high": st.time_high,
            "time_unassigned": st.time_unassigned,
            "rate_up": st.rate_up(),
            "rate_up_error": st.rate_up_error(),
            "rate_down": st.rate_down(),
            "rate_down_error": st.rate_down_error(),
            "total_rate": st.total_rate(),
            "total_rate_error": st.total_rate_error(),
            "rate_bound": st.rate_bound(),
            "transition_times": st.transitions.iter().map(|t| t.time).collect::<Vec<_>>(),
        });
        return emit(out, &json_text(&report));
    }

    if let Some(name) = &args.autocorr {
        let series = table.column(name)?;
        let cfg = AutocorrConfig {
            min_lag: args.min_lag,
            ..Default::default()
        };
        let fit = autocorr_rate(series, dt, &cfg).map_err(analysis_error)?;
        let report = json!({
            "trace": name,
            "sample_spacing": dt,
            "rate": fit.rate,
            "amplitude": fit.amplitude,
            "r_squared": fit.r_squared,
            "window": [fit.window.0, fit.window.1],
            "points": fit.points,
        });
        return emit(out, &json_text(&report));
    }

    if let Some(name) = &args.hist {
        let series = table.column(name)?;
        let grid = match &args.range {
            Some(r) => GridSpec {
                re_min: r[0],
                re_max: r[1],
                im_min: r[2],
                im_max: r[3],
                re_bins: args.bins,
                im_bins: args.bins,
            },
            None => {
                let (r0, r1) = extremes(&series.iter().map(|z| z.re).collect::<Vec<_>>());
                let (i0, i1) = extremes(&series.iter().map(|z| z.im).collect::<Vec<_>>());
                let pad = 1e-9 * (r1 - r0).abs().max(i1 - i0).max(1.0);
                GridSpec {
                    re_min: r0 - pad,
                    re_max: r1 + pad,
                    im_min: i0 - pad,
                    im_max: i1 + pad,
                    re_bins: args.bins,
                    im_bins: args.bins,
                }
            }
        };
        let mut h = FieldHistogram::new(grid).map_err(analysis_error)?;
        h.extend(series.iter().copied());
        return emit(out, &h.to_gnuplot_matrix(args.log));
    }

    if let Some((stim_name, resp_name)) = &args.delay {
        let q = args.quantity.unwrap_or(Quantity::Amplitude);
        let stim: Vec<f64> = signal(&table, drives.as_ref(), stim_name)?.iter().map(|&z| q.of(z)).collect();
        let resp: Vec<f64> = table.column(resp_name)?.iter().map(|&z| q.of(z)).collect();
        let (s0, s1) = extremes(&stim);
        let mid = args.stimulus_mid.unwrap_or(0.5 * (s0 + s1));
        let lv = args.levels.unwrap_or_else(|| extremes(&resp));
        let m = measure_delay(&table.times, &stim, mid, &resp, lv, args.tolerance).map_err(analysis_error)?;
        let edges: Vec<Value> = m
            .iter()
            .map(|d| {
                json!({
                    "edge_time": d.edge_time,
                    "rising_stimulus": d.rising_stimulus,
                    "rising_response": d.rising_response,
                    "crossing_time": d.crossing_time,
                    "delay": d.delay,
                    "degenerate": d.degenerate,
                    "unmeasurable": d.unmeasurable,
                })
            })
            .collect();
        let report = json!({
            "stimulus": stim_name,
            "response": resp_name,
            "stimulus_mid": mid,
            "response_levels": [lv.0, lv.1],
            "edges": edges,
        });
        return emit(out, &json_text(&report));
    }

    // counter
    let e = args.e_high.ok_or_else(|| CliError::usage("--counter needs --ehigh"))?;
    let q = args.quantity.unwrap_or(Quantity::Amplitude);
    let clk: Vec<f64> = match signal(&table, drives.as_ref(), &args.clock) {
        Ok(c) => c.iter().map(|&z| q.of(z)).collect(),
        Err(_) => {
            let w: Waveform = clock(e, args.clock_period);
            table.times.iter().map(|&t| q.of(w.value(t))).collect()
        }
    };
    let bits: Vec<Vec<f64>> = args
        .bits
        .iter()
        .map(|b| table.column(b).map(|c| c.iter().map(|&z| q.of(z)).collect()))
        .collect::<Result<_>>()?;
    let r = counter_error_rate(
        &table.times,
        &clk,
        [&bits[0], &bits[1], &bits[2], &bits[3]],
        &CounterConfig::new(e, args.startup),
    )
    .map_err(analysis_error)?;
    let report = json!({
        "e_high": e,
        "samples": r.sample_times.len(),
        "errors": r.errors,
        "undecodable": r.undecodable,
        "observed_time": r.observed_time,
        "rate": r.rate(),
        "rate_error": r.rate_error(),
        "error_times": r.error_times,
        "sample_times": r.sample_times,
        "decoded": r.decoded,
    });
    emit(out, &json_text(&report))
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Cell to sweep; only `latch` is supported.
    #[arg(long, default_value = "latch")]
    pub cell: String,
    #[arg(long = "ehigh-list", required = true, num_args = 1.., value_delimiter = ',')]
    pub e_high: Vec<f64>,
    /// Hold time per point.
    #[arg(long, default_value_t = 1e4)]
    pub tmax: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rate to extrapolate the quadratic log-rate fit to.
    #[arg(long, default_value_t = 1e-18)]
    pub target_rate: f64,
    /// Worker threads; 0 uses every core. Defaults to `KERRSIM_WORKERS`.
    #[arg(long)]
    pub workers: Option<usize>,
    /// CSV rate table.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn sweep_error(e: SweepError) -> CliError {
    match e {
        SweepError::Sim(s @ SimError::Divergence { .. }) => CliError::new(Category::Divergence, s.to_string()),
        e => CliError::validation(e.to_string()),
    }
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    if args.cell != "latch" {
        return Err(CliError::usage(format!("sweep supports `latch` only, not `{}`", args.cell)));
    }
    if !(args.tmax > 0.0) {
        return Err(CliError::usage("--tmax must be positive"));
    }
    let workers = args.workers.unwrap_or_else(|| {
        std::env::var(crate::simulate::WORKERS_ENV).ok().and_then(|v| v.parse().ok()).unwrap_or(0)
    });
    let results = par_map(args.e_high.len(), workers, |k| {
        let mut cfg = LatchRateConfig::new(args.e_high[k], args.tmax, args.seed);
        cfg.index = k as u64;
        latch_jump_statistics(&cfg)
    });
    let mut csv = String::from("e_high,rate,rate_error,n_up,n_down,observed_time,level_low,level_high\n");
    let mut points = Vec::new();
    for r in results {
        let r = r.map_err(sweep_error)?;
        let st = &r.stats;
        let _ = writeln!(
            csv,
            "{:?},{:?},{:?},{},{},{:?},{:?},{:?}",
            r.e_high,
            r.rate(),
            r.rate_error(),
            st.n_up,
            st.n_down,
            st.observed_time(),
            r.levels.0,
            r.levels.1
        );
        points.push((r.e_high, r.rate()));
    }
    emit(args.output.as_deref(), &csv)?;
    if points.len() >= 3 {
        match fit_log_rates(&points) {
            Ok(fit) => match extrapolate_e_high(&fit, &points, args.target_rate) {
                Some(e) => eprintln!("rate {:e} reached at E_high = {e:.2} (quadratic fit of log10 rate)", args.target_rate),
                None => eprintln!("quadratic fit does not reach rate {:e}", args.target_rate),
            },
            Err(e) => eprintln!("no extrapolation: {e}"),
        }
    }
    Ok(())
}
