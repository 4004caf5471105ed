//! The `simulate` subcommand.

use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use serde::{Deserialize, Serialize};

use kerrsim::reduction::reduce_with_probes;
use kerrsim::sde::{par_map, DriveProgram, Integrator, Selection, SimConfig};

use crate::error::{Category, CliError, Result};
use crate::files::{read_text, write_atomic, HashedFile};
use crate::load_circuit;
use crate::traces::TraceTable;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "KERRSIM_WORKERS";

#[derive(Args, Debug, Default)]
pub struct SimulateArgs {
    pub netlist: PathBuf,
    /// Drive program: one `name kind params...` waveform per line.
    #[arg(long)]
    pub drives: Option<PathBuf>,
    /// TOML file with defaults for any of the options below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub tmax: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Record window averages over this time instead of every step.
    #[arg(long)]
    pub avg: Option<f64>,
    /// Resonators or outputs to record; `all` records everything. Defaults
    /// to the external outputs.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub trace: Option<Vec<String>>,
    /// Internal component outputs to expose as extra outputs.
    #[arg(long = "probe", value_name = "COMP.PORT")]
    pub probes: Vec<String>,
    #[arg(long)]
    pub trajectories: Option<usize>,
    /// Worker threads; 0 uses every core. Defaults to `KERRSIM_WORKERS`.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Switch the vacuum noise off.
    #[arg(long)]
    pub noiseless: bool,
    /// Use `2χ(|α|² - 1)` in the Kerr phase.
    #[arg(long)]
    pub kerr_correction: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

/// Options that may come from the configuration file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    drives: Option<PathBuf>,
    dt: Option<f64>,
    tmax: Option<f64>,
    seed: Option<u64>,
    avg: Option<f64>,
    trace: Option<Vec<String>>,
    probes: Option<Vec<String>>,
    trajectories: Option<usize>,
    workers: Option<usize>,
    noiseless: Option<bool>,
    kerr_correction: Option<bool>,
}

/// Fully resolved run settings, as recorded in the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub t_max: f64,
    pub dt: f64,
    pub dt_given: bool,
    pub seed: u64,
    pub average_window: Option<f64>,
    pub noise: bool,
    pub kerr_correction: bool,
    pub trace: Vec<String>,
    pub probes: Vec<String>,
    pub trajectories: usize,
}

#[derive(Debug, Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    netlist: HashedFile,
    drives: Option<HashedFile>,
    config_file: Option<HashedFile>,
    config: ResolvedConfig,
    workers: usize,
    runtime_seconds: f64,
    outputs: Vec<HashedFile>,
}

fn workers_default() -> usize {
    std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()).unwrap_or(0)
}

/// Splits trace names into resonator and output selections.
fn selections(
    names: &[String],
    resonators: &[String],
    outputs: &[String],
) -> Result<(Selection, Selection)> {
    if names.iter().any(|n| n == "all") {
        return Ok((Selection::All, Selection::All));
    }
    let (mut r, mut o) = (Vec::new(), Vec::new());
    for n in names {
        if resonators.contains(n) {
            r.push(n.clone());
        } else if outputs.contains(n) {
            o.push(n.clone());
        } else {
            return Err(CliError::validation(format!("unknown trace `{n}`")));
        }
    }
    Ok((Selection::Names(r), Selection::Names(o)))
}

pub fn run(args: &SimulateArgs) -> Result<()> {
    let fc: FileConfig = match &args.config {
        Some(p) => toml::from_str(&read_text(p)?)
            .map_err(|e| CliError::validation(format!("{}: {}", p.display(), e.message())))?,
        None => FileConfig::default(),
    };
    let config_file = match &args.config {
        Some(p) => Some(HashedFile::of(p, read_text(p)?.as_bytes())),
        None => None,
    };

    let t_max = args
        .tmax
        .or(fc.tmax)
        .ok_or_else(|| CliError::usage("--tmax is required (or `tmax` in the config file)"))?;
    let trajectories = args.trajectories.or(fc.trajectories).unwrap_or(1);
    if trajectories == 0 {
        return Err(CliError::usage("--trajectories must be at least 1"));
    }
    let workers = args.workers.or(fc.workers).unwrap_or_else(workers_default);
    let probes = if args.probes.is_empty() { fc.probes.unwrap_or_default() } else { args.probes.clone() };

    let (net_text, flat) = load_circuit(&args.netlist)?;
    let sys = reduce_with_probes(&flat, &probes).map_err(|e| CliError::validation(e.to_string()))?;

    let drives_path = args.drives.clone().or(fc.drives);
    let (drives, drives_hash) = match &drives_path {
        Some(p) => {
            let text = read_text(p)?;
            let prog = DriveProgram::parse(&text).map_err(|e| CliError::validation(format!("{}: {e}", p.display())))?;
            (prog, Some(HashedFile::of(p, text.as_bytes())))
        }
        None => (DriveProgram::new(), None),
    };

    let res_names: Vec<String> = sys.resonators.iter().map(|r| r.name.clone()).collect();
    let trace = args.trace.clone().or(fc.trace).unwrap_or_else(|| sys.outputs.clone());
    let (rec_res, rec_out) = selections(&trace, &res_names, &sys.outputs)?;

    let mut cfg = SimConfig::new(t_max).seed(args.seed.or(fc.seed).unwrap_or(0));
    cfg.dt = args.dt.or(fc.dt);
    cfg.average_window = args.avg.or(fc.avg);
    cfg.noise = !(args.noiseless || fc.noiseless.unwrap_or(false));
    cfg.kerr_correction = args.kerr_correction || fc.kerr_correction.unwrap_or(false);
    cfg.record_resonators = rec_res;
    cfg.record_outputs = rec_out;

    let start = Instant::now();
    let integ = Integrator::new(&sys, &drives, &cfg)?;
    let results = par_map(trajectories, workers, |k| integ.trajectory(k as u64));
    let mut tables = Vec::with_capacity(trajectories);
    for r in results {
        tables.push(TraceTable::from_trajectory(&r?));
    }
    let runtime = start.elapsed().as_secs_f64();

    let dir = &args.output;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut outputs = Vec::with_capacity(trajectories);
    for (k, t) in tables.iter().enumerate() {
        outputs.push(write_atomic(&dir.join(trajectory_file(k)), t.to_csv().as_bytes())?);
    }
    let manifest = RunManifest {
        tool: "kerrsim",
        version: env!("CARGO_PKG_VERSION"),
        netlist: HashedFile::of(&args.netlist, net_text.as_bytes()),
        drives: drives_hash,
        config_file,
        config: ResolvedConfig {
            t_max,
            dt: integ.dt(),
            dt_given: cfg.dt.is_some(),
            seed: cfg.seed,
            average_window: cfg.average_window,
            noise: cfg.noise,
            kerr_correction: cfg.kerr_correction,
            trace,
            probes,
            trajectories,
        },
        workers,
        runtime_seconds: runtime,
        outputs,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::new(Category::Internal, e.to_string()))?;
    write_atomic(&dir.join(MANIFEST_FILE), format!("{json}\n").as_bytes())?;
    eprintln!(
        "wrote {} trajector{} to {} in {runtime:.2} s",
        trajectories,
        if trajectories == 1 { "y" } else { "ies" },
        dir.display()
    );
    Ok(())
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn trajectory_file(k: usize) -> String {
    format!("traj_{k:04}.csv")
}
