//! `kerrsim` command-line front end.

mod analyze;
mod error;
mod files;
mod simulate;
mod traces;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kerrsim::cells::{build_cell, CellKind, CellSpec};
use kerrsim::netlist::{check_circuit, flatten, parse_netlist, FlatCircuit};
use kerrsim::reduction::reduce_with_probes;

use error::{CliError, Result};

#[derive(Parser, Debug)]
#[command(name = "kerrsim", version, about = "Semiclassical simulation of Kerr-resonator photonic circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Report component and input counts and structural violations.
    Check { netlist: PathBuf },
    /// Write the netlist of a standard cell.
    Cell(CellArgs),
    /// Write the reduced system matrices of a netlist.
    Reduce {
        netlist: PathBuf,
        /// Also report an internal component output, as `component.port`.
        #[arg(long = "probe", value_name = "COMP.PORT")]
        probes: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Integrate trajectories and write them as CSV with a run manifest.
    Simulate(simulate::SimulateArgs),
    /// Analyze a trajectory CSV.
    Analyze(analyze::AnalyzeArgs),
    /// Latch jump rate against the logical-high amplitude.
    Sweep(analyze::SweepArgs),
}

#[derive(Args, Debug)]
struct CellArgs {
    /// amp<k>, amp<k>-inv, ampchain<n>, ampchain<n>-inv, and, fanout,
    /// latch, dflipflop or counter4.
    kind: String,
    #[arg(long = "ehigh", default_value_t = kerrsim::cells::DEFAULT_E_HIGH)]
    e_high: f64,
    /// Parameter override `family.param=value`, e.g. `latch.phi1=0.3`.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_key_value)]
    overrides: Vec<(String, f64)>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn parse_key_value(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("`{s}` is not KEY=VALUE"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("`{v}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

/// Parses and flattens a netlist file.
pub(crate) fn load_circuit(path: &std::path::Path) -> Result<(String, FlatCircuit)> {
    let text = files::read_text(path)?;
    let net = parse_netlist(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    let flat = flatten(&net).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    Ok((text, flat))
}

fn check(path: &std::path::Path) -> Result<()> {
    let (_, flat) = load_circuit(path)?;
    let report = check_circuit(&flat);
    print!("{report}");
    if report.is_simulable() {
        Ok(())
    } else {
        Err(CliError::validation(format!(
            "{} structural violation(s) in {}",
            report.violations.len(),
            path.display()
        )))
    }
}

fn cell(args: &CellArgs) -> Result<()> {
    let kind = CellKind::parse(&args.kind).ok_or_else(|| CliError::usage(format!("unknown cell kind `{}`", args.kind)))?;
    let mut spec = CellSpec::new(kind).e_high(args.e_high);
    for (k, v) in &args.overrides {
        spec = spec.with(k, *v);
    }
    let net = build_cell(&spec).map_err(|e| CliError::validation(e.to_string()))?;
    files::emit(args.output.as_deref(), &net.to_text())
}

fn reduce(path: &std::path::Path, probes: &[String], output: Option<&std::path::Path>) -> Result<()> {
    let (_, flat) = load_circuit(path)?;
    let sys = reduce_with_probes(&flat, probes).map_err(|e| CliError::validation(e.to_string()))?;
    files::emit(output, &sys.to_text())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Check { netlist } => check(&netlist),
        Command::Cell(a) => cell(&a),
        Command::Reduce { netlist, probes, output } => reduce(&netlist, &probes, output.as_deref()),
        Command::Simulate(a) => simulate::run(&a),
        Command::Analyze(a) => analyze::run(&a),
        Command::Sweep(a) => analyze::sweep(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            if code == 0 {
                let _ = e.print();
            } else {
                let first = e.to_string();
                let first = first.lines().next().unwrap_or("").trim_start_matches("error: ");
                eprintln!("{}", CliError::usage(first));
                eprintln!("{}", e.render().to_string().lines().skip(1).collect::<Vec<_>>().join("\n"));
            }
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.category.exit_code() as u8)
        }
    }
}
