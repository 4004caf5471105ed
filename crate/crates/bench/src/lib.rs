//! Benchmark fixtures.

use kerrsim::cells::{clock, reduce_cell, CellKind, CellSpec};
use kerrsim::netlist::{flatten, FlatCircuit};
use kerrsim::sde::{DriveProgram, Selection, SimConfig};
use kerrsim::{build_cell, ReducedSystem};

/// Flattened netlist of a standard cell at the default amplitude.
pub fn flat_cell(kind: CellKind) -> FlatCircuit {
    flatten(&build_cell(&CellSpec::new(kind)).expect("standard cell builds")).expect("standard cell flattens")
}

/// Reduced counter with its clock drive.
pub fn counter() -> (ReducedSystem, DriveProgram) {
    let spec = CellSpec::new(CellKind::Counter4);
    let sys = reduce_cell(&spec).expect("counter reduces");
    (sys, DriveProgram::new().with("clk", clock(spec.e_high, 10.0)))
}

/// Noisy run of `t_max` recording nothing, so only integration is timed.
pub fn unrecorded(t_max: f64) -> SimConfig {
    let mut cfg = SimConfig::new(t_max).seed(1);
    cfg.record_resonators = Selection::Nothing;
    cfg.record_outputs = Selection::Nothing;
    cfg
}
