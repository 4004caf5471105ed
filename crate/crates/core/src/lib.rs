//! Semiclassical simulation of quantum noise in networks of Kerr-nonlinear
//! resonators joined by linear optics.
//!
//! A circuit is written as a hierarchical [`netlist`], flattened into
//! primitive components, compiled by [`reduction`] into the matrices of a
//! linear-plus-Kerr stochastic system, and integrated by [`sde`]. Each
//! trajectory samples the Wigner distribution of the resonator fields, so
//! ensembles reproduce vacuum fluctuations and noise-induced switching.
//! [`cells`] generates the standard logic cells (amplifiers, AND, fan-out,
//! latch, D flip-flop, ripple counter) and [`analysis`] turns trajectories
//! into jump rates, histograms, delays and counter error rates.

pub mod analysis;
pub mod cells;
pub mod netlist;
pub mod reduction;
pub mod sde;

pub use num_complex::Complex64 as C64;

pub use analysis::{
    autocorr_rate, counter_error_rate, detect_jumps, measure_delay, AutocorrFit, CounterErrors,
    DelayMeasurement, FieldHistogram, GridSpec, JumpConfig, JumpStatistics,
};
pub use cells::{build_cell, classical_response, switching_energy, CellKind, CellSpec};
pub use netlist::{
    check_circuit, flatten, parse_netlist, CircuitReport, ComponentKind, FlatCircuit, InputKind,
    Netlist, ResonatorParams,
};
pub use reduction::{backprop_reduce, reduce, reduce_with_probes, ComponentBlock, ReducedSystem};
pub use sde::{run_ensemble, run_trajectory, DriveProgram, SimConfig, Trajectory, Waveform};
