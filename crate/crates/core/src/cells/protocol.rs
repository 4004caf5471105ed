//! Standard drive schedules for the cells.

use crate::sde::{DriveProgram, Waveform};
use crate::C64;

/// One phase of the latch test schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatchPhase {
    /// S̄ low, R̄ high.
    Set,
    /// Both high.
    Hold,
    /// S̄ high, R̄ low.
    Reset,
}

impl LatchPhase {
    /// `(sbar, rbar)` amplitudes.
    pub fn levels(self, e_high: f64) -> (f64, f64) {
        match self {
            LatchPhase::Set => (0.0, e_high),
            LatchPhase::Hold => (e_high, e_high),
            LatchPhase::Reset => (e_high, 0.0),
        }
    }
}

/// Set, hold, reset, hold.
pub const LATCH_SCHEDULE: [LatchPhase; 4] = [
    LatchPhase::Set,
    LatchPhase::Hold,
    LatchPhase::Reset,
    LatchPhase::Hold,
];

/// Piecewise-constant `sbar`/`rbar` drives running `phases` back to back,
/// each lasting `phase_len`.
pub fn latch_schedule(e_high: f64, phase_len: f64, phases: &[LatchPhase]) -> DriveProgram {
    let mut s = Vec::new();
    let mut r = Vec::new();
    for (k, ph) in phases.iter().enumerate() {
        let (a, b) = ph.levels(e_high);
        let t = k as f64 * phase_len;
        s.push((t, C64::new(a, 0.0)));
        r.push((t, C64::new(b, 0.0)));
    }
    DriveProgram::new()
        .with("sbar", Waveform::PiecewiseConstant(s))
        .with("rbar", Waveform::PiecewiseConstant(r))
}

/// Square clock between 0 and `e_high`, high for the first half of each
/// period.
pub fn clock(e_high: f64, period: f64) -> Waveform {
    Waveform::Square {
        low: C64::default(),
        high: C64::new(e_high, 0.0),
        period,
        duty: 0.5,
        offset: 0.0,
    }
}
