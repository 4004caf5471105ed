//! Spontaneous jump rates of the latch in the hold condition.

use thiserror::Error;

use super::{polyfit, AnalysisError, JumpConfig, JumpDetector, JumpStatistics, PolyFit};
use crate::cells::{latch_schedule, reduce_cell, CellError, CellKind, CellSpec, LatchPhase};
use crate::sde::{Integrator, SimConfig, SimError};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Cell(#[from] CellError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Length of each phase when preparing the latch.
pub const PREPARE_PHASE: f64 = 5.0;

/// Photon numbers of the first latch resonator in the two hold states,
/// from a noise-free set, hold, reset, hold sequence. Returned low first.
pub fn latch_hold_levels(e_high: f64) -> Result<(f64, f64), SweepError> {
    let sys = reduce_cell(&CellSpec::new(CellKind::Latch).e_high(e_high))?;
    let drives = latch_schedule(
        e_high,
        PREPARE_PHASE,
        &[LatchPhase::Set, LatchPhase::Hold, LatchPhase::Reset, LatchPhase::Hold],
    );
    let cfg = SimConfig::new(4.0 * PREPARE_PHASE).noiseless();
    let integ = Integrator::new(&sys, &drives, &cfg)?;
    let probe = [2.0 * PREPARE_PHASE, 4.0 * PREPARE_PHASE];
    let mut levels = [0.0; 2];
    let last = integ.n_steps() - 1;
    let end_hold1 = (probe[0] / integ.dt()).round() as usize - 1;
    integ.run(0, |v| {
        if v.n == end_hold1 {
            levels[0] = v.alpha[0].norm_sqr();
        } else if v.n == last {
            levels[1] = v.alpha[0].norm_sqr();
        }
    })?;
    Ok((levels[0].min(levels[1]), levels[0].max(levels[1])))
}

/// Settings of one latch jump-rate measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatchRateConfig {
    pub e_high: f64,
    /// Duration of the hold condition.
    pub t_hold: f64,
    pub seed: u64,
    /// Trajectory index within the seed.
    pub index: u64,
    /// Time after entering hold before counting starts.
    pub settle: f64,
    /// Minimum dwell in integration steps.
    pub dwell_steps: usize,
    /// Step size; the engine default when `None`.
    pub dt: Option<f64>,
}

impl LatchRateConfig {
    pub fn new(e_high: f64, t_hold: f64, seed: u64) -> Self {
        LatchRateConfig {
            e_high,
            t_hold,
            seed,
            index: 0,
            settle: 1.0,
            dwell_steps: 10,
            dt: None,
        }
    }
}

/// Result of [`latch_jump_statistics`].
#[derive(Debug, Clone, PartialEq)]
pub struct LatchRate {
    pub e_high: f64,
    pub levels: (f64, f64),
    pub stats: JumpStatistics,
}

impl LatchRate {
    /// Jumps in either direction per unit hold time.
    pub fn rate(&self) -> f64 {
        self.stats.total_rate()
    }

    pub fn rate_error(&self) -> f64 {
        self.stats.total_rate_error()
    }
}

/// Sets the latch, holds it for `t_hold` with quantum noise and counts the
/// jumps of the first resonator's photon number between its two hold
/// levels, using every integration step.
pub fn latch_jump_statistics(cfg: &LatchRateConfig) -> Result<LatchRate, SweepError> {
    let e = cfg.e_high;
    let levels = latch_hold_levels(e)?;
    let sys = reduce_cell(&CellSpec::new(CellKind::Latch).e_high(e))?;
    let drives = latch_schedule(e, PREPARE_PHASE, &[LatchPhase::Set, LatchPhase::Hold]);
    let mut sim = SimConfig::new(PREPARE_PHASE + cfg.t_hold).seed(cfg.seed);
    sim.dt = cfg.dt;
    let integ = Integrator::new(&sys, &drives, &sim)?;
    let dt = integ.dt();
    let jc = JumpConfig::new(levels.0, levels.1, cfg.dwell_steps as f64 * dt);
    let mut det = JumpDetector::new(dt, &jc)?;
    let start = ((PREPARE_PHASE + cfg.settle) / dt).round() as usize;
    integ.run(cfg.index, |v| {
        if v.n >= start {
            det.push(v.alpha[0].norm_sqr());
        }
    })?;
    Ok(LatchRate {
        e_high: e,
        levels,
        stats: det.finish(),
    })
}

/// Quadratic fit of `log10(rate)` against `E_high`.
pub fn fit_log_rates(points: &[(f64, f64)]) -> Result<PolyFit, AnalysisError> {
    if let Some(p) = points.iter().find(|p| !(p.1 > 0.0)) {
        return Err(AnalysisError::Fit(format!("no jumps observed at E_high = {}", p.0)));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.log10()).collect();
    polyfit(&x, &y, 2)
}

/// `E_high` above the largest sampled value where the fitted rate reaches
/// `target`.
pub fn extrapolate_e_high(fit: &PolyFit, points: &[(f64, f64)], target: f64) -> Option<f64> {
    let from = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    fit.solve_above(target.log10(), from, 0.5, 1000.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hold_levels_scale_with_e_squared() {
        let (lo, hi) = latch_hold_levels(50.0).unwrap();
        assert!((lo - 16.1).abs() < 0.5 && (hi - 149.8).abs() < 2.0, "{lo} {hi}");
        let (lo2, hi2) = latch_hold_levels(25.0).unwrap();
        assert!((lo2 / lo - 0.25).abs() < 1e-6 && (hi2 / hi - 0.25).abs() < 1e-6);
    }

    #[test]
    fn short_run_at_low_field_jumps() {
        let r = latch_jump_statistics(&LatchRateConfig::new(14.0, 100.0, 1)).unwrap();
        assert!(r.stats.n_up + r.stats.n_down > 0);
        assert!((r.stats.observed_time() + r.stats.time_unassigned - 99.0).abs() < 1e-6);
    }

    #[test]
    fn extrapolation_of_exact_parabola() {
        let pts: Vec<(f64, f64)> = [10.0, 15.0, 20.0, 25.0]
            .iter()
            .map(|&e: &f64| (e, 10f64.powf(-0.2 * e - 0.002 * e * e)))
            .collect();
        let fit = fit_log_rates(&pts).unwrap();
        let e = extrapolate_e_high(&fit, &pts, 1e-18).unwrap();
        assert!((0.2 * e + 0.002 * e * e - 18.0).abs() < 1e-6);
        assert!(fit_log_rates(&[(1.0, 0.0), (2.0, 1.0), (3.0, 1.0)]).is_err());
    }
}
