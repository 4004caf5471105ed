//! Post-processing of trajectories: jump rates, autocorrelation decay,
//! field histograms, propagation delays and counter decoding.

mod autocorr;
mod counter;
mod delay;
mod fit;
mod histogram;
mod jumps;
mod latch;

pub use autocorr::{autocorr_rate, autocorrelation, AutocorrConfig, AutocorrFit};
pub use counter::{counter_error_rate, CounterConfig, CounterErrors};
pub use delay::{measure_delay, DelayMeasurement};
pub use fit::{polyfit, PolyFit};
pub use histogram::{FieldHistogram, GridSpec};
pub use latch::{
    extrapolate_e_high, fit_log_rates, latch_hold_levels, latch_jump_statistics, LatchRate,
    LatchRateConfig, SweepError, PREPARE_PHASE,
};
pub use jumps::{detect_jumps, JumpConfig, JumpDetector, JumpStatistics, Transition};

use thiserror::Error;

use crate::C64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("invalid analysis settings: {0}")]
    Config(String),
    #[error("fit rejected: {0}")]
    Fit(String),
}

/// `|z|` of every sample.
pub fn magnitudes(series: &[C64]) -> Vec<f64> {
    series.iter().map(|z| z.norm()).collect()
}

/// `|z|²` of every sample.
pub fn photon_numbers(series: &[C64]) -> Vec<f64> {
    series.iter().map(|z| z.norm_sqr()).collect()
}

/// Root-mean-square deviation of `series` from its running mean over
/// `2 * half + 1` samples; the edges are excluded.
pub fn small_scale_rms(series: &[f64], half: usize) -> f64 {
    let n = series.len();
    if n <= 2 * half {
        return f64::NAN;
    }
    let w = (2 * half + 1) as f64;
    let mut sum: f64 = series[..2 * half + 1].iter().sum();
    let mut acc = 0.0;
    for i in half..n - half {
        if i > half {
            sum += series[i + half] - series[i - half - 1];
        }
        acc += (series[i] - sum / w).powi(2);
    }
    (acc / (n - 2 * half) as f64).sqrt()
}

#[cfg(test)]
pub(crate) mod synth {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Exp, StandardNormal};

    /// Telegraph signal between 0 and 1 with the given rates, plus white
    /// noise of standard deviation `noise`.
    pub(crate) fn telegraph(r_up: f64, r_down: f64, t: f64, dt: f64, noise: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = (t / dt) as usize;
        let mut out = Vec::with_capacity(n);
        let mut high = false;
        let mut next: f64 = rng.sample(Exp::new(r_up).unwrap());
        for i in 0..n {
            let ti = i as f64 * dt;
            while ti >= next {
                high = !high;
                let r = if high { r_down } else { r_up };
                next += rng.sample::<f64, _>(Exp::new(r).unwrap());
            }
            let z: f64 = rng.sample(StandardNormal);
            out.push(if high { 1.0 } else { 0.0 } + noise * z);
        }
        out
    }
}
