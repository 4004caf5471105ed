//! Decoding of the four-bit ripple counter outputs.

use super::AnalysisError;

/// Decoded counter record.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterErrors {
    /// Sampling instants after the startup time.
    pub sample_times: Vec<f64>,
    /// Decoded value at each instant, `None` when a bit was ambiguous.
    pub decoded: Vec<Option<u8>>,
    /// Instants where the value was not the predecessor plus one, or was
    /// undecodable.
    pub error_times: Vec<f64>,
    pub errors: usize,
    pub undecodable: usize,
    /// Time spanned by the sampling instants.
    pub observed_time: f64,
}

impl CounterErrors {
    pub fn rate(&self) -> f64 {
        self.errors as f64 / self.observed_time
    }

    pub fn rate_error(&self) -> f64 {
        (self.errors as f64).sqrt() / self.observed_time
    }
}

/// Thresholds and timing for [`counter_error_rate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterConfig {
    pub e_high: f64,
    /// Bit amplitudes at or below this fraction of `e_high` read as 0.
    pub low_fraction: f64,
    /// Bit amplitudes at or above this fraction read as 1.
    pub high_fraction: f64,
    /// Instants before this time are discarded.
    pub startup: f64,
}

impl CounterConfig {
    pub fn new(e_high: f64, startup: f64) -> Self {
        CounterConfig {
            e_high,
            low_fraction: 0.35,
            high_fraction: 0.65,
            startup,
        }
    }
}

/// Samples the bit amplitudes midway between consecutive falling clock
/// edges and counts deviations from a modulo-16 up-count.
///
/// After an error the expected sequence restarts from the observed value.
/// Undecodable instants count as errors and restart the sequence at the
/// next decodable one.
pub fn counter_error_rate(
    times: &[f64],
    clock: &[f64],
    bits: [&[f64]; 4],
    cfg: &CounterConfig,
) -> Result<CounterErrors, AnalysisError> {
    let n = times.len();
    if clock.len() != n || bits.iter().any(|b| b.len() != n) {
        return Err(AnalysisError::Config("clock and bit series differ in length".into()));
    }
    if !(cfg.e_high > 0.0) || !(cfg.low_fraction < cfg.high_fraction) {
        return Err(AnalysisError::Config("invalid counter thresholds".into()));
    }
    let half = 0.5 * cfg.e_high;
    let falls: Vec<usize> = (1..n).filter(|&i| clock[i - 1] >= half && clock[i] < half).collect();
    let lo = cfg.low_fraction * cfg.e_high;
    let hi = cfg.high_fraction * cfg.e_high;
    let mut out = CounterErrors {
        sample_times: Vec::new(),
        decoded: Vec::new(),
        error_times: Vec::new(),
        errors: 0,
        undecodable: 0,
        observed_time: 0.0,
    };
    let mut prev: Option<u8> = None;
    for w in falls.windows(2) {
        let i = (w[0] + w[1]) / 2;
        let t = times[i];
        if t < cfg.startup {
            continue;
        }
        let mut value = Some(0u8);
        for (k, b) in bits.iter().enumerate() {
            let x = b[i];
            value = match value {
                Some(v) if x >= hi => Some(v | 1 << k),
                Some(v) if x <= lo => Some(v),
                _ => None,
            };
        }
        match (value, prev) {
            (None, _) => {
                out.undecodable += 1;
                out.errors += 1;
                out.error_times.push(t);
            }
            (Some(v), Some(p)) if v != (p + 1) % 16 => {
                out.errors += 1;
                out.error_times.push(t);
            }
            _ => {}
        }
        prev = value;
        out.sample_times.push(t);
        out.decoded.push(value);
    }
    if let (Some(a), Some(b)) = (out.sample_times.first(), out.sample_times.last()) {
        out.observed_time = b - a;
    }
    Ok(out)
}
