//! Two-state jump counting with hysteresis.

use super::AnalysisError;

/// Thresholds and dwell requirement for [`detect_jumps`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpConfig {
    /// Level of the low state.
    pub low: f64,
    /// Level of the high state.
    pub high: f64,
    /// Lower threshold as a fraction of the way from `low` to `high`.
    pub lower_fraction: f64,
    /// Upper threshold as a fraction of the way from `low` to `high`.
    pub upper_fraction: f64,
    /// Time the series must stay out of the origin state's zone after
    /// crossing the opposite threshold.
    pub min_dwell: f64,
}

impl JumpConfig {
    /// 25%/75% thresholds between the two levels.
    pub fn new(low: f64, high: f64, min_dwell: f64) -> Self {
        JumpConfig {
            low,
            high,
            lower_fraction: 0.25,
            upper_fraction: 0.75,
            min_dwell,
        }
    }

    pub fn thresholds(&self) -> (f64, f64) {
        let span = self.high - self.low;
        (
            self.low + self.lower_fraction * span,
            self.low + self.upper_fraction * span,
        )
    }

    fn validate(&self) -> Result<(), AnalysisError> {
        if !(self.high > self.low) {
            return Err(AnalysisError::Config(format!(
                "high level {} must exceed low level {}",
                self.high, self.low
            )));
        }
        if !(0.0..1.0).contains(&self.lower_fraction)
            || !(self.upper_fraction <= 1.0)
            || !(self.upper_fraction > self.lower_fraction)
        {
            return Err(AnalysisError::Config("threshold fractions must satisfy 0 <= lower < upper <= 1".into()));
        }
        if !(self.min_dwell >= 0.0) {
            return Err(AnalysisError::Config("min_dwell must be non-negative".into()));
        }
        Ok(())
    }
}

/// A confirmed transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub time: f64,
    pub upward: bool,
}

/// Transition counts and rates of a two-state signal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JumpStatistics {
    pub lower_threshold: f64,
    pub upper_threshold: f64,
    pub n_up: u64,
    pub n_down: u64,
    /// Time spent assigned to the low state.
    pub time_low: f64,
    /// Time spent assigned to the high state.
    pub time_high: f64,
    /// Time before the first state assignment.
    pub time_unassigned: f64,
    pub transitions: Vec<Transition>,
}

fn rate(n: u64, t: f64) -> f64 {
    if t > 0.0 {
        n as f64 / t
    } else {
        f64::NAN
    }
}

impl JumpStatistics {
    /// Upward transitions per unit time spent low.
    pub fn rate_up(&self) -> f64 {
        rate(self.n_up, self.time_low)
    }

    pub fn rate_down(&self) -> f64 {
        rate(self.n_down, self.time_high)
    }

    /// Poisson error bar `√n / T` of [`Self::rate_up`].
    pub fn rate_up_error(&self) -> f64 {
        (self.n_up as f64).sqrt() / self.time_low
    }

    pub fn rate_down_error(&self) -> f64 {
        (self.n_down as f64).sqrt() / self.time_high
    }

    /// Time assigned to either state.
    pub fn observed_time(&self) -> f64 {
        self.time_low + self.time_high
    }

    /// All transitions per unit observed time.
    pub fn total_rate(&self) -> f64 {
        rate(self.n_up + self.n_down, self.observed_time())
    }

    pub fn total_rate_error(&self) -> f64 {
        ((self.n_up + self.n_down) as f64).sqrt() / self.observed_time()
    }

    /// Upper bound `1/T` used when no transition was seen.
    pub fn rate_bound(&self) -> f64 {
        1.0 / self.observed_time()
    }

    /// Combines statistics from independent segments.
    pub fn merge(&mut self, other: &JumpStatistics) {
        self.n_up += other.n_up;
        self.n_down += other.n_down;
        self.time_low += other.time_low;
        self.time_high += other.time_high;
        self.time_unassigned += other.time_unassigned;
        self.transitions.extend_from_slice(&other.transitions);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Unassigned,
    Low,
    High,
}

/// Incremental form of [`detect_jumps`] for series too long to store.
#[derive(Debug, Clone)]
pub struct JumpDetector {
    lo: f64,
    hi: f64,
    dt: f64,
    min_dwell: f64,
    n: usize,
    state: State,
    since: f64,
    pending: Option<f64>,
    stats: JumpStatistics,
}

impl JumpDetector {
    pub fn new(dt: f64, cfg: &JumpConfig) -> Result<Self, AnalysisError> {
        cfg.validate()?;
        if !(dt > 0.0) {
            return Err(AnalysisError::Config("sample spacing must be positive".into()));
        }
        let (lo, hi) = cfg.thresholds();
        Ok(JumpDetector {
            lo,
            hi,
            dt,
            min_dwell: cfg.min_dwell,
            n: 0,
            state: State::Unassigned,
            since: 0.0,
            pending: None,
            stats: JumpStatistics {
                lower_threshold: lo,
                upper_threshold: hi,
                ..Default::default()
            },
        })
    }

    pub fn push(&mut self, x: f64) {
        let t = self.n as f64 * self.dt;
        self.n += 1;
        let (lo, hi) = (self.lo, self.hi);
        match self.state {
            State::Unassigned => {
                if x <= lo {
                    self.state = State::Low;
                } else if x >= hi {
                    self.state = State::High;
                }
                if self.state != State::Unassigned {
                    self.stats.time_unassigned = t;
                    self.since = t;
                }
            }
            State::Low | State::High => {
                let low = self.state == State::Low;
                let (reached, back) = if low { (x >= hi, x <= lo) } else { (x <= lo, x >= hi) };
                if back {
                    self.pending = None;
                }
                if self.pending.is_none() && reached {
                    self.pending = Some(t);
                }
                if let Some(tc) = self.pending {
                    if t - tc >= self.min_dwell {
                        let st = &mut self.stats;
                        if low {
                            st.time_low += tc - self.since;
                            st.n_up += 1;
                            self.state = State::High;
                        } else {
                            st.time_high += tc - self.since;
                            st.n_down += 1;
                            self.state = State::Low;
                        }
                        st.transitions.push(Transition { time: tc, upward: low });
                        self.since = tc;
                        self.pending = None;
                    }
                }
            }
        }
    }

    /// Closes the record; the time after the last transition is assigned
    /// to the current state.
    pub fn finish(mut self) -> JumpStatistics {
        let end = self.n as f64 * self.dt;
        match self.state {
            State::Unassigned => self.stats.time_unassigned = end,
            State::Low => self.stats.time_low += end - self.since,
            State::High => self.stats.time_high += end - self.since,
        }
        self.stats
    }
}

/// Counts transitions between the low and high states of `series`, sampled
/// every `dt`.
///
/// A sample at or below the lower threshold assigns the low state, at or
/// above the upper threshold the high state. A transition starts when the
/// series reaches the opposite threshold and is confirmed once it has not
/// returned to the origin state's zone for `min_dwell`; its time is the
/// threshold crossing. Consecutive transitions therefore alternate.
pub fn detect_jumps(series: &[f64], dt: f64, cfg: &JumpConfig) -> Result<JumpStatistics, AnalysisError> {
    let mut d = JumpDetector::new(dt, cfg)?;
    for &x in series {
        d.push(x);
    }
    Ok(d.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::synth::telegraph;

    #[test]
    fn constant_series_has_no_jumps() {
        let s = vec![10.0; 1000];
        let st = detect_jumps(&s, 0.01, &JumpConfig::new(0.0, 10.0, 0.05)).unwrap();
        assert_eq!(st.n_up + st.n_down, 0);
        assert!((st.time_high - 10.0).abs() < 1e-9);
        assert!((st.rate_bound() - 0.1).abs() < 1e-9);
        assert_eq!(st.rate_down(), 0.0);
    }

    #[test]
    fn square_wave_counts_every_edge() {
        let s: Vec<f64> = (0..1000).map(|i| if (i / 100) % 2 == 0 { 0.0 } else { 1.0 }).collect();
        let st = detect_jumps(&s, 1.0, &JumpConfig::new(0.0, 1.0, 5.0)).unwrap();
        assert_eq!((st.n_up, st.n_down), (5, 4));
        assert_eq!(st.transitions[0].time, 100.0);
        assert!(st.transitions.windows(2).all(|w| w[0].upward != w[1].upward));
        assert_eq!(st.time_low + st.time_high, 1000.0);
    }

    #[test]
    fn short_excursions_are_ignored() {
        let mut s = vec![0.0; 100];
        s[50] = 1.0;
        s[51] = 1.0;
        let st = detect_jumps(&s, 1.0, &JumpConfig::new(0.0, 1.0, 5.0)).unwrap();
        assert_eq!(st.n_up, 0);
    }

    #[test]
    fn rejects_unseparated_levels() {
        assert!(detect_jumps(&[0.0], 1.0, &JumpConfig::new(1.0, 1.0, 0.0)).is_err());
        assert!(detect_jumps(&[0.0], 1.0, &JumpConfig::new(2.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn recovers_telegraph_rate() {
        let (ru, rd) = (2.0, 5.0);
        let s = telegraph(ru, rd, 400.0, 0.001, 0.1, 1);
        let st = detect_jumps(&s, 0.001, &JumpConfig::new(0.0, 1.0, 0.002)).unwrap();
        assert!((st.rate_up() - ru).abs() < 2.0 * st.rate_up_error(), "{} ± {}", st.rate_up(), st.rate_up_error());
        assert!((st.rate_down() - rd).abs() < 2.0 * st.rate_down_error(), "{st:?}");
    }

    #[test]
    fn merge_adds() {
        let s = telegraph(1.0, 1.0, 50.0, 0.01, 0.05, 2);
        let cfg = JumpConfig::new(0.0, 1.0, 0.05);
        let a = detect_jumps(&s, 0.01, &cfg).unwrap();
        let mut m = a.clone();
        m.merge(&a);
        assert_eq!(m.n_up, 2 * a.n_up);
        assert!((m.observed_time() - 2.0 * a.observed_time()).abs() < 1e-9);
    }
}
