//! Relaxation rates from the decay of the autocorrelation function.

use rustfft::FftPlanner;

use super::AnalysisError;
use crate::C64;

/// Fit settings for [`autocorr_rate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutocorrConfig {
    /// Smallest lag included in the fit. Defaults to one sample.
    pub min_lag: Option<f64>,
    /// The fit window ends at this multiple of the decay time.
    pub window_factor: f64,
    /// Minimum coefficient of determination of the log-linear fit.
    pub min_r_squared: f64,
    /// Minimum number of lags in the fit window.
    pub min_points: usize,
}

impl Default for AutocorrConfig {
    fn default() -> Self {
        AutocorrConfig {
            min_lag: None,
            window_factor: 3.0,
            min_r_squared: 0.95,
            min_points: 5,
        }
    }
}

impl AutocorrConfig {
    /// Window starting at `0.1/κ`.
    pub fn for_decay(decay: f64) -> Self {
        AutocorrConfig {
            min_lag: Some(0.1 / decay),
            ..Default::default()
        }
    }
}

/// Result of an exponential fit `A e^{-γτ}` to the normalized
/// autocorrelation magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct AutocorrFit {
    pub rate: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    /// Lag range of the final fit.
    pub window: (f64, f64),
    pub points: usize,
}

/// Normalized autocorrelation magnitude `|C(k)|/C(0)` of the mean-removed
/// series for lags `0..n`, via zero-padded FFT.
pub fn autocorrelation(series: &[C64]) -> Vec<f64> {
    let n = series.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = series.iter().sum::<C64>() / n as f64;
    let m = (2 * n).next_power_of_two();
    let mut buf: Vec<C64> = series.iter().map(|z| z - mean).collect();
    buf.resize(m, C64::default());
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    for z in buf.iter_mut() {
        *z = C64::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    let c0 = buf[0].re / n as f64;
    (0..n)
        .map(|k| {
            let c = buf[k] / (n - k) as f64;
            if c0 > 0.0 {
                c.norm() / c0
            } else {
                0.0
            }
        })
        .collect()
}

/// Log-linear least squares over lags `lo..=hi`, each point weighted by
/// `ρ²` since the noise on `ln ρ` grows as `1/ρ`. Returns
/// `(rate, amplitude, r², points)`.
fn fit_window(rho: &[f64], dt: f64, lo: usize, hi: usize) -> Option<(f64, f64, f64, usize)> {
    let pts: Vec<(f64, f64, f64)> = (lo..=hi.min(rho.len() - 1))
        .filter(|&k| rho[k] > 0.0)
        .map(|k| (k as f64 * dt, rho[k].ln(), rho[k] * rho[k]))
        .collect();
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| p.2 * (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| p.2 * (p.1 - icpt - slope * p.0).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 0.0 };
    Some((-slope, icpt.exp(), r2, n))
}

/// Fits the decay rate of the autocorrelation of `series` sampled every `dt`.
///
/// An initial decay time is read off where the correlation first drops
/// below `1/e`. The fit runs from the minimum lag to `window_factor` decay
/// times and is repeated once with the refined rate. Fits with too few
/// points, a non-positive rate or a poor `r²` are rejected.
pub fn autocorr_rate(series: &[C64], dt: f64, cfg: &AutocorrConfig) -> Result<AutocorrFit, AnalysisError> {
    if !(dt > 0.0) {
        return Err(AnalysisError::Config("sample spacing must be positive".into()));
    }
    if series.len() < 2 * cfg.min_points.max(2) {
        return Err(AnalysisError::Fit("series too short".into()));
    }
    let rho = autocorrelation(series);
    if rho[0] == 0.0 {
        return Err(AnalysisError::Fit("series is constant".into()));
    }
    let lo = cfg.min_lag.map_or(1, |l| ((l / dt).round() as usize).max(1));
    let cross = rho
        .iter()
        .position(|&r| r < (-1f64).exp())
        .ok_or_else(|| AnalysisError::Fit("correlation never decays below 1/e".into()))?;
    let mut rate = 1.0 / (cross as f64 * dt);
    let mut result = None;
    for _ in 0..2 {
        let hi = (cfg.window_factor / (rate * dt)).floor() as usize;
        if hi <= lo {
            break;
        }
        let Some((g, a, r2, pts)) = fit_window(&rho, dt, lo, hi) else { break };
        result = Some(AutocorrFit {
            rate: g,
            amplitude: a,
            r_squared: r2,
            window: (lo as f64 * dt, hi.min(rho.len() - 1) as f64 * dt),
            points: pts,
        });
        if !(g > 0.0) {
            break;
        }
        rate = g;
    }
    let fit = result.ok_or_else(|| AnalysisError::Fit("decay faster than the minimum lag".into()))?;
    if fit.points < cfg.min_points {
        return Err(AnalysisError::Fit(format!("only {} lags in the fit window", fit.points)));
    }
    if !(fit.rate > 0.0) {
        return Err(AnalysisError::Fit(format!("non-positive rate {}", fit.rate)));
    }
    if !(fit.r_squared >= cfg.min_r_squared) {
        return Err(AnalysisError::Fit(format!("poor exponential fit, r² = {:.3}", fit.r_squared)));
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::synth::telegraph;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn autocorrelation_of_constant_is_zero() {
        let rho = autocorrelation(&[C64::new(1.0, 1.0); 16]);
        assert!(rho.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn autocorrelation_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s: Vec<C64> = (0..50).map(|_| C64::new(rng.random(), rng.random())).collect();
        let rho = autocorrelation(&s);
        let mean = s.iter().sum::<C64>() / 50.0;
        let c = |k: usize| (0..50 - k).map(|i| (s[i] - mean).conj() * (s[i + k] - mean)).sum::<C64>() / (50 - k) as f64;
        for k in [1, 7, 30] {
            assert!((rho[k] - c(k).norm() / c(0).norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn ornstein_uhlenbeck_rate() {
        // dz = -(γ + iω) z dt + dW, exact discretisation
        let (g, w, dt) = (2.0, 15.0, 0.005);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = C64::new(-g * dt, -w * dt).exp();
        let sd = ((1.0 - (-2.0 * g * dt).exp()) / (4.0 * g)).sqrt();
        let mut z = C64::default();
        let s: Vec<C64> = (0..400_000)
            .map(|_| {
                z = f * z + sd * C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                z
            })
            .collect();
        let fit = autocorr_rate(&s, dt, &AutocorrConfig::default()).unwrap();
        assert!((fit.rate - g).abs() < 0.1 * g, "{fit:?}");
    }

    #[test]
    fn telegraph_rate_is_sum() {
        let (r1, r2, dt) = (3.0, 1.0, 0.002);
        let s: Vec<C64> = telegraph(r1, r2, 2000.0, dt, 0.0, 5).into_iter().map(|x| C64::new(x, 0.0)).collect();
        let fit = autocorr_rate(&s, dt, &AutocorrConfig::default()).unwrap();
        assert!((fit.rate - (r1 + r2)).abs() < 0.1 * (r1 + r2), "{fit:?}");
    }

    #[test]
    fn white_noise_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s: Vec<C64> = (0..10_000).map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
        assert!(matches!(autocorr_rate(&s, 0.01, &AutocorrConfig::default()), Err(AnalysisError::Fit(_))));
    }
}
