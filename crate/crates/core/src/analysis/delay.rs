//! Propagation delays between a stimulus edge and the response.

use super::AnalysisError;

/// Delay from one stimulus edge to the response's mid-level crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayMeasurement {
    /// Interpolated time of the stimulus crossing its mid level.
    pub edge_time: f64,
    pub rising_stimulus: bool,
    /// Direction of the response crossing that was searched for.
    pub rising_response: bool,
    pub crossing_time: Option<f64>,
    /// `crossing_time - edge_time`.
    pub delay: Option<f64>,
    /// The response crossed together with the stimulus.
    pub degenerate: bool,
    /// No crossing before the next stimulus edge or the end of the record.
    pub unmeasurable: bool,
}

/// Linear interpolation of the time where `s` crosses `level` between
/// samples `i - 1` and `i`.
fn interp(times: &[f64], s: &[f64], i: usize, level: f64) -> f64 {
    let (a, b) = (s[i - 1], s[i]);
    if b == a {
        return times[i];
    }
    times[i - 1] + (level - a) / (b - a) * (times[i] - times[i - 1])
}

/// Indices `i` where `s` crosses `level` between `i - 1` and `i`, with the
/// direction (true for rising).
fn crossings(s: &[f64], level: f64) -> Vec<(usize, bool)> {
    let mut out = Vec::new();
    for i in 1..s.len() {
        let (a, b) = (s[i - 1] - level, s[i] - level);
        if a < 0.0 && b >= 0.0 {
            out.push((i, true));
        } else if a >= 0.0 && b < 0.0 {
            out.push((i, false));
        }
    }
    out
}

/// Measures the delay of every stimulus edge.
///
/// Stimulus edges are crossings of `stimulus_mid`. After each edge the
/// response is expected to move away from the side of `(low + high)/2` it
/// occupies at the edge. The last crossing of that mid level in that
/// direction before the next edge gives the delay, so a transient glitch
/// through the mid level (direct feedthrough of the input edge, say) is not
/// taken for the switching event. Delays at or below `tolerance` are
/// flagged degenerate.
pub fn measure_delay(
    times: &[f64],
    stimulus: &[f64],
    stimulus_mid: f64,
    response: &[f64],
    levels: (f64, f64),
    tolerance: f64,
) -> Result<Vec<DelayMeasurement>, AnalysisError> {
    if times.len() != stimulus.len() || times.len() != response.len() {
        return Err(AnalysisError::Config("times, stimulus and response differ in length".into()));
    }
    if levels.0 == levels.1 {
        return Err(AnalysisError::Config("response levels coincide".into()));
    }
    let mid = 0.5 * (levels.0 + levels.1);
    let edges = crossings(stimulus, stimulus_mid);
    let resp = crossings(response, mid);
    let mut out = Vec::with_capacity(edges.len());
    for (k, &(i, rising)) in edges.iter().enumerate() {
        let edge_time = interp(times, stimulus, i, stimulus_mid);
        let end = edges.get(k + 1).map_or(times.len(), |e| e.0);
        // side of the mid level just before the edge
        let rising_response = response[i - 1] < mid;
        let hit = resp
            .iter()
            .rev()
            .find(|&&(j, up)| j >= i && j < end && up == rising_response)
            .map(|&(j, _)| interp(times, response, j, mid));
        let delay = hit.map(|c| c - edge_time);
        out.push(DelayMeasurement {
            edge_time,
            rising_stimulus: rising,
            rising_response,
            crossing_time: hit,
            delay,
            degenerate: delay.is_some_and(|d| d <= tolerance),
            unmeasurable: hit.is_none(),
        });
    }
    Ok(out)
}
