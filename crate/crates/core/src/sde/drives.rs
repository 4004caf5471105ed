//! Time-dependent input amplitudes.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::C64;

/// Fraction of a period treated as coincident with an edge.
const EDGE_EPS: f64 = 1e-9;

/// Deterministic amplitude of one signal input.
///
/// Every waveform is left-continuous: sampled exactly on an edge it returns
/// the value just before the edge.
#[derive(Debug, Clone, PartialEq)]
pub enum Waveform {
    Constant(C64),
    /// `high` for the first `duty` fraction of each period, `low` for the
    /// rest. `offset` shifts the start of the first period.
    Square {
        low: C64,
        high: C64,
        period: f64,
        duty: f64,
        offset: f64,
    },
    /// Linear ramp from `low` to `high` over the first half period and back.
    Triangle {
        low: C64,
        high: C64,
        period: f64,
        offset: f64,
    },
    /// `(t_k, v_k)` sorted by time; the value is `v_k` on `(t_k, t_{k+1}]`
    /// and `v_0` up to `t_0`.
    PiecewiseConstant(Vec<(f64, C64)>),
}

impl Waveform {
    pub fn value(&self, t: f64) -> C64 {
        match self {
            Waveform::Constant(v) => *v,
            Waveform::Square {
                low,
                high,
                period,
                duty,
                offset,
            } => {
                let x = (t - offset) / period;
                let mut frac = x - x.floor();
                if frac < EDGE_EPS {
                    frac = 1.0;
                }
                if frac <= duty + EDGE_EPS {
                    *high
                } else {
                    *low
                }
            }
            Waveform::Triangle {
                low,
                high,
                period,
                offset,
            } => {
                let x = (t - offset) / period;
                let frac = x - x.floor();
                let w = if frac <= 0.5 { 2.0 * frac } else { 2.0 - 2.0 * frac };
                low + (high - low) * w
            }
            Waveform::PiecewiseConstant(points) => {
                let tol = 1e-12 * t.abs().max(1.0);
                let mut v = points.first().map_or(C64::default(), |p| p.1);
                for &(tk, vk) in points {
                    if tk < t - tol {
                        v = vk;
                    } else {
                        break;
                    }
                }
                v
            }
        }
    }

    fn validate(&self) -> Result<(), String> {
        match self {
            Waveform::Square { period, duty, .. } => {
                if !(period.is_finite() && *period > 0.0) {
                    return Err("period must be positive".into());
                }
                if !(0.0..=1.0).contains(duty) {
                    return Err("duty must lie in [0, 1]".into());
                }
            }
            Waveform::Triangle { period, .. } => {
                if !(period.is_finite() && *period > 0.0) {
                    return Err("period must be positive".into());
                }
            }
            Waveform::PiecewiseConstant(p) => {
                if p.is_empty() {
                    return Err("needs at least one breakpoint".into());
                }
                if p.windows(2).any(|w| w[1].0 < w[0].0) {
                    return Err("breakpoints must be sorted by time".into());
                }
            }
            Waveform::Constant(_) => {}
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("drive line {line}: {message}")]
pub struct DriveParseError {
    pub line: usize,
    pub message: String,
}

/// Waveforms keyed by signal name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DriveProgram {
    pub waveforms: BTreeMap<String, Waveform>,
}

fn parse_complex(s: &str) -> Option<C64> {
    match s.split_once(',') {
        Some((re, im)) => Some(C64::new(re.parse().ok()?, im.parse().ok()?)),
        None => Some(C64::new(s.parse().ok()?, 0.0)),
    }
}

impl DriveProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, w: Waveform) -> Self {
        self.waveforms.insert(name.into(), w);
        self
    }

    pub fn set(&mut self, name: impl Into<String>, w: Waveform) {
        self.waveforms.insert(name.into(), w);
    }

    pub fn get(&self, name: &str) -> Option<&Waveform> {
        self.waveforms.get(name)
    }

    /// Parses one waveform per line:
    ///
    /// ```text
    /// a     const 50
    /// clk   square low=0 high=50 period=10 duty=0.5 offset=0
    /// ramp  triangle low=0 high=30,0 period=4
    /// sbar  pwc 0:50 2:0 4:50
    /// ```
    ///
    /// Amplitudes are `re` or `re,im`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, DriveParseError> {
        let mut prog = DriveProgram::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |m: String| DriveParseError { line, message: m };
            let content = raw.split('#').next().unwrap_or("");
            let toks: Vec<&str> = content.split_whitespace().collect();
            if toks.is_empty() {
                continue;
            }
            if toks.len() < 2 {
                return Err(err("expected `<name> <kind> ...`".into()));
            }
            let name = toks[0];
            let mut kv = BTreeMap::new();
            let w = match toks[1] {
                "const" => {
                    if toks.len() != 3 {
                        return Err(err("expected `<name> const <amplitude>`".into()));
                    }
                    Waveform::Constant(
                        parse_complex(toks[2]).ok_or_else(|| err(format!("bad amplitude `{}`", toks[2])))?,
                    )
                }
                "pwc" => {
                    let mut pts = Vec::new();
                    for t in &toks[2..] {
                        let (tt, v) = t
                            .split_once(':')
                            .ok_or_else(|| err(format!("expected time:amplitude, got `{t}`")))?;
                        let tt: f64 = tt.parse().map_err(|_| err(format!("bad time `{tt}`")))?;
                        let v = parse_complex(v).ok_or_else(|| err(format!("bad amplitude `{v}`")))?;
                        pts.push((tt, v));
                    }
                    Waveform::PiecewiseConstant(pts)
                }
                kind @ ("square" | "triangle") => {
                    for t in &toks[2..] {
                        let (k, v) = t
                            .split_once('=')
                            .ok_or_else(|| err(format!("expected key=value, got `{t}`")))?;
                        if kv.insert(k, v).is_some() {
                            return Err(err(format!("`{k}` given twice")));
                        }
                    }
                    let mut amp = |k: &str, default: Option<C64>| -> Result<C64, DriveParseError> {
                        match kv.remove(k) {
                            Some(v) => parse_complex(v).ok_or_else(|| err(format!("bad value for `{k}`"))),
                            None => default.ok_or_else(|| err(format!("missing `{k}`"))),
                        }
                    };
                    let low = amp("low", Some(C64::default()))?;
                    let high = amp("high", None)?;
                    let period = amp("period", None)?.re;
                    let offset = amp("offset", Some(C64::default()))?.re;
                    let w = if kind == "square" {
                        let duty = amp("duty", Some(C64::new(0.5, 0.0)))?.re;
                        Waveform::Square {
                            low,
                            high,
                            period,
                            duty,
                            offset,
                        }
                    } else {
                        Waveform::Triangle {
                            low,
                            high,
                            period,
                            offset,
                        }
                    };
                    if let Some(k) = kv.keys().next() {
                        return Err(err(format!("unknown parameter `{k}`")));
                    }
                    w
                }
                other => return Err(err(format!("unknown waveform `{other}`"))),
            };
            w.validate().map_err(err)?;
            if prog.waveforms.insert(name.to_string(), w).is_some() {
                return Err(err(format!("signal `{name}` defined twice")));
            }
        }
        Ok(prog)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn square_is_left_continuous() {
        let w = Waveform::Square {
            low: re(0.0),
            high: re(1.0),
            period: 2.0,
            duty: 0.5,
            offset: 0.0,
        };
        assert_eq!(w.value(0.0), re(0.0));
        assert_eq!(w.value(0.001), re(1.0));
        assert_eq!(w.value(1.0), re(1.0));
        assert_eq!(w.value(1.001), re(0.0));
        assert_eq!(w.value(2.0), re(0.0));
        assert_eq!(w.value(2.5), re(1.0));
        assert_eq!(w.value(-0.5), re(0.0));
    }

    #[test]
    fn triangle_shape() {
        let w = Waveform::Triangle {
            low: re(1.0),
            high: re(3.0),
            period: 4.0,
            offset: 0.0,
        };
        assert!((w.value(1.0) - re(2.0)).norm() < 1e-12);
        assert!((w.value(2.0) - re(3.0)).norm() < 1e-12);
        assert!((w.value(3.0) - re(2.0)).norm() < 1e-12);
    }

    #[test]
    fn pwc_is_left_continuous() {
        let w = Waveform::PiecewiseConstant(vec![(0.0, re(5.0)), (1.0, re(7.0))]);
        assert_eq!(w.value(-1.0), re(5.0));
        assert_eq!(w.value(1.0), re(5.0));
        assert_eq!(w.value(1.0 + 1e-9), re(7.0));
    }

    #[test]
    fn parses_program() {
        let p = DriveProgram::parse(
            "a const 2,1\nclk square high=50 period=10 # comment\ns pwc 0:0 2:50\nr triangle high=3 period=1 offset=0.5\n",
        )
        .unwrap();
        assert_eq!(p.get("a"), Some(&Waveform::Constant(C64::new(2.0, 1.0))));
        assert!(matches!(p.get("clk"), Some(Waveform::Square { duty, .. }) if *duty == 0.5));
        assert_eq!(p.waveforms.len(), 4);
    }

    #[test]
    fn rejects_bad_program() {
        assert!(DriveProgram::parse("a square high=1").is_err());
        assert!(DriveProgram::parse("a square high=1 period=-1").is_err());
        assert!(DriveProgram::parse("a pwc 2:0 1:0").is_err());
        assert!(DriveProgram::parse("a const 1\na const 2").is_err());
        assert!(DriveProgram::parse("a wiggle").is_err());
        let e = DriveProgram::parse("\n\nb square high=1 period=1 bogus=2").unwrap_err();
        assert_eq!(e.line, 3);
    }
}
