//! Plain-text dump of a reduced system.
//!
//! Matrices are written row-major, one row per line, each entry as
//! `re,im` with 17 significant digits so values survive a round trip.

use std::fmt::{self, Write as _};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::{InputInfo, KerrMode, ReducedSystem, ResonatorInfo};
use crate::netlist::InputKind;
use crate::C64;

const MAGIC: &str = "kerrsim-reduced 1";

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct ParseReducedError {
    pub line: usize,
    pub message: String,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn cnum(z: C64) -> String {
    format!("{},{}", num(z.re), num(z.im))
}

fn write_matrix(out: &mut String, name: &str, m: &DMatrix<C64>) {
    let _ = writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| cnum(m[(r, c)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

fn write_vector(out: &mut String, name: &str, v: &DVector<C64>) {
    let _ = writeln!(out, "vector {name} {}", v.len());
    let row: Vec<String> = v.iter().map(|z| cnum(*z)).collect();
    let _ = writeln!(out, "{}", row.join(" "));
}

impl fmt::Display for ReducedSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "resonators {}", self.resonators.len());
        for r in &self.resonators {
            let _ = writeln!(
                out,
                "{} delta={} kappa={} chi={}",
                r.name,
                num(r.mode.detuning),
                num(r.mode.decay),
                num(r.mode.kerr)
            );
        }
        let _ = writeln!(out, "inputs {}", self.inputs.len());
        for i in &self.inputs {
            let kind = match &i.kind {
                InputKind::Vacuum => "vacuum".to_string(),
                InputKind::Coherent(b) => format!("coherent {}", cnum(*b)),
                InputKind::Signal(s) => format!("signal {s}"),
            };
            let _ = writeln!(out, "{} {kind}", i.name);
        }
        let _ = writeln!(out, "outputs {}", self.outputs.len());
        for o in &self.outputs {
            let _ = writeln!(out, "{o}");
        }
        write_matrix(&mut out, "feedback", &self.feedback);
        write_vector(&mut out, "drift", &self.drift);
        write_matrix(&mut out, "input_coupling", &self.input_coupling);
        write_matrix(&mut out, "output_coupling", &self.output_coupling);
        write_vector(&mut out, "output_offset", &self.output_offset);
        write_matrix(&mut out, "feedthrough", &self.feedthrough);
        f.write_str(&out)
    }
}

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str, ParseReducedError> {
        let (i, l) = self.it.next().ok_or(ParseReducedError {
            line: self.line + 1,
            message: "unexpected end of input".into(),
        })?;
        self.line = i + 1;
        Ok(l)
    }

    fn err(&self, message: impl Into<String>) -> ParseReducedError {
        ParseReducedError {
            line: self.line,
            message: message.into(),
        }
    }

    fn header(&mut self, key: &str) -> Result<Vec<usize>, ParseReducedError> {
        let l = self.next()?;
        let mut toks = l.split_whitespace();
        if toks.next() != Some(key) {
            return Err(self.err(format!("expected `{key}`")));
        }
        toks.map(|t| t.parse().map_err(|_| self.err(format!("bad count `{t}`"))))
            .collect()
    }

    fn real(&self, s: &str) -> Result<f64, ParseReducedError> {
        s.parse().map_err(|_| self.err(format!("bad number `{s}`")))
    }

    fn complex(&self, s: &str) -> Result<C64, ParseReducedError> {
        let (re, im) = s
            .split_once(',')
            .ok_or_else(|| self.err(format!("bad complex `{s}`")))?;
        Ok(C64::new(self.real(re)?, self.real(im)?))
    }

    fn row(&mut self, n: usize) -> Result<Vec<C64>, ParseReducedError> {
        if n == 0 {
            let l = self.next()?;
            return if l.trim().is_empty() {
                Ok(Vec::new())
            } else {
                Err(self.err("expected an empty row"))
            };
        }
        let l = self.next()?;
        let v = l
            .split_whitespace()
            .map(|t| self.complex(t))
            .collect::<Result<Vec<_>, _>>()?;
        if v.len() != n {
            return Err(self.err(format!("expected {n} entries, found {}", v.len())));
        }
        Ok(v)
    }
}

fn parse_matrix(
    lines: &mut Lines<'_>,
    name: &str,
    rows: usize,
    cols: usize,
) -> Result<DMatrix<C64>, ParseReducedError> {
    let l = lines.next()?;
    let toks: Vec<&str> = l.split_whitespace().collect();
    if toks.len() != 4 || toks[0] != "matrix" || toks[1] != name {
        return Err(lines.err(format!("expected `matrix {name} {rows} {cols}`")));
    }
    if toks[2] != rows.to_string() || toks[3] != cols.to_string() {
        return Err(lines.err(format!("matrix {name} should be {rows}x{cols}")));
    }
    let mut m = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        let row = lines.row(cols)?;
        for (c, z) in row.into_iter().enumerate() {
            m[(r, c)] = z;
        }
    }
    Ok(m)
}

fn parse_vector(lines: &mut Lines<'_>, name: &str, n: usize) -> Result<DVector<C64>, ParseReducedError> {
    let l = lines.next()?;
    let toks: Vec<&str> = l.split_whitespace().collect();
    if toks.len() != 3 || toks[0] != "vector" || toks[1] != name || toks[2] != n.to_string() {
        return Err(lines.err(format!("expected `vector {name} {n}`")));
    }
    Ok(DVector::from_vec(lines.row(n)?))
}

impl ReducedSystem {
    /// Text form written by `Display`.
    pub fn to_text(&self) -> String {
        self.to_string()
    }

    /// Reads the text form back.
    pub fn from_text(text: &str) -> Result<Self, ParseReducedError> {
        let mut lines = Lines {
            it: text.lines().enumerate(),
            line: 0,
        };
        if lines.next()?.trim() != MAGIC {
            return Err(lines.err(format!("expected `{MAGIC}`")));
        }
        let nr = one(&mut lines, "resonators")?;
        let mut resonators = Vec::with_capacity(nr);
        for _ in 0..nr {
            let l = lines.next()?;
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() != 4 {
                return Err(lines.err("expected `<name> delta= kappa= chi=`"));
            }
            let field = |t: &str, key: &str| -> Result<f64, ParseReducedError> {
                let v = t
                    .strip_prefix(key)
                    .and_then(|s| s.strip_prefix('='))
                    .ok_or_else(|| lines.err(format!("expected `{key}=`")))?;
                lines.real(v)
            };
            resonators.push(ResonatorInfo {
                name: toks[0].to_string(),
                mode: KerrMode {
                    detuning: field(toks[1], "delta")?,
                    decay: field(toks[2], "kappa")?,
                    kerr: field(toks[3], "chi")?,
                },
            });
        }
        let ni = one(&mut lines, "inputs")?;
        let mut inputs = Vec::with_capacity(ni);
        for _ in 0..ni {
            let l = lines.next()?;
            let toks: Vec<&str> = l.split_whitespace().collect();
            let kind = match toks.as_slice() {
                [_, "vacuum"] => InputKind::Vacuum,
                [_, "coherent", z] => InputKind::Coherent(lines.complex(z)?),
                [_, "signal", s] => InputKind::Signal(s.to_string()),
                _ => return Err(lines.err("bad input line")),
            };
            inputs.push(InputInfo {
                name: toks[0].to_string(),
                kind,
            });
        }
        let no = one(&mut lines, "outputs")?;
        let mut outputs = Vec::with_capacity(no);
        for _ in 0..no {
            outputs.push(lines.next()?.trim().to_string());
        }
        Ok(ReducedSystem {
            feedback: parse_matrix(&mut lines, "feedback", nr, nr)?,
            drift: parse_vector(&mut lines, "drift", nr)?,
            input_coupling: parse_matrix(&mut lines, "input_coupling", nr, ni)?,
            output_coupling: parse_matrix(&mut lines, "output_coupling", no, nr)?,
            output_offset: parse_vector(&mut lines, "output_offset", no)?,
            feedthrough: parse_matrix(&mut lines, "feedthrough", no, ni)?,
            resonators,
            inputs,
            outputs,
        })
    }
}

fn one(lines: &mut Lines<'_>, key: &str) -> Result<usize, ParseReducedError> {
    match lines.header(key)?.as_slice() {
        [n] => Ok(*n),
        _ => Err(lines.err(format!("expected `{key} <count>`"))),
    }
}
