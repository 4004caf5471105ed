//! Trajectory CSV files: a `time` column followed by `<name>.re` and
//! `<name>.im` for every recorded trace. Numbers use the shortest text that
//! reads back to the same `f64`.

use std::fmt::Write as _;

use num_complex::Complex64 as C64;

use kerrsim::sde::Trajectory;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    pub columns: Vec<Vec<C64>>,
}

impl TraceTable {
    /// Recorded resonators first, then outputs.
    pub fn from_trajectory(tr: &Trajectory) -> Self {
        TraceTable {
            times: tr.times.clone(),
            names: tr.resonator_names.iter().chain(&tr.output_names).cloned().collect(),
            columns: tr.resonators.iter().chain(&tr.outputs).cloned().collect(),
        }
    }

    pub fn column(&self, name: &str) -> Result<&[C64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| {
                CliError::validation(format!("no column `{name}`; available: {}", self.names.join(", ")))
            })
    }

    /// Spacing of the time column.
    pub fn spacing(&self) -> Result<f64> {
        match self.times.as_slice() {
            [a, b, ..] if b > a => Ok(b - a),
            _ => Err(CliError::validation("trajectory needs at least two increasing time samples")),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("time");
        for n in &self.names {
            let _ = write!(s, ",{n}.re,{n}.im");
        }
        s.push('\n');
        for (i, t) in self.times.iter().enumerate() {
            let _ = write!(s, "{t:?}");
            for c in &self.columns {
                let _ = write!(s, ",{:?},{:?}", c[i].re, c[i].im);
            }
            s.push('\n');
        }
        s
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| CliError::validation("empty trajectory file"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.first() != Some(&"time") || cols.len() % 2 != 1 {
            return Err(CliError::validation("header must be `time` followed by .re/.im column pairs"));
        }
        let mut names = Vec::new();
        for pair in cols[1..].chunks(2) {
            match (pair[0].strip_suffix(".re"), pair[1].strip_suffix(".im")) {
                (Some(a), Some(b)) if a == b => names.push(a.to_string()),
                _ => {
                    return Err(CliError::validation(format!(
                        "columns `{}`, `{}` are not a .re/.im pair",
                        pair[0], pair[1]
                    )))
                }
            }
        }
        let mut times = Vec::new();
        let mut columns = vec![Vec::new(); names.len()];
        for (ln, line) in lines {
            let vals = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| CliError::validation(format!("line {}: {e}", ln + 1)))?;
            if vals.len() != cols.len() {
                return Err(CliError::validation(format!(
                    "line {}: expected {} values, found {}",
                    ln + 1,
                    cols.len(),
                    vals.len()
                )));
            }
            times.push(vals[0]);
            for (k, c) in columns.iter_mut().enumerate() {
                c.push(C64::new(vals[1 + 2 * k], vals[2 + 2 * k]));
            }
        }
        Ok(TraceTable { times, names, columns })
    }
}
