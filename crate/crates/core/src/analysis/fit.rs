//! Polynomial fits used to extrapolate jump rates.

use nalgebra::{DMatrix, DVector};

use super::AnalysisError;

/// Least-squares polynomial `c[0] + c[1] x + c[2] x² + ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    pub coefficients: Vec<f64>,
    /// Root-mean-square residual.
    pub rms_residual: f64,
}

impl PolyFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    fn derivative(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * x + k as f64 * c)
    }

    /// Smallest `x > from` where the polynomial reaches `target`, by a
    /// scan in steps of `step` followed by bisection.
    pub fn solve_above(&self, target: f64, from: f64, step: f64, limit: f64) -> Option<f64> {
        let f = |x: f64| self.eval(x) - target;
        let mut a = from;
        let mut fa = f(a);
        while a < limit {
            let b = (a + step).min(limit);
            let fb = f(b);
            if fa == 0.0 {
                return Some(a);
            }
            if fa.signum() != fb.signum() {
                let (mut lo, mut hi) = (a, b);
                for _ in 0..100 {
                    let m = 0.5 * (lo + hi);
                    if f(m).signum() == fa.signum() {
                        lo = m;
                    } else {
                        hi = m;
                    }
                }
                return Some(0.5 * (lo + hi));
            }
            a = b;
            fa = fb;
        }
        None
    }

    /// Whether the fit decreases over `[a, b]`, checked on a grid.
    pub fn decreasing_on(&self, a: f64, b: f64) -> bool {
        (0..=100).all(|i| self.derivative(a + (b - a) * i as f64 / 100.0) < 0.0)
    }
}

/// Fits a polynomial of the given degree to `(x, y)` by least squares.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<PolyFit, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::Config("x and y differ in length".into()));
    }
    if x.len() <= degree {
        return Err(AnalysisError::Fit(format!(
            "{} points cannot determine a degree-{degree} polynomial",
            x.len()
        )));
    }
    let a = DMatrix::from_fn(x.len(), degree + 1, |i, j| x[i].powi(j as i32));
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let c = svd
        .solve(&b, 1e-12)
        .map_err(|e| AnalysisError::Fit(e.to_string()))?;
    let r = &a * &c - &b;
    Ok(PolyFit {
        coefficients: c.iter().copied().collect(),
        rms_residual: (r.norm_squared() / x.len() as f64).sqrt(),
    })
}
