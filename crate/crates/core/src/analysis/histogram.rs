//! Two-dimensional histograms of a complex field.

use std::fmt::Write as _;

use super::AnalysisError;
use crate::C64;

/// Rectangular binning of the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub re_bins: usize,
    pub im_bins: usize,
}

impl GridSpec {
    /// Square grid of `bins × bins` covering `[-half, half]` in both
    /// quadratures around `center`.
    pub fn square(center: C64, half: f64, bins: usize) -> Self {
        GridSpec {
            re_min: center.re - half,
            re_max: center.re + half,
            im_min: center.im - half,
            im_max: center.im + half,
            re_bins: bins,
            im_bins: bins,
        }
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.re_bins == 0 || self.im_bins == 0 {
            return Err(AnalysisError::Config("histogram needs at least one bin per axis".into()));
        }
        if !(self.re_max > self.re_min) || !(self.im_max > self.im_min) {
            return Err(AnalysisError::Config("histogram range is empty".into()));
        }
        Ok(())
    }

    /// Bin `(i_re, i_im)` containing `z`, if inside the grid.
    pub fn bin(&self, z: C64) -> Option<(usize, usize)> {
        let fx = (z.re - self.re_min) / (self.re_max - self.re_min);
        let fy = (z.im - self.im_min) / (self.im_max - self.im_min);
        if !(0.0..1.0).contains(&fx) || !(0.0..1.0).contains(&fy) {
            return None;
        }
        Some(((fx * self.re_bins as f64) as usize, (fy * self.im_bins as f64) as usize))
    }

    /// Centre of bin `(i_re, i_im)`.
    pub fn center(&self, i_re: usize, i_im: usize) -> C64 {
        let wx = (self.re_max - self.re_min) / self.re_bins as f64;
        let wy = (self.im_max - self.im_min) / self.im_bins as f64;
        C64::new(
            self.re_min + (i_re as f64 + 0.5) * wx,
            self.im_min + (i_im as f64 + 0.5) * wy,
        )
    }
}

/// Occupation counts on a [`GridSpec`] plus a tally of samples that fell
/// outside it.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldHistogram {
    pub grid: GridSpec,
    /// Row-major by imaginary part: `counts[i_im * re_bins + i_re]`.
    pub counts: Vec<u64>,
    pub overflow: u64,
}

impl FieldHistogram {
    pub fn new(grid: GridSpec) -> Result<Self, AnalysisError> {
        grid.validate()?;
        Ok(FieldHistogram {
            grid,
            counts: vec![0; grid.re_bins * grid.im_bins],
            overflow: 0,
        })
    }

    pub fn add(&mut self, z: C64) {
        match self.grid.bin(z) {
            Some((i, j)) => self.counts[j * self.grid.re_bins + i] += 1,
            None => self.overflow += 1,
        }
    }

    pub fn extend<I: IntoIterator<Item = C64>>(&mut self, samples: I) {
        for z in samples {
            self.add(z);
        }
    }

    pub fn count(&self, i_re: usize, i_im: usize) -> u64 {
        self.counts[i_im * self.grid.re_bins + i_re]
    }

    /// All samples seen, inside the grid or not.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.overflow
    }

    /// Adds the counts of a histogram on the same grid.
    pub fn merge(&mut self, other: &FieldHistogram) -> Result<(), AnalysisError> {
        if self.grid != other.grid {
            return Err(AnalysisError::Config("cannot merge histograms on different grids".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.overflow += other.overflow;
        Ok(())
    }

    /// Mean of the binned samples, from bin centres.
    pub fn mean(&self) -> C64 {
        let inside: u64 = self.counts.iter().sum();
        let mut acc = C64::default();
        for j in 0..self.grid.im_bins {
            for i in 0..self.grid.re_bins {
                acc += self.grid.center(i, j) * self.count(i, j) as f64;
            }
        }
        acc / inside as f64
    }

    /// `log10` of each count, `None` for empty bins.
    pub fn log10_counts(&self) -> Vec<Option<f64>> {
        self.counts
            .iter()
            .map(|&c| if c > 0 { Some((c as f64).log10()) } else { None })
            .collect()
    }

    /// Gnuplot nonuniform-matrix text: the first row holds the column count
    /// followed by real-part bin centres, every following row an
    /// imaginary-part bin centre and its values. With `log`, values are
    /// `log10` of the counts and empty bins are written as `NaN`.
    pub fn to_gnuplot_matrix(&self, log: bool) -> String {
        let g = &self.grid;
        let mut s = String::new();
        let _ = write!(s, "{}", g.re_bins);
        for i in 0..g.re_bins {
            let _ = write!(s, " {:?}", g.center(i, 0).re);
        }
        s.push('\n');
        let logs = self.log10_counts();
        for j in 0..g.im_bins {
            let _ = write!(s, "{:?}", g.center(0, j).im);
            for i in 0..g.re_bins {
                let k = j * g.re_bins + i;
                if log {
                    match logs[k] {
                        Some(v) => {
                            let _ = write!(s, " {v:?}");
                        }
                        None => s.push_str(" NaN"),
                    }
                } else {
                    let _ = write!(s, " {}", self.counts[k]);
                }
            }
            s.push('\n');
        }
        let _ = writeln!(s, "# overflow {}", self.overflow);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::square(C64::default(), 1.0, 4)
    }

    #[test]
    fn bins_and_overflow() {
        let mut h = FieldHistogram::new(grid()).unwrap();
        h.extend([C64::new(0.1, 0.1), C64::new(-0.9, 0.9), C64::new(2.0, 0.0), C64::new(1.0, 0.0)]);
        assert_eq!(h.count(2, 2), 1);
        assert_eq!(h.count(0, 3), 1);
        assert_eq!(h.overflow, 2);
        assert_eq!(h.total(), 4);
    }

    #[test]
    fn merge_requires_same_grid() {
        let mut a = FieldHistogram::new(grid()).unwrap();
        a.add(C64::new(0.5, 0.5));
        let b = a.clone();
        a.merge(&b).unwrap();
        assert_eq!(a.count(3, 3), 2);
        let c = FieldHistogram::new(GridSpec::square(C64::default(), 2.0, 4)).unwrap();
        assert!(a.merge(&c).is_err());
    }

    #[test]
    fn gnuplot_layout() {
        let mut h = FieldHistogram::new(GridSpec::square(C64::default(), 1.0, 2)).unwrap();
        h.extend([C64::new(0.5, 0.5); 100]);
        let text = h.to_gnuplot_matrix(true);
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows[0], "2 -0.5 0.5");
        assert_eq!(rows[1], "-0.5 NaN NaN");
        assert_eq!(rows[2], "0.5 NaN 2.0");
        assert_eq!(rows[3], "# overflow 0");
    }

    #[test]
    fn rejects_empty_grid() {
        assert!(FieldHistogram::new(GridSpec::square(C64::default(), 0.0, 4)).is_err());
        assert!(FieldHistogram::new(GridSpec::square(C64::default(), 1.0, 0)).is_err());
    }
}
