//! Stochastic integration of a reduced system.
//!
//! Each step advances
//!
//! ```text
//! α_j ← α_j exp((-iΔ_j - κ_j/2 - 2iχ_j|α_j|²) δt) + (Σ_k A_jk α_k + a_j + Σ_k B_jk β_k) δt
//! ```
//!
//! where `A` is the feedback matrix without the bare diagonal and `β` holds
//! the input amplitudes: the deterministic drive plus independent complex
//! Gaussian noise of standard deviation `1/(2√δt)` per quadrature. The same
//! noise sample enters the state update and the recorded outputs.

mod drives;
mod noise;

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::netlist::InputKind;
use crate::reduction::ReducedSystem;
use crate::C64;

pub use drives::{DriveParseError, DriveProgram, Waveform};
pub use noise::{trajectory_seed, NoiseSource};

/// Step size as a fraction of the fastest time scale when none is given.
pub const DEFAULT_STEP_FRACTION: f64 = 0.025;

/// Above this many resonators the couplings are stored as sparse rows.
pub const SPARSE_THRESHOLD: usize = 32;

/// Which resonators or outputs to record.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Selection {
    #[default]
    All,
    Nothing,
    Names(Vec<String>),
}

impl Selection {
    fn resolve(&self, names: &[&str]) -> Result<Vec<usize>, SimError> {
        match self {
            Selection::All => Ok((0..names.len()).collect()),
            Selection::Nothing => Ok(Vec::new()),
            Selection::Names(sel) => sel
                .iter()
                .map(|s| {
                    names
                        .iter()
                        .position(|n| n == s)
                        .ok_or_else(|| SimError::UnknownTrace(s.clone()))
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub t_max: f64,
    /// Step size; defaults to `0.025 / max_j(|Δ_j|, κ_j)`.
    pub dt: Option<f64>,
    pub seed: u64,
    /// When false the inputs carry only their deterministic amplitude.
    pub noise: bool,
    /// Initial resonator amplitudes; zero when absent.
    pub initial: Option<Vec<C64>>,
    /// Length of the non-overlapping boxcar over which samples are averaged
    /// before recording. Must be a whole number of steps.
    pub average_window: Option<f64>,
    /// Replace `Δ_j` by `Δ_j - 2χ_j` (the symmetric-ordering correction).
    pub kerr_correction: bool,
    pub record_resonators: Selection,
    pub record_outputs: Selection,
    /// Force dense (`Some(false)`) or sparse (`Some(true)`) couplings.
    pub sparse: Option<bool>,
    /// A trajectory with `|α_j|` above this is reported as divergent.
    pub divergence_limit: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            t_max: 1.0,
            dt: None,
            seed: 0,
            noise: true,
            initial: None,
            average_window: None,
            kerr_correction: false,
            record_resonators: Selection::All,
            record_outputs: Selection::All,
            sparse: None,
            divergence_limit: 1e6,
        }
    }
}

impl SimConfig {
    pub fn new(t_max: f64) -> Self {
        SimConfig {
            t_max,
            ..Default::default()
        }
    }

    pub fn noiseless(mut self) -> Self {
        self.noise = false;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn window(mut self, w: f64) -> Self {
        self.average_window = Some(w);
        self
    }

    pub fn initial(mut self, alpha: Vec<C64>) -> Self {
        self.initial = Some(alpha);
        self
    }

    /// Step size used for `sys`.
    pub fn step_for(&self, sys: &ReducedSystem) -> Result<f64, SimError> {
        let dt = match self.dt {
            Some(dt) => dt,
            None => {
                let rate = sys.fastest_rate();
                if rate <= 0.0 {
                    return Err(SimError::BadConfig(
                        "no resonator sets a time scale; give dt explicitly".into(),
                    ));
                }
                DEFAULT_STEP_FRACTION / rate
            }
        };
        if !(dt.is_finite() && dt > 0.0) {
            return Err(SimError::BadConfig(format!("step size must be positive, got {dt}")));
        }
        Ok(dt)
    }

    fn window_steps(&self, dt: f64) -> Result<usize, SimError> {
        match self.average_window {
            None => Ok(1),
            Some(w) => {
                let m = (w / dt).round();
                if m < 1.0 || ((m * dt - w) / w).abs() > 1e-6 {
                    return Err(SimError::BadConfig(format!(
                        "averaging window {w} is not a positive multiple of the step {dt}"
                    )));
                }
                Ok(m as usize)
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("no drive given for signal input `{0}`")]
    MissingDrive(String),
    #[error("initial state has {got} entries but the system has {expected} resonators")]
    InitialState { expected: usize, got: usize },
    #[error("{0}")]
    BadConfig(String),
    #[error("no resonator or output named `{0}`")]
    UnknownTrace(String),
    #[error("trajectory diverged at t = {t}: resonator `{resonator}` reached {value:e}")]
    Divergence {
        t: f64,
        resonator: String,
        value: f64,
    },
}

enum LinOp {
    Dense { cols: usize, vals: Vec<C64> },
    Sparse { row_ptr: Vec<usize>, cols: Vec<usize>, vals: Vec<C64> },
}

impl LinOp {
    fn new(m: &DMatrix<C64>, sparse: bool) -> Self {
        if sparse {
            let mut row_ptr = vec![0];
            let mut cols = Vec::new();
            let mut vals = Vec::new();
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    let v = m[(r, c)];
                    if v != C64::default() {
                        cols.push(c);
                        vals.push(v);
                    }
                }
                row_ptr.push(cols.len());
            }
            LinOp::Sparse { row_ptr, cols, vals }
        } else {
            let vals = (0..m.nrows())
                .flat_map(|r| (0..m.ncols()).map(move |c| (r, c)))
                .map(|(r, c)| m[(r, c)])
                .collect();
            LinOp::Dense {
                cols: m.ncols(),
                vals,
            }
        }
    }

    #[inline]
    fn row_dot(&self, r: usize, x: &[C64]) -> C64 {
        match self {
            LinOp::Dense { cols, vals } => {
                let row = &vals[r * cols..(r + 1) * cols];
                row.iter().zip(x).map(|(a, b)| a * b).sum()
            }
            LinOp::Sparse { row_ptr, cols, vals } => {
                let (s, e) = (row_ptr[r], row_ptr[r + 1]);
                cols[s..e].iter().zip(&vals[s..e]).map(|(&c, v)| v * x[c]).sum()
            }
        }
    }
}

enum InputSrc<'a> {
    Fixed(C64),
    Wave(&'a Waveform),
}

/// State at the start of step `n`, with the input amplitudes used for it.
pub struct StepView<'a> {
    pub n: usize,
    pub t: f64,
    pub alpha: &'a [C64],
    pub inputs: &'a [C64],
}

/// Precomputed integrator for one system and drive program.
pub struct Integrator<'a> {
    sys: &'a ReducedSystem,
    bare: Vec<C64>,
    kerr: Vec<f64>,
    feedback: LinOp,
    coupling: LinOp,
    drift: Vec<C64>,
    sources: Vec<InputSrc<'a>>,
    dt: f64,
    n_steps: usize,
    window: usize,
    cfg: &'a SimConfig,
}

impl<'a> Integrator<'a> {
    pub fn new(
        sys: &'a ReducedSystem,
        drives: &'a DriveProgram,
        cfg: &'a SimConfig,
    ) -> Result<Self, SimError> {
        let dt = cfg.step_for(sys)?;
        if !(cfg.t_max.is_finite() && cfg.t_max >= 0.0) {
            return Err(SimError::BadConfig("t_max must be non-negative".into()));
        }
        let window = cfg.window_steps(dt)?;
        let n_steps = (cfg.t_max / dt).round() as usize;
        if let Some(init) = &cfg.initial {
            if init.len() != sys.n_resonators() {
                return Err(SimError::InitialState {
                    expected: sys.n_resonators(),
                    got: init.len(),
                });
            }
        }
        let sources = sys
            .inputs
            .iter()
            .map(|i| match &i.kind {
                InputKind::Vacuum => Ok(InputSrc::Fixed(C64::default())),
                InputKind::Coherent(b) => Ok(InputSrc::Fixed(*b)),
                InputKind::Signal(s) => drives
                    .get(s)
                    .map(InputSrc::Wave)
                    .ok_or_else(|| SimError::MissingDrive(s.clone())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let sparse = cfg.sparse.unwrap_or(sys.n_resonators() > SPARSE_THRESHOLD);
        let bare = sys
            .resonators
            .iter()
            .map(|r| {
                let mut m = r.mode;
                if cfg.kerr_correction {
                    m.detuning -= 2.0 * m.kerr;
                }
                m.bare()
            })
            .collect();
        Ok(Integrator {
            sys,
            bare,
            kerr: sys.resonators.iter().map(|r| r.mode.kerr).collect(),
            feedback: LinOp::new(&sys.feedback, sparse),
            coupling: LinOp::new(&sys.input_coupling, sparse),
            drift: sys.drift.iter().copied().collect(),
            sources,
            dt,
            n_steps,
            window,
            cfg,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Integrates trajectory `index`, calling `observe` before every step.
    /// Returns the final state.
    pub fn run<F: FnMut(&StepView<'_>)>(&self, index: u64, mut observe: F) -> Result<Vec<C64>, SimError> {
        let nr = self.sys.n_resonators();
        let ni = self.sys.n_inputs();
        let mut alpha = self
            .cfg
            .initial
            .clone()
            .unwrap_or_else(|| vec![C64::default(); nr]);
        let mut next = vec![C64::default(); nr];
        let mut beta = vec![C64::default(); ni];
        let sigma = 0.5 / self.dt.sqrt();
        let mut noise = self
            .cfg
            .noise
            .then(|| NoiseSource::new(self.cfg.seed, index, ni, sigma));
        let dt = self.dt;
        let limit = self.cfg.divergence_limit;
        for n in 0..self.n_steps {
            let t = n as f64 * dt;
            for (b, src) in beta.iter_mut().zip(&self.sources) {
                *b = match src {
                    InputSrc::Fixed(v) => *v,
                    InputSrc::Wave(w) => w.value(t),
                };
            }
            if let Some(ns) = noise.as_mut() {
                ns.add_to(&mut beta);
            }
            observe(&StepView {
                n,
                t,
                alpha: &alpha,
                inputs: &beta,
            });
            for j in 0..nr {
                let a = alpha[j];
                let rot = (self.bare[j] - C64::new(0.0, 2.0 * self.kerr[j] * a.norm_sqr())) * dt;
                let lin = self.feedback.row_dot(j, &alpha)
                    + self.drift[j]
                    + self.coupling.row_dot(j, &beta);
                next[j] = a * rot.exp() + lin * dt;
            }
            std::mem::swap(&mut alpha, &mut next);
            for (j, a) in alpha.iter().enumerate() {
                let m = a.norm();
                if !m.is_finite() || m > limit {
                    return Err(SimError::Divergence {
                        t: t + dt,
                        resonator: self.sys.resonators[j].name.clone(),
                        value: m,
                    });
                }
            }
        }
        Ok(alpha)
    }

    /// Integrates trajectory `index` and records the selected traces.
    pub fn trajectory(&self, index: u64) -> Result<Trajectory, SimError> {
        let sys = self.sys;
        let rnames: Vec<&str> = sys.resonators.iter().map(|r| r.name.as_str()).collect();
        let onames: Vec<&str> = sys.outputs.iter().map(|s| s.as_str()).collect();
        let rsel = self.cfg.record_resonators.resolve(&rnames)?;
        let osel = self.cfg.record_outputs.resolve(&onames)?;
        let m = self.window;
        let n_rec = self.n_steps / m;
        let mut traj = Trajectory {
            times: Vec::with_capacity(n_rec),
            dt: self.dt,
            window_steps: m,
            resonator_names: rsel.iter().map(|&j| rnames[j].to_string()).collect(),
            resonators: vec![Vec::with_capacity(n_rec); rsel.len()],
            output_names: osel.iter().map(|&o| onames[o].to_string()).collect(),
            outputs: vec![Vec::with_capacity(n_rec); osel.len()],
            final_state: Vec::new(),
            seed: self.cfg.seed,
            index,
        };
        let nr = sys.n_resonators();
        let ni = sys.n_inputs();
        let need_all_alpha = !osel.is_empty();
        let mut sum_a = vec![C64::default(); nr];
        let mut sum_b = vec![C64::default(); if osel.is_empty() { 0 } else { ni }];
        let scale = 1.0 / m as f64;
        let fin = self.run(index, |v| {
            if need_all_alpha {
                for (s, a) in sum_a.iter_mut().zip(v.alpha) {
                    *s += a;
                }
                for (s, b) in sum_b.iter_mut().zip(v.inputs) {
                    *s += b;
                }
            } else {
                for &j in &rsel {
                    sum_a[j] += v.alpha[j];
                }
            }
            if (v.n + 1) % m == 0 {
                traj.times.push((v.n + 1 - m) as f64 * self.dt);
                for (k, &j) in rsel.iter().enumerate() {
                    traj.resonators[k].push(sum_a[j] * scale);
                }
                for (k, &o) in osel.iter().enumerate() {
                    let mut y = sys.output_offset[o];
                    for (j, s) in sum_a.iter().enumerate() {
                        y += sys.output_coupling[(o, j)] * s * scale;
                    }
                    for (i, s) in sum_b.iter().enumerate() {
                        y += sys.feedthrough[(o, i)] * s * scale;
                    }
                    traj.outputs[k].push(y);
                }
                sum_a.iter_mut().for_each(|z| *z = C64::default());
                sum_b.iter_mut().for_each(|z| *z = C64::default());
            }
        })?;
        traj.final_state = fin;
        Ok(traj)
    }
}

/// Recorded time series of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Start time of each recorded window.
    pub times: Vec<f64>,
    pub dt: f64,
    /// Steps averaged into each recorded sample.
    pub window_steps: usize,
    pub resonator_names: Vec<String>,
    /// `resonators[k][n]` is resonator `resonator_names[k]` at `times[n]`.
    pub resonators: Vec<Vec<C64>>,
    pub output_names: Vec<String>,
    pub outputs: Vec<Vec<C64>>,
    /// Unaveraged resonator state after the last step.
    pub final_state: Vec<C64>,
    pub seed: u64,
    pub index: u64,
}

impl Trajectory {
    pub fn resonator(&self, name: &str) -> Option<&[C64]> {
        let k = self.resonator_names.iter().position(|n| n == name)?;
        Some(&self.resonators[k])
    }

    pub fn output(&self, name: &str) -> Option<&[C64]> {
        let k = self.output_names.iter().position(|n| n == name)?;
        Some(&self.outputs[k])
    }

    /// Recorded sample index at or after time `t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.times.partition_point(|&x| x < t - 1e-12)
    }

    /// Mean of `series` over samples with `t0 <= t < t1`.
    pub fn mean_over(&self, series: &[C64], t0: f64, t1: f64) -> C64 {
        let (a, b) = (self.index_at(t0), self.index_at(t1));
        if b <= a {
            return C64::default();
        }
        series[a..b].iter().sum::<C64>() / (b - a) as f64
    }
}

/// Integrates trajectory 0 of the ensemble keyed by `cfg.seed`.
pub fn run_trajectory(
    sys: &ReducedSystem,
    drives: &DriveProgram,
    cfg: &SimConfig,
) -> Result<Trajectory, SimError> {
    Integrator::new(sys, drives, cfg)?.trajectory(0)
}

/// Runs `f(0..n)` on a pool of `workers` threads (0 means all cores) and
/// returns the results in index order.
pub fn par_map<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if workers == 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        Err(_) => (0..n).map(f).collect(),
    }
}

/// Integrates trajectories `0..n` in parallel. Trajectory `k` is identical
/// whatever the worker count, and trajectory 0 equals [`run_trajectory`].
pub fn run_ensemble(
    sys: &ReducedSystem,
    drives: &DriveProgram,
    cfg: &SimConfig,
    n: usize,
    workers: usize,
) -> Result<Vec<Result<Trajectory, SimError>>, SimError> {
    let integ = Integrator::new(sys, drives, cfg)?;
    Ok(par_map(n, workers, |k| integ.trajectory(k as u64)))
}

impl ReducedSystem {
    /// Output `o` for resonator state `alpha` and input amplitudes `beta`.
    pub fn output_value(&self, o: usize, alpha: &[C64], beta: &[C64]) -> C64 {
        let mut y = self.output_offset[o];
        for (j, a) in alpha.iter().enumerate() {
            y += self.output_coupling[(o, j)] * a;
        }
        for (i, b) in beta.iter().enumerate() {
            y += self.feedthrough[(o, i)] * b;
        }
        y
    }
}
