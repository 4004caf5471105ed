//! Physical invariants of the engine and the standard cells.

use kerrsim::analysis::{latch_jump_statistics, magnitudes, LatchRateConfig};
use kerrsim::cells::{
    classical_response, latch_schedule, reduce_cell, CellKind, CellSpec, LatchPhase,
};
use kerrsim::netlist::{flatten, parse_netlist};
use kerrsim::reduction::{reduce, reduce_with_probes};
use kerrsim::sde::{run_trajectory, DriveProgram, Integrator, NoiseSource, Selection, SimConfig, Waveform};
use kerrsim::{build_cell, C64};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn pwc(points: &[(f64, f64)]) -> Waveform {
    Waveform::PiecewiseConstant(points.iter().map(|&(t, v)| (t, c(v))).collect())
}

fn system(text: &str) -> kerrsim::ReducedSystem {
    reduce(&flatten(&parse_netlist(text).unwrap()).unwrap()).unwrap()
}

#[test]
fn noise_variance_is_quarter_over_dt() {
    let dt: f64 = 5e-4;
    let mut src = NoiseSource::new(3, 0, 1, 0.5 / dt.sqrt());
    let n = 1_000_000;
    let (mut re, mut im) = (0.0, 0.0);
    for _ in 0..n {
        let mut z = [C64::default()];
        src.add_to(&mut z);
        re += z[0].re * z[0].re;
        im += z[0].im * z[0].im;
    }
    let want = 0.25 / dt;
    assert!((re / n as f64 / want - 1.0).abs() < 0.01);
    assert!((im / n as f64 / want - 1.0).abs() < 0.01);
}

#[test]
fn noiseless_steady_state_solves_the_classical_balance() {
    // non-bistable Kerr resonator; the exponential step's fixed point is
    // off by about |L|δt/2, so the step is taken small
    let (delta, chi, k1, k2) = (5.0, -0.1, 4.0, 6.0);
    let sys = system(&format!("comp r resonator delta={delta} chi={chi} kappa={k1},{k2} in=input:a,vacuum\noutput y from r.1\noutput z from r.0\n"));
    let beta = c(6.0);
    let drives = DriveProgram::new().with("a", Waveform::Constant(beta));
    let cfg = SimConfig::new(4.0).noiseless().dt(5e-8);
    let alpha = Integrator::new(&sys, &drives, &cfg).unwrap().run(0, |_| {}).unwrap();
    let n = alpha[0].norm_sqr();
    let roots = classical_response(delta, chi, k1 + k2, k1, beta);
    assert_eq!(roots.len(), 1);
    assert!((n / roots[0] - 1.0).abs() < 1e-6, "{n} vs {}", roots[0]);
}

#[test]
fn linear_networks_superpose() {
    let text = "\
comp r1 resonator delta=3 chi=0 kappa=4,2 in=input:a,vacuum
comp bs beamsplitter theta=0.4 in=r1.1,input:b
comp d displacement beta=1,-2 in=bs.0
comp r2 resonator delta=-2 chi=0 kappa=5 in=d.0
output y from r2.0
output z from bs.1
output w from r1.0
";
    let sys = system(text);
    let cfg = SimConfig::new(10.0).noiseless().dt(1e-3);
    let out = |a: f64, b: f64| {
        let d = DriveProgram::new().with("a", Waveform::Constant(C64::new(a, 0.5 * a))).with("b", Waveform::Constant(c(b)));
        let tr = run_trajectory(&sys, &d, &cfg).unwrap();
        ["y", "z", "w"].map(|o| *tr.output(o).unwrap().last().unwrap())
    };
    let (zero, a, b, ab) = (out(0.0, 0.0), out(3.0, 0.0), out(0.0, -7.0), out(3.0, -7.0));
    for k in 0..3 {
        let lhs = ab[k] - zero[k];
        let rhs = (a[k] - zero[k]) + (b[k] - zero[k]);
        assert!((lhs - rhs).norm() < 1e-9 * lhs.norm().max(1.0), "{lhs} vs {rhs}");
    }
}

#[test]
fn vacuum_creates_no_photons() {
    let sys = system("comp r resonator delta=5 chi=0 kappa=4 in=vacuum\noutput y from r.0\n");
    let mut cfg = SimConfig::new(4000.0).seed(21);
    cfg.record_outputs = Selection::Nothing;
    let mut batches = Vec::new();
    let (mut acc, mut count) = (0.0, 0);
    let drives = DriveProgram::new();
    let integ = Integrator::new(&sys, &drives, &cfg).unwrap();
    // batches of 5 time units, ten decay times each
    let per = (5.0 / integ.dt()).round() as usize;
    integ
        .run(0, |v| {
            acc += v.alpha[0].norm_sqr() - 0.5;
            count += 1;
            if count == per {
                batches.push(acc / per as f64);
                acc = 0.0;
                count = 0;
            }
        })
        .unwrap();
    let m = batches.len() as f64;
    let mean = batches.iter().sum::<f64>() / m;
    let se = (batches.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt();
    assert!(mean.abs() < 3.0 * se, "normally ordered photon number {mean} ± {se}");
}

fn and_inputs(e: f64) -> DriveProgram {
    let states = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
    let a: Vec<(f64, f64)> = states.iter().enumerate().map(|(k, s)| (3.0 * k as f64, s.0 * e)).collect();
    let b: Vec<(f64, f64)> = states.iter().enumerate().map(|(k, s)| (3.0 * k as f64, s.1 * e)).collect();
    DriveProgram::new().with("a", pwc(&a)).with("b", pwc(&b))
}

#[test]
fn and_truth_table() {
    let e = 50.0;
    let sys = reduce_cell(&CellSpec::new(CellKind::AndGate)).unwrap();
    let tr = run_trajectory(&sys, &and_inputs(e), &SimConfig::new(12.0).noiseless()).unwrap();
    let y = magnitudes(tr.output("y").unwrap());
    for (k, high) in [false, false, false, true].into_iter().enumerate() {
        let v = y[tr.index_at(3.0 * k as f64 + 2.9)];
        if high {
            assert!(v > 0.65 * e, "state {k}: {v}");
        } else {
            assert!(v < 0.35 * e, "state {k}: {v}");
        }
    }
}

#[test]
fn fanout_inverts_into_both_copies() {
    let e = 50.0;
    let sys = reduce_cell(&CellSpec::new(CellKind::Fanout)).unwrap();
    let drives = DriveProgram::new().with("x", pwc(&[(0.0, 0.0), (3.0, e)]));
    let tr = run_trajectory(&sys, &drives, &SimConfig::new(6.0).noiseless()).unwrap();
    for o in ["y0", "y1"] {
        let y = magnitudes(tr.output(o).unwrap());
        let (high, low) = (y[tr.index_at(2.9)], y[tr.index_at(5.9)]);
        assert!((high / e - 1.0).abs() < 0.1, "{o} high {high}");
        assert!(low < 0.35 * e, "{o} low {low}");
    }
}

#[test]
fn latch_holds_and_reports_its_state() {
    let e = 50.0;
    let phases = [LatchPhase::Set, LatchPhase::Hold, LatchPhase::Reset, LatchPhase::Hold];
    let flat = flatten(&build_cell(&CellSpec::new(CellKind::Latch)).unwrap()).unwrap();
    let sys = reduce_with_probes(&flat, &["cell.r1.1".to_string()]).unwrap();
    let mut cfg = SimConfig::new(20.0).noiseless();
    cfg.record_resonators = Selection::Nothing;
    let tr = run_trajectory(&sys, &latch_schedule(e, 5.0, &phases), &cfg).unwrap();
    let q = magnitudes(tr.output("q").unwrap());
    let port = magnitudes(tr.output("cell.r1.1").unwrap());
    let at = |s: &[f64], k: usize| s[tr.index_at(5.0 * k as f64 + 4.9)];
    // set, then hold keeps q high; reset, then hold keeps it low
    assert!(at(&q, 0) > 0.65 * e && at(&q, 1) > 0.65 * e);
    assert!(at(&q, 2) < 0.35 * e && at(&q, 3) < 0.35 * e);
    // resonator 1 leaks ≈ 3, 18 and 55 through its second port in the
    // set, held-high and reset states
    for (k, want) in [(0, 3.0), (1, 18.0), (2, 55.0)] {
        let got = at(&port, k);
        assert!((got / want - 1.0).abs() < 0.15, "phase {k}: {got} vs {want}");
    }
}

/// Noise-free outputs of `kind` at amplitude `e` with drives scaled to it.
fn scaled_run(kind: CellKind, e: f64, drives: &dyn Fn(f64) -> DriveProgram, t: f64, out: &str) -> Vec<C64> {
    let sys = reduce_cell(&CellSpec::new(kind).e_high(e)).unwrap();
    let tr = run_trajectory(&sys, &drives(e), &SimConfig::new(t).noiseless()).unwrap();
    tr.output(out).unwrap().to_vec()
}

#[test]
fn gate_dynamics_scale_with_amplitude() {
    let phases = [LatchPhase::Set, LatchPhase::Hold, LatchPhase::Reset, LatchPhase::Hold];
    let cases: [(CellKind, Box<dyn Fn(f64) -> DriveProgram>, &str); 3] = [
        (CellKind::AndGate, Box::new(and_inputs), "y"),
        (CellKind::Fanout, Box::new(|e| DriveProgram::new().with("x", pwc(&[(0.0, 0.0), (2.0, e), (5.0, 0.3 * e)]))), "y1"),
        (CellKind::Latch, Box::new(move |e| latch_schedule(e, 3.0, &phases)), "q"),
    ];
    for (kind, drives, out) in &cases {
        let a = scaled_run(*kind, 50.0, drives.as_ref(), 12.0, out);
        let b = scaled_run(*kind, 20.0, drives.as_ref(), 12.0, out);
        let worst = a.iter().zip(&b).map(|(x, y)| (x * 0.4 - y).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-9 * 20.0, "{kind:?}: {worst:e}");
    }
}

#[test]
fn latch_rate_is_step_size_independent() {
    let run = |dt: f64| {
        let mut cfg = LatchRateConfig::new(18.0, 3000.0, 41);
        cfg.dt = Some(dt);
        latch_jump_statistics(&cfg).unwrap()
    };
    let (a, b) = (run(5e-4), run(2.5e-4));
    let diff = (a.rate() - b.rate()).abs();
    let bar = (a.rate_error().powi(2) + b.rate_error().powi(2)).sqrt();
    assert!(a.stats.n_up + a.stats.n_down > 100);
    assert!(diff < 2.0 * bar, "{} ± {} vs {} ± {}", a.rate(), a.rate_error(), b.rate(), b.rate_error());
}

/// Phase spread of the last resonator of a four-stage chain with constant
/// input 10, after settling.
fn last_stage_phase_spread(inverting: bool) -> f64 {
    let sys = reduce_cell(&CellSpec::new(CellKind::AmplifierChain { stages: 4, inverting })).unwrap();
    let drives = DriveProgram::new().with("x", Waveform::Constant(c(10.0)));
    let mut cfg = SimConfig::new(40.0).seed(1);
    cfg.record_outputs = Selection::Nothing;
    cfg.record_resonators = Selection::Names(vec!["cell.s3.r".into()]);
    let tr = run_trajectory(&sys, &drives, &cfg).unwrap();
    let z = &tr.resonators[0][tr.index_at(5.0)..];
    let mean = z.iter().sum::<C64>() / z.len() as f64;
    let ph: Vec<f64> = z.iter().map(|w| (w / mean).arg()).collect();
    let m = ph.iter().sum::<f64>() / ph.len() as f64;
    (ph.iter().map(|p| (p - m).powi(2)).sum::<f64>() / ph.len() as f64).sqrt()
}

#[test]
fn non_inverting_chain_has_more_phase_noise() {
    let ratio = last_stage_phase_spread(false) / last_stage_phase_spread(true);
    assert!((ratio - 1.53).abs() <= 0.20, "ratio {ratio}");
}
