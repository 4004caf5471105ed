//! Structural properties of netlists and their reduction on random circuits.

use std::fmt::Write as _;

use kerrsim::analysis::{FieldHistogram, GridSpec};
use kerrsim::netlist::{check_circuit, flatten, parse_netlist, FlatCircuit};
use kerrsim::reduction::{backprop_reduce, reduce, ReducedSystem};
use kerrsim::C64;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, PartialEq)]
enum Mix {
    /// Beam splitters and phase shifters only.
    Passive,
    /// Any primitive, with resonators.
    Full,
}

/// Netlist text of a random circuit of `n` primitives. Every input port is
/// fed by vacuum, a fresh signal input or an unused output of an earlier
/// component; every output left over becomes an external output. Entry
/// lines come out in a random order.
fn random_circuit(seed: u64, n: usize, mix: Mix) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    let mut free: Vec<String> = Vec::new();
    let mut signals = 0;
    for i in 0..n {
        let kind = match mix {
            Mix::Passive => rng.random_range(0..2),
            Mix::Full => rng.random_range(0..4),
        };
        let (params, ports) = match kind {
            0 => (format!("beamsplitter theta={:?}", rng.random_range(0.0..1.5)), 2),
            1 => (format!("phase phi={:?}", rng.random_range(-3.0..3.0)), 1),
            2 => (
                format!("displacement beta={:?},{:?}", rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
                1,
            ),
            _ => {
                let k = rng.random_range(1..=3);
                let kappa: Vec<String> = (0..k).map(|_| format!("{:?}", rng.random_range(0.5..20.0))).collect();
                (
                    format!(
                        "resonator delta={:?} chi={:?} kappa={}",
                        rng.random_range(-30.0..30.0),
                        rng.random_range(-1.0..0.0),
                        kappa.join(",")
                    ),
                    k,
                )
            }
        };
        let mut srcs = Vec::new();
        for _ in 0..ports {
            let roll: f64 = rng.random();
            if roll < 0.5 && !free.is_empty() {
                let j = rng.random_range(0..free.len());
                srcs.push(free.swap_remove(j));
            } else if roll < 0.75 {
                srcs.push(format!("input:u{signals}"));
                signals += 1;
            } else {
                srcs.push("vacuum".into());
            }
        }
        lines.push(format!("comp c{i} {params} in={}", srcs.join(",")));
        free.extend((0..ports).map(|p| format!("c{i}.{p}")));
    }
    lines.shuffle(&mut rng);
    free.sort();
    let mut text = lines.join("\n");
    text.push('\n');
    for (k, f) in free.iter().enumerate() {
        let _ = writeln!(text, "output o{k} from {f}");
    }
    text
}

fn flat(text: &str) -> FlatCircuit {
    flatten(&parse_netlist(text).unwrap()).unwrap()
}

/// `m` with rows and columns reordered so that entry `(i, j)` of the result
/// is entry `(rows[i], cols[j])` of `m`.
fn pick(m: &DMatrix<C64>, rows: &[usize], cols: &[usize]) -> DMatrix<C64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Difference between two reductions of the same circuit whose resonators,
/// inputs and outputs may be listed in different orders.
fn aligned_diff(a: &ReducedSystem, b: &ReducedSystem) -> f64 {
    let r: Vec<usize> = a.resonators.iter().map(|x| b.resonator_index(&x.name).unwrap()).collect();
    let i: Vec<usize> = a.inputs.iter().map(|x| b.input_index(&x.name).unwrap()).collect();
    let o: Vec<usize> = a.outputs.iter().map(|x| b.output_index(x).unwrap()).collect();
    let mut bb = b.clone();
    bb.feedback = pick(&b.feedback, &r, &r);
    bb.drift = nalgebra::DVector::from_fn(r.len(), |k, _| b.drift[r[k]]);
    bb.input_coupling = pick(&b.input_coupling, &r, &i);
    bb.output_coupling = pick(&b.output_coupling, &o, &r);
    bb.output_offset = nalgebra::DVector::from_fn(o.len(), |k, _| b.output_offset[o[k]]);
    bb.feedthrough = pick(&b.feedthrough, &o, &i);
    a.max_abs_diff(&bb)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn text_round_trip(seed in any::<u64>(), n in 1usize..12) {
        let mut net = parse_netlist(&random_circuit(seed, n, Mix::Full)).unwrap();
        let mut again = parse_netlist(&net.to_text()).unwrap();
        // source line numbers are the only thing allowed to differ
        for e in net.entries.iter_mut().chain(again.entries.iter_mut()) {
            e.line = 0;
        }
        prop_assert_eq!(again, net);
    }

    #[test]
    fn flatten_is_idempotent(seed in any::<u64>(), n in 1usize..12) {
        let f = flat(&random_circuit(seed, n, Mix::Full));
        prop_assert_eq!(flatten(&f.to_netlist()).unwrap(), f.clone());
        prop_assert_eq!(flat(&f.to_netlist().to_text()), f);
    }

    #[test]
    fn nested_counts_multiply(bs in 0usize..4, ps in 0usize..4, res in 1usize..4, inner in 1usize..4, outer in 1usize..4) {
        let mut text = String::from("compound blk {\n");
        for k in 0..bs {
            let _ = writeln!(text, "  comp b{k} beamsplitter theta=0.3");
        }
        for k in 0..ps {
            let _ = writeln!(text, "  comp p{k} phase phi=0.1");
        }
        for k in 0..res {
            let _ = writeln!(text, "  comp r{k} resonator delta=1 chi=-0.1 kappa=1,2");
        }
        text.push_str("} ports\ncompound mid {\n");
        for k in 0..inner {
            let _ = writeln!(text, "  comp m{k} blk");
        }
        text.push_str("} ports\n");
        for k in 0..outer {
            let _ = writeln!(text, "comp t{k} mid");
        }
        let report = check_circuit(&flat(&text));
        let copies = inner * outer;
        prop_assert_eq!(report.components.beamsplitters, bs * copies);
        prop_assert_eq!(report.components.phase_shifters, ps * copies);
        prop_assert_eq!(report.components.resonators, res * copies);
        prop_assert_eq!(report.inputs.vacuum, (2 * bs + ps + 2 * res) * copies);
    }

    #[test]
    fn passive_networks_are_unitary(seed in any::<u64>(), n in 1usize..16) {
        let sys = reduce(&flat(&random_circuit(seed, n, Mix::Passive))).unwrap();
        let d = &sys.feedthrough;
        prop_assert_eq!(d.nrows(), d.ncols());
        let err = (d.adjoint() * d - DMatrix::<C64>::identity(d.ncols(), d.ncols())).norm();
        prop_assert!(err < 1e-12, "‖D†D − I‖ = {err:e}");
    }

    #[test]
    fn elimination_matches_back_propagation(seed in any::<u64>(), n in 1usize..14) {
        let f = flat(&random_circuit(seed, n, Mix::Full));
        let a = reduce(&f).unwrap();
        let b = backprop_reduce(&f).unwrap();
        prop_assert!(a.max_abs_diff(&b) < 1e-10, "{:e}", a.max_abs_diff(&b));
    }

    #[test]
    fn elimination_order_is_irrelevant(seed in any::<u64>(), n in 1usize..14, shuffle in any::<u64>()) {
        let text = random_circuit(seed, n, Mix::Full);
        let mut lines: Vec<&str> = text.lines().collect();
        lines.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle));
        let a = reduce(&flat(&text)).unwrap();
        let b = reduce(&flat(&lines.join("\n"))).unwrap();
        prop_assert!(aligned_diff(&a, &b) < 1e-12, "{:e}", aligned_diff(&a, &b));
    }

    #[test]
    fn histogram_conserves_mass(pts in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 0..500), bins in 1usize..20) {
        let mut h = FieldHistogram::new(GridSpec::square(C64::default(), 2.0, bins)).unwrap();
        h.extend(pts.iter().map(|&(re, im)| C64::new(re, im)));
        prop_assert_eq!(h.counts.iter().sum::<u64>() + h.overflow, pts.len() as u64);
        prop_assert_eq!(h.total(), pts.len() as u64);
    }
}

#[test]
fn generator_covers_every_kind() {
    let text: String = (0..20).map(|s| random_circuit(s, 10, Mix::Full)).collect();
    for kind in ["beamsplitter", "phase", "displacement", "resonator", "input:", "vacuum", "output"] {
        assert!(text.contains(kind), "{kind}");
    }
}
