//! Compiles a flat circuit into the matrices of one stochastic system.
//!
//! Every primitive contributes a block `(A, a, B, C, c, D)` with resonator
//! dynamics `dα/dt = Aα + a + Bβ_in` (plus the Kerr term) and outputs
//! `β_out = Cα + c + Dβ_in`. The blocks are concatenated and every internal
//! connection is eliminated by solving the static feedthrough loop.

mod backprop;
mod text;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::netlist::{
    check_circuit, ComponentKind, Consumer, FlatCircuit, InputKind, PortAddr, Primitive, Producer,
};
use crate::C64;

pub use backprop::backprop_reduce;
pub use text::ParseReducedError;

/// Largest accepted condition number of the internal feedthrough system.
pub const MAX_CONDITION: f64 = 1e12;

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReductionError {
    #[error("compound `{0}` must be flattened first")]
    NotPrimitive(String),
    #[error("circuit is not simulable: {0}")]
    InvalidCircuit(String),
    #[error("internal feedthrough system is ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),
    #[error("port partition is inconsistent: {0}")]
    BadPartition(String),
    #[error("static loop through {0} has no resonator to break it")]
    StaticLoop(String),
    #[error("no component output port `{0}` to probe")]
    UnknownProbe(String),
}

/// Nonlinear data of one resonator mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KerrMode {
    pub detuning: f64,
    /// Total decay rate.
    pub decay: f64,
    pub kerr: f64,
}

impl KerrMode {
    /// Linear diagonal term `-iΔ - κ/2`.
    pub fn bare(&self) -> C64 {
        C64::new(-0.5 * self.decay, -self.detuning)
    }
}

/// Linear block of one or more components.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentBlock {
    pub a: DMatrix<C64>,
    pub a_vec: DVector<C64>,
    pub b: DMatrix<C64>,
    pub c: DMatrix<C64>,
    pub c_vec: DVector<C64>,
    pub d: DMatrix<C64>,
    pub modes: Vec<KerrMode>,
}

impl ComponentBlock {
    fn empty(n_res: usize, n_in: usize, n_out: usize) -> Self {
        ComponentBlock {
            a: DMatrix::zeros(n_res, n_res),
            a_vec: DVector::zeros(n_res),
            b: DMatrix::zeros(n_res, n_in),
            c: DMatrix::zeros(n_out, n_res),
            c_vec: DVector::zeros(n_out),
            d: DMatrix::zeros(n_out, n_in),
            modes: Vec::new(),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.d.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.d.nrows()
    }

    pub fn from_primitive(p: &Primitive) -> Self {
        match p {
            Primitive::Resonator(r) => {
                let n = r.ports();
                let mut blk = ComponentBlock::empty(1, n, n);
                let mode = KerrMode {
                    detuning: r.detuning,
                    decay: r.total_decay(),
                    kerr: r.kerr,
                };
                blk.a[(0, 0)] = mode.bare();
                for (k, c) in r.couplings.iter().enumerate() {
                    let s = c.rate.sqrt();
                    blk.b[(0, k)] = -s * (-I * c.phase).exp();
                    blk.c[(k, 0)] = s * (I * c.phase).exp();
                    blk.d[(k, k)] = C64::new(1.0, 0.0);
                }
                blk.modes.push(mode);
                blk
            }
            Primitive::BeamSplitter { theta } => {
                let mut blk = ComponentBlock::empty(0, 2, 2);
                let (s, c) = theta.sin_cos();
                blk.d[(0, 0)] = C64::new(c, 0.0);
                blk.d[(0, 1)] = C64::new(-s, 0.0);
                blk.d[(1, 0)] = C64::new(s, 0.0);
                blk.d[(1, 1)] = C64::new(c, 0.0);
                blk
            }
            Primitive::PhaseShifter { phi } => {
                let mut blk = ComponentBlock::empty(0, 1, 1);
                blk.d[(0, 0)] = (I * *phi).exp();
                blk
            }
            Primitive::Displacement { beta } => {
                let mut blk = ComponentBlock::empty(0, 1, 1);
                blk.d[(0, 0)] = C64::new(1.0, 0.0);
                blk.c_vec[0] = *beta;
                blk
            }
            Primitive::Identity => {
                let mut blk = ComponentBlock::empty(0, 1, 1);
                blk.d[(0, 0)] = C64::new(1.0, 0.0);
                blk
            }
        }
    }

    /// Block of a primitive component kind. External inputs and outputs are
    /// represented as identity pass-throughs.
    pub fn from_kind(kind: &ComponentKind) -> Result<Self, ReductionError> {
        match kind {
            ComponentKind::Compound(name) => Err(ReductionError::NotPrimitive(name.clone())),
            ComponentKind::Input(_) | ComponentKind::Output => {
                Ok(Self::from_primitive(&Primitive::Identity))
            }
            k => Ok(Self::from_primitive(&k.as_primitive().expect("primitive kind"))),
        }
    }
}

/// Block-diagonal combination; modes, inputs and outputs keep their order.
pub fn concatenate(blocks: &[ComponentBlock]) -> ComponentBlock {
    let nr: usize = blocks.iter().map(|b| b.n_modes()).sum();
    let ni: usize = blocks.iter().map(|b| b.n_inputs()).sum();
    let no: usize = blocks.iter().map(|b| b.n_outputs()).sum();
    let mut out = ComponentBlock::empty(nr, ni, no);
    let (mut r, mut i, mut o) = (0, 0, 0);
    for b in blocks {
        let (br, bi, bo) = (b.n_modes(), b.n_inputs(), b.n_outputs());
        out.a.view_mut((r, r), (br, br)).copy_from(&b.a);
        out.a_vec.rows_mut(r, br).copy_from(&b.a_vec);
        out.b.view_mut((r, i), (br, bi)).copy_from(&b.b);
        out.c.view_mut((o, r), (bo, br)).copy_from(&b.c);
        out.c_vec.rows_mut(o, bo).copy_from(&b.c_vec);
        out.d.view_mut((o, i), (bo, bi)).copy_from(&b.d);
        out.modes.extend_from_slice(&b.modes);
        r += br;
        i += bi;
        o += bo;
    }
    out
}

/// Assignment of the ports of a concatenated block.
///
/// Each input port is either external or the receiving end of exactly one
/// internal connection. Output ports that are neither external nor internal
/// are discarded.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PortPartition {
    pub external_inputs: Vec<usize>,
    pub external_outputs: Vec<usize>,
    /// `(output port, input port)` pairs joined by a wire.
    pub internal: Vec<(usize, usize)>,
    /// Output ports whose signal is reported after the external outputs.
    /// They may also appear in `internal` or `external_outputs`.
    pub probes: Vec<usize>,
}

fn select(m: &DMatrix<C64>, rows: &[usize], cols: &[usize]) -> DMatrix<C64> {
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| m[(rows[r], cols[c])])
}

fn select_rows_vec(v: &DVector<C64>, rows: &[usize]) -> DVector<C64> {
    DVector::from_fn(rows.len(), |r, _| v[rows[r]])
}

fn norm1(m: &DMatrix<C64>) -> f64 {
    (0..m.ncols())
        .map(|c| m.column(c).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Removes every internal connection, returning the block seen from the
/// external ports. The full `A` keeps the bare resonator diagonal.
pub fn eliminate_internal(
    blk: &ComponentBlock,
    part: &PortPartition,
) -> Result<ComponentBlock, ReductionError> {
    let ni = blk.n_inputs();
    let no = blk.n_outputs();
    let mut in_seen = vec![false; ni];
    let mut out_seen = vec![false; no];
    let ins = part
        .external_inputs
        .iter()
        .copied()
        .chain(part.internal.iter().map(|&(_, i)| i));
    for i in ins {
        if i >= ni || std::mem::replace(&mut in_seen[i], true) {
            return Err(ReductionError::BadPartition(format!("input port {i} assigned twice or out of range")));
        }
    }
    if let Some(i) = in_seen.iter().position(|s| !s) {
        return Err(ReductionError::BadPartition(format!("input port {i} is unassigned")));
    }
    let outs = part
        .external_outputs
        .iter()
        .copied()
        .chain(part.internal.iter().map(|&(o, _)| o));
    for o in outs {
        if o >= no || std::mem::replace(&mut out_seen[o], true) {
            return Err(ReductionError::BadPartition(format!("output port {o} assigned twice or out of range")));
        }
    }
    if let Some(o) = part.probes.iter().find(|&&o| o >= no) {
        return Err(ReductionError::BadPartition(format!("probe port {o} out of range")));
    }

    let ii: Vec<usize> = part.internal.iter().map(|&(_, i)| i).collect();
    let oi: Vec<usize> = part.internal.iter().map(|&(o, _)| o).collect();
    let ei = &part.external_inputs;
    let eo: &Vec<usize> = &part.external_outputs.iter().chain(&part.probes).copied().collect();
    let nr = blk.n_modes();
    let all_r: Vec<usize> = (0..nr).collect();

    let b_e = select(&blk.b, &all_r, ei);
    let c_e = select(&blk.c, eo, &all_r);
    let c_vec_e = select_rows_vec(&blk.c_vec, eo);
    let d_ee = select(&blk.d, eo, ei);

    if ii.is_empty() {
        return Ok(ComponentBlock {
            a: blk.a.clone(),
            a_vec: blk.a_vec.clone(),
            b: b_e,
            c: c_e,
            c_vec: c_vec_e,
            d: d_ee,
            modes: blk.modes.clone(),
        });
    }

    let n = ii.len();
    let d_ii = select(&blk.d, &oi, &ii);
    let lhs = DMatrix::<C64>::identity(n, n) - &d_ii;
    let inv = lhs
        .clone()
        .try_inverse()
        .ok_or(ReductionError::IllConditioned(f64::INFINITY))?;
    let cond = norm1(&lhs) * norm1(&inv);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(ReductionError::IllConditioned(cond));
    }

    let b_i = select(&blk.b, &all_r, &ii);
    let c_i = select(&blk.c, &oi, &all_r);
    let c_vec_i = select_rows_vec(&blk.c_vec, &oi);
    let d_ie = select(&blk.d, &oi, ei);
    let d_ei = select(&blk.d, eo, &ii);

    let bm = &b_i * &inv;
    let dm = &d_ei * &inv;
    Ok(ComponentBlock {
        a: &blk.a + &bm * &c_i,
        a_vec: &blk.a_vec + &bm * &c_vec_i,
        b: b_e + &bm * &d_ie,
        c: c_e + &dm * &c_i,
        c_vec: c_vec_e + &dm * &c_vec_i,
        d: d_ee + &dm * &d_ie,
        modes: blk.modes.clone(),
    })
}

/// Resonator of a reduced system.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonatorInfo {
    pub name: String,
    pub mode: KerrMode,
}

/// External input of a reduced system.
#[derive(Debug, Clone, PartialEq)]
pub struct InputInfo {
    pub name: String,
    pub kind: InputKind,
}

/// Linear-plus-Kerr system for a whole circuit.
///
/// `feedback` excludes the bare diagonal `-iΔ_j - κ_j/2` of each resonator,
/// which the integrator treats exactly together with the Kerr term.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    pub feedback: DMatrix<C64>,
    pub drift: DVector<C64>,
    pub input_coupling: DMatrix<C64>,
    pub output_coupling: DMatrix<C64>,
    pub output_offset: DVector<C64>,
    pub feedthrough: DMatrix<C64>,
    pub resonators: Vec<ResonatorInfo>,
    pub inputs: Vec<InputInfo>,
    pub outputs: Vec<String>,
}

impl ReducedSystem {
    pub fn n_resonators(&self) -> usize {
        self.resonators.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn resonator_index(&self, name: &str) -> Option<usize> {
        self.resonators.iter().position(|r| r.name == name)
    }

    pub fn input_index(&self, name: &str) -> Option<usize> {
        self.inputs.iter().position(|r| r.name == name)
    }

    pub fn output_index(&self, name: &str) -> Option<usize> {
        self.outputs.iter().position(|r| r == name)
    }

    /// Full linear matrix including the bare diagonal.
    pub fn full_a(&self) -> DMatrix<C64> {
        let mut a = self.feedback.clone();
        for (j, r) in self.resonators.iter().enumerate() {
            a[(j, j)] += r.mode.bare();
        }
        a
    }

    /// Largest `|Δ_j|` or `κ_j` over all resonators.
    pub fn fastest_rate(&self) -> f64 {
        self.resonators
            .iter()
            .map(|r| r.mode.detuning.abs().max(r.mode.decay))
            .fold(0.0, f64::max)
    }

    /// Largest absolute difference between any pair of matching entries.
    pub fn max_abs_diff(&self, other: &ReducedSystem) -> f64 {
        fn md(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
            if a.shape() != b.shape() {
                return f64::INFINITY;
            }
            a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
        }
        fn mv(a: &DVector<C64>, b: &DVector<C64>) -> f64 {
            if a.len() != b.len() {
                return f64::INFINITY;
            }
            a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
        }
        [
            md(&self.feedback, &other.feedback),
            mv(&self.drift, &other.drift),
            md(&self.input_coupling, &other.input_coupling),
            md(&self.output_coupling, &other.output_coupling),
            mv(&self.output_offset, &other.output_offset),
            md(&self.feedthrough, &other.feedthrough),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    fn from_block(blk: ComponentBlock, flat: &FlatCircuit, probes: &[String]) -> Self {
        let names: Vec<String> = flat
            .components
            .iter()
            .filter(|c| matches!(c.kind, Primitive::Resonator(_)))
            .map(|c| c.name.clone())
            .collect();
        let mut feedback = blk.a;
        for (j, m) in blk.modes.iter().enumerate() {
            feedback[(j, j)] -= m.bare();
        }
        ReducedSystem {
            feedback,
            drift: blk.a_vec,
            input_coupling: blk.b,
            output_coupling: blk.c,
            output_offset: blk.c_vec,
            feedthrough: blk.d,
            resonators: names
                .into_iter()
                .zip(blk.modes)
                .map(|(name, mode)| ResonatorInfo { name, mode })
                .collect(),
            inputs: flat
                .inputs
                .iter()
                .map(|i| InputInfo {
                    name: i.name.clone(),
                    kind: i.kind.clone(),
                })
                .collect(),
            outputs: flat
                .outputs
                .iter()
                .map(|o| o.name.clone())
                .chain(probes.iter().cloned())
                .collect(),
        }
    }
}

/// Compiles a flat circuit by block concatenation and elimination.
///
/// Resonators keep the order they have among the components; inputs and
/// outputs keep the order of the flat circuit.
pub fn reduce(flat: &FlatCircuit) -> Result<ReducedSystem, ReductionError> {
    reduce_with_probes(flat, &[])
}

/// Like [`reduce`], with extra outputs reporting the signal leaving
/// component ports named `component.port`. The probe outputs follow the
/// circuit outputs and carry the probe names.
pub fn reduce_with_probes(flat: &FlatCircuit, probes: &[String]) -> Result<ReducedSystem, ReductionError> {
    let report = check_circuit(flat);
    if let Some(v) = report.violations.first() {
        return Err(ReductionError::InvalidCircuit(v.to_string()));
    }
    let mut blocks: Vec<ComponentBlock> =
        flat.components.iter().map(|c| ComponentBlock::from_primitive(&c.kind)).collect();
    let mut in_off = Vec::with_capacity(blocks.len());
    let mut out_off = Vec::with_capacity(blocks.len());
    let (mut ni, mut no) = (0, 0);
    for b in &blocks {
        in_off.push(ni);
        out_off.push(no);
        ni += b.n_inputs();
        no += b.n_outputs();
    }
    // Inputs wired straight to outputs pass through an identity block.
    let mut ext_in = vec![usize::MAX; flat.inputs.len()];
    let mut ext_out = vec![usize::MAX; flat.outputs.len()];
    let mut internal = Vec::new();
    for &(p, c) in &flat.links {
        match (p, c) {
            (Producer::Input(i), Consumer::Output(o)) => {
                blocks.push(ComponentBlock::from_primitive(&Primitive::Identity));
                ext_in[i] = ni;
                ext_out[o] = no;
                ni += 1;
                no += 1;
            }
            (Producer::Input(i), Consumer::Component(PortAddr { component, port })) => {
                ext_in[i] = in_off[component] + port;
            }
            (Producer::Component(a), Consumer::Output(o)) => {
                ext_out[o] = out_off[a.component] + a.port;
            }
            (Producer::Component(a), Consumer::Component(b)) => {
                internal.push((out_off[a.component] + a.port, in_off[b.component] + b.port));
            }
        }
    }
    let probe_ports = probes
        .iter()
        .map(|name| {
            let (comp, port) = name
                .rsplit_once('.')
                .ok_or_else(|| ReductionError::UnknownProbe(name.clone()))?;
            let c = flat
                .component_index(comp)
                .ok_or_else(|| ReductionError::UnknownProbe(name.clone()))?;
            match port.parse::<usize>() {
                Ok(k) if k < blocks[c].n_outputs() => Ok(out_off[c] + k),
                _ => Err(ReductionError::UnknownProbe(name.clone())),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let part = PortPartition {
        external_inputs: ext_in,
        external_outputs: ext_out,
        internal,
        probes: probe_ports,
    };
    let blk = eliminate_internal(&concatenate(&blocks), &part)?;
    Ok(ReducedSystem::from_block(blk, flat, probes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{flatten, parse_netlist, ResonatorParams};
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn resonator_block_entries() {
        let blk = ComponentBlock::from_primitive(&Primitive::Resonator(ResonatorParams::new(
            3.0,
            -0.5,
            &[4.0, 9.0],
        )));
        assert_relative_eq!(blk.a[(0, 0)].re, -6.5);
        assert_relative_eq!(blk.a[(0, 0)].im, -3.0);
        // default phase: B = -i sqrt(k), C = -i sqrt(k)
        assert!((blk.b[(0, 1)] - c(0.0, -3.0)).norm() < 1e-14);
        assert!((blk.c[(0, 0)] - c(0.0, -2.0)).norm() < 1e-14);
        assert_eq!(blk.d, DMatrix::identity(2, 2));
    }

    #[test]
    fn static_blocks() {
        let bs = ComponentBlock::from_primitive(&Primitive::BeamSplitter { theta: 0.3 });
        assert_relative_eq!(bs.d[(0, 1)].re, -(0.3f64).sin());
        assert_relative_eq!(bs.d[(1, 0)].re, (0.3f64).sin());
        let ps = ComponentBlock::from_primitive(&Primitive::PhaseShifter { phi: 1.0 });
        assert!((ps.d[(0, 0)] - (I * 1.0).exp()).norm() < 1e-15);
        let dp = ComponentBlock::from_primitive(&Primitive::Displacement { beta: c(2.0, 1.0) });
        assert_eq!(dp.c_vec[0], c(2.0, 1.0));
        assert!(ComponentBlock::from_kind(&ComponentKind::Compound("x".into())).is_err());
    }

    #[test]
    fn chain_of_statics_composes() {
        let text = "\
comp d displacement beta=1,0 in=input:a
comp p phase phi=0.5 in=d.0
comp b beamsplitter theta=0.25 in=p.0,vacuum
comp s output in=b.1
output y from b.0
";
        let sys = reduce(&flatten(&parse_netlist(text).unwrap()).unwrap()).unwrap();
        let e = (I * 0.5).exp();
        let expect = e * (0.25f64).cos();
        assert!((sys.feedthrough[(1, 0)] - expect).norm() < 1e-14);
        assert!((sys.output_offset[1] - expect).norm() < 1e-14);
        assert!((sys.feedthrough[(1, 1)] - c(-(0.25f64).sin(), 0.0)).norm() < 1e-14);
        assert_eq!(sys.n_resonators(), 0);
    }

    #[test]
    fn resonator_feedback_through_phase() {
        // output port 1 of the resonator fed back into port 0 via a phase
        let text = "\
comp r resonator delta=2 chi=-1 kappa=1,4 in=p.0,input:a
comp p phase phi=0.7 in=r.1
comp s output in=r.0
";
        let sys = reduce(&flatten(&parse_netlist(text).unwrap()).unwrap()).unwrap();
        let b0 = c(0.0, -1.0);
        let c1 = c(0.0, -2.0);
        let ph = (I * 0.7).exp();
        assert!((sys.feedback[(0, 0)] - b0 * ph * c1).norm() < 1e-13);
        // input a enters port 1 directly and via reflection into port 0
        let b1 = c(0.0, -2.0);
        assert!((sys.input_coupling[(0, 0)] - (b1 + b0 * ph)).norm() < 1e-13);
    }

    #[test]
    fn ill_conditioned_loop_rejected() {
        let text = "\
comp p phase phi=0 in=q.0
comp q identity in=p.0
";
        let flat = flatten(&parse_netlist(text).unwrap()).unwrap();
        assert!(matches!(reduce(&flat), Err(ReductionError::IllConditioned(_))));
    }

    #[test]
    fn passthrough_input() {
        let flat = flatten(&parse_netlist("output y from a.0\ncomp a input amp=3\n").unwrap()).unwrap();
        let sys = reduce(&flat).unwrap();
        assert_eq!(sys.feedthrough[(0, 0)], c(1.0, 0.0));
    }

    #[test]
    fn invalid_circuit_rejected() {
        let flat = flatten(&parse_netlist("comp p phase phi=1 in=input:a\n").unwrap()).unwrap();
        assert!(matches!(reduce(&flat), Err(ReductionError::InvalidCircuit(_))));
    }

    #[test]
    fn probes_report_internal_wires() {
        let text = "comp p1 phase phi=0.5 in=input:a\ncomp p2 phase phi=0.25 in=p1.0\noutput y from p2.0\n";
        let flat = flatten(&parse_netlist(text).unwrap()).unwrap();
        let sys = reduce_with_probes(&flat, &["p1.0".into(), "p2.0".into()]).unwrap();
        assert_eq!(sys.outputs, ["y", "p1.0", "p2.0"]);
        assert!((sys.feedthrough[(1, 0)] - C64::from_polar(1.0, 0.5)).norm() < 1e-15);
        assert_eq!(sys.feedthrough[(2, 0)], sys.feedthrough[(0, 0)]);
        assert!(matches!(
            reduce_with_probes(&flat, &["p1.1".into()]),
            Err(ReductionError::UnknownProbe(_))
        ));
    }
}
