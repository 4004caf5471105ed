//! Reduction by tracing signal paths backwards from every resonator input
//! and external output. Independent of the matrix elimination in
//! [`super::reduce`]; circuits containing a loop of static components are
//! refused.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::{InputInfo, KerrMode, ReducedSystem, ReductionError, ResonatorInfo};
use crate::netlist::{check_circuit, Consumer, FlatCircuit, PortAddr, Primitive, Producer};
use crate::C64;

#[derive(Clone)]
struct Form {
    alpha: Vec<C64>,
    inputs: Vec<C64>,
    constant: C64,
}

impl Form {
    fn zero(nr: usize, ni: usize) -> Self {
        Form {
            alpha: vec![C64::default(); nr],
            inputs: vec![C64::default(); ni],
            constant: C64::default(),
        }
    }

    fn add_scaled(&mut self, k: C64, other: &Form) {
        for (a, b) in self.alpha.iter_mut().zip(&other.alpha) {
            *a += k * b;
        }
        for (a, b) in self.inputs.iter_mut().zip(&other.inputs) {
            *a += k * b;
        }
        self.constant += k * other.constant;
    }
}

struct Tracer<'a> {
    flat: &'a FlatCircuit,
    res_index: Vec<Option<usize>>,
    sources: HashMap<Consumer, Producer>,
    memo: HashMap<Producer, Form>,
    active: Vec<Producer>,
}

impl Tracer<'_> {
    fn source(&self, c: Consumer) -> Producer {
        self.sources[&c]
    }

    fn trace(&mut self, p: Producer) -> Result<Form, ReductionError> {
        if let Some(f) = self.memo.get(&p) {
            return Ok(f.clone());
        }
        if self.active.contains(&p) {
            let Producer::Component(a) = p else { unreachable!() };
            return Err(ReductionError::StaticLoop(self.flat.components[a.component].name.clone()));
        }
        let nr = self.res_index.iter().flatten().count();
        let ni = self.flat.inputs.len();
        let mut form = Form::zero(nr, ni);
        match p {
            Producer::Input(i) => form.inputs[i] = C64::new(1.0, 0.0),
            Producer::Component(PortAddr { component, port }) => {
                self.active.push(p);
                let upstream = |k: usize| {
                    Consumer::Component(PortAddr {
                        component,
                        port: k,
                    })
                };
                match &self.flat.components[component].kind {
                    Primitive::Resonator(r) => {
                        let j = self.res_index[component].expect("resonator index");
                        let cp = r.couplings[port];
                        form.alpha[j] += cp.rate.sqrt() * C64::new(0.0, cp.phase).exp();
                        let reflected = self.trace(self.source(upstream(port)))?;
                        form.add_scaled(C64::new(1.0, 0.0), &reflected);
                    }
                    Primitive::BeamSplitter { theta } => {
                        let (s, c) = theta.sin_cos();
                        let (k0, k1) = if port == 0 { (c, -s) } else { (s, c) };
                        let f0 = self.trace(self.source(upstream(0)))?;
                        let f1 = self.trace(self.source(upstream(1)))?;
                        form.add_scaled(C64::new(k0, 0.0), &f0);
                        form.add_scaled(C64::new(k1, 0.0), &f1);
                    }
                    Primitive::PhaseShifter { phi } => {
                        let f0 = self.trace(self.source(upstream(0)))?;
                        form.add_scaled(C64::new(0.0, *phi).exp(), &f0);
                    }
                    Primitive::Displacement { beta } => {
                        let f0 = self.trace(self.source(upstream(0)))?;
                        form.add_scaled(C64::new(1.0, 0.0), &f0);
                        form.constant += beta;
                    }
                    Primitive::Identity => {
                        let f0 = self.trace(self.source(upstream(0)))?;
                        form.add_scaled(C64::new(1.0, 0.0), &f0);
                    }
                }
                self.active.pop();
            }
        }
        self.memo.insert(p, form.clone());
        Ok(form)
    }
}

/// Reduces `flat` by summing every static path between producers and
/// consumers. Fails with [`ReductionError::StaticLoop`] when a path returns
/// to a port it has already visited without passing through a resonator.
pub fn backprop_reduce(flat: &FlatCircuit) -> Result<ReducedSystem, ReductionError> {
    let report = check_circuit(flat);
    if let Some(v) = report.violations.first() {
        return Err(ReductionError::InvalidCircuit(v.to_string()));
    }
    let mut res_index = Vec::with_capacity(flat.components.len());
    let mut resonators = Vec::new();
    for c in &flat.components {
        if let Primitive::Resonator(r) = &c.kind {
            res_index.push(Some(resonators.len()));
            resonators.push(ResonatorInfo {
                name: c.name.clone(),
                mode: KerrMode {
                    detuning: r.detuning,
                    decay: r.total_decay(),
                    kerr: r.kerr,
                },
            });
        } else {
            res_index.push(None);
        }
    }
    let nr = resonators.len();
    let ni = flat.inputs.len();
    let no = flat.outputs.len();
    let mut t = Tracer {
        flat,
        res_index,
        sources: flat.links.iter().map(|&(p, c)| (c, p)).collect(),
        memo: HashMap::new(),
        active: Vec::new(),
    };

    let mut feedback = DMatrix::zeros(nr, nr);
    let mut drift = DVector::zeros(nr);
    let mut input_coupling = DMatrix::zeros(nr, ni);
    for (ci, comp) in flat.components.iter().enumerate() {
        let Primitive::Resonator(r) = &comp.kind else { continue };
        let j = t.res_index[ci].expect("resonator index");
        for (k, cp) in r.couplings.iter().enumerate() {
            let bk = -cp.rate.sqrt() * C64::new(0.0, -cp.phase).exp();
            let f = t.trace(t.source(Consumer::Component(PortAddr { component: ci, port: k })))?;
            for (m, v) in f.alpha.iter().enumerate() {
                feedback[(j, m)] += bk * v;
            }
            for (m, v) in f.inputs.iter().enumerate() {
                input_coupling[(j, m)] += bk * v;
            }
            drift[j] += bk * f.constant;
        }
    }
    let mut output_coupling = DMatrix::zeros(no, nr);
    let mut output_offset = DVector::zeros(no);
    let mut feedthrough = DMatrix::zeros(no, ni);
    for o in 0..no {
        let f = t.trace(t.source(Consumer::Output(o)))?;
        for (m, v) in f.alpha.iter().enumerate() {
            output_coupling[(o, m)] = *v;
        }
        for (m, v) in f.inputs.iter().enumerate() {
            feedthrough[(o, m)] = *v;
        }
        output_offset[o] = f.constant;
    }
    Ok(ReducedSystem {
        feedback,
        drift,
        input_coupling,
        output_coupling,
        output_offset,
        feedthrough,
        resonators,
        inputs: flat
            .inputs
            .iter()
            .map(|i| InputInfo {
                name: i.name.clone(),
                kind: i.kind.clone(),
            })
            .collect(),
        outputs: flat.outputs.iter().map(|o| o.name.clone()).collect(),
    })
}
