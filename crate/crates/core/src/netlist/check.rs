use std::collections::HashMap;
use std::fmt;

use super::{Consumer, FlatCircuit, InputKind, PortAddr, Primitive, Producer};

/// Number of components of each kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ComponentCounts {
    pub resonators: usize,
    pub beamsplitters: usize,
    pub phase_shifters: usize,
    pub displacements: usize,
    pub identities: usize,
}

/// External input tally.
///
/// `vacuum` counts every input without a fixed coherent amplitude, which
/// includes the time-dependent `signals`. `coherent` counts inputs with a
/// constant non-vacuum amplitude.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InputCounts {
    pub vacuum: usize,
    pub signals: usize,
    pub coherent: usize,
}

/// A reason a flat circuit cannot be simulated.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Component output port feeding nothing.
    DanglingOutput { component: String, port: usize },
    /// External input feeding nothing.
    UnusedInput { input: String },
    /// Component input port with no producer.
    UnconnectedInput { component: String, port: usize },
    /// External output with no producer.
    UnconnectedOutput { output: String },
    /// Consumer fed by more than one producer.
    MultipleSources { consumer: String },
    /// Producer feeding more than one consumer.
    FanOut { producer: String },
    /// Link naming a port or index that does not exist.
    BadPort { link: String },
    /// Resonator with a non-positive or non-finite decay rate.
    BadResonator { component: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DanglingOutput { component, port } => {
                write!(f, "output port {component}.{port} is not connected")
            }
            Violation::UnusedInput { input } => write!(f, "input `{input}` feeds nothing"),
            Violation::UnconnectedInput { component, port } => {
                write!(f, "input port {component}.in{port} has no source")
            }
            Violation::UnconnectedOutput { output } => {
                write!(f, "external output `{output}` has no source")
            }
            Violation::MultipleSources { consumer } => {
                write!(f, "{consumer} has more than one source")
            }
            Violation::FanOut { producer } => write!(f, "{producer} drives more than one input"),
            Violation::BadPort { link } => write!(f, "link {link} refers to a missing port"),
            Violation::BadResonator { component } => {
                write!(f, "resonator {component} has an invalid decay rate")
            }
        }
    }
}

/// Summary of a flat circuit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CircuitReport {
    pub components: ComponentCounts,
    pub inputs: InputCounts,
    pub outputs: usize,
    /// Empty if and only if the circuit is simulable.
    pub violations: Vec<Violation>,
}

impl CircuitReport {
    pub fn is_simulable(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for CircuitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.components;
        writeln!(f, "resonators      {}", c.resonators)?;
        writeln!(f, "beamsplitters   {}", c.beamsplitters)?;
        writeln!(f, "phase shifters  {}", c.phase_shifters)?;
        writeln!(f, "displacements   {}", c.displacements)?;
        writeln!(f, "identities      {}", c.identities)?;
        writeln!(
            f,
            "vacuum inputs   {} (of which {} signal)",
            self.inputs.vacuum, self.inputs.signals
        )?;
        writeln!(f, "coherent inputs {}", self.inputs.coherent)?;
        writeln!(f, "outputs         {}", self.outputs)?;
        if self.violations.is_empty() {
            writeln!(f, "ok")
        } else {
            for v in &self.violations {
                writeln!(f, "violation: {v}")?;
            }
            Ok(())
        }
    }
}

/// Counts components and inputs and lists every structural violation.
pub fn check_circuit(flat: &FlatCircuit) -> CircuitReport {
    let mut report = CircuitReport {
        outputs: flat.outputs.len(),
        ..Default::default()
    };
    for comp in &flat.components {
        let c = &mut report.components;
        match &comp.kind {
            Primitive::Resonator(p) => {
                c.resonators += 1;
                if p.validate().is_err() {
                    report.violations.push(Violation::BadResonator {
                        component: comp.name.clone(),
                    });
                }
            }
            Primitive::BeamSplitter { .. } => c.beamsplitters += 1,
            Primitive::PhaseShifter { .. } => c.phase_shifters += 1,
            Primitive::Displacement { .. } => c.displacements += 1,
            Primitive::Identity => c.identities += 1,
        }
    }
    for inp in &flat.inputs {
        match inp.kind {
            InputKind::Vacuum => report.inputs.vacuum += 1,
            InputKind::Signal(_) => {
                report.inputs.vacuum += 1;
                report.inputs.signals += 1;
            }
            InputKind::Coherent(_) => report.inputs.coherent += 1,
        }
    }

    let producer_ok = |p: Producer| match p {
        Producer::Component(PortAddr { component, port }) => flat
            .components
            .get(component)
            .is_some_and(|c| port < c.kind.arity().1),
        Producer::Input(i) => i < flat.inputs.len(),
    };
    let consumer_ok = |c: Consumer| match c {
        Consumer::Component(PortAddr { component, port }) => flat
            .components
            .get(component)
            .is_some_and(|c| port < c.kind.arity().0),
        Consumer::Output(i) => i < flat.outputs.len(),
    };
    let producer_name = |p: Producer| match p {
        Producer::Component(a) => format!("{}.{}", flat.components[a.component].name, a.port),
        Producer::Input(i) => format!("input `{}`", flat.inputs[i].name),
    };
    let consumer_name = |c: Consumer| match c {
        Consumer::Component(a) => format!("{}.in{}", flat.components[a.component].name, a.port),
        Consumer::Output(i) => format!("output `{}`", flat.outputs[i].name),
    };

    let mut produced: HashMap<Producer, usize> = HashMap::new();
    let mut consumed: HashMap<Consumer, usize> = HashMap::new();
    for &(p, c) in &flat.links {
        if !producer_ok(p) || !consumer_ok(c) {
            report.violations.push(Violation::BadPort {
                link: format!("{p:?} -> {c:?}"),
            });
            continue;
        }
        *produced.entry(p).or_default() += 1;
        *consumed.entry(c).or_default() += 1;
    }

    for (ci, comp) in flat.components.iter().enumerate() {
        let (n_in, n_out) = comp.kind.arity();
        for port in 0..n_in {
            let key = Consumer::Component(PortAddr { component: ci, port });
            match consumed.get(&key).copied().unwrap_or(0) {
                0 => report.violations.push(Violation::UnconnectedInput {
                    component: comp.name.clone(),
                    port,
                }),
                1 => {}
                _ => report.violations.push(Violation::MultipleSources {
                    consumer: consumer_name(key),
                }),
            }
        }
        for port in 0..n_out {
            let key = Producer::Component(PortAddr { component: ci, port });
            match produced.get(&key).copied().unwrap_or(0) {
                0 => report.violations.push(Violation::DanglingOutput {
                    component: comp.name.clone(),
                    port,
                }),
                1 => {}
                _ => report.violations.push(Violation::FanOut {
                    producer: producer_name(key),
                }),
            }
        }
    }
    for (ii, inp) in flat.inputs.iter().enumerate() {
        match produced.get(&Producer::Input(ii)).copied().unwrap_or(0) {
            0 => report.violations.push(Violation::UnusedInput {
                input: inp.name.clone(),
            }),
            1 => {}
            _ => report.violations.push(Violation::FanOut {
                producer: producer_name(Producer::Input(ii)),
            }),
        }
    }
    for (oi, out) in flat.outputs.iter().enumerate() {
        match consumed.get(&Consumer::Output(oi)).copied().unwrap_or(0) {
            0 => report.violations.push(Violation::UnconnectedOutput {
                output: out.name.clone(),
            }),
            1 => {}
            _ => report.violations.push(Violation::MultipleSources {
                consumer: consumer_name(Consumer::Output(oi)),
            }),
        }
    }
    report
}
