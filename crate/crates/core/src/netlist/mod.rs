//! Hierarchical circuit descriptions.
//!
//! A [`Netlist`] lists component instances, each naming the producer feeding
//! every one of its input ports. Compound definitions group instances behind
//! named ports and can be instantiated like primitives. [`flatten`] expands a
//! netlist into a [`FlatCircuit`] of primitives joined by point-to-point
//! connections, and [`check_circuit`] validates the result.

mod check;
mod flatten;
mod parse;

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use thiserror::Error;

use crate::C64;

pub use check::{check_circuit, CircuitReport, ComponentCounts, InputCounts, Violation};
pub use flatten::flatten;
pub use parse::parse_netlist;

/// Default coupling phase of a resonator port.
pub const DEFAULT_PORT_PHASE: f64 = -FRAC_PI_2;

/// Coupling of a resonator to one of its ports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    /// Energy decay rate through the port.
    pub rate: f64,
    /// Coupling phase.
    pub phase: f64,
}

/// Parameters of a single-mode Kerr resonator.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonatorParams {
    pub detuning: f64,
    /// Kerr coefficient; negative for the cells in this crate.
    pub kerr: f64,
    pub couplings: Vec<Coupling>,
}

impl ResonatorParams {
    /// Resonator with the default port phase on every coupling.
    pub fn new(detuning: f64, kerr: f64, rates: &[f64]) -> Self {
        ResonatorParams {
            detuning,
            kerr,
            couplings: rates
                .iter()
                .map(|&rate| Coupling {
                    rate,
                    phase: DEFAULT_PORT_PHASE,
                })
                .collect(),
        }
    }

    /// Total decay rate, the sum of the port rates.
    pub fn total_decay(&self) -> f64 {
        self.couplings.iter().map(|c| c.rate).sum()
    }

    pub fn ports(&self) -> usize {
        self.couplings.len()
    }

    fn validate(&self) -> Result<(), String> {
        if self.couplings.is_empty() {
            return Err("resonator needs at least one port".into());
        }
        for (k, c) in self.couplings.iter().enumerate() {
            if !(c.rate.is_finite() && c.rate > 0.0) {
                return Err(format!("port {k} decay rate must be positive, got {}", c.rate));
            }
            if !c.phase.is_finite() {
                return Err(format!("port {k} phase is not finite"));
            }
        }
        if !self.detuning.is_finite() || !self.kerr.is_finite() {
            return Err("detuning and kerr must be finite".into());
        }
        Ok(())
    }
}

/// What an external input carries in the absence of noise.
#[derive(Debug, Clone, PartialEq)]
pub enum InputKind {
    /// Vacuum; contributes only noise.
    Vacuum,
    /// Constant coherent amplitude plus vacuum noise.
    Coherent(C64),
    /// Time-dependent drive looked up by name in a drive program.
    Signal(String),
}

/// Kind of a netlist entry.
#[derive(Debug, Clone, PartialEq)]
pub enum ComponentKind {
    Resonator(ResonatorParams),
    /// Two-port beamsplitter with mixing angle `theta`.
    BeamSplitter { theta: f64 },
    PhaseShifter { phi: f64 },
    /// Adds a constant amplitude to a single field.
    Displacement { beta: C64 },
    /// Single-port pass-through.
    Identity,
    /// External input with no input ports and one output.
    Input(InputKind),
    /// External output (sink) with one input and no outputs.
    Output,
    /// Instance of a compound definition.
    Compound(String),
}

impl ComponentKind {
    /// Port counts `(inputs, outputs)` for non-compound kinds.
    pub fn primitive_arity(&self) -> Option<(usize, usize)> {
        Some(match self {
            ComponentKind::Resonator(p) => (p.ports(), p.ports()),
            ComponentKind::BeamSplitter { .. } => (2, 2),
            ComponentKind::PhaseShifter { .. }
            | ComponentKind::Displacement { .. }
            | ComponentKind::Identity => (1, 1),
            ComponentKind::Input(_) => (0, 1),
            ComponentKind::Output => (1, 0),
            ComponentKind::Compound(_) => return None,
        })
    }

    pub(crate) fn as_primitive(&self) -> Option<Primitive> {
        Some(match self {
            ComponentKind::Resonator(p) => Primitive::Resonator(p.clone()),
            ComponentKind::BeamSplitter { theta } => Primitive::BeamSplitter { theta: *theta },
            ComponentKind::PhaseShifter { phi } => Primitive::PhaseShifter { phi: *phi },
            ComponentKind::Displacement { beta } => Primitive::Displacement { beta: *beta },
            ComponentKind::Identity => Primitive::Identity,
            _ => return None,
        })
    }
}

/// A component that survives flattening.
#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    Resonator(ResonatorParams),
    BeamSplitter { theta: f64 },
    PhaseShifter { phi: f64 },
    Displacement { beta: C64 },
    Identity,
}

impl Primitive {
    /// Port counts `(inputs, outputs)`.
    pub fn arity(&self) -> (usize, usize) {
        match self {
            Primitive::Resonator(p) => (p.ports(), p.ports()),
            Primitive::BeamSplitter { .. } => (2, 2),
            _ => (1, 1),
        }
    }

    pub fn to_kind(&self) -> ComponentKind {
        match self {
            Primitive::Resonator(p) => ComponentKind::Resonator(p.clone()),
            Primitive::BeamSplitter { theta } => ComponentKind::BeamSplitter { theta: *theta },
            Primitive::PhaseShifter { phi } => ComponentKind::PhaseShifter { phi: *phi },
            Primitive::Displacement { beta } => ComponentKind::Displacement { beta: *beta },
            Primitive::Identity => ComponentKind::Identity,
        }
    }
}

/// Port selector on an instance: positional index or compound port name.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PortId {
    Index(usize),
    Name(String),
}

impl fmt::Display for PortId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PortId::Index(i) => write!(f, "{i}"),
            PortId::Name(n) => f.write_str(n),
        }
    }
}

/// Output port of a named instance.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PortRef {
    pub instance: String,
    pub port: PortId,
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.instance, self.port)
    }
}

/// Producer feeding an input port.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// A fresh vacuum input.
    Vacuum,
    /// At top level a named signal input; inside a compound, one of its
    /// input ports.
    Input(String),
    Port(PortRef),
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Vacuum => f.write_str("vacuum"),
            Source::Input(n) => write!(f, "input:{n}"),
            Source::Port(p) => write!(f, "{p}"),
        }
    }
}

/// One component instance. `sources[k]` feeds input port `k`; ports past the
/// end of the list are fed by fresh vacuum inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub kind: ComponentKind,
    pub sources: Vec<Source>,
    /// Source line, 0 when built programmatically.
    pub line: usize,
}

impl Entry {
    pub fn new(name: impl Into<String>, kind: ComponentKind, sources: Vec<Source>) -> Self {
        Entry {
            name: name.into(),
            kind,
            sources,
            line: 0,
        }
    }
}

/// Named output of a netlist or compound.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputDecl {
    pub name: String,
    pub source: PortRef,
}

/// Reusable sub-circuit with named ports.
#[derive(Debug, Clone, PartialEq)]
pub struct CompoundDef {
    pub name: String,
    pub inputs: Vec<String>,
    pub entries: Vec<Entry>,
    /// Output ports, in port order.
    pub outputs: Vec<OutputDecl>,
    pub line: usize,
}

/// A hierarchical circuit description.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Netlist {
    pub name: String,
    pub compounds: Vec<CompoundDef>,
    pub entries: Vec<Entry>,
    pub outputs: Vec<OutputDecl>,
}

impl Netlist {
    pub fn compound(&self, name: &str) -> Option<&CompoundDef> {
        self.compounds.iter().find(|c| c.name == name)
    }

    /// Adds or replaces a compound definition.
    pub fn define(&mut self, def: CompoundDef) {
        match self.compounds.iter_mut().find(|c| c.name == def.name) {
            Some(slot) => *slot = def,
            None => self.compounds.push(def),
        }
    }

    /// Canonical text form, accepted by [`parse_netlist`].
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

/// Input or output port of a flat component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PortAddr {
    pub component: usize,
    pub port: usize,
}

/// A producer in a flat circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Producer {
    /// Output port of a component.
    Component(PortAddr),
    /// External input, by index.
    Input(usize),
}

/// A consumer in a flat circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Consumer {
    /// Input port of a component.
    Component(PortAddr),
    /// External output, by index.
    Output(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatComponent {
    /// Hierarchical path, segments joined with `.`.
    pub name: String,
    pub kind: Primitive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalInput {
    pub name: String,
    pub kind: InputKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalOutput {
    pub name: String,
}

/// Primitive components joined point to point.
///
/// Every `(producer, consumer)` pair in `links` is one wire. A valid circuit
/// feeds each component input port exactly once and uses each producer at
/// most once; see [`check_circuit`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlatCircuit {
    pub components: Vec<FlatComponent>,
    pub inputs: Vec<ExternalInput>,
    pub outputs: Vec<ExternalOutput>,
    pub links: Vec<(Producer, Consumer)>,
}

impl FlatCircuit {
    pub fn component_index(&self, name: &str) -> Option<usize> {
        self.components.iter().position(|c| c.name == name)
    }

    pub fn input_index(&self, name: &str) -> Option<usize> {
        self.inputs.iter().position(|c| c.name == name)
    }

    pub fn output_index(&self, name: &str) -> Option<usize> {
        self.outputs.iter().position(|c| c.name == name)
    }

    /// Producer wired to `consumer`, if any.
    pub fn source_of(&self, consumer: Consumer) -> Option<Producer> {
        self.links
            .iter()
            .find(|(_, c)| *c == consumer)
            .map(|(p, _)| *p)
    }

    /// Equivalent flat netlist: inputs become explicit input entries,
    /// components keep their order and names, outputs are declared at top
    /// level. Flattening the result reproduces `self`.
    pub fn to_netlist(&self) -> Netlist {
        let mut entries = Vec::with_capacity(self.inputs.len() + self.components.len());
        for inp in &self.inputs {
            entries.push(Entry::new(
                inp.name.clone(),
                ComponentKind::Input(inp.kind.clone()),
                Vec::new(),
            ));
        }
        let producer_ref = |p: Producer| -> PortRef {
            match p {
                Producer::Component(a) => PortRef {
                    instance: self.components[a.component].name.clone(),
                    port: PortId::Index(a.port),
                },
                Producer::Input(i) => PortRef {
                    instance: self.inputs[i].name.clone(),
                    port: PortId::Index(0),
                },
            }
        };
        for (ci, comp) in self.components.iter().enumerate() {
            let (n_in, _) = comp.kind.arity();
            let sources = (0..n_in)
                .map(|port| {
                    match self.source_of(Consumer::Component(PortAddr {
                        component: ci,
                        port,
                    })) {
                        Some(p) => Source::Port(producer_ref(p)),
                        None => Source::Vacuum,
                    }
                })
                .collect();
            entries.push(Entry::new(comp.name.clone(), comp.kind.to_kind(), sources));
        }
        let outputs = self
            .outputs
            .iter()
            .enumerate()
            .filter_map(|(oi, out)| {
                self.source_of(Consumer::Output(oi)).map(|p| OutputDecl {
                    name: out.name.clone(),
                    source: producer_ref(p),
                })
            })
            .collect();
        Netlist {
            name: "flat".into(),
            compounds: Vec::new(),
            entries,
            outputs,
        }
    }
}

/// Errors from parsing or flattening a netlist.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetlistError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: unknown component kind `{kind}`")]
    UnknownKind { line: usize, kind: String },
    #[error("line {line}: instance `{name}` defined twice")]
    DuplicateInstance { line: usize, name: String },
    #[error("line {line}: instance `{instance}` lists its sources twice")]
    DuplicateSource { line: usize, instance: String },
    #[error("line {line}: bad parameter for `{instance}`: {message}")]
    Parameter {
        line: usize,
        instance: String,
        message: String,
    },
    #[error("compound definitions form a cycle: {}", .0.join(" -> "))]
    CyclicCompound(Vec<String>),
    #[error("`{instance}` has {got} sources but only {ports} input ports")]
    PortArity {
        instance: String,
        got: usize,
        ports: usize,
    },
    #[error("reference to unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("`{instance}` has no output port `{port}`")]
    UnknownPort { instance: String, port: String },
    #[error("compound input `{port}` is not declared on `{compound}`")]
    UnknownCompoundInput { compound: String, port: String },
    #[error("output `{0}` drives more than one input")]
    FanOut(String),
    #[error("name `{0}` is used by more than one external input")]
    DuplicateInput(String),
}

impl NetlistError {
    /// Line the error refers to, when known.
    pub fn line(&self) -> Option<usize> {
        match self {
            NetlistError::Syntax { line, .. }
            | NetlistError::UnknownKind { line, .. }
            | NetlistError::DuplicateInstance { line, .. }
            | NetlistError::DuplicateSource { line, .. }
            | NetlistError::Parameter { line, .. } => Some(*line),
            _ => None,
        }
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_complex(z: C64) -> String {
    format!("{},{}", fmt_f64(z.re), fmt_f64(z.im))
}

fn fmt_kind(kind: &ComponentKind) -> String {
    match kind {
        ComponentKind::Resonator(p) => {
            let kappa: Vec<String> = p.couplings.iter().map(|c| fmt_f64(c.rate)).collect();
            let mut s = format!(
                "resonator delta={} chi={} kappa={}",
                fmt_f64(p.detuning),
                fmt_f64(p.kerr),
                kappa.join(",")
            );
            if p.couplings.iter().any(|c| c.phase != DEFAULT_PORT_PHASE) {
                let psi: Vec<String> = p.couplings.iter().map(|c| fmt_f64(c.phase)).collect();
                s.push_str(&format!(" psi={}", psi.join(",")));
            }
            s
        }
        ComponentKind::BeamSplitter { theta } => format!("beamsplitter theta={}", fmt_f64(*theta)),
        ComponentKind::PhaseShifter { phi } => format!("phase phi={}", fmt_f64(*phi)),
        ComponentKind::Displacement { beta } => format!("displacement beta={}", fmt_complex(*beta)),
        ComponentKind::Identity => "identity".into(),
        ComponentKind::Input(InputKind::Vacuum) => "input".into(),
        ComponentKind::Input(InputKind::Coherent(b)) => format!("input amp={}", fmt_complex(*b)),
        ComponentKind::Input(InputKind::Signal(s)) => format!("input drive={s}"),
        ComponentKind::Output => "output".into(),
        ComponentKind::Compound(name) => name.clone(),
    }
}

fn write_entry(f: &mut fmt::Formatter<'_>, indent: &str, e: &Entry) -> fmt::Result {
    write!(f, "{indent}comp {} {}", e.name, fmt_kind(&e.kind))?;
    if !e.sources.is_empty() {
        let srcs: Vec<String> = e.sources.iter().map(|s| s.to_string()).collect();
        write!(f, " in={}", srcs.join(","))?;
    }
    writeln!(f)
}

impl fmt::Display for Netlist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "netlist {}", self.name)?;
        for def in &self.compounds {
            writeln!(f)?;
            writeln!(f, "compound {} {{", def.name)?;
            for e in &def.entries {
                write_entry(f, "  ", e)?;
            }
            for o in &def.outputs {
                writeln!(f, "  output {} from {}", o.name, o.source)?;
            }
            let outs: Vec<&str> = def.outputs.iter().map(|o| o.name.as_str()).collect();
            write!(f, "}} ports")?;
            if !def.inputs.is_empty() {
                write!(f, " in={}", def.inputs.join(","))?;
            }
            if !outs.is_empty() {
                write!(f, " out={}", outs.join(","))?;
            }
            writeln!(f)?;
        }
        if !self.compounds.is_empty() {
            writeln!(f)?;
        }
        for e in &self.entries {
            write_entry(f, "", e)?;
        }
        for o in &self.outputs {
            writeln!(f, "output {} from {}", o.name, o.source)?;
        }
        Ok(())
    }
}
