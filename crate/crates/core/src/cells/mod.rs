//! Standard logic cells built from Kerr resonators and linear optics.
//!
//! [`build_cell`] returns a netlist whose top level holds one instance,
//! `cell`, with signal inputs named after the cell ports and outputs
//! declared under the port names:
//!
//! | cell | inputs | outputs |
//! |------|--------|---------|
//! | amplifier stage / chain | `x` | `y` |
//! | AND | `a`, `b` | `y` |
//! | fan-out | `x` | `y0`, `y1` (both inverted) |
//! | latch | `sbar`, `rbar` | `q` |
//! | D flip-flop | `d`, `clk` | `q` |
//! | 4-bit counter | `clk` | `b0` .. `b3` |
//!
//! Every unused internal output ends in an explicit sink, so the flattened
//! circuits pass [`crate::netlist::check_circuit`] without violations.

mod classical;
mod protocol;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;
use thiserror::Error;

use crate::netlist::{
    flatten, CompoundDef, ComponentKind, Entry, InputKind, Netlist, NetlistError, OutputDecl,
    PortId, PortRef, ResonatorParams, Source,
};
use crate::reduction::{reduce, ReducedSystem, ReductionError};
use crate::C64;

pub use classical::{
    bistability_threshold, classical_response, inflection_photon_number, is_bistable,
    optimal_input_rate, switching_energy,
};
pub use protocol::{clock, latch_schedule, LatchPhase, LATCH_SCHEDULE};

/// Logical-high amplitude used when none is given.
pub const DEFAULT_E_HIGH: f64 = 50.0;

#[derive(Debug, Error)]
pub enum CellError {
    #[error("amplifier stage {0} does not exist (stages 0-3)")]
    NoSuchStage(usize),
    #[error("unknown parameter override `{0}`")]
    UnknownOverride(String),
    #[error("E_high must be positive and finite, got {0}")]
    BadAmplitude(f64),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    AmplifierStage { stage: usize, inverting: bool },
    /// Stages `0..stages` in cascade.
    AmplifierChain { stages: usize, inverting: bool },
    AndGate,
    Fanout,
    Latch,
    DFlipFlop,
    Counter4,
}

impl CellKind {
    /// Parses the names used on the command line: `amp<k>`, `amp<k>-inv`,
    /// `ampchain<n>`, `ampchain<n>-inv`, `and`, `fanout`, `latch`,
    /// `dflipflop`, `counter4`.
    pub fn parse(s: &str) -> Option<Self> {
        let (base, inverting) = match s.strip_suffix("-inv") {
            Some(b) => (b, true),
            None => (s, false),
        };
        if let Some(k) = base.strip_prefix("ampchain") {
            return k
                .parse()
                .ok()
                .map(|stages| CellKind::AmplifierChain { stages, inverting });
        }
        if let Some(k) = base.strip_prefix("amp") {
            return k
                .parse()
                .ok()
                .map(|stage| CellKind::AmplifierStage { stage, inverting });
        }
        if inverting {
            return None;
        }
        Some(match base {
            "and" => CellKind::AndGate,
            "fanout" => CellKind::Fanout,
            "latch" => CellKind::Latch,
            "dflipflop" => CellKind::DFlipFlop,
            "counter4" => CellKind::Counter4,
            _ => return None,
        })
    }

    pub fn input_ports(&self) -> &'static [&'static str] {
        match self {
            CellKind::AmplifierStage { .. } | CellKind::AmplifierChain { .. } | CellKind::Fanout => {
                &["x"]
            }
            CellKind::AndGate => &["a", "b"],
            CellKind::Latch => &["sbar", "rbar"],
            CellKind::DFlipFlop => &["d", "clk"],
            CellKind::Counter4 => &["clk"],
        }
    }

    pub fn output_ports(&self) -> &'static [&'static str] {
        match self {
            CellKind::Fanout => &["y0", "y1"],
            CellKind::Latch | CellKind::DFlipFlop => &["q"],
            CellKind::Counter4 => &["b0", "b1", "b2", "b3"],
            _ => &["y"],
        }
    }
}

/// A cell to build: kind, logical-high amplitude and parameter overrides.
///
/// Override keys are `<family>.<param>` with families `amp`, `and`,
/// `fanout` and `latch`, e.g. `latch.phi1` or `and.chi`. They replace the
/// tabulated value wherever that family appears, including inside the
/// flip-flop and counter. Absolute values are expected (`and.chi` is the
/// Kerr coefficient itself, not the `E²`-scaled table entry).
#[derive(Debug, Clone, PartialEq)]
pub struct CellSpec {
    pub kind: CellKind,
    pub e_high: f64,
    pub overrides: BTreeMap<String, f64>,
}

impl CellSpec {
    pub fn new(kind: CellKind) -> Self {
        CellSpec {
            kind,
            e_high: DEFAULT_E_HIGH,
            overrides: BTreeMap::new(),
        }
    }

    pub fn e_high(mut self, e: f64) -> Self {
        self.e_high = e;
        self
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.overrides.insert(key.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct AmpVariant {
    pub beta_c: Vec<f64>,
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct AmpTable {
    pub power_transmission: f64,
    pub chi: f64,
    pub kappa: Vec<f64>,
    pub delta: Vec<f64>,
    pub noninverting: AmpVariant,
    pub inverting: AmpVariant,
}

#[derive(Debug, Clone, Deserialize)]
pub struct GateTable {
    pub chi_e2: f64,
    #[serde(default)]
    pub beta_c_per_e: f64,
    pub delta: f64,
    pub kappa: [f64; 3],
    pub t1: f64,
    pub t2: f64,
    #[serde(default)]
    pub t3: f64,
    pub phi1: f64,
    pub phi2: f64,
    #[serde(default)]
    pub phi3: f64,
}

/// Tabulated design parameters.
#[derive(Debug, Clone, Deserialize)]
pub struct CellTable {
    pub amplifier: AmpTable,
    pub and_gate: GateTable,
    pub fanout: GateTable,
    pub latch: GateTable,
}

/// The parameter table shipped with the crate.
pub fn cell_table() -> &'static CellTable {
    static TABLE: OnceLock<CellTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        toml::from_str(include_str!("../../data/cells.toml")).expect("bundled cells.toml parses")
    })
}

/// Gate parameters after scaling with `E` and applying overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    pub chi: f64,
    pub beta_c: C64,
    pub delta: f64,
    pub kappa: [f64; 3],
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub phi3: f64,
}

/// Amplifier-stage parameters after applying overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct AmpParams {
    pub t: f64,
    pub chi: f64,
    pub kappa: f64,
    pub delta: f64,
    pub beta_c: f64,
    pub phi: f64,
}

struct Overrides<'a> {
    map: &'a BTreeMap<String, f64>,
}

impl Overrides<'_> {
    fn get(&self, family: &str, key: &str, default: f64) -> f64 {
        self.map
            .get(&format!("{family}.{key}"))
            .copied()
            .unwrap_or(default)
    }

    fn check(&self) -> Result<(), CellError> {
        const KNOWN: [&str; 11] = [
            "chi", "beta_c", "delta", "kappa1", "kappa2", "kappa3", "t1", "t2", "t3", "phi1", "phi2",
        ];
        for k in self.map.keys() {
            let ok = match k.split_once('.') {
                Some(("amp", p)) => ["t", "chi", "kappa", "delta", "beta_c", "phi"].contains(&p),
                Some(("and" | "fanout", p)) => KNOWN.contains(&p),
                Some(("latch", p)) => KNOWN.contains(&p) || p == "phi3",
                _ => false,
            };
            if !ok {
                return Err(CellError::UnknownOverride(k.clone()));
            }
        }
        Ok(())
    }
}

/// Gate parameters of `family` (`and`, `fanout` or `latch`) at amplitude `e`.
pub fn gate_params(family: &str, e: f64, overrides: &BTreeMap<String, f64>) -> GateParams {
    let t = cell_table();
    let g = match family {
        "and" => &t.and_gate,
        "fanout" => &t.fanout,
        _ => &t.latch,
    };
    let o = Overrides { map: overrides };
    let phi1 = o.get(family, "phi1", g.phi1);
    let default_bc = match family {
        // latch bias carries the phase that cancels the first phase shifter
        "latch" => C64::from_polar(g.beta_c_per_e * e, -phi1),
        _ => C64::new(g.beta_c_per_e * e, 0.0),
    };
    let beta_c = match overrides.get(&format!("{family}.beta_c")) {
        Some(&b) if family == "latch" => C64::from_polar(b, -phi1),
        Some(&b) => C64::new(b, 0.0),
        None => default_bc,
    };
    GateParams {
        chi: o.get(family, "chi", g.chi_e2 / (e * e)),
        beta_c,
        delta: o.get(family, "delta", g.delta),
        kappa: [
            o.get(family, "kappa1", g.kappa[0]),
            o.get(family, "kappa2", g.kappa[1]),
            o.get(family, "kappa3", g.kappa[2]),
        ],
        t1: o.get(family, "t1", g.t1),
        t2: o.get(family, "t2", g.t2),
        t3: o.get(family, "t3", g.t3),
        phi1,
        phi2: o.get(family, "phi2", g.phi2),
        phi3: o.get(family, "phi3", g.phi3),
    }
}

/// Parameters of amplifier stage `stage`.
pub fn amp_params(
    stage: usize,
    inverting: bool,
    overrides: &BTreeMap<String, f64>,
) -> Result<AmpParams, CellError> {
    let t = &cell_table().amplifier;
    if stage >= t.kappa.len() {
        return Err(CellError::NoSuchStage(stage));
    }
    let v = if inverting { &t.inverting } else { &t.noninverting };
    let o = Overrides { map: overrides };
    Ok(AmpParams {
        t: o.get("amp", "t", t.power_transmission.sqrt()),
        chi: o.get("amp", "chi", t.chi),
        kappa: o.get("amp", "kappa", t.kappa[stage]),
        delta: o.get("amp", "delta", t.delta[stage]),
        beta_c: o.get("amp", "beta_c", v.beta_c[stage]),
        phi: o.get("amp", "phi", v.phi[stage]),
    })
}

fn src(s: &str) -> Source {
    if s == "vacuum" {
        Source::Vacuum
    } else if let Some(n) = s.strip_prefix("input:") {
        Source::Input(n.to_string())
    } else {
        let (inst, port) = s.rsplit_once('.').expect("instance.port");
        Source::Port(PortRef {
            instance: inst.to_string(),
            port: match port.parse() {
                Ok(i) => PortId::Index(i),
                Err(_) => PortId::Name(port.to_string()),
            },
        })
    }
}

fn port_ref(s: &str) -> PortRef {
    match src(s) {
        Source::Port(p) => p,
        _ => unreachable!("port reference expected"),
    }
}

struct DefBuilder {
    def: CompoundDef,
    n_sinks: usize,
}

impl DefBuilder {
    fn new(name: &str, inputs: &[&str]) -> Self {
        DefBuilder {
            def: CompoundDef {
                name: name.to_string(),
                inputs: inputs.iter().map(|s| s.to_string()).collect(),
                entries: Vec::new(),
                outputs: Vec::new(),
                line: 0,
            },
            n_sinks: 0,
        }
    }

    fn add(&mut self, name: &str, kind: ComponentKind, sources: &[&str]) -> &mut Self {
        self.def
            .entries
            .push(Entry::new(name, kind, sources.iter().map(|s| src(s)).collect()));
        self
    }

    fn bs(&mut self, name: &str, t: f64, sources: &[&str]) -> &mut Self {
        self.add(name, ComponentKind::BeamSplitter { theta: t.acos() }, sources)
    }

    fn phase(&mut self, name: &str, phi: f64, source: &str) -> &mut Self {
        self.add(name, ComponentKind::PhaseShifter { phi }, &[source])
    }

    fn resonator(&mut self, name: &str, delta: f64, chi: f64, kappa: &[f64], sources: &[&str]) -> &mut Self {
        self.add(
            name,
            ComponentKind::Resonator(ResonatorParams::new(delta, chi, kappa)),
            sources,
        )
    }

    fn bias(&mut self, name: &str, amp: C64) -> &mut Self {
        self.add(name, ComponentKind::Input(InputKind::Coherent(amp)), &[])
    }

    fn sub(&mut self, name: &str, def: &str, sources: &[&str]) -> &mut Self {
        self.add(name, ComponentKind::Compound(def.to_string()), sources)
    }

    fn sink(&mut self, source: &str) -> &mut Self {
        let name = format!("sink{}", self.n_sinks);
        self.n_sinks += 1;
        self.add(&name, ComponentKind::Output, &[source])
    }

    fn output(&mut self, name: &str, source: &str) -> &mut Self {
        self.def.outputs.push(OutputDecl {
            name: name.to_string(),
            source: port_ref(source),
        });
        self
    }

    fn finish(&mut self) -> CompoundDef {
        std::mem::replace(&mut self.def, DefBuilder::new("", &[]).def)
    }
}

fn amp_stage_def(name: &str, p: &AmpParams) -> CompoundDef {
    DefBuilder::new(name, &["x"])
        .bias("bias", C64::new(p.beta_c, 0.0))
        .bs("bs", p.t, &["bias.0", "input:x"])
        .resonator("r", p.delta, p.chi, &[p.kappa, p.kappa], &["bs.1", "vacuum"])
        .phase("ps", p.phi, "r.1")
        .sink("bs.0")
        .sink("r.0")
        .output("y", "ps.0")
        .finish()
}

fn and_def(p: &GateParams) -> CompoundDef {
    DefBuilder::new("and_gate", &["a", "b"])
        .bs("bs1", p.t1, &["input:a", "input:b"])
        .resonator("r", p.delta, p.chi, &p.kappa, &["bs1.1", "vacuum", "vacuum"])
        .phase("ps1", p.phi1, "r.0")
        .bs("bs2", p.t2, &["ps1.0", "r.1"])
        .phase("ps2", p.phi2, "bs2.1")
        .sink("bs1.0")
        .sink("r.2")
        .sink("bs2.0")
        .output("y", "ps2.0")
        .finish()
}

fn fanout_def(p: &GateParams) -> CompoundDef {
    DefBuilder::new("fanout", &["x"])
        .bias("bias", p.beta_c)
        .bs("bs1", p.t1, &["bias.0", "input:x"])
        .resonator("r", p.delta, p.chi, &p.kappa, &["bs1.1", "vacuum", "vacuum"])
        .phase("ps1", p.phi1, "r.0")
        .bs("bs2", p.t2, &["ps1.0", "r.1"])
        .phase("ps2", p.phi2, "bs2.1")
        .bs("bs3", p.t3, &["ps2.0", "vacuum"])
        .sink("bs1.0")
        .sink("r.2")
        .sink("bs2.0")
        .output("y0", "bs3.0")
        .output("y1", "bs3.1")
        .finish()
}

fn latch_def(p: &GateParams) -> CompoundDef {
    let mut b = DefBuilder::new("latch", &["sbar", "rbar"]);
    for (i, o, sig) in [("1", "2", "sbar"), ("2", "1", "rbar")] {
        b.bias(&format!("bias{i}"), p.beta_c)
            .bs(&format!("bsa{i}"), p.t2, &[&format!("bias{i}.0"), &format!("r{o}.1")])
            .phase(&format!("psa{i}"), p.phi1, &format!("bsa{i}.0"))
            .bs(
                &format!("bsb{i}"),
                p.t1,
                &[&format!("input:{sig}"), &format!("psa{i}.0")],
            )
            .resonator(
                &format!("r{i}"),
                p.delta,
                p.chi,
                &p.kappa,
                &[&format!("bsb{i}.1"), "vacuum", "vacuum"],
            );
    }
    b.phase("psq", p.phi2, "bsa1.1")
        .bs("bsq", p.t3, &["psq.0", "bsa2.1"])
        .phase("psout", p.phi3, "bsq.0")
        .sink("bsb1.0")
        .sink("bsb2.0")
        .sink("r1.0")
        .sink("r2.0")
        .sink("r1.2")
        .sink("r2.2")
        .sink("bsq.1")
        .output("q", "psout.0")
        .finish()
}

fn dflipflop_def() -> CompoundDef {
    let mut b = DefBuilder::new("dflipflop", &["d", "clk"]);
    // data and its complement
    b.sub("fd1", "fanout", &["input:d"])
        .sub("fd2", "fanout", &["fd1.y1"])
        .sink("fd2.y1");
    // clock tree: four fan-outs between the clock input and the slave gates
    b.sub("fc1", "fanout", &["input:clk"])
        .sub("fc2", "fanout", &["fc1.y0"])
        .sub("fc2b", "fanout", &["fc1.y1"])
        .sub("fc3", "fanout", &["fc2b.y0"])
        .sink("fc2b.y1");
    // master: set on D and clk, reset on not-D and clk
    b.sub("and_ms", "and_gate", &["fd2.y0", "fc2.y0"])
        .sub("and_mr", "and_gate", &["fd1.y0", "fc2.y1"])
        .sub("inv_ms", "fanout", &["and_ms.y"])
        .sub("inv_mr", "fanout", &["and_mr.y"])
        .sink("inv_ms.y1")
        .sink("inv_mr.y1")
        .sub("master", "latch", &["inv_ms.y0", "inv_mr.y0"]);
    // master output and its complement
    b.sub("fm1", "fanout", &["master.q"])
        .sub("fm2", "fanout", &["fm1.y1"])
        .sink("fm2.y1");
    // slave: set on M and not-clk, reset on not-M and not-clk
    b.sub("and_ss", "and_gate", &["fm2.y0", "fc3.y0"])
        .sub("and_sr", "and_gate", &["fm1.y0", "fc3.y1"])
        .sub("inv_ss", "fanout", &["and_ss.y"])
        .sub("inv_sr", "fanout", &["and_sr.y"])
        .sink("inv_ss.y1")
        .sink("inv_sr.y1")
        .sub("slave", "latch", &["inv_ss.y0", "inv_sr.y0"])
        .output("q", "slave.q");
    b.finish()
}

fn counter_def() -> CompoundDef {
    let mut b = DefBuilder::new("counter4", &["clk"]);
    for k in 0..4 {
        let clk = if k == 0 {
            "input:clk".to_string()
        } else {
            format!("fb{}.y0", k - 1)
        };
        b.sub(&format!("ff{k}"), "dflipflop", &[&format!("fa{k}.y0"), &clk])
            .sub(&format!("fa{k}"), "fanout", &[&format!("ff{k}.q")])
            .sub(&format!("fb{k}"), "fanout", &[&format!("fa{k}.y1")])
            .output(&format!("b{k}"), &format!("fb{k}.y1"));
    }
    b.sink("fb3.y0");
    b.finish()
}

/// Builds the netlist of a cell.
pub fn build_cell(spec: &CellSpec) -> Result<Netlist, CellError> {
    if !(spec.e_high.is_finite() && spec.e_high > 0.0) {
        return Err(CellError::BadAmplitude(spec.e_high));
    }
    Overrides {
        map: &spec.overrides,
    }
    .check()?;
    let e = spec.e_high;
    let ov = &spec.overrides;
    let mut net = Netlist {
        name: String::new(),
        ..Default::default()
    };
    let top = match spec.kind {
        CellKind::AmplifierStage { stage, inverting } => {
            let name = format!("amp_stage{stage}{}", if inverting { "_inv" } else { "" });
            net.define(amp_stage_def(&name, &amp_params(stage, inverting, ov)?));
            name
        }
        CellKind::AmplifierChain { stages, inverting } => {
            let name = format!("amp_chain{stages}{}", if inverting { "_inv" } else { "" });
            let mut b = DefBuilder::new(&name, &["x"]);
            let mut prev = "input:x".to_string();
            for s in 0..stages {
                let def = format!("amp_stage{s}{}", if inverting { "_inv" } else { "" });
                net.define(amp_stage_def(&def, &amp_params(s, inverting, ov)?));
                b.sub(&format!("s{s}"), &def, &[&prev]);
                prev = format!("s{s}.y");
            }
            b.output("y", &prev);
            net.define(b.finish());
            name
        }
        CellKind::AndGate => {
            net.define(and_def(&gate_params("and", e, ov)));
            "and_gate".into()
        }
        CellKind::Fanout => {
            net.define(fanout_def(&gate_params("fanout", e, ov)));
            "fanout".into()
        }
        CellKind::Latch => {
            net.define(latch_def(&gate_params("latch", e, ov)));
            "latch".into()
        }
        CellKind::DFlipFlop | CellKind::Counter4 => {
            net.define(and_def(&gate_params("and", e, ov)));
            net.define(fanout_def(&gate_params("fanout", e, ov)));
            net.define(latch_def(&gate_params("latch", e, ov)));
            net.define(dflipflop_def());
            if spec.kind == CellKind::Counter4 {
                net.define(counter_def());
                "counter4".into()
            } else {
                "dflipflop".into()
            }
        }
    };
    net.name = top.clone();
    let inputs: Vec<Source> = spec
        .kind
        .input_ports()
        .iter()
        .map(|p| Source::Input(p.to_string()))
        .collect();
    net.entries.push(Entry::new("cell", ComponentKind::Compound(top), inputs));
    for p in spec.kind.output_ports() {
        net.outputs.push(OutputDecl {
            name: p.to_string(),
            source: PortRef {
                instance: "cell".into(),
                port: PortId::Name(p.to_string()),
            },
        });
    }
    Ok(net)
}

/// Builds, flattens and reduces a cell.
pub fn reduce_cell(spec: &CellSpec) -> Result<ReducedSystem, CellError> {
    Ok(reduce(&flatten(&build_cell(spec)?)?)?)
}
