use std::collections::{HashMap, HashSet};

use super::{
    ComponentKind, Consumer, Entry, ExternalInput, ExternalOutput, FlatCircuit, FlatComponent,
    InputKind, Netlist, NetlistError, OutputDecl, PortAddr, PortId, Producer, Source,
};

enum Slot {
    Component(usize),
    Input(usize),
    Sink,
    Child(usize),
}

struct Scope<'a> {
    prefix: String,
    entries: &'a [Entry],
    outputs: &'a [OutputDecl],
    /// Compound input port names; `None` at top level.
    def_inputs: Option<&'a [String]>,
    /// Parent scope and the index of the instantiating entry in it.
    parent: Option<(usize, usize)>,
    slots: Vec<Slot>,
    index: HashMap<&'a str, usize>,
}

struct Flattener<'a> {
    net: &'a Netlist,
    scopes: Vec<Scope<'a>>,
    flat: FlatCircuit,
    used: HashSet<Producer>,
    input_names: HashSet<String>,
}

fn check_acyclic(net: &Netlist) -> Result<(), NetlistError> {
    // 0 = unvisited, 1 = on stack, 2 = done
    fn visit<'a>(
        net: &'a Netlist,
        name: &'a str,
        state: &mut HashMap<&'a str, u8>,
        stack: &mut Vec<&'a str>,
    ) -> Result<(), NetlistError> {
        match state.get(name) {
            Some(2) => return Ok(()),
            Some(1) => {
                let start = stack.iter().position(|s| *s == name).unwrap_or(0);
                let mut cycle: Vec<String> = stack[start..].iter().map(|s| s.to_string()).collect();
                cycle.push(name.to_string());
                return Err(NetlistError::CyclicCompound(cycle));
            }
            _ => {}
        }
        let Some(def) = net.compound(name) else {
            return Err(NetlistError::UnknownKind {
                line: 0,
                kind: name.to_string(),
            });
        };
        state.insert(name, 1);
        stack.push(name);
        for e in &def.entries {
            if let ComponentKind::Compound(k) = &e.kind {
                visit(net, k, state, stack)?;
            }
        }
        stack.pop();
        state.insert(name, 2);
        Ok(())
    }
    let mut state = HashMap::new();
    let mut stack = Vec::new();
    for def in &net.compounds {
        visit(net, &def.name, &mut state, &mut stack)?;
    }
    for e in &net.entries {
        if let ComponentKind::Compound(k) = &e.kind {
            visit(net, k, &mut state, &mut stack)?;
        }
    }
    Ok(())
}

impl<'a> Flattener<'a> {
    fn build_scope(
        &mut self,
        prefix: String,
        entries: &'a [Entry],
        outputs: &'a [OutputDecl],
        def_inputs: Option<&'a [String]>,
        parent: Option<(usize, usize)>,
    ) -> Result<usize, NetlistError> {
        let id = self.scopes.len();
        let mut index = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            if index.insert(e.name.as_str(), i).is_some() {
                return Err(NetlistError::DuplicateInstance {
                    line: e.line,
                    name: format!("{prefix}{}", e.name),
                });
            }
        }
        self.scopes.push(Scope {
            prefix: prefix.clone(),
            entries,
            outputs,
            def_inputs,
            parent,
            slots: Vec::with_capacity(entries.len()),
            index,
        });
        for (i, e) in entries.iter().enumerate() {
            let path = format!("{prefix}{}", e.name);
            let slot = match &e.kind {
                ComponentKind::Compound(k) => {
                    let def = self.net.compound(k).ok_or_else(|| NetlistError::UnknownKind {
                        line: e.line,
                        kind: k.clone(),
                    })?;
                    if e.sources.len() > def.inputs.len() {
                        return Err(NetlistError::PortArity {
                            instance: path,
                            got: e.sources.len(),
                            ports: def.inputs.len(),
                        });
                    }
                    let child = self.build_scope(
                        format!("{path}."),
                        &def.entries,
                        &def.outputs,
                        Some(&def.inputs),
                        Some((id, i)),
                    )?;
                    Slot::Child(child)
                }
                ComponentKind::Input(kind) => {
                    if !e.sources.is_empty() {
                        return Err(NetlistError::PortArity {
                            instance: path,
                            got: e.sources.len(),
                            ports: 0,
                        });
                    }
                    Slot::Input(self.add_input(path, kind.clone())?)
                }
                ComponentKind::Output => {
                    if e.sources.len() > 1 {
                        return Err(NetlistError::PortArity {
                            instance: path,
                            got: e.sources.len(),
                            ports: 1,
                        });
                    }
                    Slot::Sink
                }
                kind => {
                    let prim = kind.as_primitive().expect("non-primitive kinds handled above");
                    let (n_in, _) = prim.arity();
                    if e.sources.len() > n_in {
                        return Err(NetlistError::PortArity {
                            instance: path,
                            got: e.sources.len(),
                            ports: n_in,
                        });
                    }
                    self.flat.components.push(FlatComponent {
                        name: path,
                        kind: prim,
                    });
                    Slot::Component(self.flat.components.len() - 1)
                }
            };
            self.scopes[id].slots.push(slot);
        }
        Ok(id)
    }

    fn add_input(&mut self, name: String, kind: InputKind) -> Result<usize, NetlistError> {
        if !self.input_names.insert(name.clone()) {
            return Err(NetlistError::DuplicateInput(name));
        }
        self.flat.inputs.push(ExternalInput { name, kind });
        Ok(self.flat.inputs.len() - 1)
    }

    fn resolve(
        &mut self,
        scope: usize,
        source: &Source,
        consumer: &str,
    ) -> Result<Producer, NetlistError> {
        match source {
            Source::Vacuum => Ok(Producer::Input(
                self.add_input(consumer.to_string(), InputKind::Vacuum)?,
            )),
            Source::Input(name) => {
                let s = &self.scopes[scope];
                match (s.def_inputs, s.parent) {
                    (Some(ports), Some((parent, entry))) => {
                        let idx = ports.iter().position(|p| p == name).ok_or_else(|| {
                            NetlistError::UnknownCompoundInput {
                                compound: s.prefix.trim_end_matches('.').to_string(),
                                port: name.clone(),
                            }
                        })?;
                        match self.scopes[parent].entries[entry].sources.get(idx) {
                            Some(src) => {
                                let src = src.clone();
                                self.resolve(parent, &src, consumer)
                            }
                            None => self.resolve(parent, &Source::Vacuum, consumer),
                        }
                    }
                    _ => {
                        if self.input_names.contains(name.as_str()) {
                            let existing = self.flat.inputs.iter().any(|i| {
                                i.name == *name && i.kind == InputKind::Signal(name.clone())
                            });
                            return Err(if existing {
                                NetlistError::FanOut(format!("input:{name}"))
                            } else {
                                NetlistError::DuplicateInput(name.clone())
                            });
                        }
                        Ok(Producer::Input(
                            self.add_input(name.clone(), InputKind::Signal(name.clone()))?,
                        ))
                    }
                }
            }
            Source::Port(r) => {
                let s = &self.scopes[scope];
                let full = format!("{}{}", s.prefix, r.instance);
                let &ei = s
                    .index
                    .get(r.instance.as_str())
                    .ok_or_else(|| NetlistError::UnknownInstance(full.clone()))?;
                let unknown_port = || NetlistError::UnknownPort {
                    instance: full.clone(),
                    port: r.port.to_string(),
                };
                match s.slots[ei] {
                    Slot::Component(ci) => {
                        let (_, n_out) = self.flat.components[ci].kind.arity();
                        match r.port {
                            PortId::Index(p) if p < n_out => {
                                Ok(Producer::Component(PortAddr { component: ci, port: p }))
                            }
                            _ => Err(unknown_port()),
                        }
                    }
                    Slot::Input(ii) => match r.port {
                        PortId::Index(0) => Ok(Producer::Input(ii)),
                        _ => Err(unknown_port()),
                    },
                    Slot::Sink => Err(unknown_port()),
                    Slot::Child(child) => {
                        let outs = self.scopes[child].outputs;
                        let decl = match &r.port {
                            PortId::Name(n) => outs.iter().find(|o| o.name == *n),
                            PortId::Index(i) => outs.get(*i),
                        }
                        .ok_or_else(unknown_port)?;
                        self.resolve(child, &Source::Port(decl.source.clone()), consumer)
                    }
                }
            }
        }
    }

    fn describe(&self, p: Producer) -> String {
        match p {
            Producer::Component(a) => format!("{}.{}", self.flat.components[a.component].name, a.port),
            Producer::Input(i) => self.flat.inputs[i].name.clone(),
        }
    }

    fn link(&mut self, p: Producer, c: Consumer) -> Result<(), NetlistError> {
        if !self.used.insert(p) {
            return Err(NetlistError::FanOut(self.describe(p)));
        }
        self.flat.links.push((p, c));
        Ok(())
    }

    fn wire_scope(&mut self, scope: usize) -> Result<(), NetlistError> {
        let entries = self.scopes[scope].entries;
        let prefix = self.scopes[scope].prefix.clone();
        for (i, e) in entries.iter().enumerate() {
            match self.scopes[scope].slots[i] {
                Slot::Component(ci) => {
                    let (n_in, _) = self.flat.components[ci].kind.arity();
                    for port in 0..n_in {
                        let consumer = format!("{prefix}{}.in{port}", e.name);
                        let src = e.sources.get(port).cloned().unwrap_or(Source::Vacuum);
                        let p = self.resolve(scope, &src, &consumer)?;
                        self.link(p, Consumer::Component(PortAddr { component: ci, port }))?;
                    }
                }
                Slot::Sink => {
                    let name = format!("{prefix}{}", e.name);
                    let src = e.sources.first().cloned().unwrap_or(Source::Vacuum);
                    let p = self.resolve(scope, &src, &format!("{name}.in0"))?;
                    self.flat.outputs.push(ExternalOutput { name });
                    let oi = self.flat.outputs.len() - 1;
                    self.link(p, Consumer::Output(oi))?;
                }
                Slot::Child(child) => self.wire_scope(child)?,
                Slot::Input(_) => {}
            }
        }
        Ok(())
    }
}

/// Expands every compound instance into primitives.
///
/// Component and output names are hierarchical paths joined with `.`.
/// Unconnected input ports are fed by fresh vacuum inputs named after the
/// consuming port (`<path>.in<k>`); `input:<name>` at top level becomes a
/// signal input called `<name>`. Fails on cyclic compound definitions,
/// dangling references, compound port arity mismatches and fan-out.
pub fn flatten(net: &Netlist) -> Result<FlatCircuit, NetlistError> {
    check_acyclic(net)?;
    let mut f = Flattener {
        net,
        scopes: Vec::new(),
        flat: FlatCircuit::default(),
        used: HashSet::new(),
        input_names: HashSet::new(),
    };
    let top = f.build_scope(String::new(), &net.entries, &net.outputs, None, None)?;
    f.wire_scope(top)?;
    let mut declared = HashSet::new();
    for decl in &net.outputs {
        if !declared.insert(decl.name.as_str())
            || f.flat.outputs.iter().any(|o| o.name == decl.name)
        {
            return Err(NetlistError::DuplicateInstance {
                line: 0,
                name: decl.name.clone(),
            });
        }
        let p = f.resolve(top, &Source::Port(decl.source.clone()), &decl.name)?;
        f.flat.outputs.push(ExternalOutput {
            name: decl.name.clone(),
        });
        let oi = f.flat.outputs.len() - 1;
        f.link(p, Consumer::Output(oi))?;
    }
    Ok(f.flat)
}
