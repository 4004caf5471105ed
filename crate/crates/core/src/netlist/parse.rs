//! Line-oriented netlist text format.
//!
//! ```text
//! netlist demo
//! compound stage {
//!   comp bs beamsplitter theta=0.3 in=input:x,vacuum
//!   comp r resonator delta=50 chi=-0.5 kappa=25,25 in=bs.1
//!   comp loss output in=bs.0
//!   output y from r.1
//! } ports in=x out=y
//! comp s stage in=input:drive
//! output y from s.y
//! ```
//!
//! `#` starts a comment. Sources are `vacuum`, `input:<name>` or
//! `<instance>.<port>`; the instance is everything before the last dot.

use std::collections::HashSet;

use super::{
    CompoundDef, ComponentKind, Coupling, Entry, InputKind, Netlist, NetlistError, OutputDecl,
    PortId, PortRef, ResonatorParams, Source, DEFAULT_PORT_PHASE,
};
use crate::C64;

const BUILTIN_KINDS: [&str; 7] = [
    "resonator",
    "beamsplitter",
    "phase",
    "displacement",
    "identity",
    "input",
    "output",
];

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token {
                    text: &line[s..i],
                    column: s + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: &line[s..],
            column: s + 1,
        });
    }
    out
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> NetlistError {
    NetlistError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty()
        && s
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'))
        && !s.starts_with('.')
        && !s.ends_with('.')
}

fn check_name(line: usize, tok: &Token<'_>) -> Result<String, NetlistError> {
    if is_identifier(tok.text) {
        Ok(tok.text.to_string())
    } else {
        Err(syntax(line, tok.column, format!("invalid name `{}`", tok.text)))
    }
}

fn parse_port_ref(line: usize, tok: &Token<'_>, text: &str) -> Result<PortRef, NetlistError> {
    let (inst, port) = text
        .rsplit_once('.')
        .ok_or_else(|| syntax(line, tok.column, format!("expected <instance>.<port>, got `{text}`")))?;
    if !is_identifier(inst) || port.is_empty() {
        return Err(syntax(line, tok.column, format!("bad port reference `{text}`")));
    }
    let port = match port.parse::<usize>() {
        Ok(i) => PortId::Index(i),
        Err(_) if is_identifier(port) => PortId::Name(port.to_string()),
        Err(_) => return Err(syntax(line, tok.column, format!("bad port `{port}`"))),
    };
    Ok(PortRef {
        instance: inst.to_string(),
        port,
    })
}

fn parse_source(line: usize, tok: &Token<'_>, text: &str) -> Result<Source, NetlistError> {
    if text == "vacuum" {
        Ok(Source::Vacuum)
    } else if let Some(name) = text.strip_prefix("input:") {
        if is_identifier(name) && !name.contains('.') {
            Ok(Source::Input(name.to_string()))
        } else {
            Err(syntax(line, tok.column, format!("bad input name `{name}`")))
        }
    } else {
        parse_port_ref(line, tok, text).map(Source::Port)
    }
}

struct Params<'a> {
    line: usize,
    instance: String,
    pairs: Vec<(&'a str, &'a str, usize)>,
}

impl<'a> Params<'a> {
    fn err(&self, message: impl Into<String>) -> NetlistError {
        NetlistError::Parameter {
            line: self.line,
            instance: self.instance.clone(),
            message: message.into(),
        }
    }

    fn take(&mut self, key: &str) -> Option<&'a str> {
        let pos = self.pairs.iter().position(|(k, _, _)| *k == key)?;
        Some(self.pairs.remove(pos).1)
    }

    fn number(&self, key: &str, s: &str) -> Result<f64, NetlistError> {
        let v: f64 = s
            .parse()
            .map_err(|_| self.err(format!("`{key}` expects a number, got `{s}`")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.err(format!("`{key}` must be finite")))
        }
    }

    fn required(&mut self, key: &str) -> Result<f64, NetlistError> {
        let s = self
            .take(key)
            .ok_or_else(|| self.err(format!("missing `{key}`")))?;
        self.number(key, s)
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>, NetlistError> {
        match self.take(key) {
            None => Ok(None),
            Some(s) => s
                .split(',')
                .map(|p| self.number(key, p))
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }

    fn complex(&mut self, key: &str) -> Result<Option<C64>, NetlistError> {
        match self.list(key)? {
            None => Ok(None),
            Some(v) if v.len() == 1 => Ok(Some(C64::new(v[0], 0.0))),
            Some(v) if v.len() == 2 => Ok(Some(C64::new(v[0], v[1]))),
            Some(_) => Err(self.err(format!("`{key}` expects re or re,im"))),
        }
    }

    fn finish(self) -> Result<(), NetlistError> {
        match self.pairs.first() {
            None => Ok(()),
            Some((k, _, _)) => Err(self.err(format!("unknown parameter `{k}`"))),
        }
    }
}

fn parse_kind(kind: &str, params: &mut Params<'_>) -> Result<Option<ComponentKind>, NetlistError> {
    let k = match kind {
        "resonator" => {
            let detuning = params.required("delta")?;
            let kerr = params.required("chi")?;
            let rates = params
                .list("kappa")?
                .ok_or_else(|| params.err("missing `kappa`"))?;
            let phases = params.list("psi")?;
            if let Some(ph) = &phases {
                if ph.len() != rates.len() {
                    return Err(params.err("`psi` and `kappa` lengths differ"));
                }
            }
            let couplings = rates
                .iter()
                .enumerate()
                .map(|(i, &rate)| Coupling {
                    rate,
                    phase: phases.as_ref().map_or(DEFAULT_PORT_PHASE, |p| p[i]),
                })
                .collect();
            let p = ResonatorParams {
                detuning,
                kerr,
                couplings,
            };
            p.validate().map_err(|m| params.err(m))?;
            ComponentKind::Resonator(p)
        }
        "beamsplitter" => ComponentKind::BeamSplitter {
            theta: params.required("theta")?,
        },
        "phase" => ComponentKind::PhaseShifter {
            phi: params.required("phi")?,
        },
        "displacement" => ComponentKind::Displacement {
            beta: params
                .complex("beta")?
                .ok_or_else(|| params.err("missing `beta`"))?,
        },
        "identity" => ComponentKind::Identity,
        "output" => ComponentKind::Output,
        "input" => {
            let amp = params.complex("amp")?;
            let drive = params.take("drive");
            match (amp, drive) {
                (Some(_), Some(_)) => return Err(params.err("`amp` and `drive` are exclusive")),
                (Some(b), None) => ComponentKind::Input(InputKind::Coherent(b)),
                (None, Some(d)) => {
                    if !is_identifier(d) || d.contains('.') {
                        return Err(params.err(format!("bad drive name `{d}`")));
                    }
                    ComponentKind::Input(InputKind::Signal(d.to_string()))
                }
                (None, None) => ComponentKind::Input(InputKind::Vacuum),
            }
        }
        _ => return Ok(None),
    };
    Ok(Some(k))
}

struct Scope {
    entries: Vec<Entry>,
    outputs: Vec<OutputDecl>,
    names: HashSet<String>,
}

impl Scope {
    fn new() -> Self {
        Scope {
            entries: Vec::new(),
            outputs: Vec::new(),
            names: HashSet::new(),
        }
    }
}

fn parse_comp(
    line: usize,
    toks: &[Token<'_>],
    compounds: &[String],
) -> Result<Entry, NetlistError> {
    if toks.len() < 3 {
        let col = toks.last().map_or(1, |t| t.column + t.text.len());
        return Err(syntax(line, col, "expected `comp <name> <kind> ...`"));
    }
    let name = check_name(line, &toks[1])?;
    let kind_tok = &toks[2];
    let mut params = Params {
        line,
        instance: name.clone(),
        pairs: Vec::new(),
    };
    let mut sources: Option<Vec<Source>> = None;
    for tok in &toks[3..] {
        let (k, v) = tok
            .text
            .split_once('=')
            .ok_or_else(|| syntax(line, tok.column, format!("expected key=value, got `{}`", tok.text)))?;
        if k == "in" {
            if sources.is_some() {
                return Err(NetlistError::DuplicateSource {
                    line,
                    instance: name,
                });
            }
            let list = if v.is_empty() {
                Vec::new()
            } else {
                v.split(',')
                    .map(|s| parse_source(line, tok, s))
                    .collect::<Result<Vec<_>, _>>()?
            };
            sources = Some(list);
        } else {
            if params.pairs.iter().any(|(pk, _, _)| *pk == k) {
                return Err(syntax(line, tok.column, format!("parameter `{k}` given twice")));
            }
            params.pairs.push((k, v, tok.column));
        }
    }
    let kind = match parse_kind(kind_tok.text, &mut params)? {
        Some(k) => k,
        None if is_identifier(kind_tok.text) => {
            // Compound kinds take no parameters; with parameters present the
            // kind is most likely a misspelt primitive.
            if !params.pairs.is_empty() && !compounds.iter().any(|c| c == kind_tok.text) {
                return Err(NetlistError::UnknownKind {
                    line,
                    kind: kind_tok.text.to_string(),
                });
            }
            // May name a compound defined further down; resolved after parsing.
            ComponentKind::Compound(kind_tok.text.to_string())
        }
        None => {
            return Err(NetlistError::UnknownKind {
                line,
                kind: kind_tok.text.to_string(),
            })
        }
    };
    params.finish()?;
    Ok(Entry {
        name,
        kind,
        sources: sources.unwrap_or_default(),
        line,
    })
}

fn parse_output(line: usize, toks: &[Token<'_>]) -> Result<OutputDecl, NetlistError> {
    if toks.len() != 4 || toks[2].text != "from" {
        let col = toks.get(2).map_or(1, |t| t.column);
        return Err(syntax(line, col, "expected `output <name> from <instance>.<port>`"));
    }
    let name = check_name(line, &toks[1])?;
    let source = parse_port_ref(line, &toks[3], toks[3].text)?;
    Ok(OutputDecl { name, source })
}

fn port_list(line: usize, tok: &Token<'_>, v: &str) -> Result<Vec<String>, NetlistError> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    if let Ok(n) = v.parse::<usize>() {
        return Ok((0..n).map(|i| i.to_string()).collect());
    }
    let mut seen = HashSet::new();
    v.split(',')
        .map(|p| {
            if !is_identifier(p) || p.contains('.') {
                Err(syntax(line, tok.column, format!("bad port name `{p}`")))
            } else if !seen.insert(p) {
                Err(syntax(line, tok.column, format!("port `{p}` listed twice")))
            } else {
                Ok(p.to_string())
            }
        })
        .collect()
}

/// Parses the text format into a [`Netlist`].
///
/// Every compound kind named by an instance must be defined somewhere in the
/// text. Cycles among compound definitions are reported by [`super::flatten`].
pub fn parse_netlist(text: &str) -> Result<Netlist, NetlistError> {
    let mut net = Netlist {
        name: "top".into(),
        ..Default::default()
    };
    let mut top = Scope::new();
    let mut open: Option<(String, usize, Scope)> = None;
    let mut defined: Vec<String> = Vec::new();
    let mut seen_header = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let toks = tokenize(content);
        let Some(first) = toks.first() else { continue };
        match first.text {
            "netlist" => {
                if seen_header || open.is_some() || !top.entries.is_empty() {
                    return Err(syntax(line, first.column, "`netlist` header must come first"));
                }
                if toks.len() != 2 {
                    return Err(syntax(line, first.column, "expected `netlist <name>`"));
                }
                net.name = check_name(line, &toks[1])?;
                seen_header = true;
            }
            "compound" => {
                if open.is_some() {
                    return Err(syntax(line, first.column, "compound definitions cannot nest"));
                }
                if toks.len() != 3 || toks[2].text != "{" {
                    return Err(syntax(line, first.column, "expected `compound <name> {`"));
                }
                let name = check_name(line, &toks[1])?;
                if defined.contains(&name) {
                    return Err(NetlistError::DuplicateInstance { line, name });
                }
                if BUILTIN_KINDS.contains(&name.as_str()) {
                    return Err(syntax(line, toks[1].column, format!("`{name}` is a built-in kind")));
                }
                defined.push(name.clone());
                open = Some((name, line, Scope::new()));
            }
            "}" => {
                let Some((name, start, scope)) = open.take() else {
                    return Err(syntax(line, first.column, "`}` without an open compound"));
                };
                let mut inputs = Vec::new();
                let mut outs: Option<Vec<String>> = None;
                let rest = &toks[1..];
                if rest.first().map(|t| t.text) != Some("ports") && !rest.is_empty() {
                    return Err(syntax(line, rest[0].column, "expected `ports`"));
                }
                for tok in rest.iter().skip(1) {
                    match tok.text.split_once('=') {
                        Some(("in", v)) => inputs = port_list(line, tok, v)?,
                        Some(("out", v)) => outs = Some(port_list(line, tok, v)?),
                        _ => {
                            return Err(syntax(
                                line,
                                tok.column,
                                format!("expected in=... or out=..., got `{}`", tok.text),
                            ))
                        }
                    }
                }
                let declared: Vec<String> = scope.outputs.iter().map(|o| o.name.clone()).collect();
                if let Some(outs) = outs {
                    let mut sorted_a = outs.clone();
                    let mut sorted_b = declared.clone();
                    sorted_a.sort();
                    sorted_b.sort();
                    if sorted_a != sorted_b {
                        return Err(syntax(
                            line,
                            first.column,
                            format!(
                                "compound `{name}` declares out={} but defines outputs {}",
                                outs.join(","),
                                declared.join(",")
                            ),
                        ));
                    }
                }
                net.compounds.push(CompoundDef {
                    name,
                    inputs,
                    entries: scope.entries,
                    outputs: scope.outputs,
                    line: start,
                });
            }
            "comp" => {
                let entry = parse_comp(line, &toks, &defined)?;
                let scope = match open.as_mut() {
                    Some((_, _, s)) => s,
                    None => &mut top,
                };
                if !scope.names.insert(entry.name.clone()) {
                    return Err(NetlistError::DuplicateInstance {
                        line,
                        name: entry.name,
                    });
                }
                scope.entries.push(entry);
            }
            "output" => {
                let decl = parse_output(line, &toks)?;
                let scope = match open.as_mut() {
                    Some((_, _, s)) => s,
                    None => &mut top,
                };
                if scope.outputs.iter().any(|o| o.name == decl.name) {
                    return Err(NetlistError::DuplicateInstance {
                        line,
                        name: decl.name,
                    });
                }
                scope.outputs.push(decl);
            }
            other => {
                return Err(syntax(line, first.column, format!("unexpected `{other}`")));
            }
        }
    }
    if let Some((name, start, _)) = open {
        return Err(syntax(start, 1, format!("compound `{name}` is never closed")));
    }

    for entry in net
        .compounds
        .iter()
        .flat_map(|c| c.entries.iter())
        .chain(top.entries.iter())
    {
        if let ComponentKind::Compound(k) = &entry.kind {
            if !defined.contains(k) {
                return Err(NetlistError::UnknownKind {
                    line: entry.line,
                    kind: k.clone(),
                });
            }
        }
    }
    net.entries = top.entries;
    net.outputs = top.outputs;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEMO: &str = "\
netlist demo
compound stage {
  comp bs beamsplitter theta=0.3 in=input:x,vacuum
  comp r resonator delta=50 chi=-0.5 kappa=25,25 in=bs.1
  comp loss output in=bs.0
  output y from r.1
} ports in=x out=y
comp s stage in=input:drive   # trailing comment
output y from s.y
";

    #[test]
    fn parses_demo() {
        let n = parse_netlist(DEMO).unwrap();
        assert_eq!(n.name, "demo");
        assert_eq!(n.compounds.len(), 1);
        let c = &n.compounds[0];
        assert_eq!(c.inputs, vec!["x"]);
        assert_eq!(c.entries.len(), 3);
        assert_eq!(c.outputs[0].source.to_string(), "r.1");
        assert_eq!(n.entries[0].kind, ComponentKind::Compound("stage".into()));
        assert_eq!(n.outputs[0].source.port, PortId::Name("y".into()));
    }

    #[test]
    fn round_trips_demo() {
        let n = parse_netlist(DEMO).unwrap();
        let again = parse_netlist(&n.to_text()).unwrap();
        assert_eq!(strip_lines(n), strip_lines(again));
    }

    fn strip_lines(mut n: Netlist) -> Netlist {
        for c in &mut n.compounds {
            c.line = 0;
            for e in &mut c.entries {
                e.line = 0;
            }
        }
        for e in &mut n.entries {
            e.line = 0;
        }
        n
    }

    #[test]
    fn reports_unknown_kind_with_line() {
        let err = parse_netlist("comp a beamspliter theta=1\ncomp b widget\n").unwrap_err();
        assert_eq!(
            err,
            NetlistError::UnknownKind {
                line: 1,
                kind: "beamspliter".into()
            }
        );
    }

    #[test]
    fn reports_duplicate_sources() {
        let err = parse_netlist("comp a phase phi=1 in=vacuum in=vacuum\n").unwrap_err();
        assert!(matches!(err, NetlistError::DuplicateSource { line: 1, .. }));
    }

    #[test]
    fn reports_duplicate_instance() {
        let err = parse_netlist("comp a identity\ncomp a identity\n").unwrap_err();
        assert!(matches!(err, NetlistError::DuplicateInstance { line: 2, .. }));
    }

    #[test]
    fn rejects_bad_parameters() {
        for bad in [
            "comp r resonator delta=1 chi=0 kappa=0",
            "comp r resonator delta=1 chi=0 kappa=-1,2",
            "comp r resonator delta=1 kappa=2",
            "comp b beamsplitter theta=abc",
            "comp b beamsplitter theta=1 extra=2",
            "comp r resonator delta=1 chi=0 kappa=1,2 psi=0",
        ] {
            assert!(
                matches!(parse_netlist(bad), Err(NetlistError::Parameter { .. })),
                "{bad}"
            );
        }
    }

    #[test]
    fn syntax_error_has_column() {
        let err = parse_netlist("comp a phase phi=1 in=vacuum junk\n").unwrap_err();
        assert_eq!(
            err,
            NetlistError::Syntax {
                line: 1,
                column: 30,
                message: "expected key=value, got `junk`".into()
            }
        );
    }

    #[test]
    fn resonator_phases_and_defaults() {
        let n = parse_netlist("comp r resonator delta=1 chi=-2 kappa=3,4 psi=0,1\ncomp q resonator delta=1 chi=0 kappa=3").unwrap();
        let ComponentKind::Resonator(p) = &n.entries[0].kind else { panic!() };
        assert_eq!(p.couplings[1].phase, 1.0);
        let ComponentKind::Resonator(q) = &n.entries[1].kind else { panic!() };
        assert_eq!(q.couplings[0].phase, DEFAULT_PORT_PHASE);
        assert_eq!(q.total_decay(), 3.0);
    }

    #[test]
    fn input_kinds() {
        let n = parse_netlist("comp a input\ncomp b input amp=2,1\ncomp c input drive=clk\n").unwrap();
        assert_eq!(n.entries[0].kind, ComponentKind::Input(InputKind::Vacuum));
        assert_eq!(
            n.entries[1].kind,
            ComponentKind::Input(InputKind::Coherent(C64::new(2.0, 1.0)))
        );
        assert_eq!(
            n.entries[2].kind,
            ComponentKind::Input(InputKind::Signal("clk".into()))
        );
    }

    #[test]
    fn compound_output_list_must_match() {
        let err = parse_netlist("compound c {\n comp i identity in=input:a\n output q from i.0\n} ports in=a out=z\n")
            .unwrap_err();
        assert!(matches!(err, NetlistError::Syntax { line: 4, .. }));
    }

    #[test]
    fn undefined_compound_kind() {
        let err = parse_netlist("comp a gadget\n").unwrap_err();
        assert!(matches!(err, NetlistError::UnknownKind { line: 1, .. }));
    }
}
