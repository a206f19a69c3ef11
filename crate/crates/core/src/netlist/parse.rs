//! Line-oriented netlist reader.
//!
//! ```text
//! # comment
//! PORT  <name> <n+> <n->
//! R     <name> <n+> <n-> <ohms>
//! C     <name> <n+> <n-> <farads>
//! L     <name> <n+> <n-> <henries>
//! D     <name> <anode> <cathode>
//! RC    <name> <n+> <n-> <ohms> <farads>
//! PWL   <name> <n+> <n-> <i0> <v0> <i1> <v1> ...
//! XFMR  <group> <name> <n+> <n-> <turns>
//! FORM  <element> Z|Y
//! EXCITE <port> V|I
//! GROUND <node>
//! ```
//!
//! Numbers accept SI suffixes (`f p n u m k meg g t`, case-insensitive).

use std::collections::{HashMap, HashSet};

use crate::elements::{Form, PwlCurve};
use crate::error::ParseError;

use super::{Branch, BranchKind, ElementKind, Excitation, Netlist};

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

impl Token<'_> {
    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(self.line, self.column, message)
    }
}

fn tokenize(line_no: usize, raw: &str) -> Vec<Token<'_>> {
    let body = match raw.find('#') {
        Some(k) => &raw[..k],
        None => raw,
    };
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (idx, ch) in body.char_indices().chain(std::iter::once((body.len(), ' '))) {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token {
                    text: &body[s..idx],
                    line: line_no,
                    column: body[..s].chars().count() + 1,
                });
            }
        } else if start.is_none() {
            start = Some(idx);
        }
    }
    out
}

/// Decimal number with an optional SI suffix.
pub fn parse_number(text: &str) -> Option<f64> {
    let lower = text.to_ascii_lowercase();
    let suffixes: [(&str, i32); 9] = [
        ("meg", 6),
        ("t", 12),
        ("g", 9),
        ("k", 3),
        ("m", -3),
        ("u", -6),
        ("n", -9),
        ("p", -12),
        ("f", -15),
    ];
    let (mantissa, shift) = suffixes
        .iter()
        .find_map(|(s, k)| lower.strip_suffix(s).map(|m| (m, *k)))
        .unwrap_or((lower.as_str(), 0));
    // Reject things like "inf", "nan" and a bare "e".
    if mantissa.is_empty() || mantissa.chars().any(|c| c.is_ascii_alphabetic() && c != 'e') {
        return None;
    }
    // Fold the suffix into the exponent so the result is correctly rounded.
    let (base, exp) = match mantissa.split_once('e') {
        Some((b, e)) => (b, e.parse::<i32>().ok()?),
        None => (mantissa, 0),
    };
    if base.is_empty() || base.contains('e') {
        return None;
    }
    let v: f64 = format!("{base}e{}", exp.checked_add(shift)?).parse().ok()?;
    v.is_finite().then_some(v)
}

struct Builder {
    nodes: Vec<String>,
    node_index: HashMap<String, usize>,
    branches: Vec<Branch>,
    names: HashMap<String, (usize, usize)>,
    ground: Option<(String, usize, usize)>,
    form_pins: Vec<(String, Form, usize, usize)>,
    excite_pins: Vec<(String, Excitation, usize, usize)>,
}

impl Builder {
    fn node(&mut self, name: &str) -> usize {
        if let Some(&k) = self.node_index.get(name) {
            return k;
        }
        self.nodes.push(name.to_string());
        self.node_index.insert(name.to_string(), self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    fn claim_name(&mut self, tok: &Token) -> Result<(), ParseError> {
        if let Some((line, _)) = self.names.get(tok.text) {
            return Err(tok.err(format!(
                "duplicate name '{}' (first defined on line {line})",
                tok.text
            )));
        }
        self.names.insert(tok.text.to_string(), (tok.line, tok.column));
        Ok(())
    }

    fn branch(&mut self, name: &Token, pos: &Token, neg: &Token, kind: BranchKind) -> Result<(), ParseError> {
        self.claim_name(name)?;
        if pos.text == neg.text {
            return Err(neg.err(format!(
                "branch '{}' connects node '{}' to itself",
                name.text, pos.text
            )));
        }
        let (p, n) = (self.node(pos.text), self.node(neg.text));
        self.branches.push(Branch {
            name: name.text.to_string(),
            kind,
            pos: p,
            neg: n,
            line: name.line,
        });
        Ok(())
    }
}

fn number(tok: &Token) -> Result<f64, ParseError> {
    parse_number(tok.text).ok_or_else(|| tok.err(format!("malformed number '{}'", tok.text)))
}

fn nonneg(tok: &Token, what: &str) -> Result<f64, ParseError> {
    let v = number(tok)?;
    if v < 0.0 {
        return Err(tok.err(format!("{what} must be nonnegative, got {v}")));
    }
    Ok(v)
}

fn arity(tokens: &[Token], want: usize, usage: &str) -> Result<(), ParseError> {
    if tokens.len() == want {
        return Ok(());
    }
    let at = tokens.get(want).unwrap_or(&tokens[tokens.len() - 1]);
    Err(at.err(format!(
        "expected {} field(s) after '{}', got {}: usage `{usage}`",
        want - 1,
        tokens[0].text,
        tokens.len() - 1
    )))
}

/// Parses and structurally validates a netlist.
pub fn parse_netlist(text: &str) -> Result<Netlist, ParseError> {
    let mut b = Builder {
        nodes: Vec::new(),
        node_index: HashMap::new(),
        branches: Vec::new(),
        names: HashMap::new(),
        ground: None,
        form_pins: Vec::new(),
        excite_pins: Vec::new(),
    };

    for (idx, raw) in text.lines().enumerate() {
        let tokens = tokenize(idx + 1, raw);
        let Some(head) = tokens.first() else {
            continue;
        };
        match head.text.to_ascii_uppercase().as_str() {
            "PORT" => {
                arity(&tokens, 4, "PORT <name> <n+> <n->")?;
                b.branch(&tokens[1], &tokens[2], &tokens[3], BranchKind::Port)?;
            }
            "R" => {
                arity(&tokens, 5, "R <name> <n+> <n-> <ohms>")?;
                let ohms = nonneg(&tokens[4], "resistance")?;
                b.branch(&tokens[1], &tokens[2], &tokens[3], element(ElementKind::Resistor { ohms }))?;
            }
            "C" => {
                arity(&tokens, 5, "C <name> <n+> <n-> <farads>")?;
                let farads = nonneg(&tokens[4], "capacitance")?;
                b.branch(&tokens[1], &tokens[2], &tokens[3], element(ElementKind::Capacitor { farads }))?;
            }
            "L" => {
                arity(&tokens, 5, "L <name> <n+> <n-> <henries>")?;
                let henries = nonneg(&tokens[4], "inductance")?;
                b.branch(&tokens[1], &tokens[2], &tokens[3], element(ElementKind::Inductor { henries }))?;
            }
            "D" => {
                arity(&tokens, 4, "D <name> <anode> <cathode>")?;
                b.branch(&tokens[1], &tokens[2], &tokens[3], element(ElementKind::Diode))?;
            }
            "RC" => {
                arity(&tokens, 6, "RC <name> <n+> <n-> <ohms> <farads>")?;
                let ohms = nonneg(&tokens[4], "resistance")?;
                let farads = nonneg(&tokens[5], "capacitance")?;
                b.branch(
                    &tokens[1],
                    &tokens[2],
                    &tokens[3],
                    element(ElementKind::ParallelRc { ohms, farads }),
                )?;
            }
            "PWL" => {
                if tokens.len() < 8 || (tokens.len() - 4) % 2 != 0 {
                    let at = tokens.last().unwrap_or(head);
                    return Err(at.err(
                        "usage `PWL <name> <n+> <n-> <i0> <v0> <i1> <v1> ...` (at least two points)",
                    ));
                }
                let coords = tokens[4..].iter().map(number).collect::<Result<Vec<_>, _>>()?;
                let curve = PwlCurve::from_flat(&coords).map_err(|e| tokens[4].err(e.to_string()))?;
                b.branch(&tokens[1], &tokens[2], &tokens[3], element(ElementKind::Pwl(curve)))?;
            }
            "XFMR" => {
                arity(&tokens, 6, "XFMR <group> <name> <n+> <n-> <turns>")?;
                let turns = number(&tokens[5])?;
                if turns == 0.0 {
                    return Err(tokens[5].err("winding turns must be nonzero"));
                }
                let group = tokens[1].text.to_string();
                b.branch(&tokens[2], &tokens[3], &tokens[4], BranchKind::Winding { group, turns })?;
            }
            "FORM" => {
                arity(&tokens, 3, "FORM <element> Z|Y")?;
                let form = match tokens[2].text.to_ascii_uppercase().as_str() {
                    "Z" => Form::Impedance,
                    "Y" => Form::Admittance,
                    _ => return Err(tokens[2].err(format!("expected Z or Y, got '{}'", tokens[2].text))),
                };
                b.form_pins.push((tokens[1].text.to_string(), form, tokens[1].line, tokens[1].column));
            }
            "EXCITE" => {
                arity(&tokens, 3, "EXCITE <port> V|I")?;
                let kind = match tokens[2].text.to_ascii_uppercase().as_str() {
                    "V" => Excitation::Voltage,
                    "I" => Excitation::Current,
                    _ => return Err(tokens[2].err(format!("expected V or I, got '{}'", tokens[2].text))),
                };
                b.excite_pins.push((tokens[1].text.to_string(), kind, tokens[1].line, tokens[1].column));
            }
            "GROUND" => {
                arity(&tokens, 2, "GROUND <node>")?;
                if b.ground.is_some() {
                    return Err(head.err("GROUND given more than once"));
                }
                // Resolved once all nodes are known.
                b.ground = Some((tokens[1].text.to_string(), tokens[1].line, tokens[1].column));
            }
            other => return Err(head.err(format!("unknown directive '{other}'"))),
        }
    }

    finish(b)
}

fn element(kind: ElementKind) -> BranchKind {
    BranchKind::Element(kind)
}

fn finish(b: Builder) -> Result<Netlist, ParseError> {
    if b.branches.is_empty() {
        return Err(ParseError::new(1, 1, "no branches"));
    }

    let ground = match &b.ground {
        None => None,
        Some((name, line, column)) => {
            let (line, column) = (*line, *column);
            match b.nodes.iter().position(|n| n == name) {
                Some(k) => Some(k),
                None => {
                    return Err(ParseError::new(
                        line,
                        column,
                        format!("ground node '{name}' is not used by any branch"),
                    ))
                }
            }
        }
    };

    // Every node needs at least two branch terminals.
    let mut degree = vec![0usize; b.nodes.len()];
    for br in &b.branches {
        degree[br.pos] += 1;
        degree[br.neg] += 1;
    }
    if let Some(k) = degree.iter().position(|&d| d < 2) {
        let br = b.branches.iter().find(|br| br.pos == k || br.neg == k).expect("node has a branch");
        return Err(ParseError::new(
            br.line,
            1,
            format!("dangling node '{}' (only branch '{}' touches it)", b.nodes[k], br.name),
        ));
    }

    // Winding groups need two windings.
    let mut groups: HashMap<&str, Vec<&Branch>> = HashMap::new();
    for br in &b.branches {
        if let BranchKind::Winding { group, .. } = &br.kind {
            groups.entry(group.as_str()).or_default().push(br);
        }
    }
    let mut group_names: Vec<_> = groups.keys().copied().collect();
    group_names.sort();
    for g in group_names {
        let members = &groups[g];
        if members.len() < 2 {
            return Err(ParseError::new(
                members[0].line,
                1,
                format!("transformer group '{g}' has a single winding"),
            ));
        }
    }

    // Connected once magnetic coupling is counted as a connection.
    let mut parent: Vec<usize> = (0..b.nodes.len()).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        let mut y = x;
        while parent[y] != r {
            let next = parent[y];
            parent[y] = r;
            y = next;
        }
        r
    }
    let union = |parent: &mut Vec<usize>, a: usize, c: usize| {
        let (ra, rc) = (find(parent, a), find(parent, c));
        if ra != rc {
            parent[ra.max(rc)] = ra.min(rc);
        }
    };
    for br in &b.branches {
        union(&mut parent, br.pos, br.neg);
    }
    for members in groups.values() {
        for w in members.windows(2) {
            union(&mut parent, w[0].pos, w[1].pos);
        }
    }
    let root = find(&mut parent, 0);
    if let Some(k) = (0..b.nodes.len()).find(|&k| find(&mut parent, k) != root) {
        let br = b.branches.iter().find(|br| br.pos == k || br.neg == k).expect("node has a branch");
        return Err(ParseError::new(
            br.line,
            1,
            format!("node '{}' is not connected to the rest of the circuit", b.nodes[k]),
        ));
    }

    let mut seen_forms = HashSet::new();
    let mut form_pins = Vec::new();
    for (name, form, line, column) in b.form_pins {
        let kind = match b.branches.iter().find(|br| br.name == name).map(|br| &br.kind) {
            Some(BranchKind::Element(k)) => k,
            Some(_) => return Err(ParseError::new(line, column, format!("'{name}' is not an element"))),
            None => return Err(ParseError::new(line, column, format!("unknown element '{name}'"))),
        };
        if !kind.admits(form) {
            return Err(ParseError::new(
                line,
                column,
                format!("element '{name}' ({}) cannot take {form} form", kind.keyword()),
            ));
        }
        if !seen_forms.insert(name.clone()) {
            return Err(ParseError::new(line, column, format!("FORM for '{name}' given more than once")));
        }
        form_pins.push((name, form));
    }

    let mut seen_ports = HashSet::new();
    let mut excite_pins = Vec::new();
    for (name, kind, line, column) in b.excite_pins {
        match b.branches.iter().find(|br| br.name == name).map(|br| &br.kind) {
            Some(BranchKind::Port) => {}
            Some(_) => return Err(ParseError::new(line, column, format!("'{name}' is not a port"))),
            None => return Err(ParseError::new(line, column, format!("unknown port '{name}'"))),
        }
        if !seen_ports.insert(name.clone()) {
            return Err(ParseError::new(line, column, format!("EXCITE for '{name}' given more than once")));
        }
        excite_pins.push((name, kind));
    }

    Ok(Netlist {
        nodes: b.nodes,
        branches: b.branches,
        ground,
        form_pins,
        excite_pins,
    })
}
