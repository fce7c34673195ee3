//! Line-oriented optical circuit descriptions.
//!
//! ```text
//! paths a b c d          # declare spatial paths
//! bins 2                 # temporal bins per path (default 1)
//! param phi0 90          # default for a parameter reference
//! source bell paths=a,b  # or: source pair paths=a,b pols=H,V [bins=0,0]
//! stage prep             # subsequent elements belong to this stage
//! hwp path=a angle=22.5  # angles and phases in degrees
//! phase path=b phi=@phi0
//! pbs in=a,b out=c,d
//! detector name=left ports=c,d
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{evolve, FockError, FockState, Mode, ModeUniverse, OpticalElement, Pol};
use crate::qmath::cr;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("{} parse error(s): {}", .0.len(), .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Parse(Vec<Diagnostic>),
    #[error("stage `{stage}`: parameter `{name}` has no value")]
    MissingParameter { stage: String, name: String },
    #[error("stage `{stage}`: parameter `{name}` = {value} is not finite")]
    BadParameter { stage: String, name: String, value: f64 },
}

/// Numeric literal or named parameter reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ParamValue {
    Num(f64),
    Ref(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ElementTemplate {
    Bs50 { inputs: [String; 2], outputs: [String; 2] },
    Pbs { inputs: [String; 2], outputs: [String; 2] },
    Hwp { path: String, angle: ParamValue },
    Qwp { path: String, angle: ParamValue },
    Phase { path: String, phi: ParamValue },
    Delay { path: String, bins: i32 },
    Overlap { path: String, value: ParamValue },
    Swap { a: String, b: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementDecl {
    pub template: ElementTemplate,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub elements: Vec<ElementDecl>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SourceDecl {
    /// (|H⟩|H⟩ + |V⟩|V⟩)/√2 on two paths, bin 0.
    Bell { paths: [String; 2] },
    /// One photon per listed path.
    Pair { paths: [String; 2], pols: [Pol; 2], bins: [u32; 2] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub paths: Vec<String>,
    pub bins: u32,
    pub defaults: BTreeMap<String, f64>,
    pub source: SourceDecl,
    pub stages: Vec<Stage>,
    pub detectors: Vec<(String, Vec<String>)>,
}

/// A circuit with all parameters bound, ready to run.
#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub initial: FockState,
    pub elements: Vec<(String, OpticalElement)>,
    pub detectors: Vec<(String, Vec<String>)>,
}

impl Program {
    pub fn run(&self) -> Result<FockState, FockError> {
        let mut s = self.initial.clone();
        for (_, e) in &self.elements {
            s = evolve(&s, e)?;
        }
        Ok(s)
    }

    /// State after every element of the named stage (and all earlier ones).
    pub fn run_through(&self, stage: &str) -> Result<FockState, FockError> {
        let last = self.elements.iter().rposition(|(s, _)| s == stage);
        let mut s = self.initial.clone();
        if let Some(last) = last {
            for (_, e) in &self.elements[..=last] {
                s = evolve(&s, e)?;
            }
        }
        Ok(s)
    }

    pub fn detector(&self, name: &str) -> Option<&Vec<String>> {
        self.detectors.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }
}

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
                out.push(Token { text: &line[s..i], column: s + 1 });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token { text: &line[s..], column: s + 1 });
    }
    out
}

struct LineParser<'a> {
    line: usize,
    head: &'a Token<'a>,
    args: BTreeMap<&'a str, (&'a str, usize)>,
    diags: &'a mut Vec<Diagnostic>,
}

impl<'a> LineParser<'a> {
    fn error(&mut self, column: usize, message: String) {
        self.diags.push(Diagnostic { line: self.line, column, message });
    }

    fn get(&mut self, key: &str) -> Option<(&'a str, usize)> {
        let v = self.args.get(key).copied();
        if v.is_none() {
            let col = self.head.column;
            self.error(col, format!("`{}` requires `{key}=`", self.head.text));
        }
        v
    }

    fn list<const N: usize>(&mut self, key: &str) -> Option<([String; N], usize)> {
        let (v, col) = self.get(key)?;
        let parts: Vec<String> = v.split(',').map(|s| s.trim().to_string()).collect();
        if parts.len() != N || parts.iter().any(String::is_empty) {
            self.error(col, format!("`{key}` expects {N} comma-separated values, got `{v}`"));
            return None;
        }
        Some((parts.try_into().expect("length checked"), col))
    }

    fn value(&mut self, key: &str) -> Option<ParamValue> {
        let (v, col) = self.get(key)?;
        if let Some(name) = v.strip_prefix('@') {
            if name.is_empty() {
                self.error(col, "empty parameter reference".into());
                return None;
            }
            return Some(ParamValue::Ref(name.to_string()));
        }
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Some(ParamValue::Num(x)),
            _ => {
                self.error(col, format!("`{key}`: `{v}` is not a number"));
                None
            }
        }
    }

    fn check_keys(&mut self, allowed: &[&str]) {
        let extra: Vec<(String, usize)> = self
            .args
            .iter()
            .filter(|(k, _)| !allowed.contains(k))
            .map(|(k, (_, col))| (k.to_string(), *col))
            .collect();
        for (k, col) in extra {
            self.error(col, format!("unknown key `{k}` for `{}`", self.head.text));
        }
    }
}

/// Parses and validates a circuit description.
pub fn parse_circuit(text: &str) -> Result<CircuitSpec, CircuitError> {
    let mut diags = Vec::new();
    let mut paths: Vec<String> = Vec::new();
    let mut path_set = BTreeSet::new();
    let mut bins = 1u32;
    let mut defaults = BTreeMap::new();
    let mut source: Option<SourceDecl> = None;
    let mut stages: Vec<Stage> = Vec::new();
    let mut detectors: Vec<(String, Vec<String>)> = Vec::new();
    // (path, line, column) references checked after all declarations are read
    let mut refs: Vec<(String, usize, usize)> = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens = tokenize(content);
        let Some(head) = tokens.first() else { continue };
        let mut args = BTreeMap::new();
        let mut positional = Vec::new();
        for t in &tokens[1..] {
            match t.text.split_once('=') {
                Some((k, v)) => {
                    if args.insert(k, (v, t.column)).is_some() {
                        diags.push(Diagnostic { line: line_no, column: t.column, message: format!("duplicate key `{k}`") });
                    }
                }
                None => positional.push(t),
            }
        }
        let mut lp = LineParser { line: line_no, head, args, diags: &mut diags };
        let mut add_ref = |p: &str, col: usize| refs.push((p.to_string(), line_no, col));
        let keyword = head.text;
        match keyword {
            "paths" | "path" => {
                lp.check_keys(&[]);
                for t in positional.drain(..) {
                    if !path_set.insert(t.text.to_string()) {
                        lp.error(t.column, format!("path `{}` declared twice", t.text));
                    } else {
                        paths.push(t.text.to_string());
                    }
                }
            }
            "bins" => {
                lp.check_keys(&[]);
                match positional.first().map(|t| (t.text.parse::<u32>(), t.column)) {
                    Some((Ok(n), _)) if n >= 1 => bins = n,
                    Some((_, col)) => lp.error(col, "`bins` expects a positive integer".into()),
                    None => lp.error(head.column, "`bins` expects a positive integer".into()),
                }
                positional.clear();
            }
            "param" => {
                lp.check_keys(&[]);
                match positional.as_slice() {
                    [name, value] => match value.text.parse::<f64>() {
                        Ok(v) if v.is_finite() => {
                            defaults.insert(name.text.to_string(), v);
                        }
                        _ => lp.error(value.column, format!("`{}` is not a number", value.text)),
                    },
                    _ => lp.error(head.column, "`param` expects a name and a default value".into()),
                }
                positional.clear();
            }
            "source" => {
                let kind = positional.first().map(|t| (t.text, t.column));
                positional.clear();
                let decl = match kind {
                    Some(("bell", _)) => {
                        lp.check_keys(&["paths"]);
                        lp.list::<2>("paths").map(|(p, col)| {
                            p.iter().for_each(|x| add_ref(x, col));
                            SourceDecl::Bell { paths: p }
                        })
                    }
                    Some(("pair", _)) => {
                        lp.check_keys(&["paths", "pols", "bins"]);
                        let p = lp.list::<2>("paths");
                        let pols = lp.list::<2>("pols").and_then(|(v, col)| {
                            let parsed: Option<Vec<Pol>> = v
                                .iter()
                                .map(|s| match s.as_str() {
                                    "H" => Some(Pol::H),
                                    "V" => Some(Pol::V),
                                    _ => None,
                                })
                                .collect();
                            if parsed.is_none() {
                                lp.error(col, "polarizations must be H or V".into());
                            }
                            parsed.map(|v| [v[0], v[1]])
                        });
                        let tb = if lp.args.contains_key("bins") {
                            lp.list::<2>("bins").and_then(|(v, col)| match (v[0].parse(), v[1].parse()) {
                                (Ok(a), Ok(b)) => Some([a, b]),
                                _ => {
                                    lp.error(col, "bins must be non-negative integers".into());
                                    None
                                }
                            })
                        } else {
                            Some([0, 0])
                        };
                        match (p, pols, tb) {
                            (Some((p, col)), Some(pols), Some(bins)) => {
                                p.iter().for_each(|x| add_ref(x, col));
                                Some(SourceDecl::Pair { paths: p, pols, bins })
                            }
                            _ => None,
                        }
                    }
                    Some((other, col)) => {
                        lp.error(col, format!("unknown source kind `{other}`"));
                        None
                    }
                    None => {
                        lp.error(head.column, "`source` expects a kind (bell, pair)".into());
                        None
                    }
                };
                if let Some(d) = decl {
                    if source.is_some() {
                        lp.error(head.column, "more than one source declared".into());
                    } else {
                        source = Some(d);
                    }
                }
            }
            "stage" => {
                lp.check_keys(&[]);
                match positional.as_slice() {
                    [name] => {
                        if stages.iter().any(|s| s.name == name.text) {
                            lp.error(name.column, format!("duplicate stage `{}`", name.text));
                        }
                        stages.push(Stage { name: name.text.to_string(), elements: Vec::new() });
                    }
                    _ => lp.error(head.column, "`stage` expects one name".into()),
                }
                positional.clear();
            }
            "detector" => {
                lp.check_keys(&["name", "ports"]);
                let name = lp.get("name").map(|(n, _)| n.to_string());
                let ports = lp.get("ports").map(|(v, col)| (v.split(',').map(|s| s.trim().to_string()).collect::<Vec<_>>(), col));
                if let (Some(name), Some((ports, col))) = (name, ports) {
                    ports.iter().for_each(|x| add_ref(x, col));
                    if detectors.iter().any(|(n, _)| *n == name) {
                        lp.error(head.column, format!("duplicate detector `{name}`"));
                    }
                    detectors.push((name, ports));
                }
            }
            kind => {
                let template = match kind {
                    "bs" | "pbs" => {
                        lp.check_keys(&["in", "out"]);
                        match (lp.list::<2>("in"), lp.list::<2>("out")) {
                            (Some((i, ci)), Some((o, co))) => {
                                i.iter().for_each(|x| add_ref(x, ci));
                                o.iter().for_each(|x| add_ref(x, co));
                                Some(if kind == "bs" {
                                    ElementTemplate::Bs50 { inputs: i, outputs: o }
                                } else {
                                    ElementTemplate::Pbs { inputs: i, outputs: o }
                                })
                            }
                            _ => None,
                        }
                    }
                    "hwp" | "qwp" | "phase" | "overlap" => {
                        let key = match kind {
                            "phase" => "phi",
                            "overlap" => "value",
                            _ => "angle",
                        };
                        lp.check_keys(&["path", key]);
                        let path = lp.get("path");
                        let v = lp.value(key);
                        match (path, v) {
                            (Some((p, col)), Some(v)) => {
                                add_ref(p, col);
                                let path = p.to_string();
                                Some(match kind {
                                    "hwp" => ElementTemplate::Hwp { path, angle: v },
                                    "qwp" => ElementTemplate::Qwp { path, angle: v },
                                    "phase" => ElementTemplate::Phase { path, phi: v },
                                    _ => ElementTemplate::Overlap { path, value: v },
                                })
                            }
                            _ => None,
                        }
                    }
                    "delay" => {
                        lp.check_keys(&["path", "bins"]);
                        let path = lp.get("path");
                        let b = lp.get("bins").and_then(|(v, col)| match v.parse::<i32>() {
                            Ok(b) => Some(b),
                            Err(_) => {
                                lp.error(col, format!("`bins`: `{v}` is not an integer"));
                                None
                            }
                        });
                        match (path, b) {
                            (Some((p, col)), Some(b)) => {
                                add_ref(p, col);
                                Some(ElementTemplate::Delay { path: p.to_string(), bins: b })
                            }
                            _ => None,
                        }
                    }
                    "swap" => {
                        lp.check_keys(&["paths"]);
                        lp.list::<2>("paths").map(|([a, b], col)| {
                            add_ref(&a, col);
                            add_ref(&b, col);
                            ElementTemplate::Swap { a, b }
                        })
                    }
                    other => {
                        lp.error(head.column, format!("unknown element kind `{other}`"));
                        positional.clear();
                        None
                    }
                };
                if let Some(template) = template {
                    if stages.is_empty() {
                        stages.push(Stage { name: "main".into(), elements: Vec::new() });
                    }
                    stages.last_mut().expect("stage exists").elements.push(ElementDecl { template, line: line_no });
                }
            }
        }
        for t in positional {
            diags.push(Diagnostic { line: line_no, column: t.column, message: format!("unexpected token `{}`", t.text) });
        }
    }

    for (p, line, column) in refs {
        if !path_set.contains(&p) {
            diags.push(Diagnostic { line, column, message: format!("undeclared path `{p}`") });
        }
    }
    let last_line = text.lines().count().max(1);
    if source.is_none() {
        diags.push(Diagnostic { line: last_line, column: 1, message: "no source declared".into() });
    }
    if !diags.is_empty() {
        diags.sort_by_key(|d| (d.line, d.column));
        return Err(CircuitError::Parse(diags));
    }
    Ok(CircuitSpec { paths, bins, defaults, source: source.expect("checked"), stages, detectors })
}

impl CircuitSpec {
    pub fn stage(&self, name: &str) -> Option<&Stage> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn universe(&self) -> ModeUniverse {
        ModeUniverse::new(&self.paths, self.bins)
    }

    /// Parameter names referenced anywhere in the circuit.
    pub fn parameters(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for s in &self.stages {
            for e in &s.elements {
                if let ElementTemplate::Hwp { angle: ParamValue::Ref(n), .. }
                | ElementTemplate::Qwp { angle: ParamValue::Ref(n), .. }
                | ElementTemplate::Phase { phi: ParamValue::Ref(n), .. }
                | ElementTemplate::Overlap { value: ParamValue::Ref(n), .. } = &e.template
                {
                    out.insert(n.clone());
                }
            }
        }
        out
    }

    pub fn initial_state(&self) -> Result<FockState, FockError> {
        let uni = self.universe();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let terms = match &self.source {
            SourceDecl::Bell { paths } => vec![
                (vec![Mode::new(&paths[0], Pol::H, 0), Mode::new(&paths[1], Pol::H, 0)], cr(h)),
                (vec![Mode::new(&paths[0], Pol::V, 0), Mode::new(&paths[1], Pol::V, 0)], cr(h)),
            ],
            SourceDecl::Pair { paths, pols, bins } => vec![(
                vec![Mode::new(&paths[0], pols[0], bins[0]), Mode::new(&paths[1], pols[1], bins[1])],
                cr(1.0),
            )],
        };
        FockState::from_terms(uni, terms)
    }

    /// Binds parameters (degrees for angles and phases) and returns a runnable program.
    pub fn instantiate(&self, params: &[(String, f64)]) -> Result<Program, FockError> {
        let mut values = self.defaults.clone();
        for (k, v) in params {
            values.insert(k.clone(), *v);
        }
        let resolve = |stage: &str, v: &ParamValue| -> Result<f64, CircuitError> {
            match v {
                ParamValue::Num(x) => Ok(*x),
                ParamValue::Ref(name) => {
                    let x = *values
                        .get(name)
                        .ok_or_else(|| CircuitError::MissingParameter { stage: stage.into(), name: name.clone() })?;
                    if !x.is_finite() {
                        return Err(CircuitError::BadParameter { stage: stage.into(), name: name.clone(), value: x });
                    }
                    Ok(x)
                }
            }
        };
        let mut elements = Vec::new();
        for stage in &self.stages {
            for decl in &stage.elements {
                let s = stage.name.as_str();
                let e = match &decl.template {
                    ElementTemplate::Bs50 { inputs, outputs } => {
                        OpticalElement::Bs50 { inputs: inputs.clone(), outputs: outputs.clone() }
                    }
                    ElementTemplate::Pbs { inputs, outputs } => {
                        OpticalElement::Pbs { inputs: inputs.clone(), outputs: outputs.clone() }
                    }
                    ElementTemplate::Hwp { path, angle } => {
                        OpticalElement::Hwp { path: path.clone(), theta: resolve(s, angle)?.to_radians() }
                    }
                    ElementTemplate::Qwp { path, angle } => {
                        OpticalElement::Qwp { path: path.clone(), theta: resolve(s, angle)?.to_radians() }
                    }
                    ElementTemplate::Phase { path, phi } => {
                        OpticalElement::Phase { path: path.clone(), phi: resolve(s, phi)?.to_radians() }
                    }
                    ElementTemplate::Delay { path, bins } => OpticalElement::Delay { path: path.clone(), bins: *bins },
                    ElementTemplate::Overlap { path, value } => {
                        OpticalElement::Overlap { path: path.clone(), value: resolve(s, value)? }
                    }
                    ElementTemplate::Swap { a, b } => OpticalElement::SwapPaths { a: a.clone(), b: b.clone() },
                };
                elements.push((stage.name.clone(), e));
            }
        }
        Ok(Program { initial: self.initial_state()?, elements, detectors: self.detectors.clone() })
    }
}
