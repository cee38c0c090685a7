//! Text serialization: the native line format and an OpenQASM 2 lowering.
//!
//! Native text:
//!
//! ```text
//! QUBITS 4
//! REGISTER 0 system=q0,q1 grouping= dilation=q2
//! MIXER q3
//! GATE H q3
//! GATE RZ q0 theta=7.8539816339744828e-1
//! GATE OPAQUE q0 q1 q2 id=b0_sznagy # depth_weight=32,cnot_weight=32
//! GATE POSTSELECT q2 outcome=0
//! GATE TRACE_OUT q1 q2 q3
//! ```
//!
//! Opaque matrices live in a JSON sidecar keyed by id.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use super::{Circuit, CircuitError, Gate, GateKind, Register, RegisterMap};
use crate::formats::{matrix_from_json, matrix_to_json, FormatError, JsonMatrix};
use crate::linalg::CMatrix;

/// Widest opaque block the QASM exporter will declare.
pub const QASM_MAX_OPAQUE_QUBITS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    NativeText,
    QasmElementary,
}

impl FromStr for ExportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "native-text" | "native" => Ok(Self::NativeText),
            "qasm-elementary" | "qasm" => Ok(Self::QasmElementary),
            other => Err(format!("unknown circuit format '{other}'")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Invalid { line: usize, source: CircuitError },
    #[error(transparent)]
    Sidecar(#[from] FormatError),
}

fn qubit_list(qs: &[usize]) -> String {
    qs.iter().map(|q| format!("q{q}")).collect::<Vec<_>>().join(",")
}

fn native_gate_line(g: &Gate) -> String {
    let mut line = format!("GATE {}", g.kind.name());
    for q in &g.qubits {
        let _ = write!(line, " q{q}");
    }
    match &g.kind {
        GateKind::Rz(theta) | GateKind::Ry(theta) => {
            let _ = write!(line, " theta={theta:.16e}");
        }
        GateKind::Opaque {
            id,
            depth_weight,
            cnot_weight,
        } => {
            let _ = write!(line, " id={id} # depth_weight={depth_weight},cnot_weight={cnot_weight}");
        }
        GateKind::MultiTargetCswap { .. } => {
            let _ = write!(
                line,
                " # depth_weight={},cnot_weight={}",
                g.depth_weight(),
                g.cnot_weight()
            );
        }
        GateKind::PostSelect { outcome } => {
            let _ = write!(line, " outcome={outcome}");
        }
        _ => {}
    }
    line
}

fn native_text(c: &Circuit) -> String {
    let mut out = format!("QUBITS {}\n", c.num_qubits());
    for (i, r) in c.registers().registers.iter().enumerate() {
        let _ = writeln!(
            out,
            "REGISTER {i} system={} grouping={} dilation={}",
            qubit_list(&r.system),
            qubit_list(&r.grouping),
            qubit_list(&r.dilation)
        );
    }
    if !c.registers().mixer_ancillas.is_empty() {
        let _ = writeln!(out, "MIXER {}", qubit_list(&c.registers().mixer_ancillas));
    }
    for g in c.gates() {
        out.push_str(&native_gate_line(g));
        out.push('\n');
    }
    out
}

fn qasm_gate(g: &Gate, creg: &mut usize, out: &mut String) -> Result<(), CircuitError> {
    let args = g.qubits.iter().map(|q| format!("q[{q}]")).collect::<Vec<_>>().join(",");
    match &g.kind {
        GateKind::H => writeln!(out, "h {args};"),
        GateKind::T => writeln!(out, "t {args};"),
        GateKind::Rz(theta) => writeln!(out, "rz({theta:.16e}) {args};"),
        GateKind::Ry(theta) => writeln!(out, "ry({theta:.16e}) {args};"),
        GateKind::Cnot => writeln!(out, "cx {args};"),
        GateKind::Opaque { id, .. } => writeln!(out, "{id} {args};"),
        GateKind::PostSelect { outcome } => {
            let r = writeln!(out, "measure {args} -> c[{creg}]; // postselect {outcome}");
            *creg += 1;
            r
        }
        GateKind::TraceOut => writeln!(out, "// trace_out {args}"),
        GateKind::MultiTargetCswap { .. } => unreachable!("lowered before export"),
    }
    .expect("writing to a String");
    Ok(())
}

fn qasm_text(c: &Circuit) -> Result<String, CircuitError> {
    let lowered = c.lowered();
    let mut declared = BTreeMap::new();
    for g in lowered.gates() {
        if let GateKind::Opaque { id, .. } = &g.kind {
            if g.qubits.len() > QASM_MAX_OPAQUE_QUBITS {
                return Err(CircuitError::UnsupportedGate(format!(
                    "{id} ({} qubits)",
                    g.qubits.len()
                )));
            }
            declared.entry(id.clone()).or_insert(g.qubits.len());
        }
    }
    let postselects = lowered
        .gates()
        .iter()
        .filter(|g| matches!(g.kind, GateKind::PostSelect { .. }))
        .count();

    let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    for (id, k) in &declared {
        let params = (0..*k).map(|i| format!("a{i}")).collect::<Vec<_>>().join(",");
        let _ = writeln!(out, "opaque {id} {params};");
    }
    let _ = writeln!(out, "qreg q[{}];", lowered.num_qubits());
    if postselects > 0 {
        let _ = writeln!(out, "creg c[{postselects}];");
    }
    let mut creg = 0;
    for g in lowered.gates() {
        qasm_gate(g, &mut creg, &mut out)?;
    }
    Ok(out)
}

pub fn export_circuit(c: &Circuit, format: ExportFormat) -> Result<String, CircuitError> {
    match format {
        ExportFormat::NativeText => Ok(native_text(c)),
        ExportFormat::QasmElementary => qasm_text(c),
    }
}

/// JSON object mapping every opaque id to its matrix.
pub fn sidecar_json(c: &Circuit) -> String {
    let map: BTreeMap<&String, JsonMatrix> = c.matrices().iter().map(|(k, m)| (k, matrix_to_json(m))).collect();
    serde_json::to_string(&map).expect("serializable")
}

pub fn read_sidecar(text: &str) -> Result<BTreeMap<String, CMatrix>, FormatError> {
    let map: BTreeMap<String, JsonMatrix> = serde_json::from_str(text)?;
    map.into_iter().map(|(k, v)| Ok((k, matrix_from_json(&v)?))).collect()
}

fn parse_qubit(tok: &str) -> Option<usize> {
    tok.strip_prefix('q')?.parse().ok()
}

fn parse_qubit_list(s: &str) -> Option<Vec<usize>> {
    if s.is_empty() {
        return Some(Vec::new());
    }
    s.split(',').map(parse_qubit).collect()
}

fn parse_weights(comment: &str) -> Option<(u64, u64)> {
    let mut depth = None;
    let mut cnot = None;
    for part in comment.split(',') {
        let (k, v) = part.trim().split_once('=')?;
        match k {
            "depth_weight" => depth = v.parse().ok(),
            "cnot_weight" => cnot = v.parse().ok(),
            _ => return None,
        }
    }
    Some((depth?, cnot?))
}

fn parse_gate(body: &str, comment: Option<&str>) -> Result<Gate, String> {
    let mut toks = body.split_whitespace();
    let kind_tok = toks.next().ok_or("missing gate kind")?;
    let mut qubits = Vec::new();
    let mut attrs: BTreeMap<&str, &str> = BTreeMap::new();
    for tok in toks {
        if let Some((k, v)) = tok.split_once('=') {
            attrs.insert(k, v);
        } else {
            qubits.push(parse_qubit(tok).ok_or_else(|| format!("bad qubit '{tok}'"))?);
        }
    }
    let theta = || -> Result<f64, String> {
        attrs
            .get("theta")
            .ok_or("missing theta")?
            .parse()
            .map_err(|e| format!("bad theta: {e}"))
    };
    let weights = || {
        comment
            .and_then(parse_weights)
            .ok_or("missing or bad weight annotation")
    };
    let kind = match kind_tok {
        "H" => GateKind::H,
        "T" => GateKind::T,
        "RZ" => GateKind::Rz(theta()?),
        "RY" => GateKind::Ry(theta()?),
        "CNOT" => GateKind::Cnot,
        "OPAQUE" => {
            let (depth_weight, cnot_weight) = weights()?;
            GateKind::Opaque {
                id: attrs.get("id").ok_or("missing id")?.to_string(),
                depth_weight,
                cnot_weight,
            }
        }
        "MTCSWAP" => {
            if qubits.len() < 3 || qubits.len() % 2 == 0 {
                return Err(format!("MTCSWAP needs 1 + 2k qubits, got {}", qubits.len()));
            }
            let gate = GateKind::MultiTargetCswap {
                pairs: (qubits.len() - 1) / 2,
            };
            if let Some((d, c)) = comment.and_then(parse_weights) {
                let probe = Gate {
                    kind: gate.clone(),
                    qubits: qubits.clone(),
                };
                if (d, c) != (probe.depth_weight(), probe.cnot_weight()) {
                    return Err("MTCSWAP weight annotation disagrees with its arity".into());
                }
            }
            gate
        }
        "POSTSELECT" => GateKind::PostSelect {
            outcome: attrs
                .get("outcome")
                .ok_or("missing outcome")?
                .parse()
                .map_err(|e| format!("bad outcome: {e}"))?,
        },
        "TRACE_OUT" => GateKind::TraceOut,
        other => return Err(format!("unknown gate kind '{other}'")),
    };
    Ok(Gate { kind, qubits })
}

/// Parses native text. `matrices` supplies the opaque blocks (usually read
/// from the sidecar).
pub fn parse_native(text: &str, matrices: BTreeMap<String, CMatrix>) -> Result<Circuit, ParseError> {
    let syntax = |line: usize, msg: String| ParseError::Syntax { line, msg };
    let mut circuit: Option<Circuit> = None;
    let mut registers = RegisterMap::default();
    let mut gates = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let (body, comment) = match raw.split_once('#') {
            Some((b, c)) => (b.trim(), Some(c.trim())),
            None => (raw.trim(), None),
        };
        if body.is_empty() {
            continue;
        }
        let (head, rest) = body.split_once(' ').unwrap_or((body, ""));
        match head {
            "QUBITS" => {
                let n: usize = rest
                    .trim()
                    .parse()
                    .map_err(|e| syntax(line_no, format!("bad qubit count: {e}")))?;
                circuit = Some(Circuit::new(n));
            }
            "REGISTER" => {
                let mut reg = Register::default();
                let mut toks = rest.split_whitespace();
                let idx: usize = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| syntax(line_no, "missing register index".into()))?;
                if idx != registers.registers.len() {
                    return Err(syntax(line_no, format!("register {idx} out of order")));
                }
                for tok in toks {
                    let (k, v) = tok
                        .split_once('=')
                        .ok_or_else(|| syntax(line_no, format!("bad register field '{tok}'")))?;
                    let list = parse_qubit_list(v).ok_or_else(|| syntax(line_no, format!("bad qubit list '{v}'")))?;
                    match k {
                        "system" => reg.system = list,
                        "grouping" => reg.grouping = list,
                        "dilation" => reg.dilation = list,
                        _ => return Err(syntax(line_no, format!("unknown register field '{k}'"))),
                    }
                }
                registers.registers.push(reg);
            }
            "MIXER" => {
                registers.mixer_ancillas =
                    parse_qubit_list(rest.trim()).ok_or_else(|| syntax(line_no, "bad mixer list".into()))?;
            }
            "GATE" => gates.push((line_no, parse_gate(rest, comment).map_err(|m| syntax(line_no, m))?)),
            other => return Err(syntax(line_no, format!("unknown directive '{other}'"))),
        }
    }
    let c = circuit.ok_or_else(|| syntax(0, "missing QUBITS line".into()))?;
    let mut c = Circuit {
        registers,
        matrices,
        ..c
    };
    for (line, g) in gates {
        c.push(g).map_err(|source| ParseError::Invalid { line, source })?;
    }
    Ok(c)
}
