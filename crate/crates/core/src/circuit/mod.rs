//! Gate-level circuit IR with weighted depth and CNOT accounting.
//!
//! Elementary gates weigh 1. Opaque unitary blocks and logical
//! multi-target CSWAPs carry explicit depth and CNOT weights. Post-selection
//! and trace-out markers weigh nothing.
//!
//! Qubit `qubits[j]` of a gate corresponds to bit `j` of the gate matrix
//! index (little-endian), so for an opaque block the last listed qubit is the
//! most significant.

mod assemble;
mod cswap;
mod export;
mod mixer;

pub use assemble::{assemble_simulation_circuit, SynthesisError, SynthesizedCircuit};
pub use cswap::{
    cswap_elementary, ghz_preparation, lower_multi_target_cswap, multi_target_cswap, multi_target_cswap_cnot_weight,
    multi_target_cswap_depth_weight, CSWAP_CNOTS, CSWAP_CONTROL_CNOTS, CSWAP_DEPTH,
};
pub use export::{export_circuit, parse_native, read_sidecar, sidecar_json, ExportFormat, ParseError};
pub use mixer::{build_mixer, mixer_ancilla_count, mixer_gates, mixing_angle};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{CMatrix, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("qubit {qubit} used twice in one gate")]
    QubitCollision { qubit: usize },
    #[error("qubit {qubit} outside a {num_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("fanout mode needs {needed} control ancillas, got {got}")]
    MissingAncillas { needed: usize, got: usize },
    #[error("{0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("gate {kind} expects {expected} qubits, got {got}")]
    Arity {
        kind: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("opaque block '{0}' has no registered matrix")]
    UnknownMatrix(String),
    #[error("opaque block '{id}' matrix is {rows}x{cols}, expected {expected}x{expected}")]
    MatrixShape {
        id: String,
        rows: usize,
        cols: usize,
        expected: usize,
    },
    #[error("opaque weights must be at least 1")]
    ZeroWeight,
    #[error("invalid mixing weights: {0}")]
    InvalidWeights(String),
    #[error("gate {0} cannot be exported in this format")]
    UnsupportedGate(String),
}

/// How multi-qubit CSWAPs are controlled inside the mixer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixMode {
    /// One control ancilla per CSWAP, logical multi-target gate.
    Shared,
    /// One GHZ-entangled ancilla per swapped qubit pair.
    Fanout,
}

impl MixMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Shared => "shared",
            Self::Fanout => "fanout",
        }
    }
}

impl fmt::Display for MixMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MixMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "shared" => Ok(Self::Shared),
            "fanout" => Ok(Self::Fanout),
            other => Err(format!("unknown ancilla mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GateKind {
    H,
    T,
    Rz(f64),
    Ry(f64),
    /// `qubits = [control, target]`.
    Cnot,
    Opaque {
        id: String,
        depth_weight: u64,
        cnot_weight: u64,
    },
    /// `qubits = [control, a_0 … a_{n-1}, b_0 … b_{n-1}]`; swaps every
    /// `(a_i, b_i)` when the control is 1.
    MultiTargetCswap {
        pairs: usize,
    },
    PostSelect {
        outcome: u8,
    },
    TraceOut,
}

impl GateKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::H => "H",
            Self::T => "T",
            Self::Rz(_) => "RZ",
            Self::Ry(_) => "RY",
            Self::Cnot => "CNOT",
            Self::Opaque { .. } => "OPAQUE",
            Self::MultiTargetCswap { .. } => "MTCSWAP",
            Self::PostSelect { .. } => "POSTSELECT",
            Self::TraceOut => "TRACE_OUT",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
}

impl Gate {
    pub fn h(q: usize) -> Self {
        Self {
            kind: GateKind::H,
            qubits: vec![q],
        }
    }

    pub fn t(q: usize) -> Self {
        Self {
            kind: GateKind::T,
            qubits: vec![q],
        }
    }

    pub fn rz(theta: f64, q: usize) -> Self {
        Self {
            kind: GateKind::Rz(theta),
            qubits: vec![q],
        }
    }

    pub fn ry(theta: f64, q: usize) -> Self {
        Self {
            kind: GateKind::Ry(theta),
            qubits: vec![q],
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self {
            kind: GateKind::Cnot,
            qubits: vec![control, target],
        }
    }

    pub fn opaque(id: impl Into<String>, qubits: Vec<usize>, depth_weight: u64, cnot_weight: u64) -> Self {
        Self {
            kind: GateKind::Opaque {
                id: id.into(),
                depth_weight,
                cnot_weight,
            },
            qubits,
        }
    }

    pub fn postselect(q: usize, outcome: u8) -> Self {
        Self {
            kind: GateKind::PostSelect { outcome },
            qubits: vec![q],
        }
    }

    pub fn trace_out(qubits: Vec<usize>) -> Self {
        Self {
            kind: GateKind::TraceOut,
            qubits,
        }
    }

    pub fn depth_weight(&self) -> u64 {
        match &self.kind {
            GateKind::H | GateKind::T | GateKind::Rz(_) | GateKind::Ry(_) | GateKind::Cnot => 1,
            GateKind::Opaque { depth_weight, .. } => *depth_weight,
            GateKind::MultiTargetCswap { pairs } => multi_target_cswap_depth_weight(*pairs),
            GateKind::PostSelect { .. } | GateKind::TraceOut => 0,
        }
    }

    pub fn cnot_weight(&self) -> u64 {
        match &self.kind {
            GateKind::Cnot => 1,
            GateKind::Opaque { cnot_weight, .. } => *cnot_weight,
            GateKind::MultiTargetCswap { pairs } => multi_target_cswap_cnot_weight(*pairs),
            _ => 0,
        }
    }

    pub fn is_marker(&self) -> bool {
        matches!(self.kind, GateKind::PostSelect { .. } | GateKind::TraceOut)
    }

    /// Matrix of a fixed elementary gate (little-endian over `qubits`).
    pub fn elementary_matrix(&self) -> Option<CMatrix> {
        let z = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        Some(match &self.kind {
            GateKind::H => crate::dilation::hadamard(),
            GateKind::T => CMatrix::diag(&[one, C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]),
            GateKind::Rz(theta) => {
                CMatrix::diag(&[C64::from_polar(1.0, -theta / 2.0), C64::from_polar(1.0, theta / 2.0)])
            }
            GateKind::Ry(theta) => {
                let (s, c) = (theta / 2.0).sin_cos();
                CMatrix::from_real(2, 2, &[c, -s, s, c])
            }
            // Local index = control + 2·target.
            GateKind::Cnot => CMatrix::from_rows(&[
                vec![one, z, z, z],
                vec![z, z, z, one],
                vec![z, z, one, z],
                vec![z, one, z, z],
            ]),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Register {
    pub system: Vec<usize>,
    #[serde(default)]
    pub grouping: Vec<usize>,
    #[serde(default)]
    pub dilation: Vec<usize>,
}

impl Register {
    /// Qubits in block order: system, grouping, dilation ancilla.
    pub fn all_qubits(&self) -> Vec<usize> {
        let mut q = self.system.clone();
        q.extend(&self.grouping);
        q.extend(&self.dilation);
        q
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegisterMap {
    /// Register 0 is the primary output register. Every register's system
    /// qubits receive a copy of the input state.
    pub registers: Vec<Register>,
    pub mixer_ancillas: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    num_qubits: usize,
    gates: Vec<Gate>,
    registers: RegisterMap,
    matrices: BTreeMap<String, CMatrix>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Self {
        Self {
            num_qubits,
            gates: Vec::new(),
            registers: RegisterMap::default(),
            matrices: BTreeMap::new(),
        }
    }

    pub fn with_registers(num_qubits: usize, registers: RegisterMap) -> Self {
        Self {
            registers,
            ..Self::new(num_qubits)
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn registers(&self) -> &RegisterMap {
        &self.registers
    }

    pub fn matrices(&self) -> &BTreeMap<String, CMatrix> {
        &self.matrices
    }

    pub fn matrix(&self, id: &str) -> Option<&CMatrix> {
        self.matrices.get(id)
    }

    pub fn add_matrix(&mut self, id: impl Into<String>, m: CMatrix) {
        self.matrices.insert(id.into(), m);
    }

    fn check_gate(&self, gate: &Gate) -> Result<(), CircuitError> {
        for (i, &q) in gate.qubits.iter().enumerate() {
            if q >= self.num_qubits {
                return Err(CircuitError::QubitOutOfRange {
                    qubit: q,
                    num_qubits: self.num_qubits,
                });
            }
            if gate.qubits[..i].contains(&q) {
                return Err(CircuitError::QubitCollision { qubit: q });
            }
        }
        let arity = |kind: &'static str, expected: usize| {
            if gate.qubits.len() == expected {
                Ok(())
            } else {
                Err(CircuitError::Arity {
                    kind,
                    expected,
                    got: gate.qubits.len(),
                })
            }
        };
        match &gate.kind {
            GateKind::H | GateKind::T | GateKind::Rz(_) | GateKind::Ry(_) | GateKind::PostSelect { .. } => {
                arity(gate.kind.name(), 1)
            }
            GateKind::Cnot => arity("CNOT", 2),
            GateKind::MultiTargetCswap { pairs } => arity("MTCSWAP", 1 + 2 * pairs),
            GateKind::TraceOut => Ok(()),
            GateKind::Opaque {
                id,
                depth_weight,
                cnot_weight,
            } => {
                if *depth_weight == 0 || *cnot_weight == 0 {
                    return Err(CircuitError::ZeroWeight);
                }
                let m = self
                    .matrices
                    .get(id)
                    .ok_or_else(|| CircuitError::UnknownMatrix(id.clone()))?;
                let expected = 1usize << gate.qubits.len();
                if m.rows() != expected || m.cols() != expected {
                    return Err(CircuitError::MatrixShape {
                        id: id.clone(),
                        rows: m.rows(),
                        cols: m.cols(),
                        expected,
                    });
                }
                Ok(())
            }
        }
    }

    pub fn push(&mut self, gate: Gate) -> Result<(), CircuitError> {
        self.check_gate(&gate)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate>) -> Result<(), CircuitError> {
        for g in gates {
            self.push(g)?;
        }
        Ok(())
    }

    /// Weighted layered depth: a gate starts once all of its qubits are free
    /// and occupies them for its depth weight.
    pub fn depth(&self) -> u64 {
        let mut free_at = vec![0u64; self.num_qubits];
        let mut depth = 0;
        for g in &self.gates {
            let start = g.qubits.iter().map(|&q| free_at[q]).max().unwrap_or(0);
            let end = start + g.depth_weight();
            for &q in &g.qubits {
                free_at[q] = end;
            }
            depth = depth.max(end);
        }
        depth
    }

    pub fn cnot_count(&self) -> u64 {
        self.gates.iter().map(Gate::cnot_weight).sum()
    }

    /// Gate indices grouped into unweighted ASAP layers. Gates in one layer
    /// act on disjoint qubits.
    pub fn layers(&self) -> Vec<Vec<usize>> {
        let mut level = vec![0usize; self.num_qubits];
        let mut layers: Vec<Vec<usize>> = Vec::new();
        for (i, g) in self.gates.iter().enumerate() {
            let l = g.qubits.iter().map(|&q| level[q]).max().unwrap_or(0);
            for &q in &g.qubits {
                level[q] = l + 1;
            }
            if layers.len() <= l {
                layers.resize(l + 1, Vec::new());
            }
            layers[l].push(i);
        }
        layers
    }

    /// Same circuit with gates reordered; `order` must be a permutation.
    pub fn reordered(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.gates.len());
        Self {
            gates: order.iter().map(|&i| self.gates[i].clone()).collect(),
            ..self.clone()
        }
    }

    /// Replaces every logical multi-target CSWAP with its elementary
    /// fan-out construction.
    pub fn lowered(&self) -> Self {
        let mut gates = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            match g.kind {
                GateKind::MultiTargetCswap { pairs } => {
                    let control = g.qubits[0];
                    let pair_list: Vec<(usize, usize)> =
                        (0..pairs).map(|i| (g.qubits[1 + i], g.qubits[1 + pairs + i])).collect();
                    gates.extend(lower_multi_target_cswap(control, &pair_list));
                }
                _ => gates.push(g.clone()),
            }
        }
        Self { gates, ..self.clone() }
    }

    /// Count of CNOTs that touch `qubit`.
    pub fn cnots_touching(&self, qubit: usize) -> usize {
        self.gates
            .iter()
            .filter(|g| g.kind == GateKind::Cnot && g.qubits.contains(&qubit))
            .count()
    }

    /// Dense unitary of a circuit made only of elementary gates and
    /// logical CSWAPs. Intended for small verification circuits.
    pub fn unitary(&self) -> Option<CMatrix> {
        let dim = 1usize << self.num_qubits;
        let mut u = CMatrix::identity(dim);
        for g in &self.gates {
            let op = gate_full_matrix(g, self.num_qubits, &self.matrices)?;
            u = op * &u;
        }
        Some(u)
    }
}

/// Embeds a gate into the full `2^n` space (little-endian).
fn gate_full_matrix(g: &Gate, n: usize, matrices: &BTreeMap<String, CMatrix>) -> Option<CMatrix> {
    let dim = 1usize << n;
    let local = match &g.kind {
        GateKind::Opaque { id, .. } => matrices.get(id)?.clone(),
        GateKind::MultiTargetCswap { .. } => {
            let mut m = CMatrix::zeros(dim, dim);
            for i in 0..dim {
                m[(cswap_permute(i, &g.qubits), i)] = 1.0.into();
            }
            return Some(m);
        }
        _ => g.elementary_matrix()?,
    };
    let k = g.qubits.len();
    let mut m = CMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut lc = 0usize;
        for (j, &q) in g.qubits.iter().enumerate() {
            lc |= ((col >> q) & 1) << j;
        }
        for lr in 0..(1usize << k) {
            let amp = local[(lr, lc)];
            if amp.norm() == 0.0 {
                continue;
            }
            let mut row = col;
            for (j, &q) in g.qubits.iter().enumerate() {
                row = (row & !(1 << q)) | (((lr >> j) & 1) << q);
            }
            m[(row, col)] += amp;
        }
    }
    Some(m)
}

/// Basis permutation of a (multi-target) CSWAP given its qubit list
/// `[control, a…, b…]`, applied to a global index.
pub(crate) fn cswap_permute(index: usize, qubits: &[usize]) -> usize {
    let control = qubits[0];
    if (index >> control) & 1 == 0 {
        return index;
    }
    let pairs = (qubits.len() - 1) / 2;
    let mut out = index;
    for i in 0..pairs {
        let (a, b) = (qubits[1 + i], qubits[1 + pairs + i]);
        let (ba, bb) = ((index >> a) & 1, (index >> b) & 1);
        out = (out & !(1 << a) & !(1 << b)) | (bb << a) | (ba << b);
    }
    out
}
