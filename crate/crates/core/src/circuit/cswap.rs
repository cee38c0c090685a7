//! Controlled-SWAP constructions.

use std::f64::consts::FRAC_PI_4;

use super::{CircuitError, Gate, GateKind, MixMode};
use crate::linalg::ceil_log2;

pub const CSWAP_CNOTS: u64 = 9;
pub const CSWAP_DEPTH: u64 = 14;
pub const CSWAP_CONTROL_CNOTS: usize = 3;

/// `6⌈log₂ n_t⌉ + 14`.
pub fn multi_target_cswap_depth_weight(pairs: usize) -> u64 {
    6 * ceil_log2(pairs.max(1)) as u64 + CSWAP_DEPTH
}

/// Six pair-local CNOTs per pair plus three fan-out CNOT trees of
/// `2n_t − 1` CNOTs each.
pub fn multi_target_cswap_cnot_weight(pairs: usize) -> u64 {
    let n = pairs.max(1) as u64;
    6 * n + 3 * (2 * n - 1)
}

/// One step of the CSWAP template: either a pair-local gate or a CNOT
/// from the control onto `a` or `b`.
#[derive(Clone, Copy)]
enum Step {
    Cx(Wire, Wire),
    H(Wire),
    Rz(f64, Wire),
    ControlT,
    ControlCx(Wire),
}

#[derive(Clone, Copy)]
enum Wire {
    A,
    B,
}

/// Conjugating by `CNOT(b→a)` and `H(b)` turns CSWAP into a CCZ on
/// `(c, a, b)`, written here as a phase polynomial over `c, a, c⊕a,
/// b, c⊕b, a⊕b, c⊕a⊕b`.
const TEMPLATE: [Step; 18] = [
    Step::Cx(Wire::B, Wire::A),
    Step::H(Wire::B),
    Step::ControlT,
    Step::Rz(FRAC_PI_4, Wire::A),
    Step::Rz(FRAC_PI_4, Wire::B),
    Step::ControlCx(Wire::A),
    Step::Rz(-FRAC_PI_4, Wire::A),
    Step::Cx(Wire::A, Wire::B),
    Step::Rz(FRAC_PI_4, Wire::B),
    Step::ControlCx(Wire::A),
    Step::Cx(Wire::A, Wire::B),
    Step::Rz(-FRAC_PI_4, Wire::B),
    Step::ControlCx(Wire::B),
    Step::Cx(Wire::A, Wire::B),
    Step::Rz(-FRAC_PI_4, Wire::B),
    Step::Cx(Wire::A, Wire::B),
    Step::H(Wire::B),
    Step::Cx(Wire::B, Wire::A),
];

fn wire(w: Wire, a: usize, b: usize) -> usize {
    match w {
        Wire::A => a,
        Wire::B => b,
    }
}

/// Exact Fredkin gate from 9 CNOTs and single-qubit gates; depth 14 with
/// three CNOTs on the control.
pub fn cswap_elementary(control: usize, a: usize, b: usize) -> Vec<Gate> {
    TEMPLATE
        .iter()
        .map(|step| match *step {
            Step::Cx(x, y) => Gate::cnot(wire(x, a, b), wire(y, a, b)),
            Step::H(x) => Gate::h(wire(x, a, b)),
            Step::Rz(theta, x) => Gate::rz(theta, wire(x, a, b)),
            Step::ControlT => Gate::t(control),
            Step::ControlCx(x) => Gate::cnot(control, wire(x, a, b)),
        })
        .collect()
}

fn check_distinct(qubits: &[usize]) -> Result<(), CircuitError> {
    for (i, q) in qubits.iter().enumerate() {
        if qubits[..i].contains(q) {
            return Err(CircuitError::QubitCollision { qubit: *q });
        }
    }
    Ok(())
}

/// CSWAP of `n_t` qubit pairs under one logical control.
///
/// Shared mode takes a single control and emits one logical gate (or a plain
/// CSWAP when `n_t = 1`). Fanout mode takes one control per pair, assumed
/// already GHZ-entangled (see [`ghz_preparation`]), and emits `n_t` parallel
/// elementary CSWAPs.
pub fn multi_target_cswap(
    controls: &[usize],
    pairs: &[(usize, usize)],
    mode: MixMode,
) -> Result<Vec<Gate>, CircuitError> {
    let needed = match mode {
        MixMode::Shared => 1,
        MixMode::Fanout => pairs.len(),
    };
    if controls.len() != needed {
        return Err(CircuitError::MissingAncillas {
            needed,
            got: controls.len(),
        });
    }
    let mut all: Vec<usize> = controls.to_vec();
    all.extend(pairs.iter().flat_map(|&(a, b)| [a, b]));
    check_distinct(&all)?;

    if pairs.len() == 1 {
        let (a, b) = pairs[0];
        return Ok(cswap_elementary(controls[0], a, b));
    }
    Ok(match mode {
        MixMode::Shared => {
            let mut qubits = vec![controls[0]];
            qubits.extend(pairs.iter().map(|p| p.0));
            qubits.extend(pairs.iter().map(|p| p.1));
            vec![Gate {
                kind: GateKind::MultiTargetCswap { pairs: pairs.len() },
                qubits,
            }]
        }
        MixMode::Fanout => {
            // Interleave step by step so parallel pairs share layers.
            let per_pair: Vec<Vec<Gate>> = controls
                .iter()
                .zip(pairs)
                .map(|(&c, &(a, b))| cswap_elementary(c, a, b))
                .collect();
            (0..TEMPLATE.len())
                .flat_map(|s| per_pair.iter().map(move |seq| seq[s].clone()))
                .collect()
        }
    })
}

/// CNOT doubling tree copying `targets[0]` onto the others: round `r`
/// applies `CNOT(t_i → t_{i+2^r})` for `i < 2^r`.
fn doubling_tree(targets: &[usize]) -> Vec<Gate> {
    let n = targets.len();
    let mut out = Vec::with_capacity(n.saturating_sub(1));
    let mut span = 1;
    while span < n {
        for i in 0..span {
            if i + span < n {
                out.push(Gate::cnot(targets[i], targets[i + span]));
            }
        }
        span *= 2;
    }
    out
}

/// `CNOT(c → t)` for every target, in depth `1 + 2⌈log₂ n⌉` with `2n − 1`
/// CNOTs.
fn fanout_cnot(control: usize, targets: &[usize]) -> Vec<Gate> {
    let tree = doubling_tree(targets);
    let mut out: Vec<Gate> = tree.iter().rev().cloned().collect();
    out.push(Gate::cnot(control, targets[0]));
    out.extend(tree);
    out
}

/// Elementary lowering of the shared-control multi-target CSWAP: each
/// control CNOT of the per-pair template becomes a fan-out CNOT, and the
/// control phase `T` becomes `Rz(n_t·π/4)` since every pair contributes one
/// `π/4`. For `n_t > 1` the result equals the logical gate up to the global
/// phase `e^{-i n_t π/8}`.
pub fn lower_multi_target_cswap(control: usize, pairs: &[(usize, usize)]) -> Vec<Gate> {
    let a_wires: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let b_wires: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let mut out = Vec::new();
    for step in TEMPLATE {
        match step {
            Step::ControlT if pairs.len() == 1 => out.push(Gate::t(control)),
            Step::ControlT => out.push(Gate::rz(pairs.len() as f64 * FRAC_PI_4, control)),
            Step::ControlCx(x) => {
                let targets = match x {
                    Wire::A => &a_wires,
                    Wire::B => &b_wires,
                };
                out.extend(fanout_cnot(control, targets));
            }
            Step::Cx(x, y) => out.extend(pairs.iter().map(|&(a, b)| Gate::cnot(wire(x, a, b), wire(y, a, b)))),
            Step::H(x) => out.extend(pairs.iter().map(|&(a, b)| Gate::h(wire(x, a, b)))),
            Step::Rz(theta, x) => out.extend(pairs.iter().map(|&(a, b)| Gate::rz(theta, wire(x, a, b)))),
        }
    }
    out
}

/// `√p₀|0…0⟩ + √(1−p₀)|1…1⟩` on `ancillas`; `None` means `p₀ = ½` via H.
/// Depth `1 + ⌈log₂ q⌉`, `q − 1` CNOTs.
pub fn ghz_preparation(ancillas: &[usize], p0: Option<f64>) -> Vec<Gate> {
    if ancillas.is_empty() {
        return Vec::new();
    }
    let mut out = vec![match p0 {
        None => Gate::h(ancillas[0]),
        Some(p) => Gate::ry(super::mixing_angle(p), ancillas[0]),
    }];
    out.extend(doubling_tree(ancillas));
    out
}
