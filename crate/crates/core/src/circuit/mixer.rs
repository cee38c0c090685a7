//! Binary-tree CSWAP mixer producing a convex combination of register states.

use super::{ghz_preparation, multi_target_cswap, Circuit, CircuitError, Gate, MixMode, Register, RegisterMap};
use crate::linalg::is_power_of_two;

/// `Ry(θ)` angle that prepares `√p|0⟩ + √(1−p)|1⟩`.
pub fn mixing_angle(p0: f64) -> f64 {
    2.0 * p0.clamp(0.0, 1.0).sqrt().acos()
}

pub fn mixer_ancilla_count(num_states: usize, state_width: usize, mode: MixMode) -> usize {
    let nodes = num_states.saturating_sub(1);
    match mode {
        MixMode::Shared => nodes,
        MixMode::Fanout => nodes * state_width,
    }
}

fn normalized_weights(weights: Option<&[f64]>, n: usize) -> Result<Option<Vec<f64>>, CircuitError> {
    let Some(w) = weights else {
        return Ok(None);
    };
    if w.len() != n {
        return Err(CircuitError::InvalidWeights(format!(
            "{} weights for {n} registers",
            w.len()
        )));
    }
    if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(CircuitError::InvalidWeights(
            "weights must be finite and non-negative".into(),
        ));
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(CircuitError::InvalidWeights("weights sum to zero".into()));
    }
    Ok(Some(w.iter().map(|x| x / total).collect()))
}

/// Gates of the mixer over `registers` (each `q` qubits, register 0 receives
/// the mixture). Ancilla preparation comes first, then `log₂ N` layers;
/// layer `j` swaps register `i + 2^j` into register `i` for every `i` that is
/// a multiple of `2^{j+1}`.
///
/// Tree nodes are numbered layer by layer; node `t` owns ancilla `t`
/// (shared) or ancillas `t·q .. (t+1)·q` (fanout). With `weights`, every node
/// uses `Ry` so that register `i` ends up with weight `weights[i]`; without,
/// every node uses `H`.
pub fn mixer_gates(
    registers: &[Vec<usize>],
    ancillas: &[usize],
    mode: MixMode,
    weights: Option<&[f64]>,
) -> Result<Vec<Gate>, CircuitError> {
    let n = registers.len();
    if n == 0 || !is_power_of_two(n) {
        return Err(CircuitError::NotPowerOfTwo(n));
    }
    let width = registers[0].len();
    if let Some(r) = registers.iter().find(|r| r.len() != width) {
        return Err(CircuitError::Arity {
            kind: "MIXER register",
            expected: width,
            got: r.len(),
        });
    }
    let needed = mixer_ancilla_count(n, width, mode);
    if ancillas.len() < needed {
        return Err(CircuitError::MissingAncillas {
            needed,
            got: ancillas.len(),
        });
    }
    let weights = normalized_weights(weights, n)?;
    let per_node = match mode {
        MixMode::Shared => 1,
        MixMode::Fanout => width,
    };

    // (node ancillas, left register, right register, p0)
    let mut nodes = Vec::with_capacity(n - 1);
    let mut stride = 1;
    while stride < n {
        for left in (0..n).step_by(2 * stride) {
            let right = left + stride;
            let p0 = weights.as_ref().map(|w| {
                let wl: f64 = w[left..right].iter().sum();
                let wr: f64 = w[right..right + stride].iter().sum();
                if wl + wr > 0.0 {
                    wl / (wl + wr)
                } else {
                    1.0
                }
            });
            let t = nodes.len();
            nodes.push((&ancillas[t * per_node..(t + 1) * per_node], left, right, p0));
        }
        stride *= 2;
    }

    let mut gates = Vec::new();
    for (anc, _, _, p0) in &nodes {
        match mode {
            MixMode::Shared => gates.push(match p0 {
                None => Gate::h(anc[0]),
                Some(p) => Gate::ry(mixing_angle(*p), anc[0]),
            }),
            MixMode::Fanout => gates.extend(ghz_preparation(anc, *p0)),
        }
    }
    for (anc, left, right, _) in &nodes {
        let pairs: Vec<(usize, usize)> = registers[*left]
            .iter()
            .copied()
            .zip(registers[*right].iter().copied())
            .collect();
        gates.extend(multi_target_cswap(anc, &pairs, mode)?);
    }
    Ok(gates)
}

/// Standalone mixer over `N` registers of `q` qubits: registers occupy
/// qubits `i·q .. (i+1)·q`, ancillas follow. Ends by tracing out every
/// register but the first and all ancillas.
pub fn build_mixer(
    num_states: usize,
    state_width: usize,
    mode: MixMode,
    weights: Option<&[f64]>,
) -> Result<Circuit, CircuitError> {
    if num_states == 0 || !is_power_of_two(num_states) {
        return Err(CircuitError::NotPowerOfTwo(num_states));
    }
    let reg_qubits = num_states * state_width;
    let num_anc = mixer_ancilla_count(num_states, state_width, mode);
    let registers: Vec<Vec<usize>> = (0..num_states)
        .map(|i| (i * state_width..(i + 1) * state_width).collect())
        .collect();
    let ancillas: Vec<usize> = (reg_qubits..reg_qubits + num_anc).collect();
    let map = RegisterMap {
        registers: registers
            .iter()
            .map(|r| Register {
                system: r.clone(),
                ..Register::default()
            })
            .collect(),
        mixer_ancillas: ancillas.clone(),
    };
    let mut c = Circuit::with_registers(reg_qubits + num_anc, map);
    c.extend(mixer_gates(&registers, &ancillas, mode, weights)?)?;
    let traced: Vec<usize> = (state_width..reg_qubits + num_anc).collect();
    if !traced.is_empty() {
        c.push(Gate::trace_out(traced))?;
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::GateKind;

    #[test]
    fn shared_layout_and_counts() {
        let c = build_mixer(8, 3, MixMode::Shared, None).unwrap();
        assert_eq!(c.num_qubits(), 24 + 7);
        assert_eq!(c.registers().mixer_ancillas.len(), 7);
        let mt = c
            .gates()
            .iter()
            .filter(|g| matches!(g.kind, GateKind::MultiTargetCswap { .. }))
            .count();
        assert_eq!(mt, 7);
        // Prep H on the first-layer ancillas adds one layer.
        assert_eq!(c.depth(), 1 + 78);
    }

    #[test]
    fn fanout_counts() {
        let c = build_mixer(2, 4, MixMode::Fanout, None).unwrap();
        assert_eq!(c.registers().mixer_ancillas.len(), 4);
        assert_eq!(c.cnot_count(), 4 * 9 + 3);
        let c = build_mixer(4, 2, MixMode::Fanout, None).unwrap();
        assert_eq!(c.registers().mixer_ancillas.len(), 6);
    }

    #[test]
    fn single_register_is_empty() {
        let c = build_mixer(1, 2, MixMode::Shared, None).unwrap();
        assert!(c.gates().is_empty());
        assert_eq!(c.depth(), 0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(
            build_mixer(3, 1, MixMode::Shared, None),
            Err(CircuitError::NotPowerOfTwo(3))
        );
        assert!(matches!(
            build_mixer(2, 1, MixMode::Shared, Some(&[1.0])),
            Err(CircuitError::InvalidWeights(_))
        ));
        assert!(matches!(
            build_mixer(2, 1, MixMode::Shared, Some(&[-1.0, 2.0])),
            Err(CircuitError::InvalidWeights(_))
        ));
    }

    #[test]
    fn mixing_angle_populations() {
        for p in [0.0, 0.25, 0.5, 0.9, 1.0] {
            let half = mixing_angle(p) / 2.0;
            assert!((half.cos().powi(2) - p).abs() < 1e-15);
        }
    }
}
