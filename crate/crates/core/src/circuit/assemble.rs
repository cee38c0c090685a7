//! Full pipeline: dilation branches, mixer, post-selection and trace-out.

use thiserror::Error;

use super::{mixer_gates, Circuit, CircuitError, Gate, MixMode, Register, RegisterMap};
use crate::channel::{group_kraus, ChannelError, KrausSet};
use crate::costmodel::{branch_block_weights, branch_count, mixer_cost};
use crate::dilation::{dilate_operator, stinespring_isometry, DilationArtifact, DilationError, DilationMethod};
use crate::linalg::CMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Dilation(#[from] DilationError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedCircuit {
    pub circuit: Circuit,
    pub method: DilationMethod,
    pub group_size: usize,
    pub mode: MixMode,
    /// Dilation branches including zero-operator padding.
    pub branches: usize,
    /// Branches that carry Kraus operators.
    pub active_branches: usize,
    pub expected_success_probability: f64,
    pub stinespring_dominates: bool,
}

fn stinespring_circuit(k: &KrausSet) -> Result<Circuit, SynthesisError> {
    let art = stinespring_isometry(k)?;
    let n = k.num_qubits();
    let env = art.ancilla_qubits();
    let system: Vec<usize> = (0..n).collect();
    let dilation: Vec<usize> = (n..n + env).collect();
    let map = RegisterMap {
        registers: vec![Register {
            system: system.clone(),
            grouping: Vec::new(),
            dilation: dilation.clone(),
        }],
        mixer_ancillas: Vec::new(),
    };
    let mut c = Circuit::with_registers(n + env, map);
    let w = branch_block_weights(DilationMethod::Stinespring, n, k.len(), 1)[0];
    c.add_matrix("stinespring_u", art.dilated_unitary());
    let mut qubits = system;
    qubits.extend(&dilation);
    c.push(Gate::opaque("stinespring_u", qubits, w.depth, w.cnot))?;
    if env > 0 {
        c.push(Gate::trace_out(dilation))?;
    }
    Ok(c)
}

/// Builds the simulation circuit for `k`.
///
/// Register `r` holds qubits `r·q .. (r+1)·q` with `q = n + log₂ℓ + 1`,
/// ordered system, grouping, dilation ancilla. Mixer ancillas follow the
/// registers. Branch `r` dilates the `r`-th grouped operator; when the branch
/// count is not a power of two the remaining branches dilate the zero
/// operator, which the post-selection rejects.
pub fn assemble_simulation_circuit(
    k: &KrausSet,
    method: DilationMethod,
    group_size: usize,
    mode: MixMode,
) -> Result<SynthesizedCircuit, SynthesisError> {
    if method == DilationMethod::Stinespring {
        return Ok(SynthesizedCircuit {
            circuit: stinespring_circuit(k)?,
            method,
            group_size: 1,
            mode,
            branches: 1,
            active_branches: 1,
            expected_success_probability: 1.0,
            stinespring_dominates: false,
        });
    }

    let grouped = group_kraus(k, group_size)?;
    let n = k.num_qubits();
    let g = grouped.grouping_qubits();
    let width = n + g + 1;
    let big = grouped.expanded_dim();
    let active = grouped.branch_operators().len();
    let branches = branch_count(k.len(), group_size);
    debug_assert_eq!(branches, active.next_power_of_two());

    let registers: Vec<Register> = (0..branches)
        .map(|r| {
            let base = r * width;
            Register {
                system: (base..base + n).collect(),
                grouping: (base + n..base + n + g).collect(),
                dilation: vec![base + n + g],
            }
        })
        .collect();
    let reg_qubits = branches * width;
    let num_anc = mixer_cost(branches, width, mode).ancillas;
    let ancillas: Vec<usize> = (reg_qubits..reg_qubits + num_anc).collect();
    let map = RegisterMap {
        registers: registers.clone(),
        mixer_ancillas: ancillas.clone(),
    };
    let mut c = Circuit::with_registers(reg_qubits + num_anc, map);
    let weights = branch_block_weights(method, n, k.len(), group_size);

    let zero = CMatrix::zeros(big, big);
    for (r, reg) in registers.iter().enumerate() {
        let op = grouped.branch_operators().get(r).unwrap_or(&zero);
        let source = (r < active).then_some(r);
        let all = reg.all_qubits();
        match dilate_operator(method, op, source)? {
            DilationArtifact::SzNagy { unitary, .. } => {
                let id = format!("b{r}_sznagy");
                c.add_matrix(id.clone(), unitary);
                c.push(Gate::opaque(id, all, weights[0].depth, weights[0].cnot))?;
            }
            art @ DilationArtifact::Svd { .. } => {
                let sigma = art.sigma_dilation().expect("svd artifact");
                let DilationArtifact::Svd { u, vdag, .. } = art else {
                    unreachable!()
                };
                let data: Vec<usize> = reg.system.iter().chain(&reg.grouping).copied().collect();
                let anc = reg.dilation[0];
                let ids = [
                    format!("b{r}_svd_vdag"),
                    format!("b{r}_svd_sigma"),
                    format!("b{r}_svd_u"),
                ];
                c.add_matrix(ids[0].clone(), vdag);
                c.add_matrix(ids[1].clone(), sigma);
                c.add_matrix(ids[2].clone(), u);
                c.push(Gate::opaque(
                    ids[0].clone(),
                    data.clone(),
                    weights[0].depth,
                    weights[0].cnot,
                ))?;
                c.push(Gate::h(anc))?;
                c.push(Gate::opaque(ids[1].clone(), all, weights[1].depth, weights[1].cnot))?;
                c.push(Gate::h(anc))?;
                c.push(Gate::opaque(ids[2].clone(), data, weights[2].depth, weights[2].cnot))?;
            }
            DilationArtifact::Stinespring { .. } => unreachable!("single-operator dilation"),
        }
    }
    if branches > 1 {
        let lists: Vec<Vec<usize>> = registers.iter().map(Register::all_qubits).collect();
        c.extend(mixer_gates(&lists, &ancillas, mode, None)?)?;
    }
    c.push(Gate::postselect(registers[0].dilation[0], 0))?;
    let keep = &registers[0].system;
    let traced: Vec<usize> = (0..c.num_qubits()).filter(|q| !keep.contains(q)).collect();
    c.push(Gate::trace_out(traced))?;

    Ok(SynthesizedCircuit {
        circuit: c,
        method,
        group_size,
        mode,
        branches,
        active_branches: active,
        expected_success_probability: 1.0 / branches as f64,
        stinespring_dominates: grouped.stinespring_dominates(),
    })
}
