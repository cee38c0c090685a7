//! Density-matrix simulation of circuits, and end-to-end checks against
//! the Kraus oracle.
//!
//! The state is kept as a product of blocks, each a dense density matrix on
//! a subset of qubits. Untouched qubits are implicit `|0⟩`; blocks are merged
//! only when a gate spans several of them. A qubit that is traced out later
//! in the circuit is traced out right after its last gate, which keeps the
//! mixer tree at about two registers plus one ancilla at a time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::channel::{apply_channel, ChannelError, KrausSet};
use crate::circuit::{assemble_simulation_circuit, cswap_permute, Circuit, Gate, GateKind, MixMode, SynthesisError};
use crate::dilation::DilationMethod;
use crate::linalg::{CMatrix, C64};
use crate::state::DensityMatrix;

/// Post-selection probabilities below this are treated as impossible.
pub const ZERO_PROBABILITY: f64 = 1e-14;

/// Largest entangled block the engine will materialize (a `2^13 × 2^13`
/// complex matrix takes 1 GiB).
pub const MAX_BLOCK_QUBITS: usize = 13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("post-selecting qubit {qubit} has probability {probability:.3e}")]
    ZeroProbabilityBranch { qubit: usize, probability: f64 },
    #[error("opaque block '{0}' has no matrix")]
    UnknownMatrix(String),
    #[error("gate acts on qubit {0} after it was traced out")]
    TracedQubit(usize),
    #[error("simulation needs a {qubits}-qubit dense block, limit is {limit}")]
    BlockTooLarge { qubits: usize, limit: usize },
    #[error(
        "equivalence check failed for seed {seed}: residual {residual:.3e}, probability error {probability_error:.3e}"
    )]
    EquivalenceFailure {
        seed: u64,
        residual: f64,
        probability_error: f64,
    },
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    /// State of the qubits that were never traced out, in ascending qubit
    /// order (lowest qubit = least significant bit).
    pub rho: DensityMatrix,
    /// Product of all post-selection probabilities.
    pub success_probability: f64,
    /// Largest number of qubits held in one dense block during the run.
    pub peak_block_qubits: usize,
}

/// Dense block; local bit `j` of an index is `qubits[j]`.
#[derive(Debug, Clone)]
struct Block {
    qubits: Vec<usize>,
    rho: Vec<C64>,
}

impl Block {
    fn dim(&self) -> usize {
        1 << self.qubits.len()
    }

    fn zero(q: usize) -> Self {
        let mut rho = vec![C64::new(0.0, 0.0); 4];
        rho[0] = C64::new(1.0, 0.0);
        Self { qubits: vec![q], rho }
    }

    fn position(&self, q: usize) -> usize {
        self.qubits.iter().position(|&x| x == q).expect("qubit in block")
    }

    /// `self ⊗ other` with `other`'s qubits placed above `self`'s.
    fn kron(&self, other: &Block) -> Block {
        let (da, db) = (self.dim(), other.dim());
        let d = da * db;
        let mut rho = vec![C64::new(0.0, 0.0); d * d];
        rho.par_chunks_mut(d).enumerate().for_each(|(row, out)| {
            let (ia, ib) = (row % da, row / da);
            for jb in 0..db {
                let b = other.rho[ib * db + jb];
                if b == C64::new(0.0, 0.0) {
                    continue;
                }
                for ja in 0..da {
                    out[jb * da + ja] = self.rho[ia * da + ja] * b;
                }
            }
        });
        let mut qubits = self.qubits.clone();
        qubits.extend(&other.qubits);
        Block { qubits, rho }
    }

    fn adjoint_in_place(&mut self) {
        let d = self.dim();
        for i in 0..d {
            self.rho[i * d + i] = self.rho[i * d + i].conj();
            for j in i + 1..d {
                let a = self.rho[i * d + j];
                let b = self.rho[j * d + i];
                self.rho[i * d + j] = b.conj();
                self.rho[j * d + i] = a.conj();
            }
        }
    }

    /// Multiplies every row by `U†` on the gate positions.
    fn right_mul_adjoint(&mut self, u: &CMatrix, offsets: &[usize], bases: &[usize]) {
        let d = self.dim();
        let k = offsets.len();
        self.rho.par_chunks_mut(d).for_each(|row| {
            let mut v = vec![C64::new(0.0, 0.0); k];
            for &b in bases {
                for (l, &off) in offsets.iter().enumerate() {
                    v[l] = row[b + off];
                }
                for (lp, &off) in offsets.iter().enumerate() {
                    let urow = u.row(lp);
                    let mut acc = C64::new(0.0, 0.0);
                    for l in 0..k {
                        acc += v[l] * urow[l].conj();
                    }
                    row[b + off] = acc;
                }
            }
        });
    }

    /// `ρ ↦ U ρ U†` with `U` acting on the given local positions.
    fn apply_dense(&mut self, u: &CMatrix, positions: &[usize]) {
        let (offsets, bases) = self.index_split(positions);
        self.right_mul_adjoint(u, &offsets, &bases);
        self.adjoint_in_place();
        self.right_mul_adjoint(u, &offsets, &bases);
    }

    fn index_split(&self, positions: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let k = positions.len();
        let offsets: Vec<usize> = (0..1usize << k)
            .map(|l| positions.iter().enumerate().map(|(j, &p)| ((l >> j) & 1) << p).sum())
            .collect();
        let mask: usize = positions.iter().map(|&p| 1 << p).sum();
        let bases = (0..self.dim()).filter(|i| i & mask == 0).collect();
        (offsets, bases)
    }

    /// `ρ'[π(i), π(j)] = ρ[i, j]`.
    fn apply_permutation(&mut self, perm: &[usize]) {
        let d = self.dim();
        let old = std::mem::take(&mut self.rho);
        let mut rho = vec![C64::new(0.0, 0.0); d * d];
        rho.par_chunks_mut(d).enumerate().for_each(|(pi, out)| {
            let i = inverse_lookup(perm, pi);
            let src = &old[i * d..(i + 1) * d];
            for (j, &z) in src.iter().enumerate() {
                out[perm[j]] = z;
            }
        });
        self.rho = rho;
    }

    /// `ρ'[i, j] = ρ[i, j] · φ_i · conj(φ_j)`.
    fn apply_diagonal(&mut self, phases: &[C64]) {
        let d = self.dim();
        self.rho.par_chunks_mut(d).enumerate().for_each(|(i, row)| {
            for (j, z) in row.iter_mut().enumerate() {
                *z *= phases[i] * phases[j].conj();
            }
        });
    }

    fn trace_out(&self, positions: &[usize]) -> Block {
        let keep: Vec<usize> = (0..self.qubits.len()).filter(|p| !positions.contains(p)).collect();
        let scatter =
            |idx: usize, pos: &[usize]| -> usize { pos.iter().enumerate().map(|(j, &p)| ((idx >> j) & 1) << p).sum() };
        let dk = 1usize << keep.len();
        let traced: Vec<usize> = (0..1usize << positions.len()).map(|t| scatter(t, positions)).collect();
        let kept: Vec<usize> = (0..dk).map(|i| scatter(i, &keep)).collect();
        let d = self.dim();
        let mut rho = vec![C64::new(0.0, 0.0); dk * dk];
        rho.par_chunks_mut(dk).enumerate().for_each(|(i, out)| {
            for (j, o) in out.iter_mut().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for &t in &traced {
                    acc += self.rho[(kept[i] | t) * d + (kept[j] | t)];
                }
                *o = acc;
            }
        });
        Block {
            qubits: keep.iter().map(|&p| self.qubits[p]).collect(),
            rho,
        }
    }

    fn trace(&self) -> f64 {
        let d = self.dim();
        (0..d).map(|i| self.rho[i * d + i].re).sum()
    }
}

fn inverse_lookup(perm: &[usize], target: usize) -> usize {
    // Permutations used here are involutions (CNOT, CSWAP).
    debug_assert_eq!(perm[perm[target]], target);
    perm[target]
}

struct Engine {
    blocks: Vec<Option<Block>>,
    owner: Vec<Option<usize>>,
    traced: Vec<bool>,
    success: f64,
    peak: usize,
}

impl Engine {
    fn new(num_qubits: usize) -> Self {
        Self {
            blocks: Vec::new(),
            owner: vec![None; num_qubits],
            traced: vec![false; num_qubits],
            success: 1.0,
            peak: 0,
        }
    }

    fn insert(&mut self, block: Block) -> usize {
        self.peak = self.peak.max(block.qubits.len());
        let id = self.blocks.len();
        for &q in &block.qubits {
            self.owner[q] = Some(id);
        }
        self.blocks.push(Some(block));
        id
    }

    fn load(&mut self, qubits: &[usize], rho: &DensityMatrix) -> Result<(), SimulationError> {
        if qubits.len() != rho.num_qubits() {
            return Err(SimulationError::DimensionMismatch(format!(
                "register has {} system qubits, input state has {}",
                qubits.len(),
                rho.num_qubits()
            )));
        }
        if qubits.is_empty() {
            return Ok(());
        }
        self.insert(Block {
            qubits: qubits.to_vec(),
            rho: rho.matrix().as_slice().to_vec(),
        });
        Ok(())
    }

    /// Merges every block touching `qubits` into one and returns its id.
    fn gather(&mut self, qubits: &[usize]) -> Result<usize, SimulationError> {
        let mut ids: Vec<usize> = Vec::new();
        for &q in qubits {
            if self.traced[q] {
                return Err(SimulationError::TracedQubit(q));
            }
            let id = match self.owner[q] {
                Some(id) => id,
                None => self.insert(Block::zero(q)),
            };
            if !ids.contains(&id) {
                ids.push(id);
            }
        }
        if ids.len() == 1 {
            return Ok(ids[0]);
        }
        let width: usize = ids
            .iter()
            .map(|&id| self.blocks[id].as_ref().expect("live block").qubits.len())
            .sum();
        if width > MAX_BLOCK_QUBITS {
            return Err(SimulationError::BlockTooLarge {
                qubits: width,
                limit: MAX_BLOCK_QUBITS,
            });
        }
        let mut merged = self.blocks[ids[0]].take().expect("live block");
        for &id in &ids[1..] {
            let b = self.blocks[id].take().expect("live block");
            merged = merged.kron(&b);
        }
        Ok(self.insert(merged))
    }

    fn apply(&mut self, g: &Gate, circuit: &Circuit) -> Result<(), SimulationError> {
        match &g.kind {
            GateKind::TraceOut => {
                let live: Vec<usize> = g.qubits.iter().copied().filter(|&q| !self.traced[q]).collect();
                self.trace_out(&live);
                return Ok(());
            }
            GateKind::PostSelect { outcome } => return self.postselect(g.qubits[0], *outcome),
            _ => {}
        }
        let id = self.gather(&g.qubits)?;
        let block = self.blocks[id].as_mut().expect("live block");
        let positions: Vec<usize> = g.qubits.iter().map(|&q| block.position(q)).collect();
        match &g.kind {
            GateKind::Cnot | GateKind::MultiTargetCswap { .. } => {
                let perm: Vec<usize> = (0..block.dim())
                    .map(|i| {
                        if g.kind == GateKind::Cnot {
                            let (c, t) = (positions[0], positions[1]);
                            i ^ (((i >> c) & 1) << t)
                        } else {
                            cswap_permute(i, &positions)
                        }
                    })
                    .collect();
                block.apply_permutation(&perm);
            }
            GateKind::T | GateKind::Rz(_) => {
                let local = g.elementary_matrix().expect("elementary");
                let p = positions[0];
                let phases: Vec<C64> = (0..block.dim()).map(|i| local[((i >> p) & 1, (i >> p) & 1)]).collect();
                block.apply_diagonal(&phases);
            }
            GateKind::H | GateKind::Ry(_) => {
                let local = g.elementary_matrix().expect("elementary");
                block.apply_dense(&local, &positions);
            }
            GateKind::Opaque { id, .. } => {
                let u = circuit
                    .matrix(id)
                    .ok_or_else(|| SimulationError::UnknownMatrix(id.clone()))?;
                block.apply_dense(u, &positions);
            }
            GateKind::PostSelect { .. } | GateKind::TraceOut => unreachable!(),
        }
        Ok(())
    }

    fn postselect(&mut self, q: usize, outcome: u8) -> Result<(), SimulationError> {
        if self.traced[q] {
            return Err(SimulationError::TracedQubit(q));
        }
        let id = self.gather(&[q])?;
        let block = self.blocks[id].take().expect("live block");
        let p = block.position(q);
        let want = outcome as usize & 1;
        let d = block.dim();
        let probability: f64 = (0..d)
            .filter(|i| (i >> p) & 1 == want)
            .map(|i| block.rho[i * d + i].re)
            .sum::<f64>()
            / block.trace();
        if probability < ZERO_PROBABILITY {
            self.blocks[id] = Some(block);
            return Err(SimulationError::ZeroProbabilityBranch { qubit: q, probability });
        }
        self.success *= probability;

        // After projection the qubit factors out as |outcome⟩.
        let rest_positions: Vec<usize> = (0..block.qubits.len()).filter(|&x| x != p).collect();
        let dr = 1usize << rest_positions.len();
        let scatter = |idx: usize| -> usize {
            rest_positions
                .iter()
                .enumerate()
                .map(|(j, &pos)| ((idx >> j) & 1) << pos)
                .sum::<usize>()
                | (want << p)
        };
        let full: Vec<usize> = (0..dr).map(scatter).collect();
        let norm = probability * block.trace();
        let mut rho = vec![C64::new(0.0, 0.0); dr * dr];
        for i in 0..dr {
            for j in 0..dr {
                rho[i * dr + j] = block.rho[full[i] * d + full[j]] / norm;
            }
        }
        if !rest_positions.is_empty() {
            self.insert(Block {
                qubits: rest_positions.iter().map(|&x| block.qubits[x]).collect(),
                rho,
            });
        }
        let mut single = vec![C64::new(0.0, 0.0); 4];
        single[want * 2 + want] = C64::new(1.0, 0.0);
        self.insert(Block {
            qubits: vec![q],
            rho: single,
        });
        Ok(())
    }

    fn trace_out(&mut self, qubits: &[usize]) {
        let mut by_block: Vec<(usize, Vec<usize>)> = Vec::new();
        for &q in qubits {
            self.traced[q] = true;
            if let Some(id) = self.owner[q].take() {
                match by_block.iter_mut().find(|(b, _)| *b == id) {
                    Some((_, qs)) => qs.push(q),
                    None => by_block.push((id, vec![q])),
                }
            }
        }
        for (id, qs) in by_block {
            let block = self.blocks[id].take().expect("live block");
            if qs.len() == block.qubits.len() {
                continue;
            }
            let positions: Vec<usize> = qs.iter().map(|&q| block.position(q)).collect();
            let reduced = block.trace_out(&positions);
            self.insert(reduced);
        }
    }

    /// Kron of all live qubits, reordered ascending.
    fn finish(mut self, num_qubits: usize) -> Result<(DensityMatrix, f64, usize), SimulationError> {
        let live: Vec<usize> = (0..num_qubits).filter(|&q| !self.traced[q]).collect();
        let rho = if live.is_empty() {
            CMatrix::identity(1)
        } else {
            let id = self.gather(&live)?;
            let block = self.blocks[id].take().expect("live block");
            let pos: Vec<usize> = live.iter().map(|&q| block.position(q)).collect();
            let d = block.dim();
            let map = |idx: usize| -> usize { pos.iter().enumerate().map(|(j, &p)| ((idx >> j) & 1) << p).sum() };
            let src: Vec<usize> = (0..d).map(map).collect();
            let mut data = vec![C64::new(0.0, 0.0); d * d];
            for i in 0..d {
                for j in 0..d {
                    data[i * d + j] = block.rho[src[i] * d + src[j]];
                }
            }
            CMatrix::from_row_major(d, d, data).expect("square")
        };
        let rho = (&rho + &rho.adjoint()).scale_real(0.5);
        let rho = DensityMatrix::new_unchecked(rho).expect("power-of-two output");
        Ok((rho, self.success, self.peak))
    }
}

/// Gate index after which each qubit can be traced out early: its last
/// non-trace use, provided a later TRACE_OUT removes it.
fn early_trace_schedule(c: &Circuit) -> Vec<Vec<usize>> {
    let mut last_use: Vec<Option<usize>> = vec![None; c.num_qubits()];
    let mut traced_at: Vec<Option<usize>> = vec![None; c.num_qubits()];
    for (i, g) in c.gates().iter().enumerate() {
        for &q in &g.qubits {
            if g.kind == GateKind::TraceOut {
                traced_at[q].get_or_insert(i);
            } else if traced_at[q].is_none() {
                last_use[q] = Some(i);
            }
        }
    }
    let mut schedule = vec![Vec::new(); c.gates().len()];
    for q in 0..c.num_qubits() {
        if let (Some(last), Some(t)) = (last_use[q], traced_at[q]) {
            if last < t {
                schedule[last].push(q);
            }
        }
    }
    schedule
}

fn run_engine(c: &Circuit, mut engine: Engine) -> Result<SimulationResult, SimulationError> {
    let schedule = early_trace_schedule(c);
    for (i, g) in c.gates().iter().enumerate() {
        engine.apply(g, c)?;
        if !schedule[i].is_empty() {
            engine.trace_out(&schedule[i]);
        }
    }
    let (rho, success_probability, peak_block_qubits) = engine.finish(c.num_qubits())?;
    Ok(SimulationResult {
        rho,
        success_probability,
        peak_block_qubits,
    })
}

/// Runs `c` with `rho_in` copied into the system qubits of every register
/// (or on qubits `0..k` when the circuit has no register map). All other
/// qubits start in `|0⟩`.
pub fn run(c: &Circuit, rho_in: &DensityMatrix) -> Result<SimulationResult, SimulationError> {
    let mut engine = Engine::new(c.num_qubits());
    let regs = &c.registers().registers;
    if regs.is_empty() {
        if rho_in.num_qubits() > c.num_qubits() {
            return Err(SimulationError::DimensionMismatch(format!(
                "{}-qubit input for a {}-qubit circuit",
                rho_in.num_qubits(),
                c.num_qubits()
            )));
        }
        let qubits: Vec<usize> = (0..rho_in.num_qubits()).collect();
        engine.load(&qubits, rho_in)?;
    } else {
        for r in regs {
            engine.load(&r.system, rho_in)?;
        }
    }
    run_engine(c, engine)
}

/// Runs `c` with a separate input state per register.
pub fn run_with_inputs(c: &Circuit, inputs: &[DensityMatrix]) -> Result<SimulationResult, SimulationError> {
    let regs = &c.registers().registers;
    if regs.len() != inputs.len() {
        return Err(SimulationError::DimensionMismatch(format!(
            "{} inputs for {} registers",
            inputs.len(),
            regs.len()
        )));
    }
    let mut engine = Engine::new(c.num_qubits());
    for (r, rho) in regs.iter().zip(inputs) {
        engine.load(&r.system, rho)?;
    }
    run_engine(c, engine)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub method: DilationMethod,
    pub group_size: usize,
    pub mode: MixMode,
    pub trials: usize,
    pub worst_residual: f64,
    pub worst_probability_error: f64,
    pub expected_success_probability: f64,
    /// Success probability measured on the first trial.
    pub measured_success_probability: f64,
    pub peak_block_qubits: usize,
}

/// Random input for trial `seed`: pure on even seeds, rank-2 mixed on odd.
pub fn trial_state(num_qubits: usize, seed: u64) -> DensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if seed.is_multiple_of(2) {
        DensityMatrix::random_pure(num_qubits, &mut rng)
    } else {
        let rank = rng.random_range(2..=(1usize << num_qubits).max(2));
        DensityMatrix::random_mixed(num_qubits, rank, &mut rng)
    }
}

/// Synthesizes `k` and compares the simulated circuit with the Kraus oracle
/// on `trials` random inputs seeded `seed, seed+1, …`.
pub fn verify_equivalence(
    k: &KrausSet,
    method: DilationMethod,
    group_size: usize,
    mode: MixMode,
    trials: usize,
    tol: f64,
    seed: u64,
) -> Result<EquivalenceReport, SimulationError> {
    let synth = assemble_simulation_circuit(k, method, group_size, mode)?;
    let expected = synth.expected_success_probability;
    type Trial = (u64, f64, f64, f64, usize);
    let outcomes: Vec<Result<Trial, SimulationError>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = seed.wrapping_add(t);
            let rho = trial_state(k.num_qubits(), s);
            let out = run(&synth.circuit, &rho)?;
            let oracle = apply_channel(k, &rho)?;
            let residual = out.rho.matrix().max_abs_diff(oracle.matrix());
            let perr = (out.success_probability - expected).abs();
            Ok((s, residual, perr, out.success_probability, out.peak_block_qubits))
        })
        .collect();
    let mut report = EquivalenceReport {
        method,
        group_size: synth.group_size,
        mode,
        trials,
        worst_residual: 0.0,
        worst_probability_error: 0.0,
        expected_success_probability: expected,
        measured_success_probability: f64::NAN,
        peak_block_qubits: 0,
    };
    for (i, o) in outcomes.into_iter().enumerate() {
        let (s, residual, perr, p, peak) = o?;
        if i == 0 {
            report.measured_success_probability = p;
        }
        if residual > tol || perr > 1e-12 {
            return Err(SimulationError::EquivalenceFailure {
                seed: s,
                residual,
                probability_error: perr,
            });
        }
        report.worst_residual = report.worst_residual.max(residual);
        report.worst_probability_error = report.worst_probability_error.max(perr);
        report.peak_block_qubits = report.peak_block_qubits.max(peak);
    }
    Ok(report)
}

/// Runs the circuit on a specific input and compares with the oracle.
pub fn verify_state(
    k: &KrausSet,
    method: DilationMethod,
    group_size: usize,
    mode: MixMode,
    rho: &DensityMatrix,
) -> Result<(f64, f64, f64), SimulationError> {
    if rho.dim() != k.dim() {
        return Err(SimulationError::DimensionMismatch(format!(
            "channel acts on dimension {}, state has dimension {}",
            k.dim(),
            rho.dim()
        )));
    }
    let synth = assemble_simulation_circuit(k, method, group_size, mode)?;
    let out = run(&synth.circuit, rho)?;
    let oracle = apply_channel(k, rho)?;
    Ok((
        out.rho.matrix().max_abs_diff(oracle.matrix()),
        out.success_probability,
        synth.expected_success_probability,
    ))
}
