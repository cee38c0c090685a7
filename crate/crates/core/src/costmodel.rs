//! Analytic depth, CNOT, qubit and success-probability model.
//!
//! Dilation blocks are costed by closed-form CNOT counts of generic
//! isometry/unitary synthesis (with `d → ℓd` under grouping) and their depth
//! is taken equal to their CNOT count. CSWAP, multi-target CSWAP and mixer
//! numbers are exact and match [`Circuit::depth`] and
//! [`Circuit::cnot_count`] of the constructed circuits.
//!
//! [`Circuit::depth`]: crate::circuit::Circuit::depth
//! [`Circuit::cnot_count`]: crate::circuit::Circuit::cnot_count

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::circuit::{
    mixer_ancilla_count, multi_target_cswap_cnot_weight, multi_target_cswap_depth_weight, MixMode, CSWAP_CNOTS,
    CSWAP_DEPTH,
};
use crate::dilation::DilationMethod;
use crate::linalg::{ceil_log2, is_power_of_two};

fn ceil_div(num: i64, den: i64) -> u64 {
    let q = num.div_euclid(den) + i64::from(num.rem_euclid(den) != 0);
    q.max(1) as u64
}

/// Integer weights given to one opaque block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockWeight {
    pub depth: u64,
    pub cnot: u64,
}

impl BlockWeight {
    fn same(w: u64) -> Self {
        Self { depth: w, cnot: w }
    }
}

/// `m'd² − m'd/24` rounded up, `m'` = `m` padded to a power of two.
pub fn stinespring_block_weight(n: usize, m: usize) -> BlockWeight {
    let d = 1i64 << n;
    let mp = m.max(1).next_power_of_two() as i64;
    BlockWeight::same(ceil_div(24 * mp * d * d - mp * d, 24))
}

/// `2ℓd² − ℓd/24` rounded up: the Sz.-Nagy unitary only has to map the `d`
/// columns that carry `ψ ⊗ |0…0⟩`, i.e. an isometry from `d` into `2ℓd`.
pub fn sznagy_block_weight(n: usize, l: usize) -> BlockWeight {
    let d = 1i64 << n;
    let l = l as i64;
    BlockWeight::same(ceil_div(48 * l * d * d - l * d, 24))
}

/// One of the two `D × D` unitaries of the SVD route, `D = ℓd`:
/// `(23/48)D² − (3/2)D + 4/3` rounded up.
pub fn svd_unitary_weight(n: usize, l: usize) -> BlockWeight {
    let big = ((1usize << n) * l) as i64;
    BlockWeight::same(ceil_div(23 * big * big - 72 * big + 64, 48))
}

/// The `2D`-dimensional diagonal `Σ₊ ⊕ Σ₋`: `4D − 3` elementary gates of
/// which `2D − 2` are CNOTs.
pub fn svd_diagonal_weight(n: usize, l: usize) -> BlockWeight {
    let big = ((1usize << n) * l) as u64;
    BlockWeight {
        depth: 4 * big - 3,
        cnot: (2 * big - 2).max(1),
    }
}

/// Leading-order cost of one dilation (per branch for Sz.-Nagy and SVD).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DilationCost {
    /// Formula CNOT count (unrounded).
    pub cnot: f64,
    /// Depth proxy; equals the CNOT formula for opaque blocks, plus the
    /// diagonal for SVD.
    pub depth: f64,
    /// SVD only: elementary gates of the diagonal `Σ₊ ⊕ Σ₋`.
    pub diagonal_gates: f64,
    /// SVD only: CNOTs among the diagonal gates (not included in `cnot`).
    pub diagonal_cnots: f64,
    /// `log₂²(rows)·cols` lower-order terms left out of `cnot`.
    pub uncounted_terms: f64,
}

pub fn dilation_cost(method: DilationMethod, n: usize, m: usize, l: usize) -> DilationCost {
    let d = (1usize << n) as f64;
    match method {
        DilationMethod::Stinespring => {
            let mp = m.max(1).next_power_of_two() as f64;
            let cnot = mp * d * d - mp * d / 24.0;
            DilationCost {
                cnot,
                depth: cnot,
                diagonal_gates: 0.0,
                diagonal_cnots: 0.0,
                uncounted_terms: (mp * d).log2().powi(2) * d,
            }
        }
        DilationMethod::SzNagy => {
            let l = l as f64;
            let cnot = 2.0 * l * d * d - l * d / 24.0;
            DilationCost {
                cnot,
                depth: cnot,
                diagonal_gates: 0.0,
                diagonal_cnots: 0.0,
                uncounted_terms: (2.0 * l * d).log2().powi(2) * d,
            }
        }
        DilationMethod::Svd => {
            let big = l as f64 * d;
            let cnot = 23.0 / 24.0 * big * big - 3.0 * big + 8.0 / 3.0;
            let diagonal_gates = 4.0 * big - 3.0;
            DilationCost {
                cnot,
                depth: cnot + diagonal_gates,
                diagonal_gates,
                diagonal_cnots: 2.0 * big - 2.0,
                uncounted_terms: 2.0 * big.log2().powi(2) * big,
            }
        }
    }
}

/// Opaque block weights of one branch in emission order.
pub fn branch_block_weights(method: DilationMethod, n: usize, m: usize, l: usize) -> Vec<BlockWeight> {
    match method {
        DilationMethod::Stinespring => vec![stinespring_block_weight(n, m)],
        DilationMethod::SzNagy => vec![sznagy_block_weight(n, l)],
        DilationMethod::Svd => {
            let half = svd_unitary_weight(n, l);
            vec![half, svd_diagonal_weight(n, l), half]
        }
    }
}

/// Exact depth and CNOT count of one branch as the assembled circuit
/// measures it. The SVD route's two ancilla Hadamards run alongside the
/// `V†` and `U` blocks and add no depth.
pub fn branch_cost(method: DilationMethod, n: usize, m: usize, l: usize) -> BlockWeight {
    let blocks = branch_block_weights(method, n, m, l);
    BlockWeight {
        depth: blocks.iter().map(|b| b.depth).sum::<u64>(),
        cnot: blocks.iter().map(|b| b.cnot).sum(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixerCost {
    /// `log₂ N` CSWAP layers.
    pub cswap_depth: u64,
    /// Depth of the ancilla preparation on its own.
    pub prep_depth: u64,
    /// Layers the preparation adds in front of the CSWAP layers. Elementary
    /// CSWAPs first touch the control in their second layer, which absorbs
    /// one layer of preparation.
    pub prep_overhang: u64,
    pub cnot: u64,
    pub ancillas: usize,
}

impl MixerCost {
    pub fn depth(&self) -> u64 {
        self.prep_overhang + self.cswap_depth
    }
}

pub fn mixer_cost(num_states: usize, state_width: usize, mode: MixMode) -> MixerCost {
    assert!(is_power_of_two(num_states), "mixer needs a power-of-two register count");
    let layers = ceil_log2(num_states) as u64;
    let nodes = num_states as u64 - 1;
    if layers == 0 {
        return MixerCost {
            cswap_depth: 0,
            prep_depth: 0,
            prep_overhang: 0,
            cnot: 0,
            ancillas: 0,
        };
    }
    let q = state_width as u64;
    let elementary = mode == MixMode::Fanout || state_width == 1;
    let (layer_depth, node_cnot, prep_depth) = match mode {
        MixMode::Shared => (
            multi_target_cswap_depth_weight(state_width),
            multi_target_cswap_cnot_weight(state_width),
            1,
        ),
        MixMode::Fanout => (
            CSWAP_DEPTH,
            q * CSWAP_CNOTS + (q - 1),
            1 + ceil_log2(state_width) as u64,
        ),
    };
    MixerCost {
        cswap_depth: layers * layer_depth,
        prep_depth,
        prep_overhang: if elementary { prep_depth - 1 } else { prep_depth },
        cnot: nodes * node_cnot,
        ancillas: mixer_ancilla_count(num_states, state_width, mode),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub method: DilationMethod,
    pub n: usize,
    pub m: usize,
    pub group_size: usize,
    pub ancilla_mode: MixMode,
    /// Weighted layered depth of the full circuit.
    pub depth: u64,
    pub cnot_count: u64,
    pub qubit_count: usize,
    pub success_probability: f64,
    pub expected_shots: f64,
    /// Branches after padding to a power of two (1 for Stinespring).
    pub branches: usize,
    pub branch_depth: u64,
    pub branch_cnot: u64,
    pub mixer: MixerCost,
    /// Unrounded formula CNOTs of all dilation blocks.
    pub dilation_cnot_formula: f64,
    pub uncounted_terms: f64,
    /// True when `ℓ = m > 1`: Stinespring achieves the same with certainty.
    pub stinespring_dominates: bool,
}

/// Branch count for `m` operators grouped by `ℓ`, padded to a power of two.
pub fn branch_count(m: usize, l: usize) -> usize {
    m.div_ceil(l.max(1)).max(1).next_power_of_two()
}

pub fn combined_cost(method: DilationMethod, n: usize, m: usize, l: usize, mode: MixMode) -> CostReport {
    let m = m.max(1);
    let formula = dilation_cost(method, n, m, l);
    if method == DilationMethod::Stinespring {
        let b = branch_cost(method, n, m, 1);
        return CostReport {
            method,
            n,
            m,
            group_size: 1,
            ancilla_mode: mode,
            depth: b.depth,
            cnot_count: b.cnot,
            qubit_count: n + ceil_log2(m),
            success_probability: 1.0,
            expected_shots: 1.0,
            branches: 1,
            branch_depth: b.depth,
            branch_cnot: b.cnot,
            mixer: mixer_cost(1, n, mode),
            dilation_cnot_formula: formula.cnot,
            uncounted_terms: formula.uncounted_terms,
            stinespring_dominates: false,
        };
    }
    let branches = branch_count(m, l);
    let width = n + ceil_log2(l) + 1;
    let b = branch_cost(method, n, m, l);
    let mixer = mixer_cost(branches, width, mode);
    let p = 1.0 / branches as f64;
    let depth = if branches == 1 {
        b.depth
    } else {
        b.depth.max(mixer.prep_overhang) + mixer.cswap_depth
    };
    let per_branch_formula = formula.cnot + formula.diagonal_cnots;
    CostReport {
        method,
        n,
        m,
        group_size: l,
        ancilla_mode: mode,
        depth,
        cnot_count: branches as u64 * b.cnot + mixer.cnot,
        qubit_count: branches * width + mixer.ancillas,
        success_probability: p,
        expected_shots: 1.0 / p,
        branches,
        branch_depth: b.depth,
        branch_cnot: b.cnot,
        mixer,
        dilation_cnot_formula: branches as f64 * per_branch_formula,
        uncounted_terms: branches as f64 * formula.uncounted_terms,
        stinespring_dominates: l > 1 && l == m,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub rows: Vec<CostReport>,
    pub cnot_non_increasing: bool,
    pub depth_non_decreasing: bool,
    /// Group size with the smallest CNOT/depth ratio.
    pub best_ratio_group: usize,
}

/// Costs for `ℓ = 1, 2, 4, …, m'` where `m'` is `m` padded to a power of two.
pub fn sweep_group_sizes(method: DilationMethod, n: usize, m: usize, mode: MixMode) -> Sweep {
    let top = m.max(1).next_power_of_two();
    let rows: Vec<CostReport> = std::iter::successors(Some(1usize), |l| Some(l * 2))
        .take_while(|&l| l <= top)
        .map(|l| combined_cost(method, n, top, l, mode))
        .collect();
    let cnot_non_increasing = rows.windows(2).all(|w| w[1].cnot_count <= w[0].cnot_count);
    let depth_non_decreasing = rows.windows(2).all(|w| w[1].depth >= w[0].depth);
    let ratio = |r: &CostReport| r.cnot_count as f64 / r.depth.max(1) as f64;
    let best_ratio_group = rows
        .iter()
        .min_by(|a, b| ratio(a).total_cmp(&ratio(b)))
        .map_or(1, |r| r.group_size);
    Sweep {
        rows,
        cnot_non_increasing,
        depth_non_decreasing,
        best_ratio_group,
    }
}

pub const CSV_HEADER: &str = "method,n,m,l,mode,depth,cnot,qubits,p_success,shots";

pub fn to_csv(rows: &[CostReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.16e},{:.16e}",
            r.method,
            r.n,
            r.m,
            r.group_size,
            r.ancilla_mode,
            r.depth,
            r.cnot_count,
            r.qubit_count,
            r.success_probability,
            r.expected_shots
        );
    }
    out
}
