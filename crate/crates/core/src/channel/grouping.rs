//! Packing `ℓ` Kraus operators into one expanded operator on an `ℓd`-dimensional
//! space.
//!
//! Expanded index layout is `g·d + i`: the grouping register is the most
//! significant factor, so every expanded operator is a block matrix whose
//! first block column holds the stacked original operators.

use super::{validate_cptp, ChannelError, KrausSet, DEFAULT_CPTP_TOL};
use crate::linalg::{self, CMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct GroupedKrausSet {
    base: KrausSet,
    group_size: usize,
    /// All expanded operators, validated as a CPTP set on the expanded space.
    expanded: KrausSet,
    includes_identity_block: bool,
}

impl GroupedKrausSet {
    pub fn base(&self) -> &KrausSet {
        &self.base
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn expanded_dim(&self) -> usize {
        self.group_size * self.base.dim()
    }

    /// Number of grouping qubits, `log₂ ℓ`.
    pub fn grouping_qubits(&self) -> usize {
        self.group_size.trailing_zeros() as usize
    }

    pub fn operators(&self) -> &[CMatrix] {
        self.expanded.operators()
    }

    pub fn includes_identity_block(&self) -> bool {
        self.includes_identity_block
    }

    /// Expanded operators that carry original Kraus operators, i.e. all of
    /// them except the trailing identity-block operator. The identity block
    /// annihilates every input of the form `ψ ⊗ |0⟩`, so circuits only need
    /// these.
    pub fn branch_operators(&self) -> &[CMatrix] {
        let ops = self.expanded.operators();
        if self.includes_identity_block {
            &ops[..ops.len() - 1]
        } else {
            ops
        }
    }

    /// The expanded operators as a channel on the `ℓd`-dimensional space.
    pub fn as_kraus_set(&self) -> &KrausSet {
        &self.expanded
    }

    /// The `ℓ = m` case reproduces a Stinespring isometry with extra overhead.
    pub fn stinespring_dominates(&self) -> bool {
        self.group_size > 1 && self.group_size == self.base.len()
    }
}

/// Groups `ℓ` consecutive Kraus operators per expanded operator.
///
/// With `m = ℓ·b + r`: `b` full groups, one zero-padded partial group when
/// `r > 0`, and for `ℓ > 1` a final operator with a zero top-left `d×d` block
/// and identity elsewhere on the diagonal.
pub fn group_kraus(k: &KrausSet, group_size: usize) -> Result<GroupedKrausSet, ChannelError> {
    let m = k.len();
    if !linalg::is_power_of_two(group_size) || group_size > m {
        return Err(ChannelError::InvalidGroupSize {
            group: group_size,
            count: m,
        });
    }
    if group_size == 1 {
        return Ok(GroupedKrausSet {
            base: k.clone(),
            group_size,
            expanded: k.clone(),
            includes_identity_block: false,
        });
    }

    let d = k.dim();
    let big = group_size * d;
    let mut ops: Vec<CMatrix> = k
        .operators()
        .chunks(group_size)
        .map(|chunk| {
            let mut e = CMatrix::zeros(big, big);
            for (g, op) in chunk.iter().enumerate() {
                e.set_block(g * d, 0, op);
            }
            e
        })
        .collect();

    let mut identity_block = CMatrix::identity(big);
    for i in 0..d {
        identity_block[(i, i)] = 0.0.into();
    }
    ops.push(identity_block);

    let expanded = validate_cptp(ops, DEFAULT_CPTP_TOL.max(k.deviation() * 2.0))?;
    Ok(GroupedKrausSet {
        base: k.clone(),
        group_size,
        expanded,
        includes_identity_block: true,
    })
}
