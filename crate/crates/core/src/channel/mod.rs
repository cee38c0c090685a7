//! Kraus-set channel model.
//!
//! [`apply_channel`] is the reference semantics every synthesized circuit is
//! checked against.

mod fmo;
mod grouping;

pub use fmo::{fmo_initial_state, fmo_kraus_set, fmo_trajectory, FmoParams, TrajectoryPoint, FMO_DIM, FMO_SITES};
pub use grouping::{group_kraus, GroupedKrausSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{self, CMatrix, LinalgError};
use crate::state::{gaussian, DensityMatrix};

/// Default CPTP tolerance for validation.
pub const DEFAULT_CPTP_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("Kraus operators are not trace preserving: max |sum M^dag M - I| = {deviation:.3e} exceeds {tol:.1e}")]
    NotTracePreserving { deviation: f64, tol: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("empty Kraus set")]
    Empty,
    #[error("invalid group size {group} for {count} operators (must be a power of two in 1..=m)")]
    InvalidGroupSize { group: usize, count: usize },
    #[error("invalid FMO rates: {0}")]
    InvalidRates(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A validated set of Kraus operators `{M_k}` with `Σ M_k† M_k = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    dim: usize,
    operators: Vec<CMatrix>,
    deviation: f64,
}

impl KrausSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_qubits(&self) -> usize {
        self.dim.trailing_zeros() as usize
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    /// `‖Σ M† M − I‖_max` recorded at validation time.
    pub fn deviation(&self) -> f64 {
        self.deviation
    }

    /// A minimal Kraus representation never needs more than `d²` operators.
    pub fn is_minimal_size(&self) -> bool {
        self.operators.len() <= self.dim * self.dim
    }

    /// Applies `ρ ↦ Σ M ρ M†` to an arbitrary square matrix.
    pub fn apply_to_matrix(&self, rho: &CMatrix) -> Result<CMatrix, ChannelError> {
        if !rho.is_square() || rho.rows() != self.dim {
            return Err(ChannelError::DimensionMismatch(format!(
                "channel acts on dimension {} but input is {}x{}",
                self.dim,
                rho.rows(),
                rho.cols()
            )));
        }
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for m in &self.operators {
            out = &out + &(m * rho * &m.adjoint());
        }
        Ok(out)
    }
}

/// `Σ M† M` over a slice of operators.
pub fn completeness_sum(ops: &[CMatrix]) -> CMatrix {
    let d = ops[0].cols();
    ops.iter()
        .fold(CMatrix::zeros(d, d), |acc, m| &acc + &(m.adjoint() * m))
}

/// Checks shapes and the trace-preservation condition `Σ M† M = I`.
pub fn validate_cptp(ops: Vec<CMatrix>, tol: f64) -> Result<KrausSet, ChannelError> {
    let first = ops.first().ok_or(ChannelError::Empty)?;
    let dim = first.rows();
    if let Some((k, m)) = ops.iter().enumerate().find(|(_, m)| m.rows() != dim || m.cols() != dim) {
        return Err(ChannelError::DimensionMismatch(format!(
            "operator {k} is {}x{}, expected {dim}x{dim}",
            m.rows(),
            m.cols()
        )));
    }
    if !linalg::is_power_of_two(dim) {
        return Err(ChannelError::NotPowerOfTwo(dim));
    }
    let deviation = completeness_sum(&ops).max_abs_diff(&CMatrix::identity(dim));
    if deviation > tol {
        return Err(ChannelError::NotTracePreserving { deviation, tol });
    }
    Ok(KrausSet {
        dim,
        operators: ops,
        deviation,
    })
}

/// Builds a set without checking the completeness relation. Shapes are still
/// checked. Used for `--no-validate` ingestion.
pub fn unvalidated_kraus_set(ops: Vec<CMatrix>) -> Result<KrausSet, ChannelError> {
    validate_cptp(ops, f64::INFINITY)
}

/// The oracle: `Λ(ρ) = Σ_k M_k ρ M_k†`.
pub fn apply_channel(k: &KrausSet, rho: &DensityMatrix) -> Result<DensityMatrix, ChannelError> {
    let out = k.apply_to_matrix(rho.matrix())?;
    let out = (&out + &out.adjoint()).scale_real(0.5);
    Ok(DensityMatrix::new_unchecked(out).expect("square power-of-two output"))
}

/// Random CPTP map with `m` operators on `n` qubits.
///
/// Samples complex Gaussian matrices `G_k`, then normalizes with
/// `M_k = G_k S^{-1/2}` where `S = Σ G_k† G_k`. Deterministic per seed.
pub fn random_kraus_set(n: usize, m: usize, seed: u64) -> KrausSet {
    assert!(n >= 1 && m >= 1, "need at least one qubit and one operator");
    let dim = 1usize << n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gs: Vec<CMatrix> = (0..m)
        .map(|_| {
            let data = (0..dim * dim).map(|_| gaussian(&mut rng)).collect();
            CMatrix::from_row_major(dim, dim, data).expect("shape")
        })
        .collect();
    let s = completeness_sum(&gs);
    let s_inv_sqrt = linalg::inverse_sqrt(&s, 1e-12).expect("Gaussian Gram matrix is positive definite");
    let ops: Vec<CMatrix> = gs.iter().map(|g| g * &s_inv_sqrt).collect();
    validate_cptp(ops, DEFAULT_CPTP_TOL).expect("normalized set is CPTP")
}
