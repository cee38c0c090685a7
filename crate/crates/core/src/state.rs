//! Density-matrix state type shared by the channel oracle and the simulator.
//!
//! Basis ordering is little-endian: qubit 0 is the least significant bit of
//! the basis index.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg::{hermitian_eigen, CMatrix, C64};

/// Hermiticity and trace tolerance for validated states.
pub const STATE_TOL: f64 = 1e-10;
/// Smallest eigenvalue accepted for a validated state.
pub const EIGEN_FLOOR: f64 = -1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("state dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("state is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("state trace is {0}, expected 1")]
    BadTrace(f64),
    #[error("state has negative eigenvalue {0:.3e}")]
    NotPsd(f64),
    #[error("pure state has zero norm")]
    ZeroNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: CMatrix) -> Result<Self, StateError> {
        let rho = Self::new_unchecked(matrix)?;
        let dev = rho.matrix.hermitian_deviation();
        if dev > STATE_TOL {
            return Err(StateError::NotHermitian(dev));
        }
        let tr = rho.matrix.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(StateError::BadTrace(tr.re));
        }
        if let Ok((vals, _)) = hermitian_eigen(&rho.matrix) {
            if let Some(&min) = vals.first() {
                if min < EIGEN_FLOOR {
                    return Err(StateError::NotPsd(min));
                }
            }
        }
        Ok(rho)
    }

    /// Only checks the shape; used for intermediate and sub-normalized states.
    pub fn new_unchecked(matrix: CMatrix) -> Result<Self, StateError> {
        if !matrix.is_square() {
            return Err(StateError::DimensionMismatch(format!(
                "{}x{} is not square",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let dim = matrix.rows();
        if !dim.is_power_of_two() {
            return Err(StateError::NotPowerOfTwo(dim));
        }
        Ok(Self {
            num_qubits: dim.trailing_zeros() as usize,
            matrix,
        })
    }

    /// `|ψ⟩⟨ψ|` for a normalized copy of `amplitudes`.
    pub fn from_pure(amplitudes: &[C64]) -> Result<Self, StateError> {
        let dim = amplitudes.len();
        if !dim.is_power_of_two() {
            return Err(StateError::NotPowerOfTwo(dim));
        }
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(StateError::ZeroNorm);
        }
        let mut m = CMatrix::zeros(dim, dim);
        for r in 0..dim {
            for c in 0..dim {
                m[(r, c)] = amplitudes[r] * amplitudes[c].conj() / (norm * norm);
            }
        }
        Self::new_unchecked(m)
    }

    pub fn basis(num_qubits: usize, index: usize) -> Self {
        let dim = 1usize << num_qubits;
        assert!(index < dim, "basis index out of range");
        let mut m = CMatrix::zeros(dim, dim);
        m[(index, index)] = C64::new(1.0, 0.0);
        Self { num_qubits, matrix: m }
    }

    pub fn maximally_mixed(num_qubits: usize) -> Self {
        let dim = 1usize << num_qubits;
        Self {
            num_qubits,
            matrix: CMatrix::identity(dim).scale_real(1.0 / dim as f64),
        }
    }

    /// Haar-like random pure state from normalized complex Gaussians.
    pub fn random_pure(num_qubits: usize, rng: &mut impl Rng) -> Self {
        let dim = 1usize << num_qubits;
        let amps: Vec<C64> = (0..dim).map(|_| gaussian(rng)).collect();
        Self::from_pure(&amps).expect("gaussian vector is non-zero")
    }

    /// Random mixed state `G G† / Tr(G G†)` with `G` a `dim x rank` Gaussian.
    pub fn random_mixed(num_qubits: usize, rank: usize, rng: &mut impl Rng) -> Self {
        let dim = 1usize << num_qubits;
        let rank = rank.max(1);
        let data = (0..dim * rank).map(|_| gaussian(rng)).collect();
        let g = CMatrix::from_row_major(dim, rank, data).expect("shape");
        let m = g.clone() * &g.adjoint();
        let tr = m.trace().re;
        let m = m.scale_real(1.0 / tr);
        let m = (&m + &m.adjoint()).scale_real(0.5);
        Self { num_qubits, matrix: m }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Diagonal entry `⟨i|ρ|i⟩`.
    pub fn population(&self, index: usize) -> f64 {
        self.matrix[(index, index)].re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigen(&self.matrix)
            .ok()
            .and_then(|(v, _)| v.first().copied())
            .unwrap_or(f64::NAN)
    }
}

pub(crate) fn gaussian(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
