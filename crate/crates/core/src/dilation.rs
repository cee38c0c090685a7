//! Dilation back-ends: Stinespring isometry, Sz.-Nagy unitary and SVD
//! dilation.
//!
//! Every dilated matrix places the ancilla (or environment) register as the
//! most significant index, so the Kraus operator sits in the top-left block
//! (Sz.-Nagy, SVD) or in block row `k` of the first block column
//! (Stinespring).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::KrausSet;
use crate::linalg::{self, ceil_log2, complete_isometry, kron, psd_sqrt_floored, CMatrix, LinalgError, C64};

/// Operators whose spectral norm exceeds `1 + CONTRACTION_TOL` are rejected;
/// singular values in `(1, 1 + CONTRACTION_TOL]` are clamped to 1.
pub const CONTRACTION_TOL: f64 = 1e-9;
/// Eigenvalue clamping threshold for defect operators.
const DEFECT_TOL: f64 = 1e-8;
/// Eigenvalues of `I − T†T` below this are roundoff around zero.
const DEFECT_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DilationError {
    #[error("operator is not a contraction (spectral norm {0})")]
    NotContraction(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DilationMethod {
    Stinespring,
    #[serde(rename = "sznagy")]
    SzNagy,
    Svd,
}

impl DilationMethod {
    pub const ALL: [DilationMethod; 3] = [Self::Stinespring, Self::SzNagy, Self::Svd];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Stinespring => "stinespring",
            Self::SzNagy => "sznagy",
            Self::Svd => "svd",
        }
    }
}

impl fmt::Display for DilationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DilationMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "stinespring" => Ok(Self::Stinespring),
            "sznagy" | "sz-nagy" | "sz.-nagy" => Ok(Self::SzNagy),
            "svd" => Ok(Self::Svd),
            other => Err(format!("unknown dilation method '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DilationArtifact {
    Stinespring {
        /// `(m'·d) × d` isometry stacking `M_1 … M_m` (zero blocks for padding).
        isometry: CMatrix,
        /// Square unitary completion of `isometry`.
        unitary: CMatrix,
        ancilla_qubits: usize,
    },
    SzNagy {
        /// `[[M, D_{M†}], [D_M, −M†]]`.
        unitary: CMatrix,
        source_index: Option<usize>,
    },
    Svd {
        u: CMatrix,
        vdag: CMatrix,
        singular_values: Vec<f64>,
        sigma_plus: Vec<C64>,
        sigma_minus: Vec<C64>,
        source_index: Option<usize>,
    },
}

impl DilationArtifact {
    pub fn method(&self) -> DilationMethod {
        match self {
            Self::Stinespring { .. } => DilationMethod::Stinespring,
            Self::SzNagy { .. } => DilationMethod::SzNagy,
            Self::Svd { .. } => DilationMethod::Svd,
        }
    }

    pub fn ancilla_qubits(&self) -> usize {
        match self {
            Self::Stinespring { ancilla_qubits, .. } => *ancilla_qubits,
            Self::SzNagy { .. } | Self::Svd { .. } => 1,
        }
    }

    pub fn source_index(&self) -> Option<usize> {
        match self {
            Self::Stinespring { .. } => None,
            Self::SzNagy { source_index, .. } | Self::Svd { source_index, .. } => *source_index,
        }
    }

    /// Dimension of the operator(s) being dilated.
    pub fn system_dim(&self) -> usize {
        match self {
            Self::Stinespring { isometry, .. } => isometry.cols(),
            Self::SzNagy { unitary, .. } => unitary.rows() / 2,
            Self::Svd { u, .. } => u.rows(),
        }
    }

    /// `U_Σ = diag(Σ⁺) ⊕ diag(Σ⁻)`; only defined for SVD artifacts.
    pub fn sigma_dilation(&self) -> Option<CMatrix> {
        match self {
            Self::Svd {
                sigma_plus,
                sigma_minus,
                ..
            } => Some(CMatrix::diag(sigma_plus).direct_sum(&CMatrix::diag(sigma_minus))),
            _ => None,
        }
    }

    /// The full dilated unitary. For SVD this is the assembled
    /// `(H ⊗ U) · U_Σ · (H ⊗ V†)` with the ancilla most significant.
    pub fn dilated_unitary(&self) -> CMatrix {
        match self {
            Self::Stinespring { unitary, .. } => unitary.clone(),
            Self::SzNagy { unitary, .. } => unitary.clone(),
            Self::Svd { u, vdag, .. } => {
                let h = hadamard();
                let sigma = self.sigma_dilation().expect("svd artifact");
                kron(&h, u) * &sigma * &kron(&h, vdag)
            }
        }
    }

    /// The block that acts on `ψ ⊗ |0⟩` and lands back on ancilla `|0⟩`.
    pub fn system_block(&self) -> CMatrix {
        let d = self.system_dim();
        self.dilated_unitary().submatrix(0, 0, d, d)
    }
}

pub(crate) fn hadamard() -> CMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_real(2, 2, &[h, h, h, -h])
}

/// Stacks the Kraus operators into an isometry `V = Σ_k |k⟩ ⊗ M_k`, padding
/// the operator count to a power of two, and completes it to a unitary.
pub fn stinespring_isometry(k: &KrausSet) -> Result<DilationArtifact, DilationError> {
    let d = k.dim();
    let ancilla_qubits = ceil_log2(k.len());
    let padded = 1usize << ancilla_qubits;
    let mut isometry = CMatrix::zeros(padded * d, d);
    for (j, op) in k.operators().iter().enumerate() {
        isometry.set_block(j * d, 0, op);
    }
    // The Kraus set was validated at its own tolerance; allow for that.
    let tol = linalg::DEFAULT_ISOMETRY_TOL.max(4.0 * k.deviation());
    let unitary = complete_isometry(&isometry, tol)?;
    Ok(DilationArtifact::Stinespring {
        isometry,
        unitary,
        ancilla_qubits,
    })
}

fn check_contraction(m: &CMatrix) -> Result<f64, DilationError> {
    if !m.is_square() {
        return Err(LinalgError::DimensionMismatch(format!(
            "dilation needs a square operator, got {}x{}",
            m.rows(),
            m.cols()
        ))
        .into());
    }
    let norm = linalg::spectral_norm(m)?;
    if norm > 1.0 + CONTRACTION_TOL {
        return Err(DilationError::NotContraction(norm));
    }
    Ok(norm)
}

/// Defect operator `D_T = √(I − T†T)`.
pub fn defect_operator(t: &CMatrix) -> Result<CMatrix, LinalgError> {
    let n = t.cols();
    psd_sqrt_floored(&(&CMatrix::identity(n) - &(t.adjoint() * t)), DEFECT_TOL, DEFECT_FLOOR)
}

/// Sz.-Nagy unitary dilation `[[M, D_{M†}], [D_M, −M†]]`.
pub fn sznagy_unitary(m: &CMatrix) -> Result<DilationArtifact, DilationError> {
    sznagy_indexed(m, None)
}

pub(crate) fn sznagy_indexed(m: &CMatrix, source_index: Option<usize>) -> Result<DilationArtifact, DilationError> {
    check_contraction(m)?;
    let d = m.rows();
    let mdag = m.adjoint();
    let mut unitary = CMatrix::zeros(2 * d, 2 * d);
    unitary.set_block(0, 0, m);
    unitary.set_block(0, d, &defect_operator(&mdag)?);
    unitary.set_block(d, 0, &defect_operator(m)?);
    unitary.set_block(d, d, &mdag.scale_real(-1.0));
    Ok(DilationArtifact::SzNagy { unitary, source_index })
}

/// `σ ± i√(1 − σ²)` for a singular value already clamped to `[0, 1]`.
pub fn sigma_pm(sigma: f64) -> (C64, C64) {
    let imag = (1.0 - sigma * sigma).max(0.0).sqrt();
    (C64::new(sigma, imag), C64::new(sigma, -imag))
}

/// SVD dilation: `M = U Σ V†` with `Σ` dilated to the unimodular diagonal
/// `Σ⁺ ⊕ Σ⁻`.
pub fn svd_dilation(m: &CMatrix) -> Result<DilationArtifact, DilationError> {
    svd_indexed(m, None)
}

pub(crate) fn svd_indexed(m: &CMatrix, source_index: Option<usize>) -> Result<DilationArtifact, DilationError> {
    if !m.is_square() {
        return Err(LinalgError::DimensionMismatch(format!(
            "dilation needs a square operator, got {}x{}",
            m.rows(),
            m.cols()
        ))
        .into());
    }
    let svd = linalg::svd_factorize(m)?;
    if let Some(&top) = svd.s.first() {
        if top > 1.0 + CONTRACTION_TOL {
            return Err(DilationError::NotContraction(top));
        }
    }
    let singular_values: Vec<f64> = svd.s.iter().map(|&s| s.min(1.0)).collect();
    let (sigma_plus, sigma_minus) = singular_values.iter().map(|&s| sigma_pm(s)).unzip();
    Ok(DilationArtifact::Svd {
        u: svd.u,
        vdag: svd.vdag,
        singular_values,
        sigma_plus,
        sigma_minus,
        source_index,
    })
}

/// Dilates a single (possibly expanded) operator with a one-ancilla method.
pub fn dilate_operator(
    method: DilationMethod,
    m: &CMatrix,
    source_index: Option<usize>,
) -> Result<DilationArtifact, DilationError> {
    match method {
        DilationMethod::SzNagy => sznagy_indexed(m, source_index),
        DilationMethod::Svd => svd_indexed(m, source_index),
        DilationMethod::Stinespring => Err(LinalgError::DimensionMismatch(
            "stinespring dilates whole Kraus sets, not single operators".into(),
        )
        .into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_channel, random_kraus_set, validate_cptp, DEFAULT_CPTP_TOL};
    use crate::linalg::partial_trace;
    use crate::state::DensityMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn amplitude_damping(g: f64) -> KrausSet {
        validate_cptp(
            vec![
                CMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, (1.0 - g).sqrt()]),
                CMatrix::from_real(2, 2, &[0.0, g.sqrt(), 0.0, 0.0]),
            ],
            DEFAULT_CPTP_TOL,
        )
        .unwrap()
    }

    #[test]
    fn stinespring_identity_has_no_ancilla() {
        let k = validate_cptp(vec![CMatrix::identity(2)], DEFAULT_CPTP_TOL).unwrap();
        let art = stinespring_isometry(&k).unwrap();
        assert_eq!(art.ancilla_qubits(), 0);
        assert_eq!(art.dilated_unitary(), CMatrix::identity(2));
    }

    #[test]
    fn stinespring_amplitude_damping_matches_oracle() {
        let k = amplitude_damping(0.3);
        let art = stinespring_isometry(&k).unwrap();
        let DilationArtifact::Stinespring { isometry, .. } = &art else {
            unreachable!()
        };
        assert_eq!((isometry.rows(), isometry.cols()), (4, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let rho = DensityMatrix::random_mixed(1, 2, &mut rng);
            let out = isometry * rho.matrix() * &isometry.adjoint();
            let reduced = partial_trace(&out, &[2, 2], &[1]).unwrap();
            let oracle = apply_channel(&k, &rho).unwrap();
            assert!(reduced.max_abs_diff(oracle.matrix()) <= 1e-10);
        }
    }

    #[test]
    fn stinespring_random_set_shapes() {
        let k = random_kraus_set(2, 16, 3);
        let art = stinespring_isometry(&k).unwrap();
        let DilationArtifact::Stinespring {
            isometry,
            unitary,
            ancilla_qubits,
        } = &art
        else {
            unreachable!()
        };
        assert_eq!((isometry.rows(), isometry.cols()), (64, 4));
        assert_eq!(*ancilla_qubits, 4);
        assert!(isometry.is_isometry(1e-9));
        assert!(unitary.is_unitary(1e-9));
        for (j, op) in k.operators().iter().enumerate() {
            assert!(isometry.submatrix(4 * j, 0, 4, 4).max_abs_diff(op) < 1e-15);
        }
    }

    #[test]
    fn stinespring_pads_non_power_of_two() {
        let k = random_kraus_set(1, 3, 3);
        let art = stinespring_isometry(&k).unwrap();
        assert_eq!(art.ancilla_qubits(), 2);
        let DilationArtifact::Stinespring { isometry, .. } = &art else {
            unreachable!()
        };
        assert_eq!(isometry.submatrix(6, 0, 2, 2), CMatrix::zeros(2, 2));
    }

    #[test]
    fn sznagy_limit_cases() {
        let i2 = CMatrix::identity(2);
        let u = sznagy_unitary(&i2).unwrap().dilated_unitary();
        let mut expected = CMatrix::identity(4);
        expected[(2, 2)] = (-1.0).into();
        expected[(3, 3)] = (-1.0).into();
        assert!(u.max_abs_diff(&expected) < 1e-12);

        let u = sznagy_unitary(&CMatrix::zeros(2, 2)).unwrap().dilated_unitary();
        let swap_blocks = CMatrix::from_real(4, 4, &[0., 0., 1., 0., 0., 0., 0., 1., 1., 0., 0., 0., 0., 1., 0., 0.]);
        assert!(u.max_abs_diff(&swap_blocks) < 1e-12);

        let half = i2.scale_real(0.5f64.sqrt());
        let u = sznagy_unitary(&half).unwrap().dilated_unitary();
        assert!(u.submatrix(2, 0, 2, 2).max_abs_diff(&half) < 1e-12);
        assert!(u.submatrix(0, 2, 2, 2).max_abs_diff(&half) < 1e-12);
        assert!(u.is_unitary(1e-12));
    }

    #[test]
    fn sznagy_rejects_expanding_operator() {
        let big = CMatrix::identity(2).scale_real(1.1);
        assert!(matches!(sznagy_unitary(&big), Err(DilationError::NotContraction(_))));
        assert!(matches!(svd_dilation(&big), Err(DilationError::NotContraction(_))));
    }

    #[test]
    fn sigma_pm_values() {
        assert_eq!(sigma_pm(1.0), (C64::new(1.0, 0.0), C64::new(1.0, 0.0)));
        assert_eq!(sigma_pm(0.0), (C64::new(0.0, 1.0), C64::new(0.0, -1.0)));
        let art = svd_dilation(&CMatrix::from_real(2, 2, &[0.5, 0.0, 0.0, 1.0])).unwrap();
        let DilationArtifact::Svd {
            sigma_plus,
            sigma_minus,
            ..
        } = &art
        else {
            unreachable!()
        };
        // Singular values are sorted descending: (1, 0.5).
        assert!((sigma_plus[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((sigma_plus[1] - C64::new(0.5, 0.75f64.sqrt())).norm() < 1e-15);
        assert!((sigma_minus[1] - C64::new(0.5, -0.75f64.sqrt())).norm() < 1e-15);
        let sigma = art.sigma_dilation().unwrap();
        assert!(sigma.is_unitary(1e-12));
    }

    #[test]
    fn every_dilation_embeds_its_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for seed in 0..6u64 {
            let n = 1 + seed as usize % 2;
            let k = random_kraus_set(n, 4, seed);
            for (j, op) in k.operators().iter().enumerate() {
                for method in [DilationMethod::SzNagy, DilationMethod::Svd] {
                    let art = dilate_operator(method, op, Some(j)).unwrap();
                    let u = art.dilated_unitary();
                    assert!(u.is_unitary(1e-9), "{method} not unitary");
                    assert!(art.system_block().max_abs_diff(op) <= 1e-9, "{method} block");

                    // p_k = ‖M ψ‖² on a random pure state.
                    let psi = DensityMatrix::random_pure(n, &mut rng);
                    let d = k.dim();
                    let mut big = CMatrix::zeros(2 * d, 2 * d);
                    big.set_block(0, 0, psi.matrix());
                    let out = &u * &big * &u.adjoint();
                    let p_anc0 = out.submatrix(0, 0, d, d).trace().re;
                    let direct = (op * psi.matrix() * &op.adjoint()).trace().re;
                    assert!((p_anc0 - direct).abs() <= 1e-10);
                }
            }
        }
    }
}
