//! Dense complex matrix kernel.
//!
//! [`CMatrix`] is a plain row-major complex matrix. The heavy decompositions
//! (SVD and Hermitian eigendecomposition) are delegated to `nalgebra`; the
//! operations built on top of them (PSD square root, isometry completion,
//! partial trace) live here.
//!
//! Tensor-product convention: `kron(a, b)` makes `a` the most significant
//! factor, and [`partial_trace`] numbers subsystems in the same order
//! (subsystem 0 is the leftmost factor).

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

/// Default eigenvalue clamping threshold for [`psd_sqrt`].
pub const DEFAULT_PSD_TOL: f64 = 1e-10;
/// Default tolerance for the isometry precondition of [`complete_isometry`].
pub const DEFAULT_ISOMETRY_TOL: f64 = 1e-9;
/// Candidate basis vectors whose residual norm falls below this are skipped
/// during Gram-Schmidt completion.
const COMPLETION_SKIP_NORM: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("matrix is not an isometry (max deviation of A^dag A from I is {0:.3e})")]
    NotIsometry(f64),
    #[error("decomposition did not converge")]
    ConvergenceFailure,
}

#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self::from_row_major(rows.len(), cols, rows.concat()).expect("non-empty rows")
    }

    /// Real-valued convenience constructor for tests and fixed gates.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Self {
        let data = data.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_row_major(rows, cols, data).expect("matching length")
    }

    pub fn diag(entries: &[C64]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &z) in entries.iter().enumerate() {
            m[(i, i)] = z;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Checked matrix product.
    pub fn matmul(&self, rhs: &Self) -> Result<Self, LinalgError> {
        if self.cols != rhs.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "max_abs_diff on mismatched shapes"
        );
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for r in 0..self.rows {
            for c in r..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// `‖A†A − I‖_max`.
    pub fn isometry_deviation(&self) -> f64 {
        let gram = self.adjoint() * self;
        gram.max_abs_diff(&Self::identity(self.cols))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    pub fn is_isometry(&self, tol: f64) -> bool {
        self.rows >= self.cols && self.isometry_deviation() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.is_square() && self.is_isometry(tol)
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        if !self.is_hermitian(tol) {
            return false;
        }
        hermitian_eigen(self)
            .map(|(vals, _)| vals.first().is_none_or(|&v| v >= -tol))
            .unwrap_or(false)
    }

    /// Copies the `rows x cols` block starting at `(r0, c0)`.
    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols, "block out of range");
        let mut out = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                out[(r, c)] = self[(r0 + r, c0 + c)];
            }
        }
        out
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Self) {
        assert!(
            r0 + block.rows <= self.rows && c0 + block.cols <= self.cols,
            "block out of range"
        );
        for r in 0..block.rows {
            for c in 0..block.cols {
                self[(r0 + r, c0 + c)] = block[(r, c)];
            }
        }
    }

    /// Block-diagonal direct sum `self ⊕ other`.
    pub fn direct_sum(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows + other.rows, self.cols + other.cols);
        out.set_block(0, 0, self);
        out.set_block(self.rows, self.cols, other);
        out
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

// Operator impls panic on shape mismatch; use `matmul` for the checked form.
impl Mul<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs).expect("matrix product shape mismatch")
    }
}

impl Mul<&CMatrix> for CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        &self * rhs
    }
}

impl Add<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Kronecker product; `a` is the most significant factor.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = CMatrix::zeros(rows, cols);
    for ar in 0..a.rows {
        for ac in 0..a.cols {
            let s = a[(ar, ac)];
            if s.re == 0.0 && s.im == 0.0 {
                continue;
            }
            for br in 0..b.rows {
                for bc in 0..b.cols {
                    out[(ar * b.rows + br, ac * b.cols + bc)] = s * b[(br, bc)];
                }
            }
        }
    }
    out
}

/// Eigendecomposition of a Hermitian matrix. Eigenvalues are returned in
/// ascending order with the eigenvectors as the matching columns.
pub fn hermitian_eigen(a: &CMatrix) -> Result<(Vec<f64>, CMatrix), LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::DimensionMismatch(format!(
            "eigendecomposition of a {}x{} matrix",
            a.rows, a.cols
        )));
    }
    // Symmetrize so that the solver only ever sees an exactly Hermitian input.
    let sym = (a + &a.adjoint()).scale_real(0.5);
    let eig =
        nalgebra::SymmetricEigen::try_new(sym.to_nalgebra(), f64::EPSILON, 0).ok_or(LinalgError::ConvergenceFailure)?;
    let n = a.rows;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, dst)] = eig.eigenvectors[(r, src)];
        }
    }
    Ok((values, vectors))
}

/// Applies a real function to the spectrum of a Hermitian matrix given its
/// eigendecomposition: `V f(Λ) V†`.
fn spectral_map(values: &[f64], vectors: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let n = values.len();
    let mut scaled = vectors.clone();
    for (c, &v) in values.iter().enumerate() {
        let fv = f(v);
        for r in 0..n {
            scaled[(r, c)] *= fv;
        }
    }
    let out = scaled * &vectors.adjoint();
    (&out + &out.adjoint()).scale_real(0.5)
}

/// Principal square root of a Hermitian positive-semidefinite matrix.
///
/// Eigenvalues in `[-tol, 0)` are clamped to zero; anything more negative is
/// rejected.
pub fn psd_sqrt(a: &CMatrix, tol: f64) -> Result<CMatrix, LinalgError> {
    psd_sqrt_floored(a, tol, 0.0)
}

/// [`psd_sqrt`] that also maps eigenvalues below `floor` to zero, so that
/// roundoff around a zero eigenvalue does not turn into a `√ε` entry.
pub fn psd_sqrt_floored(a: &CMatrix, tol: f64, floor: f64) -> Result<CMatrix, LinalgError> {
    let dev = a.hermitian_deviation();
    if dev > tol {
        return Err(LinalgError::NotHermitian(dev));
    }
    let (values, vectors) = hermitian_eigen(a)?;
    if let Some(&min) = values.first() {
        if min < -tol {
            return Err(LinalgError::NotPsd(min));
        }
    }
    Ok(spectral_map(
        &values,
        &vectors,
        |v| if v < floor { 0.0 } else { v.sqrt() },
    ))
}

/// Inverse square root of a Hermitian positive-definite matrix.
pub fn inverse_sqrt(a: &CMatrix, tol: f64) -> Result<CMatrix, LinalgError> {
    let dev = a.hermitian_deviation();
    if dev > tol {
        return Err(LinalgError::NotHermitian(dev));
    }
    let (values, vectors) = hermitian_eigen(a)?;
    if let Some(&min) = values.first() {
        if min <= tol {
            return Err(LinalgError::NotPsd(min));
        }
    }
    Ok(spectral_map(&values, &vectors, |v| 1.0 / v.sqrt()))
}

#[derive(Debug, Clone)]
pub struct Svd {
    /// Left singular vectors, square unitary.
    pub u: CMatrix,
    /// Singular values in descending order, length `min(rows, cols)`.
    pub s: Vec<f64>,
    /// Adjoint of the right singular vectors, square unitary.
    pub vdag: CMatrix,
}

impl Svd {
    /// `U · diag(s) · V†` using the leading `min(rows, cols)` columns / rows.
    pub fn reconstruct(&self) -> CMatrix {
        let rows = self.u.rows;
        let cols = self.vdag.cols;
        let mut out = CMatrix::zeros(rows, cols);
        for (k, &s) in self.s.iter().enumerate() {
            for r in 0..rows {
                let a = self.u[(r, k)] * s;
                for c in 0..cols {
                    out[(r, c)] += a * self.vdag[(k, c)];
                }
            }
        }
        out
    }
}

/// Full singular value decomposition `A = U Σ V†`.
pub fn svd_factorize(a: &CMatrix) -> Result<Svd, LinalgError> {
    let svd =
        nalgebra::SVD::try_new(a.to_nalgebra(), true, true, f64::EPSILON, 0).ok_or(LinalgError::ConvergenceFailure)?;
    let u_thin = svd.u.as_ref().ok_or(LinalgError::ConvergenceFailure)?;
    let vt_thin = svd.v_t.as_ref().ok_or(LinalgError::ConvergenceFailure)?;
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));

    let s: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut u = CMatrix::zeros(a.rows, k);
    let mut v = CMatrix::zeros(a.cols, k);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..a.rows {
            u[(r, dst)] = u_thin[(r, src)];
        }
        for c in 0..a.cols {
            v[(c, dst)] = vt_thin[(src, c)].conj();
        }
    }
    let u = if u.cols < u.rows {
        complete_isometry(&u, 1e-8)?
    } else {
        u
    };
    let v = if v.cols < v.rows {
        complete_isometry(&v, 1e-8)?
    } else {
        v
    };
    Ok(Svd {
        u,
        s,
        vdag: v.adjoint(),
    })
}

/// Largest singular value.
pub fn spectral_norm(a: &CMatrix) -> Result<f64, LinalgError> {
    Ok(svd_factorize(a)?.s.first().copied().unwrap_or(0.0))
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Extends an isometry `V` (rows ≥ cols) to a square unitary whose leading
/// columns are exactly `V`.
///
/// New columns come from Gram-Schmidt over standard basis vectors, with one
/// re-orthogonalization pass per candidate.
pub fn complete_isometry(v: &CMatrix, tol: f64) -> Result<CMatrix, LinalgError> {
    if v.rows < v.cols {
        return Err(LinalgError::DimensionMismatch(format!(
            "cannot complete a {}x{} matrix (more columns than rows)",
            v.rows, v.cols
        )));
    }
    let dev = v.isometry_deviation();
    if dev > tol {
        return Err(LinalgError::NotIsometry(dev));
    }
    let n = v.rows;
    let mut basis: Vec<Vec<C64>> = (0..v.cols).map(|c| v.column(c)).collect();
    for seed in 0..n {
        if basis.len() == n {
            break;
        }
        let mut cand = vec![C64::new(0.0, 0.0); n];
        cand[seed] = C64::new(1.0, 0.0);
        for _pass in 0..2 {
            for b in &basis {
                let proj = inner(b, &cand);
                for (x, y) in cand.iter_mut().zip(b) {
                    *x -= proj * y;
                }
            }
        }
        let norm = cand.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < COMPLETION_SKIP_NORM {
            continue;
        }
        cand.iter_mut().for_each(|z| *z /= norm);
        basis.push(cand);
    }
    if basis.len() != n {
        return Err(LinalgError::ConvergenceFailure);
    }
    let mut out = CMatrix::zeros(n, n);
    for (c, col) in basis.iter().enumerate() {
        for (r, &z) in col.iter().enumerate() {
            out[(r, c)] = z;
        }
    }
    // Leading columns are copied verbatim from the input.
    for r in 0..n {
        for c in 0..v.cols {
            out[(r, c)] = v[(r, c)];
        }
    }
    Ok(out)
}

/// Partial trace over every subsystem not listed in `keep`.
///
/// `dims[0]` is the most significant factor, matching [`kron`].
pub fn partial_trace(rho: &CMatrix, dims: &[usize], keep: &[usize]) -> Result<CMatrix, LinalgError> {
    let total: usize = dims.iter().product();
    if !rho.is_square() || rho.rows != total {
        return Err(LinalgError::DimensionMismatch(format!(
            "matrix is {}x{} but subsystem dims multiply to {total}",
            rho.rows, rho.cols
        )));
    }
    if let Some(&bad) = keep.iter().find(|&&k| k >= dims.len()) {
        return Err(LinalgError::DimensionMismatch(format!(
            "subsystem {bad} out of range for {} subsystems",
            dims.len()
        )));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !kept.contains(i)).collect();

    // Stride of each subsystem in the flattened index.
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let offsets = |sub: &[usize]| -> Vec<usize> {
        let count: usize = sub.iter().map(|&i| dims[i]).product();
        (0..count)
            .map(|mut flat| {
                let mut off = 0;
                for &i in sub.iter().rev() {
                    off += (flat % dims[i]) * strides[i];
                    flat /= dims[i];
                }
                off
            })
            .collect()
    };
    let keep_off = offsets(&kept);
    let trace_off = offsets(&traced);

    let out_dim = keep_off.len();
    let mut out = CMatrix::zeros(out_dim, out_dim);
    for (r, &kr) in keep_off.iter().enumerate() {
        for (c, &kc) in keep_off.iter().enumerate() {
            out[(r, c)] = trace_off.iter().map(|&t| rho[(kr + t, kc + t)]).sum();
        }
    }
    Ok(out)
}

pub fn is_power_of_two(n: usize) -> bool {
    n != 0 && n & (n - 1) == 0
}

/// `⌈log₂ n⌉`, with `ceil_log2(1) == 0`.
pub fn ceil_log2(n: usize) -> usize {
    assert!(n > 0);
    (usize::BITS - (n - 1).leading_zeros()) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix {
        let data = (0..rows * cols)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        CMatrix::from_row_major(rows, cols, data).unwrap()
    }

    fn random_psd(rng: &mut impl Rng, n: usize) -> CMatrix {
        let g = random_matrix(rng, n, n);
        // Rank-deficient half the time so the clamping path is exercised.
        if rng.random_bool(0.5) && n > 1 {
            let mut g = g;
            for c0 in 0..n {
                g[(0, c0)] = c(0.0, 0.0);
            }
            g.adjoint() * &g
        } else {
            g.adjoint() * &g
        }
    }

    #[test]
    fn psd_sqrt_identity_and_zero() {
        let i4 = CMatrix::identity(4);
        assert!(psd_sqrt(&i4, DEFAULT_PSD_TOL).unwrap().max_abs_diff(&i4) < 1e-14);
        let z = CMatrix::zeros(3, 3);
        assert!(psd_sqrt(&z, DEFAULT_PSD_TOL).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn psd_sqrt_diagonal() {
        let a = CMatrix::from_real(2, 2, &[4.0, 0.0, 0.0, 9.0]);
        let b = psd_sqrt(&a, DEFAULT_PSD_TOL).unwrap();
        let expected = CMatrix::from_real(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        assert!(b.max_abs_diff(&expected) < 1e-12);
        assert!((&b * &b).max_abs_diff(&a) < 1e-12);
    }

    #[test]
    fn psd_sqrt_rejects_bad_inputs() {
        let not_herm = CMatrix::from_real(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(psd_sqrt(&not_herm, 1e-10), Err(LinalgError::NotHermitian(_))));
        let neg = CMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        assert!(matches!(psd_sqrt(&neg, 1e-10), Err(LinalgError::NotPsd(_))));
        // Tiny negative eigenvalue is clamped.
        let tiny = CMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -5e-11]);
        let b = psd_sqrt(&tiny, 1e-10).unwrap();
        assert!(b[(1, 1)].norm() < 1e-12);
    }

    #[test]
    fn psd_sqrt_random_trials() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let tol = DEFAULT_PSD_TOL;
        for trial in 0..100 {
            let n = 1 + trial % 16;
            let a = random_psd(&mut rng, n);
            let b = psd_sqrt(&a, tol).unwrap();
            assert!(b.is_hermitian(1e-12));
            assert!((&b * &b).max_abs_diff(&a) <= 10.0 * tol, "trial {trial}, n={n}");
        }
    }

    #[test]
    fn svd_simple_cases() {
        let svd = svd_factorize(&CMatrix::identity(2)).unwrap();
        assert_eq!(svd.s.len(), 2);
        assert!((svd.s[0] - 1.0).abs() < 1e-14 && (svd.s[1] - 1.0).abs() < 1e-14);
        assert!((&svd.u * &svd.vdag).max_abs_diff(&CMatrix::identity(2)) < 1e-12);

        let d = CMatrix::from_real(2, 2, &[0.5, 0.0, 0.0, 0.0]);
        let svd = svd_factorize(&d).unwrap();
        assert!((svd.s[0] - 0.5).abs() < 1e-14 && svd.s[1].abs() < 1e-14);
        assert!(svd.reconstruct().max_abs_diff(&d) < 1e-14);
    }

    #[test]
    fn svd_random_contraction_and_rectangular() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(&mut rng, 4, 4);
        let a = a.scale_real(1.0 / (spectral_norm(&a).unwrap() * 1.01));
        let svd = svd_factorize(&a).unwrap();
        assert!(svd.reconstruct().max_abs_diff(&a) <= 1e-10);
        assert!(svd.s[0] <= 1.0);

        for &(r, cc) in &[(6, 3), (3, 5)] {
            let a = random_matrix(&mut rng, r, cc);
            let svd = svd_factorize(&a).unwrap();
            assert!(svd.u.is_unitary(1e-10));
            assert!(svd.vdag.is_unitary(1e-10));
            assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
            assert!(svd.reconstruct().max_abs_diff(&a) <= 1e-10);
        }
    }

    #[test]
    fn complete_isometry_small() {
        let v = CMatrix::from_real(2, 1, &[1.0, 0.0]);
        let u = complete_isometry(&v, DEFAULT_ISOMETRY_TOL).unwrap();
        assert!(u.is_unitary(1e-12));
        assert_eq!(u[(0, 0)], c(1.0, 0.0));
        assert_eq!(u[(1, 0)], c(0.0, 0.0));

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v = CMatrix::from_real(2, 1, &[h, h]);
        let u = complete_isometry(&v, DEFAULT_ISOMETRY_TOL).unwrap();
        assert!(u.is_unitary(1e-12));
        assert_eq!(u.column(0), v.column(0));

        let not_iso = CMatrix::from_real(2, 1, &[1.0, 1.0]);
        assert!(matches!(
            complete_isometry(&not_iso, DEFAULT_ISOMETRY_TOL),
            Err(LinalgError::NotIsometry(_))
        ));
    }

    #[test]
    fn partial_trace_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r1 = random_psd(&mut rng, 2);
        let r1 = r1.scale_real(1.0 / r1.trace().re);
        let r2 = random_psd(&mut rng, 4);
        let t2 = r2.trace();
        let prod = kron(&r1, &r2);
        let red = partial_trace(&prod, &[2, 4], &[0]).unwrap();
        assert!(red.max_abs_diff(&r1.scale(t2)) < 1e-12);
        let red = partial_trace(&prod, &[2, 4], &[1]).unwrap();
        assert!(red.max_abs_diff(&r2) < 1e-12);

        // Bell state |Φ+⟩⟨Φ+| reduces to I/2.
        let h = 0.5;
        let bell = CMatrix::from_real(
            4,
            4,
            &[h, 0.0, 0.0, h, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, h, 0.0, 0.0, h],
        );
        let red = partial_trace(&bell, &[2, 2], &[0]).unwrap();
        assert!(red.max_abs_diff(&CMatrix::identity(2).scale_real(0.5)) < 1e-15);

        assert!(matches!(
            partial_trace(&bell, &[2, 3], &[0]),
            Err(LinalgError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn kron_examples() {
        assert_eq!(kron(&CMatrix::identity(2), &CMatrix::identity(2)), CMatrix::identity(4));
        let x = CMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let p0 = CMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let k = kron(&x, &p0);
        // X[1,0] = 1 lands at row 1*2+0, col 0*2+0.
        assert_eq!(k[(2, 0)], c(1.0, 0.0));
        assert_eq!(k[(0, 2)], c(1.0, 0.0));
        assert_eq!(k.as_slice().iter().filter(|z| z.norm() > 0.0).count(), 2);
    }

    #[test]
    fn log_helpers() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(8), 3);
        assert_eq!(ceil_log2(9), 4);
        assert!(is_power_of_two(16) && !is_power_of_two(12) && !is_power_of_two(0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn svd_reconstructs_random_8x8(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, 8, 8);
            let svd = svd_factorize(&a).unwrap();
            prop_assert!(svd.u.is_unitary(1e-10));
            prop_assert!(svd.vdag.is_unitary(1e-10));
            prop_assert!(svd.s.iter().all(|&s| s >= 0.0));
            prop_assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(svd.reconstruct().max_abs_diff(&a) <= 1e-10);
        }

        #[test]
        fn completion_extends_random_isometry(seed in any::<u64>(), cols in 1usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, 8, cols);
            // Orthonormalize via SVD: U[:, :cols] is an isometry.
            let svd = svd_factorize(&a).unwrap();
            let v = svd.u.submatrix(0, 0, 8, cols);
            let u = complete_isometry(&v, DEFAULT_ISOMETRY_TOL).unwrap();
            prop_assert!(u.is_unitary(1e-9));
            prop_assert_eq!(u.submatrix(0, 0, 8, cols), v);
        }

        #[test]
        fn partial_trace_preserves_trace_and_is_linear(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, 8, 8);
            let b = random_matrix(&mut rng, 8, 8);
            let s = c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            for keep in [vec![0], vec![1, 2], vec![0, 2]] {
                let pa = partial_trace(&a, &[2, 2, 2], &keep).unwrap();
                prop_assert!((pa.trace() - a.trace()).norm() < 1e-12);
                let combo = &a + &b.scale(s);
                let lhs = partial_trace(&combo, &[2, 2, 2], &keep).unwrap();
                let rhs = &pa + &partial_trace(&b, &[2, 2, 2], &keep).unwrap().scale(s);
                prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
            }
        }

        #[test]
        fn kron_is_associative(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, 2, 3);
            let b = random_matrix(&mut rng, 2, 2);
            let cm = random_matrix(&mut rng, 3, 1);
            let lhs = kron(&kron(&a, &b), &cm);
            let rhs = kron(&a, &kron(&b, &cm));
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-14);
        }
    }
}
