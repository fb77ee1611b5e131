//! Dense linear-algebra helpers shared by every module.
//!
//! Most operators in this crate are real symmetric in the computational
//! basis. [`Field`] lets the hot paths (Krylov construction, time stepping)
//! run on `f64` matrices when that holds and on `Complex64` otherwise.

use nalgebra::{ComplexField, DMatrix, DVector};

use crate::{CMatrix, CVector, Error, Result, C64};

/// Scalar type an operator can be stored in: `f64` or `Complex64`.
pub trait Field: ComplexField<RealField = f64> + Copy {
    fn from_c64(z: C64) -> Self;
    fn to_c64(self) -> C64;
    /// `m * v` for a complex vector.
    fn apply(m: &DMatrix<Self>, v: &CVector) -> CVector;
    /// `m^† * v` for a complex vector.
    fn apply_adjoint(m: &DMatrix<Self>, v: &CVector) -> CVector;
}

impl Field for f64 {
    fn from_c64(z: C64) -> Self {
        z.re
    }

    fn to_c64(self) -> C64 {
        C64::new(self, 0.0)
    }

    fn apply(m: &DMatrix<f64>, v: &CVector) -> CVector {
        let re = m * v.map(|z| z.re);
        let im = m * v.map(|z| z.im);
        re.zip_map(&im, C64::new)
    }

    fn apply_adjoint(m: &DMatrix<f64>, v: &CVector) -> CVector {
        let re = m.tr_mul(&v.map(|z| z.re));
        let im = m.tr_mul(&v.map(|z| z.im));
        re.zip_map(&im, C64::new)
    }
}

impl Field for C64 {
    fn from_c64(z: C64) -> Self {
        z
    }

    fn to_c64(self) -> C64 {
        self
    }

    fn apply(m: &DMatrix<C64>, v: &CVector) -> CVector {
        m * v
    }

    fn apply_adjoint(m: &DMatrix<C64>, v: &CVector) -> CVector {
        m.ad_mul(v)
    }
}

pub fn to_field<T: Field>(m: &CMatrix) -> DMatrix<T> {
    m.map(T::from_c64)
}

pub fn to_complex<T: Field>(m: &DMatrix<T>) -> CMatrix {
    m.map(T::to_c64)
}

/// Largest entry modulus.
pub fn max_abs<T: Field>(m: &DMatrix<T>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.modulus()))
}

/// `max |M - M^†|` entrywise.
pub fn hermitian_deviation<T: Field>(m: &DMatrix<T>) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0_f64;
    for j in 0..n {
        for i in 0..=j {
            let d = (m[(i, j)] - m[(j, i)].conjugate()).modulus();
            dev = dev.max(d);
        }
    }
    dev
}

/// True when every imaginary part is at most `rel_tol * max |entry|`.
pub fn is_effectively_real(m: &CMatrix, rel_tol: f64) -> bool {
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    m.iter().all(|z| z.im.abs() <= rel_tol * scale)
}

pub fn commutator<T: Field>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    a * b - b * a
}

/// `[H, O]` for Hermitian `H` and an `O` that is Hermitian (`o_hermitian`)
/// or anti-Hermitian. Uses a single product: `[H, O] = X ∓ X^†`, `X = H O`.
pub fn commutator_hermitian<T: Field>(h: &DMatrix<T>, o: &DMatrix<T>, o_hermitian: bool) -> DMatrix<T> {
    let x = h * o;
    let xa = x.adjoint();
    if o_hermitian {
        x - xa
    } else {
        x + xa
    }
}

/// Frobenius inner product `Re Tr(A^† B)`.
pub fn frobenius_re<T: Field>(a: &DMatrix<T>, b: &DMatrix<T>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conjugate() * *y).real()).sum()
}

pub fn cdot(a: &CVector, b: &CVector) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh<T: Field>(m: &DMatrix<T>) -> (Vec<f64>, DMatrix<T>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigen-decomposition of a complex Hermitian matrix, using the real solver
/// when the matrix has no imaginary part.
pub fn eigh_complex(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    if is_effectively_real(m, 0.0) {
        let (vals, vecs) = eigh(&to_field::<f64>(m));
        (vals, to_complex(&vecs))
    } else {
        eigh(m)
    }
}

/// `exp(-i t H)` for Hermitian `H`.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    let (vals, vecs) = eigh_complex(h);
    let phases = DVector::from_iterator(vals.len(), vals.iter().map(|&e| C64::from_polar(1.0, -t * e)));
    let scaled = DMatrix::from_fn(vecs.nrows(), vecs.ncols(), |r, c| vecs[(r, c)] * phases[c]);
    scaled * vecs.adjoint()
}

/// Principal logarithm of a unitary matrix via its (numerically diagonal)
/// complex Schur form.
pub fn logm_unitary(u: &CMatrix) -> Result<CMatrix> {
    let n = u.nrows();
    let schur = nalgebra::linalg::Schur::try_new(u.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    let (q, t) = schur.unpack();
    let mut off = 0.0_f64;
    for j in 0..n {
        for i in 0..j {
            off = off.max(t[(i, j)].norm());
        }
    }
    if off > 1e-8 {
        return Err(Error::Numerical(format!("matrix is not normal (Schur off-diagonal {off:.3e})")));
    }
    let logs: Vec<C64> = (0..n).map(|i| t[(i, i)].ln()).collect();
    let scaled = DMatrix::from_fn(n, n, |r, c| q[(r, c)] * logs[c]);
    Ok(scaled * q.adjoint())
}

/// Spectral (2-)norm of a Hermitian matrix.
pub fn spectral_norm_hermitian(m: &CMatrix) -> f64 {
    let (vals, _) = eigh_complex(m);
    vals.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Operator 2-norm of an arbitrary square matrix via singular values.
pub fn operator_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone().singular_values().iter().fold(0.0_f64, |acc, &s| acc.max(s))
}

/// Rotate the global phase so the largest-magnitude amplitude (first one on
/// ties) is real and positive.
pub fn fix_phase(v: &mut CVector) {
    let mut best = 0usize;
    let mut best_abs = -1.0_f64;
    for (i, z) in v.iter().enumerate() {
        let a = z.norm();
        if a > best_abs * (1.0 + 1e-12) {
            best = i;
            best_abs = a;
        }
    }
    if best_abs > 0.0 {
        let phase = v[best] / best_abs;
        *v *= phase.conj();
        v[best] = C64::new(v[best].norm(), 0.0);
    }
}

pub fn normalize(v: &mut CVector) -> f64 {
    let n = v.norm();
    if n > 0.0 {
        *v /= C64::new(n, 0.0);
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[C64::new(0., 0.), C64::new(1., 0.), C64::new(1., 0.), C64::new(0., 0.)])
    }

    #[test]
    fn eigh_sorts_ascending() {
        let m = DMatrix::from_row_slice(3, 3, &[3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0]);
        let (vals, vecs) = eigh(&m);
        assert_eq!(vals, vec![-1.0, 1.0, 3.0]);
        assert!((vecs[(1, 0)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn expm_and_logm_invert_each_other() {
        let x = pauli_x();
        let u = expm_hermitian(&x, 0.3);
        let k = logm_unitary(&u).unwrap() * C64::new(0.0, 1.0);
        assert!((k - x * C64::new(0.3, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn single_product_commutator_matches_definition() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, -1.0]);
        let o = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.3]);
        let fast = commutator_hermitian(&h, &o, true);
        assert!((fast - commutator(&h, &o)).norm() < 1e-15);
        let anti = DMatrix::from_row_slice(2, 2, &[0.0, 0.7, -0.7, 0.0]);
        let fast = commutator_hermitian(&h, &anti, false);
        assert!((fast - commutator(&h, &anti)).norm() < 1e-15);
    }

    #[test]
    fn real_apply_matches_complex_apply() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let v = CVector::from_vec(vec![C64::new(1.0, -1.0), C64::new(0.5, 2.0)]);
        let mc = to_complex(&m);
        assert!((f64::apply(&m, &v) - &mc * &v).norm() < 1e-15);
        assert!((f64::apply_adjoint(&m, &v) - mc.ad_mul(&v)).norm() < 1e-15);
    }
}
