//! Variational adiabatic gauge potentials.
//!
//! The Krylov route builds an orthonormal operator basis `O_k` from nested
//! commutators `[H, ·]` applied to `∂_λ H` (a Lanczos recursion in operator
//! space) and solves for the odd-order coefficients `γ_k` through a
//! continued-fraction recursion in the Lanczos coefficients `b_k`. Two
//! oracles check it: a direct least-squares fit over the nested-commutator
//! monomials, and the exact spectral gauge potential.
//!
//! Internally the gauge potential is carried as the anti-Hermitian
//! `K = Σ γ_k O_{2k-1}`, with `A = i K`. For real symmetric `H` and `∂_λ H`
//! every `O_k` is real, so the kernels are generic over [`Field`].

use nalgebra::{DMatrix, DVector};

use crate::linalg::{self, Field};
use crate::operator::{Images, InnerProductWeight, OperatorMatrix, Weighting};
use crate::{CMatrix, Error, Result, C64};

/// Lanczos termination threshold relative to `b_0`.
pub const LANCZOS_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// All `2ℓ + 1` operators were built.
    Completed,
    /// `b_k` fell below tolerance at index `k`: the Krylov space is closed.
    Closed { index: usize },
    /// `‖∂_λ H‖` vanished; the basis is empty.
    ZeroDerivative,
}

#[derive(Clone, Debug)]
pub struct KrylovData {
    pub operators: Vec<OperatorMatrix>,
    pub lanczos: Vec<f64>,
    pub effective_depth: usize,
    pub termination: Termination,
    h: OperatorMatrix,
    dh: OperatorMatrix,
    weight: InnerProductWeight,
}

impl KrylovData {
    pub fn hamiltonian(&self) -> &OperatorMatrix {
        &self.h
    }

    pub fn derivative(&self) -> &OperatorMatrix {
        &self.dh
    }

    pub fn weight(&self) -> &InnerProductWeight {
        &self.weight
    }

    /// `max |(O_i|O_j) - δ_ij|`.
    pub fn orthonormality_error(&self) -> Result<f64> {
        let w = self.weight.view(self.h.basis())?;
        let mut err = 0.0_f64;
        for (i, a) in self.operators.iter().enumerate() {
            for (j, b) in self.operators.iter().enumerate().skip(i) {
                let v = w.inner(a.entries(), b.entries());
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((v - target).abs());
            }
        }
        Ok(err)
    }
}

#[derive(Clone, Debug)]
pub struct AgpSolution {
    pub gammas: Vec<f64>,
    pub matrix: OperatorMatrix,
    pub action_value: f64,
    pub order: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionReport {
    pub value: f64,
    pub weight: &'static str,
}

#[derive(Clone, Debug)]
pub struct LsqAgp {
    pub alphas: Vec<f64>,
    pub matrix: OperatorMatrix,
    /// Set when the monomials were linearly dependent and the pseudoinverse
    /// dropped directions.
    pub singular: bool,
}

/// Krylov basis in raw matrix form.
#[derive(Clone, Debug)]
pub(crate) struct RawKrylov<T: Field> {
    pub ops: Vec<DMatrix<T>>,
    pub b: Vec<f64>,
    pub depth: usize,
    pub termination: Termination,
}

fn effective_depth(index: usize) -> usize {
    // b_{2m-1} = 0 leaves γ_1..γ_{m-1}; b_{2m} = 0 still determines γ_m.
    if index % 2 == 1 {
        (index - 1) / 2
    } else {
        index / 2
    }
}

pub(crate) fn krylov_raw<T: Field>(h: &DMatrix<T>, dh: &DMatrix<T>, ell: usize, w: Weighting<'_>) -> RawKrylov<T> {
    let scale = linalg::max_abs(dh);
    let b0 = w.inner(dh, dh).max(0.0).sqrt();
    if scale == 0.0 || b0 <= 1e-12 * scale {
        return RawKrylov { ops: Vec::new(), b: Vec::new(), depth: 0, termination: Termination::ZeroDerivative };
    }
    let tol = LANCZOS_TOL * b0;
    let inv = T::from_real(1.0 / b0);
    let o0 = dh * inv;
    let mut images: Vec<Option<Images>> = vec![w.images(&o0)];
    let mut ops = vec![o0];
    let mut b = vec![b0];
    for k in 1..=2 * ell {
        let prev_hermitian = (k - 1) % 2 == 0;
        let mut a = linalg::commutator_hermitian(h, &ops[k - 1], prev_hermitian);
        if k >= 2 {
            a -= &ops[k - 2] * T::from_real(b[k - 1]);
        }
        // Operators of opposite Hermiticity are orthogonal under every
        // weight, so only same-parity vectors are projected out.
        let mut ia = w.images(&a);
        for j in (k % 2..k).step_by(2) {
            let c = w.inner_cached(&ops[j], images[j].as_ref(), &a, ia.as_ref());
            if c != 0.0 {
                a -= &ops[j] * T::from_real(c);
            }
        }
        ia = w.images(&a);
        let bk = w.inner_cached(&a, ia.as_ref(), &a, ia.as_ref()).max(0.0).sqrt();
        if bk < tol {
            if k % 2 == 0 {
                b.push(0.0);
            }
            return RawKrylov { depth: effective_depth(k), ops, b, termination: Termination::Closed { index: k } };
        }
        let inv = T::from_real(1.0 / bk);
        a *= inv;
        images.push(ia.map(|im| Images { direct: im.direct.map(|z| z / bk), adjoint: im.adjoint.map(|z| z / bk) }));
        ops.push(a);
        b.push(bk);
    }
    RawKrylov { ops, b, depth: ell, termination: Termination::Completed }
}

/// `K = Σ_k γ_k O_{2k-1}` at order `min(ell, depth)`, plus the `γ_k`.
pub(crate) fn agp_kernel<T: Field>(
    h: &DMatrix<T>,
    dh: &DMatrix<T>,
    ell: usize,
    w: Weighting<'_>,
) -> Result<(DMatrix<T>, Vec<f64>)> {
    let d = h.nrows();
    let mut k = DMatrix::<T>::zeros(d, d);
    if ell == 0 {
        return Ok((k, Vec::new()));
    }
    let kry = krylov_raw(h, dh, ell, w);
    let order = ell.min(kry.depth);
    if order == 0 {
        return Ok((k, Vec::new()));
    }
    let gammas = agp_gammas(&kry.b, order)?;
    for (i, g) in gammas.iter().enumerate() {
        k += &kry.ops[2 * i + 1] * T::from_real(*g);
    }
    Ok((k, gammas))
}

/// Operator-space Lanczos construction of `O_0 … O_{2ℓ}` and `b_0 … b_{2ℓ}`.
pub fn krylov_basis(h: &OperatorMatrix, dh: &OperatorMatrix, ell: usize, w: &InnerProductWeight) -> Result<KrylovData> {
    h.basis().ensure_same(dh.basis())?;
    h.require_hermitian()?;
    dh.require_hermitian()?;
    if ell == 0 {
        return Err(Error::OutOfRange { name: "ell", value: 0.0, range: "[1, inf)" });
    }
    let view = w.view(h.basis())?;
    let basis = h.basis().clone();
    let wrap = |ops: Vec<CMatrix>| -> Result<Vec<OperatorMatrix>> {
        ops.into_iter().map(|m| OperatorMatrix::new(basis.clone(), m)).collect()
    };
    let real = h.is_real() && dh.is_real();
    let (ops, b, depth, termination) = if real {
        let raw = krylov_raw(&linalg::to_field::<f64>(h.entries()), &linalg::to_field::<f64>(dh.entries()), ell, view);
        (raw.ops.iter().map(linalg::to_complex).collect(), raw.b, raw.depth, raw.termination)
    } else {
        let raw = krylov_raw(h.entries(), dh.entries(), ell, view);
        (raw.ops, raw.b, raw.depth, raw.termination)
    };
    Ok(KrylovData {
        operators: wrap(ops)?,
        lanczos: b,
        effective_depth: depth,
        termination,
        h: h.clone(),
        dh: dh.clone(),
        weight: w.clone(),
    })
}

/// Minimizing `γ_1 … γ_ℓ` from the Lanczos coefficients `b_0 … b_{2ℓ}`.
pub fn agp_gammas(lanczos: &[f64], ell: usize) -> Result<Vec<f64>> {
    if ell == 0 {
        return Ok(Vec::new());
    }
    let needed = 2 * ell + 1;
    if lanczos.len() < needed {
        return Err(Error::InsufficientCoefficients { needed, available: lanczos.len() });
    }
    let b = lanczos;
    let a = |k: usize| b[2 * k - 1].powi(2) + b[2 * k].powi(2);
    let bb = |k: usize| b[2 * k] * b[2 * k + 1];
    let check = |k: usize, den: f64| {
        if den.abs() <= 1e-13 * a(k).max(f64::MIN_POSITIVE) || !den.is_finite() {
            Err(Error::DegenerateRecursion { k, denominator: den })
        } else {
            Ok(den)
        }
    };
    // r[k] for k = 1..ℓ-1
    let mut r = vec![0.0; ell];
    if ell >= 2 {
        r[ell - 1] = bb(ell - 1) / check(ell, a(ell))?;
        for k in (2..ell).rev() {
            r[k - 1] = bb(k - 1) / check(k, a(k) - r[k] * bb(k))?;
        }
    }
    let den1 = if ell >= 2 { a(1) - r[1] * bb(1) } else { a(1) };
    let mut gammas = vec![-b[0] * b[1] / check(1, den1)?];
    for k in 1..ell {
        let next = -r[k] * gammas[k - 1];
        gammas.push(next);
    }
    Ok(gammas)
}

/// Action `(G|G)` predicted by the Lanczos coefficients for given `γ`.
pub fn action_from_lanczos(lanczos: &[f64], gammas: &[f64]) -> f64 {
    let b = |i: usize| lanczos.get(i).copied().unwrap_or(0.0);
    let g = |k: usize| if k >= 1 && k <= gammas.len() { gammas[k - 1] } else { 0.0 };
    let mut s = (b(0) + g(1) * b(1)).powi(2);
    for k in 1..=gammas.len() {
        s += (g(k) * b(2 * k) + g(k + 1) * b(2 * k + 1)).powi(2);
    }
    s
}

/// `A = i Σ γ_k O_{2k-1}` with its action.
pub fn assemble_agp(kry: &KrylovData, gammas: &[f64]) -> Result<AgpSolution> {
    let ell = gammas.len();
    if ell > kry.effective_depth {
        return Err(Error::DepthExceeded { requested: ell, available: kry.effective_depth });
    }
    let basis = kry.h.basis().clone();
    let d = basis.dimension();
    let mut k = CMatrix::zeros(d, d);
    for (i, g) in gammas.iter().enumerate() {
        k += kry.operators[2 * i + 1].entries() * C64::new(*g, 0.0);
    }
    let matrix = OperatorMatrix::new(basis, k * C64::new(0.0, 1.0))?;
    let action = action_value(&kry.h, &kry.dh, &matrix, &kry.weight)?;
    Ok(AgpSolution { gammas: gammas.to_vec(), matrix, action_value: action.value, order: ell })
}

/// Build, solve and assemble at order `min(ell, ℓ_eff)`.
pub fn variational_agp(
    h: &OperatorMatrix,
    dh: &OperatorMatrix,
    ell: usize,
    w: &InnerProductWeight,
) -> Result<AgpSolution> {
    if ell == 0 {
        let zero = OperatorMatrix::zeros(h.basis());
        let action = action_value(h, dh, &zero, w)?;
        return Ok(AgpSolution { gammas: Vec::new(), matrix: zero, action_value: action.value, order: 0 });
    }
    let kry = krylov_basis(h, dh, ell, w)?;
    let order = ell.min(kry.effective_depth);
    let gammas = agp_gammas(&kry.lanczos, order)?;
    assemble_agp(&kry, &gammas)
}

/// `(G|G)` with `G = ∂_λ H + i [A, H]`.
pub fn action_value(
    h: &OperatorMatrix,
    dh: &OperatorMatrix,
    a: &OperatorMatrix,
    w: &InnerProductWeight,
) -> Result<ActionReport> {
    h.basis().ensure_same(dh.basis())?;
    h.basis().ensure_same(a.basis())?;
    let view = w.view(h.basis())?;
    let g = dh.entries() + linalg::commutator(a.entries(), h.entries()) * C64::new(0.0, 1.0);
    Ok(ActionReport { value: view.inner(&g, &g).max(0.0), weight: w.label() })
}

/// Real feature vector `φ(X)` with `φ(X)·φ(Y) = (X|Y)` under `w`.
fn features(x: &CMatrix, w: Weighting<'_>) -> DVector<f64> {
    let flat: Vec<C64> = match w {
        Weighting::Trace => {
            let s = 1.0 / (x.nrows() as f64).sqrt();
            x.iter().map(|z| z * s).collect()
        }
        Weighting::State(psi) => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let direct = x * psi;
            let adjoint = x.ad_mul(psi);
            direct.iter().chain(adjoint.iter()).map(|z| z * s).collect()
        }
    };
    DVector::from_iterator(2 * flat.len(), flat.iter().flat_map(|z| [z.re, z.im]))
}

/// Least squares over `A = i Σ α_k L^{2k-1} ∂_λH`, `L = [H, ·]`.
pub fn lsq_agp_oracle(h: &OperatorMatrix, dh: &OperatorMatrix, ell: usize, w: &InnerProductWeight) -> Result<LsqAgp> {
    h.basis().ensure_same(dh.basis())?;
    let view = w.view(h.basis())?;
    let basis = h.basis().clone();
    if ell == 0 {
        return Ok(LsqAgp { alphas: Vec::new(), matrix: OperatorMatrix::zeros(&basis), singular: false });
    }
    // odd[k] = L^{2k+1} dH, even[k] = L^{2k+2} dH
    let hm = h.entries();
    let mut odd = Vec::with_capacity(ell);
    let mut even = Vec::with_capacity(ell);
    let mut cur = dh.entries().clone();
    for _ in 0..ell {
        let o = linalg::commutator(hm, &cur);
        let e = linalg::commutator(hm, &o);
        odd.push(o);
        cur = e.clone();
        even.push(e);
    }
    let target = features(dh.entries(), view);
    let cols: Vec<DVector<f64>> = even.iter().map(|e| features(e, view)).collect();
    let scales: Vec<f64> = cols.iter().map(|c| c.norm()).collect();
    let mut m = DMatrix::<f64>::zeros(target.len(), ell);
    for (k, c) in cols.iter().enumerate() {
        if scales[k] > 0.0 {
            m.set_column(k, &(c / scales[k]));
        }
    }
    let svd = m.svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = 1e-12 * smax.max(f64::MIN_POSITIVE);
    let singular = smax == 0.0 || svd.singular_values.iter().any(|&s| s <= cutoff);
    let scaled =
        svd.solve(&(-target), cutoff).map_err(|e| Error::Numerical(format!("least-squares solve failed: {e}")))?;
    let alphas: Vec<f64> =
        (0..ell).map(|k| if scales[k] > 0.0 && smax > 0.0 { scaled[k] / scales[k] } else { 0.0 }).collect();
    let d = basis.dimension();
    let mut a = CMatrix::zeros(d, d);
    for (k, o) in odd.iter().enumerate() {
        a += o * C64::new(0.0, alphas[k]);
    }
    Ok(LsqAgp { alphas, matrix: OperatorMatrix::new(basis, a)?, singular })
}

/// Groups of (numerically) degenerate eigenvalue indices.
pub(crate) fn degenerate_blocks(vals: &[f64]) -> Vec<std::ops::Range<usize>> {
    let spread = vals.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let tol = 1e-9 * spread;
    let mut blocks = Vec::new();
    let mut start = 0;
    for i in 1..=vals.len() {
        if i == vals.len() || vals[i] - vals[i - 1] > tol {
            blocks.push(start..i);
            start = i;
        }
    }
    blocks
}

/// Eigenbasis of `H` in which `∂_λ H` is also diagonal inside every
/// degenerate block of `H`. Returns `(E, V, V^† ∂_λH V)`.
pub(crate) fn adapted_eigenbasis(h: &CMatrix, dh: &CMatrix) -> (Vec<f64>, CMatrix, CMatrix) {
    let (vals, mut vecs) = linalg::eigh_complex(h);
    for block in degenerate_blocks(&vals) {
        if block.len() < 2 {
            continue;
        }
        let cols = vecs.columns(block.start, block.len()).into_owned();
        let sub = cols.adjoint() * dh * &cols;
        let (_, rot) = linalg::eigh_complex(&sub);
        vecs.columns_mut(block.start, block.len()).copy_from(&(cols * rot));
    }
    let dhe = vecs.adjoint() * dh * &vecs;
    (vals, vecs, dhe)
}

/// Exact gauge potential `<m|A|n> = -i <m|∂_λH|n> / (E_m - E_n)`, zero on
/// the diagonal. Degenerate levels are first rotated so that `∂_λ H` is
/// diagonal within each degenerate block; couplings that survive the
/// rotation are reported as an error.
pub fn exact_agp(h: &OperatorMatrix, dh: &OperatorMatrix) -> Result<OperatorMatrix> {
    h.basis().ensure_same(dh.basis())?;
    h.require_hermitian()?;
    dh.require_hermitian()?;
    let (vals, vecs, dhe) = adapted_eigenbasis(h.entries(), dh.entries());
    let d = vals.len();
    let scale = linalg::max_abs(&dhe).max(f64::MIN_POSITIVE);
    let blocks = degenerate_blocks(&vals);
    let mut block_of = vec![0usize; d];
    for (i, b) in blocks.iter().enumerate() {
        for j in b.clone() {
            block_of[j] = i;
        }
    }
    let mut a = CMatrix::zeros(d, d);
    for m in 0..d {
        for n in 0..d {
            if m == n {
                continue;
            }
            if block_of[m] == block_of[n] {
                let c = dhe[(m, n)].norm();
                if c > 1e-8 * scale {
                    return Err(Error::DegenerateCoupling { m, n, coupling: c });
                }
                continue;
            }
            a[(m, n)] = dhe[(m, n)] * C64::new(0.0, -1.0) / (vals[m] - vals[n]);
        }
    }
    let back = &vecs * a * vecs.adjoint();
    OperatorMatrix::new(h.basis().clone(), back)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisMode, SpinBasis};
    use crate::models::{annealing_hamiltonian, hamiltonian_derivative, make_model, ModelKind, ModelSpec};
    use crate::operator::{build_operator, Axis, PauliStringTerm};

    fn pauli(axis: Axis) -> OperatorMatrix {
        let b = SpinBasis::full_chain(1, false).unwrap();
        build_operator(&[PauliStringTerm::new(vec![(0, axis)], 1.0)], &b).unwrap()
    }

    fn two_level() -> (OperatorMatrix, OperatorMatrix) {
        (&pauli(Axis::X) + &pauli(Axis::Z), pauli(Axis::Z))
    }

    fn ising(n: usize, lambda: f64) -> (OperatorMatrix, OperatorMatrix) {
        let p = make_model(&ModelSpec::new(ModelKind::ShortRangeIsing, n)).unwrap();
        (annealing_hamiltonian(lambda, &p).unwrap(), hamiltonian_derivative(lambda, &p).unwrap())
    }

    const TRACE: InnerProductWeight = InnerProductWeight::TraceInfiniteT;

    #[test]
    fn two_level_lanczos_coefficients() {
        let (h, dh) = two_level();
        let kry = krylov_basis(&h, &dh, 1, &TRACE).unwrap();
        assert_eq!(kry.termination, Termination::Completed);
        let b = &kry.lanczos;
        assert!((b[0] - 1.0).abs() < 1e-14 && (b[1] - 2.0).abs() < 1e-14 && (b[2] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn commuting_pair_closes_immediately() {
        let (_, dh) = ising(4, 0.5);
        let kry = krylov_basis(&dh, &dh, 2, &TRACE).unwrap();
        assert_eq!(kry.effective_depth, 0);
        assert_eq!(kry.termination, Termination::Closed { index: 1 });
    }

    #[test]
    fn zero_derivative_gives_empty_basis() {
        let (h, _) = two_level();
        let kry = krylov_basis(&h, &OperatorMatrix::zeros(h.basis()), 1, &TRACE).unwrap();
        assert!(kry.operators.is_empty());
        assert_eq!(kry.termination, Termination::ZeroDerivative);
    }

    #[test]
    fn gammas_closed_forms() {
        assert_eq!(agp_gammas(&[1.0, 2.0, 2.0], 1).unwrap(), vec![-0.25]);
        let b = 1.7;
        let g = agp_gammas(&[b, b, b], 1).unwrap();
        assert!((g[0] + 0.5).abs() < 1e-15);
        let g = agp_gammas(&[0.3, 1.1, 0.0], 1).unwrap();
        assert!((g[0] + 0.3 / 1.1).abs() < 1e-15);
        assert!(matches!(agp_gammas(&[1.0, 1.0], 1), Err(Error::InsufficientCoefficients { .. })));
    }

    #[test]
    fn gammas_minimize_lanczos_action() {
        let b = [1.3, 0.7, 1.9, 0.4, 1.1, 0.8, 0.5];
        let g = agp_gammas(&b, 3).unwrap();
        let s = action_from_lanczos(&b, &g);
        for i in 0..3 {
            for d in [-1e-4, 1e-4] {
                let mut h = g.clone();
                h[i] += d;
                assert!(action_from_lanczos(&b, &h) > s);
            }
        }
    }

    #[test]
    fn two_level_agp_matches_exact() {
        let (h, dh) = two_level();
        let sol = variational_agp(&h, &dh, 1, &TRACE).unwrap();
        let expected = pauli(Axis::Y).scaled(-0.25);
        assert!((sol.matrix.entries() - expected.entries()).norm() < 1e-14);
        let exact = exact_agp(&h, &dh).unwrap();
        assert!((exact.entries() - expected.entries()).norm() < 1e-13);
        let lsq = lsq_agp_oracle(&h, &dh, 1, &TRACE).unwrap();
        assert!((lsq.matrix.entries() - expected.entries()).norm() < 1e-13);
    }

    #[test]
    fn zero_gammas_give_derivative_norm() {
        let (h, dh) = ising(4, 0.3);
        let kry = krylov_basis(&h, &dh, 1, &TRACE).unwrap();
        let sol = assemble_agp(&kry, &[]).unwrap();
        assert!(sol.matrix.max_abs() == 0.0);
        assert!((sol.action_value - kry.lanczos[0].powi(2)).abs() < 1e-12);
        assert!(matches!(assemble_agp(&kry, &[0.0, 0.0]), Err(Error::DepthExceeded { .. })));
    }

    #[test]
    fn eight_site_b0() {
        let spec = ModelSpec {
            kind: ModelKind::ShortRangeIsing,
            n: 8,
            basis: Some(BasisMode::FullChain { n: 8, periodic: true }),
        };
        let p = make_model(&spec).unwrap();
        let (h, dh) = (annealing_hamiltonian(0.5, &p).unwrap(), hamiltonian_derivative(0.5, &p).unwrap());
        let kry = krylov_basis(&h, &dh, 1, &TRACE).unwrap();
        assert!((kry.lanczos[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn action_decreases_with_order_and_matches_lanczos() {
        let (h, dh) = ising(6, 0.5);
        let mut last = f64::INFINITY;
        for ell in 1..=3 {
            let kry = krylov_basis(&h, &dh, ell, &TRACE).unwrap();
            assert!(kry.orthonormality_error().unwrap() < 1e-8);
            let g = agp_gammas(&kry.lanczos, ell).unwrap();
            let sol = assemble_agp(&kry, &g).unwrap();
            let predicted = action_from_lanczos(&kry.lanczos, &g);
            assert!((sol.action_value - predicted).abs() <= 1e-8 * predicted + 1e-12);
            assert!(sol.action_value <= last);
            assert!(sol.matrix.is_hermitian());
            last = sol.action_value;
        }
    }

    #[test]
    fn krylov_matches_least_squares() {
        let (h, dh) = ising(5, 0.25);
        for ell in 1..=3 {
            let k = variational_agp(&h, &dh, ell, &TRACE).unwrap();
            let l = lsq_agp_oracle(&h, &dh, ell, &TRACE).unwrap();
            let rel = (k.matrix.entries() - l.matrix.entries()).norm() / k.matrix.entries().norm();
            assert!(rel < 1e-8, "ell = {ell}: {rel:e}");
        }
    }

    #[test]
    fn least_squares_commuting_is_zero() {
        let (_, dh) = ising(4, 0.5);
        let l = lsq_agp_oracle(&dh, &dh, 2, &TRACE).unwrap();
        assert!(l.singular);
        assert!(l.matrix.max_abs() == 0.0);
    }

    #[test]
    fn exact_agp_of_h_itself_vanishes() {
        let (h, _) = ising(4, 0.4);
        assert!(exact_agp(&h, &h).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn ground_state_weighted_lanczos_is_orthonormal() {
        let (h, dh) = ising(6, 0.6);
        let (_, gs) = crate::dynamics::ground_state(&h).unwrap();
        let w = InnerProductWeight::GroundState(gs);
        let kry = krylov_basis(&h, &dh, 3, &w).unwrap();
        assert!(kry.orthonormality_error().unwrap() < 1e-8);
        let sol = variational_agp(&h, &dh, 3, &w).unwrap();
        let predicted = action_from_lanczos(&kry.lanczos[..], &sol.gammas);
        assert!((sol.action_value - predicted).abs() <= 1e-8 * kry.lanczos[0].powi(2));
    }
}
