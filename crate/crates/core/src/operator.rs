//! Spin operators as dense matrices, their symmetry-sector projections, and
//! the operator inner products that define the variational action.

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{flip_all, translate, BasisMode, SpinBasis};
use crate::linalg::{self, Field};
use crate::state::StateVector;
use crate::{CMatrix, CVector, Error, Result, C64};

/// Relative tolerance for the Hermitian flag and for symmetry checks.
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const SYMMETRY_TOL: f64 = 1e-10;
pub const WEIGHT_NORM_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// `coefficient · Π σ^{axis}_{site}` with identities elsewhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliStringTerm {
    pub sites: Vec<(usize, Axis)>,
    pub coefficient: f64,
}

impl PauliStringTerm {
    pub fn new(sites: Vec<(usize, Axis)>, coefficient: f64) -> Self {
        PauliStringTerm { sites, coefficient }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        for (i, &(site, _)) in self.sites.iter().enumerate() {
            if site >= n {
                return Err(Error::SiteOutOfRange { site, n });
            }
            if self.sites[..i].iter().any(|&(s, _)| s == site) {
                return Err(Error::DuplicateSite(site));
            }
        }
        Ok(())
    }

    /// Image of computational state `s`: `term|s> = amp |s'>` (without the
    /// coefficient).
    pub fn apply(&self, s: usize, n: usize) -> (usize, C64) {
        let mut out = s;
        let mut amp = C64::new(1.0, 0.0);
        for &(site, axis) in &self.sites {
            let mask = 1usize << (n - 1 - site);
            let down = s & mask != 0;
            match axis {
                Axis::X => out ^= mask,
                Axis::Y => {
                    out ^= mask;
                    // σ^y|↑> = i|↓>, σ^y|↓> = -i|↑>
                    amp *= if down { C64::new(0.0, -1.0) } else { C64::new(0.0, 1.0) };
                }
                Axis::Z => {
                    if down {
                        amp = -amp;
                    }
                }
            }
        }
        (out, amp)
    }
}

/// Dense operator tagged with its basis.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    basis: SpinBasis,
    entries: CMatrix,
    hermitian: bool,
}

impl PartialEq for OperatorMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.basis == other.basis && self.entries == other.entries
    }
}

impl OperatorMatrix {
    pub fn new(basis: SpinBasis, entries: CMatrix) -> Result<Self> {
        let d = basis.dimension();
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: entries.nrows().max(entries.ncols()) });
        }
        let scale = linalg::max_abs(&entries);
        let hermitian = linalg::hermitian_deviation(&entries) <= HERMITIAN_TOL * scale;
        Ok(OperatorMatrix { basis, entries, hermitian })
    }

    /// Like [`OperatorMatrix::new`] but rejects non-Hermitian input.
    pub fn hermitian(basis: SpinBasis, entries: CMatrix) -> Result<Self> {
        let op = Self::new(basis, entries)?;
        op.require_hermitian()?;
        Ok(op)
    }

    pub fn zeros(basis: &SpinBasis) -> Self {
        let d = basis.dimension();
        OperatorMatrix { basis: basis.clone(), entries: CMatrix::zeros(d, d), hermitian: true }
    }

    pub fn identity(basis: &SpinBasis) -> Self {
        let d = basis.dimension();
        OperatorMatrix { basis: basis.clone(), entries: CMatrix::identity(d, d), hermitian: true }
    }

    pub fn basis(&self) -> &SpinBasis {
        &self.basis
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn dimension(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn hermitian_deviation(&self) -> f64 {
        linalg::hermitian_deviation(&self.entries)
    }

    pub fn require_hermitian(&self) -> Result<()> {
        if self.hermitian {
            Ok(())
        } else {
            Err(Error::NotHermitian { deviation: self.hermitian_deviation() })
        }
    }

    pub fn is_real(&self) -> bool {
        linalg::is_effectively_real(&self.entries, 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.entries)
    }

    /// Frobenius norm `sqrt(Tr M^† M)`.
    pub fn frobenius_norm(&self) -> f64 {
        self.entries.norm()
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        OperatorMatrix {
            basis: self.basis.clone(),
            entries: &self.entries * C64::new(factor, 0.0),
            hermitian: self.hermitian,
        }
    }

    pub fn adjoint(&self) -> Self {
        OperatorMatrix { basis: self.basis.clone(), entries: self.entries.adjoint(), hermitian: self.hermitian }
    }

    pub fn try_add(&self, other: &OperatorMatrix) -> Result<Self> {
        self.basis.ensure_same(&other.basis)?;
        Self::new(self.basis.clone(), &self.entries + &other.entries)
    }

    pub fn try_sub(&self, other: &OperatorMatrix) -> Result<Self> {
        self.basis.ensure_same(&other.basis)?;
        Self::new(self.basis.clone(), &self.entries - &other.entries)
    }

    /// `self · other`.
    pub fn try_mul(&self, other: &OperatorMatrix) -> Result<Self> {
        self.basis.ensure_same(&other.basis)?;
        Self::new(self.basis.clone(), &self.entries * &other.entries)
    }

    /// `[self, other]`.
    pub fn commutator(&self, other: &OperatorMatrix) -> Result<Self> {
        self.basis.ensure_same(&other.basis)?;
        Self::new(self.basis.clone(), linalg::commutator(&self.entries, &other.entries))
    }

    /// Multiply by a complex scalar.
    pub fn times(&self, z: C64) -> Result<Self> {
        Self::new(self.basis.clone(), &self.entries * z)
    }

    pub fn apply(&self, state: &StateVector) -> Result<CVector> {
        self.basis.ensure_same(state.basis())?;
        Ok(&self.entries * state.amplitudes())
    }

    pub fn expectation(&self, state: &StateVector) -> Result<C64> {
        let image = self.apply(state)?;
        Ok(linalg::cdot(state.amplitudes(), &image))
    }

    /// Hermitian eigendecomposition, eigenvalues ascending.
    pub fn eigh(&self) -> Result<(Vec<f64>, CMatrix)> {
        self.require_hermitian()?;
        Ok(linalg::eigh_complex(&self.entries))
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.eigh()?.0)
    }
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.try_add(rhs).expect("operator basis mismatch")
    }
}

impl Sub for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.try_sub(rhs).expect("operator basis mismatch")
    }
}

impl Mul<f64> for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: f64) -> OperatorMatrix {
        self.scaled(rhs)
    }
}

/// Sum of Pauli strings in a chain basis.
pub fn build_operator(terms: &[PauliStringTerm], basis: &SpinBasis) -> Result<OperatorMatrix> {
    let n = basis.sites();
    if basis.is_dicke() {
        return Err(Error::PauliOnDicke);
    }
    for term in terms {
        term.validate(n)?;
    }
    let d = basis.dimension();
    let mut m = CMatrix::zeros(d, d);
    match basis.sector_table() {
        None => {
            for s in 0..1usize << n {
                for term in terms {
                    let (t, amp) = term.apply(s, n);
                    m[(t, s)] += amp * term.coefficient;
                }
            }
        }
        Some(table) => {
            // M_ab = Σ_{s,s'} conj(<s'|a>) <s'|M|s> <s|b>; the norm of the
            // full image M|b> must equal the norm of its projection.
            let mut image: Vec<(usize, C64)> = Vec::new();
            let mut leak = 0.0_f64;
            let mut scale = 0.0_f64;
            for b in 0..d {
                image.clear();
                for &s in table.members(b) {
                    let cb = table.amplitude(s);
                    for term in terms {
                        let (t, amp) = term.apply(s, n);
                        let v = amp * term.coefficient * cb;
                        match image.iter_mut().find(|(u, _)| *u == t) {
                            Some(e) => e.1 += v,
                            None => image.push((t, v)),
                        }
                    }
                }
                let mut full = 0.0;
                for &(t, v) in &image {
                    full += v.norm_sqr();
                    if let Some((a, ca)) = table.locate(t) {
                        m[(a, b)] += ca.conj() * v;
                    }
                }
                let projected: f64 = m.column(b).iter().map(|z| z.norm_sqr()).sum();
                leak = leak.max((full - projected).abs());
                scale = scale.max(full);
            }
            if leak > SYMMETRY_TOL * scale.max(1.0) {
                return Err(Error::SymmetryViolation { symmetry: "sector", residual: leak.sqrt() });
            }
        }
    }
    OperatorMatrix::new(basis.clone(), m)
}

/// Collective spin operators `(S_x, S_y, S_z)` in the Dicke basis; index `i`
/// holds magnetization `m = S - i`.
pub fn build_collective_ops(n: usize) -> Result<(OperatorMatrix, OperatorMatrix, OperatorMatrix)> {
    let basis = SpinBasis::dicke(n)?;
    let d = n + 1;
    let s = n as f64 / 2.0;
    let mut sx = CMatrix::zeros(d, d);
    let mut sy = CMatrix::zeros(d, d);
    let mut sz = CMatrix::zeros(d, d);
    for i in 0..d {
        let m = s - i as f64;
        sz[(i, i)] = C64::new(m, 0.0);
        if i + 1 < d {
            // <m|S^+|m-1> = sqrt(S(S+1) - m(m-1))
            let c = (s * (s + 1.0) - m * (m - 1.0)).sqrt();
            sx[(i, i + 1)] = C64::new(c / 2.0, 0.0);
            sx[(i + 1, i)] = C64::new(c / 2.0, 0.0);
            sy[(i, i + 1)] = C64::new(0.0, -c / 2.0);
            sy[(i + 1, i)] = C64::new(0.0, c / 2.0);
        }
    }
    Ok((
        OperatorMatrix::new(basis.clone(), sx)?,
        OperatorMatrix::new(basis.clone(), sy)?,
        OperatorMatrix::new(basis, sz)?,
    ))
}

/// Restrict a full-chain operator to a symmetry sector.
pub fn project_to_sector(m: &OperatorMatrix, sector: &SpinBasis) -> Result<OperatorMatrix> {
    let n = match m.basis().mode() {
        BasisMode::FullChain { n, .. } => *n,
        other => return Err(Error::InvalidBasis(format!("projection needs a full-chain operator, got {other:?}"))),
    };
    let (parity, table) = match (sector.mode(), sector.sector_table()) {
        (BasisMode::SymmetricSector { n: ns, parity, .. }, Some(t)) if *ns == n => (*parity, t),
        _ => return Err(Error::InvalidBasis(format!("{sector} is not a symmetry sector of a {n}-site chain"))),
    };
    let e = m.entries();
    let size = 1usize << n;
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    let mut flip_res = 0.0_f64;
    let mut trans_res = 0.0_f64;
    for s in 0..size {
        for t in 0..size {
            let v = e[(t, s)];
            if parity.is_some() {
                flip_res = flip_res.max((e[(flip_all(t, n), flip_all(s, n))] - v).norm());
            }
            trans_res = trans_res.max((e[(translate(t, n), translate(s, n))] - v).norm());
        }
    }
    if flip_res > SYMMETRY_TOL * scale {
        return Err(Error::SymmetryViolation { symmetry: "spin-flip parity", residual: flip_res });
    }
    if trans_res > SYMMETRY_TOL * scale {
        return Err(Error::SymmetryViolation { symmetry: "translation", residual: trans_res });
    }
    let d = table.dim();
    let mut out = CMatrix::zeros(d, d);
    for b in 0..d {
        for &s in table.members(b) {
            let cb = table.amplitude(s);
            for a in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for &t in table.members(a) {
                    acc += table.amplitude(t).conj() * e[(t, s)];
                }
                out[(a, b)] += acc * cb;
            }
        }
    }
    OperatorMatrix::new(sector.clone(), out)
}

/// Columns of the isometry that embeds a sector into the full chain.
pub fn sector_isometry(sector: &SpinBasis) -> Result<CMatrix> {
    let table =
        sector.sector_table().ok_or_else(|| Error::InvalidBasis(format!("{sector} is not a symmetry sector")))?;
    let size = 1usize << table.n();
    let mut b = CMatrix::zeros(size, table.dim());
    for a in 0..table.dim() {
        for &s in table.members(a) {
            b[(s, a)] = table.amplitude(s);
        }
    }
    Ok(b)
}

/// Weight used in the operator inner product `(A|B)`.
#[derive(Clone, Debug)]
pub enum InnerProductWeight {
    /// `Re Tr(A^† B) / D`.
    TraceInfiniteT,
    /// Symmetrized expectation value in the exact ground state.
    GroundState(StateVector),
    /// Symmetrized expectation value in an approximate (e.g. evolved) state.
    ApproximateState(StateVector),
}

impl InnerProductWeight {
    pub fn state(&self) -> Option<&StateVector> {
        match self {
            InnerProductWeight::TraceInfiniteT => None,
            InnerProductWeight::GroundState(s) | InnerProductWeight::ApproximateState(s) => Some(s),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            InnerProductWeight::TraceInfiniteT => "trace",
            InnerProductWeight::GroundState(_) => "ground_state",
            InnerProductWeight::ApproximateState(_) => "approximate_state",
        }
    }

    pub(crate) fn view(&self, basis: &SpinBasis) -> Result<Weighting<'_>> {
        match self.state() {
            None => Ok(Weighting::Trace),
            Some(s) => {
                basis.ensure_same(s.basis())?;
                s.ensure_normalized(WEIGHT_NORM_TOL)?;
                Ok(Weighting::State(s.amplitudes()))
            }
        }
    }
}

/// Basis-free view of an inner-product weight, used by the numeric kernels.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Weighting<'a> {
    Trace,
    State(&'a CVector),
}

/// Images `O|ψ>` and `O^†|ψ>` of an operator under a state weight.
pub(crate) struct Images {
    pub direct: CVector,
    pub adjoint: CVector,
}

impl<'a> Weighting<'a> {
    pub fn images<T: Field>(&self, o: &DMatrix<T>) -> Option<Images> {
        match self {
            Weighting::Trace => None,
            Weighting::State(psi) => Some(Images { direct: T::apply(o, psi), adjoint: T::apply_adjoint(o, psi) }),
        }
    }

    /// `(A|B)`: `Re Tr(A^† B)/D` or `Re <ψ|(A^† B + B A^†)/2|ψ>`.
    pub fn inner<T: Field>(&self, a: &DMatrix<T>, b: &DMatrix<T>) -> f64 {
        match self {
            Weighting::Trace => linalg::frobenius_re(a, b) / a.nrows() as f64,
            Weighting::State(_) => {
                let ia = self.images(a).expect("state weight");
                let ib = self.images(b).expect("state weight");
                Self::inner_images(&ia, &ib)
            }
        }
    }

    /// Same as [`Weighting::inner`] with precomputed images (state weights)
    /// or matrices (trace weight).
    pub fn inner_cached<T: Field>(
        &self,
        a: &DMatrix<T>,
        ia: Option<&Images>,
        b: &DMatrix<T>,
        ib: Option<&Images>,
    ) -> f64 {
        match (self, ia, ib) {
            (Weighting::State(_), Some(ia), Some(ib)) => Self::inner_images(ia, ib),
            _ => self.inner(a, b),
        }
    }

    fn inner_images(ia: &Images, ib: &Images) -> f64 {
        // <ψ|A^† B|ψ> = <Aψ|Bψ>,  <ψ|B A^†|ψ> = <B^†ψ|A^†ψ>
        let first = linalg::cdot(&ia.direct, &ib.direct);
        let second = linalg::cdot(&ib.adjoint, &ia.adjoint);
        0.5 * (first.re + second.re)
    }
}

/// Operator inner product `(A|B)` under weight `w`.
pub fn op_inner(a: &OperatorMatrix, b: &OperatorMatrix, w: &InnerProductWeight) -> Result<f64> {
    a.basis().ensure_same(b.basis())?;
    a.require_hermitian()?;
    b.require_hermitian()?;
    let view = w.view(a.basis())?;
    Ok(view.inner(a.entries(), b.entries()))
}

/// Seminorm `sqrt((A|A))`; accepts anti-Hermitian operators as well.
pub fn op_norm(a: &OperatorMatrix, w: &InnerProductWeight) -> Result<f64> {
    let view = w.view(a.basis())?;
    Ok(view.inner(a.entries(), a.entries()).max(0.0).sqrt())
}
