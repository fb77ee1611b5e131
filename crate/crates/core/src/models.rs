//! Annealing problems: the `λ` schedule, model Hamiltonians, extra-control
//! terms and the augmented path `λ H0 + (1-λ) H1 + Σ f_n(λ) H_c^(n)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::basis::{BasisMode, Parity, SpinBasis};
use crate::linalg;
use crate::operator::{build_collective_ops, build_operator, Axis, OperatorMatrix, PauliStringTerm};
use crate::state::StateVector;
use crate::{CMatrix, CVector, Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleMode {
    FiniteTime,
    FastLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub tau: f64,
    pub mode: ScheduleMode,
}

impl Schedule {
    pub fn finite_time(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::OutOfRange { name: "tau", value: tau, range: "(0, inf)" });
        }
        Ok(Schedule { tau, mode: ScheduleMode::FiniteTime })
    }

    pub fn fast_limit() -> Self {
        Schedule { tau: 0.0, mode: ScheduleMode::FastLimit }
    }
}

/// `λ(t) = sin²((π/2) sin²(π t / 2τ))` and its time derivative.
pub fn lambda_schedule(t: f64, tau: f64) -> Result<(f64, f64)> {
    if !(tau > 0.0) {
        return Err(Error::OutOfRange { name: "tau", value: tau, range: "(0, inf)" });
    }
    if !(0.0..=tau).contains(&t) {
        return Err(Error::OutOfRange { name: "t", value: t, range: "[0, tau]" });
    }
    let v = PI * t / (2.0 * tau);
    let u = 0.5 * PI * v.sin().powi(2);
    let lambda = u.sin().powi(2);
    let lambda_dot = (2.0 * u).sin() * (2.0 * v).sin() * PI * PI / (4.0 * tau);
    Ok((lambda, lambda_dot))
}

/// Inverse of [`lambda_schedule`]: the time `t ∈ [0, τ]` at which the
/// schedule reaches `λ`, with `λ̇` there.
pub fn schedule_point(lambda: f64, tau: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::OutOfRange { name: "lambda", value: lambda, range: "[0, 1]" });
    }
    let u = lambda.sqrt().asin();
    let v = (2.0 * u / PI).sqrt().min(1.0).asin();
    let t = (2.0 * tau * v / PI).min(tau);
    Ok((t, lambda_schedule(t, tau)?.1))
}

/// An extra control `f(λ) H_c` with `f(λ) = Σ_k β_k sin(k π λ)`, `k = 1, 2, …`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlTerm {
    pub label: String,
    pub operator: OperatorMatrix,
    pub harmonics: Vec<f64>,
}

impl ControlTerm {
    pub fn new(label: impl Into<String>, operator: OperatorMatrix, harmonics: Vec<f64>) -> Result<Self> {
        operator.require_hermitian()?;
        Ok(ControlTerm { label: label.into(), operator, harmonics })
    }

    pub fn profile(&self, lambda: f64) -> f64 {
        self.harmonics.iter().enumerate().map(|(k, b)| b * ((k + 1) as f64 * PI * lambda).sin()).sum()
    }

    /// `df/dλ`.
    pub fn profile_derivative(&self, lambda: f64) -> f64 {
        self.harmonics
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let w = (k + 1) as f64 * PI;
                b * w * (w * lambda).cos()
            })
            .sum()
    }
}

#[derive(Clone, Debug)]
pub struct AnnealingProblem {
    pub h0: OperatorMatrix,
    pub h1: OperatorMatrix,
    pub controls: Vec<ControlTerm>,
    pub schedule: Schedule,
    pub target: StateVector,
    pub initial: StateVector,
}

impl AnnealingProblem {
    pub fn new(
        h0: OperatorMatrix,
        h1: OperatorMatrix,
        controls: Vec<ControlTerm>,
        schedule: Schedule,
        target: StateVector,
        initial: StateVector,
    ) -> Result<Self> {
        h0.require_hermitian()?;
        h1.require_hermitian()?;
        let basis = h0.basis();
        basis.ensure_same(h1.basis())?;
        for c in &controls {
            basis.ensure_same(c.operator.basis())?;
        }
        basis.ensure_same(target.basis())?;
        basis.ensure_same(initial.basis())?;
        target.ensure_normalized(1e-10)?;
        initial.ensure_normalized(1e-10)?;
        Ok(AnnealingProblem { h0, h1, controls, schedule, target, initial })
    }

    pub fn basis(&self) -> &SpinBasis {
        self.h0.basis()
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }

    /// Replace the control list; each term starts with `harmonics` zero
    /// amplitudes.
    pub fn with_controls(mut self, set: &ControlSet, harmonics: usize) -> Result<Self> {
        self.controls = build_controls(set, &self.h0, &self.h1, harmonics)?;
        Ok(self)
    }

    /// Total number of `β` amplitudes across all controls.
    pub fn parameter_count(&self) -> usize {
        self.controls.iter().map(|c| c.harmonics.len()).sum()
    }

    pub fn betas(&self) -> Vec<f64> {
        self.controls.iter().flat_map(|c| c.harmonics.iter().copied()).collect()
    }

    /// Set `β_k^(n)` for `(n, k)` in `params` (`k` zero-based).
    pub fn set_parameters(&mut self, params: &[(usize, usize)], values: &[f64]) -> Result<()> {
        if params.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: params.len(), actual: values.len() });
        }
        for (&(n, k), &v) in params.iter().zip(values) {
            let term = self
                .controls
                .get_mut(n)
                .ok_or_else(|| Error::InvalidOptimization(format!("control index {n} out of range")))?;
            if k >= term.harmonics.len() {
                term.harmonics.resize(k + 1, 0.0);
            }
            term.harmonics[k] = v;
        }
        Ok(())
    }

    /// Coefficients `(c0, c1, [f_n])` of `H̃(λ) = c0 H0 + c1 H1 + Σ f_n H_c^(n)`.
    pub fn coefficients(&self, lambda: f64) -> (f64, f64, Vec<f64>) {
        (lambda, 1.0 - lambda, self.controls.iter().map(|c| c.profile(lambda)).collect())
    }

    /// Coefficients of `∂_λ H̃` in the same decomposition.
    pub fn derivative_coefficients(&self, lambda: f64) -> (f64, f64, Vec<f64>) {
        (1.0, -1.0, self.controls.iter().map(|c| c.profile_derivative(lambda)).collect())
    }

    /// `c0 H0 + c1 H1 + Σ f_n H_c^(n)` as a raw matrix.
    pub fn combine(&self, c: &(f64, f64, Vec<f64>)) -> CMatrix {
        let mut m = self.h0.entries() * C64::new(c.0, 0.0) + self.h1.entries() * C64::new(c.1, 0.0);
        for (term, &f) in self.controls.iter().zip(&c.2) {
            if f != 0.0 {
                m += term.operator.entries() * C64::new(f, 0.0);
            }
        }
        m
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::OutOfRange { name: "lambda", value: lambda, range: "[0, 1]" })
    }
}

/// `λ H0 + (1-λ) H1`.
pub fn annealing_hamiltonian(lambda: f64, problem: &AnnealingProblem) -> Result<OperatorMatrix> {
    check_lambda(lambda)?;
    let m = problem.h0.entries() * C64::new(lambda, 0.0) + problem.h1.entries() * C64::new(1.0 - lambda, 0.0);
    OperatorMatrix::new(problem.basis().clone(), m)
}

/// Annealing Hamiltonian plus every control term at its profile value.
pub fn augmented_hamiltonian(lambda: f64, problem: &AnnealingProblem) -> Result<OperatorMatrix> {
    check_lambda(lambda)?;
    OperatorMatrix::new(problem.basis().clone(), problem.combine(&problem.coefficients(lambda)))
}

/// `∂_λ` of the augmented Hamiltonian.
pub fn hamiltonian_derivative(lambda: f64, problem: &AnnealingProblem) -> Result<OperatorMatrix> {
    check_lambda(lambda)?;
    OperatorMatrix::new(problem.basis().clone(), problem.combine(&problem.derivative_coefficients(lambda)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ModelKind {
    ShortRangeIsing,
    Ltfim { h_x: f64, h_z: f64 },
    LongRangeIsing { alpha: f64 },
    CollectiveSpin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n: usize,
    /// `None` picks the model's default: the even, zero-momentum sector of
    /// the periodic chain (zero momentum only for LTFIM with `h_z != 0`), or
    /// the Dicke basis for the collective model.
    pub basis: Option<BasisMode>,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, n: usize) -> Self {
        ModelSpec { kind, n, basis: None }
    }

    pub fn default_basis(&self) -> BasisMode {
        let n = self.n;
        match self.kind {
            ModelKind::CollectiveSpin => BasisMode::Dicke { n },
            ModelKind::Ltfim { h_z, .. } if h_z != 0.0 => BasisMode::SymmetricSector { n, parity: None, momentum: 0 },
            _ => BasisMode::SymmetricSector { n, parity: Some(Parity::Even), momentum: 0 },
        }
    }
}

/// Periodic unless the basis is an open full chain.
fn periodic(basis: &SpinBasis) -> bool {
    !matches!(basis.mode(), BasisMode::FullChain { periodic: false, .. })
}

fn bonds(n: usize, range: usize, periodic: bool) -> Vec<Vec<usize>> {
    let count = if periodic { n } else { n.saturating_sub(range - 1) };
    (0..count).map(|j| (0..range).map(|r| (j + r) % n).collect()).collect()
}

fn string_sum(basis: &SpinBasis, axes: &[Axis], coefficient: f64) -> Result<OperatorMatrix> {
    let n = basis.sites();
    let terms: Vec<PauliStringTerm> = bonds(n, axes.len(), periodic(basis))
        .into_iter()
        .map(|sites| PauliStringTerm::new(sites.into_iter().zip(axes.iter().copied()).collect(), coefficient))
        .collect();
    build_operator(&terms, basis)
}

/// Pauli-string control sums available by name (periodic sums on rings).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NamedControl {
    /// `Σ σ^y_j σ^y_{j+1}`
    YY,
    /// `Σ σ^z_j σ^x_{j+1} σ^z_{j+2}`
    ZXZ,
    /// `Σ σ^z_j`
    FieldZ,
    /// `Σ σ^x_j`
    FieldX,
}

impl NamedControl {
    pub fn label(self) -> &'static str {
        match self {
            NamedControl::YY => "YY",
            NamedControl::ZXZ => "ZXZ",
            NamedControl::FieldZ => "Z",
            NamedControl::FieldX => "X",
        }
    }
}

pub fn named_control(kind: NamedControl, basis: &SpinBasis) -> Result<OperatorMatrix> {
    match kind {
        NamedControl::YY => string_sum(basis, &[Axis::Y, Axis::Y], 1.0),
        NamedControl::ZXZ => string_sum(basis, &[Axis::Z, Axis::X, Axis::Z], 1.0),
        NamedControl::FieldZ => string_sum(basis, &[Axis::Z], 1.0),
        NamedControl::FieldX => string_sum(basis, &[Axis::X], 1.0),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ControlSet {
    None,
    Named(Vec<NamedControl>),
    /// `[H0,[H1,H0]]` and `[H1,[H1,H0]]`.
    Commutator,
}

pub fn build_controls(
    set: &ControlSet,
    h0: &OperatorMatrix,
    h1: &OperatorMatrix,
    harmonics: usize,
) -> Result<Vec<ControlTerm>> {
    let zeros = vec![0.0; harmonics];
    match set {
        ControlSet::None => Ok(Vec::new()),
        ControlSet::Named(list) => {
            list.iter().map(|&k| ControlTerm::new(k.label(), named_control(k, h0.basis())?, zeros.clone())).collect()
        }
        ControlSet::Commutator => {
            let (c1, c2) = commutator_controls(h0, h1)?;
            Ok(vec![ControlTerm::new("Hc1", c1, zeros.clone())?, ControlTerm::new("Hc2", c2, zeros)?])
        }
    }
}

/// `i [H1, H0]`.
pub fn first_commutator(h0: &OperatorMatrix, h1: &OperatorMatrix) -> Result<OperatorMatrix> {
    h1.commutator(h0)?.times(C64::new(0.0, 1.0))
}

/// `([H0,[H1,H0]], [H1,[H1,H0]])`.
pub fn commutator_controls(h0: &OperatorMatrix, h1: &OperatorMatrix) -> Result<(OperatorMatrix, OperatorMatrix)> {
    let c = h1.commutator(h0)?;
    Ok((h0.commutator(&c)?, h1.commutator(&c)?))
}

/// Build the model Hamiltonians and their initial/target ground states. The
/// returned problem has no controls and a fast-limit schedule.
pub fn make_model(spec: &ModelSpec) -> Result<AnnealingProblem> {
    let n = spec.n;
    let mode = spec.basis.clone().unwrap_or_else(|| spec.default_basis());
    let basis = SpinBasis::from_mode(&mode)?;
    if basis.sites() != n {
        return Err(Error::InvalidModel(format!("basis {basis} does not have {n} sites")));
    }
    let (h0, h1) = match spec.kind {
        ModelKind::CollectiveSpin => {
            if !basis.is_dicke() {
                return Err(Error::InvalidModel("the collective model lives in the Dicke basis".into()));
            }
            let (sx, _, sz) = build_collective_ops(n)?;
            let s = n as f64 / 2.0;
            let sz2 = sz.try_mul(&sz)?;
            (sz2.scaled(-1.0 / (s * (s + 1.0)).sqrt()), sx.scaled(-1.0))
        }
        kind => {
            if n < 2 {
                return Err(Error::InvalidModel(format!("chain models need n >= 2, got {n}")));
            }
            if basis.is_dicke() {
                return Err(Error::PauliOnDicke);
            }
            let h1 = string_sum(&basis, &[Axis::X], -1.0)?;
            let h0 = match kind {
                ModelKind::ShortRangeIsing => string_sum(&basis, &[Axis::Z, Axis::Z], -1.0)?,
                ModelKind::Ltfim { h_x, h_z } => {
                    let mut terms = bond_terms(n, periodic(&basis));
                    for i in 0..n {
                        if h_z != 0.0 {
                            terms.push(PauliStringTerm::new(vec![(i, Axis::Z)], -h_z));
                        }
                        if h_x != 0.0 {
                            terms.push(PauliStringTerm::new(vec![(i, Axis::X)], -h_x));
                        }
                    }
                    build_operator(&terms, &basis)?
                }
                ModelKind::LongRangeIsing { alpha } => {
                    if !(alpha >= 0.0) {
                        return Err(Error::OutOfRange { name: "alpha", value: alpha, range: "[0, inf)" });
                    }
                    let ring = periodic(&basis);
                    let mut terms = Vec::new();
                    for i in 0..n {
                        for j in i + 1..n {
                            let d = if ring { (j - i).min(n - (j - i)) } else { j - i };
                            terms
                                .push(PauliStringTerm::new(vec![(i, Axis::Z), (j, Axis::Z)], -(d as f64).powf(-alpha)));
                        }
                    }
                    build_operator(&terms, &basis)?
                }
                ModelKind::CollectiveSpin => unreachable!(),
            };
            (h0, h1)
        }
    };
    let (_, target) = parity_resolved_ground_state(&h0)?;
    let (_, initial) = parity_resolved_ground_state(&h1)?;
    AnnealingProblem::new(h0, h1, Vec::new(), Schedule::fast_limit(), target, initial)
}

fn bond_terms(n: usize, periodic: bool) -> Vec<PauliStringTerm> {
    bonds(n, 2, periodic)
        .into_iter()
        .map(|s| PauliStringTerm::new(vec![(s[0], Axis::Z), (s[1], Axis::Z)], -1.0))
        .collect()
}

/// Ground state, restricted to the even spin-flip subspace when the basis
/// carries the flip as a permutation and `h` commutes with it. This picks the
/// GHZ superposition out of the degenerate ferromagnetic doublet.
pub fn parity_resolved_ground_state(h: &OperatorMatrix) -> Result<(f64, StateVector)> {
    let basis = h.basis();
    let perm = match basis.flip_permutation() {
        Some(p) if commutes_with_permutation(h.entries(), &p) => p,
        _ => return crate::dynamics::ground_state(h),
    };
    h.require_hermitian()?;
    let d = basis.dimension();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut cols: Vec<(usize, usize)> = Vec::new();
    for (i, &j) in perm.iter().enumerate() {
        if j >= i {
            cols.push((i, j));
        }
    }
    let mut v = CMatrix::zeros(d, cols.len());
    for (c, &(i, j)) in cols.iter().enumerate() {
        if i == j {
            v[(i, c)] = C64::new(1.0, 0.0);
        } else {
            v[(i, c)] = C64::new(r, 0.0);
            v[(j, c)] = C64::new(r, 0.0);
        }
    }
    let reduced = v.adjoint() * h.entries() * &v;
    let (vals, vecs) = linalg::eigh_complex(&reduced);
    let mut psi: CVector = &v * vecs.column(0);
    linalg::normalize(&mut psi);
    linalg::fix_phase(&mut psi);
    Ok((vals[0], StateVector::new(basis.clone(), psi)?))
}

fn commutes_with_permutation(m: &CMatrix, perm: &[usize]) -> bool {
    let scale = linalg::max_abs(m).max(f64::MIN_POSITIVE);
    let d = m.nrows();
    (0..d).all(|i| (0..d).all(|j| (m[(perm[i], perm[j])] - m[(i, j)]).norm() <= 1e-12 * scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{op_inner, InnerProductWeight};

    fn full(n: usize) -> ModelSpec {
        ModelSpec { kind: ModelKind::ShortRangeIsing, n, basis: Some(BasisMode::FullChain { n, periodic: true }) }
    }

    #[test]
    fn schedule_boundaries_and_midpoint() {
        assert_eq!(lambda_schedule(0.0, 2.0).unwrap(), (0.0, 0.0));
        let (l, d) = lambda_schedule(2.0, 2.0).unwrap();
        assert!((l - 1.0).abs() < 1e-15 && d.abs() < 1e-14);
        let tau = 3.0;
        let (l, d) = lambda_schedule(tau / 2.0, tau).unwrap();
        assert!((l - 0.5).abs() < 1e-15);
        assert!((d - PI * PI / (4.0 * tau)).abs() < 1e-12);
        assert!(lambda_schedule(-0.1, 1.0).is_err());
        assert!(lambda_schedule(1.1, 1.0).is_err());
    }

    #[test]
    fn schedule_point_inverts_schedule() {
        for lambda in [0.0, 0.1, 0.4, 0.5, 0.93, 1.0] {
            let (t, rate) = schedule_point(lambda, 2.0).unwrap();
            let (l, r) = lambda_schedule(t, 2.0).unwrap();
            assert!((l - lambda).abs() < 1e-12 && (r - rate).abs() < 1e-15);
        }
        assert!(schedule_point(1.5, 1.0).is_err());
    }

    #[test]
    fn schedule_derivative_matches_finite_difference() {
        let tau = 1.7;
        let h = 1e-6 * tau;
        for &t in &[0.1, 0.5, 0.9, 1.3] {
            let (_, d) = lambda_schedule(t, tau).unwrap();
            let fd = (lambda_schedule(t + h, tau).unwrap().0 - lambda_schedule(t - h, tau).unwrap().0) / (2.0 * h);
            assert!((d - fd).abs() < 1e-7, "t = {t}");
        }
    }

    #[test]
    fn three_site_transverse_field_ground_state() {
        let p = make_model(&full(3)).unwrap();
        let (e, psi) = crate::dynamics::ground_state(&p.h1).unwrap();
        assert!((e + 3.0).abs() < 1e-12);
        let u = 1.0 / 8f64.sqrt();
        assert!(psi.amplitudes().iter().all(|z| (z - C64::new(u, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn endpoints_and_controls() {
        let mut p = make_model(&ModelSpec::new(ModelKind::ShortRangeIsing, 4))
            .unwrap()
            .with_controls(&ControlSet::Named(vec![NamedControl::YY]), 2)
            .unwrap();
        p.set_parameters(&[(0, 0), (0, 1)], &[1.0, 0.5]).unwrap();
        let h0 = augmented_hamiltonian(1.0, &p).unwrap();
        let h1 = augmented_hamiltonian(0.0, &p).unwrap();
        assert!((h0.entries() - p.h0.entries()).norm() < 1e-14);
        assert!((h1.entries() - p.h1.entries()).norm() < 1e-14);
        let expected = (PI / 4.0).sin() + 0.5;
        assert!((p.controls[0].profile(0.25) - expected).abs() < 1e-15);

        p.set_parameters(&[(0, 0), (0, 1)], &[2.0, 0.0]).unwrap();
        let h = augmented_hamiltonian(0.5, &p).unwrap();
        let bare = annealing_hamiltonian(0.5, &p).unwrap();
        let yy = named_control(NamedControl::YY, p.basis()).unwrap();
        assert!((h.entries() - bare.entries() - yy.entries() * C64::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn two_site_target_is_ghz() {
        let p = make_model(&full(2)).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let a = p.target.amplitudes();
        assert!((a[0].re - r).abs() < 1e-12 && (a[3].re - r).abs() < 1e-12);
        assert!(a[1].norm() < 1e-12 && a[2].norm() < 1e-12);
    }

    #[test]
    fn long_range_coupling_law() {
        let n = 5;
        let spec = ModelSpec {
            kind: ModelKind::LongRangeIsing { alpha: 1.5 },
            n,
            basis: Some(BasisMode::FullChain { n, periodic: true }),
        };
        let p = make_model(&spec).unwrap();
        // <↑↑↑↑↑| H0 |↑↑↑↑↑> = -Σ_{i<j} d^{-α}: five bonds at d=1, five at d=2
        let e = p.h0.entries()[(0, 0)].re;
        assert!((e + 5.0 + 5.0 * 2f64.powf(-1.5)).abs() < 1e-12);
        let bad = ModelSpec { kind: ModelKind::LongRangeIsing { alpha: -1.0 }, n: 4, basis: None };
        assert!(make_model(&bad).is_err());
    }

    #[test]
    fn collective_target_energy() {
        let p = make_model(&ModelSpec::new(ModelKind::CollectiveSpin, 4)).unwrap();
        let ev = p.h0.eigenvalues().unwrap();
        let mut expected: Vec<f64> = (-2..=2).map(|m: i32| -((m * m) as f64) / 6f64.sqrt()).collect();
        expected.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
        let a = p.target.amplitudes();
        assert!((a[0].re - a[4].re).abs() < 1e-12 && a[0].re > 0.7);
    }

    #[test]
    fn commutator_controls_properties() {
        let p = make_model(&full(4)).unwrap();
        let (c1, c2) = commutator_controls(&p.h0, &p.h1).unwrap();
        assert!(c1.is_hermitian() && c2.is_hermitian());
        assert!(c1.trace().norm() < 1e-10 && c2.trace().norm() < 1e-10);
        let w = InnerProductWeight::TraceInfiniteT;
        let yy = named_control(NamedControl::YY, p.basis()).unwrap();
        let z = named_control(NamedControl::FieldZ, p.basis()).unwrap();
        assert!(op_inner(&c2, &yy, &w).unwrap().abs() > 1e-3);
        assert!(op_inner(&c2, &z, &w).unwrap().abs() < 1e-12);
        let (z1, z2) = commutator_controls(&p.h1, &p.h1).unwrap();
        assert!(z1.max_abs() == 0.0 && z2.max_abs() == 0.0);
    }

    #[test]
    fn first_commutator_three_site_oracle() {
        let p = make_model(&full(3)).unwrap();
        let c = first_commutator(&p.h0, &p.h1).unwrap();
        let terms: Vec<_> = (0..3)
            .flat_map(|j| {
                let k = (j + 1) % 3;
                [
                    PauliStringTerm::new(vec![(j, Axis::Y), (k, Axis::Z)], 2.0),
                    PauliStringTerm::new(vec![(j, Axis::Z), (k, Axis::Y)], 2.0),
                ]
            })
            .collect();
        let oracle = build_operator(&terms, p.basis()).unwrap();
        assert!((c.entries() - oracle.entries()).norm() < 1e-12);
        assert!(c.entries().iter().all(|z| z.re.abs() < 1e-15));
    }

    #[test]
    fn ltfim_field_breaks_parity() {
        let n = 4;
        let spec = ModelSpec {
            kind: ModelKind::Ltfim { h_x: 0.7, h_z: 0.01 },
            n,
            basis: Some(BasisMode::FullChain { n, periodic: true }),
        };
        let p = make_model(&spec).unwrap();
        let perm = p.basis().flip_permutation().unwrap();
        assert!(!commutes_with_permutation(p.h0.entries(), &perm));
        let sr = make_model(&full(n)).unwrap();
        assert!(commutes_with_permutation(sr.h0.entries(), &perm));
        assert!(commutes_with_permutation(sr.h1.entries(), &perm));
        // default basis keeps translation only
        let q = make_model(&ModelSpec::new(ModelKind::Ltfim { h_x: 0.7, h_z: 0.01 }, 6)).unwrap();
        assert!(matches!(q.basis().mode(), BasisMode::SymmetricSector { parity: None, .. }));
    }
}
