//! Frequency-space view of an approximate gauge potential.
//!
//! In the eigenbasis of `H` the nested-commutator ansatz
//! `A = i Σ α_k L^{2k-1} ∂_λH` has matrix elements
//! `<m|A|n> = <m|A_exact|n> · ω f(ω)` with `f(ω) = -Σ α_k ω^{2k-1}`, so the
//! variational AGP is a polynomial fit of `1/ω` weighted by the couplings.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::agp::{adapted_eigenbasis, degenerate_blocks, AgpSolution};
use crate::linalg;
use crate::operator::OperatorMatrix;
use crate::{CMatrix, Error, Result, C64};

pub const WEIGHT_CUTOFF: f64 = 1e-12;
pub const CURVE_POINTS: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExcitationDatum {
    /// Eigenstate index in ascending energy order.
    pub level: usize,
    pub omega: f64,
    /// `|<m|∂_λH|0>|²`
    pub weight: f64,
    /// `<m|A|0> / <m|A_exact|0>`; `None` until filled or when undefined.
    pub ratio: Option<f64>,
    /// Exact element vanishes while the approximate one does not.
    pub flagged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumFit {
    pub data: Vec<ExcitationDatum>,
    /// Monomial coefficients `α_k` of the approximate gauge potential.
    pub alphas: Vec<f64>,
    /// `(ω, ω f(ω))` on a log grid over `[0.5 min ω, 2 max ω]`.
    pub curve: Vec<(f64, f64)>,
}

struct Spectrum {
    vals: Vec<f64>,
    vecs: CMatrix,
    dhe: CMatrix,
}

fn spectrum(h: &OperatorMatrix, dh: &OperatorMatrix) -> Result<Spectrum> {
    h.basis().ensure_same(dh.basis())?;
    h.require_hermitian()?;
    dh.require_hermitian()?;
    let (vals, vecs, dhe) = adapted_eigenbasis(h.entries(), dh.entries());
    if let Some(first) = degenerate_blocks(&vals).first() {
        if first.len() > 1 {
            return Err(Error::DegenerateGroundState { gap: vals[1] - vals[0] });
        }
    }
    Ok(Spectrum { vals, vecs, dhe })
}

/// One datum per excited state coupled to the ground state by `∂_λ H`.
pub fn gs_excitation_data(h: &OperatorMatrix, dh: &OperatorMatrix) -> Result<Vec<ExcitationDatum>> {
    let s = spectrum(h, dh)?;
    Ok(data_from(&s))
}

fn data_from(s: &Spectrum) -> Vec<ExcitationDatum> {
    (1..s.vals.len())
        .filter_map(|m| {
            let weight = s.dhe[(m, 0)].norm_sqr();
            (weight > WEIGHT_CUTOFF).then(|| ExcitationDatum {
                level: m,
                omega: s.vals[m] - s.vals[0],
                weight,
                ratio: None,
                flagged: false,
            })
        })
        .collect()
}

/// `ω f(ω) = -Σ α_k ω^{2k}`.
pub fn ratio_curve(alphas: &[f64], omega: f64) -> f64 {
    let w2 = omega * omega;
    let mut p = 1.0;
    let mut acc = 0.0;
    for a in alphas {
        p *= w2;
        acc -= a * p;
    }
    acc
}

/// Project `A` onto `i L^{2k-1} ∂_λH`, `k = 1..=order` (trace norm, scaled
/// columns, SVD least squares).
pub fn monomial_alphas(a: &OperatorMatrix, h: &OperatorMatrix, dh: &OperatorMatrix, order: usize) -> Result<Vec<f64>> {
    if order == 0 {
        return Ok(Vec::new());
    }
    let hm = h.entries();
    let mut cols = Vec::with_capacity(order);
    let mut cur = dh.entries().clone();
    for _ in 0..order {
        let odd = linalg::commutator(hm, &cur);
        cur = linalg::commutator(hm, &odd);
        cols.push(odd * C64::new(0.0, 1.0));
    }
    let flat = |m: &CMatrix| DVector::from_iterator(2 * m.len(), m.iter().flat_map(|z| [z.re, z.im]));
    let target = flat(a.entries());
    let mut design = DMatrix::<f64>::zeros(target.len(), order);
    let mut scales = Vec::with_capacity(order);
    for (k, c) in cols.iter().enumerate() {
        let v = flat(c);
        let s = v.norm();
        scales.push(s);
        if s > 0.0 {
            design.set_column(k, &(v / s));
        }
    }
    let svd = design.svd(true, true);
    let cutoff = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let x = svd.solve(&target, cutoff).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok((0..order).map(|k| if scales[k] > 0.0 { x[k] / scales[k] } else { 0.0 }).collect())
}

/// Fill matrix-element ratios and sample the fitted curve.
pub fn fit_curve(
    agp: &AgpSolution,
    exact: &OperatorMatrix,
    h: &OperatorMatrix,
    dh: &OperatorMatrix,
) -> Result<SpectrumFit> {
    h.basis().ensure_same(agp.matrix.basis())?;
    h.basis().ensure_same(exact.basis())?;
    let s = spectrum(h, dh)?;
    let approx_e = s.vecs.adjoint() * agp.matrix.entries() * &s.vecs;
    let exact_e = s.vecs.adjoint() * exact.entries() * &s.vecs;
    let scale = linalg::max_abs(&exact_e).max(linalg::max_abs(&approx_e)).max(f64::MIN_POSITIVE);
    let mut data = data_from(&s);
    for d in &mut data {
        let num = approx_e[(d.level, 0)];
        let den = exact_e[(d.level, 0)];
        if den.norm() <= 1e-12 * scale {
            d.flagged = num.norm() > 1e-12 * scale;
            d.ratio = if d.flagged { None } else { Some(0.0) };
        } else {
            d.ratio = Some((num / den).re);
        }
    }
    let alphas = monomial_alphas(&agp.matrix, h, dh, agp.order)?;
    let curve = if data.is_empty() {
        Vec::new()
    } else {
        let lo = 0.5 * data.iter().map(|d| d.omega).fold(f64::INFINITY, f64::min);
        let hi = 2.0 * data.iter().map(|d| d.omega).fold(0.0, f64::max);
        let (a, b) = (lo.ln(), hi.ln());
        (0..CURVE_POINTS)
            .map(|i| {
                let w = (a + (b - a) * i as f64 / (CURVE_POINTS - 1) as f64).exp();
                (w, ratio_curve(&alphas, w))
            })
            .collect()
    };
    Ok(SpectrumFit { data, alphas, curve })
}

/// `Σ weight (1 - ratio)²` over the data.
pub fn weighted_residual(data: &[ExcitationDatum]) -> f64 {
    data.iter().filter_map(|d| d.ratio.map(|r| d.weight * (1.0 - r).powi(2))).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agp::{action_value, exact_agp, variational_agp};
    use crate::basis::SpinBasis;
    use crate::dynamics::ground_state;
    use crate::models::{annealing_hamiltonian, hamiltonian_derivative, make_model, ModelKind, ModelSpec};
    use crate::operator::{build_operator, Axis, InnerProductWeight, PauliStringTerm};

    fn ising(n: usize, lambda: f64) -> (OperatorMatrix, OperatorMatrix) {
        let p = make_model(&ModelSpec::new(ModelKind::ShortRangeIsing, n)).unwrap();
        (annealing_hamiltonian(lambda, &p).unwrap(), hamiltonian_derivative(lambda, &p).unwrap())
    }

    #[test]
    fn sum_rule() {
        let (h, dh) = ising(6, 0.4);
        let data = gs_excitation_data(&h, &dh).unwrap();
        let (_, gs) = ground_state(&h).unwrap();
        let v = dh.apply(&gs).unwrap();
        let mean = linalg::cdot(gs.amplitudes(), &v).re;
        let var = v.norm_squared() - mean * mean;
        let total: f64 = data.iter().map(|d| d.weight).sum();
        assert!((total - var).abs() < 1e-8);
    }

    #[test]
    fn diagonal_derivative_has_no_data() {
        let (h, _) = ising(4, 0.4);
        assert!(gs_excitation_data(&h, &h).unwrap().is_empty());
    }

    #[test]
    fn two_site_frequency_spacing() {
        let b = SpinBasis::sector(2, Some(crate::basis::Parity::Even), 0).unwrap();
        let x: Vec<_> = (0..2).map(|i| PauliStringTerm::new(vec![(i, Axis::X)], -1.0)).collect();
        let mut d = vec![
            PauliStringTerm::new(vec![(0, Axis::Z), (1, Axis::Z)], -1.0),
            PauliStringTerm::new(vec![(1, Axis::Z), (0, Axis::Z)], -1.0),
        ];
        d.extend((0..2).map(|i| PauliStringTerm::new(vec![(i, Axis::X)], 1.0)));
        let h = build_operator(&x, &b).unwrap();
        let dh = build_operator(&d, &b).unwrap();
        let data = gs_excitation_data(&h, &dh).unwrap();
        assert!(!data.is_empty());
        for d in data {
            assert!((d.omega / 4.0 - (d.omega / 4.0).round()).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_self_ratio_is_one() {
        let (h, dh) = ising(4, 0.5);
        let exact = exact_agp(&h, &dh).unwrap();
        let sol = AgpSolution { gammas: Vec::new(), matrix: exact.clone(), action_value: 0.0, order: 0 };
        let fit = fit_curve(&sol, &exact, &h, &dh).unwrap();
        assert!(fit.data.iter().all(|d| (d.ratio.unwrap() - 1.0).abs() < 1e-8));
    }

    #[test]
    fn two_level_first_order_is_exact() {
        let b = SpinBasis::full_chain(1, false).unwrap();
        let h = build_operator(
            &[PauliStringTerm::new(vec![(0, Axis::X)], 1.0), PauliStringTerm::new(vec![(0, Axis::Z)], 1.0)],
            &b,
        )
        .unwrap();
        let dh = build_operator(&[PauliStringTerm::new(vec![(0, Axis::Z)], 1.0)], &b).unwrap();
        let sol = variational_agp(&h, &dh, 1, &InnerProductWeight::TraceInfiniteT).unwrap();
        let fit = fit_curve(&sol, &exact_agp(&h, &dh).unwrap(), &h, &dh).unwrap();
        assert_eq!(fit.data.len(), 1);
        assert!((fit.data[0].ratio.unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(fit.curve.len(), CURVE_POINTS);
    }

    #[test]
    fn ratios_match_curve_and_action() {
        let (h, dh) = ising(6, 0.5);
        let sol = variational_agp(&h, &dh, 2, &InnerProductWeight::TraceInfiniteT).unwrap();
        let fit = fit_curve(&sol, &exact_agp(&h, &dh).unwrap(), &h, &dh).unwrap();
        for d in &fit.data {
            assert!((d.ratio.unwrap() - ratio_curve(&fit.alphas, d.omega)).abs() < 1e-6);
        }
        let (_, gs) = ground_state(&h).unwrap();
        let diag = linalg::cdot(gs.amplitudes(), &dh.apply(&gs).unwrap()).re;
        let action = action_value(&h, &dh, &sol.matrix, &InnerProductWeight::GroundState(gs)).unwrap().value;
        assert!((weighted_residual(&fit.data) + diag * diag - action).abs() < 1e-6);
    }
}
