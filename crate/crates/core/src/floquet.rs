//! Six-pulse Floquet realization of the augmented CD Hamiltonian
//! `λ H0 + (1-λ) H1 - i λ̇ α_1 [H1,H0] + β_1 [H0,[H1,H0]] + β_2 [H1,[H1,H0]]`
//! from alternating pulses of `H0` and `H1`.
//!
//! One period applies `exp(-i ε_1 H0)` first and `exp(-i ε_6 H1)` last. The
//! effective Hamiltonian
//! `H_F T = f_0 H0 + f_1 H1 + f_01 (-i[H1,H0]) + f_010 [H0,[H1,H0]] + f_110 [H1,[H1,H0]] + O(ε⁴)`
//! follows from composing
//! the pulses with the Baker-Campbell-Hausdorff series truncated at third
//! order in the free Lie algebra on two generators.

use serde::Serialize;

use crate::linalg;
use crate::models::{commutator_controls, first_commutator};
use crate::operator::{InnerProductWeight, OperatorMatrix};
use crate::{CMatrix, Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MagnusCoefficients {
    pub f0: f64,
    pub f1: f64,
    pub f01: f64,
    pub f010: f64,
    pub f110: f64,
}

impl MagnusCoefficients {
    pub fn scaled(&self, s: f64) -> Self {
        MagnusCoefficients {
            f0: self.f0 * s,
            f1: self.f1 * s,
            f01: self.f01 * s,
            f010: self.f010 * s,
            f110: self.f110 * s,
        }
    }
}

/// Element of the free Lie algebra on `a, b` truncated at degree three, in
/// the basis `a, b, [a,b], [a,[a,b]], [b,[a,b]]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Lie([f64; 5]);

impl Lie {
    fn bracket(self, y: Lie) -> Lie {
        let (x, y) = (self.0, y.0);
        Lie([0.0, 0.0, x[0] * y[1] - x[1] * y[0], x[0] * y[2] - x[2] * y[0], x[1] * y[2] - x[2] * y[1]])
    }

    fn axpy(self, s: f64, y: Lie) -> Lie {
        let mut out = self.0;
        for (o, v) in out.iter_mut().zip(y.0) {
            *o += s * v;
        }
        Lie(out)
    }

    /// `log(e^self e^y)` to third order.
    fn bch(self, y: Lie) -> Lie {
        let xy = self.bracket(y);
        self.axpy(1.0, y).axpy(0.5, xy).axpy(1.0 / 12.0, self.bracket(xy)).axpy(-1.0 / 12.0, y.bracket(xy))
    }
}

/// Effective-Hamiltonian coefficients of the pulse train `ε_1 … ε_6`.
pub fn magnus_coefficients(eps: &[f64; 6]) -> MagnusCoefficients {
    // generators a = -i H0, b = -i H1; U = exp(Z), Z = -i H_F T
    let mut z = Lie::default();
    for (i, &e) in eps.iter().enumerate() {
        let pulse = if i % 2 == 0 { Lie([e, 0.0, 0.0, 0.0, 0.0]) } else { Lie([0.0, e, 0.0, 0.0, 0.0]) };
        z = pulse.bch(z);
    }
    // [a,b] = [H1,H0];  [a,[a,b]] = -i [H0,[H1,H0]];  [b,[a,b]] = -i [H1,[H1,H0]]
    let c = z.0;
    MagnusCoefficients { f0: c[0], f1: c[1], f01: -c[2], f010: c[3], f110: c[4] }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PulseSequence {
    /// Strengths `ε_1 … ε_6`; odd pulses use `H0`, even pulses `H1`.
    pub eps: [f64; 6],
    pub period: f64,
    /// `ε_i / T^{1/3}`.
    pub eta: [f64; 6],
    /// Set when `α_1 λ̇ < 0`: the square roots were taken of `|α_1| λ̇` and
    /// the synthesized `f_01` has the wrong sign.
    pub alpha_sign_flag: bool,
}

/// Pulse strengths `ε_i = T^{1/3} η_i` matching `(λ, λ̇ α_1, β_1, β_2)`.
pub fn pulse_strengths(
    lambda: f64,
    lambda_dot: f64,
    alpha1: f64,
    beta1: f64,
    beta2: f64,
    period: f64,
) -> Result<PulseSequence> {
    if !(beta1 > 0.0) {
        return Err(Error::OutOfRange { name: "beta1", value: beta1, range: "(0, inf)" });
    }
    if !(beta2 > 0.0) {
        return Err(Error::OutOfRange { name: "beta2", value: beta2, range: "(0, inf)" });
    }
    if !(lambda_dot >= 0.0) {
        return Err(Error::OutOfRange { name: "lambda_dot", value: lambda_dot, range: "[0, inf)" });
    }
    if !(period > 0.0) {
        return Err(Error::OutOfRange { name: "T", value: period, range: "(0, inf)" });
    }
    let c1 = beta1.powf(2.0 / 3.0) / beta2.powf(1.0 / 3.0);
    let c2 = beta2.powf(2.0 / 3.0) / beta1.powf(1.0 / 3.0);
    let root = lambda_dot.sqrt() * period.powf(1.0 / 6.0);
    let a = alpha1.abs();
    let s1 = (a * beta1 / (3.0 * beta2)).sqrt() * root;
    let s2 = (3.0 * a * beta2 / beta1).sqrt() * root;
    let t23 = period.powf(2.0 / 3.0) / 3.0;
    let (odd, even) = (lambda * t23, (1.0 - lambda) * t23);
    let eta =
        [-c1 + s1 + odd, c2 + s2 + even, 2.0 * c1 + s1 + odd, c2 + even, -c1 - 2.0 * s1 + odd, -2.0 * c2 - s2 + even];
    let scale = period.powf(1.0 / 3.0);
    Ok(PulseSequence { eps: eta.map(|e| e * scale), period, eta, alpha_sign_flag: alpha1 * lambda_dot < 0.0 })
}

/// `exp(-i ε_6 H1) exp(-i ε_5 H0) … exp(-i ε_1 H0)`.
pub fn floquet_period_propagator(
    seq: &PulseSequence,
    h0: &OperatorMatrix,
    h1: &OperatorMatrix,
) -> Result<OperatorMatrix> {
    h0.basis().ensure_same(h1.basis())?;
    h0.require_hermitian()?;
    h1.require_hermitian()?;
    let d = h0.dimension();
    let mut u = CMatrix::identity(d, d);
    for (i, &e) in seq.eps.iter().enumerate() {
        if e == 0.0 {
            continue;
        }
        let h = if i % 2 == 0 { h0 } else { h1 };
        u = linalg::expm_hermitian(h.entries(), e) * u;
    }
    OperatorMatrix::new(h0.basis().clone(), u)
}

/// `-(A | i[H1,H0]) / (i[H1,H0] | i[H1,H0])` under the trace weight: the
/// `α_1` of `-i λ̇ α_1 [H1,H0]`.
pub fn first_order_alpha(agp: &OperatorMatrix, h0: &OperatorMatrix, h1: &OperatorMatrix) -> Result<f64> {
    let c = first_commutator(h0, h1)?;
    let w = InnerProductWeight::TraceInfiniteT;
    let norm = crate::operator::op_inner(&c, &c, &w)?;
    if norm == 0.0 {
        return Err(Error::Numerical("H0 and H1 commute; no first-order term".into()));
    }
    Ok(-crate::operator::op_inner(agp, &c, &w)? / norm)
}

/// `λ H0 + (1-λ) H1 - i λ̇ α_1 [H1,H0] + β_1 [H0,[H1,H0]] + β_2 [H1,[H1,H0]]`.
pub fn target_cd_hamiltonian(
    lambda: f64,
    lambda_dot: f64,
    alpha1: f64,
    betas: (f64, f64),
    h0: &OperatorMatrix,
    h1: &OperatorMatrix,
) -> Result<OperatorMatrix> {
    let c = first_commutator(h0, h1)?;
    let (hc1, hc2) = commutator_controls(h0, h1)?;
    let m = h0.entries() * C64::new(lambda, 0.0) + h1.entries() * C64::new(1.0 - lambda, 0.0)
        - c.entries() * C64::new(lambda_dot * alpha1, 0.0)
        + hc1.entries() * C64::new(betas.0, 0.0)
        + hc2.entries() * C64::new(betas.1, 0.0);
    OperatorMatrix::new(h0.basis().clone(), m)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FloquetPoint {
    pub period: f64,
    /// `‖ i log(U_F)/T - H̃_CD ‖` in the operator norm.
    pub error: f64,
    /// Magnus coefficients of the synthesized sequence divided by `T`.
    pub targets: MagnusCoefficients,
    /// Coefficient of `-i[H1,H0]` in `i log(U_F)/T` by trace overlap.
    pub f01_extracted: f64,
    pub alpha_sign_flag: bool,
}

/// Compare the one-period Floquet Hamiltonian with the target for each `T`.
pub fn verify_floquet_match(
    lambda: f64,
    lambda_dot: f64,
    alpha1: f64,
    betas: (f64, f64),
    h0: &OperatorMatrix,
    h1: &OperatorMatrix,
    periods: &[f64],
) -> Result<Vec<FloquetPoint>> {
    let target = target_cd_hamiltonian(lambda, lambda_dot, alpha1, betas, h0, h1)?;
    let radius = linalg::spectral_norm_hermitian(target.entries());
    let c = first_commutator(h0, h1)?.scaled(-1.0);
    let w = InnerProductWeight::TraceInfiniteT;
    let cc = crate::operator::op_inner(&c, &c, &w)?;
    let mut out = Vec::with_capacity(periods.len());
    for &t in periods {
        if radius * t >= std::f64::consts::PI {
            return Err(Error::LogBranch { radius: radius * t });
        }
        let seq = pulse_strengths(lambda, lambda_dot, alpha1, betas.0, betas.1, t)?;
        let u = floquet_period_propagator(&seq, h0, h1)?;
        let hf = linalg::logm_unitary(u.entries())? * C64::new(0.0, 1.0 / t);
        let hf = OperatorMatrix::new(h0.basis().clone(), (&hf + hf.adjoint()) * C64::new(0.5, 0.0))?;
        let error = linalg::operator_norm(&(hf.entries() - target.entries()));
        let f01_extracted = if cc > 0.0 { crate::operator::op_inner(&hf, &c, &w)? / cc } else { 0.0 };
        out.push(FloquetPoint {
            period: t,
            error,
            targets: magnus_coefficients(&seq.eps).scaled(1.0 / t),
            f01_extracted,
            alpha_sign_flag: seq.alpha_sign_flag,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisMode, SpinBasis};
    use crate::models::{make_model, ModelKind, ModelSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair() -> (OperatorMatrix, OperatorMatrix) {
        let spec = ModelSpec {
            kind: ModelKind::ShortRangeIsing,
            n: 2,
            basis: Some(BasisMode::FullChain { n: 2, periodic: true }),
        };
        let p = make_model(&spec).unwrap();
        (p.h0, p.h1)
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, basis: &SpinBasis) -> OperatorMatrix {
        let d = basis.dimension();
        let m = CMatrix::from_fn(d, d, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        OperatorMatrix::new(basis.clone(), (&m + m.adjoint()) * C64::new(0.5, 0.0)).unwrap()
    }

    #[test]
    fn linear_coefficients() {
        let m = magnus_coefficients(&[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        assert_eq!((m.f0, m.f1), (3.0, 0.0));
        let m = magnus_coefficients(&[1.0; 6]);
        assert!((m.f01 - 1.5).abs() < 1e-15);
    }

    #[test]
    fn bilinear_term_closed_form() {
        let e = [0.3, -1.1, 0.7, 0.4, -0.2, 0.9];
        let m = magnus_coefficients(&e);
        let expected =
            e[1] * (e[0] - e[2] - e[4]) / 2.0 + e[3] * (e[0] + e[2] - e[4]) / 2.0 + e[5] * (e[0] + e[2] + e[4]) / 2.0;
        assert!((m.f01 - expected).abs() < 1e-14);
    }

    #[test]
    fn coefficients_match_matrix_log() {
        let basis = SpinBasis::full_chain(2, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let h0 = random_hermitian(&mut rng, &basis);
            let h1 = random_hermitian(&mut rng, &basis);
            let c = first_commutator(&h0, &h1).unwrap().scaled(-1.0);
            let (hc1, hc2) = commutator_controls(&h0, &h1).unwrap();
            let raw: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let residual = |s: f64| {
                let eps = raw.map(|e| e * s);
                let seq = PulseSequence { eps, period: 1.0, eta: eps, alpha_sign_flag: false };
                let u = floquet_period_propagator(&seq, &h0, &h1).unwrap();
                let z = linalg::logm_unitary(u.entries()).unwrap() * C64::new(0.0, 1.0);
                let m = magnus_coefficients(&eps);
                let approx = h0.entries() * C64::new(m.f0, 0.0)
                    + h1.entries() * C64::new(m.f1, 0.0)
                    + c.entries() * C64::new(m.f01, 0.0)
                    + hc1.entries() * C64::new(m.f010, 0.0)
                    + hc2.entries() * C64::new(m.f110, 0.0);
                (z - approx).norm()
            };
            // the first neglected terms are fourth order
            let ratio = residual(1e-2) / residual(5e-3);
            assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
        }
    }

    #[test]
    fn leading_order_strengths() {
        let s = pulse_strengths(0.3, 0.0, 0.0, 1.0, 1.0, 1e-12).unwrap();
        let expected = [-1.0, 1.0, 2.0, 1.0, -1.0, -2.0];
        for (e, x) in s.eta.iter().zip(expected) {
            assert!((e - x).abs() < 1e-7);
        }
        // T^{2/3} corrections at λ = 0: H1 pulses carry (1-λ)/3
        let s = pulse_strengths(0.0, 0.0, 0.0, 1.0, 1.0, 1.0).unwrap();
        assert!((s.eta[1] - 1.0 - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.eta[0] + 1.0).abs() < 1e-15);
        assert!(pulse_strengths(0.5, 1.0, 0.1, 0.0, 1.0, 1e-3).is_err());
        assert!(pulse_strengths(0.5, -1.0, 0.1, 1.0, 1.0, 1e-3).is_err());
        assert!(pulse_strengths(0.5, 1.0, -0.1, 1.0, 1.0, 1e-3).unwrap().alpha_sign_flag);
    }

    #[test]
    fn propagator_basics() {
        let (h0, h1) = pair();
        let zero = PulseSequence { eps: [0.0; 6], period: 1.0, eta: [0.0; 6], alpha_sign_flag: false };
        let u = floquet_period_propagator(&zero, &h0, &h1).unwrap();
        assert!((u.entries() - CMatrix::identity(4, 4)).norm() < 1e-15);
        let one = PulseSequence { eps: [0.4, 0.0, 0.0, 0.0, 0.0, 0.0], ..zero };
        let u = floquet_period_propagator(&one, &h0, &h1).unwrap();
        assert!((u.entries() - linalg::expm_hermitian(h0.entries(), 0.4)).norm() < 1e-14);
        let s = pulse_strengths(0.4, 1.2, 0.1, 0.5, 0.5, 1e-2).unwrap();
        let u = floquet_period_propagator(&s, &h0, &h1).unwrap();
        let uu = u.entries().adjoint() * u.entries();
        assert!((uu - CMatrix::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn synthesized_targets_converge() {
        let (lambda, lambda_dot, alpha, b1, b2) = (0.4, 2.4, 0.12, 0.5, 0.5);
        let mut last = [f64::INFINITY; 5];
        for t in [1e-3, 1e-4, 1e-5, 1e-6] {
            let s = pulse_strengths(lambda, lambda_dot, alpha, b1, b2, t).unwrap();
            let m = magnus_coefficients(&s.eps).scaled(1.0 / t);
            let err = [
                (m.f0 - lambda).abs(),
                (m.f1 - (1.0 - lambda)).abs(),
                (m.f01 - lambda_dot * alpha).abs(),
                (m.f010 - b1).abs(),
                (m.f110 - b2).abs(),
            ];
            for (e, l) in err.iter().zip(last) {
                assert!(*e < l || *e < 1e-9, "{err:?}");
            }
            last = err;
        }
        assert!(last[0] < 1e-9 && last[1] < 1e-9);
    }

    #[test]
    fn floquet_error_decreases() {
        let (h0, h1) = pair();
        let pts = verify_floquet_match(0.4, 2.4, 0.12, (0.5, 0.5), &h0, &h1, &[1e-2, 1e-3, 1e-4, 1e-5]).unwrap();
        for w in pts.windows(2) {
            assert!(w[1].error < w[0].error, "{:?}", pts.iter().map(|p| p.error).collect::<Vec<_>>());
        }
        // λ̇ = 0: no first-order term is requested
        let pts = verify_floquet_match(0.4, 0.0, 0.12, (0.5, 0.5), &h0, &h1, &[1e-3, 1e-6]).unwrap();
        assert!(pts[1].f01_extracted.abs() < pts[0].f01_extracted.abs() + 1e-12);
        assert!(verify_floquet_match(0.4, 0.0, 0.1, (0.5, 0.5), &h0, &h1, &[10.0]).is_err());
    }
}
