//! Time evolution along the (augmented) annealing path with counterdiabatic
//! driving, the fast (`τ → 0`) limit, ground states and fidelities.
//!
//! Both integrators are fixed-step RK4. The gauge potential is rebuilt at
//! every stage point from a Krylov construction at that `λ`; stage results
//! are memoized by `λ` since consecutive steps share endpoints.

use std::rc::Rc;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::agp::agp_kernel;
use crate::linalg::{self, Field};
use crate::models::{lambda_schedule, parity_resolved_ground_state, AnnealingProblem, ScheduleMode};
use crate::operator::{OperatorMatrix, Weighting};
use crate::state::StateVector;
use crate::{CVector, Error, Result, C64};

/// Largest tolerated `| ‖ψ‖ - 1 |` before an evolution is rejected.
pub const NORM_DRIFT_TOL: f64 = 1e-6;

/// Lowest eigenpair; the largest-magnitude amplitude is made real positive.
pub fn ground_state(h: &OperatorMatrix) -> Result<(f64, StateVector)> {
    let (vals, vecs) = h.eigh()?;
    let mut psi: CVector = vecs.column(0).into_owned();
    linalg::normalize(&mut psi);
    linalg::fix_phase(&mut psi);
    Ok((vals[0], StateVector::new(h.basis().clone(), psi)?))
}

/// `|<a|b>|²`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.overlap(b)?.norm_sqr())
}

/// States `ψ(λ_j)` from an earlier evolution, used as inner-product weights.
#[derive(Clone, Debug)]
pub struct StoredTrajectory {
    lambdas: Vec<f64>,
    states: Vec<StateVector>,
}

impl StoredTrajectory {
    pub fn new(lambdas: Vec<f64>, states: Vec<StateVector>) -> Result<Self> {
        if lambdas.len() != states.len() || lambdas.is_empty() {
            return Err(Error::InvalidEvolution("trajectory needs one state per lambda".into()));
        }
        if lambdas.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidEvolution("trajectory lambdas must be non-decreasing".into()));
        }
        for s in &states {
            s.ensure_normalized(crate::operator::WEIGHT_NORM_TOL)?;
        }
        Ok(StoredTrajectory { lambdas, states })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    /// Stored state at the grid `λ` closest to `lambda`.
    pub fn nearest(&self, lambda: f64) -> &StateVector {
        let i = self.lambdas.partition_point(|&l| l < lambda);
        let pick = if i == 0 {
            0
        } else if i == self.lambdas.len() {
            i - 1
        } else if (self.lambdas[i] - lambda).abs() < (lambda - self.lambdas[i - 1]).abs() {
            i
        } else {
            i - 1
        };
        &self.states[pick]
    }
}

#[derive(Clone, Debug)]
pub enum WeightPolicy {
    InfiniteT,
    TrueGroundState,
    ProvidedTrajectory(Arc<StoredTrajectory>),
}

impl WeightPolicy {
    pub fn label(&self) -> &'static str {
        match self {
            WeightPolicy::InfiniteT => "infinite_t",
            WeightPolicy::TrueGroundState => "ground_state",
            WeightPolicy::ProvidedTrajectory(_) => "trajectory",
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionConfig {
    pub problem: AnnealingProblem,
    pub ell: usize,
    pub steps: usize,
    pub weight: WeightPolicy,
    pub include_agp: bool,
    /// Use the exact spectral gauge potential instead of the Krylov one.
    pub exact_agp: bool,
    /// Record the action and the instantaneous ground-state overlap at
    /// every grid point.
    pub diagnostics: bool,
    /// Keep `ψ` at every grid point (needed by the iterative protocol).
    pub store_states: bool,
}

impl EvolutionConfig {
    pub fn new(problem: AnnealingProblem, ell: usize, steps: usize) -> Self {
        EvolutionConfig {
            problem,
            ell,
            steps,
            weight: WeightPolicy::InfiniteT,
            include_agp: ell > 0,
            exact_agp: false,
            diagnostics: false,
            store_states: false,
        }
    }

    pub fn with_weight(mut self, weight: WeightPolicy) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_diagnostics(mut self, on: bool) -> Self {
        self.diagnostics = on;
        self
    }

    pub fn with_exact_agp(mut self) -> Self {
        self.exact_agp = true;
        self.include_agp = true;
        self
    }

    pub fn storing_states(mut self) -> Self {
        self.store_states = true;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryPoint {
    /// Time for finite-time runs; equals `λ` in the fast limit.
    pub t: f64,
    pub lambda: f64,
    /// Action of the gauge potential in use at this point (diagnostics only).
    pub action: Option<f64>,
    /// `|<gs(λ)|ψ>|²` for the augmented Hamiltonian (diagnostics only).
    pub gs_overlap: Option<f64>,
    pub norm: f64,
}

#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub final_state: StateVector,
    pub fidelity: f64,
    pub trajectory: Vec<TrajectoryPoint>,
    /// `ψ` at every grid point when requested.
    pub states: Option<StoredTrajectory>,
    pub max_norm_drift: f64,
    /// Number of distinct gauge-potential constructions.
    pub agp_builds: usize,
}

/// Dispatch on the problem's schedule mode.
pub fn evolve(cfg: &EvolutionConfig) -> Result<EvolutionResult> {
    match cfg.problem.schedule.mode {
        ScheduleMode::FiniteTime => evolve_cd(cfg),
        ScheduleMode::FastLimit => evolve_fast_limit(cfg),
    }
}

/// `i dψ/dt = (H̃(λ) + λ̇ A_λ) ψ` over `t ∈ [0, τ]`.
pub fn evolve_cd(cfg: &EvolutionConfig) -> Result<EvolutionResult> {
    if cfg.problem.schedule.mode != ScheduleMode::FiniteTime {
        return Err(Error::InvalidEvolution("evolve_cd needs a finite-time schedule".into()));
    }
    if !(cfg.problem.schedule.tau > 0.0) {
        return Err(Error::OutOfRange { name: "tau", value: cfg.problem.schedule.tau, range: "(0, inf)" });
    }
    run(cfg, true)
}

/// `dψ/dλ = -i A_λ ψ` over `λ ∈ [0, 1]`.
pub fn evolve_fast_limit(cfg: &EvolutionConfig) -> Result<EvolutionResult> {
    if cfg.problem.schedule.mode != ScheduleMode::FastLimit {
        return Err(Error::InvalidEvolution("evolve_fast_limit needs a fast-limit schedule".into()));
    }
    run(cfg, false)
}

fn run(cfg: &EvolutionConfig, finite: bool) -> Result<EvolutionResult> {
    if cfg.steps < 2 {
        return Err(Error::InvalidEvolution(format!("steps = {} (need at least 2)", cfg.steps)));
    }
    if let WeightPolicy::ProvidedTrajectory(tr) = &cfg.weight {
        if let Some(s) = tr.states().first() {
            cfg.problem.basis().ensure_same(s.basis())?;
        }
    }
    let p = &cfg.problem;
    let real = p.h0.is_real() && p.h1.is_real() && p.controls.iter().all(|c| c.operator.is_real());
    if real {
        Engine::<f64>::new(cfg).run(finite)
    } else {
        Engine::<C64>::new(cfg).run(finite)
    }
}

struct Stage<T: Field> {
    h: DMatrix<T>,
    k: DMatrix<T>,
    weight: Option<CVector>,
}

struct Engine<'a, T: Field> {
    cfg: &'a EvolutionConfig,
    h0: DMatrix<T>,
    h1: DMatrix<T>,
    hc: Vec<DMatrix<T>>,
    cache: Vec<(f64, Rc<Stage<T>>)>,
    builds: usize,
}

const CACHE_SLOTS: usize = 3;

impl<'a, T: Field> Engine<'a, T> {
    fn new(cfg: &'a EvolutionConfig) -> Self {
        let p = &cfg.problem;
        Engine {
            cfg,
            h0: linalg::to_field(p.h0.entries()),
            h1: linalg::to_field(p.h1.entries()),
            hc: p.controls.iter().map(|c| linalg::to_field(c.operator.entries())).collect(),
            cache: Vec::with_capacity(CACHE_SLOTS),
            builds: 0,
        }
    }

    fn agp_active(&self) -> bool {
        self.cfg.include_agp && (self.cfg.ell > 0 || self.cfg.exact_agp)
    }

    fn combine(&self, c: &(f64, f64, Vec<f64>)) -> DMatrix<T> {
        let mut m = &self.h0 * T::from_real(c.0) + &self.h1 * T::from_real(c.1);
        for (op, &f) in self.hc.iter().zip(&c.2) {
            if f != 0.0 {
                m += op * T::from_real(f);
            }
        }
        m
    }

    fn ground_vector(&self, h: &DMatrix<T>) -> Result<CVector> {
        let basis = self.cfg.problem.basis();
        if basis.flip_permutation().is_some() {
            let op = OperatorMatrix::new(basis.clone(), linalg::to_complex(h))?;
            return Ok(parity_resolved_ground_state(&op)?.1.into_amplitudes());
        }
        let (_, vecs) = linalg::eigh(h);
        let mut v: CVector = vecs.column(0).map(T::to_c64);
        linalg::normalize(&mut v);
        Ok(v)
    }

    fn stage(&mut self, lambda: f64) -> Result<Rc<Stage<T>>> {
        if let Some((_, s)) = self.cache.iter().find(|(l, _)| (l - lambda).abs() <= 1e-14) {
            return Ok(s.clone());
        }
        let p = &self.cfg.problem;
        let h = self.combine(&p.coefficients(lambda));
        let d = h.nrows();
        let weight = match &self.cfg.weight {
            WeightPolicy::InfiniteT => None,
            WeightPolicy::TrueGroundState => Some(self.ground_vector(&h)?),
            WeightPolicy::ProvidedTrajectory(tr) => Some(tr.nearest(lambda).amplitudes().clone()),
        };
        let k = if !self.agp_active() {
            DMatrix::zeros(d, d)
        } else {
            let dh = self.combine(&p.derivative_coefficients(lambda));
            self.builds += 1;
            if self.cfg.exact_agp {
                let basis = p.basis();
                let hop = OperatorMatrix::new(basis.clone(), linalg::to_complex(&h))?;
                let dop = OperatorMatrix::new(basis.clone(), linalg::to_complex(&dh))?;
                let a = crate::agp::exact_agp(&hop, &dop)?;
                // K = -i A
                a.entries().map(|z| T::from_c64(z * C64::new(0.0, -1.0)))
            } else {
                let w = match &weight {
                    None => Weighting::Trace,
                    Some(v) => Weighting::State(v),
                };
                agp_kernel(&h, &dh, self.cfg.ell, w)?.0
            }
        };
        let stage = Rc::new(Stage { h, k, weight });
        if self.cache.len() == CACHE_SLOTS {
            self.cache.remove(0);
        }
        self.cache.push((lambda, stage.clone()));
        Ok(stage)
    }

    /// Right-hand side at parameter `x` (time or `λ`).
    fn rhs(&mut self, finite: bool, x: f64, psi: &CVector) -> Result<CVector> {
        if finite {
            let (lambda, lambda_dot) =
                lambda_schedule(x.min(self.cfg.problem.schedule.tau), self.cfg.problem.schedule.tau)?;
            let s = self.stage(lambda)?;
            let mut out = T::apply(&s.h, psi) * C64::new(0.0, -1.0);
            if self.agp_active() && lambda_dot != 0.0 {
                out += T::apply(&s.k, psi) * C64::new(lambda_dot, 0.0);
            }
            Ok(out)
        } else {
            if !self.agp_active() {
                return Ok(CVector::zeros(psi.len()));
            }
            let s = self.stage(x)?;
            Ok(T::apply(&s.k, psi))
        }
    }

    fn lambda_at(&self, finite: bool, x: f64) -> Result<f64> {
        if finite {
            Ok(lambda_schedule(x, self.cfg.problem.schedule.tau)?.0)
        } else {
            Ok(x)
        }
    }

    fn point(&mut self, finite: bool, x: f64, psi: &CVector) -> Result<TrajectoryPoint> {
        let lambda = self.lambda_at(finite, x)?;
        let norm = psi.norm();
        if !self.cfg.diagnostics {
            return Ok(TrajectoryPoint { t: x, lambda, action: None, gs_overlap: None, norm });
        }
        let s = self.stage(lambda)?;
        let p = &self.cfg.problem;
        let dh = self.combine(&p.derivative_coefficients(lambda));
        // G = dH + i[A, H] = dH + [H, K]
        let g = &dh + linalg::commutator(&s.h, &s.k);
        let w = match &s.weight {
            None => Weighting::Trace,
            Some(v) => Weighting::State(v),
        };
        let action = w.inner(&g, &g);
        let gs = match &s.weight {
            Some(v) if matches!(self.cfg.weight, WeightPolicy::TrueGroundState) => v.clone(),
            _ => self.ground_vector(&s.h)?,
        };
        let overlap = linalg::cdot(&gs, psi).norm_sqr();
        Ok(TrajectoryPoint { t: x, lambda, action: Some(action), gs_overlap: Some(overlap), norm })
    }

    fn run(mut self, finite: bool) -> Result<EvolutionResult> {
        let cfg = self.cfg;
        let p = &cfg.problem;
        let n = cfg.steps;
        let span = if finite { p.schedule.tau } else { 1.0 };
        let grid = |j: usize| if j == n { span } else { span * j as f64 / n as f64 };
        let mut psi = p.initial.amplitudes().clone();
        let mut trajectory = Vec::with_capacity(n + 1);
        let mut states = cfg.store_states.then(|| Vec::with_capacity(n + 1));
        let mut lambdas = Vec::with_capacity(if cfg.store_states { n + 1 } else { 0 });
        let mut max_drift = 0.0_f64;
        let basis = p.basis().clone();

        for j in 0..=n {
            let x = grid(j);
            let pt = self.point(finite, x, &psi)?;
            if let Some(st) = states.as_mut() {
                lambdas.push(pt.lambda);
                st.push(StateVector::normalized(basis.clone(), psi.clone())?);
            }
            trajectory.push(pt);
            if j == n {
                break;
            }
            let x1 = grid(j + 1);
            let h = x1 - x;
            let xm = 0.5 * (x + x1);
            let hc = C64::new(h, 0.0);
            let half = C64::new(0.5 * h, 0.0);
            let k1 = self.rhs(finite, x, &psi)?;
            let k2 = self.rhs(finite, xm, &(&psi + &k1 * half))?;
            let k3 = self.rhs(finite, xm, &(&psi + &k2 * half))?;
            let k4 = self.rhs(finite, x1, &(&psi + &k3 * hc))?;
            psi += (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0);
            let drift = (psi.norm() - 1.0).abs();
            max_drift = max_drift.max(drift);
            if drift > NORM_DRIFT_TOL || !drift.is_finite() {
                return Err(Error::NormDrift { step: j + 1, drift });
            }
        }
        let final_state = StateVector::normalized(basis, psi)?;
        let fid = fidelity(&p.target, &final_state)?;
        let states = match states {
            Some(st) => Some(StoredTrajectory::new(lambdas, st)?),
            None => None,
        };
        Ok(EvolutionResult {
            final_state,
            fidelity: fid,
            trajectory,
            states,
            max_norm_drift: max_drift,
            agp_builds: self.builds,
        })
    }
}
