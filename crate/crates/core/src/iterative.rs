//! Iterated approximate-ground-state weighting: evolve once with the
//! infinite-temperature action, then reuse the evolved trajectory `ψ(λ)` as
//! the inner-product weight of the next evolution, until the fidelity
//! settles.

use std::sync::Arc;

use serde::Serialize;

use crate::dynamics::{evolve, EvolutionConfig, StoredTrajectory, WeightPolicy};
use crate::{Error, Result};

pub const DEFAULT_CONV_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 20;

#[derive(Clone, Debug)]
pub struct IterationRecord {
    pub iteration: usize,
    pub fidelity: f64,
    /// Largest change of the per-step action against the previous iteration.
    pub max_action_change: Option<f64>,
    pub trajectory: Arc<StoredTrajectory>,
    pub actions: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationSummary {
    pub iteration: usize,
    pub fidelity: f64,
    pub max_action_change: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct IterativeOutcome {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

impl IterativeOutcome {
    pub fn final_fidelity(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.fidelity)
    }

    pub fn summary(&self) -> Vec<IterationSummary> {
        self.records
            .iter()
            .map(|r| IterationSummary {
                iteration: r.iteration,
                fidelity: r.fidelity,
                max_action_change: r.max_action_change,
            })
            .collect()
    }
}

/// Run at most `max_iters` evolutions; iteration 0 uses the trace weight.
/// Stops once consecutive fidelities differ by less than `conv_tol`.
pub fn iterative_gs_protocol(template: &EvolutionConfig, max_iters: usize, conv_tol: f64) -> Result<IterativeOutcome> {
    if max_iters == 0 {
        return Err(Error::InvalidEvolution("max_iters must be at least 1".into()));
    }
    if !(conv_tol > 0.0) {
        return Err(Error::OutOfRange { name: "conv_tol", value: conv_tol, range: "(0, inf)" });
    }
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut weight = WeightPolicy::InfiniteT;
    let mut converged = false;
    for iteration in 0..max_iters {
        let mut cfg = template.clone().with_weight(weight).with_diagnostics(true).storing_states();
        cfg.diagnostics = true;
        let result = evolve(&cfg)?;
        let actions: Vec<f64> = result.trajectory.iter().map(|p| p.action.unwrap_or(f64::NAN)).collect();
        let trajectory = Arc::new(result.states.expect("states were requested"));
        let max_action_change = records
            .last()
            .map(|prev| prev.actions.iter().zip(&actions).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        let done = records.last().is_some_and(|prev| (prev.fidelity - result.fidelity).abs() < conv_tol);
        records.push(IterationRecord {
            iteration,
            fidelity: result.fidelity,
            max_action_change,
            trajectory: trajectory.clone(),
            actions,
        });
        if done {
            converged = true;
            break;
        }
        weight = WeightPolicy::ProvidedTrajectory(trajectory);
    }
    Ok(IterativeOutcome { records, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::evolve_fast_limit;
    use crate::models::{make_model, ModelKind, ModelSpec};

    #[test]
    fn single_iteration_is_the_trace_protocol() {
        let p = make_model(&ModelSpec::new(ModelKind::LongRangeIsing { alpha: 2.0 }, 6)).unwrap();
        let cfg = EvolutionConfig::new(p, 1, 200);
        let out = iterative_gs_protocol(&cfg, 1, 1e-6).unwrap();
        assert_eq!(out.records.len(), 1);
        let direct = evolve_fast_limit(&cfg).unwrap();
        assert_eq!(out.records[0].fidelity, direct.fidelity);
        assert!(!out.converged);
    }

    #[test]
    fn exact_regime_is_a_fixed_point() {
        let p = make_model(&ModelSpec::new(ModelKind::ShortRangeIsing, 4)).unwrap();
        let cfg = EvolutionConfig::new(p, 6, 400);
        let out = iterative_gs_protocol(&cfg, 3, 1e-6).unwrap();
        assert!((out.records[0].fidelity - 1.0).abs() < 1e-6);
        assert!((out.records[1].fidelity - out.records[0].fidelity).abs() < 1e-6);
        assert!(out.converged);
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = make_model(&ModelSpec::new(ModelKind::ShortRangeIsing, 4)).unwrap();
        let cfg = EvolutionConfig::new(p, 1, 100);
        assert!(iterative_gs_protocol(&cfg, 0, 1e-6).is_err());
        assert!(iterative_gs_protocol(&cfg, 2, 0.0).is_err());
    }
}
