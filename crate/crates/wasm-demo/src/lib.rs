//! Browser bindings for three small interactive computations.
//!
//! Every export returns a JSON string. Failures come back as
//! `{"error": "..."}` so the page never has to catch exceptions, and the
//! same functions run unchanged in native tests.

use cdpath::{
    annealing_hamiltonian, evolve, first_order_alpha, hamiltonian_derivative, make_model, pulse_strengths,
    schedule_point, variational_agp, verify_floquet_match, BasisMode, EvolutionConfig, InnerProductWeight, ModelKind,
    ModelSpec,
};
use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

/// Largest chain the page is allowed to request.
const MAX_SITES: usize = 10;

fn model_kind(name: &str) -> Result<ModelKind, String> {
    match name {
        "short_range_ising" => Ok(ModelKind::ShortRangeIsing),
        "ltfim" => Ok(ModelKind::Ltfim { h_x: 0.7, h_z: 0.01 }),
        "long_range_ising" => Ok(ModelKind::LongRangeIsing { alpha: 2.0 }),
        "collective_spin" => Ok(ModelKind::CollectiveSpin),
        other => Err(format!("unknown model `{other}`")),
    }
}

fn check_size(kind: ModelKind, n: usize) -> Result<(), String> {
    let cap = if kind == ModelKind::CollectiveSpin { 200 } else { MAX_SITES };
    if n < 2 || n > cap {
        return Err(format!("n must lie in [2, {cap}], got {n}"));
    }
    Ok(())
}

fn respond<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e),
    }
}

fn error_json(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

#[derive(Serialize)]
struct Anneal {
    fidelity: f64,
    lambda: Vec<f64>,
    gs_overlap: Vec<f64>,
}

fn anneal_inner(model: &str, n: usize, ell: usize, steps: usize) -> Result<Anneal, String> {
    let kind = model_kind(model)?;
    check_size(kind, n)?;
    if !(2..=4000).contains(&steps) {
        return Err(format!("steps must lie in [2, 4000], got {steps}"));
    }
    let p = make_model(&ModelSpec::new(kind, n)).map_err(|e| e.to_string())?;
    let r = evolve(&EvolutionConfig::new(p, ell, steps).with_diagnostics(true)).map_err(|e| e.to_string())?;
    let stride = (r.trajectory.len() / 100).max(1);
    let pts: Vec<_> = r.trajectory.iter().step_by(stride).collect();
    Ok(Anneal {
        fidelity: r.fidelity,
        lambda: pts.iter().map(|p| p.lambda).collect(),
        gs_overlap: pts.iter().map(|p| p.gs_overlap.unwrap_or(f64::NAN)).collect(),
    })
}

/// Fast-limit evolution with the order-`ell` gauge potential.
#[wasm_bindgen]
pub fn anneal(model: &str, n: usize, ell: usize, steps: usize) -> String {
    respond(anneal_inner(model, n, ell, steps))
}

#[derive(Serialize)]
struct Actions {
    ell: Vec<usize>,
    action: Vec<f64>,
}

fn agp_actions_inner(model: &str, n: usize, lambda: f64, max_ell: usize) -> Result<Actions, String> {
    let kind = model_kind(model)?;
    check_size(kind, n)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(format!("lambda must lie in [0, 1], got {lambda}"));
    }
    if !(1..=12).contains(&max_ell) {
        return Err(format!("max_ell must lie in [1, 12], got {max_ell}"));
    }
    let p = make_model(&ModelSpec::new(kind, n)).map_err(|e| e.to_string())?;
    let h = annealing_hamiltonian(lambda, &p).map_err(|e| e.to_string())?;
    let dh = hamiltonian_derivative(lambda, &p).map_err(|e| e.to_string())?;
    let w = InnerProductWeight::TraceInfiniteT;
    let mut out = Actions { ell: Vec::new(), action: Vec::new() };
    for ell in 1..=max_ell {
        let sol = variational_agp(&h, &dh, ell, &w).map_err(|e| e.to_string())?;
        out.ell.push(ell);
        out.action.push(sol.action_value);
    }
    Ok(out)
}

/// Variational action against the Krylov order at fixed `lambda`.
#[wasm_bindgen]
pub fn agp_actions(model: &str, n: usize, lambda: f64, max_ell: usize) -> String {
    respond(agp_actions_inner(model, n, lambda, max_ell))
}

#[derive(Serialize)]
struct Floquet {
    lambda_dot: f64,
    alpha1: f64,
    period: Vec<f64>,
    error: Vec<f64>,
    eta: Vec<[f64; 6]>,
}

fn floquet_inner(lambda: f64, beta1: f64, beta2: f64) -> Result<Floquet, String> {
    if !(0.0 < lambda && lambda < 1.0) {
        return Err(format!("lambda must lie in (0, 1), got {lambda}"));
    }
    let spec = ModelSpec {
        basis: Some(BasisMode::FullChain { n: 2, periodic: false }),
        ..ModelSpec::new(ModelKind::ShortRangeIsing, 2)
    };
    let p = make_model(&spec).map_err(|e| e.to_string())?;
    let (_, lambda_dot) = schedule_point(lambda, 1.0).map_err(|e| e.to_string())?;
    let h = annealing_hamiltonian(lambda, &p).map_err(|e| e.to_string())?;
    let dh = hamiltonian_derivative(lambda, &p).map_err(|e| e.to_string())?;
    let agp = variational_agp(&h, &dh, 1, &InnerProductWeight::TraceInfiniteT).map_err(|e| e.to_string())?;
    let alpha1 = first_order_alpha(&agp.matrix, &p.h0, &p.h1).map_err(|e| e.to_string())?;
    let periods = [1e-2, 1e-3, 1e-4, 1e-5];
    let pts = verify_floquet_match(lambda, lambda_dot, alpha1, (beta1, beta2), &p.h0, &p.h1, &periods)
        .map_err(|e| e.to_string())?;
    let eta = periods
        .iter()
        .map(|&t| pulse_strengths(lambda, lambda_dot, alpha1, beta1, beta2, t).map(|s| s.eta))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    Ok(Floquet { lambda_dot, alpha1, period: periods.to_vec(), error: pts.iter().map(|p| p.error).collect(), eta })
}

/// Six-pulse Floquet error for the two-site chain over four periods.
#[wasm_bindgen]
pub fn floquet_errors(lambda: f64, beta1: f64, beta2: f64) -> String {
    respond(floquet_inner(lambda, beta1, beta2))
}
