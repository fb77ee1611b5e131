//! Subcommand drivers. Each computes a list of independent cells on the
//! worker pool and returns the tables in cell order.

use std::time::Instant;

use rayon::prelude::*;

use cdpath::optimize::fidelity_refined;
use cdpath::{
    annealing_hamiltonian, augmented_hamiltonian, beta_scan, evolve, exact_agp, first_order_alpha, fit_curve,
    hamiltonian_derivative, iterative_gs_protocol, make_model, optimize_controls, schedule_point, variational_agp,
    verify_floquet_match, AnnealingProblem, EvolutionConfig, InnerProductWeight, OptimizationSpec, PowellOptions,
    ScanGrid, Schedule, WeightPolicy,
};

use crate::config::{Config, WeightName};
use crate::output::{fmt_fidelity, fmt_list, fmt_opt, fmt_real, log_infidelity, ManifestRow, Table};
use crate::CliError;

pub struct Context<'a> {
    pub cfg: &'a Config,
    pub seed: u64,
    pub hash: String,
    pub pool: rayon::ThreadPool,
    pub lambda: Option<f64>,
}

#[derive(Clone, Copy, Debug)]
struct Cell {
    n: usize,
    ell: usize,
    tau: Option<f64>,
}

struct CellOut {
    rows: Vec<Vec<Vec<String>>>,
    manifest: ManifestRow,
}

pub type Output = (Vec<Table>, Vec<ManifestRow>);

fn cells(cfg: &Config) -> Vec<Cell> {
    let mut out = Vec::new();
    for n in cfg.sizes() {
        for ell in cfg.orders() {
            for tau in cfg.durations() {
                out.push(Cell { n, ell, tau });
            }
        }
    }
    out
}

fn problem(cfg: &Config, n: usize, tau: Option<f64>) -> cdpath::Result<AnnealingProblem> {
    let mut p = make_model(&cfg.model_spec(n))?.with_controls(&cfg.control_set(), cfg.controls.harmonics)?;
    if let Some(t) = tau {
        p = p.with_schedule(Schedule::finite_time(t)?);
    }
    if !cfg.controls.betas.is_empty() {
        let all: Vec<(usize, usize)> =
            (0..cfg.control_count()).flat_map(|c| (0..cfg.controls.harmonics).map(move |k| (c, k))).collect();
        p.set_parameters(&all, &cfg.controls.betas)?;
    }
    Ok(p)
}

fn evolution(cfg: &Config, p: AnnealingProblem, ell: usize) -> EvolutionConfig {
    let mut e = EvolutionConfig::new(p, ell, cfg.protocol.steps).with_diagnostics(cfg.protocol.diagnostics);
    if cfg.protocol.weight == WeightName::GroundState {
        e = e.with_weight(WeightPolicy::TrueGroundState);
    }
    if cfg.protocol.exact_agp {
        e = e.with_exact_agp();
    }
    e
}

fn free(cfg: &Config) -> Vec<(usize, usize)> {
    cfg.free_parameters().into_iter().map(|[a, b]| (a, b)).collect()
}

fn optimization(ctx: &Context, template: EvolutionConfig) -> OptimizationSpec {
    let o = &ctx.cfg.optimizer;
    let mut spec = OptimizationSpec::new(template, free(ctx.cfg));
    spec.bound = o.bound;
    spec.restarts = o.restarts;
    spec.options = PowellOptions { ftol: o.ftol, xtol: o.xtol, max_evals: o.max_evals, max_iters: o.max_iters };
    spec.random_starts = o.random_starts;
    spec.seed = ctx.seed;
    spec.step_doublings = o.step_doublings;
    spec
}

fn id(prefix: &str, i: usize) -> String {
    format!("{prefix}-{i:04}")
}

/// Run `f` on every cell in the pool and stitch the outputs in cell order.
fn drive<F>(ctx: &Context, prefix: &str, mut tables: Vec<Table>, cells: Vec<Cell>, f: F) -> Result<Output, CliError>
where
    F: Fn(&str, Cell) -> Result<Vec<Vec<Vec<String>>>, CliError> + Sync,
{
    let files: Vec<&'static str> = tables.iter().map(|t| t.file).collect();
    let outs: Vec<CellOut> = ctx.pool.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(i, &cell)| {
                let run_id = id(prefix, i);
                let start = Instant::now();
                let rows = f(&run_id, cell)?;
                Ok(CellOut {
                    rows,
                    manifest: ManifestRow {
                        run_id,
                        config_hash: ctx.hash.clone(),
                        n: cell.n,
                        ell: Some(cell.ell),
                        tau: cell.tau,
                        files: files.clone(),
                        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
                    },
                })
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let mut manifest = Vec::with_capacity(outs.len());
    for out in outs {
        for (t, rows) in tables.iter_mut().zip(out.rows) {
            for r in rows {
                t.push(r);
            }
        }
        manifest.push(out.manifest);
    }
    Ok((tables, manifest))
}

fn head(run_id: &str, c: Cell) -> Vec<String> {
    vec![run_id.to_string(), c.n.to_string(), c.ell.to_string(), fmt_opt(c.tau)]
}

pub fn run(ctx: &Context) -> Result<Output, CliError> {
    let tables = vec![
        Table::new(
            "run.csv",
            &["run_id", "n", "ell", "tau", "fidelity", "log10_infidelity", "max_norm_drift", "agp_builds"],
        ),
        Table::new("trajectory.csv", &["run_id", "t", "lambda", "action", "gs_overlap", "norm"]),
    ];
    drive(ctx, "run", tables, cells(ctx.cfg), |run_id, c| {
        let r = evolve(&evolution(ctx.cfg, problem(ctx.cfg, c.n, c.tau)?, c.ell))?;
        let mut row = head(run_id, c);
        row.extend([
            fmt_fidelity(r.fidelity),
            fmt_real(log_infidelity(r.fidelity)),
            fmt_real(r.max_norm_drift),
            r.agp_builds.to_string(),
        ]);
        let traj = if ctx.cfg.protocol.diagnostics {
            r.trajectory
                .iter()
                .map(|p| {
                    vec![
                        run_id.to_string(),
                        fmt_real(p.t),
                        fmt_real(p.lambda),
                        fmt_opt(p.action),
                        fmt_opt(p.gs_overlap),
                        fmt_real(p.norm),
                    ]
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(vec![vec![row], traj])
    })
}

fn require_controls(cfg: &Config, what: &str) -> Result<(), CliError> {
    if cfg.control_count() == 0 {
        return Err(CliError::Config(format!(
            "{what} needs controls: set controls.set to \"named\" or \"commutator\""
        )));
    }
    Ok(())
}

pub fn optimize(ctx: &Context) -> Result<Output, CliError> {
    require_controls(ctx.cfg, "optimize")?;
    let tables = vec![
        Table::new(
            "optimize.csv",
            &["run_id", "n", "ell", "tau", "baseline_fidelity", "best_fidelity", "best_betas", "evaluations"],
        ),
        Table::new("restarts.csv", &["run_id", "restart", "start", "betas", "fidelity", "evaluations"]),
    ];
    drive(ctx, "optimize", tables, cells(ctx.cfg), |run_id, c| {
        let template = evolution(ctx.cfg, problem(ctx.cfg, c.n, c.tau)?, c.ell);
        let r = optimize_controls(&optimization(ctx, template))?;
        let mut row = head(run_id, c);
        row.extend([
            fmt_fidelity(r.baseline_fidelity),
            fmt_fidelity(r.best_fidelity),
            fmt_list(&r.best_betas),
            r.evaluations.to_string(),
        ]);
        let restarts = r
            .restarts
            .iter()
            .enumerate()
            .map(|(i, s)| {
                vec![
                    run_id.to_string(),
                    i.to_string(),
                    fmt_list(&s.start),
                    fmt_list(&s.betas),
                    fmt_fidelity(s.fidelity),
                    s.evaluations.to_string(),
                ]
            })
            .collect();
        Ok(vec![vec![row], restarts])
    })
}

pub fn scan(ctx: &Context) -> Result<Output, CliError> {
    let cfg = ctx.cfg;
    let pair = cfg.scan.pair;
    for [n, k] in pair {
        if n >= cfg.control_count() || k >= cfg.controls.harmonics {
            return Err(CliError::Config(format!("scan.pair: [{n}, {k}] does not name a control amplitude")));
        }
    }
    let grid = ScanGrid { min: cfg.scan.min, max: cfg.scan.max, points: cfg.scan.points };
    let tables = vec![Table::new("scan.csv", &["run_id", "n", "ell", "tau", "beta_a", "beta_b", "fidelity"])];
    drive(ctx, "scan", tables, cells(cfg), |run_id, c| {
        let template = evolution(cfg, problem(cfg, c.n, c.tau)?, c.ell);
        let s = beta_scan(
            &template,
            [(pair[0][0], pair[0][1]), (pair[1][0], pair[1][1])],
            grid,
            cfg.optimizer.step_doublings,
        )?;
        let mut rows = Vec::new();
        for (i, a) in s.axis.iter().enumerate() {
            for (j, b) in s.axis.iter().enumerate() {
                let mut row = head(run_id, c);
                row.extend([fmt_real(*a), fmt_real(*b), fmt_fidelity(s.fidelity[i][j])]);
                rows.push(row);
            }
        }
        Ok(vec![rows])
    })
}

pub fn iterate(ctx: &Context) -> Result<Output, CliError> {
    let cfg = ctx.cfg;
    let tables = vec![Table::new(
        "iterate.csv",
        &["run_id", "n", "ell", "tau", "iteration", "fidelity", "max_action_change", "converged"],
    )];
    drive(ctx, "iterate", tables, cells(cfg), |run_id, c| {
        let template = evolution(cfg, problem(cfg, c.n, c.tau)?, c.ell).with_diagnostics(false);
        let out = iterative_gs_protocol(&template, cfg.iterate.max_iters, cfg.iterate.conv_tol)?;
        let rows = out
            .records
            .iter()
            .map(|r| {
                let mut row = head(run_id, c);
                row.extend([
                    r.iteration.to_string(),
                    fmt_fidelity(r.fidelity),
                    fmt_opt(r.max_action_change),
                    out.converged.to_string(),
                ]);
                row
            })
            .collect();
        Ok(vec![rows])
    })
}

pub fn floquet_check(ctx: &Context) -> Result<Output, CliError> {
    let cfg = ctx.cfg;
    let f = &cfg.floquet;
    let lambda = ctx.lambda.unwrap_or(f.lambda);
    let mut table = Table::new(
        "floquet.csv",
        &[
            "run_id",
            "n",
            "lambda",
            "lambda_dot",
            "alpha1",
            "period",
            "error",
            "f0",
            "f1",
            "f01",
            "f010",
            "f110",
            "f01_extracted",
            "alpha_sign_flag",
        ],
    );
    let mut manifest = Vec::new();
    for (i, n) in cfg.sizes().into_iter().enumerate() {
        let start = Instant::now();
        let run_id = id("floquet", i);
        let p = make_model(&cfg.model_spec(n))?;
        let lambda_dot = match f.lambda_dot {
            Some(v) => v,
            None => schedule_point(lambda, f.tau)?.1,
        };
        let alpha1 = match f.alpha1 {
            Some(a) => a,
            None => {
                let h = annealing_hamiltonian(lambda, &p)?;
                let dh = hamiltonian_derivative(lambda, &p)?;
                let agp = variational_agp(&h, &dh, 1, &InnerProductWeight::TraceInfiniteT)?;
                first_order_alpha(&agp.matrix, &p.h0, &p.h1)?
            }
        };
        let points = verify_floquet_match(lambda, lambda_dot, alpha1, (f.beta1, f.beta2), &p.h0, &p.h1, &f.periods)?;
        for pt in points {
            let m = pt.targets;
            table.push(vec![
                run_id.clone(),
                n.to_string(),
                fmt_real(lambda),
                fmt_real(lambda_dot),
                fmt_real(alpha1),
                fmt_real(pt.period),
                fmt_real(pt.error),
                fmt_real(m.f0),
                fmt_real(m.f1),
                fmt_real(m.f01),
                fmt_real(m.f010),
                fmt_real(m.f110),
                fmt_real(pt.f01_extracted),
                pt.alpha_sign_flag.to_string(),
            ]);
        }
        manifest.push(ManifestRow {
            run_id,
            config_hash: ctx.hash.clone(),
            n,
            ell: None,
            tau: Some(f.tau),
            files: vec!["floquet.csv"],
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok((vec![table], manifest))
}

pub fn spectrum(ctx: &Context) -> Result<Output, CliError> {
    let cfg = ctx.cfg;
    let lambdas = match ctx.lambda {
        Some(l) => vec![l],
        None => cfg.spectrum.lambda.to_vec(),
    };
    let mut tables = vec![
        Table::new("spectrum.csv", &["run_id", "n", "ell", "lambda", "level", "omega", "weight", "ratio", "flagged"]),
        Table::new("curve.csv", &["run_id", "n", "ell", "lambda", "omega", "omega_f"]),
    ];
    let mut manifest = Vec::new();
    let mut i = 0;
    for n in cfg.sizes() {
        let p = problem(cfg, n, None)?;
        for &lambda in &lambdas {
            let h = augmented_hamiltonian(lambda, &p)?;
            let dh = hamiltonian_derivative(lambda, &p)?;
            let exact = exact_agp(&h, &dh)?;
            for ell in cfg.orders() {
                let start = Instant::now();
                let run_id = id("spectrum", i);
                i += 1;
                let sol = variational_agp(&h, &dh, ell, &InnerProductWeight::TraceInfiniteT)?;
                let fit = fit_curve(&sol, &exact, &h, &dh)?;
                let pre = |run_id: &str| vec![run_id.to_string(), n.to_string(), ell.to_string(), fmt_real(lambda)];
                for d in &fit.data {
                    let mut row = pre(&run_id);
                    row.extend([
                        d.level.to_string(),
                        fmt_real(d.omega),
                        fmt_real(d.weight),
                        fmt_opt(d.ratio),
                        d.flagged.to_string(),
                    ]);
                    tables[0].push(row);
                }
                for (w, v) in &fit.curve {
                    let mut row = pre(&run_id);
                    row.extend([fmt_real(*w), fmt_real(*v)]);
                    tables[1].push(row);
                }
                manifest.push(ManifestRow {
                    run_id,
                    config_hash: ctx.hash.clone(),
                    n,
                    ell: Some(ell),
                    tau: None,
                    files: vec!["spectrum.csv", "curve.csv"],
                    elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
                });
            }
        }
    }
    Ok((tables, manifest))
}

pub fn sweep(ctx: &Context) -> Result<Output, CliError> {
    let cfg = ctx.cfg;
    let tables =
        vec![Table::new("sweep.csv", &["run_id", "n", "ell", "tau", "path", "fidelity", "log_infidelity", "betas"])];
    drive(ctx, "sweep", tables, cells(cfg), |run_id, c| {
        let template = evolution(cfg, problem(cfg, c.n, c.tau)?, c.ell).with_diagnostics(false);
        let mut rows = Vec::new();
        let params = free(cfg);
        let zeros = vec![0.0; params.len()];
        let naive = fidelity_refined(&template, &params, &zeros, cfg.optimizer.step_doublings)?;
        let mut row = |path: &str, fid: f64, betas: &[f64]| {
            let mut r = head(run_id, c);
            r.extend([path.to_string(), fmt_fidelity(fid), fmt_real(log_infidelity(fid)), fmt_list(betas)]);
            rows.push(r);
        };
        row("naive", naive, &zeros);
        if cfg.control_count() > 0 {
            let r = optimize_controls(&optimization(ctx, template))?;
            row("augmented", r.best_fidelity, &r.best_betas);
        }
        Ok(vec![rows])
    })
}
