//! Bounded Powell minimization and fidelity optimization over extra-control
//! amplitudes `β`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{evolve, EvolutionConfig};
use crate::{Error, Result};

const GOLDEN: f64 = 0.381_966_011_250_105;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowellOptions {
    /// Stop when an iteration lowers `f` by less than `ftol (|f| + |f'|)/2`.
    pub ftol: f64,
    /// Absolute tolerance of each line search, in parameter units.
    pub xtol: f64,
    pub max_evals: usize,
    pub max_iters: usize,
}

impl Default for PowellOptions {
    fn default() -> Self {
        PowellOptions { ftol: 1e-8, xtol: 1e-4, max_evals: 2000, max_iters: 200 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowellResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    pub iterations: usize,
}

/// Per-coordinate box `[lo, hi]`; infinite ends are allowed.
pub type Bounds = [(f64, f64)];

struct Counted<'a, F> {
    f: &'a mut F,
    evals: usize,
}

impl<'a, F: FnMut(&[f64]) -> Result<f64>> Counted<'a, F> {
    fn call(&mut self, x: &[f64]) -> Result<f64> {
        self.evals += 1;
        let v = (self.f)(x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteObjective { at: x.to_vec() })
        }
    }
}

fn clip(x: &mut [f64], bounds: &Bounds) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// Feasible step range `t` with `x + t d` inside the box.
fn feasible(x: &[f64], d: &[f64], bounds: &Bounds) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for ((&xi, &di), &(l, h)) in x.iter().zip(d).zip(bounds) {
        if di > 0.0 {
            lo = lo.max((l - xi) / di);
            hi = hi.min((h - xi) / di);
        } else if di < 0.0 {
            lo = lo.max((h - xi) / di);
            hi = hi.min((l - xi) / di);
        }
    }
    (lo.min(0.0), hi.max(0.0))
}

/// Brent minimization of `g` on `[a, b]` starting from `x0` with known
/// value `f0`.
fn brent<G: FnMut(f64) -> Result<f64>>(
    mut g: G,
    a: f64,
    b: f64,
    x0: f64,
    f0: f64,
    xtol: f64,
    max_evals: usize,
) -> Result<(f64, f64)> {
    let (mut a, mut b) = (a, b);
    let (mut x, mut w, mut v) = (x0, x0, x0);
    let (mut fx, mut fw, mut fv) = (f0, f0, f0);
    let (mut d, mut e) = (0.0_f64, 0.0_f64);
    for _ in 0..max_evals {
        let m = 0.5 * (a + b);
        let tol1 = 1e-10 * x.abs() + 0.5 * xtol;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = g(u)?;
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            (v, fv, w, fw, x, fx) = (w, fw, x, fx, u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv, w, fw) = (w, fw, u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    Ok((x, fx))
}

/// Minimize along `x + t d`, keeping `t` in the feasible range.
fn line_min<F: FnMut(&[f64]) -> Result<f64>>(
    obj: &mut Counted<'_, F>,
    x: &[f64],
    fx: f64,
    d: &[f64],
    bounds: &Bounds,
    opts: &PowellOptions,
) -> Result<(f64, f64)> {
    let (lo, hi) = feasible(x, d, bounds);
    if hi - lo <= 0.0 {
        return Ok((0.0, fx));
    }
    let point = |t: f64| -> Vec<f64> {
        let mut y: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + t * b).collect();
        clip(&mut y, bounds);
        y
    };
    let budget = opts.max_evals.saturating_sub(obj.evals);
    if budget == 0 {
        return Ok((0.0, fx));
    }
    let (a, b) = if lo.is_finite() && hi.is_finite() {
        (lo, hi)
    } else {
        // expand a bracket downhill from t = 0 until f rises
        let mut step = 1.0_f64;
        let f1 = obj.call(&point(step.min(hi)))?;
        if f1 > fx {
            step = -step;
        }
        let (mut t_prev, mut t) = (0.0, step.clamp(lo, hi));
        let mut f_t = if step > 0.0 { f1 } else { obj.call(&point(t))? };
        if f_t > fx {
            (-1.0_f64.max(lo), 1.0_f64.min(hi))
        } else {
            loop {
                let next = (t + 1.618 * (t - t_prev)).clamp(lo, hi);
                if next == t || obj.evals >= opts.max_evals {
                    break (t_prev.min(t), t_prev.max(t));
                }
                let f_next = obj.call(&point(next))?;
                if f_next > f_t {
                    break (t_prev.min(next), t_prev.max(next));
                }
                (t_prev, t, f_t) = (t, next, f_next);
            }
        }
    };
    let x0 = if a < 0.0 && b > 0.0 { 0.0 } else { a + GOLDEN * (b - a) };
    let f0 = if x0 == 0.0 { fx } else { obj.call(&point(x0))? };
    let budget = opts.max_evals.saturating_sub(obj.evals);
    let (t, ft) = brent(|t| obj.call(&point(t)), a, b, x0, f0, opts.xtol, budget)?;
    if ft <= fx {
        Ok((t, ft))
    } else {
        Ok((0.0, fx))
    }
}

/// Powell's conjugate-direction method on a box.
pub fn powell_minimize<F: FnMut(&[f64]) -> Result<f64>>(
    mut f: F,
    x0: &[f64],
    bounds: &Bounds,
    opts: &PowellOptions,
) -> Result<PowellResult> {
    let n = x0.len();
    if n == 0 {
        return Err(Error::InvalidOptimization("no free parameters".into()));
    }
    if bounds.len() != n || bounds.iter().any(|&(l, h)| !(l <= h)) {
        return Err(Error::InvalidOptimization("bounds must be one (lo <= hi) pair per parameter".into()));
    }
    if !(opts.ftol > 0.0) || !(opts.xtol > 0.0) {
        return Err(Error::InvalidOptimization("tolerances must be positive".into()));
    }
    let mut obj = Counted { f: &mut f, evals: 0 };
    let mut x = x0.to_vec();
    clip(&mut x, bounds);
    let mut fx = obj.call(&x)?;
    let mut dirs: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut iterations = 0;
    while iterations < opts.max_iters && obj.evals < opts.max_evals {
        iterations += 1;
        let (x_start, f_start) = (x.clone(), fx);
        let (mut biggest, mut big_idx) = (0.0, 0);
        for (i, d) in dirs.iter().enumerate() {
            let before = fx;
            let (t, ft) = line_min(&mut obj, &x, fx, d, bounds, opts)?;
            for (xi, di) in x.iter_mut().zip(d) {
                *xi += t * di;
            }
            clip(&mut x, bounds);
            fx = ft;
            if before - fx > biggest {
                biggest = before - fx;
                big_idx = i;
            }
        }
        if 2.0 * (f_start - fx) <= opts.ftol * (f_start.abs() + fx.abs()) + 1e-20 {
            break;
        }
        let d: Vec<f64> = x.iter().zip(&x_start).map(|(a, b)| a - b).collect();
        if d.iter().all(|v| *v == 0.0) || obj.evals >= opts.max_evals {
            break;
        }
        let mut xe: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
        clip(&mut xe, bounds);
        let fe = obj.call(&xe)?;
        if fe < f_start {
            let t =
                2.0 * (f_start - 2.0 * fx + fe) * (f_start - fx - biggest).powi(2) - biggest * (f_start - fe).powi(2);
            if t < 0.0 {
                let (s, fs) = line_min(&mut obj, &x, fx, &d, bounds, opts)?;
                for (xi, di) in x.iter_mut().zip(&d) {
                    *xi += s * di;
                }
                clip(&mut x, bounds);
                fx = fs;
                dirs.remove(big_idx);
                dirs.push(d);
            }
        }
    }
    Ok(PowellResult { x, f: fx, evaluations: obj.evals, iterations })
}

#[derive(Clone, Debug)]
pub struct OptimizationSpec {
    /// Problem, controls, schedule, `ℓ`, steps and weight of every evaluation.
    pub template: EvolutionConfig,
    /// `(control index, harmonic index)` pairs that are optimized.
    pub free: Vec<(usize, usize)>,
    pub bound: f64,
    /// Number of deterministic starts (at most [`MAX_GRID_STARTS`]).
    pub restarts: usize,
    pub options: PowellOptions,
    /// Extra uniformly random starts drawn from `seed`.
    pub random_starts: usize,
    pub seed: u64,
    /// Explicit starting points tried before the grid starts.
    pub warm_starts: Vec<Vec<f64>>,
    /// On a norm-drift failure, retry that evaluation with twice the steps
    /// up to this many times. Zero propagates the failure.
    pub step_doublings: usize,
}

pub const MAX_GRID_STARTS: usize = 9;
pub const START_VALUES: [f64; 5] = [0.0, 1.0, -1.0, 2.5, -2.5];

impl OptimizationSpec {
    pub fn new(template: EvolutionConfig, free: Vec<(usize, usize)>) -> Self {
        OptimizationSpec {
            template,
            free,
            bound: 3.0,
            restarts: 1,
            options: PowellOptions::default(),
            random_starts: 0,
            seed: 0,
            warm_starts: Vec::new(),
            step_doublings: 0,
        }
    }

    /// Every harmonic of every control.
    pub fn all_parameters(template: EvolutionConfig) -> Self {
        let free = template
            .problem
            .controls
            .iter()
            .enumerate()
            .flat_map(|(n, c)| (0..c.harmonics.len()).map(move |k| (n, k)))
            .collect();
        Self::new(template, free)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RestartRecord {
    pub start: Vec<f64>,
    pub betas: Vec<f64>,
    pub fidelity: f64,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub best_betas: Vec<f64>,
    pub best_fidelity: f64,
    /// Fidelity with every free amplitude at zero.
    pub baseline_fidelity: f64,
    pub restarts: Vec<RestartRecord>,
    pub evaluations: usize,
}

/// Deterministic starts: the Cartesian product of [`START_VALUES`] ordered by
/// largest component magnitude, truncated to `count`.
pub fn restart_seeds(dim: usize, count: usize) -> Vec<Vec<f64>> {
    let count = count.min(MAX_GRID_STARTS);
    let total = START_VALUES.len().pow(dim as u32);
    let mut idx: Vec<Vec<usize>> = (0..total)
        .map(|mut c| {
            (0..dim)
                .map(|_| {
                    let d = c % START_VALUES.len();
                    c /= START_VALUES.len();
                    d
                })
                .collect()
        })
        .collect();
    // START_VALUES is already sorted by magnitude, so indices order the same way
    idx.sort_by_key(|v| (v.iter().copied().max().unwrap_or(0), v.iter().map(|&i| i.min(1)).sum::<usize>(), v.clone()));
    idx.into_iter().take(count).map(|v| v.into_iter().map(|i| START_VALUES[i]).collect()).collect()
}

/// Fidelity of `template` with the free amplitudes set to `betas`.
pub fn fidelity_at(template: &EvolutionConfig, free: &[(usize, usize)], betas: &[f64]) -> Result<f64> {
    fidelity_refined(template, free, betas, 0)
}

/// [`fidelity_at`], doubling the step count up to `doublings` times while
/// the evolution reports norm drift.
pub fn fidelity_refined(
    template: &EvolutionConfig,
    free: &[(usize, usize)],
    betas: &[f64],
    doublings: usize,
) -> Result<f64> {
    let mut cfg = template.clone();
    cfg.diagnostics = false;
    cfg.store_states = false;
    cfg.problem.set_parameters(free, betas)?;
    let mut tries = 0;
    loop {
        match evolve(&cfg) {
            Ok(r) => return Ok(r.fidelity),
            Err(Error::NormDrift { .. }) if tries < doublings => {
                tries += 1;
                cfg.steps *= 2;
            }
            Err(e) => return Err(Error::EvolutionAt { betas: betas.to_vec(), source: Box::new(e) }),
        }
    }
}

/// Maximize the final-state fidelity over `|β| ≤ bound`.
pub fn optimize_controls(spec: &OptimizationSpec) -> Result<OptimizationResult> {
    let dim = spec.free.len();
    if dim == 0 {
        return Err(Error::InvalidOptimization("no free parameters".into()));
    }
    if !(spec.bound > 0.0) {
        return Err(Error::InvalidOptimization(format!("bound must be positive, got {}", spec.bound)));
    }
    if spec.restarts == 0 && spec.warm_starts.is_empty() && spec.random_starts == 0 {
        return Err(Error::InvalidOptimization("restarts must be at least 1".into()));
    }
    if spec.warm_starts.iter().any(|s| s.len() != dim) {
        return Err(Error::InvalidOptimization(format!("warm starts must have {dim} entries")));
    }
    let bounds = vec![(-spec.bound, spec.bound); dim];
    let mut starts: Vec<Vec<f64>> = spec
        .warm_starts
        .iter()
        .cloned()
        .chain(restart_seeds(dim, spec.restarts))
        .map(|v| v.into_iter().map(|x| x.clamp(-spec.bound, spec.bound)).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..spec.random_starts {
        starts.push((0..dim).map(|_| rng.gen_range(-spec.bound..=spec.bound)).collect());
    }
    let mut records = Vec::with_capacity(starts.len());
    let mut evaluations = 0;
    let mut baseline = None;
    let eval = |b: &[f64]| fidelity_refined(&spec.template, &spec.free, b, spec.step_doublings);
    for start in starts {
        let res = powell_minimize(|b| Ok(1.0 - eval(b)?), &start, &bounds, &spec.options)?;
        evaluations += res.evaluations;
        if baseline.is_none() && start.iter().all(|&v| v == 0.0) {
            baseline = Some(eval(&start)?);
            evaluations += 1;
        }
        records.push(RestartRecord { start, betas: res.x, fidelity: 1.0 - res.f, evaluations: res.evaluations });
    }
    let baseline = match baseline {
        Some(b) => b,
        None => {
            evaluations += 1;
            eval(&vec![0.0; dim])?
        }
    };
    let best = records.iter().max_by(|a, b| a.fidelity.total_cmp(&b.fidelity)).expect("at least one restart");
    let best_betas = best.betas.clone();
    let best_fidelity = eval(&best_betas)?;
    evaluations += 1;
    Ok(OptimizationResult { best_betas, best_fidelity, baseline_fidelity: baseline, restarts: records, evaluations })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl ScanGrid {
    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.min + (self.max - self.min) * i as f64 / (self.points - 1) as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BetaScan {
    pub axis: Vec<f64>,
    /// `fidelity[i][j]` at `(axis[i], axis[j])`.
    pub fidelity: Vec<Vec<f64>>,
}

impl BetaScan {
    pub fn max(&self) -> f64 {
        self.fidelity.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Fidelity on the square grid of the two amplitudes in `pair`.
pub fn beta_scan(
    template: &EvolutionConfig,
    pair: [(usize, usize); 2],
    grid: ScanGrid,
    doublings: usize,
) -> Result<BetaScan> {
    if grid.points < 3 {
        return Err(Error::InvalidOptimization(format!("scan needs at least 3 points per axis, got {}", grid.points)));
    }
    if !(grid.max > grid.min) {
        return Err(Error::InvalidOptimization("scan range must have max > min".into()));
    }
    let axis = grid.values();
    let mut fidelity = Vec::with_capacity(axis.len());
    for &b1 in &axis {
        let row = axis
            .iter()
            .map(|&b2| fidelity_refined(template, &pair, &[b1, b2], doublings))
            .collect::<Result<Vec<f64>>>()?;
        fidelity.push(row);
    }
    Ok(BetaScan { axis, fidelity })
}

/// One row of a scan, for callers that distribute rows across workers.
pub fn beta_scan_row(
    template: &EvolutionConfig,
    pair: [(usize, usize); 2],
    axis: &[f64],
    b1: f64,
    doublings: usize,
) -> Result<Vec<f64>> {
    axis.iter().map(|&b2| fidelity_refined(template, &pair, &[b1, b2], doublings)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_model, ControlSet, ModelKind, ModelSpec, NamedControl};

    fn tight() -> PowellOptions {
        PowellOptions { ftol: 1e-14, xtol: 1e-9, max_evals: 5000, max_iters: 500 }
    }

    #[test]
    fn quadratic() {
        let inf = f64::INFINITY;
        let r = powell_minimize(
            |x| Ok((x[0] - 1.0).powi(2) + (x[1] + 2.0).powi(2)),
            &[0.0, 0.0],
            &[(-inf, inf), (-inf, inf)],
            &tight(),
        )
        .unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] + 2.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| Ok(100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2));
        let r = powell_minimize(f, &[-1.2, 1.0], &[(-5.0, 5.0), (-5.0, 5.0)], &tight()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-3 && (r.x[1] - 1.0).abs() < 1e-3, "{r:?}");
    }

    #[test]
    fn active_bound() {
        let r = powell_minimize(|x| Ok((x[0] - 5.0).powi(2)), &[0.0], &[(-3.0, 3.0)], &tight()).unwrap();
        assert!((r.x[0] - 3.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn deterministic_and_rejects_nan() {
        let f = |x: &[f64]| Ok((x[0] - 0.3).powi(4) + x[1].abs().sqrt());
        let b = [(-3.0, 3.0), (-3.0, 3.0)];
        let a = powell_minimize(f, &[1.0, 1.0], &b, &PowellOptions::default()).unwrap();
        let c = powell_minimize(f, &[1.0, 1.0], &b, &PowellOptions::default()).unwrap();
        assert_eq!(a, c);
        let bad = powell_minimize(|_| Ok(f64::NAN), &[0.0], &[(-1.0, 1.0)], &PowellOptions::default());
        assert!(matches!(bad, Err(Error::NonFiniteObjective { .. })));
    }

    #[test]
    fn seeds_start_at_zero() {
        let s = restart_seeds(2, 9);
        assert_eq!(s.len(), 9);
        assert_eq!(s[0], vec![0.0, 0.0]);
        assert!(s.iter().all(|v| v.iter().all(|x| x.abs() <= 1.0)));
        assert_eq!(restart_seeds(1, 9).len(), 5);
    }

    #[test]
    fn no_free_parameters_is_an_error() {
        let p = make_model(&ModelSpec::new(ModelKind::ShortRangeIsing, 4)).unwrap();
        let spec = OptimizationSpec::new(EvolutionConfig::new(p, 1, 100), Vec::new());
        assert!(matches!(optimize_controls(&spec), Err(Error::InvalidOptimization(_))));
    }

    #[test]
    fn small_scan_and_optimizer_agree() {
        let p = make_model(&ModelSpec::new(ModelKind::ShortRangeIsing, 6))
            .unwrap()
            .with_controls(&ControlSet::Named(vec![NamedControl::YY, NamedControl::ZXZ]), 1)
            .unwrap();
        let cfg = EvolutionConfig::new(p, 1, 100);
        let scan = beta_scan(&cfg, [(0, 0), (1, 0)], ScanGrid { min: -3.0, max: 3.0, points: 5 }, 0).unwrap();
        assert!(scan.fidelity.iter().flatten().all(|f| f.is_finite()));
        let naive = fidelity_at(&cfg, &[(0, 0), (1, 0)], &[0.0, 0.0]).unwrap();
        assert_eq!(scan.fidelity[2][2], naive);
        let mut spec = OptimizationSpec::new(cfg, vec![(0, 0), (1, 0)]);
        spec.restarts = 3;
        let r = optimize_controls(&spec).unwrap();
        assert!(r.best_fidelity >= r.baseline_fidelity);
        assert!(r.best_fidelity >= scan.max() - 1e-3, "{} vs {}", r.best_fidelity, scan.max());
    }
}
