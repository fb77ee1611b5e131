//! Experiment configuration (TOML).

use serde::{Deserialize, Serialize};

use cdpath::{BasisMode, ControlSet, ModelKind, ModelSpec, NamedControl, Parity};

use crate::CliError;

/// A scalar or a list of scalars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindName {
    ShortRangeIsing,
    Ltfim,
    LongRangeIsing,
    CollectiveSpin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisName {
    Default,
    Full,
    Sector,
    Dicke,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParityName {
    Even,
    Odd,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub kind: KindName,
    pub n: OneOrMany<usize>,
    pub alpha: Option<f64>,
    pub h_x: Option<f64>,
    pub h_z: Option<f64>,
    #[serde(default = "default_basis")]
    pub basis: BasisName,
    pub parity: Option<ParityName>,
    #[serde(default)]
    pub momentum: i64,
    #[serde(default = "yes")]
    pub periodic: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    FastLimit,
    FiniteTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightName {
    InfiniteT,
    GroundState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolBlock {
    #[serde(default = "default_ell")]
    pub ell: OneOrMany<usize>,
    #[serde(default = "default_mode")]
    pub mode: ModeName,
    #[serde(default = "default_tau")]
    pub tau: OneOrMany<f64>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_weight")]
    pub weight: WeightName,
    #[serde(default)]
    pub exact_agp: bool,
    #[serde(default)]
    pub diagnostics: bool,
}

impl Default for ProtocolBlock {
    fn default() -> Self {
        ProtocolBlock {
            ell: default_ell(),
            mode: default_mode(),
            tau: default_tau(),
            steps: default_steps(),
            weight: default_weight(),
            exact_agp: false,
            diagnostics: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlSetName {
    None,
    Named,
    Commutator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlName {
    Yy,
    Zxz,
    Z,
    X,
}

impl ControlName {
    fn control(self) -> NamedControl {
        match self {
            ControlName::Yy => NamedControl::YY,
            ControlName::Zxz => NamedControl::ZXZ,
            ControlName::Z => NamedControl::FieldZ,
            ControlName::X => NamedControl::FieldX,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlsBlock {
    #[serde(default = "default_set")]
    pub set: ControlSetName,
    #[serde(default)]
    pub named: Vec<ControlName>,
    #[serde(default = "one")]
    pub harmonics: usize,
    /// Fixed amplitudes, control-major (`β_1^(1) … β_H^(1), β_1^(2), …`).
    #[serde(default)]
    pub betas: Vec<f64>,
}

impl Default for ControlsBlock {
    fn default() -> Self {
        ControlsBlock { set: default_set(), named: Vec::new(), harmonics: 1, betas: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerBlock {
    #[serde(default = "default_bound")]
    pub bound: f64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_ftol")]
    pub ftol: f64,
    #[serde(default = "default_xtol")]
    pub xtol: f64,
    #[serde(default = "default_max_evals")]
    pub max_evals: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub random_starts: usize,
    #[serde(default)]
    pub step_doublings: usize,
    /// `[control, harmonic]` pairs; all amplitudes when absent.
    pub free: Option<Vec<[usize; 2]>>,
}

impl Default for OptimizerBlock {
    fn default() -> Self {
        OptimizerBlock {
            bound: default_bound(),
            restarts: default_restarts(),
            ftol: default_ftol(),
            xtol: default_xtol(),
            max_evals: default_max_evals(),
            max_iters: default_max_iters(),
            random_starts: 0,
            step_doublings: 0,
            free: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBlock {
    #[serde(default = "default_scan_min")]
    pub min: f64,
    #[serde(default = "default_bound")]
    pub max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_pair")]
    pub pair: [[usize; 2]; 2],
}

impl Default for ScanBlock {
    fn default() -> Self {
        ScanBlock { min: default_scan_min(), max: default_bound(), points: default_points(), pair: default_pair() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterateBlock {
    #[serde(default = "default_iters")]
    pub max_iters: usize,
    #[serde(default = "default_conv_tol")]
    pub conv_tol: f64,
}

impl Default for IterateBlock {
    fn default() -> Self {
        IterateBlock { max_iters: default_iters(), conv_tol: default_conv_tol() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloquetBlock {
    #[serde(default = "default_floquet_lambda")]
    pub lambda: f64,
    /// Schedule duration used to derive `λ̇` when `lambda_dot` is absent.
    #[serde(default = "default_floquet_tau")]
    pub tau: f64,
    pub lambda_dot: Option<f64>,
    /// Taken from the first-order trace-weighted AGP when absent.
    pub alpha1: Option<f64>,
    #[serde(default = "half")]
    pub beta1: f64,
    #[serde(default = "half")]
    pub beta2: f64,
    #[serde(default = "default_periods")]
    pub periods: Vec<f64>,
}

impl Default for FloquetBlock {
    fn default() -> Self {
        FloquetBlock {
            lambda: default_floquet_lambda(),
            tau: default_floquet_tau(),
            lambda_dot: None,
            alpha1: None,
            beta1: 0.5,
            beta2: 0.5,
            periods: default_periods(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumBlock {
    #[serde(default = "half_list")]
    pub lambda: OneOrMany<f64>,
}

impl Default for SpectrumBlock {
    fn default() -> Self {
        SpectrumBlock { lambda: half_list() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelBlock,
    #[serde(default)]
    pub protocol: ProtocolBlock,
    #[serde(default)]
    pub controls: ControlsBlock,
    #[serde(default)]
    pub optimizer: OptimizerBlock,
    #[serde(default)]
    pub scan: ScanBlock,
    #[serde(default)]
    pub iterate: IterateBlock,
    #[serde(default)]
    pub floquet: FloquetBlock,
    #[serde(default)]
    pub spectrum: SpectrumBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

fn default_basis() -> BasisName {
    BasisName::Default
}
fn yes() -> bool {
    true
}
fn one() -> usize {
    1
}
fn half() -> f64 {
    0.5
}
fn half_list() -> OneOrMany<f64> {
    OneOrMany::One(0.5)
}
fn default_ell() -> OneOrMany<usize> {
    OneOrMany::One(1)
}
fn default_mode() -> ModeName {
    ModeName::FastLimit
}
fn default_tau() -> OneOrMany<f64> {
    OneOrMany::One(1.0)
}
fn default_steps() -> usize {
    2000
}
fn default_weight() -> WeightName {
    WeightName::InfiniteT
}
fn default_set() -> ControlSetName {
    ControlSetName::None
}
fn default_bound() -> f64 {
    3.0
}
fn default_scan_min() -> f64 {
    -3.0
}
fn default_restarts() -> usize {
    3
}
fn default_ftol() -> f64 {
    1e-8
}
fn default_xtol() -> f64 {
    1e-4
}
fn default_max_evals() -> usize {
    2000
}
fn default_max_iters() -> usize {
    200
}
fn default_points() -> usize {
    11
}
fn default_pair() -> [[usize; 2]; 2] {
    [[0, 0], [1, 0]]
}
fn default_iters() -> usize {
    cdpath::iterative::DEFAULT_MAX_ITERS
}
fn default_conv_tol() -> f64 {
    cdpath::iterative::DEFAULT_CONV_TOL
}
fn default_floquet_lambda() -> f64 {
    0.4
}
fn default_floquet_tau() -> f64 {
    1.0
}
fn default_periods() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4, 1e-5]
}

/// Keys that must be present before the typed parse.
const REQUIRED: [&str; 2] = ["model.kind", "model.n"];

/// Parse and validate. Syntax and type errors carry line numbers.
pub fn parse(text: &str) -> Result<Config, CliError> {
    let table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    for key in REQUIRED {
        let mut node: Option<&toml::Value> = None;
        let mut current = &table;
        for (i, part) in key.split('.').enumerate() {
            node = current.get(part);
            match node {
                Some(toml::Value::Table(t)) if i + 1 < key.split('.').count() => current = t,
                Some(_) if i + 1 == key.split('.').count() => {}
                _ => {
                    node = None;
                    break;
                }
            }
        }
        if node.is_none() {
            return Err(CliError::MissingKey(key));
        }
    }
    let cfg: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl Config {
    pub fn validate(&self) -> Result<(), CliError> {
        let m = &self.model;
        let ns = m.n.to_vec();
        if ns.is_empty() || ns.contains(&0) {
            return Err(invalid("model.n: every size must be at least 1"));
        }
        match m.kind {
            KindName::Ltfim if m.h_x.is_none() || m.h_z.is_none() => {
                return Err(invalid("model.h_x and model.h_z are required for kind = \"ltfim\""));
            }
            KindName::LongRangeIsing if m.alpha.is_none() => {
                return Err(invalid("model.alpha is required for kind = \"long_range_ising\""));
            }
            _ => {}
        }
        if matches!(m.basis, BasisName::Dicke) != matches!(m.kind, KindName::CollectiveSpin)
            && m.basis != BasisName::Default
        {
            return Err(invalid("model.basis = \"dicke\" goes with kind = \"collective_spin\" only"));
        }
        let p = &self.protocol;
        if p.ell.to_vec().is_empty() {
            return Err(invalid("protocol.ell: at least one order"));
        }
        if p.steps < 2 {
            return Err(invalid("protocol.steps must be at least 2"));
        }
        if p.mode == ModeName::FiniteTime && p.tau.to_vec().iter().any(|t| !(*t > 0.0)) {
            return Err(invalid("protocol.tau: durations must be positive"));
        }
        let c = &self.controls;
        if c.set == ControlSetName::Named && c.named.is_empty() {
            return Err(invalid("controls.named must list at least one control when set = \"named\""));
        }
        if c.harmonics == 0 && c.set != ControlSetName::None {
            return Err(invalid("controls.harmonics must be at least 1"));
        }
        let count = self.control_count() * c.harmonics;
        if !c.betas.is_empty() && c.betas.len() != count {
            return Err(invalid(format!("controls.betas needs {count} entries, got {}", c.betas.len())));
        }
        let o = &self.optimizer;
        if !(o.bound > 0.0) {
            return Err(invalid("optimizer.bound must be positive"));
        }
        if o.restarts == 0 {
            return Err(invalid("optimizer.restarts must be at least 1"));
        }
        if !(o.ftol > 0.0 && o.xtol > 0.0) {
            return Err(invalid("optimizer.ftol and optimizer.xtol must be positive"));
        }
        for [n, k] in self.free_parameters() {
            if n >= self.control_count() || k >= c.harmonics {
                return Err(invalid(format!("optimizer.free: [{n}, {k}] does not name a control amplitude")));
            }
        }
        let s = &self.scan;
        if s.points < 3 || !(s.max > s.min) {
            return Err(invalid("scan: need points >= 3 and max > min"));
        }
        if self.iterate.max_iters == 0 || !(self.iterate.conv_tol > 0.0) {
            return Err(invalid("iterate: max_iters >= 1 and conv_tol > 0 required"));
        }
        let f = &self.floquet;
        if !(0.0..=1.0).contains(&f.lambda) || f.periods.is_empty() || f.periods.iter().any(|t| !(*t > 0.0)) {
            return Err(invalid("floquet: lambda in [0, 1] and positive periods required"));
        }
        if self.spectrum.lambda.to_vec().iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(invalid("spectrum.lambda values must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.model.n.to_vec()
    }

    pub fn orders(&self) -> Vec<usize> {
        self.protocol.ell.to_vec()
    }

    /// `None` for the fast limit.
    pub fn durations(&self) -> Vec<Option<f64>> {
        match self.protocol.mode {
            ModeName::FastLimit => vec![None],
            ModeName::FiniteTime => self.protocol.tau.to_vec().into_iter().map(Some).collect(),
        }
    }

    pub fn control_count(&self) -> usize {
        match self.controls.set {
            ControlSetName::None => 0,
            ControlSetName::Named => self.controls.named.len(),
            ControlSetName::Commutator => 2,
        }
    }

    pub fn control_set(&self) -> ControlSet {
        match self.controls.set {
            ControlSetName::None => ControlSet::None,
            ControlSetName::Named => ControlSet::Named(self.controls.named.iter().map(|c| c.control()).collect()),
            ControlSetName::Commutator => ControlSet::Commutator,
        }
    }

    pub fn free_parameters(&self) -> Vec<[usize; 2]> {
        match &self.optimizer.free {
            Some(list) => list.clone(),
            None => (0..self.control_count()).flat_map(|n| (0..self.controls.harmonics).map(move |k| [n, k])).collect(),
        }
    }

    pub fn model_spec(&self, n: usize) -> ModelSpec {
        let m = &self.model;
        let kind = match m.kind {
            KindName::ShortRangeIsing => ModelKind::ShortRangeIsing,
            KindName::Ltfim => ModelKind::Ltfim { h_x: m.h_x.unwrap_or(0.0), h_z: m.h_z.unwrap_or(0.0) },
            KindName::LongRangeIsing => ModelKind::LongRangeIsing { alpha: m.alpha.unwrap_or(0.0) },
            KindName::CollectiveSpin => ModelKind::CollectiveSpin,
        };
        let mut spec = ModelSpec::new(kind, n);
        let parity = |default: Option<Parity>| match m.parity {
            None => default,
            Some(ParityName::Even) => Some(Parity::Even),
            Some(ParityName::Odd) => Some(Parity::Odd),
            Some(ParityName::None) => None,
        };
        spec.basis = match m.basis {
            BasisName::Default => match (spec.default_basis(), m.parity) {
                (BasisMode::SymmetricSector { n, parity: p, .. }, _) => {
                    Some(BasisMode::SymmetricSector { n, parity: parity(p), momentum: m.momentum })
                }
                (b, _) => Some(b),
            },
            BasisName::Full => Some(BasisMode::FullChain { n, periodic: m.periodic }),
            BasisName::Sector => {
                Some(BasisMode::SymmetricSector { n, parity: parity(Some(Parity::Even)), momentum: m.momentum })
            }
            BasisName::Dicke => Some(BasisMode::Dicke { n }),
        };
        spec
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let cfg = parse("[model]\nkind = \"short_range_ising\"\nn = 4\n").unwrap();
        assert_eq!(cfg.sizes(), vec![4]);
        assert_eq!(cfg.orders(), vec![1]);
        assert_eq!(cfg.durations(), vec![None]);
        assert_eq!(cfg.protocol.steps, 2000);
    }

    #[test]
    fn missing_kind_is_named() {
        match parse("[model]\nn = 4\n") {
            Err(CliError::MissingKey(k)) => assert_eq!(k, "model.kind"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("[protocol]\nell = 1\n"), Err(CliError::MissingKey("model.kind"))));
    }

    #[test]
    fn type_errors_carry_lines() {
        let err = parse("[model]\nkind = \"short_range_ising\"\nn = 4\n[protocol]\nsteps = \"many\"\n").unwrap_err();
        assert!(err.to_string().contains("line 5"), "{err}");
        let err = parse("[model]\nkind = \"short_range_ising\"\nn = 4\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn semantic_checks() {
        assert!(parse("[model]\nkind = \"ltfim\"\nn = 4\n").is_err());
        assert!(parse("[model]\nkind = \"long_range_ising\"\nn = 4\nalpha = 2.0\n").is_ok());
        let bad_betas =
            "[model]\nkind = \"short_range_ising\"\nn = 4\n[controls]\nset = \"commutator\"\nbetas = [1.0]\n";
        assert!(parse(bad_betas).is_err());
        let free = "[model]\nkind = \"short_range_ising\"\nn = 4\n[controls]\nset = \"named\"\nnamed = [\"yy\"]\n[optimizer]\nfree = [[1, 0]]\n";
        assert!(parse(free).is_err());
    }

    #[test]
    fn lists_and_sectors() {
        let cfg = parse(
            "[model]\nkind = \"ltfim\"\nn = [4, 6]\nh_x = 0.7\nh_z = 0.01\n[protocol]\nell = [1, 2]\nmode = \"finite_time\"\ntau = [0.5, 1.0]\n",
        )
        .unwrap();
        assert_eq!(cfg.sizes(), vec![4, 6]);
        assert_eq!(cfg.durations(), vec![Some(0.5), Some(1.0)]);
        assert_eq!(cfg.model_spec(4).basis, Some(BasisMode::SymmetricSector { n: 4, parity: None, momentum: 0 }));
    }
}
