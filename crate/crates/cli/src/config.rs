//! Experiment configuration: TOML with one table per component.
//!
//! ```toml
//! task = "norms"
//!
//! [grid]
//! half_width = 8.0
//! points = 64
//!
//! [[action]]
//! name = "kappa"
//! generator = { shape = [2, 2], data = [[0.5, 0.0], [1.0, 0.0], [0.0, 0.0], [-0.5, 0.0]] }
//!
//! [symbol]
//! family = "twisted_order"
//! n = 2
//! domain_action = "kappa"
//! codomain_action = "kappa"
//!
//! [params]
//! s_in = [0.0, 0.0]
//! s_out = [0.0, 0.0]
//! ```
//!
//! Matrices are `{ shape = [rows, cols], data = [[re, im], ...] }`, row-major.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use edgecalc_core::grid::SymbolGrid;
use edgecalc_core::group_action::GroupAction;
use edgecalc_core::linalg::{Matrix, C64};
use edgecalc_core::quantization::MAX_DENSE_SIZE;
use edgecalc_core::symbols::{builtin, BuiltinParams, PolyTerm, Symbol};
use serde::Deserialize;

/// Configuration problem, always naming the offending field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid config field '{field}': {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    LpCheck,
    Norms,
    Quantize,
    Requantize,
    Compose,
    Adjoint,
    Trace,
    Compactness,
    OrderFit,
    Thresholds,
}

impl Task {
    pub const ALL: [Task; 10] = [
        Task::LpCheck,
        Task::Norms,
        Task::Quantize,
        Task::Requantize,
        Task::Compose,
        Task::Adjoint,
        Task::Trace,
        Task::Compactness,
        Task::OrderFit,
        Task::Thresholds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::LpCheck => "lp-check",
            Task::Norms => "norms",
            Task::Quantize => "quantize",
            Task::Requantize => "requantize",
            Task::Compose => "compose",
            Task::Adjoint => "adjoint",
            Task::Trace => "trace",
            Task::Compactness => "compactness",
            Task::OrderFit => "order-fit",
            Task::Thresholds => "thresholds",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL.into_iter().find(|t| t.name() == s).ok_or_else(|| {
            let known: Vec<&str> = Task::ALL.iter().map(|t| t.name()).collect();
            ConfigError::new("task", format!("unknown task '{s}' (known: {})", known.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub shape: [usize; 2],
    pub data: Vec<[f64; 2]>,
}

impl MatrixSpec {
    pub fn build(&self, field: &str) -> Result<Matrix> {
        let [r, c] = self.shape;
        if r == 0 || c == 0 || self.data.len() != r * c {
            return Err(ConfigError::new(
                field,
                format!("shape [{r}, {c}] needs {} [re, im] pairs, got {}", r * c, self.data.len()),
            ));
        }
        if self.data.iter().flatten().any(|x| !x.is_finite()) {
            return Err(ConfigError::new(field, "matrix entries must be finite"));
        }
        let data = self.data.iter().map(|&[re, im]| C64::new(re, im)).collect();
        Matrix::new(r, c, data).map_err(|e| ConfigError::new(field, e.to_string()))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub half_width: f64,
    pub points: usize,
    #[serde(default = "one")]
    pub q: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSpec {
    pub name: String,
    pub generator: Option<MatrixSpec>,
    /// Path (relative to the config file) of a TOML file holding `shape` and `data`.
    pub generator_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolSpec {
    pub family: String,
    #[serde(default = "one_usize")]
    pub n: usize,
    pub matrix: Option<MatrixSpec>,
    #[serde(default)]
    pub mu1: f64,
    #[serde(default)]
    pub mu2: f64,
    #[serde(default)]
    pub delta: f64,
    pub width_y: Option<f64>,
    pub width_eta: Option<f64>,
    /// Terms [y power, η power, coefficient].
    #[serde(default)]
    pub poly: Vec<(u32, u32, f64)>,
    pub domain_action: Option<String>,
    pub codomain_action: Option<String>,
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default)]
    pub s_in: [f64; 2],
    #[serde(default)]
    pub s_out: [f64; 2],
    #[serde(default)]
    pub tau: f64,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    /// Dimension for trace-class thresholds.
    #[serde(default = "one")]
    pub q: u32,
    /// δ for trace-class thresholds.
    #[serde(default)]
    pub delta: f64,
    /// Norm index p; reported alongside mapping norms (Schatten-p).
    #[serde(default = "default_p")]
    pub p: f64,
    /// Action used by lp-check (default: trivial on ℂ¹).
    pub action: Option<String>,
    /// Random samples for lp-check.
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub pairing_j: Option<MatrixSpec>,
    pub pairing_j_tilde: Option<MatrixSpec>,
    /// Test space for expansion discrepancies: "hermite" or "packets".
    #[serde(default = "default_test_space")]
    pub test_space: String,
    #[serde(default)]
    pub eta0: f64,
    pub scale: Option<f64>,
    #[serde(default = "default_count")]
    pub count: usize,
}

fn default_truncation() -> usize {
    3
}

fn default_p() -> f64 {
    1.0
}

fn default_samples() -> usize {
    50
}

fn default_test_space() -> String {
    "hermite".into()
}

fn default_count() -> usize {
    8
}

impl Default for Params {
    fn default() -> Self {
        toml::from_str("").expect("all params have defaults")
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    task: Option<String>,
    /// Artifact directory; `--out` overrides.
    output: Option<PathBuf>,
    grid: GridSpec,
    #[serde(default)]
    action: Vec<ActionSpec>,
    symbol: Option<SymbolSpec>,
    symbol_b: Option<SymbolSpec>,
    #[serde(default)]
    params: Option<Params>,
}

/// Parsed and validated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub task: Option<Task>,
    pub output: Option<PathBuf>,
    pub grid: SymbolGrid,
    pub q: u32,
    pub actions: HashMap<String, Arc<GroupAction>>,
    pub symbol: Option<SymbolSpec>,
    pub symbol_b: Option<SymbolSpec>,
    pub params: Params,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parse TOML text; `base` resolves relative generator files.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let field = e.span().map(|s| text[s].split(['=', '\n']).next().unwrap_or("").trim().to_string());
            ConfigError::new(field.filter(|f| !f.is_empty()).unwrap_or_else(|| "config".into()), e.message().to_string())
        })?;
        let task = raw.task.as_deref().map(Task::from_str).transpose()?;

        let mut actions = HashMap::new();
        for (i, spec) in raw.action.iter().enumerate() {
            let field = format!("action[{i}].generator");
            let m = match (&spec.generator, &spec.generator_file) {
                (Some(g), None) => g.build(&field)?,
                (None, Some(file)) => {
                    let path = base.join(file);
                    let text = std::fs::read_to_string(&path).map_err(|e| {
                        ConfigError::new(format!("action[{i}].generator_file"), format!("{}: {e}", path.display()))
                    })?;
                    let spec: MatrixSpec = toml::from_str(&text)
                        .map_err(|e| ConfigError::new(format!("action[{i}].generator_file"), e.message().to_string()))?;
                    spec.build(&field)?
                }
                _ => {
                    return Err(ConfigError::new(field, "give exactly one of 'generator' and 'generator_file'"));
                }
            };
            let action = GroupAction::new(m).map_err(|e| ConfigError::new(&field, e.to_string()))?;
            if actions.insert(spec.name.clone(), Arc::new(action)).is_some() {
                return Err(ConfigError::new(format!("action[{i}].name"), format!("duplicate action '{}'", spec.name)));
            }
        }

        let cfg = Self {
            task,
            output: raw.output,
            grid: SymbolGrid::new(raw.grid.half_width.max(f64::MIN_POSITIVE), raw.grid.points.max(4))
                .map_err(|e| ConfigError::new("grid.points", e.to_string()))?,
            q: raw.grid.q,
            actions,
            symbol: raw.symbol,
            symbol_b: raw.symbol_b,
            params: raw.params.unwrap_or_default(),
        };
        validate_grid(&raw.grid, cfg.max_fiber())?;
        for (name, spec) in [("symbol", &cfg.symbol), ("symbol_b", &cfg.symbol_b)] {
            if let Some(s) = spec {
                validate_symbol(name, s)?;
            }
        }
        if cfg.params.truncation == 0 || cfg.params.truncation > edgecalc_core::calculus::MAX_TRUNCATION {
            return Err(ConfigError::new(
                "params.truncation",
                format!("must be in 1..={}", edgecalc_core::calculus::MAX_TRUNCATION),
            ));
        }
        if !cfg.params.tau.is_finite() {
            return Err(ConfigError::new("params.tau", "must be finite"));
        }
        if !(0.0..1.0).contains(&cfg.params.delta) {
            return Err(ConfigError::new("params.delta", "must satisfy 0 <= δ < 1"));
        }
        if cfg.params.q == 0 {
            return Err(ConfigError::new("params.q", "must be at least 1"));
        }
        if !["hermite", "packets"].contains(&cfg.params.test_space.as_str()) {
            return Err(ConfigError::new("params.test_space", "must be 'hermite' or 'packets'"));
        }
        Ok(cfg)
    }

    fn max_fiber(&self) -> usize {
        let mut n = 1;
        for s in [&self.symbol, &self.symbol_b].into_iter().flatten() {
            n = n.max(s.n);
            if let Some(m) = &s.matrix {
                n = n.max(m.shape[0]).max(m.shape[1]);
            }
        }
        for a in self.actions.values() {
            n = n.max(a.dim());
        }
        n
    }

    pub fn action(&self, field: &str, name: Option<&str>, dim: usize) -> Result<Arc<GroupAction>> {
        match name {
            None => Ok(Arc::new(GroupAction::trivial(dim))),
            Some(n) => {
                let a = self
                    .actions
                    .get(n)
                    .cloned()
                    .ok_or_else(|| ConfigError::new(field, format!("no action named '{n}'")))?;
                if a.dim() != dim {
                    return Err(ConfigError::new(field, format!("action '{n}' acts on ℂ^{}, need ℂ^{dim}", a.dim())));
                }
                Ok(a)
            }
        }
    }

    /// Build `[symbol]` (or `[symbol_b]` when `second`).
    pub fn build_symbol(&self, second: bool) -> Result<Symbol> {
        let name = if second { "symbol_b" } else { "symbol" };
        let spec = if second { &self.symbol_b } else { &self.symbol };
        let spec = spec.as_ref().ok_or_else(|| ConfigError::new(name, "this task needs the table"))?;
        let matrix = spec.matrix.as_ref().map(|m| m.build(&format!("{name}.matrix"))).transpose()?;
        let (rows, cols) = matrix.as_ref().map(|m| (m.rows(), m.cols())).unwrap_or((spec.n, spec.n));
        let defaults = BuiltinParams::default();
        let params = BuiltinParams {
            n: spec.n,
            matrix,
            mu1: spec.mu1,
            mu2: spec.mu2,
            delta: spec.delta,
            width_y: spec.width_y.unwrap_or(defaults.width_y),
            width_eta: spec.width_eta.unwrap_or(defaults.width_eta),
            poly: spec.poly.iter().map(|&(y, e, c)| PolyTerm::new(y, e, c)).collect(),
            domain_action: Some(self.action(&format!("{name}.domain_action"), spec.domain_action.as_deref(), cols)?),
            codomain_action: Some(self.action(
                &format!("{name}.codomain_action"),
                spec.codomain_action.as_deref(),
                rows,
            )?),
        };
        let s = builtin(&spec.family, &params).map_err(|e| ConfigError::new(format!("{name}.family"), e.to_string()))?;
        if spec.family != "twisted_order" && (spec.domain_action.is_some() || spec.codomain_action.is_some()) {
            let (d, c) = (params.domain_action.unwrap(), params.codomain_action.unwrap());
            return s.with_actions(d, c).map_err(|e| ConfigError::new(format!("{name}.domain_action"), e.to_string()));
        }
        Ok(s)
    }
}

fn validate_grid(g: &GridSpec, fiber: usize) -> Result<()> {
    if !(g.half_width > 0.0) || !g.half_width.is_finite() {
        return Err(ConfigError::new("grid.half_width", format!("L must be positive and finite, got {}", g.half_width)));
    }
    let cap = MAX_DENSE_SIZE / fiber;
    if !g.points.is_power_of_two() || g.points < 16 || g.points > cap {
        return Err(ConfigError::new(
            "grid.points",
            format!("N must be a power of two with 16 <= N <= {cap} (4096 / fiber {fiber}), got {}", g.points),
        ));
    }
    if g.q != 1 {
        return Err(ConfigError::new("grid.q", format!("only q = 1 is supported, got {}", g.q)));
    }
    Ok(())
}

fn validate_symbol(name: &str, s: &SymbolSpec) -> Result<()> {
    if s.n == 0 {
        return Err(ConfigError::new(format!("{name}.n"), "fiber dimension must be positive"));
    }
    // builtins have ϱ = 1
    if !(0.0..1.0).contains(&s.delta) {
        return Err(ConfigError::new(format!("{name}.delta"), format!("need 0 <= δ < ϱ = 1, got {}", s.delta)));
    }
    for (i, t) in s.poly.iter().enumerate() {
        if t.0 > 32 || t.1 > 32 || !t.2.is_finite() {
            return Err(ConfigError::new(format!("{name}.poly[{i}]"), "powers must be at most 32 and coefficients finite"));
        }
    }
    Ok(())
}
