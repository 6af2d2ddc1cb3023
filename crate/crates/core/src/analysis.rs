//! Mapping norms between wedge Sobolev spaces, compactness profiles, the
//! trace formula and trace-class thresholds.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{jbracket1, SymbolGrid};
use crate::group_action::GroupAction;
use crate::linalg::{schatten_norm, svd, Matrix, SingularSpectrum, C64};
use crate::littlewood_paley::{FrameSymbols, WedgeNormConfig};
use crate::quantization::{format_real, op_tau, QuantizedOperator};
use crate::symbols::Symbol;

/// Condition-number ceiling for weight matrices.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Order pair (s₁, s₂) of ⟨y⟩^{−s₂}𝒲^{s₁}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevOrder {
    pub s1: f64,
    pub s2: f64,
}

impl SobolevOrder {
    pub fn new(s1: f64, s2: f64) -> Self {
        Self { s1, s2 }
    }

    pub fn smooth(s1: f64) -> Self {
        Self { s1, s2: 0.0 }
    }
}

impl fmt::Display for SobolevOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", format_real(self.s1), format_real(self.s2))
    }
}

fn phase(grid: &SymbolGrid, k: usize, idx: usize) -> C64 {
    // e^{−i y_k η_m} = (−1)^m e^{−2πi k m / N}
    let n = grid.len() as i64;
    let m = grid.mode(idx);
    let r = (k as i64 * m).rem_euclid(n) as f64;
    let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    C64::from_polar(sign, -2.0 * PI * r / n as f64)
}

/// W_s and its constructed inverse.
#[derive(Debug, Clone)]
pub struct WeightMatrix {
    pub forward: Matrix,
    pub inverse: Matrix,
    /// Bound on cond(W) from the block and weight factors.
    pub condition: f64,
}

/// W = (Δη/2π)^{1/2} · blockdiag_m(⟨η_m⟩^{s₁}κ⁻¹_{⟨η_m⟩}) · F · diag(⟨y_k⟩^{s₂}),
/// so that ‖W u‖ = ws_norm_weighted(u). Errors when the condition bound
/// exceeds [`CONDITION_LIMIT`].
pub fn ws_weight_pair(grid: &SymbolGrid, cfg: &WedgeNormConfig) -> Result<WeightMatrix> {
    let n = grid.len();
    let d = cfg.action.dim();
    let c = (grid.d_eta() / (2.0 * PI)).sqrt();
    let h = grid.h();
    let mut blocks = Vec::with_capacity(n);
    let mut inv_blocks = Vec::with_capacity(n);
    let (mut max_b, mut max_bi) = (0.0f64, 0.0f64);
    for idx in 0..n {
        let jb = jbracket1(grid.eta(idx));
        let b = cfg.action.inverse(jb)?.scale_real(jb.powf(cfg.s));
        let bi = cfg.action.evaluate(jb)?.scale_real(jb.powf(-cfg.s));
        max_b = max_b.max(b.op_norm());
        max_bi = max_bi.max(bi.op_norm());
        blocks.push(b);
        inv_blocks.push(bi);
    }
    let wy: Vec<f64> = (0..n).map(|k| jbracket1(grid.y(k)).powf(cfg.s2)).collect();
    let wy_ratio = wy.iter().cloned().fold(0.0, f64::max) / wy.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = max_b * max_bi * wy_ratio;
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(Error::Conditioning(format!(
            "weight matrix condition bound {condition:e} exceeds {CONDITION_LIMIT:e} (s = {}, s2 = {})",
            cfg.s, cfg.s2
        )));
    }
    let mut forward = Matrix::zeros(n * d, n * d);
    let mut inverse = Matrix::zeros(n * d, n * d);
    let inv_scale = grid.d_eta() / (2.0 * PI) / c;
    for idx in 0..n {
        for k in 0..n {
            let p = phase(grid, k, idx);
            let fw = p * (c * h * wy[k]);
            let iw = p.conj() * (inv_scale / wy[k]);
            for i in 0..d {
                for j in 0..d {
                    forward[(idx * d + i, k * d + j)] = blocks[idx][(i, j)] * fw;
                    inverse[(k * d + i, idx * d + j)] = inv_blocks[idx][(i, j)] * iw;
                }
            }
        }
    }
    Ok(WeightMatrix { forward, inverse, condition })
}

pub fn ws_weight_matrix(grid: &SymbolGrid, cfg: &WedgeNormConfig) -> Result<Matrix> {
    Ok(ws_weight_pair(grid, cfg)?.forward)
}

/// Norm of A : ⟨y⟩^{−s₂}𝒲^{s₁}(κ) → ⟨y⟩^{−s₂′}𝒲^{s₁′}(κ̃) on the grid.
#[derive(Debug, Clone)]
pub struct MappingReport {
    pub s_in: SobolevOrder,
    pub s_out: SobolevOrder,
    pub norm: f64,
    pub singular_values: SingularSpectrum,
    pub grid: SymbolGrid,
}

impl MappingReport {
    /// `norm=<v> s_in=(s1,s2) s_out=(s1,s2) grid=N<n>L<l>`
    pub fn summary(&self) -> String {
        format!(
            "norm={} s_in={} s_out={} grid=N{}L{}",
            format_real(self.norm),
            self.s_in,
            self.s_out,
            self.grid.len(),
            format_real(self.grid.half_width())
        )
    }
}

fn conjugated(
    a: &QuantizedOperator,
    s_in: SobolevOrder,
    s_out: SobolevOrder,
    domain_action: &Arc<GroupAction>,
    codomain_action: &Arc<GroupAction>,
) -> Result<Matrix> {
    if domain_action.dim() != a.n_in() || codomain_action.dim() != a.n_out() {
        return Err(Error::Shape("actions do not match the operator fibers".into()));
    }
    let grid = a.grid();
    let w_in = ws_weight_pair(grid, &WedgeNormConfig::weighted(s_in.s1, s_in.s2, domain_action.clone()))?;
    let w_out = ws_weight_pair(grid, &WedgeNormConfig::weighted(s_out.s1, s_out.s2, codomain_action.clone()))?;
    w_out.forward.matmul(a.matrix())?.matmul(&w_in.inverse)
}

/// σ_max(W_out · A · W_in⁻¹) with the full singular spectrum.
pub fn mapping_norm(
    a: &QuantizedOperator,
    s_in: SobolevOrder,
    s_out: SobolevOrder,
    domain_action: &Arc<GroupAction>,
    codomain_action: &Arc<GroupAction>,
) -> Result<MappingReport> {
    let m = conjugated(a, s_in, s_out, domain_action, codomain_action)?;
    let singular_values = svd(&m)?;
    Ok(MappingReport { s_in, s_out, norm: singular_values.largest(), singular_values, grid: *a.grid() })
}

/// ‖W_out · A · W_in⁻¹‖_{𝒞₁}.
pub fn c1_norm_of_operator(
    a: &QuantizedOperator,
    s_in: SobolevOrder,
    s_out: SobolevOrder,
    domain_action: &Arc<GroupAction>,
    codomain_action: &Arc<GroupAction>,
) -> Result<f64> {
    schatten_norm(&conjugated(a, s_in, s_out, domain_action, codomain_action)?, 1.0)
}

/// Normalized singular values σ_k/σ₁ and the first k (1-based) with
/// σ_k/σ₁ < 0.1.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactnessProfile {
    pub ratios: Vec<f64>,
    pub first_below_tenth: Option<usize>,
}

impl CompactnessProfile {
    /// σ_k/σ₁ for 1-based k.
    pub fn ratio(&self, k: usize) -> f64 {
        self.ratios[k - 1]
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.ratios.windows(2).all(|w| w[1] <= w[0])
    }
}

pub fn compactness_profile(report: &MappingReport) -> CompactnessProfile {
    let s = report.singular_values.values();
    let top = s.first().copied().unwrap_or(0.0);
    let ratios: Vec<f64> = if top > 0.0 { s.iter().map(|v| v / top).collect() } else { vec![0.0; s.len()] };
    let first_below_tenth = ratios.iter().position(|&r| r < 0.1).map(|i| i + 1);
    CompactnessProfile { ratios, first_below_tenth }
}

/// Both sides of the trace formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceCheck {
    pub lhs: C64,
    pub rhs: C64,
    pub rel_err: f64,
}

/// lhs = tr Op₀(a) (plain matrix trace); rhs = (1/2π) h Δη Σ_{k,m} tr a(y_k, η_m).
pub fn trace_check(a: &Symbol, grid: &SymbolGrid) -> Result<TraceCheck> {
    if a.n_in() != a.n_out() {
        return Err(Error::Shape(format!("trace needs a square fiber, got {}x{}", a.n_out(), a.n_in())));
    }
    let lhs = op_tau(a, 0.0, grid)?.matrix().trace();
    let mut sum = C64::new(0.0, 0.0);
    for k in 0..grid.len() {
        for idx in 0..grid.len() {
            sum += a.eval(grid.y(k), grid.eta(idx))?.trace();
        }
    }
    let rhs = sum * (grid.h() * grid.d_eta() / (2.0 * PI));
    let scale = lhs.norm().max(rhs.norm());
    let rel_err = if scale == 0.0 { 0.0 } else { (lhs - rhs).norm() / scale };
    Ok(TraceCheck { lhs, rhs, rel_err })
}

/// Sufficient orders for trace class: μ₁ < −q − 4pδ, μ₂ < −8p with
/// p = ⌈(q+1)/4⌉.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceThreshold {
    pub p: u32,
    pub mu1_bound: f64,
    pub mu2_bound: f64,
}

impl TraceThreshold {
    pub fn summary(&self) -> String {
        format!("p={} mu1_lt={} mu2_lt={}", self.p, format_real(self.mu1_bound), format_real(self.mu2_bound))
    }

    /// Whether orders (μ₁, μ₂) lie strictly below the bounds.
    pub fn admits(&self, mu1: f64, mu2: f64) -> bool {
        mu1 < self.mu1_bound && mu2 < self.mu2_bound
    }
}

pub fn trace_class_threshold(q: u32, delta: f64) -> Result<TraceThreshold> {
    if q == 0 {
        return Err(Error::Parameter("dimension q must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::Parameter(format!("δ must lie in [0, 1), got {delta}")));
    }
    let p = (q + 1).div_ceil(4);
    Ok(TraceThreshold {
        p,
        mu1_bound: -(q as f64) - 4.0 * p as f64 * delta,
        mu2_bound: -8.0 * p as f64,
    })
}

/// Dense matrix of the Fourier multiplier f(η) from fiber `n_in` to `n_out`.
pub fn multiplier_matrix(
    grid: &SymbolGrid,
    n_out: usize,
    n_in: usize,
    f: impl Fn(f64) -> Result<Matrix>,
) -> Result<Matrix> {
    let n = grid.len();
    let scale = 1.0 / n as f64;
    let symbols = (0..n).map(|idx| f(grid.eta(idx))).collect::<Result<Vec<_>>>()?;
    if symbols.iter().any(|s| s.rows() != n_out || s.cols() != n_in) {
        return Err(Error::Shape("multiplier has the wrong fiber shape".into()));
    }
    let mut m = Matrix::zeros(n * n_out, n * n_in);
    for k in 0..n {
        for l in 0..n {
            let mut block = Matrix::zeros(n_out, n_in);
            for (idx, s) in symbols.iter().enumerate() {
                // e^{i(y_k − y_l)η_m}
                let p = phase(grid, l, idx) * phase(grid, k, idx).conj() * scale;
                block.axpy(p, s);
            }
            m.set_block(k * n_out, l * n_in, &block);
        }
    }
    Ok(m)
}

/// S̃ · A · T: the operator transported to sequence-valued L² spaces, where
/// the group actions no longer enter the norm.
pub fn frame_conjugate(a: &QuantizedOperator, fs_in: &FrameSymbols, fs_out: &FrameSymbols) -> Result<Matrix> {
    if fs_in.dim() != a.n_in() || fs_out.dim() != a.n_out() {
        return Err(Error::Shape("frame symbols do not match the operator fibers".into()));
    }
    let grid = a.grid();
    let t = multiplier_matrix(grid, fs_in.dim(), fs_in.stacked_dim(), |eta| Ok(fs_in.t(eta)))?;
    let s = multiplier_matrix(grid, fs_out.stacked_dim(), fs_out.dim(), |eta| Ok(fs_out.s(eta)))?;
    s.matmul(a.matrix())?.matmul(&t)
}
