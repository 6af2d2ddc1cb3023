//! Dyadic partitions of unity, frame symbols s(η), t(η), the frame operators
//! S and T, and the wedge Sobolev norms built on them.
//!
//! The profile φ₀ equals 1 for |η| ≤ 5/4 and vanishes for |η| ≥ 7/4, with a
//! smooth mollifier transition in between. The companion cutoffs ψ_j equal 1
//! on a neighborhood of supp φ_j:
//! - ψ₀ = 1 for |η| ≤ 15/8, 0 for |η| ≥ 31/16
//! - ψ₁ rises from 0 at |η| = 17/16 to 1 at 9/8 and falls from 1 at 15/4 to 0 at 31/8
//! - ψ_j(η) = ψ₁(2^{1−j}η) for j ≥ 2

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{forward_ft, inverse_ft, jbracket1, Domain, GridFunction, SymbolGrid};
use crate::group_action::GroupAction;
use crate::linalg::{Matrix, C64};

const PHI_INNER: f64 = 5.0 / 4.0;
const PHI_OUTER: f64 = 7.0 / 4.0;
const PSI_FLAT: f64 = 15.0 / 8.0;
const PSI_EDGE: f64 = 31.0 / 16.0;
const PSI1_EDGE: f64 = 17.0 / 16.0;
const PSI1_FLAT: f64 = 9.0 / 8.0;

fn bump_tail(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// Smooth step σ(x) = f(x)/(f(x)+f(1−x)): 0 for x ≤ 0, 1 for x ≥ 1.
pub fn mollifier_step(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let a = bump_tail(x);
    a / (a + bump_tail(1.0 - x))
}

/// 1 for r ≤ inner, 0 for r ≥ outer.
fn radial_cutoff(r: f64, inner: f64, outer: f64) -> f64 {
    1.0 - mollifier_step((r - inner) / (outer - inner))
}

/// Dyadic resolution of the identity {φ_j}, j = 0..=J, with companions ψ_j.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicPartition {
    top: usize,
}

impl DyadicPartition {
    pub fn new(top: usize) -> Result<Self> {
        if top < 2 {
            return Err(Error::Parameter(format!("partition top level must be >= 2, got {top}")));
        }
        Ok(Self { top })
    }

    /// Smallest partition whose covered band 2^{J−1} contains every grid
    /// frequency.
    pub fn for_grid(grid: &SymbolGrid) -> Self {
        let mut top = 2;
        while ((1u64 << (top - 1)) as f64) < grid.max_abs_eta() {
            top += 1;
        }
        Self { top }
    }

    pub fn top(&self) -> usize {
        self.top
    }

    pub fn levels(&self) -> usize {
        self.top + 1
    }

    /// Σ_{j≤J} φ_j = 1 exactly for |η| ≤ 2^{J−1}.
    pub fn covered_radius(&self) -> f64 {
        (1u64 << (self.top - 1)) as f64
    }

    pub fn covers(&self, grid: &SymbolGrid) -> bool {
        self.covered_radius() >= grid.max_abs_eta()
    }

    pub fn phi0(eta: f64) -> f64 {
        radial_cutoff(eta.abs(), PHI_INNER, PHI_OUTER)
    }

    /// φ_j(η) = φ₀(2^{−j}η) − φ₀(2^{1−j}η) for j ≥ 1.
    pub fn phi(&self, j: usize, eta: f64) -> f64 {
        if j == 0 {
            return Self::phi0(eta);
        }
        let scale = 0.5f64.powi(j as i32);
        Self::phi0(eta * scale) - Self::phi0(eta * scale * 2.0)
    }

    fn psi0(eta: f64) -> f64 {
        radial_cutoff(eta.abs(), PSI_FLAT, PSI_EDGE)
    }

    fn psi1(eta: f64) -> f64 {
        let r = eta.abs();
        Self::psi0(eta / 2.0) * (1.0 - radial_cutoff(r, PSI1_EDGE, PSI1_FLAT))
    }

    pub fn psi(&self, j: usize, eta: f64) -> f64 {
        match j {
            0 => Self::psi0(eta),
            _ => Self::psi1(eta * 0.5f64.powi(j as i32 - 1)),
        }
    }

    /// Σ_{j=0}^{J} φ_j(η).
    pub fn sum(&self, eta: f64) -> f64 {
        (0..=self.top).map(|j| self.phi(j, eta)).sum()
    }

    /// Indices j with φ_j(η) ≠ 0.
    pub fn active(&self, eta: f64) -> Vec<usize> {
        (0..=self.top).filter(|&j| self.phi(j, eta) != 0.0).collect()
    }
}

/// Frame symbols for a fixed action on ℂⁿ. The sequence space ℓ²(ℕ₀, ℂⁿ) is
/// truncated to (ℂⁿ)^{J+1}; block j occupies fiber indices `j*n..(j+1)*n`.
#[derive(Debug, Clone)]
pub struct FrameSymbols {
    partition: DyadicPartition,
    action: Arc<GroupAction>,
    contract: Vec<Matrix>,
    expand: Vec<Matrix>,
}

impl FrameSymbols {
    pub fn new(partition: DyadicPartition, action: Arc<GroupAction>) -> Result<Self> {
        let mut contract = Vec::with_capacity(partition.levels());
        let mut expand = Vec::with_capacity(partition.levels());
        for j in 0..partition.levels() {
            let scale = 2f64.powi(j as i32);
            contract.push(action.evaluate(1.0 / scale)?);
            expand.push(action.evaluate(scale)?);
        }
        Ok(Self { partition, action, contract, expand })
    }

    pub fn partition(&self) -> &DyadicPartition {
        &self.partition
    }

    pub fn action(&self) -> &Arc<GroupAction> {
        &self.action
    }

    pub fn dim(&self) -> usize {
        self.action.dim()
    }

    pub fn stacked_dim(&self) -> usize {
        self.partition.levels() * self.dim()
    }

    /// Fiber index range of block j (the image of ι_j, the domain of π_j).
    pub fn block_range(&self, j: usize) -> std::ops::Range<usize> {
        let n = self.dim();
        j * n..(j + 1) * n
    }

    /// s(η) = Σ_j φ_j(η) ι_j κ_{2^{−j}} : ℂⁿ → (ℂⁿ)^{J+1}.
    pub fn s(&self, eta: f64) -> Matrix {
        let n = self.dim();
        let mut out = Matrix::zeros(self.stacked_dim(), n);
        for j in self.partition.active(eta) {
            let phi = self.partition.phi(j, eta);
            out.set_block(self.block_range(j).start, 0, &self.contract[j].scale_real(phi));
        }
        out
    }

    /// t(η) = Σ_k ψ_k(η) κ_{2^k} π_k : (ℂⁿ)^{J+1} → ℂⁿ.
    pub fn t(&self, eta: f64) -> Matrix {
        let n = self.dim();
        let mut out = Matrix::zeros(n, self.stacked_dim());
        for k in 0..self.partition.levels() {
            let psi = self.partition.psi(k, eta);
            if psi != 0.0 {
                out.set_block(0, self.block_range(k).start, &self.expand[k].scale_real(psi));
            }
        }
        out
    }
}

fn check_frame_fiber(u: &GridFunction, expected: usize) -> Result<()> {
    if u.dim() != expected {
        return Err(Error::Shape(format!("fiber dimension {} does not match frame ({expected})", u.dim())));
    }
    Ok(())
}

/// S u = F⁻¹ s(η) F u.
pub fn frame_analysis(u: &GridFunction, fs: &FrameSymbols) -> Result<GridFunction> {
    check_frame_fiber(u, fs.dim())?;
    crate::grid::apply_multiplier(u, fs.stacked_dim(), |_, eta| Ok(fs.s(eta)))
}

/// T v = F⁻¹ t(η) F v.
pub fn frame_synthesis(v: &GridFunction, fs: &FrameSymbols) -> Result<GridFunction> {
    check_frame_fiber(v, fs.stacked_dim())?;
    crate::grid::apply_multiplier(v, fs.dim(), |_, eta| Ok(fs.t(eta)))
}

/// Smoothness order s, weight order s₂ and group action for wedge norms.
#[derive(Debug, Clone)]
pub struct WedgeNormConfig {
    pub s: f64,
    pub s2: f64,
    pub action: Arc<GroupAction>,
}

impl WedgeNormConfig {
    pub fn new(s: f64, action: Arc<GroupAction>) -> Self {
        Self { s, s2: 0.0, action }
    }

    pub fn weighted(s: f64, s2: f64, action: Arc<GroupAction>) -> Self {
        Self { s, s2, action }
    }

    /// Same norm expressed with s = 0 and the shifted action κ^{(s)}.
    pub fn shifted_to_zero(&self) -> Self {
        Self { s: 0.0, s2: self.s2, action: Arc::new(self.action.shifted(self.s)) }
    }
}

/// ‖u‖_{𝒲^s} = (∫ ⟨η⟩^{2s} ‖κ⁻¹_{⟨η⟩} û(η)‖² đη)^{1/2} with đη = dη/2π,
/// by the grid quadrature. The weight order `cfg.s2` is ignored here.
pub fn ws_norm_direct(u: &GridFunction, cfg: &WedgeNormConfig) -> Result<f64> {
    check_frame_fiber(u, cfg.action.dim())?;
    let f = forward_ft(u)?;
    let grid = u.grid();
    let mut acc = 0.0;
    for idx in 0..grid.len() {
        let b = jbracket1(grid.eta(idx));
        let w = cfg.action.inverse(b)?.matvec(f.at(idx))?;
        acc += b.powf(2.0 * cfg.s) * w.iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    Ok((acc * grid.d_eta() / (2.0 * PI)).sqrt())
}

/// (Σ_j 2^{2js} ‖κ⁻¹_{2^j} φ_j(D_y) u‖²_{L²})^{1/2}.
pub fn ws_norm_lp(u: &GridFunction, cfg: &WedgeNormConfig, partition: &DyadicPartition) -> Result<f64> {
    check_frame_fiber(u, cfg.action.dim())?;
    let grid = u.grid();
    if !partition.covers(grid) {
        return Err(Error::Coverage(format!(
            "partition covers |η| <= {} but the grid reaches {}",
            partition.covered_radius(),
            grid.max_abs_eta()
        )));
    }
    let f = forward_ft(u)?;
    let mut total = 0.0;
    for j in 0..partition.levels() {
        let mut piece = f.clone();
        let mut nonzero = false;
        for idx in 0..grid.len() {
            let phi = partition.phi(j, grid.eta(idx));
            nonzero |= phi != 0.0;
            for z in piece.at_mut(idx) {
                *z *= phi;
            }
        }
        if !nonzero {
            continue;
        }
        let scale = 2f64.powi(j as i32);
        let kinv = cfg.action.inverse(scale)?;
        let mut band = inverse_ft(&piece)?;
        for k in 0..grid.len() {
            let w = kinv.matvec(band.at(k))?;
            band.at_mut(k).copy_from_slice(&w);
        }
        total += scale.powf(2.0 * cfg.s) * band.l2_norm().powi(2);
    }
    Ok(total.sqrt())
}

/// Number of nonzero LP blocks of u (diagnostic).
pub fn lp_block_count(u: &GridFunction, partition: &DyadicPartition) -> Result<usize> {
    let f = forward_ft(u)?;
    let grid = u.grid();
    // transform round-off is not spectral content
    let floor = 1e-12 * f.values().iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok((0..partition.levels())
        .filter(|&j| {
            (0..grid.len()).any(|idx| {
                partition.phi(j, grid.eta(idx)) != 0.0 && f.at(idx).iter().any(|z| z.norm() > floor)
            })
        })
        .count())
}

/// ‖u‖_{⟨y⟩^{−s₂}𝒲^{s₁}} = ‖⟨y⟩^{s₂} u‖_{𝒲^{s₁}}.
pub fn ws_norm_weighted(u: &GridFunction, cfg: &WedgeNormConfig) -> Result<f64> {
    let grid = *u.grid();
    let weighted = u.map_points(|k| C64::new(jbracket1(grid.y(k)).powf(cfg.s2), 0.0));
    ws_norm_direct(&weighted, cfg)
}

/// Zero function in the stacked frame fiber, for callers that build
/// sequence-valued inputs by hand.
pub fn stacked_zero(grid: SymbolGrid, fs: &FrameSymbols) -> GridFunction {
    GridFunction::zeros(grid, fs.stacked_dim(), Domain::Space)
}
