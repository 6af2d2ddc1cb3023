//! One-parameter multiplicative group actions κ_ϱ = ϱ^A = exp((ln ϱ)·A).

use std::collections::HashMap;
use std::fmt;
use std::sync::RwLock;

use crate::error::{Error, Result};
use crate::linalg::{matrix_exp, Matrix, C64};

/// Upper bound on memoized evaluations per action.
const CACHE_LIMIT: usize = 1 << 14;

/// Group action on ℂⁿ stored by its generator.
pub struct GroupAction {
    generator: Matrix,
    kind: GeneratorKind,
    cache: RwLock<HashMap<u64, Matrix>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum GeneratorKind {
    Zero,
    RealDiagonal,
    General,
}

impl Clone for GroupAction {
    fn clone(&self) -> Self {
        Self {
            generator: self.generator.clone(),
            kind: self.kind,
            cache: RwLock::new(HashMap::new()),
        }
    }
}

impl fmt::Debug for GroupAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupAction").field("generator", &self.generator).finish()
    }
}

impl PartialEq for GroupAction {
    fn eq(&self, other: &Self) -> bool {
        self.generator == other.generator
    }
}

impl GroupAction {
    pub fn new(generator: Matrix) -> Result<Self> {
        if !generator.is_square() {
            return Err(Error::Shape(format!(
                "generator must be square, got {}x{}",
                generator.rows(),
                generator.cols()
            )));
        }
        if !generator.is_finite() {
            return Err(Error::Input("generator has non-finite entries".into()));
        }
        let n = generator.rows();
        let off_diag_zero = (0..n).all(|r| (0..n).all(|c| r == c || generator[(r, c)] == C64::new(0.0, 0.0)));
        let real_diag = (0..n).all(|i| generator[(i, i)].im == 0.0);
        let kind = if generator.max_abs() == 0.0 {
            GeneratorKind::Zero
        } else if off_diag_zero && real_diag {
            GeneratorKind::RealDiagonal
        } else {
            GeneratorKind::General
        };
        Ok(Self { generator, kind, cache: RwLock::new(HashMap::new()) })
    }

    /// κ_ϱ ≡ Id on ℂⁿ.
    pub fn trivial(n: usize) -> Self {
        Self::new(Matrix::zeros(n, n)).expect("zero generator is valid")
    }

    pub fn diagonal(exponents: &[f64]) -> Self {
        Self::new(Matrix::from_real_diag(exponents)).expect("diagonal generator is valid")
    }

    pub fn dim(&self) -> usize {
        self.generator.rows()
    }

    pub fn generator(&self) -> &Matrix {
        &self.generator
    }

    pub fn is_trivial(&self) -> bool {
        self.kind == GeneratorKind::Zero
    }

    /// κ_ϱ. Exactly the identity at ϱ = 1.
    pub fn evaluate(&self, rho: f64) -> Result<Matrix> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::Domain(format!("group parameter must be positive and finite, got {rho}")));
        }
        let n = self.dim();
        if rho == 1.0 || self.kind == GeneratorKind::Zero {
            return Ok(Matrix::identity(n));
        }
        if self.kind == GeneratorKind::RealDiagonal {
            let d: Vec<f64> = (0..n).map(|i| rho.powf(self.generator[(i, i)].re)).collect();
            return Ok(Matrix::from_real_diag(&d));
        }
        let key = rho.to_bits();
        if let Some(m) = self.cache.read().expect("cache lock poisoned").get(&key) {
            return Ok(m.clone());
        }
        let value = matrix_exp(&self.generator.scale_real(rho.ln()))?;
        let mut cache = self.cache.write().expect("cache lock poisoned");
        if cache.len() < CACHE_LIMIT {
            cache.entry(key).or_insert_with(|| value.clone());
        }
        Ok(value)
    }

    /// κ_ϱ⁻¹, evaluated as κ_{1/ϱ}.
    pub fn inverse(&self, rho: f64) -> Result<Matrix> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::Domain(format!("group parameter must be positive and finite, got {rho}")));
        }
        self.evaluate(1.0 / rho)
    }

    /// κ^{(s)}_ϱ = ϱ^{-s} κ_ϱ, i.e. generator A − s·Id.
    pub fn shifted(&self, s: f64) -> GroupAction {
        if s == 0.0 {
            return self.clone();
        }
        let shifted = &self.generator - &Matrix::scalar(self.dim(), C64::new(s, 0.0));
        GroupAction::new(shifted).expect("shift preserves validity")
    }

    /// Empirical growth constants (c, M) with ‖κ_ϱ‖ ≤ c·max(ϱ, 1/ϱ)^M on the
    /// sampled range.
    ///
    /// The exponent is the larger of the least-squares slopes of log‖κ_ϱ‖
    /// against |ln ϱ| on the two branches ϱ ≥ 1 and ϱ ≤ 1 (clamped at zero);
    /// c is then inflated until the bound holds at every sample.
    pub fn growth_bound(&self, rho_range: &[f64]) -> Result<GrowthBound> {
        if rho_range.is_empty() {
            return Err(Error::Parameter("growth_bound needs a nonempty range".into()));
        }
        if rho_range.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(Error::Domain("growth_bound samples must be positive".into()));
        }
        let lo = rho_range.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = rho_range.iter().copied().fold(0.0, f64::max);
        let slack = 1.0 + 1e-9;
        if lo > slack / 16.0 || hi * slack < 16.0 {
            return Err(Error::Parameter(format!(
                "growth_bound range must span [1/16, 16], got [{lo}, {hi}]"
            )));
        }
        let mut samples = Vec::with_capacity(rho_range.len());
        for &rho in rho_range {
            let norm = self.evaluate(rho)?.op_norm();
            samples.push((rho.ln(), norm.ln()));
        }
        // Largest branch slope over the nested windows |ln ϱ| ≤ R, R ≥ ln 16:
        // widening the sample range only adds windows, so M cannot drop.
        let min_radius = 16f64.ln() - 1e-9;
        let slope = |upper: bool| -> f64 {
            let mut pts: Vec<(f64, f64)> = samples
                .iter()
                .filter(|(x, _)| if upper { *x >= 0.0 } else { *x <= 0.0 })
                .map(|&(x, y)| (x.abs(), y))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut best = f64::NEG_INFINITY;
            for end in 2..=pts.len() {
                if pts[end - 1].0 < min_radius {
                    continue;
                }
                if let Some(m) = least_squares_slope(&pts[..end]) {
                    best = best.max(m);
                }
            }
            if best.is_finite() {
                best
            } else {
                0.0
            }
        };
        let exponent = slope(true).max(slope(false)).max(0.0);
        let log_c = samples
            .iter()
            .map(|&(x, y)| y - exponent * x.abs())
            .fold(0.0, f64::max);
        Ok(GrowthBound { c: log_c.exp(), m: exponent })
    }
}

/// Slope of the ordinary least-squares line through `pts`; `None` when the
/// abscissae are degenerate.
pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    least_squares_line(pts).map(|(slope, _)| slope)
}

/// (slope, intercept) of the least-squares line.
pub(crate) fn least_squares_line(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 1e-300 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Constants in ‖κ_ϱ‖ ≤ c·max(ϱ, ϱ⁻¹)^M.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthBound {
    pub c: f64,
    pub m: f64,
}

impl GrowthBound {
    pub fn bound_at(&self, rho: f64) -> f64 {
        self.c * rho.max(1.0 / rho).powf(self.m)
    }
}

/// Geometric sampling of `[lo, hi]` with `count` points.
pub fn geometric_range(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}
