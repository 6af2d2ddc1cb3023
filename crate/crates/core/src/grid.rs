//! Truncated uniform grid on [−L, L) with its matched frequency grid, and the
//! discrete Fourier transform normalized to approximate the continuous one.
//!
//! Conventions:
//! - `y_k = −L + k·h`, `h = 2L/N`, `k = 0..N`
//! - `η_m = (π/L)·m`, `m = −N/2..N/2`, stored at index `m + N/2`
//! - forward: `û(η_m) = h Σ_k e^{−i y_k η_m} u(y_k)`
//! - inverse: `u(y_k) = (Δη/2π) Σ_m e^{i y_k η_m} û(η_m)`
//!
//! Everything acts on the torus of circumference 2L.

use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};

/// ⟨v⟩ = (1 + |v|²)^{1/2}.
pub fn jbracket(v: &[f64]) -> f64 {
    (1.0 + v.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

/// ⟨x⟩ for a scalar.
#[inline]
pub fn jbracket1(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// Uniform grid in y (q = 1) with matched frequency grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolGrid {
    half_width: f64,
    points: usize,
}

impl SymbolGrid {
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::Parameter(format!("grid half-width must be positive, got {half_width}")));
        }
        if points < 4 || !points.is_power_of_two() {
            return Err(Error::Parameter(format!("grid size must be a power of two >= 4, got {points}")));
        }
        Ok(Self { half_width, points })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Spatial spacing h = 2L/N.
    pub fn h(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    /// Frequency spacing Δη = π/L.
    pub fn d_eta(&self) -> f64 {
        PI / self.half_width
    }

    pub fn y(&self, k: usize) -> f64 {
        -self.half_width + k as f64 * self.h()
    }

    /// Signed frequency index m for storage index `idx`.
    pub fn mode(&self, idx: usize) -> i64 {
        idx as i64 - (self.points / 2) as i64
    }

    pub fn eta(&self, idx: usize) -> f64 {
        self.d_eta() * self.mode(idx) as f64
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.y(k)).collect()
    }

    pub fn etas(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.eta(i)).collect()
    }

    /// Largest |η_m| on the grid, attained at m = −N/2.
    pub fn max_abs_eta(&self) -> f64 {
        self.d_eta() * (self.points / 2) as f64
    }

    /// Same domain with twice as many points.
    pub fn refined(&self) -> Self {
        Self { half_width: self.half_width, points: self.points * 2 }
    }
}

/// Which side of the Fourier transform a [`GridFunction`] lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Space,
    Frequency,
}

/// Fiber-valued function sampled on a grid. Values are point-major:
/// `values[k * dim + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: SymbolGrid,
    dim: usize,
    domain: Domain,
    values: Vec<C64>,
}

impl GridFunction {
    pub fn new(grid: SymbolGrid, dim: usize, domain: Domain, values: Vec<C64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("fiber dimension must be positive".into()));
        }
        if values.len() != grid.len() * dim {
            return Err(Error::Shape(format!(
                "expected {} values for {} points with fiber {dim}, got {}",
                grid.len() * dim,
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Input("grid function has non-finite values".into()));
        }
        Ok(Self { grid, dim, domain, values })
    }

    pub fn zeros(grid: SymbolGrid, dim: usize, domain: Domain) -> Self {
        Self { grid, dim, domain, values: vec![ZERO; grid.len() * dim] }
    }

    /// Samples `f(y_k)` (space side).
    pub fn from_fn(grid: SymbolGrid, dim: usize, f: impl Fn(f64) -> Vec<C64>) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len() * dim);
        for k in 0..grid.len() {
            let v = f(grid.y(k));
            if v.len() != dim {
                return Err(Error::Shape(format!("sample of length {} for fiber {dim}", v.len())));
            }
            values.extend(v);
        }
        Self::new(grid, dim, Domain::Space, values)
    }

    pub fn grid(&self) -> &SymbolGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    /// Fiber vector at point (or frequency) index `k`.
    pub fn at(&self, k: usize) -> &[C64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn at_mut(&mut self, k: usize) -> &mut [C64] {
        &mut self.values[k * self.dim..(k + 1) * self.dim]
    }

    /// Quadrature norm: `sqrt(h Σ|u|²)` on the space side,
    /// `sqrt(Δη/2π Σ|û|²)` on the frequency side. The two agree by Parseval.
    pub fn l2_norm(&self) -> f64 {
        let w = match self.domain {
            Domain::Space => self.grid.h(),
            Domain::Frequency => self.grid.d_eta() / (2.0 * PI),
        };
        (w * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Weighted inner product `h Σ ⟨u_k, v_k⟩` (conjugate-linear in `other`).
    pub fn inner(&self, other: &GridFunction) -> Result<C64> {
        if self.dim != other.dim || self.grid != other.grid || self.domain != other.domain {
            return Err(Error::Shape("inner product of incompatible grid functions".into()));
        }
        let w = match self.domain {
            Domain::Space => self.grid.h(),
            Domain::Frequency => self.grid.d_eta() / (2.0 * PI),
        };
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum::<C64>() * w)
    }

    pub fn axpy(&mut self, s: C64, other: &GridFunction) {
        assert_eq!(self.values.len(), other.values.len());
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Pointwise multiplication by a scalar function of the sample coordinate.
    pub fn map_points(&self, f: impl Fn(usize) -> C64) -> GridFunction {
        let mut out = self.clone();
        for k in 0..self.grid.len() {
            let s = f(k);
            for z in out.at_mut(k) {
                *z *= s;
            }
        }
        out
    }
}

fn sign(mode: i64) -> f64 {
    if mode.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Discrete Fourier transform, componentwise in the fiber.
pub fn forward_ft(u: &GridFunction) -> Result<GridFunction> {
    if u.domain != Domain::Space {
        return Err(Error::Input("forward_ft expects a space-side function".into()));
    }
    let grid = u.grid;
    let n = grid.len();
    let h = grid.h();
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut out = GridFunction::zeros(grid, u.dim, Domain::Frequency);
    let mut buf = vec![ZERO; n];
    for c in 0..u.dim {
        for (k, b) in buf.iter_mut().enumerate() {
            *b = u.values[k * u.dim + c];
        }
        fft.process(&mut buf);
        for idx in 0..n {
            let m = grid.mode(idx);
            let j = m.rem_euclid(n as i64) as usize;
            out.values[idx * u.dim + c] = buf[j] * (h * sign(m));
        }
    }
    Ok(out)
}

/// Inverse of [`forward_ft`].
pub fn inverse_ft(v: &GridFunction) -> Result<GridFunction> {
    if v.domain != Domain::Frequency {
        return Err(Error::Input("inverse_ft expects a frequency-side function".into()));
    }
    let grid = v.grid;
    let n = grid.len();
    let w = 1.0 / (n as f64 * grid.h());
    let fft = FftPlanner::new().plan_fft_inverse(n);
    let mut out = GridFunction::zeros(grid, v.dim, Domain::Space);
    let mut buf = vec![ZERO; n];
    for c in 0..v.dim {
        for idx in 0..n {
            let m = grid.mode(idx);
            let j = m.rem_euclid(n as i64) as usize;
            buf[j] = v.values[idx * v.dim + c] * sign(m);
        }
        fft.process(&mut buf);
        for (k, b) in buf.iter().enumerate() {
            out.values[k * v.dim + c] = b * w;
        }
    }
    Ok(out)
}

/// D_y^α u with D = −i∂_y, computed as a Fourier multiplier by η^α. The
/// unmatched mode m = −N/2 is zeroed for α ≥ 1.
pub fn spectral_derivative(u: &GridFunction, alpha: u32) -> Result<GridFunction> {
    if alpha == 0 {
        return Ok(u.clone());
    }
    let mut f = forward_ft(u)?;
    let grid = u.grid;
    for idx in 0..grid.len() {
        let factor = if idx == 0 { 0.0 } else { grid.eta(idx).powi(alpha as i32) };
        for z in f.at_mut(idx) {
            *z *= factor;
        }
    }
    inverse_ft(&f)
}

/// Applies a pointwise-in-η matrix multiplier `m(η)` (fiber `dim_in` →
/// `dim_out`) to `u`: `inverse_ft(m(η)·forward_ft(u))`.
pub fn apply_multiplier(
    u: &GridFunction,
    dim_out: usize,
    multiplier: impl Fn(usize, f64) -> Result<crate::linalg::Matrix>,
) -> Result<GridFunction> {
    let f = forward_ft(u)?;
    let grid = u.grid;
    let mut out = GridFunction::zeros(grid, dim_out, Domain::Frequency);
    for idx in 0..grid.len() {
        let m = multiplier(idx, grid.eta(idx))?;
        if m.rows() != dim_out || m.cols() != u.dim {
            return Err(Error::Shape(format!(
                "multiplier is {}x{}, expected {dim_out}x{}",
                m.rows(),
                m.cols(),
                u.dim
            )));
        }
        let v = m.matvec(f.at(idx))?;
        out.at_mut(idx).copy_from_slice(&v);
    }
    inverse_ft(&out)
}
