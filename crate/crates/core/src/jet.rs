//! Truncated bivariate Taylor jets in (y, η).
//!
//! A jet of order (ny, ne) at (y₀, η₀) stores c[i][j] = ∂_y^i ∂_η^j f / (i! j!)
//! for i ≤ ny, j ≤ ne. Products truncate rectangularly, which is exact for
//! every coefficient that is kept. These give exact derivatives of the
//! builtin symbol families to all orders.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, C64};

fn idx(ne: usize, i: usize, j: usize) -> usize {
    i * (ne + 1) + j
}

/// Scalar (complex) jet.
#[derive(Debug, Clone, PartialEq)]
pub struct SJet {
    ny: usize,
    ne: usize,
    c: Vec<C64>,
}

impl SJet {
    pub fn zeros(ny: usize, ne: usize) -> Self {
        Self { ny, ne, c: vec![C64::new(0.0, 0.0); (ny + 1) * (ne + 1)] }
    }

    pub fn constant(ny: usize, ne: usize, v: C64) -> Self {
        let mut j = Self::zeros(ny, ne);
        j.c[0] = v;
        j
    }

    /// The coordinate function y at y₀.
    pub fn var_y(ny: usize, ne: usize, y0: f64) -> Self {
        let mut j = Self::constant(ny, ne, C64::new(y0, 0.0));
        if ny >= 1 {
            j.c[idx(ne, 1, 0)] = C64::new(1.0, 0.0);
        }
        j
    }

    /// The coordinate function η at η₀.
    pub fn var_eta(ny: usize, ne: usize, eta0: f64) -> Self {
        let mut j = Self::constant(ny, ne, C64::new(eta0, 0.0));
        if ne >= 1 {
            j.c[idx(ne, 0, 1)] = C64::new(1.0, 0.0);
        }
        j
    }

    pub fn order(&self) -> (usize, usize) {
        (self.ny, self.ne)
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.c[idx(self.ne, i, j)]
    }

    pub fn value(&self) -> C64 {
        self.c[0]
    }

    pub fn add(&self, other: &SJet) -> SJet {
        let c = self.c.iter().zip(&other.c).map(|(a, b)| a + b).collect();
        SJet { c, ..*self }
    }

    pub fn add_const(&self, v: C64) -> SJet {
        let mut out = self.clone();
        out.c[0] += v;
        out
    }

    pub fn scale(&self, s: C64) -> SJet {
        SJet { c: self.c.iter().map(|a| a * s).collect(), ..*self }
    }

    pub fn mul(&self, other: &SJet) -> SJet {
        let (ny, ne) = (self.ny, self.ne);
        let mut out = SJet::zeros(ny, ne);
        for i1 in 0..=ny {
            for j1 in 0..=ne {
                let a = self.c[idx(ne, i1, j1)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for i2 in 0..=ny - i1 {
                    for j2 in 0..=ne - j1 {
                        out.c[idx(ne, i1 + i2, j1 + j2)] += a * other.c[idx(ne, i2, j2)];
                    }
                }
            }
        }
        out
    }

    pub fn powi(&self, k: u32) -> SJet {
        let mut out = SJet::constant(self.ny, self.ne, C64::new(1.0, 0.0));
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// g∘f given g^{(k)}(f(y₀,η₀)) for k = 0..=ny+ne.
    pub fn compose(&self, derivs: &[C64]) -> SJet {
        let top = self.ny + self.ne;
        debug_assert!(derivs.len() > top);
        let delta = self.add_const(-self.c[0]);
        let mut fact = vec![1.0; top + 1];
        for k in 1..=top {
            fact[k] = fact[k - 1] * k as f64;
        }
        let mut out = SJet::constant(self.ny, self.ne, derivs[top] / fact[top]);
        for k in (0..top).rev() {
            out = out.mul(&delta).add_const(derivs[k] / fact[k]);
        }
        out
    }

    /// Real power g(u) = u^p composed with a jet of positive constant term.
    pub fn powf(&self, p: f64) -> SJet {
        let u0 = self.c[0].re;
        let top = self.ny + self.ne;
        let mut derivs = Vec::with_capacity(top + 1);
        let mut coef = 1.0;
        for k in 0..=top {
            derivs.push(C64::new(coef * u0.powf(p - k as f64), 0.0));
            coef *= p - k as f64;
        }
        self.compose(&derivs)
    }

    pub fn exp(&self) -> SJet {
        let e = self.c[0].exp();
        self.compose(&vec![e; self.ny + self.ne + 1])
    }

    /// Natural logarithm of a jet with positive real constant term.
    pub fn ln(&self) -> SJet {
        let u0 = self.c[0].re;
        let top = self.ny + self.ne;
        let mut derivs = vec![C64::new(u0.ln(), 0.0)];
        let mut fact = 1.0;
        for k in 1..=top {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            derivs.push(C64::new(sign * fact * u0.powi(-(k as i32)), 0.0));
            fact *= k as f64;
        }
        self.compose(&derivs)
    }

    /// ⟨f⟩ = (1 + f²)^{1/2} raised to p, i.e. (1 + f²)^{p/2}.
    pub fn jbracket_pow(&self, p: f64) -> SJet {
        self.mul(self).add_const(C64::new(1.0, 0.0)).powf(p / 2.0)
    }
}

/// Matrix-valued jet.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    ny: usize,
    ne: usize,
    rows: usize,
    cols: usize,
    c: Vec<Matrix>,
}

impl Jet {
    pub fn zeros(ny: usize, ne: usize, rows: usize, cols: usize) -> Self {
        Self { ny, ne, rows, cols, c: vec![Matrix::zeros(rows, cols); (ny + 1) * (ne + 1)] }
    }

    pub fn constant(ny: usize, ne: usize, m: &Matrix) -> Self {
        let mut j = Self::zeros(ny, ne, m.rows(), m.cols());
        j.c[0] = m.clone();
        j
    }

    /// Jet from explicit coefficients c[i][j], listed row-major in (i, j).
    pub fn from_coeffs(ny: usize, ne: usize, coeffs: Vec<Matrix>) -> Result<Self> {
        if coeffs.len() != (ny + 1) * (ne + 1) {
            return Err(Error::Shape(format!(
                "jet of order ({ny}, {ne}) needs {} coefficients, got {}",
                (ny + 1) * (ne + 1),
                coeffs.len()
            )));
        }
        let (rows, cols) = (coeffs[0].rows(), coeffs[0].cols());
        if coeffs.iter().any(|m| m.rows() != rows || m.cols() != cols) {
            return Err(Error::Shape("jet coefficients have inconsistent shapes".into()));
        }
        Ok(Self { ny, ne, rows, cols, c: coeffs })
    }

    /// s(y,η)·M for a scalar jet s and a constant matrix M.
    pub fn from_scalar(s: &SJet, m: &Matrix) -> Self {
        let (ny, ne) = s.order();
        Self { ny, ne, rows: m.rows(), cols: m.cols(), c: s.c.iter().map(|&v| m.scale(v)).collect() }
    }

    pub fn order(&self) -> (usize, usize) {
        (self.ny, self.ne)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn coeff(&self, i: usize, j: usize) -> &Matrix {
        &self.c[idx(self.ne, i, j)]
    }

    pub fn value(&self) -> &Matrix {
        &self.c[0]
    }

    pub fn into_value(mut self) -> Matrix {
        self.c.swap_remove(0)
    }

    /// ∂_η^α D_y^β f at the base point, D_y = −i∂_y.
    pub fn partial(&self, alpha: usize, beta: usize) -> Matrix {
        let factor = C64::new(0.0, -1.0).powu(beta as u32) * (factorial(alpha) * factorial(beta));
        self.coeff(beta, alpha).scale(factor)
    }

    pub fn add_assign(&mut self, other: &Jet) {
        for (a, b) in self.c.iter_mut().zip(&other.c) {
            a.axpy(C64::new(1.0, 0.0), b);
        }
    }

    pub fn axpy(&mut self, s: C64, other: &Jet) {
        for (a, b) in self.c.iter_mut().zip(&other.c) {
            a.axpy(s, b);
        }
    }

    pub fn scale(&self, s: C64) -> Jet {
        self.map(|m| m.scale(s))
    }

    pub fn map(&self, f: impl Fn(&Matrix) -> Matrix) -> Jet {
        let c: Vec<Matrix> = self.c.iter().map(f).collect();
        let (rows, cols) = (c[0].rows(), c[0].cols());
        Jet { ny: self.ny, ne: self.ne, rows, cols, c }
    }

    /// Pointwise adjoint; Taylor coefficients in real variables commute with *.
    pub fn adjoint(&self) -> Jet {
        self.map(Matrix::adjoint)
    }

    pub fn mul_scalar(&self, s: &SJet) -> Jet {
        let (ny, ne) = (self.ny, self.ne);
        let mut out = Jet::zeros(ny, ne, self.rows, self.cols);
        for i1 in 0..=ny {
            for j1 in 0..=ne {
                let a = s.c[idx(ne, i1, j1)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for i2 in 0..=ny - i1 {
                    for j2 in 0..=ne - j1 {
                        out.c[idx(ne, i1 + i2, j1 + j2)].axpy(a, &self.c[idx(ne, i2, j2)]);
                    }
                }
            }
        }
        out
    }

    /// Pointwise matrix product self·other.
    pub fn mul(&self, other: &Jet) -> Result<Jet> {
        if self.cols != other.rows || self.order() != other.order() {
            return Err(Error::Shape(format!(
                "jet product {}x{} · {}x{} at orders {:?}, {:?}",
                self.rows,
                self.cols,
                other.rows,
                other.cols,
                self.order(),
                other.order()
            )));
        }
        let (ny, ne) = (self.ny, self.ne);
        let mut out = Jet::zeros(ny, ne, self.rows, other.cols);
        for i1 in 0..=ny {
            for j1 in 0..=ne {
                let a = &self.c[idx(ne, i1, j1)];
                if a.max_abs() == 0.0 {
                    continue;
                }
                for i2 in 0..=ny - i1 {
                    for j2 in 0..=ne - j1 {
                        let p = a.matmul(&other.c[idx(ne, i2, j2)])?;
                        out.c[idx(ne, i1 + i2, j1 + j2)].axpy(C64::new(1.0, 0.0), &p);
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn left_mul(&self, m: &Matrix) -> Result<Jet> {
        let c = self.c.iter().map(|x| m.matmul(x)).collect::<Result<Vec<_>>>()?;
        Jet::from_coeffs(self.ny, self.ne, c)
    }

    pub fn right_mul(&self, m: &Matrix) -> Result<Jet> {
        let c = self.c.iter().map(|x| x.matmul(m)).collect::<Result<Vec<_>>>()?;
        Jet::from_coeffs(self.ny, self.ne, c)
    }

    /// Jet of ∂_y^dy ∂_η^de f, of order (ny − dy, ne − de).
    pub fn differentiate(&self, dy: usize, de: usize) -> Jet {
        assert!(dy <= self.ny && de <= self.ne, "differentiation beyond jet order");
        let (ny, ne) = (self.ny - dy, self.ne - de);
        let mut c = Vec::with_capacity((ny + 1) * (ne + 1));
        for i in 0..=ny {
            let fy = falling(i + dy, dy);
            for j in 0..=ne {
                let f = fy * falling(j + de, de);
                c.push(self.coeff(i + dy, j + de).scale_real(f));
            }
        }
        Jet { ny, ne, rows: self.rows, cols: self.cols, c }
    }

    pub fn truncate(&self, ny: usize, ne: usize) -> Jet {
        assert!(ny <= self.ny && ne <= self.ne);
        let mut c = Vec::with_capacity((ny + 1) * (ne + 1));
        for i in 0..=ny {
            for j in 0..=ne {
                c.push(self.coeff(i, j).clone());
            }
        }
        Jet { ny, ne, rows: self.rows, cols: self.cols, c }
    }

    /// Σ_k M_k δ^k / k! where δ = s − s(y₀,η₀) and M_k = Φ^{(k)}(s(y₀,η₀)).
    pub fn compose_series(s: &SJet, mats: &[Matrix]) -> Jet {
        let (ny, ne) = s.order();
        let top = ny + ne;
        assert!(mats.len() > top);
        let delta = s.add_const(-s.value());
        let mut out = Jet::constant(ny, ne, &mats[top].scale_real(1.0 / factorial(top)));
        for k in (0..top).rev() {
            out = out.mul_scalar(&delta);
            out.c[0].axpy(C64::new(1.0 / factorial(k), 0.0), &mats[k]);
        }
        out
    }
}

/// k! as a float (exact for k ≤ 22).
pub fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// n!/(n−k)!
fn falling(n: usize, k: usize) -> f64 {
    ((n - k + 1)..=n).fold(1.0, |acc, i| acc * i as f64)
}
