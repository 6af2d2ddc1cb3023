//! Dense τ-quantization on the periodic grid.
//!
//! Op_τ(a) has blocks A[k,l] = (1/N) Σ_m e^{i(y_k − y_l)η_m} a(τy_l + (1−τ)y_k, η_m),
//! laid out point-major: row k·n_out + i, column l·n_in + j. The combined
//! weight h·Δη/2π = 1/N makes identity and multiplication operators exact.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{Domain, GridFunction, SymbolGrid};
use crate::linalg::{svd, Matrix, C64};
use crate::symbols::{DoubleSymbol, Symbol};

/// Largest N·n for dense assembly.
pub const MAX_DENSE_SIZE: usize = 4096;

/// Op_τ(a), Op(a) or a product of such, assembled on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedOperator {
    grid: SymbolGrid,
    n_in: usize,
    n_out: usize,
    matrix: Matrix,
    tau: f64,
    provenance: String,
}

impl QuantizedOperator {
    pub fn from_matrix(grid: SymbolGrid, n_out: usize, n_in: usize, matrix: Matrix, tau: f64, provenance: &str) -> Result<Self> {
        if matrix.rows() != grid.len() * n_out || matrix.cols() != grid.len() * n_in {
            return Err(Error::Shape(format!(
                "operator matrix is {}x{}, grid needs {}x{}",
                matrix.rows(),
                matrix.cols(),
                grid.len() * n_out,
                grid.len() * n_in
            )));
        }
        Ok(Self { grid, n_in, n_out, matrix, tau, provenance: provenance.to_string() })
    }

    pub fn grid(&self) -> &SymbolGrid {
        &self.grid
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        if u.domain() != Domain::Space || u.dim() != self.n_in || *u.grid() != self.grid {
            return Err(Error::Shape(format!(
                "operator expects fiber {} on the space side of its grid, got fiber {}",
                self.n_in,
                u.dim()
            )));
        }
        let v = self.matrix.matvec(u.values())?;
        GridFunction::new(self.grid, self.n_out, Domain::Space, v)
    }

    /// self ∘ other.
    pub fn compose(&self, other: &QuantizedOperator) -> Result<QuantizedOperator> {
        if self.grid != other.grid || self.n_in != other.n_out {
            return Err(Error::Composition("operators live on different grids or fibers".into()));
        }
        let m = self.matrix.matmul(&other.matrix)?;
        Self::from_matrix(
            self.grid,
            self.n_out,
            other.n_in,
            m,
            f64::NAN,
            &format!("{}∘{}", self.provenance, other.provenance),
        )
    }

    /// L²(grid)-adjoint: the conjugate transpose (the weight h cancels).
    pub fn adjoint(&self) -> QuantizedOperator {
        Self {
            grid: self.grid,
            n_in: self.n_out,
            n_out: self.n_in,
            matrix: self.matrix.adjoint(),
            tau: f64::NAN,
            provenance: format!("({})^*", self.provenance),
        }
    }

    /// Adjoint for the pairings ⟨u, Jv⟩ and ⟨u, J̃v⟩ applied pointwise:
    /// (I⊗J)⁻¹ A^H (I⊗J̃).
    pub fn pairing_adjoint(&self, j: &Matrix, j_tilde: &Matrix) -> Result<QuantizedOperator> {
        if j.rows() != self.n_in || !j.is_square() || j_tilde.rows() != self.n_out || !j_tilde.is_square() {
            return Err(Error::Pairing(format!(
                "pairings must be {0}x{0} and {1}x{1}",
                self.n_in, self.n_out
            )));
        }
        let j_inv = j.inverse().map_err(|e| Error::Pairing(format!("J is not invertible: {e}")))?;
        let n = self.grid.len();
        let adj = self.matrix.adjoint();
        let mut m = Matrix::zeros(adj.rows(), adj.cols());
        for k in 0..n {
            for l in 0..n {
                let b = adj.block(k * self.n_in, l * self.n_out, self.n_in, self.n_out);
                m.set_block(k * self.n_in, l * self.n_out, &j_inv.matmul(&b)?.matmul(j_tilde)?);
            }
        }
        Ok(Self {
            grid: self.grid,
            n_in: self.n_out,
            n_out: self.n_in,
            matrix: m,
            tau: f64::NAN,
            provenance: format!("({})^#", self.provenance),
        })
    }

    /// ‖A‖_{L²→L²}.
    pub fn op_norm(&self) -> f64 {
        self.matrix.op_norm()
    }
}

fn phase_table(n: usize) -> Vec<C64> {
    (0..n).map(|j| C64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64)).collect()
}

fn check_grid_size(grid: &SymbolGrid, n_out: usize, n_in: usize) -> Result<()> {
    let n = grid.len();
    if n * n_out.max(n_in) > MAX_DENSE_SIZE {
        return Err(Error::Shape(format!(
            "dense assembly of {}x{} blocks on {} points exceeds the size cap",
            n_out, n_in, n
        )));
    }
    Ok(())
}

/// Σ_m ω^{d·m} s_m / N for a row of symbol values s_m = a(z, η_m).
fn accumulate(block: &mut [C64], row: &[Matrix], grid: &SymbolGrid, phases: &[C64], d: i64) {
    let n = grid.len() as i64;
    let scale = 1.0 / n as f64;
    for (idx, s) in row.iter().enumerate() {
        let p = phases[(d * grid.mode(idx)).rem_euclid(n) as usize] * scale;
        for (b, v) in block.iter_mut().zip(s.as_slice()) {
            *b += p * v;
        }
    }
}

fn write_block(m: &mut Matrix, k: usize, l: usize, n_out: usize, n_in: usize, block: &[C64]) {
    for i in 0..n_out {
        for j in 0..n_in {
            m[(k * n_out + i, l * n_in + j)] = block[i * n_in + j];
        }
    }
}

/// Op_τ(a) on the grid. Sample points τy_l + (1−τ)y_k may leave [−L, L);
/// no wrapping is applied. Symbol rows are evaluated once per distinct point.
pub fn op_tau(a: &Symbol, tau: f64, grid: &SymbolGrid) -> Result<QuantizedOperator> {
    if !tau.is_finite() {
        return Err(Error::Parameter(format!("τ must be finite, got {tau}")));
    }
    let (n_out, n_in) = (a.n_out(), a.n_in());
    check_grid_size(grid, n_out, n_in)?;
    let n = grid.len();
    let phases = phase_table(n);

    let mut order: Vec<u64> = Vec::new();
    let mut groups: HashMap<u64, Vec<(usize, usize)>> = HashMap::new();
    for k in 0..n {
        for l in 0..n {
            let z = if tau == 0.0 {
                grid.y(k)
            } else if tau == 1.0 {
                grid.y(l)
            } else {
                tau * grid.y(l) + (1.0 - tau) * grid.y(k)
            };
            // normalize −0.0
            let key = (z + 0.0).to_bits();
            groups
                .entry(key)
                .or_insert_with(|| {
                    order.push(key);
                    Vec::new()
                })
                .push((k, l));
        }
    }

    let mut m = Matrix::zeros(n * n_out, n * n_in);
    let mut block = vec![C64::new(0.0, 0.0); n_out * n_in];
    for key in order {
        let z = f64::from_bits(key);
        let row = (0..n).map(|idx| a.eval(z, grid.eta(idx))).collect::<Result<Vec<_>>>()?;
        for &(k, l) in &groups[&key] {
            block.iter_mut().for_each(|b| *b = C64::new(0.0, 0.0));
            accumulate(&mut block, &row, grid, &phases, k as i64 - l as i64);
            write_block(&mut m, k, l, n_out, n_in, &block);
        }
    }
    QuantizedOperator::from_matrix(*grid, n_out, n_in, m, tau, &format!("Op_{tau}({})", a.label()))
}

/// Op(a) for a double symbol: A[k,l] = (1/N) Σ_m e^{i(y_k−y_l)η_m} a(y_k, y_l, η_m).
pub fn op_double(a: &DoubleSymbol, grid: &SymbolGrid) -> Result<QuantizedOperator> {
    let (n_out, n_in) = (a.n_out(), a.n_in());
    check_grid_size(grid, n_out, n_in)?;
    let n = grid.len();
    let phases = phase_table(n);
    let mut m = Matrix::zeros(n * n_out, n * n_in);
    let mut values: Vec<(Vec<Vec<Matrix>>, Vec<Vec<Matrix>>)> = Vec::new();
    for (l, r) in a.terms() {
        let table = |s: &Symbol| -> Result<Vec<Vec<Matrix>>> {
            (0..n).map(|k| (0..n).map(|idx| s.eval(grid.y(k), grid.eta(idx))).collect()).collect()
        };
        values.push((table(l)?, table(r)?));
    }
    let mut block = vec![C64::new(0.0, 0.0); n_out * n_in];
    let mut row = vec![Matrix::zeros(n_out, n_in); n];
    for k in 0..n {
        for l in 0..n {
            for (idx, slot) in row.iter_mut().enumerate() {
                let mut acc = Matrix::zeros(n_out, n_in);
                for (lt, rt) in &values {
                    acc.axpy(C64::new(1.0, 0.0), &lt[k][idx].matmul(&rt[l][idx])?);
                }
                *slot = acc;
            }
            block.iter_mut().for_each(|b| *b = C64::new(0.0, 0.0));
            accumulate(&mut block, &row, grid, &phases, k as i64 - l as i64);
            write_block(&mut m, k, l, n_out, n_in, &block);
        }
    }
    QuantizedOperator::from_matrix(*grid, n_out, n_in, m, f64::NAN, "Op(double)")
}

/// Discrete Schwartz kernel k(y_k, y_l) of Op₀(a).
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    grid: SymbolGrid,
    n_out: usize,
    n_in: usize,
    values: Vec<Matrix>,
}

impl Kernel {
    /// Kernel from values k(y_k, y_l), row-major in (k, l).
    pub fn from_values(grid: SymbolGrid, values: Vec<Matrix>) -> Result<Self> {
        let n = grid.len();
        if values.len() != n * n || values.is_empty() {
            return Err(Error::Shape(format!("kernel needs {} values, got {}", n * n, values.len())));
        }
        let (n_out, n_in) = (values[0].rows(), values[0].cols());
        if values.iter().any(|v| v.rows() != n_out || v.cols() != n_in) {
            return Err(Error::Shape("kernel values have mixed shapes".into()));
        }
        Ok(Self { grid, n_out, n_in, values })
    }

    pub fn grid(&self) -> &SymbolGrid {
        &self.grid
    }

    pub fn at(&self, k: usize, l: usize) -> &Matrix {
        &self.values[k * self.grid.len() + l]
    }

    /// (K u)(y_k) = h Σ_l k(y_k, y_l) u(y_l), as a dense matrix.
    pub fn integral_operator(&self) -> Matrix {
        let n = self.grid.len();
        let h = self.grid.h();
        let mut m = Matrix::zeros(n * self.n_out, n * self.n_in);
        for k in 0..n {
            for l in 0..n {
                m.set_block(k * self.n_out, l * self.n_in, &self.at(k, l).scale_real(h));
            }
        }
        m
    }
}

/// k[k,l] = (Δη/2π) Σ_m e^{i(y_k−y_l)η_m} a(y_k, η_m). Accuracy as an
/// approximation of the continuum kernel degrades for symbols that are not
/// integrable over the grid band.
pub fn kernel(a: &Symbol, grid: &SymbolGrid) -> Result<Kernel> {
    let op = op_tau(a, 0.0, grid)?;
    let n = grid.len();
    let (n_out, n_in) = (a.n_out(), a.n_in());
    let inv_h = 1.0 / grid.h();
    let mut values = Vec::with_capacity(n * n);
    for k in 0..n {
        for l in 0..n {
            values.push(op.matrix().block(k * n_out, l * n_in, n_out, n_in).scale_real(inv_h));
        }
    }
    Ok(Kernel { grid: *grid, n_out, n_in, values })
}

/// Schur test: max(sup_k h Σ_l ‖k[k,l]‖, sup_l h Σ_k ‖k[k,l]‖) ≥ ‖K‖_{L²→L²}.
pub fn schur_bound(k: &Kernel) -> f64 {
    let n = k.grid.len();
    let h = k.grid.h();
    let norms: Vec<f64> = k.values.iter().map(Matrix::op_norm).collect();
    let row = (0..n).map(|i| h * (0..n).map(|j| norms[i * n + j]).sum::<f64>()).fold(0.0, f64::max);
    let col = (0..n).map(|j| h * (0..n).map(|i| norms[i * n + j]).sum::<f64>()).fold(0.0, f64::max);
    row.max(col)
}

/// Orthonormal family of functions concentrated well inside the grid in both
/// y and η, used to measure operator discrepancies away from the periodic
/// boundary and the band edge, where the grid cannot represent the continuum
/// commutator [D_y, y] = −i.
#[derive(Debug, Clone)]
pub struct TestSpace {
    basis: Matrix,
    count: usize,
    scale: f64,
}

impl TestSpace {
    /// Hermite functions H_j(y/s), j < count, tensored with the fiber basis,
    /// orthonormalized on the grid. The default scale balances y- and
    /// η-extent: s = (L/η_max)^{1/2}.
    pub fn hermite(grid: &SymbolGrid, fiber: usize, count: usize, scale: Option<f64>) -> Result<Self> {
        Self::wave_packets(grid, fiber, count, scale, 0.0)
    }

    /// Hermite functions modulated by e^{iη₀y}: concentrated near frequency
    /// η₀, where symbol expansions in powers of ⟨η⟩^{−(ϱ−δ)} are effective.
    pub fn wave_packets(grid: &SymbolGrid, fiber: usize, count: usize, scale: Option<f64>, eta0: f64) -> Result<Self> {
        if count == 0 || fiber == 0 {
            return Err(Error::Parameter("test space needs a positive count and fiber".into()));
        }
        let s = scale.unwrap_or_else(|| (grid.half_width() / grid.max_abs_eta()).sqrt());
        let n = grid.len();
        if count * fiber > n * fiber / 2 {
            return Err(Error::Parameter(format!("{count} test functions do not fit a grid of {n} points")));
        }
        let mut cols: Vec<Vec<C64>> = Vec::with_capacity(count * fiber);
        let mut herm = vec![vec![0.0; n]; count];
        for k in 0..n {
            let x = grid.y(k) / s;
            let mut prev = 0.0;
            let mut cur = PI.powf(-0.25) * (-0.5 * x * x).exp();
            for (j, row) in herm.iter_mut().enumerate() {
                row[k] = cur;
                let next = (2.0 / (j + 1) as f64).sqrt() * x * cur - (j as f64 / (j + 1) as f64).sqrt() * prev;
                prev = cur;
                cur = next;
            }
        }
        for h in &herm {
            for i in 0..fiber {
                let mut v = vec![C64::new(0.0, 0.0); n * fiber];
                for k in 0..n {
                    v[k * fiber + i] = C64::from_polar(h[k], eta0 * grid.y(k));
                }
                cols.push(v);
            }
        }
        // modified Gram–Schmidt, twice for stability
        for _ in 0..2 {
            for c in 0..cols.len() {
                for p in 0..c {
                    let proj: C64 = cols[p].iter().zip(&cols[c]).map(|(a, b)| a.conj() * b).sum();
                    let (head, tail) = cols.split_at_mut(c);
                    for (x, y) in tail[0].iter_mut().zip(&head[p]) {
                        *x -= proj * y;
                    }
                }
                let norm = cols[c].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if norm < 1e-12 {
                    return Err(Error::Parameter("Hermite test functions are not resolved by the grid".into()));
                }
                cols[c].iter_mut().for_each(|z| *z /= norm);
            }
        }
        let rows = n * fiber;
        let mut basis = Matrix::zeros(rows, cols.len());
        for (c, v) in cols.iter().enumerate() {
            for (r, z) in v.iter().enumerate() {
                basis[(r, c)] = *z;
            }
        }
        Ok(Self { basis, count, scale: s })
    }

    /// Default family: eight Hermite functions at the balanced scale.
    pub fn standard(grid: &SymbolGrid, fiber: usize) -> Result<Self> {
        Self::hermite(grid, fiber, 8, None)
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// sup over unit u in the test space of ‖M u‖.
    pub fn restricted_norm(&self, m: &Matrix) -> Result<f64> {
        Ok(svd(&m.matmul(&self.basis)?)?.largest())
    }

    /// Restricted norm of A − B.
    pub fn discrepancy(&self, a: &QuantizedOperator, b: &QuantizedOperator) -> Result<f64> {
        if a.grid != b.grid || a.n_in != b.n_in || a.n_out != b.n_out {
            return Err(Error::Shape("compared operators have different shapes".into()));
        }
        self.restricted_norm(&(&a.matrix - &b.matrix))
    }
}

/// Matrix as CSV: header `row,col,re,im`, one entry per line, row-major,
/// reals in shortest round-trip form.
pub fn write_matrix_csv<W: std::io::Write>(m: &Matrix, mut w: W) -> std::io::Result<()> {
    writeln!(w, "row,col,re,im")?;
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            let z = m[(r, c)];
            writeln!(w, "{r},{c},{},{}", format_real(z.re), format_real(z.im))?;
        }
    }
    Ok(())
}

/// Shortest round-trip decimal; integral values without a trailing `.0`.
pub fn format_real(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_finite() && x.fract() == 0.0 && x.abs() < 1e15 {
        return format!("{}", x as i64);
    }
    format!("{x:?}")
}
