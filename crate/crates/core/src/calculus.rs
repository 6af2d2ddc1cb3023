//! Truncated symbolic expansions: requantization, reduction of double
//! symbols, the Leibniz product and the formal adjoint.
//!
//! Remainders are never computed symbolically; they are measured by
//! comparing quantized operators (see `quantization::TestSpace`).

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::group_action::GroupAction;
use crate::jet::factorial;
use crate::linalg::{condition_number, Matrix, C64};
use crate::symbols::{DoubleSymbol, Symbol};

/// Largest supported truncation order.
pub const MAX_TRUNCATION: usize = 12;

/// Truncated expansion Σ_{|α|<N} (terms) and its per-weight pieces.
#[derive(Debug, Clone)]
pub struct ExpansionResult {
    pub symbol: Symbol,
    pub order: usize,
    /// terms[w]: contribution of multi-index weight w, of order μ₁ − (ϱ−δ)w.
    pub terms: Vec<Symbol>,
}

fn check_order(n: usize) -> Result<()> {
    if n == 0 || n > MAX_TRUNCATION {
        return Err(Error::Parameter(format!("truncation order must be in 1..={MAX_TRUNCATION}, got {n}")));
    }
    Ok(())
}

fn lowered(s: Symbol, weight: usize) -> Result<Symbol> {
    let m = s.meta().clone();
    s.with_orders(m.mu1 - (m.rho - m.delta) * weight as f64, m.mu2, m.rho, m.delta)
}

fn diagonal(a: &Symbol, coeffs: Vec<(usize, C64)>, label: String) -> Result<ExpansionResult> {
    let order = coeffs.len();
    let terms = coeffs
        .iter()
        .map(|&(k, c)| lowered(a.diagonal_expansion(vec![(k, c)], format!("{label}[{k}]"))?, k))
        .collect::<Result<Vec<_>>>()?;
    let symbol = a.diagonal_expansion(coeffs, label)?;
    Ok(ExpansionResult { symbol, order, terms })
}

/// T_τ(a) ≈ Σ_{k<N} ((−τ)^k / k!) D_y^k ∂_η^k a, so that Op_τ(T_τ a) ≈ Op₀(a).
pub fn requantize(a: &Symbol, tau: f64, n: usize) -> Result<ExpansionResult> {
    check_order(n)?;
    if !tau.is_finite() {
        return Err(Error::Parameter(format!("τ must be finite, got {tau}")));
    }
    let coeffs = (0..n).map(|k| (k, C64::new((-tau).powi(k as i32) / factorial(k), 0.0))).collect();
    diagonal(a, coeffs, format!("T_{tau}^{n}({})", a.label()))
}

/// Left symbol b with Op₀(b) ≈ Op(a):
/// Σ_{α+β<N} τ^α(1−τ)^β/(α!β!) ∂_η^{α+β}(−D_y)^α D_{y′}^β a |_{y′=y}.
/// Terms whose coefficient vanishes (τ ∈ {0, 1}) are omitted.
pub fn reduce_double(a: &DoubleSymbol, tau: f64, n: usize) -> Result<ExpansionResult> {
    check_order(n)?;
    let mut by_weight: Vec<Vec<Symbol>> = vec![Vec::new(); n];
    for w in 0..n {
        for alpha in 0..=w {
            let beta = w - alpha;
            let c = tau.powi(alpha as i32) * (1.0 - tau).powi(beta as i32) / (factorial(alpha) * factorial(beta));
            if c == 0.0 {
                continue;
            }
            let sign = if alpha % 2 == 0 { 1.0 } else { -1.0 };
            for (l, r) in a.terms() {
                let left = l.derivative_symbol(0, alpha)?;
                let right = r.derivative_symbol(0, beta)?;
                let term = left.product(&right)?.derivative_symbol(w, 0)?.scale(C64::new(sign * c, 0.0));
                by_weight[w].push(term);
            }
        }
    }
    let (mu1, mu2, mu3) = a.orders();
    let mut terms = Vec::new();
    let mut all = Vec::new();
    for (w, parts) in by_weight.into_iter().enumerate() {
        if parts.is_empty() {
            continue;
        }
        all.extend(parts.iter().cloned());
        let s = Symbol::sum(&parts)?;
        let (rho, delta) = (s.meta().rho, s.meta().delta);
        terms.push(s.with_orders(mu1 - (rho - delta) * w as f64, mu2 + mu3, rho, delta)?);
    }
    let symbol = Symbol::sum(&all)?;
    let (rho, delta) = (symbol.meta().rho, symbol.meta().delta);
    let symbol = symbol.with_orders(mu1, mu2 + mu3, rho, delta)?.with_label(format!("reduce_{tau}^{n}"));
    Ok(ExpansionResult { symbol, order: n, terms })
}

/// a#b ≈ Σ_{k<N} (1/k!)(∂_η^k a)(D_y^k b), the symbol of Op₀(a)∘Op₀(b).
pub fn leibniz_product(a: &Symbol, b: &Symbol, n: usize) -> Result<ExpansionResult> {
    check_order(n)?;
    let symbol = a.leibniz(b, n)?;
    let terms = (0..n)
        .map(|k| {
            let t = a
                .derivative_symbol(k, 0)?
                .product(&b.derivative_symbol(0, k)?)?
                .scale(C64::new(1.0 / factorial(k), 0.0));
            let m = symbol.meta().clone();
            t.with_orders(m.mu1 - (m.rho - m.delta) * k as f64, m.mu2, m.rho, m.delta)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExpansionResult { symbol, order: n, terms })
}

fn pairing_inverse(j: &Matrix, name: &str, dim: usize) -> Result<Matrix> {
    if !j.is_square() || j.rows() != dim {
        return Err(Error::Pairing(format!("{name} must be {dim}x{dim}, got {}x{}", j.rows(), j.cols())));
    }
    let cond = condition_number(j)?;
    if !cond.is_finite() || cond > 1e12 {
        return Err(Error::Pairing(format!("{name} is singular (condition number {cond:e})")));
    }
    j.inverse().map_err(|e| Error::Pairing(format!("{name}: {e}")))
}

/// Formal adjoint with respect to the pairings ⟨·, J·⟩ (domain) and ⟨·, J̃·⟩
/// (codomain): a^# = J⁻¹ a* J̃ and b ≈ Σ_{k<N} (1/k!) D_y^k ∂_η^k a^#.
///
/// The result acts Ẽ₁ → E₁ with actions generated by −J̃⁻¹Ã*J̃ (domain) and
/// −J⁻¹A*J (codomain), the actions making the pairings invariant.
pub fn adjoint_symbol(a: &Symbol, j: &Matrix, j_tilde: &Matrix, n: usize) -> Result<ExpansionResult> {
    check_order(n)?;
    let j_inv = pairing_inverse(j, "J", a.n_in())?;
    pairing_inverse(j_tilde, "J̃", a.n_out())?;
    let m = a.meta();
    let dual = |action: &GroupAction, pairing: &Matrix, inv: &Matrix| -> Result<Arc<GroupAction>> {
        if action.is_trivial() {
            return Ok(Arc::new(GroupAction::trivial(action.dim())));
        }
        let g = inv.matmul(&action.generator().adjoint())?.matmul(pairing)?.scale_real(-1.0);
        Ok(Arc::new(GroupAction::new(g)?))
    };
    let j_tilde_inv = pairing_inverse(j_tilde, "J̃", a.n_out())?;
    let codomain = dual(&m.domain_action, j, &j_inv)?;
    let domain = dual(&m.codomain_action, j_tilde, &j_tilde_inv)?;
    let sharp = a.sandwich(j_inv, j_tilde.clone(), true, domain, codomain)?;
    let coeffs = (0..n).map(|k| (k, C64::new(1.0 / factorial(k), 0.0))).collect();
    diagonal(&sharp, coeffs, format!("adj^{n}({})", a.label()))
}
