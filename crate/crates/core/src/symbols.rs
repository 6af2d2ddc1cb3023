//! Operator-valued symbols a(y, η) with twisted order metadata.
//!
//! Every symbol is an immutable expression tree. Builtin families and their
//! combinations differentiate exactly through Taylor jets; user closures fall
//! back to 4th-order central differences and carry a finite derivative
//! capability that is tracked through every combinator.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{jbracket1, SymbolGrid};
use crate::group_action::{least_squares_slope, GroupAction};
use crate::jet::{factorial, Jet, SJet};
use crate::linalg::{schatten_norm, Matrix, C64};

/// Derivative order available from exact providers.
pub const UNLIMITED: usize = usize::MAX / 4;
/// Per-variable derivative order of the finite-difference provider.
pub const FD_CAPABILITY: usize = 2;
/// Center of the bump χ(x) = exp(−(x − c)²/2) used by `delta_type`.
pub const CHI_CENTER: f64 = 0.5;
/// Order metadata assigned to Schwartz-class builtins.
pub const SCHWARTZ_ORDER: f64 = -10.0;

const ONE: C64 = C64::new(1.0, 0.0);
const MINUS_I: C64 = C64::new(0.0, -1.0);

/// Highest derivative orders (in y, in η) a symbol can provide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capability {
    pub y: usize,
    pub eta: usize,
}

impl Capability {
    pub const UNLIMITED: Capability = Capability { y: UNLIMITED, eta: UNLIMITED };

    pub fn min(self, other: Capability) -> Capability {
        Capability { y: self.y.min(other.y), eta: self.eta.min(other.eta) }
    }

    fn reduce(self, dy: usize, deta: usize) -> Result<Capability> {
        if dy > self.y || deta > self.eta {
            return Err(Error::Capability(format!(
                "derivative (y: {dy}, η: {deta}) exceeds provider capability (y: {}, η: {})",
                self.y, self.eta
            )));
        }
        Ok(Capability { y: self.y - dy, eta: self.eta - deta })
    }

    pub fn supports(&self, dy: usize, deta: usize) -> bool {
        dy <= self.y && deta <= self.eta
    }
}

/// Fiber dimensions, twisted orders (μ₁, μ₂), type (ϱ, δ) and actions.
#[derive(Debug, Clone)]
pub struct SymbolMeta {
    pub n_in: usize,
    pub n_out: usize,
    pub mu1: f64,
    pub mu2: f64,
    pub rho: f64,
    pub delta: f64,
    /// κ on the domain fiber.
    pub domain_action: Arc<GroupAction>,
    /// κ̃ on the codomain fiber.
    pub codomain_action: Arc<GroupAction>,
}

impl SymbolMeta {
    pub fn new(n_out: usize, n_in: usize, mu1: f64, mu2: f64, rho: f64, delta: f64) -> Result<Self> {
        Self::with_actions(
            mu1,
            mu2,
            rho,
            delta,
            Arc::new(GroupAction::trivial(n_in)),
            Arc::new(GroupAction::trivial(n_out)),
        )
    }

    pub fn with_actions(
        mu1: f64,
        mu2: f64,
        rho: f64,
        delta: f64,
        domain_action: Arc<GroupAction>,
        codomain_action: Arc<GroupAction>,
    ) -> Result<Self> {
        let meta = Self {
            n_in: domain_action.dim(),
            n_out: codomain_action.dim(),
            mu1,
            mu2,
            rho,
            delta,
            domain_action,
            codomain_action,
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.delta && self.delta < self.rho && self.rho <= 1.0) {
            return Err(Error::Parameter(format!(
                "symbol type requires 0 <= δ < ϱ <= 1, got ϱ = {}, δ = {}",
                self.rho, self.delta
            )));
        }
        if self.mu1.is_nan() || self.mu2.is_nan() {
            return Err(Error::Parameter("symbol orders must not be NaN".into()));
        }
        if self.n_in == 0 || self.n_out == 0 {
            return Err(Error::Shape("fiber dimensions must be positive".into()));
        }
        if self.domain_action.dim() != self.n_in || self.codomain_action.dim() != self.n_out {
            return Err(Error::Shape("group action dimensions do not match the fibers".into()));
        }
        Ok(())
    }

    fn same_spaces(&self, other: &SymbolMeta) -> bool {
        self.n_in == other.n_in
            && self.n_out == other.n_out
            && *self.domain_action == *other.domain_action
            && *self.codomain_action == *other.codomain_action
    }
}

/// c·y^i·η^j.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyTerm {
    pub y_pow: u32,
    pub eta_pow: u32,
    pub coef: C64,
}

impl PolyTerm {
    pub fn new(y_pow: u32, eta_pow: u32, coef: f64) -> Self {
        Self { y_pow, eta_pow, coef: C64::new(coef, 0.0) }
    }
}

type PointFn = dyn Fn(f64, f64) -> Matrix + Send + Sync;

enum Node {
    Identity,
    Poly(Vec<PolyTerm>),
    TwistedOrder { b: Matrix, mu1: f64, mu2: f64 },
    DeltaType { b: Matrix, mu1: f64, delta: f64 },
    Schwartz { width_y: f64, width_eta: f64, k: Matrix },
    Numeric { f: Arc<PointFn>, hy: f64, heta: f64 },
    Sum(Vec<Symbol>),
    Product(Symbol, Symbol),
    Scale(C64, Symbol),
    /// left · (a or a*) · right
    Sandwich { inner: Symbol, left: Matrix, right: Matrix, adjoint: bool },
    /// ∂_η^α D_y^β
    Derivative { inner: Symbol, alpha: usize, beta: usize },
    /// Σ c_k D_y^k ∂_η^k a
    Expansion { inner: Symbol, terms: Vec<(usize, C64)> },
    /// Σ_{k<n} (1/k!) (∂_η^k a)(D_y^k b)
    Leibniz { a: Symbol, b: Symbol, n: usize },
}

/// Operator-valued symbol.
#[derive(Clone)]
pub struct Symbol {
    meta: SymbolMeta,
    node: Arc<Node>,
    capability: Capability,
    label: String,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Symbol")
            .field("label", &self.label)
            .field("n_out", &self.meta.n_out)
            .field("n_in", &self.meta.n_in)
            .field("mu1", &self.meta.mu1)
            .field("mu2", &self.meta.mu2)
            .field("rho", &self.meta.rho)
            .field("delta", &self.meta.delta)
            .finish()
    }
}

fn stencil(order: usize) -> [f64; 5] {
    match order {
        0 => [0.0, 0.0, 1.0, 0.0, 0.0],
        1 => [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0],
        2 => [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0],
        _ => unreachable!("finite-difference stencils stop at order {FD_CAPABILITY}"),
    }
}

fn lie_powers(b: &Matrix, cod: &GroupAction, dom: &GroupAction, count: usize) -> Result<Vec<Matrix>> {
    let mut out = Vec::with_capacity(count);
    out.push(b.clone());
    let trivial = cod.is_trivial() && dom.is_trivial();
    for k in 1..count {
        if trivial {
            out.push(Matrix::zeros(b.rows(), b.cols()));
            continue;
        }
        let prev = &out[k - 1];
        let next = &cod.generator().matmul(prev)? - &prev.matmul(dom.generator())?;
        out.push(next);
    }
    Ok(out)
}

impl Symbol {
    fn from_node(meta: SymbolMeta, node: Node, capability: Capability, label: String) -> Self {
        Self { meta, node: Arc::new(node), capability, label }
    }

    /// a ≡ Id on ℂⁿ.
    pub fn identity(n: usize) -> Result<Self> {
        let meta = SymbolMeta::new(n, n, 0.0, 0.0, 1.0, 0.0)?;
        Ok(Self::from_node(meta, Node::Identity, Capability::UNLIMITED, "identity".into()))
    }

    /// Σ c·y^i η^j times Id on ℂⁿ; order (max j, max i), type (1, 0).
    pub fn poly(n: usize, terms: &[PolyTerm]) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Parameter("polynomial symbol needs at least one term".into()));
        }
        let mu1 = terms.iter().map(|t| t.eta_pow).max().unwrap_or(0) as f64;
        let mu2 = terms.iter().map(|t| t.y_pow).max().unwrap_or(0) as f64;
        let meta = SymbolMeta::new(n, n, mu1, mu2, 1.0, 0.0)?;
        let label = terms
            .iter()
            .map(|t| format!("({})*y^{}*eta^{}", t.coef, t.y_pow, t.eta_pow))
            .collect::<Vec<_>>()
            .join("+");
        Ok(Self::from_node(meta, Node::Poly(terms.to_vec()), Capability::UNLIMITED, format!("poly[{label}]")))
    }

    /// ⟨y⟩^{μ₂}⟨η⟩^{μ₁} κ̃_{⟨η⟩} B κ⁻¹_{⟨η⟩}: twisted order (μ₁, μ₂), type (1, 0).
    pub fn twisted_order(
        b: Matrix,
        mu1: f64,
        mu2: f64,
        domain_action: Arc<GroupAction>,
        codomain_action: Arc<GroupAction>,
    ) -> Result<Self> {
        if b.rows() != codomain_action.dim() || b.cols() != domain_action.dim() {
            return Err(Error::Shape(format!(
                "B is {}x{} but the actions act on ℂ^{} → ℂ^{}",
                b.rows(),
                b.cols(),
                domain_action.dim(),
                codomain_action.dim()
            )));
        }
        let meta = SymbolMeta::with_actions(mu1, mu2, 1.0, 0.0, domain_action, codomain_action)?;
        Ok(Self::from_node(
            meta,
            Node::TwistedOrder { b, mu1, mu2 },
            Capability::UNLIMITED,
            format!("twisted_order(mu1={mu1},mu2={mu2})"),
        ))
    }

    /// χ(⟨η⟩^δ y)⟨η⟩^{μ₁} B with χ(x) = exp(−(x − c)²/2): type (1, δ).
    pub fn delta_type(b: Matrix, mu1: f64, delta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::Parameter(format!("delta_type needs 0 <= δ < 1, got {delta}")));
        }
        let mut meta = SymbolMeta::new(b.rows(), b.cols(), mu1, 0.0, 1.0, delta)?;
        // χ(⟨η⟩^δ y) decays in y only at a rate set by ⟨η⟩^δ ≥ 1: order 0 in y.
        meta.mu2 = 0.0;
        Ok(Self::from_node(
            meta,
            Node::DeltaType { b, mu1, delta },
            Capability::UNLIMITED,
            format!("delta_type(mu1={mu1},delta={delta})"),
        ))
    }

    /// exp(−w_y y²)·exp(−w_η η²)·K. A zero width drops that factor.
    pub fn schwartz(width_y: f64, width_eta: f64, k: Matrix) -> Result<Self> {
        if !(width_y >= 0.0 && width_eta >= 0.0) || !width_y.is_finite() || !width_eta.is_finite() {
            return Err(Error::Parameter("Gaussian widths must be finite and nonnegative".into()));
        }
        let mu1 = if width_eta > 0.0 { SCHWARTZ_ORDER } else { 0.0 };
        let mu2 = if width_y > 0.0 { SCHWARTZ_ORDER } else { 0.0 };
        let meta = SymbolMeta::new(k.rows(), k.cols(), mu1, mu2, 1.0, 0.0)?;
        Ok(Self::from_node(
            meta,
            Node::Schwartz { width_y, width_eta, k },
            Capability::UNLIMITED,
            format!("schwartz(wy={width_y},weta={width_eta})"),
        ))
    }

    /// A user closure; derivatives by 4th-order central differences with
    /// steps (h_y, h_η), up to order 2 in each variable.
    pub fn numeric<F>(meta: SymbolMeta, f: F, hy: f64, heta: f64, label: &str) -> Result<Self>
    where
        F: Fn(f64, f64) -> Matrix + Send + Sync + 'static,
    {
        meta.validate()?;
        if !(hy > 0.0 && heta > 0.0) {
            return Err(Error::Parameter("finite-difference steps must be positive".into()));
        }
        let probe = f(0.0, 0.0);
        if probe.rows() != meta.n_out || probe.cols() != meta.n_in {
            return Err(Error::Shape(format!(
                "closure returns {}x{}, metadata says {}x{}",
                probe.rows(),
                probe.cols(),
                meta.n_out,
                meta.n_in
            )));
        }
        Ok(Self::from_node(
            meta,
            Node::Numeric { f: Arc::new(f), hy, heta },
            Capability { y: FD_CAPABILITY, eta: FD_CAPABILITY },
            label.to_string(),
        ))
    }

    pub fn meta(&self) -> &SymbolMeta {
        &self.meta
    }

    pub fn n_in(&self) -> usize {
        self.meta.n_in
    }

    pub fn n_out(&self) -> usize {
        self.meta.n_out
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn capability(&self) -> Capability {
        self.capability
    }

    /// Replace the order metadata (e.g. after an expansion).
    pub fn with_orders(mut self, mu1: f64, mu2: f64, rho: f64, delta: f64) -> Result<Self> {
        self.meta.mu1 = mu1;
        self.meta.mu2 = mu2;
        self.meta.rho = rho;
        self.meta.delta = delta;
        self.meta.validate()?;
        Ok(self)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Replace the group actions (dimensions must agree).
    pub fn with_actions(mut self, domain: Arc<GroupAction>, codomain: Arc<GroupAction>) -> Result<Self> {
        self.meta.domain_action = domain;
        self.meta.codomain_action = codomain;
        self.meta.validate()?;
        Ok(self)
    }

    pub fn eval(&self, y: f64, eta: f64) -> Result<Matrix> {
        Ok(self.jet(y, eta, 0, 0)?.into_value())
    }

    /// ∂_η^α D_y^β a(y, η).
    pub fn derivative(&self, y: f64, eta: f64, alpha: usize, beta: usize) -> Result<Matrix> {
        Ok(self.jet(y, eta, beta, alpha)?.partial(alpha, beta))
    }

    /// Taylor jet of order (ny, ne) at (y, η).
    pub fn jet(&self, y: f64, eta: f64, ny: usize, ne: usize) -> Result<Jet> {
        if !self.capability.supports(ny, ne) {
            return Err(Error::Capability(format!(
                "{}: derivatives up to (y: {ny}, η: {ne}) requested, provider supports (y: {}, η: {})",
                self.label, self.capability.y, self.capability.eta
            )));
        }
        if !y.is_finite() || !eta.is_finite() {
            return Err(Error::Domain(format!("symbol evaluated at non-finite point ({y}, {eta})")));
        }
        let (n_out, n_in) = (self.meta.n_out, self.meta.n_in);
        let jet = match &*self.node {
            Node::Identity => Jet::constant(ny, ne, &Matrix::identity(n_out)),
            Node::Poly(terms) => {
                let yv = SJet::var_y(ny, ne, y);
                let ev = SJet::var_eta(ny, ne, eta);
                let mut acc = SJet::zeros(ny, ne);
                for t in terms {
                    acc = acc.add(&yv.powi(t.y_pow).mul(&ev.powi(t.eta_pow)).scale(t.coef));
                }
                Jet::from_scalar(&acc, &Matrix::identity(n_out))
            }
            Node::TwistedOrder { b, mu1, mu2 } => {
                let yv = SJet::var_y(ny, ne, y);
                let ev = SJet::var_eta(ny, ne, eta);
                let weight = yv.jbracket_pow(*mu2).mul(&ev.jbracket_pow(*mu1));
                let cod = &self.meta.codomain_action;
                let dom = &self.meta.domain_action;
                let top = ny + ne;
                let jb = jbracket1(eta);
                let (kt, ki) = (cod.evaluate(jb)?, dom.inverse(jb)?);
                let mats = lie_powers(b, cod, dom, top + 1)?
                    .iter()
                    .map(|l| kt.matmul(l)?.matmul(&ki))
                    .collect::<Result<Vec<_>>>()?;
                let t = ev.mul(&ev).add_const(ONE).ln().scale(C64::new(0.5, 0.0));
                Jet::compose_series(&t, &mats).mul_scalar(&weight)
            }
            Node::DeltaType { b, mu1, delta } => {
                let yv = SJet::var_y(ny, ne, y);
                let ev = SJet::var_eta(ny, ne, eta);
                let x = ev.jbracket_pow(*delta).mul(&yv).add_const(C64::new(-CHI_CENTER, 0.0));
                let chi = x.mul(&x).scale(C64::new(-0.5, 0.0)).exp();
                Jet::from_scalar(&chi.mul(&ev.jbracket_pow(*mu1)), b)
            }
            Node::Schwartz { width_y, width_eta, k } => {
                let yv = SJet::var_y(ny, ne, y);
                let ev = SJet::var_eta(ny, ne, eta);
                let gy = yv.mul(&yv).scale(C64::new(-width_y, 0.0)).exp();
                let ge = ev.mul(&ev).scale(C64::new(-width_eta, 0.0)).exp();
                Jet::from_scalar(&gy.mul(&ge), k)
            }
            Node::Numeric { f, hy, heta } => {
                let mut samples = Vec::with_capacity(25);
                for a in -2..=2 {
                    for b in -2..=2 {
                        samples.push(f(y + a as f64 * hy, eta + b as f64 * heta));
                    }
                }
                let mut coeffs = Vec::with_capacity((ny + 1) * (ne + 1));
                for i in 0..=ny {
                    let sy = stencil(i);
                    for j in 0..=ne {
                        let se = stencil(j);
                        let mut m = Matrix::zeros(n_out, n_in);
                        for (a, wa) in sy.iter().enumerate() {
                            for (b, wb) in se.iter().enumerate() {
                                let w = wa * wb;
                                if w != 0.0 {
                                    m.axpy(C64::new(w, 0.0), &samples[a * 5 + b]);
                                }
                            }
                        }
                        let scale = 1.0 / (hy.powi(i as i32) * heta.powi(j as i32) * factorial(i) * factorial(j));
                        coeffs.push(m.scale_real(scale));
                    }
                }
                Jet::from_coeffs(ny, ne, coeffs)?
            }
            Node::Sum(parts) => {
                let mut acc = parts[0].jet(y, eta, ny, ne)?;
                for p in &parts[1..] {
                    acc.add_assign(&p.jet(y, eta, ny, ne)?);
                }
                acc
            }
            Node::Product(a, b) => a.jet(y, eta, ny, ne)?.mul(&b.jet(y, eta, ny, ne)?)?,
            Node::Scale(c, a) => a.jet(y, eta, ny, ne)?.scale(*c),
            Node::Sandwich { inner, left, right, adjoint } => {
                let j = inner.jet(y, eta, ny, ne)?;
                let j = if *adjoint { j.adjoint() } else { j };
                j.left_mul(left)?.right_mul(right)?
            }
            Node::Derivative { inner, alpha, beta } => inner
                .jet(y, eta, ny + beta, ne + alpha)?
                .differentiate(*beta, *alpha)
                .scale(MINUS_I.powu(*beta as u32)),
            Node::Expansion { inner, terms } => {
                let top = terms.iter().map(|t| t.0).max().unwrap_or(0);
                let base = inner.jet(y, eta, ny + top, ne + top)?;
                let mut acc = Jet::zeros(ny, ne, n_out, n_in);
                for &(k, c) in terms {
                    let d = base.differentiate(k, k).truncate(ny, ne);
                    acc.axpy(c * MINUS_I.powu(k as u32), &d);
                }
                acc
            }
            Node::Leibniz { a, b, n } => {
                let ja = a.jet(y, eta, ny, ne + n - 1)?;
                let jb = b.jet(y, eta, ny + n - 1, ne)?;
                let mut acc = Jet::zeros(ny, ne, n_out, n_in);
                for k in 0..*n {
                    let da = ja.differentiate(0, k).truncate(ny, ne);
                    let db = jb.differentiate(k, 0).truncate(ny, ne).scale(MINUS_I.powu(k as u32));
                    acc.axpy(C64::new(1.0 / factorial(k), 0.0), &da.mul(&db)?);
                }
                acc
            }
        };
        Ok(jet)
    }

    /// a + b. Fibers and actions must agree.
    pub fn add(&self, other: &Symbol) -> Result<Symbol> {
        if !self.meta.same_spaces(&other.meta) {
            return Err(Error::Shape(format!("cannot add {} and {}: fibers or actions differ", self.label, other.label)));
        }
        let mut meta = self.meta.clone();
        meta.mu1 = self.meta.mu1.max(other.meta.mu1);
        meta.mu2 = self.meta.mu2.max(other.meta.mu2);
        meta.rho = self.meta.rho.min(other.meta.rho);
        meta.delta = self.meta.delta.max(other.meta.delta);
        meta.validate()?;
        let mut parts = Vec::new();
        for s in [self, other] {
            match &*s.node {
                Node::Sum(p) => parts.extend(p.iter().cloned()),
                _ => parts.push(s.clone()),
            }
        }
        Ok(Symbol::from_node(
            meta,
            Node::Sum(parts),
            self.capability.min(other.capability),
            format!("({})+({})", self.label, other.label),
        ))
    }

    /// Sum of a nonempty list.
    pub fn sum(symbols: &[Symbol]) -> Result<Symbol> {
        let (first, rest) = symbols.split_first().ok_or_else(|| Error::Parameter("empty symbol sum".into()))?;
        rest.iter().try_fold(first.clone(), |acc, s| acc.add(s))
    }

    /// Pointwise product a(y,η)·b(y,η). The domain action of `self` must be
    /// the codomain action of `other`.
    pub fn product(&self, other: &Symbol) -> Result<Symbol> {
        if self.meta.n_in != other.meta.n_out || *self.meta.domain_action != *other.meta.codomain_action {
            return Err(Error::Composition(format!(
                "{} (domain ℂ^{}) cannot follow {} (codomain ℂ^{}) or actions differ",
                self.label, self.meta.n_in, other.label, other.meta.n_out
            )));
        }
        let meta = SymbolMeta {
            n_in: other.meta.n_in,
            n_out: self.meta.n_out,
            mu1: self.meta.mu1 + other.meta.mu1,
            mu2: self.meta.mu2 + other.meta.mu2,
            rho: self.meta.rho.min(other.meta.rho),
            delta: self.meta.delta.max(other.meta.delta),
            domain_action: other.meta.domain_action.clone(),
            codomain_action: self.meta.codomain_action.clone(),
        };
        meta.validate()?;
        Ok(Symbol::from_node(
            meta,
            Node::Product(self.clone(), other.clone()),
            self.capability.min(other.capability),
            format!("({})*({})", self.label, other.label),
        ))
    }

    pub fn scale(&self, c: C64) -> Symbol {
        Symbol::from_node(
            self.meta.clone(),
            Node::Scale(c, self.clone()),
            self.capability,
            format!("{c}*({})", self.label),
        )
    }

    /// left · a · right, or left · a* · right when `adjoint`. The caller
    /// supplies the resulting actions.
    pub fn sandwich(
        &self,
        left: Matrix,
        right: Matrix,
        adjoint: bool,
        domain_action: Arc<GroupAction>,
        codomain_action: Arc<GroupAction>,
    ) -> Result<Symbol> {
        let (inner_rows, inner_cols) =
            if adjoint { (self.meta.n_in, self.meta.n_out) } else { (self.meta.n_out, self.meta.n_in) };
        if left.cols() != inner_rows || right.rows() != inner_cols {
            return Err(Error::Shape("sandwich factors do not match the symbol fibers".into()));
        }
        let mut meta = self.meta.clone();
        meta.n_out = left.rows();
        meta.n_in = right.cols();
        meta.domain_action = domain_action;
        meta.codomain_action = codomain_action;
        meta.validate()?;
        let label = format!("L*({}){}*R", self.label, if adjoint { "^*" } else { "" });
        Ok(Symbol::from_node(meta, Node::Sandwich { inner: self.clone(), left, right, adjoint }, self.capability, label))
    }

    /// The symbol ∂_η^α D_y^β a, of order μ₁ − ϱα + δβ.
    pub fn derivative_symbol(&self, alpha: usize, beta: usize) -> Result<Symbol> {
        let capability = self.capability.reduce(beta, alpha)?;
        let mut meta = self.meta.clone();
        meta.mu1 += -meta.rho * alpha as f64 + meta.delta * beta as f64;
        Ok(Symbol::from_node(
            meta,
            Node::Derivative { inner: self.clone(), alpha, beta },
            capability,
            format!("d_eta^{alpha} D_y^{beta}({})", self.label),
        ))
    }

    /// Σ c_k D_y^k ∂_η^k a over the given (k, c_k).
    pub(crate) fn diagonal_expansion(&self, terms: Vec<(usize, C64)>, label: String) -> Result<Symbol> {
        let top = terms.iter().map(|t| t.0).max().unwrap_or(0);
        let capability = self.capability.reduce(top, top)?;
        Ok(Symbol::from_node(self.meta.clone(), Node::Expansion { inner: self.clone(), terms }, capability, label))
    }

    /// Σ_{k<n} (1/k!)(∂_η^k a)(D_y^k b); metadata as for the product.
    pub(crate) fn leibniz(&self, other: &Symbol, n: usize) -> Result<Symbol> {
        let product = self.product(other)?;
        let ca = self.capability.reduce(0, n - 1)?;
        let cb = other.capability.reduce(n - 1, 0)?;
        Ok(Symbol::from_node(
            product.meta,
            Node::Leibniz { a: self.clone(), b: other.clone(), n },
            ca.min(cb),
            format!("({})#{n}({})", self.label, other.label),
        ))
    }
}

/// Parameters for [`builtin`]; unused fields are ignored by each family.
#[derive(Debug, Clone)]
pub struct BuiltinParams {
    pub n: usize,
    pub matrix: Option<Matrix>,
    pub mu1: f64,
    pub mu2: f64,
    pub delta: f64,
    pub width_y: f64,
    pub width_eta: f64,
    pub poly: Vec<PolyTerm>,
    pub domain_action: Option<Arc<GroupAction>>,
    pub codomain_action: Option<Arc<GroupAction>>,
}

impl Default for BuiltinParams {
    fn default() -> Self {
        Self {
            n: 1,
            matrix: None,
            mu1: 0.0,
            mu2: 0.0,
            delta: 0.0,
            width_y: 0.5,
            width_eta: 0.5,
            poly: Vec::new(),
            domain_action: None,
            codomain_action: None,
        }
    }
}

pub const BUILTIN_FAMILIES: [&str; 5] = ["identity", "poly", "twisted_order", "delta_type", "schwartz"];

/// Construct a builtin family by name.
pub fn builtin(family: &str, p: &BuiltinParams) -> Result<Symbol> {
    let matrix = || p.matrix.clone().unwrap_or_else(|| Matrix::identity(p.n));
    match family {
        "identity" => Symbol::identity(p.n),
        "poly" => Symbol::poly(p.n, &p.poly),
        "twisted_order" => {
            let b = matrix();
            let dom = p.domain_action.clone().unwrap_or_else(|| Arc::new(GroupAction::trivial(b.cols())));
            let cod = p.codomain_action.clone().unwrap_or_else(|| Arc::new(GroupAction::trivial(b.rows())));
            Symbol::twisted_order(b, p.mu1, p.mu2, dom, cod)
        }
        "delta_type" => Symbol::delta_type(matrix(), p.mu1, p.delta),
        "schwartz" => Symbol::schwartz(p.width_y, p.width_eta, matrix()),
        other => Err(Error::Parameter(format!(
            "unknown symbol family '{other}' (known: {})",
            BUILTIN_FAMILIES.join(", ")
        ))),
    }
}

/// Norm applied to the conjugated derivative in seminorms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormSelector {
    Operator,
    Schatten(f64),
}

impl NormSelector {
    pub fn apply(&self, m: &Matrix) -> Result<f64> {
        match self {
            NormSelector::Operator => Ok(m.op_norm()),
            NormSelector::Schatten(p) => schatten_norm(m, *p),
        }
    }
}

/// Options for [`seminorm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeminormOptions {
    pub norm: NormSelector,
    /// Conjugate by κ̃⁻¹_{⟨η⟩} · κ_{⟨η⟩}; false gives the untwisted seminorm.
    pub twisted: bool,
    /// Override μ₁ in the weight.
    pub mu1: Option<f64>,
}

impl Default for SeminormOptions {
    fn default() -> Self {
        Self { norm: NormSelector::Operator, twisted: true, mu1: None }
    }
}

/// Best constant C_{α,β} on the grid:
/// sup ⟨y⟩^{−μ₂}⟨η⟩^{−μ₁+ϱα−δβ}‖κ̃⁻¹_{⟨η⟩}(∂_η^α D_y^β a)κ_{⟨η⟩}‖.
pub fn twisted_seminorm(a: &Symbol, alpha: usize, beta: usize, grid: &SymbolGrid, norm: NormSelector) -> Result<f64> {
    seminorm(a, alpha, beta, grid, &SeminormOptions { norm, ..Default::default() })
}

pub fn seminorm(a: &Symbol, alpha: usize, beta: usize, grid: &SymbolGrid, opts: &SeminormOptions) -> Result<f64> {
    let m = &a.meta;
    let mu1 = opts.mu1.unwrap_or(m.mu1);
    let eta_exp = -mu1 + m.rho * alpha as f64 - m.delta * beta as f64;
    let mut sup: f64 = 0.0;
    for k in 0..grid.len() {
        let y = grid.y(k);
        let wy = jbracket1(y).powf(-m.mu2);
        for idx in 0..grid.len() {
            let eta = grid.eta(idx);
            let jb = jbracket1(eta);
            let d = a.derivative(y, eta, alpha, beta)?;
            let d = if opts.twisted {
                m.codomain_action.inverse(jb)?.matmul(&d)?.matmul(&m.domain_action.evaluate(jb)?)?
            } else {
                d
            };
            let v = wy * jb.powf(eta_exp) * opts.norm.apply(&d)?;
            sup = sup.max(v);
        }
    }
    Ok(sup)
}

/// Fitted orders from dyadic frequency samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderFit {
    pub mu1: f64,
    pub delta: f64,
    pub scales: usize,
}

/// μ̂₁: log-log slope of sup_y‖κ̃⁻¹aκ‖ against ⟨η⟩ at η = 2^j inside the grid
/// band; δ̂: slope of the first y-derivative minus μ̂₁ (0 if it vanishes).
pub fn fit_orders(a: &Symbol, grid: &SymbolGrid) -> Result<OrderFit> {
    let mut etas = Vec::new();
    let mut e = 1.0;
    while e <= grid.max_abs_eta() {
        etas.push(e);
        e *= 2.0;
    }
    if etas.len() < 4 {
        return Err(Error::Range(format!(
            "order fit needs at least 4 dyadic scales, the grid band |η| <= {} has {}",
            grid.max_abs_eta(),
            etas.len()
        )));
    }
    let m = &a.meta;
    let mut p0 = Vec::with_capacity(etas.len());
    let mut p1 = Vec::with_capacity(etas.len());
    for &eta in &etas {
        let jb = jbracket1(eta);
        let left = m.codomain_action.inverse(jb)?;
        let right = m.domain_action.evaluate(jb)?;
        let (mut s0, mut s1) = (0.0f64, 0.0f64);
        for k in 0..grid.len() {
            let jet = a.jet(grid.y(k), eta, 1, 0)?;
            s0 = s0.max(left.matmul(&jet.partial(0, 0))?.matmul(&right)?.op_norm());
            s1 = s1.max(left.matmul(&jet.partial(0, 1))?.matmul(&right)?.op_norm());
        }
        if s0 == 0.0 {
            return Err(Error::Range(format!("symbol vanishes on the grid at η = {eta}")));
        }
        p0.push((jb.ln(), s0.ln()));
        p1.push((jb.ln(), s1));
    }
    let mu1 = least_squares_slope(&p0).expect("distinct dyadic scales");
    let vanishing = p1.iter().zip(&p0).any(|(d, v)| d.1 <= 1e-12 * v.1.exp());
    let delta = if vanishing {
        0.0
    } else {
        let logs: Vec<(f64, f64)> = p1.iter().map(|&(x, s)| (x, s.ln())).collect();
        least_squares_slope(&logs).expect("distinct dyadic scales") - mu1
    };
    Ok(OrderFit { mu1, delta, scales: etas.len() })
}

/// Separable double symbol Σ_i L_i(y, η) R_i(y′, η).
#[derive(Debug, Clone)]
pub struct DoubleSymbol {
    terms: Vec<(Symbol, Symbol)>,
    mu1: f64,
    mu2: f64,
    mu3: f64,
}

impl DoubleSymbol {
    /// l(y, η)·r(y′, η); orders (μ₁(l)+μ₁(r), μ₂(l), μ₂(r)).
    pub fn separable(l: Symbol, r: Symbol) -> Result<Self> {
        // validates fibers and actions
        l.product(&r)?;
        let (mu1, mu2, mu3) = (l.meta.mu1 + r.meta.mu1, l.meta.mu2, r.meta.mu2);
        Ok(Self { terms: vec![(l, r)], mu1, mu2, mu3 })
    }

    /// a(y, y′, η) = a(y, η).
    pub fn left(a: Symbol) -> Result<Self> {
        let id = Symbol::identity(a.n_in())?
            .with_actions(a.meta.domain_action.clone(), a.meta.domain_action.clone())?;
        Self::separable(a, id)
    }

    /// a(y, y′, η) = a(y′, η).
    pub fn right(a: Symbol) -> Result<Self> {
        let id = Symbol::identity(a.n_out())?
            .with_actions(a.meta.codomain_action.clone(), a.meta.codomain_action.clone())?;
        Self::separable(id, a)
    }

    pub fn add(&self, other: &DoubleSymbol) -> Result<Self> {
        let (l, r) = &self.terms[0];
        let (ol, or) = &other.terms[0];
        if l.n_out() != ol.n_out() || r.n_in() != or.n_in() {
            return Err(Error::Shape("double symbols act between different fibers".into()));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(Self { terms, mu1: self.mu1.max(other.mu1), mu2: self.mu2.max(other.mu2), mu3: self.mu3.max(other.mu3) })
    }

    pub fn terms(&self) -> &[(Symbol, Symbol)] {
        &self.terms
    }

    pub fn orders(&self) -> (f64, f64, f64) {
        (self.mu1, self.mu2, self.mu3)
    }

    pub fn n_in(&self) -> usize {
        self.terms[0].1.n_in()
    }

    pub fn n_out(&self) -> usize {
        self.terms[0].0.n_out()
    }

    pub fn eval(&self, y: f64, y_prime: f64, eta: f64) -> Result<Matrix> {
        let mut acc = Matrix::zeros(self.n_out(), self.n_in());
        for (l, r) in &self.terms {
            acc.axpy(ONE, &l.eval(y, eta)?.matmul(&r.eval(y_prime, eta)?)?);
        }
        Ok(acc)
    }

    /// a(y, y, η): a simple symbol of order (μ₁, μ₂ + μ₃).
    pub fn restrict(&self) -> Result<Symbol> {
        let parts = self.terms.iter().map(|(l, r)| l.product(r)).collect::<Result<Vec<_>>>()?;
        let s = Symbol::sum(&parts)?;
        let (rho, delta) = (s.meta.rho, s.meta.delta);
        s.with_orders(self.mu1, self.mu2 + self.mu3, rho, delta)
    }
}
