mod common;

use std::f64::consts::PI;

use common::{random_matrix, rng, Packets};
use edgecalc_core::grid::{apply_multiplier, jbracket1, Domain, GridFunction, SymbolGrid};
use edgecalc_core::linalg::{Matrix, C64};
use edgecalc_core::quantization::*;
use edgecalc_core::symbols::{builtin, BuiltinParams, DoubleSymbol, PolyTerm, Symbol};
use edgecalc_core::Error;
use proptest::prelude::*;

fn grid() -> SymbolGrid {
    SymbolGrid::new(8.0, 64).unwrap()
}

fn adjoint_symbol_pointwise(a: &Symbol) -> Symbol {
    let m = a.meta();
    a.sandwich(
        Matrix::identity(a.n_in()),
        Matrix::identity(a.n_out()),
        true,
        m.codomain_action.clone(),
        m.domain_action.clone(),
    )
    .unwrap()
}

/// F⁻¹ diag(a(η_m)) F through the FFT, one unit vector at a time.
fn fft_multiplier(grid: &SymbolGrid, a: &Symbol) -> Matrix {
    let (n_out, n_in) = (a.n_out(), a.n_in());
    let n = grid.len();
    let mut m = Matrix::zeros(n * n_out, n * n_in);
    for col in 0..n * n_in {
        let mut v = vec![C64::new(0.0, 0.0); n * n_in];
        v[col] = C64::new(1.0, 0.0);
        let u = GridFunction::new(*grid, n_in, Domain::Space, v).unwrap();
        let w = apply_multiplier(&u, n_out, |_, eta| a.eval(0.0, eta)).unwrap();
        for (row, z) in w.values().iter().enumerate() {
            m[(row, col)] = *z;
        }
    }
    m
}

#[test]
fn identity_is_exact() {
    for tau in [0.0, 0.5, 1.0, -1.0, 2.5] {
        let op = op_tau(&Symbol::identity(2).unwrap(), tau, &grid()).unwrap();
        assert!((op.matrix() - &Matrix::identity(128)).max_abs() <= 1e-12, "τ = {tau}");
    }
}

#[test]
fn eta_only_symbols_are_fourier_multipliers() {
    let g = grid();
    let mut r = rng(1);
    let k = random_matrix(&mut r, 2, 3);
    let symbols = [
        Symbol::schwartz(0.0, 0.05, k.clone()).unwrap(),
        builtin("twisted_order", &BuiltinParams { n: 2, mu1: -1.0, ..Default::default() }).unwrap(),
        Symbol::poly(1, &[PolyTerm::new(0, 2, 1.0), PolyTerm::new(0, 1, -3.0)]).unwrap(),
    ];
    for a in &symbols {
        let oracle = fft_multiplier(&g, a);
        let scale = 1.0 + oracle.max_abs();
        let op0 = op_tau(a, 0.0, &g).unwrap();
        assert!((op0.matrix() - &oracle).max_abs() <= 1e-12 * scale, "{}", a.label());
        for tau in [0.5, 1.0, -1.0, 0.3] {
            // a(τy′ + (1−τ)y, η) does not see τ at all
            assert_eq!(op_tau(a, tau, &g).unwrap().matrix(), op0.matrix());
        }
    }
}

#[test]
fn y_only_symbol_at_tau_zero_is_diagonal() {
    let g = grid();
    let a = Symbol::schwartz(0.1, 0.0, Matrix::from_real_rows(&[&[1.0, 2.0], &[-1.0, 0.5]]).unwrap()).unwrap();
    let op = op_tau(&a, 0.0, &g).unwrap();
    let mut want = Matrix::zeros(128, 128);
    for k in 0..64 {
        want.set_block(2 * k, 2 * k, &a.eval(g.y(k), 0.0).unwrap());
    }
    assert!((op.matrix() - &want).max_abs() <= 1e-12);
}

#[test]
fn apply_matches_direct_double_sum() {
    let g = SymbolGrid::new(6.0, 32).unwrap();
    let a = Symbol::delta_type(Matrix::from_real_rows(&[&[1.0, 0.5], &[0.0, 2.0]]).unwrap(), -0.5, 0.5).unwrap();
    let mut r = rng(3);
    let u = Packets::random(&mut r, 2, 6.0, g.max_abs_eta() / 2.0).sample(&g);
    for tau in [0.0, 0.5, 1.0, -1.0] {
        let got = op_tau(&a, tau, &g).unwrap().apply(&u).unwrap();
        let n = g.len();
        for k in 0..n {
            let mut acc = [C64::new(0.0, 0.0); 2];
            for l in 0..n {
                let z = tau * g.y(l) + (1.0 - tau) * g.y(k);
                for m in 0..n {
                    let eta = g.eta(m);
                    let e = C64::from_polar(1.0 / n as f64, (g.y(k) - g.y(l)) * eta);
                    let s = a.eval(z, eta).unwrap();
                    for i in 0..2 {
                        for j in 0..2 {
                            acc[i] += e * s[(i, j)] * u.at(l)[j];
                        }
                    }
                }
            }
            for i in 0..2 {
                assert!((got.at(k)[i] - acc[i]).norm() <= 1e-10, "τ = {tau}, k = {k}");
            }
        }
    }
}

#[test]
fn discrete_adjoint_is_right_quantization() {
    let g = grid();
    let mut r = rng(5);
    let b = random_matrix(&mut r, 2, 2);
    let a = Symbol::delta_type(b, -1.0, 0.5).unwrap().add(&Symbol::schwartz(0.2, 0.01, random_matrix(&mut r, 2, 2)).unwrap()).unwrap();
    let lhs = op_tau(&a, 0.0, &g).unwrap().adjoint();
    let rhs = op_tau(&adjoint_symbol_pointwise(&a), 1.0, &g).unwrap();
    assert!((lhs.matrix() - rhs.matrix()).max_abs() <= 1e-10);
    // ⟨Au, v⟩ = ⟨u, A^H v⟩ in the h-weighted inner product
    let op = op_tau(&a, 0.0, &g).unwrap();
    for _ in 0..5 {
        let u = Packets::random(&mut r, 2, 8.0, 10.0).sample(&g);
        let v = Packets::random(&mut r, 2, 8.0, 10.0).sample(&g);
        let l = op.apply(&u).unwrap().inner(&v).unwrap();
        let rr = u.inner(&lhs.apply(&v).unwrap()).unwrap();
        assert!((l - rr).norm() <= 1e-12 * (1.0 + l.norm()));
    }
}

#[test]
fn double_symbols() {
    let g = SymbolGrid::new(6.0, 32).unwrap();
    let a = Symbol::delta_type(Matrix::identity(1), -1.0, 0.25).unwrap();
    let left = op_double(&DoubleSymbol::left(a.clone()).unwrap(), &g).unwrap();
    assert!((left.matrix() - op_tau(&a, 0.0, &g).unwrap().matrix()).max_abs() <= 1e-13);
    let right = op_double(&DoubleSymbol::right(a.clone()).unwrap(), &g).unwrap();
    assert!((right.matrix() - op_tau(&a, 1.0, &g).unwrap().matrix()).max_abs() <= 1e-13);

    // b(y)·c(y′, η) = diag(b) ∘ Op₁(c)
    let b = Symbol::schwartz(0.2, 0.0, Matrix::identity(1)).unwrap();
    let sep = op_double(&DoubleSymbol::separable(b.clone(), a.clone()).unwrap(), &g).unwrap();
    let diag = op_tau(&b, 0.0, &g).unwrap();
    let composite = diag.compose(&op_tau(&a, 1.0, &g).unwrap()).unwrap();
    assert!((sep.matrix() - composite.matrix()).max_abs() <= 1e-13);

    // general separable product against direct assembly
    let c = builtin("twisted_order", &BuiltinParams { mu1: -0.5, mu2: -1.0, ..Default::default() }).unwrap();
    let d = DoubleSymbol::separable(a.clone(), c.clone()).unwrap();
    let got = op_double(&d, &g).unwrap();
    let n = g.len();
    for k in 0..n {
        for l in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for m in 0..n {
                let eta = g.eta(m);
                let v = a.eval(g.y(k), eta).unwrap()[(0, 0)] * c.eval(g.y(l), eta).unwrap()[(0, 0)];
                acc += C64::from_polar(1.0 / n as f64, (g.y(k) - g.y(l)) * eta) * v;
            }
            assert!((got.matrix()[(k, l)] - acc).norm() <= 1e-12);
        }
    }
}

/// a(η) = e^{−wη²}: k(y, y′) = e^{−(y−y′)²/4w}/(2√(πw)), periodized.
#[test]
fn gaussian_kernel() {
    let g = SymbolGrid::new(8.0, 128).unwrap();
    let w = 0.5;
    let k = kernel(&Symbol::schwartz(0.0, w, Matrix::identity(1)).unwrap(), &g).unwrap();
    let exact = |d: f64| (-d * d / (4.0 * w)).exp() / (2.0 * (PI * w).sqrt());
    let period = 2.0 * g.half_width();
    for kk in 0..g.len() {
        for l in 0..g.len() {
            let d = g.y(kk) - g.y(l);
            let want: f64 = (-2..=2).map(|j| exact(d + j as f64 * period)).sum();
            assert!((k.at(kk, l)[(0, 0)] - want).norm() <= 1e-8);
            // translation invariance
            if kk > 0 && l > 0 {
                assert!((k.at(kk, l)[(0, 0)] - k.at(kk - 1, l - 1)[(0, 0)]).norm() <= 1e-13);
            }
        }
    }
    // Schur bound dominates the true norm for this positive kernel
    let norm = edgecalc_core::linalg::svd(&k.integral_operator()).unwrap().largest();
    assert!(schur_bound(&k) >= norm * (1.0 - 1e-12));
}

#[test]
fn identity_kernel_is_dirichlet() {
    let g = SymbolGrid::new(4.0, 32).unwrap();
    let k = kernel(&Symbol::identity(1).unwrap(), &g).unwrap();
    for i in 0..32 {
        for j in 0..32 {
            let want = if i == j { 1.0 / g.h() } else { 0.0 };
            assert!((k.at(i, j)[(0, 0)] - want).norm() <= 1e-12 / g.h());
        }
    }
    assert!((&k.integral_operator() - &Matrix::identity(32)).max_abs() <= 1e-12);
}

/// (1 + |y − y′|)²|k(y, y′)| for a(η) = ⟨η⟩^{−3}, distance measured on the
/// circle.
#[test]
fn kernel_decay_order_minus_three() {
    let g = SymbolGrid::new(16.0, 256).unwrap();
    let a = builtin("twisted_order", &BuiltinParams { mu1: -3.0, ..Default::default() }).unwrap();
    let k = kernel(&a, &g).unwrap();
    let period = 2.0 * g.half_width();
    let mut sup: f64 = 0.0;
    for l in 0..g.len() {
        let d = (g.y(0) - g.y(l)).abs();
        let d = d.min(period - d);
        sup = sup.max((1.0 + d).powi(2) * k.at(0, l)[(0, 0)].norm());
    }
    // |k| ≤ (1/2π)∫⟨η⟩^{−3} = 1/π near the diagonal; the weighted sup stays O(1)
    assert!(sup.is_finite() && sup < 1.0, "{sup}");
    let norm = edgecalc_core::linalg::svd(&k.integral_operator()).unwrap().largest();
    let schur = schur_bound(&k);
    assert!(schur >= norm * (1.0 - 1e-12) && schur <= 10.0 * norm, "{schur} vs {norm}");
}

#[test]
fn rank_one_schur_bound() {
    let g = SymbolGrid::new(4.0, 32).unwrap();
    let f: Vec<f64> = (0..32).map(|k| (-g.y(k).powi(2)).exp()).collect();
    let gg: Vec<f64> = (0..32).map(|k| 1.0 / jbracket1(g.y(k) - 1.0)).collect();
    let mut values = Vec::new();
    for fk in &f {
        for gl in &gg {
            values.push(Matrix::scalar(1, C64::new(fk * gl, 0.0)));
        }
    }
    let k = Kernel::from_values(g, values).unwrap();
    let h = g.h();
    let l1 = |v: &[f64]| h * v.iter().sum::<f64>();
    let sup = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
    let l2 = |v: &[f64]| (h * v.iter().map(|x| x * x).sum::<f64>()).sqrt();
    let closed = (sup(&f) * l1(&gg)).max(sup(&gg) * l1(&f));
    assert!((schur_bound(&k) - closed).abs() <= 1e-12 * closed);
    let true_norm = l2(&f) * l2(&gg);
    let svd_norm = edgecalc_core::linalg::svd(&k.integral_operator()).unwrap().largest();
    assert!((svd_norm - true_norm).abs() <= 1e-12 * true_norm);
    assert!(schur_bound(&k) >= true_norm);
}

#[test]
fn size_cap_and_shapes() {
    let big = SymbolGrid::new(8.0, 4096).unwrap();
    assert!(matches!(op_tau(&Symbol::identity(2).unwrap(), 0.0, &big), Err(Error::Shape(_))));
    assert!(op_tau(&Symbol::identity(1).unwrap(), f64::NAN, &grid()).is_err());
    let g = grid();
    let u = GridFunction::zeros(g, 3, Domain::Space);
    assert!(op_tau(&Symbol::identity(2).unwrap(), 0.0, &g).unwrap().apply(&u).is_err());
}

#[test]
fn test_space_is_orthonormal_and_localized() {
    let g = SymbolGrid::new(4.0, 256).unwrap();
    let ts = TestSpace::wave_packets(&g, 2, 6, Some(0.5), 48.0).unwrap();
    let gram = ts.basis().adjoint().matmul(ts.basis()).unwrap();
    assert!((&gram - &Matrix::identity(12)).max_abs() < 1e-12);
    for c in 0..ts.basis().cols() {
        for edge in [0usize, 1, 510, 511] {
            assert!(ts.basis()[(edge, c)].norm() < 1e-8);
        }
    }
    assert!(TestSpace::hermite(&g, 1, 0, None).is_err());
}

#[test]
fn csv_output() {
    let m = Matrix::new(1, 2, vec![C64::new(1.0, -0.5), C64::new(0.0, 1e-20)]).unwrap();
    let mut buf = Vec::new();
    write_matrix_csv(&m, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "row,col,re,im\n0,0,1,-0.5\n0,1,0,1e-20\n");
    assert_eq!(format_real(0.1 + 0.2), "0.30000000000000004");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn op_tau_is_linear(seed in any::<u64>(), tau in -1.5f64..1.5, re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let g = SymbolGrid::new(4.0, 16).unwrap();
        let mut r = rng(seed);
        let a = Symbol::delta_type(random_matrix(&mut r, 2, 2), -0.5, 0.5).unwrap();
        let b = Symbol::schwartz(0.3, 0.1, random_matrix(&mut r, 2, 2)).unwrap();
        let c = C64::new(re, im);
        let lhs = op_tau(&a.add(&b.scale(c)).unwrap(), tau, &g).unwrap();
        let want = op_tau(&a, tau, &g).unwrap().matrix() + &op_tau(&b, tau, &g).unwrap().matrix().scale(c);
        prop_assert!((lhs.matrix() - &want).max_abs() <= 1e-13 * (1.0 + want.max_abs()));
    }
}
