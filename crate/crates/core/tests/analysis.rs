mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use common::{random_matrix, rel_diff, rng, Packets};
use edgecalc_core::analysis::*;
use edgecalc_core::grid::SymbolGrid;
use edgecalc_core::group_action::GroupAction;
use edgecalc_core::linalg::{schatten_norm, Matrix, C64};
use edgecalc_core::littlewood_paley::{ws_norm_weighted, DyadicPartition, FrameSymbols, WedgeNormConfig};
use edgecalc_core::quantization::{op_tau, QuantizedOperator};
use edgecalc_core::symbols::{builtin, BuiltinParams, Symbol};
use edgecalc_core::Error;

fn jordan() -> Arc<GroupAction> {
    Arc::new(GroupAction::new(Matrix::from_real_rows(&[&[0.5, 1.0], &[0.0, -0.5]]).unwrap()).unwrap())
}

fn trivial(n: usize) -> Arc<GroupAction> {
    Arc::new(GroupAction::trivial(n))
}

#[test]
fn weight_matrix_identities() {
    let g = SymbolGrid::new(8.0, 64).unwrap();
    let mut r = rng(2);
    for (s, s2, act) in [(0.0, 0.0, trivial(2)), (1.5, 0.0, jordan()), (-1.0, 2.0, jordan())] {
        let cfg = WedgeNormConfig::weighted(s, s2, act);
        let w = ws_weight_pair(&g, &cfg).unwrap();
        let id = w.forward.matmul(&w.inverse).unwrap();
        assert!((&id - &Matrix::identity(128)).max_abs() <= 1e-10);
        for _ in 0..5 {
            let u = Packets::random(&mut r, 2, 8.0, 6.0).sample(&g);
            let wu = w.forward.matvec(u.values()).unwrap();
            let norm = wu.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(rel_diff(norm, ws_norm_weighted(&u, &cfg).unwrap()) <= 1e-12);
        }
    }
    // s = 0, trivial action: W^H W = h·Id
    let w = ws_weight_matrix(&g, &WedgeNormConfig::new(0.0, trivial(1))).unwrap();
    let gram = w.adjoint().matmul(&w).unwrap();
    assert!((&gram - &Matrix::identity(64).scale_real(g.h())).max_abs() <= 1e-12);
}

#[test]
fn conditioning_guard() {
    let g = SymbolGrid::new(8.0, 512).unwrap();
    let strong = Arc::new(GroupAction::diagonal(&[8.0, -8.0]));
    let err = ws_weight_pair(&g, &WedgeNormConfig::new(0.0, strong)).unwrap_err();
    assert!(matches!(err, Error::Conditioning(_)) && err.is_numerical_guard());
}

#[test]
fn identity_mapping_norm_is_one() {
    let g = SymbolGrid::new(8.0, 64).unwrap();
    let id = op_tau(&Symbol::identity(2).unwrap(), 0.0, &g).unwrap();
    let actions = [trivial(2), jordan(), Arc::new(GroupAction::diagonal(&[-1.0, 1.0]))];
    for act in &actions {
        for s in [SobolevOrder::smooth(0.0), SobolevOrder::new(1.0, 0.0), SobolevOrder::new(-2.0, 1.5)] {
            let rep = mapping_norm(&id, s, s, act, act).unwrap();
            assert!((rep.norm - 1.0).abs() <= 1e-10, "{}", rep.summary());
            let prof = compactness_profile(&rep);
            assert!(prof.ratios.iter().all(|&x| (x - 1.0).abs() <= 1e-10));
            assert_eq!(prof.first_below_tenth, None);
        }
    }
}

#[test]
fn bessel_potential_is_an_isometry() {
    let g = SymbolGrid::new(8.0, 64).unwrap();
    for mu in [-2.0, -0.5, 1.0] {
        for act in [trivial(2), jordan()] {
            let a = builtin("twisted_order", &BuiltinParams { n: 2, mu1: mu, ..Default::default() })
                .unwrap()
                .with_actions(act.clone(), act.clone())
                .unwrap();
            let op = op_tau(&a, 0.0, &g).unwrap();
            let s = 0.5;
            let rep = mapping_norm(&op, SobolevOrder::smooth(s), SobolevOrder::smooth(s - mu), &act, &act).unwrap();
            assert!((rep.norm - 1.0).abs() <= 1e-10, "μ = {mu}: {}", rep.norm);
        }
    }
}

fn decaying(mu1: f64) -> QuantizedOperator {
    let g = SymbolGrid::new(8.0, 64).unwrap();
    let a = builtin("twisted_order", &BuiltinParams { mu1, mu2: -1.0, ..Default::default() }).unwrap();
    op_tau(&a, 0.0, &g).unwrap()
}

#[test]
fn compactness_profiles() {
    let t = trivial(1);
    let zero = SobolevOrder::smooth(0.0);
    let p1 = compactness_profile(&mapping_norm(&decaying(-1.0), zero, zero, &t, &t).unwrap());
    assert!(p1.ratio(32) < 0.1, "{}", p1.ratio(32));
    assert!(p1.is_nonincreasing());
    let p2 = compactness_profile(&mapping_norm(&decaying(-2.0), zero, zero, &t, &t).unwrap());
    assert!(p2.first_below_tenth.unwrap() < p1.first_below_tenth.unwrap());
    assert!((2..=64).all(|k| p2.ratio(k) <= p1.ratio(k) + 1e-12));
}

/// ⟨y⟩-weighted twisted order-(0, 0) symbol with y-dependence.
fn order_zero_twisted() -> Symbol {
    let b = Matrix::from_real_rows(&[&[1.0, 0.5], &[-0.5, 2.0]]).unwrap();
    let tw = Symbol::twisted_order(b, 0.0, 0.0, jordan(), jordan()).unwrap();
    let bump = Symbol::schwartz(0.2, 0.0, Matrix::identity(2)).unwrap().with_actions(jordan(), jordan()).unwrap();
    tw.product(&bump).unwrap().add(&tw.scale(C64::new(0.25, 0.0))).unwrap()
}

#[test]
fn order_zero_norm_is_stable_under_refinement() {
    let coarse = SymbolGrid::new(8.0, 64).unwrap();
    let a = order_zero_twisted();
    let zero = SobolevOrder::smooth(0.0);
    let n1 = mapping_norm(&op_tau(&a, 0.0, &coarse).unwrap(), zero, zero, &jordan(), &jordan()).unwrap().norm;
    let n2 = mapping_norm(&op_tau(&a, 0.0, &coarse.refined()).unwrap(), zero, zero, &jordan(), &jordan()).unwrap().norm;
    assert!(n1.is_finite() && rel_diff(n1, n2) < 0.2, "{n1} vs {n2}");
}

#[test]
fn frame_elimination_ratio() {
    let g = SymbolGrid::new(8.0, 64).unwrap();
    let a = order_zero_twisted();
    let op = op_tau(&a, 0.0, &g).unwrap();
    let zero = SobolevOrder::smooth(0.0);
    let wedge = mapping_norm(&op, zero, zero, &jordan(), &jordan()).unwrap().norm;
    let fs = FrameSymbols::new(DyadicPartition::for_grid(&g), jordan()).unwrap();
    let sat = frame_conjugate(&op, &fs, &fs).unwrap().op_norm();
    let ratio = sat / wedge;
    assert!((0.1..=10.0).contains(&ratio), "{sat} / {wedge}");
}

#[test]
fn trace_formula_schwartz() {
    let g = SymbolGrid::new(16.0, 256).unwrap();
    let mut r = rng(6);
    let k = random_matrix(&mut r, 2, 2);
    let (wy, we) = (0.5, 0.3);
    let a = Symbol::schwartz(wy, we, k.clone()).unwrap();
    let t = trace_check(&a, &g).unwrap();
    assert!(t.rel_err <= 1e-6, "{}", t.rel_err);
    // (∫e^{−w_y y²})(∫e^{−w_η η²}) tr K / 2π
    let analytic = k.trace() * ((PI / wy).sqrt() * (PI / we).sqrt() / (2.0 * PI));
    assert!((t.lhs - analytic).norm() <= 1e-6 * analytic.norm());
    assert!((t.rhs - analytic).norm() <= 1e-6 * analytic.norm());

    let b = Symbol::schwartz(0.8, 0.6, random_matrix(&mut r, 2, 2)).unwrap();
    let tb = trace_check(&b, &g).unwrap();
    let tab = trace_check(&a.add(&b).unwrap(), &g).unwrap();
    assert!((tab.lhs - (t.lhs + tb.lhs)).norm() <= 1e-12 * (1.0 + tab.lhs.norm()));

    let zero = trace_check(&Symbol::schwartz(0.5, 0.5, Matrix::zeros(2, 2)).unwrap(), &g).unwrap();
    assert_eq!((zero.lhs, zero.rhs, zero.rel_err), (C64::new(0.0, 0.0), C64::new(0.0, 0.0), 0.0));
    let rect = Symbol::schwartz(0.5, 0.5, Matrix::zeros(2, 3)).unwrap();
    assert!(matches!(trace_check(&rect, &g), Err(Error::Shape(_))));
}

#[test]
fn threshold_table() {
    for q in 1..=5u32 {
        for delta in [0.0, 0.25, 0.5] {
            let t = trace_class_threshold(q, delta).unwrap();
            let p = ((q as f64 + 1.0) / 4.0).ceil();
            assert_eq!(t.p as f64, p);
            assert_eq!(t.mu1_bound, -(q as f64) - 4.0 * p * delta);
            assert_eq!(t.mu2_bound, -8.0 * p);
        }
    }
    assert_eq!(trace_class_threshold(1, 0.0).unwrap().summary(), "p=1 mu1_lt=-1 mu2_lt=-8");
    assert_eq!(trace_class_threshold(1, 0.5).unwrap().summary(), "p=1 mu1_lt=-3 mu2_lt=-8");
    assert_eq!(trace_class_threshold(3, 0.0).unwrap().summary(), "p=1 mu1_lt=-3 mu2_lt=-8");
    assert!(trace_class_threshold(0, 0.0).is_err() && trace_class_threshold(1, 1.0).is_err());
    let t = trace_class_threshold(1, 0.0).unwrap();
    assert!(t.admits(-10.0, -10.0) && !t.admits(-1.0, -10.0));
}

#[test]
fn c1_norms() {
    let g = SymbolGrid::new(8.0, 64).unwrap();
    let t = trivial(1);
    let zero = SobolevOrder::smooth(0.0);
    // rank one
    let mut r = rng(9);
    let u = random_matrix(&mut r, 64, 1);
    let v = random_matrix(&mut r, 64, 1);
    let rank1 = QuantizedOperator::from_matrix(g, 1, 1, u.matmul(&v.adjoint()).unwrap(), 0.0, "rank1").unwrap();
    let c1 = c1_norm_of_operator(&rank1, zero, zero, &t, &t).unwrap();
    assert!(rel_diff(c1, rank1.op_norm()) < 1e-10);

    // Schwartz symbol: stable under refinement, dominates |trace|
    let a = Symbol::schwartz(0.5, 0.3, Matrix::identity(1)).unwrap();
    let n1 = c1_norm_of_operator(&op_tau(&a, 0.0, &g).unwrap(), zero, zero, &t, &t).unwrap();
    let n2 = c1_norm_of_operator(&op_tau(&a, 0.0, &g.refined()).unwrap(), zero, zero, &t, &t).unwrap();
    assert!(rel_diff(n1, n2) < 0.2, "{n1} vs {n2}");
    let tr = trace_check(&a, &g).unwrap().lhs.norm();
    assert!(n1 >= tr * (1.0 - 1e-12));
}

#[test]
fn holder_on_quantized_pairs() {
    let g = SymbolGrid::new(6.0, 32).unwrap();
    let act = jordan();
    let s = SobolevOrder::new(0.5, 0.0);
    let w = ws_weight_pair(&g, &WedgeNormConfig::new(s.s1, act.clone())).unwrap();
    let conj = |op: &QuantizedOperator| w.forward.matmul(op.matrix()).unwrap().matmul(&w.inverse).unwrap();
    let mut r = rng(10);
    for _ in 0..20 {
        let a = Symbol::twisted_order(random_matrix(&mut r, 2, 2), -1.0, 0.0, act.clone(), act.clone()).unwrap();
        let bump = Symbol::schwartz(0.3, 0.0, random_matrix(&mut r, 2, 2)).unwrap().with_actions(act.clone(), act.clone()).unwrap();
        let (oa, ob) = (op_tau(&a, 0.0, &g).unwrap(), op_tau(&bump.product(&a).unwrap(), 0.5, &g).unwrap());
        let lhs = c1_norm_of_operator(&oa.compose(&ob).unwrap(), s, s, &act, &act).unwrap();
        let rhs = schatten_norm(&conj(&oa), 2.0).unwrap() * schatten_norm(&conj(&ob), 2.0).unwrap();
        assert!(lhs <= rhs * (1.0 + 1e-10), "{lhs} > {rhs}");
    }
}

#[test]
fn report_summary_and_shapes() {
    let g = SymbolGrid::new(8.0, 64).unwrap();
    let id = op_tau(&Symbol::identity(1).unwrap(), 0.0, &g).unwrap();
    let t = trivial(1);
    let rep = mapping_norm(&id, SobolevOrder::smooth(0.0), SobolevOrder::new(0.0, 0.0), &t, &t).unwrap();
    assert!(rep.summary().starts_with("norm=") && rep.summary().ends_with(" s_in=(0,0) s_out=(0,0) grid=N64L8"));
    assert!(matches!(mapping_norm(&id, SobolevOrder::smooth(0.0), SobolevOrder::smooth(0.0), &jordan(), &t), Err(Error::Shape(_))));
}
