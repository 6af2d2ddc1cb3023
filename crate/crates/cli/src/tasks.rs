//! One function per task. Each is a thin composition of library calls that
//! returns summary lines and CSV artifacts; nothing here touches the disk.

use std::fmt::Write as _;
use std::sync::Arc;

use edgecalc_core::analysis::{compactness_profile, mapping_norm, trace_check, trace_class_threshold, SobolevOrder};
use edgecalc_core::calculus::{adjoint_symbol, leibniz_product, requantize, ExpansionResult};
use edgecalc_core::grid::{Domain, GridFunction, SymbolGrid};
use edgecalc_core::group_action::GroupAction;
use edgecalc_core::linalg::{Matrix, C64};
use edgecalc_core::littlewood_paley::{
    frame_analysis, frame_synthesis, ws_norm_direct, ws_norm_lp, DyadicPartition, FrameSymbols, WedgeNormConfig,
};
use edgecalc_core::quantization::{format_real, op_tau, write_matrix_csv, QuantizedOperator, TestSpace};
use edgecalc_core::symbols::{fit_orders, Symbol};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ConfigError, ExperimentConfig, Task};
use crate::RunError;

/// A CSV file to be written under the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskOutput {
    pub summary: Vec<String>,
    pub artifacts: Vec<Artifact>,
}

impl TaskOutput {
    fn line(&mut self, s: impl Into<String>) {
        self.summary.push(s.into());
    }

    fn csv(&mut self, name: &str, contents: String) {
        self.artifacts.push(Artifact { name: name.into(), contents });
    }
}

type Result<T> = std::result::Result<T, RunError>;

pub fn run_task(task: Task, cfg: &ExperimentConfig, seed: u64) -> Result<TaskOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match task {
        Task::LpCheck => lp_check(cfg, &mut rng),
        Task::Norms => norms(cfg),
        Task::Quantize => quantize(cfg),
        Task::Requantize => requantize_task(cfg),
        Task::Compose => compose(cfg),
        Task::Adjoint => adjoint(cfg),
        Task::Trace => trace(cfg),
        Task::Compactness => compactness(cfg),
        Task::OrderFit => order_fit(cfg),
        Task::Thresholds => thresholds(cfg),
    }
}

fn random_function(rng: &mut ChaCha8Rng, grid: SymbolGrid, dim: usize) -> Result<GridFunction> {
    let values = (0..grid.len() * dim).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    Ok(GridFunction::new(grid, dim, Domain::Space, values)?)
}

/// Partition of unity, frame identity t·s = Id, T∘S = Id and the ratio of
/// the LP norm to the direct norm at s = `s_in[0]`.
fn lp_check(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<TaskOutput> {
    let action = match cfg.params.action.as_deref() {
        None => Arc::new(GroupAction::trivial(1)),
        Some(name) => {
            let dim = cfg.actions.get(name).map(|a| a.dim()).unwrap_or(1);
            cfg.action("params.action", Some(name), dim)?
        }
    };
    let n = action.dim();
    let partition = DyadicPartition::for_grid(&cfg.grid);
    let fs = FrameSymbols::new(partition, action.clone())?;
    let band = partition.covered_radius();
    let id = Matrix::identity(n);

    let mut csv = String::from("eta,pou_err,ts_err\n");
    let (mut pou, mut ts) = (0.0f64, 0.0f64);
    for _ in 0..cfg.params.samples {
        let eta = rng.gen_range(-band..=band);
        let e1 = (partition.sum(eta) - 1.0).abs();
        let e2 = (&fs.t(eta).matmul(&fs.s(eta))? - &id).op_norm();
        pou = pou.max(e1);
        ts = ts.max(e2);
        writeln!(csv, "{},{},{}", format_real(eta), format_real(e1), format_real(e2)).unwrap();
    }

    let norm_cfg = WedgeNormConfig::new(cfg.params.s_in[0], action);
    let mut ratios = String::from("sample,roundtrip_err,ws_norm_lp,ws_norm_direct,ratio\n");
    let (mut roundtrip, mut rmin, mut rmax) = (0.0f64, f64::INFINITY, 0.0f64);
    for i in 0..cfg.params.samples.min(20) {
        let u = random_function(rng, cfg.grid, n)?;
        let back = frame_synthesis(&frame_analysis(&u, &fs)?, &fs)?;
        let err = back.max_abs_diff(&u);
        let lp = ws_norm_lp(&u, &norm_cfg, &partition)?;
        let direct = ws_norm_direct(&u, &norm_cfg)?;
        let ratio = lp / direct;
        roundtrip = roundtrip.max(err);
        rmin = rmin.min(ratio);
        rmax = rmax.max(ratio);
        writeln!(ratios, "{i},{},{},{},{}", format_real(err), format_real(lp), format_real(direct), format_real(ratio))
            .unwrap();
    }

    let mut out = TaskOutput::default();
    out.line(format!("ts_identity_max_err={}", format_real(ts)));
    out.line(format!("pou_max_err={}", format_real(pou)));
    out.line(format!("roundtrip_max_err={}", format_real(roundtrip)));
    if rmin.is_finite() {
        out.line(format!("norm_ratio_min={} norm_ratio_max={}", format_real(rmin), format_real(rmax)));
    }
    out.csv("lp_samples.csv", csv);
    out.csv("lp_norms.csv", ratios);
    Ok(out)
}

fn orders(cfg: &ExperimentConfig) -> (SobolevOrder, SobolevOrder) {
    let p = &cfg.params;
    (SobolevOrder::new(p.s_in[0], p.s_in[1]), SobolevOrder::new(p.s_out[0], p.s_out[1]))
}

fn singular_csv(values: &[f64], top: f64) -> String {
    let mut csv = String::from("k,sigma,ratio\n");
    for (k, s) in values.iter().enumerate() {
        let r = if top > 0.0 { s / top } else { 0.0 };
        writeln!(csv, "{},{},{}", k + 1, format_real(*s), format_real(r)).unwrap();
    }
    csv
}

fn norms(cfg: &ExperimentConfig) -> Result<TaskOutput> {
    let a = cfg.build_symbol(false)?;
    let op = op_tau(&a, cfg.params.tau, &cfg.grid)?;
    let (s_in, s_out) = orders(cfg);
    let m = a.meta();
    let report = mapping_norm(&op, s_in, s_out, &m.domain_action, &m.codomain_action)?;
    let mut out = TaskOutput::default();
    out.line(report.summary());
    let p = cfg.params.p;
    out.line(format!("schatten_p={} norm_p={}", format_real(p), format_real(report.singular_values.lp_norm(p))));
    out.csv("singular_values.csv", singular_csv(report.singular_values.values(), report.norm));
    Ok(out)
}

fn quantize(cfg: &ExperimentConfig) -> Result<TaskOutput> {
    let a = cfg.build_symbol(false)?;
    let op = op_tau(&a, cfg.params.tau, &cfg.grid)?;
    let mut out = TaskOutput::default();
    out.line(format!(
        "op_norm={} rows={} cols={} tau={}",
        format_real(op.op_norm()),
        op.matrix().rows(),
        op.matrix().cols(),
        format_real(op.tau())
    ));
    let mut buf = Vec::new();
    write_matrix_csv(op.matrix(), &mut buf).map_err(RunError::Io)?;
    out.csv("operator.csv", String::from_utf8(buf).expect("CSV is ASCII"));
    Ok(out)
}

fn test_space(cfg: &ExperimentConfig, fiber: usize) -> Result<TestSpace> {
    let p = &cfg.params;
    let ts = match p.test_space.as_str() {
        "packets" => TestSpace::wave_packets(&cfg.grid, fiber, p.count, p.scale, p.eta0),
        _ => TestSpace::hermite(&cfg.grid, fiber, p.count, p.scale),
    };
    ts.map_err(|e| ConfigError::new("params.count", e.to_string()).into())
}

/// Discrepancy ‖target − Op₀(expansion_N)‖ on the test space for N = 1..=truncation.
fn expansion_table(
    cfg: &ExperimentConfig,
    target: &QuantizedOperator,
    quantize_tau: f64,
    mut expand: impl FnMut(usize) -> edgecalc_core::Result<ExpansionResult>,
) -> Result<TaskOutput> {
    let ts = test_space(cfg, target.n_in())?;
    let mut csv = String::from("truncation,discrepancy\n");
    let mut last = f64::NAN;
    for n in 1..=cfg.params.truncation {
        let e = expand(n)?;
        let d = ts.discrepancy(target, &op_tau(&e.symbol, quantize_tau, &cfg.grid)?)?;
        writeln!(csv, "{n},{}", format_real(d)).unwrap();
        last = d;
    }
    let mut out = TaskOutput::default();
    out.line(format!("truncation={} discrepancy={}", cfg.params.truncation, format_real(last)));
    out.csv("discrepancy.csv", csv);
    Ok(out)
}

fn requantize_task(cfg: &ExperimentConfig) -> Result<TaskOutput> {
    let a = cfg.build_symbol(false)?;
    let tau = cfg.params.tau;
    let target = op_tau(&a, 0.0, &cfg.grid)?;
    expansion_table(cfg, &target, tau, |n| requantize(&a, tau, n))
}

fn compose(cfg: &ExperimentConfig) -> Result<TaskOutput> {
    let a = cfg.build_symbol(false)?;
    let b = cfg.build_symbol(true)?;
    let target = op_tau(&a, 0.0, &cfg.grid)?.compose(&op_tau(&b, 0.0, &cfg.grid)?)?;
    expansion_table(cfg, &target, 0.0, |n| leibniz_product(&a, &b, n))
}

fn pairing(field: &str, spec: &Option<crate::config::MatrixSpec>, n: usize) -> Result<Matrix> {
    match spec {
        None => Ok(Matrix::identity(n)),
        Some(s) => Ok(s.build(field)?),
    }
}

fn adjoint(cfg: &ExperimentConfig) -> Result<TaskOutput> {
    let a = cfg.build_symbol(false)?;
    let j = pairing("params.pairing_j", &cfg.params.pairing_j, a.n_in())?;
    let jt = pairing("params.pairing_j_tilde", &cfg.params.pairing_j_tilde, a.n_out())?;
    let target = op_tau(&a, 0.0, &cfg.grid)?.pairing_adjoint(&j, &jt)?;
    expansion_table(cfg, &target, 0.0, |n| adjoint_symbol(&a, &j, &jt, n))
}

fn trace(cfg: &ExperimentConfig) -> Result<TaskOutput> {
    let a = cfg.build_symbol(false)?;
    let t = trace_check(&a, &cfg.grid)?;
    let mut out = TaskOutput::default();
    out.line(format!("trace_rel_err={}", format_real(t.rel_err)));
    out.csv(
        "trace.csv",
        format!(
            "lhs_re,lhs_im,rhs_re,rhs_im,rel_err\n{},{},{},{},{}\n",
            format_real(t.lhs.re),
            format_real(t.lhs.im),
            format_real(t.rhs.re),
            format_real(t.rhs.im),
            format_real(t.rel_err)
        ),
    );
    Ok(out)
}

fn compactness(cfg: &ExperimentConfig) -> Result<TaskOutput> {
    let a = cfg.build_symbol(false)?;
    let op = op_tau(&a, cfg.params.tau, &cfg.grid)?;
    let (s_in, s_out) = orders(cfg);
    let m = a.meta();
    let report = mapping_norm(&op, s_in, s_out, &m.domain_action, &m.codomain_action)?;
    let profile = compactness_profile(&report);
    let mid = profile.ratios.len() / 2;
    let mut out = TaskOutput::default();
    out.line(report.summary());
    out.line(format!(
        "first_below_tenth={} ratio_mid={} nonincreasing={}",
        profile.first_below_tenth.map(|k| k.to_string()).unwrap_or_else(|| "none".into()),
        format_real(profile.ratios.get(mid.saturating_sub(1)).copied().unwrap_or(0.0)),
        profile.is_nonincreasing()
    ));
    out.csv("compactness.csv", singular_csv(report.singular_values.values(), report.norm));
    Ok(out)
}

fn order_fit(cfg: &ExperimentConfig) -> Result<TaskOutput> {
    let a: Symbol = cfg.build_symbol(false)?;
    let f = fit_orders(&a, &cfg.grid)?;
    let mut out = TaskOutput::default();
    out.line(format!("mu1_hat={} delta_hat={} scales={}", format_real(f.mu1), format_real(f.delta), f.scales));
    out.csv(
        "order_fit.csv",
        format!("mu1_hat,delta_hat,scales\n{},{},{}\n", format_real(f.mu1), format_real(f.delta), f.scales),
    );
    Ok(out)
}

fn thresholds(cfg: &ExperimentConfig) -> Result<TaskOutput> {
    let t = trace_class_threshold(cfg.params.q, cfg.params.delta)?;
    let mut out = TaskOutput::default();
    out.line(t.summary());
    out.csv(
        "thresholds.csv",
        format!(
            "q,delta,p,mu1_lt,mu2_lt\n{},{},{},{},{}\n",
            cfg.params.q,
            format_real(cfg.params.delta),
            t.p,
            format_real(t.mu1_bound),
            format_real(t.mu2_bound)
        ),
    );
    Ok(out)
}
