//! Acceptance battery: every certified property on the builtin measures,
//! collected into one deterministic report.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand_distr::{Distribution, Uniform};
use serde::Serialize;

use crate::bounds::{integrate_profile, lipschitz_profile, ThetaProfile};
use crate::error::{Error, Result};
use crate::measures::{build_builtin, Measure, MeasureDoc};
use crate::spectrum::eigen_compare;
use crate::transport::{roundtrip_error, transport_from_gaussian, IntegratorConfig};
use crate::verify::{
    check_hessian_bounds, default_hessian_points, default_t_grid, empirical_lipschitz, majorization_check,
    pushforward_ks_1d, renyi_entropy_1d, rng_for, LipschitzDirection,
};

/// The builtin measure set, labelled.
pub fn builtin_measures() -> Vec<(&'static str, MeasureDoc)> {
    vec![
        ("delta_0", MeasureDoc::mixture(vec![vec![0.0]], vec![1.0])),
        ("delta_2", MeasureDoc::mixture(vec![vec![2.0]], vec![1.0])),
        ("two_center_1", MeasureDoc::mixture(vec![vec![1.0], vec![-1.0]], vec![0.5, 0.5])),
        ("uniform", MeasureDoc::uniform_interval(-0.5, 0.5)),
        ("truncated_gaussian", MeasureDoc::truncated_gaussian(-0.4, 0.4)),
        ("inflated", MeasureDoc::inflated(-0.4, 0.4, 0.5)),
        ("gaussian_variance_4", MeasureDoc::gaussian_variance(4.0)),
    ]
}

fn builtin(label: &str) -> Result<Measure> {
    let (_, doc) = builtin_measures()
        .into_iter()
        .find(|(l, _)| *l == label)
        .ok_or_else(|| Error::invalid(format!("unknown builtin {label}")))?;
    build_builtin(&doc)
}

fn two_center(r: f64) -> Result<Measure> {
    build_builtin(&MeasureDoc::mixture(vec![vec![r], vec![-r]], vec![0.5, 0.5]))
}

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub metrics: BTreeMap<String, f64>,
}

impl CriterionResult {
    fn new(id: u8, name: &str) -> Self {
        Self {
            id,
            name: name.to_string(),
            passed: true,
            metrics: BTreeMap::new(),
        }
    }

    fn metric(&mut self, key: impl Into<String>, value: f64) {
        self.metrics.insert(key.into(), value);
    }

    fn require(&mut self, ok: bool) {
        self.passed &= ok;
    }

    pub fn summary_line(&self) -> String {
        format!(
            "criterion {:>2} {:<22} {}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" }
        )
    }
}

/// Suite output. Contains no timings, so equal seeds give equal bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub passed: bool,
    pub criteria: Vec<CriterionResult>,
}

impl SuiteReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

/// `dT(0)` for the pair `±R` equals `e^{R²/2}`.
pub fn criterion_tightness() -> Result<CriterionResult> {
    let mut c = CriterionResult::new(1, "tightness");
    for r in [0.5, 1.0, 1.5] {
        let m = two_center(r)?;
        let cfg = IntegratorConfig::for_measure(&m).with_steps(4096);
        let flow = transport_from_gaussian(&m, &[0.0], &cfg)?;
        let exact = (0.5 * r * r).exp();
        let rel = (flow.jacobian[(0, 0)] - exact).abs() / exact;
        c.metric(format!("R={r}_dT0"), flow.jacobian[(0, 0)]);
        c.metric(format!("R={r}_rel_error"), rel);
        c.require(rel < 1e-3);
    }
    Ok(c)
}

/// Hessian bounds on the 20 × 200 grid for every builtin.
pub fn criterion_hessian(seed: u64) -> Result<CriterionResult> {
    let mut c = CriterionResult::new(2, "hessian_bounds");
    let t_grid = default_t_grid();
    for (label, doc) in builtin_measures() {
        let m = build_builtin(&doc)?;
        let points = default_hessian_points(&m, 200, seed);
        let r = check_hessian_bounds(&m, &t_grid, &points, seed)?;
        c.metric(format!("{label}_worst_margin"), r.bounds.worst_margin);
        c.metric(format!("{label}_fd_worst_margin"), r.finite_difference.worst_margin);
        c.require(r.bounds.worst_margin >= -1e-6);
    }
    Ok(c)
}

/// Empirical Lipschitz constants against the bounds, and `‖dS‖ = √β` for
/// the Gaussian of variance `1/β`.
pub fn criterion_lipschitz(seed: u64, n: usize) -> Result<CriterionResult> {
    let mut c = CriterionResult::new(3, "lipschitz");
    for (label, doc) in builtin_measures() {
        let m = build_builtin(&doc)?;
        let bound = match lipschitz_profile(&m) {
            Ok(p) => p.lipschitz_bound(),
            Err(Error::OutOfRegime(_)) => continue,
            Err(e) => return Err(e),
        };
        let cfg = IntegratorConfig::for_measure(&m);
        let r = empirical_lipschitz(&m, n, &cfg, seed, LipschitzDirection::Transport)?;
        let max = r.details["max_op_norm"];
        c.metric(format!("{label}_max_op_norm"), max);
        c.metric(format!("{label}_bound"), bound);
        c.require(max <= bound * 1.001);
    }
    let m = builtin("gaussian_variance_4")?;
    let cfg = IntegratorConfig::for_measure(&m);
    let r = empirical_lipschitz(&m, n, &cfg, seed, LipschitzDirection::Inverse)?;
    let dev = (r.details["max_op_norm"] - 2.0).abs().max((r.details["min_op_norm"] - 2.0).abs());
    c.metric("inverse_gaussian_variance_4_max_deviation", dev);
    c.require(dev < 1e-6);
    Ok(c)
}

/// KS distance between `T_*γ₁` and `μ` at `n` samples.
pub fn criterion_pushforward(seed: u64, n: usize) -> Result<CriterionResult> {
    let mut c = CriterionResult::new(4, "pushforward");
    for label in ["delta_2", "two_center_1", "truncated_gaussian"] {
        let m = builtin(label)?;
        let cfg = IntegratorConfig::for_measure(&m);
        let r = pushforward_ks_1d(&m, n, &cfg, seed)?;
        let ks = r.details["ks"];
        c.metric(format!("{label}_ks"), ks);
        c.require(ks < 0.01);
    }
    Ok(c)
}

/// Closed-form profile integrals on random parameters.
pub fn criterion_integrals(seed: u64) -> Result<CriterionResult> {
    let mut c = CriterionResult::new(5, "closed_form_integrals");
    let mut rng = rng_for(seed, 5);
    let unit = Uniform::new(0.0, 1.0).expect("valid range");
    let mut worst = [0.0f64; 3];
    for _ in 0..10 {
        let sigma = 0.2 + 2.8 * unit.sample(&mut rng);
        let kappa = -2.0 + (2.0 + 0.95 / (sigma * sigma)) * unit.sample(&mut rng);
        let p = ThetaProfile::logconcave(kappa, sigma)?;
        let exact = 0.5 * (1.0 - kappa * sigma * sigma) + sigma.ln();
        worst[0] = worst[0].max((integrate_profile(&p, p.default_t_max())? - exact).abs());

        let r = 3.0 * unit.sample(&mut rng);
        let p = ThetaProfile::mixture(r)?;
        worst[1] = worst[1].max((integrate_profile(&p, p.default_t_max())? - 0.5 * r * r).abs());

        let beta = 0.1 + 9.9 * unit.sample(&mut rng);
        let p = ThetaProfile::logconvex(beta)?;
        worst[2] = worst[2].max((integrate_profile(&p, p.default_t_max())? + 0.5 * beta.ln()).abs());
    }
    for (name, w) in ["logconcave", "mixture", "logconvex"].iter().zip(worst) {
        c.metric(format!("{name}_max_abs_error"), w);
        c.require(w < 1e-8);
    }
    Ok(c)
}

fn max_roundtrip(m: &Measure, xs: &[f64], cfg: &IntegratorConfig) -> Result<f64> {
    let errs = crate::par::map(xs, |x| roundtrip_error(m, &[*x], cfg));
    errs.into_iter().try_fold(0.0f64, |a, e| Ok(a.max(e?)))
}

/// `S(T(x)) = x` on 41 points for the `±1` pair, with the observed order of
/// the integrator.
pub fn criterion_roundtrip() -> Result<CriterionResult> {
    let mut c = CriterionResult::new(6, "roundtrip");
    let m = two_center(1.0)?;
    let xs: Vec<f64> = (0..41).map(|i| -4.0 + 0.2 * i as f64).collect();
    let base = IntegratorConfig::for_measure(&m);
    let refined = max_roundtrip(&m, &xs, &base.with_richardson(true))?;
    let e16 = max_roundtrip(&m, &xs, &base.with_steps(16))?;
    let e32 = max_roundtrip(&m, &xs, &base.with_steps(32))?;
    let order = (e16 / e32).log2();
    c.metric("max_error_richardson", refined);
    c.metric("max_error_16_steps", e16);
    c.metric("max_error_32_steps", e32);
    c.metric("observed_order", order);
    c.require(refined < 1e-5 && order >= 3.5);
    Ok(c)
}

/// Eigenvalue comparison with the Gaussian spectrum.
pub fn criterion_spectrum() -> Result<CriterionResult> {
    let mut c = CriterionResult::new(7, "spectrum");
    let mut gauss_done = false;
    for (label, m) in [("uniform", builtin("uniform")?), ("two_center_0.5", two_center(0.5)?)] {
        let r = eigen_compare(&m, 5, 2048)?;
        if !gauss_done {
            for (i, v) in r.eigenvalues_gauss.iter().enumerate() {
                let ok = if i == 0 { v.abs() < 1e-6 } else { (v - i as f64).abs() <= 0.01 * i as f64 };
                c.metric(format!("gauss_lambda_{i}"), *v);
                c.require(ok);
            }
            gauss_done = true;
        }
        c.metric(format!("{label}_bound_factor"), r.bound_factor);
        c.metric(format!("{label}_worst_margin"), r.worst_margin);
        c.metric(format!("{label}_lambda_0"), r.eigenvalues_mu[0]);
        c.require(r.worst_margin >= -1e-6 && r.eigenvalues_mu[0].abs() < 1e-6);
    }
    Ok(c)
}

/// Majorization of `γ₁` by the uniform law and `h₂(γ₁)`.
pub fn criterion_majorization() -> Result<CriterionResult> {
    let mut c = CriterionResult::new(8, "majorization");
    let r = majorization_check(&builtin("uniform")?)?;
    c.metric("grid_points", r.trials as f64);
    c.metric("worst_margin", r.worst_margin);
    c.require(r.passed && r.trials >= 200);
    let h2 = renyi_entropy_1d(&builtin("delta_0")?, 2.0)?;
    c.metric("renyi_2_gauss", h2);
    c.require((h2 - 1.265512).abs() < 1e-6);
    Ok(c)
}

/// `T(0) = 0` for symmetric measures.
pub fn criterion_symmetry() -> Result<CriterionResult> {
    let mut c = CriterionResult::new(9, "symmetry");
    for (label, doc) in builtin_measures() {
        let m = build_builtin(&doc)?;
        if !m.is_symmetric() {
            continue;
        }
        let cfg = IntegratorConfig::for_measure(&m);
        let t0 = transport_from_gaussian(&m, &vec![0.0; m.dim()], &cfg)?;
        let norm = t0.endpoint.iter().map(|v| v * v).sum::<f64>().sqrt();
        c.metric(format!("{label}_T0_norm"), norm);
        c.require(norm < 1e-6);
    }
    Ok(c)
}

/// Sample sizes of the statistical criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub lipschitz_samples: usize,
    pub ks_samples: usize,
}

impl SuiteConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            lipschitz_samples: 1000,
            ks_samples: 100_000,
        }
    }
}

/// Runs criteria 1–9 and returns the report with per-criterion wall times.
pub fn run_suite_timed(cfg: &SuiteConfig) -> Result<(SuiteReport, Vec<Duration>)> {
    let seed = cfg.seed;
    let jobs: Vec<Box<dyn Fn() -> Result<CriterionResult> + '_>> = vec![
        Box::new(criterion_tightness),
        Box::new(move || criterion_hessian(seed)),
        Box::new(move || criterion_lipschitz(seed, cfg.lipschitz_samples)),
        Box::new(move || criterion_pushforward(seed, cfg.ks_samples)),
        Box::new(move || criterion_integrals(seed)),
        Box::new(criterion_roundtrip),
        Box::new(criterion_spectrum),
        Box::new(criterion_majorization),
        Box::new(criterion_symmetry),
    ];
    let mut criteria = Vec::new();
    let mut times = Vec::new();
    for job in jobs {
        let start = Instant::now();
        criteria.push(job()?);
        times.push(start.elapsed());
    }
    let passed = criteria.iter().all(|c| c.passed);
    Ok((SuiteReport { seed, passed, criteria }, times))
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    run_suite_timed(cfg).map(|(r, _)| r)
}
