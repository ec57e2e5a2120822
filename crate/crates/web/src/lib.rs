//! Browser bindings for the heat-flow transport demo.
//!
//! Every export takes and returns JSON strings. The `*_json` functions are
//! plain Rust and carry the logic; the `#[wasm_bindgen]` wrappers only
//! convert errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use heatflow::bounds::{lipschitz_profile, ThetaProfile};
use heatflow::spectrum::eigen_compare;
use heatflow::suite::builtin_measures;
use heatflow::transport::{transport_from_gaussian, IntegratorConfig};
use heatflow::{build_builtin, Measure, MeasureDoc};
use serde_json::json;
use wasm_bindgen::prelude::*;

const MAX_POINTS: usize = 401;
const MAX_GRID: usize = 8192;

fn load(measure_json: &str) -> Result<Measure, String> {
    let doc = MeasureDoc::from_json(measure_json).map_err(|e| e.to_string())?;
    let m = build_builtin(&doc).map_err(|e| e.to_string())?;
    if m.dim() != 1 {
        return Err("the demo plots one-dimensional measures".into());
    }
    Ok(m)
}

/// Builtin measures as `{label: document}`.
pub fn builtins_json() -> String {
    let docs: serde_json::Map<String, serde_json::Value> = builtin_measures()
        .into_iter()
        .map(|(l, d)| (l.to_string(), serde_json::from_str(&d.to_json()).expect("valid json")))
        .collect();
    serde_json::Value::Object(docs).to_string()
}

/// `T(x)` and `T'(x)` on `n` points of `[lo, hi]`, with the certified bound
/// and the target density over the image.
pub fn transport_curve_json(measure_json: &str, lo: f64, hi: f64, n: usize, steps: usize) -> Result<String, String> {
    let m = load(measure_json)?;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(format!("need a finite range lo < hi, got [{lo}, {hi}]"));
    }
    if !(2..=MAX_POINTS).contains(&n) {
        return Err(format!("point count must lie in 2..={MAX_POINTS}"));
    }
    let cfg = IntegratorConfig::for_measure(&m).with_steps(steps.max(16));
    let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let mut ys = Vec::with_capacity(n);
    let mut dys = Vec::with_capacity(n);
    for x in &xs {
        let f = transport_from_gaussian(&m, &[*x], &cfg).map_err(|e| e.to_string())?;
        ys.push(f.endpoint[0]);
        dys.push(f.jacobian[(0, 0)]);
    }
    let (ylo, yhi) = (ys[0], ys[n - 1]);
    let grid: Vec<f64> = (0..n).map(|i| ylo + (yhi - ylo) * i as f64 / (n - 1) as f64).collect();
    let rho: Vec<f64> = grid.iter().map(|y| m.density_1d(*y)).collect();
    let bound = lipschitz_profile(&m).ok().map(|p| p.lipschitz_bound());
    Ok(json!({
        "x": xs,
        "t": ys,
        "dt": dys,
        "bound": bound,
        "density": {"y": grid, "rho": rho},
    })
    .to_string())
}

/// `θ(t)` on `n` points of `[0, t_max]`, with the integral, bound and
/// regime. `a` and `b` are `(κ, σ)`, `(R, _)` or `(β, _)` by kind.
pub fn theta_profile_json(kind: &str, a: f64, b: f64, t_max: f64, n: usize) -> Result<String, String> {
    let p = match kind {
        "logconcave" => ThetaProfile::logconcave(a, b),
        "mixture" => ThetaProfile::mixture(a),
        "logconvex" => ThetaProfile::logconvex(a),
        other => return Err(format!("unknown profile kind '{other}'")),
    }
    .map_err(|e| e.to_string())?;
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(format!("t_max must be positive, got {t_max}"));
    }
    if !(2..=4 * MAX_POINTS).contains(&n) {
        return Err(format!("point count must lie in 2..={}", 4 * MAX_POINTS));
    }
    let ts: Vec<f64> = (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect();
    let theta: Vec<f64> = ts.iter().map(|t| p.theta(*t)).collect();
    Ok(json!({
        "t": ts,
        "theta": theta,
        "t0": p.t0,
        "integral": p.closed_form_integral,
        "bound": p.lipschitz_bound(),
        "regime": p.regime(),
        "lower": p.is_lower(),
    })
    .to_string())
}

/// Eigenvalue comparison report for the weighted Laplacian.
pub fn spectrum_json(measure_json: &str, k: usize, grid: usize) -> Result<String, String> {
    let m = load(measure_json)?;
    if !(1..=16).contains(&k) || !(8..=MAX_GRID).contains(&grid) {
        return Err(format!("need 1 ≤ k ≤ 16 and 8 ≤ grid ≤ {MAX_GRID}"));
    }
    let r = eigen_compare(&m, k, grid).map_err(|e| e.to_string())?;
    serde_json::to_string(&r).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn builtins() -> String {
    builtins_json()
}

#[wasm_bindgen]
pub fn transport_curve(measure_json: &str, lo: f64, hi: f64, n: usize, steps: usize) -> Result<String, JsValue> {
    transport_curve_json(measure_json, lo, hi, n, steps).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn theta_profile(kind: &str, a: f64, b: f64, t_max: f64, n: usize) -> Result<String, JsValue> {
    theta_profile_json(kind, a, b, t_max, n).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn spectrum(measure_json: &str, k: usize, grid: usize) -> Result<String, JsValue> {
    spectrum_json(measure_json, k, grid).map_err(|e| JsValue::from_str(&e))
}
