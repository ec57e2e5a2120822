use serde::Serialize;

use super::{gaussian_samples, measure_samples, require_1d, VerificationReport};
use crate::bounds::{inverse_profile, lipschitz_profile};
use crate::error::Result;
use crate::measures::{Cdf1d, Measure};
use crate::transport::{flow_forward, transport_from_gaussian, IntegratorConfig, MapTable1d};

/// Which map an empirical Lipschitz check measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LipschitzDirection {
    /// `T`, sampled at `x ~ γ_d`.
    Transport,
    /// `S = T^{-1}`, sampled at `x ~ μ`.
    Inverse,
}

/// Largest `‖dT‖` (or `‖dS‖`) over `n` samples against the theoretical bound.
pub fn empirical_lipschitz(
    m: &Measure,
    n: usize,
    cfg: &IntegratorConfig,
    seed: u64,
    direction: LipschitzDirection,
) -> Result<VerificationReport> {
    let profile = match direction {
        LipschitzDirection::Transport => lipschitz_profile(m)?,
        LipschitzDirection::Inverse => inverse_profile(m)?,
    };
    let bound = profile.lipschitz_bound();
    let xs = match direction {
        LipschitzDirection::Transport => gaussian_samples(seed, 0, n, m.dim()),
        LipschitzDirection::Inverse => measure_samples(m, seed, 0, n)?,
    };
    let flows = crate::par::map(&xs, |x| match direction {
        LipschitzDirection::Transport => transport_from_gaussian(m, x, cfg),
        LipschitzDirection::Inverse => flow_forward(m, x, cfg),
    });
    let flows = flows.into_iter().collect::<Result<Vec<_>>>()?;
    let norms: Vec<f64> = flows.iter().map(|f| f.op_norm).collect();
    let gronwall_excess = flows
        .iter()
        .filter_map(|f| f.log_lipschitz_accum.map(|a| f.op_norm - a.exp()))
        .fold(f64::NEG_INFINITY, f64::max);
    let max = norms.iter().copied().fold(0.0, f64::max);
    let min = norms.iter().copied().fold(f64::INFINITY, f64::min);
    let config = serde_json::json!({"n": n, "integrator": cfg, "direction": direction});
    Ok(VerificationReport::new(
        "lipschitz",
        m,
        norms.iter().map(|v| bound - v).collect(),
        1e-3 * bound,
        seed,
        config,
    )
    .detail("bound", bound)
    .detail("max_op_norm", max)
    .detail("min_op_norm", min)
    .detail("max_gronwall_excess", gronwall_excess))
}

/// `sup |F_n − F|` for sorted samples.
pub fn ks_statistic<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let f = cdf(y);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Kolmogorov–Smirnov distance between `T(xᵢ)`, `xᵢ ~ γ₁`, and `μ`.
///
/// `T` is tabulated on `[-6, 6]` and interpolated; samples outside are
/// transported directly.
pub fn pushforward_ks_1d(m: &Measure, n: usize, cfg: &IntegratorConfig, seed: u64) -> Result<VerificationReport> {
    require_1d(m, "pushforward check")?;
    let table = MapTable1d::new(m, cfg, -6.0, 6.0, 601)?;
    let xs = gaussian_samples(seed, 0, n, 1);
    let mut ys = xs
        .iter()
        .map(|x| table.eval(x[0]))
        .collect::<Result<Vec<f64>>>()?;
    ys.sort_by(f64::total_cmp);
    let cdf = Cdf1d::new(m, 4096)?;
    let ks = ks_statistic(&ys, |y| cdf.cdf(y));
    let threshold = 1.63 / (n as f64).sqrt() + 0.003;
    let config = serde_json::json!({"n": n, "integrator": cfg, "table_nodes": 601});
    Ok(
        VerificationReport::new("pushforward", m, vec![threshold - ks], 0.0, seed, config)
            .detail("ks", ks)
            .detail("threshold", threshold)
            .detail("n", n as f64),
    )
}
