use super::{require_1d, VerificationReport};
use crate::bounds::lipschitz_profile;
use crate::error::{Error, Result};
use crate::measures::{std_normal_cdf, Measure};
use crate::quadrature::integrate_doubling;

const SCAN_POINTS: usize = 4096;
const T_GRID: usize = 256;

/// Piecewise-smooth integral over `[lo, hi]`, split at the points where
/// `ρ − level` changes sign.
fn integrate_split<F: Fn(f64) -> f64>(rho: &dyn Fn(f64) -> f64, level: f64, lo: f64, hi: f64, f: F) -> Result<f64> {
    let step = (hi - lo) / SCAN_POINTS as f64;
    let mut cuts = vec![lo];
    let mut prev = rho(lo) - level;
    for k in 1..=SCAN_POINTS {
        let x = if k == SCAN_POINTS { hi } else { lo + step * k as f64 };
        let cur = rho(x) - level;
        if (prev > 0.0) != (cur > 0.0) {
            let (mut a, mut b) = (x - step, x);
            for _ in 0..80 {
                let mid = 0.5 * (a + b);
                if (rho(mid) - level > 0.0) == (prev > 0.0) {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            cuts.push(0.5 * (a + b));
        }
        prev = cur;
    }
    cuts.push(hi);
    cuts.windows(2)
        .map(|w| integrate_doubling(&f, w[0], w[1], 32, 1e-13, 6))
        .sum()
}

/// `∫_t^∞ F_μ(λ) dλ = ∫ (ρ(x) − t)₊ dx` for a one-dimensional measure.
pub fn superlevel_integral(m: &Measure, t: f64) -> Result<f64> {
    require_1d(m, "superlevel integral")?;
    let (lo, hi) = m.domain_1d(1.0)?;
    let rho = |x: f64| m.density_1d(x);
    integrate_split(&rho, t, lo, hi, |x| (m.density_1d(x) - t).max(0.0))
}

/// `h_q(μ) = log(∫ ρ^q dx) / (1 − q)`.
pub fn renyi_entropy_1d(m: &Measure, q: f64) -> Result<f64> {
    require_1d(m, "Rényi entropy")?;
    if !(q > 0.0) || q == 1.0 || !q.is_finite() {
        return Err(Error::invalid(format!("Rényi order must be positive and ≠ 1, got {q}")));
    }
    let (lo, hi) = m.domain_1d(q)?;
    let integral = integrate_doubling(|x: f64| m.density_1d(x).powf(q), lo, hi, 200, 1e-12, 6)?;
    if !(integral > 0.0) || !integral.is_finite() {
        return Err(Error::numeric(format!("∫ρ^q evaluated to {integral}")));
    }
    Ok(integral.ln() / (1.0 - q))
}

/// Superlevel integral of the standard Gaussian density.
fn gaussian_superlevel(t: f64) -> f64 {
    let peak = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    if t <= 0.0 {
        return 1.0;
    }
    if t >= peak {
        return 0.0;
    }
    let x = (-2.0 * (t / peak).ln()).sqrt();
    2.0 * ((std_normal_cdf(x) - 0.5) - t * x)
}

/// Checks that `μ` majorizes `γ₁` on a grid of superlevel thresholds and
/// reports the Rényi entropies of orders ½ and 2.
///
/// The check only applies when the heat-flow map onto `μ` is 1-Lipschitz;
/// otherwise an out-of-regime error is returned.
pub fn majorization_check(m: &Measure) -> Result<VerificationReport> {
    require_1d(m, "majorization check")?;
    let bound = lipschitz_profile(m)?.lipschitz_bound();
    if bound > 1.0 + 1e-12 {
        return Err(Error::regime(format!(
            "majorization needs a 1-Lipschitz transport map, the bound is {bound}"
        )));
    }
    let (lo, hi) = m.domain_1d(1.0)?;
    let peak_mu = (0..=SCAN_POINTS)
        .map(|k| m.density_1d(lo + (hi - lo) * k as f64 / SCAN_POINTS as f64))
        .fold(0.0, f64::max);
    let peak = peak_mu.max(1.0 / (2.0 * std::f64::consts::PI).sqrt());
    let t_max = 1.02 * peak;
    let mut margins = Vec::with_capacity(T_GRID);
    for k in 0..T_GRID {
        let t = t_max * k as f64 / (T_GRID - 1) as f64;
        margins.push(superlevel_integral(m, t)? - gaussian_superlevel(t));
    }
    let gauss_h = |q: f64| {
        // ∫φ^q = (2π)^{(1−q)/2} q^{−1/2}
        0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * q.ln() / (1.0 - q)
    };
    let mut report = VerificationReport::new(
        "majorize",
        m,
        margins,
        1e-8,
        0,
        serde_json::json!({"grid": T_GRID, "t_max": t_max}),
    )
    .detail("lipschitz_bound", bound)
    .detail("density_peak", peak_mu);
    for q in [0.5, 2.0] {
        let h_mu = renyi_entropy_1d(m, q)?;
        let h_gamma = gauss_h(q);
        let tag = if q == 0.5 { "half" } else { "2" };
        report = report
            .detail(&format!("renyi_{tag}_mu"), h_mu)
            .detail(&format!("renyi_{tag}_gauss"), h_gamma)
            .detail(&format!("renyi_{tag}_gap"), h_mu - h_gamma);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{build_builtin, MeasureDoc};

    fn gauss() -> Measure {
        build_builtin(&MeasureDoc::mixture(vec![vec![0.0]], vec![1.0])).unwrap()
    }

    #[test]
    fn gaussian_renyi_two() {
        let h = renyi_entropy_1d(&gauss(), 2.0).unwrap();
        let oracle = (2.0 * std::f64::consts::PI.sqrt()).ln();
        assert!((oracle - 1.265512).abs() < 1e-6);
        assert!((h - oracle).abs() < 1e-10, "{h}");
    }

    #[test]
    fn gaussian_renyi_approaches_shannon() {
        let shannon = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((shannon - 1.418939).abs() < 1e-6);
        let a = renyi_entropy_1d(&gauss(), 1.0 + 1e-4).unwrap();
        let b = renyi_entropy_1d(&gauss(), 1.0 - 1e-4).unwrap();
        assert!((a - shannon).abs() < 1e-4 && (b - shannon).abs() < 1e-4);
        assert!(a < shannon && shannon < b);
    }

    #[test]
    fn uniform_renyi_is_log_length() {
        let m = build_builtin(&MeasureDoc::uniform_interval(0.0, 3.0)).unwrap();
        for q in [0.5, 2.0, 7.0] {
            assert!((renyi_entropy_1d(&m, q).unwrap() - 3f64.ln()).abs() < 1e-10);
        }
        assert!(renyi_entropy_1d(&m, 1.0).is_err());
    }

    #[test]
    fn gaussian_superlevel_oracle() {
        // Independent route: ∫(φ − t)₊ over |x| ≤ x_t by composite Simpson.
        for t in [0.0, 0.05, 0.2, 0.39] {
            let numeric = superlevel_integral(&gauss(), t).unwrap();
            let xt = if t > 0.0 { (-2.0 * (t * (2.0 * std::f64::consts::PI).sqrt()).ln()).sqrt() } else { 12.0 };
            let n = 20_000;
            let h = 2.0 * xt / n as f64;
            let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt() - t;
            let mut s = phi(-xt) + phi(xt);
            for k in 1..n {
                s += phi(-xt + h * k as f64) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            let simpson = s * h / 3.0;
            assert!((numeric - simpson).abs() < 1e-9, "t={t}: {numeric} vs {simpson}");
            assert!((numeric - gaussian_superlevel(t)).abs() < 1e-10);
        }
    }

    #[test]
    fn uniform_is_majorized_from_gaussian() {
        let m = build_builtin(&MeasureDoc::uniform_interval(-0.5, 0.5)).unwrap();
        let r = majorization_check(&m).unwrap();
        assert!(r.trials >= 200);
        assert!(r.passed, "{}", r.to_json());
        // h_q(γ) ≤ h_q(μ) would require 1.2655 ≤ 0.
        assert!(r.details["renyi_2_mu"].abs() < 1e-10);
        assert!(r.details["renyi_2_gap"] < 0.0);
        assert!((superlevel_integral(&m, 0.25).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn gaussian_majorizes_itself_with_equality() {
        let r = majorization_check(&gauss()).unwrap();
        assert!(r.passed);
        assert!(r.margins.iter().all(|v| v.abs() < 1e-8));
        assert!(r.details["renyi_2_gap"].abs() < 1e-10);
    }

    #[test]
    fn premise_violation_is_out_of_regime() {
        let m = build_builtin(&MeasureDoc::uniform_interval(-2.0, 2.0)).unwrap();
        assert!(matches!(majorization_check(&m), Err(Error::OutOfRegime(_))));
        let mix = build_builtin(&MeasureDoc::mixture(vec![vec![1.0], vec![-1.0]], vec![0.5, 0.5])).unwrap();
        assert!(matches!(majorization_check(&mix), Err(Error::OutOfRegime(_))));
    }
}
