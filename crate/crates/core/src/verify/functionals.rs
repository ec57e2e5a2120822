use super::{measure_samples, TestFunction, VerificationReport, Z_99};
use crate::bounds::lipschitz_profile;
use crate::error::{Error, Result};
use crate::measures::Measure;
use crate::transport::{transport_from_gaussian, IntegratorConfig};

/// Absolute slack for quadrature round-off in otherwise exact comparisons.
const QUAD_TOL: f64 = 1e-10;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std_err(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0) / n).sqrt()
}

/// Squared Lipschitz constant of the heat-flow map onto `m`.
fn lipschitz_sq(m: &Measure) -> Result<f64> {
    let l = lipschitz_profile(m)?.lipschitz_bound();
    Ok(l * l)
}

/// Checks `Var_μ(g) ≤ L² ∫ ‖∇g‖² dμ` for every Poincaré test function.
///
/// One-dimensional measures use quadrature. Mixtures in higher dimension
/// use `n` samples from `μ`; the margin then includes 99% slack on the
/// estimated difference.
pub fn poincare_transfer(m: &Measure, n: usize, seed: u64) -> Result<VerificationReport> {
    let l2 = lipschitz_sq(m)?;
    let fns = TestFunction::POINCARE_SET;
    let mut margins = Vec::new();
    let mut details = Vec::new();
    if m.dim() == 1 {
        for f in fns {
            let e1 = m.expect_1d(|x| f.value(&[x]))?;
            let e2 = m.expect_1d(|x| (f.value(&[x]) - e1).powi(2))?;
            let rhs = l2 * m.expect_1d(|x| f.grad_norm2(&[x]))?;
            margins.push(rhs - e2);
            details.push((f.name(), e2, rhs));
        }
    } else {
        let xs = measure_samples(m, seed, 0, n)?;
        for f in fns {
            let g: Vec<f64> = xs.iter().map(|x| f.value(x)).collect();
            let gbar = mean(&g);
            let infl: Vec<f64> = xs
                .iter()
                .zip(&g)
                .map(|(x, gi)| l2 * f.grad_norm2(x) - (gi - gbar).powi(2))
                .collect();
            let var = g.iter().map(|gi| (gi - gbar).powi(2)).sum::<f64>() / (n as f64 - 1.0).max(1.0);
            let rhs = l2 * mean(&xs.iter().map(|x| f.grad_norm2(x)).collect::<Vec<_>>());
            margins.push(rhs - var + Z_99 * std_err(&infl));
            details.push((f.name(), var, rhs));
        }
    }
    let config = serde_json::json!({"n": if m.dim() == 1 { 0 } else { n }, "functions": fns});
    let mut report = VerificationReport::new("poincare", m, margins, QUAD_TOL, seed, config).detail("l_squared", l2);
    for (name, lhs, rhs) in details {
        report = report.detail(&format!("{name}_variance"), lhs).detail(&format!("{name}_rhs"), rhs);
    }
    Ok(report)
}

/// Checks `Ent_μ(g) ≤ (d/2) log(1 + (L²/d) ∫ ‖∇g‖²/g dμ)` for every
/// positive test function, in the stated form.
pub fn dimensional_entropy_check(m: &Measure, n: usize, seed: u64) -> Result<VerificationReport> {
    let l2 = lipschitz_sq(m)?;
    let d = m.dim() as f64;
    let fns = TestFunction::ENTROPY_SET;
    let mut margins = Vec::new();
    let mut details = Vec::new();
    if m.dim() == 1 {
        for f in fns {
            let mass = m.expect_1d(|x| f.value(&[x]))?;
            let glogg = m.expect_1d(|x| {
                let g = f.value(&[x]);
                g * g.ln()
            })?;
            let fisher = m.expect_1d(|x| f.grad_norm2(&[x]) / f.value(&[x]))?;
            let ent = glogg - mass * mass.ln();
            let rhs = 0.5 * d * (l2 / d * fisher).ln_1p();
            margins.push(rhs - ent);
            details.push((f.name(), ent, rhs));
        }
    } else {
        let xs = measure_samples(m, seed, 1, n)?;
        for f in fns {
            let g: Vec<f64> = xs.iter().map(|x| f.value(x)).collect();
            if g.iter().any(|v| *v <= 0.0) {
                return Err(Error::invalid(format!("test function {} is not positive", f.name())));
            }
            let fi: Vec<f64> = xs.iter().zip(&g).map(|(x, gi)| f.grad_norm2(x) / gi).collect();
            let mass = mean(&g);
            let ent = mean(&g.iter().map(|v| v * v.ln()).collect::<Vec<_>>()) - mass * mass.ln();
            let fisher = mean(&fi);
            let rhs = 0.5 * d * (l2 / d * fisher).ln_1p();
            let slope = 0.5 * l2 / (1.0 + l2 / d * fisher);
            let infl: Vec<f64> = g
                .iter()
                .zip(&fi)
                .map(|(gi, fii)| slope * fii - (gi * gi.ln() - (mass.ln() + 1.0) * gi))
                .collect();
            margins.push(rhs - ent + Z_99 * std_err(&infl));
            details.push((f.name(), ent, rhs));
        }
    }
    let config = serde_json::json!({"n": if m.dim() == 1 { 0 } else { n }, "functions": fns});
    let mut report = VerificationReport::new("entropy", m, margins, QUAD_TOL, seed, config).detail("l_squared", l2);
    for (name, lhs, rhs) in details {
        report = report.detail(&format!("{name}_entropy"), lhs).detail(&format!("{name}_rhs"), rhs);
    }
    Ok(report)
}

/// Checks the weighted Poincaré inequality
/// `Var_μ(g) ≤ d(d+3)/(d−1) · L² ∫ ‖∇g‖² / (1 + ‖x‖²/L²) dμ`
/// for a symmetric mixture in `d ≥ 2`, by Monte Carlo with 99% slack.
///
/// Also confirms that the transport map fixes the origin.
pub fn weighted_poincare_check(
    m: &Measure,
    n: usize,
    cfg: &IntegratorConfig,
    seed: u64,
) -> Result<VerificationReport> {
    if m.dim() < 2 {
        return Err(Error::invalid("weighted Poincaré check needs d ≥ 2"));
    }
    if !matches!(m, Measure::Mixture(_)) {
        return Err(Error::invalid("weighted Poincaré check runs on mixtures only"));
    }
    if !m.is_symmetric() {
        return Err(Error::invalid("weighted Poincaré check needs a symmetric measure"));
    }
    let t0 = transport_from_gaussian(m, &vec![0.0; m.dim()], cfg)?;
    let t0_norm = t0.endpoint.iter().map(|v| v * v).sum::<f64>().sqrt();
    if t0_norm >= 1e-6 {
        return Err(Error::numeric(format!("‖T(0)‖ = {t0_norm:e} for a symmetric measure")));
    }
    let l2 = lipschitz_sq(m)?;
    let d = m.dim() as f64;
    let factor = d * (d + 3.0) / (d - 1.0) * l2;
    let xs = measure_samples(m, seed, 2, n)?;
    let fns = TestFunction::POINCARE_SET;
    let mut margins = Vec::new();
    let mut details = Vec::new();
    for f in fns {
        let g: Vec<f64> = xs.iter().map(|x| f.value(x)).collect();
        let gbar = mean(&g);
        let weighted: Vec<f64> = xs
            .iter()
            .map(|x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                factor * f.grad_norm2(x) / (1.0 + r2 / l2)
            })
            .collect();
        let var = g.iter().map(|gi| (gi - gbar).powi(2)).sum::<f64>() / (n as f64 - 1.0).max(1.0);
        let rhs = mean(&weighted);
        let infl: Vec<f64> = weighted.iter().zip(&g).map(|(w, gi)| w - (gi - gbar).powi(2)).collect();
        margins.push(rhs - var + Z_99 * std_err(&infl));
        details.push((f.name(), var, rhs));
    }
    let config = serde_json::json!({"n": n, "integrator": cfg, "functions": fns});
    let mut report = VerificationReport::new("weighted_poincare", m, margins, QUAD_TOL, seed, config)
        .detail("factor", factor)
        .detail("t0_norm", t0_norm);
    for (name, lhs, rhs) in details {
        report = report.detail(&format!("{name}_variance"), lhs).detail(&format!("{name}_rhs"), rhs);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{build_builtin, MeasureDoc};

    #[test]
    fn translated_gaussian_poincare() {
        let m = build_builtin(&MeasureDoc::mixture(vec![vec![2.0]], vec![1.0])).unwrap();
        let r = poincare_transfer(&m, 0, 0).unwrap();
        // R = 0 about the Chebyshev centre, so L = 1 and x is extremal.
        assert!((r.details["linear_variance"] - 1.0).abs() < 1e-10);
        assert!((r.details["linear_rhs"] - 1.0).abs() < 1e-10);
        assert!(r.details["constant_variance"].abs() < 1e-12);
        assert!(r.passed);
    }

    #[test]
    fn two_center_quadratic_moments() {
        let m = build_builtin(&MeasureDoc::mixture(vec![vec![1.0], vec![-1.0]], vec![0.5, 0.5])).unwrap();
        let r = poincare_transfer(&m, 0, 0).unwrap();
        // X = ±1 + Z: E X² = 2, E X⁴ = 1 + 6 + 3 = 10.
        assert!((r.details["quadratic_variance"] - 6.0).abs() < 1e-9);
        assert!((r.details["quadratic_rhs"] - 1f64.exp() * 8.0).abs() < 1e-8);
        assert!(r.passed);
    }

    #[test]
    fn uniform_poincare_quadrature() {
        let m = build_builtin(&MeasureDoc::uniform_interval(-0.5, 0.5)).unwrap();
        let r = poincare_transfer(&m, 0, 0).unwrap();
        assert!((r.details["linear_variance"] - 1.0 / 12.0).abs() < 1e-12);
        assert!((r.details["linear_rhs"] - 0.25 * 1f64.exp()).abs() < 1e-12);
        assert!(r.passed);
    }

    #[test]
    fn entropy_of_exponential_tilt_matches_mgf() {
        let m = build_builtin(&MeasureDoc::mixture(vec![vec![2.0]], vec![1.0])).unwrap();
        let r = dimensional_entropy_check(&m, 0, 0).unwrap();
        // g = e^{aX}, X ~ N(2,1): E g = e^{2a + a²/2}, E[g log g] = a(2 + a) E g.
        let a: f64 = 0.3;
        let eg = (2.0 * a + 0.5 * a * a).exp();
        let ent = a * (2.0 + a) * eg - eg * eg.ln();
        assert!((r.details["exp_tilt_entropy"] - ent).abs() < 1e-10);
        let rhs = 0.5 * (a * a * eg).ln_1p();
        assert!((r.details["exp_tilt_rhs"] - rhs).abs() < 1e-10);
        assert!(r.details["constant_entropy"].abs() < 1e-12);
    }

    #[test]
    fn stated_entropy_form_fails_for_gaussian_tilts() {
        // Under γ₁ itself the stated form already fails for e^{0.3x}:
        // Ent = e^{a²/2} a²/2 exceeds ½ log(1 + a² e^{a²/2}).
        let m = build_builtin(&MeasureDoc::mixture(vec![vec![0.0]], vec![1.0])).unwrap();
        let r = dimensional_entropy_check(&m, 0, 0).unwrap();
        let a: f64 = 0.3;
        let e = (0.5 * a * a).exp();
        assert!((r.details["exp_tilt_entropy"] - e * a * a / 2.0).abs() < 1e-10);
        assert!(e * a * a / 2.0 > 0.5 * (a * a * e).ln_1p());
        assert!(!r.passed);
    }

    #[test]
    fn weighted_poincare_two_center_plane() {
        let m = build_builtin(&MeasureDoc::mixture(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![0.5, 0.5])).unwrap();
        let cfg = IntegratorConfig::for_measure(&m).with_steps(64);
        let r = weighted_poincare_check(&m, 20_000, &cfg, 5).unwrap();
        assert!((r.details["linear_variance"] - 2.0).abs() < 0.1);
        assert!((r.details["factor"] - 10.0 * 1f64.exp()).abs() < 1e-12);
        assert!(r.details["t0_norm"] < 1e-6);
        assert!(r.passed, "{}", r.to_json());
    }

    #[test]
    fn weighted_poincare_rejects_bad_inputs() {
        let cfg_for = |m: &Measure| IntegratorConfig::for_measure(m);
        let one_d = build_builtin(&MeasureDoc::mixture(vec![vec![1.0], vec![-1.0]], vec![0.5, 0.5])).unwrap();
        assert!(weighted_poincare_check(&one_d, 10, &cfg_for(&one_d), 0).is_err());
        let skew = build_builtin(&MeasureDoc::mixture(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![0.3, 0.7])).unwrap();
        assert!(weighted_poincare_check(&skew, 10, &cfg_for(&skew), 0).is_err());
    }

    #[test]
    fn monte_carlo_reports_are_reproducible() {
        let m = build_builtin(&MeasureDoc::mixture(vec![vec![0.0, 0.0]], vec![1.0])).unwrap();
        let a = poincare_transfer(&m, 5000, 9).unwrap();
        let b = poincare_transfer(&m, 5000, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.passed);
    }
}
