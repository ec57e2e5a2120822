//! Numerical checks of every inequality the bounds feed into.
//!
//! Each check returns a [`VerificationReport`] whose margins are signed
//! `bound − observed` values, one per trial.

mod functionals;
mod hessian;
mod lipschitz;
mod majorize;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::measures::{Cdf1d, Measure};

pub use functionals::{dimensional_entropy_check, poincare_transfer, weighted_poincare_check};
pub use hessian::{check_hessian_bounds, default_hessian_points, default_t_grid, HessianReports};
pub use lipschitz::{empirical_lipschitz, pushforward_ks_1d, ks_statistic, LipschitzDirection};
pub use majorize::{majorization_check, renyi_entropy_1d, superlevel_integral};

/// Two-sided 99% normal quantile, used as Monte Carlo slack.
pub const Z_99: f64 = 2.576;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub check_name: String,
    pub measure: String,
    pub trials: usize,
    pub worst_margin: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seed: u64,
    pub config_digest: String,
    pub details: BTreeMap<String, f64>,
    #[serde(skip)]
    pub margins: Vec<f64>,
}

impl VerificationReport {
    pub(crate) fn new(
        check_name: &str,
        m: &Measure,
        margins: Vec<f64>,
        tolerance: f64,
        seed: u64,
        config: serde_json::Value,
    ) -> Self {
        let worst_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
        let mut full = config;
        if let serde_json::Value::Object(map) = &mut full {
            map.insert("check".into(), check_name.into());
            map.insert("measure".into(), m.summary());
            map.insert("seed".into(), seed.into());
        }
        Self {
            check_name: check_name.to_string(),
            measure: measure_label(m),
            trials: margins.len(),
            worst_margin,
            tolerance,
            passed: worst_margin >= -tolerance,
            seed,
            config_digest: digest(&full),
            details: BTreeMap::new(),
            margins,
        }
    }

    pub(crate) fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    /// Pretty JSON, stable across runs.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    /// `trial,margin` rows.
    pub fn margins_csv(&self) -> String {
        let mut out = String::from("trial,margin\n");
        for (i, m) in self.margins.iter().enumerate() {
            out.push_str(&format!("{i},{m:e}\n"));
        }
        out
    }

    /// One-line human summary.
    pub fn summary_line(&self) -> String {
        format!(
            "{} [{}] {}: trials={} worst_margin={:.3e} tolerance={:.1e}",
            self.check_name,
            self.measure,
            if self.passed { "PASS" } else { "FAIL" },
            self.trials,
            self.worst_margin,
            self.tolerance
        )
    }
}

/// SHA-256 of the compact JSON encoding (keys are sorted).
pub fn digest(config: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(config.to_string().as_bytes()))
}

fn measure_label(m: &Measure) -> String {
    match m {
        Measure::Mixture(mix) => format!("mixture(d={}, k={}, R={})", mix.dim(), mix.centers().len(), mix.radius()),
        Measure::Bounded(b) => {
            let (a, bb) = b.support();
            format!("bounded([{a}, {bb}], κ={})", b.kappa())
        }
        Measure::LogConvex(l) => format!("semi-log-convex(β={})", l.beta()),
    }
}

/// Independent random stream `stream` under a master seed.
pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn gaussian_samples(seed: u64, stream: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
    let mut rng = rng_for(seed, stream);
    (0..n)
        .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}

/// Draws from `μ`: component plus Gaussian noise for mixtures, inverse
/// CDF otherwise.
pub(crate) fn measure_samples(m: &Measure, seed: u64, stream: u64, n: usize) -> Result<Vec<Vec<f64>>> {
    let mut rng = rng_for(seed, stream);
    match m {
        Measure::Mixture(mix) => {
            let cumulative: Vec<f64> = mix
                .weights()
                .iter()
                .scan(0.0, |acc, w| {
                    *acc += w;
                    Some(*acc)
                })
                .collect();
            Ok((0..n)
                .map(|_| {
                    let u: f64 = rand::Rng::random(&mut rng);
                    let k = cumulative.partition_point(|&c| c < u).min(cumulative.len() - 1);
                    mix.centers()[k]
                        .iter()
                        .map(|c| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            c + z
                        })
                        .collect()
                })
                .collect())
        }
        _ => {
            let cdf = Cdf1d::new(m, 4096)?;
            Ok((0..n)
                .map(|_| {
                    let u: f64 = rand::Rng::random(&mut rng);
                    vec![cdf.quantile(u)]
                })
                .collect())
        }
    }
}

/// Fixed test functions with analytic gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    /// `g ≡ 1`.
    Constant,
    /// `g(x) = x₁`.
    Linear,
    /// `g(x) = ‖x‖²`.
    Quadratic,
    /// `g(x) = exp(−‖x‖²/2)`.
    Bump,
    /// `g(x) = exp(0.3 x₁)`.
    ExpTilt,
    /// `g(x) = 1 + ‖x‖²`.
    OnePlusSquare,
}

impl TestFunction {
    pub const POINCARE_SET: [TestFunction; 5] = [
        TestFunction::Constant,
        TestFunction::Linear,
        TestFunction::Quadratic,
        TestFunction::Bump,
        TestFunction::ExpTilt,
    ];

    /// Strictly positive members.
    pub const ENTROPY_SET: [TestFunction; 4] = [
        TestFunction::Constant,
        TestFunction::OnePlusSquare,
        TestFunction::Bump,
        TestFunction::ExpTilt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestFunction::Constant => "constant",
            TestFunction::Linear => "linear",
            TestFunction::Quadratic => "quadratic",
            TestFunction::Bump => "bump",
            TestFunction::ExpTilt => "exp_tilt",
            TestFunction::OnePlusSquare => "one_plus_square",
        }
    }

    pub fn value(self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match self {
            TestFunction::Constant => 1.0,
            TestFunction::Linear => x[0],
            TestFunction::Quadratic => r2,
            TestFunction::Bump => (-0.5 * r2).exp(),
            TestFunction::ExpTilt => (0.3 * x[0]).exp(),
            TestFunction::OnePlusSquare => 1.0 + r2,
        }
    }

    pub fn gradient(self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        match self {
            TestFunction::Constant => {}
            TestFunction::Linear => g[0] = 1.0,
            TestFunction::Quadratic | TestFunction::OnePlusSquare => {
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi = 2.0 * xi;
                }
            }
            TestFunction::Bump => {
                let b = self.value(x);
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi = -xi * b;
                }
            }
            TestFunction::ExpTilt => g[0] = 0.3 * self.value(x),
        }
        g
    }

    pub fn grad_norm2(self, x: &[f64]) -> f64 {
        self.gradient(x).iter().map(|v| v * v).sum()
    }
}

pub(crate) fn require_1d(m: &Measure, what: &str) -> Result<()> {
    if m.dim() != 1 {
        return Err(Error::invalid(format!("{what} needs a one-dimensional measure")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{build_builtin, MeasureDoc};

    #[test]
    fn gradients_match_differences() {
        let x = [0.7, -1.2];
        for f in TestFunction::POINCARE_SET.iter().chain(&TestFunction::ENTROPY_SET) {
            let g = f.gradient(&x);
            for k in 0..2 {
                let h = 1e-6;
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-8, "{} component {k}", f.name());
            }
        }
    }

    #[test]
    fn entropy_set_is_positive() {
        for f in TestFunction::ENTROPY_SET {
            for x in [-30.0, 0.0, 5.0] {
                assert!(f.value(&[x]) > 0.0);
            }
        }
    }

    #[test]
    fn report_pass_rule_and_digest() {
        let m = build_builtin(&MeasureDoc::uniform_interval(-0.5, 0.5)).unwrap();
        let cfg = serde_json::json!({"n": 3});
        let a = VerificationReport::new("x", &m, vec![0.1, -0.5e-6], 1e-6, 7, cfg.clone());
        assert!(a.passed);
        assert_eq!(a.worst_margin, -0.5e-6);
        let b = VerificationReport::new("x", &m, vec![-2e-6], 1e-6, 7, cfg.clone());
        assert!(!b.passed);
        assert_eq!(a.config_digest, b.config_digest);
        let c = VerificationReport::new("x", &m, vec![0.0], 1e-6, 8, cfg);
        assert_ne!(a.config_digest, c.config_digest);
        assert_eq!(a.config_digest.len(), 64);
    }

    #[test]
    fn sampling_is_reproducible_and_stream_separated() {
        let a = gaussian_samples(3, 0, 5, 2);
        assert_eq!(a, gaussian_samples(3, 0, 5, 2));
        assert_ne!(a, gaussian_samples(3, 1, 5, 2));
    }

    #[test]
    fn mixture_samples_have_right_mean() {
        let m = build_builtin(&MeasureDoc::mixture(vec![vec![2.0], vec![-1.0]], vec![0.25, 0.75])).unwrap();
        let xs = measure_samples(&m, 11, 0, 40_000).unwrap();
        let mean = xs.iter().map(|x| x[0]).sum::<f64>() / xs.len() as f64;
        // E = 0.5 − 0.75, sd ≈ 1.6, so 4 standard errors ≈ 0.032.
        assert!((mean + 0.25).abs() < 0.032, "{mean}");
    }
}
