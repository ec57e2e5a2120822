//! θ-profiles bounding the eigenvalues of `−dV_t`, their integrals, and the
//! Lipschitz constants they produce.
//!
//! Three expressions appear:
//!
//! * support bound, `e^{-2t}(σ²/s⁴ − 1/s²)` with `s² = 1 − e^{-2t}`;
//! * curvature bound, `e^{-2t}(1 − κ)/(κ s² + e^{-2t})`, valid for all `t`
//!   when `κ ≥ 0` and for `t < ½ log((κ − 1)/κ)` when `κ < 0`;
//! * mixture bound, `e^{-2t} R²`.
//!
//! The semi-log-convex lower bound is the curvature expression with `κ`
//! replaced by `β`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::Measure;
use crate::quadrature::integrate_adaptive;

const TAIL_TOL: f64 = 1e-8;
const MIN_T_MAX: f64 = 6.0;

/// Parameters of a θ-profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    /// Upper profile for κ-log-concave measures with support radius `σ`
    /// (`σ = ∞` means unbounded support, which needs `κ > 0`).
    Logconcave { kappa: f64, sigma: f64 },
    /// Upper profile for `γ_d ⋆ ν` with `ν` supported in a ball of radius `R`.
    Mixture { r: f64 },
    /// Lower profile for β-semi-log-convex measures.
    Logconvex { beta: f64 },
}

/// A scalar profile `t ↦ θ(t)` with its closed-form integral over `[0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaProfile {
    pub kind: ProfileKind,
    /// Crossover from the curvature branch to the support branch.
    pub t0: Option<f64>,
    pub closed_form_integral: f64,
}

impl ThetaProfile {
    pub fn logconcave(kappa: f64, sigma: f64) -> Result<Self> {
        if !kappa.is_finite() {
            return Err(Error::invalid(format!("κ must be finite, got {kappa}")));
        }
        if !(sigma > 0.0) {
            return Err(Error::invalid(format!("σ must be positive, got {sigma}")));
        }
        let ks2 = kappa * sigma * sigma;
        let kind = ProfileKind::Logconcave { kappa, sigma };
        if ks2 < 1.0 && sigma.is_finite() {
            let t0 = 0.5 * ((sigma * sigma * (kappa - 1.0) - 1.0) / (ks2 - 1.0)).ln();
            Ok(Self {
                kind,
                t0: Some(t0),
                closed_form_integral: 0.5 * (1.0 - ks2) + sigma.ln(),
            })
        } else if kappa > 0.0 {
            Ok(Self {
                kind,
                t0: None,
                closed_form_integral: -0.5 * kappa.ln(),
            })
        } else {
            Err(Error::regime(format!(
                "no bound applies for κ = {kappa} ≤ 0 on an unbounded support"
            )))
        }
    }

    pub fn mixture(r: f64) -> Result<Self> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::invalid(format!("R must be finite and non-negative, got {r}")));
        }
        Ok(Self {
            kind: ProfileKind::Mixture { r },
            t0: None,
            closed_form_integral: 0.5 * r * r,
        })
    }

    pub fn logconvex(beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::invalid(format!("β must be positive, got {beta}")));
        }
        Ok(Self {
            kind: ProfileKind::Logconvex { beta },
            t0: None,
            closed_form_integral: -0.5 * beta.ln(),
        })
    }

    /// Whether the profile bounds eigenvalues from below (inverse map).
    pub fn is_lower(&self) -> bool {
        matches!(self.kind, ProfileKind::Logconvex { .. })
    }

    /// Which expression is in force, as a short tag.
    pub fn regime(&self) -> &'static str {
        match self.kind {
            ProfileKind::Mixture { .. } => "mixture",
            ProfileKind::Logconvex { .. } => "semi-log-convex",
            ProfileKind::Logconcave { .. } if self.t0.is_some() => "support-and-curvature",
            ProfileKind::Logconcave { .. } => "curvature",
        }
    }

    pub fn theta(&self, t: f64) -> f64 {
        match self.kind {
            ProfileKind::Mixture { r } => (-2.0 * t).exp() * r * r,
            ProfileKind::Logconvex { beta } => curvature_branch(beta, t),
            ProfileKind::Logconcave { kappa, sigma } => match self.t0 {
                Some(t0) if t > t0 => support_branch(sigma, t),
                _ => curvature_branch(kappa, t),
            },
        }
    }

    /// `∫_t^∞ θ`, in closed form.
    pub fn tail_integral(&self, t: f64) -> f64 {
        match self.kind {
            ProfileKind::Mixture { r } => 0.5 * r * r * (-2.0 * t).exp(),
            ProfileKind::Logconvex { beta } => curvature_integral(beta, t, f64::INFINITY),
            ProfileKind::Logconcave { kappa, sigma } => match self.t0 {
                Some(t0) if t < t0 => curvature_integral(kappa, t, t0) + support_tail(sigma, t0),
                Some(_) => support_tail(sigma, t),
                None => curvature_integral(kappa, t, f64::INFINITY),
            },
        }
    }

    /// Lipschitz constant of the map the profile controls: `e^{∫θ}` for
    /// upper profiles (`T`), `e^{−∫θ}` for lower ones (`S`).
    pub fn lipschitz_bound(&self) -> f64 {
        if self.is_lower() {
            (-self.closed_form_integral).exp()
        } else {
            self.closed_form_integral.exp()
        }
    }

    /// Smallest time (on a 1/64 grid, at least 6) past which the tail
    /// integral and the profile itself are negligible.
    pub fn default_t_max(&self) -> f64 {
        if let ProfileKind::Mixture { r } = self.kind {
            return MIN_T_MAX.max(0.5 * (r * r * 1e8).ln());
        }
        let mut t = MIN_T_MAX;
        while t < 60.0 && (self.tail_integral(t).abs() > TAIL_TOL || self.theta(t).abs() > 2.0 * TAIL_TOL) {
            t += 1.0 / 64.0;
        }
        t
    }
}

fn s2(t: f64) -> f64 {
    -(-2.0 * t).exp_m1()
}

fn support_branch(sigma: f64, t: f64) -> f64 {
    let s2 = s2(t);
    (-2.0 * t).exp() * (sigma * sigma / (s2 * s2) - 1.0 / s2)
}

fn curvature_branch(kappa: f64, t: f64) -> f64 {
    let u = (-2.0 * t).exp();
    u * (1.0 - kappa) / (kappa * s2(t) + u)
}

/// `∫_a^b` of the curvature branch: `½ log(1 − (1−κ) s²)` between the ends.
fn curvature_integral(kappa: f64, a: f64, b: f64) -> f64 {
    let g = |t: f64| {
        if t.is_infinite() {
            0.5 * kappa.ln()
        } else {
            0.5 * (-(1.0 - kappa) * s2(t)).ln_1p()
        }
    };
    g(a) - g(b)
}

fn support_tail(sigma: f64, a: f64) -> f64 {
    let s2 = s2(a);
    let sig2 = sigma * sigma;
    // σ²/s² − σ² = σ² e^{-2a}/s².
    0.5 * (sig2 * (-2.0 * a).exp() / s2 + s2.ln())
}

/// Lipschitz constant of `T` for a κ-log-concave measure with support radius `σ`.
pub fn bound_logconcave(kappa: f64, sigma: f64) -> Result<f64> {
    let p = ThetaProfile::logconcave(kappa, sigma)?;
    let mut b = p.lipschitz_bound();
    if kappa > 0.0 {
        b = b.min(1.0 / kappa.sqrt());
    }
    Ok(b)
}

/// `e^{R²/2}`.
pub fn bound_mixture(r: f64) -> Result<f64> {
    Ok(ThetaProfile::mixture(r)?.lipschitz_bound())
}

/// `√β`, the Lipschitz constant of `S` for a β-semi-log-convex measure.
pub fn bound_inverse_logconvex(beta: f64) -> Result<f64> {
    Ok(ThetaProfile::logconvex(beta)?.lipschitz_bound())
}

/// Upper profile value for the mixture or log-concave kinds.
pub fn theta_max(kind: ProfileKind, t: f64) -> Result<f64> {
    let p = match kind {
        ProfileKind::Mixture { r } => ThetaProfile::mixture(r)?,
        ProfileKind::Logconcave { kappa, sigma } => ThetaProfile::logconcave(kappa, sigma)?,
        ProfileKind::Logconvex { .. } => {
            return Err(Error::invalid("semi-log-convex profiles are lower bounds"));
        }
    };
    Ok(p.theta(t))
}

/// `e^{-2t}(1 − β)/(s²(β − 1) + 1)`.
pub fn theta_min_logconvex(beta: f64, t: f64) -> f64 {
    curvature_branch(beta, t)
}

/// `∫_0^∞ θ`: adaptive quadrature up to `t_max` plus the analytic tail.
pub fn integrate_profile(p: &ThetaProfile, t_max: f64) -> Result<f64> {
    if !(t_max > 0.0) {
        return Err(Error::invalid(format!("t_max must be positive, got {t_max}")));
    }
    let f = |t: f64| p.theta(t);
    let mut total = 0.0;
    let mut start = 0.0;
    if let Some(t0) = p.t0 {
        let mid = t0.min(t_max);
        total += integrate_adaptive(f, 0.0, mid, 1e-14, 1e-13)?;
        start = mid;
    }
    if t_max > start {
        total += integrate_adaptive(f, start, t_max, 1e-14, 1e-13)?;
    }
    Ok(total + p.tail_integral(t_max))
}

/// Profile controlling `‖dT‖` for a measure.
pub fn lipschitz_profile(m: &Measure) -> Result<ThetaProfile> {
    match m {
        Measure::Mixture(mix) => ThetaProfile::mixture(mix.radius()),
        Measure::Bounded(b) => ThetaProfile::logconcave(b.kappa(), b.sigma()),
        Measure::LogConvex(l) => match l.kappa() {
            Some(k) if k > 0.0 => ThetaProfile::logconcave(k, f64::INFINITY),
            _ => Err(Error::regime("no forward bound for a semi-log-convex measure without κ > 0")),
        },
    }
}

/// Profile controlling `‖dS‖` for a measure.
pub fn inverse_profile(m: &Measure) -> Result<ThetaProfile> {
    match m {
        Measure::LogConvex(l) => ThetaProfile::logconvex(l.beta()),
        _ => Err(Error::regime("inverse bounds need a semi-log-convex measure")),
    }
}

/// Pointwise bounds `(lower, upper)` on the eigenvalues of `−dV_t` that
/// apply to `m` at time `t`. Missing bounds are infinite.
pub fn hessian_envelope(m: &Measure, t: f64) -> (f64, f64) {
    let u = (-2.0 * t).exp();
    let s2 = s2(t);
    let generic_lower = if t > 0.0 { -u / s2 } else { f64::NEG_INFINITY };
    match m {
        Measure::Mixture(mix) => (generic_lower, u * mix.radius() * mix.radius()),
        Measure::Bounded(b) => {
            let mut upper = if t > 0.0 { support_branch(b.sigma(), t) } else { f64::INFINITY };
            if curvature_valid(b.kappa(), t) {
                upper = upper.min(curvature_branch(b.kappa(), t));
            }
            (generic_lower, upper)
        }
        Measure::LogConvex(l) => {
            let lower = generic_lower.max(theta_min_logconvex(l.beta(), t));
            let upper = match l.kappa() {
                Some(k) if curvature_valid(k, t) => curvature_branch(k, t),
                _ => f64::INFINITY,
            };
            (lower, upper)
        }
    }
}

fn curvature_valid(kappa: f64, t: f64) -> bool {
    kappa >= 0.0 || t < 0.5 * ((kappa - 1.0) / kappa).ln()
}
