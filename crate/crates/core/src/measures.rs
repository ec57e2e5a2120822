//! Target measure families: finite Gaussian mixtures `γ_d ⋆ ν`, bounded
//! κ-log-concave densities on an interval, and β-semi-log-convex densities
//! on the line.
//!
//! Conventions: the mixture radius `R` is the Chebyshev radius of the
//! centre set (the smallest enclosing ball, any centre allowed). The
//! support radius `σ` of an interval `[a, b]` is `(b - a) / 2`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_composite, integrate_doubling, GaussLegendre};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 16;

const WEIGHT_SUM_TOL: f64 = 1e-9;
const CURVATURE_TOL: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Potentials
// ---------------------------------------------------------------------------

/// A one-dimensional potential `W` with density `∝ e^{-W}`.
pub trait Potential: Send + Sync + fmt::Debug {
    fn value(&self, x: f64) -> f64;

    fn derivative(&self, x: f64) -> f64 {
        let h = 1e-5 * (1.0 + x.abs());
        (self.value(x + h) - self.value(x - h)) / (2.0 * h)
    }

    fn second_derivative(&self, x: f64) -> f64 {
        let h = 1e-4 * (1.0 + x.abs());
        (self.value(x + h) - 2.0 * self.value(x) + self.value(x - h)) / (h * h)
    }
}

/// `W(x) = curvature · x² / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticPotential {
    pub curvature: f64,
}

impl Potential for QuadraticPotential {
    fn value(&self, x: f64) -> f64 {
        0.5 * self.curvature * x * x
    }

    fn derivative(&self, x: f64) -> f64 {
        self.curvature * x
    }

    fn second_derivative(&self, _x: f64) -> f64 {
        self.curvature
    }
}

// ---------------------------------------------------------------------------
// Gaussian mixtures
// ---------------------------------------------------------------------------

/// `μ = γ_d ⋆ ν` with `ν = Σ wᵢ δ_{xᵢ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    dim: usize,
    centers: Vec<Vec<f64>>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    chebyshev_radius: f64,
    chebyshev_center: Vec<f64>,
}

impl MixtureSpec {
    pub fn new(centers: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::invalid("mixture needs at least one center"));
        }
        let dim = centers[0].len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::invalid(format!("dimension must be in 1..={MAX_DIM}, got {dim}")));
        }
        if centers.iter().any(|c| c.len() != dim) {
            return Err(Error::invalid("all centers must have the same dimension"));
        }
        if centers.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("centers must be finite"));
        }
        if weights.len() != centers.len() {
            return Err(Error::invalid(format!(
                "{} weights for {} centers",
                weights.len(),
                centers.len()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid("weights must be strictly positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid(format!("weights sum to {total}, expected 1")));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        let (chebyshev_radius, chebyshev_center) = chebyshev_radius(&centers);
        Ok(Self {
            dim,
            centers,
            weights,
            log_weights,
            chebyshev_radius,
            chebyshev_center,
        })
    }

    /// Equal weights on the given centres.
    pub fn uniform(centers: Vec<Vec<f64>>) -> Result<Self> {
        let n = centers.len().max(1);
        Self::new(centers, vec![1.0 / n as f64; n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// `R`: radius of the smallest ball enclosing every centre.
    pub fn radius(&self) -> f64 {
        self.chebyshev_radius
    }

    pub fn chebyshev_center(&self) -> &[f64] {
        &self.chebyshev_center
    }

    pub fn max_center_norm(&self) -> f64 {
        self.centers.iter().map(|c| norm(c)).fold(0.0, f64::max)
    }

    /// Centres closed under negation with matching weights.
    pub fn is_symmetric(&self) -> bool {
        self.centers.iter().zip(&self.weights).all(|(c, w)| {
            self.centers.iter().zip(&self.weights).any(|(o, wo)| {
                (w - wo).abs() <= 1e-12 && c.iter().zip(o).all(|(a, b)| (a + b).abs() <= 1e-12)
            })
        })
    }

    /// `log f(x)` with `f = dμ/dγ_d`.
    pub fn log_relative_density(&self, x: &[f64]) -> f64 {
        let logits: Vec<f64> = self
            .centers
            .iter()
            .zip(&self.log_weights)
            .map(|(c, lw)| lw + dot(x, c) - 0.5 * dot(c, c))
            .collect();
        log_sum_exp(&logits)
    }

    /// `∇ log f(x) = Σ pᵢ(x) xᵢ` with softmax weights `pᵢ`.
    pub fn log_relative_density_gradient(&self, x: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = self
            .centers
            .iter()
            .zip(&self.log_weights)
            .map(|(c, lw)| lw + dot(x, c) - 0.5 * dot(c, c))
            .collect();
        let p = softmax(&logits);
        let mut g = vec![0.0; self.dim];
        for (pi, c) in p.iter().zip(&self.centers) {
            for (gk, ck) in g.iter_mut().zip(c) {
                *gk += pi * ck;
            }
        }
        g
    }

    /// Lebesgue density of `μ`.
    pub fn density(&self, x: &[f64]) -> f64 {
        let d = self.dim as f64;
        let logits: Vec<f64> = self
            .centers
            .iter()
            .zip(&self.log_weights)
            .map(|(c, lw)| {
                let r2: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                lw - 0.5 * r2
            })
            .collect();
        (log_sum_exp(&logits) - 0.5 * d * (2.0 * PI).ln()).exp()
    }

    /// CDF in one dimension, `Σ wᵢ Φ(x − xᵢ)`.
    pub fn cdf_1d(&self, x: f64) -> f64 {
        self.centers
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * std_normal_cdf(x - c[0]))
            .sum()
    }
}

/// `f(x) = dμ/dγ_d(x) = Σ wᵢ exp(⟨x, xᵢ⟩ − ‖xᵢ‖²/2)`.
pub fn relative_density(m: &MixtureSpec, x: &[f64]) -> f64 {
    m.log_relative_density(x).exp()
}

/// Smallest enclosing ball `(R, c*)` of a non-empty point set.
///
/// One dimension is the half-spread. Higher dimensions run Welzl's
/// recursion with circumspheres solved on the affine hull of the boundary
/// set, which is exact up to rounding.
pub fn chebyshev_radius(centers: &[Vec<f64>]) -> (f64, Vec<f64>) {
    assert!(!centers.is_empty(), "chebyshev_radius needs at least one point");
    let dim = centers[0].len();
    if dim == 1 {
        let lo = centers.iter().map(|c| c[0]).fold(f64::INFINITY, f64::min);
        let hi = centers.iter().map(|c| c[0]).fold(f64::NEG_INFINITY, f64::max);
        return (0.5 * (hi - lo), vec![0.5 * (hi + lo)]);
    }
    let scale = centers.iter().map(|c| norm(c)).fold(1.0, f64::max);
    let tol = 1e-12 * scale;
    let mut pts: Vec<&[f64]> = centers.iter().map(|c| c.as_slice()).collect();
    // Deduplicate to keep the boundary sets affinely independent.
    pts.dedup_by(|a, b| a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= tol));
    let n = pts.len();
    let (center, r2) = welzl(&pts, n, &mut Vec::new(), dim, tol);
    let radius = pts
        .iter()
        .map(|p| dist2(p, &center).sqrt())
        .fold(r2.max(0.0).sqrt(), f64::max);
    (radius, center)
}

fn welzl<'a>(
    pts: &[&'a [f64]],
    n: usize,
    boundary: &mut Vec<&'a [f64]>,
    dim: usize,
    tol: f64,
) -> (Vec<f64>, f64) {
    if n == 0 || boundary.len() == dim + 1 {
        return circumball(boundary, dim);
    }
    let p = pts[n - 1];
    let (c, r2) = welzl(pts, n - 1, boundary, dim, tol);
    if (!boundary.is_empty() || n > 1) && dist2(p, &c).sqrt() <= r2.max(0.0).sqrt() + tol {
        return (c, r2);
    }
    boundary.push(p);
    let out = welzl(pts, n - 1, boundary, dim, tol);
    boundary.pop();
    out
}

fn circumball(boundary: &[&[f64]], dim: usize) -> (Vec<f64>, f64) {
    match boundary.len() {
        0 => (vec![0.0; dim], -1.0),
        1 => (boundary[0].to_vec(), 0.0),
        k => {
            let p0 = boundary[0];
            let vs: Vec<Vec<f64>> = boundary[1..]
                .iter()
                .map(|p| p.iter().zip(p0).map(|(a, b)| a - b).collect())
                .collect();
            let m = k - 1;
            let gram = DMatrix::from_fn(m, m, |i, j| 2.0 * dot(&vs[i], &vs[j]));
            let rhs = DVector::from_fn(m, |i, _| dot(&vs[i], &vs[i]));
            let alpha = gram
                .clone()
                .lu()
                .solve(&rhs)
                .unwrap_or_else(|| gram.pseudo_inverse(1e-14).expect("pseudo-inverse") * &rhs);
            let mut c = p0.to_vec();
            for (a, v) in alpha.iter().zip(&vs) {
                for (ck, vk) in c.iter_mut().zip(v) {
                    *ck += a * vk;
                }
            }
            let r2 = dist2(p0, &c);
            (c, r2)
        }
    }
}

// ---------------------------------------------------------------------------
// Bounded κ-log-concave densities
// ---------------------------------------------------------------------------

/// Density `∝ e^{-W}` on `[a, b]` with `W'' ≥ κ`.
#[derive(Debug, Clone)]
pub struct BoundedDensity1D {
    a: f64,
    b: f64,
    potential: Arc<dyn Potential>,
    kappa: f64,
    sigma: f64,
    log_norm: f64,
    w_oscillation: f64,
}

impl BoundedDensity1D {
    pub fn new(a: f64, b: f64, potential: Arc<dyn Potential>, kappa: f64) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::invalid(format!("invalid interval [{a}, {b}]")));
        }
        if !kappa.is_finite() {
            return Err(Error::invalid("curvature bound must be finite"));
        }
        let (w_min, w_max) = scan_range(&*potential, a, b, 2001);
        let interior = 200;
        let h = 1e-3 * (b - a);
        for i in 0..interior {
            let x = a + (b - a) * (i as f64 + 0.5) / interior as f64;
            let d2 = (potential.value(x + h) - 2.0 * potential.value(x) + potential.value(x - h)) / (h * h);
            if d2 < kappa - CURVATURE_TOL {
                return Err(Error::invalid(format!(
                    "potential has W''({x:.4}) ≈ {d2:.6} below the declared κ = {kappa}"
                )));
            }
        }
        let p = Arc::clone(&potential);
        let mass = integrate_doubling(move |x| (w_min - p.value(x)).exp(), a, b, 64, 1e-12, 8)?;
        let log_norm = mass.ln() - w_min;
        let out = Self {
            a,
            b,
            potential,
            kappa,
            sigma: 0.5 * (b - a),
            log_norm,
            w_oscillation: w_max - w_min,
        };
        let total = integrate_doubling(|x| out.density(x), a, b, 64, 1e-12, 8)?;
        if (total - 1.0).abs() > 1e-8 {
            return Err(Error::numeric(format!("normalised mass {total} differs from 1")));
        }
        Ok(out)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Half the support length.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    pub fn potential(&self) -> &dyn Potential {
        &*self.potential
    }

    pub(crate) fn w_oscillation(&self) -> f64 {
        self.w_oscillation
    }

    pub fn log_density(&self, x: f64) -> f64 {
        if x < self.a || x > self.b {
            f64::NEG_INFINITY
        } else {
            -self.potential.value(x) - self.log_norm
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    fn is_symmetric(&self) -> bool {
        (self.a + self.b).abs() <= 1e-12 * self.b.abs().max(1.0)
            && (0..50).all(|i| {
                let x = self.b * (i as f64 + 0.5) / 50.0;
                (self.potential.value(x) - self.potential.value(-x)).abs()
                    <= 1e-12 * (1.0 + self.potential.value(x).abs())
            })
    }
}

// ---------------------------------------------------------------------------
// β-semi-log-convex densities
// ---------------------------------------------------------------------------

/// Full-support density `∝ e^{-U}` with `U'' ≤ β`, optionally also
/// `U'' ≥ κ > 0`.
#[derive(Debug, Clone)]
pub struct LogConvexDensity1D {
    potential: Arc<dyn Potential>,
    beta: f64,
    kappa: Option<f64>,
    window: f64,
    log_norm: f64,
    u_oscillation: f64,
}

impl LogConvexDensity1D {
    pub fn new(potential: Arc<dyn Potential>, beta: f64, kappa: Option<f64>) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::invalid(format!("β must be positive, got {beta}")));
        }
        if let Some(k) = kappa {
            if !k.is_finite() {
                return Err(Error::invalid("κ must be finite"));
            }
        }
        let u0 = potential.value(0.0);
        let mass_on = |lo: f64, hi: f64| {
            let p = Arc::clone(&potential);
            integrate_composite(move |x| (u0 - p.value(x)).exp(), lo, hi, 64, 20)
        };
        // Smallest power-of-two window whose discarded mass is below 1e-12
        // relative and whose edge density is e^{-60} below the peak.
        let mut window = 1.0;
        loop {
            if window > 1024.0 {
                return Err(Error::numeric("could not find a quadrature window for the density"));
            }
            let inner = mass_on(-window, window);
            let outer = mass_on(window, 4.0 * window) + mass_on(-4.0 * window, -window);
            let (u_min, _) = scan_range(&*potential, -window, window, 4001);
            let edge = potential.value(window).min(potential.value(-window)) - u_min;
            if outer <= 1e-12 * inner && edge >= 60.0 {
                break;
            }
            window *= 2.0;
        }
        let (u_min, u_max) = scan_range(&*potential, -window, window, 8001);
        let h = 1e-3;
        let steps = (2.0 * window / h).min(4000.0) as usize;
        for i in 0..steps {
            let x = -window + 2.0 * window * (i as f64 + 0.5) / steps as f64;
            let d2 = (potential.value(x + h) - 2.0 * potential.value(x) + potential.value(x - h)) / (h * h);
            if d2 > beta + CURVATURE_TOL * (1.0 + potential.value(x).abs()) {
                return Err(Error::invalid(format!(
                    "potential has U''({x:.4}) ≈ {d2:.6} above the declared β = {beta}"
                )));
            }
            if let Some(k) = kappa {
                if d2 < k - CURVATURE_TOL * (1.0 + potential.value(x).abs()) {
                    return Err(Error::invalid(format!(
                        "potential has U''({x:.4}) ≈ {d2:.6} below the declared κ = {k}"
                    )));
                }
            }
        }
        let p = Arc::clone(&potential);
        let mass = integrate_doubling(move |x| (u_min - p.value(x)).exp(), -window, window, 128, 1e-13, 8)?;
        Ok(Self {
            potential,
            beta,
            kappa,
            window,
            log_norm: mass.ln() - u_min,
            u_oscillation: u_max - u_min,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn kappa(&self) -> Option<f64> {
        self.kappa
    }

    /// Half-width `L` of the quadrature window `[-L, L]`.
    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    pub fn potential(&self) -> &dyn Potential {
        &*self.potential
    }

    pub(crate) fn u_oscillation(&self) -> f64 {
        self.u_oscillation
    }

    pub fn log_density(&self, x: f64) -> f64 {
        -self.potential.value(x) - self.log_norm
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    fn is_symmetric(&self) -> bool {
        (0..100).all(|i| {
            let x = self.window * (i as f64 + 0.5) / 100.0;
            (self.potential.value(x) - self.potential.value(-x)).abs()
                <= 1e-12 * (1.0 + self.potential.value(x).abs())
        })
    }
}

fn scan_range(p: &dyn Potential, a: f64, b: f64, n: usize) -> (f64, f64) {
    (0..n)
        .map(|i| p.value(a + (b - a) * i as f64 / (n - 1) as f64))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

// ---------------------------------------------------------------------------
// Measure
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum Measure {
    Mixture(MixtureSpec),
    Bounded(BoundedDensity1D),
    LogConvex(LogConvexDensity1D),
}

impl Measure {
    pub fn dim(&self) -> usize {
        match self {
            Measure::Mixture(m) => m.dim(),
            _ => 1,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match self {
            Measure::Mixture(m) => m.is_symmetric(),
            Measure::Bounded(b) => b.is_symmetric(),
            Measure::LogConvex(l) => l.is_symmetric(),
        }
    }

    /// Whether the velocity field is only defined for `t > 0`.
    pub fn needs_positive_time(&self) -> bool {
        matches!(self, Measure::Bounded(_))
    }

    /// Length scale used for the divergence guard of flow integration.
    pub fn scale(&self) -> f64 {
        match self {
            Measure::Mixture(m) => m.max_center_norm(),
            Measure::Bounded(b) => b.a.abs().max(b.b.abs()),
            Measure::LogConvex(l) => l.window,
        }
    }

    /// Whether `x` lies in the closed support.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Measure::Bounded(b) => x[0] >= b.a && x[0] <= b.b,
            _ => x.iter().all(|v| v.is_finite()),
        }
    }

    /// Deterministic JSON description, used for report digests.
    pub fn summary(&self) -> serde_json::Value {
        match self {
            Measure::Mixture(m) => serde_json::json!({
                "family": "mixture",
                "centers": m.centers,
                "weights": m.weights,
                "radius": m.chebyshev_radius,
            }),
            Measure::Bounded(b) => serde_json::json!({
                "family": "bounded",
                "a": b.a,
                "b": b.b,
                "kappa": b.kappa,
                "log_norm": b.log_norm,
            }),
            Measure::LogConvex(l) => serde_json::json!({
                "family": "semi_log_convex",
                "beta": l.beta,
                "kappa": l.kappa,
                "window": l.window,
                "log_norm": l.log_norm,
            }),
        }
    }

    /// Lebesgue density in one dimension.
    pub fn density_1d(&self, x: f64) -> f64 {
        match self {
            Measure::Mixture(m) => m.density(&[x]),
            Measure::Bounded(b) => b.density(x),
            Measure::LogConvex(l) => l.density(x),
        }
    }

    /// An interval carrying all but a negligible part of `∫ ρ^q` for
    /// `q ≥ exponent`.
    pub fn domain_1d(&self, exponent: f64) -> Result<(f64, f64)> {
        let q = exponent.max(1e-3);
        match self {
            Measure::Mixture(m) if m.dim() == 1 => {
                let lo = m.centers.iter().map(|c| c[0]).fold(f64::INFINITY, f64::min);
                let hi = m.centers.iter().map(|c| c[0]).fold(f64::NEG_INFINITY, f64::max);
                let pad = 12.0 / q.sqrt();
                Ok((lo - pad, hi + pad))
            }
            Measure::Mixture(_) => Err(Error::invalid("one-dimensional measure required")),
            Measure::Bounded(b) => Ok((b.a, b.b)),
            Measure::LogConvex(l) => {
                let (u_min, _) = scan_range(&*l.potential, -l.window, l.window, 4001);
                let mut w = l.window;
                while q * (l.potential.value(w).min(l.potential.value(-w)) - u_min) < 60.0 {
                    w *= 2.0;
                    if w > 1e6 {
                        return Err(Error::numeric("density tails too heavy for the requested exponent"));
                    }
                }
                Ok((-w, w))
            }
        }
    }

    /// `∫ h ρ dx` over a one-dimensional measure.
    pub fn expect_1d<F: Fn(f64) -> f64>(&self, h: F) -> Result<f64> {
        let (lo, hi) = self.domain_1d(1.0)?;
        let panels = match self {
            Measure::Bounded(_) => 16,
            _ => 256,
        };
        Ok(integrate_composite(|x| h(x) * self.density_1d(x), lo, hi, panels, 24))
    }
}

// ---------------------------------------------------------------------------
// Tabulated one-dimensional CDF
// ---------------------------------------------------------------------------

/// Cumulative distribution on a uniform grid, refined inside each cell by
/// an 8-point Gauss–Legendre rule.
#[derive(Debug, Clone)]
pub struct Cdf1d {
    lo: f64,
    step: f64,
    cumulative: Vec<f64>,
    measure: Measure,
}

impl Cdf1d {
    pub fn new(measure: &Measure, cells: usize) -> Result<Self> {
        let (lo, hi) = measure.domain_1d(1.0)?;
        let step = (hi - lo) / cells as f64;
        let rule = GaussLegendre::cached(8);
        let mut cumulative = Vec::with_capacity(cells + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for k in 0..cells {
            let a = lo + step * k as f64;
            acc += rule.integrate(a, a + step, |x| measure.density_1d(x));
            cumulative.push(acc);
        }
        if (acc - 1.0).abs() > 1e-8 {
            return Err(Error::numeric(format!("tabulated mass {acc} differs from 1")));
        }
        Ok(Self {
            lo,
            step,
            cumulative,
            measure: measure.clone(),
        })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if let Measure::Mixture(m) = &self.measure {
            return m.cdf_1d(x);
        }
        let cells = self.cumulative.len() - 1;
        if x <= self.lo {
            return 0.0;
        }
        let pos = (x - self.lo) / self.step;
        if pos >= cells as f64 {
            return 1.0;
        }
        let k = pos.floor() as usize;
        let a = self.lo + self.step * k as f64;
        let partial = GaussLegendre::cached(8).integrate(a, x, |z| self.measure.density_1d(z));
        (self.cumulative[k] + partial).clamp(0.0, 1.0)
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let cells = self.cumulative.len() - 1;
        let k = match self.cumulative.binary_search_by(|c| c.total_cmp(&u)) {
            Ok(i) => i.min(cells - 1),
            Err(i) => i.saturating_sub(1).min(cells - 1),
        };
        let mut a = self.lo + self.step * k as f64;
        let mut b = a + self.step;
        for _ in 0..60 {
            let mid = 0.5 * (a + b);
            if self.cdf(mid) < u {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }
}

// ---------------------------------------------------------------------------
// JSON documents
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalParams {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InflatedParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub beta: f64,
}

/// Serialized form of a builtin measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MeasureDoc {
    /// Uniform on `[a, b]`, κ = 0.
    UniformInterval { params: IntervalParams },
    /// Standard Gaussian restricted to `[a, b]`, κ = 1.
    TruncatedGaussian { params: IntervalParams },
    /// `W(x) = −c x²/2` on `[a, b]`, κ = −c.
    Inflated { params: InflatedParams },
    /// `N(0, 1/β)` as a β-semi-log-convex measure.
    GaussianVariance { params: BetaParams },
    Mixture {
        centers: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
}

impl MeasureDoc {
    pub fn uniform_interval(a: f64, b: f64) -> Self {
        MeasureDoc::UniformInterval { params: IntervalParams { a, b } }
    }

    pub fn truncated_gaussian(a: f64, b: f64) -> Self {
        MeasureDoc::TruncatedGaussian { params: IntervalParams { a, b } }
    }

    pub fn inflated(a: f64, b: f64, c: f64) -> Self {
        MeasureDoc::Inflated { params: InflatedParams { a, b, c } }
    }

    pub fn gaussian_variance(beta: f64) -> Self {
        MeasureDoc::GaussianVariance { params: BetaParams { beta } }
    }

    pub fn mixture(centers: Vec<Vec<f64>>, weights: Vec<f64>) -> Self {
        MeasureDoc::Mixture { centers, weights: Some(weights) }
    }

    /// Short human-readable label, e.g. `uniform_interval(-0.5,0.5)`.
    pub fn label(&self) -> String {
        match self {
            MeasureDoc::UniformInterval { params } => format!("uniform_interval({},{})", params.a, params.b),
            MeasureDoc::TruncatedGaussian { params } => format!("truncated_gaussian({},{})", params.a, params.b),
            MeasureDoc::Inflated { params } => format!("inflated({},{},{})", params.a, params.b, params.c),
            MeasureDoc::GaussianVariance { params } => format!("gaussian_variance({})", params.beta),
            MeasureDoc::Mixture { centers, .. } => {
                let cs: Vec<String> = centers
                    .iter()
                    .map(|c| {
                        if c.len() == 1 {
                            format!("{}", c[0])
                        } else {
                            format!("({})", c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
                        }
                    })
                    .collect();
                format!("mixture[{}]", cs.join(";"))
            }
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("measure documents always serialize")
    }
}

/// Builds and validates a measure from its document.
pub fn build_builtin(doc: &MeasureDoc) -> Result<Measure> {
    match doc {
        MeasureDoc::UniformInterval { params } => Ok(Measure::Bounded(BoundedDensity1D::new(
            params.a,
            params.b,
            Arc::new(QuadraticPotential { curvature: 0.0 }),
            0.0,
        )?)),
        MeasureDoc::TruncatedGaussian { params } => Ok(Measure::Bounded(BoundedDensity1D::new(
            params.a,
            params.b,
            Arc::new(QuadraticPotential { curvature: 1.0 }),
            1.0,
        )?)),
        MeasureDoc::Inflated { params } => {
            if !(params.c > 0.0) {
                return Err(Error::invalid(format!("inflated family needs c > 0, got {}", params.c)));
            }
            Ok(Measure::Bounded(BoundedDensity1D::new(
                params.a,
                params.b,
                Arc::new(QuadraticPotential { curvature: -params.c }),
                -params.c,
            )?))
        }
        MeasureDoc::GaussianVariance { params } => {
            if !(params.beta > 0.0) {
                return Err(Error::invalid(format!("β must be positive, got {}", params.beta)));
            }
            Ok(Measure::LogConvex(LogConvexDensity1D::new(
                Arc::new(QuadraticPotential { curvature: params.beta }),
                params.beta,
                Some(params.beta),
            )?))
        }
        MeasureDoc::Mixture { centers, weights } => {
            let m = match weights {
                Some(w) => MixtureSpec::new(centers.clone(), w.clone())?,
                None => MixtureSpec::uniform(centers.clone())?,
            };
            Ok(Measure::Mixture(m))
        }
    }
}

// ---------------------------------------------------------------------------
// Small numeric helpers
// ---------------------------------------------------------------------------

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// `Φ(x)`.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mix(centers: &[f64], weights: &[f64]) -> MixtureSpec {
        MixtureSpec::new(centers.iter().map(|&c| vec![c]).collect(), weights.to_vec()).unwrap()
    }

    #[test]
    fn relative_density_examples() {
        let m = mix(&[0.0], &[1.0]);
        for x in [-3.0, 0.0, 1.7] {
            assert_relative_eq!(relative_density(&m, &[x]), 1.0, max_relative = 1e-15);
        }
        let m = mix(&[2.0], &[1.0]);
        assert_relative_eq!(relative_density(&m, &[0.0]), (-2.0f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(relative_density(&m, &[0.0]), 0.135335283, max_relative = 1e-8);
        let m = mix(&[-1.0, 1.0], &[0.5, 0.5]);
        assert_relative_eq!(relative_density(&m, &[0.0]), 0.606530660, max_relative = 1e-8);
    }

    #[test]
    fn relative_density_stable_far_out() {
        let m = mix(&[-30.0, 30.0], &[0.5, 0.5]);
        let v = m.log_relative_density(&[40.0]);
        assert!(v.is_finite());
        assert_relative_eq!(v, 0.5f64.ln() + 1200.0 - 450.0, max_relative = 1e-14);
    }

    #[test]
    fn chebyshev_examples() {
        assert_eq!(chebyshev_radius(&[vec![0.0]]), (0.0, vec![0.0]));
        assert_eq!(chebyshev_radius(&[vec![-1.0], vec![3.0]]), (2.0, vec![1.0]));
        let (r, c) = chebyshev_radius(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_relative_eq!(r, 0.5f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(c[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(c[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn chebyshev_obtuse_triangle_uses_longest_edge() {
        // Obtuse: enclosing ball is the diameter ball of the long edge.
        let (r, c) = chebyshev_radius(&[vec![-2.0, 0.0], vec![2.0, 0.0], vec![0.0, 0.5]]);
        assert_relative_eq!(r, 2.0, max_relative = 1e-12);
        assert_relative_eq!(c[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(c[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn mixture_validation() {
        assert!(MixtureSpec::new(vec![], vec![]).is_err());
        assert!(MixtureSpec::new(vec![vec![0.0]], vec![0.5]).is_err());
        assert!(MixtureSpec::new(vec![vec![0.0], vec![1.0]], vec![1.0, 0.0]).is_err());
        assert!(MixtureSpec::new(vec![vec![0.0], vec![1.0, 2.0]], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn builtin_parameters() {
        let m = build_builtin(&MeasureDoc::uniform_interval(-0.5, 0.5)).unwrap();
        let Measure::Bounded(b) = m else { panic!() };
        assert_eq!(b.kappa(), 0.0);
        assert_eq!(b.sigma(), 0.5);

        let Measure::Bounded(b) = build_builtin(&MeasureDoc::truncated_gaussian(-0.4, 0.4)).unwrap() else {
            panic!()
        };
        assert_eq!(b.kappa(), 1.0);
        assert_eq!(b.sigma(), 0.4);
        assert!(b.kappa() * b.sigma() * b.sigma() < 1.0);

        let Measure::LogConvex(l) = build_builtin(&MeasureDoc::gaussian_variance(4.0)).unwrap() else {
            panic!()
        };
        assert_eq!(l.beta(), 4.0);
    }

    #[test]
    fn builtin_errors() {
        assert!(build_builtin(&MeasureDoc::uniform_interval(1.0, 1.0)).is_err());
        assert!(build_builtin(&MeasureDoc::inflated(-1.0, 1.0, 0.0)).is_err());
        assert!(build_builtin(&MeasureDoc::inflated(-1.0, 1.0, -2.0)).is_err());
        assert!(build_builtin(&MeasureDoc::gaussian_variance(0.0)).is_err());
    }

    #[test]
    fn declared_curvature_is_checked() {
        let p = Arc::new(QuadraticPotential { curvature: 0.5 });
        assert!(BoundedDensity1D::new(-1.0, 1.0, p.clone(), 1.0).is_err());
        assert!(BoundedDensity1D::new(-1.0, 1.0, p, 0.5).is_ok());
    }

    #[test]
    fn normalisation_truncated_gaussian() {
        let Measure::Bounded(b) = build_builtin(&MeasureDoc::truncated_gaussian(-0.4, 0.4)).unwrap() else {
            panic!()
        };
        // ∫_{-0.4}^{0.4} e^{-x²/2} = √(2π)(2Φ(0.4) − 1)
        let z = (2.0 * PI).sqrt() * (2.0 * std_normal_cdf(0.4) - 1.0);
        assert_relative_eq!(b.log_norm(), z.ln(), max_relative = 1e-12);
    }

    #[test]
    fn gaussian_variance_normalisation_and_window() {
        let Measure::LogConvex(l) = build_builtin(&MeasureDoc::gaussian_variance(4.0)).unwrap() else {
            panic!()
        };
        assert_relative_eq!(l.log_norm(), (2.0 * PI / 4.0).sqrt().ln(), max_relative = 1e-12);
        // Discarded mass beyond the window (8 sd or more) is negligible.
        assert!(2.0 * std_normal_cdf(-2.0 * l.window()) < 1e-10);
    }

    #[test]
    fn symmetry_detection() {
        let sym = build_builtin(&MeasureDoc::mixture(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![0.5, 0.5])).unwrap();
        assert!(sym.is_symmetric());
        let asym = build_builtin(&MeasureDoc::mixture(vec![vec![1.0], vec![-1.0]], vec![0.4, 0.6])).unwrap();
        assert!(!asym.is_symmetric());
        assert!(build_builtin(&MeasureDoc::inflated(-0.4, 0.4, 0.5)).unwrap().is_symmetric());
        assert!(!build_builtin(&MeasureDoc::uniform_interval(-0.4, 0.5)).unwrap().is_symmetric());
        assert!(build_builtin(&MeasureDoc::gaussian_variance(4.0)).unwrap().is_symmetric());
    }

    #[test]
    fn cdf_table_matches_closed_form() {
        let m = build_builtin(&MeasureDoc::truncated_gaussian(-0.4, 0.4)).unwrap();
        let cdf = Cdf1d::new(&m, 512).unwrap();
        let z = 2.0 * std_normal_cdf(0.4) - 1.0;
        for x in [-0.4, -0.13, 0.0, 0.27, 0.4] {
            let expect = (std_normal_cdf(x) - std_normal_cdf(-0.4)) / z;
            assert_relative_eq!(cdf.cdf(x), expect, epsilon = 1e-12);
        }
        for u in [0.01, 0.5, 0.93] {
            assert_relative_eq!(cdf.cdf(cdf.quantile(u)), u, epsilon = 1e-12);
        }
    }

    #[test]
    fn doc_json_shapes() {
        let d = MeasureDoc::from_json(r#"{"family":"uniform_interval","params":{"a":-0.5,"b":0.5}}"#).unwrap();
        assert_eq!(d, MeasureDoc::uniform_interval(-0.5, 0.5));
        let d = MeasureDoc::from_json(r#"{"family":"mixture","centers":[[1.0],[-1.0]],"weights":[0.5,0.5]}"#).unwrap();
        assert_eq!(d, MeasureDoc::mixture(vec![vec![1.0], vec![-1.0]], vec![0.5, 0.5]));
        let d = MeasureDoc::from_json(r#"{"family":"mixture","centers":[[2.0]]}"#).unwrap();
        let Measure::Mixture(m) = build_builtin(&d).unwrap() else { panic!() };
        assert_eq!(m.weights(), &[1.0]);
        assert!(MeasureDoc::from_json(r#"{"family":"cauchy","params":{}}"#).is_err());
    }
}
