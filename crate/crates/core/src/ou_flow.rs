//! Ornstein–Uhlenbeck smoothing `Q_t f` of the relative density
//! `f = dμ/dγ_d`, and the heat-flow velocity `V_t = −∇ log Q_t f`.
//!
//! Mixtures use closed forms. One-dimensional densities integrate the
//! Mehler kernel against `μ` by Gauss–Legendre quadrature on a window
//! around the Gaussian posterior mode.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::measures::{Measure, MixtureSpec, Potential};
use crate::quadrature::GaussLegendre;

const POSTERIOR_NODES: usize = 200;
const POSTERIOR_DOUBLINGS: usize = 5;
const POSTERIOR_TOL: f64 = 1e-10;
/// Log-mass cut for the posterior window, before the potential oscillation.
const WINDOW_LOG_CUT: f64 = 45.0;

/// `log Q_t f`, its gradient and its Hessian at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupEval {
    pub t: f64,
    pub x: Vec<f64>,
    pub q_value: f64,
    pub log_q: f64,
    pub score: Vec<f64>,
    pub score_jacobian: DMatrix<f64>,
}

impl SemigroupEval {
    /// `V_t(x) = −∇ log Q_t f(x)`.
    pub fn velocity(&self) -> Vec<f64> {
        self.score.iter().map(|v| -v).collect()
    }

    /// `dV_t(x) = −∇² log Q_t f(x)`.
    pub fn velocity_jacobian(&self) -> DMatrix<f64> {
        -&self.score_jacobian
    }
}

/// `Q_t f(x) = ∫ f(e^{-t} x + √(1 − e^{-2t}) y) dγ_d(y)`.
pub fn q_smooth(m: &Measure, t: f64, x: &[f64]) -> Result<f64> {
    Ok(semigroup_eval(m, t, x)?.q_value)
}

pub fn log_q(m: &Measure, t: f64, x: &[f64]) -> Result<f64> {
    Ok(semigroup_eval(m, t, x)?.log_q)
}

pub fn velocity(m: &Measure, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    Ok(semigroup_eval(m, t, x)?.velocity())
}

pub fn velocity_jacobian(m: &Measure, t: f64, x: &[f64]) -> Result<DMatrix<f64>> {
    Ok(semigroup_eval(m, t, x)?.velocity_jacobian())
}

/// One-dimensional Mehler kernel, `Q_t g(x) = ∫ g(z) M_t(x, z) dγ(z)`.
pub fn mehler_kernel(t: f64, x: f64, z: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("Mehler kernel needs t > 0, got {t}")));
    }
    let e = (-t).exp();
    let s2 = -(-2.0 * t).exp_m1();
    Ok((-(e * e * (x * x + z * z) - 2.0 * e * x * z) / (2.0 * s2)).exp() / s2.sqrt())
}

pub fn semigroup_eval(m: &Measure, t: f64, x: &[f64]) -> Result<SemigroupEval> {
    let (log_q, score, score_jacobian) = eval_parts(m, t, x)?;
    if !log_q.is_finite() || score.iter().any(|v| !v.is_finite()) || score_jacobian.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric(format!("non-finite semigroup value at t = {t:e}")));
    }
    Ok(SemigroupEval {
        t,
        x: x.to_vec(),
        q_value: log_q.exp(),
        log_q,
        score,
        score_jacobian,
    })
}

type Parts = (f64, Vec<f64>, DMatrix<f64>);

fn eval_parts(m: &Measure, t: f64, x: &[f64]) -> Result<Parts> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("time must be finite and non-negative, got {t}")));
    }
    if x.len() != m.dim() {
        return Err(Error::invalid(format!(
            "point has dimension {}, measure has dimension {}",
            x.len(),
            m.dim()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("non-finite evaluation point"));
    }
    match m {
        Measure::Mixture(mix) => Ok(mixture_eval(mix, t, x)),
        Measure::Bounded(b) => {
            if t == 0.0 {
                return Err(Error::invalid("compactly supported measures need t > 0"));
            }
            let (lo, hi) = b.support();
            let post = posterior(b.potential(), lo, hi, b.w_oscillation(), t, x[0])?;
            Ok(from_posterior(&post, t, x[0], b.log_norm()))
        }
        Measure::LogConvex(l) => {
            let u = l.potential();
            if t == 0.0 {
                let x0 = x[0];
                return Ok((
                    0.5 * (2.0 * std::f64::consts::PI).ln() + 0.5 * x0 * x0 - u.value(x0) - l.log_norm(),
                    vec![x0 - u.derivative(x0)],
                    DMatrix::from_element(1, 1, 1.0 - u.second_derivative(x0)),
                ));
            }
            let w = l.window();
            let post = posterior(u, -w, w, l.u_oscillation(), t, x[0])?;
            Ok(from_posterior(&post, t, x[0], l.log_norm()))
        }
    }
}

fn mixture_eval(m: &MixtureSpec, t: f64, x: &[f64]) -> Parts {
    let e = (-t).exp();
    let d = m.dim();
    let logits: Vec<f64> = m
        .centers()
        .iter()
        .zip(m.log_weights())
        .map(|(c, lw)| {
            let xc: f64 = x.iter().zip(c).map(|(a, b)| a * b).sum();
            let cc: f64 = c.iter().map(|v| v * v).sum();
            lw + e * xc - 0.5 * e * e * cc
        })
        .collect();
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ex: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = ex.iter().sum();
    let p: Vec<f64> = ex.iter().map(|v| v / total).collect();

    let mut mean = vec![0.0; d];
    for (pi, c) in p.iter().zip(m.centers()) {
        for (mk, ck) in mean.iter_mut().zip(c) {
            *mk += pi * ck;
        }
    }
    let mut cov = DMatrix::zeros(d, d);
    for (pi, c) in p.iter().zip(m.centers()) {
        for i in 0..d {
            let di = c[i] - mean[i];
            for j in 0..=i {
                cov[(i, j)] += pi * di * (c[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            cov[(j, i)] = cov[(i, j)];
        }
    }
    (top + total.ln(), mean.iter().map(|v| e * v).collect(), cov * (e * e))
}

/// Moments of the posterior `∝ exp(−(x − e^{-t} z)² / (2 s²) − W(z))` on
/// a prior window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Posterior {
    pub log_z: f64,
    pub mean: f64,
    pub var: f64,
}

pub(crate) fn posterior(
    w: &dyn Potential,
    lo: f64,
    hi: f64,
    w_osc: f64,
    t: f64,
    x: f64,
) -> Result<Posterior> {
    let e = (-t).exp();
    let s2 = -(-2.0 * t).exp_m1();
    let centre = x / e;
    let width = s2.sqrt() / e;
    let half_k2 = WINDOW_LOG_CUT + w_osc;
    let kw = (2.0 * half_k2).sqrt() * width;
    let (a, b) = if centre > hi {
        let d = centre - hi;
        let u = (d * d + kw * kw).sqrt() - d;
        ((hi - u).max(lo), hi)
    } else if centre < lo {
        let d = lo - centre;
        let u = (d * d + kw * kw).sqrt() - d;
        (lo, (lo + u).min(hi))
    } else {
        ((centre - kw).max(lo), (centre + kw).min(hi))
    };
    if !(b - a > 1e-15 * a.abs().max(b.abs()).max(1.0)) {
        return Err(Error::numeric(format!(
            "posterior window collapsed at t = {t:e}, x = {x:e}"
        )));
    }
    let inv_two_w2 = 0.5 / (width * width);
    let exponent = |z: f64| -(z - centre) * (z - centre) * inv_two_w2 - w.value(z);

    let mut n = POSTERIOR_NODES;
    let mut prev = moments(&GaussLegendre::cached(n), a, b, &exponent);
    for _ in 0..POSTERIOR_DOUBLINGS {
        n *= 2;
        let next = moments(&GaussLegendre::cached(n), a, b, &exponent);
        let scale = b - a;
        if (next.log_z - prev.log_z).abs() <= POSTERIOR_TOL * (1.0 + next.log_z.abs())
            && (next.mean - prev.mean).abs() <= POSTERIOR_TOL * (next.mean.abs() + scale)
            && (next.var - prev.var).abs() <= POSTERIOR_TOL * next.var.abs() + 1e-300
        {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::numeric(format!(
        "posterior quadrature did not converge at t = {t:e}, x = {x:e}"
    )))
}

fn moments<F: Fn(f64) -> f64>(rule: &GaussLegendre, a: f64, b: f64, exponent: &F) -> Posterior {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let log_half = half.ln();
    let n = rule.len();
    let mut zs = Vec::with_capacity(n);
    let mut ls = Vec::with_capacity(n);
    let mut top = f64::NEG_INFINITY;
    for (x, lw) in rule.nodes.iter().zip(&rule.log_weights) {
        let z = mid + half * x;
        let l = lw + exponent(z);
        top = top.max(l);
        zs.push(z);
        ls.push(l);
    }
    let mut total = 0.0;
    let mut first = 0.0;
    for (z, l) in zs.iter().zip(ls.iter_mut()) {
        *l = (*l - top).exp();
        total += *l;
        first += *l * z;
    }
    let mean = first / total;
    let var = zs
        .iter()
        .zip(&ls)
        .map(|(z, p)| p * (z - mean) * (z - mean))
        .sum::<f64>()
        / total;
    Posterior {
        log_z: top + log_half + total.ln(),
        mean,
        var,
    }
}

fn from_posterior(post: &Posterior, t: f64, x: f64, log_norm: f64) -> Parts {
    let e = (-t).exp();
    let e2 = e * e;
    let s2 = -(-2.0 * t).exp_m1();
    (
        -0.5 * s2.ln() + 0.5 * x * x + post.log_z - log_norm,
        vec![(e * post.mean - e2 * x) / s2],
        DMatrix::from_element(1, 1, -e2 / s2 + e2 * post.var / (s2 * s2)),
    )
}

/// Hessian of `log Q_t f` by nested central differences, outer step `h`,
/// inner step `0.7 h`.
pub fn hessian_log_q_numeric(m: &Measure, t: f64, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
    if !(h > 0.0) {
        return Err(Error::invalid(format!("difference step must be positive, got {h}")));
    }
    let d = x.len();
    let hi = 0.7 * h;
    let mut y = x.to_vec();
    let partial = |y: &mut Vec<f64>, j: usize| -> Result<f64> {
        let orig = y[j];
        y[j] = orig + hi;
        let fp = log_q(m, t, y)?;
        y[j] = orig - hi;
        let fm = log_q(m, t, y)?;
        y[j] = orig;
        Ok((fp - fm) / (2.0 * hi))
    };
    let mut hess = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let orig = y[i];
            y[i] = orig + h;
            let gp = partial(&mut y, j)?;
            y[i] = orig - h;
            let gm = partial(&mut y, j)?;
            y[i] = orig;
            hess[(i, j)] = (gp - gm) / (2.0 * h);
        }
    }
    let size = hess.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let asym = (&hess - hess.transpose()).iter().fold(0.0f64, |a, v| a.max(v.abs())) / (1.0 + size);
    if asym > 1e-3 {
        return Err(Error::StepTooSmall { asymmetry: asym });
    }
    Ok((&hess + hess.transpose()) * 0.5)
}
