//! Gauss–Legendre rules and the adaptive integrators built on them.
//!
//! Rules are generated by Newton iteration on the Legendre three-term
//! recurrence and cached per node count, so repeated calls with the same
//! `n` only pay for the weighted sum.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use crate::error::{Error, Result};

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub log_weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let theta = std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5);
            let mut x = (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf)) * theta.cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Self {
            nodes,
            weights,
            log_weights,
        }
    }

    /// Shared, lazily built rule for `n` nodes.
    pub fn cached(n: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<RwLock<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
        if let Some(rule) = cache.read().expect("rule cache poisoned").get(&n) {
            return Arc::clone(rule);
        }
        let rule = Arc::new(GaussLegendre::new(n));
        cache
            .write()
            .expect("rule cache poisoned")
            .entry(n)
            .or_insert(rule)
            .clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes mapped onto `[a, b]` paired with scaled weights.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Integrates with `n0` nodes, doubling until the relative change drops
/// below `rel_tol`.
pub fn integrate_doubling<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    n0: usize,
    rel_tol: f64,
    max_doublings: usize,
) -> Result<f64> {
    let mut n = n0;
    let mut prev = GaussLegendre::cached(n).integrate(a, b, &f);
    for _ in 0..max_doublings {
        n *= 2;
        let next = GaussLegendre::cached(n).integrate(a, b, &f);
        if (next - prev).abs() <= rel_tol * next.abs().max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::numeric(format!(
        "Gauss-Legendre on [{a}, {b}] did not converge after {max_doublings} doublings"
    )))
}

/// Globally adaptive bisection with a 20/40-node Gauss–Legendre error
/// estimate per panel. Converges when the summed estimate falls below
/// `abs_tol + rel_tol * |I|`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let coarse = GaussLegendre::cached(20);
    let fine = GaussLegendre::cached(40);
    let panel = |lo: f64, hi: f64| {
        let c = coarse.integrate(lo, hi, &f);
        let v = fine.integrate(lo, hi, &f);
        (v, (v - c).abs())
    };
    let (v, e) = panel(a, b);
    let mut panels = vec![(a, b, v, e)];
    for _ in 0..2000 {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::numeric("non-finite integrand"));
        }
        if err <= abs_tol + rel_tol * total.abs() {
            return Ok(total);
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("at least one panel");
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = panel(lo, mid);
        let (v2, e2) = panel(mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
    Err(Error::numeric(format!(
        "adaptive quadrature on [{a}, {b}] exceeded its panel budget"
    )))
}

/// Composite rule: `panels` equal sub-intervals, each with an `n`-node rule.
pub fn integrate_composite<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    panels: usize,
    n: usize,
) -> f64 {
    let rule = GaussLegendre::cached(n);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + h * k as f64;
            rule.integrate(lo, lo + h, &mut f)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 20, 200, 1600] {
            let rule = GaussLegendre::new(n);
            let s: f64 = rule.weights.iter().sum();
            assert_relative_eq!(s, 2.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let rule = GaussLegendre::new(5);
        // ∫_{-1}^{1} x^8 = 2/9
        assert_relative_eq!(rule.integrate(-1.0, 1.0, |x| x.powi(8)), 2.0 / 9.0, max_relative = 1e-14);
        assert_relative_eq!(rule.integrate(0.0, 2.0, |x| x.powi(9)), 102.4, max_relative = 1e-13);
    }

    #[test]
    fn three_point_nodes_match_closed_form() {
        let rule = GaussLegendre::new(3);
        assert_relative_eq!(rule.nodes[2], (0.6f64).sqrt(), max_relative = 1e-15);
        assert_relative_eq!(rule.weights[0], 5.0 / 9.0, max_relative = 1e-14);
        assert_eq!(rule.nodes[1], 0.0);
    }

    #[test]
    fn doubling_integrates_gaussian() {
        let v = integrate_doubling(|x: f64| (-0.5 * x * x).exp(), -12.0, 12.0, 50, 1e-13, 6).unwrap();
        assert_relative_eq!(v, (2.0 * std::f64::consts::PI).sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn adaptive_handles_log_singularity() {
        let v = integrate_adaptive(|x: f64| x.ln(), 0.0, 1.0, 1e-12, 1e-12).unwrap();
        assert_relative_eq!(v, -1.0, max_relative = 1e-10);
    }
}
