use nalgebra::SymmetricEigen;
use rand_distr::{Distribution, Uniform};

use super::{rng_for, VerificationReport};
use crate::bounds::hessian_envelope;
use crate::error::{Error, Result};
use crate::measures::{norm, Measure};
use crate::ou_flow::{hessian_log_q_numeric, semigroup_eval};

/// Analytic-bound report and finite-difference cross-check.
#[derive(Debug, Clone)]
pub struct HessianReports {
    pub bounds: VerificationReport,
    pub finite_difference: VerificationReport,
}

/// 20 log-spaced times in `[1e-4, 4]`.
pub fn default_t_grid() -> Vec<f64> {
    let (lo, hi) = (1e-4f64.ln(), 4f64.ln());
    (0..20).map(|i| (lo + (hi - lo) * i as f64 / 19.0).exp()).collect()
}

/// `n` evaluation points: cell midpoints of the support for bounded
/// measures, of `[-4, 4]` for full-support ones in 1D, and seeded uniform
/// draws from `[-4, 4]^d` otherwise.
pub fn default_hessian_points(m: &Measure, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let (lo, hi) = match m {
        Measure::Bounded(b) => b.support(),
        _ => (-4.0, 4.0),
    };
    if m.dim() == 1 {
        return (0..n)
            .map(|i| vec![lo + (hi - lo) * (i as f64 + 0.5) / n as f64])
            .collect();
    }
    let mut rng = rng_for(seed, 0);
    let u = Uniform::new(lo, hi).expect("valid range");
    (0..n).map(|_| (0..m.dim()).map(|_| u.sample(&mut rng)).collect()).collect()
}

/// Compares the eigenvalues of `−dV_t(x)` with the applicable profiles on
/// a `(t, x)` grid, and the analytic Hessian with finite differences.
pub fn check_hessian_bounds(m: &Measure, t_grid: &[f64], points: &[Vec<f64>], seed: u64) -> Result<HessianReports> {
    if t_grid.is_empty() || points.is_empty() {
        return Err(Error::invalid("need at least one time and one point"));
    }
    if t_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::invalid("hessian grid times must be positive"));
    }
    if let Some(p) = points.iter().find(|p| p.len() != m.dim() || !m.contains(p)) {
        return Err(Error::invalid(format!("sample point {p:?} lies outside the support")));
    }
    let cells: Vec<(f64, &Vec<f64>)> = t_grid
        .iter()
        .flat_map(|&t| points.iter().map(move |x| (t, x)))
        .collect();
    let rows = crate::par::map(&cells, |&(t, x)| -> Result<(f64, f64)> {
        let ev = semigroup_eval(m, t, x)?;
        let h = &ev.score_jacobian;
        let (lam_min, lam_max) = if h.nrows() == 1 {
            (h[(0, 0)], h[(0, 0)])
        } else {
            let eig = SymmetricEigen::new(h.clone());
            let ev = eig.eigenvalues;
            (ev.min(), ev.max())
        };
        let (lower, upper) = hessian_envelope(m, t);
        let margin = (lam_min - lower).min(upper - lam_max);
        let step = 1e-4 * (1.0 + norm(x));
        let fd = hessian_log_q_numeric(m, t, x, step)?;
        let fd_margin = h
            .iter()
            .zip(fd.iter())
            .map(|(a, b)| 1e-3 * (1.0 + a.abs()) - (a - b).abs())
            .fold(f64::INFINITY, f64::min);
        Ok((margin, fd_margin))
    });
    let rows: Vec<(f64, f64)> = rows.into_iter().collect::<Result<_>>()?;
    let config = serde_json::json!({"t_grid": t_grid, "points": points});
    let bounds = VerificationReport::new(
        "hessian-bounds",
        m,
        rows.iter().map(|r| r.0).collect(),
        1e-6,
        seed,
        config.clone(),
    )
    .detail("times", t_grid.len() as f64)
    .detail("points", points.len() as f64);
    let finite_difference =
        VerificationReport::new("hessian-fd", m, rows.iter().map(|r| r.1).collect(), 0.0, seed, config);
    Ok(HessianReports { bounds, finite_difference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{build_builtin, MeasureDoc};

    #[test]
    fn grid_shape() {
        let g = default_t_grid();
        assert_eq!(g.len(), 20);
        assert!((g[0] - 1e-4).abs() < 1e-16 && (g[19] - 4.0).abs() < 1e-12);
        let m = build_builtin(&MeasureDoc::uniform_interval(-0.5, 0.5)).unwrap();
        let p = default_hessian_points(&m, 200, 0);
        assert!(p.iter().all(|x| x[0] > -0.5 && x[0] < 0.5));
    }

    #[test]
    fn delta_zero_margin_is_the_bound() {
        let m = build_builtin(&MeasureDoc::mixture(vec![vec![0.0]], vec![1.0])).unwrap();
        let r = check_hessian_bounds(&m, &[0.5], &[vec![0.3]], 0).unwrap();
        // Upper bound 0 (R = 0); observed 0.
        assert_eq!(r.bounds.worst_margin, 0.0);
    }

    #[test]
    fn symmetric_pair_is_tight_at_origin() {
        let m = build_builtin(&MeasureDoc::mixture(vec![vec![1.0], vec![-1.0]], vec![0.5, 0.5])).unwrap();
        let r = check_hessian_bounds(&m, &[0.01], &[vec![0.0]], 0).unwrap();
        assert!(r.bounds.worst_margin.abs() < 1e-14);
        assert!(r.bounds.passed && r.finite_difference.passed);
    }

    #[test]
    fn rejects_points_outside_support() {
        let m = build_builtin(&MeasureDoc::uniform_interval(-0.5, 0.5)).unwrap();
        assert!(check_hessian_bounds(&m, &[0.5], &[vec![0.7]], 0).is_err());
        assert!(check_hessian_bounds(&m, &[0.0], &[vec![0.1]], 0).is_err());
    }
}
