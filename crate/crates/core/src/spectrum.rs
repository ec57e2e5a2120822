//! Weighted Laplacian spectra in one dimension.
//!
//! The Dirichlet form `∫ u' v' dμ` and the `L²(μ)` inner product are
//! discretized with piecewise-linear elements on a uniform grid, which
//! gives weighted Neumann conditions at the ends of the domain. The
//! tridiagonal pencil `A v = λ B v` is solved by Sturm-count bisection.

use serde::Serialize;

use crate::bounds::lipschitz_profile;
use crate::error::{Error, Result};
use crate::measures::{Measure, MixtureSpec};
use crate::quadrature::GaussLegendre;

/// Half-width added around the centres of a mixture, and the window used
/// for other full-support measures.
pub const FULL_SUPPORT_PAD: f64 = 8.0;

/// Symmetric tridiagonal pencil from the finite-element assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct Pencil {
    pub nodes: Vec<f64>,
    pub stiffness_diag: Vec<f64>,
    pub stiffness_off: Vec<f64>,
    pub mass_diag: Vec<f64>,
    pub mass_off: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub eigenvalues_mu: Vec<f64>,
    pub eigenvalues_gauss: Vec<f64>,
    pub bound_factor: f64,
    pub margins: Vec<f64>,
    pub grid_size: usize,
    pub worst_margin: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl SpectrumReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    /// `index,lambda_mu,lambda_gauss,margin` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,lambda_mu,lambda_gauss,margin\n");
        for i in 0..self.margins.len() {
            out.push_str(&format!(
                "{i},{:e},{:e},{:e}\n",
                self.eigenvalues_mu[i], self.eigenvalues_gauss[i], self.margins[i]
            ));
        }
        out
    }
}

/// Interval the operator is discretized on.
pub fn spectral_domain(m: &Measure) -> Result<(f64, f64)> {
    match m {
        Measure::Mixture(mix) if mix.dim() == 1 => {
            let lo = mix.centers().iter().map(|c| c[0]).fold(f64::INFINITY, f64::min);
            let hi = mix.centers().iter().map(|c| c[0]).fold(f64::NEG_INFINITY, f64::max);
            Ok((lo - FULL_SUPPORT_PAD, hi + FULL_SUPPORT_PAD))
        }
        Measure::Mixture(_) => Err(Error::invalid("spectra are computed for one-dimensional measures")),
        Measure::Bounded(b) => Ok(b.support()),
        Measure::LogConvex(_) => Ok((-FULL_SUPPORT_PAD, FULL_SUPPORT_PAD)),
    }
}

/// Assembles stiffness and mass matrices on `grid_n` uniform elements.
pub fn weighted_laplacian_1d(m: &Measure, grid_n: usize) -> Result<Pencil> {
    if grid_n < 2 {
        return Err(Error::invalid("grid_n must be at least 2"));
    }
    let (lo, hi) = spectral_domain(m)?;
    let h = (hi - lo) / grid_n as f64;
    let nodes: Vec<f64> = (0..=grid_n).map(|k| lo + h * k as f64).collect();
    let rule = GaussLegendre::cached(6);
    let mut sd = vec![0.0; grid_n + 1];
    let mut so = vec![0.0; grid_n];
    let mut md = vec![0.0; grid_n + 1];
    let mut mo = vec![0.0; grid_n];
    for k in 0..grid_n {
        let (a, b) = (nodes[k], nodes[k + 1]);
        let (mut w0, mut m00, mut m01, mut m11) = (0.0, 0.0, 0.0, 0.0);
        for (x, w) in rule.mapped(a, b) {
            let rho = m.density_1d(x) * w;
            let phi1 = (x - a) / h;
            let phi0 = 1.0 - phi1;
            w0 += rho;
            m00 += rho * phi0 * phi0;
            m01 += rho * phi0 * phi1;
            m11 += rho * phi1 * phi1;
        }
        let s = w0 / (h * h);
        sd[k] += s;
        sd[k + 1] += s;
        so[k] -= s;
        md[k] += m00;
        md[k + 1] += m11;
        mo[k] += m01;
    }
    if md.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::numeric("mass matrix has a non-positive diagonal entry"));
    }
    Ok(Pencil {
        nodes,
        stiffness_diag: sd,
        stiffness_off: so,
        mass_diag: md,
        mass_off: mo,
    })
}

impl Pencil {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of eigenvalues strictly below `lambda` (Sylvester inertia of
    /// `A − λB`).
    pub fn count_below(&self, lambda: f64) -> usize {
        let mut count = 0;
        let mut q = 0.0;
        for i in 0..self.len() {
            let d = self.stiffness_diag[i] - lambda * self.mass_diag[i];
            q = if i == 0 {
                d
            } else {
                let e = self.stiffness_off[i - 1] - lambda * self.mass_off[i - 1];
                let prev = if q == 0.0 { f64::MIN_POSITIVE } else { q };
                d - e * e / prev
            };
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k` smallest eigenvalues, ascending.
    pub fn smallest_eigenvalues(&self, k: usize) -> Result<Vec<f64>> {
        if k > self.len() {
            return Err(Error::invalid(format!("asked for {k} eigenvalues of a {}-node pencil", self.len())));
        }
        let mut upper = 1.0;
        while self.count_below(upper) < k {
            upper *= 2.0;
            if !upper.is_finite() {
                return Err(Error::numeric("no upper bracket for the spectrum"));
            }
        }
        let lower = -1e-3 * upper.max(1.0);
        (0..k)
            .map(|i| {
                let (mut a, mut b) = (lower, upper);
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if mid <= a || mid >= b {
                        break;
                    }
                    if self.count_below(mid) > i {
                        b = mid;
                    } else {
                        a = mid;
                    }
                }
                Ok(0.5 * (a + b))
            })
            .collect()
    }

    fn apply_mass(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.mass_diag[i] * v[i];
                if i > 0 {
                    y += self.mass_off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    y += self.mass_off[i] * v[i + 1];
                }
                y
            })
            .collect()
    }

    /// `B`-normalized eigenvector for an eigenvalue estimate, by inverse
    /// iteration. The sign makes the first node non-negative.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.len();
        let shift = lambda + 1e-10 * lambda.abs().max(1e-3);
        let diag: Vec<f64> = (0..n).map(|i| self.stiffness_diag[i] - shift * self.mass_diag[i]).collect();
        let off: Vec<f64> = (0..n - 1).map(|i| self.stiffness_off[i] - shift * self.mass_off[i]).collect();
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
        for _ in 0..4 {
            let rhs = self.apply_mass(&v);
            v = thomas(&diag, &off, &rhs);
            let norm = v.iter().zip(self.apply_mass(&v)).map(|(a, b)| a * b).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
        }
        if v[0] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    }
}

/// Symmetric tridiagonal solve with a guard against zero pivots.
fn thomas(diag: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let guard = |p: f64| if p.abs() < 1e-300 { 1e-300 } else { p };
    let mut p = guard(diag[0]);
    c[0] = if n > 1 { off[0] / p } else { 0.0 };
    d[0] = rhs[0] / p;
    for i in 1..n {
        p = guard(diag[i] - off[i - 1] * c[i - 1]);
        if i + 1 < n {
            c[i] = off[i] / p;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / p;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

/// Relative change under grid doubling above which a spectrum is rejected.
pub const GRID_REL_TOL: f64 = 0.01;

/// The `k` smallest eigenvalues of `L_μ` at `grid_n`, checked against the
/// `2·grid_n` solution.
pub fn weighted_laplacian_eigenvalues(m: &Measure, k: usize, grid_n: usize) -> Result<Vec<f64>> {
    let coarse = weighted_laplacian_1d(m, grid_n)?.smallest_eigenvalues(k)?;
    let fine = weighted_laplacian_1d(m, 2 * grid_n)?.smallest_eigenvalues(k)?;
    for (i, (c, f)) in coarse.iter().zip(&fine).enumerate() {
        let rel = (c - f).abs() / f.abs().max(1e-6);
        if rel > GRID_REL_TOL && (c - f).abs() > 1e-8 {
            return Err(Error::GridTooCoarse { index: i, rel_change: rel });
        }
    }
    Ok(coarse)
}

/// Margins `λ_i(L_μ) − λ_i(L_γ)/L²` for the first `k` eigenvalues, with
/// `L` the Lipschitz bound of the transport map onto `μ`.
pub fn eigen_compare(m: &Measure, k: usize, grid_n: usize) -> Result<SpectrumReport> {
    if m.dim() != 1 {
        return Err(Error::invalid("spectra are computed for one-dimensional measures"));
    }
    let l = lipschitz_profile(m)?.lipschitz_bound();
    let factor = l * l;
    let gauss = Measure::Mixture(MixtureSpec::uniform(vec![vec![0.0]])?);
    let mu = weighted_laplacian_eigenvalues(m, k, grid_n)?;
    let ga = weighted_laplacian_eigenvalues(&gauss, k, grid_n)?;
    let margins: Vec<f64> = mu.iter().zip(&ga).map(|(a, g)| a - g / factor).collect();
    let worst = margins.iter().copied().fold(f64::INFINITY, f64::min);
    let tolerance = 1e-6;
    Ok(SpectrumReport {
        eigenvalues_mu: mu,
        eigenvalues_gauss: ga,
        bound_factor: factor,
        margins,
        grid_size: grid_n,
        worst_margin: worst,
        tolerance,
        passed: worst >= -tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{build_builtin, MeasureDoc};
    use nalgebra::DMatrix;

    fn gauss() -> Measure {
        build_builtin(&MeasureDoc::mixture(vec![vec![0.0]], vec![1.0])).unwrap()
    }

    fn dense(p: &Pencil) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = p.len();
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = p.stiffness_diag[i];
            b[(i, i)] = p.mass_diag[i];
            if i + 1 < n {
                a[(i, i + 1)] = p.stiffness_off[i];
                a[(i + 1, i)] = p.stiffness_off[i];
                b[(i, i + 1)] = p.mass_off[i];
                b[(i + 1, i)] = p.mass_off[i];
            }
        }
        (a, b)
    }

    #[test]
    fn bisection_matches_dense_generalized_solver() {
        for m in [
            gauss(),
            build_builtin(&MeasureDoc::truncated_gaussian(-0.4, 0.4)).unwrap(),
            build_builtin(&MeasureDoc::mixture(vec![vec![1.0], vec![-1.0]], vec![0.3, 0.7])).unwrap(),
        ] {
            let p = weighted_laplacian_1d(&m, 48).unwrap();
            let (a, b) = dense(&p);
            let l = b.clone().cholesky().unwrap().l();
            let li = l.clone().try_inverse().unwrap();
            let c = &li * a * li.transpose();
            let c = (&c + c.transpose()) * 0.5;
            let mut oracle: Vec<f64> = c.symmetric_eigen().eigenvalues.iter().copied().collect();
            oracle.sort_by(f64::total_cmp);
            let ours = p.smallest_eigenvalues(6).unwrap();
            for i in 0..6 {
                assert!((ours[i] - oracle[i]).abs() < 1e-8 * oracle[i].abs().max(1.0), "{i}: {} vs {}", ours[i], oracle[i]);
            }
        }
    }

    #[test]
    fn hermite_spectrum() {
        let ev = weighted_laplacian_eigenvalues(&gauss(), 5, 2048).unwrap();
        for (i, v) in ev.iter().enumerate() {
            assert!((v - i as f64).abs() <= 0.01 * (i as f64).max(1e-4), "{i}: {v}");
        }
        assert!(ev[0].abs() < 1e-6);
    }

    #[test]
    fn kernel_is_constant_and_first_mode_is_linear() {
        let p = weighted_laplacian_1d(&gauss(), 512).unwrap();
        let ev = p.smallest_eigenvalues(2).unwrap();
        let v0 = p.eigenvector(ev[0]);
        let spread = v0.iter().fold(0.0f64, |a, x| a.max((x - v0[0]).abs()));
        assert!(spread < 1e-6, "{spread}");
        // The first Hermite mode is x.
        let v1 = p.eigenvector(ev[1]);
        let mid = p.len() / 2;
        let slope = (v1[mid + 10] - v1[mid - 10]) / (p.nodes[mid + 10] - p.nodes[mid - 10]);
        for i in (mid - 40..mid + 40).step_by(7) {
            assert!((v1[i] - slope * p.nodes[i]).abs() < 1e-3 * slope.abs(), "{i}");
        }
    }

    #[test]
    fn uniform_neumann_spectrum() {
        let m = build_builtin(&MeasureDoc::uniform_interval(-0.5, 0.5)).unwrap();
        let ev = weighted_laplacian_eigenvalues(&m, 4, 1024).unwrap();
        for (i, v) in ev.iter().enumerate() {
            let exact = (std::f64::consts::PI * i as f64).powi(2);
            assert!((v - exact).abs() < 1e-4 * exact.max(1.0), "{i}: {v} vs {exact}");
        }
    }

    #[test]
    fn comparison_factors() {
        let m = build_builtin(&MeasureDoc::uniform_interval(-0.5, 0.5)).unwrap();
        let r = eigen_compare(&m, 5, 256).unwrap();
        assert!((r.bound_factor - 0.25 * 1f64.exp()).abs() < 1e-12);
        assert!(r.passed);
        let m = build_builtin(&MeasureDoc::mixture(vec![vec![0.5], vec![-0.5]], vec![0.5, 0.5])).unwrap();
        let r = eigen_compare(&m, 5, 256).unwrap();
        assert!((r.bound_factor - 0.25f64.exp()).abs() < 1e-12);
        assert!(r.passed);
        assert!(r.eigenvalues_mu.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let m = build_builtin(&MeasureDoc::mixture(vec![vec![4.0], vec![-4.0]], vec![0.5, 0.5])).unwrap();
        assert!(matches!(
            weighted_laplacian_eigenvalues(&m, 5, 4),
            Err(Error::GridTooCoarse { .. })
        ));
    }
}
