//! Flow maps `S_t` (forward, μ → γ_d) and `T` (backward, γ_d → μ) with
//! their Jacobians.
//!
//! Integration is classical RK4 with fixed steps in `τ = log(t + c)`, which
//! spreads steps geometrically towards `t = 0`. The Jacobian is carried
//! along with `dJ/dt = dV_t(y)·J`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::bounds::{inverse_profile, lipschitz_profile, ThetaProfile};
use crate::error::{Error, Result};
use crate::measures::{norm, Measure};
use crate::ou_flow::semigroup_eval;
use crate::par;

/// Cutoff time for compactly supported targets.
pub const BOUNDED_T_MIN: f64 = 1e-6;
const DEFAULT_STEPS: usize = 256;
const MAX_DEFAULT_T_MAX: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorConfig {
    pub t_max: f64,
    pub steps: usize,
    pub richardson: bool,
    pub t_min: f64,
}

impl IntegratorConfig {
    /// Defaults for a measure: `t_min = 1e-6` on bounded supports and 0
    /// otherwise; `t_max` past which both the θ-tail and the drift of the
    /// mean are below `1e-8`.
    pub fn for_measure(m: &Measure) -> Self {
        let profile_t = lipschitz_profile(m)
            .or_else(|_| inverse_profile(m))
            .map(|p| p.default_t_max())
            .unwrap_or(6.0);
        let mean = match m {
            Measure::Mixture(mix) => {
                let mut c = vec![0.0; mix.dim()];
                for (w, x) in mix.weights().iter().zip(mix.centers()) {
                    for (ck, xk) in c.iter_mut().zip(x) {
                        *ck += w * xk;
                    }
                }
                norm(&c)
            }
            _ => m.expect_1d(|x| x).map(f64::abs).unwrap_or(0.0),
        };
        let drift_t = if mean > 0.0 { (mean * 1e8).ln() } else { 0.0 };
        Self {
            t_max: profile_t.max(drift_t).min(MAX_DEFAULT_T_MAX),
            steps: DEFAULT_STEPS,
            richardson: false,
            t_min: if m.needs_positive_time() { BOUNDED_T_MIN } else { 0.0 },
        }
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_richardson(mut self, on: bool) -> Self {
        self.richardson = on;
        self
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn validate(&self, m: &Measure) -> Result<()> {
        if !(self.t_min >= 0.0) || !self.t_min.is_finite() {
            return Err(Error::invalid(format!("t_min must be finite and ≥ 0, got {}", self.t_min)));
        }
        if !(self.t_max > self.t_min) || !self.t_max.is_finite() {
            return Err(Error::invalid(format!(
                "t_max = {} must exceed t_min = {}",
                self.t_max, self.t_min
            )));
        }
        if self.steps < 16 {
            return Err(Error::invalid(format!("steps must be at least 16, got {}", self.steps)));
        }
        if m.needs_positive_time() && self.t_min <= 0.0 {
            return Err(Error::invalid("compactly supported measures need t_min > 0"));
        }
        Ok(())
    }

    fn shift(&self) -> f64 {
        if self.t_min > 0.0 {
            self.t_min
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowResult {
    pub endpoint: Vec<f64>,
    /// `(t, y(t))` after every step, in integration order.
    pub trajectory: Option<Vec<(f64, Vec<f64>)>>,
    #[serde(serialize_with = "serialize_matrix")]
    pub jacobian: DMatrix<f64>,
    pub op_norm: f64,
    /// `∫θ` over `[t_min, t_max]` from the applicable profile, signed so
    /// that `exp` of it bounds `op_norm`.
    pub log_lipschitz_accum: Option<f64>,
    pub t_min: f64,
    pub t_max: f64,
}

fn serialize_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for i in 0..m.nrows() {
        let row: Vec<f64> = m.row(i).iter().copied().collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

#[derive(Clone, Copy, PartialEq)]
enum Direction {
    Forward,
    Backward,
}

struct RawFlow {
    y: Vec<f64>,
    j: DMatrix<f64>,
    trajectory: Option<Vec<(f64, Vec<f64>)>>,
}

fn integrate(m: &Measure, x: &[f64], cfg: &IntegratorConfig, steps: usize, dir: Direction, record: bool) -> Result<RawFlow> {
    let d = m.dim();
    if x.len() != d {
        return Err(Error::invalid(format!("point has dimension {}, measure has dimension {d}", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("starting point must be finite"));
    }
    let c = cfg.shift();
    let tau0 = (cfg.t_min + c).ln();
    let tau1 = (cfg.t_max + c).ln();
    let h_abs = (tau1 - tau0) / steps as f64;
    let radius = 10.0 * m.scale() + 20.0;

    let time = |k: usize| -> f64 {
        match dir {
            Direction::Forward if k == 0 => cfg.t_min,
            Direction::Forward if k == steps => cfg.t_max,
            Direction::Forward => (tau0 + h_abs * k as f64).exp() - c,
            Direction::Backward if k == 0 => cfg.t_max,
            Direction::Backward if k == steps => cfg.t_min,
            Direction::Backward => (tau1 - h_abs * k as f64).exp() - c,
        }
    };
    let h = match dir {
        Direction::Forward => h_abs,
        Direction::Backward => -h_abs,
    };

    // Right-hand side in τ: (t + c)·V_t(y) and (t + c)·dV_t(y)·J.
    let rhs = |t: f64, y: &[f64], j: &DMatrix<f64>| -> Result<(Vec<f64>, DMatrix<f64>)> {
        let ev = semigroup_eval(m, t.max(cfg.t_min), y)?;
        let scale = t + c;
        let v: Vec<f64> = ev.score.iter().map(|s| -s * scale).collect();
        let dj = -(&ev.score_jacobian * j) * scale;
        Ok((v, dj))
    };

    let mut y = x.to_vec();
    let mut j = DMatrix::identity(d, d);
    let mut trajectory = record.then(|| vec![(time(0), y.clone())]);
    for k in 0..steps {
        let t_a = time(k);
        let t_b = time(k + 1);
        let t_m = ((t_a + c).ln() + 0.5 * h).exp() - c;

        let (k1, l1) = rhs(t_a, &y, &j)?;
        let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
        let j2 = &j + &l1 * (0.5 * h);
        let (k2, l2) = rhs(t_m, &y2, &j2)?;
        let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, b)| a + 0.5 * h * b).collect();
        let j3 = &j + &l2 * (0.5 * h);
        let (k3, l3) = rhs(t_m, &y3, &j3)?;
        let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
        let j4 = &j + &l3 * h;
        let (k4, l4) = rhs(t_b, &y4, &j4)?;

        for i in 0..d {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        j += (l1 + l2 * 2.0 + l3 * 2.0 + l4) * (h / 6.0);

        let r = norm(&y);
        if !r.is_finite() || j.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(format!("non-finite state at t = {t_b:e}")));
        }
        if r > radius {
            return Err(Error::Divergence { t: t_b, norm: r, radius });
        }
        if let Some(tr) = trajectory.as_mut() {
            tr.push((t_b, y.clone()));
        }
    }
    Ok(RawFlow { y, j, trajectory })
}

fn run(m: &Measure, x: &[f64], cfg: &IntegratorConfig, dir: Direction, record: bool) -> Result<FlowResult> {
    cfg.validate(m)?;
    let fine = if cfg.richardson {
        let coarse = integrate(m, x, cfg, cfg.steps, dir, false)?;
        let fine = integrate(m, x, cfg, 2 * cfg.steps, dir, record)?;
        RawFlow {
            y: fine
                .y
                .iter()
                .zip(&coarse.y)
                .map(|(f, c)| (16.0 * f - c) / 15.0)
                .collect(),
            j: (&fine.j * 16.0 - &coarse.j) / 15.0,
            trajectory: fine.trajectory,
        }
    } else {
        integrate(m, x, cfg, cfg.steps, dir, record)?
    };
    let accum = match dir {
        Direction::Backward => lipschitz_profile(m).ok().map(|p| window_integral(&p, cfg)),
        Direction::Forward => inverse_profile(m).ok().map(|p| -window_integral(&p, cfg)),
    };
    Ok(FlowResult {
        op_norm: operator_norm(&fine.j),
        endpoint: fine.y,
        trajectory: fine.trajectory,
        jacobian: fine.j,
        log_lipschitz_accum: accum,
        t_min: cfg.t_min,
        t_max: cfg.t_max,
    })
}

fn window_integral(p: &ThetaProfile, cfg: &IntegratorConfig) -> f64 {
    p.tail_integral(cfg.t_min) - p.tail_integral(cfg.t_max)
}

/// `S_{t_max}(x)` with `S_{t_min} = Id`, approximating `S(x)`.
pub fn flow_forward(m: &Measure, x: &[f64], cfg: &IntegratorConfig) -> Result<FlowResult> {
    run(m, x, cfg, Direction::Forward, false)
}

/// As [`flow_forward`], keeping the trajectory.
pub fn flow_forward_traced(m: &Measure, x: &[f64], cfg: &IntegratorConfig) -> Result<FlowResult> {
    run(m, x, cfg, Direction::Forward, true)
}

/// `T(x)`: the backward flow from `t_max` to `t_min`, started at `x`.
pub fn transport_from_gaussian(m: &Measure, x: &[f64], cfg: &IntegratorConfig) -> Result<FlowResult> {
    run(m, x, cfg, Direction::Backward, false)
}

/// As [`transport_from_gaussian`], keeping the trajectory.
pub fn transport_traced(m: &Measure, x: &[f64], cfg: &IntegratorConfig) -> Result<FlowResult> {
    run(m, x, cfg, Direction::Backward, true)
}

/// `T` on many points, in input order.
pub fn transport_batch(m: &Measure, xs: &[Vec<f64>], cfg: &IntegratorConfig) -> Result<Vec<FlowResult>> {
    par::map(xs, |x| transport_from_gaussian(m, x, cfg)).into_iter().collect()
}

/// `‖S(T(x)) − x‖` with matched configurations.
pub fn roundtrip_error(m: &Measure, x: &[f64], cfg: &IntegratorConfig) -> Result<f64> {
    let tx = transport_from_gaussian(m, x, cfg)?;
    let back = flow_forward(m, &tx.endpoint, cfg)?;
    Ok(back
        .endpoint
        .iter()
        .zip(x)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Largest singular value, by power iteration on `JᵀJ`.
pub fn operator_norm(j: &DMatrix<f64>) -> f64 {
    let n = j.ncols();
    if n == 0 || j.nrows() == 0 {
        return 0.0;
    }
    if j.nrows() == 1 && n == 1 {
        return j[(0, 0)].abs();
    }
    let jtj = j.transpose() * j;
    let mut v = nalgebra::DVector::from_fn(n, |i, _| 1.0 / (i + 1) as f64);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let w = &jtj * &v;
        let next = v.dot(&w);
        let wn = w.norm();
        if wn == 0.0 {
            return 0.0;
        }
        v = w / wn;
        if (next - lambda).abs() <= 1e-12 * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.max(0.0).sqrt()
}

/// `T` and `T'` tabulated on a uniform grid, with cubic Hermite
/// interpolation inside and direct integration outside.
#[derive(Debug, Clone)]
pub struct MapTable1d {
    lo: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
    measure: Measure,
    cfg: IntegratorConfig,
}

impl MapTable1d {
    pub fn new(m: &Measure, cfg: &IntegratorConfig, lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        if m.dim() != 1 {
            return Err(Error::invalid("map tables need a one-dimensional measure"));
        }
        if !(hi > lo) || nodes < 2 {
            return Err(Error::invalid("map table needs hi > lo and at least two nodes"));
        }
        let step = (hi - lo) / (nodes - 1) as f64;
        let xs: Vec<Vec<f64>> = (0..nodes).map(|i| vec![lo + step * i as f64]).collect();
        let flows = transport_batch(m, &xs, cfg)?;
        Ok(Self {
            lo,
            step,
            values: flows.iter().map(|f| f.endpoint[0]).collect(),
            slopes: flows.iter().map(|f| f.jacobian[(0, 0)]).collect(),
            measure: m.clone(),
            cfg: *cfg,
        })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.lo + self.step * (self.values.len() - 1) as f64)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if !(x >= lo && x <= hi) {
            return Ok(transport_from_gaussian(&self.measure, &[x], &self.cfg)?.endpoint[0]);
        }
        let pos = (x - lo) / self.step;
        let k = (pos.floor() as usize).min(self.values.len() - 2);
        let s = pos - k as f64;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s),
            s * (1.0 - s) * (1.0 - s),
            s * s * (3.0 - 2.0 * s),
            s * s * (s - 1.0),
        );
        Ok(h00 * self.values[k]
            + h10 * self.step * self.slopes[k]
            + h01 * self.values[k + 1]
            + h11 * self.step * self.slopes[k + 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{build_builtin, MeasureDoc};
    use approx::assert_relative_eq;

    fn mixture(centers: &[f64]) -> Measure {
        let n = centers.len();
        build_builtin(&MeasureDoc::mixture(
            centers.iter().map(|&c| vec![c]).collect(),
            vec![1.0 / n as f64; n],
        ))
        .unwrap()
    }

    #[test]
    fn translation_maps() {
        let m = mixture(&[2.0]);
        let cfg = IntegratorConfig::for_measure(&m).with_steps(256);
        let s = flow_forward(&m, &[0.7], &cfg).unwrap();
        let expect = 0.7 - 2.0 * (1.0 - (-(cfg.t_max - cfg.t_min)).exp());
        assert_relative_eq!(s.endpoint[0], expect, epsilon = 1e-10);
        assert_relative_eq!(s.jacobian[(0, 0)], 1.0, epsilon = 1e-14);
        let t = transport_from_gaussian(&m, &[0.7], &cfg).unwrap();
        assert_relative_eq!(t.endpoint[0], 2.7, epsilon = 1e-6);
        assert!(roundtrip_error(&m, &[0.7], &cfg.with_steps(4096)).unwrap() < 1e-6);
    }

    #[test]
    fn gaussian_target_is_identity() {
        let m = mixture(&[0.0]);
        let cfg = IntegratorConfig::for_measure(&m);
        let r = transport_from_gaussian(&m, &[1.3], &cfg).unwrap();
        assert_eq!(r.endpoint, vec![1.3]);
        assert_eq!(r.op_norm, 1.0);
        assert_eq!(roundtrip_error(&m, &[1.3], &cfg).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_variance_inverse_is_linear() {
        let m = build_builtin(&MeasureDoc::gaussian_variance(4.0)).unwrap();
        let cfg = IntegratorConfig::for_measure(&m).with_t_max(20.0).with_steps(1024);
        for x in [-0.8, 0.0, 0.4] {
            let s = flow_forward(&m, &[x], &cfg).unwrap();
            assert_relative_eq!(s.endpoint[0], 2.0 * x, epsilon = 1e-6);
            assert_relative_eq!(s.op_norm, 2.0, epsilon = 1e-6);
            assert_relative_eq!(s.log_lipschitz_accum.unwrap().exp(), 2.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn symmetric_pair_tightness() {
        let m = mixture(&[-1.0, 1.0]);
        let cfg = IntegratorConfig::for_measure(&m).with_steps(1024);
        let r = transport_from_gaussian(&m, &[0.0], &cfg).unwrap();
        assert_eq!(r.endpoint[0], 0.0);
        assert_relative_eq!(r.op_norm, 0.5f64.exp(), max_relative = 1e-6);
    }

    #[test]
    fn operator_norm_examples() {
        assert_eq!(operator_norm(&DMatrix::identity(3, 3)), 1.0);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5]));
        assert_relative_eq!(operator_norm(&d), 2.0, max_relative = 1e-12);
        let j = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, -0.5, 0.3, -1.1, 0.7, 2.2, 0.1, 0.4]);
        let svd = j.clone().svd(false, false);
        let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
        assert_relative_eq!(operator_norm(&j), top, max_relative = 1e-10);
    }

    #[test]
    fn config_validation() {
        let m = build_builtin(&MeasureDoc::uniform_interval(-0.5, 0.5)).unwrap();
        let cfg = IntegratorConfig::for_measure(&m);
        assert_eq!(cfg.t_min, BOUNDED_T_MIN);
        assert!(cfg.with_steps(8).validate(&m).is_err());
        assert!(IntegratorConfig { t_min: 0.0, ..cfg }.validate(&m).is_err());
        assert!(cfg.with_t_max(1e-7).validate(&m).is_err());
    }

    #[test]
    fn bounded_transport_lands_in_support() {
        let m = build_builtin(&MeasureDoc::truncated_gaussian(-0.4, 0.4)).unwrap();
        let cfg = IntegratorConfig::for_measure(&m);
        for x in [-4.0, -1.0, 0.3, 2.5] {
            let r = transport_from_gaussian(&m, &[x], &cfg).unwrap();
            // The cutoff map lands on the law of e^{-t}X + sG at t = t_min.
            let slack = 6.0 * (2.0 * cfg.t_min).sqrt();
            assert!(r.endpoint[0].abs() <= 0.4 + slack, "T({x}) = {}", r.endpoint[0]);
            assert!(r.op_norm <= r.log_lipschitz_accum.unwrap().exp() + 1e-6);
        }
    }

    #[test]
    fn map_table_interpolates() {
        let m = mixture(&[-1.0, 1.0]);
        let cfg = IntegratorConfig::for_measure(&m).with_steps(128);
        let table = MapTable1d::new(&m, &cfg, -3.0, 3.0, 301).unwrap();
        for x in [-2.99, -0.013, 0.5, 1.777, 4.0] {
            let direct = transport_from_gaussian(&m, &[x], &cfg).unwrap().endpoint[0];
            assert_relative_eq!(table.eval(x).unwrap(), direct, epsilon = 1e-7);
        }
    }
}
