use heatflow::bounds::{hessian_envelope, integrate_profile, lipschitz_profile, ThetaProfile};
use heatflow::ou_flow::{q_smooth, semigroup_eval, velocity};
use heatflow::transport::{transport_from_gaussian, IntegratorConfig};
use heatflow::verify::{empirical_lipschitz, pushforward_ks_1d, LipschitzDirection};
use heatflow::{build_builtin, chebyshev_radius, Measure, MeasureDoc, MixtureSpec};
use proptest::prelude::*;

/// Smallest enclosing circle by exhaustion over all pairs and triples.
fn brute_force_radius(p: &[Vec<f64>]) -> f64 {
    let covers = |c: [f64; 2], r: f64| p.iter().all(|q| (q[0] - c[0]).hypot(q[1] - c[1]) <= r * (1.0 + 1e-9) + 1e-12);
    let mut best = f64::INFINITY;
    let n = p.len();
    if n == 1 {
        return 0.0;
    }
    for i in 0..n {
        for j in i + 1..n {
            let c = [(p[i][0] + p[j][0]) / 2.0, (p[i][1] + p[j][1]) / 2.0];
            let r = (p[i][0] - c[0]).hypot(p[i][1] - c[1]);
            if r < best && covers(c, r) {
                best = r;
            }
            for k in j + 1..n {
                let (ax, ay, bx, by, cx, cy) = (p[i][0], p[i][1], p[j][0], p[j][1], p[k][0], p[k][1]);
                let d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
                if d.abs() < 1e-12 {
                    continue;
                }
                let a2 = ax * ax + ay * ay;
                let b2 = bx * bx + by * by;
                let c2 = cx * cx + cy * cy;
                let ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
                let uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
                let r = (ax - ux).hypot(ay - uy);
                if r < best && covers([ux, uy], r) {
                    best = r;
                }
            }
        }
    }
    best
}

fn mixture(centers: Vec<Vec<f64>>) -> Measure {
    Measure::Mixture(MixtureSpec::uniform(centers).unwrap())
}

fn centers_1d() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(-1.5f64..1.5, 1..4).prop_map(|v| v.into_iter().map(|x| vec![x]).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chebyshev_radius_matches_exhaustive_search(
        pts in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..8)
    ) {
        let p: Vec<Vec<f64>> = pts.into_iter().map(|(a, b)| vec![a, b]).collect();
        let (r, c) = chebyshev_radius(&p);
        prop_assert!((r - brute_force_radius(&p)).abs() < 1e-9 * (1.0 + r));
        for q in &p {
            prop_assert!((q[0] - c[0]).hypot(q[1] - c[1]) <= r + 1e-9);
        }
    }

    #[test]
    fn profile_integrals_match_closed_forms(
        sigma in 0.1f64..3.0, u in 0.0f64..0.99, r in 0.0f64..3.0, beta in 0.05f64..20.0
    ) {
        let kappa = -2.0 + u * (2.0 + 1.0 / (sigma * sigma));
        let p = ThetaProfile::logconcave(kappa, sigma).unwrap();
        let exact = 0.5 * (1.0 - kappa * sigma * sigma) + sigma.ln();
        prop_assert!((integrate_profile(&p, p.default_t_max()).unwrap() - exact).abs() < 1e-8);
        prop_assert!((p.lipschitz_bound() / exact.exp() - 1.0).abs() < 1e-8);

        let p = ThetaProfile::mixture(r).unwrap();
        prop_assert!((integrate_profile(&p, p.default_t_max()).unwrap() - 0.5 * r * r).abs() < 1e-8);

        let p = ThetaProfile::logconvex(beta).unwrap();
        prop_assert!((integrate_profile(&p, p.default_t_max()).unwrap() + 0.5 * beta.ln()).abs() < 1e-8);
        prop_assert!((p.lipschitz_bound() - beta.sqrt()).abs() < 1e-8 * beta.sqrt());
    }

    #[test]
    fn strongly_curved_profiles_use_curvature_alone(kappa in 0.05f64..10.0, sigma in 0.1f64..5.0) {
        prop_assume!(kappa * sigma * sigma >= 1.0);
        let p = ThetaProfile::logconcave(kappa, sigma).unwrap();
        prop_assert!(p.t0.is_none());
        prop_assert!((integrate_profile(&p, p.default_t_max()).unwrap() + 0.5 * kappa.ln()).abs() < 1e-8);
    }

    #[test]
    fn mixture_hessian_stays_in_envelope(c in centers_1d(), t in 1e-3f64..5.0, x in -5.0f64..5.0) {
        let m = mixture(c);
        let ev = semigroup_eval(&m, t, &[x]).unwrap();
        let (lo, hi) = hessian_envelope(&m, t);
        let h = ev.score_jacobian[(0, 0)];
        prop_assert!(h >= lo - 1e-7 && h <= hi + 1e-7, "{lo} ≤ {h} ≤ {hi}");
    }

    #[test]
    fn mixture_velocity_is_bounded_by_the_centres(
        c in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 2), 1..4),
        t in 0.0f64..4.0, x in prop::collection::vec(-4.0f64..4.0, 2)
    ) {
        let rmax = c.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
        let v = velocity(&mixture(c), t, &x).unwrap();
        prop_assert!(v[0].hypot(v[1]) <= (-t).exp() * rmax * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn semigroup_flattens_at_large_time(c in centers_1d(), x in -3.0f64..3.0) {
        let q = q_smooth(&mixture(c), 20.0, &[x]).unwrap();
        prop_assert!((q - 1.0).abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn bounded_hessian_stays_in_envelope(
        half in 0.1f64..1.5, shift in -0.5f64..0.5, c in 0.0f64..2.0, t in 1e-4f64..3.0, u in 0.0f64..1.0
    ) {
        let (a, b) = (shift - half, shift + half);
        for doc in [
            MeasureDoc::uniform_interval(a, b),
            MeasureDoc::truncated_gaussian(a, b),
            MeasureDoc::inflated(a, b, c.max(1e-3)),
        ] {
            let m = build_builtin(&doc).unwrap();
            let x = a + (b - a) * u;
            let ev = semigroup_eval(&m, t, &[x]).unwrap();
            let (lo, hi) = hessian_envelope(&m, t);
            let h = ev.score_jacobian[(0, 0)];
            prop_assert!(h >= lo - 1e-7 * (1.0 + lo.abs()) && h <= hi + 1e-7 * (1.0 + hi.abs()), "{doc:?}: {lo} ≤ {h} ≤ {hi}");
        }
    }

    #[test]
    fn one_dimensional_maps_are_increasing_and_certified(
        c in centers_1d(), a in -3.0f64..3.0, gap in 0.01f64..2.0
    ) {
        let m = mixture(c);
        let cfg = IntegratorConfig::for_measure(&m).with_steps(64);
        let ta = transport_from_gaussian(&m, &[a], &cfg).unwrap();
        let tb = transport_from_gaussian(&m, &[a + gap], &cfg).unwrap();
        prop_assert!(tb.endpoint[0] > ta.endpoint[0]);
        let bound = lipschitz_profile(&m).unwrap().lipschitz_bound();
        prop_assert!(ta.op_norm > 0.0 && ta.op_norm <= bound * 1.001);
        prop_assert!(tb.endpoint[0] - ta.endpoint[0] <= bound * gap * 1.001);
    }
}

#[test]
fn lipschitz_reports_are_bit_reproducible() {
    let m = build_builtin(&MeasureDoc::mixture(vec![vec![0.7, 0.0], vec![-0.2, 0.5]], vec![0.4, 0.6])).unwrap();
    let cfg = IntegratorConfig::for_measure(&m).with_steps(32);
    let a = empirical_lipschitz(&m, 40, &cfg, 99, LipschitzDirection::Transport).unwrap();
    let b = empirical_lipschitz(&m, 40, &cfg, 99, LipschitzDirection::Transport).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.margins_csv(), b.margins_csv());
    assert!(a.passed);
}

#[test]
fn ks_statistic_shrinks_like_root_n() {
    let m = build_builtin(&MeasureDoc::mixture(vec![vec![1.0], vec![-1.0]], vec![0.5, 0.5])).unwrap();
    let cfg = IntegratorConfig::for_measure(&m).with_steps(64);
    let seeds = 0..16u64;
    let sizes = [500usize, 1000, 2000, 4000, 8000];
    let mean_ks: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            let total: f64 = seeds.clone().map(|s| pushforward_ks_1d(&m, n, &cfg, s).unwrap().details["ks"]).sum();
            total / seeds.clone().count() as f64
        })
        .collect();
    for w in mean_ks.windows(2) {
        let ratio = w[1] / w[0];
        assert!((0.5..=1.0).contains(&ratio), "{mean_ks:?}");
    }
}
