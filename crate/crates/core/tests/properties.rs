use proptest::prelude::*;
use shang::*;

fn point(coords: &[f64]) -> Point64 {
    Point::from_f64(coords).unwrap()
}

fn quadratic_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..5).prop_flat_map(|d| {
        (
            prop::collection::vec(0.01f64..10.0, d),
            prop::collection::vec(-3.0f64..3.0, d),
        )
    })
}

proptest! {
    #[test]
    fn fd_is_even_and_nonnegative(d in prop::sample::select(vec![2u32, 4, 8, 16]), x in -3.0f64..3.0) {
        let v = fd_value::<f64>(d, x).unwrap();
        prop_assert!(v >= 0.0);
        prop_assert_eq!(v, fd_value::<f64>(d, -x).unwrap());
        prop_assert_eq!(fd_gradient::<f64>(d, x).unwrap(), -fd_gradient::<f64>(d, -x).unwrap());
    }

    #[test]
    fn fd_gradient_matches_central_difference(d in prop::sample::select(vec![4u32, 16]), x in -2.0f64..2.0) {
        let h = 1e-6;
        let fd = (fd_value::<f64>(d, x + h).unwrap() - fd_value::<f64>(d, x - h).unwrap()) / (2.0 * h);
        let g = fd_gradient::<f64>(d, x).unwrap();
        prop_assert!((fd - g).abs() <= 1e-5 * (1.0 + g.abs()), "fd {fd} vs grad {g}");
    }

    #[test]
    fn quadratic_bregman_is_half_weighted_distance((eig, c) in quadratic_strategy(), shift in -2.0f64..2.0) {
        let q = make_quadratic(eig.clone(), point(&c)).unwrap();
        let x = point(&c.iter().map(|v| v + shift).collect::<Vec<_>>());
        let y = point(&vec![0.5; c.len()]);
        let d = bregman_divergence(&q, &y, &x).unwrap();
        let direct: f64 = eig.iter().zip(y.sub(&x).as_slice()).map(|(l, v)| 0.5 * l * v * v).sum();
        prop_assert!(d >= -1e-12);
        prop_assert!((d - direct).abs() <= 1e-10 * (1.0 + direct));
        prop_assert_eq!(q.value(q.minimizer().unwrap()), 0.0);
    }

    #[test]
    fn three_point_identity_is_rounding_only((eig, c) in quadratic_strategy(), s in -1.0f64..1.0) {
        let q = make_quadratic(eig, point(&c)).unwrap();
        let x = point(&vec![s; c.len()]);
        let y = point(&vec![2.0 * s + 0.1; c.len()]);
        let z = point(&vec![-s; c.len()]);
        let r = three_point_identity_residual(&q, &x, &y, &z).unwrap();
        prop_assert!(r.abs() <= 1e-9);
    }

    #[test]
    fn convex_schedule_condition_holds(m in 0.0f64..3.0, sigma in 0.0f64..5.0, l in 0.1f64..100.0, k in 0usize..100_000) {
        let sched = Schedule::new(Regime::Convex, SmoothnessProfile::new(0.0, l).unwrap(), sigma, m, None).unwrap();
        let (a, b) = (sched.at(k), sched.at(k + 1));
        let scale = a.energy_gamma() / a.energy_alpha();
        prop_assert!(schedule_condition_residual(&a, &b) <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn strongly_convex_schedule_is_stationary(mu in 0.001f64..0.5, sigma in 0.0f64..3.0, m in prop::sample::select(vec![0.0, 1.0])) {
        let sched = Schedule::new(Regime::StronglyConvex, SmoothnessProfile::new(mu, 1.0).unwrap(), sigma, m, None).unwrap();
        let p = sched.at(7);
        prop_assert_eq!(schedule_condition_residual(&p, &sched.at(8)), 0.0);
        prop_assert!((p.alpha_tilde - mu.sqrt() / (1.0 + sigma * sigma)).abs() <= 1e-15);
        prop_assert!((p.alpha_tilde - p.alpha / (1.0 + m * p.alpha)).abs() <= 1e-15);
    }

    #[test]
    fn envelopes_are_nonincreasing(alpha in 0.001f64..0.9, m in 0.0f64..3.0, k in 0usize..10_000) {
        for rate in [
            TheoremRate::ShangStronglyConvex { alpha },
            TheoremRate::ShangPlusPlusStronglyConvex { alpha_tilde: alpha },
            TheoremRate::Convex { m },
        ] {
            let e = |k| rate.envelope(k, 1.0);
            prop_assert!(e(k + 1) <= e(k));
            prop_assert!(e(0) == 1.0 && e(1) <= 1.0);
            prop_assert_eq!(theorem_bound(&rate, k, 1.0).unwrap(), e(k + 1));
        }
    }

    #[test]
    fn shangpp_without_correction_is_shang(seed in any::<u64>(), x0 in -2.0f64..2.0, sigma in 0.0f64..3.0) {
        let q = make_quadratic(vec![0.05, 1.0], point(&[0.2, -0.1])).unwrap();
        let sched = Schedule::new(Regime::StronglyConvex, q.profile(), sigma, 0.0, None).unwrap();
        let config = MnsOracleConfig::new(sigma, NoiseShape::Elementwise, 1, seed).unwrap();
        let (mut o1, mut o2) = (MnsOracle::new(config, 3), MnsOracle::new(config, 3));
        let start = point(&[x0, -x0]);
        let mut a = ShangState::start(ShangMethod::Shang, start.clone(), start.clone(), &sched.at(0), &mut o1, &q).unwrap();
        let mut b = ShangState::start(ShangMethod::ShangPlusPlus, start.clone(), start, &sched.at(0), &mut o2, &q).unwrap();
        for k in 0..50 {
            a = shang_step(&a, &sched.at(k), &mut o1, &q).unwrap();
            b = shangpp_step(&b, &sched.at(k), &mut o2, &q).unwrap();
            prop_assert_eq!(&a, &b);
        }
    }

    #[test]
    fn noiseless_oracle_is_exact(g in prop::collection::vec(-5.0f64..5.0, 1..6), seed in any::<u64>()) {
        let config = MnsOracleConfig::new(0.0, NoiseShape::Elementwise, 1, seed).unwrap();
        let mut stream = config.stream(0);
        let grad = point(&g);
        prop_assert_eq!(sample_noisy_gradient(&config, &mut stream, &grad), grad);
        prop_assert_eq!(stream.draws(), 0);
    }

    #[test]
    fn scalar_noise_preserves_direction(g in prop::collection::vec(0.1f64..5.0, 2..6), seed in any::<u64>()) {
        let config = MnsOracleConfig::new(2.0, NoiseShape::ScalarFactor, 3, seed).unwrap();
        let grad = point(&g);
        let noisy = sample_noisy_gradient(&config, &mut config.stream(1), &grad);
        let ratio = noisy[0] / grad[0];
        for i in 1..grad.dim() {
            prop_assert!((noisy[i] / grad[i] - ratio).abs() <= 1e-12 * (1.0 + ratio.abs()));
        }
    }
}

#[test]
fn snag_forms_agree_on_one_step() {
    let q = make_quadratic(vec![0.1, 1.0], point(&[0.3, -0.4])).unwrap();
    let hnag = SnagHnagParams {
        alpha_next: 0.7,
        beta_next: 0.9,
        gamma_next: 0.5,
        mu: 0.02,
    };
    let state = SnagState::new(point(&[1.0, 2.0]), point(&[-0.5, 0.25])).unwrap();
    let (mut o1, mut o2) = (ExactOracle, ExactOracle);
    let a = snag_step_hnag(&state, &hnag, &mut o1, &q).unwrap();
    let b = snag_step_original(&state, &hnag.to_original(), &mut o2, &q).unwrap();
    for (u, v) in a.x.as_slice().iter().zip(b.x.as_slice()) {
        assert!((u - v).abs() <= 1e-14 * (1.0 + u.abs()), "{u} vs {v}");
    }
}
