use proptest::prelude::*;

use switchdiff::analytics::{
    chernoff_skeleton_from, ln_mgf_deficit, ln_mgf_excess, TailDirection, DEFAULT_LAMBDA_CAP,
};
use switchdiff::cli::config::{
    ChernoffParams, Command, EscapeParams, Format, MethodChoice, OutputSpec, RunSpec, TailParams,
};
use switchdiff::cli::{parse_config, serialize_config};
use switchdiff::model::{a2_coefficient, analytic_constants, transience_condition};
use switchdiff::montecarlo::{estimate_with, wilson_interval, EstimateKind};
use switchdiff::path::{simulate, SimMethod};
use switchdiff::skeleton::{sample_skeleton, sample_skeleton_covering};
use switchdiff::{validate, ModelSpec, RandomSource, Regime, Stream};

fn rate() -> impl Strategy<Value = f64> {
    0.05f64..20.0
}

fn regime() -> impl Strategy<Value = Regime> {
    prop_oneof![Just(Regime::Plus), Just(Regime::Minus)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn transience_iff_positive_velocity(lp in rate(), lm in rate(), rp in 0.01f64..10.0, rm in 0.01f64..10.0) {
        let m = validate(ModelSpec::at_bounds(lp, rp, lm, rm)).unwrap();
        let c = analytic_constants(&m);
        let transient = transience_condition(rp, lp, rm, lm).unwrap();
        prop_assert_eq!(c.transient, transient);
        // Skip exact ties, where rounding decides the sign.
        if (rp / lp - rm / lm).abs() > 1e-12 * (rp / lp) {
            prop_assert_eq!(transient, c.velocity_star > 0.0);
        }
        prop_assert!(c.mean_cycle > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn a2_slope_is_minus_mean_cycle(lp in rate(), lm in rate(), rp in 0.01f64..10.0, rm in 0.01f64..10.0, a in -5.0f64..5.0) {
        let h = 1e-3;
        let up = a2_coefficient(a + h, rp, rm, lp, lm).value;
        let down = a2_coefficient(a - h, rp, rm, lp, lm).value;
        let slope = (up - down) / (2.0 * h);
        let lambda = 1.0 / lp + 1.0 / lm;
        prop_assert!((slope + lambda).abs() <= 1e-8 * lambda.max(1.0), "slope {} vs {}", slope, -lambda);
    }

    #[test]
    fn mgfs_are_one_at_zero(lp in rate(), lm in rate(), n in 0u64..500, start in regime()) {
        let c = 1.0 / lp + 1.0 / lm;
        prop_assert_eq!(ln_mgf_deficit(0.0, n, c, lp, lm, start).unwrap(), 0.0);
        prop_assert_eq!(ln_mgf_excess(0.0, n, c, lp, lm, start).unwrap(), 0.0);
    }

    #[test]
    fn chernoff_bound_is_the_minimum(
        lp in 0.2f64..5.0,
        lm in 0.2f64..5.0,
        eps in 0.01f64..1.0,
        n in 1u64..50,
        start in regime(),
        upper in any::<bool>(),
        probes in prop::collection::vec(0.0f64..1.0, 64),
    ) {
        let dir = if upper { TailDirection::UpperTail } else { TailDirection::LowerTail };
        let ch = chernoff_skeleton_from(dir, eps, n, lp, lm, DEFAULT_LAMBDA_CAP, start).unwrap();
        let c = 1.0 / lp + 1.0 / lm;
        let pole = lp.min(lm);
        let objective = |l: f64| {
            let ln = match dir {
                TailDirection::LowerTail => ln_mgf_deficit(l, n, c, lp, lm, start),
                TailDirection::UpperTail => ln_mgf_excess(l, n, c, lp, lm, start),
            };
            (ln.unwrap() - l * eps * n as f64).exp()
        };
        for u in probes {
            let l = match dir {
                TailDirection::LowerTail => 10.0 * u,
                TailDirection::UpperTail => pole * u * 0.999,
            };
            prop_assert!(ch.bound <= objective(l) * (1.0 + 1e-9), "bound {} above objective {} at {}", ch.bound, objective(l), l);
        }
        prop_assert!(ch.kappa < 1.0);
        prop_assert!((0.0..=1.0).contains(&ch.bound));
    }

    #[test]
    fn skeleton_invariants(lp in rate(), lm in rate(), n in 1usize..40, seed in any::<u64>(), z0 in regime()) {
        let m = validate(ModelSpec::at_bounds(lp, 1.0, lm, 1.0).with_start(0.0, z0)).unwrap();
        let sk = sample_skeleton(&m, n, &mut Stream::new(seed)).unwrap();
        prop_assert_eq!(sk.t0() == 0.0, z0 == Regime::Plus);
        prop_assert_eq!(sk.switch_times().len(), 2 * n);
        prop_assert_eq!(sk.full_cycles(), n);
        let mut prev = sk.t0();
        for &t in sk.switch_times() {
            prop_assert!(t > prev);
            prev = t;
        }
        let again = sample_skeleton(&m, n, &mut Stream::new(seed)).unwrap();
        prop_assert_eq!(sk, again);
    }

    #[test]
    fn trajectory_invariants(seed in any::<u64>(), horizon in 0.1f64..30.0, em in any::<bool>(), x0 in -5.0f64..5.0) {
        let m = validate(ModelSpec::at_bounds(1.0, 1.0, 2.0, 1.0).with_start(x0, Regime::Plus)).unwrap();
        let method = if em { SimMethod::EulerMaruyama { dt: 0.05 } } else { SimMethod::Exact };
        let mut rng = Stream::new(seed);
        let sk = sample_skeleton_covering(&m, horizon, &mut rng).unwrap();
        let tr = simulate(method, &m, &sk, horizon, &mut rng).unwrap();
        prop_assert_eq!(tr.times()[0], 0.0);
        prop_assert_eq!(tr.values()[0], x0);
        prop_assert_eq!(tr.times().len(), tr.values().len());
        prop_assert_eq!(*tr.times().last().unwrap(), horizon);
        for (s, _) in sk.events().filter(|&(s, _)| s > 0.0 && s <= horizon) {
            prop_assert_eq!(tr.times().iter().filter(|&&t| t == s).count(), 1);
        }
        let mut rng = Stream::new(seed);
        let sk2 = sample_skeleton_covering(&m, horizon, &mut rng).unwrap();
        let tr2 = simulate(method, &m, &sk2, horizon, &mut rng).unwrap();
        prop_assert_eq!(tr.values(), tr2.values());
    }

    #[test]
    fn estimate_interval_contains_mean(seed in any::<u64>(), n in 2u64..300, p in 0.0f64..1.0, prob in any::<bool>()) {
        let kind = if prob { EstimateKind::Probability } else { EstimateKind::MeanOfReal };
        let est = estimate_with(n, seed, kind, 0.999, |rng: &mut Stream| {
            let u = rng.uniform();
            Ok(if prob { f64::from(u < p) } else { u.ln() })
        })
        .unwrap();
        prop_assert!(est.ci_low <= est.mean && est.mean <= est.ci_high);
        if prob {
            prop_assert!(est.ci_low >= 0.0 && est.ci_high <= 1.0);
        }
        let (lo, hi) = wilson_interval(p, n as f64, 3.29);
        prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
    }

    #[test]
    fn config_round_trip(
        lp in rate(),
        lm in rate(),
        rp in 0.01f64..10.0,
        rm in 0.01f64..10.0,
        x0 in -100.0f64..100.0,
        z0 in regime(),
        seed in any::<u64>(),
        which in 0u8..3,
        a in 0.01f64..10.0,
        n in 2u64..100_000,
        json in any::<bool>(),
    ) {
        let command = match which {
            0 => Command::EscapeRate(EscapeParams { horizon: a, n_samples: n, method: MethodChoice::Em, dt: a / 100.0 }),
            1 => Command::Chernoff(ChernoffParams {
                direction: TailDirection::UpperTail,
                epsilon: a,
                ns: vec![1, n],
                lambda_cap: DEFAULT_LAMBDA_CAP,
                n_samples: n,
            }),
            _ => Command::VerifyTail(TailParams {
                c0: -a,
                epsilon: a,
                horizons: vec![a, 2.0 * a, 3.5 * a],
                n_samples: n,
                method: MethodChoice::Exact,
                dt: 0.01,
            }),
        };
        let spec = RunSpec {
            model: ModelSpec::at_bounds(lp, rp, lm, rm).with_start(x0, z0),
            command,
            output: OutputSpec { dir: format!("out/{seed}").into(), format: if json { Format::Json } else { Format::Csv } },
            seed,
        };
        prop_assert_eq!(parse_config(&serialize_config(&spec)).unwrap(), spec);
    }
}

#[test]
fn estimates_ignore_thread_count() {
    let m = validate(ModelSpec::at_bounds(1.0, 1.0, 2.0, 1.0)).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                switchdiff::montecarlo::estimate(
                    &switchdiff::montecarlo::StatisticSpec::Velocity { horizon: 20.0 },
                    &m,
                    SimMethod::EulerMaruyama { dt: 0.1 },
                    5_000,
                    77,
                )
                .unwrap()
            })
    };
    let one = run(1);
    for threads in [2, 4, 16] {
        let other = run(threads);
        assert_eq!(one.mean.to_bits(), other.mean.to_bits());
        assert_eq!(one.std_error.to_bits(), other.std_error.to_bits());
    }
}
