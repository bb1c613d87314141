mod common;

use switchdiff::model::{Drift, DriftFunction};
use switchdiff::montecarlo::{estimate, estimate_with, EstimateKind, StatisticSpec, Verdict};
use switchdiff::path::{simulate_em_coupled, simulate_exact_constant, BrownianPath, SimMethod};
use switchdiff::skeleton::{sample_holding_time, sample_skeleton, sample_skeleton_covering, Skeleton};
use switchdiff::{validate, ModelSpec, RandomSource, Regime, Stream};

#[test]
fn holding_times_pass_kolmogorov_smirnov() {
    let n = 100_000;
    for (rate, seed) in [(1.0, 1u64), (0.3, 2), (7.5, 3)] {
        let mut rng = Stream::new(seed);
        let mut xs: Vec<f64> = (0..n).map(|_| sample_holding_time(rate, rng.uniform()).unwrap()).collect();
        xs.sort_by(f64::total_cmp);
        let nf = n as f64;
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let cdf = 1.0 - (-rate * x).exp();
                (cdf - i as f64 / nf).abs().max(((i + 1) as f64 / nf - cdf).abs())
            })
            .fold(0.0, f64::max);
        let critical = 1.9495 / nf.sqrt();
        assert!(d < critical, "rate {rate}: D = {d} >= {critical}");
    }
}

#[test]
fn cycle_length_moments() {
    let (lp, lm) = (1.5, 0.5);
    let m = validate(ModelSpec::at_bounds(lp, 1.0, lm, 1.0)).unwrap();
    let mut rng = Stream::new(11);
    let cycles: Vec<f64> = (0..100_000)
        .map(|_| sample_skeleton(&m, 1, &mut rng).unwrap().end())
        .collect();
    let (mean, var) = common::mean_var(&cycles);
    let true_mean = 1.0 / lp + 1.0 / lm;
    let true_var = 1.0 / (lp * lp) + 1.0 / (lm * lm);
    let se = (var / cycles.len() as f64).sqrt();
    assert!((mean - true_mean).abs() <= 4.0 * se, "{mean} vs {true_mean}");
    assert!((var / true_var - 1.0).abs() <= 0.10, "{var} vs {true_var}");
}

#[test]
fn cycle_ratio_estimate_at_n_100() {
    let m = validate(ModelSpec::at_bounds(1.0, 1.0, 1.0, 1.0)).unwrap();
    let e = estimate(&StatisticSpec::CycleRatio { n_cycles: 100 }, &m, SimMethod::Exact, 10_000, 5).unwrap();
    assert!(e.z_against(2.0).abs() <= 4.0, "{e:?}");
}

#[test]
fn exact_gaussian_transitions() {
    let b = 0.7;
    let tau = 2.5;
    let m = validate(ModelSpec::at_bounds(1.0, b, 1.0, 1.0).with_start(3.0, Regime::Plus)).unwrap();
    let sk = Skeleton::new(0.0, vec![100.0, 200.0], Regime::Plus).unwrap();
    let n = 100_000;
    let xs: Vec<f64> = (0..n)
        .map(|i| {
            let tr = simulate_exact_constant(&m, &sk, tau, &mut Stream::derive(21, i)).unwrap();
            tr.terminal() - 3.0
        })
        .collect();
    let (mean, var) = common::mean_var(&xs);
    let se = (var / n as f64).sqrt();
    assert!((mean - b * tau).abs() <= 4.0 * se, "{mean} vs {}", b * tau);
    assert!((var / tau - 1.0).abs() <= 0.05, "{var} vs {tau}");
}

fn sinusoid_model() -> switchdiff::ValidatedModel {
    validate(ModelSpec {
        drift_plus: Drift::Bounded {
            func: DriftFunction::Sinusoid {
                offset: 1.5,
                amplitude: 0.5,
                frequency: 3.0,
            },
            lower: 1.0,
        },
        drift_minus: Drift::Bounded {
            func: DriftFunction::Sinusoid {
                offset: -0.2,
                amplitude: 0.3,
                frequency: 2.0,
            },
            lower: -0.5,
        },
        sup_b_plus: 2.0,
        ..ModelSpec::at_bounds(1.0, 1.0, 2.0, 0.5)
    })
    .unwrap()
}

#[test]
fn em_strong_order_with_coupled_noise() {
    // Exact transitions are unavailable for state-dependent drift, so the
    // reference is the same Brownian path integrated on the finest grid.
    let m = sinusoid_model();
    let (horizon, fine) = (2.0, 1e-3);
    let (coarse, half) = (40u64, 20u64);
    let paths = 400;
    let (mut err_coarse, mut err_half) = (0.0, 0.0);
    for i in 0..paths {
        let mut rng = Stream::derive(31, i);
        let sk = sample_skeleton_covering(&m, horizon, &mut rng).unwrap();
        let bm = BrownianPath::sample(&sk, fine, horizon, &mut rng).unwrap();
        let reference = simulate_em_coupled(&m, &sk, &bm, 1).unwrap().terminal();
        err_coarse += (simulate_em_coupled(&m, &sk, &bm, coarse).unwrap().terminal() - reference).abs();
        err_half += (simulate_em_coupled(&m, &sk, &bm, half).unwrap().terminal() - reference).abs();
    }
    let ratio = err_coarse / err_half;
    assert!((1.2..=2.8).contains(&ratio), "strong error ratio {ratio}");
}

#[test]
fn confidence_intervals_cover_gaussian_mean() {
    let runs = 1_000;
    let covered = (0..runs)
        .filter(|&r| {
            let e = estimate_with(200, r, EstimateKind::MeanOfReal, 0.999, |rng: &mut Stream| {
                Ok(1.5 + 2.0 * rng.standard_normal())
            })
            .unwrap();
            e.ci_low <= 1.5 && 1.5 <= e.ci_high
        })
        .count();
    assert!(covered as f64 / runs as f64 >= 0.995, "coverage {covered}/{runs}");
}

#[test]
fn skeleton_exponential_matches_exact_closed_form() {
    // E e^{-l (X_T2n - x)} for drifts at their bounds, Ito term included.
    let (lp, lm, rp, rm, l, n) = (1.0, 1.0, 1.0, 0.2, 0.05, 20u64);
    let m = validate(ModelSpec::at_bounds(lp, rp, lm, rm)).unwrap();
    let per_cycle = lp / (lp + l * rp - l * l / 2.0) * lm / (lm - l * rm - l * l / 2.0);
    let exact = per_cycle.powi(n as i32);
    let e = estimate(
        &StatisticSpec::Lemma2Exponential {
            lambda: l,
            a_hat: 0.0,
            n_cycles: n as usize,
        },
        &m,
        SimMethod::Exact,
        100_000,
        41,
    )
    .unwrap();
    assert!(e.z_against(exact).abs() <= 4.0, "{} vs {exact}", e.mean);
}

#[test]
fn spatial_tail_is_inconclusive_when_typical() {
    let m = validate(ModelSpec::at_bounds(1.0, 1.0, 2.0, 1.0)).unwrap();
    let t = switchdiff::montecarlo::verify_spatial_tail(
        &m,
        2.0,
        0.1,
        &[20.0, 40.0, 80.0],
        SimMethod::Exact,
        2_000,
        51,
    )
    .unwrap();
    assert_eq!(t.verdict, Verdict::Inconclusive);
}

#[test]
fn symmetric_model_velocity_straddles_zero() {
    let m = validate(ModelSpec::at_bounds(1.5, 1.0, 1.5, 1.0)).unwrap();
    let r = switchdiff::montecarlo::verify_velocity(&m, 1_000.0, SimMethod::Exact, 1_000, 61).unwrap();
    assert_eq!(r.analytic, Some(0.0));
    assert!(r.estimate.ci_low < 0.0 && r.estimate.ci_high > 0.0);
    assert_eq!(r.verdict, Verdict::Consistent);
}
