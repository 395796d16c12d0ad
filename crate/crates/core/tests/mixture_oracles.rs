mod common;

use ald_core::mixture::{log_sum_exp, softmax_in_place};
use ald_core::{smooth, DiagGMM, DiagGaussian, SpectrumSpec};
use common::{rel_err, two_mode_target};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// Frozen from tests/oracles/oracles.py (50-digit mpmath).
const FIG2_LOG_DENSITY_D4: f64 = -3.072_017_524_166_198_942_8;
const FIG2_SCORE_D3: [f64; 3] = [-0.833_333_331_052_638_186_14, -0.991_005_928_999_420_541_25, 0.658_037_006_363_687_594_86];
const FIG1_RESP_D2: [f64; 2] = [4.012_052_355_178_599_771_5e-18, 0.999_999_999_999_999_995_99];

fn central_difference(g: &DiagGMM, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[j] += h;
            down[j] -= h;
            (g.log_density(&up).unwrap() - g.log_density(&down).unwrap()) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| <= tol * max(|b|, scale)` so near-zero entries use an absolute floor.
fn close(a: &[f64], b: &[f64], tol: f64, scale: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * y.abs().max(scale))
}

#[test]
fn fig2_log_density_matches_high_precision() {
    let g = two_mode_target(1.25, 4);
    let v = g.log_density(&[1.0, 0.5, -0.2, 0.0]).unwrap();
    assert!(rel_err(v, FIG2_LOG_DENSITY_D4) <= 1e-12, "{v}");
}

#[test]
fn fig2_score_matches_high_precision_and_finite_differences() {
    let g = two_mode_target(1.25, 3);
    let x = [1.0, 0.5, -0.2];
    let s = g.score(&x).unwrap();
    assert!(close(&s, &FIG2_SCORE_D3, 1e-12, 1.0), "{s:?}");
    let fd = central_difference(&g, &x, 1e-5);
    assert!(close(&s, &fd, 1e-6, 1.0), "{s:?} vs {fd:?}");
}

#[test]
fn fig1_responsibilities_at_second_mode() {
    let g = two_mode_target(2.0, 2);
    let r = g.responsibilities(&[10.0, 0.0]).unwrap();
    assert!(rel_err(r[0], FIG1_RESP_D2[0]) < 1e-10, "{r:?}");
    assert!((r[1] - FIG1_RESP_D2[1]).abs() < 1e-15);
}

fn arb_mixture() -> impl Strategy<Value = (DiagGMM, Vec<f64>)> {
    (1usize..=4, 1usize..=6).prop_flat_map(|(k, d)| {
        (
            prop::collection::vec(0.05f64..1.0, k),
            prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), k),
            prop::collection::vec(prop::collection::vec(0.2f64..3.0, d), k),
            prop::collection::vec(-2.0f64..2.0, d),
        )
            .prop_map(|(w, means, vars, x)| {
                let total: f64 = w.iter().sum();
                let w = w.iter().map(|v| v / total).collect();
                let comps = means.into_iter().zip(vars).map(|(m, v)| DiagGaussian::new(m, v).unwrap()).collect();
                (DiagGMM::new(w, comps).unwrap(), x)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn score_is_gradient_of_log_density((g, x) in arb_mixture()) {
        let s = g.score(&x).unwrap();
        let fd = central_difference(&g, &x, 1e-5);
        prop_assert!(close(&s, &fd, 1e-6, 1.0), "{:?} vs {:?}", s, fd);
    }

    #[test]
    fn responsibilities_form_a_simplex((g, x) in arb_mixture()) {
        let r = g.responsibilities(&x).unwrap();
        prop_assert!((r.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(r.iter().all(|p| *p > 0.0 && *p <= 1.0));
    }

    #[test]
    fn softmax_is_shift_invariant(logs in prop::collection::vec(-50.0f64..50.0, 1..6), shift in -500.0f64..500.0) {
        let mut a = logs.clone();
        let mut b: Vec<f64> = logs.iter().map(|v| v + shift).collect();
        softmax_in_place(&mut a);
        softmax_in_place(&mut b);
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() <= 1e-12);
        }
        let lse = log_sum_exp(&logs);
        let shifted: Vec<f64> = logs.iter().map(|v| v + shift).collect();
        prop_assert!((log_sum_exp(&shifted) - lse - shift).abs() <= 1e-9 * (1.0 + shift.abs()));
    }

    #[test]
    fn smoothing_composes_additively(a in 0.0f64..50.0, b in 0.0f64..50.0) {
        let g = two_mode_target(1.25, 5);
        let c = SpectrumSpec::power_law(1.0, 2.7);
        let twice = smooth(&smooth(&g, &c, a).unwrap(), &c, b).unwrap();
        let once = smooth(&g, &c, a + b).unwrap();
        for (p, q) in twice.components().iter().zip(once.components()) {
            for (u, v) in p.var().iter().zip(q.var()) {
                prop_assert!((u - v).abs() <= 4.0 * f64::EPSILON * v);
            }
        }
    }
}

#[test]
fn truncations_extend_each_other() {
    let small = two_mode_target(1.25, 5);
    for d in [6, 17, 65] {
        let big = two_mode_target(1.25, d);
        assert_eq!(big.marginal(5).unwrap(), small);
    }
}

#[test]
fn ks_statistic_against_analytic_cdf() {
    // 1-D mixture 0.3 N(-2, 0.5) + 0.7 N(1.5, 2)
    let g = DiagGMM::new(
        vec![0.3, 0.7],
        vec![DiagGaussian::new(vec![-2.0], vec![0.5]).unwrap(), DiagGaussian::new(vec![1.5], vec![2.0]).unwrap()],
    )
    .unwrap();
    let n = 100_000;
    let mut xs = g.sample(n, &mut ChaCha8Rng::seed_from_u64(11)).column(0).to_vec();
    xs.sort_by(f64::total_cmp);
    let cdf = |x: f64| 0.3 * normal_cdf((x + 2.0) / 0.5f64.sqrt()) + 0.7 * normal_cdf((x - 1.5) / 2f64.sqrt());
    let mut stat: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let f = cdf(*x);
        stat = stat.max((f - i as f64 / n as f64).abs()).max(((i + 1) as f64 / n as f64 - f).abs());
    }
    // 1% critical value of the one-sample KS statistic, asymptotic form.
    let critical = 1.628 / (n as f64).sqrt();
    assert!(stat < critical, "KS {stat} vs {critical}");
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Complementary error function, Numerical Recipes `erfcc` (|rel err| < 1.2e-7).
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = -z * z - 1.265_512_23
        + t * (1.000_023_68
            + t * (0.374_091_96
                + t * (0.096_784_18
                    + t * (-0.186_288_06
                        + t * (0.278_868_07
                            + t * (-1.135_203_98 + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77))))))));
    let r = t * poly.exp();
    if x >= 0.0 { r } else { 2.0 - r }
}

#[test]
fn standard_normal_moments() {
    let g = DiagGMM::gaussian(vec![0.0], vec![1.0]).unwrap();
    let n = 100_000;
    let x = g.sample(n, &mut ChaCha8Rng::seed_from_u64(5));
    let mean = x.sum() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "{mean}");
    assert!((var - 1.0).abs() < 0.05, "{var}");
}

#[test]
fn component_frequencies_follow_weights() {
    let g = two_mode_target(1.25, 2);
    let n = 100_000;
    let (_, labels) = g.sample_with_labels(n, &mut ChaCha8Rng::seed_from_u64(9));
    let freq = labels.iter().filter(|l| **l == 0).count() as f64 / n as f64;
    assert!((freq - 0.75).abs() < 0.01, "{freq}");
}
