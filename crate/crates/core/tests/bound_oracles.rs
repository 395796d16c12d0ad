mod common;

use ald_core::bounds::{
    bcomp_bound, condition_report, delta1_bound, error_budget, init_kl_bound, kd_constant, ratio_p_moment,
    weight_kl, BoundInputs, ConditionInputs, Verdict, DEFAULT_GRID_POINTS,
};
use ald_core::{build_truncated_mixture, CoordinateRule, DiagGMM, MixturePerturbation, SpectrumSpec};
use common::{rel_err, two_mode_target};

// Frozen from tests/oracles/oracles.py (50-digit mpmath).
const KD_65_MINUS_KD_5: f64 = 1.740_585_326_752_699_660_1;
const KD_65: f64 = 15.503_738_947_908_735_646;
const KD_20: f64 = 15.264_984_574_696_442_356;
const WEIGHT_KL: f64 = 1.190_943_804_041_182_488;
const GAUSSIAN_KL_QUADRATURE: f64 = 0.096_573_590_279_972_654_709;
const RATIO_MOMENT_P2: f64 = 1.081_523_994_812_447_819_5;
const RATIO_MOMENT_PM2: f64 = 1.687_235_271_127_105_855_8;
const DELTA1_SEPARATED: f64 = 112.232_333_859_911_812_9;

fn green(d: usize) -> BoundInputs {
    let target = two_mode_target(1.25, d);
    let lambda = SpectrumSpec::power_law(40.0, 2.7).eigenvalues(d).unwrap();
    let gamma = SpectrumSpec::power_law(1.0, 1.5).eigenvalues(d).unwrap();
    BoundInputs::unperturbed(&target, lambda, gamma, 1.0).unwrap()
}

fn equal_cov_target(d: usize) -> DiagGMM {
    let sigma = SpectrumSpec::power_law(1.0, 2.0);
    build_truncated_mixture(
        &[0.75, 0.25],
        &[CoordinateRule::Zero, CoordinateRule::sparse(vec![(1, 10.0)])],
        &[sigma.clone(), sigma],
        &[1.0, 1.0],
        d,
    )
    .unwrap()
}

#[test]
fn kd_partial_sums_match_high_precision() {
    let diff = kd_constant(&green(65)) - kd_constant(&green(5));
    assert!((diff - KD_65_MINUS_KD_5).abs() <= 1e-12, "{diff}");
    assert!(rel_err(kd_constant(&green(65)), KD_65) <= 1e-13);
    let plateau = kd_constant(&green(65)) / kd_constant(&green(20));
    assert!((plateau - KD_65 / KD_20).abs() < 1e-12 && plateau <= 1.05, "{plateau}");
}

#[test]
fn kd_is_nondecreasing_in_dimension() {
    let values: Vec<f64> = (1..=40).map(|d| kd_constant(&green(d))).collect();
    assert!(values.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn weight_kl_matches_high_precision() {
    let v = weight_kl(&[0.75, 0.25], &[0.1, 0.9]).unwrap();
    assert!(rel_err(v, WEIGHT_KL) <= 1e-14, "{v}");
}

#[test]
fn weight_only_init_bound_is_the_weight_kl() {
    let target = equal_cov_target(5);
    let init = MixturePerturbation::weights_only(vec![-0.65, 0.65]).apply(&target).unwrap();
    let lambda = SpectrumSpec::power_law(40.0, 4.0).eigenvalues(5).unwrap();
    let gamma = SpectrumSpec::power_law(1.0, 3.5).eigenvalues(5).unwrap();
    let b = BoundInputs::from_mixtures(&target, &init, lambda, gamma, 1.0).unwrap();
    assert!(rel_err(init_kl_bound(&b).unwrap(), WEIGHT_KL) <= 1e-12);
}

#[test]
fn gaussian_kl_matches_quadrature() {
    let b = BoundInputs {
        weights: vec![1.0],
        perturbed_weights: vec![1.0],
        means: vec![vec![0.0]],
        perturbed_means: vec![vec![0.0]],
        sigma: vec![vec![1.0]],
        perturbed_sigma: vec![vec![2.0]],
        lambda: vec![1e-300],
        gamma: vec![1.0],
        kappa: 1.0,
    };
    let v = init_kl_bound(&b).unwrap();
    assert!(rel_err(v, GAUSSIAN_KL_QUADRATURE) <= 1e-12, "{v}");
}

#[test]
fn ratio_moments_match_quadrature() {
    assert!(rel_err(ratio_p_moment(2.0, 1.0, 1.2, 0.3), RATIO_MOMENT_P2) <= 1e-14);
    assert!(rel_err(ratio_p_moment(-2.0, 1.0, 1.2, 0.3), RATIO_MOMENT_PM2) <= 1e-14);
}

#[test]
fn delta1_matches_independent_summation() {
    let target = equal_cov_target(2);
    let perturbed = target.with_weights(vec![0.1, 0.9]).unwrap();
    let lambda = SpectrumSpec::power_law(40.0, 4.0).eigenvalues(2).unwrap();
    let gamma = SpectrumSpec::power_law(1.0, 3.5).eigenvalues(2).unwrap();
    let b = BoundInputs::from_mixtures(&target, &perturbed, lambda, gamma, 0.5).unwrap();
    let v = delta1_bound(&b);
    assert!(rel_err(v, DELTA1_SEPARATED) <= 1e-13, "{v}");
}

fn fig3_inputs(d: usize, ds_scale: f64, gamma_exp: f64) -> BoundInputs {
    let target = equal_cov_target(d);
    let pert = MixturePerturbation::variance_only(2, CoordinateRule::spectrum(SpectrumSpec::power_law(ds_scale, 3.5)));
    let perturbed = pert.apply(&target).unwrap();
    let lambda = SpectrumSpec::power_law(40.0, 4.0).eigenvalues(d).unwrap();
    let gamma = SpectrumSpec::power_law(1.0, gamma_exp).eigenvalues(d).unwrap();
    BoundInputs::from_mixtures(&target, &perturbed, lambda, gamma, 1.0).unwrap()
}

#[test]
fn perturbation_bounds_grow_with_dimension() {
    let mut prev = [0.0; 3];
    for d in 1..=30 {
        let b = fig3_inputs(d, 0.1, 1.0);
        let at0 = b.with_kappa(0.0).unwrap();
        let now = [init_kl_bound(&b).unwrap(), bcomp_bound(&at0), delta1_bound(&at0)];
        for (n, p) in now.iter().zip(&prev) {
            assert!(n >= p);
        }
        prev = now;
    }
}

#[test]
fn admissible_budget_plateaus_and_flat_budget_grows() {
    let budget = |d, g| {
        let b = fig3_inputs(d, 0.1, g);
        error_budget(&b, &b, 180.0, DEFAULT_GRID_POINTS).unwrap().total_envelope()
    };
    // The admissible envelope converges like the tail of sum j^-1.5, slowly.
    let (a75, a1000) = (budget(75, 3.5), budget(1000, 3.5));
    let (n75, n1000) = (budget(75, 1.0), budget(1000, 1.0));
    assert!(a1000 <= 1.5 * a75, "admissible {a75} -> {a1000}");
    assert!(n1000 >= 10.0 * n75, "non-admissible {n75} -> {n1000}");
}

#[test]
fn unit_scale_variance_error_leaves_the_band() {
    // dsigma_i1 = sigma_i1 puts kappa_i1 = 2 at the end of the path.
    let b = fig3_inputs(3, 1.0, 3.5);
    let budget = error_budget(&b, &b, 180.0, 64).unwrap();
    assert!(budget.score_resp_envelope.is_infinite());
    assert!(budget.score_comp.is_finite());
}

#[test]
fn condition_verdicts_for_experiment_spectra() {
    let fig2 = |a_s, a_p, s_s| ConditionInputs {
        alpha_smooth: a_s,
        scale_smooth: s_s,
        alpha_pre: a_p,
        means: vec![vec![], vec![(1, 10.0)]],
        ..ConditionInputs::unperturbed(vec![0.75, 0.25], vec![1.2, 2.0], 1.25)
    };
    let probes = [10, 100, 1000, 10_000];
    let green = condition_report(&fig2(2.7, 1.5, 40.0), &probes);
    let red = condition_report(&fig2(0.0, 0.0, 40.0), &probes);
    let s = green.get("suff_condition").unwrap();
    assert_eq!((s.verdict, s.empirical), (Verdict::Converges, Verdict::Converges));
    assert!((s.exponent_margin.unwrap() - 1.65).abs() < 1e-12);
    let s = red.get("suff_condition").unwrap();
    assert_eq!((s.verdict, s.empirical), (Verdict::Diverges, Verdict::Diverges));
    // Red partial sums grow like d^2.25.
    let growth = s.partial_sums[3].1 / s.partial_sums[2].1;
    assert!((growth / 10f64.powf(2.25) - 1.0).abs() < 0.01, "{growth}");

    let fig3 = |a_p| ConditionInputs {
        alpha_smooth: 4.0,
        scale_smooth: 40.0,
        alpha_pre: a_p,
        alpha_dsigma: 3.5,
        scale_dsigma: 0.1,
        means: vec![vec![], vec![(1, 10.0)]],
        ..ConditionInputs::unperturbed(vec![0.75, 0.25], vec![1.0, 1.0], 2.0)
    };
    let admissible = condition_report(&fig3(3.5), &probes);
    let flat = condition_report(&fig3(1.0), &probes);
    for name in ["m0_first", "m0_second"] {
        let (a, f) = (admissible.get(name).unwrap(), flat.get(name).unwrap());
        assert_eq!((a.verdict, a.empirical), (Verdict::Converges, Verdict::Converges), "{name}");
        assert_eq!((f.verdict, f.empirical), (Verdict::Diverges, Verdict::Diverges), "{name}");
    }
    for report in [&green, &red, &admissible, &flat] {
        for r in &report.records {
            assert!(r.agrees(), "{}: {:?}", r.name, r);
        }
    }
}
