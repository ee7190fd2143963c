use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use twobinom::conditional::fisher_onesided;
use twobinom::distributions::{BetaParams, TailMode};
use twobinom::melded::{
    meld_cdf, meld_ci, meld_pvalue, meld_quantile, meld_sf, MeldingDistributions,
};
use twobinom::{Alternative, EffectMeasure, Hypothesis, TwoByTwoData};

fn draw(b: &BetaParams, rng: &mut StdRng) -> f64 {
    match b.point_mass() {
        Some(m) => m,
        None => b.quantile(rng.gen::<f64>()),
    }
}

fn monte_carlo_cdf(
    measure: EffectMeasure,
    w1: &BetaParams,
    w2: &BetaParams,
    c: f64,
    n: usize,
    seed: u64,
) -> f64 {
    let mut rng = StdRng::seed_from_u64(seed);
    let hits = (0..n)
        .filter(|_| {
            let (a, b) = (draw(w1, &mut rng), draw(w2, &mut rng));
            let v = measure.eval(a, b);
            !v.is_nan() && v <= c
        })
        .count();
    hits as f64 / n as f64
}

fn table() -> impl Strategy<Value = TwoByTwoData> {
    (1u32..25, 1u32..25)
        .prop_flat_map(|(n1, n2)| (0..=n1, Just(n1), 0..=n2, Just(n2)))
        .prop_map(|(x1, n1, x2, n2)| TwoByTwoData::new(x1, n1, x2, n2).unwrap())
}

fn measure() -> impl Strategy<Value = EffectMeasure> {
    prop::sample::select(EffectMeasure::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quadrature_matches_monte_carlo(d in table(), m in measure(), u in 0.05f64..0.95, seed in any::<u64>()) {
        let cd = MeldingDistributions::new(&d).unwrap();
        let (w1, w2) = cd.for_upper();
        let c = meld_quantile(m, &w1, &w2, u);
        prop_assume!(c.is_finite());
        let exact = meld_cdf(m, &w1, &w2, c);
        let mc = monte_carlo_cdf(m, &w1, &w2, c, 20_000, seed);
        prop_assert!((exact - mc).abs() < 0.015, "{d} {m}: quadrature {exact} vs simulation {mc}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cdf_and_sf_partition_continuous_cds(d in table(), m in measure(), lc in -3.0f64..3.0) {
        let cd = MeldingDistributions::new(&d).unwrap();
        let (w1, w2) = cd.for_upper();
        prop_assume!(w1.point_mass().is_none() && w2.point_mass().is_none());
        let c = if m == EffectMeasure::Difference { lc / 3.0 } else { lc.exp() };
        prop_assert!((meld_cdf(m, &w1, &w2, c) + meld_sf(m, &w1, &w2, c) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn intervals_are_nested_and_contain_the_estimate(d in table(), m in measure()) {
        let mut prev: Option<twobinom::ConfidenceInterval> = None;
        for level in [0.8, 0.9, 0.95, 0.99] {
            let ci = meld_ci(&d, m, level).unwrap();
            prop_assert!(ci.lower <= ci.upper);
            let est = d.estimate(m);
            if !est.is_nan() {
                prop_assert!(ci.lower <= est + 1e-9 && est <= ci.upper + 1e-9 * est.abs().max(1.0), "{d} {m} {ci:?}");
            }
            if let Some(p) = prev {
                prop_assert!(p.within(&ci), "{d} {m}: {p:?} not inside {ci:?}");
            }
            prev = Some(ci);
        }
    }

    #[test]
    fn limits_match_one_sided_pvalues(d in table(), m in measure()) {
        let ci = meld_ci(&d, m, 0.9).unwrap();
        let (lo, hi) = m.range();
        if ci.lower > lo && ci.lower.is_finite() {
            let h = Hypothesis::new(m, ci.lower, Alternative::Greater).unwrap();
            prop_assert!((meld_pvalue(&d, &h).unwrap() - 0.05).abs() < 1e-6, "{d} {m} lower {}", ci.lower);
        }
        if ci.upper < hi && ci.upper.is_finite() {
            let h = Hypothesis::new(m, ci.upper, Alternative::Less).unwrap();
            prop_assert!((meld_pvalue(&d, &h).unwrap() - 0.05).abs() < 1e-6, "{d} {m} upper {}", ci.upper);
        }
    }

    #[test]
    fn equality_null_gives_one_sided_fisher(d in table(), m in measure(), greater in any::<bool>()) {
        let alt = if greater { Alternative::Greater } else { Alternative::Less };
        let p = meld_pvalue(&d, &Hypothesis::equality(m, alt)).unwrap();
        let f = fisher_onesided(&d, &Hypothesis::equality(EffectMeasure::OddsRatio, alt), TailMode::Full).unwrap();
        prop_assert!((p - f).abs() < 1e-8, "{d} {m} {alt:?}: {p} vs {f}");
    }

    #[test]
    fn label_swap_mirrors_the_difference_interval(d in table()) {
        let a = meld_ci(&d, EffectMeasure::Difference, 0.95).unwrap();
        let b = meld_ci(&d.label_swapped(), EffectMeasure::Difference, 0.95).unwrap();
        prop_assert!((a.lower + b.upper).abs() < 1e-6 && (a.upper + b.lower).abs() < 1e-6, "{a:?} {b:?}");
    }
}

#[test]
fn zero_successes_give_unbounded_ratio_limits() {
    let d = TwoByTwoData::new(0, 10, 3, 10).unwrap();
    let ci = meld_ci(&d, EffectMeasure::Ratio, 0.95).unwrap();
    assert_eq!(ci.upper, f64::INFINITY);
    assert!(ci.lower > 0.0);
    let d = TwoByTwoData::new(0, 10, 0, 10).unwrap();
    let ci = meld_ci(&d, EffectMeasure::OddsRatio, 0.95).unwrap();
    assert_eq!((ci.lower, ci.upper), (0.0, f64::INFINITY));
}
