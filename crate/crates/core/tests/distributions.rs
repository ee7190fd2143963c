use approx::assert_relative_eq;
use proptest::prelude::*;

use twobinom::distributions::{
    beta_cdf, beta_quantile, binom_pmf, clopper_pearson, nchg_pmf, nchg_tail, BetaParams,
    BinomialParams, BinomialTable, NoncentralHypergeom, NoncentralHypergeomParams, Tail, TailMode,
};

fn choose(n: u32, k: u32) -> f64 {
    (1..=k).map(|i| (n - k + i) as f64 / i as f64).product()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn binomial_matches_closed_form(n in 1u32..40, theta in 0.0f64..=1.0, k in 0u32..40) {
        let k = k % (n + 1);
        let p = binom_pmf(k, BinomialParams::new(n, theta).unwrap()).unwrap();
        let want = choose(n, k) * theta.powi(k as i32) * (1.0 - theta).powi((n - k) as i32);
        prop_assert!((p - want).abs() <= 1e-12 * want.max(1e-300) + 1e-300, "{p} vs {want}");
    }

    #[test]
    fn binomial_table_is_a_distribution(n in 1u32..200, theta in 0.0f64..=1.0) {
        let v = BinomialTable::new(n).pmf(theta);
        prop_assert_eq!(v.len(), n as usize + 1);
        prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (k, &p) in v.iter().enumerate().step_by(7) {
            let single = binom_pmf(k as u32, BinomialParams::new(n, theta).unwrap()).unwrap();
            prop_assert!((p - single).abs() <= 1e-12 * single + 1e-300);
        }
    }

    #[test]
    fn noncentral_hypergeometric_is_a_distribution(
        n1 in 1u32..30, n2 in 1u32..30, s in 0u32..60, lpsi in -8.0f64..8.0,
    ) {
        let s = s % (n1 + n2 + 1);
        let d = NoncentralHypergeom::new(NoncentralHypergeomParams::new(s, n1, n2, lpsi.exp()).unwrap()).unwrap();
        let (lo, hi) = d.support();
        prop_assert_eq!(lo, s.saturating_sub(n1));
        prop_assert_eq!(hi, s.min(n2));
        prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for x in lo..=hi {
            let up = d.tail(x, Tail::Upper, TailMode::Full);
            let down = d.tail(x, Tail::Lower, TailMode::Full);
            prop_assert!((up + down - 1.0 - d.pmf(x)).abs() < 1e-12);
            let mid = d.tail(x, Tail::Upper, TailMode::Mid);
            prop_assert!((up - mid - 0.5 * d.pmf(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_odds_ratio_is_the_central_hypergeometric(n1 in 1u32..25, n2 in 1u32..25, s in 0u32..50) {
        let s = s % (n1 + n2 + 1);
        let p = NoncentralHypergeomParams::new(s, n1, n2, 1.0).unwrap();
        let (lo, hi) = p.support();
        for x2 in lo..=hi {
            let want = choose(n1, s - x2) * choose(n2, x2) / choose(n1 + n2, s);
            prop_assert!((nchg_pmf(x2, p).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn upper_tail_grows_with_the_odds_ratio(
        n1 in 1u32..20, n2 in 1u32..20, s in 0u32..40, a in -5.0f64..5.0, b in -5.0f64..5.0,
    ) {
        let s = s % (n1 + n2 + 1);
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        let pa = NoncentralHypergeomParams::new(s, n1, n2, a.exp()).unwrap();
        let pb = NoncentralHypergeomParams::new(s, n1, n2, b.exp()).unwrap();
        let (lo, hi) = pa.support();
        for x in lo..=hi {
            let ta = nchg_tail(x, pa, Tail::Upper, TailMode::Full).unwrap();
            let tb = nchg_tail(x, pb, Tail::Upper, TailMode::Full).unwrap();
            prop_assert!(tb >= ta - 1e-12);
        }
    }

    #[test]
    fn beta_quantile_inverts_cdf(a in 0.05f64..50.0, b in 0.05f64..50.0, p in 0.001f64..0.999) {
        let params = BetaParams::new(a, b).unwrap();
        let q = beta_quantile(p, params).unwrap();
        prop_assert!((0.0..=1.0).contains(&q));
        let c = beta_cdf(q, params).unwrap();
        prop_assert!((c - p).abs() < 1e-8, "a={a} b={b} p={p} q={q} cdf={c}");
    }

    #[test]
    fn clopper_pearson_solves_its_tail_equations(n in 1u32..60, x in 0u32..60, level in 0.5f64..0.999) {
        let x = x % (n + 1);
        let (lo, hi) = clopper_pearson(x, n, level).unwrap();
        let half = (1.0 - level) / 2.0;
        prop_assert!(lo <= x as f64 / n as f64 && x as f64 / n as f64 <= hi);
        let upper_tail = |t: f64| (x..=n).map(|k| binom_pmf(k, BinomialParams::new(n, t).unwrap()).unwrap()).sum::<f64>();
        let lower_tail = |t: f64| (0..=x).map(|k| binom_pmf(k, BinomialParams::new(n, t).unwrap()).unwrap()).sum::<f64>();
        if x == 0 {
            prop_assert_eq!(lo, 0.0);
        } else {
            prop_assert!((upper_tail(lo) - half).abs() < 1e-7);
        }
        if x == n {
            prop_assert_eq!(hi, 1.0);
        } else {
            prop_assert!((lower_tail(hi) - half).abs() < 1e-7);
        }
    }
}

#[test]
fn beta_limits_are_point_masses() {
    let at_zero = BetaParams::new(0.0, 4.0).unwrap();
    assert_eq!(at_zero.point_mass(), Some(0.0));
    assert_eq!(at_zero.cdf(0.0), 1.0);
    let at_one = BetaParams::new(3.0, 0.0).unwrap();
    assert_eq!(at_one.point_mass(), Some(1.0));
    assert_eq!(at_one.cdf(0.999), 0.0);
    assert!(BetaParams::new(0.0, 0.0).is_err());
}

#[test]
fn worked_conditional_lower_tail() {
    let p = NoncentralHypergeomParams::new(9, 14, 7, 1.0).unwrap();
    let t = nchg_tail(1, p, Tail::Lower, TailMode::Full).unwrap();
    assert_relative_eq!(t, 0.0783, epsilon = 5e-5);
}

#[test]
fn invalid_inputs_are_domain_errors() {
    assert!(BinomialParams::new(5, 1.5).is_err());
    assert!(binom_pmf(6, BinomialParams { n: 5, theta: 0.5 }).is_err());
    assert!(NoncentralHypergeomParams::new(20, 5, 5, 1.0).is_err());
    assert!(NoncentralHypergeomParams::new(3, 5, 5, -1.0).is_err());
    assert!(clopper_pearson(6, 5, 0.95).is_err());
    assert!(clopper_pearson(2, 5, 1.0).is_err());
}
