//! Melded confidence intervals and matching one-sided p-values from beta
//! confidence-distribution random variables.
//!
//! For group `a` the lower CD variable is `W_La ~ Beta(x_a, n_a - x_a + 1)`
//! and the upper is `W_Ua ~ Beta(x_a + 1, n_a - x_a)`, with `Beta(0, .)` a
//! point mass at 0 and `Beta(., 0)` a point mass at 1. Distribution functions
//! of `b(W1, W2)` are computed by adaptive quadrature over `W1`.

use serde::{Deserialize, Serialize};

use crate::distributions::BetaParams;
use crate::error::{Error, Result};
use crate::numeric::{bisect_predicate, integrate};
use crate::table::{Alternative, ConfidenceInterval, EffectMeasure, Hypothesis, TwoByTwoData};

/// Absolute tolerance of the quadrature.
pub const INTEGRATION_TOLERANCE: f64 = 1e-10;
/// Width of the final bracket when solving for a quantile (log scale for
/// ratio measures).
pub const QUANTILE_TOLERANCE: f64 = 1e-8;

/// Lower and upper CD variables of both groups, indexed `[group 1, group 2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeldingDistributions {
    pub lower_cd: [BetaParams; 2],
    pub upper_cd: [BetaParams; 2],
}

impl MeldingDistributions {
    pub fn new(data: &TwoByTwoData) -> Result<Self> {
        TwoByTwoData::new(data.x1, data.n1, data.x2, data.n2)?;
        let lower = |x: u32, n: u32| BetaParams::new(x as f64, (n - x + 1) as f64);
        let upper = |x: u32, n: u32| BetaParams::new((x + 1) as f64, (n - x) as f64);
        Ok(Self {
            lower_cd: [lower(data.x1, data.n1)?, lower(data.x2, data.n2)?],
            upper_cd: [upper(data.x1, data.n1)?, upper(data.x2, data.n2)?],
        })
    }

    /// `(W_U1, W_L2)`, whose functional gives the lower limit.
    pub fn for_lower(&self) -> (BetaParams, BetaParams) {
        (self.upper_cd[0], self.lower_cd[1])
    }

    /// `(W_L1, W_U2)`, whose functional gives the upper limit.
    pub fn for_upper(&self) -> (BetaParams, BetaParams) {
        (self.lower_cd[0], self.upper_cd[1])
    }
}

/// Largest `w2` with `b(w1, w2) <= c`.
fn g(measure: EffectMeasure, w1: f64, c: f64) -> f64 {
    match measure {
        EffectMeasure::Difference => w1 + c,
        EffectMeasure::Ratio => c * w1,
        EffectMeasure::OddsRatio => {
            let d = 1.0 - w1 + c * w1;
            if d <= 0.0 {
                1.0
            } else {
                c * w1 / d
            }
        }
    }
}

/// Smallest `w1` with `b(w1, w2) <= c`.
fn h(measure: EffectMeasure, w2: f64, c: f64) -> f64 {
    match measure {
        EffectMeasure::Difference => w2 - c,
        EffectMeasure::Ratio => w2 / c,
        EffectMeasure::OddsRatio => {
            let d = w2 + c * (1.0 - w2);
            if d <= 0.0 {
                0.0
            } else {
                w2 / d
            }
        }
    }
}

/// Points in `(0, 1)` where `w1 -> F2(g(w1, c))` has a kink.
fn kinks(measure: EffectMeasure, c: f64) -> Vec<f64> {
    let k = match measure {
        EffectMeasure::Difference => vec![-c, 1.0 - c],
        EffectMeasure::Ratio => vec![1.0 / c],
        EffectMeasure::OddsRatio => vec![],
    };
    let mut pts = vec![0.0];
    pts.extend(k.into_iter().filter(|&w| w > 0.0 && w < 1.0));
    pts.push(1.0);
    pts.sort_by(f64::total_cmp);
    pts
}

fn expect<F: Fn(f64) -> f64>(w1: &BetaParams, measure: EffectMeasure, c: f64, phi: F) -> f64 {
    let pts = kinks(measure, c);
    pts.windows(2)
        .map(|w| integrate(|x| w1.pdf(x) * phi(x), w[0], w[1], INTEGRATION_TOLERANCE))
        .sum::<f64>()
}

/// `P[b(W1, W2) <= c]` for independent `W1`, `W2`.
pub fn meld_cdf(measure: EffectMeasure, w1: &BetaParams, w2: &BetaParams, c: f64) -> f64 {
    let v = match (w1.point_mass(), w2.point_mass()) {
        (Some(m1), _) => w2.cdf(g(measure, m1, c)),
        (None, Some(m2)) => 1.0 - w1.cdf(h(measure, m2, c)),
        (None, None) => expect(w1, measure, c, |x| w2.cdf(g(measure, x, c))),
    };
    v.clamp(0.0, 1.0)
}

/// `P[b(W1, W2) >= c]` for independent `W1`, `W2`.
pub fn meld_sf(measure: EffectMeasure, w1: &BetaParams, w2: &BetaParams, c: f64) -> f64 {
    let v = match (w1.point_mass(), w2.point_mass()) {
        (Some(m1), Some(m2)) => {
            if m2 >= g(measure, m1, c) {
                1.0
            } else {
                0.0
            }
        }
        (Some(m1), None) => 1.0 - w2.cdf(g(measure, m1, c)),
        (None, Some(m2)) => w1.cdf(h(measure, m2, c)),
        (None, None) => expect(w1, measure, c, |x| 1.0 - w2.cdf(g(measure, x, c))),
    };
    v.clamp(0.0, 1.0)
}

/// Lower quantile `inf { c : P[b(W1, W2) <= c] >= p }`.
pub fn meld_quantile(measure: EffectMeasure, w1: &BetaParams, w2: &BetaParams, p: f64) -> f64 {
    let (range_lo, range_hi) = measure.range();
    let (lo, hi, to_beta): (f64, f64, fn(f64) -> f64) = if measure.is_log_scale() {
        (-40.0, 40.0, f64::exp)
    } else {
        (-1.0, 1.0, |s| s)
    };
    if let (Some(m1), Some(m2)) = (w1.point_mass(), w2.point_mass()) {
        return atom(measure, m1, m2);
    }
    let reached = |s: f64| meld_cdf(measure, w1, w2, to_beta(s)) >= p;
    if reached(lo) {
        return range_lo;
    }
    if !reached(hi) {
        return range_hi;
    }
    let s = bisect_predicate(lo, hi, QUANTILE_TOLERANCE, reached);
    to_beta(s)
}

/// `b(m1, m2)` at the corners reachable by two point masses.
fn atom(measure: EffectMeasure, m1: f64, m2: f64) -> f64 {
    match measure {
        EffectMeasure::Difference => m2 - m1,
        _ if m1 == 0.0 && m2 > 0.0 => f64::INFINITY,
        _ if m2 == 0.0 => 0.0,
        m => m.eval(m1, m2),
    }
}

/// Central melded confidence interval at `level`.
pub fn meld_ci(
    data: &TwoByTwoData,
    measure: EffectMeasure,
    level: f64,
) -> Result<ConfidenceInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!(
            "confidence level {level} not in (0, 1)"
        )));
    }
    let cd = MeldingDistributions::new(data)?;
    let alpha = 1.0 - level;
    let (a1, a2) = cd.for_lower();
    let (b1, b2) = cd.for_upper();
    Ok(ConfidenceInterval {
        lower: meld_quantile(measure, &a1, &a2, alpha / 2.0),
        upper: meld_quantile(measure, &b1, &b2, 1.0 - alpha / 2.0),
        level,
        central: true,
    })
}

/// Melded one-sided p-value. `Greater` (H0: `beta <= beta0`) gives
/// `P[b(W_U1, W_L2) <= beta0]`; `Less` (H0: `beta >= beta0`) gives
/// `P[b(W_L1, W_U2) >= beta0]`; two-sided alternatives give the central
/// p-value `min(1, 2 min(p_less, p_greater))`.
pub fn meld_pvalue(data: &TwoByTwoData, hyp: &Hypothesis) -> Result<f64> {
    hyp.measure.check_null(hyp.beta0)?;
    let cd = MeldingDistributions::new(data)?;
    let greater = || {
        let (w1, w2) = cd.for_lower();
        meld_cdf(hyp.measure, &w1, &w2, hyp.beta0)
    };
    let less = || {
        let (w1, w2) = cd.for_upper();
        meld_sf(hyp.measure, &w1, &w2, hyp.beta0)
    };
    Ok(match hyp.alternative {
        Alternative::Greater => greater(),
        Alternative::Less => less(),
        _ => (2.0 * greater().min(less())).min(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::clopper_pearson;

    fn t(x1: u32, n1: u32, x2: u32, n2: u32) -> TwoByTwoData {
        TwoByTwoData::new(x1, n1, x2, n2).unwrap()
    }

    #[test]
    fn point_mass_reduces_to_clopper_pearson() {
        // x1 = 0: W_U1 continuous, but the upper limit uses W_L1 = 0 and
        // x2 = n2 makes W_U2 = 1, so the upper difference limit is 1.
        let d = t(0, 6, 5, 5);
        let ci = meld_ci(&d, EffectMeasure::Difference, 0.95).unwrap();
        assert_eq!(ci.upper, 1.0);
        // With W_U1 a point mass at 1 the lower limit of theta2 - 1 is
        // the Clopper-Pearson lower limit of theta2 minus 1.
        let d = t(6, 6, 3, 5);
        let ci = meld_ci(&d, EffectMeasure::Difference, 0.95).unwrap();
        let (l2, _) = clopper_pearson(3, 5, 0.95).unwrap();
        assert!((ci.lower - (l2 - 1.0)).abs() < 1e-7, "{ci:?} {l2}");
    }

    #[test]
    fn degenerate_ratio_table() {
        let d = t(0, 5, 0, 7);
        for b in [0.1, 1.0, 30.0] {
            for alt in [Alternative::Less, Alternative::Greater] {
                let h = Hypothesis::new(EffectMeasure::Ratio, b, alt).unwrap();
                assert_eq!(meld_pvalue(&d, &h).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn cdf_and_sf_are_complementary_for_continuous_cds() {
        let a = BetaParams::new(3.0, 5.0).unwrap();
        let b = BetaParams::new(4.0, 2.0).unwrap();
        for m in EffectMeasure::ALL {
            let c = if m == EffectMeasure::Difference {
                0.2
            } else {
                1.7
            };
            let s = meld_cdf(m, &a, &b, c) + meld_sf(m, &a, &b, c);
            assert!((s - 1.0).abs() < 1e-9, "{m}: {s}");
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let a = BetaParams::new(2.0, 9.0).unwrap();
        let b = BetaParams::new(6.0, 3.0).unwrap();
        for m in EffectMeasure::ALL {
            let q = meld_quantile(m, &a, &b, 0.3);
            assert!((meld_cdf(m, &a, &b, q) - 0.3).abs() < 1e-6, "{m}");
        }
    }
}
