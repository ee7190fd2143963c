//! Conditional exact inference given the total number of successes.
//!
//! Given `S = x1 + x2`, `X2` follows Fisher's noncentral hypergeometric
//! distribution with the odds ratio as its only parameter, so conditional
//! tests at a general null are available for the odds ratio only. At the
//! equality null every measure reduces to `psi = 1`.

use serde::{Deserialize, Serialize};

use crate::distributions::{ConditionalKernel, NoncentralHypergeom, Tail, TailMode};
use crate::error::{Error, Result};
use crate::numeric::bisect_predicate;
use crate::table::{Alternative, ConfidenceInterval, EffectMeasure, Hypothesis, TwoByTwoData};

/// Relative tolerance when comparing probabilities of support points.
pub const PMF_TOLERANCE: f64 = 1e-7;

/// Per-support-point Blaker quantities at a given odds ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlakerStatistics {
    /// Smallest support value of `X2`.
    pub support_min: u32,
    pub pmf: Vec<f64>,
    /// `min(P[X2 <= x2], P[X2 >= x2])`.
    pub gamma_values: Vec<f64>,
    /// Blaker p-value of each support point.
    pub tb_values: Vec<f64>,
}

fn distribution(data: &TwoByTwoData, psi: f64) -> Result<NoncentralHypergeom> {
    if !(psi >= 0.0) {
        return Err(Error::Domain(format!(
            "odds ratio {psi} must be nonnegative"
        )));
    }
    Ok(ConditionalKernel::new(data.total(), data.n1, data.n2)?.at(psi))
}

/// Odds ratio the conditional test uses for `hyp`.
fn conditional_psi(hyp: &Hypothesis) -> Result<f64> {
    if hyp.measure == EffectMeasure::OddsRatio {
        hyp.measure.check_null(hyp.beta0)?;
        Ok(hyp.beta0)
    } else if hyp.is_equality() {
        Ok(1.0)
    } else {
        Err(Error::Unsupported(format!(
            "conditional tests of the {} at beta0 = {} do not exist; use the melded or unconditional methods",
            hyp.measure, hyp.beta0
        )))
    }
}

/// Sum of the probabilities of points at most as probable as `reference`
/// (within [`PMF_TOLERANCE`]); ties get half weight in mid mode.
fn sum_at_most(values: &[f64], probs: &[f64], reference: f64, mode: TailMode) -> f64 {
    let tol = PMF_TOLERANCE * reference.abs();
    let mut strict = 0.0;
    let mut tied = 0.0;
    for (v, p) in values.iter().zip(probs) {
        if (v - reference).abs() <= tol {
            tied += p;
        } else if *v < reference {
            strict += p;
        }
    }
    let p = match mode {
        TailMode::Full => strict + tied,
        TailMode::Mid => strict + 0.5 * tied,
    };
    p.min(1.0)
}

/// One-sided conditional p-value. `Greater` uses `P[X2 >= x2 | S]`, `Less`
/// uses `P[X2 <= x2 | S]`, both at the null odds ratio.
pub fn fisher_onesided(data: &TwoByTwoData, hyp: &Hypothesis, mode: TailMode) -> Result<f64> {
    let tail = match hyp.alternative {
        Alternative::Less => Tail::Lower,
        Alternative::Greater => Tail::Upper,
        other => {
            return Err(Error::Domain(format!(
                "one-sided test requested with alternative {other:?}"
            )))
        }
    };
    let psi = conditional_psi(hyp)?;
    Ok(distribution(data, psi)?.tail(data.x2, tail, mode))
}

/// Central conditional p-value `min(1, 2 P[X2 <= x2], 2 P[X2 >= x2])` at
/// odds ratio `psi`.
pub fn fisher_central(data: &TwoByTwoData, psi: f64, mode: TailMode) -> Result<f64> {
    let d = distribution(data, psi)?;
    let lo = d.tail(data.x2, Tail::Lower, mode);
    let hi = d.tail(data.x2, Tail::Upper, mode);
    Ok((2.0 * lo.min(hi)).min(1.0))
}

/// Fisher-Irwin (minimum-likelihood) p-value at odds ratio `psi`: the
/// probability of support points no more probable than the observed one.
pub fn fisher_irwin(data: &TwoByTwoData, psi: f64, mode: TailMode) -> Result<f64> {
    let d = distribution(data, psi)?;
    let f = d.pmf(data.x2);
    Ok(sum_at_most(d.probs(), d.probs(), f, mode))
}

/// Blaker's acceptability statistics at odds ratio `psi`.
pub fn blaker_statistics(data: &TwoByTwoData, psi: f64) -> Result<BlakerStatistics> {
    let d = distribution(data, psi)?;
    Ok(blaker_from(&d, TailMode::Full))
}

fn blaker_from(d: &NoncentralHypergeom, mode: TailMode) -> BlakerStatistics {
    let (lo, hi) = d.support();
    let gamma: Vec<f64> = (lo..=hi)
        .map(|k| {
            d.tail(k, Tail::Lower, TailMode::Full)
                .min(d.tail(k, Tail::Upper, TailMode::Full))
        })
        .collect();
    let tb = gamma
        .iter()
        .map(|&g| sum_at_most(&gamma, d.probs(), g, mode))
        .collect();
    BlakerStatistics {
        support_min: lo,
        pmf: d.probs().to_vec(),
        gamma_values: gamma,
        tb_values: tb,
    }
}

/// Blaker's exact conditional p-value at odds ratio `psi`.
pub fn blaker(data: &TwoByTwoData, psi: f64, mode: TailMode) -> Result<f64> {
    let d = distribution(data, psi)?;
    let st = blaker_from(&d, mode);
    Ok(st.tb_values[(data.x2 - st.support_min) as usize])
}

/// Conditional p-value for any alternative.
pub fn conditional_pvalue(data: &TwoByTwoData, hyp: &Hypothesis, mode: TailMode) -> Result<f64> {
    match hyp.alternative {
        Alternative::Less | Alternative::Greater => fisher_onesided(data, hyp, mode),
        Alternative::TwoSidedCentral => fisher_central(data, conditional_psi(hyp)?, mode),
        Alternative::TwoSidedMinlike => fisher_irwin(data, conditional_psi(hyp)?, mode),
        Alternative::TwoSidedBlaker => blaker(data, conditional_psi(hyp)?, mode),
    }
}

/// Which end of a one-sided interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Lower,
    Upper,
}

/// One-sided `100 conf %` confidence limit for the odds ratio from the
/// conditional tails. The lower limit solves `P_psi[X2 >= x2] = 1 - conf`,
/// the upper limit solves `P_psi[X2 <= x2] = 1 - conf`.
pub fn conditional_limit_oddsratio(
    data: &TwoByTwoData,
    conf: f64,
    bound: Bound,
    mode: TailMode,
) -> Result<f64> {
    if !(conf > 0.0 && conf < 1.0) {
        return Err(Error::Domain(format!(
            "confidence level {conf} not in (0, 1)"
        )));
    }
    let kernel = ConditionalKernel::new(data.total(), data.n1, data.n2)?;
    let (lo, hi) = kernel.support();
    let alpha = 1.0 - conf;
    let x2 = data.x2;
    match bound {
        Bound::Lower if x2 == lo && mode == TailMode::Full => return Ok(0.0),
        Bound::Upper if x2 == hi && mode == TailMode::Full => return Ok(f64::INFINITY),
        _ => {}
    }
    if lo == hi {
        return Ok(match bound {
            Bound::Lower => 0.0,
            Bound::Upper => f64::INFINITY,
        });
    }
    let tail = match bound {
        Bound::Lower => Tail::Upper,
        Bound::Upper => Tail::Lower,
    };
    let tail_at = |lpsi: f64| kernel.at(lpsi.exp()).tail(x2, tail, mode);
    // Upper tails increase and lower tails decrease in psi.
    let rejected = |lpsi: f64| {
        let t = tail_at(lpsi);
        match bound {
            Bound::Lower => t < alpha,
            Bound::Upper => t >= alpha,
        }
    };
    // Mid-p tails at the edge of the support stay bounded away from zero.
    let (far_lo, far_hi) = (-745.0_f64, 709.0_f64);
    match bound {
        Bound::Lower if rejected(far_lo) == rejected(far_hi) => {
            return Ok(if rejected(far_hi) { f64::INFINITY } else { 0.0 })
        }
        Bound::Upper if rejected(far_lo) == rejected(far_hi) => {
            return Ok(if rejected(far_lo) { f64::INFINITY } else { 0.0 })
        }
        _ => {}
    }
    let centre = {
        let a = data.x1 as f64 + 0.5;
        let b = (data.n1 - data.x1) as f64 + 0.5;
        let c = data.x2 as f64 + 0.5;
        let d = (data.n2 - data.x2) as f64 + 0.5;
        (c * b / (a * d)).ln()
    };
    let (mut a, mut b) = (centre - 1.0, centre + 1.0);
    let mut width = 2.0;
    while rejected(a) == rejected(b) {
        width *= 2.0;
        a = (centre - width).max(far_lo);
        b = (centre + width).min(far_hi);
    }
    let l = bisect_predicate(a, b, 1e-11, rejected);
    Ok(l.exp())
}

/// Central `100 level %` conditional interval for the odds ratio.
pub fn conditional_ci_oddsratio(
    data: &TwoByTwoData,
    level: f64,
    mode: TailMode,
) -> Result<ConfidenceInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!(
            "confidence level {level} not in (0, 1)"
        )));
    }
    let conf = 1.0 - (1.0 - level) / 2.0;
    Ok(ConfidenceInterval {
        lower: conditional_limit_oddsratio(data, conf, Bound::Lower, mode)?,
        upper: conditional_limit_oddsratio(data, conf, Bound::Upper, mode)?,
        level,
        central: true,
    })
}

/// Converts an upper limit on the odds ratio into an upper limit on the
/// difference: `(sqrt(u) - 1) / (sqrt(u) + 1)` when `u > 1`, else 0.
pub fn santner_diff_bound(u_or: f64) -> Result<f64> {
    if !(u_or >= 0.0) {
        return Err(Error::Domain(format!(
            "odds ratio bound {u_or} must be nonnegative"
        )));
    }
    if u_or <= 1.0 {
        return Ok(0.0);
    }
    if u_or.is_infinite() {
        return Ok(1.0);
    }
    let r = u_or.sqrt();
    Ok((r - 1.0) / (r + 1.0))
}
