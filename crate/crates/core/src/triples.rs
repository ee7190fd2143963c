//! Matched triples of estimate, confidence set and p-value function, with
//! diagnostics for compatibility, nestedness and coherence.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditional::conditional_ci_oddsratio;
use crate::distributions::TailMode;
use crate::error::{Error, Result};
use crate::table::{Alternative, ConfidenceInterval, EffectMeasure, TwoByTwoData};

/// Default number of `beta0` grid points.
pub const BETA_GRID_POINTS: usize = 2001;

/// Points of `beta0` at which a p-value function is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaGrid {
    pub measure: EffectMeasure,
    /// Strictly increasing.
    pub points: Vec<f64>,
    /// A region containing the first point extends to the bottom of the
    /// parameter range.
    pub extends_below: bool,
    /// A region containing the last point extends to the top of the range.
    pub extends_above: bool,
}

impl BetaGrid {
    /// Linear grid for the difference, logarithmic for ratio measures.
    pub fn new(measure: EffectMeasure, lo: f64, hi: f64, points: usize) -> Result<Self> {
        let (rlo, rhi) = measure.range();
        if !(lo < hi) || lo < rlo || hi > rhi || points < 2 {
            return Err(Error::Domain(format!(
                "invalid beta grid [{lo}, {hi}] with {points} points for the {measure}"
            )));
        }
        if measure.is_log_scale() && lo <= 0.0 {
            return Err(Error::Domain(
                "log-scale grids need a positive lower end".into(),
            ));
        }
        let (a, b) = (to_search(measure, lo), to_search(measure, hi));
        let step = (b - a) / (points - 1) as f64;
        let pts = (0..points)
            .map(|i| {
                from_search(
                    measure,
                    if i == points - 1 {
                        b
                    } else {
                        a + step * i as f64
                    },
                )
            })
            .collect();
        Ok(Self {
            measure,
            points: pts,
            extends_below: false,
            extends_above: false,
        })
    }

    /// Largest spacing between neighbours on the search scale.
    pub fn resolution(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| to_search(self.measure, w[1]) - to_search(self.measure, w[0]))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn to_search(measure: EffectMeasure, b: f64) -> f64 {
    if measure.is_log_scale() {
        b.ln()
    } else {
        b
    }
}

pub(crate) fn from_search(measure: EffectMeasure, s: f64) -> f64 {
    if measure.is_log_scale() {
        s.exp()
    } else {
        s
    }
}

/// Default grid for a table: the whole open range for the difference; for
/// ratio measures a log grid spanning a widened conditional odds-ratio
/// interval at level `1 - alpha / 20`, capped at `1e-6` and `1e6`.
pub fn default_beta_grid(
    data: &TwoByTwoData,
    measure: EffectMeasure,
    alpha: f64,
) -> Result<BetaGrid> {
    const CAP_LO: f64 = 1e-6;
    const CAP_HI: f64 = 1e6;
    if measure == EffectMeasure::Difference {
        let mut g = BetaGrid::new(measure, -1.0 + 1e-9, 1.0 - 1e-9, BETA_GRID_POINTS)?;
        g.extends_below = true;
        g.extends_above = true;
        return Ok(g);
    }
    let level = (1.0 - alpha / 20.0).clamp(0.5, 1.0 - 1e-12);
    let ci = conditional_ci_oddsratio(data, level, TailMode::Full)?;
    let lo = (ci.lower / 4.0).min(0.25);
    let hi = (ci.upper * 4.0).max(4.0);
    let (lo, below) = if lo <= CAP_LO {
        (CAP_LO, true)
    } else {
        (lo, false)
    };
    let (hi, above) = if !hi.is_finite() || hi >= CAP_HI {
        (CAP_HI, true)
    } else {
        (hi, false)
    };
    let mut g = BetaGrid::new(measure, lo, hi, BETA_GRID_POINTS)?;
    g.extends_below = below;
    g.extends_above = above;
    Ok(g)
}

/// Union of disjoint open intervals of `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRegion {
    pub intervals: Vec<(f64, f64)>,
    pub level: f64,
    /// Grid spacing on the search scale (log scale for ratio measures).
    pub grid_resolution: f64,
}

impl ConfidenceRegion {
    pub fn contains(&self, beta: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a < beta && beta < b)
    }

    /// Smallest interval containing the region.
    pub fn hull(&self) -> Option<(f64, f64)> {
        let first = self.intervals.first()?;
        let last = self.intervals.last()?;
        Some((first.0, last.1))
    }

    pub fn intersect(&self, other: &ConfidenceRegion, level: f64) -> ConfidenceRegion {
        let mut out = Vec::new();
        for &(a, b) in &self.intervals {
            for &(c, d) in &other.intervals {
                let (lo, hi) = (a.max(c), b.min(d));
                if lo < hi {
                    out.push((lo, hi));
                }
            }
        }
        out.sort_by(|x, y| x.0.total_cmp(&y.0));
        ConfidenceRegion {
            intervals: out,
            level,
            grid_resolution: self.grid_resolution.max(other.grid_resolution),
        }
    }
}

/// `{beta0 : p(beta0) > 1 - level}` evaluated on `grid`, with each crossing
/// located by bisection on the search scale.
pub fn confidence_region<F>(pfun: &F, level: f64, grid: &BetaGrid) -> Result<ConfidenceRegion>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!(
            "confidence level {level} not in (0, 1)"
        )));
    }
    let alpha = 1.0 - level;
    let measure = grid.measure;
    let eval = |b: f64| -> Result<bool> {
        pfun(b).map(|p| p > alpha).map_err(|e| Error::PValue {
            beta0: b,
            source: Box::new(e),
        })
    };
    let inside: Vec<bool> = grid
        .points
        .par_iter()
        .map(|&b| eval(b))
        .collect::<Result<_>>()?;
    let crossing = |i: usize| -> Result<f64> {
        let (mut a, mut b) = (
            to_search(measure, grid.points[i]),
            to_search(measure, grid.points[i + 1]),
        );
        let at_a = inside[i];
        for _ in 0..100 {
            if b - a <= 1e-8 {
                break;
            }
            let m = 0.5 * (a + b);
            if eval(from_search(measure, m))? == at_a {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(from_search(measure, 0.5 * (a + b)))
    };
    let (rlo, rhi) = measure.range();
    let n = inside.len();
    let mut intervals = Vec::new();
    let mut start: Option<f64> = None;
    for (i, &is_in) in inside.iter().enumerate() {
        if is_in && start.is_none() {
            start = Some(if i == 0 {
                if grid.extends_below {
                    rlo
                } else {
                    grid.points[0]
                }
            } else {
                crossing(i - 1)?
            });
        }
        if !is_in {
            if let Some(s) = start.take() {
                intervals.push((s, crossing(i - 1)?));
            }
        }
    }
    if let Some(s) = start {
        let end = if grid.extends_above {
            rhi
        } else {
            grid.points[n - 1]
        };
        intervals.push((s, end));
    }
    Ok(ConfidenceRegion {
        intervals,
        level,
        grid_resolution: grid.resolution(),
    })
}

/// The smallest interval containing a region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchingCi {
    pub ci: ConfidenceInterval,
    /// The region had holes that the interval covers.
    pub holes_filled: bool,
}

pub fn matching_ci(region: &ConfidenceRegion) -> Result<MatchingCi> {
    let (lower, upper) = region
        .hull()
        .ok_or_else(|| Error::Domain("empty confidence region".into()))?;
    Ok(MatchingCi {
        ci: ConfidenceInterval {
            lower,
            upper,
            level: region.level,
            central: false,
        },
        holes_filled: region.intervals.len() > 1,
    })
}

/// A p-value function together with its matching confidence interval.
pub trait Procedure: Sync {
    fn name(&self) -> String;
    fn measure(&self) -> EffectMeasure;
    /// The procedure's two-sided p-value at `beta0`.
    fn pvalue(&self, data: &TwoByTwoData, beta0: f64) -> Result<f64>;
    /// Matching confidence interval at `level`.
    fn ci(&self, data: &TwoByTwoData, level: f64) -> Result<ConfidenceInterval>;
}

/// A pair `(alpha, beta0)` where rejection and exclusion from the interval
/// disagree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityViolation {
    pub alpha: f64,
    pub beta0: f64,
    pub p: f64,
    pub ci: ConfidenceInterval,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    pub checked: usize,
    pub violations: Vec<CompatibilityViolation>,
}

impl CompatibilityReport {
    pub fn compatible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `p(beta0) <= alpha  <=>  beta0 outside the 100(1-alpha)% interval`
/// for every `alpha` and `beta0`. Grid points within `1e-6` (relative on the
/// log scale) of an interval endpoint are skipped since the endpoint itself
/// is only known to that precision.
pub fn check_compatibility(
    method: &dyn Procedure,
    data: &TwoByTwoData,
    alphas: &[f64],
    beta_grid: &[f64],
) -> Result<CompatibilityReport> {
    let measure = method.measure();
    let near = |a: f64, b: f64| {
        if !a.is_finite() || !b.is_finite() {
            return false;
        }
        (to_search(measure, a) - to_search(measure, b)).abs() <= 1e-6
    };
    let pvals: Vec<f64> = beta_grid
        .par_iter()
        .map(|&b| method.pvalue(data, b))
        .collect::<Result<_>>()?;
    let mut violations = Vec::new();
    let mut checked = 0;
    for &alpha in alphas {
        let ci = method.ci(data, 1.0 - alpha)?;
        for (&b, &p) in beta_grid.iter().zip(&pvals) {
            if near(b, ci.lower) || near(b, ci.upper) {
                continue;
            }
            checked += 1;
            let rejected = p <= alpha;
            let outside = !ci.contains(b);
            if rejected != outside {
                violations.push(CompatibilityViolation {
                    alpha,
                    beta0: b,
                    p,
                    ci,
                    rejected,
                });
            }
        }
    }
    Ok(CompatibilityReport {
        checked,
        violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NestednessViolation {
    pub level: f64,
    pub ci: ConfidenceInterval,
    pub higher_level: f64,
    pub higher_ci: ConfidenceInterval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestednessReport {
    pub intervals: Vec<ConfidenceInterval>,
    pub violations: Vec<NestednessViolation>,
}

impl NestednessReport {
    pub fn nested(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that the interval at every higher level contains the interval at
/// every lower level.
pub fn check_nestedness(
    method: &dyn Procedure,
    data: &TwoByTwoData,
    levels: &[f64],
) -> Result<NestednessReport> {
    let mut levels = levels.to_vec();
    levels.sort_by(f64::total_cmp);
    let cis: Vec<ConfidenceInterval> = levels
        .iter()
        .map(|&l| method.ci(data, l))
        .collect::<Result<_>>()?;
    let mut violations = Vec::new();
    for i in 0..cis.len() {
        for j in i + 1..cis.len() {
            if levels[j] > levels[i] && !cis[i].within(&cis[j]) {
                violations.push(NestednessViolation {
                    level: levels[i],
                    ci: cis[i],
                    higher_level: levels[j],
                    higher_ci: cis[j],
                });
            }
        }
    }
    Ok(NestednessReport {
        intervals: cis,
        violations,
    })
}

/// Neighbouring grid points where the p-value moves the wrong way.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceViolation {
    pub beta_a: f64,
    pub p_a: f64,
    pub beta_b: f64,
    pub p_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub pvalues: Vec<(f64, f64)>,
    pub violations: Vec<CoherenceViolation>,
}

impl CoherenceReport {
    pub fn coherent(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks monotonicity of a p-value function over an increasing `beta0`
/// grid. `Greater` p-values must not decrease, `Less` p-values must not
/// increase; two-sided p-values must not increase moving away from the
/// estimate on either side. Changes below `1e-9` are ignored.
pub fn check_coherence<F>(
    pfun: &F,
    data: &TwoByTwoData,
    measure: EffectMeasure,
    beta0_grid: &[f64],
    alternative: Alternative,
) -> Result<CoherenceReport>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let tol = 1e-9;
    let p: Vec<f64> = beta0_grid
        .par_iter()
        .map(|&b| pfun(b))
        .collect::<Result<_>>()?;
    let est = data.estimate(measure);
    let mut violations = Vec::new();
    for i in 1..p.len() {
        let (a, b) = (beta0_grid[i - 1], beta0_grid[i]);
        let bad = match alternative {
            Alternative::Greater => p[i] < p[i - 1] - tol,
            Alternative::Less => p[i] > p[i - 1] + tol,
            _ => {
                if a >= est {
                    p[i] > p[i - 1] + tol
                } else if b <= est {
                    p[i] < p[i - 1] - tol
                } else {
                    false
                }
            }
        };
        if bad {
            violations.push(CoherenceViolation {
                beta_a: a,
                p_a: p[i - 1],
                beta_b: b,
                p_b: p[i],
            });
        }
    }
    Ok(CoherenceReport {
        pvalues: beta0_grid.iter().copied().zip(p).collect(),
        violations,
    })
}

/// Estimate, interval and p-values from one procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub method: String,
    pub measure: EffectMeasure,
    pub beta0: f64,
    pub estimate: f64,
    /// The sample estimate was undefined or outside the interval and was
    /// moved into it.
    pub estimate_clamped: bool,
    pub ci: ConfidenceInterval,
    pub region: Option<ConfidenceRegion>,
    pub p_less: f64,
    pub p_greater: f64,
    pub p_two_sided: f64,
}

/// Sample estimate moved into `[lower, upper]` when it is undefined or
/// outside; returns the value and whether it was moved.
pub fn clamp_estimate(estimate: f64, ci: &ConfidenceInterval) -> (f64, bool) {
    if estimate.is_nan() {
        let mid = if ci.lower.is_finite() && ci.upper.is_finite() {
            if ci.lower > 0.0 {
                (ci.lower * ci.upper).sqrt()
            } else {
                0.5 * (ci.lower + ci.upper)
            }
        } else if ci.lower.is_finite() {
            ci.lower
        } else {
            ci.upper
        };
        return (mid, true);
    }
    if estimate < ci.lower {
        (ci.lower, true)
    } else if estimate > ci.upper {
        (ci.upper, true)
    } else {
        (estimate, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    FailToReject,
    ConcludeGreater,
    ConcludeLess,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionOutcome {
    pub decision: Decision,
    pub alpha: f64,
}

/// Three-decision rule for a central triple: a directional conclusion is
/// drawn when the one-sided p-value in that direction is at most `alpha/2`.
pub fn three_decision(result: &InferenceResult, alpha: f64) -> DecisionOutcome {
    let half = alpha / 2.0;
    let decision = if result.p_greater <= half && result.p_greater <= result.p_less {
        Decision::ConcludeGreater
    } else if result.p_less <= half {
        Decision::ConcludeLess
    } else {
        Decision::FailToReject
    };
    DecisionOutcome { decision, alpha }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region_of(f: impl Fn(f64) -> f64 + Sync, grid: &BetaGrid, level: f64) -> ConfidenceRegion {
        confidence_region(&|b| Ok(f(b)), level, grid).unwrap()
    }

    #[test]
    fn region_finds_holes() {
        let g = BetaGrid::new(EffectMeasure::Difference, -0.9, 0.9, 401).unwrap();
        let r = region_of(
            |b| if (b - 0.1).abs() < 0.05 { 0.01 } else { 0.5 },
            &g,
            0.95,
        );
        assert_eq!(r.intervals.len(), 2);
        assert!((r.intervals[0].1 - 0.05).abs() < 1e-6);
        assert!((r.intervals[1].0 - 0.15).abs() < 1e-6);
        let m = matching_ci(&r).unwrap();
        assert!(m.holes_filled);
        assert_eq!(m.ci.lower, -0.9);
    }

    #[test]
    fn region_extends_to_range() {
        let mut g = BetaGrid::new(EffectMeasure::Ratio, 1e-3, 1e3, 201).unwrap();
        g.extends_above = true;
        let r = region_of(|b| if b > 2.0 { 0.2 } else { 0.0 }, &g, 0.95);
        assert_eq!(r.intervals.len(), 1);
        assert!((r.intervals[0].0 - 2.0).abs() < 1e-6);
        assert!(r.intervals[0].1.is_infinite());
        let single = matching_ci(&r).unwrap();
        assert!(!single.holes_filled);
    }

    #[test]
    fn low_levels_cover_almost_everything() {
        let g = BetaGrid::new(EffectMeasure::Difference, -0.99, 0.99, 101).unwrap();
        let r = region_of(|b| (1.0 - b.abs()).max(0.0), &g, 1.0 - 1e-6);
        assert_eq!(r.intervals.len(), 1);
        assert!(r.intervals[0].0 < -0.98 && r.intervals[0].1 > 0.98);
    }

    #[test]
    fn decisions() {
        let mut r = InferenceResult {
            method: "m".into(),
            measure: EffectMeasure::Difference,
            beta0: 0.0,
            estimate: 0.1,
            estimate_clamped: false,
            ci: ConfidenceInterval {
                lower: 0.01,
                upper: 0.2,
                level: 0.95,
                central: true,
            },
            region: None,
            p_less: 0.99,
            p_greater: 0.01,
            p_two_sided: 0.02,
        };
        assert_eq!(three_decision(&r, 0.05).decision, Decision::ConcludeGreater);
        r.p_less = 0.01;
        r.p_greater = 0.99;
        assert_eq!(three_decision(&r, 0.05).decision, Decision::ConcludeLess);
        r.p_less = 0.2;
        r.p_greater = 0.8;
        assert_eq!(three_decision(&r, 0.05).decision, Decision::FailToReject);
    }

    #[test]
    fn clamping() {
        let ci = ConfidenceInterval {
            lower: 0.5,
            upper: 2.0,
            level: 0.95,
            central: true,
        };
        assert_eq!(clamp_estimate(f64::NAN, &ci), (1.0, true));
        assert_eq!(clamp_estimate(3.0, &ci), (2.0, true));
        assert_eq!(clamp_estimate(1.5, &ci), (1.5, false));
    }
}
