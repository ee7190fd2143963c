//! Orderings of the `(n1+1) x (n2+1)` sample space.
//!
//! A [`SampleSpaceOrdering`] ranks every informative table by how strongly it
//! suggests `theta2 > theta1` (one-sided orderings) or by how far it is from
//! the null (two-sided orderings, where smaller means more extreme). All
//! downstream computations use the integer ranks; the real values are kept
//! for export.

pub mod csm;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::boundary::{constrained_mle, NullBoundary};
use crate::distributions::{ConditionalKernel, Tail, TailMode};
use crate::error::{domain, Result};
use crate::table::{EffectMeasure, TwoByTwoData};

pub use csm::{order_csm, CsmConfig, CsmState, CsmVariant};

/// Relative tolerance under which two ordering values count as tied.
pub const TIE_TOLERANCE: f64 = 1e-10;

/// Rank given to points outside the informative set.
pub const MASKED_RANK: u32 = u32::MAX;

pub(crate) fn tied(a: f64, b: f64) -> bool {
    a == b
        || (a.is_finite() && b.is_finite() && (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    /// Larger values favour `theta2 > theta1`.
    OneSided,
    /// Smaller values are further from the null.
    TwoSided,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpaceOrdering {
    n1: u32,
    n2: u32,
    name: String,
    sidedness: Sidedness,
    t_values: Vec<f64>,
    mask: Vec<bool>,
    rank_ids: Vec<u32>,
    n_ranks: u32,
    bc_certified: bool,
}

/// A pair of points violating Barnard's convexity conditions: `higher`
/// should rank at least as high as `lower` but does not.
/// Two sample points `(x1, x2)`.
pub type PointPair = ((u32, u32), (u32, u32));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BcViolation {
    pub lower: (u32, u32),
    pub higher: (u32, u32),
}

impl SampleSpaceOrdering {
    /// Builds an ordering from real values, grouping ties within
    /// [`TIE_TOLERANCE`]. `NaN` values are treated as masked.
    pub fn from_values(
        n1: u32,
        n2: u32,
        values: Vec<f64>,
        mask: Vec<bool>,
        name: impl Into<String>,
        sidedness: Sidedness,
    ) -> Self {
        let mask: Vec<bool> = mask
            .iter()
            .zip(&values)
            .map(|(m, v)| *m && !v.is_nan())
            .collect();
        let flat = vec![0u32; values.len()];
        let rank_ids = refine_ranks(&flat, &values, &mask);
        Self::assemble(n1, n2, name.into(), sidedness, values, mask, rank_ids)
    }

    /// Builds an ordering ranked first by `primary` and, within primary ties,
    /// by `secondary`.
    pub fn from_keys(
        n1: u32,
        n2: u32,
        primary: Vec<f64>,
        secondary: &[f64],
        mask: Vec<bool>,
        name: impl Into<String>,
    ) -> Self {
        let mask: Vec<bool> = mask
            .iter()
            .zip(&primary)
            .map(|(m, v)| *m && !v.is_nan())
            .collect();
        let flat = vec![0u32; primary.len()];
        let coarse = refine_ranks(&flat, &primary, &mask);
        let fine = refine_ranks(&coarse, secondary, &mask);
        Self::assemble(
            n1,
            n2,
            name.into(),
            Sidedness::OneSided,
            primary,
            mask,
            fine,
        )
    }

    /// Builds an ordering directly from integer ranks (ties share a rank).
    pub(crate) fn from_ranks(
        n1: u32,
        n2: u32,
        values: Vec<f64>,
        mask: Vec<bool>,
        ranks: Vec<u32>,
        name: impl Into<String>,
        sidedness: Sidedness,
    ) -> Self {
        let as_f: Vec<f64> = ranks.iter().map(|&r| r as f64).collect();
        let flat = vec![0u32; ranks.len()];
        let dense = refine_ranks(&flat, &as_f, &mask);
        Self::assemble(n1, n2, name.into(), sidedness, values, mask, dense)
    }

    fn assemble(
        n1: u32,
        n2: u32,
        name: String,
        sidedness: Sidedness,
        mut t_values: Vec<f64>,
        mask: Vec<bool>,
        rank_ids: Vec<u32>,
    ) -> Self {
        assert_eq!(t_values.len(), ((n1 + 1) * (n2 + 1)) as usize);
        for (v, m) in t_values.iter_mut().zip(&mask) {
            if !m {
                *v = f64::NAN;
            }
        }
        let n_ranks = rank_ids
            .iter()
            .filter(|&&r| r != MASKED_RANK)
            .max()
            .map_or(0, |m| m + 1);
        let mut o = Self {
            n1,
            n2,
            name,
            sidedness,
            t_values,
            mask,
            rank_ids,
            n_ranks,
            bc_certified: false,
        };
        o.bc_certified = o.sidedness == Sidedness::OneSided && check_bc(&o).is_ok();
        o
    }

    pub fn n1(&self) -> u32 {
        self.n1
    }

    pub fn n2(&self) -> u32 {
        self.n2
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sidedness(&self) -> Sidedness {
        self.sidedness
    }

    pub fn bc_certified(&self) -> bool {
        self.bc_certified
    }

    pub fn n_cells(&self) -> usize {
        self.mask.len()
    }

    pub fn n_ranks(&self) -> u32 {
        self.n_ranks
    }

    #[inline]
    pub fn index(&self, x1: u32, x2: u32) -> usize {
        (x1 * (self.n2 + 1) + x2) as usize
    }

    #[inline]
    pub fn point(&self, idx: usize) -> (u32, u32) {
        let w = self.n2 as usize + 1;
        ((idx / w) as u32, (idx % w) as u32)
    }

    pub fn value(&self, x1: u32, x2: u32) -> f64 {
        self.t_values[self.index(x1, x2)]
    }

    pub fn rank(&self, x1: u32, x2: u32) -> Option<u32> {
        let r = self.rank_ids[self.index(x1, x2)];
        (r != MASKED_RANK).then_some(r)
    }

    pub fn is_informative(&self, x1: u32, x2: u32) -> bool {
        self.mask[self.index(x1, x2)]
    }

    pub fn values(&self) -> &[f64] {
        &self.t_values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn ranks(&self) -> &[u32] {
        &self.rank_ids
    }

    /// Copy with the points carrying no information about `measure` masked
    /// out.
    pub fn restricted_to(&self, measure: EffectMeasure) -> Self {
        let info = informative_mask(self.n1, self.n2, measure);
        let mask: Vec<bool> = self.mask.iter().zip(&info).map(|(a, b)| *a && *b).collect();
        if mask == self.mask {
            return self.clone();
        }
        let ranks: Vec<u32> = self
            .rank_ids
            .iter()
            .zip(&mask)
            .map(|(&r, &m)| if m { r } else { MASKED_RANK })
            .collect();
        Self::from_ranks(
            self.n1,
            self.n2,
            self.t_values.clone(),
            mask,
            ranks,
            format!("{} [{}]", self.name, measure),
            self.sidedness,
        )
    }

    /// Label-swap image `[n1 - x1, n2 - x2]` of a point.
    pub fn mirror(&self, x1: u32, x2: u32) -> (u32, u32) {
        (self.n1 - x1, self.n2 - x2)
    }

    /// Checks symmetry equivariance: swapping success and failure labels in
    /// both groups reverses the ranking. Returns a pair of points whose
    /// order is not reversed on failure.
    pub fn check_label_swap_reversal(&self) -> std::result::Result<(), PointPair> {
        let top = self.n_ranks.saturating_sub(1);
        for x1 in 0..=self.n1 {
            for x2 in 0..=self.n2 {
                let (m1, m2) = self.mirror(x1, x2);
                match (self.rank(x1, x2), self.rank(m1, m2)) {
                    (Some(a), Some(b)) if a + b == top => {}
                    (None, None) => {}
                    _ => return Err(((x1, x2), (m1, m2))),
                }
            }
        }
        Ok(())
    }

    /// Comma-separated grid: one row per `x1`, one column per `x2`, `NA` for
    /// masked points.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x1\\x2");
        for x2 in 0..=self.n2 {
            let _ = write!(out, ",{x2}");
        }
        out.push('\n');
        for x1 in 0..=self.n1 {
            let _ = write!(out, "{x1}");
            for x2 in 0..=self.n2 {
                let v = self.value(x1, x2);
                if self.is_informative(x1, x2) {
                    let _ = write!(out, ",{}", crate::fmt_sig(v));
                } else {
                    out.push_str(",NA");
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Assigns dense ranks that refine `coarse` by `values` (ties within
/// [`TIE_TOLERANCE`] share a rank). Masked points get [`MASKED_RANK`].
fn refine_ranks(coarse: &[u32], values: &[f64], mask: &[bool]) -> Vec<u32> {
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| mask[i]).collect();
    idx.sort_by(|&a, &b| {
        coarse[a]
            .cmp(&coarse[b])
            .then(values[a].total_cmp(&values[b]))
    });
    let mut ranks = vec![MASKED_RANK; values.len()];
    let mut r = 0u32;
    for (k, &i) in idx.iter().enumerate() {
        if k > 0 {
            let p = idx[k - 1];
            if coarse[p] != coarse[i] || !tied(values[p], values[i]) {
                r += 1;
            }
        }
        ranks[i] = r;
    }
    ranks
}

/// Points carrying information about the measure: the ratio excludes
/// `[0,0]`; the odds ratio also excludes `[n1,n2]`.
pub fn informative_mask(n1: u32, n2: u32, measure: EffectMeasure) -> Vec<bool> {
    let mut mask = vec![true; ((n1 + 1) * (n2 + 1)) as usize];
    match measure {
        EffectMeasure::Difference => {}
        EffectMeasure::Ratio => mask[0] = false,
        EffectMeasure::OddsRatio => {
            mask[0] = false;
            let last = mask.len() - 1;
            mask[last] = false;
        }
    }
    mask
}

fn tabulate(n1: u32, n2: u32, mut f: impl FnMut(u32, u32) -> f64) -> Vec<f64> {
    let mut v = Vec::with_capacity(((n1 + 1) * (n2 + 1)) as usize);
    for x1 in 0..=n1 {
        for x2 in 0..=n2 {
            v.push(f(x1, x2));
        }
    }
    v
}

fn check_sizes(n1: u32, n2: u32) -> Result<()> {
    if n1 == 0 || n2 == 0 {
        return domain("group sizes must be at least 1");
    }
    Ok(())
}

/// Difference in sample proportions, computed from the exact integer
/// numerator so that equal fractions tie exactly.
pub fn difference_statistic(x1: u32, n1: u32, x2: u32, n2: u32) -> f64 {
    let num = x2 as i64 * n1 as i64 - x1 as i64 * n2 as i64;
    num as f64 / (n1 as f64 * n2 as f64)
}

/// Pooled Wald statistic; zero when the pooled variance vanishes.
pub fn pooled_z(x1: u32, n1: u32, x2: u32, n2: u32) -> f64 {
    let num = difference_statistic(x1, n1, x2, n2);
    let pooled = (x1 + x2) as f64 / (n1 + n2) as f64;
    let var = pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64);
    if var <= 0.0 {
        0.0
    } else {
        num / var.sqrt()
    }
}

/// T(x) = x2/n2 - x1/n1.
pub fn order_diff(n1: u32, n2: u32) -> Result<SampleSpaceOrdering> {
    check_sizes(n1, n2)?;
    let v = tabulate(n1, n2, |x1, x2| difference_statistic(x1, n1, x2, n2));
    let mask = vec![true; v.len()];
    Ok(SampleSpaceOrdering::from_values(
        n1,
        n2,
        v,
        mask,
        "difference",
        Sidedness::OneSided,
    ))
}

/// Difference in proportions with ties broken by the pooled Wald statistic.
/// Ties at zero difference and label-swap symmetric pairs stay tied.
pub fn order_diff_tiebreak(n1: u32, n2: u32) -> Result<SampleSpaceOrdering> {
    check_sizes(n1, n2)?;
    let v = tabulate(n1, n2, |x1, x2| difference_statistic(x1, n1, x2, n2));
    let z = tabulate(n1, n2, |x1, x2| pooled_z(x1, n1, x2, n2));
    let mask = vec![true; v.len()];
    Ok(SampleSpaceOrdering::from_keys(
        n1,
        n2,
        v,
        &z,
        mask,
        "difference with tie-break",
    ))
}

/// Pooled Wald Z over the whole sample space.
pub fn order_wald_pooled(n1: u32, n2: u32) -> Result<SampleSpaceOrdering> {
    check_sizes(n1, n2)?;
    let z = tabulate(n1, n2, |x1, x2| pooled_z(x1, n1, x2, n2));
    let mask = vec![true; z.len()];
    Ok(SampleSpaceOrdering::from_values(
        n1,
        n2,
        z,
        mask,
        "pooled Wald Z",
        Sidedness::OneSided,
    ))
}

/// Score statistic for `H0: beta = beta0` with constrained-MLE nuisance
/// estimates.
///
/// * difference: `(d - beta0) / sqrt(v1/n1 + v2/n2)` (Farrington-Manning)
/// * ratio: `(t2 - beta0 t1) / sqrt(v2/n2 + beta0^2 v1/n1)` (Farrington-Manning)
/// * odds ratio: `(x2 - n2 t2~) * sqrt(1/(n1 v1) + 1/(n2 v2))`
///
/// where `vi = ti~ (1 - ti~)` at the restricted MLE. At the equality null
/// every measure reduces to the pooled Wald Z.
pub fn score_statistic(data: &TwoByTwoData, measure: EffectMeasure, beta0: f64) -> f64 {
    let bd = NullBoundary { measure, beta0 };
    let (t1, t2) = constrained_mle(data, &bd);
    let (n1, n2) = (data.n1 as f64, data.n2 as f64);
    let (h1, h2) = (data.theta1_hat(), data.theta2_hat());
    let v1 = t1 * (1.0 - t1);
    let v2 = t2 * (1.0 - t2);
    let (num, var) = match measure {
        EffectMeasure::Difference => (h2 - h1 - beta0, v1 / n1 + v2 / n2),
        EffectMeasure::Ratio => (h2 - beta0 * h1, v2 / n2 + beta0 * beta0 * v1 / n1),
        EffectMeasure::OddsRatio => {
            let d = data.x2 as f64 - n2 * t2;
            let info = 1.0 / (n1 * v1) + 1.0 / (n2 * v2);
            if d == 0.0 || d.abs() < 1e-12 * n2 {
                return 0.0;
            }
            return if info.is_finite() {
                d * info.sqrt()
            } else {
                d.signum() * f64::INFINITY
            };
        }
    };
    if num.abs() < 1e-14 {
        0.0
    } else if var > 0.0 {
        num / var.sqrt()
    } else {
        num.signum() * f64::INFINITY
    }
}

/// One-sided score ordering at `beta0`, restricted to the informative set.
pub fn order_score(
    n1: u32,
    n2: u32,
    measure: EffectMeasure,
    beta0: f64,
) -> Result<SampleSpaceOrdering> {
    check_sizes(n1, n2)?;
    measure.check_null(beta0)?;
    let v = tabulate(n1, n2, |x1, x2| {
        score_statistic(&TwoByTwoData { x1, n1, x2, n2 }, measure, beta0)
    });
    Ok(SampleSpaceOrdering::from_values(
        n1,
        n2,
        v,
        informative_mask(n1, n2, measure),
        format!("score ({measure}, beta0 = {beta0})"),
        Sidedness::OneSided,
    ))
}

/// Two-sided score ordering, `T = -|Z|` (equivalent to ordering by `Z^2`).
pub fn order_score_two_sided(
    n1: u32,
    n2: u32,
    measure: EffectMeasure,
    beta0: f64,
) -> Result<SampleSpaceOrdering> {
    let one = order_score(n1, n2, measure, beta0)?;
    let v: Vec<f64> = one.values().iter().map(|z| -z.abs()).collect();
    Ok(SampleSpaceOrdering::from_values(
        n1,
        n2,
        v,
        one.mask().to_vec(),
        format!("two-sided score ({measure}, beta0 = {beta0})"),
        Sidedness::TwoSided,
    ))
}

/// Fisher's one-sided conditional mid-p at the equality null, oriented so
/// that larger values favour `theta2 > theta1`:
/// `T(x) = P[X2 < x2 | S] + P[X2 = x2 | S] / 2`.
pub fn order_fisher_midp(n1: u32, n2: u32) -> Result<SampleSpaceOrdering> {
    check_sizes(n1, n2)?;
    let kernels: Vec<_> = (0..=n1 + n2)
        .map(|s| ConditionalKernel::new(s, n1, n2).map(|k| k.at(1.0)))
        .collect::<Result<_>>()?;
    let v = tabulate(n1, n2, |x1, x2| {
        kernels[(x1 + x2) as usize].tail(x2, Tail::Lower, TailMode::Mid)
    });
    let mask = vec![true; v.len()];
    Ok(SampleSpaceOrdering::from_values(
        n1,
        n2,
        v,
        mask,
        "Fisher one-sided mid-p",
        Sidedness::OneSided,
    ))
}

/// Ordering by the sample estimate of the measure, restricted to the
/// informative set, with ties broken by the pooled Wald Z. For the
/// difference this is [`order_diff_tiebreak`].
pub fn order_estimate(n1: u32, n2: u32, measure: EffectMeasure) -> Result<SampleSpaceOrdering> {
    check_sizes(n1, n2)?;
    let v = tabulate(n1, n2, |x1, x2| match measure {
        EffectMeasure::Difference => difference_statistic(x1, n1, x2, n2),
        m => TwoByTwoData { x1, n1, x2, n2 }.estimate(m),
    });
    let z = tabulate(n1, n2, |x1, x2| pooled_z(x1, n1, x2, n2));
    Ok(SampleSpaceOrdering::from_keys(
        n1,
        n2,
        v,
        &z,
        informative_mask(n1, n2, measure),
        format!("estimate ({measure}) with tie-break"),
    ))
}

/// Exhaustively verifies Barnard's convexity conditions over the
/// informative points: rank is nondecreasing in `x2` for fixed `x1` and
/// nonincreasing in `x1` for fixed `x2`.
pub fn check_bc(o: &SampleSpaceOrdering) -> std::result::Result<(), BcViolation> {
    for x1 in 0..=o.n1 {
        for a in 0..=o.n2 {
            let Some(ra) = o.rank(x1, a) else { continue };
            for b in a + 1..=o.n2 {
                if let Some(rb) = o.rank(x1, b) {
                    if rb < ra {
                        return Err(BcViolation {
                            lower: (x1, a),
                            higher: (x1, b),
                        });
                    }
                }
            }
        }
    }
    for x2 in 0..=o.n2 {
        for a in 0..=o.n1 {
            let Some(ra) = o.rank(a, x2) else { continue };
            for b in a + 1..=o.n1 {
                if let Some(rb) = o.rank(b, x2) {
                    // Smaller x1 must rank at least as high.
                    if ra < rb {
                        return Err(BcViolation {
                            lower: (b, x2),
                            higher: (a, x2),
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

/// True when `fine` keeps every strict inequality of `coarse`.
pub fn is_refinement(fine: &SampleSpaceOrdering, coarse: &SampleSpaceOrdering) -> Result<bool> {
    if fine.n1 != coarse.n1 || fine.n2 != coarse.n2 {
        return domain("orderings have different sample spaces");
    }
    if fine.mask != coarse.mask {
        return domain("orderings have different informative sets");
    }
    let n = coarse.n_ranks as usize;
    let mut lo = vec![u32::MAX; n];
    let mut hi = vec![0u32; n];
    for (c, f) in coarse.rank_ids.iter().zip(&fine.rank_ids) {
        if *c == MASKED_RANK {
            continue;
        }
        let c = *c as usize;
        lo[c] = lo[c].min(*f);
        hi[c] = hi[c].max(*f);
    }
    Ok((1..n).all(|k| hi[k - 1] < lo[k]))
}
