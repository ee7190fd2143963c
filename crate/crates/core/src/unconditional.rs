//! Exact unconditional p-values and confidence limits.
//!
//! For an ordering `T` the one-sided p-value is the supremum over the null of
//! the probability of tables at least as extreme as the observed one. For
//! orderings satisfying Barnard's convexity conditions the supremum is
//! attained on the null boundary, which is searched on a uniform grid in
//! `theta1` followed by golden-section refinement around the largest local
//! maxima. The refined value is a lower bound on the true supremum; the gain
//! from refinement is reported as a grid-resolution diagnostic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{constrained_mle, uniform_grid, NullBoundary};
use crate::conditional::{fisher_central, fisher_irwin};
use crate::distributions::{clopper_pearson, BinomialTable, ConditionalKernel, Tail, TailMode};
use crate::error::{Error, Result};
use crate::numeric::{bisect_predicate, golden_max};
use crate::orderings::{SampleSpaceOrdering, Sidedness};
use crate::table::{Alternative, ConfidenceInterval, EffectMeasure, Hypothesis, TwoByTwoData};
use crate::triples::{confidence_region, default_beta_grid, from_search, ConfidenceRegion};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnconditionalOptions {
    /// Berger-Boos: restrict the supremum to a `1 - gamma` confidence set
    /// for the nuisance parameter and add `gamma`.
    pub berger_boos_gamma: Option<f64>,
    /// Rounds of estimate-and-maximize (0 or 1).
    pub em_iterations: u32,
    /// Count ties with the observed table at half weight.
    pub mid_p: bool,
    /// Points of the uniform boundary grid.
    pub grid_points: usize,
    /// Golden-section refinement around the top local maxima.
    pub refine: bool,
    pub refine_tol: f64,
    /// Points per axis of the grid used when the whole null region must be
    /// searched.
    pub region_grid: usize,
    /// Search the whole null region even for certified orderings.
    pub force_region_search: bool,
}

impl Default for UnconditionalOptions {
    fn default() -> Self {
        Self {
            berger_boos_gamma: None,
            em_iterations: 0,
            mid_p: false,
            grid_points: 1001,
            refine: true,
            refine_tol: 1e-6,
            region_grid: 101,
            force_region_search: false,
        }
    }
}

impl UnconditionalOptions {
    pub fn validate(&self) -> Result<()> {
        if let Some(g) = self.berger_boos_gamma {
            if !(g > 0.0 && g < 1.0) {
                return Err(Error::Domain(format!(
                    "Berger-Boos gamma {g} not in (0, 1)"
                )));
            }
        }
        if self.em_iterations > 1 {
            return Err(Error::Unsupported(
                "only one estimate-and-maximize round is implemented".into(),
            ));
        }
        if self.grid_points < 3 || self.region_grid < 3 {
            return Err(Error::Domain("search grids need at least 3 points".into()));
        }
        Ok(())
    }
}

/// Location and value of a boundary supremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupResult {
    pub value: f64,
    pub theta1: f64,
    pub theta2: f64,
    /// Largest value seen on the grid alone.
    pub grid_value: f64,
}

impl SupResult {
    /// Increase obtained by refining between grid points.
    pub fn refinement_gain(&self) -> f64 {
        self.value - self.grid_value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValueDetail {
    pub p: f64,
    /// `None` when the p-value is fixed without a search (masked table or
    /// empty Berger-Boos set).
    pub sup: Option<SupResult>,
    /// The observed table is outside the informative set.
    pub masked: bool,
    /// The whole null region was searched.
    pub region_search: bool,
    /// Boundary `theta1` interval used by Berger-Boos.
    pub berger_boos_set: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    /// Tables ranked at or below the observed one.
    Lower,
    /// Tables ranked at or above the observed one.
    Upper,
}

fn direction(hyp: &Hypothesis, o: &SampleSpaceOrdering) -> Result<Direction> {
    match (hyp.alternative, o.sidedness()) {
        (Alternative::Less, Sidedness::OneSided) => Ok(Direction::Lower),
        (Alternative::Greater, Sidedness::OneSided) => Ok(Direction::Upper),
        (a, Sidedness::TwoSided) if !a.is_one_sided() => Ok(Direction::Lower),
        (a, s) => Err(Error::Domain(format!(
            "alternative {a:?} cannot be used with a {s:?} ordering ({})",
            o.name()
        ))),
    }
}

/// Tables in a tail, as weighted runs of consecutive `x2` per row.
#[derive(Debug, Clone)]
struct TailSet {
    runs: Vec<(u32, u32, u32, f64)>,
}

impl TailSet {
    fn new(o: &SampleSpaceOrdering, rank: u32, dir: Direction, mid: bool) -> Self {
        let tie_w = if mid { 0.5 } else { 1.0 };
        let mut runs = Vec::new();
        for x1 in 0..=o.n1() {
            let mut cur: Option<(u32, u32, f64)> = None;
            for x2 in 0..=o.n2() {
                let w = match o.rank(x1, x2) {
                    None => 0.0,
                    Some(r) if r == rank => tie_w,
                    Some(r) => match dir {
                        Direction::Lower if r < rank => 1.0,
                        Direction::Upper if r > rank => 1.0,
                        _ => 0.0,
                    },
                };
                match cur {
                    Some((s, _, cw)) if cw == w => cur = Some((s, x2, cw)),
                    _ => {
                        if let Some((s, e, cw)) = cur {
                            if cw > 0.0 {
                                runs.push((x1, s, e, cw));
                            }
                        }
                        cur = Some((x2, x2, w));
                    }
                }
            }
            if let Some((s, e, cw)) = cur {
                if cw > 0.0 {
                    runs.push((x1, s, e, cw));
                }
            }
        }
        Self { runs }
    }

    fn prob(&self, b1: &[f64], c2: &[f64]) -> f64 {
        self.runs
            .iter()
            .map(|&(x1, s, e, w)| w * b1[x1 as usize] * (c2[e as usize + 1] - c2[s as usize]))
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone)]
struct Kernel {
    t1: BinomialTable,
    t2: BinomialTable,
}

impl Kernel {
    fn new(n1: u32, n2: u32) -> Self {
        Self {
            t1: BinomialTable::new(n1),
            t2: BinomialTable::new(n2),
        }
    }

    fn prob(&self, set: &TailSet, theta1: f64, theta2: f64) -> f64 {
        let b1 = self.t1.pmf(theta1);
        let b2 = self.t2.pmf(theta2);
        set.prob(&b1, &prefix(&b2))
    }
}

fn prefix(v: &[f64]) -> Vec<f64> {
    let mut c = Vec::with_capacity(v.len() + 1);
    let mut acc = 0.0;
    c.push(0.0);
    for x in v {
        acc += x;
        c.push(acc);
    }
    c
}

/// Supremum of `f(theta1, theta2(theta1))` over `theta1` in `range`.
fn sup_on_boundary<F>(
    f: F,
    bd: &NullBoundary,
    range: (f64, f64),
    opts: &UnconditionalOptions,
) -> SupResult
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let grid = uniform_grid(range.0, range.1, opts.grid_points);
    let vals: Vec<f64> = grid.par_iter().map(|&t| f(t, bd.theta2(t))).collect();
    let (mut gi, mut gv) = (0, f64::NEG_INFINITY);
    for (i, &v) in vals.iter().enumerate() {
        if v > gv {
            gi = i;
            gv = v;
        }
    }
    let mut best = SupResult {
        value: gv,
        theta1: grid[gi],
        theta2: bd.theta2(grid[gi]),
        grid_value: gv,
    };
    if !opts.refine || grid.len() < 3 {
        return best;
    }
    let n = vals.len();
    let mut peaks: Vec<usize> = (0..n)
        .filter(|&i| (i == 0 || vals[i] >= vals[i - 1]) && (i + 1 == n || vals[i] >= vals[i + 1]))
        .collect();
    peaks.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    peaks.truncate(3);
    for i in peaks {
        let lo = grid[i.saturating_sub(1)];
        let hi = grid[(i + 1).min(n - 1)];
        let (t, v) = golden_max(lo, hi, opts.refine_tol, |t| f(t, bd.theta2(t)));
        if v > best.value {
            best.value = v;
            best.theta1 = t;
            best.theta2 = bd.theta2(t);
        }
    }
    best
}

/// Grid over the part of the unit square where the null holds.
fn null_region_points(
    hyp: &Hypothesis,
    dir: Direction,
    points: usize,
    rect: Option<((f64, f64), (f64, f64))>,
) -> Vec<(f64, f64)> {
    let axis = uniform_grid(0.0, 1.0, points);
    let mut out = Vec::new();
    for &t1 in &axis {
        for &t2 in &axis {
            if let Some(((a1, b1), (a2, b2))) = rect {
                if t1 < a1 || t1 > b1 || t2 < a2 || t2 > b2 {
                    continue;
                }
            }
            let b = hyp.measure.eval(t1, t2);
            if b.is_nan() {
                continue;
            }
            let inside = match dir {
                Direction::Upper => b <= hyp.beta0,
                Direction::Lower => b >= hyp.beta0,
            };
            if inside {
                out.push((t1, t2));
            }
        }
    }
    out
}

/// Berger-Boos nuisance set on the boundary, as an interval of `theta1`: the
/// part of the boundary inside the product of the two `sqrt(1 - gamma)`
/// Clopper-Pearson intervals. `None` means the set misses the boundary.
pub fn berger_boos_set(
    data: &TwoByTwoData,
    bd: &NullBoundary,
    gamma: f64,
) -> Result<Option<(f64, f64)>> {
    let (lo, hi) = bd.theta1_range();
    let ((l1, u1), (l2, u2)) = berger_boos_rectangle(data, gamma)?;
    let a = bd.theta1_for_theta2(l2).max(l1).max(lo);
    let b = bd.theta1_for_theta2(u2).min(u1).min(hi);
    if a > b {
        return Ok(None);
    }
    let eps = 1e-12;
    if bd.theta2(a) > u2 + eps || bd.theta2(b) < l2 - eps {
        return Ok(None);
    }
    Ok(Some((a, b)))
}

fn berger_boos_rectangle(data: &TwoByTwoData, gamma: f64) -> Result<((f64, f64), (f64, f64))> {
    let conf = (1.0 - gamma).sqrt();
    Ok((
        clopper_pearson(data.x1, data.n1, conf)?,
        clopper_pearson(data.x2, data.n2, conf)?,
    ))
}

fn check_data(data: &TwoByTwoData, o: &SampleSpaceOrdering) -> Result<()> {
    TwoByTwoData::new(data.x1, data.n1, data.x2, data.n2)?;
    if data.n1 != o.n1() || data.n2 != o.n2() {
        return Err(Error::Domain(format!(
            "table {data} does not match the ordering's sample sizes ({}, {})",
            o.n1(),
            o.n2()
        )));
    }
    Ok(())
}

/// Unconditional p-value with search diagnostics.
pub fn uncond_pvalue_detail(
    data: &TwoByTwoData,
    hyp: &Hypothesis,
    ordering: &SampleSpaceOrdering,
    opts: &UnconditionalOptions,
) -> Result<PValueDetail> {
    opts.validate()?;
    check_data(data, ordering)?;
    hyp.measure.check_null(hyp.beta0)?;
    if opts.em_iterations == 1 {
        let em = em_ordering(hyp, ordering, opts)?;
        let base = UnconditionalOptions {
            em_iterations: 0,
            ..*opts
        };
        return uncond_pvalue_detail(data, hyp, &em, &base);
    }
    let dir = direction(hyp, ordering)?;
    let Some(rank) = ordering.rank(data.x1, data.x2) else {
        return Ok(PValueDetail {
            p: 1.0,
            sup: None,
            masked: true,
            region_search: false,
            berger_boos_set: None,
        });
    };
    let set = TailSet::new(ordering, rank, dir, opts.mid_p);
    let kernel = Kernel::new(data.n1, data.n2);
    let bd = NullBoundary::new(hyp.measure, hyp.beta0)?;
    let gamma = opts.berger_boos_gamma.unwrap_or(0.0);
    let range = match opts.berger_boos_gamma {
        Some(g) => match berger_boos_set(data, &bd, g)? {
            Some(r) => Some(r),
            None => {
                return Ok(PValueDetail {
                    p: g,
                    sup: None,
                    masked: false,
                    region_search: false,
                    berger_boos_set: None,
                })
            }
        },
        None => None,
    };
    let f = |t1: f64, t2: f64| kernel.prob(&set, t1, t2);
    let mut sup = sup_on_boundary(f, &bd, range.unwrap_or(bd.theta1_range()), opts);
    let region_search =
        hyp.alternative.is_one_sided() && (opts.force_region_search || !ordering.bc_certified());
    if region_search {
        let rect = match opts.berger_boos_gamma {
            Some(g) => Some(berger_boos_rectangle(data, g)?),
            None => None,
        };
        let pts = null_region_points(hyp, dir, opts.region_grid, rect);
        if let Some((v, (t1, t2))) = pts
            .par_iter()
            .map(|&(t1, t2)| (f(t1, t2), (t1, t2)))
            .reduce_with(|a, b| if b.0 > a.0 { b } else { a })
        {
            if v > sup.value {
                sup.value = v;
                sup.theta1 = t1;
                sup.theta2 = t2;
            }
        }
    }
    Ok(PValueDetail {
        p: (sup.value + gamma).min(1.0),
        sup: Some(sup),
        masked: false,
        region_search,
        berger_boos_set: range,
    })
}

/// One-sided unconditional p-value; `hyp.alternative` must be `Less` or
/// `Greater` and the ordering one-sided.
pub fn uncond_pvalue_onesided(
    data: &TwoByTwoData,
    hyp: &Hypothesis,
    ordering: &SampleSpaceOrdering,
    opts: &UnconditionalOptions,
) -> Result<f64> {
    if !hyp.alternative.is_one_sided() {
        return Err(Error::Domain(
            "one-sided p-value needs alternative less or greater".into(),
        ));
    }
    Ok(uncond_pvalue_detail(data, hyp, ordering, opts)?.p)
}

/// Two-sided unconditional p-value from a two-sided ordering (smaller values
/// more extreme).
pub fn uncond_pvalue_twosided(
    data: &TwoByTwoData,
    hyp: &Hypothesis,
    ordering: &SampleSpaceOrdering,
    opts: &UnconditionalOptions,
) -> Result<f64> {
    if hyp.alternative.is_one_sided() {
        return Err(Error::Domain(
            "two-sided p-value needs a two-sided alternative".into(),
        ));
    }
    Ok(uncond_pvalue_detail(data, hyp, ordering, opts)?.p)
}

/// Central p-value `min(1, 2 p_less, 2 p_greater)` from a one-sided
/// ordering.
pub fn uncond_pvalue_central(
    data: &TwoByTwoData,
    measure: EffectMeasure,
    beta0: f64,
    ordering: &SampleSpaceOrdering,
    opts: &UnconditionalOptions,
) -> Result<f64> {
    let less = Hypothesis::new(measure, beta0, Alternative::Less)?;
    let greater = Hypothesis::new(measure, beta0, Alternative::Greater)?;
    let pl = uncond_pvalue_onesided(data, &less, ordering, opts)?;
    let pg = uncond_pvalue_onesided(data, &greater, ordering, opts)?;
    Ok((2.0 * pl.min(pg)).min(1.0))
}

/// p-values of every table at once, indexed like the ordering.
///
/// Tail probabilities of all ranks are accumulated in one sorted pass per
/// grid point, so the cost is `O(N G)` rather than `O(N^2 G)`. Tables whose
/// grid p-value is at most `refine_below` are recomputed with the
/// single-table refinement.
pub fn pvalue_table(
    hyp: &Hypothesis,
    ordering: &SampleSpaceOrdering,
    opts: &UnconditionalOptions,
    refine_below: Option<f64>,
) -> Result<Vec<f64>> {
    opts.validate()?;
    hyp.measure.check_null(hyp.beta0)?;
    if opts.em_iterations == 1 {
        let em = em_ordering(hyp, ordering, opts)?;
        let base = UnconditionalOptions {
            em_iterations: 0,
            ..*opts
        };
        return pvalue_table(hyp, &em, &base, refine_below);
    }
    let dir = direction(hyp, ordering)?;
    let (n1, n2) = (ordering.n1(), ordering.n2());
    let bd = NullBoundary::new(hyp.measure, hyp.beta0)?;
    let mut thetas: Vec<(f64, f64)> = bd
        .grid(opts.grid_points)
        .into_iter()
        .map(|t| (t, bd.theta2(t)))
        .collect();
    let region_search =
        hyp.alternative.is_one_sided() && (opts.force_region_search || !ordering.bc_certified());
    let n_boundary = thetas.len();
    if region_search {
        thetas.extend(null_region_points(hyp, dir, opts.region_grid, None));
    }
    let n_ranks = ordering.n_ranks() as usize;
    let ranks = ordering.ranks();
    let t1 = BinomialTable::new(n1);
    let t2 = BinomialTable::new(n2);
    let w = n2 as usize + 1;
    let tails_at = |&(a, b): &(f64, f64)| -> Vec<f64> {
        let b1 = t1.pmf(a);
        let b2 = t2.pmf(b);
        let mut g = vec![0.0; n_ranks];
        for (i, &r) in ranks.iter().enumerate() {
            if r != crate::orderings::MASKED_RANK {
                g[r as usize] += b1[i / w] * b2[i % w];
            }
        }
        let mut tail = vec![0.0; n_ranks];
        let mut acc = 0.0;
        match dir {
            Direction::Lower => {
                for r in 0..n_ranks {
                    acc += g[r];
                    tail[r] = acc;
                }
            }
            Direction::Upper => {
                for r in (0..n_ranks).rev() {
                    acc += g[r];
                    tail[r] = acc;
                }
            }
        }
        if opts.mid_p {
            for r in 0..n_ranks {
                tail[r] -= 0.5 * g[r];
            }
        }
        for t in tail.iter_mut() {
            *t = t.clamp(0.0, 1.0);
        }
        tail
    };
    let cells = ranks.len();
    let mut p = vec![1.0; cells];
    match opts.berger_boos_gamma {
        None => {
            let max_tail = thetas
                .par_iter()
                .map(tails_at)
                .reduce_with(|mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x = x.max(y);
                    }
                    a
                })
                .unwrap_or_default();
            for (i, &r) in ranks.iter().enumerate() {
                if r != crate::orderings::MASKED_RANK {
                    p[i] = max_tail[r as usize];
                }
            }
        }
        Some(g) => {
            let table: Vec<Vec<f64>> = thetas.par_iter().map(tails_at).collect();
            for (i, &r) in ranks.iter().enumerate() {
                if r == crate::orderings::MASKED_RANK {
                    continue;
                }
                let data = TwoByTwoData {
                    x1: (i / w) as u32,
                    n1,
                    x2: (i % w) as u32,
                    n2,
                };
                let set = berger_boos_set(&data, &bd, g)?;
                let rect = berger_boos_rectangle(&data, g)?;
                let mut best = 0.0_f64;
                for (k, &(a, b)) in thetas.iter().enumerate() {
                    let allowed = if k < n_boundary {
                        set.is_some_and(|(lo, hi)| a >= lo && a <= hi)
                    } else {
                        a >= rect.0 .0 && a <= rect.0 .1 && b >= rect.1 .0 && b <= rect.1 .1
                    };
                    if allowed {
                        best = best.max(table[k][r as usize]);
                    }
                }
                p[i] = (best + g).min(1.0);
            }
        }
    }
    if let (Some(limit), true) = (refine_below, opts.refine) {
        let todo: Vec<usize> = (0..cells)
            .filter(|&i| ranks[i] != crate::orderings::MASKED_RANK && p[i] <= limit)
            .collect();
        let refined: Vec<(usize, f64)> = todo
            .par_iter()
            .map(|&i| {
                let data = TwoByTwoData {
                    x1: (i / w) as u32,
                    n1,
                    x2: (i % w) as u32,
                    n2,
                };
                uncond_pvalue_detail(&data, hyp, ordering, opts).map(|d| (i, d.p))
            })
            .collect::<Result<_>>()?;
        for (i, v) in refined {
            p[i] = p[i].max(v);
        }
    }
    Ok(p)
}

/// Estimate-and-maximize ordering: each table is ranked by its plug-in
/// p-value under `base`, evaluated at the null-constrained MLE.
pub fn em_ordering(
    hyp: &Hypothesis,
    base: &SampleSpaceOrdering,
    opts: &UnconditionalOptions,
) -> Result<SampleSpaceOrdering> {
    let dir = direction(hyp, base)?;
    let bd = NullBoundary::new(hyp.measure, hyp.beta0)?;
    let (n1, n2) = (base.n1(), base.n2());
    let kernel = Kernel::new(n1, n2);
    let values: Vec<f64> = (0..base.n_cells())
        .into_par_iter()
        .map(|i| {
            let (x1, x2) = base.point(i);
            let Some(r) = base.rank(x1, x2) else {
                return f64::NAN;
            };
            let data = TwoByTwoData { x1, n1, x2, n2 };
            let (t1, t2) = constrained_mle(&data, &bd);
            let set = TailSet::new(base, r, dir, opts.mid_p);
            let p = kernel.prob(&set, t1, t2);
            match (dir, base.sidedness()) {
                (Direction::Upper, _) => -p,
                _ => p,
            }
        })
        .collect();
    Ok(SampleSpaceOrdering::from_values(
        n1,
        n2,
        values,
        base.mask().to_vec(),
        format!("E+M [{}]", base.name()),
        base.sidedness(),
    ))
}

/// Unconditional p-value after one estimate-and-maximize round.
pub fn em_adjust(
    data: &TwoByTwoData,
    hyp: &Hypothesis,
    ordering: &SampleSpaceOrdering,
    opts: &UnconditionalOptions,
) -> Result<f64> {
    let o = UnconditionalOptions {
        em_iterations: 1,
        ..*opts
    };
    Ok(uncond_pvalue_detail(data, hyp, ordering, &o)?.p)
}

/// Which Fisher p-value orders the sample space in Boschloo's test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoschlooVariant {
    /// Two-sided Fisher-Irwin p-value.
    Irwin,
    /// Central Fisher p-value.
    Central,
    /// One-sided Fisher p-value in the direction of the alternative.
    OneSided,
}

/// Ordering by a conditional Fisher p-value at odds ratio `psi`.
pub fn boschloo_ordering(
    n1: u32,
    n2: u32,
    psi: f64,
    variant: BoschlooVariant,
    alternative: Alternative,
    mode: TailMode,
) -> Result<SampleSpaceOrdering> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::Domain("group sizes must be at least 1".into()));
    }
    let one_sided = variant == BoschlooVariant::OneSided;
    if one_sided != alternative.is_one_sided() {
        return Err(Error::Domain(format!(
            "Boschloo variant {variant:?} does not match alternative {alternative:?}"
        )));
    }
    let kernels: Vec<_> = (0..=n1 + n2)
        .map(|s| ConditionalKernel::new(s, n1, n2).map(|k| k.at(psi)))
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(((n1 + 1) * (n2 + 1)) as usize);
    for x1 in 0..=n1 {
        for x2 in 0..=n2 {
            let d = TwoByTwoData { x1, n1, x2, n2 };
            let v = match variant {
                BoschlooVariant::Irwin => fisher_irwin(&d, psi, mode)?,
                BoschlooVariant::Central => fisher_central(&d, psi, mode)?,
                BoschlooVariant::OneSided => {
                    let k = &kernels[(x1 + x2) as usize];
                    match alternative {
                        Alternative::Greater => -k.tail(x2, Tail::Upper, mode),
                        _ => k.tail(x2, Tail::Lower, mode),
                    }
                }
            };
            values.push(v);
        }
    }
    let sidedness = if one_sided {
        Sidedness::OneSided
    } else {
        Sidedness::TwoSided
    };
    let mask = vec![true; values.len()];
    Ok(SampleSpaceOrdering::from_values(
        n1,
        n2,
        values,
        mask,
        format!("Fisher {variant:?} p-value (psi = {psi})").to_lowercase(),
        sidedness,
    ))
}

/// Boschloo's test: an unconditional test ordered by a Fisher p-value. The
/// ordering uses `psi = beta0` for the odds ratio and `psi = 1` otherwise.
pub fn boschloo(
    data: &TwoByTwoData,
    hyp: &Hypothesis,
    variant: BoschlooVariant,
    mode: TailMode,
    opts: &UnconditionalOptions,
) -> Result<f64> {
    let psi = if hyp.measure == EffectMeasure::OddsRatio {
        hyp.beta0
    } else {
        1.0
    };
    let o = boschloo_ordering(data.n1, data.n2, psi, variant, hyp.alternative, mode)?
        .restricted_to(hyp.measure);
    Ok(uncond_pvalue_detail(data, hyp, &o, opts)?.p)
}

/// Family of orderings used to invert a test into a confidence set.
#[derive(Clone, Copy)]
pub enum OrderingFamily<'a> {
    /// One ordering for every `beta0`.
    Fixed(&'a SampleSpaceOrdering),
    /// An ordering rebuilt for each `beta0` (score statistics, Boschloo at a
    /// general odds ratio).
    Indexed(&'a (dyn Fn(f64) -> Result<SampleSpaceOrdering> + Sync)),
}

impl OrderingFamily<'_> {
    fn at(&self, beta0: f64) -> Result<std::borrow::Cow<'_, SampleSpaceOrdering>> {
        match self {
            OrderingFamily::Fixed(o) => Ok(std::borrow::Cow::Borrowed(*o)),
            OrderingFamily::Indexed(f) => Ok(std::borrow::Cow::Owned(f(beta0)?)),
        }
    }
}

/// A confidence interval from test inversion, with the underlying region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncondCi {
    pub ci: ConfidenceInterval,
    /// Set of `beta0` not rejected; `None` when the limits were found by
    /// monotone root finding.
    pub region: Option<ConfidenceRegion>,
    /// The region had more than one piece, or a one-sided p-value function
    /// was found to be non-monotone.
    pub noncoherent: bool,
}

/// Limit of `{beta0 : p(beta0) > alpha}` for a monotone one-sided p-value.
fn monotone_limit<F>(measure: EffectMeasure, lower: bool, alpha: f64, p: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let (lo, hi) = if measure.is_log_scale() {
        (-30.0, 30.0)
    } else {
        (-1.0 + 1e-12, 1.0 - 1e-12)
    };
    let keep = |s: f64| -> Result<bool> {
        let b = from_search(measure, s);
        p(b).map(|v| v > alpha).map_err(|e| Error::PValue {
            beta0: b,
            source: Box::new(e),
        })
    };
    let (range_lo, range_hi) = measure.range();
    if lower {
        // p_greater grows with beta0.
        if keep(lo)? {
            return Ok(range_lo);
        }
        if !keep(hi)? {
            return Ok(range_hi);
        }
    } else {
        // p_less shrinks with beta0.
        if keep(hi)? {
            return Ok(range_hi);
        }
        if !keep(lo)? {
            return Ok(range_lo);
        }
    }
    let mut err = None;
    let s = bisect_predicate(lo, hi, 1e-10, |s| match keep(s) {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            false
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(from_search(measure, s)),
    }
}

/// How a two-sided interval is formed from the tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiConstruction {
    /// Two one-sided limits, each at `(1 - level) / 2`.
    Central,
    /// All `beta0` not rejected by a two-sided test at `1 - level`.
    TwoSidedInversion,
}

/// Unconditional confidence interval by test inversion.
///
/// A fixed certified ordering gives monotone one-sided p-values, so central
/// limits are found by bisection. Indexed families, two-sided inversion and
/// uncertified orderings are evaluated on a `beta0` grid and the region is
/// reported together with its hull.
pub fn uncond_ci(
    data: &TwoByTwoData,
    measure: EffectMeasure,
    level: f64,
    family: OrderingFamily<'_>,
    construction: CiConstruction,
    opts: &UnconditionalOptions,
) -> Result<UncondCi> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!(
            "confidence level {level} not in (0, 1)"
        )));
    }
    TwoByTwoData::new(data.x1, data.n1, data.x2, data.n2)?;
    let alpha = 1.0 - level;
    let pfun = |alt: Alternative| {
        move |beta0: f64| -> Result<f64> {
            let hyp = Hypothesis::new(measure, beta0, alt)?;
            let o = family.at(beta0)?;
            uncond_pvalue_detail(data, &hyp, &o, opts).map(|d| d.p)
        }
    };
    match (construction, family) {
        (CiConstruction::Central, OrderingFamily::Fixed(o))
            if o.bc_certified() && opts.em_iterations == 0 && opts.berger_boos_gamma.is_none() =>
        {
            let lower = monotone_limit(measure, true, alpha / 2.0, pfun(Alternative::Greater))?;
            let upper = monotone_limit(measure, false, alpha / 2.0, pfun(Alternative::Less))?;
            Ok(UncondCi {
                ci: ConfidenceInterval {
                    lower,
                    upper,
                    level,
                    central: true,
                },
                region: None,
                noncoherent: false,
            })
        }
        (CiConstruction::Central, _) => {
            let grid = default_beta_grid(data, measure, alpha)?;
            let pg = pfun(Alternative::Greater);
            let pl = pfun(Alternative::Less);
            let region_g = confidence_region(&pg, 1.0 - alpha / 2.0, &grid)?;
            let region_l = confidence_region(&pl, 1.0 - alpha / 2.0, &grid)?;
            let region = region_g.intersect(&region_l, level);
            let noncoherent = region_g.intervals.len() > 1
                || region_l.intervals.len() > 1
                || region.intervals.len() > 1;
            let hull = region
                .hull()
                .ok_or_else(|| Error::Domain("empty confidence region".into()))?;
            Ok(UncondCi {
                ci: ConfidenceInterval {
                    lower: hull.0,
                    upper: hull.1,
                    level,
                    central: true,
                },
                region: Some(region),
                noncoherent,
            })
        }
        (CiConstruction::TwoSidedInversion, _) => {
            let grid = default_beta_grid(data, measure, alpha)?;
            let p = pfun(Alternative::TwoSidedMinlike);
            let region = confidence_region(&p, level, &grid)?;
            let hull = region
                .hull()
                .ok_or_else(|| Error::Domain("empty confidence region".into()))?;
            Ok(UncondCi {
                ci: ConfidenceInterval {
                    lower: hull.0,
                    upper: hull.1,
                    level,
                    central: false,
                },
                noncoherent: region.intervals.len() > 1,
                region: Some(region),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orderings::{order_diff, order_diff_tiebreak, order_estimate, order_wald_pooled};

    fn t(x1: u32, n1: u32, x2: u32, n2: u32) -> TwoByTwoData {
        TwoByTwoData::new(x1, n1, x2, n2).unwrap()
    }

    #[test]
    fn extreme_point_closed_form() {
        let o = order_diff(4, 4).unwrap();
        let h = Hypothesis::equality(EffectMeasure::Difference, Alternative::Less);
        let p = uncond_pvalue_onesided(&t(4, 4, 0, 4), &h, &o, &Default::default()).unwrap();
        assert!((p - 0.5_f64.powi(8)).abs() < 1e-10, "{p}");
    }

    #[test]
    fn masked_points_have_unit_pvalue() {
        let o = order_estimate(5, 5, EffectMeasure::Ratio).unwrap();
        let h = Hypothesis::new(EffectMeasure::Ratio, 2.0, Alternative::Less).unwrap();
        let d = uncond_pvalue_detail(&t(0, 5, 0, 5), &h, &o, &Default::default()).unwrap();
        assert_eq!(d.p, 1.0);
        assert!(d.masked);
        let tab = pvalue_table(&h, &o, &Default::default(), None).unwrap();
        assert_eq!(tab[0], 1.0);
    }

    #[test]
    fn table_matches_single_evaluations() {
        let o = order_diff_tiebreak(6, 5).unwrap();
        let opts = UnconditionalOptions::default();
        for alt in [Alternative::Less, Alternative::Greater] {
            let h = Hypothesis::new(EffectMeasure::Difference, 0.1, alt).unwrap();
            let tab = pvalue_table(&h, &o, &opts, Some(1.0)).unwrap();
            for x1 in 0..=6 {
                for x2 in 0..=5 {
                    let p = uncond_pvalue_onesided(&t(x1, 6, x2, 5), &h, &o, &opts).unwrap();
                    let q = tab[o.index(x1, x2)];
                    assert!((p - q).abs() < 1e-12, "[{x1},{x2}] {p} vs {q}");
                }
            }
        }
    }

    #[test]
    fn alternative_and_ordering_must_agree() {
        let o = order_wald_pooled(4, 4).unwrap();
        let h = Hypothesis::equality(EffectMeasure::Difference, Alternative::TwoSidedCentral);
        assert!(uncond_pvalue_detail(&t(1, 4, 3, 4), &h, &o, &Default::default()).is_err());
    }

    #[test]
    fn berger_boos_adds_gamma() {
        let o = order_diff_tiebreak(8, 8).unwrap();
        let opts = UnconditionalOptions {
            berger_boos_gamma: Some(1e-3),
            ..Default::default()
        };
        let h = Hypothesis::equality(EffectMeasure::Difference, Alternative::Greater);
        for x2 in 0..=8 {
            let p = uncond_pvalue_onesided(&t(2, 8, x2, 8), &h, &o, &opts).unwrap();
            assert!(p >= 1e-3);
        }
        let bd = NullBoundary::new(EffectMeasure::Difference, 0.3).unwrap();
        let set = berger_boos_set(&t(0, 8, 8, 8), &bd, 1e-3).unwrap();
        assert!(set.is_some());
        let set = berger_boos_set(&t(8, 8, 0, 8), &bd, 1e-3).unwrap();
        assert!(set.is_none());
    }

    #[test]
    fn boschloo_extremes() {
        let d = t(4, 8, 4, 8);
        let h = Hypothesis::equality(EffectMeasure::OddsRatio, Alternative::TwoSidedMinlike);
        let p = boschloo(
            &d,
            &h,
            BoschlooVariant::Irwin,
            TailMode::Full,
            &Default::default(),
        )
        .unwrap();
        // every informative table is in the tail; the two masked corners are not
        let expected = 1.0 - 2.0 * 0.5f64.powi(16);
        assert!((p - expected).abs() < 1e-9, "{p}");
    }

    #[test]
    fn fixed_ordering_central_interval_brackets_estimate() {
        let o = order_diff_tiebreak(10, 10).unwrap();
        let d = t(3, 10, 8, 10);
        let ci = uncond_ci(
            &d,
            EffectMeasure::Difference,
            0.95,
            OrderingFamily::Fixed(&o),
            CiConstruction::Central,
            &Default::default(),
        )
        .unwrap();
        assert!(ci.ci.lower < 0.5 && 0.5 < ci.ci.upper, "{:?}", ci.ci);
        let h =
            Hypothesis::new(EffectMeasure::Difference, ci.ci.lower, Alternative::Greater).unwrap();
        let p = uncond_pvalue_onesided(&d, &h, &o, &Default::default()).unwrap();
        assert!((p - 0.025).abs() < 1e-6, "{p}");
    }
}
