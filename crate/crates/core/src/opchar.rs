//! Exact operating characteristics: power, size, expected interval length
//! and grid sweeps, all by enumeration of the sample space.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::NullBoundary;
use crate::distributions::BinomialTable;
use crate::error::{Error, Result};
use crate::methods::{Method, MethodCi};
use crate::numeric::golden_max;
use crate::table::{Alternative, ConfidenceInterval, EffectMeasure, TwoByTwoData};

/// Width of the band within which two powers count as equal.
pub const POWER_BAND: f64 = 0.025;

/// Tables rejected at level `alpha`, indexed `x1 * (n2 + 1) + x2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionSet {
    pub n1: u32,
    pub n2: u32,
    pub reject: Vec<bool>,
}

impl RejectionSet {
    pub fn count(&self) -> usize {
        self.reject.iter().filter(|&&r| r).count()
    }

    pub fn contains(&self, x1: u32, x2: u32) -> bool {
        self.reject[(x1 * (self.n2 + 1) + x2) as usize]
    }

    /// Probability of rejection at `(theta1, theta2)`.
    pub fn power(&self, theta1: f64, theta2: f64) -> f64 {
        let b1 = BinomialTable::new(self.n1).pmf(theta1);
        let b2 = BinomialTable::new(self.n2).pmf(theta2);
        self.power_with(&b1, &b2)
    }

    fn power_with(&self, b1: &[f64], b2: &[f64]) -> f64 {
        let w = self.n2 as usize + 1;
        let mut s = 0.0;
        for (x1, p1) in b1.iter().enumerate() {
            let row = &self.reject[x1 * w..(x1 + 1) * w];
            let r: f64 = row
                .iter()
                .zip(b2)
                .filter(|(r, _)| **r)
                .map(|(_, p)| p)
                .sum();
            s += p1 * r;
        }
        s.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    method: String,
    n1: u32,
    n2: u32,
    alpha: u64,
    beta0: u64,
    alternative: Alternative,
}

/// Rejection sets keyed by method, sample sizes, `alpha`, `beta0` and
/// alternative.
#[derive(Debug, Default)]
pub struct RejectionCache {
    sets: Mutex<HashMap<CacheKey, Arc<RejectionSet>>>,
}

impl RejectionCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.sets.lock().map(|s| s.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(
        &self,
        method: &Method,
        n1: u32,
        n2: u32,
        alpha: f64,
        beta0: f64,
        alternative: Alternative,
    ) -> Result<Arc<RejectionSet>> {
        let key = CacheKey {
            method: format!("{:?}", method.config()),
            n1,
            n2,
            alpha: alpha.to_bits(),
            beta0: beta0.to_bits(),
            alternative,
        };
        if let Some(s) = self.sets.lock().ok().and_then(|m| m.get(&key).cloned()) {
            return Ok(s);
        }
        let set = Arc::new(rejection_set(method, n1, n2, alpha, beta0, alternative)?);
        if let Ok(mut m) = self.sets.lock() {
            m.insert(key, set.clone());
        }
        Ok(set)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha {alpha} not in [0, 1)")));
    }
    Ok(())
}

fn check_theta(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("probability {t} outside [0, 1]")));
    }
    Ok(())
}

/// Tables with p-value at most `alpha` for `H0` at `beta0` against
/// `alternative`.
pub fn rejection_set(
    method: &Method,
    n1: u32,
    n2: u32,
    alpha: f64,
    beta0: f64,
    alternative: Alternative,
) -> Result<RejectionSet> {
    check_alpha(alpha)?;
    if alpha == 0.0 {
        return Ok(RejectionSet {
            n1,
            n2,
            reject: vec![false; ((n1 + 1) * (n2 + 1)) as usize],
        });
    }
    let p = method.pvalue_map(n1, n2, beta0, alternative, Some(alpha))?;
    Ok(RejectionSet {
        n1,
        n2,
        reject: p.iter().map(|&v| v <= alpha).collect(),
    })
}

/// Exact power at `(theta1, theta2)`.
pub fn exact_power(
    method: &Method,
    n1: u32,
    n2: u32,
    theta1: f64,
    theta2: f64,
    alpha: f64,
    alternative: Alternative,
) -> Result<f64> {
    check_theta(theta1)?;
    check_theta(theta2)?;
    let set = rejection_set(
        method,
        n1,
        n2,
        alpha,
        method.measure().null_value(),
        alternative,
    )?;
    Ok(set.power(theta1, theta2))
}

/// Largest rejection probability over a null boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeResult {
    pub size: f64,
    pub theta1: f64,
    pub theta2: f64,
    /// Largest value on the grid alone; `size - grid_size` is the gain from
    /// refinement around the maximum.
    pub grid_size: f64,
    pub grid_points: usize,
}

/// Size on a rejection set: maximum over a uniform boundary grid followed by
/// golden-section refinement between the neighbours of the grid maximum.
pub fn size_of(set: &RejectionSet, boundary: &NullBoundary, grid_points: usize) -> SizeResult {
    let grid = boundary.grid(grid_points.max(3));
    let f = |t: f64| set.power(t, boundary.theta2(t));
    let vals: Vec<f64> = grid.par_iter().map(|&t| f(t)).collect();
    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    for (i, &v) in vals.iter().enumerate() {
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let lo = grid[best_i.saturating_sub(1)];
    let hi = grid[(best_i + 1).min(grid.len() - 1)];
    let (t, v) = golden_max(lo, hi, 1e-9, f);
    let (theta1, size) = if v > best {
        (t, v)
    } else {
        (grid[best_i], best)
    };
    SizeResult {
        size,
        theta1,
        theta2: boundary.theta2(theta1),
        grid_size: best,
        grid_points: grid.len(),
    }
}

/// Exact size of the level-`alpha` test of `beta0` over its null boundary.
pub fn exact_size(
    method: &Method,
    n1: u32,
    n2: u32,
    alpha: f64,
    beta0: f64,
    alternative: Alternative,
    boundary_points: usize,
) -> Result<SizeResult> {
    let set = rejection_set(method, n1, n2, alpha, beta0, alternative)?;
    let bd = NullBoundary::new(method.measure(), beta0)?;
    Ok(size_of(&set, &bd, boundary_points))
}

/// Uniform interior grid `i / (points + 1)`, `i = 1..=points`; 99 points
/// give `0.01, ..., 0.99`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points: usize,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        let m = self.points as f64 + 1.0;
        (1..=self.points).map(|i| i as f64 / m).collect()
    }
}

/// Values over a `(theta1, theta2)` grid; rows follow `theta1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingGrid {
    pub method: String,
    pub n1: u32,
    pub n2: u32,
    pub alpha: f64,
    pub theta1_grid: Vec<f64>,
    pub theta2_grid: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// Summary of a power-difference grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    pub max: f64,
    pub min: f64,
    /// Fraction of cells with `|difference| <= 0.025`.
    pub within_band: f64,
    pub above_band: f64,
    pub below_band: f64,
}

/// Position of a power difference relative to the `±0.025` band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Below,
    Within,
    Above,
}

pub fn band_of(diff: f64) -> Band {
    if diff > POWER_BAND {
        Band::Above
    } else if diff < -POWER_BAND {
        Band::Below
    } else {
        Band::Within
    }
}

impl OperatingGrid {
    /// CSV with a header row of `theta2` values and `theta1` in the first
    /// column.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("theta1\\theta2");
        for t in &self.theta2_grid {
            s.push(',');
            s.push_str(&crate::fmt_sig(*t));
        }
        s.push('\n');
        for (t1, row) in self.theta1_grid.iter().zip(&self.values) {
            s.push_str(&crate::fmt_sig(*t1));
            for v in row {
                s.push(',');
                s.push_str(&crate::fmt_sig(*v));
            }
            s.push('\n');
        }
        s
    }

    pub fn value_at(&self, theta1: f64, theta2: f64) -> Option<f64> {
        let i = nearest(&self.theta1_grid, theta1)?;
        let j = nearest(&self.theta2_grid, theta2)?;
        Some(self.values[i][j])
    }

    pub fn summary(&self) -> BandSummary {
        let all: Vec<f64> = self.values.iter().flatten().copied().collect();
        let n = all.len().max(1) as f64;
        let count = |b: Band| all.iter().filter(|&&v| band_of(v) == b).count() as f64 / n;
        BandSummary {
            max: all.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min: all.iter().copied().fold(f64::INFINITY, f64::min),
            within_band: count(Band::Within),
            above_band: count(Band::Above),
            below_band: count(Band::Below),
        }
    }
}

fn nearest(grid: &[f64], v: f64) -> Option<usize> {
    grid.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
        .map(|(i, _)| i)
}

/// Power of one method over a grid.
pub fn power_surface(
    method: &Method,
    n1: u32,
    n2: u32,
    alpha: f64,
    alternative: Alternative,
    grid: GridSpec,
    cache: &RejectionCache,
) -> Result<OperatingGrid> {
    let set = cache.get(
        method,
        n1,
        n2,
        alpha,
        method.measure().null_value(),
        alternative,
    )?;
    let thetas = grid.values();
    let t1 = BinomialTable::new(n1);
    let t2 = BinomialTable::new(n2);
    let b2: Vec<Vec<f64>> = thetas.iter().map(|&t| t2.pmf(t)).collect();
    let values = thetas
        .par_iter()
        .map(|&a| {
            let b1 = t1.pmf(a);
            b2.iter().map(|b| set.power_with(&b1, b)).collect()
        })
        .collect();
    Ok(OperatingGrid {
        method: method.descriptor(),
        n1,
        n2,
        alpha,
        theta1_grid: thetas.clone(),
        theta2_grid: thetas,
        values,
    })
}

/// Power of `a` minus power of `b` over a grid.
#[allow(clippy::too_many_arguments)]
pub fn power_grid(
    a: &Method,
    b: &Method,
    n1: u32,
    n2: u32,
    alpha: f64,
    alternative: Alternative,
    grid: GridSpec,
    cache: &RejectionCache,
) -> Result<OperatingGrid> {
    let pa = power_surface(a, n1, n2, alpha, alternative, grid, cache)?;
    let pb = power_surface(b, n1, n2, alpha, alternative, grid, cache)?;
    let values = pa
        .values
        .iter()
        .zip(&pb.values)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x - y).collect())
        .collect();
    Ok(OperatingGrid {
        method: format!("{} - {}", pa.method, pb.method),
        values,
        ..pa
    })
}

/// Expected interval length; infinite or unbounded endpoints of ratio
/// measures are truncated to `[1e-6, 1e6]` and flagged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedLength {
    pub length: f64,
    pub truncated: bool,
    /// Probability of covering the true value.
    pub coverage: f64,
}

/// Intervals for every table of the sample space.
pub fn interval_table(method: &Method, n1: u32, n2: u32, level: f64) -> Result<Vec<MethodCi>> {
    let cells: Vec<TwoByTwoData> = (0..=n1)
        .flat_map(|x1| (0..=n2).map(move |x2| TwoByTwoData { x1, n1, x2, n2 }))
        .collect();
    cells.par_iter().map(|d| method.ci(d, level)).collect()
}

/// Expected length and coverage of the matching interval at
/// `(theta1, theta2)`.
pub fn expected_ci_length(
    method: &Method,
    n1: u32,
    n2: u32,
    theta1: f64,
    theta2: f64,
    level: f64,
) -> Result<ExpectedLength> {
    let cis = interval_table(method, n1, n2, level)?;
    expected_length_from(&cis, method.measure(), n1, n2, theta1, theta2)
}

pub fn expected_length_from(
    cis: &[MethodCi],
    measure: EffectMeasure,
    n1: u32,
    n2: u32,
    theta1: f64,
    theta2: f64,
) -> Result<ExpectedLength> {
    check_theta(theta1)?;
    check_theta(theta2)?;
    let b1 = BinomialTable::new(n1).pmf(theta1);
    let b2 = BinomialTable::new(n2).pmf(theta2);
    let truth = measure.eval(theta1, theta2);
    let (cap_lo, cap_hi) = match measure {
        EffectMeasure::Difference => (-1.0, 1.0),
        _ => (1e-6, 1e6),
    };
    let mut length = 0.0;
    let mut coverage = 0.0;
    let mut truncated = false;
    let w = n2 as usize + 1;
    for (i, c) in cis.iter().enumerate() {
        let p = b1[i / w] * b2[i % w];
        let ConfidenceInterval { lower, upper, .. } = c.ci;
        let (l, u) = (lower.max(cap_lo), upper.min(cap_hi));
        if p > 0.0 && (l != lower || u != upper) {
            truncated = true;
        }
        length += p * (u - l).max(0.0);
        if lower <= truth && truth <= upper {
            coverage += p;
        }
    }
    Ok(ExpectedLength {
        length,
        truncated,
        coverage,
    })
}

/// How often a (typically mid-p) test keeps its nominal size over a set of
/// sample sizes and common success probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceSummary {
    pub scenarios: usize,
    pub at_or_below: usize,
    pub fraction: f64,
    pub alpha: f64,
}

/// Rejection probability at `theta1 = theta2 = theta` for every
/// `1 <= n1, n2 <= n_max` and every `theta` in `thetas`, compared with
/// `alpha`.
pub fn size_exceedance(
    method: &Method,
    n_max: u32,
    alpha: f64,
    alternative: Alternative,
    thetas: &[f64],
) -> Result<ExceedanceSummary> {
    let beta0 = method.measure().null_value();
    let pairs: Vec<(u32, u32)> = (1..=n_max)
        .flat_map(|a| (1..=n_max).map(move |b| (a, b)))
        .collect();
    let counts: Vec<(usize, usize)> = pairs
        .par_iter()
        .map(|&(n1, n2)| {
            let set = rejection_set(method, n1, n2, alpha, beta0, alternative)?;
            let ok = thetas.iter().filter(|&&t| set.power(t, t) <= alpha).count();
            Ok((thetas.len(), ok))
        })
        .collect::<Result<_>>()?;
    let scenarios: usize = counts.iter().map(|c| c.0).sum();
    let at_or_below: usize = counts.iter().map(|c| c.1).sum();
    Ok(ExceedanceSummary {
        scenarios,
        at_or_below,
        fraction: at_or_below as f64 / scenarios.max(1) as f64,
        alpha,
    })
}
