//! The null boundary `{theta : b(theta) = beta0}` and constrained maximum
//! likelihood on it.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numeric::golden_max;
use crate::table::{EffectMeasure, TwoByTwoData};

/// The curve `b(theta1, theta2) = beta0`, parameterized by `theta1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullBoundary {
    pub measure: EffectMeasure,
    pub beta0: f64,
}

impl NullBoundary {
    pub fn new(measure: EffectMeasure, beta0: f64) -> Result<Self> {
        measure.check_null(beta0)?;
        Ok(Self { measure, beta0 })
    }

    pub fn equality(measure: EffectMeasure) -> Self {
        Self {
            measure,
            beta0: measure.null_value(),
        }
    }

    /// Admissible `theta1` values.
    pub fn theta1_range(&self) -> (f64, f64) {
        let b = self.beta0;
        match self.measure {
            EffectMeasure::Difference => ((-b).max(0.0), (1.0 - b).min(1.0)),
            EffectMeasure::Ratio => (0.0, (1.0 / b).min(1.0)),
            EffectMeasure::OddsRatio => (0.0, 1.0),
        }
    }

    pub fn theta2(&self, theta1: f64) -> f64 {
        let b = self.beta0;
        let t = match self.measure {
            EffectMeasure::Difference => theta1 + b,
            EffectMeasure::Ratio => b * theta1,
            EffectMeasure::OddsRatio => {
                let den = 1.0 + theta1 * (b - 1.0);
                if den <= 0.0 {
                    1.0
                } else {
                    b * theta1 / den
                }
            }
        };
        t.clamp(0.0, 1.0)
    }

    /// Inverse of [`theta2`](Self::theta2) on the admissible range.
    pub fn theta1_for_theta2(&self, theta2: f64) -> f64 {
        let b = self.beta0;
        let t = match self.measure {
            EffectMeasure::Difference => theta2 - b,
            EffectMeasure::Ratio => theta2 / b,
            EffectMeasure::OddsRatio => {
                let den = b + theta2 * (1.0 - b);
                if den <= 0.0 {
                    1.0
                } else {
                    theta2 / den
                }
            }
        };
        let (lo, hi) = self.theta1_range();
        t.clamp(lo, hi)
    }

    /// Uniform grid of `points` values of `theta1` over the admissible range.
    pub fn grid(&self, points: usize) -> Vec<f64> {
        let (lo, hi) = self.theta1_range();
        uniform_grid(lo, hi, points)
    }
}

pub(crate) fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 || hi <= lo {
        return vec![0.5 * (lo + hi)];
    }
    let step = (hi - lo) / (points - 1) as f64;
    (0..points)
        .map(|i| {
            if i == points - 1 {
                hi
            } else {
                lo + step * i as f64
            }
        })
        .collect()
}

/// Binomial log-likelihood of the table at `(theta1, theta2)`, with `0 ln 0 = 0`.
pub fn log_likelihood(data: &TwoByTwoData, theta1: f64, theta2: f64) -> f64 {
    fn part(x: u32, n: u32, t: f64) -> f64 {
        let s = if x > 0 { x as f64 * t.ln() } else { 0.0 };
        let f = if n > x {
            (n - x) as f64 * (-t).ln_1p()
        } else {
            0.0
        };
        s + f
    }
    part(data.x1, data.n1, theta1) + part(data.x2, data.n2, theta2)
}

/// Maximum likelihood estimate of `(theta1, theta2)` restricted to the null
/// boundary.
///
/// Closed forms: Farrington-Manning's cubic for the difference, the
/// Farrington-Manning quadratic for the ratio, and for the odds ratio the
/// quadratic from the margin equation `n1 theta1 + n2 theta2 = x1 + x2`.
pub fn constrained_mle(data: &TwoByTwoData, boundary: &NullBoundary) -> (f64, f64) {
    let closed = match boundary.measure {
        EffectMeasure::Difference => mle_difference(data, boundary.beta0),
        EffectMeasure::Ratio => mle_ratio(data, boundary.beta0),
        EffectMeasure::OddsRatio => mle_odds_ratio(data, boundary.beta0),
    };
    let (lo, hi) = boundary.theta1_range();
    match closed {
        Some(t1) if t1.is_finite() && t1 >= lo - 1e-12 && t1 <= hi + 1e-12 => {
            let t1 = t1.clamp(lo, hi);
            (t1, boundary.theta2(t1))
        }
        _ => constrained_mle_numeric(data, boundary),
    }
}

/// Direct maximization of the (concave) boundary log-likelihood.
pub fn constrained_mle_numeric(data: &TwoByTwoData, boundary: &NullBoundary) -> (f64, f64) {
    let (lo, hi) = boundary.theta1_range();
    let (t1, _) = golden_max(lo, hi, 1e-13, |t| {
        log_likelihood(data, t, boundary.theta2(t))
    });
    (t1, boundary.theta2(t1))
}

fn mle_difference(data: &TwoByTwoData, delta: f64) -> Option<f64> {
    // Farrington-Manning with group A = group 2, group B = group 1 and
    // delta = thetaA - thetaB.
    let pa = data.theta2_hat();
    let pb = data.theta1_hat();
    let theta = data.n1 as f64 / data.n2 as f64;
    let a = 1.0 + theta;
    let b = -(1.0 + theta + pa + theta * pb + delta * (theta + 2.0));
    let c = delta * delta + delta * (2.0 * pa + theta + 1.0) + pa + theta * pb;
    let d = -pa * delta * (1.0 + delta);
    let v = b.powi(3) / (27.0 * a.powi(3)) - b * c / (6.0 * a * a) + d / (2.0 * a);
    let u2 = b * b / (9.0 * a * a) - c / (3.0 * a);
    if u2 <= 0.0 {
        return None;
    }
    let u = if v < 0.0 { -u2.sqrt() } else { u2.sqrt() };
    let w = (std::f64::consts::PI + (v / u.powi(3)).clamp(-1.0, 1.0).acos()) / 3.0;
    let ta = 2.0 * u * w.cos() - b / (3.0 * a);
    Some(ta - delta)
}

fn mle_ratio(data: &TwoByTwoData, rho: f64) -> Option<f64> {
    let (x1, n1, x2, n2) = (
        data.x1 as f64,
        data.n1 as f64,
        data.x2 as f64,
        data.n2 as f64,
    );
    let s = x1 + x2;
    if s == 0.0 {
        return Some(0.0);
    }
    let a = (n1 + n2) * rho;
    let b = -(rho * (n2 + x1) + x2 + n1);
    let disc = b * b - 4.0 * a * s;
    if disc < 0.0 {
        return None;
    }
    // Smaller root, in the stable form 2c / (-b + sqrt(disc)).
    Some(2.0 * s / (-b + disc.sqrt()))
}

fn mle_odds_ratio(data: &TwoByTwoData, psi: f64) -> Option<f64> {
    let (n1, n2) = (data.n1 as f64, data.n2 as f64);
    let s = data.total() as f64;
    if s == 0.0 {
        return Some(0.0);
    }
    if s == n1 + n2 {
        return Some(1.0);
    }
    let a = n1 * (psi - 1.0);
    let b = n1 + n2 * psi - s * (psi - 1.0);
    let c = -s;
    if a.abs() < 1e-14 * b.abs().max(1.0) {
        return Some(-c / b);
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let roots = [q / a, c / q];
    roots
        .into_iter()
        .filter(|r| r.is_finite() && (-1e-12..=1.0 + 1e-12).contains(r))
        .min_by(|x, y| (x - 0.5).abs().total_cmp(&(y - 0.5).abs()))
}
