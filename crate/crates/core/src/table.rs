//! Shared value types: the observed table, effect measures, hypotheses and
//! confidence intervals.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// An observed 2×2 table: `x1` successes out of `n1` in group 1 and `x2` out
/// of `n2` in group 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TwoByTwoData {
    pub x1: u32,
    pub n1: u32,
    pub x2: u32,
    pub n2: u32,
}

impl TwoByTwoData {
    pub fn new(x1: u32, n1: u32, x2: u32, n2: u32) -> Result<Self> {
        if n1 == 0 {
            return domain("n1 must be at least 1");
        }
        if n2 == 0 {
            return domain("n2 must be at least 1");
        }
        if x1 > n1 {
            return domain(format!("x1 = {x1} exceeds n1 = {n1}"));
        }
        if x2 > n2 {
            return domain(format!("x2 = {x2} exceeds n2 = {n2}"));
        }
        Ok(Self { x1, n1, x2, n2 })
    }

    pub fn theta1_hat(&self) -> f64 {
        self.x1 as f64 / self.n1 as f64
    }

    pub fn theta2_hat(&self) -> f64 {
        self.x2 as f64 / self.n2 as f64
    }

    /// Total successes `x1 + x2`.
    pub fn total(&self) -> u32 {
        self.x1 + self.x2
    }

    /// The table obtained by swapping success and failure labels in both
    /// groups.
    pub fn label_swapped(&self) -> Self {
        Self {
            x1: self.n1 - self.x1,
            n1: self.n1,
            x2: self.n2 - self.x2,
            n2: self.n2,
        }
    }

    /// The table obtained by exchanging the two groups.
    pub fn groups_swapped(&self) -> Self {
        Self {
            x1: self.x2,
            n1: self.n2,
            x2: self.x1,
            n2: self.n1,
        }
    }

    /// Sample value of the effect measure; `NaN` when undefined (0/0).
    pub fn estimate(&self, measure: EffectMeasure) -> f64 {
        let (x1, n1, x2, n2) = (
            self.x1 as f64,
            self.n1 as f64,
            self.x2 as f64,
            self.n2 as f64,
        );
        match measure {
            EffectMeasure::Difference => x2 / n2 - x1 / n1,
            EffectMeasure::Ratio => ratio(x2 * n1, x1 * n2),
            EffectMeasure::OddsRatio => ratio(x2 * (n1 - x1), x1 * (n2 - x2)),
        }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            f64::NAN
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

impl fmt::Display for TwoByTwoData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} vs {}/{}", self.x1, self.n1, self.x2, self.n2)
    }
}

/// Effect measure comparing group 2 with group 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectMeasure {
    /// `theta2 - theta1`
    Difference,
    /// `theta2 / theta1`
    Ratio,
    /// `theta2 (1 - theta1) / (theta1 (1 - theta2))`
    OddsRatio,
}

impl EffectMeasure {
    pub const ALL: [EffectMeasure; 3] = [
        EffectMeasure::Difference,
        EffectMeasure::Ratio,
        EffectMeasure::OddsRatio,
    ];

    /// Value of the measure at `theta1 == theta2`.
    pub fn null_value(self) -> f64 {
        match self {
            EffectMeasure::Difference => 0.0,
            _ => 1.0,
        }
    }

    /// Closed range of the parameter, `(beta_min, beta_max)`.
    pub fn range(self) -> (f64, f64) {
        match self {
            EffectMeasure::Difference => (-1.0, 1.0),
            _ => (0.0, f64::INFINITY),
        }
    }

    /// Ratio measures are handled on the log scale when searching.
    pub fn is_log_scale(self) -> bool {
        !matches!(self, EffectMeasure::Difference)
    }

    pub fn eval(self, theta1: f64, theta2: f64) -> f64 {
        match self {
            EffectMeasure::Difference => theta2 - theta1,
            EffectMeasure::Ratio => ratio(theta2, theta1),
            EffectMeasure::OddsRatio => ratio(theta2 * (1.0 - theta1), theta1 * (1.0 - theta2)),
        }
    }

    /// Checks that `beta0` lies strictly inside the parameter range.
    pub fn check_null(self, beta0: f64) -> Result<()> {
        let (lo, hi) = self.range();
        if !(beta0 > lo && beta0 < hi) {
            return domain(format!(
                "null value {beta0} outside the open range ({lo}, {hi}) of the {self}"
            ));
        }
        Ok(())
    }

    pub fn name(self) -> &'static str {
        match self {
            EffectMeasure::Difference => "difference",
            EffectMeasure::Ratio => "ratio",
            EffectMeasure::OddsRatio => "oddsratio",
        }
    }
}

impl fmt::Display for EffectMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EffectMeasure {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "difference" | "diff" => Ok(EffectMeasure::Difference),
            "ratio" => Ok(EffectMeasure::Ratio),
            "oddsratio" | "or" => Ok(EffectMeasure::OddsRatio),
            other => domain(format!(
                "unknown measure '{other}' (expected difference, ratio or oddsratio)"
            )),
        }
    }
}

/// Alternative hypothesis. `Less` tests `H0: beta >= beta0`, `Greater` tests
/// `H0: beta <= beta0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    Less,
    Greater,
    TwoSidedCentral,
    TwoSidedMinlike,
    TwoSidedBlaker,
}

impl Alternative {
    pub fn is_one_sided(self) -> bool {
        matches!(self, Alternative::Less | Alternative::Greater)
    }
}

/// A null hypothesis about an effect measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub measure: EffectMeasure,
    pub beta0: f64,
    pub alternative: Alternative,
}

impl Hypothesis {
    pub fn new(measure: EffectMeasure, beta0: f64, alternative: Alternative) -> Result<Self> {
        measure.check_null(beta0)?;
        Ok(Self {
            measure,
            beta0,
            alternative,
        })
    }

    /// Hypothesis at the equality null `theta1 == theta2`.
    pub fn equality(measure: EffectMeasure, alternative: Alternative) -> Self {
        Self {
            measure,
            beta0: measure.null_value(),
            alternative,
        }
    }

    pub fn is_equality(&self) -> bool {
        self.beta0 == self.measure.null_value()
    }
}

/// A confidence interval for an effect measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub central: bool,
}

impl ConfidenceInterval {
    pub fn contains(&self, beta: f64) -> bool {
        self.lower < beta && beta < self.upper
    }

    /// True when `self` is a subset of `other`.
    pub fn within(&self, other: &ConfidenceInterval) -> bool {
        other.lower <= self.lower && self.upper <= other.upper
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
}
