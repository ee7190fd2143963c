//! Exact and approximate inference for the difference, ratio and odds ratio
//! of two independent binomial proportions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod conditional;
pub mod distributions;
pub mod error;
pub mod melded;
pub mod methods;
pub mod numeric;
pub mod opchar;
pub mod orderings;
pub mod table;
pub mod triples;
pub mod unconditional;

pub use boundary::NullBoundary;
pub use error::{Error, Result};
pub use table::{Alternative, ConfidenceInterval, EffectMeasure, Hypothesis, TwoByTwoData};

/// Formats a real with up to 10 significant digits, trimming trailing zeros.
pub fn fmt_sig(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".into()
        } else if v > 0.0 {
            "Inf".into()
        } else {
            "-Inf".into()
        };
    }
    format!("{}", round_sig(v, 10))
}

/// Rounds to `digits` significant decimal digits.
pub fn round_sig(v: f64, digits: i32) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let s = format!("{:.*e}", (digits - 1) as usize, v);
    s.parse().unwrap_or(v)
}
