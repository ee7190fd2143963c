//! Reports and their JSON, CSV and text renderings.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use serde_json::Value;

use twobinom::{round_sig, EffectMeasure, TwoByTwoData};

use crate::args::Format;

/// A real printed with at most 10 significant digits. Non-finite values
/// are written as the strings `"Inf"`, `"-Inf"` and `"NaN"`.
#[derive(Debug, Clone, Copy)]
pub struct Real(pub f64);

impl Real {
    pub fn new(v: f64) -> Self {
        Real(round_sig(v, 10))
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0 || (self.0.is_nan() && other.0.is_nan())
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(round_sig(v, 10))
        } else if v.is_nan() {
            s.serialize_str("NaN")
        } else if v > 0.0 {
            s.serialize_str("Inf")
        } else {
            s.serialize_str("-Inf")
        }
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct RealVisitor;

        impl Visitor<'_> for RealVisitor {
            type Value = Real;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or one of \"Inf\", \"-Inf\", \"NaN\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Real, E> {
                Ok(Real(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Real, E> {
                Ok(Real(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Real, E> {
                Ok(Real(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Real, E> {
                match v {
                    "Inf" => Ok(Real(f64::INFINITY)),
                    "-Inf" => Ok(Real(f64::NEG_INFINITY)),
                    "NaN" => Ok(Real(f64::NAN)),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }

        d.deserialize_any(RealVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableOut {
    pub x1: u32,
    pub n1: u32,
    pub x2: u32,
    pub n2: u32,
}

impl From<&TwoByTwoData> for TableOut {
    fn from(d: &TwoByTwoData) -> Self {
        Self {
            x1: d.x1,
            n1: d.n1,
            x2: d.x2,
            n2: d.n2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub method: String,
    pub measure: EffectMeasure,
    pub table: TableOut,
    pub alternative: String,
    pub beta0: Real,
    pub estimate: Real,
    pub p_value: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiReport {
    pub method: String,
    pub measure: EffectMeasure,
    pub table: TableOut,
    pub level: Real,
    pub estimate: Real,
    pub lower: Real,
    pub upper: Real,
    pub central: bool,
    pub holes_filled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub method: String,
    pub measure: EffectMeasure,
    pub table: TableOut,
    pub level: Real,
    pub intervals: Vec<[Real; 2]>,
    pub hull_lower: Real,
    pub hull_upper: Real,
    pub holes_filled: bool,
    pub grid_resolution: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub checked: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseReport {
    pub method: String,
    pub measure: EffectMeasure,
    pub table: TableOut,
    pub beta0: Real,
    pub level: Real,
    pub estimate: Real,
    pub estimate_clamped: bool,
    pub lower: Real,
    pub upper: Real,
    pub p_less: Real,
    pub p_greater: Real,
    pub p_two_sided: Real,
    pub decision: String,
    /// `None` when the p-value function exists only at the equality null.
    pub compatibility: Option<CheckSummary>,
    pub coherence_less: Option<CheckSummary>,
    pub coherence_greater: Option<CheckSummary>,
    pub nestedness: CheckSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub method: String,
    pub measure: EffectMeasure,
    pub n1: u32,
    pub n2: u32,
    pub alpha: Real,
    pub alternative: String,
    pub theta1: Real,
    pub theta2: Real,
    pub power: Real,
    pub rejection_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub method: String,
    pub measure: EffectMeasure,
    pub n1: u32,
    pub n2: u32,
    pub alpha: Real,
    pub alternative: String,
    pub beta0: Real,
    pub size: Real,
    pub theta1: Real,
    pub theta2: Real,
    pub grid_size: Real,
    pub grid_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandsOut {
    pub within_band: Real,
    pub above_band: Real,
    pub below_band: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub method: String,
    pub measure: EffectMeasure,
    pub n1: u32,
    pub n2: u32,
    pub alpha: Real,
    pub alternative: String,
    pub max: Real,
    pub min: Real,
    /// Band fractions, reported for power differences only.
    pub bands: Option<BandsOut>,
    pub theta: Vec<Real>,
    /// Rows follow `theta1`, columns `theta2`.
    pub values: Vec<Vec<Real>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Report {
    Test(TestReport),
    Ci(CiReport),
    Region(RegionReport),
    Diagnose(DiagnoseReport),
    Power(PowerReport),
    Size(SizeReport),
    Sweep(SweepReport),
}

impl Report {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).unwrap_or_default();
                s.push('\n');
                s
            }
            Format::Text => {
                let mut s = String::new();
                for (k, v) in self.fields() {
                    s.push_str(&format!("{k}: {v}\n"));
                }
                s
            }
            Format::Csv => match self {
                Report::Sweep(r) => sweep_csv(r),
                _ => {
                    let (keys, vals): (Vec<_>, Vec<_>) = self.fields().into_iter().unzip();
                    let row = |v: Vec<String>| {
                        v.iter().map(|s| csv_field(s)).collect::<Vec<_>>().join(",")
                    };
                    format!("{}\n{}\n", row(keys), row(vals))
                }
            },
        }
    }

    /// Scalar fields with dotted keys, in JSON order. The sweep matrix is
    /// left to the CSV rendering.
    fn fields(&self) -> Vec<(String, String)> {
        let v = serde_json::to_value(self).unwrap_or(Value::Null);
        let mut out = Vec::new();
        flatten("", &v, &mut out);
        out
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                if prefix.is_empty() && (k == "values" || k == "theta") {
                    continue;
                }
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, x, out);
            }
        }
        other => out.push((prefix.to_string(), scalar(other))),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "none".into(),
        Value::Array(items) => {
            let sep = if items.iter().any(Value::is_array) {
                "; "
            } else {
                " "
            };
            items.iter().map(scalar).collect::<Vec<_>>().join(sep)
        }
        other => other.to_string(),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn num(r: &Real) -> String {
    serde_json::to_string(r)
        .unwrap_or_default()
        .trim_matches('"')
        .to_string()
}

/// Matrix with a header row of `theta2` values and `theta1` in the first
/// column.
fn sweep_csv(r: &SweepReport) -> String {
    let mut s = String::from("theta1\\theta2");
    for t in &r.theta {
        s.push(',');
        s.push_str(&num(t));
    }
    s.push('\n');
    for (t1, row) in r.theta.iter().zip(&r.values) {
        s.push_str(&num(t1));
        for v in row {
            s.push(',');
            s.push_str(&num(v));
        }
        s.push('\n');
    }
    s
}
