//! Command-line front end: parses a request, runs it and renders a report.

pub mod args;
pub mod report;
pub mod request;

use thiserror::Error;

use twobinom::methods::Method;
use twobinom::opchar::{
    exact_size, power_grid, power_surface, rejection_set, GridSpec, RejectionCache,
};
use twobinom::triples::{
    check_coherence, check_compatibility, check_nestedness, confidence_region, default_beta_grid,
    matching_ci, three_decision, BetaGrid, CompatibilityReport,
};
use twobinom::{Alternative, EffectMeasure, Error, TwoByTwoData};

use report::{
    BandsOut, CheckSummary, CiReport, DiagnoseReport, PowerReport, Real, RegionReport, Report,
    SizeReport, SweepReport, TestReport,
};
use request::{Request, RequestSpec};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid request: {0}")]
    Validation(String),
    #[error("compute budget exceeded: {0}")]
    Budget(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Budget(_) => 3,
        }
    }
}

fn is_budget(e: &Error) -> bool {
    match e {
        Error::Budget(_) => true,
        Error::PValue { source, .. } => is_budget(source),
        _ => false,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if is_budget(&e) {
            CliError::Budget(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

fn alt_name(a: Alternative) -> String {
    match a {
        Alternative::Less => "less",
        Alternative::Greater => "greater",
        _ => "two-sided",
    }
    .to_string()
}

/// Levels compared by the nestedness check.
const NESTED_LEVELS: [f64; 4] = [0.8, 0.9, 0.95, 0.99];
/// Levels at which compatibility is checked.
const COMPAT_ALPHAS: [f64; 3] = [0.01, 0.05, 0.1];

/// Runs a validated request.
pub fn run(spec: &RequestSpec) -> Result<Report, CliError> {
    Ok(match &spec.request {
        Request::Test {
            table,
            method,
            alternative,
            beta0,
        } => {
            let p = method.pvalue(table, *beta0, *alternative)?;
            Report::Test(TestReport {
                method: method.descriptor(),
                measure: method.measure(),
                table: table.into(),
                alternative: alt_name(*alternative),
                beta0: Real::new(*beta0),
                estimate: Real::new(table.estimate(method.measure())),
                p_value: Real::new(p),
            })
        }
        Request::Ci {
            table,
            method,
            level,
        } => {
            let ci = method.ci(table, *level)?;
            let (est, _) =
                twobinom::triples::clamp_estimate(table.estimate(method.measure()), &ci.ci);
            Report::Ci(CiReport {
                method: method.descriptor(),
                measure: method.measure(),
                table: table.into(),
                level: Real::new(*level),
                estimate: Real::new(est),
                lower: Real::new(ci.ci.lower),
                upper: Real::new(ci.ci.upper),
                central: ci.ci.central,
                holes_filled: ci.holes_filled,
            })
        }
        Request::Region {
            table,
            method,
            level,
        } => region(table, method, *level)?,
        Request::Diagnose {
            table,
            method,
            beta0,
            level,
            check_points,
        } => diagnose(table, method, *beta0, *level, *check_points)?,
        Request::Power {
            design,
            method,
            theta1,
            theta2,
        } => {
            let set = rejection_set(
                method,
                design.n1,
                design.n2,
                design.alpha,
                method.measure().null_value(),
                design.alternative,
            )?;
            Report::Power(PowerReport {
                method: method.descriptor(),
                measure: method.measure(),
                n1: design.n1,
                n2: design.n2,
                alpha: Real::new(design.alpha),
                alternative: alt_name(design.alternative),
                theta1: Real::new(*theta1),
                theta2: Real::new(*theta2),
                power: Real::new(set.power(*theta1, *theta2)),
                rejection_count: set.count(),
            })
        }
        Request::Size {
            design,
            method,
            beta0,
            boundary_points,
        } => {
            let s = exact_size(
                method,
                design.n1,
                design.n2,
                design.alpha,
                *beta0,
                design.alternative,
                *boundary_points,
            )?;
            Report::Size(SizeReport {
                method: method.descriptor(),
                measure: method.measure(),
                n1: design.n1,
                n2: design.n2,
                alpha: Real::new(design.alpha),
                alternative: alt_name(design.alternative),
                beta0: Real::new(*beta0),
                size: Real::new(s.size),
                theta1: Real::new(s.theta1),
                theta2: Real::new(s.theta2),
                grid_size: Real::new(s.grid_size),
                grid_points: s.grid_points,
            })
        }
        Request::Sweep {
            design,
            method,
            compare,
            grid,
        } => {
            let cache = RejectionCache::new();
            let spec = GridSpec { points: *grid };
            let (n1, n2, alpha, alt) = (design.n1, design.n2, design.alpha, design.alternative);
            let g = match compare {
                Some(b) => power_grid(method, b, n1, n2, alpha, alt, spec, &cache)?,
                None => power_surface(method, n1, n2, alpha, alt, spec, &cache)?,
            };
            let s = g.summary();
            Report::Sweep(SweepReport {
                method: g.method.clone(),
                measure: method.measure(),
                n1,
                n2,
                alpha: Real::new(alpha),
                alternative: alt_name(alt),
                max: Real::new(s.max),
                min: Real::new(s.min),
                bands: compare.as_ref().map(|_| BandsOut {
                    within_band: Real::new(s.within_band),
                    above_band: Real::new(s.above_band),
                    below_band: Real::new(s.below_band),
                }),
                theta: g.theta1_grid.iter().map(|&t| Real::new(t)).collect(),
                values: g
                    .values
                    .iter()
                    .map(|r| r.iter().map(|&v| Real::new(v)).collect())
                    .collect(),
            })
        }
    })
}

fn two_sided_pvalue(method: &Method, table: &TwoByTwoData, b: f64) -> twobinom::Result<f64> {
    twobinom::triples::Procedure::pvalue(method, table, b)
}

fn region(table: &TwoByTwoData, method: &Method, level: f64) -> Result<Report, CliError> {
    let grid = default_beta_grid(table, method.measure(), 1.0 - level)?;
    let pfun = |b: f64| two_sided_pvalue(method, table, b);
    let r = confidence_region(&pfun, level, &grid)?;
    let m = matching_ci(&r)?;
    Ok(Report::Region(RegionReport {
        method: method.descriptor(),
        measure: method.measure(),
        table: table.into(),
        level: Real::new(level),
        intervals: r
            .intervals
            .iter()
            .map(|&(l, u)| [Real::new(l), Real::new(u)])
            .collect(),
        hull_lower: Real::new(m.ci.lower),
        hull_upper: Real::new(m.ci.upper),
        holes_filled: m.holes_filled,
        grid_resolution: Real::new(r.grid_resolution),
    }))
}

/// `Unsupported` p-values (conditional methods away from the equality null)
/// make a check inapplicable rather than failing the request.
fn optional<T>(r: twobinom::Result<T>) -> Result<Option<T>, CliError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Unsupported(_)) => Ok(None),
        Err(Error::PValue { source, .. }) if matches!(*source, Error::Unsupported(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn check_grid(
    table: &TwoByTwoData,
    measure: EffectMeasure,
    points: usize,
) -> Result<BetaGrid, CliError> {
    let wide = default_beta_grid(table, measure, 0.05)?;
    let (lo, hi) = match measure {
        EffectMeasure::Difference => (-0.99, 0.99),
        _ => (wide.points[0], wide.points[wide.points.len() - 1]),
    };
    Ok(BetaGrid::new(measure, lo, hi, points)?)
}

fn diagnose(
    table: &TwoByTwoData,
    method: &Method,
    beta0: f64,
    level: f64,
    points: usize,
) -> Result<Report, CliError> {
    let measure = method.measure();
    let result = method.infer(table, beta0, level)?;
    let decision = three_decision(&result, 1.0 - level);
    let grid = check_grid(table, measure, points)?;
    let compat: Option<CompatibilityReport> = optional(check_compatibility(
        method,
        table,
        &COMPAT_ALPHAS,
        &grid.points,
    ))?;
    let coherence = |alt: Alternative| -> Result<Option<CheckSummary>, CliError> {
        let pfun = |b: f64| method.pvalue(table, b, alt);
        let r = optional(check_coherence(&pfun, table, measure, &grid.points, alt))?;
        Ok(r.map(|r| CheckSummary {
            checked: r.pvalues.len().saturating_sub(1),
            violations: r.violations.len(),
        }))
    };
    let nested = check_nestedness(method, table, &NESTED_LEVELS)?;
    Ok(Report::Diagnose(DiagnoseReport {
        method: method.descriptor(),
        measure,
        table: table.into(),
        beta0: Real::new(beta0),
        level: Real::new(level),
        estimate: Real::new(result.estimate),
        estimate_clamped: result.estimate_clamped,
        lower: Real::new(result.ci.lower),
        upper: Real::new(result.ci.upper),
        p_less: Real::new(result.p_less),
        p_greater: Real::new(result.p_greater),
        p_two_sided: Real::new(result.p_two_sided),
        decision: serde_json::to_value(decision.decision)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default(),
        compatibility: compat.map(|c| CheckSummary {
            checked: c.checked,
            violations: c.violations.len(),
        }),
        coherence_less: coherence(Alternative::Less)?,
        coherence_greater: coherence(Alternative::Greater)?,
        nestedness: CheckSummary {
            checked: nested.intervals.len(),
            violations: nested.violations.len(),
        },
    }))
}

pub use args::Cli;
