//! Validated requests built from the parsed arguments.

use twobinom::methods::{Method, MethodConfig, MethodKind};
use twobinom::unconditional::BoschlooVariant;
use twobinom::{Alternative, EffectMeasure, TwoByTwoData};

use crate::args::{
    AlternativeArg, Cli, Command, DesignArgs, Format, MethodArgs, TableArgs, VariantArg,
};
use crate::CliError;

/// Largest grid accepted by `sweep`, per axis.
pub const MAX_SWEEP_GRID: usize = 999;

#[derive(Debug, Clone)]
pub enum Request {
    Test {
        table: TwoByTwoData,
        method: Method,
        alternative: Alternative,
        beta0: f64,
    },
    Ci {
        table: TwoByTwoData,
        method: Method,
        level: f64,
    },
    Region {
        table: TwoByTwoData,
        method: Method,
        level: f64,
    },
    Diagnose {
        table: TwoByTwoData,
        method: Method,
        beta0: f64,
        level: f64,
        check_points: usize,
    },
    Power {
        design: Design,
        method: Method,
        theta1: f64,
        theta2: f64,
    },
    Size {
        design: Design,
        method: Method,
        beta0: f64,
        boundary_points: usize,
    },
    Sweep {
        design: Design,
        method: Method,
        compare: Option<Method>,
        grid: usize,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct Design {
    pub n1: u32,
    pub n2: u32,
    pub alpha: f64,
    pub alternative: Alternative,
}

#[derive(Debug, Clone)]
pub struct RequestSpec {
    pub request: Request,
    pub format: Format,
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Validation(msg.into()))
}

fn alternative(a: AlternativeArg) -> Alternative {
    match a {
        AlternativeArg::Less => Alternative::Less,
        AlternativeArg::Greater => Alternative::Greater,
        AlternativeArg::TwoSided => Alternative::TwoSidedMinlike,
    }
}

fn table(t: &TableArgs) -> Result<TwoByTwoData, CliError> {
    Ok(TwoByTwoData::new(t.x1, t.n1, t.x2, t.n2)?)
}

fn method(m: &MethodArgs) -> Result<Method, CliError> {
    let kind: MethodKind = m.method.parse()?;
    let measure: EffectMeasure = m.measure.parse()?;
    let variant = match m.boschloo_variant {
        VariantArg::Irwin => BoschlooVariant::Irwin,
        VariantArg::Central => BoschlooVariant::Central,
        VariantArg::Onesided => BoschlooVariant::OneSided,
    };
    let mut cfg = MethodConfig::new(kind, measure)
        .with_mid_p(m.midp)
        .with_berger_boos(m.berger_boos)
        .with_em(m.em)
        .with_boschloo_variant(variant);
    cfg.grid_points = m.grid_points;
    Ok(Method::new(cfg)?)
}

fn level(l: f64) -> Result<f64, CliError> {
    if !(l > 0.0 && l < 1.0) {
        return invalid(format!("level {l} must lie in (0, 1)"));
    }
    Ok(l)
}

fn beta0(m: &Method, b: Option<f64>) -> Result<f64, CliError> {
    let b = b.unwrap_or(m.measure().null_value());
    m.measure().check_null(b)?;
    Ok(b)
}

fn cells(n1: u32, n2: u32) -> usize {
    (n1 as usize + 1) * (n2 as usize + 1)
}

/// Unconditional methods enumerate the whole sample space for every
/// p-value.
fn check_table_budget(m: &Method, t: &TwoByTwoData, max_cells: usize) -> Result<(), CliError> {
    let c = cells(t.n1, t.n2);
    if m.kind().is_unconditional() && c > max_cells {
        return Err(CliError::Budget(format!(
            "{} over {c} tables exceeds --max-cells {max_cells}",
            m.kind()
        )));
    }
    Ok(())
}

fn design(d: &DesignArgs, max_cells: usize) -> Result<Design, CliError> {
    if d.n1 == 0 || d.n2 == 0 {
        return invalid("n1 and n2 must be at least 1");
    }
    if !(d.alpha > 0.0 && d.alpha < 1.0) {
        return invalid(format!("alpha {} must lie in (0, 1)", d.alpha));
    }
    let c = cells(d.n1, d.n2);
    if c > max_cells {
        return Err(CliError::Budget(format!(
            "sample space of {c} tables exceeds --max-cells {max_cells}"
        )));
    }
    Ok(Design {
        n1: d.n1,
        n2: d.n2,
        alpha: d.alpha,
        alternative: alternative(d.alternative),
    })
}

fn theta(t: f64, name: &str) -> Result<f64, CliError> {
    if !(0.0..=1.0).contains(&t) {
        return invalid(format!("{name} = {t} must lie in [0, 1]"));
    }
    Ok(t)
}

impl RequestSpec {
    pub fn from_cli(cli: &Cli) -> Result<Self, CliError> {
        let (request, output) = match &cli.command {
            Command::Test(a) => {
                let t = table(&a.table)?;
                let m = method(&a.method)?;
                check_table_budget(&m, &t, a.output.max_cells)?;
                let alt = alternative(a.alternative);
                if alt == Alternative::TwoSidedMinlike && m.kind() == MethodKind::FisherOnesided {
                    return invalid("fisher-onesided needs --alternative less or greater");
                }
                let b = beta0(&m, a.beta0)?;
                (
                    Request::Test {
                        table: t,
                        method: m,
                        alternative: alt,
                        beta0: b,
                    },
                    &a.output,
                )
            }
            Command::Ci(a) | Command::Region(a) => {
                let t = table(&a.table)?;
                let m = method(&a.method)?;
                check_table_budget(&m, &t, a.output.max_cells)?;
                let l = level(a.level)?;
                let r = if matches!(cli.command, Command::Ci(_)) {
                    Request::Ci {
                        table: t,
                        method: m,
                        level: l,
                    }
                } else {
                    Request::Region {
                        table: t,
                        method: m,
                        level: l,
                    }
                };
                (r, &a.output)
            }
            Command::Diagnose(a) => {
                let t = table(&a.table)?;
                let m = method(&a.method)?;
                check_table_budget(&m, &t, a.output.max_cells)?;
                if a.check_points < 2 {
                    return invalid("--check-points must be at least 2");
                }
                let b = beta0(&m, a.beta0)?;
                (
                    Request::Diagnose {
                        table: t,
                        method: m,
                        beta0: b,
                        level: level(a.level)?,
                        check_points: a.check_points,
                    },
                    &a.output,
                )
            }
            Command::Power(a) => (
                Request::Power {
                    design: design(&a.design, a.output.max_cells)?,
                    method: method(&a.method)?,
                    theta1: theta(a.theta1, "theta1")?,
                    theta2: theta(a.theta2, "theta2")?,
                },
                &a.output,
            ),
            Command::Size(a) => {
                let m = method(&a.method)?;
                if a.boundary_points < 3 {
                    return invalid("--boundary-points must be at least 3");
                }
                (
                    Request::Size {
                        design: design(&a.design, a.output.max_cells)?,
                        beta0: beta0(&m, a.beta0)?,
                        method: m,
                        boundary_points: a.boundary_points,
                    },
                    &a.output,
                )
            }
            Command::Sweep(a) => {
                let m = method(&a.method)?;
                let compare = match &a.compare {
                    Some(id) => {
                        let kind: MethodKind = id.parse()?;
                        Some(Method::new(MethodConfig::new(kind, m.measure()))?)
                    }
                    None => None,
                };
                if a.grid == 0 {
                    return invalid("--grid must be at least 1");
                }
                if a.grid > MAX_SWEEP_GRID {
                    return Err(CliError::Budget(format!(
                        "--grid {} exceeds the limit of {MAX_SWEEP_GRID} points per axis",
                        a.grid
                    )));
                }
                (
                    Request::Sweep {
                        design: design(&a.design, a.output.max_cells)?,
                        method: m,
                        compare,
                        grid: a.grid,
                    },
                    &a.output,
                )
            }
        };
        Ok(Self {
            request,
            format: output.format,
        })
    }
}
