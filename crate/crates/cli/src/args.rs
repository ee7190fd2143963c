//! Command-line arguments.

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "twobinom",
    version,
    about = "Exact inference for two independent binomial samples"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// p-value of a test of beta = beta0
    Test(TestArgs),
    /// Matching confidence interval
    Ci(CiArgs),
    /// Confidence region traced from the two-sided p-value function
    Region(CiArgs),
    /// Compatibility, coherence and nestedness diagnostics for one table
    Diagnose(DiagnoseArgs),
    /// Exact power at one parameter point
    Power(PowerArgs),
    /// Exact size over the null boundary
    Size(SizeArgs),
    /// Power, or a power difference, over a (theta1, theta2) grid
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlternativeArg {
    Less,
    Greater,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Irwin,
    Central,
    Onesided,
}

#[derive(Debug, Clone, Args)]
pub struct TableArgs {
    /// Successes in group 1
    #[arg(long)]
    pub x1: u32,
    /// Size of group 1
    #[arg(long)]
    pub n1: u32,
    /// Successes in group 2
    #[arg(long)]
    pub x2: u32,
    /// Size of group 2
    #[arg(long)]
    pub n2: u32,
}

#[derive(Debug, Clone, Args)]
pub struct MethodArgs {
    /// Method identifier, e.g. fisher-irwin, melded, uncond-score, csm
    #[arg(long)]
    pub method: String,
    /// Effect measure: difference, ratio or oddsratio
    #[arg(long, default_value = "difference")]
    pub measure: String,
    /// Use mid-p tails
    #[arg(long)]
    pub midp: bool,
    /// Berger-Boos adjustment with this gamma
    #[arg(long, value_name = "GAMMA")]
    pub berger_boos: Option<f64>,
    /// One estimate-and-maximize round
    #[arg(long)]
    pub em: bool,
    /// Fisher p-value used by Boschloo's ordering
    #[arg(long, value_enum, default_value = "irwin")]
    pub boschloo_variant: VariantArg,
    /// Points of the nuisance-parameter grid
    #[arg(long, default_value_t = 1001)]
    pub grid_points: usize,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Largest sample space (number of tables) an unconditional method or
    /// sweep may enumerate
    #[arg(long, default_value_t = 250_000)]
    pub max_cells: usize,
}

#[derive(Debug, Clone, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub table: TableArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long, value_enum, default_value = "two-sided")]
    pub alternative: AlternativeArg,
    /// Null value beta0; defaults to the equality null
    #[arg(long = "null")]
    pub beta0: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CiArgs {
    #[command(flatten)]
    pub table: TableArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub table: TableArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long = "null")]
    pub beta0: Option<f64>,
    /// Level of the reported interval; the decision rule uses 1 - level
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Points of the beta0 grid used by the checks
    #[arg(long, default_value_t = 41)]
    pub check_points: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DesignArgs {
    #[arg(long)]
    pub n1: u32,
    #[arg(long)]
    pub n2: u32,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "two-sided")]
    pub alternative: AlternativeArg,
}

#[derive(Debug, Clone, Args)]
pub struct PowerArgs {
    #[command(flatten)]
    pub design: DesignArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long)]
    pub theta1: f64,
    #[arg(long)]
    pub theta2: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SizeArgs {
    #[command(flatten)]
    pub design: DesignArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long = "null")]
    pub beta0: Option<f64>,
    /// Points of the boundary grid before refinement
    #[arg(long, default_value_t = 201)]
    pub boundary_points: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub design: DesignArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Subtract the power of this method (same measure, no modifiers)
    #[arg(long)]
    pub compare: Option<String>,
    /// Grid points per axis, at i / (points + 1)
    #[arg(long, default_value_t = 25)]
    pub grid: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}
