use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Default or standard solution window with per-site residuals.
    Abmn(AbmnArgs),
    /// Maximal Mina margin on a (kappa, rho) grid, or the low-margin locus along rho.
    LambdaMax(LambdaArgs),
    /// Finite-window Mina margin scan and its roots.
    Margin(MarginArgs),
    /// ODE-pair profiles f, g, a, b with the flow and the drift.
    Ode(OdeArgs),
    /// Monte Carlo play, the limiting diffusion, or the scaled-stake check.
    Simulate(SimArgs),
    /// Run the command described by a JSON file (same shape as a manifest's `command`).
    #[serde(skip)]
    Run(RunArgs),
    /// Re-run a manifest and compare output digests.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbmnArgs {
    #[arg(long)]
    pub kappa: f64,
    #[arg(long)]
    pub rho: f64,
    /// Central ratio phi_0.
    #[arg(long)]
    pub x: f64,
    #[arg(long, default_value_t = 40)]
    pub half_len: usize,
    /// Normalise to m_{-inf} = 0, m_{+inf} = 1.
    #[arg(long)]
    pub standard: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaFigure {
    /// rho -> lambda_max(1, rho) on (0.8, 1).
    Kappaisone,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaArgs {
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub kappa: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub rho: Vec<f64>,
    #[arg(long, default_value_t = 512)]
    pub mesh: usize,
    /// Relative tail tolerance for each margin.
    #[arg(long, default_value_t = 1e-15)]
    pub tol: f64,
    #[arg(long, value_enum)]
    pub figure: Option<LambdaFigure>,
    /// Scan kappa at the single rho given and locate the dip of lambda_max - 1.
    #[arg(long)]
    pub locus: bool,
    #[arg(long, default_value_t = 0.75)]
    pub kappa_lo: f64,
    #[arg(long, default_value_t = 0.95)]
    pub kappa_hi: f64,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarginFigure {
    /// kappa = 0.9, rho = 1, j = k = 9 on (1, 145] with roots.
    Mmm,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginArgs {
    #[arg(long, default_value_t = 0.9)]
    pub kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 9)]
    pub j: usize,
    #[arg(long, default_value_t = 9)]
    pub k: usize,
    /// Scan range (x_lo, x_hi], log-uniform.
    #[arg(long, default_value_t = 1.0)]
    pub x_lo: f64,
    #[arg(long, default_value_t = 145.0)]
    pub x_hi: f64,
    #[arg(long, default_value_t = 2000)]
    pub points: usize,
    /// Also locate the roots of M - 1.
    #[arg(long)]
    pub roots: bool,
    /// Mesh used to bracket roots.
    #[arg(long, default_value_t = 20_000)]
    pub root_mesh: usize,
    #[arg(long, value_enum)]
    pub figure: Option<MarginFigure>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OdeFigure {
    /// rho = x = 1 on [-3, 3].
    Odepair,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeArgs {
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 1.0)]
    pub x: f64,
    #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
    pub r_lo: f64,
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    pub r_hi: f64,
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, value_enum)]
    pub figure: Option<OdeFigure>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMode {
    Tlp,
    Sde,
    ScaledCheck,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimArgs {
    #[arg(long, value_enum, default_value = "tlp")]
    pub mode: SimMode,
    #[arg(long, default_value_t = 0.5)]
    pub kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 1.0)]
    pub x: f64,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub start: i64,
    #[arg(long, default_value_t = 10_000)]
    pub paths: u64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub escape_radius: i64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_turns: u64,
    #[arg(long, default_value_t = 80)]
    pub half_len: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub z0: f64,
    #[arg(long, default_value_t = 5.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long)]
    pub zero_drift: bool,
    #[arg(long)]
    pub antithetic: bool,
    /// In tlp mode, also write one CSV row per path.
    #[arg(long)]
    #[serde(default)]
    pub dump_paths: bool,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.025")]
    pub kappas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "-1,0.5,2", allow_hyphen_values = true)]
    pub us: Vec<f64>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArgs {
    pub config: PathBuf,
}
