use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mbp_core::charfunc::Param;
use mbp_core::trade::SynthConfig;
use mbp_core::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "mbp",
    version,
    about = "Market-based price statistics from trade series"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-window trade moments, price moments and covariances.
    Moments(Common),
    /// Density of one window from its characteristic-function approximation.
    Pdf(PdfArgs),
    /// Run every identity on every window; exit 1 if any gate fails.
    Verify(VerifyArgs),
    /// Returns moments against a reference price.
    Returns(ReturnsArgs),
    /// Inflation moments of a later window against a base window.
    Inflation(InflationArgs),
    /// Write synthetic trades as CSV.
    Synth(SynthArgs),
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Trade CSV (`time,price,volume`); `-` reads standard input.
    #[arg(long, conflicts_with = "synth")]
    pub input: Option<PathBuf>,
    /// Synthetic trades, e.g. `count=10000,rho=0.5,seed=3`. Used with
    /// default parameters when neither --input nor --synth is given.
    #[arg(long)]
    pub synth: Option<String>,
    /// Window width: integer nanoseconds or a number with unit ns, us, ms, s, m, h.
    #[arg(long, default_value = "100", value_parser = parse_duration)]
    pub delta: i64,
    /// Center of window 0 in nanoseconds; defaults to first trade time + delta/2.
    #[arg(long, allow_hyphen_values = true)]
    pub origin: Option<i64>,
    /// Highest moment order (1..=4).
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    /// Directory for report files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Sign-flip one identity implementation; available in test builds only.
    #[arg(long, hide = true)]
    pub inject_fault: Vec<String>,
}

#[derive(Debug, Args, Clone)]
pub struct PdfArgs {
    #[command(flatten)]
    pub common: Common,
    /// Window index; defaults to the first non-empty window.
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<i64>,
    /// Approximation order of the characteristic function.
    #[arg(long, default_value_t = 4, value_parser = parse_cf_order)]
    pub cf_order: usize,
    /// Regularizer coefficient or `auto`.
    #[arg(long, default_value = "auto", value_parser = parse_param::<f64>)]
    pub b: Param<f64>,
    /// Regularizer power (even) or `auto`.
    #[arg(long, default_value = "auto", value_parser = parse_param::<u32>)]
    pub nreg: Param<u32>,
    /// Fourier cutoff; defaults to 40 / sigma_p.
    #[arg(long)]
    pub xmax: Option<f64>,
    /// Number of grid points (power of two).
    #[arg(long, default_value_t = mbp_core::charfunc::DEFAULT_POINTS)]
    pub grid: usize,
}

#[derive(Debug, Args, Clone)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Orders for the order-indexed identities, e.g. `1..4`.
    #[arg(long, default_value = "1..4", value_parser = parse_orders)]
    pub orders: (usize, usize),
    /// Window whose VWAP is the returns reference price.
    #[arg(long, allow_hyphen_values = true)]
    pub ref_window: Option<i64>,
    /// Explicit returns reference price.
    #[arg(long, conflicts_with = "ref_window")]
    pub p_ref: Option<f64>,
}

#[derive(Debug, Args, Clone)]
pub struct ReturnsArgs {
    #[command(flatten)]
    pub common: Common,
    /// Window whose VWAP is the reference price; defaults to the first window.
    #[arg(long, allow_hyphen_values = true)]
    pub ref_window: Option<i64>,
    /// Explicit reference price.
    #[arg(long, conflicts_with = "ref_window")]
    pub p_ref: Option<f64>,
    /// Report only this window.
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<i64>,
}

#[derive(Debug, Args, Clone)]
pub struct InflationArgs {
    #[command(flatten)]
    pub common: Common,
    /// Defaults to the first non-empty window.
    #[arg(long, allow_hyphen_values = true)]
    pub base_window: Option<i64>,
    /// Defaults to the non-empty window after the base window.
    #[arg(long, allow_hyphen_values = true)]
    pub later_window: Option<i64>,
}

#[derive(Debug, Args, Clone)]
pub struct SynthArgs {
    /// Generator parameters, e.g. `count=1000,rho=0.5`.
    #[arg(long, default_value = "")]
    pub synth: String,
    /// Output file; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_param<T: std::str::FromStr>(s: &str) -> std::result::Result<Param<T>, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Param::Auto);
    }
    s.parse()
        .map(Param::Fixed)
        .map_err(|_| format!("expected a number or `auto`, got `{s}`"))
}

fn parse_cf_order(s: &str) -> std::result::Result<usize, String> {
    match s {
        "2" => Ok(2),
        "4" => Ok(4),
        _ => Err(format!("approximation order must be 2 or 4, got `{s}`")),
    }
}

/// Parses `500`, `250ns`, `10us`, `5ms`, `60s`, `2m`, `1h` into nanoseconds.
pub fn parse_duration(s: &str) -> std::result::Result<i64, String> {
    let s = s.trim();
    let split = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let n: i64 = num.parse().map_err(|_| format!("invalid duration `{s}`"))?;
    let scale: i64 = match unit {
        "" | "ns" => 1,
        "us" => 1_000,
        "ms" => 1_000_000,
        "s" => 1_000_000_000,
        "m" => 60_000_000_000,
        "h" => 3_600_000_000_000,
        _ => return Err(format!("unknown duration unit `{unit}`")),
    };
    match n.checked_mul(scale) {
        Some(d) if d > 0 => Ok(d),
        _ => Err(format!(
            "duration `{s}` must be positive and fit in 64 bits"
        )),
    }
}

/// Parses `lo..hi` (inclusive) or a single order.
pub fn parse_orders(s: &str) -> std::result::Result<(usize, usize), String> {
    let bad = || format!("invalid order range `{s}`; expected e.g. `1..4`");
    let (lo, hi) = match s.split_once("..") {
        Some((lo, hi)) => (
            lo.parse().map_err(|_| bad())?,
            hi.trim_start_matches('=').parse().map_err(|_| bad())?,
        ),
        None => {
            let n = s.parse().map_err(|_| bad())?;
            (n, n)
        }
    };
    if lo == 0 || lo > hi || hi > 4 {
        return Err(format!("order range `{s}` must satisfy 1 <= lo <= hi <= 4"));
    }
    Ok((lo, hi))
}

/// Applies `key=value` pairs to the default generator settings.
pub fn parse_synth(spec: &str) -> Result<SynthConfig> {
    let mut cfg = SynthConfig::default();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, value) = item.split_once('=').ok_or_else(|| {
            Error::Config(format!("synthetic parameter `{item}` is not key=value"))
        })?;
        let bad = || Error::Config(format!("invalid value for `{key}`: `{value}`"));
        let float = || value.parse::<f64>().map_err(|_| bad());
        match key {
            "count" => cfg.count = value.parse().map_err(|_| bad())?,
            "seed" => cfg.seed = value.parse().map_err(|_| bad())?,
            "start" => cfg.start_time = value.parse().map_err(|_| bad())?,
            "rho" => cfg.rho = float()?,
            "price" => cfg.price_log_mean = float()?.ln(),
            "price_log_mean" => cfg.price_log_mean = float()?,
            "price_log_sd" => cfg.price_log_sd = float()?,
            "volume_log_mean" => cfg.volume_log_mean = float()?,
            "volume_log_sd" => cfg.volume_log_sd = float()?,
            _ => {
                return Err(Error::Config(format!(
                    "unknown synthetic parameter `{key}`"
                )))
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}
