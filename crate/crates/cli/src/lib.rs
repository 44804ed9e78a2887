//! Command-line front end for `mbp-core`.
//!
//! Every subcommand writes a JSON report to standard output (and to `--out`
//! when given). Exit codes: 0 success, 1 verification gate failure, 2 input
//! or configuration error, 3 degenerate data.

pub mod args;
mod report;

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use mbp_core::charfunc::{
    build_charfunc, cumulants_from_moments, negativity_mass, pdf_from_charfunc, GridSpec,
};
use mbp_core::correlations::corr_report;
use mbp_core::fault::{self, Fault};
use mbp_core::moments::{price_central_stats, trade_moments, vwap, window_stats, TradeMoments};
use mbp_core::oracle::{identity_suite, SuiteConfig};
use mbp_core::returns::{
    inflation_stats, returns_residuals, returns_route_residual, returns_stats,
};
use mbp_core::trade::{
    parse_trades, partition, synth_trades, write_trades, Partition, Trade, Window,
};
use mbp_core::{Error, Result};
use serde_json::{json, Value};

use args::{Cli, Command, Common, InflationArgs, PdfArgs, ReturnsArgs, SynthArgs, VerifyArgs};
use report::{num, nums, opt, strings};

pub const EXIT_OK: i32 = 0;
pub const EXIT_GATE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::DegenerateWindow(_) | Error::DegenerateDistribution(_) => EXIT_DEGENERATE,
        _ => EXIT_CONFIG,
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match <Cli as clap::Parser>::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return e.exit_code();
        }
    };
    match run(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a parsed command; `Ok` carries the exit code (0 or 1).
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Moments(c) => cmd_moments(c, out),
        Command::Pdf(a) => cmd_pdf(a, out),
        Command::Verify(a) => cmd_verify(a, out, err),
        Command::Returns(a) => cmd_returns(a, out),
        Command::Inflation(a) => cmd_inflation(a, out),
        Command::Synth(a) => cmd_synth(a, out),
    }
}

struct Loaded {
    partition: Partition,
    origin: i64,
}

fn load(c: &Common) -> Result<Loaded> {
    if !(1..=4).contains(&c.order) {
        return Err(Error::Config(format!(
            "--order must be in 1..=4, got {}",
            c.order
        )));
    }
    for name in &c.inject_fault {
        let f: Fault = name.parse().map_err(Error::Config)?;
        fault::try_inject(f)?;
        log::warn!("fault {} injected", f.flag());
    }
    let trades = read_trades(c)?;
    let origin = match c.origin {
        Some(o) => o,
        None => trades.iter().map(|t| t.time).min().expect("non-empty") + c.delta / 2,
    };
    let partition = partition(&trades, c.delta, origin)?;
    log::info!(
        "{} trades in {} windows ({} empty)",
        trades.len(),
        partition.windows.len(),
        partition.empty.len()
    );
    Ok(Loaded { partition, origin })
}

fn read_trades(c: &Common) -> Result<Vec<Trade>> {
    match (&c.input, &c.synth) {
        (Some(path), _) => {
            let text = if path.as_os_str() == "-" {
                let mut s = String::new();
                std::io::stdin().read_to_string(&mut s)?;
                s
            } else {
                fs::read_to_string(path)
                    .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?
            };
            parse_trades(&text)
        }
        (None, spec) => {
            let cfg = args::parse_synth(spec.as_deref().unwrap_or(""))?;
            let trades = synth_trades(&cfg)?;
            if trades.is_empty() {
                return Err(Error::EmptyInput);
            }
            Ok(trades)
        }
    }
}

fn find_window(p: &Partition, index: Option<i64>, what: &str) -> Result<Window> {
    match index {
        None => Ok(p.windows[0].clone()),
        Some(k) => p.get(k).cloned().ok_or_else(|| {
            Error::Config(format!("{what} window {k} does not exist or has no trades"))
        }),
    }
}

fn emit(value: &Value, out: &mut dyn Write, dir: Option<&Path>, name: &str) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    writeln!(out, "{text}")?;
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(name), text + "\n")?;
    }
    Ok(())
}

fn window_json(w: &Window, order: usize) -> Result<Value> {
    let (tm, stats) = window_stats(w, order)?;
    let skipped = if order >= 3 && (stats.skewness.is_none() || stats.kurtosis.is_none()) {
        Value::String(match stats.warnings.first() {
            Some(w) => w.to_string(),
            None => "variance is zero".into(),
        })
    } else {
        Value::Null
    };
    let correlations = if order >= 2 {
        let reports = (1..=order)
            .map(|n| corr_report(w, &tm, n))
            .collect::<Result<Vec<_>>>()?;
        let r = &reports[0];
        let pair = |p: &mbp_core::correlations::IdentityPair| json!({ "direct": num(p.direct), "via_identity": num(p.via_identity), "residual": num(p.residual()) });
        json!({
            "corr_pn_un": nums(&reports.iter().map(|r| r.corr_pn_un).collect::<Vec<_>>()),
            "corr_p_u2": pair(&r.corr_p_u2),
            "corr_p2_u": pair(&r.corr_p2_u),
            "corr_c_u": num(r.corr_c_u),
            "sigma2_u": num(r.sigma2_u),
            "pearson_p_u": num(r.pearson_p_u),
        })
    } else {
        Value::Null
    };
    Ok(json!({
        "k": w.index,
        "t_k": w.center,
        "N": w.len(),
        "C": nums(tm.values()),
        "U": nums(tm.volumes()),
        "p": nums(&stats.moments),
        "f": nums(&stats.frequency),
        "sigma2_p": opt(stats.variance),
        "Sk_p": opt(stats.skewness),
        "Ku_p": opt(stats.kurtosis),
        "correlations": correlations,
        "warnings": strings(&stats.warnings),
        "skipped": skipped,
    }))
}

fn cmd_moments(c: &Common, out: &mut dyn Write) -> Result<i32> {
    let data = load(c)?;
    let windows: Vec<Value> = rayon_map(&data.partition.windows, |w| window_json(w, c.order))?;
    let report = json!({
        "delta": c.delta,
        "origin": data.origin,
        "order": c.order,
        "windows": windows,
        "empty_windows": data.partition.empty,
    });
    emit(&report, out, c.out.as_deref(), "moments.json")?;
    Ok(EXIT_OK)
}

/// Order-preserving parallel map over windows, failing on the first error.
fn rayon_map<F>(windows: &[Window], f: F) -> Result<Vec<Value>>
where
    F: Fn(&Window) -> Result<Value> + Sync + Send,
{
    mbp_core::Exec::default()
        .map(windows, f)
        .into_iter()
        .collect()
}

fn cmd_pdf(a: &PdfArgs, out: &mut dyn Write) -> Result<i32> {
    let c = &a.common;
    if a.cf_order > c.order {
        return Err(Error::Config(format!(
            "--cf-order {} needs --order >= {}",
            a.cf_order, a.cf_order
        )));
    }
    let data = load(c)?;
    let w = find_window(&data.partition, a.window, "pdf")?;
    if w.len() < 2 {
        return Err(Error::DegenerateWindow(format!(
            "window {} has a single trade",
            w.index
        )));
    }
    let tm = trade_moments(&w, a.cf_order)?;
    let a_coeffs = cumulants_from_moments(&tm.price_moments())?;
    if a_coeffs[1] <= 0.0 {
        return Err(Error::DegenerateDistribution(format!(
            "window {} has market-based variance {:e}",
            w.index, a_coeffs[1]
        )));
    }
    let spec = GridSpec {
        x_max: a.xmax,
        points: a.grid,
    };
    let x_max = spec.resolve_x_max(Some(a_coeffs[1]))?;
    let cf = build_charfunc(&a_coeffs, a.b, a.nreg, x_max)?;
    let pdf = pdf_from_charfunc(&cf, &spec)?;
    for warning in &pdf.warnings {
        log::warn!("window {}: {warning}", w.index);
    }

    let dir = c.out.clone().unwrap_or_else(|| ".".into());
    fs::create_dir_all(&dir)?;
    let csv_path = dir.join("density.csv");
    fs::write(&csv_path, pdf.to_csv())?;
    let report = json!({
        "window": w.index,
        "a": nums(&cf.coeffs),
        "b": num(cf.b),
        "n_reg": cf.reg_power,
        "x_max": num(cf.x_max),
        "points": a.grid,
        "normalization": num(pdf.normalization()),
        "negativity_mass": num(negativity_mass(&pdf)),
        "imag_residue": num(pdf.imag_residue),
        "warnings": strings(&pdf.warnings),
        "csv": csv_path.display().to_string(),
    });
    emit(&report, out, Some(&dir), "pdf.json")?;
    Ok(EXIT_OK)
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let c = &a.common;
    let data = load(c)?;
    let trades: Vec<Trade> = data
        .partition
        .windows
        .iter()
        .flat_map(|w| w.trades.iter().copied())
        .collect();
    let cfg = SuiteConfig {
        delta: c.delta,
        origin: data.origin,
        orders: a.orders.0..=a.orders.1,
        ref_window: a.ref_window,
        p_ref: a.p_ref,
        exec: Default::default(),
    };
    let suite = identity_suite(&trades, &cfg)?;

    let identities: Vec<Value> = suite
        .rows
        .iter()
        .map(|r| {
            json!({
                "name": r.name,
                "window": r.window,
                "order": r.order,
                "residual": num(r.residual),
                "tolerance": num(r.tolerance),
                "pass": r.pass,
            })
        })
        .collect();
    let skipped: Vec<Value> = suite
        .skipped
        .iter()
        .map(|s| json!({ "name": s.name, "window": s.window, "reason": s.reason }))
        .collect();
    let mut failed: Vec<&str> = suite.failures().map(|r| r.name).collect();
    failed.sort_unstable();
    failed.dedup();
    let pass = suite.all_pass();
    let max_residuals: serde_json::Map<String, Value> = mbp_core::oracle::IDENTITIES
        .iter()
        .map(|name| (name.to_string(), opt(suite.max_residual(name))))
        .collect();
    let report = json!({
        "identities": identities,
        "skipped": skipped,
        "summary": {
            "pass": pass,
            "windows": suite.windows,
            "rows": suite.rows.len(),
            "failures": suite.failures().count(),
            "failed_identities": failed,
            "max_residual": max_residuals,
            "p_ref": num(suite.p_ref),
            "empty_windows": suite.empty_windows,
            "ill_conditioned_windows": suite.ill_conditioned,
        },
    });
    emit(&report, out, c.out.as_deref(), "verify.json")?;
    if pass {
        Ok(EXIT_OK)
    } else {
        writeln!(err, "verification failed: {}", failed.join(", "))?;
        Ok(EXIT_GATE)
    }
}

fn reference_price(
    p: &Partition,
    ref_window: Option<i64>,
    p_ref: Option<f64>,
) -> Result<(f64, Option<i64>)> {
    if let Some(p) = p_ref {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::Config(format!("--p-ref must be positive, got {p}")));
        }
        return Ok((p, None));
    }
    let w = find_window(p, ref_window, "reference")?;
    Ok((vwap(&trade_moments(&w, 1)?), Some(w.index)))
}

fn cmd_returns(a: &ReturnsArgs, out: &mut dyn Write) -> Result<i32> {
    let c = &a.common;
    if c.order < 2 {
        return Err(Error::Config("returns need --order >= 2".into()));
    }
    let data = load(c)?;
    let (p_ref, ref_window) = reference_price(&data.partition, a.ref_window, a.p_ref)?;
    let selected = match a.window {
        Some(k) => vec![find_window(&data.partition, Some(k), "returns")?],
        None => data.partition.windows.clone(),
    };
    let windows = rayon_map(&selected, |w| {
        let tm = trade_moments(w, c.order)?;
        let ps = price_central_stats(&tm);
        let rs = returns_stats(&ps.moments, p_ref)?;
        let res = returns_residuals(&rs, &ps)?;
        Ok(json!({
            "k": w.index,
            "a": nums(&rs.index),
            "r": nums(&rs.returns),
            "sigma2_r": opt(rs.variance),
            "Sk_r": opt(rs.skewness),
            "Ku_r": opt(rs.kurtosis),
            "residuals": {
                "variance": num(res.variance),
                "skewness": opt(res.skewness),
                "kurtosis": opt(res.kurtosis),
                "trade_route": num(returns_route_residual(&tm, p_ref)?),
            },
        }))
    })?;
    let report = json!({ "p_ref": num(p_ref), "ref_window": ref_window, "windows": windows });
    emit(&report, out, c.out.as_deref(), "returns.json")?;
    Ok(EXIT_OK)
}

fn cmd_inflation(a: &InflationArgs, out: &mut dyn Write) -> Result<i32> {
    let c = &a.common;
    let data = load(c)?;
    let p = &data.partition;
    let base = find_window(p, a.base_window, "base")?;
    let later = match a.later_window {
        Some(k) => find_window(p, Some(k), "later")?,
        None => p
            .windows
            .iter()
            .find(|w| w.index > base.index)
            .cloned()
            .ok_or_else(|| {
                Error::Config(format!(
                    "no non-empty window after base window {}",
                    base.index
                ))
            })?,
    };
    let tm_base: TradeMoments = trade_moments(&base, c.order)?;
    let tm_later = trade_moments(&later, c.order)?;
    let inf = inflation_stats(&tm_base, &tm_later, c.order)?;
    let report = json!({
        "base_window": base.index,
        "later_window": later.index,
        "p_base": num(inf.p_base),
        "c": nums(&inf.value_index),
        "u": nums(&inf.volume_index),
        "In": nums(&inf.moments),
        "In_via_indices": nums(&inf.moments_via_indices),
        "sigma2_In": opt(inf.variance),
        "sigma2_In_direct": opt(inf.variance_direct),
        "index_residual": num(inf.index_residual),
        "variance_residual": opt(inf.variance_residual),
    });
    emit(&report, out, c.out.as_deref(), "inflation.json")?;
    Ok(EXIT_OK)
}

fn cmd_synth(a: &SynthArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = args::parse_synth(&a.synth)?;
    let csv = write_trades(&synth_trades(&cfg)?);
    match &a.out {
        Some(path) => fs::write(path, csv)?,
        None => out.write_all(csv.as_bytes())?,
    }
    Ok(EXIT_OK)
}
