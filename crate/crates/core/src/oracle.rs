//! Independent checks for the identities the rest of the crate relies on.
//!
//! * [`verify_factorization`] recomputes `C[n]` and `U[n]` on a separate
//!   (pairwise, uncompensated) summation path.
//! * [`logprice_pdf`] and [`logprice_moment`] evaluate the density of
//!   `ln p = ln C - ln U` from an analytic joint density of `(ln C, ln U)`
//!   by shifted-diagonal quadrature.
//! * [`identity_suite`] runs every identity on every window of a trade series
//!   and reports residuals against fixed tolerances.

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::correlations::{
    corr_c_u, corr_p2_u, corr_p_u2, corr_pn_un, mean_pn_un, volume_variance,
};
use crate::fault::{self, Fault};
use crate::moments::{check_order, price_central_stats, trade_moments, vwap, TradeMoments};
use crate::returns::{inflation_stats, returns_residuals, returns_route_residual, returns_stats};
use crate::sum::cmean;
use crate::trade::{partition, Trade, Window};
use crate::{Error, Exec, Result};

/// `|corr{p^n U^n}| <= ZERO_CORR_TOL * E[p^n U^n]`.
pub const ZERO_CORR_TOL: f64 = 1e-12;
/// Direct vs identity forms of `corr{p U^2}` and `corr{p^2 U}`, relative to
/// the magnitude of the cancelling terms.
pub const COVARIANCE_TOL: f64 = 1e-10;
pub const FACTORIZATION_TOL: f64 = 1e-13;
/// `p_ref^2 sigma_r^2` vs `sigma_p^2`, relative to `p[2]`.
pub const RETURNS_VARIANCE_TOL: f64 = 1e-10;
/// Gap between returns and price skewness or kurtosis, relative to the
/// condition number of the price statistic.
pub const RETURNS_SHAPE_TOL: f64 = 1e-10;
pub const RETURNS_ROUTE_TOL: f64 = 1e-12;
pub const INFLATION_TOL: f64 = 1e-12;
/// Windows whose volumes span more than this ratio are flagged.
pub const CONDITIONING_RATIO: f64 = 1e8;

fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// `|C[n] - p[n] U[n]| / C[n]` with `p[n]` from `tm` and `C[n]`, `U[n]`
/// recomputed by pairwise summation directly from the trades.
pub fn verify_factorization(w: &Window, tm: &TradeMoments, n: usize) -> Result<f64> {
    check_order(tm, n)?;
    if w.is_empty() {
        return Err(Error::DegenerateWindow(format!(
            "window {} has no trades",
            w.index
        )));
    }
    let k = n as i32;
    let nf = w.len() as f64;
    let cs: Vec<f64> = w
        .trades
        .iter()
        .map(|t| (t.price * t.volume).powi(k))
        .collect();
    let us: Vec<f64> = w.trades.iter().map(|t| t.volume.powi(k)).collect();
    let c = pairwise_sum(&cs) / nf;
    let u = pairwise_sum(&us) / nf;
    let p = tm.c(n) / tm.u(n);
    Ok((c - fault::sign(Fault::Factorization) * p * u).abs() / c)
}

/// Density of `(c, u) = (ln C, ln U)` on a uniform grid; `density[i * nu + j]`
/// is `g(c_i, u_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointLogGrid {
    pub c_start: f64,
    pub dc: f64,
    pub nc: usize,
    pub u_start: f64,
    pub du: f64,
    pub nu: usize,
    pub density: Vec<f64>,
}

/// Parameters of a bivariate normal `(ln C, ln U)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateNormal {
    pub mu_c: f64,
    pub s_c: f64,
    pub mu_u: f64,
    pub s_u: f64,
    pub rho: f64,
}

impl BivariateNormal {
    pub fn pdf(&self, c: f64, u: f64) -> f64 {
        let (x, y) = ((c - self.mu_c) / self.s_c, (u - self.mu_u) / self.s_u);
        let q = 1.0 - self.rho * self.rho;
        let z = (x * x - 2.0 * self.rho * x * y + y * y) / q;
        (-z / 2.0).exp() / (2.0 * PI * self.s_c * self.s_u * q.sqrt())
    }

    /// Mean and variance of `ln p = ln C - ln U`.
    pub fn log_price(&self) -> (f64, f64) {
        let var = self.s_c * self.s_c + self.s_u * self.s_u - 2.0 * self.rho * self.s_c * self.s_u;
        (self.mu_c - self.mu_u, var)
    }

    /// `E[p^n] = E[(C/U)^n]` in closed form.
    pub fn price_moment(&self, n: u32) -> f64 {
        let (m, v) = self.log_price();
        let n = n as f64;
        (n * m + n * n * v / 2.0).exp()
    }

    /// `E[C^n] / E[U^n]` in closed form.
    pub fn market_moment(&self, n: u32) -> f64 {
        let n = n as f64;
        let ec = (n * self.mu_c + n * n * self.s_c * self.s_c / 2.0).exp();
        let eu = (n * self.mu_u + n * n * self.s_u * self.s_u / 2.0).exp();
        ec / eu
    }
}

impl JointLogGrid {
    pub fn from_fn(
        c_start: f64,
        nc: usize,
        u_start: f64,
        nu: usize,
        step: (f64, f64),
        f: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let (dc, du) = step;
        let mut density = Vec::with_capacity(nc * nu);
        for i in 0..nc {
            for j in 0..nu {
                density.push(f(c_start + i as f64 * dc, u_start + j as f64 * du));
            }
        }
        JointLogGrid {
            c_start,
            dc,
            nc,
            u_start,
            du,
            nu,
            density,
        }
    }

    /// Bivariate normal sampled over `+- span` standard deviations with a
    /// common step for both axes.
    pub fn bivariate_normal(g: &BivariateNormal, step: f64, span: f64) -> Self {
        let nc = (2.0 * span * g.s_c / step).ceil() as usize + 1;
        let nu = (2.0 * span * g.s_u / step).ceil() as usize + 1;
        let c0 = g.mu_c - (nc - 1) as f64 * step / 2.0;
        let u0 = g.mu_u - (nu - 1) as f64 * step / 2.0;
        Self::from_fn(c0, nc, u0, nu, (step, step), |c, u| g.pdf(c, u))
    }

    /// All mass in the cell at `(c_start + i dc, u_start + j du)`.
    pub fn point_mass(
        c_start: f64,
        u_start: f64,
        step: f64,
        n: usize,
        cell: (usize, usize),
    ) -> Self {
        let mut g = Self::from_fn(c_start, n, u_start, n, (step, step), |_, _| 0.0);
        g.density[cell.0 * n + cell.1] = 1.0 / (step * step);
        g
    }

    pub fn c(&self, i: usize) -> f64 {
        self.c_start + i as f64 * self.dc
    }

    pub fn u(&self, j: usize) -> f64 {
        self.u_start + j as f64 * self.du
    }

    pub fn mass(&self) -> f64 {
        crate::sum::csum(self.density.iter().copied()) * self.dc * self.du
    }

    /// Linear interpolation in `c` along column `j`; zero outside the grid.
    fn at_c(&self, c: f64, j: usize) -> f64 {
        let s = (c - self.c_start) / self.dc;
        let last = (self.nc - 1) as f64;
        if s < -1e-9 || s > last + 1e-9 {
            return 0.0;
        }
        let s = s.clamp(0.0, last);
        let i = s.floor() as usize;
        let frac = s - i as f64;
        let lo = self.density[i * self.nu + j];
        if frac < 1e-9 || i + 1 >= self.nc {
            return lo;
        }
        if frac > 1.0 - 1e-9 {
            return self.density[(i + 1) * self.nu + j];
        }
        lo + frac * (self.density[(i + 1) * self.nu + j] - lo)
    }
}

/// Density of `ln p` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPriceDensity {
    pub start: f64,
    pub step: f64,
    pub density: Vec<f64>,
}

impl LogPriceDensity {
    pub fn point(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn mass(&self) -> f64 {
        crate::sum::csum(self.density.iter().copied()) * self.step
    }
}

/// `q(pi) = int g(pi + x, x) dx` on `[min c - max u, max c - min u]` with
/// step `dc`. Off-grid values of `g` are linearly interpolated in `c`.
pub fn logprice_pdf(g: &JointLogGrid) -> Result<LogPriceDensity> {
    if g.nc < 2 || g.nu < 2 || g.density.len() != g.nc * g.nu || g.dc <= 0.0 || g.du <= 0.0 {
        return Err(Error::Config(
            "joint grid needs at least 2x2 points and positive steps".into(),
        ));
    }
    let mass = g.mass();
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::Config(format!(
            "joint density integrates to {mass}, not 1"
        )));
    }
    let start = g.c(0) - g.u(g.nu - 1);
    let end = g.c(g.nc - 1) - g.u(0);
    let step = g.dc;
    let len = ((end - start) / step).round() as usize + 1;
    let density = Exec::default().map_range(len, |k| {
        let pi = start + k as f64 * step;
        crate::sum::csum((0..g.nu).map(|j| g.at_c(pi + g.u(j), j))) * g.du
    });
    Ok(LogPriceDensity {
        start,
        step,
        density,
    })
}

/// Integrand values at the grid edges must fall below this.
pub const TAIL_TOL: f64 = 1e-12;

/// `E[p^n] = int e^{n pi} q(pi) d pi`.
pub fn logprice_moment(q: &LogPriceDensity, n: u32) -> Result<f64> {
    let mass = q.mass();
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::Config(format!(
            "log-price density integrates to {mass}, not 1"
        )));
    }
    let terms: Vec<f64> = q
        .density
        .iter()
        .enumerate()
        .map(|(k, d)| (n as f64 * q.point(k)).exp() * d)
        .collect();
    let (first, last) = (terms[0].abs(), terms[terms.len() - 1].abs());
    if first > TAIL_TOL || last > TAIL_TOL {
        return Err(Error::GridTooNarrow(format!(
            "e^(n pi) q(pi) is {first:e} / {last:e} at the edges"
        )));
    }
    Ok(crate::sum::csum(terms) * q.step)
}

/// Market-based vs frequency-based mean price for a lognormal `(C, U)` model.
#[derive(Debug, Clone, PartialEq)]
pub struct ConventionComparison {
    pub n: u32,
    /// `sum C^n / sum U^n` over the sample.
    pub sample_market: f64,
    /// `mean(p^n)` over the sample.
    pub sample_frequency: f64,
    /// `E[C^n] / E[U^n]`.
    pub closed_market: f64,
    /// `E[p^n]`.
    pub closed_frequency: f64,
    /// `E[p^n]` by quadrature of the log-price density.
    pub quadrature_frequency: Option<f64>,
    /// `E[C^n] - E[p^n] E[U^n]`: zero only if `p^n` and `U^n` were classically
    /// uncorrelated.
    pub classical_gap: f64,
}

impl ConventionComparison {
    pub fn gap(&self) -> f64 {
        self.closed_market - self.closed_frequency
    }
}

/// Samples trades with jointly normal `(ln C, ln U)` and compares the two
/// averaging conventions against their closed forms.
pub fn convention_comparison(
    g: &BivariateNormal,
    n: u32,
    count: usize,
    seed: u64,
) -> Result<ConventionComparison> {
    let trades = sample_joint(g, count, seed)?;
    let k = n as i32;
    let sample_market = cmean(trades.iter().map(|t| t.value.powi(k)))
        / cmean(trades.iter().map(|t| t.volume.powi(k)));
    let sample_frequency = cmean(trades.iter().map(|t| t.price.powi(k)));
    let grid = JointLogGrid::bivariate_normal(g, g.s_c.min(g.s_u) / 50.0, 9.0);
    let quadrature_frequency = logprice_pdf(&grid)
        .and_then(|q| logprice_moment(&q, n))
        .ok();
    let nf = n as f64;
    let ec = (nf * g.mu_c + nf * nf * g.s_c * g.s_c / 2.0).exp();
    let eu = (nf * g.mu_u + nf * nf * g.s_u * g.s_u / 2.0).exp();
    Ok(ConventionComparison {
        n,
        sample_market,
        sample_frequency,
        closed_market: g.market_moment(n),
        closed_frequency: g.price_moment(n),
        quadrature_frequency,
        classical_gap: ec - g.price_moment(n) * eu,
    })
}

/// Trades with `(ln C, ln U)` drawn from `g`, one tick apart.
pub fn sample_joint(g: &BivariateNormal, count: usize, seed: u64) -> Result<Vec<Trade>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ortho = (1.0 - g.rho * g.rho).max(0.0).sqrt();
    (0..count)
        .map(|i| {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            let c = g.mu_c + g.s_c * z1;
            let u = g.mu_u + g.s_u * (g.rho * z1 + ortho * z2);
            Trade::new(i as i64, (c - u).exp(), u.exp())
        })
        .collect()
}

/// VWAP against the equal-weight mean price of one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConventionGap {
    pub vwap: f64,
    pub mean: f64,
    pub diff: f64,
    /// Standard error of `diff` by linearization: the influence of trade `i`
    /// is `(C_i - vwap U_i) / U[1] - (p_i - mean)`.
    pub std_err: f64,
    /// `diff / std_err`.
    pub z: f64,
}

pub fn convention_gap(w: &Window) -> Result<ConventionGap> {
    if w.len() < 2 {
        return Err(Error::DegenerateWindow("need at least two trades".into()));
    }
    let tm = trade_moments(w, 1)?;
    let v = vwap(&tm);
    let mean = cmean(w.trades.iter().map(|t| t.price));
    let infl: Vec<f64> = w
        .trades
        .iter()
        .map(|t| (t.value - v * t.volume) / tm.u(1) - (t.price - mean))
        .collect();
    let mi = cmean(infl.iter().copied());
    let nf = w.len() as f64;
    let var = crate::sum::csum(infl.iter().map(|x| (x - mi) * (x - mi))) / (nf - 1.0);
    let std_err = (var / nf).sqrt();
    let diff = v - mean;
    Ok(ConventionGap {
        vwap: v,
        mean,
        diff,
        std_err,
        z: diff / std_err,
    })
}

/// Options for [`identity_suite`].
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub delta: i64,
    pub origin: i64,
    /// Orders checked by the order-indexed identities.
    pub orders: RangeInclusive<usize>,
    /// Window whose VWAP is the returns reference price; first window if unset.
    pub ref_window: Option<i64>,
    /// Explicit reference price; overrides `ref_window`.
    pub p_ref: Option<f64>,
    pub exec: Exec,
}

impl SuiteConfig {
    pub fn new(delta: i64, origin: i64) -> Self {
        SuiteConfig {
            delta,
            origin,
            orders: 1..=4,
            ref_window: None,
            p_ref: None,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityRow {
    pub name: &'static str,
    pub window: i64,
    pub order: Option<usize>,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedCheck {
    pub window: i64,
    pub name: &'static str,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub rows: Vec<IdentityRow>,
    pub skipped: Vec<SkippedCheck>,
    pub windows: usize,
    pub empty_windows: Vec<i64>,
    /// Windows whose volume range exceeds [`CONDITIONING_RATIO`].
    pub ill_conditioned: Vec<i64>,
    pub p_ref: f64,
}

impl SuiteReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &IdentityRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn max_residual(&self, name: &str) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.name == name)
            .map(|r| r.residual)
            .fold(None, |m, r| Some(m.map_or(r, |m: f64| m.max(r))))
    }
}

/// Identity names, in report order.
pub const IDENTITIES: [&str; 11] = [
    "corr_pn_un",
    "factorization",
    "corr_p_u2",
    "corr_p2_u",
    "corr_p_u2_sign",
    "returns_variance",
    "returns_skewness",
    "returns_kurtosis",
    "returns_trade_route",
    "inflation_index_route",
    "inflation_variance",
];

fn row(
    name: &'static str,
    window: i64,
    order: Option<usize>,
    residual: f64,
    tolerance: f64,
) -> IdentityRow {
    IdentityRow {
        name,
        window,
        order,
        residual,
        tolerance,
        pass: residual <= tolerance,
    }
}

/// Runs every identity on every window of `trades`.
pub fn identity_suite(trades: &[Trade], cfg: &SuiteConfig) -> Result<SuiteReport> {
    if trades.is_empty() {
        return Err(Error::EmptyInput);
    }
    if cfg.orders.is_empty() || *cfg.orders.start() == 0 {
        return Err(Error::Config(format!(
            "invalid order range {:?}",
            cfg.orders
        )));
    }
    let parts = partition(trades, cfg.delta, cfg.origin)?;
    let order = (*cfg.orders.end()).max(4);
    let moments: Vec<TradeMoments> = cfg
        .exec
        .map(&parts.windows, |w| trade_moments(w, order))
        .into_iter()
        .collect::<Result<_>>()?;

    let p_ref = match (cfg.p_ref, cfg.ref_window) {
        (Some(p), _) => {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::Config(format!(
                    "reference price must be positive, got {p}"
                )));
            }
            p
        }
        (None, Some(k)) => {
            let i = parts
                .windows
                .iter()
                .position(|w| w.index == k)
                .ok_or_else(|| Error::Config(format!("reference window {k} has no trades")))?;
            vwap(&moments[i])
        }
        (None, None) => vwap(&moments[0]),
    };

    let per_window = cfg.exec.map_range(parts.windows.len(), |i| {
        let base = &moments[i.saturating_sub(1)];
        window_checks(
            &parts.windows[i],
            &moments[i],
            base,
            p_ref,
            cfg.orders.clone(),
        )
    });

    let mut report = SuiteReport {
        rows: Vec::new(),
        skipped: Vec::new(),
        windows: parts.windows.len(),
        empty_windows: parts.empty,
        ill_conditioned: Vec::new(),
        p_ref,
    };
    for (w, (rows, skipped)) in parts.windows.iter().zip(per_window) {
        report.rows.extend(rows);
        report.skipped.extend(skipped);
        let (lo, hi) = w
            .trades
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), t| {
                (lo.min(t.volume), hi.max(t.volume))
            });
        if hi / lo > CONDITIONING_RATIO {
            report.ill_conditioned.push(w.index);
        }
    }
    Ok(report)
}

fn window_checks(
    w: &Window,
    tm: &TradeMoments,
    base: &TradeMoments,
    p_ref: f64,
    orders: RangeInclusive<usize>,
) -> (Vec<IdentityRow>, Vec<SkippedCheck>) {
    let k = w.index;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    let mut skip = |name, reason: String| {
        skipped.push(SkippedCheck {
            window: k,
            name,
            reason,
        })
    };

    for n in orders.clone() {
        // corr_pn_un and the factorization are defined for every window and order
        let c = corr_pn_un(w, tm, n).expect("order within range");
        rows.push(row(
            "corr_pn_un",
            k,
            Some(n),
            c.abs() / mean_pn_un(w, n),
            ZERO_CORR_TOL,
        ));
    }
    for n in orders {
        let r = verify_factorization(w, tm, n).expect("order within range");
        rows.push(row("factorization", k, Some(n), r, FACTORIZATION_TOL));
    }

    let a2 = corr_p_u2(w, tm).expect("order >= 2");
    rows.push(row("corr_p_u2", k, None, a2.residual(), COVARIANCE_TOL));
    let a5 = corr_p2_u(w, tm).expect("order >= 2");
    rows.push(row("corr_p2_u", k, None, a5.residual(), COVARIANCE_TOL));

    let gap = corr_c_u(w, tm) - vwap(tm) * volume_variance(tm);
    if gap.abs() > COVARIANCE_TOL * a2.scale && a2.direct.abs() > COVARIANCE_TOL * a2.scale {
        let agree = (a2.direct > 0.0) == (gap > 0.0);
        rows.push(row(
            "corr_p_u2_sign",
            k,
            None,
            if agree { 0.0 } else { 1.0 },
            0.0,
        ));
    } else {
        skip(
            "corr_p_u2_sign",
            "covariance within rounding of zero".into(),
        );
    }

    let ps = price_central_stats(tm);
    let rs = returns_stats(&ps.moments, p_ref).expect("positive reference price");
    let res = returns_residuals(&rs, &ps).expect("order >= 2");
    rows.push(row(
        "returns_variance",
        k,
        None,
        res.variance,
        RETURNS_VARIANCE_TOL,
    ));
    match (res.skewness, res.kurtosis) {
        (Some(sk), Some(ku)) => {
            rows.push(row("returns_skewness", k, None, sk, RETURNS_SHAPE_TOL));
            rows.push(row("returns_kurtosis", k, None, ku, RETURNS_SHAPE_TOL));
        }
        _ => {
            let reason = match ps.warnings.first() {
                Some(w) => w.to_string(),
                None => "returns variance degenerate".into(),
            };
            skip("returns_skewness", reason.clone());
            skip("returns_kurtosis", reason);
        }
    }
    let route = returns_route_residual(tm, p_ref).expect("positive reference price");
    rows.push(row(
        "returns_trade_route",
        k,
        None,
        route,
        RETURNS_ROUTE_TOL,
    ));

    let inf = inflation_stats(base, tm, 4).expect("order >= 4");
    rows.push(row(
        "inflation_index_route",
        k,
        None,
        inf.index_residual,
        INFLATION_TOL,
    ));
    rows.push(row(
        "inflation_variance",
        k,
        None,
        inf.variance_residual.expect("order >= 2"),
        INFLATION_TOL,
    ));
    (rows, skipped)
}
