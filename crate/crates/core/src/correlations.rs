//! Covariances between price and volume powers inside a window.
//!
//! `corr{XY}` here is the unnormalized covariance `E[XY] - E[X]E[Y]`, with
//! expectations taken as plain window averages. Market-based moments make
//! `corr{p^n U^n}` vanish for every n, but they do not make price and volume
//! independent: `corr{p U^2}` and `corr{p^2 U}` are in general non-zero and
//! can be rewritten through value/volume covariances.

use crate::fault::{self, Fault};
use crate::moments::{check_order, TradeMoments};
use crate::sum::cmean;
use crate::trade::Window;
use crate::{Error, Result};

/// A quantity computed two ways, plus the magnitude of the terms that cancel
/// in it. Residuals are judged relative to `scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityPair {
    pub direct: f64,
    pub via_identity: f64,
    pub scale: f64,
}

impl IdentityPair {
    pub fn residual(&self) -> f64 {
        (self.direct - self.via_identity).abs() / self.scale
    }
}

fn check_same(w: &Window, tm: &TradeMoments) -> Result<()> {
    if w.len() != tm.count {
        return Err(Error::Config(format!(
            "window has {} trades but moments were built from {}",
            w.len(),
            tm.count
        )));
    }
    Ok(())
}

/// `E[p^n U^n]` over the window.
pub fn mean_pn_un(w: &Window, n: usize) -> f64 {
    let n = n as i32;
    cmean(w.trades.iter().map(|t| t.price.powi(n) * t.volume.powi(n)))
}

/// `E[p^n U^n] - p[n] U[n]`; zero up to rounding.
pub fn corr_pn_un(w: &Window, tm: &TradeMoments, n: usize) -> Result<f64> {
    check_order(tm, n)?;
    check_same(w, tm)?;
    let p_n = tm.c(n) / tm.u(n);
    Ok(mean_pn_un(w, n) - fault::sign(Fault::ZeroCorrelation) * p_n * tm.u(n))
}

/// `corr{CU} = E[CU] - C[1]U[1]`.
pub fn corr_c_u(w: &Window, tm: &TradeMoments) -> f64 {
    cmean(w.trades.iter().map(|t| t.value * t.volume)) - tm.c(1) * tm.u(1)
}

/// `sigma^2(U) = U[2] - U[1]^2`.
pub fn volume_variance(tm: &TradeMoments) -> f64 {
    tm.u(2) - tm.u(1) * tm.u(1)
}

/// `corr{p U^2}` directly and as `corr{CU} - p[1] sigma^2(U)`.
pub fn corr_p_u2(w: &Window, tm: &TradeMoments) -> Result<IdentityPair> {
    check_order(tm, 2)?;
    check_same(w, tm)?;
    let p1 = tm.c(1) / tm.u(1);
    let e_pu2 = cmean(w.trades.iter().map(|t| t.price * t.volume * t.volume));
    let e_cu = cmean(w.trades.iter().map(|t| t.value * t.volume));
    let direct = e_pu2 - p1 * tm.u(2);
    let corr_cu = e_cu - tm.c(1) * tm.u(1);
    let via_identity = corr_cu - fault::sign(Fault::CorrPriceVolumeSq) * p1 * volume_variance(tm);
    let scale = [e_pu2, p1 * tm.u(2), e_cu, tm.c(1) * tm.u(1)]
        .into_iter()
        .fold(0.0, |a: f64, b| a.max(b.abs()));
    Ok(IdentityPair {
        direct,
        via_identity,
        scale,
    })
}

/// `corr{p^2 U}` directly and as `corr{C^2 U^-1} + p[2] (U[2] U[-1] - U[1])`.
pub fn corr_p2_u(w: &Window, tm: &TradeMoments) -> Result<IdentityPair> {
    check_order(tm, 2)?;
    check_same(w, tm)?;
    let p2 = tm.c(2) / tm.u(2);
    let e_p2u = cmean(w.trades.iter().map(|t| t.price * t.price * t.volume));
    let e_c2_uinv = cmean(w.trades.iter().map(|t| t.value * t.value / t.volume));
    let direct = e_p2u - p2 * tm.u(1);
    let corr_c2_uinv = e_c2_uinv - tm.c(2) * tm.volume_inv;
    let via_identity = corr_c2_uinv
        + fault::sign(Fault::CorrPriceSqVolume) * p2 * (tm.u(2) * tm.volume_inv - tm.u(1));
    let scale = [e_p2u, p2 * tm.u(1), e_c2_uinv, tm.c(2) * tm.volume_inv]
        .into_iter()
        .fold(0.0, |a: f64, b| a.max(b.abs()));
    Ok(IdentityPair {
        direct,
        via_identity,
        scale,
    })
}

/// Pearson correlation between `x_i` and `y_i`. Diagnostic only; the
/// identities use unnormalized covariances.
pub fn pearson<I>(pairs: I) -> f64
where
    I: IntoIterator<Item = (f64, f64)> + Clone,
{
    let n = pairs.clone().into_iter().count() as f64;
    let mx = cmean(pairs.clone().into_iter().map(|p| p.0));
    let my = cmean(pairs.clone().into_iter().map(|p| p.1));
    let sxy = cmean(pairs.clone().into_iter().map(|(x, y)| (x - mx) * (y - my)));
    let sxx = cmean(pairs.clone().into_iter().map(|(x, _)| (x - mx) * (x - mx)));
    let syy = cmean(pairs.into_iter().map(|(_, y)| (y - my) * (y - my)));
    if n < 2.0 {
        return f64::NAN;
    }
    sxy / (sxx * syy).sqrt()
}

/// Every covariance of interest for one window and order `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrReport {
    pub n: usize,
    pub corr_pn_un: f64,
    pub corr_p_u2: IdentityPair,
    pub corr_p2_u: IdentityPair,
    pub corr_c_u: f64,
    pub sigma2_u: f64,
    /// Pearson correlation of price and volume, for diagnostics.
    pub pearson_p_u: f64,
}

pub fn corr_report(w: &Window, tm: &TradeMoments, n: usize) -> Result<CorrReport> {
    Ok(CorrReport {
        n,
        corr_pn_un: corr_pn_un(w, tm, n)?,
        corr_p_u2: corr_p_u2(w, tm)?,
        corr_p2_u: corr_p2_u(w, tm)?,
        corr_c_u: corr_c_u(w, tm),
        sigma2_u: volume_variance(tm),
        pearson_p_u: pearson(w.trades.iter().map(|t| (t.price, t.volume))),
    })
}
