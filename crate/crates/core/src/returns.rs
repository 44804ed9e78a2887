//! Market-based moments of price indices, returns and inflation.
//!
//! For a fixed reference price `p_ref`, the price index of a window is
//! `a = p / p_ref` and returns are `r = a - 1`. Their moments follow from the
//! window's market-based price moments by rescaling and binomial expansion.
//! Inflation compares a later window against the mean price of a base window.

use crate::fault::{self, Fault};
use crate::moments::{central_from_raw, PriceStats, TradeMoments, DEGENERATE_VARIANCE_REL};
use crate::{Error, Result};

fn binomial(n: usize, k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * (n + 1 - j) as f64 / j as f64)
}

fn check_ref(p_ref: f64) -> Result<()> {
    if !(p_ref.is_finite() && p_ref > 0.0) {
        return Err(Error::Config(format!(
            "reference price must be positive, got {p_ref}"
        )));
    }
    Ok(())
}

/// `a[n] = p[n] / p_ref^n` for one order, `p` holding `p[1..]`.
pub fn index_moment(p: &[f64], p_ref: f64, n: usize) -> Result<f64> {
    check_ref(p_ref)?;
    if n == 0 {
        return Ok(1.0);
    }
    let pn = p
        .get(n - 1)
        .ok_or_else(|| Error::Config(format!("order {n} outside 1..={}", p.len())))?;
    Ok(pn / p_ref.powi(n as i32))
}

/// `a[0..=m]` with `a[0] = 1`.
pub fn index_moments(p: &[f64], p_ref: f64) -> Result<Vec<f64>> {
    (0..=p.len()).map(|n| index_moment(p, p_ref, n)).collect()
}

/// Returns moments `r[1..=m]` from index moments `a[0..=m]`:
/// `r[n] = sum_k (-1)^(n-k) C(n,k) a[k]`.
pub fn returns_moments(a: &[f64]) -> Result<Vec<f64>> {
    if a.first() != Some(&1.0) {
        return Err(Error::Config(
            "index moments must start with a[0] = 1".into(),
        ));
    }
    Ok((1..a.len())
        .map(|n| {
            (0..=n)
                .map(|k| sign_pow(n - k) * binomial(n, k) * a[k])
                .sum()
        })
        .collect())
}

fn sign_pow(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Returns moments straight from trade moments:
/// `r[n] = sum_k (-1)^(n-k) C(n,k) p_ref^-k C[k] / U[k]`.
pub fn returns_moments_from_trades(tm: &TradeMoments, p_ref: f64) -> Result<Vec<f64>> {
    check_ref(p_ref)?;
    Ok((1..=tm.order())
        .map(|n| {
            let flip = fault::sign(Fault::ReturnsTradeRoute);
            let head = flip * sign_pow(n);
            head + (1..=n)
                .map(|k| {
                    sign_pow(n - k) * binomial(n, k) * tm.c(k) / tm.u(k) / p_ref.powi(k as i32)
                })
                .sum::<f64>()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsStats {
    pub p_ref: f64,
    /// `a[0..=m]`.
    pub index: Vec<f64>,
    /// `r[1..=m]`.
    pub returns: Vec<f64>,
    pub variance: Option<f64>,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
}

/// Index and returns statistics of a window with price moments `p[1..]`.
pub fn returns_stats(p: &[f64], p_ref: f64) -> Result<ReturnsStats> {
    let index = index_moments(p, p_ref)?;
    let returns = returns_moments(&index)?;
    let (c2, c3, c4) = central_from_raw(&returns);
    let variance =
        c2.map(|_| returns[1] - fault::sign(Fault::ReturnsVariance) * returns[0] * returns[0]);
    let shape_ok = matches!(variance, Some(v) if v > DEGENERATE_VARIANCE_REL * index[2].abs());
    let (skewness, kurtosis) = match (shape_ok, variance) {
        (true, Some(v)) => (
            c3.map(|c| fault::sign(Fault::ReturnsSkewness) * c / v.powf(1.5)),
            c4.map(|c| fault::sign(Fault::ReturnsKurtosis) * c / (v * v)),
        ),
        _ => (None, None),
    };
    Ok(ReturnsStats {
        p_ref,
        index,
        returns,
        variance,
        skewness,
        kurtosis,
    })
}

/// Agreement between returns statistics and the price statistics they were
/// derived from.
///
/// Each residual is divided by the magnitude of the terms that cancel while
/// computing the two sides. With `m[n]` the raw price moments and
/// `t[n] = sum_k C(n,k) |a[k]|` the magnitude of the alternating sum behind
/// `r[n]`, the third-order condition number is
/// `(|m[3]| + 3 |m[1]| m[2] + 2 |m[1]|^3) / sigma_p^3` plus the same
/// expression in `t` over `sigma_r^3`; the fourth-order one is analogous.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnsResiduals {
    /// `|p_ref^2 sigma_r^2 - sigma_p^2| / (p_ref^2 (t[2] + t[1]^2))`.
    pub variance: f64,
    /// `|Sk_r - Sk_p|` over its condition number.
    pub skewness: Option<f64>,
    /// `|Ku_r - Ku_p|` over its condition number.
    pub kurtosis: Option<f64>,
}

/// Cancellation magnitude of the third and fourth central moments computed
/// from raw moments `m[1..]` (absolute values), divided by `var^1.5`, `var^2`.
fn central_condition(m: &[f64], var: f64) -> (Option<f64>, Option<f64>) {
    let m1 = m[0];
    let c3 = m
        .get(2)
        .map(|m3| (m3 + 3.0 * m1 * m[1] + 2.0 * m1.powi(3)) / var.powf(1.5));
    let c4 = m
        .get(3)
        .map(|m4| (m4 + 4.0 * m1 * m[2] + 6.0 * m1 * m1 * m[1] + 3.0 * m1.powi(4)) / (var * var));
    (c3, c4)
}

/// Skewness and kurtosis of returns with their residuals against the price
/// statistics. Fails when the returns variance is degenerate.
pub fn returns_shape_stats(
    rs: &ReturnsStats,
    ps: &PriceStats,
) -> Result<(f64, f64, ReturnsResiduals)> {
    let res = returns_residuals(rs, ps)?;
    let sk = rs
        .skewness
        .ok_or_else(|| Error::DegenerateDistribution("returns skewness undefined".into()))?;
    let ku = rs
        .kurtosis
        .ok_or_else(|| Error::DegenerateDistribution("returns kurtosis undefined".into()))?;
    Ok((sk, ku, res))
}

pub fn returns_residuals(rs: &ReturnsStats, ps: &PriceStats) -> Result<ReturnsResiduals> {
    let (vr, vp) = match (rs.variance, ps.variance) {
        (Some(vr), Some(vp)) => (vr, vp),
        _ => return Err(Error::Config("returns variance needs order >= 2".into())),
    };
    let t: Vec<f64> = (1..rs.index.len())
        .map(|n| (0..=n).map(|k| binomial(n, k) * rs.index[k].abs()).sum())
        .collect();
    let pr2 = rs.p_ref * rs.p_ref;
    let variance = (pr2 * vr - vp).abs() / (pr2 * (t[1] + t[0] * t[0]));

    let m: Vec<f64> = ps.moments.iter().map(|x| x.abs()).collect();
    let (p3, p4) = central_condition(&m, vp);
    let (r3, r4) = central_condition(&t, vr);
    let sum = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(a, b)| a + b);
    let diff = |a: Option<f64>, b: Option<f64>, cond: Option<f64>| {
        a.zip(b).zip(cond).map(|((a, b), c)| (a - b).abs() / c)
    };
    Ok(ReturnsResiduals {
        variance,
        skewness: diff(rs.skewness, ps.skewness, sum(p3, r3)),
        kurtosis: diff(rs.kurtosis, ps.kurtosis, sum(p4, r4)),
    })
}

/// Largest relative gap between the index route and the trade-moment route
/// for returns moments, each gap scaled by the sum of absolute terms.
pub fn returns_route_residual(tm: &TradeMoments, p_ref: f64) -> Result<f64> {
    let a = index_moments(&tm.price_moments(), p_ref)?;
    let via_index = returns_moments(&a)?;
    let via_trades = returns_moments_from_trades(tm, p_ref)?;
    Ok((1..=tm.order())
        .map(|n| {
            let scale: f64 = (0..=n).map(|k| binomial(n, k) * a[k].abs()).sum();
            (via_index[n - 1] - via_trades[n - 1]).abs() / scale
        })
        .fold(0.0, f64::max))
}

/// Value and volume growth indices of a later window against a base window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeIndices {
    /// `C_later[n] / C_base[1]^n`.
    pub value: f64,
    /// `U_later[n] / U_base[1]^n`.
    pub volume: f64,
    /// `p_later[n] / p_base[1]^n`.
    pub price: f64,
    /// `|value / volume - price| / price`.
    pub residual: f64,
}

pub fn trade_indices(base: &TradeMoments, later: &TradeMoments, n: usize) -> Result<TradeIndices> {
    if n == 0 || n > later.order() {
        return Err(Error::Config(format!(
            "order {n} outside 1..={}",
            later.order()
        )));
    }
    let value = later.c(n) / base.c(1).powi(n as i32);
    let volume = later.u(n) / base.u(1).powi(n as i32);
    let price = (later.c(n) / later.u(n)) / (base.c(1) / base.u(1)).powi(n as i32);
    Ok(TradeIndices {
        value,
        volume,
        price,
        residual: (value / volume - price).abs() / price,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InflationStats {
    /// Base window VWAP.
    pub p_base: f64,
    pub base_value: f64,
    pub base_volume: f64,
    /// `c[1..=m]`.
    pub value_index: Vec<f64>,
    /// `u[1..=m]`.
    pub volume_index: Vec<f64>,
    /// `In[1..=m]` from later price moments.
    pub moments: Vec<f64>,
    /// `In[1..=m]` from the value and volume indices.
    pub moments_via_indices: Vec<f64>,
    /// `In[2] - In[1]^2`, when `m >= 2`.
    pub variance: Option<f64>,
    /// `sigma_p^2(later) / p_base^2`, when `m >= 2`.
    pub variance_direct: Option<f64>,
    /// Largest relative gap between the two `In[n]` routes.
    pub index_residual: f64,
    /// `|variance - variance_direct|` relative to the magnitude of the terms
    /// that cancel in `In[2] - In[1]^2`.
    pub variance_residual: Option<f64>,
}

impl InflationStats {
    pub fn mean(&self) -> f64 {
        self.moments[0]
    }
}

pub fn inflation_stats(
    base: &TradeMoments,
    later: &TradeMoments,
    m: usize,
) -> Result<InflationStats> {
    if m == 0 || m > later.order() {
        return Err(Error::Config(format!(
            "order {m} outside 1..={}",
            later.order()
        )));
    }
    let p_base = base.c(1) / base.u(1);
    let p_later = later.price_moments();
    // normalized later moments, index 0 = 1
    let scaled: Vec<f64> = std::iter::once(1.0)
        .chain((1..=m).map(|k| p_later[k - 1] / p_base.powi(k as i32)))
        .collect();
    let value_index: Vec<f64> = (1..=m)
        .map(|k| later.c(k) / base.c(1).powi(k as i32))
        .collect();
    let volume_index: Vec<f64> = (1..=m)
        .map(|k| later.u(k) / base.u(1).powi(k as i32))
        .collect();
    let ratio = |k: usize| {
        if k == 0 {
            1.0
        } else {
            value_index[k - 1] / volume_index[k - 1]
        }
    };

    let mut moments = Vec::with_capacity(m);
    let mut via = Vec::with_capacity(m);
    let mut index_residual: f64 = 0.0;
    for n in 1..=m {
        let mut a = 0.0;
        let mut b = 0.0;
        let mut scale = 0.0;
        for j in 0..=n {
            let w = sign_pow(j) * binomial(n, j);
            a += w * scaled[n - j];
            let flip = if j == n {
                fault::sign(Fault::InflationIndexRoute)
            } else {
                1.0
            };
            b += flip * w * ratio(n - j);
            scale += binomial(n, j) * scaled[n - j].abs();
        }
        index_residual = index_residual.max((a - b).abs() / scale);
        moments.push(a);
        via.push(b);
    }

    let (variance, variance_direct, variance_residual) = if m >= 2 {
        let v = moments[1] - fault::sign(Fault::InflationVariance) * moments[0] * moments[0];
        let sigma2_later = p_later[1] - p_later[0] * p_later[0];
        let d = sigma2_later / (p_base * p_base);
        // magnitude of the alternating sums behind In[1] and In[2]
        let t1 = scaled[1] + 1.0;
        let t2 = scaled[2] + 2.0 * scaled[1] + 1.0;
        (Some(v), Some(d), Some((v - d).abs() / (t2 + t1 * t1)))
    } else {
        (None, None, None)
    };

    Ok(InflationStats {
        p_base,
        base_value: base.c(1),
        base_volume: base.u(1),
        value_index,
        volume_index,
        moments,
        moments_via_indices: via,
        variance,
        variance_direct,
        index_residual,
        variance_residual,
    })
}
