//! Raw trade moments and the market-based price moments derived from them.
//!
//! The n-th market-based price moment of a window is `C[n] / U[n]`: the n-th
//! raw moment of trade value over the n-th raw moment of trade volume. It is
//! the average of `p^n` weighted by `U^n`, so every order uses its own
//! weights. The frequency-based moments (`f[n]`, plain averages of `p^n`) are
//! exposed alongside for comparison.

use crate::sum::{cmean, NeumaierSum};
use crate::trade::Window;
use crate::{Error, Result};

/// Highest order computed by default.
pub const DEFAULT_ORDER: usize = 4;

/// Negative variances down to `-VARIANCE_CLIP_REL * p[1]^2` are treated as
/// rounding and clipped to zero.
pub const VARIANCE_CLIP_REL: f64 = 1e-10;

/// Variances at or below `DEGENERATE_VARIANCE_REL * p[2]` leave skewness and
/// kurtosis undefined.
pub const DEGENERATE_VARIANCE_REL: f64 = 1e-13;

/// Raw moments of trade value and volume over one window.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeMoments {
    order: usize,
    value: Vec<f64>,
    volume: Vec<f64>,
    /// Mean of `1 / U_i`.
    pub volume_inv: f64,
    pub count: usize,
}

impl TradeMoments {
    pub fn order(&self) -> usize {
        self.order
    }

    /// `C[n] = mean(C_i^n)`, `1 <= n <= order`.
    pub fn c(&self, n: usize) -> f64 {
        self.value[n - 1]
    }

    /// `U[n] = mean(U_i^n)`, `1 <= n <= order`.
    pub fn u(&self, n: usize) -> f64 {
        self.volume[n - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.value
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volume
    }

    /// Market-based moments `p[1..=order]`.
    pub fn price_moments(&self) -> Vec<f64> {
        (1..=self.order).map(|n| self.c(n) / self.u(n)).collect()
    }
}

/// Raw moments of value and volume up to `order`, using compensated sums in
/// trade order.
pub fn trade_moments(w: &Window, order: usize) -> Result<TradeMoments> {
    if order == 0 {
        return Err(Error::Config("moment order must be at least 1".into()));
    }
    if w.is_empty() {
        return Err(Error::DegenerateWindow(format!(
            "window {} has no trades",
            w.index
        )));
    }
    let mut cs = vec![NeumaierSum::new(); order];
    let mut us = vec![NeumaierSum::new(); order];
    let mut inv = NeumaierSum::new();
    for t in &w.trades {
        let (mut cp, mut up) = (1.0, 1.0);
        for n in 0..order {
            cp *= t.value;
            up *= t.volume;
            cs[n].add(cp);
            us[n].add(up);
        }
        inv.add(1.0 / t.volume);
    }
    let count = w.len();
    let nf = count as f64;
    Ok(TradeMoments {
        order,
        value: cs.iter().map(|s| s.value() / nf).collect(),
        volume: us.iter().map(|s| s.value() / nf).collect(),
        volume_inv: inv.value() / nf,
        count,
    })
}

/// `p[n] = C[n] / U[n]`. For `n = 1` this is the VWAP.
pub fn price_moment(tm: &TradeMoments, n: usize) -> Result<f64> {
    check_order(tm, n)?;
    Ok(tm.c(n) / tm.u(n))
}

/// Volume-weighted average price.
pub fn vwap(tm: &TradeMoments) -> f64 {
    tm.c(1) / tm.u(1)
}

/// Equal-weight average of `p_i^n`.
pub fn frequency_moment(w: &Window, n: usize) -> Result<f64> {
    if w.is_empty() {
        return Err(Error::DegenerateWindow(format!(
            "window {} has no trades",
            w.index
        )));
    }
    let n = i32::try_from(n).map_err(|_| Error::Config("order too large".into()))?;
    Ok(cmean(w.trades.iter().map(|t| t.price.powi(n))))
}

pub(crate) fn check_order(tm: &TradeMoments, n: usize) -> Result<()> {
    if n == 0 || n > tm.order {
        return Err(Error::Config(format!("order {n} outside 1..={}", tm.order)));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StatsWarning {
    /// `p[2] - p[1]^2` was slightly negative and was set to zero.
    VarianceClipped { raw: f64 },
    /// `p[2] - p[1]^2` is negative beyond rounding. Market-based weighting
    /// does not guarantee a non-negative variance.
    NegativeVariance { raw: f64 },
    /// Variance too small for skewness and kurtosis.
    DegenerateVariance { variance: f64 },
}

impl std::fmt::Display for StatsWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StatsWarning::VarianceClipped { raw } => write!(f, "variance {raw:e} clipped to 0"),
            StatsWarning::NegativeVariance { raw } => {
                write!(f, "negative market-based variance {raw:e}")
            }
            StatsWarning::DegenerateVariance { variance } => {
                write!(f, "variance {variance:e} too small for skewness/kurtosis")
            }
        }
    }
}

/// Central statistics of the market-based price distribution of a window.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceStats {
    /// `p[1..=m]`.
    pub moments: Vec<f64>,
    /// Frequency-based `f[1..=m]`; empty unless built by [`window_stats`].
    pub frequency: Vec<f64>,
    pub variance: Option<f64>,
    pub third_central: Option<f64>,
    pub fourth_central: Option<f64>,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
    pub warnings: Vec<StatsWarning>,
}

impl PriceStats {
    pub fn mean(&self) -> f64 {
        self.moments[0]
    }

    pub fn require_variance(&self) -> Result<f64> {
        match self.variance {
            Some(v) if v > 0.0 && self.is_shape_defined() => Ok(v),
            Some(v) => Err(Error::DegenerateDistribution(format!(
                "variance {v:e} is not positive"
            ))),
            None => Err(Error::Config("variance needs order >= 2".into())),
        }
    }

    pub fn require_skewness(&self) -> Result<f64> {
        self.skewness.ok_or_else(|| self.shape_error("skewness", 3))
    }

    pub fn require_kurtosis(&self) -> Result<f64> {
        self.kurtosis.ok_or_else(|| self.shape_error("kurtosis", 4))
    }

    fn is_shape_defined(&self) -> bool {
        !self.warnings.iter().any(|w| {
            matches!(
                w,
                StatsWarning::DegenerateVariance { .. } | StatsWarning::NegativeVariance { .. }
            )
        })
    }

    fn shape_error(&self, what: &str, order: usize) -> Error {
        if self.moments.len() < order {
            Error::Config(format!("{what} needs order >= {order}"))
        } else {
            Error::DegenerateDistribution(format!(
                "{what} undefined for variance {:e}",
                self.variance.unwrap_or(f64::NAN)
            ))
        }
    }
}

/// Variance, third and fourth central moments of a set of raw moments
/// `raw[0..]` = `E[x], E[x^2], ...`, by binomial expansion around `E[x]`.
pub fn central_from_raw(raw: &[f64]) -> (Option<f64>, Option<f64>, Option<f64>) {
    let m1 = raw[0];
    let c2 = raw.get(1).map(|&m2| m2 - m1 * m1);
    let c3 = raw
        .get(2)
        .map(|&m3| m3 - 3.0 * m1 * raw[1] + 2.0 * m1.powi(3));
    let c4 = raw
        .get(3)
        .map(|&m4| m4 - 4.0 * m1 * raw[2] + 6.0 * m1 * m1 * raw[1] - 3.0 * m1.powi(4));
    (c2, c3, c4)
}

/// Volatility, skewness and kurtosis of the market-based price distribution.
pub fn price_central_stats(tm: &TradeMoments) -> PriceStats {
    stats_from_raw(tm.price_moments())
}

pub(crate) fn stats_from_raw(moments: Vec<f64>) -> PriceStats {
    let (c2, c3, c4) = central_from_raw(&moments);
    let mut warnings = Vec::new();
    let mut shape_ok = false;
    let variance = c2.map(|raw| {
        let m1 = moments[0];
        let v = if raw < 0.0 && raw >= -VARIANCE_CLIP_REL * m1 * m1 {
            warnings.push(StatsWarning::VarianceClipped { raw });
            0.0
        } else if raw < 0.0 {
            warnings.push(StatsWarning::NegativeVariance { raw });
            raw
        } else {
            raw
        };
        if v >= 0.0 {
            if v <= DEGENERATE_VARIANCE_REL * moments[1].abs() {
                warnings.push(StatsWarning::DegenerateVariance { variance: v });
            } else {
                shape_ok = true;
            }
        }
        v
    });
    let (skewness, kurtosis) = match (shape_ok, variance) {
        (true, Some(v)) => (c3.map(|c| c / v.powf(1.5)), c4.map(|c| c / (v * v))),
        _ => (None, None),
    };
    PriceStats {
        moments,
        frequency: Vec::new(),
        variance,
        third_central: c3,
        fourth_central: c4,
        skewness,
        kurtosis,
        warnings,
    }
}

/// Trade moments and price statistics, including frequency-based moments.
pub fn window_stats(w: &Window, order: usize) -> Result<(TradeMoments, PriceStats)> {
    let tm = trade_moments(w, order)?;
    let mut stats = price_central_stats(&tm);
    stats.frequency = (1..=order)
        .map(|n| frequency_moment(w, n))
        .collect::<Result<_>>()?;
    Ok((tm, stats))
}

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::trade::{Trade, Window};

    pub fn window(pairs: &[(f64, f64)]) -> Window {
        let trades = pairs
            .iter()
            .enumerate()
            .map(|(i, &(p, u))| Trade::new(i as i64, p, u).unwrap())
            .collect();
        Window::from_trades(0, 0, 1_000_000, trades)
    }

    /// Two trades: (p=2, U=1), (p=4, U=3).
    pub fn two_trades() -> Window {
        window(&[(2.0, 1.0), (4.0, 3.0)])
    }
}
