//! Sign-flip hooks for mutation-testing the identity suite.
//!
//! Every identity implementation multiplies one of its terms by
//! [`sign`]. Without the `fault-injection` feature that is always `1.0`.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Fault {
    ZeroCorrelation,
    CorrPriceVolumeSq,
    CorrPriceSqVolume,
    Factorization,
    ReturnsVariance,
    ReturnsSkewness,
    ReturnsKurtosis,
    ReturnsTradeRoute,
    InflationIndexRoute,
    InflationVariance,
}

impl Fault {
    pub const ALL: [Fault; 10] = [
        Fault::ZeroCorrelation,
        Fault::CorrPriceVolumeSq,
        Fault::CorrPriceSqVolume,
        Fault::Factorization,
        Fault::ReturnsVariance,
        Fault::ReturnsSkewness,
        Fault::ReturnsKurtosis,
        Fault::ReturnsTradeRoute,
        Fault::InflationIndexRoute,
        Fault::InflationVariance,
    ];

    /// Name accepted on the command line.
    pub fn flag(self) -> &'static str {
        match self {
            Fault::ZeroCorrelation => "sign-flip-zero-corr",
            Fault::CorrPriceVolumeSq => "sign-flip-A2",
            Fault::CorrPriceSqVolume => "sign-flip-A5",
            Fault::Factorization => "sign-flip-factorization",
            Fault::ReturnsVariance => "sign-flip-returns-variance",
            Fault::ReturnsSkewness => "sign-flip-returns-skewness",
            Fault::ReturnsKurtosis => "sign-flip-returns-kurtosis",
            Fault::ReturnsTradeRoute => "sign-flip-returns-trade-route",
            Fault::InflationIndexRoute => "sign-flip-inflation-index",
            Fault::InflationVariance => "sign-flip-inflation-variance",
        }
    }

    /// Identity row name in the suite report that this fault should break.
    pub fn identity(self) -> &'static str {
        match self {
            Fault::ZeroCorrelation => "corr_pn_un",
            Fault::CorrPriceVolumeSq => "corr_p_u2",
            Fault::CorrPriceSqVolume => "corr_p2_u",
            Fault::Factorization => "factorization",
            Fault::ReturnsVariance => "returns_variance",
            Fault::ReturnsSkewness => "returns_skewness",
            Fault::ReturnsKurtosis => "returns_kurtosis",
            Fault::ReturnsTradeRoute => "returns_trade_route",
            Fault::InflationIndexRoute => "inflation_index_route",
            Fault::InflationVariance => "inflation_variance",
        }
    }
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.flag())
    }
}

impl FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Fault::ALL
            .into_iter()
            .find(|f| f.flag() == s || f.identity() == s)
            .ok_or_else(|| format!("unknown fault `{s}`"))
    }
}

#[cfg(feature = "fault-injection")]
mod state {
    use super::Fault;
    use std::sync::atomic::{AtomicU32, Ordering};

    static ACTIVE: AtomicU32 = AtomicU32::new(0);

    pub fn active(f: Fault) -> bool {
        ACTIVE.load(Ordering::Relaxed) & (1 << f as u8) != 0
    }

    /// Turns on a fault for the whole process.
    pub fn inject(f: Fault) {
        ACTIVE.fetch_or(1 << f as u8, Ordering::Relaxed);
    }

    pub fn clear() {
        ACTIVE.store(0, Ordering::Relaxed);
    }
}

#[cfg(feature = "fault-injection")]
pub use state::{clear, inject};

#[cfg(feature = "fault-injection")]
#[inline]
pub(crate) fn sign(f: Fault) -> f64 {
    if state::active(f) {
        -1.0
    } else {
        1.0
    }
}

#[cfg(not(feature = "fault-injection"))]
#[inline(always)]
pub(crate) fn sign(_: Fault) -> f64 {
    1.0
}

/// Whether this build can inject faults.
pub const ENABLED: bool = cfg!(feature = "fault-injection");

/// Like `inject`, but available in every build; fails when fault injection
/// was compiled out.
pub fn try_inject(f: Fault) -> crate::Result<()> {
    #[cfg(feature = "fault-injection")]
    {
        inject(f);
        Ok(())
    }
    #[cfg(not(feature = "fault-injection"))]
    {
        Err(crate::Error::Config(format!(
            "fault `{}` requested but fault injection is not compiled in",
            f.flag()
        )))
    }
}
