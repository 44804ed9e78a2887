//! Market-based asset price statistics from raw trade time series.
//!
//! Trades are pooled into averaging windows. Inside a window the n-th price
//! moment is the ratio of the n-th raw moment of trade value to the n-th raw
//! moment of trade volume, which for `n = 1` is the VWAP. From those moments
//! the crate builds finite-order characteristic-function approximations,
//! inverts them to price densities, derives returns and inflation moments,
//! and checks every algebraic identity that ties the pieces together against
//! an independent brute-force route.
//!
//! Batch entry points take an [`Exec`] so that callers (and the benches) can
//! choose between the rayon-backed and the plain sequential path. Results are
//! identical either way: every reduction runs in a fixed order inside a single
//! window.

pub mod charfunc;
pub mod correlations;
mod error;
pub mod fault;
pub mod moments;
pub mod oracle;
mod par;
pub mod returns;
pub mod sum;
pub mod trade;

pub use error::{Error, Result};
pub use par::Exec;

/// Formats a double with 17 significant digits, which round-trips exactly.
/// Non-finite values format as `NaN`, `inf` or `-inf`.
pub fn format_sig17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}
