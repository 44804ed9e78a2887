//! Trade records, CSV ingest, synthetic generation and time windowing.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

/// One executed transaction. `value` is always `price * volume`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trade {
    /// Nanoseconds since epoch.
    pub time: i64,
    pub price: f64,
    pub volume: f64,
    pub value: f64,
}

impl Trade {
    pub fn new(time: i64, price: f64, volume: f64) -> Result<Self> {
        if !(price.is_finite() && price > 0.0) {
            return Err(Error::Config(format!(
                "price must be positive and finite, got {price}"
            )));
        }
        if !(volume.is_finite() && volume > 0.0) {
            return Err(Error::Config(format!(
                "volume must be positive and finite, got {volume}"
            )));
        }
        Ok(Trade {
            time,
            price,
            volume,
            value: price * volume,
        })
    }
}

pub const CSV_HEADER: &str = "time,price,volume";

/// Parses a `time,price,volume` CSV document.
///
/// Rows must be an integer time and positive decimal price and volume. Errors
/// carry the 1-based line number of the offending row (the header is line 1).
pub fn parse_trades(text: &str) -> Result<Vec<Trade>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyInput);
    }
    let cols: Vec<&str> = headers.iter().collect();
    if cols != ["time", "price", "volume"] {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{CSV_HEADER}`, got `{}`", cols.join(",")),
        });
    }

    let mut trades = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields, got {}", record.len()),
            });
        }
        let bad = |what: &str, raw: &str| Error::Parse {
            line,
            message: format!("invalid {what} `{raw}`"),
        };
        let time: i64 = record[0].parse().map_err(|_| bad("time", &record[0]))?;
        let price: f64 = record[1].parse().map_err(|_| bad("price", &record[1]))?;
        let volume: f64 = record[2].parse().map_err(|_| bad("volume", &record[2]))?;
        let trade = Trade::new(time, price, volume).map_err(|e| match e {
            Error::Config(message) => Error::Parse { line, message },
            other => other,
        })?;
        trades.push(trade);
    }
    if trades.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(trades)
}

/// Writes trades in the ingest format. Floats use the shortest representation
/// that parses back to the identical double.
pub fn write_trades(trades: &[Trade]) -> String {
    let mut out = String::with_capacity(32 * (trades.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for t in trades {
        let _ = writeln!(out, "{},{},{}", t.time, t.price, t.volume);
    }
    out
}

/// Trades falling into one averaging interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub index: i64,
    /// Window center `origin + index * delta`, in nanoseconds.
    pub center: i64,
    /// Full window width in nanoseconds.
    pub delta: i64,
    pub trades: Vec<Trade>,
}

impl Window {
    /// Builds a window directly from trades, e.g. for tests or in-memory use.
    pub fn from_trades(index: i64, center: i64, delta: i64, trades: Vec<Trade>) -> Self {
        Window {
            index,
            center,
            delta,
            trades,
        }
    }

    pub fn len(&self) -> usize {
        self.trades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trades.is_empty()
    }

    pub fn half_width(&self) -> f64 {
        self.delta as f64 / 2.0
    }

    pub fn contains_time(&self, t: i64) -> bool {
        let (c, d, t) = (self.center as i128, self.delta as i128, t as i128);
        2 * (t - c) >= -d && 2 * (t - c) < d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Non-empty windows, ascending by index.
    pub windows: Vec<Window>,
    /// Indices of empty windows between the first and last non-empty one.
    pub empty: Vec<i64>,
}

impl Partition {
    pub fn get(&self, index: i64) -> Option<&Window> {
        self.windows
            .binary_search_by_key(&index, |w| w.index)
            .ok()
            .map(|i| &self.windows[i])
    }
}

/// Index of the half-open window `[origin + k*delta - delta/2, origin + k*delta + delta/2)`
/// containing `t`.
pub fn window_index(t: i64, delta: i64, origin: i64) -> i64 {
    let num = 2 * (t as i128 - origin as i128) + delta as i128;
    num.div_euclid(2 * delta as i128) as i64
}

/// Splits trades into half-open time windows of width `delta` centered on
/// `origin + k * delta`. Trades are stably sorted by time first.
pub fn partition(trades: &[Trade], delta: i64, origin: i64) -> Result<Partition> {
    if delta <= 0 {
        return Err(Error::Config(format!(
            "window width must be positive, got {delta}"
        )));
    }
    let mut sorted = trades.to_vec();
    if !sorted.windows(2).all(|p| p[0].time <= p[1].time) {
        sorted.sort_by_key(|t| t.time);
    }

    let mut windows: Vec<Window> = Vec::new();
    let mut empty = Vec::new();
    for t in sorted {
        let k = window_index(t.time, delta, origin);
        match windows.last_mut() {
            Some(w) if w.index == k => w.trades.push(t),
            last => {
                if let Some(prev) = last {
                    empty.extend(prev.index + 1..k);
                }
                let center = (origin as i128 + k as i128 * delta as i128) as i64;
                windows.push(Window {
                    index: k,
                    center,
                    delta,
                    trades: vec![t],
                });
            }
        }
    }
    Ok(Partition { windows, empty })
}

/// Parameters of the synthetic lognormal trade generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub count: usize,
    pub price_log_mean: f64,
    pub price_log_sd: f64,
    pub volume_log_mean: f64,
    pub volume_log_sd: f64,
    /// Correlation between log price and log volume.
    pub rho: f64,
    pub seed: u64,
    /// Time stamp of the first trade; subsequent trades are one tick apart.
    pub start_time: i64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            count: 10_000,
            price_log_mean: 100f64.ln(),
            price_log_sd: 0.2,
            volume_log_mean: 0.0,
            volume_log_sd: 0.5,
            rho: 0.0,
            seed: 1,
            start_time: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.price_log_mean,
            self.price_log_sd,
            self.volume_log_mean,
            self.volume_log_sd,
            self.rho,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("synthetic parameters must be finite".into()));
        }
        if self.price_log_sd < 0.0 || self.volume_log_sd < 0.0 {
            return Err(Error::Config(
                "standard deviations must be non-negative".into(),
            ));
        }
        if self.rho.abs() > 1.0 {
            return Err(Error::Config(format!(
                "correlation must lie in [-1, 1], got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

/// Generates trades with jointly Gaussian log price and log volume.
///
/// Deterministic for a fixed seed.
pub fn synth_trades(cfg: &SynthConfig) -> Result<Vec<Trade>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ortho = (1.0 - cfg.rho * cfg.rho).max(0.0).sqrt();
    let mut out = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        let lp = cfg.price_log_mean + cfg.price_log_sd * z1;
        let lu = cfg.volume_log_mean + cfg.volume_log_sd * (cfg.rho * z1 + ortho * z2);
        let time = cfg.start_time + i as i64;
        out.push(Trade::new(time, lp.exp(), lu.exp())?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(time: i64, p: f64, u: f64) -> Trade {
        Trade::new(time, p, u).unwrap()
    }

    #[test]
    fn parses_two_rows() {
        let trades = parse_trades("time,price,volume\n0,2,1\n1,4,3").unwrap();
        assert_eq!(trades.len(), 2);
        assert_eq!(trades[0].value, 2.0);
        assert_eq!(trades[1].value, 12.0);
        assert_eq!(trades[1].time, 1);
    }

    #[test]
    fn rejects_negative_price_with_line() {
        let err = parse_trades("time,price,volume\n5,-1,2\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e:?}"),
        }
        let err = parse_trades("time,price,volume\n1,1,1\n2,1,0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn malformed_rows() {
        assert!(matches!(
            parse_trades("time,price,volume\n1.5,1,1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_trades("time,price,volume\n1,1,1\n2,abc,1\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse_trades("time,price,volume\n1,1,1\n2,1\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse_trades("t,p,v\n1,1,1\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_trades("time,price,volume\n1,NaN,1\n"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn empty_body() {
        assert_eq!(parse_trades("time,price,volume\n"), Err(Error::EmptyInput));
        assert_eq!(parse_trades(""), Err(Error::EmptyInput));
    }

    #[test]
    fn single_window() {
        let p = partition(&[t(0, 1.0, 1.0), t(1, 1.0, 1.0)], 10, 0).unwrap();
        assert_eq!(p.windows.len(), 1);
        assert_eq!(p.windows[0].len(), 2);
        assert_eq!(p.windows[0].index, 0);
    }

    #[test]
    fn boundary_goes_to_next_window() {
        // origin + k*delta + delta/2 with k = 0
        let p = partition(&[t(4, 1.0, 1.0), t(5, 1.0, 1.0)], 10, 0).unwrap();
        assert_eq!(p.windows.len(), 2);
        assert_eq!(p.windows[0].index, 0);
        assert_eq!(p.windows[1].index, 1);
        assert_eq!(p.windows[1].trades[0].time, 5);
        // lower edge is inclusive
        assert_eq!(window_index(-5, 10, 0), 0);
        assert_eq!(window_index(-6, 10, 0), -1);
        // odd widths: [-1.5, 1.5) contains -1, 0, 1
        assert_eq!(window_index(-1, 3, 0), 0);
        assert_eq!(window_index(1, 3, 0), 0);
        assert_eq!(window_index(2, 3, 0), 1);
        assert_eq!(window_index(-2, 3, 0), -1);
    }

    #[test]
    fn uniform_trades_count() {
        let trades: Vec<Trade> = (0..1000).map(|i| t(i, 1.0, 1.0)).collect();
        let p = partition(&trades, 100, 50).unwrap();
        assert_eq!(p.windows.len(), 10);
        assert!(p.windows.iter().all(|w| w.len() == 100));
        assert!(p.empty.is_empty());
    }

    #[test]
    fn reports_empty_windows_and_sorts() {
        let trades = vec![
            t(250, 1.0, 1.0),
            t(0, 1.0, 1.0),
            t(1, 2.0, 1.0),
            t(0, 3.0, 1.0),
        ];
        let p = partition(&trades, 100, 0).unwrap();
        assert_eq!(
            p.windows.iter().map(|w| w.index).collect::<Vec<_>>(),
            vec![0, 3]
        );
        assert_eq!(p.empty, vec![1, 2]);
        // ties keep input order
        let prices: Vec<f64> = p.windows[0].trades.iter().map(|t| t.price).collect();
        assert_eq!(prices, vec![1.0, 3.0, 2.0]);
        assert_eq!(p.get(3).unwrap().center, 300);
        assert!(p.get(1).is_none());
    }

    #[test]
    fn rejects_bad_delta() {
        assert!(matches!(partition(&[], 0, 0), Err(Error::Config(_))));
        assert!(matches!(partition(&[], -3, 0), Err(Error::Config(_))));
    }

    #[test]
    fn synth_zero_sd_is_constant() {
        let cfg = SynthConfig {
            count: 100,
            price_log_sd: 0.0,
            volume_log_sd: 0.0,
            ..Default::default()
        };
        let trades = synth_trades(&cfg).unwrap();
        assert!(trades
            .iter()
            .all(|x| x.price == trades[0].price && x.volume == trades[0].volume));
        assert_eq!(
            trades.iter().map(|x| x.time).collect::<Vec<_>>(),
            (0..100).collect::<Vec<_>>()
        );
    }

    #[test]
    fn synth_is_deterministic() {
        let cfg = SynthConfig {
            count: 1000,
            seed: 42,
            rho: 0.3,
            ..Default::default()
        };
        assert_eq!(synth_trades(&cfg).unwrap(), synth_trades(&cfg).unwrap());
        let other = SynthConfig {
            seed: 43,
            ..cfg.clone()
        };
        assert_ne!(synth_trades(&cfg).unwrap(), synth_trades(&other).unwrap());
    }

    #[test]
    fn synth_validation() {
        let bad = SynthConfig {
            rho: 1.5,
            ..Default::default()
        };
        assert!(synth_trades(&bad).is_err());
        let bad = SynthConfig {
            volume_log_sd: -0.1,
            ..Default::default()
        };
        assert!(synth_trades(&bad).is_err());
    }
}
