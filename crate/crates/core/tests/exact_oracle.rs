//! Library results against the same quantities evaluated in exact rational
//! arithmetic. Prices are multiples of 1/4 and volumes multiples of 1/8, so
//! every input is exactly representable as a double.

use mbp_core::correlations::{corr_c_u, corr_p2_u, corr_p_u2, corr_pn_un, volume_variance};
use mbp_core::moments::{price_central_stats, trade_moments, window_stats};
use mbp_core::oracle::verify_factorization;
use mbp_core::returns::{inflation_stats, returns_moments_from_trades, returns_stats};
use mbp_core::trade::{Trade, Window};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use proptest::prelude::*;

type Q = BigRational;

fn q(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

fn f(x: &Q) -> f64 {
    x.to_f64().unwrap()
}

fn pow(x: &Q, n: usize) -> Q {
    (0..n).fold(Q::one(), |acc, _| acc * x)
}

fn mean(xs: impl Iterator<Item = Q>) -> Q {
    let (sum, n) = xs.fold((Q::zero(), 0i64), |(s, n), x| (s + x, n + 1));
    sum / q(n, 1)
}

fn binom(n: usize, k: usize) -> Q {
    let v = (1..=k).fold(1i64, |acc, j| acc * (n + 1 - j) as i64 / j as i64);
    q(v, 1)
}

/// A window as exact (price, volume) pairs plus its floating-point twin.
struct Exact {
    pairs: Vec<(Q, Q)>,
    window: Window,
}

fn exact(raw: &[(i64, i64)]) -> Exact {
    let pairs: Vec<(Q, Q)> = raw.iter().map(|&(p, u)| (q(p, 4), q(u, 8))).collect();
    let trades = raw
        .iter()
        .enumerate()
        .map(|(i, &(p, u))| Trade::new(i as i64, p as f64 / 4.0, u as f64 / 8.0).unwrap())
        .collect();
    Exact {
        pairs,
        window: Window::from_trades(0, 0, 1, trades),
    }
}

impl Exact {
    fn c(&self, n: usize) -> Q {
        mean(self.pairs.iter().map(|(p, u)| pow(&(p * u), n)))
    }
    fn u(&self, n: usize) -> Q {
        mean(self.pairs.iter().map(|(_, u)| pow(u, n)))
    }
    fn p(&self, n: usize) -> Q {
        self.c(n) / self.u(n)
    }
    fn central(&self) -> (Q, Q, Q) {
        let m: Vec<Q> = (1..=4).map(|n| self.p(n)).collect();
        let m1 = &m[0];
        let c2 = &m[1] - m1 * m1;
        let c3 = &m[2] - q(3, 1) * m1 * &m[1] + q(2, 1) * pow(m1, 3);
        let c4 = &m[3] - q(4, 1) * m1 * &m[2] + q(6, 1) * m1 * m1 * &m[1] - q(3, 1) * pow(m1, 4);
        (c2, c3, c4)
    }
}

fn rel(a: f64, b: &Q, scale: f64) -> f64 {
    (a - f(b)).abs() / scale.max(f(&b.abs()))
}

fn window_strategy() -> impl Strategy<Value = Vec<(i64, i64)>> {
    prop::collection::vec((1i64..2000, 1i64..400), 2..40)
}

#[test]
fn two_trade_window() {
    // (2, 1) and (4, 3)
    let e = exact(&[(8, 8), (16, 24)]);
    assert_eq!(e.p(1), q(7, 2));
    assert_eq!(e.p(2), q(74, 5));
    let (c2, _, _) = e.central();
    assert_eq!(c2, q(51, 20));
    let (tm, stats) = window_stats(&e.window, 4).unwrap();
    assert_eq!(stats.moments[0], 3.5);
    assert!((stats.moments[1] - 14.8).abs() <= 1e-12 * 14.8);
    assert!((stats.variance.unwrap() - 2.55).abs() <= 1e-12 * 2.55);
    let a2 = corr_p_u2(&e.window, &tm).unwrap();
    assert!((a2.direct - 1.5).abs() <= 1e-12);
    let a5 = corr_p2_u(&e.window, &tm).unwrap();
    assert!((a5.direct + 3.6).abs() <= 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn moments_match_exact(raw in window_strategy()) {
        let e = exact(&raw);
        let (tm, stats) = window_stats(&e.window, 4).unwrap();
        for n in 1..=4 {
            prop_assert!(rel(tm.c(n), &e.c(n), 0.0) <= 1e-14);
            prop_assert!(rel(tm.u(n), &e.u(n), 0.0) <= 1e-14);
            prop_assert!(rel(stats.moments[n - 1], &e.p(n), 0.0) <= 1e-14);
            let fr = mean(e.pairs.iter().map(|(p, _)| pow(p, n)));
            prop_assert!(rel(stats.frequency[n - 1], &fr, 0.0) <= 1e-14);
        }
        // central moments carry the cancellation of the raw-moment expansion
        let (c2, c3, c4) = e.central();
        let p1 = f(&e.p(1));
        prop_assert!((stats.variance.unwrap_or(0.0) - f(&c2)).abs() <= 1e-13 * p1 * p1
            || stats.variance.is_none() && c2.is_negative());
        if stats.variance.is_some_and(|v| v > 0.0) {
            prop_assert!((stats.third_central.unwrap() - f(&c3)).abs() <= 1e-12 * p1.powi(3));
            prop_assert!((stats.fourth_central.unwrap() - f(&c4)).abs() <= 1e-12 * p1.powi(4));
        }
    }

    #[test]
    fn covariances_match_exact(raw in window_strategy()) {
        let e = exact(&raw);
        let tm = trade_moments(&e.window, 4).unwrap();
        for n in 1..=4 {
            let en = mean(e.pairs.iter().map(|(p, u)| pow(&(p * u), n)));
            // exactly zero in rational arithmetic
            prop_assert_eq!(&en - e.p(n) * e.u(n), Q::zero());
            prop_assert!(corr_pn_un(&e.window, &tm, n).unwrap().abs() <= 1e-12 * f(&en));
            prop_assert!(verify_factorization(&e.window, &tm, n).unwrap() <= 1e-13);
        }

        let e_pu2 = mean(e.pairs.iter().map(|(p, u)| p * u * u));
        let e_cu = mean(e.pairs.iter().map(|(p, u)| (p * u) * u));
        let sigma2_u = e.u(2) - e.u(1) * e.u(1);
        let a2_direct = &e_pu2 - e.p(1) * e.u(2);
        let corr_cu = &e_cu - e.c(1) * e.u(1);
        prop_assert_eq!(&a2_direct, &(&corr_cu - e.p(1) * &sigma2_u));
        let a2 = corr_p_u2(&e.window, &tm).unwrap();
        prop_assert!((a2.direct - f(&a2_direct)).abs() <= 1e-13 * a2.scale);
        prop_assert!((corr_c_u(&e.window, &tm) - f(&corr_cu)).abs() <= 1e-13 * a2.scale);
        prop_assert!(rel(volume_variance(&tm), &sigma2_u, f(&e.u(2))) <= 1e-13);

        let u_inv = mean(e.pairs.iter().map(|(_, u)| u.recip()));
        let e_p2u = mean(e.pairs.iter().map(|(p, u)| p * p * u));
        let e_c2_uinv = mean(e.pairs.iter().map(|(p, u)| pow(&(p * u), 2) / u));
        let a5_direct = &e_p2u - e.p(2) * e.u(1);
        let a5_identity = &e_c2_uinv - e.c(2) * &u_inv + e.p(2) * (e.u(2) * &u_inv - e.u(1));
        prop_assert_eq!(&a5_direct, &a5_identity);
        let a5 = corr_p2_u(&e.window, &tm).unwrap();
        prop_assert!((a5.direct - f(&a5_direct)).abs() <= 1e-13 * a5.scale);

        // sign statement, whenever the exact value is non-zero
        if !a2_direct.is_zero() {
            prop_assert_eq!(a2.direct > 0.0, a2_direct.is_positive());
        }
    }

    #[test]
    fn returns_match_exact(raw in window_strategy(), ref_num in 1i64..4000) {
        let e = exact(&raw);
        let p_ref = q(ref_num, 4);
        let tm = trade_moments(&e.window, 4).unwrap();
        let ps = price_central_stats(&tm);
        let rs = returns_stats(&ps.moments, f(&p_ref)).unwrap();
        let a: Vec<Q> = (0..=4).map(|n| if n == 0 { Q::one() } else { e.p(n) / pow(&p_ref, n) }).collect();
        let r: Vec<Q> = (1..=4)
            .map(|n| {
                (0..=n).fold(Q::zero(), |acc, k| {
                    let term = binom(n, k) * &a[k];
                    if (n - k) % 2 == 0 { acc + term } else { acc - term }
                })
            })
            .collect();
        let (c2, _, _) = e.central();
        let sigma2_r = &r[1] - &r[0] * &r[0];
        // p_ref^2 sigma_r^2 = sigma_p^2 holds exactly
        prop_assert_eq!(&sigma2_r * &p_ref * &p_ref, c2.clone());

        let via_trades = returns_moments_from_trades(&tm, f(&p_ref)).unwrap();
        for n in 1..=4 {
            let scale: f64 = (0..=n).map(|k| f(&binom(n, k)) * f(&a[k])).sum();
            prop_assert!((rs.returns[n - 1] - f(&r[n - 1])).abs() <= 1e-13 * scale);
            prop_assert!((via_trades[n - 1] - f(&r[n - 1])).abs() <= 1e-13 * scale);
        }
        if let Some(v) = rs.variance {
            prop_assert!((v - f(&sigma2_r)).abs() <= 1e-13 * f(&a[2]));
        }
    }

    #[test]
    fn inflation_matches_exact(base in window_strategy(), later in window_strategy()) {
        let (eb, el) = (exact(&base), exact(&later));
        let tb = trade_moments(&eb.window, 4).unwrap();
        let tl = trade_moments(&el.window, 4).unwrap();
        let inf = inflation_stats(&tb, &tl, 4).unwrap();
        let pb = eb.p(1);
        let scaled: Vec<Q> = (0..=4).map(|k| if k == 0 { Q::one() } else { el.p(k) / pow(&pb, k) }).collect();
        for n in 1..=4 {
            let exact_in = (0..=n).fold(Q::zero(), |acc, j| {
                let term = binom(n, j) * &scaled[n - j];
                if j % 2 == 0 { acc + term } else { acc - term }
            });
            let scale: f64 = (0..=n).map(|j| f(&binom(n, j)) * f(&scaled[n - j])).sum();
            prop_assert!((inf.moments[n - 1] - f(&exact_in)).abs() <= 1e-13 * scale);
            prop_assert!((inf.moments_via_indices[n - 1] - f(&exact_in)).abs() <= 1e-13 * scale);
        }
        let in1 = &scaled[1] - Q::one();
        let in2 = &scaled[2] - q(2, 1) * &scaled[1] + Q::one();
        let sigma2_in = &in2 - &in1 * &in1;
        let (c2_later, _, _) = el.central();
        prop_assert_eq!(&sigma2_in, &(c2_later / (&pb * &pb)));
        prop_assert!((inf.variance.unwrap() - f(&sigma2_in)).abs() <= 1e-13 * f(&scaled[2]));
    }
}
