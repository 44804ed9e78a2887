//! Finite-order characteristic-function approximations and their densities.
//!
//! With only the first `m` price moments known, the characteristic function
//! is approximated as
//!
//! ```text
//! F_m(x) = exp( sum_{j=1..m} i^j a_j x^j / j!  -  b x^(2n) ),   b > 0, 2n > m
//! ```
//!
//! where `a_j` are the cumulants matching the moments and the `b x^(2n)` term
//! makes `F_m` integrable without touching its first `m` derivatives at zero.
//! Densities use the convention `eta(p) = 1/(2 pi) * int F(x) e^{-ixp} dx` and
//! are evaluated with one FFT on a uniform `x` grid.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::moments::{central_from_raw, DEGENERATE_VARIANCE_REL};
use crate::{format_sig17, Error, Exec, Result};

/// `Re log F_m` targeted at the quadrature cutoff by the automatic regularizer.
pub const CUTOFF_LOG: f64 = -40.0;

/// Smallest automatic regularizer, as the value of `b x_max^(2n)`.
pub const REGULARIZER_FLOOR: f64 = 1e-6;

/// Safety factor on the automatic regularizer for `m = 4` with positive
/// excess kurtosis. With it, `b / 10` still keeps `Re log F_4(x) <= -a_2 x^2 / 4`.
pub const SHAPE_MARGIN: f64 = 10.0;

/// Default cutoff `x_max = DEFAULT_XMAX_SIGMAS / sigma`.
pub const DEFAULT_XMAX_SIGMAS: f64 = 40.0;

pub const DEFAULT_POINTS: usize = 1 << 14;

/// Densities whose total mass falls outside `1 +- NORMALIZATION_TOL` carry a
/// quality warning.
pub const NORMALIZATION_TOL: f64 = 1e-3;

/// Densities whose `|F(x_max)|` exceeds this carry a truncation warning.
pub const TRUNCATION_TOL: f64 = 1e-8;

/// Cumulants `a[1..=m]` that reproduce the raw moments `p[1..=m]`, `m <= 4`.
pub fn cumulants_from_moments(p: &[f64]) -> Result<Vec<f64>> {
    let m = p.len();
    if !(1..=4).contains(&m) {
        return Err(Error::Config(format!(
            "approximation order must be 1..=4, got {m}"
        )));
    }
    let (c2, c3, c4) = central_from_raw(p);
    let mut a = vec![p[0]];
    if let Some(var) = c2 {
        if var.is_nan() || var <= DEGENERATE_VARIANCE_REL * p[1].abs() {
            return Err(Error::DegenerateDistribution(format!(
                "variance {var:e} is not positive"
            )));
        }
        a.push(var);
    }
    if let Some(c3) = c3 {
        a.push(c3);
    }
    if let Some(c4) = c4 {
        a.push(c4 - 3.0 * a[1] * a[1]);
    }
    Ok(a)
}

/// Raw moments from cumulants `a[1..=m]`, `m <= 4`.
pub fn moments_from_cumulants(a: &[f64]) -> Vec<f64> {
    let k = |j: usize| a.get(j - 1).copied().unwrap_or(0.0);
    let (k1, k2, k3, k4) = (k(1), k(2), k(3), k(4));
    let all = [
        k1,
        k2 + k1 * k1,
        k3 + 3.0 * k2 * k1 + k1.powi(3),
        k4 + 4.0 * k3 * k1 + 3.0 * k2 * k2 + 6.0 * k2 * k1 * k1 + k1.powi(4),
    ];
    all[..a.len()].to_vec()
}

/// Regularizer choice for [`build_charfunc`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Param<T> {
    #[default]
    Auto,
    Fixed(T),
}

/// Fourier grid: cutoff `x_max` and point count. `None` means the default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_max: Option<f64>,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            x_max: None,
            points: DEFAULT_POINTS,
        }
    }
}

impl GridSpec {
    pub fn with_x_max(x_max: f64) -> Self {
        GridSpec {
            x_max: Some(x_max),
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.points < 4 || !self.points.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid size must be a power of two >= 4, got {}",
                self.points
            )));
        }
        if let Some(x) = self.x_max {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::Config(format!("x_max must be positive, got {x}")));
            }
        }
        Ok(())
    }

    /// Cutoff for a distribution of the given variance.
    pub fn resolve_x_max(&self, variance: Option<f64>) -> Result<f64> {
        self.validate()?;
        match (self.x_max, variance) {
            (Some(x), _) => Ok(x),
            (None, Some(v)) if v > 0.0 => Ok(DEFAULT_XMAX_SIGMAS / v.sqrt()),
            _ => Err(Error::Config(
                "x_max must be given when the variance is unknown".into(),
            )),
        }
    }

    /// Price grid conjugate to the `x` grid, centered at `center`.
    pub fn price_grid(&self, center: f64, variance: Option<f64>) -> Result<PriceGrid> {
        let x_max = self.resolve_x_max(variance)?;
        let step = PI / x_max;
        Ok(PriceGrid {
            start: center - (self.points / 2) as f64 * step,
            step,
            len: self.points,
        })
    }
}

/// Uniform price grid `start + k * step`, `k < len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl PriceGrid {
    pub fn point(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.point(self.len - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharFuncApprox {
    /// Cumulants `a[1..=m]`.
    pub coeffs: Vec<f64>,
    /// Even power `2n` of the regularizer.
    pub reg_power: u32,
    pub b: f64,
    /// Cutoff the regularizer was tuned for.
    pub x_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Regularized,
    /// Degree-m Taylor polynomial `1 + sum i^n p[n] x^n / n!`.
    TaylorTruncated,
}

fn i_pow(j: usize) -> Complex64 {
    match j % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn factorial(j: usize) -> f64 {
    (1..=j).map(|k| k as f64).product()
}

impl CharFuncApprox {
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn variance(&self) -> Option<f64> {
        self.coeffs.get(1).copied()
    }

    /// `log F_m(x)` without the location term `i a_1 x`.
    fn centered_log(&self, x: f64) -> Complex64 {
        let mut acc = Complex64::new(-self.b * x.powi(self.reg_power as i32), 0.0);
        for (j, &a) in self.coeffs.iter().enumerate().skip(1) {
            let j = j + 1;
            acc += i_pow(j) * (a * x.powi(j as i32) / factorial(j));
        }
        acc
    }

    /// Real part of the cumulant polynomial, i.e. `log |F_m(x)|` with `b = 0`.
    pub fn re_poly(&self, x: f64) -> f64 {
        (self.centered_log(x) + self.b * x.powi(self.reg_power as i32)).re
    }

    pub fn log_abs(&self, x: f64) -> f64 {
        self.centered_log(x).re
    }

    pub fn eval(&self, x: f64, mode: EvalMode) -> Complex64 {
        match mode {
            EvalMode::Regularized => {
                (self.centered_log(x) + Complex64::new(0.0, self.coeffs[0] * x)).exp()
            }
            EvalMode::TaylorTruncated => {
                let p = moments_from_cumulants(&self.coeffs);
                let mut acc = Complex64::new(1.0, 0.0);
                for (n, pn) in p.iter().enumerate() {
                    let n = n + 1;
                    acc += i_pow(n) * (pn * x.powi(n as i32) / factorial(n));
                }
                acc
            }
        }
    }
}

/// Builds `F_m` from cumulants. `x_max` is the quadrature cutoff the automatic
/// regularizer is tuned for (see [`GridSpec::resolve_x_max`]).
///
/// Automatic choices: `2n = 6` for `m = 4`, else `4`. `b` is the largest of
/// * the floor `REGULARIZER_FLOOR / x_max^(2n)`,
/// * the value making `Re log F_m(x_max) = CUTOFF_LOG`,
/// * for `m = 4` with `a_4 > 0`, `SHAPE_MARGIN` times the smallest `b` that
///   keeps `Re log F_4(x) <= -a_2 x^2 / 4` for every `x`.
pub fn build_charfunc(
    a: &[f64],
    b: Param<f64>,
    reg_power: Param<u32>,
    x_max: f64,
) -> Result<CharFuncApprox> {
    let m = a.len();
    if !(1..=4).contains(&m) {
        return Err(Error::Config(format!(
            "approximation order must be 1..=4, got {m}"
        )));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config("cumulants must be finite".into()));
    }
    if m >= 2 && a[1] <= 0.0 {
        return Err(Error::DegenerateDistribution(format!(
            "variance {:e} is not positive",
            a[1]
        )));
    }
    if !(x_max.is_finite() && x_max > 0.0) {
        return Err(Error::Config(format!(
            "x_max must be positive, got {x_max}"
        )));
    }
    let reg_power = match reg_power {
        Param::Auto if m == 4 => 6,
        Param::Auto => 4,
        Param::Fixed(q) => {
            if q % 2 != 0 || q as usize <= m {
                return Err(Error::Config(format!(
                    "regularizer power must be even and > {m}, got {q}"
                )));
            }
            q
        }
    };
    let mut cf = CharFuncApprox {
        coeffs: a.to_vec(),
        reg_power,
        b: 0.0,
        x_max,
    };
    cf.b = match b {
        Param::Fixed(b) => {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::Config(format!(
                    "regularizer b must be positive, got {b}"
                )));
            }
            b
        }
        Param::Auto => auto_b(&cf),
    };
    Ok(cf)
}

fn auto_b(cf: &CharFuncApprox) -> f64 {
    let xq = cf.x_max.powi(cf.reg_power as i32);
    let floor = REGULARIZER_FLOOR / xq;
    let cutoff = (cf.re_poly(cf.x_max) - CUTOFF_LOG) / xq;
    let mut shape = 0.0;
    if cf.order() == 4 && cf.coeffs[3] > 0.0 {
        // max over y = x^2 of (-(a2/4) y + (a4/24) y^2) / y^n
        let (a2, a4) = (cf.coeffs[1], cf.coeffs[3]);
        let n = (cf.reg_power / 2) as f64;
        let y = 6.0 * a2 * (n - 1.0) / (a4 * (n - 2.0));
        let g = (-(a2 / 4.0) * y + (a4 / 24.0) * y * y) / y.powf(n);
        shape = SHAPE_MARGIN * g;
    }
    floor.max(cutoff).max(shape)
}

#[derive(Debug, Clone, PartialEq)]
pub enum PdfWarning {
    /// Total mass outside `1 +- NORMALIZATION_TOL`.
    Normalization(f64),
    /// `|F_m(x_max)|` is not negligible, so the cutoff truncates the integral.
    Truncated(f64),
    /// `m = 1`: the density shape comes from the regularizer alone.
    RegularizerDominated,
}

impl std::fmt::Display for PdfWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PdfWarning::Normalization(s) => write!(f, "density integrates to {s}"),
            PdfWarning::Truncated(v) => {
                write!(f, "|F(x_max)| = {v:e}; cutoff truncates the integral")
            }
            PdfWarning::RegularizerDominated => {
                f.write_str("first-order approximation is regularizer-dominated")
            }
        }
    }
}

/// Density sampled on a uniform price grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PdfGrid {
    pub grid: PriceGrid,
    pub density: Vec<f64>,
    /// Largest imaginary part of the inversion relative to the largest real
    /// part. Zero for closed-form densities.
    pub imag_residue: f64,
    pub warnings: Vec<PdfWarning>,
}

impl PdfGrid {
    pub fn prices(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.grid.len).map(|k| self.grid.point(k))
    }

    /// `sum eta dp`.
    pub fn normalization(&self) -> f64 {
        trapezoid(&self.density, self.grid.step)
    }

    /// `price,density` CSV, one row per grid point.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(50 * self.grid.len + 16);
        out.push_str("price,density\n");
        for (p, d) in self.prices().zip(&self.density) {
            out.push_str(&format_sig17(p));
            out.push(',');
            out.push_str(&format_sig17(*d));
            out.push('\n');
        }
        out
    }
}

fn trapezoid(values: &[f64], step: f64) -> f64 {
    let n = values.len();
    let inner = crate::sum::csum(values.iter().copied());
    let ends = if n > 1 {
        0.5 * (values[0] + values[n - 1])
    } else {
        0.0
    };
    (inner - ends) * step
}

/// Density of `F_m` by discrete Fourier quadrature over `[-x_max, x_max)`.
///
/// The output price grid is conjugate to the `x` grid (`dp = pi / x_max`) and
/// centered at `a_1`. `x_max` defaults to the value the approximation was
/// built for.
pub fn pdf_from_charfunc(cf: &CharFuncApprox, grid: &GridSpec) -> Result<PdfGrid> {
    let spec = GridSpec {
        x_max: Some(grid.x_max.unwrap_or(cf.x_max)),
        points: grid.points,
    };
    let prices = spec.price_grid(cf.coeffs[0], None)?;
    let p = spec.points;
    let x_max = spec.x_max.unwrap_or(cf.x_max);
    let dx = 2.0 * x_max / p as f64;

    // G(x) = F(x) e^{-i a1 x}; the alternating signs shift both grids to be centered.
    let mut buf = Exec::default().map_range(p, |j| {
        let x = -x_max + j as f64 * dx;
        let g = cf.centered_log(x).exp();
        if j % 2 == 0 {
            g
        } else {
            -g
        }
    });
    FftPlanner::new().plan_fft_forward(p).process(&mut buf);

    let scale = dx / (2.0 * PI);
    let mut max_re: f64 = 0.0;
    let mut max_im: f64 = 0.0;
    let density = buf
        .iter()
        .enumerate()
        .map(|(k, z)| {
            let v = if k % 2 == 0 { *z } else { -*z } * scale;
            max_re = max_re.max(v.re.abs());
            max_im = max_im.max(v.im.abs());
            v.re
        })
        .collect();

    let mut pdf = PdfGrid {
        grid: prices,
        density,
        imag_residue: if max_re > 0.0 { max_im / max_re } else { 0.0 },
        warnings: Vec::new(),
    };
    let norm = pdf.normalization();
    if (norm - 1.0).abs() > NORMALIZATION_TOL {
        pdf.warnings.push(PdfWarning::Normalization(norm));
    }
    let edge = cf.log_abs(x_max).exp();
    if edge > TRUNCATION_TOL {
        pdf.warnings.push(PdfWarning::Truncated(edge));
    }
    if cf.order() == 1 {
        pdf.warnings.push(PdfWarning::RegularizerDominated);
    }
    Ok(pdf)
}

/// Closed-form normal density on the same grid [`pdf_from_charfunc`] would use
/// for a second-order approximation with this mean and variance.
pub fn gaussian_pdf_closed(mean: f64, variance: f64, grid: &GridSpec) -> Result<PdfGrid> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::DegenerateDistribution(format!(
            "variance {variance:e} is not positive"
        )));
    }
    let prices = grid.price_grid(mean, Some(variance))?;
    let norm = 1.0 / (2.0 * PI * variance).sqrt();
    let density = (0..prices.len)
        .map(|k| {
            let d = prices.point(k) - mean;
            norm * (-d * d / (2.0 * variance)).exp()
        })
        .collect();
    Ok(PdfGrid {
        grid: prices,
        density,
        imag_residue: 0.0,
        warnings: Vec::new(),
    })
}

/// `int p^n eta(p) dp` by the trapezoidal rule.
pub fn moments_from_pdf(pdf: &PdfGrid, n: u32) -> f64 {
    let terms: Vec<f64> = pdf
        .prices()
        .zip(&pdf.density)
        .map(|(p, d)| p.powi(n as i32) * d)
        .collect();
    trapezoid(&terms, pdf.grid.step)
}

/// `int (p - center)^n eta(p) dp` by the trapezoidal rule.
pub fn central_moment_from_pdf(pdf: &PdfGrid, center: f64, n: u32) -> f64 {
    let terms: Vec<f64> = pdf
        .prices()
        .zip(&pdf.density)
        .map(|(p, d)| (p - center).powi(n as i32) * d)
        .collect();
    trapezoid(&terms, pdf.grid.step)
}

/// Total negative mass `sum max(0, -eta) dp`.
pub fn negativity_mass(pdf: &PdfGrid) -> f64 {
    crate::sum::csum(pdf.density.iter().map(|&d| (-d).max(0.0))) * pdf.grid.step
}
