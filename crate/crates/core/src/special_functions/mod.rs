//! Bessel functions of the first kind for real order `nu >= 0` and complex
//! argument.
//!
//! Evaluation paths:
//!
//! * ascending power series in log-scaled form whenever the series is well
//!   conditioned (the ratio of the summed term magnitudes to the sum stays
//!   below [`SERIES_CONDITION_LIMIT`]);
//! * otherwise a backward recurrence started at a higher order `nu + m` where
//!   the series is well conditioned, seeded with the continued fraction for
//!   `J_{nu+m+1}/J_{nu+m}` and normalized by the series value at that anchor;
//! * the continued fraction alone for the ratios `J_{nu+1}/J_nu` and
//!   `J_nu/J_nu'`, which never forms the (possibly underflowing) values.
//!
//! All results for `nu` up to ~1e4 go through [`LogScaledComplex`] before being
//! exponentiated.

pub mod quadrature;

use std::f64::consts::PI;

use libm::lgamma as ln_gamma;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Series results with a larger cancellation factor are rejected in favour of
/// the recurrence path.
pub const SERIES_CONDITION_LIMIT: f64 = 1.0e3;

/// Lommel's closed form is used when `|Im k^2| >= LOMMEL_MIN_RELATIVE_GAP * |k|^2`;
/// below that the integral is evaluated by adaptive quadrature.
pub const LOMMEL_MIN_RELATIVE_GAP: f64 = 1.0e-4;

/// Absolute tolerance of the quadrature fallback (applied to the integral
/// normalized by `|J_nu(kR)|^2`).
pub const QUADRATURE_ABS_TOL: f64 = 1.0e-12;

const LN_MAX: f64 = 709.0;
const LN_MIN: f64 = -708.0;

/// Order of a Bessel function: finite and non-negative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct BesselOrder(f64);

impl BesselOrder {
    pub fn new(nu: f64) -> Result<Self> {
        if !nu.is_finite() || nu < 0.0 {
            return Err(Error::Validation(format!(
                "Bessel order must be finite and non-negative, got {nu}"
            )));
        }
        Ok(BesselOrder(nu))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for BesselOrder {
    type Error = Error;
    fn try_from(nu: f64) -> Result<Self> {
        BesselOrder::new(nu)
    }
}

/// A nonzero complex number stored as `exp(log_magnitude + i*phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogScaledComplex {
    pub log_magnitude: f64,
    /// In `(-pi, pi]`.
    pub phase: f64,
}

impl LogScaledComplex {
    pub fn from_log(l: Complex64) -> Self {
        LogScaledComplex {
            log_magnitude: l.re,
            phase: wrap_phase(l.im),
        }
    }

    /// `None` for zero.
    pub fn from_complex(z: Complex64) -> Option<Self> {
        if z == Complex64::new(0.0, 0.0) {
            None
        } else {
            Some(Self::from_log(z.ln()))
        }
    }

    pub fn as_log(self) -> Complex64 {
        Complex64::new(self.log_magnitude, self.phase)
    }

    /// Exponentiates; values outside the double range saturate to 0 or inf.
    pub fn exp(self) -> Complex64 {
        Complex64::from_polar(self.log_magnitude.exp(), self.phase)
    }

    pub fn conj(self) -> Self {
        LogScaledComplex {
            log_magnitude: self.log_magnitude,
            phase: wrap_phase(-self.phase),
        }
    }

    pub fn mul(self, other: Self) -> Self {
        Self::from_log(self.as_log() + other.as_log())
    }

    pub fn div(self, other: Self) -> Self {
        Self::from_log(self.as_log() - other.as_log())
    }
}

fn wrap_phase(p: f64) -> f64 {
    if p > -PI && p <= PI {
        return p;
    }
    let two_pi = 2.0 * PI;
    let mut w = p.rem_euclid(two_pi);
    if w > PI {
        w -= two_pi;
    }
    if w <= -PI {
        w += two_pi;
    }
    w
}

fn is_zero(z: Complex64) -> bool {
    z.re == 0.0 && z.im == 0.0
}

/// Log-scaled ascending series: returns `(log prefactor, sum, condition)` with
/// `J_nu(z) = exp(log prefactor) * sum`.
fn series_parts(nu: f64, z: Complex64) -> (Complex64, Complex64, f64) {
    let prefactor = (z * 0.5).ln() * nu - ln_gamma(nu + 1.0);
    let q = -(z * z) * 0.25;
    let qn = q.norm();
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut abs_sum = 1.0;
    let mut k = 0.0f64;
    loop {
        k += 1.0;
        term *= q / (k * (nu + k));
        sum += term;
        let tn = term.norm();
        abs_sum += tn;
        // terms decrease once k(nu+k) exceeds |z|^2/4
        if k * (nu + k) > qn && tn <= 1e-17 * sum.norm().max(1e-300) {
            break;
        }
        if k > 1.0e6 {
            break;
        }
    }
    let condition = abs_sum / sum.norm().max(f64::MIN_POSITIVE);
    (prefactor, sum, condition)
}

/// Continued fraction for `J_{nu+1}(z) / J_nu(z)` (modified Lentz).
///
/// The fraction depends on `z` only through `2(nu+j)/z`, so the result is
/// exactly odd in `z`.
pub fn bessel_j_ratio_next(nu: f64, z: Complex64) -> Result<Complex64> {
    if z.norm() < 1e-150 {
        return Ok(z / (2.0 * (nu + 1.0)));
    }
    let tiny = Complex64::new(1e-300, 0.0);
    let inv_z = z.inv();
    let b = |j: f64| inv_z * (2.0 * (nu + j));
    let mut f = b(1.0);
    if f.norm() < 1e-300 {
        f = tiny;
    }
    let mut c = f;
    let mut d = Complex64::new(0.0, 0.0);
    let max_iter = 20_000 + (4.0 * z.norm()) as usize;
    for j in 2..max_iter {
        let bj = b(j as f64);
        d = bj - d;
        if d.norm() < 1e-300 {
            d = tiny;
        }
        c = bj - c.inv();
        if c.norm() < 1e-300 {
            c = tiny;
        }
        d = d.inv();
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).norm() < 2.0 * f64::EPSILON {
            return Ok(f.inv());
        }
    }
    Err(Error::Validation(format!(
        "continued fraction for J_(nu+1)/J_nu did not converge (nu = {nu}, z = {z})"
    )))
}

/// Log-scaled `J_nu(z)`. `Ok(None)` signals that the value is exactly zero
/// (`z = 0`, `nu > 0`).
pub fn log_bessel_j(nu: BesselOrder, z: Complex64) -> Result<Option<LogScaledComplex>> {
    let nu = nu.value();
    check_argument(z)?;
    if is_zero(z) {
        return Ok(if nu == 0.0 {
            Some(LogScaledComplex {
                log_magnitude: 0.0,
                phase: 0.0,
            })
        } else {
            None
        });
    }
    let (pre, sum, cond) = series_parts(nu, z);
    if cond <= SERIES_CONDITION_LIMIT {
        return Ok(Some(LogScaledComplex::from_log(pre + sum.ln())));
    }

    // Anchor at a higher order where the series is well conditioned.
    let mut m = (z.norm() - nu).ceil().max(1.0);
    let (anchor_log, anchor_order) = loop {
        let mu = nu + m;
        let (p, s, c) = series_parts(mu, z);
        if c <= SERIES_CONDITION_LIMIT {
            break (p + s.ln(), mu);
        }
        m *= 2.0;
    };

    // Backward recurrence J_{j-1} = (2j/z) J_j - J_{j+1}, starting from the
    // continued-fraction ratio at the anchor.
    let mut upper = bessel_j_ratio_next(anchor_order, z)?;
    let mut current = Complex64::new(1.0, 0.0);
    let mut log_shift = 0.0;
    let inv_z = z.inv();
    let steps = m as usize;
    for i in 0..steps {
        let order = anchor_order - i as f64;
        let lower = inv_z * (2.0 * order) * current - upper;
        upper = current;
        current = lower;
        let size = current.norm();
        if size > 1e200 {
            current /= size;
            upper /= size;
            log_shift += size.ln();
        }
    }
    if is_zero(current) {
        return Ok(None);
    }
    let l = anchor_log + current.ln() + log_shift;
    Ok(Some(LogScaledComplex::from_log(l)))
}

fn check_argument(z: Complex64) -> Result<()> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Validation(format!(
            "argument must be finite, got {z}"
        )));
    }
    Ok(())
}

fn to_value(nu: f64, z: Complex64, l: Option<LogScaledComplex>) -> Result<Complex64> {
    match l {
        None => Ok(Complex64::new(0.0, 0.0)),
        Some(l) if l.log_magnitude > LN_MAX || l.log_magnitude < LN_MIN => Err(Error::Overflow {
            nu,
            z,
            log_magnitude: l.log_magnitude,
        }),
        Some(l) => Ok(l.exp()),
    }
}

/// `sum_i c_i * v_i` for log-scaled `v_i`, combined at the largest magnitude.
fn log_linear_combination(
    terms: &[(Complex64, Option<LogScaledComplex>)],
) -> Option<LogScaledComplex> {
    let scale = terms
        .iter()
        .filter_map(|(c, v)| {
            v.filter(|_| !is_zero(*c))
                .map(|v| v.log_magnitude + c.norm().ln())
        })
        .fold(f64::NEG_INFINITY, f64::max);
    if !scale.is_finite() {
        return None;
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (c, v) in terms {
        if let Some(v) = v {
            let shifted = LogScaledComplex {
                log_magnitude: v.log_magnitude - scale,
                phase: v.phase,
            };
            acc += c * shifted.exp();
        }
    }
    LogScaledComplex::from_complex(acc).map(|a| LogScaledComplex::from_log(a.as_log() + scale))
}

/// `J_nu(z)`.
pub fn bessel_j(nu: BesselOrder, z: Complex64) -> Result<Complex64> {
    to_value(nu.value(), z, log_bessel_j(nu, z)?)
}

/// Log-scaled `J_nu'(z)`; `Ok(None)` when the derivative is exactly zero.
pub fn log_bessel_j_prime(nu: BesselOrder, z: Complex64) -> Result<Option<LogScaledComplex>> {
    let v = nu.value();
    check_argument(z)?;
    if is_zero(z) {
        return if v == 1.0 {
            Ok(LogScaledComplex::from_complex(Complex64::new(0.5, 0.0)))
        } else if v == 0.0 || v > 1.0 {
            Ok(None)
        } else {
            Err(Error::Pole {
                what: "1/J_nu'",
                nu: v,
                z,
            })
        };
    }
    let next = log_bessel_j(BesselOrder(v + 1.0), z)?;
    if v >= 1.0 {
        let prev = log_bessel_j(BesselOrder(v - 1.0), z)?;
        Ok(log_linear_combination(&[
            (Complex64::new(0.5, 0.0), prev),
            (Complex64::new(-0.5, 0.0), next),
        ]))
    } else {
        let own = log_bessel_j(nu, z)?;
        Ok(log_linear_combination(&[
            (z.inv() * v, own),
            (Complex64::new(-1.0, 0.0), next),
        ]))
    }
}

/// `J_nu'(z) = (J_{nu-1}(z) - J_{nu+1}(z)) / 2`.
pub fn bessel_j_prime(nu: BesselOrder, z: Complex64) -> Result<Complex64> {
    to_value(nu.value(), z, log_bessel_j_prime(nu, z)?)
}

/// `J_nu(z) / J_nu'(z)` from the continued fraction, stable for large orders.
pub fn bessel_ratio(nu: BesselOrder, z: Complex64) -> Result<Complex64> {
    let v = nu.value();
    check_argument(z)?;
    if is_zero(z) {
        return if v > 0.0 {
            Ok(Complex64::new(0.0, 0.0))
        } else {
            Err(Error::Pole {
                what: "J_nu'",
                nu: v,
                z,
            })
        };
    }
    let h = bessel_j_ratio_next(v, z)?;
    let a = z.inv() * v;
    let denom = a - h;
    if denom.norm() <= 1e-13 * (a.norm() + h.norm() + z.inv().norm()) {
        return Err(Error::Pole {
            what: "J_nu'",
            nu: v,
            z,
        });
    }
    Ok(denom.inv())
}

/// Logarithmic derivative scaled by `k`: `k J_nu'(kR) / J_nu(kR)`.
///
/// Invariant under `k -> -k`.
pub fn scaled_log_derivative(nu: BesselOrder, k: Complex64, radius: f64) -> Result<Complex64> {
    let h = bessel_j_ratio_next(nu.value(), k * radius)?;
    Ok(Complex64::new(nu.value() / radius, 0.0) - k * h)
}

/// How [`bessel_norm_integral_with`] evaluates the integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormIntegralMethod {
    /// Lommel's closed form unless `k^2` is nearly real.
    Auto,
    Lommel,
    Quadrature,
}

/// `int_0^R |J_nu(k r)|^2 r dr`.
pub fn bessel_norm_integral(nu: BesselOrder, k: Complex64, radius: f64) -> Result<f64> {
    bessel_norm_integral_with(nu, k, radius, NormIntegralMethod::Auto)
}

pub fn bessel_norm_integral_with(
    nu: BesselOrder,
    k: Complex64,
    radius: f64,
    method: NormIntegralMethod,
) -> Result<f64> {
    let (value, log_scale) = scaled_norm_integral(nu, k, radius, method)?;
    Ok(value * (2.0 * log_scale).exp())
}

/// `int_0^R |J_nu(kr)|^2 r dr = value * exp(2 * log_scale)`; `log_scale` is
/// `ln |J_nu(kR)|` whenever that value is nonzero.
pub fn scaled_norm_integral(
    nu: BesselOrder,
    k: Complex64,
    radius: f64,
    method: NormIntegralMethod,
) -> Result<(f64, f64)> {
    check_argument(k)?;
    if is_zero(k) {
        return Err(Error::Validation("norm integral requires k != 0".into()));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Validation(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let k2 = k * k;
    let gap = k2.im.abs() / k2.norm();
    let use_lommel = match method {
        NormIntegralMethod::Auto => gap >= LOMMEL_MIN_RELATIVE_GAP,
        NormIntegralMethod::Lommel => true,
        NormIntegralMethod::Quadrature => false,
    };
    let edge = log_bessel_j(nu, k * radius)?;
    if use_lommel {
        if k2.im == 0.0 {
            return Err(Error::Validation(
                "Lommel's closed form needs a non-real k^2".into(),
            ));
        }
        let edge = edge.ok_or(Error::Pole {
            what: "J_nu(kR)",
            nu: nu.value(),
            z: k * radius,
        })?;
        // R [conj(w) - w] / (k^2 - conj(k)^2) with w = k J'/J; Im w = -Im(k h).
        let h = bessel_j_ratio_next(nu.value(), k * radius)?;
        let im_w = -(k * h).im;
        let value = -radius * im_w / k2.im;
        return Ok((value, edge.log_magnitude));
    }
    let sampled = sample_log_max(nu, k, radius)?;
    let scale = edge.map_or(sampled, |e| e.log_magnitude.max(sampled));
    let integrand = |r: f64| -> Result<f64> {
        if r == 0.0 {
            return Ok(0.0);
        }
        Ok(match log_bessel_j(nu, k * r)? {
            None => 0.0,
            Some(l) => (2.0 * (l.log_magnitude - scale)).exp() * r,
        })
    };
    let (value, _) = quadrature::integrate(integrand, 0.0, radius, QUADRATURE_ABS_TOL, 4000)?;
    Ok((value, scale))
}

fn sample_log_max(nu: BesselOrder, k: Complex64, radius: f64) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for i in 1..=64 {
        let r = radius * i as f64 / 64.0;
        if let Some(l) = log_bessel_j(nu, k * r)? {
            best = best.max(l.log_magnitude);
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::Validation(
            "J_nu(kr) vanishes on the whole sample".into(),
        ))
    }
}
