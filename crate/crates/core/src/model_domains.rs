//! The Laplacian on the n-ball, split into spherical-harmonic modes.
//!
//! Boundary maps: `G0 f = df/dn` (Neumann data) and `G1 f = f|_{dB}` (trace).
//! On the degree-`l` harmonics the Weyl function is the scalar
//! Neumann-to-Dirichlet value `M_l(lambda) = u(R)/u'(R)` with
//! `u(r) = r^{-(n-2)/2} J_nu(k r)`, `nu = l + (n-2)/2`, `k = sqrt(lambda)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schatten_analysis::least_squares;
use crate::special_functions::{
    bessel_j_ratio_next, log_bessel_j, scaled_norm_integral, BesselOrder, NormIntegralMethod,
    LOMMEL_MIN_RELATIVE_GAP,
};

/// Relative size of `u'(R)` below which `lambda` counts as a Neumann eigenvalue.
pub const POLE_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    n: usize,
    radius: f64,
}

/// Ball of dimension `n >= 2` and radius `radius > 0`.
pub fn make_ball(n: usize, radius: f64) -> Result<Domain> {
    if n < 2 {
        return Err(Error::Validation(format!(
            "dimension must be >= 2, got {n}"
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Validation(format!(
            "radius must be positive and finite, got {radius}"
        )));
    }
    Ok(Domain { n, radius })
}

impl Domain {
    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `(n - 2) / 2`, the shift between harmonic degree and Bessel order.
    pub fn order_shift(&self) -> f64 {
        (self.n as f64 - 2.0) / 2.0
    }

    pub fn mode(&self, ell: usize) -> Mode {
        let l = ell as f64;
        Mode {
            ell,
            nu: BesselOrder::new(l + self.order_shift()).expect("non-negative order"),
            lb_eigenvalue: l * (l + self.n as f64 - 2.0) / (self.radius * self.radius),
            multiplicity: multiplicity(self.n, ell),
        }
    }

    /// Number of boundary harmonics of degree `<= cutoff`.
    pub fn expanded_len(&self, cutoff: usize) -> u64 {
        binomial((cutoff + self.n - 1) as u64, (self.n - 1) as u64)
            + binomial((cutoff + self.n - 2) as u64, (self.n - 1) as u64)
    }

    /// Smallest cutoff whose expanded mode count reaches `len`.
    pub fn cutoff_for_len(&self, len: u64) -> usize {
        let mut cutoff = 0;
        while self.expanded_len(cutoff) < len {
            cutoff += 1;
        }
        cutoff
    }
}

/// Spherical-harmonic degree `ell` on the boundary sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub ell: usize,
    pub nu: BesselOrder,
    /// Eigenvalue of the Laplace-Beltrami operator on the boundary sphere.
    pub lb_eigenvalue: f64,
    pub multiplicity: u64,
}

/// Modes `0..=cutoff` in increasing degree.
pub fn modes(domain: &Domain, cutoff: usize) -> Vec<Mode> {
    (0..=cutoff).map(|ell| domain.mode(ell)).collect()
}

pub(crate) fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// Dimension of degree-`ell` harmonic polynomials in `n` variables.
pub fn multiplicity(n: usize, ell: usize) -> u64 {
    let (n, ell) = (n as u64, ell as u64);
    let all = binomial(ell + n - 1, n - 1);
    if ell < 2 {
        return all;
    }
    all - binomial(ell + n - 3, n - 1)
}

/// Resolvent parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub lambda: Complex64,
}

impl SpectralPoint {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !(re.is_finite() && im.is_finite()) {
            return Err(Error::Validation(format!(
                "lambda = {re} + {im}i is not finite"
            )));
        }
        Ok(Self {
            lambda: Complex64::new(re, im),
        })
    }

    pub fn conj(self) -> Self {
        Self {
            lambda: self.lambda.conj(),
        }
    }

    pub fn is_real(self) -> bool {
        self.lambda.im == 0.0
    }

    /// `sqrt(lambda)` with `Im k >= 0`.
    pub fn wavenumber(self) -> Complex64 {
        let k = self.lambda.sqrt();
        if k.im < 0.0 {
            -k
        } else {
            k
        }
    }

    fn off_neumann_half_line(self) -> Result<()> {
        if self.lambda.im == 0.0 && self.lambda.re >= 0.0 {
            return Err(Error::Validation(format!(
                "lambda = {} lies on [0, inf), where the Neumann spectrum sits",
                self.lambda.re
            )));
        }
        Ok(())
    }
}

impl From<Complex64> for SpectralPoint {
    fn from(lambda: Complex64) -> Self {
        Self { lambda }
    }
}

/// Pieces of `M_l` shared by the Weyl value and the gamma norm.
struct ModeKernel {
    /// `k J_{nu+1}(kR) / J_nu(kR)`
    kh: Complex64,
    weyl: Complex64,
}

fn kernel_with(
    domain: &Domain,
    mode: &Mode,
    lambda: SpectralPoint,
    k: Complex64,
) -> Result<ModeKernel> {
    let r = domain.radius;
    let nu = mode.nu.value();
    let h = bessel_j_ratio_next(nu, k * r)?;
    let kh = k * h;
    let shift = domain.order_shift() / r;
    // u'(R)/u(R) = nu/R - k h - (n-2)/(2R) = l/R - k h
    let denom = Complex64::new(mode.ell as f64 / r, 0.0) - kh;
    let scale = nu / r + kh.norm() + shift + k.norm();
    if denom.norm() <= POLE_TOLERANCE * scale {
        return Err(Error::NeumannPole {
            ell: mode.ell,
            lambda: lambda.lambda,
        });
    }
    Ok(ModeKernel {
        kh,
        weyl: denom.inv(),
    })
}

fn kernel(domain: &Domain, mode: &Mode, lambda: SpectralPoint) -> Result<ModeKernel> {
    lambda.off_neumann_half_line()?;
    kernel_with(domain, mode, lambda, lambda.wavenumber())
}

/// `M_l(lambda)`, the Neumann-to-Dirichlet value on degree-`l` harmonics.
pub fn weyl_value(domain: &Domain, mode: &Mode, lambda: SpectralPoint) -> Result<Complex64> {
    Ok(kernel(domain, mode, lambda)?.weyl)
}

/// Same as [`weyl_value`] but with the wavenumber supplied, so either square
/// root of `lambda` can be used.
pub fn weyl_value_with_wavenumber(domain: &Domain, mode: &Mode, k: Complex64) -> Result<Complex64> {
    let lambda = SpectralPoint::from(k * k);
    lambda.off_neumann_half_line()?;
    Ok(kernel_with(domain, mode, lambda, k)?.weyl)
}

/// `||gamma(lambda) e||^2` for a boundary harmonic `e` of degree `l` with unit
/// norm in `L^2` of the boundary sphere.
///
/// Equals `|M|^2 / R * int_0^R |J_nu(kr)/J_nu(kR)|^2 r dr`. Away from the real
/// axis the integral has Lommel's closed form and the whole expression
/// collapses to `Im M / Im lambda`; near the real axis it is integrated.
pub fn gamma_norm_squared(domain: &Domain, mode: &Mode, lambda: SpectralPoint) -> Result<f64> {
    let ker = kernel(domain, mode, lambda)?;
    let r = domain.radius;
    let k = lambda.wavenumber();
    let lam = lambda.lambda;
    let m2 = ker.weyl.norm_sqr();
    if lam.im.abs() >= LOMMEL_MIN_RELATIVE_GAP * lam.norm() {
        // Im M = Im(k h) |M|^2, evaluated without cancellation
        return Ok(ker.kh.im * m2 / lam.im);
    }
    let (value, log_scale) = scaled_norm_integral(mode.nu, k, r, NormIntegralMethod::Quadrature)?;
    let edge = log_bessel_j(mode.nu, k * r)?.ok_or(Error::Pole {
        what: "J_nu(kR)",
        nu: mode.nu.value(),
        z: k * r,
    })?;
    let ratio = value * (2.0 * (log_scale - edge.log_magnitude)).exp();
    Ok(ratio * m2 / r)
}

/// `||gamma(lambda) e||`.
pub fn gamma_norm(domain: &Domain, mode: &Mode, lambda: SpectralPoint) -> Result<f64> {
    Ok(gamma_norm_squared(domain, mode, lambda)?.sqrt())
}

/// Radial profile of `gamma(lambda) e` at radius `r`, in the weighted radial
/// space `L^2(r^{n-1} dr)`.
pub fn gamma_profile(
    domain: &Domain,
    mode: &Mode,
    lambda: SpectralPoint,
    r: f64,
) -> Result<Complex64> {
    let weyl = weyl_value(domain, mode, lambda)?;
    let k = lambda.wavenumber();
    let radius = domain.radius;
    let boundary = radius.powf((domain.n as f64 - 1.0) / 2.0);
    if r == 0.0 && mode.ell > 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let den = log_bessel_j(mode.nu, k * radius)?.ok_or(Error::Pole {
        what: "J_nu(kR)",
        nu: mode.nu.value(),
        z: k * radius,
    })?;
    let nu = mode.nu.value();
    let ratio = if r == 0.0 {
        // r^{-nu} J_nu(kr) -> (k/2)^nu / Gamma(nu + 1)
        let log_origin = (k * radius / 2.0).ln() * nu - libm::lgamma(nu + 1.0);
        (log_origin - den.as_log()).exp()
    } else {
        match log_bessel_j(mode.nu, k * r)? {
            None => return Ok(Complex64::new(0.0, 0.0)),
            Some(num) => num.div(den).exp() * (r / radius).powf(-domain.order_shift()),
        }
    };
    Ok(ratio * weyl / boundary)
}

/// Least-squares slope of `log lambda_k` against `log k` for the sorted,
/// multiplicity-expanded Laplace-Beltrami eigenvalues of the boundary sphere,
/// over the positive eigenvalues with index in `[K/10, K]`.
pub fn lb_counting_check(domain: &Domain, cutoff: usize) -> Result<f64> {
    let total = domain.expanded_len(cutoff);
    if total < 100 {
        return Err(Error::InsufficientData(format!(
            "cutoff {cutoff} gives {total} eigenvalues, need at least 100"
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let lo = (total / 10).max(2);
    let mut k: u64 = 0;
    for mode in modes(domain, cutoff) {
        for _ in 0..mode.multiplicity {
            k += 1;
            if k >= lo && mode.lb_eigenvalue > 0.0 {
                xs.push((k as f64).ln());
                ys.push(mode.lb_eigenvalue.ln());
            }
        }
    }
    let (slope, _, _) = least_squares(&xs, &ys);
    Ok(slope)
}
