//! Power-law fits of singular spectra, Schatten partial sums and threshold
//! verdicts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of points accepted by [`fit_decay_exponent`].
pub const MIN_FIT_POINTS: usize = 50;

/// Inclusive, 1-based index window `[start, end]` into a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KRange {
    pub start: usize,
    pub end: usize,
}

impl KRange {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start == 0 || end < start {
            return Err(Error::Validation(format!(
                "k range [{start}, {end}] must satisfy 1 <= start <= end"
            )));
        }
        Ok(Self { start, end })
    }

    /// `[len/10, len]`, skipping the pre-asymptotic head.
    pub fn default_for(len: usize) -> Result<Self> {
        Self::new((len / 10).max(1), len)
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// `s_k ~ exp(intercept) * k^(-exponent)` over `k_range`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub intercept: f64,
    pub k_range: KRange,
    pub rms_residual: f64,
}

/// Ordinary least squares of `y` on `x`: `(slope, intercept, rms residual)`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| (b - intercept - slope * a).powi(2))
        .sum();
    (slope, intercept, (ss / n).sqrt())
}

/// Fits `log s_k = intercept - exponent * log k` over `k_range` (1-based).
pub fn fit_decay_exponent(values: &[f64], k_range: KRange) -> Result<DecayFit> {
    if k_range.end > values.len() {
        return Err(Error::InsufficientData(format!(
            "k range ends at {} but the spectrum has {} values",
            k_range.end,
            values.len()
        )));
    }
    if k_range.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "k range [{}, {}] has {} points, need at least {MIN_FIT_POINTS}",
            k_range.start,
            k_range.end,
            k_range.len()
        )));
    }
    let mut xs = Vec::with_capacity(k_range.len());
    let mut ys = Vec::with_capacity(k_range.len());
    for k in k_range.start..=k_range.end {
        let s = values[k - 1];
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InsufficientData(format!(
                "s_{k} = {s} is not positive; shrink the fit window"
            )));
        }
        xs.push((k as f64).ln());
        ys.push(s.ln());
    }
    let (slope, intercept, rms_residual) = least_squares(&xs, &ys);
    Ok(DecayFit {
        exponent: -slope,
        intercept,
        k_range,
        rms_residual,
    })
}

/// `sum_{k <= K} s_k^p` at each checkpoint `K` (clamped to the spectrum length).
pub fn schatten_partial_sums(values: &[f64], p: f64, checkpoints: &[usize]) -> Result<Vec<f64>> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::Validation(format!("p must be positive, got {p}")));
    }
    let mut prefix = Vec::with_capacity(values.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &s in values {
        acc += s.powf(p);
        prefix.push(acc);
    }
    Ok(checkpoints
        .iter()
        .map(|&k| prefix[k.min(values.len())])
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdKind {
    RobinNeumann,
    DirichletNeumann,
    /// Robin pair whose parameter difference lies in `S_p0`.
    ParameterDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub kind: ThresholdKind,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    #[serde(rename = "p")]
    pub p_threshold: f64,
}

impl ThresholdSpec {
    /// Decay exponent `1/p` of the threshold.
    pub fn exponent(&self) -> f64 {
        1.0 / self.p_threshold
    }
}

/// Membership threshold: the resolvent difference lies in `S_p` for every
/// `p > p_threshold`.
pub fn threshold(kind: ThresholdKind, n: usize, p0: Option<f64>) -> Result<ThresholdSpec> {
    if n < 2 {
        return Err(Error::Validation(format!(
            "dimension must be >= 2, got {n}"
        )));
    }
    let d = (n - 1) as f64;
    let (p_threshold, p0) = match kind {
        ThresholdKind::RobinNeumann => (d / 3.0, None),
        ThresholdKind::DirichletNeumann => (d / 2.0, None),
        ThresholdKind::ParameterDifference => {
            let p0 = p0.ok_or_else(|| {
                Error::Validation("the parameter-difference threshold needs p0".into())
            })?;
            if !(p0 > 0.0 && p0.is_finite()) {
                return Err(Error::Validation(format!("p0 must be positive, got {p0}")));
            }
            (d * p0 / (d + 3.0 * p0), Some(p0))
        }
    };
    Ok(ThresholdSpec {
        kind,
        n,
        p0,
        p_threshold,
    })
}

/// Critical `p0` for a parameter difference with diagonal entries decaying
/// like `(1 + l)^(-q)` on the `(n-1)`-sphere.
pub fn p0_for_power_decay(n: usize, q: f64) -> Result<f64> {
    if n < 2 || !(q > 0.0) {
        return Err(Error::Validation(format!(
            "need n >= 2 and q > 0, got n = {n}, q = {q}"
        )));
    }
    Ok((n - 1) as f64 / q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Consistency {
    Consistent,
    Inconsistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub verdict: Consistency,
    pub measured_exponent: f64,
    /// Smallest `p` with `s_k in l^p` implied by the measured exponent.
    pub implied_p: f64,
    pub p_threshold: f64,
    /// `p_threshold - implied_p`; negative means slower decay than required.
    pub margin: f64,
    pub tolerance: f64,
}

impl Verdict {
    pub fn is_consistent(&self) -> bool {
        self.verdict == Consistency::Consistent
    }
}

/// Consistent iff `1/exponent <= p_threshold + tolerance`. `tolerance` is on
/// the `p` scale; see [`p_tolerance_from_exponent`].
pub fn verdict(fit: &DecayFit, spec: &ThresholdSpec, tolerance: f64) -> Verdict {
    let implied_p = if fit.exponent > 0.0 {
        1.0 / fit.exponent
    } else {
        f64::INFINITY
    };
    let margin = spec.p_threshold - implied_p;
    let verdict = if margin >= -tolerance {
        Consistency::Consistent
    } else {
        Consistency::Inconsistent
    };
    Verdict {
        verdict,
        measured_exponent: fit.exponent,
        implied_p,
        p_threshold: spec.p_threshold,
        margin,
        tolerance,
    }
}

/// Converts an exponent tolerance into the `p` scale at the threshold
/// exponent: `1/(alpha - tol) - 1/alpha`.
pub fn p_tolerance_from_exponent(spec: &ThresholdSpec, exponent_tolerance: f64) -> f64 {
    let alpha = spec.exponent();
    if exponent_tolerance >= alpha {
        return f64::INFINITY;
    }
    1.0 / (alpha - exponent_tolerance) - 1.0 / alpha
}
