//! Boundary parameters, realizations and resolvent differences.
//!
//! A realization is fixed by a boundary condition `f|_{dB} = Theta df/dn`.
//! Per degree-`l` harmonic the resolvent difference of two realizations is the
//! rank-one operator `f -> c_l <f, gamma(conj lambda) e> gamma(lambda) e`, with
//! `c_l = (theta_l - M_l)^{-1}` against Neumann and `-M_l^{-1}` for Dirichlet.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_domains::{gamma_norm_squared, modes, weyl_value, Domain, Mode, SpectralPoint};

/// Tolerance of the symmetry-class checks.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
/// `|theta - M| < EIGENVALUE_HIT_TOLERANCE * (1 + |theta|)` marks an eigenvalue.
pub const EIGENVALUE_HIT_TOLERANCE: f64 = 1e-13;
/// Absolute tolerance of the real eigenvalue bisection.
pub const EIGENVALUE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryClass {
    SelfAdjoint,
    /// `Im theta >= 0`
    Dissipative,
    /// `Im theta <= 0`
    Accumulative,
}

impl fmt::Display for SymmetryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SymmetryClass::SelfAdjoint => "self-adjoint",
            SymmetryClass::Dissipative => "dissipative",
            SymmetryClass::Accumulative => "accumulative",
        };
        f.write_str(s)
    }
}

/// `coef * (1 + l)^power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub coef: Complex64,
    pub power: f64,
}

/// `theta_l = sum_i c_i (1 + l)^{p_i}`, or its reciprocal when `inverted`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalRule {
    pub terms: Vec<PowerTerm>,
    #[serde(default)]
    pub inverted: bool,
}

impl DiagonalRule {
    pub fn constant(c: Complex64) -> Self {
        Self {
            terms: vec![PowerTerm {
                coef: c,
                power: 0.0,
            }],
            inverted: false,
        }
    }

    pub fn real(c: f64) -> Self {
        Self::constant(Complex64::new(c, 0.0))
    }

    /// Robin condition `df/dn = beta f`, i.e. `theta = 1/beta`.
    pub fn inverse_of(beta: DiagonalRule) -> Self {
        Self {
            terms: beta.terms,
            inverted: !beta.inverted,
        }
    }

    fn raw(&self, ell: usize) -> Complex64 {
        let x = 1.0 + ell as f64;
        self.terms.iter().map(|t| t.coef * x.powf(t.power)).sum()
    }

    pub fn value(&self, ell: usize) -> Result<Complex64> {
        let b = self.raw(ell);
        if !self.inverted {
            return Ok(b);
        }
        if b.norm() == 0.0 {
            return Err(Error::Singular(format!(
                "inverted diagonal rule has a zero entry at l = {ell}"
            )));
        }
        Ok(b.inv())
    }

    /// Terms with equal powers merged, zero coefficients dropped, sorted by
    /// decreasing power.
    fn normalized(&self) -> Vec<PowerTerm> {
        let mut out: Vec<PowerTerm> = Vec::new();
        for t in &self.terms {
            match out.iter_mut().find(|o| o.power == t.power) {
                Some(o) => o.coef += t.coef,
                None => out.push(*t),
            }
        }
        out.retain(|t| t.coef.norm() > 0.0);
        out.sort_by(|a, b| b.power.total_cmp(&a.power));
        out
    }

    /// Tail certificate: `|theta_l| >= delta` for every `l >= tail_index`.
    pub fn ess_gap(&self) -> Result<EssGap> {
        let terms = self.normalized();
        let Some(lead) = terms.first().copied() else {
            return Err(Error::EssentialSpectrumGap(
                "theta vanishes identically; use the Dirichlet realization".into(),
            ));
        };
        let p = lead.power;
        let c = lead.coef.norm();
        let decays = if self.inverted { p > 0.0 } else { p < 0.0 };
        if decays {
            return Err(Error::EssentialSpectrumGap(format!(
                "theta_l -> 0 as l -> inf (leading power {}{}), so 0 is a limit point",
                if self.inverted { "-" } else { "" },
                p
            )));
        }
        // the lower-order terms are at most half the leading one for x >= x0
        let ratio = |x: f64| -> f64 {
            terms[1..]
                .iter()
                .map(|t| t.coef.norm() / c * x.powf(t.power - p))
                .sum()
        };
        let mut hi = 1.0_f64;
        while ratio(hi) > 0.5 {
            hi *= 2.0;
            if hi > 1e15 {
                return Err(Error::EssentialSpectrumGap(
                    "leading term never dominates the rule".into(),
                ));
            }
        }
        let mut lo = (hi / 2.0).max(1.0);
        if ratio(lo) <= 0.5 {
            hi = lo;
        }
        while hi - lo > 1.0 {
            let mid = (0.5 * (lo + hi)).floor();
            if ratio(mid) <= 0.5 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let x0 = hi.ceil();
        let delta = if self.inverted {
            // |b| <= 1.5 c x^p <= 1.5 c x0^p because p <= 0
            1.0 / (1.5 * c * x0.powf(p))
        } else {
            0.5 * c * x0.powf(p)
        };
        Ok(EssGap {
            delta,
            tail_index: (x0 - 1.0) as usize,
        })
    }

    /// Degrees sampled by the symmetry check: a dense head and a geometric tail.
    fn sample_degrees() -> impl Iterator<Item = usize> {
        let tail = (0..60).map(|j| (2000.0 * 1.5f64.powi(j)) as usize);
        (0..2000).chain(tail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EssGap {
    pub delta: f64,
    pub tail_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Representation {
    Diagonal(DiagonalRule),
    /// Bounded matrix on the multiplicity-expanded modes up to some cutoff,
    /// ordered by degree.
    Dense(DMatrix<Complex64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryOperator {
    representation: Representation,
    class: SymmetryClass,
    ess_gap: Option<EssGap>,
}

/// Validates `representation` against `class` and, for diagonal rules,
/// derives the essential-spectrum-gap certificate.
pub fn make_boundary_operator(
    representation: Representation,
    class: SymmetryClass,
) -> Result<BoundaryOperator> {
    let ess_gap = match &representation {
        Representation::Diagonal(rule) => {
            check_diagonal_class(rule, class)?;
            Some(rule.ess_gap()?)
        }
        Representation::Dense(m) => {
            check_dense_class(m, class)?;
            None
        }
    };
    Ok(BoundaryOperator {
        representation,
        class,
        ess_gap,
    })
}

fn check_diagonal_class(rule: &DiagonalRule, class: SymmetryClass) -> Result<()> {
    for ell in DiagonalRule::sample_degrees() {
        let theta = rule.value(ell)?;
        if !theta.re.is_finite() || !theta.im.is_finite() {
            return Err(Error::Validation(format!(
                "theta_{ell} = {theta} is not finite"
            )));
        }
        let tol = SYMMETRY_TOLERANCE * (1.0 + theta.norm());
        let ok = match class {
            SymmetryClass::SelfAdjoint => theta.im.abs() <= tol,
            SymmetryClass::Dissipative => theta.im >= -tol,
            SymmetryClass::Accumulative => theta.im <= tol,
        };
        if !ok {
            return Err(Error::SymmetryMismatch(format!(
                "theta_{ell} = {theta} is not compatible with a {class} parameter"
            )));
        }
    }
    Ok(())
}

fn check_dense_class(m: &DMatrix<Complex64>, class: SymmetryClass) -> Result<()> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::Validation(format!(
            "dense parameter must be square and non-empty, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Validation(
            "dense parameter has non-finite entries".into(),
        ));
    }
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let adjoint = m.adjoint();
    let tol = SYMMETRY_TOLERANCE * scale;
    match class {
        SymmetryClass::SelfAdjoint => {
            let defect = (m - &adjoint).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if defect > tol {
                return Err(Error::SymmetryMismatch(format!(
                    "dense parameter is not Hermitian (max |Theta - Theta*| = {defect:e})"
                )));
            }
        }
        SymmetryClass::Dissipative | SymmetryClass::Accumulative => {
            let im_part = (m - &adjoint) * Complex64::new(0.0, -0.5);
            let eig = im_part.symmetric_eigenvalues();
            let (lo, hi) = eig
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                    (a.min(x), b.max(x))
                });
            let bad = match class {
                SymmetryClass::Dissipative => lo < -tol,
                _ => hi > tol,
            };
            if bad {
                return Err(Error::SymmetryMismatch(format!(
                    "imaginary part of the dense parameter has spectrum in [{lo:e}, {hi:e}], \
                     not compatible with a {class} parameter"
                )));
            }
        }
    }
    Ok(())
}

impl BoundaryOperator {
    pub fn representation(&self) -> &Representation {
        &self.representation
    }

    pub fn class(&self) -> SymmetryClass {
        self.class
    }

    pub fn ess_gap(&self) -> Option<EssGap> {
        self.ess_gap
    }

    pub fn theta(&self, ell: usize) -> Result<Complex64> {
        match &self.representation {
            Representation::Diagonal(rule) => rule.value(ell),
            Representation::Dense(_) => Err(Error::Validation(
                "a dense parameter has no per-degree entries; use dense_gram_reduction".into(),
            )),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.representation, Representation::Diagonal(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Realization {
    Neumann,
    Dirichlet,
    Robin(BoundaryOperator),
}

impl Realization {
    fn name(&self) -> String {
        match self {
            Realization::Neumann => "Neumann".into(),
            Realization::Dirichlet => "Dirichlet".into(),
            Realization::Robin(op) => format!("Robin ({} parameter)", op.class),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionPair {
    pub left: Realization,
    pub right: Realization,
}

impl ExtensionPair {
    pub fn new(left: Realization, right: Realization) -> Self {
        Self { left, right }
    }

    /// Both sides are the same realization, so the difference vanishes.
    pub fn is_trivial(&self) -> bool {
        self.left == self.right
    }

    fn participants(&self) -> [(&'static str, &Realization); 2] {
        [("left", &self.left), ("right", &self.right)]
    }

    fn robin_classes(&self) -> impl Iterator<Item = SymmetryClass> + '_ {
        self.participants()
            .into_iter()
            .filter_map(|(_, r)| match r {
                Realization::Robin(op) => Some(op.class),
                _ => None,
            })
    }

    /// `i` for self-adjoint pairs, `-i` with a dissipative participant, `+i`
    /// with an accumulative one.
    pub fn default_lambda(&self) -> SpectralPoint {
        let mut im = 1.0;
        for class in self.robin_classes() {
            if class == SymmetryClass::Dissipative {
                im = -1.0;
            }
        }
        SpectralPoint::new(0.0, im).expect("finite")
    }
}

/// Checks that `lambda` lies where `(Theta - M(lambda))^{-1}` is guaranteed
/// bounded for every Robin participant.
///
/// Pairs built only from Neumann and Dirichlet also accept real
/// `lambda < 0`, which lies in both resolvent sets.
pub fn admissible_lambda(pair: &ExtensionPair, lambda: SpectralPoint) -> Result<()> {
    let classes: Vec<SymmetryClass> = pair.robin_classes().collect();
    if classes.contains(&SymmetryClass::Dissipative)
        && classes.contains(&SymmetryClass::Accumulative)
    {
        return Err(Error::Inadmissible {
            lambda: lambda.lambda,
            participant: "pair".into(),
            reason: "a dissipative and an accumulative parameter have no common half-plane \
                     where both inverses are guaranteed bounded; compare each against Neumann \
                     separately"
                .into(),
        });
    }
    let z = lambda.lambda;
    for (side, r) in pair.participants() {
        let fail = |reason: &str| Error::Inadmissible {
            lambda: z,
            participant: format!("{side} {}", r.name()),
            reason: reason.into(),
        };
        match r {
            Realization::Neumann | Realization::Dirichlet => {
                if z.im == 0.0 && (!classes.is_empty() || z.re >= 0.0) {
                    return Err(fail("lambda must be non-real (or real and negative for a pair of Neumann and Dirichlet)"));
                }
            }
            Realization::Robin(op) => match op.class {
                SymmetryClass::SelfAdjoint if z.im == 0.0 => {
                    return Err(fail("a self-adjoint parameter needs non-real lambda"))
                }
                SymmetryClass::Dissipative if z.im >= 0.0 => {
                    return Err(fail("a dissipative parameter needs Im lambda < 0"))
                }
                SymmetryClass::Accumulative if z.im <= 0.0 => {
                    return Err(fail("an accumulative parameter needs Im lambda > 0"))
                }
                _ => {}
            },
        }
    }
    Ok(())
}

fn hit_check(
    ell: usize,
    lambda: SpectralPoint,
    theta: Complex64,
    weyl: Complex64,
) -> Result<Complex64> {
    let d = theta - weyl;
    if d.norm() < EIGENVALUE_HIT_TOLERANCE * (1.0 + theta.norm()) {
        return Err(Error::EigenvalueHit {
            ell,
            lambda: lambda.lambda,
        });
    }
    Ok(d)
}

/// Scalar `c_l` of the rank-one resolvent difference on the degree-`l`
/// harmonics (left minus right).
pub fn correction_coefficient(
    pair: &ExtensionPair,
    domain: &Domain,
    mode: &Mode,
    lambda: SpectralPoint,
) -> Result<Complex64> {
    use Realization::*;
    let zero = Complex64::new(0.0, 0.0);
    if pair.is_trivial() {
        return Ok(zero);
    }
    let m = weyl_value(domain, mode, lambda)?;
    let ell = mode.ell;
    let robin = |op: &BoundaryOperator| -> Result<(Complex64, Complex64)> {
        let theta = op.theta(ell)?;
        Ok((theta, hit_check(ell, lambda, theta, m)?))
    };
    // 0 - M, so its inverse is the Dirichlet coefficient -M^{-1}
    let dirichlet = || hit_check(ell, lambda, zero, m);
    let c = match (&pair.left, &pair.right) {
        (Neumann, Neumann) | (Dirichlet, Dirichlet) => zero,
        (Dirichlet, Neumann) => dirichlet()?.inv(),
        (Neumann, Dirichlet) => -dirichlet()?.inv(),
        (Robin(op), Neumann) => robin(op)?.1.inv(),
        (Neumann, Robin(op)) => -robin(op)?.1.inv(),
        (Robin(op), Dirichlet) => {
            // (theta - M)^{-1} + M^{-1} = theta / ((theta - M) M)
            let (theta, d) = robin(op)?;
            theta / (d * m)
        }
        (Dirichlet, Robin(op)) => {
            let (theta, d) = robin(op)?;
            -theta / (d * m)
        }
        (Robin(a), Robin(b)) => {
            // (t1 - M)^{-1} - (t2 - M)^{-1} = (t2 - t1) / ((t1 - M)(t2 - M))
            let (t1, d1) = robin(a)?;
            let (t2, d2) = robin(b)?;
            (t2 - t1) / (d1 * d2)
        }
    };
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Diagonal,
    DenseGram,
}

/// Per-degree singular value before multiplicity expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSingularValue {
    pub ell: usize,
    pub multiplicity: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularSpectrum {
    /// Non-increasing, multiplicity-expanded.
    pub values: Vec<f64>,
    pub lambda: SpectralPoint,
    pub pair: ExtensionPair,
    pub cutoff: usize,
    pub provenance: Provenance,
}

/// Per-degree values `|c_l| ||gamma(lambda) e|| ||gamma(conj lambda) e||` for
/// `l = 0..=cutoff`, in degree order.
pub fn mode_singular_values(
    pair: &ExtensionPair,
    domain: &Domain,
    lambda: SpectralPoint,
    cutoff: usize,
) -> Result<Vec<ModeSingularValue>> {
    admissible_lambda(pair, lambda)?;
    modes(domain, cutoff)
        .par_iter()
        .map(|mode| {
            let value = if pair.is_trivial() {
                0.0
            } else {
                let c = correction_coefficient(pair, domain, mode, lambda)?;
                let g1 = gamma_norm_squared(domain, mode, lambda)?;
                let g2 = gamma_norm_squared(domain, mode, lambda.conj())?;
                c.norm() * (g1 * g2).sqrt()
            };
            Ok(ModeSingularValue {
                ell: mode.ell,
                multiplicity: mode.multiplicity,
                value,
            })
        })
        .collect()
}

fn descending(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Expands per-degree values by multiplicity and sorts by `(value desc, l asc)`.
pub fn expand_and_sort(per_mode: &[ModeSingularValue]) -> Vec<f64> {
    let mut tagged: Vec<(f64, usize)> = per_mode
        .iter()
        .flat_map(|m| std::iter::repeat_n((m.value, m.ell), m.multiplicity as usize))
        .collect();
    tagged.par_sort_by(descending);
    tagged.into_iter().map(|(v, _)| v).collect()
}

/// Singular values of the resolvent difference truncated to degrees
/// `<= cutoff`. Dense parameters go through [`dense_gram_reduction`].
pub fn singular_spectrum(
    pair: &ExtensionPair,
    domain: &Domain,
    lambda: SpectralPoint,
    cutoff: usize,
) -> Result<SingularSpectrum> {
    let dense = pair.participants().iter().any(|(_, r)| match r {
        Realization::Robin(op) => !op.is_diagonal(),
        _ => false,
    });
    let (values, provenance) = if dense {
        let gram = dense_gram_reduction(pair, domain, lambda, cutoff)?;
        let mut s: Vec<f64> = gram.singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        (s, Provenance::DenseGram)
    } else {
        let per_mode = mode_singular_values(pair, domain, lambda, cutoff)?;
        (expand_and_sort(&per_mode), Provenance::Diagonal)
    };
    Ok(SingularSpectrum {
        values,
        lambda,
        pair: pair.clone(),
        cutoff,
        provenance,
    })
}

fn expanded_modes(domain: &Domain, cutoff: usize) -> Vec<Mode> {
    modes(domain, cutoff)
        .into_iter()
        .flat_map(|m| std::iter::repeat_n(m, m.multiplicity as usize))
        .collect()
}

fn dense_theta(op: &BoundaryOperator, expanded: &[Mode]) -> Result<DMatrix<Complex64>> {
    let dim = expanded.len();
    match &op.representation {
        Representation::Diagonal(rule) => {
            let mut diag = Vec::with_capacity(dim);
            for m in expanded {
                diag.push(rule.value(m.ell)?);
            }
            Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)))
        }
        Representation::Dense(m) => {
            if m.nrows() != dim {
                return Err(Error::Validation(format!(
                    "dense parameter has dimension {} but the cutoff spans {dim} boundary modes",
                    m.nrows()
                )));
            }
            Ok(m.clone())
        }
    }
}

/// `(Theta - M)^{-1}` with an eigenvalue check on the LU pivots.
fn shifted_inverse(
    theta: &DMatrix<Complex64>,
    weyl: &[Complex64],
    lambda: SpectralPoint,
) -> Result<DMatrix<Complex64>> {
    let mut a = theta.clone();
    for (i, m) in weyl.iter().enumerate() {
        a[(i, i)] -= *m;
    }
    let scale = 1.0 + theta.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let lu = a.lu();
    let u = lu.u();
    let min_pivot = u
        .diagonal()
        .iter()
        .map(|z| z.norm())
        .fold(f64::INFINITY, f64::min);
    if !(min_pivot >= EIGENVALUE_HIT_TOLERANCE * scale) {
        return Err(Error::Singular(format!(
            "Theta - M(lambda) is singular at lambda = {}: lambda is an eigenvalue of the Robin \
             realization",
            lambda.lambda
        )));
    }
    lu.try_inverse()
        .ok_or_else(|| Error::Singular("Theta - M(lambda) could not be inverted".into()))
}

/// `D_lambda^{1/2} K D_{conj lambda}^{1/2}` where `K` is the difference of the
/// boundary coefficients of the two realizations on the multiplicity-expanded
/// modes up to `cutoff` and `D` holds the squared gamma norms. Its singular
/// values are those of the truncated resolvent difference.
pub fn dense_gram_reduction(
    pair: &ExtensionPair,
    domain: &Domain,
    lambda: SpectralPoint,
    cutoff: usize,
) -> Result<DMatrix<Complex64>> {
    admissible_lambda(pair, lambda)?;
    let expanded = expanded_modes(domain, cutoff);
    let dim = expanded.len();
    let per_degree: Vec<(Complex64, f64, f64)> = modes(domain, cutoff)
        .par_iter()
        .map(|m| {
            Ok((
                weyl_value(domain, m, lambda)?,
                gamma_norm_squared(domain, m, lambda)?,
                gamma_norm_squared(domain, m, lambda.conj())?,
            ))
        })
        .collect::<Result<_>>()?;
    let weyl: Vec<Complex64> = expanded.iter().map(|m| per_degree[m.ell].0).collect();

    let coefficient = |r: &Realization| -> Result<Option<DMatrix<Complex64>>> {
        Ok(match r {
            Realization::Neumann => None,
            Realization::Dirichlet => {
                let mut d = DMatrix::zeros(dim, dim);
                for (i, m) in weyl.iter().enumerate() {
                    d[(i, i)] = -m.inv();
                }
                Some(d)
            }
            Realization::Robin(op) => Some(shifted_inverse(
                &dense_theta(op, &expanded)?,
                &weyl,
                lambda,
            )?),
        })
    };
    let k = if pair.is_trivial() {
        DMatrix::zeros(dim, dim)
    } else {
        match (&pair.left, &pair.right) {
            (Realization::Robin(a), Realization::Robin(b)) => {
                let t1 = dense_theta(a, &expanded)?;
                let t2 = dense_theta(b, &expanded)?;
                let i1 = shifted_inverse(&t1, &weyl, lambda)?;
                let i2 = shifted_inverse(&t2, &weyl, lambda)?;
                &i1 * (&t2 - &t1) * &i2
            }
            (l, r) => {
                let cl = coefficient(l)?.unwrap_or_else(|| DMatrix::zeros(dim, dim));
                let cr = coefficient(r)?.unwrap_or_else(|| DMatrix::zeros(dim, dim));
                cl - cr
            }
        }
    };
    let left: Vec<f64> = expanded
        .iter()
        .map(|m| per_degree[m.ell].1.sqrt())
        .collect();
    let right: Vec<f64> = expanded
        .iter()
        .map(|m| per_degree[m.ell].2.sqrt())
        .collect();
    Ok(DMatrix::from_fn(dim, dim, |i, j| {
        k[(i, j)] * (left[i] * right[j])
    }))
}

/// `S_mu(x) = sum_m (-x/4)^m / (m! (mu+1)_m)`, so that
/// `J_mu(z) = (z/2)^mu / Gamma(mu+1) * S_mu(z^2)`. Returns the sum and the sum
/// of term magnitudes.
fn normalized_series(mu: f64, x: Complex64) -> (Complex64, f64) {
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut mag = 1.0;
    let q = -x / 4.0;
    let mut m = 0.0;
    loop {
        m += 1.0;
        term *= q / (m * (mu + m));
        sum += term;
        let t = term.norm();
        mag += t;
        if t <= 1e-17 * mag && m * (mu + m) > q.norm() {
            break;
        }
        if m > 10_000.0 {
            break;
        }
    }
    (sum, mag)
}

/// `(a, b)` in `a u(R) - b u'(R) = 0`.
fn boundary_weights(bc: &Realization, ell: usize) -> Result<(f64, Complex64)> {
    Ok(match bc {
        Realization::Dirichlet => (1.0, Complex64::new(0.0, 0.0)),
        Realization::Neumann => (0.0, Complex64::new(1.0, 0.0)),
        Realization::Robin(op) => (1.0, op.theta(ell)?),
    })
}

/// Entire function of `lambda` vanishing exactly at the eigenvalues of the
/// realization in degree `l`: `a u(R) - b u'(R)` with `u` rescaled to
/// `r^l S_nu(lambda r^2)`. Returns the value and a magnitude scale.
fn characteristic(
    domain: &Domain,
    mode: &Mode,
    a: f64,
    b: Complex64,
    lambda: Complex64,
) -> (Complex64, f64) {
    let r = domain.radius();
    let nu = mode.nu.value();
    let x = lambda * r * r;
    let (s0, m0) = normalized_series(nu, x);
    let (s1, m1) = normalized_series(nu + 1.0, x);
    let l = mode.ell as f64;
    let tail = lambda * r / (2.0 * (nu + 1.0));
    let derivative = s0 * (l / r) - tail * s1;
    let value = s0 * a - b * derivative;
    let scale = a * m0 + b.norm() * (l / r * m0 + tail.norm() * m1);
    (value, scale)
}

/// Real eigenvalues of the realization `bc` in degree `l` inside the open
/// window, by sign changes of a pole-free characteristic function followed by
/// bisection to [`EIGENVALUE_TOLERANCE`].
pub fn robin_eigenvalues(
    domain: &Domain,
    bc: &Realization,
    mode: &Mode,
    window: (f64, f64),
) -> Result<Vec<f64>> {
    let (lo, hi) = window;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::Validation(format!("invalid window ({lo}, {hi})")));
    }
    if let Realization::Robin(op) = bc {
        if op.class != SymmetryClass::SelfAdjoint {
            return Err(Error::Validation(
                "real eigenvalue search needs a self-adjoint parameter".into(),
            ));
        }
    }
    let (a, b) = boundary_weights(bc, mode.ell)?;
    let b = Complex64::new(b.re, 0.0);
    let g = |lam: f64| -> (f64, f64) {
        let (v, s) = characteristic(domain, mode, a, b, Complex64::new(lam, 0.0));
        (v.re, s)
    };
    for end in [lo, hi] {
        let (v, s) = g(end);
        if v.abs() <= 1e-12 * s {
            return Err(Error::Bracketing(format!(
                "window endpoint {end} is (numerically) an eigenvalue; perturb the window"
            )));
        }
    }
    let r = domain.radius();
    let mut samples = Vec::new();
    let neg_hi = hi.min(0.0);
    if lo < neg_hi {
        let count = 400;
        for i in 0..=count {
            samples.push(lo + (neg_hi - lo) * i as f64 / count as f64);
        }
    }
    if hi > 0.0 {
        let k_lo = lo.max(0.0).sqrt();
        let k_hi = hi.sqrt();
        let step = PI / (16.0 * r);
        let count = (((k_hi - k_lo) / step).ceil() as usize).max(400);
        for i in 0..=count {
            let k = k_lo + (k_hi - k_lo) * i as f64 / count as f64;
            samples.push(k * k);
        }
    }
    samples.push(lo);
    samples.push(hi);
    samples.retain(|&x| x >= lo && x <= hi);
    samples.sort_by(f64::total_cmp);
    samples.dedup();

    let mut roots = Vec::new();
    let mut prev = (samples[0], g(samples[0]).0);
    for &x in &samples[1..] {
        let fx = g(x).0;
        if fx == 0.0 {
            roots.push(x);
            prev = (x, fx);
            continue;
        }
        if prev.1 != 0.0 && (prev.1 < 0.0) != (fx < 0.0) {
            roots.push(bisect(&g, prev.0, x, prev.1));
        }
        prev = (x, fx);
    }
    Ok(roots)
}

fn bisect(g: &impl Fn(f64) -> (f64, f64), mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    while b - a > 0.25 * EIGENVALUE_TOLERANCE {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = g(m).0;
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Number of eigenvalues (with multiplicity) of the degree-`l` problem
/// `u(R) = theta u'(R)` inside the rectangle `re x im`, by the argument
/// principle applied to the entire characteristic function.
pub fn count_eigenvalues_in_rectangle(
    domain: &Domain,
    mode: &Mode,
    theta: Complex64,
    re: (f64, f64),
    im: (f64, f64),
) -> Result<i64> {
    if !(re.0 < re.1 && im.0 < im.1) {
        return Err(Error::Validation("degenerate rectangle".into()));
    }
    let f = |z: Complex64| -> Result<Complex64> {
        let (v, s) = characteristic(domain, mode, 1.0, theta, z);
        if v.norm() <= 1e-12 * s {
            return Err(Error::Bracketing(format!(
                "an eigenvalue lies on the contour near {z}; move the rectangle"
            )));
        }
        Ok(v)
    };
    let corners = [
        Complex64::new(re.0, im.0),
        Complex64::new(re.1, im.0),
        Complex64::new(re.1, im.1),
        Complex64::new(re.0, im.1),
    ];
    let mut total = 0.0;
    for i in 0..4 {
        let (a, b) = (corners[i], corners[(i + 1) % 4]);
        let pieces = 64;
        let mut za = a;
        let mut fa = f(za)?;
        for j in 1..=pieces {
            let zb = a + (b - a) * (j as f64 / pieces as f64);
            let fb = f(zb)?;
            total += phase_change(&f, za, zb, fa, fb, 0)?;
            za = zb;
            fa = fb;
        }
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

fn phase_change(
    f: &impl Fn(Complex64) -> Result<Complex64>,
    za: Complex64,
    zb: Complex64,
    fa: Complex64,
    fb: Complex64,
    depth: usize,
) -> Result<f64> {
    let d = (fb / fa).arg();
    if d.abs() <= PI / 4.0 {
        return Ok(d);
    }
    if depth > 40 {
        return Err(Error::Bracketing(
            "phase could not be resolved along the contour".into(),
        ));
    }
    let zm = 0.5 * (za + zb);
    let fm = f(zm)?;
    Ok(phase_change(f, za, zm, fa, fm, depth + 1)? + phase_change(f, zm, zb, fm, fb, depth + 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_domains::make_ball;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn diag(rule: DiagonalRule, class: SymmetryClass) -> Result<BoundaryOperator> {
        make_boundary_operator(Representation::Diagonal(rule), class)
    }

    fn robin(value: f64) -> Realization {
        Realization::Robin(diag(DiagonalRule::real(value), SymmetryClass::SelfAdjoint).unwrap())
    }

    fn rule(terms: &[(Complex64, f64)]) -> DiagonalRule {
        DiagonalRule {
            terms: terms
                .iter()
                .map(|&(coef, power)| PowerTerm { coef, power })
                .collect(),
            inverted: false,
        }
    }

    #[test]
    fn boundary_operator_examples() {
        let op = diag(DiagonalRule::real(1.0), SymmetryClass::SelfAdjoint).unwrap();
        let gap = op.ess_gap().unwrap();
        assert!(gap.delta > 0.0 && gap.delta <= 1.0);
        assert_eq!(gap.tail_index, 0);

        // i (1 + (1 + l)^{-1}) has positive imaginary parts
        let r = rule(&[(c(0.0, 1.0), 0.0), (c(0.0, 1.0), -1.0)]);
        assert!(matches!(
            diag(r.clone(), SymmetryClass::Accumulative),
            Err(Error::SymmetryMismatch(_))
        ));
        assert!(diag(r, SymmetryClass::Dissipative).is_ok());

        let decaying = rule(&[(c(1.0, 0.0), -1.0)]);
        assert!(matches!(
            diag(decaying, SymmetryClass::SelfAdjoint),
            Err(Error::EssentialSpectrumGap(_))
        ));
        assert!(matches!(
            diag(DiagonalRule::real(0.0), SymmetryClass::SelfAdjoint),
            Err(Error::EssentialSpectrumGap(_))
        ));
    }

    #[test]
    fn ess_gap_certificate_holds() {
        let cases = [
            rule(&[(c(2.0, 0.0), 0.0), (c(-1.0, 0.0), -2.0)]),
            rule(&[(c(0.5, 0.0), 1.0), (c(-30.0, 0.0), 0.0)]),
            rule(&[(c(1.0, 0.0), 0.0), (c(-50.0, 0.0), -0.5)]),
            DiagonalRule::inverse_of(rule(&[(c(3.0, 0.0), 0.0), (c(5.0, 0.0), -1.0)])),
            DiagonalRule::inverse_of(rule(&[(c(1.0, 0.0), -1.0)])),
        ];
        for r in cases {
            let gap = r.ess_gap().unwrap();
            for ell in gap.tail_index..gap.tail_index + 100_000 {
                assert!(r.value(ell).unwrap().norm() >= gap.delta, "{r:?} at {ell}");
            }
        }
        let growing = DiagonalRule::inverse_of(rule(&[(c(1.0, 0.0), 1.0)]));
        assert!(growing.ess_gap().is_err());
    }

    #[test]
    fn inverse_rule_flips_imaginary_sign() {
        let beta = rule(&[(c(1.0, 1.0), 0.0)]);
        let theta = DiagonalRule::inverse_of(beta);
        assert!(theta.value(3).unwrap().im < 0.0);
        assert!(diag(theta.clone(), SymmetryClass::Accumulative).is_ok());
        assert!(diag(theta, SymmetryClass::Dissipative).is_err());
    }

    #[test]
    fn dense_class_checks() {
        let h =
            DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.5), c(0.5, -0.5), c(2.0, 0.0)]);
        assert!(make_boundary_operator(
            Representation::Dense(h.clone()),
            SymmetryClass::SelfAdjoint
        )
        .is_ok());
        let d = &h + DMatrix::from_diagonal_element(2, 2, c(0.0, 0.3));
        assert!(make_boundary_operator(
            Representation::Dense(d.clone()),
            SymmetryClass::SelfAdjoint
        )
        .is_err());
        assert!(make_boundary_operator(
            Representation::Dense(d.clone()),
            SymmetryClass::Dissipative
        )
        .is_ok());
        assert!(
            make_boundary_operator(Representation::Dense(d), SymmetryClass::Accumulative).is_err()
        );
        let rect = DMatrix::<Complex64>::zeros(2, 3);
        assert!(
            make_boundary_operator(Representation::Dense(rect), SymmetryClass::SelfAdjoint)
                .is_err()
        );
    }

    fn dissipative(theta: Complex64) -> Realization {
        Realization::Robin(diag(DiagonalRule::constant(theta), SymmetryClass::Dissipative).unwrap())
    }

    fn accumulative(theta: Complex64) -> Realization {
        Realization::Robin(
            diag(DiagonalRule::constant(theta), SymmetryClass::Accumulative).unwrap(),
        )
    }

    #[test]
    fn admissibility() {
        let i = SpectralPoint::new(0.0, 1.0).unwrap();
        let pair = ExtensionPair::new(robin(1.0), Realization::Neumann);
        assert!(admissible_lambda(&pair, i).is_ok());
        assert!(admissible_lambda(&pair, SpectralPoint::new(-1.0, 0.0).unwrap()).is_err());

        let pair = ExtensionPair::new(dissipative(c(1.0, 1.0)), Realization::Neumann);
        assert!(matches!(
            admissible_lambda(&pair, i),
            Err(Error::Inadmissible { .. })
        ));
        assert!(admissible_lambda(&pair, i.conj()).is_ok());
        assert_eq!(pair.default_lambda(), i.conj());

        let pair = ExtensionPair::new(dissipative(c(1.0, 1.0)), accumulative(c(1.0, -1.0)));
        for lam in [i, i.conj(), SpectralPoint::new(-2.0, 0.0).unwrap()] {
            let err = admissible_lambda(&pair, lam).unwrap_err();
            assert!(err.to_string().contains("common half-plane"));
        }

        let dn = ExtensionPair::new(Realization::Dirichlet, Realization::Neumann);
        assert!(admissible_lambda(&dn, SpectralPoint::new(-1.0, 0.0).unwrap()).is_ok());
        assert!(admissible_lambda(&dn, SpectralPoint::new(1.0, 0.0).unwrap()).is_err());
    }

    #[test]
    fn correction_examples() {
        let d = make_ball(2, 1.0).unwrap();
        let m0 = d.mode(0);
        let lam = SpectralPoint::new(-1.0, 0.0).unwrap();
        let dn = ExtensionPair::new(Realization::Dirichlet, Realization::Neumann);
        let cdn = correction_coefficient(&dn, &d, &m0, lam).unwrap();
        assert!((cdn - c(-0.446_39, 0.0)).norm() < 1e-4, "{cdn}");
        let rn = ExtensionPair::new(robin(1.0), Realization::Neumann);
        let crn = correction_coefficient(&rn, &d, &m0, lam).unwrap();
        assert!((crn - c(-0.806_34, 0.0)).norm() < 1e-4, "{crn}");

        let same = ExtensionPair::new(robin(2.0), robin(2.0));
        let i = SpectralPoint::new(0.0, 1.0).unwrap();
        for ell in 0..20 {
            assert_eq!(
                correction_coefficient(&same, &d, &d.mode(ell), i).unwrap(),
                c(0.0, 0.0)
            );
        }
    }

    #[test]
    fn correction_composes_antisymmetrically() {
        let d = make_ball(3, 1.0).unwrap();
        let lam = SpectralPoint::new(0.3, 1.2).unwrap();
        let parts = [
            Realization::Neumann,
            Realization::Dirichlet,
            robin(2.0),
            robin(-0.5),
        ];
        for mode in modes(&d, 6) {
            let cn = |r: &Realization| {
                correction_coefficient(
                    &ExtensionPair::new(r.clone(), Realization::Neumann),
                    &d,
                    &mode,
                    lam,
                )
                .unwrap()
            };
            for a in &parts {
                for b in &parts {
                    let direct = correction_coefficient(
                        &ExtensionPair::new(a.clone(), b.clone()),
                        &d,
                        &mode,
                        lam,
                    )
                    .unwrap();
                    let composed = cn(a) - cn(b);
                    assert!((direct - composed).norm() < 1e-12 * (1.0 + composed.norm()));
                }
            }
        }
    }

    #[test]
    fn eigenvalue_hit_detected() {
        let lam = SpectralPoint::new(5.0, 0.0).unwrap();
        assert!(matches!(
            hit_check(0, lam, c(0.0, 0.0), c(1e-15, 0.0)),
            Err(Error::EigenvalueHit { ell: 0, .. })
        ));
        assert!(matches!(
            hit_check(2, lam, c(3.0, 0.0), c(3.0 + 1e-14, 0.0)),
            Err(Error::EigenvalueHit { ell: 2, .. })
        ));
        assert!(hit_check(2, lam, c(3.0, 0.0), c(3.0 + 1e-9, 0.0)).is_ok());
    }

    #[test]
    fn spectrum_sorted_and_sized() {
        let d = make_ball(3, 1.0).unwrap();
        let i = SpectralPoint::new(0.0, 1.0).unwrap();
        let pair = ExtensionPair::new(robin(1.0), Realization::Neumann);
        let s = singular_spectrum(&pair, &d, i, 30).unwrap();
        assert_eq!(s.values.len() as u64, d.expanded_len(30));
        assert!(s.values.windows(2).all(|w| w[0] >= w[1]));
        assert!(s.values.iter().all(|v| v.is_finite() && *v >= 0.0));

        let same = ExtensionPair::new(robin(1.0), robin(1.0));
        let z = singular_spectrum(&same, &d, i, 30).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn spectrum_is_deterministic() {
        let d = make_ball(2, 1.0).unwrap();
        let i = SpectralPoint::new(0.0, 1.0).unwrap();
        let pair = ExtensionPair::new(robin(2.0), robin(-1.0));
        let a = singular_spectrum(&pair, &d, i, 500).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| singular_spectrum(&pair, &d, i, 500).unwrap());
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn robin_against_neumann_monotone_in_distance() {
        let d = make_ball(2, 1.0).unwrap();
        let i = SpectralPoint::new(0.0, 1.0).unwrap();
        let mode = d.mode(3);
        let m = weyl_value(&d, &mode, i).unwrap();
        let mut last = f64::INFINITY;
        for theta in [1.0, 2.0, 4.0, 8.0, 16.0] {
            let pair = ExtensionPair::new(robin(theta), Realization::Neumann);
            let s = mode_singular_values(&pair, &d, i, 3).unwrap()[3].value;
            let dist = (c(theta, 0.0) - m).norm();
            assert!(s < last, "{theta}: {s} (distance {dist})");
            last = s;
        }
    }

    #[test]
    fn dense_matches_diagonal() {
        let d = make_ball(2, 1.0).unwrap();
        let i = SpectralPoint::new(0.0, 1.0).unwrap();
        let pairs = [
            ExtensionPair::new(robin(2.0), robin(-1.0)),
            ExtensionPair::new(robin(1.0), Realization::Neumann),
            ExtensionPair::new(Realization::Dirichlet, Realization::Neumann),
            ExtensionPair::new(robin(1.0), Realization::Dirichlet),
        ];
        for pair in pairs {
            let diag = singular_spectrum(&pair, &d, i, 40).unwrap();
            let gram = dense_gram_reduction(&pair, &d, i, 40).unwrap();
            let mut s: Vec<f64> = gram.singular_values().iter().copied().collect();
            s.sort_by(|a, b| b.total_cmp(a));
            assert_eq!(s.len(), diag.values.len());
            for (a, b) in s.iter().zip(&diag.values) {
                assert!((a - b).abs() < 1e-12 * diag.values[0], "{a} {b}");
            }
        }
    }

    #[test]
    fn dirichlet_eigenvalues() {
        let d = make_ball(2, 1.0).unwrap();
        let m0 = d.mode(0);
        let ev = robin_eigenvalues(&d, &Realization::Dirichlet, &m0, (0.0, 10.0)).unwrap();
        assert_eq!(ev.len(), 1);
        assert!((ev[0] - 5.783_19).abs() < 1e-5, "{ev:?}");
        let ev = robin_eigenvalues(&d, &Realization::Dirichlet, &m0, (0.0, 40.0)).unwrap();
        assert_eq!(ev.len(), 2);
        let j02 = 5.520_078_110_286_311f64;
        assert!((ev[1] - j02 * j02).abs() < 1e-8);
    }

    #[test]
    fn eigenvalues_solve_the_weyl_equation() {
        let d = make_ball(3, 1.0).unwrap();
        for ell in [0, 1, 4] {
            let mode = d.mode(ell);
            for theta in [1.0, -0.3, 2.0] {
                let ev = robin_eigenvalues(&d, &robin(theta), &mode, (-30.0, 200.0)).unwrap();
                assert!(!ev.is_empty());
                for lam in ev {
                    // M(lambda) = theta, checked just off the axis where M is defined
                    let m = weyl_value(&d, &mode, SpectralPoint::new(lam, 1e-7).unwrap()).unwrap();
                    assert!(
                        (m.re - theta).abs() < 1e-4 * (1.0 + theta.abs()),
                        "l={ell} {lam}: {m}"
                    );
                }
            }
        }
    }

    #[test]
    fn endpoint_root_rejected() {
        let d = make_ball(2, 1.0).unwrap();
        let ev = robin_eigenvalues(&d, &Realization::Dirichlet, &d.mode(0), (0.0, 10.0)).unwrap();
        assert!(matches!(
            robin_eigenvalues(&d, &Realization::Dirichlet, &d.mode(0), (ev[0], 10.0)),
            Err(Error::Bracketing(_))
        ));
        assert!(robin_eigenvalues(&d, &Realization::Neumann, &d.mode(0), (0.0, 1.0)).is_err());
    }

    #[test]
    fn argument_principle_counts() {
        let d = make_ball(2, 1.0).unwrap();
        let m0 = d.mode(0);
        let n =
            count_eigenvalues_in_rectangle(&d, &m0, c(0.0, 0.0), (1.0, 40.0), (-1.0, 1.0)).unwrap();
        assert_eq!(n, 2);
        for ell in 0..=10 {
            let mode = d.mode(ell);
            let up = count_eigenvalues_in_rectangle(
                &d,
                &mode,
                c(1.0, 1.0),
                (-60.0, 150.0),
                (1e-9, 60.0),
            )
            .unwrap();
            let down = count_eigenvalues_in_rectangle(
                &d,
                &mode,
                c(1.0, 1.0),
                (-60.0, 150.0),
                (-60.0, -1e-9),
            )
            .unwrap();
            assert_eq!(down, 0, "l={ell}");
            assert!(up >= 1, "l={ell}");
        }
    }
}
