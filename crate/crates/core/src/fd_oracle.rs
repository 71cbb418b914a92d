//! Finite-difference counterpart of the per-mode radial problem.
//!
//! Conservative vertex-centred scheme for
//! `-r^{1-n} (r^{n-1} u')' + l(l+n-2) r^{-2} u` on `r_j = j h`, `h = R/N`.
//! The stiffness matrix `S` is symmetric tridiagonal and the mass matrix `W`
//! is diagonal, so the discrete operator `A = W^{-1} S` is self-adjoint in
//! `<f, g>_w = sum_j w_j f_j conj(g_j)`. Neumann data `g` at `r = R` enters as
//! the load `R^{n-1} g e_N`; the Robin condition `u(R) = theta u'(R)` adds
//! `-R^{n-1}/theta` to the last diagonal entry; Dirichlet drops node `N`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model_domains::{gamma_profile, Domain, Mode, SpectralPoint};
use crate::triple_engine::{correction_coefficient, ExtensionPair, Realization};

pub const MIN_INTERIOR_POINTS: usize = 16;

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    points: usize,
    radius: f64,
}

impl RadialGrid {
    pub fn new(domain: &Domain, points: usize) -> Result<Self> {
        if points < MIN_INTERIOR_POINTS {
            return Err(Error::Validation(format!(
                "radial grid needs at least {MIN_INTERIOR_POINTS} points, got {points}"
            )));
        }
        Ok(Self {
            points,
            radius: domain.radius(),
        })
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn h(&self) -> f64 {
        self.radius / self.points as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        if j == self.points {
            self.radius
        } else {
            j as f64 * self.h()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FdBoundary {
    Dirichlet,
    Neumann,
    /// `u(R) = theta u'(R)`
    Robin(C),
}

impl FdBoundary {
    pub fn from_realization(r: &Realization, ell: usize) -> Result<Self> {
        Ok(match r {
            Realization::Dirichlet => FdBoundary::Dirichlet,
            Realization::Neumann => FdBoundary::Neumann,
            Realization::Robin(op) => FdBoundary::Robin(op.theta(ell)?),
        })
    }
}

#[derive(Debug, Clone)]
pub struct RadialOperator {
    grid: RadialGrid,
    bc: FdBoundary,
    /// Index of the first unknown node: 0 when `l = 0`, else 1 (`u_0 = 0`).
    first: usize,
    diag: Vec<f64>,
    /// `S_{i,i+1}`
    off: Vec<f64>,
    weights: Vec<f64>,
    /// Boundary term added to the last diagonal entry.
    sigma: C,
    boundary_area: f64,
}

pub fn build_radial_operator(
    domain: &Domain,
    mode: &Mode,
    bc: FdBoundary,
    grid: RadialGrid,
) -> Result<RadialOperator> {
    let n = domain.dimension() as i32;
    let big_n = grid.points;
    let h = grid.h();
    let radius = domain.radius();
    let l = mode.ell as f64;
    let q = l * (l + n as f64 - 2.0);
    let first = if mode.ell == 0 { 0 } else { 1 };
    let last = if bc == FdBoundary::Dirichlet {
        big_n - 1
    } else {
        big_n
    };
    let flux = |j: usize| -> f64 {
        // r_{j+1/2}^{n-1} / h
        ((j as f64 + 0.5) * h).powi(n - 1) / h
    };
    let mut diag = Vec::with_capacity(last + 1 - first);
    let mut weights = Vec::with_capacity(last + 1 - first);
    for j in first..=last {
        let r = grid.node(j);
        let w = if j == 0 {
            (0.5 * h).powi(n) / n as f64
        } else if j == big_n {
            0.5 * radius.powi(n - 1) * h
        } else {
            r.powi(n - 1) * h
        };
        let left = if j == 0 { 0.0 } else { flux(j - 1) };
        let right = if j == big_n { 0.0 } else { flux(j) };
        let potential = if j == 0 { 0.0 } else { w * q / (r * r) };
        diag.push(left + right + potential);
        weights.push(w);
    }
    let off = (first..last).map(|j| -flux(j)).collect();
    let boundary_area = radius.powi(n - 1);
    let sigma = match bc {
        FdBoundary::Robin(theta) => {
            if theta.norm() == 0.0 {
                return Err(Error::Validation(
                    "Robin parameter 0 is the Dirichlet condition; use FdBoundary::Dirichlet"
                        .into(),
                ));
            }
            -boundary_area / theta
        }
        _ => C::new(0.0, 0.0),
    };
    Ok(RadialOperator {
        grid,
        bc,
        first,
        diag,
        off,
        weights,
        sigma,
        boundary_area,
    })
}

/// Solves a complex tridiagonal system by Gaussian elimination with partial
/// pivoting. `lower[i] = A[i+1][i]`, `upper[i] = A[i][i+1]`.
pub fn solve_tridiagonal(lower: &[C], diag: &[C], upper: &[C], rhs: &[C]) -> Result<Vec<C>> {
    let n = diag.len();
    if lower.len() + 1 != n || upper.len() + 1 != n || rhs.len() != n {
        return Err(Error::Validation(
            "inconsistent tridiagonal dimensions".into(),
        ));
    }
    let scale = diag
        .iter()
        .chain(lower)
        .chain(upper)
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let dl = lower.to_vec();
    let mut d = diag.to_vec();
    let mut du = upper.to_vec();
    let mut du2 = vec![C::new(0.0, 0.0); n.saturating_sub(2)];
    let mut b = rhs.to_vec();
    for i in 0..n.saturating_sub(1) {
        if d[i].norm() >= dl[i].norm() {
            if d[i].norm() == 0.0 {
                return Err(singular());
            }
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            b[i + 1] = b[i + 1] - fact * b[i];
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du2[i];
            }
            du[i] = temp;
            let tb = b[i];
            b[i] = b[i + 1];
            b[i + 1] = tb - fact * b[i + 1];
        }
    }
    if d.iter().any(|p| p.norm() <= 1e-15 * scale) {
        return Err(singular());
    }
    let mut x = b;
    x[n - 1] /= d[n - 1];
    if n > 1 {
        x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
    }
    Ok(x)
}

fn singular() -> Error {
    Error::Singular(
        "shifted radial operator is singular: lambda is (close to) a discrete eigenvalue".into(),
    )
}

impl RadialOperator {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn grid(&self) -> RadialGrid {
        self.grid
    }

    pub fn boundary(&self) -> FdBoundary {
        self.bc
    }

    /// Radii of the unknowns.
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.grid.node(self.first + i))
            .collect()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Node index of the first unknown.
    pub fn first_node(&self) -> usize {
        self.first
    }

    fn stiffness_diag(&self) -> Vec<C> {
        let mut d: Vec<C> = self.diag.iter().map(|&x| C::new(x, 0.0)).collect();
        if let Some(last) = d.last_mut() {
            *last += self.sigma;
        }
        d
    }

    /// `(S - lambda W)^{-1} rhs`.
    pub fn solve_shifted(&self, lambda: C, rhs: &[C]) -> Result<Vec<C>> {
        let mut d = self.stiffness_diag();
        for (dj, w) in d.iter_mut().zip(&self.weights) {
            *dj -= lambda * w;
        }
        let off: Vec<C> = self.off.iter().map(|&x| C::new(x, 0.0)).collect();
        solve_tridiagonal(&off, &d, &off, rhs)
    }

    /// `(A - lambda)^{-1} f`.
    pub fn resolvent(&self, lambda: C, f: &[C]) -> Result<Vec<C>> {
        let wf: Vec<C> = f.iter().zip(&self.weights).map(|(x, w)| x * w).collect();
        self.solve_shifted(lambda, &wf)
    }

    /// `A u = W^{-1} S u`.
    pub fn apply(&self, u: &[C]) -> Vec<C> {
        let d = self.stiffness_diag();
        let m = self.dim();
        (0..m)
            .map(|i| {
                let mut s = d[i] * u[i];
                if i > 0 {
                    s += self.off[i - 1] * u[i - 1];
                }
                if i + 1 < m {
                    s += self.off[i] * u[i + 1];
                }
                s / self.weights[i]
            })
            .collect()
    }

    pub fn inner(&self, f: &[C], g: &[C]) -> C {
        f.iter()
            .zip(g)
            .zip(&self.weights)
            .map(|((a, b), w)| a * b.conj() * w)
            .sum()
    }

    /// Dense `A`.
    pub fn to_dense(&self) -> DMatrix<C> {
        let d = self.stiffness_diag();
        let m = self.dim();
        DMatrix::from_fn(m, m, |i, j| {
            let s = if i == j {
                d[i]
            } else if j == i + 1 {
                C::new(self.off[i], 0.0)
            } else if i == j + 1 {
                C::new(self.off[j], 0.0)
            } else {
                C::new(0.0, 0.0)
            };
            s / self.weights[i]
        })
    }

    /// Smallest `count` eigenvalues (real parameter only), by Sturm-sequence
    /// bisection on `W^{-1/2} S W^{-1/2}`.
    pub fn eigenvalues(&self, count: usize) -> Result<Vec<f64>> {
        if self.sigma.im != 0.0 {
            return Err(Error::Validation(
                "eigenvalue bisection needs a real boundary parameter".into(),
            ));
        }
        let m = self.dim();
        let count = count.min(m);
        let d: Vec<f64> = self
            .stiffness_diag()
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| s.re / w)
            .collect();
        let e: Vec<f64> = (0..m.saturating_sub(1))
            .map(|i| self.off[i] / (self.weights[i] * self.weights[i + 1]).sqrt())
            .collect();
        let below = |x: f64| -> usize {
            let mut neg = 0;
            let mut q = 1.0;
            for i in 0..m {
                let e2 = if i == 0 { 0.0 } else { e[i - 1] * e[i - 1] };
                q = d[i] - x - e2 / q;
                if q == 0.0 {
                    q = -1e-300;
                }
                if q < 0.0 {
                    neg += 1;
                }
            }
            neg
        };
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..m {
            let r =
                if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < m { e[i].abs() } else { 0.0 };
            lo = lo.min(d[i] - r);
            hi = hi.max(d[i] + r);
        }
        let mut out = Vec::with_capacity(count);
        for k in 0..count {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if below(mid) > k {
                    b = mid;
                } else {
                    a = mid;
                }
                if b - a <= 1e-14 * (1.0 + mid.abs()) {
                    break;
                }
            }
            out.push(0.5 * (a + b));
        }
        Ok(out)
    }
}

/// Boundary value of the discrete solution with unit Neumann data.
pub fn fd_weyl_value(
    domain: &Domain,
    mode: &Mode,
    lambda: SpectralPoint,
    grid: RadialGrid,
) -> Result<C> {
    let op = build_radial_operator(domain, mode, FdBoundary::Neumann, grid)?;
    let mut rhs = vec![C::new(0.0, 0.0); op.dim()];
    *rhs.last_mut().expect("non-empty grid") = C::new(op.boundary_area, 0.0);
    let u = op.solve_shifted(lambda.lambda, &rhs)?;
    Ok(*u.last().expect("non-empty grid"))
}

/// Discrete resolvent difference of two boundary conditions for one mode.
///
/// Both conditions differ from Neumann only in the last node, so with
/// `G = (S_N - lambda W)^{-1}` and `x = G e_N` every resolvent is
/// `(G - tau x x^T) W` and the difference is the rank-one
/// `(tau_right - tau_left) x x^T W`.
#[derive(Debug, Clone)]
pub struct FdResolventDifference {
    neumann: RadialOperator,
    lambda: C,
    left: FdBoundary,
    right: FdBoundary,
    /// `G e_N`
    x: Vec<C>,
    coefficient: C,
}

fn tau(bc: FdBoundary, rho: C, area: f64) -> Result<C> {
    Ok(match bc {
        FdBoundary::Neumann => C::new(0.0, 0.0),
        FdBoundary::Dirichlet => {
            if rho.norm() == 0.0 {
                return Err(singular());
            }
            rho.inv()
        }
        FdBoundary::Robin(theta) => {
            let sigma = -area / theta;
            let den = C::new(1.0, 0.0) + sigma * rho;
            if den.norm() <= 1e-14 * (1.0 + (sigma * rho).norm()) {
                return Err(singular());
            }
            sigma / den
        }
    })
}

pub fn fd_resolvent_difference(
    domain: &Domain,
    mode: &Mode,
    lambda: SpectralPoint,
    left: FdBoundary,
    right: FdBoundary,
    grid: RadialGrid,
) -> Result<FdResolventDifference> {
    let neumann = build_radial_operator(domain, mode, FdBoundary::Neumann, grid)?;
    let m = neumann.dim();
    let mut e = vec![C::new(0.0, 0.0); m];
    e[m - 1] = C::new(1.0, 0.0);
    let x = neumann.solve_shifted(lambda.lambda, &e)?;
    let rho = x[m - 1];
    let area = neumann.boundary_area;
    let coefficient = if left == right {
        C::new(0.0, 0.0)
    } else {
        tau(right, rho, area)? - tau(left, rho, area)?
    };
    Ok(FdResolventDifference {
        neumann,
        lambda: lambda.lambda,
        left,
        right,
        x,
        coefficient,
    })
}

impl FdResolventDifference {
    /// `W^{1/2} x`
    fn weighted_vector(&self) -> Vec<C> {
        self.x
            .iter()
            .zip(self.neumann.weights())
            .map(|(x, w)| x * w.sqrt())
            .collect()
    }

    /// Largest singular value in the weighted norm: `|coefficient| ||W^{1/2} x||^2`.
    pub fn top_singular_value(&self) -> f64 {
        let a2: f64 = self.weighted_vector().iter().map(|z| z.norm_sqr()).sum();
        self.coefficient.norm() * a2
    }

    pub fn operator(&self) -> &RadialOperator {
        &self.neumann
    }

    fn resolvent_column(&self, bc: FdBoundary, f: &[C]) -> Result<Vec<C>> {
        let m = self.neumann.dim();
        match bc {
            FdBoundary::Neumann => self.neumann.resolvent(self.lambda, f),
            FdBoundary::Dirichlet => {
                let op = build_radial_operator_like(&self.neumann, bc)?;
                let mut v = op.resolvent(self.lambda, &f[..m - 1])?;
                v.push(C::new(0.0, 0.0));
                Ok(v)
            }
            FdBoundary::Robin(_) => {
                build_radial_operator_like(&self.neumann, bc)?.resolvent(self.lambda, f)
            }
        }
    }

    /// `(A_left - lambda)^{-1} f - (A_right - lambda)^{-1} f` by direct solves,
    /// with the Dirichlet resolvent extended by zero at `r = R`.
    pub fn apply(&self, f: &[C]) -> Result<Vec<C>> {
        let a = self.resolvent_column(self.left, f)?;
        let b = self.resolvent_column(self.right, f)?;
        Ok(a.iter().zip(&b).map(|(x, y)| x - y).collect())
    }

    /// Dense `W^{1/2} D W^{-1/2}` assembled column by column from direct solves.
    pub fn weighted_dense(&self) -> Result<DMatrix<C>> {
        let m = self.neumann.dim();
        let w = self.neumann.weights();
        let mut out = DMatrix::zeros(m, m);
        for j in 0..m {
            let mut e = vec![C::new(0.0, 0.0); m];
            e[j] = C::new(1.0 / w[j].sqrt(), 0.0);
            let col = self.apply(&e)?;
            for i in 0..m {
                out[(i, j)] = col[i] * w[i].sqrt();
            }
        }
        Ok(out)
    }

    /// Largest weighted singular value by power iteration on `B^* B`, where
    /// `B = W^{1/2} D W^{-1/2}` is applied through direct solves. `B` is
    /// complex symmetric, so `B^* y = conj(B conj(y))`.
    pub fn power_iteration(&self, iterations: usize) -> Result<f64> {
        let m = self.neumann.dim();
        let w: Vec<f64> = self.neumann.weights().iter().map(|w| w.sqrt()).collect();
        let apply_b = |v: &[C]| -> Result<Vec<C>> {
            let f: Vec<C> = v.iter().zip(&w).map(|(x, s)| x / s).collect();
            Ok(self.apply(&f)?.iter().zip(&w).map(|(x, s)| x * s).collect())
        };
        let mut v: Vec<C> = (0..m)
            .map(|i| C::new(1.0 + (i % 7) as f64, (i % 3) as f64))
            .collect();
        let mut sigma = 0.0;
        for _ in 0..iterations.max(1) {
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Ok(0.0);
            }
            v.iter_mut().for_each(|z| *z /= norm);
            let bv = apply_b(&v)?;
            sigma = bv.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let conj_bv: Vec<C> = bv.iter().map(|z| z.conj()).collect();
            v = apply_b(&conj_bv)?.iter().map(|z| z.conj()).collect();
        }
        Ok(sigma)
    }
}

fn build_radial_operator_like(neumann: &RadialOperator, bc: FdBoundary) -> Result<RadialOperator> {
    let mut op = neumann.clone();
    op.bc = bc;
    match bc {
        FdBoundary::Neumann => {}
        FdBoundary::Robin(theta) => {
            if theta.norm() == 0.0 {
                return Err(Error::Validation(
                    "Robin parameter 0 is the Dirichlet condition".into(),
                ));
            }
            op.sigma = -op.boundary_area / theta;
        }
        FdBoundary::Dirichlet => {
            op.diag.pop();
            op.weights.pop();
            op.off.pop();
        }
    }
    Ok(op)
}

/// Spectral norm of `alpha a a^T - beta b b^T` in `C^m`.
fn rank_two_norm(alpha: C, a: &[C], beta: C, b: &[C]) -> f64 {
    let dot = |u: &[C], v: &[C]| -> C { u.iter().zip(v).map(|(x, y)| y.conj() * x).sum() };
    let na = dot(a, a).re.sqrt();
    // a = na q1, b = r12 q1 + r22 q2 (Gram-Schmidt)
    let (r11, r12, r22) = if na == 0.0 {
        let nb = dot(b, b).re.sqrt();
        (0.0, C::new(0.0, 0.0), nb)
    } else {
        let q1: Vec<C> = a.iter().map(|z| z / na).collect();
        let r12 = dot(b, &q1);
        let rest: f64 = b
            .iter()
            .zip(&q1)
            .map(|(y, q)| (y - r12 * q).norm_sqr())
            .sum::<f64>()
            .sqrt();
        (na, r12, rest)
    };
    // X = Q R diag(alpha, -beta) R^T Q^T and Q^T has orthonormal rows
    let r = nalgebra::Matrix2::new(C::new(r11, 0.0), r12, C::new(0.0, 0.0), C::new(r22, 0.0));
    let d = nalgebra::Matrix2::new(alpha, C::new(0.0, 0.0), C::new(0.0, 0.0), -beta);
    let core = r * d * r.transpose();
    core.singular_values().max()
}

/// Weighted operator-norm distance between the discrete resolvent difference
/// and the analytic rank-one correction `c_l gamma(lambda) e <., gamma(conj lambda) e>`
/// sampled on the grid.
pub fn krein_identity_residual(
    domain: &Domain,
    mode: &Mode,
    lambda: SpectralPoint,
    pair: &ExtensionPair,
    grid: RadialGrid,
) -> Result<f64> {
    if pair.is_trivial() {
        return Ok(0.0);
    }
    let left = FdBoundary::from_realization(&pair.left, mode.ell)?;
    let right = FdBoundary::from_realization(&pair.right, mode.ell)?;
    let fd = fd_resolvent_difference(domain, mode, lambda, left, right, grid)?;
    let c = correction_coefficient(pair, domain, mode, lambda)?;
    let op = fd.operator();
    let a = fd.weighted_vector();
    let b: Vec<C> = op
        .nodes()
        .iter()
        .zip(op.weights())
        .map(|(&r, &w)| Ok(gamma_profile(domain, mode, lambda, r)? * w.sqrt()))
        .collect::<Result<_>>()?;
    Ok(rank_two_norm(fd.coefficient, &a, c, &b))
}

/// `|<f, gamma(conj lambda) e>_w - R^{(n-1)/2} [(A_N - lambda)^{-1} f](R)|`.
pub fn gamma_adjoint_identity_check(
    domain: &Domain,
    mode: &Mode,
    lambda: SpectralPoint,
    grid: RadialGrid,
    f: &[C],
) -> Result<f64> {
    let op = build_radial_operator(domain, mode, FdBoundary::Neumann, grid)?;
    if f.len() != op.dim() {
        return Err(Error::Validation(format!(
            "grid function has {} values, operator has {} unknowns",
            f.len(),
            op.dim()
        )));
    }
    let g: Vec<C> = op
        .nodes()
        .iter()
        .map(|&r| gamma_profile(domain, mode, lambda.conj(), r))
        .collect::<Result<_>>()?;
    let lhs = op.inner(f, &g);
    let v = op.resolvent(lambda.lambda, f)?;
    let trace = v.last().expect("non-empty grid")
        * domain
            .radius()
            .powf((domain.dimension() as f64 - 1.0) / 2.0);
    Ok((lhs - trace).norm())
}

/// `log2(e_k / e_{k+1})` for errors on successively halved grids.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Order from three values on grids `h, h/2, h/4` without a reference value.
pub fn richardson_order(coarse: f64, medium: f64, fine: f64) -> f64 {
    ((coarse - medium) / (medium - fine)).abs().log2()
}

/// Same as [`richardson_order`] for complex values.
pub fn richardson_order_complex(coarse: C, medium: C, fine: C) -> f64 {
    ((coarse - medium).norm() / (medium - fine).norm()).log2()
}
