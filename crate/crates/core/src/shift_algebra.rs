//! Exact arithmetic in the operator ring generated by the forward shift `q`
//! and its adjoint `q*` acting on one-sided sequences.
//!
//! Every element is a finite real combination of monomials `(q*)^i q^j`.
//! The relation `q q* = 1` reduces any product to that normal form, while
//! `q* q` is the projection that zeroes the first sample. Elements supported
//! on the diagonal monomials `(q*)^k q^k` form the commutative subring
//! `R_inf`: time-varying, eventually constant pointwise scalings. On that
//! subring pseudoinverses, inverses and square roots are computed through
//! the partial sums of the coefficients.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients with absolute value at or below this are dropped.
pub const ZERO_TOL: f64 = 1e-11;
/// Partial sums down to `-PSD_TOL` are clamped to zero when taking square roots.
pub const PSD_TOL: f64 = 1e-9;
/// Smallest partial sum magnitude accepted by [`ShiftOp::inv_rinf`].
pub const INV_TOL: f64 = 1e-9;

/// Numerical thresholds used by the algebra and the factorisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub zero_tol: f64,
    pub psd_tol: f64,
    pub inv_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            zero_tol: ZERO_TOL,
            psd_tol: PSD_TOL,
            inv_tol: INV_TOL,
        }
    }
}

/// The monomial `(q*)^istar q^j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Monomial {
    pub istar: u32,
    pub j: u32,
}

impl Monomial {
    pub const IDENTITY: Monomial = Monomial { istar: 0, j: 0 };

    pub const fn new(istar: u32, j: u32) -> Self {
        Self { istar, j }
    }

    pub fn degree(self) -> u32 {
        self.istar + self.j
    }

    pub fn is_diagonal(self) -> bool {
        self.istar == self.j
    }

    pub fn adjoint(self) -> Self {
        Self::new(self.j, self.istar)
    }

    /// Normal form of `self ∘ other`, using `q q* = 1`.
    pub fn product(self, other: Monomial) -> Monomial {
        Monomial {
            istar: self.istar + other.istar.saturating_sub(self.j),
            j: other.j + self.j.saturating_sub(other.istar),
        }
    }
}

/// Finite element of the shift-operator ring.
#[derive(Debug, Clone)]
pub struct ShiftOp {
    terms: BTreeMap<Monomial, f64>,
    zero_tol: f64,
}

impl PartialEq for ShiftOp {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
    }
}

impl Default for ShiftOp {
    fn default() -> Self {
        Self::zero()
    }
}

impl ShiftOp {
    pub fn zero() -> Self {
        Self::zero_with_tol(ZERO_TOL)
    }

    pub fn zero_with_tol(zero_tol: f64) -> Self {
        Self {
            terms: BTreeMap::new(),
            zero_tol,
        }
    }

    pub fn identity() -> Self {
        Self::constant(1.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(0, 0, c)
    }

    /// The forward shift `q`.
    pub fn q() -> Self {
        Self::monomial(0, 1, 1.0)
    }

    /// The backward shift `q*`.
    pub fn qstar() -> Self {
        Self::monomial(1, 0, 1.0)
    }

    /// `c · (q*)^istar q^j`.
    pub fn monomial(istar: u32, j: u32, c: f64) -> Self {
        Self::from_terms([(Monomial::new(istar, j), c)])
    }

    /// Builds a canonical operator from `(monomial, coefficient)` pairs,
    /// summing repeated monomials.
    pub fn from_terms<I: IntoIterator<Item = (Monomial, f64)>>(terms: I) -> Self {
        let mut op = Self::zero();
        for (m, c) in terms {
            *op.terms.entry(m).or_insert(0.0) += c;
        }
        op.canonicalize();
        op
    }

    pub fn zero_tol(&self) -> f64 {
        self.zero_tol
    }

    /// Same coefficients under a different pruning threshold.
    pub fn with_zero_tol(mut self, zero_tol: f64) -> Self {
        self.zero_tol = zero_tol;
        self.canonicalize();
        self
    }

    fn canonicalize(&mut self) {
        let tol = self.zero_tol;
        self.terms.retain(|_, c| c.abs() > tol);
    }

    fn like(&self) -> Self {
        Self::zero_with_tol(self.zero_tol)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of a monomial (zero when absent).
    pub fn coeff(&self, istar: u32, j: u32) -> f64 {
        self.terms.get(&Monomial::new(istar, j)).copied().unwrap_or(0.0)
    }

    /// Terms in ascending `(istar, j)` order.
    pub fn terms(&self) -> impl Iterator<Item = (Monomial, f64)> + '_ {
        self.terms.iter().map(|(m, c)| (*m, *c))
    }

    /// Largest `istar + j` over the support (0 for the zero operator).
    pub fn max_degree(&self) -> usize {
        self.terms.keys().map(|m| m.degree() as usize).max().unwrap_or(0)
    }

    pub fn max_istar(&self) -> u32 {
        self.terms.keys().map(|m| m.istar).max().unwrap_or(0)
    }

    /// Sum of all coefficients, i.e. the image under `q ↦ 1`.
    pub fn coefficient_sum(&self) -> f64 {
        self.terms.values().sum()
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.like();
        for (m, v) in &self.terms {
            out.terms.insert(*m, c * v);
        }
        out.canonicalize();
        out
    }

    pub fn adjoint(&self) -> Self {
        let mut out = self.like();
        for (m, v) in &self.terms {
            out.terms.insert(m.adjoint(), *v);
        }
        out
    }

    /// Largest coefficientwise absolute difference.
    pub fn max_abs_diff(&self, other: &ShiftOp) -> f64 {
        let mut worst: f64 = 0.0;
        for (m, c) in &self.terms {
            worst = worst.max((c - other.terms.get(m).copied().unwrap_or(0.0)).abs());
        }
        for (m, c) in &other.terms {
            if !self.terms.contains_key(m) {
                worst = worst.max(c.abs());
            }
        }
        worst
    }

    pub fn approx_eq(&self, other: &ShiftOp, tol: f64) -> bool {
        self.max_abs_diff(other) <= tol
    }

    /// Applies the operator to a finite window `s[0..T)`.
    ///
    /// Only the first `T - max_degree` output samples are guaranteed to match
    /// the action on the full sequence; `Window::valid` records that length.
    pub fn apply(&self, s: &[f64]) -> Result<Window> {
        let degree = self.max_degree();
        let len = s.len();
        if len <= degree {
            return Err(Error::WindowTooShort { len, degree });
        }
        let mut values = vec![0.0; len];
        for (m, c) in &self.terms {
            let (i, j) = (m.istar as usize, m.j as usize);
            for (t, out) in values.iter_mut().enumerate().skip(i) {
                let src = t - i + j;
                if src < len {
                    *out += c * s[src];
                }
            }
        }
        Ok(Window {
            values,
            valid: len - degree,
        })
    }

    /// Dense `T×T` matrix in which `q` becomes the upper shift matrix.
    ///
    /// Each monomial maps to the exact compression of its action onto the
    /// first `T` samples. Products of truncations differ from truncations of
    /// products only in the trailing band, so callers compare leading blocks.
    pub fn to_truncation(&self, size: usize) -> Result<DMatrix<f64>> {
        let degree = self.max_degree();
        if size <= degree {
            return Err(Error::WindowTooShort { len: size, degree });
        }
        let mut out = DMatrix::zeros(size, size);
        for (m, c) in &self.terms {
            let (i, j) = (m.istar as usize, m.j as usize);
            for t in i..size {
                let col = t - i + j;
                if col < size {
                    out[(t, col)] += c;
                }
            }
        }
        Ok(out)
    }

    /// True when every monomial is of the form `(q*)^k q^k`.
    pub fn is_rinf(&self) -> bool {
        self.terms.keys().all(|m| m.is_diagonal())
    }

    fn require_rinf(&self) -> Result<()> {
        match self.terms.keys().find(|m| !m.is_diagonal()) {
            Some(m) => Err(Error::NotInRInf { istar: m.istar, j: m.j }),
            None => Ok(()),
        }
    }

    /// Pointwise weights of an `R_inf` element.
    pub fn to_partial_sums(&self) -> Result<PartialSums> {
        self.require_rinf()?;
        let top = self.terms.keys().map(|m| m.j as usize).max();
        let Some(top) = top else {
            return Ok(PartialSums {
                sigma: Vec::new(),
                sigma_inf: 0.0,
            });
        };
        let mut sigma = Vec::with_capacity(top);
        let mut acc = 0.0;
        for k in 0..top {
            acc += self.coeff(k as u32, k as u32);
            sigma.push(acc);
        }
        acc += self.coeff(top as u32, top as u32);
        Ok(PartialSums { sigma, sigma_inf: acc })
    }

    pub fn from_partial_sums(p: &PartialSums) -> Self {
        Self::from_partial_sums_with_tol(p, ZERO_TOL)
    }

    pub fn from_partial_sums_with_tol(p: &PartialSums, zero_tol: f64) -> Self {
        let mut op = Self::zero_with_tol(zero_tol);
        let mut prev = 0.0;
        for (k, s) in p.sigma.iter().enumerate() {
            op.terms.insert(Monomial::new(k as u32, k as u32), s - prev);
            prev = *s;
        }
        let n = p.sigma.len() as u32;
        op.terms.insert(Monomial::new(n, n), p.sigma_inf - prev);
        op.canonicalize();
        op
    }

    fn map_partial_sums(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let p = self.to_partial_sums()?;
        let mapped = PartialSums {
            sigma: p.sigma.iter().map(|s| f(*s)).collect(),
            sigma_inf: f(p.sigma_inf),
        };
        Ok(Self::from_partial_sums_with_tol(&mapped, self.zero_tol))
    }

    /// Moore–Penrose pseudoinverse of an `R_inf` element.
    pub fn pinv_rinf(&self) -> Result<Self> {
        let tol = self.zero_tol;
        self.map_partial_sums(|s| if s.abs() > tol { 1.0 / s } else { 0.0 })
    }

    pub fn is_psd_rinf(&self) -> bool {
        self.is_psd_rinf_with(PSD_TOL)
    }

    pub fn is_psd_rinf_with(&self, psd_tol: f64) -> bool {
        self.to_partial_sums()
            .map(|p| p.iter().all(|s| s >= -psd_tol))
            .unwrap_or(false)
    }

    /// Positive semi-definite square root of an `R_inf` element.
    pub fn sqrt_rinf(&self) -> Result<Self> {
        self.sqrt_rinf_with(PSD_TOL)
    }

    pub fn sqrt_rinf_with(&self, psd_tol: f64) -> Result<Self> {
        let p = self.to_partial_sums()?;
        if let Some(bad) = p.iter().find(|s| *s < -psd_tol) {
            return Err(Error::NotPsd {
                value: bad,
                tol: psd_tol,
            });
        }
        self.map_partial_sums(|s| s.max(0.0).sqrt())
    }

    /// Inverse of an `R_inf` element whose partial sums are bounded away from zero.
    pub fn inv_rinf(&self) -> Result<Self> {
        self.inv_rinf_with(INV_TOL)
    }

    pub fn inv_rinf_with(&self, inv_tol: f64) -> Result<Self> {
        let p = self.to_partial_sums()?;
        if let Some(bad) = p.iter().find(|s| s.abs() <= inv_tol) {
            return Err(Error::Singular {
                value: bad,
                tol: inv_tol,
            });
        }
        self.map_partial_sums(|s| 1.0 / s)
    }

    /// Whether [`ShiftOp::inv_rinf_with`] would succeed.
    pub fn is_invertible_rinf(&self, inv_tol: f64) -> bool {
        self.to_partial_sums()
            .map(|p| p.iter().all(|s| s.abs() > inv_tol))
            .unwrap_or(false)
    }
}

/// Output of [`ShiftOp::apply`]: the first `valid` values are exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub values: Vec<f64>,
    pub valid: usize,
}

impl Window {
    pub fn valid_values(&self) -> &[f64] {
        &self.values[..self.valid]
    }
}

/// Pointwise weights `σ_0, …, σ_{n-1}` followed by the constant `σ_inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialSums {
    pub sigma: Vec<f64>,
    pub sigma_inf: f64,
}

impl PartialSums {
    pub fn constant(c: f64) -> Self {
        Self {
            sigma: Vec::new(),
            sigma_inf: c,
        }
    }

    /// Weight applied at time `t`.
    pub fn at(&self, t: usize) -> f64 {
        self.sigma.get(t).copied().unwrap_or(self.sigma_inf)
    }

    /// All distinct weights, `σ_inf` last.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.sigma.iter().copied().chain(std::iter::once(self.sigma_inf))
    }
}

fn combine(x: &ShiftOp, y: &ShiftOp, sign: f64) -> ShiftOp {
    let mut out = x.clone();
    for (m, c) in &y.terms {
        *out.terms.entry(*m).or_insert(0.0) += sign * c;
    }
    out.canonicalize();
    out
}

fn product(x: &ShiftOp, y: &ShiftOp) -> ShiftOp {
    let mut out = x.like();
    for (a, ca) in &x.terms {
        for (b, cb) in &y.terms {
            *out.terms.entry(a.product(*b)).or_insert(0.0) += ca * cb;
        }
    }
    out.canonicalize();
    out
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl $trait<&ShiftOp> for &ShiftOp {
            type Output = ShiftOp;
            fn $method(self, rhs: &ShiftOp) -> ShiftOp {
                $body(self, rhs)
            }
        }
        impl $trait<ShiftOp> for ShiftOp {
            type Output = ShiftOp;
            fn $method(self, rhs: ShiftOp) -> ShiftOp {
                $body(&self, &rhs)
            }
        }
        impl $trait<&ShiftOp> for ShiftOp {
            type Output = ShiftOp;
            fn $method(self, rhs: &ShiftOp) -> ShiftOp {
                $body(&self, rhs)
            }
        }
        impl $trait<ShiftOp> for &ShiftOp {
            type Output = ShiftOp;
            fn $method(self, rhs: ShiftOp) -> ShiftOp {
                $body(self, &rhs)
            }
        }
    };
}

forward_binop!(Add, add, |x, y| combine(x, y, 1.0));
forward_binop!(Sub, sub, |x, y| combine(x, y, -1.0));
forward_binop!(Mul, mul, product);

impl Neg for &ShiftOp {
    type Output = ShiftOp;
    fn neg(self) -> ShiftOp {
        self.scale(-1.0)
    }
}

impl Neg for ShiftOp {
    type Output = ShiftOp;
    fn neg(self) -> ShiftOp {
        self.scale(-1.0)
    }
}

impl fmt::Display for ShiftOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, (m, c)) in self.terms.iter().enumerate() {
            let sign = if *c < 0.0 { "-" } else { "+" };
            if n == 0 {
                if *c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            write!(f, "{}", c.abs())?;
            let power = |f: &mut fmt::Formatter<'_>, sym: &str, p: u32| match p {
                0 => Ok(()),
                1 => write!(f, "·{sym}"),
                _ => write!(f, "·{sym}^{p}"),
            };
            power(f, "q*", m.istar)?;
            power(f, "q", m.j)?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    istar: u32,
    j: u32,
    c: f64,
}

#[derive(Serialize, Deserialize)]
struct ShiftOpRepr {
    terms: Vec<TermRepr>,
}

impl Serialize for ShiftOp {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ShiftOpRepr {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| TermRepr {
                    istar: m.istar,
                    j: m.j,
                    c: *c,
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ShiftOp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = ShiftOpRepr::deserialize(deserializer)?;
        Ok(ShiftOp::from_terms(
            repr.terms.into_iter().map(|t| (Monomial::new(t.istar, t.j), t.c)),
        ))
    }
}
