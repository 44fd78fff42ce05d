//! Finite-dimensional realisations `w[k] = C A^k x0` of one-sided sequences
//! and their closure under the shift-operator algebra.
//!
//! [`Triple`] is the public representation. [`Lagged`] sequences over a
//! shared [`Dynamics`] are a compact working form for long chains of
//! operations (back substitution) where repeated block augmentation would
//! make the state dimension explode.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::mat_serde;
use crate::shift_algebra::{PartialSums, ShiftOp};

/// Sample index used by the advisory decay check.
pub const DECAY_PROBE: usize = 200;

/// Realisation `(C, A, x0)`; `x0` may hold several columns, one per basis
/// initial condition, in which case each sample is a `p × b` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    #[serde(rename = "C", with = "mat_serde")]
    c: DMatrix<f64>,
    #[serde(rename = "A", with = "mat_serde")]
    a: DMatrix<f64>,
    #[serde(with = "mat_serde")]
    x0: DMatrix<f64>,
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut(a.shape(), b.shape()).copy_from(b);
    out
}

impl Triple {
    pub fn new(c: DMatrix<f64>, a: DMatrix<f64>, x0: DMatrix<f64>) -> Result<Self> {
        let m = a.nrows();
        if a.ncols() != m || c.ncols() != m || x0.nrows() != m {
            return Err(Error::DimensionMismatch(format!(
                "C {}x{}, A {}x{}, x0 {}x{}",
                c.nrows(),
                c.ncols(),
                a.nrows(),
                a.ncols(),
                x0.nrows(),
                x0.ncols()
            )));
        }
        Ok(Self { c, a, x0 })
    }

    /// The zero sequence with `p` outputs and `b` basis columns.
    pub fn zero(p: usize, b: usize) -> Self {
        Self {
            c: DMatrix::zeros(p, 0),
            a: DMatrix::zeros(0, 0),
            x0: DMatrix::zeros(0, b),
        }
    }

    /// Scalar geometric sequence `(1, r, r^2, ...)`.
    pub fn geometric(r: f64) -> Self {
        Self::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, r),
            DMatrix::from_element(1, 1, 1.0),
        )
        .expect("scalar dimensions agree")
    }

    /// Finitely supported sequence with the given leading samples, realised
    /// as a shift register.
    pub fn finite(values: &[DMatrix<f64>], p: usize, b: usize) -> Result<Self> {
        if values.iter().any(|v| v.shape() != (p, b)) {
            return Err(Error::DimensionMismatch(format!("finite samples must be {p}x{b}")));
        }
        let n = values.len();
        if n == 0 || b == 0 {
            return Ok(Self::zero(p, b));
        }
        let m = n * b;
        let mut a = DMatrix::zeros(m, m);
        for i in 1..n {
            a.view_mut((i * b, (i - 1) * b), (b, b)).fill_with_identity();
        }
        let mut x0 = DMatrix::zeros(m, b);
        x0.view_mut((0, 0), (b, b)).fill_with_identity();
        let mut c = DMatrix::zeros(p, m);
        for (i, v) in values.iter().enumerate() {
            c.view_mut((0, i * b), (p, b)).copy_from(v);
        }
        Self::new(c, a, x0)
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn x0(&self) -> &DMatrix<f64> {
        &self.x0
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn width(&self) -> usize {
        self.x0.ncols()
    }

    /// `C A^k x0`.
    pub fn sample(&self, k: usize) -> DMatrix<f64> {
        let mut x = self.x0.clone();
        for _ in 0..k {
            x = &self.a * x;
        }
        &self.c * x
    }

    pub fn first(&self) -> DMatrix<f64> {
        self.sample(0)
    }

    /// The first `n` samples.
    pub fn samples(&self, n: usize) -> Vec<DMatrix<f64>> {
        let mut x = self.x0.clone();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(&self.c * &x);
            x = &self.a * x;
        }
        out
    }

    /// Scalar samples of a single-output, single-column sequence.
    pub fn scalar_samples(&self, n: usize) -> Vec<f64> {
        self.samples(n).iter().map(|s| s[(0, 0)]).collect()
    }

    /// Forward shift: `(CA, A, x0)`.
    pub fn apply_q(&self) -> Self {
        Self {
            c: &self.c * &self.a,
            a: self.a.clone(),
            x0: self.x0.clone(),
        }
    }

    /// Backward shift via the state-doubling block form
    /// `x0' = [x0; 0]`, `A' = [A 0; I 0]`, `C' = [0 C]`.
    pub fn apply_qstar(&self) -> Self {
        let m = self.state_dim();
        let mut a = DMatrix::zeros(2 * m, 2 * m);
        a.view_mut((0, 0), (m, m)).copy_from(&self.a);
        a.view_mut((m, 0), (m, m)).fill_with_identity();
        let mut c = DMatrix::zeros(self.outputs(), 2 * m);
        c.view_mut((0, m), self.c.shape()).copy_from(&self.c);
        let mut x0 = DMatrix::zeros(2 * m, self.width());
        x0.view_mut((0, 0), self.x0.shape()).copy_from(&self.x0);
        Self { c, a, x0 }
    }

    /// `(q*)^k` realised with an output delay line, adding `k·p` states.
    pub fn delay(&self, k: usize) -> Self {
        if k == 0 {
            return self.clone();
        }
        let (m, p) = (self.state_dim(), self.outputs());
        let n = m + k * p;
        let mut a = DMatrix::zeros(n, n);
        a.view_mut((0, 0), (m, m)).copy_from(&self.a);
        a.view_mut((m, 0), (p, m)).copy_from(&self.c);
        for i in 1..k {
            a.view_mut((m + i * p, m + (i - 1) * p), (p, p)).fill_with_identity();
        }
        let mut c = DMatrix::zeros(p, n);
        c.view_mut((0, n - p), (p, p)).fill_with_identity();
        let mut x0 = DMatrix::zeros(n, self.width());
        x0.view_mut((0, 0), self.x0.shape()).copy_from(&self.x0);
        Self { c, a, x0 }
    }

    /// Block-diagonal direct sum realising `self + other`.
    pub fn add(&self, other: &Triple) -> Result<Self> {
        if self.outputs() != other.outputs() || self.width() != other.width() {
            return Err(Error::DimensionMismatch(format!(
                "adding sequences with shapes {}x{} and {}x{}",
                self.outputs(),
                self.width(),
                other.outputs(),
                other.width()
            )));
        }
        if other.state_dim() == 0 {
            return Ok(self.clone());
        }
        if self.state_dim() == 0 {
            return Ok(other.clone());
        }
        let mut c = DMatrix::zeros(self.outputs(), self.state_dim() + other.state_dim());
        c.view_mut((0, 0), self.c.shape()).copy_from(&self.c);
        c.view_mut((0, self.state_dim()), other.c.shape()).copy_from(&other.c);
        Ok(Self {
            c,
            a: block_diag(&self.a, &other.a),
            x0: DMatrix::from_fn(self.state_dim() + other.state_dim(), self.width(), |i, j| {
                if i < self.state_dim() {
                    self.x0[(i, j)]
                } else {
                    other.x0[(i - self.state_dim(), j)]
                }
            }),
        })
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            c: &self.c * k,
            a: self.a.clone(),
            x0: self.x0.clone(),
        }
    }

    /// Left-multiplies the output by a real matrix.
    pub fn map_output(&self, k: &DMatrix<f64>) -> Result<Self> {
        if k.ncols() != self.outputs() {
            return Err(Error::DimensionMismatch(format!(
                "output map with {} columns for {} outputs",
                k.ncols(),
                self.outputs()
            )));
        }
        Ok(Self {
            c: k * &self.c,
            a: self.a.clone(),
            x0: self.x0.clone(),
        })
    }

    /// Applies a shift operator. Monomials are grouped by their `q*` power
    /// so each group costs one delay line.
    pub fn apply_shiftop(&self, x: &ShiftOp) -> Self {
        let mut groups: BTreeMap<u32, DMatrix<f64>> = BTreeMap::new();
        for (m, coeff) in x.terms() {
            let entry = groups
                .entry(m.istar)
                .or_insert_with(|| DMatrix::zeros(self.outputs(), self.state_dim()));
            *entry += &self.c_times_power(m.j) * coeff;
        }
        let mut out = Self::zero(self.outputs(), self.width());
        for (istar, c) in groups {
            let t = Self {
                c,
                a: self.a.clone(),
                x0: self.x0.clone(),
            };
            out = out.add(&t.delay(istar as usize)).expect("shapes agree");
        }
        out
    }

    fn c_times_power(&self, j: u32) -> DMatrix<f64> {
        let mut c = self.c.clone();
        for _ in 0..j {
            c = &c * &self.a;
        }
        c
    }

    /// Pointwise scaling `s[t] ↦ σ_t s[t]`: `σ_∞` times the sequence plus a
    /// finitely supported correction.
    pub fn scale_pointwise(&self, p: &PartialSums) -> Self {
        let head = self.samples(p.sigma.len());
        let correction: Vec<DMatrix<f64>> = head
            .iter()
            .zip(&p.sigma)
            .map(|(s, sig)| s * (sig - p.sigma_inf))
            .collect();
        let fix = Self::finite(&correction, self.outputs(), self.width()).expect("shapes agree");
        self.scale(p.sigma_inf).add(&fix).expect("shapes agree")
    }

    /// Realises `y` with `(1 - r q*) y = self`, i.e. `y[k] = self[k] + r y[k-1]`.
    pub fn geometric_resolvent(&self, r: f64) -> Self {
        let (m, p) = (self.state_dim(), self.outputs());
        let mut a = DMatrix::zeros(m + p, m + p);
        a.view_mut((0, 0), (m, m)).copy_from(&self.a);
        a.view_mut((m, 0), (p, m)).copy_from(&self.c);
        a.view_mut((m, m), (p, p)).fill_diagonal(r);
        let mut c = DMatrix::zeros(p, m + p);
        c.view_mut((0, 0), (p, m)).copy_from(&self.c);
        c.view_mut((0, m), (p, p)).fill_diagonal(r);
        let mut x0 = DMatrix::zeros(m + p, self.width());
        x0.view_mut((0, 0), self.x0.shape()).copy_from(&self.x0);
        Self { c, a, x0 }
    }

    /// Drops states that are structurally unreachable from `x0` or
    /// unobservable from `C`. Samples are unchanged exactly.
    pub fn prune(&self) -> Self {
        let m = self.state_dim();
        let mut reach: Vec<bool> = (0..m).map(|i| self.x0.row(i).iter().any(|&v| v != 0.0)).collect();
        let mut changed = true;
        while changed {
            changed = false;
            for i in 0..m {
                if !reach[i] && (0..m).any(|j| reach[j] && self.a[(i, j)] != 0.0) {
                    reach[i] = true;
                    changed = true;
                }
            }
        }
        let mut obs: Vec<bool> = (0..m).map(|j| self.c.column(j).iter().any(|&v| v != 0.0)).collect();
        changed = true;
        while changed {
            changed = false;
            for j in 0..m {
                if !obs[j] && (0..m).any(|i| obs[i] && self.a[(i, j)] != 0.0) {
                    obs[j] = true;
                    changed = true;
                }
            }
        }
        let keep: Vec<usize> = (0..m).filter(|&i| reach[i] && obs[i]).collect();
        Self {
            c: self.c.select_columns(&keep),
            a: self.a.select_rows(&keep).select_columns(&keep),
            x0: self.x0.select_rows(&keep),
        }
    }

    /// Advisory square-summability check; logs a warning and returns false
    /// when the sequence has not decayed by [`DECAY_PROBE`].
    pub fn check_decay(&self) -> bool {
        let early = self.samples(10).iter().map(|s| s.norm()).fold(0.0, f64::max);
        let late = self.sample(DECAY_PROBE).norm();
        let ok = late <= 1e-6 * early || early == 0.0 && late == 0.0;
        if !ok {
            log::warn!("sequence has not decayed: |w[{DECAY_PROBE}]| = {late:.3e} vs early max {early:.3e}");
        }
        ok
    }
}

/// Dynamics `(A, X0)` shared by a family of [`Lagged`] sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct Dynamics {
    a: DMatrix<f64>,
    x0: DMatrix<f64>,
}

impl Dynamics {
    pub fn new(a: DMatrix<f64>, x0: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() || x0.nrows() != a.nrows() {
            return Err(Error::DimensionMismatch("dynamics shapes".into()));
        }
        Ok(Self { a, x0 })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn width(&self) -> usize {
        self.x0.ncols()
    }

    /// Puts several triples on one set of dynamics. Triples that already
    /// share `A` and `x0` keep them; otherwise the state is stacked.
    pub fn merge(triples: &[Triple]) -> Result<(Dynamics, Vec<Lagged>)> {
        let Some(first) = triples.first() else {
            return Err(Error::DimensionMismatch("no sequences to merge".into()));
        };
        let b = first.width();
        if triples.iter().any(|t| t.width() != b) {
            return Err(Error::DimensionMismatch("sequences with different widths".into()));
        }
        if triples.iter().all(|t| t.a == first.a && t.x0 == first.x0) {
            let dynamics = Dynamics::new(first.a.clone(), first.x0.clone())?;
            let seqs = triples.iter().map(|t| Lagged::from_output(t.c.clone())).collect();
            return Ok((dynamics, seqs));
        }
        let total: usize = triples.iter().map(Triple::state_dim).sum();
        let mut a = DMatrix::zeros(total, total);
        let mut x0 = DMatrix::zeros(total, b);
        let mut seqs = Vec::with_capacity(triples.len());
        let mut at = 0;
        for t in triples {
            let m = t.state_dim();
            a.view_mut((at, at), (m, m)).copy_from(&t.a);
            x0.view_mut((at, 0), (m, b)).copy_from(&t.x0);
            let mut c = DMatrix::zeros(t.outputs(), total);
            c.view_mut((0, at), (t.outputs(), m)).copy_from(&t.c);
            seqs.push(Lagged::from_output(c));
            at += m;
        }
        Ok((Dynamics::new(a, x0)?, seqs))
    }
}

/// Sequence over shared dynamics: explicit samples for `t < prefix.len()`,
/// then `c A^(t - lag) X0`. Always `prefix.len() >= lag`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lagged {
    prefix: Vec<DMatrix<f64>>,
    c: DMatrix<f64>,
    lag: usize,
}

impl Lagged {
    pub fn from_output(c: DMatrix<f64>) -> Self {
        Self {
            prefix: Vec::new(),
            c,
            lag: 0,
        }
    }

    pub fn zero(p: usize, d: &Dynamics) -> Self {
        Self::from_output(DMatrix::zeros(p, d.state_dim()))
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    fn tail_output(&self, t: usize, d: &Dynamics) -> DMatrix<f64> {
        let mut c = self.c.clone();
        for _ in self.lag..t {
            c = &c * &d.a;
        }
        c
    }

    pub fn sample(&self, t: usize, d: &Dynamics) -> DMatrix<f64> {
        match self.prefix.get(t) {
            Some(v) => v.clone(),
            None => self.tail_output(t, d) * &d.x0,
        }
    }

    fn extend(&mut self, len: usize, d: &Dynamics) {
        if self.prefix.len() >= len {
            return;
        }
        let mut c = self.tail_output(self.prefix.len(), d);
        while self.prefix.len() < len {
            self.prefix.push(&c * &d.x0);
            c = &c * &d.a;
        }
    }

    /// `q^j`.
    pub fn shift_forward(&self, j: usize, d: &Dynamics) -> Self {
        let prefix = self.prefix.get(j..).map(<[_]>::to_vec).unwrap_or_default();
        if j >= self.lag {
            Self {
                prefix,
                c: self.tail_output(j, d),
                lag: 0,
            }
        } else {
            Self {
                prefix,
                c: self.c.clone(),
                lag: self.lag - j,
            }
        }
    }

    /// `(q*)^i`.
    pub fn delay(&self, i: usize, d: &Dynamics) -> Self {
        let mut prefix = Vec::with_capacity(i + self.prefix.len());
        prefix.extend(std::iter::repeat_n(DMatrix::zeros(self.outputs(), d.width()), i));
        prefix.extend(self.prefix.iter().cloned());
        Self {
            prefix,
            c: self.c.clone(),
            lag: self.lag + i,
        }
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            prefix: self.prefix.iter().map(|v| v * k).collect(),
            c: &self.c * k,
            lag: self.lag,
        }
    }

    pub fn add(&self, other: &Lagged, d: &Dynamics) -> Self {
        let lag = self.lag.max(other.lag);
        let len = self.prefix.len().max(other.prefix.len()).max(lag);
        let mut x = self.clone();
        let mut y = other.clone();
        x.extend(len, d);
        y.extend(len, d);
        let c = x.tail_output(lag, d) + y.tail_output(lag, d);
        Self {
            prefix: x.prefix.iter().zip(&y.prefix).map(|(a, b)| a + b).collect(),
            c,
            lag,
        }
    }

    pub fn sub(&self, other: &Lagged, d: &Dynamics) -> Self {
        self.add(&other.scale(-1.0), d)
    }

    /// `s[t] ↦ σ_t s[t]`.
    pub fn scale_pointwise(&self, p: &PartialSums, d: &Dynamics) -> Self {
        let mut x = self.clone();
        x.extend(p.sigma.len(), d);
        for (t, v) in x.prefix.iter_mut().enumerate() {
            *v *= p.at(t);
        }
        x.c *= p.sigma_inf;
        x
    }

    pub fn apply_shiftop(&self, x: &ShiftOp, d: &Dynamics) -> Self {
        let mut out = Self::zero(self.outputs(), d);
        let mut by_j: BTreeMap<u32, Lagged> = BTreeMap::new();
        for (m, coeff) in x.terms() {
            let shifted = by_j.entry(m.j).or_insert_with(|| self.shift_forward(m.j as usize, d));
            out = out.add(&shifted.delay(m.istar as usize, d).scale(coeff), d);
        }
        out
    }

    /// Standalone realisation.
    pub fn to_triple(&self, d: &Dynamics) -> Triple {
        let (p, b) = (self.outputs(), d.width());
        let n = self.prefix.len();
        let head = Triple::finite(&self.prefix, p, b).expect("prefix shapes agree");
        let tail = Triple {
            c: self.tail_output(n, d),
            a: d.a.clone(),
            x0: d.x0.clone(),
        };
        head.add(&tail.delay(n)).expect("shapes agree").prune()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shift_algebra::Monomial;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn sample_triple() -> Triple {
        Triple::new(
            DMatrix::from_row_slice(1, 2, &[1.0, -0.5]),
            DMatrix::from_row_slice(2, 2, &[0.6, 0.2, -0.3, 0.5]),
            DMatrix::from_row_slice(2, 1, &[1.0, 2.0]),
        )
        .unwrap()
    }

    #[test]
    fn forward_shift() {
        let r = 0.7;
        let t = Triple::geometric(r).apply_q();
        assert_eq!(t.c()[(0, 0)], r);
        let s = Triple::geometric(r).scalar_samples(21);
        assert!(close(&t.scalar_samples(20), &s[1..], 1e-15));
        let fin = Triple::finite(
            &[DMatrix::from_element(1, 1, 3.0), DMatrix::from_element(1, 1, 4.0)],
            1,
            1,
        )
        .unwrap();
        assert_eq!(fin.apply_q().scalar_samples(3), vec![4.0, 0.0, 0.0]);
        let base = sample_triple();
        let twice = base.apply_q().apply_q();
        let op = base.apply_shiftop(&ShiftOp::monomial(0, 2, 1.0));
        assert!(close(&twice.scalar_samples(50), &op.scalar_samples(50), 1e-12));
    }

    #[test]
    fn backward_shift() {
        let t = sample_triple();
        let s = t.apply_qstar();
        assert_eq!(s.state_dim(), 2 * t.state_dim());
        let a = t.scalar_samples(50);
        let b = s.scalar_samples(51);
        assert_eq!(b[0], 0.0);
        assert!(close(&b[1..], &a, 1e-14));
        assert!(close(&s.apply_q().scalar_samples(50), &a, 1e-14));
        assert!(Triple::zero(1, 1)
            .apply_qstar()
            .scalar_samples(5)
            .iter()
            .all(|&x| x == 0.0));
        let d = t.delay(3);
        assert!(close(&d.scalar_samples(53)[3..], &a, 1e-14));
        assert_eq!(d.state_dim(), t.state_dim() + 3);
    }

    #[test]
    fn shiftop_action() {
        let t = Triple::geometric(0.5);
        assert_eq!(
            t.apply_shiftop(&ShiftOp::identity()).scalar_samples(10),
            t.scalar_samples(10)
        );
        let proj = t.apply_shiftop(&ShiftOp::monomial(1, 1, 1.0)).scalar_samples(10);
        assert_eq!(proj[0], 0.0);
        assert!(close(&proj[1..], &t.scalar_samples(10)[1..], 1e-15));
    }

    #[test]
    fn pointwise_scaling() {
        let r = 0.8;
        let t = Triple::geometric(r);
        let same = t.scale_pointwise(&PartialSums::constant(1.0));
        assert!(close(&same.scalar_samples(20), &t.scalar_samples(20), 0.0));
        let p = PartialSums {
            sigma: vec![0.0],
            sigma_inf: 1.0,
        };
        let s = t.scale_pointwise(&p).scalar_samples(20);
        assert_eq!(s[0], 0.0);
        assert!(close(&s[1..], &t.scalar_samples(20)[1..], 1e-15));
        let d = ShiftOp::from_terms([(Monomial::new(0, 0), 2.0), (Monomial::new(1, 1), -1.0)]);
        let back = t
            .scale_pointwise(&d.to_partial_sums().unwrap())
            .scale_pointwise(&d.pinv_rinf().unwrap().to_partial_sums().unwrap());
        assert!(close(&back.scalar_samples(50), &t.scalar_samples(50), 1e-14));
    }

    #[test]
    fn sums() {
        let t = sample_triple();
        let z = Triple::zero(1, 1);
        assert_eq!(t.add(&z).unwrap().scalar_samples(10), t.scalar_samples(10));
        assert!(t
            .add(&t.scale(-1.0))
            .unwrap()
            .scalar_samples(50)
            .iter()
            .all(|x| x.abs() <= 1e-12));
        assert_eq!(t.apply_qstar().first(), DMatrix::zeros(1, 1));
        assert!(t.add(&Triple::zero(2, 1)).is_err());
    }

    #[test]
    fn resolvent() {
        let r = 0.5;
        let d = Triple::finite(
            &[DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 2.0)],
            1,
            1,
        )
        .unwrap();
        let y = d.geometric_resolvent(r).scalar_samples(5);
        let expected = [1.0, 2.5, 1.25, 0.625, 0.3125];
        assert!(close(&y, &expected, 1e-15));
    }

    #[test]
    fn pruning_keeps_samples() {
        let t = sample_triple().apply_qstar().apply_qstar();
        let p = t.prune();
        assert!(p.state_dim() <= t.state_dim());
        assert!(close(&p.scalar_samples(40), &t.scalar_samples(40), 1e-14));
        let fin = Triple::finite(&[DMatrix::from_element(1, 1, 0.0)], 1, 1).unwrap();
        assert_eq!(fin.prune().state_dim(), 0);
    }

    #[test]
    fn decay_check() {
        assert!(Triple::geometric(0.5).check_decay());
        assert!(!Triple::geometric(1.0).check_decay());
    }

    #[test]
    fn lagged_matches_triples() {
        let t = sample_triple();
        let (d, seqs) = Dynamics::merge(std::slice::from_ref(&t)).unwrap();
        let x = ShiftOp::from_terms([
            (Monomial::new(0, 2), 0.5),
            (Monomial::new(2, 1), -1.0),
            (Monomial::new(1, 1), 2.0),
            (Monomial::new(3, 0), 0.25),
        ]);
        let lagged = seqs[0].apply_shiftop(&x, &d).apply_shiftop(&x.adjoint(), &d);
        let direct = t.apply_shiftop(&x).apply_shiftop(&x.adjoint());
        let ls: Vec<f64> = (0..40).map(|k| lagged.sample(k, &d)[(0, 0)]).collect();
        assert!(close(&ls, &direct.scalar_samples(40), 1e-12));
        let back = lagged.to_triple(&d);
        assert!(close(&back.scalar_samples(40), &ls, 1e-12));
        let p = PartialSums {
            sigma: vec![3.0, 0.0, -1.0],
            sigma_inf: 0.5,
        };
        let scaled = lagged.scale_pointwise(&p, &d);
        let dscaled = direct.scale_pointwise(&p);
        let ls: Vec<f64> = (0..40).map(|k| scaled.sample(k, &d)[(0, 0)]).collect();
        assert!(close(&ls, &dscaled.scalar_samples(40), 1e-12));
    }

    #[test]
    fn merge_stacks_distinct_dynamics() {
        let a = sample_triple();
        let b = Triple::geometric(0.3);
        let (d, seqs) = Dynamics::merge(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(d.state_dim(), 3);
        let sa: Vec<f64> = (0..10).map(|k| seqs[0].sample(k, &d)[(0, 0)]).collect();
        let sb: Vec<f64> = (0..10).map(|k| seqs[1].sample(k, &d)[(0, 0)]).collect();
        assert!(close(&sa, &a.scalar_samples(10), 1e-15));
        assert!(close(&sb, &b.scalar_samples(10), 1e-15));
    }

    #[test]
    fn json_round_trip() {
        let t = sample_triple();
        let v = serde_json::to_value(&t).unwrap();
        assert_eq!(v["A"][0], serde_json::json!([0.6, 0.2]));
        let back: Triple = serde_json::from_value(v).unwrap();
        assert_eq!(back, t);
    }
}
