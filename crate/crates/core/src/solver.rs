//! Triangular solves `L v = w`, `L* z = v` over sequences given as
//! triples, and extraction of control laws from the solution's first sample.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cholesky::Factorisation;
use crate::error::{Error, Result};
use crate::json::{mat_serde, opt_mat_serde};
use crate::op_matrix::{OpMatrix, SparsityPattern};
use crate::par;
use crate::seq_engine::{Dynamics, Lagged, Triple};
use crate::shift_algebra::{Monomial, PartialSums, ShiftOp, INV_TOL};

/// Entries below this (relative to the largest entry) count as zero in
/// reported sparsity patterns.
pub const PATTERN_TOL: f64 = 1e-12;

/// Implicit law `K1 u = -K2 x`, equivalently `u = -K x` with `K = K1⁻¹ K2`.
///
/// `K1` is only produced when the factor has the two-term form
/// `L0 + L1 q`; it is lower triangular in the factor's column order, which
/// is not necessarily the original input order.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlLaw {
    #[serde(with = "opt_mat_serde")]
    pub K1: Option<DMatrix<f64>>,
    #[serde(with = "mat_serde")]
    pub K2: DMatrix<f64>,
    #[serde(with = "mat_serde")]
    pub K: DMatrix<f64>,
    pub pattern: LawPattern,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawPattern {
    pub K1: Option<Vec<Vec<u8>>>,
    pub K2: Vec<Vec<u8>>,
    pub K: Vec<Vec<u8>>,
}

/// Sparsity of a real matrix with the relative threshold [`PATTERN_TOL`].
pub fn real_pattern(a: &DMatrix<f64>) -> SparsityPattern {
    let scale = a.amax().max(1.0);
    SparsityPattern::from_real(a, PATTERN_TOL * scale)
}

impl ControlLaw {
    pub fn new(k1: Option<DMatrix<f64>>, k2: DMatrix<f64>, k: DMatrix<f64>) -> Self {
        let pattern = LawPattern {
            K1: k1.as_ref().map(|m| real_pattern(m).to_grid()),
            K2: real_pattern(&k2).to_grid(),
            K: real_pattern(&k).to_grid(),
        };
        Self {
            K1: k1,
            K2: k2,
            K: k,
            pattern,
        }
    }

    /// `u = -K x`.
    pub fn input(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        -(&self.K * x)
    }
}

fn check_system(l: &OpMatrix, n_rhs: usize) -> Result<()> {
    if l.rows() != l.cols() || !l.is_lower_triangular() {
        return Err(Error::PreconditionViolated(
            "factor must be square lower triangular".into(),
        ));
    }
    if n_rhs != l.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{} right-hand sides for a {}x{} factor",
            n_rhs,
            l.rows(),
            l.cols()
        )));
    }
    Ok(())
}

fn diag_inverses(l: &OpMatrix, inv_tol: f64) -> Result<Vec<PartialSums>> {
    (0..l.rows())
        .map(|k| l.get(k, k).inv_rinf_with(inv_tol)?.to_partial_sums())
        .collect()
}

fn lower_lagged(l: &OpMatrix, d: &Dynamics, w: &[Lagged], inv: &[PartialSums]) -> Vec<Lagged> {
    let mut v: Vec<Lagged> = Vec::with_capacity(w.len());
    for k in 0..w.len() {
        let mut acc = w[k].clone();
        for (i, vi) in v.iter().enumerate() {
            let lki = l.get(k, i);
            if !lki.is_zero() {
                acc = acc.sub(&vi.apply_shiftop(lki, d), d);
            }
        }
        v.push(acc.scale_pointwise(&inv[k], d));
    }
    v
}

fn upper_adjoint_lagged(l: &OpMatrix, d: &Dynamics, v: &[Lagged], inv: &[PartialSums]) -> Vec<Lagged> {
    let n = v.len();
    let mut y: Vec<Option<Lagged>> = vec![None; n];
    for k in (0..n).rev() {
        let mut acc = v[k].clone();
        for (i, yi) in y.iter().enumerate().skip(k + 1) {
            let lik = l.get(i, k);
            if !lik.is_zero() {
                let yi = yi.as_ref().expect("later entries solved first");
                acc = acc.sub(&yi.apply_shiftop(&lik.adjoint(), d), d);
            }
        }
        y[k] = Some(acc.scale_pointwise(&inv[k], d));
    }
    y.into_iter().map(|x| x.expect("all entries solved")).collect()
}

/// Forward substitution for `L v = w`.
pub fn solve_lower(l: &OpMatrix, w: &[Triple]) -> Result<Vec<Triple>> {
    solve_lower_with(l, w, INV_TOL)
}

pub fn solve_lower_with(l: &OpMatrix, w: &[Triple], inv_tol: f64) -> Result<Vec<Triple>> {
    check_system(l, w.len())?;
    if w.is_empty() {
        return Ok(Vec::new());
    }
    let inv = diag_inverses(l, inv_tol)?;
    let (d, w) = Dynamics::merge(w)?;
    Ok(lower_lagged(l, &d, &w, &inv).iter().map(|x| x.to_triple(&d)).collect())
}

/// Backward substitution for `L* y = v`, last entry first.
pub fn solve_upper_adjoint(l: &OpMatrix, v: &[Triple]) -> Result<Vec<Triple>> {
    solve_upper_adjoint_with(l, v, INV_TOL)
}

pub fn solve_upper_adjoint_with(l: &OpMatrix, v: &[Triple], inv_tol: f64) -> Result<Vec<Triple>> {
    check_system(l, v.len())?;
    if v.is_empty() {
        return Ok(Vec::new());
    }
    let inv = diag_inverses(l, inv_tol)?;
    let (d, v) = Dynamics::merge(v)?;
    Ok(upper_adjoint_lagged(l, &d, &v, &inv)
        .iter()
        .map(|x| x.to_triple(&d))
        .collect())
}

fn normal_lagged(f: &Factorisation, w: &[Triple], inv_tol: f64) -> Result<(Dynamics, Vec<Lagged>)> {
    check_system(&f.l, w.len())?;
    if f.p.len() != w.len() {
        return Err(Error::DimensionMismatch("permutation size".into()));
    }
    let inv = diag_inverses(&f.l, inv_tol)?;
    let (d, w) = Dynamics::merge(w)?;
    let w_perm = f.p.gather(&w);
    let v = lower_lagged(&f.l, &d, &w_perm, &inv);
    let z_perm = upper_adjoint_lagged(&f.l, &d, &v, &inv);
    Ok((d, f.p.scatter(&z_perm)))
}

/// Solves `M* M z = w` given `L Lᵀ = (M P)* (M P)`.
pub fn solve_normal(f: &Factorisation, w: &[Triple]) -> Result<Vec<Triple>> {
    solve_normal_with(f, w, INV_TOL)
}

pub fn solve_normal_with(f: &Factorisation, w: &[Triple], inv_tol: f64) -> Result<Vec<Triple>> {
    if w.is_empty() {
        return Ok(Vec::new());
    }
    let (d, z) = normal_lagged(f, w, inv_tol)?;
    Ok(z.iter().map(|x| x.to_triple(&d)).collect())
}

/// First sample of the solution of `M* M z = w`, one row per entry of `z`
/// and one column per basis column of the right-hand side.
pub fn solve_normal_first(f: &Factorisation, w: &[Triple], inv_tol: f64) -> Result<DMatrix<f64>> {
    if w.is_empty() {
        return Ok(DMatrix::zeros(0, 0));
    }
    let (d, z) = normal_lagged(f, w, inv_tol)?;
    let b = d.width();
    let mut out = DMatrix::zeros(z.len(), b);
    for (i, zi) in z.iter().enumerate() {
        out.row_mut(i).copy_from(&zi.sample(0, &d).row(0));
    }
    Ok(out)
}

/// Splits `L = L0 + L1 q` with `L1` strictly lower triangular.
pub fn two_term_parts(l: &OpMatrix) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if l.rows() != l.cols() || !l.is_lower_triangular() {
        return Err(Error::NotTwoTermShape("factor is not square lower triangular".into()));
    }
    let n = l.rows();
    let mut l0 = DMatrix::zeros(n, n);
    let mut l1 = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            for (m, c) in l.get(i, j).terms() {
                match m {
                    Monomial::IDENTITY => l0[(i, j)] = c,
                    Monomial { istar: 0, j: 1 } if i != j => l1[(i, j)] = c,
                    _ => {
                        return Err(Error::NotTwoTermShape(format!(
                            "entry ({i}, {j}) contains the monomial (q*)^{} q^{}",
                            m.istar, m.j
                        )))
                    }
                }
            }
        }
    }
    if (0..n).any(|i| l0[(i, i)].abs() <= INV_TOL) {
        return Err(Error::NotTwoTermShape("constant part is singular".into()));
    }
    Ok((l0, l1))
}

/// `K1 = (L0 + r L1) L0ᵀ`, returned alongside the given `K2`.
pub fn extract_sparse_law(l: &OpMatrix, r: f64, k2: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidDiscount(r));
    }
    if k2.nrows() != l.rows() {
        return Err(Error::DimensionMismatch(format!(
            "K2 has {} rows for a {}x{} factor",
            k2.nrows(),
            l.rows(),
            l.cols()
        )));
    }
    let (l0, l1) = two_term_parts(l)?;
    Ok(((&l0 + &l1 * r) * l0.transpose(), k2.clone()))
}

/// `K1⁻¹` by summing the terminating series `L0⁻ᵀ Σ_i (-r L0⁻¹ L1)^i L0⁻¹`.
pub fn neumann_inverse(l0: &DMatrix<f64>, l1: &DMatrix<f64>, r: f64) -> Result<DMatrix<f64>> {
    let n = l0.nrows();
    let l0_inv = l0.clone().try_inverse().ok_or(Error::Singular {
        value: 0.0,
        tol: INV_TOL,
    })?;
    let step = -(&l0_inv * l1) * r;
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::zeros(n, n);
    for _ in 0..n.max(1) {
        sum += &term;
        term = &step * term;
    }
    Ok(l0_inv.transpose() * sum * l0_inv)
}

/// Map from initial state to `z[0]`, one basis column at a time.
pub fn extract_dense_gain<F>(f: &Factorisation, w_builder: F, n_x: usize) -> Result<DMatrix<f64>>
where
    F: Fn(&DMatrix<f64>) -> Result<Vec<Triple>> + Sync + Send,
{
    extract_dense_gain_with(f, w_builder, n_x, INV_TOL)
}

pub fn extract_dense_gain_with<F>(f: &Factorisation, w_builder: F, n_x: usize, inv_tol: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DMatrix<f64>) -> Result<Vec<Triple>> + Sync + Send,
{
    let n = f.l.cols();
    let cols: Vec<usize> = (0..n_x).collect();
    let solved = par::map(&cols, |&j| {
        let mut e = DMatrix::zeros(n_x, 1);
        e[(j, 0)] = 1.0;
        let w = w_builder(&e)?;
        solve_normal_first(f, &w, inv_tol)
    });
    let mut k = DMatrix::zeros(n, n_x);
    for (j, col) in solved.into_iter().enumerate() {
        let col = col?;
        if col.nrows() != n {
            return Err(Error::DimensionMismatch(
                "builder returned the wrong number of sequences".into(),
            ));
        }
        k.column_mut(j).copy_from(&col.column(0));
    }
    Ok(k)
}

/// Applies an operator matrix to a vector of sequences.
pub fn apply_matrix(m: &OpMatrix, x: &[Triple]) -> Result<Vec<Triple>> {
    if m.cols() != x.len() {
        return Err(Error::DimensionMismatch("operator matrix and sequence count".into()));
    }
    let (p, b) = x
        .first()
        .map(|t| (t.outputs(), t.width()))
        .ok_or_else(|| Error::DimensionMismatch("no sequences".into()))?;
    let (d, xs) = Dynamics::merge(x)?;
    (0..m.rows())
        .map(|i| {
            let mut acc = Lagged::zero(p, &d);
            for (j, xj) in xs.iter().enumerate() {
                let mij: &ShiftOp = m.get(i, j);
                if !mij.is_zero() {
                    acc = acc.add(&xj.apply_shiftop(mij, &d), &d);
                }
            }
            let t = acc.to_triple(&d);
            debug_assert_eq!(t.width(), b);
            Ok(t)
        })
        .collect()
}
