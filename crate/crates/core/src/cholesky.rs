//! Leaf-first Cholesky factorisation `L L* = (MP)* MP` for operator
//! matrices whose sparsity follows a forest, with fill-in and uniqueness
//! checks.

use itertools::Itertools;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::op_matrix::{OpMatrix, Permutation, SparsityPattern};
use crate::par;
use crate::shift_algebra::{ShiftOp, Tolerances};

/// Residual allowed by the final self-check, relative to the Gram scale.
pub const VERIFY_TOL: f64 = 1e-9;
/// Column limit for [`enumerate_permutation_cholesky`].
pub const ENUMERATION_LIMIT: usize = 6;
/// Threshold for zero entries of real Cholesky factors.
pub const REAL_ZERO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checks {
    pub identity_resid: f64,
    pub fill_in_free: bool,
}

/// Lower triangular `L` and column permutation `P` with `L L* = (MP)* MP`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factorisation {
    #[serde(rename = "L")]
    pub l: OpMatrix,
    #[serde(rename = "P")]
    pub p: Permutation,
    pub checks: Checks,
}

/// One elimination step: the pivot block, the coupling column and the
/// reduced matrix handed to the next step.
#[derive(Debug, Clone, PartialEq)]
pub struct SchurStep {
    pub n11: ShiftOp,
    /// Column vector of length `cols - 1`.
    pub n21: Vec<ShiftOp>,
    pub m_red: OpMatrix,
}

/// Record of one level of the recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub leaf_perm: Permutation,
    pub row_perm: Permutation,
    pub step: SchurStep,
}

struct ColumnRoles {
    leaves: Vec<usize>,
    shared: Option<usize>,
}

fn column_roles(m: &OpMatrix, col: usize) -> Result<Option<ColumnRoles>> {
    let rows = m.nonzero_rows(col);
    if rows.len() > 2 {
        return Err(Error::MalformedColumn { col, count: rows.len() });
    }
    let (leaves, shared): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&r| m.row_is_zero_except(r, col));
    if shared.len() > 1 {
        return Ok(None);
    }
    Ok(Some(ColumnRoles {
        leaves,
        shared: shared.first().copied(),
    }))
}

/// Swaps column 0 with the first column that is a leaf edge.
pub fn leaf_edge_first_permutation(m: &OpMatrix) -> Result<Permutation> {
    for c in 0..m.cols() {
        column_roles(m, c)?;
    }
    for c in 0..m.cols() {
        if column_roles(m, c)?.is_some() {
            return Ok(Permutation::swap(m.cols(), 0, c));
        }
    }
    Err(Error::NoLeafEdge)
}

/// Row order placing the leaf endpoint(s) of column 0 first, then the
/// shared endpoint, then every other row in its original order.
pub fn vertices_first_permutation(m: &OpMatrix) -> Result<Permutation> {
    let count = m.nonzero_rows(0).len();
    if !(1..=2).contains(&count) {
        return Err(Error::MalformedColumn { col: 0, count });
    }
    let roles = column_roles(m, 0)?.ok_or(Error::NoLeafEdge)?;
    let mut order = roles.leaves.clone();
    order.extend(roles.shared);
    let rest: Vec<usize> = (0..m.rows()).filter(|r| !order.contains(r)).collect();
    order.extend(rest);
    Permutation::new(order)
}

/// Eliminates column 0, which must be a leaf edge.
pub fn schur_reduce(m: &OpMatrix) -> Result<SchurStep> {
    schur_reduce_with(m, &Tolerances::default())
}

pub fn schur_reduce_with(m: &OpMatrix, tol: &Tolerances) -> Result<SchurStep> {
    if m.cols() == 0 {
        return Err(Error::DimensionMismatch("no column to eliminate".into()));
    }
    let roles = column_roles(m, 0)?.ok_or(Error::NoLeafEdge)?;
    let pivot_rows = roles.leaves.iter().chain(roles.shared.iter());
    let mut n11 = ShiftOp::zero_with_tol(tol.zero_tol);
    for &r in pivot_rows {
        let a = m.get(r, 0);
        n11 = n11 + a.adjoint() * a;
    }
    let rest: Vec<usize> = (1..m.cols()).collect();
    let kept: Vec<usize> = (0..m.rows()).filter(|r| !roles.leaves.contains(r)).collect();
    let mut m_red = m.select(&kept, &rest);
    let mut n21 = vec![ShiftOp::zero_with_tol(tol.zero_tol); rest.len()];
    if let Some(s) = roles.shared {
        let a = m.get(s, 0);
        for (k, &j) in rest.iter().enumerate() {
            n21[k] = m.get(s, j).adjoint() * a;
        }
        let n11_pinv = n11.pinv_rinf()?;
        let defect = ShiftOp::identity().with_zero_tol(tol.zero_tol) - a * &n11_pinv * a.adjoint();
        let scale = defect.sqrt_rinf_with(tol.psd_tol)?;
        let row = kept.iter().position(|&r| r == s).expect("shared row is kept");
        for k in 0..rest.len() {
            let x = &scale * m_red.get(row, k);
            m_red.set(row, k, x);
        }
    }
    Ok(SchurStep { n11, n21, m_red })
}

/// Factorises `(MP)* MP` for a forest-structured `M`, verifying the result.
pub fn cholesky_tree(m: &OpMatrix) -> Result<Factorisation> {
    cholesky_tree_with(m, &Tolerances::default())
}

pub fn cholesky_tree_with(m: &OpMatrix, tol: &Tolerances) -> Result<Factorisation> {
    let (f, _) = cholesky_trace_with(m, tol)?;
    Ok(f)
}

/// Like [`cholesky_tree`], also returning every elimination step.
pub fn cholesky_trace(m: &OpMatrix) -> Result<(Factorisation, Vec<TraceStep>)> {
    cholesky_trace_with(m, &Tolerances::default())
}

pub fn cholesky_trace_with(m: &OpMatrix, tol: &Tolerances) -> Result<(Factorisation, Vec<TraceStep>)> {
    let mut input = m.clone();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            input.set(i, j, m.get(i, j).clone().with_zero_tol(tol.zero_tol));
        }
    }
    let mut trace = Vec::new();
    let (l, p) = factor(&input, tol, &mut trace)?;
    let checks = verify(&input, &l, &p)?;
    let scale = input.permute_cols(&p)?.gram().max_abs_coeff().max(1.0);
    if checks.identity_resid > VERIFY_TOL * scale {
        return Err(Error::VerificationFailed(format!(
            "identity residual {:.3e}",
            checks.identity_resid
        )));
    }
    if !checks.fill_in_free {
        return Err(Error::VerificationFailed("factor has fill-in".into()));
    }
    Ok((Factorisation { l, p, checks }, trace))
}

fn factor(m: &OpMatrix, tol: &Tolerances, trace: &mut Vec<TraceStep>) -> Result<(OpMatrix, Permutation)> {
    let n = m.cols();
    if n == 0 {
        return Ok((OpMatrix::zeros(0, 0), Permutation::identity(0)));
    }
    let leaf_perm = leaf_edge_first_permutation(m)?;
    let m1 = m.permute_cols(&leaf_perm)?;
    let row_perm = if m1.nonzero_rows(0).is_empty() {
        Permutation::identity(m1.rows())
    } else {
        vertices_first_permutation(&m1)?
    };
    let step = schur_reduce_with(&m1.permute_rows(&row_perm)?, tol)?;
    trace.push(TraceStep {
        leaf_perm: leaf_perm.clone(),
        row_perm,
        step: step.clone(),
    });
    let (l_red, p_red) = factor(&step.m_red, tol, trace)?;

    let root = step.n11.sqrt_rinf_with(tol.psd_tol)?;
    let root_pinv = root.pinv_rinf()?;
    let coupling = p_red.gather(&step.n21);
    let mut l = OpMatrix::zeros(n, n);
    l.set(0, 0, root);
    for i in 1..n {
        l.set(i, 0, &coupling[i - 1] * &root_pinv);
        for j in 1..=i {
            l.set(i, j, l_red.get(i - 1, j - 1).clone());
        }
    }
    let p = leaf_perm.compose(&p_red.shifted())?;
    Ok((l, p))
}

fn verify(m: &OpMatrix, l: &OpMatrix, p: &Permutation) -> Result<Checks> {
    let gram = m.permute_cols(p)?.gram();
    let llt = l.matmul(&l.adjoint())?;
    Ok(Checks {
        identity_resid: llt.max_abs_diff(&gram)?,
        fill_in_free: gram.sparsity().dominates(&l.sparsity())?,
    })
}

/// Whether every diagonal entry of `L` has an `R_inf` inverse.
pub fn diag_invertible(f: &Factorisation) -> bool {
    diag_invertible_with(f, Tolerances::default().inv_tol)
}

pub fn diag_invertible_with(f: &Factorisation, inv_tol: f64) -> bool {
    (0..f.l.rows()).all(|i| f.l.get(i, i).is_invertible_rinf(inv_tol))
}

/// Checks `L2 = L1 diag(L1)^-1 diag(L2)` for two lower triangular factors
/// of the same Gram.
pub fn relate_triangular_factors(l1: &OpMatrix, l2: &OpMatrix) -> Result<bool> {
    let tol = Tolerances::default();
    let n = l1.rows();
    if l1.cols() != n || l2.rows() != n || l2.cols() != n {
        return Err(Error::DimensionMismatch(
            "factors must be square and equal in size".into(),
        ));
    }
    if !l1.is_lower_triangular() || !l2.is_lower_triangular() {
        return Err(Error::PreconditionViolated("factors must be lower triangular".into()));
    }
    for (name, l) in [("L1", l1), ("L2", l2)] {
        for i in 0..n {
            if !l.get(i, i).is_invertible_rinf(tol.inv_tol) {
                return Err(Error::PreconditionViolated(format!(
                    "diagonal entry {i} of {name} is not an invertible R_inf element"
                )));
            }
        }
    }
    let g1 = l1.matmul(&l1.adjoint())?;
    let g2 = l2.matmul(&l2.adjoint())?;
    let gap = g1.max_abs_diff(&g2)?;
    if gap > VERIFY_TOL {
        return Err(Error::PreconditionViolated(format!(
            "Gram matrices differ by {gap:.3e}"
        )));
    }
    let mut d = OpMatrix::zeros(n, n);
    for i in 0..n {
        d.set(i, i, l1.get(i, i).inv_rinf_with(tol.inv_tol)? * l2.get(i, i));
    }
    Ok(l1.matmul(&d)?.max_abs_diff(l2)? <= VERIFY_TOL)
}

/// Outcome for one column ordering in [`enumerate_permutation_cholesky`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub perm: Permutation,
    /// Real Cholesky factor of the limit Gram has no fill-in.
    pub compatible: bool,
    /// For compatible orderings: the operator factor's extra permutation
    /// (identity when the ordering itself is leaf-first).
    pub factor_perm: Option<Permutation>,
    /// For compatible orderings: per diagonal entry, the largest
    /// `|coefficient|` among the `(q*)^k q^k` terms with `k >= 1`.
    pub diag_qstarq: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationReport {
    pub total: usize,
    pub compatible: usize,
    pub orderings: Vec<OrderingReport>,
}

/// Largest `|c|` over the non-identity diagonal monomials of `x`.
pub fn max_projection_coeff(x: &ShiftOp) -> f64 {
    x.terms()
        .filter(|(m, _)| m.is_diagonal() && m.j >= 1)
        .map(|(_, c)| c.abs())
        .fold(0.0, f64::max)
}

/// Tries every column ordering of `M`, comparing the real Cholesky factor
/// of the limit Gram against the operator Gram pattern.
pub fn enumerate_permutation_cholesky(m: &OpMatrix) -> Result<EnumerationReport> {
    let n = m.cols();
    if n > ENUMERATION_LIMIT {
        return Err(Error::TooLarge(format!(
            "{n} columns exceeds the enumeration limit of {ENUMERATION_LIMIT}"
        )));
    }
    let perms: Vec<Permutation> = (0..n)
        .permutations(n)
        .map(|p| Permutation::new(p).expect("itertools yields permutations"))
        .collect();
    let orderings = par::map(&perms, |p| ordering_report(m, p))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(EnumerationReport {
        total: orderings.len(),
        compatible: orderings.iter().filter(|o| o.compatible).count(),
        orderings,
    })
}

fn ordering_report(m: &OpMatrix, p: &Permutation) -> Result<OrderingReport> {
    let mp = m.permute_cols(p)?;
    let gram = mp.gram();
    let limit = gram.coefficient_sum();
    let chol = real_cholesky(&limit)?;
    let compatible = gram
        .sparsity()
        .dominates(&SparsityPattern::from_real(&chol, REAL_ZERO_TOL))?;
    if !compatible {
        return Ok(OrderingReport {
            perm: p.clone(),
            compatible,
            factor_perm: None,
            diag_qstarq: None,
        });
    }
    let f = cholesky_tree(&mp)?;
    let diag = (0..f.l.rows()).map(|i| max_projection_coeff(f.l.get(i, i))).collect();
    Ok(OrderingReport {
        perm: p.clone(),
        compatible,
        factor_perm: Some(f.p),
        diag_qstarq: Some(diag),
    })
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn real_cholesky(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    nalgebra::Cholesky::new(a.clone())
        .map(|c| c.l())
        .ok_or(Error::Indefinite)
}

/// Factorises many matrices, in parallel when the feature is enabled.
pub fn factor_batch(ms: &[OpMatrix]) -> Vec<Result<Factorisation>> {
    par::map(ms, cholesky_tree)
}

/// Sequential counterpart of [`factor_batch`].
pub fn factor_batch_seq(ms: &[OpMatrix]) -> Vec<Result<Factorisation>> {
    par::map_seq(ms, cholesky_tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::build_cycle_matrix;

    fn qs(c: f64) -> ShiftOp {
        ShiftOp::monomial(1, 0, c)
    }

    fn k(c: f64) -> ShiftOp {
        ShiftOp::constant(c)
    }

    fn z() -> ShiftOp {
        ShiftOp::zero()
    }

    fn path_matrix() -> OpMatrix {
        OpMatrix::from_rows(vec![
            vec![qs(1.0), z(), z()],
            vec![k(-1.0), qs(1.0), z()],
            vec![z(), k(-1.0), qs(1.0)],
            vec![z(), z(), k(-1.0)],
        ])
        .unwrap()
    }

    #[test]
    fn leaf_edge_scan() {
        assert!(leaf_edge_first_permutation(&path_matrix()).unwrap().is_identity());
        let rev = path_matrix()
            .permute_cols(&Permutation::new(vec![2, 1, 0]).unwrap())
            .unwrap();
        // Column 0 of the reversed matrix is the last path edge, which is
        // itself a leaf edge.
        assert!(leaf_edge_first_permutation(&rev).unwrap().is_identity());
        let middle_first = path_matrix()
            .permute_cols(&Permutation::new(vec![1, 0, 2]).unwrap())
            .unwrap();
        assert_eq!(
            leaf_edge_first_permutation(&middle_first).unwrap(),
            Permutation::swap(3, 0, 1)
        );
        assert_eq!(
            leaf_edge_first_permutation(&build_cycle_matrix(4).unwrap()),
            Err(Error::NoLeafEdge)
        );
    }

    #[test]
    fn leaf_found_later() {
        // Path 0-1-2-3-4 with the two internal edges listed first.
        let m = OpMatrix::from_rows(vec![
            vec![z(), z(), qs(1.0), z()],
            vec![k(-1.0), z(), k(-1.0), z()],
            vec![qs(1.0), k(-1.0), z(), z()],
            vec![z(), qs(1.0), z(), k(-1.0)],
            vec![z(), z(), z(), qs(1.0)],
        ])
        .unwrap();
        assert_eq!(leaf_edge_first_permutation(&m).unwrap(), Permutation::swap(4, 0, 2));
        let f = cholesky_tree(&m).unwrap();
        assert_eq!(f.p.image()[0], 2);
    }

    #[test]
    fn vertex_ordering() {
        assert!(vertices_first_permutation(&path_matrix()).unwrap().is_identity());
        let swap = Permutation::swap(4, 0, 1);
        let swapped = path_matrix().permute_rows(&swap).unwrap();
        assert_eq!(vertices_first_permutation(&swapped).unwrap(), swap);
        let single = OpMatrix::from_rows(vec![vec![qs(1.0)], vec![k(-1.0)]]).unwrap();
        assert!(vertices_first_permutation(&single).unwrap().is_identity());
        let zero_col = OpMatrix::zeros(2, 1);
        assert!(matches!(
            vertices_first_permutation(&zero_col),
            Err(Error::MalformedColumn { col: 0, count: 0 })
        ));
        let three = OpMatrix::from_rows(vec![vec![k(1.0)], vec![k(1.0)], vec![k(1.0)]]).unwrap();
        assert!(matches!(
            leaf_edge_first_permutation(&three),
            Err(Error::MalformedColumn { col: 0, count: 3 })
        ));
    }

    #[test]
    fn worked_recursion() {
        let s = 2f64.sqrt();
        let step1 = schur_reduce(&path_matrix()).unwrap();
        assert_eq!(step1.n11, k(2.0));
        let expected1 =
            OpMatrix::from_rows(vec![vec![qs(1.0 / s), z()], vec![k(-1.0), qs(1.0)], vec![z(), k(-1.0)]]).unwrap();
        assert!(step1.m_red.max_abs_diff(&expected1).unwrap() < 1e-15);
        let step2 = schur_reduce(&step1.m_red).unwrap();
        let expected2 = OpMatrix::from_rows(vec![vec![qs(1.0 / 3f64.sqrt())], vec![k(-1.0)]]).unwrap();
        assert!(step2.m_red.max_abs_diff(&expected2).unwrap() < 1e-15);
        let base = cholesky_tree(&step2.m_red).unwrap();
        assert!(base.l.get(0, 0).approx_eq(&k(2.0 / 3f64.sqrt()), 1e-15));
    }

    #[test]
    fn path_factor() {
        let f = cholesky_tree(&path_matrix()).unwrap();
        assert!(f.p.is_identity());
        let s = 2f64.sqrt();
        let r3 = 3f64.sqrt();
        let q = |c| ShiftOp::monomial(0, 1, c);
        let expected = OpMatrix::from_rows(vec![
            vec![k(s), z(), z()],
            vec![q(-1.0 / s), k(r3 / s), z()],
            vec![z(), q(-s / r3), k(2.0 / r3)],
        ])
        .unwrap();
        assert!(f.l.max_abs_diff(&expected).unwrap() < 1e-14);
        assert!(f.checks.fill_in_free);
        assert!(f.checks.identity_resid < 1e-14);
        assert!(diag_invertible(&f));
    }

    #[test]
    fn single_edge() {
        let m = OpMatrix::from_rows(vec![vec![qs(1.0)], vec![k(-1.0)]]).unwrap();
        let step = schur_reduce(&m).unwrap();
        assert_eq!(step.n11, k(2.0));
        assert_eq!((step.m_red.rows(), step.m_red.cols()), (0, 0));
    }

    #[test]
    fn cycles_have_no_leaf() {
        for n in 3..=8 {
            assert_eq!(cholesky_tree(&build_cycle_matrix(n).unwrap()), Err(Error::NoLeafEdge));
        }
    }

    #[test]
    fn rank_deficient_diagonal() {
        // The projection q*q has a non-trivial kernel, so the Gram is singular.
        let m = OpMatrix::from_rows(vec![vec![ShiftOp::monomial(1, 1, 1.0), z()], vec![z(), k(1.0)]]).unwrap();
        let f = cholesky_tree(&m).unwrap();
        assert!(!diag_invertible(&f));
        let empty = cholesky_tree(&OpMatrix::zeros(0, 0)).unwrap();
        assert!(diag_invertible(&empty));
    }

    #[test]
    fn forests_and_zero_columns() {
        // Two disjoint edges plus an empty column.
        let m = OpMatrix::from_rows(vec![
            vec![k(-1.0), z(), z()],
            vec![qs(0.5), z(), z()],
            vec![z(), z(), k(2.0)],
            vec![z(), z(), qs(1.0)],
        ])
        .unwrap();
        let f = cholesky_tree(&m).unwrap();
        assert!(f.checks.fill_in_free);
        assert!(!diag_invertible(&f));
    }

    #[test]
    fn triangular_relation() {
        let l1 = cholesky_tree(&path_matrix()).unwrap().l;
        assert!(relate_triangular_factors(&l1, &l1).unwrap());
        let flip = OpMatrix::from_rows(vec![
            vec![k(1.0), z(), z()],
            vec![z(), k(-1.0), z()],
            vec![z(), z(), k(1.0)],
        ])
        .unwrap();
        let l2 = l1.matmul(&flip).unwrap();
        assert!(relate_triangular_factors(&l1, &l2).unwrap());
        let mut bad = l1.clone();
        bad.set(1, 0, bad.get(1, 0) + &k(0.1));
        assert!(matches!(
            relate_triangular_factors(&l1, &bad),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn enumeration_of_diagonal_matrix() {
        let report = enumerate_permutation_cholesky(&OpMatrix::identity(3)).unwrap();
        assert_eq!((report.total, report.compatible), (6, 6));
        for o in &report.orderings {
            assert!(o.diag_qstarq.as_ref().unwrap().iter().all(|&c| c == 0.0));
        }
        assert!(matches!(
            enumerate_permutation_cholesky(&OpMatrix::identity(7)),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn json_shape() {
        let f = cholesky_tree(&path_matrix()).unwrap();
        let v = serde_json::to_value(&f).unwrap();
        assert!(v.get("L").is_some());
        assert_eq!(v["P"], serde_json::json!([0, 1, 2]));
        assert_eq!(v["checks"]["fill_in_free"], serde_json::json!(true));
    }

    #[test]
    fn batch_variants_agree() {
        let ms = vec![path_matrix(), build_cycle_matrix(3).unwrap()];
        assert_eq!(factor_batch(&ms), factor_batch_seq(&ms));
    }
}
