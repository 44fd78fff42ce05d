//! Dense matrices whose entries are shift operators, together with index
//! permutations and boolean sparsity patterns.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::UndirectedGraph;
use crate::shift_algebra::ShiftOp;

/// Rectangular matrix of [`ShiftOp`] entries stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OpMatrixRepr", into = "OpMatrixRepr")]
pub struct OpMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<ShiftOp>,
}

#[derive(Serialize, Deserialize)]
struct OpMatrixRepr {
    rows: usize,
    cols: usize,
    entries: Vec<Vec<ShiftOp>>,
}

impl TryFrom<OpMatrixRepr> for OpMatrix {
    type Error = Error;

    fn try_from(r: OpMatrixRepr) -> Result<Self> {
        if r.entries.len() != r.rows || r.entries.iter().any(|row| row.len() != r.cols) {
            return Err(Error::DimensionMismatch(format!(
                "declared {}x{} but entries do not match",
                r.rows, r.cols
            )));
        }
        Ok(OpMatrix {
            rows: r.rows,
            cols: r.cols,
            entries: r.entries.into_iter().flatten().collect(),
        })
    }
}

impl From<OpMatrix> for OpMatrixRepr {
    fn from(m: OpMatrix) -> Self {
        let entries = if m.cols == 0 {
            vec![Vec::new(); m.rows]
        } else {
            m.entries.chunks(m.cols).map(|c| c.to_vec()).collect()
        };
        OpMatrixRepr {
            rows: m.rows,
            cols: m.cols,
            entries,
        }
    }
}

impl OpMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![ShiftOp::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, ShiftOp::identity());
        }
        m
    }

    /// Builds a matrix from row vectors, which must all have equal length.
    pub fn from_rows(rows: Vec<Vec<ShiftOp>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        OpMatrix::try_from(OpMatrixRepr {
            rows: n,
            cols: m,
            entries: rows,
        })
    }

    /// Embeds a real matrix as constant operators.
    pub fn from_real(a: &DMatrix<f64>) -> Self {
        let mut m = Self::zeros(a.nrows(), a.ncols());
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                m.set(i, j, ShiftOp::constant(a[(i, j)]));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &ShiftOp {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: ShiftOp) {
        self.entries[i * self.cols + j] = x;
    }

    pub fn row(&self, i: usize) -> &[ShiftOp] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    /// True when every entry of row `i` other than column `skip` is zero.
    pub fn row_is_zero_except(&self, i: usize, skip: usize) -> bool {
        self.row(i).iter().enumerate().all(|(j, x)| j == skip || x.is_zero())
    }

    /// Row indices of the non-zero entries in column `j`.
    pub fn nonzero_rows(&self, j: usize) -> Vec<usize> {
        (0..self.rows).filter(|&i| !self.get(i, j).is_zero()).collect()
    }

    pub fn matmul(&self, other: &OpMatrix) -> Result<OpMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = OpMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = ShiftOp::zero();
                for k in 0..self.cols {
                    let (a, b) = (self.get(i, k), other.get(k, j));
                    if !a.is_zero() && !b.is_zero() {
                        acc = acc + a * b;
                    }
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> OpMatrix {
        let mut out = OpMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).adjoint());
            }
        }
        out
    }

    /// `M* M`.
    pub fn gram(&self) -> OpMatrix {
        self.adjoint().matmul(self).expect("adjoint dimensions always agree")
    }

    pub fn add(&self, other: &OpMatrix) -> Result<OpMatrix> {
        self.same_shape(other)?;
        Ok(OpMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &OpMatrix) -> Result<OpMatrix> {
        self.same_shape(other)?;
        Ok(OpMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect(),
        })
    }

    fn same_shape(&self, other: &OpMatrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    /// Column `j` of the result is column `p.image()[j]` of `self`.
    pub fn permute_cols(&self, p: &Permutation) -> Result<OpMatrix> {
        if p.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "permutation of size {} applied to {} columns",
                p.len(),
                self.cols
            )));
        }
        let mut out = OpMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, &src) in p.image().iter().enumerate() {
                out.set(i, j, self.get(i, src).clone());
            }
        }
        Ok(out)
    }

    /// Row `i` of the result is row `p.image()[i]` of `self`.
    pub fn permute_rows(&self, p: &Permutation) -> Result<OpMatrix> {
        if p.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "permutation of size {} applied to {} rows",
                p.len(),
                self.rows
            )));
        }
        let mut out = OpMatrix::zeros(self.rows, self.cols);
        for (i, &src) in p.image().iter().enumerate() {
            for j in 0..self.cols {
                out.set(i, j, self.get(src, j).clone());
            }
        }
        Ok(out)
    }

    /// Keeps the listed rows and columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> OpMatrix {
        let mut out = OpMatrix::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                out.set(a, b, self.get(i, j).clone());
            }
        }
        out
    }

    /// Replaces every entry by the sum of its coefficients (`q ↦ 1`).
    pub fn coefficient_sum(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).coefficient_sum())
    }

    pub fn sparsity(&self) -> SparsityPattern {
        SparsityPattern {
            rows: self.rows,
            cols: self.cols,
            flags: self.entries.iter().map(|x| !x.is_zero()).collect(),
        }
    }

    /// Largest coefficientwise difference over all entries.
    pub fn max_abs_diff(&self, other: &OpMatrix) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max))
    }

    /// Largest coefficient magnitude over all entries.
    pub fn max_abs_coeff(&self) -> f64 {
        self.entries
            .iter()
            .flat_map(|x| x.terms().map(|(_, c)| c.abs()))
            .fold(0.0, f64::max)
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.rows == self.cols && self.max_abs_diff(&self.adjoint()).is_ok_and(|d| d <= tol)
    }

    pub fn is_lower_triangular(&self) -> bool {
        (0..self.rows).all(|i| ((i + 1)..self.cols).all(|j| self.get(i, j).is_zero()))
    }

    pub fn max_degree(&self) -> usize {
        self.entries.iter().map(ShiftOp::max_degree).max().unwrap_or(0)
    }

    /// Membership in the graph-structured set: rows are vertices, columns
    /// are edges, non-zeros sit on incident pairs and every entry is a
    /// shifted `R_inf` scalar (all monomials share one offset `j - istar`).
    pub fn is_in_mg(&self, g: &UndirectedGraph) -> Result<bool> {
        if self.rows != g.n_vertices() || self.cols != g.edges().len() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix against a graph with {} vertices and {} edges",
                self.rows,
                self.cols,
                g.n_vertices(),
                g.edges().len()
            )));
        }
        for i in 0..self.rows {
            for (j, &(u, v)) in g.edges().iter().enumerate() {
                let x = self.get(i, j);
                if x.is_zero() {
                    continue;
                }
                if i != u && i != v {
                    return Ok(false);
                }
                let mut offsets = x.terms().map(|(m, _)| m.j as i64 - m.istar as i64);
                let first = offsets.next().expect("non-zero entry has a term");
                if offsets.any(|o| o != first) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Block matrix of per-entry truncations, each `size × size`.
    pub fn to_truncation(&self, size: usize) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.rows * size, self.cols * size);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let x = self.get(i, j);
                if x.is_zero() {
                    continue;
                }
                let block = x.to_truncation(size)?;
                out.view_mut((i * size, j * size), (size, size)).copy_from(&block);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for OpMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let cells: Vec<String> = self.row(i).iter().map(ToString::to_string).collect();
            writeln!(f, "[{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

/// Bijection on `0..n`, stored as its image list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    image: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(image: Vec<usize>) -> Result<Self> {
        Permutation::new(image)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.image
    }
}

impl Permutation {
    pub fn new(image: Vec<usize>) -> Result<Self> {
        let n = image.len();
        let mut seen = vec![false; n];
        for &i in &image {
            if i >= n || seen[i] {
                return Err(Error::InvalidPermutation(format!("{image:?}")));
            }
            seen[i] = true;
        }
        Ok(Self { image })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            image: (0..n).collect(),
        }
    }

    /// Transposition of `a` and `b`.
    pub fn swap(n: usize, a: usize, b: usize) -> Self {
        let mut p = Self::identity(n);
        p.image.swap(a, b);
        p
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.image.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// `self ∘ other`, so that permuting by the result equals permuting by
    /// `self` and then by `other`.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch(format!(
                "composing permutations of sizes {} and {}",
                self.len(),
                other.len()
            )));
        }
        Ok(Permutation {
            image: other.image.iter().map(|&j| self.image[j]).collect(),
        })
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.len()];
        for (i, &j) in self.image.iter().enumerate() {
            inv[j] = i;
        }
        Permutation { image: inv }
    }

    /// `blockdiag(1, self)`.
    pub fn shifted(&self) -> Permutation {
        Permutation {
            image: std::iter::once(0).chain(self.image.iter().map(|&j| j + 1)).collect(),
        }
    }

    /// Permutation matrix with `P[image[j], j] = 1`, so `M·P` permutes columns.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for (j, &i) in self.image.iter().enumerate() {
            m[(i, j)] = 1.0;
        }
        m
    }

    /// Entry `j` of the result is `items[image[j]]`.
    pub fn gather<T: Clone>(&self, items: &[T]) -> Vec<T> {
        self.image.iter().map(|&i| items[i].clone()).collect()
    }

    /// Inverse of [`Permutation::gather`].
    pub fn scatter<T: Clone>(&self, items: &[T]) -> Vec<T> {
        self.inverse().gather(items)
    }
}

/// One flag per entry, true where the entry is non-zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsityPattern {
    rows: usize,
    cols: usize,
    flags: Vec<bool>,
}

impl SparsityPattern {
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut flags = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                flags.push(f(i, j));
            }
        }
        Self { rows, cols, flags }
    }

    /// Pattern of a real matrix, treating `|x| <= tol` as zero.
    pub fn from_real(a: &DMatrix<f64>, tol: f64) -> Self {
        Self::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].abs() > tol)
    }

    /// Parses rows of `★`/`*`/`1` (non-zero) and `0`, ignoring whitespace.
    pub fn parse(text: &str) -> Result<Self> {
        let rows: Vec<Vec<bool>> = text
            .lines()
            .map(|l| {
                l.chars()
                    .filter(|c| !c.is_whitespace())
                    .map(|c| c != '0')
                    .collect::<Vec<_>>()
            })
            .filter(|r| !r.is_empty())
            .collect();
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged pattern".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            flags: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.flags[i * self.cols + j]
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    /// True iff `other` has no non-zero where `self` has a zero.
    pub fn dominates(&self, other: &SparsityPattern) -> Result<bool> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "patterns {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(self.flags.iter().zip(&other.flags).all(|(a, b)| *a || !*b))
    }

    /// Same pattern with rows and columns reordered: entry `(i, j)` of the
    /// result is entry `(rows[i], cols[j])` of `self`.
    pub fn reorder(&self, rows: &Permutation, cols: &Permutation) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self.get(rows.image()[i], cols.image()[j]))
    }

    /// Rows of `★` and `0` separated by spaces.
    pub fn render(&self) -> String {
        self.render_with("★", "0", " ")
    }

    /// Rows of `1` and `0` separated by commas.
    pub fn render_csv(&self) -> String {
        self.render_with("1", "0", ",")
    }

    fn render_with(&self, on: &str, off: &str, sep: &str) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            let cells: Vec<&str> = (0..self.cols).map(|j| if self.get(i, j) { on } else { off }).collect();
            out.push_str(&cells.join(sep));
            out.push('\n');
        }
        out
    }

    /// Nested 0/1 rows, as used in JSON reports.
    pub fn to_grid(&self) -> Vec<Vec<u8>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| u8::from(self.get(i, j))).collect())
            .collect()
    }
}
