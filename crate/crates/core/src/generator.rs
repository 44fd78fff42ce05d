//! Building graph-structured operator matrices from a per-entry description:
//! entry `(vertex, edge)` is `alpha · q^k` or `alpha · (q*)^k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::UndirectedGraph;
use crate::op_matrix::OpMatrix;
use crate::shift_algebra::ShiftOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shift {
    #[serde(rename = "q")]
    Forward,
    #[serde(rename = "qstar")]
    Backward,
}

/// Scalar weight: a plain number or an `R_inf` operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Alpha {
    Number(f64),
    Op(ShiftOp),
}

impl Alpha {
    pub fn to_op(&self) -> ShiftOp {
        match self {
            Alpha::Number(c) => ShiftOp::constant(*c),
            Alpha::Op(x) => x.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub vertex: usize,
    pub edge: usize,
    pub alpha: Alpha,
    #[serde(default)]
    pub k: u32,
    pub shift: Shift,
}

impl Entry {
    pub fn op(&self) -> Result<ShiftOp> {
        let alpha = self.alpha.to_op();
        if !alpha.is_rinf() {
            return Err(Error::Schema(format!(
                "alpha of entry ({}, {}) is not a pointwise scaling",
                self.vertex, self.edge
            )));
        }
        let shift = match self.shift {
            Shift::Forward => ShiftOp::monomial(0, self.k, 1.0),
            Shift::Backward => ShiftOp::monomial(self.k, 0, 1.0),
        };
        Ok(&alpha * &shift)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub graph: UndirectedGraph,
    pub entries: Vec<Entry>,
}

impl GeneratorSpec {
    /// Rows are vertices and columns are edges. Every entry must sit on an
    /// endpoint of its edge; positions without an entry stay zero.
    pub fn build(&self) -> Result<OpMatrix> {
        let g = &self.graph;
        let mut m = OpMatrix::zeros(g.n_vertices(), g.edges().len());
        for e in &self.entries {
            let &(u, v) = g
                .edges()
                .get(e.edge)
                .ok_or_else(|| Error::InvalidGraph(format!("edge {} out of range", e.edge)))?;
            if e.vertex != u && e.vertex != v {
                return Err(Error::InvalidGraph(format!(
                    "vertex {} is not an endpoint of edge {}",
                    e.vertex, e.edge
                )));
            }
            m.set(e.vertex, e.edge, e.op()?);
        }
        Ok(m)
    }
}
