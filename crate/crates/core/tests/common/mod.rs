#![allow(dead_code)]

use nalgebra::DMatrix;
use shiftfact::graphs::DirectedGraph;
use shiftfact::{Network, OpMatrix, ShiftOp, Triple};

pub const R: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn net(n: usize, arcs: &[(usize, usize)], r: f64) -> Network {
    Network::new(DirectedGraph::new(n, arcs.to_vec()).unwrap(), r).unwrap()
}

/// Two branches joining before the sink.
pub fn branching_tree(r: f64) -> Network {
    net(5, &[(2, 0), (3, 1), (3, 2), (4, 3)], r)
}

/// Two sources feeding a hub that also pushes upstream.
pub fn hub_tree(r: f64) -> Network {
    net(5, &[(2, 0), (1, 3), (2, 3), (4, 3)], r)
}

/// Line with alternating link directions.
pub fn alternating_line(r: f64) -> Network {
    net(5, &[(0, 1), (1, 2), (3, 2), (4, 3)], r)
}

/// 21 facilities with every branch leaving vertex 20. Arcs are numbered so
/// that each branch's arcs precede the arc joining it to the root.
pub fn large_tree(r: f64) -> Network {
    let one_based = [
        (4, 1),
        (4, 2),
        (4, 3),
        (5, 4),
        (21, 5),
        (21, 6),
        (6, 7),
        (6, 8),
        (8, 9),
        (21, 10),
        (10, 11),
        (11, 12),
        (11, 13),
        (15, 16),
        (15, 17),
        (15, 18),
        (14, 15),
        (19, 20),
        (14, 19),
        (21, 14),
    ];
    let arcs: Vec<(usize, usize)> = one_based.iter().map(|&(a, b)| (a - 1, b - 1)).collect();
    net(21, &arcs, r)
}

pub fn max_sample_diff(a: &[Triple], b: &[Triple], n: usize) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.samples(n).into_iter().zip(y.samples(n)).map(|(p, q)| (p - q).amax()))
        .fold(0.0, f64::max)
}

pub fn k(c: f64) -> ShiftOp {
    ShiftOp::constant(c)
}

pub fn qs(c: f64) -> ShiftOp {
    ShiftOp::monomial(1, 0, c)
}

pub fn q(c: f64) -> ShiftOp {
    ShiftOp::monomial(0, 1, c)
}

pub fn z() -> ShiftOp {
    ShiftOp::zero()
}

/// `q*` above `-1` down the columns of a path with `n` edges.
pub fn path_matrix(n: usize) -> OpMatrix {
    let mut m = OpMatrix::zeros(n + 1, n);
    for j in 0..n {
        m.set(j, j, qs(1.0));
        m.set(j + 1, j, k(-1.0));
    }
    m
}

pub fn mat(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, data)
}
