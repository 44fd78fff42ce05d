//! Seeded random instances for tests, benchmarks and demos.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::generator::{Alpha, Entry, GeneratorSpec, Shift};
use crate::graphs::{DirectedGraph, UndirectedGraph};
use crate::op_matrix::OpMatrix;
use crate::seq_engine::Triple;
use crate::shift_algebra::{Monomial, PartialSums, ShiftOp};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random `R_inf` element with up to `max_len` explicit partial sums.
/// The limit is kept away from zero.
pub fn rinf<R: Rng>(rng: &mut R, max_len: usize) -> ShiftOp {
    let len = rng.random_range(0..=max_len);
    let sigma = (0..len).map(|_| rng.random_range(-2.0..2.0)).collect();
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    ShiftOp::from_partial_sums(&PartialSums {
        sigma,
        sigma_inf: sign * rng.random_range(0.5..2.0),
    })
}

/// Random positive semi-definite `R_inf` element; some partial sums are
/// exactly zero.
pub fn psd_rinf<R: Rng>(rng: &mut R, max_len: usize) -> ShiftOp {
    let len = rng.random_range(0..=max_len);
    let draw = |rng: &mut R| {
        if rng.random_bool(0.25) {
            0.0
        } else {
            rng.random_range(0.0..3.0)
        }
    };
    let sigma = (0..len).map(|_| draw(rng)).collect();
    let sigma_inf = draw(rng);
    ShiftOp::from_partial_sums(&PartialSums { sigma, sigma_inf })
}

/// Random element of `R[q, q*]` with monomials of degree at most `max_deg`.
pub fn shift_op<R: Rng>(rng: &mut R, max_deg: u32, n_terms: usize) -> ShiftOp {
    ShiftOp::from_terms((0..n_terms).map(|_| {
        (
            Monomial::new(rng.random_range(0..=max_deg), rng.random_range(0..=max_deg)),
            rng.random_range(-2.0..2.0),
        )
    }))
}

/// Random stable single-output, single-column triple of state dimension `m`.
pub fn triple<R: Rng>(rng: &mut R, m: usize) -> Triple {
    let mut a: DMatrix<f64> = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    let norm = a.norm().max(1e-12);
    a *= rng.random_range(0.3..0.95) / norm;
    let c = DMatrix::from_fn(1, m, |_, _| rng.random_range(-1.0..1.0));
    let x0 = DMatrix::from_fn(m, 1, |_, _| rng.random_range(-1.0..1.0));
    Triple::new(c, a, x0).expect("consistent shapes")
}

/// Uniformly labelled random tree: vertex `i > 0` attaches to a random
/// earlier vertex, then labels and edge order are shuffled.
pub fn tree<R: Rng>(rng: &mut R, n: usize) -> UndirectedGraph {
    let mut labels: Vec<usize> = (0..n).collect();
    labels.shuffle(rng);
    let mut edges: Vec<(usize, usize)> = (1..n)
        .map(|i| {
            let p = rng.random_range(0..i);
            if rng.random_bool(0.5) {
                (labels[i], labels[p])
            } else {
                (labels[p], labels[i])
            }
        })
        .collect();
    edges.shuffle(rng);
    UndirectedGraph::new(n, edges).expect("a tree is a valid graph")
}

/// Random forest with at most `max_edges` edges.
pub fn forest<R: Rng>(rng: &mut R, max_edges: usize) -> UndirectedGraph {
    let n = rng.random_range(2..=max_edges + 1);
    let t = tree(rng, n);
    let edges: Vec<(usize, usize)> = t.edges().iter().copied().filter(|_| rng.random_bool(0.85)).collect();
    UndirectedGraph::new(n, edges).expect("subgraph of a tree")
}

/// Random tree network with arcs oriented at random.
pub fn directed_tree<R: Rng>(rng: &mut R, n: usize) -> DirectedGraph {
    let t = tree(rng, n);
    DirectedGraph::new(n, t.edges().to_vec()).expect("a tree is a valid graph")
}

/// Random graph-structured matrix: every edge gets both endpoints filled
/// with a random `R_inf` weight times a shift of order at most `max_k`.
pub fn mg_spec<R: Rng>(rng: &mut R, g: &UndirectedGraph, max_k: u32) -> GeneratorSpec {
    let mut entries = Vec::new();
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        for vertex in [u, v] {
            entries.push(Entry {
                vertex,
                edge: e,
                alpha: Alpha::Op(rinf(rng, 3)),
                k: rng.random_range(0..=max_k),
                shift: if rng.random_bool(0.5) {
                    Shift::Forward
                } else {
                    Shift::Backward
                },
            });
        }
    }
    GeneratorSpec {
        graph: g.clone(),
        entries,
    }
}

pub fn mg_matrix<R: Rng>(rng: &mut R, g: &UndirectedGraph, max_k: u32) -> OpMatrix {
    mg_spec(rng, g, max_k).build().expect("entries lie on edges")
}

/// Random lower triangular `L0 + L1 q` with a well conditioned constant
/// diagonal and `L1` strictly lower triangular.
pub fn two_term_factor<R: Rng>(rng: &mut R, n: usize) -> OpMatrix {
    let mut l = OpMatrix::zeros(n, n);
    for i in 0..n {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        l.set(i, i, ShiftOp::constant(sign * rng.random_range(0.5..2.0)));
        for j in 0..i {
            let mut x = ShiftOp::zero();
            if rng.random_bool(0.5) {
                x = x + ShiftOp::constant(rng.random_range(-1.0..1.0));
            }
            if rng.random_bool(0.5) {
                x = x + ShiftOp::monomial(0, 1, rng.random_range(-1.0..1.0));
            }
            l.set(i, j, x);
        }
    }
    l
}

/// Random real lower triangular matrix with diagonal bounded away from zero.
pub fn lower_triangular<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Less => 0.0,
        std::cmp::Ordering::Equal => rng.random_range(0.5..2.0),
        std::cmp::Ordering::Greater => rng.random_range(-1.0..1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_respect_their_contracts() {
        let mut r = rng(7);
        for _ in 0..50 {
            assert!(rinf(&mut r, 4).is_rinf());
            assert!(psd_rinf(&mut r, 4).is_psd_rinf());
            let t = tree(&mut r, 9);
            assert!(t.is_tree());
            assert!(forest(&mut r, 20).is_forest());
            let m = mg_matrix(&mut r, &t, 2);
            assert!(m.is_in_mg(&t).unwrap());
            assert!(two_term_factor(&mut r, 4).is_lower_triangular());
        }
    }

    #[test]
    fn seeded_streams_repeat() {
        let a = tree(&mut rng(3), 12);
        let b = tree(&mut rng(3), 12);
        assert_eq!(a, b);
    }
}
