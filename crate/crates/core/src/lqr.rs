//! Discounted LQR for transportation networks on trees: state-space and
//! operator-matrix models, the least-squares right-hand side, the sparse
//! control law and a value-iteration Riccati oracle.
//!
//! States are ordered with all vertex levels first (vertex order) followed
//! by the arc buffers (arc order). [`interleaved_order`] maps to the
//! alternative `[v0, a0, v1, a1, ...]` layout.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cholesky::{cholesky_tree_with, Factorisation};
use crate::error::{Error, Result};
use crate::graphs::{Arc, DirectedGraph};
use crate::json::mat_serde;
use crate::op_matrix::{OpMatrix, Permutation};
use crate::par;
use crate::random;
use crate::seq_engine::Triple;
use crate::shift_algebra::{ShiftOp, Tolerances};
use crate::solver::{extract_dense_gain_with, extract_sparse_law, real_pattern, two_term_parts, ControlLaw};

/// Default horizon and tolerance for [`dp_riccati_gain`].
pub const DP_HORIZON: usize = 100_000;
pub const DP_TOL: f64 = 1e-13;
/// Singular values of `BᵀPB` below this fraction of the largest are dropped.
pub const PINV_RTOL: f64 = 1e-10;
/// Rollout length and number of initial states used by [`verify`].
pub const ROLLOUT_STEPS: usize = 200;
pub const ROLLOUT_COUNT: usize = 20;

/// Storage facilities (vertices) joined by transportation links (arcs), with
/// discount factor `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkRepr", into = "NetworkRepr")]
pub struct Network {
    graph: DirectedGraph,
    r: f64,
}

#[derive(Serialize, Deserialize)]
struct NetworkRepr {
    vertices: usize,
    arcs: Vec<Arc>,
    discount: f64,
}

impl TryFrom<NetworkRepr> for Network {
    type Error = Error;

    fn try_from(n: NetworkRepr) -> Result<Self> {
        let g = DirectedGraph::new(n.vertices, n.arcs.into_iter().map(|a| (a.from, a.to)).collect())?;
        Network::new(g, n.discount)
    }
}

impl From<Network> for NetworkRepr {
    fn from(n: Network) -> Self {
        NetworkRepr {
            vertices: n.graph.n_vertices(),
            arcs: n.graph.arcs().iter().map(|&(from, to)| Arc { from, to }).collect(),
            discount: n.r,
        }
    }
}

impl Network {
    pub fn new(graph: DirectedGraph, r: f64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidDiscount(r));
        }
        if !graph.underlying().is_forest() {
            return Err(Error::NotAForest);
        }
        Ok(Self { graph, r })
    }

    /// `n` facilities in a row, every link carrying towards vertex 0:
    /// arc `i` runs from vertex `i + 1` to vertex `i`.
    pub fn line(n_links: usize, r: f64) -> Result<Self> {
        let arcs = (0..n_links).map(|i| (i + 1, i)).collect();
        Self::new(DirectedGraph::new(n_links + 1, arcs)?, r)
    }

    pub fn random<R: Rng>(rng: &mut R, n_vertices: usize, r: f64) -> Result<Self> {
        Self::new(random::directed_tree(rng, n_vertices), r)
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    pub fn discount(&self) -> f64 {
        self.r
    }

    pub fn n_vertices(&self) -> usize {
        self.graph.n_vertices()
    }

    pub fn n_arcs(&self) -> usize {
        self.graph.arcs().len()
    }

    pub fn n_states(&self) -> usize {
        self.n_vertices() + self.n_arcs()
    }
}

/// `x[k+1] = A x[k] + B u[k]`, `y[k] = C x[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    #[serde(rename = "A", with = "mat_serde")]
    pub a: DMatrix<f64>,
    #[serde(rename = "B", with = "mat_serde")]
    pub b: DMatrix<f64>,
    #[serde(rename = "C", with = "mat_serde")]
    pub c: DMatrix<f64>,
}

pub fn build_state_space(net: &Network) -> StateSpace {
    let (nv, na) = (net.n_vertices(), net.n_arcs());
    let n = nv + na;
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, na);
    let mut c = DMatrix::zeros(nv, n);
    for v in 0..nv {
        a[(v, v)] = 1.0;
        c[(v, v)] = 1.0;
    }
    for (e, &(from, to)) in net.graph.arcs().iter().enumerate() {
        a[(to, nv + e)] = 1.0;
        b[(nv + e, e)] = 1.0;
        b[(from, e)] = -1.0;
    }
    StateSpace { a, b, c }
}

/// Rows are vertices, columns arcs: `-1` where the arc leaves, `r q*` where
/// it arrives.
pub fn build_operator_matrix(net: &Network) -> OpMatrix {
    let mut m = OpMatrix::zeros(net.n_vertices(), net.n_arcs());
    for (e, &(from, to)) in net.graph.arcs().iter().enumerate() {
        m.set(from, e, ShiftOp::constant(-1.0));
        m.set(to, e, ShiftOp::monomial(1, 0, net.r));
    }
    m
}

/// Real coefficients `(M0, M1)` of `M = M0 + M1 q*`.
fn operator_parts(m: &OpMatrix) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let mut m0 = DMatrix::zeros(m.rows(), m.cols());
    let mut m1 = DMatrix::zeros(m.rows(), m.cols());
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            for (mono, c) in m.get(i, j).terms() {
                match (mono.istar, mono.j) {
                    (0, 0) => m0[(i, j)] = c,
                    (1, 0) => m1[(i, j)] = c,
                    _ => {
                        return Err(Error::PreconditionViolated(format!(
                            "entry ({i}, {j}) is not of the form a + b q*"
                        )))
                    }
                }
            }
        }
    }
    Ok((m0, m1))
}

/// `K2 = (M0ᵀ + r M1ᵀ) C r A`, so that `w[k] = -r^k K2 x0`.
pub fn rhs_coefficient(net: &Network, ss: &StateSpace) -> Result<DMatrix<f64>> {
    let (m0, m1) = operator_parts(&build_operator_matrix(net))?;
    let r = net.r;
    Ok((m0.transpose() + m1.transpose() * r) * &ss.c * &ss.a * r)
}

fn check_x0(ss: &StateSpace, x0: &DMatrix<f64>) -> Result<()> {
    if x0.nrows() != ss.a.nrows() || ss.c.ncols() != ss.a.nrows() || ss.b.nrows() != ss.a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} rows for {} states",
            x0.nrows(),
            ss.a.nrows()
        )));
    }
    Ok(())
}

/// Initial-condition sequence `d = (C x0, r C (A - I) x0, 0, ...)`.
pub fn initial_sequence(net: &Network, ss: &StateSpace, x0: &DMatrix<f64>) -> Result<Triple> {
    check_x0(ss, x0)?;
    let n = ss.a.nrows();
    let d0 = &ss.c * x0;
    let d1 = &ss.c * (&ss.a - DMatrix::identity(n, n)) * x0 * net.r;
    Triple::finite(&[d0, d1], ss.c.nrows(), x0.ncols())
}

/// `w = -q M* y_init` with `(1 - r q*) y_init = d`, one triple per arc.
pub fn build_rhs(net: &Network, ss: &StateSpace, x0: &DMatrix<f64>) -> Result<Vec<Triple>> {
    let y = initial_sequence(net, ss, x0)?.geometric_resolvent(net.r).prune();
    let m = build_operator_matrix(net);
    let nv = net.n_vertices();
    let components: Vec<Triple> = (0..nv)
        .map(|v| {
            let mut sel = DMatrix::zeros(1, nv);
            sel[(0, v)] = 1.0;
            y.map_output(&sel).map(|t| t.prune())
        })
        .collect::<Result<_>>()?;
    let minus_q = ShiftOp::monomial(0, 1, -1.0);
    (0..net.n_arcs())
        .map(|e| {
            let mut acc = Triple::zero(1, x0.ncols());
            for (v, yv) in components.iter().enumerate() {
                let entry = m.get(v, e);
                if !entry.is_zero() {
                    acc = acc.add(&yv.apply_shiftop(&(&minus_q * &entry.adjoint())))?;
                }
            }
            Ok(acc.prune())
        })
        .collect()
}

/// Closed form of [`build_rhs`] valid when `A = A²`: `w[k] = -r^k K2 x0`.
pub fn build_rhs_simplified(net: &Network, ss: &StateSpace, x0: &DMatrix<f64>) -> Result<Vec<Triple>> {
    check_x0(ss, x0)?;
    let k2 = rhs_coefficient(net, ss)?;
    let n = ss.a.nrows();
    (0..net.n_arcs())
        .map(|e| {
            let c = -k2.rows(e, 1).into_owned();
            Triple::new(c, DMatrix::identity(n, n) * net.r, x0.clone())
        })
        .collect()
}

/// Operator factorisation pipeline. Produces the sparse pair `(K1, K2)`
/// when the factor has the form `L0 + L1 q`, and only the dense gain
/// otherwise.
pub fn solve_lqr(net: &Network) -> Result<ControlLaw> {
    solve_lqr_with(net, &Tolerances::default())
}

pub fn solve_lqr_with(net: &Network, tol: &Tolerances) -> Result<ControlLaw> {
    let ss = build_state_space(net);
    let m = build_operator_matrix(net);
    let f = cholesky_tree_with(&m, tol)?;
    let k2 = rhs_coefficient(net, &ss)?;
    if net.n_arcs() == 0 {
        let empty = DMatrix::zeros(0, 0);
        return Ok(ControlLaw::new(Some(empty), k2.clone(), k2));
    }
    match two_term_parts(&f.l) {
        Ok(_) => {
            let (k1_perm, k2) = extract_sparse_law(&f.l, net.r, &k2)?;
            let pm = f.p.matrix();
            let k1 = &pm * k1_perm * pm.transpose();
            let lu = k1.clone().lu();
            let k = lu.solve(&k2).ok_or(Error::Singular {
                value: 0.0,
                tol: tol.inv_tol,
            })?;
            Ok(ControlLaw::new(Some(k1), k2, k))
        }
        Err(Error::NotTwoTermShape(_)) => {
            let k = dense_gain(net, &ss, &f, tol)?;
            Ok(ControlLaw::new(None, k2, k))
        }
        Err(e) => Err(e),
    }
}

/// Gain by back substitution over every basis initial state.
pub fn dense_gain(net: &Network, ss: &StateSpace, f: &Factorisation, tol: &Tolerances) -> Result<DMatrix<f64>> {
    let z0 = extract_dense_gain_with(f, |e| build_rhs_simplified(net, ss, e), net.n_states(), tol.inv_tol)?;
    Ok(-z0)
}

fn pinv(a: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = PINV_RTOL * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let p = svd
        .pseudo_inverse(eps)
        .unwrap_or_else(|_| DMatrix::zeros(a.ncols(), a.nrows()));
    (p, rank)
}

/// Result of value iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    /// `u = -G x̄`.
    pub gain: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Rank of `BᵀPB` at the fixed point.
    pub rank: usize,
}

/// Value iteration for the discounted problem with `Ā = r A`.
pub fn dp_riccati_gain(ss: &StateSpace, r: f64, horizon: usize, tol: f64) -> Result<DMatrix<f64>> {
    dp_riccati(ss, r, horizon, tol).map(|s| s.gain)
}

pub fn dp_riccati(ss: &StateSpace, r: f64, horizon: usize, tol: f64) -> Result<RiccatiSolution> {
    if horizon == 0 {
        return Err(Error::PreconditionViolated("horizon must be at least 1".into()));
    }
    let abar = &ss.a * r;
    let b = &ss.b;
    let q = ss.c.transpose() * &ss.c;
    let mut p = DMatrix::zeros(ss.a.nrows(), ss.a.nrows());
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < horizon {
        let pb = &p * b;
        let (g_inv, _) = pinv(&(b.transpose() * &pb));
        let inner = &p - &pb * g_inv * pb.transpose();
        let next = &q + abar.transpose() * inner * &abar;
        let next = (&next + next.transpose()) * 0.5;
        residual = (&next - &p).amax();
        p = next;
        iterations += 1;
        if residual <= tol * p.amax().max(1.0) {
            break;
        }
    }
    if residual > 100.0 * tol * p.amax().max(1.0) {
        return Err(Error::NoConvergence { residual, iterations });
    }
    let pb = &p * b;
    let (g_inv, rank) = pinv(&(b.transpose() * &pb));
    let gain = g_inv * pb.transpose() * &abar;
    Ok(RiccatiSolution {
        gain,
        p,
        iterations,
        residual,
        rank,
    })
}

/// `Σ_k |C x̄[k]|²` over `steps` steps of `x̄[k+1] = (r A - B K) x̄[k]`.
pub fn closed_loop_cost(ss: &StateSpace, r: f64, k: &DMatrix<f64>, x0: &DMatrix<f64>, steps: usize) -> f64 {
    let closed = &ss.a * r - &ss.b * k;
    let mut x = x0.clone();
    let mut cost = 0.0;
    for _ in 0..steps {
        cost += (&ss.c * &x).norm_squared();
        x = &closed * x;
    }
    cost
}

/// Maps vertex-first state indices to `[v0, a0, v1, a1, ...]`; leftover
/// vertices or arcs follow in order.
pub fn interleaved_order(net: &Network) -> Permutation {
    let (nv, na) = (net.n_vertices(), net.n_arcs());
    let mut image = Vec::with_capacity(nv + na);
    for i in 0..nv.max(na) {
        if i < nv {
            image.push(i);
        }
        if i < na {
            image.push(nv + i);
        }
    }
    Permutation::new(image).expect("each state listed once")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternStats {
    pub k1_nonzeros: Option<usize>,
    pub k2_nonzeros: usize,
    pub k_nonzeros: usize,
    pub entries_k: usize,
}

/// Factorised law against the Riccati oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub deviation: f64,
    pub cost_factorised: f64,
    pub cost_oracle: f64,
    pub oracle_iterations: usize,
    pub oracle_rank: usize,
    pub sparse_form: bool,
    pub patterns: PatternStats,
}

pub fn verify(net: &Network) -> Result<VerifyReport> {
    verify_with(net, &Tolerances::default(), 0)
}

pub fn verify_with(net: &Network, tol: &Tolerances, seed: u64) -> Result<VerifyReport> {
    let law = solve_lqr_with(net, tol)?;
    let ss = build_state_space(net);
    let oracle = dp_riccati(&ss, net.r, DP_HORIZON, DP_TOL)?;
    verify_law(net, &ss, &law, &oracle, seed)
}

/// Compares an existing law with an oracle solution.
pub fn verify_law(
    net: &Network,
    ss: &StateSpace,
    law: &ControlLaw,
    oracle: &RiccatiSolution,
    seed: u64,
) -> Result<VerifyReport> {
    if law.K.shape() != oracle.gain.shape() {
        return Err(Error::DimensionMismatch("gain shapes differ".into()));
    }
    let deviation = if law.K.is_empty() {
        0.0
    } else {
        (&law.K - &oracle.gain).amax()
    };
    let mut rng = random::rng(seed);
    let n = net.n_states();
    let starts: Vec<DMatrix<f64>> = (0..ROLLOUT_COUNT)
        .map(|_| DMatrix::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let costs = par::map(&starts, |x0| {
        (
            closed_loop_cost(ss, net.r, &law.K, x0, ROLLOUT_STEPS),
            closed_loop_cost(ss, net.r, &oracle.gain, x0, ROLLOUT_STEPS),
        )
    });
    let patterns = PatternStats {
        k1_nonzeros: law.K1.as_ref().map(|m| real_pattern(m).count()),
        k2_nonzeros: real_pattern(&law.K2).count(),
        k_nonzeros: real_pattern(&law.K).count(),
        entries_k: law.K.len(),
    };
    Ok(VerifyReport {
        deviation,
        cost_factorised: costs.iter().map(|c| c.0).sum(),
        cost_oracle: costs.iter().map(|c| c.1).sum(),
        oracle_iterations: oracle.iterations,
        oracle_rank: oracle.rank,
        sparse_form: law.K1.is_some(),
        patterns,
    })
}
