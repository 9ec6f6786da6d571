//! Shared helpers for the integration tests: random graphs, valid search
//! operators, and brute-force oracles that do not go through the search.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use fgs::search::{self, Arrow, CycleCheck};
use fgs::{Dataset, MixedGraph, SemModel};
use rand::seq::SliceRandom;
use rand::Rng;

/// Random DAG over `p` nodes with `edges` edges, in a random node order.
pub fn random_dag<R: Rng>(p: usize, edges: usize, rng: &mut R) -> MixedGraph {
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(rng);
    let mut pairs: Vec<(usize, usize)> = (0..p).flat_map(|j| (0..j).map(move |i| (i, j))).collect();
    pairs.shuffle(rng);
    let mut g = MixedGraph::with_default_names(p);
    for &(i, j) in pairs.iter().take(edges) {
        g.add_directed(order[i], order[j]).unwrap();
    }
    g
}

/// A search operator: insert `x --> y` with `S`, or delete with `H`.
#[derive(Debug, Clone)]
pub enum Op {
    Insert(usize, usize, Vec<usize>),
    Delete(usize, usize, Vec<usize>),
}

fn bare_arrow(g: &MixedGraph, x: usize, y: usize, subset: Vec<usize>) -> Arrow {
    Arrow {
        bump: 1.0,
        x,
        y,
        na_yx: search::na_yx(g, x, y),
        subset,
        parents: g.parents(y).iter().copied().collect(),
    }
}

/// Every insert and delete operator valid on the pattern `g`.
pub fn valid_operators(g: &MixedGraph) -> Vec<Op> {
    let p = g.num_nodes();
    let mut ops = Vec::new();
    for x in 0..p {
        for y in 0..p {
            if x == y {
                continue;
            }
            if !g.is_adjacent(x, y) {
                let t = search::t_neighbors(g, x, y);
                for s in search::subsets(&t, None) {
                    let arrow = bare_arrow(g, x, y, s.clone());
                    if search::insert_is_valid(g, &arrow, CycleCheck::ExemptCliqueNodes) {
                        ops.push(Op::Insert(x, y, s));
                    }
                }
            } else if search::is_deletable(g, x, y) {
                let na = search::na_yx(g, x, y);
                for h in search::subsets(&na, None) {
                    let rest: Vec<usize> = na.iter().copied().filter(|v| !h.contains(v)).collect();
                    if g.is_clique(&rest).unwrap() {
                        ops.push(Op::Delete(x, y, h));
                    }
                }
            }
        }
    }
    ops
}

/// Applies the operator without reverting; returns the seeds for local
/// reversion.
pub fn apply_op(g: &mut MixedGraph, op: &Op) -> Vec<usize> {
    match op {
        Op::Insert(x, y, s) => {
            search::insert_operator(g, *x, *y, s).unwrap();
            [vec![*x, *y], s.clone()].concat()
        }
        Op::Delete(x, y, h) => {
            search::delete_operator(g, *x, *y, h).unwrap();
            [vec![*x, *y], h.clone()].concat()
        }
    }
}

/// Residual variance of `y` on `parents` by least squares on the raw rows
/// (with intercept), independent of the covariance route.
pub fn ols_residual_variance(data: &Dataset, y: usize, parents: &[usize]) -> f64 {
    let n = data.num_samples();
    let k = parents.len() + 1;
    let design = nalgebra::DMatrix::from_fn(n, k, |r, c| if c == 0 { 1.0 } else { data.column(parents[c - 1])[r] });
    let target = nalgebra::DVector::from_column_slice(data.column(y));
    let beta = design.clone().svd(true, true).solve(&target, 1e-14).unwrap();
    let resid = target - design * beta;
    resid.dot(&resid) / n as f64
}

/// `-n ln s - c (2k + 1) ln n` from the OLS residual.
pub fn ols_local_score(data: &Dataset, y: usize, parents: &[usize], c: f64) -> f64 {
    let n = data.num_samples() as f64;
    let s = ols_residual_variance(data, y, parents);
    -n * s.ln() - c * (2 * parents.len() + 1) as f64 * n.ln()
}

/// Every DAG over `p` labelled nodes (p <= 5), by brute force over edge
/// orientations of all pairs.
pub fn all_dags(p: usize) -> Vec<MixedGraph> {
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|j| (0..j).map(move |i| (i, j))).collect();
    let mut out = Vec::new();
    let total = 3usize.pow(pairs.len() as u32);
    for code in 0..total {
        let mut g = MixedGraph::with_default_names(p);
        let mut c = code;
        for &(i, j) in &pairs {
            match c % 3 {
                1 => g.add_directed(i, j).unwrap(),
                2 => g.add_directed(j, i).unwrap(),
                _ => {}
            }
            c /= 3;
        }
        if !g.has_directed_cycle() {
            out.push(g);
        }
    }
    out
}

/// Implied covariance `(I - B)^-1 Ω (I - B)^-T` of a linear SEM, with
/// `B[child][parent]` holding the coefficients.
pub fn implied_covariance(model: &SemModel) -> nalgebra::DMatrix<f64> {
    let p = model.dag.num_nodes();
    let mut b = nalgebra::DMatrix::<f64>::zeros(p, p);
    for (&(t, h), &a) in &model.coefficients {
        b[(h, t)] = a;
    }
    let inv = (nalgebra::DMatrix::<f64>::identity(p, p) - b).try_inverse().unwrap();
    let omega = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(model.error_variances.clone()));
    &inv * omega * inv.transpose()
}

/// A SEM over an explicit edge list with unit error variances.
pub fn sem(p: usize, edges: &[(usize, usize, f64)]) -> SemModel {
    let mut dag = MixedGraph::with_default_names(p);
    let mut coefficients = HashMap::new();
    for &(t, h, a) in edges {
        dag.add_directed(t, h).unwrap();
        coefficients.insert((t, h), a);
    }
    SemModel::new(dag, coefficients, vec![1.0; p]).unwrap()
}

pub fn skeleton_names(g: &MixedGraph) -> BTreeSet<(String, String)> {
    g.edges()
        .into_iter()
        .map(|e| (g.name(e.a).to_string(), g.name(e.b).to_string()))
        .collect()
}
