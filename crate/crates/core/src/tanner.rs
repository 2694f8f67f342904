//! Tanner graph of a parity-check matrix with a canonical edge order.
//!
//! Edge ids follow a row-major scan of `H`: all edges of check 0 by
//! ascending variable, then check 1, and so on. Every decoder in the crate
//! iterates neighbourhoods in this order, which fixes floating-point
//! summation order.

use std::ops::Range;

use thiserror::Error;

use crate::codes::Gf2Matrix;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("parity-check matrix has no ones")]
    EmptyMatrix,
    #[error("variable {var} and check {chk} are not adjacent")]
    NotAnEdge { var: usize, chk: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TannerGraph {
    n_var: usize,
    n_chk: usize,
    edge_var: Vec<usize>,
    edge_chk: Vec<usize>,
    chk_offsets: Vec<usize>,
    var_offsets: Vec<usize>,
    var_edge_ids: Vec<usize>,
    has_isolated: bool,
}

/// Builds the graph. Degree-0 variables or checks are allowed and flagged
/// through [`TannerGraph::has_isolated_nodes`].
pub fn build_graph(h: &Gf2Matrix) -> Result<TannerGraph, GraphError> {
    if h.is_zero() {
        return Err(GraphError::EmptyMatrix);
    }
    let (n_chk, n_var) = (h.rows(), h.cols());
    let mut edge_var = Vec::with_capacity(h.weight());
    let mut edge_chk = Vec::with_capacity(h.weight());
    let mut chk_offsets = Vec::with_capacity(n_chk + 1);
    chk_offsets.push(0);
    for j in 0..n_chk {
        for i in h.row_ones(j) {
            edge_var.push(i);
            edge_chk.push(j);
        }
        chk_offsets.push(edge_var.len());
    }

    let mut var_deg = vec![0usize; n_var];
    for &v in &edge_var {
        var_deg[v] += 1;
    }
    let mut var_offsets = Vec::with_capacity(n_var + 1);
    var_offsets.push(0);
    for d in &var_deg {
        var_offsets.push(var_offsets.last().unwrap() + d);
    }
    let mut cursor = var_offsets[..n_var].to_vec();
    let mut var_edge_ids = vec![0usize; edge_var.len()];
    // Edge ids ascend, so each variable's list comes out sorted.
    for (e, &v) in edge_var.iter().enumerate() {
        var_edge_ids[cursor[v]] = e;
        cursor[v] += 1;
    }

    let has_isolated =
        var_deg.contains(&0) || chk_offsets.windows(2).any(|w| w[0] == w[1]);
    Ok(TannerGraph {
        n_var,
        n_chk,
        edge_var,
        edge_chk,
        chk_offsets,
        var_offsets,
        var_edge_ids,
        has_isolated,
    })
}

impl TannerGraph {
    #[inline]
    pub fn n_var(&self) -> usize {
        self.n_var
    }

    #[inline]
    pub fn n_chk(&self) -> usize {
        self.n_chk
    }

    /// Total edge count `E`, equal to the weight of `H`.
    #[inline]
    pub fn n_edges(&self) -> usize {
        self.edge_var.len()
    }

    /// Edge ids incident to check `j`; contiguous by construction.
    #[inline]
    pub fn check_edges(&self, j: usize) -> Range<usize> {
        self.chk_offsets[j]..self.chk_offsets[j + 1]
    }

    /// Edge ids incident to variable `i`, ascending.
    #[inline]
    pub fn var_edges(&self, i: usize) -> &[usize] {
        &self.var_edge_ids[self.var_offsets[i]..self.var_offsets[i + 1]]
    }

    #[inline]
    pub fn edge_var(&self, e: usize) -> usize {
        self.edge_var[e]
    }

    #[inline]
    pub fn edge_chk(&self, e: usize) -> usize {
        self.edge_chk[e]
    }

    /// `(variable, check)` of edge `e`.
    pub fn edge_endpoints(&self, e: usize) -> (usize, usize) {
        (self.edge_var[e], self.edge_chk[e])
    }

    /// All edges as `(variable, check)` pairs in canonical order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edge_var
            .iter()
            .copied()
            .zip(self.edge_chk.iter().copied())
    }

    pub fn edge_index(&self, var: usize, chk: usize) -> Result<usize, GraphError> {
        if chk >= self.n_chk {
            return Err(GraphError::NotAnEdge { var, chk });
        }
        let range = self.check_edges(chk);
        self.edge_var[range.clone()]
            .binary_search(&var)
            .map(|off| range.start + off)
            .map_err(|_| GraphError::NotAnEdge { var, chk })
    }

    pub fn var_degree(&self, i: usize) -> usize {
        self.var_offsets[i + 1] - self.var_offsets[i]
    }

    pub fn check_degree(&self, j: usize) -> usize {
        self.chk_offsets[j + 1] - self.chk_offsets[j]
    }

    pub fn has_isolated_nodes(&self) -> bool {
        self.has_isolated
    }

    /// Parity check on a hard decision: true when every check is satisfied.
    pub fn satisfies_checks(&self, bits: &[u8]) -> bool {
        (0..self.n_chk).all(|j| {
            self.check_edges(j)
                .fold(0u8, |acc, e| acc ^ bits[self.edge_var[e]])
                == 0
        })
    }

    /// Rebuilds `H` from the edge list.
    pub fn to_matrix(&self) -> Gf2Matrix {
        let mut h = Gf2Matrix::zeros(self.n_chk, self.n_var);
        for (v, c) in self.edges() {
            h.set(c, v, true);
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{hamming74, ldpc_regular_construct};

    #[test]
    fn single_parity_check() {
        let g = build_graph(&Gf2Matrix::from_rows(&[[1u8, 1, 1]]).unwrap()).unwrap();
        assert_eq!((g.n_var(), g.n_chk(), g.n_edges()), (3, 1, 3));
        assert!(!g.has_isolated_nodes());
    }

    #[test]
    fn hamming_edge_count_and_order() {
        let h = hamming74();
        let g = build_graph(&h).unwrap();
        assert_eq!(g.n_edges(), h.weight());
        // First set bit is (row 0, col 0); last is (row 2, col 6).
        assert_eq!(g.edge_index(0, 0), Ok(0));
        assert_eq!(g.edge_index(6, 2), Ok(g.n_edges() - 1));
        assert_eq!(
            g.edge_index(1, 0),
            Err(GraphError::NotAnEdge { var: 1, chk: 0 })
        );
        assert!(g.edge_index(0, 9).is_err());
        for e in 0..g.n_edges() {
            let (v, c) = g.edge_endpoints(e);
            assert_eq!(g.edge_index(v, c), Ok(e));
        }
    }

    #[test]
    fn regular_32_has_96_edges() {
        let code = ldpc_regular_construct(32, 3, 6, 7).unwrap();
        let g = build_graph(code.parity()).unwrap();
        assert_eq!(g.n_edges(), 96);
    }

    #[test]
    fn adjacency_partitions_edges_and_rebuilds_h() {
        for seed in 0..5 {
            let code = ldpc_regular_construct(40, 3, 6, seed).unwrap();
            let h = code.parity();
            let g = build_graph(h).unwrap();
            assert_eq!(&g.to_matrix(), h);
            let mut seen_v = vec![0; g.n_edges()];
            let mut seen_c = vec![0; g.n_edges()];
            for i in 0..g.n_var() {
                assert_eq!(g.var_degree(i), h.col_weight(i));
                for &e in g.var_edges(i) {
                    assert_eq!(g.edge_var(e), i);
                    seen_v[e] += 1;
                }
            }
            for j in 0..g.n_chk() {
                assert_eq!(g.check_degree(j), h.row_weight(j));
                for e in g.check_edges(j) {
                    assert_eq!(g.edge_chk(e), j);
                    seen_c[e] += 1;
                }
            }
            assert!(seen_v.iter().chain(&seen_c).all(|&k| k == 1));
            let dv: usize = (0..g.n_var()).map(|i| g.var_degree(i)).sum();
            let dc: usize = (0..g.n_chk()).map(|j| g.check_degree(j)).sum();
            assert_eq!((dv, dc), (g.n_edges(), g.n_edges()));
        }
    }

    #[test]
    fn isolated_nodes_are_flagged_not_rejected() {
        let h = Gf2Matrix::from_rows(&[[1u8, 1, 0], [0, 0, 0]]).unwrap();
        let g = build_graph(&h).unwrap();
        assert!(g.has_isolated_nodes());
        assert_eq!(g.var_degree(2), 0);
        assert_eq!(g.check_degree(1), 0);
        assert_eq!(
            build_graph(&Gf2Matrix::zeros(2, 2)),
            Err(GraphError::EmptyMatrix)
        );
    }
}
