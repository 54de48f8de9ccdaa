//! Undirected simple graphs stored as sorted adjacency lists.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};

/// An undirected simple graph on vertices `0..n`.
///
/// Neighbor lists are sorted and duplicate-free, so `degree(i)` is the
/// number of neighbors `N_i` and the adjacency is symmetric with an empty
/// diagonal by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    adjacency: Vec<Vec<usize>>,
    edge_count: usize,
}

impl Network {
    pub fn empty(n: usize) -> Self {
        Self {
            adjacency: vec![Vec::new(); n],
            edge_count: 0,
        }
    }

    /// Builds a graph from an edge list. Duplicate edges (in either
    /// orientation) collapse to one; self-loops and out-of-range endpoints
    /// are rejected.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut adjacency = vec![Vec::new(); n];
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(invalid(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            if i == j {
                return Err(invalid(format!("self-loop at vertex {i}")));
            }
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        let mut twice = 0;
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
            twice += list.len();
        }
        Ok(Self {
            adjacency,
            edge_count: twice / 2,
        })
    }

    /// Builds a graph from neighbor lists that are already symmetric, sorted
    /// and loop-free (used by the samplers).
    pub(crate) fn from_sorted_adjacency(adjacency: Vec<Vec<usize>>) -> Self {
        let edge_count = adjacency.iter().map(Vec::len).sum::<usize>() / 2;
        Self {
            adjacency,
            edge_count,
        }
    }

    pub fn complete(n: usize) -> Self {
        let adjacency = (0..n)
            .map(|i| (0..n).filter(|&j| j != i).collect())
            .collect();
        Self::from_sorted_adjacency(adjacency)
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency
            .get(i)
            .is_some_and(|list| list.binary_search(&j).is_ok())
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn isolated_vertices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.degree(i) == 0).collect()
    }

    /// First vertex with no neighbors, as an error.
    pub fn require_no_isolated(&self) -> Result<()> {
        match (0..self.n()).find(|&i| self.degree(i) == 0) {
            Some(vertex) => Err(Error::IsolatedVertex { vertex }),
            None => Ok(()),
        }
    }

    /// Induced subgraph on the vertices with at least one neighbor. Returns
    /// the subgraph and, for each new vertex, its index in `self`.
    pub fn drop_isolated(&self) -> (Network, Vec<usize>) {
        let kept: Vec<usize> = (0..self.n()).filter(|&i| self.degree(i) > 0).collect();
        let mut new_index = vec![usize::MAX; self.n()];
        for (new, &old) in kept.iter().enumerate() {
            new_index[old] = new;
        }
        let adjacency = kept
            .iter()
            .map(|&old| self.adjacency[old].iter().map(|&j| new_index[j]).collect())
            .collect();
        (Network::from_sorted_adjacency(adjacency), kept)
    }

    /// `A x` for the 0/1 adjacency matrix.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n());
        self.adjacency
            .iter()
            .map(|list| list.iter().map(|&j| x[j]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut a = DMatrix::zeros(n, n);
        for (i, j) in self.edges() {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        a
    }

    /// Writes the edge list as CSV rows `i,j` (0-based, `i < j`) under an
    /// `i,j` header.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "i,j")?;
        for (i, j) in self.edges() {
            writeln!(out, "{i},{j}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_edges_collapse() {
        let g = Network::from_edges(3, [(0, 1), (1, 0), (1, 2)]).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.degrees(), vec![1, 2, 1]);
        assert!(g.has_edge(1, 0) && g.has_edge(0, 1) && !g.has_edge(0, 2));
    }

    #[test]
    fn rejects_loops_and_out_of_range() {
        assert!(Network::from_edges(3, [(1, 1)]).is_err());
        assert!(Network::from_edges(3, [(0, 3)]).is_err());
    }

    #[test]
    fn complete_graph_degrees() {
        let g = Network::complete(5);
        assert_eq!(g.edge_count(), 10);
        assert!(g.degrees().iter().all(|&d| d == 4));
        assert_eq!(g.to_dense(), g.to_dense().transpose());
    }

    #[test]
    fn drop_isolated_relabels() {
        let g = Network::from_edges(5, [(1, 3), (3, 4)]).unwrap();
        assert_eq!(g.isolated_vertices(), vec![0, 2]);
        assert!(matches!(g.require_no_isolated(), Err(Error::IsolatedVertex { vertex: 0 })));
        let (h, kept) = g.drop_isolated();
        assert_eq!(kept, vec![1, 3, 4]);
        assert_eq!(h.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn edge_list_csv() {
        let g = Network::from_edges(3, [(2, 0), (1, 2)]).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "i,j\n0,2\n1,2\n");
    }
}
