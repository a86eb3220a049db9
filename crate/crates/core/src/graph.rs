//! Areal adjacency graphs and the ordered directed neighborhoods used by
//! the DAGAR construction.
//!
//! Regions are 0-indexed internally; the 1-indexed convention of the file
//! formats is converted at the I/O boundary only.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Undirected adjacency graph over `n` regions.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    labels: Vec<String>,
}

impl SpatialGraph {
    /// Builds a graph from 0-indexed undirected edges. Self-loops and
    /// out-of-range endpoints are rejected; duplicate edges collapse.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::ConfigError(format!("self-loop at region {}", a + 1)));
            }
            if a >= n || b >= n {
                return Err(Error::ConfigError(format!(
                    "edge ({}, {}) outside 1..{}",
                    a + 1,
                    b + 1,
                    n
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Self {
            n,
            edges: set.into_iter().collect(),
            labels: (1..=n).map(|i| i.to_string()).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Normalized edge list, each pair stored once with `a < b`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn set_labels(&mut self, labels: Vec<String>) -> Result<()> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} regions",
                labels.len(),
                self.n
            )));
        }
        self.labels = labels;
        Ok(())
    }

    /// Neighbor lists (sorted, symmetric).
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Symmetric 0/1 proximity matrix with zero diagonal.
    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        a
    }

    /// Row-stochastic proximity matrix; errors on any isolated region.
    pub fn row_stochastic(&self) -> Result<DMatrix<f64>> {
        let mut a = self.adjacency_matrix();
        for i in 0..self.n {
            let row_sum: f64 = a.row(i).sum();
            if row_sum == 0.0 {
                return Err(Error::IsolatedRegion(i + 1));
            }
            for j in 0..self.n {
                a[(i, j)] /= row_sum;
            }
        }
        Ok(a)
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let adj = self.neighbors();
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Reads the edge-list text format: one `i j` pair per line, 1-indexed,
    /// whitespace-separated, `#` starts a comment.
    pub fn read_edge_list<R: BufRead>(reader: R) -> Result<Self> {
        let mut edges = Vec::new();
        let mut max_vertex = 0usize;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut parts = content.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize> {
                let tok = tok.ok_or_else(|| Error::ParseError {
                    line: lineno + 1,
                    msg: "expected `i j` pair".into(),
                })?;
                let v: usize = tok.parse().map_err(|_| Error::ParseError {
                    line: lineno + 1,
                    msg: format!("invalid vertex index `{tok}`"),
                })?;
                if v == 0 {
                    return Err(Error::ParseError {
                        line: lineno + 1,
                        msg: "vertex indices are 1-based".into(),
                    });
                }
                Ok(v)
            };
            let i = parse(parts.next())?;
            let j = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(Error::ParseError {
                    line: lineno + 1,
                    msg: "trailing tokens after edge pair".into(),
                });
            }
            max_vertex = max_vertex.max(i).max(j);
            edges.push((i - 1, j - 1));
        }
        SpatialGraph::new(max_vertex, edges)
    }

    pub fn read_edge_list_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_edge_list(std::io::BufReader::new(file))
    }

    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        for &(a, b) in &self.edges {
            writeln!(w, "{} {}", a + 1, b + 1)?;
        }
        Ok(())
    }
}

/// Rook-adjacency lattice with `side * side` regions in row-major order.
pub fn grid_graph(side: usize) -> SpatialGraph {
    assert!(side >= 1, "grid side must be positive");
    let n = side * side;
    let mut edges = Vec::with_capacity(2 * side * (side - 1));
    for r in 0..side {
        for c in 0..side {
            let v = r * side + c;
            if c + 1 < side {
                edges.push((v, v + 1));
            }
            if r + 1 < side {
                edges.push((v, v + side));
            }
        }
    }
    SpatialGraph::new(n, edges).expect("grid edges are valid by construction")
}

/// Permutation of the regions used to direct the DAGAR DAG.
#[derive(Debug, Clone, PartialEq)]
pub struct Ordering {
    /// `order[pos]` is the region occupying position `pos`.
    order: Vec<usize>,
    /// `rank[region]` is the position of `region` in the ordering.
    rank: Vec<usize>,
}

impl Ordering {
    pub fn natural(n: usize) -> Self {
        Self {
            order: (0..n).collect(),
            rank: (0..n).collect(),
        }
    }

    pub fn from_order(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut rank = vec![usize::MAX; n];
        for (pos, &region) in order.iter().enumerate() {
            if region >= n || rank[region] != usize::MAX {
                return Err(Error::ConfigError(
                    "ordering must be a permutation of the regions".into(),
                ));
            }
            rank[region] = pos;
        }
        Ok(Self { order, rank })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn rank(&self, region: usize) -> usize {
        self.rank[region]
    }
}

/// Earlier-ordered adjacent regions per region, with cached sizes.
#[derive(Debug, Clone)]
pub struct DirectedNeighborhoods {
    sets: Vec<Vec<usize>>,
}

impl DirectedNeighborhoods {
    pub fn parents(&self, region: usize) -> &[usize] {
        &self.sets[region]
    }

    pub fn parent_count(&self, region: usize) -> usize {
        self.sets[region].len()
    }

    pub fn total_edges(&self) -> usize {
        self.sets.iter().map(|s| s.len()).sum()
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}

/// Directs each undirected edge from the earlier-ordered endpoint to the
/// later one; the first-ordered region always has an empty set.
pub fn directed_neighbors(g: &SpatialGraph, ord: &Ordering) -> Result<DirectedNeighborhoods> {
    if ord.len() != g.n() {
        return Err(Error::DimensionMismatch(format!(
            "ordering over {} regions for a graph with {}",
            ord.len(),
            g.n()
        )));
    }
    let mut sets = vec![Vec::new(); g.n()];
    for &(a, b) in g.edges() {
        if ord.rank(a) < ord.rank(b) {
            sets[b].push(a);
        } else {
            sets[a].push(b);
        }
    }
    for s in &mut sets {
        s.sort_unstable();
    }
    Ok(DirectedNeighborhoods { sets })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph(n: usize) -> SpatialGraph {
        SpatialGraph::new(n, (0..n - 1).map(|i| (i, i + 1))).unwrap()
    }

    #[test]
    fn grid_degenerate_single_vertex() {
        let g = grid_graph(1);
        assert_eq!(g.n(), 1);
        assert!(g.edges().is_empty());
    }

    #[test]
    fn grid_edge_counts_match_enumeration() {
        // Enumeration oracle: a rook lattice has 2*side*(side-1) edges.
        for side in [2usize, 3, 5] {
            let g = grid_graph(side);
            assert_eq!(g.n(), side * side);
            assert_eq!(g.edges().len(), 2 * side * (side - 1));
        }
    }

    #[test]
    fn adjacency_of_two_node_path() {
        let g = path_graph(2);
        let a = g.adjacency_matrix();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn adjacency_of_three_node_path() {
        let g = path_graph(3);
        let a = g.adjacency_matrix();
        assert_eq!(a[(0, 2)], 0.0);
        assert_eq!(a[(0, 1)], 1.0);
        assert_eq!(a[(1, 2)], 1.0);
        assert_eq!(a.transpose(), a);
        assert_eq!(a.diagonal().sum(), 0.0);
    }

    #[test]
    fn grid3_row_sums_are_rook_degrees() {
        let g = grid_graph(3);
        let a = g.adjacency_matrix();
        let degrees: Vec<f64> = (0..9).map(|i| a.row(i).sum()).collect();
        assert_eq!(degrees, vec![2.0, 3.0, 2.0, 3.0, 4.0, 3.0, 2.0, 3.0, 2.0]);
    }

    #[test]
    fn row_stochastic_path_values() {
        let g = path_graph(2);
        let a = g.row_stochastic().unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));

        let g = path_graph(3);
        let a = g.row_stochastic().unwrap();
        assert_eq!(a.row(1).iter().copied().collect::<Vec<_>>(), vec![0.5, 0.0, 0.5]);
        for i in 0..3 {
            assert!((a.row(i).sum() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn row_stochastic_rejects_isolated_vertex() {
        let g = SpatialGraph::new(3, [(0, 1)]).unwrap();
        match g.row_stochastic() {
            Err(Error::IsolatedRegion(r)) => assert_eq!(r, 3),
            other => panic!("expected IsolatedRegion, got {other:?}"),
        }
    }

    #[test]
    fn directed_neighbors_on_paths() {
        let g = path_graph(2);
        let d = directed_neighbors(&g, &Ordering::natural(2)).unwrap();
        assert!(d.parents(0).is_empty());
        assert_eq!(d.parents(1), &[0]);

        let g = path_graph(3);
        let d = directed_neighbors(&g, &Ordering::natural(3)).unwrap();
        let sizes: Vec<usize> = (0..3).map(|i| d.parent_count(i)).collect();
        assert_eq!(sizes, vec![0, 1, 1]);
    }

    #[test]
    fn directed_neighbors_cover_each_edge_once() {
        // Handshake identity: parent sets partition the undirected edges.
        let g = grid_graph(3);
        let d = directed_neighbors(&g, &Ordering::natural(9)).unwrap();
        assert_eq!(d.total_edges(), g.edges().len());
        assert_eq!(d.total_edges(), 12);
    }

    #[test]
    fn directed_neighbors_acyclic_for_random_orderings() {
        // Any permutation must induce a DAG: parents always have smaller rank,
        // so following parent links strictly decreases rank (cycle check).
        let g = grid_graph(4);
        let orders = [
            (0..16).collect::<Vec<_>>(),
            (0..16).rev().collect::<Vec<_>>(),
            vec![3, 7, 1, 15, 0, 2, 9, 4, 11, 5, 13, 6, 8, 10, 12, 14],
        ];
        for order in orders {
            let ord = Ordering::from_order(order).unwrap();
            let d = directed_neighbors(&g, &ord).unwrap();
            assert_eq!(d.total_edges(), g.edges().len());
            for i in 0..16 {
                for &p in d.parents(i) {
                    assert!(ord.rank(p) < ord.rank(i));
                }
            }
        }
    }

    #[test]
    fn ordering_rejects_non_permutation() {
        assert!(Ordering::from_order(vec![0, 0, 1]).is_err());
        assert!(Ordering::from_order(vec![0, 3]).is_err());
    }

    #[test]
    fn edge_list_round_trip_with_comments() {
        let text = "# toy graph\n1 2\n2 3 # chain\n\n";
        let g = SpatialGraph::read_edge_list(text.as_bytes()).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);

        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let again = SpatialGraph::read_edge_list(buf.as_slice()).unwrap();
        assert_eq!(again, g);
    }

    #[test]
    fn edge_list_reports_line_numbers() {
        let text = "1 2\n1 x\n";
        match SpatialGraph::read_edge_list(text.as_bytes()) {
            Err(Error::ParseError { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected ParseError, got {other:?}"),
        }
    }
}
