//! Undirected simple graphs, node subsets and the edge-list loader.
//!
//! A [`Graph`] keeps a dense byte adjacency matrix for O(1) entry lookup and
//! neighbor lists for traversals. Both are built once in the constructor and
//! the graph is immutable afterwards.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adjacency: Vec<u8>,
    neighbors: Vec<Vec<usize>>,
    edge_count: usize,
}

/// Counters for input edges that were dropped while building a simple graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub self_loops: usize,
    pub duplicates: usize,
}

impl Graph {
    /// Empty graph on `n` nodes.
    pub fn empty(n: usize) -> Self {
        Graph {
            n,
            adjacency: vec![0; n * n],
            neighbors: vec![Vec::new(); n],
            edge_count: 0,
        }
    }

    /// Builds a simple graph from an edge iterator. Self-loops and repeated
    /// edges (in either orientation) are dropped and counted.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<(Self, BuildStats)>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = Graph::empty(n);
        let mut stats = BuildStats::default();
        for (u, v) in edges {
            for idx in [u, v] {
                if idx >= n {
                    return Err(Error::IndexOutOfRange { index: idx, n });
                }
            }
            if u == v {
                stats.self_loops += 1;
                continue;
            }
            if g.adjacency[u * n + v] != 0 {
                stats.duplicates += 1;
                continue;
            }
            g.adjacency[u * n + v] = 1;
            g.adjacency[v * n + u] = 1;
            g.edge_count += 1;
        }
        g.rebuild_neighbors();
        Ok((g, stats))
    }

    /// Builds a graph from a row-major symmetric 0/1 matrix.
    pub fn from_dense(n: usize, adjacency: Vec<u8>) -> Result<Self> {
        if adjacency.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "adjacency has {} entries, expected {}",
                adjacency.len(),
                n * n
            )));
        }
        let mut edge_count = 0;
        for i in 0..n {
            if adjacency[i * n + i] != 0 {
                return Err(Error::InvalidInput(format!("self-loop at node {i}")));
            }
            for j in (i + 1)..n {
                let a = adjacency[i * n + j];
                if a > 1 || a != adjacency[j * n + i] {
                    return Err(Error::InvalidInput(format!(
                        "adjacency not symmetric 0/1 at ({i}, {j})"
                    )));
                }
                edge_count += a as usize;
            }
        }
        let mut g = Graph {
            n,
            adjacency,
            neighbors: Vec::new(),
            edge_count,
        };
        g.rebuild_neighbors();
        Ok(g)
    }

    fn rebuild_neighbors(&mut self) {
        let n = self.n;
        self.neighbors = (0..n)
            .map(|i| (0..n).filter(|&j| self.adjacency[i * n + j] != 0).collect())
            .collect();
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j] != 0
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    /// Degree of every node.
    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    /// Row `i` of the dense adjacency matrix.
    #[inline]
    pub fn row(&self, i: usize) -> &[u8] {
        &self.adjacency[i * self.n..(i + 1) * self.n]
    }

    /// Undirected edge list with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for (u, nbrs) in self.neighbors.iter().enumerate() {
            out.extend(nbrs.iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        out
    }

    /// `A[rows × cols]` as a dense real matrix.
    pub fn restrict(&self, rows: &NodeSubset, cols: &NodeSubset) -> Result<Array2<f64>> {
        rows.check_bounds(self.n)?;
        cols.check_bounds(self.n)?;
        Ok(Array2::from_shape_fn((rows.len(), cols.len()), |(i, j)| {
            self.adjacency[rows[i] * self.n + cols[j]] as f64
        }))
    }

    /// `A_S` written row-major into `out` (resized to `|S|²`). No bounds checks
    /// beyond slice indexing; used on hot paths with subsets already validated.
    pub fn induced_dense_into(&self, s: &[usize], out: &mut Vec<f64>) {
        let m = s.len();
        out.clear();
        out.resize(m * m, 0.0);
        for (a, &i) in s.iter().enumerate() {
            let row = self.row(i);
            let dst = &mut out[a * m..(a + 1) * m];
            for (b, &j) in s.iter().enumerate() {
                dst[b] = row[j] as f64;
            }
        }
    }

    /// Degrees inside the subgraph induced by `s`, in the order of `s`.
    pub fn induced_degrees(&self, s: &NodeSubset) -> Vec<usize> {
        let mask = s.mask(self.n);
        s.iter()
            .map(|&i| self.neighbors[i].iter().filter(|&&j| mask[j]).count())
            .collect()
    }

    /// Whether the subgraph induced by `s` is connected.
    pub fn is_connected(&self, s: &NodeSubset) -> Result<bool> {
        if s.is_empty() {
            return Err(Error::InvalidInput("connectivity of an empty subset".into()));
        }
        s.check_bounds(self.n)?;
        Ok(self.is_connected_unchecked(s.as_slice()))
    }

    pub(crate) fn is_connected_unchecked(&self, s: &[usize]) -> bool {
        let Some(&start) = s.first() else {
            return false;
        };
        let mut inside = vec![false; self.n];
        for &i in s {
            inside[i] = true;
        }
        let mut seen = vec![false; self.n];
        seen[start] = true;
        let mut reached = 1;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &self.neighbors[u] {
                if inside[v] && !seen[v] {
                    seen[v] = true;
                    reached += 1;
                    queue.push_back(v);
                }
            }
        }
        reached == s.len()
    }

    /// Connected components of the whole graph, largest first (ties by
    /// smallest member). Each component is sorted.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let all: Vec<usize> = (0..self.n).collect();
        self.components_within(&all)
    }

    /// Connected components of the subgraph induced by `s`.
    pub fn components_within(&self, s: &[usize]) -> Vec<Vec<usize>> {
        let mut inside = vec![false; self.n];
        for &i in s {
            inside[i] = true;
        }
        let mut seen = vec![false; self.n];
        let mut comps = Vec::new();
        for &root in s {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            let mut comp = vec![root];
            let mut queue = VecDeque::from([root]);
            while let Some(u) = queue.pop_front() {
                for &v in &self.neighbors[u] {
                    if inside[v] && !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        comps
    }

    /// Subgraph induced by `s`, relabelled `0..|s|` in the order of `s`.
    pub fn induced_subgraph(&self, s: &NodeSubset) -> Result<Graph> {
        s.check_bounds(self.n)?;
        let m = s.len();
        let mut adjacency = vec![0u8; m * m];
        for (a, &i) in s.iter().enumerate() {
            let row = self.row(i);
            for (b, &j) in s.iter().enumerate() {
                adjacency[a * m + b] = row[j];
            }
        }
        Graph::from_dense(m, adjacency)
    }
}

/// Sorted, duplicate-free set of node ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeSubset(Vec<usize>);

impl NodeSubset {
    /// Sorts `indices`; rejects duplicates.
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(format!("duplicate node {} in subset", w[0])));
        }
        Ok(NodeSubset(indices))
    }

    pub fn full(n: usize) -> Self {
        NodeSubset((0..n).collect())
    }

    pub(crate) fn from_sorted(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        NodeSubset(indices)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, usize> {
        self.0.iter()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.0.binary_search(&node).is_ok()
    }

    /// Position of `node` in the sorted order.
    pub fn position(&self, node: usize) -> Option<usize> {
        self.0.binary_search(&node).ok()
    }

    /// Boolean membership vector of length `n`.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for &i in &self.0 {
            mask[i] = true;
        }
        mask
    }

    /// Nodes of `0..n` not in this subset.
    pub fn complement(&self, n: usize) -> NodeSubset {
        let mask = self.mask(n);
        NodeSubset((0..n).filter(|&i| !mask[i]).collect())
    }

    pub fn intersection_len(&self, other: &NodeSubset) -> usize {
        let (mut a, mut b, mut count) = (0, 0, 0);
        while a < self.0.len() && b < other.0.len() {
            match self.0[a].cmp(&other.0[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    count += 1;
                    a += 1;
                    b += 1;
                }
            }
        }
        count
    }

    pub fn check_bounds(&self, n: usize) -> Result<()> {
        match self.0.last() {
            Some(&max) if max >= n => Err(Error::IndexOutOfRange { index: max, n }),
            _ => Ok(()),
        }
    }
}

impl std::ops::Index<usize> for NodeSubset {
    type Output = usize;

    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

impl<'a> IntoIterator for &'a NodeSubset {
    type Item = &'a usize;
    type IntoIter = std::slice::Iter<'a, usize>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// How node ids in an edge-list file are numbered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IndexBase {
    Zero,
    One,
    /// One-based when no id 0 appears in the file, zero-based otherwise.
    #[default]
    Auto,
}

/// Result of loading an edge-list file.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: Graph,
    pub stats: BuildStats,
    pub one_based: bool,
}

/// Reads a whitespace-separated edge list. Lines starting with `#` or `%`
/// are comments, blank lines are skipped and extra columns (weights,
/// timestamps) are ignored.
pub fn read_edge_list(path: impl AsRef<Path>, base: IndexBase) -> Result<LoadedGraph> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    parse_edge_list(reader, &path.display().to_string(), base)
}

pub fn parse_edge_list<R: BufRead>(reader: R, source: &str, base: IndexBase) -> Result<LoadedGraph> {
    let mut raw = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: source.to_string(),
            line: lineno + 1,
            message,
        };
        let mut tokens = trimmed.split_whitespace();
        let mut next_id = || -> Result<usize> {
            let tok = tokens.next().ok_or_else(|| parse_err("expected two node ids".into()))?;
            tok.parse::<usize>()
                .map_err(|_| parse_err(format!("invalid node id {tok:?}")))
        };
        let u = next_id()?;
        let v = next_id()?;
        raw.push((u, v, lineno + 1));
    }

    let has_zero = raw.iter().any(|&(u, v, _)| u == 0 || v == 0);
    let one_based = match base {
        IndexBase::Zero => false,
        IndexBase::One => true,
        IndexBase::Auto => !has_zero,
    };
    if one_based {
        if let Some(&(_, _, line)) = raw.iter().find(|&&(u, v, _)| u == 0 || v == 0) {
            return Err(Error::Parse {
                path: source.to_string(),
                line,
                message: "node id 0 in a one-based file".into(),
            });
        }
    }
    let shift = usize::from(one_based);
    let n = raw.iter().map(|&(u, v, _)| u.max(v) + 1 - shift).max().unwrap_or(0);
    let (graph, stats) = Graph::from_edges(n, raw.iter().map(|&(u, v, _)| (u - shift, v - shift)))?;
    if stats.self_loops + stats.duplicates > 0 {
        log::warn!(
            "{source}: dropped {} self-loops and {} duplicate edges",
            stats.self_loops,
            stats.duplicates
        );
    }
    Ok(LoadedGraph {
        graph,
        stats,
        one_based,
    })
}
