//! Undirected graphs over dense node ids and the Erdős–Rényi generator used
//! by the coloring benchmarks.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Seed for every randomized component. Equal seeds give equal outputs.
pub type RngSeed = u64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("node {node} out of range for graph with {node_count} nodes")]
    InvalidNode { node: u32, node_count: usize },
    #[error("invalid edge ({0}, {1})")]
    InvalidEdge(u32, u32),
    #[error("edge list format error on line {line}: {reason}")]
    Format { line: usize, reason: String },
}

/// Immutable undirected simple graph. Adjacency lists are sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<u32>>,
    edge_count: usize,
}

impl Graph {
    pub fn empty(node_count: usize) -> Self {
        Graph {
            adj: vec![Vec::new(); node_count],
            edge_count: 0,
        }
    }

    /// Builds a graph from unordered pairs. Self-loops, out-of-range
    /// endpoints and repeated pairs are rejected.
    pub fn from_edges<I>(node_count: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (u32, u32)>,
    {
        let mut adj = vec![Vec::new(); node_count];
        let mut edge_count = 0;
        for (u, v) in edges {
            if u == v || u as usize >= node_count || v as usize >= node_count {
                return Err(GraphError::InvalidEdge(u, v));
            }
            adj[u as usize].push(v);
            adj[v as usize].push(u);
            edge_count += 1;
        }
        for (u, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                let dup = list.windows(2).find(|w| w[0] == w[1]).unwrap()[0];
                return Err(GraphError::InvalidEdge(u as u32, dup));
            }
        }
        Ok(Graph { adj, edge_count })
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Sorted neighbors of `v`.
    pub fn neighbors(&self, v: u32) -> Result<&[u32], GraphError> {
        self.adj
            .get(v as usize)
            .map(Vec::as_slice)
            .ok_or(GraphError::InvalidNode {
                node: v,
                node_count: self.adj.len(),
            })
    }

    pub fn degree(&self, v: u32) -> Result<usize, GraphError> {
        self.neighbors(v).map(<[u32]>::len)
    }

    /// Largest vertex degree, 0 for edgeless (or empty) graphs.
    pub fn max_vertex_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.adj
            .get(u as usize)
            .is_some_and(|list| list.binary_search(&v).is_ok())
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.adj.iter().enumerate().flat_map(|(u, list)| {
            let u = u as u32;
            list.iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    pub(crate) fn adjacency(&self) -> &[Vec<u32>] {
        &self.adj
    }

    /// Plain-text dump: first line `n m`, then one `u v` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{} {}\n", self.node_count(), self.edge_count);
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn parse_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines.next().ok_or(GraphError::Format {
            line: 1,
            reason: "missing header".into(),
        })?;
        let nums = parse_pair(header).ok_or_else(|| GraphError::Format {
            line: hline + 1,
            reason: "header must be `n m`".into(),
        })?;
        let (n, m) = (nums.0 as usize, nums.1 as usize);
        let mut edges = Vec::with_capacity(m);
        for (i, line) in lines {
            let pair = parse_pair(line).ok_or_else(|| GraphError::Format {
                line: i + 1,
                reason: "edge must be `u v`".into(),
            })?;
            edges.push(pair);
        }
        if edges.len() != m {
            return Err(GraphError::Format {
                line: 1,
                reason: format!("header declares {m} edges, found {}", edges.len()),
            });
        }
        Graph::from_edges(n, edges)
    }
}

fn parse_pair(line: &str) -> Option<(u32, u32)> {
    let mut it = line.split_whitespace();
    let a = it.next()?.parse().ok()?;
    let b = it.next()?.parse().ok()?;
    it.next().is_none().then_some((a, b))
}

/// G(n, p) random graph with `p = c / (n - 1)`, so the expected vertex
/// degree is `c`.
///
/// Pairs are visited in lexicographic order using geometric skips between
/// successive included pairs, which samples exactly the same distribution as
/// one Bernoulli trial per pair in O(n + m) time.
pub fn erdos_renyi(n: usize, c: f64, seed: RngSeed) -> Result<Graph, GraphError> {
    if n == 0 {
        return Err(GraphError::InvalidParameter(
            "node count must be >= 1".into(),
        ));
    }
    let max_c = (n - 1) as f64;
    if !c.is_finite() || c < 0.0 || c > max_c {
        return Err(GraphError::InvalidParameter(format!(
            "average degree {c} outside [0, {max_c}]"
        )));
    }
    let p = if n == 1 { 0.0 } else { c / max_c };
    let mut adj = vec![Vec::new(); n];
    let mut edge_count = 0;
    if p >= 1.0 {
        for u in 0..n {
            for v in (u + 1)..n {
                adj[u].push(v as u32);
                adj[v].push(u as u32);
                edge_count += 1;
            }
        }
    } else if p > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let log_q = (1.0 - p).ln();
        // Batagelj–Brandes: v walks the upper triangle row by row.
        let (mut v, mut w): (usize, i64) = (1, -1);
        while v < n {
            let r: f64 = rng.random();
            let skip = ((1.0 - r).ln() / log_q).floor();
            w += 1 + if skip.is_finite() {
                skip as i64
            } else {
                i64::MAX / 4
            };
            while w >= v as i64 && v < n {
                w -= v as i64;
                v += 1;
            }
            if v < n {
                let u = w as usize;
                adj[u].push(v as u32);
                adj[v].push(u as u32);
                edge_count += 1;
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    Ok(Graph { adj, edge_count })
}
