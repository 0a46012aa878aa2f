//! Weighted undirected graphs, their derived matrices, generators and the
//! edge-list CSV format.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::numerics::{Matrix, SymMatrix};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph needs at least 2 agents, got {0}")]
    TooSmall(usize),
    #[error("edge ({i},{j}) references an agent outside 0..{n}")]
    IndexOutOfRange { i: usize, j: usize, n: usize },
    #[error("self-loop at agent {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0},{1})")]
    DuplicateEdge(usize, usize),
    #[error("edge ({i},{j}) has non-positive weight {w}")]
    NonPositiveWeight { i: usize, j: usize, w: f64 },
    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Edge `{i, j}` with `i < j` and weight `w > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

/// Simple, connected, undirected graph with positive edge weights.
///
/// Validation happens once in [`WeightedGraph::new`]; every later operation
/// may assume connectivity.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<Edge>,
    neighbors: Vec<Vec<(usize, f64)>>,
    degrees: Vec<f64>,
}

impl WeightedGraph {
    /// Validates and builds a graph from `(i, j, w)` triples.
    pub fn new(n: usize, weighted_edges: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooSmall(n));
        }
        let mut seen = BTreeSet::new();
        let mut edges = Vec::with_capacity(weighted_edges.len());
        for &(i, j, w) in weighted_edges {
            if i >= n || j >= n {
                return Err(GraphError::IndexOutOfRange { i, j, n });
            }
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(GraphError::NonPositiveWeight { i, j, w });
            }
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            if !seen.insert((a, b)) {
                return Err(GraphError::DuplicateEdge(a, b));
            }
            edges.push(Edge { i: a, j: b, w });
        }
        let components = count_components(n, edges.iter().map(|e| (e.i, e.j)));
        if components != 1 {
            return Err(GraphError::Disconnected { components });
        }
        let mut neighbors = vec![Vec::new(); n];
        for e in &edges {
            neighbors[e.i].push((e.j, e.w));
            neighbors[e.j].push((e.i, e.w));
        }
        // Degrees are summed in neighbor order, the same order the update rule
        // uses for Σ w_ij x_j; see `dynamics::step`.
        let degrees = neighbors.iter().map(|nb| nb.iter().map(|&(_, w)| w).sum()).collect();
        Ok(Self { n, edges, neighbors, degrees })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// `(neighbor, weight)` pairs of agent `i`.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    /// Weighted degrees `d_i = Σ_j w_ij`.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// `xᵀLx = Σ_{edges} w_ij (x_i − x_j)²`
    pub fn laplacian_form(&self, x: &[f64]) -> f64 {
        self.edges.iter().map(|e| e.w * (x[e.i] - x[e.j]).powi(2)).sum()
    }

    /// `L·x` computed from the edge list.
    pub fn laplacian_mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.neighbors[i].iter().map(|&(j, w)| w * (x[i] - x[j])).sum()).collect()
    }

    /// Stable 64-bit FNV-1a digest of `n` and the edge list.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for b in bytes {
                h ^= u64::from(*b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        feed(&(self.n as u64).to_le_bytes());
        for e in &self.edges {
            feed(&(e.i as u64).to_le_bytes());
            feed(&(e.j as u64).to_le_bytes());
            feed(&e.w.to_bits().to_le_bytes());
        }
        h
    }

    pub fn matrices(&self) -> GraphMatrices {
        derive_matrices(self)
    }
}

impl fmt::Display for WeightedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WeightedGraph(n={}, edges={})", self.n, self.edges.len())
    }
}

/// Adjacency, degree and Laplacian matrices of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphMatrices {
    pub adjacency: Matrix,
    pub degree: Matrix,
    pub laplacian: Matrix,
}

impl GraphMatrices {
    pub fn n(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn laplacian_sym(&self) -> SymMatrix {
        SymMatrix::new(self.laplacian.clone()).expect("laplacian is square")
    }
}

pub fn derive_matrices(g: &WeightedGraph) -> GraphMatrices {
    let n = g.n;
    let mut adjacency = Matrix::zeros(n, n);
    for e in &g.edges {
        adjacency[(e.i, e.j)] = e.w;
        adjacency[(e.j, e.i)] = e.w;
    }
    let degree = Matrix::from_diagonal(&g.degrees);
    let laplacian = degree.add_scaled(-1.0, &adjacency);
    GraphMatrices { adjacency, degree, laplacian }
}

fn count_components(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = n;
    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            components -= 1;
        }
    }
    components
}

/// Barabási–Albert graph with unit weights.
///
/// The seed component is a path on `m` nodes (a single node when `m = 1`).
/// Each new node then attaches to `m` distinct existing nodes sampled with
/// probability proportional to degree. Nodes with degree zero (only the lone
/// seed node when `m = 1`) get weight one so the first attachment is defined.
pub fn generate_barabasi_albert(n: usize, m: usize, seed: u64) -> Result<WeightedGraph, GraphError> {
    if m < 1 || n <= m {
        return Err(GraphError::InvalidParams(format!("need n > m >= 1, got n={n}, m={m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize, f64)> = (1..m).map(|i| (i - 1, i, 1.0)).collect();
    let mut degree = vec![0usize; n];
    for &(a, b, _) in &edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    for new in m..n {
        let mut chosen: Vec<usize> = Vec::with_capacity(m);
        while chosen.len() < m {
            let weight = |v: usize| degree[v].max(1) as f64;
            let total: f64 = (0..new).filter(|v| !chosen.contains(v)).map(weight).sum();
            let mut target = rng.gen::<f64>() * total;
            let mut pick = None;
            for v in (0..new).filter(|v| !chosen.contains(v)) {
                target -= weight(v);
                pick = Some(v);
                if target < 0.0 {
                    break;
                }
            }
            chosen.push(pick.expect("at least one candidate remains"));
        }
        for &v in &chosen {
            edges.push((v, new, 1.0));
            degree[v] += 1;
            degree[new] += 1;
        }
    }
    WeightedGraph::new(n, &edges)
}

/// Disjoint cliques with intra-clique weight `intra_w`, joined by bridge edges
/// given in global node indices (clique `c` occupies a contiguous index block).
pub fn generate_clique_clusters(
    sizes: &[usize],
    intra_w: f64,
    bridge_edges: &[(usize, usize, f64)],
) -> Result<WeightedGraph, GraphError> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(GraphError::InvalidParams("clique sizes must be >= 1".into()));
    }
    let offsets = clique_offsets(sizes);
    let n: usize = sizes.iter().sum();
    let clique_of = |v: usize| offsets.iter().rposition(|&o| o <= v).unwrap_or(0);
    let mut edges = Vec::new();
    for (c, &size) in sizes.iter().enumerate() {
        let base = offsets[c];
        for a in 0..size {
            for b in (a + 1)..size {
                edges.push((base + a, base + b, intra_w));
            }
        }
    }
    for &(i, j, w) in bridge_edges {
        if i < n && j < n && clique_of(i) == clique_of(j) {
            return Err(GraphError::InvalidParams(format!("bridge ({i},{j}) stays inside one clique")));
        }
        edges.push((i, j, w));
    }
    WeightedGraph::new(n, &edges)
}

/// Bridges linking clique `c` to clique `c + 1`: last node of one to the
/// first node of the next.
pub fn chain_bridges(sizes: &[usize], w: f64) -> Vec<(usize, usize, f64)> {
    let offsets = clique_offsets(sizes);
    (0..sizes.len().saturating_sub(1)).map(|c| (offsets[c] + sizes[c] - 1, offsets[c + 1], w)).collect()
}

fn clique_offsets(sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .scan(0, |acc, &s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect()
}

/// Random connected graph: a random spanning tree plus every other pair with
/// probability `extra_p`. Weights are uniform in `(0, max_w]`.
pub fn generate_random_connected(n: usize, extra_p: f64, max_w: f64, seed: u64) -> Result<WeightedGraph, GraphError> {
    if n < 2 || !(0.0..=1.0).contains(&extra_p) || !(max_w > 0.0) {
        return Err(GraphError::InvalidParams(format!("n={n}, extra_p={extra_p}, max_w={max_w}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let weight = |rng: &mut ChaCha8Rng| max_w * (1.0 - rng.gen::<f64>());
    let mut pairs = BTreeSet::new();
    let mut edges = Vec::new();
    for k in 1..n {
        let parent = order[rng.gen_range(0..k)];
        let child = order[k];
        let key = (parent.min(child), parent.max(child));
        pairs.insert(key);
        edges.push((key.0, key.1, weight(&mut rng)));
    }
    for a in 0..n {
        for b in (a + 1)..n {
            if !pairs.contains(&(a, b)) && rng.gen::<f64>() < extra_p {
                edges.push((a, b, weight(&mut rng)));
            }
        }
    }
    WeightedGraph::new(n, &edges)
}

/// Reads the `i,j,w` edge-list CSV. The weight column may be omitted
/// (header `i,j`, or an empty third field) and then defaults to 1.0. The agent
/// count is one more than the largest index seen.
pub fn read_edge_list(path: impl AsRef<Path>) -> Result<WeightedGraph, GraphError> {
    let file = std::fs::File::open(path)?;
    parse_edge_list(std::io::BufReader::new(file))
}

pub fn parse_edge_list(reader: impl BufRead) -> Result<WeightedGraph, GraphError> {
    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, line)) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => return Err(GraphError::Parse { line: 1, msg: "empty file".into() }),
        }
    };
    let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
    if cols != ["i", "j", "w"] && cols != ["i", "j"] {
        return Err(GraphError::Parse { line: 1, msg: format!("expected header `i,j,w`, got `{header}`") });
    }
    let mut edges = Vec::new();
    let mut max_index = 0usize;
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(GraphError::Parse {
                line: lineno,
                msg: format!("expected 2 or 3 fields, got {}", fields.len()),
            });
        }
        let parse_idx = |s: &str| {
            s.parse::<usize>().map_err(|e| GraphError::Parse { line: lineno, msg: format!("bad index `{s}`: {e}") })
        };
        let i = parse_idx(fields[0])?;
        let j = parse_idx(fields[1])?;
        let w = match fields.get(2) {
            Some(s) if !s.is_empty() => s
                .parse::<f64>()
                .map_err(|e| GraphError::Parse { line: lineno, msg: format!("bad weight `{s}`: {e}") })?,
            _ => 1.0,
        };
        max_index = max_index.max(i).max(j);
        edges.push((i, j, w));
    }
    if edges.is_empty() {
        return Err(GraphError::Parse { line: 2, msg: "no edges".into() });
    }
    WeightedGraph::new(max_index + 1, &edges)
}

pub fn write_edge_list(g: &WeightedGraph, path: impl AsRef<Path>) -> Result<(), GraphError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    format_edge_list(g, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn format_edge_list(g: &WeightedGraph, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "i,j,w")?;
    for e in &g.edges {
        writeln!(out, "{},{},{}", e.i, e.j, e.w)?;
    }
    Ok(())
}
