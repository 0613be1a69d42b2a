//! K-parent DAGs over index-ordered nodes. Every edge (j,i) points forward
//! (j < i), so acyclicity is a construction invariant rather than something to
//! check. Node ids are 0-based internally; the JSON/CSV wire formats are
//! 1-based.
//!
//! Besides construction and the builtin benchmark graphs, this module computes
//! the two distance notions the concentration analysis needs: plain undirected
//! shortest paths (`dist`) and the common-ancestor "trek" distance
//! (`trek_dist`). Because root states are drawn jointly from the stationary
//! distribution, adjacent roots are statistically dependent; both distance
//! matrices therefore include a virtual chain linking the roots in id order,
//! enabled exactly when the graph is sampler-admissible (|roots| == K >= 1).
//! On those graphs trek_dist is infinite precisely for independent node pairs.

use crate::linalg::Matrix;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("edge ({j},{i}) violates the ordering j < i (1-based)")]
    EdgeOrderViolation { j: usize, i: usize },
    #[error("duplicate edge ({j},{i}) (1-based)")]
    DuplicateEdge { j: usize, i: usize },
    #[error("edge ({j},{i}) references a node outside 1..={t} (1-based)")]
    OutOfRange { j: usize, i: usize, t: usize },
    #[error("uniform mode: node {node} (1-based) has in-degree {got}, expected 0 or {want}")]
    InDegreeMismatch { node: usize, got: usize, want: usize },
    #[error("node count must be at least 1")]
    EmptyGraph,
    #[error("{0} outside the open interval (0,1)")]
    DomainError(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Uniform,
    NonUniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dag {
    t: usize,
    mode: Mode,
    edges: Vec<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    roots: Vec<usize>,
    k: usize,
}

impl Dag {
    /// Builds a DAG from 0-based edges (j,i) with j < i. In uniform mode every
    /// non-root node must have in-degree equal to the maximum in-degree K.
    pub fn build(t: usize, edges: &[(usize, usize)], mode: Mode) -> Result<Dag, GraphError> {
        if t == 0 {
            return Err(GraphError::EmptyGraph);
        }
        let mut sorted: Vec<(usize, usize)> = edges.to_vec();
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(GraphError::DuplicateEdge { j: w[0].0 + 1, i: w[0].1 + 1 });
            }
        }
        for &(j, i) in &sorted {
            if i >= t {
                return Err(GraphError::OutOfRange { j: j + 1, i: i + 1, t });
            }
            if j >= i {
                return Err(GraphError::EdgeOrderViolation { j: j + 1, i: i + 1 });
            }
        }
        let mut parents = vec![Vec::new(); t];
        for &(j, i) in &sorted {
            parents[i].push(j);
        }
        for p in &mut parents {
            p.sort_unstable();
        }
        let k = parents.iter().map(Vec::len).max().unwrap_or(0);
        if mode == Mode::Uniform {
            for (node, p) in parents.iter().enumerate() {
                if !p.is_empty() && p.len() != k {
                    return Err(GraphError::InDegreeMismatch {
                        node: node + 1,
                        got: p.len(),
                        want: k,
                    });
                }
            }
        }
        let roots = (0..t).filter(|&i| parents[i].is_empty()).collect();
        Ok(Dag { t, mode, edges: sorted, parents, roots, k })
    }

    /// The 5-node benchmark graph.
    pub fn five() -> Dag {
        Dag::build(5, &to0(&[(1, 3), (1, 4), (2, 3), (2, 5), (3, 4), (4, 5)]), Mode::Uniform)
            .unwrap()
    }

    /// The 10-node benchmark graph with 16 edges.
    pub fn ten() -> Dag {
        let e = [
            (1, 3),
            (1, 4),
            (1, 10),
            (2, 3),
            (2, 5),
            (2, 6),
            (2, 7),
            (3, 4),
            (3, 8),
            (4, 5),
            (4, 7),
            (5, 6),
            (6, 9),
            (7, 8),
            (7, 10),
            (8, 9),
        ];
        Dag::build(10, &to0(&e), Mode::Uniform).unwrap()
    }

    /// The 10-node benchmark graph with mixed in-degrees (nodes 3, 7, 9 have a
    /// single parent).
    pub fn nonuniform_ten() -> Dag {
        let e = [
            (1, 3),
            (2, 4),
            (3, 4),
            (1, 5),
            (4, 5),
            (3, 6),
            (4, 6),
            (5, 7),
            (6, 8),
            (7, 8),
            (8, 9),
            (6, 10),
            (9, 10),
        ];
        Dag::build(10, &to0(&e), Mode::NonUniform).unwrap()
    }

    pub fn by_name(name: &str) -> Option<Dag> {
        match name {
            "five" => Some(Dag::five()),
            "ten" => Some(Dag::ten()),
            "nonuniform_ten" => Some(Dag::nonuniform_ten()),
            _ => None,
        }
    }

    /// m disjoint copies of this graph on m*T nodes; copy c occupies the id
    /// block [c*T, (c+1)*T). Copies share no edges, so per-copy structure (and
    /// any per-copy table gap) is unchanged.
    pub fn disjoint_copies(&self, m: usize) -> Dag {
        assert!(m >= 1);
        let mut edges = Vec::with_capacity(self.edges.len() * m);
        for c in 0..m {
            let off = c * self.t;
            edges.extend(self.edges.iter().map(|&(j, i)| (j + off, i + off)));
        }
        Dag::build(self.t * m, &edges, self.mode).unwrap()
    }

    pub fn node_count(&self) -> usize {
        self.t
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Maximum in-degree; the K of "K-parent DAG".
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Parents of `i` in ascending id order: slot l of node i is parents(i)[l].
    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.parents[i].len()
    }

    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    pub fn is_root(&self, i: usize) -> bool {
        self.parents[i].is_empty()
    }

    pub fn adjacency(&self) -> Matrix {
        let mut a = Matrix::zeros(self.t, self.t);
        for &(j, i) in &self.edges {
            a.set(j, i, 1.0);
        }
        a
    }

    pub fn has_edge(&self, j: usize, i: usize) -> bool {
        self.edges.binary_search(&(j, i)).is_ok()
    }

    fn root_chain_active(&self) -> bool {
        self.k >= 1 && self.roots.len() == self.k
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "T": self.t,
            "edges": self.edges.iter().map(|&(j, i)| vec![j + 1, i + 1]).collect::<Vec<_>>(),
            "mode": match self.mode { Mode::Uniform => "uniform", Mode::NonUniform => "nonuniform" },
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Dag, GraphError> {
        let t = v["T"].as_u64().ok_or(GraphError::EmptyGraph)? as usize;
        let mode = match v["mode"].as_str() {
            Some("nonuniform") => Mode::NonUniform,
            _ => Mode::Uniform,
        };
        let mut edges = Vec::new();
        if let Some(arr) = v["edges"].as_array() {
            for e in arr {
                let j = e[0].as_u64().unwrap_or(0) as usize;
                let i = e[1].as_u64().unwrap_or(0) as usize;
                if j == 0 || i == 0 {
                    return Err(GraphError::OutOfRange { j, i, t });
                }
                edges.push((j - 1, i - 1));
            }
        }
        Dag::build(t, &edges, mode)
    }
}

fn to0(edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    edges.iter().map(|&(j, i)| (j - 1, i - 1)).collect()
}

/// Distance value with infinity as a sentinel strictly greater than any
/// realizable path length.
pub const fn unreachable_sentinel(t: usize) -> u32 {
    t as u32 + 1
}

#[derive(Debug, Clone)]
pub struct GraphDiagnostics {
    pub t: usize,
    /// Undirected shortest-path lengths, root chain included when active.
    pub dist: Vec<Vec<u32>>,
    /// Min over common ancestors k of directed d(k,i) + d(k,j), root chain
    /// included when active.
    pub trek_dist: Vec<Vec<u32>>,
    /// Max over nodes i and radii m of the number of nodes at dist exactly m.
    pub l_bound: usize,
}

impl GraphDiagnostics {
    pub fn is_unreachable(&self, d: u32) -> bool {
        d > self.t as u32
    }
}

fn bfs(adj: &[Vec<usize>], start: usize, inf: u32) -> Vec<u32> {
    let mut d = vec![inf; adj.len()];
    d[start] = 0;
    let mut q = VecDeque::from([start]);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if d[v] == inf {
                d[v] = d[u] + 1;
                q.push_back(v);
            }
        }
    }
    d
}

pub fn diagnostics(dag: &Dag) -> GraphDiagnostics {
    let t = dag.node_count();
    let inf = unreachable_sentinel(t);
    let chain: Vec<(usize, usize)> = if dag.root_chain_active() {
        dag.roots().windows(2).map(|w| (w[0], w[1])).collect()
    } else {
        Vec::new()
    };

    let mut undirected = vec![Vec::new(); t];
    for &(j, i) in dag.edges().iter().chain(chain.iter()) {
        undirected[j].push(i);
        undirected[i].push(j);
    }
    let dist: Vec<Vec<u32>> = (0..t).map(|s| bfs(&undirected, s, inf)).collect();

    let mut down = vec![Vec::new(); t];
    for &(j, i) in dag.edges().iter().chain(chain.iter()) {
        down[j].push(i);
    }
    let downstream: Vec<Vec<u32>> = (0..t).map(|s| bfs(&down, s, inf)).collect();
    let mut trek = vec![vec![inf; t]; t];
    for i in 0..t {
        for j in 0..t {
            let mut best = inf;
            for anc in 0..t {
                let di = downstream[anc][i];
                let dj = downstream[anc][j];
                if di < inf && dj < inf {
                    best = best.min(di + dj);
                }
            }
            trek[i][j] = best.min(inf);
        }
    }

    let mut l_bound = 1;
    for row in &dist {
        let mut counts = vec![0usize; t + 1];
        for &d in row {
            if d <= t as u32 {
                counts[d as usize] += 1;
            }
        }
        l_bound = l_bound.max(counts.into_iter().max().unwrap_or(1));
    }

    GraphDiagnostics { t, dist, trek_dist: trek, l_bound }
}

/// lambda^d with the sentinel treated as infinity (contributes 0).
pub fn lambda_pow(lambda: f64, d: u32, t: usize) -> f64 {
    if d > t as u32 {
        0.0
    } else {
        lambda.powi(d as i32)
    }
}

/// T^2 / sum_{i,j} lambda^dist(i,j), the effective sequence length.
pub fn effective_sequence_length(dag: &Dag, lambda: f64) -> Result<f64, GraphError> {
    if !(0.0 < lambda && lambda < 1.0) {
        return Err(GraphError::DomainError(lambda));
    }
    let diag = diagnostics(dag);
    let t = dag.node_count();
    let mut denom = 0.0;
    for i in 0..t {
        for j in 0..t {
            denom += lambda_pow(lambda, diag.dist[i][j], t);
        }
    }
    Ok((t * t) as f64 / denom)
}
