//! Undirected weighted graphs with node features, labels and split masks.

mod cora;
mod spectral;
mod synth;

use std::collections::{HashSet, VecDeque};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use cora::{load_cora, CoraLoad, SplitSizes};
pub use spectral::{eigendecompose, SpectralBasis};
pub use synth::{synth_graph, SbmSpec, SynthSpec};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(i: usize, j: usize) -> Self {
        Self::weighted(i, j, 1.0)
    }

    pub fn weighted(i: usize, j: usize, weight: f64) -> Self {
        Self { i, j, weight }
    }

    fn key(&self) -> (usize, usize) {
        (self.i.min(self.j), self.i.max(self.j))
    }
}

/// Train / validation / test node index sets.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Masks {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LaplacianKind {
    /// `D - A`
    Combinatorial,
    /// `I - D^{-1/2} A D^{-1/2}`
    SymmetricNormalized,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    features: Matrix,
    edges: Vec<Edge>,
    labels: Option<Vec<usize>>,
    masks: Masks,
}

impl Graph {
    /// Validates and canonicalizes a graph. Edges are stored with `i < j`,
    /// sorted; duplicates and self loops are rejected.
    pub fn new(features: Matrix, edges: Vec<Edge>, labels: Option<Vec<usize>>, masks: Masks) -> Result<Self> {
        let n = features.rows();
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no nodes".into()));
        }
        if !features.is_finite() {
            return Err(Error::InvalidGraph("non-finite feature entry".into()));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut canon = Vec::with_capacity(edges.len());
        for e in edges {
            if e.i >= n || e.j >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) has an endpoint outside [0, {n})",
                    e.i, e.j
                )));
            }
            if e.i == e.j {
                return Err(Error::InvalidGraph(format!("self loop at node {}", e.i)));
            }
            if !e.weight.is_finite() {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) has non-finite weight",
                    e.i, e.j
                )));
            }
            let (i, j) = e.key();
            if !seen.insert((i, j)) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({i}, {j})")));
            }
            canon.push(Edge::weighted(i, j, e.weight));
        }
        canon.sort_by_key(|e| (e.i, e.j));

        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::InvalidGraph(format!("{} labels for {n} nodes", labels.len())));
            }
        }
        let mut used = HashSet::new();
        for (name, set) in [("train", &masks.train), ("val", &masks.val), ("test", &masks.test)] {
            for &idx in set {
                if idx >= n {
                    return Err(Error::InvalidGraph(format!("{name} mask index {idx} >= {n}")));
                }
                if !used.insert(idx) {
                    return Err(Error::InvalidGraph(format!("node {idx} appears twice across masks")));
                }
            }
        }

        Ok(Self {
            features,
            edges: canon,
            labels,
            masks,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn masks(&self) -> &Masks {
        &self.masks
    }

    /// Number of classes, `max(label) + 1`.
    pub fn n_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().copied().max().map_or(0, |m| m + 1))
    }

    pub fn require_labels(&self) -> Result<&[usize]> {
        self.labels().ok_or_else(|| Error::precondition("graph has no labels"))
    }

    /// Same nodes, features, labels and masks with a different edge set.
    pub fn with_edges(&self, edges: Vec<Edge>) -> Result<Graph> {
        Graph::new(self.features.clone(), edges, self.labels.clone(), self.masks.clone())
    }

    pub fn with_masks(&self, masks: Masks) -> Result<Graph> {
        Graph::new(self.features.clone(), self.edges.clone(), self.labels.clone(), masks)
    }

    /// Copy whose feature rows are scaled to sum to one (zero rows kept).
    pub fn row_normalized(&self) -> Graph {
        let mut f = self.features.clone();
        for i in 0..f.rows() {
            let s: f64 = f.row(i).iter().sum();
            if s != 0.0 {
                f.row_mut(i).iter_mut().for_each(|v| *v /= s);
            }
        }
        Graph {
            features: f,
            ..self.clone()
        }
    }

    /// Dense symmetric adjacency with `A[i][j] = ω_ij` and a zero diagonal.
    pub fn adjacency(&self) -> Matrix {
        let n = self.n_nodes();
        let mut a = Matrix::zeros(n, n);
        for e in &self.edges {
            a[(e.i, e.j)] = e.weight;
            a[(e.j, e.i)] = e.weight;
        }
        a
    }

    /// Weighted degrees.
    pub fn degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_nodes()];
        for e in &self.edges {
            d[e.i] += e.weight;
            d[e.j] += e.weight;
        }
        d
    }

    /// Unweighted neighbor lists, sorted.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes()];
        for e in &self.edges {
            adj[e.i].push(e.j);
            adj[e.j].push(e.i);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn laplacian(&self, kind: LaplacianKind) -> Matrix {
        laplacian_from_adjacency(&self.adjacency(), kind)
    }

    /// Hop distance from `source` to every node (`None` when unreachable).
    pub fn hop_distances(&self, source: usize) -> Vec<Option<usize>> {
        let adj = self.neighbors();
        let mut dist = vec![None; self.n_nodes()];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for &v in &adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.hop_distances(0).iter().all(Option::is_some)
    }

    pub fn to_json(&self) -> GraphFile {
        GraphFile {
            n_nodes: self.n_nodes(),
            features: (0..self.n_nodes()).map(|i| self.features.row(i).to_vec()).collect(),
            edges: self.edges.iter().map(|e| (e.i, e.j, e.weight)).collect(),
            labels: self.labels.clone(),
            masks: self.masks.clone(),
        }
    }

    pub fn from_json(file: GraphFile) -> Result<Self> {
        if file.features.len() != file.n_nodes {
            return Err(Error::InvalidGraph(format!(
                "n_nodes = {} but {} feature rows",
                file.n_nodes,
                file.features.len()
            )));
        }
        let features = Matrix::from_rows(&file.features)?;
        let edges = file
            .edges
            .into_iter()
            .map(|(i, j, w)| Edge::weighted(i, j, w))
            .collect();
        Graph::new(features, edges, file.labels, file.masks)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string(&self.to_json())?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(serde_json::from_str(&text)?)
    }
}

/// Native on-disk graph document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub n_nodes: usize,
    pub features: Vec<Vec<f64>>,
    pub edges: Vec<(usize, usize, f64)>,
    pub labels: Option<Vec<usize>>,
    #[serde(default)]
    pub masks: Masks,
}

/// Laplacian of an arbitrary symmetric weighted adjacency. Degree-0 rows of
/// the normalized form are identity rows.
pub fn laplacian_from_adjacency(a: &Matrix, kind: LaplacianKind) -> Matrix {
    let n = a.rows();
    let deg = a.row_sums();
    let mut l = Matrix::zeros(n, n);
    match kind {
        LaplacianKind::Combinatorial => {
            for i in 0..n {
                for j in 0..n {
                    l[(i, j)] = if i == j { deg[i] - a[(i, j)] } else { -a[(i, j)] };
                }
            }
        }
        LaplacianKind::SymmetricNormalized => {
            let inv_sqrt: Vec<f64> = deg
                .iter()
                .map(|d| if *d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
                .collect();
            for i in 0..n {
                for j in 0..n {
                    let off = a[(i, j)] * inv_sqrt[i] * inv_sqrt[j];
                    l[(i, j)] = if i == j { 1.0 - off } else { -off };
                }
            }
        }
    }
    l
}

/// Edge list of a symmetric adjacency (upper triangle, nonzero entries).
pub fn edges_from_adjacency(a: &Matrix) -> Vec<Edge> {
    let n = a.rows();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if a[(i, j)] != 0.0 {
                out.push(Edge::weighted(i, j, a[(i, j)]));
            }
        }
    }
    out
}
