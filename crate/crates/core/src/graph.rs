//! User–item graph embeddings.
//!
//! Reviews become a weighted bipartite graph; weighted random walks over it
//! are turned into a positive pointwise mutual information (PPMI) matrix,
//! whose leading eigenpairs give each node a low-rank vector.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fmt::sig;
use crate::ingest::ReviewRecord;
use crate::rng::{self, Rng};
use crate::scalar::Scalar;
use crate::tfidf::FeatureVector;

pub const DEFAULT_WALKS_PER_NODE: usize = 10;
pub const DEFAULT_WALK_LENGTH: usize = 8;
pub const DEFAULT_WINDOW: usize = 2;
pub const DEFAULT_RANK: usize = 64;
pub const DEFAULT_ITERATIONS: usize = 100;

/// Largest tolerated `|M - Mᵀ|` entry for factorization input.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeId {
    User(String),
    Item(String),
}

impl NodeId {
    pub fn tag(&self) -> &'static str {
        match self {
            NodeId::User(_) => "user",
            NodeId::Item(_) => "item",
        }
    }

    pub fn id(&self) -> &str {
        match self {
            NodeId::User(id) | NodeId::Item(id) => id,
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.tag(), self.id())
    }
}

impl std::str::FromStr for NodeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("user", id)) => Ok(NodeId::User(id.to_owned())),
            Some(("item", id)) => Ok(NodeId::Item(id.to_owned())),
            _ => Err(Error::parse(format!("bad node label {s:?}"))),
        }
    }
}

/// Weighted undirected bipartite graph. Nodes are kept in sorted order and
/// each adjacency list is sorted by neighbor index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InteractionGraph {
    nodes: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl InteractionGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn index_of(&self, node: &NodeId) -> Option<usize> {
        self.index.get(node).copied()
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    pub fn edge_weight(&self, a: usize, b: usize) -> Option<f64> {
        self.adjacency[a]
            .binary_search_by_key(&b, |&(n, _)| n)
            .ok()
            .map(|i| self.adjacency[a][i].1)
    }
}

/// One node per distinct user and item; an edge's weight is the sum of the
/// ratings the user gave the item.
pub fn build_interaction_graph(records: &[ReviewRecord]) -> InteractionGraph {
    let mut weights: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
    for r in records {
        let key = (
            NodeId::User(r.user_id.clone()),
            NodeId::Item(r.item_id.clone()),
        );
        *weights.entry(key).or_default() += r.rating;
    }
    let mut nodes: Vec<NodeId> = weights
        .keys()
        .flat_map(|(u, i)| [u.clone(), i.clone()])
        .collect();
    nodes.sort();
    nodes.dedup();
    let index: HashMap<NodeId, usize> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i))
        .collect();
    let mut adjacency = vec![Vec::new(); nodes.len()];
    for ((u, i), w) in weights {
        let (a, b) = (index[&u], index[&i]);
        adjacency[a].push((b, w));
        adjacency[b].push((a, w));
    }
    for list in &mut adjacency {
        list.sort_by_key(|&(n, _)| n);
    }
    InteractionGraph {
        nodes,
        index,
        adjacency,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkCorpus {
    /// Node indices into the graph the walks were sampled from.
    pub walks: Vec<Vec<usize>>,
    pub node_count: usize,
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub seed: u64,
}

/// Weighted random walks of up to `walk_length` nodes from every node.
///
/// Each start node draws from its own generator seeded by `(seed, node)`, so
/// the corpus does not depend on how the work is scheduled.
pub fn sample_walks(
    graph: &InteractionGraph,
    walks_per_node: usize,
    walk_length: usize,
    seed: u64,
) -> Result<WalkCorpus> {
    if walk_length == 0 || walks_per_node == 0 {
        return Err(Error::domain(
            "walk_length and walks_per_node must be at least 1",
        ));
    }
    let per_node: Vec<Vec<Vec<usize>>> = (0..graph.node_count())
        .into_par_iter()
        .map(|start| {
            let mut rng = rng::seeded(rng::derive(seed, start as u64));
            (0..walks_per_node)
                .map(|_| walk_from(graph, start, walk_length, &mut rng))
                .collect()
        })
        .collect();
    Ok(WalkCorpus {
        walks: per_node.into_iter().flatten().collect(),
        node_count: graph.node_count(),
        walk_length,
        walks_per_node,
        seed,
    })
}

fn walk_from(
    graph: &InteractionGraph,
    start: usize,
    walk_length: usize,
    rng: &mut Rng,
) -> Vec<usize> {
    let mut walk = Vec::with_capacity(walk_length);
    walk.push(start);
    let mut current = start;
    while walk.len() < walk_length {
        let neighbors = graph.neighbors(current);
        if neighbors.is_empty() {
            break;
        }
        let total: f64 = neighbors.iter().map(|&(_, w)| w).sum();
        let mut target = rng.random::<f64>() * total;
        let mut next = neighbors[neighbors.len() - 1].0;
        for &(n, w) in neighbors {
            if target < w {
                next = n;
                break;
            }
            target -= w;
        }
        walk.push(next);
        current = next;
    }
    walk
}

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> SymMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::shape("matrix rows must all have length n"));
        }
        Ok(Self {
            n,
            data: rows.concat(),
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Largest `|M[i][j] - M[j][i]|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for j in i + 1..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// PPMI over `(center, context)` pairs within `±window` positions of each walk.
///
/// `PPMI(a, b) = max(0, ln(count(a, b) · T / (count(a) · count(b))))` where
/// `T` is the total pair count and `count(a)` the number of pairs centered on
/// `a`. Pairs that never co-occur get 0.
pub fn cooccurrence_ppmi<T: Scalar>(walks: &WalkCorpus, window: usize) -> Result<SymMatrix<T>> {
    if window == 0 {
        return Err(Error::domain("window must be at least 1"));
    }
    if walks.walks.is_empty() {
        return Ok(SymMatrix::zeros(0));
    }
    let n = walks.node_count;
    let mut pairs: HashMap<(usize, usize), u64> = HashMap::new();
    let mut marginal = vec![0u64; n];
    let mut total = 0u64;
    for walk in &walks.walks {
        for (i, &center) in walk.iter().enumerate() {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(walk.len() - 1);
            for (j, &context) in walk.iter().enumerate().take(hi + 1).skip(lo) {
                if j == i {
                    continue;
                }
                *pairs.entry((center, context)).or_default() += 1;
                marginal[center] += 1;
                total += 1;
            }
        }
    }
    let mut m = SymMatrix::zeros(n);
    let total = T::lit(total as f64);
    for (&(a, b), &count) in &pairs {
        if a > b {
            continue;
        }
        let ratio = T::lit(count as f64) * total
            / (T::lit(marginal[a] as f64) * T::lit(marginal[b] as f64));
        let v = ratio.ln().max(T::zero());
        m.set(a, b, v);
        m.set(b, a, v);
    }
    Ok(m)
}

/// Node → embedding vector, all of length `rank`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<T> {
    rank: usize,
    node_to_vector: BTreeMap<NodeId, Vec<T>>,
}

impl<T: Scalar> EmbeddingTable<T> {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            node_to_vector: BTreeMap::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.node_to_vector.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_to_vector.is_empty()
    }

    pub fn get(&self, node: &NodeId) -> Option<&[T]> {
        self.node_to_vector.get(node).map(Vec::as_slice)
    }

    pub fn insert(&mut self, node: NodeId, vector: Vec<T>) -> Result<()> {
        if vector.len() != self.rank {
            return Err(Error::shape(format!(
                "vector of length {} in a rank-{} table",
                vector.len(),
                self.rank
            )));
        }
        self.node_to_vector.insert(node, vector);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, &[T])> {
        self.node_to_vector.iter().map(|(k, v)| (k, v.as_slice()))
    }

    /// Widens every vector to `rank` with trailing zeros.
    pub fn padded(mut self, rank: usize) -> Result<Self> {
        if rank < self.rank {
            return Err(Error::shape(format!(
                "cannot pad rank {} down to {rank}",
                self.rank
            )));
        }
        for v in self.node_to_vector.values_mut() {
            v.resize(rank, T::zero());
        }
        self.rank = rank;
        Ok(self)
    }

    /// `gemb v1 <n> <rank>` header, then `<tag>:<id>\t<v1> ... <vr>` rows with
    /// 9 significant digits.
    pub fn save<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "gemb v1 {} {}", self.len(), self.rank)?;
        for (node, v) in &self.node_to_vector {
            let values: Vec<String> = v.iter().map(|x| sig(x.as_f64(), 9)).collect();
            writeln!(out, "{node}\t{}", values.join(" "))?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse("empty embedding file"))??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (n, rank) = match fields.as_slice() {
            ["gemb", "v1", n, r] => (
                n.parse::<usize>()
                    .map_err(|_| Error::parse("bad node count"))?,
                r.parse::<usize>().map_err(|_| Error::parse("bad rank"))?,
            ),
            _ => return Err(Error::parse(format!("bad embedding header {header:?}"))),
        };
        let mut table = Self::new(rank);
        for line in lines {
            let line = line?;
            let (node, values) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(format!("bad embedding row {line:?}")))?;
            let v = values
                .split_whitespace()
                .map(|s| {
                    s.parse::<f64>()
                        .map(T::lit)
                        .map_err(|_| Error::parse(format!("bad value {s:?}")))
                })
                .collect::<Result<Vec<T>>>()?;
            table.insert(node.parse()?, v)?;
        }
        if table.len() != n {
            return Err(Error::parse(format!(
                "embedding header says {n} nodes, found {}",
                table.len()
            )));
        }
        Ok(table)
    }
}

/// Leading `rank` eigenpairs of a symmetric matrix by seeded orthogonal
/// iteration followed by a Rayleigh–Ritz rotation. Returned in descending
/// eigenvalue order; each eigenvector's largest-magnitude entry is positive.
pub fn top_eigenpairs<T: Scalar>(
    matrix: &SymMatrix<T>,
    rank: usize,
    iterations: usize,
    seed: u64,
) -> Result<(Vec<T>, Vec<Vec<T>>)> {
    let n = matrix.size();
    if rank == 0 || rank > n {
        return Err(Error::domain(format!("rank {rank} must lie in [1, {n}]")));
    }
    if matrix.asymmetry().as_f64() > SYMMETRY_TOLERANCE {
        return Err(Error::domain("matrix is not symmetric"));
    }
    let sparse: Vec<Vec<(usize, T)>> = (0..n)
        .map(|i| {
            matrix
                .row(i)
                .iter()
                .enumerate()
                .filter(|(_, v)| !v.is_zero())
                .map(|(j, &v)| (j, v))
                .collect()
        })
        .collect();
    let apply = |q: &[T]| -> Vec<T> {
        sparse
            .iter()
            .map(|row| row.iter().fold(T::zero(), |acc, &(j, v)| acc + v * q[j]))
            .collect()
    };

    let mut rng = rng::seeded(seed);
    let mut basis: Vec<Vec<T>> = (0..rank).map(|_| gaussian_vector(n, &mut rng)).collect();
    orthonormalize(&mut basis, &mut rng);
    for _ in 0..iterations {
        basis = basis.par_iter().map(|q| apply(q)).collect();
        orthonormalize(&mut basis, &mut rng);
    }

    let images: Vec<Vec<T>> = basis.par_iter().map(|q| apply(q)).collect();
    let mut projected = vec![vec![T::zero(); rank]; rank];
    for a in 0..rank {
        for b in a..rank {
            let v = dot(&basis[a], &images[b]);
            projected[a][b] = v;
            projected[b][a] = v;
        }
    }
    let (values, rotation) = jacobi_eigen(projected);
    let mut order: Vec<usize> = (0..rank).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut eigenvalues = Vec::with_capacity(rank);
    let mut eigenvectors = Vec::with_capacity(rank);
    for k in order {
        let mut v = vec![T::zero(); n];
        for (b, q) in basis.iter().enumerate() {
            let s = rotation[b][k];
            for (vi, &qi) in v.iter_mut().zip(q) {
                *vi = *vi + s * qi;
            }
        }
        let pivot = v.iter().fold(
            T::zero(),
            |best, &x| if x.abs() > best.abs() { x } else { best },
        );
        if pivot < T::zero() {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        eigenvalues.push(values[k]);
        eigenvectors.push(v);
    }
    Ok((eigenvalues, eigenvectors))
}

/// Node `i` gets `[v_k[i] · sqrt(max(λ_k, 0))]` over the top `rank` eigenpairs.
/// Rows of the returned table are keyed by `nodes[i]`.
pub fn factorize_ppmi<T: Scalar>(
    matrix: &SymMatrix<T>,
    nodes: &[NodeId],
    rank: usize,
    iterations: usize,
    seed: u64,
) -> Result<EmbeddingTable<T>> {
    if nodes.len() != matrix.size() {
        return Err(Error::shape(format!(
            "{} node labels for a {}×{0} matrix",
            nodes.len(),
            matrix.size()
        )));
    }
    let (values, vectors) = top_eigenpairs(matrix, rank, iterations, seed)?;
    let scales: Vec<T> = values.iter().map(|&l| l.max(T::zero()).sqrt()).collect();
    let mut table = EmbeddingTable::new(rank);
    for (i, node) in nodes.iter().enumerate() {
        let v = vectors
            .iter()
            .zip(&scales)
            .map(|(vec, &s)| vec[i] * s)
            .collect();
        table.insert(node.clone(), v)?;
    }
    Ok(table)
}

/// The item's embedding, or zeros for an item the table has never seen.
pub fn item_feature<T: Scalar>(
    item_id: &str,
    table: &EmbeddingTable<T>,
    rank: usize,
) -> Result<Vec<T>> {
    if rank != table.rank() {
        return Err(Error::shape(format!(
            "requested rank {rank}, table has rank {}",
            table.rank()
        )));
    }
    Ok(table
        .get(&NodeId::Item(item_id.to_owned()))
        .map(<[T]>::to_vec)
        .unwrap_or_else(|| vec![T::zero(); rank]))
}

/// TF-IDF entries first, then the graph feature.
pub fn concat_features<T: Scalar>(tfidf: &FeatureVector<T>, graph_feat: &[T]) -> FeatureVector<T> {
    let mut values = Vec::with_capacity(tfidf.dimension() + graph_feat.len());
    values.extend_from_slice(&tfidf.values);
    values.extend_from_slice(graph_feat);
    FeatureVector::new(values)
}

fn gaussian_vector<T: Scalar>(n: usize, rng: &mut Rng) -> Vec<T> {
    (0..n).map(|_| T::lit(StandardNormal.sample(rng))).collect()
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Modified Gram–Schmidt with one re-orthogonalization pass. Columns that
/// collapse (rank-deficient images) are replaced by fresh random directions.
fn orthonormalize<T: Scalar>(basis: &mut [Vec<T>], rng: &mut Rng) {
    let n = basis.first().map_or(0, Vec::len);
    let collapse = T::lit(1e-10);
    for k in 0..basis.len() {
        let mut attempts = 0;
        loop {
            let scale = norm(&basis[k]);
            for _ in 0..2 {
                for j in 0..k {
                    let (done, rest) = basis.split_at_mut(k);
                    let p = dot(&done[j], &rest[0]);
                    for (x, &q) in rest[0].iter_mut().zip(&done[j]) {
                        *x = *x - p * q;
                    }
                }
            }
            let len = norm(&basis[k]);
            if len > collapse * scale.max(T::min_positive_value()) && len > T::min_positive_value()
            {
                basis[k].iter_mut().for_each(|x| *x = *x / len);
                break;
            }
            attempts += 1;
            assert!(
                attempts < 64,
                "could not extend an orthonormal basis in dimension {n}"
            );
            basis[k] = gaussian_vector(n, rng);
        }
    }
}

/// Cyclic Jacobi eigen-decomposition of a small symmetric matrix.
/// Returns eigenvalues and the matrix whose columns are the eigenvectors.
fn jacobi_eigen<T: Scalar>(mut a: Vec<Vec<T>>) -> (Vec<T>, Vec<Vec<T>>) {
    let n = a.len();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { T::one() } else { T::zero() })
                .collect()
        })
        .collect();
    let two = T::lit(2.0);
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .fold(T::zero(), |s, (i, j)| s + a[i][j] * a[i][j]);
        let diag: T = (0..n).fold(T::zero(), |s, i| s + a[i][i] * a[i][i]);
        if off <= T::epsilon() * T::epsilon() * diag || off <= T::min_positive_value() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].is_zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (two * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}
