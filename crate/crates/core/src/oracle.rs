//! Brute-force shortest-path oracle for the Finsler distance.
//!
//! Nodes are sampled uniformly on the space (inside a box for Euclidean
//! factors) and joined to their `k` nearest `h`-neighbours. The adjacency is
//! symmetrised, so the graph is strongly connected whenever it is connected;
//! only the edge weights are direction dependent. The weight of `i -> j` is
//! the `F`-length of the `h`-geodesic segment estimated by the midpoint rule.
//!
//! Queries attach the two endpoints as virtual nodes linked to their `k`
//! nearest graph nodes and run Dijkstra. Every path is a real piecewise
//! geodesic curve, so up to the quadrature error the estimate is an upper
//! bound for the true distance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::randers::NavigationData;
use crate::sampling::{self, DEFAULT_BOX};
use crate::space::{Factor, Point, SpaceDescriptor};
use crate::{Error, Result};

/// Environment variable naming the graph cache directory.
pub const CACHE_ENV: &str = "RANDERS_LAB_CACHE";
pub const CACHE_FORMAT: &str = "randers-lab-netgraph";
pub const CACHE_VERSION: u32 = 1;
pub const MIN_NODES: usize = 100;
/// How many times `k` is doubled before a disconnected graph is an error.
pub const CONNECT_RETRIES: usize = 3;
/// Error hint is `ERROR_CONSTANT * epsilon`. Calibrated by the convergence
/// runs in the test suite: observed errors stay below a third of this.
pub const ERROR_CONSTANT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphKey {
    pub space: SpaceDescriptor,
    pub n_nodes: usize,
    pub k: usize,
    pub seed: u64,
    /// Half width of the sampling box for Euclidean factors.
    #[serde(default = "default_box")]
    pub half_width: f64,
}

fn default_box() -> f64 {
    DEFAULT_BOX
}

impl GraphKey {
    pub fn new(space: &SpaceDescriptor, n_nodes: usize, k: usize, seed: u64) -> Self {
        Self { space: space.clone(), n_nodes, k, seed, half_width: DEFAULT_BOX }
    }

    pub fn with_box(mut self, half_width: f64) -> Self {
        self.half_width = half_width;
        self
    }

    fn digest(&self) -> String {
        hex(&Sha256::digest(serde_json::to_vec(self).expect("key serialises")))
    }
}

/// An undirected `k`-nearest-neighbour graph over sampled points. Weights
/// are attached per navigation data by [`NetGraph::weigh`].
#[derive(Debug, Clone)]
pub struct NetGraph {
    key: GraphKey,
    nodes: Vec<Point>,
    neighbors: Vec<Vec<u32>>,
    epsilon: f64,
    k_used: usize,
}

/// Serialised form of a [`NetGraph`] with a versioned header.
#[derive(Serialize, Deserialize)]
struct CacheFile {
    format: String,
    version: u32,
    key: GraphKey,
    hash: String,
    epsilon: f64,
    k_used: usize,
    nodes: Vec<Vec<f64>>,
    neighbors: Vec<Vec<u32>>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Builds the graph, doubling `k` up to [`CONNECT_RETRIES`] times if the
/// first attempt is disconnected.
pub fn build_graph(space: &SpaceDescriptor, n_nodes: usize, k: usize, seed: u64) -> Result<NetGraph> {
    NetGraph::build(GraphKey::new(space, n_nodes, k, seed))
}

impl NetGraph {
    pub fn build(key: GraphKey) -> Result<Self> {
        if key.n_nodes < MIN_NODES {
            return Err(Error::Config(format!("need at least {MIN_NODES} nodes, got {}", key.n_nodes)));
        }
        if key.k == 0 || key.k >= key.n_nodes {
            return Err(Error::Config(format!("k = {} out of range", key.k)));
        }
        if !(key.half_width > 0.0) {
            return Err(Error::Config(format!("box half width {} must be positive", key.half_width)));
        }
        let space = &key.space;
        let mut rng = sampling::rng(key.seed);
        let nodes: Vec<Point> = (0..key.n_nodes).map(|_| space.sample_point_in(&mut rng, key.half_width)).collect();
        let index = ChordIndex::new(space, &nodes);
        let mut k = key.k;
        let mut components = 0;
        for _ in 0..=CONNECT_RETRIES {
            let k_eff = k.min(key.n_nodes - 1);
            let knn: Vec<Vec<(f64, u32)>> =
                (0..nodes.len()).into_par_iter().map(|i| index.nearest(space, &nodes, &nodes[i], k_eff, Some(i))).collect();
            let epsilon = knn.iter().map(|row| row[0].0).fold(0.0, f64::max);
            let mut neighbors: Vec<Vec<u32>> = vec![Vec::new(); nodes.len()];
            for (i, row) in knn.iter().enumerate() {
                for &(_, j) in row {
                    neighbors[i].push(j);
                    neighbors[j as usize].push(i as u32);
                }
            }
            for row in &mut neighbors {
                row.sort_unstable();
                row.dedup();
            }
            components = count_components(&neighbors);
            if components == 1 {
                return Ok(Self { key, nodes, neighbors, epsilon, k_used: k_eff });
            }
            k *= 2;
        }
        Err(Error::GraphDisconnected { components, k })
    }

    pub fn key(&self) -> &GraphKey {
        &self.key
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.key.space
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[i]
    }

    /// Largest nearest-neighbour `h`-distance.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// The `k` actually used after connectivity retries.
    pub fn k_used(&self) -> usize {
        self.k_used
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum()
    }

    pub fn is_connected(&self) -> bool {
        count_components(&self.neighbors) == 1
    }

    /// SHA-256 over the key, node coordinates and adjacency.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.key.digest().as_bytes());
        for p in &self.nodes {
            for c in p.as_slice() {
                hasher.update(c.to_le_bytes());
            }
        }
        for row in &self.neighbors {
            hasher.update((row.len() as u64).to_le_bytes());
            for j in row {
                hasher.update(j.to_le_bytes());
            }
        }
        hasher.update(self.k_used.to_le_bytes());
        hex(&hasher.finalize())
    }

    /// Attaches directed `F`-weights for the given navigation data.
    pub fn weigh<'a>(&'a self, nav: &'a NavigationData) -> Result<WeightedGraph<'a>> {
        if nav.space() != self.space() {
            return Err(Error::Domain(format!("graph is on {}, wind on {}", self.space(), nav.space())));
        }
        let weights = (0..self.nodes.len())
            .into_par_iter()
            .map(|i| self.neighbors[i].iter().map(|&j| segment_length(nav, &self.nodes[i], &self.nodes[j as usize])).collect())
            .collect();
        Ok(WeightedGraph { graph: self, nav, weights, index: ChordIndex::new(self.space(), &self.nodes) })
    }

    /// File name used inside a cache directory for this key.
    pub fn cache_file_name(key: &GraphKey) -> String {
        format!("netgraph-{}.json", &key.digest()[..16])
    }

    /// Writes the graph into `dir` and returns the file path.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(Self::cache_file_name(&self.key));
        let file = CacheFile {
            format: CACHE_FORMAT.into(),
            version: CACHE_VERSION,
            key: self.key.clone(),
            hash: self.hash(),
            epsilon: self.epsilon,
            k_used: self.k_used,
            nodes: self.nodes.iter().map(|p| p.as_slice().to_vec()).collect(),
            neighbors: self.neighbors.clone(),
        };
        fs::write(&path, serde_json::to_vec(&file)?)?;
        Ok(path)
    }

    /// Reads a graph written by [`NetGraph::save`], checking the header and hash.
    pub fn load(path: &Path) -> Result<Self> {
        let file: CacheFile = serde_json::from_slice(&fs::read(path)?)?;
        if file.format != CACHE_FORMAT || file.version != CACHE_VERSION {
            return Err(Error::Config(format!(
                "{}: unsupported cache header {} v{}",
                path.display(),
                file.format,
                file.version
            )));
        }
        let nodes = file
            .nodes
            .into_iter()
            .map(|c| file.key.space.point(DVector::from_vec(c)))
            .collect::<Result<Vec<_>>>()?;
        if nodes.len() != file.key.n_nodes || file.neighbors.len() != nodes.len() {
            return Err(Error::Config(format!("{}: node count does not match key", path.display())));
        }
        let graph = Self { key: file.key, nodes, neighbors: file.neighbors, epsilon: file.epsilon, k_used: file.k_used };
        if graph.hash() != file.hash {
            return Err(Error::Config(format!("{}: hash mismatch", path.display())));
        }
        Ok(graph)
    }

    /// Loads the cached graph for `key` from `dir` if present.
    pub fn load_cached(dir: &Path, key: &GraphKey) -> Result<Option<Self>> {
        let path = dir.join(Self::cache_file_name(key));
        if !path.exists() {
            return Ok(None);
        }
        let graph = Self::load(&path)?;
        if &graph.key != key {
            return Err(Error::Config(format!("{}: key mismatch", path.display())));
        }
        Ok(Some(graph))
    }
}

/// Cache directory from [`CACHE_ENV`], if set.
pub fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// Midpoint-rule `F`-length of the `h`-geodesic from `x` to `y`.
pub fn segment_length(nav: &NavigationData, x: &Point, y: &Point) -> f64 {
    let (mid, velocity) = nav.space().geodesic_midpoint(x, y);
    nav.norm(&mid, &velocity)
}

fn count_components(neighbors: &[Vec<u32>]) -> usize {
    let mut seen = vec![false; neighbors.len()];
    let mut components = 0;
    let mut stack = Vec::new();
    for start in 0..neighbors.len() {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            for &j in &neighbors[i] {
                if !seen[j as usize] {
                    seen[j as usize] = true;
                    stack.push(j as usize);
                }
            }
        }
    }
    components
}

/// Flat ambient coordinates with each factor scaled by its metric scale, so
/// that chord lengths approximate `h`-distances at short range.
#[derive(Debug, Clone)]
struct ChordIndex {
    dim: usize,
    weights: Vec<f64>,
    coords: Vec<f64>,
}

impl ChordIndex {
    fn new(space: &SpaceDescriptor, nodes: &[Point]) -> Self {
        let mut weights = Vec::with_capacity(space.ambient_dim());
        for factor in space.factors() {
            let s = match factor {
                Factor::Group { .. } => factor.metric_scale(),
                _ => 1.0,
            };
            weights.extend(std::iter::repeat_n(s, factor.ambient_dim()));
        }
        let coords = nodes.iter().flat_map(|p| p.as_slice().iter().zip(&weights).map(|(c, w)| c * w)).collect();
        Self { dim: weights.len(), weights, coords }
    }

    /// The `k` nearest nodes to `x` by `h`-distance, nearest first. Chord
    /// distance preselects `2k` candidates which are then ranked exactly.
    fn nearest(&self, space: &SpaceDescriptor, nodes: &[Point], x: &Point, k: usize, skip: Option<usize>) -> Vec<(f64, u32)> {
        let q: Vec<f64> = x.as_slice().iter().zip(&self.weights).map(|(c, w)| c * w).collect();
        let mut chord: Vec<(f64, u32)> = self
            .coords
            .chunks_exact(self.dim)
            .enumerate()
            .filter(|(j, _)| Some(*j) != skip)
            .map(|(j, c)| (c.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), j as u32))
            .collect();
        let m = (2 * k).min(chord.len());
        if m < chord.len() {
            chord.select_nth_unstable_by(m, |a, b| a.0.total_cmp(&b.0));
            chord.truncate(m);
        }
        let mut exact: Vec<(f64, u32)> =
            chord.into_iter().map(|(_, j)| (space.distance(x, &nodes[j as usize]), j)).collect();
        exact.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        exact.truncate(k);
        // The collect above reuses the n-element buffer of `chord`.
        exact.shrink_to_fit();
        exact
    }
}

/// A [`NetGraph`] with directed `F`-weights for one navigation data.
pub struct WeightedGraph<'a> {
    graph: &'a NetGraph,
    nav: &'a NavigationData,
    weights: Vec<Vec<f64>>,
    index: ChordIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleEstimate {
    pub estimate: f64,
    pub error_hint: f64,
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl WeightedGraph<'_> {
    pub fn graph(&self) -> &NetGraph {
        self.graph
    }

    /// Weight of the edge `i -> j`, if present.
    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        let row = &self.graph.neighbors[i];
        row.binary_search(&(j as u32)).ok().map(|p| self.weights[i][p])
    }

    /// Dijkstra estimate of the `F`-distance from `x` to `y`.
    pub fn distance(&self, x: &Point, y: &Point) -> OracleEstimate {
        let g = self.graph;
        let space = g.space();
        let k = g.k_used;
        let n = g.nodes.len();
        let error_hint = ERROR_CONSTANT * g.epsilon;
        if x == y {
            return OracleEstimate { estimate: 0.0, error_hint };
        }
        let sources = self.index.nearest(space, &g.nodes, x, k, None);
        let sinks = self.index.nearest(space, &g.nodes, y, k, None);
        let mut best = f64::INFINITY;
        // A direct segment is allowed when it is no longer than the local
        // neighbourhood radius.
        let reach = sources.last().map_or(0.0, |s| s.0).max(sinks.last().map_or(0.0, |s| s.0));
        if space.distance(x, y) <= reach {
            best = segment_length(self.nav, x, y);
        }
        let mut exit = vec![f64::INFINITY; n];
        for &(_, j) in &sinks {
            exit[j as usize] = segment_length(self.nav, &g.nodes[j as usize], y);
        }
        let mut dist = vec![f64::INFINITY; n];
        let mut heap = BinaryHeap::new();
        for &(_, j) in &sources {
            let d = segment_length(self.nav, x, &g.nodes[j as usize]);
            if d < dist[j as usize] {
                dist[j as usize] = d;
                heap.push(Entry(d, j as usize));
            }
        }
        while let Some(Entry(d, i)) = heap.pop() {
            if d >= best {
                break;
            }
            if d > dist[i] {
                continue;
            }
            best = best.min(d + exit[i]);
            for (&j, &w) in g.neighbors[i].iter().zip(&self.weights[i]) {
                let nd = d + w;
                if nd < dist[j as usize] {
                    dist[j as usize] = nd;
                    heap.push(Entry(nd, j as usize));
                }
            }
        }
        OracleEstimate { estimate: best, error_hint }
    }
}

/// Builds (or loads from `cache`) the graph and answers one query.
pub fn oracle_distance(graph: &NetGraph, nav: &NavigationData, x: &Point, y: &Point) -> Result<OracleEstimate> {
    Ok(graph.weigh(nav)?.distance(x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::f_distance;
    use crate::killing::KillingField;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn build_is_deterministic_and_connected() {
        let s3 = SpaceDescriptor::sphere(3, 1.0).unwrap();
        let a = build_graph(&s3, 500, 8, 11).unwrap();
        let b = build_graph(&s3, 500, 8, 11).unwrap();
        let c = build_graph(&s3, 500, 8, 12).unwrap();
        assert!(a.is_connected());
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert!(a.epsilon() > 0.0 && a.epsilon() < 1.0);
        for i in 0..a.nodes().len() {
            assert!(a.neighbors(i).len() >= 8);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let e2 = SpaceDescriptor::euclidean(2).unwrap();
        assert!(build_graph(&e2, 50, 4, 0).is_err());
        assert!(build_graph(&e2, 200, 0, 0).is_err());
        assert!(NetGraph::build(GraphKey::new(&e2, 200, 4, 0).with_box(0.0)).is_err());
    }

    #[test]
    fn small_k_is_retried_until_connected() {
        let e2 = SpaceDescriptor::euclidean(2).unwrap();
        let g = build_graph(&e2, 400, 1, 3).unwrap();
        assert!(g.is_connected());
        assert!(g.k_used() >= 1);
    }

    #[test]
    fn weights_are_directional() {
        let e2 = SpaceDescriptor::euclidean(2).unwrap();
        let nav = NavigationData::new(KillingField::translation(&e2, 0, dv(&[0.5, 0.0])).unwrap()).unwrap();
        let g = build_graph(&e2, 300, 6, 4).unwrap();
        let w = g.weigh(&nav).unwrap();
        let i = 0;
        let j = g.neighbors(i)[0] as usize;
        let (wij, wji) = (w.weight(i, j).unwrap(), w.weight(j, i).unwrap());
        let d = g.nodes()[j].coords() - g.nodes()[i].coords();
        assert!((wij - nav.norm(&g.nodes()[i], &d)).abs() < 1e-14);
        assert!((wji - nav.norm(&g.nodes()[i], &-d)).abs() < 1e-14);
        assert!(w.weight(i, i).is_none());
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s3 = SpaceDescriptor::sphere(3, 1.0).unwrap();
        let g = build_graph(&s3, 200, 6, 9).unwrap();
        let path = g.save(dir.path()).unwrap();
        let back = NetGraph::load(&path).unwrap();
        assert_eq!(back.hash(), g.hash());
        assert_eq!(back.nodes(), g.nodes());
        let again = NetGraph::load_cached(dir.path(), g.key()).unwrap().unwrap();
        assert_eq!(again.hash(), g.hash());
        let other = GraphKey::new(&s3, 200, 6, 10);
        assert!(NetGraph::load_cached(dir.path(), &other).unwrap().is_none());

        let text = fs::read_to_string(&path).unwrap().replace("\"version\":1", "\"version\":99");
        fs::write(&path, text).unwrap();
        assert!(NetGraph::load(&path).is_err());
    }

    #[test]
    fn euclidean_fixture_within_three_percent() {
        let e2 = SpaceDescriptor::euclidean(2).unwrap();
        let nav = NavigationData::new(KillingField::translation(&e2, 0, dv(&[0.5, 0.0])).unwrap()).unwrap();
        let g = NetGraph::build(GraphKey::new(&e2, 10_000, 48, 1).with_box(2.0)).unwrap();
        let w = g.weigh(&nav).unwrap();
        let o = e2.point(dv(&[0.0, 0.0])).unwrap();
        let e1 = e2.point(dv(&[1.0, 0.0])).unwrap();
        let fwd = w.distance(&o, &e1).estimate;
        let back = w.distance(&e1, &o).estimate;
        assert!((fwd / (2.0 / 3.0) - 1.0).abs() < 0.03, "{fwd}");
        assert!((back / 2.0 - 1.0).abs() < 0.03, "{back}");
        assert!(fwd >= 2.0 / 3.0 - 1e-9 && back >= 2.0 - 1e-9);
    }

    #[test]
    fn sphere_estimates_converge_from_above() {
        let s3 = SpaceDescriptor::sphere(3, 1.0).unwrap();
        let nav = NavigationData::riemannian(&s3);
        let mut rng = sampling::rng(77);
        let pairs: Vec<(Point, Point)> = (0..5).map(|_| (s3.sample_point(&mut rng), s3.sample_point(&mut rng))).collect();
        let mut previous = vec![f64::INFINITY; pairs.len()];
        // k grows with n so that the neighbourhood radius stays fixed; with
        // a fixed k the path stretch does not shrink.
        for n in [1_000, 4_000] {
            let g = build_graph(&s3, n, n / 100, 5).unwrap();
            let w = g.weigh(&nav).unwrap();
            for (p, (x, y)) in pairs.iter().enumerate() {
                let est = w.distance(x, y).estimate;
                let exact = f_distance(&nav, x, y).unwrap();
                assert!(est >= exact - 1e-9);
                assert!(est <= previous[p] * 1.005, "n = {n}: {est} after {}", previous[p]);
                previous[p] = est;
            }
        }
    }
}
