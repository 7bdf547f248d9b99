//! Weighted undirected graphs and random graph generators.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::child_rng;

/// Generated edge weights are uniform integers in `1..=MAX_WEIGHT`.
pub const MAX_WEIGHT: u32 = 100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("graph has {n} nodes; at least 2 are required")]
    TooFewNodes { n: usize },
    #[error("invalid edge: {0}")]
    InvalidEdge(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphFamily {
    Er,
    Ba,
    Ws,
    Geometric,
}

impl GraphFamily {
    pub const ALL: [GraphFamily; 4] = [GraphFamily::Er, GraphFamily::Ba, GraphFamily::Ws, GraphFamily::Geometric];
}

/// Family-specific parameters of a generated graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilyParams {
    Er { p: f64 },
    Ba { m_attach: usize },
    Ws { k: usize, beta: f64 },
    Geometric { eps: f64 },
}

impl FamilyParams {
    pub fn family(&self) -> GraphFamily {
        match self {
            FamilyParams::Er { .. } => GraphFamily::Er,
            FamilyParams::Ba { .. } => GraphFamily::Ba,
            FamilyParams::Ws { .. } => GraphFamily::Ws,
            FamilyParams::Geometric { .. } => GraphFamily::Geometric,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphGenMeta {
    pub seed: u64,
    pub index: u64,
    #[serde(flatten)]
    pub params: FamilyParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedGraph {
    pub id: String,
    pub n: usize,
    /// Undirected edges `(u, v, w)`.
    pub edges: Vec<(u32, u32, u32)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen_meta: Option<GraphGenMeta>,
}

impl WeightedGraph {
    /// Builds a simple graph, rejecting self-loops, duplicates and
    /// out-of-range endpoints.
    pub fn new(id: impl Into<String>, n: usize, edges: Vec<(u32, u32, u32)>) -> Result<Self, GraphError> {
        let g = Self {
            id: id.into(),
            n,
            edges,
            gen_meta: None,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let mut seen = std::collections::HashSet::with_capacity(self.edges.len());
        for &(u, v, _) in &self.edges {
            if u as usize >= self.n || v as usize >= self.n {
                return Err(GraphError::InvalidEdge(format!("({u}, {v}) out of range for n = {}", self.n)));
            }
            if u == v {
                return Err(GraphError::InvalidEdge(format!("self-loop at {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(GraphError::InvalidEdge(format!("duplicate edge ({u}, {v})")));
            }
        }
        Ok(())
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(u, v, _) in &self.edges {
            d[u as usize] += 1;
            d[v as usize] += 1;
        }
        d
    }

    pub fn adjacency(&self) -> Adjacency {
        Adjacency::new(self)
    }

    /// Dense 0/1 adjacency matrix, row-major.
    pub fn adjacency_matrix(&self) -> crate::linalg::Matrix {
        let mut a = crate::linalg::Matrix::zeros(self.n, self.n);
        for &(u, v, _) in &self.edges {
            a[(u as usize, v as usize)] = 1.0;
            a[(v as usize, u as usize)] = 1.0;
        }
        a
    }

    pub fn is_connected(&self) -> bool {
        if self.n <= 1 {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &(v, _) in adj.neighbors(u) {
                let v = v as usize;
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.n
    }
}

/// Compressed adjacency lists: neighbors of `u` are
/// `targets[offsets[u]..offsets[u + 1]]`.
#[derive(Debug, Clone)]
pub struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<(u32, u32)>,
}

impl Adjacency {
    pub fn new(g: &WeightedGraph) -> Self {
        let deg = g.degrees();
        let mut offsets = vec![0usize; g.n + 1];
        for u in 0..g.n {
            offsets[u + 1] = offsets[u] + deg[u];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![(0u32, 0u32); offsets[g.n]];
        for &(u, v, w) in &g.edges {
            targets[fill[u as usize]] = (v, w);
            fill[u as usize] += 1;
            targets[fill[v as usize]] = (u, w);
            fill[v as usize] += 1;
        }
        Self { offsets, targets }
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    /// `(neighbor, weight)` pairs of `u`.
    pub fn neighbors(&self, u: usize) -> &[(u32, u32)] {
        &self.targets[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }
}

/// `|E| / C(n, 2)`.
pub fn density(g: &WeightedGraph) -> Result<f64, GraphError> {
    if g.n < 2 {
        return Err(GraphError::TooFewNodes { n: g.n });
    }
    let pairs = g.n as f64 * (g.n as f64 - 1.0) / 2.0;
    Ok(g.edges.len() as f64 / pairs)
}

/// Upper-triangular adjacency bitmap used while generating.
struct PairSet {
    n: usize,
    bits: Vec<bool>,
}

impl PairSet {
    fn new(n: usize) -> Self {
        Self {
            n,
            bits: vec![false; n * n],
        }
    }

    fn key(&self, u: usize, v: usize) -> usize {
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        a * self.n + b
    }

    fn contains(&self, u: usize, v: usize) -> bool {
        self.bits[self.key(u, v)]
    }

    fn insert(&mut self, u: usize, v: usize) -> bool {
        let k = self.key(u, v);
        !std::mem::replace(&mut self.bits[k], true)
    }

    fn remove(&mut self, u: usize, v: usize) {
        let k = self.key(u, v);
        self.bits[k] = false;
    }

    /// Edges in lexicographic `(u, v)` order with `u < v`, each given a
    /// random weight in `1..=MAX_WEIGHT`.
    fn into_weighted<R: Rng + ?Sized>(self, rng: &mut R) -> Vec<(u32, u32, u32)> {
        let mut edges = Vec::new();
        for u in 0..self.n {
            for v in u + 1..self.n {
                if self.bits[u * self.n + v] {
                    edges.push((u as u32, v as u32, rng.random_range(1..=MAX_WEIGHT)));
                }
            }
        }
        edges
    }
}

fn finish<R: Rng + ?Sized>(set: PairSet, rng: &mut R, params: FamilyParams) -> WeightedGraph {
    let n = set.n;
    WeightedGraph {
        id: String::new(),
        n,
        edges: set.into_weighted(rng),
        gen_meta: Some(GraphGenMeta {
            seed: 0,
            index: 0,
            params,
        }),
    }
}

/// Erdős–Rényi `G(n, p)`.
pub fn gen_er<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<WeightedGraph, GraphError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(GraphError::InvalidParam(format!("p = {p} outside [0, 1]")));
    }
    let mut set = PairSet::new(n);
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                set.insert(u, v);
            }
        }
    }
    Ok(finish(set, rng, FamilyParams::Er { p }))
}

/// Barabási–Albert preferential attachment grown from a complete graph on
/// `m_attach` nodes.
pub fn gen_ba<R: Rng + ?Sized>(n: usize, m_attach: usize, rng: &mut R) -> Result<WeightedGraph, GraphError> {
    if m_attach < 5 || m_attach >= n {
        return Err(GraphError::InvalidParam(format!(
            "m_attach = {m_attach} outside [5, n - 1] for n = {n}"
        )));
    }
    let mut set = PairSet::new(n);
    // Each node appears once per incident edge, so uniform draws from this
    // list are degree-proportional.
    let mut endpoints: Vec<usize> = Vec::with_capacity(2 * (m_attach * m_attach + n * m_attach));
    for u in 0..m_attach {
        for v in u + 1..m_attach {
            set.insert(u, v);
            endpoints.push(u);
            endpoints.push(v);
        }
    }
    let mut chosen = Vec::with_capacity(m_attach);
    for v in m_attach..n {
        chosen.clear();
        while chosen.len() < m_attach {
            let t = endpoints[rng.random_range(0..endpoints.len())];
            if !chosen.contains(&t) {
                chosen.push(t);
            }
        }
        for &t in &chosen {
            set.insert(v, t);
            endpoints.push(v);
            endpoints.push(t);
        }
    }
    Ok(finish(set, rng, FamilyParams::Ba { m_attach }))
}

/// Lattice degree used for a requested mean degree: nearest even integer,
/// clamped to `[2, n - 1]`.
pub fn ws_lattice_degree(k_mean: f64, n: usize) -> usize {
    let max_even = (n - 1) & !1;
    let k = 2 * (k_mean / 2.0).round() as usize;
    k.clamp(2, max_even.max(2))
}

/// Watts–Strogatz small world: ring lattice of degree `k` (rounded to even)
/// with each lattice edge rewired with probability `beta`.
pub fn gen_ws<R: Rng + ?Sized>(n: usize, k_mean: f64, beta: f64, rng: &mut R) -> Result<WeightedGraph, GraphError> {
    if n < 3 {
        return Err(GraphError::InvalidParam(format!("n = {n} too small for a ring lattice")));
    }
    if !(2.0..=(n - 1) as f64).contains(&k_mean) {
        return Err(GraphError::InvalidParam(format!("k = {k_mean} outside [2, n - 1]")));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(GraphError::InvalidParam(format!("beta = {beta} outside [0, 1]")));
    }
    let k = ws_lattice_degree(k_mean, n);
    let mut set = PairSet::new(n);
    let mut degree = vec![0usize; n];
    for j in 1..=k / 2 {
        for u in 0..n {
            if set.insert(u, (u + j) % n) {
                degree[u] += 1;
                degree[(u + j) % n] += 1;
            }
        }
    }
    for j in 1..=k / 2 {
        for u in 0..n {
            let v = (u + j) % n;
            if !set.contains(u, v) || !rng.random_bool(beta) || degree[u] >= n - 1 {
                continue;
            }
            let w = loop {
                let w = rng.random_range(0..n);
                if w != u && !set.contains(u, w) {
                    break w;
                }
            };
            set.remove(u, v);
            degree[v] -= 1;
            set.insert(u, w);
            degree[w] += 1;
        }
    }
    Ok(finish(set, rng, FamilyParams::Ws { k, beta }))
}

/// Random geometric graph on `n` uniform points in the unit cube, joining
/// pairs at Euclidean distance at most `eps`.
pub fn gen_geometric<R: Rng + ?Sized>(n: usize, eps: f64, rng: &mut R) -> Result<WeightedGraph, GraphError> {
    if !(eps >= 0.0) {
        return Err(GraphError::InvalidParam(format!("eps = {eps} must be non-negative")));
    }
    let pts: Vec<[f64; 3]> = (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    Ok(geometric_from_points(&pts, eps, rng))
}

fn geometric_from_points<R: Rng + ?Sized>(pts: &[[f64; 3]], eps: f64, rng: &mut R) -> WeightedGraph {
    let n = pts.len();
    let mut set = PairSet::new(n);
    let eps2 = eps * eps;
    for u in 0..n {
        for v in u + 1..n {
            let d2: f64 = (0..3).map(|k| (pts[u][k] - pts[v][k]).powi(2)).sum();
            if d2 <= eps2 {
                set.insert(u, v);
            }
        }
    }
    finish(set, rng, FamilyParams::Geometric { eps })
}

/// Sampling ranges for generated graph sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphGenConfig {
    pub seed: u64,
    pub n_range: [usize; 2],
    pub families: Vec<GraphFamily>,
    /// Upper end of the geometric radius range.
    pub eps_max: f64,
}

impl Default for GraphGenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_range: [20, 1250],
            families: GraphFamily::ALL.to_vec(),
            eps_max: 1.0,
        }
    }
}

impl GraphGenConfig {
    pub fn desk() -> Self {
        Self {
            n_range: [20, 300],
            ..Self::default()
        }
    }

    pub fn smoke() -> Self {
        Self {
            n_range: [20, 60],
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if self.n_range[0] < 20 || self.n_range[0] > self.n_range[1] {
            return Err(GraphError::InvalidParam("n_range must be non-empty with n ≥ 20".into()));
        }
        if self.families.is_empty() {
            return Err(GraphError::InvalidParam("no graph families selected".into()));
        }
        if !(self.eps_max > 0.0) {
            return Err(GraphError::InvalidParam("eps_max must be positive".into()));
        }
        Ok(())
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo >= hi {
        hi
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Graph `index` of the stream defined by `cfg.seed`: a uniformly chosen
/// family with parameters drawn from the standard ranges.
pub fn generate_graph(cfg: &GraphGenConfig, index: u64) -> Result<WeightedGraph, GraphError> {
    cfg.validate()?;
    let mut rng = child_rng(cfg.seed, index);
    let n = rng.random_range(cfg.n_range[0]..=cfg.n_range[1]);
    let family = cfg.families[rng.random_range(0..cfg.families.len())];
    let nf = n as f64;
    let mut g = match family {
        GraphFamily::Er => {
            let p = uniform(&mut rng, nf.ln() / nf, 1.0);
            gen_er(n, p, &mut rng)?
        }
        GraphFamily::Ba => {
            let m = rng.random_range(5..=n - 1);
            gen_ba(n, m, &mut rng)?
        }
        GraphFamily::Ws => {
            let k = uniform(&mut rng, nf.ln().max(2.0), nf - 1.0);
            let beta = rng.random_range(0.0..=1.0);
            gen_ws(n, k, beta, &mut rng)?
        }
        GraphFamily::Geometric => {
            let eps = uniform(&mut rng, (20.0 / nf).min(cfg.eps_max), cfg.eps_max);
            gen_geometric(n, eps, &mut rng)?
        }
    };
    g.id = format!("g-{}-{index:06}", cfg.seed);
    if let Some(meta) = g.gen_meta.as_mut() {
        meta.seed = cfg.seed;
        meta.index = index;
    }
    Ok(g)
}

/// Parses a whitespace edge list: one `u v [w]` per line, weight 1 when
/// omitted. Lines starting with `#` or `%` are comments. Node count is the
/// largest id plus one; self-loops are dropped and repeated edges keep their
/// first weight.
pub fn parse_edge_list(text: &str, id: impl Into<String>) -> Result<WeightedGraph, GraphError> {
    let mut raw: Vec<(u32, u32, u32)> = Vec::new();
    let mut max_id: Option<u32> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let err = |message: String| GraphError::Parse {
            line: lineno + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(err(format!("expected `u v [w]`, found {} fields", fields.len())));
        }
        let num = |s: &str, what: &str| s.parse::<u32>().map_err(|e| err(format!("bad {what} `{s}`: {e}")));
        let u = num(fields[0], "node id")?;
        let v = num(fields[1], "node id")?;
        let w = match fields.get(2) {
            Some(s) => num(s, "weight")?,
            None => 1,
        };
        max_id = Some(max_id.map_or(u.max(v), |m| m.max(u).max(v)));
        raw.push((u, v, w));
    }
    let n = max_id.map_or(0, |m| m as usize + 1);
    let mut seen = std::collections::HashSet::new();
    let edges: Vec<(u32, u32, u32)> = raw
        .into_iter()
        .filter(|&(u, v, _)| u != v && seen.insert((u.min(v), u.max(v))))
        .collect();
    WeightedGraph::new(id, n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(i: u64) -> rand_chacha::ChaCha8Rng {
        child_rng(17, i)
    }

    fn assert_simple(g: &WeightedGraph) {
        g.validate().unwrap();
        assert!(g.edges.iter().all(|&(_, _, w)| (1..=MAX_WEIGHT).contains(&w)));
    }

    #[test]
    fn er_complete_and_pair() {
        let g = gen_er(3, 1.0, &mut rng(0)).unwrap();
        assert_eq!(g.edge_count(), 3);
        let g = gen_er(2, 1.0, &mut rng(1)).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_simple(&g);
    }

    #[test]
    fn er_edge_count_concentrates() {
        let n = 1000;
        let p = 0.3;
        let g = gen_er(n, p, &mut rng(2)).unwrap();
        let pairs = (n * (n - 1) / 2) as f64;
        let sd = (pairs * p * (1.0 - p)).sqrt();
        assert!((g.edge_count() as f64 - p * pairs).abs() <= 3.0 * sd);
    }

    #[test]
    fn er_connectivity_above_threshold() {
        let n = 200;
        let p = 2.0 * (n as f64).ln() / n as f64;
        let connected = (0..100).filter(|&i| gen_er(n, p, &mut rng(100 + i)).unwrap().is_connected()).count();
        assert!(connected >= 90, "{connected} of 100 connected");
    }

    #[test]
    fn ba_counts_and_degrees() {
        let g = gen_ba(6, 5, &mut rng(3)).unwrap();
        assert_eq!(g.edge_count(), 10 + 5);
        assert!(g.degrees()[5] >= 5);
        for (n, m) in [(50, 5), (120, 17), (300, 299)] {
            let g = gen_ba(n, m, &mut rng(n as u64)).unwrap();
            assert_eq!(g.edge_count(), m * (m - 1) / 2 + (n - m) * m);
            assert!(g.degrees()[m..].iter().all(|&d| d >= m));
            assert_simple(&g);
        }
        assert!(gen_ba(10, 4, &mut rng(0)).is_err());
        assert!(gen_ba(10, 10, &mut rng(0)).is_err());
    }

    #[test]
    fn ba_degrees_are_heavy_tailed() {
        for s in 0..20 {
            let g = gen_ba(500, 5, &mut rng(200 + s)).unwrap();
            let mut d = g.degrees();
            d.sort_unstable();
            assert!(d[d.len() - 1] > d[d.len() / 2]);
        }
    }

    #[test]
    fn ws_lattice_and_rewiring() {
        let g = gen_ws(6, 2.0, 0.0, &mut rng(4)).unwrap();
        assert_eq!(g.edge_count(), 6);
        assert!(g.degrees().iter().all(|&d| d == 2));
        assert!(g.is_connected());
        let g = gen_ws(50, 7.0, 0.0, &mut rng(5)).unwrap();
        assert!(g.degrees().iter().all(|&d| d == 8));
        let g = gen_ws(200, 10.0, 1.0, &mut rng(6)).unwrap();
        assert_eq!(g.edge_count(), 200 * 10 / 2);
        assert_simple(&g);
        assert!(gen_ws(10, 3.0, 1.5, &mut rng(0)).is_err());
        assert_eq!(ws_lattice_degree(9.0, 10), 8);
        assert_eq!(ws_lattice_degree(1.0, 10), 2);
    }

    #[test]
    fn geometric_matches_distance_oracle() {
        let mut r = rng(7);
        let pts: Vec<[f64; 3]> = (0..100).map(|_| [r.random(), r.random(), r.random()]).collect();
        let g = geometric_from_points(&pts, 0.5, &mut r);
        let set: std::collections::HashSet<(u32, u32)> = g.edges.iter().map(|&(u, v, _)| (u, v)).collect();
        for u in 0..100 {
            for v in u + 1..100 {
                let d = ((pts[u][0] - pts[v][0]).powi(2) + (pts[u][1] - pts[v][1]).powi(2) + (pts[u][2] - pts[v][2]).powi(2)).sqrt();
                assert_eq!(d <= 0.5, set.contains(&(u as u32, v as u32)));
            }
        }
        let full = gen_geometric(30, 3f64.sqrt(), &mut rng(8)).unwrap();
        assert_eq!(density(&full).unwrap(), 1.0);
        let empty = gen_geometric(20, 1e-9, &mut rng(9)).unwrap();
        assert!(empty.edge_count() <= 1);
    }

    #[test]
    fn density_examples() {
        let k4 = WeightedGraph::new("k4", 4, vec![(0, 1, 1), (0, 2, 1), (0, 3, 1), (1, 2, 1), (1, 3, 1), (2, 3, 1)]).unwrap();
        assert_eq!(density(&k4).unwrap(), 1.0);
        let empty = WeightedGraph::new("e", 10, vec![]).unwrap();
        assert_eq!(density(&empty).unwrap(), 0.0);
        let path = WeightedGraph::new("p", 4, vec![(0, 1, 1), (1, 2, 1), (2, 3, 1)]).unwrap();
        assert_eq!(density(&path).unwrap(), 0.5);
        let one = WeightedGraph::new("one", 1, vec![]).unwrap();
        assert_eq!(density(&one), Err(GraphError::TooFewNodes { n: 1 }));
    }

    #[test]
    fn generation_is_deterministic_for_every_family() {
        for family in GraphFamily::ALL {
            let cfg = GraphGenConfig {
                families: vec![family],
                ..GraphGenConfig::smoke().with_seed(5)
            };
            for i in 0..5 {
                let a = generate_graph(&cfg, i).unwrap();
                let b = generate_graph(&cfg, i).unwrap();
                assert_eq!(a, b);
                assert_simple(&a);
                assert_eq!(a.gen_meta.as_ref().unwrap().params.family(), family);
            }
        }
    }

    #[test]
    fn json_shape() {
        let g = generate_graph(&GraphGenConfig::smoke().with_seed(1), 0).unwrap();
        let v = serde_json::to_value(&g).unwrap();
        assert!(v["edges"][0].as_array().unwrap().len() == 3);
        assert!(v["gen_meta"]["family"].is_string());
        let back: WeightedGraph = serde_json::from_value(v).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn edge_list_parsing() {
        let text = "# comment\n0 1 5\n1 2\n2 1 9\n3 3 4\n\n% another\n2 4 7\n";
        let g = parse_edge_list(text, "x").unwrap();
        assert_eq!(g.n, 5);
        assert_eq!(g.edges, vec![(0, 1, 5), (1, 2, 1), (2, 4, 7)]);
        assert!(matches!(parse_edge_list("0 x\n", "bad"), Err(GraphError::Parse { line: 1, .. })));
        assert!(parse_edge_list("0 1 2 3\n", "bad").is_err());
    }
}
