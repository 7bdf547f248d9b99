//! All-pairs shortest paths: repeated Dijkstra, Floyd–Warshall, and a
//! degree-ordered Dijkstra that reuses already solved sources.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::graph::{Adjacency, WeightedGraph};

/// Distance of an unreachable pair.
pub const INF: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ApspError {
    #[error("algorithms disagree on graph {graph_id}: {left:?} vs {right:?}")]
    Disagreement {
        graph_id: String,
        left: ApspAlgorithm,
        right: ApspAlgorithm,
    },
    #[error("repeats must be at least 1")]
    NoRepeats,
}

/// Dense `n × n` matrix of path lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<u64>,
}

impl DistanceMatrix {
    fn unreachable(n: usize) -> Self {
        let mut d = vec![INF; n * n];
        for i in 0..n {
            d[i * n + i] = 0;
        }
        Self { n, d }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, u: usize, v: usize) -> u64 {
        self.d[u * self.n + v]
    }

    pub fn row(&self, u: usize) -> &[u64] {
        &self.d[u * self.n..(u + 1) * self.n]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (i + 1..self.n).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Checks `d(u, w) ≤ d(u, v) + d(v, w)` over all finite triples.
    pub fn satisfies_triangle_inequality(&self) -> bool {
        let n = self.n;
        for v in 0..n {
            for u in 0..n {
                let duv = self.get(u, v);
                if duv == INF {
                    continue;
                }
                for w in 0..n {
                    let dvw = self.get(v, w);
                    if dvw != INF && self.get(u, w) > duv + dvw {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Counts of priority-queue operations performed by a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkCounters {
    pub pops: u64,
    pub pushes: u64,
    pub relaxations: u64,
}

/// Single-source Dijkstra from `s`, writing into `dist` (length `n`).
fn dijkstra_into(adj: &Adjacency, s: usize, dist: &mut [u64], heap: &mut BinaryHeap<Reverse<(u64, u32)>>, c: &mut WorkCounters) {
    dist.fill(INF);
    dist[s] = 0;
    heap.clear();
    heap.push(Reverse((0, s as u32)));
    c.pushes += 1;
    while let Some(Reverse((d, u))) = heap.pop() {
        c.pops += 1;
        let u = u as usize;
        if d > dist[u] {
            continue;
        }
        for &(v, w) in adj.neighbors(u) {
            c.relaxations += 1;
            let nd = d + w as u64;
            if nd < dist[v as usize] {
                dist[v as usize] = nd;
                heap.push(Reverse((nd, v)));
                c.pushes += 1;
            }
        }
    }
}

/// Dijkstra with a binary heap from every source.
pub fn apsp_dijkstra(g: &WeightedGraph) -> (DistanceMatrix, WorkCounters) {
    let adj = g.adjacency();
    let n = g.n;
    let mut out = DistanceMatrix::unreachable(n);
    let mut heap = BinaryHeap::new();
    let mut c = WorkCounters::default();
    for s in 0..n {
        dijkstra_into(&adj, s, &mut out.d[s * n..(s + 1) * n], &mut heap, &mut c);
    }
    (out, c)
}

/// Floyd–Warshall over a dense matrix initialized with the edge weights.
pub fn apsp_floyd_warshall(g: &WeightedGraph) -> DistanceMatrix {
    // A finite stand-in for ∞ keeps the inner loop branch-free; sums of two
    // such values cannot overflow.
    const BIG: u64 = u64::MAX / 4;
    let n = g.n;
    let mut d = vec![BIG; n * n];
    for i in 0..n {
        d[i * n + i] = 0;
    }
    for &(u, v, w) in &g.edges {
        let (u, v, w) = (u as usize, v as usize, w as u64);
        if w < d[u * n + v] {
            d[u * n + v] = w;
            d[v * n + u] = w;
        }
    }
    let mut row_k = vec![0u64; n];
    for k in 0..n {
        row_k.copy_from_slice(&d[k * n..(k + 1) * n]);
        for i in 0..n {
            let dik = d[i * n + k];
            if dik >= BIG {
                continue;
            }
            let row_i = &mut d[i * n..(i + 1) * n];
            for (x, &y) in row_i.iter_mut().zip(&row_k) {
                let via = dik + y;
                if via < *x {
                    *x = via;
                }
            }
        }
    }
    for x in &mut d {
        if *x >= BIG {
            *x = INF;
        }
    }
    DistanceMatrix { n, d }
}

/// Source order for [`apsp_peng`]: decreasing degree, ties by node id.
pub fn degree_order(g: &WeightedGraph) -> Vec<usize> {
    let deg = g.degrees();
    let mut order: Vec<usize> = (0..g.n).collect();
    order.sort_by(|&a, &b| deg[b].cmp(&deg[a]).then(a.cmp(&b)));
    order
}

const SOLVED: u8 = 0;
const NODE: u8 = 1;

/// Dijkstra from every source in decreasing-degree order, reusing the rows
/// of sources that are already solved.
///
/// For source `s`, a solved source `t` already knows `d(s, t) = d(t, s)`, so
/// it is never relaxed or expanded. When the search reaches `t` along a
/// shortest path, the whole row of `t` is applied at once as
/// `d(s, t) + d(t, x)`. Nodes whose tentative distance comes from such a row
/// are not expanded: anything reachable through them is already covered by
/// the same row. Solved sources whose distance is itself explained by an
/// applied row are skipped.
pub fn apsp_peng(g: &WeightedGraph) -> (DistanceMatrix, WorkCounters) {
    let adj = g.adjacency();
    let n = g.n;
    let mut out = DistanceMatrix::unreachable(n);
    let mut c = WorkCounters::default();
    let mut solved = vec![false; n];
    let mut dist = vec![INF; n];
    let mut done = vec![false; n];
    let mut covered = vec![false; n];
    let mut dominated = vec![false; n];
    let mut queued = vec![false; n];
    // Heap keys carry a kind flag so solved sources pop before ordinary
    // nodes at equal distance.
    let mut heap: BinaryHeap<Reverse<(u64, u8, u32)>> = BinaryHeap::new();

    for s in degree_order(g) {
        dist.fill(INF);
        done.fill(false);
        covered.fill(false);
        dominated.fill(false);
        queued.fill(false);
        for t in 0..n {
            if solved[t] {
                dist[t] = out.d[t * n + s];
            }
        }
        dist[s] = 0;
        heap.clear();
        heap.push(Reverse((0, NODE, s as u32)));
        c.pushes += 1;

        while let Some(Reverse((d, kind, v))) = heap.pop() {
            c.pops += 1;
            let v = v as usize;
            if kind == SOLVED {
                if dominated[v] {
                    continue;
                }
                let row_v = &out.d[v * n..(v + 1) * n];
                for x in 0..n {
                    let dvx = row_v[x];
                    if dvx == INF || x == v {
                        continue;
                    }
                    let cand = d + dvx;
                    if solved[x] {
                        if cand == dist[x] {
                            dominated[x] = true;
                        }
                    } else if !done[x] {
                        if cand < dist[x] {
                            dist[x] = cand;
                            covered[x] = true;
                        } else if cand == dist[x] {
                            covered[x] = true;
                        }
                    }
                }
                continue;
            }
            if d > dist[v] || done[v] {
                continue;
            }
            done[v] = true;
            if covered[v] {
                continue;
            }
            for &(y, w) in adj.neighbors(v) {
                c.relaxations += 1;
                let y = y as usize;
                let nd = d + w as u64;
                if solved[y] {
                    if !queued[y] && !dominated[y] && nd == dist[y] {
                        queued[y] = true;
                        heap.push(Reverse((nd, SOLVED, y as u32)));
                        c.pushes += 1;
                    }
                    continue;
                }
                if !done[y] && nd < dist[y] {
                    dist[y] = nd;
                    covered[y] = false;
                    heap.push(Reverse((nd, NODE, y as u32)));
                    c.pushes += 1;
                }
            }
        }
        out.d[s * n..(s + 1) * n].copy_from_slice(&dist);
        solved[s] = true;
    }
    (out, c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApspAlgorithm {
    Dijkstra,
    Peng,
    FloydWarshall,
}

impl ApspAlgorithm {
    /// Class order used for labels and model outputs.
    pub const ALL: [ApspAlgorithm; 3] = [ApspAlgorithm::Dijkstra, ApspAlgorithm::Peng, ApspAlgorithm::FloydWarshall];
    /// Preference order when runtimes tie exactly.
    pub const TIE_ORDER: [ApspAlgorithm; 3] = [ApspAlgorithm::Peng, ApspAlgorithm::FloydWarshall, ApspAlgorithm::Dijkstra];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn key(self) -> &'static str {
        match self {
            ApspAlgorithm::Dijkstra => "dijkstra",
            ApspAlgorithm::Peng => "peng",
            ApspAlgorithm::FloydWarshall => "floyd_warshall",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.key() == key)
    }

    pub fn run(self, g: &WeightedGraph) -> DistanceMatrix {
        match self {
            ApspAlgorithm::Dijkstra => apsp_dijkstra(g).0,
            ApspAlgorithm::Peng => apsp_peng(g).0,
            ApspAlgorithm::FloydWarshall => apsp_floyd_warshall(g),
        }
    }
}

impl std::fmt::Display for ApspAlgorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.key())
    }
}

/// Runtime in seconds per algorithm.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AlgTimes {
    pub dijkstra: f64,
    pub floyd_warshall: f64,
    pub peng: f64,
}

impl AlgTimes {
    pub fn get(&self, a: ApspAlgorithm) -> f64 {
        match a {
            ApspAlgorithm::Dijkstra => self.dijkstra,
            ApspAlgorithm::Peng => self.peng,
            ApspAlgorithm::FloydWarshall => self.floyd_warshall,
        }
    }

    pub fn set(&mut self, a: ApspAlgorithm, v: f64) {
        match a {
            ApspAlgorithm::Dijkstra => self.dijkstra = v,
            ApspAlgorithm::Peng => self.peng = v,
            ApspAlgorithm::FloydWarshall => self.floyd_warshall = v,
        }
    }

    /// Fastest algorithm, ties resolved by [`ApspAlgorithm::TIE_ORDER`].
    pub fn best(&self) -> ApspAlgorithm {
        let mut best = ApspAlgorithm::TIE_ORDER[0];
        for a in ApspAlgorithm::TIE_ORDER {
            if self.get(a) < self.get(best) {
                best = a;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopCounts {
    pub dijkstra: u64,
    pub peng: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub graph_id: String,
    pub times_s: AlgTimes,
    pub pops: PopCounts,
    pub best: ApspAlgorithm,
}

/// Median of a non-empty sample (mean of the middle pair for even sizes).
pub fn median(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k % 2 == 1 {
        s[k / 2]
    } else {
        0.5 * (s[k / 2 - 1] + s[k / 2])
    }
}

fn time_once(alg: ApspAlgorithm, g: &WeightedGraph) -> f64 {
    let start = Instant::now();
    let d = alg.run(g);
    let el = start.elapsed().as_secs_f64();
    std::hint::black_box(d);
    el.max(f64::MIN_POSITIVE)
}

/// Runs all three algorithms on `g`, checks that their outputs agree, then
/// records the median of `repeats` timed runs per algorithm after one
/// discarded warm-up. Runs are strictly sequential.
pub fn run_apsp_portfolio(g: &WeightedGraph, repeats: usize) -> Result<RunRecord, ApspError> {
    if repeats == 0 {
        return Err(ApspError::NoRepeats);
    }
    let (dij, dij_c) = apsp_dijkstra(g);
    let (peng, peng_c) = apsp_peng(g);
    let fw = apsp_floyd_warshall(g);
    for (alg, other) in [(ApspAlgorithm::Peng, &peng), (ApspAlgorithm::FloydWarshall, &fw)] {
        if *other != dij {
            return Err(ApspError::Disagreement {
                graph_id: g.id.clone(),
                left: ApspAlgorithm::Dijkstra,
                right: alg,
            });
        }
    }
    drop((dij, peng, fw));
    let mut times = AlgTimes::default();
    for alg in ApspAlgorithm::ALL {
        let samples: Vec<f64> = (0..repeats).map(|_| time_once(alg, g)).collect();
        times.set(alg, median(&samples));
    }
    Ok(RunRecord {
        graph_id: g.id.clone(),
        best: times.best(),
        times_s: times,
        pops: PopCounts {
            dijkstra: dij_c.pops,
            peng: peng_c.pops,
        },
    })
}
