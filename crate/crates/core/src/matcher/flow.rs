//! Successive-shortest-path min-cost flow with real arc costs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: i64,
    cost: f64,
}

/// Residual graph. Arc `2i` is the i-th forward arc, `2i + 1` its reverse.
#[derive(Debug, Clone)]
pub struct FlowGraph {
    arcs: Vec<Arc>,
    out: Vec<Vec<usize>>,
    original_cap: Vec<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Label {
    dist: f64,
    node: usize,
}

impl Eq for Label {}

impl Ord for Label {
    // min-heap on (dist, node)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl FlowGraph {
    pub fn new(n_nodes: usize) -> Self {
        FlowGraph {
            arcs: Vec::new(),
            out: vec![Vec::new(); n_nodes],
            original_cap: Vec::new(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.out.len()
    }

    /// Adds `from -> to`; returns the arc id for [`FlowGraph::flow`].
    pub fn add_arc(&mut self, from: usize, to: usize, cap: i64, cost: f64) -> usize {
        debug_assert!(cap >= 0 && cost.is_finite());
        let id = self.original_cap.len();
        self.out[from].push(self.arcs.len());
        self.arcs.push(Arc { to, cap, cost });
        self.out[to].push(self.arcs.len());
        self.arcs.push(Arc {
            to: from,
            cap: 0,
            cost: -cost,
        });
        self.original_cap.push(cap);
        id
    }

    pub fn flow(&self, arc: usize) -> i64 {
        self.original_cap[arc] - self.arcs[2 * arc].cap
    }

    /// Bellman–Ford from `source` over arcs with residual capacity.
    /// Unreachable nodes get potential 0; they stay unreachable.
    fn initial_potentials(&self, source: usize) -> Vec<f64> {
        let n = self.n_nodes();
        let mut d = vec![f64::INFINITY; n];
        d[source] = 0.0;
        for _ in 0..n {
            let mut changed = false;
            for u in 0..n {
                if d[u] == f64::INFINITY {
                    continue;
                }
                for &e in &self.out[u] {
                    let a = &self.arcs[e];
                    if a.cap > 0 && d[u] + a.cost < d[a.to] {
                        d[a.to] = d[u] + a.cost;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        d.iter()
            .map(|&x| if x.is_finite() { x } else { 0.0 })
            .collect()
    }

    /// Sends up to `limit` units from `source` to `sink` at minimum cost.
    /// Returns the amount sent. Requires no negative-cost cycles.
    pub fn min_cost_flow(&mut self, source: usize, sink: usize, limit: i64) -> i64 {
        let n = self.n_nodes();
        let mut potential = self.initial_potentials(source);
        let mut sent = 0;
        let mut dist = vec![f64::INFINITY; n];
        let mut parent = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        while sent < limit {
            dist.fill(f64::INFINITY);
            parent.fill(usize::MAX);
            dist[source] = 0.0;
            heap.push(Label {
                dist: 0.0,
                node: source,
            });
            while let Some(Label { dist: d, node: u }) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for &e in &self.out[u] {
                    let a = &self.arcs[e];
                    if a.cap == 0 {
                        continue;
                    }
                    // Exact reduced costs are >= 0; clamp rounding noise so
                    // Dijkstra cannot chase a spurious negative cycle.
                    let reduced = (a.cost + potential[u] - potential[a.to]).max(0.0);
                    let nd = d + reduced;
                    if nd < dist[a.to] {
                        dist[a.to] = nd;
                        parent[a.to] = e;
                        heap.push(Label {
                            dist: nd,
                            node: a.to,
                        });
                    }
                }
            }
            if dist[sink] == f64::INFINITY {
                break;
            }
            for v in 0..n {
                if dist[v] < f64::INFINITY {
                    potential[v] += dist[v];
                }
            }
            let mut push = limit - sent;
            let mut v = sink;
            while v != source {
                let e = parent[v];
                push = push.min(self.arcs[e].cap);
                v = self.arcs[e ^ 1].to;
            }
            let mut v = sink;
            while v != source {
                let e = parent[v];
                self.arcs[e].cap -= push;
                self.arcs[e ^ 1].cap += push;
                v = self.arcs[e ^ 1].to;
            }
            sent += push;
        }
        sent
    }
}
