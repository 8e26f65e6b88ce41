//! Max-weight bipartite b-matching by successive shortest paths.
//!
//! Network: source → AP (capacity tau_p) → UE (capacity 1, cost −w) → sink
//! (capacity x). Each augmentation follows the cheapest residual path; the
//! cost of successive paths is nondecreasing, so stopping at the first path
//! with nonnegative cost yields a maximum-weight flow of any size. Capacities
//! are integers, so every flow is integral.

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    cap: i64,
    cost: f64,
    rev: usize,
}

struct Graph {
    adj: Vec<Vec<Edge>>,
}

impl Graph {
    fn new(n: usize) -> Self {
        Graph { adj: vec![Vec::new(); n] }
    }

    fn add(&mut self, from: usize, to: usize, cap: i64, cost: f64) -> (usize, usize) {
        let fi = self.adj[from].len();
        let ti = self.adj[to].len();
        self.adj[from].push(Edge { to, cap, cost, rev: ti });
        self.adj[to].push(Edge { to: from, cap: 0, cost: -cost, rev: fi });
        (from, fi)
    }

    /// Bellman-Ford from `src`, scanning nodes and edges in index order so
    /// that ties resolve the same way on every run. Returns the predecessor
    /// edge of each node and the distance to each node.
    fn shortest_paths(&self, src: usize) -> (Vec<Option<(usize, usize)>>, Vec<f64>) {
        let n = self.adj.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![None; n];
        dist[src] = 0.0;
        for _ in 0..n {
            let mut changed = false;
            for u in 0..n {
                if dist[u] == f64::INFINITY {
                    continue;
                }
                for (ei, e) in self.adj[u].iter().enumerate() {
                    if e.cap > 0 && dist[u] + e.cost < dist[e.to] {
                        dist[e.to] = dist[u] + e.cost;
                        pred[e.to] = Some((u, ei));
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        (pred, dist)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    /// Row-major L×K assignment.
    pub a: Vec<bool>,
    /// Flow on every AP→UE edge, row-major; `None` where no edge exists.
    pub edge_flow: Vec<Option<i64>>,
    /// All AP→UE edge flows are 0 or 1.
    pub integral: bool,
    pub augmentations: usize,
}

/// Solves max Σ w·a with row sums ≤ `row_cap`, column sums ≤ `col_cap`.
/// Cells with `None` weight are absent from the graph.
pub fn max_weight_b_matching(l: usize, k: usize, w: &[Option<f64>], row_cap: usize, col_cap: usize) -> FlowSolution {
    assert_eq!(w.len(), l * k, "weight matrix must be l*k");
    let src = 0;
    let sink = l + k + 1;
    let mut g = Graph::new(l + k + 2);
    for ap in 0..l {
        g.add(src, 1 + ap, row_cap as i64, 0.0);
    }
    let mut cell_edges = vec![None; l * k];
    for ap in 0..l {
        for ue in 0..k {
            if let Some(wt) = w[ap * k + ue] {
                cell_edges[ap * k + ue] = Some(g.add(1 + ap, 1 + l + ue, 1, -wt));
            }
        }
    }
    for ue in 0..k {
        g.add(1 + l + ue, sink, col_cap as i64, 0.0);
    }

    let mut augmentations = 0;
    loop {
        let (pred, dist) = g.shortest_paths(src);
        if !(dist[sink] < 0.0) {
            break;
        }
        let mut bottleneck = i64::MAX;
        let mut v = sink;
        while let Some((u, ei)) = pred[v] {
            bottleneck = bottleneck.min(g.adj[u][ei].cap);
            v = u;
        }
        let mut v = sink;
        while let Some((u, ei)) = pred[v] {
            g.adj[u][ei].cap -= bottleneck;
            let (to, rev) = (g.adj[u][ei].to, g.adj[u][ei].rev);
            g.adj[to][rev].cap += bottleneck;
            v = u;
        }
        augmentations += 1;
    }

    let edge_flow: Vec<Option<i64>> = cell_edges
        .iter()
        .map(|e| e.map(|(u, ei)| 1 - g.adj[u][ei].cap))
        .collect();
    let integral = edge_flow.iter().flatten().all(|&f| f == 0 || f == 1);
    let a = edge_flow.iter().map(|f| *f == Some(1)).collect();
    FlowSolution { a, edge_flow, integral, augmentations }
}
