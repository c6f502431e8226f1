//! Integer max-flow by shortest augmenting paths (Edmonds–Karp).
//!
//! BFS visits arcs in insertion order, so the resulting flow is a
//! deterministic function of how the network was built.

use std::collections::VecDeque;

#[derive(Clone, Debug)]
struct Arc {
    to: usize,
    cap: i64,
    /// Index of the reverse arc in `arcs`.
    rev: usize,
}

#[derive(Clone, Debug, Default)]
pub struct FlowNetwork {
    arcs: Vec<Arc>,
    adjacency: Vec<Vec<usize>>,
    original: Vec<i64>,
}

/// Handle of an arc added with [`FlowNetwork::add_edge`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeId(usize);

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        Self {
            arcs: Vec::new(),
            adjacency: vec![Vec::new(); nodes],
            original: Vec::new(),
        }
    }

    pub fn nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: i64) -> EdgeId {
        assert!(cap >= 0, "negative capacity");
        let id = self.arcs.len();
        self.arcs.push(Arc { to, cap, rev: id + 1 });
        self.arcs.push(Arc {
            to: from,
            cap: 0,
            rev: id,
        });
        self.original.extend([cap, 0]);
        self.adjacency[from].push(id);
        self.adjacency[to].push(id + 1);
        EdgeId(id)
    }

    /// Flow currently routed along an edge.
    pub fn flow(&self, edge: EdgeId) -> i64 {
        self.original[edge.0] - self.arcs[edge.0].cap
    }

    pub fn capacity(&self, edge: EdgeId) -> i64 {
        self.original[edge.0]
    }

    /// Augments from `source` to `sink` until no path remains; returns the
    /// total flow added by this call.
    pub fn max_flow(&mut self, source: usize, sink: usize) -> i64 {
        let n = self.nodes();
        let mut total = 0;
        let mut parent: Vec<Option<usize>> = vec![None; n];
        let mut queue = VecDeque::new();
        loop {
            parent.iter_mut().for_each(|p| *p = None);
            queue.clear();
            queue.push_back(source);
            let mut reached = source == sink;
            while let Some(u) = queue.pop_front() {
                if reached {
                    break;
                }
                for &a in &self.adjacency[u] {
                    let arc = &self.arcs[a];
                    if arc.cap > 0 && arc.to != source && parent[arc.to].is_none() {
                        parent[arc.to] = Some(a);
                        if arc.to == sink {
                            reached = true;
                            break;
                        }
                        queue.push_back(arc.to);
                    }
                }
            }
            if !reached || source == sink {
                return total;
            }
            let mut bottleneck = i64::MAX;
            let mut v = sink;
            while let Some(a) = parent[v] {
                bottleneck = bottleneck.min(self.arcs[a].cap);
                v = self.arcs[self.arcs[a].rev].to;
            }
            let mut v = sink;
            while let Some(a) = parent[v] {
                self.arcs[a].cap -= bottleneck;
                let r = self.arcs[a].rev;
                self.arcs[r].cap += bottleneck;
                v = self.arcs[r].to;
            }
            total += bottleneck;
        }
    }
}
