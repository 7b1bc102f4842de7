//! Dinic's maximum flow on integer capacities.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    cap: u64,
    /// Index of the paired reverse edge in `graph[to]`.
    rev: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct FlowNetwork {
    graph: Vec<Vec<Edge>>,
    level: Vec<i64>,
    cursor: Vec<usize>,
}

/// Handle to a forward edge, used to read back its flow.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EdgeRef {
    from: usize,
    index: usize,
    cap: u64,
}

impl FlowNetwork {
    pub(crate) fn new(nodes: usize) -> Self {
        Self {
            graph: vec![Vec::new(); nodes],
            level: vec![0; nodes],
            cursor: vec![0; nodes],
        }
    }

    pub(crate) fn add_edge(&mut self, from: usize, to: usize, cap: u64) -> EdgeRef {
        let index = self.graph[from].len();
        let rev = self.graph[to].len() + usize::from(from == to);
        self.graph[from].push(Edge { to, cap, rev });
        self.graph[to].push(Edge {
            to: from,
            cap: 0,
            rev: index,
        });
        EdgeRef { from, index, cap }
    }

    pub(crate) fn flow_on(&self, e: EdgeRef) -> u64 {
        e.cap - self.graph[e.from][e.index].cap
    }

    pub(crate) fn max_flow(&mut self, source: usize, sink: usize) -> u64 {
        let mut total = 0;
        while self.bfs(source, sink) {
            self.cursor.iter_mut().for_each(|c| *c = 0);
            loop {
                let pushed = self.dfs(source, sink, u64::MAX);
                if pushed == 0 {
                    break;
                }
                total += pushed;
            }
        }
        total
    }

    fn bfs(&mut self, source: usize, sink: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            for e in &self.graph[u] {
                if e.cap > 0 && self.level[e.to] < 0 {
                    self.level[e.to] = self.level[u] + 1;
                    queue.push_back(e.to);
                }
            }
        }
        self.level[sink] >= 0
    }

    fn dfs(&mut self, u: usize, sink: usize, limit: u64) -> u64 {
        if u == sink {
            return limit;
        }
        while self.cursor[u] < self.graph[u].len() {
            let i = self.cursor[u];
            let Edge { to, cap, rev } = self.graph[u][i];
            if cap > 0 && self.level[to] == self.level[u] + 1 {
                let pushed = self.dfs(to, sink, limit.min(cap));
                if pushed > 0 {
                    self.graph[u][i].cap -= pushed;
                    self.graph[to][rev].cap += pushed;
                    return pushed;
                }
            }
            self.cursor[u] += 1;
        }
        0
    }
}
