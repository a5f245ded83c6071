//! Min s-t cut by augmenting paths over two search trees that are kept
//! between augmentations (the Boykov-Kolmogorov scheme).

use std::collections::VecDeque;

const TERMINAL: usize = usize::MAX;
const ORPHAN: usize = usize::MAX - 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Tree {
    Free,
    Source,
    Sink,
}

/// A capacitated graph with source and sink links on every node.
#[derive(Clone, Debug, Default)]
pub struct FlowNetwork {
    source_cap: Vec<f64>,
    sink_cap: Vec<f64>,
    /// `(from, to, cap, rev_cap)`
    edges: Vec<(usize, usize, f64, f64)>,
}

/// Result of [`min_cut`].
#[derive(Clone, Debug, PartialEq)]
pub struct MinCut {
    pub flow_value: f64,
    pub cut_value: f64,
    /// `true` for nodes on the source side.
    pub source_side: Vec<bool>,
}

impl MinCut {
    pub fn on_source_side(&self, node: usize) -> bool {
        self.source_side[node]
    }
}

fn check_cap(cap: f64) {
    assert!(cap.is_finite() && cap >= 0.0, "capacity must be finite and non-negative, got {cap}");
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        Self {
            source_cap: vec![0.0; nodes],
            sink_cap: vec![0.0; nodes],
            edges: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.source_cap.len()
    }

    pub fn add_node(&mut self) -> usize {
        self.source_cap.push(0.0);
        self.sink_cap.push(0.0);
        self.source_cap.len() - 1
    }

    /// Adds to the source and sink link capacities of `node`.
    pub fn add_terminal(&mut self, node: usize, source: f64, sink: f64) {
        check_cap(source);
        check_cap(sink);
        self.source_cap[node] += source;
        self.sink_cap[node] += sink;
    }

    /// Adds an edge with capacity `cap` from `a` to `b` and `rev_cap` from
    /// `b` to `a`.
    pub fn add_edge(&mut self, a: usize, b: usize, cap: f64, rev_cap: f64) {
        check_cap(cap);
        check_cap(rev_cap);
        assert!(a < self.node_count() && b < self.node_count() && a != b);
        if cap > 0.0 || rev_cap > 0.0 {
            self.edges.push((a, b, cap, rev_cap));
        }
    }

    /// Capacity of the cut separating `source_side` from the rest.
    pub fn cut_cost(&self, source_side: &[bool]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.node_count() {
            total += if source_side[i] { self.sink_cap[i] } else { self.source_cap[i] };
        }
        for &(a, b, cap, rev) in &self.edges {
            match (source_side[a], source_side[b]) {
                (true, false) => total += cap,
                (false, true) => total += rev,
                _ => {}
            }
        }
        total
    }
}

struct Solver {
    head: Vec<usize>,
    cap: Vec<f64>,
    out: Vec<Vec<usize>>,
    residual_terminal: Vec<f64>,
    tree: Vec<Tree>,
    parent: Vec<usize>,
    active: VecDeque<usize>,
    queued: Vec<bool>,
    orphans: Vec<usize>,
    flow: f64,
}

impl Solver {
    fn new(net: &FlowNetwork) -> Self {
        let n = net.node_count();
        let mut head = Vec::with_capacity(net.edges.len() * 2);
        let mut cap = Vec::with_capacity(net.edges.len() * 2);
        let mut out = vec![Vec::new(); n];
        for &(a, b, c, r) in &net.edges {
            out[a].push(head.len());
            head.push(b);
            cap.push(c);
            out[b].push(head.len());
            head.push(a);
            cap.push(r);
        }
        let mut flow = 0.0;
        let residual_terminal = (0..n)
            .map(|i| {
                let (s, t) = (net.source_cap[i], net.sink_cap[i]);
                flow += s.min(t);
                s - t
            })
            .collect::<Vec<_>>();
        let mut solver = Self {
            head,
            cap,
            out,
            tree: vec![Tree::Free; n],
            parent: vec![ORPHAN; n],
            active: VecDeque::new(),
            queued: vec![false; n],
            orphans: Vec::new(),
            flow,
            residual_terminal,
        };
        for i in 0..n {
            let r = solver.residual_terminal[i];
            if r != 0.0 {
                solver.tree[i] = if r > 0.0 { Tree::Source } else { Tree::Sink };
                solver.parent[i] = TERMINAL;
                solver.activate(i);
            }
        }
        solver
    }

    fn tail(&self, arc: usize) -> usize {
        self.head[arc ^ 1]
    }

    fn activate(&mut self, v: usize) {
        if !self.queued[v] {
            self.queued[v] = true;
            self.active.push_back(v);
        }
    }

    /// Grows the trees until they touch; returns the connecting arc,
    /// oriented from the source tree to the sink tree.
    fn grow(&mut self) -> Option<usize> {
        while let Some(&p) = self.active.front() {
            if self.tree[p] != Tree::Free {
                for k in 0..self.out[p].len() {
                    let a = self.out[p][k];
                    let q = self.head[a];
                    match self.tree[p] {
                        Tree::Source if self.cap[a] > 0.0 => match self.tree[q] {
                            Tree::Free => {
                                self.tree[q] = Tree::Source;
                                self.parent[q] = a;
                                self.activate(q);
                            }
                            Tree::Sink => return Some(a),
                            Tree::Source => {}
                        },
                        Tree::Sink if self.cap[a ^ 1] > 0.0 => match self.tree[q] {
                            Tree::Free => {
                                self.tree[q] = Tree::Sink;
                                self.parent[q] = a ^ 1;
                                self.activate(q);
                            }
                            Tree::Source => return Some(a ^ 1),
                            Tree::Sink => {}
                        },
                        _ => {}
                    }
                }
            }
            self.active.pop_front();
            self.queued[p] = false;
        }
        None
    }

    fn augment(&mut self, bridge: usize) {
        let mut bottleneck = self.cap[bridge];
        let mut v = self.tail(bridge);
        while self.parent[v] != TERMINAL {
            let a = self.parent[v];
            bottleneck = bottleneck.min(self.cap[a]);
            v = self.tail(a);
        }
        bottleneck = bottleneck.min(self.residual_terminal[v]);
        let mut v = self.head[bridge];
        while self.parent[v] != TERMINAL {
            let a = self.parent[v];
            bottleneck = bottleneck.min(self.cap[a]);
            v = self.head[a];
        }
        bottleneck = bottleneck.min(-self.residual_terminal[v]);

        self.push(bridge, bottleneck);
        let mut v = self.tail(bridge);
        while self.parent[v] != TERMINAL {
            let a = self.parent[v];
            self.push(a, bottleneck);
            let up = self.tail(a);
            if self.cap[a] <= 0.0 {
                self.make_orphan(v);
            }
            v = up;
        }
        self.residual_terminal[v] -= bottleneck;
        if self.residual_terminal[v] <= 0.0 {
            self.residual_terminal[v] = 0.0;
            self.make_orphan(v);
        }
        let mut v = self.head[bridge];
        while self.parent[v] != TERMINAL {
            let a = self.parent[v];
            self.push(a, bottleneck);
            let down = self.head[a];
            if self.cap[a] <= 0.0 {
                self.make_orphan(v);
            }
            v = down;
        }
        self.residual_terminal[v] += bottleneck;
        if self.residual_terminal[v] >= 0.0 {
            self.residual_terminal[v] = 0.0;
            self.make_orphan(v);
        }
        self.flow += bottleneck;
    }

    fn push(&mut self, arc: usize, amount: f64) {
        self.cap[arc] -= amount;
        self.cap[arc ^ 1] += amount;
    }

    fn make_orphan(&mut self, v: usize) {
        self.parent[v] = ORPHAN;
        self.orphans.push(v);
    }

    /// Whether `v` still reaches its terminal through parent links.
    fn rooted(&self, mut v: usize) -> bool {
        let tree = self.tree[v];
        loop {
            match self.parent[v] {
                TERMINAL => return true,
                ORPHAN => return false,
                a => v = if tree == Tree::Source { self.tail(a) } else { self.head[a] },
            }
        }
    }

    fn adopt(&mut self) {
        while let Some(p) = self.orphans.pop() {
            if self.parent[p] != ORPHAN {
                continue;
            }
            let tree = self.tree[p];
            let mut found = None;
            for &a in &self.out[p] {
                let q = self.head[a];
                if self.tree[q] != tree {
                    continue;
                }
                let (link, residual) = match tree {
                    Tree::Source => (a ^ 1, self.cap[a ^ 1]),
                    _ => (a, self.cap[a]),
                };
                if residual > 0.0 && self.rooted(q) {
                    found = Some(link);
                    break;
                }
            }
            if let Some(link) = found {
                self.parent[p] = link;
                continue;
            }
            for k in 0..self.out[p].len() {
                let a = self.out[p][k];
                let q = self.head[a];
                if self.tree[q] != tree {
                    continue;
                }
                let residual = match tree {
                    Tree::Source => self.cap[a ^ 1],
                    _ => self.cap[a],
                };
                if residual > 0.0 {
                    self.activate(q);
                }
                let pa = self.parent[q];
                if pa != TERMINAL && pa != ORPHAN {
                    let up = if tree == Tree::Source { self.tail(pa) } else { self.head[pa] };
                    if up == p {
                        self.make_orphan(q);
                    }
                }
            }
            self.tree[p] = Tree::Free;
        }
    }

    fn run(&mut self) {
        while let Some(bridge) = self.grow() {
            self.augment(bridge);
            self.adopt();
        }
    }

    /// Nodes reachable from the source in the residual graph.
    fn source_reachable(&self) -> Vec<bool> {
        let n = self.tree.len();
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = (0..n).filter(|&i| self.residual_terminal[i] > 0.0).collect();
        for &i in &stack {
            seen[i] = true;
        }
        while let Some(v) = stack.pop() {
            for &a in &self.out[v] {
                let q = self.head[a];
                if self.cap[a] > 0.0 && !seen[q] {
                    seen[q] = true;
                    stack.push(q);
                }
            }
        }
        seen
    }
}

/// Computes a minimum s-t cut. The source side returned is the smallest
/// one: exactly the nodes reachable from the source in the final residual
/// graph.
pub fn min_cut(network: &FlowNetwork) -> MinCut {
    let mut solver = Solver::new(network);
    solver.run();
    let source_side = solver.source_reachable();
    MinCut {
        flow_value: solver.flow,
        cut_value: network.cut_cost(&source_side),
        source_side,
    }
}
