//! Incremental breadth-first search on the submodular flow network.
//!
//! Two vertex-disjoint search trees grow from the source and the sink one
//! BFS layer at a time, in strictly alternating forward and reverse passes.
//! When an arc joins the trees the path through them is augmented by its
//! bottleneck; nodes whose tree arc lost all residual capacity become orphans
//! and are re-adopted (or relabeled, or freed) in order of their distance
//! label.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use super::network::{Arc, FlowNetwork};
use super::{FlowOptions, FlowStats, FlowTrace};
use crate::energy::Labeling;
use crate::error::Result;

const NO_PARENT: u32 = u32::MAX;
const TERMINAL: u32 = u32::MAX - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tree {
    Free,
    Source,
    Sink,
}

/// One incidence of a node in a clique, pointing at another member.
#[derive(Debug, Clone, Copy)]
struct Neighbor {
    clique: u32,
    self_pos: u8,
    other_pos: u8,
    other: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pass {
    Forward,
    Reverse,
}

pub(crate) struct Ibfs<'a> {
    net: &'a mut FlowNetwork,
    opts: &'a FlowOptions,
    eps: f64,
    adj: Vec<Vec<Neighbor>>,
    tree: Vec<Tree>,
    /// Index into `adj[v]` of the tree arc, `TERMINAL`, or `NO_PARENT`.
    parent: Vec<u32>,
    dist_s: Vec<u32>,
    dist_t: Vec<u32>,
    cursor: Vec<u32>,
    orphan: Vec<bool>,
    depth_s: u32,
    depth_t: u32,
    /// Nodes at level `depth_s` still to be scanned by the current or next
    /// forward pass (and likewise for the sink tree).
    active_s: Vec<u32>,
    active_t: Vec<u32>,
    /// Layer being built by the pass in progress.
    next_layer: Vec<u32>,
    pass: Option<Pass>,
    orphans_s: BinaryHeap<Reverse<(u32, u32)>>,
    orphans_t: BinaryHeap<Reverse<(u32, u32)>>,
    pub stats: FlowStats,
    pub trace: Option<FlowTrace>,
    // highest label ever assigned per node, per tree, for the trace
    seen_s: Vec<u32>,
    seen_t: Vec<u32>,
}

impl<'a> Ibfs<'a> {
    pub fn new(net: &'a mut FlowNetwork, opts: &'a FlowOptions) -> Self {
        let n = net.num_vars();
        let mut adj: Vec<Vec<Neighbor>> = vec![Vec::new(); n];
        for (c, slot) in net.cliques.iter().enumerate() {
            for (p, &v) in slot.members.iter().enumerate() {
                for (q, &w) in slot.members.iter().enumerate() {
                    if p != q {
                        adj[v as usize].push(Neighbor {
                            clique: c as u32,
                            self_pos: p as u8,
                            other_pos: q as u8,
                            other: w,
                        });
                    }
                }
            }
        }
        let eps = opts.positive_capacity * net.scale();
        let trace = opts.trace.then(FlowTrace::default);
        Ibfs {
            net,
            opts,
            eps,
            adj,
            tree: vec![Tree::Free; n],
            parent: vec![NO_PARENT; n],
            dist_s: vec![0; n],
            dist_t: vec![0; n],
            cursor: vec![0; n],
            orphan: vec![false; n],
            depth_s: 1,
            depth_t: 1,
            active_s: Vec::new(),
            active_t: Vec::new(),
            next_layer: Vec::new(),
            pass: None,
            orphans_s: BinaryHeap::new(),
            orphans_t: BinaryHeap::new(),
            stats: FlowStats::default(),
            trace,
            seen_s: vec![0; n],
            seen_t: vec![0; n],
        }
    }

    /// Runs to maximum flow and returns the set reachable from the source in
    /// the final residual network.
    pub fn run(&mut self) -> Result<Labeling> {
        self.saturate_direct_paths()?;
        loop {
            self.init_trees();
            loop {
                if !self.grow(Pass::Forward)? || !self.grow(Pass::Reverse)? {
                    break;
                }
            }
            let (reach, hits_sink) = self.source_reachable();
            if !hits_sink {
                return Ok(reach);
            }
            // A missed augmenting path: rebuild both trees from scratch.
            log::debug!("IBFS terminated with an augmenting path left; restarting search");
            self.stats.restarts += 1;
            if let Some(t) = &mut self.trace {
                t.epochs += 1;
            }
            self.seen_s.iter_mut().for_each(|x| *x = 0);
            self.seen_t.iter_mut().for_each(|x| *x = 0);
        }
    }

    fn cap(&mut self, clique: u32, from: u8, to: u8) -> f64 {
        self.stats.capacity_evals += 1;
        self.net
            .interior_capacity(clique as usize, from as usize, to as usize)
    }

    /// Capacity of the arc `(other -> v)` described by `adj[v][e]`.
    fn in_cap(&mut self, v: u32, e: usize) -> f64 {
        let nb = self.adj[v as usize][e];
        self.cap(nb.clique, nb.other_pos, nb.self_pos)
    }

    /// Capacity of the arc `(v -> other)` described by `adj[v][e]`.
    fn out_cap(&mut self, v: u32, e: usize) -> f64 {
        let nb = self.adj[v as usize][e];
        self.cap(nb.clique, nb.self_pos, nb.other_pos)
    }

    fn saturate_direct_paths(&mut self) -> Result<()> {
        for v in 0..self.net.num_vars() {
            let delta = self.net.source[v].min(self.net.sink[v]);
            if delta > self.eps {
                self.net.push(Arc::Source(v), delta)?;
                self.net.push(Arc::Sink(v), delta)?;
                self.stats.flow_value += delta;
                self.stats.augmentations += 1;
                if let Some(t) = &mut self.trace {
                    t.path_lengths.push(2);
                }
            }
        }
        Ok(())
    }

    fn init_trees(&mut self) {
        let n = self.net.num_vars();
        self.tree.iter_mut().for_each(|t| *t = Tree::Free);
        self.parent.iter_mut().for_each(|p| *p = NO_PARENT);
        self.cursor.iter_mut().for_each(|c| *c = 0);
        self.orphan.iter_mut().for_each(|o| *o = false);
        self.active_s.clear();
        self.active_t.clear();
        self.depth_s = 1;
        self.depth_t = 1;
        for v in 0..n {
            if self.net.source[v] > self.eps {
                self.attach(v as u32, Tree::Source, TERMINAL, 1);
                self.active_s.push(v as u32);
            } else if self.net.sink[v] > self.eps {
                self.attach(v as u32, Tree::Sink, TERMINAL, 1);
                self.active_t.push(v as u32);
            }
        }
    }

    fn attach(&mut self, v: u32, tree: Tree, parent: u32, label: u32) {
        let vi = v as usize;
        self.tree[vi] = tree;
        self.parent[vi] = parent;
        self.orphan[vi] = false;
        let (dist, seen) = match tree {
            Tree::Source => (&mut self.dist_s, &mut self.seen_s),
            Tree::Sink => (&mut self.dist_t, &mut self.seen_t),
            Tree::Free => unreachable!(),
        };
        dist[vi] = label;
        if let Some(t) = &mut self.trace {
            if label < seen[vi] {
                t.label_decreases += 1;
            }
        }
        seen[vi] = seen[vi].max(label);
    }

    fn label(&self, v: u32, tree: Tree) -> u32 {
        match tree {
            Tree::Source => self.dist_s[v as usize],
            _ => self.dist_t[v as usize],
        }
    }

    /// One pass growing the source tree (forward) or the sink tree (reverse)
    /// by a layer. Returns false when the new layer is empty, which means no
    /// augmenting path remains.
    fn grow(&mut self, pass: Pass) -> Result<bool> {
        let own = match pass {
            Pass::Forward => Tree::Source,
            Pass::Reverse => Tree::Sink,
        };
        self.pass = Some(pass);
        self.next_layer.clear();
        let layer = match pass {
            Pass::Forward => std::mem::take(&mut self.active_s),
            Pass::Reverse => std::mem::take(&mut self.active_t),
        };
        let depth = match pass {
            Pass::Forward => self.depth_s,
            Pass::Reverse => self.depth_t,
        };
        let mut queue = layer;
        let mut idx = 0;
        while idx < queue.len() {
            let v = queue[idx];
            idx += 1;
            self.scan(v, own, depth)?;
            // Orphans relabeled onto the layer being scanned are appended.
            let current = match pass {
                Pass::Forward => &mut self.active_s,
                Pass::Reverse => &mut self.active_t,
            };
            queue.append(current);
        }
        let next = std::mem::take(&mut self.next_layer);
        let grew = !next.is_empty();
        match pass {
            Pass::Forward => {
                self.depth_s += 1;
                self.active_s = next;
            }
            Pass::Reverse => {
                self.depth_t += 1;
                self.active_t = next;
            }
        }
        self.pass = None;
        Ok(grew)
    }

    fn scan(&mut self, v: u32, own: Tree, depth: u32) -> Result<()> {
        let vi = v as usize;
        'rescan: loop {
            if self.tree[vi] != own || self.orphan[vi] || self.label(v, own) != depth {
                return Ok(());
            }
            for e in 0..self.adj[vi].len() {
                let c = match own {
                    Tree::Source => self.out_cap(v, e),
                    _ => self.in_cap(v, e),
                };
                if c <= self.eps {
                    continue;
                }
                let w = self.adj[vi][e].other;
                match self.tree[w as usize] {
                    Tree::Free => {
                        let back = self.adj[w as usize]
                            .iter()
                            .position(|nb| {
                                let here = self.adj[vi][e];
                                nb.clique == here.clique && nb.other == v
                            })
                            .expect("incidence lists are symmetric");
                        self.attach(w, own, back as u32, depth + 1);
                        self.next_layer.push(w);
                    }
                    t if t == own => {}
                    _ => {
                        match own {
                            Tree::Source => self.augment(v, w, e)?,
                            _ => {
                                let back = self.reverse_index(v, e);
                                self.augment(w, v, back)?
                            }
                        }
                        self.adopt();
                        continue 'rescan;
                    }
                }
            }
            return Ok(());
        }
    }

    /// Index in `adj[other]` of the incidence mirroring `adj[v][e]`.
    fn reverse_index(&self, v: u32, e: usize) -> usize {
        let here = self.adj[v as usize][e];
        self.adj[here.other as usize]
            .iter()
            .position(|nb| nb.clique == here.clique && nb.other == v)
            .expect("incidence lists are symmetric")
    }

    /// Tree arc of `v` as a network arc; `None` for terminal arcs.
    fn tree_arc(&self, v: u32) -> Arc {
        let vi = v as usize;
        let p = self.parent[vi];
        match (self.tree[vi], p) {
            (Tree::Source, TERMINAL) => Arc::Source(vi),
            (Tree::Sink, TERMINAL) => Arc::Sink(vi),
            (Tree::Source, e) => {
                let nb = self.adj[vi][e as usize];
                Arc::Interior {
                    clique: nb.clique as usize,
                    from: nb.other_pos as usize,
                    to: nb.self_pos as usize,
                }
            }
            (Tree::Sink, e) => {
                let nb = self.adj[vi][e as usize];
                Arc::Interior {
                    clique: nb.clique as usize,
                    from: nb.self_pos as usize,
                    to: nb.other_pos as usize,
                }
            }
            (Tree::Free, _) => unreachable!("free node has no tree arc"),
        }
    }

    fn parent_node(&self, v: u32) -> Option<u32> {
        match self.parent[v as usize] {
            TERMINAL | NO_PARENT => None,
            e => Some(self.adj[v as usize][e as usize].other),
        }
    }

    fn arc_capacity(&mut self, arc: Arc) -> f64 {
        match arc {
            Arc::Source(i) => self.net.source[i],
            Arc::Sink(i) => self.net.sink[i],
            Arc::Interior { clique, from, to } => self.cap(clique as u32, from as u8, to as u8),
        }
    }

    /// Augments along `s -> ... -> from -> to -> ... -> t` where the bridge
    /// is the arc `(from -> to)` given by `adj[from][e]`.
    fn augment(&mut self, from: u32, to: u32, e: usize) -> Result<()> {
        let mut path = Vec::new();
        let mut x = from;
        loop {
            path.push(self.tree_arc(x));
            match self.parent_node(x) {
                Some(p) => x = p,
                None => break,
            }
        }
        path.reverse();
        let nb = self.adj[from as usize][e];
        path.push(Arc::Interior {
            clique: nb.clique as usize,
            from: nb.self_pos as usize,
            to: nb.other_pos as usize,
        });
        let mut y = to;
        loop {
            path.push(self.tree_arc(y));
            match self.parent_node(y) {
                Some(p) => y = p,
                None => break,
            }
        }

        let delta = self.bottleneck(&path);
        debug_assert!(delta > 0.0);
        for &arc in &path {
            self.net.push(arc, delta)?;
        }
        self.stats.flow_value += delta;
        self.stats.augmentations += 1;

        let mut saturated_any = false;
        let mut touched: Vec<usize> = Vec::new();
        for &arc in &path {
            if self.arc_capacity(arc) <= self.eps {
                saturated_any = true;
            }
            match arc {
                Arc::Source(i) | Arc::Sink(i) => {
                    if self.arc_capacity(arc) <= self.eps {
                        self.make_orphan(i as u32);
                    }
                }
                Arc::Interior { clique, .. } => {
                    if !touched.contains(&clique) {
                        touched.push(clique);
                    }
                }
            }
        }
        // Pushing inside a clique can saturate any tree arc of that clique,
        // not only the ones on the path.
        for c in touched {
            for m in self.net.clique_members(c) {
                let m = m as u32;
                let p = self.parent[m as usize];
                if self.tree[m as usize] == Tree::Free || p == TERMINAL || p == NO_PARENT {
                    continue;
                }
                if self.adj[m as usize][p as usize].clique as usize != c {
                    continue;
                }
                let arc = self.tree_arc(m);
                if self.arc_capacity(arc) <= self.eps {
                    self.make_orphan(m);
                }
            }
        }
        if let Some(t) = &mut self.trace {
            t.path_lengths.push(path.len());
            if !saturated_any {
                t.unsaturated_augmentations += 1;
            }
            t.lowest_residual = t.lowest_residual.min(self.net.lowest_residual);
        }
        Ok(())
    }

    /// Largest `delta` that can be pushed along `path` in order without
    /// driving any residual negative, accounting for earlier pushes on the
    /// path that changed tables of the same clique.
    fn bottleneck(&mut self, path: &[Arc]) -> f64 {
        let mut delta = f64::INFINITY;
        let mut coef: HashMap<usize, Vec<i32>> = HashMap::new();
        for &arc in path {
            match arc {
                Arc::Source(i) => delta = delta.min(self.net.source[i]),
                Arc::Sink(i) => delta = delta.min(self.net.sink[i]),
                Arc::Interior { clique, from, to } => {
                    self.stats.capacity_evals += 1;
                    let table = self.net.residual_table(clique);
                    let size = table.len();
                    let cs = coef.entry(clique).or_insert_with(|| vec![0; size]);
                    let (bf, bt) = (1usize << from, 1usize << to);
                    for (mask, &value) in table.iter().enumerate() {
                        if mask & bf != 0 && mask & bt == 0 {
                            let denom = 1 - cs[mask];
                            if denom > 0 {
                                delta = delta.min(value / denom as f64);
                            }
                        }
                    }
                    for (mask, c) in cs.iter_mut().enumerate() {
                        match (mask & bf != 0, mask & bt != 0) {
                            (true, false) => *c -= 1,
                            (false, true) => *c += 1,
                            _ => {}
                        }
                    }
                }
            }
        }
        delta
    }

    fn make_orphan(&mut self, v: u32) {
        let vi = v as usize;
        if self.orphan[vi] || self.tree[vi] == Tree::Free {
            return;
        }
        self.orphan[vi] = true;
        self.parent[vi] = NO_PARENT;
        match self.tree[vi] {
            Tree::Source => self.orphans_s.push(Reverse((self.dist_s[vi], v))),
            Tree::Sink => self.orphans_t.push(Reverse((self.dist_t[vi], v))),
            Tree::Free => {}
        }
    }

    fn adopt(&mut self) {
        while let Some(Reverse((_, v))) = self.orphans_s.pop() {
            self.process_orphan(v, Tree::Source);
        }
        while let Some(Reverse((_, v))) = self.orphans_t.pop() {
            self.process_orphan(v, Tree::Sink);
        }
    }

    /// Capacity of the arc from `v` toward its would-be parent `adj[v][e]`
    /// (into `v` for the source tree, out of `v` for the sink tree).
    fn parent_cap(&mut self, v: u32, e: usize, tree: Tree) -> f64 {
        match tree {
            Tree::Source => self.in_cap(v, e),
            _ => self.out_cap(v, e),
        }
    }

    fn terminal_cap(&self, v: u32, tree: Tree) -> f64 {
        match tree {
            Tree::Source => self.net.source[v as usize],
            _ => self.net.sink[v as usize],
        }
    }

    fn process_orphan(&mut self, v: u32, tree: Tree) {
        let vi = v as usize;
        if !self.orphan[vi] || self.tree[vi] != tree {
            return;
        }
        self.stats.adoptions += 1;
        let d = self.label(v, tree);

        // Same-level parent, starting at the current arc when enabled.
        if d == 1 {
            if self.terminal_cap(v, tree) > self.eps {
                self.attach(v, tree, TERMINAL, 1);
                return;
            }
        } else {
            let start = if self.opts.current_arc {
                self.cursor[vi] as usize
            } else {
                0
            };
            for e in start..self.adj[vi].len() {
                let u = self.adj[vi][e].other;
                if self.is_valid_parent(u, tree) && self.label(u, tree) == d - 1 {
                    if self.parent_cap(v, e, tree) > self.eps {
                        self.cursor[vi] = e as u32;
                        self.attach(v, tree, e as u32, d);
                        return;
                    }
                }
            }
        }

        // Relabel: the lowest-labeled potential parent, ties to the lowest
        // node index.
        let mut best: Option<(u32, u32, usize)> = None;
        if self.terminal_cap(v, tree) > self.eps {
            best = Some((0, 0, usize::MAX));
        } else {
            for e in 0..self.adj[vi].len() {
                let u = self.adj[vi][e].other;
                if !self.is_valid_parent(u, tree) {
                    continue;
                }
                let key = (self.label(u, tree), u);
                if best.is_some_and(|(l, n, _)| (l, n) <= key) {
                    continue;
                }
                if self.parent_cap(v, e, tree) > self.eps {
                    best = Some((key.0, key.1, e));
                }
            }
        }

        let limit = self.label_limit(tree);
        match best {
            Some((l, _, e)) if l + 1 <= limit => {
                let new_label = l + 1;
                let parent = if e == usize::MAX { TERMINAL } else { e as u32 };
                if new_label != d {
                    self.orphan_children(v, tree);
                }
                self.cursor[vi] = if e == usize::MAX { 0 } else { e as u32 };
                self.attach(v, tree, parent, new_label);
                self.enqueue_relabeled(v, tree, new_label);
            }
            _ => {
                self.orphan_children(v, tree);
                self.tree[vi] = Tree::Free;
                self.parent[vi] = NO_PARENT;
                self.orphan[vi] = false;
                self.cursor[vi] = 0;
            }
        }
    }

    fn is_valid_parent(&self, u: u32, tree: Tree) -> bool {
        self.tree[u as usize] == tree && !self.orphan[u as usize]
    }

    /// Largest label a node of `tree` may carry right now: one past the
    /// scanned depth for the tree growing in the current pass, the depth
    /// itself otherwise.
    fn label_limit(&self, tree: Tree) -> u32 {
        match (tree, self.pass) {
            (Tree::Source, Some(Pass::Forward)) => self.depth_s + 1,
            (Tree::Sink, Some(Pass::Reverse)) => self.depth_t + 1,
            (Tree::Source, _) => self.depth_s,
            _ => self.depth_t,
        }
    }

    fn enqueue_relabeled(&mut self, v: u32, tree: Tree, label: u32) {
        let (depth, growing) = match tree {
            Tree::Source => (self.depth_s, self.pass == Some(Pass::Forward)),
            _ => (self.depth_t, self.pass == Some(Pass::Reverse)),
        };
        if label == depth {
            match tree {
                Tree::Source => self.active_s.push(v),
                _ => self.active_t.push(v),
            }
        } else if growing && label == depth + 1 {
            self.next_layer.push(v);
        }
    }

    fn orphan_children(&mut self, v: u32, tree: Tree) {
        for e in 0..self.adj[v as usize].len() {
            let w = self.adj[v as usize][e].other;
            if self.tree[w as usize] == tree && self.parent_node(w) == Some(v) {
                self.make_orphan(w);
            }
        }
    }

    /// Breadth-first search from the source over positive residual arcs.
    /// Reports whether some reached node still has sink capacity.
    fn source_reachable(&mut self) -> (Labeling, bool) {
        let n = self.net.num_vars();
        let mut seen = vec![false; n];
        let mut queue: Vec<u32> = (0..n as u32)
            .filter(|&v| self.net.source[v as usize] > self.eps)
            .collect();
        for &v in &queue {
            seen[v as usize] = true;
        }
        let mut idx = 0;
        let mut hits_sink = false;
        while idx < queue.len() {
            let v = queue[idx];
            idx += 1;
            if self.net.sink[v as usize] > self.eps {
                hits_sink = true;
            }
            for e in 0..self.adj[v as usize].len() {
                let w = self.adj[v as usize][e].other;
                if !seen[w as usize] && self.out_cap(v, e) > self.eps {
                    seen[w as usize] = true;
                    queue.push(w);
                }
            }
        }
        (Labeling::from_bits(seen), hits_sink)
    }
}
