//! Node merging for controllers with `†` outputs.
//!
//! Two nodes are compatible when, after identifying them and closing the
//! identification under successors, every class has at most one concrete
//! output per observation. The quotient then agrees with the original
//! controller on every concrete output.

use std::collections::{HashMap, VecDeque};

use crate::controller::{Fsc, NodeId};
use crate::teacher::{OutputSymbol, SymbolKey};

/// Union-find over nodes with per-class merged outputs and an undo log.
struct Partition<'a> {
    fsc: &'a Fsc,
    parent: Vec<NodeId>,
    size: Vec<usize>,
    /// Per class root and observation, the interned concrete output if any.
    out: Vec<Vec<Option<usize>>>,
    log: Vec<Undo>,
}

enum Undo {
    Union {
        root: NodeId,
        child: NodeId,
        out: Vec<Option<usize>>,
    },
}

impl<'a> Partition<'a> {
    fn new(fsc: &'a Fsc) -> Self {
        let mut keys: HashMap<SymbolKey, usize> = HashMap::new();
        let n = fsc.num_nodes();
        let out = (0..n)
            .map(|node| {
                (0..fsc.num_observations())
                    .map(|z| match fsc.output(node, z) {
                        OutputSymbol::DontCare => None,
                        o => {
                            let next = keys.len();
                            Some(*keys.entry(o.key()).or_insert(next))
                        }
                    })
                    .collect()
            })
            .collect();
        Partition {
            fsc,
            parent: (0..n).collect(),
            size: vec![1; n],
            out,
            log: Vec::new(),
        }
    }

    fn find(&self, mut x: NodeId) -> NodeId {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    /// Identifies `a` and `b` and closes under successors. On conflict the
    /// partition is left unchanged and `false` is returned. Successful
    /// unions stay in the undo log.
    fn try_merge(&mut self, a: NodeId, b: NodeId) -> bool {
        let mark = self.log.len();
        let mut stack = vec![(a, b)];
        while let Some((x, y)) = stack.pop() {
            let (rx, ry) = (self.find(x), self.find(y));
            if rx == ry {
                continue;
            }
            let conflict = self.out[rx]
                .iter()
                .zip(&self.out[ry])
                .any(|(p, q)| matches!((p, q), (Some(p), Some(q)) if p != q));
            if conflict {
                self.rollback(mark);
                return false;
            }
            let (root, child) = if self.size[rx] >= self.size[ry] { (rx, ry) } else { (ry, rx) };
            self.log.push(Undo::Union {
                root,
                child,
                out: self.out[root].clone(),
            });
            self.parent[child] = root;
            self.size[root] += self.size[child];
            for z in 0..self.out[root].len() {
                if self.out[root][z].is_none() {
                    self.out[root][z] = self.out[child][z];
                }
                stack.push((self.fsc.next(x, z), self.fsc.next(y, z)));
            }
        }
        true
    }

    fn rollback(&mut self, mark: usize) {
        while self.log.len() > mark {
            let Some(Undo::Union { root, child, out }) = self.log.pop() else { break };
            self.parent[child] = child;
            self.size[root] -= self.size[child];
            self.out[root] = out;
        }
    }

    /// Quotient controller with classes numbered in breadth-first order.
    fn quotient(&self) -> Fsc {
        let fsc = self.fsc;
        let num_obs = fsc.num_observations();
        let mut members: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
        for n in 0..fsc.num_nodes() {
            members.entry(self.find(n)).or_default().push(n);
        }
        let mut id_of: HashMap<NodeId, usize> = HashMap::new();
        let mut order = Vec::new();
        let root0 = self.find(fsc.initial());
        id_of.insert(root0, 0);
        order.push(root0);
        let mut queue = VecDeque::from([root0]);
        while let Some(r) = queue.pop_front() {
            let rep = members[&r][0];
            for z in 0..num_obs {
                let t = self.find(fsc.next(rep, z));
                if let std::collections::hash_map::Entry::Vacant(e) = id_of.entry(t) {
                    e.insert(order.len());
                    order.push(t);
                    queue.push_back(t);
                }
            }
        }
        let mut gamma = Vec::with_capacity(order.len());
        let mut delta = Vec::with_capacity(order.len());
        for &r in &order {
            let nodes = &members[&r];
            gamma.push(
                (0..num_obs)
                    .map(|z| {
                        nodes
                            .iter()
                            .map(|&n| fsc.output(n, z))
                            .find(|o| o.is_concrete())
                            .cloned()
                            .unwrap_or(OutputSymbol::DontCare)
                    })
                    .collect(),
            );
            delta.push((0..num_obs).map(|z| id_of[&self.find(fsc.next(nodes[0], z))]).collect());
        }
        Fsc::new(num_obs, gamma, delta, 0).expect("quotient of a valid controller")
    }
}

/// Greedy minimization: candidate pairs `(i, j)` with `i < j` in
/// breadth-first order are merged whenever compatible.
///
/// A pair that is incompatible stays incompatible after further merges, so
/// a single pass reaches the fixpoint.
pub fn minimize(f: &Fsc) -> Fsc {
    let order = f.bfs_order();
    let mut partition = Partition::new(f);
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if partition.find(i) != partition.find(j) && partition.try_merge(i, j) {
                partition.log.clear();
            }
        }
    }
    partition.quotient()
}

/// Smallest quotient over all node partitions, by backtracking. Exponential;
/// intended for small controllers.
pub fn minimize_exhaustive(f: &Fsc) -> Fsc {
    let order = f.bfs_order();
    let mut best: Option<Fsc> = None;
    for k in 1..=order.len() {
        if let Some(q) = search(f, &order, k) {
            best = Some(q);
            break;
        }
    }
    best.unwrap_or_else(|| minimize(f))
}

/// A partition into at most `k` classes closed under successors, if any.
fn search(f: &Fsc, order: &[NodeId], k: usize) -> Option<Fsc> {
    fn go(order: &[NodeId], k: usize, idx: usize, p: &mut Partition) -> bool {
        if idx == order.len() {
            return true;
        }
        let node = order[idx];
        if (0..idx).any(|j| p.find(order[j]) == p.find(node)) {
            return go(order, k, idx + 1, p);
        }
        let roots: Vec<NodeId> = {
            let mut r: Vec<NodeId> = order[..idx].iter().map(|&n| p.find(n)).collect();
            r.sort_unstable();
            r.dedup();
            r
        };
        for &r in &roots {
            let mark = p.log.len();
            if p.try_merge(r, node) {
                if classes(p, &order[..=idx]) <= k && go(order, k, idx + 1, p) {
                    return true;
                }
                p.rollback(mark);
            }
        }
        if roots.len() < k {
            return go(order, k, idx + 1, p);
        }
        false
    }
    fn classes(p: &Partition, order: &[NodeId]) -> usize {
        let mut r: Vec<NodeId> = order.iter().map(|&n| p.find(n)).collect();
        r.sort_unstable();
        r.dedup();
        r.len()
    }
    let mut p = Partition::new(f);
    go(order, k, 0, &mut p).then(|| p.quotient())
}
