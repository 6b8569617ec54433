//! Test support: a random valid-DAG generator and path/d-separation oracles that
//! share no code with the library's path machinery.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use cfn_core::graph::{CausalDag, GraphBuilder, NodeKind};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn set(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Random valid DAG with `total` nodes at most: one target, up to `max_unobserved`
/// unobserved nodes (each with two or more children) and an optional selection sink.
pub fn random_dag(rng: &mut impl Rng, max_nodes: usize, max_unobserved: usize, allow_selection: bool) -> CausalDag {
    let total = rng.random_range(2..=max_nodes);
    let with_selection = allow_selection && total >= 3 && rng.random_bool(0.4);
    let body = total - usize::from(with_selection);
    let max_u = max_unobserved.min(body.saturating_sub(3));
    let n_unobserved = if max_u == 0 { 0 } else { rng.random_range(0..=max_u) };

    let mut names: Vec<(String, NodeKind)> = vec![("T".into(), NodeKind::Target)];
    for i in 0..n_unobserved {
        names.push((format!("U{i}"), NodeKind::Unobserved));
    }
    let letters = ["A", "B", "C", "E", "F", "G", "H", "J", "K", "L"];
    for l in letters.iter().take(body - 1 - n_unobserved) {
        names.push((l.to_string(), NodeKind::Observed));
    }
    names.shuffle(rng);
    // Unobserved nodes need at least two later nodes to point at.
    for i in 0..names.len() {
        if names[i].1 == NodeKind::Unobserved && i + 2 >= names.len() {
            let j = (0..names.len() - 2).find(|&j| names[j].1 != NodeKind::Unobserved).expect("enough slots");
            names.swap(i, j);
        }
    }

    let density = rng.random_range(0.2..0.6);
    let mut edges = BTreeSet::new();
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            if rng.random_bool(density) {
                edges.insert((i, j));
            }
        }
    }
    for i in 0..names.len() {
        if names[i].1 != NodeKind::Unobserved {
            continue;
        }
        let mut later: Vec<usize> = (i + 1..names.len()).collect();
        later.shuffle(rng);
        let mut have = edges.iter().filter(|(a, _)| *a == i).count();
        for j in later {
            if have >= 2 {
                break;
            }
            if edges.insert((i, j)) {
                have += 1;
            }
        }
    }

    let mut b = GraphBuilder::new();
    for (n, k) in &names {
        b = b.node(n, *k);
    }
    for (i, j) in &edges {
        b = b.edge(&names[*i].0, &names[*j].0);
    }
    if with_selection {
        b = b.node("S", NodeKind::Selection);
        let k = rng.random_range(1..=3.min(names.len()));
        let mut idx: Vec<usize> = (0..names.len()).collect();
        idx.shuffle(rng);
        for &i in idx.iter().take(k) {
            b = b.edge(&names[i].0, "S");
        }
    }
    b.build().expect("generator produces valid graphs")
}

/// Plain edge-list view of a graph, rebuilt from its public accessors.
pub struct Oracle {
    kinds: BTreeMap<String, NodeKind>,
    edges: BTreeSet<(String, String)>,
}

impl Oracle {
    pub fn new(g: &CausalDag) -> Self {
        Oracle { kinds: g.node_set(), edges: g.edge_set() }
    }

    fn has_edge(&self, a: &str, b: &str) -> bool {
        self.edges.contains(&(a.to_string(), b.to_string()))
    }

    fn neighbours(&self, a: &str) -> Vec<String> {
        self.kinds.keys().filter(|b| self.has_edge(a, b) || self.has_edge(b, a)).cloned().collect()
    }

    fn descendants_or_self(&self, a: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::from([a.to_string()]);
        let mut queue = VecDeque::from([a.to_string()]);
        while let Some(u) = queue.pop_front() {
            for (p, c) in &self.edges {
                if *p == u && out.insert(c.clone()) {
                    queue.push_back(c.clone());
                }
            }
        }
        out
    }

    fn effective(&self, z: &BTreeSet<String>) -> BTreeSet<String> {
        let mut z = z.clone();
        for (n, k) in &self.kinds {
            if *k == NodeKind::Selection {
                z.insert(n.clone());
            }
        }
        z
    }

    /// Every simple path from `a` to `b`, as node sequences.
    pub fn simple_paths(&self, a: &str, b: &str) -> Vec<Vec<String>> {
        fn rec(o: &Oracle, path: &mut Vec<String>, b: &str, out: &mut Vec<Vec<String>>) {
            let last = path.last().unwrap().clone();
            if last == b {
                out.push(path.clone());
                return;
            }
            for n in o.neighbours(&last) {
                if !path.contains(&n) {
                    path.push(n);
                    rec(o, path, b, out);
                    path.pop();
                }
            }
        }
        let mut out = Vec::new();
        rec(self, &mut vec![a.to_string()], b, &mut out);
        out
    }

    pub fn is_active(&self, path: &[String], z: &BTreeSet<String>) -> bool {
        let z = self.effective(z);
        path.windows(3).all(|w| {
            let collider = self.has_edge(&w[0], &w[1]) && self.has_edge(&w[2], &w[1]);
            if collider {
                self.descendants_or_self(&w[1]).iter().any(|d| z.contains(d))
            } else {
                !z.contains(&w[1])
            }
        })
    }

    pub fn is_unstable(&self, path: &[String]) -> bool {
        path.iter().any(|n| matches!(self.kinds[n], NodeKind::Unobserved | NodeKind::Selection))
    }

    /// (node sequence, unstable) for every active path from `a` to `b` given `z`.
    pub fn active_paths(&self, a: &str, b: &str, z: &BTreeSet<String>) -> BTreeSet<(Vec<String>, bool)> {
        self.simple_paths(a, b)
            .into_iter()
            .filter(|p| self.is_active(p, z))
            .map(|p| {
                let u = self.is_unstable(&p);
                (p, u)
            })
            .collect()
    }

    /// d-separation by moralizing the ancestral graph of `{a, b} ∪ z`.
    pub fn moral_separated(&self, a: &str, b: &str, z: &BTreeSet<String>) -> bool {
        let z = self.effective(z);
        let mut anc: BTreeSet<String> = z.iter().cloned().collect();
        anc.insert(a.into());
        anc.insert(b.into());
        loop {
            let extra: Vec<String> = self
                .edges
                .iter()
                .filter(|(p, c)| anc.contains(c) && !anc.contains(p))
                .map(|(p, _)| p.clone())
                .collect();
            if extra.is_empty() {
                break;
            }
            anc.extend(extra);
        }
        let mut undirected: BTreeSet<(String, String)> = BTreeSet::new();
        for (p, c) in &self.edges {
            if anc.contains(p) && anc.contains(c) {
                undirected.insert((p.clone(), c.clone()));
                undirected.insert((c.clone(), p.clone()));
            }
        }
        for c in &anc {
            let ps: Vec<&String> =
                self.edges.iter().filter(|(p, cc)| cc == c && anc.contains(p)).map(|(p, _)| p).collect();
            for x in &ps {
                for y in &ps {
                    if x != y {
                        undirected.insert(((*x).clone(), (*y).clone()));
                    }
                }
            }
        }
        let mut seen = BTreeSet::from([a.to_string()]);
        let mut queue = VecDeque::from([a.to_string()]);
        while let Some(u) = queue.pop_front() {
            if u == b {
                return false;
            }
            for (x, y) in &undirected {
                if *x == u && !z.contains(y) && seen.insert(y.clone()) {
                    queue.push_back(y.clone());
                }
            }
        }
        true
    }
}

/// Audit of a conditioning set: for every member, the active paths from the target.
/// Returns (members with an active unstable path, members with no active stable path).
pub fn audit_conditioning_set(g: &CausalDag, z: &BTreeSet<String>) -> (Vec<String>, Vec<String>) {
    let o = Oracle::new(g);
    let mut unstable = Vec::new();
    let mut no_stable = Vec::new();
    for m in z {
        let paths = o.active_paths(g.target(), m, z);
        if paths.iter().any(|(_, u)| *u) {
            unstable.push(m.clone());
        }
        if !paths.iter().any(|(_, u)| !*u) {
            no_stable.push(m.clone());
        }
    }
    (unstable, no_stable)
}

/// All subsets of `items` when small, otherwise a random sample of them.
pub fn conditioning_sets(rng: &mut impl Rng, items: &[String], limit: usize) -> Vec<BTreeSet<String>> {
    let n = items.len();
    if n <= 6 && (1usize << n) <= limit {
        (0..1usize << n).map(|mask| (0..n).filter(|i| mask >> i & 1 == 1).map(|i| items[i].clone()).collect()).collect()
    } else {
        (0..limit).map(|_| items.iter().filter(|_| rng.random_bool(0.5)).cloned().collect()).collect()
    }
}

/// Names of the nodes a conditioning set may contain.
pub fn conditionable(g: &CausalDag) -> Vec<String> {
    g.nodes().filter(|(_, k)| *k == NodeKind::Observed).map(|(n, _)| n.to_string()).collect()
}

/// Simulates a linear-Gaussian system on `g` with unit noise and returns one
/// column per node, in `order`.
pub fn simulate_linear(g: &CausalDag, r: &mut impl Rng, n: usize) -> (Vec<String>, Vec<Vec<f64>>) {
    let order = g.topological_order().unwrap();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut weights = Vec::new();
    for v in &order {
        let ws: Vec<(usize, f64)> = g
            .parents(v)
            .unwrap()
            .into_iter()
            .map(|p| {
                let i = order.iter().position(|o| o == p).unwrap();
                let mag = r.random_range(0.5..1.5);
                (i, if r.random_bool(0.5) { mag } else { -mag })
            })
            .collect();
        weights.push(ws);
    }
    for (j, ws) in weights.iter().enumerate() {
        let col: Vec<f64> = (0..n)
            .map(|i| {
                let e: f64 = StandardNormal.sample(r);
                ws.iter().map(|&(p, w)| w * cols[p][i]).sum::<f64>() + e
            })
            .collect();
        debug_assert_eq!(cols.len(), j);
        cols.push(col);
    }
    (order, cols)
}

/// Partial correlation of columns `a` and `b` given `z`, from the inverse of
/// their joint covariance matrix.
pub fn partial_correlation(cols: &[Vec<f64>], a: usize, b: usize, z: &[usize]) -> f64 {
    let idx: Vec<usize> = [a, b].into_iter().chain(z.iter().copied()).collect();
    let k = idx.len();
    let n = cols[0].len() as f64;
    let means: Vec<f64> = idx.iter().map(|&i| cols[i].iter().sum::<f64>() / n).collect();
    let mut m = vec![vec![0.0; 2 * k]; k];
    for r in 0..k {
        for c in 0..k {
            let (x, y) = (&cols[idx[r]], &cols[idx[c]]);
            m[r][c] = x.iter().zip(y).map(|(u, v)| (u - means[r]) * (v - means[c])).sum::<f64>() / (n - 1.0);
        }
        m[r][k + r] = 1.0;
    }
    // Gauss-Jordan with partial pivoting.
    for c in 0..k {
        let p = (c..k).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        let d = m[c][c];
        for v in m[c].iter_mut() {
            *v /= d;
        }
        for r in 0..k {
            if r != c {
                let f = m[r][c];
                let row = m[c].clone();
                for (v, w) in m[r].iter_mut().zip(row) {
                    *v -= f * w;
                }
            }
        }
    }
    let p = |i: usize, j: usize| m[i][k + j];
    -p(0, 1) / (p(0, 0) * p(1, 1)).sqrt()
}
