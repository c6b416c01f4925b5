//! Independent reference implementations and random instance generators
//! shared by the integration tests.
#![allow(dead_code)]

use phylomarkov::markov::GmmParams;
use phylomarkov::tree::{parse_newick, PhyloTree};
use rand::Rng;

/// Explicit sum over every hidden-state assignment. Exponential, small trees only.
pub fn brute_force_probability(params: &GmmParams, z: &[usize]) -> f64 {
    let tree = params.tree();
    let k = params.kappa();
    let n = tree.n_nodes();
    let mut observed = vec![None; n];
    for (name, &s) in params.leaf_names().iter().zip(z) {
        observed[tree.leaf(name).unwrap()] = Some(s);
    }
    let hidden: Vec<usize> = (0..n).filter(|&v| observed[v].is_none()).collect();
    let mut total = 0.0;
    let mut states = vec![0usize; n];
    for code in 0..k.pow(hidden.len() as u32) {
        let mut c = code;
        for &h in &hidden {
            states[h] = c % k;
            c /= k;
        }
        for v in 0..n {
            if let Some(s) = observed[v] {
                states[v] = s;
            }
        }
        let mut p = params.root_dist()[states[tree.root()]];
        for v in 0..n {
            if let Some(parent) = tree.node(v).parent {
                p *= params.matrix(v)[states[parent] * k + states[v]];
            }
        }
        total += p;
    }
    total
}

/// Rooted binary tree on `t0..t{n-1}` built by random sequential joins.
pub fn random_rooted_tree<R: Rng>(rng: &mut R, n: usize) -> PhyloTree {
    let mut parts: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
    while parts.len() > 1 {
        let a = parts.swap_remove(rng.gen_range(0..parts.len()));
        let b = parts.swap_remove(rng.gen_range(0..parts.len()));
        parts.push(format!("({a},{b})"));
    }
    parse_newick(&format!("{};", parts[0])).unwrap()
}

/// Unrooted binary tree with edge lengths, as adjacency plus leaf path-length matrix.
pub struct WeightedTree {
    pub n_leaves: usize,
    /// (u, v, length); leaves are nodes `0..n_leaves`.
    pub edges: Vec<(usize, usize, f64)>,
}

impl WeightedTree {
    /// Random unrooted binary tree by repeated leaf insertion on a random edge.
    pub fn random<R: Rng>(rng: &mut R, n: usize, lengths: std::ops::Range<f64>) -> Self {
        assert!(n >= 3);
        // Centre node n, leaves 0, 1, 2 attached.
        let mut edges: Vec<(usize, usize)> = vec![(n, 0), (n, 1), (n, 2)];
        let mut next = n + 1;
        for leaf in 3..n {
            let (u, v) = edges.swap_remove(rng.gen_range(0..edges.len()));
            let mid = next;
            next += 1;
            edges.push((u, mid));
            edges.push((mid, v));
            edges.push((mid, leaf));
        }
        let edges = edges
            .into_iter()
            .map(|(u, v)| (u, v, rng.gen_range(lengths.clone())))
            .collect();
        WeightedTree { n_leaves: n, edges }
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.n_leaves).map(|i| format!("t{i}")).collect()
    }

    fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let n_nodes = self.edges.iter().map(|e| e.0.max(e.1)).max().unwrap() + 1;
        let mut adj = vec![Vec::new(); n_nodes];
        for &(u, v, w) in &self.edges {
            adj[u].push((v, w));
            adj[v].push((u, w));
        }
        adj
    }

    /// Path lengths between leaves by depth-first search from each leaf,
    /// upper triangle mirrored so rounding cannot break symmetry.
    pub fn path_lengths(&self) -> Vec<Vec<f64>> {
        let adj = self.adjacency();
        let mut d: Vec<Vec<f64>> = (0..self.n_leaves)
            .map(|s| {
                let mut dist = vec![f64::NAN; adj.len()];
                dist[s] = 0.0;
                let mut stack = vec![s];
                while let Some(u) = stack.pop() {
                    for &(v, w) in &adj[u] {
                        if dist[v].is_nan() {
                            dist[v] = dist[u] + w;
                            stack.push(v);
                        }
                    }
                }
                dist[..self.n_leaves].to_vec()
            })
            .collect();
        for i in 0..self.n_leaves {
            for j in 0..i {
                d[i][j] = d[j][i];
            }
        }
        d
    }

    pub fn min_edge(&self) -> f64 {
        self.edges.iter().map(|e| e.2).fold(f64::INFINITY, f64::min)
    }

    pub fn to_tree(&self) -> PhyloTree {
        let adj = self.adjacency();
        fn write(adj: &[Vec<(usize, f64)>], n_leaves: usize, v: usize, from: usize, out: &mut String) {
            if v < n_leaves {
                out.push_str(&format!("t{v}"));
                return;
            }
            out.push('(');
            let mut first = true;
            for &(c, _) in &adj[v] {
                if c == from {
                    continue;
                }
                if !first {
                    out.push(',');
                }
                first = false;
                write(adj, n_leaves, c, v, out);
            }
            out.push(')');
        }
        let mut s = String::new();
        write(&adj, self.n_leaves, self.n_leaves, usize::MAX, &mut s);
        s.push(';');
        parse_newick(&s).unwrap()
    }
}

/// Merge order of complete-linkage agglomeration maximizing similarity,
/// with ties broken by the lexicographically smallest pair of cluster names.
/// Cluster names are their smallest member.
pub fn complete_linkage_order(taxa: &[String], sim: &[Vec<f64>]) -> Vec<(Vec<String>, Vec<String>)> {
    let mut clusters: Vec<Vec<usize>> = (0..taxa.len()).map(|i| vec![i]).collect();
    let name = |c: &Vec<usize>| c.iter().map(|&i| taxa[i].clone()).min().unwrap();
    let link = |a: &Vec<usize>, b: &Vec<usize>| {
        a.iter()
            .flat_map(|&i| b.iter().map(move |&j| (i, j)))
            .map(|(i, j)| sim[i][j])
            .fold(f64::INFINITY, f64::min)
    };
    let mut order = Vec::new();
    while clusters.len() > 1 {
        let mut best: Option<(f64, String, String, usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let s = link(&clusters[i], &clusters[j]);
                let (mut na, mut nb) = (name(&clusters[i]), name(&clusters[j]));
                let (mut a, mut b) = (i, j);
                if nb < na {
                    std::mem::swap(&mut na, &mut nb);
                    std::mem::swap(&mut a, &mut b);
                }
                let better = match &best {
                    None => true,
                    Some((bs, ba, bb, _, _)) => s > *bs || (s == *bs && (&na, &nb) < (ba, bb)),
                };
                if better {
                    best = Some((s, na, nb, a, b));
                }
            }
        }
        let (_, _, _, a, b) = best.unwrap();
        let names = |c: &Vec<usize>| {
            let mut v: Vec<String> = c.iter().map(|&i| taxa[i].clone()).collect();
            v.sort();
            v
        };
        order.push((names(&clusters[a]), names(&clusters[b])));
        let (hi, lo) = (a.max(b), a.min(b));
        let merged_hi = clusters.swap_remove(hi);
        clusters[lo].extend(merged_hi);
    }
    order
}

/// Every bipartition of `labels` with both sides of size at least two, side
/// containing `labels[0]` first.
pub fn nontrivial_bipartitions(labels: &[String]) -> Vec<(Vec<String>, Vec<String>)> {
    let n = labels.len();
    let mut out = Vec::new();
    for mask in 0u32..(1 << (n - 1)) {
        let side: Vec<String> = std::iter::once(labels[0].clone())
            .chain((1..n).filter(|i| mask >> (i - 1) & 1 == 1).map(|i| labels[i].clone()))
            .collect();
        let rest: Vec<String> = labels.iter().filter(|l| !side.contains(l)).cloned().collect();
        if side.len() >= 2 && rest.len() >= 2 {
            out.push((side, rest));
        }
    }
    out
}

/// Central finite differences of `f` at `u`.
pub fn central_differences(f: impl Fn(&[f64]) -> f64, u: &[f64], h: f64) -> Vec<f64> {
    (0..u.len())
        .map(|i| {
            let mut a = u.to_vec();
            let mut b = u.to_vec();
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}
