//! General Markov models on a fixed rooted tree: pattern probabilities by
//! pruning, simulation, log-likelihood, its gradient, and maximum-likelihood
//! fitting.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::ops::Range;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{restrict_complete, CellValue, CharacterMatrix};
use crate::seed;
use crate::tree::{parse_newick, PhyloTree};

/// Default cap on the number of entries of a full pattern tensor.
pub const DEFAULT_TENSOR_CAP: usize = 1 << 20;

/// Margin kept between fitted probabilities and {0, 1}.
pub const CLIP: f64 = 1e-9;

/// Root distribution plus one row-stochastic κ×κ matrix per edge.
///
/// The Markov root is the tree's root node. Edges are indexed by their child
/// node; leaf order is the sorted leaf labels.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmParams {
    tree: PhyloTree,
    kappa: usize,
    root_dist: Vec<f64>,
    /// Row-major κ×κ per node; empty for the root.
    matrices: Vec<Vec<f64>>,
    leaf_names: Vec<String>,
    /// Node index of each leaf, in leaf order.
    leaf_nodes: Vec<usize>,
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("{what} is not a probability vector: {p:?}")));
    }
    Ok(())
}

impl GmmParams {
    /// General constructor. `matrices[v]` is the row-major matrix on the edge
    /// above node `v`; the root's entry is ignored.
    pub fn new(tree: PhyloTree, root_dist: Vec<f64>, matrices: Vec<Vec<f64>>) -> Result<Self> {
        let kappa = root_dist.len();
        if kappa < 2 {
            return Err(Error::invalid("need at least two states"));
        }
        check_distribution(&root_dist, "root distribution")?;
        if matrices.len() != tree.n_nodes() {
            return Err(Error::invalid("one matrix per node is required"));
        }
        let root = tree.root();
        let mut clean = Vec::with_capacity(matrices.len());
        for (v, m) in matrices.into_iter().enumerate() {
            if v == root {
                clean.push(Vec::new());
                continue;
            }
            if m.len() != kappa * kappa {
                return Err(Error::invalid(format!("edge matrix for node {v} is not κ×κ")));
            }
            for row in m.chunks(kappa) {
                check_distribution(row, "edge matrix row")?;
            }
            clean.push(m);
        }
        let leaf_names = tree.leaf_labels();
        let leaf_nodes = leaf_names.iter().map(|l| tree.leaf(l).expect("leaf")).collect();
        Ok(GmmParams {
            tree,
            kappa,
            root_dist,
            matrices: clean,
            leaf_names,
            leaf_nodes,
        })
    }

    /// Two-state model: `thetas[v] = (θ⁰, θ¹)` gives `M = [[θ⁰, 1−θ⁰], [1−θ¹, θ¹]]`.
    pub fn binary(tree: PhyloTree, pi0: f64, thetas: &[(f64, f64)]) -> Result<Self> {
        if thetas.len() != tree.n_nodes() {
            return Err(Error::invalid("one θ pair per node is required"));
        }
        let matrices = thetas.iter().map(|&(a, b)| vec![a, 1.0 - a, 1.0 - b, b]).collect();
        GmmParams::new(tree, vec![pi0, 1.0 - pi0], matrices)
    }

    /// Two-state model with π₀ and every θ drawn uniformly from the ranges.
    pub fn random_binary<R: Rng>(tree: PhyloTree, rng: &mut R, pi0: Range<f64>, theta: Range<f64>) -> Self {
        let p = rng.gen_range(pi0);
        let thetas: Vec<(f64, f64)> = (0..tree.n_nodes())
            .map(|_| (rng.gen_range(theta.clone()), rng.gen_range(theta.clone())))
            .collect();
        GmmParams::binary(tree, p, &thetas).expect("ranges inside [0, 1]")
    }

    pub fn tree(&self) -> &PhyloTree {
        &self.tree
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn root_dist(&self) -> &[f64] {
        &self.root_dist
    }

    /// Row-major matrix on the edge above `node`.
    pub fn matrix(&self, node: usize) -> &[f64] {
        &self.matrices[node]
    }

    /// (θ⁰, θ¹) of the edge above `node`, two-state models only.
    pub fn theta(&self, node: usize) -> Option<(f64, f64)> {
        (self.kappa == 2 && node != self.tree.root()).then(|| (self.matrices[node][0], self.matrices[node][3]))
    }

    /// Edge indices (child nodes) in node order.
    pub fn edges(&self) -> Vec<usize> {
        (0..self.tree.n_nodes()).filter(|&v| v != self.tree.root()).collect()
    }

    pub fn leaf_names(&self) -> &[String] {
        &self.leaf_names
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_names.len()
    }

    fn check_binary(&self) -> Result<()> {
        if self.kappa != 2 {
            return Err(Error::invalid("operation defined for two-state models only"));
        }
        Ok(())
    }

    /// Number of free coordinates of a two-state model.
    pub fn n_free(&self) -> usize {
        1 + 2 * (self.tree.n_nodes() - 1)
    }

    /// Unconstrained coordinates `[u(π₀), u(θ⁰), u(θ¹), ...]`, edges in node order,
    /// where a probability is `CLIP + (1 − 2·CLIP)·σ(u)`.
    pub fn to_unconstrained(&self) -> Result<Vec<f64>> {
        self.check_binary()?;
        let mut out = vec![squash_inv(self.root_dist[0])];
        for v in self.edges() {
            let (a, b) = self.theta(v).expect("binary");
            out.push(squash_inv(a));
            out.push(squash_inv(b));
        }
        Ok(out)
    }

    /// Same topology with parameters taken from unconstrained coordinates.
    pub fn with_unconstrained(&self, u: &[f64]) -> Result<Self> {
        self.check_binary()?;
        if u.len() != self.n_free() {
            return Err(Error::invalid("wrong number of coordinates"));
        }
        let mut thetas = vec![(1.0, 1.0); self.tree.n_nodes()];
        for (k, v) in self.edges().into_iter().enumerate() {
            thetas[v] = (squash(u[1 + 2 * k]), squash(u[2 + 2 * k]));
        }
        GmmParams::binary(self.tree.clone(), squash(u[0]), &thetas)
    }

    /// Text form; see [`GmmParams::parse`].
    pub fn to_text(&self) -> String {
        let t = self.tree.with_internal_labels();
        let mut out = String::new();
        let _ = writeln!(out, "kappa {}", self.kappa);
        let _ = writeln!(out, "topology {}", t.topology_newick_labelled());
        out.push_str("root");
        for p in &self.root_dist {
            let _ = write!(out, " {p}");
        }
        out.push('\n');
        for v in t.preorder() {
            if v == t.root() {
                continue;
            }
            let label = t.node(v).label.as_deref().expect("labelled");
            let _ = write!(out, "edge {label}");
            if self.kappa == 2 {
                let (a, b) = self.theta(v).expect("binary");
                let _ = write!(out, " {a} {b}");
            } else {
                for x in &self.matrices[v] {
                    let _ = write!(out, " {x}");
                }
            }
            out.push('\n');
        }
        out
    }

    /// Parse the text form:
    ///
    /// ```text
    /// kappa 2
    /// topology ((A,B)n2,(C,D)n3)n1;
    /// root 0.5 0.5
    /// edge n2 0.9 0.85
    /// edge A 0.95 0.9
    /// ...
    /// ```
    ///
    /// Two-state edges list θ⁰ θ¹; larger κ lists the full row-major matrix.
    pub fn parse(text: &str) -> Result<Self> {
        let perr = |line: usize, message: String| Error::ParamsParse { line, message };
        let mut kappa = None;
        let mut tree: Option<PhyloTree> = None;
        let mut root = None;
        let mut edges: Vec<(usize, String, Vec<f64>)> = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let (key, rest) = s.split_once(char::is_whitespace).unwrap_or((s, ""));
            let nums = |r: &str| -> Result<Vec<f64>> {
                r.split_whitespace()
                    .map(|x| x.parse::<f64>().map_err(|_| perr(line, format!("bad number `{x}`"))))
                    .collect()
            };
            match key {
                "kappa" => {
                    kappa = Some(
                        rest.trim()
                            .parse::<usize>()
                            .map_err(|_| perr(line, "bad kappa".into()))?,
                    )
                }
                "topology" => tree = Some(parse_newick(rest.trim()).map_err(|e| perr(line, e.to_string()))?),
                "root" => root = Some(nums(rest)?),
                "edge" => {
                    let (label, vals) = rest
                        .trim()
                        .split_once(char::is_whitespace)
                        .ok_or_else(|| perr(line, "edge line needs a label and values".into()))?;
                    edges.push((line, label.to_string(), nums(vals)?));
                }
                _ => return Err(perr(line, format!("unknown key `{key}`"))),
            }
        }
        let kappa = kappa.ok_or_else(|| perr(0, "missing kappa".into()))?;
        let tree = tree.ok_or_else(|| perr(0, "missing topology".into()))?;
        let root = root.ok_or_else(|| perr(0, "missing root".into()))?;
        if root.len() != kappa {
            return Err(perr(0, "root distribution length differs from kappa".into()));
        }
        let mut matrices: Vec<Option<Vec<f64>>> = vec![None; tree.n_nodes()];
        for (line, label, vals) in edges {
            let v = tree
                .find_label(&label)
                .ok_or_else(|| perr(line, format!("no node labelled `{label}`")))?;
            if v == tree.root() {
                return Err(perr(line, "the root has no edge".into()));
            }
            let m = if kappa == 2 && vals.len() == 2 {
                vec![vals[0], 1.0 - vals[0], 1.0 - vals[1], vals[1]]
            } else if vals.len() == kappa * kappa {
                vals
            } else {
                return Err(perr(line, "wrong number of values".into()));
            };
            if matrices[v].replace(m).is_some() {
                return Err(perr(line, format!("edge `{label}` given twice")));
            }
        }
        let root_node = tree.root();
        let matrices = matrices
            .into_iter()
            .enumerate()
            .map(|(v, m)| match m {
                Some(m) => Ok(m),
                None if v == root_node => Ok(Vec::new()),
                None => Err(perr(0, format!("missing edge for node {v}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        GmmParams::new(tree, root, matrices).map_err(|e| perr(0, e.to_string()))
    }
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn squash(u: f64) -> f64 {
    CLIP + (1.0 - 2.0 * CLIP) * sigmoid(u)
}

fn squash_inv(p: f64) -> f64 {
    let s = ((p - CLIP) / (1.0 - 2.0 * CLIP)).clamp(1e-15, 1.0 - 1e-15);
    (s / (1.0 - s)).ln()
}

/// dp/du at the probability `p = squash(u)`.
fn squash_deriv_at(p: f64) -> f64 {
    let s = (p - CLIP) / (1.0 - 2.0 * CLIP);
    (1.0 - 2.0 * CLIP) * s * (1.0 - s)
}

/// Post-order pruning for one pattern. Fills `lik[v·κ + s]` with the
/// probability of the leaves below `v` given state `s` at `v`, and `msg` with
/// the message each node sends to its parent.
struct Pruner<'a> {
    p: &'a GmmParams,
    post: Vec<usize>,
    leaf_slot: Vec<Option<usize>>,
}

impl<'a> Pruner<'a> {
    fn new(p: &'a GmmParams) -> Self {
        let mut leaf_slot = vec![None; p.tree.n_nodes()];
        for (k, &v) in p.leaf_nodes.iter().enumerate() {
            leaf_slot[v] = Some(k);
        }
        Pruner {
            p,
            post: p.tree.postorder(),
            leaf_slot,
        }
    }

    fn inside(&self, z: &[usize], lik: &mut [f64], msg: &mut [f64]) {
        let k = self.p.kappa;
        let t = &self.p.tree;
        for &v in &self.post {
            let node = t.node(v);
            if let Some(slot) = self.leaf_slot[v] {
                for s in 0..k {
                    lik[v * k + s] = if z[slot] == s { 1.0 } else { 0.0 };
                }
            } else {
                for s in 0..k {
                    lik[v * k + s] = node.children.iter().map(|&c| msg[c * k + s]).product();
                }
            }
            if v != t.root() {
                let m = &self.p.matrices[v];
                for s in 0..k {
                    msg[v * k + s] = (0..k).map(|x| m[s * k + x] * lik[v * k + x]).sum();
                }
            }
        }
    }

    fn probability(&self, z: &[usize]) -> f64 {
        let n = self.p.tree.n_nodes() * self.p.kappa;
        let mut lik = vec![0.0; n];
        let mut msg = vec![0.0; n];
        self.inside(z, &mut lik, &mut msg);
        let r = self.p.tree.root();
        let k = self.p.kappa;
        (0..k).map(|s| self.p.root_dist[s] * lik[r * k + s]).sum()
    }
}

/// Probability of the leaf-state pattern `z` (states in sorted-leaf order).
pub fn pattern_probability(params: &GmmParams, z: &[usize]) -> Result<f64> {
    if z.len() != params.n_leaves() {
        return Err(Error::invalid(format!(
            "pattern has {} states for {} leaves",
            z.len(),
            params.n_leaves()
        )));
    }
    if z.iter().any(|&s| s >= params.kappa) {
        return Err(Error::invalid("state out of range"));
    }
    Ok(Pruner::new(params).probability(z))
}

/// Whether a tensor was computed from a model or counted from data.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Exact,
    Empirical,
}

/// Probability tensor over κⁿ leaf patterns. Pattern `z` sits at index
/// `Σ z_i κ^{n−1−i}`, so the first leaf is the most significant digit.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternDistribution {
    leaves: Vec<String>,
    kappa: usize,
    probs: Vec<f64>,
    provenance: Provenance,
    /// Integer counts and their total, for empirical tensors.
    counts: Option<(Vec<u64>, u64)>,
}

impl PatternDistribution {
    pub fn new(leaves: Vec<String>, kappa: usize, probs: Vec<f64>, provenance: Provenance) -> Result<Self> {
        let size = checked_size(kappa, leaves.len(), usize::MAX)?;
        if probs.len() != size {
            return Err(Error::invalid("tensor size is not κⁿ"));
        }
        Ok(PatternDistribution {
            leaves,
            kappa,
            probs,
            provenance,
            counts: None,
        })
    }

    pub fn leaves(&self) -> &[String] {
        &self.leaves
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Pattern counts and their total, when counted from data.
    pub fn counts(&self) -> Option<(&[u64], u64)> {
        self.counts.as_ref().map(|(c, t)| (c.as_slice(), *t))
    }

    pub fn index_of(&self, z: &[usize]) -> usize {
        z.iter().fold(0, |acc, &s| acc * self.kappa + s)
    }

    pub fn pattern_of(&self, mut idx: usize) -> Vec<usize> {
        let mut z = vec![0; self.leaves.len()];
        for slot in z.iter_mut().rev() {
            *slot = idx % self.kappa;
            idx /= self.kappa;
        }
        z
    }

    pub fn get(&self, z: &[usize]) -> f64 {
        self.probs[self.index_of(z)]
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Half the ℓ1 distance between two tensors over the same leaf order.
    pub fn total_variation(&self, other: &PatternDistribution) -> Result<f64> {
        if self.leaves != other.leaves || self.kappa != other.kappa {
            return Err(Error::invalid("tensors are over different leaves"));
        }
        Ok(0.5
            * self
                .probs
                .iter()
                .zip(&other.probs)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }

    /// The same tensor with leaves permuted into `order`.
    pub fn reordered<S: AsRef<str>>(&self, order: &[S]) -> Result<Self> {
        if order.len() != self.leaves.len() {
            return Err(Error::invalid("reorder needs every leaf exactly once"));
        }
        let perm = order
            .iter()
            .map(|o| {
                self.leaves
                    .iter()
                    .position(|l| l == o.as_ref())
                    .ok_or_else(|| Error::UnknownTaxon(o.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut probs = vec![0.0; self.probs.len()];
        let mut counts = self.counts.as_ref().map(|(c, t)| (vec![0; c.len()], *t));
        for (new_idx, slot) in probs.iter_mut().enumerate() {
            let z_new = self.pattern_of(new_idx);
            let mut z_old = vec![0; z_new.len()];
            for (pos, &old_pos) in perm.iter().enumerate() {
                z_old[old_pos] = z_new[pos];
            }
            let old_idx = self.index_of(&z_old);
            *slot = self.probs[old_idx];
            if let (Some((nc, _)), Some((oc, _))) = (counts.as_mut(), self.counts.as_ref()) {
                nc[new_idx] = oc[old_idx];
            }
        }
        Ok(PatternDistribution {
            leaves: order.iter().map(|s| s.as_ref().to_string()).collect(),
            kappa: self.kappa,
            probs,
            provenance: self.provenance,
            counts,
        })
    }
}

fn checked_size(kappa: usize, n: usize, cap: usize) -> Result<usize> {
    let size = (kappa as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > cap as u128 {
        return Err(Error::TensorTooLarge(size, cap));
    }
    Ok(size as usize)
}

/// Full pattern tensor of a model, leaves in sorted-label order.
pub fn pattern_tensor(params: &GmmParams, cap: usize) -> Result<PatternDistribution> {
    let size = checked_size(params.kappa, params.n_leaves(), cap)?;
    let pruner = Pruner::new(params);
    let mut t = PatternDistribution {
        leaves: params.leaf_names.clone(),
        kappa: params.kappa,
        probs: Vec::new(),
        provenance: Provenance::Exact,
        counts: None,
    };
    t.probs = (0..size)
        .into_par_iter()
        .map(|i| pruner.probability(&t.pattern_of(i)))
        .collect();
    Ok(t)
}

/// Pattern frequencies of the features complete over `taxa`; Minus is state 0.
pub fn empirical_tensor<S: AsRef<str>>(m: &CharacterMatrix, taxa: &[S]) -> Result<PatternDistribution> {
    let w = if taxa.len() >= 2 {
        restrict_complete(m, taxa)?
    } else {
        let sub = m.select_taxa(taxa)?;
        let keep = sub.complete_feature_indices();
        if keep.is_empty() {
            return Err(Error::NoCompleteFeatures);
        }
        sub.select_features(&keep)
    };
    let n = w.n_taxa();
    let size = checked_size(2, n, DEFAULT_TENSOR_CAP)?;
    let mut counts = vec![0u64; size];
    for f in 0..w.n_features() {
        let idx = (0..n).fold(0, |acc, t| acc * 2 + w.get(t, f).state().expect("complete"));
        counts[idx] += 1;
    }
    let total = w.n_features() as u64;
    Ok(PatternDistribution {
        leaves: w.taxa().to_vec(),
        kappa: 2,
        probs: counts.iter().map(|&c| c as f64 / total as f64).collect(),
        provenance: Provenance::Empirical,
        counts: Some((counts, total)),
    })
}

fn draw<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (s, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return s;
        }
    }
    // Rounding left `acc` just below 1; take the last state with mass.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Draw `n_sites` independent sites. Leaves are rows in sorted-label order;
/// state 0 is Minus, state 1 Plus.
pub fn simulate(params: &GmmParams, n_sites: usize, seed: u64) -> Result<CharacterMatrix> {
    params.check_binary()?;
    let mut rng = seed::stream_rng(seed, seed::streams::SIMULATE, 0);
    let t = &params.tree;
    let pre = t.preorder();
    let k = params.kappa;
    let n = params.n_leaves();
    let mut rows = vec![Vec::with_capacity(n_sites); n];
    let mut state = vec![0usize; t.n_nodes()];
    for _ in 0..n_sites {
        for &v in &pre {
            state[v] = match t.node(v).parent {
                None => draw(&mut rng, &params.root_dist),
                Some(p) => {
                    let s = state[p];
                    draw(&mut rng, &params.matrices[v][s * k..(s + 1) * k])
                }
            };
        }
        for (row, &leaf) in rows.iter_mut().zip(&params.leaf_nodes) {
            row.push(CellValue::from_state(state[leaf]));
        }
    }
    let features = (1..=n_sites).map(|i| format!("s{i}")).collect();
    CharacterMatrix::new(params.leaf_names.clone(), features, rows.concat())
}

/// Distinct site patterns with multiplicities, states in the model's leaf order.
#[derive(Clone, Debug, PartialEq)]
pub struct SitePatterns {
    patterns: Vec<(Vec<usize>, u64)>,
}

impl SitePatterns {
    /// Collect the patterns of `m` over the model's leaves. Every leaf must be
    /// a taxon of `m` and every cell over them must be set.
    pub fn new(params: &GmmParams, m: &CharacterMatrix) -> Result<Self> {
        let rows = params
            .leaf_names
            .iter()
            .map(|l| m.taxon_index(l))
            .collect::<Result<Vec<_>>>()?;
        let mut map: HashMap<Vec<usize>, u64> = HashMap::new();
        for f in 0..m.n_features() {
            let z = rows
                .iter()
                .map(|&r| {
                    m.get(r, f).state().ok_or_else(|| {
                        Error::invalid(format!("feature `{}` is unset for `{}`", m.features()[f], m.taxa()[r]))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            *map.entry(z).or_default() += 1;
        }
        let mut patterns: Vec<_> = map.into_iter().collect();
        patterns.sort();
        Ok(SitePatterns { patterns })
    }

    pub fn n_sites(&self) -> u64 {
        self.patterns.iter().map(|(_, c)| c).sum()
    }

    pub fn patterns(&self) -> &[(Vec<usize>, u64)] {
        &self.patterns
    }
}

/// Σ over sites of log P(site pattern).
pub fn log_likelihood(params: &GmmParams, m: &CharacterMatrix) -> Result<f64> {
    Ok(log_likelihood_patterns(params, &SitePatterns::new(params, m)?))
}

pub fn log_likelihood_patterns(params: &GmmParams, sites: &SitePatterns) -> f64 {
    let pruner = Pruner::new(params);
    sites
        .patterns
        .iter()
        .map(|(z, c)| *c as f64 * pruner.probability(z).ln())
        .sum()
}

/// Gradient of the log-likelihood in the unconstrained coordinates of
/// [`GmmParams::to_unconstrained`].
pub fn likelihood_gradient(params: &GmmParams, m: &CharacterMatrix) -> Result<Vec<f64>> {
    let sites = SitePatterns::new(params, m)?;
    Ok(value_and_gradient(params, &sites)?.1)
}

/// Log-likelihood and its gradient in unconstrained coordinates.
pub fn value_and_gradient(params: &GmmParams, sites: &SitePatterns) -> Result<(f64, Vec<f64>)> {
    params.check_binary()?;
    let t = &params.tree;
    let nn = t.n_nodes();
    let pruner = Pruner::new(params);
    let pre = t.preorder();
    let r = t.root();
    let edges = params.edges();
    let mut slot_of = vec![usize::MAX; nn];
    for (k, &v) in edges.iter().enumerate() {
        slot_of[v] = k;
    }

    // Gradient with respect to (π₀, θ⁰, θ¹, ...) in probability space.
    let mut g = vec![0.0; params.n_free()];
    let mut ll = 0.0;
    let mut lik = vec![0.0; nn * 2];
    let mut msg = vec![0.0; nn * 2];
    let mut outside = vec![0.0; nn * 2];
    let mut above = vec![0.0; nn * 2];
    for (z, count) in &sites.patterns {
        pruner.inside(z, &mut lik, &mut msg);
        let pi = &params.root_dist;
        let p = pi[0] * lik[r * 2] + pi[1] * lik[r * 2 + 1];
        let w = *count as f64 / p;
        ll += *count as f64 * p.ln();
        g[0] += w * (lik[r * 2] - lik[r * 2 + 1]);

        outside[r * 2] = pi[0];
        outside[r * 2 + 1] = pi[1];
        for &v in &pre {
            let children = &t.node(v).children;
            for &c in children {
                // above[c](s): everything but c's subtree, given state s at v.
                for s in 0..2 {
                    let sib: f64 = children.iter().filter(|&&o| o != c).map(|&o| msg[o * 2 + s]).product();
                    above[c * 2 + s] = outside[v * 2 + s] * sib;
                }
                let m = &params.matrices[c];
                for x in 0..2 {
                    outside[c * 2 + x] = above[c * 2] * m[x] + above[c * 2 + 1] * m[2 + x];
                }
                let k = slot_of[c];
                let (l0, l1) = (lik[c * 2], lik[c * 2 + 1]);
                g[1 + 2 * k] += w * above[c * 2] * (l0 - l1);
                g[2 + 2 * k] += w * above[c * 2 + 1] * (l1 - l0);
            }
        }
    }
    g[0] *= squash_deriv_at(params.root_dist[0]);
    for (k, &v) in edges.iter().enumerate() {
        let (a, b) = params.theta(v).expect("binary");
        g[1 + 2 * k] *= squash_deriv_at(a);
        g[2 + 2 * k] *= squash_deriv_at(b);
    }
    Ok((ll, g))
}

/// Settings for [`ml_fit`].
#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub step: f64,
    pub iterations: usize,
    pub restarts: usize,
    /// Stop once the gradient's ∞-norm falls below this.
    pub tolerance: f64,
    pub seed: u64,
    pub init_pi0: Range<f64>,
    pub init_theta: Range<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            step: 0.05,
            iterations: 5000,
            restarts: 10,
            tolerance: 1e-6,
            seed: 0,
            init_pi0: 0.2..0.8,
            init_theta: 0.5..0.99,
        }
    }
}

/// Outcome of one multi-start run.
#[derive(Clone, Debug, PartialEq)]
pub struct RestartSummary {
    pub index: usize,
    pub initial_log_likelihood: f64,
    pub final_log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub params: GmmParams,
    pub log_likelihood: f64,
    /// ∞-norm of the gradient at `params`.
    pub gradient_norm: f64,
    pub converged: bool,
    pub restarts: Vec<RestartSummary>,
}

fn inf_norm(g: &[f64]) -> f64 {
    g.iter().fold(0.0, |a, x| a.max(x.abs()))
}

struct Run {
    params: GmmParams,
    ll: f64,
    grad_norm: f64,
    summary: RestartSummary,
}

/// Adam ascent from `start`. Returns the best iterate seen, or the last one
/// once it meets the gradient tolerance.
fn ascend(start: GmmParams, sites: &SitePatterns, cfg: &FitConfig, index: usize) -> Result<Run> {
    let (b1, b2, eps) = (0.9, 0.999, 1e-12);
    let mut u = start.to_unconstrained()?;
    let (ll0, mut g) = value_and_gradient(&start, sites)?;
    let mut best = (start, ll0, inf_norm(&g));
    let mut m = vec![0.0; u.len()];
    let mut v = vec![0.0; u.len()];
    let mut iterations = 0;
    while best.2 >= cfg.tolerance && iterations < cfg.iterations {
        iterations += 1;
        let t = iterations as i32;
        for i in 0..u.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let mh = m[i] / (1.0 - b1.powi(t));
            let vh = v[i] / (1.0 - b2.powi(t));
            u[i] += cfg.step * mh / (vh.sqrt() + eps);
        }
        let p = best.0.with_unconstrained(&u)?;
        let (ll, grad) = value_and_gradient(&p, sites)?;
        g = grad;
        let norm = inf_norm(&g);
        // A stationary point whose likelihood matches the best up to rounding wins.
        let stationary = norm < cfg.tolerance && ll >= ll0 && ll >= best.1 - 1e-9 * best.1.abs().max(1.0);
        if ll > best.1 || stationary {
            best = (p, ll, norm);
        }
    }
    Ok(Run {
        summary: RestartSummary {
            index,
            initial_log_likelihood: ll0,
            final_log_likelihood: best.1,
            iterations,
            converged: best.2 < cfg.tolerance,
        },
        params: best.0,
        ll: best.1,
        grad_norm: best.2,
    })
}

/// Maximum-likelihood two-state model on a fixed rooted binary topology.
pub fn ml_fit(topology: &PhyloTree, m: &CharacterMatrix, cfg: &FitConfig) -> Result<FitResult> {
    let root_children = topology.node(topology.root()).children.len();
    let binary = topology.n_leaves() == 1
        || (root_children == 2
            && (0..topology.n_nodes())
                .filter(|&v| v != topology.root())
                .all(|v| matches!(topology.node(v).children.len(), 0 | 2)));
    if !binary {
        return Err(Error::invalid("ML fitting needs a rooted binary topology"));
    }
    if cfg.restarts == 0 {
        return Err(Error::invalid("at least one restart is required"));
    }
    let template = GmmParams::binary(topology.clone(), 0.5, &vec![(0.9, 0.9); topology.n_nodes()])?;
    let sites = SitePatterns::new(&template, m)?;
    let runs = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::stream_rng(cfg.seed, seed::streams::ML_RESTART, r as u64);
            let start =
                GmmParams::random_binary(topology.clone(), &mut rng, cfg.init_pi0.clone(), cfg.init_theta.clone());
            ascend(start, &sites, cfg, r)
        })
        .collect::<Result<Vec<_>>>()?;
    let best = runs
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.ll.total_cmp(&b.ll).then(ib.cmp(ia)))
        .map(|(i, _)| i)
        .expect("one restart");
    let restarts = runs.iter().map(|r| r.summary.clone()).collect();
    let run = &runs[best];
    Ok(FitResult {
        params: run.params.clone(),
        log_likelihood: run.ll,
        gradient_norm: run.grad_norm,
        converged: run.grad_norm < cfg.tolerance,
        restarts,
    })
}
