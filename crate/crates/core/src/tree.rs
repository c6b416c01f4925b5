//! Phylogenetic trees: arena representation, Newick I/O, splits, rerooting
//! and Robinson–Foulds comparison.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub label: Option<String>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Length of the edge to the parent.
    pub length: Option<f64>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// A tree over labelled leaves.
///
/// Unrooted trees are stored hanging from an arbitrary internal anchor. Every
/// non-root node owns the edge to its parent, so edges are identified by node
/// index.
#[derive(Clone, Debug, PartialEq)]
pub struct PhyloTree {
    nodes: Vec<Node>,
    root: usize,
    rooted: bool,
}

/// Where to place the root in [`PhyloTree::reroot`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RootAt {
    /// Midpoint of the leaf's pendant edge.
    Leaf(String),
    /// Midpoint of the edge separating these leaves from the rest.
    Clade(Vec<String>),
}

/// A bipartition of the leaf set. The side holding the smallest label comes first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Split {
    first: Vec<String>,
    second: Vec<String>,
}

impl Split {
    /// Build a split from its two sides.
    pub fn new<S: AsRef<str>>(a: &[S], b: &[S]) -> Result<Split> {
        let mut a: Vec<String> = a.iter().map(|s| s.as_ref().to_string()).collect();
        let mut b: Vec<String> = b.iter().map(|s| s.as_ref().to_string()).collect();
        a.sort();
        b.sort();
        a.dedup();
        b.dedup();
        if a.is_empty() || b.is_empty() {
            return Err(Error::invalid("split side is empty"));
        }
        let sa: HashSet<&String> = a.iter().collect();
        if let Some(x) = b.iter().find(|x| sa.contains(x)) {
            return Err(Error::invalid(format!("`{x}` appears on both sides of split")));
        }
        if b[0] < a[0] {
            std::mem::swap(&mut a, &mut b);
        }
        Ok(Split { first: a, second: b })
    }

    /// The split cutting `side` away from the rest of `leaves`.
    pub fn from_side<S: AsRef<str>, T: AsRef<str>>(side: &[S], leaves: &[T]) -> Result<Split> {
        let set: HashSet<&str> = side.iter().map(|s| s.as_ref()).collect();
        let all: HashSet<&str> = leaves.iter().map(|s| s.as_ref()).collect();
        if let Some(x) = set.iter().find(|x| !all.contains(*x)) {
            return Err(Error::UnknownTaxon(x.to_string()));
        }
        let rest: Vec<&str> = leaves.iter().map(|s| s.as_ref()).filter(|s| !set.contains(s)).collect();
        let side: Vec<&str> = set.into_iter().collect();
        Split::new(&side, &rest)
    }

    /// Parse `A,B|C,D` (or `A,B; C,D`).
    pub fn parse(text: &str) -> Result<Split> {
        let (a, b) = text
            .split_once('|')
            .or_else(|| text.split_once(';'))
            .ok_or_else(|| Error::invalid(format!("split `{text}` has no `|` separator")))?;
        let side = |s: &str| -> Vec<String> {
            s.split(',')
                .map(str::trim)
                .filter(|x| !x.is_empty())
                .map(String::from)
                .collect()
        };
        Split::new(&side(a), &side(b))
    }

    pub fn first(&self) -> &[String] {
        &self.first
    }

    pub fn second(&self) -> &[String] {
        &self.second
    }

    /// True when one side is a single leaf.
    pub fn is_trivial(&self) -> bool {
        self.first.len() < 2 || self.second.len() < 2
    }

    pub fn n_leaves(&self) -> usize {
        self.first.len() + self.second.len()
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}", self.first.join(","), self.second.join(","))
    }
}

/// Format a branch length with six significant digits, trailing zeros trimmed.
pub fn format_length(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: String| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if !(-4..6).contains(&exp) {
        format!("{}e{}", trim(mantissa.to_string()), exp)
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim(format!("{x:.decimals$}"))
    }
}

struct NewickParser<'a> {
    text: &'a [u8],
    pos: usize,
    nodes: Vec<Node>,
}

impl<'a> NewickParser<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Newick {
            position: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        loop {
            while self.pos < self.text.len() && self.text[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            // Bracketed comments such as [&R].
            if self.peek() == Some(b'[') {
                match self.text[self.pos..].iter().position(|&c| c == b']') {
                    Some(off) => self.pos += off + 1,
                    None => {
                        self.pos = self.text.len();
                        return;
                    }
                }
            } else {
                return;
            }
        }
    }

    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn label(&mut self) -> Result<Option<String>> {
        self.skip_ws();
        if self.peek() == Some(b'\'') {
            self.pos += 1;
            let mut out = Vec::new();
            loop {
                match self.peek() {
                    None => return Err(self.err("unterminated quoted label")),
                    Some(b'\'') if self.text.get(self.pos + 1) == Some(&b'\'') => {
                        out.push(b'\'');
                        self.pos += 2;
                    }
                    Some(b'\'') => {
                        self.pos += 1;
                        break;
                    }
                    Some(c) => {
                        out.push(c);
                        self.pos += 1;
                    }
                }
            }
            return String::from_utf8(out)
                .map(Some)
                .map_err(|_| self.err("label is not UTF-8"));
        }
        let start = self.pos;
        while let Some(c) = self.peek() {
            if b"(),:;[".contains(&c) || c.is_ascii_whitespace() {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Ok(None);
        }
        std::str::from_utf8(&self.text[start..self.pos])
            .map(|s| Some(s.replace('_', " ")))
            .map_err(|_| self.err("label is not UTF-8"))
    }

    fn length(&mut self) -> Result<Option<f64>> {
        self.skip_ws();
        if self.peek() != Some(b':') {
            return Ok(None);
        }
        self.pos += 1;
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || b"+-.eE".contains(&c) {
                self.pos += 1;
            } else {
                break;
            }
        }
        let s = std::str::from_utf8(&self.text[start..self.pos]).expect("ascii");
        let v: f64 = s.parse().map_err(|_| Error::Newick {
            position: start,
            message: format!("bad branch length `{s}`"),
        })?;
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Newick {
                position: start,
                message: format!("negative or non-finite branch length `{s}`"),
            });
        }
        Ok(Some(v))
    }

    fn subtree(&mut self, parent: Option<usize>) -> Result<usize> {
        let id = self.nodes.len();
        self.nodes.push(Node {
            label: None,
            parent,
            children: Vec::new(),
            length: None,
        });
        self.skip_ws();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            loop {
                let child = self.subtree(Some(id))?;
                self.nodes[id].children.push(child);
                self.skip_ws();
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.err("expected `,` or `)`")),
                }
            }
            self.nodes[id].label = self.label()?;
        } else {
            let label = self.label()?;
            if label.is_none() {
                return Err(self.err("expected a leaf label"));
            }
            self.nodes[id].label = label;
        }
        self.nodes[id].length = self.length()?;
        Ok(id)
    }
}

/// Parse one Newick tree. A root with exactly two children marks a rooted tree.
///
/// ```
/// use phylomarkov::tree::parse_newick;
/// let t = parse_newick("((A,B),(C,D));").unwrap();
/// assert_eq!(t.splits().len(), 1);
/// ```
pub fn parse_newick(text: &str) -> Result<PhyloTree> {
    let mut p = NewickParser {
        text: text.as_bytes(),
        pos: 0,
        nodes: Vec::new(),
    };
    let root = p.subtree(None)?;
    p.skip_ws();
    if p.peek() != Some(b';') {
        return Err(p.err("expected `;`"));
    }
    p.pos += 1;
    p.skip_ws();
    if p.pos != p.text.len() {
        return Err(p.err("trailing text after `;`"));
    }
    let mut seen = HashSet::new();
    for n in &p.nodes {
        if n.is_leaf() {
            let l = n.label.as_ref().expect("leaves carry labels");
            if !seen.insert(l.clone()) {
                return Err(Error::Newick {
                    position: text.find(l.as_str()).unwrap_or(0),
                    message: format!("duplicate leaf `{l}`"),
                });
            }
        }
    }
    let rooted = p.nodes[root].children.len() == 2;
    let mut nodes = p.nodes;
    nodes[root].length = None;
    Ok(PhyloTree { nodes, root, rooted })
}

fn quote_label(s: &str) -> String {
    if s.chars().any(|c| "(),:;[]'_".contains(c)) {
        format!("'{}'", s.replace('\'', "''"))
    } else {
        s.replace(' ', "_")
    }
}

impl PhyloTree {
    /// Build a tree from an undirected edge list hung from `anchor`.
    ///
    /// Nodes with a label of `None` must be internal. The edge list must form
    /// a tree over all `labels.len()` nodes.
    pub fn from_edges(
        labels: Vec<Option<String>>,
        edges: &[(usize, usize, Option<f64>)],
        anchor: usize,
        rooted: bool,
    ) -> Result<PhyloTree> {
        let n = labels.len();
        if anchor >= n {
            return Err(Error::invalid("anchor out of range"));
        }
        if edges.len() + 1 != n {
            return Err(Error::invalid("edge list does not form a tree"));
        }
        let mut adj: Vec<Vec<(usize, Option<f64>)>> = vec![Vec::new(); n];
        for &(a, b, len) in edges {
            if a >= n || b >= n || a == b {
                return Err(Error::invalid("bad edge endpoint"));
            }
            if let Some(l) = len {
                if !(l >= 0.0) {
                    return Err(Error::invalid("negative branch length"));
                }
            }
            adj[a].push((b, len));
            adj[b].push((a, len));
        }
        let mut nodes: Vec<Node> = labels
            .into_iter()
            .map(|label| Node {
                label,
                parent: None,
                children: Vec::new(),
                length: None,
            })
            .collect();
        let mut visited = vec![false; n];
        let mut stack = vec![anchor];
        visited[anchor] = true;
        while let Some(v) = stack.pop() {
            for &(w, len) in &adj[v] {
                if !visited[w] {
                    visited[w] = true;
                    nodes[w].parent = Some(v);
                    nodes[w].length = len;
                    nodes[v].children.push(w);
                    stack.push(w);
                }
            }
        }
        if visited.iter().any(|v| !v) {
            return Err(Error::invalid("edge list is disconnected"));
        }
        let mut seen = HashSet::new();
        for node in &nodes {
            match (&node.label, node.is_leaf()) {
                (None, true) if n > 1 => return Err(Error::invalid("unlabelled leaf")),
                (Some(l), true) if !seen.insert(l.clone()) => {
                    return Err(Error::invalid(format!("duplicate leaf `{l}`")))
                }
                _ => {}
            }
        }
        let mut t = PhyloTree {
            nodes,
            root: anchor,
            rooted,
        };
        t.sort_children();
        Ok(t)
    }

    /// Order children by their smallest descendant label.
    fn sort_children(&mut self) {
        let min = self.min_leaf_labels();
        for v in 0..self.nodes.len() {
            let mut ch = std::mem::take(&mut self.nodes[v].children);
            ch.sort_by(|a, b| min[*a].cmp(&min[*b]));
            self.nodes[v].children = ch;
        }
    }

    fn min_leaf_labels(&self) -> Vec<String> {
        let mut min: Vec<Option<String>> = vec![None; self.nodes.len()];
        for v in self.postorder() {
            let node = &self.nodes[v];
            min[v] = if node.is_leaf() {
                node.label.clone()
            } else {
                node.children.iter().filter_map(|&c| min[c].clone()).min()
            };
        }
        min.into_iter().map(Option::unwrap_or_default).collect()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn is_rooted(&self) -> bool {
        self.rooted
    }

    /// Leaf node indices in node order.
    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_leaf()).collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Leaf labels, sorted.
    pub fn leaf_labels(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .nodes
            .iter()
            .filter(|n| n.is_leaf())
            .filter_map(|n| n.label.clone())
            .collect();
        v.sort();
        v
    }

    /// Node index of the leaf with this label.
    pub fn leaf(&self, label: &str) -> Option<usize> {
        self.nodes
            .iter()
            .position(|n| n.is_leaf() && n.label.as_deref() == Some(label))
    }

    /// Node index carrying this label, leaf or internal.
    pub fn find_label(&self, label: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.label.as_deref() == Some(label))
    }

    /// Children before parents.
    pub fn postorder(&self) -> Vec<usize> {
        let mut out = self.preorder();
        out.reverse();
        out
    }

    /// Parents before children.
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            out.push(v);
            stack.extend(self.nodes[v].children.iter().rev());
        }
        out
    }

    /// True when every edge carries a length.
    pub fn has_lengths(&self) -> bool {
        (0..self.nodes.len()).all(|i| i == self.root || self.nodes[i].length.is_some())
    }

    /// Rooted: every internal node has two children. Unrooted: the anchor has
    /// three children (or fewer for tiny trees) and every other internal node two.
    pub fn is_binary(&self) -> bool {
        self.nodes.iter().enumerate().all(|(i, n)| {
            if n.is_leaf() {
                true
            } else if i == self.root && !self.rooted {
                n.children.len() == 3 || (self.n_leaves() < 3 && n.children.len() == self.n_leaves())
            } else {
                n.children.len() == 2
            }
        })
    }

    /// Replace every edge length (the root's entry is ignored).
    pub fn set_lengths(&mut self, lengths: &[Option<f64>]) {
        for (i, node) in self.nodes.iter_mut().enumerate() {
            node.length = if i == self.root { None } else { lengths[i] };
        }
    }

    pub fn strip_lengths(&self) -> PhyloTree {
        let mut t = self.clone();
        for n in &mut t.nodes {
            n.length = None;
        }
        t
    }

    /// Label sets below each node.
    fn clades(&self) -> Vec<Vec<String>> {
        let mut below: Vec<Vec<String>> = vec![Vec::new(); self.nodes.len()];
        for v in self.postorder() {
            let node = &self.nodes[v];
            if node.is_leaf() {
                below[v] = node.label.iter().cloned().collect();
            } else {
                let mut all: Vec<String> = node.children.iter().flat_map(|&c| below[c].iter().cloned()).collect();
                all.sort();
                below[v] = all;
            }
        }
        below
    }

    /// Nontrivial splits, one per internal edge.
    pub fn splits(&self) -> BTreeSet<Split> {
        let leaves = self.leaf_labels();
        let clades = self.clades();
        let mut out = BTreeSet::new();
        for (v, clade) in clades.iter().enumerate() {
            if v == self.root || clade.len() < 2 || clade.len() + 2 > leaves.len() {
                continue;
            }
            if let Ok(s) = Split::from_side(clade, &leaves) {
                out.insert(s);
            }
        }
        out
    }

    /// The split induced by the edge above node `v` (trivial splits included).
    pub fn edge_split(&self, v: usize) -> Option<Split> {
        if v == self.root {
            return None;
        }
        let leaves = self.leaf_labels();
        Split::from_side(&self.clades()[v], &leaves).ok()
    }

    /// Same split set as `other`.
    pub fn same_topology(&self, other: &PhyloTree) -> bool {
        self.leaf_labels() == other.leaf_labels() && self.splits() == other.splits()
    }

    fn undirected_edges(&self) -> Vec<(usize, usize, Option<f64>)> {
        (0..self.nodes.len())
            .filter_map(|v| self.nodes[v].parent.map(|p| (p, v, self.nodes[v].length)))
            .collect()
    }

    /// Drop the root: a two-child root is suppressed and its edges merged.
    pub fn unroot(&self) -> PhyloTree {
        let r = self.root;
        let ch = &self.nodes[r].children;
        if ch.len() != 2 || self.n_leaves() < 3 {
            let mut t = self.clone();
            t.rooted = false;
            return t;
        }
        let (a, b) = (ch[0], ch[1]);
        let merged = match (self.nodes[a].length, self.nodes[b].length) {
            (Some(x), Some(y)) => Some(x + y),
            _ => None,
        };
        let mut edges: Vec<(usize, usize, Option<f64>)> = self
            .undirected_edges()
            .into_iter()
            .filter(|&(p, _, _)| p != r)
            .collect();
        edges.push((a, b, merged));
        // Renumber without the old root.
        let map = |i: usize| if i > r { i - 1 } else { i };
        let labels: Vec<Option<String>> = self
            .nodes
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != r)
            .map(|(_, n)| n.label.clone())
            .collect();
        let edges: Vec<_> = edges.into_iter().map(|(x, y, l)| (map(x), map(y), l)).collect();
        let anchor = if self.nodes[a].is_leaf() { map(b) } else { map(a) };
        let t = PhyloTree::from_edges(labels, &edges, anchor, false).expect("valid tree");
        t.reanchored()
    }

    /// An unrooted tree re-hung from the parent of its smallest leaf.
    fn reanchored(&self) -> PhyloTree {
        if self.rooted || self.n_leaves() < 3 {
            return self.clone();
        }
        let smallest = self.leaf_labels()[0].clone();
        let leaf = self.leaf(&smallest).expect("leaf exists");
        let anchor = self.nodes[leaf].parent.unwrap_or(self.root);
        if anchor == self.root {
            return self.clone();
        }
        let labels = self.nodes.iter().map(|n| n.label.clone()).collect();
        PhyloTree::from_edges(labels, &self.undirected_edges(), anchor, false).expect("valid tree")
    }

    /// Root the tree at the midpoint of the selected edge.
    pub fn reroot(&self, at: &RootAt) -> Result<PhyloTree> {
        let base = if self.rooted { self.unroot() } else { self.clone() };
        let leaves = base.leaf_labels();
        let target: BTreeSet<String> = match at {
            RootAt::Leaf(name) => {
                if base.leaf(name).is_none() {
                    return Err(Error::UnknownTaxon(name.clone()));
                }
                std::iter::once(name.clone()).collect()
            }
            RootAt::Clade(names) => {
                for n in names {
                    if base.leaf(n).is_none() {
                        return Err(Error::UnknownTaxon(n.clone()));
                    }
                }
                names.iter().cloned().collect()
            }
        };
        let complement: BTreeSet<String> = leaves.iter().filter(|l| !target.contains(*l)).cloned().collect();
        let clades = base.clades();
        let edge = (0..base.nodes.len())
            .filter(|&v| v != base.root)
            .find(|&v| {
                let c: BTreeSet<String> = clades[v].iter().cloned().collect();
                c == target || c == complement
            })
            .ok_or_else(|| Error::invalid("selector does not match any edge"))?;
        let p = base.nodes[edge].parent.expect("non-root");
        let half = base.nodes[edge].length.map(|l| l / 2.0);
        let new_root = base.nodes.len();
        let mut edges: Vec<_> = base
            .undirected_edges()
            .into_iter()
            .filter(|&(_, c, _)| c != edge)
            .collect();
        edges.push((new_root, p, half));
        edges.push((new_root, edge, half));
        let mut labels: Vec<Option<String>> = base.nodes.iter().map(|n| n.label.clone()).collect();
        labels.push(None);
        PhyloTree::from_edges(labels, &edges, new_root, true)
    }

    /// Contract internal edges no longer than `tol`.
    pub fn collapse_short_edges(&self, tol: f64) -> PhyloTree {
        let mut t = self.clone();
        loop {
            let hit = (0..t.nodes.len())
                .find(|&v| v != t.root && !t.nodes[v].is_leaf() && t.nodes[v].length.is_some_and(|l| l <= tol));
            let Some(v) = hit else { break };
            let p = t.nodes[v].parent.expect("non-root");
            let children = std::mem::take(&mut t.nodes[v].children);
            for &c in &children {
                t.nodes[c].parent = Some(p);
            }
            let pos = t.nodes[p].children.iter().position(|&c| c == v).expect("child");
            t.nodes[p].children.splice(pos..=pos, children);
            t = t.compacted();
        }
        t.sort_children();
        t
    }

    /// Drop detached nodes and renumber.
    fn compacted(&self) -> PhyloTree {
        let order = self.preorder();
        let mut map = HashMap::new();
        for (new, &old) in order.iter().enumerate() {
            map.insert(old, new);
        }
        let nodes = order
            .iter()
            .map(|&old| {
                let n = &self.nodes[old];
                Node {
                    label: n.label.clone(),
                    parent: n.parent.map(|p| map[&p]),
                    children: n.children.iter().map(|c| map[c]).collect(),
                    length: n.length,
                }
            })
            .collect();
        PhyloTree {
            nodes,
            root: 0,
            rooted: self.rooted,
        }
    }

    /// Path-length distances between leaves, in sorted label order.
    pub fn leaf_distances(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let labels = self.leaf_labels();
        let idx: Vec<usize> = labels.iter().map(|l| self.leaf(l).expect("leaf")).collect();
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.nodes.len()];
        for (p, c, l) in self.undirected_edges() {
            let l = l.unwrap_or(1.0);
            adj[p].push((c, l));
            adj[c].push((p, l));
        }
        let mut out = vec![vec![0.0; labels.len()]; labels.len()];
        for (i, &src) in idx.iter().enumerate() {
            let mut dist = vec![f64::NAN; self.nodes.len()];
            dist[src] = 0.0;
            let mut stack = vec![src];
            while let Some(v) = stack.pop() {
                for &(w, l) in &adj[v] {
                    if dist[w].is_nan() {
                        dist[w] = dist[v] + l;
                        stack.push(w);
                    }
                }
            }
            for (j, &dst) in idx.iter().enumerate() {
                out[i][j] = dist[dst];
            }
        }
        (labels, out)
    }

    /// Canonical Newick. Unrooted trees hang from the parent of their smallest leaf.
    pub fn to_newick(&self) -> String {
        self.newick_inner(true)
    }

    /// Canonical Newick without branch lengths or internal labels.
    pub fn topology_newick(&self) -> String {
        self.newick_inner(false)
    }

    fn newick_inner(&self, full: bool) -> String {
        let t = self.reanchored();
        let mut t = t;
        t.sort_children();
        let mut out = String::new();
        t.write_node(t.root, full, &mut out);
        out.push(';');
        out
    }

    fn write_node(&self, v: usize, full: bool, out: &mut String) {
        let node = &self.nodes[v];
        if !node.is_leaf() {
            out.push('(');
            for (k, &c) in node.children.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                self.write_node(c, full, out);
            }
            out.push(')');
        }
        if let Some(l) = &node.label {
            if node.is_leaf() || full {
                out.push_str(&quote_label(l));
            }
        }
        if full && v != self.root {
            if let Some(len) = node.length {
                out.push(':');
                out.push_str(&format_length(len));
            }
        }
    }

    /// Newick with internal labels and without branch lengths.
    pub fn topology_newick_labelled(&self) -> String {
        self.strip_lengths().to_newick()
    }

    /// Give unlabelled internal nodes the labels `n1, n2, ...` in canonical preorder.
    pub fn with_internal_labels(&self) -> PhyloTree {
        let mut t = self.clone();
        t.sort_children();
        let taken: HashSet<String> = t.nodes.iter().filter_map(|n| n.label.clone()).collect();
        let mut k = 0;
        for v in t.preorder() {
            if t.nodes[v].label.is_none() {
                let name = loop {
                    k += 1;
                    let c = format!("n{k}");
                    if !taken.contains(&c) {
                        break c;
                    }
                };
                t.nodes[v].label = Some(name);
            }
        }
        t
    }
}

impl fmt::Display for PhyloTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_newick())
    }
}

/// Robinson–Foulds distance and its normalized form `rf / (|S1| + |S2|)`.
pub fn robinson_foulds(t1: &PhyloTree, t2: &PhyloTree) -> Result<(usize, f64)> {
    let l1: BTreeSet<String> = t1.leaf_labels().into_iter().collect();
    let l2: BTreeSet<String> = t2.leaf_labels().into_iter().collect();
    if l1 != l2 {
        return Err(Error::LeafSetMismatch {
            only_first: l1.difference(&l2).cloned().collect(),
            only_second: l2.difference(&l1).cloned().collect(),
        });
    }
    let s1 = t1.splits();
    let s2 = t2.splits();
    let rf = s1.symmetric_difference(&s2).count();
    let denom = s1.len() + s2.len();
    let norm = if denom == 0 { 0.0 } else { rf as f64 / denom as f64 };
    Ok((rf, norm))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> PhyloTree {
        parse_newick(s).unwrap()
    }

    #[test]
    fn small_trees() {
        let two = t("(A,B);");
        assert_eq!(two.n_leaves(), 2);
        assert_eq!(two.to_newick(), "(A,B);");
        assert!(two.splits().is_empty());
        let one = t("A;");
        assert_eq!(one.leaf_labels(), vec!["A"]);
        assert_eq!(t("(A);").n_leaves(), 1);
    }

    #[test]
    fn four_leaf_split() {
        let q = t("((A,B),(C,D));");
        let s: Vec<Split> = q.splits().into_iter().collect();
        assert_eq!(s, vec![Split::parse("A,B|C,D").unwrap()]);
        assert!(q.is_rooted());
        assert_eq!(q.unroot().to_newick(), "(A,B,(C,D));");
    }

    #[test]
    fn caterpillar_has_three_splits() {
        let c = t("(A,(B,(C,(D,(E,F)))));");
        assert_eq!(c.splits().len(), 3);
        let star = t("(A:1,(B:1,C:1):0,D:1);").collapse_short_edges(0.0);
        assert!(star.splits().is_empty());
        assert_eq!(star.n_leaves(), 4);
    }

    #[test]
    fn t1_topology() {
        let t1 = t("(Hittite,((Tocharian,Armenian),(Albanian,Greek)));");
        let splits: Vec<String> = t1.splits().iter().map(|s| s.to_string()).collect();
        assert_eq!(
            splits,
            vec![
                "Albanian,Greek|Armenian,Hittite,Tocharian",
                "Albanian,Greek,Hittite|Armenian,Tocharian"
            ]
        );
        let back = t(&t1.to_newick());
        assert_eq!(back.splits(), t1.splits());
    }

    #[test]
    fn newick_errors() {
        assert!(matches!(parse_newick("((A,B);"), Err(Error::Newick { .. })));
        assert!(matches!(parse_newick("(A,A);"), Err(Error::Newick { .. })));
        assert!(matches!(parse_newick("(A:-1,B);"), Err(Error::Newick { .. })));
        assert!(parse_newick("(A,B)").is_err());
        assert!(parse_newick("(A,,B);").is_err());
    }

    #[test]
    fn lengths_round_trip() {
        let s = t("((A:0.1234567,B:2):1e-7,(C:123456789,D:0.5));");
        let out = s.to_newick();
        assert_eq!(out, "((A:0.123457,B:2):1e-7,(C:1.23457e8,D:0.5));");
        assert_eq!(format_length(0.000123456789), "0.000123457");
        assert_eq!(format_length(1.5), "1.5");
        assert_eq!(format_length(100000.0), "100000");
        assert_eq!(format_length(999999.7), "1e6");
    }

    #[test]
    fn quoted_labels() {
        let q = t("('Serb-Croatian',B,'it''s');");
        assert_eq!(q.leaf_labels(), vec!["B", "Serb-Croatian", "it's"]);
        let spaced = t("(Cal_N,B,C);");
        assert_eq!(spaced.leaf_labels()[2], "Cal N");
        assert_eq!(t(&q.to_newick()).leaf_labels(), q.leaf_labels());
        assert_eq!(t(&spaced.to_newick()).leaf_labels(), spaced.leaf_labels());
    }

    #[test]
    fn rf_examples() {
        let a = t("((A,B),(C,D),E);");
        assert_eq!(robinson_foulds(&a, &a).unwrap(), (0, 0.0));
        let b = t("((A,C),(B,D),E);");
        assert_eq!(robinson_foulds(&a, &b).unwrap(), (4, 1.0));
        let c = t("((A,B),C,D);");
        assert!(matches!(robinson_foulds(&a, &c), Err(Error::LeafSetMismatch { .. })));
        let s1 = t("(A,B,C);");
        assert_eq!(robinson_foulds(&s1, &s1).unwrap(), (0, 0.0));
    }

    #[test]
    fn reroot_at_leaf() {
        let u = t("(Latin:1,Romanian:2,(Spanish:1,(Italian:1,(French:1,Portuguese:1):1):1):1);");
        let r = u.reroot(&RootAt::Leaf("Latin".into())).unwrap();
        assert!(r.is_rooted());
        let root = r.node(r.root());
        assert!(root
            .children
            .iter()
            .any(|&c| r.node(c).label.as_deref() == Some("Latin")));
        assert_eq!(r.splits(), u.splits());
        let again = r.reroot(&RootAt::Leaf("Latin".into())).unwrap();
        assert_eq!(again.to_newick(), r.to_newick());
        assert_eq!(r.unroot().splits(), u.splits());
        assert!(u.reroot(&RootAt::Leaf("Klingon".into())).is_err());
        // lengths split at the midpoint
        assert!(r.to_newick().contains("Latin:0.5"));
    }

    #[test]
    fn reroot_at_clade() {
        let u = t("(A,B,(C,(D,E)));");
        let r = u.reroot(&RootAt::Clade(vec!["D".into(), "E".into()])).unwrap();
        assert_eq!(r.topology_newick(), "(((A,B),C),(D,E));");
        assert_eq!(r.splits(), u.splits());
    }

    #[test]
    fn leaf_distances_sum_paths() {
        let q = t("((A:1,B:2):1,(C:1,D:3):0);");
        let (labels, d) = q.leaf_distances();
        assert_eq!(labels, vec!["A", "B", "C", "D"]);
        assert_eq!(d[0][1], 3.0);
        assert_eq!(d[0][3], 5.0);
        assert_eq!(d[1][2], 4.0);
    }

    #[test]
    fn internal_labels_assigned() {
        let q = t("((A,B),(C,D));").with_internal_labels();
        let out = q.to_newick();
        assert_eq!(out, "((A,B)n2,(C,D)n3)n1;");
        assert_eq!(t(&out).splits(), q.splits());
    }
}
