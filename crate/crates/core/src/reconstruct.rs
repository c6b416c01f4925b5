//! Tree reconstruction: neighbor joining, UPGMA and greedy covariance grouping.

use std::cmp::Ordering;

use crate::distance::{distance_matrix, DistanceMatrix, Metric};
use crate::error::{Error, Result};
use crate::matrix::{restrict_complete, CharacterMatrix, CompletenessPolicy};
use crate::tree::PhyloTree;

/// Reconstruction methods.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Nj,
    Upgma,
    Covariance,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nj" => Ok(Method::Nj),
            "upgma" => Ok(Method::Upgma),
            "covariance" | "cov" => Ok(Method::Covariance),
            _ => Err(Error::invalid(format!("unknown method `{s}`"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Nj => "nj",
            Method::Upgma => "upgma",
            Method::Covariance => "covariance",
        })
    }
}

/// Incremental edge list for building trees bottom-up.
struct Builder {
    labels: Vec<Option<String>>,
    edges: Vec<(usize, usize, Option<f64>)>,
}

impl Builder {
    fn with_leaves(names: &[String]) -> Self {
        Builder {
            labels: names.iter().cloned().map(Some).collect(),
            edges: Vec::new(),
        }
    }

    fn internal(&mut self) -> usize {
        self.labels.push(None);
        self.labels.len() - 1
    }

    fn link(&mut self, parent: usize, child: usize, len: Option<f64>) {
        self.edges.push((parent, child, len));
    }

    fn finish(self, anchor: usize, rooted: bool) -> PhyloTree {
        PhyloTree::from_edges(self.labels, &self.edges, anchor, rooted).expect("builder yields a tree")
    }
}

/// Active cluster: tree node plus the smallest leaf label below it, which is
/// used for tie-breaking.
#[derive(Clone)]
struct Cluster {
    node: usize,
    name: String,
    size: usize,
    height: f64,
}

fn pair_key<'a>(a: &'a Cluster, b: &'a Cluster) -> (&'a str, &'a str) {
    if a.name <= b.name {
        (&a.name, &b.name)
    } else {
        (&b.name, &a.name)
    }
}

/// Index pair minimizing `score`; exact ties go to the lexicographically
/// smallest name pair.
fn argmin_pair(clusters: &[Cluster], mut score: impl FnMut(usize, usize) -> f64) -> (usize, usize) {
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..clusters.len() {
        for j in i + 1..clusters.len() {
            let s = score(i, j);
            let better = match best {
                None => true,
                Some((bs, bi, bj)) => match s.partial_cmp(&bs).unwrap_or(Ordering::Equal) {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => pair_key(&clusters[i], &clusters[j]) < pair_key(&clusters[bi], &clusters[bj]),
                },
            };
            if better {
                best = Some((s, i, j));
            }
        }
    }
    let (_, i, j) = best.expect("at least two clusters");
    (i, j)
}

fn check_finite(d: &DistanceMatrix) -> Result<()> {
    match d.first_non_finite() {
        Some((a, b)) => Err(Error::NonFinite(a, b)),
        None => Ok(()),
    }
}

fn leaf_clusters(d: &DistanceMatrix) -> Vec<Cluster> {
    d.taxa()
        .iter()
        .enumerate()
        .map(|(i, t)| Cluster {
            node: i,
            name: t.clone(),
            size: 1,
            height: 0.0,
        })
        .collect()
}

/// Neighbor joining with the Studier–Keppler update. Negative branch lengths
/// are clamped to zero.
///
/// ```
/// use phylomarkov::distance::DistanceMatrix;
/// use phylomarkov::reconstruct::neighbor_joining;
/// let taxa = ["A", "B", "C", "D"].map(String::from).to_vec();
/// let d = DistanceMatrix::new(taxa, vec![
///     vec![0.0, 3.0, 3.0, 5.0],
///     vec![3.0, 0.0, 4.0, 6.0],
///     vec![3.0, 4.0, 0.0, 4.0],
///     vec![5.0, 6.0, 4.0, 0.0],
/// ]).unwrap();
/// let t = neighbor_joining(&d).unwrap();
/// assert_eq!(t.to_newick(), "(A:1,B:2,(C:1,D:3):1);");
/// ```
pub fn neighbor_joining(d: &DistanceMatrix) -> Result<PhyloTree> {
    check_finite(d)?;
    let n = d.len();
    if n < 3 {
        return Err(Error::invalid("neighbor joining needs at least three taxa"));
    }
    let mut b = Builder::with_leaves(d.taxa());
    let mut clusters = leaf_clusters(d);
    let mut dist: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| d.get(i, j)).collect()).collect();

    while clusters.len() > 3 {
        let r = clusters.len();
        let sums: Vec<f64> = dist.iter().map(|row| row.iter().sum()).collect();
        let rm2 = (r - 2) as f64;
        let (i, j) = argmin_pair(&clusters, |i, j| rm2 * dist[i][j] - sums[i] - sums[j]);
        let dij = dist[i][j];
        let li = 0.5 * dij + (sums[i] - sums[j]) / (2.0 * rm2);
        let lj = dij - li;
        let u = b.internal();
        b.link(u, clusters[i].node, Some(li.max(0.0)));
        b.link(u, clusters[j].node, Some(lj.max(0.0)));

        let new_row: Vec<f64> = (0..r)
            .filter(|&k| k != i && k != j)
            .map(|k| 0.5 * (dist[i][k] + dist[j][k] - dij))
            .collect();
        let merged = Cluster {
            node: u,
            name: clusters[i].name.clone().min(clusters[j].name.clone()),
            size: clusters[i].size + clusters[j].size,
            height: 0.0,
        };
        // Remove j then i (j > i), append the new cluster.
        for idx in [j, i] {
            clusters.remove(idx);
            dist.remove(idx);
            for row in dist.iter_mut() {
                row.remove(idx);
            }
        }
        for (row, v) in dist.iter_mut().zip(&new_row) {
            row.push(*v);
        }
        let mut last = new_row;
        last.push(0.0);
        dist.push(last);
        clusters.push(merged);
    }

    let c = b.internal();
    let (d01, d02, d12) = (dist[0][1], dist[0][2], dist[1][2]);
    let lens = [
        0.5 * (d01 + d02 - d12),
        0.5 * (d01 + d12 - d02),
        0.5 * (d02 + d12 - d01),
    ];
    for (k, cl) in clusters.iter().enumerate() {
        b.link(c, cl.node, Some(lens[k].max(0.0)));
    }
    Ok(b.finish(c, false))
}

/// UPGMA: average linkage weighted by cluster size, node heights at half the
/// merge distance. The result is rooted and ultrametric.
pub fn upgma(d: &DistanceMatrix) -> Result<PhyloTree> {
    check_finite(d)?;
    let n = d.len();
    if n < 2 {
        return Err(Error::invalid("UPGMA needs at least two taxa"));
    }
    let mut b = Builder::with_leaves(d.taxa());
    let mut clusters = leaf_clusters(d);
    let mut dist: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| d.get(i, j)).collect()).collect();
    let mut root = 0;
    while clusters.len() > 1 {
        let (i, j) = argmin_pair(&clusters, |i, j| dist[i][j]);
        let h = 0.5 * dist[i][j];
        let (ci, cj) = (clusters[i].clone(), clusters[j].clone());
        let u = b.internal();
        b.link(u, ci.node, Some((h - ci.height).max(0.0)));
        b.link(u, cj.node, Some((h - cj.height).max(0.0)));
        root = u;
        let (wi, wj) = (ci.size as f64, cj.size as f64);
        let new_row: Vec<f64> = (0..clusters.len())
            .filter(|&k| k != i && k != j)
            .map(|k| (wi * dist[i][k] + wj * dist[j][k]) / (wi + wj))
            .collect();
        for idx in [j, i] {
            clusters.remove(idx);
            dist.remove(idx);
            for row in dist.iter_mut() {
                row.remove(idx);
            }
        }
        for (row, v) in dist.iter_mut().zip(&new_row) {
            row.push(*v);
        }
        let mut last = new_row;
        last.push(0.0);
        dist.push(last);
        clusters.push(Cluster {
            node: u,
            name: ci.name.min(cj.name),
            size: ci.size + cj.size,
            height: h,
        });
    }
    Ok(b.finish(root, true))
}

/// Empirical covariances of the ±1-coded rows, population normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceMatrix {
    taxa: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl CovarianceMatrix {
    pub fn taxa(&self) -> &[String] {
        &self.taxa
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn len(&self) -> usize {
        self.taxa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taxa.is_empty()
    }

    pub fn from_rows(taxa: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        let n = taxa.len();
        if values.len() != n || values.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("covariance grid is not square"));
        }
        for i in 0..n {
            for j in 0..n {
                if values[i][j] != values[j][i] || values[i][j].is_nan() {
                    return Err(Error::invalid("covariance grid is not symmetric"));
                }
            }
        }
        Ok(CovarianceMatrix { taxa, values })
    }
}

/// Covariances over the features complete among `taxa`.
pub fn covariance_matrix<S: AsRef<str>>(m: &CharacterMatrix, taxa: &[S]) -> Result<CovarianceMatrix> {
    let w = restrict_complete(m, taxa)?;
    let t = w.n_features() as f64;
    let rows: Vec<Vec<f64>> = (0..w.n_taxa())
        .map(|i| w.row(i).iter().map(|c| c.sign().expect("complete")).collect())
        .collect();
    let means: Vec<f64> = rows.iter().map(|r| r.iter().sum::<f64>() / t).collect();
    let n = rows.len();
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let e: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum::<f64>() / t;
            let c = e - means[i] * means[j];
            values[i][j] = c;
            values[j][i] = c;
        }
    }
    CovarianceMatrix::from_rows(w.taxa().to_vec(), values)
}

/// Leaf sets joined at each step of the greedy covariance grouping.
pub fn covariance_merge_order(c: &CovarianceMatrix) -> Vec<(Vec<String>, Vec<String>)> {
    greedy(c).1
}

fn greedy(c: &CovarianceMatrix) -> (PhyloTree, Vec<(Vec<String>, Vec<String>)>) {
    let n = c.len();
    let mut b = Builder::with_leaves(c.taxa());
    let mut clusters: Vec<Cluster> = c
        .taxa()
        .iter()
        .enumerate()
        .map(|(i, t)| Cluster {
            node: i,
            name: t.clone(),
            size: 1,
            height: 0.0,
        })
        .collect();
    let mut members: Vec<Vec<String>> = c.taxa().iter().map(|t| vec![t.clone()]).collect();
    let mut cov: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| c.get(i, j)).collect()).collect();
    let mut merges = Vec::new();
    let mut root = 0;
    while clusters.len() > 1 {
        let (i, j) = argmin_pair(&clusters, |i, j| -cov[i][j]);
        let u = b.internal();
        b.link(u, clusters[i].node, None);
        b.link(u, clusters[j].node, None);
        root = u;
        // Min against composites equals the min over every constituent pair.
        let new_row: Vec<f64> = (0..clusters.len())
            .filter(|&k| k != i && k != j)
            .map(|k| cov[i][k].min(cov[j][k]))
            .collect();
        let (mut mi, mut mj) = (members[i].clone(), members[j].clone());
        mi.sort();
        mj.sort();
        if mj[0] < mi[0] {
            std::mem::swap(&mut mi, &mut mj);
        }
        merges.push((mi.clone(), mj.clone()));
        let name = clusters[i].name.clone().min(clusters[j].name.clone());
        let size = clusters[i].size + clusters[j].size;
        for idx in [j, i] {
            clusters.remove(idx);
            members.remove(idx);
            cov.remove(idx);
            for row in cov.iter_mut() {
                row.remove(idx);
            }
        }
        for (row, v) in cov.iter_mut().zip(&new_row) {
            row.push(*v);
        }
        let mut last = new_row;
        last.push(f64::INFINITY);
        cov.push(last);
        clusters.push(Cluster {
            node: u,
            name,
            size,
            height: 0.0,
        });
        mi.extend(mj);
        members.push(mi);
    }
    (b.finish(root, true), merges)
}

/// Repeatedly join the two nodes of largest covariance. A merged node's
/// covariance to another node is the minimum over constituent pairs.
pub fn covariance_greedy(c: &CovarianceMatrix) -> Result<PhyloTree> {
    if c.len() < 2 {
        return Err(Error::invalid("covariance grouping needs at least two taxa"));
    }
    Ok(greedy(c).0)
}

/// Tree from a distance matrix by NJ or UPGMA.
pub fn tree_from_distances(d: &DistanceMatrix, method: Method) -> Result<PhyloTree> {
    match method {
        Method::Nj => neighbor_joining(d),
        Method::Upgma => upgma(d),
        Method::Covariance => Err(Error::invalid("covariance grouping works on characters, not distances")),
    }
}

/// Full pipeline from characters to a tree.
pub fn reconstruct<S: AsRef<str>>(
    m: &CharacterMatrix,
    taxa: &[S],
    metric: Metric,
    method: Method,
    policy: CompletenessPolicy,
) -> Result<PhyloTree> {
    match method {
        Method::Covariance => covariance_greedy(&covariance_matrix(m, taxa)?),
        _ => tree_from_distances(&distance_matrix(m, taxa, metric, policy)?, method),
    }
}
