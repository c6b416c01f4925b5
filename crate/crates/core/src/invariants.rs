//! Flattenings of pattern tensors, distance-to-low-rank split scores and
//! 3×3-minor invariant norms.

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_rational::Ratio;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::markov::PatternDistribution;
use crate::tree::{PhyloTree, Split};

/// Default relative tolerance for numerical rank.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-8;

/// A tensor reshaped along a leaf bipartition: rows are patterns of `row_leaves`,
/// columns patterns of `col_leaves`, both in lexicographic order.
#[derive(Clone, Debug, PartialEq)]
pub struct Flattening {
    pub row_leaves: Vec<String>,
    pub col_leaves: Vec<String>,
    pub matrix: DMatrix<f64>,
}

/// Positions of `side` within the tensor's leaves, and the complement, both
/// in tensor order.
fn partition_positions<S: AsRef<str>>(t: &PatternDistribution, side: &[S]) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut a = Vec::new();
    for s in side {
        let p = t
            .leaves()
            .iter()
            .position(|l| l == s.as_ref())
            .ok_or_else(|| Error::UnknownTaxon(s.as_ref().to_string()))?;
        if !a.contains(&p) {
            a.push(p);
        }
    }
    a.sort_unstable();
    let b: Vec<usize> = (0..t.n_leaves()).filter(|p| !a.contains(p)).collect();
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("flattening needs a nontrivial partition"));
    }
    Ok((a, b))
}

/// Row and column index of every tensor entry.
fn reindex(t: &PatternDistribution, a: &[usize], b: &[usize]) -> Vec<(usize, usize)> {
    let k = t.kappa();
    (0..t.probs().len())
        .map(|idx| {
            let z = t.pattern_of(idx);
            let r = a.iter().fold(0, |acc, &p| acc * k + z[p]);
            let c = b.iter().fold(0, |acc, &p| acc * k + z[p]);
            (r, c)
        })
        .collect()
}

/// Flatten `t` along `side | rest`.
pub fn flatten<S: AsRef<str>>(t: &PatternDistribution, side: &[S]) -> Result<Flattening> {
    let (a, b) = partition_positions(t, side)?;
    let k = t.kappa();
    let mut matrix = DMatrix::zeros(k.pow(a.len() as u32), k.pow(b.len() as u32));
    for (idx, (r, c)) in reindex(t, &a, &b).into_iter().enumerate() {
        matrix[(r, c)] = t.probs()[idx];
    }
    Ok(Flattening {
        row_leaves: a.iter().map(|&p| t.leaves()[p].clone()).collect(),
        col_leaves: b.iter().map(|&p| t.leaves()[p].clone()).collect(),
        matrix,
    })
}

/// Integer flattening of an empirical tensor's counts, plus the total.
fn flatten_counts<S: AsRef<str>>(t: &PatternDistribution, side: &[S]) -> Result<(Vec<Vec<i128>>, i128)> {
    let (counts, total) = t
        .counts()
        .ok_or_else(|| Error::invalid("exact mode needs an empirical tensor with counts"))?;
    let (a, b) = partition_positions(t, side)?;
    let k = t.kappa();
    let mut m = vec![vec![0i128; k.pow(b.len() as u32)]; k.pow(a.len() as u32)];
    for (idx, (r, c)) in reindex(t, &a, &b).into_iter().enumerate() {
        m[r][c] = counts[idx] as i128;
    }
    Ok((m, total as i128))
}

/// Singular values, largest first.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Frobenius distance from `f` to the nearest matrix of rank ≤ `r`.
pub fn split_rank_distance(f: &Flattening, r: usize) -> Result<f64> {
    if r == 0 {
        return Err(Error::invalid("target rank must be at least 1"));
    }
    Ok(singular_values(&f.matrix)
        .iter()
        .skip(r)
        .map(|s| s * s)
        .sum::<f64>()
        .sqrt())
}

/// Number of singular values above `tolerance · σ_max`.
pub fn flattening_rank<S: AsRef<str>>(t: &PatternDistribution, side: &[S], tolerance: f64) -> Result<usize> {
    let s = singular_values(&flatten(t, side)?.matrix);
    let max = s.first().copied().unwrap_or(0.0);
    if max == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&x| x > tolerance * max).count())
}

fn det3<T>(m: [[T; 3]; 3]) -> T
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<Output = T>,
{
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn triples(n: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                out.push([a, b, c]);
            }
        }
    }
    out
}

/// Sum and maximum of |minor| over all 3×3 minors.
fn minor_summary<T, A>(m: &[Vec<T>], abs: A) -> (T, T)
where
    T: Copy + Send + Sync + PartialOrd + Default + Add<Output = T> + Sub<Output = T> + Mul<Output = T>,
    A: Fn(T) -> T + Sync,
{
    let rows = triples(m.len());
    let cols = triples(m.first().map_or(0, Vec::len));
    rows.par_iter()
        .map(|r| {
            let mut sum = T::default();
            let mut max = T::default();
            for c in &cols {
                let mut sub = [[T::default(); 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        sub[i][j] = m[r[i]][c[j]];
                    }
                }
                let v = abs(det3(sub));
                sum = sum + v;
                if v > max {
                    max = v;
                }
            }
            (sum, max)
        })
        .reduce(
            || (T::default(), T::default()),
            |a, b| (a.0 + b.0, if b.1 > a.1 { b.1 } else { a.1 }),
        )
}

/// How per-edge minor values combine into the two reported norms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Aggregation {
    /// ℓ1: largest per-edge sum of |minors|. ℓ∞: largest |minor| anywhere.
    #[default]
    PerEdgeMax,
    /// Both norms summed over edges (ℓ∞ adds each edge's largest |minor|).
    PerEdgeSum,
    /// Norms of the vector of all minors: ℓ1 sums everything, ℓ∞ is the global max.
    GlobalSum,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-edge-max" => Ok(Aggregation::PerEdgeMax),
            "per-edge-sum" => Ok(Aggregation::PerEdgeSum),
            "global-sum" => Ok(Aggregation::GlobalSum),
            _ => Err(Error::invalid(format!("unknown aggregation `{s}`"))),
        }
    }
}

fn aggregate<T>(per_edge: &[(T, T)], how: Aggregation) -> (T, T)
where
    T: Copy + PartialOrd + Default + Add<Output = T>,
{
    let max = |it: &mut dyn Iterator<Item = T>| it.fold(T::default(), |a, b| if b > a { b } else { a });
    let sum = |it: &mut dyn Iterator<Item = T>| it.fold(T::default(), |a, b| a + b);
    match how {
        Aggregation::PerEdgeMax => (
            max(&mut per_edge.iter().map(|e| e.0)),
            max(&mut per_edge.iter().map(|e| e.1)),
        ),
        Aggregation::PerEdgeSum => (
            sum(&mut per_edge.iter().map(|e| e.0)),
            sum(&mut per_edge.iter().map(|e| e.1)),
        ),
        Aggregation::GlobalSum => (
            sum(&mut per_edge.iter().map(|e| e.0)),
            max(&mut per_edge.iter().map(|e| e.1)),
        ),
    }
}

/// Minor statistics for one split of the tree.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeInvariant {
    pub split: Split,
    /// Σ |minor|.
    pub l1: f64,
    /// max |minor|.
    pub linf: f64,
    /// Distance of the flattening to rank 2.
    pub rank_distance: f64,
}

/// Invariant norms of a tensor against a tree.
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantNorms {
    pub phi_l1: f64,
    pub phi_linf: f64,
    pub edges: Vec<EdgeInvariant>,
}

fn check_tree(t: &PatternDistribution, tree: &PhyloTree) -> Result<()> {
    if t.kappa() != 2 {
        return Err(Error::invalid("3×3-minor invariants are defined for two states"));
    }
    let mut tl = t.leaves().to_vec();
    tl.sort();
    let ll = tree.leaf_labels();
    if tl != ll {
        return Err(Error::LeafSetMismatch {
            only_first: tl.iter().filter(|x| !ll.contains(x)).cloned().collect(),
            only_second: ll.iter().filter(|x| !tl.contains(x)).cloned().collect(),
        });
    }
    Ok(())
}

/// ‖Φ‖ℓ1 and ‖Φ‖ℓ∞ from the 3×3 minors of every split flattening of `tree`.
pub fn edge_invariants(t: &PatternDistribution, tree: &PhyloTree, how: Aggregation) -> Result<InvariantNorms> {
    check_tree(t, tree)?;
    let mut edges = Vec::new();
    for split in tree.splits() {
        let f = flatten(t, split.first())?;
        let rows: Vec<Vec<f64>> = (0..f.matrix.nrows())
            .map(|r| f.matrix.row(r).iter().copied().collect())
            .collect();
        let (l1, linf) = minor_summary(&rows, f64::abs);
        edges.push(EdgeInvariant {
            rank_distance: split_rank_distance(&f, 2)?,
            split,
            l1,
            linf,
        });
    }
    let per: Vec<(f64, f64)> = edges.iter().map(|e| (e.l1, e.linf)).collect();
    let (phi_l1, phi_linf) = aggregate(&per, how);
    Ok(InvariantNorms {
        phi_l1,
        phi_linf,
        edges,
    })
}

/// The same norms in exact rational arithmetic from an empirical tensor's counts.
pub fn edge_invariants_exact(
    t: &PatternDistribution,
    tree: &PhyloTree,
    how: Aggregation,
) -> Result<(Ratio<i128>, Ratio<i128>)> {
    check_tree(t, tree)?;
    let mut per = Vec::new();
    let mut total = 1;
    for split in tree.splits() {
        let (m, n) = flatten_counts(t, split.first())?;
        total = n;
        per.push(minor_summary(&m, i128::abs));
    }
    let (l1, linf) = aggregate(&per, how);
    let denom = total.pow(3);
    Ok((Ratio::new(l1, denom), Ratio::new(linf, denom)))
}
