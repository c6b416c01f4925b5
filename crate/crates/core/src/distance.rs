//! Pairwise distances between taxa: logdet (paralinear), modified Jaccard and ℓp.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{restrict_complete, CellValue, CharacterMatrix, CompletenessPolicy};

/// Symmetric matrix of pairwise distances; entries may be `+∞`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    taxa: Vec<String>,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Validate and wrap a square grid. NaN, negative entries, asymmetry and a
    /// nonzero diagonal are rejected.
    pub fn new(taxa: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = taxa.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("distance grid is not square over the taxa"));
        }
        for i in 0..n {
            if rows[i][i] != 0.0 {
                return Err(Error::invalid(format!("nonzero diagonal for `{}`", taxa[i])));
            }
            for j in 0..n {
                let v = rows[i][j];
                if v.is_nan() || v < 0.0 {
                    return Err(Error::invalid(format!(
                        "bad distance {v} for ({}, {})",
                        taxa[i], taxa[j]
                    )));
                }
                if v != rows[j][i] {
                    return Err(Error::invalid(format!(
                        "asymmetric entry for ({}, {})",
                        taxa[i], taxa[j]
                    )));
                }
            }
        }
        Ok(DistanceMatrix {
            taxa,
            values: rows.concat(),
        })
    }

    /// Build from a function on index pairs `i < j`.
    pub fn from_fn(taxa: Vec<String>, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let n = taxa.len();
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                rows[i][j] = v;
                rows[j][i] = v;
            }
        }
        DistanceMatrix::new(taxa, rows)
    }

    pub fn taxa(&self) -> &[String] {
        &self.taxa
    }

    pub fn len(&self) -> usize {
        self.taxa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taxa.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.taxa.len() + j]
    }

    /// Entry by taxon names.
    pub fn between(&self, a: &str, b: &str) -> Result<f64> {
        let i = self.index(a)?;
        let j = self.index(b)?;
        Ok(self.get(i, j))
    }

    pub fn index(&self, name: &str) -> Result<usize> {
        self.taxa
            .iter()
            .position(|t| t == name)
            .ok_or_else(|| Error::UnknownTaxon(name.to_string()))
    }

    /// True when every off-diagonal entry is finite.
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// The first pair (in row order) with a non-finite entry.
    pub fn first_non_finite(&self) -> Option<(String, String)> {
        let n = self.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .find(|&(i, j)| !self.get(i, j).is_finite())
            .map(|(i, j)| (self.taxa[i].clone(), self.taxa[j].clone()))
    }

    /// Restrict to a subset of taxa, in the given order.
    pub fn select<S: AsRef<str>>(&self, taxa: &[S]) -> Result<Self> {
        let idx = taxa
            .iter()
            .map(|t| self.index(t.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let names = idx.iter().map(|&i| self.taxa[i].clone()).collect();
        DistanceMatrix::from_fn(names, |a, b| self.get(idx[a], idx[b]))
    }

    /// CSV with a taxon header row and column, six decimals.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("taxon");
        for t in &self.taxa {
            out.push(',');
            out.push_str(t);
        }
        out.push('\n');
        for (i, t) in self.taxa.iter().enumerate() {
            out.push_str(t);
            for j in 0..self.len() {
                let v = self.get(i, j);
                if v.is_finite() {
                    let _ = write!(out, ",{v:.6}");
                } else {
                    out.push_str(",inf");
                }
            }
            out.push('\n');
        }
        out
    }

    /// Parse the CSV layout written by [`DistanceMatrix::to_csv_string`].
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut rows = reader.records();
        let header = rows
            .next()
            .ok_or_else(|| Error::invalid("empty distance file"))?
            .map_err(|e| Error::invalid(e.to_string()))?;
        let taxa: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
        let mut grid = Vec::new();
        for (r, rec) in rows.enumerate() {
            let rec = rec.map_err(|e| Error::invalid(e.to_string()))?;
            if rec.get(0).map(str::trim) != taxa.get(r).map(String::as_str) {
                return Err(Error::invalid(format!("row {} label does not match header", r + 2)));
            }
            let vals = rec
                .iter()
                .skip(1)
                .map(|s| match s.trim() {
                    "inf" | "Inf" | "∞" => Ok(f64::INFINITY),
                    s => s
                        .parse::<f64>()
                        .map_err(|_| Error::invalid(format!("bad number `{s}` in row {}", r + 2))),
                })
                .collect::<Result<Vec<_>>>()?;
            grid.push(vals);
        }
        DistanceMatrix::new(taxa, grid)
    }
}

/// κ×κ counts of state pairs; entry (p, q) counts features where the first
/// taxon has state p and the second state q.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointCountMatrix {
    kappa: usize,
    counts: Vec<u64>,
}

impl JointCountMatrix {
    pub fn new(kappa: usize, counts: Vec<u64>) -> Result<Self> {
        if kappa < 2 || counts.len() != kappa * kappa {
            return Err(Error::invalid("joint counts must be a κ×κ grid with κ ≥ 2"));
        }
        Ok(JointCountMatrix { kappa, counts })
    }

    /// 2×2 counts from nested rows.
    pub fn binary(rows: [[u64; 2]; 2]) -> Self {
        JointCountMatrix {
            kappa: 2,
            counts: rows.concat(),
        }
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn get(&self, p: usize, q: usize) -> u64 {
        self.counts[p * self.kappa + q]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.kappa)
            .map(|p| (0..self.kappa).map(|q| self.get(p, q)).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.kappa)
            .map(|q| (0..self.kappa).map(|p| self.get(p, q)).sum())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let k = self.kappa;
        JointCountMatrix {
            kappa: k,
            counts: (0..k * k).map(|i| self.get(i % k, i / k)).collect(),
        }
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.kappa, self.kappa, |p, q| self.get(p, q) as f64)
    }

    /// Diagonal counts of the first taxon against itself.
    pub fn first_marginal(&self) -> Self {
        self.diag_of(self.row_sums())
    }

    /// Diagonal counts of the second taxon against itself.
    pub fn second_marginal(&self) -> Self {
        self.diag_of(self.col_sums())
    }

    fn diag_of(&self, d: Vec<u64>) -> Self {
        let k = self.kappa;
        let mut counts = vec![0; k * k];
        for (p, v) in d.into_iter().enumerate() {
            counts[p * k + p] = v;
        }
        JointCountMatrix { kappa: k, counts }
    }

    /// `(det², r0·r1·c0·c1)` in exact integers for two states, if it fits.
    fn binary_ratio(&self) -> Option<(u128, u128)> {
        if self.kappa != 2 {
            return None;
        }
        let det = self.get(0, 0) as i128 * self.get(1, 1) as i128 - self.get(0, 1) as i128 * self.get(1, 0) as i128;
        let num = det.unsigned_abs().checked_mul(det.unsigned_abs())?;
        let den = self
            .row_sums()
            .into_iter()
            .chain(self.col_sums())
            .try_fold(1u128, |acc, x| acc.checked_mul(x as u128))?;
        Some((num, den))
    }

    fn det_abs_ln(&self) -> f64 {
        if self.kappa == 2 {
            let det = self.get(0, 0) as i128 * self.get(1, 1) as i128 - self.get(0, 1) as i128 * self.get(1, 0) as i128;
            if det == 0 {
                f64::NEG_INFINITY
            } else {
                (det.unsigned_abs() as f64).ln()
            }
        } else {
            let det = self.to_dmatrix().determinant();
            if det == 0.0 {
                f64::NEG_INFINITY
            } else {
                det.abs().ln()
            }
        }
    }
}

/// State-pair counts for taxa `i` and `j` (matrix row indices).
///
/// Under `GlobalComplete` only features set in every taxon of `m` count;
/// under `PairwiseComplete` features set in both `i` and `j`.
pub fn joint_counts(m: &CharacterMatrix, i: usize, j: usize, policy: CompletenessPolicy) -> Result<JointCountMatrix> {
    let usable: Vec<usize> = match policy {
        CompletenessPolicy::GlobalComplete => m.complete_feature_indices(),
        CompletenessPolicy::PairwiseComplete => (0..m.n_features())
            .filter(|&f| m.get(i, f).is_set() && m.get(j, f).is_set())
            .collect(),
    };
    let mut counts = [[0u64; 2]; 2];
    for f in &usable {
        let (a, b) = (m.get(i, *f).state(), m.get(j, *f).state());
        if let (Some(a), Some(b)) = (a, b) {
            counts[a][b] += 1;
        }
    }
    let jc = JointCountMatrix::binary(counts);
    if jc.total() == 0 {
        return Err(Error::NoUsableFeatures(m.taxa()[i].clone(), m.taxa()[j].clone()));
    }
    Ok(jc)
}

/// `−log(|det J| / sqrt(det D1 · det D2))` with D1, D2 the diagonal row and
/// column sums. A singular `J` gives `+∞`; a zero row or column sum is an error.
///
/// ```
/// use phylomarkov::distance::{logdet_distance, JointCountMatrix};
/// let d = logdet_distance(&JointCountMatrix::binary([[3, 1], [1, 3]])).unwrap();
/// assert!((d - 2f64.ln()).abs() < 1e-12);
/// ```
pub fn logdet_distance(j: &JointCountMatrix) -> Result<f64> {
    let rows = j.row_sums();
    let cols = j.col_sums();
    if rows.iter().chain(&cols).any(|&s| s == 0) {
        return Err(Error::StateAbsent);
    }
    if let Some(ratio) = j.binary_ratio() {
        return Ok(match ratio {
            (0, _) => f64::INFINITY,
            (num, den) if num == den => 0.0,
            (num, den) => (-0.5 * (num as f64 / den as f64).ln()).max(0.0),
        });
    }
    let ln_det = j.det_abs_ln();
    if ln_det == f64::NEG_INFINITY {
        return Ok(f64::INFINITY);
    }
    let ln_norm: f64 = rows.iter().chain(&cols).map(|&s| (s as f64).ln()).sum::<f64>() / 2.0;
    // Rounding can leave -1e-16 for identical sequences.
    Ok((ln_norm - ln_det).max(0.0))
}

/// Logdet distance of a real joint matrix (counts or probabilities).
pub fn logdet_from_joint(j: &DMatrix<f64>) -> Result<f64> {
    let k = j.nrows();
    if j.ncols() != k {
        return Err(Error::invalid("joint matrix is not square"));
    }
    let rows: Vec<f64> = (0..k).map(|p| j.row(p).sum()).collect();
    let cols: Vec<f64> = (0..k).map(|q| j.column(q).sum()).collect();
    if rows.iter().chain(&cols).any(|&s| s <= 0.0) {
        return Err(Error::StateAbsent);
    }
    let det = j.determinant();
    if det == 0.0 {
        return Ok(f64::INFINITY);
    }
    let ln_norm: f64 = rows.iter().chain(&cols).map(|s| s.ln()).sum::<f64>() / 2.0;
    Ok((ln_norm - det.abs().ln()).max(0.0))
}

/// `P^{xy} = (J^{xx})^{-1} J^{xy}`, the estimated conditional distribution of
/// y's state given x's.
pub fn transition_estimate(j_xy: &JointCountMatrix, j_xx: &JointCountMatrix) -> Result<DMatrix<f64>> {
    if j_xy.kappa() != j_xx.kappa() {
        return Err(Error::invalid("count matrices differ in size"));
    }
    let inv = j_xx.to_dmatrix().try_inverse().ok_or(Error::Singular)?;
    Ok(inv * j_xy.to_dmatrix())
}

/// Logdet computed through the transition estimates: `−½ log det(P^{xy} P^{yx})`.
pub fn logdet_via_transitions(j_xy: &JointCountMatrix) -> Result<f64> {
    let p_xy = transition_estimate(j_xy, &j_xy.first_marginal()).map_err(|_| Error::StateAbsent)?;
    let j_yx = j_xy.transpose();
    let p_yx = transition_estimate(&j_yx, &j_yx.first_marginal()).map_err(|_| Error::StateAbsent)?;
    let det = (p_xy * p_yx).determinant();
    if det <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((-0.5 * det.ln()).max(0.0))
}

/// Largest entrywise gap between `P^{xy}` and `P^{yx}`.
///
/// Zero when the joint counts are symmetric with equal marginals; large values
/// mean the substitution process looks different in the two directions.
pub fn asymmetry(j_xy: &JointCountMatrix) -> Result<f64> {
    let p_xy = transition_estimate(j_xy, &j_xy.first_marginal()).map_err(|_| Error::StateAbsent)?;
    let j_yx = j_xy.transpose();
    let p_yx = transition_estimate(&j_yx, &j_yx.first_marginal()).map_err(|_| Error::StateAbsent)?;
    Ok((p_xy - p_yx).abs().max())
}

/// Distance metrics available to the pipeline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Metric {
    Logdet,
    Jaccard,
    Lp(f64),
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logdet" => Ok(Metric::Logdet),
            "jaccard" => Ok(Metric::Jaccard),
            "lp" => Ok(Metric::Lp(1.0)),
            _ => match s.strip_prefix("l") {
                Some(p) => p
                    .parse::<f64>()
                    .ok()
                    .filter(|p| *p >= 1.0)
                    .map(Metric::Lp)
                    .ok_or_else(|| Error::invalid(format!("unknown metric `{s}`"))),
                None => Err(Error::invalid(format!("unknown metric `{s}`"))),
            },
        }
    }
}

/// Working matrix over `taxa` under the completeness policy.
fn working_matrix<S: AsRef<str>>(
    m: &CharacterMatrix,
    taxa: &[S],
    policy: CompletenessPolicy,
) -> Result<CharacterMatrix> {
    match policy {
        CompletenessPolicy::GlobalComplete => restrict_complete(m, taxa),
        CompletenessPolicy::PairwiseComplete => m.select_taxa(taxa),
    }
}

fn pairwise<F>(w: &CharacterMatrix, f: F) -> Result<DistanceMatrix>
where
    F: Fn(usize, usize) -> Result<f64> + Sync,
{
    let n = w.n_taxa();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| f(i, j).map_err(|e| Error::PairDistance(w.taxa()[i].clone(), w.taxa()[j].clone(), Box::new(e))))
        .collect::<Result<Vec<f64>>>()?;
    let mut rows = vec![vec![0.0; n]; n];
    for (&(i, j), v) in pairs.iter().zip(values) {
        rows[i][j] = v;
        rows[j][i] = v;
    }
    DistanceMatrix::new(w.taxa().to_vec(), rows)
}

/// Logdet distances between every pair of `taxa`.
pub fn logdet_matrix<S: AsRef<str>>(
    m: &CharacterMatrix,
    taxa: &[S],
    policy: CompletenessPolicy,
) -> Result<DistanceMatrix> {
    let w = working_matrix(m, taxa, policy)?;
    pairwise(&w, |i, j| logdet_distance(&joint_counts(&w, i, j, policy)?))
}

/// Modified Jaccard distance `(N₋₊ + N₊₋) / (N₋₊ + N₊₋ + N₊₊)` over features set
/// in both taxa.
pub fn modified_jaccard(m: &CharacterMatrix, i: usize, j: usize) -> Result<f64> {
    let (mut diff, mut both) = (0u64, 0u64);
    for f in 0..m.n_features() {
        match (m.get(i, f), m.get(j, f)) {
            (CellValue::Plus, CellValue::Plus) => both += 1,
            (CellValue::Plus, CellValue::Minus) | (CellValue::Minus, CellValue::Plus) => diff += 1,
            _ => {}
        }
    }
    if diff + both == 0 {
        return Err(Error::NoJaccardSupport(m.taxa()[i].clone(), m.taxa()[j].clone()));
    }
    Ok(diff as f64 / (diff + both) as f64)
}

pub fn jaccard_matrix<S: AsRef<str>>(
    m: &CharacterMatrix,
    taxa: &[S],
    policy: CompletenessPolicy,
) -> Result<DistanceMatrix> {
    let w = working_matrix(m, taxa, policy)?;
    pairwise(&w, |i, j| modified_jaccard(&w, i, j))
}

/// ℓp norm of the ±1-coded difference over features set in both taxa.
pub fn lp_distance(m: &CharacterMatrix, i: usize, j: usize, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::invalid(format!("p = {p} is below 1")));
    }
    let mut used = 0;
    let mut acc = 0.0;
    for f in 0..m.n_features() {
        if let (Some(a), Some(b)) = (m.get(i, f).sign(), m.get(j, f).sign()) {
            used += 1;
            acc += (a - b).abs().powf(p);
        }
    }
    if used == 0 {
        return Err(Error::NoUsableFeatures(m.taxa()[i].clone(), m.taxa()[j].clone()));
    }
    Ok(acc.powf(1.0 / p))
}

pub fn lp_matrix<S: AsRef<str>>(
    m: &CharacterMatrix,
    taxa: &[S],
    p: f64,
    policy: CompletenessPolicy,
) -> Result<DistanceMatrix> {
    let w = working_matrix(m, taxa, policy)?;
    pairwise(&w, |i, j| lp_distance(&w, i, j, p))
}

/// Distance matrix for any [`Metric`].
pub fn distance_matrix<S: AsRef<str>>(
    m: &CharacterMatrix,
    taxa: &[S],
    metric: Metric,
    policy: CompletenessPolicy,
) -> Result<DistanceMatrix> {
    match metric {
        Metric::Logdet => logdet_matrix(m, taxa, policy),
        Metric::Jaccard => jaccard_matrix(m, taxa, policy),
        Metric::Lp(p) => lp_matrix(m, taxa, p, policy),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::CellValue::{Minus as M, Plus as P, Unset as U};

    fn pair(a: Vec<CellValue>, b: Vec<CellValue>) -> CharacterMatrix {
        CharacterMatrix::from_rows(&["x", "y"], &[a, b]).unwrap()
    }

    #[test]
    fn joint_count_examples() {
        let m = pair(vec![P, P, M], vec![P, M, M]);
        let j = joint_counts(&m, 0, 1, CompletenessPolicy::GlobalComplete).unwrap();
        assert_eq!(j, JointCountMatrix::binary([[1, 0], [1, 1]]));
        let m = pair(vec![P, M, M, P, M], vec![P, M, M, P, M]);
        let j = joint_counts(&m, 0, 1, CompletenessPolicy::GlobalComplete).unwrap();
        assert_eq!(j, JointCountMatrix::binary([[3, 0], [0, 2]]));
        let m = pair(vec![P, M, P], vec![P, M, U]);
        let j = joint_counts(&m, 0, 1, CompletenessPolicy::PairwiseComplete).unwrap();
        assert_eq!(j.total(), 2);
        let m = pair(vec![U, P], vec![P, U]);
        assert!(joint_counts(&m, 0, 1, CompletenessPolicy::PairwiseComplete).is_err());
    }

    #[test]
    fn logdet_examples() {
        let d = logdet_distance(&JointCountMatrix::binary([[7, 0], [0, 4]])).unwrap();
        assert_eq!(d, 0.0);
        let d = logdet_distance(&JointCountMatrix::binary([[3, 1], [1, 3]])).unwrap();
        assert!((d - std::f64::consts::LN_2).abs() < 1e-12);
        let d = logdet_distance(&JointCountMatrix::binary([[2, 2], [3, 3]])).unwrap();
        assert!(d.is_infinite());
        assert!(matches!(
            logdet_distance(&JointCountMatrix::binary([[2, 2], [0, 0]])),
            Err(Error::StateAbsent)
        ));
        let j = JointCountMatrix::binary([[5, 2], [1, 9]]);
        let a = logdet_distance(&j).unwrap();
        let b = logdet_via_transitions(&j).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert_eq!(a, logdet_distance(&j.transpose()).unwrap());
        assert!((a - logdet_from_joint(&j.to_dmatrix()).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn transition_examples() {
        let p = transition_estimate(
            &JointCountMatrix::binary([[3, 1], [1, 3]]),
            &JointCountMatrix::binary([[4, 0], [0, 4]]),
        )
        .unwrap();
        assert_eq!(p, DMatrix::from_row_slice(2, 2, &[0.75, 0.25, 0.25, 0.75]));
        let j = JointCountMatrix::binary([[3, 0], [0, 2]]);
        let p = transition_estimate(&j, &j).unwrap();
        assert_eq!(p, DMatrix::identity(2, 2));
        // Independent sequences give equal rows.
        let j = JointCountMatrix::binary([[2, 6], [1, 3]]);
        let p = transition_estimate(&j, &j.first_marginal()).unwrap();
        assert!((p[(0, 0)] - p[(1, 0)]).abs() < 1e-15);
        assert_eq!(p.rank(1e-12), 1);
        assert!(transition_estimate(&j, &JointCountMatrix::binary([[1, 0], [0, 0]])).is_err());
    }

    #[test]
    fn asymmetry_examples() {
        assert_eq!(asymmetry(&JointCountMatrix::binary([[3, 1], [1, 3]])).unwrap(), 0.0);
        // x mostly Plus, y mostly Minus: P^{xy} and P^{yx} differ.
        let a = asymmetry(&JointCountMatrix::binary([[4, 0], [6, 10]])).unwrap();
        assert!(a > 0.3, "{a}");
    }

    #[test]
    fn jaccard_and_lp() {
        let m = pair(vec![P, M, P], vec![P, M, P]);
        assert_eq!(modified_jaccard(&m, 0, 1).unwrap(), 0.0);
        let m = pair(vec![P, P, M, M, U], vec![P, M, P, M, P]);
        assert!((modified_jaccard(&m, 0, 1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let m = pair(vec![M, M], vec![M, M]);
        assert!(matches!(modified_jaccard(&m, 0, 1), Err(Error::NoJaccardSupport(..))));

        let a = vec![P, P, P, P, M, M];
        let b = vec![M, M, M, M, M, M];
        let m = pair(a, b);
        assert_eq!(lp_distance(&m, 0, 1, 1.0).unwrap(), 8.0);
        assert_eq!(lp_distance(&m, 0, 1, 2.0).unwrap(), 4.0);
        assert_eq!(lp_distance(&m, 0, 0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn matrix_errors_name_the_pair() {
        let m = CharacterMatrix::from_rows(&["a", "b", "c"], &[vec![P, M, P], vec![P, P, P], vec![M, P, P]]).unwrap();
        let e = logdet_matrix(&m, m.taxa(), CompletenessPolicy::GlobalComplete).unwrap_err();
        match e {
            Error::PairDistance(a, b, inner) => {
                assert_eq!((a.as_str(), b.as_str()), ("a", "b"));
                assert!(matches!(*inner, Error::StateAbsent));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn csv_round_trip() {
        let d = DistanceMatrix::from_fn(vec!["A".into(), "B".into(), "C".into()], |i, j| {
            if (i, j) == (0, 2) {
                f64::INFINITY
            } else {
                (i + j) as f64 / 3.0
            }
        })
        .unwrap();
        let s = d.to_csv_string();
        assert!(s.starts_with("taxon,A,B,C\nA,0.000000,0.333333,inf\n"));
        let back = DistanceMatrix::parse_csv(&s).unwrap();
        assert!(back.get(0, 2).is_infinite());
        assert_eq!(d.first_non_finite(), Some(("A".into(), "C".into())));
        assert!(!d.is_finite());
    }

    #[test]
    fn metric_names() {
        assert_eq!("logdet".parse::<Metric>().unwrap(), Metric::Logdet);
        assert_eq!("l2".parse::<Metric>().unwrap(), Metric::Lp(2.0));
        assert!("hamming".parse::<Metric>().is_err());
    }
}
