//! Binary character matrices: ingestion, validation and preprocessing.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::seed;

/// One cell of a character matrix.
///
/// `Unset` covers both unrecorded values and values zeroed because the
/// feature is entailed by another one; every analysis excludes it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellValue {
    Plus,
    Minus,
    Unset,
}

impl CellValue {
    /// Parse one file token.
    pub fn from_token(token: &str) -> Option<CellValue> {
        match token.trim() {
            "1" | "+" => Some(CellValue::Plus),
            "-1" | "-" => Some(CellValue::Minus),
            "0" | "?" | "" => Some(CellValue::Unset),
            _ => None,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            CellValue::Plus => "1",
            CellValue::Minus => "-1",
            CellValue::Unset => "0",
        }
    }

    /// Binary state index: Minus is state 0, Plus is state 1.
    pub fn state(self) -> Option<usize> {
        match self {
            CellValue::Minus => Some(0),
            CellValue::Plus => Some(1),
            CellValue::Unset => None,
        }
    }

    pub fn from_state(state: usize) -> CellValue {
        if state == 0 {
            CellValue::Minus
        } else {
            CellValue::Plus
        }
    }

    /// The ±1 coding used by covariance and ℓp computations.
    pub fn sign(self) -> Option<f64> {
        match self {
            CellValue::Plus => Some(1.0),
            CellValue::Minus => Some(-1.0),
            CellValue::Unset => None,
        }
    }

    pub fn is_set(self) -> bool {
        self != CellValue::Unset
    }

    /// Plus <-> Minus; Unset stays Unset.
    pub fn flipped(self) -> CellValue {
        match self {
            CellValue::Plus => CellValue::Minus,
            CellValue::Minus => CellValue::Plus,
            CellValue::Unset => CellValue::Unset,
        }
    }
}

/// How features with unset cells are excluded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CompletenessPolicy {
    /// Keep only features set in every taxon of the working set.
    #[default]
    GlobalComplete,
    /// For each pair of taxa, use the features set in both.
    PairwiseComplete,
}

impl std::str::FromStr for CompletenessPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(CompletenessPolicy::GlobalComplete),
            "pairwise" => Ok(CompletenessPolicy::PairwiseComplete),
            _ => Err(Error::invalid(format!("unknown completeness policy `{s}`"))),
        }
    }
}

/// Taxa × features grid of three-valued cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharacterMatrix {
    taxa: Vec<String>,
    features: Vec<String>,
    cells: Vec<CellValue>,
}

fn check_unique(names: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for name in names {
        if name.is_empty() {
            return Err(Error::invalid(format!("empty {what} name")));
        }
        if !seen.insert(name.as_str()) {
            return Err(Error::invalid(format!("duplicate {what} name `{name}`")));
        }
    }
    Ok(())
}

impl CharacterMatrix {
    /// Build a matrix from row-major cells.
    pub fn new(taxa: Vec<String>, features: Vec<String>, cells: Vec<CellValue>) -> Result<Self> {
        check_unique(&taxa, "taxon")?;
        check_unique(&features, "feature")?;
        if cells.len() != taxa.len() * features.len() {
            return Err(Error::invalid(format!(
                "grid has {} cells, expected {} taxa x {} features",
                cells.len(),
                taxa.len(),
                features.len()
            )));
        }
        Ok(CharacterMatrix { taxa, features, cells })
    }

    /// Build a matrix from per-taxon rows; features are named `f1, f2, ...`.
    pub fn from_rows<S: AsRef<str>>(taxa: &[S], rows: &[Vec<CellValue>]) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::invalid("ragged rows"));
        }
        if rows.len() != taxa.len() {
            return Err(Error::invalid("row count does not match taxon count"));
        }
        let features = (1..=width).map(|i| format!("f{i}")).collect();
        let taxa = taxa.iter().map(|t| t.as_ref().to_string()).collect();
        Self::new(taxa, features, rows.concat())
    }

    /// Parse matrix text. Tab-separated when `tsv` is set, comma-separated otherwise.
    pub fn parse_str(text: &str, tsv: bool, source_name: &str) -> Result<Self> {
        let err = |row: usize, column: usize, message: String| Error::MatrixParse {
            source_name: source_name.to_string(),
            row,
            column,
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(if tsv { b'\t' } else { b',' })
            .has_headers(false)
            .flexible(true)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());

        let mut records = reader.records();
        let header = match records.next() {
            Some(r) => r.map_err(|e| err(1, 0, e.to_string()))?,
            None => return Err(err(1, 0, "empty file".into())),
        };
        if header.len() < 2 || header[0].trim() != "taxon" {
            return Err(err(1, 1, "header must be `taxon,<feature1>,...`".into()));
        }
        let features: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
        let mut seen = HashSet::new();
        for (c, f) in features.iter().enumerate() {
            if f.is_empty() {
                return Err(err(1, c + 2, "empty feature name".into()));
            }
            if !seen.insert(f.as_str()) {
                return Err(err(1, c + 2, format!("duplicate feature name `{f}`")));
            }
        }

        let mut taxa = Vec::new();
        let mut cells = Vec::new();
        let mut seen_taxa = HashSet::new();
        for (r, record) in records.enumerate() {
            let row = r + 2;
            let record = record.map_err(|e| err(row, 0, e.to_string()))?;
            if record.len() == 1 && record[0].trim().is_empty() {
                continue;
            }
            if record.len() != features.len() + 1 {
                return Err(err(
                    row,
                    record.len(),
                    format!("expected {} fields, found {}", features.len() + 1, record.len()),
                ));
            }
            let name = record[0].trim().to_string();
            if name.is_empty() {
                return Err(err(row, 1, "empty taxon name".into()));
            }
            if !seen_taxa.insert(name.clone()) {
                return Err(err(row, 1, format!("duplicate taxon name `{name}`")));
            }
            for (c, token) in record.iter().skip(1).enumerate() {
                let cell =
                    CellValue::from_token(token).ok_or_else(|| err(row, c + 2, format!("unknown token `{token}`")))?;
                cells.push(cell);
            }
            taxa.push(name);
        }
        CharacterMatrix::new(taxa, features, cells)
    }

    /// Serialize in the matrix file format.
    pub fn to_csv_string(&self, tsv: bool) -> String {
        let sep = if tsv { "\t" } else { "," };
        let quote = |s: &str| {
            if s.contains(sep) || s.contains('"') {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.to_string()
            }
        };
        let mut out = String::from("taxon");
        for f in &self.features {
            out.push_str(sep);
            out.push_str(&quote(f));
        }
        out.push('\n');
        for (t, name) in self.taxa.iter().enumerate() {
            out.push_str(&quote(name));
            for cell in self.row(t) {
                out.push_str(sep);
                out.push_str(cell.token());
            }
            out.push('\n');
        }
        out
    }

    pub fn n_taxa(&self) -> usize {
        self.taxa.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn taxa(&self) -> &[String] {
        &self.taxa
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn get(&self, taxon: usize, feature: usize) -> CellValue {
        self.cells[taxon * self.features.len() + feature]
    }

    pub fn row(&self, taxon: usize) -> &[CellValue] {
        let w = self.features.len();
        &self.cells[taxon * w..(taxon + 1) * w]
    }

    pub fn taxon_index(&self, name: &str) -> Result<usize> {
        self.taxa
            .iter()
            .position(|t| t == name)
            .ok_or_else(|| Error::UnknownTaxon(name.to_string()))
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.features
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    /// True when no cell is Unset.
    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(|c| c.is_set())
    }

    /// Submatrix over the given taxa (in the given order), all features kept.
    pub fn select_taxa<S: AsRef<str>>(&self, taxa: &[S]) -> Result<Self> {
        let idx = taxa
            .iter()
            .map(|t| self.taxon_index(t.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let mut cells = Vec::with_capacity(idx.len() * self.n_features());
        for &i in &idx {
            cells.extend_from_slice(self.row(i));
        }
        CharacterMatrix::new(
            idx.iter().map(|&i| self.taxa[i].clone()).collect(),
            self.features.clone(),
            cells,
        )
    }

    /// Submatrix over the given feature indices, in the given order.
    pub fn select_features(&self, features: &[usize]) -> Self {
        let mut cells = Vec::with_capacity(self.n_taxa() * features.len());
        for t in 0..self.n_taxa() {
            let row = self.row(t);
            cells.extend(features.iter().map(|&f| row[f]));
        }
        CharacterMatrix {
            taxa: self.taxa.clone(),
            features: features.iter().map(|&f| self.features[f].clone()).collect(),
            cells,
        }
    }

    /// Indices of features with no Unset cell.
    pub fn complete_feature_indices(&self) -> Vec<usize> {
        (0..self.n_features())
            .filter(|&f| (0..self.n_taxa()).all(|t| self.get(t, f).is_set()))
            .collect()
    }

    /// Copy with the taxon's cells at `features` flipped.
    pub fn with_flipped(&self, taxon: usize, features: &[usize]) -> Self {
        let mut out = self.clone();
        let w = self.n_features();
        for &f in features {
            let cell = &mut out.cells[taxon * w + f];
            *cell = cell.flipped();
        }
        out
    }
}

impl fmt::Display for CharacterMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_csv_string(false))
    }
}

/// Load a matrix file; `.tsv` and `.tab` extensions select the tab-separated variant.
pub fn load_matrix(path: impl AsRef<Path>) -> Result<CharacterMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let tsv = matches!(path.extension().and_then(|e| e.to_str()), Some("tsv") | Some("tab"));
    CharacterMatrix::parse_str(&text, tsv, &path.display().to_string())
}

/// Restrict to `taxa`, keeping only features with no Unset cell among them.
pub fn restrict_complete<S: AsRef<str>>(m: &CharacterMatrix, taxa: &[S]) -> Result<CharacterMatrix> {
    if taxa.len() < 2 {
        return Err(Error::invalid("need at least two taxa"));
    }
    let sub = m.select_taxa(taxa)?;
    let keep = sub.complete_feature_indices();
    if keep.is_empty() {
        return Err(Error::NoCompleteFeatures);
    }
    Ok(sub.select_features(&keep))
}

/// Collapse taxa with identical rows onto the first one in input order.
///
/// Returns the collapsed matrix and every group of two or more taxa, each
/// group listed representative first.
pub fn dedupe_degenerate(m: &CharacterMatrix) -> (CharacterMatrix, Vec<Vec<String>>) {
    let mut first_of: HashMap<&[CellValue], usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of_rep: HashMap<usize, usize> = HashMap::new();
    for t in 0..m.n_taxa() {
        match first_of.get(m.row(t)) {
            Some(&rep) => {
                let g = *group_of_rep.entry(rep).or_insert_with(|| {
                    groups.push(vec![rep]);
                    groups.len() - 1
                });
                groups[g].push(t);
            }
            None => {
                first_of.insert(m.row(t), t);
            }
        }
    }
    let mut reps: Vec<usize> = first_of.into_values().collect();
    reps.sort_unstable();
    let names: Vec<&str> = reps.iter().map(|&i| m.taxa[i].as_str()).collect();
    let collapsed = m.select_taxa(&names).expect("representatives are taxa of the matrix");
    let groups = groups
        .into_iter()
        .map(|g| g.into_iter().map(|i| m.taxa[i].clone()).collect())
        .collect();
    (collapsed, groups)
}

/// Number of features kept by [`subsample_features`].
pub fn subsample_size(n_features: usize, fraction: f64) -> usize {
    // 0.6 * 85 evaluates to 51.000000000000007; don't let rounding noise bump the ceiling.
    let raw = fraction * n_features as f64;
    let k = (raw - 1e-9).ceil().max(1.0) as usize;
    k.min(n_features)
}

/// Uniform sample of ⌈fraction·|features|⌉ features without replacement.
/// Feature order is preserved.
pub fn subsample_features(m: &CharacterMatrix, fraction: f64, seed: u64) -> Result<CharacterMatrix> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("fraction {fraction} not in (0, 1]")));
    }
    if m.n_features() == 0 {
        return Err(Error::invalid("matrix has no features"));
    }
    let k = subsample_size(m.n_features(), fraction);
    let mut rng = seed::stream_rng(seed, seed::streams::SUBSAMPLE, 0);
    let mut picked = index::sample(&mut rng, m.n_features(), k).into_vec();
    picked.sort_unstable();
    Ok(m.select_features(&picked))
}

#[cfg(test)]
mod tests {
    use super::*;
    use CellValue::{Minus as M, Plus as P, Unset as U};

    fn toy() -> CharacterMatrix {
        CharacterMatrix::from_rows(
            &["A", "B", "C"],
            &[vec![P, M, P, U], vec![P, P, M, P], vec![M, M, P, P]],
        )
        .unwrap()
    }

    #[test]
    fn token_mapping() {
        let m = CharacterMatrix::parse_str("taxon,x,y\nA,1,-1\nB,0,1\n", false, "t").unwrap();
        assert_eq!(m.row(0), &[P, M]);
        assert_eq!(m.row(1), &[U, P]);
        let m = CharacterMatrix::parse_str("taxon\tx\ty\tz\nA\t+\t-\t?\nB\t\t1\t-1\n", true, "t").unwrap();
        assert_eq!(m.row(0), &[P, M, U]);
        assert_eq!(m.row(1), &[U, P, M]);
    }

    #[test]
    fn parse_errors_name_location() {
        let e = CharacterMatrix::parse_str("taxon,x\nA,1\nA,-1\n", false, "t").unwrap_err();
        assert!(e.to_string().contains("duplicate taxon"), "{e}");
        let e = CharacterMatrix::parse_str("taxon,x,y\nA,1\n", false, "t").unwrap_err();
        assert!(matches!(e, Error::MatrixParse { row: 2, .. }), "{e}");
        let e = CharacterMatrix::parse_str("taxon,x,y\nA,1,2\n", false, "t").unwrap_err();
        assert!(matches!(e, Error::MatrixParse { row: 2, column: 3, .. }), "{e}");
        let e = CharacterMatrix::parse_str("name,x\nA,1\n", false, "t").unwrap_err();
        assert!(matches!(e, Error::MatrixParse { row: 1, .. }), "{e}");
        let e = CharacterMatrix::parse_str("taxon,x,x\nA,1,1\n", false, "t").unwrap_err();
        assert!(e.to_string().contains("duplicate feature"), "{e}");
    }

    #[test]
    fn csv_round_trip() {
        let m = toy();
        let back = CharacterMatrix::parse_str(&m.to_csv_string(false), false, "t").unwrap();
        assert_eq!(m, back);
        let back = CharacterMatrix::parse_str(&m.to_csv_string(true), true, "t").unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn restrict_drops_unset_features() {
        let m = toy();
        let r = restrict_complete(&m, &["A", "B", "C"]).unwrap();
        assert_eq!(r.features(), &["f1", "f2", "f3"]);
        assert!(r.is_complete());
        // Over B and C every feature is set.
        let r = restrict_complete(&m, &["B", "C"]).unwrap();
        assert_eq!(r.n_features(), 4);
        assert_eq!(restrict_complete(&r, &["B", "C"]).unwrap(), r);
    }

    #[test]
    fn restrict_errors() {
        let m = CharacterMatrix::from_rows(&["A", "B"], &[vec![U, P], vec![P, U]]).unwrap();
        assert!(matches!(
            restrict_complete(&m, &["A", "B"]),
            Err(Error::NoCompleteFeatures)
        ));
        assert!(restrict_complete(&m, &["A"]).is_err());
        assert!(matches!(
            restrict_complete(&m, &["A", "Z"]),
            Err(Error::UnknownTaxon(_))
        ));
    }

    #[test]
    fn dedupe_groups() {
        let m = CharacterMatrix::from_rows(
            &["Welsh", "Greek", "Irish", "Breton"],
            &[vec![P, M], vec![M, M], vec![P, M], vec![P, M]],
        )
        .unwrap();
        let (c, groups) = dedupe_degenerate(&m);
        assert_eq!(c.taxa(), &["Welsh", "Greek"]);
        assert_eq!(groups, vec![vec!["Welsh", "Irish", "Breton"]]);

        let (c, groups) = dedupe_degenerate(&toy());
        assert_eq!(c, toy());
        assert!(groups.is_empty());
    }

    #[test]
    fn subsample_counts_and_determinism() {
        let rows: Vec<Vec<CellValue>> = (0..3)
            .map(|t| (0..85).map(|f| if (f + t) % 3 == 0 { P } else { M }).collect())
            .collect();
        let m = CharacterMatrix::from_rows(&["A", "B", "C"], &rows).unwrap();
        assert_eq!(subsample_size(85, 0.6), 51);
        let s1 = subsample_features(&m, 0.6, 11).unwrap();
        let s2 = subsample_features(&m, 0.6, 11).unwrap();
        assert_eq!(s1.n_features(), 51);
        assert_eq!(s1, s2);
        assert_eq!(subsample_features(&m, 1.0, 3).unwrap(), m);
        assert!(subsample_features(&m, 0.0, 3).is_err());
    }
}
