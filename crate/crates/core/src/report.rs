//! CSV layouts for analysis results. Reals use six decimals; non-finite values
//! print as `nan`, `inf` or `-inf`.

use std::fmt::Write;

use crate::analysis::{InfluenceResult, RobustnessReport, SupportReport, ZScoreReport};
use crate::matrix::CharacterMatrix;

pub fn real(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.6}")
    }
}

fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Pairwise z-scores, one row per pair: `l1,l2,mean,std,z,d,valid,invalid`.
/// `d` is the observed distance.
pub fn pair_zscores_csv(rows: &[ZScoreReport]) -> String {
    let mut out = String::from("l1,l2,mean,std,z,d,valid,invalid\n");
    for r in rows {
        let (a, b) = r.label.split_once('/').unwrap_or((&r.label, ""));
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            field(a),
            field(b),
            real(r.mean),
            real(r.std),
            real(r.z),
            real(r.observed),
            r.n_valid,
            r.n_invalid
        );
    }
    out
}

/// Split or triple z-scores: `label,mean,std,z,observed,valid,invalid`.
pub fn labelled_zscores_csv(rows: &[ZScoreReport]) -> String {
    let mut out = String::from("label,mean,std,z,observed,valid,invalid\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            field(&r.label),
            real(r.mean),
            real(r.std),
            real(r.z),
            real(r.observed),
            r.n_valid,
            r.n_invalid
        );
    }
    out
}

/// Influence table with one column per taxon; unset cells are blank.
pub fn influence_csv(m: &CharacterMatrix, table: &[Vec<Option<InfluenceResult>>]) -> String {
    let mut out = String::from("feature");
    for t in m.taxa() {
        out.push(',');
        out.push_str(&field(t));
    }
    out.push('\n');
    for (f, row) in m.features().iter().zip(table) {
        out.push_str(&field(f));
        for cell in row {
            out.push(',');
            if let Some(r) = cell {
                out.push_str(&real(r.value));
            }
        }
        out.push('\n');
    }
    out
}

/// `topology,count,frequency`, most frequent first, then the invalid bucket.
pub fn robustness_csv(r: &RobustnessReport) -> String {
    let mut out = String::from("topology,count,frequency\n");
    for (k, f) in r.ranked() {
        let _ = writeln!(out, "{},{},{}", field(&k), r.counts[&k], real(f));
    }
    let _ = writeln!(out, "invalid,{},{}", r.invalid, real(r.invalid_frequency()));
    out
}

/// `split,support,valid,invalid`.
pub fn support_csv(r: &SupportReport) -> String {
    let mut out = String::from("split,support,valid,invalid\n");
    for (s, f) in &r.support {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            field(&s.to_string()),
            real(*f),
            r.n_valid,
            r.n_invalid
        );
    }
    out
}

/// One Robinson–Foulds row: `rf,rf_normalized`.
pub fn rf_row(rf: usize, normalized: f64) -> String {
    format!("{rf},{}", real(normalized))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals() {
        assert_eq!(real(0.5), "0.500000");
        assert_eq!(real(f64::INFINITY), "inf");
        assert_eq!(real(f64::NAN), "nan");
        assert_eq!(rf_row(2, 0.5), "2,0.500000");
    }

    #[test]
    fn pair_rows() {
        let r = crate::analysis::zscore("Latin/French", 0.7, &[0.4, 0.6]).unwrap();
        let csv = pair_zscores_csv(&[r]);
        assert_eq!(
            csv.lines().nth(1).unwrap(),
            "Latin,French,0.500000,0.141421,1.414214,0.700000,2,0"
        );
    }

    #[test]
    fn quoting() {
        assert_eq!(field("A,B|C,D"), "\"A,B|C,D\"");
    }
}
