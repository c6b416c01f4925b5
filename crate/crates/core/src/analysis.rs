//! Statistics against a fitted Markov null: subsampling robustness, z-scores
//! for distances, split ranks and the triple i.i.d. statistic, bipartition
//! support, and per-feature influence on the reconstructed tree.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;

use crate::distance::{joint_counts, logdet_distance, DistanceMatrix, Metric};
use crate::error::{Error, Result};
use crate::invariants::{flatten, split_rank_distance};
use crate::markov::{empirical_tensor, simulate, GmmParams};
use crate::matrix::{restrict_complete, subsample_features, CellValue, CharacterMatrix, CompletenessPolicy};
use crate::reconstruct::{reconstruct, Method};
use crate::seed;
use crate::tree::{PhyloTree, Split};

/// Metric, method and completeness policy used to turn characters into a tree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pipeline {
    pub metric: Metric,
    pub method: Method,
    pub policy: CompletenessPolicy,
}

impl Default for Pipeline {
    fn default() -> Self {
        Pipeline {
            metric: Metric::Logdet,
            method: Method::Nj,
            policy: CompletenessPolicy::GlobalComplete,
        }
    }
}

impl Pipeline {
    pub fn run(&self, m: &CharacterMatrix) -> Result<PhyloTree> {
        reconstruct(m, m.taxa(), self.metric, self.method, self.policy)
    }
}

/// Bucket key for a tree: unrooted topology in canonical Newick.
pub fn topology_key(t: &PhyloTree) -> String {
    t.unroot().topology_newick()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobustnessReport {
    pub n_trials: usize,
    /// Trials per canonical topology.
    pub counts: BTreeMap<String, usize>,
    /// Trials whose reconstruction failed.
    pub invalid: usize,
}

impl RobustnessReport {
    pub fn frequency(&self, key: &str) -> f64 {
        self.counts.get(key).copied().unwrap_or(0) as f64 / self.n_trials as f64
    }

    pub fn invalid_frequency(&self) -> f64 {
        self.invalid as f64 / self.n_trials as f64
    }

    /// Most frequent topology; ties go to the smaller key.
    pub fn modal(&self) -> Option<(&str, f64)> {
        self.counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(k, c)| (k.as_str(), *c as f64 / self.n_trials as f64))
    }

    /// (topology, frequency) sorted by decreasing frequency.
    pub fn ranked(&self) -> Vec<(String, f64)> {
        let mut v: Vec<(String, f64)> = self
            .counts
            .iter()
            .map(|(k, &c)| (k.clone(), c as f64 / self.n_trials as f64))
            .collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }
}

/// Reconstruct from `n_trials` random feature subsamples and tally topologies.
pub fn robustness<S: AsRef<str>>(
    m: &CharacterMatrix,
    taxa: &[S],
    fraction: f64,
    n_trials: usize,
    pipeline: Pipeline,
    master_seed: u64,
) -> Result<RobustnessReport> {
    if n_trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let w = match pipeline.policy {
        CompletenessPolicy::GlobalComplete => restrict_complete(m, taxa)?,
        CompletenessPolicy::PairwiseComplete => m.select_taxa(taxa)?,
    };
    // Validate the fraction once so bad input is an error, not n invalid trials.
    subsample_features(&w, fraction, 0)?;
    let keys: Vec<Option<String>> = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let s = seed::derive(master_seed, seed::streams::ROBUSTNESS, trial as u64);
            subsample_features(&w, fraction, s)
                .and_then(|sub| pipeline.run(&sub))
                .ok()
                .map(|t| topology_key(&t))
        })
        .collect();
    let mut counts = BTreeMap::new();
    let mut invalid = 0;
    for k in keys {
        match k {
            Some(k) => *counts.entry(k).or_insert(0) += 1,
            None => invalid += 1,
        }
    }
    Ok(RobustnessReport {
        n_trials,
        counts,
        invalid,
    })
}

/// Simulated datasets drawn from a fitted model, one per trial.
#[derive(Clone, Debug)]
pub struct NullEnsemble {
    pub params: GmmParams,
    pub sites_per_trial: usize,
    pub master_seed: u64,
    pub trials: Vec<CharacterMatrix>,
}

impl NullEnsemble {
    /// `⌊total_sites / sites_per_trial⌋` trials of `sites_per_trial` sites each.
    pub fn generate(params: &GmmParams, sites_per_trial: usize, total_sites: usize, master_seed: u64) -> Result<Self> {
        if sites_per_trial == 0 {
            return Err(Error::invalid("sites per trial must be positive"));
        }
        let n = total_sites / sites_per_trial;
        if n == 0 {
            return Err(Error::invalid("fewer simulated sites than one trial needs"));
        }
        let trials = (0..n)
            .into_par_iter()
            .map(|i| {
                let s = seed::derive(master_seed, seed::streams::NULL_TRIAL, i as u64);
                simulate(params, sites_per_trial, s)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NullEnsemble {
            params: params.clone(),
            sites_per_trial,
            master_seed,
            trials,
        })
    }

    pub fn n_trials(&self) -> usize {
        self.trials.len()
    }
}

/// Observed statistic against its null sample.
#[derive(Clone, Debug, PartialEq)]
pub struct ZScoreReport {
    pub label: String,
    pub observed: f64,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub std: f64,
    /// NaN when degenerate.
    pub z: f64,
    pub n_valid: usize,
    pub n_invalid: usize,
    /// Fewer than two finite null values, or zero spread.
    pub degenerate: bool,
}

/// z-score of `observed` against the finite entries of `null`.
pub fn zscore(label: &str, observed: f64, null: &[f64]) -> Result<ZScoreReport> {
    let finite: Vec<f64> = null.iter().copied().filter(|x| x.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::AllBatchesNonFinite(label.to_string()));
    }
    let n = finite.len() as f64;
    let mean = finite.iter().sum::<f64>() / n;
    let std = if finite.len() > 1 {
        (finite.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let degenerate = finite.len() < 2 || std == 0.0;
    Ok(ZScoreReport {
        label: label.to_string(),
        observed,
        mean,
        std,
        z: if degenerate { f64::NAN } else { (observed - mean) / std },
        n_valid: finite.len(),
        n_invalid: null.len() - finite.len(),
        degenerate,
    })
}

/// z-scores of observed logdet distances against per-trial logdet distances.
/// Labels are `A/B`. Trials where a pair's distance is undefined or infinite
/// are excluded and counted.
pub fn pairwise_zscores(observed: &DistanceMatrix, null: &NullEnsemble) -> Result<Vec<ZScoreReport>> {
    let taxa = observed.taxa();
    let rows: Vec<Vec<usize>> = null
        .trials
        .iter()
        .map(|t| taxa.iter().map(|x| t.taxon_index(x)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let n = taxa.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    pairs
        .par_iter()
        .map(|&(i, j)| {
            let sample: Vec<f64> = null
                .trials
                .iter()
                .zip(&rows)
                .map(|(t, r)| {
                    joint_counts(t, r[i], r[j], CompletenessPolicy::GlobalComplete)
                        .and_then(|jc| logdet_distance(&jc))
                        .unwrap_or(f64::NAN)
                })
                .collect();
            zscore(&format!("{}/{}", taxa[i], taxa[j]), observed.get(i, j), &sample)
        })
        .collect()
}

/// How the adjacent-pair frequencies combine inside [`triple_iid_statistic`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Reduction {
    #[default]
    Mean,
    Sum,
}

impl std::str::FromStr for Reduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Reduction::Mean),
            "sum" => Ok(Reduction::Sum),
            _ => Err(Error::invalid(format!("unknown reduction `{s}`"))),
        }
    }
}

/// `p² / (1/|S| + q)` averaged over random feature orderings, where `p` is the
/// fraction of features Plus in all three taxa and `q` reduces, over adjacent
/// positions, the indicator that both are all-Plus.
pub fn triple_iid_statistic<S: AsRef<str>>(
    m: &CharacterMatrix,
    triple: &[S],
    orderings: usize,
    master_seed: u64,
    reduction: Reduction,
) -> Result<f64> {
    if triple.len() != 3 {
        return Err(Error::invalid("the statistic takes exactly three taxa"));
    }
    if orderings == 0 {
        return Err(Error::invalid("need at least one ordering"));
    }
    let w = restrict_complete(m, triple)?;
    let hits: Vec<bool> = (0..w.n_features())
        .map(|f| (0..3).all(|t| w.get(t, f) == CellValue::Plus))
        .collect();
    let n = hits.len();
    let p = hits.iter().filter(|&&h| h).count() as f64 / n as f64;
    let total: f64 = (0..orderings)
        .map(|o| {
            let mut rng = seed::stream_rng(master_seed, seed::streams::TRIPLE_ORDERING, o as u64);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let adjacent = order.windows(2).filter(|w| hits[w[0]] && hits[w[1]]).count() as f64;
            let q = match reduction {
                Reduction::Mean if n > 1 => adjacent / (n - 1) as f64,
                Reduction::Mean => 0.0,
                Reduction::Sum => adjacent,
            };
            p * p / (1.0 / n as f64 + q)
        })
        .sum();
    Ok(total / orderings as f64)
}

/// Triple statistic on the data against its value on each null trial.
/// Labels are `A:B:C`.
pub fn triple_zscores(
    m: &CharacterMatrix,
    triples: &[[String; 3]],
    null: &NullEnsemble,
    orderings: usize,
    master_seed: u64,
    reduction: Reduction,
) -> Result<Vec<ZScoreReport>> {
    triples
        .iter()
        .map(|tr| {
            let observed = triple_iid_statistic(m, tr, orderings, master_seed, reduction)?;
            let sample = null
                .trials
                .par_iter()
                .map(|t| triple_iid_statistic(t, tr, orderings, master_seed, reduction).unwrap_or(f64::NAN))
                .collect::<Vec<_>>();
            zscore(&tr.join(":"), observed, &sample)
        })
        .collect()
}

/// Distance of the empirical split flattening to rank 2.
pub fn split_score<S: AsRef<str>>(m: &CharacterMatrix, leaves: &[S], split: &Split) -> Result<f64> {
    let t = empirical_tensor(m, leaves)?;
    split_rank_distance(&flatten(&t, split.first())?, 2)
}

/// Rank-2 split distances on the data against each null trial.
pub fn split_zscores(m: &CharacterMatrix, partitions: &[Split], null: &NullEnsemble) -> Result<Vec<ZScoreReport>> {
    let leaves = null.params.leaf_names().to_vec();
    partitions
        .iter()
        .map(|split| {
            if split.n_leaves() != leaves.len() || split.first().len() < 2 && split.second().len() < 2 {
                return Err(Error::invalid(format!("partition {split} is trivial or misses leaves")));
            }
            let observed = split_score(m, &leaves, split)?;
            let sample = null
                .trials
                .par_iter()
                .map(|t| split_score(t, &leaves, split).unwrap_or(f64::NAN))
                .collect::<Vec<_>>();
            zscore(&split.to_string(), observed, &sample)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupportReport {
    /// Fraction of valid trials whose tree contains each target.
    pub support: Vec<(Split, f64)>,
    pub n_valid: usize,
    pub n_invalid: usize,
}

/// Fraction of null-trial reconstructions containing each target split.
pub fn bipartition_support(null: &NullEnsemble, pipeline: Pipeline, targets: &[Split]) -> Result<SupportReport> {
    let trees: Vec<Option<BTreeSet<Split>>> = null
        .trials
        .par_iter()
        .map(|t| pipeline.run(t).ok().map(|tree| tree.splits()))
        .collect();
    let valid: Vec<&BTreeSet<Split>> = trees.iter().flatten().collect();
    let n_valid = valid.len();
    let support = targets
        .iter()
        .map(|s| {
            let hits = valid.iter().filter(|set| set.contains(s)).count();
            let f = if n_valid == 0 {
                f64::NAN
            } else {
                hits as f64 / n_valid as f64
            };
            (s.clone(), f)
        })
        .collect();
    Ok(SupportReport {
        support,
        n_valid,
        n_invalid: trees.len() - n_valid,
    })
}

/// Limits for influence enumeration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InfluenceBudget {
    /// Enumerate exactly when the admissible sets number at most this.
    pub max_exact: u128,
    /// Monte Carlo sample size otherwise.
    pub samples: usize,
    pub seed: u64,
}

impl Default for InfluenceBudget {
    fn default() -> Self {
        InfluenceBudget {
            max_exact: 1_000_000,
            samples: 10_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfluenceResult {
    pub value: f64,
    /// Standard error of a Monte Carlo estimate; `None` when exact.
    pub std_error: Option<f64>,
    pub admissible_sets: u128,
    pub evaluated: usize,
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn combinations(n: usize, max_size: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_size.min(n) {
        let mut next = Vec::new();
        for c in &frontier {
            let start = c.last().map_or(0, |&x| x + 1);
            for x in start..n {
                let mut d = c.clone();
                d.push(x);
                next.push(d);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Influence of one cell on the reconstructed tree: the sum of `1/|S|` over
/// noise sets `S` containing the feature, with at most `k` of the taxon's Plus
/// features and at most `k` of its Minus features, such that flipping the
/// taxon's values on `S` changes the tree's split set. A failed reconstruction
/// counts as a change.
pub fn influence(
    m: &CharacterMatrix,
    taxon: &str,
    feature: &str,
    k: usize,
    pipeline: Pipeline,
    budget: &InfluenceBudget,
) -> Result<InfluenceResult> {
    let ti = m.taxon_index(taxon)?;
    let fi = m.feature_index(feature)?;
    let own = m.get(ti, fi);
    if !own.is_set() {
        return Err(Error::invalid(format!("`{feature}` is unset for `{taxon}`")));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let same: Vec<usize> = (0..m.n_features())
        .filter(|&f| f != fi && m.get(ti, f) == own)
        .collect();
    let other: Vec<usize> = (0..m.n_features()).filter(|&f| m.get(ti, f) == own.flipped()).collect();
    if k > same.len() + 1 && k > other.len() {
        return Err(Error::invalid(format!(
            "k = {k} exceeds both value classes of `{taxon}`"
        )));
    }
    let reference = pipeline.run(m)?.splits();
    let changed = |s: &[usize]| -> bool {
        match pipeline.run(&m.with_flipped(ti, s)) {
            Ok(t) => t.splits() != reference,
            Err(_) => true,
        }
    };

    // |S ∩ same-class| = 1 + a with a ≤ k − 1; |S ∩ other| = b ≤ k.
    let size_pairs: Vec<(usize, usize, u128)> = (0..k)
        .flat_map(|a| (0..=k).map(move |b| (a, b)))
        .map(|(a, b)| (a, b, binomial(same.len(), a) * binomial(other.len(), b)))
        .filter(|&(_, _, w)| w > 0)
        .collect();
    let admissible: u128 = size_pairs.iter().map(|p| p.2).sum();

    if admissible <= budget.max_exact {
        let a_sets = combinations(same.len(), k - 1);
        let b_sets = combinations(other.len(), k);
        let value: f64 = a_sets
            .par_iter()
            .map(|a| {
                b_sets
                    .iter()
                    .map(|b| {
                        let mut s = vec![fi];
                        s.extend(a.iter().map(|&x| same[x]));
                        s.extend(b.iter().map(|&x| other[x]));
                        if changed(&s) {
                            1.0 / s.len() as f64
                        } else {
                            0.0
                        }
                    })
                    .sum::<f64>()
            })
            .sum();
        return Ok(InfluenceResult {
            value,
            std_error: None,
            admissible_sets: admissible,
            evaluated: a_sets.len() * b_sets.len(),
        });
    }

    let draws: Vec<f64> = (0..budget.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::stream_rng(budget.seed, seed::streams::INFLUENCE_MC, i as u64);
            // Size pair in proportion to the number of sets of that shape.
            let mut r = rng.gen_range(0..admissible);
            let &(a, b, _) = size_pairs
                .iter()
                .find(|p| {
                    if r < p.2 {
                        true
                    } else {
                        r -= p.2;
                        false
                    }
                })
                .expect("r below total");
            let mut s = vec![fi];
            s.extend(index::sample(&mut rng, same.len(), a).iter().map(|x| same[x]));
            s.extend(index::sample(&mut rng, other.len(), b).iter().map(|x| other[x]));
            if changed(&s) {
                1.0 / s.len() as f64
            } else {
                0.0
            }
        })
        .collect();
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = if draws.len() > 1 {
        draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let scale = admissible as f64;
    Ok(InfluenceResult {
        value: scale * mean,
        std_error: Some(scale * (var / n).sqrt()),
        admissible_sets: admissible,
        evaluated: draws.len(),
    })
}

/// Influence of every set cell; `None` where the cell is unset.
/// Indexed `[feature][taxon]`.
pub fn influence_table(
    m: &CharacterMatrix,
    k: usize,
    pipeline: Pipeline,
    budget: &InfluenceBudget,
) -> Result<Vec<Vec<Option<InfluenceResult>>>> {
    (0..m.n_features())
        .map(|f| {
            (0..m.n_taxa())
                .map(|t| {
                    if !m.get(t, f).is_set() {
                        return Ok(None);
                    }
                    match influence(m, &m.taxa()[t], &m.features()[f], k, pipeline, budget) {
                        Ok(r) => Ok(Some(r)),
                        Err(Error::Invalid(_)) => Ok(None),
                        Err(e) => Err(e),
                    }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::CellValue::{Minus as M, Plus as P};
    use crate::tree::parse_newick;

    fn model() -> GmmParams {
        let t = parse_newick("(((A,B),C),(D,E));").unwrap();
        let mut thetas = vec![(0.9, 0.85); t.n_nodes()];
        thetas[t.leaf("C").unwrap()] = (0.8, 0.9);
        GmmParams::binary(t, 0.5, &thetas).unwrap()
    }

    #[test]
    fn full_fraction_is_deterministic() {
        let m = simulate(&model(), 400, 1).unwrap();
        let r = robustness(&m, m.taxa(), 1.0, 5, Pipeline::default(), 3).unwrap();
        assert_eq!(r.counts.len(), 1);
        assert_eq!(r.modal().unwrap().1, 1.0);
        assert_eq!(r.invalid, 0);
    }

    #[test]
    fn robustness_counts_add_up() {
        let m = simulate(&model(), 60, 2).unwrap();
        let r = robustness(&m, m.taxa(), 0.3, 40, Pipeline::default(), 5).unwrap();
        assert_eq!(r.counts.values().sum::<usize>() + r.invalid, 40);
        let again = robustness(&m, m.taxa(), 0.3, 40, Pipeline::default(), 5).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn zscore_rules() {
        let z = zscore("x", 3.0, &[1.0, 2.0, 3.0, f64::INFINITY]).unwrap();
        assert_eq!(z.mean, 2.0);
        assert_eq!(z.std, 1.0);
        assert_eq!(z.z, 1.0);
        assert_eq!(z.n_invalid, 1);
        let d = zscore("x", 1.0, &[2.0, 2.0]).unwrap();
        assert!(d.degenerate && d.z.is_nan());
        assert!(matches!(
            zscore("x", 1.0, &[f64::NAN]),
            Err(Error::AllBatchesNonFinite(_))
        ));
    }

    #[test]
    fn triple_edge_cases() {
        let plus = CharacterMatrix::from_rows(&["a", "b", "c"], &vec![vec![P; 8]; 3]).unwrap();
        let v = triple_iid_statistic(&plus, &["a", "b", "c"], 5, 0, Reduction::Mean).unwrap();
        assert!((v - 1.0 / (1.0 / 8.0 + 1.0)).abs() < 1e-15);
        let minus = CharacterMatrix::from_rows(&["a", "b", "c"], &vec![vec![M; 8]; 3]).unwrap();
        assert_eq!(
            triple_iid_statistic(&minus, &["a", "b", "c"], 5, 0, Reduction::Mean).unwrap(),
            0.0
        );
        assert!(triple_iid_statistic(&minus, &["a", "b"], 5, 0, Reduction::Mean).is_err());
    }

    #[test]
    fn support_of_true_split() {
        let null = NullEnsemble::generate(&model(), 2000, 10_000, 4).unwrap();
        assert_eq!(null.n_trials(), 5);
        let ab = Split::parse("A,B|C,D,E").unwrap();
        let r = bipartition_support(&null, Pipeline::default(), &[ab]).unwrap();
        assert_eq!(r.support[0].1, 1.0);
        assert_eq!(r.n_valid, 5);
    }

    #[test]
    fn null_self_consistency() {
        let p = model();
        let null = NullEnsemble::generate(&p, 500, 10_000, 6).unwrap();
        let obs = simulate(&p, 500, 99).unwrap();
        let d = crate::distance::logdet_matrix(&obs, obs.taxa(), CompletenessPolicy::GlobalComplete).unwrap();
        let z = pairwise_zscores(&d, &null).unwrap();
        assert_eq!(z.len(), 10);
        assert!(z.iter().all(|r| r.z.abs() < 4.0), "{z:?}");
        let s = split_zscores(&obs, &[Split::parse("A,B|C,D,E").unwrap()], &null).unwrap();
        assert!(s[0].observed < 0.05);
    }

    #[test]
    fn influence_basics() {
        let m = simulate(&model(), 40, 3).unwrap();
        let f = m.features()[0].clone();
        let one = influence(&m, "A", &f, 1, Pipeline::default(), &InfluenceBudget::default()).unwrap();
        let two = influence(&m, "A", &f, 2, Pipeline::default(), &InfluenceBudget::default()).unwrap();
        assert!(one.std_error.is_none());
        assert!(two.value >= one.value);
        let same = (0..40).filter(|&x| x != 0 && m.get(0, x) == m.get(0, 0)).count();
        let other = 40 - 1 - same;
        assert_eq!(one.admissible_sets, 1 + other as u128);
        assert!(influence(&m, "A", &f, 100, Pipeline::default(), &InfluenceBudget::default()).is_err());
    }

    #[test]
    fn influence_monte_carlo_tracks_exact() {
        let m = simulate(&model(), 30, 8).unwrap();
        let f = m.features()[3].clone();
        let exact = influence(&m, "C", &f, 2, Pipeline::default(), &InfluenceBudget::default()).unwrap();
        let mc = influence(
            &m,
            "C",
            &f,
            2,
            Pipeline::default(),
            &InfluenceBudget {
                max_exact: 0,
                samples: 4000,
                seed: 1,
            },
        )
        .unwrap();
        let se = mc.std_error.unwrap();
        assert!(
            (mc.value - exact.value).abs() <= 4.0 * se + 1e-9,
            "{} vs {} ± {}",
            mc.value,
            exact.value,
            se
        );
    }

    #[test]
    fn combinations_count() {
        assert_eq!(combinations(5, 2).len(), 1 + 5 + 10);
        assert_eq!(combinations(2, 5).len(), 4);
        assert_eq!(binomial(22, 3), 1540);
    }
}
