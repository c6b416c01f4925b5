mod common;

use nalgebra::DMatrix;
use phylomarkov::analysis::{self, influence, robustness, InfluenceBudget, NullEnsemble, Pipeline};
use phylomarkov::distance::DistanceMatrix;
use phylomarkov::distance::{
    joint_counts, logdet_distance, logdet_from_joint, logdet_matrix, modified_jaccard, JointCountMatrix,
};
use phylomarkov::invariants::{flatten, split_rank_distance};
use phylomarkov::markov::{
    empirical_tensor, log_likelihood, ml_fit, pattern_tensor, simulate, FitConfig, GmmParams, DEFAULT_TENSOR_CAP,
};
use phylomarkov::matrix::{
    dedupe_degenerate, restrict_complete, subsample_features, CellValue, CharacterMatrix, CompletenessPolicy,
};
use phylomarkov::reconstruct::{covariance_merge_order, upgma, CovarianceMatrix};
use phylomarkov::seed;
use phylomarkov::tree::{parse_newick, robinson_foulds, RootAt};
use proptest::prelude::*;
use rand::Rng;

fn rng(s: u64) -> rand_chacha::ChaCha8Rng {
    seed::rng(s)
}

fn random_matrix(s: u64, n_taxa: usize, n_features: usize, unset: f64) -> CharacterMatrix {
    let mut r = rng(s);
    let taxa: Vec<String> = (0..n_taxa).map(|i| format!("t{i}")).collect();
    let rows: Vec<Vec<CellValue>> = (0..n_taxa)
        .map(|_| {
            (0..n_features)
                .map(|_| {
                    if r.gen_bool(unset) {
                        CellValue::Unset
                    } else if r.gen_bool(0.5) {
                        CellValue::Plus
                    } else {
                        CellValue::Minus
                    }
                })
                .collect()
        })
        .collect();
    CharacterMatrix::from_rows(&taxa, &rows).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn restrict_complete_is_complete_and_idempotent(s in any::<u64>(), n in 2usize..6, f in 1usize..40) {
        let m = random_matrix(s, n, f, 0.15);
        if let Ok(a) = restrict_complete(&m, m.taxa()) {
            prop_assert!(a.is_complete());
            prop_assert_eq!(restrict_complete(&a, a.taxa()).unwrap(), a);
        }
    }

    #[test]
    fn dedupe_leaves_distinct_rows(s in any::<u64>(), n in 2usize..8, f in 1usize..6) {
        let m = random_matrix(s, n, f, 0.0);
        let (d, groups) = dedupe_degenerate(&m);
        for i in 0..d.n_taxa() {
            for j in i + 1..d.n_taxa() {
                prop_assert_ne!(d.row(i), d.row(j));
            }
        }
        prop_assert_eq!(d.n_taxa() + groups.iter().map(|g| g.len() - 1).sum::<usize>(), n);
    }

    #[test]
    fn subsample_is_seeded_subset(s in any::<u64>(), frac in 0.05f64..=1.0) {
        let m = random_matrix(s, 3, 30, 0.0);
        let a = subsample_features(&m, frac, s ^ 7).unwrap();
        prop_assert_eq!(&a, &subsample_features(&m, frac, s ^ 7).unwrap());
        let mut seen = std::collections::HashSet::new();
        for f in a.features() {
            prop_assert!(m.features().contains(f));
            prop_assert!(seen.insert(f.clone()));
        }
    }

    #[test]
    fn rf_is_a_metric(s in any::<u64>(), n in 4usize..=10) {
        let mut r = rng(s);
        let t: Vec<_> = (0..3).map(|_| common::random_rooted_tree(&mut r, n)).collect();
        let d = |a: usize, b: usize| robinson_foulds(&t[a], &t[b]).unwrap().0;
        prop_assert_eq!(d(0, 1), d(1, 0));
        prop_assert_eq!(d(0, 0), 0);
        prop_assert_eq!(d(0, 1) == 0, t[0].splits() == t[1].splits());
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2));
    }

    #[test]
    fn splits_survive_reroot_and_round_trip(s in any::<u64>(), n in 4usize..=12) {
        let mut r = rng(s);
        let t = common::random_rooted_tree(&mut r, n);
        let splits = t.splits();
        prop_assert_eq!(splits.len(), n - 3);
        prop_assert_eq!(parse_newick(&t.to_newick()).unwrap().splits(), splits.clone());
        let leaf = format!("t{}", r.gen_range(0..n));
        prop_assert_eq!(t.reroot(&RootAt::Leaf(leaf)).unwrap().splits(), splits.clone());
        prop_assert_eq!(t.unroot().splits(), splits);
    }

    #[test]
    fn logdet_symmetric_and_zero_on_self(s in any::<u64>(), f in 4usize..60) {
        let m = random_matrix(s, 2, f, 0.0);
        let j = joint_counts(&m, 0, 1, CompletenessPolicy::GlobalComplete).unwrap();
        match (logdet_distance(&j), logdet_distance(&j.transpose())) {
            (Ok(a), Ok(b)) => prop_assert!(a == b || (a - b).abs() < 1e-12),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
        let own = joint_counts(&m, 0, 0, CompletenessPolicy::GlobalComplete).unwrap();
        if own.row_sums().iter().all(|&x| x > 0) {
            prop_assert_eq!(logdet_distance(&own).unwrap(), 0.0);
        }
    }

    #[test]
    fn product_counts_are_infinitely_far(a in 1u64..50, b in 1u64..50, c in 1u64..50, d in 1u64..50) {
        let j = JointCountMatrix::binary([[a * c, a * d], [b * c, b * d]]);
        prop_assert_eq!(logdet_distance(&j).unwrap(), f64::INFINITY);
    }

    #[test]
    fn jaccard_bounds(s in any::<u64>(), f in 1usize..40) {
        let m = random_matrix(s, 2, f, 0.0);
        if let Ok(x) = modified_jaccard(&m, 0, 1) {
            prop_assert!((0.0..=1.0).contains(&x));
            prop_assert_eq!(x, modified_jaccard(&m, 1, 0).unwrap());
            let disagree = (0..f).any(|k| m.get(0, k) != m.get(1, k));
            prop_assert_eq!(x == 0.0, !disagree);
        }
    }

    #[test]
    fn covariance_greedy_is_complete_linkage(s in any::<u64>(), n in 2usize..9) {
        let mut r = rng(s);
        let taxa: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
        let mut v = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                // Coarse grid so that ties occur.
                let x = r.gen_range(0..6) as f64 / 4.0;
                v[i][j] = x;
                v[j][i] = x;
            }
        }
        let c = CovarianceMatrix::from_rows(taxa.clone(), v.clone()).unwrap();
        prop_assert_eq!(covariance_merge_order(&c), common::complete_linkage_order(&taxa, &v));
    }

    #[test]
    fn upgma_is_ultrametric(s in any::<u64>(), n in 2usize..10) {
        let mut r = rng(s);
        let taxa: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
        let d = DistanceMatrix::from_fn(taxa, |i, j| if i == j { 0.0 } else { r.gen_range(0.1..3.0) }).unwrap();
        let t = upgma(&d).unwrap();
        let depth = |mut v: usize| {
            let mut h = 0.0;
            while let Some(p) = t.node(v).parent {
                h += t.node(v).length.unwrap();
                v = p;
            }
            h
        };
        let heights: Vec<f64> = t.leaves().into_iter().map(depth).collect();
        for h in &heights {
            prop_assert!((h - heights[0]).abs() <= 1e-10);
        }
    }

    #[test]
    fn tensor_sums_to_one(s in any::<u64>(), n in 1usize..=8) {
        let mut r = rng(s);
        let t = common::random_rooted_tree(&mut r, n);
        let p = GmmParams::random_binary(t, &mut r, 0.0..1.0, 0.0..1.0);
        prop_assert!((pattern_tensor(&p, DEFAULT_TENSOR_CAP).unwrap().sum() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn pruning_matches_brute_force(s in any::<u64>(), n in 1usize..=6) {
        let mut r = rng(s);
        let t = common::random_rooted_tree(&mut r, n);
        let p = GmmParams::random_binary(t, &mut r, 0.0..1.0, 0.0..1.0);
        let x = pattern_tensor(&p, DEFAULT_TENSOR_CAP).unwrap();
        for i in 0..x.probs().len() {
            prop_assert!((x.probs()[i] - common::brute_force_probability(&p, &x.pattern_of(i))).abs() <= 1e-12);
        }
    }

    #[test]
    fn flattening_preserves_norm(s in any::<u64>(), n in 2usize..=6, mask in 1u32..32) {
        let mut r = rng(s);
        let t = common::random_rooted_tree(&mut r, n);
        let p = GmmParams::random_binary(t, &mut r, 0.1..0.9, 0.1..0.9);
        let x = pattern_tensor(&p, DEFAULT_TENSOR_CAP).unwrap();
        let side: Vec<String> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| format!("t{i}")).collect();
        prop_assume!(!side.is_empty() && side.len() < n);
        let f = flatten(&x, &side).unwrap();
        let tensor_norm = x.probs().iter().map(|p| p * p).sum::<f64>().sqrt();
        prop_assert!((f.matrix.norm() - tensor_norm).abs() <= 1e-14);
        let d: Vec<f64> = (1..=4).map(|k| split_rank_distance(&f, k).unwrap()).collect();
        for w in d.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
    }
}

#[test]
fn logdet_is_additive_on_exact_model_data() {
    for s in 0..20 {
        let mut r = rng(s);
        let t = parse_newick("((A,B),(C,D));").unwrap();
        let thetas: Vec<(f64, f64)> = (0..t.n_nodes())
            .map(|_| (r.gen_range(0.6..0.95), r.gen_range(0.6..0.95)))
            .collect();
        let p = GmmParams::binary(t, 0.5, &thetas).unwrap();
        let x = pattern_tensor(&p, DEFAULT_TENSOR_CAP).unwrap();
        let names = ["A", "B", "C", "D"];
        let d = |a: usize, b: usize| {
            let mut j = DMatrix::zeros(2, 2);
            for i in 0..16 {
                let z = x.pattern_of(i);
                j[(z[a], z[b])] += x.probs()[i];
            }
            logdet_from_joint(&j).unwrap()
        };
        assert_eq!(x.leaves(), names);
        let (ab_cd, ac_bd, ad_bc) = (d(0, 1) + d(2, 3), d(0, 2) + d(1, 3), d(0, 3) + d(1, 2));
        assert!((ac_bd - ad_bc).abs() <= 1e-10, "{ac_bd} {ad_bc}");
        assert!(ab_cd < ac_bd);
    }
}

#[test]
fn empirical_tensor_converges() {
    let t = parse_newick("(((A,B),C),(D,E));").unwrap();
    let mut r = rng(11);
    let p = GmmParams::random_binary(t, &mut r, 0.3..0.7, 0.7..0.95);
    let exact = pattern_tensor(&p, DEFAULT_TENSOR_CAP).unwrap();
    for s in [1, 2, 3] {
        let m = simulate(&p, 100_000, s).unwrap();
        let emp = empirical_tensor(&m, p.leaf_names()).unwrap();
        let tv = emp.total_variation(&exact).unwrap();
        assert!(tv < 3.0 / (100_000f64).sqrt(), "tv {tv}");
    }
}

#[test]
fn fit_never_loses_to_its_starts() {
    let t = parse_newick("((A,B),(C,D));").unwrap();
    let mut r = rng(5);
    let p = GmmParams::random_binary(t.clone(), &mut r, 0.3..0.7, 0.75..0.95);
    let m = simulate(&p, 300, 9).unwrap();
    let cfg = FitConfig {
        restarts: 4,
        iterations: 800,
        ..FitConfig::default()
    };
    let fit = ml_fit(&t, &m, &cfg).unwrap();
    for run in &fit.restarts {
        assert!(fit.log_likelihood >= run.initial_log_likelihood);
        assert!(run.final_log_likelihood >= run.initial_log_likelihood);
    }
    assert!((log_likelihood(&fit.params, &m).unwrap() - fit.log_likelihood).abs() < 1e-9);
}

fn five_leaf_model() -> GmmParams {
    let t = parse_newick("(((A,B),C),(D,E));").unwrap();
    let mut r = rng(21);
    GmmParams::random_binary(t, &mut r, 0.4..0.6, 0.8..0.95)
}

#[test]
fn robustness_frequencies_sum_to_one() {
    let m = simulate(&five_leaf_model(), 40, 1).unwrap();
    let rep = robustness(&m, m.taxa(), 0.5, 200, Pipeline::default(), 2).unwrap();
    let named: usize = rep.counts.values().sum();
    assert_eq!(named + rep.invalid, rep.n_trials);
    let total: f64 = rep.counts.keys().map(|k| rep.frequency(k)).sum::<f64>() + rep.invalid_frequency();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn null_data_scores_near_zero() {
    // Averaged over 20 observed resamples and all pairs.
    let p = five_leaf_model();
    let null = NullEnsemble::generate(&p, 200, 10_000, 3).unwrap();
    let mut means = Vec::new();
    for s in 0..20 {
        let obs = simulate(&p, 200, 1000 + s).unwrap();
        let d = logdet_matrix(&obs, obs.taxa(), CompletenessPolicy::GlobalComplete).unwrap();
        let z = analysis::pairwise_zscores(&d, &null).unwrap();
        means.push(z.iter().map(|r| r.z).sum::<f64>() / z.len() as f64);
    }
    let grand = means.iter().sum::<f64>() / means.len() as f64;
    assert!(grand > -1.0 && grand < 1.0, "{grand}");
}

#[test]
fn influence_grows_with_k() {
    let m = simulate(&five_leaf_model(), 14, 4).unwrap();
    for f in m.features().iter().take(4) {
        let mut last = 0.0;
        for k in 1..=3 {
            let r = influence(&m, "C", f, k, Pipeline::default(), &InfluenceBudget::default()).unwrap();
            assert!(r.std_error.is_none());
            assert!(r.value >= last);
            last = r.value;
        }
    }
}

#[test]
fn seeded_operations_repeat_exactly() {
    let p = five_leaf_model();
    let m = simulate(&p, 50, 8).unwrap();
    assert_eq!(m, simulate(&p, 50, 8).unwrap());
    let a = NullEnsemble::generate(&p, 50, 500, 1).unwrap();
    let b = NullEnsemble::generate(&p, 50, 500, 1).unwrap();
    assert_eq!(a.trials, b.trials);
    let t1 = analysis::triple_iid_statistic(&m, &["A", "B", "C"], 30, 4, Default::default()).unwrap();
    let t2 = analysis::triple_iid_statistic(&m, &["A", "B", "C"], 30, 4, Default::default()).unwrap();
    assert_eq!(t1.to_bits(), t2.to_bits());
    let budget = InfluenceBudget {
        max_exact: 0,
        samples: 300,
        seed: 6,
    };
    let i1 = influence(&m, "A", &m.features()[0], 2, Pipeline::default(), &budget).unwrap();
    let i2 = influence(&m, "A", &m.features()[0], 2, Pipeline::default(), &budget).unwrap();
    assert_eq!(i1, i2);
    let cfg = FitConfig {
        restarts: 3,
        iterations: 200,
        ..FitConfig::default()
    };
    let f1 = ml_fit(p.tree(), &m, &cfg).unwrap();
    let f2 = ml_fit(p.tree(), &m, &cfg).unwrap();
    assert_eq!(f1, f2);
}

#[test]
fn parallel_results_match_serial() {
    let m = simulate(&five_leaf_model(), 40, 12).unwrap();
    let run = || robustness(&m, m.taxa(), 0.6, 64, Pipeline::default(), 9).unwrap();
    let parallel = run();
    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(run);
    assert_eq!(parallel, serial);
}
