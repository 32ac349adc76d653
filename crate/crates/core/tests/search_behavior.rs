//! Behavioral tests of the two search stages and the end-to-end selector,
//! checked against enumeration and against seeded statistical expectations.

mod common;

use common::{gaussian_instance, rel_err};
use sbs_core::dataset::{ModelSubset, PriorConfig, SigmaMode};
use sbs_core::gibbs::{run_gibbs, run_gibbs_from, GibbsConfig};
use sbs_core::marginal::ModelWorkspace;
use sbs_core::oracle::{dense_log_weight, enumerate_posteriors, subset_to_mask};
use sbs_core::screening::{evaluation_pass, run_screening, ScreeningConfig};
use sbs_core::selector::{two_step_select, SelectorSettings};
use sbs_core::simgen::{ScenarioGenerator, ScenarioSpec};
use sbs_core::{derive_seed, make_pool};

fn screen_prior(n: usize, p: usize) -> PriorConfig {
    PriorConfig::with_default_q((p * p) as f64 / n as f64, p, SigmaMode::Jeffreys).unwrap()
}

#[test]
fn screening_retains_orthogonal_truth_in_top_d() {
    // Orthonormal-ish design where the true support dominates the marginal
    // scores: the screened set must contain it.
    let n = 60;
    let p = 16;
    let data = gaussian_instance(n, p, &[(3, 2.0), (8, 2.0), (12, -2.0)], 1.0, 71);
    let prior = screen_prior(n, p);
    let mut cfg = ScreeningConfig::for_problem(n, p);
    cfg.d = 6;
    let out = run_screening(&data, &prior, &cfg, None).unwrap();
    for j in [3, 8, 12] {
        assert!(out.subset.contains(j), "column {j} missing");
    }
    assert_eq!(out.subset.len(), 6);
}

#[test]
fn screening_weights_nondecreasing_across_passes() {
    let n = 40;
    let p = 20;
    let data = gaussian_instance(n, p, &[(0, 1.0), (5, -1.0)], 1.0, 13);
    let prior = screen_prior(n, p);
    let init = ModelSubset::new((10..15).collect(), p).unwrap();
    let mut ws = ModelWorkspace::new(&data, &init, &prior).unwrap();
    let order: Vec<usize> = (0..5).collect();
    let mut last = ws.log_posterior_weight(&prior).unwrap();
    for _ in 0..6 {
        let pass = evaluation_pass(&mut ws, &data, &prior, &order).unwrap();
        let w = ws.log_posterior_weight(&prior).unwrap();
        assert!(w >= last - 1e-8 * last.abs().max(1.0), "{last} -> {w}");
        last = w;
        if !pass.changed {
            break;
        }
    }
}

#[test]
fn screening_identical_for_any_worker_count() {
    let n = 50;
    let p = 40;
    let data = gaussian_instance(n, p, &[(7, 2.0), (20, 1.5)], 1.0, 29);
    let prior = screen_prior(n, p);
    let mut cfg = ScreeningConfig::for_problem(n, p);
    cfg.d = 10;
    let run = |workers: usize| {
        let pool = make_pool(workers).unwrap();
        pool.install(|| run_screening(&data, &prior, &cfg, None).unwrap())
    };
    let reference = run(1);
    for workers in [2, 0] {
        let other = run(workers);
        assert_eq!(reference.subset, other.subset);
        assert_eq!(
            reference.diagnostics.candidate_evals,
            other.diagnostics.candidate_evals
        );
    }
}

#[test]
fn gibbs_matches_restricted_enumeration_on_small_instances() {
    // Screened space of six columns: the best visited model must be the
    // enumerated argmax over the 2^6 submodels in nearly every seeded run.
    let mut hits = 0;
    let runs = 25;
    for seed in 0..runs {
        let mut spec = ScenarioSpec::new(40, 12);
        spec.support_size = 3;
        let truth = ScenarioGenerator::new(spec.clone())
            .unwrap()
            .generate(derive_seed(1000 + seed, &[1]))
            .unwrap();
        let data = &truth.dataset;
        let prior = PriorConfig::with_default_q(1.0, 12, SigmaMode::Jeffreys).unwrap();
        let screen_cfg = ScreeningConfig {
            d: 6,
            g_screen: Some(12.0 * 12.0 / 40.0),
            ..ScreeningConfig::for_problem(40, 12)
        };
        let screen_prior =
            PriorConfig::with_default_q(screen_cfg.effective_g(40, 12), 12, SigmaMode::Jeffreys)
                .unwrap();
        let screened = run_screening(data, &screen_prior, &screen_cfg, None)
            .unwrap()
            .subset;
        let cfg = GibbsConfig {
            sweeps: 1000,
            seed: derive_seed(seed, &[2]),
            ..GibbsConfig::default()
        };
        let out = run_gibbs(data, &screened, &prior, &cfg).unwrap();

        let step_prior = cfg.effective_prior(&prior, screened.len()).unwrap();
        let enumeration = enumerate_posteriors(data, &step_prior, 22).unwrap();
        let (restricted_best, restricted_w) = enumeration.best_within(&screened).unwrap();
        if out.best == restricted_best {
            hits += 1;
        } else {
            // At minimum the visited optimum cannot beat the enumerated one.
            assert!(out.best_weight <= restricted_w + 1e-9);
        }
    }
    assert!(hits >= runs - 1, "only {hits}/{runs} matched enumeration");
}

#[test]
fn gibbs_visit_frequencies_match_normalized_weights() {
    // d = 4: after 10^5 sweeps the per-sweep visit frequencies are within
    // total-variation 0.02 of the normalized weights.
    let data = gaussian_instance(14, 4, &[(1, 1.2)], 1.0, 91);
    let prior = PriorConfig::with_default_q(1.0, 4, SigmaMode::Jeffreys).unwrap();
    let screened = ModelSubset::new(vec![0, 1, 2, 3], 4).unwrap();
    let cfg = GibbsConfig {
        sweeps: 100_000,
        g_select: Some(16.0),
        seed: 17,
        ..GibbsConfig::default()
    };
    let out = run_gibbs(&data, &screened, &prior, &cfg).unwrap();

    let step_prior = cfg.effective_prior(&prior, 4).unwrap();
    let enumeration = enumerate_posteriors(&data, &step_prior, 22).unwrap();
    let mut tv = 0.0;
    let mut seen = 0u64;
    for &(mask, w) in enumeration.table() {
        let p_exact = enumeration.normalized_probability(w);
        let visits = out
            .visits
            .top_models
            .iter()
            .find(|(m, _)| subset_to_mask(m) == mask)
            .map(|(_, c)| *c)
            .unwrap_or(0);
        seen += visits;
        tv += (p_exact - visits as f64 / cfg.sweeps as f64).abs();
    }
    // Only the top ten states are reported; anything missing from them is
    // counted as zero on the empirical side, which can only inflate tv.
    tv += (cfg.sweeps as u64 - seen) as f64 / cfg.sweeps as f64;
    assert!(tv / 2.0 <= 0.02, "total variation {}", tv / 2.0);
}

#[test]
fn gibbs_best_insensitive_to_start_state() {
    let mut agree = 0;
    let runs = 20;
    for seed in 0..runs {
        let data = gaussian_instance(30, 10, &[(2, 2.0), (7, -1.5)], 1.0, 500 + seed);
        let prior = PriorConfig::with_default_q(1.0, 10, SigmaMode::Jeffreys).unwrap();
        let screened = ModelSubset::new(vec![0, 2, 4, 5, 7, 9], 10).unwrap();
        let cfg = GibbsConfig {
            sweeps: 500,
            seed: derive_seed(seed, &[9]),
            ..GibbsConfig::default()
        };
        let from_full = run_gibbs(&data, &screened, &prior, &cfg).unwrap();
        let from_empty =
            run_gibbs_from(&data, &screened, Some(&ModelSubset::empty()), &prior, &cfg).unwrap();
        if from_full.best == from_empty.best {
            agree += 1;
        }
    }
    assert!(agree >= runs - 1, "only {agree}/{runs} agreed");
}

#[test]
fn gibbs_two_state_chain_hits_better_state_quickly() {
    let data = gaussian_instance(20, 2, &[(0, 3.0)], 0.5, 3);
    let prior = PriorConfig::with_default_q(1.0, 2, SigmaMode::Jeffreys).unwrap();
    let screened = ModelSubset::new(vec![0], 2).unwrap();
    for seed in 0..20 {
        let cfg = GibbsConfig {
            sweeps: 10,
            seed,
            ..GibbsConfig::default()
        };
        let out = run_gibbs(&data, &screened, &prior, &cfg).unwrap();
        assert_eq!(out.best.indices(), &[0], "seed {seed}");
    }
}

#[test]
fn workspace_matches_scratch_after_sweeps() {
    let data = gaussian_instance(25, 8, &[(1, 1.5)], 1.0, 47);
    let prior = PriorConfig::with_default_q(1.0, 8, SigmaMode::Jeffreys).unwrap();
    let screened = ModelSubset::new((0..8).collect(), 8).unwrap();
    let cfg = GibbsConfig {
        sweeps: 300,
        seed: 5,
        ..GibbsConfig::default()
    };
    let out = run_gibbs(&data, &screened, &prior, &cfg).unwrap();
    let step_prior = cfg.effective_prior(&prior, 8).unwrap();
    let scratch = dense_log_weight(&data, &out.best, &step_prior).unwrap();
    assert!(rel_err(out.best_weight, scratch) <= 1e-8);
}

#[test]
fn oracle_agrees_with_workspace_on_every_subset() {
    // Every one of the 2^10 subsets: dense oracle weight vs incremental
    // workspace weight.
    let data = gaussian_instance(15, 10, &[(0, 1.0), (9, -1.0)], 1.0, 202);
    let prior = PriorConfig::with_default_q(7.0, 10, SigmaMode::Jeffreys).unwrap();
    let enumeration = enumerate_posteriors(&data, &prior, 22).unwrap();
    assert_eq!(enumeration.table().len(), 1 << 10);
    let mut worst = 0.0f64;
    for &(mask, w_dense) in enumeration.table() {
        let subset = enumeration.subset_of(mask);
        let w_inc = ModelWorkspace::new(&data, &subset, &prior)
            .unwrap()
            .log_posterior_weight(&prior)
            .unwrap();
        worst = worst.max((w_inc - w_dense).abs());
    }
    assert!(worst <= 1e-8, "max abs diff {worst}");
}

#[test]
fn evaluation_pass_accepts_any_slot_order() {
    // A reversed order visits the same slots; the pass still only improves
    // the weight and lands on a model containing the dominant column.
    let n = 40;
    let p = 12;
    let data = gaussian_instance(n, p, &[(7, 4.0)], 0.1, 17);
    let prior = screen_prior(n, p);
    let init = ModelSubset::new(vec![0, 1, 2], p).unwrap();
    let mut ws = ModelWorkspace::new(&data, &init, &prior).unwrap();
    let w0 = ws.log_posterior_weight(&prior).unwrap();
    let out = evaluation_pass(&mut ws, &data, &prior, &[2, 0, 1]).unwrap();
    assert!(out.changed);
    assert!(ws.subset().contains(7));
    let w1 = ws.log_posterior_weight(&prior).unwrap();
    assert!(w1 >= w0);

    // A malformed order is rejected.
    let err = evaluation_pass(&mut ws, &data, &prior, &[0, 1]);
    assert!(err.is_err());
}

#[test]
fn dense_restricted_argmax_matches_table_scan() {
    let data = gaussian_instance(18, 10, &[(3, 2.0)], 1.0, 123);
    let prior = PriorConfig::with_default_q(9.0, 10, SigmaMode::Jeffreys).unwrap();
    let enumeration = enumerate_posteriors(&data, &prior, 22).unwrap();
    let allowed = ModelSubset::new(vec![1, 3, 4, 8], 10).unwrap();
    let (from_table, w_table) = enumeration.best_within(&allowed).unwrap();
    let (from_dense, w_dense) =
        sbs_core::oracle::best_within_dense(&data, &prior, &allowed).unwrap();
    assert_eq!(from_table, from_dense);
    assert!(rel_err(w_table, w_dense) <= 1e-12);
}

#[test]
fn oracle_normalization_sums_to_one() {
    let data = gaussian_instance(12, 8, &[(2, 1.0)], 1.0, 88);
    let prior = PriorConfig::with_default_q(4.0, 8, SigmaMode::Jeffreys).unwrap();
    let enumeration = enumerate_posteriors(&data, &prior, 22).unwrap();
    let total: f64 = enumeration
        .table()
        .iter()
        .map(|&(_, w)| enumeration.normalized_probability(w))
        .sum();
    assert!((total - 1.0).abs() <= 1e-10, "sum {total}");
}

#[test]
fn oracle_identical_for_any_worker_count() {
    let data = gaussian_instance(15, 13, &[(4, 1.5)], 1.0, 61);
    let prior = PriorConfig::with_default_q(4.0, 13, SigmaMode::Jeffreys).unwrap();
    let run = |workers: usize| {
        let pool = make_pool(workers).unwrap();
        pool.install(|| enumerate_posteriors(&data, &prior, 22).unwrap())
    };
    let a = run(1);
    let b = run(2);
    let c = run(0);
    assert_eq!(a.best_mask(), b.best_mask());
    assert_eq!(a.best_mask(), c.best_mask());
    assert_eq!(a.log_normalizer().to_bits(), b.log_normalizer().to_bits());
    assert_eq!(a.log_normalizer().to_bits(), c.log_normalizer().to_bits());
    for (x, y) in a.table().iter().zip(b.table()) {
        assert_eq!(x.0, y.0);
        assert_eq!(x.1.to_bits(), y.1.to_bits());
    }
}

#[test]
fn selector_mostly_empty_on_pure_noise() {
    // beta = 0: under the 1/(p-1) penalty the empty model should win in the
    // majority of replications.
    let mut empty = 0;
    let runs = 12;
    for seed in 0..runs {
        let mut spec = ScenarioSpec::new(100, 200);
        spec.support_size = 0;
        let truth = ScenarioGenerator::new(spec)
            .unwrap()
            .generate(derive_seed(7000 + seed, &[1]))
            .unwrap();
        let settings = SelectorSettings {
            sweeps: 400,
            ..SelectorSettings::default()
        };
        let opts = settings.options(100, 200, derive_seed(seed, &[2]), derive_seed(seed, &[3]));
        let res = two_step_select(&truth.dataset, &opts).unwrap();
        if res.selected.is_empty() {
            empty += 1;
        }
    }
    assert!(empty * 2 > runs, "empty selections: {empty}/{runs}");
}

#[test]
fn selector_keeps_generating_model_when_screening_is_exact() {
    // When d equals the true support size and screening returns exactly the
    // truth, the Gibbs step must keep it.
    for seed in 0..10 {
        let mut spec = ScenarioSpec::new(48, 14);
        spec.support_size = 3;
        let truth = ScenarioGenerator::new(spec)
            .unwrap()
            .generate(derive_seed(9100 + seed, &[4]))
            .unwrap();
        let settings = SelectorSettings {
            d: Some(3),
            sweeps: 400,
            ..SelectorSettings::default()
        };
        let opts = settings.options(48, 14, derive_seed(seed, &[5]), derive_seed(seed, &[6]));
        let res = two_step_select(&truth.dataset, &opts).unwrap();
        if res.screened == truth.true_support {
            assert_eq!(
                res.selected, truth.true_support,
                "seed {seed}: pruned a generating column"
            );
        }
    }
}

#[test]
fn selector_weight_dominates_screened_model() {
    let data = gaussian_instance(36, 12, &[(4, 2.0)], 1.0, 311);
    let settings = SelectorSettings {
        d: Some(5),
        sweeps: 300,
        ..SelectorSettings::default()
    };
    let opts = settings.options(36, 12, 1, 2);
    let res = two_step_select(&data, &opts).unwrap();
    assert!(res.screened.is_superset_of(&res.selected));
    let step_prior = opts
        .gibbs
        .effective_prior(
            &PriorConfig::with_default_q(1.0, 12, SigmaMode::Jeffreys).unwrap(),
            res.screened.len(),
        )
        .unwrap();
    let full_w = ModelWorkspace::new(&data, &res.screened, &step_prior)
        .unwrap()
        .log_posterior_weight(&step_prior)
        .unwrap();
    assert!(res.log_weight >= full_w - 1e-9);
}
