mod common;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use revmatch::bpmf::BpmfConfig;
use revmatch::corpus::{generate_synthetic, SyntheticConfig, SyntheticCorpus};
use revmatch::evaluator::{
    assemble_for_matching, baseline_estimates, evaluate_match, run_elicitation_curve,
    run_lambda_sweep, score_histogram, CurveConfig, Estimates, ImputationPolicy, MatcherConfig,
    Method, PredictorConfig,
};
use revmatch::matcher::{solve_basic, Assignment};
use revmatch::{Key, MatchProblem};

fn corpus(seed: u64) -> SyntheticCorpus {
    let mut cfg = SyntheticConfig::new(10, 60, 5, 40, seed);
    cfg.vocab_size = 300;
    generate_synthetic(&cfg).unwrap()
}

fn small_matcher() -> MatcherConfig {
    MatcherConfig {
        p_min: 3,
        p_max: 9,
        ..MatcherConfig::default()
    }
}

fn quick_predictors() -> PredictorConfig {
    PredictorConfig {
        bpmf: BpmfConfig {
            rank: 5,
            n_samples: 60,
            n_burnin: 10,
            ..BpmfConfig::default()
        },
        ..PredictorConfig::default()
    }
}

#[test]
fn exact_estimates_reproduce_matcher_objective() {
    let syn = corpus(1);
    let truth = &syn.truth;
    let policy = ImputationPolicy::default();
    let mut rng = common::rng(4);
    for _ in 0..5 {
        let all: Vec<Key> = truth.keys().collect();
        let train_keys: BTreeSet<Key> = all.iter().copied().filter(|_| rng.random_bool(0.3)).collect();
        let test_keys: BTreeSet<Key> = all.iter().copied().filter(|k| !train_keys.contains(k)).collect();
        let train = truth.restrict(&train_keys);
        let test = truth.restrict(&test_keys);
        let estimates: Estimates = test.observations().map(|o| (o.key(), o.score)).collect();
        let s = assemble_for_matching(&train, &estimates, policy).unwrap();
        let problem = MatchProblem::new(s, 1, 3, 9).with_coi(syn.corpus.coi.clone());
        let a = solve_basic(&problem).unwrap();
        assert_eq!(evaluate_match(&a, &train, &test, policy), a.objective_value);
    }
}

fn random_feasible(rng: &mut rand_chacha::ChaCha8Rng, n: usize, m: usize, p_max: usize, coi: &BTreeSet<Key>) -> Option<Assignment> {
    let mut loads = vec![0; n];
    let mut pairs = BTreeSet::new();
    for p in 0..m {
        let mut rs: Vec<usize> = (0..n).filter(|&r| loads[r] < p_max && !coi.contains(&(r, p))).collect();
        rs.shuffle(rng);
        let r = *rs.first()?;
        loads[r] += 1;
        pairs.insert((r, p));
    }
    Some(Assignment {
        pairs,
        objective_value: 0.0,
        raw_suitability_sum: 0.0,
        penalty: 0.0,
        loads,
        n_papers: m,
    })
}

#[test]
fn baseline_beats_random_assignments() {
    let syn = corpus(2);
    let policy = ImputationPolicy::default();
    let train = &syn.corpus.scores;
    let s = assemble_for_matching(train, &baseline_estimates(&BTreeSet::new(), policy), policy).unwrap();
    let a = solve_basic(&MatchProblem::new(s, 1, 0, 9).with_coi(syn.corpus.coi.clone())).unwrap();
    let quality = |x: &Assignment| evaluate_match(x, train, &syn.truth, policy);
    let known = |x: &Assignment| -> f64 { x.pairs.iter().filter_map(|&(r, p)| train.get(r, p)).sum() };
    let mut rng = common::rng(3);
    let mut beaten = 0;
    let mut tried = 0;
    for _ in 0..200 {
        let Some(rand) = random_feasible(&mut rng, 10, 60, 9, &syn.corpus.coi) else {
            continue;
        };
        tried += 1;
        assert!(known(&a) >= known(&rand));
        if quality(&a) >= quality(&rand) {
            beaten += 1;
        }
    }
    assert!(tried > 100);
    assert_eq!(beaten, tried);
}

#[test]
fn histogram_total_is_demand() {
    let syn = corpus(3);
    let policy = ImputationPolicy::default();
    let s = syn.truth.to_dense(1.0);
    let a = solve_basic(&MatchProblem::new(s, 1, 3, 9).with_coi(syn.corpus.coi.clone())).unwrap();
    let h = score_histogram(&a, &syn.truth, policy);
    assert_eq!(h.total(), 60);
}

#[test]
fn curve_shape_and_protocol() {
    let syn = corpus(4);
    let config = CurveConfig {
        methods: vec![Method::Lm, Method::Lr, Method::LrTfm, Method::Bpmf, Method::Baseline],
        budgets: vec![0, 5, 10, 20],
        n_splits: 5,
        seed: 9,
        matcher: small_matcher(),
        predictors: quick_predictors(),
    };
    let report = run_elicitation_curve(&syn.corpus, Some(&syn.truth), &config).unwrap();
    assert_eq!(report.cells.len(), 5 * 4 * 5);
    assert_eq!(report.summary.len(), 4 * 5);
    assert_eq!(report.splits, vec![0, 1, 2, 3, 4]);
    for c in &report.cells {
        assert_eq!(c.histogram.total(), 60);
        assert_eq!(c.rmse.is_none(), c.method == Method::Lm);
        assert_eq!(c.n_train + c.n_held_out, syn.corpus.scores.len());
        if c.budget == 0 {
            assert_eq!(c.n_train, 0);
        }
    }
    // with no training data lr is the constant fallback, and lm still
    // matches from the archives alone
    for s in 0..5 {
        let base = report.cell(s, 0, Method::Baseline).unwrap();
        let lr = report.cell(s, 0, Method::Lr).unwrap();
        assert_eq!(base.rmse, lr.rmse);
    }
    let cold = |m: Method| report.summary_row(m, 0).unwrap().match_quality_mean;
    assert!(cold(Method::Lm) > cold(Method::Baseline));
    // identical subsamples across methods
    for s in 0..5 {
        for &b in &config.budgets {
            let n: BTreeSet<usize> = config.methods.iter().map(|&m| report.cell(s, b, m).unwrap().n_train).collect();
            assert_eq!(n.len(), 1);
        }
    }
    let again = run_elicitation_curve(&syn.corpus, Some(&syn.truth), &config).unwrap();
    assert_eq!(report, again);

    let mean = |b: usize| report.summary_row(Method::Baseline, b).unwrap().match_quality_mean;
    for w in config.budgets.windows(2) {
        assert!(mean(w[1]) >= mean(w[0]), "baseline mean quality fell from budget {} to {}", w[0], w[1]);
    }
    let mut violations = 0;
    for s in 0..5 {
        for w in config.budgets.windows(2) {
            let a = report.cell(s, w[0], Method::Baseline).unwrap().match_quality;
            let b = report.cell(s, w[1], Method::Baseline).unwrap().match_quality;
            if b < a {
                violations += 1;
                eprintln!("baseline split {s}: budget {} -> {}: {a} -> {b}", w[0], w[1]);
            }
        }
    }
    assert!(violations <= 2, "{violations} per-split baseline decreases");

    let csv = report.to_csv();
    assert_eq!(csv.lines().count(), 1 + report.cells.len());
}

#[test]
fn curve_rejects_bad_configs() {
    let syn = corpus(5);
    let base = CurveConfig {
        methods: vec![Method::Baseline],
        budgets: vec![0, 5],
        n_splits: 5,
        seed: 1,
        matcher: small_matcher(),
        predictors: PredictorConfig::default(),
    };
    let empty = CurveConfig { methods: vec![], ..base.clone() };
    assert!(run_elicitation_curve(&syn.corpus, None, &empty).is_err());
    let unsorted = CurveConfig { budgets: vec![5, 0], ..base.clone() };
    assert!(run_elicitation_curve(&syn.corpus, None, &unsorted).is_err());
    let infeasible = CurveConfig {
        matcher: MatcherConfig { p_min: 7, ..small_matcher() },
        ..base
    };
    let err = run_elicitation_curve(&syn.corpus, None, &infeasible).unwrap_err();
    assert!(err.to_string().contains("method baseline"), "{err}");
}

#[test]
fn lambda_zero_row_is_basic() {
    let syn = corpus(6);
    let s = syn.truth.to_dense(1.0);
    let cfg = small_matcher();
    let report = run_lambda_sweep(&s, &syn.corpus.coi, &[0.0, 0.1, 0.25, 0.5, 0.75, 1.0], &cfg).unwrap();
    let basic = solve_basic(&cfg.problem(s.clone(), &syn.corpus.coi)).unwrap();
    assert_eq!(report.lambda_rows[0].raw_objective, basic.raw_suitability_sum);
    assert_eq!(report.lambda_rows[0].loads, basic.loads);
    for w in report.lambda_rows.windows(2) {
        assert!(w[1].raw_objective <= w[0].raw_objective);
    }
}
