use csembed::corpus::{PairRecord, Target};
use csembed::encoder::{init_params, Vocab};
use csembed::eval::*;
use csembed::synthetic::{generate, SyntheticConfig};
use csembed::trainer::TrainConfig;
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

fn reference_p(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).unwrap();
    2.0 * (1.0 - dist.cdf(t.abs()))
}

#[test]
fn unit_cases() {
    assert_eq!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
    assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
    assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() <= 1e-12);
    assert!((f1_binary(&[1, 1, 1, 0], &[1, 1, 0, 1]).unwrap() - 2.0 / 3.0).abs() <= 1e-12);
    let same = welch_ttest(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
    assert_eq!((same.t_statistic, same.p_value), (0.0, 1.0));
    let r = welch_ttest(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    assert!((r.p_value - 0.3466).abs() <= 1e-3);
}

#[test]
fn t_table_critical_values() {
    // Two-sided 5% and 1% critical values from standard t-tables.
    let table = [
        (1.0, 12.706, 0.05),
        (5.0, 2.571, 0.05),
        (10.0, 2.228, 0.05),
        (30.0, 2.042, 0.05),
        (5.0, 4.032, 0.01),
        (20.0, 2.845, 0.01),
    ];
    for (df, t, p) in table {
        assert!((t_two_sided_p(t, df) - p).abs() < 2e-4, "df={df} t={t}");
    }
}

#[test]
fn p_values_match_reference_distribution() {
    for &(t, df) in &[(0.3, 2.5), (1.7, 4.0), (2.9, 7.3), (5.0, 12.0), (-1.2, 40.0), (0.01, 1.0)] {
        let ours = t_two_sided_p(t, df);
        let theirs = reference_p(t, df);
        assert!((ours - theirs).abs() < 1e-9, "t={t} df={df}: {ours} vs {theirs}");
    }
}

#[test]
fn pairs_with_cs_fields_drive_scenarios() {
    let task = generate(&SyntheticConfig {
        train_size: 40,
        eval_size: 30,
        ..SyntheticConfig::default()
    });
    let cfg = TrainConfig {
        epochs: 1,
        max_steps: Some(3),
        ..TrainConfig::default()
    };
    let sets = vec![("syn".to_string(), task.eval.clone())];
    let reports = run_scenarios(&task.train, &sets, &task.vocab, &cfg, &Scenario::ALL, &[1, 2]).unwrap();
    let keys: Vec<(Scenario, u64)> = reports.iter().map(|r| (r.scenario.unwrap(), r.seed.unwrap())).collect();
    assert_eq!(
        keys,
        [
            (Scenario::EN2EN, 1),
            (Scenario::EN2EN, 2),
            (Scenario::EN2CS, 1),
            (Scenario::EN2CS, 2),
            (Scenario::CS2CS, 1),
            (Scenario::CS2CS, 2)
        ]
    );
    assert!(reports.iter().all(|r| (-1.0..=1.0).contains(&r.value) && r.n == 30));
    let again = run_scenarios(&task.train, &sets, &task.vocab, &cfg, &Scenario::ALL, &[1, 2]).unwrap();
    assert_eq!(reports, again);

    let en_only: Vec<PairRecord> = task
        .eval
        .iter()
        .map(|r| PairRecord::new(r.id.clone(), r.sentence0.clone(), r.sentence1.clone(), r.target.clone()))
        .collect();
    let sets = vec![("en".to_string(), en_only)];
    assert!(run_scenarios(&task.train, &sets, &task.vocab, &cfg, &[Scenario::EN2EN], &[1]).is_ok());
    assert!(matches!(
        run_scenarios(&task.train, &sets, &task.vocab, &cfg, &[Scenario::CS2CS], &[1]),
        Err(EvalError::MissingCs(_))
    ));
}

#[test]
fn sts_evaluation_is_scale_invariant_and_bounded() {
    let vocab = Vocab::new(["a", "b", "c", "d"], false);
    let pairs: Vec<PairRecord> = [("a b", "a b", 5.0), ("a b", "c d", 0.0), ("a c", "a d", 2.5), ("b", "b c", 3.0)]
        .iter()
        .enumerate()
        .map(|(i, &(x, y, s))| PairRecord::new(i.to_string(), x, y, Target::Score(s)))
        .collect();
    let p = init_params(vocab.len(), 6, 3, 0.5);
    let r = evaluate_sts(&p, &vocab, "toy", &pairs, View::En).unwrap();
    assert!((-1.0..=1.0).contains(&r.value));
    assert!(evaluate_sts(&p, &vocab, "toy", &[], View::En).is_err());
    let labeled = [PairRecord::new("x", "a", "b", Target::Label("entailment".into()))];
    assert!(matches!(
        evaluate_sts(&p, &vocab, "toy", &labeled, View::En),
        Err(EvalError::NotScored(_))
    ));
    let all = evaluate_sts_all(
        &p,
        &vocab,
        "toy",
        &[("s1".into(), pairs[..2].to_vec()), ("s2".into(), pairs[2..].to_vec())],
        View::En,
    )
    .unwrap();
    assert_eq!(all.value, r.value);
    assert_eq!(all.n, 4);
}

proptest! {
    #[test]
    fn spearman_invariant_under_increasing_maps(
        xs in proptest::collection::vec(-100.0f64..100.0, 3..30),
        seed in any::<u64>(),
    ) {
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x * 0.5 + ((i as u64 ^ seed) % 7) as f64).collect();
        prop_assume!(pearson(&average_ranks(&xs), &average_ranks(&ys)).is_ok());
        let base = spearman(&xs, &ys).unwrap();
        prop_assert!((-1.0..=1.0).contains(&base));
        let mapped: Vec<f64> = xs.iter().map(|x| (x / 50.0).exp() * 3.0 + 1.0).collect();
        prop_assert!((spearman(&mapped, &ys).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn welch_is_symmetric(
        a in proptest::collection::vec(-10.0f64..10.0, 2..12),
        b in proptest::collection::vec(-10.0f64..10.0, 2..12),
    ) {
        if let (Ok(x), Ok(y)) = (welch_ttest(&a, &b), welch_ttest(&b, &a)) {
            prop_assert_eq!(x.p_value, y.p_value);
            prop_assert_eq!(x.t_statistic, -y.t_statistic);
            prop_assert!((0.0..=1.0).contains(&x.p_value));
            if x.t_statistic.is_finite() {
                prop_assert!((x.p_value - reference_p(x.t_statistic, x.df)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn classification_metrics_are_bounded(
        pairs in proptest::collection::vec((0u8..2, 0u8..2), 1..40),
    ) {
        let (p, g): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
        let acc = accuracy(&p, &g).unwrap();
        let f1 = f1_binary(&p, &g).unwrap();
        prop_assert!((0.0..=1.0).contains(&acc));
        prop_assert!((0.0..=1.0).contains(&f1));
    }
}
