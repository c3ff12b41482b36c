//! Evaluation metrics and experiment protocols: rank correlation for
//! similarity tasks, accuracy/F1 for classification, t-tests across seeds,
//! and the train/eval language scenario matrix.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concse::{cosine_sim, Combination, LossConfig};
use crate::corpus::{PairRecord, SixTuple};
use crate::encoder::{self, EncoderParams, Vocab};
use crate::trainer::{self, TrainConfig, TrainError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {0} observations")]
    TooFew(usize),
    #[error("constant input: rank variance is zero")]
    ConstantInput,
    #[error("labels must be 0 or 1 for F1")]
    NonBinary,
    #[error("both samples have zero variance and equal means")]
    DegenerateVariance,
    #[error("empty pair set")]
    EmptyPairs,
    #[error("record '{0}' has no gold score")]
    NotScored(String),
    #[error("record '{0}' lacks code-switched sentences")]
    MissingCs(String),
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
    #[error(transparent)]
    Encoder(#[from] encoder::EncoderError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

/// Average ranks, 1-based; ties share the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(EvalError::TooFew(2));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::ConstantInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::LengthMismatch(xs.len(), ys.len()));
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

pub fn accuracy<T: PartialEq>(preds: &[T], golds: &[T]) -> Result<f64, EvalError> {
    if preds.len() != golds.len() {
        return Err(EvalError::LengthMismatch(preds.len(), golds.len()));
    }
    if preds.is_empty() {
        return Err(EvalError::TooFew(1));
    }
    let correct = preds.iter().zip(golds).filter(|(p, g)| p == g).count();
    Ok(correct as f64 / preds.len() as f64)
}

/// Binary F1 with label 1 as the positive class; 0 when precision and
/// recall are both zero.
pub fn f1_binary(preds: &[u8], golds: &[u8]) -> Result<f64, EvalError> {
    if preds.len() != golds.len() {
        return Err(EvalError::LengthMismatch(preds.len(), golds.len()));
    }
    if preds.is_empty() {
        return Err(EvalError::TooFew(1));
    }
    if preds.iter().chain(golds).any(|&l| l > 1) {
        return Err(EvalError::NonBinary);
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &g) in preds.iter().zip(golds) {
        match (p, g) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fn_ += 1,
            _ => {}
        }
    }
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const TOL: f64 = 1e-12;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < TOL {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-sided p-value of Student's t with `df` degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    reg_inc_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub p_value: f64,
    pub df: f64,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Two-sided Welch t-test with Welch–Satterthwaite degrees of freedom.
pub fn welch_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult, EvalError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(EvalError::TooFew(2));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if se2 == 0.0 {
        if ma == mb {
            return Err(EvalError::DegenerateVariance);
        }
        let t = if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY };
        return Ok(TTestResult {
            t_statistic: t,
            p_value: 0.0,
            df: na + nb - 2.0,
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(TTestResult {
        t_statistic: t,
        p_value: t_two_sided_p(t, df),
        df,
    })
}

/// Two-sided paired t-test on `a[i] - b[i]`, e.g. per-seed score pairs.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(EvalError::TooFew(2));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (m, v) = mean_var(&d);
    let n = d.len() as f64;
    if v == 0.0 {
        if m == 0.0 {
            return Err(EvalError::DegenerateVariance);
        }
        return Ok(TTestResult {
            t_statistic: m.signum() * f64::INFINITY,
            p_value: 0.0,
            df: n - 1.0,
        });
    }
    let t = m / (v / n).sqrt();
    Ok(TTestResult {
        t_statistic: t,
        p_value: t_two_sided_p(t, n - 1.0),
        df: n - 1.0,
    })
}

/// Which sentence fields of a dataset a model sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    /// Original monolingual sentences.
    En,
    /// Code-switched sentences.
    Cs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    EN2EN,
    EN2CS,
    CS2CS,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::EN2EN, Scenario::EN2CS, Scenario::CS2CS];

    pub fn train_view(self) -> View {
        match self {
            Scenario::EN2EN | Scenario::EN2CS => View::En,
            Scenario::CS2CS => View::Cs,
        }
    }

    pub fn eval_view(self) -> View {
        match self {
            Scenario::EN2EN => View::En,
            Scenario::EN2CS | Scenario::CS2CS => View::Cs,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Scenario {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, EvalError> {
        match s.to_ascii_uppercase().as_str() {
            "EN2EN" => Ok(Scenario::EN2EN),
            "EN2CS" => Ok(Scenario::EN2CS),
            "CS2CS" => Ok(Scenario::CS2CS),
            _ => Err(EvalError::UnknownScenario(s.to_string())),
        }
    }
}

/// The two sentences of a record under a view.
pub fn pair_texts(record: &PairRecord, view: View) -> Result<(&str, &str), EvalError> {
    match view {
        View::En => Ok((&record.sentence0, &record.sentence1)),
        View::Cs => match (&record.cs_sentence0, &record.cs_sentence1) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(EvalError::MissingCs(record.id.clone())),
        },
    }
}

/// Cosine similarity of the encoded sentences of each pair.
pub fn model_scores(
    params: &EncoderParams,
    vocab: &Vocab,
    pairs: &[PairRecord],
    view: View,
) -> Result<Vec<f64>, EvalError> {
    let mut left = Vec::with_capacity(pairs.len());
    let mut right = Vec::with_capacity(pairs.len());
    for r in pairs {
        let (a, b) = pair_texts(r, view)?;
        left.push(encoder::tokenize(a, vocab)?);
        right.push(encoder::tokenize(b, vocab)?);
    }
    let l = encoder::encode(&left, params)?;
    let r = encoder::encode(&right, params)?;
    Ok((0..pairs.len())
        .map(|i| cosine_sim(l.reps.row(i), r.reps.row(i)).unwrap_or(0.0))
        .collect())
}

/// Gold scores; numeric labels count as scores.
fn gold_scores(pairs: &[PairRecord]) -> Result<Vec<f64>, EvalError> {
    pairs
        .iter()
        .map(|r| {
            let numeric_label = match &r.target {
                crate::corpus::Target::Label(l) => l.trim().parse::<f64>().ok().filter(|v| v.is_finite()),
                crate::corpus::Target::Score(_) => None,
            };
            r.target
                .score()
                .or(numeric_label)
                .ok_or_else(|| EvalError::NotScored(r.id.clone()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenario: Option<Scenario>,
    pub task: String,
    pub metric: String,
    pub value: f64,
    pub seed: Option<u64>,
    pub n: usize,
    /// Per-subset values alongside the pooled one.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_subset: BTreeMap<String, f64>,
}

/// Spearman between model cosine scores and gold scores over all pairs.
pub fn evaluate_sts(
    params: &EncoderParams,
    vocab: &Vocab,
    task: &str,
    pairs: &[PairRecord],
    view: View,
) -> Result<EvalReport, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyPairs);
    }
    let gold = gold_scores(pairs)?;
    let pred = model_scores(params, vocab, pairs, view)?;
    Ok(EvalReport {
        scenario: None,
        task: task.to_string(),
        metric: "spearman".into(),
        value: spearman(&pred, &gold)?,
        seed: None,
        n: pairs.len(),
        per_subset: BTreeMap::new(),
    })
}

/// The "all" setting: subsets are concatenated before a single Spearman;
/// each subset's own Spearman is reported alongside.
pub fn evaluate_sts_all(
    params: &EncoderParams,
    vocab: &Vocab,
    task: &str,
    subsets: &[(String, Vec<PairRecord>)],
    view: View,
) -> Result<EvalReport, EvalError> {
    let all: Vec<PairRecord> = subsets.iter().flat_map(|(_, p)| p.iter().cloned()).collect();
    let mut report = evaluate_sts(params, vocab, task, &all, view)?;
    if subsets.len() > 1 {
        for (name, pairs) in subsets {
            if let Ok(r) = evaluate_sts(params, vocab, name, pairs, view) {
                report.per_subset.insert(name.clone(), r.value);
            }
        }
    }
    Ok(report)
}

/// Restricts a loss to the single-language combination of a view. The
/// cross-language alignment term is dropped.
pub fn view_loss(base: &LossConfig, view: View) -> LossConfig {
    let combination = match view {
        View::En => Combination::H1,
        View::Cs => Combination::H2,
    };
    let mut cfg = LossConfig {
        combinations: vec![combination],
        enable_neg: false,
        ..base.clone()
    };
    if !cfg.enable_con && !cfg.enable_tri {
        cfg.enable_con = true;
    }
    cfg
}

/// Trains per scenario and seed on the scenario's training view, then
/// evaluates every task on the evaluation view. Reports are sorted by
/// `(scenario, task, seed)`.
pub fn run_scenarios(
    train_set: &[SixTuple],
    eval_sets: &[(String, Vec<PairRecord>)],
    vocab: &Vocab,
    config: &TrainConfig,
    scenarios: &[Scenario],
    seeds: &[u64],
) -> Result<Vec<EvalReport>, EvalError> {
    for s in scenarios {
        if s.eval_view() == View::Cs {
            for (_, pairs) in eval_sets {
                if let Some(r) = pairs.iter().find(|r| !r.has_cs()) {
                    return Err(EvalError::MissingCs(r.id.clone()));
                }
            }
        }
    }
    let cells: Vec<(Scenario, u64)> = scenarios
        .iter()
        .flat_map(|&s| seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let results: Vec<Result<Vec<EvalReport>, EvalError>> = cells
        .par_iter()
        .map(|&(scenario, seed)| {
            let cfg = TrainConfig {
                seed,
                loss: view_loss(&config.loss, scenario.train_view()),
                ..config.clone()
            };
            let (params, _) = trainer::train(train_set, vocab, &cfg, None)?;
            eval_sets
                .iter()
                .map(|(task, pairs)| {
                    let mut r = evaluate_sts(&params, vocab, task, pairs, scenario.eval_view())?;
                    r.scenario = Some(scenario);
                    r.seed = Some(seed);
                    Ok(r)
                })
                .collect()
        })
        .collect();
    let mut reports = Vec::new();
    for r in results {
        reports.extend(r?);
    }
    reports.sort_by(|a, b| (a.scenario, &a.task, a.seed).cmp(&(b.scenario, &b.task, b.seed)));
    Ok(reports)
}
