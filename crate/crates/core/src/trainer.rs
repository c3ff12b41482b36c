//! Deterministic mini-batch training of the encoder on six-sentence records.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concse::{self, Combination, Group, LossBreakdown, LossConfig, LossError, NegAlignMode, RepSextet};
use crate::corpus::SixTuple;
use crate::encoder::{self, EncoderError, EncoderParams, ParamGrads, Vocab};
use crate::linalg::ShapeError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("invalid train config: {0}")]
    Config(String),
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("training diverged at step {0}: non-finite parameters")]
    Diverged(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub loss: LossConfig,
    /// Evaluate every this many steps; 0 disables periodic evaluation.
    pub eval_every: usize,
    /// Stop after this many optimizer steps even mid-epoch.
    pub max_steps: Option<usize>,
    pub dim: usize,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5,
            batch_size: 16,
            learning_rate: 1e-2,
            optimizer: Optimizer::Sgd,
            seed: 42,
            loss: LossConfig::default(),
            eval_every: 0,
            max_steps: None,
            dim: 32,
            init_scale: 0.1,
        }
    }
}

/// Batch size and learning rate reported for pretrained encoders, with Adam
/// and 5 epochs.
pub const PAPER_PRESETS: [(&str, usize, f64); 3] = [
    ("mbert-base", 128, 5e-5),
    ("xlmr-base", 128, 5e-5),
    ("xlmr-large", 48, 1e-5),
];

impl TrainConfig {
    pub fn preset(name: &str) -> Option<Self> {
        if name == "desk" {
            return Some(Self::default());
        }
        PAPER_PRESETS
            .iter()
            .find(|(n, _, _)| *n == name)
            .map(|&(_, batch_size, learning_rate)| Self {
                epochs: 5,
                batch_size,
                learning_rate,
                optimizer: Optimizer::adam(),
                ..Self::default()
            })
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning_rate must be nonnegative");
        }
        if self.dim < 2 {
            return bad("dim must be at least 2");
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return bad("init_scale must be nonnegative");
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps <= 0.0 {
                return bad("adam requires 0 <= beta < 1 and eps > 0");
            }
        }
        self.loss.validate()?;
        Ok(())
    }
}

/// Flat key-value run configuration shared by the trainer and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// `sgd` or `adam`.
    pub optimizer: String,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub eval_every: usize,
    pub max_steps: Option<usize>,
    pub dim: usize,
    pub init_scale: f64,
    pub lowercase: bool,
    pub tau: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub enable_con: bool,
    pub enable_tri: bool,
    pub enable_neg: bool,
    pub combinations: Vec<Combination>,
    pub neg_mode: NegAlignMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from(&TrainConfig::default())
    }
}

impl From<&TrainConfig> for RunConfig {
    fn from(c: &TrainConfig) -> Self {
        let (optimizer, beta1, beta2, eps) = match c.optimizer {
            Optimizer::Sgd => ("sgd", 0.9, 0.999, 1e-8),
            Optimizer::Adam { beta1, beta2, eps } => ("adam", beta1, beta2, eps),
        };
        Self {
            epochs: c.epochs,
            batch_size: c.batch_size,
            learning_rate: c.learning_rate,
            optimizer: optimizer.into(),
            beta1,
            beta2,
            eps,
            seed: c.seed,
            eval_every: c.eval_every,
            max_steps: c.max_steps,
            dim: c.dim,
            init_scale: c.init_scale,
            lowercase: true,
            tau: c.loss.tau,
            lambda: c.loss.lambda,
            alpha: c.loss.alpha,
            enable_con: c.loss.enable_con,
            enable_tri: c.loss.enable_tri,
            enable_neg: c.loss.enable_neg,
            combinations: c.loss.combinations.clone(),
            neg_mode: c.loss.neg_mode,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, TrainError> {
        toml::from_str(text).map_err(|e| TrainError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            tau: self.tau,
            lambda: self.lambda,
            alpha: self.alpha,
            enable_con: self.enable_con,
            enable_tri: self.enable_tri,
            enable_neg: self.enable_neg,
            combinations: self.combinations.clone(),
            neg_mode: self.neg_mode,
        }
    }

    pub fn set_loss(&mut self, loss: &LossConfig) {
        self.tau = loss.tau;
        self.lambda = loss.lambda;
        self.alpha = loss.alpha;
        self.enable_con = loss.enable_con;
        self.enable_tri = loss.enable_tri;
        self.enable_neg = loss.enable_neg;
        self.combinations = loss.combinations.clone();
        self.neg_mode = loss.neg_mode;
    }

    pub fn train_config(&self) -> Result<TrainConfig, TrainError> {
        let optimizer = match self.optimizer.to_ascii_lowercase().as_str() {
            "sgd" => Optimizer::Sgd,
            "adam" => Optimizer::Adam {
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
            },
            other => return Err(TrainError::Config(format!("unknown optimizer '{other}'"))),
        };
        let cfg = TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            optimizer,
            seed: self.seed,
            loss: self.loss_config(),
            eval_every: self.eval_every,
            max_steps: self.max_steps,
            dim: self.dim,
            init_scale: self.init_scale,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Shuffled record indices for one epoch, cut into batches of `batch_size`
/// with the short remainder batch kept last.
pub fn make_batches(n_records: usize, batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    assert!(batch_size > 0, "batch_size must be positive");
    let mut order: Vec<usize> = (0..n_records).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ epoch);
    order.shuffle(&mut rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

fn zip_tensors<'a>(
    params: &'a mut EncoderParams,
    grads: &'a ParamGrads,
) -> Result<impl Iterator<Item = (&'a mut [f64], &'a [f64])>, ShapeError> {
    let shapes_match = params.embeddings.shape() == grads.embeddings.shape()
        && params.proj.shape() == grads.proj.shape()
        && params.bias.len() == grads.bias.len();
    if !shapes_match {
        return Err(ShapeError {
            expected: params.embeddings.shape(),
            actual: grads.embeddings.shape(),
        });
    }
    Ok(params.tensors_mut().into_iter().zip(grads.tensors()))
}

/// `p ← p − lr·g`
pub fn sgd_step(params: &mut EncoderParams, grads: &ParamGrads, lr: f64) -> Result<(), ShapeError> {
    for (p, g) in zip_tensors(params, grads)? {
        for (x, dx) in p.iter_mut().zip(g) {
            *x -= lr * dx;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: [Vec<f64>; 3],
    pub v: [Vec<f64>; 3],
    /// Number of updates applied so far.
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &EncoderParams) -> Self {
        let zeros = |t: &[f64]| vec![0.0; t.len()];
        let [e, w, b] = params.tensors();
        Self {
            m: [zeros(e), zeros(w), zeros(b)],
            v: [zeros(e), zeros(w), zeros(b)],
            t: 0,
        }
    }
}

/// Bias-corrected Adam update; advances `state.t` by one.
pub fn adam_step(
    params: &mut EncoderParams,
    grads: &ParamGrads,
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<(), ShapeError> {
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for (k, (p, g)) in zip_tensors(params, grads)?.enumerate() {
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        for i in 0..p.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let mhat = m[i] / c1;
            let vhat = v[i] / c2;
            p[i] -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Token ids of a record's six sentences in group order.
pub type SextetIds = [Vec<u32>; 6];

pub fn tokenize_records(records: &[SixTuple], vocab: &Vocab) -> Result<Vec<SextetIds>, EncoderError> {
    records
        .iter()
        .map(|r| {
            let s = r.sentences();
            Ok([
                encoder::tokenize(s[0], vocab)?,
                encoder::tokenize(s[1], vocab)?,
                encoder::tokenize(s[2], vocab)?,
                encoder::tokenize(s[3], vocab)?,
                encoder::tokenize(s[4], vocab)?,
                encoder::tokenize(s[5], vocab)?,
            ])
        })
        .collect()
}

/// Loss and parameter gradients for one batch.
#[derive(Debug, Clone)]
pub struct BatchGradients {
    pub loss: LossBreakdown,
    /// Sum of the per-group contributions.
    pub grads: ParamGrads,
    /// Contribution flowing back through each group's encoding.
    pub per_group: Vec<(Group, ParamGrads)>,
}

/// Encodes the six sentence groups through the same parameters and
/// backpropagates the total loss. Loss values and gradients are raw sums.
pub fn batch_gradients(
    params: &EncoderParams,
    batch: &[&SextetIds],
    loss: &LossConfig,
) -> Result<BatchGradients, TrainError> {
    let mut encoded = Vec::with_capacity(6);
    for g in Group::ALL {
        let ids: Vec<Vec<u32>> = batch.iter().map(|r| r[g.index()].clone()).collect();
        encoded.push(encoder::encode(&ids, params)?);
    }
    let reps = RepSextet::new(std::array::from_fn(|i| encoded[i].reps.clone()))?;
    let breakdown = concse::total_loss(&reps, loss)?;
    let mut grads = params.zero_grads();
    let mut per_group = Vec::new();
    for g in Group::ALL {
        if !loss.uses(g) {
            continue;
        }
        let pg = encoder::encode_backward(&encoded[g.index()], params, breakdown.grads.get(g))?;
        grads.accumulate(&pg)?;
        per_group.push((g, pg));
    }
    Ok(BatchGradients {
        loss: breakdown,
        grads,
        per_group,
    })
}

/// Per-example loss values logged at each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub con: f64,
    pub tri: f64,
    pub neg: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSnapshot {
    pub step: usize,
    pub metric: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub steps: Vec<StepRecord>,
    pub evals: Vec<EvalSnapshot>,
    /// Wall-clock seconds per epoch. Not part of the JSONL history.
    pub epoch_seconds: Vec<f64>,
}

impl TrainHistory {
    /// One JSON object per step: `step, con, tri, neg, total`.
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.steps {
            s.push_str(&serde_json::to_string(r).expect("step record serializes"));
            s.push('\n');
        }
        s
    }

    pub fn total_losses(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.total).collect()
    }
}

/// Trains a freshly initialized encoder.
///
/// Losses are divided by the batch size before the update. `evaluate`, when
/// given, runs every `eval_every` steps and once after the last step.
pub fn train(
    records: &[SixTuple],
    vocab: &Vocab,
    cfg: &TrainConfig,
    evaluate: Option<&dyn Fn(&EncoderParams) -> f64>,
) -> Result<(EncoderParams, TrainHistory), TrainError> {
    let params = encoder::init_params(vocab.len(), cfg.dim, cfg.seed, cfg.init_scale);
    train_from(params, records, vocab, cfg, evaluate)
}

/// Continues training from the given parameters.
pub fn train_from(
    mut params: EncoderParams,
    records: &[SixTuple],
    vocab: &Vocab,
    cfg: &TrainConfig,
    evaluate: Option<&dyn Fn(&EncoderParams) -> f64>,
) -> Result<(EncoderParams, TrainHistory), TrainError> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let ids = tokenize_records(records, vocab)?;
    let mut history = TrainHistory::default();
    let mut adam = AdamState::new(&params);
    let mut step = 0;
    let max_steps = cfg.max_steps.unwrap_or(usize::MAX);
    'epochs: for epoch in 0..cfg.epochs {
        let started = Instant::now();
        for batch in make_batches(ids.len(), cfg.batch_size, cfg.seed, epoch as u64) {
            if step >= max_steps {
                history.epoch_seconds.push(started.elapsed().as_secs_f64());
                break 'epochs;
            }
            let rows: Vec<&SextetIds> = batch.iter().map(|&i| &ids[i]).collect();
            let mut bg = batch_gradients(&params, &rows, &cfg.loss)?;
            let inv = 1.0 / rows.len() as f64;
            bg.grads.scale(inv);
            match cfg.optimizer {
                Optimizer::Sgd => sgd_step(&mut params, &bg.grads, cfg.learning_rate)?,
                Optimizer::Adam { beta1, beta2, eps } => {
                    adam_step(&mut params, &bg.grads, &mut adam, cfg.learning_rate, beta1, beta2, eps)?
                }
            }
            step += 1;
            if !params.is_finite() {
                return Err(TrainError::Diverged(step));
            }
            let l = &bg.loss;
            history.steps.push(StepRecord {
                step,
                con: l.con * inv,
                tri: l.tri * inv,
                neg: l.neg * inv,
                total: l.total * inv,
            });
            if let Some(eval) = evaluate {
                if cfg.eval_every > 0 && step % cfg.eval_every == 0 {
                    history.evals.push(EvalSnapshot {
                        step,
                        metric: eval(&params),
                    });
                }
            }
        }
        history.epoch_seconds.push(started.elapsed().as_secs_f64());
    }
    if let Some(eval) = evaluate {
        if history.evals.last().map(|e| e.step) != Some(step) {
            history.evals.push(EvalSnapshot {
                step,
                metric: eval(&params),
            });
        }
    }
    Ok((params, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::init_params;

    #[test]
    fn batches_keep_short_tail() {
        let b = make_batches(10, 4, 1, 0);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), [4, 4, 2]);
        let mut all: Vec<usize> = b.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(make_batches(10, 4, 1, 0), b);
    }

    #[test]
    fn sgd_examples() {
        let mut p = init_params(3, 2, 0, 0.0);
        p.bias = vec![1.0, 1.0];
        let mut g = p.zero_grads();
        let before = p.clone();
        sgd_step(&mut p, &g, 0.5).unwrap();
        assert_eq!(p, before);
        g.bias = vec![2.0, 0.0];
        sgd_step(&mut p, &g, 0.5).unwrap();
        assert_eq!(p.bias, [0.0, 1.0]);
        let wrong = init_params(4, 2, 0, 0.0).zero_grads();
        assert!(sgd_step(&mut p, &wrong, 0.1).is_err());
    }

    #[test]
    fn adam_first_step_closed_form() {
        let mut p = init_params(2, 2, 0, 0.0);
        let mut g = p.zero_grads();
        g.bias = vec![1.0, 0.0];
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &g, &mut st, 1e-3, 0.9, 0.999, 1e-8).unwrap();
        // m̂ = v̂ = 1 after bias correction.
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!((p.bias[0] - expected).abs() < 1e-18);
        assert!((p.bias[0] - -9.99999995e-4).abs() < 1e-11);
        assert_eq!(p.bias[1], 0.0);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut p = init_params(3, 2, 5, 0.3);
        let before = p.clone();
        let g = p.zero_grads();
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &g, &mut st, 1e-2, 0.9, 0.999, 1e-8).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn run_config_round_trip() {
        let rc = RunConfig::default();
        let back = RunConfig::parse(&rc.to_toml()).unwrap();
        assert_eq!(back, rc);
        let rc = RunConfig::parse("optimizer = \"adam\"\ntau = 0.1\ncombinations = [\"H1\"]\n").unwrap();
        let tc = rc.train_config().unwrap();
        assert!(matches!(tc.optimizer, Optimizer::Adam { .. }));
        assert_eq!(tc.loss.tau, 0.1);
        assert!(RunConfig::parse("bogus = 1\n").is_err());
        assert!(RunConfig::parse("optimizer = \"rmsprop\"\n").unwrap().train_config().is_err());
        assert!(RunConfig::parse("batch_size = 0\n").unwrap().train_config().is_err());
    }

    #[test]
    fn presets() {
        let p = TrainConfig::preset("xlmr-large").unwrap();
        assert_eq!((p.batch_size, p.learning_rate, p.epochs), (48, 1e-5, 5));
        assert_eq!(TrainConfig::preset("desk").unwrap().batch_size, 16);
        assert!(TrainConfig::preset("gpt").is_none());
    }
}
