//! A synthetic bilingual task with a known answer. Every concept has an
//! English token and a code-switched alias; code-switched sentences swap a
//! contiguous run of tokens for their aliases, and similarity is concept
//! overlap regardless of language.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{PairRecord, SixTuple, Target};
use crate::encoder::Vocab;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub concepts: usize,
    pub sentence_len: usize,
    pub train_size: usize,
    pub eval_size: usize,
    /// Concepts replaced in the entailment.
    pub entail_swaps: (usize, usize),
    /// Concepts replaced in the contradiction.
    pub contra_swaps: (usize, usize),
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            concepts: 200,
            sentence_len: 8,
            train_size: 500,
            eval_size: 100,
            entail_swaps: (1, 2),
            contra_swaps: (4, 5),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub vocab: Vocab,
    pub train: Vec<SixTuple>,
    /// Held-out pairs; both the English and code-switched fields are set.
    pub eval: Vec<PairRecord>,
}

pub fn en_token(c: usize) -> String {
    format!("en{c:03}")
}

pub fn cs_token(c: usize) -> String {
    format!("cs{c:03}")
}

/// Cosine similarity of concept-count vectors.
pub fn overlap_similarity(a: &[usize], b: &[usize]) -> f64 {
    use std::collections::BTreeMap;
    let count = |xs: &[usize]| {
        let mut m = BTreeMap::new();
        for &x in xs {
            *m.entry(x).or_insert(0.0) += 1.0;
        }
        m
    };
    let (ca, cb) = (count(a), count(b));
    let dot: f64 = ca.iter().map(|(k, v)| v * cb.get(k).unwrap_or(&0.0)).sum();
    let na: f64 = ca.values().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = cb.values().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

struct Gen {
    rng: ChaCha8Rng,
    concepts: usize,
    len: usize,
}

impl Gen {
    fn sentence(&mut self) -> Vec<usize> {
        let mut all: Vec<usize> = (0..self.concepts).collect();
        all.partial_shuffle(&mut self.rng, self.len);
        all.truncate(self.len);
        all
    }

    /// Replaces `k` positions with concepts absent from the sentence.
    fn perturb(&mut self, base: &[usize], k: usize) -> Vec<usize> {
        let mut out = base.to_vec();
        let mut positions: Vec<usize> = (0..base.len()).collect();
        positions.shuffle(&mut self.rng);
        for &p in positions.iter().take(k) {
            loop {
                let c = self.rng.random_range(0..self.concepts);
                if !out.contains(&c) {
                    out[p] = c;
                    break;
                }
            }
        }
        out
    }

    fn en(&self, s: &[usize]) -> String {
        s.iter().map(|&c| en_token(c)).collect::<Vec<_>>().join(" ")
    }

    /// Aliases a random contiguous run of one to `len - 1` tokens.
    fn cs(&mut self, s: &[usize]) -> String {
        let n = s.len();
        let run = self.rng.random_range(1..n.max(2));
        let start = self.rng.random_range(0..=n - run.min(n));
        s.iter()
            .enumerate()
            .map(|(i, &c)| {
                if i >= start && i < start + run {
                    cs_token(c)
                } else {
                    en_token(c)
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

pub fn generate(cfg: &SyntheticConfig) -> SyntheticTask {
    assert!(cfg.sentence_len >= 2 && cfg.sentence_len * 2 <= cfg.concepts);
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        concepts: cfg.concepts,
        len: cfg.sentence_len,
    };
    let mut train = Vec::with_capacity(cfg.train_size);
    for _ in 0..cfg.train_size {
        let p = g.sentence();
        let ke = g.rng.random_range(cfg.entail_swaps.0..=cfg.entail_swaps.1);
        let kc = g.rng.random_range(cfg.contra_swaps.0..=cfg.contra_swaps.1);
        let e = g.perturb(&p, ke);
        let c = g.perturb(&p, kc);
        train.push(SixTuple {
            premise: g.en(&p),
            entailment: g.en(&e),
            contradiction: g.en(&c),
            cs_premise: g.cs(&p),
            cs_entailment: g.cs(&e),
            cs_contradiction: g.cs(&c),
            reviewed: None,
        });
    }
    let mut eval = Vec::with_capacity(cfg.eval_size);
    for i in 0..cfg.eval_size {
        let a = g.sentence();
        let shared = g.rng.random_range(0..=cfg.sentence_len);
        let b = g.perturb(&a, cfg.sentence_len - shared);
        let mut b_shuffled = b.clone();
        b_shuffled.shuffle(&mut g.rng);
        let gold = overlap_similarity(&a, &b_shuffled);
        let (s0, s1) = (g.en(&a), g.en(&b_shuffled));
        let (c0, c1) = (g.cs(&a), g.cs(&b_shuffled));
        eval.push(PairRecord::new(format!("syn-{i}"), s0, s1, Target::Score(gold)).with_cs(c0, c1));
    }
    let tokens = (0..cfg.concepts).map(en_token).chain((0..cfg.concepts).map(cs_token));
    SyntheticTask {
        vocab: Vocab::new(tokens, false),
        train,
        eval,
    }
}
