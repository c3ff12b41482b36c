//! Bag-of-embeddings sentence encoder with exact backpropagation.
//!
//! A sentence is encoded as `h = tanh(W · mean(E[t] for t in tokens) + b)`,
//! the pooled vector standing in for a classifier-token representation.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{Matrix, ShapeError};

pub const UNK: &str = "[UNK]";
pub const PAD: &str = "[PAD]";
pub const UNK_ID: u32 = 0;
pub const PAD_ID: u32 = 1;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("cannot tokenize empty text")]
    EmptyText,
    #[error("sentence {sentence} is empty")]
    EmptySequence { sentence: usize },
    #[error("token id {id} out of range for vocabulary of {vocab_size}")]
    IdOutOfRange { id: u32, vocab_size: usize },
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("invalid vocabulary: {0}")]
    Vocab(String),
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
    lowercase: bool,
}

impl Vocab {
    /// Builds a vocabulary from tokens in first-seen order. UNK and PAD are
    /// prepended.
    pub fn new<I, S>(tokens: I, lowercase: bool) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v = Self {
            tokens: vec![UNK.to_string(), PAD.to_string()],
            ids: HashMap::from([(UNK.to_string(), UNK_ID), (PAD.to_string(), PAD_ID)]),
            lowercase,
        };
        for t in tokens {
            let t = v.normalize(t.as_ref());
            if !v.ids.contains_key(&t) {
                v.ids.insert(t.clone(), v.tokens.len() as u32);
                v.tokens.push(t);
            }
        }
        v
    }

    /// Collects whitespace tokens from `texts` that occur at least
    /// `min_count` times, in first-seen order.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, lowercase: bool, min_count: usize) -> Self {
        let mut order = Vec::new();
        let mut counts: HashMap<String, usize> = HashMap::new();
        for text in texts {
            for tok in text.split_whitespace() {
                let tok = if lowercase { tok.to_lowercase() } else { tok.to_string() };
                let c = counts.entry(tok.clone()).or_insert(0);
                if *c == 0 {
                    order.push(tok);
                }
                *c += 1;
            }
        }
        Self::new(order.into_iter().filter(|t| counts[t] >= min_count), lowercase)
    }

    fn normalize(&self, token: &str) -> String {
        if self.lowercase {
            token.to_lowercase()
        } else {
            token.to_string()
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lowercase(&self) -> bool {
        self.lowercase
    }

    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(&self.normalize(token)).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// One token per line, line number = id, UNK and PAD first.
    pub fn to_file_string(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    pub fn parse(text: &str, lowercase: bool) -> Result<Self, EncoderError> {
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < 2 {
            return Err(EncoderError::Vocab("first two lines must hold UNK and PAD".into()));
        }
        let mut v = Self::new(std::iter::empty::<&str>(), lowercase);
        for (i, line) in lines.iter().enumerate().skip(2) {
            let t = v.normalize(line.trim());
            if t.is_empty() {
                return Err(EncoderError::Vocab(format!("line {}: empty token", i + 1)));
            }
            if v.ids.insert(t.clone(), v.tokens.len() as u32).is_some() {
                return Err(EncoderError::Vocab(format!("line {}: duplicate token '{t}'", i + 1)));
            }
            v.tokens.push(t);
        }
        Ok(v)
    }

    pub fn load(path: &Path, lowercase: bool) -> Result<Self, EncoderError> {
        let text = fs::read_to_string(path).map_err(|source| EncoderError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, lowercase)
    }
}

/// Whitespace tokenization with OOV mapped to UNK.
pub fn tokenize(text: &str, vocab: &Vocab) -> Result<Vec<u32>, EncoderError> {
    let ids: Vec<u32> = text.split_whitespace().map(|t| vocab.id(t)).collect();
    if ids.is_empty() {
        return Err(EncoderError::EmptyText);
    }
    Ok(ids)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    Mean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    /// `V × d` token embeddings.
    pub embeddings: Matrix,
    /// `d × d` projection.
    pub proj: Matrix,
    pub bias: Vec<f64>,
    pub pooling: Pooling,
}

impl EncoderParams {
    pub fn vocab_size(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn dim(&self) -> usize {
        self.proj.rows()
    }

    pub fn tensors(&self) -> [&[f64]; 3] {
        [self.embeddings.as_slice(), self.proj.as_slice(), &self.bias]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 3] {
        [self.embeddings.as_mut_slice(), self.proj.as_mut_slice(), &mut self.bias]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// Sum of all entries.
    pub fn fingerprint(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).sum()
    }

    pub fn zero_grads(&self) -> ParamGrads {
        ParamGrads {
            embeddings: Matrix::zeros(self.vocab_size(), self.dim()),
            proj: Matrix::zeros(self.dim(), self.dim()),
            bias: vec![0.0; self.dim()],
        }
    }
}

/// Seeded uniform `(-scale, scale)` initialization of `E`, then `W`, then `b`.
pub fn init_params(vocab_size: usize, dim: usize, seed: u64, scale: f64) -> EncoderParams {
    assert!(dim >= 2, "encoder dimension must be at least 2");
    assert!(scale >= 0.0, "init scale must be nonnegative");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| -> Vec<f64> {
        if scale == 0.0 {
            return vec![0.0; n];
        }
        (0..n).map(|_| rng.random_range(-scale..scale)).collect()
    };
    let embeddings = Matrix::from_vec(vocab_size, dim, draw(vocab_size * dim)).expect("shape");
    let proj = Matrix::from_vec(dim, dim, draw(dim * dim)).expect("shape");
    let bias = draw(dim);
    EncoderParams {
        embeddings,
        proj,
        bias,
        pooling: Pooling::Mean,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub embeddings: Matrix,
    pub proj: Matrix,
    pub bias: Vec<f64>,
}

impl ParamGrads {
    pub fn tensors(&self) -> [&[f64]; 3] {
        [self.embeddings.as_slice(), self.proj.as_slice(), &self.bias]
    }

    pub fn accumulate(&mut self, other: &ParamGrads) -> Result<(), ShapeError> {
        self.embeddings.add_scaled(&other.embeddings, 1.0)?;
        self.proj.add_scaled(&other.proj, 1.0)?;
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, c: f64) {
        self.embeddings.scale(c);
        self.proj.scale(c);
        self.bias.iter_mut().for_each(|x| *x *= c);
    }
}

/// Sentence representations plus the forward cache needed for backward.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedBatch {
    /// `N × d` outputs.
    pub reps: Matrix,
    /// `N × d` mean-pooled embeddings.
    pub pooled: Matrix,
    pub ids: Vec<Vec<u32>>,
}

fn check_ids(batch: &[Vec<u32>], vocab_size: usize) -> Result<(), EncoderError> {
    for (i, seq) in batch.iter().enumerate() {
        if seq.is_empty() {
            return Err(EncoderError::EmptySequence { sentence: i });
        }
        if let Some(&id) = seq.iter().find(|&&id| id as usize >= vocab_size) {
            return Err(EncoderError::IdOutOfRange { id, vocab_size });
        }
    }
    Ok(())
}

pub fn encode(batch: &[Vec<u32>], params: &EncoderParams) -> Result<EncodedBatch, EncoderError> {
    check_ids(batch, params.vocab_size())?;
    let d = params.dim();
    let n = batch.len();
    let mut pooled = Matrix::zeros(n, d);
    let mut reps = Matrix::zeros(n, d);
    for (i, seq) in batch.iter().enumerate() {
        let inv = 1.0 / seq.len() as f64;
        let row = pooled.row_mut(i);
        for &t in seq {
            for (p, e) in row.iter_mut().zip(params.embeddings.row(t as usize)) {
                *p += e;
            }
        }
        row.iter_mut().for_each(|p| *p *= inv);
        let row = pooled.row(i);
        let out = reps.row_mut(i);
        for k in 0..d {
            let z: f64 = params.proj.row(k).iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + params.bias[k];
            out[k] = z.tanh();
        }
    }
    Ok(EncodedBatch {
        reps,
        pooled,
        ids: batch.to_vec(),
    })
}

/// Gradients of `Σ grad_reps ⊙ reps` with respect to `E`, `W` and `b`.
pub fn encode_backward(
    batch: &EncodedBatch,
    params: &EncoderParams,
    grad_reps: &Matrix,
) -> Result<ParamGrads, EncoderError> {
    grad_reps.check_shape(batch.reps.shape())?;
    let d = params.dim();
    let mut grads = params.zero_grads();
    let mut dz = vec![0.0; d];
    let mut dpooled = vec![0.0; d];
    for (i, seq) in batch.ids.iter().enumerate() {
        let h = batch.reps.row(i);
        let g = grad_reps.row(i);
        for k in 0..d {
            dz[k] = g[k] * (1.0 - h[k] * h[k]);
        }
        let x = batch.pooled.row(i);
        for k in 0..d {
            grads.bias[k] += dz[k];
            let wrow = grads.proj.row_mut(k);
            for j in 0..d {
                wrow[j] += dz[k] * x[j];
            }
        }
        dpooled.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..d {
            for (j, w) in params.proj.row(k).iter().enumerate() {
                dpooled[j] += w * dz[k];
            }
        }
        let inv = 1.0 / seq.len() as f64;
        for &t in seq {
            for (e, dp) in grads.embeddings.row_mut(t as usize).iter_mut().zip(&dpooled) {
                *e += dp * inv;
            }
        }
    }
    Ok(grads)
}

const CHECKPOINT_FORMAT: &str = "csembed-encoder";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    vocab_size: usize,
    dim: usize,
    pooling: Pooling,
    tensors: BTreeMap<String, Vec<f64>>,
}

impl EncoderParams {
    /// Versioned JSON container with shapes and row-major values.
    pub fn to_json(&self) -> String {
        let tensors = BTreeMap::from([
            ("embeddings".to_string(), self.embeddings.as_slice().to_vec()),
            ("proj".to_string(), self.proj.as_slice().to_vec()),
            ("bias".to_string(), self.bias.clone()),
        ]);
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            vocab_size: self.vocab_size(),
            dim: self.dim(),
            pooling: self.pooling,
            tensors,
        };
        serde_json::to_string(&ck).expect("checkpoint serialization")
    }

    pub fn from_json(text: &str) -> Result<Self, EncoderError> {
        let bad = |m: String| EncoderError::Checkpoint(m);
        let mut ck: Checkpoint = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported format {} v{}", ck.format, ck.version)));
        }
        let mut take = |name: &str| ck.tensors.remove(name).ok_or_else(|| bad(format!("missing tensor '{name}'")));
        let (v, d) = (ck.vocab_size, ck.dim);
        let embeddings = Matrix::from_vec(v, d, take("embeddings")?)?;
        let proj = Matrix::from_vec(d, d, take("proj")?)?;
        let bias = take("bias")?;
        if bias.len() != d || d < 2 {
            return Err(bad(format!("bias length {} does not match dim {d}", bias.len())));
        }
        let params = Self {
            embeddings,
            proj,
            bias,
            pooling: ck.pooling,
        };
        if !params.is_finite() {
            return Err(bad("non-finite parameter".into()));
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<(), EncoderError> {
        fs::write(path, self.to_json()).map_err(|source| EncoderError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, EncoderError> {
        let text = fs::read_to_string(path).map_err(|source| EncoderError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}
