//! Cross-lingual contrastive loss family over monolingual and code-switched
//! representations, with exact gradients.
//!
//! A batch carries six `N × d` matrices: anchors, positives and hard negatives
//! for the monolingual triplets (`h`, `h⁺`, `h⁻`) and for their code-switched
//! counterparts (`ĥ`, `ĥ⁺`, `ĥ⁻`). Six anchor/positive/negative selections
//! across the two languages feed a contrastive term and a triplet term; an
//! alignment term pulls each monolingual negative towards its code-switched
//! twin.
//!
//! Every term is a sum over the batch, not a mean.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, norm, Matrix, ShapeError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("zero-norm row {row} in {what}")]
    ZeroNorm { what: &'static str, row: usize },
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid loss config: {0}")]
    Config(String),
}

/// Which of the six representation matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    /// `h`
    Anchor,
    /// `h⁺`
    Positive,
    /// `h⁻`
    Negative,
    /// `ĥ`
    CsAnchor,
    /// `ĥ⁺`
    CsPositive,
    /// `ĥ⁻`
    CsNegative,
}

impl Group {
    pub const ALL: [Group; 6] = [
        Group::Anchor,
        Group::Positive,
        Group::Negative,
        Group::CsAnchor,
        Group::CsPositive,
        Group::CsNegative,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// One of the six `(anchor, positive, negative)` selections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Combination {
    H1,
    H2,
    H3,
    H4,
    H5,
    H6,
}

impl Combination {
    pub const ALL: [Combination; 6] = [
        Combination::H1,
        Combination::H2,
        Combination::H3,
        Combination::H4,
        Combination::H5,
        Combination::H6,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn groups(self) -> (Group, Group, Group) {
        use Group::*;
        match self {
            Combination::H1 => (Anchor, Positive, Negative),
            Combination::H2 => (CsAnchor, CsPositive, CsNegative),
            Combination::H3 => (Anchor, Positive, CsNegative),
            Combination::H4 => (CsAnchor, CsPositive, Negative),
            Combination::H5 => (Anchor, CsAnchor, Negative),
            Combination::H6 => (Positive, CsPositive, CsNegative),
        }
    }
}

impl fmt::Display for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "H{}", self.index() + 1)
    }
}

impl FromStr for Combination {
    type Err = LossError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "H1" => Ok(Combination::H1),
            "H2" => Ok(Combination::H2),
            "H3" => Ok(Combination::H3),
            "H4" => Ok(Combination::H4),
            "H5" => Ok(Combination::H5),
            "H6" => Ok(Combination::H6),
            other => Err(LossError::Config(format!("unknown combination '{other}'"))),
        }
    }
}

impl Serialize for Combination {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Combination {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How negatives are aligned across languages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegAlignMode {
    /// Cross-entropy of the row-wise softmax over the `N × N` negative
    /// similarity matrix, targeting the diagonal.
    #[default]
    Softmax,
    /// Pointwise `-log σ(sim/τ)` on each negative pair.
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub tau: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub enable_con: bool,
    pub enable_tri: bool,
    pub enable_neg: bool,
    pub combinations: Vec<Combination>,
    pub neg_mode: NegAlignMode,
}

impl Default for LossConfig {
    /// All three components, six combinations, `τ = 0.05`, `λ = 1.2`, `α = 1`.
    fn default() -> Self {
        Self {
            tau: 0.05,
            lambda: 1.2,
            alpha: 1.0,
            enable_con: true,
            enable_tri: true,
            enable_neg: true,
            combinations: Combination::ALL.to_vec(),
            neg_mode: NegAlignMode::Softmax,
        }
    }
}

/// Named component subsets: `v1`..`v6` toggle the contrastive, triplet and
/// alignment terms; `simcse` is the contrastive term on `H1` alone.
pub const VARIANTS: [&str; 7] = ["v1", "v2", "v3", "v4", "v5", "v6", "simcse"];

impl LossConfig {
    pub fn variant(name: &str) -> Result<Self, LossError> {
        let (con, tri, neg) = match name.to_ascii_lowercase().as_str() {
            "v1" => (true, false, false),
            "v2" => (false, true, false),
            "v3" => (true, false, true),
            "v4" => (false, true, true),
            "v5" => (true, true, false),
            "v6" | "concse" => (true, true, true),
            "simcse" => return Ok(Self::simcse()),
            other => return Err(LossError::Config(format!("unknown variant '{other}'"))),
        };
        Ok(Self {
            enable_con: con,
            enable_tri: tri,
            enable_neg: neg,
            ..Self::default()
        })
    }

    /// Supervised single-language contrastive objective.
    pub fn simcse() -> Self {
        Self {
            enable_tri: false,
            enable_neg: false,
            combinations: vec![Combination::H1],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), LossError> {
        let bad = |m: &str| Err(LossError::Config(m.to_string()));
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return bad("tau must be positive");
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad("lambda must be nonnegative");
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return bad("alpha must be nonnegative");
        }
        if !(self.enable_con || self.enable_tri || self.enable_neg) {
            return bad("at least one loss component must be enabled");
        }
        if (self.enable_con || self.enable_tri) && self.combinations.is_empty() {
            return bad("combinations must not be empty");
        }
        for (i, c) in self.combinations.iter().enumerate() {
            if self.combinations[..i].contains(c) {
                return Err(LossError::Config(format!("duplicate combination {c}")));
            }
        }
        Ok(())
    }

    /// Whether any enabled term reads the given group.
    pub fn uses(&self, group: Group) -> bool {
        let in_combo = (self.enable_con || self.enable_tri)
            && self.combinations.iter().any(|c| {
                let (a, p, n) = c.groups();
                a == group || p == group || n == group
            });
        let in_neg = self.enable_neg && matches!(group, Group::Negative | Group::CsNegative);
        in_combo || in_neg
    }
}

/// The six representation matrices of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct RepSextet {
    mats: [Matrix; 6],
}

impl RepSextet {
    /// Matrices in `h, h⁺, h⁻, ĥ, ĥ⁺, ĥ⁻` order; all must share a shape.
    pub fn new(mats: [Matrix; 6]) -> Result<Self, LossError> {
        let shape = mats[0].shape();
        for m in &mats[1..] {
            m.check_shape(shape)?;
        }
        if shape.0 == 0 {
            return Err(LossError::EmptyBatch);
        }
        Ok(Self { mats })
    }

    pub fn get(&self, g: Group) -> &Matrix {
        &self.mats[g.index()]
    }

    pub fn get_mut(&mut self, g: Group) -> &mut Matrix {
        &mut self.mats[g.index()]
    }

    pub fn batch_size(&self) -> usize {
        self.mats[0].rows()
    }

    pub fn dim(&self) -> usize {
        self.mats[0].cols()
    }

    pub fn zeros_like(&self) -> SextetGrads {
        SextetGrads {
            mats: std::array::from_fn(|_| Matrix::zeros(self.batch_size(), self.dim())),
        }
    }
}

/// Gradients with respect to each of the six matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SextetGrads {
    mats: [Matrix; 6],
}

impl SextetGrads {
    pub fn get(&self, g: Group) -> &Matrix {
        &self.mats[g.index()]
    }

    pub fn get_mut(&mut self, g: Group) -> &mut Matrix {
        &mut self.mats[g.index()]
    }

    fn add(&mut self, g: Group, m: &Matrix, c: f64) {
        self.mats[g.index()].add_scaled(m, c).expect("sextet shapes agree");
    }

    pub fn scale(&mut self, c: f64) {
        self.mats.iter_mut().for_each(|m| m.scale(c));
    }

    pub fn into_inner(self) -> [Matrix; 6] {
        self.mats
    }
}

/// Value and gradients of a three-input term.
#[derive(Debug, Clone, PartialEq)]
pub struct TermOutput {
    pub value: f64,
    pub grad_anchors: Matrix,
    pub grad_positives: Matrix,
    pub grad_negatives: Matrix,
}

/// Value and gradients of a two-input term.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTermOutput {
    pub value: f64,
    pub grad_left: Matrix,
    pub grad_right: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SextetOutput {
    pub value: f64,
    pub per_combination: [f64; 6],
    pub grads: SextetGrads,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub con_per_combination: [f64; 6],
    pub tri_per_combination: [f64; 6],
    pub con: f64,
    pub tri: f64,
    pub neg: f64,
    pub total: f64,
    pub grads: SextetGrads,
}

pub fn cosine_sim(u: &[f64], v: &[f64]) -> Result<f64, LossError> {
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 {
        return Err(LossError::ZeroNorm { what: "left", row: 0 });
    }
    if nv == 0.0 {
        return Err(LossError::ZeroNorm { what: "right", row: 0 });
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Row-normalized copy plus the row norms.
struct Unit {
    dirs: Matrix,
    norms: Vec<f64>,
}

fn unit_rows(m: &Matrix, what: &'static str) -> Result<Unit, LossError> {
    let mut dirs = m.clone();
    let mut norms = Vec::with_capacity(m.rows());
    for i in 0..m.rows() {
        let n = norm(m.row(i));
        if n == 0.0 || !n.is_finite() {
            return Err(LossError::ZeroNorm { what, row: i });
        }
        dirs.scale_row(i, 1.0 / n);
        norms.push(n);
    }
    Ok(Unit { dirs, norms })
}

/// Cosine similarity matrix `S[i][j] = cos(left_i, right_j)`.
fn cosine_matrix(left: &Unit, right: &Unit) -> Matrix {
    let mut s = Matrix::zeros(left.dirs.rows(), right.dirs.rows());
    for i in 0..left.dirs.rows() {
        for j in 0..right.dirs.rows() {
            s[(i, j)] = dot(left.dirs.row(i), right.dirs.row(j));
        }
    }
    s
}

/// Backpropagates `dL/dS` through `S = cos(left_i, right_j)`.
fn cosine_backward(left: &Unit, right: &Unit, s: &Matrix, ds: &Matrix, gl: &mut Matrix, gr: &mut Matrix) {
    let d = left.dirs.cols();
    for i in 0..s.rows() {
        let li = left.dirs.row(i);
        for j in 0..s.cols() {
            let g = ds[(i, j)];
            if g == 0.0 {
                continue;
            }
            let rj = right.dirs.row(j);
            let sij = s[(i, j)];
            let (cl, cr) = (g / left.norms[i], g / right.norms[j]);
            for k in 0..d {
                gl[(i, k)] += cl * (rj[k] - sij * li[k]);
                gr[(j, k)] += cr * (li[k] - sij * rj[k]);
            }
        }
    }
}

/// `log Σ exp(xs)` without overflow.
fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log Σ exp(xs) − xs[target]`, accurate when the target dominates.
fn softmax_xent(xs: &[f64], target: usize) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if xs[target] == m {
        let rest: f64 = xs
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != target)
            .map(|(_, x)| (x - m).exp())
            .sum();
        rest.ln_1p()
    } else {
        m - xs[target] + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
    }
}

fn check_triple(a: &Matrix, p: &Matrix, n: &Matrix) -> Result<(), LossError> {
    p.check_shape(a.shape())?;
    n.check_shape(a.shape())?;
    if a.rows() == 0 {
        return Err(LossError::EmptyBatch);
    }
    Ok(())
}

/// Contrastive term with hard negatives:
/// `Σ_i −log( e^{s(a_i,p_i)/τ} / Σ_j (e^{s(a_i,p_j)/τ} + e^{s(a_i,n_j)/τ}) )`.
pub fn contrastive_term(
    anchors: &Matrix,
    positives: &Matrix,
    negatives: &Matrix,
    tau: f64,
) -> Result<TermOutput, LossError> {
    check_triple(anchors, positives, negatives)?;
    let a = unit_rows(anchors, "anchors")?;
    let p = unit_rows(positives, "positives")?;
    let n = unit_rows(negatives, "negatives")?;
    let sp = cosine_matrix(&a, &p);
    let sn = cosine_matrix(&a, &n);
    let rows = anchors.rows();
    let mut dsp = Matrix::zeros(rows, rows);
    let mut dsn = Matrix::zeros(rows, rows);
    let mut value = 0.0;
    for i in 0..rows {
        let logits: Vec<f64> = sp.row(i).iter().chain(sn.row(i)).map(|s| s / tau).collect();
        let lse = log_sum_exp(logits.iter().copied());
        value += softmax_xent(&logits, i);
        for j in 0..rows {
            dsp[(i, j)] = (sp[(i, j)] / tau - lse).exp() / tau;
            dsn[(i, j)] = (sn[(i, j)] / tau - lse).exp() / tau;
        }
        dsp[(i, i)] -= 1.0 / tau;
    }
    let mut ga = Matrix::zeros(rows, anchors.cols());
    let mut gp = ga.clone();
    let mut gn = ga.clone();
    cosine_backward(&a, &p, &sp, &dsp, &mut ga, &mut gp);
    cosine_backward(&a, &n, &sn, &dsn, &mut ga, &mut gn);
    Ok(TermOutput {
        value,
        grad_anchors: ga,
        grad_positives: gp,
        grad_negatives: gn,
    })
}

/// Triplet hinge on squared Euclidean distances:
/// `Σ_i max(0, ‖a_i − p_i‖² − ‖a_i − n_i‖² + α)`, subgradient 0 at the kink.
pub fn triplet_term(
    anchors: &Matrix,
    positives: &Matrix,
    negatives: &Matrix,
    alpha: f64,
) -> Result<TermOutput, LossError> {
    check_triple(anchors, positives, negatives)?;
    let (rows, d) = anchors.shape();
    let mut ga = Matrix::zeros(rows, d);
    let mut gp = ga.clone();
    let mut gn = ga.clone();
    let mut value = 0.0;
    for i in 0..rows {
        let (a, p, n) = (anchors.row(i), positives.row(i), negatives.row(i));
        let dp: f64 = a.iter().zip(p).map(|(x, y)| (x - y) * (x - y)).sum();
        let dn: f64 = a.iter().zip(n).map(|(x, y)| (x - y) * (x - y)).sum();
        let margin = dp - dn + alpha;
        if margin > 0.0 {
            value += margin;
            for k in 0..d {
                ga[(i, k)] += 2.0 * (n[k] - p[k]);
                gp[(i, k)] += -2.0 * (a[k] - p[k]);
                gn[(i, k)] += 2.0 * (a[k] - n[k]);
            }
        }
    }
    Ok(TermOutput {
        value,
        grad_anchors: ga,
        grad_positives: gp,
        grad_negatives: gn,
    })
}

/// Pulls each monolingual negative towards its code-switched counterpart.
pub fn align_negative(
    negatives: &Matrix,
    cs_negatives: &Matrix,
    tau: f64,
    mode: NegAlignMode,
) -> Result<PairTermOutput, LossError> {
    cs_negatives.check_shape(negatives.shape())?;
    if negatives.rows() == 0 {
        return Err(LossError::EmptyBatch);
    }
    let l = unit_rows(negatives, "negatives")?;
    let r = unit_rows(cs_negatives, "cs_negatives")?;
    let s = cosine_matrix(&l, &r);
    let rows = negatives.rows();
    let mut ds = Matrix::zeros(rows, rows);
    let mut value = 0.0;
    match mode {
        NegAlignMode::Softmax => {
            for i in 0..rows {
                let logits: Vec<f64> = s.row(i).iter().map(|x| x / tau).collect();
                let lse = log_sum_exp(logits.iter().copied());
                value += softmax_xent(&logits, i);
                for j in 0..rows {
                    ds[(i, j)] = (s[(i, j)] / tau - lse).exp() / tau;
                }
                ds[(i, i)] -= 1.0 / tau;
            }
        }
        NegAlignMode::Sigmoid => {
            for i in 0..rows {
                let x = s[(i, i)] / tau;
                // −log σ(x) = softplus(−x)
                value += (-x).max(0.0) + (-x.abs()).exp().ln_1p();
                let sig_neg = 1.0 / (1.0 + x.exp());
                ds[(i, i)] = -sig_neg / tau;
            }
        }
    }
    let mut gl = Matrix::zeros(rows, negatives.cols());
    let mut gr = gl.clone();
    cosine_backward(&l, &r, &s, &ds, &mut gl, &mut gr);
    Ok(PairTermOutput {
        value,
        grad_left: gl,
        grad_right: gr,
    })
}

fn over_combinations(
    reps: &RepSextet,
    combinations: &[Combination],
    term: impl Fn(&Matrix, &Matrix, &Matrix) -> Result<TermOutput, LossError>,
) -> Result<SextetOutput, LossError> {
    let mut per = [0.0; 6];
    let mut grads = reps.zeros_like();
    // Fixed H1..H6 order regardless of how the selection was listed.
    for c in Combination::ALL.iter().filter(|c| combinations.contains(c)) {
        let (a, p, n) = c.groups();
        let out = term(reps.get(a), reps.get(p), reps.get(n))?;
        per[c.index()] = out.value;
        grads.add(a, &out.grad_anchors, 1.0);
        grads.add(p, &out.grad_positives, 1.0);
        grads.add(n, &out.grad_negatives, 1.0);
    }
    Ok(SextetOutput {
        value: per.iter().sum(),
        per_combination: per,
        grads,
    })
}

/// Sum of the contrastive term over the selected combinations.
pub fn cross_contrastive(reps: &RepSextet, cfg: &LossConfig) -> Result<SextetOutput, LossError> {
    over_combinations(reps, &cfg.combinations, |a, p, n| contrastive_term(a, p, n, cfg.tau))
}

/// Sum of the triplet term over the selected combinations.
pub fn cross_triplet(reps: &RepSextet, cfg: &LossConfig) -> Result<SextetOutput, LossError> {
    over_combinations(reps, &cfg.combinations, |a, p, n| triplet_term(a, p, n, cfg.alpha))
}

/// `con + λ·tri + neg` over the enabled components.
pub fn total_loss(reps: &RepSextet, cfg: &LossConfig) -> Result<LossBreakdown, LossError> {
    cfg.validate()?;
    let mut grads = reps.zeros_like();
    let mut con_per = [0.0; 6];
    let mut tri_per = [0.0; 6];
    let (mut con, mut tri, mut neg) = (0.0, 0.0, 0.0);
    if cfg.enable_con {
        let out = cross_contrastive(reps, cfg)?;
        con_per = out.per_combination;
        con = out.value;
        for g in Group::ALL {
            grads.add(g, out.grads.get(g), 1.0);
        }
    }
    if cfg.enable_tri {
        let out = cross_triplet(reps, cfg)?;
        tri_per = out.per_combination;
        tri = out.value;
        for g in Group::ALL {
            grads.add(g, out.grads.get(g), cfg.lambda);
        }
    }
    if cfg.enable_neg {
        let out = align_negative(
            reps.get(Group::Negative),
            reps.get(Group::CsNegative),
            cfg.tau,
            cfg.neg_mode,
        )?;
        neg = out.value;
        grads.add(Group::Negative, &out.grad_left, 1.0);
        grads.add(Group::CsNegative, &out.grad_right, 1.0);
    }
    Ok(LossBreakdown {
        con_per_combination: con_per,
        tri_per_combination: tri_per,
        con,
        tri,
        neg,
        total: con + cfg.lambda * tri + neg,
        grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_sim(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_sim(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine_sim(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(cosine_sim(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn contrastive_single_row() {
        let out = contrastive_term(&m(&[&[1.0, 0.0]]), &m(&[&[1.0, 0.0]]), &m(&[&[0.0, 1.0]]), 0.05).unwrap();
        let expected = (-20.0f64).exp().ln_1p();
        assert!((out.value - expected).abs() < 1e-20);
        assert!((out.value - 2.061e-9).abs() < 1e-12);
    }

    #[test]
    fn contrastive_symmetric_case_is_log2() {
        let a = m(&[&[1.0, 0.0]]);
        let p = m(&[&[0.6, 0.8]]);
        let n = m(&[&[0.6, -0.8]]);
        let out = contrastive_term(&a, &p, &n, 0.05).unwrap();
        assert!((out.value - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn contrastive_survives_tiny_temperature() {
        let a = m(&[&[1.0, 0.2], &[0.3, 1.0]]);
        let out = contrastive_term(&a, &a, &m(&[&[-1.0, 0.1], &[0.5, -1.0]]), 0.001).unwrap();
        assert!(out.value.is_finite());
        assert!(out.grad_anchors.is_finite());
    }

    #[test]
    fn contrastive_zero_norm_row() {
        let err = contrastive_term(&m(&[&[0.0, 0.0]]), &m(&[&[1.0, 0.0]]), &m(&[&[0.0, 1.0]]), 0.1).unwrap_err();
        assert_eq!(err, LossError::ZeroNorm { what: "anchors", row: 0 });
    }

    #[test]
    fn triplet_examples() {
        let a = m(&[&[0.0, 0.0]]);
        let n = m(&[&[2.0, 0.0]]);
        assert_eq!(triplet_term(&a, &a, &n, 1.0).unwrap().value, 0.0);
        assert_eq!(triplet_term(&a, &a, &a, 0.7).unwrap().value, 0.7);
        // Exactly on the kink: value 0, subgradient 0.
        let kink = triplet_term(&a, &a, &n, 4.0).unwrap();
        assert_eq!(kink.value, 0.0);
        assert_eq!(kink.grad_anchors.max_abs(), 0.0);
    }

    #[test]
    fn align_negative_examples() {
        let one = align_negative(&m(&[&[0.3, 0.4]]), &m(&[&[-1.0, 2.0]]), 0.05, NegAlignMode::Softmax).unwrap();
        assert_eq!(one.value, 0.0);
        let e = m(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let two = align_negative(&e, &e, 0.05, NegAlignMode::Softmax).unwrap();
        let expected = 2.0 * (-20.0f64).exp().ln_1p();
        assert!((two.value - expected).abs() < 1e-20);
        assert!((two.value - 4.12e-9).abs() < 1e-11);
        let sig = align_negative(&e, &e, 1.0, NegAlignMode::Sigmoid).unwrap();
        let expected = 2.0 * (1.0 + (-1.0f64).exp()).ln();
        assert!((sig.value - expected).abs() < 1e-14);
    }

    #[test]
    fn combination_table() {
        use Group::*;
        assert_eq!(Combination::H3.groups(), (Anchor, Positive, CsNegative));
        assert_eq!(Combination::H5.groups(), (Anchor, CsAnchor, Negative));
        assert_eq!(Combination::H6.groups(), (Positive, CsPositive, CsNegative));
        assert_eq!("h4".parse::<Combination>().unwrap(), Combination::H4);
        assert!("H7".parse::<Combination>().is_err());
    }

    #[test]
    fn variants_and_validation() {
        let v1 = LossConfig::variant("v1").unwrap();
        assert!(v1.enable_con && !v1.enable_tri && !v1.enable_neg);
        let v6 = LossConfig::variant("v6").unwrap();
        assert!(v6.enable_con && v6.enable_tri && v6.enable_neg);
        let v4 = LossConfig::variant("v4").unwrap();
        assert!(!v4.enable_con && v4.enable_tri && v4.enable_neg);
        assert!(LossConfig::variant("v7").is_err());
        let none = LossConfig {
            enable_con: false,
            enable_tri: false,
            enable_neg: false,
            ..Default::default()
        };
        assert!(none.validate().is_err());
        assert!(LossConfig { tau: 0.0, ..Default::default() }.validate().is_err());
        let simcse = LossConfig::simcse();
        assert!(simcse.uses(Group::Negative));
        assert!(!simcse.uses(Group::CsAnchor));
    }

    #[test]
    fn total_combines_components() {
        let base = [
            m(&[&[1.0, 0.1], &[0.2, 1.0]]),
            m(&[&[0.9, 0.3], &[0.1, 0.8]]),
            m(&[&[-0.5, 1.0], &[1.0, -0.4]]),
            m(&[&[0.8, 0.2], &[0.3, 0.9]]),
            m(&[&[1.0, 0.4], &[0.2, 1.1]]),
            m(&[&[-0.4, 0.9], &[0.9, -0.3]]),
        ];
        let reps = RepSextet::new(base).unwrap();
        let cfg = LossConfig::default();
        let b = total_loss(&reps, &cfg).unwrap();
        assert!((b.total - (b.con + 1.2 * b.tri + b.neg)).abs() <= 1e-12 * b.total.abs());
        assert_eq!(b.con, b.con_per_combination.iter().sum::<f64>());
    }

    #[test]
    fn toml_config_keys() {
        let cfg: LossConfig = toml::from_str(
            "tau = 0.1\nlambda = 1.5\nalpha = 0.5\nenable_con = true\nenable_tri = false\nenable_neg = true\ncombinations = [\"H1\", \"H5\"]\n",
        )
        .unwrap();
        assert_eq!(cfg.combinations, [Combination::H1, Combination::H5]);
        assert_eq!(cfg.tau, 0.1);
        assert!(!cfg.enable_tri);
    }
}
