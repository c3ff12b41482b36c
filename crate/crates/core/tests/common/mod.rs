#![allow(dead_code)]

use csembed::concse::{Combination, Group, LossConfig, NegAlignMode, RepSextet};
use csembed::linalg::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn random_sextet(rng: &mut ChaCha8Rng, n: usize, d: usize) -> RepSextet {
    RepSextet::new(std::array::from_fn(|_| random_matrix(rng, n, d))).unwrap()
}

fn naive_cos(u: &[f64], v: &[f64]) -> f64 {
    let mut uv = 0.0;
    let mut uu = 0.0;
    let mut vv = 0.0;
    for k in 0..u.len() {
        uv += u[k] * v[k];
        uu += u[k] * u[k];
        vv += v[k] * v[k];
    }
    uv / (uu.sqrt() * vv.sqrt())
}

/// Direct transcription of the hard-negative contrastive objective.
pub fn naive_contrastive(a: &Matrix, p: &Matrix, n: &Matrix, tau: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..a.rows() {
        let num = (naive_cos(a.row(i), p.row(i)) / tau).exp();
        let mut den = 0.0;
        for j in 0..a.rows() {
            den += (naive_cos(a.row(i), p.row(j)) / tau).exp();
            den += (naive_cos(a.row(i), n.row(j)) / tau).exp();
        }
        total += -(num / den).ln();
    }
    total
}

pub fn naive_triplet(a: &Matrix, p: &Matrix, n: &Matrix, alpha: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..a.rows() {
        let mut dp = 0.0;
        let mut dn = 0.0;
        for k in 0..a.cols() {
            dp += (a[(i, k)] - p[(i, k)]).powi(2);
            dn += (a[(i, k)] - n[(i, k)]).powi(2);
        }
        total += f64::max(0.0, dp - dn + alpha);
    }
    total
}

pub fn naive_align_negative(l: &Matrix, r: &Matrix, tau: f64, mode: NegAlignMode) -> f64 {
    let mut total = 0.0;
    for i in 0..l.rows() {
        match mode {
            NegAlignMode::Softmax => {
                let num = (naive_cos(l.row(i), r.row(i)) / tau).exp();
                let den: f64 = (0..l.rows()).map(|j| (naive_cos(l.row(i), r.row(j)) / tau).exp()).sum();
                total += -(num / den).ln();
            }
            NegAlignMode::Sigmoid => {
                let x = naive_cos(l.row(i), r.row(i)) / tau;
                total += -(1.0 / (1.0 + (-x).exp())).ln();
            }
        }
    }
    total
}

pub fn naive_total(reps: &RepSextet, cfg: &LossConfig) -> f64 {
    let mut total = 0.0;
    for c in &cfg.combinations {
        let (a, p, n) = c.groups();
        if cfg.enable_con {
            total += naive_contrastive(reps.get(a), reps.get(p), reps.get(n), cfg.tau);
        }
        if cfg.enable_tri {
            total += cfg.lambda * naive_triplet(reps.get(a), reps.get(p), reps.get(n), cfg.alpha);
        }
    }
    if cfg.enable_neg {
        total += naive_align_negative(
            reps.get(Group::Negative),
            reps.get(Group::CsNegative),
            cfg.tau,
            cfg.neg_mode,
        );
    }
    total
}

/// Central differences of `f` with respect to every entry of `x`.
pub fn numeric_grad(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut work = x.to_vec();
    (0..x.len())
        .map(|i| {
            work[i] = x[i] + h;
            let up = f(&work);
            work[i] = x[i] - h;
            let down = f(&work);
            work[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − n‖ / max(‖a‖ + ‖n‖, 1e-12)`.
pub fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt()
        + numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    diff / scale.max(1e-12)
}

pub const STEP: f64 = 1e-5;
pub const SHAPES: [(usize, usize); 6] = [(1, 3), (1, 8), (2, 3), (2, 8), (4, 3), (4, 8)];

/// Worst relative error of each loss's analytic gradient over
/// `instances` random draws per shape.
pub fn gradient_suite(instances: usize, seed: u64) -> Vec<(&'static str, f64)> {
    use csembed::concse::*;
    let mut r = rng(seed);
    let mut worst: Vec<(&'static str, f64)> = [
        "contrastive_term",
        "cross_contrastive",
        "triplet_term",
        "cross_triplet",
        "align_negative",
        "total_loss",
        "encode_backward",
    ]
    .iter()
    .map(|&n| (n, 0.0))
    .collect();
    let mut bump = |name: &str, e: f64| {
        let w = worst.iter_mut().find(|(n, _)| *n == name).unwrap();
        w.1 = w.1.max(e);
    };
    for _ in 0..instances {
        for &(n, d) in &SHAPES {
            let tau = r.random_range(0.05..1.0);
            let alpha = r.random_range(0.1..2.0);
            let m: [Matrix; 3] = std::array::from_fn(|_| random_matrix(&mut r, n, d));

            let out = contrastive_term(&m[0], &m[1], &m[2], tau).unwrap();
            let analytic = [&out.grad_anchors, &out.grad_positives, &out.grad_negatives];
            for k in 0..3 {
                let num = numeric_grad(m[k].as_slice(), STEP, |x| {
                    let mut mm = m.clone();
                    mm[k] = Matrix::from_vec(n, d, x.to_vec()).unwrap();
                    contrastive_term(&mm[0], &mm[1], &mm[2], tau).unwrap().value
                });
                bump("contrastive_term", rel_error(analytic[k].as_slice(), &num));
            }

            let out = triplet_term(&m[0], &m[1], &m[2], alpha).unwrap();
            let analytic = [&out.grad_anchors, &out.grad_positives, &out.grad_negatives];
            for k in 0..3 {
                let num = numeric_grad(m[k].as_slice(), STEP, |x| {
                    let mut mm = m.clone();
                    mm[k] = Matrix::from_vec(n, d, x.to_vec()).unwrap();
                    triplet_term(&mm[0], &mm[1], &mm[2], alpha).unwrap().value
                });
                bump("triplet_term", rel_error(analytic[k].as_slice(), &num));
            }

            for mode in [NegAlignMode::Softmax, NegAlignMode::Sigmoid] {
                let out = align_negative(&m[0], &m[1], tau, mode).unwrap();
                let analytic = [&out.grad_left, &out.grad_right];
                for k in 0..2 {
                    let num = numeric_grad(m[k].as_slice(), STEP, |x| {
                        let mut mm = m.clone();
                        mm[k] = Matrix::from_vec(n, d, x.to_vec()).unwrap();
                        align_negative(&mm[0], &mm[1], tau, mode).unwrap().value
                    });
                    bump("align_negative", rel_error(analytic[k].as_slice(), &num));
                }
            }

            let reps = random_sextet(&mut r, n, d);
            let cfg = LossConfig {
                tau,
                alpha,
                lambda: r.random_range(0.5..2.0),
                ..LossConfig::default()
            };
            let sextet_check = |name: &'static str,
                                analytic: &dyn Fn(&RepSextet) -> (f64, Vec<Matrix>),
                                bump: &mut dyn FnMut(&str, f64)| {
                let (_, grads) = analytic(&reps);
                for g in Group::ALL {
                    let num = numeric_grad(reps.get(g).as_slice(), STEP, |x| {
                        let mut rr = reps.clone();
                        *rr.get_mut(g) = Matrix::from_vec(n, d, x.to_vec()).unwrap();
                        analytic(&rr).0
                    });
                    bump(name, rel_error(grads[g.index()].as_slice(), &num));
                }
            };
            let cc = |x: &RepSextet| {
                let o = cross_contrastive(x, &cfg).unwrap();
                (o.value, o.grads.into_inner().to_vec())
            };
            let ct = |x: &RepSextet| {
                let o = cross_triplet(x, &cfg).unwrap();
                (o.value, o.grads.into_inner().to_vec())
            };
            let tl = |x: &RepSextet| {
                let o = total_loss(x, &cfg).unwrap();
                (o.total, o.grads.into_inner().to_vec())
            };
            sextet_check("cross_contrastive", &cc, &mut bump);
            sextet_check("cross_triplet", &ct, &mut bump);
            sextet_check("total_loss", &tl, &mut bump);

            bump("encode_backward", encoder_grad_error(&mut r, n, d));
        }
    }
    worst
}

/// Checks `encode_backward` on the scalar `Σ G ⊙ encode(ids)`.
pub fn encoder_grad_error(r: &mut ChaCha8Rng, n: usize, d: usize) -> f64 {
    use csembed::encoder::{encode, encode_backward, init_params};
    let vocab = 7;
    let mut params = init_params(vocab, d, r.random(), 0.5);
    params.bias.iter_mut().for_each(|b| *b = r.random_range(-0.5..0.5));
    let ids: Vec<Vec<u32>> = (0..n)
        .map(|_| (0..r.random_range(1..5)).map(|_| r.random_range(0..vocab as u32)).collect())
        .collect();
    let g = random_matrix(r, n, d);
    let objective = |p: &csembed::encoder::EncoderParams| -> f64 {
        let reps = encode(&ids, p).unwrap().reps;
        reps.as_slice().iter().zip(g.as_slice()).map(|(a, b)| a * b).sum()
    };
    let enc = encode(&ids, &params).unwrap();
    let grads = encode_backward(&enc, &params, &g).unwrap();
    let mut worst: f64 = 0.0;
    for t in 0..3 {
        let base = params.tensors()[t].to_vec();
        let num = numeric_grad(&base, STEP, |x| {
            let mut p = params.clone();
            p.tensors_mut()[t].copy_from_slice(x);
            objective(&p)
        });
        worst = worst.max(rel_error(grads.tensors()[t], &num));
    }
    worst
}

/// `(vectorized, naive)` value pairs for every loss on random instances.
pub fn oracle_pairs(instances: usize, seed: u64) -> Vec<(&'static str, f64, f64)> {
    use csembed::concse::*;
    let mut r = rng(seed);
    let mut out = Vec::new();
    for i in 0..instances {
        let (n, d) = SHAPES[i % SHAPES.len()];
        let tau = r.random_range(0.05..1.0);
        let alpha = r.random_range(0.1..2.0);
        let reps = random_sextet(&mut r, n, d);
        let (a, p, ng) = (reps.get(Group::Anchor), reps.get(Group::Positive), reps.get(Group::Negative));
        out.push(("contrastive_term", contrastive_term(a, p, ng, tau).unwrap().value, naive_contrastive(a, p, ng, tau)));
        out.push(("triplet_term", triplet_term(a, p, ng, alpha).unwrap().value, naive_triplet(a, p, ng, alpha)));
        for mode in [NegAlignMode::Softmax, NegAlignMode::Sigmoid] {
            let cn = reps.get(Group::CsNegative);
            out.push(("align_negative", align_negative(ng, cn, tau, mode).unwrap().value, naive_align_negative(ng, cn, tau, mode)));
        }
        let cfg = LossConfig {
            tau,
            alpha,
            lambda: r.random_range(0.0..2.0),
            ..LossConfig::default()
        };
        let con_only = LossConfig {
            enable_tri: false,
            enable_neg: false,
            ..cfg.clone()
        };
        out.push(("cross_contrastive", cross_contrastive(&reps, &cfg).unwrap().value, naive_total(&reps, &con_only)));
        let naive_tri: f64 = Combination::ALL
            .iter()
            .map(|c| {
                let (a, p, n) = c.groups();
                naive_triplet(reps.get(a), reps.get(p), reps.get(n), alpha)
            })
            .sum();
        out.push(("cross_triplet", cross_triplet(&reps, &cfg).unwrap().value, naive_tri));
        out.push(("total_loss", total_loss(&reps, &cfg).unwrap().total, naive_total(&reps, &cfg)));
    }
    out
}

/// All six combinations in order.
pub fn all_combinations() -> Vec<Combination> {
    Combination::ALL.to_vec()
}
