//! Fusing projected semantic embeddings into acoustic embeddings.
//!
//! Global tokens are broadcast-added to every acoustic position. Token
//! sequences are merged with single-head scaled dot-product attention where
//! the acoustic sequence supplies the queries and the projected semantic
//! sequence supplies both keys and values.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::dot;
use crate::strategies::{GlobalToken, SemanticSequence};
use crate::{Error, Matrix, Result};

/// Score written into masked attention positions before the softmax.
pub const DEFAULT_MASK_FILL: f64 = -6e4;
/// Dropout rate used when training mode is on and no rate is given.
pub const DEFAULT_TRAIN_DROPOUT: f64 = 0.1;

/// Linear map from semantic width `d_in` to acoustic width `d_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    weights: Matrix,
}

impl ProjectionMatrix {
    /// `weights` is `d_out × d_in`.
    pub fn new(weights: Matrix) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        Ok(Self { weights })
    }

    /// Seeded uniform initialisation in `[-1/sqrt(d_in), 1/sqrt(d_in)]`.
    pub fn seeded(d_out: usize, d_in: usize, seed: u64) -> Result<Self> {
        if d_out == 0 || d_in == 0 {
            return Err(Error::EmptyMatrix);
        }
        let bound = 1.0 / libm::sqrt(d_in as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..d_out * d_in).map(|_| rng.random_range(-bound..=bound)).collect();
        Self::new(Matrix::new(d_out, d_in, data)?)
    }

    pub fn d_in(&self) -> usize {
        self.weights.cols()
    }

    pub fn d_out(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d_in() {
            return Err(Error::WidthMismatch {
                left: self.d_in(),
                right: x.len(),
            });
        }
        Ok(self.weights.iter_rows().map(|w| dot(w, x)).collect())
    }

    /// Projects every row of `x` (`m × d_in` → `m × d_out`).
    pub fn apply_rows(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.d_in() {
            return Err(Error::WidthMismatch {
                left: self.d_in(),
                right: x.cols(),
            });
        }
        let mut data = Vec::with_capacity(x.rows() * self.d_out());
        for row in x.iter_rows() {
            data.extend(self.weights.iter_rows().map(|w| dot(w, row)));
        }
        Ok(Matrix::from_parts(x.rows(), self.d_out(), data))
    }
}

pub fn project_global(w: &ProjectionMatrix, token: &GlobalToken) -> Result<Vec<f64>> {
    w.apply(&token.vector)
}

pub fn project_sequence(w: &ProjectionMatrix, seq: &SemanticSequence) -> Result<Matrix> {
    w.apply_rows(&seq.matrix)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    /// Temperature dividing the raw dot-product scores.
    pub gamma: f64,
    pub mask_fill: f64,
    pub dropout_p: f64,
    pub rng_seed: u64,
    pub train_mode: bool,
}

impl FusionConfig {
    /// Evaluation-mode defaults for embeddings of width `d`: `gamma = sqrt(d)`.
    pub fn for_width(d: usize) -> Self {
        Self {
            gamma: libm::sqrt(d.max(1) as f64),
            mask_fill: DEFAULT_MASK_FILL,
            dropout_p: DEFAULT_TRAIN_DROPOUT,
            rng_seed: 0,
            train_mode: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() || self.gamma <= 0.0 {
            return Err(Error::InvalidConfig(alloc::format!(
                "gamma must be positive and finite, got {}",
                self.gamma
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::InvalidConfig(alloc::format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout_p
            )));
        }
        if !self.mask_fill.is_finite() {
            return Err(Error::InvalidConfig("mask_fill must be finite".into()));
        }
        Ok(())
    }

    fn dropout_active(&self) -> bool {
        self.train_mode && self.dropout_p > 0.0
    }
}

/// Validity masks; `true` marks a real (unpadded) position.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaskPair {
    /// One entry per query (acoustic) position.
    pub tgt_mask: Option<Vec<bool>>,
    /// One entry per key (semantic) position.
    pub src_mask: Option<Vec<bool>>,
}

impl MaskPair {
    pub fn none() -> Self {
        Self::default()
    }

    fn check(&self, t: usize, m: usize) -> Result<()> {
        for (which, mask, expected) in [("target", &self.tgt_mask, t), ("source", &self.src_mask, m)] {
            if let Some(mask) = mask {
                if mask.len() != expected {
                    return Err(Error::MaskLength {
                        which,
                        expected,
                        found: mask.len(),
                    });
                }
            }
        }
        Ok(())
    }

    fn query_valid(&self, i: usize) -> bool {
        self.tgt_mask.as_ref().is_none_or(|m| m[i])
    }

    fn key_valid(&self, j: usize) -> bool {
        self.src_mask.as_ref().is_none_or(|m| m[j])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedEmbedding {
    /// `t × d` fused sequence.
    pub matrix: Matrix,
    /// `t × m` attention weights, only for sequential fusion.
    pub attention: Option<Matrix>,
}

/// Adds the projected global vector to every acoustic position.
pub fn fuse_global(acoustic: &Matrix, token: &[f64]) -> Result<FusedEmbedding> {
    if acoustic.cols() != token.len() {
        return Err(Error::WidthMismatch {
            left: acoustic.cols(),
            right: token.len(),
        });
    }
    let mut out = acoustic.clone();
    for i in 0..out.rows() {
        for (x, s) in out.row_mut(i).iter_mut().zip(token) {
            // x + 0.0 turns -0.0 into +0.0; a zero entry must leave x as is.
            if *s != 0.0 {
                *x += s;
            }
        }
    }
    Ok(FusedEmbedding {
        matrix: out,
        attention: None,
    })
}

fn check_shapes(q: &Matrix, kv: &Matrix, masks: &MaskPair) -> Result<()> {
    if q.rows() == 0 || kv.rows() == 0 {
        return Err(Error::EmptyMatrix);
    }
    if q.cols() != kv.cols() {
        return Err(Error::WidthMismatch {
            left: q.cols(),
            right: kv.cols(),
        });
    }
    masks.check(q.rows(), kv.rows())?;
    if (0..kv.rows()).all(|j| !masks.key_valid(j)) {
        if let Some(row) = (0..q.rows()).find(|&i| masks.query_valid(i)) {
            return Err(Error::FullyMaskedRow { row });
        }
    }
    Ok(())
}

/// Row-softmax of the masked, temperature-scaled scores. Rows of padded
/// queries come back as all zeros.
fn attention_weights(q: &Matrix, kv: &Matrix, cfg: &FusionConfig, masks: &MaskPair) -> Matrix {
    let (t, m) = (q.rows(), kv.rows());
    let mut w = Matrix::zeros(t, m);
    let mut scores = vec![0.0; m];
    for i in 0..t {
        if !masks.query_valid(i) {
            continue;
        }
        let qi = q.row(i);
        for (j, s) in scores.iter_mut().enumerate() {
            *s = if masks.key_valid(j) {
                dot(qi, kv.row(j)) / cfg.gamma
            } else {
                cfg.mask_fill
            };
        }
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let row = w.row_mut(i);
        let mut sum = 0.0;
        for (p, s) in row.iter_mut().zip(&scores) {
            *p = libm::exp(s - max);
            sum += *p;
        }
        row.iter_mut().for_each(|p| *p /= sum);
    }
    w
}

/// Inverted dropout over every element, drawn in row-major order so the
/// pattern depends only on the seed and the shape.
fn apply_dropout(w: &mut Matrix, p: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep_scale = 1.0 / (1.0 - p);
    for i in 0..w.rows() {
        for x in w.row_mut(i) {
            if rng.random::<f64>() < p {
                *x = 0.0;
            } else {
                *x *= keep_scale;
            }
        }
    }
}

fn weighted_sum(w: &Matrix, kv: &Matrix) -> Matrix {
    let (t, d) = (w.rows(), kv.cols());
    let mut out = Matrix::zeros(t, d);
    for i in 0..t {
        let wi = w.row(i).to_vec();
        let oi = out.row_mut(i);
        for (j, &a) in wi.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (o, v) in oi.iter_mut().zip(kv.row(j)) {
                *o += a * v;
            }
        }
    }
    out
}

/// Scaled dot-product attention with `q` (`t × d`) attending over `kv`
/// (`m × d`), which serves as both keys and values.
pub fn fuse_sequential(q: &Matrix, kv: &Matrix, cfg: &FusionConfig, masks: &MaskPair) -> Result<FusedEmbedding> {
    cfg.validate()?;
    check_shapes(q, kv, masks)?;
    let mut w = attention_weights(q, kv, cfg, masks);
    if cfg.dropout_active() {
        apply_dropout(&mut w, cfg.dropout_p, cfg.rng_seed);
    }
    let out = weighted_sum(&w, kv);
    Ok(FusedEmbedding {
        matrix: out,
        attention: Some(w),
    })
}

/// Analytic gradients of `sum(grad_out ⊙ fuse_sequential(q, kv))` with
/// dropout disabled. `kv` gets contributions through both its key and value
/// roles.
pub fn fuse_sequential_backward(
    q: &Matrix,
    kv: &Matrix,
    cfg: &FusionConfig,
    masks: &MaskPair,
    grad_out: &Matrix,
) -> Result<(Matrix, Matrix)> {
    cfg.validate()?;
    check_shapes(q, kv, masks)?;
    if grad_out.shape() != q.shape() {
        return Err(Error::WidthMismatch {
            left: q.rows() * q.cols(),
            right: grad_out.rows() * grad_out.cols(),
        });
    }
    let (t, m, d) = (q.rows(), kv.rows(), q.cols());
    let w = attention_weights(q, kv, cfg, masks);

    let mut grad_q = Matrix::zeros(t, d);
    let mut grad_kv = Matrix::zeros(m, d);
    let mut d_scores = vec![0.0; m];

    for i in 0..t {
        if !masks.query_valid(i) {
            continue;
        }
        let wi = w.row(i);
        let go = grad_out.row(i);

        // value path: grad_kv[j] += w[i][j] * grad_out[i]
        for (j, &a) in wi.iter().enumerate() {
            for (g, o) in grad_kv.row_mut(j).iter_mut().zip(go) {
                *g += a * o;
            }
        }

        // softmax backward: dS = P ⊙ (dP - <dP, P>), with dP[j] = <grad_out[i], v[j]>
        let mut inner = 0.0;
        for (j, ds) in d_scores.iter_mut().enumerate() {
            *ds = dot(go, kv.row(j));
            inner += *ds * wi[j];
        }
        for (j, ds) in d_scores.iter_mut().enumerate() {
            // Masked scores are constants, so nothing flows through them.
            *ds = if masks.key_valid(j) {
                wi[j] * (*ds - inner) / cfg.gamma
            } else {
                0.0
            };
        }

        // key and query paths of the score q_i · k_j
        let qi = q.row(i).to_vec();
        let gqi = grad_q.row_mut(i);
        for (j, &ds) in d_scores.iter().enumerate() {
            if ds == 0.0 {
                continue;
            }
            for (g, k) in gqi.iter_mut().zip(kv.row(j)) {
                *g += ds * k;
            }
        }
        for (j, &ds) in d_scores.iter().enumerate() {
            if ds == 0.0 {
                continue;
            }
            for (g, x) in grad_kv.row_mut(j).iter_mut().zip(&qi) {
                *g += ds * x;
            }
        }
    }
    Ok((grad_q, grad_kv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategies::{GlobalStrategy, SequenceKind};
    use approx::assert_relative_eq;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    fn eval_cfg(gamma: f64) -> FusionConfig {
        FusionConfig {
            gamma,
            ..FusionConfig::for_width(1)
        }
    }

    #[test]
    fn projection_examples() {
        let w = ProjectionMatrix::new(m(&[&[1.0, 1.0], &[2.0, 0.0]])).unwrap();
        assert_eq!(w.apply(&[3.0, 4.0]).unwrap(), vec![7.0, 6.0]);

        let id = ProjectionMatrix::new(m(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        let tok = GlobalToken {
            strategy: GlobalStrategy::Ave,
            vector: vec![0.5, -2.0],
        };
        assert_eq!(project_global(&id, &tok).unwrap(), tok.vector);

        let zero = ProjectionMatrix::new(Matrix::zeros(3, 2)).unwrap();
        let seq = SemanticSequence {
            kind: SequenceKind::Tex,
            matrix: m(&[&[1.0, 2.0], &[3.0, 4.0]]),
        };
        assert_eq!(project_sequence(&zero, &seq).unwrap(), Matrix::zeros(2, 3));
        assert_eq!(w.apply(&[1.0]), Err(Error::WidthMismatch { left: 2, right: 1 }));
    }

    #[test]
    fn seeded_projection_is_bounded_and_reproducible() {
        let a = ProjectionMatrix::seeded(8, 16, 7).unwrap();
        let b = ProjectionMatrix::seeded(8, 16, 7).unwrap();
        let c = ProjectionMatrix::seeded(8, 16, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.weights().as_slice().iter().all(|x| x.abs() <= 0.25));
    }

    #[test]
    fn global_add_examples() {
        let ea = m(&[&[1.0, 1.0], &[2.0, 2.0]]);
        let out = fuse_global(&ea, &[10.0, 20.0]).unwrap();
        assert_eq!(out.matrix, m(&[&[11.0, 21.0], &[12.0, 22.0]]));
        assert!(out.attention.is_none());
        assert_eq!(fuse_global(&ea, &[0.0, 0.0]).unwrap().matrix, ea);
        let copies = fuse_global(&Matrix::zeros(3, 2), &[4.0, 5.0]).unwrap().matrix;
        assert!(copies.iter_rows().all(|r| r == [4.0, 5.0]));
        assert!(fuse_global(&ea, &[1.0]).is_err());
    }

    #[test]
    fn two_key_scalar_example() {
        let q = m(&[&[1.0]]);
        let kv = m(&[&[1.0], &[-1.0]]);
        let out = fuse_sequential(&q, &kv, &eval_cfg(1.0), &MaskPair::none()).unwrap();
        let w = out.attention.unwrap();
        // softmax([1,-1]) = [1/(1+e^-2), e^-2/(1+e^-2)], output = tanh(1)
        let e = (-2.0f64).exp();
        assert_relative_eq!(w.get(0, 0), 1.0 / (1.0 + e), epsilon = 1e-15);
        assert_relative_eq!(w.get(0, 1), e / (1.0 + e), epsilon = 1e-15);
        assert_relative_eq!(w.get(0, 0), 0.880797, epsilon = 1e-6);
        assert_relative_eq!(out.matrix.get(0, 0), 1.0f64.tanh(), epsilon = 1e-15);
        assert_relative_eq!(out.matrix.get(0, 0), 0.761594, epsilon = 1e-6);
    }

    #[test]
    fn identical_keys_return_the_shared_row() {
        let q = m(&[&[0.3, -1.0, 2.0], &[5.0, 1.0, -4.0]]);
        let kv = m(&[&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]]);
        let out = fuse_sequential(&q, &kv, &eval_cfg(0.7), &MaskPair::none()).unwrap();
        for r in out.matrix.iter_rows() {
            for (a, b) in r.iter().zip([1.0, 2.0, 3.0]) {
                assert_relative_eq!(*a, b, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn masked_key_is_suppressed() {
        let q = m(&[&[1.0, 0.5]]);
        let kv = m(&[&[0.2, 0.4], &[3.0, 3.0]]);
        let masks = MaskPair {
            tgt_mask: None,
            src_mask: Some(vec![true, false]),
        };
        let out = fuse_sequential(&q, &kv, &eval_cfg(1.0), &masks).unwrap();
        assert!(out.attention.unwrap().get(0, 1) < 1e-30);
        assert_eq!(out.matrix.row(0), kv.row(0));
    }

    #[test]
    fn mask_errors() {
        let q = m(&[&[1.0], &[2.0]]);
        let kv = m(&[&[1.0], &[2.0], &[3.0]]);
        let bad_len = MaskPair {
            tgt_mask: Some(vec![true]),
            src_mask: None,
        };
        assert_eq!(
            fuse_sequential(&q, &kv, &eval_cfg(1.0), &bad_len).unwrap_err(),
            Error::MaskLength {
                which: "target",
                expected: 2,
                found: 1
            }
        );
        let all_masked = MaskPair {
            tgt_mask: None,
            src_mask: Some(vec![false; 3]),
        };
        assert_eq!(
            fuse_sequential(&q, &kv, &eval_cfg(1.0), &all_masked).unwrap_err(),
            Error::FullyMaskedRow { row: 0 }
        );
        assert!(fuse_sequential(&q, &m(&[&[1.0, 2.0]]), &eval_cfg(1.0), &MaskPair::none()).is_err());
    }

    #[test]
    fn padded_queries_produce_zero_rows() {
        let q = m(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let kv = m(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let masks = MaskPair {
            tgt_mask: Some(vec![true, false]),
            src_mask: None,
        };
        let out = fuse_sequential(&q, &kv, &eval_cfg(1.0), &masks).unwrap();
        assert_eq!(out.matrix.row(1), &[0.0, 0.0]);
        let w = out.attention.unwrap();
        assert_relative_eq!(w.row(0).iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_eq!(w.row(1).iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn config_validation() {
        let mut c = FusionConfig::for_width(4);
        assert_eq!(c.gamma, 2.0);
        c.gamma = 0.0;
        assert!(c.validate().is_err());
        c.gamma = 1.0;
        c.dropout_p = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn dropout_is_seeded_and_inverted() {
        let q = Matrix::new(6, 3, (0..18).map(|x| (x as f64 * 0.37).sin()).collect()).unwrap();
        let kv = Matrix::new(5, 3, (0..15).map(|x| (x as f64 * 0.91).cos()).collect()).unwrap();
        let cfg = FusionConfig {
            dropout_p: 0.5,
            train_mode: true,
            rng_seed: 11,
            ..FusionConfig::for_width(3)
        };
        let a = fuse_sequential(&q, &kv, &cfg, &MaskPair::none()).unwrap();
        let b = fuse_sequential(&q, &kv, &cfg, &MaskPair::none()).unwrap();
        assert_eq!(a, b);

        let eval = fuse_sequential(
            &q,
            &kv,
            &FusionConfig {
                train_mode: false,
                ..cfg.clone()
            },
            &MaskPair::none(),
        )
        .unwrap();
        let wa = a.attention.unwrap();
        let we = eval.attention.unwrap();
        let mut dropped = 0;
        for (x, y) in wa.as_slice().iter().zip(we.as_slice()) {
            if *x == 0.0 {
                dropped += 1;
            } else {
                assert_relative_eq!(*x, 2.0 * y, epsilon = 1e-15);
            }
        }
        assert!(dropped > 0 && dropped < 30);

        let other = fuse_sequential(&q, &kv, &FusionConfig { rng_seed: 12, ..cfg }, &MaskPair::none()).unwrap();
        assert_ne!(other.attention.unwrap(), wa);
    }

    #[test]
    fn backward_degenerate_cases() {
        let q = m(&[&[0.4]]);
        let kv = m(&[&[-1.3]]);
        let go = m(&[&[2.5]]);
        let (gq, gkv) = fuse_sequential_backward(&q, &kv, &eval_cfg(1.0), &MaskPair::none(), &go).unwrap();
        assert_eq!(gq, Matrix::zeros(1, 1));
        assert_eq!(gkv, go);

        let q = m(&[&[0.4, 1.0], &[0.1, 0.2]]);
        let kv = m(&[&[-1.3, 0.5], &[0.7, 0.7], &[1.0, 0.0]]);
        let (gq, gkv) =
            fuse_sequential_backward(&q, &kv, &eval_cfg(1.0), &MaskPair::none(), &Matrix::zeros(2, 2)).unwrap();
        assert_eq!(gq, Matrix::zeros(2, 2));
        assert_eq!(gkv, Matrix::zeros(3, 2));
    }
}
