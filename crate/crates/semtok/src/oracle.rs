//! Reference computations that check the kernels by independent routes.
//!
//! Gradients come from finite differences of the forward pass and the PCA
//! axis from a dense covariance eigendecomposition. Edit distances are
//! checked against memoized exhaustive recursion.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semtok_core::fusion::{fuse_sequential, fuse_sequential_backward, FusionConfig, MaskPair};
use semtok_core::{Matrix, Result};

/// Step size of the central differences.
pub const FD_EPS: f64 = 1e-6;

/// Magnitude below which gradient entries are compared absolutely.
///
/// Central differences at `FD_EPS` carry roughly `1e-10` of absolute
/// round-off, so relative error is only meaningful above this floor.
pub const REL_ERR_FLOOR: f64 = 1e-3;

/// `|a - b| / max(|a|, |b|, REL_ERR_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERR_FLOOR)
}

pub fn max_relative_error(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| relative_error(*x, *y))
        .fold(0.0, f64::max)
}

fn loss(q: &Matrix, kv: &Matrix, cfg: &FusionConfig, masks: &MaskPair, grad_out: &Matrix) -> Result<f64> {
    let out = fuse_sequential(q, kv, cfg, masks)?.matrix;
    Ok(out.as_slice().iter().zip(grad_out.as_slice()).map(|(o, g)| o * g).sum())
}

fn perturbed(m: &Matrix, idx: usize, delta: f64) -> Matrix {
    let mut v = m.as_slice().to_vec();
    v[idx] += delta;
    Matrix::new(m.rows(), m.cols(), v).expect("perturbation keeps values finite")
}

/// Central-difference gradients of `sum(grad_out ⊙ fuse_sequential(q, kv))`,
/// using only the forward pass.
pub fn numeric_fusion_grads(
    q: &Matrix,
    kv: &Matrix,
    cfg: &FusionConfig,
    masks: &MaskPair,
    grad_out: &Matrix,
) -> Result<(Matrix, Matrix)> {
    let mut cfg = cfg.clone();
    cfg.train_mode = false;
    let diff = |which: &Matrix, is_q: bool| -> Result<Matrix> {
        let mut g = Vec::with_capacity(which.as_slice().len());
        for idx in 0..which.as_slice().len() {
            let plus = perturbed(which, idx, FD_EPS);
            let minus = perturbed(which, idx, -FD_EPS);
            let (lp, lm) = if is_q {
                (
                    loss(&plus, kv, &cfg, masks, grad_out)?,
                    loss(&minus, kv, &cfg, masks, grad_out)?,
                )
            } else {
                (
                    loss(q, &plus, &cfg, masks, grad_out)?,
                    loss(q, &minus, &cfg, masks, grad_out)?,
                )
            };
            g.push((lp - lm) / (2.0 * FD_EPS));
        }
        Ok(Matrix::new(which.rows(), which.cols(), g).expect("finite differences are finite"))
    };
    Ok((diff(q, true)?, diff(kv, false)?))
}

/// One seeded random attention problem.
#[derive(Debug, Clone)]
pub struct GradInstance {
    pub q: Matrix,
    pub kv: Matrix,
    pub cfg: FusionConfig,
    pub masks: MaskPair,
    pub grad_out: Matrix,
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let v = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
    Matrix::new(rows, cols, v).expect("uniform samples are finite")
}

/// `t, m, d` in `1..=max_dim`; every other instance carries random masks
/// with at least one valid key and one valid query.
pub fn random_grad_instance(seed: u64, max_dim: usize) -> GradInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = rng.random_range(1..=max_dim);
    let m = rng.random_range(1..=max_dim);
    let d = rng.random_range(1..=max_dim);
    let q = random_matrix(&mut rng, t, d, 1.5);
    let kv = random_matrix(&mut rng, m, d, 1.5);
    let grad_out = random_matrix(&mut rng, t, d, 1.0);
    let masks = if seed % 2 == 1 {
        let mut src: Vec<bool> = (0..m).map(|_| rng.random_bool(0.75)).collect();
        let mut tgt: Vec<bool> = (0..t).map(|_| rng.random_bool(0.75)).collect();
        let keep_key = rng.random_range(0..m);
        let keep_query = rng.random_range(0..t);
        src[keep_key] = true;
        tgt[keep_query] = true;
        MaskPair {
            tgt_mask: Some(tgt),
            src_mask: Some(src),
        }
    } else {
        MaskPair::none()
    };
    let cfg = FusionConfig {
        gamma: (d as f64).sqrt() * rng.random_range(0.5..2.0),
        ..FusionConfig::for_width(d)
    };
    GradInstance {
        q,
        kv,
        cfg,
        masks,
        grad_out,
    }
}

/// Max relative error between analytic and finite-difference gradients.
pub fn gradient_check(inst: &GradInstance) -> Result<f64> {
    let (aq, akv) = fuse_sequential_backward(&inst.q, &inst.kv, &inst.cfg, &inst.masks, &inst.grad_out)?;
    let (nq, nkv) = numeric_fusion_grads(&inst.q, &inst.kv, &inst.cfg, &inst.masks, &inst.grad_out)?;
    Ok(max_relative_error(&aq, &nq).max(max_relative_error(&akv, &nkv)))
}

/// Top eigenvector of the dense `d × d` sample covariance `Hcᵀ Hc / (n-1)`
/// together with the gap to the second eigenvalue (`inf` when `d = 1`).
pub fn covariance_top_axis(h: &Matrix) -> (Vec<f64>, f64) {
    let (n, d) = h.shape();
    let x = DMatrix::from_row_slice(n, d, h.as_slice());
    let mean = x.row_mean();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = order[0];
    let gap = if d > 1 {
        eig.eigenvalues[top] - eig.eigenvalues[order[1]]
    } else {
        f64::INFINITY
    };
    (eig.eigenvectors.column(top).iter().copied().collect(), gap)
}

pub fn abs_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).abs()
}

/// Random `n × d` matrix (`n` in `2..=max_dim`, `d` in `1..=max_dim`) whose
/// covariance has a top eigenvalue separated from the next by more than `1e-3`.
pub fn random_pca_instance(seed: u64, max_dim: usize) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.random_range(2..=max_dim);
        let d = rng.random_range(1..=max_dim);
        let h = random_matrix(&mut rng, n, d, 3.0);
        let (axis, gap) = covariance_top_axis(&h);
        if axis.iter().all(|x| x.is_finite()) && (gap.is_infinite() || gap > 1e-3) {
            return h;
        }
    }
}

/// Minimal unit-cost edit distance by exhaustive recursion over the first
/// symbols of both suffixes, memoized on the pair of suffix lengths.
pub fn brute_force_edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    fn go<T: PartialEq>(a: &[T], b: &[T], memo: &mut [Option<usize>], width: usize) -> usize {
        let key = a.len() * width + b.len();
        if let Some(v) = memo[key] {
            return v;
        }
        let v = match (a.split_first(), b.split_first()) {
            (None, _) => b.len(),
            (_, None) => a.len(),
            (Some((x, ra)), Some((y, rb))) => {
                let keep = go(ra, rb, memo, width) + usize::from(x != y);
                let drop_a = go(ra, b, memo, width) + 1;
                let drop_b = go(a, rb, memo, width) + 1;
                keep.min(drop_a).min(drop_b)
            }
        };
        memo[key] = Some(v);
        v
    }
    let width = b.len() + 1;
    let mut memo = vec![None; (a.len() + 1) * width];
    go(a, b, &mut memo, width)
}

/// Every sequence over `alphabet` of length `0..=max_len`.
pub fn all_sequences<T: Clone>(alphabet: &[T], max_len: usize) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(frontier.len() * alphabet.len());
        for s in &frontier {
            for a in alphabet {
                let mut t: Vec<T> = s.clone();
                t.push(a.clone());
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_small_cases() {
        assert_eq!(brute_force_edit_distance(b"kitten", b"sitting"), 3);
        assert_eq!(brute_force_edit_distance(b"", b"abc"), 3);
        assert_eq!(brute_force_edit_distance(b"abc", b"abc"), 0);
        assert_eq!(all_sequences(&[0, 1, 2], 2).len(), 1 + 3 + 9);
    }

    #[test]
    fn covariance_axis_of_a_line() {
        let h = Matrix::from_rows(&[[0.0, 0.0], [1.0, 2.0], [2.0, 4.0]]).unwrap();
        let (axis, _) = covariance_top_axis(&h);
        let expected = [1.0 / 5f64.sqrt(), 2.0 / 5f64.sqrt()];
        assert!(abs_cosine(&axis, &expected) > 1.0 - 1e-12);
    }
}
