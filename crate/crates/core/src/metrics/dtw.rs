//! Dynamic time warping over mel-cepstral frames.

use alloc::vec;
use alloc::vec::Vec;

use super::mel::MelCepstra;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DtwAlignment {
    /// Monotone, contiguous `(frame_a, frame_b)` pairs from `(0, 0)` to the
    /// last frame of each sequence.
    pub path: Vec<(usize, usize)>,
    /// Summed frame distance along `path`.
    pub cost: f64,
}

/// Euclidean distance over `c_1..c_K` (energy term excluded).
pub fn cepstral_distance(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a[1..].iter().zip(&b[1..]).map(|(x, y)| (x - y) * (x - y)).sum())
}

pub(crate) fn check_orders(a: &MelCepstra, b: &MelCepstra) -> Result<()> {
    if a.order() != b.order() {
        return Err(Error::OrderMismatch {
            left: a.order(),
            right: b.order(),
        });
    }
    Ok(())
}

/// Minimum-cost alignment with steps `(1,0)`, `(0,1)` and `(1,1)`.
///
/// On equal cumulative costs the backtrace prefers the diagonal, then a step
/// in `a`, then a step in `b`.
pub fn dtw_align(a: &MelCepstra, b: &MelCepstra) -> Result<DtwAlignment> {
    check_orders(a, b)?;
    let (n, m) = (a.frames(), b.frames());
    let mut acc = vec![f64::INFINITY; n * m];
    for i in 0..n {
        for j in 0..m {
            let d = cepstral_distance(a.frame(i), b.frame(j));
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 {
                    acc[(i - 1) * m + j - 1]
                } else {
                    f64::INFINITY
                };
                let up = if i > 0 { acc[(i - 1) * m + j] } else { f64::INFINITY };
                let left = if j > 0 { acc[i * m + j - 1] } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            acc[i * m + j] = best + d;
        }
    }

    let mut path = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n - 1, m - 1);
    path.push((i, j));
    while i > 0 || j > 0 {
        let diag = if i > 0 && j > 0 {
            acc[(i - 1) * m + j - 1]
        } else {
            f64::INFINITY
        };
        let up = if i > 0 { acc[(i - 1) * m + j] } else { f64::INFINITY };
        let left = if j > 0 { acc[i * m + j - 1] } else { f64::INFINITY };
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
        path.push((i, j));
    }
    path.reverse();
    Ok(DtwAlignment {
        path,
        cost: acc[n * m - 1],
    })
}
