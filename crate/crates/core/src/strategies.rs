//! Semantic token strategies over final-layer hidden states.
//!
//! Five strategies pool a `n × d` hidden-state matrix into one global
//! vector; two keep the whole token sequence for attention-based fusion.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::linalg::{dot, norm, symmetric_eigen};
use crate::{Error, HiddenStateMatrix, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GlobalStrategy {
    Ave,
    Pca,
    Last,
    EisWord,
    EisSentence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SequenceKind {
    /// Tokens of the written sentence.
    Tex,
    /// Tokens of the phoneme string of the sentence.
    Pho,
}

/// Any of the seven token strategies, as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Global(GlobalStrategy),
    Sequence(SequenceKind),
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::Global(GlobalStrategy::Ave),
        Strategy::Global(GlobalStrategy::Pca),
        Strategy::Global(GlobalStrategy::Last),
        Strategy::Global(GlobalStrategy::EisWord),
        Strategy::Global(GlobalStrategy::EisSentence),
        Strategy::Sequence(SequenceKind::Tex),
        Strategy::Sequence(SequenceKind::Pho),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Global(GlobalStrategy::Ave) => "ave",
            Strategy::Global(GlobalStrategy::Pca) => "pca",
            Strategy::Global(GlobalStrategy::Last) => "last",
            Strategy::Global(GlobalStrategy::EisWord) => "eis-word",
            Strategy::Global(GlobalStrategy::EisSentence) => "eis-sentence",
            Strategy::Sequence(SequenceKind::Tex) => "tex",
            Strategy::Sequence(SequenceKind::Pho) => "pho",
        }
    }

    pub fn is_global(self) -> bool {
        matches!(self, Strategy::Global(_))
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s) || st.name().replace('-', "_").eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown strategy `{s}`")))
    }
}

/// One `d`-vector standing for a whole sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalToken {
    pub strategy: GlobalStrategy,
    pub vector: Vec<f64>,
}

/// Full token sequence kept for attention fusion.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticSequence {
    pub kind: SequenceKind,
    pub matrix: Matrix,
}

fn require_rows(h: &Matrix, needed: usize) -> Result<()> {
    if h.rows() == 0 || h.cols() == 0 {
        return Err(Error::EmptyMatrix);
    }
    if h.rows() < needed {
        return Err(Error::TooFewRows {
            needed,
            found: h.rows(),
        });
    }
    Ok(())
}

fn column_mean(h: &Matrix) -> Vec<f64> {
    let mut mean = alloc::vec![0.0; h.cols()];
    for row in h.iter_rows() {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    let n = h.rows() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Mean over all token rows.
pub fn extract_ave(h: &HiddenStateMatrix) -> Result<GlobalToken> {
    require_rows(h, 1)?;
    Ok(GlobalToken {
        strategy: GlobalStrategy::Ave,
        vector: column_mean(h),
    })
}

/// The final token row, copied bitwise.
pub fn extract_last(h: &HiddenStateMatrix) -> Result<GlobalToken> {
    require_rows(h, 1)?;
    Ok(GlobalToken {
        strategy: GlobalStrategy::Last,
        vector: h.row(h.rows() - 1).to_vec(),
    })
}

/// First principal axis of the token cloud, unit norm, sign fixed so that
/// its largest-magnitude entry is positive (first such entry on ties).
///
/// Tokens are samples and hidden dimensions are features. The axis is found
/// through the `n × n` Gram matrix of the centered rows, which shares its
/// nonzero spectrum with the `d × d` covariance and stays small when `d` is
/// in the thousands.
pub fn pca_axis(h: &HiddenStateMatrix) -> Result<Vec<f64>> {
    require_rows(h, 2)?;
    let (n, d) = h.shape();
    let first = h.row(0);
    if h.iter_rows().all(|r| r == first) {
        return Err(Error::Degenerate("all token rows are identical"));
    }

    let mean = column_mean(h);
    let mut centered = Vec::with_capacity(n * d);
    for row in h.iter_rows() {
        centered.extend(row.iter().zip(&mean).map(|(x, m)| x - m));
    }
    let crow = |i: usize| &centered[i * d..(i + 1) * d];

    let mut gram = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let g = dot(crow(i), crow(j));
            gram[i * n + j] = g;
            gram[j * n + i] = g;
        }
    }
    let eig = symmetric_eigen(&gram, n);
    if eig.values[0] <= 0.0 {
        return Err(Error::Degenerate("token covariance has no positive variance"));
    }

    let u = &eig.vectors[0];
    let mut axis = alloc::vec![0.0; d];
    for (i, &ui) in u.iter().enumerate() {
        for (a, c) in axis.iter_mut().zip(crow(i)) {
            *a += ui * c;
        }
    }
    let len = norm(&axis);
    if len == 0.0 {
        return Err(Error::Degenerate("principal axis vanished"));
    }
    axis.iter_mut().for_each(|a| *a /= len);

    let pivot = axis
        .iter()
        .enumerate()
        .fold((0, 0.0_f64), |best, (i, &a)| {
            if libm::fabs(a) > best.1 {
                (i, libm::fabs(a))
            } else {
                best
            }
        })
        .0;
    if axis[pivot] < 0.0 {
        axis.iter_mut().for_each(|a| *a = -*a);
    }
    Ok(axis)
}

/// Affine map of `v` onto `[lo, hi]`, sending `min(v)` to `lo` and `max(v)`
/// to `hi`. A flat `v` (including `d = 1`) maps to the midpoint.
pub fn rescale_to_range(v: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = vmax - vmin;
    if span.is_nan() || span <= 0.0 {
        return alloc::vec![lo + 0.5 * (hi - lo); v.len()];
    }
    let scale = (hi - lo) / span;
    v.iter()
        .map(|&x| {
            if x == vmin {
                lo
            } else if x == vmax {
                hi
            } else {
                lo + (x - vmin) * scale
            }
        })
        .collect()
}

/// Principal axis rescaled to the value range of the whole source matrix.
pub fn extract_pca(h: &HiddenStateMatrix) -> Result<GlobalToken> {
    let axis = pca_axis(h)?;
    let lo = h.min_value().ok_or(Error::EmptyMatrix)?;
    let hi = h.max_value().ok_or(Error::EmptyMatrix)?;
    Ok(GlobalToken {
        strategy: GlobalStrategy::Pca,
        vector: rescale_to_range(&axis, lo, hi),
    })
}

/// Mean over every answer token of the three one-word answers
/// (emotion, intention, speaking style).
pub fn extract_eis_word(
    emotion: &HiddenStateMatrix,
    intention: &HiddenStateMatrix,
    style: &HiddenStateMatrix,
) -> Result<GlobalToken> {
    for m in [emotion, intention, style] {
        require_rows(m, 1)?;
    }
    let all = Matrix::vstack(&[emotion, intention, style])?;
    Ok(GlobalToken {
        strategy: GlobalStrategy::EisWord,
        vector: column_mean(&all),
    })
}

/// Mean over the answer tokens of the one-sentence description.
pub fn extract_eis_sentence(answer: &HiddenStateMatrix) -> Result<GlobalToken> {
    require_rows(answer, 1)?;
    Ok(GlobalToken {
        strategy: GlobalStrategy::EisSentence,
        vector: column_mean(answer),
    })
}

/// Wraps a hidden-state matrix as a token sequence. Whether a `Pho` matrix
/// really came from the phoneme string is the caller's bookkeeping.
pub fn make_sequence(h: HiddenStateMatrix, kind: SequenceKind) -> Result<SemanticSequence> {
    require_rows(&h, 1)?;
    Ok(SemanticSequence { kind, matrix: h })
}
