//! Mel-cepstral distortion in dB.

use core::f64::consts::LN_10;

use super::dtw::{check_orders, dtw_align};
use super::mel::MelCepstra;
use crate::{Error, Result};

/// `10 / ln 10`, the dB scale of the distortion.
pub const MCD_SCALE: f64 = 10.0 / LN_10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McdOptions {
    pub use_dtw: bool,
    pub skip_c0: bool,
}

impl Default for McdOptions {
    fn default() -> Self {
        Self {
            use_dtw: true,
            skip_c0: true,
        }
    }
}

/// `(10 / ln 10) * sqrt(2 * sum_k (c_k - c'_k)^2)` from `k0` upward.
pub fn frame_distortion(a: &[f64], b: &[f64], skip_c0: bool) -> f64 {
    let k0 = usize::from(skip_c0);
    let sq: f64 = a[k0..].iter().zip(&b[k0..]).map(|(x, y)| (x - y) * (x - y)).sum();
    MCD_SCALE * libm::sqrt(2.0 * sq)
}

/// Mean frame distortion over the DTW path, or over frame-by-frame pairs
/// when alignment is off.
pub fn mcd(a: &MelCepstra, b: &MelCepstra, opts: McdOptions) -> Result<f64> {
    check_orders(a, b)?;
    if opts.use_dtw {
        let path = dtw_align(a, b)?.path;
        let total: f64 = path
            .iter()
            .map(|&(i, j)| frame_distortion(a.frame(i), b.frame(j), opts.skip_c0))
            .sum();
        Ok(total / path.len() as f64)
    } else {
        if a.frames() != b.frames() {
            return Err(Error::FrameCountMismatch {
                left: a.frames(),
                right: b.frames(),
            });
        }
        let total: f64 = (0..a.frames())
            .map(|i| frame_distortion(a.frame(i), b.frame(i), opts.skip_c0))
            .sum();
        Ok(total / a.frames() as f64)
    }
}
