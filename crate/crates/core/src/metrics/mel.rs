//! Mel-cepstral analysis: Hann-windowed FFT magnitude, triangular mel
//! filterbank, natural log and orthonormal DCT-II.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MelConfig {
    pub sample_rate: u32,
    pub window: usize,
    pub shift: usize,
    pub n_mels: usize,
    /// Highest cepstral index `K`; frames carry `K + 1` coefficients.
    pub order: usize,
    pub fmin: f64,
    /// Upper filterbank edge; Nyquist when `None`.
    pub fmax: Option<f64>,
    pub log_floor: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            sample_rate: 22050,
            window: 1024,
            shift: 256,
            n_mels: 80,
            order: 12,
            fmin: 0.0,
            fmax: None,
            log_floor: 1e-10,
        }
    }
}

impl MelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.sample_rate == 0 {
            return bad("sample rate must be positive");
        }
        if self.window < 2 || self.shift == 0 {
            return bad("window must be at least 2 samples and shift positive");
        }
        if self.n_mels == 0 || self.order >= self.n_mels {
            return bad("cepstral order must be below the number of mel bands");
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        let fmax = self.fmax.unwrap_or(nyquist);
        if !(self.fmin >= 0.0 && fmax > self.fmin && fmax <= nyquist) {
            return bad("filterbank edges must satisfy 0 <= fmin < fmax <= nyquist");
        }
        if self.log_floor.is_nan() || self.log_floor <= 0.0 {
            return bad("log floor must be positive");
        }
        Ok(())
    }

    /// Number of frames for `len` samples (no padding).
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.window {
            0
        } else {
            (len - self.window) / self.shift + 1
        }
    }
}

/// Per-frame mel-cepstral coefficients `c_0..c_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelCepstra {
    /// `frames × (K + 1)`.
    pub coeffs: Matrix,
    pub sample_rate: u32,
    pub frame_shift: usize,
}

impl MelCepstra {
    pub fn new(coeffs: Matrix, sample_rate: u32, frame_shift: usize) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        Ok(Self {
            coeffs,
            sample_rate,
            frame_shift,
        })
    }

    pub fn frames(&self) -> usize {
        self.coeffs.rows()
    }

    /// Cepstral order `K`.
    pub fn order(&self) -> usize {
        self.coeffs.cols() - 1
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        self.coeffs.row(i)
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * libm::log10(1.0 + f / 700.0)
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (libm::pow(10.0, m / 2595.0) - 1.0)
}

/// In-place iterative radix-2 FFT; `re.len()` must be a power of two.
fn fft_radix2(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = -2.0 * PI / len as f64;
        for start in (0..n).step_by(len) {
            for k in 0..len / 2 {
                let (s, c) = libm::sincos(ang * k as f64);
                let a = start + k;
                let b = a + len / 2;
                let tr = re[b] * c - im[b] * s;
                let ti = re[b] * s + im[b] * c;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
            }
        }
        len <<= 1;
    }
}

/// Precomputed window, filterbank and DCT tables for one [`MelConfig`].
#[derive(Debug, Clone)]
pub struct MelAnalyzer {
    cfg: MelConfig,
    window: Vec<f64>,
    /// `n_mels` rows over `window/2 + 1` bins.
    filters: Vec<Vec<f64>>,
    /// `(order + 1)` rows over `n_mels` inputs.
    dct: Vec<Vec<f64>>,
}

impl MelAnalyzer {
    pub fn new(cfg: MelConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.window;
        // periodic Hann
        let window = (0..n)
            .map(|i| 0.5 - 0.5 * libm::cos(2.0 * PI * i as f64 / n as f64))
            .collect();

        let bins = n / 2 + 1;
        let sr = cfg.sample_rate as f64;
        let fmax = cfg.fmax.unwrap_or(sr / 2.0);
        let (mel_lo, mel_hi) = (hz_to_mel(cfg.fmin), hz_to_mel(fmax));
        let edges: Vec<f64> = (0..cfg.n_mels + 2)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (cfg.n_mels + 1) as f64))
            .collect();
        let filters = (0..cfg.n_mels)
            .map(|m| {
                let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                (0..bins)
                    .map(|k| {
                        let f = k as f64 * sr / n as f64;
                        let up = (f - lo) / (mid - lo);
                        let down = (hi - f) / (hi - mid);
                        up.min(down).max(0.0)
                    })
                    .collect()
            })
            .collect();

        let nm = cfg.n_mels as f64;
        let dct = (0..=cfg.order)
            .map(|k| {
                let scale = if k == 0 {
                    libm::sqrt(1.0 / nm)
                } else {
                    libm::sqrt(2.0 / nm)
                };
                (0..cfg.n_mels)
                    .map(|i| scale * libm::cos(PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * nm)))
                    .collect()
            })
            .collect();

        Ok(Self {
            cfg,
            window,
            filters,
            dct,
        })
    }

    pub fn config(&self) -> &MelConfig {
        &self.cfg
    }

    fn magnitude(&self, frame: &[f64], re: &mut Vec<f64>, im: &mut Vec<f64>) -> Vec<f64> {
        let n = frame.len();
        let bins = n / 2 + 1;
        re.clear();
        re.extend(frame.iter().zip(&self.window).map(|(x, w)| x * w));
        if n.is_power_of_two() {
            im.clear();
            im.resize(n, 0.0);
            fft_radix2(re, im);
            (0..bins).map(|k| libm::hypot(re[k], im[k])).collect()
        } else {
            (0..bins)
                .map(|k| {
                    let (mut sr, mut si) = (0.0, 0.0);
                    for (t, x) in re.iter().enumerate() {
                        let (s, c) = libm::sincos(-2.0 * PI * (k * t % n) as f64 / n as f64);
                        sr += x * c;
                        si += x * s;
                    }
                    libm::hypot(sr, si)
                })
                .collect()
        }
    }

    pub fn analyze(&self, pcm: &[f64]) -> Result<MelCepstra> {
        if let Some(i) = pcm.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteSample(i));
        }
        let frames = self.cfg.frame_count(pcm.len());
        if frames == 0 {
            return Err(Error::AudioTooShort {
                len: pcm.len(),
                window: self.cfg.window,
            });
        }
        let width = self.cfg.order + 1;
        let mut data = Vec::with_capacity(frames * width);
        let (mut re, mut im) = (Vec::new(), Vec::new());
        let mut log_mel = vec![0.0; self.cfg.n_mels];
        for f in 0..frames {
            let start = f * self.cfg.shift;
            let mag = self.magnitude(&pcm[start..start + self.cfg.window], &mut re, &mut im);
            for (out, filt) in log_mel.iter_mut().zip(&self.filters) {
                let e: f64 = filt.iter().zip(&mag).map(|(w, m)| w * m).sum();
                *out = libm::log(e.max(self.cfg.log_floor));
            }
            data.extend(
                self.dct
                    .iter()
                    .map(|row| row.iter().zip(&log_mel).map(|(c, x)| c * x).sum::<f64>()),
            );
        }
        MelCepstra::new(
            Matrix::from_parts(frames, width, data),
            self.cfg.sample_rate,
            self.cfg.shift,
        )
    }
}

/// One-shot convenience wrapper around [`MelAnalyzer`].
pub fn mel_cepstra_from_audio(pcm: &[f64], cfg: &MelConfig) -> Result<MelCepstra> {
    MelAnalyzer::new(cfg.clone())?.analyze(pcm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sine(freq: f64, sr: u32, len: usize) -> Vec<f64> {
        (0..len)
            .map(|i| 0.5 * (2.0 * PI * freq * i as f64 / sr as f64).sin())
            .collect()
    }

    #[test]
    fn fft_matches_direct_dft() {
        let x: Vec<f64> = (0..16).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.3).collect();
        let (mut re, mut im) = (x.clone(), vec![0.0; 16]);
        fft_radix2(&mut re, &mut im);
        for k in 0..16 {
            let (mut sr, mut si) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let a = -2.0 * PI * (k * t) as f64 / 16.0;
                sr += v * a.cos();
                si += v * a.sin();
            }
            assert_relative_eq!(re[k], sr, epsilon = 1e-12);
            assert_relative_eq!(im[k], si, epsilon = 1e-12);
        }
    }

    #[test]
    fn non_power_of_two_window_agrees_with_fft_path_shape() {
        let cfg = MelConfig {
            window: 600,
            shift: 200,
            n_mels: 20,
            order: 8,
            ..MelConfig::default()
        };
        let c = mel_cepstra_from_audio(&sine(300.0, 22050, 2000), &cfg).unwrap();
        assert_eq!(c.frames(), (2000 - 600) / 200 + 1);
        assert_eq!(c.order(), 8);
    }

    #[test]
    fn silence_frames_are_identical() {
        let c = mel_cepstra_from_audio(&vec![0.0; 4096], &MelConfig::default()).unwrap();
        let first = c.frame(0).to_vec();
        assert!(c.coeffs.iter_rows().all(|r| r == first.as_slice()));
        // log floor only: c0 = sqrt(80) * ln(1e-10), the rest vanish
        assert_relative_eq!(first[0], 80f64.sqrt() * 1e-10f64.ln(), epsilon = 1e-9);
        assert!(first[1..].iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn sine_frame_count_and_determinism() {
        let pcm = sine(440.0, 22050, 22050);
        let a = mel_cepstra_from_audio(&pcm, &MelConfig::default()).unwrap();
        let b = mel_cepstra_from_audio(&pcm.clone(), &MelConfig::default()).unwrap();
        assert_eq!(a.frames(), (22050 - 1024) / 256 + 1);
        assert_eq!(a.frames(), 83);
        assert_eq!(a.coeffs.cols(), 13);
        assert_eq!(a, b);
    }

    #[test]
    fn input_errors() {
        let cfg = MelConfig::default();
        assert_eq!(
            mel_cepstra_from_audio(&[0.0; 100], &cfg),
            Err(Error::AudioTooShort { len: 100, window: 1024 })
        );
        assert_eq!(
            mel_cepstra_from_audio(&[], &cfg),
            Err(Error::AudioTooShort { len: 0, window: 1024 })
        );
        let mut pcm = vec![0.0; 2048];
        pcm[5] = f64::NAN;
        assert_eq!(mel_cepstra_from_audio(&pcm, &cfg), Err(Error::NonFiniteSample(5)));
        assert!(MelConfig {
            order: 80,
            ..cfg.clone()
        }
        .validate()
        .is_err());
        assert!(MelConfig { sample_rate: 0, ..cfg }.validate().is_err());
    }
}
