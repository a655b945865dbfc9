use alloc::format;
use alloc::string::String;

/// Mean and sample standard deviation of a batch of per-utterance scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl MeanStd {
    /// `None` for an empty batch. A single value has zero spread.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Some(Self {
            mean,
            std: libm::sqrt(var),
            count: n,
        })
    }

    pub fn display(&self, decimals: usize) -> String {
        format_mean_std(self.mean, self.std, decimals)
    }
}

/// `"7.32 ± 0.61"`-style rendering.
pub fn format_mean_std(mean: f64, std: f64, decimals: usize) -> String {
    format!("{mean:.decimals$} \u{00B1} {std:.decimals$}")
}
