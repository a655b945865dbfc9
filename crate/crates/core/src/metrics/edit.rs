//! Levenshtein alignment and character/word error rates.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EditStats {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub ref_len: usize,
}

impl EditStats {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    /// `(S + D + I) / N`, undefined for an empty reference.
    pub fn rate(&self) -> Option<f64> {
        (self.ref_len > 0).then(|| self.errors() as f64 / self.ref_len as f64)
    }
}

impl core::ops::AddAssign for EditStats {
    fn add_assign(&mut self, o: Self) {
        self.substitutions += o.substitutions;
        self.deletions += o.deletions;
        self.insertions += o.insertions;
        self.ref_len += o.ref_len;
    }
}

/// Unit-cost alignment of `hyp` against `reference`.
///
/// Among minimal alignments the backtrace prefers a substitution (or match),
/// then a deletion, then an insertion.
pub fn edit_stats<T: PartialEq>(reference: &[T], hyp: &[T]) -> EditStats {
    let (n, m) = (reference.len(), hyp.len());
    let w = m + 1;
    let mut dp = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        dp[i * w] = i;
    }
    for (j, cell) in dp[..w].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = dp[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hyp[j - 1]);
            let del = dp[(i - 1) * w + j] + 1;
            let ins = dp[i * w + j - 1] + 1;
            dp[i * w + j] = sub.min(del).min(ins);
        }
    }

    let mut stats = EditStats {
        ref_len: n,
        ..EditStats::default()
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dp[i * w + j];
        if i > 0 && j > 0 {
            let miss = reference[i - 1] != hyp[j - 1];
            if dp[(i - 1) * w + j - 1] + usize::from(miss) == here {
                stats.substitutions += usize::from(miss);
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && dp[(i - 1) * w + j] + 1 == here {
            stats.deletions += 1;
            i -= 1;
        } else {
            stats.insertions += 1;
            j -= 1;
        }
    }
    stats
}

/// Text clean-up applied to both reference and hypothesis before scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TextNormalizer {
    pub lowercase: bool,
    pub strip_punctuation: bool,
    pub collapse_whitespace: bool,
    /// Keep word-separating spaces as CER tokens.
    pub cer_counts_spaces: bool,
}

impl Default for TextNormalizer {
    fn default() -> Self {
        Self {
            lowercase: true,
            strip_punctuation: true,
            collapse_whitespace: true,
            cer_counts_spaces: false,
        }
    }
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}'
                | '\u{2019}'
                | '\u{201C}'
                | '\u{201D}'
                | '\u{2013}'
                | '\u{2014}'
                | '\u{2026}'
                | '\u{00AB}'
                | '\u{00BB}'
                | '\u{00BF}'
                | '\u{00A1}'
                | '\u{3001}'
                | '\u{3002}'
        )
}

impl TextNormalizer {
    pub fn normalize(&self, s: &str) -> String {
        let mut out = String::with_capacity(s.len());
        for c in s.chars() {
            if self.strip_punctuation && is_punctuation(c) {
                continue;
            }
            if self.lowercase {
                out.extend(c.to_lowercase());
            } else {
                out.push(c);
            }
        }
        if self.collapse_whitespace {
            let mut collapsed = String::with_capacity(out.len());
            for word in out.split_whitespace() {
                if !collapsed.is_empty() {
                    collapsed.push(' ');
                }
                collapsed.push_str(word);
            }
            out = collapsed;
        }
        out
    }

    fn char_tokens(&self, s: &str) -> Vec<char> {
        self.normalize(s)
            .chars()
            .filter(|c| self.cer_counts_spaces || !c.is_whitespace())
            .collect()
    }
}

pub fn char_edit_stats(reference: &str, hyp: &str, norm: &TextNormalizer) -> Result<EditStats> {
    let r = norm.char_tokens(reference);
    if r.is_empty() {
        return Err(Error::EmptyReference);
    }
    Ok(edit_stats(&r, &norm.char_tokens(hyp)))
}

pub fn word_edit_stats(reference: &str, hyp: &str, norm: &TextNormalizer) -> Result<EditStats> {
    let r = norm.normalize(reference);
    let h = norm.normalize(hyp);
    let rt: Vec<&str> = r.split_whitespace().collect();
    if rt.is_empty() {
        return Err(Error::EmptyReference);
    }
    let ht: Vec<&str> = h.split_whitespace().collect();
    Ok(edit_stats(&rt, &ht))
}

/// Character error rate over Unicode scalar values.
pub fn cer(reference: &str, hyp: &str, norm: &TextNormalizer) -> Result<f64> {
    char_edit_stats(reference, hyp, norm).map(|s| s.errors() as f64 / s.ref_len as f64)
}

/// Word error rate over whitespace-separated tokens.
pub fn wer(reference: &str, hyp: &str, norm: &TextNormalizer) -> Result<f64> {
    word_edit_stats(reference, hyp, norm).map(|s| s.errors() as f64 / s.ref_len as f64)
}
