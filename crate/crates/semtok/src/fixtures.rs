//! Synthetic, seed-deterministic fixture sets for dry runs and tests.
//!
//! A fixture set is a manifest plus every file it references: text,
//! phoneme and EIS hidden states, acoustic embeddings, reference and
//! hypothesis audio, and transcript pairs.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semtok_core::prompts::DEFAULT_EMOTION_LABELS;
use semtok_core::Matrix;

use crate::manifest::{keys, write_manifest, UtteranceRecord};
use crate::npy::Dtype;
use crate::wav::write_wav_f32;
use crate::{save_matrix, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub utterances: usize,
    /// Hidden width of the (pretend) language model.
    pub d_sem: usize,
    /// Acoustic embedding width.
    pub d_model: usize,
    pub sample_rate: u32,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            utterances: 5,
            d_sem: 16,
            d_model: 8,
            sample_rate: 22050,
            seed: 2024,
        }
    }
}

const SENTENCES: [(&str, &str); 8] = [
    (
        "The birch canoe slid on the smooth planks.",
        "The birch canoe slid on smooth planks.",
    ),
    (
        "Glue the sheet to the dark blue background.",
        "Glue the sheet to the dark blue background.",
    ),
    (
        "It is easy to tell the depth of a well.",
        "It is easy to tell the depth of the well.",
    ),
    (
        "These days a chicken leg is a rare dish.",
        "These days a chicken leg is a rare dish.",
    ),
    (
        "Rice is often served in round bowls.",
        "Rice is often served in brown bowls.",
    ),
    (
        "The juice of lemons makes fine punch.",
        "The juice of lemons makes fine punch.",
    ),
    (
        "The box was thrown beside the parked truck.",
        "The box was thrown beside the park truck.",
    ),
    (
        "Four hours of steady work faced us.",
        "Four hours of steady work faced us.",
    ),
];

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    // Values are rounded through f32 so the stored files hold them exactly.
    let v = (0..rows * cols)
        .map(|_| rng.random_range(-2.0f64..2.0) as f32 as f64)
        .collect();
    Matrix::new(rows, cols, v).expect("finite")
}

fn tone(rng: &mut ChaCha8Rng, base_hz: f64, secs: f64, sr: u32, noise: f64) -> Vec<f64> {
    let n = (secs * sr as f64) as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / sr as f64;
            let env = 0.5 - 0.5 * (2.0 * PI * t / secs).cos();
            let s = 0.4 * (2.0 * PI * base_hz * t).sin()
                + 0.2 * (2.0 * PI * 2.0 * base_hz * t).sin()
                + 0.1 * (2.0 * PI * 3.1 * base_hz * t).sin();
            env * s + noise * rng.random_range(-1.0..1.0)
        })
        .collect()
}

/// Writes a fixture set into `dir` and returns the manifest path.
pub fn write_fixtures(dir: &Path, spec: &FixtureSpec) -> Result<PathBuf> {
    if spec.utterances == 0 || spec.d_sem == 0 || spec.d_model == 0 {
        return Err(Error::Usage("fixture sizes must be positive".into()));
    }
    for sub in ["hs", "emb", "wav"] {
        fs::create_dir_all(dir.join(sub)).map_err(|e| Error::io(dir.join(sub), e))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut records = Vec::with_capacity(spec.utterances);

    for u in 0..spec.utterances {
        let id = format!("utt{:03}", u + 1);
        let (text, hyp_text) = SENTENCES[u % SENTENCES.len()];
        let mut rec = UtteranceRecord::new(&id, text);
        rec.phonemes = Some(
            text.to_lowercase()
                .split_whitespace()
                .map(|w| w.chars().filter(char::is_ascii_alphabetic).collect::<String>())
                .collect::<Vec<_>>()
                .join(" | "),
        );

        let n_text = rng.random_range(3..=9);
        let n_pho = rng.random_range(6..=14);
        let put = |name: &str, rows: usize, cols: usize, rng: &mut ChaCha8Rng| -> Result<String> {
            let rel = format!("{}/{id}.{name}.npy", if name == "acoustic" { "emb" } else { "hs" });
            save_matrix(&random_matrix(rng, rows, cols), Dtype::F32, dir.join(&rel))?;
            Ok(rel)
        };
        rec.hs_text_path = Some(put("text", n_text, spec.d_sem, &mut rng)?);
        rec.hs_phoneme_path = Some(put("pho", n_pho, spec.d_sem, &mut rng)?);
        let (ne, ni, ns) = (
            rng.random_range(1..=3),
            rng.random_range(1..=3),
            rng.random_range(1..=3),
        );
        rec.hs_eis_e_path = Some(put("eis_e", ne, spec.d_sem, &mut rng)?);
        rec.hs_eis_i_path = Some(put("eis_i", ni, spec.d_sem, &mut rng)?);
        rec.hs_eis_s_path = Some(put("eis_s", ns, spec.d_sem, &mut rng)?);
        let n_sent = rng.random_range(5..=12);
        rec.hs_eis_sentence_path = Some(put("eis_sentence", n_sent, spec.d_sem, &mut rng)?);
        let t = rng.random_range(8..=20);
        rec.set_extra(keys::ACOUSTIC_PATH, put("acoustic", t, spec.d_model, &mut rng)?);

        let secs = 0.4 + 0.05 * u as f64;
        let base = 140.0 + 25.0 * u as f64;
        let reference = tone(&mut rng, base, secs, spec.sample_rate, 0.01);
        let hypothesis = tone(&mut rng, base * 1.03, secs + 0.03, spec.sample_rate, 0.02);
        let ref_rel = format!("wav/{id}.ref.wav");
        let hyp_rel = format!("wav/{id}.hyp.wav");
        for (rel, pcm) in [(&ref_rel, &reference), (&hyp_rel, &hypothesis)] {
            write_wav_f32(dir.join(rel), pcm, spec.sample_rate).map_err(|source| Error::Audio {
                path: dir.join(rel),
                source,
            })?;
        }
        rec.audio_path = Some(ref_rel);
        rec.set_extra(keys::HYP_AUDIO_PATH, hyp_rel);
        rec.set_extra(keys::HYP_TRANSCRIPT, hyp_text);

        let label = DEFAULT_EMOTION_LABELS[u % DEFAULT_EMOTION_LABELS.len()];
        rec.emotion_annotated = Some(label.to_string());
        // Every third utterance disagrees with its annotation.
        let predicted = if u % 3 == 2 {
            DEFAULT_EMOTION_LABELS[(u + 1) % DEFAULT_EMOTION_LABELS.len()]
        } else {
            label
        };
        rec.emotion_predicted = Some(predicted.to_string());
        rec.set_extra(keys::SPEAKER, if u % 4 == 3 { "jenie" } else { "bea" });
        rec.set_extra(keys::DURATION, secs);
        records.push(rec);
    }

    let manifest = dir.join("manifest.jsonl");
    write_manifest(&records, &manifest)?;
    Ok(manifest)
}
