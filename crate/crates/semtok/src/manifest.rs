//! Line-delimited JSON manifest: one utterance record per line.
//!
//! Known fields are emitted in a fixed order, absent optional fields are
//! omitted, and unknown fields are carried along verbatim after them.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use semtok_core::dataset_filter::UtteranceMeta;

/// Extra manifest keys the pipeline reads or writes.
pub mod keys {
    pub const SPEAKER: &str = "speaker";
    pub const DURATION: &str = "duration";
    pub const ACOUSTIC_PATH: &str = "acoustic_path";
    pub const HYP_AUDIO_PATH: &str = "hyp_audio_path";
    pub const HYP_TRANSCRIPT: &str = "hyp_transcript";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub utt_id: String,
    pub transcript: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phonemes: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hs_text_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hs_phoneme_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hs_eis_e_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hs_eis_i_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hs_eis_s_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hs_eis_sentence_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emotion_annotated: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emotion_predicted: Option<String>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl UtteranceRecord {
    pub fn new(utt_id: impl Into<String>, transcript: impl Into<String>) -> Self {
        Self {
            utt_id: utt_id.into(),
            transcript: transcript.into(),
            phonemes: None,
            audio_path: None,
            hs_text_path: None,
            hs_phoneme_path: None,
            hs_eis_e_path: None,
            hs_eis_i_path: None,
            hs_eis_s_path: None,
            hs_eis_sentence_path: None,
            emotion_annotated: None,
            emotion_predicted: None,
            extra: Map::new(),
        }
    }

    pub fn extra_str(&self, key: &str) -> Option<&str> {
        self.extra.get(key).and_then(Value::as_str)
    }

    pub fn set_extra(&mut self, key: impl Into<String>, value: impl Into<Value>) {
        self.extra.insert(key.into(), value.into());
    }

    /// Every path-valued field, known or extra (keys ending in `_path`).
    pub fn path_fields_mut(&mut self) -> Vec<&mut String> {
        let mut out: Vec<&mut String> = [
            &mut self.audio_path,
            &mut self.hs_text_path,
            &mut self.hs_phoneme_path,
            &mut self.hs_eis_e_path,
            &mut self.hs_eis_i_path,
            &mut self.hs_eis_s_path,
            &mut self.hs_eis_sentence_path,
        ]
        .into_iter()
        .filter_map(Option::as_mut)
        .collect();
        for (k, v) in self.extra.iter_mut() {
            if k.ends_with("_path") {
                if let Value::String(s) = v {
                    out.push(s);
                }
            }
        }
        out
    }

    /// Serializes to one JSON line without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("manifest records always serialize")
    }
}

impl UtteranceMeta for UtteranceRecord {
    fn speaker(&self) -> Option<&str> {
        self.extra_str(keys::SPEAKER)
    }

    fn emotion_annotated(&self) -> Option<&str> {
        self.emotion_annotated.as_deref()
    }

    fn emotion_predicted(&self) -> Option<&str> {
        self.emotion_predicted.as_deref()
    }

    fn duration_secs(&self) -> Option<f64> {
        self.extra.get(keys::DURATION).and_then(Value::as_f64)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {detail}")]
    Malformed { line: usize, detail: String },
    #[error("line {line}: empty utt_id")]
    EmptyId { line: usize },
    #[error("line {line}: duplicate utt_id `{utt_id}`")]
    DuplicateId { line: usize, utt_id: String },
}

pub fn parse_manifest(reader: impl BufRead) -> Result<Vec<UtteranceRecord>, ManifestError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| ManifestError::Malformed {
            line: line_no,
            detail: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: UtteranceRecord = serde_json::from_str(&line).map_err(|e| ManifestError::Malformed {
            line: line_no,
            detail: e.to_string(),
        })?;
        if rec.utt_id.is_empty() {
            return Err(ManifestError::EmptyId { line: line_no });
        }
        if !seen.insert(rec.utt_id.clone()) {
            return Err(ManifestError::DuplicateId {
                line: line_no,
                utt_id: rec.utt_id,
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<UtteranceRecord>, ManifestError> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_manifest(BufReader::new(f))
}

pub fn write_manifest(records: &[UtteranceRecord], path: impl AsRef<Path>) -> Result<(), ManifestError> {
    let path = path.as_ref();
    let mut seen = HashSet::new();
    for (i, r) in records.iter().enumerate() {
        if r.utt_id.is_empty() {
            return Err(ManifestError::EmptyId { line: i + 1 });
        }
        if !seen.insert(r.utt_id.as_str()) {
            return Err(ManifestError::DuplicateId {
                line: i + 1,
                utt_id: r.utt_id.clone(),
            });
        }
    }
    let io_err = |source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(fs::File::create(path).map_err(io_err)?);
    for r in records {
        writeln!(w, "{}", r.to_line()).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Resolves a manifest path entry against the manifest's directory.
pub fn resolve(base_dir: &Path, entry: &str) -> PathBuf {
    let p = Path::new(entry);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}

/// Lexically drops `.` and folds `..` into the preceding component.
fn normalize(p: &Path) -> PathBuf {
    let mut out = PathBuf::new();
    for c in p.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir if matches!(out.components().next_back(), Some(Component::Normal(_))) => {
                out.pop();
            }
            other => out.push(other),
        }
    }
    out
}

/// Rewrites relative path fields so they stay valid when the record moves
/// from a manifest in `from_dir` to one in `to_dir`.
pub fn rebase_paths(record: &mut UtteranceRecord, from_dir: &Path, to_dir: &Path) {
    let from = normalize(&std::path::absolute(from_dir).unwrap_or_else(|_| from_dir.to_path_buf()));
    let to = normalize(&std::path::absolute(to_dir).unwrap_or_else(|_| to_dir.to_path_buf()));
    if from == to {
        return;
    }
    for field in record.path_fields_mut() {
        if Path::new(field.as_str()).is_absolute() {
            continue;
        }
        let target = normalize(&from.join(field.as_str()));
        if let Some(rel) = pathdiff::diff_paths(&target, &to) {
            *field = rel.to_string_lossy().into_owned();
        }
    }
}
