//! Prompt construction for emotion/intention/style descriptions and for
//! emotion-label prediction, plus the post-processing of the answers.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::{Error, Result};

pub const TRANSCRIPT_SLOT: &str = "{transcript}";
pub const LABELS_SLOT: &str = "{labels}";

/// The five emotion classes of the single-speaker emotional corpus.
pub const DEFAULT_EMOTION_LABELS: [&str; 5] = ["amused", "angry", "disgusted", "neutral", "sleepy"];

const EIS_WORD_TEMPLATE: &str = "Read the following sentence.\n\
Sentence: \"{transcript}\"\n\
Describe the Emotion, the Intention and the speaking Style of this sentence \
with exactly three separate words, one word for each, in the order \
Emotion, Intention, Style. Answer with the three words only, separated by commas.";

const EIS_SENTENCE_TEMPLATE: &str = "Read the following sentence.\n\
Sentence: \"{transcript}\"\n\
In one easy-to-understand sentence, describe the Emotion, the Intention and \
the speaking Style with which this sentence would be spoken. Answer with that \
one sentence only.";

const EMOTION_LABEL_TEMPLATE: &str = "Read the following transcript.\n\
Transcript: \"{transcript}\"\n\
Which emotion does the speaker of this transcript express? Choose exactly one \
label from this list: {labels}. Answer with the label only.";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptKind {
    EisWord,
    EisSentence,
    EmotionLabel,
}

impl PromptKind {
    fn slots(self) -> &'static [&'static str] {
        match self {
            PromptKind::EisWord | PromptKind::EisSentence => &[TRANSCRIPT_SLOT],
            PromptKind::EmotionLabel => &[TRANSCRIPT_SLOT, LABELS_SLOT],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    kind: PromptKind,
    text: String,
}

impl PromptTemplate {
    /// Validates that each slot the kind needs occurs exactly once.
    pub fn new(kind: PromptKind, text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        for slot in kind.slots() {
            let count = text.matches(slot).count();
            if count != 1 {
                return Err(Error::Template(format!(
                    "placeholder {slot} must occur exactly once, found {count}"
                )));
            }
        }
        if kind != PromptKind::EmotionLabel && text.contains(LABELS_SLOT) {
            return Err(Error::Template(format!(
                "{LABELS_SLOT} is not allowed in this template"
            )));
        }
        Ok(Self { kind, text })
    }

    pub fn default_for(kind: PromptKind) -> Self {
        let text = match kind {
            PromptKind::EisWord => EIS_WORD_TEMPLATE,
            PromptKind::EisSentence => EIS_SENTENCE_TEMPLATE,
            PromptKind::EmotionLabel => EMOTION_LABEL_TEMPLATE,
        };
        Self {
            kind,
            text: text.to_string(),
        }
    }

    pub fn kind(&self) -> PromptKind {
        self.kind
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Single left-to-right pass; substituted values are never re-scanned,
    /// so braces inside a transcript survive literally.
    fn render(&self, values: &[(&str, &str)]) -> String {
        let mut out = String::with_capacity(self.text.len() + values.iter().map(|v| v.1.len()).sum::<usize>());
        let mut rest = self.text.as_str();
        loop {
            let next = values
                .iter()
                .filter_map(|(slot, val)| rest.find(slot).map(|pos| (pos, *slot, *val)))
                .min_by_key(|(pos, _, _)| *pos);
            match next {
                Some((pos, slot, val)) => {
                    out.push_str(&rest[..pos]);
                    out.push_str(val);
                    rest = &rest[pos + slot.len()..];
                }
                None => {
                    out.push_str(rest);
                    return out;
                }
            }
        }
    }
}

fn require_transcript(transcript: &str) -> Result<()> {
    if transcript.trim().is_empty() {
        Err(Error::EmptyTranscript)
    } else {
        Ok(())
    }
}

fn require_kind(tpl: &PromptTemplate, kind: PromptKind) -> Result<()> {
    if tpl.kind != kind {
        return Err(Error::Template(format!(
            "expected a {kind:?} template, got {:?}",
            tpl.kind
        )));
    }
    Ok(())
}

pub fn build_eis_word_prompt(transcript: &str, tpl: &PromptTemplate) -> Result<String> {
    require_transcript(transcript)?;
    require_kind(tpl, PromptKind::EisWord)?;
    Ok(tpl.render(&[(TRANSCRIPT_SLOT, transcript)]))
}

pub fn build_eis_sentence_prompt(transcript: &str, tpl: &PromptTemplate) -> Result<String> {
    require_transcript(transcript)?;
    require_kind(tpl, PromptKind::EisSentence)?;
    Ok(tpl.render(&[(TRANSCRIPT_SLOT, transcript)]))
}

/// Emotion-label prompt with the default template.
pub fn build_emotion_label_prompt(transcript: &str, labels: &[&str]) -> Result<String> {
    build_emotion_label_prompt_with(
        transcript,
        labels,
        &PromptTemplate::default_for(PromptKind::EmotionLabel),
    )
}

pub fn build_emotion_label_prompt_with(transcript: &str, labels: &[&str], tpl: &PromptTemplate) -> Result<String> {
    require_transcript(transcript)?;
    require_kind(tpl, PromptKind::EmotionLabel)?;
    if labels.is_empty() || labels.iter().any(|l| l.trim().is_empty()) {
        return Err(Error::EmptyLabels);
    }
    let joined = labels.join(", ");
    Ok(tpl.render(&[(TRANSCRIPT_SLOT, transcript), (LABELS_SLOT, &joined)]))
}

fn strip_edges(s: &str) -> &str {
    s.trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation())
}

/// Splits a three-word answer on commas, semicolons, newlines or spaces.
pub fn parse_eis_word_answer(answer: &str) -> Result<[String; 3]> {
    let words: Vec<&str> = answer
        .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
        .map(strip_edges)
        .filter(|w| !w.is_empty())
        .collect();
    match words.as_slice() {
        [e, i, s] => Ok([e.to_string(), i.to_string(), s.to_string()]),
        _ => Err(Error::AnswerParse(format!("expected three words, got {}", words.len()))),
    }
}

pub fn parse_eis_sentence_answer(answer: &str) -> Result<String> {
    let s = answer.trim();
    if s.is_empty() {
        return Err(Error::AnswerParse("empty sentence".into()));
    }
    Ok(s.to_string())
}

/// Lowercased label, which must be a member of `labels`.
pub fn parse_emotion_label(answer: &str, labels: &[&str]) -> Result<String> {
    let got = strip_edges(answer).to_lowercase();
    labels
        .iter()
        .find(|l| l.trim().to_lowercase() == got)
        .map(|l| l.trim().to_lowercase())
        .ok_or_else(|| Error::AnswerParse(format!("`{}` is not one of the labels", answer.trim())))
}
