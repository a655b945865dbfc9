use std::fs;
use std::io::Write;

use serde_json::json;

use semtok_core::prompts::{
    build_eis_sentence_prompt, build_eis_word_prompt, build_emotion_label_prompt_with, PromptKind, PromptTemplate,
    DEFAULT_EMOTION_LABELS,
};

use super::{Batch, PromptArgs, PromptKindArg, Report};
use crate::{Error, Result};

pub(super) fn run(args: &PromptArgs) -> Result<Report> {
    let kind = match args.kind {
        PromptKindArg::EisWord => PromptKind::EisWord,
        PromptKindArg::EisSentence => PromptKind::EisSentence,
        PromptKindArg::Emotion => PromptKind::EmotionLabel,
    };
    if args.labels.is_some() && kind != PromptKind::EmotionLabel {
        return Err(Error::Usage("--labels only applies to --kind emotion".into()));
    }
    let template = match &args.template {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            PromptTemplate::new(kind, text).map_err(|e| Error::Usage(format!("{}: {e}", p.display())))?
        }
        None => PromptTemplate::default_for(kind),
    };
    let labels: Vec<String> = match &args.labels {
        Some(l) => l.iter().map(|s| s.trim().to_string()).collect(),
        None => DEFAULT_EMOTION_LABELS.iter().map(|s| s.to_string()).collect(),
    };
    let label_refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let kind_name = match kind {
        PromptKind::EisWord => "eis-word",
        PromptKind::EisSentence => "eis-sentence",
        PromptKind::EmotionLabel => "emotion",
    };

    let batch = Batch::open(&args.batch)?;
    let mut report = Report {
        rows: batch.records.len(),
        ..Default::default()
    };
    let mut buf = Vec::new();
    for rec in &batch.records {
        let built = match kind {
            PromptKind::EisWord => build_eis_word_prompt(&rec.transcript, &template),
            PromptKind::EisSentence => build_eis_sentence_prompt(&rec.transcript, &template),
            PromptKind::EmotionLabel => build_emotion_label_prompt_with(&rec.transcript, &label_refs, &template),
        };
        match built {
            Ok(prompt) => {
                let line = json!({ "utt_id": rec.utt_id, "kind": kind_name, "prompt": prompt });
                writeln!(buf, "{line}").expect("writing to a Vec cannot fail");
            }
            Err(e) => report.fail(&rec.utt_id, e),
        }
    }
    let path = batch.out_dir.join("prompts.jsonl");
    fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
    report.outputs.push(path);
    Ok(report)
}
