use std::fs;
use std::io::Write;

use serde_json::{json, Value};

use semtok_core::metrics::{cer, mcd, mel_cepstra_from_audio, wer, McdOptions, MeanStd, MelConfig, TextNormalizer};

use super::{require, Batch, EvalArgs, Report};
use crate::manifest::{keys, UtteranceRecord};
use crate::wav::read_wav;
use crate::{Error, Result};

/// Per-utterance scores. CER and WER are fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowScores {
    pub mcd: f64,
    pub cer: f64,
    pub wer: f64,
}

fn mel_config(args: &EvalArgs) -> MelConfig {
    MelConfig {
        window: args.window,
        shift: args.shift,
        n_mels: args.n_mels,
        order: args.order,
        ..MelConfig::default()
    }
}

fn score(batch: &Batch, rec: &UtteranceRecord, args: &EvalArgs, norm: &TextNormalizer) -> Result<RowScores> {
    let ref_path = batch.path(require(&rec.audio_path, "audio_path")?);
    let hyp_path = batch.path(
        rec.extra_str(keys::HYP_AUDIO_PATH)
            .ok_or_else(|| Error::MissingField(keys::HYP_AUDIO_PATH.into()))?,
    );
    let hyp_text = rec
        .extra_str(keys::HYP_TRANSCRIPT)
        .ok_or_else(|| Error::MissingField(keys::HYP_TRANSCRIPT.into()))?;
    let audio = |p: &std::path::Path| {
        read_wav(p).map_err(|source| Error::Audio {
            path: p.to_path_buf(),
            source,
        })
    };
    let (a, b) = (audio(&ref_path)?, audio(&hyp_path)?);
    if a.sample_rate != b.sample_rate {
        return Err(Error::Usage(format!(
            "sample rates differ: reference {} Hz, hypothesis {} Hz",
            a.sample_rate, b.sample_rate
        )));
    }
    let cfg = MelConfig {
        sample_rate: a.sample_rate,
        ..mel_config(args)
    };
    let opts = McdOptions {
        use_dtw: !args.no_dtw,
        skip_c0: !args.with_c0,
    };
    let ca = mel_cepstra_from_audio(&a.samples, &cfg)?;
    let cb = mel_cepstra_from_audio(&b.samples, &cfg)?;
    Ok(RowScores {
        mcd: mcd(&ca, &cb, opts)?,
        cer: cer(&rec.transcript, hyp_text, norm)?,
        wer: wer(&rec.transcript, hyp_text, norm)?,
    })
}

fn summarize(values: &[f64], scale: f64, decimals: usize) -> Value {
    let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
    match MeanStd::from_values(&scaled) {
        Some(s) => Value::String(s.display(decimals)),
        None => Value::Null,
    }
}

pub(super) fn run(args: &EvalArgs) -> Result<Report> {
    let mut probe = mel_config(args);
    probe.sample_rate = 22050;
    probe.validate().map_err(|e| Error::Usage(e.to_string()))?;
    let norm = TextNormalizer {
        cer_counts_spaces: args.cer_spaces,
        ..TextNormalizer::default()
    };
    let batch = Batch::open(&args.batch)?;
    let mut report = Report {
        rows: batch.records.len(),
        ..Default::default()
    };
    let mut lines = Vec::with_capacity(batch.records.len() + 1);
    let mut scores = Vec::new();
    for rec in &batch.records {
        match score(&batch, rec, args, &norm) {
            Ok(s) => {
                lines.push(json!({ "utt_id": rec.utt_id, "mcd": s.mcd, "cer": s.cer, "wer": s.wer }));
                scores.push(s);
            }
            Err(e) => {
                lines.push(json!({ "utt_id": rec.utt_id, "error": e.to_string() }));
                report.fail(&rec.utt_id, e);
            }
        }
    }
    let col = |f: fn(&RowScores) -> f64| scores.iter().map(f).collect::<Vec<_>>();
    let summary = json!({
        "summary": true,
        "scored": scores.len(),
        "skipped": report.failures.len(),
        "mcd_db": summarize(&col(|s| s.mcd), 1.0, 2),
        "cer_percent": summarize(&col(|s| s.cer), 100.0, 1),
        "wer_percent": summarize(&col(|s| s.wer), 100.0, 1),
    });
    println!(
        "MCD {} dB | CER {} % | WER {} % | {} scored",
        summary["mcd_db"].as_str().unwrap_or("n/a"),
        summary["cer_percent"].as_str().unwrap_or("n/a"),
        summary["wer_percent"].as_str().unwrap_or("n/a"),
        scores.len()
    );
    if !report.failures.is_empty() {
        println!("{} row(s) skipped, see report for errors", report.failures.len());
    }
    lines.push(summary);

    let path = batch.out_dir.join("report.jsonl");
    let mut buf = Vec::new();
    for l in &lines {
        writeln!(buf, "{l}").expect("writing to a Vec cannot fail");
    }
    fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
    report.outputs.push(path);
    Ok(report)
}
