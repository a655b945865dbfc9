use semtok_core::dataset_filter::{filter_by_emotion_agreement, filter_by_speaker, split, SplitMode, SplitSpec};

use super::{Batch, FilterArgs, Report};
use crate::{Error, Result};

pub(super) fn run(args: &FilterArgs) -> Result<Report> {
    let spec = match &args.split {
        Some(f) if f.len() != 3 => return Err(Error::Usage(format!("--split takes three fractions, got {}", f.len()))),
        Some(f) => {
            let mode = if args.by_duration {
                SplitMode::Duration
            } else {
                SplitMode::Count
            };
            Some(
                SplitSpec::new(f[0], f[1], f[2], args.seed)
                    .map_err(|e| Error::Usage(e.to_string()))?
                    .with_mode(mode),
            )
        }
        None if args.by_duration => return Err(Error::Usage("--by-duration needs --split".into())),
        None => None,
    };

    let batch = Batch::open(&args.batch)?;
    let mut report = Report {
        rows: batch.records.len(),
        ..Default::default()
    };
    let mut records: Vec<_> = batch.records.iter().map(|r| batch.rebased(r)).collect();
    if let Some(s) = &args.speaker {
        records = filter_by_speaker(records, s);
    }
    if args.agreement {
        let outcome = filter_by_emotion_agreement(records);
        if outcome.missing_labels > 0 {
            log::warn!("{} row(s) dropped for missing emotion labels", outcome.missing_labels);
        }
        records = outcome.kept;
    }
    log::info!("kept {} of {} rows", records.len(), report.rows);
    batch.write_records(&records, "manifest.jsonl", &mut report)?;
    if let Some(spec) = spec {
        let parts = split(records, &spec)?;
        batch.write_records(&parts.train, "train.jsonl", &mut report)?;
        batch.write_records(&parts.dev, "dev.jsonl", &mut report)?;
        batch.write_records(&parts.test, "test.jsonl", &mut report)?;
        println!(
            "train {} | dev {} | test {}",
            parts.train.len(),
            parts.dev.len(),
            parts.test.len()
        );
    }
    Ok(report)
}
