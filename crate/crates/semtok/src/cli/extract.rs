use semtok_core::strategies::{
    extract_ave, extract_eis_sentence, extract_eis_word, extract_last, extract_pca, make_sequence, GlobalStrategy,
    SequenceKind, Strategy,
};
use semtok_core::Matrix;

use super::{file_stem, require, Batch, ExtractArgs, Report};
use crate::manifest::UtteranceRecord;
use crate::npy::Dtype;
use crate::{load_matrix, Result};

/// Manifest key under which a strategy's token file is recorded.
pub(crate) fn token_key(strategy: Strategy) -> String {
    format!("token_{}_path", strategy.name().replace('-', "_"))
}

/// The strategy's token as a matrix: `1 × d` for global strategies,
/// `m × d` for sequences.
pub(crate) fn semantic_matrix(batch: &Batch, rec: &UtteranceRecord, strategy: Strategy) -> Result<Matrix> {
    let load =
        |field: &Option<String>, name: &str| -> Result<Matrix> { load_matrix(batch.path(require(field, name)?)) };
    let global = |v: Vec<f64>| Matrix::new(1, v.len(), v).map_err(Into::into);
    match strategy {
        Strategy::Global(GlobalStrategy::Ave) => global(extract_ave(&load(&rec.hs_text_path, "hs_text_path")?)?.vector),
        Strategy::Global(GlobalStrategy::Pca) => global(extract_pca(&load(&rec.hs_text_path, "hs_text_path")?)?.vector),
        Strategy::Global(GlobalStrategy::Last) => {
            global(extract_last(&load(&rec.hs_text_path, "hs_text_path")?)?.vector)
        }
        Strategy::Global(GlobalStrategy::EisWord) => {
            let e = load(&rec.hs_eis_e_path, "hs_eis_e_path")?;
            let i = load(&rec.hs_eis_i_path, "hs_eis_i_path")?;
            let s = load(&rec.hs_eis_s_path, "hs_eis_s_path")?;
            global(extract_eis_word(&e, &i, &s)?.vector)
        }
        Strategy::Global(GlobalStrategy::EisSentence) => {
            global(extract_eis_sentence(&load(&rec.hs_eis_sentence_path, "hs_eis_sentence_path")?)?.vector)
        }
        Strategy::Sequence(SequenceKind::Tex) => {
            Ok(make_sequence(load(&rec.hs_text_path, "hs_text_path")?, SequenceKind::Tex)?.matrix)
        }
        Strategy::Sequence(SequenceKind::Pho) => {
            Ok(make_sequence(load(&rec.hs_phoneme_path, "hs_phoneme_path")?, SequenceKind::Pho)?.matrix)
        }
    }
}

pub(super) fn run(args: &ExtractArgs) -> Result<Report> {
    let strategy = args.strategy.strategy();
    let batch = Batch::open(&args.batch)?;
    let key = token_key(strategy);
    let mut report = Report {
        rows: batch.records.len(),
        ..Default::default()
    };
    let mut out = Vec::with_capacity(batch.records.len());
    for rec in &batch.records {
        let mut copy = batch.rebased(rec);
        let name = format!("{}.{}.npy", file_stem(&rec.utt_id), strategy.name());
        match semantic_matrix(&batch, rec, strategy).and_then(|m| batch.save(&m, Dtype::F32, &name, &mut report)) {
            Ok(()) => copy.set_extra(key.clone(), name),
            Err(e) => report.fail(&rec.utt_id, e),
        }
        out.push(copy);
    }
    batch.write_records(&out, "manifest.jsonl", &mut report)?;
    log::info!("{strategy}: {} rows, {} failed", report.rows, report.failures.len());
    Ok(report)
}
